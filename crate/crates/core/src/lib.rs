//! Simulation and verification laboratory for distributed estimation under
//! per-sensor communication budgets.
//!
//! `n` sensors each observe an independent draw from a common model
//! `P_theta` and may write at most `k_i` bits onto a public blackboard,
//! possibly interactively. The crate provides:
//!
//! * observation models and their local geometry ([`models`]),
//! * blackboard protocols as labeled binary trees with exact transcript
//!   enumeration ([`blackboard`]),
//! * concrete estimation protocols and their execution ([`protocols`]),
//! * Monte Carlo risk measurement and scaling-law fits ([`risk`]),
//! * exact small-instance information quantities ([`oracle`]),
//! * the geometric inequalities behind the lower bounds ([`geometry`]),
//! * closed-form minimax rates and auxiliary bounds ([`bounds`]).
//!
//! All information quantities are reported in nats unless a function name
//! says otherwise.

pub mod blackboard;
pub mod bounds;
pub mod error;
pub mod geometry;
pub mod models;
pub mod oracle;
pub mod protocols;
pub mod risk;
pub mod rng;
pub mod util;

pub use blackboard::{Predicate, ProtocolTree, Transcript};
pub use error::{Error, Result};
pub use models::{Family, FisherInfo, HypothesisCube, ModelSpec, Observation};
