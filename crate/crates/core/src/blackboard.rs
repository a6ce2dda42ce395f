//! Blackboard communication protocols as budgeted binary trees.
//!
//! A protocol for `n` sensors with per-sensor bit budgets `k_1..k_n` is a
//! binary tree of depth `D = sum_i k_i`. Each internal node `v` carries a
//! sensor label `l_v` and a binary predicate `a_v`; when the walk reaches
//! `v`, sensor `l_v` evaluates `a_v` on its own observation and writes the
//! resulting bit to the blackboard, which selects the child (1 = right).
//! Budget validity means every root-to-leaf path visits exactly `k_i` nodes
//! labeled `i`, so transcripts are exactly the bit strings of length `D` and
//! sensor `i` writes `k_i` of the bits wherever its turns happen to fall —
//! possibly at positions that depend on earlier bits (interactivity).
//!
//! Two structural facts carry the whole analysis:
//!
//! * cut-paste factorization: `P(Y = y) = prod_i E_P[p_{i,y}(X_i)]`, where
//!   `p_{i,y}(x) = prod_{v in path(y): l_v = i} b_{v,y}(x)` and `b_{v,y}`
//!   is `a_v` if the path leaves `v` rightward and `1 - a_v` otherwise;
//! * total-weight identities: for any fixed inputs,
//!   `sum_y prod_j p_{j,y}(x_j) = 1` (exactly one leaf is realized, so
//!   this holds for *any* tree) and `sum_y prod_{j!=i} p_{j,y}(x_j) =
//!   2^{k_i}` (sensor `i`'s bits are unconstrained exactly `k_i` times on
//!   every path consistent with the others). The second identity is the
//!   budget-sensitive one; it breaks on invalid trees and is the negative
//!   control for [`check_protocol_identities`].

use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec, Observation};
use crate::rng;
use crate::util;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Hard cap on total tree depth `sum_i k_i` for transcript enumeration
/// (`2^depth` transcripts).
pub const TRANSCRIPT_DEPTH_CAP: usize = 24;

/// A node predicate: what the labeled sensor computes from its observation.
#[derive(Clone)]
pub enum Predicate {
    /// Lookup over a finite sample space, indexed by the canonical
    /// observation index (bits little-endian; multinomial outcome minus 1).
    TruthTable(Vec<bool>),
    /// `a(x) = 1 iff <w, x> > b` on real-vector (or bit-vector)
    /// observations. An all-zero `w` makes the predicate constant.
    Threshold { w: Vec<f64>, b: f64 },
    /// Arbitrary function of the observation and the shared public seed.
    /// Executable but excluded from exact enumeration.
    Callback(Arc<dyn Fn(&Observation, u64) -> bool + Send + Sync>),
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::TruthTable(t) => f.debug_tuple("TruthTable").field(t).finish(),
            Predicate::Threshold { w, b } => f
                .debug_struct("Threshold")
                .field("w", w)
                .field("b", b)
                .finish(),
            Predicate::Callback(_) => f.write_str("Callback(<fn>)"),
        }
    }
}

impl Predicate {
    /// Evaluates the predicate on one observation. `shared_seed` is the
    /// public randomness visible to every sensor; only callbacks use it.
    pub fn eval(&self, x: &Observation, shared_seed: u64) -> Result<bool> {
        match self {
            Predicate::TruthTable(table) => {
                let idx = match x {
                    Observation::Bits(bits) => {
                        bits.iter().enumerate().map(|(j, &b)| (b as usize) << j).sum()
                    }
                    Observation::Outcome(o) => {
                        if *o == 0 {
                            return Err(Error::ShapeMismatch("outcome index 0".into()));
                        }
                        o - 1
                    }
                    Observation::Vector(_) => {
                        return Err(Error::ShapeMismatch(
                            "truth-table predicate on a real-vector observation".into(),
                        ))
                    }
                };
                table.get(idx).copied().ok_or_else(|| {
                    Error::ShapeMismatch(format!(
                        "observation index {idx} outside truth table of length {}",
                        table.len()
                    ))
                })
            }
            Predicate::Threshold { w, b } => {
                let dot = match x {
                    Observation::Vector(v) => {
                        if v.len() != w.len() {
                            return Err(Error::ShapeMismatch(format!(
                                "threshold weight length {} vs observation length {}",
                                w.len(),
                                v.len()
                            )));
                        }
                        v.iter().zip(w).map(|(x, w)| x * w).sum::<f64>()
                    }
                    Observation::Bits(bits) => {
                        if bits.len() != w.len() {
                            return Err(Error::ShapeMismatch(format!(
                                "threshold weight length {} vs observation length {}",
                                w.len(),
                                bits.len()
                            )));
                        }
                        bits.iter().zip(w).map(|(&x, w)| f64::from(x) * w).sum()
                    }
                    Observation::Outcome(_) => {
                        return Err(Error::ShapeMismatch(
                            "threshold predicate on a categorical observation".into(),
                        ))
                    }
                };
                Ok(dot > *b)
            }
            Predicate::Callback(f) => Ok(f(x, shared_seed)),
        }
    }
}

/// Where a node's outgoing edge lands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChildRef {
    Node(usize),
    Leaf,
}

/// One internal node of the protocol tree.
#[derive(Clone, Debug)]
pub struct Node {
    /// 0-based sensor index that speaks at this node.
    pub label: usize,
    pub predicate: Predicate,
    /// Followed when the predicate is false (bit 0).
    pub left: ChildRef,
    /// Followed when the predicate is true (bit 1).
    pub right: ChildRef,
}

/// A blackboard protocol: an arena of nodes plus the per-sensor bit budgets.
#[derive(Clone, Debug)]
pub struct ProtocolTree {
    pub sensors: usize,
    /// `budgets[i]` = number of bits sensor `i` writes on every path.
    pub budgets: Vec<usize>,
    /// Arena index of the root node.
    pub root: usize,
    pub nodes: Vec<Node>,
}

/// A full blackboard content: the bits along one root-to-leaf path,
/// `bits[0]` being the root's bit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transcript {
    pub bits: Vec<u8>,
}

impl Transcript {
    /// Index of this transcript among all `2^depth` bit strings, reading the
    /// bit string as a big-endian binary number (so the displayed string
    /// equals the index in binary).
    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn from_index(index: usize, depth: usize) -> Self {
        let bits = (0..depth)
            .rev()
            .map(|t| ((index >> t) & 1) as u8)
            .collect();
        Transcript { bits }
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Outcome of budget validation.
#[derive(Clone, Debug)]
pub struct BudgetReport {
    pub valid: bool,
    /// First violating root-to-leaf path (bits walked so far) and what went
    /// wrong there, if invalid.
    pub violation: Option<BudgetViolation>,
}

#[derive(Clone, Debug)]
pub struct BudgetViolation {
    pub path: Vec<u8>,
    /// Per-sensor label counts seen along the violating path.
    pub counts: Vec<usize>,
    pub detail: String,
}

/// Slack report for the total-weight identities at one input tuple.
#[derive(Clone, Debug)]
pub struct IdentityReport {
    /// `sum_y prod_j p_{j,y}(x_j)`; equals 1 for any tree.
    pub total: f64,
    /// `sum_y prod_{j != i} p_{j,y}(x_j)` per sensor; equals `2^{k_i}` for
    /// budget-valid trees.
    pub leave_one_out: Vec<f64>,
    pub total_slack: f64,
    pub leave_one_out_slack: Vec<f64>,
}

impl IdentityReport {
    pub fn max_slack(&self) -> f64 {
        self.leave_one_out_slack
            .iter()
            .fold(self.total_slack, |m, &s| m.max(s))
    }
}

/// Exact per-sensor path functionals for every transcript.
///
/// `expectations[t][i][y] = E_{P_{theta_t}}[p_{i,y}(X)]`, and when requested
/// `score_weighted[i][y] = E_{P_{theta0}}[S(X) p_{i,y}(X)]` (a length-`d`
/// vector per entry, score taken at the model's reference parameter).
#[derive(Clone, Debug)]
pub struct PathFunctionals {
    pub depth: usize,
    pub expectations: Vec<Vec<Vec<f64>>>,
    pub score_weighted: Option<Vec<Vec<Vec<f64>>>>,
}

impl ProtocolTree {
    /// Basic shape checks: labels in range, child indices in range, at least
    /// one bit of total budget. Budget validity is a separate, semantic
    /// check ([`ProtocolTree::validate_budget`]).
    pub fn new(
        sensors: usize,
        budgets: Vec<usize>,
        root: usize,
        nodes: Vec<Node>,
    ) -> Result<Self> {
        if sensors == 0 || budgets.len() != sensors {
            return Err(Error::ShapeMismatch(format!(
                "budget list length {} vs sensor count {sensors}",
                budgets.len()
            )));
        }
        if budgets.iter().sum::<usize>() == 0 {
            return Err(Error::InsufficientBudget(
                "total bit budget is zero; the tree has no nodes".into(),
            ));
        }
        if root >= nodes.len() {
            return Err(Error::ShapeMismatch(format!(
                "root index {root} outside node arena of size {}",
                nodes.len()
            )));
        }
        for (id, node) in nodes.iter().enumerate() {
            if node.label >= sensors {
                return Err(Error::ShapeMismatch(format!(
                    "node {id} labeled {} but there are {sensors} sensors",
                    node.label
                )));
            }
            for child in [node.left, node.right] {
                if let ChildRef::Node(c) = child {
                    if c >= nodes.len() {
                        return Err(Error::ShapeMismatch(format!(
                            "node {id} points to child {c} outside arena of size {}",
                            nodes.len()
                        )));
                    }
                }
            }
        }
        Ok(ProtocolTree {
            sensors,
            budgets,
            root,
            nodes,
        })
    }

    /// Total path length `sum_i k_i`.
    pub fn depth(&self) -> usize {
        self.budgets.iter().sum()
    }

    /// Number of transcripts `2^depth`. Errors above the enumeration cap.
    pub fn transcript_count(&self) -> Result<usize> {
        let d = self.depth();
        if d > TRANSCRIPT_DEPTH_CAP {
            return Err(Error::CapacityExceeded {
                what: "transcript enumeration depth",
                limit: TRANSCRIPT_DEPTH_CAP,
                requested: d,
            });
        }
        Ok(1usize << d)
    }

    /// Checks that every root-to-leaf path visits exactly `k_i` nodes
    /// labeled `i`. Cycles and over-length paths are reported as violations
    /// rather than looping (the walk stops one step past the total budget).
    pub fn validate_budget(&self) -> BudgetReport {
        let depth = self.depth();
        let mut counts = vec![0usize; self.sensors];
        let mut path = Vec::with_capacity(depth);
        let violation =
            self.validate_walk(ChildRef::Node(self.root), depth, &mut counts, &mut path);
        BudgetReport {
            valid: violation.is_none(),
            violation,
        }
    }

    fn validate_walk(
        &self,
        at: ChildRef,
        depth: usize,
        counts: &mut Vec<usize>,
        path: &mut Vec<u8>,
    ) -> Option<BudgetViolation> {
        match at {
            ChildRef::Leaf => {
                for (i, (&c, &k)) in counts.iter().zip(&self.budgets).enumerate() {
                    if c != k {
                        return Some(BudgetViolation {
                            path: path.clone(),
                            counts: counts.clone(),
                            detail: format!(
                                "path ends with sensor {i} having written {c} bits, budget is {k}"
                            ),
                        });
                    }
                }
                None
            }
            ChildRef::Node(v) => {
                if path.len() >= depth {
                    return Some(BudgetViolation {
                        path: path.clone(),
                        counts: counts.clone(),
                        detail: format!("path exceeds the total budget of {depth} bits"),
                    });
                }
                let label = self.nodes[v].label;
                counts[label] += 1;
                if counts[label] > self.budgets[label] {
                    let v = BudgetViolation {
                        path: path.clone(),
                        counts: counts.clone(),
                        detail: format!(
                            "sensor {label} writes bit {} of a budget of {}",
                            counts[label], self.budgets[label]
                        ),
                    };
                    counts[label] -= 1;
                    return Some(v);
                }
                for (bit, child) in [(0u8, self.nodes[v].left), (1u8, self.nodes[v].right)] {
                    path.push(bit);
                    let found = self.validate_walk(child, depth, counts, path);
                    path.pop();
                    if found.is_some() {
                        counts[label] -= 1;
                        return found;
                    }
                }
                counts[label] -= 1;
                None
            }
        }
    }

    /// Runs the protocol on one observation per sensor.
    pub fn execute(&self, samples: &[Observation], shared_seed: u64) -> Result<Transcript> {
        if samples.len() != self.sensors {
            return Err(Error::ShapeMismatch(format!(
                "{} observations for {} sensors",
                samples.len(),
                self.sensors
            )));
        }
        let depth = self.depth();
        let mut bits = Vec::with_capacity(depth);
        let mut at = ChildRef::Node(self.root);
        while let ChildRef::Node(v) = at {
            if bits.len() >= depth {
                return Err(Error::InsufficientBudget(
                    "execution path exceeds the total budget; tree is not budget-valid".into(),
                ));
            }
            let node = &self.nodes[v];
            let bit = node.predicate.eval(&samples[node.label], shared_seed)?;
            bits.push(u8::from(bit));
            at = if bit { node.right } else { node.left };
        }
        if bits.len() != depth {
            return Err(Error::InsufficientBudget(format!(
                "execution reached a leaf after {} bits, total budget is {depth}",
                bits.len()
            )));
        }
        Ok(Transcript { bits })
    }

    /// The per-sensor factor `p_{i,y}(x)`: product over nodes labeled `i`
    /// on the path of transcript `y` of `a_v(x)` (path exits right) or
    /// `1 - a_v(x)` (path exits left). Deterministic predicates give values
    /// in `{0, 1}`.
    pub fn sensor_factor(
        &self,
        sensor: usize,
        y: &Transcript,
        x: &Observation,
        shared_seed: u64,
    ) -> Result<f64> {
        if sensor >= self.sensors {
            return Err(Error::ShapeMismatch(format!(
                "sensor {sensor} out of range for {} sensors",
                self.sensors
            )));
        }
        let mut product = 1.0;
        let mut at = ChildRef::Node(self.root);
        for &bit in &y.bits {
            let v = match at {
                ChildRef::Node(v) => v,
                ChildRef::Leaf => {
                    return Err(Error::ShapeMismatch(
                        "transcript longer than the tree's paths".into(),
                    ))
                }
            };
            let node = &self.nodes[v];
            if node.label == sensor {
                let a = f64::from(node.predicate.eval(x, shared_seed)?);
                product *= if bit == 1 { a } else { 1.0 - a };
            }
            at = if bit == 1 { node.right } else { node.left };
        }
        if at != ChildRef::Leaf {
            return Err(Error::ShapeMismatch(
                "transcript shorter than the tree's paths".into(),
            ));
        }
        Ok(product)
    }

    /// Evaluates both total-weight identities at one input tuple by walking
    /// every root-to-leaf path and accumulating, per leaf, the all-sensor
    /// product and each leave-one-out product. Sums are pairwise-reduced in
    /// transcript order, so the result is bitwise reproducible.
    pub fn check_protocol_identities(
        &self,
        inputs: &[Observation],
        shared_seed: u64,
    ) -> Result<IdentityReport> {
        if inputs.len() != self.sensors {
            return Err(Error::ShapeMismatch(format!(
                "{} inputs for {} sensors",
                inputs.len(),
                self.sensors
            )));
        }
        let depth = self.depth();
        let mut totals = Vec::new();
        let mut loo: Vec<Vec<f64>> = vec![Vec::new(); self.sensors];
        let mut factors = vec![1.0f64; self.sensors];
        self.identity_walk(
            ChildRef::Node(self.root),
            depth,
            0,
            inputs,
            shared_seed,
            &mut factors,
            &mut totals,
            &mut loo,
        )?;
        let total = util::pairwise_sum(&totals);
        let leave_one_out: Vec<f64> = loo.iter().map(|v| util::pairwise_sum(v)).collect();
        let leave_one_out_slack = leave_one_out
            .iter()
            .zip(&self.budgets)
            .map(|(&s, &k)| (s - (1u64 << k) as f64).abs())
            .collect();
        Ok(IdentityReport {
            total_slack: (total - 1.0).abs(),
            total,
            leave_one_out,
            leave_one_out_slack,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn identity_walk(
        &self,
        at: ChildRef,
        depth: usize,
        walked: usize,
        inputs: &[Observation],
        shared_seed: u64,
        factors: &mut Vec<f64>,
        totals: &mut Vec<f64>,
        loo: &mut Vec<Vec<f64>>,
    ) -> Result<()> {
        match at {
            ChildRef::Leaf => {
                let product: f64 = factors.iter().product();
                totals.push(product);
                for (i, acc) in loo.iter_mut().enumerate() {
                    let rest: f64 = factors
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, f)| f)
                        .product();
                    acc.push(rest);
                }
                Ok(())
            }
            ChildRef::Node(v) => {
                if walked >= depth {
                    return Err(Error::InsufficientBudget(
                        "path exceeds the total budget during identity evaluation".into(),
                    ));
                }
                let node = &self.nodes[v];
                let a = f64::from(node.predicate.eval(&inputs[node.label], shared_seed)?);
                for (bit, child, b) in [(0u8, node.left, 1.0 - a), (1u8, node.right, a)] {
                    let _ = bit;
                    let saved = factors[node.label];
                    factors[node.label] = saved * b;
                    self.identity_walk(
                        child,
                        depth,
                        walked + 1,
                        inputs,
                        shared_seed,
                        factors,
                        totals,
                        loo,
                    )?;
                    factors[node.label] = saved;
                }
                Ok(())
            }
        }
    }

    /// Exact per-sensor expectations `E_{P_theta}[p_{i,y}(X)]` for every
    /// transcript `y` and every requested parameter, and optionally the
    /// score-weighted vectors `E_{P_theta0}[S(X) p_{i,y}(X)]`.
    ///
    /// Requires closed-form-integrable predicates: truth tables (or
    /// thresholds) on finite sample spaces, axis-aligned thresholds on
    /// Gaussian models. Callback predicates are executable but not
    /// enumerable.
    pub fn path_functionals(
        &self,
        model: &ModelSpec,
        thetas: &[Vec<f64>],
        with_scores: bool,
    ) -> Result<PathFunctionals> {
        let depth = self.depth();
        let count = self.transcript_count()?;
        let finite = matches!(
            model.family,
            Family::ProductBernoulli | Family::Multinomial
        );

        // Precompute per-theta mass tables and the score table (finite case).
        let space = if finite { model.sample_space()? } else { Vec::new() };
        let mut pmf_tables: Vec<Vec<f64>> = Vec::new();
        let mut score_table: Vec<Vec<f64>> = Vec::new();
        let mut pmf0: Vec<f64> = Vec::new();
        if finite {
            for theta in thetas {
                model.check_admissible(theta)?;
                pmf_tables.push(
                    space
                        .iter()
                        .map(|x| model.pmf(theta, x))
                        .collect::<Result<Vec<f64>>>()?,
                );
            }
            if with_scores {
                pmf0 = space
                    .iter()
                    .map(|x| model.pmf(&model.theta0, x))
                    .collect::<Result<Vec<f64>>>()?;
                score_table = space
                    .iter()
                    .map(|x| model.score(x))
                    .collect::<Result<Vec<Vec<f64>>>>()?;
            }
        } else {
            for theta in thetas {
                model.check_admissible(theta)?;
            }
        }

        let mut expectations = vec![vec![vec![0.0; count]; self.sensors]; thetas.len()];
        let mut score_weighted = if with_scores {
            Some(vec![vec![vec![0.0; model.d]; count]; self.sensors])
        } else {
            None
        };

        let init = if finite {
            FactorState::Table(vec![true; space.len()])
        } else {
            FactorState::Box {
                intervals: vec![(f64::NEG_INFINITY, f64::INFINITY); model.d],
                alive: true,
            }
        };
        let mut states = vec![init; self.sensors];
        let ctx = EnumCtx {
            model,
            thetas,
            space: &space,
            pmf_tables: &pmf_tables,
            pmf0: &pmf0,
            score_table: &score_table,
        };
        self.functional_walk(
            ChildRef::Node(self.root),
            depth,
            0,
            0,
            &ctx,
            &mut states,
            &mut expectations,
            &mut score_weighted,
        )?;
        Ok(PathFunctionals {
            depth,
            expectations,
            score_weighted,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn functional_walk(
        &self,
        at: ChildRef,
        depth: usize,
        walked: usize,
        index: usize,
        ctx: &EnumCtx<'_>,
        states: &mut Vec<FactorState>,
        expectations: &mut [Vec<Vec<f64>>],
        score_weighted: &mut Option<Vec<Vec<Vec<f64>>>>,
    ) -> Result<()> {
        match at {
            ChildRef::Leaf => {
                if walked != depth {
                    return Err(Error::InsufficientBudget(format!(
                        "leaf at depth {walked}, total budget is {depth}; tree is not budget-valid"
                    )));
                }
                for (i, state) in states.iter().enumerate() {
                    for (t, _) in ctx.thetas.iter().enumerate() {
                        expectations[t][i][index] = state.expectation(ctx, t);
                    }
                    if let Some(sw) = score_weighted.as_mut() {
                        sw[i][index] = state.score_weighted(ctx);
                    }
                }
                Ok(())
            }
            ChildRef::Node(v) => {
                if walked >= depth {
                    return Err(Error::InsufficientBudget(
                        "path exceeds the total budget during enumeration".into(),
                    ));
                }
                let node = &self.nodes[v];
                for (bit, child) in [(0u8, node.left), (1u8, node.right)] {
                    let saved = states[node.label].clone();
                    states[node.label].apply(&node.predicate, bit, ctx)?;
                    self.functional_walk(
                        child,
                        depth,
                        walked + 1,
                        (index << 1) | bit as usize,
                        ctx,
                        states,
                        expectations,
                        score_weighted,
                    )?;
                    states[node.label] = saved;
                }
                Ok(())
            }
        }
    }

    /// Exact transcript distribution `P(Y=y) = prod_i E_{P_theta}[p_{i,y}]`
    /// over all `2^depth` transcripts, in transcript-index order.
    pub fn transcript_distribution(&self, model: &ModelSpec, theta: &[f64]) -> Result<Vec<f64>> {
        let pf = self.path_functionals(model, &[theta.to_vec()], false)?;
        let count = 1usize << pf.depth;
        let mut probs = vec![1.0; count];
        for sensor_exps in &pf.expectations[0] {
            for (p, e) in probs.iter_mut().zip(sensor_exps) {
                *p *= e;
            }
        }
        Ok(probs)
    }
}

/// Shared read-only context for the enumeration walk.
struct EnumCtx<'a> {
    model: &'a ModelSpec,
    thetas: &'a [Vec<f64>],
    space: &'a [Observation],
    pmf_tables: &'a [Vec<f64>],
    pmf0: &'a [f64],
    score_table: &'a [Vec<f64>],
}

/// The running per-sensor factor along a path: an indicator over a finite
/// sample space, or an axis-aligned box for Gaussian observations.
#[derive(Clone)]
enum FactorState {
    Table(Vec<bool>),
    Box {
        /// Per-coordinate interval `(lo, hi)`; boundary mass is zero.
        intervals: Vec<(f64, f64)>,
        /// Cleared when a constant predicate contradicts the branch bit.
        alive: bool,
    },
}

impl FactorState {
    fn apply(&mut self, predicate: &Predicate, bit: u8, ctx: &EnumCtx<'_>) -> Result<()> {
        match self {
            FactorState::Table(table) => match predicate {
                Predicate::Callback(_) => Err(Error::UnsupportedEnumeration(
                    "callback predicates cannot be integrated in closed form".into(),
                )),
                _ => {
                    for (idx, alive) in table.iter_mut().enumerate() {
                        if *alive {
                            let a = predicate.eval(&ctx.space[idx], 0)?;
                            *alive = a == (bit == 1);
                        }
                    }
                    Ok(())
                }
            },
            FactorState::Box { intervals, alive } => {
                let Predicate::Threshold { w, b } = predicate else {
                    return Err(Error::UnsupportedEnumeration(
                        "gaussian enumeration needs threshold predicates".into(),
                    ));
                };
                let nonzero: Vec<usize> =
                    w.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(c, _)| c).collect();
                match nonzero.as_slice() {
                    [] => {
                        // Constant predicate: a(x) = 1{0 > b}.
                        let a = 0.0 > *b;
                        if a != (bit == 1) {
                            *alive = false;
                        }
                        Ok(())
                    }
                    [c] => {
                        let c = *c;
                        if c >= intervals.len() {
                            return Err(Error::ShapeMismatch(format!(
                                "threshold coordinate {c} outside dimension {}",
                                intervals.len()
                            )));
                        }
                        let t = b / w[c];
                        // a(x) = 1{x_c > t} if w_c > 0, 1{x_c < t} if w_c < 0.
                        let above = (w[c] > 0.0) == (bit == 1);
                        let (lo, hi) = &mut intervals[c];
                        if above {
                            *lo = lo.max(t);
                        } else {
                            *hi = hi.min(t);
                        }
                        Ok(())
                    }
                    _ => Err(Error::UnsupportedEnumeration(
                        "threshold predicate is not axis-aligned (several nonzero weights)"
                            .into(),
                    )),
                }
            }
        }
    }

    /// `E_{P_theta}[p(X)]` for this factor.
    fn expectation(&self, ctx: &EnumCtx<'_>, theta_idx: usize) -> f64 {
        match self {
            FactorState::Table(table) => {
                let pmf = &ctx.pmf_tables[theta_idx];
                let terms: Vec<f64> = table
                    .iter()
                    .zip(pmf)
                    .map(|(&alive, &p)| if alive { p } else { 0.0 })
                    .collect();
                util::pairwise_sum(&terms)
            }
            FactorState::Box { intervals, alive } => {
                if !alive {
                    return 0.0;
                }
                let theta = &ctx.thetas[theta_idx];
                let sigma = ctx.model.sigma;
                intervals
                    .iter()
                    .zip(theta)
                    .map(|(&(lo, hi), &t)| {
                        util::std_normal_interval((lo - t) / sigma, (hi - t) / sigma)
                    })
                    .product()
            }
        }
    }

    /// `E_{P_theta0}[S(X) p(X)]`, the score taken at the reference point.
    fn score_weighted(&self, ctx: &EnumCtx<'_>) -> Vec<f64> {
        let d = ctx.model.d;
        match self {
            FactorState::Table(table) => {
                (0..d)
                    .map(|c| {
                        let terms: Vec<f64> = table
                            .iter()
                            .enumerate()
                            .map(|(idx, &alive)| {
                                if alive {
                                    ctx.pmf0[idx] * ctx.score_table[idx][c]
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        util::pairwise_sum(&terms)
                    })
                    .collect()
            }
            FactorState::Box { intervals, alive } => {
                if !alive {
                    return vec![0.0; d];
                }
                let theta0 = &ctx.model.theta0;
                let sigma = ctx.model.sigma;
                // Per-coordinate standardized interval mass and the partial
                // expectation E[(X_c - t0)/sigma^2 ; X_c in (lo, hi)] =
                // (pdf(alpha) - pdf(beta)) / sigma under P_theta0.
                let masses: Vec<f64> = intervals
                    .iter()
                    .zip(theta0)
                    .map(|(&(lo, hi), &t)| {
                        util::std_normal_interval((lo - t) / sigma, (hi - t) / sigma)
                    })
                    .collect();
                (0..d)
                    .map(|c| {
                        let (lo, hi) = intervals[c];
                        let alpha = (lo - theta0[c]) / sigma;
                        let beta = (hi - theta0[c]) / sigma;
                        let partial = if beta <= alpha {
                            0.0
                        } else {
                            (util::std_normal_pdf(alpha) - util::std_normal_pdf(beta)) / sigma
                        };
                        masses
                            .iter()
                            .enumerate()
                            .filter(|(cc, _)| *cc != c)
                            .map(|(_, m)| m)
                            .product::<f64>()
                            * partial
                    })
                    .collect()
            }
        }
    }
}

/// Generates a budget-valid tree with uniformly random labeling among the
/// sensors whose budget is not yet exhausted on the current path (so label
/// order can differ across paths — interactive shapes arise naturally) and
/// random predicates matched to the model's sample space.
pub fn random_tree(model: &ModelSpec, budgets: &[usize], seed: u64) -> Result<ProtocolTree> {
    let depth: usize = budgets.iter().sum();
    if depth > TRANSCRIPT_DEPTH_CAP {
        return Err(Error::CapacityExceeded {
            what: "random tree depth",
            limit: TRANSCRIPT_DEPTH_CAP,
            requested: depth,
        });
    }
    if depth == 0 {
        return Err(Error::InsufficientBudget(
            "all budgets are zero; no tree to generate".into(),
        ));
    }
    let finite = matches!(
        model.family,
        Family::ProductBernoulli | Family::Multinomial
    );
    let space_size = model.space_size();
    if finite && space_size.is_none() {
        return Err(Error::CapacityExceeded {
            what: "truth-table sample space",
            limit: crate::models::ENUMERATION_DIM_CAP,
            requested: model.d,
        });
    }
    let mut rng = rng::stream(seed, &[0x7472_6565]); // "tree"
    let mut nodes = Vec::new();
    let mut remaining = budgets.to_vec();
    let root = build_random(
        model,
        finite,
        space_size.unwrap_or(0),
        &mut remaining,
        &mut nodes,
        &mut rng,
    );
    let root = match root {
        ChildRef::Node(v) => v,
        ChildRef::Leaf => unreachable!("depth > 0 was checked"),
    };
    ProtocolTree::new(budgets.len(), budgets.to_vec(), root, nodes)
}

fn build_random(
    model: &ModelSpec,
    finite: bool,
    space_size: usize,
    remaining: &mut Vec<usize>,
    nodes: &mut Vec<Node>,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> ChildRef {
    let live: Vec<usize> = remaining
        .iter()
        .enumerate()
        .filter(|(_, k)| **k > 0)
        .map(|(i, _)| i)
        .collect();
    if live.is_empty() {
        return ChildRef::Leaf;
    }
    let label = live[(rng::open_unit(rng) * live.len() as f64) as usize % live.len()];
    let predicate = if finite {
        Predicate::TruthTable((0..space_size).map(|_| rng.next_u64() & 1 == 1).collect())
    } else {
        let c = (rng::open_unit(rng) * model.d as f64) as usize % model.d;
        let mut w = vec![0.0; model.d];
        w[c] = if rng.next_u64() & 1 == 1 { 1.0 } else { -1.0 };
        let b = model.theta0[c] + model.sigma * util::std_normal_quantile(rng::open_unit(rng));
        Predicate::Threshold { w, b }
    };
    remaining[label] -= 1;
    let left = build_random(model, finite, space_size, remaining, nodes, rng);
    let right = build_random(model, finite, space_size, remaining, nodes, rng);
    remaining[label] += 1;
    nodes.push(Node {
        label,
        predicate,
        left,
        right,
    });
    ChildRef::Node(nodes.len() - 1)
}

// --- JSON serialization ---------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    sensors: usize,
    budgets: Vec<usize>,
    root: usize,
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    label: usize,
    predicate: PredicateDoc,
    /// Child node id, or -1 for a leaf.
    left: i64,
    right: i64,
}

#[derive(Serialize, Deserialize)]
struct PredicateDoc {
    #[serde(rename = "type")]
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<Vec<bool>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    w: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
}

fn child_to_doc(c: ChildRef) -> i64 {
    match c {
        ChildRef::Node(v) => v as i64,
        ChildRef::Leaf => -1,
    }
}

fn child_from_doc(v: i64) -> Result<ChildRef> {
    if v == -1 {
        Ok(ChildRef::Leaf)
    } else if v >= 0 {
        Ok(ChildRef::Node(v as usize))
    } else {
        Err(Error::ShapeMismatch(format!(
            "child id {v} is neither a node id nor the leaf marker -1"
        )))
    }
}

impl ProtocolTree {
    /// Serializes to the JSON document `{sensors, budgets, root, nodes:[{id,
    /// label, predicate{type, table|w,b}, left, right}]}` with `-1` marking
    /// leaves. Floats round-trip bit-exactly (shortest-representation
    /// printing). Callback predicates have no serialized form.
    pub fn to_json(&self) -> Result<String> {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| {
                let predicate = match &n.predicate {
                    Predicate::TruthTable(t) => PredicateDoc {
                        kind: "truth_table".into(),
                        table: Some(t.clone()),
                        w: None,
                        b: None,
                    },
                    Predicate::Threshold { w, b } => PredicateDoc {
                        kind: "threshold".into(),
                        table: None,
                        w: Some(w.clone()),
                        b: Some(*b),
                    },
                    Predicate::Callback(_) => {
                        return Err(Error::UnsupportedEnumeration(
                            "callback predicates have no serialized form".into(),
                        ))
                    }
                };
                Ok(NodeDoc {
                    id,
                    label: n.label,
                    predicate,
                    left: child_to_doc(n.left),
                    right: child_to_doc(n.right),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let doc = TreeDoc {
            sensors: self.sensors,
            budgets: self.budgets.clone(),
            root: self.root,
            nodes,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDoc = serde_json::from_str(text)?;
        let nodes = doc
            .nodes
            .into_iter()
            .enumerate()
            .map(|(pos, n)| {
                if n.id != pos {
                    return Err(Error::ShapeMismatch(format!(
                        "node at position {pos} has id {}; ids must be dense and in order",
                        n.id
                    )));
                }
                let predicate = match n.predicate.kind.as_str() {
                    "truth_table" => Predicate::TruthTable(n.predicate.table.ok_or_else(
                        || Error::ShapeMismatch(format!("node {pos}: truth_table without table")),
                    )?),
                    "threshold" => Predicate::Threshold {
                        w: n.predicate.w.ok_or_else(|| {
                            Error::ShapeMismatch(format!("node {pos}: threshold without w"))
                        })?,
                        b: n.predicate.b.ok_or_else(|| {
                            Error::ShapeMismatch(format!("node {pos}: threshold without b"))
                        })?,
                    },
                    other => {
                        return Err(Error::ShapeMismatch(format!(
                            "node {pos}: unknown predicate type {other:?}"
                        )))
                    }
                };
                Ok(Node {
                    label: n.label,
                    predicate,
                    left: child_from_doc(n.left)?,
                    right: child_from_doc(n.right)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ProtocolTree::new(doc.sensors, doc.budgets, doc.root, nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;

    /// n sensors, k bits each, every node forwarding the raw Bernoulli bit
    /// (d = 1): the canonical non-interactive tree.
    fn forward_bit_tree(n: usize, k: usize) -> ProtocolTree {
        let depth = n * k;
        let mut nodes = Vec::new();
        // Build a complete tree where depth t speaks sensor t / k... since
        // all nodes at a level share the label, one chain of distinct nodes
        // per level would alias subtrees; build the full 2^depth - 1 arena.
        fn build(level: usize, depth: usize, k: usize, nodes: &mut Vec<Node>) -> ChildRef {
            if level == depth {
                return ChildRef::Leaf;
            }
            let left = build(level + 1, depth, k, nodes);
            let right = build(level + 1, depth, k, nodes);
            nodes.push(Node {
                label: level / k,
                predicate: Predicate::TruthTable(vec![false, true]),
                left,
                right,
            });
            ChildRef::Node(nodes.len() - 1)
        }
        let root = match build(0, depth, k, &mut nodes) {
            ChildRef::Node(v) => v,
            ChildRef::Leaf => unreachable!(),
        };
        ProtocolTree::new(n, vec![k; n], root, nodes).unwrap()
    }

    #[test]
    fn forward_bit_execution() {
        let tree = forward_bit_tree(1, 1);
        assert!(tree.validate_budget().valid);
        let y = tree.execute(&[Observation::Bits(vec![1])], 0).unwrap();
        assert_eq!(y.to_string(), "1");
        let y = tree.execute(&[Observation::Bits(vec![0])], 0).unwrap();
        assert_eq!(y.to_string(), "0");
    }

    #[test]
    fn two_forwarded_fair_bits_are_uniform() {
        let tree = forward_bit_tree(2, 1);
        let model = ModelSpec::bernoulli(1, 0.5).unwrap();
        let probs = tree.transcript_distribution(&model, &[0.5]).unwrap();
        assert_eq!(probs.len(), 4);
        for p in probs {
            assert!((p - 0.25).abs() < 1e-15, "expected 1/4, got {p}");
        }
    }

    #[test]
    fn gaussian_sign_bit_is_fair() {
        let tree = ProtocolTree::new(
            1,
            vec![1],
            0,
            vec![Node {
                label: 0,
                predicate: Predicate::Threshold {
                    w: vec![1.0],
                    b: 0.0,
                },
                left: ChildRef::Leaf,
                right: ChildRef::Leaf,
            }],
        )
        .unwrap();
        let model = ModelSpec::gaussian(1, 1.0).unwrap();
        let probs = tree.transcript_distribution(&model, &[0.0]).unwrap();
        assert!((probs[0] - 0.5).abs() < 1e-15 && (probs[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_two_level_matches_interval_closed_forms() {
        // Root: x > 0; then x > 1 (right branch) / x > -1 (left branch).
        let nodes = vec![
            Node {
                label: 0,
                predicate: Predicate::Threshold {
                    w: vec![1.0],
                    b: 1.0,
                },
                left: ChildRef::Leaf,
                right: ChildRef::Leaf,
            },
            Node {
                label: 0,
                predicate: Predicate::Threshold {
                    w: vec![1.0],
                    b: -1.0,
                },
                left: ChildRef::Leaf,
                right: ChildRef::Leaf,
            },
            Node {
                label: 0,
                predicate: Predicate::Threshold {
                    w: vec![1.0],
                    b: 0.0,
                },
                left: ChildRef::Node(1),
                right: ChildRef::Node(0),
            },
        ];
        let tree = ProtocolTree::new(1, vec![2], 2, nodes).unwrap();
        assert!(tree.validate_budget().valid);
        let model = ModelSpec::gaussian(1, 1.0).unwrap();
        let probs = tree.transcript_distribution(&model, &[0.0]).unwrap();
        let phi = util::std_normal_cdf;
        // Transcript order: 00 = {x <= -1}, 01 = {-1 < x <= 0},
        // 10 = {0 < x <= 1}, 11 = {x > 1}.
        let want = [phi(-1.0), phi(0.0) - phi(-1.0), phi(1.0) - phi(0.0), 1.0 - phi(1.0)];
        for (p, w) in probs.iter().zip(want) {
            assert!((p - w).abs() < 1e-14, "got {p}, want {w}");
        }
        let total: f64 = probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn budget_validation_accepts_and_rejects() {
        let good = forward_bit_tree(2, 1);
        assert!(good.validate_budget().valid);

        // Root labeled 0, left child labeled 0 again: sensor 0 over budget
        // on the left path and sensor 1 silent there.
        let nodes = vec![
            Node {
                label: 0,
                predicate: Predicate::TruthTable(vec![false, true]),
                left: ChildRef::Leaf,
                right: ChildRef::Leaf,
            },
            Node {
                label: 1,
                predicate: Predicate::TruthTable(vec![false, true]),
                left: ChildRef::Leaf,
                right: ChildRef::Leaf,
            },
            Node {
                label: 0,
                predicate: Predicate::TruthTable(vec![false, true]),
                left: ChildRef::Node(0),
                right: ChildRef::Node(1),
            },
        ];
        let bad = ProtocolTree::new(2, vec![1, 1], 2, nodes).unwrap();
        let report = bad.validate_budget();
        assert!(!report.valid);
        let v = report.violation.unwrap();
        assert_eq!(v.path, vec![0], "violation should be found on the left branch");
        assert!(v.detail.contains("sensor 0"));
    }

    #[test]
    fn cycle_is_reported_not_looped() {
        let nodes = vec![Node {
            label: 0,
            predicate: Predicate::TruthTable(vec![false, true]),
            left: ChildRef::Node(0),
            right: ChildRef::Leaf,
        }];
        let tree = ProtocolTree::new(1, vec![1], 0, nodes).unwrap();
        let report = tree.validate_budget();
        assert!(!report.valid);
    }

    #[test]
    fn identities_hold_on_random_trees_and_fail_on_negative_control() {
        let model = ModelSpec::bernoulli(1, 0.5).unwrap();
        for seed in 0..50u64 {
            let budgets = match seed % 3 {
                0 => vec![1, 2],
                1 => vec![2, 1, 1],
                _ => vec![1, 1],
            };
            let tree = random_tree(&model, &budgets, seed).unwrap();
            assert!(tree.validate_budget().valid, "seed {seed}");
            let n = budgets.len();
            // All input tuples of the binary space.
            for mask in 0..1usize << n {
                let inputs: Vec<Observation> = (0..n)
                    .map(|j| Observation::Bits(vec![((mask >> j) & 1) as u8]))
                    .collect();
                let report = tree.check_protocol_identities(&inputs, 0).unwrap();
                assert!(
                    report.max_slack() <= 1e-9,
                    "seed {seed} mask {mask}: slack {}",
                    report.max_slack()
                );
            }
        }

        // Negative control: budget-invalid tree keeps total = 1 (any tree
        // does) but breaks a leave-one-out identity.
        let nodes = vec![
            Node {
                label: 0,
                predicate: Predicate::TruthTable(vec![false, true]),
                left: ChildRef::Leaf,
                right: ChildRef::Leaf,
            },
            Node {
                label: 1,
                predicate: Predicate::TruthTable(vec![false, true]),
                left: ChildRef::Leaf,
                right: ChildRef::Leaf,
            },
            Node {
                label: 0,
                predicate: Predicate::TruthTable(vec![false, true]),
                left: ChildRef::Node(0),
                right: ChildRef::Node(1),
            },
        ];
        let bad = ProtocolTree::new(2, vec![1, 1], 2, nodes).unwrap();
        let inputs = [Observation::Bits(vec![1]), Observation::Bits(vec![0])];
        let report = bad.check_protocol_identities(&inputs, 0).unwrap();
        assert!(report.total_slack < 1e-12, "total weight is tree-shape-free");
        assert!(
            report.leave_one_out_slack.iter().any(|&s| s > 0.5),
            "invalid tree must violate a leave-one-out identity: {:?}",
            report.leave_one_out
        );
    }

    #[test]
    fn heterogeneous_budgets_give_2_to_ki() {
        let model = ModelSpec::bernoulli(1, 0.5).unwrap();
        let tree = random_tree(&model, &[1, 2], 99).unwrap();
        let inputs = [Observation::Bits(vec![1]), Observation::Bits(vec![1])];
        let report = tree.check_protocol_identities(&inputs, 0).unwrap();
        assert!((report.leave_one_out[0] - 2.0).abs() < 1e-12);
        assert!((report.leave_one_out[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn execute_matches_factorization_selection() {
        // The transcript picked by execute is the unique y with
        // prod_j p_{j,y}(x_j) = 1.
        let model = ModelSpec::multinomial_uniform(2).unwrap();
        for seed in 0..200u64 {
            let tree = random_tree(&model, &[1, 1, 1], seed).unwrap();
            let inputs: Vec<Observation> = (0..3)
                .map(|j| Observation::Outcome(1 + ((seed as usize + j) % 3)))
                .collect();
            let y = tree.execute(&inputs, 0).unwrap();
            let mut hits = 0;
            for idx in 0..tree.transcript_count().unwrap() {
                let cand = Transcript::from_index(idx, tree.depth());
                let product: f64 = (0..3)
                    .map(|j| tree.sensor_factor(j, &cand, &inputs[j], 0).unwrap())
                    .product();
                if product == 1.0 {
                    hits += 1;
                    assert_eq!(cand, y, "factorization selects the executed transcript");
                } else {
                    assert_eq!(product, 0.0);
                }
            }
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn histogram_converges_to_exact_distribution() {
        let model = ModelSpec::bernoulli(2, 0.5).unwrap();
        let theta = [0.3, 0.65];
        let tree = random_tree(&model, &[1, 1], 5).unwrap();
        let exact = tree.transcript_distribution(&model, &theta).unwrap();
        let n_draws = 1_000_000;
        let mut counts = vec![0u64; exact.len()];
        for rep in 0..n_draws {
            let mut r = rng::stream(42, &[rep as u64]);
            let xs: Vec<Observation> = (0..2).map(|_| model.sample_one(&theta, &mut r)).collect();
            let y = tree.execute(&xs, 0).unwrap();
            counts[y.index()] += 1;
        }
        let tv: f64 = exact
            .iter()
            .zip(&counts)
            .map(|(p, &c)| (p - c as f64 / n_draws as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 4e-3, "TV distance {tv} too large at N={n_draws}");
    }

    #[test]
    fn distribution_sums_to_one_and_is_relabel_invariant() {
        let model = ModelSpec::multinomial_uniform(2).unwrap();
        let theta = [0.5, 0.2];
        for seed in 0..20u64 {
            let tree = random_tree(&model, &[1, 1, 1], seed).unwrap();
            let probs = tree.transcript_distribution(&model, &theta).unwrap();
            let total = util::pairwise_sum(&probs);
            assert!((total - 1.0).abs() < 1e-12, "seed {seed}: total {total}");

            // Sensors are exchangeable (iid observations), so any
            // relabeling leaves the transcript distribution unchanged.
            let mut relabeled = tree.clone();
            for node in &mut relabeled.nodes {
                node.label = (node.label + 1) % 3;
            }
            let probs2 = relabeled.transcript_distribution(&model, &theta).unwrap();
            for (p, q) in probs.iter().zip(&probs2) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_trees_include_interactive_shapes() {
        // Collect the label sequence of each root-to-leaf path; interactive
        // trees have paths with different sequences.
        fn label_paths(tree: &ProtocolTree, at: ChildRef, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            match at {
                ChildRef::Leaf => out.push(cur.clone()),
                ChildRef::Node(v) => {
                    cur.push(tree.nodes[v].label);
                    label_paths(tree, tree.nodes[v].left, cur, out);
                    label_paths(tree, tree.nodes[v].right, cur, out);
                    cur.pop();
                }
            }
        }
        let model = ModelSpec::bernoulli(1, 0.5).unwrap();
        let mut interactive = 0;
        for seed in 0..100u64 {
            let tree = random_tree(&model, &[2, 2], seed).unwrap();
            let mut paths = Vec::new();
            label_paths(&tree, ChildRef::Node(tree.root), &mut Vec::new(), &mut paths);
            if paths.windows(2).any(|w| w[0] != w[1]) {
                interactive += 1;
            }
        }
        assert!(
            interactive > 20,
            "only {interactive}/100 random trees were interactive"
        );
    }

    #[test]
    fn json_round_trip_is_exact() {
        let gaussian = ModelSpec::gaussian(2, 1.5).unwrap();
        let finite = ModelSpec::bernoulli(2, 0.4).unwrap();
        for (seed, model) in [(3u64, &gaussian), (4, &finite), (5, &gaussian)] {
            let tree = random_tree(model, &[1, 2], seed).unwrap();
            let json = tree.to_json().unwrap();
            let parsed = ProtocolTree::from_json(&json).unwrap();
            assert_eq!(parsed.to_json().unwrap(), json);
            // Thresholds round-trip bit-exactly.
            for (a, b) in tree.nodes.iter().zip(&parsed.nodes) {
                if let (
                    Predicate::Threshold { w: w1, b: b1 },
                    Predicate::Threshold { w: w2, b: b2 },
                ) = (&a.predicate, &b.predicate)
                {
                    assert_eq!(b1.to_bits(), b2.to_bits());
                    for (x, y) in w1.iter().zip(w2) {
                        assert_eq!(x.to_bits(), y.to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn callback_predicates_execute_but_do_not_enumerate() {
        let cb = Predicate::Callback(Arc::new(|x: &Observation, seed: u64| match x {
            Observation::Bits(b) => (b[0] as u64 + seed) % 2 == 1,
            _ => false,
        }));
        let tree = ProtocolTree::new(
            1,
            vec![1],
            0,
            vec![Node {
                label: 0,
                predicate: cb,
                left: ChildRef::Leaf,
                right: ChildRef::Leaf,
            }],
        )
        .unwrap();
        let y = tree.execute(&[Observation::Bits(vec![1])], 0).unwrap();
        assert_eq!(y.to_string(), "1");
        // Public randomness flips the answer.
        let y = tree.execute(&[Observation::Bits(vec![1])], 1).unwrap();
        assert_eq!(y.to_string(), "0");

        let model = ModelSpec::bernoulli(1, 0.5).unwrap();
        let err = tree.transcript_distribution(&model, &[0.5]).unwrap_err();
        assert!(matches!(err, Error::UnsupportedEnumeration(_)));
        let err = tree.to_json().unwrap_err();
        assert!(matches!(err, Error::UnsupportedEnumeration(_)));
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let model = ModelSpec::bernoulli(1, 0.5).unwrap();
        let err = random_tree(&model, &[25], 0).unwrap_err();
        assert!(matches!(err, Error::CapacityExceeded { .. }));
    }
}
