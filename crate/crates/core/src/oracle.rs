//! Exact small-instance information quantities for protocol trees.
//!
//! For a uniform hypothesis index `U` over a cube `theta0 + delta * u` and
//! the transcript `Y` of a protocol run on `n` iid observations, this module
//! enumerates the transcript likelihoods `P(y|u)` exactly (via the cut-paste
//! factorization) and computes the chain
//!
//! ```text
//! 0 <= I(U;Y) <= Dbar <= UB
//! ```
//!
//! where `Dbar = E_U D(P_{Y|U} || P_{Y|theta0})` and `UB` is the chi-square
//! style bound
//!
//! ```text
//! UB = E_U sum_i sum_y (prod_{j!=i} E_{P_U} p_{j,y}) *
//!      (E_{P_U} p_{i,y} - E_{P0} p_{i,y})^2 / E_{P0} p_{i,y}.
//! ```
//!
//! `UB` equals the intermediate `sum_i (ratio - 1)` bound exactly, because
//! `sum_y (prod_{j!=i} E_{Q_j} p_{j,y}) = 1` holds for *any* per-sensor
//! marginals (the mixed-product total-weight identity), so the cross term
//! vanishes. All quantities are in nats. Terms with a vanishing reference
//! mass `E_{P0} p_{i,y} = 0` are defined as 0: for interior reference
//! points the numerator vanishes on the same transcripts.
//!
//! The per-sensor score sum `S1` (with the `delta^2` prefactor stripped) is
//! also computed here, with its budget bound `2^{k_i} * lambda_max(I(theta0))`
//! and the per-set conditional-mean (Bessel) bound.

use crate::blackboard::{ProtocolTree, Transcript};
use crate::error::{Error, Result};
use crate::models::{HypothesisCube, ModelSpec, Observation};
use crate::util;
use serde::Serialize;

/// The exact information chain for one (tree, cube) instance.
#[derive(Clone, Debug, Serialize)]
pub struct InfoChainReport {
    /// Exact `I(U;Y)` in nats.
    pub mutual_information: f64,
    /// `E_U D(P_{Y|U} || P_{Y|theta0})` in nats.
    pub dbar: f64,
    /// The final chi-square-type bound in nats.
    pub ub: f64,
    /// Optional per-(sensor, transcript) breakdown of `UB` (already averaged
    /// over the cube).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_term: Option<Vec<Vec<f64>>>,
}

impl InfoChainReport {
    /// Largest violation of `0 <= I <= Dbar <= UB`; nonpositive when the
    /// chain holds.
    pub fn chain_slack(&self) -> f64 {
        (-self.mutual_information)
            .max(self.mutual_information - self.dbar)
            .max(self.dbar - self.ub)
    }
}

/// Transcript likelihood matrix for all cube members plus the reference.
struct Likelihoods {
    /// `per_sensor[t][i][y] = E_{P_t}[p_{i,y}]`, index 0 = theta0, then the
    /// cube members in enumeration order.
    per_sensor: Vec<Vec<Vec<f64>>>,
    /// `joint[t][y] = prod_i per_sensor[t][i][y]`.
    joint: Vec<Vec<f64>>,
}

fn likelihoods(tree: &ProtocolTree, cube: &HypothesisCube) -> Result<Likelihoods> {
    let members = cube.members();
    let mut thetas = Vec::with_capacity(members.len() + 1);
    thetas.push(cube.base().theta0.clone());
    thetas.extend(members.into_iter().map(|m| m.theta));
    let pf = tree.path_functionals(cube.base(), &thetas, false)?;
    let count = 1usize << pf.depth;
    let joint = pf
        .expectations
        .iter()
        .map(|per_sensor| {
            let mut p = vec![1.0; count];
            for sensor in per_sensor {
                for (p, e) in p.iter_mut().zip(sensor) {
                    *p *= e;
                }
            }
            p
        })
        .collect();
    Ok(Likelihoods {
        per_sensor: pf.expectations,
        joint,
    })
}

/// Exact `I(U;Y)` in nats for `U` uniform on the cube: the mean over members
/// of `D(P_{Y|u} || Pbar)` with `Pbar` the uniform transcript mixture.
/// Transcripts with `P(y|u) = 0` contribute nothing.
pub fn exact_mutual_information(tree: &ProtocolTree, cube: &HypothesisCube) -> Result<f64> {
    let lk = likelihoods(tree, cube)?;
    let members = lk.joint.len() - 1;
    let count = lk.joint[0].len();
    let mut pbar = vec![0.0; count];
    for y in 0..count {
        let col: Vec<f64> = (1..=members).map(|u| lk.joint[u][y]).collect();
        pbar[y] = util::pairwise_sum(&col) / members as f64;
    }
    let divergences: Vec<f64> = (1..=members)
        .map(|u| {
            let terms: Vec<f64> = (0..count)
                .map(|y| {
                    let p = lk.joint[u][y];
                    if p > 0.0 {
                        p * (p / pbar[y]).ln()
                    } else {
                        0.0
                    }
                })
                .collect();
            util::pairwise_sum(&terms)
        })
        .collect();
    Ok(util::pairwise_sum(&divergences) / members as f64)
}

/// The full `I <= Dbar <= UB` report for one (tree, cube) instance.
pub fn kl_chain_quantities(
    tree: &ProtocolTree,
    cube: &HypothesisCube,
    with_terms: bool,
) -> Result<InfoChainReport> {
    let lk = likelihoods(tree, cube)?;
    let members = lk.joint.len() - 1;
    let count = lk.joint[0].len();
    let sensors = tree.sensors;

    // I(U;Y) against the uniform mixture.
    let mutual_information = {
        let mut pbar = vec![0.0; count];
        for (y, pb) in pbar.iter_mut().enumerate() {
            let col: Vec<f64> = (1..=members).map(|u| lk.joint[u][y]).collect();
            *pb = util::pairwise_sum(&col) / members as f64;
        }
        let divergences: Vec<f64> = (1..=members)
            .map(|u| {
                let terms: Vec<f64> = (0..count)
                    .map(|y| {
                        let p = lk.joint[u][y];
                        if p > 0.0 { p * (p / pbar[y]).ln() } else { 0.0 }
                    })
                    .collect();
                util::pairwise_sum(&terms)
            })
            .collect();
        util::pairwise_sum(&divergences) / members as f64
    };

    // Dbar: KL against the reference transcript law.
    let dbar = {
        let divergences: Vec<f64> = (1..=members)
            .map(|u| {
                let terms: Vec<f64> = (0..count)
                    .map(|y| {
                        let p = lk.joint[u][y];
                        if p > 0.0 {
                            p * (p / lk.joint[0][y]).ln()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                util::pairwise_sum(&terms)
            })
            .collect();
        util::pairwise_sum(&divergences) / members as f64
    };

    // UB: per (u, i, y), (prod_{j != i} e_u[j][y]) * (e_u[i][y] - e_0[i][y])^2 / e_0[i][y].
    let mut per_term = if with_terms {
        Some(vec![vec![0.0; count]; sensors])
    } else {
        None
    };
    let per_member: Vec<f64> = (1..=members)
        .map(|u| {
            let mut member_terms = Vec::with_capacity(sensors * count);
            for i in 0..sensors {
                for y in 0..count {
                    let e0 = lk.per_sensor[0][i][y];
                    let term = if e0 > 0.0 {
                        let eu = lk.per_sensor[u][i][y];
                        let others: f64 = (0..sensors)
                            .filter(|j| *j != i)
                            .map(|j| lk.per_sensor[u][j][y])
                            .product();
                        others * (eu - e0).powi(2) / e0
                    } else {
                        0.0
                    };
                    member_terms.push(term);
                    if let Some(pt) = per_term.as_mut() {
                        pt[i][y] += term / members as f64;
                    }
                }
            }
            util::pairwise_sum(&member_terms)
        })
        .collect();
    let ub = util::pairwise_sum(&per_member) / members as f64;

    Ok(InfoChainReport {
        mutual_information,
        dbar,
        ub,
        per_term,
    })
}

/// One transcript's contribution to the score sum.
#[derive(Clone, Debug, Serialize)]
pub struct S1Term {
    pub transcript: usize,
    /// `w_{i,y} = prod_{j != i} p_{j,y}(x_j)` at the fixed other inputs.
    pub weight: f64,
    /// `E_{P0}[p_{i,y}]`.
    pub mass: f64,
    /// `||E_{P0}[S0(X) p_{i,y}(X)]||^2`.
    pub norm_sq: f64,
}

/// The score sum `sum_y w_{i,y} ||E_{P0}[S0 p_{i,y}]||^2 / E_{P0}[p_{i,y}]`
/// (the `delta^2`-free version of the leading lower-bound term) and its
/// budget bound.
#[derive(Clone, Debug, Serialize)]
pub struct S1Report {
    pub sensor: usize,
    pub sum: f64,
    /// `2^{k_i} * info_constant`.
    pub bound: f64,
    /// Largest Fisher eigenvalue at the reference point; equals the scalar
    /// per-coordinate information for homogeneous product families.
    pub info_constant: f64,
    /// Max over transcripts of `norm_sq/mass - info_constant*(1 - mass)`:
    /// the per-set conditional-mean bound, nonpositive when it holds.
    pub per_set_max_slack: f64,
    pub terms: Vec<S1Term>,
}

/// Computes the score sum for `sensor`, with the other sensors' observations
/// fixed to `inputs` (the entry at `sensor` is ignored). Requires a
/// deterministic, enumerable tree.
pub fn s1_bound_check(
    tree: &ProtocolTree,
    model: &ModelSpec,
    sensor: usize,
    inputs: &[Observation],
    shared_seed: u64,
) -> Result<S1Report> {
    if sensor >= tree.sensors {
        return Err(Error::ShapeMismatch(format!(
            "sensor {sensor} out of range for {} sensors",
            tree.sensors
        )));
    }
    if inputs.len() != tree.sensors {
        return Err(Error::ShapeMismatch(format!(
            "{} fixed inputs for {} sensors (the checked sensor's entry is ignored)",
            inputs.len(),
            tree.sensors
        )));
    }
    let pf = tree.path_functionals(model, &[model.theta0.clone()], true)?;
    let scores = pf.score_weighted.as_ref().expect("requested scores");
    let count = 1usize << pf.depth;
    let info = model.fisher_info()?;
    let info_constant = info.max_eigenvalue();

    let mut terms = Vec::with_capacity(count);
    let mut per_set_max_slack = f64::NEG_INFINITY;
    let mut contributions = Vec::with_capacity(count);
    for y in 0..count {
        let transcript = Transcript::from_index(y, pf.depth);
        let mut weight = 1.0;
        for j in 0..tree.sensors {
            if j != sensor {
                weight *= tree.sensor_factor(j, &transcript, &inputs[j], shared_seed)?;
            }
        }
        let mass = pf.expectations[0][sensor][y];
        let norm_sq: f64 = scores[sensor][y].iter().map(|g| g * g).sum();
        let ratio = if mass > 0.0 { norm_sq / mass } else { 0.0 };
        if mass > 0.0 {
            per_set_max_slack = per_set_max_slack.max(ratio - info_constant * (1.0 - mass));
        }
        contributions.push(weight * ratio);
        terms.push(S1Term {
            transcript: y,
            weight,
            mass,
            norm_sq,
        });
    }
    let sum = util::pairwise_sum(&contributions);
    let bound = (1u64 << tree.budgets[sensor]) as f64 * info_constant;
    Ok(S1Report {
        sensor,
        sum,
        bound,
        info_constant,
        per_set_max_slack,
        terms,
    })
}

/// Exact minimal error probability `P(d_Ham(U, Uhat) > t)` over all
/// estimators `Uhat(Y)` taking values in the cube, for `U` uniform on the
/// cube. This is the quantity the distance-based Fano inequality lower
/// bounds, so any valid Fano evaluation must come out no larger.
pub fn exact_distance_test_error(
    tree: &ProtocolTree,
    cube: &HypothesisCube,
    t: f64,
) -> Result<f64> {
    let lk = likelihoods(tree, cube)?;
    let members_list = cube.members();
    let members = members_list.len();
    let count = lk.joint[0].len();
    // For each transcript, the best estimator picks uhat maximizing the
    // posterior mass of the closed t-ball around it.
    let mut success_terms = Vec::with_capacity(count);
    for y in 0..count {
        let mut best = 0.0f64;
        for uhat in &members_list {
            let ball: Vec<f64> = members_list
                .iter()
                .filter(|u| HypothesisCube::hamming(u, uhat) as f64 <= t)
                .map(|u| lk.joint[u.index + 1][y])
                .collect();
            best = best.max(util::pairwise_sum(&ball));
        }
        success_terms.push(best / members as f64);
    }
    Ok(1.0 - util::pairwise_sum(&success_terms))
}
