//! Conditional score-mean geometry: how large `‖E[S₀(X) | A]‖₂²` can be
//! for a set `A` of probability `P`, and how close known sets come to the
//! bounds.
//!
//! For a centered score `S₀` (so `E S₀ = 0`, `E S₀S₀ᵀ = I(θ₀)`) three upper
//! bounds on the squared conditional-mean norm are evaluated side by side:
//!
//! * Bessel: `λmax(I(θ₀)) · (1−P)/P` — no tail assumption;
//! * sub-Gaussian: `σ² · ln(2/P)` — valid when every unit projection
//!   `⟨S₀, v⟩` has Orlicz ψ₂ norm at most `σ`;
//! * two-log: `2 · ln(1/P)` — the sharp dimension-free form for the uniform
//!   hypercube (score = the point itself) and the standard Gaussian.
//!
//! A caution on the sub-Gaussian bound: the per-coordinate ψ₂ norm is *not*
//! a valid `σ` — diagonal projections of a Rademacher vector are strictly
//! heavier than its coordinates, and Hamming balls around a vertex violate
//! the per-coordinate version outright in high dimension (see
//! `per_coordinate_sigma_is_not_projection_safe`). Every unit projection of
//! a Rademacher vector is moment-dominated by a standard Gaussian, so
//! `σ = √(8/3)` (the standard normal ψ₂ norm) is safe for both the
//! hypercube and the Gaussian base, and that is what this module supplies
//! by default.
//!
//! The extremal side is covered by exhaustive subset scans in small
//! dimension, brute-force and greedy searches for the maximizing set of a
//! given size, exact Hamming-ball means at any dimension via big-integer
//! binomial sums, ψ₂ norms by bisection, and the central-limit lift that
//! transports the hypercube two-log bound to the Gaussian one.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ENUMERATION_DIM_CAP};
use crate::util;

/// ψ₂ norm of a standard Gaussian: the solution of
/// `E exp(Z²/a²) = (1 − 2/a²)^{−1/2} = 2`, i.e. `√(8/3)`.
pub const STD_NORMAL_PSI2: f64 = 1.632_993_161_855_452_3;

/// Largest `a` tried before concluding a distribution has no finite ψ₂ norm.
pub const PSI2_SEARCH_CAP: f64 = 1e9;

/// Largest supported lift order for [`tensor_power_compare`].
pub const TENSOR_LIFT_CAP: usize = 20;

/// Reference distribution whose conditional score means are studied.
///
/// The two synthetic bases carry their score with them (`S₀(X) = X` in both
/// cases, with identity information matrix); the model base uses the
/// family's score at its reference parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreBase {
    /// `X` uniform on `{±1}^d`, score `S₀(X) = X`.
    Hypercube { d: usize },
    /// `X ~ N(0, I_d)`, score `S₀(X) = X`.
    Gaussian { d: usize },
    /// A parametric family's score at its reference point; conditioning is
    /// exact, so the family must have a finite sample space.
    Model(ModelSpec),
}

impl ScoreBase {
    pub fn dim(&self) -> usize {
        match self {
            ScoreBase::Hypercube { d } | ScoreBase::Gaussian { d } => *d,
            ScoreBase::Model(m) => m.d,
        }
    }

    /// Largest eigenvalue of the score covariance (`1` for the synthetic
    /// bases, `λmax(I(θ₀))` for a model).
    pub fn info_constant(&self) -> Result<f64> {
        match self {
            ScoreBase::Hypercube { .. } | ScoreBase::Gaussian { .. } => Ok(1.0),
            ScoreBase::Model(m) => Ok(m.fisher_info()?.max_eigenvalue()),
        }
    }

    /// A `σ` valid for *every* unit projection `⟨S₀, v⟩`, when one is known.
    ///
    /// Every projection of the Gaussian base is exactly standard normal;
    /// every projection of the Rademacher base is moment-dominated by a
    /// standard normal (Gaussian Khinchine constants), so both get
    /// [`STD_NORMAL_PSI2`]. Model scores carry no automatic constant.
    pub fn projection_psi2_sigma(&self) -> Option<f64> {
        match self {
            ScoreBase::Hypercube { .. } | ScoreBase::Gaussian { .. } => Some(STD_NORMAL_PSI2),
            ScoreBase::Model(_) => None,
        }
    }

    /// Whether the sharp `2·ln(1/P)` bound applies to this base.
    pub fn has_two_log_bound(&self) -> bool {
        matches!(self, ScoreBase::Hypercube { .. } | ScoreBase::Gaussian { .. })
    }
}

/// A conditioning event, in whichever representation the base can integrate
/// exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetSpec {
    /// Explicit list of distinct `±1` points (hypercube base).
    Points(Vec<Vec<i8>>),
    /// Truth table over the canonical finite sample space. For the
    /// hypercube, entry `i` refers to the point whose coordinate `j` is `+1`
    /// exactly when bit `j` of `i` is set; for a model base the order is the
    /// model's canonical sample-space order.
    Indicator(Vec<bool>),
    /// Per-coordinate interval box (Gaussian base); infinite endpoints are
    /// allowed.
    Box(Vec<(f64, f64)>),
    /// Halfspace `{x : x₁ ≥ t}` (Gaussian base).
    HalfLine { t: f64 },
}

impl SubsetSpec {
    /// Short human-readable tag used in slack tables.
    pub fn describe(&self) -> String {
        match self {
            SubsetSpec::Points(p) => format!("points(m={})", p.len()),
            SubsetSpec::Indicator(t) => {
                format!("indicator(m={})", t.iter().filter(|&&b| b).count())
            }
            SubsetSpec::Box(iv) => format!("box(d={})", iv.len()),
            SubsetSpec::HalfLine { t } => format!("halfline(t={t})"),
        }
    }
}

/// The bounds a [`SlackRecord`] can check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `λmax(I) · (1−P)/P`.
    Bessel,
    /// `σ² · ln(2/P)` with a projection-uniform `σ`.
    Psi2,
    /// `2 · ln(1/P)`.
    TwoLog,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Bessel => "bessel",
            BoundKind::Psi2 => "psi2",
            BoundKind::TwoLog => "two_log",
        }
    }
}

/// One evaluated bound; `slack = value − norm²`, negative means violated.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub bound: BoundKind,
    pub value: f64,
    pub slack: f64,
}

/// Conditional-mean norm of one set next to every applicable bound.
#[derive(Clone, Debug, Serialize)]
pub struct SlackRecord {
    pub set_id: String,
    pub mass: f64,
    pub norm_sq: f64,
    pub checks: Vec<BoundCheck>,
}

impl SlackRecord {
    /// Smallest slack across the evaluated bounds.
    pub fn min_slack(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.slack)
            .fold(f64::INFINITY, f64::min)
    }
}

fn require_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    Ok(())
}

/// `P₀(A)` and `‖E[S₀ | A]‖₂²`, both exact up to rounding.
///
/// Finite bases integrate by direct enumeration; the Gaussian base uses
/// closed normal-CDF forms per coordinate. The supported pairings are
/// points/indicator on the hypercube, indicator on finite-space models, and
/// box/half-line on the Gaussian.
pub fn conditional_mean_norm(base: &ScoreBase, set: &SubsetSpec) -> Result<(f64, f64)> {
    match (base, set) {
        (ScoreBase::Hypercube { d }, SubsetSpec::Points(points)) => {
            require_dim(*d)?;
            hypercube_points_norm(*d, points)
        }
        (ScoreBase::Hypercube { d }, SubsetSpec::Indicator(table)) => {
            require_dim(*d)?;
            if *d > ENUMERATION_DIM_CAP {
                return Err(Error::CapacityExceeded {
                    what: "hypercube indicator dimension",
                    limit: ENUMERATION_DIM_CAP,
                    requested: *d,
                });
            }
            let n = 1usize << *d;
            if table.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "indicator table has {} entries for a {}-point cube",
                    table.len(),
                    n
                )));
            }
            let points: Vec<Vec<i8>> = table
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| cube_point(i, *d))
                .collect();
            hypercube_points_norm(*d, &points)
        }
        (ScoreBase::Gaussian { d }, SubsetSpec::Box(intervals)) => {
            require_dim(*d)?;
            if intervals.len() != *d {
                return Err(Error::ShapeMismatch(format!(
                    "box has {} intervals in dimension {}",
                    intervals.len(),
                    d
                )));
            }
            let mut mass = 1.0;
            let mut terms = Vec::with_capacity(*d);
            for &(lo, hi) in intervals {
                if lo.is_nan() || hi.is_nan() {
                    return Err(Error::Domain("box endpoint is NaN".into()));
                }
                if !(lo < hi) {
                    return Err(Error::ZeroMeasureSet);
                }
                let p = util::std_normal_interval(lo, hi);
                if p <= 0.0 {
                    return Err(Error::ZeroMeasureSet);
                }
                // E[Z ; lo < Z <= hi] = φ(lo) − φ(hi), with φ(±∞) = 0.
                let first = util::std_normal_pdf(lo) - util::std_normal_pdf(hi);
                mass *= p;
                terms.push((first / p).powi(2));
            }
            if mass <= 0.0 {
                return Err(Error::ZeroMeasureSet);
            }
            Ok((mass, util::pairwise_sum(&terms)))
        }
        (ScoreBase::Gaussian { d }, SubsetSpec::HalfLine { t }) => {
            require_dim(*d)?;
            if !t.is_finite() {
                return Err(Error::Domain("half-line threshold must be finite".into()));
            }
            let mass = util::std_normal_sf(*t);
            if mass <= 0.0 {
                return Err(Error::ZeroMeasureSet);
            }
            let mean1 = util::std_normal_pdf(*t) / mass;
            Ok((mass, mean1 * mean1))
        }
        (ScoreBase::Model(model), SubsetSpec::Indicator(table)) => {
            let space = model.sample_space()?;
            if table.len() != space.len() {
                return Err(Error::ShapeMismatch(format!(
                    "indicator table has {} entries for a {}-point sample space",
                    table.len(),
                    space.len()
                )));
            }
            let mut masses = Vec::new();
            let mut weighted = vec![Vec::new(); model.d];
            for (x, _) in space.iter().zip(table).filter(|(_, &b)| b) {
                let w = model.pmf(&model.theta0, x)?;
                let s = model.score(x)?;
                masses.push(w);
                for (acc, sc) in weighted.iter_mut().zip(&s) {
                    acc.push(w * sc);
                }
            }
            let mass = util::pairwise_sum(&masses);
            if mass <= 0.0 {
                return Err(Error::ZeroMeasureSet);
            }
            let terms: Vec<f64> = weighted
                .iter()
                .map(|col| (util::pairwise_sum(col) / mass).powi(2))
                .collect();
            Ok((mass, util::pairwise_sum(&terms)))
        }
        (base, set) => Err(Error::UnsupportedEnumeration(format!(
            "{} sets are not integrable against this base ({})",
            set.describe(),
            match base {
                ScoreBase::Hypercube { .. } => "hypercube",
                ScoreBase::Gaussian { .. } => "gaussian",
                ScoreBase::Model(_) => "model",
            }
        ))),
    }
}

fn cube_point(index: usize, d: usize) -> Vec<i8> {
    (0..d)
        .map(|c| if (index >> c) & 1 == 1 { 1 } else { -1 })
        .collect()
}

fn hypercube_points_norm(d: usize, points: &[Vec<i8>]) -> Result<(f64, f64)> {
    let m = points.len();
    if m == 0 {
        return Err(Error::ZeroMeasureSet);
    }
    let mut seen = HashSet::with_capacity(m);
    let mut sums = vec![0i64; d];
    for p in points {
        if p.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "point of length {} in a dimension-{} cube",
                p.len(),
                d
            )));
        }
        if p.iter().any(|&c| c != 1 && c != -1) {
            return Err(Error::Domain(
                "hypercube points must have ±1 coordinates".into(),
            ));
        }
        if !seen.insert(p.clone()) {
            return Err(Error::Domain("duplicate point in subset".into()));
        }
        for (s, &c) in sums.iter_mut().zip(p) {
            *s += i64::from(c);
        }
    }
    let mf = m as f64;
    let terms: Vec<f64> = sums.iter().map(|&s| (s as f64 / mf).powi(2)).collect();
    let mass = mf / 2f64.powi(d as i32);
    Ok((mass, util::pairwise_sum(&terms)))
}

/// Evaluates every applicable bound for each set and reports the slacks.
///
/// `psi2_sigma` overrides the base's projection-uniform constant; when
/// neither is available the ψ₂ check is skipped. This is a reporting
/// operation: violations show up as negative slack, not as errors.
pub fn verify_geometric_bounds(
    base: &ScoreBase,
    sets: &[SubsetSpec],
    psi2_sigma: Option<f64>,
) -> Result<Vec<SlackRecord>> {
    let info = base.info_constant()?;
    let sigma = psi2_sigma.or_else(|| base.projection_psi2_sigma());
    if let Some(s) = sigma {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain("psi2 sigma must be positive".into()));
        }
    }
    sets.iter()
        .enumerate()
        .map(|(i, set)| {
            let (mass, norm_sq) = conditional_mean_norm(base, set)?;
            let mut checks = Vec::with_capacity(3);
            let bessel = info * (1.0 - mass) / mass;
            checks.push(BoundCheck {
                bound: BoundKind::Bessel,
                value: bessel,
                slack: bessel - norm_sq,
            });
            if let Some(s) = sigma {
                let value = s * s * (2.0 / mass).ln();
                checks.push(BoundCheck {
                    bound: BoundKind::Psi2,
                    value,
                    slack: value - norm_sq,
                });
            }
            if base.has_two_log_bound() {
                let value = 2.0 * (1.0 / mass).ln();
                checks.push(BoundCheck {
                    bound: BoundKind::TwoLog,
                    value,
                    slack: value - norm_sq,
                });
            }
            Ok(SlackRecord {
                set_id: format!("{i}:{}", set.describe()),
                mass,
                norm_sq,
                checks,
            })
        })
        .collect()
}

/// Result of scanning every nonempty subset of `{±1}^d`.
#[derive(Clone, Debug, Serialize)]
pub struct ExhaustiveCubeReport {
    pub d: usize,
    /// `2^(2^d) − 1` subsets scanned.
    pub subsets: u64,
    /// Smallest `λmax·(1−P)/P − norm²` seen (zero at the full cube).
    pub min_bessel_slack: f64,
    /// Smallest `2·ln(1/P) − norm²` seen (zero at the full cube).
    pub min_two_log_slack: f64,
    /// Largest `norm²` among subsets of size exactly `2^{d−1}`.
    pub max_half_norm_sq: f64,
}

/// Checks the Bessel and two-log bounds on every nonempty subset of the
/// `d`-cube by direct enumeration (`d ≤ 4`, i.e. up to 65,535 subsets).
pub fn exhaustive_hypercube_check(d: usize) -> Result<ExhaustiveCubeReport> {
    require_dim(d)?;
    if d > 4 {
        return Err(Error::CapacityExceeded {
            what: "exhaustive hypercube scan dimension",
            limit: 4,
            requested: d,
        });
    }
    let n = 1usize << d;
    let points: Vec<Vec<i64>> = (0..n)
        .map(|i| cube_point(i, d).iter().map(|&c| i64::from(c)).collect())
        .collect();
    let subsets = (1u64 << n) - 1;
    let nf = n as f64;
    let mut min_bessel = f64::INFINITY;
    let mut min_two_log = f64::INFINITY;
    let mut max_half = f64::NEG_INFINITY;
    let mut sums = vec![0i64; d];
    for mask in 1..=subsets {
        sums.iter_mut().for_each(|s| *s = 0);
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            for (s, &c) in sums.iter_mut().zip(&points[i]) {
                *s += c;
            }
            bits &= bits - 1;
        }
        let m = mask.count_ones() as f64;
        let norm_sq: f64 = sums.iter().map(|&s| (s as f64 / m).powi(2)).sum();
        let p = m / nf;
        min_bessel = min_bessel.min((1.0 - p) / p - norm_sq);
        min_two_log = min_two_log.min(2.0 * (1.0 / p).ln() - norm_sq);
        if mask.count_ones() as usize == n / 2 {
            max_half = max_half.max(norm_sq);
        }
    }
    Ok(ExhaustiveCubeReport {
        d,
        subsets,
        min_bessel_slack: min_bessel,
        min_two_log_slack: min_two_log,
        max_half_norm_sq: max_half,
    })
}

/// Outcome of a maximizing-subset search.
#[derive(Clone, Debug)]
pub struct MaxNormSearch {
    /// Largest `‖E[X | A]‖₂²` found over `|A| = m`.
    pub norm_sq: f64,
    /// A set attaining it.
    pub witness: Vec<Vec<i8>>,
    /// `true` when every `C(2^d, m)` subset was scanned, so the value is the
    /// exact maximum; `false` for the greedy search, which only certifies a
    /// lower bound.
    pub exhaustive: bool,
}

/// Maximum conditional-mean norm over all `m`-point subsets of `{±1}^d`.
///
/// Exhaustive for `d ≤ 4`. Beyond that, pass `allow_heuristic` to run a
/// greedy swap search seeded from the Hamming-ball cap around `+1`; the
/// result is then only a lower bound on the maximum, and for dense sets the
/// cap can be a strict local optimum (the `d=5, m=16` cap is one: no single
/// swap improves it, yet the half-space does better).
pub fn brute_force_max_norm(d: usize, m: usize, allow_heuristic: bool) -> Result<MaxNormSearch> {
    require_dim(d)?;
    const GREEDY_DIM_CAP: usize = 10;
    if d > 4 && !allow_heuristic {
        return Err(Error::CapacityExceeded {
            what: "exhaustive subset search dimension (enable the heuristic beyond)",
            limit: 4,
            requested: d,
        });
    }
    if d > GREEDY_DIM_CAP {
        return Err(Error::CapacityExceeded {
            what: "greedy subset search dimension",
            limit: GREEDY_DIM_CAP,
            requested: d,
        });
    }
    let n = 1usize << d;
    if m == 0 {
        return Err(Error::ZeroMeasureSet);
    }
    if m > n {
        return Err(Error::Domain(format!(
            "set size {m} exceeds the {n}-point cube"
        )));
    }
    let points: Vec<Vec<i64>> = (0..n)
        .map(|i| cube_point(i, d).iter().map(|&c| i64::from(c)).collect())
        .collect();
    let (best_indices, exhaustive) = if d <= 4 {
        (exhaustive_max(&points, m), true)
    } else {
        (greedy_max(&points, m), false)
    };
    let sums = index_sums(&points, &best_indices);
    let norm_int: i64 = sums.iter().map(|&s| s * s).sum();
    Ok(MaxNormSearch {
        norm_sq: norm_int as f64 / (m as f64 * m as f64),
        witness: best_indices.iter().map(|&i| cube_point(i, d)).collect(),
        exhaustive,
    })
}

fn index_sums(points: &[Vec<i64>], indices: &[usize]) -> Vec<i64> {
    let d = points[0].len();
    let mut sums = vec![0i64; d];
    for &i in indices {
        for (s, &c) in sums.iter_mut().zip(&points[i]) {
            *s += c;
        }
    }
    sums
}

fn exhaustive_max(points: &[Vec<i64>], m: usize) -> Vec<usize> {
    let n = points.len();
    let mut indices: Vec<usize> = (0..m).collect();
    let mut best = indices.clone();
    let mut best_val = -1i64;
    loop {
        let sums = index_sums(points, &indices);
        let val: i64 = sums.iter().map(|&s| s * s).sum();
        if val > best_val {
            best_val = val;
            best = indices.clone();
        }
        // Advance to the next m-combination of 0..n in lexicographic order.
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if indices[i] != i + n - m {
                break;
            }
        }
        indices[i] += 1;
        for j in i + 1..m {
            indices[j] = indices[j - 1] + 1;
        }
    }
}

fn greedy_max(points: &[Vec<i64>], m: usize) -> Vec<usize> {
    let n = points.len();
    let d = points[0].len();
    // Cap initialization: the m points closest to +1 in Hamming distance
    // (fewest −1 coordinates), ties broken by index.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (d - (i as u64).count_ones() as usize, i));
    let mut in_set = vec![false; n];
    let mut members: Vec<usize> = order[..m].to_vec();
    for &i in &members {
        in_set[i] = true;
    }
    let mut sums = index_sums(points, &members);
    loop {
        // Best single swap: maximize ‖S − a + b‖² − ‖S‖² = ‖b−a‖² + 2⟨S, b−a⟩.
        let mut best_gain = 0i64;
        let mut best_swap: Option<(usize, usize)> = None;
        for (slot, &a) in members.iter().enumerate() {
            for b in 0..n {
                if in_set[b] {
                    continue;
                }
                let mut gain = 0i64;
                for c in 0..d {
                    let delta = points[b][c] - points[a][c];
                    gain += delta * delta + 2 * sums[c] * delta;
                }
                if gain > best_gain {
                    best_gain = gain;
                    best_swap = Some((slot, b));
                }
            }
        }
        match best_swap {
            Some((slot, b)) => {
                let a = members[slot];
                for c in 0..d {
                    sums[c] += points[b][c] - points[a][c];
                }
                in_set[a] = false;
                in_set[b] = true;
                members[slot] = b;
            }
            None => return members,
        }
    }
}

pub(crate) fn biguint_as_decimal<S: serde::Serializer>(
    n: &BigUint,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&n.to_string())
}

/// Exact conditional-mean data for the Hamming ball `{x : d_H(x, +1) ≤ t}`.
#[derive(Clone, Debug, Serialize)]
pub struct CapMeanNorm {
    pub d: usize,
    pub t: usize,
    /// `|A| = Σ_{j≤t} C(d,j)` exactly.
    #[serde(serialize_with = "biguint_as_decimal")]
    pub ball_size: BigUint,
    /// `‖E[X | A]‖₂`.
    pub norm: f64,
    pub norm_sq: f64,
    /// `2·ln(2^d / |A|)`.
    pub bound: f64,
    /// `norm² / bound`; at most 1 whenever the two-log bound holds.
    pub ratio: f64,
}

/// Exact Hamming-ball conditional mean via big-integer binomial sums.
///
/// Every coordinate of the conditional mean equals
/// `Σ_{j≤t} C(d,j)(1 − 2j/d) / |A|`, so `norm² = N²/(d·|A|²)` with
/// `N = Σ_{j≤t} C(d,j)(d−2j)` — both sums computed exactly and only
/// converted to floating point at the end (log-domain when they overflow a
/// double).
pub fn cap_mean_norm(d: usize, t: usize) -> Result<CapMeanNorm> {
    require_dim(d)?;
    if 2 * t >= d {
        return Err(Error::Domain(format!(
            "ball radius {t} must be below d/2 = {}",
            d as f64 / 2.0
        )));
    }
    let mut size = BigUint::zero();
    let mut num = BigUint::zero();
    let mut binom = BigUint::from(1u32);
    for j in 0..=t {
        if j > 0 {
            binom = binom * BigUint::from((d - j + 1) as u64) / BigUint::from(j as u64);
        }
        size += &binom;
        num += &binom * BigUint::from((d - 2 * j) as u64);
    }
    let norm_sq = big_ratio_to_f64(&(&num * &num), &(BigUint::from(d as u64) * &size * &size));
    let bound = 2.0 * (d as f64 * std::f64::consts::LN_2 - util::ln_biguint(&size));
    Ok(CapMeanNorm {
        d,
        t,
        ball_size: size,
        norm: norm_sq.sqrt(),
        norm_sq,
        bound,
        ratio: norm_sq / bound,
    })
}

/// [`cap_mean_norm`] at every admissible radius `t < d/2`.
pub fn cap_ratio_sweep(d: usize) -> Result<Vec<CapMeanNorm>> {
    require_dim(d)?;
    (0..d.div_ceil(2))
        .filter(|t| 2 * t < d)
        .map(|t| cap_mean_norm(d, t))
        .collect()
}

fn big_ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if let (Some(a), Some(b)) = (num.to_f64(), den.to_f64()) {
        if a.is_finite() && b.is_finite() && b > 0.0 {
            return a / b;
        }
    }
    (util::ln_biguint(num) - util::ln_biguint(den)).exp()
}

/// One-dimensional distributions whose ψ₂ expectation `E exp(X²/a²)` is
/// computable: closed forms for the Gaussian and finite-support cases,
/// quadrature for the uniform, and a divergence certificate for the
/// Laplace.
#[derive(Clone, Debug)]
pub enum Psi2Dist {
    /// `N(0, sd²)`.
    Gaussian { sd: f64 },
    /// Uniform on `{−1, +1}`.
    Rademacher,
    /// Finitely supported with the given atoms.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    /// Uniform on `[−w, +w]`.
    Uniform { half_width: f64 },
    /// Density `exp(−|x|/b)/(2b)`: sub-exponential tails, so the defining
    /// expectation diverges for every `a` and no finite ψ₂ norm exists.
    Laplace { scale: f64 },
}

impl Psi2Dist {
    pub fn std_normal() -> Self {
        Psi2Dist::Gaussian { sd: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Psi2Dist::Gaussian { sd } => {
                if !sd.is_finite() || *sd < 0.0 {
                    return Err(Error::Domain("gaussian sd must be ≥ 0".into()));
                }
            }
            Psi2Dist::Rademacher => {}
            Psi2Dist::Discrete { values, probs } => {
                if values.len() != probs.len() || values.is_empty() {
                    return Err(Error::ShapeMismatch(
                        "discrete values and probabilities must have equal nonzero length".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain("discrete values must be finite".into()));
                }
                if probs.iter().any(|&p| !(p >= 0.0)) {
                    return Err(Error::Domain("probabilities must be nonnegative".into()));
                }
                let total = util::pairwise_sum(probs);
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain(format!(
                        "probabilities sum to {total}, expected 1"
                    )));
                }
            }
            Psi2Dist::Uniform { half_width } => {
                if !half_width.is_finite() || *half_width < 0.0 {
                    return Err(Error::Domain("uniform half-width must be ≥ 0".into()));
                }
            }
            Psi2Dist::Laplace { scale } => {
                if !scale.is_finite() || *scale <= 0.0 {
                    return Err(Error::Domain("laplace scale must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// `E exp(X²/a²)`, with `+∞` signalling divergence.
    ///
    /// Ratios are taken as `(x/a)²` rather than `x²/a²`: the bisection
    /// drives `a` arbitrarily small for point masses at zero, where `a²`
    /// would underflow to `0` and turn `0/0` into NaN.
    fn psi2_expectation(&self, a: f64) -> f64 {
        match self {
            Psi2Dist::Gaussian { sd } => {
                let r = 2.0 * (sd / a).powi(2);
                if r >= 1.0 {
                    f64::INFINITY
                } else {
                    (1.0 - r).powf(-0.5)
                }
            }
            Psi2Dist::Rademacher => (1.0 / a).powi(2).exp(),
            Psi2Dist::Discrete { values, probs } => {
                let terms: Vec<f64> = values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| p * (v / a).powi(2).exp())
                    .collect();
                util::pairwise_sum(&terms)
            }
            Psi2Dist::Uniform { half_width } => {
                let w = *half_width;
                if w == 0.0 {
                    return 1.0;
                }
                // (1/w)·∫₀^w exp(x²/a²) dx, smooth integrand on a bounded
                // interval: composite Simpson is plenty at this tolerance.
                simpson(|x| (x / a).powi(2).exp(), 0.0, w, 2000) / w
            }
            Psi2Dist::Laplace { .. } => {
                // The exponent x²/a² − x/scale is positive and increasing
                // past x = a²/scale, so the integrand stays above 1 on an
                // infinite ray: the expectation is +∞ for every a.
                f64::INFINITY
            }
        }
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize) -> f64 {
    let n = 2 * panels;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        acc += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Orlicz ψ₂ norm `inf{a > 0 : E exp(X²/a²) ≤ 2}`, bisected to relative
/// tolerance 1e−10.
///
/// Returns 0 for distributions concentrated at 0 (the infimum over an
/// all-of-`(0,∞)` feasible set) and [`Error::NoFinitePsi2`] when the
/// expectation still exceeds 2 at the search cap.
pub fn psi2_norm(dist: &Psi2Dist) -> Result<f64> {
    dist.validate()?;
    let f = |a: f64| dist.psi2_expectation(a);
    let mut hi = 1.0;
    while f(hi) > 2.0 {
        hi *= 2.0;
        if hi > PSI2_SEARCH_CAP {
            return Err(Error::NoFinitePsi2 {
                cap: PSI2_SEARCH_CAP,
            });
        }
    }
    let mut lo = hi / 2.0;
    while f(lo) <= 2.0 {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-300 {
            return Ok(0.0);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A 1-D indicator/step function for the central-limit lift.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepIndicator {
    /// `a ≡ 1`.
    One,
    /// `a(x) = 1{x ≥ t}`.
    AtLeast { t: f64 },
    /// `a(x) = 1{lo ≤ x ≤ hi}`.
    Window { lo: f64, hi: f64 },
}

impl StepIndicator {
    fn validate(&self) -> Result<()> {
        match self {
            StepIndicator::One => Ok(()),
            StepIndicator::AtLeast { t } => {
                if t.is_nan() {
                    Err(Error::Domain("step threshold is NaN".into()))
                } else {
                    Ok(())
                }
            }
            StepIndicator::Window { lo, hi } => {
                if lo.is_nan() || hi.is_nan() || !(lo < hi) {
                    Err(Error::Domain("window needs lo < hi".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Twice the lattice weight in `{0, 1, 2}`: lattice points landing
    /// exactly on a jump of the step count half (the symmetric convention;
    /// the Gaussian side is insensitive because single points are null).
    fn double_weight(&self, x: f64) -> i128 {
        match self {
            StepIndicator::One => 2,
            StepIndicator::AtLeast { t } => {
                if x > *t {
                    2
                } else if x == *t {
                    1
                } else {
                    0
                }
            }
            StepIndicator::Window { lo, hi } => {
                if x == *lo || x == *hi {
                    1
                } else if x > *lo && x < *hi {
                    2
                } else {
                    0
                }
            }
        }
    }

    /// `(E[Z·a(Z)], E[a(Z)])` for `Z ~ N(0,1)` in closed form.
    fn gaussian_moments(&self) -> (f64, f64) {
        match self {
            StepIndicator::One => (0.0, 1.0),
            StepIndicator::AtLeast { t } => (util::std_normal_pdf(*t), util::std_normal_sf(*t)),
            StepIndicator::Window { lo, hi } => (
                util::std_normal_pdf(*lo) - util::std_normal_pdf(*hi),
                util::std_normal_interval(*lo, *hi),
            ),
        }
    }
}

/// The hypercube lift of a step function next to its Gaussian limit.
#[derive(Clone, Debug, Serialize)]
pub struct TensorPowerReport {
    pub lift_order: usize,
    /// `‖E[X·ã(X)]‖₂ / E[ã(X)]` on `{±1}^B` with `ã(x) = a(Σxⱼ/√B)`,
    /// computed exactly from binomial weights.
    pub hypercube_value: f64,
    /// `|E[Z·a(Z)]| / E[a(Z)]` for `Z ~ N(0,1)`.
    pub gaussian_value: f64,
    pub abs_gap: f64,
    /// `abs_gap / gaussian_value`; `None` when the Gaussian value is zero.
    pub rel_gap: Option<f64>,
}

/// Lifts `a` to `{±1}^B` via `ã(x) = a(Σⱼ xⱼ/√B)` and compares the
/// conditional-mean value there with its Gaussian (CLT) limit.
///
/// By exchangeability the lifted mean vector is constant across
/// coordinates, so the whole computation reduces to exact binomial sums
/// over the `B+1` lattice values of `Σxⱼ`.
pub fn tensor_power_compare(a: &StepIndicator, lift_order: usize) -> Result<TensorPowerReport> {
    if lift_order == 0 {
        return Err(Error::Domain("lift order must be positive".into()));
    }
    if lift_order > TENSOR_LIFT_CAP {
        return Err(Error::CapacityExceeded {
            what: "tensor lift order",
            limit: TENSOR_LIFT_CAP,
            requested: lift_order,
        });
    }
    a.validate()?;
    let b = lift_order;
    let rb = (b as f64).sqrt();
    let mut num: i128 = 0;
    let mut den: i128 = 0;
    for j in 0..=b {
        let weight = util::binomial(b as u64, j as u64)
            .to_i128()
            .expect("C(B,j) fits i128 for B ≤ 20");
        let s = b as i128 - 2 * j as i128;
        let w2 = a.double_weight(s as f64 / rb);
        num += weight * s * w2;
        den += weight * w2;
    }
    if den == 0 {
        return Err(Error::ZeroMeasureSet);
    }
    let hypercube_value = (num as f64 / den as f64).abs() / rb;
    let (g_mean, g_mass) = a.gaussian_moments();
    if g_mass <= 0.0 {
        return Err(Error::ZeroMeasureSet);
    }
    let gaussian_value = (g_mean / g_mass).abs();
    let abs_gap = (hypercube_value - gaussian_value).abs();
    let rel_gap = if gaussian_value > 0.0 {
        Some(abs_gap / gaussian_value)
    } else {
        None
    };
    Ok(TensorPowerReport {
        lift_order,
        hypercube_value,
        gaussian_value,
        abs_gap,
        rel_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Observation;
    use crate::rng;
    use rand::Rng;

    const LN_2: f64 = std::f64::consts::LN_2;

    #[test]
    fn hypercube_pair_has_norm_three() {
        let base = ScoreBase::Hypercube { d: 4 };
        let set = SubsetSpec::Points(vec![vec![1, 1, 1, 1], vec![1, 1, 1, -1]]);
        let (mass, norm_sq) = conditional_mean_norm(&base, &set).unwrap();
        assert_eq!(mass, 2.0 / 16.0, "pair mass should be 2/16");
        assert_eq!(
            norm_sq, 3.0,
            "mean (1,1,1,0) should have squared norm exactly 3"
        );
    }

    #[test]
    fn full_space_mean_is_zero() {
        let base = ScoreBase::Hypercube { d: 3 };
        let set = SubsetSpec::Indicator(vec![true; 8]);
        let (mass, norm_sq) = conditional_mean_norm(&base, &set).unwrap();
        assert_eq!(mass, 1.0);
        assert_eq!(norm_sq, 0.0, "full-space conditional mean must vanish");
    }

    #[test]
    fn gaussian_halfline_matches_closed_form() {
        let base = ScoreBase::Gaussian { d: 1 };
        let (mass, norm_sq) =
            conditional_mean_norm(&base, &SubsetSpec::HalfLine { t: 1.0 }).unwrap();
        assert!(
            (mass - 0.158_655_253_931_457_05).abs() < 1e-15,
            "P(Z ≥ 1) = {mass}"
        );
        let expected = (util::std_normal_pdf(1.0) / util::std_normal_sf(1.0)).powi(2);
        assert!(
            (norm_sq - expected).abs() < 1e-14 * expected,
            "norm² {norm_sq} vs (φ(1)/Q(1))² = {expected}"
        );
        assert!(
            (norm_sq - 2.326_037_610_590_632).abs() < 1e-12,
            "frozen value drifted: {norm_sq}"
        );
        // Same event expressed as a box over (d=1).
        let (bm, bn) = conditional_mean_norm(
            &base,
            &SubsetSpec::Box(vec![(1.0, f64::INFINITY)]),
        )
        .unwrap();
        assert_eq!(bm, mass);
        assert_eq!(bn, norm_sq);
    }

    #[test]
    fn gaussian_box_splits_per_coordinate() {
        let base = ScoreBase::Gaussian { d: 3 };
        let set = SubsetSpec::Box(vec![
            (0.5, f64::INFINITY),
            (f64::NEG_INFINITY, f64::INFINITY),
            (-1.0, 1.0),
        ]);
        let (mass, norm_sq) = conditional_mean_norm(&base, &set).unwrap();
        let p1 = util::std_normal_sf(0.5);
        let p3 = util::std_normal_interval(-1.0, 1.0);
        assert!((mass - p1 * p3).abs() < 1e-15, "box mass factorizes");
        // Coordinate 2 is unconstrained and coordinate 3 is symmetric, so
        // only the first coordinate contributes to the mean.
        let expected = (util::std_normal_pdf(0.5) / p1).powi(2);
        assert!(
            (norm_sq - expected).abs() < 1e-13,
            "norm² {norm_sq} vs {expected}"
        );
    }

    #[test]
    fn singleton_norm_equals_dimension() {
        let d = 6;
        let base = ScoreBase::Hypercube { d };
        let set = SubsetSpec::Points(vec![vec![1; d]]);
        let (mass, norm_sq) = conditional_mean_norm(&base, &set).unwrap();
        assert_eq!(mass, 1.0 / 64.0);
        assert_eq!(norm_sq, d as f64, "singleton mean is the point itself");
        let records = verify_geometric_bounds(&base, &[set], None).unwrap();
        let two_log = records[0]
            .checks
            .iter()
            .find(|c| c.bound == BoundKind::TwoLog)
            .unwrap();
        assert!(
            (two_log.value - 2.0 * (d as f64) * LN_2).abs() < 1e-12,
            "singleton two-log bound is 2d·ln2: {}",
            two_log.value
        );
        assert!(two_log.slack > 0.0, "2·ln2·d exceeds d for every d ≥ 1");
    }

    #[test]
    fn indicator_and_points_agree() {
        let d = 3;
        let base = ScoreBase::Hypercube { d };
        let mut rng = rng::stream(99, &[0x67656f]);
        for _ in 0..10 {
            let mask: u32 = rng.gen_range(1..(1u32 << (1 << d)));
            let table: Vec<bool> = (0..(1usize << d)).map(|i| (mask >> i) & 1 == 1).collect();
            let points: Vec<Vec<i8>> = table
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| cube_point(i, d))
                .collect();
            let a = conditional_mean_norm(&base, &SubsetSpec::Indicator(table)).unwrap();
            let b = conditional_mean_norm(&base, &SubsetSpec::Points(points)).unwrap();
            assert_eq!(a, b, "representations disagree on mask {mask:#x}");
        }
    }

    #[test]
    fn bernoulli_half_scores_are_scaled_cube_coordinates() {
        // At p = 1/2 the coded score is exactly twice the ±1 coordinate, so
        // conditional norms scale by 4 and the mass is unchanged.
        let d = 3;
        let cube = ScoreBase::Hypercube { d };
        let model = ScoreBase::Model(crate::models::ModelSpec::bernoulli(d, 0.5).unwrap());
        let mut rng = rng::stream(7, &[0x62726e]);
        for _ in 0..10 {
            let mask: u32 = rng.gen_range(1..(1u32 << (1 << d)));
            let table: Vec<bool> = (0..(1usize << d)).map(|i| (mask >> i) & 1 == 1).collect();
            let (pc, nc) =
                conditional_mean_norm(&cube, &SubsetSpec::Indicator(table.clone())).unwrap();
            let (pm, nm) = conditional_mean_norm(&model, &SubsetSpec::Indicator(table)).unwrap();
            assert!((pc - pm).abs() < 1e-15, "masses differ: {pc} vs {pm}");
            assert!(
                (nm - 4.0 * nc).abs() < 1e-12 * nm.max(1.0),
                "score scaling broken: model {nm}, cube {nc}"
            );
        }
    }

    #[test]
    fn exhaustive_small_cubes_satisfy_both_bounds() {
        for d in [2, 3] {
            let report = exhaustive_hypercube_check(d).unwrap();
            assert_eq!(u128::from(report.subsets), (1u128 << (1 << d)) - 1);
            assert!(
                report.min_bessel_slack >= -1e-9,
                "d={d}: Bessel violated by {}",
                report.min_bessel_slack
            );
            assert!(
                report.min_two_log_slack >= -1e-9,
                "d={d}: two-log violated by {}",
                report.min_two_log_slack
            );
            assert!(
                (report.max_half_norm_sq - 1.0).abs() <= 1e-12,
                "d={d}: half-count maximum should be exactly 1, got {}",
                report.max_half_norm_sq
            );
        }
    }

    #[test]
    fn brute_force_small_cases() {
        // m = 2^{d-1}: maximum norm is exactly 1 and a half-space attains it.
        let r = brute_force_max_norm(3, 4, false).unwrap();
        assert!(r.exhaustive);
        assert!(
            (r.norm_sq - 1.0).abs() <= 1e-12,
            "d=3 half-count max should be 1, got {}",
            r.norm_sq
        );
        assert_eq!(r.witness.len(), 4);
        let constant_coord = (0..3).any(|c| {
            let v = r.witness[0][c];
            r.witness.iter().all(|p| p[c] == v)
        });
        assert!(constant_coord, "witness should be a half-space: {:?}", r.witness);

        let r = brute_force_max_norm(2, 2, false).unwrap();
        assert!((r.norm_sq - 1.0).abs() <= 1e-12, "square edge mean has norm 1");

        for d in 2..=4usize {
            let full = brute_force_max_norm(d, 1 << d, false).unwrap();
            assert_eq!(full.norm_sq, 0.0, "full cube mean is zero (d={d})");
        }
    }

    #[test]
    fn greedy_search_is_labeled_and_can_stall_below_the_maximum() {
        // d=5, m=16: the radius-2 ball around +1 is a strict local optimum
        // for single swaps (every swap loses at least 4 in ‖Σ‖²), so the
        // greedy search honestly reports the cap value 180/256 < 1.
        let r = brute_force_max_norm(5, 16, true).unwrap();
        assert!(!r.exhaustive, "d=5 must go through the greedy path");
        assert!(
            (r.norm_sq - 0.703_125).abs() <= 1e-12,
            "cap-seeded greedy should stall at 180/256, got {}",
            r.norm_sq
        );
        assert_eq!(r.witness.len(), 16);
        // Without the flag the same request must refuse.
        let err = brute_force_max_norm(5, 16, false).unwrap_err();
        assert!(matches!(err, Error::CapacityExceeded { .. }), "{err}");
    }

    #[test]
    fn cap_mean_norm_frozen_values() {
        let r = cap_mean_norm(20, 1).unwrap();
        assert_eq!(r.ball_size, BigUint::from(21u32));
        assert!(
            (r.norm_sq - 7220.0 / 441.0).abs() < 1e-12,
            "d=20 t=1 norm² should be 380²/(20·21²) = {}",
            r.norm_sq
        );
        let expected_bound = 2.0 * (20.0 * LN_2 - 21f64.ln());
        assert!((r.bound - expected_bound).abs() < 1e-12, "bound {}", r.bound);
        assert!((r.norm - 4.046).abs() < 1e-3, "norm ≈ 4.046, got {}", r.norm);
        assert!(
            (r.ratio - 0.756_666).abs() < 1e-4,
            "d=20 t=1 ratio drifted: {}",
            r.ratio
        );

        let t0 = cap_mean_norm(20, 0).unwrap();
        assert_eq!(t0.norm_sq, 20.0, "radius 0 is a singleton: norm = √d");

        assert!(matches!(
            cap_mean_norm(10, 5).unwrap_err(),
            Error::Domain(_)
        ));
    }

    #[test]
    fn cap_sweep_stays_below_one_and_peaks_where_frozen() {
        let sweep = cap_ratio_sweep(100).unwrap();
        assert_eq!(sweep.len(), 50);
        let mut best = &sweep[0];
        for r in &sweep {
            assert!(
                r.ratio <= 1.0 + 1e-12,
                "two-log bound violated at t={}: ratio {}",
                r.t,
                r.ratio
            );
            if r.ratio > best.ratio {
                best = r;
            }
        }
        assert_eq!(best.t, 21, "d=100 peak radius moved: t={}", best.t);
        assert!(
            (best.ratio - 0.862_884).abs() < 1e-5,
            "d=100 peak ratio drifted: {}",
            best.ratio
        );
    }

    #[test]
    fn shell_sum_matches_telescoped_closed_form() {
        // Σ_{j≤t} C(d,j)(d−2j) telescopes to (t+1)·C(d,t+1); the sweep path
        // must reproduce it through the ratio norm² = N²/(d·|A|²).
        for (d, t) in [(11usize, 3usize), (20, 9), (37, 11)] {
            let r = cap_mean_norm(d, t).unwrap();
            let n_closed = util::binomial(d as u64, t as u64 + 1) * BigUint::from(t as u64 + 1);
            let denom = BigUint::from(d as u64) * &r.ball_size * &r.ball_size;
            let expected = big_ratio_to_f64(&(&n_closed * &n_closed), &denom);
            assert!(
                (r.norm_sq - expected).abs() <= 1e-12 * expected,
                "telescoped identity broken at d={d}, t={t}: {} vs {expected}",
                r.norm_sq
            );
        }
    }

    #[test]
    fn per_coordinate_sigma_is_not_projection_safe() {
        // The Hamming ball d=500, t=142 breaks the ψ₂ bound when σ is taken
        // as the coordinate (Rademacher) norm 1/√ln2, and respects it with
        // the projection-uniform σ = √(8/3). This is why the hypercube base
        // advertises the Gaussian constant.
        let r = cap_mean_norm(500, 142).unwrap();
        assert!(
            (r.norm_sq - 94.423_083_353_825_62).abs() < 1e-9,
            "frozen ball norm² drifted: {}",
            r.norm_sq
        );
        let ln_inv_p = r.bound / 2.0;
        let per_coordinate = (1.0 / LN_2) * (LN_2 + ln_inv_p);
        assert!(
            r.norm_sq > per_coordinate + 19.0,
            "expected a decisive violation of the per-coordinate reading: {} vs {per_coordinate}",
            r.norm_sq
        );
        let projection_safe = STD_NORMAL_PSI2.powi(2) * (LN_2 + ln_inv_p);
        assert!(
            r.norm_sq <= projection_safe,
            "projection-uniform σ must hold: {} vs {projection_safe}",
            r.norm_sq
        );
        assert!(
            r.norm_sq <= r.bound,
            "two-log bound must hold: {} vs {}",
            r.norm_sq,
            r.bound
        );
    }

    #[test]
    fn gaussian_halfline_grid_respects_all_bounds() {
        let base = ScoreBase::Gaussian { d: 1 };
        let sets: Vec<SubsetSpec> = (0..=12)
            .map(|i| SubsetSpec::HalfLine {
                t: -3.0 + 0.5 * i as f64,
            })
            .collect();
        let records = verify_geometric_bounds(&base, &sets, None).unwrap();
        assert_eq!(records.len(), 13);
        for r in &records {
            assert_eq!(r.checks.len(), 3, "all three bounds apply to {}", r.set_id);
            assert!(
                r.min_slack() >= -1e-9,
                "bound violated at {}: min slack {}",
                r.set_id,
                r.min_slack()
            );
        }
    }

    #[test]
    fn psi2_closed_forms_and_homogeneity() {
        let normal = psi2_norm(&Psi2Dist::std_normal()).unwrap();
        let target = (8.0f64 / 3.0).sqrt();
        assert!(
            (normal - target).abs() < 1e-9 * target,
            "standard normal ψ₂ = √(8/3): got {normal}"
        );

        let rad = psi2_norm(&Psi2Dist::Rademacher).unwrap();
        let target = 1.0 / LN_2.sqrt();
        assert!(
            (rad - target).abs() < 1e-9 * target,
            "Rademacher ψ₂ = 1/√ln2: got {rad}"
        );

        // Absolute homogeneity through the numeric path, not the closed form.
        let scaled = psi2_norm(&Psi2Dist::Discrete {
            values: vec![-3.0, 3.0],
            probs: vec![0.5, 0.5],
        })
        .unwrap();
        assert!(
            (scaled - 3.0 * rad).abs() < 1e-9 * scaled,
            "ψ₂(3X) = 3ψ₂(X): got {scaled} vs {}",
            3.0 * rad
        );

        let sd3 = psi2_norm(&Psi2Dist::Gaussian { sd: 3.0 }).unwrap();
        assert!((sd3 - 3.0 * normal).abs() < 1e-9 * sd3);

        // Quadrature path: uniform on [−w, w] scales too, and sits between
        // the degenerate and Rademacher extremes for w = 1.
        let u1 = psi2_norm(&Psi2Dist::Uniform { half_width: 1.0 }).unwrap();
        let u3 = psi2_norm(&Psi2Dist::Uniform { half_width: 3.0 }).unwrap();
        assert!(
            (u3 - 3.0 * u1).abs() < 1e-8 * u3,
            "uniform homogeneity: {u3} vs {}",
            3.0 * u1
        );
        assert!(
            0.5 < u1 && u1 < rad,
            "uniform[−1,1] ψ₂ should fall below the two-point law: {u1}"
        );

        assert_eq!(psi2_norm(&Psi2Dist::Gaussian { sd: 0.0 }).unwrap(), 0.0);
        assert_eq!(
            psi2_norm(&Psi2Dist::Discrete {
                values: vec![0.0],
                probs: vec![1.0],
            })
            .unwrap(),
            0.0,
            "a point mass at zero has ψ₂ norm 0"
        );
    }

    #[test]
    fn laplace_has_no_finite_psi2() {
        let err = psi2_norm(&Psi2Dist::Laplace { scale: 0.5 }).unwrap_err();
        match err {
            Error::NoFinitePsi2 { cap } => assert_eq!(cap, PSI2_SEARCH_CAP),
            other => panic!("expected NoFinitePsi2, got {other}"),
        }
    }

    #[test]
    fn psi2_variance_domination_for_model_scores() {
        // E X² ≤ ψ₂²·ln2 by Jensen; Rademacher-type scores attain equality.
        for p in [0.5, 0.3] {
            let model = crate::models::ModelSpec::bernoulli(1, p).unwrap();
            let space = model.sample_space().unwrap();
            let mut values = Vec::new();
            let mut probs = Vec::new();
            for x in &space {
                values.push(model.score(x).unwrap()[0]);
                probs.push(model.pmf(&model.theta0, x).unwrap());
            }
            let sigma = psi2_norm(&Psi2Dist::Discrete {
                values: values.clone(),
                probs: probs.clone(),
            })
            .unwrap();
            let var: f64 = values
                .iter()
                .zip(&probs)
                .map(|(v, q)| q * v * v)
                .sum();
            assert!(
                var <= sigma * sigma * LN_2 * (1.0 + 1e-9),
                "variance domination failed at p={p}: var {var}, ψ₂²ln2 {}",
                sigma * sigma * LN_2
            );
            if p == 0.5 {
                assert!(
                    (var - sigma * sigma * LN_2).abs() < 1e-9 * var,
                    "±2 scores attain equality: var {var}, bound {}",
                    sigma * sigma * LN_2
                );
            }
        }
    }

    #[test]
    fn tensor_power_frozen_values() {
        let sign = StepIndicator::AtLeast { t: 0.0 };
        let b16 = tensor_power_compare(&sign, 16).unwrap();
        assert!(
            (b16.hypercube_value - 102_960.0 / 131_072.0).abs() < 1e-12,
            "B=16 lattice value should be exact: {}",
            b16.hypercube_value
        );
        let root_2_over_pi = (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (b16.gaussian_value - root_2_over_pi).abs() < 1e-14,
            "E[Z | Z ≥ 0] = √(2/π): got {}",
            b16.gaussian_value
        );
        let b4 = tensor_power_compare(&sign, 4).unwrap();
        assert!((b4.hypercube_value - 0.75).abs() < 1e-12, "B=4 value is 3/4");
        let (g16, g4) = (b16.rel_gap.unwrap(), b4.rel_gap.unwrap());
        assert!(g16 < 0.10, "B=16 gap should be under 10%: {g16}");
        assert!(g16 < g4, "gap must shrink with the lift order: {g16} vs {g4}");

        let trivial = tensor_power_compare(&StepIndicator::One, 8).unwrap();
        assert_eq!(trivial.hypercube_value, 0.0);
        assert_eq!(trivial.gaussian_value, 0.0);
        assert!(trivial.rel_gap.is_none());
    }

    #[test]
    fn error_paths() {
        let cube = ScoreBase::Hypercube { d: 3 };
        assert!(matches!(
            conditional_mean_norm(&cube, &SubsetSpec::Points(vec![])).unwrap_err(),
            Error::ZeroMeasureSet
        ));
        assert!(matches!(
            conditional_mean_norm(
                &cube,
                &SubsetSpec::Points(vec![vec![1, 1, 1], vec![1, 1, 1]])
            )
            .unwrap_err(),
            Error::Domain(_)
        ));
        assert!(matches!(
            conditional_mean_norm(&cube, &SubsetSpec::Points(vec![vec![1, 1]])).unwrap_err(),
            Error::ShapeMismatch(_)
        ));
        assert!(matches!(
            conditional_mean_norm(&cube, &SubsetSpec::Indicator(vec![true; 4])).unwrap_err(),
            Error::ShapeMismatch(_)
        ));
        assert!(matches!(
            conditional_mean_norm(&cube, &SubsetSpec::HalfLine { t: 0.0 }).unwrap_err(),
            Error::UnsupportedEnumeration(_)
        ));

        let gauss = ScoreBase::Gaussian { d: 2 };
        assert!(matches!(
            conditional_mean_norm(&gauss, &SubsetSpec::Box(vec![(1.0, 1.0), (0.0, 2.0)]))
                .unwrap_err(),
            Error::ZeroMeasureSet
        ));
        assert!(matches!(
            conditional_mean_norm(&gauss, &SubsetSpec::HalfLine { t: 45.0 }).unwrap_err(),
            Error::ZeroMeasureSet
        ));

        let continuous =
            ScoreBase::Model(crate::models::ModelSpec::gaussian(2, 1.0).unwrap());
        assert!(matches!(
            conditional_mean_norm(&continuous, &SubsetSpec::Indicator(vec![true; 4]))
                .unwrap_err(),
            Error::UnsupportedEnumeration(_)
        ));

        assert!(matches!(
            tensor_power_compare(&StepIndicator::AtLeast { t: 0.0 }, 21).unwrap_err(),
            Error::CapacityExceeded { .. }
        ));
        assert!(matches!(
            tensor_power_compare(&StepIndicator::AtLeast { t: 99.0 }, 8).unwrap_err(),
            Error::ZeroMeasureSet
        ));
        assert!(matches!(
            exhaustive_hypercube_check(5).unwrap_err(),
            Error::CapacityExceeded { .. }
        ));
    }

    #[test]
    fn model_base_multinomial_obeys_bessel() {
        // Correlated scores: the Bessel bound with λmax is the only generic
        // check, and it must hold for every event.
        let model = crate::models::ModelSpec::multinomial(vec![0.2, 0.3]).unwrap();
        let base = ScoreBase::Model(model.clone());
        let space_size = model.space_size().unwrap();
        let mut sets = Vec::new();
        for mask in 1u32..(1 << space_size) {
            sets.push(SubsetSpec::Indicator(
                (0..space_size).map(|i| (mask >> i) & 1 == 1).collect(),
            ));
        }
        let records = verify_geometric_bounds(&base, &sets, None).unwrap();
        for r in &records {
            assert_eq!(r.checks.len(), 1, "only Bessel applies to model bases");
            assert!(
                r.checks[0].slack >= -1e-9,
                "Bessel violated on {}: slack {}",
                r.set_id,
                r.checks[0].slack
            );
        }
        // Cross-check one record against a direct computation on outcomes.
        let single = SubsetSpec::Indicator(vec![true, false, false]);
        let (mass, norm_sq) = conditional_mean_norm(&base, &single).unwrap();
        assert!((mass - 0.2).abs() < 1e-15);
        let score = model.score(&Observation::Outcome(1)).unwrap();
        let expected: f64 = score.iter().map(|s| s * s).sum();
        assert!(
            (norm_sq - expected).abs() < 1e-12,
            "singleton norm² is ‖score‖²: {norm_sq} vs {expected}"
        );
    }
}
