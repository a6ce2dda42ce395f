//! Closed-form minimax rate brackets and the supporting inequality toolkit:
//! the distance-based Fano bound, binary-entropy utilities, Poisson/binomial
//! Chernoff tails, and exact hypothesis-family counting.
//!
//! Every rate evaluator returns the *constant-free bracket* of the matching
//! statement — e.g. `d²/(n(2^k∧d)I₀)` for general families or
//! `(d²/nk ∨ d/n)·σ²` for the Gaussian location model — because the
//! universal constants in front are existential. Reports pair these
//! brackets with measured risks as ratios; nothing here is a pass/fail
//! threshold by itself. Preconditions of the corresponding statements
//! (sample-size floors, `k ≥ ln d` side conditions) are checked and
//! reported as warnings, not errors: the bracket is still evaluated so
//! that sweeps crossing a boundary stay plottable.
//!
//! All logarithms are natural; the binary entropy `h₂` and its inverse are
//! the single base-2 exception, with the conversion localized in
//! [`f_entropy`].

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// Which lower-bound statement a [`RateQuery`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatement {
    /// Any product family with finite Fisher information:
    /// `d²/(n(2^k∧d)I₀)`.
    General,
    /// Sub-Gaussian score with projection-uniform ψ₂ norm `σ`:
    /// `d²/(n(k∧d)σ²)`.
    SubGaussian,
    /// Distribution estimation on the simplex: `d/(n2^k) ∨ 1/n`.
    Multinomial,
    /// Gaussian location model: `(d²/(nk) ∨ d/n)·σ²`.
    GaussianLocation,
    /// Product Bernoulli with means ranging over `[0,1]^d`:
    /// `d²/(nk) ∨ d/n`.
    BernoulliCube,
    /// Product Bernoulli with means on the probability simplex:
    /// `d/(n2^k) ∨ 1/n`.
    BernoulliSimplex,
    /// `s`-sparse Gaussian location model:
    /// `(sd·ln(d/s)/(nk) ∨ s·ln(d/s)/n)·σ²`.
    SparseGaussian,
}

impl RateStatement {
    pub fn name(self) -> &'static str {
        match self {
            RateStatement::General => "general",
            RateStatement::SubGaussian => "sub_gaussian",
            RateStatement::Multinomial => "multinomial",
            RateStatement::GaussianLocation => "gaussian_location",
            RateStatement::BernoulliCube => "bernoulli_cube",
            RateStatement::BernoulliSimplex => "bernoulli_simplex",
            RateStatement::SparseGaussian => "sparse_gaussian",
        }
    }
}

/// Inputs for [`lower_rate`]. `s` is consumed only by the sparse statement,
/// `i0` only by the general one, `sigma2` by the sub-Gaussian/Gaussian
/// family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateQuery {
    pub statement: RateStatement,
    pub n: u64,
    pub d: u64,
    pub k: u32,
    #[serde(default)]
    pub s: Option<u64>,
    #[serde(default)]
    pub i0: Option<f64>,
    #[serde(default)]
    pub sigma2: Option<f64>,
}

/// A constant-free rate together with any precondition warnings.
#[derive(Clone, Debug, Serialize)]
pub struct RateResult {
    pub rate: f64,
    pub warnings: Vec<String>,
}

fn positive(name: &'static str, value: Option<f64>) -> Result<f64> {
    match value {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(Error::Domain(format!("{name} must be positive, got {v}"))),
        None => Err(Error::Domain(format!(
            "this statement needs {name} to be supplied"
        ))),
    }
}

/// Evaluates the constant-free lower-bound bracket for the requested
/// statement.
///
/// Violated side conditions (sample-size floors, `k ≥ ln d`, `s ≤ d/2`) are
/// returned as warnings while the bracket is still computed, so parameter
/// sweeps that cross a validity boundary remain comparable on both sides.
pub fn lower_rate(q: &RateQuery) -> Result<RateResult> {
    if q.n == 0 || q.d == 0 {
        return Err(Error::Domain(format!(
            "n and d must be positive, got n={}, d={}",
            q.n, q.d
        )));
    }
    if q.k == 0 {
        return Err(Error::Domain("k must be a positive bit budget".into()));
    }
    let n = q.n as f64;
    let d = q.d as f64;
    let k = f64::from(q.k);
    let two_k = 2f64.powi(q.k as i32);
    let mut warnings = Vec::new();
    fn need_n(warnings: &mut Vec<String>, n: f64, floor: f64, label: &str) {
        if n < floor {
            warnings.push(format!(
                "sample size n={n} is below the statement's floor n ≥ {label} = {floor:.6}"
            ));
        }
    }
    fn need_k_log_d(warnings: &mut Vec<String>, k: f64, d: f64) {
        if k < d.ln() {
            warnings.push(format!(
                "bit budget k={k} is below the side condition k ≥ ln d ≈ {:.4}",
                d.ln()
            ));
        }
    }
    let rate = match q.statement {
        RateStatement::General => {
            let i0 = positive("i0", q.i0)?;
            need_n(&mut warnings, n, d * d / two_k.min(d), "d²/(2^k∧d)");
            d * d / (n * two_k.min(d) * i0)
        }
        RateStatement::SubGaussian => {
            let sigma2 = positive("sigma2", q.sigma2)?;
            need_n(&mut warnings, n, d * d / k.min(d), "d²/(k∧d)");
            need_k_log_d(&mut warnings, k, d);
            d * d / (n * k.min(d) * sigma2)
        }
        RateStatement::Multinomial => {
            need_n(&mut warnings, n, d * d / two_k.min(d), "d²/(2^k∧d)");
            (d / (n * two_k)).max(1.0 / n)
        }
        RateStatement::GaussianLocation => {
            let sigma2 = positive("sigma2", q.sigma2)?;
            need_n(&mut warnings, n, d * d / k.min(d), "d²/(k∧d)");
            need_k_log_d(&mut warnings, k, d);
            (d * d / (n * k)).max(d / n) * sigma2
        }
        RateStatement::BernoulliCube => {
            need_n(&mut warnings, n, d * d / k.min(d), "d²/(d∧k)");
            (d * d / (n * k)).max(d / n)
        }
        RateStatement::BernoulliSimplex => {
            need_n(&mut warnings, n, d * d / two_k.min(d), "d²/(d∧2^k)");
            (d / (n * two_k)).max(1.0 / n)
        }
        RateStatement::SparseGaussian => {
            let sigma2 = positive("sigma2", q.sigma2)?;
            let s = match q.s {
                Some(s) if s > 0 => s as f64,
                Some(_) => return Err(Error::Domain("sparsity s must be positive".into())),
                None => {
                    return Err(Error::Domain(
                        "the sparse statement needs the sparsity s".into(),
                    ))
                }
            };
            if 2.0 * s > d {
                warnings.push(format!(
                    "sparsity s={s} exceeds d/2 = {}; the statement assumes s ≤ d/2",
                    d / 2.0
                ));
            }
            let log_ratio = (d / s).ln();
            need_n(&mut warnings, n, s * d * log_ratio / k.min(d), "sd·ln(d/s)/(k∧d)");
            need_k_log_d(&mut warnings, k, d);
            (s * d * log_ratio / (n * k)).max(s * log_ratio / n) * sigma2
        }
    };
    Ok(RateResult { rate, warnings })
}

/// Distance-based Fano inequality: for `V` uniform on a finite alphabet,
/// any Markov chain `V — Y — V̂`, and any radius-`t` neighborhood counts
/// `Nmax ≥ Nmin`, the misestimation probability satisfies
///
/// `P(d(V, V̂) > t) ≥ 1 − (I(V;Y) + ln 2) / ln(|V|/Nmax)`.
///
/// `n_min` defaults to `n_max` (symmetric alphabets). Requires
/// `Nmax + Nmin < |V|`; the result is clamped to `[0, 1]`.
pub fn fano_bound(
    card_v: &BigUint,
    n_max: &BigUint,
    n_min: Option<&BigUint>,
    info_nats: f64,
) -> Result<f64> {
    if n_max.is_zero() {
        return Err(Error::Domain(
            "the neighborhood count Nmax must be at least 1 (it contains the center)".into(),
        ));
    }
    if !(info_nats >= 0.0) {
        return Err(Error::Domain(format!(
            "mutual information must be nonnegative, got {info_nats}"
        )));
    }
    let n_min = n_min.unwrap_or(n_max);
    if n_max + n_min >= *card_v {
        return Err(Error::Inapplicable(format!(
            "distance Fano needs Nmax + Nmin < |V|, got {} + {} vs |V| = {}",
            n_max, n_min, card_v
        )));
    }
    let log_ratio = util::ln_biguint(card_v) - util::ln_biguint(n_max);
    let bound = 1.0 - (info_nats + std::f64::consts::LN_2) / log_ratio;
    Ok(bound.clamp(0.0, 1.0))
}

/// The standard testing-argument composition for the `±δ` hypercube packing
/// at Hamming threshold `d/5`:
///
/// `risk ≥ (dδ²/10) · (1 − (I + ln 2)/(d/8))`,
///
/// where `d/8` lower-bounds `ln(|V|/Nmax(d/5))` via the Chernoff tail of
/// the binomial ball. The probability factor is clamped to `[0, 1]`.
pub fn testing_risk_bound(d: u64, delta: f64, info_nats: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "perturbation δ must be positive, got {delta}"
        )));
    }
    if !(info_nats >= 0.0) {
        return Err(Error::Domain(format!(
            "mutual information must be nonnegative, got {info_nats}"
        )));
    }
    let d = d as f64;
    let prob = (1.0 - (info_nats + std::f64::consts::LN_2) / (d / 8.0)).clamp(0.0, 1.0);
    Ok(d * delta * delta / 10.0 * prob)
}

/// Binary entropy in bits, `h₂(x) = −x·log₂x − (1−x)·log₂(1−x)`, on the
/// lower branch `x ∈ [0, ½]` where it is invertible.
pub fn h2(x: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&x) {
        return Err(Error::Domain(format!(
            "h2 takes the lower branch x ∈ [0, 1/2], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Inverse of [`h2`] on `[0, 1] → [0, ½]`, bisected to absolute
/// tolerance 1e−12.
///
/// The exact endpoints map exactly (`0 → 0`, `1 → ½`). Just below `y = 1`
/// the inverse is inherently ill-conditioned in double precision — `h₂`
/// flattens quadratically at `½`, so the best attainable accuracy in `x`
/// is on the order of `√ulp ≈ 1e−8` there — while the round trip
/// `h₂(h₂⁻¹(y))` stays tight everywhere.
pub fn h2_inv(y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::Domain(format!(
            "h2_inv takes y ∈ [0, 1], got {y}"
        )));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if h2(mid)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `f(y) = (1 − 2·h₂⁻¹(y))²`: the decreasing concave envelope satisfying
/// `f(y) ≤ 2·ln2·(1−y)`, which converts per-coordinate entropy into a
/// squared-mean budget.
pub fn f_entropy(y: f64) -> Result<f64> {
    let x = h2_inv(y)?;
    Ok((1.0 - 2.0 * x).powi(2))
}

/// Which tail of the Poisson/binomial Chernoff bound to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSide {
    /// `P(X ≥ (1+δ)λ)`, any `δ > 0`.
    Upper,
    /// `P(X ≤ (1−δ)λ)`, `δ ∈ (0, 1)`.
    Lower,
}

/// The tight and relaxed Chernoff expressions for one tail.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailBounds {
    /// `(e^{±δ}/(1±δ)^{1±δ})^λ`.
    pub tight: f64,
    /// `exp(−(δ²∧δ)λ/3)` above, `exp(−δ²λ/2)` below.
    pub relaxed: f64,
}

/// Chernoff tails for `X ~ Poi(λ)` (also valid for `B(n, λ/n)`): both the
/// tight form and its standard relaxation, evaluated in the log domain.
pub fn chernoff_tails(lambda: f64, delta: f64, side: TailSide) -> Result<TailBounds> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "mean λ must be positive, got {lambda}"
        )));
    }
    match side {
        TailSide::Upper => {
            if !(delta > 0.0) || !delta.is_finite() {
                return Err(Error::Domain(format!(
                    "upper tail needs δ > 0, got {delta}"
                )));
            }
            Ok(TailBounds {
                tight: (lambda * (delta - (1.0 + delta) * delta.ln_1p())).exp(),
                relaxed: (-(delta * delta).min(delta) * lambda / 3.0).exp(),
            })
        }
        TailSide::Lower => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::Domain(format!(
                    "lower tail needs δ ∈ (0, 1), got {delta}"
                )));
            }
            Ok(TailBounds {
                tight: (lambda * (-delta - (1.0 - delta) * (-delta).ln_1p())).exp(),
                relaxed: (-delta * delta * lambda / 2.0).exp(),
            })
        }
    }
}

/// Exact Hamming-ball volume together with its fraction of the cube.
#[derive(Clone, Debug, Serialize)]
pub struct BallVolume {
    /// `Σ_{j≤t} C(d, j)` exactly.
    #[serde(serialize_with = "crate::geometry::biguint_as_decimal")]
    pub count: BigUint,
    /// `count / 2^d`.
    pub ratio: f64,
}

/// Number of cube points within Hamming distance `t` of a fixed point,
/// exactly, plus the volume ratio compared against `exp(−d/8)`-style
/// packing estimates by the caller.
pub fn hamming_ball_volume(d: u64, t: u64) -> Result<BallVolume> {
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    if t > d {
        return Err(Error::Domain(format!(
            "radius {t} exceeds the cube dimension {d}"
        )));
    }
    let mut count = BigUint::zero();
    let mut binom = BigUint::one();
    for j in 0..=t {
        if j > 0 {
            binom = binom * BigUint::from(d - j + 1) / BigUint::from(j);
        }
        count += &binom;
    }
    let ratio = (util::ln_biguint(&count) - d as f64 * std::f64::consts::LN_2).exp();
    Ok(BallVolume { count, ratio })
}

/// Sizes used by the sparse-family Fano calibration.
#[derive(Clone, Debug, Serialize)]
pub struct SparseFamilyCounts {
    /// `|𝒰| = 2^s·C(d, s)`: signed `s`-sparse vectors in `{0, ±1}^d`.
    #[serde(serialize_with = "crate::geometry::biguint_as_decimal")]
    pub family_size: BigUint,
    /// `Σ_{u+v≤t} C(s,u)·C(s−u,v)·C(d−s,v)`: hypotheses reachable from a
    /// center by `u` sign flips and `v` support moves, binned by `u + v`.
    /// This is the standard counting surrogate for the within-radius
    /// neighborhood (sign multiplicity of moved coordinates is absorbed
    /// into the rate constant).
    #[serde(serialize_with = "crate::geometry::biguint_as_decimal")]
    pub within_radius: BigUint,
    /// `ln(|𝒰| / within_radius)`: the packing exponent entering Fano.
    pub log_packing_ratio: f64,
}

/// Exact counts for the signed `s`-sparse hypothesis family and its
/// radius-`t` counting formula, all in big-integer arithmetic.
pub fn sparse_family_counts(d: u64, s: u64, t: u64) -> Result<SparseFamilyCounts> {
    if d == 0 || s == 0 {
        return Err(Error::Domain("d and s must be positive".into()));
    }
    if 2 * s > d {
        return Err(Error::Domain(format!(
            "sparsity s={s} must satisfy s ≤ d/2 = {}",
            d as f64 / 2.0
        )));
    }
    let family_size = util::binomial(d, s) * BigUint::from(2u32).pow(s as u32);
    let mut within = BigUint::zero();
    for u in 0..=t.min(s) {
        for v in 0..=(t - u).min(s - u).min(d - s) {
            within += util::binomial(s, u) * util::binomial(s - u, v) * util::binomial(d - s, v);
        }
    }
    let log_packing_ratio = util::ln_biguint(&family_size) - util::ln_biguint(&within);
    Ok(SparseFamilyCounts {
        family_size,
        within_radius: within,
        log_packing_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackboard::random_tree;
    use crate::models::ModelSpec;
    use crate::oracle;

    const LN_2: f64 = std::f64::consts::LN_2;

    fn query(statement: RateStatement, n: u64, d: u64, k: u32) -> RateQuery {
        RateQuery {
            statement,
            n,
            d,
            k,
            s: None,
            i0: None,
            sigma2: None,
        }
    }

    #[test]
    fn rate_brackets_match_hand_arithmetic() {
        let r = lower_rate(&query(RateStatement::Multinomial, 1_000_000, 1000, 3)).unwrap();
        assert_eq!(
            r.rate, 1.25e-4,
            "d/(n·2^k) = 1000/(10⁶·8) should win over 1/n"
        );
        assert!(r.warnings.is_empty(), "n = 10⁶ ≥ d²/8: {:?}", r.warnings);

        let mut q = query(RateStatement::GaussianLocation, 20_000, 10, 1);
        q.sigma2 = Some(1.0);
        let r = lower_rate(&q).unwrap();
        assert_eq!(r.rate, 5e-3, "d²/(nk) = 100/20000 dominates d/n");
        assert!(
            r.warnings.iter().any(|w| w.contains("k ≥ ln d")),
            "k=1 < ln 10 must be flagged: {:?}",
            r.warnings
        );

        let mut q = query(RateStatement::SparseGaussian, 100_000, 100, 7);
        q.s = Some(10);
        q.sigma2 = Some(1.0);
        let r = lower_rate(&q).unwrap();
        assert!(
            (r.rate - 3.289_407_275_705_779_7e-3).abs() < 1e-18,
            "sd·ln(d/s)/(nk) bracket drifted: {}",
            r.rate
        );

        let mut q = query(RateStatement::General, 1_000_000, 50, 2);
        q.i0 = Some(4.0);
        let r = lower_rate(&q).unwrap();
        assert_eq!(r.rate, 2500.0 / (1_000_000.0 * 4.0 * 4.0), "d²/(n·2²·I₀)");

        let r = lower_rate(&query(RateStatement::BernoulliCube, 10_000, 20, 4)).unwrap();
        assert_eq!(r.rate, 400.0 / (10_000.0 * 4.0), "d²/(nk) at k=4");
        let r = lower_rate(&query(RateStatement::BernoulliSimplex, 10_000, 20, 4)).unwrap();
        assert_eq!(r.rate, 20.0 / (10_000.0 * 16.0), "d/(n·2⁴)");
    }

    #[test]
    fn general_rate_saturates_at_budget_log_d() {
        // Once 2^k ≥ d the bracket depends on k only through 2^k ∧ d = d,
        // so every k ≥ log₂ d gives bit-identical output.
        let mut base = query(RateStatement::General, 1 << 20, 16, 4);
        base.i0 = Some(1.0);
        let at_log_d = lower_rate(&base).unwrap().rate;
        for k in [5, 9, 30] {
            let mut q = base.clone();
            q.k = k;
            assert_eq!(
                lower_rate(&q).unwrap().rate,
                at_log_d,
                "saturation must be exact at k={k}"
            );
        }
        let mut q = base.clone();
        q.k = 3;
        assert!(
            lower_rate(&q).unwrap().rate > at_log_d,
            "below saturation the bracket strictly grows"
        );
    }

    #[test]
    fn rate_queries_validate_inputs() {
        let err = lower_rate(&query(RateStatement::General, 100, 10, 2)).unwrap_err();
        assert!(
            matches!(&err, Error::Domain(m) if m.contains("i0")),
            "missing Fisher information must name i0: {err}"
        );
        let err = lower_rate(&query(RateStatement::SparseGaussian, 100, 10, 2)).unwrap_err();
        assert!(matches!(&err, Error::Domain(m) if m.contains("sigma2")), "{err}");
        let err = lower_rate(&query(RateStatement::Multinomial, 100, 10, 0)).unwrap_err();
        assert!(matches!(&err, Error::Domain(m) if m.contains('k')), "{err}");
        let err = lower_rate(&query(RateStatement::Multinomial, 0, 10, 1)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");

        let mut q = query(RateStatement::GaussianLocation, 100, 10, 4);
        q.sigma2 = Some(-1.0);
        assert!(lower_rate(&q).is_err(), "negative variance must be rejected");

        // Sample-size floor violations warn but still evaluate.
        let r = lower_rate(&query(RateStatement::Multinomial, 10, 1000, 3)).unwrap();
        assert!(r.rate > 0.0);
        assert!(
            r.warnings.iter().any(|w| w.contains("sample size")),
            "n=10 ≪ d²/8 must warn: {:?}",
            r.warnings
        );
    }

    #[test]
    fn fano_frozen_instance_and_clamps() {
        // |V|=16, Nmax=Nmin=1, I=0: 1 − ln2/ln16 = 3/4 exactly, and the
        // true blind-guess error 15/16 indeed sits above it.
        let v = BigUint::from(16u32);
        let one = BigUint::from(1u32);
        let b = fano_bound(&v, &one, None, 0.0).unwrap();
        assert_eq!(b, 0.75, "ln2/ln16 = 1/4 should be exact");
        assert!(b <= 15.0 / 16.0);

        // Large information clamps to zero.
        let b = fano_bound(&v, &one, None, 50.0).unwrap();
        assert_eq!(b, 0.0);

        // Nmax + Nmin ≥ |V| is out of the lemma's scope.
        let err = fano_bound(&BigUint::from(4u32), &BigUint::from(3u32), None, 0.0).unwrap_err();
        assert!(matches!(err, Error::Inapplicable(_)), "{err}");
        assert!(fano_bound(&v, &BigUint::from(0u32), None, 0.0).is_err());
        assert!(fano_bound(&v, &one, None, -0.1).is_err());
    }

    #[test]
    fn fano_is_monotone_in_information_and_neighborhood() {
        let v = BigUint::from(1u64 << 20);
        let mut last = 1.0;
        for i in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let b = fano_bound(&v, &BigUint::from(4u32), None, i).unwrap();
            assert!(
                b <= last,
                "bound must fall as information grows: {b} after {last} at I={i}"
            );
            last = b;
        }
        let mut last = 1.0;
        for nmax in [1u32, 2, 8, 64, 1024] {
            let b = fano_bound(&v, &BigUint::from(nmax), None, 1.0).unwrap();
            assert!(
                b <= last,
                "bound must fall as the neighborhood grows: {b} after {last} at Nmax={nmax}"
            );
            last = b;
        }
    }

    #[test]
    fn fano_never_exceeds_the_exact_test_error() {
        // On enumerable instances the Fano bound must sit at or below the
        // exactly computed minimal misestimation probability.
        for (d, t, nmax, seed) in [(3usize, 0u32, 1u32, 11u64), (4, 1, 5, 12), (2, 0, 1, 13)] {
            let model = ModelSpec::bernoulli(d, 0.5).unwrap();
            let cube = model.hypothesis_cube(0.12, None).unwrap();
            let tree = random_tree(&model, &[1, 1], seed).unwrap();
            let info = oracle::exact_mutual_information(&tree, &cube).unwrap();
            let bound = fano_bound(
                &BigUint::from(1u64 << d),
                &BigUint::from(nmax),
                None,
                info,
            )
            .unwrap();
            let exact = oracle::exact_distance_test_error(&tree, &cube, f64::from(t)).unwrap();
            assert!(
                bound <= exact + 1e-12,
                "d={d}, t={t}: Fano {bound} exceeds the exact error {exact}"
            );
        }
    }

    #[test]
    fn testing_composition_reproduces_hand_value() {
        let b = testing_risk_bound(16, 0.1, 0.5).unwrap();
        assert!(
            (b - 6.454_822_555_520_437e-3).abs() < 1e-17,
            "(16·0.01/10)(1 − (0.5+ln2)/2) drifted: {b}"
        );
        // Information past d/8 − ln2 zeroes the bracket instead of going
        // negative.
        assert_eq!(testing_risk_bound(16, 0.1, 10.0).unwrap(), 0.0);
        assert!(testing_risk_bound(0, 0.1, 0.0).is_err());
        assert!(testing_risk_bound(16, 0.0, 0.0).is_err());
    }

    #[test]
    fn entropy_round_trip_and_frozen_points() {
        assert_eq!(h2(0.5).unwrap(), 1.0, "h2(1/2) is one bit");
        assert_eq!(h2(0.0).unwrap(), 0.0);
        assert!((h2_inv(1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(f_entropy(1.0).unwrap() < 1e-11, "f(1) = 0");
        assert_eq!(f_entropy(0.0).unwrap(), 1.0, "f(0) = (1−0)² = 1");

        let x = h2_inv(0.5).unwrap();
        assert!(
            (x - 0.110_027_864_438_359_55).abs() < 1e-10,
            "h2_inv(1/2) drifted: {x}"
        );
        let f = f_entropy(0.5).unwrap();
        assert!(
            (f - 0.608_313_066_058_025_9).abs() < 1e-9,
            "f(1/2) drifted: {f}"
        );
        assert!(f <= 2.0 * LN_2 * 0.5, "f(1/2) must respect the linear cap");

        for i in 0..=100 {
            let y = i as f64 / 100.0;
            let round = h2(h2_inv(y).unwrap()).unwrap();
            assert!(
                (round - y).abs() < 1e-10,
                "h2(h2_inv({y})) = {round} misses the round trip"
            );
        }
        assert!(h2(0.6).is_err(), "upper branch is rejected");
        assert!(h2_inv(1.5).is_err());
    }

    #[test]
    fn f_entropy_is_decreasing_concave_and_below_linear_cap() {
        let n = 1000;
        let f: Vec<f64> = (0..=n)
            .map(|i| f_entropy(i as f64 / n as f64).unwrap())
            .collect();
        for i in 0..=n {
            let y = i as f64 / n as f64;
            assert!(
                f[i] <= 2.0 * LN_2 * (1.0 - y) + 1e-9,
                "f({y}) = {} breaks the 2ln2·(1−y) cap",
                f[i]
            );
        }
        for i in 1..=n {
            assert!(
                f[i] <= f[i - 1] + 1e-12,
                "f must be decreasing at grid point {i}"
            );
        }
        for i in 1..n {
            let second = f[i + 1] - 2.0 * f[i] + f[i - 1];
            assert!(
                second <= 1e-9,
                "second difference {second} > 0 at grid point {i}: f must be concave"
            );
        }
    }

    #[test]
    fn chernoff_frozen_values_and_exact_binomial_domination() {
        // Bin(100, ½) ⇒ λ = 50; P(X ≥ 75) is the δ = ½ upper tail.
        let t = chernoff_tails(50.0, 0.5, TailSide::Upper).unwrap();
        assert!(
            (t.relaxed - 1.550_385_359_900_931_4e-2).abs() < 1e-16,
            "exp(−(¼·50)/3) drifted: {}",
            t.relaxed
        );
        assert!(
            (t.tight - 4.472_162_940_364_412e-3).abs() < 1e-15,
            "(e^½/1.5^1.5)^50 drifted: {}",
            t.tight
        );
        // Exact tail Σ_{j≥75} C(100,j)/2^100 via big integers.
        let mut tail = BigUint::zero();
        for j in 75..=100u64 {
            tail += util::binomial(100, j);
        }
        let exact = (util::ln_biguint(&tail) - 100.0 * LN_2).exp();
        assert!(
            (exact - 2.818_141_017_102_701e-7).abs() < 1e-19,
            "exact binomial tail drifted: {exact}"
        );
        assert!(
            exact <= t.tight && t.tight <= t.relaxed,
            "exact {exact} ≤ tight {} ≤ relaxed {} must chain",
            t.tight,
            t.relaxed
        );
    }

    #[test]
    fn chernoff_tails_degenerate_and_ordered() {
        for side in [TailSide::Upper, TailSide::Lower] {
            let t = chernoff_tails(10.0, 1e-9, side).unwrap();
            assert!(
                (t.tight - 1.0).abs() < 1e-6 && (t.relaxed - 1.0).abs() < 1e-6,
                "δ→0 bounds must approach 1: {t:?}"
            );
        }
        for &lambda in &[1.0, 10.0, 100.0] {
            for i in 1..=30 {
                let delta = 0.1 * i as f64;
                let t = chernoff_tails(lambda, delta, TailSide::Upper).unwrap();
                assert!(
                    t.tight <= t.relaxed * (1.0 + 1e-12),
                    "upper tight {} > relaxed {} at λ={lambda}, δ={delta}",
                    t.tight,
                    t.relaxed
                );
                if delta < 1.0 {
                    let t = chernoff_tails(lambda, delta, TailSide::Lower).unwrap();
                    assert!(
                        t.tight <= t.relaxed * (1.0 + 1e-12),
                        "lower tight {} > relaxed {} at λ={lambda}, δ={delta}",
                        t.tight,
                        t.relaxed
                    );
                }
            }
        }
        assert!(chernoff_tails(10.0, 0.0, TailSide::Upper).is_err());
        assert!(chernoff_tails(10.0, 1.0, TailSide::Lower).is_err());
        assert!(chernoff_tails(0.0, 0.5, TailSide::Upper).is_err());
    }

    #[test]
    fn ball_volumes_and_packing_ratios() {
        let b = hamming_ball_volume(5, 1).unwrap();
        assert_eq!(b.count, BigUint::from(6u32), "1 + 5 points within radius 1");

        let b = hamming_ball_volume(40, 8).unwrap();
        assert_eq!(b.count, BigUint::from(100_146_724u64));
        assert!(
            (b.ratio - 9.108_291_487_791_575e-5).abs() < 1e-16,
            "volume ratio drifted: {}",
            b.ratio
        );
        assert!(b.ratio <= (-5.0f64).exp(), "ratio must beat exp(−d/8)");

        // The packing estimate behind the d/8 Fano denominator, exactly.
        for d in (5..=100).step_by(5) {
            let b = hamming_ball_volume(d, d / 5).unwrap();
            assert!(
                b.ratio <= (-(d as f64) / 8.0).exp(),
                "ball(d/5) fraction {} exceeds exp(−d/8) at d={d}",
                b.ratio
            );
        }

        let full = hamming_ball_volume(10, 10).unwrap();
        assert!((full.ratio - 1.0).abs() < 1e-12, "radius-d ball is the cube");
        assert!(hamming_ball_volume(10, 11).is_err());
    }

    #[test]
    fn sparse_family_counts_match_enumeration() {
        let c = sparse_family_counts(4, 1, 2).unwrap();
        assert_eq!(c.family_size, BigUint::from(8u32), "2¹·C(4,1) signed supports");
        assert_eq!(c.within_radius, BigUint::from(5u32));

        let c = sparse_family_counts(4, 2, 1).unwrap();
        assert_eq!(c.family_size, BigUint::from(24u32), "2²·C(4,2)");
        assert_eq!(
            c.within_radius,
            BigUint::from(7u32),
            "1 + C(2,1) sign flips + C(2,1)·C(2,1) support moves"
        );

        // Brute-force the family size over {0,±1}^4.
        let mut count = 0u32;
        for code in 0..3u32.pow(4) {
            let mut c = code;
            let mut nonzero = 0;
            for _ in 0..4 {
                if c % 3 != 0 {
                    nonzero += 1;
                }
                c /= 3;
            }
            if nonzero == 2 {
                count += 1;
            }
        }
        assert_eq!(count, 24, "ternary enumeration agrees with 2^s·C(d,s)");

        // Calibration instance: the packing exponent covers s·ln(d/s).
        let c = sparse_family_counts(100, 10, 2).unwrap();
        assert_eq!(c.within_radius, BigUint::from(189_281u64));
        assert!(
            (c.log_packing_ratio - 25.262_807_205_501_485).abs() < 1e-9,
            "ln(|𝒰|/N) drifted: {}",
            c.log_packing_ratio
        );
        assert!(
            c.log_packing_ratio >= 10.0 * 10f64.ln(),
            "packing exponent must cover s·ln(d/s) on this instance"
        );

        assert!(sparse_family_counts(10, 6, 1).is_err(), "s > d/2 rejected");
        assert!(sparse_family_counts(10, 0, 1).is_err());
    }
}
