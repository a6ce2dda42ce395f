//! Observation models for the distributed estimation experiments.
//!
//! Four product-style families share one interface:
//!
//! * `GaussianLocation` — `N(theta, sigma^2 I_d)`, score `s(x) = (x - theta0)/sigma^2`,
//!   per-coordinate information `1/sigma^2`.
//! * `ProductBernoulli` — independent coordinates `x_i ~ Bern(theta_i)` reported as
//!   0/1 bits. In the +/-1 coding `xt = 2b - 1` the score at reference `p` is
//!   `s_i = (xt_i + (1 - 2 p_i)) / (2 p_i (1 - p_i))` with information `1/(p_i(1-p_i))`.
//! * `Multinomial` — one draw from `d+1` outcomes with free parameters
//!   `theta_1..theta_d` and remainder mass `theta_{d+1} = 1 - sum theta_i`; the score is
//!   `s_i(x) = 1{x=i}/theta_i - 1{x=d+1}/theta_{d+1}` and the information matrix is
//!   `diag(1/theta_i) + (1/theta_{d+1}) 11^T`.
//! * `SparseGaussian` — the Gaussian family restricted to `s`-sparse means.
//!
//! Hypothesis cubes `theta0 + delta * u` over sign vectors `u` (dense `{+-1}^d`, or the
//! sparse family of `s`-sparse sign patterns) drive the information-bound
//! oracles; members are enumerable and admissibility is checked on
//! construction.

use crate::error::{Error, Result};
use crate::rng;
use crate::util;
use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

/// Model family tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GaussianLocation,
    ProductBernoulli,
    Multinomial,
    SparseGaussian,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::GaussianLocation => "gaussian_location",
            Family::ProductBernoulli => "product_bernoulli",
            Family::Multinomial => "multinomial",
            Family::SparseGaussian => "sparse_gaussian",
        }
    }
}

/// One observation from a model.
///
/// * Gaussian families observe real vectors of length `d`.
/// * Bernoulli families observe `d` bits (stored as 0/1 bytes).
/// * Multinomial families observe a single outcome index in `1..=d+1`
///   (outcome `d+1` is the remainder category).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    Vector(Vec<f64>),
    Bits(Vec<u8>),
    Outcome(usize),
}

/// Cap on the parameter dimension for operations that enumerate a finite
/// sample space or a hypothesis cube (`2^d` states).
pub const ENUMERATION_DIM_CAP: usize = 20;

/// A fully specified model: family, dimension, reference parameter, and the
/// family-specific extras (noise scale, sparsity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub d: usize,
    /// Reference (centering) parameter theta0, length `d`.
    pub theta0: Vec<f64>,
    /// Noise standard deviation for the Gaussian families.
    pub sigma: f64,
    /// Sparsity level `s` for `SparseGaussian`.
    pub sparsity: Option<usize>,
}

/// Fisher information at the reference parameter.
#[derive(Clone, Debug, Serialize)]
pub struct FisherInfo {
    /// Dense `d x d` information matrix.
    pub matrix: Vec<Vec<f64>>,
    /// Per-coordinate scalar information for product families with a
    /// homogeneous reference parameter; `None` when coordinates differ or
    /// the matrix is not diagonal.
    pub scalar: Option<f64>,
}

impl FisherInfo {
    /// Largest eigenvalue; equals `scalar` for homogeneous product families
    /// and is the safe substitute wherever a single number is needed for a
    /// correlated-score family (multinomial).
    pub fn max_eigenvalue(&self) -> f64 {
        if let Some(s) = self.scalar {
            return s;
        }
        util::symmetric_max_eigenvalue(&self.matrix)
    }
}

impl ModelSpec {
    /// Gaussian location family centered at zero.
    pub fn gaussian(d: usize, sigma: f64) -> Result<Self> {
        Self::gaussian_at(vec![0.0; d], sigma)
    }

    /// Gaussian location family with an explicit reference point.
    pub fn gaussian_at(theta0: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::SingularInformation(format!(
                "gaussian sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(ModelSpec {
            family: Family::GaussianLocation,
            d: theta0.len(),
            theta0,
            sigma,
            sparsity: None,
        })
    }

    /// Product Bernoulli family with homogeneous reference probability `p`.
    pub fn bernoulli(d: usize, p: f64) -> Result<Self> {
        Self::bernoulli_at(vec![p; d])
    }

    /// Product Bernoulli family with per-coordinate reference probabilities.
    /// The reference must be interior so scores and information exist.
    pub fn bernoulli_at(theta0: Vec<f64>) -> Result<Self> {
        for (i, &p) in theta0.iter().enumerate() {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::SingularInformation(format!(
                    "bernoulli reference probability must be interior, coordinate {i} is {p}"
                )));
            }
        }
        Ok(ModelSpec {
            family: Family::ProductBernoulli,
            d: theta0.len(),
            theta0,
            sigma: 1.0,
            sparsity: None,
        })
    }

    /// Multinomial family over `d+1` outcomes; `theta0` holds the `d` free
    /// masses and must be interior (all positive, summing below one).
    pub fn multinomial(theta0: Vec<f64>) -> Result<Self> {
        for (i, &t) in theta0.iter().enumerate() {
            if !(t > 0.0) {
                return Err(Error::SingularInformation(format!(
                    "multinomial reference mass must be positive, coordinate {i} is {t}"
                )));
            }
        }
        let sum: f64 = theta0.iter().sum();
        if !(sum < 1.0) {
            return Err(Error::SingularInformation(format!(
                "multinomial reference masses must sum below 1, got {sum}"
            )));
        }
        Ok(ModelSpec {
            family: Family::Multinomial,
            d: theta0.len(),
            theta0,
            sigma: 1.0,
            sparsity: None,
        })
    }

    /// Multinomial family with all `d+1` outcomes equally likely.
    pub fn multinomial_uniform(d: usize) -> Result<Self> {
        Self::multinomial(vec![1.0 / (d as f64 + 1.0); d])
    }

    /// Gaussian family restricted to `s`-sparse means, centered at zero.
    pub fn sparse_gaussian(d: usize, s: usize, sigma: f64) -> Result<Self> {
        if s == 0 || s > d {
            return Err(Error::ParameterOutOfDomain {
                family: "sparse_gaussian",
                coordinate: 0,
                detail: format!("sparsity must satisfy 1 <= s <= d, got s={s}, d={d}"),
            });
        }
        let mut m = Self::gaussian(d, sigma)?;
        m.family = Family::SparseGaussian;
        m.sparsity = Some(s);
        Ok(m)
    }

    /// Remainder mass `theta_{d+1}` of a multinomial parameter.
    fn remainder_mass(theta: &[f64]) -> f64 {
        1.0 - theta.iter().sum::<f64>()
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.d {
            return Err(Error::ShapeMismatch(format!(
                "parameter has length {}, model dimension is {}",
                theta.len(),
                self.d
            )));
        }
        Ok(())
    }

    /// Checks that `theta` lies in the family's (closed) parameter set.
    pub fn check_admissible(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        match self.family {
            Family::GaussianLocation => Ok(()),
            Family::SparseGaussian => {
                let s = self.sparsity.expect("sparse model has sparsity");
                let nnz = theta.iter().filter(|t| **t != 0.0).count();
                if nnz > s {
                    return Err(Error::ParameterOutOfDomain {
                        family: "sparse_gaussian",
                        coordinate: 0,
                        detail: format!("parameter has {nnz} nonzeros, sparsity level is {s}"),
                    });
                }
                Ok(())
            }
            Family::ProductBernoulli => {
                for (i, &p) in theta.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::ParameterOutOfDomain {
                            family: "product_bernoulli",
                            coordinate: i,
                            detail: format!("probability {p} outside [0, 1]"),
                        });
                    }
                }
                Ok(())
            }
            Family::Multinomial => {
                for (i, &t) in theta.iter().enumerate() {
                    if !(0.0..=1.0).contains(&t) {
                        return Err(Error::ParameterOutOfDomain {
                            family: "multinomial",
                            coordinate: i,
                            detail: format!("mass {t} outside [0, 1]"),
                        });
                    }
                }
                let rem = Self::remainder_mass(theta);
                if rem < -1e-12 {
                    return Err(Error::ParameterOutOfDomain {
                        family: "multinomial",
                        coordinate: self.d,
                        detail: format!("masses sum to {}, above 1", 1.0 - rem),
                    });
                }
                Ok(())
            }
        }
    }

    /// Draws `n` independent observations at parameter `theta`.
    ///
    /// Draw `i` comes from the stream keyed `(seed, i)`, so individual draws
    /// can be regenerated independently and the output never depends on
    /// evaluation order.
    pub fn sample(&self, theta: &[f64], n: usize, seed: u64) -> Result<Vec<Observation>> {
        self.check_admissible(theta)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = rng::stream(seed, &[i as u64]);
            out.push(self.sample_one(theta, &mut rng));
        }
        Ok(out)
    }

    /// Draws a single observation from an already-positioned stream.
    pub fn sample_one(&self, theta: &[f64], rng: &mut rand_chacha::ChaCha8Rng) -> Observation {
        match self.family {
            Family::GaussianLocation | Family::SparseGaussian => {
                let x = theta
                    .iter()
                    .map(|&t| t + self.sigma * util::std_normal_quantile(rng::open_unit(rng)))
                    .collect();
                Observation::Vector(x)
            }
            Family::ProductBernoulli => {
                let bits = theta
                    .iter()
                    .map(|&p| u8::from(rng::open_unit(rng) < p))
                    .collect();
                Observation::Bits(bits)
            }
            Family::Multinomial => {
                let u = rng::open_unit(rng);
                let mut acc = 0.0;
                for (i, &t) in theta.iter().enumerate() {
                    acc += t;
                    if u < acc {
                        return Observation::Outcome(i + 1);
                    }
                }
                Observation::Outcome(self.d + 1)
            }
        }
    }

    /// Score function at the reference parameter.
    pub fn score(&self, x: &Observation) -> Result<Vec<f64>> {
        match (self.family, x) {
            (Family::GaussianLocation | Family::SparseGaussian, Observation::Vector(v)) => {
                if v.len() != self.d {
                    return Err(Error::ShapeMismatch(format!(
                        "observation has length {}, model dimension is {}",
                        v.len(),
                        self.d
                    )));
                }
                let s2 = self.sigma * self.sigma;
                Ok(v.iter()
                    .zip(&self.theta0)
                    .map(|(x, t)| (x - t) / s2)
                    .collect())
            }
            (Family::ProductBernoulli, Observation::Bits(bits)) => {
                if bits.len() != self.d {
                    return Err(Error::ShapeMismatch(format!(
                        "observation has {} bits, model dimension is {}",
                        bits.len(),
                        self.d
                    )));
                }
                Ok(bits
                    .iter()
                    .zip(&self.theta0)
                    .map(|(&b, &p)| {
                        let xt = 2.0 * f64::from(b) - 1.0;
                        (xt + (1.0 - 2.0 * p)) / (2.0 * p * (1.0 - p))
                    })
                    .collect())
            }
            (Family::Multinomial, Observation::Outcome(o)) => {
                let o = *o;
                if o == 0 || o > self.d + 1 {
                    return Err(Error::ShapeMismatch(format!(
                        "outcome {o} outside 1..={}",
                        self.d + 1
                    )));
                }
                let rem = Self::remainder_mass(&self.theta0);
                let mut s = vec![0.0; self.d];
                if o <= self.d {
                    s[o - 1] = 1.0 / self.theta0[o - 1];
                } else {
                    for (si, _) in s.iter_mut().zip(&self.theta0) {
                        *si = -1.0 / rem;
                    }
                }
                Ok(s)
            }
            _ => Err(Error::ShapeMismatch(format!(
                "observation kind does not match family {}",
                self.family.name()
            ))),
        }
    }

    /// Fisher information at the reference parameter.
    pub fn fisher_info(&self) -> Result<FisherInfo> {
        match self.family {
            Family::GaussianLocation | Family::SparseGaussian => {
                let i0 = 1.0 / (self.sigma * self.sigma);
                Ok(FisherInfo {
                    matrix: diag(self.d, |_| i0),
                    scalar: Some(i0),
                })
            }
            Family::ProductBernoulli => {
                let infos: Vec<f64> = self
                    .theta0
                    .iter()
                    .map(|&p| 1.0 / (p * (1.0 - p)))
                    .collect();
                let homogeneous = infos.windows(2).all(|w| w[0] == w[1]);
                Ok(FisherInfo {
                    scalar: if homogeneous { infos.first().copied() } else { None },
                    matrix: diag(self.d, |i| infos[i]),
                })
            }
            Family::Multinomial => {
                let rem = Self::remainder_mass(&self.theta0);
                if !(rem > 0.0) {
                    return Err(Error::SingularInformation(
                        "multinomial remainder mass vanishes at the reference".into(),
                    ));
                }
                let mut m = vec![vec![1.0 / rem; self.d]; self.d];
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] += 1.0 / self.theta0[i];
                }
                Ok(FisherInfo {
                    matrix: m,
                    scalar: None,
                })
            }
        }
    }

    /// Likelihood ratio `dP_theta / dP_theta0` at observation `x`.
    /// Returns an explicit 0 at zero-density points of `P_theta`.
    pub fn likelihood_ratio(&self, theta: &[f64], x: &Observation) -> Result<f64> {
        self.check_len(theta)?;
        match (self.family, x) {
            (Family::GaussianLocation | Family::SparseGaussian, Observation::Vector(v)) => {
                if v.len() != self.d {
                    return Err(Error::ShapeMismatch("observation length".into()));
                }
                let s2 = self.sigma * self.sigma;
                let mut log = 0.0;
                for ((x, t0), t) in v.iter().zip(&self.theta0).zip(theta) {
                    log += ((x - t0).powi(2) - (x - t).powi(2)) / (2.0 * s2);
                }
                Ok(log.exp())
            }
            (Family::ProductBernoulli, Observation::Bits(bits)) => {
                if bits.len() != self.d {
                    return Err(Error::ShapeMismatch("observation length".into()));
                }
                let mut ratio = 1.0;
                for ((&b, &p0), &p) in bits.iter().zip(&self.theta0).zip(theta) {
                    ratio *= if b == 1 { p / p0 } else { (1.0 - p) / (1.0 - p0) };
                }
                Ok(ratio)
            }
            (Family::Multinomial, Observation::Outcome(o)) => {
                let o = *o;
                if o == 0 || o > self.d + 1 {
                    return Err(Error::ShapeMismatch(format!(
                        "outcome {o} outside 1..={}",
                        self.d + 1
                    )));
                }
                if o <= self.d {
                    Ok(theta[o - 1] / self.theta0[o - 1])
                } else {
                    Ok(Self::remainder_mass(theta) / Self::remainder_mass(&self.theta0))
                }
            }
            _ => Err(Error::ShapeMismatch(format!(
                "observation kind does not match family {}",
                self.family.name()
            ))),
        }
    }

    /// Probability mass of `x` under `theta` (finite sample spaces only).
    pub fn pmf(&self, theta: &[f64], x: &Observation) -> Result<f64> {
        match (self.family, x) {
            (Family::ProductBernoulli, Observation::Bits(bits)) => {
                if bits.len() != self.d {
                    return Err(Error::ShapeMismatch("observation length".into()));
                }
                let mut p = 1.0;
                for (&b, &t) in bits.iter().zip(theta) {
                    p *= if b == 1 { t } else { 1.0 - t };
                }
                Ok(p)
            }
            (Family::Multinomial, Observation::Outcome(o)) => {
                let o = *o;
                if o == 0 || o > self.d + 1 {
                    return Err(Error::ShapeMismatch(format!(
                        "outcome {o} outside 1..={}",
                        self.d + 1
                    )));
                }
                if o <= self.d {
                    Ok(theta[o - 1])
                } else {
                    Ok(Self::remainder_mass(theta).max(0.0))
                }
            }
            _ => Err(Error::UnsupportedEnumeration(format!(
                "no probability mass function for family {}",
                self.family.name()
            ))),
        }
    }

    /// The full finite sample space, in the canonical encoding order used by
    /// truth-table predicates (bit vectors ordered by their little-endian
    /// integer value; outcomes ordered `1..=d+1`). Errors for continuous
    /// families and for bit spaces beyond the enumeration cap.
    pub fn sample_space(&self) -> Result<Vec<Observation>> {
        match self.family {
            Family::ProductBernoulli => {
                if self.d > ENUMERATION_DIM_CAP {
                    return Err(Error::CapacityExceeded {
                        what: "bit sample space dimension",
                        limit: ENUMERATION_DIM_CAP,
                        requested: self.d,
                    });
                }
                Ok((0..1usize << self.d)
                    .map(|m| {
                        Observation::Bits((0..self.d).map(|j| ((m >> j) & 1) as u8).collect())
                    })
                    .collect())
            }
            Family::Multinomial => Ok((1..=self.d + 1).map(Observation::Outcome).collect()),
            Family::GaussianLocation | Family::SparseGaussian => Err(
                Error::UnsupportedEnumeration("gaussian sample space is continuous".into()),
            ),
        }
    }

    /// Canonical truth-table index of a finite-space observation.
    pub fn space_index(&self, x: &Observation) -> Result<usize> {
        match (self.family, x) {
            (Family::ProductBernoulli, Observation::Bits(bits)) => {
                Ok(bits.iter().enumerate().map(|(j, &b)| (b as usize) << j).sum())
            }
            (Family::Multinomial, Observation::Outcome(o)) => Ok(o - 1),
            _ => Err(Error::UnsupportedEnumeration(format!(
                "no finite-space index for family {}",
                self.family.name()
            ))),
        }
    }

    /// Size of the finite sample space, if there is one.
    pub fn space_size(&self) -> Option<usize> {
        match self.family {
            Family::ProductBernoulli if self.d <= ENUMERATION_DIM_CAP => Some(1usize << self.d),
            Family::ProductBernoulli => None,
            Family::Multinomial => Some(self.d + 1),
            _ => None,
        }
    }

    /// Builds the hypothesis cube `theta0 + delta * u`. With `sparse =
    /// Some((s, seed))` the sign vectors range over the family of exactly
    /// `s`-sparse patterns in `{0, +-1}^d` (and a support sampled with `seed`
    /// is recorded for conditioned sub-experiments); otherwise over the full
    /// cube `{+-1}^d`.
    pub fn hypothesis_cube(
        &self,
        delta: f64,
        sparse: Option<(usize, u64)>,
    ) -> Result<HypothesisCube> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!(
                "cube scale delta must be positive, got {delta}"
            )));
        }
        if self.d > ENUMERATION_DIM_CAP {
            return Err(Error::CapacityExceeded {
                what: "hypothesis cube dimension",
                limit: ENUMERATION_DIM_CAP,
                requested: self.d,
            });
        }
        let kind = match sparse {
            None => CubeKind::Dense,
            Some((s, _)) => {
                if s == 0 || s > self.d {
                    return Err(Error::ParameterOutOfDomain {
                        family: "hypothesis cube",
                        coordinate: 0,
                        detail: format!("sparsity must satisfy 1 <= s <= d, got s={s}"),
                    });
                }
                CubeKind::Sparse { s }
            }
        };
        let support = sparse.map(|(s, seed)| {
            // Sample a uniformly random size-s support, recorded for
            // conditioned experiments (the cube itself enumerates all
            // supports).
            let mut r = rng::stream(seed, &[0x7375_7070]); // "supp"
            let mut idx: Vec<usize> = (0..self.d).collect();
            // Partial Fisher-Yates: the first s entries become the support.
            for i in 0..s {
                let j = i + (rng::open_unit(&mut r) * (self.d - i) as f64) as usize;
                let j = j.min(self.d - 1);
                idx.swap(i, j);
            }
            let mut t = idx[..s].to_vec();
            t.sort_unstable();
            t
        });
        let cube = HypothesisCube {
            base: self.clone(),
            delta,
            kind,
            support,
        };
        // Admissibility: every member must stay inside the parameter set.
        for member in cube.members() {
            self.check_admissible(&member.theta).map_err(|e| match e {
                Error::ParameterOutOfDomain {
                    family,
                    coordinate,
                    detail,
                } => Error::ParameterOutOfDomain {
                    family,
                    coordinate,
                    detail: format!("cube member {} inadmissible: {detail}", member.index),
                },
                other => other,
            })?;
        }
        Ok(cube)
    }
}

fn diag(d: usize, f: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { f(i) } else { 0.0 }).collect())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CubeKind {
    Dense,
    Sparse { s: usize },
}

/// An enumerable family of perturbed parameters `theta0 + delta * u`.
#[derive(Clone, Debug)]
pub struct HypothesisCube {
    base: ModelSpec,
    pub delta: f64,
    kind: CubeKind,
    /// For sparse cubes: a sampled support, available to conditioned
    /// sub-experiments. The enumeration always covers every support.
    pub support: Option<Vec<usize>>,
}

/// One member of a hypothesis cube.
#[derive(Clone, Debug)]
pub struct CubeMember {
    /// Position in enumeration order.
    pub index: usize,
    /// Sign pattern in `{-1, 0, +1}^d`.
    pub u: Vec<i8>,
    /// The perturbed parameter `theta0 + delta * u`.
    pub theta: Vec<f64>,
}

impl HypothesisCube {
    pub fn base(&self) -> &ModelSpec {
        &self.base
    }

    /// Number of members: `2^d` dense, `2^s * C(d, s)` sparse.
    pub fn member_count(&self) -> BigUint {
        match self.kind {
            CubeKind::Dense => BigUint::one() << self.base.d,
            CubeKind::Sparse { s } => {
                (BigUint::one() << s) * util::binomial(self.base.d as u64, s as u64)
            }
        }
    }

    /// Hamming distance between two members' sign patterns (number of
    /// coordinates where they differ).
    pub fn hamming(a: &CubeMember, b: &CubeMember) -> usize {
        a.u.iter().zip(&b.u).filter(|(x, y)| x != y).count()
    }

    /// Enumerates all members in a fixed deterministic order.
    pub fn members(&self) -> Vec<CubeMember> {
        let d = self.base.d;
        let make = |index: usize, u: Vec<i8>| {
            let theta = self
                .base
                .theta0
                .iter()
                .zip(&u)
                .map(|(&t, &s)| t + self.delta * f64::from(s))
                .collect();
            CubeMember { index, u, theta }
        };
        match self.kind {
            CubeKind::Dense => (0..1usize << d)
                .map(|m| {
                    let u = (0..d)
                        .map(|j| if (m >> j) & 1 == 1 { 1i8 } else { -1i8 })
                        .collect();
                    make(m, u)
                })
                .collect(),
            CubeKind::Sparse { s } => {
                let mut out = Vec::new();
                let mut support: Vec<usize> = (0..s).collect();
                loop {
                    for signs in 0..1usize << s {
                        let mut u = vec![0i8; d];
                        for (pos, &coord) in support.iter().enumerate() {
                            u[coord] = if (signs >> pos) & 1 == 1 { 1 } else { -1 };
                        }
                        let index = out.len();
                        out.push(make(index, u));
                    }
                    // Next size-s subset of {0..d} in lexicographic order.
                    let mut i = s;
                    loop {
                        if i == 0 {
                            return out;
                        }
                        i -= 1;
                        if support[i] != i + d - s {
                            break;
                        }
                    }
                    support[i] += 1;
                    for j in i + 1..s {
                        support[j] = support[j - 1] + 1;
                    }
                }
            }
        }
    }

    /// Members whose support is exactly the recorded sampled support
    /// (sparse cubes only): the `2^s` sign patterns on that support.
    pub fn members_on_sampled_support(&self) -> Result<Vec<CubeMember>> {
        let support = self.support.as_ref().ok_or_else(|| {
            Error::Domain("no sampled support recorded; cube is dense".into())
        })?;
        Ok(self
            .members()
            .into_iter()
            .filter(|m| {
                support.iter().all(|&c| m.u[c] != 0)
                    && m.u.iter().enumerate().all(|(c, &v)| v == 0 || support.contains(&c))
            })
            .collect())
    }
}
