//! Monte Carlo measurement of worst-case squared-ℓ₂ risk over parameter
//! grids, axis sweeps over `(n, d, k)`, and a log-log regression that
//! recovers scaling exponents from the measured risks.
//!
//! A run draws `R` independent protocol rounds per grid point, each on its
//! own derived random stream `(seed, [theta_index, replication])`, so the
//! report is bitwise reproducible for a given `(config, seed)` regardless
//! of how the replications are scheduled across threads. The sup over the
//! grid is a finite-grid stand-in (hence a lower bound) for the true
//! worst-case risk; the normalized columns `n·risk/d²`, `n·2^k·risk/d`,
//! and `n·k·risk/d²` are the combinations the rate theory predicts to be
//! order one in the Gaussian-location, simplex, and cube regimes
//! respectively.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec};
use crate::protocols::{self, ProtocolName};
use crate::{rng, util};

/// How to turn a model into a finite grid of parameter vectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// Explicit parameter vectors, used as given.
    Explicit(Vec<Vec<f64>>),
    /// The model's reference parameter alone.
    Center,
    /// The reference parameter plus `corners` cube perturbations
    /// `θ₀ + δ·u`, where coordinate `j` of `u` is `−1` when bit `j mod 60`
    /// of the corner index is set and `+1` otherwise (so index 0 is the
    /// all-plus corner).
    CenterAndCorners { delta: f64, corners: usize },
    /// The uniform simplex point `(1/d, …, 1/d)`.
    UniformSimplex,
}

impl GridSpec {
    /// Expands the grid at a concrete model, checking every produced point
    /// for admissibility.
    pub fn materialize(&self, model: &ModelSpec) -> Result<Vec<Vec<f64>>> {
        let d = model.d;
        let grid = match self {
            GridSpec::Explicit(points) => {
                if points.is_empty() {
                    return Err(Error::Domain("explicit grid has no points".into()));
                }
                points.clone()
            }
            GridSpec::Center => vec![model.theta0.clone()],
            GridSpec::CenterAndCorners { delta, corners } => {
                if !(delta.is_finite() && *delta >= 0.0) {
                    return Err(Error::Domain(format!(
                        "corner radius must be finite and ≥ 0, got {delta}"
                    )));
                }
                let distinct = 1usize << d.min(20);
                if *corners > distinct {
                    return Err(Error::Domain(format!(
                        "{corners} corners requested but only {distinct} distinct sign \
                         patterns exist at d = {d}"
                    )));
                }
                let mut grid = vec![model.theta0.clone()];
                for c in 0..*corners {
                    grid.push(
                        model
                            .theta0
                            .iter()
                            .enumerate()
                            .map(|(j, &t)| {
                                let sign = if (c >> (j % 60)) & 1 == 1 { -1.0 } else { 1.0 };
                                t + sign * delta
                            })
                            .collect(),
                    );
                }
                grid
            }
            GridSpec::UniformSimplex => vec![vec![1.0 / d as f64; d]],
        };
        for theta in &grid {
            if theta.len() != d {
                return Err(Error::ShapeMismatch(format!(
                    "grid point of length {} for a {d}-dimensional model",
                    theta.len()
                )));
            }
            model.check_admissible(theta)?;
        }
        Ok(grid)
    }
}

/// A full experiment: model, protocol, board shape, grid, and Monte Carlo
/// budget.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub protocol: ProtocolName,
    pub n: usize,
    pub k: usize,
    pub grid: GridSpec,
    pub replications: usize,
    pub seed: u64,
    /// Probit clamp radius; `None` means the default 1.0.
    #[serde(default)]
    pub clamp: Option<f64>,
    /// Leave degenerate decodes out of the risk average (they are always
    /// tallied separately). Default keeps them in: the minimax risk does
    /// not get to discard bad outcomes.
    #[serde(default)]
    pub exclude_degenerate: bool,
}

impl ExperimentConfig {
    /// Checks everything short of running: protocol preconditions, grid
    /// admissibility, and a Monte Carlo budget that supports a standard
    /// error.
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::Domain(format!(
                "replications must be ≥ 2 to form a standard error, got {}",
                self.replications
            )));
        }
        protocols::build_named(self.protocol, self.n, self.k, &self.model, self.clamp)?;
        self.grid.materialize(&self.model)?;
        Ok(())
    }
}

/// Risk at one grid point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaRisk {
    pub theta_id: usize,
    pub theta: Vec<f64>,
    /// Mean squared-ℓ₂ error over the replications kept.
    pub risk: f64,
    /// Sample standard deviation of the kept replications over `√R`.
    pub se: f64,
    /// Replications whose decoder fell back to an uninformed output.
    pub degenerate: u64,
}

/// The outcome of one experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiskReport {
    pub protocol: ProtocolName,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub replications: usize,
    pub seed: u64,
    pub per_theta: Vec<ThetaRisk>,
    /// Largest per-θ risk; a finite-grid lower bound on the worst case.
    pub sup_risk: f64,
    pub sup_theta_id: usize,
    pub norm_n_d2: f64,
    pub norm_n2k_d: f64,
    pub norm_nk_d2: f64,
    /// Wall-clock time; the one field that is not reproducible.
    pub seconds: f64,
}

struct RepOutcome {
    sq_err: f64,
    degenerate: bool,
}

fn run_grid(
    bundle: &protocols::ProtocolBundle,
    grid: &[Vec<f64>],
    reps: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<RepOutcome>> {
    let total = grid.len() * reps;
    let run_range = |lo: usize, hi: usize| -> Result<Vec<RepOutcome>> {
        (lo..hi)
            .map(|slot| {
                let (ti, r) = (slot / reps, slot % reps);
                let theta = &grid[ti];
                let mut stream = rng::stream(seed, &[ti as u64, r as u64]);
                let out = bundle.run_once(theta, &mut stream)?;
                let sq_err = out
                    .theta_hat
                    .iter()
                    .zip(theta)
                    .map(|(h, t)| (h - t) * (h - t))
                    .sum();
                Ok(RepOutcome {
                    sq_err,
                    degenerate: out.degenerate,
                })
            })
            .collect()
    };
    let threads = threads.clamp(1, total.max(1));
    if threads == 1 {
        return run_range(0, total);
    }
    // Contiguous slot ranges per worker; each slot's outcome depends only on
    // its own derived stream, so the concatenation is schedule-independent.
    let chunk = total.div_ceil(threads);
    std::thread::scope(|scope| {
        let run_range = &run_range;
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (lo, hi) = (t * chunk, ((t + 1) * chunk).min(total));
                scope.spawn(move || run_range(lo, hi))
            })
            .collect();
        let mut all = Vec::with_capacity(total);
        for handle in handles {
            all.extend(handle.join().expect("risk worker panicked")?);
        }
        Ok(all)
    })
}

/// Runs the experiment: `R` decodes per grid point, risks aggregated by
/// pairwise summation. `threads ≥ 2` splits the replications across that
/// many OS threads without changing any reported number.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<RiskReport> {
    let started = Instant::now();
    cfg.validate()?;
    let bundle = protocols::build_named(cfg.protocol, cfg.n, cfg.k, &cfg.model, cfg.clamp)?;
    let grid = cfg.grid.materialize(&cfg.model)?;
    let reps = cfg.replications;
    let outcomes = run_grid(&bundle, &grid, reps, cfg.seed, threads)?;

    let mut per_theta = Vec::with_capacity(grid.len());
    for (ti, theta) in grid.iter().enumerate() {
        let slice = &outcomes[ti * reps..(ti + 1) * reps];
        let degenerate = slice.iter().filter(|o| o.degenerate).count() as u64;
        let kept: Vec<f64> = slice
            .iter()
            .filter(|o| !(cfg.exclude_degenerate && o.degenerate))
            .map(|o| o.sq_err)
            .collect();
        if kept.len() < 2 {
            return Err(Error::Domain(format!(
                "grid point {ti}: only {} of {reps} replications survive the degenerate \
                 filter; no standard error",
                kept.len()
            )));
        }
        let mean = util::pairwise_sum(&kept) / kept.len() as f64;
        let ss: f64 = kept.iter().map(|r| (r - mean) * (r - mean)).sum();
        let se = (ss / (kept.len() - 1) as f64 / kept.len() as f64).sqrt();
        per_theta.push(ThetaRisk {
            theta_id: ti,
            theta: theta.clone(),
            risk: mean,
            se,
            degenerate,
        });
    }
    let sup = per_theta
        .iter()
        .max_by(|a, b| a.risk.total_cmp(&b.risk))
        .expect("nonempty grid");
    let (sup_risk, sup_theta_id) = (sup.risk, sup.theta_id);
    let (nf, df, kf) = (cfg.n as f64, cfg.model.d as f64, cfg.k as f64);
    Ok(RiskReport {
        protocol: cfg.protocol,
        n: cfg.n,
        d: cfg.model.d,
        k: cfg.k,
        replications: reps,
        seed: cfg.seed,
        per_theta,
        sup_risk,
        sup_theta_id,
        norm_n_d2: nf * sup_risk / (df * df),
        norm_n2k_d: nf * kf.exp2() * sup_risk / df,
        norm_nk_d2: nf * kf * sup_risk / (df * df),
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// The axis a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    D,
    K,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::D => "d",
            SweepAxis::K => "k",
        }
    }
}

/// Rebuilds a model at a new dimension, which requires a homogeneous
/// reference parameter (constant coordinates) so the family "shape" is
/// preserved.
fn with_dimension(model: &ModelSpec, d: usize) -> Result<ModelSpec> {
    let h = model.theta0.first().copied().unwrap_or(0.0);
    if !model.theta0.iter().all(|&x| x == h) {
        return Err(Error::Domain(
            "dimension sweeps need a homogeneous reference parameter".into(),
        ));
    }
    match model.family {
        Family::ProductBernoulli => ModelSpec::bernoulli(d, h),
        Family::GaussianLocation => ModelSpec::gaussian_at(vec![h; d], model.sigma),
        Family::Multinomial => ModelSpec::multinomial(vec![h; d]),
        Family::SparseGaussian => Err(Error::Inapplicable(
            "no protocol here runs on the sparse family".into(),
        )),
    }
}

impl ExperimentConfig {
    /// The config at position `idx` of a sweep: axis value substituted,
    /// seed re-derived so points do not share streams.
    fn at_axis(&self, axis: SweepAxis, value: u64, idx: usize) -> Result<ExperimentConfig> {
        use rand::RngCore;
        let mut cfg = self.clone();
        cfg.seed = rng::stream(self.seed, &[0x5357_4545_50, idx as u64]).next_u64();
        match axis {
            SweepAxis::N => cfg.n = value as usize,
            SweepAxis::K => cfg.k = value as usize,
            SweepAxis::D => {
                if matches!(self.grid, GridSpec::Explicit(_)) {
                    return Err(Error::ShapeMismatch(
                        "an explicit grid cannot follow a dimension sweep; use a \
                         symbolic grid"
                            .into(),
                    ));
                }
                cfg.model = with_dimension(&self.model, value as usize)?;
            }
        }
        Ok(cfg)
    }
}

/// Runs the base experiment at each axis value, in order. Failures are
/// collected per point; the sweep keeps going.
pub fn sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[u64],
    threads: usize,
) -> Vec<(u64, Result<RiskReport>)> {
    values
        .iter()
        .enumerate()
        .map(|(idx, &value)| {
            let outcome = base
                .at_axis(axis, value, idx)
                .and_then(|cfg| run_experiment(&cfg, threads));
            (value, outcome)
        })
        .collect()
}

/// Regressors available for the scaling fit, all entering linearly in
/// `log risk`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    LogN,
    LogD,
    K,
    LogK,
}

impl Regressor {
    pub fn as_str(self) -> &'static str {
        match self {
            Regressor::LogN => "log_n",
            Regressor::LogD => "log_d",
            Regressor::K => "k",
            Regressor::LogK => "log_k",
        }
    }

    fn value(self, n: u64, d: u64, k: u64) -> f64 {
        match self {
            Regressor::LogN => (n as f64).ln(),
            Regressor::LogD => (d as f64).ln(),
            Regressor::K => k as f64,
            Regressor::LogK => (k as f64).ln(),
        }
    }
}

/// One observation for the scaling regression.
#[derive(Clone, Copy, Debug)]
pub struct ScalingPoint {
    pub n: u64,
    pub d: u64,
    pub k: u64,
    pub risk: f64,
}

impl RiskReport {
    pub fn scaling_point(&self) -> ScalingPoint {
        ScalingPoint {
            n: self.n as u64,
            d: self.d as u64,
            k: self.k as u64,
            risk: self.sup_risk,
        }
    }
}

/// Ordinary least squares of `log risk` on the chosen regressors plus an
/// intercept.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub regressors: Vec<Regressor>,
    /// One coefficient per regressor, same order.
    pub coefficients: Vec<f64>,
    /// Regression standard errors; zero when the fit interpolates (no
    /// residual degrees of freedom).
    pub standard_errors: Vec<f64>,
    pub intercept: f64,
    pub intercept_se: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Solves `a·x = rhs` for each right-hand side by Gaussian elimination
/// with partial pivoting; `a` is consumed. Errors on a numerically
/// singular pivot.
fn solve_columns(mut a: Vec<Vec<f64>>, mut rhs: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let p = a.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    for col in 0..p {
        let pivot_row = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty pivot range");
        if a[pivot_row][col].abs() <= 1e-12 * scale {
            return Err(Error::RankDeficient(format!(
                "normal equations are singular at column {col}; drop a redundant regressor"
            )));
        }
        a.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in 0..p {
            if row == col {
                continue;
            }
            let factor = a[row][col] / a[col][col];
            for j in col..p {
                a[row][j] -= factor * a[col][j];
            }
            for j in 0..rhs[0].len() {
                rhs[row][j] -= factor * rhs[col][j];
            }
        }
    }
    Ok((0..p)
        .map(|i| rhs[i].iter().map(|v| v / a[i][i]).collect())
        .collect())
}

/// Fits `log risk = intercept + Σ βᵣ·regressor` by least squares.
pub fn fit_scaling_points(points: &[ScalingPoint], regressors: &[Regressor]) -> Result<ScalingFit> {
    let m = points.len();
    let p = regressors.len() + 1;
    if m < 3 || m < p {
        return Err(Error::ShapeMismatch(format!(
            "{m} points cannot support a {p}-parameter fit (need ≥ 3 and ≥ parameters)"
        )));
    }
    if let Some(bad) = points.iter().find(|pt| !(pt.risk > 0.0)) {
        return Err(Error::Domain(format!(
            "log risk needs positive risks; got {} at (n, d, k) = ({}, {}, {})",
            bad.risk, bad.n, bad.d, bad.k
        )));
    }
    let design: Vec<Vec<f64>> = points
        .iter()
        .map(|pt| {
            let mut row = vec![1.0];
            row.extend(regressors.iter().map(|r| r.value(pt.n, pt.d, pt.k)));
            row
        })
        .collect();
    let y: Vec<f64> = points.iter().map(|pt| pt.risk.ln()).collect();

    // Normal equations XᵀX β = Xᵀy, inverted alongside for the covariance.
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in design.iter().zip(&y) {
        for i in 0..p {
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
            xty[i] += row[i] * yi;
        }
    }
    let mut rhs = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        rhs[i][0] = xty[i];
        rhs[i][1 + i] = 1.0;
    }
    let solved = solve_columns(xtx, rhs)?;
    let beta: Vec<f64> = solved.iter().map(|row| row[0]).collect();

    let residuals: Vec<f64> = design
        .iter()
        .zip(&y)
        .map(|(row, &yi)| yi - row.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>())
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let mean_y = util::pairwise_sum(&y) / m as f64;
    let tss: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let dof = m - p;
    let sigma2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let ses: Vec<f64> = (0..p)
        .map(|i| (sigma2 * solved[i][1 + i]).max(0.0).sqrt())
        .collect();

    Ok(ScalingFit {
        regressors: regressors.to_vec(),
        coefficients: beta[1..].to_vec(),
        standard_errors: ses[1..].to_vec(),
        intercept: beta[0],
        intercept_se: ses[0],
        r_squared,
        points: m,
    })
}

/// Convenience wrapper taking whole reports (uses each report's sup risk).
pub fn fit_scaling_exponents(reports: &[RiskReport], regressors: &[Regressor]) -> Result<ScalingFit> {
    let points: Vec<ScalingPoint> = reports.iter().map(RiskReport::scaling_point).collect();
    fit_scaling_points(&points, regressors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sharded_cfg() -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSpec::bernoulli(4, 0.5).unwrap(),
            protocol: ProtocolName::ShardedBits,
            n: 40,
            k: 1,
            grid: GridSpec::CenterAndCorners {
                delta: 0.2,
                corners: 2,
            },
            replications: 600,
            seed: 71,
            clamp: None,
            exclude_degenerate: false,
        }
    }

    #[test]
    fn sharded_risk_matches_closed_form_on_every_grid_point() {
        let cfg = sharded_cfg();
        let bundle =
            protocols::build_named(cfg.protocol, cfg.n, cfg.k, &cfg.model, None).unwrap();
        let report = run_experiment(&cfg, 1).unwrap();
        assert_eq!(report.per_theta.len(), 3, "center plus two corners");
        for tr in &report.per_theta {
            let exact = bundle.closed_form_risk(&tr.theta).unwrap();
            assert!(
                (tr.risk - exact).abs() <= 3.0 * tr.se,
                "grid point {}: Monte Carlo {} vs closed form {exact} (SE {})",
                tr.theta_id,
                tr.risk,
                tr.se
            );
            assert_eq!(tr.degenerate, 0);
        }
    }

    #[test]
    fn report_is_internally_consistent() {
        let report = run_experiment(&sharded_cfg(), 1).unwrap();
        for tr in &report.per_theta {
            assert!(report.sup_risk >= tr.risk, "sup must dominate every point");
            assert!(tr.se.is_finite() && tr.se > 0.0);
        }
        assert_eq!(
            report.per_theta[report.sup_theta_id].risk, report.sup_risk,
            "sup must be attained at the recorded grid member"
        );
        let (nf, df, kf) = (report.n as f64, report.d as f64, report.k as f64);
        assert!((report.norm_n_d2 - nf * report.sup_risk / (df * df)).abs() <= 1e-12);
        assert!(
            (report.norm_n2k_d - nf * kf.exp2() * report.sup_risk / df).abs() <= 1e-12,
            "normalized columns must recompute from the raw risk"
        );
        assert!((report.norm_nk_d2 - nf * kf * report.sup_risk / (df * df)).abs() <= 1e-12);
    }

    #[test]
    fn reports_are_bitwise_reproducible_across_thread_counts() {
        let cfg = sharded_cfg();
        let a = run_experiment(&cfg, 1).unwrap();
        let b = run_experiment(&cfg, 3).unwrap();
        let c = run_experiment(&cfg, 1).unwrap();
        for (x, y) in a.per_theta.iter().zip(&b.per_theta) {
            assert_eq!(x.risk.to_bits(), y.risk.to_bits(), "thread count changed a risk");
            assert_eq!(x.se.to_bits(), y.se.to_bits());
        }
        assert_eq!(a.sup_risk.to_bits(), c.sup_risk.to_bits(), "rerun drifted");
    }

    #[test]
    fn two_replications_give_a_finite_se() {
        let mut cfg = sharded_cfg();
        cfg.replications = 2;
        cfg.grid = GridSpec::Center;
        let report = run_experiment(&cfg, 1).unwrap();
        assert!(report.per_theta[0].se.is_finite());
        cfg.replications = 1;
        assert!(run_experiment(&cfg, 1).is_err(), "R = 1 has no standard error");
    }

    #[test]
    fn degenerate_replications_are_tallied_and_excludable() {
        // θ = (1, 1) makes every simulate-and-infer group fail.
        let mut cfg = ExperimentConfig {
            model: ModelSpec::bernoulli(2, 0.5).unwrap(),
            protocol: ProtocolName::SimulateAndInfer,
            n: 2,
            k: 2,
            grid: GridSpec::Explicit(vec![vec![1.0, 1.0]]),
            replications: 10,
            seed: 5,
            clamp: None,
            exclude_degenerate: false,
        };
        let report = run_experiment(&cfg, 1).unwrap();
        assert_eq!(report.per_theta[0].degenerate, 10);
        // Uniform fallback (½, ½) against (1, 1): risk is exactly ½.
        assert_eq!(report.per_theta[0].risk, 0.5);
        cfg.exclude_degenerate = true;
        assert!(
            run_experiment(&cfg, 1).is_err(),
            "excluding every replication must fail loudly, not report an empty mean"
        );
    }

    #[test]
    fn sweep_keeps_order_and_collects_errors() {
        let mut cfg = sharded_cfg();
        cfg.replications = 10;
        cfg.grid = GridSpec::Center;
        // n = 2 cannot carry d = 4 at k = 1 → that point errors, the rest run.
        let results = sweep(&cfg, SweepAxis::N, &[8, 2, 16], 1);
        assert_eq!(results.len(), 3);
        assert_eq!(results[0].0, 8);
        assert!(results[0].1.is_ok());
        assert!(results[1].1.is_err(), "n = 2 < d must fail");
        assert!(results[2].1.is_ok());
        assert!(sweep(&cfg, SweepAxis::N, &[], 1).is_empty());
        // Distinct sweep points must not share streams.
        let again = sweep(&cfg, SweepAxis::N, &[8, 16], 1);
        let (r8, r16) = (
            again[0].1.as_ref().unwrap(),
            again[1].1.as_ref().unwrap(),
        );
        assert_ne!(r8.seed, r16.seed, "per-point seeds must differ");
    }

    #[test]
    fn dimension_sweep_risk_increases() {
        let cfg = ExperimentConfig {
            model: ModelSpec::bernoulli(2, 0.5).unwrap(),
            protocol: ProtocolName::ShardedBits,
            n: 64,
            k: 1,
            grid: GridSpec::Center,
            replications: 400,
            seed: 9,
            clamp: None,
            exclude_degenerate: false,
        };
        let results = sweep(&cfg, SweepAxis::D, &[2, 4, 8], 1);
        let risks: Vec<f64> = results
            .iter()
            .map(|(_, r)| r.as_ref().unwrap().sup_risk)
            .collect();
        // Closed forms 1/64, 1/16, 1/4: gaps are many standard errors wide.
        assert!(
            risks[0] < risks[1] && risks[1] < risks[2],
            "risk should grow with dimension at fixed budget: {risks:?}"
        );
    }

    #[test]
    fn synthetic_power_law_is_recovered_exactly() {
        // risk = 0.37·d²/n over a 3×3 grid of (n, d).
        let mut points = Vec::new();
        for &n in &[100u64, 200, 400] {
            for &d in &[4u64, 8, 16] {
                points.push(ScalingPoint {
                    n,
                    d,
                    k: 1,
                    risk: 0.37 * (d * d) as f64 / n as f64,
                });
            }
        }
        let fit = fit_scaling_points(&points, &[Regressor::LogD, Regressor::LogN]).unwrap();
        assert!(
            (fit.coefficients[0] - 2.0).abs() < 1e-9,
            "d-exponent {} should be 2",
            fit.coefficients[0]
        );
        assert!(
            (fit.coefficients[1] + 1.0).abs() < 1e-9,
            "n-exponent {} should be −1",
            fit.coefficients[1]
        );
        assert!((fit.intercept - 0.37_f64.ln()).abs() < 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert!(fit.standard_errors.iter().all(|s| *s < 1e-7));
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let points: Vec<ScalingPoint> = [100u64, 200, 400, 800]
            .iter()
            .map(|&n| ScalingPoint {
                n,
                d: 8,
                k: 1,
                risk: 1.0 / n as f64,
            })
            .collect();
        // d is constant, so log d is collinear with the intercept.
        assert!(matches!(
            fit_scaling_points(&points, &[Regressor::LogN, Regressor::LogD]).unwrap_err(),
            Error::RankDeficient(_)
        ));
        assert!(matches!(
            fit_scaling_points(&points, &[Regressor::LogN, Regressor::LogN]).unwrap_err(),
            Error::RankDeficient(_)
        ));
        // Too few points for the parameter count.
        assert!(fit_scaling_points(&points[..2], &[Regressor::LogN]).is_err());
    }

    #[test]
    fn grid_specs_materialize_and_validate() {
        let model = ModelSpec::bernoulli(3, 0.5).unwrap();
        let grid = GridSpec::CenterAndCorners {
            delta: 0.25,
            corners: 4,
        }
        .materialize(&model)
        .unwrap();
        assert_eq!(grid.len(), 5);
        assert_eq!(grid[0], vec![0.5; 3], "first point is the center");
        assert_eq!(grid[1], vec![0.75; 3], "corner 0 is all-plus");
        assert_eq!(grid[2], vec![0.25, 0.75, 0.75], "corner 1 flips coordinate 0");
        // δ pushing outside [0,1] is caught by admissibility.
        assert!(GridSpec::CenterAndCorners {
            delta: 0.6,
            corners: 1
        }
        .materialize(&model)
        .is_err());
        assert!(
            GridSpec::CenterAndCorners {
                delta: 0.1,
                corners: 9
            }
            .materialize(&model)
            .is_err(),
            "only 2³ sign patterns exist"
        );
        let simplex = GridSpec::UniformSimplex.materialize(&model).unwrap();
        assert_eq!(simplex, vec![vec![1.0 / 3.0; 3]]);
        assert!(GridSpec::Explicit(vec![]).materialize(&model).is_err());
        assert!(
            GridSpec::Explicit(vec![vec![0.5; 2]]).materialize(&model).is_err(),
            "wrong-length grid points must be rejected"
        );
    }

    #[test]
    fn config_json_round_trips() {
        let cfg = sharded_cfg();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.model, cfg.model);
        assert_eq!(back.protocol, cfg.protocol);
        assert_eq!(back.replications, cfg.replications);
        let report = run_experiment(&back, 1).unwrap();
        let report2 = run_experiment(&cfg, 1).unwrap();
        assert_eq!(
            report.sup_risk.to_bits(),
            report2.sup_risk.to_bits(),
            "a config surviving JSON must reproduce the same report"
        );
    }
}
