//! Execution of each config mode. Every runner returns the mode-specific
//! result (serializable), the CSV table, and a violation count; the caller
//! turns violations into the exit status and wraps everything in the
//! report document and manifest.

use crate::config::{
    Band, BoundsConfig, GeometryCheck, GeometryConfig, IdentitiesConfig, OracleConfig, RiskConfig,
    ScalingConfig,
};
use crate::report;
use commlim::blackboard::random_tree;
use commlim::bounds::{self, TailSide};
use commlim::geometry::{
    self, BoundCheck, BoundKind, CapMeanNorm, ExhaustiveCubeReport, ScoreBase, SlackRecord,
    SubsetSpec, TensorPowerReport,
};
use commlim::models::{ModelSpec, Observation};
use commlim::oracle::kl_chain_quantities;
use commlim::risk::{self, ScalingFit, ScalingPoint};
use commlim::{rng, util, Result};
use num_bigint::BigUint;
use rand::RngCore;
use serde::Serialize;

/// What one mode run produced, before artifact plumbing.
pub struct ModeOutcome {
    pub result: serde_json::Value,
    pub csv_header: &'static [&'static str],
    pub csv_rows: Vec<Vec<String>>,
    pub violations: u64,
}

#[derive(Serialize)]
struct BandOutcome {
    lo: f64,
    hi: f64,
    measured: f64,
    pass: bool,
}

impl BandOutcome {
    fn check(band: &Band, measured: f64) -> Self {
        BandOutcome {
            lo: band.lo,
            hi: band.hi,
            measured,
            pass: band.contains(measured),
        }
    }
}

pub fn run_risk(cfg: &RiskConfig, threads: usize, experiment_id: &str) -> Result<ModeOutcome> {
    let report = risk::run_experiment(&cfg.experiment, threads)?;
    let mut violations = 0;
    let expectation = cfg.expect.as_ref().map(|e| {
        let outcome = BandOutcome::check(&e.band, e.metric.read(&report));
        if !outcome.pass {
            violations += 1;
        }
        serde_json::json!({
            "metric": e.metric.as_str(),
            "lo": outcome.lo,
            "hi": outcome.hi,
            "measured": outcome.measured,
            "pass": outcome.pass,
        })
    });
    let csv_rows = report::risk_rows(experiment_id, &report);
    let mut result = serde_json::to_value(&report)?;
    result["expectation"] = expectation.unwrap_or(serde_json::Value::Null);
    Ok(ModeOutcome {
        result,
        csv_header: &report::RISK_CSV_HEADER,
        csv_rows,
        violations,
    })
}

pub fn run_scaling(cfg: &ScalingConfig, threads: usize, experiment_id: &str) -> Result<ModeOutcome> {
    let outcomes = risk::sweep(&cfg.base, cfg.axis, &cfg.values, threads);
    let mut points_json = Vec::with_capacity(outcomes.len());
    let mut fit_points: Vec<ScalingPoint> = Vec::new();
    let mut csv_rows = Vec::new();
    let mut failures = 0u64;
    for (value, outcome) in &outcomes {
        match outcome {
            Ok(report) => {
                let mut pt = report.scaling_point();
                if cfg.scale_risk_by_n {
                    pt.risk *= pt.n as f64;
                }
                fit_points.push(pt);
                csv_rows.extend(report::risk_rows(experiment_id, report));
                points_json.push(serde_json::json!({
                    "value": value,
                    "report": serde_json::to_value(report)?,
                    "error": serde_json::Value::Null,
                }));
            }
            Err(e) => {
                failures += 1;
                points_json.push(serde_json::json!({
                    "value": value,
                    "report": serde_json::Value::Null,
                    "error": e.to_string(),
                }));
            }
        }
    }
    let mut violations = failures;
    let (fit, fit_error): (Option<ScalingFit>, Option<String>) = if cfg.regressors.is_empty() {
        (None, None)
    } else {
        match risk::fit_scaling_points(&fit_points, &cfg.regressors) {
            Ok(f) => (Some(f), None),
            Err(e) => {
                violations += 1;
                (None, Some(e.to_string()))
            }
        }
    };
    let mut expectations = Vec::new();
    for e in &cfg.expect_coefficients {
        let measured = fit.as_ref().and_then(|f| {
            f.regressors
                .iter()
                .position(|r| *r == e.regressor)
                .map(|i| f.coefficients[i])
        });
        let outcome = BandOutcome::check(&e.band, measured.unwrap_or(f64::NAN));
        let pass = measured.is_some() && outcome.pass;
        if !pass {
            violations += 1;
        }
        expectations.push(serde_json::json!({
            "regressor": e.regressor.as_str(),
            "lo": e.band.lo,
            "hi": e.band.hi,
            "measured": measured,
            "pass": pass,
        }));
    }
    let result = serde_json::json!({
        "axis": cfg.axis.as_str(),
        "scale_risk_by_n": cfg.scale_risk_by_n,
        "points": points_json,
        "failures": failures,
        "fit": fit.as_ref().map(serde_json::to_value).transpose()?,
        "fit_error": fit_error,
        "expectations": expectations,
    });
    Ok(ModeOutcome {
        result,
        csv_header: &report::RISK_CSV_HEADER,
        csv_rows,
        violations,
    })
}

const IDENTITY_CSV_HEADER: [&str; 7] = [
    "tree_id",
    "model",
    "sensors",
    "depth",
    "tuples",
    "total_slack",
    "leave_one_out_slack",
];

fn model_label(m: &ModelSpec) -> String {
    format!("{}(d={})", m.family.name(), m.d)
}

/// All joint inputs of `sensors` independent draws from `space`, by
/// mixed-radix counting.
fn joint_inputs(space: &[Observation], sensors: usize) -> Vec<Vec<Observation>> {
    let mut tuples = Vec::with_capacity(space.len().pow(sensors as u32));
    let mut idx = vec![0usize; sensors];
    loop {
        tuples.push(idx.iter().map(|&i| space[i].clone()).collect());
        let mut pos = 0;
        loop {
            if pos == sensors {
                return tuples;
            }
            idx[pos] += 1;
            if idx[pos] < space.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

pub fn run_identities(cfg: &IdentitiesConfig) -> Result<ModeOutcome> {
    let mut csv_rows = Vec::with_capacity(cfg.trees);
    let mut violations = 0u64;
    let mut worst_total: f64 = 0.0;
    let mut worst_leave_one_out: f64 = 0.0;
    let mut tuples_checked = 0u64;
    for i in 0..cfg.trees {
        let mut r = rng::stream(cfg.seed, &[0x6964_656e, i as u64]);
        let model = &cfg.models[(r.next_u64() % cfg.models.len() as u64) as usize];
        let sensors = 1 + (r.next_u64() as usize % cfg.max_sensors);
        let budgets: Vec<usize> = (0..sensors)
            .map(|_| 1 + (r.next_u64() as usize % cfg.max_budget))
            .collect();
        let tree_seed = r.next_u64();
        let tree = random_tree(model, &budgets, tree_seed)?;
        let space = model.sample_space()?;
        let mut tree_total: f64 = 0.0;
        let mut tree_leave: f64 = 0.0;
        let mut tuples = 0u64;
        for inputs in joint_inputs(&space, sensors) {
            let rep = tree.check_protocol_identities(&inputs, tree_seed)?;
            tree_total = tree_total.max(rep.total_slack);
            tree_leave = tree_leave.max(
                rep.leave_one_out_slack
                    .iter()
                    .fold(0.0f64, |a, &b| a.max(b)),
            );
            tuples += 1;
        }
        tuples_checked += tuples;
        if tree_total.max(tree_leave) > cfg.tolerance {
            violations += 1;
        }
        worst_total = worst_total.max(tree_total);
        worst_leave_one_out = worst_leave_one_out.max(tree_leave);
        csv_rows.push(vec![
            i.to_string(),
            model_label(model),
            sensors.to_string(),
            tree.depth().to_string(),
            tuples.to_string(),
            tree_total.to_string(),
            tree_leave.to_string(),
        ]);
    }
    let result = serde_json::json!({
        "trees": cfg.trees,
        "tuples_checked": tuples_checked,
        "worst_total_slack": worst_total,
        "worst_leave_one_out_slack": worst_leave_one_out,
        "tolerance": cfg.tolerance,
        "violations": violations,
    });
    Ok(ModeOutcome {
        result,
        csv_header: &IDENTITY_CSV_HEADER,
        csv_rows,
        violations,
    })
}

const ORACLE_CSV_HEADER: [&str; 8] = [
    "instance",
    "model",
    "sensors",
    "delta",
    "mutual_information",
    "dbar",
    "ub",
    "chain_slack",
];

pub fn run_oracle(cfg: &OracleConfig) -> Result<ModeOutcome> {
    let mut csv_rows = Vec::with_capacity(cfg.instances);
    let mut violations = 0u64;
    let mut worst_slack = f64::NEG_INFINITY;
    for i in 0..cfg.instances {
        let mut r = rng::stream(cfg.seed, &[0x6f72_6163, i as u64]);
        let model = &cfg.models[(r.next_u64() % cfg.models.len() as u64) as usize];
        let sensors = 1 + (r.next_u64() as usize % cfg.max_sensors);
        let budgets: Vec<usize> = (0..sensors)
            .map(|_| 1 + (r.next_u64() as usize % cfg.max_budget))
            .collect();
        let delta = cfg.deltas[(r.next_u64() % cfg.deltas.len() as u64) as usize];
        let tree = random_tree(model, &budgets, r.next_u64())?;
        let cube = model.hypothesis_cube(delta, None)?;
        let rep = kl_chain_quantities(&tree, &cube, false)?;
        let slack = rep.chain_slack();
        worst_slack = worst_slack.max(slack);
        if slack > cfg.tolerance {
            violations += 1;
        }
        csv_rows.push(vec![
            i.to_string(),
            model_label(model),
            sensors.to_string(),
            delta.to_string(),
            rep.mutual_information.to_string(),
            rep.dbar.to_string(),
            rep.ub.to_string(),
            slack.to_string(),
        ]);
    }
    let result = serde_json::json!({
        "instances": cfg.instances,
        "worst_chain_slack": worst_slack,
        "tolerance": cfg.tolerance,
        "violations": violations,
    });
    Ok(ModeOutcome {
        result,
        csv_header: &ORACLE_CSV_HEADER,
        csv_rows,
        violations,
    })
}

#[derive(Serialize)]
struct ExhaustiveSummary {
    report: ExhaustiveCubeReport,
    half_norm: Option<BandOutcome>,
}

#[derive(Serialize)]
struct CapSummary {
    d: usize,
    best_t: usize,
    best_ratio: f64,
    min_ratio: Option<f64>,
    pass: bool,
}

#[derive(Serialize)]
struct TensorSummary {
    reports: Vec<TensorPowerReport>,
    max_rel_gap: Option<f64>,
    gap_pass: Option<bool>,
    decreasing_pass: Option<bool>,
}

fn cap_record(c: &CapMeanNorm) -> SlackRecord {
    let mass = (util::ln_biguint(&c.ball_size) - c.d as f64 * std::f64::consts::LN_2).exp();
    SlackRecord {
        set_id: format!("ball(d={},t={})", c.d, c.t),
        mass,
        norm_sq: c.norm_sq,
        checks: vec![BoundCheck {
            bound: BoundKind::TwoLog,
            value: c.bound,
            slack: c.bound - c.norm_sq,
        }],
    }
}

pub fn run_geometry(cfg: &GeometryConfig) -> Result<ModeOutcome> {
    let mut records: Vec<SlackRecord> = Vec::new();
    let mut exhaustive = Vec::new();
    let mut caps = Vec::new();
    let mut tensors = Vec::new();
    let mut violations = 0u64;
    for check in &cfg.checks {
        match check {
            GeometryCheck::ExhaustiveCube {
                d,
                expect_half_norm,
            } => {
                let report = geometry::exhaustive_hypercube_check(*d)?;
                if report.min_bessel_slack < -cfg.tolerance
                    || report.min_two_log_slack < -cfg.tolerance
                {
                    violations += 1;
                }
                let half_norm = expect_half_norm.as_ref().map(|band| {
                    let out = BandOutcome::check(band, report.max_half_norm_sq);
                    if !out.pass {
                        violations += 1;
                    }
                    out
                });
                exhaustive.push(ExhaustiveSummary { report, half_norm });
            }
            GeometryCheck::Sets {
                base,
                sets,
                psi2_sigma,
            } => {
                let recs = geometry::verify_geometric_bounds(base, sets, *psi2_sigma)?;
                violations += recs
                    .iter()
                    .filter(|r| r.min_slack() < -cfg.tolerance)
                    .count() as u64;
                records.extend(recs);
            }
            GeometryCheck::HalflineGrid { from, to, points } => {
                let step = (to - from) / (*points as f64 - 1.0);
                let sets: Vec<SubsetSpec> = (0..*points)
                    .map(|i| SubsetSpec::HalfLine {
                        t: from + step * i as f64,
                    })
                    .collect();
                let recs =
                    geometry::verify_geometric_bounds(&ScoreBase::Gaussian { d: 1 }, &sets, None)?;
                violations += recs
                    .iter()
                    .filter(|r| r.min_slack() < -cfg.tolerance)
                    .count() as u64;
                records.extend(recs);
            }
            GeometryCheck::CapSweep { d, min_ratio } => {
                let sweep = geometry::cap_ratio_sweep(*d)?;
                let best = sweep
                    .iter()
                    .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
                    .expect("sweep over d >= 3 is nonempty");
                let pass = min_ratio.map_or(true, |m| best.ratio >= m);
                if !pass {
                    violations += 1;
                }
                violations += sweep
                    .iter()
                    .filter(|c| c.norm_sq > c.bound + cfg.tolerance)
                    .count() as u64;
                caps.push(CapSummary {
                    d: *d,
                    best_t: best.t,
                    best_ratio: best.ratio,
                    min_ratio: *min_ratio,
                    pass,
                });
                records.extend(sweep.iter().map(cap_record));
            }
            GeometryCheck::TensorLift {
                indicator,
                lift_orders,
                max_rel_gap,
                require_decreasing,
            } => {
                let reports: Vec<TensorPowerReport> = lift_orders
                    .iter()
                    .map(|&b| geometry::tensor_power_compare(indicator, b))
                    .collect::<Result<_>>()?;
                let rel_gaps: Vec<Option<f64>> = reports.iter().map(|r| r.rel_gap).collect();
                let gap_pass = max_rel_gap.map(|cap| {
                    let ok = rel_gaps
                        .last()
                        .and_then(|g| *g)
                        .map_or(false, |g| g <= cap);
                    if !ok {
                        violations += 1;
                    }
                    ok
                });
                let decreasing_pass = if *require_decreasing {
                    let ok = rel_gaps.windows(2).all(|w| match (w[0], w[1]) {
                        (Some(a), Some(b)) => b < a,
                        _ => false,
                    });
                    if !ok {
                        violations += 1;
                    }
                    Some(ok)
                } else {
                    None
                };
                tensors.push(TensorSummary {
                    reports,
                    max_rel_gap: *max_rel_gap,
                    gap_pass,
                    decreasing_pass,
                });
            }
        }
    }
    let csv_rows = report::slack_rows(&records);
    let result = serde_json::json!({
        "tolerance": cfg.tolerance,
        "records": serde_json::to_value(&records)?,
        "exhaustive": serde_json::to_value(&exhaustive)?,
        "cap_sweeps": serde_json::to_value(&caps)?,
        "tensor_lifts": serde_json::to_value(&tensors)?,
        "violations": violations,
    });
    Ok(ModeOutcome {
        result,
        csv_header: &report::SLACK_CSV_HEADER,
        csv_rows,
        violations,
    })
}

const BOUNDS_CSV_HEADER: [&str; 9] = [
    "statement",
    "n",
    "d",
    "k",
    "s",
    "i0",
    "sigma2",
    "rate",
    "warnings",
];

#[derive(Serialize)]
struct UtilityCheck {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Frozen numeric-utility checks: each one is an exact identity or a strict
/// domination that holds with slack, so a failure indicates a real
/// regression rather than noise.
fn utility_checks() -> Result<Vec<UtilityCheck>> {
    let mut out = Vec::new();

    // Entropy inverse round-trip on an even grid of [0, 1].
    let mut worst = 0.0f64;
    for i in 0..=2000 {
        let y = i as f64 / 2000.0;
        worst = worst.max((bounds::h2(bounds::h2_inv(y)?)? - y).abs());
    }
    out.push(UtilityCheck {
        name: "h2_round_trip",
        pass: worst <= 1e-10,
        detail: format!("max |h2(h2_inv(y)) - y| = {worst:.3e} over 2001 points"),
    });

    // The entropy-gap function stays under its linear envelope.
    let mut envelope_ok = true;
    let mut prev = f64::INFINITY;
    let mut decreasing = true;
    for i in 0..1000 {
        let y = i as f64 / 999.0;
        let f = bounds::f_entropy(y)?;
        if f > 2.0 * std::f64::consts::LN_2 * (1.0 - y) + 1e-12 {
            envelope_ok = false;
        }
        if f > prev + 1e-12 {
            decreasing = false;
        }
        prev = f;
    }
    out.push(UtilityCheck {
        name: "entropy_gap_envelope",
        pass: envelope_ok && decreasing,
        detail: format!("envelope ok: {envelope_ok}, monotone decreasing: {decreasing}"),
    });

    // Chernoff forms dominate the exact Bin(100, 1/2) upper tail at
    // delta = 1/2 (lambda = n p = 50).
    let tails = bounds::chernoff_tails(50.0, 0.5, TailSide::Upper)?;
    let sum: BigUint = (75..=100).map(|j| util::binomial(100, j)).sum();
    let exact = (util::ln_biguint(&sum) - 100.0 * std::f64::consts::LN_2).exp();
    let pass = tails.relaxed >= tails.tight && tails.tight >= exact;
    out.push(UtilityCheck {
        name: "chernoff_dominates_exact_tail",
        pass,
        detail: format!(
            "relaxed {:.3e} >= tight {:.3e} >= exact {:.3e}",
            tails.relaxed, tails.tight, exact
        ),
    });

    // Hamming balls of radius d/5 stay exponentially small.
    let mut ball_ok = true;
    let mut worst_margin = f64::INFINITY;
    for d in (5..=100).step_by(5) {
        let ball = bounds::hamming_ball_volume(d, d / 5)?;
        let cap = (-(d as f64) / 8.0).exp();
        worst_margin = worst_margin.min(cap / ball.ratio);
        if ball.ratio > cap {
            ball_ok = false;
        }
    }
    out.push(UtilityCheck {
        name: "ball_ratio_decay",
        pass: ball_ok,
        detail: format!("min exp(-d/8) / ratio = {worst_margin:.3} over d in 5..=100"),
    });

    // Closed-form sub-Gaussian norms.
    let normal = geometry::psi2_norm(&geometry::Psi2Dist::std_normal())?;
    let rademacher = geometry::psi2_norm(&geometry::Psi2Dist::Rademacher)?;
    let want_normal = (8.0f64 / 3.0).sqrt();
    let want_rademacher = 1.0 / std::f64::consts::LN_2.sqrt();
    let pass = (normal - want_normal).abs() <= 1e-9 * want_normal
        && (rademacher - want_rademacher).abs() <= 1e-9 * want_rademacher;
    out.push(UtilityCheck {
        name: "psi2_closed_forms",
        pass,
        detail: format!(
            "normal {normal:.12} vs {want_normal:.12}, rademacher {rademacher:.12} vs {want_rademacher:.12}"
        ),
    });

    Ok(out)
}

pub fn run_bounds(cfg: &BoundsConfig) -> Result<ModeOutcome> {
    let mut csv_rows = Vec::with_capacity(cfg.queries.len());
    let mut rates = Vec::with_capacity(cfg.queries.len());
    for q in &cfg.queries {
        let res = bounds::lower_rate(q)?;
        csv_rows.push(vec![
            q.statement.name().to_string(),
            q.n.to_string(),
            q.d.to_string(),
            q.k.to_string(),
            opt_str(&q.s),
            opt_str(&q.i0),
            opt_str(&q.sigma2),
            res.rate.to_string(),
            res.warnings.join("; "),
        ]);
        rates.push(serde_json::json!({
            "query": serde_json::to_value(q)?,
            "rate": res.rate,
            "warnings": res.warnings,
        }));
    }
    let mut violations = 0u64;
    let checks = if cfg.utility_checks {
        let checks = utility_checks()?;
        violations += checks.iter().filter(|c| !c.pass).count() as u64;
        Some(checks)
    } else {
        None
    };
    let result = serde_json::json!({
        "rates": rates,
        "utility_checks": checks.as_ref().map(serde_json::to_value).transpose()?,
        "violations": violations,
    });
    Ok(ModeOutcome {
        result,
        csv_header: &BOUNDS_CSV_HEADER,
        csv_rows,
        violations,
    })
}
