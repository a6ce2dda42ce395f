//! Artifact emission: CSV tables, the JSON report document, the run
//! manifest, and the long-format plot extraction. Everything written here is
//! byte-reproducible for a fixed config except wall-clock fields
//! (`seconds`, manifest timestamps).

use commlim::geometry::SlackRecord;
use commlim::risk::RiskReport;
use commlim::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const RISK_CSV_HEADER: [&str; 14] = [
    "experiment_id",
    "protocol",
    "n",
    "d",
    "k",
    "theta_id",
    "risk",
    "se",
    "norm_n_d2",
    "norm_n2k_d",
    "norm_nk_d2",
    "degenerate_count",
    "seconds",
    "seed",
];

pub const SLACK_CSV_HEADER: [&str; 6] =
    ["set_id", "P", "norm2", "bound_name", "bound_value", "slack"];

pub const PLOT_CSV_HEADER: [&str; 4] = ["x", "y", "series", "se"];

/// Content hash of the config document, canonicalized so key order in the
/// file does not matter (object keys are sorted during JSON re-serialization).
pub fn config_digest(value: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(value).expect("re-serializing parsed JSON cannot fail");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    format!("sha256:{:x}", hasher.finalize())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config {
        path: path.display().to_string(),
        message: format!("io error: {e}"),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Config {
        path: path.display().to_string(),
        message: format!("csv error: {e}"),
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// One risk-CSV row per grid point of one report.
pub fn risk_rows(experiment_id: &str, report: &RiskReport) -> Vec<Vec<String>> {
    report
        .per_theta
        .iter()
        .map(|t| {
            vec![
                experiment_id.to_string(),
                report.protocol.as_str().to_string(),
                report.n.to_string(),
                report.d.to_string(),
                report.k.to_string(),
                t.theta_id.to_string(),
                t.risk.to_string(),
                t.se.to_string(),
                report.norm_n_d2.to_string(),
                report.norm_n2k_d.to_string(),
                report.norm_nk_d2.to_string(),
                t.degenerate.to_string(),
                report.seconds.to_string(),
                report.seed.to_string(),
            ]
        })
        .collect()
}

/// One slack-CSV row per (set, bound) pair.
pub fn slack_rows(records: &[SlackRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .flat_map(|rec| {
            rec.checks.iter().map(move |check| {
                vec![
                    rec.set_id.clone(),
                    rec.mass.to_string(),
                    rec.norm_sq.to_string(),
                    check.bound.name().to_string(),
                    check.value.to_string(),
                    check.slack.to_string(),
                ]
            })
        })
        .collect()
}

/// Every artifact of a run points back to this document, and it points at
/// them; the digest ties both to the exact config content.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub experiment_id: String,
    pub mode: String,
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub threads: usize,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub outputs: Vec<String>,
    /// `ok`, `check-failed`, or `error`.
    pub status: String,
    pub violations: u64,
    /// Set when the run aborted; the listed outputs may be partial.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// The JSON body: config echo + digest + the mode-specific result, so the
/// file is self-describing without the manifest.
pub fn report_document<T: Serialize>(
    mode: &str,
    experiment_id: &str,
    config_digest: &str,
    config: &serde_json::Value,
    result: &T,
) -> Result<serde_json::Value> {
    Ok(serde_json::json!({
        "mode": mode,
        "experiment_id": experiment_id,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config_digest": config_digest,
        "config": config,
        "result": serde_json::to_value(result)?,
    }))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    std::fs::write(path, body).map_err(|e| io_err(path, e))
}

/// Output paths for one run: `<stem>.csv`, `<stem>.json`,
/// `<stem>.manifest.json` under the output directory.
pub struct ArtifactPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub manifest: PathBuf,
}

impl ArtifactPaths {
    pub fn new(out_dir: &Path, stem: &str) -> Self {
        ArtifactPaths {
            csv: out_dir.join(format!("{stem}.csv")),
            json: out_dir.join(format!("{stem}.json")),
            manifest: out_dir.join(format!("{stem}.manifest.json")),
        }
    }

    pub fn names(&self) -> Vec<String> {
        [&self.csv, &self.json, &self.manifest]
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    }
}

/// A single plot observation; `se` stays empty for slack tables.
pub struct PlotRow {
    pub x: f64,
    pub y: f64,
    pub series: String,
    pub se: Option<f64>,
}

impl PlotRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.x.to_string(),
            self.y.to_string(),
            self.series.clone(),
            self.se.map(|s| s.to_string()).unwrap_or_default(),
        ]
    }
}

fn field<'v>(doc: &'v serde_json::Value, name: &str, path: &Path) -> Result<&'v serde_json::Value> {
    doc.get(name).ok_or_else(|| Error::Config {
        path: path.display().to_string(),
        message: format!("not a report produced by this tool: missing `{name}`"),
    })
}

fn as_f64(v: &serde_json::Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

/// What a report document contributes to a tidy plot CSV.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    RiskCurve,
    SlackTable,
}

/// Extracts (x, y, series, se) rows from one report JSON.
///
/// Risk reports plot risk against the grid-point index, scaling reports
/// against the swept axis value, and geometry reports plot each bound's
/// slack against the set mass. Modes without a curve shape are rejected.
pub fn plot_rows(doc: &serde_json::Value, path: &Path) -> Result<(PlotKind, Vec<PlotRow>)> {
    let mode = field(doc, "mode", path)?.as_str().unwrap_or_default();
    let id = field(doc, "experiment_id", path)?
        .as_str()
        .unwrap_or("unnamed")
        .to_string();
    let result = field(doc, "result", path)?;
    let mut rows = Vec::new();
    match mode {
        "risk" => {
            for t in field(result, "per_theta", path)?.as_array().into_iter().flatten() {
                rows.push(PlotRow {
                    x: as_f64(&t["theta_id"]),
                    y: as_f64(&t["risk"]),
                    series: id.clone(),
                    se: t["se"].as_f64(),
                });
            }
            Ok((PlotKind::RiskCurve, rows))
        }
        "scaling" => {
            for p in field(result, "points", path)?.as_array().into_iter().flatten() {
                let Some(report) = p.get("report").filter(|r| !r.is_null()) else {
                    continue;
                };
                let sup_id = report["sup_theta_id"].as_u64().unwrap_or(0) as usize;
                let se = report["per_theta"]
                    .as_array()
                    .and_then(|a| a.get(sup_id))
                    .and_then(|t| t["se"].as_f64());
                rows.push(PlotRow {
                    x: as_f64(&p["value"]),
                    y: as_f64(&report["sup_risk"]),
                    series: id.clone(),
                    se,
                });
            }
            Ok((PlotKind::RiskCurve, rows))
        }
        "verify-geometry" => {
            for rec in field(result, "records", path)?.as_array().into_iter().flatten() {
                for check in rec["checks"].as_array().into_iter().flatten() {
                    rows.push(PlotRow {
                        x: as_f64(&rec["mass"]),
                        y: as_f64(&check["slack"]),
                        series: format!("{id}:{}", check["bound"].as_str().unwrap_or("?")),
                        se: None,
                    });
                }
            }
            Ok((PlotKind::SlackTable, rows))
        }
        other => Err(Error::Config {
            path: path.display().to_string(),
            message: format!("mode `{other}` has no plot projection"),
        }),
    }
}
