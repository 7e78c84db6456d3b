//! Report rows, CSV/JSON serialization and file emission.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::svg::Figure;
use super::{ExperimentError, ExperimentKind};
use crate::stats::{empirical_quantile, median};

/// One `(n, replication)` cell of a posterior-convergence experiment.
///
/// `delta` and `info_or_gamma` are the centring and the information (regular
/// models) or the rate `γ` (boundary model) of the limit law. `posterior_sd`
/// is in the parameter's own units. `reference_tv` carries the exact
/// exponential-location sub-experiment of the boundary runs and
/// `interval_gap` the largest endpoint gap between the credible and Wald
/// intervals of the PLR runs, in local units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub replication: usize,
    pub tv_to_limit: f64,
    pub delta: f64,
    pub info_or_gamma: f64,
    pub ess: Option<f64>,
    pub localized_mass: f64,
    pub posterior_sd: f64,
    pub ks_normal: f64,
    pub reference_tv: Option<f64>,
    pub interval_gap: Option<f64>,
}

/// Empirical coverage of central credible and Wald intervals at one `(n, level)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub n: usize,
    pub level: f64,
    pub replications: usize,
    pub credible_coverage: f64,
    pub wald_coverage: f64,
    pub credible_width: f64,
    pub wald_width: f64,
    /// Fraction of credible intervals containing the posterior median.
    pub median_inside: f64,
}

/// Integrated-likelihood expansion at one `(n, replication, h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlanRow {
    pub n: usize,
    pub replication: usize,
    pub h: f64,
    /// Monte Carlo `log sₙ(h)/sₙ(0)` from conditional nuisance draws.
    pub log_ratio: f64,
    /// Closed-form `log sₙ(h)/sₙ(0)` under the Gaussian nuisance prior.
    pub exact_log_ratio: f64,
    pub remainder: f64,
    pub exact_remainder: f64,
    /// Remainder from plain prior draws; empty when every term underflowed.
    pub naive_remainder: Option<f64>,
}

/// Nuisance posterior mass of a Hellinger ball about the least-favourable
/// nuisance at a perturbed `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    pub n: usize,
    pub replication: usize,
    pub h: f64,
    pub radius: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "snake_case")]
pub enum Report {
    Convergence(Vec<ConvergenceRow>),
    Coverage(Vec<CoverageRow>),
    Ilan(Vec<IlanRow>),
    Perturbation(Vec<PerturbationRow>),
}

impl Report {
    pub fn len(&self) -> usize {
        match self {
            Report::Convergence(r) => r.len(),
            Report::Coverage(r) => r.len(),
            Report::Ilan(r) => r.len(),
            Report::Perturbation(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_convergence(&self) -> Option<&[ConvergenceRow]> {
        match self {
            Report::Convergence(r) => Some(r),
            _ => None,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        match self {
            Report::Convergence(r) => write_rows(r, writer),
            Report::Coverage(r) => write_rows(r, writer),
            Report::Ilan(r) => write_rows(r, writer),
            Report::Perturbation(r) => write_rows(r, writer),
        }
    }

    /// Parses CSV written by [`Report::write_csv`] for a report of the same
    /// kind as `self`.
    pub fn read_csv_like<R: Read>(&self, reader: R) -> Result<Report, csv::Error> {
        Ok(match self {
            Report::Convergence(_) => Report::Convergence(read_rows(reader)?),
            Report::Coverage(_) => Report::Coverage(read_rows(reader)?),
            Report::Ilan(_) => Report::Ilan(read_rows(reader)?),
            Report::Perturbation(_) => Report::Perturbation(read_rows(reader)?),
        })
    }

    /// Median and quartiles of every numeric column, grouped by the key
    /// columns (`n`, plus `h` or `level` where present).
    pub fn summary(&self) -> Vec<Value> {
        match self {
            Report::Convergence(r) => summarize(r, &["n"], &["replication"]),
            Report::Coverage(r) => summarize(r, &["n", "level"], &[]),
            Report::Ilan(r) => summarize(r, &["n", "h"], &["replication"]),
            Report::Perturbation(r) => summarize(r, &["n", "h", "radius"], &["replication"]),
        }
    }
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

fn key_string(v: &Value) -> String {
    match v {
        Value::Number(n) => n.to_string(),
        other => other.to_string(),
    }
}

fn summarize<T: Serialize>(rows: &[T], keys: &[&str], skip: &[&str]) -> Vec<Value> {
    let objects: Vec<Map<String, Value>> = rows
        .iter()
        .filter_map(|r| match serde_json::to_value(r) {
            Ok(Value::Object(m)) => Some(m),
            _ => None,
        })
        .collect();
    // group in first-seen order
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<&Map<String, Value>>> = BTreeMap::new();
    for o in &objects {
        let id = keys.iter().map(|k| key_string(o.get(*k).unwrap_or(&Value::Null))).collect::<Vec<_>>().join("|");
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push(o);
    }
    let mut out = Vec::new();
    for id in order {
        let members = &groups[&id];
        let mut entry = Map::new();
        for k in keys {
            entry.insert((*k).to_string(), members[0].get(*k).cloned().unwrap_or(Value::Null));
        }
        entry.insert("count".into(), json!(members.len()));
        let columns: Vec<&String> = members[0].keys().filter(|c| !keys.contains(&c.as_str()) && !skip.contains(&c.as_str())).collect();
        for c in columns {
            let vals: Vec<f64> = members.iter().filter_map(|m| m.get(c.as_str()).and_then(Value::as_f64)).collect();
            if vals.is_empty() {
                continue;
            }
            entry.insert(
                c.clone(),
                json!({
                    "median": median(&vals),
                    "q25": empirical_quantile(&vals, 0.25),
                    "q75": empirical_quantile(&vals, 0.75),
                }),
            );
        }
        out.push(Value::Object(entry));
    }
    out
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub report: Report,
    /// Experiment-level statistics that are not per row, e.g. a scaling slope.
    pub extras: Map<String, Value>,
    pub figures: Vec<Figure>,
}

impl ExperimentOutput {
    pub fn summary_json(&self) -> Value {
        json!({
            "experiment": self.experiment,
            "seed": self.seed,
            "rows": self.report.len(),
            "summary": self.report.summary(),
            "extras": Value::Object(self.extras.clone()),
        })
    }
}

fn io_err(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Io { path: path.display().to_string(), source }
}

/// Writes `report.csv`, `report.json` and `figures/*.svg` under `output_dir`.
pub fn emit_report(output: &ExperimentOutput, output_dir: &Path) -> Result<(), ExperimentError> {
    let figures = output_dir.join("figures");
    fs::create_dir_all(&figures).map_err(|e| io_err(&figures, e))?;
    let csv_path = output_dir.join("report.csv");
    let file = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    output.report.write_csv(std::io::BufWriter::new(file)).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(&csv_path, io),
        other => ExperimentError::Io { path: csv_path.display().to_string(), source: std::io::Error::other(format!("{other:?}")) },
    })?;
    let json_path = output_dir.join("report.json");
    let text = serde_json::to_string_pretty(&output.summary_json()).expect("summary is plain JSON");
    fs::write(&json_path, text + "\n").map_err(|e| io_err(&json_path, e))?;
    for f in &output.figures {
        let path = figures.join(format!("{}.svg", f.name));
        fs::write(&path, f.to_svg()).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}
