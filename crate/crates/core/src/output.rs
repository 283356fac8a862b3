//! CSV and JSON emitters, and CSV ingestion of measured traces.
//!
//! CSV files start with `#`-prefixed metadata lines (tool version, resolved
//! parameters, seed), then a header row. Floats are written with 17
//! significant digits so that every value round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::cavity::{BandStructure, TransmissionMap};
use crate::error::{domain, Result};
use crate::jumpsim::{JumpTrajectory, ReadoutTrace};
use crate::params::{ExperimentParams, ParamName};
use crate::sweep::SweepResult;

pub const TOOL_NAME: &str = "mimqnd";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Lossless float formatting: 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Provenance attached to every output file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metadata {
    pub command: String,
    pub params: Option<ExperimentParams>,
    pub seed: Option<u64>,
    /// Further resolved settings, in insertion order.
    pub extra: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(command: &str) -> Self {
        Metadata {
            command: command.into(),
            ..Default::default()
        }
    }

    pub fn with_params(mut self, p: &ExperimentParams) -> Self {
        self.params = Some(*p);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.extra.push((key.into(), value.to_string()));
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.set(key, fmt_f64(value));
    }

    pub fn csv_header(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool: {TOOL_NAME} {TOOL_VERSION}");
        let _ = writeln!(out, "# command: {}", self.command);
        if let Some(p) = &self.params {
            for name in ParamName::ALL {
                let _ = writeln!(out, "# param {} = {}", name.key(), fmt_f64(p.get(name)));
            }
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "# seed: {seed}");
        }
        for (k, v) in &self.extra {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("tool".into(), json!(TOOL_NAME));
        m.insert("version".into(), json!(TOOL_VERSION));
        m.insert("command".into(), json!(self.command));
        if let Some(p) = &self.params {
            m.insert("params".into(), params_json(p));
        }
        if let Some(seed) = self.seed {
            m.insert("seed".into(), json!(seed));
        }
        for (k, v) in &self.extra {
            m.insert(k.clone(), json!(v));
        }
        Value::Object(m)
    }
}

fn params_json(p: &ExperimentParams) -> Value {
    let mut m = Map::new();
    for name in ParamName::ALL {
        m.insert(name.key().into(), json!(p.get(name)));
    }
    Value::Object(m)
}

/// Builds a CSV document: metadata, header row, then rows.
pub fn csv_document<I>(meta: &Metadata, columns: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = meta.csv_header();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn band_structure_csv(bands: &BandStructure, meta: &Metadata) -> String {
    let labels: Vec<String> = bands.bands.iter().map(|b| b.label()).collect();
    let mut columns = vec!["x_m"];
    columns.extend(labels.iter().map(String::as_str));
    let rows = bands.x_samples.iter().enumerate().map(|(i, x)| {
        std::iter::once(fmt_f64(*x))
            .chain(bands.bands.iter().map(|b| fmt_f64(b.omega[i])))
            .collect()
    });
    csv_document(meta, &columns, rows)
}

pub fn transmission_map_csv(map: &TransmissionMap, meta: &Metadata) -> String {
    let rows = map.x_grid.iter().enumerate().flat_map(|(ix, x)| {
        map.detuning_grid
            .iter()
            .enumerate()
            .map(move |(id, d)| vec![fmt_f64(*d), fmt_f64(*x), fmt_f64(map.intensity[ix][id])])
    });
    csv_document(meta, &["detuning_rad_s", "x_m", "intensity"], rows)
}

/// One row per constant-`n` stretch start: the initial state at `t = 0`,
/// then every event.
pub fn trajectory_csv(traj: &JumpTrajectory, meta: &Metadata) -> String {
    let rows = std::iter::once(vec![fmt_f64(0.0), traj.initial_n.to_string()]).chain(
        traj.events
            .iter()
            .map(|e| vec![fmt_f64(e.time), e.n_after.to_string()]),
    );
    csv_document(meta, &["t_s", "n"], rows)
}

pub fn readout_csv(trace: &ReadoutTrace, meta: &Metadata) -> String {
    let rows = trace
        .bin_centers
        .iter()
        .zip(&trace.freq_estimates)
        .zip(&trace.true_n_per_bin)
        .map(|((t, f), n)| vec![fmt_f64(*t), fmt_f64(*f), fmt_f64(*n)]);
    csv_document(meta, &["t_s", "freq_estimate_rad_s", "true_n"], rows)
}

const BUDGET_COLUMNS: [&str; 16] = [
    "delta_omega",
    "kappa",
    "n_bar_photons",
    "n_bar_phonons",
    "s_omega",
    "tau_thermal",
    "tau_rwa",
    "tau_lin",
    "tau_total",
    "snr",
    "gap",
    "qnd_time_ok",
    "gap_ok",
    "classical_bath_ok",
    "good_cavity",
    "all_flags",
];

/// One row per grid point: grid indices, all parameters, all budget fields
/// and flags, and the failure message if the point could not be evaluated.
pub fn sweep_csv(result: &SweepResult, meta: &Metadata) -> String {
    let mut columns: Vec<String> = vec!["point".into()];
    columns.extend((0..result.axes.len()).map(|k| format!("index_{k}")));
    columns.extend(ParamName::ALL.iter().map(|n| n.key().to_string()));
    columns.extend(BUDGET_COLUMNS.iter().map(|c| c.to_string()));
    columns.push("error".into());
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let rows = result.points.iter().enumerate().map(|(i, pt)| {
        let mut row = vec![i.to_string()];
        row.extend(pt.index.iter().map(|k| k.to_string()));
        row.extend(ParamName::ALL.iter().map(|n| fmt_f64(pt.params.get(*n))));
        match &pt.budget {
            Some(b) => {
                row.extend(
                    [
                        b.delta_omega,
                        b.kappa,
                        b.n_bar_photons,
                        b.n_bar_phonons,
                        b.s_omega,
                        b.tau_thermal,
                        b.tau_rwa,
                    ]
                    .map(fmt_f64),
                );
                row.push(b.tau_lin.map_or_else(|| "inf".into(), fmt_f64));
                row.extend([b.tau_total, b.snr, b.gap].map(fmt_f64));
                let f = b.flags;
                row.extend(
                    [
                        f.qnd_time_ok,
                        f.gap_ok,
                        f.classical_bath_ok,
                        f.good_cavity,
                        f.all(),
                    ]
                    .map(|v| v.to_string()),
                );
                row.push(String::new());
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), BUDGET_COLUMNS.len()));
                // commas would break the row
                row.push(pt.error.clone().unwrap_or_default().replace(',', ";"));
            }
        }
        row
    });
    csv_document(meta, &column_refs, rows)
}

/// `{"metadata": …, <body fields>}` as pretty-printed JSON. Object keys are
/// emitted in sorted order, so output is deterministic.
pub fn json_report(meta: &Metadata, body: &impl Serialize) -> Result<String> {
    let mut root = Map::new();
    root.insert("metadata".into(), meta.to_json());
    match serde_json::to_value(body).map_err(|e| domain(e.to_string()))? {
        Value::Object(fields) => root.extend(fields),
        other => {
            root.insert("result".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(root)).map_err(|e| domain(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parses a CSV with `#` comment lines and a header row that must equal
/// `expected` exactly. Returns one vector per column.
pub fn parse_columns(text: &str, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| domain("CSV has no header row"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names != expected {
        return Err(domain(format!(
            "expected CSV columns {}, found {}",
            expected.join(","),
            names.join(",")
        )));
    }
    let mut cols = vec![Vec::new(); expected.len()];
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expected.len() {
            return Err(domain(format!(
                "line {line_no}: expected {} fields, found {}",
                expected.len(),
                fields.len()
            )));
        }
        for (col, field) in cols.iter_mut().zip(fields) {
            let v: f64 = field
                .parse()
                .map_err(|_| domain(format!("line {line_no}: cannot parse '{field}' as a number")))?;
            col.push(v);
        }
    }
    Ok(cols)
}

pub fn read_columns(path: impl AsRef<Path>, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_columns(&text, expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.2832e5, -1.0e-300, f64::MAX, 5e-324] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1.5), "1.5000000000000000e0");
    }

    #[test]
    fn header_echoes_params_and_seed() {
        let p = ExperimentParams::reference_set_1();
        let mut meta = Metadata::new("jump-sim").with_params(&p).with_seed(42);
        meta.set("rng", "ChaCha20");
        let h = meta.csv_header();
        assert!(h.starts_with("# tool: mimqnd "));
        assert!(h.contains("# param Q = 1.2000000000000000e7\n"));
        assert!(h.contains("# seed: 42\n"));
        assert!(h.contains("# rng: ChaCha20\n"));
        assert!(h.lines().all(|l| l.starts_with('#')));
    }

    #[test]
    fn parse_accepts_comments_and_checks_header() {
        let text = "# comment\nt_s,power\n0,1\n1e-6, 0.5\n";
        let cols = parse_columns(text, &["t_s", "power"]).unwrap();
        assert_eq!(cols, vec![vec![0.0, 1e-6], vec![1.0, 0.5]]);
        assert!(parse_columns(text, &["t_s", "amplitude"]).is_err());
        assert!(parse_columns("t_s,power\n0,x\n", &["t_s", "power"]).is_err());
        assert!(parse_columns("t_s,power\n0\n", &["t_s", "power"]).is_err());
    }

    #[test]
    fn csv_written_by_us_parses_back() {
        let meta = Metadata::new("test");
        let doc = csv_document(&meta, &["t_s", "n"], vec![vec![fmt_f64(0.25), "3".into()]]);
        let cols = parse_columns(&doc, &["t_s", "n"]).unwrap();
        assert_eq!(cols, vec![vec![0.25], vec![3.0]]);
    }
}
