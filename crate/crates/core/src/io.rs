//! CSV formats.
//!
//! Sample paths: `index,t_i,D_i[,mu_i]` with 1-based `index` and `t_i = index * T / n`.
//! Diagnostics: `n,statistic,value,mc_stderr`, empty cells where a field does not apply.
//!
//! Numbers use Rust's shortest round-trip decimal formatting.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::sde_sim::SamplePath;

pub const PATH_CSV_HEADER: [&str; 3] = ["index", "t_i", "D_i"];
pub const DIAG_CSV_HEADER: [&str; 4] = ["n", "statistic", "value", "mc_stderr"];

pub fn write_path_csv<W: Write>(path: &SamplePath, out: W, with_truth: bool) -> Result<()> {
    let truth = match (with_truth, path.truth.as_ref()) {
        (true, None) => return Err(Error::Contract("truth columns requested for a path without truth".into())),
        (true, Some(t)) => Some(t),
        (false, _) => None,
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = PATH_CSV_HEADER.to_vec();
    if truth.is_some() {
        header.push("mu_i");
    }
    w.write_record(&header)?;
    for (i, (t, d)) in path.times().zip(&path.increments).enumerate() {
        let mut rec = vec![(i + 1).to_string(), t.to_string(), d.to_string()];
        if let Some(truth) = truth {
            rec.push(truth.mu[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads increments written by [`write_path_csv`] or supplied externally in
/// the same layout. Truth columns are ignored; the horizon is the last `t_i`.
pub fn read_path_csv<R: Read>(input: R) -> Result<SamplePath> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::config(format!("path CSV is missing column {name:?}")))
    };
    let t_col = column("t_i")?;
    let d_col = column("D_i")?;

    let mut times = Vec::new();
    let mut increments = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |col: usize, name: &str| -> Result<f64> {
            let raw = rec.get(col).unwrap_or("").trim();
            raw.parse::<f64>()
                .map_err(|_| Error::config(format!("row {}: cannot parse {name} value {raw:?}", row + 1)))
        };
        times.push(parse(t_col, "t_i")?);
        increments.push(parse(d_col, "D_i")?);
    }
    let n = increments.len();
    let horizon = *times.last().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    let delta = horizon / n as f64;
    for (i, &t) in times.iter().enumerate() {
        let expected = (i + 1) as f64 * delta;
        if (t - expected).abs() > 1e-9 * horizon {
            return Err(Error::config(format!(
                "row {}: t_i = {t} but an equally spaced grid needs {expected}",
                i + 1
            )));
        }
    }
    SamplePath::from_increments(increments, horizon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagRow {
    pub n: Option<usize>,
    pub statistic: String,
    pub value: f64,
    pub mc_stderr: Option<f64>,
}

impl DiagRow {
    pub fn new(n: Option<usize>, statistic: impl Into<String>, value: f64, mc_stderr: Option<f64>) -> Self {
        DiagRow { n, statistic: statistic.into(), value, mc_stderr }
    }
}

pub fn write_diag_csv<W: Write>(rows: &[DiagRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DIAG_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.statistic.clone(),
            r.value.to_string(),
            r.mc_stderr.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
