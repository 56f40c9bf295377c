use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{FbdeError, Result};
use crate::weak_learner::Regime;

pub const TRACE_HEADER: [&str; 10] = [
    "t", "theta", "gamma_p", "gamma_q", "regime", "rr", "rr_bound", "kl_train", "kl_test", "z",
];

/// Diagnostics of one boosting round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub theta: f64,
    /// `E_P[c_t] / C` under the empirical target.
    pub gamma_p: f64,
    /// `E_{Q_{t−1}}[−c_t] / C`, computed exactly.
    pub gamma_q: f64,
    pub regime: Regime,
    /// `RR(Q_t)` from the normalizer products.
    pub rr: f64,
    pub rr_bound: f64,
    /// `KL(P̂_train, Q_t)`; infinite when `Q_t` misses part of the support.
    pub kl_train: Option<f64>,
    pub kl_test: Option<f64>,
    pub z: f64,
    pub z_by_group: Vec<f64>,
}

/// The per-round rows of a fit, plus the divergences of `Q₀` itself.
///
/// In CSV form the `Q₀` values become a leading `t = 0` row whose `theta`,
/// margin and regime fields are empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub kl_train_initial: Option<f64>,
    pub kl_test_initial: Option<f64>,
    pub rows: Vec<TraceRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_f64(field: &str, line: usize, name: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| FbdeError::Format(format!("trace line {line}: bad {name} value {field:?}")))
}

fn parse_opt(field: &str, line: usize, name: &str) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(field, line, name).map(Some)
    }
}

impl Trace {
    pub fn final_row(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_HEADER)?;
        w.write_record([
            "0".to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            "1".to_string(),
            "1".to_string(),
            fmt_opt(self.kl_train_initial),
            fmt_opt(self.kl_test_initial),
            "1".to_string(),
        ])?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.theta.to_string(),
                r.gamma_p.to_string(),
                r.gamma_q.to_string(),
                r.regime.as_str().to_string(),
                r.rr.to_string(),
                r.rr_bound.to_string(),
                fmt_opt(r.kl_train),
                fmt_opt(r.kl_test),
                r.z.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| FbdeError::Format(e.to_string()))
    }

    /// Reads a trace written by [`Trace::write_csv`]. Per-group normalizers are
    /// not part of the CSV and come back empty.
    pub fn read_csv<R: Read>(input: R) -> Result<Trace> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().ne(TRACE_HEADER.iter().copied()) {
            return Err(FbdeError::Format(format!(
                "unexpected trace header {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut trace = Trace::default();
        for (i, record) in r.records().enumerate() {
            let rec = record?;
            let line = i + 2;
            let t: usize = rec[0].trim().parse().map_err(|_| {
                FbdeError::Format(format!("trace line {line}: bad round index {:?}", &rec[0]))
            })?;
            if t == 0 {
                trace.kl_train_initial = parse_opt(&rec[7], line, "kl_train")?;
                trace.kl_test_initial = parse_opt(&rec[8], line, "kl_test")?;
                continue;
            }
            let regime = Regime::parse(rec[4].trim()).ok_or_else(|| {
                FbdeError::Format(format!("trace line {line}: bad regime {:?}", &rec[4]))
            })?;
            trace.rows.push(TraceRow {
                t,
                theta: parse_f64(&rec[1], line, "theta")?,
                gamma_p: parse_f64(&rec[2], line, "gamma_p")?,
                gamma_q: parse_f64(&rec[3], line, "gamma_q")?,
                regime,
                rr: parse_f64(&rec[5], line, "rr")?,
                rr_bound: parse_f64(&rec[6], line, "rr_bound")?,
                kl_train: parse_opt(&rec[7], line, "kl_train")?,
                kl_test: parse_opt(&rec[8], line, "kl_test")?,
                z: parse_f64(&rec[9], line, "z")?,
                z_by_group: Vec::new(),
            });
        }
        for (k, row) in trace.rows.iter().enumerate() {
            if row.t != k + 1 {
                return Err(FbdeError::Format(format!(
                    "trace rounds out of order: expected {}, found {}",
                    k + 1,
                    row.t
                )));
            }
        }
        Ok(trace)
    }
}
