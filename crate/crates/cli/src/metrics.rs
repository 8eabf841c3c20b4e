//! Metrics CSVs and comparison series.

use std::io::{self, BufRead, Write};

use trsvr::drivers::Trace;

pub const CSV_HEADER: &str =
    "k,s,f,grad_norm,vr_grad_norm,radius,step_norm,model_dec,actual_dec,evals";

/// 17 significant digits, enough to round-trip every `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(trace: &Trace, mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.s,
            fmt_float(r.f),
            fmt_float(r.grad_norm),
            fmt_float(r.vr_grad_norm),
            fmt_float(r.radius),
            fmt_float(r.step_norm),
            fmt_float(r.model_dec),
            fmt_float(r.actual_dec),
            r.evals
        )?;
    }
    Ok(())
}

/// Parsed CSV: column names and rows of numbers (`NaN` allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_csv<R: BufRead>(input: R) -> io::Result<Table> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad("empty csv".into()))??;
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let row = line
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| bad(format!("line {}: {e}", n + 2)))
            })
            .collect::<io::Result<Vec<f64>>>()?;
        if row.len() != columns.len() {
            return Err(bad(format!(
                "line {}: expected {} fields",
                n + 2,
                columns.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// Two whitespace-separated blocks, `evals f` then `evals grad_norm²`,
/// separated by two blank lines. Steps without diagnostics are omitted.
pub fn write_series<W: Write>(trace: &Trace, mut out: W) -> io::Result<()> {
    writeln!(out, "# {} evals f", trace.optimizer.as_str())?;
    for r in trace.records.iter().filter(|r| !r.f.is_nan()) {
        writeln!(out, "{} {}", r.evals, fmt_float(r.f))?;
    }
    writeln!(out)?;
    writeln!(out)?;
    writeln!(out, "# {} evals grad_norm_sq", trace.optimizer.as_str())?;
    for r in trace.records.iter().filter(|r| !r.grad_norm.is_nan()) {
        writeln!(out, "{} {}", r.evals, fmt_float(r.grad_norm * r.grad_norm))?;
    }
    Ok(())
}
