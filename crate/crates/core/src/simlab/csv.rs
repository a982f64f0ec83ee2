//! CSV and gnuplot output for result records.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::simlab::runner::ResultRecord;
use crate::{Error, Result};

pub const HEADER: &str = "scenario,x,x_unit,metric,value,trials,stderr";

/// Decimal with 12 significant digits, trailing zeros trimmed, exponent form
/// outside `[1e-4, 1e12)`; non-finite values print as `inf`, `-inf`, `nan`.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    // round to 12 significant digits first so the exponent is the final one
    let sci = format!("{v:.11e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// CSV text for `records`, header first, newline-terminated.
pub fn write_csv(records: &[ResultRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scenario,
            format_value(r.x),
            r.x_unit,
            r.metric,
            format_value(r.value),
            r.trials,
            format_value(r.stderr)
        ));
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}

pub fn emit_csv(records: &[ResultRecord], path: &Path) -> Result<()> {
    write_file(path, &write_csv(records))
}

/// One gnuplot data block per metric (`x value stderr`), blocks separated by
/// two blank lines so `index` can select them.
pub fn gnuplot_text(records: &[ResultRecord]) -> String {
    let mut metrics: Vec<&str> = Vec::new();
    for r in records {
        if !metrics.contains(&r.metric.as_str()) {
            metrics.push(&r.metric);
        }
    }
    let mut out = String::new();
    for (i, m) in metrics.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&format!("# {m}\n"));
        for r in records.iter().filter(|r| r.metric == *m) {
            out.push_str(&format!("{} {} {}\n", format_value(r.x), format_value(r.value), format_value(r.stderr)));
        }
    }
    out
}

pub fn emit_gnuplot(records: &[ResultRecord], path: &Path) -> Result<()> {
    write_file(path, &gnuplot_text(records))
}
