//! Shared CSV conventions: a header row, then floats with 17 significant digits.

use std::io::{self, Write};

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_rows<W: Write>(mut out: W, header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> io::Result<()> {
    writeln!(out, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()
}
