//! CSV tables with a `#`-prefixed provenance line.

use crate::error::Result;
use std::io::Write;

/// Identifies the configuration and seed that produced an output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn header_line(&self) -> String {
        format!(
            "# smfj {} config_sha256={} seed={}",
            self.command, self.config_sha256, self.seed
        )
    }
}

/// Write a header row and data rows, preceded by the provenance comment.
pub fn write_table<W: Write>(
    mut out: W,
    provenance: Option<&Provenance>,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    if let Some(p) = provenance {
        writeln!(out, "{}", p.header_line())?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip representation, stable across runs.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}
