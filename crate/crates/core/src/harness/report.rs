use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::config::Format;
use super::experiment::RunRecord;
use crate::error::{Error, Result};

/// Writes `record` to `path` as CSV (`trial,round,regret,bound`) or JSON.
pub fn emit_report(record: &RunRecord, path: &Path, format: Format) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    write_report(record, &mut w, format).map_err(|e| match e {
        Error::Io { source, .. } => io(source),
        other => other,
    })?;
    w.flush().map_err(io)
}

pub fn write_report<W: Write + ?Sized>(
    record: &RunRecord,
    w: &mut W,
    format: Format,
) -> Result<()> {
    let io = |source| Error::Io {
        path: "<output>".into(),
        source,
    };
    match format {
        Format::Csv => {
            writeln!(w, "trial,round,regret,bound").map_err(io)?;
            for tr in &record.trials {
                for (i, (r, b)) in tr.regret_curve.iter().zip(&record.bound_curve).enumerate() {
                    writeln!(w, "{},{},{:.16e},{:.16e}", tr.trial, i + 1, r, b).map_err(io)?;
                }
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, record)?;
            writeln!(w).map_err(io)?;
        }
    }
    Ok(())
}
