use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde::Serialize;

use permbet::Result;

use super::{Format, Global};

pub fn sink(global: &Global) -> Result<Box<dyn Write>> {
    Ok(match &global.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes `rows` as CSV records or as a JSON array.
pub fn write_rows<T: Serialize>(global: &Global, rows: &[T]) -> Result<()> {
    let mut out = sink(global)?;
    match global.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes one record: a JSON object, or a CSV header plus one row.
pub fn write_one<T: Serialize>(global: &Global, value: &T) -> Result<()> {
    match global.format {
        Format::Csv => write_rows(global, std::slice::from_ref(value)),
        Format::Json => {
            let mut out = sink(global)?;
            serde_json::to_writer_pretty(&mut out, value)?;
            writeln!(out)?;
            out.flush()?;
            Ok(())
        }
    }
}
