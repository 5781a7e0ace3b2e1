use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde::Serialize;

use crate::config::{CliError, RunConfig};
use crate::Format;

/// One kernel value; the CSV header is `x,y,lambda,value,bound,M`.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub x: String,
    pub y: String,
    pub lambda: f64,
    pub value: f64,
    pub bound: f64,
    #[serde(rename = "M")]
    pub m: usize,
}

pub fn sink(cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Rows as CSV with a header, or as a JSON array of objects.
pub fn write_rows<T: Serialize>(cfg: &RunConfig, rows: &[T]) -> Result<(), CliError> {
    let mut out = sink(cfg)?;
    match cfg.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for r in rows {
                w.serialize(r)?;
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

pub fn write_json<T: Serialize>(cfg: &RunConfig, value: &T) -> Result<(), CliError> {
    let mut out = sink(cfg)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
