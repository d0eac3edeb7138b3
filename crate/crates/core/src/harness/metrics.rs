//! Metrics CSV: `run_id,seed,env_step,mean_return,std_return,wall_seconds`,
//! UTF-8 with LF line endings. A failed seed ends with a row whose returns
//! are `NaN`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    pub env_step: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub wall_seconds: f64,
}

impl MetricsRow {
    pub fn is_failure(&self) -> bool {
        self.mean_return.is_nan()
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_metrics<W: Write>(w: W, rows: &[MetricsRow]) -> Result<()> {
    let mut out = writer(w);
    if rows.is_empty() {
        out.write_record(["run_id", "seed", "env_step", "mean_return", "std_return", "wall_seconds"])?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?)
}

pub fn save_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_metrics(&mut f, rows)?;
    f.flush()?;
    Ok(())
}

pub fn load_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    read_metrics(std::fs::File::open(path)?)
}

/// Writes any serializable rows with the same CSV dialect.
pub fn save_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = writer(std::io::BufWriter::new(std::fs::File::create(path)?));
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// First evaluation step whose mean return reaches `threshold`.
pub fn solved_at(rows: &[MetricsRow], threshold: f64) -> Option<usize> {
    rows.iter().find(|r| r.mean_return >= threshold).map(|r| r.env_step)
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
