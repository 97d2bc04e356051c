//! Delimited history files.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::DduError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSample {
    pub hour: usize,
    pub sample_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub hour: usize,
    pub state_id: String,
    pub count: u64,
    pub ratio: f64,
}

fn read_records<T: for<'de> Deserialize<'de>>(reader: impl Read, what: &str) -> Result<Vec<T>, DduError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| DduError::History(format!("{what} row {}: {e}", i + 1))))
        .collect()
}

/// Columns `hour,sample_kwh`.
pub fn read_load_history(reader: impl Read) -> Result<Vec<LoadSample>, DduError> {
    read_records(reader, "load history")
}

/// Columns `hour,state_id,count,ratio`.
pub fn read_line_history(reader: impl Read) -> Result<Vec<LineRecord>, DduError> {
    read_records(reader, "line history")
}

pub fn write_load_history(samples: &[LoadSample]) -> Result<String, DduError> {
    write_records(samples)
}

pub fn write_line_history(records: &[LineRecord]) -> Result<String, DduError> {
    write_records(records)
}

fn write_records<T: Serialize>(rows: &[T]) -> Result<String, DduError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| DduError::History(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| DduError::History(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| DduError::History(e.to_string()))
}
