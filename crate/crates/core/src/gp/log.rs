use std::io::{Read, Write};

use super::evolve::GenerationStats;
use super::GpError;

/// Writes per-generation rows as CSV with a header.
pub fn write_log<W: Write>(out: W, rows: &[GenerationStats]) -> Result<(), GpError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["generation", "best", "mean", "median", "best_tokens"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log<R: Read>(input: R) -> Result<Vec<GenerationStats>, GpError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(GpError::from)).collect()
}
