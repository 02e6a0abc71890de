//! Temporary segment spool: newline-delimited JSON, one object per
//! tentative segment, written as the online logger completes them and read
//! back by the post-processor.
//!
//! Record schema (field names are fixed):
//! `{"start_t": .., "end_t": .., "cause": "..", "points": [[t, lat, lon], ..]}`

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoError, Journey, LocationSample};
use crate::gps_fsm::{SegmentCause, SegmentRecord};

#[derive(Debug, Error)]
pub enum SpoolError {
    #[error("spool io: {0}")]
    Io(#[from] std::io::Error),
    #[error("spool line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("spool line {line}: {source}")]
    Invalid { line: usize, source: GeoError },
}

/// One spooled segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpoolRecord {
    pub start_t: i64,
    pub end_t: i64,
    pub cause: SegmentCause,
    pub points: Vec<(i64, f64, f64)>,
}

impl SpoolRecord {
    pub fn from_segment(seg: &SegmentRecord) -> Self {
        Self {
            start_t: seg.points.first().map(|p| p.t).unwrap_or(0),
            end_t: seg.points.last().map(|p| p.t).unwrap_or(0),
            cause: seg.cause,
            points: seg.points.iter().map(|p| (p.t, p.lat, p.lon)).collect(),
        }
    }

    pub fn to_journey(&self) -> Result<Journey, GeoError> {
        Journey::from_points(
            self.points.iter().map(|&(t, lat, lon)| LocationSample::new(t, lat, lon)).collect(),
        )
    }
}

/// Appending writer over any byte sink.
pub struct SpoolWriter<W: Write> {
    out: W,
}

impl SpoolWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self, SpoolError> {
        Ok(SpoolWriter { out: BufWriter::new(File::create(path)?) })
    }
}

impl<W: Write> SpoolWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn append(&mut self, seg: &SegmentRecord) -> Result<(), SpoolError> {
        let rec = SpoolRecord::from_segment(seg);
        serde_json::to_writer(&mut self.out, &rec)
            .map_err(|e| SpoolError::Parse { line: 0, source: e })?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), SpoolError> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_spool(path: &Path, segments: &[SegmentRecord]) -> Result<(), SpoolError> {
    let mut w = SpoolWriter::create(path)?;
    for s in segments {
        w.append(s)?;
    }
    w.finish()
}

/// Writes already-spooled records back out in the same format.
pub fn write_spool_records(path: &Path, records: &[SpoolRecord]) -> Result<(), SpoolError> {
    let mut out = BufWriter::new(File::create(path)?);
    for rec in records {
        serde_json::to_writer(&mut out, rec).map_err(|e| SpoolError::Parse { line: 0, source: e })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_spool(path: &Path) -> Result<Vec<SpoolRecord>, SpoolError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SpoolRecord = serde_json::from_str(&line)
            .map_err(|e| SpoolError::Parse { line: i + 1, source: e })?;
        out.push(rec);
    }
    Ok(out)
}

/// Converts spooled records to journeys, recomputing derived fields.
pub fn spool_to_journeys(records: &[SpoolRecord]) -> Result<Vec<Journey>, SpoolError> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| r.to_journey().map_err(|e| SpoolError::Invalid { line: i + 1, source: e }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(t0: i64, cause: SegmentCause) -> SegmentRecord {
        SegmentRecord {
            points: vec![
                LocationSample::new(t0, 35.0, 14.0),
                LocationSample::new(t0 + 2000, 35.0001, 14.0001),
                LocationSample::new(t0 + 4000, 35.0002, 14.0002),
            ],
            start_window: 0,
            end_window: 2,
            cause,
        }
    }

    #[test]
    fn roundtrip_preserves_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("segments.jsonl");
        let segs = vec![seg(0, SegmentCause::StopTrigger), seg(100_000, SegmentCause::SignalTimeout)];
        write_spool(&path, &segs).unwrap();
        let recs = read_spool(&path).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].start_t, 0);
        assert_eq!(recs[0].end_t, 4000);
        assert_eq!(recs[0].cause, SegmentCause::StopTrigger);
        assert_eq!(recs[1].cause, SegmentCause::SignalTimeout);
        let journeys = spool_to_journeys(&recs).unwrap();
        assert_eq!(journeys[0].len(), 3);
    }

    #[test]
    fn schema_field_names_are_fixed() {
        let rec = SpoolRecord::from_segment(&seg(0, SegmentCause::UserStop));
        let json = serde_json::to_value(&rec).unwrap();
        assert!(json.get("start_t").is_some());
        assert!(json.get("end_t").is_some());
        assert_eq!(json["cause"], "user_stop");
        assert_eq!(json["points"][0][0], 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"start_t\": 1}\n").unwrap();
        match read_spool(&path) {
            Err(SpoolError::Parse { line: 1, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
