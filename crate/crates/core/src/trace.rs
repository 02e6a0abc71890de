//! Trace file ingestion and emission.
//!
//! A trace is a directory of CSV streams:
//! - `gps.csv`    header `t_ms,lat,lon,sats`. Rows with both lat and lon
//!   blank are satellite status reports without a fix (sats required);
//!   a blank sats field on a fix means the count is unknown.
//! - `accel.csv`  header `t_ms,ax,ay,az`.
//! - `pings.csv`  header `t_ms,label` (optional annotator marks).
//!
//! Leading `# key=value` comment lines carry capture metadata. Battery
//! logs (`t_ms,level_pct[,voltage_mv]`), diaries (`start_t_ms,end_t_ms
//! [,diag_m]`), journey JSON and state-timeline CSV round-trip through the
//! helpers here as well.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{GlobalState, StateInterval, StateTimeline};
use crate::geo::{Journey, LocationSample};
use crate::gps_fsm::GpsEvent;
use crate::motion::AccelSample;
use crate::tuning::DiaryEntry;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}:{line}: timestamps not strictly increasing")]
    Ordering { path: PathBuf, line: usize },
    #[error("trace directory {0} has neither gps.csv nor accel.csv")]
    EmptyTrace(PathBuf),
    #[error("{path}: {msg}")]
    Json { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TraceError + '_ {
    move |source| TraceError::Io { path: path.to_path_buf(), source }
}

/// Satellite status report carrying no position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatStatus {
    pub t: i64,
    pub sats: u32,
}

/// Annotator mark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ping {
    pub t: i64,
    pub label: String,
}

/// Capture metadata from the comment header.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMeta {
    pub device: Option<String>,
    pub gps_rate_hz: Option<f64>,
    pub accel_rate_hz: Option<f64>,
}

/// One captured session: independently time-sorted sensor streams.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceBundle {
    pub gps: Vec<LocationSample>,
    pub sat_status: Vec<SatStatus>,
    pub accel: Vec<AccelSample>,
    pub pings: Vec<Ping>,
    pub meta: TraceMeta,
}

impl TraceBundle {
    /// Fixes and status reports merged into one time-ordered event stream.
    pub fn gps_events(&self) -> Vec<GpsEvent> {
        let mut events: Vec<GpsEvent> = self
            .gps
            .iter()
            .map(|s| GpsEvent::Fix(*s))
            .chain(self.sat_status.iter().map(|s| GpsEvent::Status { t: s.t, sats: s.sats }))
            .collect();
        events.sort_by_key(|e| e.t());
        events
    }

    /// Overall [first, last] timestamp across all streams.
    pub fn span(&self) -> Option<(i64, i64)> {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for t in self
            .gps
            .iter()
            .map(|s| s.t)
            .chain(self.sat_status.iter().map(|s| s.t))
            .chain(self.accel.iter().map(|s| s.t))
        {
            lo = lo.min(t);
            hi = hi.max(t);
        }
        (lo <= hi).then_some((lo, hi))
    }
}

struct CsvFile {
    path: PathBuf,
    meta: Vec<(String, String)>,
    /// (line number, fields)
    rows: Vec<(usize, Vec<String>)>,
}

fn read_csv(path: &Path, expected_header: &[&str]) -> Result<CsvFile, TraceError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut meta = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if header.is_empty() {
            header = line.split(',').map(|s| s.trim().to_string()).collect();
            let matches = header.iter().map(String::as_str).eq(expected_header.iter().copied());
            if !matches {
                return Err(TraceError::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!(
                        "expected header {:?}, found {:?}",
                        expected_header.join(","),
                        line
                    ),
                });
            }
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != expected_header.len()
            && !(fields.len() == expected_header.len() - 1 && expected_header.last() == Some(&"sats"))
        {
            return Err(TraceError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("expected {} fields, found {}", expected_header.len(), fields.len()),
            });
        }
        rows.push((line_no, fields));
    }
    Ok(CsvFile { path: path.to_path_buf(), meta, rows })
}

fn parse_field<T: std::str::FromStr>(
    file: &CsvFile,
    line: usize,
    name: &str,
    raw: &str,
) -> Result<T, TraceError> {
    raw.parse().map_err(|_| TraceError::Parse {
        path: file.path.clone(),
        line,
        msg: format!("invalid {name}: {raw:?}"),
    })
}

type GpsCsvContents = (Vec<LocationSample>, Vec<SatStatus>, Vec<(String, String)>);

fn load_gps_csv(path: &Path) -> Result<GpsCsvContents, TraceError> {
    let file = read_csv(path, &["t_ms", "lat", "lon", "sats"])?;
    let mut fixes = Vec::new();
    let mut status = Vec::new();
    let mut last_t: Option<i64> = None;
    for (line, fields) in &file.rows {
        let t: i64 = parse_field(&file, *line, "t_ms", &fields[0])?;
        if let Some(prev) = last_t {
            if t <= prev {
                return Err(TraceError::Ordering { path: file.path.clone(), line: *line });
            }
        }
        last_t = Some(t);
        let lat_raw = fields[1].as_str();
        let lon_raw = fields[2].as_str();
        let sats_raw = fields.get(3).map(String::as_str).unwrap_or("");
        let sats: Option<u32> = if sats_raw.is_empty() {
            None
        } else {
            Some(parse_field(&file, *line, "sats", sats_raw)?)
        };
        match (lat_raw.is_empty(), lon_raw.is_empty()) {
            (false, false) => {
                let lat: f64 = parse_field(&file, *line, "lat", lat_raw)?;
                let lon: f64 = parse_field(&file, *line, "lon", lon_raw)?;
                let sample = LocationSample { t, lat, lon, sats };
                sample.validate().map_err(|e| TraceError::Parse {
                    path: file.path.clone(),
                    line: *line,
                    msg: e.to_string(),
                })?;
                fixes.push(sample);
            }
            (true, true) => {
                let sats = sats.ok_or_else(|| TraceError::Parse {
                    path: file.path.clone(),
                    line: *line,
                    msg: "status row needs a satellite count".into(),
                })?;
                status.push(SatStatus { t, sats });
            }
            _ => {
                return Err(TraceError::Parse {
                    path: file.path.clone(),
                    line: *line,
                    msg: "lat and lon must be both present or both blank".into(),
                });
            }
        }
    }
    Ok((fixes, status, file.meta))
}

fn load_accel_csv(path: &Path) -> Result<Vec<AccelSample>, TraceError> {
    let file = read_csv(path, &["t_ms", "ax", "ay", "az"])?;
    let mut out: Vec<AccelSample> = Vec::with_capacity(file.rows.len());
    for (line, fields) in &file.rows {
        let t: i64 = parse_field(&file, *line, "t_ms", &fields[0])?;
        if let Some(prev) = out.last() {
            if t <= prev.t {
                return Err(TraceError::Ordering { path: file.path.clone(), line: *line });
            }
        }
        out.push(AccelSample {
            t,
            ax: parse_field(&file, *line, "ax", &fields[1])?,
            ay: parse_field(&file, *line, "ay", &fields[2])?,
            az: parse_field(&file, *line, "az", &fields[3])?,
        });
    }
    Ok(out)
}

fn load_pings_csv(path: &Path) -> Result<Vec<Ping>, TraceError> {
    let file = read_csv(path, &["t_ms", "label"])?;
    let mut out: Vec<Ping> = Vec::with_capacity(file.rows.len());
    for (line, fields) in &file.rows {
        let t: i64 = parse_field(&file, *line, "t_ms", &fields[0])?;
        if let Some(prev) = out.last() {
            if t <= prev.t {
                return Err(TraceError::Ordering { path: file.path.clone(), line: *line });
            }
        }
        out.push(Ping { t, label: fields[1].clone() });
    }
    Ok(out)
}

fn apply_meta(meta: &mut TraceMeta, pairs: &[(String, String)]) {
    for (k, v) in pairs {
        match k.as_str() {
            "device" => meta.device = Some(v.clone()),
            "gps_rate_hz" => meta.gps_rate_hz = v.parse().ok(),
            "accel_rate_hz" => meta.accel_rate_hz = v.parse().ok(),
            _ => {}
        }
    }
}

/// Loads a single GPS CSV (fixes plus status rows) outside a trace dir.
pub fn load_gps_file(path: &Path) -> Result<(Vec<LocationSample>, Vec<SatStatus>), TraceError> {
    let (fixes, status, _) = load_gps_csv(path)?;
    Ok((fixes, status))
}

/// Loads a single accelerometer CSV outside a trace dir.
pub fn load_accel_file(path: &Path) -> Result<Vec<AccelSample>, TraceError> {
    load_accel_csv(path)
}

/// Loads a trace directory; `gps.csv` and `accel.csv` are each optional but
/// at least one must exist.
pub fn load_trace(dir: &Path) -> Result<TraceBundle, TraceError> {
    let mut bundle = TraceBundle::default();
    let gps_path = dir.join("gps.csv");
    let accel_path = dir.join("accel.csv");
    let pings_path = dir.join("pings.csv");
    let mut found = false;
    if gps_path.exists() {
        let (fixes, status, meta) = load_gps_csv(&gps_path)?;
        bundle.gps = fixes;
        bundle.sat_status = status;
        apply_meta(&mut bundle.meta, &meta);
        found = true;
    }
    if accel_path.exists() {
        bundle.accel = load_accel_csv(&accel_path)?;
        found = true;
    }
    if pings_path.exists() {
        bundle.pings = load_pings_csv(&pings_path)?;
    }
    if !found {
        return Err(TraceError::EmptyTrace(dir.to_path_buf()));
    }
    Ok(bundle)
}

fn meta_comments(meta: &TraceMeta) -> String {
    let mut s = String::new();
    if let Some(d) = &meta.device {
        s.push_str(&format!("# device={d}\n"));
    }
    if let Some(r) = meta.gps_rate_hz {
        s.push_str(&format!("# gps_rate_hz={r}\n"));
    }
    if let Some(r) = meta.accel_rate_hz {
        s.push_str(&format!("# accel_rate_hz={r}\n"));
    }
    s
}

/// Writes a trace directory that [`load_trace`] accepts.
pub fn save_trace(dir: &Path, bundle: &TraceBundle) -> Result<(), TraceError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let gps_path = dir.join("gps.csv");
    let mut out = meta_comments(&bundle.meta);
    out.push_str("t_ms,lat,lon,sats\n");
    for ev in self::TraceBundle::gps_events(bundle) {
        match ev {
            GpsEvent::Fix(s) => {
                let sats = s.sats.map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!("{},{},{},{}\n", s.t, s.lat, s.lon, sats));
            }
            GpsEvent::Status { t, sats } => {
                out.push_str(&format!("{t},,,{sats}\n"));
            }
        }
    }
    fs::write(&gps_path, out).map_err(io_err(&gps_path))?;

    let accel_path = dir.join("accel.csv");
    let mut out = String::from("t_ms,ax,ay,az\n");
    for s in &bundle.accel {
        out.push_str(&format!("{},{},{},{}\n", s.t, s.ax, s.ay, s.az));
    }
    fs::write(&accel_path, out).map_err(io_err(&accel_path))?;

    if !bundle.pings.is_empty() {
        let pings_path = dir.join("pings.csv");
        let mut out = String::from("t_ms,label\n");
        for p in &bundle.pings {
            out.push_str(&format!("{},{}\n", p.t, p.label));
        }
        fs::write(&pings_path, out).map_err(io_err(&pings_path))?;
    }
    Ok(())
}

/// Battery log rows as (t_ms, level %), voltage column ignored if present.
pub fn load_battery_csv(path: &Path) -> Result<Vec<(i64, f64)>, TraceError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out: Vec<(i64, f64)> = Vec::new();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if !line.starts_with("t_ms,level_pct") {
                return Err(TraceError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected header t_ms,level_pct[,voltage_mv], found {line:?}"),
                });
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(TraceError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "expected at least t_ms,level_pct".into(),
            });
        }
        let t: i64 = fields[0].parse().map_err(|_| TraceError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("invalid t_ms: {:?}", fields[0]),
        })?;
        let level: f64 = fields[1].parse().map_err(|_| TraceError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("invalid level_pct: {:?}", fields[1]),
        })?;
        if let Some(prev) = out.last() {
            if t <= prev.0 {
                return Err(TraceError::Ordering { path: path.to_path_buf(), line: i + 1 });
            }
        }
        out.push((t, level));
    }
    Ok(out)
}

// ---- journey JSON ----

#[derive(Serialize, Deserialize)]
struct BoundsJson {
    bl: [f64; 2],
    tr: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct JourneyJson {
    start_t: i64,
    end_t: i64,
    path_length_m: f64,
    bounds: BoundsJson,
    points: Vec<(i64, f64, f64)>,
}

pub fn journeys_to_json(journeys: &[Journey]) -> serde_json::Value {
    let wire: Vec<JourneyJson> = journeys
        .iter()
        .map(|j| JourneyJson {
            start_t: j.start_t,
            end_t: j.end_t,
            path_length_m: j.path_length,
            bounds: BoundsJson {
                bl: [j.bounds.bl.lat, j.bounds.bl.lon],
                tr: [j.bounds.tr.lat, j.bounds.tr.lon],
            },
            points: j.points.iter().map(|p| (p.t, p.lat, p.lon)).collect(),
        })
        .collect();
    serde_json::to_value(wire).expect("journey serialization is infallible")
}

pub fn save_journeys(path: &Path, journeys: &[Journey]) -> Result<(), TraceError> {
    let json = serde_json::to_string_pretty(&journeys_to_json(journeys))
        .expect("journey serialization is infallible");
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(json.as_bytes()).map_err(io_err(path))?;
    f.write_all(b"\n").map_err(io_err(path))?;
    Ok(())
}

pub fn load_journeys(path: &Path) -> Result<Vec<Journey>, TraceError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let wire: Vec<JourneyJson> = serde_json::from_str(&text)
        .map_err(|e| TraceError::Json { path: path.to_path_buf(), msg: e.to_string() })?;
    wire.into_iter()
        .map(|j| {
            Journey::from_points(
                j.points.iter().map(|&(t, lat, lon)| LocationSample::new(t, lat, lon)).collect(),
            )
            .map_err(|e| TraceError::Json { path: path.to_path_buf(), msg: e.to_string() })
        })
        .collect()
}

// ---- diary CSV ----

pub fn save_diary(path: &Path, entries: &[DiaryEntry]) -> Result<(), TraceError> {
    let mut out = String::from("start_t_ms,end_t_ms,diag_m\n");
    for e in entries {
        let diag = e.diag_m.map(|d| d.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", e.start_t, e.end_t, diag));
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn load_diary(path: &Path) -> Result<Vec<DiaryEntry>, TraceError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if !line.starts_with("start_t_ms,end_t_ms") {
                return Err(TraceError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected header start_t_ms,end_t_ms[,diag_m], found {line:?}"),
                });
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(TraceError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "expected start_t_ms,end_t_ms".into(),
            });
        }
        let parse_i64 = |name: &str, raw: &str| -> Result<i64, TraceError> {
            raw.parse().map_err(|_| TraceError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("invalid {name}: {raw:?}"),
            })
        };
        let diag_m = match fields.get(2) {
            Some(s) if !s.is_empty() => Some(s.parse().map_err(|_| TraceError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("invalid diag_m: {s:?}"),
            })?),
            _ => None,
        };
        out.push(DiaryEntry {
            start_t: parse_i64("start_t_ms", fields[0])?,
            end_t: parse_i64("end_t_ms", fields[1])?,
            diag_m,
        });
    }
    Ok(out)
}

// ---- state timeline CSV ----

/// Boundary rows `t_s,state`; the final row marks the span end as `off`.
pub fn save_timeline(path: &Path, timeline: &StateTimeline) -> Result<(), TraceError> {
    let mut out = String::from("t_s,state\n");
    for iv in timeline.intervals() {
        out.push_str(&format!("{},{}\n", iv.start_t as f64 / 1000.0, iv.state.name()));
    }
    if let Some((_, end)) = timeline.span() {
        out.push_str(&format!("{},off\n", end as f64 / 1000.0));
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn load_timeline(path: &Path) -> Result<StateTimeline, TraceError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows: Vec<(i64, GlobalState)> = Vec::new();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != "t_s,state" {
                return Err(TraceError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected header t_s,state, found {line:?}"),
                });
            }
            seen_header = true;
            continue;
        }
        let (t_raw, state_raw) = line.split_once(',').ok_or_else(|| TraceError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: "expected t_s,state".into(),
        })?;
        let t_s: f64 = t_raw.parse().map_err(|_| TraceError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("invalid t_s: {t_raw:?}"),
        })?;
        let state = GlobalState::parse(state_raw).ok_or_else(|| TraceError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("unknown state: {state_raw:?}"),
        })?;
        rows.push(((t_s * 1000.0).round() as i64, state));
    }
    let mut intervals = Vec::new();
    for pair in rows.windows(2) {
        let (t0, state) = pair[0];
        let (t1, _) = pair[1];
        if t1 > t0 {
            intervals.push(StateInterval { start_t: t0, end_t: t1, state });
        }
    }
    StateTimeline::from_intervals(intervals).map_err(|e| TraceError::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_wellformed_gps_csv() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(
            d.join("gps.csv"),
            "# device=s2\nt_ms,lat,lon,sats\n0,35.0,14.0,11\n2000,35.0001,14.0,\n4000,,,2\n",
        )
        .unwrap();
        let bundle = load_trace(d).unwrap();
        assert_eq!(bundle.gps.len(), 2);
        assert_eq!(bundle.gps[0].sats, Some(11));
        assert_eq!(bundle.gps[1].sats, None);
        assert_eq!(bundle.sat_status, vec![SatStatus { t: 4000, sats: 2 }]);
        assert_eq!(bundle.meta.device.as_deref(), Some("s2"));
        let events = bundle.gps_events();
        assert_eq!(events.len(), 3);
        assert!(events.windows(2).all(|w| w[0].t() <= w[1].t()));
    }

    #[test]
    fn rejects_out_of_range_latitude_naming_field() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(d.join("gps.csv"), "t_ms,lat,lon,sats\n0,95.0,14.0,\n").unwrap();
        match load_trace(d) {
            Err(TraceError::Parse { line: 2, msg, .. }) => assert!(msg.contains("lat")),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn rejects_unsorted_and_half_blank_rows() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(d.join("gps.csv"), "t_ms,lat,lon,sats\n10,35.0,14.0,\n5,35.0,14.0,\n")
            .unwrap();
        assert!(matches!(load_trace(d), Err(TraceError::Ordering { line: 3, .. })));

        std::fs::write(d.join("gps.csv"), "t_ms,lat,lon,sats\n10,35.0,,\n").unwrap();
        assert!(matches!(load_trace(d), Err(TraceError::Parse { line: 2, .. })));
    }

    #[test]
    fn missing_trace_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_trace(dir.path()), Err(TraceError::EmptyTrace(_))));
    }

    #[test]
    fn trace_roundtrip_is_exact() {
        let bundle = TraceBundle {
            gps: vec![
                LocationSample::with_sats(0, 35.123456789, 14.5, 9),
                LocationSample::new(2000, 35.1234568, 14.500001),
            ],
            sat_status: vec![SatStatus { t: 4000, sats: 1 }],
            accel: vec![
                AccelSample::new(0, 0.01, -0.02, 9.81),
                AccelSample::new(200, 0.015, -0.01, 9.79),
            ],
            pings: vec![Ping { t: 1000, label: "start".into() }],
            meta: TraceMeta {
                device: Some("s2".into()),
                gps_rate_hz: Some(0.5),
                accel_rate_hz: Some(5.0),
            },
        };
        let dir = tempfile::tempdir().unwrap();
        save_trace(dir.path(), &bundle).unwrap();
        let loaded = load_trace(dir.path()).unwrap();
        assert_eq!(loaded, bundle);
    }

    #[test]
    fn journey_json_roundtrip() {
        let j = Journey::from_points(vec![
            LocationSample::new(0, 35.0, 14.0),
            LocationSample::new(2000, 35.001, 14.002),
            LocationSample::new(4000, 35.002, 14.004),
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journeys.json");
        save_journeys(&path, std::slice::from_ref(&j)).unwrap();
        let loaded = load_journeys(&path).unwrap();
        assert_eq!(loaded, vec![j]);

        // Wire field names are fixed.
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let first = &value[0];
        for key in ["start_t", "end_t", "path_length_m", "bounds", "points"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        assert!(first["bounds"].get("bl").is_some() && first["bounds"].get("tr").is_some());
    }

    #[test]
    fn battery_csv_parses_with_optional_voltage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("battery.csv");
        std::fs::write(&path, "t_ms,level_pct,voltage_mv\n0,100,4200\n900000,99.5,4190\n").unwrap();
        let rows = load_battery_csv(&path).unwrap();
        assert_eq!(rows, vec![(0, 100.0), (900_000, 99.5)]);

        std::fs::write(&path, "t_ms,level_pct\n0,100\n60000,99.9\n").unwrap();
        assert_eq!(load_battery_csv(&path).unwrap().len(), 2);
    }

    #[test]
    fn diary_roundtrip() {
        let entries = vec![
            DiaryEntry { start_t: 1000, end_t: 600_000, diag_m: Some(812.5) },
            DiaryEntry { start_t: 900_000, end_t: 1_500_000, diag_m: None },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("diary.csv");
        save_diary(&path, &entries).unwrap();
        assert_eq!(load_diary(&path).unwrap(), entries);
    }

    #[test]
    fn timeline_roundtrip() {
        let tl = StateTimeline::from_intervals(vec![
            StateInterval { start_t: 0, end_t: 300_000, state: GlobalState::Gps },
            StateInterval { start_t: 300_000, end_t: 900_000, state: GlobalState::Acc },
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("timeline.csv");
        save_timeline(&path, &tl).unwrap();
        let loaded = load_timeline(&path).unwrap();
        assert_eq!(loaded, tl);
    }

    #[test]
    fn status_only_file_loads_without_fixes() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(d.join("gps.csv"), "t_ms,lat,lon,sats\n0,,,3\n2000,,,1\n").unwrap();
        let bundle = load_trace(d).unwrap();
        assert!(bundle.gps.is_empty());
        assert_eq!(bundle.sat_status.len(), 2);
    }
}
