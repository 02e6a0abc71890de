//! Online GPS journey logger.
//!
//! A four-state machine (Idle, Searching, Found, Logging) consumes averaged
//! window points and emits tentative journey segments. Starts and stops are
//! detected by a run of consecutive window velocities beyond a threshold
//! plus an aggregate-displacement speed condition; stop searching is gated
//! by a displacement hysteresis over the last `hysteresis_len` windows so
//! junction waits do not split journeys. Satellite loss and fix-gap
//! watchdogs close or flush the machine from outside the window stream.
//!
//! The online phase is deliberately optimistic: it over-detects and leaves
//! corrections to the offline post-processor.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::downsample::{DownsampleError, Downsampler, WindowPoint};
use crate::geo::{haversine, LocationSample};

#[derive(Debug, Error, PartialEq)]
pub enum GpsFsmError {
    #[error("window at {t} not after previous window at {prev}")]
    OutOfOrderWindow { t: i64, prev: i64 },
    #[error("event at {t} earlier than already-processed {prev}")]
    OutOfOrderEvent { t: i64, prev: i64 },
    #[error(transparent)]
    Downsample(#[from] DownsampleError),
}

/// States of the online logger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpsFsmState {
    /// Buffer still too short to compute a velocity.
    Idle,
    /// Scanning window velocities for a start trigger.
    Searching,
    /// Start trigger found; buffering until stop detection is possible.
    Found,
    /// Journey being logged; displacement gate and stop scan active.
    Logging,
}

impl GpsFsmState {
    /// True in Found and Logging, when an open segment exists.
    pub fn is_active(self) -> bool {
        matches!(self, GpsFsmState::Found | GpsFsmState::Logging)
    }
}

/// Why a segment was closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentCause {
    StopTrigger,
    SignalTimeout,
    UserStop,
}

/// A tentative journey emitted by the online logger: the raw fixes from the
/// start anchor to the detected stop, plus the window index range covered.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub points: Vec<LocationSample>,
    pub start_window: u64,
    pub end_window: u64,
    pub cause: SegmentCause,
}

/// Thresholds and buffer sizes for the online logger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFsmParams {
    /// Instantaneous window-velocity threshold, m/s.
    pub v_inst: f64,
    /// Aggregate (first-to-last of the chain) velocity threshold, m/s.
    pub v_cum: f64,
    /// Number of consecutive window velocities forming a trigger.
    pub chain_len: usize,
    /// Window buffer length over which stops are searched.
    pub hysteresis_len: usize,
    /// Displacement gate: stop searching starts only when the net
    /// displacement over the buffer falls below this, in meters.
    pub displacement_m: f64,
    /// Satellite count below which the signal counts as lost.
    pub sat_min: u32,
    /// Seconds of continuous low satellite count before closing.
    pub sat_timeout_s: f64,
    /// Seconds without any fix before the watchdog closes or flushes.
    pub watchdog_timeout_s: f64,
}

impl Default for GpsFsmParams {
    fn default() -> Self {
        Self {
            v_inst: 1.0,
            v_cum: 1.0,
            chain_len: 3,
            hysteresis_len: 25,
            displacement_m: 30.0,
            sat_min: 5,
            sat_timeout_s: 40.0,
            watchdog_timeout_s: 60.0,
        }
    }
}

impl GpsFsmParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.v_inst <= 0.0 || self.v_cum <= 0.0 {
            return Err("velocity thresholds must be positive".into());
        }
        if self.chain_len == 0 || self.hysteresis_len == 0 {
            return Err("chain and hysteresis lengths must be positive".into());
        }
        if self.chain_len > self.hysteresis_len {
            return Err("chain length must not exceed hysteresis length".into());
        }
        if self.displacement_m <= 0.0 || self.sat_timeout_s <= 0.0 || self.watchdog_timeout_s <= 0.0
        {
            return Err("distance and timeout parameters must be positive".into());
        }
        Ok(())
    }
}

fn window_speed(a: &WindowPoint, b: &WindowPoint) -> f64 {
    let dt_s = (b.t - a.t).abs() as f64 / 1000.0;
    if dt_s == 0.0 {
        return 0.0;
    }
    haversine(a.pos, b.pos) / dt_s
}

/// Scans `windows` (oldest first) for the earliest start trigger.
///
/// A trigger anchored at index `a` requires the `chain_len` velocities over
/// windows `a..=a+chain_len` to all exceed `v_inst`, and the aggregate speed
/// from window `a+1` to window `a+chain_len` to exceed `v_cum`. Returns the
/// anchor index `a`, the window at which the journey is taken to begin.
pub fn check_start_trigger(windows: &[WindowPoint], params: &GpsFsmParams) -> Option<usize> {
    let m = params.chain_len;
    if windows.len() < m + 1 {
        return None;
    }
    'anchor: for a in 0..=(windows.len() - 1 - m) {
        for n in a + 1..=a + m {
            if window_speed(&windows[n - 1], &windows[n]) <= params.v_inst {
                continue 'anchor;
            }
        }
        if window_speed(&windows[a + 1], &windows[a + m]) > params.v_cum {
            return Some(a);
        }
    }
    None
}

/// Scans `windows` (oldest first) for the earliest stop trigger.
///
/// A stop at index `j` requires the `chain_len` velocities over windows
/// `j..=j+chain_len` to all fall below `v_inst` and the aggregate speed from
/// window `j+1` to `j+chain_len` to fall below `v_cum`. The displacement
/// gate is the caller's responsibility; timeout paths bypass it.
pub fn check_stop_trigger(windows: &[WindowPoint], params: &GpsFsmParams) -> Option<usize> {
    let m = params.chain_len;
    if windows.len() < m + 1 {
        return None;
    }
    'stop: for j in 0..=(windows.len() - 1 - m) {
        for n in j + 1..=j + m {
            if window_speed(&windows[n - 1], &windows[n]) >= params.v_inst {
                continue 'stop;
            }
        }
        if window_speed(&windows[j + 1], &windows[j + m]) < params.v_cum {
            return Some(j);
        }
    }
    None
}

#[derive(Debug, Clone)]
struct WindowEntry {
    point: WindowPoint,
    raw: Vec<LocationSample>,
    /// Velocity from the previous buffered window; None for the first
    /// window after a flush.
    speed_from_prev: Option<f64>,
    index: u64,
}

#[derive(Debug, Clone)]
struct OpenSegment {
    start_window: u64,
    points: Vec<LocationSample>,
}

/// The window-level state machine. Feed it one `WindowPoint` (plus that
/// window's raw fixes) at a time; closures driven by timeouts or session
/// end come through [`GpsFsm::close_forced`] and [`GpsFsm::flush_idle`].
#[derive(Debug, Clone)]
pub struct GpsFsm {
    params: GpsFsmParams,
    state: GpsFsmState,
    buffer: VecDeque<WindowEntry>,
    window_count: u64,
    run_len: usize,
    open: Option<OpenSegment>,
}

impl GpsFsm {
    pub fn new(params: GpsFsmParams) -> Self {
        Self {
            params,
            state: GpsFsmState::Idle,
            buffer: VecDeque::new(),
            window_count: 0,
            run_len: 0,
            open: None,
        }
    }

    pub fn state(&self) -> GpsFsmState {
        self.state
    }

    pub fn params(&self) -> &GpsFsmParams {
        &self.params
    }

    /// Number of windows currently buffered (bounded by `hysteresis_len`).
    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn windows_seen(&self) -> u64 {
        self.window_count
    }

    /// Advances the machine one window cycle. `raw` holds the fixes that
    /// produced this window. Returns any segments completed this cycle: a
    /// stop trigger immediately followed by a fresh start closes one
    /// segment and opens another within the same call.
    pub fn on_window(
        &mut self,
        point: WindowPoint,
        raw: &[LocationSample],
    ) -> Result<Vec<SegmentRecord>, GpsFsmError> {
        if let Some(back) = self.buffer.back() {
            if point.t <= back.point.t {
                return Err(GpsFsmError::OutOfOrderWindow { t: point.t, prev: back.point.t });
            }
        }
        let speed_from_prev = self.buffer.back().map(|b| window_speed(&b.point, &point));
        let index = self.window_count;
        self.window_count += 1;
        self.buffer.push_back(WindowEntry {
            point,
            raw: raw.to_vec(),
            speed_from_prev,
            index,
        });
        while self.buffer.len() > self.params.hysteresis_len {
            self.buffer.pop_front();
        }
        if let Some(open) = self.open.as_mut() {
            open.points.extend_from_slice(raw);
        }
        match speed_from_prev {
            Some(v) if v > self.params.v_inst => self.run_len += 1,
            Some(_) => self.run_len = 0,
            None => self.run_len = 0,
        }

        let mut out = Vec::new();
        match self.state {
            GpsFsmState::Idle => {
                if self.buffer.len() >= 2 {
                    self.state = GpsFsmState::Searching;
                }
            }
            GpsFsmState::Searching => {
                if let Some(anchor) = self.incremental_start_anchor() {
                    self.begin_segment(anchor);
                    self.state = GpsFsmState::Found;
                }
            }
            GpsFsmState::Found => {
                let start = self.open.as_ref().expect("Found implies open segment").start_window;
                if index - start + 1 >= self.params.hysteresis_len as u64 {
                    self.state = GpsFsmState::Logging;
                }
            }
            GpsFsmState::Logging => {
                if self.buffer.len() == self.params.hysteresis_len && self.gate_passes() {
                    self.end_of_journey(&mut out);
                }
            }
        }
        Ok(out)
    }

    /// Net displacement over the buffer below the gate threshold?
    fn gate_passes(&self) -> bool {
        let (front, back) = match (self.buffer.front(), self.buffer.back()) {
            (Some(f), Some(b)) => (f, b),
            _ => return false,
        };
        haversine(front.point.pos, back.point.pos) < self.params.displacement_m
    }

    /// Start trigger on the newest `chain_len` velocities, anchored one
    /// window before the run. Only the newest candidate needs checking:
    /// older anchors were evaluated on earlier cycles.
    fn incremental_start_anchor(&self) -> Option<usize> {
        let m = self.params.chain_len;
        let n = self.buffer.len();
        if self.run_len < m || n < m + 1 {
            return None;
        }
        let agg = window_speed(&self.buffer[n - m].point, &self.buffer[n - 1].point);
        (agg > self.params.v_cum).then_some(n - 1 - m)
    }

    fn begin_segment(&mut self, anchor: usize) {
        let start_window = self.buffer[anchor].index;
        let mut points = Vec::new();
        for entry in self.buffer.iter().skip(anchor) {
            points.extend_from_slice(&entry.raw);
        }
        self.open = Some(OpenSegment { start_window, points });
    }

    /// Gate passed while logging: locate the stop, close the segment there
    /// (or at the newest window if no trigger is found), then look for a
    /// journey that may have started in the meantime.
    fn end_of_journey(&mut self, out: &mut Vec<SegmentRecord>) {
        let windows: Vec<WindowPoint> = self.buffer.iter().map(|e| e.point).collect();
        match self.buffered_stop_scan(0) {
            Some(j) => {
                out.extend(self.close_at(j, SegmentCause::StopTrigger));
                if let Some(anchor) = self.start_scan_after(&windows, j) {
                    self.begin_segment(anchor);
                    self.state = GpsFsmState::Found;
                } else {
                    self.recompute_run();
                    self.state = GpsFsmState::Searching;
                }
            }
            None => {
                out.extend(self.close_at(self.buffer.len() - 1, SegmentCause::StopTrigger));
                self.recompute_run();
                self.state = GpsFsmState::Searching;
            }
        }
    }

    /// Stop scan over buffered velocities starting at buffer index `from`.
    /// Uses the stored per-entry velocities so a post-flush boundary (None)
    /// can never satisfy the chain.
    fn buffered_stop_scan(&self, from: usize) -> Option<usize> {
        let m = self.params.chain_len;
        let n = self.buffer.len();
        if n < m + 1 {
            return None;
        }
        'stop: for j in from..=(n - 1 - m) {
            for k in j + 1..=j + m {
                match self.buffer[k].speed_from_prev {
                    Some(v) if v < self.params.v_inst => {}
                    _ => continue 'stop,
                }
            }
            let agg = window_speed(&self.buffer[j + 1].point, &self.buffer[j + m].point);
            if agg < self.params.v_cum {
                return Some(j);
            }
        }
        None
    }

    fn start_scan_after(&self, windows: &[WindowPoint], stop: usize) -> Option<usize> {
        if stop + 1 >= windows.len() {
            return None;
        }
        check_start_trigger(&windows[stop + 1..], &self.params).map(|a| a + stop + 1)
    }

    /// Closes the open segment at buffer index `end`, trimming raw points
    /// past that window. Segments with fewer than two points are dropped.
    fn close_at(&mut self, end: usize, cause: SegmentCause) -> Option<SegmentRecord> {
        let open = self.open.take()?;
        let end_entry = &self.buffer[end];
        let end_t = end_entry.point.t;
        let end_window = end_entry.index;
        let mut points = open.points;
        points.retain(|p| p.t <= end_t);
        if points.len() < 2 {
            return None;
        }
        Some(SegmentRecord { points, start_window: open.start_window, end_window, cause })
    }

    fn recompute_run(&mut self) {
        self.run_len = self
            .buffer
            .iter()
            .rev()
            .take_while(|e| matches!(e.speed_from_prev, Some(v) if v > self.params.v_inst))
            .count();
    }

    /// Forced closure from a timeout or session end. Runs the stop scan
    /// with the displacement gate bypassed, closing at the located stop or
    /// at the newest buffered window. Leaves the machine inactive but does
    /// not flush the buffer; callers decide whether to.
    pub fn close_forced(&mut self, cause: SegmentCause) -> Option<SegmentRecord> {
        let open = self.open.as_ref()?;
        if self.buffer.is_empty() {
            self.open = None;
            self.state = GpsFsmState::Searching;
            return None;
        }
        // Never place the stop before the segment anchor (relevant in Found,
        // where pre-anchor windows are still buffered).
        let front_index = self.buffer.front().unwrap().index;
        let anchor_pos = open.start_window.saturating_sub(front_index) as usize;
        let j = self
            .buffered_stop_scan(anchor_pos)
            .unwrap_or(self.buffer.len() - 1)
            .max(anchor_pos);
        let rec = self.close_at(j, cause);
        self.recompute_run();
        self.state = GpsFsmState::Searching;
        rec
    }

    /// Discards buffers and any open segment; back to Idle.
    pub fn flush_idle(&mut self) {
        self.buffer.clear();
        self.open = None;
        self.run_len = 0;
        self.state = GpsFsmState::Idle;
    }
}

/// One record from the GPS subsystem during replay: a fix, or a satellite
/// status report without a fix (as happens indoors).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GpsEvent {
    Fix(LocationSample),
    Status { t: i64, sats: u32 },
}

impl GpsEvent {
    pub fn t(&self) -> i64 {
        match self {
            GpsEvent::Fix(s) => s.t,
            GpsEvent::Status { t, .. } => *t,
        }
    }
}

/// The full online logger: down-sampler, window FSM, satellite-loss clock
/// and fix-gap watchdog, driven as a single serialized event stream.
///
/// Timers fire at their due timestamps: every entry point first settles any
/// timer that became due strictly before the new event, so replay is
/// deterministic regardless of call batching.
#[derive(Debug, Clone)]
pub struct GpsLogger {
    params: GpsFsmParams,
    downsampler: Downsampler,
    fsm: GpsFsm,
    pending_raw: Vec<LocationSample>,
    last_event_t: Option<i64>,
    last_fix_t: Option<i64>,
    watchdog_fired: bool,
    sat_low_since: Option<i64>,
    sat_timeout_fired: bool,
}

impl GpsLogger {
    pub fn new(params: GpsFsmParams, window: usize) -> Self {
        Self {
            params,
            downsampler: Downsampler::new(window),
            fsm: GpsFsm::new(params),
            pending_raw: Vec::new(),
            last_event_t: None,
            last_fix_t: None,
            watchdog_fired: false,
            sat_low_since: None,
            sat_timeout_fired: false,
        }
    }

    pub fn state(&self) -> GpsFsmState {
        self.fsm.state()
    }

    pub fn fsm(&self) -> &GpsFsm {
        &self.fsm
    }

    fn watchdog_due(&self) -> Option<i64> {
        match (self.last_fix_t, self.watchdog_fired) {
            (Some(t), false) => Some(t + (self.params.watchdog_timeout_s * 1000.0) as i64),
            _ => None,
        }
    }

    fn sat_due(&self) -> Option<i64> {
        match (self.sat_low_since, self.sat_timeout_fired) {
            (Some(t), false) => Some(t + (self.params.sat_timeout_s * 1000.0) as i64),
            _ => None,
        }
    }

    /// Fires every timer due at or before `now`, in due order.
    pub fn advance(&mut self, now: i64) -> Vec<SegmentRecord> {
        let mut out = Vec::new();
        loop {
            let wd = self.watchdog_due().filter(|d| *d <= now);
            let sat = self.sat_due().filter(|d| *d <= now);
            match (wd, sat) {
                (None, None) => break,
                (Some(w), Some(s)) if s < w => self.fire_sat_timeout(&mut out),
                (Some(_), _) => self.fire_watchdog(&mut out),
                (None, Some(_)) => self.fire_sat_timeout(&mut out),
            }
        }
        out
    }

    fn fire_watchdog(&mut self, out: &mut Vec<SegmentRecord>) {
        self.watchdog_fired = true;
        self.signal_lost(out);
    }

    fn fire_sat_timeout(&mut self, out: &mut Vec<SegmentRecord>) {
        self.sat_timeout_fired = true;
        self.signal_lost(out);
    }

    /// Common closure path for both timeouts: flush the partial window into
    /// the machine, close the journey if one was being logged, then flush
    /// everything to Idle.
    fn signal_lost(&mut self, out: &mut Vec<SegmentRecord>) {
        self.flush_partial(out);
        if self.fsm.state() == GpsFsmState::Logging {
            out.extend(self.fsm.close_forced(SegmentCause::SignalTimeout));
        }
        self.fsm.flush_idle();
        self.downsampler.clear();
        self.pending_raw.clear();
    }

    fn flush_partial(&mut self, out: &mut Vec<SegmentRecord>) {
        if let Some(wp) = self.downsampler.flush() {
            let raw = std::mem::take(&mut self.pending_raw);
            // Ordering is preserved by construction, so this cannot fail.
            out.extend(self.fsm.on_window(wp, &raw).expect("flushed window is in order"));
        } else {
            self.pending_raw.clear();
        }
    }

    fn check_order(&mut self, t: i64) -> Result<(), GpsFsmError> {
        if let Some(prev) = self.last_event_t {
            if t < prev {
                return Err(GpsFsmError::OutOfOrderEvent { t, prev });
            }
        }
        self.last_event_t = Some(t);
        Ok(())
    }

    fn update_sat_clock(&mut self, t: i64, sats: u32) {
        if sats < self.params.sat_min {
            if self.sat_low_since.is_none() {
                self.sat_low_since = Some(t);
                self.sat_timeout_fired = false;
            }
        } else {
            self.sat_low_since = None;
            self.sat_timeout_fired = false;
        }
    }

    /// Processes one GPS fix.
    pub fn on_fix(&mut self, s: LocationSample) -> Result<Vec<SegmentRecord>, GpsFsmError> {
        let mut out = self.advance(s.t);
        self.check_order(s.t)?;
        self.last_fix_t = Some(s.t);
        self.watchdog_fired = false;
        if let Some(sats) = s.sats {
            self.update_sat_clock(s.t, sats);
        }
        self.pending_raw.push(s);
        if let Some(wp) = self.downsampler.push(&s)? {
            let raw = std::mem::take(&mut self.pending_raw);
            out.extend(self.fsm.on_window(wp, &raw)?);
        }
        Ok(out)
    }

    /// Processes a satellite status report that carried no fix.
    pub fn on_status(&mut self, t: i64, sats: u32) -> Result<Vec<SegmentRecord>, GpsFsmError> {
        let out = self.advance(t);
        self.check_order(t)?;
        self.update_sat_clock(t, sats);
        Ok(out)
    }

    pub fn on_event(&mut self, ev: &GpsEvent) -> Result<Vec<SegmentRecord>, GpsFsmError> {
        match ev {
            GpsEvent::Fix(s) => self.on_fix(*s),
            GpsEvent::Status { t, sats } => self.on_status(*t, *sats),
        }
    }

    /// Ends the session at `t`: settles timers, flushes the partial window,
    /// closes any active journey as a user stop and goes Idle.
    pub fn finish(&mut self, t: i64) -> Vec<SegmentRecord> {
        let mut out = self.advance(t);
        self.flush_partial(&mut out);
        if self.fsm.state().is_active() {
            out.extend(self.fsm.close_forced(SegmentCause::UserStop));
        }
        self.fsm.flush_idle();
        self.downsampler.clear();
        out
    }
}
