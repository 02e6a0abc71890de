//! Global duty-cycling controller.
//!
//! Replays merged GPS and accelerometer streams through a three-state
//! machine: GPS (actively tracking journeys), ACC (GPS off, watching for
//! significant motion) and OFF (session ended). While in GPS, accelerometer
//! samples are ignored; while in ACC, GPS records are ignored because the
//! receiver would be powered down. Completed segments are spooled and
//! post-processed at every GPS-to-ACC transition and at session stop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Journey;
use crate::gps_fsm::{GpsEvent, GpsFsmError, GpsFsmParams, GpsLogger, SegmentRecord};
use crate::motion::{AccelSample, MotionError, MotionFsm, MotionParams};
use crate::postproc::{self, PostprocError, PostprocParams};
use crate::spool::SpoolRecord;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("session start {0} not before stop {1}")]
    EmptySession(i64, i64),
    #[error("gps events not time-sorted at index {0}")]
    UnsortedGps(usize),
    #[error("accel samples not time-sorted at index {0}")]
    UnsortedAccel(usize),
    #[error("timeline intervals must be contiguous and forward")]
    BadTimeline,
    #[error(transparent)]
    Gps(#[from] GpsFsmError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Postproc(#[from] PostprocError),
}

/// Top-level sensing state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalState {
    Off,
    Gps,
    Acc,
}

impl GlobalState {
    pub fn name(self) -> &'static str {
        match self {
            GlobalState::Off => "off",
            GlobalState::Gps => "gps",
            GlobalState::Acc => "acc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "off" => Some(GlobalState::Off),
            "gps" => Some(GlobalState::Gps),
            "acc" => Some(GlobalState::Acc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateInterval {
    pub start_t: i64,
    pub end_t: i64,
    pub state: GlobalState,
}

/// Contiguous, non-overlapping state intervals covering a replay span.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateTimeline {
    intervals: Vec<StateInterval>,
}

impl StateTimeline {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_intervals(intervals: Vec<StateInterval>) -> Result<Self, ControllerError> {
        for (i, iv) in intervals.iter().enumerate() {
            if iv.end_t <= iv.start_t {
                return Err(ControllerError::BadTimeline);
            }
            if i > 0 && iv.start_t != intervals[i - 1].end_t {
                return Err(ControllerError::BadTimeline);
            }
        }
        Ok(Self { intervals })
    }

    /// Single-state timeline over a span.
    pub fn uniform(start_t: i64, end_t: i64, state: GlobalState) -> Result<Self, ControllerError> {
        Self::from_intervals(vec![StateInterval { start_t, end_t, state }])
    }

    pub fn intervals(&self) -> &[StateInterval] {
        &self.intervals
    }

    pub fn span(&self) -> Option<(i64, i64)> {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(a), Some(b)) => Some((a.start_t, b.end_t)),
            _ => None,
        }
    }

    /// Total time spent in `state`, in hours.
    pub fn hours_in(&self, state: GlobalState) -> f64 {
        self.intervals
            .iter()
            .filter(|iv| iv.state == state)
            .map(|iv| (iv.end_t - iv.start_t) as f64 / 3_600_000.0)
            .sum()
    }

    fn push(&mut self, start_t: i64, end_t: i64, state: GlobalState) {
        if end_t <= start_t {
            return;
        }
        if let Some(last) = self.intervals.last_mut() {
            debug_assert_eq!(last.end_t, start_t);
            if last.state == state {
                last.end_t = end_t;
                return;
            }
        }
        self.intervals.push(StateInterval { start_t, end_t, state });
    }
}

/// Everything the controller needs to replay a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub gps: GpsFsmParams,
    /// Down-sampler window size (raw samples per window point).
    pub window: usize,
    pub motion: MotionParams,
    pub post: PostprocParams,
    /// Seconds of continuous no-journey state before dropping to ACC.
    /// None disables battery saving (GPS stays on all session).
    pub idle_timeout_s: Option<f64>,
    /// Dead time after an ACC->GPS wake before fixes are trusted.
    pub reacquire_delay_s: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            gps: GpsFsmParams::default(),
            window: 3,
            motion: MotionParams::default(),
            post: PostprocParams::default(),
            idle_timeout_s: Some(300.0),
            reacquire_delay_s: 0.0,
        }
    }
}

/// Result of a controller replay: post-processed journeys, the sensing
/// timeline, and the raw spool that produced the journeys.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerOutput {
    pub journeys: Vec<Journey>,
    pub timeline: StateTimeline,
    pub spool: Vec<SpoolRecord>,
}

struct ControllerRun<'a> {
    params: &'a ControllerParams,
    state: GlobalState,
    logger: GpsLogger,
    motion: MotionFsm,
    timeline: StateTimeline,
    state_since: i64,
    /// Time at which the GPS FSM last entered (or re-entered) a
    /// no-journey state; None while a journey is active.
    idle_since: Option<i64>,
    /// Fixes earlier than this are discarded after an ACC->GPS wake.
    gps_trusted_from: i64,
    pending: Vec<SegmentRecord>,
    journeys: Vec<Journey>,
    spool: Vec<SpoolRecord>,
}

impl<'a> ControllerRun<'a> {
    fn new(params: &'a ControllerParams, start_t: i64) -> Self {
        Self {
            params,
            state: GlobalState::Gps,
            logger: GpsLogger::new(params.gps, params.window),
            motion: MotionFsm::new(params.motion),
            timeline: StateTimeline::empty(),
            state_since: start_t,
            idle_since: Some(start_t),
            gps_trusted_from: start_t,
            pending: Vec::new(),
            journeys: Vec::new(),
            spool: Vec::new(),
        }
    }

    fn idle_due(&self) -> Option<i64> {
        let timeout_s = self.params.idle_timeout_s?;
        if self.state != GlobalState::Gps {
            return None;
        }
        Some(self.idle_since? + (timeout_s * 1000.0) as i64)
    }

    fn collect(&mut self, segs: Vec<SegmentRecord>) {
        self.pending.extend(segs);
    }

    /// Note the FSM's activity after an event so the idle clock follows
    /// transitions into and out of journey logging.
    fn track_idle(&mut self, t: i64) {
        if self.logger.state().is_active() {
            self.idle_since = None;
        } else if self.idle_since.is_none() {
            self.idle_since = Some(t);
        }
    }

    fn run_postproc(&mut self) -> Result<(), PostprocError> {
        let segs = std::mem::take(&mut self.pending);
        let mut journeys = Vec::with_capacity(segs.len());
        for seg in &segs {
            let rec = SpoolRecord::from_segment(seg);
            journeys.push(rec.to_journey().expect("segments hold valid ordered points"));
            self.spool.push(rec);
        }
        self.journeys.extend(postproc::run_pipeline(journeys, &self.params.post)?);
        Ok(())
    }

    fn switch_to_acc(&mut self, at: i64) -> Result<(), ControllerError> {
        let segs = self.logger.finish(at);
        self.collect(segs);
        self.run_postproc()?;
        self.timeline.push(self.state_since, at, GlobalState::Gps);
        self.state = GlobalState::Acc;
        self.state_since = at;
        self.idle_since = None;
        self.motion = MotionFsm::new(self.params.motion);
        self.logger = GpsLogger::new(self.params.gps, self.params.window);
        Ok(())
    }

    fn switch_to_gps(&mut self, at: i64) {
        self.timeline.push(self.state_since, at, GlobalState::Acc);
        self.state = GlobalState::Gps;
        self.state_since = at;
        self.idle_since = Some(at);
        self.gps_trusted_from = at + (self.params.reacquire_delay_s * 1000.0) as i64;
    }

    /// Fires any idle timeout due at or before `now`.
    fn settle_timers(&mut self, now: i64) -> Result<(), ControllerError> {
        if let Some(due) = self.idle_due() {
            if due <= now {
                let segs = self.logger.advance(due);
                self.collect(segs);
                self.switch_to_acc(due)?;
            }
        }
        Ok(())
    }

    fn on_gps(&mut self, ev: &GpsEvent) -> Result<(), ControllerError> {
        if self.state != GlobalState::Gps {
            return Ok(());
        }
        if let GpsEvent::Fix(s) = ev {
            if s.t < self.gps_trusted_from {
                return Ok(());
            }
        }
        let segs = self.logger.on_event(ev)?;
        self.collect(segs);
        self.track_idle(ev.t());
        Ok(())
    }

    fn on_accel(&mut self, s: &AccelSample) -> Result<(), ControllerError> {
        match self.state {
            GlobalState::Acc => {
                if let Some(decision) = self.motion.on_sample(s)? {
                    self.switch_to_gps(decision.t);
                }
            }
            GlobalState::Gps => {
                // Sensor itself is ignored, but time still passes for the
                // logger's watchdogs.
                let segs = self.logger.advance(s.t);
                self.collect(segs);
                self.track_idle(s.t);
            }
            GlobalState::Off => {}
        }
        Ok(())
    }

    fn finish(mut self, stop_t: i64) -> Result<ControllerOutput, ControllerError> {
        self.settle_timers(stop_t)?;
        match self.state {
            GlobalState::Gps => {
                let segs = self.logger.finish(stop_t);
                self.collect(segs);
                self.run_postproc()?;
                self.timeline.push(self.state_since, stop_t, GlobalState::Gps);
            }
            GlobalState::Acc => {
                self.timeline.push(self.state_since, stop_t, GlobalState::Acc);
            }
            GlobalState::Off => {}
        }
        self.journeys.sort_by_key(|j| j.start_t);
        Ok(ControllerOutput { journeys: self.journeys, timeline: self.timeline, spool: self.spool })
    }
}

/// Replays a session through the duty-cycling controller.
///
/// Starts in GPS at `session.0`; drops to ACC after `idle_timeout_s` of
/// continuous no-journey state (running the post-processor on the spooled
/// segments); returns to GPS on a significant-motion decision; stops (OFF)
/// at `session.1` with a final post-processing pass. Events outside the
/// session span are ignored. Simultaneous GPS and accelerometer events are
/// processed GPS first.
pub fn run_controller(
    gps_events: &[GpsEvent],
    accel: &[AccelSample],
    session: (i64, i64),
    params: &ControllerParams,
) -> Result<ControllerOutput, ControllerError> {
    let (start_t, stop_t) = session;
    if stop_t <= start_t {
        return Err(ControllerError::EmptySession(start_t, stop_t));
    }
    for (i, w) in gps_events.windows(2).enumerate() {
        if w[1].t() < w[0].t() {
            return Err(ControllerError::UnsortedGps(i + 1));
        }
    }
    for (i, w) in accel.windows(2).enumerate() {
        if w[1].t <= w[0].t {
            return Err(ControllerError::UnsortedAccel(i + 1));
        }
    }

    let mut run = ControllerRun::new(params, start_t);
    let (mut ig, mut ia) = (0usize, 0usize);
    loop {
        let next_gps = gps_events.get(ig);
        let next_acc = accel.get(ia);
        // GPS wins ties so journey logging sees fixes first.
        let take_gps = match (next_gps, next_acc) {
            (Some(g), Some(a)) => g.t() <= a.t,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if take_gps {
            let ev = next_gps.unwrap();
            ig += 1;
            if ev.t() < start_t {
                continue;
            }
            if ev.t() > stop_t {
                break;
            }
            run.settle_timers(ev.t())?;
            run.on_gps(ev)?;
        } else {
            let s = next_acc.unwrap();
            ia += 1;
            if s.t < start_t {
                continue;
            }
            if s.t > stop_t {
                break;
            }
            run.settle_timers(s.t)?;
            run.on_accel(s)?;
        }
    }
    run.finish(stop_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{LocationSample, EARTH_RADIUS_M};

    const DEG_PER_M: f64 = 1.0 / (EARTH_RADIUS_M * std::f64::consts::PI / 180.0);

    /// Builds a day trace: stationary except for the given walking windows
    /// (start_s, duration_s, speed m/s). GPS at 0.5 Hz, accel at 5 Hz.
    fn build_trace(
        total_s: i64,
        walks: &[(i64, i64, f64)],
    ) -> (Vec<GpsEvent>, Vec<AccelSample>) {
        let speed_at = |t_s: i64| -> f64 {
            walks
                .iter()
                .find(|(s, d, _)| t_s >= *s && t_s < s + d)
                .map(|(_, _, v)| *v)
                .unwrap_or(0.0)
        };
        let mut gps = Vec::new();
        let mut lat = 35.0;
        for i in 0..total_s / 2 {
            let t_s = i * 2;
            lat += speed_at(t_s) * 2.0 * DEG_PER_M;
            gps.push(GpsEvent::Fix(LocationSample::with_sats(t_s * 1000, lat, 14.0, 11)));
        }
        let mut accel = Vec::new();
        for i in 0..total_s * 5 {
            let t_ms = i * 200;
            let moving = speed_at(t_ms / 1000) > 0.0;
            let dev = if moving { 5.0 } else { 0.02 };
            accel.push(AccelSample::new(t_ms, 0.0, 0.0, 9.81 + dev));
        }
        (gps, accel)
    }

    #[test]
    fn no_motion_session_times_out_to_acc() {
        let (gps, accel) = build_trace(7200, &[]);
        let out =
            run_controller(&gps, &accel, (0, 7_200_000), &ControllerParams::default()).unwrap();
        assert!(out.journeys.is_empty());
        let ivs = out.timeline.intervals();
        assert_eq!(ivs.len(), 2);
        assert_eq!(ivs[0].state, GlobalState::Gps);
        assert_eq!(ivs[0].end_t, 300_000);
        assert_eq!(ivs[1].state, GlobalState::Acc);
        assert_eq!(ivs[1].end_t, 7_200_000);
    }

    #[test]
    fn walk_in_the_middle_is_detected_and_bracketed_by_acc() {
        // 3 hours; a 20-minute walk starting at minute 60.
        let (gps, accel) = build_trace(10_800, &[(3600, 1200, 1.5)]);
        let out =
            run_controller(&gps, &accel, (0, 10_800_000), &ControllerParams::default()).unwrap();
        assert_eq!(out.journeys.len(), 1);
        let j = &out.journeys[0];
        // Start near the true onset: the wake plus trigger lag is well
        // under a minute.
        assert!((j.start_t - 3_600_000).abs() < 60_000, "start {}", j.start_t);
        assert!((j.end_t - 4_800_000).abs() < 180_000, "end {}", j.end_t);

        // Timeline: GPS 300 s, ACC until wake, GPS across the walk plus the
        // trailing idle timeout, ACC to the end.
        let ivs = out.timeline.intervals();
        assert_eq!(ivs.len(), 4);
        assert_eq!(ivs[0].state, GlobalState::Gps);
        assert_eq!(ivs[1].state, GlobalState::Acc);
        assert_eq!(ivs[2].state, GlobalState::Gps);
        assert_eq!(ivs[3].state, GlobalState::Acc);
        // The wake lands within seconds of the walk onset.
        assert!((ivs[2].start_t - 3_600_000).abs() < 10_000);
        // GPS-active stretch is bounded by walk + stop-detection lag
        // (the 25-window buffer must age out) + idle timeout + slack.
        let gps_ms = ivs[2].end_t - ivs[2].start_t;
        assert!(gps_ms <= 1_200_000 + 150_000 + 300_000 + 60_000, "gps stretch {gps_ms}");
        // Span partition.
        assert_eq!(out.timeline.span(), Some((0, 10_800_000)));
        assert!(ivs.windows(2).all(|w| w[0].end_t == w[1].start_t));
    }

    #[test]
    fn disabled_idle_timeout_matches_plain_pipeline() {
        let (gps, accel) = build_trace(5400, &[(600, 900, 1.5)]);
        let params =
            ControllerParams { idle_timeout_s: None, ..ControllerParams::default() };
        let out = run_controller(&gps, &accel, (0, 5_400_000), &params).unwrap();
        // Single GPS interval covering everything.
        assert_eq!(out.timeline.intervals().len(), 1);
        assert_eq!(out.timeline.intervals()[0].state, GlobalState::Gps);

        // Equivalent to driving the logger directly plus one postproc pass.
        let mut logger = GpsLogger::new(params.gps, params.window);
        let mut segs = Vec::new();
        for ev in &gps {
            segs.extend(logger.on_event(ev).unwrap());
        }
        segs.extend(logger.finish(5_400_000));
        let journeys: Vec<Journey> = segs
            .iter()
            .map(|s| SpoolRecord::from_segment(s).to_journey().unwrap())
            .collect();
        let expect = postproc::run_pipeline(journeys, &params.post).unwrap();
        assert_eq!(out.journeys, expect);
    }

    #[test]
    fn acc_to_gps_transition_at_decision_timestamp() {
        let (gps, accel) = build_trace(3600, &[(1800, 600, 1.5)]);
        let out =
            run_controller(&gps, &accel, (0, 3_600_000), &ControllerParams::default()).unwrap();
        let ivs = out.timeline.intervals();
        // Wake at the motion decision: default params need 12 samples at
        // 5 Hz from the onset at t=1800 s.
        let wake = ivs.iter().find(|iv| iv.state == GlobalState::Gps && iv.start_t > 0).unwrap();
        assert_eq!(wake.start_t, 1_800_000 + 12 * 200 - 200);
    }

    #[test]
    fn rejects_bad_sessions_and_unsorted_streams() {
        let (gps, accel) = build_trace(60, &[]);
        assert!(matches!(
            run_controller(&gps, &accel, (10, 10), &ControllerParams::default()),
            Err(ControllerError::EmptySession(10, 10))
        ));
        let mut bad = gps.clone();
        bad.swap(0, 1);
        assert!(matches!(
            run_controller(&bad, &accel, (0, 60_000), &ControllerParams::default()),
            Err(ControllerError::UnsortedGps(1))
        ));
        let mut bad_acc = accel.clone();
        bad_acc.swap(2, 3);
        assert!(matches!(
            run_controller(&gps, &bad_acc, (0, 60_000), &ControllerParams::default()),
            Err(ControllerError::UnsortedAccel(_))
        ));
    }

    #[test]
    fn timeline_validation() {
        assert!(StateTimeline::from_intervals(vec![StateInterval {
            start_t: 5,
            end_t: 5,
            state: GlobalState::Gps
        }])
        .is_err());
        assert!(StateTimeline::from_intervals(vec![
            StateInterval { start_t: 0, end_t: 5, state: GlobalState::Gps },
            StateInterval { start_t: 6, end_t: 9, state: GlobalState::Acc },
        ])
        .is_err());
        let tl = StateTimeline::uniform(0, 100, GlobalState::Gps).unwrap();
        assert_eq!(tl.span(), Some((0, 100)));
    }
}
