//! End-to-end segmentation entry points over loaded traces.

use thiserror::Error;

use crate::controller::{self, ControllerError, ControllerParams, StateTimeline};
use crate::geo::Journey;
use crate::gps_fsm::{GpsFsmError, GpsLogger, SegmentRecord};
use crate::postproc::{self, PostprocError};
use crate::spool::SpoolRecord;
use crate::trace::TraceBundle;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("trace has no events")]
    EmptyTrace,
    #[error("battery-aware segmentation needs accelerometer data")]
    NoAccelData,
    #[error(transparent)]
    Gps(#[from] GpsFsmError),
    #[error(transparent)]
    Postproc(#[from] PostprocError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

/// Result of segmenting one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentOutput {
    pub journeys: Vec<Journey>,
    /// Tentative segments as spooled by the online phase.
    pub spool: Vec<SpoolRecord>,
    /// Sensing timeline; None for the plain (always-GPS) pipeline.
    pub timeline: Option<StateTimeline>,
}

/// Replays the GPS stream through the online logger alone, closing the
/// session at the last event. Returns the raw tentative segments.
pub fn replay_segments(
    bundle: &TraceBundle,
    params: &ControllerParams,
) -> Result<Vec<SegmentRecord>, PipelineError> {
    let events = bundle.gps_events();
    let last_t = events.last().map(|e| e.t()).ok_or(PipelineError::EmptyTrace)?;
    let mut logger = GpsLogger::new(params.gps, params.window);
    let mut segments = Vec::new();
    for ev in &events {
        segments.extend(logger.on_event(ev)?);
    }
    segments.extend(logger.finish(last_t));
    Ok(segments)
}

/// Segments a trace into journeys.
///
/// With `battery_aware` the duty-cycling controller replays both sensor
/// streams; otherwise the GPS stream is replayed directly and
/// post-processed in one pass.
pub fn segment_trace(
    bundle: &TraceBundle,
    params: &ControllerParams,
    battery_aware: bool,
) -> Result<SegmentOutput, PipelineError> {
    if battery_aware {
        if bundle.accel.is_empty() {
            return Err(PipelineError::NoAccelData);
        }
        let session = bundle.span().ok_or(PipelineError::EmptyTrace)?;
        let events = bundle.gps_events();
        let out = controller::run_controller(&events, &bundle.accel, session, params)?;
        Ok(SegmentOutput {
            journeys: out.journeys,
            spool: out.spool,
            timeline: Some(out.timeline),
        })
    } else {
        let segments = replay_segments(bundle, params)?;
        let spool: Vec<SpoolRecord> = segments.iter().map(SpoolRecord::from_segment).collect();
        let journeys: Vec<Journey> = spool
            .iter()
            .map(|r| r.to_journey().expect("segments hold valid ordered points"))
            .collect();
        let journeys = postproc::run_pipeline(journeys, &params.post)?;
        Ok(SegmentOutput { journeys, spool, timeline: None })
    }
}
