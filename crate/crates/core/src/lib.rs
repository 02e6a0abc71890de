//! Journey detection from GPS and accelerometer traces.
//!
//! An offline-replayable implementation of a battery-aware journey
//! detection pipeline:
//!
//! - [`geo`]: great-circle primitives over location sequences;
//! - [`downsample`]: the averaging down-sampler feeding all decisions;
//! - [`gps_fsm`]: the online logger detecting tentative journey segments;
//! - [`postproc`]: the offline multi-pass segment post-processor;
//! - [`motion`]: the accelerometer significant-motion detector;
//! - [`controller`]: the GPS/ACC duty-cycling controller;
//! - [`power`]: battery discharge modeling over sensing timelines;
//! - [`tuning`]: detector tuning (simulated annealing) and validation;
//! - [`noise`]: static and dynamic GPS noise analyses;
//! - [`synth`]: synthetic trace generation with ground truth;
//! - [`trace`], [`spool`], [`config`], [`pipeline`]: file formats and
//!   end-to-end entry points.
//!
//! The geometric kernels are generic over the scalar type (see
//! [`geo::GeoScalar`]); the pipeline itself runs on the f64 aliases below.

pub mod config;
pub mod controller;
pub mod downsample;
pub mod geo;
pub mod gps_fsm;
pub mod motion;
pub mod noise;
pub mod pipeline;
pub mod postproc;
pub mod power;
pub mod spool;
pub mod synth;
pub mod trace;
pub mod tuning;

/// Concrete scalar used by the pipeline.
pub type Scalar = f64;
/// Latitude/longitude pair at pipeline precision.
pub type GeoPoint = geo::Point<Scalar>;
/// Bounding box at pipeline precision.
pub type GeoBounds = geo::Bounds<Scalar>;

pub use controller::{run_controller, ControllerParams, GlobalState, StateTimeline};
pub use geo::{haversine, Journey, LocationSample, LocationSeq};
pub use gps_fsm::{GpsFsmParams, GpsLogger, SegmentCause, SegmentRecord};
pub use motion::{AccelSample, MotionFsm, MotionParams};
pub use pipeline::{segment_trace, SegmentOutput};
pub use power::{compare_savings, fit_discharge, simulate_battery, PowerProfile};
pub use synth::{generate_synthetic, SyntheticScenario};
pub use trace::{load_trace, save_trace, TraceBundle};
pub use tuning::{anneal, cost, score_params, validate_detection, DiaryEntry};
