//! Offline multi-pass post-processor.
//!
//! Runs when tracking stops or the controller drops to accelerometer-only
//! sensing: a low distance threshold, recursive segment concatenation, a
//! high distance threshold (the hysteresis pair) and end trimming.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine, speed, GeoError, Journey};

#[derive(Debug, Error, PartialEq)]
pub enum PostprocError {
    #[error("segments not time-ordered: segment {index} starts at {start} before previous end {prev_end}")]
    Unordered { index: usize, start: i64, prev_end: i64 },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocParams {
    /// Pre-concatenation length cutoff, meters (bounds diagonal).
    pub low_len_m: f64,
    /// Post-concatenation length cutoff, meters.
    pub high_len_m: f64,
    /// Maximum gap between joinable segments, seconds.
    pub join_gap_s: f64,
    /// Gap speed may exceed the terminal average by this factor.
    pub join_tolerance: f64,
    /// Number of terminal velocities averaged for the join test.
    pub join_avg_count: usize,
    /// End-trimming speed cutoff, m/s.
    pub tail_speed_mps: f64,
    /// Maximum points trimmed per end.
    pub tail_max_cuts: usize,
}

impl Default for PostprocParams {
    fn default() -> Self {
        Self {
            low_len_m: 50.0,
            high_len_m: 500.0,
            join_gap_s: 120.0,
            join_tolerance: 1.2,
            join_avg_count: 5,
            tail_speed_mps: 20.0,
            tail_max_cuts: 3,
        }
    }
}

impl PostprocParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.low_len_m >= self.high_len_m {
            return Err("low length threshold must be below the high threshold".into());
        }
        if self.join_tolerance < 1.0 {
            return Err("join tolerance must be at least 1".into());
        }
        if self.low_len_m <= 0.0 || self.join_gap_s <= 0.0 || self.tail_speed_mps <= 0.0 {
            return Err("thresholds must be positive".into());
        }
        if self.join_avg_count == 0 {
            return Err("join average count must be positive".into());
        }
        Ok(())
    }
}

/// Drops journeys shorter than the low threshold. Boundary values are
/// retained (the cut is on "less than").
pub fn filter_low(segments: Vec<Journey>, params: &PostprocParams) -> Vec<Journey> {
    segments.into_iter().filter(|j| j.diagonal() >= params.low_len_m).collect()
}

/// Drops journeys shorter than the high threshold.
pub fn filter_high(segments: Vec<Journey>, params: &PostprocParams) -> Vec<Journey> {
    segments.into_iter().filter(|j| j.diagonal() >= params.high_len_m).collect()
}

fn check_ordered(segments: &[Journey]) -> Result<(), PostprocError> {
    for i in 1..segments.len() {
        if segments[i].start_t <= segments[i - 1].end_t {
            return Err(PostprocError::Unordered {
                index: i,
                start: segments[i].start_t,
                prev_end: segments[i - 1].end_t,
            });
        }
    }
    Ok(())
}

/// Mean of the last `count` point-to-point velocities of a journey.
fn terminal_velocity(j: &Journey, count: usize) -> f64 {
    let pts = j.points.as_slice();
    if pts.len() < 2 {
        return 0.0;
    }
    let available = (pts.len() - 1).min(count);
    let start = pts.len() - 1 - available;
    let mut sum = 0.0;
    for i in start..pts.len() - 1 {
        sum += speed(&pts[i], &pts[i + 1]).expect("strictly increasing timestamps");
    }
    sum / available as f64
}

fn joinable(a: &Journey, b: &Journey, params: &PostprocParams) -> bool {
    let gap_s = (b.start_t - a.end_t) as f64 / 1000.0;
    if gap_s <= 0.0 || gap_s >= params.join_gap_s {
        return false;
    }
    let last = a.points.last().expect("journeys are non-empty");
    let first = b.points.first().expect("journeys are non-empty");
    let gap_speed = haversine(last.pos(), first.pos()) / gap_s;
    gap_speed <= params.join_tolerance * terminal_velocity(a, params.join_avg_count)
}

fn merge(a: Journey, b: Journey) -> Result<Journey, GeoError> {
    let mut points = a.points.into_vec();
    points.extend(b.points.into_vec());
    Journey::from_points(points)
}

/// Joins segments that plausibly belong to one journey: the gap must be
/// short and the speed implied by crossing it must be consistent with the
/// first segment's terminal velocity. Iterates from the next-to-last pair
/// backwards, restarting after every join, until a fixed point.
pub fn concatenate(
    mut segments: Vec<Journey>,
    params: &PostprocParams,
) -> Result<Vec<Journey>, PostprocError> {
    check_ordered(&segments)?;
    'restart: loop {
        if segments.len() < 2 {
            return Ok(segments);
        }
        for i in (0..segments.len() - 1).rev() {
            if joinable(&segments[i], &segments[i + 1], params) {
                let b = segments.remove(i + 1);
                let a = segments.remove(i);
                segments.insert(i, merge(a, b)?);
                continue 'restart;
            }
        }
        return Ok(segments);
    }
}

/// Trims leading and trailing points whose adjoining velocity exceeds the
/// cutoff, at most `tail_max_cuts` per end, never emptying the journey.
pub fn trim_ends(journey: Journey, params: &PostprocParams) -> Result<Journey, PostprocError> {
    let mut pts = journey.points.into_vec();
    let mut cuts = 0;
    while cuts < params.tail_max_cuts
        && pts.len() >= 2
        && speed(&pts[0], &pts[1]).expect("ordered") > params.tail_speed_mps
    {
        pts.remove(0);
        cuts += 1;
    }
    cuts = 0;
    while cuts < params.tail_max_cuts
        && pts.len() >= 2
        && speed(&pts[pts.len() - 2], &pts[pts.len() - 1]).expect("ordered") > params.tail_speed_mps
    {
        pts.pop();
        cuts += 1;
    }
    Ok(Journey::from_points(pts)?)
}

/// The full post-processing pass: low filter, concatenation, high filter,
/// end trimming. Output preserves time order.
pub fn run_pipeline(
    segments: Vec<Journey>,
    params: &PostprocParams,
) -> Result<Vec<Journey>, PostprocError> {
    let kept = filter_low(segments, params);
    let joined = concatenate(kept, params)?;
    let long = filter_high(joined, params);
    long.into_iter().map(|j| trim_ends(j, params)).collect()
}
