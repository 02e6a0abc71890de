//! Synthetic trace generation for testing and validation.
//!
//! A scenario is an itinerary of legs (walk, car, idle, tunnel, indoor)
//! rendered into GPS and accelerometer streams at the capture rates, with
//! additive Gaussian position noise, occasional canyoning jumps, suppressed
//! fixes in tunnels, and fix-less low-satellite reports indoors. The
//! generator also emits the ground-truth journey diary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{bounds_of, LocationSample, LocationSeq, Point, EARTH_RADIUS_M};
use crate::motion::AccelSample;
use crate::trace::{SatStatus, TraceBundle, TraceMeta};
use crate::tuning::DiaryEntry;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("scenario has no legs")]
    NoLegs,
    #[error("leg {0} has non-positive duration")]
    BadDuration(usize),
    #[error("leg {0} has negative speed")]
    BadSpeed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegMode {
    /// Stationary outdoors; fixes with good satellite counts.
    Idle,
    /// Moving on foot.
    Walk,
    /// Moving by vehicle.
    Car,
    /// Moving by vehicle with fixes suppressed entirely.
    Tunnel,
    /// Stationary indoors: no fixes, satellite count below the cutoff.
    Indoor,
}

impl LegMode {
    pub fn is_moving(self) -> bool {
        matches!(self, LegMode::Walk | LegMode::Car | LegMode::Tunnel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub mode: LegMode,
    pub duration_s: f64,
    /// Ground speed, m/s; ignored for stationary modes.
    #[serde(default)]
    pub speed_mps: f64,
    /// Heading, degrees clockwise from north.
    #[serde(default)]
    pub heading_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsNoise {
    /// Std-dev of additive position noise per axis, degrees.
    pub sigma_deg: f64,
    /// Per-fix probability of a canyoning jump.
    pub canyon_prob: f64,
    /// Magnitude of a canyoning jump, degrees.
    pub canyon_mag_deg: f64,
}

impl Default for GpsNoise {
    fn default() -> Self {
        Self { sigma_deg: 1.5e-5, canyon_prob: 0.0, canyon_mag_deg: 3e-4 }
    }
}

/// Accelerometer magnitude-deviation profiles per motion class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelProfile {
    pub still_mean: f64,
    pub still_sigma: f64,
    pub moving_mean: f64,
    pub moving_sigma: f64,
}

impl Default for AccelProfile {
    fn default() -> Self {
        Self { still_mean: 0.05, still_sigma: 0.02, moving_mean: 5.5, moving_sigma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub start_lat: f64,
    pub start_lon: f64,
    #[serde(default)]
    pub start_t: i64,
    #[serde(default = "default_gps_period")]
    pub gps_period_ms: i64,
    #[serde(default = "default_accel_period")]
    pub accel_period_ms: i64,
    #[serde(default)]
    pub noise: GpsNoise,
    #[serde(default)]
    pub accel: AccelProfile,
    /// Stationary legs at most this long between moving legs stay inside
    /// one diary journey (junction waits, short signal losses).
    #[serde(default = "default_merge_gap")]
    pub diary_merge_gap_s: f64,
    pub legs: Vec<Leg>,
}

fn default_gps_period() -> i64 {
    2000
}

fn default_accel_period() -> i64 {
    200
}

fn default_merge_gap() -> f64 {
    150.0
}

impl SyntheticScenario {
    pub fn new(start_lat: f64, start_lon: f64, legs: Vec<Leg>) -> Self {
        Self {
            start_lat,
            start_lon,
            start_t: 0,
            gps_period_ms: default_gps_period(),
            accel_period_ms: default_accel_period(),
            noise: GpsNoise::default(),
            accel: AccelProfile::default(),
            diary_merge_gap_s: default_merge_gap(),
            legs,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.legs.is_empty() {
            return Err(SynthError::NoLegs);
        }
        for (i, leg) in self.legs.iter().enumerate() {
            if leg.duration_s <= 0.0 {
                return Err(SynthError::BadDuration(i));
            }
            if leg.speed_mps < 0.0 {
                return Err(SynthError::BadSpeed(i));
            }
        }
        Ok(())
    }
}

const M_PER_DEG_LAT: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

/// Precomputed leg with absolute time span and linear position model.
struct LegSpan {
    mode: LegMode,
    start_t: i64,
    end_t: i64,
    start_pos: Point<f64>,
    /// Degrees per second (lat, lon).
    vel: (f64, f64),
}

fn leg_spans(scenario: &SyntheticScenario) -> Vec<LegSpan> {
    let lon_scale = scenario.start_lat.to_radians().cos();
    let mut spans = Vec::with_capacity(scenario.legs.len());
    let mut t = scenario.start_t;
    let mut pos = Point::new(scenario.start_lat, scenario.start_lon);
    for leg in &scenario.legs {
        let speed = if leg.mode.is_moving() { leg.speed_mps } else { 0.0 };
        let heading = leg.heading_deg.to_radians();
        let vel = (
            speed * heading.cos() / M_PER_DEG_LAT,
            speed * heading.sin() / (M_PER_DEG_LAT * lon_scale),
        );
        let end_t = t + (leg.duration_s * 1000.0) as i64;
        spans.push(LegSpan { mode: leg.mode, start_t: t, end_t, start_pos: pos, vel });
        let dur_s = (end_t - t) as f64 / 1000.0;
        pos = Point::new(pos.lat + vel.0 * dur_s, pos.lon + vel.1 * dur_s);
        t = end_t;
    }
    spans
}

fn position_at(spans: &[LegSpan], t: i64) -> Point<f64> {
    let span = spans
        .iter()
        .find(|s| t >= s.start_t && t < s.end_t)
        .unwrap_or_else(|| spans.last().expect("validated scenarios have legs"));
    let dt_s = (t - span.start_t) as f64 / 1000.0;
    Point::new(span.start_pos.lat + span.vel.0 * dt_s, span.start_pos.lon + span.vel.1 * dt_s)
}

fn mode_at(spans: &[LegSpan], t: i64) -> LegMode {
    spans
        .iter()
        .find(|s| t >= s.start_t && t < s.end_t)
        .map(|s| s.mode)
        .unwrap_or(LegMode::Idle)
}

/// Ground-truth journey intervals: maximal runs of moving legs, bridging
/// stationary legs no longer than the merge gap.
fn build_diary(scenario: &SyntheticScenario, spans: &[LegSpan]) -> Vec<DiaryEntry> {
    let merge_ms = (scenario.diary_merge_gap_s * 1000.0) as i64;
    let mut entries: Vec<(i64, i64)> = Vec::new();
    let mut open: Option<(i64, i64)> = None;
    for span in spans {
        if span.mode.is_moving() {
            open = match open {
                None => Some((span.start_t, span.end_t)),
                Some((s, _)) => Some((s, span.end_t)),
            };
        } else if let Some((s, e)) = open {
            if span.end_t - span.start_t > merge_ms {
                entries.push((s, e));
                open = None;
            }
        }
    }
    if let Some(e) = open {
        entries.push(e);
    }
    entries
        .into_iter()
        .map(|(s, e)| {
            // True extent: bounds diagonal of the noiseless path.
            let mut pts = Vec::new();
            let mut t = s;
            let mut i = 0i64;
            while t <= e {
                let p = position_at(spans, t);
                pts.push(LocationSample::new(s + i, p.lat, p.lon));
                i += 1;
                t += scenario.gps_period_ms.max(1);
            }
            let diag = LocationSeq::from_samples(pts)
                .ok()
                .and_then(|seq| bounds_of(&seq).ok())
                .map(|b| b.diagonal());
            DiaryEntry { start_t: s, end_t: e, diag_m: diag }
        })
        .collect()
}

/// Renders a scenario into sensor streams plus the ground-truth diary.
/// Deterministic for a given seed.
pub fn generate_synthetic(
    scenario: &SyntheticScenario,
    seed: u64,
) -> Result<(TraceBundle, Vec<DiaryEntry>), SynthError> {
    scenario.validate()?;
    let spans = leg_spans(scenario);
    let end_t = spans.last().unwrap().end_t;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos_noise = Normal::new(0.0, scenario.noise.sigma_deg).expect("finite sigma");
    let still = Normal::new(scenario.accel.still_mean, scenario.accel.still_sigma).unwrap();
    let moving = Normal::new(scenario.accel.moving_mean, scenario.accel.moving_sigma).unwrap();

    let mut gps = Vec::new();
    let mut sat_status = Vec::new();
    let mut t = scenario.start_t;
    while t < end_t {
        match mode_at(&spans, t) {
            LegMode::Tunnel => {}
            LegMode::Indoor => {
                sat_status.push(SatStatus { t, sats: rng.random_range(0..=2) });
            }
            _ => {
                let truth = position_at(&spans, t);
                let mut lat = truth.lat + pos_noise.sample(&mut rng);
                let mut lon = truth.lon + pos_noise.sample(&mut rng);
                if scenario.noise.canyon_prob > 0.0
                    && rng.random::<f64>() < scenario.noise.canyon_prob
                {
                    let bearing = rng.random_range(0.0..std::f64::consts::TAU);
                    lat += scenario.noise.canyon_mag_deg * bearing.cos();
                    lon += scenario.noise.canyon_mag_deg * bearing.sin();
                }
                gps.push(LocationSample::with_sats(t, lat, lon, rng.random_range(8..=14)));
            }
        }
        t += scenario.gps_period_ms;
    }

    let mut accel = Vec::new();
    let mut t = scenario.start_t;
    while t < end_t {
        let dev = if mode_at(&spans, t).is_moving() {
            moving.sample(&mut rng).abs()
        } else {
            still.sample(&mut rng).abs()
        };
        // Put the deviation on the vertical axis, randomly above or below g.
        let sign = if dev < 9.81 && rng.random::<bool>() { -1.0 } else { 1.0 };
        accel.push(AccelSample::new(t, 0.0, 0.0, 9.81 + sign * dev));
        t += scenario.accel_period_ms;
    }

    let bundle = TraceBundle {
        gps,
        sat_status,
        accel,
        pings: Vec::new(),
        meta: TraceMeta {
            device: Some("synthetic".into()),
            gps_rate_hz: Some(1000.0 / scenario.gps_period_ms as f64),
            accel_rate_hz: Some(1000.0 / scenario.accel_period_ms as f64),
        },
    };
    Ok((bundle, build_diary(scenario, &spans)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leg(mode: LegMode, duration_s: f64, speed_mps: f64) -> Leg {
        Leg { mode, duration_s, speed_mps, heading_deg: 0.0 }
    }

    #[test]
    fn pure_idle_scenario_has_empty_diary_and_bounded_jitter() {
        let scenario = SyntheticScenario::new(35.0, 14.0, vec![leg(LegMode::Idle, 600.0, 0.0)]);
        let (bundle, diary) = generate_synthetic(&scenario, 1).unwrap();
        assert!(diary.is_empty());
        assert_eq!(bundle.gps.len(), 300);
        let sigma = scenario.noise.sigma_deg;
        for s in &bundle.gps {
            assert!((s.lat - 35.0).abs() < 6.0 * sigma, "jitter beyond 6 sigma");
            assert!((s.lon - 14.0).abs() < 6.0 * sigma);
        }
    }

    #[test]
    fn walk_then_indoor_drops_satellites_at_the_boundary() {
        let scenario = SyntheticScenario::new(
            35.0,
            14.0,
            vec![leg(LegMode::Walk, 430.0, 1.4), leg(LegMode::Indoor, 300.0, 0.0)],
        );
        let (bundle, diary) = generate_synthetic(&scenario, 2).unwrap();
        assert_eq!(diary.len(), 1);
        assert!(diary[0].diag_m.unwrap() > 500.0, "walked {}", diary[0].diag_m.unwrap());
        // Fixes stop and low-satellite reports start at the leg boundary.
        let last_fix = bundle.gps.last().unwrap().t;
        let first_status = bundle.sat_status.first().unwrap().t;
        assert!(last_fix < 430_000 && first_status >= 430_000);
        assert!(bundle.sat_status.iter().all(|s| s.sats < 5));
        assert!(bundle.gps.iter().all(|s| s.sats.unwrap() >= 8));
    }

    #[test]
    fn tunnel_suppresses_fixes_entirely() {
        let scenario = SyntheticScenario::new(
            35.0,
            14.0,
            vec![
                leg(LegMode::Car, 120.0, 15.0),
                leg(LegMode::Tunnel, 40.0, 15.0),
                leg(LegMode::Car, 120.0, 15.0),
            ],
        );
        let (bundle, diary) = generate_synthetic(&scenario, 3).unwrap();
        // One journey spanning the tunnel.
        assert_eq!(diary.len(), 1);
        assert_eq!(diary[0].start_t, 0);
        assert_eq!(diary[0].end_t, 280_000);
        // No fixes inside the tunnel span.
        assert!(bundle.gps.iter().all(|s| !(120_000..160_000).contains(&s.t)));
        // The position advances across the tunnel (the car kept moving).
        let before = bundle.gps.iter().rev().find(|s| s.t < 120_000).unwrap();
        let after = bundle.gps.iter().find(|s| s.t >= 160_000).unwrap();
        assert!((after.lat - before.lat) * M_PER_DEG_LAT > 500.0);
    }

    #[test]
    fn short_idle_legs_merge_into_one_diary_journey() {
        let scenario = SyntheticScenario::new(
            35.0,
            14.0,
            vec![
                leg(LegMode::Car, 120.0, 12.0),
                leg(LegMode::Idle, 60.0, 0.0),
                leg(LegMode::Car, 120.0, 12.0),
                leg(LegMode::Idle, 400.0, 0.0),
                leg(LegMode::Walk, 300.0, 1.4),
            ],
        );
        let (_, diary) = generate_synthetic(&scenario, 4).unwrap();
        assert_eq!(diary.len(), 2);
        assert_eq!((diary[0].start_t, diary[0].end_t), (0, 300_000));
        assert_eq!((diary[1].start_t, diary[1].end_t), (700_000, 1_000_000));
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let scenario = SyntheticScenario::new(
            35.0,
            14.0,
            vec![leg(LegMode::Walk, 200.0, 1.4), leg(LegMode::Idle, 100.0, 0.0)],
        );
        let a = generate_synthetic(&scenario, 42).unwrap();
        let b = generate_synthetic(&scenario, 42).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = generate_synthetic(&scenario, 43).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let empty = SyntheticScenario::new(35.0, 14.0, vec![]);
        assert_eq!(generate_synthetic(&empty, 0).unwrap_err(), SynthError::NoLegs);
        let bad = SyntheticScenario::new(35.0, 14.0, vec![leg(LegMode::Walk, 0.0, 1.0)]);
        assert_eq!(generate_synthetic(&bad, 0).unwrap_err(), SynthError::BadDuration(0));
        let bad = SyntheticScenario::new(35.0, 14.0, vec![leg(LegMode::Walk, 10.0, -1.0)]);
        assert_eq!(generate_synthetic(&bad, 0).unwrap_err(), SynthError::BadSpeed(0));
    }
}
