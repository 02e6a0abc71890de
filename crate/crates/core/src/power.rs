//! Battery discharge model over sensing-state timelines.
//!
//! Discharge is piecewise linear: each global state drains at a per-device
//! rate, in battery-percentage points per hour, estimated in the field as
//! the first-order coefficient of a degree-2 least-squares fit.

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{GlobalState, StateTimeline};

#[derive(Debug, Error, PartialEq)]
pub enum PowerError {
    #[error("need at least {need} battery samples, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("timelines cover different spans: {0:?} vs {1:?}")]
    SpanMismatch(Option<(i64, i64)>, Option<(i64, i64)>),
    #[error("degenerate fit: all samples at one instant")]
    DegenerateFit,
}

/// Per-state discharge rates in battery-percentage points per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub idle_rate: f64,
    pub accel_rate: f64,
    pub gps_rate: f64,
}

impl PowerProfile {
    pub fn new(idle_rate: f64, accel_rate: f64, gps_rate: f64) -> Self {
        Self { idle_rate, accel_rate, gps_rate }
    }

    /// Field-measured presets for the four test devices.
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "t1" => Some(Self::new(1.79, 6.71, 20.13)),
            "t2" => Some(Self::new(1.06, 3.22, 10.22)),
            "s1" => Some(Self::new(5.02, 6.70, 47.97)),
            "s2" => Some(Self::new(2.17, 7.42, 28.26)),
            _ => None,
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["t1", "t2", "s1", "s2"]
    }

    /// Scales the GPS rate, e.g. ~1.3 for indoor or assisted-mode sensing.
    pub fn with_gps_scaled(mut self, factor: f64) -> Self {
        self.gps_rate *= factor;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.idle_rate > 0.0
            && self.idle_rate <= self.accel_rate
            && self.accel_rate <= self.gps_rate)
        {
            return Err("rates must satisfy 0 < idle <= accel <= gps".into());
        }
        Ok(())
    }

    pub fn rate(&self, state: GlobalState) -> f64 {
        match state {
            GlobalState::Off => self.idle_rate,
            GlobalState::Acc => self.accel_rate,
            GlobalState::Gps => self.gps_rate,
        }
    }
}

/// Simulated discharge curve plus its degree-2 fit summary.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryCurve {
    /// (timestamp ms, battery %) samples, non-increasing levels.
    pub points: Vec<(i64, f64)>,
    /// Magnitude of the fitted first-order coefficient, %/hour.
    pub linear_rate: f64,
    /// Fitted second-order coefficient, %/hour².
    pub quad_coeff: f64,
}

const CURVE_STEP_MS: i64 = 60_000;

/// Integrates the profile over the timeline from `start_level`, clamping at
/// zero. Curve points are emitted at interval boundaries and minute steps.
pub fn simulate_battery(
    timeline: &StateTimeline,
    profile: &PowerProfile,
    start_level: f64,
) -> BatteryCurve {
    let mut points = Vec::new();
    let mut level = start_level.clamp(0.0, 100.0);
    match timeline.span() {
        None => points.push((0, level)),
        Some((start, _)) => {
            points.push((start, level));
            for iv in timeline.intervals() {
                let mut t = iv.start_t;
                while t < iv.end_t {
                    let step_end = (t + CURVE_STEP_MS).min(iv.end_t);
                    let hours = (step_end - t) as f64 / 3_600_000.0;
                    level = (level - profile.rate(iv.state) * hours).max(0.0);
                    points.push((step_end, level));
                    t = step_end;
                }
            }
        }
    }
    let (linear_rate, quad_coeff) = fit_discharge(&points).unwrap_or((0.0, 0.0));
    BatteryCurve { points, linear_rate, quad_coeff }
}

/// Total battery consumed over a timeline, in percentage points (unclamped).
pub fn consumption(timeline: &StateTimeline, profile: &PowerProfile) -> f64 {
    timeline
        .intervals()
        .iter()
        .map(|iv| profile.rate(iv.state) * (iv.end_t - iv.start_t) as f64 / 3_600_000.0)
        .sum()
}

/// Fractional battery saving of `aware` relative to `base` over the same
/// span: `1 - consumption(aware) / consumption(base)`.
pub fn compare_savings(
    aware: &StateTimeline,
    base: &StateTimeline,
    profile: &PowerProfile,
) -> Result<f64, PowerError> {
    if aware.span() != base.span() {
        return Err(PowerError::SpanMismatch(aware.span(), base.span()));
    }
    Ok(1.0 - consumption(aware, profile) / consumption(base, profile))
}

/// Degree-2 least-squares fit of battery level against elapsed hours.
/// Returns (|first-order coefficient| in %/hour, second-order coefficient).
pub fn fit_discharge(samples: &[(i64, f64)]) -> Result<(f64, f64), PowerError> {
    if samples.len() < 3 {
        return Err(PowerError::InsufficientData { need: 3, got: samples.len() });
    }
    let t0 = samples[0].0;
    let xs: Vec<f64> = samples.iter().map(|(t, _)| (t - t0) as f64 / 3_600_000.0).collect();
    let ys: Vec<f64> = samples.iter().map(|(_, y)| *y).collect();
    let (_, c1, c2) = quad_fit(&xs, &ys).ok_or(PowerError::DegenerateFit)?;
    Ok((c1.abs(), c2))
}

/// Least-squares quadratic fit: returns (c0, c1, c2) of y = c0 + c1 x + c2 x².
/// Solves the normal equations around the centered abscissa for conditioning,
/// then maps the coefficients back to the original origin.
pub fn quad_fit<F: Float + FromPrimitive>(xs: &[F], ys: &[F]) -> Option<(F, F, F)> {
    if xs.len() < 3 || xs.len() != ys.len() {
        return None;
    }
    let n = F::from_usize(xs.len())?;
    let mean = xs.iter().fold(F::zero(), |a, &x| a + x) / n;

    // Power sums of the centered abscissa.
    let (mut s1, mut s2, mut s3, mut s4) = (F::zero(), F::zero(), F::zero(), F::zero());
    let (mut sy, mut sxy, mut sx2y) = (F::zero(), F::zero(), F::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let u = x - mean;
        let u2 = u * u;
        s1 = s1 + u;
        s2 = s2 + u2;
        s3 = s3 + u2 * u;
        s4 = s4 + u2 * u2;
        sy = sy + y;
        sxy = sxy + u * y;
        sx2y = sx2y + u2 * y;
    }
    let mut a = [[n, s1, s2], [s1, s2, s3], [s2, s3, s4]];
    let mut b = [sy, sxy, sx2y];

    // Gaussian elimination with partial pivoting on the 3x3 system.
    #[allow(clippy::needless_range_loop)]
    for col in 0..3 {
        let mut pivot = col;
        for row in col + 1..3 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col] == F::zero() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut c = [F::zero(); 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc = acc - a[row][k] * c[k];
        }
        c[row] = acc / a[row][row];
    }

    // y = c0 + c1 u + c2 u² with u = x - mean; expand back to x.
    let (d0, d1, d2) = (c[0], c[1], c[2]);
    let two = F::one() + F::one();
    Some((d0 - d1 * mean + d2 * mean * mean, d1 - two * d2 * mean, d2))
}
