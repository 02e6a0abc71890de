//! Significant-motion detector over filtered accelerometer magnitudes.
//!
//! While the GPS is off, a three-state machine (Init, Check, Extra) watches
//! the deviation of the acceleration magnitude from gravity. Check applies
//! a low threshold over a short buffer for cheap early detection; Extra
//! re-tests a longer buffer against a higher threshold so short spikes
//! (pocket knocks, brief handling) do not wake the GPS.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Nominal gravity subtracted from the magnitude, m/s².
pub const GRAVITY_MPS2: f64 = 9.81;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("accel sample at {t} not after previous {prev}")]
    OutOfOrder { t: i64, prev: i64 },
}

/// One raw accelerometer reading, device axes, m/s².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub t: i64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl AccelSample {
    pub fn new(t: i64, ax: f64, ay: f64, az: f64) -> Self {
        Self { t, ax, ay, az }
    }
}

/// Magnitude deviation from gravity: |‖a‖ − g|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilteredAccel {
    pub t: i64,
    pub mag_dev: f64,
}

pub fn filter_accel(s: &AccelSample) -> FilteredAccel {
    let mag = (s.ax * s.ax + s.ay * s.ay + s.az * s.az).sqrt();
    FilteredAccel { t: s.t, mag_dev: (mag - GRAVITY_MPS2).abs() }
}

/// Tunable parameters of the detector; the two buffer stages and their
/// thresholds, plus the window count Extra averages over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    /// Check-stage buffer length, samples (1..=20).
    pub first_len: usize,
    /// Check-stage mean threshold, m/s² (0..=5).
    pub first_threshold: f64,
    /// Extra-stage buffer length, samples (1..=20).
    pub second_len: usize,
    /// Extra-stage per-window mean threshold, m/s² (0..=5).
    pub second_threshold: f64,
    /// Number of windows the Extra buffer is split into (1..=5).
    pub second_windows: usize,
}

impl Default for MotionParams {
    fn default() -> Self {
        // Tuned operating point: a short low-threshold feeler, then a
        // single longer high-threshold confirmation window.
        Self {
            first_len: 5,
            first_threshold: 0.18,
            second_len: 7,
            second_threshold: 4.78,
            second_windows: 1,
        }
    }
}

impl MotionParams {
    pub const LEN_RANGE: (usize, usize) = (1, 20);
    pub const THRESHOLD_RANGE: (f64, f64) = (0.0, 5.0);
    pub const WINDOWS_RANGE: (usize, usize) = (1, 5);

    pub fn validate(&self) -> Result<(), String> {
        let (lo, hi) = Self::LEN_RANGE;
        if !(lo..=hi).contains(&self.first_len) || !(lo..=hi).contains(&self.second_len) {
            return Err(format!("buffer lengths must be within {lo}..={hi}"));
        }
        let (tlo, thi) = Self::THRESHOLD_RANGE;
        for th in [self.first_threshold, self.second_threshold] {
            if !(tlo..=thi).contains(&th) {
                return Err(format!("thresholds must be within {tlo}..={thi}"));
            }
        }
        let (wlo, whi) = Self::WINDOWS_RANGE;
        if !(wlo..=whi).contains(&self.second_windows) {
            return Err(format!("window count must be within {wlo}..={whi}"));
        }
        Ok(())
    }
}

/// Detector phase; exposed so callers can observe Extra rejections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionPhase {
    Init,
    Check,
    Extra,
}

/// Motion confirmed at this timestamp; the controller wakes the GPS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionDecision {
    pub t: i64,
}

/// Single-writer stream processor; one sample at a time.
#[derive(Debug, Clone)]
pub struct MotionFsm {
    params: MotionParams,
    phase: MotionPhase,
    buf: Vec<f64>,
    last_t: Option<i64>,
}

impl MotionFsm {
    pub fn new(params: MotionParams) -> Self {
        Self { params, phase: MotionPhase::Init, buf: Vec::new(), last_t: None }
    }

    pub fn phase(&self) -> MotionPhase {
        self.phase
    }

    pub fn params(&self) -> &MotionParams {
        &self.params
    }

    /// Back to Init, buffers cleared; used when the GPS turns off.
    pub fn reset(&mut self) {
        self.phase = MotionPhase::Init;
        self.buf.clear();
        self.last_t = None;
    }

    pub fn on_sample(&mut self, s: &AccelSample) -> Result<Option<MotionDecision>, MotionError> {
        self.on_filtered(filter_accel(s))
    }

    pub fn on_filtered(&mut self, f: FilteredAccel) -> Result<Option<MotionDecision>, MotionError> {
        if let Some(prev) = self.last_t {
            if f.t <= prev {
                return Err(MotionError::OutOfOrder { t: f.t, prev });
            }
        }
        self.last_t = Some(f.t);

        if self.phase == MotionPhase::Init {
            self.buf.clear();
            self.phase = MotionPhase::Check;
        }
        self.buf.push(f.mag_dev);

        match self.phase {
            MotionPhase::Check => {
                if self.buf.len() >= self.params.first_len {
                    let mean = self.buf.iter().sum::<f64>() / self.buf.len() as f64;
                    self.buf.clear();
                    if mean >= self.params.first_threshold {
                        self.phase = MotionPhase::Extra;
                    }
                }
                Ok(None)
            }
            MotionPhase::Extra => {
                if self.buf.len() >= self.params.second_len {
                    let confirmed = self.extra_confirms();
                    self.buf.clear();
                    if confirmed {
                        self.phase = MotionPhase::Init;
                        return Ok(Some(MotionDecision { t: f.t }));
                    }
                    self.phase = MotionPhase::Check;
                }
                Ok(None)
            }
            MotionPhase::Init => unreachable!("Init is resolved before buffering"),
        }
    }

    /// Splits the Extra buffer into `second_windows` near-equal windows and
    /// requires every window mean to reach the second threshold.
    fn extra_confirms(&self) -> bool {
        let n = self.buf.len();
        let w = self.params.second_windows.min(n);
        let base = n / w;
        let rem = n % w;
        let mut start = 0;
        for i in 0..w {
            let len = base + usize::from(i < rem);
            let chunk = &self.buf[start..start + len];
            let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
            if mean < self.params.second_threshold {
                return false;
            }
            start += len;
        }
        true
    }
}
