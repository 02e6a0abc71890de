//! Averaging down-sampler for the raw GPS stream.
//!
//! All FSM decisions run on the averaged window points produced here; the
//! raw fixes are retained separately for journey storage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{LocationSample, Point};

#[derive(Debug, Error, PartialEq)]
pub enum DownsampleError {
    #[error("sample timestamp {t} not after previous {prev}")]
    NonMonotonic { t: i64, prev: i64 },
}

/// Mean position of a block of raw fixes.
///
/// The timestamp is that of the last contributing raw sample, so downstream
/// decisions fire on its arrival. `raw_span` holds the inclusive global
/// indices of the contributing samples; `complete` distinguishes full
/// windows from flushed partials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    pub t: i64,
    pub pos: Point<f64>,
    pub raw_span: (u64, u64),
    pub complete: bool,
}

/// Single-writer blocked averager: emits one `WindowPoint` per `window`
/// pushed samples.
#[derive(Debug, Clone)]
pub struct Downsampler {
    window: usize,
    sum_lat: f64,
    sum_lon: f64,
    count: usize,
    last_t: Option<i64>,
    first_idx: u64,
    next_idx: u64,
}

impl Downsampler {
    /// `window` is the number of raw samples per emitted point (W >= 1).
    pub fn new(window: usize) -> Self {
        assert!(window >= 1, "window size must be at least 1");
        Self {
            window,
            sum_lat: 0.0,
            sum_lon: 0.0,
            count: 0,
            last_t: None,
            first_idx: 0,
            next_idx: 0,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Number of samples currently buffered (< window).
    pub fn buffered(&self) -> usize {
        self.count
    }

    /// Pushes one raw sample; returns a `WindowPoint` when it completes a
    /// window. Rejects non-increasing timestamps.
    pub fn push(&mut self, s: &LocationSample) -> Result<Option<WindowPoint>, DownsampleError> {
        if let Some(prev) = self.last_t {
            if s.t <= prev {
                return Err(DownsampleError::NonMonotonic { t: s.t, prev });
            }
        }
        self.last_t = Some(s.t);
        if self.count == 0 {
            self.first_idx = self.next_idx;
        }
        self.sum_lat += s.lat;
        self.sum_lon += s.lon;
        self.count += 1;
        self.next_idx += 1;
        if self.count == self.window {
            Ok(Some(self.emit(s.t, true)))
        } else {
            Ok(None)
        }
    }

    /// Emits the partial window if any samples are buffered; clears state.
    pub fn flush(&mut self) -> Option<WindowPoint> {
        if self.count == 0 {
            return None;
        }
        let t = self.last_t.expect("buffered samples imply a timestamp");
        Some(self.emit(t, false))
    }

    /// Drops any buffered partial window without emitting it.
    pub fn clear(&mut self) {
        self.sum_lat = 0.0;
        self.sum_lon = 0.0;
        self.count = 0;
    }

    fn emit(&mut self, t: i64, complete: bool) -> WindowPoint {
        let n = self.count as f64;
        let wp = WindowPoint {
            t,
            pos: Point::new(self.sum_lat / n, self.sum_lon / n),
            raw_span: (self.first_idx, self.next_idx - 1),
            complete,
        };
        self.clear();
        wp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn s(t: i64, lat: f64, lon: f64) -> LocationSample {
        LocationSample::new(t, lat, lon)
    }

    /// Brute-force blocked mean over a full trace, the oracle for push/flush.
    fn blocked_means(samples: &[LocationSample], w: usize) -> Vec<(f64, f64)> {
        samples
            .chunks(w)
            .filter(|c| c.len() == w)
            .map(|c| {
                let n = c.len() as f64;
                (
                    c.iter().map(|x| x.lat).sum::<f64>() / n,
                    c.iter().map(|x| x.lon).sum::<f64>() / n,
                )
            })
            .collect()
    }

    #[test]
    fn emits_mean_on_third_push() {
        let mut d = Downsampler::new(3);
        assert_eq!(d.push(&s(0, 0.0, 0.0)).unwrap(), None);
        assert_eq!(d.push(&s(2000, 0.0, 0.0003)).unwrap(), None);
        let wp = d.push(&s(4000, 0.0, 0.0006)).unwrap().unwrap();
        assert_eq!(wp.t, 4000);
        assert_relative_eq!(wp.pos.lat, 0.0);
        assert_relative_eq!(wp.pos.lon, 0.0003, max_relative = 1e-12);
        assert_eq!(wp.raw_span, (0, 2));
        assert!(wp.complete);
    }

    #[test]
    fn two_pushes_do_not_emit() {
        let mut d = Downsampler::new(3);
        d.push(&s(0, 1.0, 1.0)).unwrap();
        assert_eq!(d.push(&s(1, 1.0, 1.0)).unwrap(), None);
        assert_eq!(d.buffered(), 2);
    }

    #[test]
    fn nine_sample_trace_matches_blocked_mean_oracle() {
        let samples: Vec<_> = (0..9)
            .map(|i| s(i as i64 * 2000, 35.0 + i as f64 * 1e-4, 14.0 - i as f64 * 2e-4))
            .collect();
        let expect = blocked_means(&samples, 3);
        let mut d = Downsampler::new(3);
        let mut got = Vec::new();
        for smp in &samples {
            if let Some(wp) = d.push(smp).unwrap() {
                got.push((wp.pos.lat, wp.pos.lon));
                assert_eq!(wp.raw_span.1 - wp.raw_span.0 + 1, 3);
            }
        }
        assert_eq!(got.len(), 3);
        for (g, e) in got.iter().zip(&expect) {
            assert_relative_eq!(g.0, e.0, max_relative = 1e-12);
            assert_relative_eq!(g.1, e.1, max_relative = 1e-12);
        }
        // Equal blocks: the mean of the window means is the raw mean.
        let window_mean = got.iter().map(|g| g.0).sum::<f64>() / got.len() as f64;
        let raw_mean = samples.iter().map(|s| s.lat).sum::<f64>() / samples.len() as f64;
        assert_relative_eq!(window_mean, raw_mean, max_relative = 1e-12);
    }

    #[test]
    fn flush_emits_partial_average() {
        let mut d = Downsampler::new(3);
        d.push(&s(0, 1.0, 2.0)).unwrap();
        d.push(&s(1000, 2.0, 4.0)).unwrap();
        let wp = d.flush().unwrap();
        assert!(!wp.complete);
        assert_eq!(wp.t, 1000);
        assert_relative_eq!(wp.pos.lat, 1.5);
        assert_relative_eq!(wp.pos.lon, 3.0);
        assert_eq!(wp.raw_span, (0, 1));
        assert_eq!(d.flush(), None);
    }

    #[test]
    fn flush_after_each_group_of_four() {
        // W=3 with a flush after every 4th sample: one complete window plus
        // one single-sample partial per group.
        let samples: Vec<_> = (0..8).map(|i| s(i as i64 * 1000, i as f64, -(i as f64))).collect();
        let mut d = Downsampler::new(3);
        let mut out = Vec::new();
        for (i, smp) in samples.iter().enumerate() {
            if let Some(wp) = d.push(smp).unwrap() {
                out.push(wp);
            }
            if i % 4 == 3 {
                if let Some(wp) = d.flush() {
                    out.push(wp);
                }
            }
        }
        assert_eq!(out.len(), 4);
        assert!(out[0].complete && !out[1].complete);
        // First group: mean of samples 0..3, then sample 3 alone.
        assert_relative_eq!(out[0].pos.lat, 1.0);
        assert_relative_eq!(out[1].pos.lat, 3.0);
        assert_eq!(out[1].raw_span, (3, 3));
        // Second group: samples 4..7 then 7 alone.
        assert_relative_eq!(out[2].pos.lat, 5.0);
        assert_relative_eq!(out[3].pos.lat, 7.0);
    }

    #[test]
    fn window_one_is_identity() {
        let mut d = Downsampler::new(1);
        for i in 0..5 {
            let smp = s(i as i64 * 2000, 35.0 + i as f64, 14.0);
            let wp = d.push(&smp).unwrap().unwrap();
            assert_eq!(wp.t, smp.t);
            assert_eq!(wp.pos.lat, smp.lat);
            assert_eq!(wp.raw_span, (i, i));
        }
    }

    #[test]
    fn complete_window_count_is_floor_n_over_w() {
        for w in 1..6usize {
            for n in 0..20usize {
                let mut d = Downsampler::new(w);
                let mut count = 0;
                for i in 0..n {
                    if d.push(&s(i as i64, 0.0, 0.0)).unwrap().is_some() {
                        count += 1;
                    }
                }
                assert_eq!(count, n / w, "w={w} n={n}");
            }
        }
    }

    #[test]
    fn rejects_non_monotonic_timestamps() {
        let mut d = Downsampler::new(3);
        d.push(&s(1000, 0.0, 0.0)).unwrap();
        assert_eq!(
            d.push(&s(1000, 0.0, 0.0)),
            Err(DownsampleError::NonMonotonic { t: 1000, prev: 1000 })
        );
        assert_eq!(
            d.push(&s(500, 0.0, 0.0)),
            Err(DownsampleError::NonMonotonic { t: 500, prev: 1000 })
        );
    }
}
