//! GPS noise characterization: static scatter statistics and the effect of
//! averaging-window size on velocity estimates over straight-line runs.

use thiserror::Error;

use crate::geo::{haversine, LocationSeq, Point};

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("need at least {need} fixes, got {got}")]
    InsufficientFixes { need: usize, got: usize },
}

/// Mean position and maximum componentwise deviation of a static recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticNoiseStats {
    pub mean: Point<f64>,
    pub max_dev_lat: f64,
    pub max_dev_lon: f64,
}

/// Deviation of every fix from the mean recorded location.
pub fn static_noise_stats(fixes: &LocationSeq) -> Result<StaticNoiseStats, NoiseError> {
    if fixes.len() < 2 {
        return Err(NoiseError::InsufficientFixes { need: 2, got: fixes.len() });
    }
    let n = fixes.len() as f64;
    let mean = Point::new(
        fixes.iter().map(|s| s.lat).sum::<f64>() / n,
        fixes.iter().map(|s| s.lon).sum::<f64>() / n,
    );
    let max_dev_lat =
        fixes.iter().map(|s| (s.lat - mean.lat).abs()).fold(0.0, f64::max);
    let max_dev_lon =
        fixes.iter().map(|s| (s.lon - mean.lon).abs()).fold(0.0, f64::max);
    Ok(StaticNoiseStats { mean, max_dev_lat, max_dev_lon })
}

/// A straight-line calibration run with its known nominal speed.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRun {
    pub seq: LocationSeq,
    pub nominal_mps: f64,
}

/// Blocked average of a run at window size `w` and phase offset `k`:
/// complete windows only, mean position and mean timestamp (seconds).
fn blocked(seq: &LocationSeq, w: usize, k: usize) -> Vec<(f64, Point<f64>)> {
    seq.as_slice()[k.min(seq.len())..]
        .chunks(w)
        .filter(|c| c.len() == w)
        .map(|c| {
            let n = c.len() as f64;
            let t = c.iter().map(|s| s.t as f64 / 1000.0).sum::<f64>() / n;
            let lat = c.iter().map(|s| s.lat).sum::<f64>() / n;
            let lon = c.iter().map(|s| s.lon).sum::<f64>() / n;
            (t, Point::new(lat, lon))
        })
        .collect()
}

/// Absolute deviations of consecutive-pair velocities from the nominal, for
/// every phase offset of the blocked average at window size `w`.
pub fn velocity_deviations(run: &NoiseRun, w: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..w {
        let d = blocked(&run.seq, w, k);
        for pair in d.windows(2) {
            let (t0, p0) = pair[0];
            let (t1, p1) = pair[1];
            let v = haversine(p0, p1) / (t1 - t0);
            out.push((v - run.nominal_mps).abs());
        }
    }
    out
}

/// Mean velocity discrepancy per window size.
///
/// For each `w`, every phase offset of every run is down-sampled by blocked
/// averaging; consecutive-pair velocities are compared against the run's
/// nominal speed; the per-(run, phase) mean (normalized by the number of
/// down-sampled points) is averaged over phases and runs. Run/phase
/// combinations shorter than two windows are skipped with a warning; window
/// sizes with no usable combination are omitted from the output.
pub fn dynamic_noise_sweep(
    runs: &[NoiseRun],
    w_range: std::ops::RangeInclusive<usize>,
) -> Vec<(usize, f64)> {
    let mut sweep = Vec::new();
    for w in w_range {
        if w == 0 {
            continue;
        }
        let mut total = 0.0;
        let mut included = 0usize;
        for (i, run) in runs.iter().enumerate() {
            for k in 0..w {
                let d = blocked(&run.seq, w, k);
                if d.len() < 2 {
                    log::warn!("noise sweep: run {i} shorter than 2 windows at w={w}, phase {k}; skipped");
                    continue;
                }
                let mut sum = 0.0;
                for pair in d.windows(2) {
                    let (t0, p0) = pair[0];
                    let (t1, p1) = pair[1];
                    sum += (haversine(p0, p1) / (t1 - t0) - run.nominal_mps).abs();
                }
                total += sum / d.len() as f64;
                included += 1;
            }
        }
        if included > 0 {
            sweep.push((w, total / included as f64));
        }
    }
    sweep
}
