//! Motion-detector tuning and journey-detection validation.
//!
//! Classifies labeled accelerometer runs with the motion FSM, scores
//! parameter sets with a cost that trades error rates against decision
//! latency, and searches the 5-parameter box with simulated annealing (or
//! plain random search as a baseline). Also scores detected journeys
//! against ground-truth diaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Journey;
use crate::motion::{FilteredAccel, MotionFsm, MotionParams, MotionPhase};

#[derive(Debug, Error, PartialEq)]
pub enum TuningError {
    #[error("need at least one run of each label")]
    MissingLabel,
    #[error("invalid motion params: {0}")]
    BadParams(String),
    #[error("diary entries overlap at index {0}")]
    OverlappingDiary(usize),
    #[error("motion run replay failed: {0}")]
    Replay(String),
}

/// A labeled accelerometer recording. Motion runs carry the true onset
/// timestamp; no-motion runs are stationary throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledAccelRun {
    pub samples: Vec<FilteredAccel>,
    pub motion: bool,
    pub onset_t: Option<i64>,
}

/// Confusion counts per actual class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
    pub false_pos: usize,
}

/// Classification rates and mean decision latencies over a run set.
/// Rates are normalized per actual class; latencies are in samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    pub fnr: f64,
    pub fpr: f64,
    /// Mean samples to settle a true negative (first rejected Extra
    /// excursion, or the run length when none occurs).
    pub negative_delay: f64,
    /// Mean samples from true onset to the confirming decision.
    pub positive_delay: f64,
    pub confusion: Confusion,
}

/// Scalar tuning cost. False negatives carry three times the weight of
/// false positives; latency terms are two orders of magnitude lighter.
pub fn cost(outcome: &ClassificationOutcome) -> f64 {
    12.0 * outcome.fnr
        + 4.0 * outcome.fpr
        + 0.02 * outcome.negative_delay
        + 0.04 * outcome.positive_delay
}

/// Replays every run through a fresh FSM with `params` and aggregates the
/// outcome. A motion run counts as detected if any decision fires; a
/// no-motion run counts as a false positive if one does.
pub fn score_params(
    params: &MotionParams,
    runs: &[LabeledAccelRun],
) -> Result<ClassificationOutcome, TuningError> {
    params.validate().map_err(TuningError::BadParams)?;
    if !runs.iter().any(|r| r.motion) || !runs.iter().any(|r| !r.motion) {
        return Err(TuningError::MissingLabel);
    }
    let mut confusion = Confusion::default();
    let (mut pos_delay_sum, mut pos_delay_n) = (0.0, 0usize);
    let (mut neg_delay_sum, mut neg_delay_n) = (0.0, 0usize);

    for run in runs {
        let mut fsm = MotionFsm::new(*params);
        let mut decision_idx: Option<usize> = None;
        let mut first_rejection: Option<usize> = None;
        for (i, f) in run.samples.iter().enumerate() {
            let before = fsm.phase();
            let decision = fsm
                .on_filtered(*f)
                .map_err(|e| TuningError::Replay(e.to_string()))?;
            if before == MotionPhase::Extra
                && fsm.phase() == MotionPhase::Check
                && first_rejection.is_none()
            {
                first_rejection = Some(i + 1);
            }
            if decision.is_some() {
                decision_idx = Some(i);
                break;
            }
        }
        if run.motion {
            match decision_idx {
                Some(i) => {
                    confusion.true_pos += 1;
                    let decision_t = run.samples[i].t;
                    let onset = run.onset_t.unwrap_or_else(|| run.samples[0].t);
                    let delay = run
                        .samples
                        .iter()
                        .filter(|s| s.t >= onset && s.t <= decision_t)
                        .count();
                    pos_delay_sum += delay as f64;
                    pos_delay_n += 1;
                }
                None => confusion.false_neg += 1,
            }
        } else {
            match decision_idx {
                Some(_) => confusion.false_pos += 1,
                None => {
                    confusion.true_neg += 1;
                    neg_delay_sum += first_rejection.unwrap_or(run.samples.len()) as f64;
                    neg_delay_n += 1;
                }
            }
        }
    }

    let pos = (confusion.true_pos + confusion.false_neg) as f64;
    let neg = (confusion.true_neg + confusion.false_pos) as f64;
    Ok(ClassificationOutcome {
        fnr: confusion.false_neg as f64 / pos,
        fpr: confusion.false_pos as f64 / neg,
        negative_delay: if neg_delay_n > 0 { neg_delay_sum / neg_delay_n as f64 } else { 0.0 },
        positive_delay: if pos_delay_n > 0 { pos_delay_sum / pos_delay_n as f64 } else { 0.0 },
        confusion,
    })
}

/// Annealing schedule and proposal settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealingConfig {
    pub epochs: usize,
    pub initial_temp: f64,
    /// Geometric cooling factor per epoch.
    pub cooling: f64,
    /// Proposal width as a fraction of each parameter's range.
    pub proposal_frac: f64,
    pub seed: u64,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        Self { epochs: 10_000, initial_temp: 1.0, cooling: 0.995, proposal_frac: 0.1, seed: 0 }
    }
}

fn propose(current: &MotionParams, cfg: &AnnealingConfig, rng: &mut ChaCha8Rng) -> MotionParams {
    let (len_lo, len_hi) = MotionParams::LEN_RANGE;
    let (th_lo, th_hi) = MotionParams::THRESHOLD_RANGE;
    let (w_lo, w_hi) = MotionParams::WINDOWS_RANGE;
    let len_width = (len_hi - len_lo) as f64 * cfg.proposal_frac;
    let th_width = (th_hi - th_lo) * cfg.proposal_frac;
    let w_width = (w_hi - w_lo) as f64 * cfg.proposal_frac;

    let step_int = |cur: usize, width: f64, lo: usize, hi: usize, rng: &mut ChaCha8Rng| {
        let delta = rng.random_range(-width..=width);
        ((cur as f64 + delta).round() as i64).clamp(lo as i64, hi as i64) as usize
    };
    let step_float = |cur: f64, width: f64, lo: f64, hi: f64, rng: &mut ChaCha8Rng| {
        (cur + rng.random_range(-width..=width)).clamp(lo, hi)
    };

    MotionParams {
        first_len: step_int(current.first_len, len_width, len_lo, len_hi, rng),
        first_threshold: step_float(current.first_threshold, th_width, th_lo, th_hi, rng),
        second_len: step_int(current.second_len, len_width, len_lo, len_hi, rng),
        second_threshold: step_float(current.second_threshold, th_width, th_lo, th_hi, rng),
        second_windows: step_int(current.second_windows, w_width.max(1.0), w_lo, w_hi, rng),
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> MotionParams {
    let (len_lo, len_hi) = MotionParams::LEN_RANGE;
    let (th_lo, th_hi) = MotionParams::THRESHOLD_RANGE;
    let (w_lo, w_hi) = MotionParams::WINDOWS_RANGE;
    MotionParams {
        first_len: rng.random_range(len_lo..=len_hi),
        first_threshold: rng.random_range(th_lo..=th_hi),
        second_len: rng.random_range(len_lo..=len_hi),
        second_threshold: rng.random_range(th_lo..=th_hi),
        second_windows: rng.random_range(w_lo..=w_hi),
    }
}

/// Simulated annealing over the 5-parameter box with Metropolis acceptance.
/// Deterministic for a given seed. Returns the best parameters seen and
/// their outcome. A zero initial temperature degenerates to greedy descent.
pub fn anneal(
    runs: &[LabeledAccelRun],
    cfg: &AnnealingConfig,
) -> Result<(MotionParams, ClassificationOutcome), TuningError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = random_params(&mut rng);
    let mut current_cost = cost(&score_params(&current, runs)?);
    let mut best = current;
    let mut best_cost = current_cost;
    let mut temp = cfg.initial_temp;

    for _ in 0..cfg.epochs {
        let candidate = propose(&current, cfg, &mut rng);
        let candidate_cost = cost(&score_params(&candidate, runs)?);
        let delta = candidate_cost - current_cost;
        let accept = if delta <= 0.0 {
            true
        } else if temp > 0.0 {
            rng.random::<f64>() < (-delta / temp).exp()
        } else {
            false
        };
        if accept {
            current = candidate;
            current_cost = candidate_cost;
            if current_cost < best_cost {
                best = current;
                best_cost = current_cost;
            }
        }
        temp *= cfg.cooling;
    }
    let outcome = score_params(&best, runs)?;
    Ok((best, outcome))
}

/// Uniform random search over the box; the comparison baseline.
pub fn random_search(
    runs: &[LabeledAccelRun],
    cfg: &AnnealingConfig,
) -> Result<(MotionParams, ClassificationOutcome), TuningError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best = random_params(&mut rng);
    let mut best_cost = cost(&score_params(&best, runs)?);
    for _ in 1..cfg.epochs {
        let candidate = random_params(&mut rng);
        let candidate_cost = cost(&score_params(&candidate, runs)?);
        if candidate_cost < best_cost {
            best = candidate;
            best_cost = candidate_cost;
        }
    }
    let outcome = score_params(&best, runs)?;
    Ok((best, outcome))
}

/// One ground-truth journey interval from an annotator diary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiaryEntry {
    pub start_t: i64,
    pub end_t: i64,
    /// Approximate true journey extent (bounds diagonal), when known.
    #[serde(default)]
    pub diag_m: Option<f64>,
}

/// How each diary entry fared against the detected journeys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub full: usize,
    pub clipped: usize,
    pub missed: usize,
    pub full_fraction: f64,
    pub clipped_fraction: f64,
    pub missed_fraction: f64,
}

/// Scores detected journeys against a diary. An entry is fully detected
/// when a single journey covers it up to `tol_s` at each end, clipped when
/// some journey overlaps it, and missed otherwise.
pub fn validate_detection(
    detected: &[Journey],
    truth: &[DiaryEntry],
    tol_s: f64,
) -> Result<DetectionReport, TuningError> {
    let mut sorted: Vec<&DiaryEntry> = truth.iter().collect();
    sorted.sort_by_key(|e| e.start_t);
    for i in 1..sorted.len() {
        if sorted[i].start_t < sorted[i - 1].end_t {
            return Err(TuningError::OverlappingDiary(i));
        }
    }
    let tol_ms = (tol_s * 1000.0) as i64;
    let (mut full, mut clipped, mut missed) = (0usize, 0usize, 0usize);
    for entry in truth {
        let covered = detected
            .iter()
            .any(|j| j.start_t <= entry.start_t + tol_ms && j.end_t >= entry.end_t - tol_ms);
        let overlaps = detected
            .iter()
            .any(|j| j.start_t < entry.end_t && j.end_t > entry.start_t);
        if covered {
            full += 1;
        } else if overlaps {
            clipped += 1;
        } else {
            missed += 1;
        }
    }
    let n = truth.len().max(1) as f64;
    Ok(DetectionReport {
        full,
        clipped,
        missed,
        full_fraction: full as f64 / n,
        clipped_fraction: clipped as f64 / n,
        missed_fraction: missed as f64 / n,
    })
}
