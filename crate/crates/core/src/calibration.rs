//! Two-stage calibration: fixation cross, then eyes closed. The baseline is
//! the cumulative mean of engagement over the whole eyes-closed stage.

use serde::{Deserialize, Serialize};

use crate::signal::{quality_gate, tick_time_ms, SignalError, SignalSource};

/// Pilot-study threshold used when calibration is skipped: the midpoint of
/// the engagement scale.
pub const PILOT_BASELINE: f64 = 0.5;

pub const DEFAULT_STAGE_MS: u64 = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Fixation,
    EyesClosed,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("calibration incomplete: stage has no samples")]
    NoSamples,
    #[error("calibration incomplete during {stage:?} stage: {source}")]
    Incomplete {
        stage: Stage,
        fixation: RunningMean,
        eyes_closed: RunningMean,
        source: SignalError,
    },
    #[error("contact quality gate not passed")]
    QualityGate,
    #[error("stage durations must be positive")]
    InvalidDuration,
    #[error("sample value {0} outside [0, 1]")]
    OutOfRange(f64),
}

/// Streaming arithmetic mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningMean {
    count: u64,
    mean: f64,
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.mean += (x - self.mean) / self.count as f64;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }
}

/// Batch mean of one stage's samples.
pub fn compute_stage_mean(samples: &[f64]) -> Result<f64, CalibrationError> {
    if samples.is_empty() {
        return Err(CalibrationError::NoSamples);
    }
    if let Some(&bad) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(CalibrationError::OutOfRange(bad));
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub baseline: f64,
    /// `None` when calibration was skipped.
    pub fixation_mean: Option<f64>,
    pub eyes_closed_mean: Option<f64>,
    /// `fixation_mean − eyes_closed_mean`; negative when engagement rose
    /// with the eyes shut.
    pub range_open_shut: Option<f64>,
    pub fixation_samples: u64,
    pub eyes_closed_samples: u64,
    pub skipped: bool,
}

impl CalibrationResult {
    pub fn from_stages(
        fixation: &RunningMean,
        eyes_closed: &RunningMean,
    ) -> Result<Self, CalibrationError> {
        let (Some(fix), Some(closed)) = (fixation.mean(), eyes_closed.mean()) else {
            return Err(CalibrationError::NoSamples);
        };
        Ok(CalibrationResult {
            baseline: closed,
            fixation_mean: Some(fix),
            eyes_closed_mean: Some(closed),
            range_open_shut: Some(fix - closed),
            fixation_samples: fixation.count(),
            eyes_closed_samples: eyes_closed.count(),
            skipped: false,
        })
    }

    /// Result used when the calibration phase is skipped.
    pub fn skipped() -> Self {
        CalibrationResult {
            baseline: PILOT_BASELINE,
            fixation_mean: None,
            eyes_closed_mean: None,
            range_open_shut: None,
            fixation_samples: 0,
            eyes_closed_samples: 0,
            skipped: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageDurations {
    pub fixation_ms: u64,
    pub eyes_closed_ms: u64,
}

impl Default for StageDurations {
    fn default() -> Self {
        StageDurations {
            fixation_ms: DEFAULT_STAGE_MS,
            eyes_closed_ms: DEFAULT_STAGE_MS,
        }
    }
}

/// Runs both stages against `source`, ticking at `rate_hz` from `start_ms`.
/// Stage windows are half-open `[start, end)`, so a frame stamped exactly at
/// the fixation/eyes-closed boundary is counted once, in the eyes-closed
/// stage.
pub fn run_calibration<S: SignalSource + ?Sized>(
    source: &mut S,
    durations: StageDurations,
    rate_hz: u32,
    start_ms: u64,
) -> Result<CalibrationResult, CalibrationError> {
    if durations.fixation_ms == 0 || durations.eyes_closed_ms == 0 || rate_hz == 0 {
        return Err(CalibrationError::InvalidDuration);
    }
    if !quality_gate(&source.quality()) {
        return Err(CalibrationError::QualityGate);
    }
    let end = durations.fixation_ms + durations.eyes_closed_ms;
    let mut fixation = RunningMean::default();
    let mut eyes_closed = RunningMean::default();
    let mut k = 0u64;
    loop {
        let offset = tick_time_ms(k, rate_hz);
        if offset >= end {
            break;
        }
        let stage = if offset < durations.fixation_ms {
            Stage::Fixation
        } else {
            Stage::EyesClosed
        };
        let frame = source
            .next_frame(start_ms + offset)
            .map_err(|e| CalibrationError::Incomplete {
                stage,
                fixation,
                eyes_closed,
                source: e,
            })?;
        match stage {
            Stage::Fixation => fixation.push(frame.engagement),
            Stage::EyesClosed => eyes_closed.push(frame.engagement),
        }
        k += 1;
    }
    CalibrationResult::from_stages(&fixation, &eyes_closed)
}
