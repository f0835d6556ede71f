//! Contention-window schedule and the uniform backoff distribution.
//!
//! A schedule holds the window sizes `b_0..b_K`: after `k` collisions a
//! frame draws its backoff uniformly from `[0, b_k - 1]`, and a collision
//! at stage `K` discards the frame. The same schedule is shared by the
//! closed-form model, the Monte-Carlo oracle, and the protocol simulator.

use rand::Rng;

use crate::error::{ModelError, Result};
use crate::scalar::{from_count, Scalar};

/// Window cap applied by the doubling schedule (2^10).
pub const DEFAULT_CWCAP: u32 = 1024;
/// Default maximum backoff-stage index, i.e. K + 1 = 8 total attempts.
pub const DEFAULT_MAX_STAGE: usize = 7;
/// Default initial window.
pub const DEFAULT_CWMIN: u32 = 32;

/// Retry limit `K` and window sizes `b_0..b_K`.
///
/// `max_stage` is the maximum backoff-stage *index*: a schedule with
/// `max_stage() == K` allows K + 1 attempts before the frame is discarded,
/// matching the summation limits of the attempt-rate formulas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackoffSchedule {
    windows: Vec<u32>,
}

impl BackoffSchedule {
    /// Builds a schedule from explicit window sizes `b_0..b_K`.
    pub fn new(windows: Vec<u32>) -> Result<Self> {
        if windows.is_empty() {
            return Err(ModelError::InvalidParameter(
                "backoff schedule needs at least one window".into(),
            ));
        }
        if let Some(&bad) = windows.iter().find(|&&w| w == 0) {
            return Err(ModelError::InvalidParameter(format!(
                "backoff window must be >= 1, got {bad}"
            )));
        }
        Ok(Self { windows })
    }

    /// Doubling-with-cap schedule: `b_k = min(cwmin * 2^k, cwcap)`.
    pub fn from_cwmin(cwmin: u32, cwcap: u32, max_stage: usize) -> Result<Self> {
        if cwmin == 0 || cwcap == 0 {
            return Err(ModelError::InvalidParameter(
                "cwmin and cwcap must be >= 1".into(),
            ));
        }
        let windows = (0..=max_stage)
            .map(|k| {
                let doubled = (u64::from(cwmin)) << k.min(63);
                doubled.min(u64::from(cwcap)) as u32
            })
            .collect();
        Ok(Self { windows })
    }

    /// Maximum stage index K.
    pub fn max_stage(&self) -> usize {
        self.windows.len() - 1
    }

    pub fn windows(&self) -> &[u32] {
        &self.windows
    }

    /// Window size `b_k` for a stage, range-checked.
    pub fn window(&self, stage: usize) -> Result<u32> {
        self.windows
            .get(stage)
            .copied()
            .ok_or(ModelError::StageOutOfRange {
                stage,
                max_stage: self.max_stage(),
            })
    }

    /// Mean of the stage-`k` backoff, `(b_k - 1) / 2` slots.
    pub fn mean_backoff<S: Scalar>(&self, stage: usize) -> Result<S> {
        let b = self.window(stage)?;
        Ok(from_count::<S>(b - 1) * S::half())
    }

    /// Draws one stage-`k` backoff, uniform on `[0, b_k - 1]`.
    pub fn sample_backoff<R: Rng + ?Sized>(&self, stage: usize, rng: &mut R) -> Result<u32> {
        let b = self.window(stage)?;
        Ok(rng.gen_range(0..b))
    }
}

/// The 802.11b-style default: K = 7, windows 32, 64, ..., 1024 capped at 1024.
impl Default for BackoffSchedule {
    fn default() -> Self {
        Self::from_cwmin(DEFAULT_CWMIN, DEFAULT_CWCAP, DEFAULT_MAX_STAGE)
            .expect("default schedule is valid")
    }
}
