//! Monte-Carlo realization of the abstract renewal processes behind the
//! closed forms.
//!
//! The oracle simulates exactly what the formulas assume -- Bernoulli AP
//! interruptions at rate `beta_a`, Bernoulli collisions at rate `beta_s` --
//! rather than the 802.11 protocol. That makes it an independent check of
//! the stage coefficients and restart recursions: if the algebra is right,
//! the closed forms must sit within a few standard errors of these
//! estimates. It deliberately knows nothing about slot durations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backoff::BackoffSchedule;
use crate::error::{ModelError, Result};
use crate::stats::mean_and_se;

/// Sample statistics of the STA's per-packet renewal cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct StaCycleStats {
    /// Estimate of the restart-aware mean data backoff.
    pub mean_data_slots: f64,
    /// Estimate of the mean PS-POLL countdown slots per packet.
    pub mean_pspoll_slots: f64,
    /// Estimate of the mean AP successes per packet.
    pub mean_ap_successes: f64,
    /// Measured attempts per packet (the truncated-sum formula is an
    /// approximation of this; the oracle records the truth).
    pub mean_sta_attempts: f64,
    pub n_cycles: u64,
    pub se_data_slots: f64,
    pub se_pspoll_slots: f64,
    pub se_ap_successes: f64,
    pub se_sta_attempts: f64,
}

/// Sample statistics of the AP's retry-chain renewal cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct ApCycleStats {
    pub mean_attempts: f64,
    pub mean_slots: f64,
    pub n_cycles: u64,
    pub se_attempts: f64,
    pub se_slots: f64,
}

/// Position of the first AP attempt, geometric on 0, 1, 2, ... with
/// success probability `beta`. `None` means the AP never attempts.
///
/// One inverse-CDF draw replaces the per-slot Bernoulli scan; the two are
/// identical in distribution, and comparing the draw with the sampled
/// backoff classifies the walk in O(1).
struct FirstAttempt {
    ln_miss: Option<f64>,
}

impl FirstAttempt {
    fn new(beta: f64) -> Self {
        Self {
            ln_miss: (beta > 0.0).then(|| (1.0 - beta).ln()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u64> {
        let ln_miss = self.ln_miss?;
        // 1 - gen::<f64>() lies in (0, 1], so the log is finite.
        let u = 1.0 - rng.gen::<f64>();
        Some((u.ln() / ln_miss) as u64)
    }
}

fn check_rate(name: &'static str, rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!(
            "{name} must lie in [0, 1), got {rate}"
        )))
    }
}

/// Simulates `n_cycles` STA packet cycles against a Bernoulli AP.
///
/// One cycle runs from taking a fresh packet at stage 0 until the packet
/// is transmitted or discarded at a stage-K collision. An AP attempt
/// strictly before the attempt slot interrupts the walk: the slots counted
/// so far go to the data tally, the residual goes to the PS-POLL tally,
/// and the walk restarts at stage 0 within the same cycle.
pub fn simulate_sta_cycles(
    beta_a: f64,
    schedule: &BackoffSchedule,
    n_cycles: u64,
    seed: u64,
) -> Result<StaCycleStats> {
    check_rate("beta_a", beta_a)?;
    if n_cycles == 0 {
        return Err(ModelError::InvalidParameter("n_cycles must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first_attempt = FirstAttempt::new(beta_a);
    let max_stage = schedule.max_stage();

    let mut sums = [0.0f64; 4];
    let mut sq = [0.0f64; 4];
    for _ in 0..n_cycles {
        let mut data_slots = 0u64;
        let mut pspoll_slots = 0u64;
        let mut ap_successes = 0u64;
        let mut attempts = 0u64;
        let mut stage = 0usize;
        loop {
            let backoff = u64::from(schedule.sample_backoff(stage, &mut rng)?);
            match first_attempt.sample(&mut rng) {
                Some(pos) if pos < backoff => {
                    // AP success: walk interrupted, residual goes to the poll.
                    data_slots += pos;
                    pspoll_slots += backoff - pos;
                    ap_successes += 1;
                    stage = 0;
                }
                Some(pos) if pos == backoff => {
                    // Collision at the attempt slot.
                    data_slots += backoff;
                    attempts += 1;
                    if stage == max_stage {
                        break; // discard ends the cycle
                    }
                    stage += 1;
                }
                _ => {
                    // STA success.
                    data_slots += backoff;
                    attempts += 1;
                    break;
                }
            }
        }
        for (acc, v) in [data_slots, pspoll_slots, ap_successes, attempts]
            .into_iter()
            .enumerate()
        {
            let v = v as f64;
            sums[acc] += v;
            sq[acc] += v * v;
        }
    }

    let (mean_data_slots, se_data_slots) = mean_and_se(sums[0], sq[0], n_cycles);
    let (mean_pspoll_slots, se_pspoll_slots) = mean_and_se(sums[1], sq[1], n_cycles);
    let (mean_ap_successes, se_ap_successes) = mean_and_se(sums[2], sq[2], n_cycles);
    let (mean_sta_attempts, se_sta_attempts) = mean_and_se(sums[3], sq[3], n_cycles);
    Ok(StaCycleStats {
        mean_data_slots,
        mean_pspoll_slots,
        mean_ap_successes,
        mean_sta_attempts,
        n_cycles,
        se_data_slots,
        se_pspoll_slots,
        se_ap_successes,
        se_sta_attempts,
    })
}

/// Simulates `n_cycles` AP retry chains against Bernoulli collisions at
/// rate `beta_s`: sample a backoff, count it, attempt; a collision advances
/// the stage (discard at K ends the cycle), success ends the cycle.
pub fn simulate_ap_cycles(
    beta_s: f64,
    schedule: &BackoffSchedule,
    n_cycles: u64,
    seed: u64,
) -> Result<ApCycleStats> {
    check_rate("beta_s", beta_s)?;
    if n_cycles == 0 {
        return Err(ModelError::InvalidParameter("n_cycles must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_stage = schedule.max_stage();

    let (mut sum_a, mut sq_a) = (0.0f64, 0.0f64);
    let (mut sum_x, mut sq_x) = (0.0f64, 0.0f64);
    for _ in 0..n_cycles {
        let mut attempts = 0u64;
        let mut slots = 0u64;
        let mut stage = 0usize;
        loop {
            slots += u64::from(schedule.sample_backoff(stage, &mut rng)?);
            attempts += 1;
            let collided = beta_s > 0.0 && rng.gen::<f64>() < beta_s;
            if !collided || stage == max_stage {
                break;
            }
            stage += 1;
        }
        let (a, x) = (attempts as f64, slots as f64);
        sum_a += a;
        sq_a += a * a;
        sum_x += x;
        sq_x += x * x;
    }

    let (mean_attempts, se_attempts) = mean_and_se(sum_a, sq_a, n_cycles);
    let (mean_slots, se_slots) = mean_and_se(sum_x, sq_x, n_cycles);
    Ok(ApCycleStats {
        mean_attempts,
        mean_slots,
        n_cycles,
        se_attempts,
        se_slots,
    })
}
