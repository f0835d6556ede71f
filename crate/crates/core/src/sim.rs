//! Slot-level simulation of DCF contention between a saturated AP and a
//! saturated power-save STA.
//!
//! The simulator plays the protocol, not the model's approximations: the
//! AP freezes and resumes its counter across STA transmissions, while every
//! AP data success is followed by a contention-free PS-POLL countdown on
//! the STA's residual backoff, after which both contenders sample fresh
//! stage-0 backoffs. The channel is error-free; all losses are collisions.
//! Beacons and the sleep state play no role under saturation and are not
//! modeled.
//!
//! Time is accumulated in integer nanoseconds, so per-phase accounting sums
//! to the total exactly and identical seeds give bit-identical counters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backoff::BackoffSchedule;
use crate::error::{ModelError, Result};
use crate::stats::t_interval_halfwidth;
use crate::timing::{frame_durations, Nanos, PhyParams};

/// Number of batches used for batch-means confidence intervals.
pub const BATCH_COUNT: usize = 20;

/// Run length, measured either on the restricted-slot axis or in
/// simulated microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    RestrictedSlots(u64),
    SimMicros(u64),
}

/// What the STA does with its data backoff after serving a PS-POLL.
///
/// The protocol resamples from the initial window (`ResetToStageZero`).
/// `PreserveStage` keeps the collision stage across the poll and exists as
/// an experimental control for isolating the restart effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RestartPolicy {
    #[default]
    ResetToStageZero,
    PreserveStage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub phy: PhyParams,
    pub schedule: BackoffSchedule,
    pub seed: u64,
    pub horizon: Horizon,
    /// Fraction of the horizon discarded before counting begins.
    pub warmup_fraction: f64,
    pub sta_restart: RestartPolicy,
}

impl SimConfig {
    pub fn new(phy: PhyParams, schedule: BackoffSchedule, seed: u64, horizon: Horizon) -> Self {
        Self {
            phy,
            schedule,
            seed,
            horizon,
            warmup_fraction: 0.1,
            sta_restart: RestartPolicy::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.warmup_fraction) {
            return Err(ModelError::InvalidParameter(format!(
                "sim.warmup_fraction must lie in [0, 0.5], got {}",
                self.warmup_fraction
            )));
        }
        Ok(())
    }
}

/// Per-batch tallies for batch-means interval estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchCounters {
    pub restricted_idle_slots: u64,
    pub ap_attempts: u64,
    pub sta_data_attempts: u64,
    pub ap_successes: u64,
    pub sta_successes: u64,
    pub collisions: u64,
    pub pspoll_count: u64,
    pub pspoll_countdown_slots: u64,
    pub sim_time: Nanos,
}

/// Raw tallies of one run, after warmup removal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimCounters {
    /// Slots in which both contenders decremented their counters.
    pub restricted_idle_slots: u64,
    pub ap_attempts: u64,
    pub sta_data_attempts: u64,
    pub ap_successes: u64,
    pub sta_successes: u64,
    pub collisions: u64,
    pub ap_discards: u64,
    pub sta_discards: u64,
    /// PS-POLL exchanges; equals `ap_successes` under saturation.
    pub pspoll_count: u64,
    /// Residual slots counted down before PS-POLLs; at least one per poll.
    pub pspoll_countdown_slots: u64,
    pub sim_time: Nanos,
    pub time_in_ap_success: Nanos,
    pub time_in_sta_success: Nanos,
    pub time_in_collision: Nanos,
    pub time_in_idle: Nanos,
    pub time_in_pspoll: Nanos,
    /// Restricted slots spent with the STA at each backoff stage.
    pub sta_stage_slots: Vec<u64>,
    pub batches: Vec<BatchCounters>,
}

impl SimCounters {
    fn snapshot(&self) -> BatchCounters {
        BatchCounters {
            restricted_idle_slots: self.restricted_idle_slots,
            ap_attempts: self.ap_attempts,
            sta_data_attempts: self.sta_data_attempts,
            ap_successes: self.ap_successes,
            sta_successes: self.sta_successes,
            collisions: self.collisions,
            pspoll_count: self.pspoll_count,
            pspoll_countdown_slots: self.pspoll_countdown_slots,
            sim_time: self.sim_time,
        }
    }
}

fn batch_delta(cur: BatchCounters, prev: BatchCounters) -> BatchCounters {
    BatchCounters {
        restricted_idle_slots: cur.restricted_idle_slots - prev.restricted_idle_slots,
        ap_attempts: cur.ap_attempts - prev.ap_attempts,
        sta_data_attempts: cur.sta_data_attempts - prev.sta_data_attempts,
        ap_successes: cur.ap_successes - prev.ap_successes,
        sta_successes: cur.sta_successes - prev.sta_successes,
        collisions: cur.collisions - prev.collisions,
        pspoll_count: cur.pspoll_count - prev.pspoll_count,
        pspoll_countdown_slots: cur.pspoll_countdown_slots - prev.pspoll_countdown_slots,
        sim_time: cur.sim_time - prev.sim_time,
    }
}

/// One line of the optional event trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    /// Start time of the event.
    pub time: Nanos,
    pub kind: TraceEventKind,
    /// Backoff stage of each contender when the event began.
    pub ap_stage: usize,
    pub sta_stage: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEventKind {
    ApSuccess,
    PsPoll,
    StaSuccess,
    Collision,
}

impl TraceEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEventKind::ApSuccess => "ap_success",
            TraceEventKind::PsPoll => "pspoll",
            TraceEventKind::StaSuccess => "sta_success",
            TraceEventKind::Collision => "collision",
        }
    }
}

/// Runs the simulation to its horizon and returns the post-warmup tallies.
pub fn run_simulation(config: &SimConfig) -> Result<SimCounters> {
    run_simulation_observed(config, |_| {})
}

/// Like [`run_simulation`], invoking `observe` once per channel event
/// (idle slots are implied by the timestamps in between).
pub fn run_simulation_observed<F: FnMut(&TraceRecord)>(
    config: &SimConfig,
    mut observe: F,
) -> Result<SimCounters> {
    config.validate()?;
    let durations = frame_durations(&config.phy)?;
    let slot = Nanos::from_micros_f64(config.phy.slot_us);
    let ap_exchange = durations.ap_data_exchange();
    let t_s_sta = durations.t_s_sta;
    let t_s_pspl = durations.t_s_pspl;
    let t_c = durations.t_c;
    let max_stage = config.schedule.max_stage();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sample = |stage: usize, rng: &mut ChaCha8Rng| -> u64 {
        u64::from(
            config
                .schedule
                .sample_backoff(stage, rng)
                .expect("stage within schedule"),
        )
    };

    // Initial state: the AP already holds one buffered frame (as if a poll
    // was just served); both contenders start a stage-0 backoff.
    let mut ap_stage = 0usize;
    let mut sta_stage = 0usize;
    let mut ap_counter = sample(0, &mut rng);
    let mut sta_counter = sample(0, &mut rng);

    let total = match config.horizon {
        Horizon::RestrictedSlots(n) => n,
        Horizon::SimMicros(us) => us.saturating_mul(1_000),
    };
    let warmup = (total as f64 * config.warmup_fraction).floor() as u64;
    let batch_width = (total - warmup) / BATCH_COUNT as u64;

    // Degenerate schedules (all windows of one slot) generate unbounded
    // event chains without ever advancing the slot axis; cap the run so a
    // slot horizon always terminates.
    let event_cap = match config.horizon {
        Horizon::RestrictedSlots(n) => n.saturating_mul(50).saturating_add(1_000_000),
        Horizon::SimMicros(_) => u64::MAX,
    };

    let mut c = SimCounters {
        sta_stage_slots: vec![0; max_stage + 1],
        ..SimCounters::default()
    };
    // Progress over the whole run, warmup included.
    let mut progress_slots = 0u64;
    let mut progress_time = Nanos::ZERO;
    let mut events = 0u64;
    let mut recording = warmup == 0;
    let mut batch_mark = c.snapshot();
    let mut batches_done = 0u64;

    loop {
        let progress = match config.horizon {
            Horizon::RestrictedSlots(_) => progress_slots,
            Horizon::SimMicros(_) => progress_time.as_nanos(),
        };
        if progress >= total || events >= event_cap {
            break;
        }
        if !recording && progress >= warmup {
            recording = true;
            batch_mark = c.snapshot();
        }
        // Close batches whose span of the post-warmup axis is complete.
        if recording && batch_width > 0 {
            while batches_done < BATCH_COUNT as u64 - 1
                && progress >= warmup + (batches_done + 1) * batch_width
            {
                let snap = c.snapshot();
                c.batches.push(batch_delta(snap, batch_mark));
                batch_mark = snap;
                batches_done += 1;
            }
        }

        if ap_counter > 0 && sta_counter > 0 {
            // Restricted idle slot: both counters decrement.
            ap_counter -= 1;
            sta_counter -= 1;
            progress_slots += 1;
            progress_time += slot;
            if recording {
                c.restricted_idle_slots += 1;
                c.sta_stage_slots[sta_stage] += 1;
                c.sim_time += slot;
                c.time_in_idle += slot;
            }
        } else if ap_counter == 0 && sta_counter > 0 {
            // AP wins: data + ACK exchange, then the STA's residual counts
            // down contention-free and the PS-POLL is served.
            events += 1;
            observe(&TraceRecord {
                time: progress_time,
                kind: TraceEventKind::ApSuccess,
                ap_stage,
                sta_stage,
            });
            let residual = sta_counter;
            let pspoll_time = slot * residual + t_s_pspl;
            observe(&TraceRecord {
                time: progress_time + ap_exchange + slot * residual,
                kind: TraceEventKind::PsPoll,
                ap_stage,
                sta_stage,
            });
            progress_time += ap_exchange + pspoll_time;
            if recording {
                c.ap_attempts += 1;
                c.ap_successes += 1;
                c.pspoll_count += 1;
                c.pspoll_countdown_slots += residual;
                c.sim_time += ap_exchange + pspoll_time;
                c.time_in_ap_success += ap_exchange;
                c.time_in_pspoll += pspoll_time;
            }
            // The poll delivered the next buffered frame notice: the AP
            // refills and recontends from stage 0; the STA abandons its
            // spent backoff and starts its data frame afresh.
            ap_stage = 0;
            ap_counter = sample(0, &mut rng);
            sta_stage = match config.sta_restart {
                RestartPolicy::ResetToStageZero => 0,
                RestartPolicy::PreserveStage => sta_stage,
            };
            sta_counter = sample(sta_stage, &mut rng);
        } else if sta_counter == 0 && ap_counter > 0 {
            // STA wins; the AP's counter stays frozen across the exchange.
            events += 1;
            observe(&TraceRecord {
                time: progress_time,
                kind: TraceEventKind::StaSuccess,
                ap_stage,
                sta_stage,
            });
            progress_time += t_s_sta;
            if recording {
                c.sta_data_attempts += 1;
                c.sta_successes += 1;
                c.sim_time += t_s_sta;
                c.time_in_sta_success += t_s_sta;
            }
            sta_stage = 0;
            sta_counter = sample(0, &mut rng);
        } else {
            // Both counters at zero: collision.
            events += 1;
            observe(&TraceRecord {
                time: progress_time,
                kind: TraceEventKind::Collision,
                ap_stage,
                sta_stage,
            });
            progress_time += t_c;
            if recording {
                c.ap_attempts += 1;
                c.sta_data_attempts += 1;
                c.collisions += 1;
                c.sim_time += t_c;
                c.time_in_collision += t_c;
            }
            if ap_stage == max_stage {
                // Saturated queue: the discarded frame is replaced at once.
                if recording {
                    c.ap_discards += 1;
                }
                ap_stage = 0;
            } else {
                ap_stage += 1;
            }
            ap_counter = sample(ap_stage, &mut rng);
            if sta_stage == max_stage {
                if recording {
                    c.sta_discards += 1;
                }
                sta_stage = 0;
            } else {
                sta_stage += 1;
            }
            sta_counter = sample(sta_stage, &mut rng);
        }
    }

    // The last event can cross several boundaries at once; close what the
    // run actually covered, then let the final batch absorb the remainder.
    if recording && batch_width > 0 {
        let progress = match config.horizon {
            Horizon::RestrictedSlots(_) => progress_slots,
            Horizon::SimMicros(_) => progress_time.as_nanos(),
        };
        while batches_done < BATCH_COUNT as u64 - 1
            && progress >= warmup + (batches_done + 1) * batch_width
        {
            let snap = c.snapshot();
            c.batches.push(batch_delta(snap, batch_mark));
            batch_mark = snap;
            batches_done += 1;
        }
        c.batches.push(batch_delta(c.snapshot(), batch_mark));
    }
    if c.batches.len() != BATCH_COUNT {
        // Too little post-warmup data to fill the batch design; interval
        // estimation is reported as unavailable downstream.
        c.batches.clear();
    }
    Ok(c)
}

/// Point estimates and batch-means 95% halfwidths derived from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalEstimates {
    /// AP data attempts per restricted idle slot.
    pub beta_a_hat: f64,
    /// STA data attempts per restricted idle slot.
    pub beta_s_hat: f64,
    /// PS-POLLs per countdown slot.
    pub beta_ps_hat: f64,
    /// Collisions per channel access point (idle slots plus events).
    pub p_coll_hat: f64,
    pub theta_ap_pkts_per_s: f64,
    pub theta_sta_pkts_per_s: f64,
    pub theta_ap_mbps: f64,
    pub theta_sta_mbps: f64,
    /// `None` when fewer than [`BATCH_COUNT`] batches of data exist.
    pub halfwidths: Option<ConfidenceHalfwidths>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceHalfwidths {
    pub beta_a: f64,
    pub beta_s: f64,
    pub beta_ps: f64,
    pub p_coll: f64,
    pub theta_ap_pkts_per_s: f64,
    pub theta_sta_pkts_per_s: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn access_points(b: &BatchCounters) -> u64 {
    b.restricted_idle_slots + b.ap_successes + b.sta_successes + b.collisions
}

/// Turns raw counters into rate and throughput estimates.
///
/// Rates with empty denominators are reported as zero. Confidence
/// halfwidths come from batch means over [`BATCH_COUNT`] batches and are
/// `None` when the run was too short to form them.
pub fn derive_estimates(counters: &SimCounters, config: &SimConfig) -> EmpiricalEstimates {
    let time_us = counters.sim_time.as_micros();
    let pkts_per_s = |successes: u64| {
        if time_us > 0.0 {
            successes as f64 / time_us * 1e6
        } else {
            0.0
        }
    };
    let theta_ap_pkts_per_s = pkts_per_s(counters.ap_successes);
    let theta_sta_pkts_per_s = pkts_per_s(counters.sta_successes);

    let halfwidths = (counters.batches.len() == BATCH_COUNT).then(|| {
        let per_batch = |f: &dyn Fn(&BatchCounters) -> f64| -> f64 {
            let values: Vec<f64> = counters.batches.iter().map(f).collect();
            t_interval_halfwidth(&values)
        };
        ConfidenceHalfwidths {
            beta_a: per_batch(&|b| ratio(b.ap_attempts, b.restricted_idle_slots)),
            beta_s: per_batch(&|b| ratio(b.sta_data_attempts, b.restricted_idle_slots)),
            beta_ps: per_batch(&|b| ratio(b.pspoll_count, b.pspoll_countdown_slots)),
            p_coll: per_batch(&|b| ratio(b.collisions, access_points(b))),
            theta_ap_pkts_per_s: per_batch(&|b| {
                let us = b.sim_time.as_micros();
                if us > 0.0 {
                    b.ap_successes as f64 / us * 1e6
                } else {
                    0.0
                }
            }),
            theta_sta_pkts_per_s: per_batch(&|b| {
                let us = b.sim_time.as_micros();
                if us > 0.0 {
                    b.sta_successes as f64 / us * 1e6
                } else {
                    0.0
                }
            }),
        }
    });

    EmpiricalEstimates {
        beta_a_hat: ratio(counters.ap_attempts, counters.restricted_idle_slots),
        beta_s_hat: ratio(counters.sta_data_attempts, counters.restricted_idle_slots),
        beta_ps_hat: ratio(counters.pspoll_count, counters.pspoll_countdown_slots),
        p_coll_hat: ratio(
            counters.collisions,
            counters.restricted_idle_slots
                + counters.ap_successes
                + counters.sta_successes
                + counters.collisions,
        ),
        theta_ap_pkts_per_s,
        theta_sta_pkts_per_s,
        theta_ap_mbps: theta_ap_pkts_per_s * f64::from(config.phy.ap_payload_bytes) * 8.0 / 1e6,
        theta_sta_mbps: theta_sta_pkts_per_s * f64::from(config.phy.sta_payload_bytes) * 8.0
            / 1e6,
        halfwidths,
    }
}
