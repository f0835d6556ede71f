//! Closed-form attempt-rate and saturation-throughput model.
//!
//! The AP and the power-save STA are coupled through two per-slot attempt
//! probabilities on the restricted (backoff-only) time axis: the AP attempts
//! at `beta_a`, the STA at `beta_s`. The AP side is the classic truncated
//! exponential-backoff renewal ratio. The STA side is not: every AP success
//! hands the STA's residual backoff to a contention-free PS-POLL and makes
//! the STA resample from the initial window, so its mean backoff per data
//! packet must account for interrupted, restarted walks. That restart-aware
//! mean is built from per-stage coefficients and a geometric aggregation,
//! and the pair of rate equations is closed by a damped fixed-point
//! iteration. Throughputs follow from renewal-reward over channel events.
//!
//! Everything here is pure scalar arithmetic, generic over [`Scalar`].

use crate::backoff::BackoffSchedule;
use crate::error::{ModelError, Result};
use crate::scalar::{from_count, from_f64, to_f64, Scalar};
use crate::timing::{expected_pspoll_service_time, frame_durations, EventDurations, PhyParams};

/// Which exponent the stage collision probability `Y_k` uses.
///
/// The consistent variant uses `b_k`, which is the value forced by the
/// requirement that interruption, collision, and STA-success probabilities
/// of a stage sum to one. `PaperVerbatim` keeps the `b_k - 1` exponent as
/// printed, for reproducing the original figures; it violates that
/// conservation identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YkVariant {
    #[default]
    Consistent,
    PaperVerbatim,
}

// ============================================================================
// Stage coefficients
// ============================================================================

/// Per-stage coefficient arrays for a given AP attempt rate.
///
/// For stage `k` with window `b_k`:
/// - `x[k]`: probability the walk is interrupted by an AP success before the
///   attempt slot (restart case),
/// - `y[k]`: probability the walk ends in a collision at the attempt slot,
/// - `z[k]`: expected data-backoff slots counted within the stage,
/// - `z1[k]`: expected residual slots handed to the PS-POLL countdown,
/// - `z2[k]`: expected AP successes within the stage (equals `x[k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct StageCoefficients<S> {
    pub x: Vec<S>,
    pub y: Vec<S>,
    pub z: Vec<S>,
    pub z1: Vec<S>,
    pub z2: Vec<S>,
    pub beta_a_used: S,
    pub variant: YkVariant,
}

struct StageCase<S> {
    x: S,
    y: S,
    z: S,
    z1: S,
    z2: S,
}

/// One stage's coefficients by finite summation over the sampled backoff
/// and, inside it, the possible interrupt positions. The inner sums are
/// carried as running prefixes, which reorders but does not approximate the
/// double sums (see the equivalence test against the literal form).
fn stage_case<S: Scalar>(window: u32, beta_a: S, variant: YkVariant) -> StageCase<S> {
    let b = from_count::<S>(window);
    if beta_a == S::zero() {
        // Uninterrupted limits: the walk always completes and never collides.
        return StageCase {
            x: S::zero(),
            y: S::zero(),
            z: (b - S::one()) * S::half(),
            z1: S::zero(),
            z2: S::zero(),
        };
    }
    let t = S::one() - beta_a;
    // 1 - t^b through expm1/ln1p: the naive form loses all significance
    // for beta near zero, where t^b is a hair under one.
    let ln_t = (-beta_a).ln_1p();
    let hit_within = |slots: u32| -(from_count::<S>(slots) * ln_t).exp_m1();
    // The floor absorbs the 1-ulp residue the expm1 route can leave where
    // the interruption probability is exactly zero (single-slot windows).
    let x = (S::one() - hit_within(window) / (b * beta_a)).max(S::zero());
    let y = match variant {
        YkVariant::Consistent => hit_within(window) / b,
        YkVariant::PaperVerbatim => hit_within(window - 1) / b,
    };

    let mut z = S::zero();
    let mut z1 = S::zero();
    let mut z2 = S::zero();
    let mut t_pow = S::one(); // t^j for the current backoff value j
    let mut interrupt_mass = S::zero(); // sum_{i<j} t^i beta
    let mut interrupt_slots = S::zero(); // sum_{i<j} i t^i beta
    for j in 0..window {
        let backoff = from_count::<S>(j);
        // AP-success cases: interrupted at slot i < j.
        z = z + interrupt_slots;
        z1 = z1 + backoff * interrupt_mass - interrupt_slots;
        z2 = z2 + interrupt_mass;
        // Attempt-slot cases: collision or STA success, j slots either way.
        z = z + backoff * t_pow * beta_a + backoff * t_pow * t;
        // Extend the prefixes with interrupt position i = j.
        interrupt_mass = interrupt_mass + t_pow * beta_a;
        interrupt_slots = interrupt_slots + backoff * t_pow * beta_a;
        t_pow = t_pow * t;
    }
    StageCase {
        x,
        y,
        z: z / b,
        z1: z1 / b,
        z2: z2 / b,
    }
}

/// Computes the full coefficient arrays for every stage of a schedule.
pub fn stage_coefficients<S: Scalar>(
    beta_a: S,
    schedule: &BackoffSchedule,
    variant: YkVariant,
) -> Result<StageCoefficients<S>> {
    check_rate_input("beta_a", beta_a)?;
    let n = schedule.max_stage() + 1;
    let mut coeffs = StageCoefficients {
        x: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        z1: Vec::with_capacity(n),
        z2: Vec::with_capacity(n),
        beta_a_used: beta_a,
        variant,
    };
    for &window in schedule.windows() {
        let case = stage_case(window, beta_a, variant);
        coeffs.x.push(case.x);
        coeffs.y.push(case.y);
        coeffs.z.push(case.z);
        coeffs.z1.push(case.z1);
        coeffs.z2.push(case.z2);
    }
    Ok(coeffs)
}

/// Probability that a stage-`k` walk ends in an STA success,
/// `sum_x (1/b_k) (1 - beta_a)^(x+1)`, by direct summation.
///
/// Together with `x[k]` and the consistent `y[k]` this partitions the
/// stage outcomes, which is the conservation identity the tests check.
pub fn sta_success_probability<S: Scalar>(window: u32, beta_a: S) -> S {
    let b = from_count::<S>(window);
    if beta_a == S::zero() {
        return S::one();
    }
    let t = S::one() - beta_a;
    let mut sum = S::zero();
    let mut t_pow = t; // t^(x+1)
    for _ in 0..window {
        sum = sum + t_pow;
        t_pow = t_pow * t;
    }
    sum / b
}

/// Geometric aggregation shared by the three restart recursions:
/// `sum_k reward_k prod_{l<k} Y_l / (1 - sum_k X_k prod_{l<k} Y_l)`.
fn aggregate<S: Scalar>(coeffs: &StageCoefficients<S>, rewards: &[S]) -> Result<S> {
    let mut chain = S::one();
    let mut numerator = S::zero();
    let mut restart_mass = S::zero();
    for ((&reward, &x), &y) in rewards.iter().zip(&coeffs.x).zip(&coeffs.y) {
        numerator = numerator + reward * chain;
        restart_mass = restart_mass + x * chain;
        chain = chain * y;
    }
    let denominator = S::one() - restart_mass;
    if denominator <= S::zero() {
        return Err(ModelError::Diverged {
            denominator: to_f64(denominator),
        });
    }
    Ok(numerator / denominator)
}

/// Mean data-backoff slots the STA counts per packet, restarts included.
pub fn restart_mean_backoff<S: Scalar>(
    beta_a: S,
    schedule: &BackoffSchedule,
    variant: YkVariant,
) -> Result<S> {
    let coeffs = stage_coefficients(beta_a, schedule, variant)?;
    aggregate(&coeffs, &coeffs.z)
}

/// Mean residual slots the STA spends counting down for PS-POLLs per packet.
pub fn pspoll_mean_backoff<S: Scalar>(
    beta_a: S,
    schedule: &BackoffSchedule,
    variant: YkVariant,
) -> Result<S> {
    let coeffs = stage_coefficients(beta_a, schedule, variant)?;
    aggregate(&coeffs, &coeffs.z1)
}

/// Mean number of AP successes (hence PS-POLLs) per STA packet.
pub fn pspoll_mean_count<S: Scalar>(
    beta_a: S,
    schedule: &BackoffSchedule,
    variant: YkVariant,
) -> Result<S> {
    let coeffs = stage_coefficients(beta_a, schedule, variant)?;
    aggregate(&coeffs, &coeffs.z2)
}

// ============================================================================
// Attempt rates
// ============================================================================

/// AP attempt rate for a given STA rate: expected attempts over expected
/// backoff slots of one truncated retry chain,
/// `sum_k beta_s^k / sum_k b^(k) beta_s^k`.
pub fn ap_rate_given_sta<S: Scalar>(beta_s: S, schedule: &BackoffSchedule) -> Result<S> {
    check_rate_input("beta_s", beta_s)?;
    let mut pow = S::one();
    let mut attempts = S::zero();
    let mut slots = S::zero();
    for k in 0..=schedule.max_stage() {
        attempts = attempts + pow;
        slots = slots + schedule.mean_backoff::<S>(k)? * pow;
        pow = pow * beta_s;
    }
    let rate = attempts / slots;
    if !rate.is_finite() || rate > S::one() {
        return Err(ModelError::Breakdown {
            quantity: "beta_a",
            value: to_f64(rate),
        });
    }
    Ok(rate)
}

/// STA data attempt rate for a given AP rate:
/// `sum_k beta_a^k / restart_mean_backoff(beta_a)`.
pub fn sta_rate_given_ap<S: Scalar>(
    beta_a: S,
    schedule: &BackoffSchedule,
    variant: YkVariant,
) -> Result<S> {
    check_rate_input("beta_a", beta_a)?;
    let mean = restart_mean_backoff(beta_a, schedule, variant)?;
    let mut pow = S::one();
    let mut attempts = S::zero();
    for _ in 0..=schedule.max_stage() {
        attempts = attempts + pow;
        pow = pow * beta_a;
    }
    let rate = attempts / mean;
    if !rate.is_finite() || rate > S::one() || rate <= S::zero() {
        return Err(ModelError::Breakdown {
            quantity: "beta_s",
            value: to_f64(rate),
        });
    }
    Ok(rate)
}

/// PS-POLL attempt rate on the countdown axis: polls sent over residual
/// slots counted, per STA packet. Undefined when the AP never succeeds.
pub fn pspoll_rate<S: Scalar>(
    beta_a: S,
    schedule: &BackoffSchedule,
    variant: YkVariant,
) -> Result<S> {
    check_rate_input("beta_a", beta_a)?;
    if beta_a == S::zero() {
        return Err(ModelError::PspollRateUndefined);
    }
    let coeffs = stage_coefficients(beta_a, schedule, variant)?;
    let residual_slots = aggregate(&coeffs, &coeffs.z1)?;
    let polls = aggregate(&coeffs, &coeffs.z2)?;
    if residual_slots <= S::zero() {
        // All windows of size one: no countdown slots ever accrue.
        return Err(ModelError::PspollRateUndefined);
    }
    Ok(polls / residual_slots)
}

fn check_rate_input<S: Scalar>(name: &'static str, rate: S) -> Result<()> {
    if rate >= S::zero() && rate < S::one() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!(
            "{name} must lie in [0, 1), got {}",
            to_f64(rate)
        )))
    }
}

// ============================================================================
// Fixed point
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<S> {
    pub tol: S,
    pub max_iter: u32,
    pub damping: S,
    pub variant: YkVariant,
}

impl<S: Scalar> Default for SolverOptions<S> {
    fn default() -> Self {
        Self {
            tol: from_f64(1e-10),
            max_iter: 10_000,
            damping: S::half(),
            variant: YkVariant::default(),
        }
    }
}

/// Solved attempt rates plus fixed-point diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttemptRates<S> {
    /// AP data attempt rate per restricted slot.
    pub beta_a: S,
    /// STA data attempt rate per restricted slot.
    pub beta_s: S,
    /// STA PS-POLL attempt rate per countdown slot.
    pub beta_ps: S,
    pub iterations: u32,
    pub residual: S,
}

/// Solves the coupled rate equations by damped iteration on `beta_s`,
/// falling back to bisection of `h(beta_s) = beta_s - g(f(beta_s))` if the
/// iteration fails to settle.
pub fn solve_fixed_point<S: Scalar>(
    schedule: &BackoffSchedule,
    options: &SolverOptions<S>,
) -> Result<AttemptRates<S>> {
    if options.tol <= S::zero() || options.tol.is_nan() {
        return Err(ModelError::InvalidParameter("solver.tol must be > 0".into()));
    }
    if !(options.damping > S::zero() && options.damping <= S::one()) {
        return Err(ModelError::InvalidParameter(
            "solver.damping must lie in (0, 1]".into(),
        ));
    }
    if options.max_iter == 0 {
        return Err(ModelError::InvalidParameter("solver.max_iter must be >= 1".into()));
    }

    let b0 = schedule.windows()[0];
    let mut beta_s = (S::one() + S::one()) / from_count::<S>(b0 + 1);
    let mut iterations = 0;
    let mut residual = S::infinity();
    for _ in 0..options.max_iter {
        iterations += 1;
        let beta_a = ap_rate_given_sta(beta_s, schedule)?;
        let mapped = sta_rate_given_ap(beta_a, schedule, options.variant)?;
        residual = (mapped - beta_s).abs();
        if residual < options.tol {
            // Report the mapped point: the map is contractive here, so the
            // image is the better iterate and re-substituting it keeps both
            // rate equations within a small multiple of the tolerance.
            return finalize(mapped, iterations, residual, schedule, options);
        }
        beta_s = (S::one() - options.damping) * beta_s + options.damping * mapped;
    }
    bisect_fallback(schedule, options, iterations, residual)
}

fn finalize<S: Scalar>(
    beta_s: S,
    iterations: u32,
    residual: S,
    schedule: &BackoffSchedule,
    options: &SolverOptions<S>,
) -> Result<AttemptRates<S>> {
    let beta_a = ap_rate_given_sta(beta_s, schedule)?;
    let beta_ps = pspoll_rate(beta_a, schedule, options.variant)?;
    Ok(AttemptRates {
        beta_a,
        beta_s,
        beta_ps,
        iterations,
        residual,
    })
}

/// Scalar bisection on the fixed-point defect. The defect is negative near
/// zero (the map exceeds any tiny rate) and positive where the map falls
/// below the identity, so a sign change brackets the root.
fn bisect_fallback<S: Scalar>(
    schedule: &BackoffSchedule,
    options: &SolverOptions<S>,
    iterations_so_far: u32,
    last_residual: S,
) -> Result<AttemptRates<S>> {
    let defect = |beta_s: S| -> Result<S> {
        let beta_a = ap_rate_given_sta(beta_s, schedule)?;
        Ok(beta_s - sta_rate_given_ap(beta_a, schedule, options.variant)?)
    };

    // Coarse scan for a sign change, skipping probe points where the map
    // breaks down (those cannot contain a valid fixed point).
    let probes: [f64; 13] = [
        1e-9, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.85, 0.95, 0.999,
    ];
    let mut bracket: Option<(S, S, S)> = None; // (lo, hi, defect_lo)
    let mut prev: Option<(S, S)> = None;
    for &p in &probes {
        let point = from_f64::<S>(p);
        let value = match defect(point) {
            Ok(v) => v,
            Err(ModelError::Breakdown { .. }) | Err(ModelError::Diverged { .. }) => continue,
            Err(e) => return Err(e),
        };
        if let Some((lo, lo_val)) = prev {
            if (lo_val < S::zero()) != (value < S::zero()) {
                bracket = Some((lo, point, lo_val));
                break;
            }
        }
        prev = Some((point, value));
    }
    let (mut lo, mut hi, mut lo_val) = bracket.ok_or(ModelError::NoConvergence {
        iterations: iterations_so_far,
        residual: to_f64(last_residual),
    })?;

    let mut iterations = iterations_so_far;
    for _ in 0..200 {
        iterations += 1;
        let mid = (lo + hi) * S::half();
        let mid_val = defect(mid)?;
        if mid_val.abs() < options.tol {
            return finalize(mid, iterations, mid_val.abs(), schedule, options);
        }
        if (mid_val < S::zero()) == (lo_val < S::zero()) {
            lo = mid;
            lo_val = mid_val;
        } else {
            hi = mid;
        }
    }
    Err(ModelError::NoConvergence {
        iterations,
        residual: to_f64(hi - lo),
    })
}

// ============================================================================
// Event probabilities and throughput
// ============================================================================

/// Per-restricted-slot channel event probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventProbabilities<S> {
    pub p_s_ap: S,
    pub p_s_sta: S,
    pub p_c: S,
    pub p_idle: S,
}

/// Decomposes a slot by who attempts: AP alone, STA alone, both, neither.
pub fn event_probabilities<S: Scalar>(rates: &AttemptRates<S>) -> EventProbabilities<S> {
    let (a, s) = (rates.beta_a, rates.beta_s);
    EventProbabilities {
        p_s_ap: a * (S::one() - s),
        p_s_sta: s * (S::one() - a),
        p_c: a * s,
        p_idle: (S::one() - a) * (S::one() - s),
    }
}

/// Saturation throughputs plus the event probabilities and mean cycle time
/// behind them. Packet rates use the renewal denominator E[T]; bit rates
/// count payload bits only.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport<S> {
    pub theta_ap_pkts_per_s: S,
    pub theta_sta_pkts_per_s: S,
    pub theta_ap_mbps: S,
    pub theta_sta_mbps: S,
    pub p_s_ap: S,
    pub p_s_sta: S,
    pub p_c: S,
    pub p_idle: S,
    /// Mean time per renewal point E[T] in microseconds.
    pub expected_cycle_us: S,
}

/// Renewal-reward throughput: success probability per renewal point over
/// the mean event time. Requires durations completed with the expected
/// PS-POLL service time.
pub fn saturation_throughput<S: Scalar>(
    rates: &AttemptRates<S>,
    durations: &EventDurations,
    params: &PhyParams,
) -> Result<ThroughputReport<S>> {
    let t_s_ap = durations.t_s_ap_us.ok_or_else(|| {
        ModelError::InvalidParameter(
            "durations not completed: call expected_pspoll_service_time first".into(),
        )
    })?;
    let p = event_probabilities(rates);
    let t_s_ap = from_f64::<S>(t_s_ap);
    let t_s_sta = from_f64::<S>(durations.t_s_sta.as_micros());
    let t_c = from_f64::<S>(durations.t_c.as_micros());
    let slot = from_f64::<S>(params.slot_us);
    let expected_cycle_us =
        p.p_s_ap * t_s_ap + p.p_s_sta * t_s_sta + p.p_idle * slot + p.p_c * t_c;

    let per_us_to_per_s = from_f64::<S>(1e6);
    let ap_pkts_per_us = p.p_s_ap / expected_cycle_us;
    let sta_pkts_per_us = p.p_s_sta / expected_cycle_us;
    let ap_bits = from_count::<S>(params.ap_payload_bytes * 8);
    let sta_bits = from_count::<S>(params.sta_payload_bytes * 8);

    Ok(ThroughputReport {
        theta_ap_pkts_per_s: ap_pkts_per_us * per_us_to_per_s,
        theta_sta_pkts_per_s: sta_pkts_per_us * per_us_to_per_s,
        // packets/us times bits/packet is bits/us, i.e. Mb/s.
        theta_ap_mbps: ap_pkts_per_us * ap_bits,
        theta_sta_mbps: sta_pkts_per_us * sta_bits,
        p_s_ap: p.p_s_ap,
        p_s_sta: p.p_s_sta,
        p_c: p.p_c,
        p_idle: p.p_idle,
        expected_cycle_us,
    })
}

/// End-to-end closed-form evaluation of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport<S> {
    pub rates: AttemptRates<S>,
    pub throughput: ThroughputReport<S>,
    pub durations: EventDurations,
}

pub fn evaluate_model<S: Scalar>(
    params: &PhyParams,
    schedule: &BackoffSchedule,
    options: &SolverOptions<S>,
) -> Result<ModelReport<S>> {
    let mut durations = frame_durations(params)?;
    let rates = solve_fixed_point(schedule, options)?;
    expected_pspoll_service_time(&mut durations, rates.beta_ps, from_f64(params.slot_us))?;
    let throughput = saturation_throughput(&rates, &durations, params)?;
    Ok(ModelReport {
        rates,
        throughput,
        durations,
    })
}

// ============================================================================
// Tests
// ============================================================================
