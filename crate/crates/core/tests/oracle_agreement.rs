//! Closed forms vs the Monte-Carlo oracle.
//!
//! The oracle realizes the exact renewal processes the formulas integrate,
//! so disagreement beyond a few standard errors means broken algebra, not
//! modeling error. Cycle counts here are kept moderate; the acceptance
//! suite repeats the grid at full depth.

use psmlab_core::analysis::{
    pspoll_mean_backoff, pspoll_mean_count, restart_mean_backoff, solve_fixed_point,
};
use psmlab_core::oracle::simulate_sta_cycles;
use psmlab_core::{BackoffSchedule, SolverOptions, YkVariant};

fn z_score(closed: f64, mean: f64, se: f64) -> f64 {
    if se == 0.0 {
        if closed == mean {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (closed - mean) / se
    }
}

#[test]
fn closed_forms_track_the_oracle_over_a_grid() {
    let schedules = [
        BackoffSchedule::new(vec![16]).unwrap(),
        BackoffSchedule::new(vec![8, 16]).unwrap(),
        BackoffSchedule::new(vec![4, 8, 16]).unwrap(),
        BackoffSchedule::new(vec![8, 16, 32, 64]).unwrap(),
    ];
    let variant = YkVariant::Consistent;
    for (si, schedule) in schedules.iter().enumerate() {
        for (bi, &beta_a) in [0.01f64, 0.05, 0.1, 0.3].iter().enumerate() {
            let seed = 1000 + (si * 10 + bi) as u64;
            let stats = simulate_sta_cycles(beta_a, schedule, 200_000, seed).unwrap();
            let data = restart_mean_backoff(beta_a, schedule, variant).unwrap();
            let poll_slots = pspoll_mean_backoff(beta_a, schedule, variant).unwrap();
            let polls = pspoll_mean_count(beta_a, schedule, variant).unwrap();
            for (name, closed, mean, se) in [
                ("data slots", data, stats.mean_data_slots, stats.se_data_slots),
                (
                    "pspoll slots",
                    poll_slots,
                    stats.mean_pspoll_slots,
                    stats.se_pspoll_slots,
                ),
                (
                    "ap successes",
                    polls,
                    stats.mean_ap_successes,
                    stats.se_ap_successes,
                ),
            ] {
                let z = z_score(closed, mean, se);
                assert!(
                    z.abs() < 3.0,
                    "schedule {:?}, beta_a {beta_a}, {name}: closed {closed} vs \
                     oracle {mean} +/- {se} (z = {z:.2})",
                    schedule.windows(),
                );
            }
        }
    }
}

#[test]
fn solved_rates_agree_with_oracle_at_defaults() {
    // The restart recursions evaluated at the solved AP rate must sit
    // within 1% of the oracle at 10^6 cycles.
    let schedule = BackoffSchedule::default();
    let variant = YkVariant::Consistent;
    let rates = solve_fixed_point(&schedule, &SolverOptions::default()).unwrap();
    let stats = simulate_sta_cycles(rates.beta_a, &schedule, 1_000_000, 77).unwrap();

    let data = restart_mean_backoff(rates.beta_a, &schedule, variant).unwrap();
    let poll_slots = pspoll_mean_backoff(rates.beta_a, &schedule, variant).unwrap();
    let polls = pspoll_mean_count(rates.beta_a, &schedule, variant).unwrap();
    assert!((data - stats.mean_data_slots).abs() / data < 0.01);
    assert!((poll_slots - stats.mean_pspoll_slots).abs() / poll_slots < 0.01);
    assert!((polls - stats.mean_ap_successes).abs() / polls < 0.01);
}

#[test]
fn attempt_count_approximation_error_is_visible_but_small() {
    // The truncated sum for attempts per packet ignores that a restart
    // resets the discard counter; the oracle measures the truth. At the
    // default operating point the gap is far below a percent.
    let schedule = BackoffSchedule::default();
    let rates = solve_fixed_point(&schedule, &SolverOptions::default()).unwrap();
    let stats = simulate_sta_cycles(rates.beta_a, &schedule, 1_000_000, 78).unwrap();
    let truncated: f64 = (0..=schedule.max_stage())
        .map(|k| rates.beta_a.powi(k as i32))
        .sum();
    assert!((truncated - stats.mean_sta_attempts).abs() / truncated < 0.005);
}
