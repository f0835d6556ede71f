//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (run with `--nocapture` to see them on success).
//!
//! The shared sweep (criteria 1, 2, and 7) runs the protocol simulator at
//! 10^7 restricted slots per cwmin point against the closed-form model.

use std::process::Command;
use std::sync::LazyLock;
use std::time::Instant;

use psmlab_core::analysis::{
    ap_rate_given_sta, evaluate_model, pspoll_mean_backoff, pspoll_mean_count,
    restart_mean_backoff, solve_fixed_point, sta_rate_given_ap, stage_coefficients,
    sta_success_probability,
};
use psmlab_core::oracle::simulate_sta_cycles;
use psmlab_core::sim::{derive_estimates, run_simulation, EmpiricalEstimates, Horizon, SimConfig};
use psmlab_core::{BackoffSchedule, ModelReport, PhyParams, SolverOptions, YkVariant};

const SWEEP_CWMINS: [u32; 5] = [16, 32, 64, 128, 256];
const SWEEP_HORIZON_SLOTS: u64 = 10_000_000;

struct SweepPoint {
    cwmin: u32,
    analytic: ModelReport,
    simulated: EmpiricalEstimates,
}

struct Sweep {
    points: Vec<SweepPoint>,
    elapsed_secs: f64,
}

static SWEEP: LazyLock<Sweep> = LazyLock::new(|| {
    let started = Instant::now();
    let params = PhyParams::default();
    let options = SolverOptions::default();
    let points = SWEEP_CWMINS
        .iter()
        .map(|&cwmin| {
            let schedule = BackoffSchedule::from_cwmin(cwmin, 1024, 7).unwrap();
            let analytic = evaluate_model(&params, &schedule, &options).unwrap();
            let cfg = SimConfig::new(
                params.clone(),
                schedule,
                0xACCE_5500 + u64::from(cwmin),
                Horizon::RestrictedSlots(SWEEP_HORIZON_SLOTS),
            );
            let counters = run_simulation(&cfg).unwrap();
            let simulated = derive_estimates(&counters, &cfg);
            SweepPoint {
                cwmin,
                analytic,
                simulated,
            }
        })
        .collect();
    Sweep {
        points,
        elapsed_secs: started.elapsed().as_secs_f64(),
    }
});

fn report(number: u32, name: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("criterion {number} ({name}): PASS");
    } else {
        println!("criterion {number} ({name}): FAIL");
        for f in &failures {
            println!("  - {f}");
        }
        panic!(
            "criterion {number} ({name}): {} check(s) outside tolerance:\n  {}",
            failures.len(),
            failures.join("\n  ")
        );
    }
}

fn rel_err(simulated: f64, analytic: f64) -> f64 {
    (simulated - analytic).abs() / analytic
}

#[test]
fn criterion_1_analysis_simulation_agreement() {
    let mut failures = Vec::new();
    let sweep = &*SWEEP;
    if sweep.elapsed_secs >= 120.0 {
        failures.push(format!(
            "sweep runtime {:.1}s exceeds the 2-minute budget",
            sweep.elapsed_secs
        ));
    }
    println!(
        "  sweep of {} points at {} slots took {:.1}s",
        sweep.points.len(),
        SWEEP_HORIZON_SLOTS,
        sweep.elapsed_secs
    );
    println!(
        "  {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "cwmin", "beta_a%", "beta_s%", "beta_ps%", "thr_ap%", "thr_sta%", "pcoll%"
    );
    for p in &sweep.points {
        let r = &p.analytic.rates;
        let t = &p.analytic.throughput;
        let e = &p.simulated;
        let checks = [
            ("beta_a", e.beta_a_hat, r.beta_a, 0.05),
            ("beta_s", e.beta_s_hat, r.beta_s, 0.05),
            ("beta_ps", e.beta_ps_hat, r.beta_ps, 0.05),
            ("theta_ap", e.theta_ap_pkts_per_s, t.theta_ap_pkts_per_s, 0.05),
            ("theta_sta", e.theta_sta_pkts_per_s, t.theta_sta_pkts_per_s, 0.05),
            ("p_coll", e.p_coll_hat, t.p_c, 0.10),
        ];
        println!(
            "  {:>6} {:>9.2}% {:>9.2}% {:>9.2}% {:>9.2}% {:>9.2}% {:>9.2}%",
            p.cwmin,
            100.0 * rel_err(e.beta_a_hat, r.beta_a),
            100.0 * rel_err(e.beta_s_hat, r.beta_s),
            100.0 * rel_err(e.beta_ps_hat, r.beta_ps),
            100.0 * rel_err(e.theta_ap_pkts_per_s, t.theta_ap_pkts_per_s),
            100.0 * rel_err(e.theta_sta_pkts_per_s, t.theta_sta_pkts_per_s),
            100.0 * rel_err(e.p_coll_hat, t.p_c),
        );
        for (name, simulated, analytic, tol) in checks {
            let err = rel_err(simulated, analytic);
            if err > tol {
                failures.push(format!(
                    "cwmin {}: {name} simulated {simulated:.6e} vs analytic {analytic:.6e} \
                     ({:.2}% > {:.0}%)",
                    p.cwmin,
                    100.0 * err,
                    100.0 * tol
                ));
            }
        }
    }
    report(1, "analysis/simulation agreement", failures);
}

#[test]
fn criterion_2_orderings() {
    let mut failures = Vec::new();
    for p in &SWEEP.points {
        let r = &p.analytic.rates;
        let t = &p.analytic.throughput;
        if !(r.beta_ps > r.beta_a && r.beta_a > r.beta_s) {
            failures.push(format!(
                "cwmin {}: analytic rate ordering violated ({} / {} / {})",
                p.cwmin, r.beta_ps, r.beta_a, r.beta_s
            ));
        }
        if t.theta_ap_pkts_per_s <= t.theta_sta_pkts_per_s {
            failures.push(format!("cwmin {}: analytic throughput ordering violated", p.cwmin));
        }
        let e = &p.simulated;
        if !(e.beta_ps_hat > e.beta_a_hat && e.beta_a_hat > e.beta_s_hat) {
            failures.push(format!(
                "cwmin {}: simulated rate ordering violated ({} / {} / {})",
                p.cwmin, e.beta_ps_hat, e.beta_a_hat, e.beta_s_hat
            ));
        }
        if e.theta_ap_pkts_per_s <= e.theta_sta_pkts_per_s {
            failures.push(format!(
                "cwmin {}: simulated throughput ordering violated",
                p.cwmin
            ));
        }
    }
    report(2, "orderings", failures);
}

#[test]
fn criterion_3_oracle_equivalence() {
    let mut failures = Vec::new();
    let variant = YkVariant::Consistent;
    let cycles = 1_000_000u64;
    let seed_base = 0xACE0_0000u64;

    // Exact hand case: K = 0, b = 2, beta_a = 1/2 has means (1/3, 1/3, 1/3).
    let hand = BackoffSchedule::new(vec![2]).unwrap();
    let closed = [
        restart_mean_backoff(0.5f64, &hand, variant).unwrap(),
        pspoll_mean_backoff(0.5f64, &hand, variant).unwrap(),
        pspoll_mean_count(0.5f64, &hand, variant).unwrap(),
    ];
    for (value, name) in closed.iter().zip(["data", "pspoll", "count"]) {
        if (value - 1.0 / 3.0).abs() > 1e-12 {
            failures.push(format!("hand case {name}: closed form {value} is not 1/3"));
        }
    }
    let stats = simulate_sta_cycles(0.5, &hand, cycles, seed_base + 0xFFF).unwrap();
    for (closed, (mean, se), name) in [
        (closed[0], (stats.mean_data_slots, stats.se_data_slots), "data"),
        (closed[1], (stats.mean_pspoll_slots, stats.se_pspoll_slots), "pspoll"),
        (closed[2], (stats.mean_ap_successes, stats.se_ap_successes), "count"),
    ] {
        let z = (closed - mean) / se;
        if z.abs() > 3.0 {
            failures.push(format!("hand case {name}: z = {z:.2}"));
        }
    }

    // Grid of small schedules (K <= 3, windows <= 64).
    let schedules = [
        BackoffSchedule::new(vec![16]).unwrap(),
        BackoffSchedule::new(vec![8, 16]).unwrap(),
        BackoffSchedule::new(vec![4, 8, 16]).unwrap(),
        BackoffSchedule::new(vec![8, 16, 32, 64]).unwrap(),
        BackoffSchedule::new(vec![64, 64, 64, 64]).unwrap(),
    ];
    for (si, schedule) in schedules.iter().enumerate() {
        for (bi, &beta) in [0.01f64, 0.05, 0.1, 0.3].iter().enumerate() {
            let seed = seed_base + (si * 16 + bi) as u64;
            let stats = simulate_sta_cycles(beta, schedule, cycles, seed).unwrap();
            let triples = [
                ("data slots", restart_mean_backoff(beta, schedule, variant).unwrap(),
                    stats.mean_data_slots, stats.se_data_slots),
                ("pspoll slots", pspoll_mean_backoff(beta, schedule, variant).unwrap(),
                    stats.mean_pspoll_slots, stats.se_pspoll_slots),
                ("ap successes", pspoll_mean_count(beta, schedule, variant).unwrap(),
                    stats.mean_ap_successes, stats.se_ap_successes),
            ];
            for (name, closed, mean, se) in triples {
                let z = (closed - mean) / se;
                if z.abs() > 3.0 {
                    failures.push(format!(
                        "windows {:?}, beta_a {beta}: {name} z = {z:.2}",
                        schedule.windows()
                    ));
                }
            }
        }
    }
    report(3, "oracle equivalence", failures);
}

#[test]
fn criterion_4_conservation_and_limits() {
    let mut failures = Vec::new();

    // 10^4 seeded (beta_a, window) draws of the stage identity.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC044);
    for i in 0..10_000 {
        let beta: f64 = rng.gen_range(0.0..1.0);
        let window: u32 = rng.gen_range(1..=1024);
        let schedule = BackoffSchedule::new(vec![window]).unwrap();
        let c = stage_coefficients(beta, &schedule, YkVariant::Consistent).unwrap();
        let p_sta = sta_success_probability(window, beta);
        let dev = (c.x[0] + c.y[0] + p_sta - 1.0).abs();
        if dev > 1e-12 {
            failures.push(format!(
                "draw {i}: window {window}, beta {beta:.6}: deviation {dev:.3e}"
            ));
        }
    }

    // Vanishing-rate limits at beta_a = 1e-12 against the uninterrupted
    // values ((b0 - 1)/2, 0, 0).
    let schedule = BackoffSchedule::default();
    let variant = YkVariant::Consistent;
    let data = restart_mean_backoff(1e-12f64, &schedule, variant).unwrap();
    let poll_slots = pspoll_mean_backoff(1e-12f64, &schedule, variant).unwrap();
    let polls = pspoll_mean_count(1e-12f64, &schedule, variant).unwrap();
    if (data - 15.5).abs() > 1e-6 {
        failures.push(format!("limit: data slots {data} vs 15.5"));
    }
    if poll_slots.abs() > 1e-6 {
        failures.push(format!("limit: pspoll slots {poll_slots}"));
    }
    if polls.abs() > 1e-6 {
        failures.push(format!("limit: ap successes {polls}"));
    }
    report(4, "conservation and limits", failures);
}

#[test]
fn criterion_5_fixed_point_correctness() {
    let mut failures = Vec::new();
    let options = SolverOptions::default();

    // Re-substitution residuals below 1e-9 across the sweep grid.
    for &cwmin in &SWEEP_CWMINS {
        let schedule = BackoffSchedule::from_cwmin(cwmin, 1024, 7).unwrap();
        let rates = solve_fixed_point(&schedule, &options).unwrap();
        let beta_a = ap_rate_given_sta(rates.beta_s, &schedule).unwrap();
        let beta_s = sta_rate_given_ap(rates.beta_a, &schedule, options.variant).unwrap();
        let res_a = (rates.beta_a - beta_a).abs();
        let res_s = (rates.beta_s - beta_s).abs();
        if res_a >= 1e-9 || res_s >= 1e-9 {
            failures.push(format!(
                "cwmin {cwmin}: residuals {res_a:.3e} / {res_s:.3e}"
            ));
        }
    }

    // Single-stage schedules decouple: beta_a = 2/(b0 - 1) exactly.
    for b0 in [16u32, 32, 64, 128, 1024] {
        let schedule = BackoffSchedule::new(vec![b0]).unwrap();
        let rates = solve_fixed_point(&schedule, &options).unwrap();
        let exact = 2.0 / f64::from(b0 - 1);
        if rates.beta_a != exact {
            failures.push(format!(
                "b0 {b0}: beta_a {} != closed form {exact}",
                rates.beta_a
            ));
        }
    }
    report(5, "fixed-point correctness", failures);
}

#[test]
fn criterion_6_determinism() {
    let mut failures = Vec::new();
    let bin = env!("CARGO_BIN_EXE_psmlab");

    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "sweep.cwmin_values = [16, 32]\nsim.horizon_slots = 200000\nsim.seed = 7\n",
    )
    .unwrap();

    let run_sweep = |label: &str| -> Vec<(String, Vec<u8>)> {
        let out = dir.path().join(label);
        let status = Command::new(bin)
            .args(["sweep", "--config"])
            .arg(&conf)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };
    let first = run_sweep("a");
    let second = run_sweep("b");
    if first.len() != 6 {
        failures.push(format!("expected 6 output files, got {}", first.len()));
    }
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&second) {
        if name_a != name_b || bytes_a != bytes_b {
            failures.push(format!("{name_a} differs between identical runs"));
        }
    }

    // Analyze and validate emit deterministic reports as well.
    for sub in ["analyze", "validate"] {
        let capture = || {
            Command::new(bin)
                .args([sub, "--config"])
                .arg(&conf)
                .output()
                .unwrap()
                .stdout
        };
        if capture() != capture() {
            failures.push(format!("{sub} stdout differs between identical runs"));
        }
    }
    report(6, "determinism", failures);
}

#[test]
fn criterion_7_throughput_identity() {
    let mut failures = Vec::new();
    for p in &SWEEP.points {
        let r = &p.analytic.rates;
        let t = &p.analytic.throughput;
        let identity = r.beta_a * (1.0 - r.beta_s) / (r.beta_s * (1.0 - r.beta_a));
        let analytic_ratio = t.theta_ap_pkts_per_s / t.theta_sta_pkts_per_s;
        let rel = (analytic_ratio - identity).abs() / identity;
        if rel > 1e-9 {
            failures.push(format!(
                "cwmin {}: analytic ratio off identity by {rel:.3e}",
                p.cwmin
            ));
        }
        let sim_ratio = p.simulated.theta_ap_pkts_per_s / p.simulated.theta_sta_pkts_per_s;
        let sim_rel = (sim_ratio - identity).abs() / identity;
        if sim_rel > 0.07 {
            failures.push(format!(
                "cwmin {}: simulated ratio {sim_ratio:.4} vs identity {identity:.4} \
                 ({:.2}% > 7%)",
                p.cwmin,
                100.0 * sim_rel
            ));
        }
    }
    report(7, "throughput identity", failures);
}
