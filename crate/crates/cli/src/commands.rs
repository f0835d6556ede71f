//! The four subcommands: analyze, simulate, sweep, validate.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use psmlab_core::analysis::{evaluate_model, pspoll_mean_backoff, pspoll_mean_count,
    restart_mean_backoff, stage_coefficients, sta_success_probability};
use psmlab_core::oracle::simulate_sta_cycles;
use psmlab_core::sim::{derive_estimates, run_simulation, run_simulation_observed,
    EmpiricalEstimates, Horizon, SimConfig};
use psmlab_core::stats::t_interval_halfwidth;
use psmlab_core::{BackoffSchedule, ModelError, ModelReport, YkVariant};

use crate::config::RunConfig;
use crate::output::{fmt_float, fmt_opt, fmt_plot, header_block};
use crate::CliError;

/// Stable per-run seed derivation (splitmix64 finalizer over the master
/// seed and two lane indices), so sweep points and replications get
/// independent, reproducible streams.
pub fn derive_seed(master: u64, lane: u32, index: u32) -> u64 {
    let mut z = master ^ (u64::from(lane) << 32) ^ u64::from(index) ^ 0x9E37_79B9_7F4A_7C15;
    for _ in 0..2 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

fn variant_name(variant: YkVariant) -> &'static str {
    match variant {
        YkVariant::Consistent => "consistent",
        YkVariant::PaperVerbatim => "paper_verbatim",
    }
}

// ============================================================================
// analyze
// ============================================================================

pub fn cmd_analyze(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let schedule = config.schedule()?;
    let report = evaluate_model(&config.phy, &schedule, &config.solver)?;
    write!(out, "{}", header_block("analyze", config))?;
    write_analysis(&report, out)?;
    Ok(())
}

fn write_analysis(report: &ModelReport, out: &mut dyn Write) -> io::Result<()> {
    let r = &report.rates;
    let t = &report.throughput;
    writeln!(out, "fixed_point.iterations = {}", r.iterations)?;
    writeln!(out, "fixed_point.residual = {}", fmt_float(r.residual))?;
    writeln!(out, "beta_a = {}", fmt_float(r.beta_a))?;
    writeln!(out, "beta_s = {}", fmt_float(r.beta_s))?;
    writeln!(out, "beta_ps = {}", fmt_float(r.beta_ps))?;
    writeln!(out, "p_s_ap = {}", fmt_float(t.p_s_ap))?;
    writeln!(out, "p_s_sta = {}", fmt_float(t.p_s_sta))?;
    writeln!(out, "p_c = {}", fmt_float(t.p_c))?;
    writeln!(out, "p_idle = {}", fmt_float(t.p_idle))?;
    writeln!(
        out,
        "expected_pspoll_service_us = {}",
        fmt_opt(report.durations.e_t_pspl_us)
    )?;
    writeln!(out, "t_s_ap_us = {}", fmt_opt(report.durations.t_s_ap_us))?;
    writeln!(out, "expected_cycle_us = {}", fmt_float(t.expected_cycle_us))?;
    writeln!(out, "throughput_ap_pkts_per_s = {}", fmt_float(t.theta_ap_pkts_per_s))?;
    writeln!(out, "throughput_sta_pkts_per_s = {}", fmt_float(t.theta_sta_pkts_per_s))?;
    writeln!(out, "throughput_ap_mbps = {}", fmt_float(t.theta_ap_mbps))?;
    writeln!(out, "throughput_sta_mbps = {}", fmt_float(t.theta_sta_mbps))?;
    Ok(())
}

// ============================================================================
// simulate
// ============================================================================

pub fn cmd_simulate(
    config: &RunConfig,
    out_dir: &Path,
    trace: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let schedule = config.schedule()?;
    let sim_config = sim_config_for(config, schedule.clone(), config.seed);

    let counters = if trace {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join("trace.log");
        let mut file = BufWriter::new(File::create(&path)?);
        write!(file, "{}", header_block("simulate --trace", config))?;
        writeln!(file, "# columns: time_us event ap_stage sta_stage")?;
        let mut trace_err: Option<io::Error> = None;
        let counters = run_simulation_observed(&sim_config, |rec| {
            if trace_err.is_none() {
                let line = format!(
                    "{:.3} {} {} {}",
                    rec.time.as_micros(),
                    rec.kind.as_str(),
                    rec.ap_stage,
                    rec.sta_stage
                );
                if let Err(e) = writeln!(file, "{line}") {
                    trace_err = Some(e);
                }
            }
        })?;
        if let Some(e) = trace_err {
            return Err(e.into());
        }
        writeln!(out, "trace written to {}", path.display())?;
        counters
    } else {
        run_simulation(&sim_config)?
    };

    let est = derive_estimates(&counters, &sim_config);
    write!(out, "{}", header_block("simulate", config))?;
    writeln!(out, "restricted_idle_slots = {}", counters.restricted_idle_slots)?;
    writeln!(out, "ap_attempts = {}", counters.ap_attempts)?;
    writeln!(out, "sta_data_attempts = {}", counters.sta_data_attempts)?;
    writeln!(out, "ap_successes = {}", counters.ap_successes)?;
    writeln!(out, "sta_successes = {}", counters.sta_successes)?;
    writeln!(out, "collisions = {}", counters.collisions)?;
    writeln!(out, "ap_discards = {}", counters.ap_discards)?;
    writeln!(out, "sta_discards = {}", counters.sta_discards)?;
    writeln!(out, "pspoll_count = {}", counters.pspoll_count)?;
    writeln!(out, "pspoll_countdown_slots = {}", counters.pspoll_countdown_slots)?;
    writeln!(out, "sim_time_us = {:.3}", counters.sim_time.as_micros())?;

    let ci = |v: Option<f64>| -> String {
        v.map(|h| format!(" +/- {}", fmt_float(h)))
            .unwrap_or_default()
    };
    let hw = est.halfwidths.clone();
    writeln!(
        out,
        "beta_a_hat = {}{}",
        fmt_float(est.beta_a_hat),
        ci(hw.as_ref().map(|h| h.beta_a))
    )?;
    writeln!(
        out,
        "beta_s_hat = {}{}",
        fmt_float(est.beta_s_hat),
        ci(hw.as_ref().map(|h| h.beta_s))
    )?;
    writeln!(
        out,
        "beta_ps_hat = {}{}",
        fmt_float(est.beta_ps_hat),
        ci(hw.as_ref().map(|h| h.beta_ps))
    )?;
    writeln!(
        out,
        "p_coll_hat = {}{}",
        fmt_float(est.p_coll_hat),
        ci(hw.as_ref().map(|h| h.p_coll))
    )?;
    writeln!(
        out,
        "throughput_ap_pkts_per_s_hat = {}{}",
        fmt_float(est.theta_ap_pkts_per_s),
        ci(hw.as_ref().map(|h| h.theta_ap_pkts_per_s))
    )?;
    writeln!(
        out,
        "throughput_sta_pkts_per_s_hat = {}{}",
        fmt_float(est.theta_sta_pkts_per_s),
        ci(hw.as_ref().map(|h| h.theta_sta_pkts_per_s))
    )?;
    writeln!(out, "throughput_ap_mbps_hat = {}", fmt_float(est.theta_ap_mbps))?;
    writeln!(out, "throughput_sta_mbps_hat = {}", fmt_float(est.theta_sta_mbps))?;
    if hw.is_none() {
        writeln!(
            out,
            "# insufficient data for confidence intervals (fewer than 20 batches)"
        )?;
    }

    // Closed-form reference, when the configuration admits one.
    match evaluate_model(&config.phy, &schedule, &config.solver) {
        Ok(report) => {
            writeln!(out, "analytic.beta_a = {}", fmt_float(report.rates.beta_a))?;
            writeln!(out, "analytic.beta_s = {}", fmt_float(report.rates.beta_s))?;
            writeln!(out, "analytic.beta_ps = {}", fmt_float(report.rates.beta_ps))?;
        }
        Err(e) => writeln!(out, "# analytic reference unavailable: {e}")?,
    }
    Ok(())
}

fn sim_config_for(config: &RunConfig, schedule: BackoffSchedule, seed: u64) -> SimConfig {
    let mut sim = SimConfig::new(
        config.phy.clone(),
        schedule,
        seed,
        Horizon::RestrictedSlots(config.horizon_slots),
    );
    sim.warmup_fraction = config.warmup_fraction;
    sim
}

// ============================================================================
// sweep
// ============================================================================

#[derive(Debug, Clone)]
pub struct RowAnalytic {
    pub beta_a: f64,
    pub beta_s: f64,
    pub beta_ps: f64,
    pub p_c: f64,
    pub thr_ap_pkts: f64,
    pub thr_sta_pkts: f64,
    pub thr_ap_mbps: f64,
    pub thr_sta_mbps: f64,
}

#[derive(Debug, Clone)]
pub struct RowSimulated {
    pub beta_a: f64,
    pub beta_a_ci: Option<f64>,
    pub beta_s: f64,
    pub beta_s_ci: Option<f64>,
    pub beta_ps: f64,
    pub beta_ps_ci: Option<f64>,
    pub p_coll: f64,
    pub p_coll_ci: Option<f64>,
    pub thr_ap_pkts: f64,
    pub thr_sta_pkts: f64,
}

/// One sweep point: analytic columns, aggregated simulated columns, and a
/// status token ("ok" or "model_breakdown").
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub cwmin: u32,
    pub analytic: Option<RowAnalytic>,
    pub simulated: Option<RowSimulated>,
    pub seed: u64,
    pub status: &'static str,
}

/// Exact CSV column order; documented here and nowhere else.
pub const SWEEP_COLUMNS: &str = "cwmin,beta_a_ana,beta_s_ana,beta_ps_ana,pcoll_ana,\
thr_ap_pkts_ana,thr_sta_pkts_ana,thr_ap_mbps_ana,thr_sta_mbps_ana,\
beta_a_sim,beta_a_ci,beta_s_sim,beta_s_ci,beta_ps_sim,beta_ps_ci,\
pcoll_sim,pcoll_ci,thr_ap_pkts_sim,thr_sta_pkts_sim,seed,status";

/// Computes every sweep row. Model breakdown at a point is recorded in its
/// status and the sweep continues; simulations still run for such rows.
pub fn compute_sweep(config: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    let mut rows = Vec::with_capacity(config.sweep_cwmins.len());
    for &cwmin in &config.sweep_cwmins {
        let schedule = config.schedule_for_cwmin(cwmin)?;

        let analytic = match evaluate_model(&config.phy, &schedule, &config.solver) {
            Ok(report) => Some(RowAnalytic {
                beta_a: report.rates.beta_a,
                beta_s: report.rates.beta_s,
                beta_ps: report.rates.beta_ps,
                p_c: report.throughput.p_c,
                thr_ap_pkts: report.throughput.theta_ap_pkts_per_s,
                thr_sta_pkts: report.throughput.theta_sta_pkts_per_s,
                thr_ap_mbps: report.throughput.theta_ap_mbps,
                thr_sta_mbps: report.throughput.theta_sta_mbps,
            }),
            Err(
                ModelError::Breakdown { .. }
                | ModelError::Diverged { .. }
                | ModelError::NoConvergence { .. }
                | ModelError::PspollRateUndefined,
            ) => None,
            Err(e) => return Err(e.into()),
        };

        let simulated = if config.replications > 0 {
            let mut runs = Vec::with_capacity(config.replications as usize);
            for rep in 0..config.replications {
                let seed = derive_seed(config.seed, cwmin, rep);
                let sim_config = sim_config_for(config, schedule.clone(), seed);
                let counters = run_simulation(&sim_config)?;
                runs.push(derive_estimates(&counters, &sim_config));
            }
            Some(aggregate_runs(&runs))
        } else {
            None
        };

        rows.push(SweepRow {
            cwmin,
            analytic: analytic.clone(),
            simulated,
            seed: config.seed,
            status: if analytic.is_some() { "ok" } else { "model_breakdown" },
        });
    }
    Ok(rows)
}

fn aggregate_runs(runs: &[EmpiricalEstimates]) -> RowSimulated {
    let mean = |f: &dyn Fn(&EmpiricalEstimates) -> f64| -> f64 {
        runs.iter().map(f).sum::<f64>() / runs.len() as f64
    };
    // A single run reports its batch-means halfwidth; replicated runs
    // report the t interval across replication means.
    let ci = |f: &dyn Fn(&EmpiricalEstimates) -> f64,
              single: &dyn Fn(&EmpiricalEstimates) -> Option<f64>|
     -> Option<f64> {
        if runs.len() == 1 {
            single(&runs[0])
        } else {
            let values: Vec<f64> = runs.iter().map(f).collect();
            Some(t_interval_halfwidth(&values))
        }
    };
    RowSimulated {
        beta_a: mean(&|e| e.beta_a_hat),
        beta_a_ci: ci(&|e| e.beta_a_hat, &|e| e.halfwidths.as_ref().map(|h| h.beta_a)),
        beta_s: mean(&|e| e.beta_s_hat),
        beta_s_ci: ci(&|e| e.beta_s_hat, &|e| e.halfwidths.as_ref().map(|h| h.beta_s)),
        beta_ps: mean(&|e| e.beta_ps_hat),
        beta_ps_ci: ci(&|e| e.beta_ps_hat, &|e| {
            e.halfwidths.as_ref().map(|h| h.beta_ps)
        }),
        p_coll: mean(&|e| e.p_coll_hat),
        p_coll_ci: ci(&|e| e.p_coll_hat, &|e| e.halfwidths.as_ref().map(|h| h.p_coll)),
        thr_ap_pkts: mean(&|e| e.theta_ap_pkts_per_s),
        thr_sta_pkts: mean(&|e| e.theta_sta_pkts_per_s),
    }
}

pub fn cmd_sweep(config: &RunConfig, out_dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = compute_sweep(config)?;
    std::fs::create_dir_all(out_dir)?;

    let csv_path = out_dir.join("sweep.csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    write!(csv, "{}", header_block("sweep", config))?;
    writeln!(
        csv,
        "# simulated columns average {} replication(s); seeds derive from the master seed",
        config.replications
    )?;
    writeln!(csv, "{SWEEP_COLUMNS}")?;
    for row in &rows {
        writeln!(csv, "{}", csv_line(row))?;
    }
    csv.flush()?;
    writeln!(out, "wrote {}", csv_path.display())?;

    for (name, columns, select) in plot_files() {
        let path = out_dir.join(name);
        let mut file = BufWriter::new(File::create(&path)?);
        write!(file, "{}", header_block("sweep", config))?;
        writeln!(file, "# columns: {columns}")?;
        for row in &rows {
            let cells = select(row)
                .into_iter()
                .map(fmt_plot)
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(file, "{} {}", row.cwmin, cells)?;
        }
        file.flush()?;
        writeln!(out, "wrote {}", path.display())?;
    }

    for row in &rows {
        if row.status != "ok" {
            writeln!(out, "cwmin {}: {}", row.cwmin, row.status)?;
        }
    }
    Ok(())
}

fn csv_line(row: &SweepRow) -> String {
    let a = row.analytic.as_ref();
    let s = row.simulated.as_ref();
    let cells: Vec<String> = vec![
        row.cwmin.to_string(),
        fmt_opt(a.map(|a| a.beta_a)),
        fmt_opt(a.map(|a| a.beta_s)),
        fmt_opt(a.map(|a| a.beta_ps)),
        fmt_opt(a.map(|a| a.p_c)),
        fmt_opt(a.map(|a| a.thr_ap_pkts)),
        fmt_opt(a.map(|a| a.thr_sta_pkts)),
        fmt_opt(a.map(|a| a.thr_ap_mbps)),
        fmt_opt(a.map(|a| a.thr_sta_mbps)),
        fmt_opt(s.map(|s| s.beta_a)),
        fmt_opt(s.and_then(|s| s.beta_a_ci)),
        fmt_opt(s.map(|s| s.beta_s)),
        fmt_opt(s.and_then(|s| s.beta_s_ci)),
        fmt_opt(s.map(|s| s.beta_ps)),
        fmt_opt(s.and_then(|s| s.beta_ps_ci)),
        fmt_opt(s.map(|s| s.p_coll)),
        fmt_opt(s.and_then(|s| s.p_coll_ci)),
        fmt_opt(s.map(|s| s.thr_ap_pkts)),
        fmt_opt(s.map(|s| s.thr_sta_pkts)),
        row.seed.to_string(),
        row.status.to_string(),
    ];
    cells.join(",")
}

type PlotSelect = fn(&SweepRow) -> Vec<Option<f64>>;

fn plot_files() -> [(&'static str, &'static str, PlotSelect); 5] {
    [
        (
            "attempt_rate_ap.dat",
            "cwmin beta_a_analytic beta_a_simulated",
            |row| {
                vec![
                    row.analytic.as_ref().map(|a| a.beta_a),
                    row.simulated.as_ref().map(|s| s.beta_a),
                ]
            },
        ),
        (
            "attempt_rate_sta.dat",
            "cwmin beta_s_analytic beta_s_simulated",
            |row| {
                vec![
                    row.analytic.as_ref().map(|a| a.beta_s),
                    row.simulated.as_ref().map(|s| s.beta_s),
                ]
            },
        ),
        (
            "attempt_rate_pspoll.dat",
            "cwmin beta_ps_analytic beta_ps_simulated",
            |row| {
                vec![
                    row.analytic.as_ref().map(|a| a.beta_ps),
                    row.simulated.as_ref().map(|s| s.beta_ps),
                ]
            },
        ),
        (
            "collision_probability.dat",
            "cwmin pcoll_analytic pcoll_simulated",
            |row| {
                vec![
                    row.analytic.as_ref().map(|a| a.p_c),
                    row.simulated.as_ref().map(|s| s.p_coll),
                ]
            },
        ),
        (
            "throughput_pkts.dat",
            "cwmin thr_ap_analytic thr_sta_analytic thr_ap_simulated thr_sta_simulated",
            |row| {
                vec![
                    row.analytic.as_ref().map(|a| a.thr_ap_pkts),
                    row.analytic.as_ref().map(|a| a.thr_sta_pkts),
                    row.simulated.as_ref().map(|s| s.thr_ap_pkts),
                    row.simulated.as_ref().map(|s| s.thr_sta_pkts),
                ]
            },
        ),
    ]
}

// ============================================================================
// validate
// ============================================================================

const VALIDATE_CYCLES: u64 = 1_000_000;
const Z_LIMIT: f64 = 5.0;
const CONSERVATION_TOL: f64 = 1e-12;

struct OracleCase {
    label: &'static str,
    windows: Vec<u32>,
    beta_a: f64,
}

fn oracle_cases() -> Vec<OracleCase> {
    let mut cases = vec![OracleCase {
        label: "hand_k0_b2",
        windows: vec![2],
        beta_a: 0.5,
    }];
    let schedules: [(&'static str, Vec<u32>); 4] = [
        ("k0_b16", vec![16]),
        ("k1_b8_16", vec![8, 16]),
        ("k2_b4_8_16", vec![4, 8, 16]),
        ("k3_b8_64", vec![8, 16, 32, 64]),
    ];
    for (label, windows) in schedules {
        for beta_a in [0.01, 0.05, 0.1, 0.3] {
            cases.push(OracleCase {
                label,
                windows: windows.clone(),
                beta_a,
            });
        }
    }
    cases
}

/// Closed forms against the Monte-Carlo oracle over a built-in grid, plus
/// the stage conservation identity for the configured collision variant.
pub fn cmd_validate(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    write!(out, "{}", header_block("validate", config))?;
    let variant = config.solver.variant;
    let mut worst_z: f64 = 0.0;
    let mut failures = 0u32;

    writeln!(
        out,
        "{:<12} {:>7} {:>13} {:>12} {:>12} {:>10} {:>7}",
        "case", "beta_a", "quantity", "closed_form", "oracle", "std_err", "z"
    )?;
    for (index, case) in oracle_cases().iter().enumerate() {
        let schedule =
            BackoffSchedule::new(case.windows.clone()).map_err(CliError::from)?;
        let seed = derive_seed(config.seed, 0x5641, index as u32);
        let stats = simulate_sta_cycles(case.beta_a, &schedule, VALIDATE_CYCLES, seed)?;
        let closed = [
            ("data_slots", restart_mean_backoff(case.beta_a, &schedule, variant)?,
                stats.mean_data_slots, stats.se_data_slots),
            ("pspoll_slots", pspoll_mean_backoff(case.beta_a, &schedule, variant)?,
                stats.mean_pspoll_slots, stats.se_pspoll_slots),
            ("ap_successes", pspoll_mean_count(case.beta_a, &schedule, variant)?,
                stats.mean_ap_successes, stats.se_ap_successes),
        ];
        for (quantity, value, mean, se) in closed {
            let z = if se > 0.0 {
                (value - mean) / se
            } else if value == mean {
                0.0
            } else {
                f64::INFINITY
            };
            if z.abs() > worst_z.abs() {
                worst_z = z;
            }
            if z.abs() > Z_LIMIT {
                failures += 1;
            }
            writeln!(
                out,
                "{:<12} {:>7} {:>13} {:>12.6} {:>12.6} {:>10.2e} {:>7.2}",
                case.label, case.beta_a, quantity, value, mean, se, z
            )?;
        }
    }
    writeln!(out, "max |z| = {:.2} (limit {})", worst_z.abs(), Z_LIMIT)?;

    // Conservation: interruption + collision + STA success partition every
    // stage outcome. Holds analytically for the consistent variant only.
    let mut worst_dev: f64 = 0.0;
    for window in [2u32, 4, 16, 32, 256, 1024] {
        for i in 1..=9 {
            let beta = f64::from(i) / 10.0;
            let schedule = BackoffSchedule::new(vec![window]).unwrap();
            let coeffs = stage_coefficients(beta, &schedule, variant)?;
            let p_sta = sta_success_probability(window, beta);
            let dev = (coeffs.x[0] + coeffs.y[0] + p_sta - 1.0).abs();
            worst_dev = worst_dev.max(dev);
        }
    }
    let conservation_ok = worst_dev <= CONSERVATION_TOL;
    writeln!(
        out,
        "conservation({}) max deviation = {:.3e} ({})",
        variant_name(variant),
        worst_dev,
        if conservation_ok { "PASS" } else { "FAIL" }
    )?;

    if failures > 0 || !conservation_ok {
        writeln!(out, "validation: FAIL")?;
        let mut reasons = Vec::new();
        if failures > 0 {
            reasons.push(format!("{failures} oracle z-score(s) above {Z_LIMIT}"));
        }
        if !conservation_ok {
            reasons.push(format!(
                "conservation identity fails for the {} variant",
                variant_name(variant)
            ));
        }
        return Err(CliError::Validation(reasons.join("; ")));
    }
    writeln!(out, "validation: PASS")?;
    Ok(())
}
