//! Modeling laboratory for a saturated 802.11 cell with one power-save
//! station.
//!
//! A single STA in power-save mode pulls every buffered downlink frame
//! from its AP with a PS-POLL sent on the residual of an interrupted data
//! backoff, and resamples that data backoff from the initial window
//! afterwards. Under saturation this restart asymmetry drives the AP's and
//! the STA's long-run attempt rates apart. This crate provides:
//!
//! - [`analysis`]: the closed-form attempt-rate fixed point and
//!   renewal-reward saturation throughputs, generic over the scalar type;
//! - [`oracle`]: a Monte-Carlo realization of the abstract renewal
//!   processes the closed forms describe, for validating the algebra;
//! - [`sim`]: a slot-level simulator of the actual DCF + PS-POLL protocol,
//!   for validating the model against protocol behavior;
//! - [`timing`] and [`backoff`]: the shared PHY constants, event
//!   durations, and contention-window machinery.
//!
//! The closed-form layer is generic over [`Scalar`] (`f32` or `f64`);
//! the simulator and oracle work in `f64` with exact integer-nanosecond
//! time accounting. Concrete `f64` aliases are provided below.
//!
//! ```
//! use psmlab_core::sim::{derive_estimates, run_simulation, Horizon, SimConfig};
//! use psmlab_core::{evaluate_model, BackoffSchedule, PhyParams, SolverOptions};
//!
//! let params = PhyParams::default();
//! let schedule = BackoffSchedule::default();
//! let model = evaluate_model(&params, &schedule, &SolverOptions::default()).unwrap();
//! assert!(model.rates.beta_ps > model.rates.beta_a);
//! assert!(model.rates.beta_a > model.rates.beta_s);
//!
//! let cfg = SimConfig::new(params, schedule, 7, Horizon::RestrictedSlots(200_000));
//! let counters = run_simulation(&cfg).unwrap();
//! let estimates = derive_estimates(&counters, &cfg);
//! let err = (estimates.beta_a_hat - model.rates.beta_a).abs() / model.rates.beta_a;
//! assert!(err < 0.05);
//! ```

pub mod analysis;
pub mod backoff;
pub mod error;
pub mod oracle;
pub mod scalar;
pub mod sim;
pub mod stats;
pub mod timing;

pub use analysis::{
    ap_rate_given_sta, evaluate_model, event_probabilities, pspoll_mean_backoff,
    pspoll_mean_count, pspoll_rate, restart_mean_backoff, saturation_throughput,
    solve_fixed_point, sta_rate_given_ap, stage_coefficients, YkVariant,
};
pub use backoff::BackoffSchedule;
pub use error::ModelError;
pub use oracle::{simulate_ap_cycles, simulate_sta_cycles};
pub use scalar::Scalar;
pub use sim::{derive_estimates, run_simulation, run_simulation_observed};
pub use timing::{expected_pspoll_service_time, frame_durations, Nanos, PhyParams};

/// Double-precision instantiations of the generic model types.
pub type AttemptRates = analysis::AttemptRates<f64>;
pub type StageCoefficients = analysis::StageCoefficients<f64>;
pub type ThroughputReport = analysis::ThroughputReport<f64>;
pub type SolverOptions = analysis::SolverOptions<f64>;
pub type ModelReport = analysis::ModelReport<f64>;

/// Single-precision counterparts, mainly useful for sensitivity checks.
pub type AttemptRates32 = analysis::AttemptRates<f32>;
pub type StageCoefficients32 = analysis::StageCoefficients<f32>;
pub type ThroughputReport32 = analysis::ThroughputReport<f32>;
pub type SolverOptions32 = analysis::SolverOptions<f32>;
