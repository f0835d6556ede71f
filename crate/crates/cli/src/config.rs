//! Flat `key = value` configuration with section-prefixed keys.
//!
//! Missing keys take the built-in 802.11b defaults; unknown keys are an
//! error. Lists accept `[8, 16, 32]` or a bare comma-separated form. Lines
//! starting with `#` and blank lines are ignored.

use std::collections::BTreeMap;
use std::path::Path;

use psmlab_core::{BackoffSchedule, PhyParams, SolverOptions, YkVariant};

use crate::CliError;

pub const DEFAULT_SWEEP_CWMINS: &[u32] = &[8, 16, 32, 64, 128, 256, 512, 1024];

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub phy: PhyParams,
    /// Maximum backoff-stage index K.
    pub max_stage: usize,
    pub cwmin: u32,
    pub cwcap: u32,
    /// Explicit window list; overrides the cwmin/cwcap doubling when set.
    pub windows: Option<Vec<u32>>,
    pub solver: SolverOptions,
    pub seed: u64,
    pub horizon_slots: u64,
    pub warmup_fraction: f64,
    pub replications: u32,
    pub sweep_cwmins: Vec<u32>,
    /// True when the sweep grid is the tool default rather than configured.
    pub sweep_is_default: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            phy: PhyParams::default(),
            max_stage: 7,
            cwmin: 32,
            cwcap: 1024,
            windows: None,
            solver: SolverOptions::default(),
            seed: 1,
            horizon_slots: 10_000_000,
            warmup_fraction: 0.1,
            replications: 1,
            sweep_cwmins: DEFAULT_SWEEP_CWMINS.to_vec(),
            sweep_is_default: true,
        }
    }
}

impl RunConfig {
    /// The contention schedule the non-sweep commands run with.
    pub fn schedule(&self) -> Result<BackoffSchedule, CliError> {
        match &self.windows {
            Some(w) => BackoffSchedule::new(w.clone()).map_err(Into::into),
            None => BackoffSchedule::from_cwmin(self.cwmin, self.cwcap, self.max_stage)
                .map_err(Into::into),
        }
    }

    /// Schedule for one sweep point: the grid varies cwmin and keeps the
    /// doubling-with-cap structure.
    pub fn schedule_for_cwmin(&self, cwmin: u32) -> Result<BackoffSchedule, CliError> {
        BackoffSchedule::from_cwmin(cwmin, self.cwcap, self.max_stage).map_err(Into::into)
    }

    /// Canonical effective-config listing echoed into every output header.
    pub fn echo_lines(&self) -> Vec<String> {
        let p = &self.phy;
        let mut lines = vec![
            format!("phy.data_rate_mbps = {}", p.data_rate_mbps),
            format!("phy.control_rate_mbps = {}", p.control_rate_mbps),
            format!("phy.plcp_time_us = {}", p.plcp_us),
            format!("phy.phy_header_time_us = {}", p.phy_header_us),
            format!("phy.mac_header_bytes = {}", p.mac_header_bytes),
            format!("phy.pspoll_bytes = {}", p.pspoll_bytes),
            format!("phy.ack_bytes = {}", p.ack_bytes),
            format!("phy.ap_payload_bytes = {}", p.ap_payload_bytes),
            format!("phy.sta_payload_bytes = {}", p.sta_payload_bytes),
            format!("phy.slot_time_us = {}", p.slot_us),
            format!("phy.sifs_us = {}", p.sifs_us),
            format!("phy.difs_us = {}", p.difs_us),
            format!("phy.eifs_us = {}", p.eifs_us),
            format!("mac.k = {}", self.max_stage),
            format!("mac.cwmin = {}", self.cwmin),
            format!("mac.cwcap = {}", self.cwcap),
        ];
        if let Some(w) = &self.windows {
            lines.push(format!("mac.windows = {}", join_u32(w)));
        }
        lines.push(format!("solver.tol = {:e}", self.solver.tol));
        lines.push(format!("solver.max_iter = {}", self.solver.max_iter));
        lines.push(format!("solver.damping = {}", self.solver.damping));
        lines.push(format!(
            "analysis.yk_variant = {}",
            match self.solver.variant {
                YkVariant::Consistent => "consistent",
                YkVariant::PaperVerbatim => "paper_verbatim",
            }
        ));
        lines.push(format!("sim.seed = {}", self.seed));
        lines.push(format!("sim.horizon_slots = {}", self.horizon_slots));
        lines.push(format!("sim.warmup_fraction = {}", self.warmup_fraction));
        lines.push(format!("sim.replications = {}", self.replications));
        let mark = if self.sweep_is_default {
            "  # tool default, not from config"
        } else {
            ""
        };
        lines.push(format!(
            "sweep.cwmin_values = {}{mark}",
            join_u32(&self.sweep_cwmins)
        ));
        lines
    }
}

fn join_u32(values: &[u32]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Loads a config file, or the pure defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}

/// Parses the flat key/value format and applies defaults and validation.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let key = key.trim().to_string();
        if seen.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("key '{key}' given more than once")));
        }
    }

    let mut cfg = RunConfig::default();
    let mut explicit_k = false;
    let mut explicit_windows = false;

    for (key, value) in &seen {
        match key.as_str() {
            "phy.data_rate_mbps" => cfg.phy.data_rate_mbps = parse_num(key, value)?,
            "phy.control_rate_mbps" => cfg.phy.control_rate_mbps = parse_num(key, value)?,
            "phy.plcp_time_us" => cfg.phy.plcp_us = parse_num(key, value)?,
            "phy.phy_header_time_us" => cfg.phy.phy_header_us = parse_num(key, value)?,
            "phy.mac_header_bytes" => cfg.phy.mac_header_bytes = parse_int(key, value)?,
            "phy.pspoll_bytes" => cfg.phy.pspoll_bytes = parse_int(key, value)?,
            "phy.ack_bytes" => cfg.phy.ack_bytes = parse_int(key, value)?,
            "phy.ap_payload_bytes" => cfg.phy.ap_payload_bytes = parse_int(key, value)?,
            "phy.sta_payload_bytes" => cfg.phy.sta_payload_bytes = parse_int(key, value)?,
            "phy.slot_time_us" => cfg.phy.slot_us = parse_num(key, value)?,
            "phy.sifs_us" => cfg.phy.sifs_us = parse_num(key, value)?,
            "phy.difs_us" => cfg.phy.difs_us = parse_num(key, value)?,
            "phy.eifs_us" => cfg.phy.eifs_us = parse_num(key, value)?,
            "mac.k" => {
                cfg.max_stage = parse_int::<usize>(key, value)?;
                explicit_k = true;
            }
            "mac.cwmin" => cfg.cwmin = parse_int(key, value)?,
            "mac.cwcap" => cfg.cwcap = parse_int(key, value)?,
            "mac.windows" => {
                cfg.windows = Some(parse_list(key, value)?);
                explicit_windows = true;
            }
            "solver.tol" => cfg.solver.tol = parse_num(key, value)?,
            "solver.max_iter" => cfg.solver.max_iter = parse_int(key, value)?,
            "solver.damping" => cfg.solver.damping = parse_num(key, value)?,
            "analysis.yk_variant" => {
                cfg.solver.variant = match value.as_str() {
                    "consistent" => YkVariant::Consistent,
                    "paper_verbatim" => YkVariant::PaperVerbatim,
                    other => {
                        return Err(CliError::Usage(format!(
                            "key '{key}': expected 'consistent' or 'paper_verbatim', got '{other}'"
                        )))
                    }
                }
            }
            "sim.seed" => cfg.seed = parse_int(key, value)?,
            "sim.horizon_slots" => cfg.horizon_slots = parse_int(key, value)?,
            "sim.warmup_fraction" => cfg.warmup_fraction = parse_num(key, value)?,
            "sim.replications" => cfg.replications = parse_int(key, value)?,
            "sweep.cwmin_values" => {
                cfg.sweep_cwmins = parse_list(key, value)?;
                cfg.sweep_is_default = false;
            }
            _ => return Err(CliError::Usage(format!("unknown key '{key}'"))),
        }
    }

    // An explicit window list fixes K; a conflicting explicit mac.k is an
    // error rather than a silent override.
    if let Some(w) = &cfg.windows {
        if explicit_windows && explicit_k && w.len() != cfg.max_stage + 1 {
            return Err(CliError::Usage(format!(
                "mac.windows has {} entries but mac.k = {} implies {}",
                w.len(),
                cfg.max_stage,
                cfg.max_stage + 1
            )));
        }
        cfg.max_stage = w.len() - 1;
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.phy.validate().map_err(CliError::from)?;
    cfg.schedule()?;
    if !cfg.solver.tol.is_finite() || cfg.solver.tol <= 0.0 {
        return Err(CliError::Usage("key 'solver.tol': must be > 0".into()));
    }
    if cfg.solver.max_iter == 0 {
        return Err(CliError::Usage("key 'solver.max_iter': must be >= 1".into()));
    }
    if !(cfg.solver.damping > 0.0 && cfg.solver.damping <= 1.0) {
        return Err(CliError::Usage(
            "key 'solver.damping': must lie in (0, 1]".into(),
        ));
    }
    if cfg.horizon_slots == 0 {
        return Err(CliError::Usage("key 'sim.horizon_slots': must be >= 1".into()));
    }
    if !(0.0..=0.5).contains(&cfg.warmup_fraction) {
        return Err(CliError::Usage(
            "key 'sim.warmup_fraction': must lie in [0, 0.5]".into(),
        ));
    }
    if cfg.sweep_cwmins.is_empty() {
        return Err(CliError::Usage(
            "key 'sweep.cwmin_values': needs at least one value".into(),
        ));
    }
    for &cw in &cfg.sweep_cwmins {
        if cw == 0 {
            return Err(CliError::Usage(
                "key 'sweep.cwmin_values': values must be >= 1".into(),
            ));
        }
    }
    Ok(())
}

fn parse_num(key: &str, value: &str) -> Result<f64, CliError> {
    value
        .parse::<f64>()
        .map_err(|_| CliError::Usage(format!("key '{key}': cannot parse '{value}' as a number")))
}

fn parse_int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse::<T>().map_err(|_| {
        CliError::Usage(format!("key '{key}': cannot parse '{value}' as an integer"))
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<u32>, CliError> {
    let inner = value
        .trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .trim();
    if inner.is_empty() {
        return Err(CliError::Usage(format!("key '{key}': empty list")));
    }
    inner
        .split(',')
        .map(|item| parse_int::<u32>(key, item.trim()))
        .collect()
}
