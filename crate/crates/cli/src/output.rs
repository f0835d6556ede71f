//! Output headers and deterministic number formatting.
//!
//! Every file the tool writes starts with a header block carrying the tool
//! version, the command, the master seed, and the full effective config:
//! enough to reproduce the file byte for byte. Nothing time- or
//! machine-dependent goes into outputs.

use crate::config::RunConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed-precision scientific notation for all floating-point output.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.9e}")
}

/// Optional cell in a CSV row; empty when absent.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Plot-file cell; `nan` keeps the column grid parseable when absent.
pub fn fmt_plot(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_else(|| "nan".into())
}

pub fn header_block(command: &str, config: &RunConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("# psmlab {TOOL_VERSION}\n"));
    out.push_str(&format!("# command: {command}\n"));
    out.push_str(&format!("# seed: {}\n", config.seed));
    out.push_str("# config:\n");
    for line in config.echo_lines() {
        out.push_str(&format!("#   {line}\n"));
    }
    out
}
