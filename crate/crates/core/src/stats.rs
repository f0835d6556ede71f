//! Small estimation helpers shared by the oracle and the simulator.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Sample mean and its standard error from running sums.
///
/// Returns a zero standard error for fewer than two observations.
pub fn mean_and_se(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    // Guard the tiny negative that cancellation can leave behind.
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Two-sided 97.5% Student-t critical value (95% interval halfwidth factor).
pub fn t_critical_975(dof: u64) -> f64 {
    if dof == 0 {
        return f64::NAN;
    }
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("valid t distribution")
        .inverse_cdf(0.975)
}

/// 95% halfwidth of the mean of independent values (batch means, or means
/// across replications): `t(0.975, n-1) * se`.
pub fn t_interval_halfwidth(values: &[f64]) -> f64 {
    let n = values.len() as u64;
    if n < 2 {
        return 0.0;
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    let (_, se) = mean_and_se(sum, sum_sq, n);
    t_critical_975(n - 1) * se
}
