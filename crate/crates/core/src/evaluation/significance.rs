use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Significance level used to flag differences.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub metric: String,
    pub n: usize,
    pub mean_difference: f64,
    /// Infinite when the differences have zero variance but a nonzero mean.
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    pub significant: bool,
    /// Set when the differences have zero variance.
    pub degenerate: bool,
}

/// Two-sided paired Student t-test of `a - b`.
pub fn paired_t_test(metric: &str, a: &[f64], b: &[f64]) -> Result<SignificanceResult> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!("paired samples of sizes {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Contract(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;

    // zero variance up to accumulated rounding
    if var.sqrt() <= 1e-12 * mean.abs().max(1.0) {
        let (t, p) = if mean.abs() <= 1e-12 { (0.0, 1.0) } else { (mean.signum() * f64::INFINITY, 0.0) };
        return Ok(SignificanceResult {
            metric: metric.to_string(),
            n,
            mean_difference: mean,
            t,
            df,
            p_value: p,
            significant: p < ALPHA,
            degenerate: true,
        });
    }

    let t = mean / (var / n as f64).sqrt();
    let p = two_sided_p(t, df as f64);
    Ok(SignificanceResult {
        metric: metric.to_string(),
        n,
        mean_difference: mean,
        t,
        df,
        p_value: p,
        significant: p < ALPHA,
        degenerate: false,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom, via the
/// regularized incomplete beta function.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}
