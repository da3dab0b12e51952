//! Least-squares slope fits used for finite-scale dimension estimates.

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ys` against `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(LabError::invalid("fit inputs differ in length"));
    }
    if xs.len() < 2 {
        return Err(LabError::invalid("a line fit needs at least two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(LabError::invalid("fit abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Slope of `log2(count)` against the scale exponent `N`.
///
/// A finite-scale diagnostic of box-counting dimension; needs at least
/// three scales.
pub fn box_dim_estimate(counts: &[(u32, u64)]) -> Result<LinearFit> {
    if counts.len() < 3 {
        return Err(LabError::invalid(format!(
            "box dimension estimate needs at least 3 scales, got {}",
            counts.len()
        )));
    }
    if counts.iter().any(|c| c.1 == 0) {
        return Err(LabError::invalid("counts must be positive"));
    }
    let xs: Vec<f64> = counts.iter().map(|c| c.0 as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|c| (c.1 as f64).log2()).collect();
    linear_fit(&xs, &ys)
}
