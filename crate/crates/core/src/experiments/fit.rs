//! Log-log least-squares rate fits.

use crate::error::{arg, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub log_x: Vec<f64>,
    pub log_y: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual in log space.
    pub residual_max: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return arg(format!("rate fit needs >= 3 pairs, got {} and {}", xs.len(), ys.len()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return arg("rate fit needs finite positive values");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return arg("rate fit needs at least two distinct x values");
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_max = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    Ok(RateFit {
        log_x: lx,
        log_y: ly,
        slope,
        intercept,
        residual_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| x.powi(-2)).collect();
        let f = fit_rate(&xs, &ys).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!(f.residual_max < 1e-12);
    }

    #[test]
    fn constant_is_flat() {
        let f = fit_rate(&[1.0, 2.0, 3.0], &[0.7, 0.7, 0.7]).unwrap();
        assert!(f.slope.abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_rate(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_rate(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]).is_err());
    }
}
