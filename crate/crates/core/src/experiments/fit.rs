//! Summary statistics shared by the studies.

use serde::Serialize;

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` with only two points (no residual degrees of freedom).
    pub slope_se: Option<f64>,
    pub points: usize,
}

/// Log-log least-squares fit; `None` with fewer than two distinct `x` or any
/// nonpositive coordinate.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| v.is_nan() || *v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = (lx.len() > 2).then(|| {
        let ssr: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (ssr / (k - 2.0) / sxx).sqrt()
    });
    Some(SlopeFit {
        slope,
        intercept,
        slope_se,
        points: lx.len(),
    })
}

/// Sample mean and its standard error (`None` for a single value).
pub fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let se = sample_variance(values).map(|v| (v / k).sqrt());
    (mean, se)
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    Some(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Number of steps where the sequence goes up.
pub fn increases(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] > w[0]).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_power_law_recovers_exponent() {
        let x = [250.0, 500.0, 1000.0, 2000.0];
        let y: Vec<f64> = x.iter().map(|n: &f64| 3.0 * n.powf(-2.0 / 3.0)).collect();
        let fit = log_log_slope(&x, &y).unwrap();
        assert_abs_diff_eq!(fit.slope, -2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 3f64.ln(), epsilon = 1e-10);
        assert!(fit.slope_se.unwrap() < 1e-10);
    }

    #[test]
    fn degenerate_fits_are_undefined() {
        assert!(log_log_slope(&[100.0], &[0.1]).is_none());
        assert!(log_log_slope(&[100.0, 200.0], &[0.1, 0.0]).is_none());
        assert!(log_log_slope(&[100.0, 100.0], &[0.1, 0.2]).is_none());
        let two = log_log_slope(&[100.0, 400.0], &[0.4, 0.2]).unwrap();
        assert_abs_diff_eq!(two.slope, -0.5, epsilon = 1e-12);
        assert!(two.slope_se.is_none());
    }

    #[test]
    fn moments() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert_abs_diff_eq!(se.unwrap(), (5.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-15);
        assert_eq!(mean_se(&[7.0]).1, None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(increases(&[3.0, 2.0, 2.5, 1.0, 1.0]), 1);
    }
}
