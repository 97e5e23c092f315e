//! Small statistics helpers: deterministic reductions, mean / standard
//! error, and ordinary least squares on log2 data.

use serde::{Deserialize, Serialize};

/// Pairwise summation in a fixed order; deterministic regardless of how the
/// inputs were produced, and more accurate than a running sum.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

/// Sample mean and standard error (sample std / sqrt(n)).
pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe {
            mean: f64::NAN,
            std_error: f64::NAN,
            count: 0,
        };
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return MeanSe {
            mean,
            std_error: f64::NAN,
            count: 1,
        };
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    MeanSe {
        mean,
        std_error: (var / n as f64).sqrt(),
        count: n,
    }
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// OLS fit of y against x. Returns None with fewer than 2 points.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(SlopeFit {
        slope,
        intercept,
        r_squared,
        n_points: n,
    })
}

/// OLS fit of log2(y) against x, skipping non-positive y.
pub fn ols_log2_fit(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    let mut fx = Vec::new();
    let mut fy = Vec::new();
    for (x, y) in xs.iter().zip(ys) {
        if *y > 0.0 && y.is_finite() {
            fx.push(*x);
            fy.push(y.log2());
        }
    }
    ols_fit(&fx, &fy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pairwise_matches_naive_on_small_inputs() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_relative_eq!(pairwise_sum(&xs), 15.0);
    }

    #[test]
    fn mean_se_of_constant_is_zero_error() {
        let m = mean_se(&[2.0; 10]);
        assert_relative_eq!(m.mean, 2.0);
        assert_relative_eq!(m.std_error, 0.0);
    }

    #[test]
    fn exact_line_has_unit_r_squared() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = ols_fit(&xs, &ys).unwrap();
        assert_relative_eq!(f.slope, -0.5, max_relative = 1e-12);
        assert_relative_eq!(f.intercept, 3.0, max_relative = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn log2_fit_recovers_dyadic_decay() {
        let xs = [3.0, 4.0, 5.0, 6.0];
        let ys: Vec<f64> = xs.iter().map(|x| 7.0 * 2f64.powf(-0.35 * x)).collect();
        let f = ols_log2_fit(&xs, &ys).unwrap();
        assert_relative_eq!(f.slope, -0.35, max_relative = 1e-10);
    }
}
