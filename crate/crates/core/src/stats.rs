//! Small statistics helpers: batch means, OLS slope fits and a chi-square
//! goodness-of-fit p-value.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

/// Mean and batch-means standard error of a scalar series.
///
/// The series is cut into `batches` contiguous batches of equal length (the
/// remainder at the end is dropped); the standard error is the standard
/// deviation of the batch averages divided by `sqrt(batches)`.
pub fn batch_means(values: &[f64], batches: usize) -> (f64, f64) {
    let batches = batches.max(2).min(values.len().max(2));
    let len = values.len() / batches;
    if len == 0 {
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        return (mean, f64::INFINITY);
    }
    let avgs: Vec<f64> = (0..batches)
        .map(|b| values[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    mean_and_se(&avgs)
}

/// Sample mean and standard error of the mean for independent values.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Accumulates per-batch sums of a vector-valued series.
#[derive(Debug, Clone)]
pub struct VectorBatchMeans {
    dim: usize,
    batch_len: usize,
    current: Vec<f64>,
    filled: usize,
    batch_avgs: Vec<Vec<f64>>,
}

impl VectorBatchMeans {
    pub fn new(dim: usize, total: usize, batches: usize) -> Self {
        let batch_len = (total / batches.max(1)).max(1);
        Self {
            dim,
            batch_len,
            current: vec![0.0; dim],
            filled: 0,
            batch_avgs: Vec::with_capacity(batches),
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        for (c, v) in self.current.iter_mut().zip(x) {
            *c += v;
        }
        self.filled += 1;
        if self.filled == self.batch_len {
            let inv = 1.0 / self.batch_len as f64;
            self.batch_avgs
                .push(self.current.iter().map(|c| c * inv).collect());
            self.current.iter_mut().for_each(|c| *c = 0.0);
            self.filled = 0;
        }
    }

    /// Component-wise mean and standard error over completed batches.
    pub fn finish(&self) -> (Vec<f64>, Vec<f64>) {
        let mut mean = Vec::with_capacity(self.dim);
        let mut se = Vec::with_capacity(self.dim);
        for j in 0..self.dim {
            let col: Vec<f64> = self.batch_avgs.iter().map(|b| b[j]).collect();
            let (m, s) = mean_and_se(&col);
            mean.push(m);
            se.push(s);
        }
        (mean, se)
    }
}

/// Ordinary least-squares line fit with a 95% confidence interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn ols_fit(x: &[f64], y: &[f64]) -> SlopeFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_se, half) = if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        let se = (rss / (n - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, n - 2.0)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::INFINITY);
        (se, t * se)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    SlopeFit {
        slope,
        intercept,
        slope_se,
        ci_low: slope - half,
        ci_high: slope + half,
    }
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> SlopeFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols_fit(&lx, &ly)
}

/// Pearson chi-square goodness-of-fit p-value of observed counts against
/// expected probabilities.
pub fn chi_square_pvalue(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (counts.len() - 1) as f64;
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line_has_zero_slope_error() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let fit = ols_fit(&x, &y);
        assert_abs_diff_eq!(fit.slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, -1.0, epsilon = 1e-12);
        assert!(fit.slope_se < 1e-10);
    }

    #[test]
    fn loglog_recovers_power() {
        let x = [0.1, 0.01, 0.001];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.5)).collect();
        assert_abs_diff_eq!(loglog_fit(&x, &y).slope, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn batch_means_of_constant_series() {
        let (m, se) = batch_means(&[2.0; 1000], 10);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let p = chi_square_pvalue(&[250, 250, 500], &[0.25, 0.25, 0.5]);
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
    }
}
