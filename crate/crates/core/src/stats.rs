//! Summary statistics for Monte Carlo output.

use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
    pub n: usize,
}

/// Sample mean and 95% half-width. Summation order is the slice order, so the
/// result is reproducible bit for bit.
pub fn mean_ci(xs: &[f64]) -> MeanCi {
    let n = xs.len();
    if n == 0 {
        return MeanCi { mean: f64::NAN, ci95: f64::NAN, n };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanCi { mean, ci95: 0.0, n };
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    MeanCi { mean, ci95: Z95 * (var / n as f64).sqrt(), n }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub half_width: f64,
}

/// Binomial frequency with its normal-approximation 95% half-width.
pub fn proportion(successes: usize, trials: usize) -> Proportion {
    let p = if trials == 0 { f64::NAN } else { successes as f64 / trials as f64 };
    let hw = if trials == 0 { f64::NAN } else { Z95 * (p * (1.0 - p) / trials as f64).sqrt() };
    Proportion { successes, trials, estimate: p, half_width: hw }
}

/// Kolmogorov distance `sup_x |F_n(x) - F(x)|` between a sample and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Empirical CDF of `samples` evaluated on `grid`.
pub fn empirical_cdf(samples: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    grid.iter().map(|&g| xs.partition_point(|&x| x <= g) as f64 / n).collect()
}
