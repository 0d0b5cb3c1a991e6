//! Small statistics toolkit for ensemble reports.

use alloc::vec::Vec;

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let predicted: Vec<f64> = x.iter().map(|a| intercept + slope * a).collect();
    Some(LinearFit {
        slope,
        intercept,
        r2: r_squared(y, &predicted),
    })
}

/// Coefficient of determination. A perfectly flat series that is also
/// perfectly predicted counts as `R² = 1`.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> f64 {
    let m = mean(observed);
    let ss_tot: f64 = observed.iter().map(|y| (y - m) * (y - m)).sum();
    let ss_res: f64 = observed.iter().zip(predicted).map(|(y, p)| (y - p) * (y - p)).sum();
    if ss_tot <= 1e-24 {
        return if ss_res <= 1e-24 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

/// Fits `c(t) = exp(−rate·t)` to a curve normalized to `c(0) = 1`.
///
/// Log-linear least squares through the origin with weights `c²`, which
/// matches least squares on `c` itself to first order. Points with `c <= 0`
/// are skipped. Returns `(rate, R²)` with `R²` evaluated on `c`.
pub fn exp_decay_fit(t: &[f64], c: &[f64]) -> Option<(f64, f64)> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&ti, &ci) in t.iter().zip(c) {
        if ci > 0.0 {
            let w = ci * ci;
            num += w * ti * libm::log(ci);
            den += w * ti * ti;
        }
    }
    if den == 0.0 {
        return None;
    }
    let rate = -num / den;
    let predicted: Vec<f64> = t.iter().map(|&ti| libm::exp(-rate * ti)).collect();
    Some((rate, r_squared(c, &predicted)))
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Standard error of the mean of independent batch estimates.
pub fn batch_stderr(batches: &[f64]) -> f64 {
    libm::sqrt(sample_variance(batches) / batches.len() as f64)
}

/// Upper tail of the χ² distribution with one degree of freedom.
pub fn chi2_sf_1dof(chi2: f64) -> f64 {
    if chi2 <= 0.0 {
        return 1.0;
    }
    libm::erfc(libm::sqrt(chi2 / 2.0))
}

/// Pearson χ² of two-outcome counts against probability `p` of the first.
/// Categories with zero expectation contribute nothing when empty and make
/// the statistic infinite otherwise.
pub fn binomial_chi2(k: u64, n: u64, p: f64) -> f64 {
    let mut chi2 = 0.0;
    for (obs, prob) in [(k as f64, p), ((n - k) as f64, 1.0 - p)] {
        let expected = n as f64 * prob;
        if expected > 0.0 {
            chi2 += (obs - expected) * (obs - expected) / expected;
        } else if obs > 0.0 {
            return f64::INFINITY;
        }
    }
    chi2
}

/// Two-proportion z statistic with pooled variance.
pub fn two_proportion_z(k1: u64, n1: u64, k2: u64, n2: u64) -> f64 {
    let p1 = k1 as f64 / n1 as f64;
    let p2 = k2 as f64 / n2 as f64;
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    if var == 0.0 {
        return if p1 == p2 { 0.0 } else { f64::INFINITY };
    }
    (p1 - p2) / libm::sqrt(var)
}
