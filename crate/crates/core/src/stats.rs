//! Goodness-of-fit helpers shared by the experiment runners and tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// One-sample Kolmogorov–Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let values: Vec<f64> = xs.into_iter().map(cdf).collect();
    ks_statistic_sorted(&values)
}

/// KS statistic from the model CDF evaluated at the ascending-sorted sample.
pub fn ks_statistic_sorted(cdf_values: &[f64]) -> f64 {
    let n = cdf_values.len() as f64;
    cdf_values
        .iter()
        .enumerate()
        .map(|(i, &f)| (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs()))
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
pub fn ks_pvalue(statistic: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * statistic;
    kolmogorov_survival(lambda)
}

/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof as f64).expect("dof > 0").cdf(statistic)
}

/// Chi-square test of homogeneity for two histograms over the same bins.
/// Bins whose pooled count is below `min_pooled` are merged into one.
/// Returns `(statistic, degrees of freedom, p-value)`.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64], min_pooled: u64) -> (f64, usize, f64) {
    assert_eq!(a.len(), b.len());
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut rest = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        if x + y >= min_pooled {
            bins.push((x as f64, y as f64));
        } else {
            rest.0 += x as f64;
            rest.1 += y as f64;
        }
    }
    if rest.0 + rest.1 > 0.0 {
        bins.push(rest);
    }
    let na: f64 = bins.iter().map(|b| b.0).sum();
    let nb: f64 = bins.iter().map(|b| b.1).sum();
    let total = na + nb;
    let mut stat = 0.0;
    for &(x, y) in &bins {
        let pooled = x + y;
        let ea = na * pooled / total;
        let eb = nb * pooled / total;
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = bins.len().saturating_sub(1);
    (stat, dof, chi_square_sf(stat, dof))
}

/// Pearson goodness-of-fit of `observed` counts against probabilities `probs`.
/// Bins with expected count below `min_expected` are merged into one.
/// Returns `(statistic, degrees of freedom, p-value)`.
pub fn chi_square_goodness(observed: &[u64], probs: &[f64], min_expected: f64) -> (f64, usize, f64) {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut rest = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n as f64 * p;
        if e >= min_expected {
            bins.push((o as f64, e));
        } else {
            rest.0 += o as f64;
            rest.1 += e;
        }
    }
    if rest.1 > 0.0 {
        bins.push(rest);
    }
    let stat: f64 = bins.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len().saturating_sub(1);
    (stat, dof, chi_square_sf(stat, dof))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
    var.sqrt()
}

pub fn standard_error(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
