//! Photon-count distributions for bright and dark ion readout, and the
//! threshold discrimination error rates derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_regularized_lower_gamma, poisson_pmf};

/// Default tail mass below which a count distribution is truncated.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
/// Largest truncation bound accepted before parameters are treated as pathological.
pub const DEFAULT_TRUNCATION_CAP: usize = 10_000;

/// Physical readout parameters: exposure time and the three intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutPhysics {
    t: f64,
    lambda: f64,
    lambda_b: f64,
    lambda_d: f64,
}

impl ReadoutPhysics {
    /// `lambda` is the decay intensity `1/T1` of the dark level.
    pub fn new(t: f64, lambda: f64, lambda_b: f64, lambda_d: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidPhysics(msg));
        if !(t > 0.0) || !t.is_finite() {
            return bad(format!("exposure time must be positive, got {t}"));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return bad(format!("decay intensity must be nonnegative, got {lambda}"));
        }
        if !(lambda_d >= 0.0) || !lambda_d.is_finite() {
            return bad(format!("dark count intensity must be nonnegative, got {lambda_d}"));
        }
        if !(lambda_b > 0.0) || !lambda_b.is_finite() {
            return bad(format!("bright intensity must be positive, got {lambda_b}"));
        }
        if lambda_b <= lambda {
            return bad(format!(
                "bright intensity {lambda_b} must exceed decay intensity {lambda}"
            ));
        }
        Ok(Self {
            t,
            lambda,
            lambda_b,
            lambda_d,
        })
    }

    /// Same as [`ReadoutPhysics::new`] with the decay given as a relaxation time `T1`.
    /// `T1 = inf` switches decay off.
    pub fn with_t1(t: f64, t1: f64, lambda_b: f64, lambda_d: f64) -> Result<Self> {
        if !(t1 > 0.0) {
            return Err(Error::InvalidPhysics(format!("T1 must be positive, got {t1}")));
        }
        Self::new(t, 1.0 / t1, lambda_b, lambda_d)
    }

    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn lambda_b(&self) -> f64 {
        self.lambda_b
    }
    pub fn lambda_d(&self) -> f64 {
        self.lambda_d
    }

    /// Copy with a different exposure time, rates unchanged.
    pub fn with_time(&self, t: f64) -> Result<Self> {
        Self::new(t, self.lambda, self.lambda_b, self.lambda_d)
    }

    /// Probability of `k` counts from a bright ion (Poisson with mean `λ_B t`).
    pub fn bright_pmf(&self, k: usize) -> f64 {
        poisson_pmf(self.lambda_b * self.t, k)
    }

    /// Probability of `k` counts caused by the dark level decaying into the
    /// bright manifold during the exposure, background excluded.
    pub fn decay_pmf(&self, k: usize) -> f64 {
        let delta = if k == 0 { (-self.lambda * self.t).exp() } else { 0.0 };
        if self.lambda == 0.0 {
            return delta;
        }
        let lt = self.lambda * self.t;
        let bt = self.lambda_b * self.t;
        let gap = (self.lambda_b - self.lambda) * self.t;
        let kf = k as f64;
        let ln_gamma_part = ln_regularized_lower_gamma(gap, kf + 1.0)
            .expect("gap > 0 and shape >= 1 by construction");
        let ln_term = lt.ln() - lt + kf * bt.ln() - (kf + 1.0) * gap.ln() + ln_gamma_part;
        ln_term.exp() + delta
    }

    /// Probability of `k` counts from a dark ion: background Poisson counts
    /// convolved with the decay channel.
    pub fn dark_pmf(&self, k: usize) -> f64 {
        let dt = self.lambda_d * self.t;
        if dt == 0.0 {
            return self.decay_pmf(k);
        }
        let ln_dt = dt.ln();
        (0..=k)
            .map(|k1| {
                let bg = (k1 as f64 * ln_dt - dt - ln_factorial(k1)).exp();
                bg * self.decay_pmf(k - k1)
            })
            .sum()
    }

    /// Whole dark pmf on `0..=n` in one pass (O(n²) rather than O(n³)).
    pub fn dark_pmf_upto(&self, n: usize) -> Vec<f64> {
        let decay: Vec<f64> = (0..=n).map(|k| self.decay_pmf(k)).collect();
        let dt = self.lambda_d * self.t;
        if dt == 0.0 {
            return decay;
        }
        let bg: Vec<f64> = (0..=n).map(|k| poisson_pmf(dt, k)).collect();
        (0..=n)
            .map(|k| (0..=k).map(|k1| bg[k1] * decay[k - k1]).sum())
            .collect()
    }

    /// Bright and dark count distributions truncated to a common bound: the
    /// smallest `n_ph` at which both tails fall below `tail_tol`.
    pub fn count_distributions(&self, tail_tol: f64) -> Result<(CountDistribution, CountDistribution)> {
        let bright = CountDistribution::truncate(|k| self.bright_pmf(k), tail_tol)?;
        let dark = CountDistribution::truncate(|k| self.dark_pmf(k), tail_tol)?;
        let n_ph = bright.n_ph().max(dark.n_ph());
        let dark_pmf = self.dark_pmf_upto(n_ph);
        Ok((
            CountDistribution::with_bound(|k| self.bright_pmf(k), n_ph),
            CountDistribution::with_bound(|k| dark_pmf[k], n_ph),
        ))
    }

    /// Threshold misclassification rates `(eps10, eps01)` for threshold `k0`:
    /// bright read as dark, and dark read as bright.
    pub fn readout_errors(&self, k0: usize) -> Result<(f64, f64)> {
        if k0 == 0 {
            return Err(Error::Domain("threshold k0 must be at least 1".into()));
        }
        let eps10: f64 = (0..k0).map(|k| self.bright_pmf(k)).sum();
        let below: f64 = self.dark_pmf_upto(k0 - 1).iter().sum();
        Ok((eps10, (1.0 - below).max(0.0)))
    }

    /// Threshold in `1..=n_ph` minimizing `eps10 + eps01`; the smaller one wins ties.
    pub fn optimal_threshold(&self) -> Result<usize> {
        let (bright, dark) = self.count_distributions(DEFAULT_TAIL_TOL)?;
        Ok(optimal_threshold_for(&bright, &dark))
    }
}

/// Threshold scan over already-truncated distributions.
pub fn optimal_threshold_for(bright: &CountDistribution, dark: &CountDistribution) -> usize {
    let n_ph = bright.n_ph().max(dark.n_ph()).max(1);
    let mut best = (f64::INFINITY, 1);
    for k0 in 1..=n_ph {
        let (e10, e01) = threshold_errors(bright, dark, k0);
        if e10 + e01 < best.0 {
            best = (e10 + e01, k0);
        }
    }
    best.1
}

/// `(eps10, eps01)` from truncated distributions, consistent with the
/// coarse-grained photon-count effects.
pub fn threshold_errors(bright: &CountDistribution, dark: &CountDistribution, k0: usize) -> (f64, f64) {
    let eps10 = bright.mass_below(k0);
    let eps01 = 1.0 - dark.mass_below(k0);
    (eps10, eps01.max(0.0))
}

/// Truncated photon-count pmf; mass beyond `n_ph` is folded into the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    pmf: Vec<f64>,
    tail_mass: f64,
}

impl CountDistribution {
    /// Truncate at the smallest `n_ph` whose remaining tail is below `tail_tol`.
    pub fn truncate(generator: impl Fn(usize) -> f64, tail_tol: f64) -> Result<Self> {
        Self::truncate_capped(generator, tail_tol, DEFAULT_TRUNCATION_CAP)
    }

    pub fn truncate_capped(generator: impl Fn(usize) -> f64, tail_tol: f64, cap: usize) -> Result<Self> {
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::Domain(format!("tail tolerance must lie in (0,1), got {tail_tol}")));
        }
        let mut pmf = Vec::new();
        let mut cumulative = 0.0;
        for k in 0..=cap {
            let p = generator(k).max(0.0);
            pmf.push(p);
            cumulative += p;
            if 1.0 - cumulative < tail_tol {
                return Ok(Self::fold(pmf));
            }
        }
        Err(Error::TruncationCap {
            cap,
            tail: 1.0 - cumulative,
        })
    }

    /// Evaluate `0..=n_ph` and fold whatever remains into bin `n_ph`.
    pub fn with_bound(generator: impl Fn(usize) -> f64, n_ph: usize) -> Self {
        Self::fold((0..=n_ph).map(|k| generator(k).max(0.0)).collect())
    }

    fn fold(mut pmf: Vec<f64>) -> Self {
        let head: f64 = pmf.iter().sum();
        let tail_mass = 1.0 - head;
        let last = pmf.len() - 1;
        pmf[last] = (pmf[last] + tail_mass).max(0.0);
        Self { pmf, tail_mass }
    }

    /// Largest recorded count.
    pub fn n_ph(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Probability of `k`; counts beyond `n_ph` have zero mass (already folded).
    pub fn prob(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    /// Mass folded into the last bin (negative if the generator overshot 1).
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn mass_below(&self, k: usize) -> f64 {
        self.pmf.iter().take(k).sum()
    }

    /// Pad with empty bins so `n_ph` grows to `n`; the folded mass stays where it was.
    pub fn padded_to(&self, n: usize) -> Self {
        let mut pmf = self.pmf.clone();
        if n + 1 > pmf.len() {
            pmf.resize(n + 1, 0.0);
        }
        Self {
            pmf,
            tail_mass: self.tail_mass,
        }
    }

    /// CSV body `k,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,probability\n");
        for (k, p) in self.pmf.iter().enumerate() {
            out.push_str(&format!("{k},{p:.17e}\n"));
        }
        out
    }
}
