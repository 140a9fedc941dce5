//! Asymptotic accuracy of tomography: Fisher information of a protocol,
//! the fidelity-loss spectrum it induces, and the resulting generalized
//! chi-square distribution of `1 - F`.
//!
//! A pure state `ψ ∈ C^s` is parametrized by the real vector
//! `θ = (Re ψ, Im ψ)`. For outcome probabilities `p = ⟨ψ|Λ|ψ⟩` the score is
//! `∂p/∂θ = 2 (Re Λψ, Im Λψ)`, and the Fisher matrix of a protocol with
//! `n_b` shots in basis `b` is `H = Σ_b n_b Σ_λ ∇p ∇pᵀ / p`.
//!
//! Normalization and global phase are not identifiable, so `H` is projected
//! onto the `2s - 2` dimensional complement of `θ` and `iθ`. The estimation
//! error `δθ` in that subspace is asymptotically Gaussian with covariance
//! `H⁺`, and `1 - F ≈ |δθ|²`. Hence `1 - F = Σ d_j ξ_j²` with `d_j` the
//! eigenvalues of `H⁺`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::povm::BasisPovm;
use crate::quantum::{c64, CVector, PureState};

/// Probabilities below this are treated as structurally zero and skipped.
pub const SKIP_PROBABILITY: f64 = 1e-14;
const NULL_RELATIVE: f64 = 1e-9;

/// Fisher information in the real `(Re ψ, Im ψ)` parametrization.
#[derive(Debug, Clone)]
pub struct FisherInfo {
    pub matrix: DMatrix<f64>,
    /// `(basis index, effect index)` of outcomes skipped for near-zero probability.
    pub skipped: Vec<(usize, usize)>,
}

/// `Λ ψ` for every effect of a basis, using the diagonal frame when available.
fn effect_actions(bp: &BasisPovm, psi: &CVector) -> Vec<CVector> {
    match bp.weights() {
        Some(w) => {
            let u = bp.basis.matrix();
            let uh = u.adjoint();
            let phi = u * psi;
            (0..w.nrows())
                .map(|i| {
                    let scaled = CVector::from_fn(phi.len(), |j, _| phi[j] * w[(i, j)]);
                    &uh * scaled
                })
                .collect()
        }
        None => bp.povm.effects().iter().map(|e| &e.matrix * psi).collect(),
    }
}

/// Analytic gradient of `⟨ψ|Λ|ψ⟩` with respect to `(Re ψ, Im ψ)`, given `Λψ`.
pub fn probability_gradient(action: &CVector) -> DVector<f64> {
    let s = action.len();
    DVector::from_fn(2 * s, |i, _| {
        if i < s {
            2.0 * action[i].re
        } else {
            2.0 * action[i - s].im
        }
    })
}

/// Fisher matrix for `n` total shots split across bases by `fractions`.
pub fn fisher_information(state: &PureState, povms: &[BasisPovm], fractions: &[f64], n: f64) -> Result<FisherInfo> {
    if povms.len() != fractions.len() {
        return Err(Error::DimensionMismatch {
            expected: povms.len(),
            got: fractions.len(),
        });
    }
    let s = state.dim();
    let psi = state.amplitudes();
    let mut h = DMatrix::zeros(2 * s, 2 * s);
    let mut skipped = Vec::new();
    for (b, (bp, &frac)) in povms.iter().zip(fractions).enumerate() {
        if bp.povm.dim() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                got: bp.povm.dim(),
            });
        }
        let shots = n * frac;
        for (i, action) in effect_actions(bp, psi).iter().enumerate() {
            let p = psi.dotc(action).re;
            if p < SKIP_PROBABILITY {
                skipped.push((b, i));
                continue;
            }
            let g = probability_gradient(action);
            h.ger(shots / p, &g, &g, 1.0);
        }
    }
    Ok(FisherInfo { matrix: h, skipped })
}

/// Eigenvalues `d_j` of the asymptotic fidelity-loss quadratic form.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpectrum {
    d: Vec<f64>,
    n: f64,
}

impl LossSpectrum {
    pub fn new(mut d: Vec<f64>, n: f64) -> Result<Self> {
        if d.is_empty() || d.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Domain("loss spectrum needs finite nonnegative entries".into()));
        }
        d.sort_by(f64::total_cmp);
        Ok(Self { d, n })
    }

    /// Ascending.
    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn nu(&self) -> usize {
        self.d.len()
    }

    pub fn shots(&self) -> f64 {
        self.n
    }

    /// `⟨1 - F⟩ = Σ d_j`.
    pub fn mean_infidelity(&self) -> f64 {
        self.d.iter().sum()
    }

    /// Copy with every `d_j` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            d: self.d.iter().map(|x| x * factor).collect(),
            n: self.n,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,d_j\n");
        for (j, d) in self.d.iter().enumerate() {
            out.push_str(&format!("{},{d:.17e}\n", j + 1));
        }
        out
    }
}

/// Project `H` onto the tangent space at `ψ` and invert on it.
pub fn loss_spectrum(fisher: &FisherInfo, state: &PureState, n: f64) -> Result<LossSpectrum> {
    let s = state.dim();
    let h = &fisher.matrix;
    if h.nrows() != 2 * s {
        return Err(Error::DimensionMismatch {
            expected: 2 * s,
            got: h.nrows(),
        });
    }
    let radial = state.real_params();
    let phase_vec = state.amplitudes().map(|z| z * c64(0.0, 1.0));
    let phase = PureState::new(phase_vec).expect("phase rotation keeps the norm").real_params();
    let mut proj = DMatrix::identity(2 * s, 2 * s);
    proj.ger(-1.0, &radial, &radial, 1.0);
    proj.ger(-1.0, &phase, &phase, 1.0);
    let projected = &proj * h * &proj;
    let projected = (&projected + projected.transpose()).scale(0.5);
    let eig = projected.symmetric_eigen();
    let mut pairs: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, eig.eigenvectors.column(i).into_owned()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let nu = 2 * s - 2;
    let largest = pairs[0].0.max(0.0);
    let cutoff = NULL_RELATIVE * largest;
    let null: Vec<&(f64, DVector<f64>)> = pairs[..nu].iter().filter(|(v, _)| *v <= cutoff).collect();
    if largest <= 0.0 || !null.is_empty() {
        let detail = null
            .iter()
            .map(|(v, vec)| {
                let entries: Vec<String> = vec.iter().map(|x| format!("{x:.3}")).collect();
                format!("eigenvalue {v:.3e} along [{}]", entries.join(", "))
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::InformationallyIncomplete {
            null_directions: null.len().max(1),
            detail,
        });
    }
    LossSpectrum::new(pairs[..nu].iter().map(|(v, _)| 1.0 / v).collect(), n)
}

/// Loss spectrum of `state` under a protocol, in one call.
pub fn state_spectrum(state: &PureState, povms: &[BasisPovm], fractions: &[f64], n: f64) -> Result<LossSpectrum> {
    let h = fisher_information(state, povms, fractions, n)?;
    loss_spectrum(&h, state, n)
}

/// `L = n ⟨1 - F⟩ = n Σ d_j`.
pub fn mean_loss(spectrum: &LossSpectrum) -> f64 {
    spectrum.n * spectrum.mean_infidelity()
}

/// Characteristic function `Π_j (1 - 2 i d_j t)^{-1/2}` of `Σ d_j ξ_j²`.
pub fn char_function(spectrum: &LossSpectrum, t: f64) -> Complex64 {
    let log_sum: Complex64 = spectrum
        .d
        .iter()
        .map(|&d| c64(1.0, -2.0 * d * t).ln())
        .sum();
    (-0.5 * log_sum).exp()
}

/// Grid controls for [`loss_pdf`].
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    /// Loss axis runs over `[0, range_factor · Σ d_j]`.
    pub range_factor: f64,
    pub min_points: usize,
    pub max_points: usize,
    /// Spectral cutoff target: stop refining once `|φ| < cutoff` at the top frequency.
    pub cutoff: f64,
    pub mass_tol: f64,
    pub mean_rel_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            range_factor: 20.0,
            min_points: 1 << 12,
            max_points: 1 << 20,
            cutoff: 1e-12,
            mass_tol: 1e-4,
            mean_rel_tol: 1e-3,
        }
    }
}

/// Density and distribution function of `1 - F` on a uniform grid.
#[derive(Debug, Clone)]
pub struct LossDistribution {
    x: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
}

impl LossDistribution {
    pub fn grid(&self) -> &[f64] {
        &self.x
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    /// Probability captured by the grid.
    pub fn mass(&self) -> f64 {
        *self.cdf.last().expect("nonempty grid")
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        if x <= 0.0 {
            return values[0];
        }
        let step = self.x[1] - self.x[0];
        let pos = x / step;
        let i = pos.floor() as usize;
        if i + 1 >= self.x.len() {
            return *values.last().expect("nonempty grid");
        }
        let frac = pos - i as f64;
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }

    pub fn cdf_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.interpolate(&self.cdf, x).clamp(0.0, 1.0)
    }

    pub fn density_at(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.interpolate(&self.density, x)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < q);
        self.x[i.min(self.x.len() - 1)]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("one_minus_F,density\n");
        for (x, p) in self.x.iter().zip(&self.density) {
            out.push_str(&format!("{x:.10e},{p:.10e}\n"));
        }
        out
    }
}

/// Invert the characteristic function by FFT on a periodic grid of twice the
/// requested loss range. The distribution function is obtained from the
/// integrated Fourier series, the density from a Lanczos-filtered series.
pub fn loss_pdf(spectrum: &LossSpectrum, grid: &GridSpec) -> Result<LossDistribution> {
    let mu = spectrum.mean_infidelity();
    if !(mu > 0.0) {
        return Err(Error::Domain("loss spectrum has zero mean".into()));
    }
    let range = grid.range_factor * mu;
    let period = 2.0 * range;
    let mut m = grid.min_points.next_power_of_two().max(16);
    loop {
        let omega_max = std::f64::consts::PI * m as f64 / period;
        let resolved = char_function(spectrum, omega_max).norm() < grid.cutoff;
        if resolved || m >= grid.max_points {
            let dist = invert(spectrum, period, m, mu);
            let mass_ok = (dist.mass() - 1.0).abs() <= grid.mass_tol;
            let mean_ok = ((dist.mean - mu) / mu).abs() <= grid.mean_rel_tol;
            if mass_ok && mean_ok {
                return Ok(dist);
            }
            if m >= grid.max_points {
                return Err(Error::Resolution {
                    points: m,
                    detail: format!("mass {:.6}, mean {:.6e} vs {:.6e}", dist.mass(), dist.mean, mu),
                });
            }
        }
        m *= 2;
    }
}

fn invert(spectrum: &LossSpectrum, period: f64, m: usize, mu: f64) -> LossDistribution {
    let half = m / 2;
    let d_omega = 2.0 * std::f64::consts::PI / period;
    let dx = period / m as f64;
    let mut pdf_coef = vec![c64(0.0, 0.0); m];
    let mut cdf_coef = vec![c64(0.0, 0.0); m];
    for j in 1..half {
        let omega = j as f64 * d_omega;
        let c = char_function(spectrum, omega) / period;
        let arg = std::f64::consts::PI * j as f64 / half as f64;
        let sigma = arg.sin() / arg;
        pdf_coef[j] = c * sigma;
        let g = c / c64(0.0, omega);
        cdf_coef[j] = g;
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut pdf_coef);
    fft.process(&mut cdf_coef);
    let x: Vec<f64> = (0..=half).map(|i| i as f64 * dx).collect();
    let raw: Vec<f64> = (0..=half).map(|i| 1.0 / period + 2.0 * pdf_coef[i].re).collect();
    // the zero-frequency term of F(x) - x/P is fixed by the mean, not by F(0) = 0,
    // because the series converges slowly at the origin
    let offset = 0.5 - mu / period;
    let cdf: Vec<f64> = (0..=half)
        .map(|i| i as f64 * dx / period + offset - 2.0 * cdf_coef[i].re)
        .collect();
    let mut mean = 0.0;
    for w in cdf.windows(2) {
        mean += 0.5 * ((1.0 - w[0]) + (1.0 - w[1])) * dx;
    }
    let peak = raw.iter().cloned().fold(0.0, f64::max);
    let density = raw.iter().map(|&v| if v < 1e-9 * peak { 0.0 } else { v }).collect();
    LossDistribution {
        x,
        density,
        cdf: cdf.iter().map(|c| c.clamp(0.0, 1.0)).collect(),
        mean,
    }
}

/// Equal-weight mixture of the loss distributions of several states,
/// sampled at caller-chosen points.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureProfile {
    pub cdf: Vec<f64>,
    pub density: Vec<f64>,
    pub mean: f64,
}

/// Evaluates the mixture one component at a time, so memory stays bounded by
/// a single distribution per worker. Components are summed in input order and
/// the result does not depend on the thread count.
pub fn mixture_profile(spectra: &[LossSpectrum], cdf_points: &[f64], density_points: &[f64], grid: &GridSpec) -> Result<MixtureProfile> {
    if spectra.is_empty() {
        return Err(Error::Domain("mixture needs at least one spectrum".into()));
    }
    let parts: Vec<(Vec<f64>, Vec<f64>, f64)> = spectra
        .par_iter()
        .map(|spec| {
            let dist = loss_pdf(spec, grid)?;
            Ok((
                cdf_points.iter().map(|&x| dist.cdf_at(x)).collect(),
                density_points.iter().map(|&x| dist.density_at(x)).collect(),
                dist.mean(),
            ))
        })
        .collect::<Result<_>>()?;
    let m = spectra.len() as f64;
    let mut cdf = vec![0.0; cdf_points.len()];
    let mut density = vec![0.0; density_points.len()];
    let mut mean = 0.0;
    for (c, d, mu) in &parts {
        cdf.iter_mut().zip(c).for_each(|(a, b)| *a += b / m);
        density.iter_mut().zip(d).for_each(|(a, b)| *a += b / m);
        mean += mu / m;
    }
    Ok(MixtureProfile { cdf, density, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_stats::{ReadoutPhysics, DEFAULT_TAIL_TOL};
    use crate::povm::{ModelKind, ReadoutModel};
    use crate::quantum::{haar_random_pure, pauli_bases, MeasurementProtocol};
    use crate::rng::rng_from_seed;
    use std::f64::consts::PI;

    fn fig1() -> ReadoutModel {
        ReadoutModel::new(ReadoutPhysics::new(1.0, 0.05, 3.0, 0.05).unwrap(), DEFAULT_TAIL_TOL, None).unwrap()
    }

    fn spectrum_for(model: &ReadoutModel, kind: ModelKind, psi: &PureState, n: f64) -> LossSpectrum {
        let proto = pauli_bases(2).unwrap();
        let povms = model.protocol_povms(kind, &proto).unwrap();
        state_spectrum(psi, &povms, proto.fractions(), n).unwrap()
    }

    #[test]
    fn fisher_matrix_is_symmetric_psd_and_linear_in_shots() {
        let model = fig1();
        let proto = pauli_bases(2).unwrap();
        let povms = model.protocol_povms(ModelKind::PhotonCount, &proto).unwrap();
        let psi = haar_random_pure(4, &mut rng_from_seed(1));
        let h = fisher_information(&psi, &povms, proto.fractions(), 1e6).unwrap();
        let h2 = fisher_information(&psi, &povms, proto.fractions(), 2e6).unwrap();
        let m = &h.matrix;
        assert!((m - m.transpose()).abs().max() < 1e-9 * m.abs().max());
        let min = m.clone().symmetric_eigen().eigenvalues.min();
        assert!(min >= -1e-9 * m.norm());
        assert!((&h2.matrix - m.scale(2.0)).abs().max() <= 1e-12 * m.abs().max());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let model = fig1();
        let proto = pauli_bases(2).unwrap();
        let povms = model.protocol_povms(ModelKind::PhotonCount, &proto).unwrap();
        let mut rng = rng_from_seed(2);
        let step = 1e-5;
        for trial in 0..5 {
            let psi = haar_random_pure(4, &mut rng);
            let bp = &povms[trial];
            let amps = psi.amplitudes();
            for (e_idx, action) in effect_actions(bp, amps).iter().enumerate().step_by(37) {
                let grad = probability_gradient(action);
                let effect = &bp.povm.effects()[e_idx].matrix;
                let prob = |v: &CVector| v.dotc(&(effect * v)).re;
                for a in 0..8 {
                    let mut plus = amps.clone();
                    let mut minus = amps.clone();
                    let delta = if a < 4 { c64(step, 0.0) } else { c64(0.0, step) };
                    plus[a % 4] += delta;
                    minus[a % 4] -= delta;
                    let fd = (prob(&plus) - prob(&minus)) / (2.0 * step);
                    let scale = grad.amax().max(1e-12);
                    assert!((fd - grad[a]).abs() <= 1e-6 * scale, "fd {fd} vs {}", grad[a]);
                }
            }
        }
    }

    #[test]
    fn six_eigenvalues_for_two_qubits() {
        let psi = haar_random_pure(4, &mut rng_from_seed(3));
        let spec = spectrum_for(&fig1(), ModelKind::PhotonCount, &psi, 1e6);
        assert_eq!(spec.nu(), 6);
        assert!(spec.d().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn ideal_pauli_losses_lie_above_the_bound() {
        let model = fig1();
        let mut rng = rng_from_seed(4);
        for _ in 0..30 {
            let psi = haar_random_pure(4, &mut rng);
            let l = mean_loss(&spectrum_for(&model, ModelKind::IdealProjector, &psi, 1e6));
            assert!((3.0 - 1e-6..=3.6).contains(&l), "L = {l}");
        }
    }

    #[test]
    fn incomplete_protocol_is_reported() {
        let model = fig1();
        let z_only = MeasurementProtocol::new(2, vec![pauli_bases(2).unwrap().bases()[8].clone()], vec![1.0]).unwrap();
        let povms = model.protocol_povms(ModelKind::IdealProjector, &z_only).unwrap();
        let psi = haar_random_pure(4, &mut rng_from_seed(5));
        let err = state_spectrum(&psi, &povms, z_only.fractions(), 1e6).unwrap_err();
        match err {
            Error::InformationallyIncomplete { null_directions, .. } => assert_eq!(null_directions, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_probability_effects_are_skipped() {
        let model = fig1();
        let proto = pauli_bases(2).unwrap();
        let povms = model.protocol_povms(ModelKind::IdealProjector, &proto).unwrap();
        let h = fisher_information(&PureState::basis(4, 0), &povms, proto.fractions(), 1e6).unwrap();
        assert!(!h.skipped.is_empty());
        assert!(h.matrix.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn mean_loss_properties() {
        let n = 1e6;
        let flat = LossSpectrum::new(vec![0.5 / n; 6], n).unwrap();
        assert!((mean_loss(&flat) - 3.0).abs() < 1e-12);
        let spec = LossSpectrum::new(vec![1e-6, 3e-6, 2e-7], n).unwrap();
        assert!((mean_loss(&spec.scaled(2.0)) - 2.0 * mean_loss(&spec)).abs() < 1e-12);
        assert!(LossSpectrum::new(vec![-1.0], n).is_err());
    }

    #[test]
    fn photon_counting_never_loses_to_threshold() {
        let model = fig1();
        let mut rng = rng_from_seed(6);
        for _ in 0..10 {
            let psi = haar_random_pure(4, &mut rng);
            let pc = mean_loss(&spectrum_for(&model, ModelKind::PhotonCount, &psi, 1e6));
            let th = mean_loss(&spectrum_for(&model, ModelKind::Threshold, &psi, 1e6));
            assert!(pc <= th, "{pc} > {th}");
        }
    }

    #[test]
    fn characteristic_function_basics() {
        let spec = LossSpectrum::new(vec![2e-6, 5e-6, 1e-5], 1e6).unwrap();
        assert_eq!(char_function(&spec, 0.0), c64(1.0, 0.0));
        let single = LossSpectrum::new(vec![0.7], 1.0).unwrap();
        for t in [0.1f64, 1.0, 13.0, 400.0] {
            let modulus = (1.0 + 4.0 * 0.49 * t * t).powf(-0.25);
            assert!((char_function(&single, t).norm() - modulus).abs() < 1e-14);
        }
        // -i φ'(0) = Σ d_j by central differences
        let h = 1.0;
        let deriv = (char_function(&spec, h) - char_function(&spec, -h)) / (2.0 * h);
        let mean = (deriv * c64(0.0, -1.0)).re;
        assert!((mean - spec.mean_infidelity()).abs() < 1e-9 * spec.mean_infidelity());
    }

    fn chi2_1_density(x: f64) -> f64 {
        (-x / 2.0).exp() / (2.0 * PI * x).sqrt()
    }

    #[test]
    fn single_component_density_matches_chi_square() {
        let d = 2.5e-6;
        let spec = LossSpectrum::new(vec![d], 1e6).unwrap();
        let dist = loss_pdf(&spec, &GridSpec::default()).unwrap();
        assert!((dist.mass() - 1.0).abs() < 1e-4);
        assert!((dist.mean() - d).abs() < 1e-3 * d);
        for u in [0.05, 0.1, 0.3, 0.7, 1.0, 2.0, 4.0, 8.0] {
            let exact = chi2_1_density(u) / d;
            let got = dist.density_at(u * d);
            // interpolation between grid points is exact enough at this resolution
            assert!(((got - exact) / exact).abs() < 1e-3, "u={u}: {got} vs {exact}");
        }
        let chi = statrs::distribution::ChiSquared::new(1.0).unwrap();
        for u in [0.01, 0.1, 1.0, 3.0, 10.0] {
            let exact = statrs::distribution::ContinuousCDF::cdf(&chi, u);
            assert!((dist.cdf_at(u * d) - exact).abs() < 1e-4, "u={u}");
        }
    }

    #[test]
    fn multi_component_moments() {
        let psi = haar_random_pure(4, &mut rng_from_seed(8));
        let spec = spectrum_for(&fig1(), ModelKind::PhotonCount, &psi, 1e6);
        let dist = loss_pdf(&spec, &GridSpec::default()).unwrap();
        assert!((dist.mass() - 1.0).abs() < 1e-4);
        assert!(((dist.mean() - spec.mean_infidelity()) / spec.mean_infidelity()).abs() < 1e-3);
        assert!(dist.density().iter().all(|&p| p >= 0.0));
        // trapezoid mass of the density agrees with the cdf
        let dx = dist.grid()[1];
        let mass: f64 = dist.density().windows(2).map(|w| 0.5 * (w[0] + w[1]) * dx).sum();
        assert!((mass - 1.0).abs() < 1e-3);
        assert!(dist.grid().len() <= (1 << 19) + 1, "grid {}", dist.grid().len());
        let median = dist.quantile(0.5);
        assert!(median > 0.0 && median < spec.mean_infidelity() * 2.0);
    }

    #[test]
    fn mixture_of_identical_components_is_the_component() {
        let spec = LossSpectrum::new(vec![1e-6, 2e-6, 4e-6], 1e6).unwrap();
        let dist = loss_pdf(&spec, &GridSpec::default()).unwrap();
        let xs = [1e-6, 5e-6, 2e-5];
        let mix = mixture_profile(&[spec.clone(), spec.clone(), spec], &xs, &xs, &GridSpec::default()).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            assert!((mix.cdf[i] - dist.cdf_at(x)).abs() < 1e-14);
            assert!((mix.density[i] - dist.density_at(x)).abs() < 1e-9 * dist.density_at(x));
        }
        assert!((mix.mean - 7e-6).abs() < 1e-3 * 7e-6);
    }
}
