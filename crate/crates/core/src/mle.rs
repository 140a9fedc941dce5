//! Maximum-likelihood state reconstruction in the root parametrization
//! `ρ = c c†`, with arbitrary (fuzzy) measurement operators.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::povm::BasisPovm;
use crate::quantum::{c64, fidelity, hermitian_eigen, CMatrix, DensityMatrix, PureState};
use crate::simulator::Dataset;

const PROB_FLOOR: f64 = 1e-300;

/// Square root `c` of a density matrix, `ρ = c c†`, with `tr(c c†) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootState {
    root: CMatrix,
}

impl RootState {
    pub fn new(root: CMatrix) -> Result<Self> {
        let norm = root.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("root must be nonzero".into()));
        }
        Ok(Self {
            root: root.unscale(norm),
        })
    }

    /// Maximally mixed root of rank `rank`, slightly perturbed in a fixed
    /// pattern so that no symmetry of the data can trap the iteration.
    pub fn initial(dim: usize, rank: usize) -> Self {
        let root = CMatrix::from_fn(dim, rank, |i, j| {
            let base = if i == j { 1.0 } else { 0.0 };
            let wiggle = 1e-3 * ((i * 7 + j * 3) % 11) as f64 / 11.0;
            c64(base + wiggle, 1e-3 * ((i + 2 * j) % 5) as f64 / 5.0)
        });
        Self::new(root).expect("nonzero")
    }

    /// Leading eigenvectors of `rho` scaled by the square roots of their weights.
    pub fn from_density(rho: &DensityMatrix, rank: usize) -> Self {
        let (vals, vecs) = hermitian_eigen(rho.matrix());
        let s = rho.dim();
        let root = CMatrix::from_fn(s, rank, |i, j| {
            let col = s - 1 - j;
            vecs[(i, col)] * vals[col].max(1e-12).sqrt()
        });
        Self::new(root).expect("nonzero")
    }

    pub fn root(&self) -> &CMatrix {
        &self.root
    }

    pub fn rank(&self) -> usize {
        self.root.ncols()
    }

    pub fn density(&self) -> CMatrix {
        &self.root * self.root.adjoint()
    }

    /// Right-multiply by an `r × r` unitary.
    pub fn regauged(&self, v: &CMatrix) -> Self {
        Self {
            root: &self.root * v,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReconstructOptions {
    /// Stop when the relative change of the log-likelihood drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep the log-likelihood of every accepted iterate.
    pub record_trace: bool,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 10_000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub estimate: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when a full-rank reconstruction ends with eigenvalues the data
    /// cannot resolve from zero.
    pub rank_deficient: bool,
    pub fidelity: Option<f64>,
    /// Log-likelihood after each iteration (index 0 is the starting point).
    pub trace: Vec<f64>,
}

impl ReconstructionResult {
    pub fn with_truth(mut self, truth: &PureState) -> Result<Self> {
        self.fidelity = Some(fidelity(truth, &self.estimate)?);
        Ok(self)
    }

    pub fn infidelity(&self) -> Option<f64> {
        self.fidelity.map(|f| 1.0 - f)
    }
}

enum Operators {
    Diagonal(DMatrix<f64>),
    Dense(Vec<CMatrix>),
}

struct CompiledBasis {
    frame: CMatrix,
    frame_adj: CMatrix,
    ops: Operators,
    /// (effect index, count) for outcomes with nonzero count.
    observed: Vec<(usize, f64)>,
}

/// Dataset joined to its per-basis measurement operators.
pub struct Likelihood {
    bases: Vec<CompiledBasis>,
    dim: usize,
    shots: f64,
}

impl Likelihood {
    pub fn new(dataset: &Dataset, povms: &[BasisPovm]) -> Result<Self> {
        let dim = povms
            .first()
            .map(|b| b.povm.dim())
            .ok_or_else(|| Error::DataMismatch("no measurement bases".into()))?;
        let by_label: HashMap<&str, &BasisPovm> = povms.iter().map(|b| (b.basis.label(), b)).collect();
        let mut bases = Vec::with_capacity(dataset.records.len());
        let mut shots = 0.0;
        for rec in &dataset.records {
            let bp = by_label
                .get(rec.basis.as_str())
                .ok_or_else(|| Error::DataMismatch(format!("no POVM for basis '{}'", rec.basis)))?;
            if bp.povm.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: bp.povm.dim(),
                });
            }
            let index: HashMap<_, usize> = bp
                .povm
                .effects()
                .iter()
                .enumerate()
                .map(|(i, e)| (&e.label, i))
                .collect();
            let mut observed = Vec::with_capacity(rec.counts.len());
            for (label, &count) in &rec.counts {
                if count == 0 {
                    continue;
                }
                let i = *index.get(label).ok_or_else(|| {
                    Error::DataMismatch(format!("outcome {label} in basis {} has no effect", rec.basis))
                })?;
                observed.push((i, count as f64));
                shots += count as f64;
            }
            let ops = match bp.weights() {
                Some(w) => Operators::Diagonal(w.clone()),
                None => Operators::Dense(bp.povm.effects().iter().map(|e| e.matrix.clone()).collect()),
            };
            let (frame, frame_adj) = match ops {
                Operators::Diagonal(_) => (bp.basis.matrix().clone(), bp.basis.matrix().adjoint()),
                Operators::Dense(_) => (CMatrix::identity(dim, dim), CMatrix::identity(dim, dim)),
            };
            bases.push(CompiledBasis {
                frame,
                frame_adj,
                ops,
                observed,
            });
        }
        Ok(Self { bases, dim, shots })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_counts(&self) -> f64 {
        self.shots
    }

    /// `Σ count · ln tr(Λ ρ)` for `ρ = c c†`; `-inf` when an observed outcome
    /// has probability exactly zero.
    pub fn evaluate(&self, c: &CMatrix) -> f64 {
        let mut total = 0.0;
        for b in &self.bases {
            match &b.ops {
                Operators::Diagonal(w) => {
                    let y = &b.frame * c;
                    let pops = populations(&y);
                    for &(i, k) in &b.observed {
                        let p: f64 = (0..self.dim).map(|j| w[(i, j)] * pops[j]).sum();
                        match log_prob(p) {
                            Some(lp) => total += k * lp,
                            None => return f64::NEG_INFINITY,
                        }
                    }
                }
                Operators::Dense(effects) => {
                    let rho = c * c.adjoint();
                    for &(i, k) in &b.observed {
                        match log_prob(trace_product(&effects[i], &rho)) {
                            Some(lp) => total += k * lp,
                            None => return f64::NEG_INFINITY,
                        }
                    }
                }
            }
        }
        total
    }

    /// Same as [`Likelihood::evaluate`] for an explicit density matrix.
    pub fn evaluate_density(&self, rho: &CMatrix) -> f64 {
        let mut total = 0.0;
        for b in &self.bases {
            let probs: Box<dyn Fn(usize) -> f64> = match &b.ops {
                Operators::Diagonal(w) => {
                    let rotated = &b.frame * rho * &b.frame_adj;
                    let pops: Vec<f64> = (0..self.dim).map(|j| rotated[(j, j)].re).collect();
                    Box::new(move |i| (0..pops.len()).map(|j| w[(i, j)] * pops[j]).sum())
                }
                Operators::Dense(effects) => Box::new(move |i| trace_product(&effects[i], rho)),
            };
            for &(i, k) in &b.observed {
                match log_prob(probs(i)) {
                    Some(lp) => total += k * lp,
                    None => return f64::NEG_INFINITY,
                }
            }
        }
        total
    }

    /// `R c` with `R = Σ (count / p) Λ`.
    fn r_times(&self, c: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(c.nrows(), c.ncols());
        for b in &self.bases {
            match &b.ops {
                Operators::Diagonal(w) => {
                    let y = &b.frame * c;
                    let pops = populations(&y);
                    let mut g = vec![0.0; self.dim];
                    for &(i, k) in &b.observed {
                        let p: f64 = (0..self.dim).map(|j| w[(i, j)] * pops[j]).sum();
                        let ratio = k / p.max(PROB_FLOOR);
                        for (j, gj) in g.iter_mut().enumerate() {
                            *gj += ratio * w[(i, j)];
                        }
                    }
                    let mut scaled = y;
                    for (j, gj) in g.iter().enumerate() {
                        scaled.row_mut(j).scale_mut(*gj);
                    }
                    out += &b.frame_adj * scaled;
                }
                Operators::Dense(effects) => {
                    let rho = c * c.adjoint();
                    for &(i, k) in &b.observed {
                        let p = trace_product(&effects[i], &rho);
                        out += (&effects[i] * c).scale(k / p.max(PROB_FLOOR));
                    }
                }
            }
        }
        out
    }
}

fn populations(y: &CMatrix) -> Vec<f64> {
    (0..y.nrows())
        .map(|i| y.row(i).iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut tr = 0.0;
    for r in 0..n {
        for c in 0..n {
            tr += (a[(r, c)] * b[(c, r)]).re;
        }
    }
    tr
}

fn log_prob(p: f64) -> Option<f64> {
    if p <= 0.0 {
        None
    } else {
        Some(p.max(PROB_FLOOR).ln())
    }
}

/// Log-likelihood of `state` given `dataset`.
pub fn log_likelihood(dataset: &Dataset, povms: &[BasisPovm], state: &DensityMatrix) -> Result<f64> {
    let lik = Likelihood::new(dataset, povms)?;
    if state.dim() != lik.dim() {
        return Err(Error::DimensionMismatch {
            expected: lik.dim(),
            got: state.dim(),
        });
    }
    Ok(lik.evaluate_density(state.matrix()))
}

/// Maximum-likelihood estimate of rank at most `rank`.
pub fn reconstruct(dataset: &Dataset, povms: &[BasisPovm], rank: usize, options: &ReconstructOptions) -> Result<ReconstructionResult> {
    let lik = Likelihood::new(dataset, povms)?;
    let s = lik.dim();
    if rank == 0 || rank > s {
        return Err(Error::Domain(format!("rank must lie in [1, {s}], got {rank}")));
    }
    let start = if rank == s {
        RootState::initial(s, s)
    } else {
        // seed the low-rank search from a loose full-rank fit
        let loose = ReconstructOptions {
            tol: 1e-6,
            max_iter: 200,
            record_trace: false,
        };
        let full = ascend(&lik, RootState::initial(s, s), &loose);
        RootState::from_density(&full.estimate, rank)
    };
    Ok(ascend(&lik, start, options))
}

/// Same as [`reconstruct`] from a caller-supplied starting root.
pub fn reconstruct_from(dataset: &Dataset, povms: &[BasisPovm], start: RootState, options: &ReconstructOptions) -> Result<ReconstructionResult> {
    let lik = Likelihood::new(dataset, povms)?;
    if start.root().nrows() != lik.dim() {
        return Err(Error::DimensionMismatch {
            expected: lik.dim(),
            got: start.root().nrows(),
        });
    }
    Ok(ascend(&lik, start, options))
}

/// Monotone ascent: step along `R c / n - c` (the projected likelihood
/// gradient), halving the step on any decrease and widening it after success.
fn ascend(lik: &Likelihood, start: RootState, options: &ReconstructOptions) -> ReconstructionResult {
    let n = lik.total_counts().max(1.0);
    let mut c = start.root;
    let mut ll = lik.evaluate(&c);
    let mut trace = Vec::new();
    if options.record_trace {
        trace.push(ll);
    }
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        let direction = lik.r_times(&c).unscale(n) - &c;
        let mut accepted = None;
        while step > 1e-12 {
            let trial = &c + direction.scale(step);
            let norm = trial.norm();
            let trial = trial.unscale(norm);
            let trial_ll = lik.evaluate(&trial);
            if trial_ll >= ll {
                accepted = Some((trial, trial_ll));
                break;
            }
            step *= 0.5;
        }
        let Some((next, next_ll)) = accepted else {
            // no ascent left at machine resolution
            converged = true;
            break;
        };
        let change = (next_ll - ll).abs() / ll.abs().max(1.0);
        c = next;
        ll = next_ll;
        if options.record_trace {
            trace.push(ll);
        }
        step = (step * 1.5).min(100.0);
        if change < options.tol {
            converged = true;
            break;
        }
    }
    let rho = &c * c.adjoint();
    let estimate = DensityMatrix::project(&rho).expect("c c† has positive trace");
    let smallest = estimate.eigenvalues()[0];
    ReconstructionResult {
        rank_deficient: c.ncols() == lik.dim() && smallest < 1e-3 / n,
        estimate,
        log_likelihood: ll,
        iterations,
        converged,
        fidelity: None,
        trace,
    }
}

/// Undo a binary readout channel: estimate `p0` from the distorted
/// frequency `p0' = (1 - eps10) p0 + eps01 (1 - p0)`.
pub fn invert_binary_response(p0_distorted: f64, eps10: f64, eps01: f64) -> Result<f64> {
    let denom = 1.0 - eps10 - eps01;
    if denom <= 0.0 {
        return Err(Error::DegenerateChannel(eps10 + eps01));
    }
    Ok(((p0_distorted - eps01) / denom).clamp(0.0, 1.0))
}
