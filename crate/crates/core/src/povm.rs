//! Threshold and photon-count POVMs, their tensor products and basis rotations.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photon_stats::{optimal_threshold_for, threshold_errors, CountDistribution, ReadoutPhysics};
use crate::quantum::{c64, hermitian_defect, kron, max_abs_diff, min_eigenvalue, BasisUnitary, CMatrix, DensityMatrix, MeasurementProtocol, PureState};

const COMPLETENESS_TOL: f64 = 1e-10;
const EFFECT_PSD_TOL: f64 = 1e-12;

/// Which measurement model a POVM (or dataset) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Threshold,
    PhotonCount,
    #[serde(alias = "ideal")]
    IdealProjector,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Threshold => "threshold",
            ModelKind::PhotonCount => "photon_count",
            ModelKind::IdealProjector => "ideal_projector",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(ModelKind::Threshold),
            "photon_count" => Ok(ModelKind::PhotonCount),
            "ideal_projector" | "ideal" => Ok(ModelKind::IdealProjector),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

/// Outcome label: one value per qubit. Binary outcomes use 0 (bright) and 1
/// (dark); photon-count outcomes hold the count itself.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub Vec<u32>);

impl Label {
    pub fn single(v: u32) -> Self {
        Label(vec![v])
    }

    pub fn concat(&self, other: &Label) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Label(v)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "{}", parts.join(":"))
    }
}

impl std::str::FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.split(':')
            .map(|p| p.trim().parse::<u32>().map_err(|_| Error::Config(format!("bad outcome label '{s}'"))))
            .collect::<Result<Vec<_>>>()
            .map(Label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub matrix: CMatrix,
    pub label: Label,
}

/// Ordered effects summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<Effect>,
    dim: usize,
    model: ModelKind,
}

impl Povm {
    /// Validates Hermiticity, positivity and completeness.
    pub fn new(effects: Vec<Effect>, model: ModelKind) -> Result<Self> {
        let dim = effects
            .first()
            .map(|e| e.matrix.nrows())
            .ok_or_else(|| Error::InvalidPovm("no effects".into()))?;
        for e in &effects {
            if e.matrix.nrows() != dim || e.matrix.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.matrix.nrows(),
                });
            }
            let h = hermitian_defect(&e.matrix);
            if h > 1e-12 {
                return Err(Error::InvalidPovm(format!("effect {} not Hermitian ({h:e})", e.label)));
            }
            let min = min_eigenvalue(&e.matrix);
            if min < -EFFECT_PSD_TOL {
                return Err(Error::InvalidPovm(format!("effect {} has eigenvalue {min:e}", e.label)));
            }
        }
        let povm = Self { effects, dim, model };
        let defect = povm.completeness_defect();
        if defect > COMPLETENESS_TOL {
            return Err(Error::InvalidPovm(format!("effects sum to identity only within {defect:e}")));
        }
        Ok(povm)
    }

    fn unchecked(effects: Vec<Effect>, dim: usize, model: ModelKind) -> Self {
        Self { effects, dim, model }
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    /// Entrywise distance between the sum of the effects and the identity.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for e in &self.effects {
            sum += &e.matrix;
        }
        max_abs_diff(&sum, &CMatrix::identity(self.dim, self.dim))
    }

    pub fn min_effect_eigenvalue(&self) -> f64 {
        self.effects
            .iter()
            .map(|e| min_eigenvalue(&e.matrix))
            .fold(f64::INFINITY, f64::min)
    }

    /// Diagonals of the effects as an `(outcomes × dim)` matrix, when every
    /// effect is diagonal in the computational basis.
    pub fn diagonal_weights(&self) -> Option<DMatrix<f64>> {
        let mut w = DMatrix::zeros(self.effects.len(), self.dim);
        for (i, e) in self.effects.iter().enumerate() {
            for r in 0..self.dim {
                for c in 0..self.dim {
                    let v = e.matrix[(r, c)];
                    if r == c {
                        if v.im.abs() > 1e-15 {
                            return None;
                        }
                        w[(i, r)] = v.re;
                    } else if v.norm() > 1e-15 {
                        return None;
                    }
                }
            }
        }
        Some(w)
    }

    /// Born-rule probabilities `tr(Λ ρ)`, tiny negatives clipped to zero.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rho.dim(),
            });
        }
        let m = rho.matrix();
        Ok(self
            .effects
            .iter()
            .map(|e| {
                let mut tr = 0.0;
                for r in 0..self.dim {
                    for c in 0..self.dim {
                        tr += (e.matrix[(r, c)] * m[(c, r)]).re;
                    }
                }
                clip_probability(tr)
            })
            .collect())
    }

    /// CSV dump: one row per matrix entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,row,col,re,im\n");
        for e in &self.effects {
            for r in 0..self.dim {
                for c in 0..self.dim {
                    let v = e.matrix[(r, c)];
                    out.push_str(&format!("{},{r},{c},{:.17e},{:.17e}\n", e.label, v.re, v.im));
                }
            }
        }
        out
    }
}

pub(crate) fn clip_probability(p: f64) -> f64 {
    if p < 0.0 && p >= -1e-12 {
        0.0
    } else {
        p
    }
}

fn diag2(a: f64, b: f64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(a, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(b, 0.0)])
}

/// Single-qubit threshold POVM `{Λ0, Λ1}` for misclassification rates
/// `eps10` (bright read as dark) and `eps01` (dark read as bright).
pub fn threshold_povm(eps10: f64, eps01: f64) -> Result<Povm> {
    for (name, e) in [("eps10", eps10), ("eps01", eps01)] {
        if !(0.0..1.0).contains(&e) {
            return Err(Error::Domain(format!("{name} must lie in [0,1), got {e}")));
        }
    }
    let model = if eps10 == 0.0 && eps01 == 0.0 {
        ModelKind::IdealProjector
    } else {
        ModelKind::Threshold
    };
    let effects = vec![
        Effect {
            matrix: diag2(1.0 - eps10, eps01),
            label: Label::single(0),
        },
        Effect {
            matrix: diag2(eps10, 1.0 - eps01),
            label: Label::single(1),
        },
    ];
    Ok(Povm::unchecked(effects, 2, model))
}

/// Ideal computational-basis projectors on one qubit.
pub fn ideal_povm() -> Povm {
    threshold_povm(0.0, 0.0).expect("zero error rates are valid")
}

/// Single-qubit photon-count POVM with one effect per recorded count.
/// A shorter distribution is padded with empty bins to the common bound.
pub fn photon_count_povm(bright: &CountDistribution, dark: &CountDistribution) -> Povm {
    let n_ph = bright.n_ph().max(dark.n_ph());
    let (b, d) = (bright.padded_to(n_ph), dark.padded_to(n_ph));
    let effects = (0..=n_ph)
        .map(|k| Effect {
            matrix: diag2(b.prob(k), d.prob(k)),
            label: Label::single(k as u32),
        })
        .collect();
    Povm::unchecked(effects, 2, ModelKind::PhotonCount)
}

/// All products of one effect per part; labels are concatenated tuples in
/// row-major order with the first part varying slowest.
pub fn tensor_povm(parts: &[Povm]) -> Result<Povm> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| Error::InvalidPovm("tensor product of zero POVMs".into()))?;
    let model = first.model;
    let mut acc = first.clone();
    for p in rest {
        let effects = acc
            .effects
            .iter()
            .flat_map(|a| {
                p.effects.iter().map(move |b| Effect {
                    matrix: kron(&a.matrix, &b.matrix),
                    label: a.label.concat(&b.label),
                })
            })
            .collect();
        acc = Povm::unchecked(effects, acc.dim * p.dim, model);
    }
    Ok(acc)
}

/// Effective POVM when `u` is applied before readout: `Λ ↦ U† Λ U`.
pub fn rotate_povm(u: &BasisUnitary, povm: &Povm) -> Result<Povm> {
    if u.dim() != povm.dim {
        return Err(Error::DimensionMismatch {
            expected: povm.dim,
            got: u.dim(),
        });
    }
    let m = u.matrix();
    let mh = m.adjoint();
    let effects = povm
        .effects
        .iter()
        .map(|e| {
            let r = &mh * &e.matrix * m;
            Effect {
                matrix: (&r + r.adjoint()).scale(0.5),
                label: e.label.clone(),
            }
        })
        .collect();
    Ok(Povm::unchecked(effects, povm.dim, povm.model))
}

/// Rotated POVM for one basis of a protocol. When the unrotated model is
/// diagonal, its diagonals are kept so probabilities reduce to
/// `W · |U ψ|²` instead of dense traces.
#[derive(Debug, Clone)]
pub struct BasisPovm {
    pub basis: BasisUnitary,
    pub povm: Povm,
    weights: Option<DMatrix<f64>>,
}

impl BasisPovm {
    pub fn new(basis: BasisUnitary, model: &Povm) -> Result<Self> {
        let povm = rotate_povm(&basis, model)?;
        Ok(Self {
            weights: model.diagonal_weights(),
            basis,
            povm,
        })
    }

    /// Drop the diagonal shortcut; all evaluations go through dense effects.
    pub fn dense_only(mut self) -> Self {
        self.weights = None;
        self
    }

    pub fn weights(&self) -> Option<&DMatrix<f64>> {
        self.weights.as_ref()
    }

    pub fn len(&self) -> usize {
        self.povm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.povm.is_empty()
    }

    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        match &self.weights {
            Some(w) => {
                if rho.dim() != self.povm.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.povm.dim(),
                        got: rho.dim(),
                    });
                }
                let u = self.basis.matrix();
                let rotated = u * rho.matrix() * u.adjoint();
                let pops = nalgebra::DVector::from_fn(rho.dim(), |i, _| rotated[(i, i)].re);
                Ok((w * pops).iter().map(|&p| clip_probability(p)).collect())
            }
            None => self.povm.probabilities(rho),
        }
    }

    pub fn probabilities_pure(&self, psi: &PureState) -> Result<Vec<f64>> {
        match &self.weights {
            Some(w) => {
                let phi = self.basis.matrix() * psi.amplitudes();
                let pops = nalgebra::DVector::from_fn(phi.len(), |i, _| phi[i].norm_sqr());
                Ok((w * pops).iter().map(|&p| clip_probability(p)).collect())
            }
            None => self.povm.probabilities(&psi.to_density()),
        }
    }
}

/// One rotated copy of `model` per protocol basis.
pub fn protocol_povms(protocol: &MeasurementProtocol, model: &Povm) -> Result<Vec<BasisPovm>> {
    protocol
        .bases()
        .iter()
        .map(|b| BasisPovm::new(b.clone(), model))
        .collect()
}

/// Readout model shared by every qubit: truncated count distributions and
/// the threshold used for binary discrimination.
#[derive(Debug, Clone)]
pub struct ReadoutModel {
    physics: ReadoutPhysics,
    bright: CountDistribution,
    dark: CountDistribution,
    k0: usize,
    eps10: f64,
    eps01: f64,
}

impl ReadoutModel {
    /// `k0 = None` picks the threshold minimizing total misclassification.
    pub fn new(physics: ReadoutPhysics, tail_tol: f64, k0: Option<usize>) -> Result<Self> {
        let (bright, dark) = physics.count_distributions(tail_tol)?;
        let k0 = match k0 {
            Some(0) => return Err(Error::Config("threshold k0 must be at least 1".into())),
            Some(k) if k > bright.n_ph() => {
                return Err(Error::Config(format!(
                    "threshold k0 = {k} exceeds the truncation bound n_ph = {}",
                    bright.n_ph()
                )))
            }
            Some(k) => k,
            None => optimal_threshold_for(&bright, &dark),
        };
        let (eps10, eps01) = threshold_errors(&bright, &dark, k0);
        Ok(Self {
            physics,
            bright,
            dark,
            k0,
            eps10,
            eps01,
        })
    }

    pub fn physics(&self) -> &ReadoutPhysics {
        &self.physics
    }
    pub fn bright(&self) -> &CountDistribution {
        &self.bright
    }
    pub fn dark(&self) -> &CountDistribution {
        &self.dark
    }
    pub fn k0(&self) -> usize {
        self.k0
    }
    pub fn n_ph(&self) -> usize {
        self.bright.n_ph()
    }
    pub fn eps10(&self) -> f64 {
        self.eps10
    }
    pub fn eps01(&self) -> f64 {
        self.eps01
    }

    pub fn qubit_povm(&self, kind: ModelKind) -> Povm {
        match kind {
            ModelKind::PhotonCount => photon_count_povm(&self.bright, &self.dark),
            ModelKind::Threshold => Povm::unchecked(
                threshold_povm(self.eps10, self.eps01)
                    .expect("error rates from normalized pmfs")
                    .effects,
                2,
                ModelKind::Threshold,
            ),
            ModelKind::IdealProjector => ideal_povm(),
        }
    }

    /// Identical independent readout on each of `qubits` qubits.
    pub fn register_povm(&self, kind: ModelKind, qubits: usize) -> Result<Povm> {
        let single = self.qubit_povm(kind);
        tensor_povm(&vec![single; qubits])
    }

    pub fn protocol_povms(&self, kind: ModelKind, protocol: &MeasurementProtocol) -> Result<Vec<BasisPovm>> {
        let model = self.register_povm(kind, protocol.qubits())?;
        protocol_povms(protocol, &model)
    }
}
