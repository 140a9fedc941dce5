//! Dense complex linear algebra for small qubit registers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0[0]
}

/// Square root of a positive semidefinite Hermitian matrix; negative
/// eigenvalues from rounding are clipped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| c64(v.max(0.0).sqrt(), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Normalized state vector of a register.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    /// Accepts an already normalized vector.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[index] = c64(1.0, 0.0);
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    pub fn apply(&self, u: &CMatrix) -> Result<Self> {
        if u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.ncols(),
            });
        }
        Self::normalized(u * &self.amplitudes)
    }

    /// Real parameter vector `(Re ψ, Im ψ)`.
    pub fn real_params(&self) -> DVector<f64> {
        let s = self.dim();
        DVector::from_fn(2 * s, |i, _| {
            if i < s {
                self.amplitudes[i].re
            } else {
                self.amplitudes[i - s].im
            }
        })
    }
}

/// Unit-trace positive semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidState("density matrix must be square".into()));
        }
        let herm = hermitian_defect(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = min_eigenvalue(&matrix);
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:e} is negative")));
        }
        Ok(Self { matrix })
    }

    /// Hermitize, clip negative eigenvalues and renormalize the trace.
    pub fn project(matrix: &CMatrix) -> Result<Self> {
        let (vals, vecs) = hermitian_eigen(matrix);
        let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidState("matrix has no positive spectrum".into()));
        }
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            clipped.len(),
            clipped.iter().map(|v| c64(v / total, 0.0)),
        ));
        let m = &vecs * d * vecs.adjoint();
        let m = (&m + m.adjoint()).scale(0.5);
        Ok(Self { matrix: m })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }
}

/// Either representation accepted by [`fidelity`].
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a PureState),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a PureState> for StateRef<'a> {
    fn from(s: &'a PureState) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(s: &'a DensityMatrix) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    fn dim(&self) -> usize {
        match self {
            StateRef::Pure(p) => p.dim(),
            StateRef::Mixed(m) => m.dim(),
        }
    }
}

/// Fidelity between two states, `(tr √(√ρ σ √ρ))²` in general.
pub fn fidelity<'a, 'b>(a: impl Into<StateRef<'a>>, b: impl Into<StateRef<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let f = match (a, b) {
        (StateRef::Pure(x), StateRef::Pure(y)) => x.amplitudes().dotc(y.amplitudes()).norm_sqr(),
        (StateRef::Pure(x), StateRef::Mixed(r)) | (StateRef::Mixed(r), StateRef::Pure(x)) => {
            let v = x.amplitudes();
            (v.adjoint() * r.matrix() * v)[(0, 0)].re
        }
        (StateRef::Mixed(x), StateRef::Mixed(y)) => {
            // trace norm of √ρ √σ; singular values stay accurate for rank-deficient inputs
            let prod = psd_sqrt(x.matrix()) * psd_sqrt(y.matrix());
            let tr: f64 = prod.singular_values().iter().sum();
            tr * tr
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

/// Haar-random pure state: a normalized vector of i.i.d. standard complex Gaussians.
pub fn haar_random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    assert!(dim >= 2, "Haar sampling needs dimension >= 2");
    let v = CVector::from_fn(dim, |_, _| {
        c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    PureState::normalized(v).expect("Gaussian vector is nonzero with probability 1")
}

/// Basis-change unitary applied before computational-basis readout.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisUnitary {
    matrix: CMatrix,
    label: String,
}

impl BasisUnitary {
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidState("basis unitary must be square".into()));
        }
        let n = matrix.nrows();
        let defect = max_abs_diff(&(matrix.adjoint() * &matrix), &CMatrix::identity(n, n));
        if defect > 1e-12 {
            return Err(Error::InvalidState(format!("matrix is not unitary (defect {defect:e})")));
        }
        Ok(Self {
            matrix,
            label: label.into(),
        })
    }

    pub fn identity(dim: usize, label: impl Into<String>) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
            label: label.into(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Single-qubit unitary taking the eigenbasis of a Pauli operator onto
    /// `|0⟩, |1⟩` (`+1` eigenvector onto `|0⟩`).
    pub fn pauli(letter: char) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = match letter {
            'X' => CMatrix::from_row_slice(2, 2, &[c64(h, 0.0), c64(h, 0.0), c64(h, 0.0), c64(-h, 0.0)]),
            // H · S†
            'Y' => CMatrix::from_row_slice(2, 2, &[c64(h, 0.0), c64(0.0, -h), c64(h, 0.0), c64(0.0, h)]),
            'Z' => CMatrix::identity(2, 2),
            other => return Err(Error::Config(format!("unknown Pauli basis letter '{other}'"))),
        };
        Ok(Self {
            matrix: m,
            label: letter.to_string(),
        })
    }

    /// Tensor product; the first factor acts on the leading qubit.
    pub fn tensor(&self, other: &BasisUnitary) -> Self {
        Self {
            matrix: kron(&self.matrix, &other.matrix),
            label: format!("{}{}", self.label, other.label),
        }
    }
}

/// Ordered measurement bases together with the fraction of shots each receives.
#[derive(Debug, Clone)]
pub struct MeasurementProtocol {
    qubits: usize,
    bases: Vec<BasisUnitary>,
    fractions: Vec<f64>,
}

impl MeasurementProtocol {
    pub fn new(qubits: usize, bases: Vec<BasisUnitary>, fractions: Vec<f64>) -> Result<Self> {
        if bases.is_empty() || bases.len() != fractions.len() {
            return Err(Error::Config("protocol needs one shot fraction per basis".into()));
        }
        let dim = 1usize << qubits;
        if let Some(b) = bases.iter().find(|b| b.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: b.dim(),
            });
        }
        let total: f64 = fractions.iter().sum();
        if (total - 1.0).abs() > 1e-12 || fractions.iter().any(|&f| f < 0.0) {
            return Err(Error::Config(format!("shot fractions sum to {total}, expected 1")));
        }
        Ok(Self {
            qubits,
            bases,
            fractions,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn bases(&self) -> &[BasisUnitary] {
        &self.bases
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    /// Integer shots per basis for `n` total: `floor(n / m)` each, remainder
    /// handed out one per basis in order. Only valid for uniform fractions.
    pub fn allocate(&self, n: u64) -> Vec<u64> {
        let m = self.bases.len() as u64;
        let base = n / m;
        let rem = n % m;
        (0..m).map(|i| base + u64::from(i < rem)).collect()
    }
}

/// All `3^n_q` tensor products of X/Y/Z basis changes with equal shot fractions.
pub fn pauli_bases(qubits: usize) -> Result<MeasurementProtocol> {
    if qubits == 0 {
        return Err(Error::Config("protocol needs at least one qubit".into()));
    }
    let singles: Vec<BasisUnitary> = ['X', 'Y', 'Z']
        .iter()
        .map(|&c| BasisUnitary::pauli(c))
        .collect::<Result<_>>()?;
    let mut bases = singles.clone();
    for _ in 1..qubits {
        bases = bases
            .iter()
            .flat_map(|b| singles.iter().map(move |s| b.tensor(s)))
            .collect();
    }
    let m = bases.len();
    MeasurementProtocol::new(qubits, bases, vec![1.0 / m as f64; m])
}
