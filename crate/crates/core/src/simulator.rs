//! Synthetic measurement data for a known state.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp, Poisson};

use crate::error::{Error, Result};
use crate::povm::{BasisPovm, Label, ModelKind, Povm, ReadoutModel};
use crate::quantum::{BasisUnitary, DensityMatrix, MeasurementProtocol, PureState};
use crate::rng::rng_from_seed;

/// Outcome counts recorded in one measurement basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisRecord {
    pub basis: String,
    pub shots: u64,
    /// Nonzero counts only.
    pub counts: BTreeMap<Label, u64>,
}

impl BasisRecord {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Measurement records for all bases of a protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub model: ModelKind,
    pub seed: u64,
    pub records: Vec<BasisRecord>,
}

impl Dataset {
    pub fn total_shots(&self) -> u64 {
        self.records.iter().map(|r| r.shots).sum()
    }

    /// Checks that each record's counts add up to its shot number.
    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            if r.total() != r.shots {
                return Err(Error::DataMismatch(format!(
                    "basis {} records {} outcomes for {} shots",
                    r.basis,
                    r.total(),
                    r.shots
                )));
            }
        }
        Ok(())
    }

    /// Multiply all counts by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        let mut out = self.clone();
        for r in &mut out.records {
            r.shots *= factor;
            for c in r.counts.values_mut() {
                *c *= factor;
            }
        }
        out
    }

    /// CSV body `basis_label,outcome_label,count` after a `#` header block.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&format!("# model = {}\n# seed = {}\n", self.model, self.seed));
        out.push_str("basis_label,outcome_label,count\n");
        for r in &self.records {
            for (label, count) in &r.counts {
                out.push_str(&format!("{},{},{}\n", r.basis, label, count));
            }
        }
        out
    }
}

/// Born probabilities of every effect of `povm` for state `rho`.
pub fn outcome_probabilities(rho: &DensityMatrix, povm: &Povm) -> Result<Vec<f64>> {
    povm.probabilities(rho)
}

/// Multinomial draw by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining_shots = shots;
    let mut remaining_mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        let p = p.max(0.0);
        if i + 1 == probs.len() {
            counts[i] = remaining_shots;
            break;
        }
        let q = if remaining_mass > 0.0 { (p / remaining_mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = if q >= 1.0 {
            remaining_shots
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining_shots, q).expect("q in (0,1)").sample(rng)
        };
        counts[i] = k;
        remaining_shots -= k;
        remaining_mass -= p;
    }
    counts
}

/// One photon count from a bright ion, clamped into the folded top bin.
pub fn sample_bright_count<R: Rng + ?Sized>(model: &ReadoutModel, rng: &mut R) -> u32 {
    let p = model.physics();
    poisson_draw(p.lambda_b() * p.t(), rng).min(model.n_ph() as u64) as u32
}

/// One photon count from a dark ion: background counts plus fluorescence
/// after a random decay into the bright manifold.
pub fn sample_dark_count<R: Rng + ?Sized>(model: &ReadoutModel, rng: &mut R) -> u32 {
    let p = model.physics();
    let background = poisson_draw(p.lambda_d() * p.t(), rng);
    let decay = sample_decay_count(p.lambda(), p.lambda_b(), p.t(), rng);
    (background + decay).min(model.n_ph() as u64) as u32
}

/// Counts from the decay channel alone (unclamped).
pub fn sample_decay_count<R: Rng + ?Sized>(lambda: f64, lambda_b: f64, t: f64, rng: &mut R) -> u64 {
    if lambda == 0.0 {
        return 0;
    }
    let u: f64 = Exp::new(lambda).expect("positive rate").sample(rng);
    if u >= t {
        0
    } else {
        poisson_draw(lambda_b * (t - u), rng)
    }
}

pub(crate) fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("positive mean").sample(rng) as u64
    }
}

/// Shot-by-shot physical sampling: a register outcome from the rotated
/// state, then one photon count per qubit from the bright or dark law.
pub fn simulate_physical<R: Rng + ?Sized>(
    state: &PureState,
    basis: &BasisUnitary,
    model: &ReadoutModel,
    shots: u64,
    rng: &mut R,
) -> Result<BasisRecord> {
    let rotated = state.apply(basis.matrix())?;
    let dim = rotated.dim();
    let qubits = dim.trailing_zeros() as usize;
    let pops: Vec<f64> = rotated.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut outcome = dim - 1;
        for (i, p) in pops.iter().enumerate() {
            acc += p;
            if r < acc {
                outcome = i;
                break;
            }
        }
        let label: Vec<u32> = (0..qubits)
            .map(|q| {
                let bit = (outcome >> (qubits - 1 - q)) & 1;
                if bit == 0 {
                    sample_bright_count(model, rng)
                } else {
                    sample_dark_count(model, rng)
                }
            })
            .collect();
        *counts.entry(Label(label)).or_insert(0) += 1;
    }
    Ok(BasisRecord {
        basis: basis.label().to_string(),
        shots,
        counts,
    })
}

/// Collapse photon-count tuples to binary outcomes: `count >= k0` is 0 (bright).
pub fn reduce_to_threshold(dataset: &Dataset, k0: usize) -> Result<Dataset> {
    if dataset.model != ModelKind::PhotonCount {
        return Err(Error::DataMismatch(format!(
            "threshold reduction needs photon-count data, got {}",
            dataset.model
        )));
    }
    let records = dataset
        .records
        .iter()
        .map(|r| {
            let mut counts = BTreeMap::new();
            for (label, &c) in &r.counts {
                let bin = Label(label.0.iter().map(|&k| u32::from((k as usize) < k0)).collect());
                *counts.entry(bin).or_insert(0) += c;
            }
            BasisRecord {
                basis: r.basis.clone(),
                shots: r.shots,
                counts,
            }
        })
        .collect();
    Ok(Dataset {
        model: ModelKind::Threshold,
        seed: dataset.seed,
        records,
    })
}

/// Precomputed sampling model for one readout physics and protocol.
#[derive(Debug, Clone)]
pub struct Simulator {
    protocol: MeasurementProtocol,
    readout: ReadoutModel,
    photon: Vec<BasisPovm>,
    ideal: Vec<BasisPovm>,
}

impl Simulator {
    pub fn new(protocol: MeasurementProtocol, readout: ReadoutModel) -> Result<Self> {
        let photon = readout.protocol_povms(ModelKind::PhotonCount, &protocol)?;
        let ideal = readout.protocol_povms(ModelKind::IdealProjector, &protocol)?;
        Ok(Self {
            protocol,
            readout,
            photon,
            ideal,
        })
    }

    pub fn protocol(&self) -> &MeasurementProtocol {
        &self.protocol
    }

    pub fn readout(&self) -> &ReadoutModel {
        &self.readout
    }

    /// Sample a dataset of `n` total shots. Threshold data is derived from
    /// the photon-count data drawn with the same seed; ideal data is drawn
    /// from noise-free projectors.
    pub fn run(&self, state: &PureState, n: u64, kind: ModelKind, seed: u64) -> Result<Dataset> {
        let mut rng = rng_from_seed(seed);
        let shots = self.protocol.allocate(n);
        let source = match kind {
            ModelKind::IdealProjector => &self.ideal,
            _ => &self.photon,
        };
        let mut records = Vec::with_capacity(shots.len());
        for (bp, &m) in source.iter().zip(&shots) {
            let probs = bp.probabilities_pure(state)?;
            let draws = sample_multinomial(&probs, m, &mut rng);
            let counts = bp
                .povm
                .effects()
                .iter()
                .zip(draws)
                .filter(|(_, c)| *c > 0)
                .map(|(e, c)| (e.label.clone(), c))
                .collect();
            records.push(BasisRecord {
                basis: bp.basis.label().to_string(),
                shots: m,
                counts,
            });
        }
        let raw = Dataset {
            model: if kind == ModelKind::IdealProjector { kind } else { ModelKind::PhotonCount },
            seed,
            records,
        };
        match kind {
            ModelKind::Threshold => reduce_to_threshold(&raw, self.readout.k0()),
            _ => Ok(raw),
        }
    }
}

/// One-shot convenience wrapper around [`Simulator`].
pub fn run_experiment(
    state: &PureState,
    protocol: &MeasurementProtocol,
    readout: &ReadoutModel,
    n: u64,
    kind: ModelKind,
    seed: u64,
) -> Result<Dataset> {
    Simulator::new(protocol.clone(), readout.clone())?.run(state, n, kind, seed)
}
