//! Configuration-driven experiment runners behind the `iontomo` CLI.
//!
//! Every runner is deterministic in `(config, seed)`: ensemble members run
//! in parallel but are collected by index before anything is written.

mod config;
mod output;

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::infotheory::{mean_loss, mixture_profile, state_spectrum, GridSpec, LossSpectrum};
use crate::mle::{reconstruct, ReconstructOptions};
use crate::photon_stats::{threshold_errors, CountDistribution, ReadoutPhysics};
use crate::povm::{ModelKind, ReadoutModel};
use crate::quantum::{haar_random_pure, MeasurementProtocol, PureState};
use crate::rng::{derive_seed, domain, rng_from_seed};
use crate::simulator::Simulator;
use crate::stats::{ks_pvalue, ks_statistic_sorted, mean, standard_error};

pub use config::{
    CheckConfig, ExperimentConfig, ModelConfig, PhysicsConfig, ProtocolConfig, RunConfig, StateSource, SweepAxis,
    SweepConfig, ThresholdPolicy, ValidateConfig,
};
pub use output::OutputDir;
use output::num;

/// Largest tolerated fraction of failed ensemble members.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

/// Haar state `index` of the ensemble drawn under `seed`.
pub fn ensemble_state(seed: u64, dim: usize, index: u64) -> PureState {
    haar_random_pure(dim, &mut rng_from_seed(derive_seed(seed, domain::STATE, index)))
}

fn readout_facts(readout: &ReadoutModel) -> Vec<(&'static str, String)> {
    vec![
        ("k0", readout.k0().to_string()),
        ("n_ph", readout.n_ph().to_string()),
        ("eps10", num(readout.eps10())),
        ("eps01", num(readout.eps01())),
        ("lambda", num(readout.physics().lambda())),
    ]
}

// ---------------------------------------------------------------- dist

/// Writes the bright, dark and decay count distributions and the threshold
/// error scan.
pub fn cmd_dist(config: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let physics = config.physics.resolve()?;
    let readout = config.readout()?;
    let mut dir = OutputDir::create(out, "dist", config, &readout_facts(&readout))?;
    let decay = CountDistribution::truncate(|k| physics.decay_pmf(k), config.model.tail_tol)?;
    dir.write("bright.csv", &readout.bright().to_csv())?;
    dir.write("dark.csv", &readout.dark().to_csv())?;
    dir.write("decay.csv", &decay.to_csv())?;
    dir.write("errors_vs_threshold.csv", &threshold_scan(readout.bright(), readout.dark()))?;
    dir.finish()
}

pub fn threshold_scan(bright: &CountDistribution, dark: &CountDistribution) -> String {
    let mut body = String::from("k0,eps10,eps01,total\n");
    for k0 in 1..=bright.n_ph().max(dark.n_ph()) {
        let (e10, e01) = threshold_errors(bright, dark, k0);
        body.push_str(&format!("{k0},{},{},{}\n", num(e10), num(e01), num(e10 + e01)));
    }
    body
}

// ---------------------------------------------------------------- ensemble

/// Per-state result of an ensemble run.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRow {
    pub state_id: usize,
    pub sum_d: f64,
    pub loss: f64,
    /// `1 - F` of a simulated reconstruction, when requested.
    pub infidelity: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

impl StateRow {
    fn failed(state_id: usize, err: &Error) -> Self {
        Self {
            state_id,
            sum_d: f64::NAN,
            loss: f64::NAN,
            infidelity: None,
            iterations: None,
            error: Some(err.to_string()),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub model: ModelKind,
    pub shots: u64,
    pub rows: Vec<StateRow>,
    pub mean_loss: f64,
    pub stderr_loss: f64,
    pub mean_infidelity: Option<f64>,
    pub stderr_infidelity: Option<f64>,
    pub failures: usize,
}

impl EnsembleSummary {
    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.ok()).map(|r| r.loss).collect()
    }

    pub fn rows_csv(&self) -> String {
        let mut body = String::from("state_id,sum_d,L,one_minus_F,iterations,status\n");
        for r in &self.rows {
            let opt = |v: Option<String>| v.unwrap_or_default();
            let status = r.error.as_deref().map(|e| e.replace([',', '\n'], ";")).unwrap_or_else(|| "ok".into());
            body.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.state_id,
                num(r.sum_d),
                num(r.loss),
                opt(r.infidelity.map(num)),
                opt(r.iterations.map(|i| i.to_string())),
                status
            ));
        }
        body
    }

    pub fn summary_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        format!(
            "model,shots,states,failures,mean_L,stderr_L,mean_one_minus_F,stderr_one_minus_F\n{},{},{},{},{},{},{},{}\n",
            self.model,
            self.shots,
            self.rows.len(),
            self.failures,
            num(self.mean_loss),
            num(self.stderr_loss),
            opt(self.mean_infidelity),
            opt(self.stderr_infidelity)
        )
    }
}

/// Loss spectra (and optionally simulated reconstructions) over `states`.
///
/// `simulate = Some((seed, rank))` draws a dataset per state from the
/// `DATA` stream of `seed` and reconstructs it with the model's operators.
pub fn run_ensemble(
    readout: &ReadoutModel,
    protocol: &MeasurementProtocol,
    kind: ModelKind,
    shots: u64,
    states: &[PureState],
    simulate: Option<(u64, usize)>,
) -> Result<EnsembleSummary> {
    let povms = readout.protocol_povms(kind, protocol)?;
    let sim = match simulate {
        Some(_) => Some(Simulator::new(protocol.clone(), readout.clone())?),
        None => None,
    };
    let n = shots as f64;
    let rows: Vec<StateRow> = states
        .par_iter()
        .enumerate()
        .map(|(i, psi)| {
            let attempt = || -> Result<StateRow> {
                let spec = state_spectrum(psi, &povms, protocol.fractions(), n)?;
                let mut row = StateRow {
                    state_id: i,
                    sum_d: spec.mean_infidelity(),
                    loss: mean_loss(&spec),
                    infidelity: None,
                    iterations: None,
                    error: None,
                };
                if let (Some(sim), Some((seed, rank))) = (&sim, simulate) {
                    let data = sim.run(psi, shots, kind, derive_seed(seed, domain::DATA, i as u64))?;
                    let rec = reconstruct(&data, &povms, rank, &ReconstructOptions::default())?.with_truth(psi)?;
                    row.infidelity = rec.infidelity();
                    row.iterations = Some(rec.iterations);
                }
                Ok(row)
            };
            attempt().unwrap_or_else(|e| StateRow::failed(i, &e))
        })
        .collect();
    summarize(kind, shots, rows)
}

fn summarize(model: ModelKind, shots: u64, rows: Vec<StateRow>) -> Result<EnsembleSummary> {
    let failures = rows.iter().filter(|r| !r.ok()).count();
    if failures as f64 > MAX_FAILURE_FRACTION * rows.len() as f64 {
        let first = rows.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::Domain(format!(
            "{failures} of {} ensemble states failed (first: {first})",
            rows.len()
        )));
    }
    let losses: Vec<f64> = rows.iter().filter(|r| r.ok()).map(|r| r.loss).collect();
    let infid: Vec<f64> = rows.iter().filter_map(|r| r.infidelity).collect();
    let spread = |xs: &[f64]| if xs.len() > 1 { standard_error(xs) } else { f64::NAN };
    Ok(EnsembleSummary {
        model,
        shots,
        mean_loss: mean(&losses),
        stderr_loss: spread(&losses),
        mean_infidelity: (!infid.is_empty()).then(|| mean(&infid)),
        stderr_infidelity: (!infid.is_empty()).then(|| spread(&infid)),
        rows,
        failures,
    })
}

pub fn cmd_ensemble(config: &ExperimentConfig, out: &Path, check: bool) -> Result<EnsembleSummary> {
    let readout = config.readout()?;
    let protocol = config.protocol.resolve()?;
    let states: Vec<PureState> = (0..config.run.ensemble as u64)
        .map(|i| ensemble_state(config.seed, protocol.dim(), i))
        .collect();
    let simulate = config.run.simulate.then_some((config.seed, config.model.rank));
    let summary = run_ensemble(&readout, &protocol, config.model.kind, config.run.shots, &states, simulate)?;
    let mut dir = OutputDir::create(out, "ensemble", config, &readout_facts(&readout))?;
    dir.write("ensemble.csv", &summary.rows_csv())?;
    dir.write("summary.csv", &summary.summary_csv())?;
    dir.finish()?;
    if check {
        if let Some(c) = config.check_for(config.model.kind) {
            c.verify(&format!("mean L ({})", config.model.kind), summary.mean_loss)?;
        }
    }
    Ok(summary)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub k0: usize,
    pub n_ph: usize,
    pub photon_count: (f64, f64),
    pub threshold: (f64, f64),
}

impl SweepPoint {
    pub fn ratio(&self) -> f64 {
        self.threshold.0 / self.photon_count.0
    }

    pub fn loss(&self, kind: ModelKind) -> f64 {
        match kind {
            ModelKind::Threshold => self.threshold.0,
            _ => self.photon_count.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Grid point with the smallest mean loss for `kind`.
    pub fn minimum(&self, kind: ModelKind) -> &SweepPoint {
        self.points
            .iter()
            .min_by(|a, b| a.loss(kind).total_cmp(&b.loss(kind)))
            .expect("nonempty sweep")
    }

    pub fn to_csv(&self) -> String {
        let mut body = format!(
            "{},k0,n_ph,L_photon_count,stderr_photon_count,L_threshold,stderr_threshold,ratio\n",
            self.axis.name()
        );
        for p in &self.points {
            body.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                num(p.value),
                p.k0,
                p.n_ph,
                num(p.photon_count.0),
                num(p.photon_count.1),
                num(p.threshold.0),
                num(p.threshold.1),
                num(p.ratio())
            ));
        }
        body
    }

    pub fn minimum_csv(&self) -> String {
        let mut body = format!("model,{},mean_L\n", self.axis.name());
        for kind in [ModelKind::PhotonCount, ModelKind::Threshold] {
            let p = self.minimum(kind);
            body.push_str(&format!("{kind},{},{}\n", num(p.value), num(p.loss(kind))));
        }
        body
    }
}

/// Physics at one sweep coordinate: the exposure time or `T1` changes, all
/// rates not on the axis stay at their configured values.
pub fn sweep_physics(base: &ReadoutPhysics, axis: SweepAxis, value: f64) -> Result<ReadoutPhysics> {
    match axis {
        SweepAxis::Time => base.with_time(value),
        SweepAxis::T1 => ReadoutPhysics::with_t1(base.t(), value, base.lambda_b(), base.lambda_d()),
    }
}

/// Both models at every grid point over one shared Haar ensemble.
pub fn run_sweep(config: &ExperimentConfig, sweep: &SweepConfig) -> Result<SweepReport> {
    let base = config.physics.resolve()?;
    let protocol = config.protocol.resolve()?;
    let states: Vec<PureState> = (0..config.run.ensemble as u64)
        .map(|i| ensemble_state(config.seed, protocol.dim(), i))
        .collect();
    let mut points = Vec::with_capacity(sweep.grid.len());
    for &value in &sweep.grid {
        let readout = config.readout_for(sweep_physics(&base, sweep.axis, value)?)?;
        let pc = run_ensemble(&readout, &protocol, ModelKind::PhotonCount, config.run.shots, &states, None)?;
        let th = run_ensemble(&readout, &protocol, ModelKind::Threshold, config.run.shots, &states, None)?;
        points.push(SweepPoint {
            value,
            k0: readout.k0(),
            n_ph: readout.n_ph(),
            photon_count: (pc.mean_loss, pc.stderr_loss),
            threshold: (th.mean_loss, th.stderr_loss),
        });
    }
    Ok(SweepReport { axis: sweep.axis, points })
}

pub fn cmd_sweep(config: &ExperimentConfig, out: &Path, check: bool) -> Result<SweepReport> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
    let report = run_sweep(config, sweep)?;
    let reading = match sweep.axis {
        SweepAxis::Time => "rates lambda, lambda_b, lambda_d fixed; exposure time t varies; k0 re-resolved per point",
        SweepAxis::T1 => "t, lambda_b, lambda_d fixed; lambda = 1/T1 varies; k0 re-resolved per point",
    };
    let mut dir = OutputDir::create(out, "sweep", config, &[("axis_reading", reading.to_string())])?;
    dir.write("sweep.csv", &report.to_csv())?;
    dir.write("minimum.csv", &report.minimum_csv())?;
    dir.finish()?;
    if check {
        for kind in [ModelKind::PhotonCount, ModelKind::Threshold] {
            if let Some(c) = config.check_for(kind) {
                c.verify(&format!("minimum mean L ({kind})"), report.minimum(kind).loss(kind))?;
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub model: ModelKind,
    /// Simulated `1 - F`, in reconstruction order.
    pub samples: Vec<f64>,
    pub theory_mean: f64,
    pub ks_statistic: f64,
    pub p_value: f64,
    /// `(lower edge, upper edge, count, theory probability of the bin)`.
    pub histogram: Vec<(f64, f64, usize, f64)>,
    pub curve: Vec<(f64, f64)>,
}

impl ValidationReport {
    pub fn empirical_mean(&self) -> f64 {
        mean(&self.samples)
    }

    pub fn empirical_stderr(&self) -> f64 {
        standard_error(&self.samples)
    }

    pub fn histogram_csv(&self) -> String {
        let total = self.samples.len() as f64;
        let mut body = String::from("bin_lo,bin_hi,count,empirical_density,theory_density\n");
        for &(lo, hi, count, prob) in &self.histogram {
            let width = hi - lo;
            body.push_str(&format!(
                "{},{},{count},{},{}\n",
                num(lo),
                num(hi),
                num(count as f64 / (total * width)),
                num(prob / width)
            ));
        }
        body
    }

    pub fn curve_csv(&self) -> String {
        let mut body = String::from("one_minus_F,density\n");
        for &(x, p) in &self.curve {
            body.push_str(&format!("{},{}\n", num(x), num(p)));
        }
        body
    }

    pub fn samples_csv(&self) -> String {
        let mut body = String::from("reconstruction,one_minus_F\n");
        for (i, x) in self.samples.iter().enumerate() {
            body.push_str(&format!("{i},{}\n", num(*x)));
        }
        body
    }

    pub fn ks_csv(&self) -> String {
        format!(
            "model,reconstructions,mean_one_minus_F,stderr_one_minus_F,theory_mean,ks_statistic,p_value\n{},{},{},{},{},{},{}\n",
            self.model,
            self.samples.len(),
            num(self.empirical_mean()),
            num(self.empirical_stderr()),
            num(self.theory_mean),
            num(self.ks_statistic),
            num(self.p_value)
        )
    }
}

/// Simulated reconstructions compared with the asymptotic loss distribution.
pub fn run_validation(config: &ExperimentConfig, validate: &ValidateConfig) -> Result<ValidationReport> {
    let kind = config.model.kind;
    let readout = config.readout()?;
    let theory_readout = match &validate.theory_physics {
        Some(p) => config.readout_for(p.resolve()?)?,
        None => readout.clone(),
    };
    let protocol = config.protocol.resolve()?;
    let povms = readout.protocol_povms(kind, &protocol)?;
    let theory_povms = theory_readout.protocol_povms(kind, &protocol)?;
    let sim = Simulator::new(protocol.clone(), readout.clone())?;
    let shots = config.run.shots;
    let state_of = |j: u64| match validate.source {
        StateSource::Ensemble => ensemble_state(config.seed, protocol.dim(), j),
        StateSource::Fixed => ensemble_state(config.seed, protocol.dim(), validate.state_index),
    };
    let outcomes: Vec<Result<f64>> = (0..validate.reconstructions as u64)
        .into_par_iter()
        .map(|j| {
            let psi = state_of(j);
            let data = sim.run(&psi, shots, kind, derive_seed(config.seed, domain::DATA, j))?;
            let rec = reconstruct(&data, &povms, config.model.rank, &ReconstructOptions::default())?.with_truth(&psi)?;
            Ok(rec.infidelity().expect("truth supplied"))
        })
        .collect();
    let failures = outcomes.iter().filter(|r| r.is_err()).count();
    if failures as f64 > MAX_FAILURE_FRACTION * outcomes.len() as f64 {
        let first = outcomes.into_iter().find_map(|r| r.err()).expect("at least one failure");
        return Err(Error::Domain(format!("{failures} reconstructions failed (first: {first})")));
    }
    let samples: Vec<f64> = outcomes.into_iter().filter_map(|r| r.ok()).collect();

    let n = shots as f64;
    let spectra: Vec<LossSpectrum> = match validate.source {
        StateSource::Ensemble => (0..validate.reconstructions as u64)
            .into_par_iter()
            .map(|j| state_spectrum(&state_of(j), &theory_povms, protocol.fractions(), n))
            .collect::<Result<_>>()?,
        StateSource::Fixed => vec![state_spectrum(&state_of(0), &theory_povms, protocol.fractions(), n)?],
    };
    let theory_mean = mean(&spectra.iter().map(|s| s.mean_infidelity()).collect::<Vec<_>>());
    let top = samples.iter().cloned().fold(4.0 * theory_mean, f64::max);
    let width = top / validate.bins as f64;
    let edges: Vec<f64> = (0..=validate.bins).map(|i| i as f64 * width).collect();
    let curve_x: Vec<f64> = (0..=400).map(|i| i as f64 * top / 400.0).collect();
    let mut cdf_points = samples.clone();
    cdf_points.extend_from_slice(&edges);
    let grid = GridSpec::default();
    let profile = mixture_profile(&spectra, &cdf_points, &curve_x, &grid)?;
    let (at_samples, at_edges) = profile.cdf.split_at(samples.len());

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
    let sorted_cdf: Vec<f64> = order.iter().map(|&i| at_samples[i]).collect();
    let d = ks_statistic_sorted(&sorted_cdf);

    let mut counts = vec![0usize; validate.bins];
    for &x in &samples {
        counts[((x / width) as usize).min(validate.bins - 1)] += 1;
    }
    let histogram = (0..validate.bins)
        .map(|b| (edges[b], edges[b + 1], counts[b], at_edges[b + 1] - at_edges[b]))
        .collect();
    Ok(ValidationReport {
        model: kind,
        p_value: ks_pvalue(d, samples.len()),
        ks_statistic: d,
        theory_mean,
        histogram,
        curve: curve_x.into_iter().zip(profile.density).collect(),
        samples,
    })
}

pub fn cmd_validate(config: &ExperimentConfig, out: &Path, check: bool) -> Result<ValidationReport> {
    let validate = config
        .validate
        .as_ref()
        .ok_or_else(|| Error::Config("validate needs a [validate] section".into()))?;
    let report = run_validation(config, validate)?;
    let readout = config.readout()?;
    let mut dir = OutputDir::create(out, "validate", config, &readout_facts(&readout))?;
    dir.write("samples.csv", &report.samples_csv())?;
    dir.write("histogram.csv", &report.histogram_csv())?;
    dir.write("theory.csv", &report.curve_csv())?;
    dir.write("ks.csv", &report.ks_csv())?;
    dir.finish()?;
    if check {
        if let Some(c) = config.check_for(config.model.kind) {
            c.verify(&format!("mean 1-F ({})", config.model.kind), report.empirical_mean())?;
            if let Some(p) = c.min_p_value {
                if !(report.p_value > p) {
                    return Err(Error::CheckViolation(format!("KS p-value {:.4} not above {p}", report.p_value)));
                }
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------- povm-dump

/// Writes the single-qubit and register POVMs of the configured model in the
/// computational basis, plus their operator counts.
pub fn cmd_povm_dump(config: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let readout = config.readout()?;
    let protocol = config.protocol.resolve()?;
    let kind = config.model.kind;
    let qubit = readout.qubit_povm(kind);
    let register = readout.register_povm(kind, protocol.qubits())?;
    let mut dir = OutputDir::create(out, "povm-dump", config, &readout_facts(&readout))?;
    dir.write("qubit_povm.csv", &qubit.to_csv())?;
    dir.write("register_povm.csv", &register.to_csv())?;
    dir.write(
        "operator_counts.csv",
        &format!(
            "model,qubits,bases,outcomes_per_basis,total_operators,completeness_defect\n{kind},{},{},{},{},{}\n",
            protocol.qubits(),
            protocol.len(),
            register.len(),
            register.len() * protocol.len(),
            num(register.completeness_defect())
        ),
    )?;
    dir.finish()
}
