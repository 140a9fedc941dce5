use iontomo::photon_stats::DEFAULT_TAIL_TOL;
use iontomo::quantum::{haar_random_pure, pauli_bases};
use iontomo::rng::{derive_seed, domain, rng_from_seed};
use iontomo::simulator::{reduce_to_threshold, sample_multinomial, simulate_physical};
use iontomo::stats::{chi_square_goodness, chi_square_homogeneity};
use iontomo::{Label, ModelKind, ReadoutModel, ReadoutPhysics, Simulator};

fn model(t: f64, lambda: f64, lambda_b: f64, lambda_d: f64) -> ReadoutModel {
    ReadoutModel::new(ReadoutPhysics::new(t, lambda, lambda_b, lambda_d).unwrap(), DEFAULT_TAIL_TOL, None).unwrap()
}

#[test]
fn shot_by_shot_sampling_matches_multinomial_over_photon_count_povm() {
    let readout = model(1.0, 1.0, 6.0, 0.01);
    let protocol = pauli_bases(2).unwrap();
    let povms = readout.protocol_povms(ModelKind::PhotonCount, &protocol).unwrap();
    let psi = haar_random_pure(4, &mut rng_from_seed(derive_seed(5, domain::STATE, 0)));
    let shots = 1_000_000;
    for b in [0usize, 4, 8] {
        let bp = &povms[b];
        let physical = simulate_physical(&psi, &bp.basis, &readout, shots, &mut rng_from_seed(derive_seed(5, domain::ORACLE, b as u64)))
            .unwrap();
        let probs = bp.probabilities_pure(&psi).unwrap();
        let draws = sample_multinomial(&probs, shots, &mut rng_from_seed(derive_seed(5, domain::DATA, b as u64)));
        let a: Vec<u64> = bp
            .povm
            .effects()
            .iter()
            .map(|e| physical.counts.get(&e.label).copied().unwrap_or(0))
            .collect();
        assert_eq!(a.iter().sum::<u64>(), shots);
        let (stat, dof, p) = chi_square_homogeneity(&a, &draws, 10);
        assert!(p > 0.001, "basis {}: chi2 {stat:.1} on {dof} dof, p {p:.2e}", bp.basis.label());
    }
}

#[test]
fn reduced_frequencies_follow_threshold_povm() {
    let readout = model(1.0, 0.05, 3.0, 0.05);
    let protocol = pauli_bases(2).unwrap();
    let sim = Simulator::new(protocol.clone(), readout.clone()).unwrap();
    let psi = haar_random_pure(4, &mut rng_from_seed(9));
    let raw = sim.run(&psi, 1_000_000, ModelKind::PhotonCount, 17).unwrap();
    let reduced = reduce_to_threshold(&raw, readout.k0()).unwrap();
    assert_eq!(reduced, sim.run(&psi, 1_000_000, ModelKind::Threshold, 17).unwrap());
    let povms = readout.protocol_povms(ModelKind::Threshold, &protocol).unwrap();
    for (rec, bp) in reduced.records.iter().zip(&povms) {
        let m = rec.shots as f64;
        for (e, p) in bp.povm.effects().iter().zip(bp.probabilities_pure(&psi).unwrap()) {
            let count = rec.counts.get(&e.label).copied().unwrap_or(0) as f64;
            let sigma = (m * p * (1.0 - p)).sqrt().max(1.0);
            assert!((count - m * p).abs() <= 4.0 * sigma, "{} {}: {count} vs {}", rec.basis, e.label, m * p);
        }
    }
}

#[test]
fn noise_free_physical_sampling() {
    let readout = model(1.0, 0.0, 3.0, 0.0);
    let z = pauli_bases(2).unwrap().bases()[8].clone();
    let mut rng = rng_from_seed(3);
    let dark = simulate_physical(&iontomo::PureState::basis(4, 3), &z, &readout, 1000, &mut rng).unwrap();
    assert_eq!(dark.counts.len(), 1);
    assert_eq!(dark.counts[&Label(vec![0, 0])], 1000);
    // both ions bright: per-qubit counts are independent Poisson(3)
    let bright = simulate_physical(&iontomo::PureState::basis(4, 0), &z, &readout, 200_000, &mut rng).unwrap();
    let mut first = vec![0u64; readout.n_ph() + 1];
    let mut second = vec![0u64; readout.n_ph() + 1];
    for (label, &c) in &bright.counts {
        first[label.0[0] as usize] += c;
        second[label.0[1] as usize] += c;
    }
    for counts in [&first, &second] {
        let (_, _, p) = chi_square_goodness(counts, readout.bright().pmf(), 5.0);
        assert!(p > 0.001);
    }
}
