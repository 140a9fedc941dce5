use iontomo::infotheory::{char_function, mean_loss, state_spectrum};
use iontomo::photon_stats::DEFAULT_TAIL_TOL;
use iontomo::povm::threshold_povm;
use iontomo::quantum::{fidelity, haar_random_pure, max_abs_diff, min_eigenvalue, pauli_bases, CMatrix};
use iontomo::rng::rng_from_seed;
use iontomo::{DensityMatrix, ModelKind, ReadoutModel, ReadoutPhysics};
use proptest::prelude::*;

fn physics() -> impl Strategy<Value = ReadoutPhysics> {
    (0.3f64..4.0, 0.0f64..1.5, 2.0f64..8.0, 0.0f64..0.3)
        .prop_map(|(t, l, lb, ld)| ReadoutPhysics::new(t, l, lb, ld).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn count_distributions_are_normalized(phys in physics()) {
        let (bright, dark) = phys.count_distributions(DEFAULT_TAIL_TOL).unwrap();
        for d in [&bright, &dark] {
            prop_assert!(d.pmf().iter().all(|&p| p >= 0.0));
            prop_assert!((d.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(d.tail_mass() < DEFAULT_TAIL_TOL);
        }
        let mut last = (0.0, 1.0);
        for k0 in 1..=bright.n_ph() {
            let (e10, e01) = phys.readout_errors(k0).unwrap();
            prop_assert!(e10 >= last.0 - 1e-15 && e01 <= last.1 + 1e-15);
            last = (e10, e01);
        }
    }

    #[test]
    fn photon_count_povm_is_complete_and_coarse_grains(phys in physics()) {
        let readout = ReadoutModel::new(phys, DEFAULT_TAIL_TOL, None).unwrap();
        let qubit = readout.qubit_povm(ModelKind::PhotonCount);
        prop_assert!(qubit.completeness_defect() < 1e-10);
        prop_assert!(qubit.min_effect_eigenvalue() >= -1e-12);
        let mut bright_sum = CMatrix::zeros(2, 2);
        for e in &qubit.effects()[readout.k0()..] {
            bright_sum += &e.matrix;
        }
        let th = threshold_povm(readout.eps10(), readout.eps01()).unwrap();
        prop_assert!(max_abs_diff(&bright_sum, &th.effects()[0].matrix) < 1e-12);
        let register = readout.register_povm(ModelKind::PhotonCount, 2).unwrap();
        prop_assert_eq!(register.len(), (readout.n_ph() + 1).pow(2));
        prop_assert!(register.completeness_defect() < 1e-10);
    }

    #[test]
    fn photon_counting_dominates_threshold(phys in physics(), seed in 0u64..1000) {
        let readout = ReadoutModel::new(phys, DEFAULT_TAIL_TOL, None).unwrap();
        prop_assume!(readout.eps10() + readout.eps01() < 0.9);
        let protocol = pauli_bases(2).unwrap();
        let psi = haar_random_pure(4, &mut rng_from_seed(seed));
        let pc = readout.protocol_povms(ModelKind::PhotonCount, &protocol).unwrap();
        let th = readout.protocol_povms(ModelKind::Threshold, &protocol).unwrap();
        let spec_pc = state_spectrum(&psi, &pc, protocol.fractions(), 1e6).unwrap();
        let spec_th = state_spectrum(&psi, &th, protocol.fractions(), 1e6).unwrap();
        prop_assert_eq!(spec_pc.nu(), 6);
        prop_assert!(spec_pc.d().iter().all(|&d| d > 0.0));
        prop_assert!(mean_loss(&spec_pc) <= mean_loss(&spec_th) * (1.0 + 1e-9));
        prop_assert!(mean_loss(&spec_pc) >= 3.0 - 1e-6);
        for w in [1e3, 1e5, 1e7] {
            prop_assert!(char_function(&spec_pc, w).norm() <= 1.0);
        }
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(seed in 0u64..10_000, mix in 0.0f64..1.0) {
        let mut rng = rng_from_seed(seed);
        let a = haar_random_pure(4, &mut rng);
        let b = haar_random_pure(4, &mut rng);
        let rho = DensityMatrix::project(
            &(a.to_density().matrix().scale(mix) + b.to_density().matrix().scale(1.0 - mix)),
        ).unwrap();
        let sigma = DensityMatrix::maximally_mixed(4);
        let f1 = fidelity(&rho, &sigma).unwrap();
        let f2 = fidelity(&sigma, &rho).unwrap();
        prop_assert!((f1 - f2).abs() < 1e-10);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f1));
        prop_assert!(min_eigenvalue(rho.matrix()) >= -1e-10);
        let fp = fidelity(&a, &b).unwrap();
        prop_assert!((fp - fidelity(&b, &a).unwrap()).abs() < 1e-14);
    }
}
