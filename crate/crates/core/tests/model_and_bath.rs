use approx::assert_relative_eq;
use finitebath::bath::{
    antithetic_phases, realization_from_parts, sample_energies, sample_frequencies, sample_phases, symmetrize_check,
};
use finitebath::model::{total_energy, BathSpec, DensityOfStates, DosFamily, SystemState, TestParticleSpec};
use finitebath::rng::{RngStream, StreamKind};
use finitebath::stats::{ks_one_sample, mean};
use finitebath::{realize_bath, BathRealization};

fn spec(n: usize, family: DosFamily) -> BathSpec {
    BathSpec::new(n, 0.01, 5.0, DensityOfStates::new(family, 0.2, 1.0).unwrap()).unwrap()
}

/// `H` written out with the interaction expanded term by term.
fn expanded_hamiltonian(state: &SystemState, tp: &TestParticleSpec, bath: &BathRealization) -> f64 {
    let (q0, p0) = (state.test_q(), state.test_p());
    let k: f64 = bath.frequencies.iter().map(|w| bath.mass * w * w).sum();
    let mut h = p0 * p0 / (2.0 * tp.mass) + 0.5 * (tp.mass * tp.omega * tp.omega + k) * q0 * q0;
    for (n, w) in bath.frequencies.iter().enumerate() {
        let (q, p) = (state.bath_q(n), state.bath_p(n));
        h += p * p / (2.0 * bath.mass) + 0.5 * bath.mass * w * w * q * q - bath.mass * w * w * q * q0;
    }
    h
}

#[test]
fn total_energy_matches_expanded_form() {
    let mut rng = RngStream::new(11, 0);
    for trial in 0..20 {
        let bath = realize_bath(&spec(5, DosFamily::Uniform), trial);
        let tp = TestParticleSpec::new(1.3, 0.7).unwrap();
        let coords: Vec<f64> = (0..12).map(|_| 4.0 * rng.uniform() - 2.0).collect();
        let state = SystemState::new(0.0, coords);
        let h = total_energy(&state, &tp, &[bath.block(true)]).unwrap();
        assert_relative_eq!(h, expanded_hamiltonian(&state, &tp, &bath), max_relative = 1e-12);
    }
}

#[test]
fn initial_state_layout() {
    let bath = realize_bath(&spec(4, DosFamily::Uniform), 3);
    let tp = TestParticleSpec::new(1.0, 0.5).unwrap().with_initial(0.25, -0.5);
    let s = SystemState::initial(&tp, &[&bath]);
    assert_eq!(s.dim(), 10);
    assert_eq!((s.test_q(), s.test_p()), (0.25, -0.5));
    for n in 0..4 {
        assert_eq!(s.bath_q(n), bath.positions[n]);
        assert_eq!(s.bath_p(n), bath.momenta[n]);
    }
}

#[test]
fn oscillator_energies_reproduce_sampled_energies() {
    let bath = realize_bath(&spec(300, DosFamily::Square), 8);
    let e = bath.oscillator_energies(&bath.positions, &bath.momenta);
    for (a, b) in e.iter().zip(&bath.energies) {
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }
}

#[test]
fn frequencies_follow_each_family() {
    let n = 1_000_000;
    for family in [DosFamily::Uniform, DosFamily::Square, DosFamily::InverseSquare] {
        let s = spec(n, family);
        let mut w = sample_frequencies(&s, &mut RngStream::new(5, family as u64));
        assert!(w.iter().all(|x| (0.2..=1.0).contains(x)));
        let ks = ks_one_sample(&w[..20_000], |x| {
            let (a, b) = (0.2f64, 1.0f64);
            match family {
                DosFamily::Uniform => (x - a) / (b - a),
                DosFamily::Square => (x.powi(3) - a.powi(3)) / (b.powi(3) - a.powi(3)),
                DosFamily::InverseSquare => (1.0 / a - 1.0 / x) / (1.0 / a - 1.0 / b),
            }
        })
        .unwrap();
        assert!(ks.p_value > 0.001, "{family:?}: {ks:?}");
        if family == DosFamily::Square {
            w.sort_by(f64::total_cmp);
            let median = w[n / 2];
            assert!((median - 0.7958).abs() < 1e-3, "median {median}");
        }
        if family == DosFamily::Uniform {
            // var = (b−a)²/12
            let sigma = (0.64f64 / 12.0 / n as f64).sqrt();
            assert!((mean(&w) - 0.6).abs() < 5.0 * sigma);
        }
    }
}

#[test]
fn energies_are_boltzmann() {
    let n = 1_000_000;
    let s = spec(n, DosFamily::Uniform);
    let e = sample_energies(&s, &mut RngStream::for_bath(3, 0, StreamKind::Energies));
    assert!(e.iter().all(|x| *x >= 0.0));
    let sigma = 5.0 / (n as f64).sqrt();
    assert!((mean(&e) - 5.0).abs() < 5.0 * sigma, "mean {}", mean(&e));
    let ks = ks_one_sample(&e[..50_000], |x| 1.0 - (-x / 5.0).exp()).unwrap();
    assert!(ks.p_value > 0.001, "{ks:?}");
}

#[test]
fn equipartition_over_phases() {
    let bath = realize_bath(&BathSpec::new(200_000, 0.01, 5.0, DensityOfStates::uniform(0.2, 1.0).unwrap()).unwrap(), 2);
    let (mut kin, mut pot) = (0.0, 0.0);
    for n in 0..bath.len() {
        let w = bath.frequencies[n];
        kin += bath.momenta[n].powi(2) / (2.0 * bath.mass);
        pot += 0.5 * bath.mass * w * w * bath.positions[n].powi(2);
    }
    let n = bath.len() as f64;
    // each half carries T/2 with standard deviation of order T/sqrt(n)
    assert!((kin / n - 2.5).abs() < 5.0 * 5.0 / n.sqrt());
    assert!((pot / n - 2.5).abs() < 5.0 * 5.0 / n.sqrt());
}

#[test]
fn realizations_replay_and_differ_by_seed() {
    let s = spec(50, DosFamily::Uniform);
    assert_eq!(realize_bath(&s, 9), realize_bath(&s, 9));
    assert_ne!(realize_bath(&s, 9).frequencies, realize_bath(&s, 10).frequencies);
}

#[test]
fn antithetic_phases_cancel_sums() {
    let n = 1000;
    let freqs = vec![0.5; n];
    let energies: Vec<f64> = (0..n).map(|i| 1.0 + (i / 2) as f64 * 0.01).collect();
    let phases = antithetic_phases(n, &mut RngStream::new(1, 1));
    let r = realization_from_parts(0.01, freqs.clone(), energies.clone(), &phases, 1);
    let (sq, sp) = symmetrize_check(&r);
    assert!(sq.abs() < 1e-10 && sp.abs() < 1e-10, "{sq} {sp}");
    // independent phases: sums grow like sqrt(N)
    let random = sample_phases(n, &mut RngStream::new(1, 2));
    let r = realization_from_parts(0.01, freqs, energies, &random, 1);
    assert!(symmetrize_check(&r).0.abs() > 1e-3);
}
