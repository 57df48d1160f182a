use std::f64::consts::PI;

use finitebath::exact::{build_coupling_matrix, diagonalize};
use finitebath::model::{BathSpec, DensityOfStates, DosFamily, SystemState, TestParticleSpec};
use finitebath::oracles::{
    arcsine_cdf, arcsine_distribution_check, degenerate_mode_frequencies, effective_temperature, fluctuation_force,
    langevin_reference, memory_kernel, mixture_distribution, renormalized_frequency, symmetric_degenerate_bath,
    LangevinParams,
};
use finitebath::rng::{RngStream, StreamKind};
use finitebath::realize_bath;
use finitebath::stats::mean;

#[test]
fn kernel_and_force_match_term_by_term_sums() {
    let spec = BathSpec::new(5, 0.02, 3.0, DensityOfStates::uniform(0.2, 1.0).unwrap()).unwrap();
    let b = realize_bath(&spec, 12);
    let t = 2.3;
    let mut k = 0.0;
    let mut f = 0.0;
    for n in 0..5 {
        let w = b.frequencies[n];
        k += b.mass * w.powi(2) * (w * t).cos();
        f += b.mass * w.powi(2) * ((b.positions[n] - 0.4) * (w * t).cos() + b.momenta[n] / (b.mass * w) * (w * t).sin());
    }
    assert!((memory_kernel(&b.frequencies, b.mass, t) - k).abs() < 1e-13);
    assert!((fluctuation_force(&b, 0.4, t, 0.0) - f).abs() < 1e-12);
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// The exact trajectory satisfies the generalized Langevin equation with the
/// kernel and fluctuation force evaluated from the initial bath state.
#[test]
fn exact_trajectory_satisfies_generalized_langevin_equation() {
    let spec = BathSpec::new(20, 0.01, 5.0, DensityOfStates::uniform(0.2, 1.0).unwrap()).unwrap();
    let b = realize_bath(&spec, 3);
    let tp = TestParticleSpec::new(1.0, 0.6).unwrap().with_initial(0.7, 0.2);
    let a = build_coupling_matrix(&tp, &b.frequencies, b.mass);
    let prop = diagonalize(&a, &SystemState::initial(&tp, &[&b])).unwrap();
    let qdot = |s: f64| prop.observe_test_particle(s).1 / tp.mass;
    for t in [1.0, 2.5, 4.0] {
        let state = prop.full_state(t);
        let q = state.test_q();
        let coupling: f64 = (0..b.len())
            .map(|n| b.mass * b.frequencies[n].powi(2) * (state.bath_q(n) - q))
            .sum();
        let accel = -tp.mass * tp.omega.powi(2) * q + coupling;
        let memory = simpson(|s| memory_kernel(&b.frequencies, b.mass, t - s) * qdot(s), 0.0, t, 2000);
        let rhs = -tp.mass * tp.omega.powi(2) * q - memory + fluctuation_force(&b, tp.q0, t, 0.0);
        assert!((accel - rhs).abs() < 1e-9, "t = {t}: {accel} vs {rhs}");
    }
}

#[test]
fn langevin_thermalizes_to_bath_temperature() {
    let params = LangevinParams {
        gamma: 0.1,
        temperature: 5.0,
        mass: 1.0,
        omega: 1.0,
    };
    let mut rng = RngStream::global(1, StreamKind::Langevin);
    let e = langevin_reference(&params, (0.0, 0.0), 2e5, 0.01, 20.0, &mut rng).unwrap();
    let m = mean(&e[50..]);
    assert!((m - 5.0).abs() < 0.05 * 5.0, "mean {m}");
}

#[test]
fn cold_langevin_decays() {
    let params = LangevinParams {
        gamma: 0.2,
        temperature: 1e-300,
        mass: 1.0,
        omega: 1.0,
    };
    let mut rng = RngStream::global(2, StreamKind::Langevin);
    let e = langevin_reference(&params, (1.0, 0.0), 200.0, 0.01, 10.0, &mut rng).unwrap();
    assert!(e.last().unwrap() < &(1e-6 * e[0]));
}

#[test]
fn langevin_rejects_coarse_steps() {
    let params = LangevinParams {
        gamma: 0.1,
        temperature: 1.0,
        mass: 1.0,
        omega: 1.0,
    };
    let mut rng = RngStream::global(2, StreamKind::Langevin);
    assert!(langevin_reference(&params, (0.0, 0.0), 10.0, 0.5, 1.0, &mut rng).is_err());
}

#[test]
fn damping_is_constant_only_for_inverse_square_density() {
    let tp = TestParticleSpec::new(1.0, 0.5).unwrap();
    let inv = BathSpec::new(100, 0.01, 1.0, DensityOfStates::new(DosFamily::InverseSquare, 0.2, 1.0).unwrap()).unwrap();
    let uni = BathSpec::new(100, 0.01, 1.0, DensityOfStates::uniform(0.2, 1.0).unwrap()).unwrap();
    let g = |b: &BathSpec, w: f64| LangevinParams::from_bath(b, &tp, w).gamma;
    assert!((g(&inv, 0.3) - g(&inv, 0.9)).abs() < 1e-12 * g(&inv, 0.3));
    assert!((g(&uni, 0.9) / g(&uni, 0.3) - 9.0).abs() < 1e-9);
}

#[test]
fn arcsine_law_checks() {
    let mut rng = RngStream::new(4, 0);
    // inverse CDF draws
    let draws: Vec<f64> = (0..5000).map(|_| (0.5 * PI * rng.uniform_open()).sin().powi(2) * 3.0).collect();
    assert!(arcsine_distribution_check(&draws, 3.0).unwrap().ks.p_value > 0.01);
    // time sampling of a squared sine
    let timed: Vec<f64> = (0..5000).map(|_| 3.0 * (1.7 * 1e4 * rng.uniform()).sin().powi(2)).collect();
    assert!(arcsine_distribution_check(&timed, 3.0).unwrap().ks.p_value > 0.01);
    let expo: Vec<f64> = (0..5000).map(|_| (-0.5 * rng.uniform_open().ln()).min(2.99)).collect();
    assert!(arcsine_distribution_check(&expo, 3.0).unwrap().ks.p_value < 1e-6);
    assert_eq!(arcsine_cdf(0.75, 3.0), 2.0 / PI * 0.5f64.asin());
}

#[test]
fn degenerate_modes_match_eigensolver() {
    let tp = TestParticleSpec::new(1.0, 0.4).unwrap().with_initial(0.0, 1.0);
    let b = symmetric_degenerate_bath(40, 0.005, 0.8, 1.0, 2);
    let a = build_coupling_matrix(&tp, &b.frequencies, b.mass);
    let prop = diagonalize(&a, &SystemState::initial(&tp, &[&b])).unwrap();
    let (lo, hi) = degenerate_mode_frequencies(&tp, 40, 0.005, 0.8);
    let weights = prop.test_particle_participation();
    let active: Vec<f64> = prop
        .mode_frequencies()
        .iter()
        .zip(&weights)
        .filter(|(_, w)| w.abs() > 1e-8)
        .map(|(f, _)| *f)
        .collect();
    assert_eq!(active.len(), 2);
    assert!(active.iter().any(|f| (f - lo).abs() < 1e-10));
    assert!(active.iter().any(|f| (f - hi).abs() < 1e-10));
}

#[test]
fn renormalized_frequency_ratio() {
    let r = renormalized_frequency(1.0, 40.0).unwrap() / renormalized_frequency(1.0, 10.0).unwrap();
    assert!((r - (41.0f64 / 11.0).sqrt()).abs() < 1e-12);
    assert_eq!(renormalized_frequency(0.5, 3.0).unwrap(), 1.0);
}

#[test]
fn mixture_is_normalized() {
    let total = simpson(|e| mixture_distribution(e, 5.0, 10.0), 0.0, 400.0, 40_000);
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn effective_temperature_is_bracketed_and_monotone() {
    let mut last = effective_temperature(0.0, 5.0, 10.0).unwrap();
    assert_eq!(last, 7.5);
    for i in 1..50 {
        let t = effective_temperature(i as f64, 5.0, 10.0).unwrap();
        assert!(t > 5.0 && t < 10.0);
        assert!(t >= last, "not monotone at E = {i}");
        last = t;
    }
    assert_eq!(effective_temperature(3.0, 4.0, 4.0).unwrap(), 4.0);
    assert!(effective_temperature(1.0, -1.0, 2.0).is_err());
}
