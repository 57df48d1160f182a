//! Seedable sampling of bath frequencies, Boltzmann energies and phase-space
//! initial conditions.

use std::f64::consts::PI;

use crate::model::{BathRealization, BathSpec};
use crate::rng::{RngStream, StreamKind};

/// N i.i.d. frequencies from the bath's density of states by inverse CDF.
pub fn sample_frequencies(spec: &BathSpec, rng: &mut RngStream) -> Vec<f64> {
    (0..spec.n_oscillators)
        .map(|_| spec.dos.quantile(rng.uniform()))
        .collect()
}

/// N i.i.d. exponential energies with mean T (density ∝ exp(−E/T)).
///
/// Draws are `T · (−ln(1 − u))`, so two temperatures fed the same stream give
/// energies in exact proportion.
pub fn sample_energies(spec: &BathSpec, rng: &mut RngStream) -> Vec<f64> {
    (0..spec.n_oscillators)
        .map(|_| spec.temperature * -(1.0 - rng.uniform()).ln())
        .collect()
}

/// Uniform phases on `[0, 2π)`.
pub fn sample_phases(n: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| 2.0 * PI * rng.uniform()).collect()
}

/// Builds the realization from explicit frequencies, energies and phases:
/// `q = sqrt(2E/(m ω²)) cos φ`, `p = sqrt(2 m E) sin φ`.
pub fn realization_from_parts(
    mass: f64,
    frequencies: Vec<f64>,
    energies: Vec<f64>,
    phases: &[f64],
    seed: u64,
) -> BathRealization {
    let (positions, momenta) = frequencies
        .iter()
        .zip(&energies)
        .zip(phases)
        .map(|((w, e), phi)| {
            let amp_q = (2.0 * e / (mass * w * w)).sqrt();
            let amp_p = (2.0 * mass * e).sqrt();
            (amp_q * phi.cos(), amp_p * phi.sin())
        })
        .unzip();
    BathRealization {
        mass,
        frequencies,
        energies,
        positions,
        momenta,
        seed,
    }
}

/// Samples bath number `bath_index` of a system for `seed`.
pub fn realize_bath_indexed(spec: &BathSpec, seed: u64, bath_index: usize) -> BathRealization {
    let frequencies = sample_frequencies(spec, &mut RngStream::for_bath(seed, bath_index, StreamKind::Frequencies));
    let energies = sample_energies(spec, &mut RngStream::for_bath(seed, bath_index, StreamKind::Energies));
    let phases = sample_phases(
        spec.n_oscillators,
        &mut RngStream::for_bath(seed, bath_index, StreamKind::Phases),
    );
    realization_from_parts(spec.mass, frequencies, energies, &phases, seed)
}

/// Samples a single-bath realization for `seed`.
pub fn realize_bath(spec: &BathSpec, seed: u64) -> BathRealization {
    realize_bath_indexed(spec, seed, 0)
}

/// `(Σ q_n, Σ p_n)` of the initial conditions; near-cancellation is expected
/// for symmetric phase sampling.
pub fn symmetrize_check(realization: &BathRealization) -> (f64, f64) {
    (
        realization.positions.iter().sum(),
        realization.momenta.iter().sum(),
    )
}

/// Phases for a bath whose oscillators come in pairs at opposite points of
/// phase space (`φ` and `φ + π`). With an odd count the last phase is `π/2`
/// paired to nothing, so its position contribution is zero.
pub fn antithetic_phases(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut phases = Vec::with_capacity(n);
    while phases.len() + 1 < n {
        let phi = 2.0 * PI * rng.uniform();
        phases.push(phi);
        phases.push(phi + PI);
    }
    if phases.len() < n {
        phases.push(0.5 * PI);
    }
    phases
}
