//! Analytic references and diagnostics: memory kernel, fluctuation force,
//! Langevin limit, zero-bandwidth bath, renormalized frequency, and the
//! two-temperature mixture.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bath::{antithetic_phases, realization_from_parts};
use crate::error::{Error, Result};
use crate::model::{BathRealization, BathSpec, TestParticleSpec};
use crate::rng::{RngStream, StreamKind};
use crate::stats::{ks_one_sample, KsResult};

/// Dissipation kernel `Γ(t) = Σ m ω_n² cos(ω_n t)`.
pub fn memory_kernel(frequencies: &[f64], mass: f64, t: f64) -> f64 {
    frequencies.iter().map(|w| mass * w * w * (w * t).cos()).sum()
}

/// Fluctuation force `Π(t)` generated by the bath's initial conditions at
/// `t0`, given the test-particle position `q_tp0 = Q(t0)`.
pub fn fluctuation_force(realization: &BathRealization, q_tp0: f64, t: f64, t0: f64) -> f64 {
    let m = realization.mass;
    let tau = t - t0;
    realization
        .frequencies
        .iter()
        .zip(realization.positions.iter().zip(&realization.momenta))
        .map(|(w, (q, p))| {
            let (s, c) = (w * tau).sin_cos();
            m * w * w * ((q - q_tp0) * c + p / (m * w) * s)
        })
        .sum()
}

/// Ohmic Langevin limit of a bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinParams {
    pub gamma: f64,
    pub temperature: f64,
    pub mass: f64,
    pub omega: f64,
}

impl LangevinParams {
    /// `γ = π m ω²/(2M) · dN/dω` evaluated at `omega_eval`; constant in ω only
    /// for an inverse-square density of states.
    pub fn from_bath(bath: &BathSpec, tp: &TestParticleSpec, omega_eval: f64) -> Self {
        let dn_domega = bath.n_oscillators as f64 * bath.dos.density(omega_eval);
        LangevinParams {
            gamma: PI * bath.mass * omega_eval * omega_eval / (2.0 * tp.mass) * dn_domega,
            temperature: bath.temperature,
            mass: tp.mass,
            omega: tp.omega,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", "must be positive and finite"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::invalid("temperature", "must be positive"));
        }
        if !(self.mass > 0.0) {
            return Err(Error::invalid("tp_mass", "must be positive"));
        }
        if !(self.omega >= 0.0) {
            return Err(Error::invalid("omega", "must be non-negative"));
        }
        Ok(())
    }
}

/// Integrates `dQ = P dt/M`, `dP = −(γP + MΩ²Q) dt + sqrt(2MγT) dw` with the
/// semi-implicit Euler–Maruyama scheme (momentum first, then position with
/// the updated momentum) and returns the bare energy every `sample_interval`.
pub fn langevin_reference(
    params: &LangevinParams,
    initial: (f64, f64),
    t_final: f64,
    dt: f64,
    sample_interval: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    params.validate()?;
    if !(dt > 0.0) || dt * params.gamma > 0.1 || dt * params.omega > 0.1 {
        return Err(Error::invalid("dt", "must be positive and well below 1/γ and 1/Ω"));
    }
    if !(sample_interval >= dt) {
        return Err(Error::invalid("sample_interval", "must be at least dt"));
    }
    let m = params.mass;
    let k = m * params.omega * params.omega;
    let kick = (2.0 * m * params.gamma * params.temperature * dt).sqrt();
    let stride = (sample_interval / dt).round().max(1.0) as u64;
    let n_steps = (t_final / dt).round() as u64;
    let (mut q, mut p) = initial;
    let mut energies = Vec::with_capacity((n_steps / stride) as usize);
    for step in 1..=n_steps {
        p += -(params.gamma * p + k * q) * dt + kick * rng.standard_normal();
        q += p * dt / m;
        if step % stride == 0 {
            if !(q.is_finite() && p.is_finite()) {
                return Err(Error::NumericalBlowup { time: step as f64 * dt });
            }
            energies.push(p * p / (2.0 * m) + 0.5 * k * q * q);
        }
    }
    Ok(energies)
}

/// Zero-bandwidth bath parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegenerateBathParams {
    pub omega_r: f64,
    pub xi: f64,
    pub e0: f64,
}

impl DegenerateBathParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0) {
            return Err(Error::invalid("xi", "must be positive"));
        }
        Ok(())
    }
}

/// The analytic exchange law `E₀ sin(ω_R t)`, clamped to `[0, E₀]`.
pub fn degenerate_energy_series(params: &DegenerateBathParams, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|t| (params.e0 * (params.omega_r * t).sin()).clamp(0.0, params.e0))
        .collect()
}

/// All oscillators at `omega_r`, with energies and phases in antithetic pairs
/// so that `Σ q_n = Σ p_n = 0` up to rounding.
pub fn symmetric_degenerate_bath(
    n: usize,
    mass: f64,
    omega_r: f64,
    temperature: f64,
    seed: u64,
) -> BathRealization {
    let mut rng = RngStream::for_bath(seed, 0, StreamKind::Energies);
    let mut energies = Vec::with_capacity(n);
    while energies.len() < n {
        let e = temperature * -(1.0 - rng.uniform()).ln();
        energies.push(e);
        if energies.len() < n {
            energies.push(e);
        }
    }
    let phases = antithetic_phases(n, &mut RngStream::for_bath(seed, 0, StreamKind::Phases));
    realization_from_parts(mass, vec![omega_r; n], energies, &phases, seed)
}

/// Frequencies `ν` of the two modes of a test particle coupled to the centre
/// of mass of a symmetric zero-bandwidth bath; relative bath motion decouples.
pub fn degenerate_mode_frequencies(tp: &TestParticleSpec, n: usize, mass: f64, omega_r: f64) -> (f64, f64) {
    let xi = n as f64 * mass / tp.mass;
    let w2 = omega_r * omega_r;
    // eigenvalues of [[Ω² + ξω², −√ξ ω²], [−√ξ ω², ω²]]
    let a = tp.omega * tp.omega + xi * w2;
    let d = w2;
    let b = xi.sqrt() * w2;
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d).powi(2) + b * b).sqrt();
    ((mid - rad).max(0.0).sqrt(), (mid + rad).sqrt())
}

/// `F(E) = (2/π) arcsin(sqrt(E/E₀))`.
pub fn arcsine_cdf(e: f64, e0: f64) -> f64 {
    if e <= 0.0 {
        0.0
    } else if e >= e0 {
        1.0
    } else {
        2.0 / PI * (e / e0).sqrt().asin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcsineCheck {
    pub ks: KsResult,
    pub n_used: usize,
    /// Samples outside `(0, E₀)`, excluded from the test.
    pub n_rejected: usize,
}

/// KS distance between the samples inside `(0, E₀)` and the arcsine law.
pub fn arcsine_distribution_check(samples: &[f64], e0: f64) -> Result<ArcsineCheck> {
    if !(e0 > 0.0) {
        return Err(Error::invalid("e0", "must be positive"));
    }
    let inside: Vec<f64> = samples.iter().copied().filter(|&e| e > 0.0 && e < e0).collect();
    let n_rejected = samples.len() - inside.len();
    if inside.is_empty() {
        return Err(Error::EmptyInput("no samples inside (0, E0)"));
    }
    let ks = ks_one_sample(&inside, |e| arcsine_cdf(e, e0))?;
    Ok(ArcsineCheck {
        ks,
        n_used: inside.len(),
        n_rejected,
    })
}

/// One line of an amplitude spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    /// Angular frequency.
    pub omega: f64,
    pub amplitude: f64,
}

/// Local maxima of the Hann-windowed amplitude spectrum of a uniformly
/// sampled series (mean removed), strongest first.
pub fn spectral_lines(series: &[f64], dt: f64) -> Vec<SpectralLine> {
    let n = series.len();
    if n < 4 {
        return Vec::new();
    }
    let mu = series.iter().sum::<f64>() / n as f64;
    let windowed: Vec<f64> = series
        .iter()
        .enumerate()
        .map(|(i, x)| (x - mu) * 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos()))
        .collect();
    let half = n / 2;
    let amps: Vec<f64> = (0..=half)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            let step = 2.0 * PI * k as f64 / n as f64;
            for (i, x) in windowed.iter().enumerate() {
                let (s, c) = (step * i as f64).sin_cos();
                re += x * c;
                im -= x * s;
            }
            (re * re + im * im).sqrt()
        })
        .collect();
    let mut lines: Vec<SpectralLine> = (1..half)
        .filter(|&k| amps[k] > amps[k - 1] && amps[k] >= amps[k + 1])
        .map(|k| SpectralLine {
            omega: 2.0 * PI * k as f64 / (n as f64 * dt),
            amplitude: amps[k],
        })
        .collect();
    lines.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));
    lines
}

/// `Ω̃ = Ω sqrt(1 + ξ)`.
pub fn renormalized_frequency(omega: f64, xi: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::invalid("xi", "must be non-negative"));
    }
    Ok(omega * (1.0 + xi).sqrt())
}

/// Equal-weight mixture of two Boltzmann laws, normalized on `[0, ∞)`.
pub fn mixture_distribution(e: f64, t1: f64, t2: f64) -> f64 {
    0.5 * ((-e / t1).exp() / t1 + (-e / t2).exp() / t2)
}

/// Solves `T e^{−E/T} = [T₁ e^{−E/T₁} + T₂ e^{−E/T₂}] / 2` for `T` by
/// bisection on `[min(T₁,T₂)/2, 2 max(T₁,T₂)]`.
pub fn effective_temperature(e: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::invalid("t1/t2", "temperatures must be positive"));
    }
    if !(e >= 0.0) {
        return Err(Error::invalid("energy", "must be non-negative"));
    }
    if e == 0.0 {
        return Ok(0.5 * (t1 + t2));
    }
    if t1 == t2 {
        return Ok(t1);
    }
    let rhs = 0.5 * (t1 * (-e / t1).exp() + t2 * (-e / t2).exp());
    let f = |t: f64| t * (-e / t).exp() - rhs;
    let (mut lo, mut hi) = (0.5 * t1.min(t2), 2.0 * t1.max(t2));
    let (flo, fhi) = (f(lo), f(hi));
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::NoRoot { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
