//! Domain types and exact energy functions.
//!
//! All quantities are dimensionless with the Boltzmann constant fixed to one,
//! so temperatures and energies share units. Phase-space vectors use the
//! layout `(Q, P, q_1, p_1, ..., q_N, p_N)`, with the coordinates of a second
//! bath appended after the first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The distinguished oscillator whose thermalization is studied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestParticleSpec {
    pub mass: f64,
    pub omega: f64,
    pub q0: f64,
    pub p0: f64,
}

impl TestParticleSpec {
    pub fn new(mass: f64, omega: f64) -> Result<Self> {
        let tp = TestParticleSpec {
            mass,
            omega,
            q0: 0.0,
            p0: 0.0,
        };
        tp.validate()?;
        Ok(tp)
    }

    pub fn with_initial(mut self, q0: f64, p0: f64) -> Self {
        self.q0 = q0;
        self.p0 = p0;
        self
    }

    /// Places an initial energy entirely in momentum, `P0 = sqrt(2 M E0)`.
    pub fn with_initial_energy(self, e0: f64) -> Self {
        self.with_initial(0.0, (2.0 * self.mass * e0.max(0.0)).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid("tp_mass", "must be positive and finite"));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid("omega", "must be non-negative and finite"));
        }
        if !(self.q0.is_finite() && self.p0.is_finite()) {
            return Err(Error::invalid("tp_q0/tp_p0", "must be finite"));
        }
        Ok(())
    }

    /// Bare oscillator energy `P²/2M + M Ω² Q²/2`.
    pub fn energy(&self, q: f64, p: f64) -> f64 {
        p * p / (2.0 * self.mass) + 0.5 * self.mass * self.omega * self.omega * q * q
    }
}

/// Which quantity is histogrammed as "the test-particle energy".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyDefinition {
    /// `P²/2M + M Ω² Q²/2`.
    #[default]
    Bare,
    /// Bare energy plus the renormalization term `Σ m ω_n² Q²/2` of every
    /// currently coupled bath.
    Dressed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DosFamily {
    Uniform,
    InverseSquare,
    Square,
}

impl DosFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DosFamily::Uniform => "uniform",
            DosFamily::InverseSquare => "inverse_square",
            DosFamily::Square => "square",
        }
    }
}

impl std::str::FromStr for DosFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(DosFamily::Uniform),
            "inverse_square" => Ok(DosFamily::InverseSquare),
            "square" => Ok(DosFamily::Square),
            other => Err(Error::invalid(
                "dos",
                format!("unknown family `{other}` (uniform, inverse_square, square)"),
            )),
        }
    }
}

/// Frequency density of a bath, supported exactly on `[omega_ir, omega_uv]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityOfStates {
    pub family: DosFamily,
    pub omega_ir: f64,
    pub omega_uv: f64,
}

impl DensityOfStates {
    pub fn new(family: DosFamily, omega_ir: f64, omega_uv: f64) -> Result<Self> {
        let dos = DensityOfStates {
            family,
            omega_ir,
            omega_uv,
        };
        dos.validate()?;
        Ok(dos)
    }

    pub fn uniform(omega_ir: f64, omega_uv: f64) -> Result<Self> {
        Self::new(DosFamily::Uniform, omega_ir, omega_uv)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_ir > 0.0 && self.omega_ir.is_finite()) {
            return Err(Error::invalid("omega_ir", "must be positive and finite"));
        }
        if !(self.omega_uv.is_finite() && self.omega_uv >= self.omega_ir) {
            return Err(Error::invalid(
                "omega_ir/omega_uv",
                format!(
                    "omega_ir ({}) must not exceed omega_uv ({})",
                    self.omega_ir, self.omega_uv
                ),
            ));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.omega_ir == self.omega_uv
    }

    /// Normalized density dN/dω per oscillator (zero off the support).
    /// Undefined (returns infinity on the support) for a zero-bandwidth bath.
    pub fn density(&self, omega: f64) -> f64 {
        let (a, b) = (self.omega_ir, self.omega_uv);
        if omega < a || omega > b {
            return 0.0;
        }
        if self.is_degenerate() {
            return f64::INFINITY;
        }
        match self.family {
            DosFamily::Uniform => 1.0 / (b - a),
            DosFamily::Square => 3.0 * omega * omega / (b.powi(3) - a.powi(3)),
            DosFamily::InverseSquare => 1.0 / (omega * omega * (1.0 / a - 1.0 / b)),
        }
    }

    /// Inverse of the cumulative distribution, `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let (a, b) = (self.omega_ir, self.omega_uv);
        if self.is_degenerate() {
            return a;
        }
        let w = match self.family {
            DosFamily::Uniform => a + (b - a) * u,
            DosFamily::Square => {
                let (a3, b3) = (a.powi(3), b.powi(3));
                (a3 + u * (b3 - a3)).cbrt()
            }
            DosFamily::InverseSquare => 1.0 / (1.0 / a - u * (1.0 / a - 1.0 / b)),
        };
        w.clamp(a, b)
    }

    /// Mean of ω² under the density.
    pub fn mean_omega_sq(&self) -> f64 {
        let (a, b) = (self.omega_ir, self.omega_uv);
        if self.is_degenerate() {
            return a * a;
        }
        match self.family {
            DosFamily::Uniform => (b.powi(3) - a.powi(3)) / (3.0 * (b - a)),
            DosFamily::Square => 3.0 * (b.powi(5) - a.powi(5)) / (5.0 * (b.powi(3) - a.powi(3))),
            DosFamily::InverseSquare => (b - a) / (1.0 / a - 1.0 / b),
        }
    }
}

/// One reservoir: N oscillators of mass m at temperature T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub n_oscillators: usize,
    pub mass: f64,
    pub temperature: f64,
    pub dos: DensityOfStates,
}

impl BathSpec {
    pub fn new(n_oscillators: usize, mass: f64, temperature: f64, dos: DensityOfStates) -> Result<Self> {
        let spec = BathSpec {
            n_oscillators,
            mass,
            temperature,
            dos,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_oscillators == 0 {
            return Err(Error::invalid("n_oscillators", "must be at least 1"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid("mass", "must be positive and finite"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("temperature", "must be positive and finite"));
        }
        self.dos.validate()
    }

    /// Coupling strength ξ = N m / M.
    pub fn xi(&self, tp_mass: f64) -> f64 {
        self.n_oscillators as f64 * self.mass / tp_mass
    }
}

/// Concrete sampled bath for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathRealization {
    pub mass: f64,
    pub frequencies: Vec<f64>,
    pub energies: Vec<f64>,
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    pub seed: u64,
}

impl BathRealization {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Uncoupled oscillator energies `p²/2m + m ω² q²/2` for arbitrary coordinates.
    pub fn oscillator_energies(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        let m = self.mass;
        self.frequencies
            .iter()
            .zip(q.iter().zip(p))
            .map(|(w, (q, p))| p * p / (2.0 * m) + 0.5 * m * w * w * q * q)
            .collect()
    }

    pub fn block(&self, coupled: bool) -> BathBlock<'_> {
        BathBlock {
            frequencies: &self.frequencies,
            mass: self.mass,
            coupled,
        }
    }
}

/// Borrowed view of one bath inside a composite system.
#[derive(Debug, Clone, Copy)]
pub struct BathBlock<'a> {
    pub frequencies: &'a [f64],
    pub mass: f64,
    pub coupled: bool,
}

impl BathBlock<'_> {
    /// `Σ m ω_n²`, the stiffness this bath adds to the test particle when coupled.
    pub fn stiffness(&self) -> f64 {
        self.frequencies.iter().map(|w| self.mass * w * w).sum()
    }
}

/// Full phase vector at a time instant, layout `(Q, P, q_1, p_1, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub time: f64,
    pub coords: Vec<f64>,
}

impl SystemState {
    pub fn new(time: f64, coords: Vec<f64>) -> Self {
        SystemState { time, coords }
    }

    /// Assembles the initial vector from the test particle and its baths.
    pub fn initial(tp: &TestParticleSpec, baths: &[&BathRealization]) -> Self {
        let n: usize = baths.iter().map(|b| b.len()).sum();
        let mut coords = Vec::with_capacity(2 * n + 2);
        coords.push(tp.q0);
        coords.push(tp.p0);
        for bath in baths {
            for (q, p) in bath.positions.iter().zip(&bath.momenta) {
                coords.push(*q);
                coords.push(*p);
            }
        }
        SystemState { time: 0.0, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn n_oscillators(&self) -> usize {
        self.coords.len().saturating_sub(2) / 2
    }

    pub fn test_q(&self) -> f64 {
        self.coords[0]
    }

    pub fn test_p(&self) -> f64 {
        self.coords[1]
    }

    pub fn bath_q(&self, n: usize) -> f64 {
        self.coords[2 + 2 * n]
    }

    pub fn bath_p(&self, n: usize) -> f64 {
        self.coords[3 + 2 * n]
    }

    /// Positions and momenta of oscillators `offset..offset + len`.
    pub fn bath_slice(&self, offset: usize, len: usize) -> (Vec<f64>, Vec<f64>) {
        (offset..offset + len)
            .map(|n| (self.bath_q(n), self.bath_p(n)))
            .unzip()
    }
}

/// Bare test-particle energy `P²/2M + M Ω² Q²/2`.
pub fn test_particle_energy(state: &SystemState, spec: &TestParticleSpec) -> f64 {
    spec.energy(state.test_q(), state.test_p())
}

/// Test-particle energy under the chosen definition; `coupled_stiffness` is
/// `Σ m ω_n²` over the baths currently in contact.
pub fn test_particle_energy_with(
    definition: EnergyDefinition,
    tp: &TestParticleSpec,
    q: f64,
    p: f64,
    coupled_stiffness: f64,
) -> f64 {
    match definition {
        EnergyDefinition::Bare => tp.energy(q, p),
        EnergyDefinition::Dressed => tp.energy(q, p) + 0.5 * coupled_stiffness * q * q,
    }
}

/// Full Hamiltonian, including the `(q_n − Q)²` interaction of every coupled
/// bath. Uncoupled baths contribute free-oscillator energies.
pub fn total_energy(state: &SystemState, tp: &TestParticleSpec, baths: &[BathBlock<'_>]) -> Result<f64> {
    let n: usize = baths.iter().map(|b| b.frequencies.len()).sum();
    if state.dim() != 2 * n + 2 {
        return Err(Error::DimensionMismatch {
            expected: 2 * n + 2,
            got: state.dim(),
        });
    }
    let big_q = state.test_q();
    let mut h = tp.energy(big_q, state.test_p());
    let mut idx = 0;
    for bath in baths {
        let m = bath.mass;
        let shift = if bath.coupled { big_q } else { 0.0 };
        for w in bath.frequencies {
            let (q, p) = (state.bath_q(idx), state.bath_p(idx));
            let d = q - shift;
            h += p * p / (2.0 * m) + 0.5 * m * w * w * d * d;
            idx += 1;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state(coords: Vec<f64>) -> SystemState {
        SystemState::new(0.0, coords)
    }

    #[test]
    fn test_particle_energy_examples() {
        let tp = TestParticleSpec::new(1.0, 1.0).unwrap();
        assert_eq!(test_particle_energy(&state(vec![0.0, 0.0]), &tp), 0.0);
        assert_eq!(test_particle_energy(&state(vec![1.0, 0.0]), &tp), 0.5);
        let tp = TestParticleSpec::new(2.0, 0.5).unwrap();
        assert_eq!(test_particle_energy(&state(vec![2.0, 2.0]), &tp), 2.0);
    }

    #[test]
    fn total_energy_examples() {
        let tp = TestParticleSpec::new(1.0, 1.0).unwrap();
        let w = [1.0];
        let block = BathBlock {
            frequencies: &w,
            mass: 1.0,
            coupled: true,
        };
        assert_eq!(total_energy(&state(vec![0.0; 4]), &tp, &[block]).unwrap(), 0.0);
        let h = total_energy(&state(vec![1.0, 0.0, 1.0, 0.0]), &tp, &[block]).unwrap();
        assert_eq!(h, 0.5);
    }

    #[test]
    fn total_energy_rejects_wrong_dimension() {
        let tp = TestParticleSpec::new(1.0, 1.0).unwrap();
        let w = [1.0, 2.0];
        let block = BathBlock {
            frequencies: &w,
            mass: 1.0,
            coupled: true,
        };
        let err = total_energy(&state(vec![0.0; 4]), &tp, &[block]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 6, got: 4 });
    }

    #[test]
    fn translation_invariance_only_without_pinning() {
        let w = [0.3, 0.7, 1.1];
        let block = BathBlock {
            frequencies: &w,
            mass: 0.2,
            coupled: true,
        };
        let coords = vec![0.4, -0.3, 1.0, 0.2, -0.5, 0.1, 0.25, -0.7];
        let shifted: Vec<f64> = coords
            .iter()
            .enumerate()
            .map(|(i, x)| if i % 2 == 0 { x + 1.7 } else { *x })
            .collect();
        let free = TestParticleSpec::new(1.3, 0.0).unwrap();
        let h0 = total_energy(&state(coords.clone()), &free, &[block]).unwrap();
        let h1 = total_energy(&state(shifted.clone()), &free, &[block]).unwrap();
        assert_relative_eq!(h0, h1, max_relative = 1e-12);

        let pinned = TestParticleSpec::new(1.3, 0.8).unwrap();
        let h0 = total_energy(&state(coords), &pinned, &[block]).unwrap();
        let h1 = total_energy(&state(shifted), &pinned, &[block]).unwrap();
        assert!((h0 - h1).abs() > 1e-3);
    }

    #[test]
    fn dos_validation_names_both_keys() {
        let err = DensityOfStates::uniform(1.0, 0.5).unwrap_err();
        match err {
            Error::InvalidParameter { key, .. } => {
                assert!(key.contains("omega_ir") && key.contains("omega_uv"))
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(DensityOfStates::uniform(0.0, 1.0).is_err());
    }

    #[test]
    fn dos_quantile_endpoints_and_density_normalization() {
        for family in [DosFamily::Uniform, DosFamily::Square, DosFamily::InverseSquare] {
            let dos = DensityOfStates::new(family, 0.2, 1.0).unwrap();
            assert_relative_eq!(dos.quantile(0.0), 0.2, max_relative = 1e-14);
            assert_relative_eq!(dos.quantile(1.0), 1.0, max_relative = 1e-14);
            // midpoint-rule integral of the density
            let n = 200_000;
            let h = 0.8 / n as f64;
            let total: f64 = (0..n).map(|i| dos.density(0.2 + (i as f64 + 0.5) * h) * h).sum();
            assert_relative_eq!(total, 1.0, max_relative = 1e-8);
            let m2: f64 = (0..n)
                .map(|i| {
                    let w = 0.2 + (i as f64 + 0.5) * h;
                    w * w * dos.density(w) * h
                })
                .sum();
            assert_relative_eq!(m2, dos.mean_omega_sq(), max_relative = 1e-8);
        }
    }

    #[test]
    fn bath_spec_validation() {
        let dos = DensityOfStates::uniform(0.2, 1.0).unwrap();
        assert!(BathSpec::new(0, 0.01, 5.0, dos).is_err());
        assert!(BathSpec::new(10, 0.0, 5.0, dos).is_err());
        assert!(BathSpec::new(10, 0.01, -1.0, dos).is_err());
        let spec = BathSpec::new(400, 0.01, 5.0, dos).unwrap();
        assert_relative_eq!(spec.xi(1.0), 4.0);
    }
}
