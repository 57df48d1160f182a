//! Exact propagation of the single-bath (or any constant-coupling) linear
//! system through its normal modes.
//!
//! The equations of motion `v̇ = A v` are those of a mass-spring network:
//! with positions `x = (Q, q_1, ...)`, masses `μ = (M, m, ...)` and stiffness
//! `K`, the mass-weighted matrix `μ^{-1/2} K μ^{-1/2}` is symmetric positive
//! semidefinite. Its eigenvectors give the normal modes and its eigenvalues
//! the squared mode frequencies, so `A = C D C⁻¹` with `D = diag(±iν_k)`.
//! The symmetric route avoids ill-conditioned complex eigenvector matrices
//! when bath frequencies are exactly degenerate.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{BathBlock, SystemState, TestParticleSpec};

/// One bath block of a coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlock {
    pub frequencies: Vec<f64>,
    pub mass: f64,
    pub coupled: bool,
}

impl CouplingBlock {
    fn view(&self) -> BathBlock<'_> {
        BathBlock {
            frequencies: &self.frequencies,
            mass: self.mass,
            coupled: self.coupled,
        }
    }
}

/// The generator `A` of `v̇ = A v`, stored in its arrow-shaped sparse form.
///
/// Row `Q̇` holds `1/M`; row `Ṗ` holds `−MΩ² − Σ m ω_n²` on `Q` and `+m ω_n²`
/// on each coupled `q_n`; rows `q̇_n` hold `1/m`; rows `ṗ_n` hold `+m ω_n²` on
/// `Q` (coupled baths only) and `−m ω_n²` on `q_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    tp_mass: f64,
    tp_omega: f64,
    blocks: Vec<CouplingBlock>,
    coupled_stiffness: f64,
    n_oscillators: usize,
}

/// Single-bath matrix for bath frequencies `frequencies` of mass `mass`.
pub fn build_coupling_matrix(tp: &TestParticleSpec, frequencies: &[f64], mass: f64) -> CouplingMatrix {
    CouplingMatrix::new(
        tp,
        vec![CouplingBlock {
            frequencies: frequencies.to_vec(),
            mass,
            coupled: true,
        }],
    )
}

impl CouplingMatrix {
    pub fn new(tp: &TestParticleSpec, blocks: Vec<CouplingBlock>) -> Self {
        let coupled_stiffness = blocks
            .iter()
            .filter(|b| b.coupled)
            .map(|b| b.view().stiffness())
            .sum();
        let n_oscillators = blocks.iter().map(|b| b.frequencies.len()).sum();
        CouplingMatrix {
            tp_mass: tp.mass,
            tp_omega: tp.omega,
            blocks,
            coupled_stiffness,
            n_oscillators,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.n_oscillators + 2
    }

    pub fn n_oscillators(&self) -> usize {
        self.n_oscillators
    }

    pub fn blocks(&self) -> &[CouplingBlock] {
        &self.blocks
    }

    pub fn tp_mass(&self) -> f64 {
        self.tp_mass
    }

    pub fn tp_omega(&self) -> f64 {
        self.tp_omega
    }

    /// `Σ m ω_n²` over coupled blocks.
    pub fn coupled_stiffness(&self) -> f64 {
        self.coupled_stiffness
    }

    pub fn block_views(&self) -> Vec<BathBlock<'_>> {
        self.blocks.iter().map(CouplingBlock::view).collect()
    }

    /// Highest frequency present: the largest bath frequency or the test
    /// particle's frequency dressed by every coupled bath.
    pub fn max_frequency(&self) -> f64 {
        let dressed = (self.tp_omega * self.tp_omega + self.coupled_stiffness / self.tp_mass).sqrt();
        self.blocks
            .iter()
            .flat_map(|b| b.frequencies.iter().copied())
            .fold(dressed, f64::max)
    }

    /// `out = A v` in O(N).
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        let big_q = v[0];
        let mut force_on_q = -self.tp_mass * self.tp_omega * self.tp_omega * big_q;
        let mut idx = 2;
        for block in &self.blocks {
            let m = block.mass;
            let inv_m = 1.0 / m;
            if block.coupled {
                for w in &block.frequencies {
                    let k = m * w * w;
                    let stretch = v[idx] - big_q;
                    out[idx] = v[idx + 1] * inv_m;
                    out[idx + 1] = -k * stretch;
                    force_on_q += k * stretch;
                    idx += 2;
                }
            } else {
                for w in &block.frequencies {
                    out[idx] = v[idx + 1] * inv_m;
                    out[idx + 1] = -m * w * w * v[idx];
                    idx += 2;
                }
            }
        }
        out[0] = v[1] / self.tp_mass;
        out[1] = force_on_q;
    }

    /// Dense `(2N+2) × (2N+2)` matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut a = DMatrix::zeros(n, n);
        a[(0, 1)] = 1.0 / self.tp_mass;
        a[(1, 0)] = -self.tp_mass * self.tp_omega * self.tp_omega - self.coupled_stiffness;
        let mut idx = 2;
        for block in &self.blocks {
            for w in &block.frequencies {
                let k = block.mass * w * w;
                a[(idx, idx + 1)] = 1.0 / block.mass;
                a[(idx + 1, idx)] = -k;
                if block.coupled {
                    a[(1, idx)] = k;
                    a[(idx + 1, 0)] = k;
                }
                idx += 2;
            }
        }
        a
    }

    /// Masses of the position coordinates `(Q, q_1, ...)`.
    fn coordinate_masses(&self) -> Vec<f64> {
        std::iter::once(self.tp_mass)
            .chain(
                self.blocks
                    .iter()
                    .flat_map(|b| std::iter::repeat(b.mass).take(b.frequencies.len())),
            )
            .collect()
    }

    /// Mass-weighted stiffness `μ^{-1/2} K μ^{-1/2}` (symmetric).
    fn mass_weighted_stiffness(&self) -> DMatrix<f64> {
        let n = self.n_oscillators + 1;
        let mut k = DMatrix::zeros(n, n);
        let m_big = self.tp_mass;
        k[(0, 0)] = self.tp_omega * self.tp_omega + self.coupled_stiffness / m_big;
        let mut j = 1;
        for block in &self.blocks {
            let ratio = (block.mass / m_big).sqrt();
            for w in &block.frequencies {
                k[(j, j)] = w * w;
                if block.coupled {
                    k[(0, j)] = -w * w * ratio;
                    k[(j, 0)] = -w * w * ratio;
                }
                j += 1;
            }
        }
        k
    }
}

/// Diagonalized system plus its initial condition in normal coordinates.
#[derive(Debug, Clone)]
pub struct EigenPropagator {
    /// `sqrt` of the coordinate masses `(M, m, ...)`.
    sqrt_mass: Vec<f64>,
    /// Mass-weighted mode shapes, one column per mode.
    modes: DMatrix<f64>,
    /// Mode angular frequencies `ν_k ≥ 0`.
    frequencies: Vec<f64>,
    /// Normal coordinates and velocities at `t0`.
    y0: Vec<f64>,
    yd0: Vec<f64>,
    t0: f64,
    /// Per-mode weights of `Q`: `U_{0k} / sqrt(M)`.
    q_weights: Vec<f64>,
    tp_mass: f64,
}

/// Relative tolerance on the eigen-decomposition residual.
const EIGEN_RESIDUAL_TOL: f64 = 1e-9;

/// Diagonalizes `a` and projects `v0` onto its normal modes.
pub fn diagonalize(a: &CouplingMatrix, v0: &SystemState) -> Result<EigenPropagator> {
    if v0.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: v0.dim(),
        });
    }
    if v0.coords.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalBlowup { time: v0.time });
    }
    let k = a.mass_weighted_stiffness();
    let scale = k.amax().max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::try_new(k.clone(), 1e-15 * scale, 10_000)
        .ok_or_else(|| Error::Eigensolver("symmetric eigensolver did not converge".into()))?;

    let residual = (&k * &eig.eigenvectors - &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues)).amax();
    if !(residual <= EIGEN_RESIDUAL_TOL * scale) {
        return Err(Error::Eigensolver(format!(
            "decomposition residual {residual:e} exceeds {:e}",
            EIGEN_RESIDUAL_TOL * scale
        )));
    }

    let mut frequencies = Vec::with_capacity(eig.eigenvalues.len());
    for &lambda in eig.eigenvalues.iter() {
        if lambda < -1e-10 * scale {
            return Err(Error::Eigensolver(format!(
                "negative squared mode frequency {lambda:e}; stiffness is not positive semidefinite"
            )));
        }
        let nu = lambda.max(0.0).sqrt();
        // zero modes (free translation when Ω = 0) evolve ballistically
        frequencies.push(if lambda <= 1e-14 * scale { 0.0 } else { nu });
    }

    let sqrt_mass: Vec<f64> = a.coordinate_masses().iter().map(|m| m.sqrt()).collect();
    let q_weights = (0..frequencies.len())
        .map(|k| eig.eigenvectors[(0, k)] / sqrt_mass[0])
        .collect();
    let mut prop = EigenPropagator {
        sqrt_mass,
        modes: eig.eigenvectors,
        frequencies,
        y0: Vec::new(),
        yd0: Vec::new(),
        t0: v0.time,
        q_weights,
        tp_mass: a.tp_mass(),
    };
    prop.set_initial(v0);
    Ok(prop)
}

impl EigenPropagator {
    fn set_initial(&mut self, v0: &SystemState) {
        let n = self.sqrt_mass.len();
        let x = DVector::from_iterator(n, (0..n).map(|j| self.sqrt_mass[j] * v0.coords[2 * j]));
        let p = DVector::from_iterator(n, (0..n).map(|j| v0.coords[2 * j + 1] / self.sqrt_mass[j]));
        let y0 = self.modes.tr_mul(&x);
        let yd0 = self.modes.tr_mul(&p);
        self.y0 = y0.iter().copied().collect();
        self.yd0 = yd0.iter().copied().collect();
        self.t0 = v0.time;
    }

    /// Same decomposition, new initial condition (taken at `state.time`).
    pub fn with_initial(&self, state: &SystemState) -> Result<EigenPropagator> {
        if state.dim() != 2 * self.sqrt_mass.len() {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.sqrt_mass.len(),
                got: state.dim(),
            });
        }
        let mut next = self.clone();
        next.set_initial(state);
        Ok(next)
    }

    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    /// Mode angular frequencies `ν_k`.
    pub fn mode_frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Participation `U_{0k}²` of the test particle in each mass-weighted mode.
    pub fn test_particle_participation(&self) -> Vec<f64> {
        (0..self.n_modes()).map(|k| self.modes[(0, k)].powi(2)).collect()
    }

    /// Eigenvalues of `A`, `±iν_k`, in conjugate pairs.
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        self.frequencies
            .iter()
            .flat_map(|&nu| [Complex::new(0.0, nu), Complex::new(0.0, -nu)])
            .collect()
    }

    /// Complex mode matrix `C` with columns ordered as [`Self::eigenvalues`].
    pub fn mode_matrix(&self) -> DMatrix<Complex<f64>> {
        let n = self.sqrt_mass.len();
        let mut c = DMatrix::from_element(2 * n, 2 * n, Complex::new(0.0, 0.0));
        for k in 0..n {
            let nu = self.frequencies[k];
            for j in 0..n {
                let u = self.modes[(j, k)];
                let pos = Complex::new(u / self.sqrt_mass[j], 0.0);
                let mom = Complex::new(0.0, nu * self.sqrt_mass[j] * u);
                c[(2 * j, 2 * k)] = pos;
                c[(2 * j + 1, 2 * k)] = mom;
                c[(2 * j, 2 * k + 1)] = pos;
                c[(2 * j + 1, 2 * k + 1)] = mom.conj();
            }
        }
        c
    }

    /// `max|C D C⁻¹ − A| / max|A|`. Fails when `C` is singular (zero modes).
    pub fn reconstruction_error(&self, a: &CouplingMatrix) -> Result<f64> {
        let c = self.mode_matrix();
        let c_inv = c
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Eigensolver("mode matrix is singular".into()))?;
        let d = DMatrix::from_diagonal(&DVector::from_vec(self.eigenvalues()));
        let rebuilt = &c * d * c_inv;
        let dense = a.to_dense();
        let mut worst: f64 = 0.0;
        for (r, x) in rebuilt.iter().zip(dense.iter()) {
            worst = worst.max((r - Complex::new(*x, 0.0)).norm());
        }
        Ok(worst / dense.amax())
    }

    #[inline]
    fn mode_state(&self, k: usize, tau: f64) -> (f64, f64) {
        let nu = self.frequencies[k];
        let (y0, yd0) = (self.y0[k], self.yd0[k]);
        if nu == 0.0 {
            return (y0 + yd0 * tau, yd0);
        }
        let (s, c) = (nu * tau).sin_cos();
        (y0 * c + yd0 * s / nu, -y0 * nu * s + yd0 * c)
    }

    /// `(Q(t), P(t))` in O(N).
    pub fn observe_test_particle(&self, t: f64) -> (f64, f64) {
        let tau = t - self.t0;
        let mut q = 0.0;
        let mut qd = 0.0;
        for (k, w) in self.q_weights.iter().enumerate() {
            let (y, yd) = self.mode_state(k, tau);
            q += w * y;
            qd += w * yd;
        }
        (q, self.tp_mass * qd)
    }

    /// Full phase vector at `t` in O(N²).
    pub fn full_state(&self, t: f64) -> SystemState {
        let tau = t - self.t0;
        let n = self.n_modes();
        let (y, yd): (Vec<f64>, Vec<f64>) = (0..n).map(|k| self.mode_state(k, tau)).unzip();
        let x = &self.modes * DVector::from_vec(y);
        let v = &self.modes * DVector::from_vec(yd);
        let mut coords = Vec::with_capacity(2 * n);
        for j in 0..n {
            coords.push(x[j] / self.sqrt_mass[j]);
            coords.push(v[j] * self.sqrt_mass[j]);
        }
        SystemState::new(t, coords)
    }
}
