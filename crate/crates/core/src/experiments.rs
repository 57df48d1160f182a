//! Frequency sweeps over the test-particle frequency for one or two baths,
//! and the initial-energy scan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::realize_bath_indexed;
use crate::error::{Error, Result};
use crate::exact::{build_coupling_matrix, diagonalize, CouplingMatrix};
use crate::model::{
    test_particle_energy_with, BathRealization, BathSpec, EnergyDefinition, SystemState, TestParticleSpec,
};
use crate::rng::{RngStream, StreamKind};
use crate::stats::{
    aggregate_seeds, energy_temperature, fit_temperature, make_sampling_times, mean, skewness, Binning,
    EnergyHistogram, SamplingPlan, TemperatureFit,
};
use crate::switched::{build_switched_matrices, run_switched_matrices, ActiveBath, SwitchSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorKind {
    Eigen,
    SwitchedRk4,
}

/// Integrator settings for switched runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingConfig {
    pub delta_t_steps: u64,
    /// `None` selects fifty steps per period of the fastest frequency.
    pub dt: Option<f64>,
    pub active_first: ActiveBath,
}

impl Default for SwitchingConfig {
    fn default() -> Self {
        SwitchingConfig {
            delta_t_steps: 1,
            dt: None,
            active_first: ActiveBath::First,
        }
    }
}

/// A frequency sweep: one run per (grid frequency, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub omega_grid: Vec<f64>,
    pub tp_mass: f64,
    /// Initial test-particle energy, placed entirely in momentum.
    pub initial_energy: f64,
    pub baths: Vec<BathSpec>,
    pub seeds: Vec<u64>,
    pub sampling: SamplingPlan,
    pub propagator: PropagatorKind,
    pub binning: Binning,
    pub energy_definition: EnergyDefinition,
    pub switching: SwitchingConfig,
}

impl SweepSpec {
    /// Single bath, eigen propagator, default sampling and binning.
    pub fn single_bath(omega_grid: Vec<f64>, bath: BathSpec, seeds: Vec<u64>) -> Self {
        SweepSpec {
            omega_grid,
            tp_mass: 1.0,
            initial_energy: 0.0,
            baths: vec![bath],
            seeds,
            sampling: SamplingPlan::default(),
            propagator: PropagatorKind::Eigen,
            binning: Binning::default(),
            energy_definition: EnergyDefinition::Bare,
            switching: SwitchingConfig::default(),
        }
    }

    /// Two baths with intermittent contact.
    pub fn two_bath(omega_grid: Vec<f64>, bath1: BathSpec, bath2: BathSpec, seeds: Vec<u64>) -> Self {
        SweepSpec {
            baths: vec![bath1, bath2],
            propagator: PropagatorKind::SwitchedRk4,
            ..Self::single_bath(omega_grid, bath1, seeds)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega_grid.is_empty() {
            return Err(Error::invalid("omega_grid", "must not be empty"));
        }
        if self.omega_grid.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("omega_grid", "frequencies must be finite and non-negative"));
        }
        if self.omega_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("omega_grid", "must be strictly increasing"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "must not be empty"));
        }
        if !(self.tp_mass > 0.0 && self.tp_mass.is_finite()) {
            return Err(Error::invalid("tp_mass", "must be positive and finite"));
        }
        if !(self.initial_energy >= 0.0 && self.initial_energy.is_finite()) {
            return Err(Error::invalid("initial_energy", "must be non-negative and finite"));
        }
        if self.baths.len() > 2 {
            return Err(Error::invalid("baths", "at most two baths are supported"));
        }
        for b in &self.baths {
            b.validate()?;
        }
        if self.baths.len() == 2 && self.propagator != PropagatorKind::SwitchedRk4 {
            return Err(Error::invalid(
                "propagator",
                "two baths require the switched_rk4 propagator",
            ));
        }
        self.sampling.validate()?;
        if self.binning.n_bins < crate::stats::MIN_BINS {
            return Err(Error::invalid(
                "hist_bins",
                format!("must be at least {}", crate::stats::MIN_BINS),
            ));
        }
        if !(self.binning.range_factor > 0.0) {
            return Err(Error::invalid("hist_range_factor", "must be positive"));
        }
        if self.switching.delta_t_steps == 0 {
            return Err(Error::invalid("delta_t_steps", "must be at least 1"));
        }
        if let Some(dt) = self.switching.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::invalid("dt", "must be positive and finite"));
            }
        }
        Ok(())
    }

    pub fn test_particle(&self, omega: f64) -> TestParticleSpec {
        TestParticleSpec {
            mass: self.tp_mass,
            omega,
            q0: 0.0,
            p0: 0.0,
        }
        .with_initial_energy(self.initial_energy)
    }

    /// Bath realizations for `seed`; bath `i` draws from its own substreams.
    pub fn realizations(&self, seed: u64) -> Vec<BathRealization> {
        self.baths
            .iter()
            .enumerate()
            .map(|(i, b)| realize_bath_indexed(b, seed, i))
            .collect()
    }

    /// The same sweep with only bath `index`, keeping its random substreams,
    /// run with the exact propagator.
    fn alone(&self, index: usize) -> (SweepSpec, Vec<usize>) {
        let mut spec = self.clone();
        spec.baths = vec![self.baths[index]];
        spec.propagator = PropagatorKind::Eigen;
        (spec, vec![index])
    }
}

/// Sampled energies and diagnostics from one (frequency, seed) run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedRun {
    pub omega: f64,
    pub seed: u64,
    pub energies: Vec<f64>,
    /// Per-bath fits of the initial and final oscillator energies.
    pub bath_initial: Vec<Option<TemperatureFit>>,
    pub bath_final: Vec<Option<TemperatureFit>>,
    /// Largest observation-time snap (switched runs only).
    pub max_snap: f64,
    /// Step size used (switched runs only).
    pub dt: Option<f64>,
}

impl SeedRun {
    pub fn histogram(&self, binning: &Binning) -> Result<EnergyHistogram> {
        binning.histogram(&self.energies)
    }

    pub fn fit(&self, binning: &Binning) -> Result<TemperatureFit> {
        fit_temperature(&self.histogram(binning)?)
    }

    pub fn mean_energy(&self) -> f64 {
        mean(&self.energies)
    }
}

fn optional_fit(energies: &[f64]) -> Option<TemperatureFit> {
    energy_temperature(energies).ok()
}

fn bath_energy_fits(state: &SystemState, baths: &[BathRealization]) -> Vec<Option<TemperatureFit>> {
    let mut offset = 0;
    baths
        .iter()
        .map(|b| {
            let (q, p) = state.bath_slice(offset, b.len());
            offset += b.len();
            optional_fit(&b.oscillator_energies(&q, &p))
        })
        .collect()
}

fn simulate(spec: &SweepSpec, omega: f64, seed: u64, bath_indices: &[usize]) -> Result<SeedRun> {
    let tp = spec.test_particle(omega);
    tp.validate()?;
    let baths: Vec<BathRealization> = spec
        .baths
        .iter()
        .zip(bath_indices)
        .map(|(b, &i)| realize_bath_indexed(b, seed, i))
        .collect();
    let times = make_sampling_times(&spec.sampling, &mut RngStream::global(seed, StreamKind::SamplingTimes));
    let bath_initial = baths.iter().map(|b| optional_fit(&b.energies)).collect();
    let def = spec.energy_definition;

    match spec.propagator {
        PropagatorKind::Eigen => {
            let a = match baths.first() {
                Some(b) => build_coupling_matrix(&tp, &b.frequencies, b.mass),
                None => CouplingMatrix::new(&tp, vec![]),
            };
            let refs: Vec<&BathRealization> = baths.iter().collect();
            let v0 = SystemState::initial(&tp, &refs);
            let prop = diagonalize(&a, &v0)?;
            let stiffness = a.coupled_stiffness();
            let energies = times
                .iter()
                .map(|&t| {
                    let (q, p) = prop.observe_test_particle(t);
                    test_particle_energy_with(def, &tp, q, p, stiffness)
                })
                .collect();
            let final_state = prop.full_state(*times.last().unwrap());
            Ok(SeedRun {
                omega,
                seed,
                energies,
                bath_initial,
                bath_final: bath_energy_fits(&final_state, &baths),
                max_snap: 0.0,
                dt: None,
            })
        }
        PropagatorKind::SwitchedRk4 => {
            let empty = BathRealization {
                mass: 1.0,
                frequencies: vec![],
                energies: vec![],
                positions: vec![],
                momenta: vec![],
                seed,
            };
            let b1 = baths.first().unwrap_or(&empty);
            let b2 = baths.get(1).unwrap_or(&empty);
            let system = build_switched_matrices(&tp, b1, b2)?;
            let dt = spec.switching.dt.unwrap_or_else(|| system.default_step_size());
            // a lone bath stays in contact
            let schedule = if baths.len() < 2 {
                SwitchSchedule::continuous(dt)?
            } else {
                SwitchSchedule::new(spec.switching.delta_t_steps, dt, spec.switching.active_first)?
            };
            let s1 = system.a1.coupled_stiffness();
            let s2 = system.a2.coupled_stiffness();
            let t_final = *times.last().unwrap();
            let run = run_switched_matrices(
                &system.a1,
                &system.a2,
                &schedule,
                &system.initial_state(),
                t_final,
                &times,
                |_, _| {},
            )?;
            let energies = run
                .samples
                .iter()
                .map(|s| {
                    let stiffness = match s.active {
                        ActiveBath::First => s1,
                        ActiveBath::Second => s2,
                    };
                    test_particle_energy_with(def, &tp, s.q, s.p, stiffness)
                })
                .collect();
            Ok(SeedRun {
                omega,
                seed,
                energies,
                bath_initial,
                bath_final: bath_energy_fits(&run.final_state, &baths),
                max_snap: run.max_snap,
                dt: Some(dt),
            })
        }
    }
}

/// Realize → propagate → sample for one grid frequency and seed.
pub fn simulate_point(omega: f64, spec: &SweepSpec, seed: u64) -> Result<SeedRun> {
    let indices: Vec<usize> = (0..spec.baths.len()).collect();
    simulate(spec, omega, seed, &indices)
        .map_err(|e| e.with_context(format!("omega = {omega}, seed = {seed}")))
}

/// Per-seed Boltzmann fit of the test-particle energy at frequency `omega`.
pub fn run_single_bath_point(omega: f64, spec: &SweepSpec, seed: u64) -> Result<TemperatureFit> {
    simulate_point(omega, spec, seed)?
        .fit(&spec.binning)
        .map_err(|e| e.with_context(format!("omega = {omega}, seed = {seed}")))
}

/// Aggregated temperature of the reference baths at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathReference {
    pub initial: f64,
    pub initial_err: f64,
    pub final_: f64,
    pub final_err: f64,
}

/// One grid point of a thermalization curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub omega: f64,
    pub t_tp: f64,
    pub t_tp_err: f64,
    /// Mean reduced weighted residual of the per-seed fits.
    pub goodness: f64,
    pub overflow_frac: f64,
    /// Mean over baths of the aggregated initial bath temperature.
    pub t_bath_init: f64,
    pub t_bath_final: f64,
    pub baths: Vec<BathReference>,
    pub mean_energy: f64,
    pub skewness: f64,
    pub seed_temperatures: Vec<f64>,
    pub failures: Vec<String>,
}

impl CurvePoint {
    pub fn ratio(&self) -> f64 {
        self.t_tp / self.t_bath_init
    }

    pub fn ratio_err(&self) -> f64 {
        self.t_tp_err / self.t_bath_init
    }

    pub fn is_valid(&self) -> bool {
        self.t_tp.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalizationCurve {
    pub points: Vec<CurvePoint>,
    pub dt: Option<f64>,
    pub delta_t_steps: Option<u64>,
    pub max_snap: f64,
}

impl ThermalizationCurve {
    pub fn point(&self, omega: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.omega == omega)
    }

    /// Grid frequency maximizing the 3-point moving average of `T_tp`.
    pub fn peak_omega(&self) -> Option<f64> {
        peak_of(&self.points.iter().map(|p| (p.omega, p.t_tp)).collect::<Vec<_>>())
    }
}

/// Argmax of the 3-point moving average of `(x, y)` pairs; end points
/// average over their single neighbour. Non-finite values are skipped.
pub fn peak_of(series: &[(f64, f64)]) -> Option<f64> {
    let valid: Vec<(f64, f64)> = series.iter().copied().filter(|p| p.1.is_finite()).collect();
    let n = valid.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            let avg = valid[lo..=hi].iter().map(|p| p.1).sum::<f64>() / (hi - lo + 1) as f64;
            (valid[i].0, avg)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|p| p.0)
}

fn aggregate_bath(fits: &[&Option<TemperatureFit>]) -> (f64, f64) {
    let ok: Vec<TemperatureFit> = fits.iter().filter_map(|f| (*f).clone()).collect();
    match aggregate_seeds(&ok) {
        Ok(f) => (f.temperature, f.std_error),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

/// Folds per-seed runs at one frequency into a curve point.
pub fn summarize_point(omega: f64, runs: &[Result<SeedRun>], binning: &Binning) -> CurvePoint {
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    let mut overflow = Vec::new();
    let mut goodness = Vec::new();
    let mut pooled = Vec::new();
    let mut ok_runs = Vec::new();
    for run in runs {
        match run {
            Ok(r) => {
                pooled.extend_from_slice(&r.energies);
                ok_runs.push(r);
                match r.histogram(binning).and_then(|h| {
                    overflow.push(h.overflow_fraction());
                    fit_temperature(&h)
                }) {
                    Ok(f) => {
                        goodness.push(f.goodness / (f.n_bins_used as f64 - 2.0).max(1.0));
                        fits.push(f);
                    }
                    Err(e) => failures.push(format!("seed {}: {e}", r.seed)),
                }
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    let (t_tp, t_tp_err) = match aggregate_seeds(&fits) {
        Ok(f) => (f.temperature, f.std_error),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let n_baths = ok_runs.first().map_or(0, |r| r.bath_initial.len());
    let baths: Vec<BathReference> = (0..n_baths)
        .map(|b| {
            let init: Vec<_> = ok_runs.iter().map(|r| &r.bath_initial[b]).collect();
            let fin: Vec<_> = ok_runs.iter().map(|r| &r.bath_final[b]).collect();
            let (initial, initial_err) = aggregate_bath(&init);
            let (final_, final_err) = aggregate_bath(&fin);
            BathReference {
                initial,
                initial_err,
                final_,
                final_err,
            }
        })
        .collect();
    let avg = |f: fn(&BathReference) -> f64| {
        if baths.is_empty() {
            f64::NAN
        } else {
            baths.iter().map(f).sum::<f64>() / baths.len() as f64
        }
    };
    CurvePoint {
        omega,
        t_tp,
        t_tp_err,
        goodness: if goodness.is_empty() { f64::NAN } else { mean(&goodness) },
        overflow_frac: if overflow.is_empty() { f64::NAN } else { mean(&overflow) },
        t_bath_init: avg(|b| b.initial),
        t_bath_final: avg(|b| b.final_),
        baths,
        mean_energy: if pooled.is_empty() { f64::NAN } else { mean(&pooled) },
        skewness: if pooled.is_empty() { f64::NAN } else { skewness(&pooled) },
        seed_temperatures: fits.iter().map(|f| f.temperature).collect(),
        failures,
    }
}

fn sweep_with(spec: &SweepSpec, bath_indices: &[usize]) -> Result<ThermalizationCurve> {
    spec.validate()?;
    let jobs: Vec<(f64, u64)> = spec
        .omega_grid
        .iter()
        .flat_map(|&w| spec.seeds.iter().map(move |&s| (w, s)))
        .collect();
    let runs: Vec<Result<SeedRun>> = jobs
        .par_iter()
        .map(|&(w, s)| {
            simulate(spec, w, s, bath_indices).map_err(|e| e.with_context(format!("omega = {w}, seed = {s}")))
        })
        .collect();
    let n_seeds = spec.seeds.len();
    let points = spec
        .omega_grid
        .iter()
        .enumerate()
        .map(|(i, &w)| summarize_point(w, &runs[i * n_seeds..(i + 1) * n_seeds], &spec.binning))
        .collect();
    let ok = runs.iter().filter_map(|r| r.as_ref().ok());
    let max_snap = ok.clone().map(|r| r.max_snap).fold(0.0, f64::max);
    let dt = ok.clone().find_map(|r| r.dt);
    Ok(ThermalizationCurve {
        points,
        dt,
        delta_t_steps: (spec.propagator == PropagatorKind::SwitchedRk4 && spec.baths.len() == 2)
            .then_some(spec.switching.delta_t_steps),
        max_snap,
    })
}

/// Thermalization curve over `spec.omega_grid`; failures at a grid point are
/// recorded in that point and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<ThermalizationCurve> {
    let indices: Vec<usize> = (0..spec.baths.len()).collect();
    sweep_with(spec, &indices)
}

/// Switched two-bath curve plus the curves of each bath acting alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBathCurves {
    pub switched: ThermalizationCurve,
    pub bath1_alone: ThermalizationCurve,
    pub bath2_alone: ThermalizationCurve,
}

pub fn run_two_bath_sweep(spec: &SweepSpec) -> Result<TwoBathCurves> {
    if spec.baths.len() != 2 {
        return Err(Error::invalid("baths", "a two-bath sweep needs exactly two baths"));
    }
    if spec.propagator != PropagatorKind::SwitchedRk4 {
        return Err(Error::invalid("propagator", "two-bath sweeps use switched_rk4"));
    }
    let switched = run_sweep(spec)?;
    let (alone1, idx1) = spec.alone(0);
    let (alone2, idx2) = spec.alone(1);
    Ok(TwoBathCurves {
        switched,
        bath1_alone: sweep_with(&alone1, &idx1)?,
        bath2_alone: sweep_with(&alone2, &idx2)?,
    })
}

/// One `(Ω, E0)` cell of the initial-energy scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyScanRecord {
    pub omega: f64,
    pub e0: f64,
    pub point: CurvePoint,
    /// Histogram of the energies pooled over seeds.
    pub histogram: Option<EnergyHistogram>,
}

pub fn run_initial_energy_scan(omegas: &[f64], e0s: &[f64], spec: &SweepSpec) -> Result<Vec<EnergyScanRecord>> {
    if e0s.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::invalid("initial_energy", "must be non-negative"));
    }
    let mut records = Vec::new();
    for &e0 in e0s {
        let mut s = spec.clone();
        s.initial_energy = e0;
        s.omega_grid = omegas.to_vec();
        s.validate()?;
        let indices: Vec<usize> = (0..s.baths.len()).collect();
        for &omega in omegas {
            let runs: Vec<Result<SeedRun>> = s
                .seeds
                .par_iter()
                .map(|&seed| simulate(&s, omega, seed, &indices))
                .collect();
            let pooled: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.as_ref().ok())
                .flat_map(|r| r.energies.iter().copied())
                .collect();
            records.push(EnergyScanRecord {
                omega,
                e0,
                point: summarize_point(omega, &runs, &s.binning),
                histogram: s.binning.histogram(&pooled).ok(),
            });
        }
    }
    Ok(records)
}
