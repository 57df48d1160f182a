//! Two-bath dynamics with intermittent coupling, integrated with classical
//! fourth-order Runge-Kutta while alternating between the two generators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{CouplingBlock, CouplingMatrix};
use crate::model::{BathRealization, SystemState, TestParticleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveBath {
    First,
    Second,
}

impl ActiveBath {
    pub fn other(self) -> Self {
        match self {
            ActiveBath::First => ActiveBath::Second,
            ActiveBath::Second => ActiveBath::First,
        }
    }
}

/// Square-wave contact schedule: each bath stays coupled for `delta_t_steps`
/// integrator steps, then hands over to the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchSchedule {
    pub delta_t_steps: u64,
    pub step_size: f64,
    pub active_first: ActiveBath,
}

impl SwitchSchedule {
    pub fn new(delta_t_steps: u64, step_size: f64, active_first: ActiveBath) -> Result<Self> {
        if delta_t_steps == 0 {
            return Err(Error::invalid("delta_t_steps", "must be at least 1"));
        }
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::invalid("dt", "must be positive and finite"));
        }
        Ok(SwitchSchedule {
            delta_t_steps,
            step_size,
            active_first,
        })
    }

    /// A schedule that never leaves `active_first`.
    pub fn continuous(step_size: f64) -> Result<Self> {
        Self::new(u64::MAX, step_size, ActiveBath::First)
    }

    /// Bath in contact during step `step` (from `step·dt` to `(step+1)·dt`).
    pub fn active_at_step(&self, step: u64) -> ActiveBath {
        if (step / self.delta_t_steps) % 2 == 0 {
            self.active_first
        } else {
            self.active_first.other()
        }
    }

    /// `(α₁, α₂)` during step `step`; always one of `(1, 0)` or `(0, 1)`.
    pub fn alphas(&self, step: u64) -> (f64, f64) {
        match self.active_at_step(step) {
            ActiveBath::First => (1.0, 0.0),
            ActiveBath::Second => (0.0, 1.0),
        }
    }
}

/// Default step: fifty steps per period of the fastest frequency in either
/// coupling configuration.
pub fn default_step_size(a1: &CouplingMatrix, a2: &CouplingMatrix) -> f64 {
    let w = a1.max_frequency().max(a2.max_frequency());
    2.0 * std::f64::consts::PI / w / 50.0
}

/// Test particle plus two baths with the two alternative generators.
#[derive(Debug, Clone)]
pub struct TwoBathSystem {
    pub tp: TestParticleSpec,
    pub bath1: BathRealization,
    pub bath2: BathRealization,
    /// Bath 1 coupled, bath 2 free.
    pub a1: CouplingMatrix,
    /// Bath 2 coupled, bath 1 free.
    pub a2: CouplingMatrix,
}

fn block(b: &BathRealization, coupled: bool) -> CouplingBlock {
    CouplingBlock {
        frequencies: b.frequencies.clone(),
        mass: b.mass,
        coupled,
    }
}

/// Largest total oscillator count accepted for a composite system.
const MAX_OSCILLATORS: usize = 1 << 26;

pub fn build_switched_matrices(
    tp: &TestParticleSpec,
    bath1: &BathRealization,
    bath2: &BathRealization,
) -> Result<TwoBathSystem> {
    let total = bath1
        .len()
        .checked_add(bath2.len())
        .filter(|n| n.checked_mul(2).and_then(|d| d.checked_add(2)).is_some())
        .ok_or(Error::DimensionOverflow {
            oscillators: usize::MAX,
        })?;
    if total > MAX_OSCILLATORS {
        return Err(Error::DimensionOverflow { oscillators: total });
    }
    let a1 = CouplingMatrix::new(tp, vec![block(bath1, true), block(bath2, false)]);
    let a2 = CouplingMatrix::new(tp, vec![block(bath1, false), block(bath2, true)]);
    Ok(TwoBathSystem {
        tp: *tp,
        bath1: bath1.clone(),
        bath2: bath2.clone(),
        a1,
        a2,
    })
}

impl TwoBathSystem {
    pub fn initial_state(&self) -> SystemState {
        SystemState::initial(&self.tp, &[&self.bath1, &self.bath2])
    }

    pub fn matrix(&self, active: ActiveBath) -> &CouplingMatrix {
        match active {
            ActiveBath::First => &self.a1,
            ActiveBath::Second => &self.a2,
        }
    }

    /// Neither bath coupled.
    pub fn free_matrix(&self) -> CouplingMatrix {
        CouplingMatrix::new(&self.tp, vec![block(&self.bath1, false), block(&self.bath2, false)])
    }

    /// Both baths coupled at once.
    pub fn simultaneous_matrix(&self) -> CouplingMatrix {
        CouplingMatrix::new(&self.tp, vec![block(&self.bath1, true), block(&self.bath2, true)])
    }

    pub fn default_step_size(&self) -> f64 {
        default_step_size(&self.a1, &self.a2)
    }
}

/// Reusable RK4 work buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// `v ← v + dt (k₁ + 2k₂ + 2k₃ + k₄)/6` in place.
    pub fn step(&mut self, a: &CouplingMatrix, v: &mut [f64], dt: f64) {
        let half = 0.5 * dt;
        a.apply(v, &mut self.k1);
        for ((t, x), k) in self.tmp.iter_mut().zip(v.iter()).zip(&self.k1) {
            *t = x + half * k;
        }
        a.apply(&self.tmp, &mut self.k2);
        for ((t, x), k) in self.tmp.iter_mut().zip(v.iter()).zip(&self.k2) {
            *t = x + half * k;
        }
        a.apply(&self.tmp, &mut self.k3);
        for ((t, x), k) in self.tmp.iter_mut().zip(v.iter()).zip(&self.k3) {
            *t = x + dt * k;
        }
        a.apply(&self.tmp, &mut self.k4);
        let sixth = dt / 6.0;
        for i in 0..v.len() {
            v[i] += sixth * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// One classical RK4 step of `state` under `active_matrix`.
pub fn rk4_step(active_matrix: &CouplingMatrix, state: &SystemState, dt: f64) -> Result<SystemState> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    if state.dim() != active_matrix.dim() {
        return Err(Error::DimensionMismatch {
            expected: active_matrix.dim(),
            got: state.dim(),
        });
    }
    let mut v = state.coords.clone();
    Rk4::new(v.len()).step(active_matrix, &mut v, dt);
    let time = state.time + dt;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalBlowup { time });
    }
    Ok(SystemState::new(time, v))
}

/// Test-particle observation produced by a switched run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchedSample {
    pub requested_time: f64,
    pub time: f64,
    pub q: f64,
    pub p: f64,
    /// Bath in contact during the step that starts at this sample.
    pub active: ActiveBath,
}

#[derive(Debug, Clone)]
pub struct SwitchedRun {
    pub samples: Vec<SwitchedSample>,
    pub final_state: SystemState,
    pub steps: u64,
    /// Largest distance between a requested and an actual observation time.
    pub max_snap: f64,
}

/// Integrates from `initial` (taken to be at its own `time`) with the
/// generators `a_first` / `a_second` alternating per `schedule`.
///
/// Observation times are snapped to the nearest step boundary. The run lasts
/// until `t_final` or the last observation, whichever is later.
pub fn run_switched_matrices(
    a_first: &CouplingMatrix,
    a_second: &CouplingMatrix,
    schedule: &SwitchSchedule,
    initial: &SystemState,
    t_final: f64,
    observation_times: &[f64],
    mut observer: impl FnMut(&SwitchedSample, &[f64]),
) -> Result<SwitchedRun> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::invalid("t_final", "must be positive and finite"));
    }
    if initial.dim() != a_first.dim() || a_first.dim() != a_second.dim() {
        return Err(Error::DimensionMismatch {
            expected: a_first.dim(),
            got: initial.dim(),
        });
    }
    let dt = schedule.step_size;
    let t0 = initial.time;
    let to_step = |t: f64| ((t - t0) / dt).round().max(0.0) as u64;

    let mut targets: Vec<(u64, f64)> = observation_times.iter().map(|&t| (to_step(t), t)).collect();
    targets.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let last_step = targets.last().map_or(0, |t| t.0).max(to_step(t0 + t_final));

    let mut v = initial.coords.clone();
    let mut rk = Rk4::new(v.len());
    let mut samples = Vec::with_capacity(targets.len());
    let mut max_snap: f64 = 0.0;
    let mut next = 0;
    let matrix = |active| match active {
        ActiveBath::First => a_first,
        ActiveBath::Second => a_second,
    };
    let mut record = |step: u64, v: &[f64], next: &mut usize, samples: &mut Vec<SwitchedSample>| -> Result<()> {
        while *next < targets.len() && targets[*next].0 == step {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericalBlowup {
                    time: t0 + step as f64 * dt,
                });
            }
            let time = t0 + step as f64 * dt;
            let sample = SwitchedSample {
                requested_time: targets[*next].1,
                time,
                q: v[0],
                p: v[1],
                active: schedule.active_at_step(step),
            };
            max_snap = max_snap.max((time - sample.requested_time).abs());
            observer(&sample, v);
            samples.push(sample);
            *next += 1;
        }
        Ok(())
    };

    record(0, &v, &mut next, &mut samples)?;
    for step in 0..last_step {
        rk.step(matrix(schedule.active_at_step(step)), &mut v, dt);
        if !(v[0].is_finite() && v[1].is_finite()) {
            return Err(Error::NumericalBlowup {
                time: t0 + (step + 1) as f64 * dt,
            });
        }
        record(step + 1, &v, &mut next, &mut samples)?;
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalBlowup {
            time: t0 + last_step as f64 * dt,
        });
    }
    Ok(SwitchedRun {
        samples,
        final_state: SystemState::new(t0 + last_step as f64 * dt, v),
        steps: last_step,
        max_snap,
    })
}

/// Switched run of a two-bath system from its own initial state.
pub fn run_switched(
    system: &TwoBathSystem,
    schedule: &SwitchSchedule,
    t_final: f64,
    observation_times: &[f64],
    observer: impl FnMut(&SwitchedSample, &[f64]),
) -> Result<SwitchedRun> {
    run_switched_matrices(
        &system.a1,
        &system.a2,
        schedule,
        &system.initial_state(),
        t_final,
        observation_times,
        observer,
    )
}

/// Constant-coupling RK4 run (single-bath mode).
pub fn run_rk4(
    a: &CouplingMatrix,
    initial: &SystemState,
    dt: f64,
    t_final: f64,
    observation_times: &[f64],
) -> Result<SwitchedRun> {
    let schedule = SwitchSchedule::continuous(dt)?;
    run_switched_matrices(a, a, &schedule, initial, t_final, observation_times, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::realization_from_parts;
    use crate::exact::build_coupling_matrix;

    fn bath(freqs: &[f64], mass: f64) -> BathRealization {
        let n = freqs.len();
        let energies: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.37).collect();
        let phases: Vec<f64> = (0..n).map(|i| 0.9 * i as f64 + 0.1).collect();
        realization_from_parts(mass, freqs.to_vec(), energies, &phases, 0)
    }

    fn empty() -> BathRealization {
        realization_from_parts(0.01, vec![], vec![], &[], 0)
    }

    #[test]
    fn schedule_is_a_square_wave() {
        let s = SwitchSchedule::new(2, 0.1, ActiveBath::First).unwrap();
        let seq: Vec<ActiveBath> = (0..8).map(|k| s.active_at_step(k)).collect();
        use ActiveBath::*;
        assert_eq!(seq, vec![First, First, Second, Second, First, First, Second, Second]);
        for k in 0..100 {
            let (a1, a2) = s.alphas(k);
            assert_eq!(a1 + a2, 1.0);
            assert!(a1 == 0.0 || a1 == 1.0);
        }
        assert!(SwitchSchedule::new(0, 0.1, ActiveBath::First).is_err());
        assert!(SwitchSchedule::new(1, 0.0, ActiveBath::First).is_err());
    }

    #[test]
    fn empty_second_bath_reduces_to_single_bath() {
        let tp = TestParticleSpec::new(1.0, 0.6).unwrap();
        let b1 = bath(&[0.3, 0.5, 0.9], 0.02);
        let sys = build_switched_matrices(&tp, &b1, &empty()).unwrap();
        let single = build_coupling_matrix(&tp, &b1.frequencies, 0.02);
        assert_eq!(sys.a1.to_dense(), single.to_dense());
    }

    #[test]
    fn sum_of_switched_matrices_is_simultaneous_coupling() {
        let tp = TestParticleSpec::new(1.0, 0.6).unwrap();
        let sys = build_switched_matrices(&tp, &bath(&[0.3, 0.5], 0.02), &bath(&[0.8, 1.1, 0.4], 0.05)).unwrap();
        let lhs = sys.a1.to_dense() + sys.a2.to_dense() - sys.free_matrix().to_dense();
        let rhs = sys.simultaneous_matrix().to_dense();
        assert!((lhs - rhs).amax() < 1e-15);
    }

    #[test]
    fn zero_generator_leaves_state_unchanged() {
        let tp = TestParticleSpec {
            mass: 1.0,
            omega: 0.0,
            q0: 0.0,
            p0: 0.0,
        };
        let a = build_coupling_matrix(&tp, &[], 1.0);
        let s = SystemState::new(0.0, vec![0.7, 0.0]);
        let next = rk4_step(&a, &s, 0.1).unwrap();
        assert_eq!(next.coords, s.coords);
        assert!(rk4_step(&a, &s, 0.0).is_err());
    }

    #[test]
    fn isolated_oscillator_tracks_cosine() {
        let tp = TestParticleSpec::new(1.0, 1.0).unwrap().with_initial(1.0, 0.0);
        let a = build_coupling_matrix(&tp, &[], 1.0);
        let v0 = SystemState::initial(&tp, &[]);
        let run = run_rk4(&a, &v0, 0.01, 100.0, &[100.0]).unwrap();
        assert_eq!(run.steps, 10_000);
        let q = run.samples[0].q;
        assert!((q - 100f64.cos()).abs() < 1e-6, "{q}");
    }

    #[test]
    fn blow_up_is_reported() {
        let tp = TestParticleSpec::new(1.0, 1.0).unwrap().with_initial(1.0, 0.0);
        let a = build_coupling_matrix(&tp, &[], 1.0);
        let v0 = SystemState::initial(&tp, &[]);
        // dt far beyond the RK4 stability limit
        let err = run_rk4(&a, &v0, 10.0, 1e6, &[]).unwrap_err();
        assert!(matches!(err, Error::NumericalBlowup { .. }));
    }

    #[test]
    fn observation_times_snap_to_nearest_step() {
        let tp = TestParticleSpec::new(1.0, 1.0).unwrap().with_initial(1.0, 0.0);
        let a = build_coupling_matrix(&tp, &[], 1.0);
        let v0 = SystemState::initial(&tp, &[]);
        let run = run_rk4(&a, &v0, 0.1, 1.0, &[0.26, 0.04, 0.5]).unwrap();
        let times: Vec<f64> = run.samples.iter().map(|s| s.time).collect();
        assert!((times[0] - 0.0).abs() < 1e-12);
        assert!((times[1] - 0.3).abs() < 1e-12);
        assert!((times[2] - 0.5).abs() < 1e-12);
        assert!(run.max_snap <= 0.05 + 1e-12);
    }
}
