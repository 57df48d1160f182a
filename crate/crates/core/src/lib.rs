//! Simulation and analysis of a harmonic test particle coupled to one or two
//! finite baths of harmonic oscillators.
//!
//! The single-bath system is solved exactly through its normal modes
//! ([`exact`]); intermittent contact with two baths is integrated with a
//! switched RK4 scheme ([`switched`]). Test-particle energies sampled at
//! random times are histogrammed and fitted to a Boltzmann law ([`stats`]),
//! and [`experiments`] strings these together into frequency sweeps.

pub mod bath;
pub mod config;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod io;
pub mod model;
pub mod oracles;
pub mod rng;
pub mod stats;
pub mod switched;

pub use bath::realize_bath;
pub use error::{Error, Result};
pub use exact::{build_coupling_matrix, diagonalize, CouplingBlock, CouplingMatrix, EigenPropagator};
pub use model::{
    test_particle_energy, total_energy, BathRealization, BathSpec, DensityOfStates, DosFamily,
    EnergyDefinition, SystemState, TestParticleSpec,
};
pub use rng::RngStream;
pub use stats::{EnergyHistogram, SamplingPlan, TemperatureFit};
pub use switched::{ActiveBath, SwitchSchedule, TwoBathSystem};
