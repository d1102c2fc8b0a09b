//! Simulation of slow quenches in the transverse-field Ising chain.
//!
//! The pipeline prepares a paramagnetic ground state with [`dmrg`], drives it
//! through the critical point with [`tebd`], and measures the quantum Fisher
//! information density and related observables ([`observables`]). The
//! [`oracles`] module holds independent exact engines and [`fit`] turns
//! sweeps of records into scaling exponents.

extern crate blas_src;

pub mod dmrg;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod observables;
pub mod oracles;
pub mod tebd;

pub use num_complex::Complex64 as C64;

pub use dmrg::{ground_state, DmrgConfig, DmrgTrace};
pub use error::{Error, Result};
pub use fit::{
    finite_size_extrapolate, kz_predict, power_law_fit, FiniteSizeFit, KzPrediction, LinearFit, PowerLawFit,
};
pub use linalg::{svd_truncated, DenseTensor, SvdResult};
pub use model::{Boundary, ModelParams, QuenchSchedule, ScheduleShape};
pub use mps::{Mps, Truncation};
pub use observables::{
    correlation_profile, defect_density, entangled_particle_witness, measure, qfi_density, ObservableRecord,
    RunMeta,
};
pub use tebd::{evolve, EvolutionTrace, TebdConfig};
