//! Independent ground-truth engines used to validate the MPS pipeline.
//!
//! * [`free_fermion`]: exact momentum-space mode dynamics (any `N`, defect
//!   densities only).
//! * [`dense`]: full state-vector simulation of the identical Trotter circuit
//!   and exact ground states (`N ≤ 12`).

pub mod dense;
pub mod free_fermion;

pub use dense::{dense_evolve, dense_ground_state, dense_quench, DenseState, MAX_DENSE_SITES};
pub use free_fermion::{
    bdg_evolve_mode, defect_density_ff, excitation_probability, lz_probability, mode_excitation, mode_sum,
    BdgModeState, ChainSize, OdeOptions,
};
