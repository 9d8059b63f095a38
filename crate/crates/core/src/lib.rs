//! Non-Markovian propagation of a driven two-level emitter coupled to a
//! structured photon continuum.
//!
//! The reservoir enters only through its memory function. Time is discretised
//! and the memory truncated to `M` steps; the reduced density matrix is then
//! carried forward together with `3^M` virtual density matrices that track
//! photons emitted but not yet reabsorbed or lost. The extended system evolves
//! under a fixed sparse linear map, so populations, two-time correlations and
//! spectra follow from ordinary Markovian stepping.

pub mod algebra;
pub mod ensemble;
pub mod error;
pub mod kernels;
pub mod observables;
pub mod oracles;

pub use algebra::{DensityMatrix, FlattenedState, Op2, Superop4, C64};
pub use ensemble::{propagate, EvolutionOperator, Model, Trajectory, VirtualEnsemble};
pub use error::{Error, Result};
pub use kernels::{sample_kernel, KernelSamples, KernelSpec};
