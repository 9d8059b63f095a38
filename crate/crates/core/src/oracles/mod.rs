//! Independent reference solvers used to check the ensemble.

pub mod decay;
pub mod discrete;
pub mod lindblad;

pub use decay::{decay_amplitude, decay_direct, decay_markovian, DecayAmplitude};
pub use discrete::{discrete_mode_oracle, fit_modes, nnls, DiscreteModeConfig, DiscreteModeRun, ModeSet};
pub use lindblad::{atom_state, lindblad_baseline, photon_number, LindbladSystem, LindbladTrajectory};
