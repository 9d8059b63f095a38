//! The virtual density-matrix ensemble.
//!
//! The physical reduced state lives in the all-`X` slot; every other slot holds
//! the history-weighted amplitude of photons that are still pending inside the
//! memory window. One time step is a fixed sparse linear map on the stacked
//! ensemble, built once per run.

mod label;
mod operator;

pub use label::{conjugate_index, label_count, Trit, TrinaryLabel};
pub use operator::{BlockKind, EvolutionOperator, FreshCorrection};

use crate::algebra::{flatten, left_super, sigma, unflatten, DensityMatrix, FlattenedState};
use crate::error::{Error, Result};
use crate::kernels::{sample_kernel, KernelSamples, KernelSpec};

#[derive(Clone, Debug)]
pub struct VirtualEnsemble {
    blocks: Vec<FlattenedState>,
    scratch: Vec<FlattenedState>,
    rotated: Vec<FlattenedState>,
    step_index: usize,
    dt: f64,
}

impl VirtualEnsemble {
    /// All slots empty except the physical one.
    pub fn new(rho0: &DensityMatrix, slots: usize, dt: f64) -> Self {
        let n = label_count(slots);
        let mut blocks = vec![FlattenedState::zeros(); n];
        blocks[0] = flatten(rho0);
        Self::from_blocks(blocks, dt)
    }

    pub fn from_blocks(blocks: Vec<FlattenedState>, dt: f64) -> Self {
        let n = blocks.len();
        Self {
            blocks,
            scratch: vec![FlattenedState::zeros(); n],
            rotated: vec![FlattenedState::zeros(); n],
            step_index: 0,
            dt,
        }
    }

    pub fn blocks(&self) -> &[FlattenedState] {
        &self.blocks
    }

    pub fn block(&self, label: usize) -> DensityMatrix {
        unflatten(&self.blocks[label])
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    pub fn step(&mut self, op: &EvolutionOperator) {
        op.apply_with(&self.blocks, &mut self.rotated, &mut self.scratch);
        std::mem::swap(&mut self.blocks, &mut self.scratch);
        self.step_index += 1;
    }

    /// The physical reduced density matrix.
    pub fn project(&self) -> DensityMatrix {
        unflatten(&self.blocks[0])
    }

    /// Left-multiply every slot by `σ`.
    pub fn apply_lowering(&mut self) {
        let lower = left_super(&sigma());
        for b in &mut self.blocks {
            *b = lower * *b;
        }
    }

    /// `max_l |ρˡ − (ρ^{l̄})†|` with `l̄` the label with `Y ↔ Z` exchanged.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        self.blocks
            .iter()
            .enumerate()
            .map(|(l, b)| {
                let here = unflatten(b).0;
                let mirror = unflatten(&self.blocks[conjugate_index(l)]).0.adjoint();
                crate::algebra::max_abs(&(here - mirror))
            })
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|z| z.norm() == 0.0))
    }
}

/// Sampled `(t, ρ)` pairs together with the ensemble at the final step.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<(f64, DensityMatrix)>,
    pub state: VirtualEnsemble,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|(t, _)| *t).collect()
    }

    pub fn states(&self) -> Vec<DensityMatrix> {
        self.samples.iter().map(|(_, r)| *r).collect()
    }
}

/// Run `n_steps` from `rho0`, recording the projection every `record_every`
/// steps (and always at the start and at the final step).
pub fn propagate(
    rho0: &DensityMatrix,
    op: &EvolutionOperator,
    n_steps: usize,
    record_every: usize,
) -> Trajectory {
    let state = VirtualEnsemble::new(rho0, op.slots(), op.dt());
    continue_propagation(state, op, n_steps, record_every)
}

/// Continue an existing ensemble for `n_steps` more steps.
pub fn continue_propagation(
    mut state: VirtualEnsemble,
    op: &EvolutionOperator,
    n_steps: usize,
    record_every: usize,
) -> Trajectory {
    let every = record_every.max(1);
    let mut samples = vec![(state.time(), state.project())];
    for k in 1..=n_steps {
        state.step(op);
        if k % every == 0 || k == n_steps {
            samples.push((state.time(), state.project()));
        }
    }
    Trajectory { samples, state }
}

/// Kernel, window, drive and step size of one simulation.
#[derive(Clone, Debug)]
pub struct Model {
    pub kernel: KernelSpec,
    pub rabi: f64,
    pub dt: f64,
    pub slots: usize,
}

impl Model {
    pub fn samples(&self) -> Result<KernelSamples> {
        sample_kernel(&self.kernel, self.dt, self.slots)
    }

    pub fn operator(&self) -> Result<EvolutionOperator> {
        EvolutionOperator::build(&self.samples()?, self.rabi, self.dt, self.slots)
    }

    pub fn steps_for(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("duration must be non-negative, got {t}")));
        }
        Ok((t / self.dt).round() as usize)
    }
}
