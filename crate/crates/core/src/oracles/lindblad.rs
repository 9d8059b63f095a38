//! Atom plus one damped cavity mode under a Born–Markov master equation, in the
//! frame rotating at the atomic frequency:
//!
//! `H = (Ω/2)σ_x − Δc a†a + i g (a†σ − σ†a)`, dissipator `κ_c D[a]`.
//!
//! Eliminating the mode reproduces the cavity memory function
//! `g² exp(iΔc τ − κ_c τ / 2)`, which fixes `g² = γ` and `κ_c = κ²`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{sigma, sigma_dag, sigma_x, DensityMatrix, Op2, C64};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::observables::{detect_steady_state, CorrelationTrace};

pub type FullState = DMatrix<C64>;

/// Largest population tolerated in the highest retained Fock level.
pub const FOCK_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LindbladSystem {
    pub fock_cutoff: usize,
    pub coupling: f64,
    pub detuning: f64,
    pub cavity_decay: f64,
    pub rabi: f64,
}

#[derive(Clone, Debug)]
pub struct LindbladTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<FullState>,
}

impl LindbladTrajectory {
    pub fn atom_states(&self) -> Vec<DensityMatrix> {
        self.states.iter().map(atom_state).collect()
    }

    pub fn excited_populations(&self) -> Vec<f64> {
        self.states.iter().map(|r| atom_state(r).get(0, 0).re).collect()
    }

    pub fn last(&self) -> &FullState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

struct Operators {
    h_eff: DMatrix<C64>,
    a: DMatrix<C64>,
    a_dag: DMatrix<C64>,
}

fn embed_atom(op: &Op2, levels: usize) -> DMatrix<C64> {
    let atom = DMatrix::from_fn(2, 2, |i, j| op[(i, j)]);
    atom.kronecker(&DMatrix::identity(levels, levels))
}

impl LindbladSystem {
    /// Baseline whose eliminated cavity reproduces `spec` exactly.
    pub fn matched(spec: &KernelSpec, rabi: f64, fock_cutoff: usize) -> Result<Self> {
        match *spec {
            KernelSpec::Cavity { gamma, detuning, kappa2 } => {
                spec.validate()?;
                let sys = Self {
                    fock_cutoff,
                    coupling: gamma.sqrt(),
                    detuning,
                    cavity_decay: kappa2,
                    rabi,
                };
                sys.validate()?;
                Ok(sys)
            }
            _ => Err(Error::InvalidParameter("the master-equation baseline needs a cavity kernel".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fock_cutoff < 4 {
            return Err(Error::InvalidParameter(format!(
                "Fock cutoff must be at least 4, got {}",
                self.fock_cutoff
            )));
        }
        if !(self.cavity_decay >= 0.0) || !self.coupling.is_finite() || !self.rabi.is_finite() {
            return Err(Error::InvalidParameter("invalid master-equation parameters".into()));
        }
        Ok(())
    }

    /// The memory function obtained by eliminating the mode.
    pub fn kernel(&self, tau: f64) -> C64 {
        self.coupling.powi(2) * C64::new(-0.5 * self.cavity_decay * tau, self.detuning * tau).exp()
    }

    pub fn levels(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn dimension(&self) -> usize {
        2 * self.levels()
    }

    fn operators(&self) -> Operators {
        let n = self.levels();
        let lower = DMatrix::from_fn(n, n, |i, j| {
            if j == i + 1 {
                C64::new((j as f64).sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let a = DMatrix::<C64>::identity(2, 2).kronecker(&lower);
        let a_dag = a.adjoint();
        let sm = embed_atom(&sigma(), n);
        let sp = embed_atom(&sigma_dag(), n);
        let number = &a_dag * &a;
        let i = C64::new(0.0, 1.0);
        let h = embed_atom(&sigma_x(), n) * C64::new(0.5 * self.rabi, 0.0)
            - &number * C64::new(self.detuning, 0.0)
            + (&a_dag * &sm - &sp * &a) * (i * self.coupling);
        let h_eff = h - number * C64::new(0.0, 0.5 * self.cavity_decay);
        Operators { h_eff, a, a_dag }
    }

    /// `atom ⊗ |photons⟩⟨photons|`.
    pub fn product_state(&self, atom: &DensityMatrix, photons: usize) -> Result<FullState> {
        if photons > self.fock_cutoff {
            return Err(Error::InvalidParameter(format!(
                "{photons} photons exceed the Fock cutoff {}",
                self.fock_cutoff
            )));
        }
        let n = self.levels();
        let mut field = DMatrix::zeros(n, n);
        field[(photons, photons)] = C64::new(1.0, 0.0);
        Ok(DMatrix::from_fn(2, 2, |i, j| atom.0[(i, j)]).kronecker(&field))
    }

    fn rhs(&self, ops: &Operators, rho: &FullState) -> FullState {
        let i = C64::new(0.0, 1.0);
        let coherent = (&ops.h_eff * rho - rho * ops.h_eff.adjoint()) * (-i);
        coherent + (&ops.a * rho * &ops.a_dag) * C64::new(self.cavity_decay, 0.0)
    }

    /// Fixed-step RK4 with `substeps` steps per output interval `dt`.
    pub fn evolve(
        &self,
        rho0: &FullState,
        dt: f64,
        n_steps: usize,
        substeps: usize,
    ) -> Result<LindbladTrajectory> {
        self.validate()?;
        if rho0.nrows() != self.dimension() || rho0.ncols() != self.dimension() {
            return Err(Error::Dimension { expected: self.dimension(), got: rho0.nrows() });
        }
        let ops = self.operators();
        let h = dt / substeps.max(1) as f64;
        let mut rho = rho0.clone();
        let mut times = vec![0.0];
        let mut states = vec![rho.clone()];
        for step in 1..=n_steps {
            for _ in 0..substeps.max(1) {
                let k1 = self.rhs(&ops, &rho);
                let k2 = self.rhs(&ops, &(&rho + &k1 * C64::new(0.5 * h, 0.0)));
                let k3 = self.rhs(&ops, &(&rho + &k2 * C64::new(0.5 * h, 0.0)));
                let k4 = self.rhs(&ops, &(&rho + &k3 * C64::new(h, 0.0)));
                rho += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
            }
            self.check_cutoff(&rho)?;
            times.push(step as f64 * dt);
            states.push(rho.clone());
        }
        Ok(LindbladTrajectory { times, states })
    }

    fn check_cutoff(&self, rho: &FullState) -> Result<()> {
        let top = self.fock_cutoff;
        let n = self.levels();
        let population = rho[(top, top)].re + rho[(n + top, n + top)].re;
        if population.abs() > FOCK_TOLERANCE {
            return Err(Error::FockCutoff { population, limit: FOCK_TOLERANCE });
        }
        Ok(())
    }

    /// Propagate from `rho0` for `n_steps` and confirm the atom has settled.
    pub fn steady_state(
        &self,
        rho0: &FullState,
        dt: f64,
        n_steps: usize,
        substeps: usize,
        rel_tol: f64,
        window: usize,
    ) -> Result<FullState> {
        let run = self.evolve(rho0, dt, n_steps, substeps)?;
        detect_steady_state(&run.atom_states(), rel_tol, window)?;
        Ok(run.last().clone())
    }

    /// `⟨σ†(τ)σ⟩ − ⟨σ†⟩⟨σ⟩` by quantum regression from `rho_ss`.
    pub fn correlation(
        &self,
        rho_ss: &FullState,
        dt: f64,
        n_steps: usize,
        substeps: usize,
    ) -> Result<CorrelationTrace> {
        let n = self.levels();
        let sm = embed_atom(&sigma(), n);
        let sp = embed_atom(&sigma_dag(), n);
        let atom = atom_state(rho_ss);
        let coherence_ss = (sigma() * atom.0).trace();
        let raised_ss = (sigma_dag() * atom.0).trace();
        let excited_ss = atom.get(0, 0).re;
        let seed = &sm * rho_ss;
        let run = self.evolve(&seed, dt, n_steps, substeps)?;
        let coherent = raised_ss * coherence_ss;
        let values = run.states.iter().map(|x| (&sp * x).trace() - coherent).collect();
        Ok(CorrelationTrace {
            tau: run.times,
            values,
            subtracted_coherent: true,
            excited_ss,
            coherence_ss,
            steady_index: 0,
        })
    }
}

/// Partial trace over the cavity.
pub fn atom_state(rho: &FullState) -> DensityMatrix {
    let n = rho.nrows() / 2;
    let mut out = Op2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = (0..n).map(|k| rho[(i * n + k, j * n + k)]).sum();
        }
    }
    DensityMatrix(out)
}

/// Mean photon number in the cavity.
pub fn photon_number(rho: &FullState) -> f64 {
    let n = rho.nrows() / 2;
    (0..n).map(|k| k as f64 * (rho[(k, k)].re + rho[(n + k, n + k)].re)).sum()
}

/// Trajectory of the atomic reduced state from `atom ⊗ |0⟩⟨0|`, sampled every `dt`.
pub fn lindblad_baseline(
    sys: &LindbladSystem,
    rho0: &DensityMatrix,
    dt: f64,
    n_steps: usize,
) -> Result<LindbladTrajectory> {
    let full = sys.product_state(rho0, 0)?;
    sys.evolve(&full, dt, n_steps, 10)
}
