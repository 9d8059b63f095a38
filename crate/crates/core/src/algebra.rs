//! Two-level operator algebra and the column-stacked superoperator representation.
//!
//! Basis order is (excited, ground): index 0 is `|e⟩`, index 1 is `|g⟩`, so the
//! lowering operator is `σ = |g⟩⟨e|` and the excited population is the first
//! entry of a flattened density matrix.
//!
//! A density matrix is flattened column-major: entry `2j + i` of the 4-vector
//! holds `ρ[(i, j)]`. Under this convention `vec(Aρ) = (I ⊗ A) vec(ρ)` and
//! `vec(ρA) = (Aᵀ ⊗ I) vec(ρ)`.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

/// A 2×2 complex operator on the atom.
pub type Op2 = Matrix2<C64>;

/// A 4×4 superoperator acting on flattened density matrices.
pub type Superop4 = Matrix4<C64>;

/// A column-stacked density matrix.
pub type FlattenedState = Vector4<C64>;

pub const EXCITED: usize = 0;
pub const GROUND: usize = 1;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// `σ = |g⟩⟨e|`.
pub fn sigma() -> Op2 {
    Op2::new(ZERO, ZERO, ONE, ZERO)
}

/// `σ† = |e⟩⟨g|`.
pub fn sigma_dag() -> Op2 {
    Op2::new(ZERO, ONE, ZERO, ZERO)
}

/// `σ_z = |e⟩⟨e| − |g⟩⟨g|`.
pub fn sigma_z() -> Op2 {
    Op2::new(ONE, ZERO, ZERO, -ONE)
}

/// `σ_x = σ + σ†`.
pub fn sigma_x() -> Op2 {
    Op2::new(ZERO, ONE, ONE, ZERO)
}

pub fn identity2() -> Op2 {
    Op2::identity()
}

/// Reduced state of the two-level atom (or the content of one virtual slot).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix(pub Op2);

impl DensityMatrix {
    pub fn excited() -> Self {
        Self(sigma_dag() * sigma())
    }

    pub fn ground() -> Self {
        Self(sigma() * sigma_dag())
    }

    pub fn maximally_mixed() -> Self {
        Self(Op2::identity() * C64::new(0.5, 0.0))
    }

    pub fn zero() -> Self {
        Self(Op2::zeros())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(self.0 - self.0.adjoint()))
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }
}

impl From<Op2> for DensityMatrix {
    fn from(m: Op2) -> Self {
        Self(m)
    }
}

pub fn max_abs<R: nalgebra::Dim, Cc: nalgebra::Dim, S>(m: &nalgebra::Matrix<C64, R, Cc, S>) -> f64
where
    S: nalgebra::RawStorage<C64, R, Cc>,
{
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn flatten(rho: &DensityMatrix) -> FlattenedState {
    FlattenedState::new(rho.0[(0, 0)], rho.0[(1, 0)], rho.0[(0, 1)], rho.0[(1, 1)])
}

pub fn unflatten(v: &FlattenedState) -> DensityMatrix {
    DensityMatrix(Op2::new(v[0], v[2], v[1], v[3]))
}

fn kron(a: &Op2, b: &Op2) -> Superop4 {
    let mut out = Superop4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Superoperator of `ρ ↦ Aρ` (unprimed operators).
pub fn left_super(a: &Op2) -> Superop4 {
    kron(&Op2::identity(), a)
}

/// Superoperator of `ρ ↦ ρA` (primed operators). Note the reversed composition:
/// `right_super(A) · right_super(B) = right_super(B·A)`.
pub fn right_super(a: &Op2) -> Superop4 {
    kron(&a.transpose(), &Op2::identity())
}

/// `exp(−iΩΔt σ_x / 2)`, the free propagator of the resonantly driven atom in
/// the frame rotating at the atomic frequency.
pub fn u0_propagator(rabi: f64, dt: f64) -> Op2 {
    let half = 0.5 * rabi * dt;
    Op2::identity() * C64::new(half.cos(), 0.0) - sigma_x() * (I * half.sin())
}

/// Superoperator of `ρ ↦ U ρ U†`.
pub fn unitary_super(u: &Op2) -> Superop4 {
    left_super(u) * right_super(&u.adjoint())
}
