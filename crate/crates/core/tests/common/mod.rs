#![allow(dead_code)]

//! Quadrature and small reference solvers shared by the integration tests.

use nmrf_core::algebra::{sigma, sigma_dag, sigma_x, DensityMatrix, Op2, C64};

fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let h = b - a;
    let left = h / 12.0 * (fa + 4.0 * flm + fm);
    let right = h / 12.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

pub fn simpson_complex<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, tol: f64) -> C64 {
    C64::new(simpson(|x| f(x).re, a, b, tol), simpson(|x| f(x).im, a, b, tol))
}

/// `∫₀^∞ cos(xτ) g(x) dx` for slowly decaying even-symmetric `g`: integrate
/// half-periods and accelerate the alternating partial sums by repeated averaging.
pub fn oscillatory_cosine<F: Fn(f64) -> f64>(g: F, tau: f64, tol: f64) -> f64 {
    let half = std::f64::consts::PI / tau;
    let piece = |k: usize| {
        // Start from the first zero of the cosine so the pieces alternate.
        let (a, b) = if k == 0 { (0.0, 0.5 * half) } else { ((k as f64 - 0.5) * half, (k as f64 + 0.5) * half) };
        simpson(|x| (x * tau).cos() * g(x), a, b, tol)
    };
    let skip = 40;
    let mut sum: f64 = (0..skip).map(piece).sum();
    let mut partial = Vec::new();
    for k in skip..skip + 30 {
        sum += piece(k);
        partial.push(sum);
    }
    while partial.len() > 1 {
        partial = partial.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    partial[0]
}

/// Two-level Born–Markov master equation `−i[(Ω/2)σ_x + Δσ†σ, ρ] + γ D[σ]ρ` stepped with RK4.
pub struct MarkovAtom {
    pub rabi: f64,
    pub gamma: f64,
    pub shift: f64,
}

impl MarkovAtom {
    fn rhs(&self, rho: &Op2) -> Op2 {
        let (s, sd) = (sigma(), sigma_dag());
        let h = sigma_x() * C64::new(0.5 * self.rabi, 0.0) + sd * s * C64::new(self.shift, 0.0);
        let i = C64::new(0.0, 1.0);
        let g = C64::new(self.gamma, 0.0);
        (h * rho - rho * h) * (-i) + (s * rho * sd - (sd * s * rho + rho * sd * s) * C64::new(0.5, 0.0)) * g
    }

    pub fn evolve(&self, rho0: &Op2, dt: f64, n: usize, substeps: usize) -> Vec<Op2> {
        let h = dt / substeps as f64;
        let mut rho = *rho0;
        let mut out = vec![rho];
        for _ in 0..n {
            for _ in 0..substeps {
                let k1 = self.rhs(&rho);
                let k2 = self.rhs(&(rho + k1 * C64::new(0.5 * h, 0.0)));
                let k3 = self.rhs(&(rho + k2 * C64::new(0.5 * h, 0.0)));
                let k4 = self.rhs(&(rho + k3 * C64::new(h, 0.0)));
                rho += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
            }
            out.push(rho);
        }
        out
    }

    /// `⟨σ†(τ)σ⟩ − |⟨σ⟩|²` by regression from the long-time state.
    pub fn correlation(&self, dt: f64, n: usize, substeps: usize) -> Vec<C64> {
        let settle = self.evolve(&DensityMatrix::ground().0, dt, (60.0 / (self.gamma * dt)) as usize, substeps);
        let ss = *settle.last().unwrap();
        let coh = (sigma() * ss).trace();
        let raised = (sigma_dag() * ss).trace();
        self.evolve(&(sigma() * ss), dt, n, substeps)
            .iter()
            .map(|x| (sigma_dag() * x).trace() - raised * coh)
            .collect()
    }
}

pub fn max_deviation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
