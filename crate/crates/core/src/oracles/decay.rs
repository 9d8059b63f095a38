//! Single-excitation amplitude `da/dt = −∫₀ᵗ f(t − s) a(s) ds` on the same
//! window coefficients the ensemble uses, stepped with Euler.

use serde::{Deserialize, Serialize};

use crate::algebra::C64;
use crate::kernels::KernelSamples;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayAmplitude {
    pub dt: f64,
    /// `a(nΔt)`, `a(0) = 1`.
    pub a: Vec<C64>,
    /// Largest difference between the direct window sum and the auxiliary-variable form.
    pub rewrite_defect: f64,
}

impl DecayAmplitude {
    pub fn times(&self) -> Vec<f64> {
        (0..self.a.len()).map(|n| n as f64 * self.dt).collect()
    }

    /// `|a|²`.
    pub fn populations(&self) -> Vec<f64> {
        self.a.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// `a_{n+1} = a_n − Δt² Σ_{m=0}^{min(M−1, n)} F_m a_{n−m}`.
pub fn decay_direct(samples: &KernelSamples, n_steps: usize) -> Vec<C64> {
    let dt2 = samples.dt * samples.dt;
    let mut a = Vec::with_capacity(n_steps + 1);
    a.push(C64::new(1.0, 0.0));
    for n in 0..n_steps {
        let memory: C64 = samples
            .coeffs
            .iter()
            .take(n + 1)
            .enumerate()
            .map(|(m, f)| f * a[n - m])
            .sum();
        a.push(a[n] - memory * dt2);
    }
    a
}

/// The same recursion written as a Markovian system: the history enters only
/// through `M − 1` auxiliary amplitudes `bᵏ` that shift down one slot per step.
pub fn decay_markovian(samples: &KernelSamples, n_steps: usize) -> Vec<C64> {
    let dt2 = samples.dt * samples.dt;
    let f = &samples.coeffs;
    let m = f.len();
    let mut c = C64::new(1.0, 0.0);
    // b[k - 1] holds bᵏ for k = 1..M−1.
    let mut b = vec![C64::new(0.0, 0.0); m.saturating_sub(1)];
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(c);
    for _ in 0..n_steps {
        let next_c = c * (C64::new(1.0, 0.0) - f[0] * dt2) + b.first().copied().unwrap_or_default();
        for k in 1..m {
            let carried = if k + 1 < m { b[k] } else { C64::new(0.0, 0.0) };
            b[k - 1] = carried - f[k] * dt2 * c;
        }
        c = next_c;
        out.push(c);
    }
    out
}

/// Run both forms and keep the direct one.
pub fn decay_amplitude(samples: &KernelSamples, n_steps: usize) -> DecayAmplitude {
    let a = decay_direct(samples, n_steps);
    let rewrite = decay_markovian(samples, n_steps);
    let rewrite_defect = a.iter().zip(&rewrite).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    DecayAmplitude { dt: samples.dt, a, rewrite_defect }
}
