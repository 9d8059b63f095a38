//! Memory functions of the reservoir and the quadrature rules that turn them
//! into per-step window coefficients.
//!
//! Coefficient convention: `KernelSamples::coeffs[n]` is the weighted sample
//! `F_n` such that `Σ_n Δt·F_n·x(t − nΔt)` approximates `∫₀^{T_m} f(τ) x(t − τ) dτ`
//! with `T_m = (M − 1)Δt`. Consumers apply exactly one factor of `Δt` per
//! coefficient. For the trapezoid rule `F_n = W_n f(nΔt)` with dimensionless
//! `W_n`; for the moment rule the weights carry units of time and are divided
//! by `Δt` before storage.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::algebra::C64;
use crate::error::{Error, Result};

/// Reservoir memory function, in the frame rotating at the atomic frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    /// Single cavity mode leaking into a flat continuum:
    /// `γ·exp(iΔc·τ − κ²τ/2)` with `Δc = ω₀ − ν`.
    Cavity {
        gamma: f64,
        detuning: f64,
        kappa2: f64,
    },
    /// Anisotropic band edge with a high-frequency cutoff:
    /// `βλ^{3/2} e^{i(δτ + π/4)} / (1 + λτ)^{3/2}` with `δ = ω₀ − ω_g`.
    Bandgap { beta: f64, lambda: f64, delta: f64 },
    /// Born–Markov limit `γ·δ(τ)`; only the origin contributes.
    Flat { gamma: f64 },
}

impl KernelSpec {
    /// Band-gap kernel parametrised by its Born–Markov rate instead of `β`.
    pub fn bandgap_with_rate(gamma: f64, lambda: f64, delta: f64) -> Self {
        KernelSpec::Bandgap {
            beta: gamma / (2.0_f64.powf(1.5) * lambda.sqrt()),
            lambda,
            delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            KernelSpec::Cavity { gamma, detuning, kappa2 } => {
                positive("gamma", gamma)?;
                positive("kappa2", kappa2)?;
                if !detuning.is_finite() {
                    return Err(Error::InvalidParameter("cavity detuning must be finite".into()));
                }
                Ok(())
            }
            KernelSpec::Bandgap { beta, lambda, delta } => {
                positive("beta", beta)?;
                positive("lambda", lambda)?;
                if !delta.is_finite() {
                    return Err(Error::InvalidParameter("band-gap detuning must be finite".into()));
                }
                Ok(())
            }
            KernelSpec::Flat { gamma } => positive("gamma", gamma),
        }
    }

    /// Value of the memory function at lag `tau ≥ 0`. The flat kernel is a
    /// distribution and has no pointwise value; it returns `None`.
    pub fn eval(&self, tau: f64) -> Result<Option<C64>> {
        match *self {
            KernelSpec::Cavity { gamma, detuning, kappa2 } => {
                cavity_kernel(gamma, detuning, kappa2, tau).map(Some)
            }
            KernelSpec::Bandgap { beta, lambda, delta } => {
                bandgap_kernel(beta, lambda, delta, tau).map(Some)
            }
            KernelSpec::Flat { .. } => Ok(None),
        }
    }

    /// Born–Markov damping rate `2 Re ∫₀^∞ f(τ) dτ` (at zero detuning for the band gap).
    pub fn markov_rate(&self) -> f64 {
        match *self {
            KernelSpec::Cavity { gamma, detuning, kappa2 } => {
                // 2 Re[γ / (κ²/2 − iΔc)]
                2.0 * gamma * (0.5 * kappa2) / ((0.5 * kappa2).powi(2) + detuning * detuning)
            }
            KernelSpec::Bandgap { beta, lambda, .. } => born_markov_rate(beta, lambda),
            KernelSpec::Flat { gamma } => gamma,
        }
    }

    /// `|f(T)| / |f(0)|`, the relative size of the kernel at the truncation point.
    pub fn truncation_level(&self, window: f64) -> f64 {
        match *self {
            KernelSpec::Cavity { kappa2, .. } => (-0.5 * kappa2 * window).exp(),
            KernelSpec::Bandgap { lambda, .. } => (1.0 + lambda * window).powf(-1.5),
            KernelSpec::Flat { .. } => 0.0,
        }
    }

    /// Smallest `M` whose window `(M − 1)Δt` brings the kernel below `threshold`
    /// of its value at the origin.
    pub fn window_slots_for(&self, dt: f64, threshold: f64) -> usize {
        let window = match *self {
            KernelSpec::Cavity { kappa2, .. } => -2.0 * threshold.ln() / kappa2,
            KernelSpec::Bandgap { lambda, .. } => (threshold.powf(-2.0 / 3.0) - 1.0) / lambda,
            KernelSpec::Flat { .. } => 0.0,
        };
        (window / dt).ceil() as usize + 1
    }
}

fn check_lag(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("kernel lag must be non-negative, got {tau}")))
    }
}

pub fn cavity_kernel(gamma: f64, detuning: f64, kappa2: f64, tau: f64) -> Result<C64> {
    check_lag(tau)?;
    Ok(gamma * C64::new(-0.5 * kappa2 * tau, detuning * tau).exp())
}

pub fn bandgap_kernel(beta: f64, lambda: f64, delta: f64, tau: f64) -> Result<C64> {
    check_lag(tau)?;
    let modulus = beta * lambda.powf(1.5) * (1.0 + lambda * tau).powf(-1.5);
    Ok(modulus * C64::new(0.0, delta * tau + FRAC_PI_4).exp())
}

/// `γ = 2^{3/2} β √λ`.
pub fn born_markov_rate(beta: f64, lambda: f64) -> f64 {
    2.0_f64.powf(1.5) * beta * lambda.sqrt()
}

/// Trapezoid weights on `M` mesh points: `(1/2, 1, …, 1, 1/2)`.
pub fn trapezoid_weights(m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("trapezoid rule needs M ≥ 2, got {m}")));
    }
    let mut w = vec![1.0; m];
    w[0] = 0.5;
    w[m - 1] = 0.5;
    Ok(w)
}

/// Moments `(w₀ⁿ, w₁ⁿ)` of the weight function `(1 + λτ)^{-3/2}` over
/// `[nΔt, (n+1)Δt]`, with `w_j^n = Δt^{-j} ∫ τ^j (1 + λτ)^{-3/2} dτ`.
pub fn weight_moments(lambda: f64, dt: f64, n: usize) -> (f64, f64) {
    let (sa, sb) = interval_roots(lambda, dt, n);
    let d = root_gap(lambda, dt, sa, sb);
    let w0 = 2.0 / lambda * d / (sa * sb);
    // Antiderivative of τ(1+λτ)^{-3/2} is (2/λ²)(√s + 1/√s), s = 1 + λτ.
    let w1 = 2.0 / (lambda * lambda * dt) * (d - d / (sa * sb));
    (w0, w1)
}

/// `√(1 + λnΔt)` and `√(1 + λ(n+1)Δt)`.
fn interval_roots(lambda: f64, dt: f64, n: usize) -> (f64, f64) {
    let a = n as f64 * dt;
    let b = (n + 1) as f64 * dt;
    ((1.0 + lambda * a).sqrt(), (1.0 + lambda * b).sqrt())
}

/// `√s_b − √s_a` without cancellation: `(s_b − s_a) / (√s_b + √s_a)` and `s_b − s_a = λΔt`.
fn root_gap(lambda: f64, dt: f64, sa: f64, sb: f64) -> f64 {
    lambda * dt / (sa + sb)
}

/// Product-trapezoid weights that integrate `g(τ)(1 + λτ)^{-3/2}` exactly for
/// `g` piecewise linear on the mesh `τ_n = nΔt`, `n = 0..M`. Carries units of time.
///
/// Each interval contributes a left hat `(n+1)w₀ⁿ − w₁ⁿ` to node `n` and a right
/// hat `w₁ⁿ − n·w₀ⁿ` to node `n+1`. Both hats are evaluated in a form that
/// avoids the cancellation of the raw moment combination at large `λΔt`.
pub fn moment_weights(lambda: f64, dt: f64, m: usize) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "moment weights need λ > 0 and Δt > 0, got λ = {lambda}, Δt = {dt}"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidParameter(format!("moment rule needs M ≥ 2, got {m}")));
    }
    let scale = 2.0 / (lambda * lambda * dt);
    let mut w = vec![0.0; m];
    for n in 0..m - 1 {
        let (sa, sb) = interval_roots(lambda, dt, n);
        let d = root_gap(lambda, dt, sa, sb);
        let d2 = d * d;
        w[n] += scale * d2 / sa;
        w[n + 1] += scale * d2 / sb;
    }
    Ok(w)
}

/// Weighted window coefficients for one memory window of `M` slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSamples {
    pub coeffs: Vec<C64>,
    pub dt: f64,
}

impl KernelSamples {
    pub fn zeros(m: usize, dt: f64) -> Self {
        Self { coeffs: vec![C64::new(0.0, 0.0); m], dt }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn window(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.dt
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|z| *z == C64::new(0.0, 0.0))
    }
}

pub fn sample_kernel(spec: &KernelSpec, dt: f64, m: usize) -> Result<KernelSamples> {
    spec.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("Δt must be positive, got {dt}")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("window must hold at least one slot".into()));
    }
    let coeffs = match *spec {
        KernelSpec::Flat { gamma } => {
            // ∫₀ᵗ γδ(t − s) ds = γ/2 lands entirely on the origin.
            let mut c = vec![C64::new(0.0, 0.0); m];
            c[0] = C64::new(0.5 * gamma / dt, 0.0);
            c
        }
        KernelSpec::Cavity { gamma, detuning, kappa2 } => trapezoid_weights(m)?
            .iter()
            .enumerate()
            .map(|(n, w)| cavity_kernel(gamma, detuning, kappa2, n as f64 * dt).map(|f| *w * f))
            .collect::<Result<_>>()?,
        KernelSpec::Bandgap { beta, lambda, delta } => {
            let prefactor = beta * lambda.powf(1.5);
            moment_weights(lambda, dt, m)?
                .iter()
                .enumerate()
                .map(|(n, w)| {
                    let phase = C64::new(0.0, delta * n as f64 * dt + FRAC_PI_4).exp();
                    prefactor * w / dt * phase
                })
                .collect()
        }
    };
    Ok(KernelSamples { coeffs, dt })
}
