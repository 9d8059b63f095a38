//! Populations, expectation values, steady-state detection, two-time
//! correlations and the internal spectrum.

use serde::{Deserialize, Serialize};

use crate::algebra::{max_abs, sigma, sigma_dag, DensityMatrix, Op2, C64, EXCITED};
use crate::ensemble::{continue_propagation, propagate, EvolutionOperator, VirtualEnsemble};
use crate::error::{Error, Result};

/// Tolerance outside `[0, 1]` before a population is reported as non-physical.
pub const POPULATION_SLACK: f64 = 1e-9;

/// `Re ρ_ee`. Values more than `POPULATION_SLACK` outside `[0, 1]` are an error.
pub fn excited_population(rho: &DensityMatrix) -> Result<f64> {
    let p = rho.get(EXCITED, EXCITED).re;
    if p < -POPULATION_SLACK || p > 1.0 + POPULATION_SLACK || !p.is_finite() {
        return Err(Error::NonPhysical(p));
    }
    Ok(p)
}

/// `Re ρ_ee` without the physicality check.
pub fn excited_population_raw(rho: &DensityMatrix) -> f64 {
    rho.get(EXCITED, EXCITED).re
}

/// `Tr{Aρ}`.
pub fn expectation(a: &Op2, rho: &DensityMatrix) -> C64 {
    (a * rho.0).trace()
}

/// Default relative tolerance of the steady-state detector.
pub const DEFAULT_STEADY_TOL: f64 = 1e-4;

/// Earliest index `i` from which every later sample stays within `rel_tol`
/// (relative to the largest entry of `ρ_i`) of `ρ_i`. The stable stretch must
/// last at least `window` samples, so the detector never fires on the tail end
/// of a short trajectory.
pub fn detect_steady_state(
    states: &[DensityMatrix],
    rel_tol: f64,
    window: usize,
) -> Result<(usize, DensityMatrix)> {
    if states.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let last = states.len() - 1;
    if last < window {
        let residual = spread(&states[..], &states[0]);
        return Err(Error::NotConverged { residual });
    }
    // Scan backwards: the tail maximum deviation from a candidate anchor is
    // monotone in the anchor only approximately, so evaluate each candidate.
    let mut best: Option<usize> = None;
    for i in (0..=last - window).rev() {
        let anchor = &states[i];
        let scale = max_abs(&anchor.0).max(f64::MIN_POSITIVE);
        if spread(&states[i..], anchor) <= rel_tol * scale {
            best = Some(i);
        } else if best.is_some() {
            break;
        }
    }
    match best {
        Some(i) => Ok((i, states[i])),
        None => {
            let anchor = &states[last - window];
            let scale = max_abs(&anchor.0).max(f64::MIN_POSITIVE);
            Err(Error::NotConverged { residual: spread(&states[last - window..], anchor) / scale })
        }
    }
}

fn spread(states: &[DensityMatrix], anchor: &DensityMatrix) -> f64 {
    states.iter().map(|r| max_abs(&(r.0 - anchor.0))).fold(0.0, f64::max)
}

/// Steady-state two-time correlation `C(τ) = ⟨σ†(τ)σ⟩ − ⟨σ†⟩⟨σ⟩` on the
/// propagation grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationTrace {
    pub tau: Vec<f64>,
    pub values: Vec<C64>,
    pub subtracted_coherent: bool,
    /// `⟨σ†σ⟩`, `⟨σ⟩` at the moment the lowering operator was applied.
    pub excited_ss: f64,
    pub coherence_ss: C64,
    pub steady_index: usize,
}

/// Settings for a correlation run.
#[derive(Clone, Copy, Debug)]
pub struct CorrelationSettings {
    /// Steps propagated before the lowering operator is applied.
    pub settle_steps: usize,
    /// Steps recorded after it.
    pub lag_steps: usize,
    pub steady_tol: f64,
    /// Length of the stable stretch required before `settle_steps`, in steps.
    pub steady_window: usize,
}

/// Propagate to `settle_steps`, confirm the reduced state has settled, apply
/// `σ` to every slot of the ensemble and keep propagating, recording
/// `Tr{σ† ρ^∅}` at each lag. Quantum regression is never used: the lowered
/// ensemble carries the pending-photon history across the split.
pub fn correlation_function(
    rho0: &DensityMatrix,
    op: &EvolutionOperator,
    settings: &CorrelationSettings,
) -> Result<CorrelationTrace> {
    let settle = propagate(rho0, op, settings.settle_steps, 1);
    let (steady_index, _) =
        detect_steady_state(&settle.states(), settings.steady_tol, settings.steady_window)?;
    correlation_from_state(settle.state, op, settings.lag_steps, steady_index)
}

/// Correlation from an already settled ensemble.
pub fn correlation_from_state(
    mut state: VirtualEnsemble,
    op: &EvolutionOperator,
    lag_steps: usize,
    steady_index: usize,
) -> Result<CorrelationTrace> {
    let rho_ss = state.project();
    let excited_ss = expectation(&(sigma_dag() * sigma()), &rho_ss).re;
    let coherence_ss = expectation(&sigma(), &rho_ss);
    let raised_ss = expectation(&sigma_dag(), &rho_ss);
    let t0 = state.time();
    state.apply_lowering();
    let run = continue_propagation(state, op, lag_steps, 1);
    let coherent = raised_ss * coherence_ss;
    let (tau, values) = run
        .samples
        .iter()
        .map(|(t, rho)| (t - t0, expectation(&sigma_dag(), rho) - coherent))
        .unzip();
    Ok(CorrelationTrace {
        tau,
        values,
        subtracted_coherent: true,
        excited_ss,
        coherence_ss,
        steady_index,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
}

/// `2 Re Σ_k w_k C(τ_k) e^{−iωτ_k} Δτ` with trapezoid end weights. A component
/// `C ∝ e^{iΩτ}` peaks at `ω = +Ω`. The grid must be uniform.
pub fn spectrum(c: &CorrelationTrace, omega: &[f64]) -> Result<Spectrum> {
    let n = c.tau.len();
    if n < 2 {
        return Err(Error::InvalidParameter("correlation trace needs at least two lags".into()));
    }
    let dtau = c.tau[1] - c.tau[0];
    if !(dtau > 0.0) || c.tau.windows(2).any(|w| ((w[1] - w[0]) - dtau).abs() > 1e-9 * dtau) {
        return Err(Error::InvalidParameter("spectrum needs a uniform τ grid".into()));
    }
    let values = omega
        .iter()
        .map(|&w| {
            let sum: C64 = c
                .tau
                .iter()
                .zip(&c.values)
                .enumerate()
                .map(|(k, (&t, &v))| {
                    let weight = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                    weight * v * C64::new(0.0, -w * (t - c.tau[0])).exp()
                })
                .sum();
            2.0 * (sum * dtau).re
        })
        .collect();
    Ok(Spectrum { omega: omega.to_vec(), values })
}

/// Symmetric grid `[-half_width, half_width]` with spacing at most `resolution`.
pub fn symmetric_grid(half_width: f64, resolution: f64) -> Vec<f64> {
    let n = (half_width / resolution).ceil() as i64;
    let step = half_width / n as f64;
    (-n..=n).map(|k| k as f64 * step).collect()
}

/// Default spectral grid for Rabi frequency `rabi`: `±2.5Ω` at `Ω/40`.
pub fn default_grid(rabi: f64) -> Vec<f64> {
    let scale = rabi.abs().max(1.0);
    symmetric_grid(2.5 * scale, scale / 40.0)
}

/// Height and position of the largest local maximum within `|ω − centre| ≤ half_width`.
pub fn peak_near(s: &Spectrum, centre: f64, half_width: f64) -> Option<(f64, f64)> {
    let n = s.values.len();
    (1..n.saturating_sub(1))
        .filter(|&i| (s.omega[i] - centre).abs() <= half_width)
        .filter(|&i| s.values[i] >= s.values[i - 1] && s.values[i] >= s.values[i + 1])
        .map(|i| (s.omega[i], s.values[i]))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Lower (ω < 0) and upper (ω > 0) Mollow side peaks near `∓rabi`.
pub fn side_peaks(s: &Spectrum, rabi: f64) -> Option<((f64, f64), (f64, f64))> {
    let hw = 0.5 * rabi.abs();
    Some((peak_near(s, -rabi.abs(), hw)?, peak_near(s, rabi.abs(), hw)?))
}

/// Least-squares line through `(t, ln P)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// Decay rate, the negated slope of `ln P`.
    pub rate: f64,
    pub intercept: f64,
    /// Coefficient of determination of the linear fit to `ln P`.
    pub r_squared: f64,
}

/// Fit `P(t) ≈ e^{c − rate·t}` over samples with `t ∈ [t_from, t_to]`.
pub fn fit_exponential(times: &[f64], populations: &[f64], t_from: f64, t_to: f64) -> Result<ExponentialFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(populations)
        .filter(|(t, _)| **t >= t_from && **t <= t_to)
        .map(|(t, p)| (*t, *p))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidParameter("exponential fit needs at least three samples".into()));
    }
    if let Some((_, p)) = pts.iter().find(|(_, p)| !(*p > 0.0)) {
        return Err(Error::NonPhysical(*p));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|(t, _)| t).sum::<f64>() / n;
    let my = pts.iter().map(|(_, p)| p.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(t, p)| (t - mx) * (p.ln() - my)).sum();
    let syy: f64 = pts.iter().map(|(_, p)| (p.ln() - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ExponentialFit { rate: -slope, intercept: my - slope * mx, r_squared })
}
