//! Brute-force check: the atom coupled to a finite comb of reservoir modes,
//! evolved as a pure state with at most two photons in the field.
//!
//! Frame rotating at the atomic frequency: `H = (Ω/2)σ_x + Σ Δ_k b_k†b_k
//! + i Σ g_k (b_k†σ − σ†b_k)`, whose memory function is `Σ g_k² e^{−iΔ_k τ}`.
//! The couplings are a non-negative least-squares fit of that sum to the
//! requested kernel.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{DensityMatrix, Op2, C64};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeSet {
    /// `Δ_k = ω_k − ω₀`.
    pub detunings: Vec<f64>,
    /// `g_k²`.
    pub weights: Vec<f64>,
    /// `∫|Σ g_k² e^{−iΔ_k τ} − f(τ)| dτ / ∫|f(τ)| dτ` over the fit interval.
    pub fit_residual: f64,
}

impl ModeSet {
    pub fn kernel(&self, tau: f64) -> C64 {
        self.detunings
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| *w * C64::new(0.0, -d * tau).exp())
            .sum()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DiscreteModeConfig {
    pub n_modes: usize,
    /// 1 or 2.
    pub photon_cutoff: usize,
    pub t_max: f64,
    /// Output interval.
    pub dt: f64,
    pub fit_threshold: f64,
}

impl Default for DiscreteModeConfig {
    fn default() -> Self {
        Self { n_modes: 80, photon_cutoff: 2, t_max: 2.0, dt: 0.01, fit_threshold: 5e-2 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteModeRun {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub modes: ModeSet,
}

impl DiscreteModeRun {
    pub fn excited_populations(&self) -> Vec<f64> {
        self.states.iter().map(|r| r.get(0, 0).re).collect()
    }
}

/// Lawson–Hanson active-set solver for `min ‖Ax − b‖` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * b.amax().max(1.0);
    let tol = 1e-12 * scale * (a.nrows() as f64);
    for _ in 0..3 * n.max(1) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]))
            .filter(|&j| w[j] > tol);
        let Some(j) = candidate else { return Ok(x) };
        passive[j] = true;
        loop {
            let cols: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = DMatrix::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])]);
            let z_sub = sub
                .svd(true, true)
                .solve(b, 1e-14)
                .map_err(|e| Error::InvalidParameter(format!("least-squares solve failed: {e}")))?;
            let mut z = DVector::zeros(n);
            for (c, &k) in cols.iter().enumerate() {
                z[k] = z_sub[c];
            }
            if cols.iter().all(|&k| z[k] > 0.0) {
                x = z;
                break;
            }
            let alpha = cols
                .iter()
                .filter(|&&k| z[k] <= 0.0)
                .map(|&k| x[k] / (x[k] - z[k]))
                .fold(f64::INFINITY, f64::min);
            x += (z - &x) * alpha;
            for &k in &cols {
                if x[k] <= 1e-15 * scale {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    Ok(x)
}

/// Centre of the kernel's spectral weight, `−` its carrier frequency.
fn band_centre(spec: &KernelSpec) -> f64 {
    match *spec {
        KernelSpec::Cavity { detuning, .. } => -detuning,
        KernelSpec::Bandgap { delta, .. } => -delta,
        KernelSpec::Flat { .. } => 0.0,
    }
}

/// Uniform comb of `n_modes` modes whose spacing keeps the recurrence time
/// `2π/Δω` above `2·t_max`, with weights fitted on `[0, t_max]`.
pub fn fit_modes(spec: &KernelSpec, n_modes: usize, t_max: f64) -> Result<ModeSet> {
    spec.validate()?;
    if n_modes == 0 || !(t_max > 0.0) {
        return Err(Error::InvalidParameter("mode fit needs modes and a positive horizon".into()));
    }
    if spec.eval(0.0)?.is_none() {
        return Err(Error::InvalidParameter("a delta-correlated kernel cannot be fitted by modes".into()));
    };
    let spacing = PI / (1.1 * t_max);
    let centre = band_centre(spec);
    let detunings: Vec<f64> = (0..n_modes)
        .map(|k| centre + (k as f64 - 0.5 * (n_modes as f64 - 1.0)) * spacing)
        .collect();
    let n_samples = 4 * n_modes + 1;
    let taus: Vec<f64> = (0..n_samples).map(|j| t_max * j as f64 / (n_samples - 1) as f64).collect();
    let targets = taus.iter().map(|&t| spec.eval(t).map(|v| v.unwrap_or_default())).collect::<Result<Vec<_>>>()?;
    let a = DMatrix::from_fn(2 * n_samples, n_modes, |r, k| {
        let phase = C64::new(0.0, -detunings[k] * taus[r / 2]).exp();
        if r % 2 == 0 {
            phase.re
        } else {
            phase.im
        }
    });
    let b = DVector::from_fn(2 * n_samples, |r, _| {
        let v = targets[r / 2];
        if r % 2 == 0 {
            v.re
        } else {
            v.im
        }
    });
    let x = nnls(&a, &b)?;
    let weights: Vec<f64> = x.iter().copied().collect();
    let mut modes = ModeSet { detunings, weights, fit_residual: 0.0 };
    // Trapezoid sums on the uniform fit grid; the common step cancels.
    let trapezoid = |v: Vec<f64>| v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]);
    let error = trapezoid(taus.iter().zip(&targets).map(|(&t, f)| (modes.kernel(t) - f).norm()).collect());
    let size = trapezoid(targets.iter().map(|f| f.norm()).collect());
    modes.fit_residual = error / size;
    Ok(modes)
}

/// Field configurations with at most `cutoff` photons: vacuum, `1_k`, then `1_j 1_k` with `j ≤ k`.
struct Configs {
    modes: usize,
    cutoff: usize,
}

impl Configs {
    fn len(&self) -> usize {
        let k = self.modes;
        1 + k + if self.cutoff >= 2 { k * (k + 1) / 2 } else { 0 }
    }

    fn single(&self, k: usize) -> usize {
        1 + k
    }

    fn pair(&self, j: usize, k: usize) -> usize {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        1 + self.modes + j * self.modes - j * (j.saturating_sub(1)) / 2 - j + k
    }
}

struct FieldHamiltonian {
    rabi: f64,
    energies: Vec<f64>,
    /// `(lower config, upper config, coupling · √n)` for every `b_k†` transition.
    raises: Vec<(usize, usize, f64)>,
    configs: usize,
}

impl FieldHamiltonian {
    fn new(modes: &ModeSet, rabi: f64, cutoff: usize) -> Self {
        let n = modes.detunings.len();
        let cfg = Configs { modes: n, cutoff };
        let mut energies = vec![0.0; cfg.len()];
        let g: Vec<f64> = modes.weights.iter().map(|w| w.sqrt()).collect();
        let mut raises = Vec::new();
        for k in 0..n {
            energies[cfg.single(k)] = modes.detunings[k];
            if g[k] != 0.0 {
                raises.push((0, cfg.single(k), g[k]));
            }
        }
        if cutoff >= 2 {
            for j in 0..n {
                for k in j..n {
                    energies[cfg.pair(j, k)] = modes.detunings[j] + modes.detunings[k];
                }
            }
            for j in 0..n {
                for k in 0..n {
                    if g[k] == 0.0 {
                        continue;
                    }
                    let factor = if j == k { 2.0_f64.sqrt() } else { 1.0 };
                    raises.push((cfg.single(j), cfg.pair(j, k), g[k] * factor));
                }
            }
        }
        Self { rabi, energies, raises, configs: cfg.len() }
    }

    /// `−iHψ`, with `ψ[a·C + c]` the amplitude of atom state `a` and field configuration `c`.
    fn derivative(&self, psi: &[C64], out: &mut [C64]) {
        let c = self.configs;
        let (e, g) = psi.split_at(c);
        let half = 0.5 * self.rabi;
        {
            let (oe, og) = out.split_at_mut(c);
            for i in 0..c {
                oe[i] = half * g[i] + self.energies[i] * e[i];
                og[i] = half * e[i] + self.energies[i] * g[i];
            }
            let i1 = C64::new(0.0, 1.0);
            for &(lo, hi, w) in &self.raises {
                og[hi] += i1 * w * e[lo];
                oe[lo] -= i1 * w * g[hi];
            }
        }
        for v in out.iter_mut() {
            *v = C64::new(v.im, -v.re);
        }
    }

    fn spectral_bound(&self) -> f64 {
        let emax = self.energies.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let gsum: f64 = self.raises.iter().map(|r| r.2 * r.2).sum::<f64>();
        emax + 0.5 * self.rabi.abs() + 2.0 * gsum.sqrt()
    }
}

/// Evolve the pure atomic state `atom = (c_e, c_g)` with an empty field and
/// return the atomic reduced state every `cfg.dt` up to `cfg.t_max`.
pub fn discrete_mode_oracle(
    spec: &KernelSpec,
    rabi: f64,
    atom: [C64; 2],
    cfg: &DiscreteModeConfig,
) -> Result<DiscreteModeRun> {
    if !(1..=2).contains(&cfg.photon_cutoff) {
        return Err(Error::InvalidParameter(format!(
            "photon cutoff must be 1 or 2, got {}",
            cfg.photon_cutoff
        )));
    }
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidParameter("output interval must be positive".into()));
    }
    let modes = fit_modes(spec, cfg.n_modes, cfg.t_max)?;
    if !(modes.fit_residual <= cfg.fit_threshold) {
        return Err(Error::FitResidual { residual: modes.fit_residual, threshold: cfg.fit_threshold });
    }
    let ham = FieldHamiltonian::new(&modes, rabi, cfg.photon_cutoff);
    let c = ham.configs;
    let mut psi = vec![C64::new(0.0, 0.0); 2 * c];
    psi[0] = atom[0];
    psi[c] = atom[1];
    let substeps = ((cfg.dt * ham.spectral_bound()) / 0.1).ceil().max(1.0) as usize;
    let h = cfg.dt / substeps as f64;
    let n_out = (cfg.t_max / cfg.dt).round() as usize;
    let reduce = |psi: &[C64]| {
        let (e, g) = psi.split_at(c);
        let mut r = Op2::zeros();
        for i in 0..c {
            r[(0, 0)] += e[i] * e[i].conj();
            r[(0, 1)] += e[i] * g[i].conj();
            r[(1, 0)] += g[i] * e[i].conj();
            r[(1, 1)] += g[i] * g[i].conj();
        }
        DensityMatrix(r)
    };
    let mut times = vec![0.0];
    let mut states = vec![reduce(&psi)];
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![C64::default(); 2 * c], vec![C64::default(); 2 * c], vec![C64::default(); 2 * c], vec![C64::default(); 2 * c]);
    let mut tmp = vec![C64::default(); 2 * c];
    for step in 1..=n_out {
        for _ in 0..substeps {
            ham.derivative(&psi, &mut k1);
            for i in 0..2 * c {
                tmp[i] = psi[i] + 0.5 * h * k1[i];
            }
            ham.derivative(&tmp, &mut k2);
            for i in 0..2 * c {
                tmp[i] = psi[i] + 0.5 * h * k2[i];
            }
            ham.derivative(&tmp, &mut k3);
            for i in 0..2 * c {
                tmp[i] = psi[i] + h * k3[i];
            }
            ham.derivative(&tmp, &mut k4);
            for i in 0..2 * c {
                psi[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            }
        }
        times.push(step as f64 * cfg.dt);
        states.push(reduce(&psi));
    }
    Ok(DiscreteModeRun { times, states, modes })
}
