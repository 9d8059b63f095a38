//! Experiment execution and output files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nmrf_core::algebra::sigma;
use nmrf_core::ensemble::{propagate, Model};
use nmrf_core::observables::*;
use nmrf_core::oracles::{decay_amplitude, lindblad_baseline, LindbladSystem};
use nmrf_core::{DensityMatrix, KernelSpec};
use serde_json::{json, Map, Value};

use crate::config::{Experiment, Initial, KernelKind, RunConfig};
use crate::error::CliError;

/// Files written by a run and one summary line per output.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    outcome: Outcome,
}

impl Writer<'_> {
    fn csv(&mut self, stem: &str, header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        let path = self.dir.join(format!("{stem}.csv"));
        let io = |source| CliError::Io { path: path.clone(), source };
        let mut w = BufWriter::new(fs::File::create(&path).map_err(io)?);
        writeln!(w, "{header}").map_err(io)?;
        for row in rows {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn sidecar(&mut self, stem: &str, meta: Map<String, Value>) -> Result<(), CliError> {
        let path = self.dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&Value::Object(meta)).expect("metadata serializes");
        fs::write(&path, text + "\n").map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.outcome.files.push(path);
        Ok(())
    }
}

fn initial_state(cfg: &RunConfig) -> DensityMatrix {
    match cfg.initial {
        Initial::Excited => DensityMatrix::excited(),
        Initial::Ground => DensityMatrix::ground(),
    }
}

fn model(cfg: &RunConfig, kernel: KernelSpec) -> Model {
    Model { kernel, rabi: cfg.rabi, dt: cfg.dt, slots: cfg.slots }
}

fn stem(cfg: &RunConfig, delta: Option<f64>, always_suffix: bool) -> String {
    match delta {
        Some(d) if always_suffix || cfg.deltas.len() > 1 => format!("{}_delta{d}", cfg.output),
        _ => cfg.output.clone(),
    }
}

fn base_meta(cfg: &RunConfig, spec: &KernelSpec, slots: usize, dt: f64) -> Map<String, Value> {
    let window = (slots.max(1) - 1) as f64 * dt;
    let mut m = Map::new();
    m.insert("experiment".into(), json!(cfg.experiment.name()));
    m.insert("config".into(), json!(cfg.resolved));
    m.insert("kernel".into(), json!(format!("{spec:?}")));
    m.insert("M".into(), json!(slots));
    m.insert("dt".into(), json!(dt));
    m.insert("window".into(), json!(window));
    m.insert("truncation_level".into(), json!(spec.truncation_level(window)));
    m.insert("markov_rate".into(), json!(spec.markov_rate()));
    m
}

fn trace_drift(states: &[DensityMatrix]) -> f64 {
    states.iter().map(|r| (r.trace().re - 1.0).abs()).fold(0.0, f64::max)
}

fn excited(states: &[DensityMatrix]) -> Vec<f64> {
    states.iter().map(excited_population_raw).collect()
}

fn max_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Indices written to files: every `record_every`-th step and the last.
fn recorded(cfg: &RunConfig, len: usize) -> impl Iterator<Item = usize> + '_ {
    (0..len).filter(move |&k| k % cfg.record_every == 0 || k + 1 == len)
}

fn fit_meta(meta: &mut Map<String, Value>, times: &[f64], p: &[f64], from: f64) -> Option<ExponentialFit> {
    let to = times.last().copied().unwrap_or(0.0);
    match fit_exponential(times, p, from, to) {
        Ok(fit) => {
            meta.insert("fitted_rate".into(), json!(fit.rate));
            meta.insert("fit_r_squared".into(), json!(fit.r_squared));
            meta.insert("fit_range".into(), json!([from, to]));
            Some(fit)
        }
        Err(_) => {
            meta.insert("fitted_rate".into(), Value::Null);
            None
        }
    }
}

/// Run the configured experiment, writing CSV files and JSON sidecars into `dir`.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let mut w = Writer { dir, outcome: Outcome::default() };
    match cfg.experiment {
        Experiment::Decay | Experiment::Driven => trajectory(cfg, &mut w)?,
        Experiment::Correlation | Experiment::Spectrum => correlation(cfg, &mut w)?,
        Experiment::ValidateCavity => validate_cavity(cfg, &mut w)?,
        Experiment::ValidateDecay => validate_decay(cfg, &mut w)?,
        Experiment::MarkovLimit => markov_limit(cfg, &mut w)?,
        Experiment::Convergence => convergence(cfg, &mut w)?,
    }
    Ok(w.outcome)
}

fn trajectory(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    for (delta, spec) in cfg.kernels() {
        let start = Instant::now();
        let model = model(cfg, spec);
        let traj = propagate(&initial_state(cfg), &model.operator()?, cfg.n_steps, 1);
        let (times, states) = (traj.times(), traj.states());
        let p = excited(&states);
        let name = stem(cfg, delta, false);
        if cfg.experiment == Experiment::Decay {
            w.csv(&name, "t,P", recorded(cfg, p.len()).map(|k| vec![times[k], p[k]]))?;
        } else {
            w.csv(
                &name,
                "t,P,Re_coh,Im_coh,trace",
                recorded(cfg, p.len()).map(|k| {
                    let coh = expectation(&sigma(), &states[k]);
                    vec![times[k], p[k], coh.re, coh.im, states[k].trace().re]
                }),
            )?;
        }
        let mut meta = base_meta(cfg, &spec, cfg.slots, cfg.dt);
        meta.insert("trace_drift".into(), json!(trace_drift(&states)));
        let line = if cfg.experiment == Experiment::Decay {
            match fit_meta(&mut meta, &times, &p, cfg.fit_from) {
                Some(fit) => format!("{name}: fitted rate {:.6} (R² {:.6})", fit.rate, fit.r_squared),
                None => format!("{name}: P(T) = {:.6}", p[p.len() - 1]),
            }
        } else {
            format!("{name}: P(T) = {:.6}", p[p.len() - 1])
        };
        meta.insert("wall_time_s".into(), json!(start.elapsed().as_secs_f64()));
        w.sidecar(&name, meta)?;
        w.outcome.summary.push(line);
    }
    Ok(())
}

fn correlation(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    for (delta, spec) in cfg.kernels() {
        let start = Instant::now();
        let model = model(cfg, spec);
        let op = model.operator()?;
        let settle_steps = model.steps_for(cfg.settle_time)?;
        let lag_steps = model.steps_for(cfg.lag_time)?;
        let settle = propagate(&initial_state(cfg), &op, settle_steps, 1);
        let states = settle.states();
        let drift = trace_drift(&states);
        let (index, _) = detect_steady_state(&states, cfg.steady_tol, cfg.steady_window_steps(cfg.dt))?;
        let c = correlation_from_state(settle.state, &op, lag_steps, index)?;
        let name = stem(cfg, delta, false);
        let mut meta = base_meta(cfg, &spec, cfg.slots, cfg.dt);
        meta.insert("trace_drift".into(), json!(drift));
        meta.insert("steady_index".into(), json!(index));
        meta.insert("excited_ss".into(), json!(c.excited_ss));
        meta.insert("coherence_ss".into(), json!([c.coherence_ss.re, c.coherence_ss.im]));
        let mut line = format!("{name}: P_ss = {:.6}", c.excited_ss);
        if cfg.experiment == Experiment::Correlation {
            w.csv(&name, "tau,ReC,ImC", c.tau.iter().zip(&c.values).map(|(t, v)| vec![*t, v.re, v.im]))?;
        } else {
            let grid = symmetric_grid(cfg.omega_half_width, cfg.omega_resolution);
            let s = spectrum(&c, &grid)?;
            w.csv(&name, "omega,S", s.omega.iter().zip(&s.values).map(|(o, v)| vec![*o, *v]))?;
            if let Some(((wl, hl), (wu, hu))) = (cfg.rabi != 0.0).then(|| side_peaks(&s, cfg.rabi)).flatten() {
                let asym = (hu - hl).abs() / hu.max(hl);
                meta.insert("side_peaks".into(), json!({"lower": [wl, hl], "upper": [wu, hu], "asymmetry": asym}));
                line += &format!(", side peaks {hl:.4} at {wl:+.3} and {hu:.4} at {wu:+.3}");
            }
        }
        meta.insert("wall_time_s".into(), json!(start.elapsed().as_secs_f64()));
        w.sidecar(&name, meta)?;
        w.outcome.summary.push(line);
    }
    Ok(())
}

fn validate_cavity(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let start = Instant::now();
    let spec = cfg.kernels()[0].1;
    let model = model(cfg, spec);
    let traj = propagate(&initial_state(cfg), &model.operator()?, cfg.n_steps, 1);
    let sys = LindbladSystem::matched(&spec, cfg.rabi, cfg.fock_cutoff)?;
    let base = lindblad_baseline(&sys, &initial_state(cfg), cfg.dt, cfg.n_steps)?;
    let (times, states) = (traj.times(), traj.states());
    let (p, q) = (excited(&states), base.excited_populations());
    w.csv(&cfg.output, "t,P_alg,P_lindblad", recorded(cfg, p.len()).map(|k| vec![times[k], p[k], q[k]]))?;
    let dev = max_deviation(&p, &q);
    let mut meta = base_meta(cfg, &spec, cfg.slots, cfg.dt);
    meta.insert("trace_drift".into(), json!(trace_drift(&states)));
    meta.insert("max_deviation".into(), json!(dev));
    meta.insert("wall_time_s".into(), json!(start.elapsed().as_secs_f64()));
    w.sidecar(&cfg.output, meta)?;
    w.outcome.summary.push(format!("{}: max |P_alg − P_lindblad| = {dev:.6}", cfg.output));
    Ok(())
}

fn validate_decay(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    for (delta, spec) in cfg.kernels() {
        let start = Instant::now();
        let model = model(cfg, spec);
        let traj = propagate(&DensityMatrix::excited(), &model.operator()?, cfg.n_steps, 1);
        let amp = decay_amplitude(&model.samples()?, cfg.n_steps);
        let (times, states) = (traj.times(), traj.states());
        let (p, q) = (excited(&states), amp.populations());
        let name = stem(cfg, delta, false);
        w.csv(&name, "t,P_alg,P_amplitude", recorded(cfg, p.len()).map(|k| vec![times[k], p[k], q[k]]))?;
        let dev = max_deviation(&p, &q);
        let mut meta = base_meta(cfg, &spec, cfg.slots, cfg.dt);
        meta.insert("trace_drift".into(), json!(trace_drift(&states)));
        meta.insert("max_deviation".into(), json!(dev));
        meta.insert("rewrite_defect".into(), json!(amp.rewrite_defect));
        fit_meta(&mut meta, &times, &p, cfg.fit_from);
        meta.insert("wall_time_s".into(), json!(start.elapsed().as_secs_f64()));
        w.sidecar(&name, meta)?;
        w.outcome.summary.push(format!("{name}: max |P_alg − |a|²| = {dev:.3e}"));
    }
    Ok(())
}

fn markov_limit(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut drift = 0.0f64;
    for (delta, spec) in cfg.kernels() {
        let model = model(cfg, spec);
        let traj = propagate(&DensityMatrix::excited(), &model.operator()?, cfg.n_steps, 1);
        let (times, states) = (traj.times(), traj.states());
        let p = excited(&states);
        drift = drift.max(trace_drift(&states));
        let name = stem(cfg, delta, true);
        w.csv(&name, "t,P", recorded(cfg, p.len()).map(|k| vec![times[k], p[k]]))?;
        let fit = fit_exponential(&times, &p, cfg.fit_from, times[times.len() - 1])?;
        rows.push(vec![delta.unwrap_or(0.0), fit.rate, fit.r_squared]);
    }
    let stem_rates = format!("{}_rates", cfg.output);
    w.csv(&stem_rates, "delta,rate,r_squared", rows.clone())?;
    let rates: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let hi = rates.iter().cloned().fold(f64::MIN, f64::max);
    let lo = rates.iter().cloned().fold(f64::MAX, f64::min);
    let off = rates.iter().map(|k| (k - cfg.gamma).abs() / cfg.gamma).fold(0.0, f64::max);
    let spec = cfg.kernels()[0].1;
    let mut meta = base_meta(cfg, &spec, cfg.slots, cfg.dt);
    meta.insert("trace_drift".into(), json!(drift));
    meta.insert("fitted_rates".into(), json!(rows.iter().map(|r| json!({"delta": r[0], "rate": r[1], "r_squared": r[2]})).collect::<Vec<_>>()));
    meta.insert("rate_spread".into(), json!((hi - lo) / hi));
    meta.insert("max_relative_offset_from_gamma".into(), json!(off));
    meta.insert("wall_time_s".into(), json!(start.elapsed().as_secs_f64()));
    w.sidecar(&cfg.output, meta)?;
    w.outcome.summary.push(format!("{}: rate spread {:.4}, max offset from γ {:.4}", cfg.output, (hi - lo) / hi, off));
    Ok(())
}

fn convergence(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let start = Instant::now();
    let spec = cfg.kernels()[0].1;
    let t_end = cfg.n_steps as f64 * cfg.dt;
    let mut ladder = cfg.ladder.clone();
    ladder.sort_unstable();
    let run_rung = |m: usize| -> Result<(f64, Vec<DensityMatrix>), CliError> {
        let dt = cfg.window / (m - 1) as f64;
        let model = Model { kernel: spec, rabi: cfg.rabi, dt, slots: m };
        let n = model.steps_for(t_end)?;
        Ok((dt, propagate(&initial_state(cfg), &model.operator()?, n, 1).states()))
    };

    let mut rows = Vec::new();
    let reference_label;
    if cfg.kernel == KernelKind::Cavity {
        reference_label = json!("master equation");
        let sys = LindbladSystem::matched(&spec, cfg.rabi, cfg.fock_cutoff)?;
        for &m in &ladder {
            let (dt, states) = run_rung(m)?;
            let base = lindblad_baseline(&sys, &initial_state(cfg), dt, states.len() - 1)?;
            rows.push(vec![dt, m as f64, max_deviation(&excited(&states), &base.excited_populations()), trace_drift(&states)]);
        }
    } else {
        // The finest rung is the reference, sampled on each coarse grid.
        let finest = ladder[ladder.len() - 1];
        reference_label = json!(format!("M = {finest}"));
        let (_, reference) = run_rung(finest)?;
        let p_ref = excited(&reference);
        for &m in &ladder[..ladder.len() - 1] {
            let stride = (finest - 1) / (m - 1);
            let (dt, states) = run_rung(m)?;
            let p = excited(&states);
            let dev = p.iter().enumerate().map(|(k, x)| (x - p_ref[k * stride]).abs()).fold(0.0, f64::max);
            rows.push(vec![dt, m as f64, dev, trace_drift(&states)]);
        }
    }
    w.csv(&cfg.output, "dt,M,deviation,trace_drift", rows.clone())?;

    let orders: Vec<f64> =
        rows.windows(2).map(|r| (r[0][2] / r[1][2]).ln() / (r[0][0] / r[1][0]).ln()).collect();
    let mut meta = base_meta(cfg, &spec, *ladder.last().unwrap(), cfg.window / (*ladder.last().unwrap() - 1) as f64);
    meta.insert("reference".into(), reference_label);
    meta.insert("measured_orders".into(), json!(orders));
    meta.insert("trace_drift".into(), json!(rows.iter().map(|r| r[3]).fold(0.0, f64::max)));
    meta.insert("wall_time_s".into(), json!(start.elapsed().as_secs_f64()));
    w.sidecar(&cfg.output, meta)?;
    let shown: Vec<String> = rows.iter().map(|r| format!("M={}: {:.4e}", r[1], r[2])).collect();
    w.outcome.summary.push(format!("{}: {}", cfg.output, shown.join(", ")));
    Ok(())
}
