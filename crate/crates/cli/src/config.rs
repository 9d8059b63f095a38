//! `key = value` run configuration.
//!
//! Every rate is in units of the bare decay rate `γ` and every time in units
//! of `1/γ`. Everything after a `#` on a line is a comment.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nmrf_core::KernelSpec;

use crate::error::CliError;

/// Environment variable holding the memory cap in bytes (`K`, `M`, `G` suffixes allowed).
pub const MEMORY_CAP_VAR: &str = "NMRF_MEMORY_CAP";

/// 4 GiB.
pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "kernel",
    "gamma",
    "detuning",
    "kappa2",
    "lambda",
    "delta",
    "beta",
    "rabi",
    "M",
    "dt",
    "n_steps",
    "t_max",
    "initial",
    "record_every",
    "steady_tol",
    "steady_window",
    "settle_time",
    "lag_time",
    "omega_half_width",
    "omega_resolution",
    "fock_cutoff",
    "truncation",
    "fit_from",
    "ladder",
    "window",
    "output",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Decay,
    Driven,
    Correlation,
    Spectrum,
    ValidateCavity,
    ValidateDecay,
    MarkovLimit,
    Convergence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Decay => "decay",
            Experiment::Driven => "driven",
            Experiment::Correlation => "correlation",
            Experiment::Spectrum => "spectrum",
            Experiment::ValidateCavity => "validate-cavity",
            Experiment::ValidateDecay => "validate-decay",
            Experiment::MarkovLimit => "markov-limit",
            Experiment::Convergence => "convergence",
        }
    }

    /// Experiments that propagate for a fixed duration from `t = 0`.
    fn needs_duration(self) -> bool {
        !matches!(self, Experiment::Correlation | Experiment::Spectrum)
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "decay" => Experiment::Decay,
            "driven" => Experiment::Driven,
            "correlation" => Experiment::Correlation,
            "spectrum" => Experiment::Spectrum,
            "validate-cavity" => Experiment::ValidateCavity,
            "validate-decay" => Experiment::ValidateDecay,
            "markov-limit" => Experiment::MarkovLimit,
            "convergence" => Experiment::Convergence,
            other => return Err(CliError::Config(format!("unknown experiment `{other}`"))),
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Cavity,
    Bandgap,
    Flat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Initial {
    Excited,
    Ground,
}

/// A validated run configuration with every default filled in.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub kernel: KernelKind,
    pub gamma: f64,
    pub detuning: f64,
    pub kappa2: f64,
    pub lambda: f64,
    /// Band-gap detunings; a list produces one output file per value.
    pub deltas: Vec<f64>,
    /// Band-gap prefactor. When absent it is set so the Born–Markov rate equals `gamma`.
    pub beta: Option<f64>,
    pub rabi: f64,
    pub slots: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub initial: Initial,
    pub record_every: usize,
    pub steady_tol: f64,
    /// Length of the stable stretch demanded by the steady-state detector, in units of `1/γ`.
    pub steady_window: f64,
    pub settle_time: f64,
    pub lag_time: f64,
    pub omega_half_width: f64,
    pub omega_resolution: f64,
    pub fock_cutoff: usize,
    pub truncation: f64,
    pub fit_from: f64,
    /// Window sizes `M` of a convergence study at fixed `window`.
    pub ladder: Vec<usize>,
    pub window: f64,
    pub output: String,
    /// The resolved `key = value` pairs, defaults included. Enough to rerun.
    pub resolved: BTreeMap<String, String>,
}

impl RunConfig {
    /// Kernel for each configured detuning (a single entry unless the band gap has a list).
    pub fn kernels(&self) -> Vec<(Option<f64>, KernelSpec)> {
        match self.kernel {
            KernelKind::Cavity => {
                vec![(None, KernelSpec::Cavity { gamma: self.gamma, detuning: self.detuning, kappa2: self.kappa2 })]
            }
            KernelKind::Flat => vec![(None, KernelSpec::Flat { gamma: self.gamma })],
            KernelKind::Bandgap => self
                .deltas
                .iter()
                .map(|&delta| {
                    let spec = match self.beta {
                        Some(beta) => KernelSpec::Bandgap { beta, lambda: self.lambda, delta },
                        None => KernelSpec::bandgap_with_rate(self.gamma, self.lambda, delta),
                    };
                    (Some(delta), spec)
                })
                .collect(),
        }
    }

    /// Largest window a run will allocate.
    pub fn max_slots(&self) -> usize {
        if self.experiment == Experiment::Convergence {
            self.ladder.iter().copied().max().unwrap_or(self.slots)
        } else {
            self.slots
        }
    }

    /// Steps of the steady-state window at step `dt`.
    pub fn steady_window_steps(&self, dt: f64) -> usize {
        ((self.steady_window / dt).round() as usize).max(1)
    }
}

/// Rough bytes needed for a window of `slots`: three block buffers of
/// `3^M` flattened states plus `(M + 3)` sparse entries per live row.
pub fn memory_estimate(slots: usize) -> u128 {
    let labels = 3u128.pow(slots as u32);
    labels * (3 * 64 + 6 * (slots as u128 + 3))
}

/// Memory cap from the environment, or the default.
pub fn memory_cap_from_env() -> Result<u64, CliError> {
    match std::env::var(MEMORY_CAP_VAR) {
        Ok(v) => parse_bytes(&v)
            .ok_or_else(|| CliError::Config(format!("{MEMORY_CAP_VAR} = `{v}` is not a byte count"))),
        Err(_) => Ok(DEFAULT_MEMORY_CAP),
    }
}

fn parse_bytes(s: &str) -> Option<u64> {
    let s = s.trim();
    let (digits, scale) = match s.chars().last()? {
        'K' | 'k' => (&s[..s.len() - 1], 1u64 << 10),
        'M' | 'm' => (&s[..s.len() - 1], 1 << 20),
        'G' | 'g' => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    digits.trim().parse::<u64>().ok()?.checked_mul(scale)
}

/// Split `text` into key/value pairs. Duplicate keys are errors.
fn read_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut pairs = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(CliError::Config(format!("line {}: empty key", n + 1)));
        }
        if pairs.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: key `{key}` given twice", n + 1)));
        }
    }
    Ok(pairs)
}

struct Fields {
    pairs: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Fields {
    fn raw(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, CliError> {
        match self.pairs.get(key) {
            None => Ok(None),
            Some(v) => {
                let parsed = v
                    .parse::<T>()
                    .map_err(|_| CliError::Config(format!("`{key}` must be {what}, got `{v}`")))?;
                self.resolved.insert(key.to_string(), v.clone());
                Ok(Some(parsed))
            }
        }
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        let v = self.parse::<f64>(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(CliError::Config(format!("`{key}` must be finite"))),
            _ => Ok(v),
        }
    }

    fn number_or(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.number(key)? {
            Some(v) => Ok(v),
            None => {
                self.resolved.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    fn positive(&mut self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        let v = match default {
            Some(d) => self.number_or(key, d)?,
            None => self.number(key)?.ok_or_else(|| missing(key))?,
        };
        if v > 0.0 {
            Ok(v)
        } else {
            Err(CliError::Config(format!("`{key}` must be positive, got {v}")))
        }
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>, CliError> {
        self.parse::<usize>(key, "a non-negative integer")
    }

    fn list<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<Vec<T>>, CliError> {
        let Some(v) = self.pairs.get(key).cloned() else { return Ok(None) };
        let items = v
            .split(',')
            .map(|s| s.trim().parse::<T>().map_err(|_| CliError::Config(format!("`{key}` must be a list of {what}, got `{v}`"))))
            .collect::<Result<Vec<T>, _>>()?;
        if items.is_empty() {
            return Err(CliError::Config(format!("`{key}` is empty")));
        }
        self.resolved.insert(key.to_string(), v);
        Ok(Some(items))
    }

    fn word(&mut self, key: &str, default: Option<&str>) -> Result<String, CliError> {
        let v = match (self.pairs.get(key), default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => d.to_string(),
            (None, None) => return Err(missing(key)),
        };
        self.resolved.insert(key.to_string(), v.clone());
        Ok(v)
    }
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required key `{key}`"))
}

/// Parse configuration text, apply `key=value` overrides, validate, and check
/// the memory estimate of the largest window against `memory_cap` bytes.
pub fn parse_config(text: &str, overrides: &[String], memory_cap: u64) -> Result<RunConfig, CliError> {
    let mut pairs = read_pairs(text)?;
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{o}` is not `key=value`")))?;
        pairs.insert(key.trim().to_string(), value.trim().to_string());
    }
    if let Some(key) = pairs.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(CliError::Config(format!("unknown key `{key}`")));
    }
    let mut f = Fields { pairs, resolved: BTreeMap::new() };

    let experiment: Experiment = f.word("experiment", None)?.parse()?;
    let kernel = match f.word("kernel", None)?.as_str() {
        "cavity" => KernelKind::Cavity,
        "bandgap" => KernelKind::Bandgap,
        "flat" => KernelKind::Flat,
        other => return Err(CliError::Config(format!("unknown kernel `{other}`"))),
    };
    let gamma = f.positive("gamma", Some(1.0))?;
    let rabi = f.number_or("rabi", 0.0)?;
    let dt = f.positive("dt", None)?;

    let (mut detuning, mut kappa2, mut lambda, mut deltas, mut beta) = (0.0, 0.0, 0.0, vec![0.0], None);
    let allowed: &[&str] = match kernel {
        KernelKind::Cavity => {
            detuning = f.number_or("detuning", 0.0)?;
            kappa2 = f.positive("kappa2", None)?;
            &["detuning", "kappa2"]
        }
        KernelKind::Bandgap => {
            lambda = f.positive("lambda", None)?;
            deltas = f.list::<f64>("delta", "numbers")?.unwrap_or_else(|| vec![0.0]);
            if !deltas.iter().all(|d| d.is_finite()) {
                return Err(CliError::Config("`delta` values must be finite".into()));
            }
            f.resolved.entry("delta".into()).or_insert_with(|| "0".into());
            beta = f.number("beta")?;
            if matches!(beta, Some(b) if b <= 0.0) {
                return Err(CliError::Config("`beta` must be positive".into()));
            }
            &["lambda", "delta", "beta"]
        }
        KernelKind::Flat => &[],
    };
    for key in ["detuning", "kappa2", "lambda", "delta", "beta"] {
        if f.raw(key).is_some() && !allowed.contains(&key) {
            return Err(CliError::Config(format!("`{key}` does not apply to this kernel")));
        }
    }

    let truncation = f.number_or("truncation", 0.02)?;
    if !(truncation > 0.0 && truncation < 1.0) {
        return Err(CliError::Config(format!("`truncation` must lie in (0, 1), got {truncation}")));
    }
    let slots = match (f.count("M")?, kernel) {
        (Some(0), _) => return Err(CliError::Config("`M` must be at least 1".into())),
        (Some(m), KernelKind::Flat) if m != 1 => {
            return Err(CliError::Config("the flat kernel is memoryless; `M` must be 1".into()))
        }
        (Some(1), KernelKind::Cavity | KernelKind::Bandgap) => {
            return Err(CliError::Config("a structured kernel needs `M` of at least 2".into()))
        }
        (Some(m), _) => m,
        (None, KernelKind::Flat) => 1,
        (None, KernelKind::Bandgap) => 11,
        (None, KernelKind::Cavity) => {
            KernelSpec::Cavity { gamma, detuning, kappa2 }.window_slots_for(dt, truncation).max(2)
        }
    };
    f.resolved.insert("M".into(), slots.to_string());

    let n_steps = match (f.count("n_steps")?, f.number("t_max")?) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either `n_steps` or `t_max`, not both".into())),
        (Some(n), None) => n,
        (None, Some(t)) if t >= 0.0 => (t / dt).round() as usize,
        (None, Some(t)) => return Err(CliError::Config(format!("`t_max` must be non-negative, got {t}"))),
        (None, None) if experiment.needs_duration() => {
            return Err(CliError::Config("missing required key `n_steps` or `t_max`".into()))
        }
        (None, None) => 0,
    };

    let initial = match f.word("initial", Some("excited"))?.as_str() {
        "excited" => Initial::Excited,
        "ground" => Initial::Ground,
        other => return Err(CliError::Config(format!("`initial` must be excited or ground, got `{other}`"))),
    };
    let record_every = f.count("record_every")?.unwrap_or(1).max(1);
    f.resolved.insert("record_every".into(), record_every.to_string());
    let steady_tol = f.positive("steady_tol", Some(nmrf_core::observables::DEFAULT_STEADY_TOL))?;
    let steady_window = f.positive("steady_window", Some(1.0))?;
    let settle_time = f.positive("settle_time", Some(40.0))?;
    let lag_time = f.positive("lag_time", Some(20.0))?;
    let scale = rabi.abs().max(1.0);
    let omega_half_width = f.positive("omega_half_width", Some(2.5 * scale))?;
    let omega_resolution = f.positive("omega_resolution", Some(scale / 40.0))?;
    let fock_cutoff = f.count("fock_cutoff")?.unwrap_or(8);
    f.resolved.insert("fock_cutoff".into(), fock_cutoff.to_string());
    let fit_from = f.number_or("fit_from", 0.5)?;
    let output = f.word("output", Some(experiment.name()))?;
    if output.is_empty() || output.contains('/') {
        return Err(CliError::Config(format!("`output` must be a plain file stem, got `{output}`")));
    }

    let window = f.number("window")?;
    let ladder = f.list::<usize>("ladder", "integers")?;
    let (ladder, window) = if experiment == Experiment::Convergence {
        if kernel == KernelKind::Flat {
            return Err(CliError::Config("a convergence study needs a kernel with memory".into()));
        }
        let ladder = ladder.ok_or_else(|| missing("ladder"))?;
        let window = window.ok_or_else(|| missing("window"))?;
        if ladder.len() < 2 || ladder.iter().any(|&m| m < 2) {
            return Err(CliError::Config("`ladder` needs at least two window sizes, each ≥ 2".into()));
        }
        if !(window > 0.0) {
            return Err(CliError::Config("`window` must be positive".into()));
        }
        (ladder, window)
    } else {
        if ladder.is_some() || window.is_some() {
            return Err(CliError::Config("`ladder` and `window` only apply to convergence".into()));
        }
        (Vec::new(), 0.0)
    };

    match experiment {
        Experiment::ValidateCavity if kernel != KernelKind::Cavity => {
            return Err(CliError::Config("validate-cavity needs the cavity kernel".into()))
        }
        Experiment::MarkovLimit if kernel != KernelKind::Bandgap => {
            return Err(CliError::Config("markov-limit needs the band-gap kernel".into()))
        }
        Experiment::ValidateCavity if fock_cutoff < 4 => {
            return Err(CliError::Config("`fock_cutoff` must be at least 4".into()))
        }
        Experiment::ValidateDecay | Experiment::MarkovLimit if rabi != 0.0 || initial != Initial::Excited => {
            return Err(CliError::Config(format!(
                "{} follows undriven decay; it needs `rabi = 0` and `initial = excited`",
                experiment.name()
            )))
        }
        _ => {}
    }
    if experiment == Experiment::Convergence && kernel != KernelKind::Cavity {
        // The finest rung is the reference, so every coarse grid must lie on it.
        let finest = ladder.iter().max().copied().unwrap_or(2);
        if let Some(m) = ladder.iter().find(|&&m| (finest - 1) % (m - 1) != 0) {
            return Err(CliError::Config(format!(
                "`ladder`: M - 1 = {} does not divide the finest M - 1 = {}",
                m - 1,
                finest - 1
            )));
        }
    }

    let cfg = RunConfig {
        experiment,
        kernel,
        gamma,
        detuning,
        kappa2,
        lambda,
        deltas,
        beta,
        rabi,
        slots,
        dt,
        n_steps,
        initial,
        record_every,
        steady_tol,
        steady_window,
        settle_time,
        lag_time,
        omega_half_width,
        omega_resolution,
        fock_cutoff,
        truncation,
        fit_from,
        ladder,
        window,
        output,
        resolved: f.resolved,
    };
    for (_, spec) in cfg.kernels() {
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    }

    let slots = cfg.max_slots();
    let estimate = memory_estimate(slots);
    eprintln!("memory estimate for M = {slots}: {estimate} bytes (cap {memory_cap})");
    if slots > 19 || estimate > memory_cap as u128 {
        return Err(CliError::MemoryCap { slots, estimate, cap: memory_cap });
    }
    Ok(cfg)
}
