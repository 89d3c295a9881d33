//! Command-line front end. Arguments and config files resolve to a
//! [`RunConfig`]; [`run`] hands the work to an [`Engine`] and writes what
//! comes back. All numbers come from the engine.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use degroot_core::dynamics::Norm;
use degroot_core::experiments::{
    self, alpha_grid, AuditSummary, ConcentrationRow, PerturbationTable, ProbeGraph, ProbeRun, SpeedupReport,
    SweepConfig, SweepRow,
};
use degroot_core::netgen::{EliteGrassrootsSpec, NoiseLaw};
use degroot_core::weightfn::WeightFunction;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing required value: {0}")]
    Missing(&'static str),
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("{key} does not apply to {command}")]
    NotApplicable { key: String, command: &'static str },
    #[error("{key}: cannot parse '{value}' ({msg})")]
    Parse { key: String, value: String, msg: String },
    #[error("{key} = {value} is out of range: {msg}")]
    Range { key: String, value: String, msg: String },
    #[error("{path}, line {line}: {msg}")]
    File { path: String, line: usize, msg: String },
    #[error("config file says command = {found}, running {expected}")]
    CommandMismatch { found: String, expected: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Parser, Debug)]
#[command(name = "degroot", version, about = "Degree-weighted DeGroot learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// |lambda2| across an alpha grid.
    Sweep(Opts),
    /// Realized vs expected |lambda2| as n grows.
    Concentration(Opts),
    /// How often |lambda2| drops from alpha0 to alpha1 on the same draw.
    Speedup(Opts),
    /// Alpha sweep on perturbed graphs.
    Perturb(Opts),
    /// Density assumptions and monotonicity regime of a spec.
    Audit(Opts),
    /// Slowest-converging beliefs against random probes.
    Probe(Opts),
    /// Rerun from a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<String>,
    },
}

/// Every flag is kept as text until it is merged with the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct Opts {
    #[arg(long)]
    pub n1: Option<String>,
    #[arg(long)]
    pub n2: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    /// Weight family (power).
    #[arg(long)]
    pub phi: Option<String>,
    /// Grid start:stop:step for sweep/perturb, a single value otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha1: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Comma-separated perturbation weights.
    #[arg(long)]
    pub delta: Option<String>,
    /// Comma-separated population sizes.
    #[arg(long)]
    pub ns: Option<String>,
    #[arg(long)]
    pub t: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    /// weighted | euclidean
    #[arg(long)]
    pub norm: Option<String>,
    /// realized | expected
    #[arg(long)]
    pub graph: Option<String>,
    /// Also diagonalize T* numerically at every alpha (true | false).
    #[arg(long)]
    pub numeric: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// Flat key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

const SPEC_KEYS: [&str; 7] = ["n1", "n2", "n", "m", "p", "q", "phi"];

impl Opts {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("n1", &self.n1),
            ("n2", &self.n2),
            ("n", &self.n),
            ("m", &self.m),
            ("p", &self.p),
            ("q", &self.q),
            ("phi", &self.phi),
            ("alpha", &self.alpha),
            ("alpha0", &self.alpha0),
            ("alpha1", &self.alpha1),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("delta", &self.delta),
            ("ns", &self.ns),
            ("t", &self.t),
            ("samples", &self.samples),
            ("norm", &self.norm),
            ("graph", &self.graph),
            ("numeric", &self.numeric),
            ("out", &self.out),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Sweep,
    Concentration,
    Speedup,
    Perturb,
    Audit,
    Probe,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Sweep => "sweep",
            CommandKind::Concentration => "concentration",
            CommandKind::Speedup => "speedup",
            CommandKind::Perturb => "perturb",
            CommandKind::Audit => "audit",
            CommandKind::Probe => "probe",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "sweep" => CommandKind::Sweep,
            "concentration" => CommandKind::Concentration,
            "speedup" => CommandKind::Speedup,
            "perturb" => CommandKind::Perturb,
            "audit" => CommandKind::Audit,
            "probe" => CommandKind::Probe,
            _ => return None,
        })
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            CommandKind::Sweep => &["alpha", "trials", "seed", "numeric"],
            CommandKind::Concentration => &["alpha", "ns", "trials", "seed"],
            CommandKind::Speedup => &["alpha0", "alpha1", "trials", "seed"],
            CommandKind::Perturb => &["alpha", "delta", "trials", "seed"],
            CommandKind::Audit => &["alpha"],
            CommandKind::Probe => &["alpha", "graph", "t", "samples", "seed", "norm"],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    Sweep { grid: Grid, trials: usize, seed: u64, numeric: bool },
    Concentration { alpha: f64, ns: Vec<usize>, trials: usize, seed: u64 },
    Speedup { alpha0: f64, alpha1: f64, trials: usize, seed: u64 },
    Perturb { grid: Grid, deltas: Vec<f64>, trials: usize, seed: u64 },
    Audit { alpha: f64 },
    Probe { alpha: f64, graph: ProbeGraph, t: usize, samples: usize, seed: u64, norm: Norm },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    pub p: f64,
    pub q: f64,
    pub phi: String,
    pub params: Params,
    pub out: PathBuf,
}

fn norm_name(n: Norm) -> &'static str {
    match n {
        Norm::Euclidean => "euclidean",
        Norm::DWeighted => "weighted",
    }
}

fn list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// `key=value` lines: command, version, then every resolved setting.
    pub fn manifest(&self) -> String {
        let mut lines = vec![
            ("command", self.command.as_str().to_string()),
            ("version", VERSION.to_string()),
            ("n1", self.n1.to_string()),
            ("n2", self.n2.to_string()),
            ("m", self.m.to_string()),
            ("p", self.p.to_string()),
            ("q", self.q.to_string()),
            ("phi", self.phi.clone()),
        ];
        let grid = |g: &Grid| format!("{}:{}:{}", g.start, g.stop, g.step);
        match &self.params {
            Params::Sweep { grid: g, trials, seed, numeric } => {
                lines.push(("alpha", grid(g)));
                lines.push(("trials", trials.to_string()));
                lines.push(("seed", seed.to_string()));
                lines.push(("numeric", numeric.to_string()));
            }
            Params::Concentration { alpha, ns, trials, seed } => {
                lines.push(("alpha", alpha.to_string()));
                lines.push(("ns", list(ns)));
                lines.push(("trials", trials.to_string()));
                lines.push(("seed", seed.to_string()));
            }
            Params::Speedup { alpha0, alpha1, trials, seed } => {
                lines.push(("alpha0", alpha0.to_string()));
                lines.push(("alpha1", alpha1.to_string()));
                lines.push(("trials", trials.to_string()));
                lines.push(("seed", seed.to_string()));
            }
            Params::Perturb { grid: g, deltas, trials, seed } => {
                lines.push(("alpha", grid(g)));
                lines.push(("delta", list(deltas)));
                lines.push(("trials", trials.to_string()));
                lines.push(("seed", seed.to_string()));
            }
            Params::Audit { alpha } => lines.push(("alpha", alpha.to_string())),
            Params::Probe { alpha, graph, t, samples, seed, norm } => {
                lines.push(("alpha", alpha.to_string()));
                lines.push(("graph", graph.as_str().to_string()));
                lines.push(("t", t.to_string()));
                lines.push(("samples", samples.to_string()));
                lines.push(("seed", seed.to_string()));
                lines.push(("norm", norm_name(*norm).to_string()));
            }
        }
        lines.push(("out", self.out.display().to_string()));
        lines.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn spec(&self) -> degroot_core::Result<EliteGrassrootsSpec> {
        EliteGrassrootsSpec::new(self.n1, self.n2, self.m, self.p, self.q)
    }

    pub fn weight_function(&self, alpha: f64) -> degroot_core::Result<WeightFunction> {
        WeightFunction::from_name(&self.phi, alpha)
    }
}

/// Reads a flat `key=value` file. Blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::File {
                path: path.display().to_string(),
                line: i + 1,
                msg: "expected key=value".into(),
            });
        };
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

struct Values {
    map: BTreeMap<&'static str, String>,
}

impl Values {
    fn get(&self, key: &'static str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| ConfigError::Parse {
                key: key.into(),
                value: v.into(),
                msg: e.to_string(),
            }),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &'static str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key)?.ok_or(ConfigError::Missing(key))
    }

    fn or<T: std::str::FromStr>(&self, key: &'static str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn list<T: std::str::FromStr>(&self, key: &'static str, default: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key).unwrap_or(default);
        raw.split(',')
            .map(|s| {
                s.trim().parse::<T>().map_err(|e| ConfigError::Parse {
                    key: key.into(),
                    value: raw.into(),
                    msg: e.to_string(),
                })
            })
            .collect()
    }

    fn grid(&self, key: &'static str, default: &str) -> Result<Grid, ConfigError> {
        let raw = self.get(key).unwrap_or(default);
        let parts: Vec<&str> = raw.split(':').collect();
        let bad = |msg: &str| ConfigError::Parse { key: key.into(), value: raw.into(), msg: msg.into() };
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(&e.to_string()));
        let g = Grid { start: num(parts[0])?, stop: num(parts[1])?, step: num(parts[2])? };
        if alpha_grid(g.start, g.stop, g.step).is_err() {
            return Err(ConfigError::Range {
                key: key.into(),
                value: raw.into(),
                msg: "need finite start <= stop and step > 0".into(),
            });
        }
        Ok(g)
    }
}

fn range(key: &str, value: impl ToString, msg: &str) -> ConfigError {
    ConfigError::Range { key: key.into(), value: value.to_string(), msg: msg.into() }
}

fn probability(v: &Values, key: &'static str) -> Result<f64, ConfigError> {
    let x: f64 = v.required(key)?;
    if !(x > 0.0 && x <= 1.0) {
        return Err(range(key, x, "must lie in (0, 1]"));
    }
    Ok(x)
}

fn positive(v: &Values, key: &'static str, default: usize) -> Result<usize, ConfigError> {
    let x: usize = v.or(key, default)?;
    if x == 0 {
        return Err(range(key, x, "must be positive"));
    }
    Ok(x)
}

/// Merges flags over the config file and validates every field.
pub fn resolve(
    command: CommandKind,
    opts: &Opts,
    env_out: Option<String>,
) -> Result<RunConfig, ConfigError> {
    let mut map: BTreeMap<&'static str, String> = BTreeMap::new();
    let mut file_out = None;
    if let Some(path) = &opts.config {
        for (k, v) in read_config_file(path)? {
            match k.as_str() {
                "command" => {
                    if v != command.as_str() {
                        return Err(ConfigError::CommandMismatch { found: v, expected: command.as_str() });
                    }
                }
                "version" => {
                    if v != VERSION {
                        eprintln!("note: manifest written by version {v}, running {VERSION}");
                    }
                }
                "out" => file_out = Some(v),
                _ => {
                    let key = opts
                        .pairs()
                        .into_iter()
                        .map(|(name, _)| name)
                        .find(|name| *name == k)
                        .ok_or_else(|| ConfigError::UnknownKey(k.clone()))?;
                    map.insert(key, v);
                }
            }
        }
    }
    for (key, value) in opts.pairs() {
        if key == "out" {
            continue;
        }
        if let Some(v) = value {
            map.insert(key, v.clone());
        }
    }
    for key in map.keys() {
        if !SPEC_KEYS.contains(key) && !command.keys().contains(key) {
            return Err(ConfigError::NotApplicable { key: key.to_string(), command: command.as_str() });
        }
    }
    let v = Values { map };

    let n1: usize = v.required("n1")?;
    let m: usize = v.required("m")?;
    if m < 2 {
        return Err(range("m", m, "need at least two groups"));
    }
    let n2 = match (v.parsed::<usize>("n2")?, v.parsed::<usize>("n")?) {
        (Some(_), Some(_)) => return Err(range("n", v.get("n").unwrap_or(""), "give either n2 or n, not both")),
        (Some(n2), None) => n2,
        (None, Some(n)) => {
            if n <= n1 || !(n - n1).is_multiple_of(m - 1) {
                return Err(range("n", n, "n - n1 must split evenly into m - 1 groups"));
            }
            (n - n1) / (m - 1)
        }
        (None, None) => return Err(ConfigError::Missing("n2")),
    };
    if n1 == 0 || n2 == 0 {
        return Err(range("n1", n1, "group sizes must be positive"));
    }
    let p = probability(&v, "p")?;
    let q = probability(&v, "q")?;
    let phi = v.get("phi").unwrap_or("power").to_string();
    if WeightFunction::from_name(&phi, 0.0).is_err() {
        return Err(range("phi", &phi, "known families: power"));
    }

    let seed: u64 = v.or("seed", 0)?;
    let params = match command {
        CommandKind::Sweep => Params::Sweep {
            grid: v.grid("alpha", "-10:10:0.25")?,
            trials: v.or("trials", 20)?,
            seed,
            numeric: v.or("numeric", false)?,
        },
        CommandKind::Concentration => {
            let ns: Vec<usize> = v.list("ns", "250,500,1000,2000")?;
            if ns.windows(2).any(|w| w[1] <= w[0]) {
                return Err(range("ns", list(&ns), "must be strictly increasing"));
            }
            Params::Concentration { alpha: v.or("alpha", 1.0)?, ns, trials: positive(&v, "trials", 20)?, seed }
        }
        CommandKind::Speedup => {
            let alpha0: f64 = v.or("alpha0", 0.0)?;
            let alpha1: f64 = v.or("alpha1", 2.0)?;
            if alpha0 > alpha1 {
                return Err(range("alpha0", alpha0, "must not exceed alpha1"));
            }
            Params::Speedup { alpha0, alpha1, trials: positive(&v, "trials", 100)?, seed }
        }
        CommandKind::Perturb => {
            let deltas: Vec<f64> = v.list("delta", "0,0.1,0.3")?;
            if let Some(d) = deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
                return Err(range("delta", d, "must lie in [0, 1]"));
            }
            Params::Perturb { grid: v.grid("alpha", "-10:10:0.25")?, deltas, trials: v.or("trials", 20)?, seed }
        }
        CommandKind::Audit => Params::Audit { alpha: v.or("alpha", 0.0)? },
        CommandKind::Probe => {
            let norm = match v.get("norm").unwrap_or("weighted") {
                "weighted" | "d_weighted" => Norm::DWeighted,
                "euclidean" => Norm::Euclidean,
                other => return Err(range("norm", other, "weighted | euclidean")),
            };
            let graph = v
                .get("graph")
                .unwrap_or("realized")
                .parse::<ProbeGraph>()
                .map_err(|_| range("graph", v.get("graph").unwrap_or(""), "realized | expected"))?;
            Params::Probe {
                alpha: v.or("alpha", 0.0)?,
                graph,
                t: v.or("t", 10)?,
                samples: v.or("samples", 200)?,
                seed,
                norm,
            }
        }
    };
    let out = opts.out.clone().or(env_out).or(file_out).unwrap_or_else(|| "out".into());
    Ok(RunConfig { command, n1, n2, m, p, q, phi, params, out: PathBuf::from(out) })
}

/// The computations the CLI dispatches to.
pub trait Engine {
    fn sweep(&self, cfg: &SweepConfig) -> degroot_core::Result<Vec<SweepRow>>;
    fn concentration(
        &self,
        base: &EliteGrassrootsSpec,
        ns: &[usize],
        trials: usize,
        seed: u64,
        phi: &WeightFunction,
    ) -> degroot_core::Result<Vec<ConcentrationRow>>;
    fn speedup(
        &self,
        spec: &EliteGrassrootsSpec,
        phi: &WeightFunction,
        alpha0: f64,
        alpha1: f64,
        trials: usize,
        seed: u64,
    ) -> degroot_core::Result<SpeedupReport>;
    fn perturb(&self, cfg: &SweepConfig, deltas: &[f64], noise: &NoiseLaw) -> degroot_core::Result<Vec<PerturbationTable>>;
    fn audit(&self, spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> AuditSummary;
    #[allow(clippy::too_many_arguments)]
    fn probe(
        &self,
        spec: &EliteGrassrootsSpec,
        phi: &WeightFunction,
        graph: ProbeGraph,
        t: usize,
        samples: usize,
        seed: u64,
        norm: Norm,
    ) -> degroot_core::Result<ProbeRun>;
}

/// The real thing.
pub struct Library;

impl Engine for Library {
    fn sweep(&self, cfg: &SweepConfig) -> degroot_core::Result<Vec<SweepRow>> {
        experiments::alpha_sweep(cfg)
    }
    fn concentration(
        &self,
        base: &EliteGrassrootsSpec,
        ns: &[usize],
        trials: usize,
        seed: u64,
        phi: &WeightFunction,
    ) -> degroot_core::Result<Vec<ConcentrationRow>> {
        experiments::concentration_study(base, ns, trials, seed, phi)
    }
    fn speedup(
        &self,
        spec: &EliteGrassrootsSpec,
        phi: &WeightFunction,
        alpha0: f64,
        alpha1: f64,
        trials: usize,
        seed: u64,
    ) -> degroot_core::Result<SpeedupReport> {
        experiments::speedup_detection(spec, phi, alpha0, alpha1, trials, seed)
    }
    fn perturb(&self, cfg: &SweepConfig, deltas: &[f64], noise: &NoiseLaw) -> degroot_core::Result<Vec<PerturbationTable>> {
        experiments::perturbation_study(cfg, deltas, noise)
    }
    fn audit(&self, spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> AuditSummary {
        experiments::audit(spec, phi)
    }
    fn probe(
        &self,
        spec: &EliteGrassrootsSpec,
        phi: &WeightFunction,
        graph: ProbeGraph,
        t: usize,
        samples: usize,
        seed: u64,
        norm: Norm,
    ) -> degroot_core::Result<ProbeRun> {
        experiments::probe_run(spec, phi, graph, t, samples, seed, norm)
    }
}

/// Up to six decimals, trailing zeros dropped.
pub fn short(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<fs::File> {
    let path = dir.join(name);
    fs::File::create(&path).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))
}

/// Runs a resolved config. Returns the number of failed rows or trials.
pub fn run<E: Engine, W: Write>(engine: &E, cfg: &RunConfig, stdout: &mut W) -> anyhow::Result<usize> {
    let dir = &cfg.out;
    fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("cannot create output directory {}: {e}", dir.display()))?;
    let spec = cfg.spec()?;
    let family = cfg.weight_function(0.0)?;
    let sweep_cfg = |grid: &Grid, trials: usize, seed: u64, numeric: bool| -> anyhow::Result<SweepConfig> {
        Ok(SweepConfig {
            spec: spec.clone(),
            phi: family.clone(),
            alphas: alpha_grid(grid.start, grid.stop, grid.step)?,
            trials,
            seed,
            numeric_expected: numeric,
        })
    };

    let mut failures = 0;
    match &cfg.params {
        Params::Sweep { grid, trials, seed, numeric } => {
            let rows = engine.sweep(&sweep_cfg(grid, *trials, *seed, *numeric)?)?;
            experiments::write_sweep_csv(create(dir, "sweep.csv")?, &rows)?;
            let title = format!("n1={} n2={} m={} p={} q={}", cfg.n1, cfg.n2, cfg.m, cfg.p, cfg.q);
            experiments::write_sweep_svg(create(dir, "sweep.svg")?, &title, &rows)?;
            failures = count_failures(stdout, &rows)?;
            writeln!(stdout, "wrote {} rows to {}", rows.len(), dir.join("sweep.csv").display())?;
        }
        Params::Concentration { alpha, ns, trials, seed } => {
            let rows = engine.concentration(&spec, ns, *trials, *seed, &family.with_alpha(*alpha))?;
            experiments::write_concentration_csv(create(dir, "concentration.csv")?, &rows)?;
            for r in &rows {
                writeln!(stdout, "n = {}: median gap {} (ratio {})", r.n, short(r.median_abs_gap), short(r.ratio))?;
                failures += r.failures;
            }
        }
        Params::Speedup { alpha0, alpha1, trials, seed } => {
            let r = engine.speedup(&spec, &family, *alpha0, *alpha1, *trials, *seed)?;
            experiments::write_speedup_csv(create(dir, "speedup.csv")?, &r)?;
            writeln!(
                stdout,
                "fraction = {} ({} of {}), 95% CI [{}, {}]",
                short(r.fraction),
                r.successes,
                r.trials - r.failures,
                short(r.ci_low),
                short(r.ci_high)
            )?;
            failures = r.failures;
        }
        Params::Perturb { grid, deltas, trials, seed } => {
            let tables = engine.perturb(&sweep_cfg(grid, *trials, *seed, false)?, deltas, &NoiseLaw::Uniform)?;
            experiments::write_perturbation_csv(create(dir, "perturb.csv")?, &tables)?;
            for t in &tables {
                let mono = match &t.monotonicity {
                    Some(m) if m.passed() => "pass".to_string(),
                    Some(m) => format!("{} violations", m.violations.len()),
                    None => "undefined".to_string(),
                };
                writeln!(stdout, "delta = {}: monotonicity {mono}", t.delta)?;
                failures += count_failures(stdout, &t.rows)?;
            }
        }
        Params::Audit { alpha } => {
            let a = engine.audit(&spec, &family.with_alpha(*alpha));
            let text = audit_text(&a);
            fs::write(dir.join("audit.txt"), &text)?;
            stdout.write_all(text.as_bytes())?;
        }
        Params::Probe { alpha, graph, t, samples, seed, norm } => {
            let r = engine.probe(&spec, &family.with_alpha(*alpha), *graph, *t, *samples, *seed, *norm)?;
            experiments::write_probe_csv(create(dir, "probe.csv")?, &r)?;
            experiments::write_probe_summary_csv(create(dir, "probe_summary.csv")?, &r)?;
            writeln!(
                stdout,
                "lambda2 = {}, rank of worst = {} of {}",
                short(r.lambda2),
                r.report.rank,
                r.report.probe_ratios.len() + 1
            )?;
        }
    }
    fs::write(dir.join("manifest.txt"), cfg.manifest())?;
    Ok(failures)
}

fn count_failures<W: Write>(stdout: &mut W, rows: &[SweepRow]) -> anyhow::Result<usize> {
    let mut total = 0;
    for r in rows {
        if let Some(e) = &r.error {
            writeln!(stdout, "alpha = {}: {e}", r.alpha)?;
            total += 1;
        }
        if r.failures > 0 {
            writeln!(stdout, "alpha = {}: {} of {} trials failed", r.alpha, r.failures, r.trials)?;
            total += r.failures;
        }
    }
    Ok(total)
}

fn verdict(v: degroot_core::netgen::Verdict) -> &'static str {
    v.as_str()
}

pub fn audit_text(a: &AuditSummary) -> String {
    let r = &a.report;
    let mut s = String::new();
    s.push_str(&format!("n = {}\n", r.n));
    s.push_str(&format!("d1* = {}\nd2* = {}\n", short(a.d1), short(a.d2)));
    s.push_str(&format!("tau_n = {}\n", short(r.tau_n)));
    s.push_str(&format!("density_score = {}\n", short(r.density_score)));
    s.push_str(&format!("min_group_fraction = {}\n", short(r.min_group_fraction)));
    s.push_str(&format!("density_ratio = {}\n", short(r.density_ratio)));
    s.push_str(&format!("density: {}\n", verdict(r.density)));
    s.push_str(&format!("no_vanishing_groups: {}\n", verdict(r.no_vanishing_groups)));
    s.push_str(&format!("comparable_densities: {}\n", verdict(r.comparable_densities)));
    match &a.regime {
        Ok(reg) => {
            s.push_str(&format!("case = {}\n", reg.case_id));
            s.push_str(&format!("alpha_threshold = {}\n", short(reg.alpha_threshold)));
            if let Some(t2) = reg.secondary_threshold {
                s.push_str(&format!("secondary_threshold = {}\n", short(t2)));
            }
            s.push_str(&format!("{}\n", reg.describe()));
        }
        Err(e) => s.push_str(&format!("case = {} (regime undefined: {e})\n", a.case_id)),
    }
    s
}

/// Parses argv, runs, and returns the process exit code.
pub fn main_with<E: Engine>(engine: &E, argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let env_out = std::env::var("DEGROOT_OUT").ok();
    let resolved = match cli.command {
        Command::Replay { manifest, out } => read_config_file(&manifest).and_then(|map| {
            let name = map.get("command").cloned().ok_or(ConfigError::Missing("command"))?;
            let kind = CommandKind::parse(&name).ok_or_else(|| range("command", &name, "unknown command"))?;
            let opts = Opts { config: Some(manifest.clone()), out, ..Opts::default() };
            resolve(kind, &opts, env_out.clone())
        }),
        Command::Sweep(o) => resolve(CommandKind::Sweep, &o, env_out),
        Command::Concentration(o) => resolve(CommandKind::Concentration, &o, env_out),
        Command::Speedup(o) => resolve(CommandKind::Speedup, &o, env_out),
        Command::Perturb(o) => resolve(CommandKind::Perturb, &o, env_out),
        Command::Audit(o) => resolve(CommandKind::Audit, &o, env_out),
        Command::Probe(o) => resolve(CommandKind::Probe, &o, env_out),
    };
    let cfg = match resolved {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let mut stdout = std::io::stdout();
    match run(engine, &cfg, &mut stdout) {
        Ok(0) => 0,
        Ok(n) => {
            eprintln!("{n} failed rows or trials");
            3
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
