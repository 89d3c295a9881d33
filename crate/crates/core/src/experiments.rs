//! Alpha sweeps, concentration and speedup studies, perturbation studies,
//! and worst-case convergence probes. Every random quantity is keyed by a
//! seed derived from the master seed and the task index, so results do not
//! depend on how rayon schedules the work. Dense kernels run sequentially
//! inside each task (see [`sequential_kernels`]) so that rounding does not
//! depend on the thread count either.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::{
    build_learning_matrix, convergence_distance, deviation_from_consensus, weighted_norm, BeliefVector, LearningMatrix,
    Norm,
};
use crate::error::{Error, Result};
use crate::netgen::{
    check_assumptions, perturb, sample_adjacency, BlockModelSpec, Elite, EliteGrassrootsSpec, NoiseLaw,
    PerturbationSpec,
};
use crate::plot::{line_plot, Series};
use crate::rng::{derive_seed, stream};
use crate::spectra::{
    classify_regime, eigen_symmetrized, lambda2_closed_form, lambda2_numeric, worst_initial_beliefs, Branch,
    RegimeClassification,
};
use crate::weightfn::WeightFunction;

const GRAPH: u64 = 1;
const NOISE: u64 = 2;
const PROBE: u64 = 3;

/// Switches faer's dense kernels to single-threaded execution. Their
/// blocking, and so the last bits of every eigenvalue, otherwise follows the
/// size of the thread pool. Called by every study in this module;
/// parallelism comes from running independent tasks instead.
pub fn sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

/// `start, start + step, ...` up to `stop`, generated by integer index so
/// both ends are included when `step` divides the range.
pub fn alpha_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::InvalidArgument(format!("bad alpha grid {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

/// 1 for two groups, 2 when group 1 is elite, 3 when it is grassroots.
pub fn case_id(spec: &EliteGrassrootsSpec) -> u8 {
    match (spec.m(), spec.elite()) {
        (2, _) => 1,
        (_, Elite::GroupOne) => 2,
        _ => 3,
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub spec: EliteGrassrootsSpec,
    /// Family; its own alpha is ignored.
    pub phi: WeightFunction,
    pub alphas: Vec<f64>,
    /// Random draws per alpha; 0 for expectation only.
    pub trials: usize,
    pub seed: u64,
    /// Also diagonalize the dense `T*` at every alpha.
    pub numeric_expected: bool,
}

impl SweepConfig {
    pub fn new(spec: EliteGrassrootsSpec, alphas: Vec<f64>) -> Self {
        SweepConfig { spec, phi: WeightFunction::power(0.0), alphas, trials: 0, seed: 0, numeric_expected: false }
    }

    fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::InvalidArgument("empty alpha grid".into()));
        }
        if self.alphas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("alpha grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// One alpha of a sweep. Second eigenvalues are reported in magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub case_id: u8,
    pub branch: Option<Branch>,
    pub lambda2_closed: Option<f64>,
    pub lambda2_numeric_expected: Option<f64>,
    pub lambda2_random_mean: Option<f64>,
    pub lambda2_random_std: Option<f64>,
    /// Median over trials of `||lambda2(T)| - |lambda2(T*)||`.
    pub median_abs_gap: Option<f64>,
    pub trials: usize,
    pub failures: usize,
    pub error: Option<String>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// `|lambda2(T)|` of one realized (optionally perturbed) graph. Disconnected
/// or periodic draws are failures.
fn random_lambda2(
    model: &BlockModelSpec,
    phi: &WeightFunction,
    graph_seed: u64,
    perturbation: Option<PerturbationSpec>,
) -> Result<f64> {
    let mut g = sample_adjacency(model, graph_seed);
    if let Some(p) = perturbation {
        g = perturb(&g, &p)?;
    }
    let t = build_learning_matrix(&g, phi)?;
    t.check_convergent()?;
    Ok(lambda2_numeric(&t)?.abs())
}

fn expected_numeric(spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> Result<f64> {
    let r = crate::netgen::expected_adjacency(spec.block_model());
    Ok(lambda2_numeric(&build_learning_matrix(&r, phi)?)?.abs())
}

struct Noise<'a> {
    delta: f64,
    law: &'a NoiseLaw,
}

fn sweep_rows(
    expected: &EliteGrassrootsSpec,
    model: &BlockModelSpec,
    cfg: &SweepConfig,
    noise: Option<Noise<'_>>,
) -> Vec<SweepRow> {
    let phis: Vec<WeightFunction> = cfg.alphas.iter().map(|&a| cfg.phi.with_alpha(a)).collect();
    let closed: Vec<Result<(f64, Branch)>> = phis
        .iter()
        .map(|phi| lambda2_closed_form(expected, phi).map(|r| (r.abs_lambda2(), r.branch)))
        .collect();
    let numeric: Vec<Option<Result<f64>>> = phis
        .par_iter()
        .map(|phi| cfg.numeric_expected.then(|| expected_numeric(expected, phi)))
        .collect();
    let tasks: Vec<(usize, usize)> =
        (0..cfg.alphas.len()).flat_map(|a| (0..cfg.trials).map(move |k| (a, k))).collect();
    let draws: Vec<Result<f64>> = tasks
        .par_iter()
        .map(|&(a, k)| {
            let key = [a as u64, k as u64];
            let graph_seed = derive_seed(cfg.seed, &[GRAPH, key[0], key[1]]);
            let pert = noise.as_ref().map(|nz| PerturbationSpec {
                delta: nz.delta,
                noise: nz.law.clone(),
                seed: derive_seed(cfg.seed, &[NOISE, key[0], key[1]]),
            });
            random_lambda2(model, &phis[a], graph_seed, pert)
        })
        .collect();

    let cid = case_id(expected);
    cfg.alphas
        .iter()
        .enumerate()
        .map(|(a, &alpha)| {
            let (lambda2_closed, branch, mut error) = match &closed[a] {
                Ok((l, b)) => (Some(*l), Some(*b), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            let lambda2_numeric_expected = match &numeric[a] {
                Some(Ok(v)) => Some(*v),
                Some(Err(e)) => {
                    error.get_or_insert_with(|| e.to_string());
                    None
                }
                None => None,
            };
            let slice = &draws[a * cfg.trials..(a + 1) * cfg.trials];
            let ok: Vec<f64> = slice.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
            let failures = slice.len() - ok.len();
            let (mean, std) = if ok.is_empty() { (None, None) } else {
                let (m, s) = mean_std(&ok);
                (Some(m), Some(s))
            };
            let median_abs_gap = match (lambda2_closed, ok.is_empty()) {
                (Some(l), false) => Some(median(&ok.iter().map(|x| (x - l).abs()).collect::<Vec<_>>())),
                _ => None,
            };
            SweepRow {
                alpha,
                case_id: cid,
                branch,
                lambda2_closed,
                lambda2_numeric_expected,
                lambda2_random_mean: mean,
                lambda2_random_std: std,
                median_abs_gap,
                trials: cfg.trials,
                failures,
                error,
            }
        })
        .collect()
}

/// One row per alpha, in grid order. Per-row failures do not abort.
pub fn alpha_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    sequential_kernels();
    cfg.validate()?;
    Ok(sweep_rows(&cfg.spec, cfg.spec.block_model(), cfg, None))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const SWEEP_HEADER: &str = "alpha,case_id,branch,lambda2_closed,lambda2_numeric,abs_gap,\
lambda2_random_mean,lambda2_random_std,median_abs_gap,trials,failures";

fn sweep_fields(r: &SweepRow) -> String {
    let gap = match (r.lambda2_closed, r.lambda2_numeric_expected) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.alpha,
        r.case_id,
        r.branch.map(Branch::as_str).unwrap_or(""),
        opt(r.lambda2_closed),
        opt(r.lambda2_numeric_expected),
        opt(gap),
        opt(r.lambda2_random_mean),
        opt(r.lambda2_random_std),
        opt(r.median_abs_gap),
        r.trials,
        r.failures
    )
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", sweep_fields(r))?;
    }
    Ok(())
}

/// `|lambda2|` against alpha for the expectation and, when present, the
/// mean over random draws.
pub fn write_sweep_svg<W: Write>(out: W, title: &str, rows: &[SweepRow]) -> Result<()> {
    let mut series = vec![Series {
        label: "expected".into(),
        points: rows.iter().filter_map(|r| r.lambda2_closed.map(|l| (r.alpha, l))).collect(),
    }];
    if rows.iter().any(|r| r.lambda2_random_mean.is_some()) {
        series.push(Series {
            label: "random mean".into(),
            points: rows.iter().filter_map(|r| r.lambda2_random_mean.map(|l| (r.alpha, l))).collect(),
        });
    }
    line_plot(out, title, "alpha", "|lambda2|", &series)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationRow {
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    pub lambda2_expected: f64,
    pub median_abs_gap: f64,
    pub tau_n: f64,
    /// `sqrt(log n) / (tau_n sqrt(n))`.
    pub rate_scale: f64,
    pub ratio: f64,
}

/// Median `||lambda2(T)| - |lambda2(T*)||` as the population grows with
/// group fractions and probabilities held fixed.
pub fn concentration_study(
    base: &EliteGrassrootsSpec,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
    phi: &WeightFunction,
) -> Result<Vec<ConcentrationRow>> {
    sequential_kernels();
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("n grid must be strictly increasing".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("concentration needs at least one trial".into()));
    }
    n_grid
        .iter()
        .map(|&n| {
            let spec = base.rescaled(n)?;
            let expected = lambda2_closed_form(&spec, phi)?.abs_lambda2();
            let draws: Vec<Result<f64>> = (0..trials)
                .into_par_iter()
                .map(|k| random_lambda2(spec.block_model(), phi, derive_seed(seed, &[GRAPH, n as u64, k as u64]), None))
                .collect();
            let gaps: Vec<f64> = draws.iter().filter_map(|r| r.as_ref().ok()).map(|l| (l - expected).abs()).collect();
            let audit = check_assumptions(spec.block_model());
            let nf = spec.n() as f64;
            let rate_scale = nf.ln().sqrt() / (audit.tau_n * nf.sqrt());
            let med = median(&gaps);
            Ok(ConcentrationRow {
                n: spec.n(),
                trials,
                failures: trials - gaps.len(),
                lambda2_expected: expected,
                median_abs_gap: med,
                tau_n: audit.tau_n,
                rate_scale,
                ratio: med / rate_scale,
            })
        })
        .collect()
}

pub fn write_concentration_csv<W: Write>(mut out: W, rows: &[ConcentrationRow]) -> Result<()> {
    writeln!(out, "n,trials,failures,lambda2_expected,median_abs_gap,tau_n,rate_scale,ratio")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n, r.trials, r.failures, r.lambda2_expected, r.median_abs_gap, r.tau_n, r.rate_scale, r.ratio
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeedupReport {
    pub alpha0: f64,
    pub alpha1: f64,
    pub trials: usize,
    pub failures: usize,
    pub successes: usize,
    /// Successes over non-failed trials.
    pub fraction: f64,
    /// 95% Wilson score interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub regime: String,
}

fn wilson(successes: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let n = total as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Fraction of draws where `|lambda2(T(alpha0))| > |lambda2(T(alpha1))|` on
/// the same realized graph.
pub fn speedup_detection(
    spec: &EliteGrassrootsSpec,
    phi: &WeightFunction,
    alpha0: f64,
    alpha1: f64,
    trials: usize,
    seed: u64,
) -> Result<SpeedupReport> {
    sequential_kernels();
    if alpha0 > alpha1 {
        return Err(Error::InvalidArgument(format!("alpha0 = {alpha0} exceeds alpha1 = {alpha1}")));
    }
    let regime = classify_regime(spec, phi)?;
    for alpha in [alpha0, alpha1] {
        if !regime.contains(alpha) {
            return Err(Error::OutsideRegime { alpha, region: regime.describe() });
        }
    }
    let (p0, p1) = (phi.with_alpha(alpha0), phi.with_alpha(alpha1));
    let outcomes: Vec<Result<bool>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let g = sample_adjacency(spec.block_model(), derive_seed(seed, &[GRAPH, k as u64]));
            let t0 = build_learning_matrix(&g, &p0)?;
            t0.check_convergent()?;
            let t1 = build_learning_matrix(&g, &p1)?;
            Ok(lambda2_numeric(&t0)?.abs() - lambda2_numeric(&t1)?.abs() > 0.0)
        })
        .collect();
    let ok: Vec<bool> = outcomes.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let successes = ok.iter().filter(|&&b| b).count();
    let (ci_low, ci_high) = wilson(successes, ok.len());
    Ok(SpeedupReport {
        alpha0,
        alpha1,
        trials,
        failures: trials - ok.len(),
        successes,
        fraction: if ok.is_empty() { 0.0 } else { successes as f64 / ok.len() as f64 },
        ci_low,
        ci_high,
        regime: regime.describe(),
    })
}

pub fn write_speedup_csv<W: Write>(mut out: W, r: &SpeedupReport) -> Result<()> {
    writeln!(out, "alpha0,alpha1,trials,failures,successes,fraction,ci_low,ci_high")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        r.alpha0, r.alpha1, r.trials, r.failures, r.successes, r.fraction, r.ci_low, r.ci_high
    )?;
    Ok(())
}

/// Sign checks of `d|lambda2(T*)|/d alpha` against the regimes.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub checked: usize,
    pub skipped: usize,
    /// `(alpha, slope)` where the slope has the wrong sign.
    pub violations: Vec<(f64, f64)>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Central differences with step `h`; points within `exclude` of a
/// threshold are skipped. Slopes within `tol` of zero count as either sign.
pub fn monotonicity_check(
    spec: &EliteGrassrootsSpec,
    phi: &WeightFunction,
    alphas: &[f64],
    exclude: f64,
    h: f64,
    tol: f64,
) -> Result<MonotonicityReport> {
    let regime = classify_regime(spec, phi)?;
    let abs_l2 = |a: f64| lambda2_closed_form(spec, &phi.with_alpha(a)).map(|r| r.abs_lambda2());
    let mut report = MonotonicityReport { checked: 0, skipped: 0, violations: Vec::new() };
    for &alpha in alphas {
        if regime.distance_to_threshold(alpha) < exclude {
            report.skipped += 1;
            continue;
        }
        let slope = (abs_l2(alpha + h)? - abs_l2(alpha - h)?) / (2.0 * h);
        let ok = if regime.contains(alpha) { slope <= tol } else { slope >= -tol };
        report.checked += 1;
        if !ok {
            report.violations.push((alpha, slope));
        }
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct PerturbationTable {
    pub delta: f64,
    /// Elite-Grassroots spec of the perturbed expectation.
    pub expected: EliteGrassrootsSpec,
    pub regime: Option<RegimeClassification>,
    pub rows: Vec<SweepRow>,
    pub monotonicity: Option<MonotonicityReport>,
}

/// The alpha sweep repeated on perturbed draws and on the perturbed
/// expectation, with regime thresholds recomputed per delta.
pub fn perturbation_study(cfg: &SweepConfig, deltas: &[f64], noise: &NoiseLaw) -> Result<Vec<PerturbationTable>> {
    sequential_kernels();
    cfg.validate()?;
    deltas
        .iter()
        .map(|&delta| {
            let expected = cfg.spec.perturbed(delta, noise.mean())?;
            let rows = sweep_rows(&expected, cfg.spec.block_model(), cfg, Some(Noise { delta, law: noise }));
            let regime = classify_regime(&expected, &cfg.phi).ok();
            let monotonicity = match regime {
                Some(_) => Some(monotonicity_check(&expected, &cfg.phi, &cfg.alphas, 1e-3, 1e-4, 1e-9)?),
                None => None,
            };
            Ok(PerturbationTable { delta, expected, regime, rows, monotonicity })
        })
        .collect()
}

pub fn write_perturbation_csv<W: Write>(mut out: W, tables: &[PerturbationTable]) -> Result<()> {
    writeln!(out, "delta,{SWEEP_HEADER}")?;
    for t in tables {
        for r in &t.rows {
            writeln!(out, "{},{}", t.delta, sweep_fields(r))?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub t: usize,
    /// `|(T^s - T^inf) b|_W / |b|_W` for the candidate, `s = 0..=t`.
    pub worst_curve: Vec<f64>,
    pub worst_ratio: f64,
    pub probe_ratios: Vec<f64>,
    /// 1-based rank of the candidate among candidate and probes, by ratio.
    pub rank: usize,
    pub max_probe_ratio: Option<f64>,
}

fn weighted_ratio(t_mat: &LearningMatrix, dev: &faer::Mat<f64>, b: &[f64]) -> f64 {
    let n = b.len();
    let y: Vec<f64> = (0..n).map(|i| (0..n).map(|j| dev[(i, j)] * b[j]).sum()).collect();
    weighted_norm(t_mat, &y) / weighted_norm(t_mat, b)
}

/// Checks that `worst` converges no faster than `samples` random unit
/// vectors at time `t`, in the weighted norm.
pub fn slowest_convergence_probe(
    t_mat: &LearningMatrix,
    worst: &BeliefVector,
    samples: usize,
    t: usize,
    seed: u64,
) -> Result<ProbeReport> {
    sequential_kernels();
    let n = t_mat.n();
    if worst.values.len() != n {
        return Err(Error::InvalidArgument(format!("candidate has length {}, expected {n}", worst.values.len())));
    }
    t_mat.check_convergent()?;
    let w = t_mat.stationary();
    let b_norm = weighted_norm(t_mat, &worst.values);
    let limit = w.limit_belief(&worst.values);
    let mut x = worst.values.clone();
    let mut worst_curve = Vec::with_capacity(t + 1);
    for s in 0..=t {
        if s > 0 {
            x = crate::dynamics::iterate_beliefs(t_mat, &BeliefVector::initial(x), 1)?.values;
        }
        let diff: Vec<f64> = x.iter().map(|v| v - limit).collect();
        worst_curve.push(weighted_norm(t_mat, &diff) / b_norm);
    }
    let worst_ratio = worst_curve[t];

    let probe_ratios: Vec<f64> = if samples == 0 {
        Vec::new()
    } else {
        let dev = deviation_from_consensus(t_mat, t)?;
        (0..samples)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream(derive_seed(seed, &[PROBE]), k as u64);
                let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let b = BeliefVector::unit(v);
                weighted_ratio(t_mat, &dev, &b.values)
            })
            .collect()
    };
    let slack = 1e-9 * worst_ratio.max(1e-300);
    let rank = 1 + probe_ratios.iter().filter(|&&r| r > worst_ratio + slack).count();
    let max_probe_ratio = probe_ratios.iter().copied().reduce(f64::max);
    Ok(ProbeReport { t, worst_curve, worst_ratio, probe_ratios, rank, max_probe_ratio })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeGraph {
    /// One draw of the block model.
    Realized,
    /// The expected adjacency `R`.
    Expected,
}

impl std::str::FromStr for ProbeGraph {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "realized" => Ok(ProbeGraph::Realized),
            "expected" => Ok(ProbeGraph::Expected),
            other => Err(Error::InvalidArgument(format!("unknown graph '{other}'"))),
        }
    }
}

impl ProbeGraph {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeGraph::Realized => "realized",
            ProbeGraph::Expected => "expected",
        }
    }
}

/// A probe together with the operator distance to consensus at each step.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRun {
    pub lambda2: f64,
    pub norm: Norm,
    pub report: ProbeReport,
    /// `max_{|b| = 1} |(T^s - T^inf) b|` in `norm`, `s = 0..=t`.
    pub operator_distance: Vec<f64>,
    /// `|lambda2|^s`.
    pub lambda2_power: Vec<f64>,
}

/// Builds `T` (one draw, or the expectation), takes its second eigenvector
/// as the candidate, and probes it.
pub fn probe_run(
    spec: &EliteGrassrootsSpec,
    phi: &WeightFunction,
    graph: ProbeGraph,
    t: usize,
    samples: usize,
    seed: u64,
    norm: Norm,
) -> Result<ProbeRun> {
    sequential_kernels();
    let (t_mat, lambda2, worst) = match graph {
        ProbeGraph::Realized => {
            let g = sample_adjacency(spec.block_model(), derive_seed(seed, &[GRAPH]));
            let t_mat = build_learning_matrix(&g, phi)?;
            let rep = eigen_symmetrized(&t_mat)?;
            let v = rep.second_eigenvector.clone().ok_or_else(|| Error::Eigen("no second eigenvector".into()))?;
            (t_mat, rep.lambda2, v)
        }
        ProbeGraph::Expected => {
            let r = crate::netgen::expected_adjacency(spec.block_model());
            let t_mat = build_learning_matrix(&r, phi)?;
            let wb = worst_initial_beliefs(spec, phi)?;
            (t_mat, wb.eigenvalue(), wb.representative().to_vec())
        }
    };
    let report = slowest_convergence_probe(&t_mat, &BeliefVector::unit(worst), samples, t, seed)?;
    let operator_distance =
        (0..=t).map(|s| convergence_distance(&t_mat, s as i64, norm)).collect::<Result<Vec<f64>>>()?;
    let lambda2_power = (0..=t).map(|s| lambda2.abs().powi(s as i32)).collect();
    Ok(ProbeRun { lambda2, norm, report, operator_distance, lambda2_power })
}

pub fn write_probe_csv<W: Write>(mut out: W, run: &ProbeRun) -> Result<()> {
    writeln!(out, "t,worst_ratio,operator_distance,lambda2_power")?;
    for (s, v) in run.report.worst_curve.iter().enumerate() {
        writeln!(out, "{s},{v},{},{}", run.operator_distance[s], run.lambda2_power[s])?;
    }
    Ok(())
}

pub fn write_probe_summary_csv<W: Write>(mut out: W, run: &ProbeRun) -> Result<()> {
    writeln!(out, "t,samples,lambda2,worst_ratio,max_probe_ratio,rank")?;
    let r = &run.report;
    writeln!(
        out,
        "{},{},{},{},{},{}",
        r.t,
        r.probe_ratios.len(),
        run.lambda2,
        r.worst_ratio,
        opt(r.max_probe_ratio),
        r.rank
    )?;
    Ok(())
}

/// Density audit plus the regime of the spec.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditSummary {
    pub report: crate::netgen::AssumptionReport,
    pub d1: f64,
    pub d2: f64,
    pub case_id: u8,
    pub regime: std::result::Result<RegimeClassification, String>,
}

pub fn audit(spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> AuditSummary {
    AuditSummary {
        report: check_assumptions(spec.block_model()),
        d1: spec.d1(),
        d2: spec.d2(),
        case_id: case_id(spec),
        regime: classify_regime(spec, phi).map_err(|e| e.to_string()),
    }
}
