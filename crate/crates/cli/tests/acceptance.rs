#![allow(clippy::needless_range_loop)]

//! Acceptance criteria, one line each. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use degroot_core::dynamics::{build_learning_matrix, consensus_limit, consensus_weights, convergence_distance, LearningMatrix, Norm};
use degroot_core::experiments::{
    alpha_grid, alpha_sweep, concentration_study, monotonicity_check, perturbation_study, slowest_convergence_probe,
    speedup_detection, SweepConfig,
};
use degroot_core::netgen::{expected_adjacency, sample_adjacency, Elite, EliteGrassrootsSpec, Graph, NoiseLaw};
use degroot_core::rng::stream;
use degroot_core::spectra::{
    eigen_symmetrized, eigenvalues_symmetrized, lambda2_closed_form, reduce_block_matrix, worst_initial_beliefs,
};
use degroot_core::dynamics::BeliefVector;
use degroot_core::weightfn::WeightFunction;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn t_star(spec: &EliteGrassrootsSpec, alpha: f64) -> LearningMatrix {
    build_learning_matrix(&expected_adjacency(spec.block_model()), &WeightFunction::power(alpha)).unwrap()
}

fn power(alpha: f64) -> WeightFunction {
    WeightFunction::power(alpha)
}

fn two_groups(n1: usize) -> EliteGrassrootsSpec {
    EliteGrassrootsSpec::from_total(n1, 1000, 2, 0.4, 0.2).unwrap()
}

fn four_groups() -> EliteGrassrootsSpec {
    EliteGrassrootsSpec::from_total(400, 1000, 4, 0.5, 0.3).unwrap()
}

fn case_three(m: usize) -> EliteGrassrootsSpec {
    EliteGrassrootsSpec::new(200, 1200 / (m - 1), m, 0.3, 0.1).unwrap()
}

/// 30 specs, ten per case, with alpha drawn from [-6, 6].
fn random_specs() -> Vec<(EliteGrassrootsSpec, f64)> {
    let mut rng = stream(2024, 0);
    let mut counts = [0usize; 3];
    let mut out = Vec::new();
    while out.len() < 30 {
        let m = if counts[0] < 10 { 2 } else { rng.random_range(3..=5) };
        let n2 = rng.random_range(30..=if m == 2 { 500 } else { 220 });
        let n1 = rng.random_range(30..=400);
        let p = rng.random_range(0.1..0.9);
        let q = rng.random_range(0.05..0.9);
        let alpha = rng.random_range(-6.0..6.0);
        if n1 + (m - 1) * n2 > 1000 {
            continue;
        }
        let Ok(spec) = EliteGrassrootsSpec::new(n1, n2, m, p, q) else { continue };
        let case = match (m, spec.elite()) {
            (2, _) => 0,
            (_, Elite::GroupOne) => 1,
            _ => 2,
        };
        if counts[case] < 10 {
            counts[case] += 1;
            out.push((spec, alpha));
        }
    }
    out
}

fn distinct_nonzero(vals: &[f64], tol: f64) -> Vec<f64> {
    let mut v: Vec<f64> = vals.iter().copied().filter(|x| x.abs() > tol).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if out.last().is_none_or(|&y| (y - x).abs() > tol) {
            out.push(x);
        }
    }
    out
}

fn criteria_1_2() -> (Outcome, Outcome) {
    let specs = random_specs();
    let mut worst1: f64 = 0.0;
    let mut worst2: f64 = 0.0;
    let mut mismatched_sets = 0;
    for (spec, alpha) in &specs {
        let phi = power(*alpha);
        let closed = lambda2_closed_form(spec, &phi).unwrap();
        let numeric = eigenvalues_symmetrized(&t_star(spec, *alpha)).unwrap();
        worst1 = worst1.max((closed.abs_lambda2() - numeric[1].abs()).abs());

        let f = reduce_block_matrix(spec, &phi).unwrap();
        let fd = distinct_nonzero(&f.eigenvalues(), 1e-9);
        let td = distinct_nonzero(&numeric, 1e-9);
        if fd.len() != td.len() {
            mismatched_sets += 1;
            continue;
        }
        for (a, b) in fd.iter().zip(&td) {
            worst2 = worst2.max((a - b).abs());
        }
    }
    (
        outcome(worst1 <= 1e-9, format!("30 specs, max |closed - dense| = {worst1:.2e} (tol 1e-9)")),
        outcome(
            mismatched_sets == 0 && worst2 <= 1e-9,
            format!("30 specs, set-size mismatches = {mismatched_sets}, max eigenvalue gap = {worst2:.2e} (tol 1e-9)"),
        ),
    )
}

/// Single interior maximum near the threshold, both ends below the peak.
fn peak_shape(spec: &EliteGrassrootsSpec) -> Result<String, String> {
    let cfg = SweepConfig::new(spec.clone(), alpha_grid(-10.0, 10.0, 0.25).unwrap());
    let rows = alpha_sweep(&cfg).unwrap();
    let v: Vec<f64> = rows.iter().map(|r| r.lambda2_closed.unwrap()).collect();
    let k = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    let (d1, d2) = (spec.d1_formula(), spec.d2_formula());
    let threshold = (spec.n1() as f64 / spec.n2() as f64).ln() / (d2 / d1).ln();
    let unimodal = (1..=k).all(|i| v[i] > v[i - 1]) && (k + 1..v.len()).all(|i| v[i] < v[i - 1]);
    let interior = k > 0 && k < v.len() - 1;
    let near = (rows[k].alpha - threshold).abs() <= 0.25;
    let ends = v[0] < v[k] && v[v.len() - 1] < v[k];
    let msg = format!(
        "n1={} peak {:.4} at alpha={} (threshold {:.4}), ends {:.4}/{:.4}",
        spec.n1(),
        v[k],
        rows[k].alpha,
        threshold,
        v[0],
        v[v.len() - 1]
    );
    if unimodal && interior && near && ends { Ok(msg) } else { Err(msg) }
}

fn criterion_3() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for n1 in [200, 300, 400] {
        let spec = two_groups(n1);
        match peak_shape(&spec) {
            Ok(m) => details.push(m),
            Err(m) => {
                pass = false;
                details.push(format!("FAILED {m}"));
            }
        }
        // The closed-form curve is the T* curve: spot-check the ends.
        for alpha in [-10.0, 10.0] {
            let c = lambda2_closed_form(&spec, &power(alpha)).unwrap().abs_lambda2();
            let d = eigenvalues_symmetrized(&t_star(&spec, alpha)).unwrap()[1].abs();
            if (c - d).abs() > 1e-9 {
                pass = false;
                details.push(format!("closed/dense mismatch at n1={n1} alpha={alpha}"));
            }
        }
    }
    outcome(pass, details.join("; "))
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    let cases = [
        ("case2 m=4", four_groups(), -10.0),
        ("case3 m=4", case_three(4), 10.0),
        ("case3 m=6", case_three(6), 10.0),
    ];
    for (name, spec, alpha) in cases {
        let (m, p, q) = (spec.m() as f64, spec.p(), spec.q());
        let limit = (p - q) / (p + (m - 2.0) * q);
        let value = eigenvalues_symmetrized(&t_star(&spec, alpha)).unwrap()[1].abs();
        let ok = (value - limit).abs() <= 1e-3;
        pass &= ok;
        // How far out the asymptote is actually reached, and whether the gap
        // shrinks monotonically on the way.
        let dir = alpha.signum();
        let gap = |a: f64| (lambda2_closed_form(&spec, &power(a)).unwrap().abs_lambda2() - limit).abs();
        let mut a = alpha;
        let mut shrinking = true;
        let mut prev = gap(a);
        while prev > 1e-3 && a.abs() < 500.0 {
            a += dir;
            let next = gap(a);
            shrinking &= next < prev;
            prev = next;
        }
        details.push(format!(
            "{name}: |lambda2|={value:.5} at alpha={alpha} vs limit {limit:.5} (gap {:.2e}); within 1e-3 from alpha={a}, gap shrinking={shrinking}",
            (value - limit).abs()
        ));
    }
    outcome(pass, details.join("; "))
}

fn monotonicity_specs(delta: f64) -> Vec<(&'static str, EliteGrassrootsSpec)> {
    let base = [("case1", two_groups(200)), ("case2", four_groups()), ("case3", case_three(4))];
    base.into_iter().map(|(n, s)| (n, s.perturbed(delta, 0.5).unwrap())).collect()
}

fn monotonicity_pass(specs: &[(&str, EliteGrassrootsSpec)]) -> (bool, String) {
    let grid: Vec<f64> = (0..50).map(|k| -10.0 + 20.0 * k as f64 / 49.0).collect();
    let mut pass = true;
    let mut details = Vec::new();
    for (name, spec) in specs {
        let rep = monotonicity_check(spec, &power(0.0), &grid, 1e-3, 1e-4, 0.0).unwrap();
        pass &= rep.passed();
        details.push(format!("{name}: {} checked, {} violations", rep.checked, rep.violations.len()));
        if let Some((a, s)) = rep.violations.first() {
            details.push(format!("first at alpha={a:.3} slope={s:.2e}"));
        }
    }
    (pass, details.join("; "))
}

fn criterion_5() -> Outcome {
    let (pass, detail) = monotonicity_pass(&monotonicity_specs(0.0));
    outcome(pass, detail)
}

/// 20 connected draws at n = 200 with assorted specs and alphas.
fn random_graphs() -> Vec<(Graph, f64)> {
    let mut rng = stream(77, 0);
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < 20 {
        let m = rng.random_range(2..=4);
        let n2 = rng.random_range(20..=150 / (m - 1));
        let n1 = 200 - (m - 1) * n2;
        let p = rng.random_range(0.2..0.6);
        let q = rng.random_range(0.05..0.3);
        let alpha = rng.random_range(-3.0..3.0);
        let Ok(spec) = EliteGrassrootsSpec::new(n1, n2, m, p, q) else { continue };
        seed += 1;
        let g = sample_adjacency(spec.block_model(), seed);
        if consensus_limit(&g, &power(alpha)).is_ok() {
            out.push((g, alpha));
        }
    }
    out
}

fn criterion_6(graphs: &[(Graph, f64)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut sandwich_ok = true;
    for (g, alpha) in graphs {
        let t = build_learning_matrix(g, &power(*alpha)).unwrap();
        let l2 = eigen_symmetrized(&t).unwrap().abs_lambda2();
        let scale = t.metric_scale();
        let kappa = scale.iter().cloned().fold(0.0, f64::max) / scale.iter().cloned().fold(f64::INFINITY, f64::min);
        for s in [1, 5, 10] {
            let target = l2.powi(s);
            let dw = convergence_distance(&t, s as i64, Norm::DWeighted).unwrap();
            worst = worst.max((dw - target).abs());
            let de = convergence_distance(&t, s as i64, Norm::Euclidean).unwrap();
            let slack = 1e-12;
            if de < target / kappa - slack || de > kappa * target + slack {
                sandwich_ok = false;
            }
        }
    }
    outcome(
        worst <= 1e-8 && sandwich_ok,
        format!("20 graphs, t in {{1,5,10}}: max |dist_W - |lambda2|^t| = {worst:.2e} (tol 1e-8), kappa sandwich holds: {sandwich_ok}"),
    )
}

/// Lazy power iteration on the transpose; converges on bipartite graphs too.
fn stationary_oracle(t: &LearningMatrix) -> Vec<f64> {
    let n = t.n();
    let mut w = vec![1.0 / n as f64; n];
    for _ in 0..10_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += w[i] * t.entry(i, j);
            }
        }
        for j in 0..n {
            w[j] = 0.5 * (w[j] + next[j]);
        }
    }
    w
}

fn criterion_7(graphs: &[(Graph, f64)]) -> Outcome {
    let mut residual: f64 = 0.0;
    for (g, alpha) in graphs {
        let phi = power(*alpha);
        let w = consensus_limit(g, &phi).unwrap();
        residual = residual.max(w.fixed_point_residual(&build_learning_matrix(g, &phi).unwrap()));
    }
    let star = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
    let w = consensus_weights(&star, &power(1.0)).unwrap();
    let oracle = stationary_oracle(&build_learning_matrix(&star, &power(1.0)).unwrap());
    let expected = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
    let star_err = w
        .weights
        .iter()
        .zip(&oracle)
        .zip(expected)
        .map(|((a, b), c)| (a - b).abs().max((a - c).abs()))
        .fold(0.0, f64::max);
    outcome(
        residual <= 1e-10 && star_err <= 1e-12,
        format!(
            "max fixed-point residual {residual:.2e} (tol 1e-10); star weights {:?}, max error vs oracle {star_err:.2e}",
            w.weights.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_8() -> Outcome {
    let cases = [
        (two_groups(200), -5.0),
        (two_groups(200), 0.0),
        (two_groups(200), 2.0),
        (four_groups(), -8.0),
        (four_groups(), 4.0),
        (case_three(4), -4.0),
        (case_three(4), 8.0),
    ];
    let mut pass = true;
    let mut worst_res: f64 = 0.0;
    let mut ranks = Vec::new();
    for (i, (spec, alpha)) in cases.iter().enumerate() {
        let phi = power(*alpha);
        let wb = worst_initial_beliefs(spec, &phi).unwrap();
        let t = t_star(spec, *alpha);
        let v = wb.representative();
        let n = t.n();
        let res = (0..n)
            .map(|r| {
                let tv: f64 = (0..n).map(|c| t.entry(r, c) * v[c]).sum();
                (tv - wb.eigenvalue() * v[r]).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        worst_res = worst_res.max(res);
        let probe = slowest_convergence_probe(&t, &BeliefVector::initial(v.to_vec()), 200, 10, i as u64).unwrap();
        pass &= res <= 1e-9 && probe.rank == 1;
        ranks.push(probe.rank);
    }
    outcome(pass, format!("{} specs, max eigen-residual {worst_res:.2e} (tol 1e-9), probe ranks {ranks:?}", cases.len()))
}

fn criterion_9() -> Outcome {
    let rows = concentration_study(&two_groups(200), &[250, 500, 1000, 2000], 20, 9, &power(1.0)).unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| r.median_abs_gap).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let band = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        decreasing && band < 5.0,
        format!(
            "median gaps {:?}, ratio band {band:.2} (< 5), failures {}",
            gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>(),
            rows.iter().map(|r| r.failures).sum::<usize>()
        ),
    )
}

fn criterion_10() -> Outcome {
    let r = speedup_detection(&two_groups(200), &power(0.0), 0.0, 2.0, 100, 10).unwrap();
    outcome(
        r.fraction >= 0.95,
        format!("fraction {:.2} ({} of {}), 95% CI [{:.3}, {:.3}]", r.fraction, r.successes, r.trials - r.failures, r.ci_low, r.ci_high),
    )
}

fn criterion_11() -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for delta in [0.1, 0.3] {
        for n1 in [200, 300, 400] {
            let spec = two_groups(n1).perturbed(delta, 0.5).unwrap();
            if let Err(m) = peak_shape(&spec) {
                pass = false;
                details.push(format!("delta={delta} shape FAILED {m}"));
            }
        }
        let (ok, d) = monotonicity_pass(&monotonicity_specs(delta));
        pass &= ok;
        details.push(format!("delta={delta}: peak shapes ok, monotonicity {d}"));
    }
    let mut cfg = SweepConfig::new(two_groups(200), vec![-4.0, -1.0, 0.0, 2.0, 6.0]);
    cfg.trials = 2;
    cfg.seed = 11;
    let base = alpha_sweep(&cfg).unwrap();
    let tables = perturbation_study(&cfg, &[0.0], &NoiseLaw::Uniform).unwrap();
    let identical = tables[0].rows == base;
    pass &= identical;
    details.push(format!("delta=0 identical to sweep: {identical}"));
    outcome(pass, details.join("; "))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.txt")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}

fn criterion_12() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_degroot");
    let tmp = tempfile::tempdir().unwrap();
    let spec = ["--n1", "30", "--n", "110", "--m", "2", "--p", "0.5", "--q", "0.2"];
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("sweep", vec!["--alpha", "-2:2:1", "--trials", "2", "--seed", "3", "--numeric", "true"]),
        ("concentration", vec!["--ns", "110,220,440", "--trials", "3", "--seed", "4"]),
        ("speedup", vec!["--alpha0", "0", "--alpha1", "2", "--trials", "5", "--seed", "5"]),
        ("perturb", vec!["--alpha", "-1:1:1", "--delta", "0,0.2", "--trials", "2", "--seed", "6"]),
        ("audit", vec![]),
        ("probe", vec!["--alpha", "1", "--t", "4", "--samples", "10", "--seed", "7"]),
    ];
    let mut mismatched = Vec::new();
    for (cmd, extra) in &runs {
        let first = tmp.path().join(format!("{cmd}-a"));
        let second = tmp.path().join(format!("{cmd}-b"));
        let status = Command::new(bin)
            .arg(cmd)
            .args(spec)
            .args(extra)
            .arg("--out")
            .arg(&first)
            .env_remove("DEGROOT_OUT")
            .env("RAYON_NUM_THREADS", "1")
            .output()
            .unwrap();
        let replay = Command::new(bin)
            .arg("replay")
            .arg(first.join("manifest.txt"))
            .arg("--out")
            .arg(&second)
            .env_remove("DEGROOT_OUT")
            .env("RAYON_NUM_THREADS", "4")
            .output()
            .unwrap();
        if !status.status.success() || !replay.status.success() {
            mismatched.push(format!("{cmd}: {}", String::from_utf8_lossy(&status.stderr).trim()));
        } else if files(&first) != files(&second) {
            mismatched.push(cmd.to_string());
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("{} subcommands replayed from manifest with a different thread count; mismatches {mismatched:?}", runs.len()),
    )
}

fn main() {
    let mut results: Vec<(u32, Outcome, f64)> = Vec::new();
    let mut record = |id: u32, start: Instant, o: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        println!("[criterion {id}] {} ({secs:.1}s) {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, o, secs));
    };

    let s = Instant::now();
    let (c1, c2) = criteria_1_2();
    record(1, s, c1);
    record(2, s, c2);
    let s = Instant::now();
    record(3, s, criterion_3());
    let s = Instant::now();
    record(4, s, criterion_4());
    let s = Instant::now();
    record(5, s, criterion_5());
    let s = Instant::now();
    let graphs = random_graphs();
    record(6, s, criterion_6(&graphs));
    let s = Instant::now();
    record(7, s, criterion_7(&graphs));
    let s = Instant::now();
    record(8, s, criterion_8());
    let s = Instant::now();
    record(9, s, criterion_9());
    let s = Instant::now();
    record(10, s, criterion_10());
    let s = Instant::now();
    record(11, s, criterion_11());
    let s = Instant::now();
    record(12, s, criterion_12());

    let failed: Vec<u32> = results.iter().filter(|(_, o, _)| !o.pass).map(|(id, _, _)| *id).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
