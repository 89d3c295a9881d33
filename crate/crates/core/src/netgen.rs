//! Stochastic block models: specifications, sampling, expectation,
//! perturbation, and the standing density assumptions.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Symmetric block model: group sizes plus an `m x m` linking-probability
/// matrix (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct BlockModelSpec {
    group_sizes: Vec<usize>,
    link_probs: Vec<f64>,
    self_loops: bool,
}

impl BlockModelSpec {
    pub fn new(group_sizes: Vec<usize>, link_probs: Vec<Vec<f64>>) -> Result<Self> {
        let m = group_sizes.len();
        if m == 0 {
            return Err(Error::InvalidSpec("at least one group is required".into()));
        }
        if let Some(k) = group_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidSpec(format!("group {} is empty", k + 1)));
        }
        if link_probs.len() != m || link_probs.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidSpec(format!("link probabilities must be {m} x {m}")));
        }
        for k in 0..m {
            for l in 0..m {
                let v = link_probs[k][l];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::ProbabilityOutOfRange { name: format!("P[{}][{}]", k + 1, l + 1), value: v });
                }
                if v != link_probs[l][k] {
                    return Err(Error::InvalidSpec(format!(
                        "link probabilities not symmetric at ({}, {})",
                        k + 1,
                        l + 1
                    )));
                }
            }
        }
        Ok(BlockModelSpec { group_sizes, link_probs: link_probs.into_iter().flatten().collect(), self_loops: true })
    }

    /// Drops the diagonal Bernoulli draws (sensitivity checks only; the
    /// closed forms assume self-loops are drawn).
    pub fn without_self_loops(mut self) -> Self {
        self.self_loops = false;
        self
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn n(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn prob(&self, k: usize, l: usize) -> f64 {
        self.link_probs[k * self.groups() + l]
    }

    /// Group label of every vertex; groups occupy consecutive index ranges.
    pub fn labels(&self) -> Vec<usize> {
        self.group_sizes.iter().enumerate().flat_map(|(k, &s)| std::iter::repeat_n(k, s)).collect()
    }

    /// Expected degree of a vertex in group `k` (ascending-index summation,
    /// matching the row sums of [`expected_adjacency`]).
    pub fn expected_degree(&self, k: usize) -> f64 {
        let labels = self.labels();
        let own = labels.iter().position(|&g| g == k).expect("group exists");
        let mut d = 0.0;
        for (j, &l) in labels.iter().enumerate() {
            if j == own && !self.self_loops {
                continue;
            }
            d += self.prob(k, l);
        }
        d
    }

    /// `(1 - delta) P + delta * mean(noise)`: linking matrix of the
    /// expectation of a perturbed draw.
    pub fn perturbed_expectation(&self, delta: f64, noise_mean: f64) -> Result<Self> {
        check_delta(delta)?;
        let m = self.groups();
        let probs = (0..m)
            .map(|k| (0..m).map(|l| (1.0 - delta) * self.prob(k, l) + delta * noise_mean).collect())
            .collect();
        let mut spec = BlockModelSpec::new(self.group_sizes.clone(), probs)?;
        spec.self_loops = self.self_loops;
        Ok(spec)
    }
}

/// Which degree class holds the larger expected degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elite {
    /// Group 1 has the larger expected degree.
    GroupOne,
    /// Groups 2..m have the larger expected degree.
    Others,
    /// `d1* = d2*`; only reachable through the relaxed constructor.
    Tied,
}

/// Two-parameter block model: one group of size `n1`, `m - 1` groups of
/// size `n2`, within-group probability `p`, between-group probability `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct EliteGrassrootsSpec {
    base: BlockModelSpec,
    n1: usize,
    n2: usize,
    p: f64,
    q: f64,
    d1: f64,
    d2: f64,
    elite: Elite,
}

impl EliteGrassrootsSpec {
    /// Strict constructor: `n1 != n2` and `d1* != d2*`.
    pub fn new(n1: usize, n2: usize, m: usize, p: f64, q: f64) -> Result<Self> {
        let spec = Self::build(n1, n2, m, p, q)?;
        if spec.elite == Elite::Tied {
            return Err(Error::DegenerateDegrees(spec.d1));
        }
        Ok(spec)
    }

    /// Like [`EliteGrassrootsSpec::new`] but accepts `d1* = d2*` when
    /// `m = 2` (e.g. `p = q`), where the closed form still applies.
    pub fn new_allow_tied(n1: usize, n2: usize, m: usize, p: f64, q: f64) -> Result<Self> {
        let spec = Self::build(n1, n2, m, p, q)?;
        if spec.elite == Elite::Tied && m != 2 {
            return Err(Error::DegenerateDegrees(spec.d1));
        }
        Ok(spec)
    }

    /// Builds from a total population `n` with `n2 = (n - n1) / (m - 1)`.
    pub fn from_total(n1: usize, n: usize, m: usize, p: f64, q: f64) -> Result<Self> {
        if m < 2 || n <= n1 || !(n - n1).is_multiple_of(m - 1) {
            return Err(Error::InvalidSpec(format!(
                "n - n1 = {} must split evenly into m - 1 = {} groups",
                n.saturating_sub(n1),
                m.saturating_sub(1)
            )));
        }
        Self::new(n1, (n - n1) / (m - 1), m, p, q)
    }

    fn build(n1: usize, n2: usize, m: usize, p: f64, q: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidSpec(format!("m = {m}; at least two groups are required")));
        }
        for (name, v) in [("p", p), ("q", q)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::ProbabilityOutOfRange { name: name.into(), value: v });
            }
        }
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidSpec("group sizes must be positive".into()));
        }
        if n1 == n2 {
            return Err(Error::EqualGroupSizes(n1));
        }
        let mut sizes = vec![n1];
        sizes.extend(std::iter::repeat_n(n2, m - 1));
        let probs = (0..m).map(|k| (0..m).map(|l| if k == l { p } else { q }).collect()).collect();
        let base = BlockModelSpec::new(sizes, probs)?;
        let d1 = base.expected_degree(0);
        let d2 = base.expected_degree(1);
        let elite = if d1 > d2 {
            Elite::GroupOne
        } else if d1 < d2 {
            Elite::Others
        } else {
            Elite::Tied
        };
        Ok(EliteGrassrootsSpec { base, n1, n2, p, q, d1, d2, elite })
    }

    pub fn block_model(&self) -> &BlockModelSpec {
        &self.base
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn m(&self) -> usize {
        self.base.groups()
    }
    pub fn n(&self) -> usize {
        self.base.n()
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    /// Expected degree of group 1.
    pub fn d1(&self) -> f64 {
        self.d1
    }
    /// Expected degree of groups 2..m.
    pub fn d2(&self) -> f64 {
        self.d2
    }
    pub fn elite(&self) -> Elite {
        self.elite
    }

    /// `n1 p + (m - 1) n2 q`.
    pub fn d1_formula(&self) -> f64 {
        let (n1, n2, m) = (self.n1 as f64, self.n2 as f64, self.m() as f64);
        n1 * self.p + (m - 1.0) * n2 * self.q
    }

    /// `n1 q + n2 p + (m - 2) n2 q`.
    pub fn d2_formula(&self) -> f64 {
        let (n1, n2, m) = (self.n1 as f64, self.n2 as f64, self.m() as f64);
        n1 * self.q + n2 * self.p + (m - 2.0) * n2 * self.q
    }

    /// Same group sizes with linking probabilities mixed toward the noise
    /// mean: `(1 - delta) p + delta mu`, `(1 - delta) q + delta mu`.
    pub fn perturbed(&self, delta: f64, noise_mean: f64) -> Result<Self> {
        check_delta(delta)?;
        let mix = |x: f64| (1.0 - delta) * x + delta * noise_mean;
        Self::new_allow_tied(self.n1, self.n2, self.m(), mix(self.p), mix(self.q))
    }

    /// Same fractions and probabilities at a different total size.
    pub fn rescaled(&self, n: usize) -> Result<Self> {
        let frac1 = self.n1 as f64 / self.n() as f64;
        let m = self.m();
        let n1 = ((n as f64) * frac1).round() as usize;
        let n2 = (n.saturating_sub(n1) as f64 / (m - 1) as f64).round() as usize;
        Self::new(n1, n2, m, self.p, self.q)
    }
}

/// Strict constructor for the two-parameter model.
pub fn elite_grassroots_spec(n1: usize, n2: usize, m: usize, p: f64, q: f64) -> Result<EliteGrassrootsSpec> {
    EliteGrassrootsSpec::new(n1, n2, m, p, q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    Realized,
    Expected,
    Perturbed,
}

impl GraphKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Realized => "realized",
            GraphKind::Expected => "expected",
            GraphKind::Perturbed => "perturbed",
        }
    }
}

impl std::str::FromStr for GraphKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "realized" => Ok(GraphKind::Realized),
            "expected" => Ok(GraphKind::Expected),
            "perturbed" => Ok(GraphKind::Perturbed),
            other => Err(Error::InvalidArgument(format!("unknown graph kind '{other}'"))),
        }
    }
}

/// Symmetric weighted adjacency with group labels. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    weights: Mat<f64>,
    group_of: Vec<usize>,
    groups: usize,
    kind: GraphKind,
}

impl Graph {
    /// Builds from a dense row-major weight list. Checks symmetry and
    /// that all weights lie in `[0, 1]`.
    pub fn from_weights(
        weights: Mat<f64>,
        group_of: Vec<usize>,
        kind: GraphKind,
    ) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n || group_of.len() != n {
            return Err(Error::InvalidArgument("weights must be n x n with n labels".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[(i, j)];
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidArgument(format!("weight {w} at ({i}, {j}) outside [0, 1]")));
                }
                if j > i && w.to_bits() != weights[(j, i)].to_bits() {
                    return Err(Error::InvalidArgument(format!("weights not symmetric at ({i}, {j})")));
                }
            }
        }
        let groups = group_of.iter().max().map_or(0, |&g| g + 1);
        Ok(Graph { weights, group_of, groups, kind })
    }

    /// Unweighted graph from an edge list, every vertex in group 0.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut w = Mat::<f64>::zeros(n, n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) out of range")));
            }
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
        Graph::from_weights(w, vec![0; n], GraphKind::Realized)
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }
    pub fn weights(&self) -> &Mat<f64> {
        &self.weights
    }
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }
    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }
    pub fn groups(&self) -> usize {
        self.groups
    }
    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn has_self_loop(&self) -> bool {
        (0..self.n()).any(|i| self.weights[(i, i)] > 0.0)
    }

    /// Writes the text format: header `n m kind`, one line of group labels,
    /// then `n` rows of `n` space-separated weights.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.n();
        writeln!(out, "{} {} {}", n, self.groups, self.kind.as_str())?;
        let labels: Vec<String> = self.group_of.iter().map(|g| g.to_string()).collect();
        writeln!(out, "{}", labels.join(" "))?;
        let mut line = String::new();
        for i in 0..n {
            line.clear();
            for j in 0..n {
                if j > 0 {
                    line.push(' ');
                }
                // Shortest round-trip representation.
                line.push_str(&format!("{}", self.weights[(i, j)]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l?)),
                None => Err(Error::Parse { line: 0, msg: format!("missing {what}") }),
            }
        };
        let (ln, header) = next("header")?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse { line: ln, msg: "header must be 'n m kind'".into() });
        }
        let parse_usize = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|e| Error::Parse { line, msg: format!("'{s}': {e}") })
        };
        let n = parse_usize(parts[0], ln)?;
        let m = parse_usize(parts[1], ln)?;
        let kind: GraphKind = parts[2].parse().map_err(|_| Error::Parse { line: ln, msg: format!("bad kind '{}'", parts[2]) })?;
        let (ln, label_line) = next("group labels")?;
        let group_of = label_line
            .split_whitespace()
            .map(|s| parse_usize(s, ln))
            .collect::<Result<Vec<_>>>()?;
        if group_of.len() != n {
            return Err(Error::Parse { line: ln, msg: format!("expected {n} labels, found {}", group_of.len()) });
        }
        if group_of.iter().any(|&g| g >= m.max(1)) {
            return Err(Error::Parse { line: ln, msg: format!("labels must be < {m}") });
        }
        let mut w = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            let (ln, row) = next("weight row")?;
            let vals: Vec<&str> = row.split_whitespace().collect();
            if vals.len() != n {
                return Err(Error::Parse { line: ln, msg: format!("expected {n} weights, found {}", vals.len()) });
            }
            for (j, s) in vals.iter().enumerate() {
                w[(i, j)] = s.parse::<f64>().map_err(|e| Error::Parse { line: ln, msg: format!("'{s}': {e}") })?;
            }
        }
        let mut g = Graph::from_weights(w, group_of, kind)?;
        g.groups = m;
        Ok(g)
    }
}

/// `d_i = sum_j w_ij`, summed in ascending `j`.
pub fn degrees(g: &Graph) -> Vec<f64> {
    let n = g.n();
    (0..n).map(|i| (0..n).map(|j| g.weights[(i, j)]).sum()).collect()
}

/// One realization of the block model. Row `i` draws `j >= i` from its own
/// stream keyed by `(seed, i)`; the lower triangle mirrors the upper.
pub fn sample_adjacency(spec: &BlockModelSpec, seed: u64) -> Graph {
    let labels = spec.labels();
    let n = labels.len();
    let mut w = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let mut rng = rng::stream(seed, i as u64);
        let start = if spec.self_loops { i } else { i + 1 };
        for j in start..n {
            let p = spec.prob(labels[i], labels[j]);
            if rng.random::<f64>() < p {
                w[(i, j)] = 1.0;
                w[(j, i)] = 1.0;
            }
        }
    }
    Graph { weights: w, group_of: labels, groups: spec.groups(), kind: GraphKind::Realized }
}

/// `R = E[A]`: entry `(i, j)` is `P_kl` for the groups of `i` and `j`.
pub fn expected_adjacency(spec: &BlockModelSpec) -> Graph {
    let labels = spec.labels();
    let n = labels.len();
    let w = Mat::<f64>::from_fn(n, n, |i, j| {
        if i == j && !spec.self_loops {
            0.0
        } else {
            spec.prob(labels[i], labels[j])
        }
    });
    Graph { weights: w, group_of: labels, groups: spec.groups(), kind: GraphKind::Expected }
}

/// Draws of the perturbation noise. Must land in `[0, 1]`.
pub trait NoiseSampler: Send + Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64;
    fn mean(&self) -> f64;
}

#[derive(Clone)]
pub enum NoiseLaw {
    Uniform,
    /// Every draw equals the given value.
    PointMass(f64),
    Custom(Arc<dyn NoiseSampler>),
}

impl fmt::Debug for NoiseLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseLaw::Uniform => write!(f, "Uniform"),
            NoiseLaw::PointMass(v) => write!(f, "PointMass({v})"),
            NoiseLaw::Custom(s) => write!(f, "Custom(mean = {})", s.mean()),
        }
    }
}

impl NoiseLaw {
    pub fn mean(&self) -> f64 {
        match self {
            NoiseLaw::Uniform => 0.5,
            NoiseLaw::PointMass(v) => *v,
            NoiseLaw::Custom(s) => s.mean(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<f64> {
        let x = match self {
            NoiseLaw::Uniform => rng.random::<f64>(),
            NoiseLaw::PointMass(v) => *v,
            NoiseLaw::Custom(s) => s.sample(rng),
        };
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("noise draw {x} outside [0, 1]")));
        }
        Ok(x)
    }
}

#[derive(Clone, Debug)]
pub struct PerturbationSpec {
    pub delta: f64,
    pub noise: NoiseLaw,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn uniform(delta: f64, seed: u64) -> Self {
        PerturbationSpec { delta, noise: NoiseLaw::Uniform, seed }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta = {delta} outside [0, 1]")));
    }
    Ok(())
}

/// `(1 - delta) A_ij + delta eps_ij` with `eps` symmetric: the upper
/// triangle is drawn (row streams keyed by the perturbation seed) and
/// mirrored.
pub fn perturb(g: &Graph, pert: &PerturbationSpec) -> Result<Graph> {
    check_delta(pert.delta)?;
    if pert.delta == 0.0 {
        return Ok(g.clone());
    }
    let n = g.n();
    let delta = pert.delta;
    let mut w = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let mut rng = rng::stream(pert.seed, i as u64);
        for j in i..n {
            let eps = pert.noise.draw(&mut rng)?;
            let v = ((1.0 - delta) * g.weights[(i, j)] + delta * eps).clamp(0.0, 1.0);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(Graph { weights: w, group_of: g.group_of.clone(), groups: g.groups, kind: GraphKind::Perturbed })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The proxy cannot be computed (e.g. zero entries in `P`).
    Undefined,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Undefined => "undefined",
        }
    }
}

/// Finite-n proxies for the asymptotic density assumptions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssumptionThresholds {
    pub min_density_score: f64,
    pub min_group_fraction: f64,
    pub max_density_ratio: f64,
}

impl Default for AssumptionThresholds {
    fn default() -> Self {
        AssumptionThresholds { min_density_score: 5.0, min_group_fraction: 0.01, max_density_ratio: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub n: usize,
    /// `min_i d_i(R) / n`.
    pub tau_n: f64,
    /// `tau_n / sqrt(log n / n)`.
    pub density_score: f64,
    pub min_group_fraction: f64,
    /// Largest over smallest positive entry of `P`.
    pub density_ratio: f64,
    pub has_zero_probabilities: bool,
    pub density: Verdict,
    pub no_vanishing_groups: Verdict,
    pub comparable_densities: Verdict,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        [self.density, self.no_vanishing_groups, self.comparable_densities]
            .iter()
            .all(|v| *v == Verdict::Pass)
    }
}

pub fn check_assumptions(spec: &BlockModelSpec) -> AssumptionReport {
    check_assumptions_with(spec, &AssumptionThresholds::default())
}

pub fn check_assumptions_with(spec: &BlockModelSpec, th: &AssumptionThresholds) -> AssumptionReport {
    let n = spec.n();
    let nf = n as f64;
    let min_degree = (0..spec.groups()).map(|k| spec.expected_degree(k)).fold(f64::INFINITY, f64::min);
    let tau_n = min_degree / nf;
    let scale = if n > 1 { (nf.ln() / nf).sqrt() } else { 0.0 };
    let density_score = if scale > 0.0 { tau_n / scale } else { 0.0 };
    let min_group_fraction =
        spec.group_sizes().iter().map(|&s| s as f64 / nf).fold(f64::INFINITY, f64::min);
    let m = spec.groups();
    let entries: Vec<f64> = (0..m).flat_map(|k| (0..m).map(move |l| (k, l))).map(|(k, l)| spec.prob(k, l)).collect();
    let has_zero = entries.contains(&0.0);
    let max_p = entries.iter().cloned().fold(0.0, f64::max);
    let min_pos = entries.iter().cloned().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let density_ratio = if min_pos.is_finite() { max_p / min_pos } else { 0.0 };

    let density = if n > 1 && density_score >= th.min_density_score { Verdict::Pass } else { Verdict::Fail };
    let no_vanishing_groups =
        if min_group_fraction >= th.min_group_fraction { Verdict::Pass } else { Verdict::Fail };
    let comparable_densities = if has_zero || !min_pos.is_finite() {
        Verdict::Undefined
    } else if density_ratio <= th.max_density_ratio {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    AssumptionReport {
        n,
        tau_n,
        density_score,
        min_group_fraction,
        density_ratio,
        has_zero_probabilities: has_zero,
        density,
        no_vanishing_groups,
        comparable_densities,
    }
}
