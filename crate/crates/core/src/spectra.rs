//! Spectra of learning matrices, the closed-form second eigenvalue of the
//! Elite-Grassroots model, the monotonicity regimes in alpha, and the
//! slowest-converging initial beliefs.

use faer::{Mat, Side};

use crate::dynamics::LearningMatrix;
use crate::error::{Error, Result};
use crate::netgen::{BlockModelSpec, Elite, EliteGrassrootsSpec};
use crate::weightfn::{g, g_inverse, WeightFunction};

/// Two eigenvalue magnitudes closer than this count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    DenseNumeric,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::DenseNumeric => "dense_numeric",
        }
    }
}

/// Which eigenvalue of the reduced matrix is second largest in magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `a - e`: group 1 against everyone else.
    OneVsRest,
    /// `c - d`: disagreement among the `m - 1` peer groups.
    AmongPeers,
    /// Read off a dense eigendecomposition.
    Numeric,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::OneVsRest => "a_minus_e",
            Branch::AmongPeers => "c_minus_d",
            Branch::Numeric => "numeric",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralReport {
    /// Sorted by descending magnitude, ties by descending value.
    pub eigenvalues: Vec<f64>,
    /// Signed second eigenvalue.
    pub lambda2: f64,
    /// Eigenvalues (after the first) whose magnitude ties `|lambda2|`.
    pub multiplicity: usize,
    /// Unit Euclidean norm, largest entry positive.
    pub second_eigenvector: Option<Vec<f64>>,
    pub method: Method,
    pub branch: Branch,
}

impl SpectralReport {
    pub fn abs_lambda2(&self) -> f64 {
        self.lambda2.abs()
    }
}

fn by_magnitude(a: f64, b: f64) -> std::cmp::Ordering {
    b.abs().total_cmp(&a.abs()).then(b.total_cmp(&a))
}

fn tie_count(sorted: &[f64]) -> usize {
    match sorted.get(1) {
        Some(l2) => sorted[1..].iter().filter(|x| (x.abs() - l2.abs()).abs() <= TIE_TOL).count(),
        None => 0,
    }
}

/// Full spectrum of `T` through its symmetric similarity, with the second
/// eigenvector mapped back to `T`'s coordinates.
pub fn eigen_symmetrized(t: &LearningMatrix) -> Result<SpectralReport> {
    let s = t.symmetrized()?;
    let evd = s.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let lam = evd.S().column_vector();
    let u = evd.U();
    let n = t.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| by_magnitude(lam[i], lam[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| lam[i]).collect();
    let second_eigenvector = order.get(1).map(|&k| {
        let scale = t.metric_scale();
        let v: Vec<f64> = (0..n).map(|i| u[(i, k)] / scale[i]).collect();
        normalize_signed(v)
    });
    Ok(SpectralReport {
        lambda2: eigenvalues.get(1).copied().unwrap_or(0.0),
        multiplicity: tie_count(&eigenvalues),
        eigenvalues,
        second_eigenvector,
        method: Method::DenseNumeric,
        branch: Branch::Numeric,
    })
}

/// Eigenvalues only (cheaper), sorted by descending magnitude.
pub fn eigenvalues_symmetrized(t: &LearningMatrix) -> Result<Vec<f64>> {
    let s = t.symmetrized()?;
    let mut lam = s.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    lam.sort_by(|a, b| by_magnitude(*a, *b));
    Ok(lam)
}

/// Signed second eigenvalue of `T`, values-only path.
pub fn lambda2_numeric(t: &LearningMatrix) -> Result<f64> {
    Ok(eigenvalues_symmetrized(t)?.get(1).copied().unwrap_or(0.0))
}

fn normalize_signed(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    let s = if pivot < 0.0 { -1.0 / norm } else { 1.0 / norm };
    for x in &mut v {
        *x *= s;
    }
    v
}

/// The `m x m` matrix carrying the nonzero spectrum of `T*` for an
/// Elite-Grassroots spec.
#[derive(Clone, Debug, PartialEq)]
pub struct FBlockMatrix {
    pub entries: Vec<Vec<f64>>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl FBlockMatrix {
    pub fn m(&self) -> usize {
        self.entries.len()
    }

    /// `{1, a - e, c - d (m - 2 times)}`, sorted by descending magnitude.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut out = vec![1.0, self.a - self.e];
        out.extend(std::iter::repeat_n(self.c - self.d, self.m() - 2));
        out.sort_by(|x, y| by_magnitude(*x, *y));
        out
    }
}

/// `phi(d1*)`, `phi(d2*)` rescaled so the larger is 1.
fn scaled_weights(spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> Result<(f64, f64)> {
    if spec.elite() == Elite::Tied {
        return Ok((1.0, 1.0));
    }
    let r = g(phi, phi.alpha(), spec.d1(), spec.d2())?;
    Ok(if r <= 1.0 { (1.0, r) } else { (1.0 / r, 1.0) })
}

pub fn reduce_block_matrix(spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> Result<FBlockMatrix> {
    let (f1, f2) = scaled_weights(spec, phi)?;
    let (n1, n2, m) = (spec.n1() as f64, spec.n2() as f64, spec.m());
    let (p, q) = (spec.p(), spec.q());
    let den1 = n1 * p * f1 + (m as f64 - 1.0) * n2 * q * f2;
    let den2 = n1 * q * f1 + n2 * p * f2 + (m as f64 - 2.0) * n2 * q * f2;
    let a = n1 * p * f1 / den1;
    let b = n2 * q * f2 / den1;
    let c = n2 * p * f2 / den2;
    let d = n2 * q * f2 / den2;
    let e = n1 * q * f1 / den2;
    let entries = (0..m)
        .map(|k| {
            (0..m)
                .map(|l| match (k, l) {
                    (0, 0) => a,
                    (0, _) => b,
                    (_, 0) => e,
                    _ if k == l => c,
                    _ => d,
                })
                .collect()
        })
        .collect();
    Ok(FBlockMatrix { entries, a, b, c, d, e })
}

/// `F_kl = n_l P_kl phi(d_l) / sum_h n_h P_kh phi(d_h)` for any block model
/// with self-loops; `d_l` is the expected degree of group `l`.
pub fn block_matrix(spec: &BlockModelSpec, phi: &WeightFunction) -> Result<Vec<Vec<f64>>> {
    if !spec.self_loops() {
        return Err(Error::InvalidSpec("block reduction needs self-loops in the expected graph".into()));
    }
    let m = spec.groups();
    let sizes = spec.group_sizes();
    let w = (0..m).map(|l| phi.evaluate(spec.expected_degree(l))).collect::<Result<Vec<f64>>>()?;
    Ok((0..m)
        .map(|k| {
            let row: Vec<f64> = (0..m).map(|l| sizes[l] as f64 * spec.prob(k, l) * w[l]).collect();
            let total: f64 = row.iter().sum();
            row.into_iter().map(|x| x / total).collect()
        })
        .collect())
}

/// Closed-form second eigenvalue of `T*`.
pub fn lambda2_closed_form(spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> Result<SpectralReport> {
    let f = reduce_block_matrix(spec, phi)?;
    let one_vs_rest = f.a - f.e;
    let among_peers = f.c - f.d;
    let branch = if spec.m() == 2 {
        Branch::OneVsRest
    } else {
        let thr = threshold(spec, phi)?;
        let alpha = phi.alpha();
        let first = match spec.elite() {
            Elite::GroupOne => alpha >= thr,
            Elite::Others => alpha <= thr,
            Elite::Tied => unreachable!("threshold rejects tied degrees"),
        };
        if first {
            Branch::OneVsRest
        } else {
            Branch::AmongPeers
        }
    };
    let lambda2 = match branch {
        Branch::OneVsRest => one_vs_rest,
        _ => among_peers,
    };
    let eigenvalues = f.eigenvalues();
    let multiplicity = eigenvalues[1..].iter().filter(|x| (x.abs() - lambda2.abs()).abs() <= TIE_TOL).count();
    Ok(SpectralReport {
        eigenvalues,
        lambda2,
        multiplicity,
        second_eigenvector: None,
        method: Method::ClosedForm,
        branch,
    })
}

/// `g^{-1}(n1 / n2)`.
pub fn threshold(spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> Result<f64> {
    if spec.elite() == Elite::Tied {
        return Err(Error::DegenerateDegrees(spec.d1()));
    }
    g_inverse(phi, spec.n1() as f64 / spec.n2() as f64, spec.d1(), spec.d2())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

/// Where `|lambda2(T*)|` decreases in alpha.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeClassification {
    /// 1: `m = 2`; 2: `m >= 3`, group 1 elite; 3: `m >= 3`, group 1 grassroots.
    pub case_id: u8,
    pub alpha_threshold: f64,
    pub secondary_threshold: Option<f64>,
    pub d_alpha: Vec<Interval>,
}

impl RegimeClassification {
    pub fn contains(&self, alpha: f64) -> bool {
        self.d_alpha.iter().any(|iv| iv.contains(alpha))
    }

    /// Distance from `alpha` to the nearest threshold.
    pub fn distance_to_threshold(&self, alpha: f64) -> f64 {
        let mut dist = (alpha - self.alpha_threshold).abs();
        if let Some(s) = self.secondary_threshold {
            dist = dist.min((alpha - s).abs());
        }
        dist
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self.d_alpha.iter().map(|iv| iv.to_string()).collect();
        format!("case {}: D_alpha = {}", self.case_id, parts.join(" U "))
    }
}

pub fn classify_regime(spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> Result<RegimeClassification> {
    let thr = threshold(spec, phi)?;
    let inf = f64::INFINITY;
    if spec.m() == 2 {
        return Ok(RegimeClassification {
            case_id: 1,
            alpha_threshold: thr,
            secondary_threshold: None,
            d_alpha: vec![Interval { lo: thr, hi: inf, lo_closed: true, hi_closed: false }],
        });
    }
    let (m, p, q) = (spec.m() as f64, spec.p(), spec.q());
    let factor = (p / ((m - 1.0) * (p + (m - 2.0) * q))).sqrt();
    let thr2 = g_inverse(phi, spec.n1() as f64 / spec.n2() as f64 * factor, spec.d1(), spec.d2())?;
    let (case_id, d_alpha) = match spec.elite() {
        Elite::GroupOne => (
            2,
            vec![
                Interval { lo: -inf, hi: thr, lo_closed: false, hi_closed: true },
                Interval { lo: thr2, hi: inf, lo_closed: true, hi_closed: false },
            ],
        ),
        _ => (3, vec![Interval { lo: thr2, hi: thr, lo_closed: false, hi_closed: true }]),
    };
    Ok(RegimeClassification { case_id, alpha_threshold: thr, secondary_threshold: Some(thr2), d_alpha })
}

/// The slowest-converging initial beliefs of `T*`.
#[derive(Clone, Debug, PartialEq)]
pub enum WorstBeliefs {
    /// Unique (up to sign) block-constant second eigenvector.
    Block {
        eigenvalue: f64,
        /// Unit Euclidean norm; group 1 entry negative.
        vector: Vec<f64>,
        /// The group-1 and group-2 values from the unnormalized formula.
        printed: (f64, f64),
    },
    /// Multi-group dissent: a whole eigenspace attains `|lambda2|`.
    Eigenspace(DissentSpace),
}

impl WorstBeliefs {
    pub fn eigenvalue(&self) -> f64 {
        match self {
            WorstBeliefs::Block { eigenvalue, .. } => *eigenvalue,
            WorstBeliefs::Eigenspace(s) => s.eigenvalue,
        }
    }

    /// A concrete unit vector attaining the slowest rate.
    pub fn representative(&self) -> &[f64] {
        match self {
            WorstBeliefs::Block { vector, .. } => vector,
            WorstBeliefs::Eigenspace(s) => &s.representative,
        }
    }
}

/// Vectors orthogonal, in the `(D1 D2)^{1/2}` metric, to the all-ones
/// vector and to the one-vs-rest eigenvector.
#[derive(Clone, Debug, PartialEq)]
pub struct DissentSpace {
    pub eigenvalue: f64,
    /// Diagonal of `(D1 D2)^{1/2}` for `T*`.
    pub metric: Vec<f64>,
    pub excluded: Vec<Vec<f64>>,
    /// `1_{group 2} - 1_{group 3}`, projected in the metric, unit norm.
    pub representative: Vec<f64>,
}

/// `(v21, v22)` as printed, and the same direction at unit norm.
fn one_vs_rest_vector(spec: &EliteGrassrootsSpec, f: &FBlockMatrix) -> ((f64, f64), Vec<f64>) {
    let (n1, n2, m1) = (spec.n1() as f64, spec.n2() as f64, spec.m() as f64 - 1.0);
    let (b, e) = (f.b, f.e);
    let v21 = -m1 * b / (e * m1 * n2 + n1 * m1 * m1 * b * b / e);
    let v22 = 1.0 / (m1 * n2 + n1 * m1 * m1 * b * b / (e * e));
    let ratio = -m1 * b / e;
    let norm = (n1 * ratio * ratio + m1 * n2).sqrt();
    let vector = spec.block_model().labels().iter().map(|&k| if k == 0 { ratio / norm } else { 1.0 / norm }).collect();
    ((v21, v22), vector)
}

/// `(D1 D2)^{1/2}` of `T*`, from group-level sums with rescaled weights.
fn expected_metric(spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> Result<Vec<f64>> {
    let (f1, f2) = scaled_weights(spec, phi)?;
    let (n1, n2, m) = (spec.n1() as f64, spec.n2() as f64, spec.m() as f64);
    let (p, q) = (spec.p(), spec.q());
    let g1 = ((n1 * p * f1 + (m - 1.0) * n2 * q * f2) * f1).sqrt();
    let g2 = ((n1 * q * f1 + n2 * p * f2 + (m - 2.0) * n2 * q * f2) * f2).sqrt();
    Ok(spec.block_model().labels().iter().map(|&k| if k == 0 { g1 } else { g2 }).collect())
}

fn metric_dot(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(x).zip(y).map(|((w, x), y)| w * w * x * y).sum()
}

pub fn worst_initial_beliefs(spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> Result<WorstBeliefs> {
    let report = lambda2_closed_form(spec, phi)?;
    let f = reduce_block_matrix(spec, phi)?;
    if report.branch == Branch::OneVsRest {
        let (printed, vector) = one_vs_rest_vector(spec, &f);
        return Ok(WorstBeliefs::Block { eigenvalue: report.lambda2, vector, printed });
    }
    Ok(WorstBeliefs::Eigenspace(dissent_space(spec, phi, &f)?))
}

fn dissent_space(spec: &EliteGrassrootsSpec, phi: &WeightFunction, f: &FBlockMatrix) -> Result<DissentSpace> {
    let metric = expected_metric(spec, phi)?;
    let labels = spec.block_model().labels();
    let ones = vec![1.0; labels.len()];
    let (_, v1) = one_vs_rest_vector(spec, f);
    let excluded = vec![ones, v1];

    // Gram-Schmidt in the metric.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for x in &excluded {
        let mut y = x.clone();
        for bvec in &basis {
            let c = metric_dot(&metric, &y, bvec);
            y.iter_mut().zip(bvec).for_each(|(yi, bi)| *yi -= c * bi);
        }
        let nrm = metric_dot(&metric, &y, &y).sqrt();
        basis.push(y.into_iter().map(|v| v / nrm).collect());
    }
    let mut r: Vec<f64> = labels
        .iter()
        .map(|&k| match k {
            1 => 1.0,
            2 => -1.0,
            _ => 0.0,
        })
        .collect();
    for bvec in &basis {
        let c = metric_dot(&metric, &r, bvec);
        r.iter_mut().zip(bvec).for_each(|(ri, bi)| *ri -= c * bi);
    }
    let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let representative = r.into_iter().map(|x| x / norm).collect();
    Ok(DissentSpace { eigenvalue: f.c - f.d, metric, excluded, representative })
}

/// The canonical multi-group dissent vector; needs at least three groups.
pub fn dissent_representative(spec: &EliteGrassrootsSpec, phi: &WeightFunction) -> Result<Vec<f64>> {
    if spec.m() < 3 {
        return Err(Error::InvalidArgument(format!(
            "dissent among peer groups needs m >= 3, got m = {}",
            spec.m()
        )));
    }
    let f = reduce_block_matrix(spec, phi)?;
    Ok(dissent_space(spec, phi, &f)?.representative)
}

/// Eigenvalues of a small dense matrix via the general solver (cross-check).
pub fn general_eigenvalues(rows: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    let n = rows.len();
    let mat = Mat::<f64>::from_fn(n, n, |i, j| rows[i][j]);
    let ev = mat.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(ev.into_iter().map(|z| (z.re, z.im)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::build_learning_matrix;
    use crate::netgen::{expected_adjacency, Graph};

    fn t_star(spec: &EliteGrassrootsSpec, alpha: f64) -> LearningMatrix {
        build_learning_matrix(&expected_adjacency(spec.block_model()), &WeightFunction::power(alpha)).unwrap()
    }

    #[test]
    fn k3_spectrum() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let t = build_learning_matrix(&g, &WeightFunction::power(0.0)).unwrap();
        let r = eigen_symmetrized(&t).unwrap();
        // x^3 - (3/4) x - 1/4 = (x - 1)(x + 1/2)^2
        for (got, want) in r.eigenvalues.iter().zip([1.0, -0.5, -0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(r.multiplicity, 2);
    }

    #[test]
    fn two_groups_at_alpha_zero() {
        let spec = EliteGrassrootsSpec::new(200, 800, 2, 0.4, 0.2).unwrap();
        let phi = WeightFunction::power(0.0);
        let f = reduce_block_matrix(&spec, &phi).unwrap();
        assert!((f.a - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.e - 1.0 / 9.0).abs() < 1e-15);
        let closed = lambda2_closed_form(&spec, &phi).unwrap();
        assert!((closed.lambda2 - 2.0 / 9.0).abs() < 1e-15);
        let numeric = eigen_symmetrized(&t_star(&spec, 0.0)).unwrap();
        assert!((numeric.lambda2 - 2.0 / 9.0).abs() < 1e-9);
        assert!((numeric.eigenvalues[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn equal_probabilities_give_zero() {
        let spec = EliteGrassrootsSpec::new_allow_tied(100, 300, 2, 0.3, 0.3).unwrap();
        for alpha in [-2.0, 0.0, 3.0] {
            let r = lambda2_closed_form(&spec, &WeightFunction::power(alpha)).unwrap();
            assert!(r.lambda2.abs() < 1e-15);
        }
    }

    #[test]
    fn block_entries_match_general_reduction() {
        for (spec, alpha) in [
            (EliteGrassrootsSpec::new(200, 800, 2, 0.4, 0.2).unwrap(), 1.5),
            (EliteGrassrootsSpec::new(400, 200, 4, 0.5, 0.3).unwrap(), -2.0),
            (EliteGrassrootsSpec::new(200, 400, 4, 0.3, 0.1).unwrap(), 0.7),
        ] {
            let phi = WeightFunction::power(alpha);
            let f = reduce_block_matrix(&spec, &phi).unwrap();
            let general = block_matrix(spec.block_model(), &phi).unwrap();
            for (fr, gr) in f.entries.iter().zip(&general) {
                assert!((fr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (x, y) in fr.iter().zip(gr) {
                    assert!((x - y).abs() < 1e-13, "{x} vs {y}");
                }
            }
            let mut cross: Vec<f64> = general_eigenvalues(&f.entries).unwrap().into_iter().map(|(re, _)| re).collect();
            cross.sort_by(|a, b| by_magnitude(*a, *b));
            for (x, y) in f.eigenvalues().iter().zip(&cross) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn four_groups_far_left_matches_numeric() {
        let spec = EliteGrassrootsSpec::new(400, 200, 4, 0.5, 0.3).unwrap();
        let phi = WeightFunction::power(-30.0);
        let closed = lambda2_closed_form(&spec, &phi).unwrap();
        assert_eq!(closed.branch, Branch::AmongPeers);
        assert_eq!(closed.multiplicity, 2);
        let numeric = lambda2_numeric(&t_star(&spec, -30.0)).unwrap();
        assert!((closed.lambda2 - numeric).abs() < 1e-9);
        let limit = 0.2 / 1.1;
        assert!(closed.lambda2 < limit && closed.lambda2 > 0.17, "{}", closed.lambda2);
    }

    #[test]
    fn regimes() {
        let phi = WeightFunction::power(1.0);
        let c1 = classify_regime(&EliteGrassrootsSpec::new(200, 800, 2, 0.4, 0.2).unwrap(), &phi).unwrap();
        assert_eq!(c1.case_id, 1);
        assert!((c1.alpha_threshold - 0.25f64.ln() / (360.0f64 / 240.0).ln()).abs() < 1e-12);
        assert!(c1.contains(0.0) && !c1.contains(-5.0));

        let spec2 = EliteGrassrootsSpec::new(400, 200, 4, 0.5, 0.3).unwrap();
        let c2 = classify_regime(&spec2, &phi).unwrap();
        assert_eq!(c2.case_id, 2);
        let ln_r = (340.0f64 / 380.0).ln();
        assert!((c2.alpha_threshold - 2.0f64.ln() / ln_r).abs() < 1e-9);
        let f = (0.5f64 / (3.0 * 1.1)).sqrt();
        assert!((c2.secondary_threshold.unwrap() - (2.0 * f).ln() / ln_r).abs() < 1e-9);
        assert!(c2.secondary_threshold.unwrap() > c2.alpha_threshold);

        let c3 = classify_regime(&EliteGrassrootsSpec::new(200, 400, 4, 0.3, 0.1).unwrap(), &phi).unwrap();
        assert_eq!(c3.case_id, 3);
        assert!(c3.secondary_threshold.unwrap() < c3.alpha_threshold);
        assert_eq!(c3.d_alpha.len(), 1);
    }

    #[test]
    fn branches_meet_at_threshold() {
        let spec = EliteGrassrootsSpec::new(400, 200, 4, 0.5, 0.3).unwrap();
        let thr = threshold(&spec, &WeightFunction::power(0.0)).unwrap();
        let f = reduce_block_matrix(&spec, &WeightFunction::power(thr)).unwrap();
        assert!(((f.a - f.e) - (f.c - f.d)).abs() < 1e-9);
    }

    #[test]
    fn worst_beliefs_are_eigenvectors() {
        let spec = EliteGrassrootsSpec::new(40, 60, 2, 0.4, 0.2).unwrap();
        for alpha in [-4.0, 0.0, 2.0] {
            let phi = WeightFunction::power(alpha);
            let wb = worst_initial_beliefs(&spec, &phi).unwrap();
            let WorstBeliefs::Block { vector, printed, eigenvalue } = &wb else { panic!("expected block vector") };
            assert!(vector[0] < 0.0 && vector[99] > 0.0);
            assert!((printed.0 / printed.1 - vector[0] / vector[99]).abs() < 1e-10);
            let t = t_star(&spec, alpha);
            let res = residual(&t, vector, *eigenvalue);
            assert!(res <= 1e-9, "{res}");
        }
        assert!(dissent_representative(&spec, &WeightFunction::power(0.0)).is_err());
    }

    #[test]
    fn dissent_space_for_peer_branch() {
        let spec = EliteGrassrootsSpec::new(40, 20, 4, 0.5, 0.3).unwrap();
        let phi = WeightFunction::power(-20.0);
        let WorstBeliefs::Eigenspace(space) = worst_initial_beliefs(&spec, &phi).unwrap() else {
            panic!("expected eigenspace")
        };
        let t = t_star(&spec, -20.0);
        assert!(residual(&t, &space.representative, space.eigenvalue) <= 1e-9);
        for x in &space.excluded {
            assert!(metric_dot(&space.metric, x, &space.representative).abs() < 1e-9);
        }
        let norm: f64 = space.representative.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    fn residual(t: &LearningMatrix, v: &[f64], lambda: f64) -> f64 {
        let n = t.n();
        (0..n)
            .map(|i| {
                let tv: f64 = (0..n).map(|j| t.entry(i, j) * v[j]).sum();
                (tv - lambda * v[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}
