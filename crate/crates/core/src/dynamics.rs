//! Degree-weighted DeGroot updating: the learning matrix, belief
//! iteration, the consensus limit, and distance to consensus.
//!
//! `T = D1^{-1} A D2` with `(D1)_ii = sum_j A_ij phi(d_j)` and
//! `(D2)_ii = phi(d_i)`. `T` is similar to the symmetric matrix
//! `S = M T M^{-1}`, `M = (D1 D2)^{1/2}`, which is what the spectral code
//! diagonalizes.

use std::collections::VecDeque;
use std::io::Write;

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::netgen::{degrees, Graph, GraphKind};
use crate::weightfn::WeightFunction;

/// Powers up to this exponent are formed by multiplication; larger ones
/// by eigendecomposition.
pub const DIRECT_POWER_LIMIT: usize = 64;

#[derive(Clone, Debug)]
pub struct LearningMatrix {
    entries: Mat<f64>,
    adjacency: Mat<f64>,
    diag1: Vec<f64>,
    diag2: Vec<f64>,
    source: GraphKind,
    alpha: f64,
}

impl LearningMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }
    pub fn adjacency(&self) -> &Mat<f64> {
        &self.adjacency
    }
    /// `(D1)_ii = sum_j A_ij phi(alpha, d_j)`.
    pub fn diag1(&self) -> &[f64] {
        &self.diag1
    }
    /// `(D2)_ii = phi(alpha, d_i)`.
    pub fn diag2(&self) -> &[f64] {
        &self.diag2
    }
    pub fn source(&self) -> GraphKind {
        self.source
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Diagonal of `M = (D1 D2)^{1/2}`; the weighted norm is `|M x|_2`.
    pub fn metric_scale(&self) -> Vec<f64> {
        self.diag1.iter().zip(&self.diag2).map(|(a, b)| (a * b).sqrt()).collect()
    }

    /// `S = D1^{-1/2} D2^{1/2} A D2^{1/2} D1^{-1/2}`, exactly symmetric.
    pub fn symmetrized(&self) -> Result<Mat<f64>> {
        for (index, &value) in self.diag1.iter().chain(&self.diag2).enumerate() {
            if !(value > 0.0) {
                return Err(Error::NonPositiveDiagonal { index: index % self.n(), value });
            }
        }
        let w: Vec<f64> = self.diag1.iter().zip(&self.diag2).map(|(d1, d2)| (d2 / d1).sqrt()).collect();
        let n = self.n();
        Ok(Mat::from_fn(n, n, |i, j| self.adjacency[(i, j)] * (w[i] * w[j])))
    }

    /// Weights of the limit `T^inf = 1 w^T`, from the stored factors
    /// (no convergence check).
    pub fn stationary(&self) -> ConsensusWeights {
        let raw: Vec<f64> = self.diag1.iter().zip(&self.diag2).map(|(a, b)| a * b).collect();
        let total: f64 = raw.iter().sum();
        ConsensusWeights { weights: raw.into_iter().map(|x| x / total).collect() }
    }

    /// Errors unless `T^t` converges (connected and aperiodic support).
    pub fn check_convergent(&self) -> Result<()> {
        check_connected(&self.adjacency)?;
        check_aperiodic(&self.adjacency)
    }

    /// `T^t`.
    pub fn power(&self, t: usize) -> Result<Mat<f64>> {
        if t <= DIRECT_POWER_LIMIT {
            Ok(self.power_by_multiplication(t))
        } else {
            self.power_by_eigen(t)
        }
    }

    pub fn power_by_multiplication(&self, mut t: usize) -> Mat<f64> {
        let n = self.n();
        let mut result = Mat::<f64>::identity(n, n);
        let mut base = self.entries.clone();
        while t > 0 {
            if t & 1 == 1 {
                result = &result * &base;
            }
            t >>= 1;
            if t > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// `T^t = M^{-1} U diag(lambda^t) U^T M`.
    pub fn power_by_eigen(&self, t: usize) -> Result<Mat<f64>> {
        let s = self.symmetrized()?;
        let evd = s.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let u = evd.U();
        let lam = evd.S().column_vector();
        let n = self.n();
        let scaled = Mat::<f64>::from_fn(n, n, |i, k| u[(i, k)] * lam[k].powi(t as i32));
        let core = &scaled * u.transpose();
        let m = self.metric_scale();
        Ok(Mat::from_fn(n, n, |i, j| core[(i, j)] * m[j] / m[i]))
    }
}

/// Builds `T_ij = A_ij phi(d_j) / sum_k A_ik phi(d_k)`.
pub fn build_learning_matrix(g: &Graph, phi: &WeightFunction) -> Result<LearningMatrix> {
    let n = g.n();
    let d = degrees(g);
    let isolated: Vec<usize> = (0..n).filter(|&i| d[i] <= 0.0).collect();
    if !isolated.is_empty() {
        return Err(Error::IsolatedVertices(isolated));
    }
    let diag2 = d
        .iter()
        .enumerate()
        .map(|(vertex, &deg)| {
            phi.evaluate(deg).map_err(|e| match e {
                Error::Domain { alpha, degree } | Error::InvalidWeight { alpha, degree, .. } => {
                    Error::VertexDomain { vertex, alpha, degree }
                }
                other => other,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let a = g.weights();
    let diag1: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] * diag2[j]).sum()).collect();
    let zero: Vec<usize> = (0..n).filter(|&i| !(diag1[i] > 0.0)).collect();
    if !zero.is_empty() {
        return Err(Error::IsolatedVertices(zero));
    }
    let entries = Mat::from_fn(n, n, |i, j| a[(i, j)] * diag2[j] / diag1[i]);
    Ok(LearningMatrix {
        entries,
        adjacency: a.clone(),
        diag1,
        diag2,
        source: g.kind(),
        alpha: phi.alpha(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeliefVector {
    pub values: Vec<f64>,
    pub time: usize,
}

impl BeliefVector {
    pub fn initial(values: Vec<f64>) -> Self {
        BeliefVector { values, time: 0 }
    }

    /// Scales to unit Euclidean norm.
    pub fn unit(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        BeliefVector { values: values.into_iter().map(|x| x / norm).collect(), time: 0 }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn apply(t: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let n = t.nrows();
    (0..n).map(|i| (0..n).map(|j| t[(i, j)] * x[j]).sum()).collect()
}

/// `b(t) = T^t b0` by repeated matrix-vector products.
pub fn iterate_beliefs(t_mat: &LearningMatrix, b0: &BeliefVector, t: usize) -> Result<BeliefVector> {
    if b0.values.len() != t_mat.n() {
        return Err(Error::InvalidArgument(format!(
            "belief vector has length {}, matrix is {} x {}",
            b0.values.len(),
            t_mat.n(),
            t_mat.n()
        )));
    }
    let mut x = b0.values.clone();
    for _ in 0..t {
        x = apply(&t_mat.entries, &x);
    }
    Ok(BeliefVector { values: x, time: b0.time + t })
}

/// Every intermediate belief vector `b(0), ..., b(t)`.
pub fn trajectory(t_mat: &LearningMatrix, b0: &BeliefVector, t: usize) -> Result<Vec<BeliefVector>> {
    let mut out = vec![b0.clone()];
    for _ in 0..t {
        let next = iterate_beliefs(t_mat, out.last().unwrap(), 1)?;
        out.push(next);
    }
    Ok(out)
}

/// CSV with columns `t,vertex_id,belief`.
pub fn write_trajectory_csv<W: Write>(mut out: W, traj: &[BeliefVector]) -> Result<()> {
    writeln!(out, "t,vertex_id,belief")?;
    for b in traj {
        for (i, v) in b.values.iter().enumerate() {
            writeln!(out, "{},{},{}", b.time, i, v)?;
        }
    }
    Ok(())
}

/// The common row `w` of `T^inf = 1 w^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusWeights {
    pub weights: Vec<f64>,
}

impl ConsensusWeights {
    /// Limiting belief `w . b0` shared by every agent.
    pub fn limit_belief(&self, b0: &[f64]) -> f64 {
        self.weights.iter().zip(b0).map(|(w, b)| w * b).sum()
    }

    /// `max_j |(w^T T)_j - w_j|`.
    pub fn fixed_point_residual(&self, t_mat: &LearningMatrix) -> f64 {
        let n = t_mat.n();
        (0..n)
            .map(|j| {
                let s: f64 = (0..n).map(|i| self.weights[i] * t_mat.entry(i, j)).sum();
                (s - self.weights[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn components(a: &Mat<f64>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if !seen[j] && a[(i, j)] > 0.0 {
                    seen[j] = true;
                    comp.push(j);
                    queue.push_back(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn check_connected(a: &Mat<f64>) -> Result<()> {
    let comps = components(a);
    if comps.len() > 1 {
        return Err(Error::Disconnected {
            sizes: comps.iter().map(Vec::len).collect(),
            representatives: comps.iter().map(|c| c[0]).collect(),
        });
    }
    Ok(())
}

/// Sufficient for aperiodicity on a connected graph: a self-loop, or an
/// odd cycle (2-coloring fails).
fn check_aperiodic(a: &Mat<f64>) -> Result<()> {
    let n = a.nrows();
    if (0..n).any(|i| a[(i, i)] > 0.0) {
        return Ok(());
    }
    let mut color = vec![u8::MAX; n];
    for start in 0..n {
        if color[start] != u8::MAX {
            continue;
        }
        color[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if a[(i, j)] > 0.0 {
                    if color[j] == u8::MAX {
                        color[j] = 1 - color[i];
                        queue.push_back(j);
                    } else if color[j] == color[i] {
                        return Ok(());
                    }
                }
            }
        }
    }
    Err(Error::Periodic)
}

/// Left fixed point of `T`:
/// `w_j = sum_i A_ij phi(d_j) phi(d_i) / sum_{i,j} A_ij phi(d_j) phi(d_i)`.
/// Requires connectivity only; for bipartite graphs without self-loops this
/// is the stationary distribution even though `T^t` oscillates.
pub fn consensus_weights(g: &Graph, phi: &WeightFunction) -> Result<ConsensusWeights> {
    check_connected(g.weights())?;
    let t_mat = build_learning_matrix(g, phi)?;
    let n = g.n();
    let a = g.weights();
    let phis = t_mat.diag2();
    let col: Vec<f64> = (0..n).map(|j| (0..n).map(|i| a[(i, j)] * phis[j] * phis[i]).sum()).collect();
    let total: f64 = col.iter().sum();
    Ok(ConsensusWeights { weights: col.into_iter().map(|x| x / total).collect() })
}

/// The limit `T^inf = lim T^t`, which exists for connected aperiodic graphs.
pub fn consensus_limit(g: &Graph, phi: &WeightFunction) -> Result<ConsensusWeights> {
    check_connected(g.weights())?;
    check_aperiodic(g.weights())?;
    consensus_weights(g, phi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    Euclidean,
    /// `|x|_W = |(D1 D2)^{1/2} x|_2`.
    DWeighted,
}

impl std::str::FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Norm::Euclidean),
            "d_weighted" | "weighted" => Ok(Norm::DWeighted),
            other => Err(Error::InvalidArgument(format!("unknown norm '{other}'"))),
        }
    }
}

/// `T^t - T^inf` as a dense matrix.
pub fn deviation_from_consensus(t_mat: &LearningMatrix, t: usize) -> Result<Mat<f64>> {
    t_mat.check_convergent()?;
    let w = t_mat.stationary();
    let pow = t_mat.power(t)?;
    let n = t_mat.n();
    Ok(Mat::from_fn(n, n, |i, j| pow[(i, j)] - w.weights[j]))
}

/// `max_{|b0| = 1} |(T^t - T^inf) b0|` in the chosen norm: the largest
/// singular value of `T^t - T^inf` (conjugated by `M` for the weighted norm).
pub fn convergence_distance(t_mat: &LearningMatrix, t: i64, norm: Norm) -> Result<f64> {
    if t < 0 {
        return Err(Error::InvalidArgument(format!("t = {t} must be nonnegative")));
    }
    let dev = deviation_from_consensus(t_mat, t as usize)?;
    let target = match norm {
        Norm::Euclidean => dev,
        Norm::DWeighted => {
            let m = t_mat.metric_scale();
            let n = t_mat.n();
            Mat::from_fn(n, n, |i, j| m[i] * dev[(i, j)] / m[j])
        }
    };
    let sv = target.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(sv.first().copied().unwrap_or(0.0))
}

/// `|x|_W` for the metric of `t_mat`.
pub fn weighted_norm(t_mat: &LearningMatrix, x: &[f64]) -> f64 {
    t_mat.metric_scale().iter().zip(x).map(|(m, v)| (m * v) * (m * v)).sum::<f64>().sqrt()
}

/// `|(T^t - T^inf) b0|_W`, computed by iterating beliefs.
pub fn weighted_distance_at(t_mat: &LearningMatrix, b0: &[f64], t: usize) -> Result<f64> {
    let w = t_mat.stationary();
    let limit = w.limit_belief(b0);
    let bt = iterate_beliefs(t_mat, &BeliefVector::initial(b0.to_vec()), t)?;
    let diff: Vec<f64> = bt.values.iter().map(|v| v - limit).collect();
    Ok(weighted_norm(t_mat, &diff))
}
