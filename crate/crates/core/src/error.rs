use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block model: {0}")]
    InvalidSpec(String),

    #[error("{name} = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { name: String, value: f64 },

    #[error("group sizes must differ (n1 = n2 = {0})")]
    EqualGroupSizes(usize),

    #[error("expected degrees coincide (d1* = d2* = {0}); no elite/grassroots distinction")]
    DegenerateDegrees(f64),

    #[error("weight function undefined at degree {degree} with alpha = {alpha}")]
    Domain { alpha: f64, degree: f64 },

    #[error("weight function undefined at vertex {vertex} (degree {degree}, alpha = {alpha})")]
    VertexDomain { vertex: usize, alpha: f64, degree: f64 },

    #[error("weight function returned {value} at alpha = {alpha}, degree = {degree}")]
    InvalidWeight { alpha: f64, degree: f64, value: f64 },

    #[error("g is identically 1 when d1 = d2 = {0}; not invertible")]
    DegenerateRatio(f64),

    #[error("no alpha with g(alpha) = {target} within |alpha| <= 1e6")]
    NoInverse { target: f64 },

    #[error("vertices with zero weighted degree: {0:?}")]
    IsolatedVertices(Vec<usize>),

    #[error("graph is disconnected: {} components (sizes {:?})", .sizes.len(), .sizes)]
    Disconnected { sizes: Vec<usize>, representatives: Vec<usize> },

    #[error("graph is bipartite without self-loops; the learning matrix is periodic and T^t has no limit")]
    Periodic,

    #[error("nonpositive diagonal entry {value} at index {index}")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("alpha = {alpha} lies outside the decreasing region {region}")]
    OutsideRegime { alpha: f64, region: String },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
