use thiserror::Error;

/// Errors surfaced by the geometry engine.
///
/// Evaluation never produces silent NaNs: anything that would leave the
/// domain of a field or a decomposition is reported through this type.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    /// A scalar expression was evaluated outside its domain
    /// (log of a non-positive value, sqrt of a negative value, division
    /// by zero, or a fractional power of a non-positive base).
    #[error("domain guard violated: {op}({value}) at {point:?}")]
    DomainGuardViolated {
        op: &'static str,
        value: f64,
        point: Vec<f64>,
    },

    /// Expression parsing failed; position is 1-based line and column.
    #[error("parse error at {line}:{col}: {msg}")]
    ParseError {
        line: usize,
        col: usize,
        msg: String,
    },

    /// The expression references a coordinate beyond the chart dimension.
    #[error("coordinate x{axis} out of range for dimension {dim}")]
    CoordinateOutOfRange { axis: usize, dim: usize },

    /// Metric (or another matrix that must be inverted) is numerically
    /// singular: the LU pivot ratio fell below 1e-12.
    #[error("singular metric: pivot ratio {ratio:.3e} at {point:?}")]
    SingularMetric { ratio: f64, point: Vec<f64> },

    /// The metric is not symmetric positive definite at a sampled point.
    #[error("metric not positive definite at {point:?} (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64, point: Vec<f64> },

    /// A periodic axis carries a field whose values at the two chart ends
    /// disagree beyond tolerance.
    #[error("field not periodic along axis {axis}: mismatch {mismatch:.3e}")]
    NotPeriodic { axis: usize, mismatch: f64 },

    /// The plane spanned by the two vectors handed to the sectional
    /// curvature is degenerate.
    #[error("degenerate plane for sectional curvature (gram determinant {gram:.3e})")]
    DegeneratePlane { gram: f64 },

    /// Spanning fields of a distribution are linearly dependent at a point.
    #[error("degenerate distribution at {point:?} (gram determinant {gram:.3e})")]
    DegenerateDistribution { gram: f64, point: Vec<f64> },

    /// A distribution had an unexpected rank for the requested identity.
    #[error("wrong rank: expected {expected}, got {got}")]
    WrongRank { expected: usize, got: usize },

    /// An identity gate required an umbilical distribution.
    #[error("distribution {which} is not umbilical (defect {defect:.3e})")]
    NotUmbilical { which: char, defect: f64 },

    /// An identity gate required a totally geodesic distribution.
    #[error("distribution {which} is not totally geodesic (defect {defect:.3e})")]
    NotTotallyGeodesic { which: char, defect: f64 },

    /// A gate condition other than umbilicity / geodesibility failed.
    #[error("gate failed: {gate} (value {value:.3e} exceeds {tol:.3e})")]
    GateFailed {
        gate: &'static str,
        value: f64,
        tol: f64,
    },

    /// The map is not a submersion where one was required.
    #[error("not a submersion: jacobian rank {rank} < target dimension {target_dim}")]
    NotASubmersion { rank: usize, target_dim: usize },

    /// The jacobian lost full column rank where an immersion was required.
    #[error("singular jacobian: rank {rank} < source dimension {source_dim}")]
    SingularJacobian { rank: usize, source_dim: usize },

    /// Integration over a closed manifold was requested on a chart with a
    /// non-periodic axis.
    #[error("chart is not closed: axis {axis} is not periodic")]
    NonClosedChart { axis: usize },

    /// The annulus diagnostic needs B(2r) inside the chart box.
    #[error("ball of radius {radius} around the chart centre leaves the domain")]
    BallOutsideDomain { radius: f64 },

    /// Catalog lookup failed.
    #[error("unknown scenario '{name}'")]
    UnknownScenario { name: String },

    /// Scenario file or run configuration is malformed.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
