use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure classes; the CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: unparseable spec, illegal domain, violated precondition.
    Usage,
    /// A numerical kernel failed (root finding, tracing, meshing).
    Numerical,
    /// A certificate was violated.
    Certificate,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("root finder did not converge for degree {degree} (worst residual {residual:e})")]
    RootFinding { degree: usize, residual: f64 },
    #[error("seed correction diverged for anchor(s) {anchors:?}")]
    SeedDivergence { anchors: Vec<Complex64> },
    #[error("step size underflow while tracing near {at}")]
    StepUnderflow { at: Complex64 },
    #[error("arc exceeded {max_points} points near {at}: suspected unbounded level curve")]
    MaxPointsExceeded { at: Complex64, max_points: usize },
    #[error("traced curve left the domain at {at}")]
    LeftDomain { at: Complex64 },
    #[error("branch bookkeeping failed at vertex {vertex}: {detail}")]
    Branching { vertex: Complex64, detail: String },
    #[error("rotation ambiguity at vertex {vertex}: incident arcs {gap:e} rad apart")]
    RotationAmbiguity { vertex: Complex64, gap: f64 },
    #[error("point {at} lies on the curve (distance {distance:e})")]
    PointOnCurve { at: Complex64, distance: f64 },
    #[error("curves too close to decide (min distance {distance:e})")]
    CurvesTooClose { distance: f64 },
    #[error("face membership vote disagrees: {0}")]
    AmbiguousFace(String),
    #[error("no separating level curve found: {0}")]
    SeparationNotFound(String),
    #[error("winding number {value} is not an integer within tolerance")]
    NonIntegerWinding { value: f64 },
    #[error("mesh too coarse: {0}")]
    Mesh(String),

    #[error("topology check failed: {0}")]
    Topology(String),
    #[error("bounded face {face} contains no zero or pole")]
    EmptyBoundedFace { face: usize },
    #[error("Gauss-Lucas violated: critical point {point} at signed distance {distance:e}")]
    GaussLucas { point: Complex64, distance: f64 },
    #[error("no critical level curve separates the two curves")]
    WitnessNotFound,
    #[error("{count} maximal elements in the critical set")]
    MaximalNotUnique { count: usize },
    #[error("region is not annular: {0}")]
    NotAnnular(String),
    #[error("phi certificate failed: {0}")]
    PhiCertificate(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Parse(_) | InvalidInput(_) | Precondition(_) | Unsupported(_) => ErrorClass::Usage,
            RootFinding { .. }
            | SeedDivergence { .. }
            | StepUnderflow { .. }
            | MaxPointsExceeded { .. }
            | LeftDomain { .. }
            | Branching { .. }
            | RotationAmbiguity { .. }
            | PointOnCurve { .. }
            | CurvesTooClose { .. }
            | AmbiguousFace(_)
            | SeparationNotFound(_)
            | NonIntegerWinding { .. }
            | Mesh(_) => ErrorClass::Numerical,
            Topology(_)
            | EmptyBoundedFace { .. }
            | GaussLucas { .. }
            | WitnessNotFound
            | MaximalNotUnique { .. }
            | NotAnnular(_)
            | PhiCertificate(_) => ErrorClass::Certificate,
        }
    }
}
