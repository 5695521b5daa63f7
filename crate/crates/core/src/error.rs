use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the numerical kernels.
///
/// Every variant names the module it originates from so that front ends can
/// report a useful origin without inspecting the variant.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("specfun: Gamma has a pole at z = {re} + {im}i")]
    GammaPole { re: f64, im: f64 },

    #[error("specfun: polylog series diverges for |z| = {modulus} > 1")]
    PolylogDivergence { modulus: f64 },

    #[error("specfun: cumulant order {order} unsupported (1..={max})")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("specfun: probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("ising: invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("ising: invalid mode grid: {0}")]
    InvalidGrid(String),

    #[error("ising: gapless point at lambda = {lambda}, k = {k}")]
    GaplessPoint { lambda: f64, k: f64 },

    #[error("dynamics: relative tolerance {0} outside [1e-12, 1e-6]")]
    ToleranceOutOfRange(f64),

    #[error("dynamics: step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("dynamics: unknown excitation method `{0}`")]
    UnknownMethod(String),

    #[error("dynamics: method `{method}` cannot be used here: {reason}")]
    MethodPrecondition { method: String, reason: String },

    #[error("dynamics: mode k = {k} failed: {source}")]
    Mode {
        k: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("quadrature: no convergence on [{a}, {b}] (estimated error {error:e})")]
    NonConvergence { a: f64, b: f64, error: f64 },

    #[error("workstats: branch tracking failed to resolve the log between u = {u0} and u = {u1}")]
    BranchAmbiguity { u0: f64, u1: f64 },

    #[error("workstats: u grid unusable: {0}")]
    InvalidUGrid(String),

    #[error("workstats: grid too coarse for order {order}: Richardson disagreement {disagreement:e}")]
    GridTooCoarse { order: usize, disagreement: f64 },

    #[error("workstats: |1 - exp(4iuJ lambda1)| = {modulus} outside the polylog series domain")]
    SeriesDomain { modulus: f64 },

    #[error("workstats: {0}")]
    Unsupported(String),

    #[error("scaling: degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("scaling: out of convergent regime: {0}")]
    OutOfRegime(String),

    #[error("scaling: sweep point v = {v} failed: {source}")]
    SweepPoint {
        v: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("ldp: no mode reaches p = 1/2 (max p = {max_p})")]
    NoCrossing { max_p: f64 },
}

impl Error {
    pub(crate) fn at_mode(self, k: f64) -> Self {
        Error::Mode {
            k,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_rate(self, v: f64) -> Self {
        Error::SweepPoint {
            v,
            source: Box::new(self),
        }
    }
}
