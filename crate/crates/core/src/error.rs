use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the numerical layer can report.
///
/// The variant name doubles as a stable machine-readable kind (see [`Error::kind`]),
/// which the CLI and the C bindings surface verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("r + V'(r) is not strictly increasing near r = {at}")]
    NonMonotone { at: f64 },

    #[error("V' keeps a constant sign on (0, {scanned}]")]
    NoInteriorCriticalPoint { scanned: f64 },

    #[error("potential `{0}` provides no third derivative")]
    MissingThirdDerivative(String),

    #[error("integrand envelope does not decay below the truncation threshold before r = {r_max}")]
    Truncation { r_max: f64 },

    #[error("Z(sigma, .) has several maxima of equal height near l = {first} and l = {second}")]
    MultipleMaxima { first: f64, second: f64 },

    #[error("Z(sigma, .) is flat on [{start}, {end}]")]
    Plateau { start: f64, end: f64 },

    #[error("d2Z/dl2(sigma, 0) does not change sign on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("Hessian of the total potential at r0 is not positive definite (a = {a}, b = {b})")]
    DegenerateHessian { a: f64, b: f64 },

    #[error("V''(r0) = {value} is numerically zero")]
    FlatSecondDerivative { value: f64 },

    #[error("linear solver stalled after {iterations} iterations (relative residual {residual:e})")]
    SingularSystem { iterations: usize, residual: f64 },

    #[error("order parameter l = {l} is not an equilibrium: |H| = {h:e} exceeds {tol:e}")]
    Incompatible { l: f64, h: f64, tol: f64 },

    #[error("coefficient denominator vanished ({0:e})")]
    ZeroDenominator(f64),

    #[error("rejection sampler acceptance rate {rate:e} is below 1e-3")]
    LowAcceptance { rate: f64 },

    #[error("particle speed {speed} exceeded the blow-up bound {bound} at t = {t}")]
    NumericalBlowup { t: f64, speed: f64, bound: f64 },

    #[error("time step {dt} violates the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable identifier of the failure class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NonMonotone { .. } => "NonMonotone",
            Error::NoInteriorCriticalPoint { .. } => "NoInteriorCriticalPoint",
            Error::MissingThirdDerivative(_) => "MissingThirdDerivative",
            Error::Truncation { .. } => "Truncation",
            Error::MultipleMaxima { .. } => "MultipleMaxima",
            Error::Plateau { .. } => "Plateau",
            Error::NoSignChange { .. } => "NoSignChange",
            Error::DegenerateHessian { .. } => "DegenerateHessian",
            Error::FlatSecondDerivative { .. } => "FlatSecondDerivative",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::Incompatible { .. } => "Incompatible",
            Error::ZeroDenominator(_) => "ZeroDenominator",
            Error::LowAcceptance { .. } => "LowAcceptance",
            Error::NumericalBlowup { .. } => "NumericalBlowup",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
        }
    }

    /// True for usage and configuration problems, false for numerical failures.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidInput(_) | Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
