use thiserror::Error;

/// Failure classes, grouped by the exit code the CLI maps them to.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("profile is not monotone: U' = {slope:e} at x2 = {x2}")]
    NonMonotonic { x2: f64, slope: f64 },
    #[error("tabulated profile cannot support six derivatives: {0}")]
    InsufficientSmoothness(String),
    #[error("x2 = {x2} outside [{lo}, {hi}]")]
    OutOfDomain { x2: f64, lo: f64, hi: f64 },
    #[error("c = {c} outside the extended range [{lo}, {hi}]")]
    OutOfRange { c: f64, lo: f64, hi: f64 },

    #[error("integrator step underflow at x2 = {x2}")]
    StepFailure { x2: f64 },
    #[error("c = {c_re}{c_im:+}i is too close to the range of U without limit handling")]
    NearSingular { c_re: f64, c_im: f64 },
    #[error("degenerate critical layer at x2 = {x2}")]
    DegenerateLayer { x2: f64 },
    #[error("c = {c_re}{c_im:+}i is an eigenvalue (resonant)")]
    ResonantC { c_re: f64, c_im: f64 },
    #[error("wavenumber must be nonzero")]
    ZeroWavenumber,
    #[error("y_-(k, c, 0) vanishes at c = {c}")]
    ChannelEigenvalue { c: f64 },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("root on contour near c = {c_re}{c_im:+}i")]
    BoundaryRoot { c_re: f64, c_im: f64 },
    #[error("more than {0} roots in region")]
    MaxRootsExceeded(usize),
    #[error("root c = {c_re}{c_im:+}i violates the semicircle bound by {excess:e}")]
    SemicircleViolation { c_re: f64, c_im: f64, excess: f64 },
    #[error("branch lost at k = {k}")]
    LostBranch { k: f64 },
    #[error("no sign change of F(., c0) on [{k_lo}, {k_hi}]")]
    NoRoot { k_lo: f64, k_hi: f64 },
    #[error("k c(k) is not strictly monotone near k = {k}")]
    NotMonotone { k: f64 },
    #[error("time step {dt} exceeds CFL bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("elliptic operator singular")]
    SingularElliptic,
    #[error("degenerate root c = {c_re}{c_im:+}i in catalog")]
    DegenerateRoot { c_re: f64, c_im: f64 },
    #[error("empty fitting window")]
    EmptyWindow,
    #[error("singular mode present near c_R = {c_r}")]
    SingularModePresent { c_r: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Exit code convention: 2 configuration, 3 numerical, 4 spectral precondition.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidSpec(_)
            | Error::NonMonotonic { .. }
            | Error::InsufficientSmoothness(_)
            | Error::OutOfDomain { .. }
            | Error::OutOfRange { .. }
            | Error::ZeroWavenumber
            | Error::CflViolation { .. }
            | Error::EmptyWindow => 2,
            Error::SingularModePresent { .. } | Error::DegenerateRoot { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
