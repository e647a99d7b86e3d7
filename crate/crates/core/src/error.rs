use thiserror::Error;

/// Errors surfaced by the numerical kernels.
///
/// Every failure mode named in a module contract has its own variant so that
/// callers (and the scenario runner) can report the precise locus.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vector field must be real-valued")]
    NonRealField,

    #[error("spectral tail {tail:.3e} exceeds tolerance {tol:.3e} (grid or degree too coarse)")]
    SpectralTail { tail: f64, tol: f64 },

    #[error("degenerate fixed point at y = {y:.6}: |1 - psi'(y)| = {margin:.3e} < tol")]
    DegenerateFixedPoint { y: f64, margin: f64 },

    #[error("identity map: continuum of fixed points")]
    ContinuumFixedPoints,

    #[error("symbol is not elliptic (leading coefficient vanishes on a sheet)")]
    NotElliptic,

    #[error("leading symbol is not strictly positive on both sheets")]
    NonPositiveLeading,

    #[error("stored depth {have} is insufficient (need {need})")]
    InsufficientDepth { have: usize, need: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not hermitian: max |M - M*| = {defect:.3e}")]
    NotHermitian { defect: f64 },

    #[error("Jacobi eigensolver failed to converge in {sweeps} sweeps (off-diag {offdiag:.3e})")]
    JacobiNoConvergence { sweeps: usize, offdiag: f64 },

    #[error("spectrum is not strictly positive (min eigenvalue {min:.3e})")]
    NonPositiveSpectrum { min: f64 },

    #[error("eigenvalue {lambda:.3e} of Q inside the spectral gap tolerance {tol:.1e}; sign is ill-defined")]
    SpectralGap { lambda: f64, tol: f64 },

    #[error("matrix is not idempotent: |P^2 - P| = {defect:.3e}")]
    NotIdempotent { defect: f64 },

    #[error("quadrature aliasing {alias:.3e} above tolerance {tol:.3e}")]
    QuadratureAliasing { alias: f64, tol: f64 },

    #[error("rank decision ambiguous: eigenvalue {value:.3e} within a factor 10 of threshold {threshold:.3e}")]
    RankAmbiguity { value: f64, threshold: f64 },

    #[error("index routes disagree: kernel count {kernel} vs idempotent pairing {pairing}")]
    IndexRouteDisagreement { kernel: i64, pairing: i64 },

    #[error("winding number {value:.6} is {dist:.3e} away from an integer")]
    WindingNotInteger { value: f64, dist: f64 },

    #[error("symbol vanishes on the sample grid (min |u| = {min:.3e})")]
    VanishingSymbol { min: f64 },

    #[error("continuation estimators disagree: tail-fit {tail_fit:.6e} vs heat-fit {heat_fit:.6e} (tol {tol:.1e})")]
    EstimatorDisagreement { tail_fit: f64, heat_fit: f64, tol: f64 },

    #[error("least-squares fit residual {residual:.3e} above tolerance {tol:.3e}")]
    FitResidual { residual: f64, tol: f64 },

    #[error("pole of order two detected: |a_-2| = {a2:.3e} exceeds bound {bound:.3e}")]
    DoublePole { a2: f64, bound: f64 },

    #[error("operator too ill-conditioned to invert (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("convolution support [{lo:.3}, {hi:.3}] overflows the time grid")]
    SupportOverflow { lo: f64, hi: f64 },

    #[error("element support touches t <= 0 but the positive-time flag is required")]
    NotPositiveTime,

    #[error("fixed-point exponent kappa must be nonzero")]
    ZeroExponent,

    #[error("orbit data degenerate at n = {n}: |1 - h'^n| = {margin:.3e}")]
    DegenerateOrbit { n: i64, margin: f64 },

    #[error("cutoff normalization violated: max |sum c^2 - 1| = {defect:.3e}")]
    CutoffNormalization { defect: f64 },

    #[error("normalization failure in {what}: defect {defect:.3e}")]
    Normalization { what: String, defect: f64 },

    #[error("transversal component {index} is not periodic")]
    NotPeriodic { index: usize },

    #[error("fixed-point component present; use the extended trace")]
    FixedPointComponent,

    #[error("truncation {n} too small: {why}")]
    TruncationTooSmall { n: usize, why: String },

    #[error("scenario schema error at {path}: {msg}")]
    Schema { path: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
