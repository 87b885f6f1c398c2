use num_complex::Complex64;
use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("evaluation overflowed to a non-finite value at z = {z}")]
    EvalOverflow { z: Complex64 },

    #[error("all basis functions vanish at z = {z}; log-norm quantities are undefined there")]
    CommonZero { z: Complex64 },

    #[error("basis system must contain at least one function")]
    EmptyBasis,

    #[error(
        "symbolic derivative of basis function {index} disagrees with central differences \
         at z = {z} (symbolic {symbolic}, finite-difference {fd})"
    )]
    DerivativeValidation {
        index: usize,
        z: Complex64,
        symbolic: Complex64,
        fd: Complex64,
    },

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("term count overflows a 64-bit integer (width {width}, degree {degree})")]
    CountOverflow { width: usize, degree: u32 },

    #[error("full tensor form has {terms} terms, above the enumeration budget {budget}; use the reduced sampler")]
    TermBudgetExceeded { terms: u64, budget: u64 },

    #[error("expanded polynomial degree {degree} exceeds the cap {cap}")]
    DegreeOverflow { degree: usize, cap: usize },

    #[error("root iteration failed to converge after {iterations} sweeps (worst residual {residual:.3e})")]
    NonConvergence { iterations: u32, residual: f64 },

    #[error("could not move the contour off a zero after {attempts} dilation attempts")]
    BoundaryZeroUnresolvable { attempts: u32 },

    #[error("adaptive quadrature did not converge within the panel budget")]
    QuadratureNonConvergence,

    #[error("winding number {value:.4} is not within 0.25 of an integer")]
    NonIntegerWinding { value: f64 },

    #[error(
        "zero count mismatch: subdivision located {found} zeros (with multiplicity) but the \
         whole-disk contour count is {expected}; suspect boxes: {diagnostics:?}"
    )]
    CountMismatch {
        expected: i64,
        found: i64,
        diagnostics: Vec<String>,
    },

    #[error("sample is numerically indistinguishable from zero on the reference circle")]
    IdenticallyZero,

    #[error("normalized counting measure requires degree n >= 1")]
    DegenerateNormalization,

    #[error("window {window:?} does not contain the closed disk of radius {r}")]
    WindowTooSmall { window: [f64; 4], r: f64 },

    #[error("aggregates were built over different windows or radii and cannot be compared")]
    WindowMismatch,

    #[error("{failed} of {total} trials failed, above the 2% abort threshold")]
    TrialFailureRate { failed: usize, total: usize },

    #[error("kernel mass {outside:.3e} outside the quadrature domain exceeds 1e-4")]
    QuadratureDomainTooSmall { outside: f64 },

    #[error("grid too coarse: halving the step changed the probe value by {rel_change:.3}")]
    GridTooCoarse { rel_change: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
