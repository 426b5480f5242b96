use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not an automorphism action: {0}")]
    NotAutomorphism(String),

    #[error("not an automorphism of the torus: {0}")]
    NotLatticeAutomorphism(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("log-concavity violated at q={q}: d_q^2 = {lhs} < d_(q-1) d_(q+1) = {rhs}")]
    ConcavityViolation { q: usize, lhs: f64, rhs: f64 },

    #[error("degenerate pairing: {0}")]
    DegeneratePairing(String),

    #[error("R has nonzero class (harmonic part norm {0})")]
    NonzeroClass(f64),

    #[error("R not dd^c-exact: mode residual {residual} at mode {mode:?}")]
    NotDdcExact { mode: Vec<i64>, residual: f64 },

    #[error("form is not closed: d-residual {0}")]
    NotClosed(f64),

    #[error("bidegree overflow: ({p},{q}) exceeds ({k},{k})")]
    BidegreeOverflow { p: usize, q: usize, k: usize },

    #[error("truncation budget exceeded: dropped mass {dropped} > budget {budget} (step {step})")]
    TruncationBudget {
        dropped: f64,
        budget: f64,
        step: usize,
    },

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("class mismatch: {0}")]
    ClassMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-summable series: delta = {delta} >= d_q = {dq}")]
    NonSummable { delta: f64, dq: f64 },

    #[error("use monte-carlo: {0}")]
    UseMonteCarlo(String),

    #[error("n too large for sample budget: zero hits for n = {0}")]
    ZeroHits(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
