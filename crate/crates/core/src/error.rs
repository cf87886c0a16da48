use thiserror::Error;

/// Errors produced by the library.
///
/// Indices carried in error payloads are 1-based, matching how states,
/// subsystems and policies are reported everywhere else.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("state component out of range: subsystem {subsystem} has {num_states} states, got {value}")]
    StateOutOfRange {
        subsystem: usize,
        num_states: usize,
        value: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("composition too large: {requested} exceeds cap {cap}")]
    CompositionTooLarge { requested: usize, cap: usize },

    #[error("enumeration infeasible: {count} policies exceeds cap {cap}")]
    EnumerationInfeasible { count: u128, cap: u128 },

    #[error("A3 violated: non-unichain ({0})")]
    NonUnichain(String),

    #[error("power iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    PowerIterationDiverged { iterations: usize, residual: f64 },

    #[error("relative value iteration did not converge after {iterations} iterations (last span {span:e})")]
    RviDiverged { iterations: usize, span: f64 },

    #[error("stationary distribution has a negative entry {value:e} beyond round-off")]
    NegativeProbability { value: f64 },

    #[error("stationarity violated: |beta (P - I)| = {residual:e}")]
    StationarityViolated { residual: f64 },

    #[error("invalid output in cost denominator at composite transition ({from}, {to})")]
    InvalidCostDenominator { from: usize, to: usize },

    #[error("inadmissible joint action {action:?} at composite state {state}")]
    Inadmissible { state: usize, action: Vec<usize> },

    #[error("no componentwise optimizer at composite state {state}; frontier actions {frontier:?}")]
    NoComponentwiseOptimizer {
        state: usize,
        frontier: Vec<Vec<usize>>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
