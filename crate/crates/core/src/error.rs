use thiserror::Error;

/// Errors raised by the simulator core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "zigzag instability: transverse mode {mode} has negative curvature at axial/transverse ratio {ratio:.4}"
    )]
    ZigzagInstability { mode: usize, ratio: f64 },

    #[error(
        "sideband resonance: detuning {detuning_khz:.3} kHz lies within {guard_khz} kHz of mode {mode} at {mode_freq_khz:.3} kHz"
    )]
    SidebandResonance {
        mode: usize,
        detuning_khz: f64,
        mode_freq_khz: f64,
        guard_khz: f64,
    },

    #[error("power-law fit undefined: mean coupling at separation {separation} is {mean:.3e}")]
    PowerLawUndefined { separation: usize, mean: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("ambiguous coupled excited state at B = {field:.4e}: no candidate above threshold among {candidates:?}")]
    AmbiguousCoupling { field: f64, candidates: Vec<(f64, f64)> },

    #[error("step size underflow at t = {time:.6e} ms (required step {step:.3e} ms)")]
    StepUnderflow { time: f64, step: f64 },

    #[error("norm drift {drift:.3e} at t = {time:.6e} ms exceeds tolerance")]
    NormDrift { time: f64, drift: f64 },

    #[error("Binder cumulant undefined: second moment of the order parameter is zero")]
    UndefinedCumulant,

    #[error("no samples")]
    EmptySamples,
}

pub type Result<T> = std::result::Result<T, Error>;
