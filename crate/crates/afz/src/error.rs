//! Error and diagnostic types shared across the workbench.

use thiserror::Error;

/// Everything that can go wrong while validating parameters, solving the
/// steady state, simulating, or doing I/O.
#[derive(Debug, Error)]
pub enum AfzError {
    #[error("{field} must be strictly positive (got {value})")]
    NonPositiveValue { field: &'static str, value: f64 },

    #[error("negative value not allowed for {field} (got {value})")]
    NegativeValue { field: &'static str, value: f64 },

    #[error("duty cycle {duty:.4} outside (0, {limit:.4})")]
    DutyOutOfRange { duty: f64, limit: f64 },

    #[error("reset impossible: f_res = {f_res:.1} Hz must exceed f_sw/2 = {half_fsw:.1} Hz")]
    ResetImpossible { f_res: f64, half_fsw: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solver converged to a non-physical root: {reason}")]
    NonPhysicalRoot { reason: String },

    #[error(
        "interval times exceed the switching period at D = {duty:.4}: \
         {total:.3e} s > {period:.3e} s"
    )]
    IntervalOverlap { duty: f64, total: f64, period: f64 },

    #[error("conduction-loss parameters missing: {fields}")]
    MissingLossParams { fields: String },

    #[error("unreachable conduction mode: {0}")]
    UnreachableMode(String),

    #[error("event storm: {events} events in one switching period (modeling bug?)")]
    EventStorm { events: usize },

    #[error("non-finite value in {context} at t = {time:.6e} s")]
    NonFinite { context: &'static str, time: f64 },

    #[error(
        "no periodic steady state after {periods} periods (last relative delta {delta:.3e})"
    )]
    NoSettle { periods: usize, delta: f64 },

    #[error("frequency grids differ between analytical and simulated responses")]
    FrequencyMismatch,

    #[error("{path}:{line}:{col}: syntax error: {msg}")]
    Syntax {
        path: String,
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("{path}:{line}: unknown key `{key}` in section [{section}]")]
    UnknownKey {
        path: String,
        line: usize,
        section: String,
        key: String,
    },

    #[error("{path}:{line}: key `{key}` expects unit {expected} but got `{found}`")]
    UnitViolation {
        path: String,
        line: usize,
        key: String,
        expected: &'static str,
        found: String,
    },

    #[error("{path}:{line}: {msg}")]
    ConfigValue {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("missing required {what} in config")]
    MissingConfig { what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AfzError {
    /// Process exit code family for the CLI: 2 config, 3 numerical, 1 other.
    pub fn exit_code(&self) -> i32 {
        use AfzError::*;
        match self {
            NonPositiveValue { .. } | NegativeValue { .. } | Syntax { .. }
            | UnknownKey { .. } | UnitViolation { .. } | ConfigValue { .. }
            | MissingConfig { .. } | DutyOutOfRange { .. } => 2,
            NoConvergence { .. } | NonPhysicalRoot { .. } | NoSettle { .. }
            | EventStorm { .. } | NonFinite { .. } | ResetImpossible { .. }
            | IntervalOverlap { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, AfzError>;

/// Non-fatal conditions surfaced in reports. These never abort an analysis;
/// `analyze` prints them and `verify` decides which ones gate.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Leakage or switch capacitance large enough to strain the
    /// small-parasitic approximations (L_k > L_m/10 or C_oss > C_d/10).
    ApproximationViolated { what: String },
    /// Output inductor valley current at or below zero: DCM operation.
    DcmRisk { i_l_min: f64 },
    /// Commanded duty exceeds the resonant-reset limit.
    DutyExceedsMax { duty: f64, d_max: f64 },
    /// AC-sweep frequency above f_sw/4; treat the point as indicative only.
    Alias { freq_hz: f64 },
    /// Resonant capacitor not fully discharged at turn-on.
    IncompleteReset { v_cd_at_turn_on: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::ApproximationViolated { what } => {
                write!(f, "approximation strained: {what}")
            }
            Warning::DcmRisk { i_l_min } => write!(
                f,
                "inductor valley current {i_l_min:.3} A <= 0: discontinuous conduction"
            ),
            Warning::DutyExceedsMax { duty, d_max } => write!(
                f,
                "duty {duty:.4} exceeds resonant-reset limit D_max = {d_max:.4}"
            ),
            Warning::Alias { freq_hz } => write!(
                f,
                "{freq_hz:.1} Hz is above f_sw/4; sweep result is indicative only"
            ),
            Warning::IncompleteReset { v_cd_at_turn_on } => write!(
                f,
                "incomplete reset: v_Cd = {v_cd_at_turn_on:.2} V at turn-on"
            ),
        }
    }
}
