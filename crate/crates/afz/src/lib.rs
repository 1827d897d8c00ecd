//! Analysis workbench for the autotransformer forward converter with
//! type-Zeta resonant reset (AFZ).
//!
//! The crate stacks four layers that check each other:
//!
//! * [`converter`] — parameter validation and the closed-form static
//!   relations (voltage transfer, duty limit, resonant frequencies,
//!   reset-capacitor bound, magnetic power split).
//! * [`reset`] / [`waveform`] / [`losses`] — the steady-state engine: the
//!   resonant-reset energy-balance system, interval times, component
//!   stresses, synthesized per-component waveforms, and a conduction-loss
//!   lower bound.
//! * [`sim`] — an independent event-driven piecewise-linear simulator of
//!   the same power stage, used as a brute-force oracle for the analytic
//!   layer, plus sinusoidal-injection AC sweeps.
//! * [`smallsig`] — the injected-current small-signal model and the three
//!   output transfer functions, cross-checked against the AC sweeps.
//! * [`planner`] — plant-level string sizing and mismatch scenarios that
//!   generate the operating points the other layers analyze.
//!
//! [`config`] and [`report`] provide the file formats of the `afz` CLI.

pub mod config;
pub mod converter;
pub mod error;
pub mod losses;
pub mod planner;
pub mod report;
pub mod reset;
pub mod sim;
pub mod smallsig;
pub mod waveform;
pub mod xcheck;

pub use error::{AfzError, Result, Warning};
