//! Frequency-response extraction by sinusoidal injection.
//!
//! For each frequency the converter is settled, a small sinusoid is
//! injected on the relevant input (duty, source voltage, or load current),
//! the injection transient is discarded, and the output-voltage component
//! at the injection frequency is extracted by single-bin Fourier
//! projection over an integer number of both injection cycles and
//! switching periods. The complex ratio of output to stimulus projections
//! is the measured response.

use super::{CircuitState, Simulator, Stimulus};
use crate::converter::{OperatingPoint, ValidatedParams};
use crate::error::{Result, Warning};
use crate::smallsig::BodePoint;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Which transfer function the sweep measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    /// Output voltage over duty.
    Gvd,
    /// Output voltage over input voltage.
    Gvv,
    /// Output voltage over injected output current.
    Zo,
}

/// Log-spaced grid snapped so that `cycles` injection periods are an exact
/// integer number of switching periods: f = cycles * f_sw / k. Exact
/// commensurability makes the switching ripple orthogonal to the
/// projection window.
pub fn commensurate_grid(
    f_min: f64,
    f_max: f64,
    points: usize,
    f_sw: f64,
    cycles: usize,
) -> Vec<f64> {
    let raw = crate::smallsig::log_grid(f_min, f_max, points);
    let mut out = Vec::with_capacity(points);
    for f in raw {
        let k = (cycles as f64 * f_sw / f).round().max(1.0);
        let snapped = cycles as f64 * f_sw / k;
        if out.last().map_or(true, |&last: &f64| snapped > last * (1.0 + 1e-12)) {
            out.push(snapped);
        }
    }
    out
}

/// Measured response at one frequency.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub freq_hz: f64,
    pub response: Complex64,
}

/// Injection amplitudes: fractions of the operating point, chosen small
/// enough to stay in the linear regime.
#[derive(Debug, Clone, Copy)]
pub struct SweepAmplitude {
    /// Absolute duty perturbation (for Gvd).
    pub duty: f64,
    /// Relative source-voltage perturbation (for Gvv).
    pub v_i_rel: f64,
    /// Relative load-current perturbation (for Zo).
    pub i_rel: f64,
}

impl Default for SweepAmplitude {
    fn default() -> Self {
        SweepAmplitude {
            duty: 0.005,
            v_i_rel: 0.01,
            i_rel: 0.01,
        }
    }
}

/// Number of injection cycles projected per frequency point.
pub const PROJECTION_CYCLES: usize = 20;

/// Run the sweep. `settled` is the state of the unperturbed converter at a
/// period boundary (from `periodic_steady_state`); each frequency starts
/// from it, discards the injection transient, and projects 20 cycles.
/// Frequencies above f_sw/4 are flagged; the sweep still measures them.
pub fn ac_sweep(
    p: &ValidatedParams,
    op: &OperatingPoint,
    target: SweepTarget,
    freqs: &[f64],
    amplitude: SweepAmplitude,
    settled: &CircuitState,
    dt_max: f64,
) -> Result<(Vec<SweepPoint>, Vec<Warning>)> {
    let mut warnings = Vec::new();
    for &f in freqs {
        if f > 0.25 * p.f_sw {
            warnings.push(Warning::Alias { freq_hz: f });
        }
    }

    let results: Vec<Result<SweepPoint>> = freqs
        .par_iter()
        .map(|&f| measure_one(p, op, target, f, amplitude, settled, dt_max))
        .collect();
    let mut points = Vec::with_capacity(freqs.len());
    for r in results {
        points.push(r?);
    }
    Ok((points, warnings))
}

fn measure_one(
    p: &ValidatedParams,
    op: &OperatingPoint,
    target: SweepTarget,
    freq: f64,
    amp: SweepAmplitude,
    settled: &CircuitState,
    dt_max: f64,
) -> Result<SweepPoint> {
    let omega = 2.0 * PI * freq;
    let t_sw = p.t_sw();

    // Injection transient decay is governed by the output filter damping;
    // discard a fixed real-time budget plus whole injection cycles.
    let sigma = 1.0 / (2.0 * op.r_load * p.c_o);
    let decay = 12.0 / sigma;
    let discard_cycles = (decay * freq).ceil().max(2.0) as usize;
    let total_cycles = discard_cycles + PROJECTION_CYCLES;
    // Snap the horizon onto whole switching periods (freqs are built
    // commensurate, so this is exact up to rounding).
    let periods_per_cycle = (p.f_sw / freq).round() as usize;
    let discard_periods = discard_cycles * periods_per_cycle;
    let total_periods = total_cycles * periods_per_cycle;

    let d0 = op.duty;
    let v0 = op.v_i;
    let i0 = op.i_l;
    let (duty_fn, vi_fn, inj_fn): (
        Box<dyn Fn(f64) -> f64 + Sync>,
        Box<dyn Fn(f64) -> f64 + Sync>,
        Box<dyn Fn(f64) -> f64 + Sync>,
    ) = match target {
        SweepTarget::Gvd => (
            Box::new(move |t| d0 + amp.duty * (omega * t).sin()),
            Box::new(move |_| v0),
            Box::new(|_| 0.0),
        ),
        SweepTarget::Gvv => (
            Box::new(move |_| d0),
            Box::new(move |t| v0 * (1.0 + amp.v_i_rel * (omega * t).sin())),
            Box::new(|_| 0.0),
        ),
        SweepTarget::Zo => (
            Box::new(move |_| d0),
            Box::new(move |_| v0),
            Box::new(move |t| i0 * amp.i_rel * (omega * t).sin()),
        ),
    };
    let stimulus_value = |t: f64| -> f64 {
        match target {
            SweepTarget::Gvd => amp.duty * (omega * t).sin(),
            SweepTarget::Gvv => v0 * amp.v_i_rel * (omega * t).sin(),
            SweepTarget::Zo => i0 * amp.i_rel * (omega * t).sin(),
        }
    };

    let stim = Stimulus {
        duty: &*duty_fn,
        v_i: &*vi_fn,
        i_inj: &*inj_fn,
    };
    let mut sim = Simulator::new(p, op, dt_max);
    sim.state = *settled;
    sim.state.time = 0.0;

    sim.advance(discard_periods as f64 * t_sw, &stim, None)?;

    // Trapezoidal single-bin projection of output and stimulus.
    let mut acc_out = Complex64::new(0.0, 0.0);
    let mut acc_in = Complex64::new(0.0, 0.0);
    let mut last: Option<(f64, Complex64, Complex64)> = None;
    {
        let mut rec = |x: &CircuitState, _b: &super::Branches| {
            let w = Complex64::from_polar(1.0, -omega * x.time);
            let o = w * x.v_co;
            let i = w * stimulus_value(x.time);
            if let Some((t_prev, o_prev, i_prev)) = last {
                let dt = x.time - t_prev;
                acc_out += (o + o_prev) * 0.5 * dt;
                acc_in += (i + i_prev) * 0.5 * dt;
            }
            last = Some((x.time, o, i));
        };
        let b0 = sim.branches(sim.mode, &sim.state, sim.state.time, &stim);
        rec(&sim.state, &b0);
        sim.advance(total_periods as f64 * t_sw, &stim, Some(&mut rec))?;
    }

    Ok(SweepPoint {
        freq_hz: freq,
        response: acc_out / acc_in,
    })
}

/// Convert sweep points to Bode rows with a continuously unwrapped phase.
pub fn to_bode(points: &[SweepPoint]) -> Vec<BodePoint> {
    let mut out = Vec::with_capacity(points.len());
    let mut prev: Option<f64> = None;
    for pt in points {
        let mag_db = 20.0 * pt.response.norm().log10();
        let mut phase = pt.response.arg().to_degrees();
        if let Some(p) = prev {
            while phase - p > 180.0 {
                phase -= 360.0;
            }
            while phase - p < -180.0 {
                phase += 360.0;
            }
        }
        prev = Some(phase);
        out.push(BodePoint {
            freq_hz: pt.freq_hz,
            mag_db,
            phase_deg: phase,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_commensurate_and_increasing() {
        let g = commensurate_grid(10.0, 12.5e3, 10, 50e3, 20);
        assert!(g.len() >= 8);
        for w in g.windows(2) {
            assert!(w[1] > w[0]);
        }
        for f in &g {
            let k = 20.0 * 50e3 / f;
            assert!((k - k.round()).abs() < 1e-6, "f = {f}");
        }
        assert!((g[0] - 10.0).abs() < 0.01);
    }
}
