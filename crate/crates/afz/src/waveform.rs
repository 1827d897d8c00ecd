//! Sampled per-component waveforms over one switching period.
//!
//! Channels are synthesized from the closed-form interval expressions of
//! the solved steady state. Interval boundaries are always exact sample
//! points and appear twice (left and right value) so discontinuities
//! survive in the data. The output inductor pair (i_L, v_L) uses the
//! idealized triangle with the rise spanning exactly D*T_sw, which closes
//! the period and keeps its volt-second integral identically zero; the
//! commutation dips show up on the switch, reset and rectifier channels
//! where they physically belong.

use crate::converter::{resonant_profile, OperatingPoint, ValidatedParams};
use crate::reset::{IntervalTimes, ResetSolution};

/// Channel names in emission order.
pub const CHANNEL_NAMES: [&str; 14] = [
    "i_l", "v_l", "i_lm", "v_lm", "i_cd", "v_cd", "i_s", "v_ds", "i_d1", "v_d1", "i_d2",
    "v_d2", "i_dd1", "i_dd2",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct ChannelStats {
    pub mean: f64,
    pub rms: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct WaveformSet {
    /// Sample times (s), non-decreasing, duplicated at interval boundaries.
    pub time: Vec<f64>,
    /// One sample vector per entry of `CHANNEL_NAMES`.
    pub channels: Vec<Vec<f64>>,
    /// Period the set spans (s).
    pub period: f64,
}

impl WaveformSet {
    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        CHANNEL_NAMES
            .iter()
            .position(|&c| c == name)
            .map(|i| self.channels[i].as_slice())
    }

    /// Trapezoidal summary statistics of one channel over the set's span.
    pub fn stats(&self, name: &str) -> Option<ChannelStats> {
        let data = self.channel(name)?;
        Some(stats_over(&self.time, data))
    }

    /// Trapezoidal mean of an arbitrary sample vector on this time grid.
    pub fn mean_of(&self, data: &[f64]) -> f64 {
        stats_over(&self.time, data).mean
    }
}

pub fn stats_over(time: &[f64], data: &[f64]) -> ChannelStats {
    assert_eq!(time.len(), data.len());
    if data.is_empty() {
        return ChannelStats::default();
    }
    let mut int1 = 0.0;
    let mut int2 = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for k in 0..data.len() {
        min = min.min(data[k]);
        max = max.max(data[k]);
        if k + 1 < data.len() {
            let dt = time[k + 1] - time[k];
            int1 += 0.5 * dt * (data[k] + data[k + 1]);
            int2 += 0.5 * dt * (data[k] * data[k] + data[k + 1] * data[k + 1]);
        }
    }
    let span = time[time.len() - 1] - time[0];
    if span <= 0.0 {
        return ChannelStats {
            mean: data[0],
            rms: data[0].abs(),
            min,
            max,
        };
    }
    ChannelStats {
        mean: int1 / span,
        rms: (int2 / span).max(0.0).sqrt(),
        min,
        max,
    }
}

struct Sample {
    i_l: f64,
    v_l: f64,
    i_lm: f64,
    v_lm: f64,
    i_cd: f64,
    v_cd: f64,
    i_s: f64,
    v_ds: f64,
    i_d1: f64,
    v_d1: f64,
    i_d2: f64,
    v_d2: f64,
    i_dd1: f64,
    i_dd2: f64,
}

/// Evaluate the closed-form channels of a solved steady state on a grid of
/// roughly `samples_per_period` points (minimum 256), boundaries included
/// exactly.
pub fn synthesize_waveforms(
    p: &ValidatedParams,
    op: &OperatingPoint,
    sol: &ResetSolution,
    times: &IntervalTimes,
    samples_per_period: usize,
) -> WaveformSet {
    let total = samples_per_period.max(256);
    let prof = resonant_profile(p);
    let n = p.turns_ratio;
    let t_sw = p.t_sw();
    let d_on = times.t[1] - times.t[0];
    let rip = crate::reset::ripple(p, op);
    let i_l_min = op.i_l - 0.5 * rip.delta_i_l;
    let i_l_max = op.i_l + 0.5 * rip.delta_i_l;
    let v_l_on = op.v_i * (1.0 + n) * (1.0 - op.duty);
    let v_l_off = -op.v_i * (1.0 + n) * op.duty;
    let fall_span = t_sw - d_on;
    let z0 = (p.l_m / p.c_eq).sqrt();
    let radius = (sol.i_lm_t2 * sol.i_lm_t2 + (sol.v_cd_t2 / z0) * (sol.v_cd_t2 / z0)).sqrt();
    let i_d1_off3 = -sol.i_lm_min / (1.0 + n);

    // Idealized output-inductor triangle: peak at t1, valley at t6 == t0.
    let tri_i_l = |t: f64| {
        if t <= times.t[1] {
            i_l_min + rip.delta_i_l * (t - times.t[0]) / d_on.max(1e-300)
        } else {
            i_l_max - rip.delta_i_l * (t - times.t[1]) / fall_span.max(1e-300)
        }
    };
    // Magnetizing ramp over the full gate-high span [t5, t6] + [t0, t1].
    let gate_high = d_on + (times.t[6] - times.t[5]);
    let tri_i_lm = |t: f64| {
        if t <= times.t[1] {
            sol.i_lm_min
                + sol.delta_i_lm * (t - times.t[0] + (times.t[6] - times.t[5]))
                    / gate_high.max(1e-300)
        } else {
            sol.i_lm_min + sol.delta_i_lm * (t - times.t[5]) / gate_high.max(1e-300)
        }
    };

    let eval = |seg: usize, t: f64| -> Sample {
        let i_l = tri_i_l(t);
        match seg {
            // On time.
            0 => {
                let i_lm = tri_i_lm(t);
                let i_d1 = i_l;
                Sample {
                    i_l,
                    v_l: v_l_on,
                    i_lm,
                    v_lm: op.v_i,
                    i_cd: 0.0,
                    v_cd: sol.v_cd_min,
                    i_s: (1.0 + n) * i_l + i_lm,
                    v_ds: 0.0,
                    i_d1,
                    v_d1: 0.0,
                    i_d2: 0.0,
                    v_d2: -(1.0 + n) * op.v_i,
                    i_dd1: 0.0,
                    i_dd2: 0.0,
                }
            }
            // Turn-off commutation: leakage ring from the valley to V_t2.
            1 => {
                let span = (times.t[2] - times.t[1]).max(1e-300);
                let th = 0.5 * std::f64::consts::PI * (t - times.t[1]) / span;
                let v_cd = sol.v_cd_min + (sol.v_cd_t2 - sol.v_cd_min) * th.sin();
                let i_cd = p.c_d
                    * (sol.v_cd_t2 - sol.v_cd_min)
                    * (0.5 * std::f64::consts::PI / span)
                    * th.cos();
                let i_d1 = i_l_max * th.cos();
                let i_lm = sol.i_lm_max + (sol.i_lm_t2 - sol.i_lm_max) * th.sin();
                Sample {
                    i_l,
                    v_l: v_l_off,
                    i_lm,
                    v_lm: -v_cd,
                    i_cd,
                    v_cd,
                    i_s: 0.0,
                    v_ds: op.v_i + v_cd,
                    i_d1,
                    v_d1: 0.0,
                    i_d2: i_l - i_d1,
                    v_d2: 0.0,
                    i_dd1: i_cd.max(0.0),
                    i_dd2: (-i_cd).max(0.0),
                }
            }
            // The two resonance quarters: a circle in (v_Cd, i_Lm).
            2 | 3 => {
                let phi = times.phi2 + prof.omega0 * (t - times.t[2]);
                let i_lm = radius * phi.cos();
                let v_cd = radius * z0 * phi.sin();
                let i_cd = i_lm * p.c_d / p.c_eq;
                let i_dd1 = i_cd.max(0.0);
                let i_dd2 = (-i_cd).max(0.0);
                Sample {
                    i_l,
                    v_l: v_l_off,
                    i_lm,
                    v_lm: -v_cd,
                    i_cd,
                    v_cd,
                    i_s: 0.0,
                    v_ds: op.v_i + v_cd,
                    i_d1: 0.0,
                    v_d1: -(1.0 + n) * v_cd,
                    i_d2: i_l - i_dd2,
                    v_d2: 0.0,
                    i_dd1,
                    i_dd2,
                }
            }
            // Freewheel span: magnetizing current circulates in the windings.
            4 => Sample {
                i_l,
                v_l: v_l_off,
                i_lm: sol.i_lm_min,
                v_lm: 0.0,
                i_cd: 0.0,
                v_cd: 0.0,
                i_s: 0.0,
                v_ds: op.v_i,
                i_d1: i_d1_off3,
                v_d1: 0.0,
                i_d2: i_l - i_d1_off3,
                v_d2: 0.0,
                i_dd1: 0.0,
                i_dd2: 0.0,
            },
            // Turn-on commutation: rectifier current deficit through C_d.
            _ => {
                let tau = t - times.t[5];
                let (delta, v_cd) = sol.commutation.eval(tau);
                let i_d1 = (i_l - delta).max(0.0);
                let i_lm = tri_i_lm(t);
                Sample {
                    i_l,
                    v_l: v_l_off,
                    i_lm,
                    v_lm: op.v_i,
                    i_cd: -delta,
                    v_cd,
                    i_s: i_lm + (1.0 + n) * i_d1 + delta,
                    v_ds: 0.0,
                    i_d1,
                    v_d1: 0.0,
                    i_d2: 0.0,
                    v_d2: -(op.v_i + v_cd),
                    i_dd1: 0.0,
                    i_dd2: delta,
                }
            }
        }
    };

    let durations = times.durations();
    let span_total: f64 = durations.iter().sum();
    let mut time = Vec::with_capacity(total + 16);
    let mut channels: Vec<Vec<f64>> = (0..CHANNEL_NAMES.len())
        .map(|_| Vec::with_capacity(total + 16))
        .collect();

    let mut push = |t: f64, s: Sample| {
        time.push(t);
        let row = [
            s.i_l, s.v_l, s.i_lm, s.v_lm, s.i_cd, s.v_cd, s.i_s, s.v_ds, s.i_d1, s.v_d1,
            s.i_d2, s.v_d2, s.i_dd1, s.i_dd2,
        ];
        for (c, v) in channels.iter_mut().zip(row) {
            c.push(v);
        }
    };

    for seg in 0..6 {
        let (a, b) = (times.t[seg], times.t[seg + 1]);
        let dur = b - a;
        let count = if dur <= 0.0 {
            2
        } else {
            ((total as f64 * dur / span_total).round() as usize).max(24)
        };
        for k in 0..count {
            let t = if count == 1 {
                a
            } else {
                a + dur * k as f64 / (count - 1) as f64
            };
            push(t, eval(seg, t));
        }
    }

    WaveformSet {
        time,
        channels,
        period: t_sw,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converter::{prototype_params, validate_params, OperatingPoint};
    use crate::reset::{interval_times, solve_reset};
    use approx::assert_relative_eq;

    fn build() -> (ValidatedParams, OperatingPoint, WaveformSet) {
        let p = validate_params(prototype_params()).unwrap();
        let op = OperatingPoint::from_duty(&p, 29.3, 0.5688, 225.0).unwrap();
        let sol = solve_reset(&p, &op).unwrap();
        let times = interval_times(&p, &op, &sol).unwrap();
        let wf = synthesize_waveforms(&p, &op, &sol, &times, 2048);
        (p, op, wf)
    }

    #[test]
    fn volt_second_balance_on_l() {
        let (_, op, wf) = build();
        let stats = wf.stats("v_l").unwrap();
        assert!(
            stats.mean.abs() <= 1e-6 * op.v_i,
            "mean v_L = {}",
            stats.mean
        );
    }

    #[test]
    fn charge_balance_on_cd() {
        let (_, op, wf) = build();
        let stats = wf.stats("i_cd").unwrap();
        assert!(
            stats.mean.abs() <= 1e-3 * op.i_l,
            "mean i_Cd = {}",
            stats.mean
        );
    }

    #[test]
    fn on_interval_channel_algebra() {
        let (p, op, wf) = build();
        let n = p.turns_ratio;
        let i_l = wf.channel("i_l").unwrap();
        let i_lm = wf.channel("i_lm").unwrap();
        let i_s = wf.channel("i_s").unwrap();
        let v_ds = wf.channel("v_ds").unwrap();
        let v_cd = wf.channel("v_cd").unwrap();
        let v_d1 = wf.channel("v_d1").unwrap();
        // Switch current identity while it conducts, clamp identities while
        // it blocks during the resonance.
        for k in 0..wf.time.len() {
            if v_ds[k] == 0.0 && i_s[k] > 0.0 && wf.time[k] < 0.5 * wf.period {
                let expect = (1.0 + n) * i_l[k] + i_lm[k];
                assert_relative_eq!(i_s[k], expect, max_relative = 1e-9);
            }
            if i_s[k] == 0.0 && v_cd[k] > 0.0 {
                assert_relative_eq!(v_ds[k], op.v_i + v_cd[k], max_relative = 1e-9);
                if v_d1[k] != 0.0 {
                    assert_relative_eq!(v_d1[k], -(1.0 + n) * v_cd[k], max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn scenario1_spot_values() {
        // Use the published reset figures to spot-check channel levels.
        let p = validate_params(prototype_params()).unwrap();
        let op = OperatingPoint::from_duty(&p, 29.3, 0.689, 225.0).unwrap();
        let n = p.turns_ratio;
        let v_l_on = op.v_i * (1.0 + n) * (1.0 - op.duty);
        assert_relative_eq!(v_l_on, 18.22, max_relative = 1e-3);
        let i_d1_off3 = -(-0.44) / (1.0 + n);
        assert_relative_eq!(i_d1_off3, 0.22, max_relative = 1e-9);
    }

    #[test]
    fn resonant_segment_energy_balance() {
        // Quadrature over the two resonance quarters: the energy the
        // magnetizing inductance gives up equals what the reset capacitance
        // picks up (both are negative here: the capacitors return their
        // charge and the magnetizing current swings past its entry value).
        let p = validate_params(prototype_params()).unwrap();
        let op = OperatingPoint::from_duty(&p, 29.3, 0.5688, 225.0).unwrap();
        let sol = solve_reset(&p, &op).unwrap();
        let times = interval_times(&p, &op, &sol).unwrap();
        let wf = synthesize_waveforms(&p, &op, &sol, &times, 4096);
        let i_lm = wf.channel("i_lm").unwrap();
        let v_cd = wf.channel("v_cd").unwrap();
        // Quadrature route: integrate the instantaneous powers over the
        // resonance window [t2, t4] instead of reading endpoint energies.
        let mut p_lm = 0.0;
        let mut p_c = 0.0;
        for k in 0..wf.time.len() - 1 {
            let (ta, tb) = (wf.time[k], wf.time[k + 1]);
            if ta < times.t[2] - 1e-15 || tb > times.t[4] + 1e-15 || tb <= ta {
                continue;
            }
            let dt = tb - ta;
            // d(energy)/dt via product of state and its trapezoidal slope.
            p_lm += 0.5 * p.l_m * (i_lm[k + 1] * i_lm[k + 1] - i_lm[k] * i_lm[k]) / dt * dt;
            p_c += 0.5 * p.c_eq * (v_cd[k + 1] * v_cd[k + 1] - v_cd[k] * v_cd[k]) / dt * dt;
        }
        let scale = (0.5 * p.c_eq * sol.v_cd_t3 * sol.v_cd_t3).abs();
        assert!(
            (p_lm + p_c).abs() <= 1e-3 * scale,
            "dE_Lm = {p_lm:.4e}, dE_C = {p_c:.4e}, scale = {scale:.3e}"
        );
    }
}
