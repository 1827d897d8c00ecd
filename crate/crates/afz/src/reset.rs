//! Steady-state solution of the resonant reset.
//!
//! In continuous conduction the switching period decomposes into six
//! phases: the on time, a fast turn-off commutation where the leakage
//! energy is dumped into the reset capacitors, the two-quarter resonance
//! of L_m against C_d + C_oss, a freewheeling span with the magnetizing
//! current held constant, and a fast turn-on commutation that charges C_d
//! to its negative valley. The unknowns that pin the whole period are the
//! magnetizing valley current and the capacitor voltage at the two
//! commutation boundaries; they satisfy a coupled energy-balance system
//! solved here with a damped Newton iteration, plus an outer fixed point
//! on the turn-on valley voltage.
//!
//! Energy-balance equations (all in doubled-energy units, C_eq = C_d + C_oss,
//! L_k the total leakage referred to the primary):
//!
//! ```text
//! (1)  C_eq*(V_t2^2 - V_a^2)  = (1+n)^2*L_k*I_Lmax^2 + L_m*(I_Lm_max^2 - I_t2^2)
//! (2)  C_eq*(V_t3^2 - V_t2^2) = L_m*I_t2^2
//! (3)  C_eq*V_t3^2            = L_m*I_Lm_min^2
//! ```
//!
//! with `I_Lm_max = I_Lm_min + dI_Lm`, `I_t2 = I_Lm_max - (1+n)*L_k*I_Lmax/L_m`
//! (the magnetizing drift over the turn-off commutation) and
//! `V_a = L_ksec*V_o/((1+n)*L)` the small positive level where the
//! freewheel diode takes over. The source-work terms of C_oss cancel out
//! of the balance, so C_oss appears only inside C_eq.

use crate::converter::{resonant_profile, OperatingPoint, ResonantProfile, ValidatedParams};
use crate::error::{AfzError, Result, Warning};
use std::f64::consts::PI;

/// Inductor-current ripple figures for one operating point.
#[derive(Debug, Clone, Copy)]
pub struct Ripple {
    /// Peak-to-peak output inductor ripple (A).
    pub delta_i_l: f64,
    /// Mean output inductor (string) current (A).
    pub i_l: f64,
    /// Valley current I_L - dI_L/2 (A); at or below zero means DCM.
    pub i_l_min: f64,
    /// Peak-to-peak magnetizing ripple (A).
    pub delta_i_lm: f64,
    /// Set when the valley current indicates discontinuous conduction.
    pub dcm: bool,
}

/// Closed-form ripple evaluation; DCM is flagged, not an error.
pub fn ripple(p: &ValidatedParams, op: &OperatingPoint) -> Ripple {
    let n = p.turns_ratio;
    let delta_i_l =
        op.v_i * (1.0 + n) * (1.0 - op.duty) * op.duty / (p.l * p.f_sw);
    let delta_i_lm = op.v_i * op.duty / (p.l_m * p.f_sw);
    let i_l_min = op.i_l - 0.5 * delta_i_l;
    Ripple {
        delta_i_l,
        i_l: op.i_l,
        i_l_min,
        delta_i_lm,
        dcm: i_l_min <= 0.0,
    }
}

/// Solution of the reset energy-balance system.
#[derive(Debug, Clone)]
pub struct ResetSolution {
    /// Magnetizing valley current (A), expected <= 0.
    pub i_lm_min: f64,
    /// Magnetizing peak current I_Lm_min + dI_Lm (A).
    pub i_lm_max: f64,
    /// Magnetizing current entering the main resonance (A); the turn-off
    /// commutation bleeds a little flux, so this sits just below the peak.
    pub i_lm_t2: f64,
    /// Peak-to-peak magnetizing ripple (A).
    pub delta_i_lm: f64,
    /// Reset capacitor valley voltage at the end of turn-on commutation (V).
    pub v_cd_min: f64,
    /// Reset capacitor voltage when the turn-off commutation finishes (V).
    pub v_cd_t2: f64,
    /// Reset capacitor peak voltage, at the magnetizing zero crossing (V).
    pub v_cd_t3: f64,
    /// Freewheel takeover level where the turn-off commutation starts
    /// charging from (V).
    pub v_a: f64,
    /// Duration of the turn-on commutation (s).
    pub t_on_t: f64,
    /// Full turn-on commutation trajectory, for waveform synthesis.
    pub commutation: TurnOnCommutation,
    /// Relative residuals of the three balance equations at the solution.
    pub residuals: [f64; 3],
    /// Outer fixed-point iterations used for the valley voltage.
    pub outer_iterations: usize,
}

/// Turn-on commutation result: valley voltage and duration.
///
/// After the gate edge the output rectifier current ramps from its
/// freewheeling level -I_Lm_min/(1+n) up to the inductor current. The
/// deficit flows through C_d and the steering diode into the filter,
/// ringing with the leakage at omega^2 = (1/L + 1/L_ksec)/C_d and driving
/// v_Cd negative. If the ring would push v_Cd below -V_i the lower
/// steering diode clamps it there and the remaining deficit decays
/// linearly.
#[derive(Debug, Clone, Copy)]
pub struct TurnOnCommutation {
    pub v_cd_min: f64,
    pub duration: f64,
    /// True when the -V_i clamp engaged.
    pub clamped: bool,
    /// Initial rectifier-current deficit (A).
    pub deficit: f64,
    omega: f64,
    ddot0: f64,
    c_d: f64,
    /// Instant the clamp engages (= duration when it never does).
    t_clamp: f64,
    /// Deficit decay slope after the clamp (A/s, positive).
    post_slope: f64,
    v_i: f64,
}

impl TurnOnCommutation {
    /// Deficit current and capacitor voltage at `tau` seconds into the
    /// commutation.
    pub fn eval(&self, tau: f64) -> (f64, f64) {
        if self.duration <= 0.0 || self.omega <= 0.0 {
            return (0.0, self.v_cd_min);
        }
        let tau = tau.clamp(0.0, self.duration);
        if tau <= self.t_clamp {
            let th = self.omega * tau;
            let delta = self.deficit * th.cos() + self.ddot0 / self.omega * th.sin();
            let v_cd = (-self.deficit * th.sin()
                + self.ddot0 / self.omega * (th.cos() - 1.0))
                / (self.c_d * self.omega);
            (delta.max(0.0), v_cd)
        } else {
            let th = self.omega * self.t_clamp;
            let delta_c = self.deficit * th.cos() + self.ddot0 / self.omega * th.sin();
            let delta = (delta_c - self.post_slope * (tau - self.t_clamp)).max(0.0);
            (delta, -self.v_i)
        }
    }
}

pub fn turn_on_commutation(
    p: &ValidatedParams,
    op: &OperatingPoint,
    i_lm_min: f64,
    i_l_valley: f64,
) -> TurnOnCommutation {
    let n = p.turns_ratio;
    let ls = p.l_k_secondary();
    let i_sec0 = -i_lm_min / (1.0 + n);
    let deficit = i_l_valley - i_sec0;
    let degenerate = TurnOnCommutation {
        v_cd_min: 0.0,
        duration: 0.0,
        clamped: false,
        deficit: deficit.max(0.0),
        omega: 0.0,
        ddot0: 0.0,
        c_d: p.c_d,
        t_clamp: 0.0,
        post_slope: 0.0,
        v_i: op.v_i,
    };
    if ls <= 0.0 || deficit <= 0.0 {
        return degenerate;
    }
    let omega = ((1.0 / p.l + 1.0 / ls) / p.c_d).sqrt();
    // d(deficit)/dt at the gate edge, with v_Cd still at zero.
    let ddot0 = (op.v_i - op.v_o) / p.l - n * op.v_i / ls;

    let delta = |t: f64| deficit * (omega * t).cos() + ddot0 / omega * (omega * t).sin();
    let v_cd = |t: f64| {
        (-deficit * (omega * t).sin() + ddot0 / omega * ((omega * t).cos() - 1.0))
            / (p.c_d * omega)
    };

    // First zero of the deficit; atan2 lands it in (0, pi/omega].
    let t_end = (deficit * omega).atan2(-ddot0) / omega;

    // v_Cd decreases monotonically while the deficit is positive, so the
    // clamp check only needs the endpoint.
    if v_cd(t_end) >= -op.v_i {
        return TurnOnCommutation {
            v_cd_min: v_cd(t_end),
            duration: t_end,
            clamped: false,
            deficit,
            omega,
            ddot0,
            c_d: p.c_d,
            t_clamp: t_end,
            post_slope: 0.0,
            v_i: op.v_i,
        };
    }

    // Bisect for the clamp instant, then finish the ramp at constant slope.
    let (mut lo, mut hi) = (0.0, t_end);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if v_cd(mid) >= -op.v_i {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_clamp = 0.5 * (lo + hi);
    let remaining = delta(t_clamp);
    let slope = op.v_o / p.l + (1.0 + n) * op.v_i / ls;
    let duration = t_clamp + (remaining / slope).max(0.0);
    TurnOnCommutation {
        v_cd_min: -op.v_i,
        duration,
        clamped: true,
        deficit,
        omega,
        ddot0,
        c_d: p.c_d,
        t_clamp,
        post_slope: slope,
        v_i: op.v_i,
    }
}

/// Solve the reset energy-balance system at one operating point.
///
/// Newton on (I_Lm_min, V_t2, V_t3) from the lossless-symmetric starting
/// point, wrapped in a relaxed fixed point on the valley voltage
/// (relaxation 0.5, |dV| < 1 mV, at most 100 outer rounds). The valley
/// couples back only through the reported waveforms, so the outer loop
/// settles in a couple of rounds.
pub fn solve_reset(p: &ValidatedParams, op: &OperatingPoint) -> Result<ResetSolution> {
    let n = p.turns_ratio;
    let rip = ripple(p, op);
    let i_l_max = rip.i_l + 0.5 * rip.delta_i_l;
    let i_l_valley = rip.i_l - 0.5 * rip.delta_i_l;
    let d_i_lm = rip.delta_i_lm;
    let drift = (1.0 + n) * p.l_k * i_l_max / p.l_m;
    let v_a = if p.l_k > 0.0 {
        p.l_k_secondary() * op.v_o / ((1.0 + n) * p.l)
    } else {
        0.0
    };
    let c_eq = p.c_eq;
    let l_m = p.l_m;
    let leak_energy = (1.0 + n) * (1.0 + n) * p.l_k * i_l_max * i_l_max;

    // Residual vector of the balance system.
    let residual = |u: &[f64; 3]| -> [f64; 3] {
        let (i_min, v2, v3) = (u[0], u[1], u[2]);
        let i_max = i_min + d_i_lm;
        let i_t2 = i_max - drift;
        [
            c_eq * (v2 * v2 - v_a * v_a) - leak_energy - l_m * (i_max * i_max - i_t2 * i_t2),
            c_eq * (v3 * v3 - v2 * v2) - l_m * i_t2 * i_t2,
            c_eq * v3 * v3 - l_m * i_min * i_min,
        ]
    };

    let jacobian = |u: &[f64; 3]| -> [[f64; 3]; 3] {
        let (i_min, v2, v3) = (u[0], u[1], u[2]);
        let i_max = i_min + d_i_lm;
        let i_t2 = i_max - drift;
        [
            [-2.0 * l_m * drift, 2.0 * c_eq * v2, 0.0],
            [-2.0 * l_m * i_t2, -2.0 * c_eq * v2, 2.0 * c_eq * v3],
            [-2.0 * l_m * i_min, 0.0, 2.0 * c_eq * v3],
        ]
    };

    let norm = |r: &[f64; 3]| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();

    // Lossless-symmetric closed form as the Newton start.
    let mut u = [
        -0.5 * d_i_lm,
        v_a,
        0.5 * d_i_lm * (l_m / c_eq).sqrt(),
    ];
    let e_scale = l_m * d_i_lm * d_i_lm + c_eq * op.v_i * op.v_i + leak_energy;

    let solve_inner = |u: &mut [f64; 3]| -> Result<[f64; 3]> {
        for _ in 0..100 {
            let r = residual(u);
            if norm(&r) <= 1e-13 * e_scale {
                return Ok(r);
            }
            let j = jacobian(u);
            let step = solve3(&j, &r).ok_or(AfzError::NoConvergence {
                iterations: 100,
                residual: norm(&r) / e_scale,
            })?;
            // Backtracking line search on the residual norm.
            let mut lambda = 1.0;
            let base = norm(&r);
            for _ in 0..30 {
                let trial = [
                    u[0] - lambda * step[0],
                    u[1] - lambda * step[1],
                    u[2] - lambda * step[2],
                ];
                if norm(&residual(&trial)) < base || lambda < 1e-6 {
                    *u = trial;
                    break;
                }
                lambda *= 0.5;
            }
        }
        let r = residual(u);
        if norm(&r) <= 1e-10 * e_scale {
            Ok(r)
        } else {
            Err(AfzError::NoConvergence {
                iterations: 100,
                residual: norm(&r) / e_scale,
            })
        }
    };

    let mut v_cd_min = 0.0;
    let mut commutation = turn_on_commutation(p, op, -0.5 * d_i_lm, i_l_valley);
    let mut outer_iterations = 0;
    let mut r = [0.0; 3];
    for k in 0..100 {
        outer_iterations = k + 1;
        r = solve_inner(&mut u)?;
        commutation = turn_on_commutation(p, op, u[0], i_l_valley);
        let next = v_cd_min + 0.5 * (commutation.v_cd_min - v_cd_min);
        let delta = (next - v_cd_min).abs();
        v_cd_min = next;
        if delta < 1e-3 {
            break;
        }
    }
    // Land exactly on the commutation value once the relaxation settled.
    v_cd_min = commutation.v_cd_min;

    let (i_min, v2, v3) = (u[0], u[1], u[2]);
    if !(i_min.is_finite() && v2.is_finite() && v3.is_finite()) {
        return Err(AfzError::NonPhysicalRoot {
            reason: "non-finite root".into(),
        });
    }
    if v3 < 0.0 || v2 < -1e-9 * op.v_i.abs() || i_min > 1e-12 {
        return Err(AfzError::NonPhysicalRoot {
            reason: format!("I_Lm_min = {i_min:.4e}, V_t2 = {v2:.4e}, V_t3 = {v3:.4e}"),
        });
    }

    Ok(ResetSolution {
        i_lm_min: i_min,
        i_lm_max: i_min + d_i_lm,
        i_lm_t2: i_min + d_i_lm - drift,
        delta_i_lm: d_i_lm,
        v_cd_min,
        v_cd_t2: v2,
        v_cd_t3: v3,
        v_a,
        t_on_t: commutation.duration,
        commutation,
        residuals: [r[0] / e_scale, r[1] / e_scale, r[2] / e_scale],
        outer_iterations,
    })
}

/// Gaussian elimination with partial pivoting for the 3x3 Newton step.
fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = [
        [a[0][0], a[0][1], a[0][2], b[0]],
        [a[1][0], a[1][1], a[1][2], b[1]],
        [a[2][0], a[2][1], a[2][2], b[2]],
    ];
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = m[row][3];
        for k in (row + 1)..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Boundaries of the six phases inside one switching period.
///
/// Convention: the period starts at the beginning of the on time, so
/// t0..t6 delimit [on, off-commutation, first resonance quarter, second
/// resonance quarter, freewheel, on-commutation] and t6 equals the period.
#[derive(Debug, Clone, Copy)]
pub struct IntervalTimes {
    pub t: [f64; 7],
    /// Phase angle into the main resonance at which it starts; zero for a
    /// symmetric (leakage-free) reset.
    pub phi2: f64,
}

impl IntervalTimes {
    pub fn durations(&self) -> [f64; 6] {
        [
            self.t[1] - self.t[0],
            self.t[2] - self.t[1],
            self.t[3] - self.t[2],
            self.t[4] - self.t[3],
            self.t[5] - self.t[4],
            self.t[6] - self.t[5],
        ]
    }
}

/// Compute the interval boundaries for a solved reset.
///
/// The main resonance is the circle traced by (v_Cd, i_Lm); its two
/// sub-durations follow from the entry phase, and reduce to the familiar
/// quarter/half periods when the entry voltage is zero. The turn-off
/// commutation is a quarter period of the leakage resonance.
pub fn interval_times(
    p: &ValidatedParams,
    op: &OperatingPoint,
    sol: &ResetSolution,
) -> Result<IntervalTimes> {
    let prof: ResonantProfile = resonant_profile(p);
    let t_sw = p.t_sw();
    let d_on = op.duty * t_sw;

    let d_offt = if p.l_k > 0.0 {
        (PI / 2.0) / prof.omega0k
    } else {
        0.0
    };

    let z0 = (p.l_m / p.c_eq).sqrt();
    let phi2 = (sol.v_cd_t2 / z0).atan2(sol.i_lm_t2.max(0.0));
    let d_off1 = (PI / 2.0 - phi2) / prof.omega0;
    let d_off2 = (PI / 2.0) / prof.omega0;
    let d_ont = sol.t_on_t;

    let used = d_on + d_offt + d_off1 + d_off2 + d_ont;
    let d_off3 = t_sw - used;
    if d_off3 < -1e-12 * t_sw {
        return Err(AfzError::IntervalOverlap {
            duty: op.duty,
            total: used,
            period: t_sw,
        });
    }
    let d_off3 = d_off3.max(0.0);

    let t0 = 0.0;
    let t1 = d_on;
    let t2 = t1 + d_offt;
    let t3 = t2 + d_off1;
    let t4 = t3 + d_off2;
    let t5 = t4 + d_off3;
    let t6 = t5 + d_ont;
    Ok(IntervalTimes {
        t: [t0, t1, t2, t3, t4, t5, t6],
        phi2,
    })
}

/// Component stress figures used for device selection.
#[derive(Debug, Clone, Copy)]
pub struct StressReport {
    /// Peak switch voltage V_i + V_Cd_t3 (V).
    pub v_ds_max: f64,
    /// Peak reverse voltage on the series rectifier, (1+n)*V_Cd_t3 (V).
    pub v_d1_max: f64,
    /// Blocking voltage on the freewheel diode during the on time (V).
    pub v_d2_on: f64,
    /// Mean switch current (A); quoted in the usual loose form
    /// I_L*(1+n)*D + I_Lm, i.e. without the duty factor on the small
    /// magnetizing mean.
    pub i_s_mean: f64,
    /// Mean series-rectifier current (A).
    pub i_d1_mean: f64,
    /// Mean freewheel-diode current (A).
    pub i_d2_mean: f64,
    /// Mean steering-diode currents (A).
    pub i_dd1_mean: f64,
    pub i_dd2_mean: f64,
    /// Output inductor ripple (A).
    pub delta_i_l: f64,
    /// Magnetizing ripple (A).
    pub delta_i_lm: f64,
    /// Output inductor valley current (A).
    pub i_l_min: f64,
}

pub fn stresses(
    p: &ValidatedParams,
    op: &OperatingPoint,
    sol: &ResetSolution,
    times: &IntervalTimes,
) -> StressReport {
    let n = p.turns_ratio;
    let rip = ripple(p, op);
    let t_sw = p.t_sw();
    let i_lm_mean = sol.i_lm_min + 0.5 * sol.delta_i_lm;
    let i_d1_off3 = -sol.i_lm_min / (1.0 + n);
    let off3 = times.t[5] - times.t[4];
    let i_dd1_mean = p.c_d * (sol.v_cd_t3 - sol.v_cd_min) * p.f_sw;
    let i_dd2_mean = p.c_d * (sol.v_cd_t3 - sol.v_cd_min) * p.f_sw;
    StressReport {
        v_ds_max: op.v_i + sol.v_cd_t3,
        v_d1_max: (1.0 + n) * sol.v_cd_t3,
        v_d2_on: (1.0 + n) * op.v_i,
        i_s_mean: op.i_l * (1.0 + n) * op.duty + i_lm_mean,
        i_d1_mean: op.i_l * op.duty + i_d1_off3 * off3 / t_sw,
        i_d2_mean: op.i_l * (1.0 - op.duty) - i_dd2_mean - i_d1_off3 * off3 / t_sw,
        i_dd1_mean,
        i_dd2_mean,
        delta_i_l: rip.delta_i_l,
        delta_i_lm: rip.delta_i_lm,
        i_l_min: rip.i_l_min,
    }
}

/// Warnings that apply to an operating point before/after solving.
pub fn operating_warnings(
    p: &ValidatedParams,
    op: &OperatingPoint,
    sol: Option<&ResetSolution>,
) -> Vec<Warning> {
    let mut out = p.warnings.clone();
    let prof = resonant_profile(p);
    if let Ok(d_max) = crate::converter::max_duty(prof.f_res, p.f_sw) {
        if op.duty > d_max {
            out.push(Warning::DutyExceedsMax {
                duty: op.duty,
                d_max,
            });
        }
    }
    let rip = ripple(p, op);
    if rip.dcm {
        out.push(Warning::DcmRisk {
            i_l_min: rip.i_l_min,
        });
    }
    if let Some(sol) = sol {
        if sol.v_cd_t2 < sol.v_cd_min {
            out.push(Warning::IncompleteReset {
                v_cd_at_turn_on: sol.v_cd_t2,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converter::{prototype_params, validate_params, ConverterParams};
    use approx::assert_relative_eq;

    fn ideal_params() -> ValidatedParams {
        // Prototype magnetics, zero leakage and losses.
        let p = ConverterParams::new(1.0, 50e3, 68e-6, 485e-6, 11e-9, 112e-6);
        validate_params(p).unwrap()
    }

    fn scenario1_op(p: &ValidatedParams) -> OperatingPoint {
        // Non-shaded mismatch point: 29.3 V in, 40.4 V out, 225 W.
        OperatingPoint::from_duty(p, 29.3, 0.689, 225.0).unwrap()
    }

    #[test]
    fn ripple_matches_case_study() {
        let p = validate_params(prototype_params()).unwrap();
        let op = scenario1_op(&p);
        let r = ripple(&p, &op);
        assert_relative_eq!(r.delta_i_l, 3.69, max_relative = 2e-3);
        assert_relative_eq!(r.delta_i_lm, 0.8325, max_relative = 1e-3);
        assert!(!r.dcm);

        let op0 = OperatingPoint::from_duty(&p, 29.3, 1e-9, 225.0);
        // Zero duty is rejected as an operating point; the formula itself
        // vanishes with duty.
        assert!(op0.is_err());
    }

    #[test]
    fn symmetric_lossless_reset() {
        let p = ideal_params();
        let op = OperatingPoint::from_duty(&p, 29.3, 0.55, 150.0).unwrap();
        let sol = solve_reset(&p, &op).unwrap();
        let d_i_lm = op.v_i * op.duty / (p.l_m * p.f_sw);
        assert_relative_eq!(sol.i_lm_min, -0.5 * d_i_lm, max_relative = 1e-9);
        assert_relative_eq!(sol.i_lm_max, 0.5 * d_i_lm, max_relative = 1e-9);
        assert!(sol.v_cd_t2.abs() < 1e-9);
        assert!(sol.v_cd_min.abs() < 1e-12);
        let v3_expect = sol.i_lm_max * (p.l_m / p.c_eq).sqrt();
        assert_relative_eq!(sol.v_cd_t3, v3_expect, max_relative = 1e-9);
        for r in sol.residuals {
            assert!(r.abs() < 1e-9, "residual {r}");
        }
    }

    #[test]
    fn prototype_reset_is_asymmetric_and_ordered() {
        let p = validate_params(prototype_params()).unwrap();
        // Stay below the duty limit of the 11 nF prototype.
        let op = OperatingPoint::from_duty(&p, 29.3, 0.5688, 225.0).unwrap();
        let sol = solve_reset(&p, &op).unwrap();
        assert!(sol.v_cd_t3 > sol.v_cd_t2);
        assert!(sol.v_cd_t2 > 0.0);
        assert!(sol.v_cd_min <= 0.0);
        assert!(sol.i_lm_min < 0.0);
        // Leakage dump makes the valley magnitude exceed the peak.
        assert!(-sol.i_lm_min > sol.i_lm_max);
        assert_relative_eq!(
            sol.i_lm_max - sol.i_lm_min,
            sol.delta_i_lm,
            max_relative = 1e-12
        );
        for r in sol.residuals {
            assert!(r.abs() < 1e-9, "residual {r}");
        }
    }

    #[test]
    fn interval_times_ordered_and_bounded() {
        let p = validate_params(prototype_params()).unwrap();
        let op = OperatingPoint::from_duty(&p, 29.3, 0.5688, 225.0).unwrap();
        let sol = solve_reset(&p, &op).unwrap();
        let times = interval_times(&p, &op, &sol).unwrap();
        let t = times.t;
        for k in 0..6 {
            assert!(t[k + 1] >= t[k], "boundaries must not decrease");
        }
        assert_relative_eq!(t[1] - t[0], op.duty * p.t_sw(), max_relative = 1e-12);
        assert_relative_eq!(t[6], p.t_sw(), max_relative = 1e-12);
        // Resonant span never exceeds the half resonance period.
        let prof = resonant_profile(&p);
        assert!(t[4] - t[2] <= 0.5 * prof.t_res * (1.0 + 1e-9));

        // Symmetric case: exactly the half period.
        let pi = ideal_params();
        let opi = OperatingPoint::from_duty(&pi, 29.3, 0.55, 150.0).unwrap();
        let soli = solve_reset(&pi, &opi).unwrap();
        let ti = interval_times(&pi, &opi, &soli).unwrap();
        let profi = resonant_profile(&pi);
        assert_relative_eq!(
            ti.t[4] - ti.t[2],
            0.5 * profi.t_res,
            max_relative = 1e-9
        );

        // Prototype-level f_res caps the resonant span at ~7.26 us.
        assert!(t[4] - t[2] <= 7.26e-6 * (1.0 + 1e-3));
    }

    #[test]
    fn excessive_duty_overlaps() {
        let p = validate_params(prototype_params()).unwrap();
        let op = OperatingPoint::from_duty(&p, 29.3, 0.9, 225.0).unwrap();
        let sol = solve_reset(&p, &op).unwrap();
        assert!(matches!(
            interval_times(&p, &op, &sol),
            Err(AfzError::IntervalOverlap { .. })
        ));
    }

    #[test]
    fn stress_identities() {
        let p = validate_params(prototype_params()).unwrap();
        let op = scenario1_op(&p);
        let sol = solve_reset(&p, &op).unwrap();
        // Use the stress relations with the published reset figures.
        let fake = ResetSolution {
            v_cd_t3: 156.33,
            ..sol.clone()
        };
        let times = IntervalTimes {
            t: [0.0; 7],
            phi2: 0.0,
        };
        let s = stresses(&p, &op, &fake, &times);
        assert_relative_eq!(s.v_ds_max, 185.63, max_relative = 1e-3);
        assert_relative_eq!(s.v_d1_max, 312.66, max_relative = 1e-3);
        assert_relative_eq!(s.v_d2_on, 58.6, max_relative = 1e-12);
    }

    #[test]
    fn duty_warning_fires_for_prototype_scenario1() {
        let p = validate_params(prototype_params()).unwrap();
        let op = scenario1_op(&p);
        let w = operating_warnings(&p, &op, None);
        assert!(w
            .iter()
            .any(|w| matches!(w, Warning::DutyExceedsMax { .. })));
    }
}
