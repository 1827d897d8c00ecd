//! Injected-current small-signal model and the three output transfer
//! functions.
//!
//! The averaged output inductor current responds to duty, input voltage
//! and output voltage through three admittance blocks, all proportional
//! to 1/(s*L); closing the loop through the load impedance
//! Z_p = R / (1 + s*C_o*R) gives second-order low-pass transfer functions
//! with natural frequency omega_o = 1/sqrt(L*C_o) and damping 1/(R*C_o).
//! None of them has a finite zero except the output impedance, whose
//! numerator is the pure differentiator s/C_o — there is no right-half
//! -plane zero anywhere, which is what makes this converter easy to
//! compensate.

use crate::converter::{OperatingPoint, ValidatedParams};
use crate::error::{AfzError, Result, Warning};
use num_complex::Complex64;
use std::f64::consts::PI;

/// The three frequency-domain blocks of the injected-current model, kept
/// as an evaluatable object so the block-diagram identity can be checked
/// against the closed forms.
#[derive(Debug, Clone, Copy)]
pub struct SmallSignalBlocks {
    pub n: f64,
    pub v_i: f64,
    pub duty: f64,
    pub l: f64,
    pub c_o: f64,
    pub r_load: f64,
}

impl SmallSignalBlocks {
    fn s(f_hz: f64) -> Complex64 {
        Complex64::new(0.0, 2.0 * PI * f_hz)
    }

    /// Duty-to-inductor-current block, (1+n)*V_i / (s*L).
    pub fn a(&self, f_hz: f64) -> Complex64 {
        Complex64::new((1.0 + self.n) * self.v_i, 0.0) / (Self::s(f_hz) * self.l)
    }

    /// Output-voltage feedback block, 1 / (s*L).
    pub fn b(&self, f_hz: f64) -> Complex64 {
        Complex64::new(1.0, 0.0) / (Self::s(f_hz) * self.l)
    }

    /// Input-voltage block, (1+n)*D / (s*L).
    pub fn c(&self, f_hz: f64) -> Complex64 {
        Complex64::new((1.0 + self.n) * self.duty, 0.0) / (Self::s(f_hz) * self.l)
    }

    /// Load impedance R || 1/(s*C_o).
    pub fn z_p(&self, f_hz: f64) -> Complex64 {
        let s = Self::s(f_hz);
        Complex64::new(self.r_load, 0.0) / (Complex64::new(1.0, 0.0) + s * self.c_o * self.r_load)
    }

    /// Closed-loop duty-to-output response straight from the block diagram.
    pub fn gvd_from_blocks(&self, f_hz: f64) -> Complex64 {
        let zp = self.z_p(f_hz);
        self.a(f_hz) * zp / (Complex64::new(1.0, 0.0) + self.b(f_hz) * zp)
    }
}

/// Numerator of a second-order rational response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Numerator {
    /// K * omega_o^2 — a pure gain, no finite zeros.
    Constant(f64),
    /// s / c — the differentiator of the output impedance.
    Differentiator(f64),
}

/// Second-order rational transfer function with the shared denominator
/// s^2 + s/(R*C_o) + omega_o^2.
#[derive(Debug, Clone, Copy)]
pub struct RationalTF {
    pub numerator: Numerator,
    /// Natural frequency 1/sqrt(L*C_o) (rad/s).
    pub omega_o: f64,
    /// Damping coefficient 1/(R_load*C_o) (1/s).
    pub damping: f64,
}

impl RationalTF {
    pub fn eval(&self, f_hz: f64) -> Complex64 {
        let s = Complex64::new(0.0, 2.0 * PI * f_hz);
        let den = s * s + s * self.damping + self.omega_o * self.omega_o;
        let num = match self.numerator {
            Numerator::Constant(k) => Complex64::new(k * self.omega_o * self.omega_o, 0.0),
            Numerator::Differentiator(inv_c) => s * inv_c,
        };
        num / den
    }

    /// Response value at s = 0.
    pub fn dc_gain(&self) -> f64 {
        match self.numerator {
            Numerator::Constant(k) => k,
            Numerator::Differentiator(_) => 0.0,
        }
    }

    /// The two poles of the shared denominator.
    pub fn poles(&self) -> (Complex64, Complex64) {
        let half = -0.5 * self.damping;
        let disc = 0.25 * self.damping * self.damping - self.omega_o * self.omega_o;
        if disc >= 0.0 {
            let r = disc.sqrt();
            (
                Complex64::new(half + r, 0.0),
                Complex64::new(half - r, 0.0),
            )
        } else {
            let w = (-disc).sqrt();
            (Complex64::new(half, w), Complex64::new(half, -w))
        }
    }
}

/// The three output-referred responses of one operating point.
#[derive(Debug, Clone, Copy)]
pub struct TransferSet {
    /// Output voltage over duty.
    pub gvd: RationalTF,
    /// Output voltage over input voltage (audio susceptibility).
    pub gvv: RationalTF,
    /// Output impedance.
    pub zo: RationalTF,
}

/// Build the blocks and the closed-form transfer functions.
pub fn build_model(p: &ValidatedParams, op: &OperatingPoint) -> (SmallSignalBlocks, TransferSet) {
    let blocks = SmallSignalBlocks {
        n: p.turns_ratio,
        v_i: op.v_i,
        duty: op.duty,
        l: p.l,
        c_o: p.c_o,
        r_load: op.r_load,
    };
    let omega_o = 1.0 / (p.l * p.c_o).sqrt();
    let damping = 1.0 / (op.r_load * p.c_o);
    let set = TransferSet {
        gvd: RationalTF {
            numerator: Numerator::Constant((1.0 + p.turns_ratio) * op.v_i),
            omega_o,
            damping,
        },
        gvv: RationalTF {
            numerator: Numerator::Constant((1.0 + p.turns_ratio) * op.duty),
            omega_o,
            damping,
        },
        zo: RationalTF {
            numerator: Numerator::Differentiator(1.0 / p.c_o),
            omega_o,
            damping,
        },
    };
    (blocks, set)
}

/// One evaluated frequency-response point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodePoint {
    pub freq_hz: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

/// Evaluate magnitude/phase over a frequency grid; the phase is unwrapped
/// into a continuous trace.
pub fn bode(tf: &RationalTF, freqs: &[f64]) -> Vec<BodePoint> {
    let mut out = Vec::with_capacity(freqs.len());
    let mut prev_phase: Option<f64> = None;
    for &f in freqs {
        let h = tf.eval(f);
        let mag_db = 20.0 * h.norm().log10();
        let mut phase = h.arg().to_degrees();
        if let Some(prev) = prev_phase {
            while phase - prev > 180.0 {
                phase -= 360.0;
            }
            while phase - prev < -180.0 {
                phase += 360.0;
            }
        }
        prev_phase = Some(phase);
        out.push(BodePoint {
            freq_hz: f,
            mag_db,
            phase_deg: phase,
        });
    }
    out
}

/// Log-spaced grid helper.
pub fn log_grid(f_min: f64, f_max: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![f_min];
    }
    let (a, b) = (f_min.ln(), f_max.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Per-frequency deviation between the analytical response and a measured
/// (simulated) one.
#[derive(Debug, Clone)]
pub struct DeviationReport {
    pub rows: Vec<DeviationRow>,
    /// Largest magnitude deviation over the gated band f <= f_sw/4 (dB).
    pub max_mag_db: f64,
    /// Largest phase deviation over the gated band (degrees).
    pub max_phase_deg: f64,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, Copy)]
pub struct DeviationRow {
    pub freq_hz: f64,
    pub mag_db: f64,
    pub sim_mag_db: f64,
    pub phase_deg: f64,
    pub sim_phase_deg: f64,
    pub delta_mag_db: f64,
    pub delta_phase_deg: f64,
    /// False above f_sw/4: reported but not gated.
    pub gated: bool,
}

/// Compare analytical and simulated Bode data on the same grid.
///
/// Points above f_sw/2 are dropped (simulation data is meaningless there),
/// points in (f_sw/4, f_sw/2] are reported informationally, and the
/// headline maxima cover only f <= f_sw/4.
pub fn compare_with_simulation(
    analytical: &[BodePoint],
    measured: &[BodePoint],
    f_sw: f64,
) -> Result<DeviationReport> {
    if analytical.len() != measured.len() {
        return Err(AfzError::FrequencyMismatch);
    }
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut max_mag: f64 = 0.0;
    let mut max_phase: f64 = 0.0;
    for (a, m) in analytical.iter().zip(measured) {
        if (a.freq_hz - m.freq_hz).abs() > 1e-9 * a.freq_hz.max(1.0) {
            return Err(AfzError::FrequencyMismatch);
        }
        if a.freq_hz > 0.5 * f_sw {
            warnings.push(Warning::Alias { freq_hz: a.freq_hz });
            continue;
        }
        let gated = a.freq_hz <= 0.25 * f_sw + 1e-9;
        if !gated {
            warnings.push(Warning::Alias { freq_hz: a.freq_hz });
        }
        let dm = (a.mag_db - m.mag_db).abs();
        // Compare phases on the circle.
        let mut dp = (a.phase_deg - m.phase_deg) % 360.0;
        if dp > 180.0 {
            dp -= 360.0;
        }
        if dp < -180.0 {
            dp += 360.0;
        }
        let dp = dp.abs();
        if gated {
            max_mag = max_mag.max(dm);
            max_phase = max_phase.max(dp);
        }
        rows.push(DeviationRow {
            freq_hz: a.freq_hz,
            mag_db: a.mag_db,
            sim_mag_db: m.mag_db,
            phase_deg: a.phase_deg,
            sim_phase_deg: m.phase_deg,
            delta_mag_db: dm,
            delta_phase_deg: dp,
            gated,
        });
    }
    Ok(DeviationReport {
        rows,
        max_mag_db: max_mag,
        max_phase_deg: max_phase,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converter::{validate_params, ConverterParams, OperatingPoint};
    use approx::assert_relative_eq;

    /// Table-V-style operating point: 29.3 V in, duty 0.689, 7.255 ohm load.
    fn table_v() -> (ValidatedParams, OperatingPoint) {
        let p = validate_params(ConverterParams::new(1.0, 50e3, 68e-6, 485e-6, 5.2e-9, 112e-6))
            .unwrap();
        let v_o = (1.0 + 1.0) * 0.689 * 29.3;
        let p_o = v_o * v_o / 7.255;
        let op = OperatingPoint::from_duty(&p, 29.3, 0.689, p_o).unwrap();
        (p, op)
    }

    #[test]
    fn dc_gains() {
        let (p, op) = table_v();
        let (_, tf) = build_model(&p, &op);
        assert_relative_eq!(tf.gvd.dc_gain(), 58.6, max_relative = 1e-12);
        assert_relative_eq!(
            20.0 * tf.gvd.dc_gain().log10(),
            35.36,
            max_relative = 1e-3
        );
        assert_relative_eq!(tf.gvv.dc_gain(), 1.378, max_relative = 1e-3);
        assert_eq!(tf.zo.dc_gain(), 0.0);
        // Natural frequency of the output filter.
        assert_relative_eq!(tf.gvd.omega_o, 11459.0, max_relative = 1e-3);
        assert_relative_eq!(tf.gvd.omega_o / (2.0 * PI), 1823.7, max_relative = 1e-3);
    }

    #[test]
    fn degenerate_turns_ratio_reduces_to_forward() {
        let p = validate_params(ConverterParams::new(
            1e-9, 50e3, 68e-6, 485e-6, 5.2e-9, 112e-6,
        ))
        .unwrap();
        let op = OperatingPoint::from_duty(&p, 29.3, 0.45, 50.0).unwrap();
        let (_, tf) = build_model(&p, &op);
        assert_relative_eq!(tf.gvd.dc_gain(), 29.3, max_relative = 1e-6);
    }

    #[test]
    fn bode_asymptotes() {
        let (p, op) = table_v();
        let (_, tf) = build_model(&p, &op);
        let f_o = tf.gvd.omega_o / (2.0 * PI);
        let pts = bode(&tf.gvd, &log_grid(0.1, 100.0 * f_o, 400));
        assert!(pts[0].phase_deg.abs() < 0.1);
        assert!(pts.last().unwrap().phase_deg < -175.0);
        // Roll-off slope between 5 f_o and 50 f_o: -40 dB/decade +- 2.
        let at = |f: f64| {
            let h = tf.gvd.eval(f);
            20.0 * h.norm().log10()
        };
        let slope = (at(50.0 * f_o) - at(5.0 * f_o)) / (50.0f64 / 5.0).log10();
        assert!((slope + 40.0).abs() < 2.0, "slope {slope}");
    }

    #[test]
    fn zo_peaks_at_r_load_on_resonance() {
        let (p, op) = table_v();
        let (_, tf) = build_model(&p, &op);
        let f_o = tf.zo.omega_o / (2.0 * PI);
        let h = tf.zo.eval(f_o);
        assert_relative_eq!(h.norm(), op.r_load, max_relative = 1e-9);
        // Low-frequency output impedance tends to zero with +90 deg phase.
        let low = tf.zo.eval(1.0);
        assert!(low.norm() < 1e-2);
        assert_relative_eq!(low.arg().to_degrees(), 90.0, epsilon = 1.0);
    }

    #[test]
    fn block_diagram_identity() {
        let (p, op) = table_v();
        let (blocks, tf) = build_model(&p, &op);
        let mut f = 0.7;
        for _ in 0..100 {
            f *= 1.13;
            let lhs = tf.gvd.eval(f);
            let rhs = blocks.gvd_from_blocks(f);
            assert!(
                (lhs - rhs).norm() <= 1e-9 * rhs.norm(),
                "mismatch at {f} Hz"
            );
        }
    }

    #[test]
    fn gvv_is_gvd_scaled() {
        let (p, op) = table_v();
        let (_, tf) = build_model(&p, &op);
        for f in [1.0, 10.0, 123.0, 1.8e3, 9.7e3] {
            let lhs = tf.gvv.eval(f);
            let rhs = tf.gvd.eval(f) * (op.duty / op.v_i);
            assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm());
        }
    }

    #[test]
    fn comparison_of_identical_inputs_is_zero() {
        let (p, op) = table_v();
        let (_, tf) = build_model(&p, &op);
        let grid = log_grid(10.0, 12.5e3, 10);
        let a = bode(&tf.gvd, &grid);
        let rep = compare_with_simulation(&a, &a, p.f_sw).unwrap();
        assert_eq!(rep.max_mag_db, 0.0);
        assert_eq!(rep.max_phase_deg, 0.0);
        assert!(rep.rows.iter().all(|r| r.gated));
    }

    #[test]
    fn out_of_band_points_flagged_and_dropped() {
        let (p, op) = table_v();
        let (_, tf) = build_model(&p, &op);
        let grid = vec![1e3, 20e3, 30e3];
        let a = bode(&tf.gvd, &grid);
        let rep = compare_with_simulation(&a, &a, p.f_sw).unwrap();
        // 30 kHz > f_sw/2 dropped entirely; 20 kHz kept but ungated.
        assert_eq!(rep.rows.len(), 2);
        assert!(!rep.rows[1].gated);
        assert_eq!(rep.warnings.len(), 2);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn poles_strictly_stable(
                l in 1e-6..1e-2f64,
                c in 1e-7..1e-2f64,
                r in 0.1..1e3f64,
            ) {
                let tf = RationalTF {
                    numerator: Numerator::Constant(1.0),
                    omega_o: 1.0 / (l * c).sqrt(),
                    damping: 1.0 / (r * c),
                };
                let (p1, p2) = tf.poles();
                prop_assert!(p1.re < 0.0 && p2.re < 0.0);
            }

            #[test]
            fn phase_stays_in_lower_half(
                l in 1e-6..1e-3f64,
                c in 1e-6..1e-3f64,
                r in 0.5..500.0f64,
                k in 0.1..300.0f64,
            ) {
                let tf = RationalTF {
                    numerator: Numerator::Constant(k),
                    omega_o: 1.0 / (l * c).sqrt(),
                    damping: 1.0 / (r * c),
                };
                let f_o = tf.omega_o / (2.0 * PI);
                let pts = bode(&tf, &log_grid(1.0, 10.0 * f_o, 64));
                for pt in pts {
                    prop_assert!(pt.phase_deg <= 1e-9 && pt.phase_deg > -180.0);
                }
            }
        }
    }
}
