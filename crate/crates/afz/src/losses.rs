//! Conduction-loss lower bound.
//!
//! Sums RMS^2 * R over the resistive elements and mean|i| * V_f over the
//! diodes, from the synthesized waveform statistics. Switching and core
//! losses are not modeled, so the resulting efficiency is an upper bound
//! on what the hardware can do.

use crate::converter::{OperatingPoint, ValidatedParams};
use crate::error::{AfzError, Result};
use crate::waveform::{stats_over, WaveformSet};

#[derive(Debug, Clone)]
pub struct LossReport {
    /// Total conduction loss (W).
    pub p_loss: f64,
    /// P_o / (P_o + P_loss); upper bound on converter efficiency.
    pub eta_cond: f64,
    /// (element, watts) pairs, emission order fixed.
    pub breakdown: Vec<(&'static str, f64)>,
}

fn loss_param_fields(p: &ValidatedParams) -> Vec<&'static str> {
    let mut missing = Vec::new();
    if p.r_dson == 0.0 {
        missing.push("r_dson");
    }
    if p.r_pri == 0.0 {
        missing.push("r_pri");
    }
    if p.r_sec == 0.0 {
        missing.push("r_sec");
    }
    if p.r_l_dc == 0.0 {
        missing.push("r_l_dc");
    }
    if p.v_f1 == 0.0 {
        missing.push("v_f1");
    }
    if p.v_f2 == 0.0 {
        missing.push("v_f2");
    }
    if p.v_fd == 0.0 {
        missing.push("v_fd");
    }
    missing
}

/// Conduction-loss estimate from waveform statistics.
///
/// With `strict` set, zero-valued loss parameters are reported as missing
/// instead of silently producing an optimistic bound; `analyze` runs
/// non-strict so an ideal study still prints eta = 1.
pub fn estimate_conduction_losses(
    p: &ValidatedParams,
    op: &OperatingPoint,
    wf: &WaveformSet,
    strict: bool,
) -> Result<LossReport> {
    if strict {
        let missing = loss_param_fields(p);
        if !missing.is_empty() {
            return Err(AfzError::MissingLossParams {
                fields: missing.join(", "),
            });
        }
    }

    let n = p.turns_ratio;
    let i_l = wf.stats("i_l").expect("channel");
    let i_s = wf.stats("i_s").expect("channel");
    let i_d1 = wf.channel("i_d1").expect("channel");
    let i_d2 = wf.channel("i_d2").expect("channel");
    let i_dd1 = wf.channel("i_dd1").expect("channel");
    let i_dd2 = wf.channel("i_dd2").expect("channel");
    let i_lm = wf.channel("i_lm").expect("channel");

    // Winding copper carries the magnetizing current plus the coupled share
    // of the rectifier current.
    let common: Vec<f64> = i_lm
        .iter()
        .zip(i_d1)
        .map(|(lm, d1)| lm + n * d1)
        .collect();
    let common_stats = stats_over(&wf.time, &common);
    let d1 = stats_over_abs(wf, i_d1);
    let d2 = stats_over_abs(wf, i_d2);
    let dd1 = stats_over_abs(wf, i_dd1);
    let dd2 = stats_over_abs(wf, i_dd2);
    let sec_stats = wf.stats("i_d1").expect("channel");

    let breakdown = vec![
        ("switch r_dson", i_s.rms * i_s.rms * p.r_dson),
        ("primary winding", common_stats.rms * common_stats.rms * p.r_pri),
        ("secondary winding", sec_stats.rms * sec_stats.rms * p.r_sec),
        ("output inductor", i_l.rms * i_l.rms * p.r_l_dc),
        ("diode d1", d1 * p.v_f1),
        ("diode d2", d2 * p.v_f2),
        ("steering diodes", (dd1 + dd2) * p.v_fd),
    ];
    let p_loss: f64 = breakdown.iter().map(|(_, w)| w).sum();
    Ok(LossReport {
        p_loss,
        eta_cond: op.p_o / (op.p_o + p_loss),
        breakdown,
    })
}

fn stats_over_abs(wf: &WaveformSet, data: &[f64]) -> f64 {
    let absd: Vec<f64> = data.iter().map(|v| v.abs()).collect();
    stats_over(&wf.time, &absd).mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converter::{prototype_params, validate_params, ConverterParams, OperatingPoint};
    use crate::reset::{interval_times, solve_reset};
    use crate::waveform::synthesize_waveforms;

    fn losses_for(p: crate::converter::ConverterParams, strict: bool) -> Result<LossReport> {
        let v = validate_params(p).unwrap();
        // Nominal full-power step-up point of the case study.
        let op = OperatingPoint::from_target_voltage(&v, 29.3, 100.0 / 3.0, 225.0).unwrap();
        let sol = solve_reset(&v, &op).unwrap();
        let times = interval_times(&v, &op, &sol).unwrap();
        let wf = synthesize_waveforms(&v, &op, &sol, &times, 2048);
        estimate_conduction_losses(&v, &op, &wf, strict)
    }

    #[test]
    fn lossless_params_give_unity() {
        let p = ConverterParams::new(1.0, 50e3, 68e-6, 485e-6, 11e-9, 112e-6)
            .with_total_leakage(820e-9);
        let r = losses_for(p, false).unwrap();
        assert_eq!(r.p_loss, 0.0);
        assert_eq!(r.eta_cond, 1.0);
    }

    #[test]
    fn strict_mode_reports_missing_fields() {
        let p = ConverterParams::new(1.0, 50e3, 68e-6, 485e-6, 11e-9, 112e-6);
        match losses_for(p, true) {
            Err(AfzError::MissingLossParams { fields }) => {
                assert!(fields.contains("r_dson"));
                assert!(fields.contains("v_fd"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn prototype_bound_exceeds_measured_efficiency() {
        let r = losses_for(prototype_params(), true).unwrap();
        assert!(
            r.eta_cond >= 0.939 && r.eta_cond < 1.0,
            "eta_cond = {}",
            r.eta_cond
        );
    }

    #[test]
    fn doubling_resistances_lowers_the_bound() {
        let base = losses_for(prototype_params(), true).unwrap();
        let mut p = prototype_params();
        p.r_dson *= 2.0;
        p.r_pri *= 2.0;
        p.r_sec *= 2.0;
        p.r_l_dc *= 2.0;
        let doubled = losses_for(p, true).unwrap();
        assert!(doubled.eta_cond < base.eta_cond);
    }
}
