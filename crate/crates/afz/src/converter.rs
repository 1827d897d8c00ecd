//! Converter parameters, operating points, and the closed-form static
//! relations of the AFZ topology.
//!
//! The voltage transfer in continuous conduction is
//! `V_o = (1 + n) * D * V_i`: a forward-type characteristic with the
//! autotransformer ratio folded in. Everything else in this module is a
//! direct algebraic consequence of the element values: resonant reset
//! frequencies, the duty limit imposed by the reset half-period, the
//! resonant-capacitor upper bound, and the magnetic/direct power split.

use crate::error::{AfzError, Result, Warning};
use std::f64::consts::PI;

/// Raw component values of one AFZ converter. All fields in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct ConverterParams {
    /// Autotransformer turns ratio n = N2/N1 (dimensionless).
    pub turns_ratio: f64,
    /// Switching frequency (Hz).
    pub f_sw: f64,
    /// Output filter inductance (H).
    pub l: f64,
    /// Magnetizing inductance (H).
    pub l_m: f64,
    /// Primary-side leakage inductance (H). May be zero.
    pub l_kpri: f64,
    /// Secondary-side leakage inductance (H). May be zero.
    pub l_ksec: f64,
    /// Resonant reset capacitance (F).
    pub c_d: f64,
    /// Switch output capacitance (F). May be zero.
    pub c_oss: f64,
    /// Output filter capacitance (F).
    pub c_o: f64,
    /// Switch on-resistance (ohm), conduction-loss model only.
    pub r_dson: f64,
    /// Forward drop of D1 (V), conduction-loss model only.
    pub v_f1: f64,
    /// Forward drop of D2 (V), conduction-loss model only.
    pub v_f2: f64,
    /// Forward drop of Dd1/Dd2 (V), conduction-loss model only.
    pub v_fd: f64,
    /// Primary winding DC resistance (ohm).
    pub r_pri: f64,
    /// Secondary winding DC resistance (ohm).
    pub r_sec: f64,
    /// Output inductor DC resistance (ohm).
    pub r_l_dc: f64,
}

impl ConverterParams {
    /// Parameters with every optional (loss / parasitic) entry zeroed.
    pub fn new(n: f64, f_sw: f64, l: f64, l_m: f64, c_d: f64, c_o: f64) -> Self {
        ConverterParams {
            turns_ratio: n,
            f_sw,
            l,
            l_m,
            l_kpri: 0.0,
            l_ksec: 0.0,
            c_d,
            c_oss: 0.0,
            c_o,
            r_dson: 0.0,
            v_f1: 0.0,
            v_f2: 0.0,
            v_fd: 0.0,
            r_pri: 0.0,
            r_sec: 0.0,
            r_l_dc: 0.0,
        }
    }

    /// Set total leakage referred to the primary, split half/half between
    /// the windings (the secondary share scaled by (1+n)^2).
    pub fn with_total_leakage(mut self, l_k: f64) -> Self {
        let half = 0.5 * l_k;
        self.l_kpri = half;
        self.l_ksec = half * (1.0 + self.turns_ratio) * (1.0 + self.turns_ratio);
        self
    }
}

/// Component set of the 225 W laboratory prototype.
pub fn prototype_params() -> ConverterParams {
    let mut p = ConverterParams::new(1.0, 50e3, 68e-6, 485e-6, 11e-9, 112e-6)
        .with_total_leakage(820e-9);
    p.r_dson = 9.6e-3;
    p.v_f1 = 1.1;
    p.v_f2 = 0.3;
    p.v_fd = 1.0;
    p.r_pri = 15.5e-3;
    p.r_sec = 18.3e-3;
    p.r_l_dc = 30.6e-3;
    p
}

/// Parameters that passed validation, with derived quantities attached.
#[derive(Debug, Clone)]
pub struct ValidatedParams {
    raw: ConverterParams,
    /// Total reset capacitance C_d + C_oss (F).
    pub c_eq: f64,
    /// Total leakage referred to the primary: L_kpri + L_ksec/(1+n)^2 (H).
    pub l_k: f64,
    /// Validation warnings (approximation strain), if any.
    pub warnings: Vec<Warning>,
}

impl std::ops::Deref for ValidatedParams {
    type Target = ConverterParams;
    fn deref(&self) -> &ConverterParams {
        &self.raw
    }
}

impl ValidatedParams {
    /// Switching period (s).
    pub fn t_sw(&self) -> f64 {
        1.0 / self.raw.f_sw
    }

    /// Total leakage referred to the secondary side, (1+n)^2 * L_k (H).
    /// This is the inductance that governs the commutation of the output
    /// rectifier current at the gate edges.
    pub fn l_k_secondary(&self) -> f64 {
        let m = 1.0 + self.raw.turns_ratio;
        self.l_k * m * m
    }
}

fn require_positive(field: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(AfzError::NonPositiveValue { field, value });
    }
    Ok(())
}

fn require_non_negative(field: &'static str, value: f64) -> Result<()> {
    if value < 0.0 || !value.is_finite() {
        return Err(AfzError::NegativeValue { field, value });
    }
    Ok(())
}

/// Validate a parameter set and attach derived quantities.
///
/// Rejects non-positive core values. Leakages, C_oss, and all loss
/// parameters may be zero. Emits `ApproximationViolated` warnings when
/// L_k > L_m/10 or C_oss > C_d/10; the closed-form reset analysis assumes
/// both parasitics are small against the main resonant pair.
pub fn validate_params(p: ConverterParams) -> Result<ValidatedParams> {
    require_positive("n", p.turns_ratio)?;
    require_positive("f_sw", p.f_sw)?;
    require_positive("l", p.l)?;
    require_positive("l_m", p.l_m)?;
    require_positive("c_d", p.c_d)?;
    require_positive("c_o", p.c_o)?;
    require_non_negative("l_kpri", p.l_kpri)?;
    require_non_negative("l_ksec", p.l_ksec)?;
    require_non_negative("c_oss", p.c_oss)?;
    require_non_negative("r_dson", p.r_dson)?;
    require_non_negative("v_f1", p.v_f1)?;
    require_non_negative("v_f2", p.v_f2)?;
    require_non_negative("v_fd", p.v_fd)?;
    require_non_negative("r_pri", p.r_pri)?;
    require_non_negative("r_sec", p.r_sec)?;
    require_non_negative("r_l_dc", p.r_l_dc)?;

    let m = 1.0 + p.turns_ratio;
    let l_k = p.l_kpri + p.l_ksec / (m * m);
    let c_eq = p.c_d + p.c_oss;

    let mut warnings = Vec::new();
    if l_k > p.l_m / 10.0 {
        warnings.push(Warning::ApproximationViolated {
            what: format!(
                "L_k = {:.3e} H exceeds L_m/10 = {:.3e} H",
                l_k,
                p.l_m / 10.0
            ),
        });
    }
    if p.c_oss > p.c_d / 10.0 {
        warnings.push(Warning::ApproximationViolated {
            what: format!(
                "C_oss = {:.3e} F exceeds C_d/10 = {:.3e} F",
                p.c_oss,
                p.c_d / 10.0
            ),
        });
    }

    Ok(ValidatedParams {
        raw: p,
        c_eq,
        l_k,
        warnings,
    })
}

/// Electrical boundary conditions for one analysis.
#[derive(Debug, Clone, Copy)]
pub struct OperatingPoint {
    /// Input voltage (V).
    pub v_i: f64,
    /// Duty cycle.
    pub duty: f64,
    /// Output power (W).
    pub p_o: f64,
    /// Output voltage (V), = (1+n) * D * V_i.
    pub v_o: f64,
    /// Output inductor (= string) current (A), = P_o / V_o.
    pub i_l: f64,
    /// Equivalent load resistance (ohm), = V_o^2 / P_o.
    pub r_load: f64,
}

impl OperatingPoint {
    /// Build from input voltage, duty and output power.
    pub fn from_duty(p: &ValidatedParams, v_i: f64, duty: f64, p_o: f64) -> Result<Self> {
        require_positive("v_i", v_i)?;
        require_positive("p_o", p_o)?;
        if !(duty > 0.0 && duty < 1.0) {
            return Err(AfzError::DutyOutOfRange { duty, limit: 1.0 });
        }
        let v_o = voltage_transfer(v_i, p.turns_ratio, duty)?;
        Ok(OperatingPoint {
            v_i,
            duty,
            p_o,
            v_o,
            i_l: p_o / v_o,
            r_load: v_o * v_o / p_o,
        })
    }

    /// Build from input/output voltages and output power; the duty follows
    /// from inverting the voltage transfer.
    pub fn from_target_voltage(
        p: &ValidatedParams,
        v_i: f64,
        v_o: f64,
        p_o: f64,
    ) -> Result<Self> {
        let duty = duty_for_target(v_i, v_o, p.turns_ratio, 1.0)?;
        Self::from_duty(p, v_i, duty, p_o)
    }
}

/// Output voltage for a given input voltage, turns ratio and duty.
pub fn voltage_transfer(v_i: f64, n: f64, duty: f64) -> Result<f64> {
    if !(v_i > 0.0) {
        return Err(AfzError::NonPositiveValue {
            field: "v_i",
            value: v_i,
        });
    }
    if !(n > 0.0) {
        return Err(AfzError::NonPositiveValue {
            field: "n",
            value: n,
        });
    }
    if !(0.0..1.0).contains(&duty) {
        return Err(AfzError::DutyOutOfRange {
            duty,
            limit: 1.0,
        });
    }
    Ok((1.0 + n) * duty * v_i)
}

/// Duty required to reach `v_o` from `v_i`, or `DutyOutOfRange` if the
/// target is unreachable within `(0, d_limit)`.
pub fn duty_for_target(v_i: f64, v_o: f64, n: f64, d_limit: f64) -> Result<f64> {
    require_positive("v_i", v_i)?;
    require_positive("v_o", v_o)?;
    require_positive("n", n)?;
    let duty = v_o / ((1.0 + n) * v_i);
    if duty <= 0.0 || duty >= d_limit {
        return Err(AfzError::DutyOutOfRange {
            duty,
            limit: d_limit,
        });
    }
    Ok(duty)
}

/// Resonance data of the reset network.
#[derive(Debug, Clone, Copy)]
pub struct ResonantProfile {
    /// C_d + C_oss (F).
    pub c_eq: f64,
    /// Total leakage referred to the primary (H).
    pub l_k: f64,
    /// Reset resonant frequency from (L_m + L_kpri)*(C_d + C_oss) (Hz).
    pub f_res: f64,
    /// Simplified reset frequency 1/(2*pi*sqrt(L_m*C_d)) (Hz), for reporting.
    pub f_res_simple: f64,
    /// Leakage resonant frequency from L_k*(C_d + C_oss) (Hz).
    pub f_resk: f64,
    /// 2*pi*f_res (rad/s).
    pub omega0: f64,
    /// 2*pi*f_resk (rad/s).
    pub omega0k: f64,
    /// Reset resonance period 1/f_res (s).
    pub t_res: f64,
}

/// Compute the resonant frequencies of a validated parameter set.
pub fn resonant_profile(p: &ValidatedParams) -> ResonantProfile {
    let f_res = 1.0 / (2.0 * PI * ((p.l_m + p.l_kpri) * p.c_eq).sqrt());
    let f_res_simple = 1.0 / (2.0 * PI * (p.l_m * p.c_d).sqrt());
    // With zero leakage the commutation is instantaneous; report f_resk = inf.
    let f_resk = if p.l_k > 0.0 {
        1.0 / (2.0 * PI * (p.l_k * p.c_eq).sqrt())
    } else {
        f64::INFINITY
    };
    ResonantProfile {
        c_eq: p.c_eq,
        l_k: p.l_k,
        f_res,
        f_res_simple,
        f_resk,
        omega0: 2.0 * PI * f_res,
        omega0k: 2.0 * PI * f_resk,
        t_res: 1.0 / f_res,
    }
}

/// Maximum duty cycle for which the reset half-period still fits inside the
/// off time: D_max = (2*f_res - f_sw) / (2*f_res).
pub fn max_duty(f_res: f64, f_sw: f64) -> Result<f64> {
    require_positive("f_sw", f_sw)?;
    if !(f_res > f_sw / 2.0) {
        return Err(AfzError::ResetImpossible {
            f_res,
            half_fsw: f_sw / 2.0,
        });
    }
    Ok((2.0 * f_res - f_sw) / (2.0 * f_res))
}

/// Largest resonant capacitance that still allows operating at `d_max`:
/// C_d <= (1 - D_max)^2 / ((pi*f_sw)^2 * L_m).
pub fn cd_upper_bound(d_max: f64, f_sw: f64, l_m: f64) -> Result<f64> {
    if !(d_max > 0.0 && d_max < 1.0) {
        return Err(AfzError::DutyOutOfRange {
            duty: d_max,
            limit: 1.0,
        });
    }
    require_positive("f_sw", f_sw)?;
    require_positive("l_m", l_m)?;
    let one_minus = 1.0 - d_max;
    Ok(one_minus * one_minus / ((PI * f_sw) * (PI * f_sw) * l_m))
}

/// How much of the input power passes through the core versus the direct
/// electrical connection.
#[derive(Debug, Clone, Copy)]
pub struct PowerSplit {
    /// Magnetically processed power (W).
    pub p_mag: f64,
    /// Directly transferred power (W).
    pub p_no_mag: f64,
    /// p_mag / p_i, in [0, 1].
    pub mag_ratio: f64,
    /// p_no_mag / p_i, in [0, 1].
    pub no_mag_ratio: f64,
}

/// Split the processed power: the core carries n/(1+n) of it, the
/// autotransformer connection passes the remaining 1/(1+n) straight through.
pub fn power_split(p_i: f64, n: f64) -> Result<PowerSplit> {
    require_non_negative("p_i", p_i)?;
    require_positive("n", n)?;
    let mag_ratio = n / (1.0 + n);
    let no_mag_ratio = 1.0 / (1.0 + n);
    Ok(PowerSplit {
        p_mag: p_i * mag_ratio,
        p_no_mag: p_i * no_mag_ratio,
        mag_ratio,
        no_mag_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn prototype_values_accepted() {
        let v = validate_params(prototype_params()).unwrap();
        assert_relative_eq!(v.c_eq, 11e-9, max_relative = 1e-12);
        assert_relative_eq!(v.l_k, 820e-9, max_relative = 1e-12);
        assert!(v.warnings.is_empty());
    }

    #[test]
    fn zero_magnetizing_rejected() {
        let mut p = prototype_params();
        p.l_m = 0.0;
        let err = validate_params(p).unwrap_err();
        assert!(matches!(
            err,
            AfzError::NonPositiveValue { field: "l_m", .. }
        ));
    }

    #[test]
    fn oversized_leakage_warns_but_passes() {
        let mut p = prototype_params();
        p.l_kpri = 200e-6;
        p.l_ksec = 0.0;
        let v = validate_params(p).unwrap();
        assert_eq!(v.warnings.len(), 1);
        assert!(matches!(
            v.warnings[0],
            Warning::ApproximationViolated { .. }
        ));
    }

    #[test]
    fn transfer_matches_case_study() {
        // Scenario-1 non-shaded point: duty quoted to three digits.
        let v_o = voltage_transfer(29.3, 1.0, 0.689).unwrap();
        assert_relative_eq!(v_o, 40.3754, max_relative = 1e-4);
        assert!((v_o - 40.404).abs() < 0.05);
        assert_eq!(voltage_transfer(17.0, 2.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            voltage_transfer(10.0, 0.5, 0.5).unwrap(),
            7.5,
            max_relative = 1e-14
        );
    }

    #[test]
    fn duty_inversion() {
        assert_relative_eq!(
            duty_for_target(29.3, 40.404, 1.0, 1.0).unwrap(),
            0.68949,
            max_relative = 1e-4
        );
        assert_relative_eq!(
            duty_for_target(15.0, 12.121, 1.0, 1.0).unwrap(),
            0.40403,
            max_relative = 1e-4
        );
        let err = duty_for_target(10.0, 30.0, 1.0, 0.75).unwrap_err();
        match err {
            AfzError::DutyOutOfRange { duty, limit } => {
                assert_relative_eq!(duty, 1.5, max_relative = 1e-12);
                assert_relative_eq!(limit, 0.75, max_relative = 1e-12);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn resonant_frequencies() {
        let mut p = ConverterParams::new(1.0, 50e3, 68e-6, 485e-6, 11e-9, 112e-6);
        p.l_kpri = 0.0;
        p.l_ksec = 0.0;
        let v = validate_params(p).unwrap();
        let prof = resonant_profile(&v);
        assert_relative_eq!(prof.f_res, 68.9e3, max_relative = 2e-3);
        assert_relative_eq!(prof.f_res, prof.f_res_simple, max_relative = 1e-12);

        // Leakage resonance with the prototype's total 820 nH.
        let v2 = validate_params(
            ConverterParams::new(1.0, 50e3, 68e-6, 485e-6, 11e-9, 112e-6)
                .with_total_leakage(820e-9),
        )
        .unwrap();
        let prof2 = resonant_profile(&v2);
        assert_relative_eq!(prof2.f_resk, 1.676e6, max_relative = 2e-3);

        // Doubling C_d scales f_res by 1/sqrt(2).
        let mut p3 = ConverterParams::new(1.0, 50e3, 68e-6, 485e-6, 22e-9, 112e-6);
        p3.l_kpri = 0.0;
        let prof3 = resonant_profile(&validate_params(p3).unwrap());
        assert_relative_eq!(
            prof3.f_res,
            prof.f_res / 2.0_f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn duty_limit() {
        assert_relative_eq!(max_duty(68.9e3, 50e3).unwrap(), 0.6371, max_relative = 1e-3);
        assert_relative_eq!(max_duty(1e12, 50e3).unwrap(), 1.0, max_relative = 1e-6);
        assert!(matches!(
            max_duty(25e3, 50e3),
            Err(AfzError::ResetImpossible { .. })
        ));
    }

    #[test]
    fn cd_bound_and_round_trip() {
        let c = cd_upper_bound(0.75, 50e3, 485e-6).unwrap();
        assert_relative_eq!(c, 5.22e-9, max_relative = 1e-2);
        assert!(cd_upper_bound(1.0, 50e3, 485e-6).is_err());

        // Choosing C_d at the bound reproduces D_max through the simplified
        // resonance, to machine precision.
        for d_max in [0.3, 0.5, 0.637, 0.75, 0.9] {
            let c_d = cd_upper_bound(d_max, 50e3, 485e-6).unwrap();
            let f_res = 1.0 / (2.0 * PI * (485e-6 * c_d).sqrt());
            let back = max_duty(f_res, 50e3).unwrap();
            assert_relative_eq!(back, d_max, max_relative = 1e-9);
        }
    }

    #[test]
    fn power_split_table() {
        // (n, p_mag %, p_no_mag %); tolerance is three significant digits
        // (the n = 0.1 magnetic share is quoted as 9.10 after its
        // complement was rounded first).
        let rows = [
            (0.1, 9.10, 90.9),
            (0.5, 33.3, 66.7),
            (1.0, 50.0, 50.0),
            (1.5, 60.0, 40.0),
            (2.0, 66.7, 33.3),
        ];
        for (n, mag_pct, no_mag_pct) in rows {
            let s = power_split(100.0, n).unwrap();
            assert_relative_eq!(s.p_mag, mag_pct, max_relative = 5e-3);
            assert_relative_eq!(s.p_no_mag, no_mag_pct, max_relative = 5e-3);
        }
        // n -> 0 limit: nothing magnetically processed.
        let s = power_split(100.0, 1e-12).unwrap();
        assert!(s.p_mag < 1e-9);
        assert_relative_eq!(s.p_no_mag, 100.0, max_relative = 1e-9);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn transfer_linear_in_vi_and_duty(
                v_i in 1.0..200.0f64,
                n in 0.05..5.0f64,
                d in 0.01..0.95f64,
            ) {
                let base = voltage_transfer(v_i, n, d).unwrap();
                let doubled = voltage_transfer(2.0 * v_i, n, d).unwrap();
                prop_assert!((doubled - 2.0 * base).abs() <= 1e-12 * doubled.abs());
            }

            #[test]
            fn duty_round_trip(
                v_i in 1.0..200.0f64,
                n in 0.05..5.0f64,
                d in 0.01..0.95f64,
            ) {
                let v_o = voltage_transfer(v_i, n, d).unwrap();
                let back = duty_for_target(v_i, v_o, n, 1.0).unwrap();
                prop_assert!((back - d).abs() <= 1e-12 * d);
            }

            #[test]
            fn power_split_conserves(
                p_i in 0.0..1e6f64,
                n in 0.01..10.0f64,
            ) {
                let s = power_split(p_i, n).unwrap();
                let sum = s.p_mag + s.p_no_mag;
                prop_assert!((sum - p_i).abs() <= 1e-12 * p_i.max(1.0));
                prop_assert!(s.mag_ratio >= 0.0 && s.mag_ratio <= 1.0);
            }
        }
    }
}
