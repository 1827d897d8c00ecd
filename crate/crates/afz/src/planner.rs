//! Plant-level design machinery: string-configuration enumeration, shading
//! scenario operating points, and converter specification envelopes.
//!
//! The central inverter holds the string voltage fixed, so every converter
//! in a string shares the string current and its output voltage settles at
//! the ratio of its panel power to the string power. That single relation
//! (V_out = P_PV / P_string * V_string) generates all the scenario numbers.

use crate::converter::duty_for_target;
use crate::error::{AfzError, Result};

/// Plant-level inputs: installed power, string voltage, panel ratings.
#[derive(Debug, Clone, Copy)]
pub struct PlantSpec {
    /// Target plant power (W).
    pub p_plant: f64,
    /// Inverter-controlled string voltage (V).
    pub v_string: f64,
    /// Panel power at the maximum power point (W).
    pub panel_p_mpp: f64,
    /// Panel voltage at the maximum power point (V).
    pub panel_v_mpp: f64,
    /// Allowed panels-per-string range (inclusive).
    pub panels_per_string: (usize, usize),
    /// Smallest admissible total panel count; defaults to the power quota
    /// ceil(P_plant / P_panel) when not set explicitly.
    pub min_total_panels: Option<usize>,
    /// How many panels above the baseline are still worth listing.
    pub extra_panels: usize,
}

impl PlantSpec {
    pub fn new(p_plant: f64, v_string: f64, panel_p_mpp: f64, panel_v_mpp: f64) -> Self {
        PlantSpec {
            p_plant,
            v_string,
            panel_p_mpp,
            panel_v_mpp,
            panels_per_string: (5, 60),
            min_total_panels: None,
            extra_panels: 6,
        }
    }

    fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("p_plant", self.p_plant),
            ("v_string", self.v_string),
            ("panel_p_mpp", self.panel_p_mpp),
            ("panel_v_mpp", self.panel_v_mpp),
        ] {
            if !(v > 0.0) {
                return Err(AfzError::NonPositiveValue { field, value: v });
            }
        }
        Ok(())
    }

    fn baseline_total(&self) -> usize {
        self.min_total_panels
            .unwrap_or_else(|| (self.p_plant / self.panel_p_mpp).ceil() as usize)
    }
}

/// One plant architecture candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringConfig {
    pub strings: usize,
    pub panels_per_string: usize,
    pub total_panels: usize,
    /// Per-converter output voltage V_string / panels_per_string (V).
    pub v_out: f64,
    /// |V_out - V_mpp| (V): the conversion ratio penalty of the candidate.
    pub delta_v: f64,
}

/// Enumerate admissible (strings x panels-per-string) architectures.
///
/// Candidates must reach the baseline panel count and may exceed it by at
/// most `extra_panels`; they are ranked by total panel count first and by
/// |V_out - V_mpp| second, which favours the cheapest plant with the
/// mildest conversion ratio. The top `limit` rows are returned.
pub fn enumerate_configs(spec: &PlantSpec, limit: usize) -> Result<Vec<StringConfig>> {
    spec.validate()?;
    let base = spec.baseline_total();
    let max_total = base + spec.extra_panels;
    let (smin, smax) = spec.panels_per_string;
    let mut rows = Vec::new();
    for panels in smin.max(1)..=smax {
        let min_strings = (base + panels - 1) / panels;
        let mut strings = min_strings;
        loop {
            let total = strings * panels;
            if total > max_total {
                break;
            }
            let v_out = spec.v_string / panels as f64;
            rows.push(StringConfig {
                strings,
                panels_per_string: panels,
                total_panels: total,
                v_out,
                delta_v: (v_out - spec.panel_v_mpp).abs(),
            });
            strings += 1;
        }
    }
    rows.sort_by(|a, b| {
        a.total_panels
            .cmp(&b.total_panels)
            .then(a.delta_v.partial_cmp(&b.delta_v).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.panels_per_string.cmp(&b.panels_per_string))
    });
    rows.truncate(limit);
    Ok(rows)
}

/// Partial-shading description for one scenario.
#[derive(Debug, Clone, Copy)]
pub struct Shading {
    /// Fraction of the string's panels that are shaded, in [0, 1].
    /// Fractional panel counts are allowed.
    pub fraction: f64,
    /// MPP voltage of a shaded panel (V).
    pub shaded_v_mpp: f64,
    /// MPP power of a shaded panel (W).
    pub shaded_p_mpp: f64,
}

impl Shading {
    pub fn none() -> Self {
        Shading {
            fraction: 0.0,
            shaded_v_mpp: 0.0,
            shaded_p_mpp: 0.0,
        }
    }
}

/// Operating conditions of one converter class within a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterClass {
    /// Processed power (W).
    pub p_mic: f64,
    /// Input (panel MPP) voltage (V).
    pub v_in: f64,
    /// Output voltage into the string (V).
    pub v_out: f64,
    /// Number of converters of this class per string (fractional allowed).
    pub count: f64,
}

/// Per-scenario operating points for the converters of one string.
#[derive(Debug, Clone)]
pub struct ScenarioPoints {
    pub i_string: f64,
    pub p_string: f64,
    pub non_shaded: ConverterClass,
    pub shaded: Option<ConverterClass>,
}

/// Evaluate the string under a shading scenario.
pub fn scenario_points(
    config: &StringConfig,
    spec: &PlantSpec,
    shading: &Shading,
) -> Result<ScenarioPoints> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&shading.fraction) {
        return Err(AfzError::NonPositiveValue {
            field: "shaded_fraction",
            value: shading.fraction,
        });
    }
    let panels = config.panels_per_string as f64;
    let shaded_count = panels * shading.fraction;
    let clear_count = panels - shaded_count;
    let p_string =
        clear_count * spec.panel_p_mpp + shaded_count * shading.shaded_p_mpp;
    let i_string = p_string / spec.v_string;
    let v_out_clear = spec.panel_p_mpp / p_string * spec.v_string;
    let non_shaded = ConverterClass {
        p_mic: spec.panel_p_mpp,
        v_in: spec.panel_v_mpp,
        v_out: v_out_clear,
        count: clear_count,
    };
    let shaded = if shaded_count > 0.0 {
        Some(ConverterClass {
            p_mic: shading.shaded_p_mpp,
            v_in: shading.shaded_v_mpp,
            v_out: shading.shaded_p_mpp / p_string * spec.v_string,
            count: shaded_count,
        })
    } else {
        None
    };
    Ok(ScenarioPoints {
        i_string,
        p_string,
        non_shaded,
        shaded,
    })
}

/// Envelope of converter requirements over a set of scenarios.
#[derive(Debug, Clone, Copy)]
pub struct DesignSpec {
    pub v_in: (f64, f64),
    pub v_out: (f64, f64),
    pub duty: (f64, f64),
    pub power: (f64, f64),
    /// Output-voltage regulation band applied around the envelope.
    pub v_out_tolerance: f64,
}

/// Fold scenario classes into the converter design envelope, deriving the
/// duty range for the given turns ratio and checking it against `d_max`.
pub fn derive_design_spec(
    scenarios: &[&ScenarioPoints],
    turns_ratio: f64,
    d_max: f64,
) -> Result<DesignSpec> {
    if scenarios.is_empty() {
        return Err(AfzError::MissingConfig {
            what: "at least one scenario".into(),
        });
    }
    let mut v_in = (f64::INFINITY, f64::NEG_INFINITY);
    let mut v_out = (f64::INFINITY, f64::NEG_INFINITY);
    let mut duty = (f64::INFINITY, f64::NEG_INFINITY);
    let mut power = (f64::INFINITY, f64::NEG_INFINITY);
    let mut fold = |class: &ConverterClass| -> Result<()> {
        v_in = (v_in.0.min(class.v_in), v_in.1.max(class.v_in));
        v_out = (v_out.0.min(class.v_out), v_out.1.max(class.v_out));
        power = (power.0.min(class.p_mic), power.1.max(class.p_mic));
        let d = duty_for_target(class.v_in, class.v_out, turns_ratio, d_max)?;
        duty = (duty.0.min(d), duty.1.max(d));
        Ok(())
    };
    for sc in scenarios {
        fold(&sc.non_shaded)?;
        if let Some(shaded) = &sc.shaded {
            fold(shaded)?;
        }
    }
    Ok(DesignSpec {
        v_in,
        v_out,
        duty,
        power,
        v_out_tolerance: 0.02,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// The 100 kW case study: 600 V string, 225 W / 29.3 V panels, string
    /// length bounded to keep per-converter output voltages practical,
    /// 450-panel baseline.
    pub fn case_study() -> PlantSpec {
        let mut spec = PlantSpec::new(100e3, 600.0, 225.0, 29.3);
        spec.panels_per_string = (9, 25);
        spec.min_total_panels = Some(450);
        spec.extra_panels = 6;
        spec
    }

    fn case_shading() -> Shading {
        Shading {
            fraction: 0.25,
            shaded_v_mpp: 15.0,
            shaded_p_mpp: 67.5,
        }
    }

    #[test]
    fn case_study_rows() {
        let rows = enumerate_configs(&case_study(), 10).unwrap();
        let expect: [(usize, usize, usize, f64, f64); 10] = [
            (25, 18, 450, 33.33, 4.03),
            (18, 25, 450, 24.00, 5.30),
            (30, 15, 450, 40.00, 10.70),
            (45, 10, 450, 60.00, 30.70),
            (50, 9, 450, 66.67, 37.37),
            (41, 11, 451, 54.55, 25.25),
            (35, 13, 455, 46.15, 16.85),
            (24, 19, 456, 31.58, 2.28),
            (19, 24, 456, 25.00, 4.30),
            (38, 12, 456, 50.00, 20.70),
        ];
        assert_eq!(rows.len(), 10);
        for (row, (strings, panels, total, v_out, dv)) in rows.iter().zip(expect) {
            assert_eq!(row.strings, strings);
            assert_eq!(row.panels_per_string, panels);
            assert_eq!(row.total_panels, total);
            assert!((row.v_out - v_out).abs() <= 0.01, "v_out {}", row.v_out);
            assert!((row.delta_v - dv).abs() <= 0.01, "delta_v {}", row.delta_v);
        }
    }

    #[test]
    fn single_panel_plant() {
        let mut spec = PlantSpec::new(225.0, 600.0, 225.0, 29.3);
        spec.panels_per_string = (1, 1);
        spec.extra_panels = 0;
        let rows = enumerate_configs(&spec, 10).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].strings, 1);
        assert_eq!(rows[0].panels_per_string, 1);
        assert_relative_eq!(rows[0].v_out, 600.0);
    }

    #[test]
    fn scenario_numbers() {
        let spec = case_study();
        let config = enumerate_configs(&spec, 1).unwrap()[0];

        let s0 = scenario_points(&config, &spec, &Shading::none()).unwrap();
        assert_relative_eq!(s0.i_string, 6.75, max_relative = 1e-9);
        assert_relative_eq!(s0.non_shaded.v_out, 100.0 / 3.0, max_relative = 1e-9);
        assert!(s0.shaded.is_none());

        let s1 = scenario_points(&config, &spec, &case_shading()).unwrap();
        assert_relative_eq!(s1.i_string, 5.56875, max_relative = 1e-9);
        assert_relative_eq!(s1.non_shaded.v_out, 40.40404, max_relative = 1e-5);
        let shaded = s1.shaded.unwrap();
        assert_relative_eq!(shaded.v_out, 12.12121, max_relative = 1e-5);
        assert_relative_eq!(shaded.count, 4.5, max_relative = 1e-12);

        // Zero fraction with arbitrary shaded parameters collapses to S0.
        let mut sh = case_shading();
        sh.fraction = 0.0;
        let s0b = scenario_points(&config, &spec, &sh).unwrap();
        assert_eq!(s0b.non_shaded, s0.non_shaded);
        assert!(s0b.shaded.is_none());
    }

    #[test]
    fn voltage_stack_and_power_conservation() {
        let spec = case_study();
        let config = enumerate_configs(&spec, 1).unwrap()[0];
        for frac in [0.0, 0.1, 0.25, 0.4, 0.75, 1.0] {
            let sh = Shading {
                fraction: frac,
                ..case_shading()
            };
            let s = scenario_points(&config, &spec, &sh).unwrap();
            let mut v_sum = s.non_shaded.v_out * s.non_shaded.count;
            let mut p_sum = s.non_shaded.v_out * s.i_string * s.non_shaded.count;
            if let Some(shaded) = &s.shaded {
                v_sum += shaded.v_out * shaded.count;
                p_sum += shaded.v_out * s.i_string * shaded.count;
            }
            assert_relative_eq!(v_sum, spec.v_string, max_relative = 1e-9);
            assert_relative_eq!(p_sum, s.p_string, max_relative = 1e-9);
        }
    }

    #[test]
    fn shading_monotonically_reduces_string_current() {
        let spec = case_study();
        let config = enumerate_configs(&spec, 1).unwrap()[0];
        let mut last = f64::INFINITY;
        for k in 0..=10 {
            let sh = Shading {
                fraction: k as f64 / 10.0,
                ..case_shading()
            };
            let s = scenario_points(&config, &spec, &sh).unwrap();
            assert!(s.i_string < last);
            last = s.i_string;
        }
    }

    #[test]
    fn design_envelope() {
        let spec = case_study();
        let config = enumerate_configs(&spec, 1).unwrap()[0];
        let s0 = scenario_points(&config, &spec, &Shading::none()).unwrap();
        let s1 = scenario_points(&config, &spec, &case_shading()).unwrap();
        let d = derive_design_spec(&[&s0, &s1], 1.0, 0.75).unwrap();
        assert_relative_eq!(d.v_in.0, 15.0, max_relative = 1e-9);
        assert_relative_eq!(d.v_in.1, 29.3, max_relative = 1e-9);
        assert_relative_eq!(d.v_out.0, 12.12121, max_relative = 1e-5);
        assert_relative_eq!(d.v_out.1, 40.40404, max_relative = 1e-5);
        assert_relative_eq!(d.power.0, 67.5, max_relative = 1e-9);
        assert_relative_eq!(d.power.1, 225.0, max_relative = 1e-9);
        assert!(d.duty.1 <= 0.6895 * (1.0 + 1e-4));
        assert!(d.duty.1 <= 0.75);

        // A single scenario degenerates to point ranges.
        let d0 = derive_design_spec(&[&s0], 1.0, 0.75).unwrap();
        assert_eq!(d0.v_in.0, d0.v_in.1);
        assert_eq!(d0.power.0, d0.power.1);
    }
}
