//! Sectioned key-value configuration files.
//!
//! The format is a strict INI dialect: `[section]` headers, `key = value`
//! pairs, `#` comments, one statement per line. Values are numbers in SI
//! units, scientific notation accepted, with an optional unit annotation
//! that is checked against the key (`f_sw = 50e3 Hz`). Unknown sections and
//! keys are hard errors so typos cannot silently fall back to defaults.
//!
//! `canonical_string` re-emits a parsed config in a fixed layout; a file
//! written in canonical form round-trips byte-identically.

use crate::converter::ConverterParams;
use crate::error::{AfzError, Result};
use std::collections::BTreeMap;

/// Unit annotation accepted for a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Pure,
    Hertz,
    Henry,
    Farad,
    Volt,
    Watt,
    Ohm,
    Second,
}

impl Unit {
    fn name(self) -> &'static str {
        match self {
            Unit::Pure => "1",
            Unit::Hertz => "Hz",
            Unit::Henry => "H",
            Unit::Farad => "F",
            Unit::Volt => "V",
            Unit::Watt => "W",
            Unit::Ohm => "ohm",
            Unit::Second => "s",
        }
    }

    fn matches(self, token: &str) -> bool {
        token == self.name()
    }
}

/// (key, unit, doc) registry per section. Parsing rejects anything else.
const CONVERTER_KEYS: &[(&str, Unit)] = &[
    ("n", Unit::Pure),
    ("f_sw", Unit::Hertz),
    ("l", Unit::Henry),
    ("l_m", Unit::Henry),
    ("l_k", Unit::Henry),
    ("l_kpri", Unit::Henry),
    ("l_ksec", Unit::Henry),
    ("c_d", Unit::Farad),
    ("c_oss", Unit::Farad),
    ("c_o", Unit::Farad),
    ("r_dson", Unit::Ohm),
    ("v_f1", Unit::Volt),
    ("v_f2", Unit::Volt),
    ("v_fd", Unit::Volt),
    ("r_pri", Unit::Ohm),
    ("r_sec", Unit::Ohm),
    ("r_l_dc", Unit::Ohm),
];

const OPERATING_POINT_KEYS: &[(&str, Unit)] = &[
    ("v_i", Unit::Volt),
    ("duty", Unit::Pure),
    ("v_o", Unit::Volt),
    ("p_o", Unit::Watt),
];

const PLANT_KEYS: &[(&str, Unit)] = &[
    ("p_plant", Unit::Watt),
    ("v_string", Unit::Volt),
    ("panel_p_mpp", Unit::Watt),
    ("panel_v_mpp", Unit::Volt),
    ("panels_per_string_min", Unit::Pure),
    ("panels_per_string_max", Unit::Pure),
    ("min_total_panels", Unit::Pure),
    ("extra_panels", Unit::Pure),
];

const SCENARIO_KEYS: &[(&str, Unit)] = &[
    ("shaded_fraction", Unit::Pure),
    ("shaded_v_mpp", Unit::Volt),
    ("shaded_p_mpp", Unit::Watt),
];

const SIMULATION_KEYS: &[(&str, Unit)] = &[
    ("periods", Unit::Pure),
    ("dt_max", Unit::Second),
    ("samples_per_period", Unit::Pure),
];

const SWEEP_KEYS: &[(&str, Unit)] = &[
    ("f_min", Unit::Hertz),
    ("f_max", Unit::Hertz),
    ("points", Unit::Pure),
    ("amplitude", Unit::Pure),
];

const SECTIONS: &[(&str, &[(&str, Unit)])] = &[
    ("converter", CONVERTER_KEYS),
    ("operating-point", OPERATING_POINT_KEYS),
    ("plant", PLANT_KEYS),
    ("scenario", SCENARIO_KEYS),
    ("simulation", SIMULATION_KEYS),
    ("sweep", SWEEP_KEYS),
];

fn section_keys(section: &str) -> Option<&'static [(&'static str, Unit)]> {
    SECTIONS
        .iter()
        .find(|(name, _)| *name == section)
        .map(|(_, keys)| *keys)
}

/// One parsed value with its source line, for error reporting.
#[derive(Debug, Clone, Copy)]
pub struct Entry {
    pub value: f64,
    pub line: usize,
}

/// Parsed configuration: section -> key -> entry. Key order within a
/// section is not preserved; the canonical serializer uses registry order.
#[derive(Debug, Clone, Default)]
pub struct WorkbenchConfig {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    /// Source path, used only in error messages.
    pub path: String,
}

impl WorkbenchConfig {
    pub fn get(&self, section: &str, key: &str) -> Option<f64> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(|e| e.value)
    }

    pub fn entry(&self, section: &str, key: &str) -> Option<Entry> {
        self.sections.get(section).and_then(|s| s.get(key)).copied()
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn require(&self, section: &str, key: &str) -> Result<f64> {
        self.get(section, key).ok_or_else(|| AfzError::MissingConfig {
            what: format!("key `{key}` in section [{section}]"),
        })
    }

    fn value_err(&self, section: &str, key: &str, msg: String) -> AfzError {
        let line = self.entry(section, key).map(|e| e.line).unwrap_or(0);
        AfzError::ConfigValue {
            path: self.path.clone(),
            line,
            msg,
        }
    }

    /// Build the converter parameter block from `[converter]`.
    ///
    /// Leakage is given either as `l_k` (total referred to the primary,
    /// split half/half over the windings) or as the explicit pair
    /// `l_kpri`/`l_ksec`; mixing both forms is rejected.
    pub fn converter_params(&self) -> Result<ConverterParams> {
        if !self.has_section("converter") {
            return Err(AfzError::MissingConfig {
                what: "section [converter]".into(),
            });
        }
        let s = "converter";
        let n = self.require(s, "n")?;
        let mut p = ConverterParams::new(
            n,
            self.require(s, "f_sw")?,
            self.require(s, "l")?,
            self.require(s, "l_m")?,
            self.require(s, "c_d")?,
            self.require(s, "c_o")?,
        );
        let total = self.get(s, "l_k");
        let pri = self.get(s, "l_kpri");
        let sec = self.get(s, "l_ksec");
        match (total, pri, sec) {
            (Some(lk), None, None) => {
                p = p.with_total_leakage(lk);
            }
            (None, pri, sec) => {
                p.l_kpri = pri.unwrap_or(0.0);
                p.l_ksec = sec.unwrap_or(0.0);
            }
            (Some(_), _, _) => {
                return Err(self.value_err(
                    s,
                    "l_k",
                    "give either `l_k` or the `l_kpri`/`l_ksec` pair, not both".into(),
                ));
            }
        }
        p.c_oss = self.get(s, "c_oss").unwrap_or(0.0);
        p.r_dson = self.get(s, "r_dson").unwrap_or(0.0);
        p.v_f1 = self.get(s, "v_f1").unwrap_or(0.0);
        p.v_f2 = self.get(s, "v_f2").unwrap_or(0.0);
        p.v_fd = self.get(s, "v_fd").unwrap_or(0.0);
        p.r_pri = self.get(s, "r_pri").unwrap_or(0.0);
        p.r_sec = self.get(s, "r_sec").unwrap_or(0.0);
        p.r_l_dc = self.get(s, "r_l_dc").unwrap_or(0.0);
        Ok(p)
    }

    /// Raw operating-point numbers: (v_i, duty?, v_o?, p_o).
    pub fn operating_point_raw(&self) -> Result<(f64, Option<f64>, Option<f64>, f64)> {
        let s = "operating-point";
        if !self.has_section(s) {
            return Err(AfzError::MissingConfig {
                what: "section [operating-point]".into(),
            });
        }
        let v_i = self.require(s, "v_i")?;
        let p_o = self.require(s, "p_o")?;
        let duty = self.get(s, "duty");
        let v_o = self.get(s, "v_o");
        if duty.is_none() && v_o.is_none() {
            return Err(AfzError::MissingConfig {
                what: "either `duty` or `v_o` in [operating-point]".into(),
            });
        }
        if duty.is_some() && v_o.is_some() {
            return Err(self.value_err(
                s,
                "duty",
                "give either `duty` or `v_o`, not both".into(),
            ));
        }
        Ok((v_i, duty, v_o, p_o))
    }
}

fn syntax(path: &str, line: usize, col: usize, msg: impl Into<String>) -> AfzError {
    AfzError::Syntax {
        path: path.to_string(),
        line,
        col,
        msg: msg.into(),
    }
}

/// Parse a configuration document. `path` is used in diagnostics only.
pub fn parse_config(text: &str, path: &str) -> Result<WorkbenchConfig> {
    let mut cfg = WorkbenchConfig {
        path: path.to_string(),
        ..Default::default()
    };
    let mut current: Option<String> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }

        if let Some(rest) = trimmed.strip_prefix('[') {
            let col = line.find('[').unwrap_or(0) + 1;
            let name = rest.strip_suffix(']').ok_or_else(|| {
                syntax(path, lineno, col, "section header missing closing `]`")
            })?;
            if section_keys(name).is_none() {
                return Err(syntax(
                    path,
                    lineno,
                    col,
                    format!("unknown section [{name}]"),
                ));
            }
            if cfg.sections.contains_key(name) {
                return Err(syntax(
                    path,
                    lineno,
                    col,
                    format!("duplicate section [{name}]"),
                ));
            }
            cfg.sections.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
            continue;
        }

        let eq = trimmed.find('=').ok_or_else(|| {
            syntax(path, lineno, 1, "expected `key = value` or `[section]`")
        })?;
        let key = trimmed[..eq].trim();
        let rhs = trimmed[eq + 1..].trim();
        if key.is_empty() {
            return Err(syntax(path, lineno, 1, "empty key before `=`"));
        }
        let section = current.clone().ok_or_else(|| {
            syntax(path, lineno, 1, "key outside of any [section]")
        })?;
        let keys = section_keys(&section).expect("section checked at header");
        let unit = match keys.iter().find(|(k, _)| *k == key) {
            Some((_, unit)) => *unit,
            None => {
                return Err(AfzError::UnknownKey {
                    path: path.to_string(),
                    line: lineno,
                    section,
                    key: key.to_string(),
                })
            }
        };

        let mut parts = rhs.split_whitespace();
        let num_tok = parts
            .next()
            .ok_or_else(|| syntax(path, lineno, eq + 2, "missing value after `=`"))?;
        let value: f64 = num_tok.parse().map_err(|_| {
            syntax(
                path,
                lineno,
                eq + 2,
                format!("`{num_tok}` is not a number"),
            )
        })?;
        if !value.is_finite() {
            return Err(syntax(path, lineno, eq + 2, "value must be finite"));
        }
        if let Some(unit_tok) = parts.next() {
            if !unit.matches(unit_tok) {
                return Err(AfzError::UnitViolation {
                    path: path.to_string(),
                    line: lineno,
                    key: key.to_string(),
                    expected: unit.name(),
                    found: unit_tok.to_string(),
                });
            }
            if let Some(junk) = parts.next() {
                return Err(syntax(
                    path,
                    lineno,
                    eq + 2,
                    format!("unexpected trailing token `{junk}`"),
                ));
            }
        }

        let entry_map = cfg.sections.get_mut(&section).expect("section exists");
        if entry_map.contains_key(key) {
            return Err(syntax(
                path,
                lineno,
                1,
                format!("duplicate key `{key}` in section [{section}]"),
            ));
        }
        entry_map.insert(key.to_string(), Entry { value, line: lineno });
    }

    if cfg.sections.is_empty() {
        return Err(AfzError::MissingConfig {
            what: "at least one of the sections [converter], [operating-point], \
                   [plant], [scenario], [simulation], [sweep]"
                .into(),
        });
    }
    Ok(cfg)
}

/// Format a number the way the canonical serializer does: plain decimal in
/// a middle range, exponent notation outside it. Both forms round-trip.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e7).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Emit a config in canonical form: fixed section order, registry key
/// order, one space around `=`, unit annotations on every unit-ful key,
/// LF endings. Parsing a canonical document and re-emitting it is the
/// identity on bytes.
pub fn canonical_string(cfg: &WorkbenchConfig) -> String {
    let mut out = String::new();
    let mut first = true;
    for (section, keys) in SECTIONS {
        let Some(map) = cfg.sections.get(*section) else {
            continue;
        };
        if !first {
            out.push('\n');
        }
        first = false;
        out.push('[');
        out.push_str(section);
        out.push_str("]\n");
        for (key, unit) in *keys {
            if let Some(entry) = map.get(*key) {
                out.push_str(key);
                out.push_str(" = ");
                out.push_str(&fmt_num(entry.value));
                if *unit != Unit::Pure {
                    out.push(' ');
                    out.push_str(unit.name());
                }
                out.push('\n');
            }
        }
    }
    out
}

/// SHA-256 of the canonical form, hex-encoded. Identifies a configuration
/// independently of comments and formatting.
pub fn config_hash(cfg: &WorkbenchConfig) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(canonical_string(cfg).as_bytes());
    let digest = h.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# prototype-ish values
[converter]
n = 1
f_sw = 50000 Hz
l = 0.000068 H
l_m = 0.000485 H
l_k = 8.2e-7 H
c_d = 1.1e-8 F
c_o = 0.000112 F

[operating-point]
v_i = 29.3 V
duty = 0.5688
p_o = 225 W
";

    #[test]
    fn parses_and_builds_params() {
        let cfg = parse_config(SAMPLE, "sample.cfg").unwrap();
        let p = cfg.converter_params().unwrap();
        assert_eq!(p.turns_ratio, 1.0);
        assert_eq!(p.f_sw, 50e3);
        assert!((p.l_kpri - 410e-9).abs() < 1e-15);
        assert!((p.l_ksec - 4.0 * 410e-9).abs() < 1e-15);
        let (v_i, duty, v_o, p_o) = cfg.operating_point_raw().unwrap();
        assert_eq!(v_i, 29.3);
        assert_eq!(duty, Some(0.5688));
        assert_eq!(v_o, None);
        assert_eq!(p_o, 225.0);
    }

    #[test]
    fn canonical_round_trip() {
        let cfg = parse_config(SAMPLE, "sample.cfg").unwrap();
        let canon = canonical_string(&cfg);
        let cfg2 = parse_config(&canon, "canon.cfg").unwrap();
        let canon2 = canonical_string(&cfg2);
        assert_eq!(canon, canon2, "canonical form must be a fixed point");
        assert_eq!(config_hash(&cfg), config_hash(&cfg2));
    }

    #[test]
    fn empty_file_is_an_error() {
        let err = parse_config("", "empty.cfg").unwrap_err();
        assert!(matches!(err, AfzError::MissingConfig { .. }));
        let msg = err.to_string();
        assert!(msg.contains("[converter]"));
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = "[converter]\nn = 1\nl_mm = 4.85e-4\n";
        match parse_config(text, "t.cfg").unwrap_err() {
            AfzError::UnknownKey { line, key, .. } => {
                assert_eq!(line, 3);
                assert_eq!(key, "l_mm");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unit_mismatch_rejected() {
        let text = "[converter]\nf_sw = 50e3 V\n";
        match parse_config(text, "t.cfg").unwrap_err() {
            AfzError::UnitViolation { key, expected, found, .. } => {
                assert_eq!(key, "f_sw");
                assert_eq!(expected, "Hz");
                assert_eq!(found, "V");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_inductance_surfaces_with_line() {
        let text = "\
[converter]
n = 1
f_sw = 50e3
l = 68e-6
l_m = -485e-6
c_d = 11e-9
c_o = 112e-6
";
        let cfg = parse_config(text, "t.cfg").unwrap();
        let p = cfg.converter_params().unwrap();
        // The magnitude check lives in validate_params; the CLI maps the
        // field back to its config line for the user. Here we check the
        // entry lookup used for that mapping.
        assert!(crate::converter::validate_params(p).is_err());
        assert_eq!(cfg.entry("converter", "l_m").unwrap().line, 5);
    }

    #[test]
    fn garbage_lines_give_positions() {
        let err = parse_config("[converter\n", "t.cfg").unwrap_err();
        assert!(matches!(err, AfzError::Syntax { line: 1, .. }));
        let err = parse_config("[converter]\nnonsense\n", "t.cfg").unwrap_err();
        assert!(matches!(err, AfzError::Syntax { line: 2, .. }));
        let err = parse_config("x = 3\n", "t.cfg").unwrap_err();
        assert!(matches!(err, AfzError::Syntax { line: 1, .. }));
    }
}
