//! Result serialization: deterministic CSV emission and aligned text
//! tables.
//!
//! Numbers in CSV files are printed with nine significant digits, LF line
//! endings, no trailing separators, so identical inputs re-emit identical
//! bytes. Run metadata lives in `#`-prefixed header lines that consumers
//! can strip (or suppress with `--no-meta`).

use crate::error::Result;
use crate::sim::EventLog;
use crate::smallsig::{BodePoint, DeviationReport};
use crate::waveform::{WaveformSet, CHANNEL_NAMES};
use std::io::Write;

/// Nine-significant-digit float format shared by all emitters.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

/// Run metadata emitted as comment lines ahead of CSV tables.
#[derive(Debug, Clone, Default)]
pub struct RunMeta {
    pub config_hash: String,
    pub tool_version: String,
    pub timestamp_unix: Option<u64>,
}

impl RunMeta {
    pub fn new(config_hash: String) -> Self {
        RunMeta {
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs()),
        }
    }

    /// Strip the wall-clock entry so emitted files are bit-reproducible.
    pub fn without_timestamp(mut self) -> Self {
        self.timestamp_unix = None;
        self
    }

    fn write(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "# afz {}", self.tool_version)?;
        writeln!(out, "# config {}", self.config_hash)?;
        if let Some(ts) = self.timestamp_unix {
            writeln!(out, "# generated {ts}")?;
        }
        Ok(())
    }
}

/// Emit a waveform set: `time_s,<channel>...`, one row per sample.
pub fn emit_waveform_csv(
    out: &mut dyn Write,
    wf: &WaveformSet,
    meta: Option<&RunMeta>,
) -> Result<()> {
    if let Some(meta) = meta {
        meta.write(out)?;
    }
    let mut header = String::from("time_s");
    for name in CHANNEL_NAMES {
        header.push(',');
        header.push_str(name);
    }
    writeln!(out, "{header}")?;
    for k in 0..wf.time.len() {
        let mut row = fmt_float(wf.time[k]);
        for c in &wf.channels {
            row.push(',');
            row.push_str(&fmt_float(c[k]));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Emit analytical Bode data, optionally with simulated columns.
pub fn emit_bode_csv(
    out: &mut dyn Write,
    analytical: &[BodePoint],
    simulated: Option<&[BodePoint]>,
    meta: Option<&RunMeta>,
) -> Result<()> {
    if let Some(meta) = meta {
        meta.write(out)?;
    }
    if simulated.is_some() {
        writeln!(out, "freq_hz,mag_db,phase_deg,sim_mag_db,sim_phase_deg")?;
    } else {
        writeln!(out, "freq_hz,mag_db,phase_deg")?;
    }
    for (k, a) in analytical.iter().enumerate() {
        let mut row = format!(
            "{},{},{}",
            fmt_float(a.freq_hz),
            fmt_float(a.mag_db),
            fmt_float(a.phase_deg)
        );
        if let Some(sim) = simulated {
            let s = &sim[k];
            row.push_str(&format!(",{},{}", fmt_float(s.mag_db), fmt_float(s.phase_deg)));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Emit the event log: `time_s,label,trigger`.
pub fn emit_events_csv(out: &mut dyn Write, events: &EventLog, meta: Option<&RunMeta>) -> Result<()> {
    if let Some(meta) = meta {
        meta.write(out)?;
    }
    writeln!(out, "time_s,label,trigger")?;
    for e in events {
        writeln!(out, "{},{},{}", fmt_float(e.time), e.label.name(), e.trigger)?;
    }
    Ok(())
}

/// Emit a deviation report: per-frequency analytic/simulated deltas.
pub fn emit_deviation_csv(
    out: &mut dyn Write,
    rep: &DeviationReport,
    meta: Option<&RunMeta>,
) -> Result<()> {
    if let Some(meta) = meta {
        meta.write(out)?;
    }
    writeln!(
        out,
        "freq_hz,mag_db,phase_deg,sim_mag_db,sim_phase_deg,delta_mag_db,delta_phase_deg,gated"
    )?;
    for r in &rep.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_float(r.freq_hz),
            fmt_float(r.mag_db),
            fmt_float(r.phase_deg),
            fmt_float(r.sim_mag_db),
            fmt_float(r.sim_phase_deg),
            fmt_float(r.delta_mag_db),
            fmt_float(r.delta_phase_deg),
            if r.gated { 1 } else { 0 }
        )?;
    }
    Ok(())
}

/// Simple aligned two-column table for terminal reports.
pub struct TextTable {
    title: String,
    rows: Vec<(String, String)>,
}

impl TextTable {
    pub fn new(title: &str) -> Self {
        TextTable {
            title: title.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, key: &str, value: String) -> &mut Self {
        self.rows.push((key.to_string(), value));
        self
    }

    pub fn num(&mut self, key: &str, value: f64, unit: &str) -> &mut Self {
        self.row(key, format!("{} {unit}", format_engineering(value)))
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut s = String::new();
        s.push_str(&self.title);
        s.push('\n');
        for _ in 0..self.title.len() {
            s.push('-');
        }
        s.push('\n');
        for (k, v) in &self.rows {
            s.push_str(&format!("{k:<width$}  {v}\n"));
        }
        s
    }
}

/// Engineering-style number formatting for human-readable tables.
pub fn format_engineering(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (0.01..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.4e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converter::{prototype_params, validate_params, OperatingPoint};
    use crate::reset::{interval_times, solve_reset};
    use crate::waveform::synthesize_waveforms;

    fn wave() -> WaveformSet {
        let p = validate_params(prototype_params()).unwrap();
        let op = OperatingPoint::from_duty(&p, 29.3, 0.5688, 225.0).unwrap();
        let sol = solve_reset(&p, &op).unwrap();
        let times = interval_times(&p, &op, &sol).unwrap();
        synthesize_waveforms(&p, &op, &sol, &times, 2048)
    }

    #[test]
    fn waveform_csv_shape() {
        let wf = wave();
        let mut buf = Vec::new();
        emit_waveform_csv(&mut buf, &wf, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), wf.time.len() + 1);
        assert!(lines[0].starts_with("time_s,i_l,"));
        assert_eq!(lines[0].split(',').count(), 15);
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 15);
            assert!(!line.ends_with(','));
        }
        assert!(!text.contains('\r'));
    }

    #[test]
    fn emission_is_deterministic() {
        let wf = wave();
        let mut a = Vec::new();
        let mut b = Vec::new();
        emit_waveform_csv(&mut a, &wf, None).unwrap();
        emit_waveform_csv(&mut b, &wf, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bode_csv_columns() {
        let pts = vec![
            BodePoint {
                freq_hz: 10.0,
                mag_db: 35.36,
                phase_deg: -0.1,
            };
            3
        ];
        let mut buf = Vec::new();
        emit_bode_csv(&mut buf, &pts, Some(&pts), None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines() {
            assert_eq!(line.split(',').count(), 5);
        }
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_float(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_float(29.3), "2.93000000e1");
    }
}
