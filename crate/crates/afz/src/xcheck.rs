//! Cross-validation between the analytic steady-state engine and the
//! transient simulator. Used by the `verify` subcommand and the
//! acceptance suite.

use crate::converter::{max_duty, resonant_profile, OperatingPoint, ValidatedParams};
use crate::error::Result;
use crate::reset::{solve_reset, ResetSolution};
use crate::sim::acsweep::{ac_sweep, commensurate_grid, to_bode, SweepAmplitude, SweepTarget};
use crate::sim::{periodic_steady_state, EventLog, PhaseLabel, SteadyState};
use crate::smallsig::{bode, build_model, compare_with_simulation, DeviationReport};

/// Analytic vs simulated reset quantities at one operating point.
#[derive(Debug, Clone)]
pub struct ResetCrossCheck {
    pub analytic: ResetSolution,
    pub simulated: SteadyState,
    /// Relative deviations of (I_Lm_min, V_Cd_min, V_Cd_t3).
    pub rel: [f64; 3],
    pub events_canonical: bool,
    /// Energy-audit error relative to the period's output energy.
    pub energy_rel: f64,
    /// Mean C_d current over the period relative to the load current.
    pub cd_charge_rel: f64,
    /// Output-inductor volt-second imbalance relative to V_o * T_sw.
    pub volt_sec_rel: f64,
    /// Simulated mean output voltage against the ideal transfer ratio.
    pub transfer_rel: f64,
}

fn rel_dev(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

/// Solve analytically and via periodic steady state, then compare.
pub fn reset_cross_check(
    p: &ValidatedParams,
    op: &OperatingPoint,
    dt_max: f64,
) -> Result<ResetCrossCheck> {
    let analytic = solve_reset(p, op)?;
    let warm = (op.i_l, analytic.i_lm_min, op.v_o);
    let (ss, _wf, audit, events) = periodic_steady_state(p, op, dt_max, Some(warm))?;
    let scale_i = analytic.delta_i_lm.abs().max(0.05);
    let scale_v = op.v_i;
    let rel = [
        rel_dev(analytic.i_lm_min, ss.i_lm_min, scale_i),
        rel_dev(analytic.v_cd_min, ss.v_cd_min, scale_v),
        rel_dev(analytic.v_cd_t3, ss.v_cd_max, scale_v),
    ];
    let e_balance = audit.e_in - audit.e_out - audit.e_reinit;
    let energy_rel = e_balance.abs() / audit.e_out.abs().max(1e-12);
    let t_sw = p.t_sw();
    let span = if ss.period2 { 2.0 } else { 1.0 };
    let cd_charge_rel = (audit.q_cd / (span * t_sw)).abs() / op.i_l.max(1e-9);
    let volt_sec_rel = (audit.volt_sec_l / (span * t_sw)).abs() / op.v_o.max(1e-9);
    Ok(ResetCrossCheck {
        analytic,
        simulated: ss,
        rel,
        events_canonical: events_canonical(&events),
        energy_rel,
        cd_charge_rel,
        volt_sec_rel,
        transfer_rel: rel_dev(ss.v_co_mean, op.v_o, 1.0),
    })
}

/// True when one period's worth of labels is a rotation of the canonical
/// six-phase cycle.
pub fn events_canonical(events: &EventLog) -> bool {
    let labels: Vec<PhaseLabel> = events.iter().map(|e| e.label).collect();
    if labels.len() != PhaseLabel::CYCLE.len() {
        return false;
    }
    let cycle = PhaseLabel::CYCLE;
    (0..cycle.len()).any(|shift| {
        labels
            .iter()
            .enumerate()
            .all(|(k, l)| *l == cycle[(k + shift) % cycle.len()])
    })
}

/// Small-signal responses vs AC sweep on a shared grid.
pub fn smallsig_cross_check(
    p: &ValidatedParams,
    op: &OperatingPoint,
    target: SweepTarget,
    freqs: &[f64],
    dt_max: f64,
) -> Result<DeviationReport> {
    let (_, tfs) = build_model(p, op);
    let tf = match target {
        SweepTarget::Gvd => tfs.gvd,
        SweepTarget::Gvv => tfs.gvv,
        SweepTarget::Zo => tfs.zo,
    };
    let analytic = bode(&tf, freqs);
    let sol = solve_reset(p, op).ok();
    let warm = sol
        .as_ref()
        .map(|s| (op.i_l, s.i_lm_min, op.v_o))
        .unwrap_or((op.i_l, 0.0, op.v_o));
    let (ss, _, _, _) = periodic_steady_state(p, op, dt_max, Some(warm))?;
    let (points, _warnings) = ac_sweep(
        p,
        op,
        target,
        freqs,
        SweepAmplitude::default(),
        &ss.state_at_period_start,
        dt_max,
    )?;
    let sim_bode = to_bode(&points);
    compare_with_simulation(&analytic, &sim_bode, p.f_sw)
}

/// Default comparison grid for the small-signal cross-check.
pub fn default_grid(p: &ValidatedParams, points: usize) -> Vec<f64> {
    commensurate_grid(10.0, 0.25 * p.f_sw, points, p.f_sw, 20)
}

/// Duty limit of a validated parameter set, if the reset is feasible.
pub fn duty_limit(p: &ValidatedParams) -> Option<f64> {
    max_duty(resonant_profile(p).f_res, p.f_sw).ok()
}
