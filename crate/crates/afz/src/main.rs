//! Command-line surface of the workbench.

use afz::config::{self, WorkbenchConfig};
use afz::converter::{
    cd_upper_bound, max_duty, power_split, prototype_params, resonant_profile,
    validate_params, OperatingPoint, ValidatedParams,
};
use afz::error::{AfzError, Warning};
use afz::losses::estimate_conduction_losses;
use afz::planner::{
    derive_design_spec, enumerate_configs, scenario_points, PlantSpec, ScenarioPoints, Shading,
};
use afz::report::{
    emit_bode_csv, emit_events_csv, emit_waveform_csv, format_engineering,
    RunMeta, TextTable,
};
use afz::reset::{interval_times, operating_warnings, ripple, solve_reset, stresses};
use afz::sim::acsweep::{ac_sweep, to_bode, SweepAmplitude, SweepTarget};
use afz::sim::run_transient;
use afz::smallsig::{bode, build_model};
use afz::waveform::synthesize_waveforms;
use afz::xcheck;
use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "afz", version, about = "AFZ converter analysis workbench")]
struct Cli {
    /// Suppress run metadata (timestamps) in emitted files.
    #[arg(long, global = true)]
    no_meta: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state report: reset solution, interval times, stresses,
    /// power split, ripple, conduction-loss bound.
    Analyze {
        config: PathBuf,
        /// Write the synthesized waveforms as CSV to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Duty override (replaces the operating-point value).
        #[arg(long)]
        duty: Option<f64>,
    },
    /// Transient simulation: waveform CSV plus event-log CSV.
    Simulate {
        config: PathBuf,
        /// Number of switching periods to integrate.
        #[arg(long)]
        periods: Option<usize>,
        /// Integration step ceiling in seconds.
        #[arg(long)]
        dt_max: Option<f64>,
        /// Output file prefix; writes <prefix>_waveforms.csv and
        /// <prefix>_events.csv.
        #[arg(long, default_value = "afz_sim")]
        out_prefix: String,
    },
    /// Analytical frequency response, optionally overlaid with the
    /// switching-simulation sweep.
    Bode {
        config: PathBuf,
        #[arg(long, value_enum)]
        tf: TfArg,
        /// Also run the sinusoidal-injection sweep and emit its columns.
        #[arg(long)]
        simulate: bool,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Design procedure: turns-ratio selection, reset-capacitor bound,
    /// component stress requirements.
    Design { config: PathBuf },
    /// Ranked string/panel plant configurations.
    Plan {
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        limit: usize,
    },
    /// Mismatch scenario operating points and the converter design
    /// envelope they imply.
    Scenario { config: PathBuf },
    /// Full cross-validation of the analytic layer against the simulator;
    /// exits nonzero on any tolerance breach.
    Verify { config: PathBuf },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TfArg {
    Gvd,
    Gvv,
    Zo,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(failed_verification) => {
            if failed_verification {
                std::process::exit(4);
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn load_config(path: &Path) -> afz::Result<WorkbenchConfig> {
    let text = fs::read_to_string(path)?;
    config::parse_config(&text, &path.to_string_lossy())
}

/// Map a validation failure back to the config line that caused it.
fn located(cfg: &WorkbenchConfig, err: AfzError) -> AfzError {
    if let AfzError::NonPositiveValue { field, value } = &err {
        if let Some(entry) = cfg.entry("converter", field) {
            return AfzError::ConfigValue {
                path: cfg.path.clone(),
                line: entry.line,
                msg: format!("{field} must be strictly positive (got {value})"),
            };
        }
    }
    err
}

fn converter_from(cfg: &WorkbenchConfig) -> afz::Result<ValidatedParams> {
    let raw = cfg.converter_params()?;
    validate_params(raw).map_err(|e| located(cfg, e))
}

fn operating_point_from(cfg: &WorkbenchConfig, p: &ValidatedParams) -> afz::Result<OperatingPoint> {
    let (v_i, duty, v_o, p_o) = cfg.operating_point_raw()?;
    match (duty, v_o) {
        (Some(d), _) => OperatingPoint::from_duty(p, v_i, d, p_o),
        (None, Some(v_o)) => OperatingPoint::from_target_voltage(p, v_i, v_o, p_o),
        _ => unreachable!("validated by operating_point_raw"),
    }
}

fn plant_from(cfg: &WorkbenchConfig) -> afz::Result<PlantSpec> {
    if !cfg.has_section("plant") {
        return Err(AfzError::MissingConfig {
            what: "section [plant]".into(),
        });
    }
    let get = |key: &str| {
        cfg.get("plant", key).ok_or_else(|| AfzError::MissingConfig {
            what: format!("key `{key}` in section [plant]"),
        })
    };
    let mut spec = PlantSpec::new(
        get("p_plant")?,
        get("v_string")?,
        get("panel_p_mpp")?,
        get("panel_v_mpp")?,
    );
    if let Some(v) = cfg.get("plant", "panels_per_string_min") {
        spec.panels_per_string.0 = v as usize;
    }
    if let Some(v) = cfg.get("plant", "panels_per_string_max") {
        spec.panels_per_string.1 = v as usize;
    }
    if let Some(v) = cfg.get("plant", "min_total_panels") {
        spec.min_total_panels = Some(v as usize);
    }
    if let Some(v) = cfg.get("plant", "extra_panels") {
        spec.extra_panels = v as usize;
    }
    Ok(spec)
}

fn shading_from(cfg: &WorkbenchConfig) -> Option<Shading> {
    if !cfg.has_section("scenario") {
        return None;
    }
    Some(Shading {
        fraction: cfg.get("scenario", "shaded_fraction").unwrap_or(0.0),
        shaded_v_mpp: cfg.get("scenario", "shaded_v_mpp").unwrap_or(0.0),
        shaded_p_mpp: cfg.get("scenario", "shaded_p_mpp").unwrap_or(0.0),
    })
}

fn print_warnings(warnings: &[Warning]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn meta_for(cfg: &WorkbenchConfig, no_meta: bool) -> Option<RunMeta> {
    if no_meta {
        None
    } else {
        Some(RunMeta::new(config::config_hash(cfg)))
    }
}

fn run(cli: Cli) -> afz::Result<bool> {
    match cli.command {
        Command::Analyze { config, csv, duty } => {
            let cfg = load_config(&config)?;
            let p = converter_from(&cfg)?;
            let mut op = operating_point_from(&cfg, &p)?;
            if let Some(d) = duty {
                op = OperatingPoint::from_duty(&p, op.v_i, d, op.p_o)?;
            }
            analyze(&cfg, &p, &op, csv.as_deref(), cli.no_meta)?;
            Ok(false)
        }
        Command::Simulate {
            config,
            periods,
            dt_max,
            out_prefix,
        } => {
            let cfg = load_config(&config)?;
            let p = converter_from(&cfg)?;
            let op = operating_point_from(&cfg, &p)?;
            let n_periods = periods
                .or(cfg.get("simulation", "periods").map(|v| v as usize))
                .unwrap_or(200);
            let dt = dt_max
                .or(cfg.get("simulation", "dt_max"))
                .unwrap_or(p.t_sw() / 4000.0);
            let res = run_transient(&p, &op, n_periods, dt, 2)?;
            print_warnings(&res.diagnostics);
            let meta = meta_for(&cfg, cli.no_meta);
            let wf_path = format!("{out_prefix}_waveforms.csv");
            let ev_path = format!("{out_prefix}_events.csv");
            let mut f = fs::File::create(&wf_path)?;
            emit_waveform_csv(&mut f, &res.waveforms, meta.as_ref())?;
            let mut f = fs::File::create(&ev_path)?;
            emit_events_csv(&mut f, &res.events, meta.as_ref())?;
            println!("wrote {wf_path} and {ev_path}");
            println!(
                "final state: i_l = {} A, i_lm = {} A, v_co = {} V",
                format_engineering(res.final_state.i_l),
                format_engineering(res.final_state.i_lm),
                format_engineering(res.final_state.v_co),
            );
            Ok(false)
        }
        Command::Bode {
            config,
            tf,
            simulate,
            out,
        } => {
            let cfg = load_config(&config)?;
            let p = converter_from(&cfg)?;
            let op = operating_point_from(&cfg, &p)?;
            let (_, tfs) = build_model(&p, &op);
            let target = match tf {
                TfArg::Gvd => SweepTarget::Gvd,
                TfArg::Gvv => SweepTarget::Gvv,
                TfArg::Zo => SweepTarget::Zo,
            };
            let rational = match target {
                SweepTarget::Gvd => tfs.gvd,
                SweepTarget::Gvv => tfs.gvv,
                SweepTarget::Zo => tfs.zo,
            };
            let f_min = cfg.get("sweep", "f_min").unwrap_or(10.0);
            let f_max = cfg.get("sweep", "f_max").unwrap_or(0.25 * p.f_sw);
            let points = cfg.get("sweep", "points").unwrap_or(10.0) as usize;
            let freqs =
                afz::sim::acsweep::commensurate_grid(f_min, f_max, points, p.f_sw, 20);
            let analytic = bode(&rational, &freqs);
            let simulated = if simulate {
                let sol = solve_reset(&p, &op)?;
                let (ss, _, _, _) = afz::sim::periodic_steady_state(
                    &p,
                    &op,
                    p.t_sw() / 2000.0,
                    Some((op.i_l, sol.i_lm_min, op.v_o)),
                )?;
                let mut amp = SweepAmplitude::default();
                if let Some(a) = cfg.get("sweep", "amplitude") {
                    amp.duty = a;
                }
                let (pts, warns) = ac_sweep(
                    &p,
                    &op,
                    target,
                    &freqs,
                    amp,
                    &ss.state_at_period_start,
                    p.t_sw() / 2000.0,
                )?;
                print_warnings(&warns);
                Some(to_bode(&pts))
            } else {
                None
            };
            let meta = meta_for(&cfg, cli.no_meta);
            match out {
                Some(path) => {
                    let mut f = fs::File::create(&path)?;
                    emit_bode_csv(&mut f, &analytic, simulated.as_deref(), meta.as_ref())?;
                    println!("wrote {}", path.display());
                }
                None => {
                    let mut stdout = std::io::stdout();
                    emit_bode_csv(&mut stdout, &analytic, simulated.as_deref(), meta.as_ref())?;
                }
            }
            Ok(false)
        }
        Command::Design { config } => {
            let cfg = load_config(&config)?;
            design(&cfg)?;
            Ok(false)
        }
        Command::Plan { config, limit } => {
            let cfg = load_config(&config)?;
            let spec = plant_from(&cfg)?;
            let rows = enumerate_configs(&spec, limit)?;
            println!(
                "{:>8} {:>14} {:>13} {:>10} {:>8}",
                "strings", "panels/string", "total panels", "V_out (V)", "dV (V)"
            );
            for r in rows {
                println!(
                    "{:>8} {:>14} {:>13} {:>10.2} {:>8.2}",
                    r.strings, r.panels_per_string, r.total_panels, r.v_out, r.delta_v
                );
            }
            Ok(false)
        }
        Command::Scenario { config } => {
            let cfg = load_config(&config)?;
            scenario(&cfg)?;
            Ok(false)
        }
        Command::Verify { config } => {
            let cfg = load_config(&config)?;
            let failed = verify(&cfg)?;
            Ok(failed)
        }
    }
}

fn analyze(
    cfg: &WorkbenchConfig,
    p: &ValidatedParams,
    op: &OperatingPoint,
    csv: Option<&Path>,
    no_meta: bool,
) -> afz::Result<()> {
    let prof = resonant_profile(p);
    let rip = ripple(p, op);
    let sol = solve_reset(p, op)?;
    let warnings = operating_warnings(p, op, Some(&sol));
    print_warnings(&warnings);

    let mut t = TextTable::new("Operating point");
    t.num("V_i", op.v_i, "V")
        .num("duty", op.duty, "")
        .num("V_o", op.v_o, "V")
        .num("P_o", op.p_o, "W")
        .num("I_L (string)", op.i_l, "A")
        .num("R_load", op.r_load, "ohm");
    println!("{}", t.render());

    let mut t = TextTable::new("Resonant reset");
    t.num("f_res", prof.f_res, "Hz")
        .num("f_res (simplified)", prof.f_res_simple, "Hz")
        .num("f_resk", prof.f_resk, "Hz")
        .num("C_eq", prof.c_eq, "F")
        .num("L_k (referred)", prof.l_k, "H");
    match max_duty(prof.f_res, p.f_sw) {
        Ok(d_max) => {
            t.num("D_max", d_max, "");
        }
        Err(e) => {
            t.row("D_max", format!("unavailable ({e})"));
        }
    }
    t.num("I_Lm_min", sol.i_lm_min, "A")
        .num("I_Lm_max", sol.i_lm_max, "A")
        .num("V_Cd_min", sol.v_cd_min, "V")
        .num("V_Cd(t2)", sol.v_cd_t2, "V")
        .num("V_Cd(t3)", sol.v_cd_t3, "V")
        .row(
            "residuals",
            format!(
                "{:.2e} {:.2e} {:.2e}",
                sol.residuals[0], sol.residuals[1], sol.residuals[2]
            ),
        );
    println!("{}", t.render());

    match interval_times(p, op, &sol) {
        Ok(times) => {
            let d = times.durations();
            let mut t = TextTable::new("Interval durations");
            let names = ["t_ON", "t_OFF-T", "t_OFF1", "t_OFF2", "t_OFF3", "t_ON-T"];
            for (name, dur) in names.iter().zip(d) {
                t.num(name, dur, "s");
            }
            println!("{}", t.render());

            let s = stresses(p, op, &sol, &times);
            let mut t = TextTable::new("Component stresses");
            t.num("V_DS_max", s.v_ds_max, "V")
                .num("V_D1_max", s.v_d1_max, "V")
                .num("V_D2 (on)", s.v_d2_on, "V")
                .num("I_S mean", s.i_s_mean, "A")
                .num("I_D1 mean", s.i_d1_mean, "A")
                .num("I_D2 mean", s.i_d2_mean, "A")
                .num("dI_L", s.delta_i_l, "A")
                .num("dI_Lm", s.delta_i_lm, "A")
                .num("I_L_min", s.i_l_min, "A");
            println!("{}", t.render());

            let wf = synthesize_waveforms(
                p,
                op,
                &sol,
                &times,
                cfg.get("simulation", "samples_per_period").unwrap_or(2048.0) as usize,
            );
            let loss = estimate_conduction_losses(p, op, &wf, false)?;
            let mut t = TextTable::new("Conduction-loss bound");
            for (name, w) in &loss.breakdown {
                t.num(name, *w, "W");
            }
            t.num("total", loss.p_loss, "W")
                .num("eta_cond (upper bound)", loss.eta_cond, "");
            println!("{}", t.render());

            if let Some(path) = csv {
                let meta = meta_for(cfg, no_meta);
                let mut f = fs::File::create(path)?;
                emit_waveform_csv(&mut f, &wf, meta.as_ref())?;
                println!("wrote {}", path.display());
            }
        }
        Err(e) => {
            eprintln!("warning: interval times unavailable: {e}");
        }
    }

    let split = power_split(op.p_o, p.turns_ratio)?;
    let mut t = TextTable::new("Autotransformer power split");
    t.num("P_mag", split.p_mag, "W")
        .num("P_noMag", split.p_no_mag, "W")
        .row(
            "ratio",
            format!(
                "{:.1} % / {:.1} %",
                100.0 * split.mag_ratio,
                100.0 * split.no_mag_ratio
            ),
        );
    println!("{}", t.render());

    let _ = rip;
    Ok(())
}

fn design(cfg: &WorkbenchConfig) -> afz::Result<()> {
    let p = converter_from(cfg)?;
    let spec = plant_from(cfg)?;
    let shading = shading_from(cfg).unwrap_or(Shading {
        fraction: 0.25,
        shaded_v_mpp: 15.0,
        shaded_p_mpp: 67.5,
    });
    let best = enumerate_configs(&spec, 1)?
        .into_iter()
        .next()
        .ok_or_else(|| AfzError::MissingConfig {
            what: "a feasible plant configuration".into(),
        })?;
    let s0 = scenario_points(&best, &spec, &Shading::none())?;
    let s1 = scenario_points(&best, &spec, &shading)?;
    let d_max = 0.75;

    // Smallest turns ratio that reaches the highest required output from
    // its own panel voltage within the duty limit.
    let mut n_min: f64 = 0.0;
    let mut fold = |class: &afz::planner::ConverterClass| {
        n_min = n_min.max(class.v_out / (d_max * class.v_in) - 1.0);
    };
    fold(&s0.non_shaded);
    fold(&s1.non_shaded);
    if let Some(sh) = &s1.shaded {
        fold(sh);
    }
    let n = p.turns_ratio;

    let envelope = derive_design_spec(&[&s0, &s1], n, d_max)?;
    let c_d_bound = cd_upper_bound(d_max, p.f_sw, p.l_m)?;

    let mut t = TextTable::new("Design inputs");
    t.row(
        "plant",
        format!(
            "{} strings x {} panels, V_out = {:.2} V",
            best.strings, best.panels_per_string, best.v_out
        ),
    )
    .num("V_i min", envelope.v_in.0, "V")
    .num("V_i max", envelope.v_in.1, "V")
    .num("V_o min", envelope.v_out.0, "V")
    .num("V_o max", envelope.v_out.1, "V")
    .num("P max", envelope.power.1, "W")
    .num("D_max (design)", d_max, "");
    println!("{}", t.render());

    let mut t = TextTable::new("Turns ratio selection");
    t.num("minimum n for full range", n_min, "")
        .num("configured n", n, "");
    if n < n_min {
        t.row("note", "configured n cannot reach V_o max at D_max".into());
    }
    println!("{}", t.render());

    // Worst-case stresses at the highest step-up point.
    let worst = OperatingPoint::from_target_voltage(
        &p,
        s1.non_shaded.v_in,
        s1.non_shaded.v_out,
        s1.non_shaded.p_mic,
    )?;
    let sol = solve_reset(&p, &worst)?;
    let times = interval_times(&p, &worst, &sol);
    let mut t = TextTable::new("Component requirements (worst case)");
    t.num("C_d upper bound", c_d_bound, "F")
        .num("configured C_d", p.c_d, "F");
    if p.c_d > c_d_bound {
        t.row(
            "note",
            "configured C_d exceeds the bound: duty limit falls below D_max".into(),
        );
    }
    match times {
        Ok(times) => {
            let s = stresses(&p, &worst, &sol, &times);
            t.num("S: V_DS_max", s.v_ds_max, "V")
                .num("S: I_S mean", s.i_s_mean, "A")
                .num("D1: V_rev max", s.v_d1_max, "V")
                .num("D1: I mean", s.i_d1_mean, "A")
                .num("D2: V_rev", s.v_d2_on, "V")
                .num("D2: I mean", s.i_d2_mean, "A")
                .num("Dd1/Dd2: V_rev max", s.v_ds_max, "V")
                .num("Dd1/Dd2: I mean", s.i_dd1_mean, "A")
                .num("L: I peak", worst.i_l + 0.5 * s.delta_i_l, "A")
                .num("autotransformer: dI_Lm", s.delta_i_lm, "A");
        }
        Err(e) => {
            t.row("stresses", format!("unavailable at this C_d ({e})"));
        }
    }
    println!("{}", t.render());
    Ok(())
}

fn scenario(cfg: &WorkbenchConfig) -> afz::Result<()> {
    let spec = plant_from(cfg)?;
    let shading = shading_from(cfg).ok_or_else(|| AfzError::MissingConfig {
        what: "section [scenario]".into(),
    })?;
    let best = enumerate_configs(&spec, 1)?
        .into_iter()
        .next()
        .ok_or_else(|| AfzError::MissingConfig {
            what: "a feasible plant configuration".into(),
        })?;
    let s0 = scenario_points(&best, &spec, &Shading::none())?;
    let s1 = scenario_points(&best, &spec, &shading)?;

    let print_scenario = |name: &str, s: &ScenarioPoints| {
        let mut t = TextTable::new(name);
        t.num("P_string", s.p_string, "W")
            .num("I_string", s.i_string, "A")
            .num("non-shaded: P_MIC", s.non_shaded.p_mic, "W")
            .num("non-shaded: V_in", s.non_shaded.v_in, "V")
            .num("non-shaded: V_out", s.non_shaded.v_out, "V");
        if let Some(sh) = &s.shaded {
            t.num("shaded: P_MIC", sh.p_mic, "W")
                .num("shaded: V_in", sh.v_in, "V")
                .num("shaded: V_out", sh.v_out, "V")
                .num("shaded panels per string", sh.count, "");
        }
        println!("{}", t.render());
    };
    print_scenario("Scenario 0 (uniform)", &s0);
    print_scenario("Scenario 1 (partial shading)", &s1);

    let n = cfg
        .get("converter", "n")
        .unwrap_or(prototype_params().turns_ratio);
    let envelope = derive_design_spec(&[&s0, &s1], n, 0.75)?;
    let mut t = TextTable::new("Converter design envelope");
    t.row(
        "V_i",
        format!(
            "[{:.3}, {:.3}] V",
            envelope.v_in.0, envelope.v_in.1
        ),
    )
    .row(
        "V_o",
        format!(
            "[{:.3}, {:.3}] V (+/- {:.0} %)",
            envelope.v_out.0,
            envelope.v_out.1,
            100.0 * envelope.v_out_tolerance
        ),
    )
    .row(
        "duty",
        format!("[{:.4}, {:.4}]", envelope.duty.0, envelope.duty.1),
    )
    .row(
        "P",
        format!("[{:.1}, {:.1}] W", envelope.power.0, envelope.power.1),
    );
    println!("{}", t.render());
    Ok(())
}

fn verify(cfg: &WorkbenchConfig) -> afz::Result<bool> {
    let p = converter_from(cfg)?;
    let op = operating_point_from(cfg, &p)?;
    let dt = cfg.get("simulation", "dt_max").unwrap_or(p.t_sw() / 2000.0);
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        if ok {
            println!("ok    {name}: {detail}");
        } else {
            failures += 1;
            println!("FAIL  {name}: {detail}");
        }
    };

    // Reset solver residuals.
    let sol = solve_reset(&p, &op)?;
    let max_res = sol
        .residuals
        .iter()
        .fold(0.0f64, |a, r| a.max(r.abs()));
    check(
        "reset residuals",
        max_res < 1e-9,
        format!("max |residual| = {max_res:.2e}"),
    );

    let d_max = xcheck::duty_limit(&p);
    let rip = ripple(&p, &op);
    let reachable = d_max.map_or(false, |dm| op.duty < dm) && !rip.dcm;
    if reachable {
        let xc = xcheck::reset_cross_check(&p, &op, dt)?;
        check(
            "reset cross-check",
            xc.rel.iter().all(|r| *r < 0.02),
            format!(
                "dev (I_Lm_min, V_Cd_min, V_Cd_t3) = {:.3} % {:.3} % {:.3} %",
                100.0 * xc.rel[0],
                100.0 * xc.rel[1],
                100.0 * xc.rel[2]
            ),
        );
        check(
            "transfer ratio",
            xc.transfer_rel < 0.02,
            format!("sim mean V_o off by {:.3} %", 100.0 * xc.transfer_rel),
        );
        check(
            "event order",
            xc.events_canonical,
            "settled period traverses the six phases in order".into(),
        );
        check(
            "energy audit",
            xc.energy_rel < 0.005,
            format!("in/out imbalance {:.3} %", 100.0 * xc.energy_rel),
        );
        check(
            "charge balance",
            xc.cd_charge_rel < 1e-3,
            format!("mean C_d current {:.2e} of I_L", xc.cd_charge_rel),
        );
        check(
            "volt-second balance",
            xc.volt_sec_rel < 0.005,
            format!("mean v_L {:.3} % of V_o", 100.0 * xc.volt_sec_rel),
        );
    } else {
        println!(
            "skip  reset cross-check: operating point outside the complete-reset \
             CCM region (D_max = {}, DCM = {})",
            d_max.map_or("n/a".into(), |d| format!("{d:.4}")),
            rip.dcm
        );
    }

    // Small-signal spot check at three in-band frequencies.
    let grid = xcheck::default_grid(&p, 3);
    let rep = xcheck::smallsig_cross_check(&p, &op, SweepTarget::Gvd, &grid, dt)?;
    check(
        "small-signal Gvd",
        rep.max_mag_db < 3.0 && rep.max_phase_deg < 10.0,
        format!(
            "max dev {:.2} dB / {:.2} deg over {} points",
            rep.max_mag_db,
            rep.max_phase_deg,
            rep.rows.len()
        ),
    );

    if failures == 0 {
        println!("verification passed");
    } else {
        println!("verification failed: {failures} check(s)");
    }
    Ok(failures > 0)
}
