//! Command-line driver for spiral-wave experiments in the tip-following
//! frame.
//!
//! Subcommands map one-to-one onto the library's experiment entry points:
//! `simulate` resolves a single parameter point, `sweep` runs a
//! continuation in beta, `shock` builds a conversion matrix from saved
//! snapshots, `convergence` repeats a sweep over refined discretizations,
//! and `reconstruct` turns a stored velocity series back into a tip path.
//!
//! Exit codes: 0 success, 2 configuration or input errors, 3 numerical
//! failures, 4 a run that ended without resolving a classification.

mod config;
mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::{Config, ConfigError};
use output::{RecordDirSink, RunStatus};
use rotor_core::quotient::{
    classify, detect_period, quotient_size, Classification, QuotientSeries,
};
use rotor_core::runner::run_to_classification;
use rotor_core::shock::{run_conversion, ShockSpec};
use rotor_core::snapshot::{read_snapshot, state_hash};
use rotor_core::sweep::{
    bifurcation_summary, find_bifurcation_points, run_sweep, ConvergenceVariant, SeedState,
    SweepRecord, SweepResult, SweepSpec,
};
use rotor_core::trajectory::reconstruct_tip;
use rotor_core::{SimError, SimState};

#[derive(Parser)]
#[command(name = "rotor", version, about = "Spiral-wave dynamics in a tip-following frame")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one parameter point to a motion classification.
    Simulate(RunArgs),
    /// Continuation sweep over a range of beta values.
    Sweep(RunArgs),
    /// Shock-conversion matrix from saved snapshots.
    Shock(RunArgs),
    /// Repeat a sweep over a family of refined discretizations.
    Convergence(RunArgs),
    /// Rebuild a tip path from a stored velocity series.
    Reconstruct {
        /// A quotient.csv written by another command.
        series: PathBuf,
        /// Output directory; defaults to the directory holding the series.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value parameter file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides out.dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep finished record directories and continue from the last snapshot.
    #[arg(long)]
    resume: bool,
    /// Cap on steps per classification run, overriding policy.max_steps.
    #[arg(long = "max-steps")]
    max_steps: Option<u64>,
}

enum CliError {
    Config(String),
    Sim(SimError),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Sim(SimError::Io(e))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Sim(e) => write!(f, "{e}"),
        }
    }
}

fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Config(_) => 2,
        CliError::Sim(e) => match e {
            SimError::Unresolved { .. } => 4,
            SimError::InvalidNumerics(_)
            | SimError::InvalidModel(_)
            | SimError::InvalidSweep(_)
            | SimError::NoRealRoot { .. }
            | SimError::NotEngaged
            | SimError::MissingSnapshot(_)
            | SimError::Parse { .. } => 2,
            _ => 3,
        },
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Shock(args) => cmd_shock(&args),
        Command::Convergence(args) => cmd_convergence(&args),
        Command::Reconstruct { series, out } => cmd_reconstruct(&series, out.as_deref()),
    };
    if let Err(err) = result {
        eprintln!("rotor: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn cmd_simulate(args: &RunArgs) -> CliResult<()> {
    let cfg = Config::load(&args.config)?;
    let out = cfg.out_dir(args.out.as_deref())?;
    std::fs::create_dir_all(&out)?;
    let numerics = cfg.numerics()?;
    let policy = cfg.policy(args.max_steps)?;
    let mut state = match cfg.seed("simulate.seed") {
        SeedState::Fresh => {
            let model = cfg.model()?;
            let pin = cfg.pin(numerics.n)?;
            let mut s = SimState::fresh_spiral(model, numerics, pin).map_err(CliError::Sim)?;
            s.engage_frame()?;
            s
        }
        SeedState::Snapshot(path) => {
            let mut s = read_snapshot(&path, cfg.diffusion()?)?;
            if !s.advection_engaged {
                s.engage_frame()?;
            }
            s
        }
    };
    output::write_manifest(&out, "simulate", &args.config, RunStatus::Running, 0, 1, None)?;
    let hash_before = state_hash(&state)?;
    let fixed_steps: Option<u64> = cfg.get_opt("simulate.steps")?;
    let (classification, q_s, period, n_periods, steps_run) = match fixed_steps {
        Some(n) => {
            state.reset_record();
            if let Err(e) = state.run(n) {
                return Err(fail_run(&out, "simulate", &args.config, 0, 1, Some(&state), e));
            }
            let (class, q_s, period, arcs) = measure_record(&state.record, policy.tol);
            (class, q_s, period, arcs, n)
        }
        None => match run_to_classification(&mut state, &policy) {
            Ok(o) => (o.classification, o.q_s, o.period, o.n_periods, o.steps_run),
            Err(e) => {
                return Err(fail_run(&out, "simulate", &args.config, 0, 1, Some(&state), e));
            }
        },
    };
    let record = SweepRecord {
        beta: state.model.beta,
        q_s,
        classification,
        period,
        n_periods,
        steps_run,
        snapshot: None,
        hash_before,
        hash_after: state_hash(&state)?,
    };
    output::write_record_dir(&out, &record, &state)?;
    let note =
        (classification == Classification::Unresolved).then_some("classification unresolved");
    output::write_manifest(&out, "simulate", &args.config, RunStatus::Complete, 1, 1, note)?;
    if classification == Classification::Unresolved && fixed_steps.is_none() {
        return Err(CliError::Sim(SimError::Unresolved { steps: steps_run }));
    }
    Ok(())
}

/// Post-hoc measurement of a fixed-duration record, using the same
/// published analysis helpers a classification run applies incrementally.
fn measure_record(qs: &QuotientSeries, tol: f64) -> (Classification, f64, Option<f64>, usize) {
    let class = classify(qs, tol);
    match class {
        Classification::Rw => (class, 0.0, detect_period(qs), 0),
        Classification::Mrw => {
            let Some(period) = detect_period(qs) else {
                return (Classification::Unresolved, f64::NAN, None, 0);
            };
            match quotient_size(qs, period, qs.len() / 2) {
                Ok((q_s, n)) => (class, q_s, Some(period), n),
                Err(_) => (Classification::Unresolved, f64::NAN, Some(period), 0),
            }
        }
        _ => (class, f64::NAN, None, 0),
    }
}

fn fail_run(
    out: &Path,
    command: &str,
    cfg: &Path,
    done: usize,
    total: usize,
    state: Option<&SimState>,
    err: SimError,
) -> CliError {
    if let Some(s) = state {
        let _ = s.record.write_csv(&out.join("quotient.csv"));
    }
    let _ = output::write_manifest(
        out,
        command,
        cfg,
        RunStatus::Error,
        done,
        total,
        Some(&err.to_string()),
    );
    CliError::Sim(err)
}

fn sweep_spec_from(cfg: &Config, max_steps: Option<u64>) -> CliResult<SweepSpec> {
    let numerics = cfg.numerics()?;
    Ok(SweepSpec {
        beta_start: cfg.require("sweep.beta_start")?,
        beta_end: cfg.require("sweep.beta_end")?,
        dbeta: cfg.require("sweep.dbeta")?,
        gamma: cfg.get("model.gamma", 0.5)?,
        epsilon: cfg.get("model.epsilon", 0.2)?,
        diff: cfg.diffusion()?,
        numerics,
        pin: cfg.pin(numerics.n)?,
        policy: cfg.policy(max_steps)?,
        seed: cfg.seed("sweep.seed"),
    })
}

fn cmd_sweep(args: &RunArgs) -> CliResult<()> {
    let cfg = Config::load(&args.config)?;
    let out = cfg.out_dir(args.out.as_deref())?;
    let spec = sweep_spec_from(&cfg, args.max_steps)?;
    execute_sweep(&spec, &out, args.resume, "sweep", &args.config)?;
    Ok(())
}

/// Runs one sweep into `out`, honoring finished record directories when
/// resuming, and writes the top-level tables. Used by both `sweep` and each
/// grid of `convergence`.
fn execute_sweep(
    spec: &SweepSpec,
    out: &Path,
    resume: bool,
    command: &str,
    cfg_path: &Path,
) -> CliResult<SweepResult> {
    spec.validate()?;
    std::fs::create_dir_all(out)?;
    let betas = spec.beta_sequence();
    let total = betas.len();
    let done = if resume { scan_completed(out, &betas) } else { Vec::new() };
    output::write_manifest(out, command, cfg_path, RunStatus::Running, done.len(), total, None)?;

    let mut result = if done.len() == total {
        SweepResult { direction: spec.direction(), records: done, bifurcation_points: Vec::new() }
    } else {
        let tail_spec = match done.last() {
            None => spec.clone(),
            Some(last) => {
                let snap = last.snapshot.clone().expect("scan_completed keeps only snapshots");
                SweepSpec {
                    beta_start: betas[done.len()],
                    seed: SeedState::Snapshot(snap),
                    ..spec.clone()
                }
            }
        };
        let mut sink =
            RecordDirSink { root: out.to_path_buf(), base_index: done.len(), written: 0 };
        let tail = match run_sweep(&tail_spec, &mut sink) {
            Ok(r) => r,
            Err(e) => {
                return Err(fail_run(
                    out,
                    command,
                    cfg_path,
                    done.len() + sink.written,
                    total,
                    None,
                    e,
                ));
            }
        };
        if let (Some(last), Some(first)) = (done.last(), tail.records.first()) {
            if first.hash_before != last.hash_after {
                let msg = format!(
                    "resume mismatch in {}: finished records end in a different state than \
                     the continuation was seeded from",
                    out.display()
                );
                let _ = output::write_manifest(
                    out,
                    command,
                    cfg_path,
                    RunStatus::Error,
                    done.len(),
                    total,
                    Some(&msg),
                );
                return Err(CliError::Config(msg));
            }
        }
        let mut records = done;
        records.extend(tail.records);
        SweepResult { direction: spec.direction(), records, bifurcation_points: Vec::new() }
    };
    result.bifurcation_points = find_bifurcation_points(&result);

    result.write_csv(out.join("sweep.csv"))?;
    std::fs::write(
        out.join(format!("beta_qs_{}.csv", result.direction)),
        output::beta_qs_csv(&result),
    )?;
    std::fs::write(out.join("bifurcations.txt"), bifurcation_summary(&result, None))?;
    output::write_manifest(out, command, cfg_path, RunStatus::Complete, total, total, None)?;
    Ok(result)
}

/// Longest prefix of finished record directories matching the planned beta
/// grid. A record counts as finished when its summary parses, its beta
/// matches, and its snapshot file is still present.
fn scan_completed(out: &Path, betas: &[f64]) -> Vec<SweepRecord> {
    let mut done = Vec::new();
    for (k, &beta) in betas.iter().enumerate() {
        let dir = output::record_dir(out, k);
        let Ok(text) = std::fs::read_to_string(dir.join("summary.txt")) else { break };
        let Some(rec) = output::parse_record_summary(&text, &dir) else { break };
        if (rec.beta - beta).abs() > 1e-9 {
            break;
        }
        if !rec.snapshot.as_ref().is_some_and(|p| p.exists()) {
            break;
        }
        done.push(rec);
    }
    done
}

fn cmd_shock(args: &RunArgs) -> CliResult<()> {
    let cfg = Config::load(&args.config)?;
    let out = cfg.out_dir(args.out.as_deref())?;
    let diff = cfg.diffusion()?;
    let policy = cfg.policy(args.max_steps)?;
    let at_step: u64 = cfg.get("shock.at_step", 40_000)?;
    let amplitudes = cfg.get_f64_list("shock.amplitudes")?;
    if amplitudes.is_empty() {
        return Err(CliError::Config("shock.amplitudes must list at least one amplitude".into()));
    }
    let mut branches: Vec<(&str, PathBuf)> = Vec::new();
    if let Some(p) = cfg.get_str("shock.rw_snapshot") {
        branches.push(("rw", PathBuf::from(p)));
    }
    if let Some(p) = cfg.get_str("shock.mrw_snapshot") {
        branches.push(("mrw", PathBuf::from(p)));
    }
    if branches.is_empty() {
        return Err(CliError::Config(
            "shock needs shock.rw_snapshot and/or shock.mrw_snapshot".into(),
        ));
    }

    std::fs::create_dir_all(&out)?;
    let total = branches.len() * amplitudes.len();
    output::write_manifest(&out, "shock", &args.config, RunStatus::Running, 0, total, None)?;
    let mut matrix = String::from("beta,branch,amplitude,at_step,verdict\n");
    let mut finished = 0;
    for (branch, path) in &branches {
        let beta = match read_snapshot(path, diff) {
            Ok(s) => s.model.beta,
            Err(e) => {
                let _ = std::fs::write(out.join("matrix.csv"), &matrix);
                return Err(fail_run(&out, "shock", &args.config, finished, total, None, e));
            }
        };
        for &amplitude in &amplitudes {
            let spec = ShockSpec { amplitude, at_step };
            let outcome = match run_conversion(path, diff, &spec, &policy) {
                Ok(o) => o,
                Err(e) => {
                    let _ = std::fs::write(out.join("matrix.csv"), &matrix);
                    return Err(fail_run(&out, "shock", &args.config, finished, total, None, e));
                }
            };
            let cell = out.join(format!("{branch}_a{amplitude}"));
            std::fs::create_dir_all(&cell)?;
            outcome.post_series.write_csv(&cell.join("quotient.csv"))?;
            let post = match outcome.post_class {
                Some(c) => c.to_string(),
                None => "none".to_string(),
            };
            let summary = format!(
                "branch={branch}\nbeta={beta:.16e}\namplitude={amplitude:.16e}\n\
                 at_step={at_step}\npre_class={}\npost_class={post}\nverdict={}\n",
                outcome.pre_class, outcome.verdict
            );
            std::fs::write(cell.join("summary.txt"), summary)?;
            matrix.push_str(&format!(
                "{beta:.16e},{branch},{amplitude:.16e},{at_step},{}\n",
                outcome.verdict
            ));
            finished += 1;
        }
    }
    std::fs::write(out.join("matrix.csv"), &matrix)?;
    output::write_manifest(&out, "shock", &args.config, RunStatus::Complete, total, total, None)?;
    Ok(())
}

const CONVERGENCE_USAGE: &str = "convergence needs convergence.variant (one of vary_dx_fix_ts, \
     vary_dx_fix_dt, vary_ts_fix_dx, vary_box) and a non-empty convergence.values list";

fn convergence_variant(cfg: &Config) -> CliResult<ConvergenceVariant> {
    let values = cfg.get_f64_list("convergence.values")?;
    let name = cfg.get_str("convergence.variant");
    let (Some(name), false) = (name, values.is_empty()) else {
        return Err(CliError::Config(CONVERGENCE_USAGE.into()));
    };
    match name {
        "vary_dx_fix_ts" => Ok(ConvergenceVariant::VaryDxFixTs { dx: values }),
        "vary_dx_fix_dt" => Ok(ConvergenceVariant::VaryDxFixDt { dx: values }),
        "vary_ts_fix_dx" => Ok(ConvergenceVariant::VaryTsFixDx { ts: values }),
        "vary_box" => Ok(ConvergenceVariant::VaryBox { box_size: values }),
        other => Err(CliError::Config(format!(
            "unknown convergence.variant {other:?}; {CONVERGENCE_USAGE}"
        ))),
    }
}

fn cmd_convergence(args: &RunArgs) -> CliResult<()> {
    let cfg = Config::load(&args.config)?;
    let out = cfg.out_dir(args.out.as_deref())?;
    let base = sweep_spec_from(&cfg, args.max_steps)?;
    let variant = convergence_variant(&cfg)?;
    let specs = rotor_core::sweep::convergence_specs(&base, &variant)?;

    std::fs::create_dir_all(&out)?;
    output::write_manifest(
        &out,
        "convergence",
        &args.config,
        RunStatus::Running,
        0,
        specs.len(),
        None,
    )?;
    let mut table = String::from("variant,n,box_size,dx,ts,dt,bifurcations\n");
    for (k, spec) in specs.iter().enumerate() {
        let sub = out.join(format!("var_{k:02}"));
        let result = match execute_sweep(spec, &sub, args.resume, "convergence", &args.config) {
            Ok(r) => r,
            Err(e) => {
                let _ = std::fs::write(out.join("grids.csv"), &table);
                let _ = output::write_manifest(
                    &out,
                    "convergence",
                    &args.config,
                    RunStatus::Error,
                    k,
                    specs.len(),
                    Some(&e.to_string()),
                );
                return Err(e);
            }
        };
        let pts: Vec<String> =
            result.bifurcation_points.iter().map(|b| format!("{b:.6}")).collect();
        let nm = &spec.numerics;
        table.push_str(&format!(
            "var_{k:02},{},{:.6e},{:.6e},{:.6e},{:.6e},{}\n",
            nm.n,
            nm.box_size,
            nm.dx,
            nm.ts,
            nm.dt,
            pts.join(";")
        ));
    }
    std::fs::write(out.join("grids.csv"), &table)?;
    output::write_manifest(
        &out,
        "convergence",
        &args.config,
        RunStatus::Complete,
        specs.len(),
        specs.len(),
        None,
    )?;
    Ok(())
}

fn cmd_reconstruct(series: &Path, out: Option<&Path>) -> CliResult<()> {
    let qs = QuotientSeries::read_csv(series)?;
    let tip = reconstruct_tip(&qs, 0.0, 0.0, 0.0);
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => series.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    std::fs::create_dir_all(&dir)?;
    tip.write_csv(dir.join("tip.csv"))?;
    Ok(())
}
