//! Command-line front end. `run_cli` returns the process exit code:
//! 0 success, 1 runtime error, 2 config error, 3 a gating verdict failed.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::boundary::Boundary;
use crate::check::invariant_suite;
use crate::config::{self, Built, Format, RunConfig};
use crate::error::{BmcError, Result};
use crate::simulator::{Functional, Scaling};
use crate::lab::{
    boundary_limit_study, disappear_study, green_study, gw_boundary_study, inequality_checks, martingale_study,
    per_step, positivity_study, StudyReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERDICT: i32 = 3;

/// Marker left in the output directory when a run aborts.
pub const FAILURE_MARKER: &str = "FAILED";

#[derive(Debug, Parser)]
#[command(name = "bmc", version, about = "Branching Markov chain lab: simulation, exact oracles and studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default `bmc-out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; BMC_THREADS takes precedence.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories and write per-step records.
    Simulate,
    /// Mean and median of the population martingale.
    Martingale,
    /// Positivity of the martingale limit.
    Positivity,
    /// Convergence of harmonic and empirical boundary averages.
    Boundary,
    /// Green identity for visits under branching.
    Disappear,
    /// Galton-Watson boundary coordinate.
    Gw,
    /// Green function, Martin kernel and spectral radius.
    Green,
    /// Laplace-transform inequalities.
    Inequalities,
    /// Invariant suite.
    Check,
    /// Hitting-measure masses of all cylinders to a depth.
    BoundaryTable {
        #[arg(long)]
        depth: Option<usize>,
    },
}

impl Command {
    pub fn study(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Martingale => "martingale",
            Command::Positivity => "positivity",
            Command::Boundary => "boundary",
            Command::Disappear => "disappear",
            Command::Gw => "gw",
            Command::Green => "green",
            Command::Inequalities => "inequalities",
            Command::Check => "check",
            Command::BoundaryTable { .. } => "boundary-table",
        }
    }
}

pub fn exit_code(e: &BmcError) -> i32 {
    match e {
        BmcError::Config { .. } => EXIT_CONFIG,
        _ => EXIT_ERROR,
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let mut out_dir = None;
    match execute(&cli, &mut out_dir) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("bmc: at least one gating verdict failed");
            EXIT_VERDICT
        }
        Err(e) => {
            eprintln!("bmc: {e}");
            if let Some(dir) = out_dir {
                let _ = fs::write(dir.join(FAILURE_MARKER), format!("{e}\n"));
            }
            exit_code(&e)
        }
    }
}

/// The configuration a command line resolves to.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let study = cli.command.study();
    let mut cfg = match &cli.config {
        Some(p) => config::load(p)?,
        None => config::default_config(study),
    };
    if let Some(s) = &cfg.experiment.study {
        if s != study {
            return Err(BmcError::config("experiment.study", format!("config is for `{s}`, not `{study}`")));
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(f) = cli.format {
        cfg.output.format = Some(f);
    }
    if let Command::BoundaryTable { depth: Some(d) } = cli.command {
        cfg.experiment.depth = Some(d);
    }
    cfg.resolve(study)
}

fn execute(cli: &Cli, out_dir: &mut Option<PathBuf>) -> Result<bool> {
    let study = cli.command.study();
    let resolved = resolve(cli)?;
    let format = resolved.output.format.unwrap_or_default();
    let dir = cli
        .out
        .clone()
        .or_else(|| resolved.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("bmc-out"));
    fs::create_dir_all(&dir)?;
    let marker = dir.join(FAILURE_MARKER);
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    *out_dir = Some(dir.clone());

    let runs = resolved.expand();
    let mut passed = true;
    for (i, run) in runs.iter().enumerate() {
        let suffix = if runs.len() > 1 { format!("_run{i}") } else { String::new() };
        let built = Built::new(run)?;
        let mut report = match study {
            "simulate" => simulate(&built, &dir, i as u64, &suffix)?,
            "boundary-table" => {
                boundary_table(&built, &dir, &suffix, format)?;
                continue;
            }
            _ => run_study(study, &built)?,
        };
        report.config = run.echo();
        write_report(&dir, &format!("{study}{suffix}"), &report, format)?;
        passed &= report.passed();
    }
    Ok(passed)
}

/// Dispatch one resolved configuration to its study.
pub fn run_study(study: &str, built: &Built) -> Result<StudyReport> {
    match study {
        "martingale" => martingale_study(&built.experiment()?, &built.martingale_params()),
        "positivity" => Ok(positivity_study(&built.experiment()?, &built.positivity_params())?.1),
        "boundary" => boundary_limit_study(&built.experiment()?, &built.boundary_params()?),
        "disappear" => disappear_study(&built.experiment()?, &built.disappear_params()?),
        "gw" => gw_boundary_study(&built.experiment()?, &built.gw_params()),
        "inequalities" => inequality_checks(&built.experiment()?, &built.inequality_params()?),
        "green" => green_study(&built.space, &built.green_params()?, built.config.seed),
        "check" => invariant_suite(&built.law, built.config.seed),
        other => Err(BmcError::config("experiment.study", format!("`{other}` is not a report-producing study"))),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// `{name}.json`, or `{name}_curves.csv`, `{name}_verdicts.csv` and the
/// echoed config as `{name}_config.json`.
pub fn write_report(dir: &Path, name: &str, report: &StudyReport, format: Format) -> Result<()> {
    match format {
        Format::Json => fs::write(dir.join(format!("{name}.json")), report.to_json()?)?,
        Format::Csv => {
            let mut w = create(&dir.join(format!("{name}_curves.csv")))?;
            report.write_curves_csv(&mut w)?;
            w.flush()?;
            let mut w = create(&dir.join(format!("{name}_verdicts.csv")))?;
            report.write_verdicts_csv(&mut w)?;
            w.flush()?;
            let mut text = serde_json::to_string_pretty(&report.config)?;
            text.push('\n');
            fs::write(dir.join(format!("{name}_config.json")), text)?;
        }
    }
    Ok(())
}

fn simulate(built: &Built, dir: &Path, run_id: u64, suffix: &str) -> Result<StudyReport> {
    let exp = built.experiment()?;
    let watched = built.watched()?;
    let names = built.config.experiment.watched.clone().unwrap_or_default();
    let snapshot_steps = built.config.experiment.snapshot_steps.clone().unwrap_or_default();
    if let Some(&n) = snapshot_steps.iter().find(|&&n| n > exp.horizon) {
        return Err(BmcError::config("experiment.snapshot_steps", format!("step {n} is past the horizon")));
    }
    let mut spec = crate::simulator::RunSpec::new(exp.initial.clone(), exp.horizon, exp.trajectories, exp.seed);
    spec.cap = exp.cap;
    spec.watched = watched;
    spec.threads = exp.threads;
    spec.snapshot_steps = snapshot_steps;
    // A test function adds its harmonic martingale and empirical average.
    if let Some(phi) = built.test_function()? {
        let b = Boundary::new(&built.space)?;
        let alphabet = b.alphabet();
        let phi2 = phi.clone();
        spec.functionals = vec![
            Functional::new("a", Scaling::Martingale, move |x| b.harmonic(&phi, x)),
            Functional::new("b", Scaling::Empirical, move |x| phi2.cone_extension(alphabet, x)),
        ];
    }
    let out = crate::simulator::run(&built.law, &spec)?;

    let mut w = create(&dir.join(format!("trajectories{suffix}.csv")))?;
    out.write_csv(run_id, &names, &mut w)?;
    w.flush()?;
    if !spec.snapshot_steps.is_empty() {
        let snaps = dir.join(format!("snapshots{suffix}"));
        fs::create_dir_all(&snaps)?;
        for t in &out.trajectories {
            for (n, m) in &t.snapshots {
                let mut w = create(&snaps.join(format!("traj{}_n{}.csv", t.id, n)))?;
                m.write_csv(&built.space, &mut w)?;
                w.flush()?;
            }
        }
    }

    let mut r = exp.report("simulate", &out);
    r.curve("w", &per_step(&out, |t, n| t.steps[n].w));
    r.curve("pop_size", &per_step(&out, |t, n| t.steps[n].pop_size as f64));
    r.curve("distinct_sites", &per_step(&out, |t, n| t.steps[n].distinct as f64));
    for (k, name) in names.iter().enumerate() {
        r.curve(&format!("M({name})"), &per_step(&out, |t, n| t.steps[n].watched[k] as f64));
    }
    for (k, name) in out.functional_names.iter().enumerate() {
        r.curve(name, &per_step(&out, |t, n| t.steps[n].functionals[k]));
    }
    Ok(r)
}

fn boundary_table(built: &Built, dir: &Path, suffix: &str, format: Format) -> Result<()> {
    let depth = built.config.experiment.depth.unwrap_or(4);
    if depth == 0 {
        return Err(BmcError::config("experiment.depth", "must be at least 1"));
    }
    let b = Boundary::new(&built.space).map_err(|e| match e {
        BmcError::Unsupported(what) => BmcError::config("state_space.type", format!("boundary tables need {what}")),
        other => other,
    })?;
    let m = built.initial()?;
    let table = b.kappa_population(&m, depth).map_err(|e| match e {
        BmcError::DepthTooLarge { .. } => BmcError::config("experiment.depth", e.to_string()),
        other => other,
    })?;
    let a = b.alphabet();
    match format {
        Format::Csv => {
            let mut w = create(&dir.join(format!("kappa_table{suffix}.csv")))?;
            table.write_csv(a, &mut w)?;
            w.flush()?;
        }
        Format::Json => {
            let rows: Vec<_> = table
                .masses
                .iter()
                .map(|(&v, &mass)| json!({"anchor_word": a.format(v), "depth": a.len(v), "mass": mass}))
                .collect();
            let doc = json!({
                "study": "boundary-table",
                "config": built.config.echo(),
                "depth": table.depth,
                "total": table.total,
                "consistency_residual": table.consistency_residual(a),
                "rows": rows,
            });
            let mut text = serde_json::to_string_pretty(&doc)?;
            text.push('\n');
            fs::write(dir.join(format!("kappa_table{suffix}.json")), text)?;
        }
    }
    Ok(())
}
