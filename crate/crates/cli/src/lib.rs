//! Command-line front end: JSON inputs, one report per run and the exit-code
//! contract 0 pass, 1 failure, 2 input error, 3 undecided.

pub mod commands;
pub mod io;
pub mod report;
pub mod reproduce;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use seqmeas::feasibility::SolverOptions;

use crate::commands::Ctx;
use crate::io::{read_config, write_json, InputError, InputResult};
use crate::report::{summary_lines, Report, RunOptions, EXIT_INPUT};

#[derive(Debug, Parser)]
#[command(name = "seqmeas", version, about = "Sequential measurement toolkit: joint measurability, universal channels and conjugate-channel tests")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Solver and check tolerance (overrides feas.tol).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Iteration budget of the feasibility solver (overrides feas.max_iters).
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// TOML file with a [feas] table (keys tol, max_iters).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long, global = true)]
    pub json_out: Option<PathBuf>,
    /// Restrict reproduce-paper to these checks (repeatable or comma separated).
    #[arg(long, global = true)]
    pub only: Vec<String>,
    /// Seed of the randomized reproduce-paper checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a POVM (positivity, normalization) or a channel (CPTP).
    Validate { path: PathBuf },
    /// Decide whether two observables are jointly measurable.
    Joint {
        a: PathBuf,
        b: PathBuf,
        /// Use the closed-form criterion for unbiased binary qubit observables.
        #[arg(long)]
        exact_qubit: bool,
        /// Write the joint observable here when one is found.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Build the universal A-channel; with B, also the compensating B′.
    Universal {
        a: PathBuf,
        b: Option<PathBuf>,
        /// Joint observable of A and B to use instead of a solver search.
        #[arg(long)]
        joint: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Is the conjugate channel a B-channel? On success recovers B′.
    ConjugateTest {
        channel: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Does the channel leave every effect of B unchanged?
    Nondisturb { channel: PathBuf, b: PathBuf },
    /// Naimark dilation of an observable (minimal unless --canonical).
    Dilate {
        a: PathBuf,
        #[arg(long)]
        canonical: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the qubit examples end to end and write a report with artifacts.
    ReproducePaper {
        #[arg(long, default_value = "paper-report")]
        out_dir: PathBuf,
    },
}

/// Flags beat the config file, which beats the defaults.
pub fn solver_options(global: &Global) -> InputResult<SolverOptions> {
    let config = match &global.config {
        Some(path) => read_config(path)?,
        None => Default::default(),
    };
    let mut opts = SolverOptions::default();
    if let Some(tol) = global.tol.or(config.feas.tol) {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(InputError(format!("tolerance must be positive, got {tol}")));
        }
        opts = opts.with_tol(tol);
    }
    if let Some(n) = global.max_iters.or(config.feas.max_iters) {
        if n == 0 {
            return Err(InputError("max_iters must be positive".into()));
        }
        opts = opts.with_max_iters(n);
    }
    Ok(opts)
}

fn execute(cli: &Cli, argv: Vec<String>) -> InputResult<Report> {
    let opts = solver_options(&cli.global)?;
    let seed = matches!(cli.command, Command::ReproducePaper { .. })
        .then(|| cli.global.seed.unwrap_or(reproduce::DEFAULT_SEED));
    let mut report = Report::new(argv, RunOptions { tol: opts.tol, max_iters: opts.max_iters, seed });
    let mut ctx = Ctx::new(opts.clone());
    let checks = match &cli.command {
        Command::Validate { path } => commands::validate(&mut ctx, path)?,
        Command::Joint { a, b, exact_qubit, witness } => {
            commands::joint(&mut ctx, a, b, *exact_qubit, witness.as_deref())?
        }
        Command::Universal { a, b, joint, out_dir } => {
            commands::universal(&mut ctx, a, b.as_deref(), joint.as_deref(), out_dir.clone())?
        }
        Command::ConjugateTest { channel, b, out_dir } => commands::conjugate_test(&mut ctx, channel, b, out_dir.clone())?,
        Command::Nondisturb { channel, b } => commands::nondisturb(&mut ctx, channel, b)?,
        Command::Dilate { a, canonical, out } => commands::dilate(&mut ctx, a, *canonical, out.as_deref())?,
        Command::ReproducePaper { out_dir } => {
            let names = reproduce::selected(&cli.global.only)?;
            let mut harness = reproduce::Harness::new(opts, seed.expect("set for reproduce-paper"), Some(out_dir.clone()));
            let mut checks = Vec::with_capacity(names.len());
            for name in names {
                checks.push(harness.run(name)?);
            }
            checks
        }
    };
    report.inputs = ctx.inputs;
    for check in checks {
        report.push(check);
    }
    if let Command::ReproducePaper { out_dir } = &cli.command {
        write_json(&out_dir.join("report.json"), &report)?;
    }
    Ok(report)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    let argv = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, argv) {
        Ok(report) => {
            for line in summary_lines(&report) {
                println!("{line}");
            }
            if let Some(path) = &cli.global.json_out {
                if let Err(e) = write_json(path, &report) {
                    eprintln!("error: {e}");
                    return EXIT_INPUT;
                }
            }
            report.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
