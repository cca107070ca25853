//! `tentlab` command-line driver.
//!
//! Exit codes: 0 pass, 1 guard or configuration failure, 2 numerical failure
//! or missed certificate, 3 I/O.

mod config;
mod error;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_omega, Coefficients, ExperimentConfig, FunctionalSpec, Setup};
use error::CliError;
use report::Report;

#[derive(Parser)]
#[command(name = "tentlab", version, about = "Orlicz–Hardy space experiments on periodic grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Operator summary and spectrum.
    Ops(Common),
    /// Molecular decomposition with certificates.
    Decompose(Common),
    /// Square, maximal and Hardy norms of the fixtures.
    Norms(Common),
    /// BMO norms and the John–Nirenberg comparison.
    Bmo(Common),
    /// Run the named probes (overrides the config list).
    Probe {
        #[command(flatten)]
        common: Common,
        names: Vec<String>,
    },
    /// Run the configured probe list; empty gives metadata only.
    Report(Common),
    /// Built-in consistency checks.
    Selftest(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON experiment config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Complex perturbation size of A = I (0 keeps the identity).
    #[arg(long)]
    perturb: Option<f64>,
    /// power:P, sqrt_log or power_log:P:A:SHIFT
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    slack: Option<f64>,
    /// Functional name (s_l, s_p, g_l, n_h, ...); repeatable.
    #[arg(long = "functional")]
    functionals: Vec<String>,
    /// Probe name; repeatable.
    #[arg(long = "probe")]
    probes: Vec<String>,
    /// Input field file instead of the generated corpus.
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Field file for the decomposition's reconstruction.
    #[arg(long)]
    field_out: Option<PathBuf>,
}

fn resolve(c: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.dim {
        cfg.operator.dim = v;
    }
    if let Some(v) = c.n {
        cfg.operator.n = v;
    }
    if let Some(eps) = c.perturb {
        cfg.operator.coefficients = if eps == 0.0 { Coefficients::Identity } else { Coefficients::Perturbed { eps } };
    }
    if let Some(s) = &c.omega {
        cfg.omega = parse_omega(s)?;
    }
    if let Some(v) = c.levels {
        cfg.time.levels = Some(v);
    }
    if let Some(v) = c.m {
        cfg.decomposition.m = Some(v);
    }
    if let Some(v) = c.eps {
        cfg.decomposition.eps = Some(v);
    }
    if let Some(v) = c.slack {
        cfg.decomposition.slack = v;
    }
    if !c.functionals.is_empty() {
        cfg.functionals = c.functionals.iter().map(|name| FunctionalSpec { name: name.clone(), ..FunctionalSpec::default() }).collect();
    }
    if !c.probes.is_empty() {
        cfg.probes = c.probes.clone();
    }
    if let Some(p) = &c.input {
        cfg.input = Some(p.clone());
    }
    if let Some(p) = &c.out {
        cfg.output.json = Some(p.clone());
    }
    if let Some(p) = &c.csv {
        cfg.output.csv = Some(p.clone());
    }
    if let Some(p) = &c.field_out {
        cfg.output.field = Some(p.clone());
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<Report, CliError> {
    let (common, probe_names, kind) = match cli.command {
        Command::Ops(c) => (c, None, "ops"),
        Command::Decompose(c) => (c, None, "decompose"),
        Command::Norms(c) => (c, None, "norms"),
        Command::Bmo(c) => (c, None, "bmo"),
        Command::Probe { common, names } => (common, Some(names), "probe"),
        Command::Report(c) => (c, None, "report"),
        Command::Selftest(c) => (c, None, "selftest"),
    };
    let mut cfg = resolve(&common)?;
    if let Some(names) = probe_names.filter(|n| !n.is_empty()) {
        cfg.probes = names;
    }
    let setup = Setup::build(cfg)?;
    let report = match kind {
        "ops" => run::ops(&setup)?,
        "decompose" => run::decompose(&setup)?,
        "norms" => run::norms(&setup)?,
        "bmo" => run::bmo(&setup)?,
        "selftest" => run::selftest(&setup)?,
        other => run::probes(&setup, other)?,
    };
    report.write(setup.config.output.json.as_deref(), setup.config.output.csv.as_deref())?;
    Ok(report)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(r) if r.pass => ExitCode::SUCCESS,
        Ok(r) => {
            eprintln!("certificate miss in: {}", r.failed_sections().join(", "));
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("tentlab: {e}");
            e.exit_code()
        }
    }
}
