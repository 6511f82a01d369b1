use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quarklet_cli::commands::{self, Series};
use quarklet_cli::output::{ratio_svg, to_csv, Table};
use quarklet_cli::{CliError, ExperimentConfig};
use quarklet_core::tensor::Mode;

#[derive(Parser, Debug)]
#[command(name = "quarklets", version, about = "Quarklet frames on the interval and the square: construction, checks and norm experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Construct a system and print a JSON summary.
    Build {
        #[command(flatten)]
        opts: Opts,
        /// Include every element's piecewise-polynomial data.
        #[arg(long)]
        elements: bool,
    },
    /// Run the invariant suite; exit 1 if any invariant fails.
    Verify {
        #[command(flatten)]
        opts: Opts,
        /// Perturb the wavelet mask before building (negative control).
        #[arg(long, hide = true)]
        corrupt_filter: bool,
    },
    /// Univariate norm experiment: sequence-norm estimate against the difference oracle.
    Norms1d {
        #[command(flatten)]
        opts: Opts,
    },
    /// Bivariate norm experiment with rank-R representations.
    Norms2d {
        #[command(flatten)]
        opts: Opts,
    },
}

fn parse_pair(s: &str) -> Result<(u32, u32), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?)),
        [a] => {
            let v = a.parse().map_err(|e| format!("{e}"))?;
            Ok((v, v))
        }
        _ => Err(format!("expected L,R but got {s:?}")),
    }
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    mtilde: Option<usize>,
    #[arg(long)]
    j0: Option<i32>,
    /// Boundary orders `L,R` at 0 and 1 (univariate).
    #[arg(long, value_parser = parse_pair)]
    sigma: Option<(u32, u32)>,
    /// Boundary orders `L,R` in direction 1.
    #[arg(long, value_parser = parse_pair)]
    sigma1: Option<(u32, u32)>,
    /// Boundary orders `L,R` in direction 2.
    #[arg(long, value_parser = parse_pair)]
    sigma2: Option<(u32, u32)>,
    /// Smoothness grid (comma list).
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<f64>>,
    /// Integrability grid (comma list).
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<f64>>,
    #[arg(long)]
    delta1: Option<f64>,
    #[arg(long)]
    delta2: Option<f64>,
    #[arg(long)]
    jmax: Option<i32>,
    #[arg(long)]
    pmax: Option<u32>,
    #[arg(long)]
    rank: Option<usize>,
    /// Test function, e.g. `sinpi`, `bubble`, `xalpha:0.7`, `sinpi⊗bubble`.
    #[arg(long = "fn")]
    function: Option<String>,
    #[arg(long, value_parser = ["strict", "exploratory"])]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG chart of ratio against J.
    #[arg(long)]
    svg: Option<PathBuf>,
}

impl Opts {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident <- $opt:expr),* $(,)?) => {
                $(if let Some(v) = $opt.clone() { c.$field = v; })*
            };
        }
        set!(m <- self.m, m_tilde <- self.mtilde, sigma <- self.sigma, sigma1 <- self.sigma1,
             sigma2 <- self.sigma2, s <- self.s, r <- self.r, delta1 <- self.delta1, delta2 <- self.delta2,
             pmax <- self.pmax, rank <- self.rank, seed <- self.seed);
        if self.j0.is_some() {
            c.j0 = self.j0;
        }
        if self.jmax.is_some() {
            c.jmax = self.jmax;
        }
        if self.function.is_some() {
            c.function = self.function.clone();
        }
        if let Some(m) = &self.mode {
            c.mode = m.parse::<Mode>()?;
        }
        Ok(c)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_table(opts: &Opts, config: &ExperimentConfig, command: &str, table: &Table, series: &Series) -> Result<(), CliError> {
    write_out(opts.out.as_deref(), &to_csv(table, config, command))?;
    if let Some(svg) = &opts.svg {
        std::fs::write(svg, ratio_svg(&format!("{command}: estimate / oracle"), series))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Build { opts, elements } => {
            let config = opts.config()?;
            let (doc, ok) = commands::build(&config, elements)?;
            write_out(opts.out.as_deref(), &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Verify { opts, corrupt_filter } => {
            let config = opts.config()?;
            let report = commands::verify(&config, corrupt_filter)?;
            for i in &report.invariants {
                eprintln!(
                    "{} {:<48} {:>12.4e} {} {:.1e}",
                    if i.pass { "PASS" } else { "FAIL" },
                    i.name,
                    i.measured,
                    i.relation,
                    i.bound
                );
            }
            write_out(opts.out.as_deref(), &(serde_json::to_string_pretty(&report).expect("json") + "\n"))?;
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Norms1d { opts } => {
            let config = opts.config()?;
            let (table, series) = commands::norms_1d(&config)?;
            emit_table(&opts, &config, "norms1d", &table, &series)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Norms2d { opts } => {
            let config = opts.config()?;
            let (table, series) = commands::norms_2d(&config)?;
            emit_table(&opts, &config, "norms2d", &table, &series)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("QUARKLET_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
