//! Experiment runner: dispatches the statistical suites, writes a JSON
//! report plus per-suite CSV artifacts, and exits nonzero when a hard gate
//! fails. Runs are deterministic in the master seed; replica k of a suite
//! draws from a stream that depends only on (seed, suite, k).

mod report;
mod suites;

use clap::{Parser, Subcommand, ValueEnum};
use std::collections::HashMap;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "localsets", version, about = "Monte Carlo experiments for conformal local-set laws", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment suite and write report.json plus artifacts
    Run(RunArgs),
    /// Emit plain-text figure data from a finished run directory
    Figure(FigureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    ExitLaws,
    ClePoint,
    CleDecay,
    TvsLaws,
    TvsGeometric,
    CouplingIdentities,
    DgffChecks,
    Carpet,
}

#[derive(Parser, Debug)]
pub struct RunArgs {
    /// Experiment suite to run
    #[arg(long, value_enum)]
    suite: Suite,
    /// Optional key=value config file; command-line flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Time step of the stochastic integrators
    #[arg(long)]
    step: Option<f64>,
    /// Number of replicas
    #[arg(long)]
    n: Option<usize>,
    /// Ensemble level M (cle suites)
    #[arg(long)]
    m: Option<u32>,
    /// Lower boundary value, in units of lambda (tvs suites)
    #[arg(long)]
    a: Option<f64>,
    /// Upper boundary value, in units of lambda (tvs suites)
    #[arg(long)]
    b: Option<f64>,
    /// Conformal-radius resolution cutoff of the geometric construction
    #[arg(long)]
    delta: Option<f64>,
    /// Raster resolution (carpet suite)
    #[arg(long)]
    resolution: Option<usize>,
    /// Lattice size (dgff suite)
    #[arg(long)]
    lattice: Option<usize>,
    /// Dump one Brownian path / driver CSV for debugging
    #[arg(long, default_value_t = false)]
    dump_paths: bool,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Parser, Debug)]
pub struct FigureArgs {
    /// report.json of a finished run
    #[arg(long)]
    report: PathBuf,
    /// Figure data kind
    #[arg(long, value_enum)]
    kind: FigureKind,
    /// Output file (defaults next to the report)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureKind {
    CarpetRaster,
    LoglogDecay,
    ExitHistogram,
}

/// Fully resolved run configuration (defaults < config file < flags).
#[derive(Debug, Clone, serde::Serialize)]
pub struct Config {
    pub suite: String,
    pub master_seed: u64,
    pub step: f64,
    pub n_replicas: usize,
    pub m: u32,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub resolution: usize,
    pub lattice: usize,
    pub dump_paths: bool,
}

fn parse_config_file(path: &PathBuf) -> Result<HashMap<String, String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("config: {e}"))?;
    let mut map = HashMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {} is not key=value: {line}", ln + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn resolve(args: &RunArgs) -> Result<Config, String> {
    let file = match &args.config {
        Some(p) => parse_config_file(p)?,
        None => HashMap::new(),
    };
    fn pick<T: std::str::FromStr>(
        flag: Option<T>,
        file: &HashMap<String, String>,
        key: &str,
        default: T,
    ) -> Result<T, String> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match file.get(key) {
            Some(s) => s
                .parse::<T>()
                .map_err(|_| format!("config key {key}: cannot parse {s:?}")),
            None => Ok(default),
        }
    }
    let suite_name = format!("{:?}", args.suite)
        .chars()
        .enumerate()
        .flat_map(|(i, c)| {
            if c.is_uppercase() && i > 0 {
                vec!['_', c.to_ascii_lowercase()]
            } else {
                vec![c.to_ascii_lowercase()]
            }
        })
        .collect::<String>();
    Ok(Config {
        suite: suite_name,
        master_seed: pick(args.seed, &file, "seed", 1u64)?,
        step: pick(args.step, &file, "step", 1e-3)?,
        n_replicas: pick(args.n, &file, "n", 10_000usize)?,
        m: pick(args.m, &file, "m", 1u32)?,
        a: pick(args.a, &file, "a", 1.0f64)?,
        b: pick(args.b, &file, "b", 1.0f64)?,
        delta: pick(args.delta, &file, "delta", 1e-3f64)?,
        resolution: pick(args.resolution, &file, "resolution", 128usize)?,
        lattice: pick(args.lattice, &file, "lattice", 32usize)?,
        dump_paths: args.dump_paths,
    })
}

fn main() {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let config = match resolve(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    std::process::exit(2);
                }
            };
            match suites::run(args.suite, &config, &args.out) {
                Ok(rep) => {
                    let all_pass = rep.verdicts.iter().all(|v| v.pass);
                    for v in &rep.verdicts {
                        println!(
                            "[{}] {}: statistic {:.6}, {}",
                            if v.pass { "PASS" } else { "FAIL" },
                            v.test,
                            v.statistic,
                            v.note
                        );
                    }
                    println!(
                        "report: {}",
                        args.out.join("report.json").display()
                    );
                    if !all_pass {
                        std::process::exit(1);
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    std::process::exit(2);
                }
            }
        }
        Command::Figure(args) => match suites::emit_figure_data(&args) {
            Ok(path) => println!("{}", path.display()),
            Err(e) => {
                eprintln!("error: {e}");
                std::process::exit(2);
            }
        },
    }
}
