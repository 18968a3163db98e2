use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lrnet::error::{Error, Result};
use lrnet::experiments::{
    load_toml, run_approx_sweep, run_bnn, run_concentration_sweep, run_gadget_verify, write_chain_csv, ApproxSweepConfig,
    BnnRunConfig, ConcentrationConfig, GadgetConfig, PriorConfig, PARAM_DRIFT_TOL,
};

#[derive(Parser, Debug)]
#[command(name = "lrnet", version, about = "Bounded-parameter network approximation and BNN experiments")]
struct Cli {
    /// Base RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Record wall-clock build times in sweep output.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check gadget networks against their error bounds on dense grids.
    GadgetVerify(GadgetArgs),
    /// Approximation error and parameter size against the grid parameter M.
    ApproxSweep(ApproxArgs),
    /// One posterior chain on simulated data.
    BnnRun(BnnArgs),
    /// Posterior error against sample size over several seeds.
    ConcentrationSweep(ConcentrationArgs),
}

#[derive(Args, Debug)]
struct GadgetArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    gadget: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    nu: Option<Vec<f64>>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Debug)]
struct ApproxArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Debug)]
struct BnnArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// `gauss` or `logit`.
    #[arg(long)]
    model: Option<String>,
    /// TOML file with the prior table keys.
    #[arg(long)]
    prior: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    adaptive: bool,
    /// Steps between output rows.
    #[arg(long)]
    every: Option<usize>,
}

#[derive(Args, Debug)]
struct ConcentrationArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    adaptive: bool,
}

enum Outcome {
    Ok,
    Violation(String),
}

fn load_or_default<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => load_toml(p),
        None => Ok(T::default()),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::GadgetVerify(args) => {
            let mut cfg: GadgetConfig = load_or_default(&args.config)?;
            set(&mut cfg.gadgets, args.gadget);
            set(&mut cfg.a, args.a);
            set(&mut cfg.r, args.r);
            set(&mut cfg.nu, args.nu);
            set(&mut cfg.d, args.d);
            set(&mut cfg.grid, args.grid);
            let sweep = run_gadget_verify(&cfg)?;
            sweep.write_csv(output(&cli.out)?)?;
            if !sweep.all_hold() {
                let bad: Vec<String> = sweep
                    .rows
                    .iter()
                    .filter(|r| !r.report.holds())
                    .map(|r| format!("{} R={}", r.report.gadget_name, r.report.r))
                    .collect();
                return Ok(Outcome::Violation(format!("bound violated: {}", bad.join(", "))));
            }
        }
        Command::ApproxSweep(args) => {
            let mut cfg: ApproxSweepConfig = load_or_default(&args.config)?;
            set(&mut cfg.function, args.function);
            set(&mut cfg.d, args.d);
            set(&mut cfg.a, args.a);
            set(&mut cfg.beta, args.beta);
            set(&mut cfg.nu, args.nu);
            set(&mut cfg.m, args.m);
            set(&mut cfg.grid, args.grid);
            let sweep = run_approx_sweep(&cfg)?;
            sweep.write_csv(output(&cli.out)?, cli.timing)?;
            if sweep.param_drift() > PARAM_DRIFT_TOL {
                return Ok(Outcome::Violation(format!("max_abs_param drifts by {:.3e}", sweep.param_drift())));
            }
        }
        Command::BnnRun(args) => {
            let mut cfg: BnnRunConfig = load_or_default(&args.config)?;
            if let Some(p) = &args.prior {
                cfg.prior = load_toml::<PriorConfig>(p)?;
            }
            set(&mut cfg.model, args.model);
            set(&mut cfg.n, args.n);
            set(&mut cfg.beta, args.beta);
            set(&mut cfg.d, args.d);
            set(&mut cfg.steps, args.steps);
            set(&mut cfg.seed, cli.seed);
            set(&mut cfg.every, args.every);
            cfg.adaptive |= args.adaptive;
            let rows = run_bnn(&cfg)?;
            write_chain_csv(output(&cli.out)?, &rows)?;
        }
        Command::ConcentrationSweep(args) => {
            let mut cfg: ConcentrationConfig = load_or_default(&args.config)?;
            set(&mut cfg.model, args.model);
            set(&mut cfg.n, args.n);
            set(&mut cfg.seeds, args.seeds);
            set(&mut cfg.steps, args.steps);
            if let Some(base) = cli.seed {
                cfg.seeds = (0..cfg.seeds.len() as u64).map(|i| base.wrapping_add(i)).collect();
            }
            cfg.adaptive |= args.adaptive;
            let sweep = run_concentration_sweep(&cfg)?;
            sweep.write_csv(output(&cli.out)?)?;
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors; help and version are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Invariant(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
