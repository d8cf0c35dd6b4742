use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use varpen_bench::config::{Arms, ProblemKind, CONFIG_HELP};
use varpen_bench::plot::{render_plot, PlotKind};
use varpen_bench::{lipschitz_sweep, run, BenchError, ExperimentConfig};

/// Penalty-method experiments: sweeps over λ, solver comparisons and plots.
#[derive(Parser)]
#[command(name = "bench", version, after_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver arms for every λ; writes trace_*.csv and summary.csv.
    Run(RunArgs),
    /// Estimate the Lipschitz constant of the reduced gradient for every λ; writes lipschitz.csv.
    Lipschitz(RunArgs),
    /// Render an SVG line chart from a run directory.
    Plot(PlotArgs),
}

#[derive(Args)]
#[command(after_help = CONFIG_HELP)]
struct RunArgs {
    /// TOML config file; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// boundary | transport | oscillator | scalar_toy [default: boundary]
    #[arg(long)]
    problem: Option<String>,
    /// Comma-separated, strictly increasing [default: 1e3,1e5,1e7]
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// gd | gd-inexact | lbfgs [default: lbfgs]
    #[arg(long)]
    method: Option<String>,
    /// projected | joint | both [default: projected]
    #[arg(long)]
    arms: Option<String>,
    /// Warm-start each λ from the result at the previous one.
    #[arg(long)]
    continuation: bool,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory [default: config out_dir, then $BENCH_OUT_DIR, then ./bench_out]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// convergence | lipschitz
    #[arg(long)]
    kind: String,
    /// Directory holding the CSV output of a run.
    #[arg(long = "in")]
    input: PathBuf,
    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn into_config(self) -> Result<(ExperimentConfig, usize), BenchError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path).map_err(|e| match e {
                BenchError::Io { path, source } => BenchError::Config(format!("{}: {source}", path.display())),
                e => e,
            })?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = self.problem {
            cfg.problem = p.parse::<ProblemKind>()?;
        }
        if let Some(l) = self.lambda {
            cfg.lambdas = l;
        }
        if let Some(m) = self.method {
            cfg.solver.method = m;
        }
        if let Some(a) = self.arms {
            cfg.arms = a.parse::<Arms>()?;
        }
        cfg.continuation |= self.continuation;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = self.out {
            cfg.out_dir = Some(o);
        }
        cfg.validate()?;
        Ok((cfg, self.jobs))
    }
}

const EXIT_PARTIAL: u8 = 2;

fn fail(e: &BenchError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run(args) => {
            let (cfg, jobs) = match args.into_config() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match run(&cfg, jobs) {
                Ok(s) if s.has_failures() => ExitCode::from(EXIT_PARTIAL),
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
        Command::Lipschitz(args) => {
            let (cfg, jobs) = match args.into_config() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match lipschitz_sweep(&cfg, jobs) {
                Ok(rows) if rows.iter().any(|r| r.estimate.is_none()) => ExitCode::from(EXIT_PARTIAL),
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
        Command::Plot(args) => {
            let res = args
                .kind
                .parse::<PlotKind>()
                .and_then(|k| render_plot(k, &args.input, &args.out));
            match res {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
    }
}
