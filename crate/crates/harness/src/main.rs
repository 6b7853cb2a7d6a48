use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use popbo_harness::trace::regenerate_summary;
use popbo_harness::{
    parse_seeds, run_experiment, run_forrester_study, ExperimentConfig, Method, RunOverrides, UsageError,
};

#[derive(Parser)]
#[command(name = "popbo", version, about = "Ranking-surrogate Bayesian optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more methods over a list of seeds and write CSV traces.
    Run(RunArgs),
    /// Rebuild summary CSVs from the trace files in a directory.
    Summarize {
        #[arg(long)]
        benchmark: String,
        /// Comma-separated methods.
        #[arg(long, value_delimiter = ',', default_values_t = Method::ALL.map(|m| m.to_string()))]
        method: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forrester ranking-robustness study (Spearman vs noise level).
    Forrester {
        #[arg(long, default_value = "0-9")]
        seeds: String,
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.15,0.25,0.35,0.45")]
        sigmas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<String>,
    /// Comma-separated: popbo-rlcb, popbo-eri, random-search.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    /// Seed list such as `0-9` or `1,4,7`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    init: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel seed workers (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Write zeros in the timing columns so traces are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn into_config(self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(b) = self.benchmark {
            cfg.benchmark = b;
        }
        if !self.method.is_empty() {
            cfg.methods = self.method.iter().map(|m| m.parse()).collect::<Result<_, UsageError>>()?;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        if let Some(v) = self.noise_sigma {
            cfg.noise_sigma = v;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.run.merge(&RunOverrides {
            n_init: self.init,
            n_iters: self.iters,
            q: self.q,
            k_max: self.kmax,
            beta: self.beta,
            record_timing: self.no_timing.then_some(false),
            ..Default::default()
        });
        Ok(cfg)
    }
}

fn out_dir(out: Option<PathBuf>) -> PathBuf {
    ExperimentConfig { out, ..Default::default() }.out_dir()
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let report = run_experiment(&cfg)?;
            for job in &report.jobs {
                match &job.error {
                    None => println!(
                        "{} seed {}: {} evaluations -> {}",
                        job.method,
                        job.seed,
                        job.evaluations,
                        job.path.display()
                    ),
                    Some(e) => eprintln!(
                        "{} seed {}: stopped after {} evaluations: {e}",
                        job.method, job.seed, job.evaluations
                    ),
                }
            }
            for s in &report.summaries {
                println!("summary -> {}", s.display());
            }
            let clean = report.failures().next().is_none();
            Ok(clean)
        }
        Command::Summarize { benchmark, method, out } => {
            let dir = out_dir(out);
            let methods: Vec<Method> = method.iter().map(|m| m.parse()).collect::<Result<_, UsageError>>()?;
            let mut any = false;
            for m in methods {
                if popbo_harness::trace::find_traces(&dir, &benchmark, m)?.is_empty() {
                    continue;
                }
                println!("summary -> {}", regenerate_summary(&dir, &benchmark, m)?.display());
                any = true;
            }
            if !any {
                anyhow::bail!("no traces for {benchmark} in {}", dir.display());
            }
            Ok(true)
        }
        Command::Forrester { seeds, sigmas, out } => {
            let seeds = parse_seeds(&seeds)?;
            println!("study -> {}", run_forrester_study(&seeds, &sigmas, &out_dir(out))?.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
