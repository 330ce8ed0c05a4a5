use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qubo_dr::eval::{
    run_experiment, simulated_annealing, write_csv, write_json, ExperimentConfig,
};
use qubo_dr::io::{read_instance, read_trace, write_instance, write_trace, InstanceFile, TraceFile};
use qubo_dr::problems::{generate_suite, Family};
use qubo_dr::qubo::{solve_exhaustive_with_cap, DEFAULT_EXHAUSTIVE_CAP};
use qubo_dr::search::{default_horizon, nonpreserving_trace, IndexMode, Policy, Reducer, SearchReport};
use qubo_dr::QuboError;

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CAP: u8 = 3;

#[derive(Parser)]
#[command(name = "qubo-dr", version, about = "Optimum-preserving dynamic-range reduction for QUBO matrices")]
struct Cli {
    /// Worker threads for suites.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random instances of one family as JSON files.
    Generate {
        #[arg(long, value_parser = parse_family)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Reduce the dynamic range of an instance and write the trace.
    Compress {
        instance: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Trace output path.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Replay a trace and check DRs and optimum inclusion by enumeration.
    Verify {
        trace: PathBuf,
        /// Instance the trace must start from.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
        cap: usize,
    },
    /// Solve an instance exactly or sample it with simulated annealing.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Exhaustive)]
        method: Method,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        sweeps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
        cap: usize,
    },
    /// Run an experiment config and write the reports.
    Evaluate {
        config: PathBuf,
        #[command(flatten)]
        out: ReportArgs,
    },
    /// Run an experiment config once per policy and print timings.
    Bench {
        config: PathBuf,
        #[command(flatten)]
        out: ReportArgs,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Overrides the sampler size of the config.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exhaustive,
    Sa,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Base,
    Randomized,
    Rollout,
    Bnb,
    /// Non-preserving heuristic; its traces may fail verification.
    Nonpreserving,
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long, value_enum, default_value_t = PolicyKind::Base)]
    policy: PolicyKind,
    /// Number of steps; defaults to ceil(2 log2 n).
    #[arg(long)]
    horizon: Option<usize>,
    /// Final steps of branch and bound handled by the base policy.
    #[arg(long, default_value_t = 0)]
    rollout_depth: usize,
    #[arg(long, default_value_t = 1)]
    update_depth: usize,
    #[arg(long, value_parser = parse_mode, default_value = "impact")]
    index_mode: IndexMode,
    #[arg(long)]
    top_k: Option<usize>,
    /// Rollout length cap for the rollout policy.
    #[arg(long)]
    truncation: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: QuboError| e.to_string())
}

fn parse_mode(s: &str) -> Result<IndexMode, String> {
    s.parse().map_err(|e: QuboError| e.to_string())
}

impl PolicyArgs {
    fn policy(&self) -> anyhow::Result<Policy> {
        Ok(match self.policy {
            PolicyKind::Base | PolicyKind::Nonpreserving => Policy::Base,
            PolicyKind::Randomized => Policy::RandomizedBase {
                top_k: self.top_k.unwrap_or(4),
                seed: self.seed,
            },
            PolicyKind::Rollout => Policy::RolloutSelection {
                top_k: self.top_k,
                truncation: self.truncation,
            },
            PolicyKind::Bnb => Policy::BranchAndBound {
                rollout_depth: self.rollout_depth,
                update_depth: self.update_depth,
            },
        })
    }
}

fn cmd_generate(family: Family, n: usize, count: usize, seed: u64, out_dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (i, inst) in generate_suite(family, n, count, seed)?.into_iter().enumerate() {
        let path = out_dir.join(format!("{}_n{}_{:04}.json", family.name(), n, i));
        write_instance(&path, &InstanceFile::from(inst))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_compress(instance: &Path, args: &PolicyArgs, out: Option<&Path>) -> anyhow::Result<()> {
    let file = read_instance(instance)?;
    let q = &file.matrix;
    let horizon = args.horizon.unwrap_or_else(|| default_horizon(q.n()));
    let report = match args.policy {
        PolicyKind::Nonpreserving => SearchReport::from_trace(nonpreserving_trace(q, horizon)?),
        _ => Reducer::new(args.index_mode).run(q, &args.policy()?, horizon)?,
    };
    let trace = &report.best_trace;
    if let Some(path) = out {
        write_trace(path, &TraceFile::new(trace, file.metadata.clone()))?;
    }
    println!("{} {} {}", trace.initial_dr, trace.final_dr(), report.pruned_fraction);
    Ok(())
}

fn cmd_verify(trace: &Path, instance: Option<&Path>, cap: usize) -> anyhow::Result<bool> {
    let file = read_trace(trace)?;
    if let Some(path) = instance {
        if read_instance(path)?.matrix != file.initial.matrix {
            eprintln!("trace does not start from {}", path.display());
            return Ok(false);
        }
    }
    match file.to_trace().verify(cap)? {
        None => {
            println!("ok {} steps", file.steps.len());
            Ok(true)
        }
        Some(fault) => {
            eprintln!("{fault}");
            Ok(false)
        }
    }
}

fn cmd_solve(instance: &Path, method: Method, samples: usize, sweeps: usize, seed: u64, cap: usize) -> anyhow::Result<()> {
    let q = read_instance(instance)?.matrix;
    match method {
        Method::Exhaustive => {
            let res = solve_exhaustive_with_cap(&q, cap)?;
            println!("{}", res.optimum_energy);
            for z in &res.optimizers {
                let bits: String = z.0.iter().map(|&b| if b { '1' } else { '0' }).collect();
                println!("{bits}");
            }
        }
        Method::Sa => {
            let set = simulated_annealing(&q, samples, sweeps, None, seed)?;
            let best = set
                .samples
                .iter()
                .min_by(|a, b| a.energy.total_cmp(&b.energy))
                .expect("at least one sample");
            let bits: String = best.assignment.0.iter().map(|&b| if b { '1' } else { '0' }).collect();
            println!("{} {} {}", best.energy, set.count_optimal(best.energy), bits);
        }
    }
    Ok(())
}

fn load_config(path: &Path, jobs: usize, out: &ReportArgs) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| QuboError::Parse(e.to_string()))?;
    config.jobs = jobs;
    if let Some(s) = config.sampler.as_mut() {
        if let Some(n) = out.samples {
            s.samples = n;
        }
        if let Some(n) = out.sweeps {
            s.sweeps = n;
        }
    } else if out.samples.is_some() || out.sweeps.is_some() {
        bail!(QuboError::InvalidParameter(
            "--samples/--sweeps need a sampler block in the config".into()
        ));
    }
    config.validate()?;
    Ok(config)
}

fn emit(report: &qubo_dr::eval::ExperimentReport, out: &ReportArgs) -> anyhow::Result<()> {
    match &out.csv {
        Some(path) => write_csv(report, fs::File::create(path)?)?,
        None if out.json.is_none() => write_csv(report, std::io::stdout().lock())?,
        None => {}
    }
    if let Some(path) = &out.json {
        write_json(report, path)?;
    }
    Ok(())
}

fn cmd_evaluate(config: &Path, jobs: usize, out: &ReportArgs) -> anyhow::Result<()> {
    let config = load_config(config, jobs, out)?;
    emit(&run_experiment(&config)?, out)
}

fn cmd_bench(config: &Path, jobs: usize, out: &ReportArgs) -> anyhow::Result<()> {
    let config = load_config(config, jobs, out)?;
    let mut rows = Vec::new();
    for p in &config.policies {
        let single = ExperimentConfig {
            policies: vec![p.clone()],
            include_original: false,
            ..config.clone()
        };
        let start = Instant::now();
        let report = run_experiment(&single)?;
        let secs = start.elapsed().as_secs_f64();
        let count = report.rows.len().max(1) as f64;
        let mean: f64 = report.rows().map(|r| r.rel_reduction).sum::<f64>() / count;
        eprintln!("{} {} {:.6} {:.6}", p.label(), p.index_mode, mean, secs);
        rows.extend(report.rows);
    }
    emit(&qubo_dr::eval::ExperimentReport { config, rows }, out)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<QuboError>() {
        Some(QuboError::CapExceeded { .. }) => EXIT_CAP,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli.jobs;
    let result = match &cli.command {
        Command::Generate {
            family,
            n,
            count,
            seed,
            out_dir,
        } => cmd_generate(*family, *n, *count, *seed, out_dir).map(|_| true),
        Command::Compress {
            instance,
            policy,
            out,
        } => cmd_compress(instance, policy, out.as_deref()).map(|_| true),
        Command::Verify {
            trace,
            instance,
            cap,
        } => cmd_verify(trace, instance.as_deref(), *cap),
        Command::Solve {
            instance,
            method,
            samples,
            sweeps,
            seed,
            cap,
        } => cmd_solve(instance, *method, *samples, *sweeps, *seed, *cap).map(|_| true),
        Command::Evaluate { config, out } => cmd_evaluate(config, jobs, out).map(|_| true),
        Command::Bench { config, out } => cmd_bench(config, jobs, out).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
