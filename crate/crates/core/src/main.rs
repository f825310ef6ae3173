use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use inductor::datasets::{gen_miniscan_set, load_tasks, noise_sibling, perturb_noise, write_tasks, NoiseSpec, OutputMode};
use inductor::harness::{self, aggregate, aggregate_alt, cost_report, group_runs, read_traces, HarnessConfig, Report};
use inductor::model::{InterpreterMode, Method};
use inductor::proposer::ENV_MODEL;

#[derive(Parser)]
#[command(name = "inductor", version, about = "Propose, test and refine rules for inductive reasoning tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a method over the configured task files.
    Run(RunArgs),
    /// Generate task sets.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Write perturbed copies of task sets.
    #[command(subcommand)]
    Perturb(PerturbCommand),
    /// Rebuild reports from a traces file.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long = "iters")]
    iterations: Option<u32>,
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long)]
    interpreter: Option<InterpreterMode>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Abort on the first failed task.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    noisy_prompt: bool,
    /// Also score final rules with the other interpreter.
    #[arg(long)]
    compare_interpreters: bool,
}

#[derive(Subcommand)]
enum GenCommand {
    Miniscan {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value = "colors")]
        output_mode: OutputMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use English input words instead of pseudowords.
        #[arg(long)]
        english_inputs: bool,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PerturbCommand {
    Noise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to a sibling of the input named after the noise spec.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    traces: PathBuf,
    /// Also print per-dataset call and cost means.
    #[arg(long)]
    costs: bool,
    /// Write the summary CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn print_report(r: &Report) {
    println!(
        "{} / {} / {:?}: c = {:.4}, c_t = {:.4}, mean calls = {:.2}, mean cost = ${:.4} ({} tasks, {} failed)",
        r.method.as_str(),
        r.model,
        r.interpreter,
        r.raw_accuracy,
        r.task_accuracy,
        r.mean_api_calls,
        r.mean_cost,
        r.tasks,
        r.failed_tasks
    );
    for d in &r.datasets {
        println!("  {:<9} c = {:.4}  c_t = {:.4}  calls = {:.2}", d.dataset.as_str(), d.raw_accuracy, d.task_accuracy, d.mean_api_calls);
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = HarnessConfig::load(&args.config)?;
    let r = &mut cfg.run;
    if let Some(m) = args.method {
        r.method = m;
    }
    if let Some(t) = args.iterations {
        r.max_iterations = t;
    }
    if let Some(n) = args.samples {
        r.samples_per_iteration = n;
    }
    if let Some(i) = args.interpreter {
        r.interpreter_mode = i;
    }
    if let Some(model) = args.model.or_else(|| std::env::var(ENV_MODEL).ok()) {
        r.model_name = model;
    }
    if let Some(s) = args.seed {
        r.seed = s;
    }
    r.noisy_prompt |= args.noisy_prompt;
    if let Some(d) = args.cache_dir {
        cfg.cache_dir = Some(d);
    }
    if let Some(d) = args.output_dir {
        cfg.output_dir = d;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.strict |= args.strict;
    cfg.compare_interpreters |= args.compare_interpreters;
    if cfg.tasks.is_empty() {
        bail!("config lists no task files");
    }
    let out = harness::run(&cfg)?;
    print_report(&out.report);
    if let Some(alt) = &out.alt_report {
        print_report(alt);
    }
    println!("artifacts written to {}", cfg.output_dir.display());
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let traces = read_traces(&args.traces)?;
    if traces.is_empty() {
        bail!("{} holds no traces", args.traces.display());
    }
    let mut reports = Vec::new();
    for group in group_runs(traces.clone()) {
        reports.push(aggregate(&group)?);
        if let Some(alt) = aggregate_alt(&group)? {
            reports.push(alt);
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for r in &reports {
        serde_json::to_writer_pretty(&mut out, r)?;
        writeln!(out)?;
    }
    if args.costs {
        for row in cost_report(&traces) {
            writeln!(
                out,
                "{:<9} {:<7} {:<16} tasks={:<4} calls={:.2} tokens={:.1} cost=${:.4}",
                row.dataset.as_str(),
                row.method.as_str(),
                row.model,
                row.tasks,
                row.mean_api_calls,
                row.mean_tokens,
                row.mean_cost
            )?;
        }
    }
    if let Some(path) = args.csv {
        let file = std::fs::File::create(&path).with_context(|| path.display().to_string())?;
        harness::write_summary_csv(file, &reports.iter().collect::<Vec<_>>())?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Gen(GenCommand::Miniscan { count, output_mode, seed, english_inputs, output }) => {
            let tasks = gen_miniscan_set(count, output_mode, seed, english_inputs);
            match output {
                Some(path) => write_tasks(&path, &tasks)?,
                None => {
                    let json = inductor::datasets::tasks_to_json(&tasks);
                    println!("{}", serde_json::to_string_pretty(&json)?);
                }
            }
            Ok(())
        }
        Command::Perturb(PerturbCommand::Noise { input, fraction, seed, output }) => {
            let spec = NoiseSpec { fraction, seed };
            let tasks = load_tasks(&input, None)?;
            let noisy = tasks.iter().map(|t| perturb_noise(t, &spec)).collect::<Result<Vec<_>, _>>()?;
            let path = output.unwrap_or_else(|| noise_sibling(&input, &spec));
            write_tasks(&path, &noisy)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Report(args) => report(args),
    }
}
