//! Command-line driver for the private clustering toolkit.

use clap::{Args, Parser, Subcommand};
use dpcluster_core::bench::{
    generate_instance, parse_suite_config, run_suite, verify_lemmas, PipelineKind,
};
use dpcluster_core::geometry::{read_dataset_csv, read_dataset_json, write_dataset_csv};
use dpcluster_core::stability::{stability_report, OptMode};
use dpcluster_core::CostObjective;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dpcluster",
    about = "Differentially private clustering on well-separated instances",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance and write it in the dataset CSV format
    Gen(GenArgs),
    /// Run the experiment suite described by a config file
    Run(RunArgs),
    /// Compute a stability report for a dataset file
    Audit(AuditArgs),
    /// Run the identity/inequality verification suite on random instances
    VerifyLemmas(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// flat key = value config file (see README for the grammar)
    #[arg(long)]
    config: PathBuf,
    /// output dataset path (CSV); a `<out>.report.json` sidecar is written too
    #[arg(long, default_value = "instance.csv")]
    out: PathBuf,
    /// overrides the config's instance_seed
    #[arg(long)]
    seed: Option<u64>,
    /// generate the k-median oracle (medians) instead of means
    #[arg(long)]
    kmedian: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// overrides the config's out_dir
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// overrides the config's master_seed
    #[arg(long)]
    seed: Option<u64>,
    /// overrides the config's pipelines (repeatable)
    #[arg(long = "pipeline")]
    pipelines: Vec<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct AuditArgs {
    /// dataset file (.csv or .json in the toolkit's format)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// cost exponent: 2 = k-means, 1 = k-median
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// exact | heuristic | auto
    #[arg(long, default_value = "auto")]
    mode: String,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Gen(args) => {
            let text = fs::read_to_string(&args.config)?;
            let mut cfg = parse_suite_config(&text, std::path::Path::new("results"))?;
            if let Some(s) = args.seed {
                cfg.instance.seed = s;
            }
            let obj = if args.kmedian {
                CostObjective::KMedian
            } else {
                CostObjective::KMeans
            };
            let inst = generate_instance(&cfg.instance, obj)?;
            let mut f = fs::File::create(&args.out)?;
            write_dataset_csv(&mut f, &inst.data)?;
            let sidecar = args.out.with_extension("report.json");
            fs::write(
                &sidecar,
                serde_json::to_string_pretty(&serde_json::json!({
                    "oracle_centers": inst.oracle,
                    "stability": inst.report,
                }))?,
            )?;
            println!(
                "wrote {} points to {} (report: {})",
                inst.data.n(),
                args.out.display(),
                sidecar.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let text = fs::read_to_string(&args.config)?;
            let mut cfg = parse_suite_config(&text, std::path::Path::new("results"))?;
            if let Some(d) = args.out_dir {
                cfg.out_dir = d;
            }
            if let Some(s) = args.seed {
                cfg.master_seed = s;
            }
            if let Some(e) = args.epsilon {
                cfg.epsilon = e;
            }
            if let Some(d) = args.delta {
                cfg.delta = d;
            }
            if let Some(b) = args.beta {
                cfg.beta = b;
            }
            if !args.pipelines.is_empty() {
                cfg.pipelines = args
                    .pipelines
                    .iter()
                    .map(|p| {
                        PipelineKind::parse(p)
                            .ok_or_else(|| format!("unknown pipeline {p:?}"))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
            }
            let res = run_suite(&cfg)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&res.summary)?
            );
            println!(
                "results: {}",
                cfg.out_dir.join("results.csv").display()
            );
            Ok(if res.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Audit(args) => {
            let data = if args.input.extension().is_some_and(|e| e == "json") {
                read_dataset_json(fs::File::open(&args.input)?)?
            } else {
                read_dataset_csv(fs::File::open(&args.input)?)?
            };
            let obj = CostObjective::from_p(args.p)?;
            let mode = match args.mode.as_str() {
                "exact" => OptMode::Exact,
                "heuristic" => OptMode::Heuristic {
                    restarts: args.restarts,
                    seed: args.seed,
                },
                "auto" => OptMode::Auto {
                    restarts: args.restarts,
                    seed: args.seed,
                },
                other => return Err(format!("unknown mode {other:?}").into()),
            };
            let report = stability_report(&data, args.k, obj, mode)?;
            println!("{}", serde_json::to_string_pretty(&report.to_json())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyLemmas(args) => {
            let rep = verify_lemmas(args.instances, args.seed);
            for line in rep.lines() {
                println!("{line}");
            }
            println!(
                "worst relative error: {:.3e}",
                rep.worst_rel_err
            );
            Ok(if rep.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
