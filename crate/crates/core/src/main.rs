use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use selectivbench::io::commands::GRAMMAR_FILE;
use selectivbench::io::{self, DataFormat, RunConfig};
use selectivbench::Error;

/// Artificial-grammar benchmark generator, oracle and recurrent-kernel checks.
#[derive(Parser)]
#[command(name = "selectivbench", version)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in profile: paper-main, task2-paper, task3-paper, task4-sweep, tiny.
    #[arg(long)]
    profile: Option<String>,
    /// Master seed for the grammar and both splits.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Build, validate and analyze a grammar.
    GenGrammar(RunArgs),
    /// Generate train/test datasets from a grammar file.
    GenDataset {
        #[command(flatten)]
        run: RunArgs,
        /// Grammar file (defaults to <out>/grammar.json).
        #[arg(long)]
        grammar: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Topological entropy and structure of a grammar file.
    Analyze {
        grammar: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Certify a dataset with the belief-tracking oracle.
    OracleEval {
        /// Data file or manifest.
        dataset: PathBuf,
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the recurrence property suite.
    KernelCheck {
        /// Model names, or `all`.
        models: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Gate-parameter, state-size and feature tables next to published values.
    ParamReport {
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run_config(args: &RunArgs) -> selectivbench::Result<RunConfig> {
    let mut config = match (&args.config, &args.profile) {
        (Some(path), None) => RunConfig::load(path)?,
        (None, Some(name)) => io::profile(name)?,
        (Some(_), Some(_)) => {
            return Err(Error::InvalidConfig("use either --config or --profile, not both".into()))
        }
        (None, None) => return Err(Error::InvalidConfig("one of --config or --profile is required".into())),
    };
    if let Some(seed) = args.seed {
        config = config.with_seed(seed);
    }
    Ok(config)
}

fn out_dir(args: &RunArgs, config: &RunConfig) -> PathBuf {
    match (&config.output_dir, args.out.as_path()) {
        (Some(dir), p) if p == Path::new("out") => dir.clone(),
        _ => args.out.clone(),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> selectivbench::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Exit status: 0 success, 1 validation or certification failure.
fn execute(command: Command) -> selectivbench::Result<u8> {
    match command {
        Command::GenGrammar(args) => {
            let config = run_config(&args)?;
            let out = out_dir(&args, &config);
            let art = io::cmd_gen_grammar(&config, &out)?;
            println!("grammar written to {}", art.path.display());
            println!("{}", art.analysis);
            println!("disambiguable: {}", art.validation.passed);
            Ok(if art.validation.passed { 0 } else { 1 })
        }
        Command::GenDataset { run, grammar, format } => {
            let config = run_config(&run)?;
            let out = out_dir(&run, &config);
            let grammar = grammar.unwrap_or_else(|| out.join(GRAMMAR_FILE));
            let format = match format {
                Format::Text => DataFormat::Text,
                Format::Binary => DataFormat::Binary,
            };
            for m in io::cmd_gen_dataset(&config, &grammar, &out, format)? {
                println!(
                    "{}: {} sequences, {} tokens, {} gaps",
                    out.join(&m.file).display(),
                    m.num_sequences,
                    m.num_tokens,
                    m.num_gaps
                );
            }
            Ok(0)
        }
        Command::Analyze { grammar, json } => {
            let (report, validation) = io::cmd_analyze(&grammar)?;
            if json {
                print_json(&report)?;
            } else {
                println!("{report}");
                println!("disambiguable: {}", validation.passed);
            }
            Ok(if validation.passed { 0 } else { 1 })
        }
        Command::OracleEval { dataset, grammar, json } => {
            let outcome = io::cmd_oracle_eval(&dataset, &grammar)?;
            if !outcome.content_hash_ok {
                eprintln!("warning: data file does not match the manifest content hash");
            }
            if json {
                print_json(&outcome.report)?;
            } else {
                print!("{}", outcome.report.summary());
            }
            Ok(if outcome.certified() { 0 } else { 1 })
        }
        Command::KernelCheck { models, seed } => {
            let kinds = io::parse_models(&models)?;
            let mut failed = 0;
            for (kind, outcomes) in io::cmd_kernel_check(&kinds, seed)? {
                for c in outcomes {
                    let status = if c.passed { "PASS" } else { "FAIL" };
                    if !c.passed {
                        failed += 1;
                    }
                    println!("{:<20} {:<18} {status}  {}", kind.name(), c.name, c.detail);
                }
            }
            Ok(if failed == 0 { 0 } else { 1 })
        }
        Command::ParamReport { json, seed } => {
            let report = io::cmd_param_report(seed)?;
            if json {
                print_json(&report)?;
            } else {
                print!("{report}");
                for m in report.mismatches() {
                    println!("mismatch: {m}");
                }
            }
            Ok(if report.all_match() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let usage = matches!(
                e,
                Error::UnknownModel { .. } | Error::UnknownProfile { .. } | Error::InvalidConfig(_) | Error::Toml(_)
            );
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
