use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use tecr_core::corpus::SyntheticSpec;
use tecr_core::metrics::EvalReport;
use tecr_core::pipeline::{self, run, RunConfig};
use tecr_core::scorer::{gradient_check, load_checkpoint, CheckpointHeader, ScorerMode};
use tecr_core::util::mean_std;
use tecr_core::Error;

#[derive(Parser, Debug)]
#[command(name = "tecr", version, about = "Cross-document event coreference with temporal commonsense inferences")]
struct Cli {
    /// TOML run configuration (defaults to the desk preset).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "tecr-out")]
    out: PathBuf,
    /// Comma-separated seeds, overriding the configuration.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Scorer variant: baseline, intra or inter.
    #[arg(long, global = true)]
    mode: Option<ScorerMode>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus and its inference fixtures.
    Synth,
    /// Resolve before/after inferences for every split.
    GenInferences,
    /// Train one scorer per seed and tune the clustering threshold.
    Train,
    /// Cluster a split with trained checkpoints.
    Predict {
        /// Run directory holding the checkpoints (defaults to --out).
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Evaluate clusterings against gold.
    Score {
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        /// Score this clustering file instead of the run's predictions.
        #[arg(long, conflicts_with = "gold_as_system")]
        clusters: Option<PathBuf>,
        /// Score the gold clustering itself.
        #[arg(long)]
        gold_as_system: bool,
    },
    /// Show attention weights for one mention pair.
    Explain {
        #[arg(long)]
        run: Option<PathBuf>,
        /// Explicit checkpoint instead of the run's first seed.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        first: String,
        second: String,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck,
}

enum Failure {
    Usage(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidSpec(_) | Error::EmptyGrid | Error::ExemplarCount { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Verification(other.to_string()),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if !cli.seed.is_empty() {
        config.run.seeds = cli.seed.clone();
    }
    if let Some(mode) = cli.mode {
        config.run.mode = mode;
    }
    Ok(config)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    tecr_core::util::write_atomic(path, text.as_bytes()).map_err(Failure::from)
}

fn print_report(label: &str, report: &EvalReport) {
    println!("== {label}");
    println!("{report}");
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let config = load_config(cli)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Synth => {
            let spec = SyntheticSpec {
                seed: cli.seed.first().copied().unwrap_or(config.synthetic.seed),
                ..config.synthetic.clone()
            };
            let generated = run::synth(&spec, out)?;
            println!(
                "wrote {} documents, {} mentions, {} gold clusters ({} hard) to {}",
                generated.corpus.documents().len(),
                generated.corpus.mentions().len(),
                spec.expected_clusters(),
                generated.hard_clusters.len(),
                out.display()
            );
        }
        Command::GenInferences => {
            config.validate()?;
            let calls = pipeline::gen_inferences(&config, out)?;
            println!("wrote inference fixtures to {} ({calls} provider calls)", out.display());
        }
        Command::Train => {
            config.validate()?;
            run::ensure_fresh_run_dir(out)?;
            let data = pipeline::load_datasets(&config)?;
            info!("inference provider calls during setup: {}", data.provider_calls);
            let summary = pipeline::train(&config, &data, out)?;
            println!("{summary}");
            if !summary.failures.is_empty() {
                return Err(Failure::Verification(format!("{} seed(s) failed", summary.failures.len())));
            }
        }
        Command::Predict { run, split } => {
            config.validate()?;
            let run_dir = run.as_deref().unwrap_or(out);
            let data = pipeline::load_datasets(&config)?;
            let split = data.split(split)?;
            for &seed in &config.run.seeds {
                let (params, tau) = pipeline::load_seed(&config, run_dir, seed)?;
                let path = run::seed_dir(out, seed).join(format!("{}.clusters.jsonl", split.name));
                let c = pipeline::predict(split, &params, tau, &path)?;
                println!("seed {seed}: {} clusters at τ = {tau} -> {}", c.clusters().len(), path.display());
            }
        }
        Command::Score { run, split, clusters, gold_as_system } => {
            config.validate()?;
            let run_dir = run.as_deref().unwrap_or(out);
            let corpus = if config.data.is_synthetic() {
                let [a, b, c] = run::synthetic_splits(&config.synthetic)?;
                match split.as_str() {
                    "train" => a.corpus,
                    "dev" => b.corpus,
                    "test" => c.corpus,
                    other => return Err(Failure::Usage(format!("unknown split `{other}`"))),
                }
            } else {
                let p = match split.as_str() {
                    "train" => &config.data.train,
                    "dev" => &config.data.dev,
                    "test" => &config.data.test,
                    other => return Err(Failure::Usage(format!("unknown split `{other}`"))),
                };
                tecr_core::corpus::load_corpus(p.as_ref().expect("validated"))?
            };
            let mut reports = Vec::new();
            if *gold_as_system {
                reports.push(("gold".to_string(), pipeline::score_gold(&corpus, &config)?));
            } else if let Some(path) = clusters {
                reports.push((path.display().to_string(), pipeline::score_file(&corpus, path, &config)?));
            } else {
                for &seed in &config.run.seeds {
                    let path = run::seed_dir(run_dir, seed).join(format!("{split}.clusters.jsonl"));
                    reports.push((format!("seed {seed}"), pipeline::score_file(&corpus, &path, &config)?));
                }
            }
            let mut text = String::new();
            for (label, r) in &reports {
                print_report(label, r);
                text.push_str(&format!("== {label}\n{r}\n"));
            }
            if reports.len() > 1 {
                let (m, s) = mean_std(&reports.iter().map(|(_, r)| r.conll_f1).collect::<Vec<_>>());
                let line = format!("CoNLL F1 over {} seeds: {:.2} ± {:.2}", reports.len(), 100.0 * m, 100.0 * s);
                println!("{line}");
                text.push_str(&line);
                text.push('\n');
            }
            write(&out.join(format!("{split}.report.txt")), &text)?;
            let json: Vec<_> = reports.iter().map(|(l, r)| serde_json::json!({ "label": l, "report": r })).collect();
            write(&out.join(format!("{split}.report.json")), &serde_json::to_string_pretty(&json).expect("json"))?;
        }
        Command::Explain { run, checkpoint, first, second } => {
            config.validate()?;
            if !config.run.mode.uses_commonsense() {
                return Err(Failure::Usage("explain needs an intra or inter model".into()));
            }
            let header = CheckpointHeader::new(config.dims(), config.run.mode);
            let params = match checkpoint {
                Some(p) => load_checkpoint(p, Some(&header))?,
                None => {
                    let seed = config.run.seeds[0];
                    pipeline::load_seed(&config, run.as_deref().unwrap_or(out), seed)?.0
                }
            };
            let data = pipeline::load_datasets(&config)?;
            let trace = pipeline::explain(&data, &params, first, second)?;
            println!("{trace}");
            let stem = format!("explain-{first}-{second}");
            write(&out.join(format!("{stem}.txt")), &trace.to_string())?;
            write(&out.join(format!("{stem}.json")), &serde_json::to_string_pretty(&trace).expect("json"))?;
        }
        Command::Gradcheck => {
            let mut gc = config.gradcheck.clone();
            if !cli.seed.is_empty() {
                gc.seeds = cli.seed.clone();
            }
            if let Some(mode) = cli.mode {
                gc.modes = vec![mode];
            }
            let report = gradient_check(&gc)?;
            println!("{report}");
            write(&out.join("gradcheck.txt"), &format!("{report}\n"))?;
            write(&out.join("gradcheck.json"), &serde_json::to_string_pretty(&report).expect("json"))?;
            if !report.pass {
                return Err(Failure::Verification("gradient check failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
