use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pairrank::checkpoint::RerankerKind;
use pairrank::experiment::{self, InferenceMode, Overrides, RunConfig};
use pairrank::metrics::MetricId;
use pairrank::Result;

#[derive(Parser)]
#[command(name = "pairrank", version, about = "Generate, score, train, rerank and evaluate candidate pools")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed_data: Option<u64>,
    #[arg(long, global = true)]
    seed_model: Option<u64>,
    #[arg(long, global = true)]
    seed_shuffle: Option<u64>,
    /// Comma-separated metric list, e.g. `rouge1,rouge2,rougeL`.
    #[arg(long, global = true)]
    metrics: Option<String>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Bubble,
    #[value(name = "round_robin")]
    RoundRobin,
    Pointwise,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Pairreranker,
    Simcls,
    Summareranker,
}

impl From<Method> for RerankerKind {
    fn from(m: Method) -> Self {
        match m {
            Method::Pairreranker => RerankerKind::PairReranker,
            Method::Simcls => RerankerKind::SimCls,
            Method::Summareranker => RerankerKind::SummaReranker,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build datasets, half-split training pools and val/test pools.
    Generate,
    /// Attach metric scores to every pool file with references.
    Score,
    /// Train a reranker on the scored training pools.
    Train {
        #[arg(long, value_enum)]
        method: Method,
        /// Continue from the existing checkpoint and log.
        #[arg(long)]
        resume: bool,
    },
    /// Select one candidate per pool.
    Rerank {
        #[arg(long, value_enum)]
        method: Method,
        /// Pool file (defaults to the test pools).
        #[arg(long)]
        pools: Option<PathBuf>,
    },
    /// Metric table for selection files against top-beam, random and oracle.
    Evaluate {
        /// Selection files (defaults to everything under selections/).
        #[arg(long, num_args = 1..)]
        selections: Vec<PathBuf>,
        #[arg(long)]
        pools: Option<PathBuf>,
    },
    /// Oracle scores per decoding method and for the merged pool.
    OracleAnalysis {
        #[arg(long)]
        pools: Option<PathBuf>,
    },
    /// Agreement of the trained PairReranker with itself under slot swaps.
    Consistency {
        #[arg(long)]
        pools: Option<PathBuf>,
    },
    /// Import a candidate pool file produced elsewhere.
    ImportExternal { path: PathBuf },
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| pairrank::Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    let metrics: Option<Vec<MetricId>> = c.metrics.as_deref().map(MetricId::parse_list).transpose()?;
    cfg.apply(&Overrides {
        out: c.out.clone(),
        seed_data: c.seed_data,
        seed_model: c.seed_model,
        seed_shuffle: c.seed_shuffle,
        metrics,
        mode: c.mode.map(|m| match m {
            Mode::Bubble => InferenceMode::Bubble,
            Mode::RoundRobin => InferenceMode::RoundRobin,
            Mode::Pointwise => InferenceMode::Pointwise,
        }),
    });
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Generate => {
            for (split, n) in experiment::cmd_generate(&cfg)? {
                println!("{split}: {n} pools");
            }
        }
        Command::Score => {
            for (split, n) in experiment::cmd_score(&cfg)? {
                println!("{split}: {n} pools scored");
            }
        }
        Command::Train { method, resume } => {
            let s = experiment::cmd_train(&cfg, method.into(), resume)?;
            println!("{}: steps {}..={}", s.kind.name(), s.first_step, s.last_step);
            if let Some(a) = s.best_heldout_acc {
                println!("heldout_pair_acc {a:.4}");
            }
            println!("checkpoint {}", s.checkpoint.display());
        }
        Command::Rerank { method, pools } => {
            let s = experiment::cmd_rerank(&cfg, method.into(), pools.as_deref())?;
            println!(
                "{} selections ({} comparisons) -> {}",
                s.selections.len(),
                s.comparisons,
                s.output.display()
            );
        }
        Command::Evaluate { selections, pools } => {
            print!("{}", experiment::cmd_evaluate(&cfg, &selections, pools.as_deref())?.to_text());
        }
        Command::OracleAnalysis { pools } => {
            print!("{}", experiment::cmd_oracle_analysis(&cfg, pools.as_deref())?.to_text());
        }
        Command::Consistency { pools } => {
            let r = experiment::cmd_consistency(&cfg, pools.as_deref())?;
            println!(
                "consistency {:.4} over {} pairs ({} pools skipped)",
                r.rate, r.sampled_pairs, r.skipped_pools
            );
        }
        Command::ImportExternal { path } => {
            println!("imported {} pools", experiment::cmd_import_external(&cfg, &path)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
