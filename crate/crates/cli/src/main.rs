//! `tapgesture` command-line front-end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;
use crate::config::{RunConfig, DEFAULTS_HELP};

#[derive(Debug, Parser)]
#[command(name = "tapgesture", version, about = "Tap-gesture authentication and intent recognition", after_long_help = DEFAULTS_HELP)]
struct Cli {
    /// Run configuration (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random draw [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [default: available cores].
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a dataset directory: record counts, gaps, referential integrity.
    Validate {
        /// Dataset root [default: dataset.path].
        path: Option<PathBuf>,
        /// Protocols the dataset must support; auth needs NFC events, intent also activities.
        #[arg(long = "protocol")]
        protocols: Vec<String>,
    },
    /// Write a synthetic dataset to the output directory.
    Synth {
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        gestures: Option<usize>,
        #[arg(long)]
        activity_minutes: Option<f64>,
    },
    /// Evaluate protocols over the window grid and write reports.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long = "protocol")]
        protocols: Vec<String>,
        /// Number of repetition seeds.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Train one model on every window of a cell and save it.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Score a dataset with a saved model.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Model file [default: <out>/model.txt].
        #[arg(long = "model")]
        model_path: Option<PathBuf>,
    },
    /// Time single-gesture featurize + score.
    Bench {
        #[command(flatten)]
        data: DataArgs,
        /// Model file [default: <out>/model.txt].
        #[arg(long = "model")]
        model_path: Option<PathBuf>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        size: Option<f64>,
        #[arg(long)]
        offset: Option<f64>,
    },
    /// Summarize the aggregate reports of a sweep.
    Report {
        /// Sweep output directory [default: --out].
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset root [default: dataset.path, else synthesized from [synth]].
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    protocol: Option<String>,
    /// Positive user for authentication.
    #[arg(long)]
    user: Option<String>,
    #[arg(long)]
    size: Option<f64>,
    #[arg(long)]
    offset: Option<f64>,
}

impl DataArgs {
    fn apply(self, cfg: &mut RunConfig) {
        if let Some(d) = self.dataset {
            cfg.dataset.path = Some(d);
        }
    }
}

impl ModelArgs {
    fn apply(self, cfg: &mut RunConfig) {
        if let Some(p) = self.protocol {
            cfg.model.protocol = p;
        }
        if self.user.is_some() {
            cfg.model.user = self.user;
        }
        if let Some(s) = self.size {
            cfg.model.size = s;
        }
        if let Some(o) = self.offset {
            cfg.model.offset = o;
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let explicit_config = cli.config.is_some();
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    let jobs = cli.jobs.unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;

    match cli.command {
        Command::Validate { path, protocols } => {
            let root = path
                .or_else(|| cfg.dataset.path.clone())
                .ok_or_else(|| CliError::Config("validate: no dataset path given".into()))?;
            let protocols = if !protocols.is_empty() {
                cfg.evaluation.protocols = protocols;
                cfg.protocols()?
            } else if explicit_config {
                cfg.protocols()?
            } else {
                Vec::new()
            };
            commands::validate(&cfg, &root, &protocols)
        }
        Command::Synth {
            users,
            gestures,
            activity_minutes,
        } => {
            if let Some(u) = users {
                cfg.synth.users = u;
            }
            if let Some(g) = gestures {
                cfg.synth.gestures_per_user = g;
            }
            if let Some(m) = activity_minutes {
                cfg.synth.activity_minutes_per_user = m;
            }
            commands::synth(&cfg)
        }
        Command::Sweep {
            data,
            protocols,
            seeds,
            trees,
        } => {
            data.apply(&mut cfg);
            if !protocols.is_empty() {
                cfg.evaluation.protocols = protocols;
            }
            if let Some(s) = seeds {
                cfg.evaluation.seeds = s;
            }
            if let Some(t) = trees {
                cfg.forest.n_trees = t;
            }
            commands::sweep(&cfg)
        }
        Command::Train { data, model, trees } => {
            data.apply(&mut cfg);
            model.apply(&mut cfg);
            if let Some(t) = trees {
                cfg.forest.n_trees = t;
            }
            commands::train(&cfg)
        }
        Command::Eval {
            data,
            model,
            model_path,
        } => {
            data.apply(&mut cfg);
            model.apply(&mut cfg);
            let path = model_path.unwrap_or_else(|| cfg.out.join(commands::MODEL_FILE));
            commands::eval(&cfg, &path)
        }
        Command::Bench {
            data,
            model_path,
            repetitions,
            size,
            offset,
        } => {
            data.apply(&mut cfg);
            if let Some(r) = repetitions {
                cfg.model.repetitions = r;
            }
            if let Some(s) = size {
                cfg.model.size = s;
            }
            if let Some(o) = offset {
                cfg.model.offset = o;
            }
            let path = model_path.unwrap_or_else(|| cfg.out.join(commands::MODEL_FILE));
            commands::bench(&cfg, &path)
        }
        Command::Report { dir } => {
            let dir = dir.unwrap_or_else(|| cfg.out.clone());
            commands::report(&cfg, &dir)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
