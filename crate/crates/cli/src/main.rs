use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use semvoc::features::SamplingConfig;
use semvoc::vocabulary::Strategy;
use semvoc_cli::commands::{cmd_encode, cmd_eval, cmd_extract, cmd_synth, cmd_vocab};
use semvoc_cli::{run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "semvoc", version, about = "Weakly supervised visual vocabularies for bag-of-features classification")]
struct Cli {
    /// Flat `key = value` config file; flags below override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file, for vocab and encode).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Strategy, or comma separated list for experiment.
    #[arg(long, global = true)]
    strategy: Option<String>,
    /// Vocabulary size, or comma separated list for experiment.
    #[arg(long, global = true)]
    vocab_size: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    max_files: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dense descriptors for every image of a directory.
    Extract {
        #[arg(long)]
        images: PathBuf,
        #[arg(long, default_value_t = 16)]
        grid_step: usize,
        #[arg(long, default_value_t = 16)]
        patch_size: usize,
        #[arg(long, default_value_t = 16)]
        min_side: usize,
    },
    /// Synthetic dataset with ground truth.
    Synth,
    /// Build one vocabulary.
    Vocab,
    /// Encode the dataset against a vocabulary file.
    Encode {
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Score an encoding with the configured protocols.
    Eval {
        #[arg(long)]
        encoding: PathBuf,
    },
    /// Full sweep over strategies, sizes, protocols and repetitions.
    Experiment,
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let mut overrides: Vec<(&str, String)> = Vec::new();
        if let Some(s) = self.seed {
            overrides.push(("seed", s.to_string()));
        }
        if let Some(o) = &self.out {
            overrides.push(("out", o.display().to_string()));
        }
        if let Some(s) = &self.strategy {
            overrides.push(("strategies", s.clone()));
        }
        if let Some(m) = &self.vocab_size {
            overrides.push(("vocab_sizes", m.clone()));
        }
        if let Some(a) = self.alpha {
            overrides.push(("alpha", a.to_string()));
        }
        if let Some(n) = self.max_files {
            overrides.push(("max_files", n.to_string()));
        }
        if let Some(w) = self.workers {
            overrides.push(("workers", w.to_string()));
        }
        for (k, v) in overrides {
            cfg.set(k, &v)?;
        }
        Ok(cfg)
    }

    fn out(&self) -> Result<PathBuf> {
        self.out.clone().context("--out is required for this command")
    }
}

fn single<T: Copy>(xs: &[T], what: &str) -> Result<T> {
    match xs {
        [x] => Ok(*x),
        _ => bail!("exactly one {what} is required, got {}", xs.len()),
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let cfg = cli.config()?;
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global().ok();
    }
    match &cli.command {
        Command::Extract {
            images,
            grid_step,
            patch_size,
            min_side,
        } => {
            let sampling = SamplingConfig {
                grid_step: *grid_step,
                patch_size: *patch_size,
                min_image_side: *min_side,
            };
            let n = cmd_extract(images, &sampling, &cli.out()?)?;
            log::info!("wrote {n} feature files");
        }
        Command::Synth => {
            let ds = cmd_synth(&cfg, &cli.out()?)?;
            log::info!("wrote {} images", ds.images().len());
        }
        Command::Vocab => {
            let strategy: Strategy = single(&cfg.strategies, "strategy")?;
            let m = single(&cfg.vocab_sizes, "vocabulary size")?;
            let v = cmd_vocab(&cfg, strategy, m, &cli.out()?)?;
            log::info!("built {} words with {strategy}", v.len());
        }
        Command::Encode { vocab } => {
            let e = cmd_encode(&cfg, vocab, &cli.out()?)?;
            log::info!("encoded {} images", e.len());
        }
        Command::Eval { encoding } => {
            let strategy = *cfg.strategies.first().context("no strategy configured")?;
            let rows = cmd_eval(&cfg, encoding, strategy, &cli.out()?)?;
            log::info!("wrote {rows} result rows");
        }
        Command::Experiment => {
            let summary = run_experiment(&cfg)?;
            log::info!(
                "{} cells ({} resumed, {} failed); outputs in {}",
                summary.cells,
                summary.resumed,
                summary.failures.len(),
                summary.out_dir.display()
            );
            for (cell, e) in &summary.failures {
                eprintln!("cell {} failed: {e}", cell.key());
            }
            return Ok(summary.exit_code() as u8);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
