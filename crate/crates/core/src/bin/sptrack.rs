use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use sptrack::harness::{evaluate_results, load_sequence, run_ope, synthetic_sequence, write_otb, SyntheticSpec};
use sptrack::TrackerConfig;

#[derive(Parser)]
#[command(name = "sptrack", version, about = "Superpixel tensor pooling tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one-pass evaluation on an OTB-style sequence directory.
    Track {
        #[arg(long)]
        seq: PathBuf,
        /// Flat key = value config file; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides rng_seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Write per-frame PNGs with predicted and ground-truth boxes.
        #[arg(long)]
        overlay: bool,
    },
    /// Compute success and precision curves from track outputs.
    Eval {
        /// A track output directory, or a directory of them.
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a generated test sequence in the OTB layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Grow the target by 30% at frame 30.
        #[arg(long)]
        scale_change: bool,
    },
    /// Print the default config file.
    DefaultConfig,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Track {
            seq,
            config,
            out,
            seed,
            overlay,
        } => {
            let mut cfg = match config {
                Some(p) => TrackerConfig::load(&p)?,
                None => TrackerConfig::default(),
            };
            if let Some(s) = seed {
                cfg.rng_seed = s;
            }
            let sequence = load_sequence(&seq)?;
            let overlay_dir = overlay.then(|| out.join("overlay"));
            let result = run_ope(&cfg, &sequence, overlay_dir.as_deref())
                .with_context(|| format!("tracking {}", seq.display()))?;
            result.write(&out)?;
            cfg.save(out.join("config.txt"))?;
            let s = result.summary();
            println!(
                "{}: {} frames, AUC {:.3}, precision@20 {:.3}, {:.3} s/frame",
                s.name, s.frames, s.auc, s.precision_at_20, s.runtime_per_frame
            );
        }
        Command::Eval { results, out } => {
            let report = evaluate_results(&results)?;
            report.write(&out)?;
            println!(
                "{} sequences: AUC {:.3}, precision@20 {:.3}",
                report.sequences.len(),
                report.auc,
                report.precision_at_20
            );
        }
        Command::Synth { out, scale_change } => {
            let spec = if scale_change {
                SyntheticSpec::with_scale_change()
            } else {
                SyntheticSpec::default()
            };
            let (frames, gt) = synthetic_sequence(&spec)?;
            write_otb(&out, &frames, &gt)?;
            println!("wrote {} frames to {}", frames.len(), out.display());
        }
        Command::DefaultConfig => print!("{}", TrackerConfig::default().to_string_flat()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sptrack: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
