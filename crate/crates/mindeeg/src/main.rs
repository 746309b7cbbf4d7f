//! Command-line interface: dataset synthesis, training under the split
//! protocols, evaluation, ablation runs, and codebook-usage export.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use mindeeg::codebook::histogram_csv;
use mindeeg::data::{synth_generate, Dataset, SynthSpec};
use mindeeg::metrics::{aggregate_accuracy, format_acc_std};
use mindeeg::splits::{split_loso, split_subject_dependent, DependentProtocol};
use mindeeg::train::{collect_usage, evaluate, load_checkpoint, run_training, save_checkpoint};
use mindeeg::{Error, ModelConfig, Result, SplitPlan};

#[derive(Parser)]
#[command(name = "mindeeg", about = "Multi-granularity EEG graph network with discrete codebooks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Protocol {
    /// Subject-dependent, last two trials per class held out.
    Dep,
    /// Leave-one-subject-out.
    Loso,
    /// Subject-dependent three-fold over each session's trial sequence.
    Threefold,
    /// Subject-dependent, first 21 trials train.
    Mped,
}

#[derive(Subcommand)]
enum Command {
    /// Train under a split protocol and write checkpoints plus metrics.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Feature file path, or `synth` for the built-in generator.
        #[arg(long)]
        data: String,
        #[arg(long, value_enum)]
        protocol: Protocol,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a feature file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Export codebook usage histograms for a dataset pass.
    CodebookStats {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output directory for one CSV per codebook.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train with one feature stream ablated.
    Ablate {
        /// Stream to drop: global, intra, inter or regional.
        #[arg(long)]
        drop: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: String,
        #[arg(long, value_enum)]
        protocol: Protocol,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic feature file.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        subjects: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long = "per-class", default_value_t = 8)]
        per_class: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_data(spec: &str, cfg: &ModelConfig) -> Result<Dataset> {
    if spec == "synth" {
        Ok(synth_generate(&SynthSpec {
            n: cfg.n,
            d: cfg.d,
            ..SynthSpec::new(cfg.seed, 6, cfg.classes, 8)
        }))
    } else {
        Dataset::load(Path::new(spec))
    }
}

fn make_plans(ds: &Dataset, protocol: Protocol) -> Result<Vec<SplitPlan>> {
    match protocol {
        Protocol::Dep => split_subject_dependent(ds, DependentProtocol::LastTwoPerClass),
        Protocol::Loso => split_loso(ds),
        Protocol::Threefold => split_subject_dependent(ds, DependentProtocol::ThreeFold),
        Protocol::Mped => {
            split_subject_dependent(ds, DependentProtocol::FirstTrialsTrain { train_trials: 21 })
        }
    }
}

fn train_command(
    cfg: ModelConfig,
    data: &str,
    protocol: Protocol,
    out_dir: &Path,
) -> Result<()> {
    let ds = load_data(data, &cfg)?;
    let plans = make_plans(&ds, protocol)?;
    std::fs::create_dir_all(out_dir)?;
    let mut reports = Vec::new();
    for plan in &plans {
        println!("== plan {} ({} train / {} test) ==", plan.name, plan.train.len(), plan.test.len());
        let outcome = run_training(&cfg, &ds, plan, |epoch, loss| {
            if epoch % 10 == 0 || epoch + 1 == cfg.epochs {
                println!("  epoch {epoch:4}  loss {loss:.6}");
            }
        })?;
        println!(
            "  train acc {:.2}%  test acc {:.2}%  macro-F1 {:.2}%",
            100.0 * outcome.train_accuracy,
            100.0 * outcome.report.accuracy,
            100.0 * outcome.report.macro_f1
        );
        save_checkpoint(
            &out_dir.join(format!("{}.ckpt", plan.name)),
            &outcome.model,
            &outcome.normalizer,
        )?;
        for (name, hist) in &outcome.histograms {
            std::fs::write(
                out_dir.join(format!("{}_{name}_usage.csv", plan.name)),
                histogram_csv(hist),
            )?;
        }
        reports.push(outcome.report);
    }
    let (mean, std) = aggregate_accuracy(&reports);
    let summary = format!("ACC {} over {} plans\n", format_acc_std(mean, std), reports.len());
    print!("{summary}");
    std::fs::write(out_dir.join("metrics.txt"), summary)?;
    Ok(())
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            config,
            data,
            protocol,
            out,
        } => {
            let cfg = ModelConfig::load(&config)?;
            train_command(cfg, &data, protocol, &out)
        }
        Command::Eval { checkpoint, data } => {
            let (model, norm) = load_checkpoint(&checkpoint)?;
            let ds = Dataset::load(&data)?;
            let all: Vec<usize> = (0..ds.len()).collect();
            let report = evaluate(&model, &ds, &norm, &all)?;
            println!(
                "accuracy {:.2}%  macro-F1 {:.2}%  ({} samples)",
                100.0 * report.accuracy,
                100.0 * report.macro_f1,
                report.total
            );
            println!("confusion (rows = truth):");
            for row in &report.confusion {
                let cells: Vec<String> = row.iter().map(|c| format!("{c:5}")).collect();
                println!("  {}", cells.join(" "));
            }
            Ok(())
        }
        Command::CodebookStats {
            checkpoint,
            data,
            out,
        } => {
            let (model, norm) = load_checkpoint(&checkpoint)?;
            let ds = Dataset::load(&data)?;
            let all: Vec<usize> = (0..ds.len()).collect();
            std::fs::create_dir_all(&out)?;
            for (name, hist) in collect_usage(&model, &ds, &norm, &all) {
                let path = out.join(format!("{name}_usage.csv"));
                std::fs::write(&path, histogram_csv(&hist))?;
                let used = hist.iter().filter(|r| r.1 > 0).count();
                println!("{name}: {used} embeddings used -> {}", path.display());
            }
            Ok(())
        }
        Command::Ablate {
            drop,
            config,
            data,
            protocol,
            out,
        } => {
            let mut cfg = ModelConfig::load(&config)?;
            match drop.as_str() {
                "global" => cfg.drop_global = true,
                "intra" => cfg.drop_intra = true,
                "inter" => cfg.drop_inter = true,
                "regional" => cfg.drop_regional = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown ablation stream `{other}` (expected global, intra, inter or regional)"
                    )))
                }
            }
            cfg.validate()?;
            train_command(cfg, &data, protocol, &out)
        }
        Command::Synth {
            seed,
            subjects,
            classes,
            per_class,
            out,
        } => {
            let ds = synth_generate(&SynthSpec::new(seed, subjects, classes, per_class));
            ds.save(&out)?;
            println!(
                "wrote {} samples ({subjects} subjects, {classes} classes) to {}",
                ds.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
