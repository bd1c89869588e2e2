use std::path::{Path, PathBuf};
use std::process::ExitCode;

use camscore::aggregator::{Optimizer, TrainConfig};
use camscore::commands::{self, RunManifest, SynthInput, DEFAULT_CANVAS};
use camscore::pixel::PixelMetricConfig;
use camscore::stats::JudgmentFormat;
use camscore::synthetic::Perturbation;
use camscore::{DepthMode, Error, ScoreConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "camscore", version, about = "Cyclic image-caption evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare one generated bundle against its original.
    Score {
        ori: PathBuf,
        gen: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Score every {"id","ori","gen"} line of a JSONL pairs file.
    Batch {
        pairs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = default_parallelism())]
        parallelism: usize,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Fit the aggregator to a scores file joined with human judgments.
    Train {
        scores: PathBuf,
        judgments: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        /// Model JSON to write.
        #[arg(long)]
        out: PathBuf,
        /// Training log CSV [default: <out>.train.csv]
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 3e-5)]
        learning_rate: f64,
        #[arg(long, default_value_t = 500)]
        max_epochs: usize,
        #[arg(long, default_value_t = 20)]
        patience: usize,
        #[arg(long, default_value_t = 0.1)]
        validation_fraction: f64,
        /// Hidden layer widths.
        #[arg(long, value_delimiter = ',', default_value = "32,16")]
        hidden: Vec<usize>,
        #[arg(long, value_enum, default_value_t = OptimizerArg::Sgd)]
        optimizer: OptimizerArg,
    },
    /// Kendall tau-b / tau-c between a score column and human judgments.
    Correlate {
        scores: PathBuf,
        judgments: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long, default_value = "camscore")]
        field: String,
    },
    /// Pairwise ranking accuracy; scores are looked up as <id>#A and <id>#B.
    RankAccuracy {
        scores: PathBuf,
        pairs: PathBuf,
        #[arg(long, default_value = "camscore")]
        field: String,
    },
    /// Render synthetic scenes to bundle directories.
    Synth {
        /// Scene file (.scene.json); omit when using --random.
        #[arg(required_unless_present = "random", conflicts_with = "random")]
        scene: Option<PathBuf>,
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Canvas side in pixels for --random scenes.
        #[arg(long, default_value_t = DEFAULT_CANVAS)]
        canvas: usize,
        /// Also write a perturbed variant of every scene.
        #[arg(long, value_enum)]
        perturb: Option<PerturbArg>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct ScoringArgs {
    #[arg(long, default_value_t = 2.0)]
    p_norm: f64,
    #[arg(long, default_value_t = 512)]
    canonical_size: usize,
    #[arg(long, value_enum, default_value_t = DepthModeArg::Pairwise)]
    depth_mode: DepthModeArg,
}

impl ScoringArgs {
    fn config(&self) -> Result<ScoreConfig<f64>, Error> {
        Ok(ScoreConfig {
            pixel: PixelMetricConfig::new(self.p_norm, self.canonical_size)?,
            depth_mode: match self.depth_mode {
                DepthModeArg::Pairwise => DepthMode::Pairwise,
                DepthModeArg::WholeImage => DepthMode::WholeImage,
            },
        })
    }

    fn record(&self, m: &mut RunManifest) {
        m.config.insert("p_norm".into(), self.p_norm.to_string());
        m.config.insert("canonical_size".into(), self.canonical_size.to_string());
        m.config.insert("depth_mode".into(), format!("{:?}", self.depth_mode));
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DepthModeArg {
    Pairwise,
    WholeImage,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Expert,
    Crowdflower,
    Composite,
    Pairs,
}

impl From<FormatArg> for JudgmentFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Expert => JudgmentFormat::Expert,
            FormatArg::Crowdflower => JudgmentFormat::Crowdflower,
            FormatArg::Composite => JudgmentFormat::Composite,
            FormatArg::Pairs => JudgmentFormat::Pairs,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
#[value(rename_all = "snake_case")]
enum PerturbArg {
    DropObject,
    AddObject,
    MoveObject,
    Recolor,
    ReorderDepth,
}

impl From<PerturbArg> for Perturbation {
    fn from(p: PerturbArg) -> Self {
        match p {
            PerturbArg::DropObject => Perturbation::DropObject,
            PerturbArg::AddObject => Perturbation::AddObject,
            PerturbArg::MoveObject => Perturbation::MoveObject,
            PerturbArg::Recolor => Perturbation::Recolor,
            PerturbArg::ReorderDepth => Perturbation::ReorderDepth,
        }
    }
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn print_json<S: Serialize>(value: &S) {
    println!("{}", serde_json::to_string(value).expect("output serializes"));
}

fn report_unmatched(ids: &[String]) {
    if !ids.is_empty() {
        eprintln!("unmatched ids ({}): {}", ids.len(), ids.join(", "));
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let name = match &cli.command {
        Command::Score { .. } => "score",
        Command::Batch { .. } => "batch",
        Command::Train { .. } => "train",
        Command::Correlate { .. } => "correlate",
        Command::RankAccuracy { .. } => "rank-accuracy",
        Command::Synth { .. } => "synth",
    };
    let (mut manifest, started) = RunManifest::start(name);
    match cli.command {
        Command::Score {
            ori,
            gen,
            model,
            scoring,
        } => {
            scoring.record(&mut manifest);
            manifest.inputs = vec![path_str(&ori), path_str(&gen)];
            manifest.inputs.extend(model.as_deref().map(path_str));
            print_json(&commands::cmd_score(&ori, &gen, &scoring.config()?, model.as_deref())?);
        }
        Command::Batch {
            pairs,
            out,
            model,
            parallelism,
            scoring,
        } => {
            scoring.record(&mut manifest);
            manifest.config.insert("parallelism".into(), parallelism.to_string());
            manifest.inputs = vec![path_str(&pairs)];
            manifest.inputs.extend(model.as_deref().map(path_str));
            manifest.output = Some(path_str(&out));
            let summary = commands::cmd_batch(&pairs, model.as_deref(), &out, parallelism, &scoring.config()?)?;
            print_json(&summary);
        }
        Command::Train {
            scores,
            judgments,
            format,
            out,
            log,
            seed,
            batch_size,
            learning_rate,
            max_epochs,
            patience,
            validation_fraction,
            hidden,
            optimizer,
        } => {
            let cfg = TrainConfig {
                batch_size,
                learning_rate,
                max_epochs,
                patience,
                validation_fraction,
                hidden,
                optimizer: match optimizer {
                    OptimizerArg::Sgd => Optimizer::Sgd,
                    OptimizerArg::Adam => Optimizer::Adam,
                },
            };
            for (k, v) in [
                ("format", format!("{format:?}")),
                ("seed", seed.to_string()),
                ("batch_size", batch_size.to_string()),
                ("learning_rate", learning_rate.to_string()),
                ("max_epochs", max_epochs.to_string()),
                ("patience", patience.to_string()),
                ("validation_fraction", validation_fraction.to_string()),
                ("hidden", format!("{:?}", cfg.hidden)),
                ("optimizer", format!("{optimizer:?}")),
            ] {
                manifest.config.insert(k.into(), v);
            }
            manifest.inputs = vec![path_str(&scores), path_str(&judgments)];
            manifest.output = Some(path_str(&out));
            let summary = commands::cmd_train(&scores, &judgments, format.into(), &cfg, seed, &out, log.as_deref())?;
            report_unmatched(&summary.unmatched);
            print_json(&summary);
        }
        Command::Correlate {
            scores,
            judgments,
            format,
            field,
        } => {
            manifest.config.insert("format".into(), format!("{format:?}"));
            manifest.config.insert("field".into(), field.clone());
            manifest.inputs = vec![path_str(&scores), path_str(&judgments)];
            let outcome = commands::cmd_correlate(&scores, &judgments, format.into(), &field)?;
            report_unmatched(&outcome.unmatched);
            print_json(&outcome.report);
        }
        Command::RankAccuracy { scores, pairs, field } => {
            manifest.config.insert("field".into(), field.clone());
            manifest.inputs = vec![path_str(&scores), path_str(&pairs)];
            let outcome = commands::cmd_rank_accuracy(&scores, &pairs, &field)?;
            report_unmatched(&outcome.unmatched);
            print_json(&outcome.report);
        }
        Command::Synth {
            scene,
            random,
            seed,
            canvas,
            perturb,
            out,
        } => {
            let input = match (scene, random) {
                (Some(path), _) => {
                    manifest.inputs = vec![path_str(&path)];
                    SynthInput::Scene(path)
                }
                (None, Some(n)) => {
                    manifest.config.insert("random".into(), n.to_string());
                    manifest.config.insert("seed".into(), seed.to_string());
                    manifest.config.insert("canvas".into(), canvas.to_string());
                    SynthInput::Random { n, seed, canvas }
                }
                (None, None) => unreachable!("clap requires one of scene/--random"),
            };
            if let Some(p) = perturb {
                manifest.config.insert("perturb".into(), Perturbation::from(p).name().into());
            }
            manifest.output = Some(path_str(&out));
            let written = commands::cmd_synth(&input, perturb.map(Into::into), &out)?;
            print_json(&written.iter().map(|p| path_str(p)).collect::<Vec<_>>());
        }
    }
    let manifest = manifest.finish(started);
    eprintln!("{}", serde_json::to_string(&manifest).expect("manifest serializes"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CAMSCORE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if let Error::Unmatched { ids, .. } = &e {
                report_unmatched(ids);
            }
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
