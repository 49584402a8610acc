//! `drowsy`: synthetic data, augmentation, training, evaluation, streaming
//! inference and model auditing from the command line.
//!
//! Exit codes: 0 success, 1 validation or I/O failure, 2 usage error.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use drowsy_core::augment::{augment_dataset, AugmentRecipe};
use drowsy_core::bench::{bench, BenchConfig};
use drowsy_core::dataset::{
    gen_synthetic, load_jsonl, partition, summarize, write_jsonl, InvalidLinePolicy, LabeledDataset, SynthSpec,
    DEFAULT_EVAL_FRACTION,
};
use drowsy_core::eval::{evaluate, Predictor};
use drowsy_core::landmarks::{validate_frame, FeatureMode, RawFrame, Split};
use drowsy_core::model::{
    audit_size, load_model, save_model, ModelConfig, Preset, Variant, CNN_SIZE_BUDGET, MLP_SIZE_BUDGET,
};
use drowsy_core::train::{train, TrainConfig};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "drowsy", version, about = "Drowsiness classification from facial landmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitFilter {
    Train,
    Eval,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Features {
    /// All 68 landmarks.
    #[value(name = "136")]
    Full,
    /// First 67 landmarks.
    #[value(name = "134")]
    Compat,
}

impl From<Features> for FeatureMode {
    fn from(f: Features) -> Self {
        match f {
            Features::Full => FeatureMode::Full,
            Features::Compat => FeatureMode::Compat134,
        }
    }
}

#[derive(clap::Args)]
struct Input {
    /// JSONL landmark frames, or `-` for stdin.
    #[arg(long)]
    data: PathBuf,
    /// Drop invalid lines with a warning instead of failing.
    #[arg(long)]
    skip_invalid: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the deterministic synthetic landmark dataset as JSONL.
    Synth {
        /// Output path, or `-` for stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 22)]
        subjects: usize,
        /// Frames per subject, category and state.
        #[arg(long, default_value_t = 10)]
        frames: usize,
        /// Share of subjects tagged as the eval split.
        #[arg(long, default_value_t = DEFAULT_EVAL_FRACTION)]
        eval_fraction: f64,
    },
    /// Expand every frame into six geometric variants.
    Augment {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// JSON recipe with six variant transforms; built-in recipe when absent.
        #[arg(long)]
        recipe: Option<PathBuf>,
    },
    /// Train on the train-split frames, validating on held-out subjects.
    Train {
        #[command(flatten)]
        input: Input,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Training history JSON; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_parser = clap::value_parser!(Variant), default_value = "d2cnn_fld")]
        variant: Variant,
        #[arg(long, value_parser = clap::value_parser!(Preset), default_value = "budgeted")]
        preset: Preset,
        /// Comma-separated filter counts for the four conv blocks.
        #[arg(long, value_delimiter = ',')]
        filters: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value = "136")]
        features: Features,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 0.9)]
        momentum: f64,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 100)]
        max_epochs: u32,
        /// Epochs without a new best validation accuracy before stopping.
        #[arg(long, default_value_t = 5)]
        patience: u32,
        /// Epochs that always run before plateau stopping applies.
        #[arg(long, default_value_t = 0)]
        min_epochs: u32,
        /// Share of training subjects held out for validation.
        #[arg(long, default_value_t = DEFAULT_EVAL_FRACTION)]
        val_fraction: f64,
    },
    /// Per-category accuracy of a model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "eval")]
        split: SplitFilter,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Classify a frame stream, one JSON line per frame.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: Input,
        /// Drowsy probability at or above which a line is flagged as an alert.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Time single-frame detection and end-to-end throughput.
    Bench {
        #[arg(long)]
        model: PathBuf,
        /// Probe frames; a small synthetic set when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long, default_value_t = 100)]
        warmup: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Serialized size and parameter counts of a model file.
    Audit {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Print a model file's metadata and architecture.
    Inspect { model: PathBuf },
    /// Frame counts per split and category.
    Summarize {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin().lock()));
    }
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(Box::new(BufReader::new(f)))
}

fn open_output(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn policy(skip: bool) -> InvalidLinePolicy {
    if skip {
        InvalidLinePolicy::Skip
    } else {
        InvalidLinePolicy::FailFast
    }
}

fn load(input: &Input) -> Result<LabeledDataset> {
    let report = load_jsonl(open_input(&input.data)?, policy(input.skip_invalid))
        .with_context(|| format!("reading {}", input.data.display()))?;
    for (line, message) in &report.rejected {
        eprintln!("warning: skipped line {line}: {message}");
    }
    Ok(report.dataset)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn print(text: &str) -> Result<()> {
    emit(&mut io::stdout().lock(), text)
}

fn no_csv(what: &str) -> Result<()> {
    bail!("{what} has no csv form; use text or json")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { out, seed, subjects, frames, eval_fraction } => {
            let spec = SynthSpec {
                n_subjects: subjects,
                frames_per_subject_per_state: frames,
                seed,
                eval_fraction,
                ..SynthSpec::default()
            };
            write_jsonl(&gen_synthetic(&spec)?, open_output(&out)?)?;
        }
        Command::Augment { input, out, seed, recipe } => {
            let recipe = match recipe {
                Some(p) => AugmentRecipe::from_json(
                    &std::fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))?,
                )?,
                None => AugmentRecipe::default(),
            };
            write_jsonl(&augment_dataset(&load(&input)?, &recipe, seed)?, open_output(&out)?)?;
        }
        Command::Train {
            input,
            out,
            report,
            variant,
            preset,
            filters,
            features,
            seed,
            lr,
            momentum,
            batch_size,
            max_epochs,
            patience,
            min_epochs,
            val_fraction,
        } => {
            let ds = load(&input)?.with_split(Split::Train);
            if ds.is_empty() {
                bail!("{} holds no train-split frames", input.data.display());
            }
            let (train_ds, val_ds) = partition(&ds, val_fraction)?;
            let feature_mode = FeatureMode::from(features);
            let config = ModelConfig {
                variant,
                preset,
                filters,
                input_points: feature_mode.points(),
                ..ModelConfig::default()
            };
            let hyper = TrainConfig { lr, momentum, batch_size, max_epochs, patience, min_epochs, seed, feature_mode };
            let run = train(&config, &train_ds, &val_ds, &hyper)?;
            save_model(&run.artifact, &out).with_context(|| format!("writing {}", out.display()))?;
            let history = serde_json::to_string_pretty(&run)?;
            match report {
                Some(p) => emit(&mut *open_output(&p)?, &history)?,
                None => print(&history)?,
            }
        }
        Command::Eval { model, input, split, format } => {
            let artifact = load_model(&model)?;
            let ds = load(&input)?;
            let ds = match split {
                SplitFilter::Train => ds.with_split(Split::Train),
                SplitFilter::Eval => ds.with_split(Split::Eval),
                SplitFilter::All => ds,
            };
            let report = evaluate(&artifact, &ds)?;
            match format {
                Format::Json => print(&serde_json::to_string_pretty(&report)?)?,
                Format::Text => print(&report.to_text())?,
                Format::Csv => no_csv("eval")?,
            }
        }
        Command::Infer { model, input, threshold } => infer(&model, &input, threshold)?,
        Command::Bench { model, data, iterations, warmup, format } => {
            let artifact = load_model(&model)?;
            let probe = match data {
                Some(p) => load(&Input { data: p, skip_invalid: false })?,
                None => gen_synthetic(&SynthSpec {
                    n_subjects: 2,
                    frames_per_subject_per_state: 5,
                    ..SynthSpec::default()
                })?,
            };
            let report = bench(&artifact, &probe, BenchConfig { iterations, warmup })?;
            match format {
                Format::Json => print(&serde_json::to_string_pretty(&report)?)?,
                Format::Text => print(&report.to_text())?,
                Format::Csv => no_csv("bench")?,
            }
        }
        Command::Audit { model, format } => {
            let file_bytes = std::fs::metadata(&model)
                .with_context(|| format!("cannot stat {}", model.display()))?
                .len();
            let artifact = load_model(&model)?;
            let budget = match artifact.metadata.variant {
                Variant::D2cnnFld => CNN_SIZE_BUDGET,
                Variant::D2mlpFld => MLP_SIZE_BUDGET,
            };
            let size = audit_size(&artifact);
            let report = json!({
                "model": model.display().to_string(),
                "variant": artifact.metadata.variant,
                "file_bytes": file_bytes,
                "audit_size_bytes": size,
                "budget_bytes": budget,
                "within_budget": size <= budget,
                "parameter_count": artifact.param_count(),
                "parameter_memory_bytes": artifact.param_memory_bytes(),
            });
            match format {
                Format::Json => print(&serde_json::to_string_pretty(&report)?)?,
                Format::Text => {
                    let obj = report.as_object().expect("object literal");
                    let lines: Vec<String> = obj.iter().map(|(k, v)| format!("{k:<24} {v}")).collect();
                    print(&lines.join("\n"))?
                }
                Format::Csv => no_csv("audit")?,
            }
        }
        Command::Inspect { model } => {
            let artifact = load_model(&model)?;
            let doc = json!({
                "format_version": drowsy_core::model::FORMAT_VERSION,
                "metadata": artifact.metadata,
                "architecture": artifact.spec,
                "parameter_count": artifact.param_count(),
            });
            print(&serde_json::to_string_pretty(&doc)?)?;
        }
        Command::Summarize { input, format } => {
            let summary = summarize(&load(&input)?);
            match format {
                Format::Text => print(&summary.to_text())?,
                Format::Csv => print(&summary.to_csv())?,
                Format::Json => print(&serde_json::to_string_pretty(&summary)?)?,
            }
        }
    }
    Ok(())
}

/// Streams frames line by line so arbitrarily long inputs run in constant memory.
fn infer(model: &Path, input: &Input, threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        bail!("threshold must lie in [0, 1], got {threshold}");
    }
    let predictor = Predictor::new(&load_model(model)?)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, line) in open_input(&input.data)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let frame = serde_json::from_str::<RawFrame>(&line)
            .map_err(anyhow::Error::from)
            .and_then(|raw| Ok(validate_frame(raw)?));
        let frame = match frame {
            Ok(f) => f,
            Err(e) if input.skip_invalid => {
                eprintln!("warning: skipped line {}: {e:#}", i + 1);
                continue;
            }
            Err(e) => return Err(e.context(format!("line {}", i + 1))),
        };
        let p = predictor.predict(&frame)?;
        let record = json!({
            "subject": frame.subject,
            "category": frame.category,
            "frame": frame.frame_index,
            "variant": frame.variant,
            "probabilities": p.probabilities,
            "class": p.class,
            "alert": p.probabilities[1] >= threshold,
        });
        writeln!(out, "{record}")?;
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
