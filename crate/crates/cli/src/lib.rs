//! Command-line front end for the `adcnn` pipeline.
//!
//! Every subcommand works inside one directory (`--workdir`) with fixed
//! file names taken from the `[paths]` table of the run configuration.

pub mod commands;
pub mod config;
mod logging;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

pub use commands::Workspace;
pub use config::{ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "adcnn", version, about = "Architectural-distortion detection pipeline on grayscale images")]
pub struct Cli {
    /// Directory holding every input and output of the pipeline
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,
    /// TOML run configuration; missing keys take their defaults
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream of the run
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a balanced synthetic ROI set and its manifest
    Synth(SynthArgs),
    /// Expand every ROI of the manifest into its 36 augmented variants
    Augment(AugmentArgs),
    /// Assign train/val/test splits to the augmented manifest
    Split(SplitArgs),
    /// Train the network; writes the checkpoint and the epoch history
    Train(TrainArgs),
    /// ROC, AUC and accuracy of the checkpoint on one split
    Eval(EvalArgs),
    /// Generate a synthetic whole exam with marked distortions
    SynthExam(ExamArgs),
    /// Sliding-window scan of whole exams
    Scan(ScanArgs),
    /// Finite-difference check of the network gradient
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Total number of ROIs, half per class
    #[arg(long)]
    pub count: Option<usize>,
    /// Side length of the square ROIs
    #[arg(long)]
    pub image_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Bits per sample of the written images (8 or 16)
    #[arg(long)]
    pub depth: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// roi-level or sample-level
    #[arg(long)]
    pub mode: Option<String>,
    /// Training share
    #[arg(long)]
    pub train: Option<f64>,
    /// Validation share
    #[arg(long)]
    pub validation: Option<f64>,
    /// Test share
    #[arg(long)]
    pub test: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Epochs without validation improvement before stopping
    #[arg(long)]
    pub patience: Option<usize>,
    /// Network input side; must match the sample images
    #[arg(long)]
    pub input_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// train, val or test
    #[arg(long)]
    pub split: Option<String>,
    /// Score at or above which a sample counts as positive
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExamArgs {
    /// File stem of the generated exam
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    /// Distortion center as ROW,COL; repeat for several, replaces the configured list
    #[arg(long = "mark", value_parser = parse_mark)]
    pub marks: Vec<[usize; 2]>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Exam image to scan, relative to the working directory; repeatable.
    /// Defaults to every .pgm in the exams directory. Marks are read from
    /// `<stem>.marks.csv` beside each exam when present.
    #[arg(long = "exam")]
    pub exams: Vec<PathBuf>,
    #[arg(long)]
    pub roi_size: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Minimum breast-mask coverage of a scanned window
    #[arg(long)]
    pub coverage_min: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub input_size: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_coordinates: Option<usize>,
    /// Largest accepted relative error
    #[arg(long)]
    pub tolerance: Option<f64>,
}

fn parse_mark(s: &str) -> std::result::Result<[usize; 2], String> {
    let (r, c) = s.split_once(',').ok_or_else(|| format!("expected ROW,COL, got {s:?}"))?;
    let n = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok([n(r)?, n(c)?])
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

impl Cli {
    /// The file configuration (or defaults) with this invocation's flags on top.
    pub fn resolve_config(&self) -> std::result::Result<RunConfig, ConfigError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        set(&mut c.seed, self.seed);
        match &self.command {
            Command::Synth(a) => {
                set(&mut c.synth.count, a.count);
                set(&mut c.synth.image_size, a.image_size);
            }
            Command::Augment(a) => set(&mut c.augment.depth, a.depth),
            Command::Split(a) => {
                set(&mut c.split.mode, a.mode.clone());
                set(&mut c.split.train, a.train);
                set(&mut c.split.validation, a.validation);
                set(&mut c.split.test, a.test);
            }
            Command::Train(a) => {
                set(&mut c.train.batch_size, a.batch_size);
                set(&mut c.train.learning_rate, a.learning_rate);
                set(&mut c.train.momentum, a.momentum);
                set(&mut c.train.max_epochs, a.max_epochs);
                set(&mut c.train.patience, a.patience);
                set(&mut c.network.input_size, a.input_size);
            }
            Command::Eval(a) => {
                set(&mut c.eval.split, a.split.clone());
                set(&mut c.eval.threshold, a.threshold);
            }
            Command::SynthExam(a) => {
                set(&mut c.exam.id, a.id.clone());
                set(&mut c.exam.height, a.height);
                set(&mut c.exam.width, a.width);
                if !a.marks.is_empty() {
                    c.exam.marks = a.marks.clone();
                }
            }
            Command::Scan(a) => {
                set(&mut c.scan.roi_size, a.roi_size);
                set(&mut c.scan.stride, a.stride);
                set(&mut c.scan.coverage_min, a.coverage_min);
            }
            Command::Gradcheck(a) => {
                set(&mut c.gradcheck.input_size, a.input_size);
                set(&mut c.gradcheck.batch_size, a.batch_size);
                set(&mut c.gradcheck.epsilon, a.epsilon);
                set(&mut c.gradcheck.max_coordinates, a.max_coordinates);
                set(&mut c.gradcheck.tolerance, a.tolerance);
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn command_name(&self) -> &'static str {
        match self.command {
            Command::Synth(_) => "synth",
            Command::Augment(_) => "augment",
            Command::Split(_) => "split",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::SynthExam(_) => "synth-exam",
            Command::Scan(_) => "scan",
            Command::Gradcheck(_) => "gradcheck",
        }
    }
}

/// Runs the subcommand; the returned line goes to stdout.
pub fn execute(cli: &Cli, ws: &Workspace) -> Result<String> {
    Ok(match &cli.command {
        Command::Synth(_) => format!("rois={}", commands::synth(ws)?.len()),
        Command::Augment(_) => format!("samples={}", commands::augment(ws)?.len()),
        Command::Split(_) => {
            use adcnn::dataset::Split;
            let m = commands::split(ws)?;
            let n = |s| m.in_split(s).count();
            format!("train={} val={} test={}", n(Split::Train), n(Split::Val), n(Split::Test))
        }
        Command::Train(_) => {
            let (net, hist) = commands::train_model(ws)?;
            format!("epochs={} best_epoch={}", hist.epochs.len(), net.meta.epoch)
        }
        Command::Eval(_) => {
            let r = commands::eval(ws)?;
            format!("split={} n={} auc={:.6} accuracy={:.6}", r.split.as_str(), r.scores.len(), r.auc, r.accuracy)
        }
        Command::SynthExam(_) => format!("exam={}", commands::make_exam(ws)?.display()),
        Command::Scan(a) => {
            let results = commands::scan(ws, &a.exams)?;
            let mut out = adcnn::scanner::SUMMARY_HEADER.to_string();
            for r in &results {
                out.push('\n');
                out.push_str(&r.summary_line());
            }
            out
        }
        Command::Gradcheck(_) => {
            let r = commands::gradcheck(ws)?;
            let tol = ws.config.gradcheck.tolerance;
            if !(r.max_relative_error < tol) {
                anyhow::bail!("gradient check failed: max relative error {:e} >= {tol:e}", r.max_relative_error);
            }
            format!("max_relative_error={:e} checked={} skipped_kinks={}", r.max_relative_error, r.checked, r.skipped_kinks)
        }
    })
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Validation failures exit 1, everything else 2.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let invalid = err.chain().any(|e| {
        e.is::<ConfigError>() || matches!(e.downcast_ref::<adcnn::Error>(), Some(adcnn::Error::Config(_)))
    });
    if invalid {
        EXIT_INVALID
    } else {
        EXIT_RUNTIME
    }
}

/// Full process behaviour: parse, resolve, log, execute.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let config = match cli.resolve_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let ws = Workspace::new(&cli.workdir, config);
    if let Err(e) = logging::start(&ws, cli.command_name(), &args) {
        eprintln!("error: cannot open run log: {e:#}");
        return EXIT_RUNTIME;
    }
    let code = match execute(&cli, &ws) {
        Ok(line) => {
            println!("{line}");
            let _ = std::io::stdout().flush();
            EXIT_OK
        }
        Err(e) => {
            log::error!("{e:#}");
            exit_code(&e)
        }
    };
    logging::finish(code);
    code
}
