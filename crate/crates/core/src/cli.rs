//! The `hiereval` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::annotation::{parse_ground_truth, to_json_bytes, validate_dataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate_task1_file, evaluate_task2_file, report_to_json, EvalOptions};
use crate::fixtures::{generate_scene, SceneConfig};
use crate::leaderboard::{load_manifest, partition_submissions, rank_entries, render_report, ReportFormat, Task};
use crate::metrics::{char_histogram, word_density};

/// Process exit status. The codes are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExitStatus {
    pub code: i32,
}

impl ExitStatus {
    pub const SUCCESS: ExitStatus = ExitStatus { code: 0 };
    pub const FAILURE: ExitStatus = ExitStatus { code: 1 };
    pub const USAGE: ExitStatus = ExitStatus { code: 2 };
    pub const INVALID: ExitStatus = ExitStatus { code: 3 };
}

#[derive(Parser)]
#[command(name = "hiereval", version, about = "Hierarchical text detection and word recognition evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a paragraph/line/word forest (Task 1).
    EvalTask1(EvalArgs),
    /// Score transcribed word polygons (Task 2).
    EvalTask2(EvalArgs),
    /// Check a ground-truth file; exits 3 if it has errors.
    Validate {
        #[arg(long)]
        gt: PathBuf,
    },
    /// Character histogram and word density of a ground-truth file.
    Stats {
        #[arg(long)]
        gt: PathBuf,
    },
    /// Deduplicate and rank the submissions listed in a manifest.
    Leaderboard {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_task)]
        task: Task,
        /// table, csv or structured.
        #[arg(long, default_value = "table", value_parser = parse_format)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the superseded submissions, as JSON.
        #[arg(long)]
        removed_out: Option<PathBuf>,
    },
    /// Generate a synthetic scene with noisy submissions.
    GenFixtures {
        #[arg(long)]
        seed: u64,
        /// JSON scene configuration; defaults are used for missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    sub: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include per-image scores.
    #[arg(long)]
    per_image: bool,
    #[arg(long, default_value_t = 0.5)]
    iou_threshold: f64,
    /// Match on `iou > threshold` instead of `iou >= threshold`.
    #[arg(long)]
    exclusive_threshold: bool,
    #[arg(long, default_value_t = 0.5)]
    dontcare_threshold: f64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Drop predictions for unknown image ids instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Task 1: score all-illegible lines and paragraphs like legible ones.
    #[arg(long)]
    no_dontcare_propagation: bool,
}

impl EvalArgs {
    fn options(&self) -> EvalOptions {
        EvalOptions {
            iou_threshold: self.iou_threshold,
            inclusive_threshold: !self.exclusive_threshold,
            dontcare_threshold: self.dontcare_threshold,
            parallelism: self.workers,
            per_image_breakdown: self.per_image,
            strict: !self.lenient,
            task1_dontcare_propagation: !self.no_dontcare_propagation,
        }
    }
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<ReportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Serialize)]
struct CharCount {
    char: String,
    count: u64,
}

#[derive(Serialize)]
struct Stats {
    images: usize,
    words: usize,
    word_density: f64,
    characters: Vec<CharCount>,
}

/// Writes to `out`, or standard output when absent.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn error_status(e: &Error) -> ExitStatus {
    match e {
        Error::Io { .. } => ExitStatus::USAGE,
        _ => ExitStatus::FAILURE,
    }
}

fn execute(command: Command) -> Result<ExitStatus> {
    match command {
        Command::EvalTask1(a) => {
            let report = evaluate_task1_file(&a.gt, &a.sub, &a.options())?;
            emit(a.out.as_deref(), &report_to_json(&report))?;
        }
        Command::EvalTask2(a) => {
            let report = evaluate_task2_file(&a.gt, &a.sub, &a.options())?;
            emit(a.out.as_deref(), &report_to_json(&report))?;
        }
        Command::Validate { gt } => {
            let bytes = read(&gt)?;
            let ds = match parse_ground_truth(&bytes) {
                Ok(ds) => ds,
                Err(e) => {
                    eprintln!("hiereval: {e}");
                    return Ok(ExitStatus::INVALID);
                }
            };
            let report = validate_dataset(&ds);
            emit(None, &report_to_json(&report))?;
            if report.error_count() > 0 {
                return Ok(ExitStatus::INVALID);
            }
        }
        Command::Stats { gt } => {
            let ds = parse_ground_truth(&read(&gt)?)?;
            let stats = Stats {
                images: ds.images().len(),
                words: ds.word_count(),
                word_density: word_density(&ds)?,
                characters: char_histogram(&ds)
                    .into_iter()
                    .map(|(c, count)| CharCount {
                        char: c.to_string(),
                        count,
                    })
                    .collect(),
            };
            emit(None, &report_to_json(&stats))?;
        }
        Command::Leaderboard {
            manifest,
            task,
            format,
            out,
            removed_out,
        } => {
            let (manifest_task, records) = load_manifest(&manifest)?;
            if manifest_task != task {
                return Err(Error::contract(format!("manifest holds {manifest_task} entries, not {task}")));
            }
            let dedup = partition_submissions(&records);
            let rows = rank_entries(&dedup.kept);
            emit(out.as_deref(), &render_report(&rows, task, format)?)?;
            if let Some(path) = removed_out {
                emit(Some(&path), &report_to_json(&dedup.removed))?;
            }
        }
        Command::GenFixtures { seed, config, out } => {
            let mut cfg: SceneConfig = match config {
                Some(path) => serde_json::from_slice(&read(&path)?)
                    .map_err(|e| Error::schema(path.display().to_string(), e.to_string()))?,
                None => SceneConfig::default(),
            };
            cfg.seed = seed;
            let bundle = generate_scene(&cfg)?;
            bundle.write_to(&out)?;
            let config_path = out.join("config.json");
            std::fs::write(&config_path, to_json_bytes(&cfg)).map_err(|e| Error::io(&config_path, e))?;
        }
    }
    Ok(ExitStatus::SUCCESS)
}

/// Runs the CLI on `argv` (program name first) and returns the exit status.
pub fn run<I, T>(argv: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::USAGE } else { ExitStatus::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("hiereval: {e}");
            error_status(&e)
        }
    }
}

/// Initializes logging from `HIEREVAL_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("HIEREVAL_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}
