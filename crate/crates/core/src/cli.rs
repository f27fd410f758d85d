//! Command-line front end.
//!
//! Every pipeline parameter can come from a flag, from a `key = value`
//! config file whose keys are the flag names, or from the built-in default,
//! in that order of precedence. The config file is `--config FILE`, falling
//! back to the `MASKGEN_CONFIG` environment variable.
//!
//! Exit codes: 0 success, 1 I/O or decode failure, 2 dimension mismatch
//! (single mode), 3 failed records in a batch, 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::dataset::{run_batch, StatusCounts};
use crate::error::Error;
use crate::imgcore::{load_image, save_mask};
use crate::mser::{self, PolarityMode};
use crate::nms;
use crate::pipeline::{self, dump_intermediates, run_stages, PipelineConfig};
use crate::tvdenoise;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_DIMENSION_MISMATCH: i32 = 2;
pub const EXIT_BATCH_FAILURES: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

pub const CONFIG_ENV: &str = "MASKGEN_CONFIG";

#[derive(Parser, Debug)]
#[command(name = "maskgen", version, about = "Generate manipulation masks from original/tampered image pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Process one pair and print its statistics as JSON.
    Single(SingleArgs),
    /// Process every pair of a corpus directory and write a manifest.
    Batch(BatchArgs),
}

#[derive(Args, Debug)]
pub struct SingleArgs {
    #[arg(long, value_name = "PATH")]
    pub original: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub tampered: PathBuf,
    /// Output mask (PNG).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct BatchArgs {
    /// Corpus root: one subdirectory of images per post.
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Output directory for masks and the manifest.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Concurrent workers [default: available cores].
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// `key = value` parameter file (keys are flag names without dashes prefix).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Write per-stage images next to each mask.
    #[arg(long)]
    pub dump_intermediates: bool,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Args, Debug)]
pub struct TuningArgs {
    /// MSER threshold step.
    #[arg(long, default_value_t = mser::DEFAULT_DELTA)]
    pub mser_delta: u32,
    /// Smallest MSER region, in pixels.
    #[arg(long, default_value_t = mser::DEFAULT_MIN_AREA)]
    pub mser_min_area: usize,
    /// Largest MSER region, as a fraction of the image.
    #[arg(long, default_value_t = mser::DEFAULT_MAX_AREA_FRACTION)]
    pub mser_max_area_fraction: f64,
    /// Largest accepted MSER variation.
    #[arg(long, default_value_t = mser::DEFAULT_MAX_VARIATION)]
    pub mser_max_variation: f64,
    #[arg(long, value_enum, default_value_t = PolarityMode::Both)]
    pub mser_polarity: PolarityMode,
    /// IoU at or above which a box is suppressed.
    #[arg(long, default_value_t = nms::DEFAULT_IOU_THRESHOLD)]
    pub nms_iou: f64,
    #[arg(long, default_value_t = tvdenoise::DEFAULT_ITERATIONS)]
    pub tv_iterations: usize,
    #[arg(long, default_value_t = tvdenoise::DEFAULT_STEP)]
    pub tv_step: f64,
    /// Fidelity weight.
    #[arg(long, default_value_t = tvdenoise::DEFAULT_FIDELITY_WEIGHT)]
    pub tv_fidelity: f64,
    /// Gradient smoothing constant.
    #[arg(long, default_value_t = tvdenoise::DEFAULT_EPSILON)]
    pub tv_epsilon: f64,
    /// Grayscale erosions before thresholding.
    #[arg(long, default_value_t = pipeline::DEFAULT_PRE_BINARIZE_EROSIONS)]
    pub pre_binarize_erosions: usize,
    #[arg(long, default_value_t = pipeline::DEFAULT_BINARIZE_THRESHOLD)]
    pub binarize_threshold: u8,
    #[arg(long, default_value_t = pipeline::DEFAULT_POST_BINARIZE_EROSIONS)]
    pub post_binarize_erosions: usize,
    #[arg(long, default_value_t = pipeline::DEFAULT_POST_DILATIONS)]
    pub post_dilations: usize,
    /// Erosions of the combined mask.
    #[arg(long, default_value_t = pipeline::DEFAULT_POST_UNION_EROSIONS)]
    pub post_union_erosions: usize,
}

type Setter = fn(&mut PipelineConfig, &str) -> Result<(), String>;

fn parse<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, String> {
    raw.parse()
        .map_err(|_| format!("invalid value {raw:?} for {key}"))
}

/// `(key, |config, raw| config.field = parsed raw)`
macro_rules! setting {
    ($key:literal, $($field:ident).+) => {
        ($key, |c, v| {
            c.$($field).+ = parse($key, v)?;
            Ok(())
        })
    };
}

/// Config keys (identical to the flag names) and how each applies.
const SETTINGS: &[(&str, Setter)] = &[
    setting!("mser-delta", mser.delta),
    setting!("mser-min-area", mser.min_area),
    setting!("mser-max-area-fraction", mser.max_area_fraction),
    setting!("mser-max-variation", mser.max_variation),
    ("mser-polarity", |c, v| {
        c.mser.polarity = <PolarityMode as clap::ValueEnum>::from_str(v, true)
            .map_err(|_| format!("invalid value {v:?} for mser-polarity"))?;
        Ok(())
    }),
    setting!("nms-iou", nms_iou_threshold),
    setting!("tv-iterations", denoise.iterations),
    setting!("tv-step", denoise.step),
    setting!("tv-fidelity", denoise.fidelity_weight),
    setting!("tv-epsilon", denoise.epsilon),
    setting!("pre-binarize-erosions", pre_binarize_erosions),
    setting!("binarize-threshold", binarize_threshold),
    setting!("post-binarize-erosions", post_binarize_erosions),
    setting!("post-dilations", post_dilations),
    setting!("post-union-erosions", post_union_erosions),
    setting!("dump-intermediates", dump_intermediates),
];

/// Parse `key = value` lines; `#` starts a comment line.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        let key = key.trim().replace('_', "-");
        if !SETTINGS.iter().any(|(k, _)| *k == key) {
            return Err(format!("line {}: unknown key {key:?}", n + 1));
        }
        entries.push((key, value.trim().to_owned()));
    }
    Ok(entries)
}

#[derive(Debug)]
pub enum ConfigError {
    Unreadable(PathBuf, std::io::Error),
    Invalid(String),
}

/// Merge defaults, config-file entries, then flags given on the command line.
pub fn resolve_config(
    matches: &ArgMatches,
    config_path: Option<&Path>,
) -> Result<PipelineConfig, ConfigError> {
    let mut config = PipelineConfig::default();
    if let Some(path) = config_path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Unreadable(path.to_path_buf(), e))?;
        let entries = parse_config_text(&text).map_err(ConfigError::Invalid)?;
        for (key, value) in entries {
            let (_, set) = SETTINGS.iter().find(|(k, _)| *k == key).expect("key checked");
            set(&mut config, &value).map_err(ConfigError::Invalid)?;
        }
    }
    for (key, set) in SETTINGS {
        let id = key.replace('-', "_");
        if matches.value_source(&id) != Some(ValueSource::CommandLine) {
            continue;
        }
        if id == "dump_intermediates" {
            config.dump_intermediates = true;
            continue;
        }
        if let Some(raw) = matches.get_raw(&id).and_then(|mut v| v.next()) {
            set(&mut config, &raw.to_string_lossy()).map_err(ConfigError::Invalid)?;
        }
    }
    config
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(config)
}

fn config_path(explicit: Option<&PathBuf>) -> Option<PathBuf> {
    explicit
        .cloned()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
}

fn report_config_error(err: ConfigError, stderr: &mut dyn Write) -> i32 {
    match err {
        ConfigError::Unreadable(path, e) => {
            let _ = writeln!(stderr, "error: cannot read config {}: {e}", path.display());
            EXIT_IO
        }
        ConfigError::Invalid(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn run_single(
    args: &SingleArgs,
    matches: &ArgMatches,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let config = match resolve_config(matches, config_path(args.common.config.as_ref()).as_deref()) {
        Ok(c) => c,
        Err(e) => return report_config_error(e, stderr),
    };
    let result = (|| {
        let original = load_image(&args.original)?;
        let tampered = load_image(&args.tampered)?;
        let stages = run_stages(&original, &tampered, &config)?;
        save_mask(&stages.mask, &args.out)?;
        if config.dump_intermediates {
            let stem = args.out.file_stem().unwrap_or_default().to_string_lossy();
            let dir = args
                .out
                .parent()
                .unwrap_or(Path::new("."))
                .join(format!("{stem}_stages"));
            dump_intermediates(&stages, &dir)?;
        }
        Ok::<_, Error>(stages.stats)
    })();
    match result {
        Ok(stats) => {
            let json = serde_json::to_string(&stats).expect("stats serialize");
            let _ = writeln!(stdout, "{json}");
            EXIT_OK
        }
        Err(err) => {
            let _ = writeln!(stderr, "error: {err}");
            match err {
                Error::DimensionMismatch { .. } => EXIT_DIMENSION_MISMATCH,
                Error::InvalidConfig(_) => EXIT_USAGE,
                Error::Decode { .. } | Error::Io { .. } => EXIT_IO,
            }
        }
    }
}

fn run_batch_cmd(args: &BatchArgs, matches: &ArgMatches, stderr: &mut dyn Write) -> i32 {
    let config = match resolve_config(matches, config_path(args.common.config.as_ref()).as_deref()) {
        Ok(c) => c,
        Err(e) => return report_config_error(e, stderr),
    };
    let workers = args.jobs.map(|j| j as usize).unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    match run_batch(&args.corpus, &args.out, &config, workers) {
        Ok(records) => {
            let counts = StatusCounts::tally(&records);
            let _ = writeln!(stderr, "{counts}");
            if counts.has_failures() {
                EXIT_BATCH_FAILURES
            } else {
                EXIT_OK
            }
        }
        Err(err) => {
            let _ = writeln!(stderr, "error: {err}");
            match err {
                Error::InvalidConfig(_) => EXIT_USAGE,
                _ => EXIT_IO,
            }
        }
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(stdout, "{rendered}");
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_USAGE
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return EXIT_USAGE;
        }
    };
    match &cli.command {
        Command::Single(args) => {
            let sub = matches.subcommand_matches("single").expect("single subcommand");
            run_single(args, sub, stdout, stderr)
        }
        Command::Batch(args) => {
            let sub = matches.subcommand_matches("batch").expect("batch subcommand");
            run_batch_cmd(args, sub, stderr)
        }
    }
}
