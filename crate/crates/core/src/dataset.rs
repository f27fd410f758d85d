//! Corpus ingestion and batch processing.
//!
//! A corpus is a directory of post groups, `root/<group_id>/*.{png,jpg,jpeg}`.
//! Within a group the byte-lexicographically first image is the original and
//! every other image is a tampered candidate. Each pair produces
//! `out_dir/<group_id>/<tampered_stem>_mask.png` and one line of
//! `out_dir/manifest.jsonl`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{load_image, save_mask};
use crate::pipeline::{dump_intermediates, run_stages, PairStats, PipelineConfig};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Images crawled from one post.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PostGroup {
    pub group_id: String,
    pub original: PathBuf,
    pub tampered: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Ok,
    SkippedSizeMismatch,
    DecodeError,
    IoError,
}

/// Outcome of one (original, tampered) job.
#[derive(Clone, Debug, PartialEq)]
pub struct PairRecord {
    pub group_id: String,
    pub original_path: PathBuf,
    pub tampered_path: PathBuf,
    pub status: PairStatus,
    /// Present iff `status` is `Ok`.
    pub mask_path: Option<PathBuf>,
    /// Present iff `status` is `Ok`.
    pub stats: Option<PairStats>,
}

/// Flat manifest line; statistics are `null` for records that are not ok.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub group_id: String,
    pub original_path: String,
    pub tampered_path: String,
    pub status: PairStatus,
    pub mask_path: Option<String>,
    pub boxes_before_nms: Option<usize>,
    pub boxes_after_nms: Option<usize>,
    pub tv_energy_before: Option<f64>,
    pub tv_energy_after: Option<f64>,
    pub white_fraction: Option<f64>,
    pub elapsed_ms: Option<f64>,
}

impl From<&PairRecord> for ManifestRow {
    fn from(r: &PairRecord) -> Self {
        let s = r.stats.as_ref();
        Self {
            group_id: r.group_id.clone(),
            original_path: r.original_path.to_string_lossy().into_owned(),
            tampered_path: r.tampered_path.to_string_lossy().into_owned(),
            status: r.status,
            mask_path: r.mask_path.as_ref().map(|p| p.to_string_lossy().into_owned()),
            boxes_before_nms: s.map(|s| s.boxes_before_nms),
            boxes_after_nms: s.map(|s| s.boxes_after_nms),
            tv_energy_before: s.map(|s| s.tv_energy_before),
            tv_energy_after: s.map(|s| s.tv_energy_after),
            white_fraction: s.map(|s| s.white_fraction),
            elapsed_ms: s.map(|s| s.elapsed_ms),
        }
    }
}

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

fn sort_by_name_bytes(paths: &mut [PathBuf]) {
    paths.sort_by(|a, b| {
        let ka = a.file_name().map(|n| n.as_encoded_bytes()).unwrap_or_default();
        let kb = b.file_name().map(|n| n.as_encoded_bytes()).unwrap_or_default();
        ka.cmp(kb)
    });
}

/// Group the immediate subdirectories of `root`. Subdirectories with fewer
/// than two images are skipped.
pub fn scan_corpus(root: &Path) -> Result<Vec<PostGroup>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    sort_by_name_bytes(&mut dirs);

    let mut groups = Vec::new();
    for dir in dirs {
        let mut images = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_file() && is_image_file(&path) {
                images.push(path);
            }
        }
        let group_id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        if images.len() < 2 {
            log::info!("skipping {}: {} image(s), need at least 2", dir.display(), images.len());
            continue;
        }
        sort_by_name_bytes(&mut images);
        let original = images.remove(0);
        groups.push(PostGroup {
            group_id,
            original,
            tampered: images,
        });
    }
    Ok(groups)
}

struct Job<'a> {
    group_id: &'a str,
    original: &'a Path,
    tampered: &'a Path,
}

fn mask_path_for(out_dir: &Path, group_id: &str, tampered: &Path) -> PathBuf {
    let stem = tampered
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out_dir.join(group_id).join(format!("{stem}_mask.png"))
}

fn status_of(err: &Error) -> PairStatus {
    match err {
        Error::DimensionMismatch { .. } => PairStatus::SkippedSizeMismatch,
        Error::Decode { .. } => PairStatus::DecodeError,
        Error::Io { .. } | Error::InvalidConfig(_) => PairStatus::IoError,
    }
}

fn process(job: &Job<'_>, out_dir: &Path, config: &PipelineConfig) -> PairRecord {
    let mask_path = mask_path_for(out_dir, job.group_id, job.tampered);
    let outcome = (|| -> Result<PairStats> {
        let original = load_image(job.original)?;
        let tampered = load_image(job.tampered)?;
        let stages = run_stages(&original, &tampered, config)?;
        let group_dir = out_dir.join(job.group_id);
        fs::create_dir_all(&group_dir).map_err(|e| Error::io(&group_dir, e))?;
        save_mask(&stages.mask, &mask_path)?;
        if config.dump_intermediates {
            let stem = job.tampered.file_stem().unwrap_or_default().to_string_lossy();
            dump_intermediates(&stages, &group_dir.join(format!("{stem}_stages")))?;
        }
        Ok(stages.stats)
    })();

    let (status, mask_path, stats) = match outcome {
        Ok(stats) => (PairStatus::Ok, Some(mask_path), Some(stats)),
        Err(err) => {
            log::warn!("{}: {err}", job.tampered.display());
            // No mask may outlive a failed pair from an earlier run.
            let _ = fs::remove_file(&mask_path);
            (status_of(&err), None, None)
        }
    };
    PairRecord {
        group_id: job.group_id.to_owned(),
        original_path: job.original.to_path_buf(),
        tampered_path: job.tampered.to_path_buf(),
        status,
        mask_path,
        stats,
    }
}

/// Process every pair of the corpus at `root` with up to `workers` threads
/// and write the manifest. Records come back ordered by
/// `(group_id, tampered_path)` whatever the scheduling.
pub fn run_batch(
    root: &Path,
    out_dir: &Path,
    config: &PipelineConfig,
    workers: usize,
) -> Result<Vec<PairRecord>> {
    if workers == 0 {
        return Err(Error::InvalidConfig("workers must be >= 1".into()));
    }
    config.validate()?;
    let groups = scan_corpus(root)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut jobs: Vec<Job<'_>> = groups
        .iter()
        .flat_map(|g| {
            g.tampered.iter().map(move |t| Job {
                group_id: &g.group_id,
                original: &g.original,
                tampered: t,
            })
        })
        .collect();
    jobs.sort_by(|a, b| {
        a.group_id
            .as_bytes()
            .cmp(b.group_id.as_bytes())
            .then_with(|| a.tampered.as_os_str().as_encoded_bytes().cmp(b.tampered.as_os_str().as_encoded_bytes()))
    });

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let records: Vec<PairRecord> =
        pool.install(|| jobs.par_iter().map(|job| process(job, out_dir, config)).collect());

    write_manifest(&out_dir.join(MANIFEST_FILE), &records)?;
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[PairRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut writer, &ManifestRow::from(record))
            .map_err(|e| Error::io(path, e.into()))?;
        writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(|line| serde_json::from_str(line).map_err(|e| Error::io(path, e.into())))
        .collect()
}

/// Record counts per status.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StatusCounts {
    pub ok: usize,
    pub skipped_size_mismatch: usize,
    pub decode_error: usize,
    pub io_error: usize,
}

impl StatusCounts {
    pub fn tally(records: &[PairRecord]) -> Self {
        let mut c = Self::default();
        for r in records {
            match r.status {
                PairStatus::Ok => c.ok += 1,
                PairStatus::SkippedSizeMismatch => c.skipped_size_mismatch += 1,
                PairStatus::DecodeError => c.decode_error += 1,
                PairStatus::IoError => c.io_error += 1,
            }
        }
        c
    }

    pub fn has_failures(&self) -> bool {
        self.decode_error + self.io_error > 0
    }
}

impl std::fmt::Display for StatusCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ok={} skipped_size_mismatch={} decode_error={} io_error={}",
            self.ok, self.skipped_size_mismatch, self.decode_error, self.io_error
        )
    }
}
