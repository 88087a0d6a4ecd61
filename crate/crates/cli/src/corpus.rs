//! `labels.csv` manifests and the worker pool that processes their entries.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "labels.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    /// File stem of the image.
    pub id: String,
    pub image: PathBuf,
    pub label: usize,
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub entries: Vec<Entry>,
}

impl Corpus {
    /// Reads `<root>/labels.csv` and checks that every referenced file exists.
    pub fn load(root: &Path) -> CliResult<Self> {
        let manifest = root.join(MANIFEST);
        if !manifest.is_file() {
            return Err(CliError::Io(format!("missing manifest {}", manifest.display())));
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&manifest)?;
        let headers = reader.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 2 || cols[0] != "filename" || cols[1] != "label" || (cols.len() == 3 && cols[2] != "mask") || cols.len() > 3 {
            return Err(CliError::Config(format!(
                "{}: header must be filename,label[,mask]",
                manifest.display()
            )));
        }
        let mut entries: Vec<Entry> = Vec::new();
        for (n, record) in reader.records().enumerate() {
            let record = record?;
            let line = n + 2;
            let filename = record.get(0).unwrap_or("");
            if filename.is_empty() {
                return Err(CliError::Config(format!("{}:{line}: empty filename", manifest.display())));
            }
            let label = record
                .get(1)
                .unwrap_or("")
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("{}:{line}: bad label", manifest.display())))?;
            let mask = record.get(2).filter(|m| !m.is_empty()).map(|m| root.join(m));
            let image = root.join(filename);
            let id = image
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| CliError::Config(format!("{}:{line}: bad filename", manifest.display())))?;
            if entries.iter().any(|e| e.id == id) {
                return Err(CliError::Config(format!("{}:{line}: duplicate id '{id}'", manifest.display())));
            }
            for path in std::iter::once(&image).chain(mask.as_ref()) {
                if !path.is_file() {
                    return Err(CliError::Io(format!("missing file {}", path.display())));
                }
            }
            entries.push(Entry { id, image, label, mask });
        }
        if entries.is_empty() {
            return Err(CliError::Config("empty corpus".into()));
        }
        Ok(Self {
            root: root.to_path_buf(),
            entries,
        })
    }

    pub fn check_labels(&self, num_classes: usize) -> CliResult<()> {
        match self.entries.iter().find(|e| e.label >= num_classes) {
            Some(e) => Err(CliError::Config(format!(
                "{}: label {} >= model class count {num_classes}",
                e.id, e.label
            ))),
            None => Ok(()),
        }
    }

    pub fn find(&self, id: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// Writes a manifest of `(filename, label, mask)` rows relative to `root`.
pub fn write_manifest(root: &Path, rows: &[(String, usize, Option<String>)]) -> CliResult<()> {
    let with_mask = rows.iter().any(|r| r.2.is_some());
    let mut w = csv::Writer::from_path(root.join(MANIFEST))?;
    if with_mask {
        w.write_record(["filename", "label", "mask"])?;
    } else {
        w.write_record(["filename", "label"])?;
    }
    for (file, label, mask) in rows {
        let label = label.to_string();
        if with_mask {
            w.write_record([file.as_str(), label.as_str(), mask.as_deref().unwrap_or("")])?;
        } else {
            w.write_record([file.as_str(), label.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Worker count from `BLURFORGE_THREADS`, defaulting to rayon's choice.
pub fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("BLURFORGE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Config(format!("BLURFORGE_THREADS must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Config(e.to_string()))
}

/// Result of one entry; `Err` holds the reason it was skipped.
pub type Outcome<T> = std::result::Result<T, String>;

/// Applies `f` to every item on the worker pool; results come back in input order.
pub fn run_batch<I, T, F>(pool: &rayon::ThreadPool, items: &[I], f: F) -> Vec<Outcome<T>>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> Outcome<T> + Sync,
{
    pool.install(|| items.par_iter().map(&f).collect())
}

/// Logs skipped entries and returns the kept results in order.
pub fn split_outcomes<T>(ids: impl IntoIterator<Item = String>, outcomes: Vec<Outcome<T>>) -> (Vec<(String, T)>, usize) {
    let mut kept = Vec::new();
    let mut skipped = 0;
    for (id, outcome) in ids.into_iter().zip(outcomes) {
        match outcome {
            Ok(v) => kept.push((id, v)),
            Err(reason) => {
                eprintln!("skip {id}: {reason}");
                skipped += 1;
            }
        }
    }
    (kept, skipped)
}
