use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pgm::read_pgm;
use super::preprocess::to_model_input;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A preprocessed `[1, 32, 32]` image with its class index.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub pixels: Tensor,
    pub label: usize,
    pub source_path: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            other => Err(Error::InvalidConfig(format!(
                "unknown split {other:?} (expected train or validation)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub class_names: Vec<String>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Number of samples per class, indexed like `class_names`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Loads `<root>/<split>/<class>/*.pgm`.
///
/// Classes are the sub-directory names in sorted order and files are read in
/// lexicographic path order. Images are decoded in parallel but assembled in
/// that order, so the result never depends on the worker count.
pub fn load_dataset(root: &Path, split: Split) -> Result<Dataset> {
    let split_dir = root.join(split.dir_name());
    if !split_dir.is_dir() {
        return Err(Error::DatasetNotFound(split_dir));
    }
    let class_dirs: Vec<PathBuf> = sorted_entries(&split_dir)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} has no class directories",
            split_dir.display()
        )));
    }
    let mut class_names = Vec::with_capacity(class_dirs.len());
    let mut files = Vec::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        let name = dir.file_name().and_then(|n| n.to_str()).ok_or_else(|| {
            Error::InvalidConfig(format!("non UTF-8 class dir {}", dir.display()))
        })?;
        class_names.push(name.to_string());
        let before = files.len();
        files.extend(
            sorted_entries(dir)?
                .into_iter()
                .filter(|p| p.is_file() && is_pgm(p))
                .map(|p| (p, label)),
        );
        if files.len() == before {
            log::warn!("class directory {} contains no .pgm files", dir.display());
        }
    }
    let samples = files
        .par_iter()
        .map(|(path, label)| {
            let img = read_pgm(path)?;
            let pixels = to_model_input(&img).map_err(|e| Error::ImageDecode {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            Ok(Sample {
                pixels,
                label: *label,
                source_path: path.display().to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        samples,
        class_names,
        split,
    })
}
