use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use semvoc::features::io::{load_dataset, read_label_table};
use semvoc::features::{decode_raster, extract_features, SamplingConfig};
use semvoc::synthgen::{generate, GroundTruth};
use semvoc::{Dataset, Image};

use crate::config::{ExperimentConfig, SourceKind};

const IMAGE_EXTENSIONS: [&str; 5] = ["pgm", "ppm", "pnm", "pbm", "png"];

/// Raster files of `dir` with a supported extension, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no images ({}) found in {}", IMAGE_EXTENSIONS.join(", "), dir.display());
    }
    Ok(paths)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Decodes and describes every image of `dir`; ids are file stems.
pub fn extract_dir(dir: &Path, sampling: &SamplingConfig) -> Result<Vec<Image>> {
    let paths = list_images(dir)?;
    paths
        .par_iter()
        .map(|p| {
            let raster = decode_raster(p)?;
            let ex = extract_features(&stem(p), &raster, sampling)?;
            if let Some(w) = &ex.warning {
                log::warn!("{w}");
            }
            log::info!("{}: {} features", p.display(), ex.features.len());
            Ok(ex.features)
        })
        .collect()
}

/// Loads the dataset named by the config. Ground truth is only available for
/// synthetic sources.
pub fn load(cfg: &ExperimentConfig) -> Result<(Dataset, Option<GroundTruth>)> {
    match cfg.source {
        SourceKind::Synthetic => {
            let (ds, gt) = generate(&cfg.synth_config())?;
            Ok((ds, Some(gt)))
        }
        SourceKind::Features => {
            let (dir, labels) = (cfg.feature_dir.as_ref().unwrap(), cfg.labels.as_ref().unwrap());
            let ds = load_dataset(dir, labels)
                .with_context(|| format!("loading features from {} with labels {}", dir.display(), labels.display()))?;
            Ok((ds, None))
        }
        SourceKind::Images => {
            let images = extract_dir(cfg.images_dir.as_ref().unwrap(), &cfg.sampling)?;
            let labels = cfg.labels.as_ref().unwrap();
            let ids: HashSet<String> = images.iter().map(|i| i.id().to_string()).collect();
            let table = read_label_table(
                fs::File::open(labels).with_context(|| format!("opening {}", labels.display()))?,
                &|id| ids.contains(id),
            )?;
            let ds = Dataset::new(images, &table.labeled_ids, table.matrix, table.vocab)?;
            Ok((ds, None))
        }
    }
}
