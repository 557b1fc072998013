//! Seeded synthetic labeled feature datasets with ground truth.
//!
//! Every label owns `words_per_label` object centers; all labels share
//! `background_centers` background centers. Centers are drawn from an
//! isotropic Gaussian of scale `center_spread`, features around a center with
//! scale `within_spread`. An image of label `t` gets
//! `round((1 - background_fraction) * features_per_image)` features around
//! `t`'s centers and the rest around background centers, shuffled.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{FeatureVector, ImageFeatures, LabelMatrix, LabelVocabulary, LabeledDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::Seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_labels: usize,
    pub images_per_label: usize,
    pub features_per_image: usize,
    pub background_fraction: f64,
    pub words_per_label: usize,
    pub background_centers: usize,
    /// Background centers visible in one image: a random background center
    /// and its nearest neighbours, so each image sees one local region of
    /// the background. Zero means every image draws from all of them.
    pub scene_centers: usize,
    /// When set, part `p` of every label sits near a shared prototype: the
    /// prototypes are drawn with `center_spread` and each label's part
    /// center is offset from its prototype with this scale. `None` draws
    /// every object center independently.
    pub part_offset: Option<f64>,
    pub dim: usize,
    pub center_spread: f64,
    pub within_spread: f64,
    /// Fraction of each label's images that enter the labeled subset.
    pub labeled_fraction: f64,
    /// Probability that an image carries a second label (whose object
    /// features it then also contains). Zero gives single-label images.
    pub second_label_probability: f64,
    pub seed: Seed,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::reference(Seed(0))
    }
}

impl SynthConfig {
    /// The benchmark instance used by the acceptance suite: 5 labels, 40
    /// images each, 200 features of dimension 16 per image, 4 object centers
    /// per label and 60% background.
    pub fn reference(seed: Seed) -> Self {
        SynthConfig {
            num_labels: 5,
            images_per_label: 40,
            features_per_image: 200,
            background_fraction: 0.6,
            words_per_label: 4,
            background_centers: 20,
            scene_centers: 0,
            part_offset: None,
            dim: 16,
            center_spread: 1.0,
            within_spread: 0.3,
            labeled_fraction: 1.0,
            second_label_probability: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_labels == 0
            || self.images_per_label == 0
            || self.features_per_image == 0
            || self.words_per_label == 0
            || self.background_centers == 0
            || self.dim == 0
        {
            return bad("all counts must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.background_fraction) {
            return bad(format!("background_fraction {} outside [0, 1)", self.background_fraction));
        }
        if !(self.within_spread > 0.0 && self.within_spread < self.center_spread) {
            return bad(format!(
                "need 0 < within_spread ({}) < center_spread ({})",
                self.within_spread, self.center_spread
            ));
        }
        if !(self.labeled_fraction > 0.0 && self.labeled_fraction <= 1.0) {
            return bad(format!("labeled_fraction {} outside (0, 1]", self.labeled_fraction));
        }
        if !(0.0..=1.0).contains(&self.second_label_probability) {
            return bad("second_label_probability outside [0, 1]".into());
        }
        if self.part_offset.is_some_and(|o| !(o > 0.0)) {
            return bad("part_offset must be positive".into());
        }
        if self.second_label_probability > 0.0 && self.num_labels < 2 {
            return bad("multi-label generation needs at least two labels".into());
        }
        Ok(())
    }

    pub fn object_features_per_image(&self) -> usize {
        ((1.0 - self.background_fraction) * self.features_per_image as f64).round() as usize
    }
}

/// Origin of one generated feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureOrigin {
    /// Drawn around center `center` of label `label`.
    Object { label: usize, center: usize },
    Background { center: usize },
}

impl FeatureOrigin {
    pub fn is_background(self) -> bool {
        matches!(self, FeatureOrigin::Background { .. })
    }
}

/// Generator state kept for oracles: true centers and per-feature origins.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub object_centers: Vec<Vec<Vec<f64>>>,
    pub background_centers: Vec<Vec<f64>>,
    /// Per image (dataset order), per feature.
    pub origins: Vec<Vec<FeatureOrigin>>,
    /// Per image (dataset order), its labels.
    pub image_labels: Vec<Vec<usize>>,
}

impl GroundTruth {
    pub fn write_csv<W: Write>(&self, writer: W, image_ids: &[&str], labels: &LabelVocabulary) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["image_id", "feature_index", "flag", "owner_label"])?;
        for (id, origins) in image_ids.iter().zip(&self.origins) {
            for (i, o) in origins.iter().enumerate() {
                let (flag, owner) = match *o {
                    FeatureOrigin::Object { label, .. } => ("object", labels.name(label)),
                    FeatureOrigin::Background { .. } => ("background", ""),
                };
                csv.write_record([*id, &i.to_string(), flag, owner])?;
            }
        }
        csv.flush()?;
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, center: &[f64], sigma: f64) -> Vec<f64> {
    center
        .iter()
        .map(|&c| {
            let z: f64 = StandardNormal.sample(rng);
            c + sigma * z
        })
        .collect()
}

pub fn generate<T: Scalar>(cfg: &SynthConfig) -> Result<(LabeledDataset<T>, GroundTruth)> {
    cfg.validate()?;
    let origin = vec![0.0; cfg.dim];
    let mut center_rng = cfg.seed.derive("synth-centers").rng();
    let object_centers: Vec<Vec<Vec<f64>>> = match cfg.part_offset {
        None => (0..cfg.num_labels)
            .map(|_| {
                (0..cfg.words_per_label)
                    .map(|_| gaussian(&mut center_rng, &origin, cfg.center_spread))
                    .collect()
            })
            .collect(),
        Some(offset) => {
            let prototypes: Vec<Vec<f64>> = (0..cfg.words_per_label)
                .map(|_| gaussian(&mut center_rng, &origin, cfg.center_spread))
                .collect();
            (0..cfg.num_labels)
                .map(|_| prototypes.iter().map(|p| gaussian(&mut center_rng, p, offset)).collect())
                .collect()
        }
    };
    let background_centers: Vec<Vec<f64>> = (0..cfg.background_centers)
        .map(|_| gaussian(&mut center_rng, &origin, cfg.center_spread))
        .collect();

    let mut rng = cfg.seed.derive("synth-features").rng();
    let n_object = cfg.object_features_per_image();
    let mut images = Vec::new();
    let mut origins = Vec::new();
    let mut image_labels = Vec::new();

    for label in 0..cfg.num_labels {
        for i in 0..cfg.images_per_label {
            let mut labels = vec![label];
            if cfg.second_label_probability > 0.0 && rng.random_bool(cfg.second_label_probability) {
                let other = (label + rng.random_range(1..cfg.num_labels)) % cfg.num_labels;
                labels.push(other);
            }
            let mut feats: Vec<(Vec<f64>, FeatureOrigin)> = Vec::with_capacity(cfg.features_per_image);
            for j in 0..n_object {
                let owner = labels[j % labels.len()];
                let c = rng.random_range(0..cfg.words_per_label);
                feats.push((
                    gaussian(&mut rng, &object_centers[owner][c], cfg.within_spread),
                    FeatureOrigin::Object { label: owner, center: c },
                ));
            }
            let scene: Vec<usize> = if cfg.scene_centers == 0 || cfg.scene_centers >= cfg.background_centers {
                (0..cfg.background_centers).collect()
            } else {
                let anchor = &background_centers[rng.random_range(0..cfg.background_centers)];
                let mut by_distance: Vec<(f64, usize)> = background_centers
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.iter().zip(anchor).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                    .collect();
                by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                by_distance.iter().take(cfg.scene_centers).map(|&(_, i)| i).collect()
            };
            for _ in n_object..cfg.features_per_image {
                let c = scene[rng.random_range(0..scene.len())];
                feats.push((
                    gaussian(&mut rng, &background_centers[c], cfg.within_spread),
                    FeatureOrigin::Background { center: c },
                ));
            }
            feats.shuffle(&mut rng);
            let (vectors, flags): (Vec<_>, Vec<_>) = feats.into_iter().unzip();
            let vectors = vectors
                .into_iter()
                .map(|v| FeatureVector::new(v.into_iter().map(T::narrow).collect()))
                .collect::<Result<Vec<_>>>()?;
            labels.sort_unstable();
            images.push(ImageFeatures::new(format!("img_{label:03}_{i:04}"), vectors)?);
            origins.push(flags);
            image_labels.push(labels);
        }
    }

    let mut labeled = Vec::new();
    let mut select_rng = cfg.seed.derive("synth-labeled").rng();
    for label in 0..cfg.num_labels {
        let start = label * cfg.images_per_label;
        let mut members: Vec<usize> = (start..start + cfg.images_per_label).collect();
        if cfg.labeled_fraction < 1.0 {
            let keep = ((cfg.labeled_fraction * members.len() as f64).ceil() as usize).max(1);
            members.shuffle(&mut select_rng);
            members.truncate(keep);
            members.sort_unstable();
        }
        labeled.extend(members);
    }
    let mut matrix = LabelMatrix::zeros(labeled.len(), cfg.num_labels);
    for (row, &i) in labeled.iter().enumerate() {
        for &l in &image_labels[i] {
            matrix.set(row, l, true);
        }
    }
    let vocab = LabelVocabulary::new((0..cfg.num_labels).map(|l| format!("label{l:02}")))?;
    let dataset = LabeledDataset::from_indices(images, labeled, matrix, vocab)?;
    Ok((
        dataset,
        GroundTruth {
            object_centers,
            background_centers,
            origins,
            image_labels,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::nearest;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            num_labels: 3,
            images_per_label: 4,
            features_per_image: 20,
            ..SynthConfig::reference(Seed(seed))
        }
    }

    #[test]
    fn no_background_flags_without_background() {
        let cfg = SynthConfig {
            background_fraction: 0.0,
            ..small(1)
        };
        let (_, gt) = generate::<f32>(&cfg).unwrap();
        assert!(gt.origins.iter().flatten().all(|o| !o.is_background()));
    }

    #[test]
    fn deterministic() {
        let (a, ga) = generate::<f32>(&small(7)).unwrap();
        let (b, gb) = generate::<f32>(&small(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        let (c, _) = generate::<f32>(&small(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn structure() {
        let cfg = small(2);
        let (ds, gt) = generate::<f64>(&cfg).unwrap();
        assert_eq!(ds.images().len(), 12);
        assert_eq!(ds.num_labeled(), 12);
        assert_eq!(ds.dim(), Some(16));
        for (img, o) in ds.images().iter().zip(&gt.origins) {
            assert_eq!(img.len(), 20);
            assert_eq!(o.len(), 20);
            assert_eq!(o.iter().filter(|f| f.is_background()).count(), 12);
        }
        for row in 0..ds.num_labeled() {
            assert_eq!(ds.label_matrix().labels_of(row).count(), 1);
        }
    }

    #[test]
    fn partial_labeling_and_multi_label() {
        let cfg = SynthConfig {
            labeled_fraction: 0.5,
            second_label_probability: 1.0,
            ..small(3)
        };
        let (ds, gt) = generate::<f32>(&cfg).unwrap();
        assert_eq!(ds.num_labeled(), 6);
        assert!(gt.image_labels.iter().all(|l| l.len() == 2));
        for row in 0..ds.num_labeled() {
            assert_eq!(ds.label_matrix().labels_of(row).count(), 2);
        }
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SynthConfig { within_spread: 2.0, ..small(0) },
            SynthConfig { background_fraction: 1.0, ..small(0) },
            SynthConfig { num_labels: 0, ..small(0) },
            SynthConfig { labeled_fraction: 0.0, ..small(0) },
        ] {
            assert!(matches!(generate::<f32>(&cfg), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn empirical_mean_near_center() {
        let cfg = SynthConfig {
            num_labels: 1,
            images_per_label: 50,
            features_per_image: 200,
            background_fraction: 0.0,
            words_per_label: 1,
            ..SynthConfig::reference(Seed(4))
        };
        let (ds, gt) = generate::<f64>(&cfg).unwrap();
        let pool = ds.labeled_pool();
        let n = pool.len() as f64;
        assert_eq!(pool.len(), 10_000);
        let bound = 4.0 * cfg.within_spread / n.sqrt();
        for d in 0..cfg.dim {
            let mean = pool.iter().map(|f| f.as_slice()[d]).sum::<f64>() / n;
            assert!((mean - gt.object_centers[0][0][d]).abs() <= bound);
        }
    }

    #[test]
    fn separable_when_spread_is_small() {
        let cfg = SynthConfig {
            within_spread: 0.1,
            ..small(5)
        };
        let (ds, gt) = generate::<f64>(&cfg).unwrap();
        let centers: Vec<(usize, &Vec<f64>)> = gt
            .object_centers
            .iter()
            .enumerate()
            .flat_map(|(l, cs)| cs.iter().map(move |c| (l, c)))
            .collect();
        let pool: Vec<&Vec<f64>> = centers.iter().map(|(_, c)| *c).collect();
        let (mut total, mut correct) = (0, 0);
        for (img, origins) in ds.images().iter().zip(&gt.origins) {
            for (f, o) in img.features().iter().zip(origins) {
                if let FeatureOrigin::Object { label, .. } = *o {
                    let (i, _) = nearest(f.as_slice(), &pool).unwrap();
                    total += 1;
                    correct += usize::from(centers[i].0 == label);
                }
            }
        }
        assert!(correct as f64 / total as f64 >= 0.99);
    }

    #[test]
    fn scene_is_nearest_background_centers() {
        let cfg = SynthConfig {
            background_centers: 12,
            scene_centers: 3,
            ..small(9)
        };
        let (_, gt) = generate::<f64>(&cfg).unwrap();
        let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        for origins in &gt.origins {
            let mut used: Vec<usize> = origins
                .iter()
                .filter_map(|o| match *o {
                    FeatureOrigin::Background { center } => Some(center),
                    _ => None,
                })
                .collect();
            used.sort_unstable();
            used.dedup();
            assert!(!used.is_empty() && used.len() <= 3);
            // Some anchor must have every used center among its 3 nearest.
            let ok = (0..12).any(|a| {
                let anchor = &gt.background_centers[a];
                let mut order: Vec<usize> = (0..12).collect();
                order.sort_by(|&i, &j| {
                    d2(&gt.background_centers[i], anchor)
                        .total_cmp(&d2(&gt.background_centers[j], anchor))
                        .then(i.cmp(&j))
                });
                used.iter().all(|u| order[..3].contains(u))
            });
            assert!(ok);
        }
    }

    #[test]
    fn part_offset_keeps_parts_near_shared_prototype() {
        let cfg = SynthConfig {
            part_offset: Some(0.05),
            ..small(10)
        };
        let (_, gt) = generate::<f64>(&cfg).unwrap();
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        for p in 0..cfg.words_per_label {
            for l in 1..cfg.num_labels {
                // Two offsets of scale 0.05 in 16 dimensions stay well under 1.
                assert!(d(&gt.object_centers[0][p], &gt.object_centers[l][p]) < 1.0);
            }
        }
        assert!(generate::<f64>(&SynthConfig { part_offset: Some(0.0), ..small(10) }).is_err());
    }

    #[test]
    fn ground_truth_csv() {
        let (ds, gt) = generate::<f32>(&SynthConfig { images_per_label: 1, features_per_image: 2, ..small(6) }).unwrap();
        let ids: Vec<&str> = ds.images().iter().map(|i| i.id()).collect();
        let mut out = Vec::new();
        gt.write_csv(&mut out, &ids, ds.label_vocab()).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("image_id,feature_index,flag,owner_label\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 2);
    }
}
