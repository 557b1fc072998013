//! Term-frequency encoding of images against a visual vocabulary.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::dataset::{ImageFeatures, LabeledDataset};
use crate::distance::nearest_squared;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vocabulary::VisualVocabulary;

/// Relative frequency of each visual word among an image's features.
#[derive(Debug, Clone, PartialEq)]
pub struct BoFVector {
    pub image_id: String,
    pub weights: Vec<f64>,
}

impl BoFVector {
    /// True for the all-zero encoding of a feature-less image.
    pub fn is_empty(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }
}

impl AsRef<[f64]> for BoFVector {
    fn as_ref(&self) -> &[f64] {
        &self.weights
    }
}

/// Assigns every feature to its nearest word (lowest index on ties) and
/// divides the per-word counts by the feature count.
pub fn encode_image<T: Scalar>(img: &ImageFeatures<T>, vocab: &VisualVocabulary<T>) -> Result<BoFVector> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut counts = vec![0usize; vocab.len()];
    for f in img.features() {
        let (w, _) = nearest_squared(f.as_slice(), vocab.words())?;
        counts[w] += 1;
    }
    let n = img.len();
    let weights = if n == 0 {
        vec![0.0; vocab.len()]
    } else {
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    };
    Ok(BoFVector {
        image_id: img.id().to_string(),
        weights,
    })
}

/// Encodes every image of the dataset, in dataset order.
pub fn encode_dataset<T: Scalar>(dataset: &LabeledDataset<T>, vocab: &VisualVocabulary<T>) -> Result<Vec<BoFVector>> {
    let out: Vec<BoFVector> = dataset
        .images()
        .par_iter()
        .map(|img| encode_image(img, vocab))
        .collect::<Result<_>>()?;
    for b in out.iter().filter(|b| b.is_empty()) {
        log::warn!("image {:?} has no features; encoded as the zero vector", b.image_id);
    }
    Ok(out)
}

/// Shortest decimal form of `v` rounded to 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    format!("{rounded}")
}

/// CSV with header `image_id,w0,...,w{m-1}`.
pub fn write_encoding<W: Write>(writer: W, vectors: &[BoFVector]) -> Result<()> {
    let m = vectors.first().map_or(0, |v| v.weights.len());
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["image_id".to_string()];
    header.extend((0..m).map(|i| format!("w{i}")));
    csv.write_record(&header)?;
    for v in vectors {
        if v.weights.len() != m {
            return Err(Error::DimensionMismatch { left: m, right: v.weights.len() });
        }
        let mut rec = vec![v.image_id.clone()];
        rec.extend(v.weights.iter().map(|&w| format_sig9(w)));
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_encoding<R: Read>(reader: R) -> Result<Vec<BoFVector>> {
    let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let m = csv.headers()?.len().saturating_sub(1);
    let mut out = Vec::new();
    for rec in csv.records() {
        let rec = rec?;
        let weights = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidDataset(format!("bad weight {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if weights.len() != m {
            return Err(Error::DimensionMismatch { left: m, right: weights.len() });
        }
        out.push(BoFVector {
            image_id: rec.get(0).unwrap_or("").to_string(),
            weights,
        });
    }
    Ok(out)
}
