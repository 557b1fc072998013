//! Feature, image and label containers shared by every pipeline stage.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One `h`-dimensional local descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    /// Rejects empty and non-finite vectors.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(FeatureVector { values })
    }

    pub fn zeros(dim: usize) -> Self {
        FeatureVector {
            values: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }

    /// Narrows an `f64` accumulator into storage precision.
    pub(crate) fn from_f64(values: &[f64]) -> Self {
        FeatureVector {
            values: values.iter().map(|&v| T::narrow(v)).collect(),
        }
    }
}

impl<T> AsRef<[T]> for FeatureVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

/// The feature set sampled from one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatures<T> {
    id: String,
    features: Vec<FeatureVector<T>>,
}

impl<T: Scalar> ImageFeatures<T> {
    pub fn new(id: impl Into<String>, features: Vec<FeatureVector<T>>) -> Result<Self> {
        if let Some(first) = features.first() {
            let h = first.dim();
            if let Some(bad) = features.iter().find(|f| f.dim() != h) {
                return Err(Error::DimensionMismatch {
                    left: h,
                    right: bad.dim(),
                });
            }
        }
        Ok(ImageFeatures {
            id: id.into(),
            features,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn features(&self) -> &[FeatureVector<T>] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Descriptor dimension, or `None` for a feature-less image.
    pub fn dim(&self) -> Option<usize> {
        self.features.first().map(FeatureVector::dim)
    }

    pub fn into_features(self) -> Vec<FeatureVector<T>> {
        self.features
    }
}

/// Ordered, duplicate-free label names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocabulary {
    labels: Vec<String>,
}

impl LabelVocabulary {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidLabels("at least one label is required".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if l.is_empty() {
                return Err(Error::InvalidLabels("empty label name".into()));
            }
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidLabels(format!("duplicate label {l:?}")));
            }
        }
        Ok(LabelVocabulary { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }
}

/// Boolean image/label association matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl LabelMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LabelMatrix {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDataset("ragged label matrix".into()));
        }
        Ok(LabelMatrix {
            rows: rows.len(),
            cols,
            bits: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.bits[row * self.cols..(row + 1) * self.cols]
    }

    /// Label indices set in `row`.
    pub fn labels_of(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(row)
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }
}

/// Image collection with a labeled subset and its label matrix.
///
/// Row `r` of the label matrix describes the image at `labeled[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    images: Vec<ImageFeatures<T>>,
    labeled: Vec<usize>,
    labels: LabelMatrix,
    vocab: LabelVocabulary,
    dim: Option<usize>,
}

impl<T: Scalar> LabeledDataset<T> {
    /// Builds a dataset, checking every structural invariant: ids unique,
    /// labeled ids present, matrix shape, at least one label per labeled
    /// image, and a single descriptor dimension across all features.
    pub fn new(
        images: Vec<ImageFeatures<T>>,
        labeled_ids: &[String],
        labels: LabelMatrix,
        vocab: LabelVocabulary,
    ) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if index.insert(img.id(), i).is_some() {
                return Err(Error::InvalidDataset(format!("duplicate image id {:?}", img.id())));
            }
        }
        let labeled = labeled_ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownImage(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(images, labeled, labels, vocab)
    }

    /// Same as [`LabeledDataset::new`] with labeled images given by position.
    pub fn from_indices(
        images: Vec<ImageFeatures<T>>,
        labeled: Vec<usize>,
        labels: LabelMatrix,
        vocab: LabelVocabulary,
    ) -> Result<Self> {
        if labels.rows() != labeled.len() {
            return Err(Error::InvalidDataset(format!(
                "label matrix has {} rows for {} labeled images",
                labels.rows(),
                labeled.len()
            )));
        }
        if labels.cols() != vocab.len() {
            return Err(Error::InvalidDataset(format!(
                "label matrix has {} columns for {} labels",
                labels.cols(),
                vocab.len()
            )));
        }
        let mut seen = HashSet::new();
        for (row, &i) in labeled.iter().enumerate() {
            let img = images.get(i).ok_or_else(|| {
                Error::InvalidDataset(format!("labeled index {i} out of range"))
            })?;
            if !seen.insert(i) {
                return Err(Error::InvalidDataset(format!(
                    "image {:?} labeled twice",
                    img.id()
                )));
            }
            if labels.labels_of(row).next().is_none() {
                return Err(Error::UnlabeledImage(img.id().to_string()));
            }
        }
        let mut dim = None;
        for img in &images {
            match (dim, img.dim()) {
                (None, d) => dim = d,
                (Some(h), Some(d)) if h != d => {
                    return Err(Error::DimensionMismatch { left: h, right: d })
                }
                _ => {}
            }
        }
        Ok(LabeledDataset {
            images,
            labeled,
            labels,
            vocab,
            dim,
        })
    }

    pub fn images(&self) -> &[ImageFeatures<T>] {
        &self.images
    }

    /// Positions (into [`images`](Self::images)) of the labeled subset, in
    /// label-matrix row order.
    pub fn labeled_indices(&self) -> &[usize] {
        &self.labeled
    }

    pub fn labeled_ids(&self) -> impl Iterator<Item = &str> {
        self.labeled.iter().map(|&i| self.images[i].id())
    }

    pub fn label_matrix(&self) -> &LabelMatrix {
        &self.labels
    }

    pub fn label_vocab(&self) -> &LabelVocabulary {
        &self.vocab
    }

    pub fn num_labels(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_labeled(&self) -> usize {
        self.labeled.len()
    }

    /// Descriptor dimension, `None` when no image has features.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// Features of the image at label-matrix row `row`.
    pub fn labeled_image(&self, row: usize) -> &ImageFeatures<T> {
        &self.images[self.labeled[row]]
    }

    pub fn position_of(&self, id: &str) -> Option<usize> {
        self.images.iter().position(|img| img.id() == id)
    }

    /// All features of labeled images, image by image in row order.
    pub fn labeled_pool(&self) -> Vec<&FeatureVector<T>> {
        self.labeled
            .iter()
            .flat_map(|&i| self.images[i].features())
            .collect()
    }

    /// Features of every labeled image carrying `label`.
    pub fn label_pool(&self, label: usize) -> Vec<&FeatureVector<T>> {
        self.labeled
            .iter()
            .enumerate()
            .filter(|&(row, _)| self.labels.get(row, label))
            .flat_map(|(_, &i)| self.images[i].features())
            .collect()
    }

    /// Restricts the labeled subset to the given rows, keeping every image.
    pub fn restrict_labeled(&self, rows: &[usize]) -> Result<Self> {
        let mut matrix = LabelMatrix::zeros(rows.len(), self.labels.cols());
        let mut labeled = Vec::with_capacity(rows.len());
        for (r, &row) in rows.iter().enumerate() {
            if row >= self.labeled.len() {
                return Err(Error::InvalidDataset(format!("labeled row {row} out of range")));
            }
            labeled.push(self.labeled[row]);
            for c in self.labels.labels_of(row) {
                matrix.set(r, c, true);
            }
        }
        Self::from_indices(self.images.clone(), labeled, matrix, self.vocab.clone())
    }

    /// Copy with the features of image `index` replaced.
    pub fn with_image_features(&self, replacements: Vec<(usize, Vec<FeatureVector<T>>)>) -> Result<Self> {
        let mut images = self.images.clone();
        for (i, features) in replacements {
            let id = images[i].id().to_string();
            images[i] = ImageFeatures::new(id, features)?;
        }
        Self::from_indices(images, self.labeled.clone(), self.labels.clone(), self.vocab.clone())
    }
}
