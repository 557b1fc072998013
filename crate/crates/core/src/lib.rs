//! Weakly supervised visual vocabulary construction for bag-of-features
//! image representations.
//!
//! The pipeline runs in four phases: sample patches ([`features`]), describe
//! them, build a visual vocabulary ([`vocabulary`]) and quantize every image
//! into a term-frequency histogram ([`encoding`]). Vocabulary construction
//! can use the image labels: [`vocabulary::build_dedicated`] gives every
//! label its own sub-vocabulary, and [`filtering`] drops features that look
//! more like images without the label than like images with it. [`eval`]
//! measures how much that helps a downstream classifier.
//!
//! Math is generic over the storage [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the `f32` storage used by the on-disk formats.

pub mod clustering;
pub mod dataset;
pub mod distance;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod features;
pub mod filtering;
pub mod scalar;
pub mod seed;
pub mod synthgen;
pub mod vocabulary;

pub use dataset::{FeatureVector, ImageFeatures, LabelMatrix, LabelVocabulary, LabeledDataset};
pub use distance::{euclidean_distance, nearest};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use seed::Seed;

pub type Feature = FeatureVector<f32>;
pub type Image = ImageFeatures<f32>;
pub type Dataset = LabeledDataset<f32>;
pub type Vocabulary = vocabulary::VisualVocabulary<f32>;

pub type Feature64 = FeatureVector<f64>;
pub type Dataset64 = LabeledDataset<f64>;
pub type Vocabulary64 = vocabulary::VisualVocabulary<f64>;
