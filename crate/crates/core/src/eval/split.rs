use rand::seq::SliceRandom;

use crate::dataset::{LabelVocabulary, LabeledDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    /// Stratified holdout; the clustering classifier is trained on the learn
    /// part (labeled and unlabeled) and tested on the rest.
    HoldoutClustering,
    /// Fixed number of learn images per class; the linear classifier is
    /// tested on every remaining image.
    ClassBalancedSvm,
}

impl Protocol {
    pub fn tag(self) -> &'static str {
        match self {
            Protocol::HoldoutClustering => "holdout_clustering",
            Protocol::ClassBalancedSvm => "class_balanced_svm",
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "holdout_clustering" | "clustering" => Ok(Protocol::HoldoutClustering),
            "class_balanced_svm" | "svm" => Ok(Protocol::ClassBalancedSvm),
            other => Err(Error::InvalidConfig(format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub protocol: Protocol,
    pub learn_fraction: f64,
    pub labeled_fraction_of_learn: f64,
    pub per_class_learn: usize,
    pub per_class_labeled: usize,
    pub seed: Seed,
}

impl SplitSpec {
    pub fn holdout(seed: Seed) -> Self {
        SplitSpec {
            protocol: Protocol::HoldoutClustering,
            learn_fraction: 0.67,
            labeled_fraction_of_learn: 0.5,
            per_class_learn: 30,
            per_class_labeled: 15,
            seed,
        }
    }

    pub fn class_balanced(seed: Seed) -> Self {
        SplitSpec {
            protocol: Protocol::ClassBalancedSvm,
            ..SplitSpec::holdout(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.learn_fraction) || !open_unit(self.labeled_fraction_of_learn) {
            return Err(Error::InvalidConfig("split fractions must lie in (0, 1)".into()));
        }
        if self.per_class_labeled == 0 || self.per_class_labeled > self.per_class_learn {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= per_class_labeled ({}) <= per_class_learn ({})",
                self.per_class_labeled, self.per_class_learn
            )));
        }
        Ok(())
    }
}

/// Image positions of one split, each list ascending. `labeled` is a subset
/// of `learn`; `learn` and `test` are disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub learn: Vec<usize>,
    pub labeled: Vec<usize>,
    pub test: Vec<usize>,
}

/// Class of every image, for datasets where every image carries exactly one
/// label.
pub fn class_of_images<T: Scalar>(dataset: &LabeledDataset<T>) -> Result<Vec<usize>> {
    let mut classes = vec![None; dataset.images().len()];
    for (row, &i) in dataset.labeled_indices().iter().enumerate() {
        let mut labels = dataset.label_matrix().labels_of(row);
        let first = labels.next();
        if labels.next().is_some() {
            return Err(Error::MultiLabelImage(dataset.images()[i].id().to_string()));
        }
        classes[i] = first;
    }
    classes
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| Error::UnlabeledImage(dataset.images()[i].id().to_string())))
        .collect()
}

/// Stratified split, deterministic per `(spec.seed, repetition)`.
pub fn make_split(classes: &[usize], labels: &LabelVocabulary, spec: &SplitSpec, repetition: usize) -> Result<Split> {
    spec.validate()?;
    let mut split = Split {
        learn: Vec::new(),
        labeled: Vec::new(),
        test: Vec::new(),
    };
    let rep_seed = spec.seed.derive_indexed("split", repetition as u64);
    for class in 0..labels.len() {
        let mut members: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] == class).collect();
        let n = members.len();
        if n == 0 {
            continue;
        }
        let (n_learn, n_labeled, required) = match spec.protocol {
            Protocol::HoldoutClustering => {
                let n_learn = (spec.learn_fraction * n as f64).round() as usize;
                let n_labeled = (spec.labeled_fraction_of_learn * n_learn as f64).round() as usize;
                (n_learn, n_labeled, 2)
            }
            Protocol::ClassBalancedSvm => (spec.per_class_learn, spec.per_class_labeled, spec.per_class_learn + 1),
        };
        if n < required || n_learn == 0 || n_labeled == 0 || n_learn >= n {
            return Err(Error::ClassTooSmall {
                class: labels.name(class).to_string(),
                available: n,
                required,
            });
        }
        members.shuffle(&mut rep_seed.derive_indexed("class", class as u64).rng());
        split.learn.extend_from_slice(&members[..n_learn]);
        split.labeled.extend_from_slice(&members[..n_labeled]);
        split.test.extend_from_slice(&members[n_learn..]);
    }
    split.learn.sort_unstable();
    split.labeled.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
