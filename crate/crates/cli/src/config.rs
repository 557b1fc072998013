//! Flat `key = value` experiment configuration.
//!
//! Lines starting with `#` are comments. Keys are applied in order, so a
//! later assignment (for instance a command line flag) overrides an earlier
//! one. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use semvoc::clustering::KMeansParams;
use semvoc::eval::{EvalConfig, LinearParams, Protocol, SplitSpec};
use semvoc::features::SamplingConfig;
use semvoc::filtering::FilterParams;
use semvoc::synthgen::SynthConfig;
use semvoc::vocabulary::Strategy;
use semvoc::Seed;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Synthetic,
    Features,
    Images,
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "synthetic" => Ok(SourceKind::Synthetic),
            "features" => Ok(SourceKind::Features),
            "images" => Ok(SourceKind::Images),
            _ => Err("expected synthetic, features or images".into()),
        }
    }
}

impl SourceKind {
    fn tag(self) -> &'static str {
        match self {
            SourceKind::Synthetic => "synthetic",
            SourceKind::Features => "features",
            SourceKind::Images => "images",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceKind,
    pub feature_dir: Option<PathBuf>,
    pub images_dir: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub sampling: SamplingConfig,
    /// Generator settings; its seed follows `seed` unless `synth.seed` is set.
    pub synth: SynthConfig,
    synth_seed: Option<u64>,
    pub strategies: Vec<Strategy>,
    pub vocab_sizes: Vec<usize>,
    pub filter: FilterParams,
    /// Extra filtered-dedicated runs, one per threshold multiplier.
    pub alpha_sweep: Vec<f64>,
    pub kmeans: KMeansParams,
    pub protocols: Vec<Protocol>,
    pub holdout: SplitSpec,
    pub svm: SplitSpec,
    pub eval: EvalConfig,
    pub linear: LinearParams,
    pub out_dir: PathBuf,
    pub seed: Seed,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: SourceKind::Synthetic,
            feature_dir: None,
            images_dir: None,
            labels: None,
            sampling: SamplingConfig::default(),
            synth: SynthConfig::reference(Seed(0)),
            synth_seed: None,
            strategies: Strategy::ALL.to_vec(),
            vocab_sizes: vec![100, 200, 400, 800],
            filter: FilterParams::default(),
            alpha_sweep: Vec::new(),
            kmeans: KMeansParams::default(),
            protocols: vec![Protocol::HoldoutClustering, Protocol::ClassBalancedSvm],
            holdout: SplitSpec::holdout(Seed(0)),
            svm: SplitSpec::class_balanced(Seed(0)),
            eval: EvalConfig::default(),
            linear: LinearParams::default(),
            out_dir: PathBuf::from("out"),
            seed: Seed(0),
            workers: 0,
        }
    }
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

fn one<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| e.to_string())
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Parses `key = value` lines into ordered pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = ExperimentConfig::default();
        cfg.apply_all(&parse_pairs(&text)?)?;
        Ok(cfg)
    }

    pub fn apply_all(&mut self, pairs: &[(String, String)]) -> Result<(), ConfigError> {
        pairs.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            reason,
        };
        let path = || Some(PathBuf::from(value));
        match key {
            "source" => self.source = one(value).map_err(bad)?,
            "feature_dir" => self.feature_dir = path(),
            "images_dir" => self.images_dir = path(),
            "labels" => self.labels = path(),
            "grid_step" => self.sampling.grid_step = one(value).map_err(bad)?,
            "patch_size" => self.sampling.patch_size = one(value).map_err(bad)?,
            "min_image_side" => self.sampling.min_image_side = one(value).map_err(bad)?,
            "synth.num_labels" => self.synth.num_labels = one(value).map_err(bad)?,
            "synth.images_per_label" => self.synth.images_per_label = one(value).map_err(bad)?,
            "synth.features_per_image" => self.synth.features_per_image = one(value).map_err(bad)?,
            "synth.background_fraction" => self.synth.background_fraction = one(value).map_err(bad)?,
            "synth.words_per_label" => self.synth.words_per_label = one(value).map_err(bad)?,
            "synth.background_centers" => self.synth.background_centers = one(value).map_err(bad)?,
            "synth.scene_centers" => self.synth.scene_centers = one(value).map_err(bad)?,
            "synth.part_offset" => {
                self.synth.part_offset = if value == "none" { None } else { Some(one(value).map_err(bad)?) }
            }
            "synth.dim" => self.synth.dim = one(value).map_err(bad)?,
            "synth.center_spread" => self.synth.center_spread = one(value).map_err(bad)?,
            "synth.within_spread" => self.synth.within_spread = one(value).map_err(bad)?,
            "synth.labeled_fraction" => self.synth.labeled_fraction = one(value).map_err(bad)?,
            "synth.second_label_probability" => self.synth.second_label_probability = one(value).map_err(bad)?,
            "synth.seed" => self.synth_seed = Some(one(value).map_err(bad)?),
            "strategies" => self.strategies = list(value).map_err(bad)?,
            "vocab_sizes" => self.vocab_sizes = list(value).map_err(bad)?,
            "alpha" => self.filter.alpha = one(value).map_err(bad)?,
            "max_files" => self.filter.max_files = one(value).map_err(bad)?,
            "alpha_sweep" => self.alpha_sweep = list(value).map_err(bad)?,
            "kmeans.max_iterations" => self.kmeans.max_iterations = one(value).map_err(bad)?,
            "kmeans.tol" => {
                self.kmeans.convergence_tol = if value == "auto" { None } else { Some(one(value).map_err(bad)?) }
            }
            "protocols" => self.protocols = list(value).map_err(bad)?,
            "holdout.learn_fraction" => self.holdout.learn_fraction = one(value).map_err(bad)?,
            "holdout.labeled_fraction" => self.holdout.labeled_fraction_of_learn = one(value).map_err(bad)?,
            "svm.per_class_learn" => self.svm.per_class_learn = one(value).map_err(bad)?,
            "svm.per_class_labeled" => self.svm.per_class_labeled = one(value).map_err(bad)?,
            "nc_values" => self.eval.nc_values = list(value).map_err(bad)?,
            "clustering_repeats" => self.eval.clustering_repeats = one(value).map_err(bad)?,
            "construction_repeats" => self.eval.construction_repeats = one(value).map_err(bad)?,
            "linear.lambda" => self.linear.lambda = one(value).map_err(bad)?,
            "linear.epochs" => self.linear.epochs = one(value).map_err(bad)?,
            "out" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = Seed(one(value).map_err(bad)?),
            "workers" => self.workers = one(value).map_err(bad)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Generator settings with the effective seed.
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: Seed(self.synth_seed.unwrap_or(self.seed.value())),
            ..self.synth.clone()
        }
    }

    pub fn split_spec(&self, protocol: Protocol) -> SplitSpec {
        let base = match protocol {
            Protocol::HoldoutClustering => self.holdout,
            Protocol::ClassBalancedSvm => self.svm,
        };
        SplitSpec {
            protocol,
            seed: self.seed.derive("split"),
            ..base
        }
    }

    /// Checks everything that can be checked before any work starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: semvoc::Error| ConfigError::Invalid(e.to_string());
        let must_exist = |name: &str, p: &Option<PathBuf>| match p {
            None => Err(ConfigError::Invalid(format!("source {} needs `{name}`", self.source.tag()))),
            Some(p) if !p.exists() => Err(ConfigError::Invalid(format!("{name} {} does not exist", p.display()))),
            Some(_) => Ok(()),
        };
        match self.source {
            SourceKind::Synthetic => self.synth_config().validate().map_err(invalid)?,
            SourceKind::Features => {
                must_exist("feature_dir", &self.feature_dir)?;
                must_exist("labels", &self.labels)?;
            }
            SourceKind::Images => {
                must_exist("images_dir", &self.images_dir)?;
                must_exist("labels", &self.labels)?;
                self.sampling.validate().map_err(invalid)?;
            }
        }
        if self.strategies.is_empty() {
            return Err(ConfigError::Invalid("strategies must not be empty".into()));
        }
        if self.vocab_sizes.is_empty() || self.vocab_sizes.contains(&0) || self.vocab_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::Invalid("vocab_sizes must be positive and strictly ascending".into()));
        }
        if self.protocols.is_empty() {
            return Err(ConfigError::Invalid("protocols must not be empty".into()));
        }
        self.filter.validate().map_err(invalid)?;
        for &a in &self.alpha_sweep {
            FilterParams { alpha: a, ..self.filter }.validate().map_err(invalid)?;
        }
        self.kmeans.validate().map_err(invalid)?;
        self.holdout.validate().map_err(invalid)?;
        self.svm.validate().map_err(invalid)?;
        self.eval.validate().map_err(invalid)?;
        self.linear.validate().map_err(invalid)?;
        Ok(())
    }

    /// Every setting that influences results, one `key = value` per line in a
    /// fixed order. Output location and worker count are left out.
    pub fn canonical_text(&self) -> String {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let s = &self.synth_config();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("source", self.source.tag().into());
        match self.source {
            SourceKind::Synthetic => {
                kv("synth.num_labels", s.num_labels.to_string());
                kv("synth.images_per_label", s.images_per_label.to_string());
                kv("synth.features_per_image", s.features_per_image.to_string());
                kv("synth.background_fraction", s.background_fraction.to_string());
                kv("synth.words_per_label", s.words_per_label.to_string());
                kv("synth.background_centers", s.background_centers.to_string());
                kv("synth.scene_centers", s.scene_centers.to_string());
                kv("synth.part_offset", s.part_offset.map_or("none".into(), |o| o.to_string()));
                kv("synth.dim", s.dim.to_string());
                kv("synth.center_spread", s.center_spread.to_string());
                kv("synth.within_spread", s.within_spread.to_string());
                kv("synth.labeled_fraction", s.labeled_fraction.to_string());
                kv("synth.second_label_probability", s.second_label_probability.to_string());
                kv("synth.seed", s.seed.value().to_string());
            }
            SourceKind::Features => {
                kv("feature_dir", opt(&self.feature_dir));
                kv("labels", opt(&self.labels));
            }
            SourceKind::Images => {
                kv("images_dir", opt(&self.images_dir));
                kv("labels", opt(&self.labels));
                kv("grid_step", self.sampling.grid_step.to_string());
                kv("patch_size", self.sampling.patch_size.to_string());
                kv("min_image_side", self.sampling.min_image_side.to_string());
            }
        }
        kv("strategies", join(&self.strategies));
        kv("vocab_sizes", join(&self.vocab_sizes));
        kv("alpha", self.filter.alpha.to_string());
        kv("max_files", self.filter.max_files.to_string());
        kv("alpha_sweep", join(&self.alpha_sweep));
        kv("kmeans.max_iterations", self.kmeans.max_iterations.to_string());
        kv(
            "kmeans.tol",
            self.kmeans.convergence_tol.map_or("auto".into(), |t| t.to_string()),
        );
        kv("protocols", join(&self.protocols));
        kv("holdout.learn_fraction", self.holdout.learn_fraction.to_string());
        kv("holdout.labeled_fraction", self.holdout.labeled_fraction_of_learn.to_string());
        kv("svm.per_class_learn", self.svm.per_class_learn.to_string());
        kv("svm.per_class_labeled", self.svm.per_class_labeled.to_string());
        kv("nc_values", join(&self.eval.nc_values));
        kv("clustering_repeats", self.eval.clustering_repeats.to_string());
        kv("construction_repeats", self.eval.construction_repeats.to_string());
        kv("linear.lambda", self.linear.lambda.to_string());
        kv("linear.epochs", self.linear.epochs.to_string());
        kv("seed", self.seed.value().to_string());
        out
    }

    /// SHA-256 of [`Self::canonical_text`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Comment line stamped at the top of every CSV output.
    pub fn header_comment(&self) -> String {
        format!("# config_hash={} seed={}\n", self.hash(), self.seed.value())
    }
}
