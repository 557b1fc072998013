//! Visual vocabulary construction.
//!
//! Four strategies share one sampling pool (the features of labeled images)
//! so they can be compared on identical inputs:
//!
//! * `random`: `m` features drawn uniformly from the pool.
//! * `random_km`: the `random` draw refined by k-means over the whole pool.
//! * `model`: one dedicated sub-vocabulary per label, each drawn from and
//!   refined over the features of that label's images only, concatenated in
//!   label order.
//! * `filt_model`: `model` over the feature sets left by
//!   [`filtering::filter_dataset`](crate::filtering::filter_dataset).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::clustering::{ameliorate_using_kmeans, choose_features_at_random, KMeansParams};
use crate::dataset::{FeatureVector, LabeledDataset};
use crate::error::{Error, Result};
use crate::filtering::{filter_dataset, FilterOutcome, FilterParams};
use crate::scalar::Scalar;
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Random,
    RandomKm,
    Model,
    FiltModel,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Random,
        Strategy::RandomKm,
        Strategy::Model,
        Strategy::FiltModel,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::RandomKm => "random_km",
            Strategy::Model => "model",
            Strategy::FiltModel => "filt_model",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Strategy::Random => 0,
            Strategy::RandomKm => 1,
            Strategy::Model => 2,
            Strategy::FiltModel => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|s| s.code() == code)
            .ok_or_else(|| Error::UnknownStrategy(code.to_string()))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "random" => Ok(Strategy::Random),
            "random_km" | "random+km" => Ok(Strategy::RandomKm),
            "model" => Ok(Strategy::Model),
            "filt_model" | "filt+model" => Ok(Strategy::FiltModel),
            other => Err(Error::UnknownStrategy(other.to_string())),
        }
    }
}

/// Visual words plus, for each word, the label whose pool produced it
/// (`None` for label-agnostic strategies).
#[derive(Debug, Clone, PartialEq)]
pub struct VisualVocabulary<T> {
    words: Vec<FeatureVector<T>>,
    provenance: Vec<Option<usize>>,
    strategy: Strategy,
    num_labels: usize,
}

impl<T: Scalar> VisualVocabulary<T> {
    pub fn new(
        words: Vec<FeatureVector<T>>,
        provenance: Vec<Option<usize>>,
        strategy: Strategy,
        num_labels: usize,
    ) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if words.len() != provenance.len() {
            return Err(Error::InvalidDataset(format!(
                "{} words but {} provenance entries",
                words.len(),
                provenance.len()
            )));
        }
        let h = words[0].dim();
        if let Some(w) = words.iter().find(|w| w.dim() != h) {
            return Err(Error::DimensionMismatch { left: h, right: w.dim() });
        }
        if let Some(l) = provenance.iter().flatten().find(|&&l| l >= num_labels) {
            return Err(Error::InvalidDataset(format!("provenance label {l} out of range")));
        }
        Ok(VisualVocabulary {
            words,
            provenance,
            strategy,
            num_labels,
        })
    }

    pub fn words(&self) -> &[FeatureVector<T>] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.words[0].dim()
    }

    pub fn provenance(&self) -> &[Option<usize>] {
        &self.provenance
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }
}

/// Vocabulary size of each label: `m / k` each, with the `m mod k` extra
/// words going to the first labels.
pub fn split_sizes(m: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || m < k {
        return Err(Error::VocabularyTooSmall { m, k });
    }
    let (base, extra) = (m / k, m % k);
    Ok((0..k).map(|i| base + usize::from(i < extra)).collect())
}

/// Seed of the random draw for pool `index`. The global pool of the
/// label-agnostic strategies is pool 0, so a single-label dedicated build
/// reproduces `random_km` exactly.
fn init_seed(root: Seed, index: usize) -> Seed {
    root.derive_indexed("vocabulary-init", index as u64)
}

fn labeled_pool_or_error<T: Scalar>(m: usize, dataset: &LabeledDataset<T>) -> Result<Vec<&FeatureVector<T>>> {
    let pool = dataset.labeled_pool();
    if pool.len() < m {
        return Err(Error::InsufficientFeatures {
            requested: m,
            available: pool.len(),
        });
    }
    Ok(pool)
}

pub fn build_random<T: Scalar>(m: usize, dataset: &LabeledDataset<T>, seed: Seed) -> Result<VisualVocabulary<T>> {
    let pool = labeled_pool_or_error(m, dataset)?;
    let words = choose_features_at_random(m, &pool, init_seed(seed, 0))?;
    VisualVocabulary::new(words, vec![None; m], Strategy::Random, dataset.num_labels())
}

/// The `random` draw (with `params.seed`) refined by k-means over the pool.
pub fn build_random_km<T: Scalar>(
    m: usize,
    dataset: &LabeledDataset<T>,
    params: &KMeansParams,
) -> Result<VisualVocabulary<T>> {
    let pool = labeled_pool_or_error(m, dataset)?;
    let init = choose_features_at_random(m, &pool, init_seed(params.seed, 0))?;
    let km = ameliorate_using_kmeans(&init, &pool, params)?;
    VisualVocabulary::new(km.centroids, vec![None; m], Strategy::RandomKm, dataset.num_labels())
}

/// One dedicated vocabulary per label, concatenated in label order.
pub fn build_dedicated<T: Scalar>(
    m: usize,
    dataset: &LabeledDataset<T>,
    params: &KMeansParams,
) -> Result<VisualVocabulary<T>> {
    dedicated(m, dataset, params, Strategy::Model)
}

fn dedicated<T: Scalar>(
    m: usize,
    dataset: &LabeledDataset<T>,
    params: &KMeansParams,
    strategy: Strategy,
) -> Result<VisualVocabulary<T>> {
    let k = dataset.num_labels();
    let sizes = split_sizes(m, k)?;
    let parts: Vec<Vec<FeatureVector<T>>> = sizes
        .par_iter()
        .enumerate()
        .map(|(label, &size)| {
            let pool = dataset.label_pool(label);
            if pool.len() < size {
                let name = dataset.label_vocab().name(label).to_string();
                return Err(match strategy {
                    Strategy::FiltModel => Error::StarvedFilteredLabel {
                        label: name,
                        requested: size,
                        available: pool.len(),
                    },
                    _ => Error::StarvedLabel {
                        label: name,
                        requested: size,
                        available: pool.len(),
                    },
                });
            }
            let init = choose_features_at_random(size, &pool, init_seed(params.seed, label))?;
            Ok(ameliorate_using_kmeans(&init, &pool, params)?.centroids)
        })
        .collect::<Result<_>>()?;

    let mut words = Vec::with_capacity(m);
    let mut provenance = Vec::with_capacity(m);
    for (label, part) in parts.into_iter().enumerate() {
        provenance.extend(std::iter::repeat_n(Some(label), part.len()));
        words.extend(part);
    }
    VisualVocabulary::new(words, provenance, strategy, k)
}

/// Filters the labeled images first, then builds dedicated vocabularies over
/// what survived. Also returns the filtering outcome.
pub fn build_filtered_dedicated_with_report<T: Scalar>(
    m: usize,
    dataset: &LabeledDataset<T>,
    filter: &FilterParams,
    params: &KMeansParams,
) -> Result<(VisualVocabulary<T>, FilterOutcome<T>)> {
    let outcome = filter_dataset(dataset, filter)?;
    let vocab = dedicated(m, &outcome.dataset, params, Strategy::FiltModel)?;
    Ok((vocab, outcome))
}

pub fn build_filtered_dedicated<T: Scalar>(
    m: usize,
    dataset: &LabeledDataset<T>,
    filter: &FilterParams,
    params: &KMeansParams,
) -> Result<VisualVocabulary<T>> {
    build_filtered_dedicated_with_report(m, dataset, filter, params).map(|(v, _)| v)
}

/// Builds a vocabulary with any strategy. `filter` is only used by
/// [`Strategy::FiltModel`].
pub fn build<T: Scalar>(
    strategy: Strategy,
    m: usize,
    dataset: &LabeledDataset<T>,
    params: &KMeansParams,
    filter: &FilterParams,
) -> Result<VisualVocabulary<T>> {
    match strategy {
        Strategy::Random => build_random(m, dataset, params.seed),
        Strategy::RandomKm => build_random_km(m, dataset, params),
        Strategy::Model => build_dedicated(m, dataset, params),
        Strategy::FiltModel => build_filtered_dedicated(m, dataset, filter, params),
    }
}

pub const VOCAB_MAGIC: [u8; 4] = *b"BOFV";
pub const VOCAB_VERSION: u16 = 1;

/// Binary vocabulary file, little-endian:
/// `"BOFV" u16 version u8 strategy u32 m u32 h u32 k`, then per word an
/// `i32` provenance (-1 = generic) followed by `h` f32 components.
pub fn write_vocabulary<T: Scalar, W: Write>(mut w: W, vocab: &VisualVocabulary<T>) -> Result<()> {
    let mut out = Vec::with_capacity(19 + vocab.len() * (4 + vocab.dim() * 4));
    out.extend_from_slice(&VOCAB_MAGIC);
    out.extend_from_slice(&VOCAB_VERSION.to_le_bytes());
    out.push(vocab.strategy.code());
    out.extend_from_slice(&(vocab.len() as u32).to_le_bytes());
    out.extend_from_slice(&(vocab.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(vocab.num_labels as u32).to_le_bytes());
    for (word, prov) in vocab.words.iter().zip(&vocab.provenance) {
        let p: i32 = prov.map_or(-1, |l| l as i32);
        out.extend_from_slice(&p.to_le_bytes());
        for &v in word.as_slice() {
            out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
    }
    w.write_all(&out)?;
    Ok(())
}

pub fn read_vocabulary<T: Scalar, R: Read>(mut r: R) -> Result<VisualVocabulary<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    const HEADER: usize = 4 + 2 + 1 + 4 + 4 + 4;
    if bytes.len() < 4 {
        return Err(Error::Truncated { expected: HEADER, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != VOCAB_MAGIC {
        return Err(Error::BadMagic { expected: VOCAB_MAGIC, found: magic });
    }
    if bytes.len() < HEADER {
        return Err(Error::Truncated { expected: HEADER, found: bytes.len() });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != VOCAB_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let strategy = Strategy::from_code(bytes[6])?;
    let (m, h, k) = (u32_at(7), u32_at(11), u32_at(15));
    if h == 0 {
        return Err(Error::ZeroDimension);
    }
    let record = 4 + 4 * h;
    let expected = HEADER + m * record;
    if bytes.len() < expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes(bytes.len() - expected));
    }
    let mut words = Vec::with_capacity(m);
    let mut provenance = Vec::with_capacity(m);
    for rec in bytes[HEADER..].chunks_exact(record) {
        let p = i32::from_le_bytes(rec[..4].try_into().unwrap());
        provenance.push(if p < 0 { None } else { Some(p as usize) });
        let values = rec[4..]
            .chunks_exact(4)
            .map(|b| T::narrow(f32::from_le_bytes(b.try_into().unwrap()) as f64))
            .collect();
        words.push(FeatureVector::new(values)?);
    }
    VisualVocabulary::new(words, provenance, strategy, k)
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;
    use crate::dataset::{ImageFeatures, LabelMatrix, LabelVocabulary};

    /// Images whose features sit around `centers[label]`, one label each.
    fn blob_dataset(centers: &[Vec<f64>], images_per_label: usize, feats: usize, sigma: f64, seed: u64) -> LabeledDataset<f64> {
        let mut rng = Seed(seed).rng();
        let k = centers.len();
        let mut images = Vec::new();
        let mut rows = Vec::new();
        for (label, c) in centers.iter().enumerate() {
            for i in 0..images_per_label {
                let fs = (0..feats)
                    .map(|_| {
                        FeatureVector::new(
                            c.iter()
                                .map(|&x| {
                                    let n: f64 = StandardNormal.sample(&mut rng);
                                    x + sigma * n
                                })
                                .collect(),
                        )
                        .unwrap()
                    })
                    .collect();
                images.push(ImageFeatures::new(format!("l{label}i{i}"), fs).unwrap());
                let mut row = vec![false; k];
                row[label] = true;
                rows.push(row);
            }
        }
        let ids: Vec<String> = images.iter().map(|i| i.id().to_string()).collect();
        LabeledDataset::new(
            images,
            &ids,
            LabelMatrix::from_rows(&rows).unwrap(),
            LabelVocabulary::new((0..k).map(|i| format!("t{i}"))).unwrap(),
        )
        .unwrap()
    }

    fn km(seed: u64) -> KMeansParams {
        KMeansParams::default().with_seed(Seed(seed))
    }

    #[test]
    fn split_sizes_cases() {
        assert_eq!(split_sizes(4, 2).unwrap(), vec![2, 2]);
        assert_eq!(split_sizes(5, 3).unwrap(), vec![2, 2, 1]);
        let s = split_sizes(1000, 101).unwrap();
        assert_eq!(s.iter().sum::<usize>(), 1000);
        assert_eq!(s.iter().filter(|&&x| x == 10).count(), 91);
        assert_eq!(s.iter().filter(|&&x| x == 9).count(), 10);
        assert!(s[..91].iter().all(|&x| x == 10));
        assert!(matches!(split_sizes(2, 3), Err(Error::VocabularyTooSmall { m: 2, k: 3 })));
    }

    #[test]
    fn random_exhaustive_and_membership() {
        let ds = blob_dataset(&[vec![0.0, 0.0]], 2, 3, 1.0, 1);
        let v = build_random(6, &ds, Seed(3)).unwrap();
        let mut got: Vec<Vec<f64>> = v.words().iter().map(|w| w.as_slice().to_vec()).collect();
        let mut pool: Vec<Vec<f64>> = ds.labeled_pool().iter().map(|w| w.as_slice().to_vec()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pool.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, pool);
        assert!(v.provenance().iter().all(Option::is_none));

        let big = blob_dataset(&[vec![0.0; 4]], 10, 100, 1.0, 2);
        let v = build_random(10, &big, Seed(4)).unwrap();
        let pool = big.labeled_pool();
        assert!(v.words().iter().all(|w| pool.contains(&w)));
        assert_eq!(v, build_random(10, &big, Seed(4)).unwrap());
        assert!(matches!(
            build_random(1001, &big, Seed(4)),
            Err(Error::InsufficientFeatures { available: 1000, .. })
        ));
    }

    #[test]
    fn random_km_fixed_point_and_blobs() {
        let ds = blob_dataset(&[vec![0.0, 0.0]], 2, 2, 1.0, 5);
        let v = build_random_km(4, &ds, &km(1)).unwrap();
        for w in v.words() {
            assert!(ds.labeled_pool().contains(&w));
        }

        let centers = vec![vec![-10.0, 0.0, 0.0], vec![10.0, 0.0, 0.0]];
        let ds = blob_dataset(&centers, 5, 40, 0.5, 6);
        let v = build_random_km(2, &ds, &km(2)).unwrap();
        for c in &centers {
            let members: Vec<&FeatureVector<f64>> = ds
                .labeled_pool()
                .into_iter()
                .filter(|p| (p.as_slice()[0] - c[0]).abs() < 5.0)
                .collect();
            let mean: Vec<f64> = (0..3)
                .map(|d| members.iter().map(|p| p.as_slice()[d]).sum::<f64>() / members.len() as f64)
                .collect();
            assert!(v.words().iter().any(|w| w.as_slice().iter().zip(&mean).all(|(a, b)| (a - b).abs() < 1e-6)));
        }
    }

    #[test]
    fn random_km_improves_on_random_init() {
        let ds = blob_dataset(&[vec![0.0; 3], vec![3.0; 3]], 4, 25, 1.0, 9);
        let pool = ds.labeled_pool();
        let sse = |words: &[FeatureVector<f64>]| -> f64 {
            pool.iter()
                .map(|p| crate::distance::nearest_squared(p.as_slice(), words).unwrap().1)
                .sum()
        };
        let r = build_random(8, &ds, Seed(11)).unwrap();
        let rk = build_random_km(8, &ds, &km(11)).unwrap();
        assert!(sse(rk.words()) <= sse(r.words()));
    }

    #[test]
    fn dedicated_single_label_equals_random_km() {
        let ds = blob_dataset(&[vec![1.0, 2.0]], 5, 20, 1.0, 12);
        assert_eq!(
            build_dedicated(7, &ds, &km(3)).unwrap().words(),
            build_random_km(7, &ds, &km(3)).unwrap().words()
        );
    }

    #[test]
    fn dedicated_words_stay_near_their_label() {
        let mut rng = Seed(13).rng();
        let centers: Vec<Vec<f64>> = (0..2)
            .map(|i| (0..4).map(|_| rng.random_range(-1.0..1.0) + 20.0 * i as f64).collect())
            .collect();
        let sigma = 1.0;
        let ds = blob_dataset(&centers, 4, 30, sigma, 14);
        let v = build_dedicated(4, &ds, &km(5)).unwrap();
        assert_eq!(v.provenance(), &[Some(0), Some(0), Some(1), Some(1)]);
        for (w, p) in v.words().iter().zip(v.provenance()) {
            let own = &centers[p.unwrap()];
            let other = &centers[1 - p.unwrap()];
            let d = |c: &Vec<f64>| crate::distance::squared_distance(w.as_slice(), c).sqrt();
            // 3 sigma per axis over 4 axes
            assert!(d(own) < 3.0 * sigma * 2.0);
            assert!(d(other) > 10.0);
        }
    }

    #[test]
    fn dedicated_structure_and_starvation() {
        let ds = blob_dataset(&[vec![0.0; 2], vec![5.0; 2], vec![-5.0; 2]], 2, 5, 1.0, 15);
        let v = build_dedicated(8, &ds, &km(1)).unwrap();
        assert_eq!(v.len(), 8);
        let sizes = split_sizes(8, 3).unwrap();
        for (label, &size) in sizes.iter().enumerate() {
            assert_eq!(v.provenance().iter().filter(|p| **p == Some(label)).count(), size);
        }
        let err = build_dedicated(33, &ds, &km(1)).unwrap_err();
        assert!(matches!(err, Error::StarvedLabel { ref label, requested: 11, available: 10 } if label == "t0"));
    }

    #[test]
    fn unfiltered_run_matches_model() {
        let ds = blob_dataset(&[vec![0.0; 2], vec![5.0; 2]], 3, 10, 1.0, 16);
        let filter = FilterParams {
            alpha: 1e12,
            ..FilterParams::default()
        };
        let a = build_filtered_dedicated(6, &ds, &filter, &km(2)).unwrap();
        let b = build_dedicated(6, &ds, &km(2)).unwrap();
        assert_eq!(a.words(), b.words());
        assert_eq!(a.strategy(), Strategy::FiltModel);
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.tag().parse::<Strategy>().unwrap(), s);
            assert_eq!(Strategy::from_code(s.code()).unwrap(), s);
        }
        assert_eq!("filt+model".parse::<Strategy>().unwrap(), Strategy::FiltModel);
        assert!("bogus".parse::<Strategy>().is_err());
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let ds = blob_dataset(&[vec![0.0; 3], vec![5.0; 3]], 2, 10, 1.0, 17);
        let v: VisualVocabulary<f64> = build_dedicated(5, &ds, &km(1)).unwrap();
        let v32 = VisualVocabulary::new(
            v.words().iter().map(|w| FeatureVector::new(w.as_slice().iter().map(|&x| x as f32).collect()).unwrap()).collect(),
            v.provenance().to_vec(),
            v.strategy(),
            2,
        )
        .unwrap();
        let mut bytes = Vec::new();
        write_vocabulary(&mut bytes, &v32).unwrap();
        assert_eq!(bytes.len(), 19 + 5 * (4 + 12));
        let back: VisualVocabulary<f32> = read_vocabulary(bytes.as_slice()).unwrap();
        assert_eq!(back, v32);

        bytes[0] = b'Z';
        assert!(matches!(read_vocabulary::<f32, _>(bytes.as_slice()), Err(Error::BadMagic { .. })));
    }
}
