//! Known-positive / known-negative feature filtering.
//!
//! For a labeled image `p`, the known-positive set holds other labeled
//! images carrying every label of `p`; the known-negative set holds labeled
//! images sharing none of them. A feature `f` of `p` survives when some
//! known-positive feature lies within `delta = alpha * d(f, KN)` of it, where
//! `d(f, KN)` is the distance to the closest known-negative feature.
//!
//! `p` never belongs to its own known-positive set: every feature would
//! match itself at distance zero and nothing would ever be removed.

use rand::seq::index;
use rayon::prelude::*;

use crate::dataset::{FeatureVector, LabelMatrix, LabeledDataset};
use crate::distance::{nearest_squared, squared_distance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub alpha: f64,
    /// Upper bound on the number of images in each known set.
    pub max_files: usize,
    pub seed: Seed,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            alpha: 1.0,
            max_files: 20,
            seed: Seed::default(),
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.max_files == 0 {
            return Err(Error::InvalidConfig("max_files must be at least 1".into()));
        }
        Ok(())
    }
}

/// `other` carries every label of `target`.
pub fn is_known_positive(target: &[bool], other: &[bool]) -> bool {
    target.iter().zip(other).all(|(&t, &o)| !t || o)
}

/// `other` carries none of the labels of `target`.
pub fn is_known_negative(target: &[bool], other: &[bool]) -> bool {
    target.iter().zip(other).all(|(&t, &o)| !t || !o)
}

fn known_rows(
    matrix: &LabelMatrix,
    row: usize,
    max_files: usize,
    seed: Seed,
    keep: fn(&[bool], &[bool]) -> bool,
) -> Vec<usize> {
    let target = matrix.row(row);
    let candidates: Vec<usize> = (0..matrix.rows())
        .filter(|&j| j != row && keep(target, matrix.row(j)))
        .collect();
    if candidates.len() <= max_files {
        return candidates;
    }
    let mut rng = seed.rng();
    let mut picked: Vec<usize> = index::sample(&mut rng, candidates.len(), max_files)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Rows of the known-positive images of `row`, at most `max_files`, in
/// ascending order. Subsampling is uniform and seeded per row.
pub fn known_positive_rows(matrix: &LabelMatrix, row: usize, max_files: usize, seed: Seed) -> Vec<usize> {
    known_rows(
        matrix,
        row,
        max_files,
        seed.derive_indexed("known-positive", row as u64),
        is_known_positive,
    )
}

/// Rows of the known-negative images of `row`; see [`known_positive_rows`].
pub fn known_negative_rows(matrix: &LabelMatrix, row: usize, max_files: usize, seed: Seed) -> Vec<usize> {
    known_rows(
        matrix,
        row,
        max_files,
        seed.derive_indexed("known-negative", row as u64),
        is_known_negative,
    )
}

/// Known-positive label-matrix rows for labeled row `row`.
pub fn create_kp<T: Scalar>(row: usize, dataset: &LabeledDataset<T>, params: &FilterParams) -> Vec<usize> {
    known_positive_rows(dataset.label_matrix(), row, params.max_files, params.seed)
}

/// Known-negative label-matrix rows for labeled row `row`.
pub fn create_kn<T: Scalar>(row: usize, dataset: &LabeledDataset<T>, params: &FilterParams) -> Vec<usize> {
    known_negative_rows(dataset.label_matrix(), row, params.max_files, params.seed)
}

/// Distance from `f` to the closest member of `pool`.
pub fn min_distance<T, P>(f: &[T], pool: &[P]) -> Result<f64>
where
    T: Scalar,
    P: AsRef<[T]>,
{
    nearest_squared(f, pool).map(|(_, d)| d.sqrt())
}

/// Number of pool members within `delta` of `f`, boundary included.
pub fn count_similar<T, P>(f: &[T], pool: &[P], delta: f64) -> usize
where
    T: Scalar,
    P: AsRef<[T]>,
{
    pool.iter()
        .filter(|p| squared_distance(f, p.as_ref()).sqrt() <= delta)
        .count()
}

/// Known sets of one image, as label-matrix rows and pooled features.
#[derive(Debug, Clone)]
pub struct KnownSets<'a, T> {
    pub kp_rows: Vec<usize>,
    pub kn_rows: Vec<usize>,
    pub kp_features: Vec<&'a FeatureVector<T>>,
    pub kn_features: Vec<&'a FeatureVector<T>>,
}

pub fn known_sets<'a, T: Scalar>(
    row: usize,
    dataset: &'a LabeledDataset<T>,
    params: &FilterParams,
) -> KnownSets<'a, T> {
    let kp_rows = create_kp(row, dataset, params);
    let kn_rows = create_kn(row, dataset, params);
    let pool = |rows: &[usize]| {
        rows.iter()
            .flat_map(|&r| dataset.labeled_image(r).features())
            .collect::<Vec<_>>()
    };
    KnownSets {
        kp_features: pool(&kp_rows),
        kn_features: pool(&kn_rows),
        kp_rows,
        kn_rows,
    }
}

/// Outcome of filtering one labeled image.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredImage {
    pub row: usize,
    /// Indices of the surviving features, ascending.
    pub kept: Vec<usize>,
    pub total: usize,
    pub kp_images: usize,
    pub kn_images: usize,
    pub warning: Option<String>,
}

/// Filters the features of labeled row `row` against the original feature
/// sets of its known-positive and known-negative images.
///
/// Without known negatives the threshold is undefined and every feature is
/// kept. Without known positives every feature is kept as well, with a
/// warning, rather than deleting the whole image.
pub fn filter_image<T: Scalar>(row: usize, dataset: &LabeledDataset<T>, params: &FilterParams) -> FilteredImage {
    let sets = known_sets(row, dataset, params);
    let image = dataset.labeled_image(row);
    let total = image.len();
    let all = || (0..total).collect::<Vec<_>>();
    let mut warning = None;

    let kept = if sets.kn_features.is_empty() {
        all()
    } else if sets.kp_features.is_empty() {
        warning = Some(format!(
            "image {:?} has no known-positive features; keeping all {total} features",
            image.id()
        ));
        all()
    } else {
        image
            .features()
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                let f = f.as_slice();
                let to_negative = min_distance(f, &sets.kn_features).expect("non-empty pool");
                let delta = params.alpha * to_negative;
                let to_positive = min_distance(f, &sets.kp_features).expect("non-empty pool");
                // equivalent to count_similar(f, KP, delta) > 0
                to_positive <= delta
            })
            .map(|(i, _)| i)
            .collect()
    };

    FilteredImage {
        row,
        kept,
        total,
        kp_images: sets.kp_rows.len(),
        kn_images: sets.kn_rows.len(),
        warning,
    }
}

/// One line of the filter report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterReportRow {
    pub image_id: String,
    pub total_features: usize,
    pub kept_features: usize,
    pub kp_size: usize,
    pub kn_size: usize,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome<T> {
    /// Input dataset with every labeled image's features replaced by the
    /// survivors. Unlabeled images are untouched.
    pub dataset: LabeledDataset<T>,
    pub images: Vec<FilteredImage>,
    pub report: Vec<FilterReportRow>,
}

/// Filters every labeled image independently. Each image is judged against
/// the unfiltered features of the others, so results do not depend on
/// processing order or worker count.
pub fn filter_dataset<T: Scalar>(dataset: &LabeledDataset<T>, params: &FilterParams) -> Result<FilterOutcome<T>> {
    params.validate()?;
    let images: Vec<FilteredImage> = (0..dataset.num_labeled())
        .into_par_iter()
        .map(|row| filter_image(row, dataset, params))
        .collect();

    for w in images.iter().filter_map(|i| i.warning.as_deref()) {
        log::warn!("{w}");
    }

    let replacements = images
        .iter()
        .map(|fi| {
            let src = dataset.labeled_image(fi.row).features();
            let kept = fi.kept.iter().map(|&i| src[i].clone()).collect();
            (dataset.labeled_indices()[fi.row], kept)
        })
        .collect();
    let report = images
        .iter()
        .map(|fi| FilterReportRow {
            image_id: dataset.labeled_image(fi.row).id().to_string(),
            total_features: fi.total,
            kept_features: fi.kept.len(),
            kp_size: fi.kp_images,
            kn_size: fi.kn_images,
        })
        .collect();

    Ok(FilterOutcome {
        dataset: dataset.with_image_features(replacements)?,
        images,
        report,
    })
}

pub fn write_filter_report<W: std::io::Write>(writer: W, rows: &[FilterReportRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["image_id", "total_features", "kept_features", "kp_size", "kn_size"])?;
    for r in rows {
        csv.write_record([
            r.image_id.clone(),
            r.total_features.to_string(),
            r.kept_features.to_string(),
            r.kp_size.to_string(),
            r.kn_size.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::dataset::{ImageFeatures, LabelVocabulary};

    fn rows(v: &[&[bool]]) -> LabelMatrix {
        LabelMatrix::from_rows(&v.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn one_d(images: &[(&str, &[f64], &[bool])]) -> LabeledDataset<f64> {
        let imgs = images
            .iter()
            .map(|(id, fs, _)| {
                ImageFeatures::new(
                    *id,
                    fs.iter().map(|&v| FeatureVector::new(vec![v]).unwrap()).collect(),
                )
                .unwrap()
            })
            .collect();
        let k = images[0].2.len();
        let vocab = LabelVocabulary::new((0..k).map(|i| format!("t{i}"))).unwrap();
        let ids: Vec<String> = images.iter().map(|(id, _, _)| id.to_string()).collect();
        let matrix = LabelMatrix::from_rows(&images.iter().map(|(_, _, y)| y.to_vec()).collect::<Vec<_>>()).unwrap();
        LabeledDataset::new(imgs, &ids, matrix, vocab).unwrap()
    }

    #[test]
    fn predicates_on_label_rows() {
        // p = {t1}; others {t1,t2}, {t2}, {}
        let y = rows(&[&[true, false], &[true, true], &[false, true], &[false, false]]);
        assert_eq!(known_positive_rows(&y, 0, 10, Seed(0)), vec![1]);
        assert_eq!(known_negative_rows(&y, 0, 10, Seed(0)), vec![2, 3]);
    }

    #[test]
    fn partial_overlap_is_in_neither_set() {
        let y = rows(&[&[true, true], &[true, false]]);
        assert!(known_positive_rows(&y, 0, 10, Seed(0)).is_empty());
        assert!(known_negative_rows(&y, 0, 10, Seed(0)).is_empty());
    }

    #[test]
    fn cap_and_determinism() {
        let mut v = vec![vec![true, false]];
        v.extend((0..10).map(|_| vec![true, false]));
        let y = LabelMatrix::from_rows(&v).unwrap();
        let a = known_positive_rows(&y, 0, 3, Seed(5));
        assert_eq!(a.len(), 3);
        assert!(!a.contains(&0));
        assert_eq!(a, known_positive_rows(&y, 0, 3, Seed(5)));
    }

    #[test]
    fn self_is_never_known_positive() {
        let y = rows(&[&[true], &[true], &[true]]);
        for r in 0..3 {
            assert!(!known_positive_rows(&y, r, 10, Seed(1)).contains(&r));
        }
    }

    #[test]
    fn min_distance_and_count_similar() {
        let pool: Vec<Vec<f64>> = vec![vec![5.0], vec![1.0], vec![-1.0]];
        assert_eq!(min_distance(&[0.0], &pool).unwrap(), 1.0);
        assert!(matches!(min_distance::<f64, Vec<f64>>(&[0.0], &[]), Err(Error::EmptyPool)));
        assert_eq!(count_similar(&[0.0], &pool, 1.0), 2);
        assert_eq!(count_similar(&[5.0], &pool, 0.0), 1);
        assert_eq!(count_similar(&[4.0], &pool, 0.0), 0);
    }

    #[test]
    fn count_similar_matches_brute_force() {
        let mut rng = Seed(8).rng();
        for _ in 0..50 {
            let pool: Vec<f64> = (0..30).map(|_| rng.random_range(-3.0..3.0)).collect();
            let f: f64 = rng.random_range(-3.0..3.0);
            let delta: f64 = rng.random_range(0.0..2.0);
            let expected = pool.iter().filter(|p| (f - **p).abs() <= delta).count();
            let wrapped: Vec<[f64; 1]> = pool.iter().map(|&p| [p]).collect();
            assert_eq!(count_similar(&[f], &wrapped, delta), expected);
        }
    }

    #[test]
    fn hand_evaluated_keep_and_drop() {
        // image a: f=0; positive image b at 0.1; negative image c at 1.0
        let ds = one_d(&[
            ("a", &[0.0], &[true, false]),
            ("b", &[0.1], &[true, false]),
            ("c", &[1.0], &[false, true]),
        ]);
        let params = FilterParams::default();
        assert_eq!(filter_image(0, &ds, &params).kept, vec![0]);

        let ds = one_d(&[
            ("a", &[0.0], &[true, false]),
            ("b", &[5.0], &[true, false]),
            ("c", &[1.0], &[false, true]),
        ]);
        assert!(filter_image(0, &ds, &params).kept.is_empty());
    }

    #[test]
    fn degenerate_known_sets_keep_everything() {
        // no negatives
        let ds = one_d(&[("a", &[0.0, 3.0], &[true]), ("b", &[100.0], &[true])]);
        let r = filter_image(0, &ds, &FilterParams::default());
        assert_eq!(r.kept, vec![0, 1]);
        assert!(r.warning.is_none());
        // no positives
        let ds = one_d(&[("a", &[0.0, 3.0], &[true, false]), ("b", &[0.0], &[false, true])]);
        let r = filter_image(0, &ds, &FilterParams::default());
        assert_eq!(r.kept, vec![0, 1]);
        assert!(r.warning.is_some());
    }

    #[test]
    fn huge_alpha_keeps_all() {
        let mut rng = Seed(2).rng();
        let images: Vec<(String, Vec<f64>, Vec<bool>)> = (0..8)
            .map(|i| {
                (
                    format!("i{i}"),
                    (0..10).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    vec![i % 2 == 0, i % 2 == 1],
                )
            })
            .collect();
        let refs: Vec<(&str, &[f64], &[bool])> = images
            .iter()
            .map(|(a, b, c)| (a.as_str(), b.as_slice(), c.as_slice()))
            .collect();
        let ds = one_d(&refs);
        let out = filter_dataset(
            &ds,
            &FilterParams {
                alpha: 1e9,
                ..FilterParams::default()
            },
        )
        .unwrap();
        assert!(out.report.iter().all(|r| r.kept_features == r.total_features));
    }

    #[test]
    fn params_validation() {
        let bad = FilterParams {
            alpha: 0.0,
            ..FilterParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = FilterParams {
            max_files: 0,
            ..FilterParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn report_csv() {
        let mut out = Vec::new();
        write_filter_report(
            &mut out,
            &[FilterReportRow {
                image_id: "x".into(),
                total_features: 4,
                kept_features: 2,
                kp_size: 1,
                kn_size: 3,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "image_id,total_features,kept_features,kp_size,kn_size\nx,4,2,1,3\n"
        );
    }
}
