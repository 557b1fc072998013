use crate::clustering::{kmeans, KMeansParams};
use crate::dataset::FeatureVector;
use crate::distance::nearest_squared;
use crate::error::{Error, Result};
use crate::seed::Seed;

/// Centroids of a k-means run over the learn vectors, each tagged with the
/// majority class of its labeled members.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<FeatureVector<f64>>,
    pub cluster_labels: Vec<usize>,
    /// Majority class of the whole labeled subset; used for clusters that
    /// received no labeled member.
    pub fallback_label: usize,
}

fn majority(counts: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 && best.is_none_or(|(_, b)| n > b) {
            best = Some((c, n));
        }
    }
    best.map(|(c, _)| c)
}

/// Clusters all of `learn` into `nc` groups and labels each group by vote.
///
/// `labeled` pairs a position in `learn` with its class. When `nc` exceeds
/// the number of learn vectors it is reduced to that number.
pub fn cluster_classifier_fit<P>(
    learn: &[P],
    labeled: &[(usize, usize)],
    num_classes: usize,
    nc: usize,
    seed: Seed,
) -> Result<ClusterModel>
where
    P: AsRef<[f64]> + Sync,
{
    if labeled.is_empty() {
        return Err(Error::InvalidConfig("clustering classifier needs labeled vectors".into()));
    }
    if nc == 0 {
        return Err(Error::InvalidConfig("nc must be at least 1".into()));
    }
    if let Some(&(i, c)) = labeled.iter().find(|&&(i, c)| i >= learn.len() || c >= num_classes) {
        return Err(Error::InvalidConfig(format!("labeled entry ({i}, {c}) out of range")));
    }
    let k = nc.min(learn.len());
    if k < nc {
        log::debug!("nc = {nc} exceeds the {} learn vectors; using {k} clusters", learn.len());
    }
    if k < num_classes {
        log::warn!("nc = {k} is below the number of classes ({num_classes})");
    }
    let params = KMeansParams::default().with_seed(seed);
    let result = kmeans::<f64, P>(k, learn, &params)?;

    let mut votes = vec![vec![0usize; num_classes]; k];
    let mut global = vec![0usize; num_classes];
    for &(i, c) in labeled {
        votes[result.assignments[i]][c] += 1;
        global[c] += 1;
    }
    let fallback_label = majority(&global).expect("labeled is non-empty");
    let cluster_labels = votes.iter().map(|v| majority(v).unwrap_or(fallback_label)).collect();
    Ok(ClusterModel {
        centroids: result.centroids,
        cluster_labels,
        fallback_label,
    })
}

/// Class of the nearest centroid for each vector.
pub fn cluster_classifier_predict<P: AsRef<[f64]>>(model: &ClusterModel, vectors: &[P]) -> Result<Vec<usize>> {
    vectors
        .iter()
        .map(|v| nearest_squared(v.as_ref(), &model.centroids).map(|(j, _)| model.cluster_labels[j]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[[f64; 2]]) -> Vec<Vec<f64>> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn majority_prefers_lowest_index_on_ties() {
        assert_eq!(majority(&[2, 3, 3]), Some(1));
        assert_eq!(majority(&[0, 0]), None);
    }

    #[test]
    fn two_blobs_one_labeled_each() {
        let learn = pts(&[[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0], [5.1, 5.0], [5.0, 5.1]]);
        let model = cluster_classifier_fit(&learn, &[(0, 1), (4, 0)], 2, 2, Seed(3)).unwrap();
        let test = pts(&[[0.05, 0.05], [4.9, 5.2]]);
        assert_eq!(cluster_classifier_predict(&model, &test).unwrap(), vec![1, 0]);
    }

    #[test]
    fn unlabeled_cluster_takes_global_majority() {
        let learn = pts(&[[0.0, 0.0], [0.1, 0.0], [9.0, 9.0], [9.1, 9.0], [20.0, 0.0], [20.1, 0.0]]);
        // one cluster per point, so points 3..6 form clusters without labels
        let model = cluster_classifier_fit(&learn, &[(0, 0), (1, 0), (2, 1)], 2, 6, Seed(1)).unwrap();
        assert_eq!(model.fallback_label, 0);
        let query = pts(&[[9.0, 9.0], [9.1, 9.0], [20.0, 0.0]]);
        assert_eq!(cluster_classifier_predict(&model, &query).unwrap(), vec![1, 0, 0]);
    }

    #[test]
    fn nc_is_capped_by_learn_size() {
        let learn = pts(&[[0.0, 0.0], [1.0, 1.0]]);
        let model = cluster_classifier_fit(&learn, &[(0, 0), (1, 1)], 2, 50, Seed(0)).unwrap();
        assert_eq!(model.centroids.len(), 2);
    }

    #[test]
    fn invalid_inputs() {
        let learn = pts(&[[0.0, 0.0]]);
        assert!(cluster_classifier_fit(&learn, &[], 1, 1, Seed(0)).is_err());
        assert!(cluster_classifier_fit(&learn, &[(0, 0)], 1, 0, Seed(0)).is_err());
        assert!(cluster_classifier_fit(&learn, &[(3, 0)], 1, 1, Seed(0)).is_err());
        assert!(cluster_classifier_fit(&learn, &[(0, 2)], 1, 1, Seed(0)).is_err());
    }
}
