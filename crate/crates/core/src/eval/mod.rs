//! Classification benchmark: split protocols, the two classifiers, metrics
//! and curve aggregation.

mod cluster;
mod linear;
mod metrics;
mod split;

pub use cluster::{cluster_classifier_fit, cluster_classifier_predict, ClusterModel};
pub use linear::{linear_ovr_fit, linear_ovr_predict, LinearModel, LinearParams};
pub use metrics::{aggregate_over_nc, compute_metrics, roc_points, ClassMetrics, MetricsReport, RocPoint};
pub use split::{class_of_images, make_split, Protocol, Split, SplitSpec};

use crate::error::{Error, Result};

/// Sweep settings for the clustering classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Cluster counts, ascending.
    pub nc_values: Vec<usize>,
    /// Clustering runs (different k-means seeds) averaged per `nc`.
    pub clustering_repeats: usize,
    /// Vocabulary constructions averaged per cell.
    pub construction_repeats: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            nc_values: (1..=20).map(|i| i * 50).collect(),
            clustering_repeats: 25,
            construction_repeats: 3,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nc_values.is_empty() {
            return Err(Error::InvalidConfig("nc_values must not be empty".into()));
        }
        if self.nc_values.contains(&0) || self.nc_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("nc_values must be positive and strictly ascending".into()));
        }
        if self.clustering_repeats == 0 || self.construction_repeats == 0 {
            return Err(Error::InvalidConfig("repeat counts must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_config_validation() {
        assert!(EvalConfig::default().validate().is_ok());
        assert_eq!(EvalConfig::default().nc_values.len(), 20);
        for bad in [vec![], vec![10, 5], vec![0, 5], vec![5, 5]] {
            let cfg = EvalConfig { nc_values: bad, ..EvalConfig::default() };
            assert!(cfg.validate().is_err());
        }
    }
}
