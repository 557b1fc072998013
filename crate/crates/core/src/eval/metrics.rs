use crate::dataset::LabelVocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub name: String,
    /// Test images whose true class is this one.
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Classes that occur in the test truth, in label order.
    pub classes: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f: f64,
    pub macro_tpr: f64,
    pub macro_fpr: f64,
    /// `confusion[t][p]` counts images of class `t` predicted as `p`.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Per-class and macro-averaged scores. Undefined ratios count as 0.
pub fn compute_metrics(truth: &[usize], predicted: &[usize], labels: &LabelVocabulary) -> Result<MetricsReport> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidDataset("no test predictions to score".into()));
    }
    let k = labels.len();
    if let Some(&c) = truth.iter().chain(predicted).find(|&&c| c >= k) {
        return Err(Error::InvalidConfig(format!("class {c} out of range for {k} labels")));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[t][p] += 1;
    }
    let n = truth.len();
    let classes: Vec<ClassMetrics> = (0..k)
        .filter_map(|c| {
            let support: usize = confusion[c].iter().sum();
            if support == 0 {
                return None;
            }
            let tp = confusion[c][c];
            let predicted_c: usize = (0..k).map(|t| confusion[t][c]).sum();
            let fp = predicted_c - tp;
            let negatives = n - support;
            let precision = ratio(tp, predicted_c);
            let recall = ratio(tp, support);
            let f_measure = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            Some(ClassMetrics {
                name: labels.name(c).to_string(),
                support,
                precision,
                recall,
                f_measure,
                tpr: recall,
                fpr: ratio(fp, negatives),
            })
        })
        .collect();
    Ok(MetricsReport {
        macro_precision: mean(classes.iter().map(|c| c.precision)),
        macro_recall: mean(classes.iter().map(|c| c.recall)),
        macro_f: mean(classes.iter().map(|c| c.f_measure)),
        macro_tpr: mean(classes.iter().map(|c| c.tpr)),
        macro_fpr: mean(classes.iter().map(|c| c.fpr)),
        classes,
        confusion,
    })
}

impl MetricsReport {
    /// Element-wise mean of reports over the same test set; confusion counts
    /// are summed.
    pub fn mean_of(reports: &[MetricsReport]) -> Result<MetricsReport> {
        let first = reports
            .first()
            .ok_or_else(|| Error::InvalidConfig("cannot average zero reports".into()))?;
        let same_shape = reports.iter().all(|r| {
            r.classes.len() == first.classes.len()
                && r.classes.iter().zip(&first.classes).all(|(a, b)| a.name == b.name)
                && r.confusion.len() == first.confusion.len()
        });
        if !same_shape {
            return Err(Error::InvalidConfig("reports cover different classes".into()));
        }
        let avg = |f: &dyn Fn(&MetricsReport) -> f64| mean(reports.iter().map(f));
        let classes = (0..first.classes.len())
            .map(|i| {
                let cavg = |f: &dyn Fn(&ClassMetrics) -> f64| mean(reports.iter().map(|r| f(&r.classes[i])));
                ClassMetrics {
                    name: first.classes[i].name.clone(),
                    support: first.classes[i].support,
                    precision: cavg(&|c| c.precision),
                    recall: cavg(&|c| c.recall),
                    f_measure: cavg(&|c| c.f_measure),
                    tpr: cavg(&|c| c.tpr),
                    fpr: cavg(&|c| c.fpr),
                }
            })
            .collect();
        let k = first.confusion.len();
        let mut confusion = vec![vec![0usize; k]; k];
        for r in reports {
            for (row, src) in confusion.iter_mut().zip(&r.confusion) {
                for (a, b) in row.iter_mut().zip(src) {
                    *a += b;
                }
            }
        }
        Ok(MetricsReport {
            classes,
            macro_precision: avg(&|r| r.macro_precision),
            macro_recall: avg(&|r| r.macro_recall),
            macro_f: avg(&|r| r.macro_f),
            macro_tpr: avg(&|r| r.macro_tpr),
            macro_fpr: avg(&|r| r.macro_fpr),
            confusion,
        })
    }
}

/// Mean of a per-`nc` score curve.
pub fn aggregate_over_nc(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidConfig("no scores to aggregate".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub vocab_size: usize,
    pub fpr: f64,
    pub tpr: f64,
    /// Marks the smallest vocabulary of the sweep.
    pub smallest: bool,
}

/// One (macro FPR, macro TPR) point per vocabulary size, ascending by size.
pub fn roc_points(per_size: &[(usize, &MetricsReport)]) -> Vec<RocPoint> {
    let mut points: Vec<RocPoint> = per_size
        .iter()
        .map(|&(m, r)| RocPoint {
            vocab_size: m,
            fpr: r.macro_fpr,
            tpr: r.macro_tpr,
            smallest: false,
        })
        .collect();
    points.sort_by_key(|p| p.vocab_size);
    if let Some(p) = points.first_mut() {
        p.smallest = true;
    }
    points
}
