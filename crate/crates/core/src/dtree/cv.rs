use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{predict, train, FeatureVector, TreeError, TreeParams};
use crate::corpus::Label;
use crate::metrics::{classification_metrics, confusion, ConfusionMatrix, Metric, MetricsReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub test_complex: usize,
    pub test_not_complex: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

/// Per-metric aggregate over the folds where the metric is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
    pub cohen_kappa: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    /// Fold index of each sample, in input order.
    pub assignments: Vec<usize>,
    pub folds: Vec<FoldReport>,
    pub mean: MetricSummary,
    /// Population standard deviation.
    pub std_dev: MetricSummary,
}

/// Seeded shuffle within each class, then round-robin over folds. The
/// round-robin position carries over from Complex to NotComplex so fold
/// sizes stay within one of each other.
pub fn fold_assignments(targets: &[Label], k: usize, seed: u64) -> Result<Vec<usize>, TreeError> {
    if k < 2 {
        return Err(TreeError::InvalidFolds(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; targets.len()];
    let mut next = 0;
    for label in [Label::Complex, Label::NotComplex] {
        let mut members: Vec<usize> = (0..targets.len()).filter(|&i| targets[i] == label).collect();
        if members.len() < k {
            return Err(TreeError::TooFewInClass { label, count: members.len(), k });
        }
        members.shuffle(&mut rng);
        for i in members {
            out[i] = next % k;
            next += 1;
        }
    }
    Ok(out)
}

fn summarize(folds: &[FoldReport]) -> (MetricSummary, MetricSummary) {
    let stat = |pick: fn(&MetricsReport) -> Metric| {
        let xs: Vec<f64> = folds.iter().filter_map(|f| pick(&f.metrics).value()).collect();
        if xs.is_empty() {
            return (Metric(None), Metric(None));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (Metric(Some(mean)), Metric(Some(var.sqrt())))
    };
    let p = stat(|m| m.precision);
    let r = stat(|m| m.recall);
    let f = stat(|m| m.f1);
    let k = stat(|m| m.cohen_kappa);
    (
        MetricSummary { precision: p.0, recall: r.0, f1: f.0, cohen_kappa: k.0 },
        MetricSummary { precision: p.1, recall: r.1, f1: f.1, cohen_kappa: k.1 },
    )
}

/// Stratified k-fold cross-validation of [`train`].
pub fn stratified_cv(
    features: &[FeatureVector],
    targets: &[Label],
    k: usize,
    params: TreeParams,
    seed: u64,
) -> Result<CvReport, TreeError> {
    if features.len() != targets.len() {
        return Err(TreeError::LengthMismatch { features: features.len(), targets: targets.len() });
    }
    if features.is_empty() {
        return Err(TreeError::Empty);
    }
    let assignments = fold_assignments(targets, k, seed)?;
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let (test, train_idx): (Vec<usize>, Vec<usize>) =
            (0..targets.len()).partition(|&i| assignments[i] == fold);
        let train_x: Vec<FeatureVector> = train_idx.iter().map(|&i| features[i]).collect();
        let train_y: Vec<Label> = train_idx.iter().map(|&i| targets[i]).collect();
        let tree = train(&train_x, &train_y, params)?;
        let truth: Vec<Label> = test.iter().map(|&i| targets[i]).collect();
        let pred: Vec<Label> = test.iter().map(|&i| predict(&tree, &features[i])).collect();
        let cm = confusion(&truth, &pred).expect("equal lengths");
        let metrics = classification_metrics(&cm).expect("every fold holds at least one sample per class");
        let test_complex = truth.iter().filter(|l| l.is_complex()).count();
        folds.push(FoldReport {
            fold,
            train_size: train_idx.len(),
            test_size: test.len(),
            test_complex,
            test_not_complex: test.len() - test_complex,
            confusion: cm,
            metrics,
        });
    }
    let (mean, std_dev) = summarize(&folds);
    Ok(CvReport { k, seed, assignments, folds, mean, std_dev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::QUESTION_COUNT;

    fn labels(complex: usize, not_complex: usize) -> Vec<Label> {
        let mut v = vec![Label::Complex; complex];
        v.extend(vec![Label::NotComplex; not_complex]);
        v
    }

    #[test]
    fn thirty_seventy_gives_six_fourteen() {
        let y = labels(30, 70);
        let a = fold_assignments(&y, 5, 11).unwrap();
        for fold in 0..5 {
            let c = (0..100).filter(|&i| a[i] == fold && y[i].is_complex()).count();
            let n = (0..100).filter(|&i| a[i] == fold && !y[i].is_complex()).count();
            assert_eq!((c, n), (6, 14));
        }
        assert_eq!(a, fold_assignments(&y, 5, 11).unwrap());
        assert_ne!(a, fold_assignments(&y, 5, 12).unwrap());
    }

    #[test]
    fn errors() {
        let y = labels(4, 10);
        assert_eq!(
            fold_assignments(&y, 5, 0).unwrap_err(),
            TreeError::TooFewInClass { label: Label::Complex, count: 4, k: 5 }
        );
        assert_eq!(fold_assignments(&y, 1, 0).unwrap_err(), TreeError::InvalidFolds(1));
    }

    #[test]
    fn cv_on_separable_data() {
        let y = labels(10, 15);
        let x: Vec<FeatureVector> = y
            .iter()
            .map(|l| {
                let mut v = [0.0; QUESTION_COUNT];
                v[6] = if l.is_complex() { 0.0 } else { 1.0 };
                FeatureVector(v)
            })
            .collect();
        let params = TreeParams { min_samples_leaf: 1, ..TreeParams::default() };
        let r = stratified_cv(&x, &y, 5, params, 3).unwrap();
        assert_eq!(r.folds.len(), 5);
        assert_eq!(r.folds.iter().map(|f| f.test_size).sum::<usize>(), 25);
        assert_eq!(r.mean.f1, Metric(Some(1.0)));
        assert_eq!(r.std_dev.cohen_kappa, Metric(Some(0.0)));
    }
}
