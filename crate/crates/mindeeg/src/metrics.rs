//! Classification metrics and their aggregation across split plans.

/// Per-run metrics on one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// `confusion[true][pred]`.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub total: usize,
}

impl MetricsReport {
    pub fn from_predictions(truth: &[usize], pred: &[usize], classes: usize) -> MetricsReport {
        assert_eq!(truth.len(), pred.len());
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(pred) {
            confusion[t][p] += 1;
        }
        let total = truth.len();
        let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
        let accuracy = if total > 0 {
            correct as f64 / total as f64
        } else {
            0.0
        };
        // macro F1 with 0 for classes where F1 is undefined
        let mut f1_sum = 0.0;
        for c in 0..classes {
            let tp = confusion[c][c] as f64;
            let fp: f64 = (0..classes).filter(|&t| t != c).map(|t| confusion[t][c] as f64).sum();
            let fn_: f64 = (0..classes).filter(|&p| p != c).map(|p| confusion[c][p] as f64).sum();
            let denom = 2.0 * tp + fp + fn_;
            if denom > 0.0 {
                f1_sum += 2.0 * tp / denom;
            }
        }
        MetricsReport {
            confusion,
            accuracy,
            macro_f1: f1_sum / classes as f64,
            total,
        }
    }
}

/// Mean and population standard deviation of per-plan accuracies.
pub fn aggregate_accuracy(reports: &[MetricsReport]) -> (f64, f64) {
    assert!(!reports.is_empty());
    let accs: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / accs.len() as f64;
    (mean, var.sqrt())
}

/// `xx.xx±yy.yy` in percent.
pub fn format_acc_std(mean: f64, std: f64) -> String {
    format!("{:.2}\u{00b1}{:.2}", 100.0 * mean, 100.0 * std)
}
