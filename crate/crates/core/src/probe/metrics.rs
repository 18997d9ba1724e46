use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LinearProbe, ProbeDataset, ProbeTask};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: ProbeTask,
    pub examples: usize,
    pub accuracy: f64,
    /// F1 of the positive class (binary task only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binary_f1: Option<f64>,
    /// One-vs-rest F1 per class (multiclass only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_class_f1: Option<Vec<f64>>,
    /// F1 from true/false positive and false negative counts pooled over classes
    /// (multiclass only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub micro_f1: Option<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// `2PR / (P + R)`, or 0 when precision and recall are both zero or undefined.
pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn evaluate<S: Scalar>(probe: &LinearProbe<S>, test: &ProbeDataset<S>) -> Result<MetricsReport> {
    let task = probe.task();
    test.check_for(task, probe.dim(), "evaluate")?;
    let classes = task.classes();
    let predictions: Vec<usize> = (0..test.len())
        .into_par_iter()
        .map(|i| probe.predict(test.inputs().row(i)))
        .collect();
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&y, &p) in test.labels().iter().zip(&predictions) {
        confusion[y][p] += 1;
    }
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let counts = |c: usize| {
        let tp = confusion[c][c];
        let fp = (0..classes).map(|r| confusion[r][c]).sum::<usize>() - tp;
        let fn_ = confusion[c].iter().sum::<usize>() - tp;
        (tp, fp, fn_)
    };
    let (binary_f1, per_class_f1, micro_f1) = match task {
        ProbeTask::Binary => {
            let (tp, fp, fn_) = counts(1);
            (Some(f1_from_counts(tp, fp, fn_)), None, None)
        }
        ProbeTask::Multiclass { .. } => {
            let per: Vec<f64> = (0..classes)
                .map(|c| {
                    let (tp, fp, fn_) = counts(c);
                    f1_from_counts(tp, fp, fn_)
                })
                .collect();
            let (tp, fp, fn_) = (0..classes)
                .map(counts)
                .fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
            (None, Some(per), Some(f1_from_counts(tp, fp, fn_)))
        }
    };
    Ok(MetricsReport {
        task,
        examples: test.len(),
        accuracy: correct as f64 / test.len() as f64,
        binary_f1,
        per_class_f1,
        micro_f1,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Matrix;

    #[test]
    fn hand_counts() {
        let f1 = f1_from_counts(3, 1, 2);
        assert!((f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-12);
        assert!((f1 - 0.6667).abs() < 1e-4);
        assert_eq!(f1_from_counts(0, 0, 4), 0.0);
        assert_eq!(f1_from_counts(0, 0, 0), 0.0);
    }

    #[test]
    fn perfect_and_degenerate_predictors() {
        let x = Matrix::from_vec(4, 1, vec![-2.0f64, -1.0, 1.0, 2.0]).unwrap();
        let d = ProbeDataset::new(x, vec![0, 0, 1, 1]).unwrap();
        let perfect = LinearProbe::new(ProbeTask::Binary, Matrix::from_vec(1, 1, vec![1.0]).unwrap(), vec![0.0]).unwrap();
        let m = evaluate(&perfect, &d).unwrap();
        assert_eq!((m.accuracy, m.binary_f1), (1.0, Some(1.0)));
        let negative = LinearProbe::new(ProbeTask::Binary, Matrix::from_vec(1, 1, vec![0.0]).unwrap(), vec![-1.0]).unwrap();
        let m = evaluate(&negative, &d).unwrap();
        assert_eq!((m.accuracy, m.binary_f1), (0.5, Some(0.0)));
    }

    #[test]
    fn multiclass_report() {
        let x = Matrix::from_vec(3, 3, vec![1.0f64, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let d = ProbeDataset::new(x.clone(), vec![0, 1, 2]).unwrap();
        let task = ProbeTask::Multiclass { classes: 3 };
        let probe = LinearProbe::new(task, x, vec![0.0; 3]).unwrap();
        let m = evaluate(&probe, &d).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.per_class_f1, Some(vec![1.0; 3]));
        assert_eq!(m.micro_f1, Some(1.0));
    }
}
