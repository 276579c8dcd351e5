//! Accuracy, confusion matrix and the key-value report.

use std::fmt::Write as _;

use crate::classifier::{ClassifierModel, Prediction};
use crate::datasets::{epsilon_interior, ShapeSpec};
use crate::error::{Error, Result};
use crate::moments::LabeledDataset;

#[derive(Clone, Debug, PartialEq)]
pub struct InteriorAccuracy {
    pub epsilon: f64,
    pub samples: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub samples: usize,
    pub accuracy: f64,
    /// `NaN` for classes absent from the test set.
    pub class_accuracy: Vec<f64>,
    /// Rows are true labels, columns predictions; rejects are counted apart.
    pub confusion: Vec<Vec<usize>>,
    pub rejected: Vec<usize>,
    pub interior: Option<InteriorAccuracy>,
    pub runtime_seconds: Option<f64>,
}

fn predict_all(model: &ClassifierModel, data: &LabeledDataset) -> Result<Vec<Prediction>> {
    use rayon::prelude::*;
    (0..data.len()).into_par_iter().map(|i| model.classify(data.point(i))).collect()
}

pub fn evaluate(
    model: &ClassifierModel,
    data: &LabeledDataset,
    shapes: Option<(&[ShapeSpec], f64)>,
) -> Result<MetricsReport> {
    if data.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    if data.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: data.dim() });
    }
    let m = model.classes();
    if let Some(i) = (0..data.len()).find(|&i| data.label(i) > m) {
        return Err(Error::LabelOutOfRange { label: data.label(i), classes: m, index: i });
    }
    let preds = predict_all(model, data)?;
    let mut confusion = vec![vec![0; m]; m];
    let mut rejected = vec![0; m];
    for (p, &l) in preds.iter().zip(data.labels()) {
        match p {
            Prediction::Class(j) => confusion[l - 1][j - 1] += 1,
            Prediction::Reject => rejected[l - 1] += 1,
        }
    }
    let correct: usize = (0..m).map(|j| confusion[j][j]).sum();
    let class_accuracy = (0..m)
        .map(|j| {
            let total = confusion[j].iter().sum::<usize>() + rejected[j];
            if total == 0 {
                f64::NAN
            } else {
                confusion[j][j] as f64 / total as f64
            }
        })
        .collect();
    let interior = match shapes {
        None => None,
        Some((specs, epsilon)) => {
            let kept = epsilon_interior(data, specs, epsilon)?;
            let hits = kept.iter().filter(|&&i| preds[i] == Prediction::Class(data.label(i))).count();
            Some(InteriorAccuracy {
                epsilon,
                samples: kept.len(),
                accuracy: if kept.is_empty() { f64::NAN } else { hits as f64 / kept.len() as f64 },
            })
        }
    };
    Ok(MetricsReport {
        samples: data.len(),
        accuracy: correct as f64 / data.len() as f64,
        class_accuracy,
        confusion,
        rejected,
        interior,
        runtime_seconds: None,
    })
}

impl MetricsReport {
    /// `key = value` lines; confusion rows are comma separated.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = self.confusion.len();
        writeln!(s, "samples = {}", self.samples).unwrap();
        writeln!(s, "classes = {m}").unwrap();
        writeln!(s, "accuracy = {}", self.accuracy).unwrap();
        for (j, a) in self.class_accuracy.iter().enumerate() {
            writeln!(s, "class_accuracy.{} = {a}", j + 1).unwrap();
        }
        for (j, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            writeln!(s, "confusion.{} = {}", j + 1, cells.join(",")).unwrap();
        }
        writeln!(s, "rejected = {}", self.rejected.iter().sum::<usize>()).unwrap();
        if let Some(int) = &self.interior {
            writeln!(s, "interior_epsilon = {}", int.epsilon).unwrap();
            writeln!(s, "interior_samples = {}", int.samples).unwrap();
            writeln!(s, "interior_accuracy = {}", int.accuracy).unwrap();
        }
        if let Some(r) = self.runtime_seconds {
            writeln!(s, "runtime_seconds = {r:.6}").unwrap();
        }
        s
    }
}
