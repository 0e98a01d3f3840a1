use serde::{Deserialize, Serialize};

use super::gemm::Scalar;
use super::{NetError, Network};

/// Test-split metrics. Rows of `confusion` are true classes, columns
/// predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Mean recall over classes with support.
    pub macro_recall: f64,
    /// Mean F1 over classes with support.
    pub macro_f1: f64,
    pub per_class_recall: Vec<Option<f64>>,
    pub per_class_f1: Vec<Option<f64>>,
    /// Classes absent from the truth labels, left out of the macro means.
    pub unsupported: Vec<usize>,
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub fn from_predictions(n_classes: usize, truth: &[usize], predicted: &[usize]) -> Self {
        assert_eq!(truth.len(), predicted.len(), "one prediction per label");
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[*t][*p] += 1;
        }
        let total = truth.len();
        let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();

        let mut per_class_recall = vec![None; n_classes];
        let mut per_class_f1 = vec![None; n_classes];
        let mut unsupported = Vec::new();
        for c in 0..n_classes {
            let support: usize = confusion[c].iter().sum();
            if support == 0 {
                unsupported.push(c);
                continue;
            }
            let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
            let tp = confusion[c][c] as f64;
            let recall = tp / support as f64;
            let precision = if predicted_c == 0 { 0.0 } else { tp / predicted_c as f64 };
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            per_class_recall[c] = Some(recall);
            per_class_f1[c] = Some(f1);
        }
        let mean = |v: &[Option<f64>]| {
            let xs: Vec<f64> = v.iter().flatten().copied().collect();
            if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 }
        };
        Self {
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            macro_recall: mean(&per_class_recall),
            macro_f1: mean(&per_class_f1),
            per_class_recall,
            per_class_f1,
            unsupported,
            confusion,
        }
    }

    /// Plain-text table with the headline metrics.
    pub fn render(&self, names: &[&str]) -> String {
        let mut s = format!(
            "accuracy {:.4}  macro recall {:.4}  macro F1 {:.4}\n",
            self.accuracy, self.macro_recall, self.macro_f1
        );
        let labels: Vec<String> = (0..self.confusion.len())
            .map(|i| format!("{i} {}", names.get(i).copied().unwrap_or("?")))
            .collect();
        let width = labels.iter().map(String::len).max().unwrap_or(0).max("true\\pred".len());
        s += &format!("{:>width$} |", "true\\pred");
        for j in 0..self.confusion.len() {
            s += &format!(" {j:>4}");
        }
        s += "\n";
        for (label, row) in labels.iter().zip(&self.confusion) {
            s += &format!("{label:>width$} |");
            for v in row {
                s += &format!(" {v:>4}");
            }
            s += "\n";
        }
        if !self.unsupported.is_empty() {
            s += &format!("no test samples for classes {:?}\n", self.unsupported);
        }
        s
    }
}

/// Eval-mode argmax over every input, then [`EvalReport::from_predictions`].
pub fn evaluate<T: Scalar>(net: &Network<T>, inputs: &[&[T]], labels: &[usize]) -> Result<EvalReport, NetError> {
    if inputs.is_empty() {
        return Err(NetError::EmptySplit("test"));
    }
    use rayon::prelude::*;
    let predicted = inputs.par_iter().map(|x| net.classify(x)).collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_predictions(net.architecture().n_classes, labels, &predicted))
}
