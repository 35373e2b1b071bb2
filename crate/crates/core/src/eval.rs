//! Confusion matrices, one-vs-rest metrics and the cross-validation driver.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::Classifier;
use crate::data::{stratified_folds, Dataset};
use crate::discretize::{fit_discretizer, fit_discretizer_on};
use crate::error::{Error, Result};
use crate::experiment::{DiscretizationMode, ModelConfig};
use crate::select::run_selection;
use crate::table::DiscreteTable;

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(labels: Vec<String>) -> Self {
        let k = labels.len();
        Self {
            labels,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_indices(labels: Vec<String>, truths: &[usize], preds: &[usize]) -> Result<Self> {
        if truths.len() != preds.len() {
            return Err(Error::invalid("truths and predictions differ in length"));
        }
        let mut m = Self::zeros(labels);
        let k = m.labels.len();
        for (&t, &p) in truths.iter().zip(preds) {
            if t >= k || p >= k {
                return Err(Error::invalid(format!("class index outside label set of size {k}")));
            }
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }
}

pub fn confusion<S: AsRef<str>>(truths: &[S], preds: &[S], label_set: &[String]) -> Result<ConfusionMatrix> {
    let index = |l: &S| {
        label_set
            .iter()
            .position(|x| x == l.as_ref())
            .ok_or_else(|| Error::UnknownLabel(l.as_ref().to_string()))
    };
    let t = truths.iter().map(index).collect::<Result<Vec<_>>>()?;
    let p = preds.iter().map(index).collect::<Result<Vec<_>>>()?;
    ConfusionMatrix::from_indices(label_set.to_vec(), &t, &p)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub support: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub fpr: f64,
}

/// One-vs-rest counts and rates for every class. Zero denominators yield 0.
pub fn per_class_metrics(m: &ConfusionMatrix) -> Vec<ClassMetrics> {
    let total = m.total();
    let k = m.labels.len();
    (0..k)
        .map(|c| {
            let tp = m.counts[c][c];
            let row: u64 = m.counts[c].iter().sum();
            let col: u64 = (0..k).map(|r| m.counts[r][c]).sum();
            let fp = col - tp;
            let fn_ = row - tp;
            let tn = total - tp - fp - fn_;
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            let f_measure = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label: m.labels[c].clone(),
                support: row,
                tp,
                fp,
                fn_,
                tn,
                precision,
                recall,
                f_measure,
                fpr: ratio(fp, fp + tn),
            }
        })
        .collect()
}

/// Support-weighted mean.
pub fn weighted_mean(values: &[f64], supports: &[u64]) -> Result<f64> {
    if values.len() != supports.len() {
        return Err(Error::invalid("values and supports differ in length"));
    }
    let total: u64 = supports.iter().sum();
    if total == 0 {
        return Err(Error::invalid("supports sum to zero"));
    }
    Ok(values.iter().zip(supports).map(|(v, &s)| v * s as f64).sum::<f64>() / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub fpr: f64,
}

pub fn aggregate(per_class: &[ClassMetrics]) -> Result<WeightedMetrics> {
    let supports: Vec<u64> = per_class.iter().map(|c| c.support).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        let values: Vec<f64> = per_class.iter().map(f).collect();
        weighted_mean(&values, &supports)
    };
    Ok(WeightedMetrics {
        precision: mean(|c| c.precision)?,
        recall: mean(|c| c.recall)?,
        f_measure: mean(|c| c.f_measure)?,
        fpr: mean(|c| c.fpr)?,
    })
}

/// Everything needed to rerun an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDescriptor {
    pub granularity: crate::data::Granularity,
    pub records: usize,
    pub model: ModelConfig,
    pub k: usize,
    pub seed: u64,
    /// One global feature list in leaky mode, one per fold otherwise.
    pub feature_sets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub descriptor: PipelineDescriptor,
    pub matrix: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub weighted: WeightedMetrics,
    pub accuracy: f64,
}

impl EvaluationReport {
    pub fn from_matrix(descriptor: PipelineDescriptor, matrix: ConfusionMatrix) -> Result<Self> {
        let per_class = per_class_metrics(&matrix);
        let weighted = aggregate(&per_class)?;
        Ok(Self {
            descriptor,
            accuracy: matrix.accuracy(),
            matrix,
            per_class,
            weighted,
        })
    }

    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == label)
    }

    /// Plain-text per-class table followed by the weighted summary.
    pub fn render(&self) -> String {
        let d = &self.descriptor;
        let mut out = String::new();
        let features: Vec<String> = d
            .feature_sets
            .iter()
            .map(|s| s.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
            .collect();
        let _ = writeln!(out, "method        {}", d.model.describe());
        let _ = writeln!(
            out,
            "evaluation    {}-fold stratified CV, seed {}, {} records, {}",
            d.k,
            d.seed,
            d.records,
            d.granularity.name()
        );
        for (i, f) in features.iter().enumerate() {
            let tag = if features.len() == 1 {
                "features".to_string()
            } else {
                format!("fold {i}")
            };
            let _ = writeln!(out, "{tag:<13} {f}");
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>9} {:>7} {:>9} {:>7}",
            "class", "support", "precision", "recall", "F-measure", "FPR"
        );
        for c in &self.per_class {
            let _ = writeln!(
                out,
                "{:<16} {:>8} {:>9.3} {:>7.3} {:>9.3} {:>7.3}",
                c.label, c.support, c.precision, c.recall, c.f_measure, c.fpr
            );
        }
        let w = &self.weighted;
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>9.3} {:>7.3} {:>9.3} {:>7.3}",
            "weighted",
            self.matrix.total(),
            w.precision,
            w.recall,
            w.f_measure,
            w.fpr
        );
        let _ = writeln!(out, "accuracy      {:.4}", self.accuracy);
        out
    }
}

struct FoldOutcome {
    test: Vec<usize>,
    preds: Vec<usize>,
    features: Vec<usize>,
}

fn fit_and_predict(
    table: &DiscreteTable,
    train: &[usize],
    test: &[usize],
    model: &ModelConfig,
    preselected: Option<&[usize]>,
) -> Result<FoldOutcome> {
    let train_table = table.select_rows(train);
    let features = match preselected {
        Some(f) => f.to_vec(),
        None => run_selection(&train_table, model.selection.method, model.selection.alpha)?.features,
    };
    let mut sorted = features.clone();
    sorted.sort_unstable();
    let classifier = Classifier::train(
        &train_table.select_features(&sorted)?,
        model.classifier.boost,
        model.classifier.rounds,
    )?;
    let test_table = table.select_rows(test).select_features(&sorted)?;
    Ok(FoldOutcome {
        test: test.to_vec(),
        preds: classifier.predict_table(&test_table)?,
        features,
    })
}

/// k-fold stratified cross-validation with pooled predictions.
///
/// In leaky mode discretization and selection are fit once on the whole
/// dataset; otherwise both are refit on every training split.
pub fn cross_validate(ds: &Dataset, model: &ModelConfig, k: usize, seed: u64) -> Result<EvaluationReport> {
    model.validate()?;
    let plan = stratified_folds(ds, k, seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k).map(|f| (plan.train_indices(f), plan.test_indices(f))).collect();

    let (outcomes, feature_sets) = match model.discretization {
        DiscretizationMode::Leaky => {
            let disc = fit_discretizer(ds);
            let table = DiscreteTable::encode(ds, Some(&disc))?;
            let features = run_selection(&table, model.selection.method, model.selection.alpha)?.features;
            let outcomes = splits
                .par_iter()
                .map(|(train, test)| fit_and_predict(&table, train, test, model, Some(&features)))
                .collect::<Result<Vec<_>>>()?;
            (outcomes, vec![features])
        }
        DiscretizationMode::FoldSafe => {
            let outcomes = splits
                .par_iter()
                .map(|(train, test)| {
                    let disc = fit_discretizer_on(ds, train);
                    let table = DiscreteTable::encode(ds, Some(&disc))?;
                    fit_and_predict(&table, train, test, model, None)
                })
                .collect::<Result<Vec<_>>>()?;
            let sets = outcomes.iter().map(|o| o.features.clone()).collect();
            (outcomes, sets)
        }
    };

    let labels = ds.label_set();
    let class_of: std::collections::HashMap<&str, usize> =
        labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let truths: Vec<usize> = ds.records().iter().map(|r| class_of[r.label.as_str()]).collect();
    let mut preds = vec![usize::MAX; ds.len()];
    for o in &outcomes {
        for (&i, &p) in o.test.iter().zip(&o.preds) {
            preds[i] = p;
        }
    }
    if preds.contains(&usize::MAX) {
        return Err(Error::invalid("fold plan left a record without a prediction"));
    }
    let matrix = ConfusionMatrix::from_indices(labels, &truths, &preds)?;
    let descriptor = PipelineDescriptor {
        granularity: ds.granularity(),
        records: ds.len(),
        model: *model,
        k,
        seed,
        feature_sets,
    };
    EvaluationReport::from_matrix(descriptor, matrix)
}
