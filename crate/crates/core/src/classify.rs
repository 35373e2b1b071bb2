//! Weight-aware categorical naive Bayes and AdaBoost.M1 (reweighting) over it.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Record, Value};
use crate::error::{Error, Result};
use crate::table::DiscreteTable;

pub const DEFAULT_SMOOTHING: f64 = 1.0;
pub const DEFAULT_ROUNDS: usize = 10;

/// Error floor used for the vote weight of a perfect round.
pub const ERROR_FLOOR: f64 = 1e-10;

/// Vote weight of a first round whose error is already ≥ 0.5.
pub const MIN_VOTE_WEIGHT: f64 = f64::MIN_POSITIVE;

/// Laplace-smoothed class priors and per-feature conditional tables.
///
/// Each conditional distribution covers the feature's observed training
/// domain plus one trailing slot for values never seen in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub labels: Vec<String>,
    /// 1-based schema indices, in column order.
    pub features: Vec<usize>,
    pub smoothing: f64,
    pub priors: Vec<f64>,
    pub domains: Vec<Vec<String>>,
    /// `conditionals[feature][class][slot]`; the last slot is the unseen one.
    pub conditionals: Vec<Vec<Vec<f64>>>,
}

/// Trains on the table's own record weights.
pub fn train_naive_bayes(table: &DiscreteTable) -> Result<NaiveBayesModel> {
    NaiveBayesModel::fit(table, table.weights(), DEFAULT_SMOOTHING)
}

impl NaiveBayesModel {
    /// Weights are rescaled to sum to the row count before smoothing, so
    /// the model depends only on their relative sizes.
    pub fn fit(table: &DiscreteTable, weights: &[f64], smoothing: f64) -> Result<Self> {
        if weights.len() != table.n_rows() {
            return Err(Error::invalid("weight vector length differs from row count"));
        }
        if !(smoothing.is_finite() && smoothing > 0.0) {
            return Err(Error::invalid("smoothing must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::invalid("total training weight must be positive"));
        }
        let n = table.n_rows() as f64;
        let mass: Vec<f64> = weights.iter().map(|w| w / total * n).collect();
        let n_classes = table.n_classes();
        let classes = table.classes();

        let mut class_mass = vec![0.0; n_classes];
        for (&c, &m) in classes.iter().zip(&mass) {
            class_mass[c as usize] += m;
        }
        let denom = class_mass.iter().sum::<f64>() + smoothing * n_classes as f64;
        let priors = class_mass.iter().map(|m| (m + smoothing) / denom).collect();

        let (domains, conditionals): (Vec<_>, Vec<_>) = (0..table.n_features())
            .into_par_iter()
            .map(|j| {
                let column = table.column(j);
                let mut seen = vec![false; table.cardinality(j)];
                for &v in column {
                    seen[v as usize] = true;
                }
                let mut slot_of = vec![usize::MAX; seen.len()];
                let mut domain = Vec::new();
                for (code, _) in seen.iter().enumerate().filter(|(_, s)| **s) {
                    slot_of[code] = domain.len();
                    domain.push(table.domain(j)[code].to_string());
                }
                let slots = domain.len() + 1;
                let mut counts = vec![vec![0.0; slots]; n_classes];
                for ((&v, &c), &m) in column.iter().zip(classes).zip(&mass) {
                    counts[c as usize][slot_of[v as usize]] += m;
                }
                let cond: Vec<Vec<f64>> = counts
                    .into_iter()
                    .zip(&class_mass)
                    .map(|(row, cm)| {
                        let d = cm + smoothing * slots as f64;
                        row.into_iter().map(|x| (x + smoothing) / d).collect()
                    })
                    .collect();
                (domain, cond)
            })
            .unzip();

        Ok(Self {
            labels: table.labels().to_vec(),
            features: table.feature_ids().to_vec(),
            smoothing,
            priors,
            domains,
            conditionals,
        })
    }

    fn unseen_slot(&self, j: usize) -> usize {
        self.domains[j].len()
    }

    /// Resolves table codes to model slots once, for fast batch prediction.
    pub fn bind(&self, table: &DiscreteTable) -> Result<BoundNaiveBayes> {
        let k = self.labels.len();
        let mut features = Vec::with_capacity(self.features.len());
        for (j, &f) in self.features.iter().enumerate() {
            let col = table
                .column_of_feature(f)
                .ok_or_else(|| Error::invalid(format!("table lacks feature {f} required by the model")))?;
            let index: HashMap<&str, usize> = self.domains[j]
                .iter()
                .enumerate()
                .map(|(slot, s)| (s.as_str(), slot))
                .collect();
            let slot_of_code = table
                .domain(col)
                .iter()
                .map(|s| index.get(&**s).copied().unwrap_or(self.unseen_slot(j)))
                .collect();
            let slots = self.unseen_slot(j) + 1;
            let mut log_cond = vec![0.0; slots * k];
            for c in 0..k {
                for s in 0..slots {
                    log_cond[s * k + c] = self.conditionals[j][c][s].ln();
                }
            }
            features.push(BoundFeature {
                column: col,
                slot_of_code,
                log_cond,
            });
        }
        Ok(BoundNaiveBayes {
            log_priors: self.priors.iter().map(|p| p.ln()).collect(),
            features,
        })
    }

    fn slot_for(&self, j: usize, value: &Value) -> usize {
        match value {
            Value::Sym(s) => self.domains[j]
                .iter()
                .position(|d| d == &**s)
                .unwrap_or(self.unseen_slot(j)),
            Value::Num(_) => self.unseen_slot(j),
        }
    }

    /// Posterior over `labels` for one discretized record.
    pub fn posterior(&self, record: &Record) -> Vec<f64> {
        let mut log = self.priors.iter().map(|p| p.ln()).collect::<Vec<_>>();
        for (j, &f) in self.features.iter().enumerate() {
            let slot = self.slot_for(j, &record.values[f - 1]);
            for (c, l) in log.iter_mut().enumerate() {
                *l += self.conditionals[j][c][slot].ln();
            }
        }
        normalize_log(&mut log);
        log
    }

    pub fn predict(&self, record: &Record) -> &str {
        &self.labels[argmax(&self.posterior(record))]
    }
}

/// Label → posterior pairs in label order.
pub fn nb_predict(model: &NaiveBayesModel, record: &Record) -> Vec<(String, f64)> {
    model.labels.iter().cloned().zip(model.posterior(record)).collect()
}

/// Converts log scores into normalized probabilities in place.
fn normalize_log(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// First index of the maximum.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

struct BoundFeature {
    column: usize,
    slot_of_code: Vec<usize>,
    log_cond: Vec<f64>,
}

/// A naive Bayes model resolved against one table's dictionaries.
pub struct BoundNaiveBayes {
    log_priors: Vec<f64>,
    features: Vec<BoundFeature>,
}

impl BoundNaiveBayes {
    fn log_scores(&self, table: &DiscreteTable, row: usize) -> Vec<f64> {
        let k = self.log_priors.len();
        let mut scores = self.log_priors.clone();
        for f in &self.features {
            let slot = f.slot_of_code[table.column(f.column)[row] as usize];
            let probs = &f.log_cond[slot * k..(slot + 1) * k];
            for (s, p) in scores.iter_mut().zip(probs) {
                *s += p;
            }
        }
        scores
    }

    pub fn posterior_row(&self, table: &DiscreteTable, row: usize) -> Vec<f64> {
        let mut s = self.log_scores(table, row);
        normalize_log(&mut s);
        s
    }

    pub fn predict_row(&self, table: &DiscreteTable, row: usize) -> usize {
        argmax(&self.log_scores(table, row))
    }

    pub fn predict_all(&self, table: &DiscreteTable) -> Vec<usize> {
        (0..table.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(table, i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    pub model: NaiveBayesModel,
    pub vote_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub labels: Vec<String>,
    pub rounds: Vec<BoostRound>,
}

/// What happened in one boosting round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round: usize,
    /// Weighted training error of this round's model.
    pub error: f64,
    /// Whether the round's model entered the ensemble.
    pub kept: bool,
    pub vote_weight: Option<f64>,
    /// Distribution the model was trained on.
    pub distribution: Vec<f64>,
    /// Distribution after reweighting, when training continues.
    pub next_distribution: Option<Vec<f64>>,
}

pub fn train_adaboost_m1(table: &DiscreteTable, rounds: usize) -> Result<EnsembleModel> {
    train_adaboost_m1_with(table, rounds, |_| {})
}

/// AdaBoost.M1 by reweighting. `observe` sees every round, including a
/// discarded final one.
pub fn train_adaboost_m1_with(
    table: &DiscreteTable,
    rounds: usize,
    mut observe: impl FnMut(&RoundTrace),
) -> Result<EnsembleModel> {
    if rounds == 0 {
        return Err(Error::invalid("boosting needs at least one round"));
    }
    let total: f64 = table.weights().iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::invalid("total training weight must be positive"));
    }
    let mut dist: Vec<f64> = table.weights().iter().map(|w| w / total).collect();
    let classes = table.classes();
    let mut kept = Vec::new();

    for round in 0..rounds {
        let model = NaiveBayesModel::fit(table, &dist, DEFAULT_SMOOTHING)?;
        let preds = model.bind(table)?.predict_all(table);
        let missed: Vec<bool> = preds.iter().zip(classes).map(|(&p, &c)| p != c as usize).collect();
        let error: f64 = dist.iter().zip(&missed).filter(|(_, &m)| m).map(|(d, _)| d).sum();

        let mut trace = RoundTrace {
            round,
            error,
            kept: false,
            vote_weight: None,
            distribution: dist.clone(),
            next_distribution: None,
        };

        if error >= 0.5 {
            if round == 0 {
                trace.kept = true;
                trace.vote_weight = Some(MIN_VOTE_WEIGHT);
                kept.push(BoostRound {
                    model,
                    vote_weight: MIN_VOTE_WEIGHT,
                });
            }
            observe(&trace);
            break;
        }
        if error == 0.0 {
            let w = ((1.0 - ERROR_FLOOR) / ERROR_FLOOR).ln();
            trace.kept = true;
            trace.vote_weight = Some(w);
            kept.push(BoostRound { model, vote_weight: w });
            observe(&trace);
            break;
        }

        let ratio = (1.0 - error) / error;
        let vote_weight = ratio.ln();
        for (d, &m) in dist.iter_mut().zip(&missed) {
            if m {
                *d *= ratio;
            }
        }
        let sum: f64 = dist.iter().sum();
        for d in dist.iter_mut() {
            *d /= sum;
        }
        trace.kept = true;
        trace.vote_weight = Some(vote_weight);
        trace.next_distribution = Some(dist.clone());
        kept.push(BoostRound { model, vote_weight });
        observe(&trace);
    }

    Ok(EnsembleModel {
        labels: table.labels().to_vec(),
        rounds: kept,
    })
}

impl EnsembleModel {
    pub fn bind(&self, table: &DiscreteTable) -> Result<BoundEnsemble> {
        Ok(BoundEnsemble {
            n_labels: self.labels.len(),
            rounds: self
                .rounds
                .iter()
                .map(|r| Ok((r.model.bind(table)?, r.vote_weight)))
                .collect::<Result<_>>()?,
        })
    }

    /// Weighted hard vote over rounds; ties go to the earlier label.
    pub fn predict(&self, record: &Record) -> &str {
        let mut votes = vec![0.0; self.labels.len()];
        for r in &self.rounds {
            votes[argmax(&r.model.posterior(record))] += r.vote_weight;
        }
        &self.labels[argmax(&votes)]
    }
}

pub fn ensemble_predict<'a>(e: &'a EnsembleModel, record: &Record) -> &'a str {
    e.predict(record)
}

pub struct BoundEnsemble {
    n_labels: usize,
    rounds: Vec<(BoundNaiveBayes, f64)>,
}

impl BoundEnsemble {
    pub fn predict_row(&self, table: &DiscreteTable, row: usize) -> usize {
        let mut votes = vec![0.0; self.n_labels];
        for (m, w) in &self.rounds {
            votes[m.predict_row(table, row)] += w;
        }
        argmax(&votes)
    }

    pub fn predict_all(&self, table: &DiscreteTable) -> Vec<usize> {
        (0..table.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(table, i))
            .collect()
    }
}

/// Either a single naive Bayes model or a boosted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Classifier {
    NaiveBayes(NaiveBayesModel),
    Boosted(EnsembleModel),
}

impl Classifier {
    pub fn train(table: &DiscreteTable, boost: bool, rounds: usize) -> Result<Self> {
        if boost {
            Ok(Classifier::Boosted(train_adaboost_m1(table, rounds)?))
        } else {
            Ok(Classifier::NaiveBayes(train_naive_bayes(table)?))
        }
    }

    pub fn labels(&self) -> &[String] {
        match self {
            Classifier::NaiveBayes(m) => &m.labels,
            Classifier::Boosted(e) => &e.labels,
        }
    }

    /// Predicted class index for every row of `table`.
    pub fn predict_table(&self, table: &DiscreteTable) -> Result<Vec<usize>> {
        Ok(match self {
            Classifier::NaiveBayes(m) => m.bind(table)?.predict_all(table),
            Classifier::Boosted(e) => e.bind(table)?.predict_all(table),
        })
    }

    pub fn predict(&self, record: &Record) -> &str {
        match self {
            Classifier::NaiveBayes(m) => m.predict(record),
            Classifier::Boosted(e) => e.predict(record),
        }
    }
}
