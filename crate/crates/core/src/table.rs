//! Column-major integer encoding of a fully discrete dataset.
//!
//! Selection and classification run on this representation. Every column
//! keeps the symbol dictionary it was encoded with, so row subsets share
//! codes with their parent table.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rayon::prelude::*;

use crate::data::{Dataset, Value};
use crate::discretize::{CutPointList, DiscretizationModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTable {
    feature_ids: Vec<usize>,
    columns: Vec<Vec<u32>>,
    domains: Vec<Vec<Arc<str>>>,
    classes: Vec<u32>,
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl DiscreteTable {
    /// Encodes every feature of a discrete dataset. Symbols are coded in
    /// sorted order; classes follow [`Dataset::label_set`].
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        Self::encode(ds, None)
    }

    /// Like [`DiscreteTable::from_dataset`], but continuous features are
    /// binned through `model` on the fly: the code is the bin index and the
    /// symbol its decimal form, matching [`apply_discretizer`].
    ///
    /// [`apply_discretizer`]: crate::discretize::apply_discretizer
    pub fn encode(ds: &Dataset, model: Option<&DiscretizationModel>) -> Result<Self> {
        let n_features = ds.schema().len();
        for f in ds.schema().continuous_indices() {
            if model.and_then(|m| m.cuts_for(f)).is_none() {
                return Err(Error::NotDiscrete(f));
            }
        }
        let encoded: Vec<(Vec<u32>, Vec<Arc<str>>)> = (0..n_features)
            .into_par_iter()
            .map(|j| encode_column(ds, j, model.and_then(|m| m.cuts_for(j + 1))))
            .collect::<Result<_>>()?;
        let (columns, domains) = encoded.into_iter().unzip();
        let labels = ds.label_set();
        let label_index: HashMap<&str, u32> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
        let classes = ds.records().iter().map(|r| label_index[r.label.as_str()]).collect();
        let weights = ds.records().iter().map(|r| r.weight).collect();
        Ok(Self {
            feature_ids: (1..=n_features).collect(),
            columns,
            domains,
            classes,
            labels,
            weights,
        })
    }

    /// Builds a table straight from integer codes; symbols are the decimal
    /// codes and feature ids are 1..=columns. Weights default to 1.
    pub fn from_codes(columns: Vec<Vec<u32>>, classes: Vec<u32>, labels: Vec<String>) -> Result<Self> {
        let n = classes.len();
        if let Some(j) = columns.iter().position(|c| c.len() != n) {
            return Err(Error::SchemaMismatch(format!(
                "column {} has {} rows, expected {n}",
                j + 1,
                columns[j].len()
            )));
        }
        if let Some(&c) = classes.iter().find(|&&c| c as usize >= labels.len()) {
            return Err(Error::invalid(format!("class code {c} outside label set")));
        }
        let domains = columns
            .iter()
            .map(|col| {
                let max = col.iter().copied().max().map_or(0, |m| m + 1);
                (0..max).map(|c| Arc::from(c.to_string().as_str())).collect()
            })
            .collect();
        Ok(Self {
            feature_ids: (1..=columns.len()).collect(),
            columns,
            domains,
            classes,
            labels,
            weights: vec![1.0; n],
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_rows() {
            return Err(Error::invalid("weight vector length differs from row count"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.classes.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    /// 1-based schema index of each column.
    pub fn feature_ids(&self) -> &[usize] {
        &self.feature_ids
    }

    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    pub fn domain(&self, j: usize) -> &[Arc<str>] {
        &self.domains[j]
    }

    pub fn cardinality(&self, j: usize) -> usize {
        self.domains[j].len()
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn column_of_feature(&self, feature_id: usize) -> Option<usize> {
        self.feature_ids.iter().position(|&f| f == feature_id)
    }

    /// Keeps only the listed features (1-based ids), in the given order.
    pub fn select_features(&self, feature_ids: &[usize]) -> Result<Self> {
        let mut cols = Vec::with_capacity(feature_ids.len());
        for &f in feature_ids {
            cols.push(
                self.column_of_feature(f)
                    .ok_or_else(|| Error::invalid(format!("feature {f} not in table")))?,
            );
        }
        Ok(Self {
            feature_ids: feature_ids.to_vec(),
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            domains: cols.iter().map(|&j| self.domains[j].clone()).collect(),
            classes: self.classes.clone(),
            labels: self.labels.clone(),
            weights: self.weights.clone(),
        })
    }

    /// Row subset; dictionaries and label set are kept whole.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            feature_ids: self.feature_ids.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            domains: self.domains.clone(),
            classes: rows.iter().map(|&i| self.classes[i]).collect(),
            labels: self.labels.clone(),
            weights: rows.iter().map(|&i| self.weights[i]).collect(),
        }
    }
}

fn encode_column(ds: &Dataset, j: usize, cuts: Option<&CutPointList>) -> Result<(Vec<u32>, Vec<Arc<str>>)> {
    if let Some(cuts) = cuts {
        let domain = (0..cuts.n_bins()).map(|b| Arc::from(b.to_string().as_str())).collect();
        let column = ds
            .records()
            .iter()
            .map(|r| match &r.values[j] {
                Value::Num(x) => Ok(cuts.bin(*x) as u32),
                Value::Sym(_) => Err(Error::SchemaMismatch(format!(
                    "feature {} has cut points but holds symbols",
                    j + 1
                ))),
            })
            .collect::<Result<_>>()?;
        return Ok((column, domain));
    }
    let mut symbols: BTreeSet<&Arc<str>> = BTreeSet::new();
    for r in ds.records() {
        match &r.values[j] {
            Value::Sym(s) => {
                symbols.insert(s);
            }
            Value::Num(_) => return Err(Error::NotDiscrete(j + 1)),
        }
    }
    let domain: Vec<Arc<str>> = symbols.into_iter().cloned().collect();
    let index: HashMap<&str, u32> = domain.iter().enumerate().map(|(c, s)| (&**s, c as u32)).collect();
    let column = ds
        .records()
        .iter()
        .map(|r| index[&**r.values[j].as_sym().expect("checked above")])
        .collect();
    Ok((column, domain))
}
