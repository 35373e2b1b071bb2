//! Supervised entropy-minimization discretization with the MDL stopping rule
//! (Fayyad & Irani).

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, Record, Value};
use crate::error::{Error, Result};

/// Shannon entropy in bits of a (possibly fractional) count vector.
pub fn entropy(class_counts: &[f64]) -> Result<f64> {
    if class_counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::invalid("class counts must be finite and non-negative"));
    }
    let total: f64 = class_counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    Ok(entropy_of(class_counts, total))
}

/// Unchecked entropy; zero-mass entries contribute nothing. Terms are
/// summed smallest first so permuted counts give bit-identical results,
/// which keeps tie-breaking between mirror-image splits exact.
pub(crate) fn entropy_of(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let mut positive: Vec<f64> = counts.iter().copied().filter(|&c| c > 0.0).collect();
    positive.sort_unstable_by(f64::total_cmp);
    let mut h = 0.0;
    for c in positive {
        let p = c / total;
        h -= p * p.log2();
    }
    h
}

/// Which split points the search considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CandidateMode {
    /// Midpoints between adjacent values whose class makeup differs.
    #[default]
    BoundaryPoints,
    /// Every midpoint between adjacent distinct values.
    AllMidpoints,
}

/// Accepted cut points for `values`, ascending. Labels can be any ordered
/// type; each record counts once.
pub fn mdlp_cuts<L: Ord>(values: &[f64], labels: &[L]) -> Vec<f64> {
    mdlp_cuts_with(values, labels, CandidateMode::BoundaryPoints)
}

pub fn mdlp_cuts_with<L: Ord>(values: &[f64], labels: &[L], mode: CandidateMode) -> Vec<f64> {
    assert_eq!(values.len(), labels.len(), "values and labels differ in length");
    let mut codes = BTreeMap::new();
    for l in labels {
        let next = codes.len() as u32;
        codes.entry(l).or_insert(next);
    }
    let classes: Vec<u32> = labels.iter().map(|l| codes[l]).collect();
    let weights = vec![1.0; values.len()];
    mdlp_cuts_weighted(values, &classes, codes.len(), &weights, mode)
}

/// Weighted variant on dense class codes `0..n_classes`.
pub fn mdlp_cuts_weighted(
    values: &[f64],
    classes: &[u32],
    n_classes: usize,
    weights: &[f64],
    mode: CandidateMode,
) -> Vec<f64> {
    let groups = ValueGroups::build(values, classes, n_classes, weights);
    let mut cuts = Vec::new();
    if groups.len() > 1 {
        groups.split(0, groups.len(), mode, &mut cuts);
    }
    cuts
}

/// Records grouped by distinct value, with per-group class mass.
struct ValueGroups {
    values: Vec<f64>,
    counts: Vec<f64>,
    n_classes: usize,
}

impl ValueGroups {
    fn build(values: &[f64], classes: &[u32], n_classes: usize, weights: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut out = Self {
            values: Vec::new(),
            counts: Vec::new(),
            n_classes,
        };
        for i in order {
            if out.values.last() != Some(&values[i]) {
                out.values.push(values[i]);
                out.counts.extend(std::iter::repeat_n(0.0, n_classes));
            }
            let g = out.values.len() - 1;
            out.counts[g * n_classes + classes[i] as usize] += weights[i];
        }
        out
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn group(&self, g: usize) -> &[f64] {
        &self.counts[g * self.n_classes..(g + 1) * self.n_classes]
    }

    fn sole_class(&self, g: usize) -> Option<usize> {
        let mut found = None;
        for (c, &w) in self.group(g).iter().enumerate() {
            if w > 0.0 {
                if found.is_some() {
                    return None;
                }
                found = Some(c);
            }
        }
        found
    }

    /// A cut between groups `g-1` and `g` is a boundary unless both sides hold
    /// a single identical class.
    fn is_boundary(&self, g: usize) -> bool {
        match (self.sole_class(g - 1), self.sole_class(g)) {
            (Some(a), Some(b)) => a != b,
            _ => true,
        }
    }

    fn split(&self, lo: usize, hi: usize, mode: CandidateMode, cuts: &mut Vec<f64>) {
        if hi - lo < 2 {
            return;
        }
        let k = self.n_classes;
        let mut total = vec![0.0; k];
        for g in lo..hi {
            for (t, &w) in total.iter_mut().zip(self.group(g)) {
                *t += w;
            }
        }
        let n: f64 = total.iter().sum();
        if n <= 1.0 {
            return;
        }

        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        let mut best: Option<(usize, f64, Vec<f64>, Vec<f64>)> = None;
        for p in lo + 1..hi {
            for (l, &w) in left.iter_mut().zip(self.group(p - 1)) {
                *l += w;
            }
            if mode == CandidateMode::BoundaryPoints && !self.is_boundary(p) {
                continue;
            }
            for c in 0..k {
                right[c] = total[c] - left[c];
            }
            let wl: f64 = left.iter().sum();
            let wr: f64 = right.iter().sum();
            let e = (wl * entropy_of(&left, wl) + wr * entropy_of(&right, wr)) / n;
            if best.as_ref().is_none_or(|b| e < b.1) {
                best = Some((p, e, left.clone(), right.clone()));
            }
        }
        let Some((p, e, left, right)) = best else {
            return;
        };

        let h = entropy_of(&total, n);
        let wl: f64 = left.iter().sum();
        let wr: f64 = right.iter().sum();
        let h1 = entropy_of(&left, wl);
        let h2 = entropy_of(&right, wr);
        let distinct = |c: &[f64]| c.iter().filter(|&&w| w > 0.0).count() as f64;
        let (k0, k1, k2) = (distinct(&total), distinct(&left), distinct(&right));
        let gain = h - e;
        let delta = (3f64.powf(k0) - 2.0).log2() - (k0 * h - k1 * h1 - k2 * h2);
        let threshold = ((n - 1.0).log2() + delta) / n;
        if gain <= threshold {
            return;
        }

        self.split(lo, p, mode, cuts);
        cuts.push((self.values[p - 1] + self.values[p]) / 2.0);
        self.split(p, hi, mode, cuts);
    }
}

/// Cut points for one continuous feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPointList {
    /// 1-based schema index.
    pub feature_index: usize,
    pub cuts: Vec<f64>,
}

impl CutPointList {
    /// Left-closed bins: `cuts[i-1] <= v < cuts[i]` maps to bin `i`.
    pub fn bin(&self, v: f64) -> usize {
        self.cuts.partition_point(|&c| c <= v)
    }

    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationModel {
    pub features: Vec<CutPointList>,
}

impl DiscretizationModel {
    pub fn cuts_for(&self, feature_index: usize) -> Option<&CutPointList> {
        self.features.iter().find(|c| c.feature_index == feature_index)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Fits cut points for every continuous feature against the training labels.
pub fn fit_discretizer(train: &Dataset) -> DiscretizationModel {
    let rows: Vec<usize> = (0..train.len()).collect();
    fit_discretizer_on(train, &rows)
}

/// Fits on a subset of rows (a cross-validation training split).
pub fn fit_discretizer_on(ds: &Dataset, rows: &[usize]) -> DiscretizationModel {
    let labels = ds.label_set();
    let index: BTreeMap<&str, u32> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
    let records = ds.records();
    let classes: Vec<u32> = rows.iter().map(|&i| index[records[i].label.as_str()]).collect();
    let weights: Vec<f64> = rows.iter().map(|&i| records[i].weight).collect();
    let features = ds
        .schema()
        .continuous_indices()
        .into_par_iter()
        .map(|f| {
            let values: Vec<f64> = rows
                .iter()
                .map(|&i| {
                    records[i].values[f - 1]
                        .as_num()
                        .expect("continuous feature holds a number")
                })
                .collect();
            CutPointList {
                feature_index: f,
                cuts: mdlp_cuts_weighted(&values, &classes, labels.len(), &weights, CandidateMode::BoundaryPoints),
            }
        })
        .collect();
    DiscretizationModel { features }
}

/// Replaces every continuous value with its bin index symbol. Discrete
/// features pass through; the output schema is fully discrete.
pub fn apply_discretizer(model: &DiscretizationModel, ds: &Dataset) -> Result<Dataset> {
    let continuous = ds.schema().continuous_indices();
    let covered: Vec<usize> = model.features.iter().map(|c| c.feature_index).collect();
    if continuous != covered {
        return Err(Error::SchemaMismatch(format!(
            "model covers features {covered:?} but dataset has continuous features {continuous:?}"
        )));
    }
    let n = ds.schema().len();
    type Binning<'m> = Option<(&'m CutPointList, Vec<Arc<str>>)>;
    let mut plan: Vec<Binning<'_>> = vec![None; n];
    for c in &model.features {
        debug_assert_eq!(ds.schema().feature(c.feature_index).kind, FeatureKind::Continuous);
        let symbols = (0..c.n_bins()).map(|b| Arc::from(b.to_string().as_str())).collect();
        plan[c.feature_index - 1] = Some((c, symbols));
    }
    let records = ds
        .records()
        .par_iter()
        .map(|r| Record {
            values: r
                .values
                .iter()
                .zip(&plan)
                .map(|(v, p)| match (v, p) {
                    (Value::Num(x), Some((cuts, symbols))) => Value::Sym(symbols[cuts.bin(*x)].clone()),
                    _ => v.clone(),
                })
                .collect(),
            label: r.label.clone(),
            weight: r.weight,
        })
        .collect();
    Ok(Dataset::from_parts_unchecked(
        ds.schema().all_discrete(),
        records,
        ds.granularity(),
    ))
}
