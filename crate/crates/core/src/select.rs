//! Feature scoring and subset selection: information gain, gain ratio,
//! symmetrical uncertainty, CFS merit with greedy and best-first search,
//! threshold ranking, and the CFS + information-gain hybrid.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::entropy_of;
use crate::error::{Error, Result};
use crate::table::DiscreteTable;

/// Weighted joint counts of two discrete columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    n_x: usize,
    n_y: usize,
    counts: Vec<f64>,
}

impl ContingencyTable {
    pub fn from_columns(x: &[u32], y: &[u32], weights: Option<&[f64]>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid("columns differ in length"));
        }
        if x.is_empty() {
            return Err(Error::invalid("columns are empty"));
        }
        let n_x = x.iter().copied().max().unwrap_or(0) as usize + 1;
        let n_y = y.iter().copied().max().unwrap_or(0) as usize + 1;
        let mut counts = vec![0.0; n_x * n_y];
        for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
            counts[a as usize * n_y + b as usize] += weights.map_or(1.0, |w| w[i]);
        }
        Ok(Self { n_x, n_y, counts })
    }

    pub fn count(&self, x: usize, y: usize) -> f64 {
        self.counts[x * self.n_y + y]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn x_marginal(&self) -> Vec<f64> {
        self.counts.chunks(self.n_y).map(|row| row.iter().sum()).collect()
    }

    pub fn y_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_y];
        for row in self.counts.chunks(self.n_y) {
            for (acc, c) in m.iter_mut().zip(row) {
                *acc += c;
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0.0; self.counts.len()];
        for x in 0..self.n_x {
            for y in 0..self.n_y {
                counts[y * self.n_x + x] = self.count(x, y);
            }
        }
        Self {
            n_x: self.n_y,
            n_y: self.n_x,
            counts,
        }
    }

    pub fn entropy_x(&self) -> f64 {
        entropy_of(&self.x_marginal(), self.total())
    }

    pub fn entropy_y(&self) -> f64 {
        entropy_of(&self.y_marginal(), self.total())
    }

    /// H(Y|X) = sum over x of P(x) H(Y | X = x).
    pub fn conditional_entropy_y(&self) -> f64 {
        let total = self.total();
        self.counts
            .chunks(self.n_y)
            .map(|row| {
                let w: f64 = row.iter().sum();
                if w > 0.0 {
                    w / total * entropy_of(row, w)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// H(Y) - H(Y|X), clamped at zero against rounding.
    pub fn info_gain(&self) -> f64 {
        (self.entropy_y() - self.conditional_entropy_y()).max(0.0)
    }

    pub fn gain_ratio(&self) -> f64 {
        let hx = self.entropy_x();
        if hx <= 0.0 {
            return 0.0;
        }
        (self.info_gain() / hx).min(1.0)
    }

    pub fn symmetrical_uncertainty(&self) -> f64 {
        let hx = self.entropy_x();
        let hy = self.entropy_y();
        if hx <= 0.0 || hy <= 0.0 {
            return 0.0;
        }
        (2.0 * self.info_gain() / (hx + hy)).clamp(0.0, 1.0)
    }
}

/// Information gain of class column `y` from feature column `x`, in bits.
pub fn info_gain(x: &[u32], y: &[u32]) -> Result<f64> {
    Ok(ContingencyTable::from_columns(x, y, None)?.info_gain())
}

/// IG(X,Y) / H(X); zero for a constant feature.
pub fn gain_ratio(x: &[u32], y: &[u32]) -> Result<f64> {
    Ok(ContingencyTable::from_columns(x, y, None)?.gain_ratio())
}

/// 2 IG(A,B) / (H(A) + H(B)); zero when either column is constant.
pub fn symmetrical_uncertainty(a: &[u32], b: &[u32]) -> Result<f64> {
    Ok(ContingencyTable::from_columns(a, b, None)?.symmetrical_uncertainty())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scorer {
    InfoGain,
    GainRatio,
    SymmetricalUncertainty,
}

impl Scorer {
    fn score(self, t: &ContingencyTable) -> f64 {
        match self {
            Scorer::InfoGain => t.info_gain(),
            Scorer::GainRatio => t.gain_ratio(),
            Scorer::SymmetricalUncertainty => t.symmetrical_uncertainty(),
        }
    }
}

fn column_vs_class(table: &DiscreteTable, j: usize) -> ContingencyTable {
    ContingencyTable::from_columns(table.column(j), table.classes(), Some(table.weights()))
        .expect("table columns are aligned and non-empty")
}

/// Lazily filled symmetric-uncertainty correlations between features and
/// with the class. Entries are computed once and shared across threads.
pub struct CorrelationCache<'a> {
    table: Option<&'a DiscreteTable>,
    feature_ids: Vec<usize>,
    class: Vec<OnceLock<f64>>,
    pairs: Vec<OnceLock<f64>>,
}

impl<'a> CorrelationCache<'a> {
    pub fn new(table: &'a DiscreteTable) -> Self {
        let m = table.n_features();
        Self {
            table: Some(table),
            feature_ids: table.feature_ids().to_vec(),
            class: (0..m).map(|_| OnceLock::new()).collect(),
            pairs: (0..m * m).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Pre-filled cache over features `1..=r_cf.len()`; `r_ff` must be
    /// square and symmetric.
    pub fn from_values(r_cf: Vec<f64>, r_ff: Vec<Vec<f64>>) -> Result<CorrelationCache<'static>> {
        let m = r_cf.len();
        if r_ff.len() != m || r_ff.iter().any(|row| row.len() != m) {
            return Err(Error::invalid("feature correlation matrix must be square"));
        }
        if (0..m).any(|i| (0..i).any(|j| r_ff[i][j] != r_ff[j][i])) {
            return Err(Error::invalid("feature correlation matrix must be symmetric"));
        }
        let filled = |v: f64| {
            let cell = OnceLock::new();
            let _ = cell.set(v);
            cell
        };
        Ok(CorrelationCache {
            table: None,
            feature_ids: (1..=m).collect(),
            class: r_cf.into_iter().map(filled).collect(),
            pairs: r_ff.into_iter().flatten().map(filled).collect(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.class.len()
    }

    pub fn column_of(&self, feature_id: usize) -> Option<usize> {
        self.feature_ids.iter().position(|&f| f == feature_id)
    }

    pub fn feature_class(&self, j: usize) -> f64 {
        *self.class[j].get_or_init(|| {
            let t = self.table.expect("unfilled entries need a table");
            column_vs_class(t, j).symmetrical_uncertainty()
        })
    }

    pub fn feature_feature(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let m = self.n_features();
        *self.pairs[a * m + b].get_or_init(|| {
            let t = self.table.expect("unfilled entries need a table");
            ContingencyTable::from_columns(t.column(a), t.column(b), Some(t.weights()))
                .expect("table columns are aligned and non-empty")
                .symmetrical_uncertainty()
        })
    }
}

/// M = k r_cf / sqrt(k + k(k-1) r_ff), written over sums: the numerator is
/// the summed feature-class correlation and k(k-1) r_ff is twice the summed
/// pairwise correlation.
fn merit_from_sums(k: usize, sum_cf: f64, sum_ff: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    sum_cf / (k as f64 + 2.0 * sum_ff).sqrt()
}

/// CFS merit of a subset of columns.
fn merit_of_columns(columns: &[usize], cache: &CorrelationCache<'_>) -> f64 {
    let sum_cf: f64 = columns.iter().map(|&j| cache.feature_class(j)).sum();
    let mut sum_ff = 0.0;
    for (a, &i) in columns.iter().enumerate() {
        for &j in &columns[a + 1..] {
            sum_ff += cache.feature_feature(i, j);
        }
    }
    merit_from_sums(columns.len(), sum_cf, sum_ff)
}

/// Selected features (1-based, ascending) and the CFS merit they scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub indices: Vec<usize>,
    pub merit: Option<f64>,
}

impl FeatureSubset {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices, merit: None }
    }
}

/// CFS merit of a non-empty subset (1-based feature ids).
pub fn cfs_merit(subset: &FeatureSubset, cache: &CorrelationCache<'_>) -> Result<f64> {
    if subset.indices.is_empty() {
        return Err(Error::invalid("merit is undefined for an empty subset"));
    }
    let columns = subset
        .indices
        .iter()
        .map(|&f| {
            cache
                .column_of(f)
                .ok_or_else(|| Error::invalid(format!("feature {f} not in cache")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merit_of_columns(&columns, cache))
}

fn to_subset(cache: &CorrelationCache<'_>, columns: &[usize], merit: f64) -> FeatureSubset {
    let mut indices: Vec<usize> = columns.iter().map(|&j| cache.feature_ids[j]).collect();
    indices.sort_unstable();
    FeatureSubset {
        indices,
        merit: Some(merit),
    }
}

/// Forward selection: add whichever feature most increases merit; stop when
/// no addition strictly improves it. Ties go to the lower feature index.
pub fn greedy_forward_search(table: &DiscreteTable) -> FeatureSubset {
    let cache = CorrelationCache::new(table);
    greedy_forward_with(&cache)
}

pub fn greedy_forward_with(cache: &CorrelationCache<'_>) -> FeatureSubset {
    let steps = greedy_forward_steps(cache);
    let columns: Vec<usize> = steps.iter().map(|s| s.0).collect();
    let merit = steps.last().map_or(0.0, |s| s.1);
    to_subset(cache, &columns, merit)
}

/// Accepted greedy steps in order: (column, merit after adding it).
pub fn greedy_forward_steps(cache: &CorrelationCache<'_>) -> Vec<(usize, f64)> {
    let m = cache.n_features();
    let mut steps: Vec<(usize, f64)> = Vec::new();
    let mut in_set = vec![false; m];
    let mut merit = 0.0;
    let mut sum_cf = 0.0;
    let mut sum_ff = 0.0;
    loop {
        let candidates: Vec<usize> = (0..m).filter(|&j| !in_set[j]).collect();
        let scored: Vec<(usize, f64, f64)> = candidates
            .par_iter()
            .map(|&j| {
                let add_ff: f64 = steps.iter().map(|&(s, _)| cache.feature_feature(s, j)).sum();
                (j, cache.feature_class(j), add_ff)
            })
            .collect();
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for (j, cf, add_ff) in scored {
            let m_new = merit_from_sums(steps.len() + 1, sum_cf + cf, sum_ff + add_ff);
            if best.is_none_or(|b| m_new > b.1) {
                best = Some((j, m_new, cf, add_ff));
            }
        }
        match best {
            Some((j, m_new, cf, add_ff)) if m_new > merit => {
                steps.push((j, m_new));
                in_set[j] = true;
                merit = m_new;
                sum_cf += cf;
                sum_ff += add_ff;
            }
            _ => break,
        }
    }
    steps
}

/// Consecutive non-improving expansions tolerated by best-first search.
pub const BEST_FIRST_STALE_LIMIT: usize = 5;

/// Best-first forward search over subsets, open list ordered by merit.
pub fn best_first_search(table: &DiscreteTable) -> FeatureSubset {
    let cache = CorrelationCache::new(table);
    best_first_with(&cache, BEST_FIRST_STALE_LIMIT)
}

pub fn best_first_with(cache: &CorrelationCache<'_>, stale_limit: usize) -> FeatureSubset {
    let m = cache.n_features();
    let mut open: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    visited.insert(Vec::new());
    let mut best: (Vec<usize>, f64) = (Vec::new(), 0.0);
    let mut stale = 0;

    while !open.is_empty() {
        // Highest merit first; ties go to the lexicographically smaller subset.
        let pick = (0..open.len())
            .reduce(|a, b| {
                let (sa, ma) = &open[a];
                let (sb, mb) = &open[b];
                if mb > ma || (mb == ma && sb < sa) {
                    b
                } else {
                    a
                }
            })
            .expect("open list is non-empty");
        let (node, _) = open.swap_remove(pick);

        let children: Vec<Vec<usize>> = (0..m)
            .filter(|j| !node.contains(j))
            .map(|j| {
                let mut child = node.clone();
                let at = child.partition_point(|&c| c < j);
                child.insert(at, j);
                child
            })
            .filter(|child| visited.insert(child.clone()))
            .collect();
        let merits: Vec<f64> = children.par_iter().map(|c| merit_of_columns(c, cache)).collect();

        let mut improved = false;
        for (child, merit) in children.into_iter().zip(merits) {
            if merit > best.1 {
                best = (child.clone(), merit);
                improved = true;
            }
            open.push((child, merit));
        }
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= stale_limit {
                break;
            }
        }
    }
    to_subset(cache, &best.0, best.1)
}

/// (feature index, score) pairs, descending score, ties by ascending index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatures {
    pub entries: Vec<(usize, f64)>,
}

impl RankedFeatures {
    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }
}

/// Raw per-feature scores against the class, in column order.
pub fn score_features(table: &DiscreteTable, scorer: Scorer) -> Vec<(usize, f64)> {
    (0..table.n_features())
        .into_par_iter()
        .map(|j| (table.feature_ids()[j], scorer.score(&column_vs_class(table, j))))
        .collect()
}

fn threshold_ranking(scores: &[(usize, f64)], alpha: f64, keep: impl Fn(usize) -> bool) -> RankedFeatures {
    let max = scores.iter().map(|s| s.1).fold(0.0, f64::max);
    if max <= 0.0 {
        return RankedFeatures { entries: Vec::new() };
    }
    let mut entries: Vec<(usize, f64)> = scores
        .iter()
        .copied()
        .filter(|&(f, s)| keep(f) && s / max >= alpha)
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    RankedFeatures { entries }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// Keeps features whose score divided by the best score is at least `alpha`.
pub fn rank_threshold(table: &DiscreteTable, scorer: Scorer, alpha: f64) -> Result<RankedFeatures> {
    check_alpha(alpha)?;
    let scores = score_features(table, scorer);
    Ok(threshold_ranking(&scores, alpha, |_| true))
}

/// CFS greedy subset, then information-gain ranking over the remaining
/// features. The IG threshold is relative to the best IG over all features.
pub fn hybrid_select(table: &DiscreteTable, alpha: f64) -> Result<(FeatureSubset, RankedFeatures)> {
    check_alpha(alpha)?;
    let cfs = greedy_forward_search(table);
    let scores = score_features(table, Scorer::InfoGain);
    let extra = threshold_ranking(&scores, alpha, |f| !cfs.indices.contains(&f));
    let mut indices = cfs.indices.clone();
    indices.extend(extra.indices());
    indices.sort_unstable();
    Ok((
        FeatureSubset {
            indices,
            merit: cfs.merit,
        },
        extra,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionKind {
    CfsGreedy,
    CfsBestfirst,
    Ig,
    Gainratio,
    Correlation,
    Hybrid,
    /// Keep every feature.
    All,
}

impl SelectionKind {
    pub const ALL: [SelectionKind; 7] = [
        SelectionKind::CfsGreedy,
        SelectionKind::CfsBestfirst,
        SelectionKind::Ig,
        SelectionKind::Gainratio,
        SelectionKind::Correlation,
        SelectionKind::Hybrid,
        SelectionKind::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionKind::CfsGreedy => "cfs-greedy",
            SelectionKind::CfsBestfirst => "cfs-bestfirst",
            SelectionKind::Ig => "ig",
            SelectionKind::Gainratio => "gainratio",
            SelectionKind::Correlation => "correlation",
            SelectionKind::Hybrid => "hybrid",
            SelectionKind::All => "all",
        }
    }

    /// Threshold used when none is configured.
    pub fn default_alpha(self) -> Option<f64> {
        match self {
            SelectionKind::Ig | SelectionKind::Correlation => Some(0.3),
            SelectionKind::Gainratio => Some(0.2),
            SelectionKind::Hybrid => Some(0.5),
            _ => None,
        }
    }
}

impl fmt::Display for SelectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SelectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown selection method `{s}`")))
    }
}

/// Serializable outcome of one selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: SelectionKind,
    pub alpha: Option<f64>,
    pub search: Option<String>,
    /// Ascending for subset methods, descending score for rankers.
    pub features: Vec<usize>,
    /// Ranker scores aligned with `features` (for the hybrid: the IG-added
    /// features only).
    pub scores: Vec<f64>,
    pub merit: Option<f64>,
}

impl SelectionResult {
    pub fn sorted_features(&self) -> Vec<usize> {
        let mut f = self.features.clone();
        f.sort_unstable();
        f
    }
}

pub fn run_selection(table: &DiscreteTable, method: SelectionKind, alpha: Option<f64>) -> Result<SelectionResult> {
    let alpha = alpha.or(method.default_alpha());
    let ranked = |scorer| -> Result<SelectionResult> {
        let r = rank_threshold(table, scorer, alpha.expect("rankers have a default alpha"))?;
        Ok(SelectionResult {
            method,
            alpha,
            search: Some("ranker".into()),
            features: r.indices(),
            scores: r.entries.iter().map(|e| e.1).collect(),
            merit: None,
        })
    };
    match method {
        SelectionKind::CfsGreedy | SelectionKind::CfsBestfirst => {
            let (subset, search) = if method == SelectionKind::CfsGreedy {
                (greedy_forward_search(table), "greedy-forward")
            } else {
                (best_first_search(table), "best-first")
            };
            Ok(SelectionResult {
                method,
                alpha: None,
                search: Some(search.into()),
                features: subset.indices,
                scores: Vec::new(),
                merit: subset.merit,
            })
        }
        SelectionKind::Ig => ranked(Scorer::InfoGain),
        SelectionKind::Gainratio => ranked(Scorer::GainRatio),
        SelectionKind::Correlation => ranked(Scorer::SymmetricalUncertainty),
        SelectionKind::Hybrid => {
            let (subset, extra) = hybrid_select(table, alpha.expect("hybrid has a default alpha"))?;
            Ok(SelectionResult {
                method,
                alpha,
                search: Some("greedy-forward+ranker".into()),
                features: subset.indices,
                scores: extra.entries.iter().map(|e| e.1).collect(),
                merit: subset.merit,
            })
        }
        SelectionKind::All => Ok(SelectionResult {
            method,
            alpha: None,
            search: None,
            features: table.feature_ids().to_vec(),
            scores: Vec::new(),
            merit: None,
        }),
    }
}
