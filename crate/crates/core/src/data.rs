//! NSL-KDD record ingestion, label granularities, stratified folds and
//! distribution-matched sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

/// Ordered feature list. Indices exposed by this type are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

const NSL_KDD_FEATURES: [(&str, FeatureKind); 41] = {
    use FeatureKind::{Continuous as C, Discrete as D};
    [
        ("duration", C),
        ("protocol-type", D),
        ("service", D),
        ("flag", D),
        ("src-bytes", C),
        ("dst-bytes", C),
        ("land", D),
        ("wrong-fragment", C),
        ("urgent", C),
        ("hot", C),
        ("num-failed-logins", C),
        ("logged-in", D),
        ("num-compromised", C),
        ("root-shell", C),
        ("su-attempted", C),
        ("num-root", C),
        ("num-file-creations", C),
        ("num-shells", C),
        ("num-access-files", C),
        ("num-outbound-cmds", C),
        ("is-host-login", D),
        ("is-guest-login", D),
        ("count", C),
        ("srv-count", C),
        ("serror-rate", C),
        ("srv-serror-rate", C),
        ("rerror-rate", C),
        ("srv-rerror-rate", C),
        ("same-srv-rate", C),
        ("diff-srv-rate", C),
        ("srv-diff-host-rate", C),
        ("dst-host-count", C),
        ("dst-host-srv-count", C),
        ("dst-host-same-srv-rate", C),
        ("dst-host-diff-srv-rate", C),
        ("dst-host-same-src-port-rate", C),
        ("dst-host-srv-diff-host-rate", C),
        ("dst-host-serror-rate", C),
        ("dst-host-srv-serror-rate", C),
        ("dst-host-rerror-rate", C),
        ("dst-host-srv-rerror-rate", C),
    ]
};

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("schema needs at least one feature"));
        }
        Ok(Self { features })
    }

    /// The 41-feature NSL-KDD connection schema.
    pub fn nsl_kdd() -> Self {
        Self {
            features: NSL_KDD_FEATURES
                .iter()
                .map(|&(name, kind)| FeatureSpec {
                    name: name.to_string(),
                    kind,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    /// Panics if `index` is 0 or past the end.
    pub fn feature(&self, index: usize) -> &FeatureSpec {
        &self.features[index - 1]
    }

    pub fn continuous_indices(&self) -> Vec<usize> {
        self.indices_of(FeatureKind::Continuous)
    }

    pub fn discrete_indices(&self) -> Vec<usize> {
        self.indices_of(FeatureKind::Discrete)
    }

    fn indices_of(&self, kind: FeatureKind) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == kind)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Same names, every feature marked discrete.
    pub fn all_discrete(&self) -> Self {
        Self {
            features: self
                .features
                .iter()
                .map(|f| FeatureSpec {
                    name: f.name.clone(),
                    kind: FeatureKind::Discrete,
                })
                .collect(),
        }
    }

    pub fn same_names(&self, other: &FeatureSchema) -> bool {
        self.len() == other.len() && self.features.iter().zip(&other.features).all(|(a, b)| a.name == b.name)
    }
}

/// Attack category of the four-way NSL-KDD taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Dos,
    Probe,
    R2L,
    U2R,
}

impl Category {
    pub fn label(self) -> &'static str {
        match self {
            Category::Dos => "Dos",
            Category::Probe => "Probe",
            Category::R2L => "R2L",
            Category::U2R => "U2R",
        }
    }
}

pub const NORMAL: &str = "normal";

/// Attack name, record count in the 62984-record extraction, and category.
pub const ATTACKS: [(&str, usize, Category); 22] = [
    ("land", 6, Category::Dos),
    ("neptune", 20750, Category::Dos),
    ("smurf", 1327, Category::Dos),
    ("pod", 87, Category::Dos),
    ("back", 502, Category::Dos),
    ("teardrop", 437, Category::Dos),
    ("portsweep", 1489, Category::Probe),
    ("ipsweep", 1814, Category::Probe),
    ("satan", 1829, Category::Probe),
    ("nmap", 743, Category::Probe),
    ("multihop", 5, Category::R2L),
    ("spy", 1, Category::R2L),
    ("phf", 3, Category::R2L),
    ("warezclient", 469, Category::R2L),
    ("guess_passwd", 27, Category::R2L),
    ("ftp_write", 4, Category::R2L),
    ("warezmaster", 13, Category::R2L),
    ("imap", 6, Category::R2L),
    ("buffer_overflow", 17, Category::U2R),
    ("loadmodule", 3, Category::U2R),
    ("perl", 1, Category::U2R),
    ("rootkit", 7, Category::U2R),
];

/// Normal records needed on top of the attack counts to reach 62984.
pub const EXTRACT_NORMAL_COUNT: usize = 33444;

pub fn attack_category(label: &str) -> Option<Category> {
    ATTACKS.iter().find(|(name, _, _)| *name == label).map(|&(_, _, c)| c)
}

/// Target histogram of the 62984-record extraction: every attack count plus
/// `normal` records.
pub fn extract_target_counts(normal: usize) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = ATTACKS.iter().map(|&(name, n, _)| (name.to_string(), n)).collect();
    counts.insert(NORMAL.to_string(), normal);
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// `normal` plus the 22 individual attacks.
    Attack23,
    /// `normal` plus Dos, Probe, R2L, U2R.
    Category5,
}

impl Granularity {
    /// Declared label order; used for tie-breaking and report layout.
    pub fn labels(self) -> Vec<&'static str> {
        match self {
            Granularity::Attack23 => std::iter::once(NORMAL)
                .chain(ATTACKS.iter().map(|(n, _, _)| *n))
                .collect(),
            Granularity::Category5 => vec![NORMAL, "Dos", "Probe", "R2L", "U2R"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Attack23 => "attack23",
            Granularity::Category5 => "category5",
        }
    }
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attack23" => Ok(Granularity::Attack23),
            "category5" => Ok(Granularity::Category5),
            other => Err(Error::invalid(format!("unknown granularity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Sym(Arc<str>),
}

impl Value {
    pub fn sym(s: &str) -> Self {
        Value::Sym(Arc::from(s))
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            Value::Sym(_) => None,
        }
    }

    pub fn as_sym(&self) -> Option<&Arc<str>> {
        match self {
            Value::Sym(s) => Some(s),
            Value::Num(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub values: Vec<Value>,
    pub label: String,
    pub weight: f64,
}

impl Record {
    pub fn new(values: Vec<Value>, label: impl Into<String>) -> Self {
        Self {
            values,
            label: label.into(),
            weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    records: Vec<Record>,
    granularity: Granularity,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, records: Vec<Record>, granularity: Granularity) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            check_record(&schema, r).map_err(|message| Error::SchemaMismatch(format!("record {i}: {message}")))?;
        }
        if granularity == Granularity::Category5 {
            let declared = granularity.labels();
            if let Some(r) = records.iter().find(|r| !declared.contains(&r.label.as_str())) {
                return Err(Error::UnknownLabel(r.label.clone()));
            }
        }
        Ok(Self {
            schema,
            records,
            granularity,
        })
    }

    pub(crate) fn from_parts_unchecked(schema: FeatureSchema, records: Vec<Record>, granularity: Granularity) -> Self {
        Self {
            schema,
            records,
            granularity,
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn label_histogram(&self) -> BTreeMap<String, usize> {
        let mut hist = BTreeMap::new();
        for r in &self.records {
            *hist.entry(r.label.clone()).or_insert(0) += 1;
        }
        hist
    }

    /// Declared labels of the granularity, followed by any undeclared labels
    /// present in the data (sorted).
    pub fn label_set(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.granularity.labels().iter().map(|s| s.to_string()).collect();
        let extra: Vec<String> = self
            .label_histogram()
            .into_keys()
            .filter(|l| !labels.contains(l))
            .collect();
        labels.extend(extra);
        labels
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: rows.iter().map(|&i| self.records[i].clone()).collect(),
            granularity: self.granularity,
        }
    }

    /// True when every feature is marked discrete.
    pub fn is_fully_discrete(&self) -> bool {
        self.schema.continuous_indices().is_empty()
    }

    /// Writes records in NSL-KDD line format (41 values, label; no
    /// difficulty column).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::new();
        for r in &self.records {
            line.clear();
            for v in &r.values {
                use std::fmt::Write as _;
                let _ = write!(line, "{v},");
            }
            line.push_str(&r.label);
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

fn check_record(schema: &FeatureSchema, r: &Record) -> std::result::Result<(), String> {
    if r.values.len() != schema.len() {
        return Err(format!("expected {} values, found {}", schema.len(), r.values.len()));
    }
    if !(r.weight.is_finite() && r.weight >= 0.0) {
        return Err(format!("weight {} is not a finite non-negative number", r.weight));
    }
    for (i, (v, spec)) in r.values.iter().zip(schema.features()).enumerate() {
        match (v, spec.kind) {
            (Value::Num(x), FeatureKind::Continuous) if x.is_finite() => {}
            (Value::Num(x), FeatureKind::Continuous) => {
                return Err(format!("feature {} has non-finite value {x}", i + 1))
            }
            (Value::Sym(_), FeatureKind::Discrete) => {}
            _ => return Err(format!("feature {} ({}) has the wrong value kind", i + 1, spec.name)),
        }
    }
    Ok(())
}

/// Parses comma-separated NSL-KDD lines. A trailing difficulty column is
/// accepted and dropped. Blank lines are skipped.
pub fn parse_records<R: BufRead>(reader: R, schema: &FeatureSchema) -> Result<Dataset> {
    let n = schema.len();
    let mut records = Vec::new();
    // Discrete symbols repeat heavily; share one allocation per distinct value.
    let mut interned: std::collections::HashMap<String, Arc<str>> = std::collections::HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 1 && fields.len() != n + 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} or {} fields, found {}", n + 1, n + 2, fields.len()),
            });
        }
        let mut values = Vec::with_capacity(n);
        for (i, (raw, spec)) in fields[..n].iter().zip(schema.features()).enumerate() {
            let raw = raw.trim();
            let value = match spec.kind {
                FeatureKind::Continuous => {
                    let x: f64 = raw.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("feature {} ({}): `{raw}` is not a number", i + 1, spec.name),
                    })?;
                    if !x.is_finite() {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("feature {} ({}): `{raw}` is not finite", i + 1, spec.name),
                        });
                    }
                    Value::Num(x)
                }
                FeatureKind::Discrete => {
                    let sym = match interned.get(raw) {
                        Some(s) => s.clone(),
                        None => {
                            let s: Arc<str> = Arc::from(raw);
                            interned.insert(raw.to_string(), s.clone());
                            s
                        }
                    };
                    Value::Sym(sym)
                }
            };
            values.push(value);
        }
        let label = fields[n].trim();
        if label.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty label".into(),
            });
        }
        records.push(Record::new(values, label));
    }
    Ok(Dataset::from_parts_unchecked(
        schema.clone(),
        records,
        Granularity::Attack23,
    ))
}

/// Maps attack labels to their category. Record order, values and weights are
/// preserved.
pub fn map_labels(ds: &Dataset, target: Granularity) -> Result<Dataset> {
    match (ds.granularity, target) {
        (a, b) if a == b => Ok(ds.clone()),
        (Granularity::Category5, Granularity::Attack23) => Err(Error::invalid(
            "cannot refine category labels back to individual attacks",
        )),
        _ => {
            let mut records = Vec::with_capacity(ds.len());
            for r in &ds.records {
                let label = if r.label == NORMAL {
                    NORMAL
                } else {
                    attack_category(&r.label)
                        .ok_or_else(|| Error::UnknownLabel(r.label.clone()))?
                        .label()
                };
                records.push(Record {
                    values: r.values.clone(),
                    label: label.to_string(),
                    weight: r.weight,
                });
            }
            Ok(Dataset::from_parts_unchecked(ds.schema.clone(), records, target))
        }
    }
}

/// Per-record fold assignment for k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified fold plan: each class is shuffled with a seeded generator and
/// dealt round-robin, continuing the deal across classes so fold sizes also
/// differ by at most one.
pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count must be at least 2, got {k}")));
    }
    if ds.is_empty() {
        return Err(Error::invalid("cannot build folds for an empty dataset"));
    }
    if k > ds.len() {
        return Err(Error::invalid(format!(
            "fold count {k} exceeds record count {}",
            ds.len()
        )));
    }
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.records.iter().enumerate() {
        by_label.entry(r.label.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; ds.len()];
    let mut dealt = 0usize;
    for indices in by_label.values_mut() {
        indices.shuffle(&mut rng);
        for &i in indices.iter() {
            assignments[i] = dealt % k;
            dealt += 1;
        }
    }
    Ok(FoldPlan { k, seed, assignments })
}

/// Which records a distribution-matched sample kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub seed: u64,
    pub target_counts: BTreeMap<String, usize>,
    /// Indices into the source dataset, ascending.
    pub selected: Vec<usize>,
}

pub fn sample_manifest(ds: &Dataset, target_counts: &BTreeMap<String, usize>, seed: u64) -> Result<SampleManifest> {
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.records.iter().enumerate() {
        by_label.entry(r.label.as_str()).or_default().push(i);
    }
    for (label, &want) in target_counts {
        let available = by_label.get(label.as_str()).map_or(0, Vec::len);
        if want > available {
            return Err(Error::Shortfall {
                label: label.clone(),
                requested: want,
                available,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    for (label, &want) in target_counts {
        if want == 0 {
            continue;
        }
        let pool = &by_label[label.as_str()];
        let picks = rand::seq::index::sample(&mut rng, pool.len(), want);
        selected.extend(picks.iter().map(|p| pool[p]));
    }
    selected.sort_unstable();
    Ok(SampleManifest {
        seed,
        target_counts: target_counts.clone(),
        selected,
    })
}

/// Uniform per-label sample without replacement whose label histogram equals
/// `target_counts` exactly. Kept records stay in source order.
pub fn match_distribution(ds: &Dataset, target_counts: &BTreeMap<String, usize>, seed: u64) -> Result<Dataset> {
    let manifest = sample_manifest(ds, target_counts, seed)?;
    Ok(ds.select_rows(&manifest.selected))
}
