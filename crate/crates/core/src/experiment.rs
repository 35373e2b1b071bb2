//! End-to-end experiment configuration and drivers: a single pipeline run
//! and the full method grid over both label granularities.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classify::{Classifier, DEFAULT_ROUNDS};
use crate::data::{
    extract_target_counts, map_labels, sample_manifest, Dataset, Granularity, Record, SampleManifest, ATTACKS,
    EXTRACT_NORMAL_COUNT,
};
use crate::discretize::{fit_discretizer, DiscretizationModel};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, EvaluationReport};
use crate::select::{run_selection, SelectionKind, SelectionResult};
use crate::table::DiscreteTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscretizationMode {
    /// Refit cut points on every training split.
    #[default]
    FoldSafe,
    /// Discretize and select once on the whole dataset before CV.
    Leaky,
}

impl DiscretizationMode {
    pub fn name(self) -> &'static str {
        match self {
            DiscretizationMode::FoldSafe => "fold-safe",
            DiscretizationMode::Leaky => "leaky",
        }
    }
}

impl std::str::FromStr for DiscretizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fold-safe" => Ok(DiscretizationMode::FoldSafe),
            "leaky" | "leaky-preprocess" => Ok(DiscretizationMode::Leaky),
            other => Err(Error::invalid(format!("unknown discretization mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub method: SelectionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            method: SelectionKind::Hybrid,
            alpha: None,
        }
    }
}

impl SelectionConfig {
    pub fn effective_alpha(&self) -> Option<f64> {
        self.alpha.or(self.method.default_alpha())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub boost: bool,
    pub rounds: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            boost: true,
            rounds: DEFAULT_ROUNDS,
        }
    }
}

/// The learning part of a pipeline: what cross-validation refits.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelConfig {
    pub discretization: DiscretizationMode,
    pub selection: SelectionConfig,
    pub classifier: ClassifierConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.selection.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::invalid(format!("alpha must lie in [0, 1], got {a}")));
            }
        }
        if self.classifier.rounds == 0 {
            return Err(Error::invalid("boosting rounds must be at least 1"));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let sel = match self.selection.effective_alpha() {
            Some(a) => format!("{}(alpha={a})", self.selection.method),
            None => self.selection.method.to_string(),
        };
        let clf = if self.classifier.boost {
            format!("adaboost-m1(naive-bayes, rounds={})", self.classifier.rounds)
        } else {
            "naive-bayes".to_string()
        };
        format!("{sel} -> {clf}, discretization {}", self.discretization.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { k: 10, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// Use every input record.
    #[default]
    None,
    /// Draw the 62984-record attack distribution plus `normal` records.
    Extract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub mode: SampleMode,
    pub normal: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            mode: SampleMode::None,
            normal: EXTRACT_NORMAL_COUNT,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Full experiment description; serialized as TOML for config files and
/// embedded in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub granularity: Granularity,
    pub sample: SampleConfig,
    pub discretization: DiscretizationMode,
    pub selection: SelectionConfig,
    pub classifier: ClassifierConfig,
    pub cv: CvConfig,
    pub output: OutputConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            granularity: Granularity::Attack23,
            sample: SampleConfig::default(),
            discretization: DiscretizationMode::FoldSafe,
            selection: SelectionConfig::default(),
            classifier: ClassifierConfig::default(),
            cv: CvConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            discretization: self.discretization,
            selection: self.selection,
            classifier: self.classifier,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        if self.cv.k < 2 {
            return Err(Error::invalid(format!(
                "fold count must be at least 2, got {}",
                self.cv.k
            )));
        }
        Ok(())
    }
}

/// Pipeline stage, used to attribute failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Sample,
    LabelMap,
    Discretize,
    Select,
    Train,
    Evaluate,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Sample => "sample",
            Stage::LabelMap => "label-map",
            Stage::Discretize => "discretize",
            Stage::Select => "select",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage.name(), self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Discretizer, feature subset and classifier trained on a full dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub version: u32,
    pub granularity: Granularity,
    pub discretizer: DiscretizationModel,
    pub features: Vec<usize>,
    pub classifier: Classifier,
}

impl TrainedPipeline {
    /// Fits every stage on `ds` (raw or already discrete).
    pub fn fit(
        ds: &Dataset,
        model: &ModelConfig,
        selection: Option<&SelectionResult>,
    ) -> std::result::Result<(Self, SelectionResult), StageError> {
        model.validate().at(Stage::Train)?;
        let discretizer = fit_discretizer(ds);
        let table = DiscreteTable::encode(ds, Some(&discretizer)).at(Stage::Discretize)?;
        let selection = match selection {
            Some(s) => s.clone(),
            None => run_selection(&table, model.selection.method, model.selection.alpha).at(Stage::Select)?,
        };
        let features = selection.sorted_features();
        let classifier = Classifier::train(
            &table.select_features(&features).at(Stage::Train)?,
            model.classifier.boost,
            model.classifier.rounds,
        )
        .at(Stage::Train)?;
        Ok((
            Self {
                version: MODEL_FORMAT_VERSION,
                granularity: ds.granularity(),
                discretizer,
                features,
                classifier,
            },
            selection,
        ))
    }

    /// Predicts the label of a raw (undiscretized) record.
    pub fn predict(&self, record: &Record) -> String {
        let values = record
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| match (v, self.discretizer.cuts_for(j + 1)) {
                (crate::data::Value::Num(x), Some(c)) => crate::data::Value::sym(&c.bin(*x).to_string()),
                _ => v.clone(),
            })
            .collect();
        let binned = Record {
            values,
            label: record.label.clone(),
            weight: record.weight,
        };
        self.classifier.predict(&binned).to_string()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                model.version
            )));
        }
        Ok(model)
    }
}

/// Applies the configured sampling and label granularity to raw data.
pub fn prepare_dataset(
    raw: &Dataset,
    config: &PipelineConfig,
) -> std::result::Result<(Dataset, Option<SampleManifest>), StageError> {
    let (sampled, manifest) = match config.sample.mode {
        SampleMode::None => (raw.clone(), None),
        SampleMode::Extract => {
            let m = sample_manifest(raw, &extract_target_counts(config.sample.normal), config.sample.seed)
                .at(Stage::Sample)?;
            (raw.select_rows(&m.selected), Some(m))
        }
    };
    let mapped = map_labels(&sampled, config.granularity).at(Stage::LabelMap)?;
    Ok((mapped, manifest))
}

pub struct ExperimentOutput {
    pub manifest: Option<SampleManifest>,
    pub selection: SelectionResult,
    pub trained: TrainedPipeline,
    pub report: EvaluationReport,
}

/// Sample → label-map → cross-validate → retrain on everything for
/// deployment. `raw` is the parsed input at attack granularity.
pub fn run_experiment(raw: &Dataset, config: &PipelineConfig) -> std::result::Result<ExperimentOutput, StageError> {
    config.validate().at(Stage::Evaluate)?;
    let (ds, manifest) = prepare_dataset(raw, config)?;
    let model = config.model();
    let report = cross_validate(&ds, &model, config.cv.k, config.cv.seed).at(Stage::Evaluate)?;
    let (trained, selection) = TrainedPipeline::fit(&ds, &model, None)?;
    Ok(ExperimentOutput {
        manifest,
        selection,
        trained,
        report,
    })
}

/// One line of a method-comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub n_features: usize,
    pub f_measure: f64,
    pub fpr: f64,
    pub features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub attack: String,
    pub support: u64,
    pub f_before: f64,
    pub f_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablesOptions {
    pub sample: SampleConfig,
    pub discretization: DiscretizationMode,
    pub cv: CvConfig,
    pub rounds: usize,
    pub ig_alpha: f64,
    pub gain_ratio_alpha: f64,
    pub correlation_alpha: f64,
    pub hybrid_alpha: f64,
}

impl Default for TablesOptions {
    fn default() -> Self {
        Self {
            sample: SampleConfig {
                mode: SampleMode::Extract,
                ..SampleConfig::default()
            },
            discretization: DiscretizationMode::Leaky,
            cv: CvConfig::default(),
            rounds: DEFAULT_ROUNDS,
            ig_alpha: SelectionKind::Ig.default_alpha().expect("ranker"),
            gain_ratio_alpha: SelectionKind::Gainratio.default_alpha().expect("ranker"),
            correlation_alpha: SelectionKind::Correlation.default_alpha().expect("ranker"),
            hybrid_alpha: SelectionKind::Hybrid.default_alpha().expect("ranker"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub options: TablesOptions,
    pub records: usize,
    /// 23-class method comparison, including the boosted proposed method.
    pub attack23: Vec<MethodRow>,
    /// 5-class method comparison.
    pub category5: Vec<MethodRow>,
    /// Per-attack F-measure of the hybrid pipeline without and with boosting.
    pub per_attack: Vec<AttackRow>,
    #[serde(skip)]
    pub reports: Vec<(String, EvaluationReport)>,
}

impl TablesOptions {
    fn grid(&self, boosted_row: bool) -> Vec<(String, ModelConfig)> {
        let nb = ClassifierConfig {
            boost: false,
            rounds: self.rounds,
        };
        let row = |method, alpha: Option<f64>, classifier| ModelConfig {
            discretization: self.discretization,
            selection: SelectionConfig { method, alpha },
            classifier,
        };
        let mut rows = vec![
            ("CFS+BestFirst".to_string(), row(SelectionKind::CfsBestfirst, None, nb)),
            ("CFS+Greedy".to_string(), row(SelectionKind::CfsGreedy, None, nb)),
            (
                format!("Information Gain (alpha={})", self.ig_alpha),
                row(SelectionKind::Ig, Some(self.ig_alpha), nb),
            ),
            (
                format!("Gain Ratio (alpha={})", self.gain_ratio_alpha),
                row(SelectionKind::Gainratio, Some(self.gain_ratio_alpha), nb),
            ),
            (
                format!("Correlation (alpha={})", self.correlation_alpha),
                row(SelectionKind::Correlation, Some(self.correlation_alpha), nb),
            ),
            (
                format!("CFS+IG (alpha={})", self.hybrid_alpha),
                row(SelectionKind::Hybrid, Some(self.hybrid_alpha), nb),
            ),
        ];
        if boosted_row {
            rows.push((
                format!("CFS+IG (alpha={}) AdaBoost.M1", self.hybrid_alpha),
                row(
                    SelectionKind::Hybrid,
                    Some(self.hybrid_alpha),
                    ClassifierConfig {
                        boost: true,
                        rounds: self.rounds,
                    },
                ),
            ));
        }
        rows
    }
}

fn method_row(name: &str, report: &EvaluationReport) -> MethodRow {
    let features = report.descriptor.feature_sets.first().cloned().unwrap_or_default();
    MethodRow {
        method: name.to_string(),
        n_features: features.len(),
        f_measure: report.weighted.f_measure,
        fpr: report.weighted.fpr,
        features,
    }
}

/// Runs the selector comparison at both granularities and the per-attack
/// before/after-boosting breakdown.
pub fn reproduce_tables(raw: &Dataset, options: &TablesOptions) -> std::result::Result<Tables, StageError> {
    let base = PipelineConfig {
        sample: options.sample,
        ..PipelineConfig::default()
    };
    let (attack_ds, _) = prepare_dataset(raw, &base)?;
    let category_ds = map_labels(&attack_ds, Granularity::Category5).at(Stage::LabelMap)?;

    let mut reports = Vec::new();
    let mut run = |ds: &Dataset, grid: Vec<(String, ModelConfig)>| -> std::result::Result<Vec<MethodRow>, StageError> {
        let mut rows = Vec::new();
        for (name, model) in grid {
            let report = cross_validate(ds, &model, options.cv.k, options.cv.seed).at(Stage::Evaluate)?;
            rows.push(method_row(&name, &report));
            reports.push((format!("{} / {name}", ds.granularity().name()), report));
        }
        Ok(rows)
    };
    let attack23 = run(&attack_ds, options.grid(true))?;
    let category5 = run(&category_ds, options.grid(false))?;

    let before = &reports[5].1;
    let after = &reports[6].1;
    let per_attack = ATTACKS
        .iter()
        .map(|&(name, _, _)| {
            let b = before.class(name);
            let a = after.class(name);
            AttackRow {
                attack: name.to_string(),
                support: b.map_or(0, |c| c.support),
                f_before: b.map_or(0.0, |c| c.f_measure),
                f_after: a.map_or(0.0, |c| c.f_measure),
            }
        })
        .collect();

    Ok(Tables {
        options: options.clone(),
        records: attack_ds.len(),
        attack23,
        category5,
        per_attack,
        reports,
    })
}

impl Tables {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let o = &self.options;
        let _ = writeln!(
            out,
            "{} records, {}-fold stratified CV (seed {}), discretization {}, boosting rounds {}",
            self.records,
            o.cv.k,
            o.cv.seed,
            o.discretization.name(),
            o.rounds
        );
        let mut method_table = |title: &str, rows: &[MethodRow]| {
            let _ = writeln!(out, "\n{title}");
            let _ = writeln!(
                out,
                "{:<36} {:>10} {:>10} {:>7}  selected features",
                "method", "#features", "F-measure", "FPR"
            );
            for r in rows {
                let feats: Vec<String> = r.features.iter().map(usize::to_string).collect();
                let _ = writeln!(
                    out,
                    "{:<36} {:>10} {:>9.1}% {:>7.3}  {}",
                    r.method,
                    r.n_features,
                    r.f_measure * 100.0,
                    r.fpr,
                    feats.join(",")
                );
            }
        };
        method_table("Selection methods, 23 classes", &self.attack23);
        method_table("Selection methods, 5 classes", &self.category5);
        let _ = writeln!(
            out,
            "\nPer-attack F-measure, CFS+IG naive Bayes before / after AdaBoost.M1"
        );
        let _ = writeln!(out, "{:<16} {:>8} {:>8} {:>8}", "attack", "support", "before", "after");
        for r in &self.per_attack {
            let _ = writeln!(
                out,
                "{:<16} {:>8} {:>8.3} {:>8.3}",
                r.attack, r.support, r.f_before, r.f_after
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
