//! Experiment harness: stratified splits, repeated runs with mean/std,
//! pooled confusion matrices, and parameter sweeps.
//!
//! Each run re-splits the corpus, rebuilds the bank from that run's
//! training clips (so no bank audio reaches the test set), featurizes
//! everything, optionally reduces with NMF, trains the configured
//! classifier and scores the held-out clips.

use std::collections::BTreeSet;
use std::io::Write;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::audio_io::CorpusItem;
use crate::bank::build_bank_sized;
use crate::classify::{
    knn_predict, svm_predict, svm_train, LabeledSet, SvmConfig, SvmModel, SvmScheme,
};
use crate::config::{ClassifierKind, PipelineConfig};
use crate::error::{Error, Result};
use crate::featurize::featurize_corpus;
use crate::nmf::{nmf_encode, nmf_fit, NmfConfig};
use crate::seeds::derive_seed;

/// A labeled clip collection ready for evaluation.
#[derive(Debug, Clone)]
pub struct Corpus {
    items: Vec<CorpusItem>,
    n_classes: usize,
    class_names: Vec<String>,
}

impl Corpus {
    pub fn from_items(items: Vec<CorpusItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let n_classes = items.iter().map(|i| i.class_id + 1).max().unwrap();
        let mut class_names = vec![String::new(); n_classes];
        for item in &items {
            if class_names[item.class_id].is_empty() {
                class_names[item.class_id] = item.class_name.clone();
            }
        }
        for (id, name) in class_names.iter_mut().enumerate() {
            if name.is_empty() {
                *name = format!("class_{id:02}");
            }
        }
        Ok(Corpus {
            items,
            n_classes,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn items(&self) -> &[CorpusItem] {
        &self.items
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.class_id).collect()
    }
}

/// Per-class seeded shuffle; the first `ceil(fraction * count)` go to
/// train. Clips whose crops entered the bank are forced into train, with a
/// non-bank train clip of the same class swapped out when possible.
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    fraction: f64,
    seed: u64,
    bank_sources: &BTreeSet<usize>,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(
            "train fraction must be in (0, 1)".into(),
        ));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..n_classes {
        let mut ids: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if ids.len() < 2 {
            return Err(Error::ClassTooSmall {
                class_id: class,
                count: ids.len(),
            });
        }
        // Fisher-Yates with a per-class derived stream.
        let mut rng = crate::seeds::rng_for(seed, "split", class as u64);
        for i in (1..ids.len()).rev() {
            let j = rand::Rng::random_range(&mut rng, 0..=i);
            ids.swap(i, j);
        }
        let n_train = ((fraction * ids.len() as f64).ceil() as usize).min(ids.len());
        let (mut class_train, mut class_test): (Vec<usize>, Vec<usize>) =
            (ids[..n_train].to_vec(), ids[n_train..].to_vec());

        // Force bank sources into train, swapping like-for-like when a
        // non-bank train clip exists.
        let forced: Vec<usize> = class_test
            .iter()
            .copied()
            .filter(|id| bank_sources.contains(id))
            .collect();
        for id in forced {
            class_test.retain(|&t| t != id);
            class_train.push(id);
            if let Some(pos) = class_train.iter().rposition(|t| !bank_sources.contains(t)) {
                let swapped = class_train.remove(pos);
                class_test.push(swapped);
            }
        }
        if class_test.is_empty() {
            return Err(Error::EmptyTestSet { class_id: class });
        }
        train.extend(class_train);
        test.extend(class_test);
    }
    train.sort_unstable();
    test.sort_unstable();
    debug_assert!(train.iter().all(|id| !test.contains(id)));
    Ok((train, test))
}

/// Row = true class, column = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<u64>,
    n_classes: usize,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![0; n_classes * n_classes],
            n_classes,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn add(&mut self, true_class: usize, predicted: usize) {
        self.counts[true_class * self.n_classes + predicted] += 1;
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.n_classes + predicted]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.n_classes, other.n_classes);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|c| self.count(c, c)).sum()
    }

    /// trace / total.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }

    pub fn row_sum(&self, true_class: usize) -> u64 {
        (0..self.n_classes).map(|p| self.count(true_class, p)).sum()
    }

    /// Row-normalized rates; empty rows stay zero.
    pub fn rates(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.counts.len()];
        for t in 0..self.n_classes {
            let sum = self.row_sum(t);
            if sum > 0 {
                for p in 0..self.n_classes {
                    out[t * self.n_classes + p] = self.count(t, p) as f64 / sum as f64;
                }
            }
        }
        out
    }

    /// Row-normalized percentages with 4 decimal places, named header row
    /// and column.
    pub fn write_csv<W: Write>(&self, names: &[String], mut w: W) -> std::io::Result<()> {
        write!(w, "true\\predicted")?;
        for name in names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        let rates = self.rates();
        for t in 0..self.n_classes {
            write!(w, "{}", names[t])?;
            for p in 0..self.n_classes {
                write!(w, ",{:.4}", 100.0 * rates[t * self.n_classes + p])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: serde_json::Value,
    pub classifier: String,
    pub n_classes: usize,
    pub class_names: Vec<String>,
    pub runs: Vec<RunResult>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("bad report: {e}")))
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Anything that maps a feature row to a class id.
trait Predictor {
    fn predict(&self, query: &[f64]) -> Result<usize>;
}

struct KnnPredictor {
    train: LabeledSet,
    k: usize,
}

impl Predictor for KnnPredictor {
    fn predict(&self, query: &[f64]) -> Result<usize> {
        knn_predict(&self.train, query, self.k)
    }
}

struct SvmPredictor {
    model: SvmModel,
}

impl Predictor for SvmPredictor {
    fn predict(&self, query: &[f64]) -> Result<usize> {
        svm_predict(&self.model, query)
    }
}

fn make_predictor(
    cfg: &PipelineConfig,
    train: LabeledSet,
    seed: u64,
) -> Result<Box<dyn Predictor>> {
    match cfg.classifier {
        ClassifierKind::Knn => Ok(Box::new(KnnPredictor {
            train,
            k: cfg.knn_k,
        })),
        ClassifierKind::SvmA => {
            let mut svm_cfg = SvmConfig::new(cfg.svm_a_c, cfg.svm_a_sigma, SvmScheme::OneVsAll);
            svm_cfg.tol = cfg.svm_tol;
            svm_cfg.max_passes = cfg.svm_max_passes;
            svm_cfg.form = cfg.svm_rbf_form;
            let model = svm_train(&train, &svm_cfg, seed)?;
            Ok(Box::new(SvmPredictor { model }))
        }
        ClassifierKind::SvmO => {
            let mut svm_cfg = SvmConfig::new(cfg.svm_o_c, cfg.svm_o_sigma, SvmScheme::OneVsOne);
            svm_cfg.tol = cfg.svm_tol;
            svm_cfg.max_passes = cfg.svm_max_passes;
            svm_cfg.form = cfg.svm_rbf_form;
            let model = svm_train(&train, &svm_cfg, seed)?;
            Ok(Box::new(SvmPredictor { model }))
        }
    }
}

/// z-score both matrices with train-side statistics (used for unbounded
/// NMF codes).
fn standardize(train: &mut Array2<f64>, test: &mut Array2<f64>) {
    let mean = train.mean_axis(Axis(0)).unwrap();
    let mut std = Array1::zeros(train.ncols());
    for (j, s) in std.iter_mut().enumerate() {
        let col = train.column(j);
        let m = mean[j];
        let var: f64 = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len().max(1) as f64;
        *s = var.sqrt().max(1e-12);
    }
    for matrix in [train, test] {
        for mut row in matrix.rows_mut() {
            for j in 0..row.len() {
                row[j] = (row[j] - mean[j]) / std[j];
            }
        }
    }
}

struct RunOutcome {
    accuracy: f64,
    confusion: ConfusionMatrix,
    n_train: usize,
    n_test: usize,
}

type Trainer = dyn Fn(&PipelineConfig, LabeledSet, u64) -> Result<Box<dyn Predictor>> + Sync;

fn one_run(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    bank_size: usize,
    master_seed: u64,
    run: usize,
    trainer: &Trainer,
) -> Result<RunOutcome> {
    let labels = corpus.labels();
    let run_seed = derive_seed(master_seed, "run", run as u64);
    let (train_ids, test_ids) = stratified_split(
        &labels,
        corpus.n_classes(),
        cfg.train_fraction,
        run_seed,
        &BTreeSet::new(),
    )?;

    // Bank from this run's training clips only.
    let train_clips: Vec<(usize, usize, &crate::audio_io::Signal)> = train_ids
        .iter()
        .map(|&i| (i, labels[i], &corpus.items()[i].signal))
        .collect();
    let bank = build_bank_sized(
        &train_clips,
        cfg,
        bank_size,
        derive_seed(master_seed, "bank", run as u64),
    )?;
    debug_assert!(bank.source_clips().iter().all(|id| train_ids.contains(id)));

    // Featurize the whole corpus against the run's bank.
    let signals: Vec<&crate::audio_io::Signal> = corpus.items().iter().map(|i| &i.signal).collect();
    let features = featurize_corpus(&signals, &bank, cfg)?;
    let dim = bank.feature_len();
    let gather = |ids: &[usize]| -> Array2<f64> {
        let mut m = Array2::zeros((ids.len(), dim));
        for (row, &id) in ids.iter().enumerate() {
            for (col, &v) in features[id].values().iter().enumerate() {
                m[[row, col]] = v;
            }
        }
        m
    };
    let mut train_matrix = gather(&train_ids);
    let mut test_matrix = gather(&test_ids);

    if cfg.nmf_enabled {
        let nmf_cfg = NmfConfig {
            rank: cfg.nmf_rank,
            max_iter: cfg.nmf_max_iter,
            rel_tol: cfg.nmf_rel_tol,
            seed: derive_seed(master_seed, "nmf", run as u64),
            epsilon: 1e-12,
        };
        // Samples are columns in the factorization.
        let x_train = train_matrix.t().to_owned();
        let (model, h_train) = nmf_fit(x_train.view(), &nmf_cfg)?;
        let x_test = test_matrix.t().to_owned();
        let h_test = nmf_encode(x_test.view(), &model, &nmf_cfg)?;
        train_matrix = h_train.t().to_owned();
        test_matrix = h_test.t().to_owned();
        if cfg.svm_standardize {
            standardize(&mut train_matrix, &mut test_matrix);
        }
    }

    let train_labels: Vec<usize> = train_ids.iter().map(|&i| labels[i]).collect();
    let train_set = LabeledSet::new(train_matrix, train_labels)?;
    let predictor = trainer(
        cfg,
        train_set,
        derive_seed(master_seed, "classifier", run as u64),
    )?;

    let mut confusion = ConfusionMatrix::new(corpus.n_classes());
    let mut correct = 0usize;
    for (row, &id) in test_ids.iter().enumerate() {
        let query: Vec<f64> = test_matrix.row(row).to_vec();
        let predicted = predictor.predict(&query)?;
        confusion.add(labels[id], predicted);
        if predicted == labels[id] {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / test_ids.len() as f64;
    // Cross-check the two accuracy routes.
    debug_assert!((accuracy - confusion.accuracy()).abs() < 1e-12);
    Ok(RunOutcome {
        accuracy,
        confusion,
        n_train: train_ids.len(),
        n_test: test_ids.len(),
    })
}

fn assemble_report(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    master_seed: u64,
    bank_size: Option<usize>,
    runs: Vec<RunResult>,
    pooled: ConfusionMatrix,
) -> ExperimentReport {
    let accuracies: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    let (mean, std) = mean_std(&accuracies);
    let mut config_echo = cfg.to_dotted_json();
    if let serde_json::Value::Object(map) = &mut config_echo {
        map.insert("seed".into(), master_seed.into());
        if let Some(size) = bank_size {
            map.insert("bank.size".into(), size.into());
        }
    }
    ExperimentReport {
        config: config_echo,
        classifier: cfg.classifier.as_str().to_string(),
        n_classes: corpus.n_classes(),
        class_names: corpus.class_names().to_vec(),
        runs,
        mean_accuracy: mean,
        std_accuracy: std,
        confusion: pooled,
    }
}

fn run_experiment_inner(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    master_seed: u64,
    bank_size: Option<usize>,
    trainer: &Trainer,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let size = bank_size.unwrap_or(corpus.n_classes() * cfg.detectors_per_class);
    let mut runs = Vec::with_capacity(cfg.runs);
    let mut pooled = ConfusionMatrix::new(corpus.n_classes());
    for run in 0..cfg.runs {
        let outcome = one_run(cfg, corpus, size, master_seed, run, trainer).map_err(|e| {
            Error::RunFailed {
                run,
                source: Box::new(e),
            }
        })?;
        pooled.merge(&outcome.confusion);
        runs.push(RunResult {
            run,
            seed: derive_seed(master_seed, "run", run as u64),
            accuracy: outcome.accuracy,
            n_train: outcome.n_train,
            n_test: outcome.n_test,
        });
    }
    Ok(assemble_report(
        cfg,
        corpus,
        master_seed,
        bank_size,
        runs,
        pooled,
    ))
}

/// Run the configured experiment: `cfg.runs` split/build/train/test cycles
/// with derived seeds, pooled into one report.
pub fn run_experiment(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    master_seed: u64,
) -> Result<ExperimentReport> {
    run_experiment_inner(cfg, corpus, master_seed, None, &make_predictor)
}

/// Like [`run_experiment`] with an explicit total bank size (the bank-size
/// sweep can drop below one detector per class).
pub fn run_experiment_with_bank_size(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    master_seed: u64,
    bank_size: usize,
) -> Result<ExperimentReport> {
    run_experiment_inner(cfg, corpus, master_seed, Some(bank_size), &make_predictor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    KnnK,
    TrainFraction,
    BankSize,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "knn-k" | "knn_k" => Ok(SweepAxis::KnnK),
            "train-fraction" | "train_fraction" => Ok(SweepAxis::TrainFraction),
            "bank-size" | "bank_size" => Ok(SweepAxis::BankSize),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep axis {other:?} (expected knn-k, train-fraction or bank-size)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::KnnK => "knn_k",
            SweepAxis::TrainFraction => "train_fraction",
            SweepAxis::BankSize => "bank_size",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: String,
    pub config: serde_json::Value,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Plot-ready table: `axis,value,mean_accuracy,std_accuracy`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "axis,value,mean_accuracy,std_accuracy")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{:.4},{:.4}",
                self.axis, row.value, row.mean_accuracy, row.std_accuracy
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes")
    }
}

/// Run one experiment per axis value with per-value derived seeds; emits a
/// plot-ready table.
pub fn run_sweep(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    master_seed: u64,
    axis: SweepAxis,
    values: &[f64],
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one value".into(),
        ));
    }
    let mut rows = Vec::with_capacity(values.len());
    for (idx, &value) in values.iter().enumerate() {
        let mut run_cfg = cfg.clone();
        let mut bank_size_override = None;
        match axis {
            SweepAxis::KnnK => {
                run_cfg.classifier = ClassifierKind::Knn;
                run_cfg.knn_k = value as usize;
            }
            SweepAxis::TrainFraction => {
                run_cfg.train_fraction = value;
            }
            SweepAxis::BankSize => {
                bank_size_override = Some(value as usize);
            }
        }
        run_cfg.validate()?;
        let seed = derive_seed(master_seed, "sweep", idx as u64);
        let report =
            run_experiment_inner(&run_cfg, corpus, seed, bank_size_override, &make_predictor)?;
        rows.push(SweepRow {
            value,
            mean_accuracy: report.mean_accuracy,
            std_accuracy: report.std_accuracy,
        });
    }
    let mut config_echo = cfg.to_dotted_json();
    if let serde_json::Value::Object(map) = &mut config_echo {
        map.insert("seed".into(), master_seed.into());
    }
    Ok(SweepReport {
        axis: axis.as_str().to_string(),
        config: config_echo,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::{default_corpus_specs, synth_corpus};

    fn tiny_corpus(classes: usize, per_class: usize, seed: u64) -> Corpus {
        let specs: Vec<_> = default_corpus_specs()
            .into_iter()
            .take(classes)
            .map(|mut s| {
                s.duration_range_s = (0.45, 0.55);
                s
            })
            .collect();
        Corpus::from_items(synth_corpus(&specs, &vec![per_class; classes], seed).unwrap()).unwrap()
    }

    fn tiny_cfg() -> PipelineConfig {
        PipelineConfig {
            detector_k: 48,
            detector_t: 24,
            crop_stride_t: 4,
            detectors_per_class: 1,
            runs: 2,
            classifier: ClassifierKind::Knn,
            knn_k: 1,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn split_ceil_arithmetic() {
        let labels: Vec<usize> = vec![0; 10];
        let (train, test) = stratified_split(&labels, 1, 0.6, 1, &BTreeSet::new()).unwrap();
        assert_eq!((train.len(), test.len()), (6, 4));
    }

    #[test]
    fn split_deterministic_and_disjoint() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let a = stratified_split(&labels, 3, 0.6, 7, &BTreeSet::new()).unwrap();
        let b = stratified_split(&labels, 3, 0.6, 7, &BTreeSet::new()).unwrap();
        assert_eq!(a, b);
        let (train, test) = a;
        for id in &train {
            assert!(!test.contains(id));
        }
        assert_eq!(train.len() + test.len(), 30);
        for class in 0..3 {
            assert!(train.iter().any(|&i| labels[i] == class));
            assert!(test.iter().any(|&i| labels[i] == class));
        }
    }

    #[test]
    fn bank_sources_forced_into_train_with_swap() {
        let labels: Vec<usize> = vec![0; 10];
        let (train0, test0) = stratified_split(&labels, 1, 0.6, 3, &BTreeSet::new()).unwrap();
        let bank: BTreeSet<usize> = [test0[0]].into_iter().collect();
        let (train, test) = stratified_split(&labels, 1, 0.6, 3, &bank).unwrap();
        assert!(train.contains(&test0[0]), "bank source must move to train");
        assert_eq!(train.len(), train0.len());
        assert_eq!(test.len(), test0.len());
        // The swapped-out clip is a former train clip.
        let swapped: Vec<usize> = test
            .iter()
            .filter(|id| train0.contains(id))
            .copied()
            .collect();
        assert_eq!(swapped.len(), 1);
    }

    #[test]
    fn forcing_every_clip_errors() {
        let labels: Vec<usize> = vec![0; 4];
        let bank: BTreeSet<usize> = (0..4).collect();
        assert!(matches!(
            stratified_split(&labels, 1, 0.5, 1, &bank),
            Err(Error::EmptyTestSet { class_id: 0 })
        ));
    }

    #[test]
    fn tiny_class_rejected() {
        let labels = vec![0, 0, 0, 0, 0, 1];
        assert!(matches!(
            stratified_split(&labels, 2, 0.6, 1, &BTreeSet::new()),
            Err(Error::ClassTooSmall { class_id: 1, .. })
        ));
    }

    #[test]
    fn confusion_matrix_identities() {
        let mut m = ConfusionMatrix::new(3);
        m.add(0, 0);
        m.add(0, 1);
        m.add(1, 1);
        m.add(2, 2);
        m.add(2, 2);
        assert_eq!(m.total(), 5);
        assert_eq!(m.trace(), 4);
        assert!((m.accuracy() - 0.8).abs() < 1e-15);
        assert_eq!(m.row_sum(0), 2);
        let rates = m.rates();
        assert!((rates[0] - 0.5).abs() < 1e-15);
        let mut csv = Vec::new();
        m.write_csv(
            &["a".to_string(), "b".to_string(), "c".to_string()],
            &mut csv,
        )
        .unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("true\\predicted,a,b,c\n"));
        assert!(text.contains("a,50.0000,50.0000,0.0000"));
    }

    #[test]
    fn degenerate_classifier_scores_exactly_one_over_n() {
        struct Const;
        impl Predictor for Const {
            fn predict(&self, _query: &[f64]) -> Result<usize> {
                Ok(0)
            }
        }
        let corpus = tiny_corpus(3, 4, 5);
        let cfg = tiny_cfg();
        let trainer = |_: &PipelineConfig, _: LabeledSet, _: u64| -> Result<Box<dyn Predictor>> {
            Ok(Box::new(Const))
        };
        let report = run_experiment_inner(&cfg, &corpus, 1, None, &trainer).unwrap();
        // Balanced corpus: every run's test set has equal class counts, so
        // always-0 scores exactly 1/3.
        for run in &report.runs {
            assert!((run.accuracy - 1.0 / 3.0).abs() < 1e-12);
        }
        let per_class_test = report.confusion.row_sum(0);
        for class in 1..3 {
            assert_eq!(report.confusion.row_sum(class), per_class_test);
        }
    }

    #[test]
    fn separable_corpus_knn_is_perfect() {
        // Duplicated per-class templates with only amplitude jitter, which
        // the representation is invariant to: the classes are exactly
        // separable and kNN at k=1 must be perfect with zero spread.
        let specs: Vec<_> = default_corpus_specs()
            .into_iter()
            .take(3)
            .map(|mut s| {
                s.duration_range_s = (0.5, 0.5);
                s.freq_jitter = 0.0;
                s.amp_jitter = 0.4;
                s
            })
            .collect();
        let corpus = Corpus::from_items(synth_corpus(&specs, &[5; 3], 8).unwrap()).unwrap();
        let cfg = tiny_cfg();
        let report = run_experiment(&cfg, &corpus, 42).unwrap();
        assert_eq!(report.runs.len(), 2);
        assert!(
            report.mean_accuracy == 1.0,
            "knn k=1 on duplicated templates: {}",
            report.mean_accuracy
        );
        assert_eq!(report.std_accuracy, 0.0);
        assert!((report.confusion.accuracy() - report.mean_accuracy).abs() < 1e-12);
    }

    #[test]
    fn report_determinism() {
        let corpus = tiny_corpus(2, 4, 2);
        let cfg = tiny_cfg();
        let a = run_experiment(&cfg, &corpus, 9).unwrap();
        let b = run_experiment(&cfg, &corpus, 9).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn sweep_shapes() {
        let corpus = tiny_corpus(2, 4, 3);
        let mut cfg = tiny_cfg();
        cfg.runs = 1;
        let sweep = run_sweep(&cfg, &corpus, 4, SweepAxis::KnnK, &[1.0, 3.0]).unwrap();
        assert_eq!(sweep.rows.len(), 2);
        let mut csv = Vec::new();
        sweep.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("knn_k,1,"));

        let fr = run_sweep(&cfg, &corpus, 4, SweepAxis::TrainFraction, &[0.5, 0.6, 0.7]).unwrap();
        assert_eq!(fr.rows.len(), 3);
    }

    #[test]
    fn bank_size_sweep_supports_subset_banks() {
        let corpus = tiny_corpus(3, 4, 6);
        let mut cfg = tiny_cfg();
        cfg.runs = 1;
        let sweep = run_sweep(&cfg, &corpus, 2, SweepAxis::BankSize, &[2.0, 3.0]).unwrap();
        assert_eq!(sweep.rows.len(), 2);
    }

    #[test]
    fn nmf_arm_runs_end_to_end() {
        let corpus = tiny_corpus(2, 5, 9);
        let mut cfg = tiny_cfg();
        cfg.runs = 1;
        cfg.nmf_enabled = true;
        cfg.nmf_rank = 6;
        cfg.nmf_max_iter = 80;
        let report = run_experiment(&cfg, &corpus, 3).unwrap();
        assert_eq!(report.runs.len(), 1);
        assert!(report.mean_accuracy > 0.5, "{}", report.mean_accuracy);
    }

    #[test]
    fn run_errors_are_annotated() {
        let corpus = tiny_corpus(2, 4, 7);
        let mut cfg = tiny_cfg();
        cfg.knn_k = 50; // more neighbors than training clips
        match run_experiment(&cfg, &corpus, 0) {
            Err(Error::RunFailed { run: 0, .. }) => {}
            other => panic!("expected RunFailed, got {other:?}"),
        }
    }
}
