use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bloomcast::data::{
    build_windows, impute_all, parse_bloom_csv, parse_temperature_csv, DailyRecord, Dataset, FeatureMode,
    TemperatureSeries, WindowConfig,
};
use bloomcast::imbalance::{class_weights, smote_oversample};
use bloomcast::lstm::LstmModel;
use bloomcast::metrics::{evaluate as eval_report, EvalReport, ScoreTable};
use bloomcast::svm::{train_ovo, KernelSpec, OvoModel, Regime};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::config::{ModelKind, RunConfig};
use crate::error::{CliError, Context};

const ARTIFACT_FORMAT: &str = "bloomcast-run";
const ARTIFACT_VERSION: u32 = 1;

/// A trained model together with what is needed to feed it.
#[derive(Serialize, Deserialize)]
struct Artifact {
    format: String,
    version: u32,
    config_hash: String,
    kind: ModelKind,
    regime: Regime,
    window: WindowConfig,
    model: Box<RawValue>,
}

enum Trained {
    Svm(OvoModel),
    Lstm(LstmModel),
}

impl Trained {
    fn predict(&self, x: &[f64]) -> bloomcast::Result<usize> {
        match self {
            Trained::Svm(m) => m.predict(x),
            Trained::Lstm(m) => m.predict(x),
        }
    }

    /// One score per entry of `score_classes`.
    fn scores(&self, x: &[f64]) -> bloomcast::Result<Vec<f64>> {
        match self {
            Trained::Svm(m) => m.scores(x),
            Trained::Lstm(m) => Ok(m.probabilities(x)?.to_vec()),
        }
    }

    fn score_classes(&self) -> Vec<usize> {
        match self {
            Trained::Svm(m) => m.classes.clone(),
            Trained::Lstm(m) => (0..m.hyper.n_classes).collect(),
        }
    }

    fn feature_len(&self) -> usize {
        match self {
            Trained::Svm(m) => m.feature_len,
            Trained::Lstm(m) => m.feature_len,
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

#[derive(Serialize)]
struct DataSummary {
    temperature_sha256: String,
    bloom_sha256: String,
    records: usize,
    tavg_imputed: usize,
    records_dropped: usize,
    bloom_years_without_temperature: Vec<i32>,
    samples: usize,
}

struct Prepared {
    dataset: Dataset,
    summary: DataSummary,
}

fn load_temperatures(config: &RunConfig) -> Result<(Vec<DailyRecord>, usize, usize), CliError> {
    let path = &config.data.temperature;
    let raw = parse_temperature_csv(path, &config.data.columns)
        .context(|| format!("reading {}", path.display()))?;
    let missing_tavg = raw.iter().filter(|r| r.tavg.is_none()).count();
    let (records, dropped) = impute_all(&raw);
    if dropped > 0 {
        log::warn!("{dropped} day(s) had no usable temperature and were dropped");
    }
    Ok((records, missing_tavg - dropped, dropped))
}

fn prepare(config: &RunConfig) -> Result<Prepared, CliError> {
    let (records, imputed, dropped) = load_temperatures(config)?;
    let bloom_path = &config.data.bloom;
    let events = parse_bloom_csv(bloom_path).context(|| format!("reading {}", bloom_path.display()))?;
    let windowed = build_windows(&records, &events, &config.window_config()).context(|| "building windows".into())?;
    let summary = DataSummary {
        temperature_sha256: file_sha256(&config.data.temperature)?,
        bloom_sha256: file_sha256(bloom_path)?,
        records: records.len(),
        tavg_imputed: imputed,
        records_dropped: dropped,
        bloom_years_without_temperature: windowed.skipped_years,
        samples: windowed.dataset.len(),
    };
    Ok(Prepared {
        dataset: windowed.dataset,
        summary,
    })
}

fn split(dataset: &Dataset, [first, last]: [i32; 2], what: &str) -> Result<Dataset, CliError> {
    let part = dataset.select_years(first, last);
    if part.is_empty() {
        return Err(CliError::Incompatible(format!(
            "{what} years {first}..={last} yield no samples"
        )));
    }
    Ok(part)
}

#[derive(Serialize)]
struct TrainLog<'a> {
    config_hash: &'a str,
    model: ModelKind,
    regime: Regime,
    window: WindowConfig,
    train_years: [i32; 2],
    data: DataSummary,
    train_samples: usize,
    class_counts: &'a BTreeMap<usize, usize>,
    preprocessing: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_weights: Option<BTreeMap<usize, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    resampled_class_counts: Option<BTreeMap<usize, usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    svm: Option<SvmLog>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lstm: Option<LstmLog>,
}

#[derive(Serialize)]
struct SvmLog {
    c: f64,
    gamma: f64,
    gamma_source: &'static str,
    sub_classifiers: usize,
    support_vectors: usize,
}

#[derive(Serialize)]
struct LstmLog {
    epochs: usize,
    final_loss: Option<f64>,
    input_mean: f64,
    input_scale: f64,
}

/// Trains the configured model (or the SVM under `regime_override`) and
/// writes `model.json`, `train_log.json` and, for the LSTM, `loss_trace.csv`
/// into `out`.
pub fn train(config: &RunConfig, out: &Path, regime_override: Option<Regime>) -> Result<PathBuf, CliError> {
    let kind = if regime_override.is_some() { ModelKind::Svm } else { config.model.kind };
    let regime = regime_override.unwrap_or(config.model.regime);
    let prepared = prepare(config)?;
    let train_set = split(&prepared.dataset, config.split.train_years, "train")?;
    log::info!(
        "training {} ({}) on {} samples, classes {:?}",
        kind.name(),
        regime.name(),
        train_set.len(),
        train_set.class_counts
    );
    create_dir(out)?;

    let mut preprocessing = vec![
        "missing tavg imputed as (tmax + tmin) / 2".to_string(),
        format!(
            "{} features over {}-day windows, horizon {}",
            match config.window.mode {
                FeatureMode::Raw => "raw",
                FeatureMode::Stats => "summary-statistic",
            },
            config.window.window_len,
            config.window.k
        ),
    ];
    let mut weights = None;
    let mut resampled = None;
    let mut svm_log = None;
    let mut lstm_log = None;
    let smote_neighbors = match kind {
        ModelKind::Svm => config.svm.smote_neighbors,
        ModelKind::Lstm => config.lstm.smote_neighbors,
    };
    match regime {
        Regime::Ordinary => preprocessing.push("no imbalance correction".into()),
        Regime::Weighted => {
            let w = class_weights(&train_set.class_counts).context(|| "class weights".into())?;
            preprocessing.push("per-class penalty C * n / (k * n_j)".into());
            weights = Some(w.weights);
        }
        Regime::Oversampled => {
            let max = train_set.class_counts.values().copied().max().unwrap_or(0);
            preprocessing.push(format!("SMOTE with {smote_neighbors} neighbor(s), seed {}", config.seed));
            resampled = Some(train_set.class_counts.keys().map(|&c| (c, max)).collect());
        }
    }

    let model_json = match kind {
        ModelKind::Svm => {
            let (kernel, source) = match config.svm.gamma {
                Some(g) => (KernelSpec::new(g).context(|| "svm.gamma".into())?, "config"),
                None => (KernelSpec::scaled_default(&train_set), "1 / (feature_len * variance)"),
            };
            let model = train_ovo(&train_set, &config.ovo_config(kernel, regime))
                .context(|| format!("training SVM ({})", regime.name()))?;
            svm_log = Some(SvmLog {
                c: config.svm.c,
                gamma: kernel.gamma,
                gamma_source: source,
                sub_classifiers: model.pairs.len(),
                support_vectors: model.pairs.iter().map(|p| p.support.len()).sum(),
            });
            model.to_json().context(|| "serializing model".into())?
        }
        ModelKind::Lstm => {
            let data = match regime {
                Regime::Oversampled => smote_oversample(&train_set, config.seed, smote_neighbors)
                    .context(|| "SMOTE".into())?,
                _ => train_set.clone(),
            };
            preprocessing.push("inputs standardized by training mean and deviation".into());
            let hyper = config.lstm_hyper();
            let (model, trace) = LstmModel::fit(&data, &hyper).context(|| "training LSTM".into())?;
            let mut csv = String::from("epoch,loss\n");
            for (e, loss) in trace.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", e + 1, loss));
            }
            write(&out.join("loss_trace.csv"), csv)?;
            lstm_log = Some(LstmLog {
                epochs: hyper.epochs,
                final_loss: trace.last().copied(),
                input_mean: model.scaler.mean,
                input_scale: model.scaler.scale,
            });
            model.to_json().context(|| "serializing model".into())?
        }
    };

    let artifact = Artifact {
        format: ARTIFACT_FORMAT.into(),
        version: ARTIFACT_VERSION,
        config_hash: config.hash().into(),
        kind,
        regime,
        window: config.window_config(),
        model: RawValue::from_string(model_json).expect("model JSON is valid"),
    };
    let model_path = out.join("model.json");
    write(&model_path, serde_json::to_string(&artifact).expect("artifact serializes"))?;

    let log = TrainLog {
        config_hash: config.hash(),
        model: kind,
        regime,
        window: config.window_config(),
        train_years: config.split.train_years,
        data: prepared.summary,
        train_samples: train_set.len(),
        class_counts: &train_set.class_counts,
        preprocessing,
        class_weights: weights,
        resampled_class_counts: resampled,
        svm: svm_log,
        lstm: lstm_log,
    };
    write(&out.join("train_log.json"), to_json(&log))?;
    log::info!("model written to {}", model_path.display());
    Ok(model_path)
}

fn load_artifact(path: &Path, config: &RunConfig) -> Result<(Artifact, Trained), CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let artifact: Artifact = serde_json::from_str(&text)
        .map_err(bloomcast::Error::from)
        .context(|| format!("reading model {}", path.display()))?;
    if artifact.format != ARTIFACT_FORMAT || artifact.version != ARTIFACT_VERSION {
        return Err(CliError::Incompatible(format!(
            "{} is a `{}` v{} file, expected `{ARTIFACT_FORMAT}` v{ARTIFACT_VERSION}",
            path.display(),
            artifact.format,
            artifact.version
        )));
    }
    let window = config.window_config();
    if artifact.window != window {
        return Err(CliError::Incompatible(format!(
            "model was trained on {:?} but the config asks for {:?}",
            artifact.window, window
        )));
    }
    let inner = artifact.model.get();
    let model = match artifact.kind {
        ModelKind::Svm => Trained::Svm(OvoModel::from_json(inner).context(|| "loading SVM".into())?),
        ModelKind::Lstm => Trained::Lstm(LstmModel::from_json(inner).context(|| "loading LSTM".into())?),
    };
    if model.feature_len() != window.feature_len() {
        return Err(CliError::Incompatible(format!(
            "model expects {} features, the config yields {}",
            model.feature_len(),
            window.feature_len()
        )));
    }
    if artifact.config_hash != config.hash() {
        log::warn!(
            "model was trained under config {}, current config is {}",
            artifact.config_hash,
            config.hash()
        );
    }
    Ok((artifact, model))
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    config_hash: &'a str,
    model_config_hash: &'a str,
    model: ModelKind,
    regime: Regime,
    test_years: [i32; 2],
    #[serde(flatten)]
    report: &'a EvalReport,
    /// Area under each written PR curve.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pr_auc: BTreeMap<usize, f64>,
}

/// Summary of one evaluation.
pub struct Evaluation {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores the model on the test years and writes `metrics.json`,
/// `confusion_matrix.csv` and `pr_curve_class_<c>.csv` files into `out`.
pub fn evaluate(config: &RunConfig, model_path: &Path, out: &Path, pr_curves: bool) -> Result<Evaluation, CliError> {
    let (artifact, model) = load_artifact(model_path, config)?;
    let prepared = prepare(config)?;
    let test = split(&prepared.dataset, config.split.test_years, "test")?;
    let with_pr = pr_curves || artifact.kind == ModelKind::Svm;

    let y_true = test.labels();
    let mut y_pred = Vec::with_capacity(test.len());
    let mut rows = Vec::new();
    for s in &test.samples {
        y_pred.push(model.predict(&s.features).context(|| "predicting".into())?);
        if with_pr {
            rows.push(model.scores(&s.features).context(|| "scoring".into())?);
        }
    }
    let classes = model.score_classes();
    let table = with_pr.then(|| ScoreTable {
        classes: &classes,
        rows: &rows,
    });
    let mut report = eval_report(&y_true, &y_pred, test.n_classes(), table).context(|| "evaluating".into())?;
    create_dir(out)?;

    let mut pr_auc = BTreeMap::new();
    for c in report.pr_curves.take().unwrap_or_default() {
        write(&out.join(format!("pr_curve_class_{}.csv", c.class)), c.curve.to_csv())?;
        pr_auc.insert(c.class, c.curve.auc);
    }
    write(&out.join("confusion_matrix.csv"), report.confusion.to_csv())?;
    let metrics = MetricsFile {
        config_hash: config.hash(),
        model_config_hash: &artifact.config_hash,
        model: artifact.kind,
        regime: artifact.regime,
        test_years: config.split.test_years,
        report: &report,
        pr_auc,
    };
    write(&out.join("metrics.json"), to_json(&metrics))?;
    log::info!(
        "accuracy {:.2}%, macro precision {:.3}, recall {:.3}, F1 {:.3} over {} samples",
        report.accuracy,
        report.precision,
        report.recall,
        report.f1,
        report.n_samples
    );
    Ok(Evaluation {
        accuracy: report.accuracy,
        precision: report.precision,
        recall: report.recall,
        f1: report.f1,
    })
}

/// Human-readable meaning of a class under horizon `k`.
pub fn interpret(class: usize, k: usize) -> String {
    match class {
        0 => format!("peak bloom more than {k} days away"),
        1 => "peak bloom in 1 day".into(),
        d => format!("peak bloom in {d} days"),
    }
}

/// Classifies the window ending on `date`.
pub fn predict(config: &RunConfig, model_path: &Path, date: NaiveDate) -> Result<(usize, String), CliError> {
    let (artifact, model) = load_artifact(model_path, config)?;
    let (records, _, _) = load_temperatures(config)?;
    let series = TemperatureSeries::new(&records);
    let features = series
        .window_features(date, &artifact.window)
        .map_err(CliError::MissingDays)?;
    let class = model.predict(&features).context(|| "predicting".into())?;
    Ok((class, interpret(class, artifact.window.k)))
}

/// Trains and evaluates the SVM under every regime, one subdirectory each,
/// and writes `comparison.csv` into `out`.
pub fn report(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut csv = String::from("regime,accuracy,precision,recall,f1\n");
    for regime in Regime::ALL {
        let dir = out.join(regime.name());
        let model = train(config, &dir, Some(regime))?;
        let e = evaluate(config, &model, &dir, true)?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            regime.name(),
            e.accuracy,
            e.precision,
            e.recall,
            e.f1
        ));
    }
    write(&out.join("comparison.csv"), csv)
}
