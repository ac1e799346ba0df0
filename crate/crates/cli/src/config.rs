//! Run configuration, read from a TOML file.
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/svm"
//!
//! [data]
//! temperature = "data/sample/temperature.csv"
//! bloom = "data/sample/bloom.csv"
//!
//! [window]
//! window_len = 10
//! k = 10
//! mode = "raw"          # raw | stats
//! channels = "tavg"     # tavg | extremes
//!
//! [split]
//! train_years = [1990, 2009]
//! test_years = [2010, 2014]
//!
//! [model]
//! kind = "svm"          # svm | lstm
//! regime = "weighted"   # ordinary | weighted | oversampled
//!
//! [svm]
//! c = 10.0
//! # gamma defaults to 1 / (feature_len * feature variance)
//!
//! [lstm]
//! hidden_size = 30
//! epochs = 30
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use bloomcast::data::{Channels, FeatureMode, TemperatureSchema, WindowConfig};
use bloomcast::lstm::{LstmHyper, Optimizer};
use bloomcast::svm::{KernelSpec, OvoConfig, Regime, SolverConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub data: DataSection,
    #[serde(default)]
    pub window: WindowSection,
    pub split: SplitSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub svm: SvmSection,
    #[serde(default)]
    pub lstm: LstmSection,
    #[serde(skip)]
    hash: String,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub temperature: PathBuf,
    pub bloom: PathBuf,
    #[serde(default)]
    pub columns: TemperatureSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub window_len: usize,
    pub k: usize,
    pub mode: FeatureMode,
    pub channels: Channels,
}

impl Default for WindowSection {
    fn default() -> Self {
        let w = WindowConfig::default();
        WindowSection {
            window_len: w.window_len,
            k: w.k,
            mode: w.mode,
            channels: w.channels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// Inclusive `[first, last]`.
    pub train_years: [i32; 2],
    pub test_years: [i32; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Svm,
    Lstm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Lstm => "lstm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSection {
    pub c: f64,
    /// `None` selects the variance-scaled default.
    pub gamma: Option<f64>,
    pub smote_neighbors: usize,
    pub tol: f64,
    pub max_passes: usize,
    pub cache_mb: f64,
}

impl Default for SvmSection {
    fn default() -> Self {
        let solver = SolverConfig::default();
        SvmSection {
            c: 1.0,
            gamma: None,
            smote_neighbors: 5,
            tol: solver.tol,
            max_passes: solver.max_passes,
            cache_mb: solver.cache_mb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmSection {
    pub num_layers: usize,
    pub input_size: usize,
    pub hidden_size: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub smote_neighbors: usize,
}

impl Default for LstmSection {
    fn default() -> Self {
        let h = LstmHyper::default();
        LstmSection {
            num_layers: h.num_layers,
            input_size: h.input_size,
            hidden_size: h.hidden_size,
            dropout: h.dropout,
            learning_rate: h.learning_rate,
            epochs: h.epochs,
            batch_size: h.batch_size,
            optimizer: h.optimizer,
            smote_neighbors: 5,
        }
    }
}

impl RunConfig {
    /// Reads, resolves relative paths against the file's directory, and
    /// validates.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text).map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.validate()?;
        config.hash = config.digest();
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.data.temperature, &mut self.data.bloom, &mut self.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let [a0, a1] = self.split.train_years;
        let [b0, b1] = self.split.test_years;
        if a0 > a1 || b0 > b1 {
            return Err("year ranges must be [first, last] with first <= last".into());
        }
        if a0 <= b1 && b0 <= a1 {
            return Err(format!("train years {a0}..={a1} overlap test years {b0}..={b1}"));
        }
        self.window_config().validate().map_err(|e| e.to_string())?;
        let s = &self.svm;
        if !(s.c > 0.0 && s.c.is_finite()) {
            return Err(format!("svm.c must be positive, got {}", s.c));
        }
        if let Some(g) = s.gamma {
            KernelSpec::new(g).map_err(|e| e.to_string())?;
        }
        if !(s.tol > 0.0) || s.max_passes == 0 {
            return Err("svm.tol must be positive and svm.max_passes at least 1".into());
        }
        if s.smote_neighbors == 0 || self.lstm.smote_neighbors == 0 {
            return Err("smote_neighbors must be at least 1".into());
        }
        if self.model.kind == ModelKind::Lstm {
            if self.model.regime == Regime::Weighted {
                return Err("the weighted regime applies to the SVM only; use ordinary or oversampled".into());
            }
            let hyper = self.lstm_hyper();
            hyper.validate().map_err(|e| e.to_string())?;
            hyper
                .timesteps(self.window_config().feature_len())
                .map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    pub fn window_config(&self) -> WindowConfig {
        WindowConfig {
            window_len: self.window.window_len,
            k: self.window.k,
            mode: self.window.mode,
            channels: self.window.channels,
        }
    }

    pub fn lstm_hyper(&self) -> LstmHyper {
        let l = &self.lstm;
        LstmHyper {
            num_layers: l.num_layers,
            input_size: l.input_size,
            hidden_size: l.hidden_size,
            dropout: l.dropout,
            n_classes: self.window.k + 1,
            learning_rate: l.learning_rate,
            epochs: l.epochs,
            batch_size: l.batch_size,
            seed: self.seed,
            optimizer: l.optimizer,
        }
    }

    pub fn ovo_config(&self, kernel: KernelSpec, regime: Regime) -> OvoConfig {
        OvoConfig {
            c: self.svm.c,
            kernel,
            regime,
            seed: self.seed,
            smote_neighbors: self.svm.smote_neighbors,
            solver: SolverConfig {
                tol: self.svm.tol,
                max_passes: self.svm.max_passes,
                cache_mb: self.svm.cache_mb,
            },
        }
    }

    /// SHA-256 of the configuration with `output_dir` left out, so the same
    /// run written to two places hashes alike. Paths hash as written in the
    /// file, before resolution.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}
