use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::BlobSpec;
use crate::density_ratio::{ClipBounds, DiscriminatorConfig, WeightMode};
use crate::error::{Error, Result};
use crate::fl::{ClassifierConfig, FederatedMadeConfig, LocalTrainConfig};
use crate::made::MadeTrainConfig;
use crate::nn::SgdConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "FEDDISK_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    Idx {
        images: PathBuf,
        labels: PathBuf,
        /// Use only the first `limit` samples.
        #[serde(default)]
        limit: Option<usize>,
    },
    Blobs(BlobSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MadeSettings {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    /// Epoch cap for each client's local MADE.
    pub max_iters: usize,
    /// Local epochs per federated MADE round.
    pub local_iters: usize,
    /// Cap on federated MADE rounds.
    pub max_rounds: usize,
    pub patience: usize,
}

impl Default for MadeSettings {
    fn default() -> Self {
        Self {
            hidden: vec![50],
            lr: 0.01,
            batch_size: 8,
            max_iters: 500,
            local_iters: 1,
            max_rounds: 500,
            patience: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub local_iters: usize,
    pub global_iters: usize,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            lr: 0.01,
            batch_size: 8,
            local_iters: 2,
            global_iters: 150,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub dataset: DatasetSource,
    pub clients: usize,
    /// Base noise variance `x`.
    pub noise_variance: f64,
    pub split_fraction: f64,
    /// Share of each client's training rows held out for MADE validation.
    pub made_valid_fraction: f64,
    pub made: MadeSettings,
    pub classifier: ClassifierSettings,
    pub discriminator: DiscriminatorConfig,
    pub weight_mode: WeightMode,
    pub clip: ClipBounds,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dataset: DatasetSource::Blobs(BlobSpec::default()),
            clients: 10,
            noise_variance: 0.3,
            split_fraction: 0.85,
            made_valid_fraction: 0.15,
            made: MadeSettings::default(),
            classifier: ClassifierSettings::default(),
            discriminator: DiscriminatorConfig::default(),
            weight_mode: WeightMode::Ratio,
            clip: ClipBounds::default(),
            seed: 0,
            output_dir: PathBuf::from("runs"),
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn check_sgd(name: &str, lr: f64, batch: usize) -> Result<()> {
    check(lr > 0.0 && lr.is_finite(), || {
        format!("{name}.lr must be > 0, got {lr}")
    })?;
    check(batch > 0, || format!("{name}.batch_size must be > 0"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPath {
                path: path.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Check every field; nothing is computed before this passes.
    pub fn validate(&self) -> Result<()> {
        check(self.schema_version == SCHEMA_VERSION, || {
            format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )
        })?;
        match &self.dataset {
            DatasetSource::Idx {
                images,
                labels,
                limit,
            } => {
                for p in [images, labels] {
                    if !p.exists() {
                        return Err(Error::MissingPath { path: p.clone() });
                    }
                }
                check(*limit != Some(0), || {
                    "dataset.limit must be positive".into()
                })?;
            }
            DatasetSource::Blobs(spec) => {
                spec.validate()?;
                check(spec.samples >= self.clients, || {
                    format!(
                        "{} samples cannot feed {} clients",
                        spec.samples, self.clients
                    )
                })?;
            }
        }
        check(self.clients >= 1, || "clients must be >= 1".into())?;
        check(
            self.noise_variance >= 0.0 && self.noise_variance.is_finite(),
            || format!("noise_variance must be >= 0, got {}", self.noise_variance),
        )?;
        for (name, f) in [
            ("split_fraction", self.split_fraction),
            ("made_valid_fraction", self.made_valid_fraction),
        ] {
            check(f > 0.0 && f < 1.0, || {
                format!("{name} must lie in (0,1), got {f}")
            })?;
        }
        check(
            !self.made.hidden.is_empty() && !self.made.hidden.contains(&0),
            || "made.hidden must list positive layer sizes".into(),
        )?;
        check_sgd("made", self.made.lr, self.made.batch_size)?;
        check(self.made.max_iters > 0 && self.made.max_rounds > 0, || {
            "made.max_iters and made.max_rounds must be positive".into()
        })?;
        check(self.made.local_iters > 0, || {
            "made.local_iters must be positive".into()
        })?;
        check(self.made.patience > 0, || {
            "made.patience must be positive".into()
        })?;
        check(!self.classifier.hidden.contains(&0), || {
            "classifier.hidden sizes must be positive".into()
        })?;
        check_sgd("classifier", self.classifier.lr, self.classifier.batch_size)?;
        check(self.classifier.global_iters > 0, || {
            "classifier.global_iters must be positive".into()
        })?;
        self.discriminator.validate()?;
        check(
            self.clip.lo > 0.0 && self.clip.hi >= self.clip.lo && self.clip.hi.is_finite(),
            || {
                format!(
                    "clip bounds [{}, {}] are invalid",
                    self.clip.lo, self.clip.hi
                )
            },
        )?;
        Ok(())
    }

    pub fn made_train_config(&self) -> MadeTrainConfig {
        MadeTrainConfig {
            sgd: SgdConfig {
                lr: self.made.lr,
                batch_size: self.made.batch_size,
            },
            max_iters: self.made.max_iters,
            patience: self.made.patience,
        }
    }

    pub fn federated_made_config(&self) -> FederatedMadeConfig {
        FederatedMadeConfig {
            local: LocalTrainConfig {
                sgd: SgdConfig {
                    lr: self.made.lr,
                    batch_size: self.made.batch_size,
                },
                local_iters: self.made.local_iters,
            },
            max_rounds: self.made.max_rounds,
            patience: self.made.patience,
            divergence_factor: 10.0,
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            hidden: self.classifier.hidden.clone(),
            local: LocalTrainConfig {
                sgd: SgdConfig {
                    lr: self.classifier.lr,
                    batch_size: self.classifier.batch_size,
                },
                local_iters: self.classifier.local_iters,
            },
            global_iters: self.classifier.global_iters,
        }
    }
}
