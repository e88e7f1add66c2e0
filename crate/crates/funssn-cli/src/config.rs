//! The single self-describing run configuration document. One JSON file
//! drives every verb; each command reads the sections it needs and the
//! whole document is echoed into the output directory for provenance.

use funssn::dataio::GridSpec;
use funssn::deep::{Activation, Architecture};
use funssn::model::Link;
use funssn::simgen::SurfaceSpec;
use funssn::training::Loss;
use funssn::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pho: Option<PhoSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub predictors: Vec<String>,
    pub outcome: String,
    #[serde(default)]
    pub predictor_grids: Vec<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_grid: Option<GridSpec>,
    #[serde(default)]
    pub standardize: bool,
    /// Skip rows with degenerate curves instead of aborting.
    #[serde(default)]
    pub skip_degenerate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub k_basis: usize,
    pub u_basis: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_link")]
    pub link: Link,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep: Option<DeepSection>,
    /// Freeze the structured part at zero and train the deep part alone.
    #[serde(default)]
    pub deep_only: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepSection {
    #[serde(default = "default_architecture")]
    pub architecture: Architecture,
    pub hidden_sizes: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default)]
    pub dropout_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub lambda_s: f64,
    pub lambda_t: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = funssn::training::TrainConfig::default();
        TrainSection {
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            patience: d.patience,
            learning_rate: d.learning_rate,
            lambda_s: d.lambda_s,
            lambda_t: d.lambda_t,
            validation_fraction: d.validation_fraction,
            seed: d.seed,
            loss: d.loss,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self) -> funssn::training::TrainConfig {
        funssn::training::TrainConfig {
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            learning_rate: self.learning_rate,
            lambda_s: self.lambda_s,
            lambda_t: self.lambda_t,
            validation_fraction: self.validation_fraction,
            seed: self.seed,
            loss: self.loss,
            freeze_structured: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub n: usize,
    pub r: usize,
    pub q: usize,
    #[serde(default = "default_one")]
    pub j: usize,
    pub snr: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_surface")]
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub nonlinear_amplitude: f64,
}

impl SimSection {
    pub fn to_sim_config(&self) -> funssn::simgen::SimConfig {
        funssn::simgen::SimConfig {
            n: self.n,
            r: self.r,
            q: self.q,
            j: self.j,
            snr: self.snr,
            seed: self.seed,
            surface: self.surface.clone(),
            nonlinear_amplitude: self.nonlinear_amplitude,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct PhoSection {
    /// "direct" | "gram" | "auto"
    pub path: String,
}

impl Default for PhoSection {
    fn default() -> Self {
        PhoSection {
            path: "auto".to_string(),
        }
    }
}

impl PhoSection {
    pub fn to_path(&self) -> Result<funssn::pho::PhoPath> {
        match self.path.as_str() {
            "direct" => Ok(funssn::pho::PhoPath::Direct),
            "gram" => Ok(funssn::pho::PhoPath::Gram),
            "auto" => Ok(funssn::pho::PhoPath::Auto),
            other => Err(Error::invalid(format!(
                "unknown pho path '{other}' (expected direct|gram|auto)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct BenchSection {
    pub n: Vec<usize>,
    pub j: Vec<usize>,
    pub r: Vec<usize>,
    pub q: usize,
    pub k_basis: usize,
    pub u_basis: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            n: vec![25, 50, 100],
            j: vec![1, 2, 4],
            r: vec![25, 50, 100],
            q: 40,
            k_basis: 8,
            u_basis: 8,
            batch_size: 16,
            epochs: 3,
            seed: 0,
        }
    }
}

fn default_degree() -> usize {
    3
}

fn default_link() -> Link {
    Link::Identity
}

fn default_architecture() -> Architecture {
    Architecture::SharedCodec
}

fn default_activation() -> Activation {
    Activation::Tanh
}

fn default_one() -> usize {
    1
}

fn default_surface() -> SurfaceSpec {
    SurfaceSpec::Bumps
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            file: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn data(&self) -> Result<&DataSection> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::invalid("config is missing the 'data' section"))
    }

    pub fn model(&self) -> Result<&ModelSection> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::invalid("config is missing the 'model' section"))
    }

    pub fn sim(&self) -> Result<&SimSection> {
        self.sim
            .as_ref()
            .ok_or_else(|| Error::invalid("config is missing the 'sim' section"))
    }
}
