//! CNN and MLP builders, parameter accounting and deployable model artifacts.

mod format;

pub use format::{audit_size, decode, encode, load_model, save_model, FORMAT_VERSION, MAGIC};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::landmarks::FeatureMode;
use crate::nn::{InputShape, LayerSpec, Network, NetworkSpec, ParameterSet};
use crate::rng::seeded;

/// Serialized-size ceiling for the CNN: 75 KiB.
pub const CNN_SIZE_BUDGET: usize = 76_800;
/// Serialized-size ceiling for the MLP baseline: 0.1 MiB.
pub const MLP_SIZE_BUDGET: usize = 102_400;

/// Filter counts that keep the CNN under [`CNN_SIZE_BUDGET`].
pub const BUDGETED_FILTERS: [usize; 4] = [16, 24, 24, 24];
/// Filter counts as written in the layer-by-layer description (100, then 1024 x 3).
pub const LITERAL_FILTERS: [usize; 4] = [100, 1024, 1024, 1024];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    D2cnnFld,
    D2mlpFld,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::D2cnnFld => "d2cnn_fld",
            Variant::D2mlpFld => "d2mlp_fld",
        })
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "d2cnn_fld" | "cnn" => Ok(Variant::D2cnnFld),
            "d2mlp_fld" | "mlp" => Ok(Variant::D2mlpFld),
            _ => Err(format!("unknown model variant {s:?} (expected d2cnn_fld or d2mlp_fld)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Budgeted,
    LiteralAlg1,
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "budgeted" => Ok(Preset::Budgeted),
            "literal_alg1" | "literal" => Ok(Preset::LiteralAlg1),
            _ => Err(format!("unknown preset {s:?} (expected budgeted or literal_alg1)")),
        }
    }
}

/// Everything needed to rebuild a layer stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub preset: Preset,
    pub input_points: usize,
    /// Overrides the preset's four conv filter counts.
    pub filters: Option<Vec<usize>>,
    pub kernel_size: usize,
    pub first_dropout: f64,
    pub block_dropout: f64,
    pub alpha: f64,
    pub mlp_hidden: Vec<usize>,
    pub mlp_dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::D2cnnFld,
            preset: Preset::Budgeted,
            input_points: 68,
            filters: None,
            kernel_size: 3,
            first_dropout: 0.254,
            block_dropout: 0.20,
            alpha: 0.1,
            mlp_hidden: vec![100, 100],
            mlp_dropout: 0.25,
        }
    }
}

impl ModelConfig {
    pub fn cnn(preset: Preset) -> Self {
        Self {
            preset,
            ..Self::default()
        }
    }

    pub fn mlp() -> Self {
        Self {
            variant: Variant::D2mlpFld,
            ..Self::default()
        }
    }

    pub fn feature_mode(&self) -> Result<FeatureMode> {
        FeatureMode::from_points(self.input_points).ok_or_else(|| {
            Error::InvalidParameter(format!("input_points must be 67 or 68, got {}", self.input_points))
        })
    }

    pub fn conv_filters(&self) -> Vec<usize> {
        self.filters.clone().unwrap_or_else(|| match self.preset {
            Preset::Budgeted => BUDGETED_FILTERS.to_vec(),
            Preset::LiteralAlg1 => LITERAL_FILTERS.to_vec(),
        })
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn build(&self) -> Result<NetworkSpec> {
        match self.variant {
            Variant::D2cnnFld => build_d2cnn_fld(self),
            Variant::D2mlpFld => build_d2mlp_fld(self),
        }
    }
}

fn input_shape(config: &ModelConfig) -> Result<InputShape> {
    Ok(InputShape {
        channels: 2,
        length: config.feature_mode()?.points(),
    })
}

/// Four conv blocks `conv1d -> leaky_relu -> maxpool(2, 2) -> dropout`, then
/// `flatten -> dense(2) -> softmax`. Convs use stride 1 and same padding.
pub fn build_d2cnn_fld(config: &ModelConfig) -> Result<NetworkSpec> {
    let input = input_shape(config)?;
    let filters = config.conv_filters();
    if filters.len() != 4 || filters.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "the CNN needs four positive filter counts, got {filters:?}"
        )));
    }
    let k = config.kernel_size;
    if k.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "same padding needs an odd kernel size, got {k}"
        )));
    }
    let mut layers = Vec::with_capacity(19);
    let (mut channels, mut len) = (input.channels, input.length);
    for (block, &out) in filters.iter().enumerate() {
        if len < 2 {
            return Err(Error::InvalidNetwork(format!(
                "pooling in block {} would leave a sequence length < 1",
                block + 1
            )));
        }
        let rate = if block == 0 { config.first_dropout } else { config.block_dropout };
        layers.extend([
            LayerSpec::conv1d(channels, out, k, k / 2),
            LayerSpec::LeakyRelu { alpha: config.alpha },
            LayerSpec::Maxpool1d { window: 2, stride: 2 },
            LayerSpec::Dropout { rate },
        ]);
        channels = out;
        len /= 2;
    }
    layers.extend([LayerSpec::Flatten, LayerSpec::dense(channels * len, 2), LayerSpec::Softmax]);
    let spec = NetworkSpec { input, layers };
    spec.validate()?;
    Ok(spec)
}

/// `flatten -> [dense -> leaky_relu -> dropout] per hidden width -> dense(2) -> softmax`.
pub fn build_d2mlp_fld(config: &ModelConfig) -> Result<NetworkSpec> {
    let input = input_shape(config)?;
    if config.mlp_hidden.is_empty() || config.mlp_hidden.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "MLP hidden widths must be positive, got {:?}",
            config.mlp_hidden
        )));
    }
    let mut layers = vec![LayerSpec::Flatten];
    let mut width = input.channels * input.length;
    for &h in &config.mlp_hidden {
        layers.extend([
            LayerSpec::dense(width, h),
            LayerSpec::LeakyRelu { alpha: config.alpha },
            LayerSpec::Dropout { rate: config.mlp_dropout },
        ]);
        width = h;
    }
    layers.extend([LayerSpec::dense(width, 2), LayerSpec::Softmax]);
    let spec = NetworkSpec { input, layers };
    spec.validate()?;
    Ok(spec)
}

pub fn count_params(spec: &NetworkSpec) -> usize {
    spec.param_count()
}

/// Provenance recorded alongside the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub variant: Variant,
    pub config: ModelConfig,
    pub config_digest: String,
    pub seed: u64,
    pub epochs: u32,
    /// Left empty unless the caller supplies one, so repeated runs stay byte-identical.
    pub created: Option<String>,
}

/// The deployable unit: architecture, weights and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub spec: NetworkSpec,
    pub params: ParameterSet<f32>,
    pub metadata: ModelMetadata,
}

impl ModelArtifact {
    pub fn new(config: &ModelConfig, params: ParameterSet<f32>, seed: u64, epochs: u32) -> Result<Self> {
        let spec = config.build()?;
        if !params.matches_spec(&spec) {
            return Err(Error::InvalidNetwork(
                "parameters do not match the configured architecture".into(),
            ));
        }
        Ok(Self {
            spec,
            params,
            metadata: ModelMetadata {
                variant: config.variant,
                config: config.clone(),
                config_digest: config.digest(),
                seed,
                epochs,
                created: None,
            },
        })
    }

    /// He-initialized, untrained artifact.
    pub fn initialized(config: &ModelConfig, seed: u64) -> Result<Self> {
        let spec = config.build()?;
        let params = ParameterSet::init(&spec, &mut seeded(seed))?;
        Self::new(config, params, seed, 0)
    }

    pub fn network(&self) -> Result<Network<f32>> {
        Network::new(self.spec.clone(), self.params.clone())
    }

    pub fn feature_mode(&self) -> Result<FeatureMode> {
        FeatureMode::from_points(self.spec.input.length).ok_or_else(|| {
            Error::InvalidNetwork(format!("unsupported input length {}", self.spec.input.length))
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.total_count()
    }

    /// Bytes of parameter storage held in memory at inference time.
    pub fn param_memory_bytes(&self) -> usize {
        self.param_count() * std::mem::size_of::<f32>()
    }

    /// Checks spec/params congruence and that the digest matches the config.
    pub fn check_consistency(&self) -> Result<()> {
        if !self.params.matches_spec(&self.spec) {
            return Err(Error::InvalidNetwork("parameters do not match the architecture".into()));
        }
        if self.metadata.config_digest != self.metadata.config.digest() {
            return Err(Error::InvalidNetwork("metadata digest does not match its config".into()));
        }
        if self.metadata.config.build()? != self.spec {
            return Err(Error::InvalidNetwork(
                "architecture differs from the one its config builds".into(),
            ));
        }
        Ok(())
    }
}
