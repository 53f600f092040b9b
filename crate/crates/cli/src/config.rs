use std::path::Path;

use cscdmd_core::datasets::{derive_seed, SyntheticRiverParams};
use cscdmd_core::dictionary::DictionaryGeometry;
use cscdmd_core::estimation::EstimatorConfig;
use cscdmd_core::pipeline::TrainConfig;
use cscdmd_core::sparse::IstaConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Canonical run configuration. Every field has a default; a JSON file may
/// set any subset, and command-line flags override both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Leading frames of a series used for training; the rest are test frames.
    pub train_frames: usize,
    /// Synthetic generator settings. Its own `seed` is ignored in favor of
    /// one derived from the top-level seed.
    pub synthetic: SyntheticRiverParams,
    pub dictionary: DictionaryConfig,
    pub dmd: DmdConfig,
    pub estimator: EstimatorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            train_frames: 16,
            synthetic: SyntheticRiverParams::default(),
            dictionary: DictionaryConfig::default(),
            dmd: DmdConfig::default(),
            estimator: EstimatorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DictionaryConfig {
    pub decimation: [usize; 3],
    pub channels: usize,
    pub polyphase_order: [usize; 3],
    pub patches: usize,
    pub patch_dims: [usize; 3],
    pub train: TrainConfig,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig {
            decimation: [2, 4, 2],
            channels: 20,
            polyphase_order: [2, 2, 0],
            patches: 128,
            patch_dims: [32, 128, 2],
            train: TrainConfig::default(),
        }
    }
}

impl DictionaryConfig {
    pub fn geometry(&self) -> DictionaryGeometry {
        DictionaryGeometry {
            decimation: self.decimation,
            channels: self.channels,
            polyphase_order: self.polyphase_order,
            field_shape: self.patch_dims,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmdConfig {
    pub rank: usize,
    /// Sparse coding of snapshots; unused with the identity dictionary.
    pub ista: IstaConfig,
}

impl Default for DmdConfig {
    fn default() -> Self {
        DmdConfig {
            rank: 8,
            ista: IstaConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }

    /// Generator parameters with the seed fanned out from the top-level seed.
    pub fn synthetic_params(&self) -> SyntheticRiverParams {
        SyntheticRiverParams {
            seed: derive_seed(self.seed, "generate", 0),
            ..self.synthetic.clone()
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.synthetic.validate().map_err(Failure::from)?;
        self.dictionary.geometry().validate().map_err(Failure::from)?;
        self.dmd.ista.validate().map_err(Failure::from)?;
        self.dictionary.train.ista.validate().map_err(Failure::from)?;
        self.estimator.validate().map_err(Failure::from)?;
        if self.dmd.rank == 0 {
            return Err(Failure::config("dmd.rank must be >= 1"));
        }
        if self.train_frames < 2 {
            return Err(Failure::config("train_frames must be >= 2"));
        }
        Ok(())
    }
}
