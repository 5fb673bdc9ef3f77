use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::optim::Regularization;
use crate::error::{Error, Result};

/// The eight experiment variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Preset {
    /// Hand-crafted features only.
    #[serde(rename = "B-H")]
    BH,
    /// Features plus a randomly initialized LSTM, no pre-training.
    #[serde(rename = "B-HL")]
    BHL,
    #[serde(rename = "M-E-L")]
    MEL,
    #[serde(rename = "M-E-LUE")]
    MELue,
    #[serde(rename = "M-E-LUEW")]
    MELuew,
    #[serde(rename = "M-EW-L")]
    MEWL,
    #[serde(rename = "M-EW-LUE")]
    MEWLue,
    #[serde(rename = "M-EW-LUEW")]
    MEWLuew,
}

/// What a preset switches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PresetFlags {
    pub use_lstm: bool,
    pub pretrain: bool,
    pub use_word_loss: bool,
    pub update_entity_vectors: bool,
    pub update_word_vectors: bool,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::BH,
        Preset::BHL,
        Preset::MEL,
        Preset::MELue,
        Preset::MELuew,
        Preset::MEWL,
        Preset::MEWLue,
        Preset::MEWLuew,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::BH => "B-H",
            Preset::BHL => "B-HL",
            Preset::MEL => "M-E-L",
            Preset::MELue => "M-E-LUE",
            Preset::MELuew => "M-E-LUEW",
            Preset::MEWL => "M-EW-L",
            Preset::MEWLue => "M-EW-LUE",
            Preset::MEWLuew => "M-EW-LUEW",
        }
    }

    pub fn flags(self) -> PresetFlags {
        let (use_lstm, pretrain, word, ent, words) = match self {
            Preset::BH => (false, false, false, false, false),
            Preset::BHL => (true, false, false, false, false),
            Preset::MEL => (true, true, false, false, false),
            Preset::MELue => (true, true, false, true, false),
            Preset::MELuew => (true, true, false, true, true),
            Preset::MEWL => (true, true, true, false, false),
            Preset::MEWLue => (true, true, true, true, false),
            Preset::MEWLuew => (true, true, true, true, true),
        };
        PresetFlags {
            use_lstm,
            pretrain,
            use_word_loss: word,
            update_entity_vectors: ent,
            update_word_vectors: words,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::invalid(format!("unknown preset {s:?}, expected one of {}", names.join(", ")))
            })
    }
}

/// Hyperparameters and switches for pre-training and fine-tuning.
///
/// `alpha_*`/`lambda_*` pairs are learning rates and regularization weights:
/// `pw` LSTM during pre-training, `pe` embedding vectors, `fw` LSTM during
/// fine-tuning, `fc` the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub preset: Preset,
    pub alpha_pw: f64,
    pub lambda_pw: f64,
    pub alpha_pe: f64,
    pub lambda_pe: f64,
    pub alpha_fw: f64,
    pub lambda_fw: f64,
    pub alpha_fc: f64,
    pub lambda_fc: f64,
    pub negatives: usize,
    pub window: usize,
    pub use_lstm: bool,
    pub pretrain: bool,
    pub use_word_loss: bool,
    pub update_entity_vectors: bool,
    pub update_word_vectors: bool,
    /// Apply the vector update flags during fine-tuning as well.
    pub finetune_updates_vectors: bool,
    pub pretrain_reg: Regularization,
    pub finetune_reg: Regularization,
    pub pretrain_epochs: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Vector size when embeddings are trained from the corpus itself.
    pub dim: usize,
    pub skipgram_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::for_preset(Preset::MELue)
    }
}

impl TrainConfig {
    pub fn for_preset(preset: Preset) -> Self {
        let mut cfg = TrainConfig {
            preset,
            alpha_pw: 0.1,
            lambda_pw: 0.001,
            alpha_pe: 0.1,
            lambda_pe: 0.001,
            alpha_fw: 0.1,
            lambda_fw: 1e-6,
            alpha_fc: 0.1,
            lambda_fc: 1e-6,
            negatives: 5,
            window: 1,
            use_lstm: false,
            pretrain: false,
            use_word_loss: false,
            update_entity_vectors: false,
            update_word_vectors: false,
            finetune_updates_vectors: true,
            pretrain_reg: Regularization::L1,
            finetune_reg: Regularization::L1,
            pretrain_epochs: 5,
            max_epochs: 30,
            patience: 1,
            dim: 16,
            skipgram_epochs: 5,
            seed: 1,
        };
        cfg.apply_preset(preset);
        cfg
    }

    /// Overwrites the preset-controlled switches.
    pub fn apply_preset(&mut self, preset: Preset) {
        let f = preset.flags();
        self.preset = preset;
        self.use_lstm = f.use_lstm;
        self.pretrain = f.pretrain;
        self.use_word_loss = f.use_word_loss;
        self.update_entity_vectors = f.update_entity_vectors;
        self.update_word_vectors = f.update_word_vectors;
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("alpha_pw", self.alpha_pw),
            ("alpha_pe", self.alpha_pe),
            ("alpha_fw", self.alpha_fw),
            ("alpha_fc", self.alpha_fc),
        ];
        for (name, a) in rates {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {a}")));
            }
        }
        let regs = [
            ("lambda_pw", self.lambda_pw),
            ("lambda_pe", self.lambda_pe),
            ("lambda_fw", self.lambda_fw),
            ("lambda_fc", self.lambda_fc),
        ];
        for (name, l) in regs {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {l}")));
            }
        }
        if self.negatives == 0 {
            return Err(Error::Config("negatives must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.pretrain && !self.use_lstm {
            return Err(Error::Config("pre-training requires the LSTM".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainConfig::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}
