use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::TrainConfig;
use crate::llm::{LiveConfig, DEFAULT_RETRY_BUDGET};
use crate::similarity::Channel;

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelToggles {
    pub structural: bool,
    pub name: bool,
    pub edit: bool,
}

impl Default for ChannelToggles {
    fn default() -> Self {
        Self {
            structural: true,
            name: true,
            edit: true,
        }
    }
}

impl ChannelToggles {
    pub fn enabled(&self, channel: Channel) -> bool {
        match channel {
            Channel::Structural => self.structural,
            Channel::Name => self.name,
            Channel::Edit => self.edit,
        }
    }

    pub fn set(&mut self, channel: Channel, on: bool) {
        match channel {
            Channel::Structural => self.structural = on,
            Channel::Name => self.name = on,
            Channel::Edit => self.edit = on,
        }
    }

    pub fn any(&self) -> bool {
        self.structural || self.name || self.edit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Name oracle over the dataset's reference alignment.
    Mock,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub retry_budget: usize,
    /// Requests in flight for the mock backend; the live backend uses `live.max_concurrency`.
    pub mock_concurrency: usize,
    pub live: LiveConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            retry_budget: DEFAULT_RETRY_BUDGET,
            mock_concurrency: 8,
            live: LiveConfig::default(),
        }
    }
}

impl BackendConfig {
    pub fn concurrency(&self) -> usize {
        match self.kind {
            BackendKind::Mock => self.mock_concurrency,
            BackendKind::Live => self.live.max_concurrency,
        }
    }
}

/// Parts of the run that can be switched off for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablation {
    Structural,
    Name,
    Edit,
    Llm,
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "structural" => Ok(Ablation::Structural),
            "name" => Ok(Ablation::Name),
            "edit" => Ok(Ablation::Edit),
            "llm" => Ok(Ablation::Llm),
            other => Err(format!("unknown ablation {other:?} (expected structural, name, edit or llm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset_dir: PathBuf,
    /// Word-vector text file; required when the name channel is on.
    pub word_vectors: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    /// Candidates kept per channel.
    pub k: usize,
    /// Fraction of the reference alignment used as training seeds.
    pub seed_fraction: f64,
    pub split_seed: u64,
    pub protocol_seed: u64,
    pub channels: ChannelToggles,
    pub llm: bool,
    /// Language named in the virtual-entity prompt.
    pub target_language: String,
    /// Training seeds shown as demonstrations in the virtual-entity prompt.
    pub demo_count: usize,
    /// NFC-normalize names before edit-distance comparison.
    pub nfc: bool,
    pub train: TrainConfig,
    pub backend: BackendConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset_dir: PathBuf::from("data"),
            word_vectors: None,
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            k: 10,
            seed_fraction: 0.3,
            split_seed: 0,
            protocol_seed: 0,
            channels: ChannelToggles::default(),
            llm: true,
            target_language: "English".into(),
            demo_count: 3,
            nfc: false,
            train: TrainConfig::default(),
            backend: BackendConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn ablate(&mut self, what: Ablation) {
        match what {
            Ablation::Structural => self.channels.structural = false,
            Ablation::Name => self.channels.name = false,
            Ablation::Edit => self.channels.edit = false,
            Ablation::Llm => self.llm = false,
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    /// The name channel needs word vectors only when it is on.
    pub fn needs_word_vectors(&self) -> bool {
        self.channels.name
    }

    /// Checks values, then that referenced paths exist.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !self.channels.any() {
            return bad("at least one candidate channel must be enabled".into());
        }
        if !(self.seed_fraction > 0.0 && self.seed_fraction < 1.0) {
            return bad(format!("seed_fraction must lie in (0, 1), got {}", self.seed_fraction));
        }
        if self.llm && self.demo_count == 0 {
            return bad("demo_count must be at least 1 when the LLM is enabled".into());
        }
        if self.backend.concurrency() == 0 {
            return bad("backend concurrency must be at least 1".into());
        }
        self.train
            .validate()
            .map_err(|e| PipelineError::Config(format!("train: {e}")))?;
        if !self.dataset_dir.is_dir() {
            return bad(format!("dataset directory {} does not exist", self.dataset_dir.display()));
        }
        if self.needs_word_vectors() {
            match &self.word_vectors {
                None => return bad("the name channel is enabled but word_vectors is not set".into()),
                Some(p) if !p.is_file() => {
                    return bad(format!("word-vector file {} does not exist", p.display()))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}
