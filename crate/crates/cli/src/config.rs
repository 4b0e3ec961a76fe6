//! Run configuration: a TOML file overlaid with command-line flags.

use crate::error::{CliError, CliResult};
use blake2::{Blake2b512, Digest};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use stepdedup_core::calibration::metrics::{default_grid, DEFAULT_RESAMPLES};
use stepdedup_core::calibration::{CalibrationConfig, Scorer};
use stepdedup_core::detect::{Strategy, StrategyConfig};
use stepdedup_core::identity::{default_synonyms, SynonymTable};
use stepdedup_core::relabel::RuleLists;
use stepdedup_core::savings::{Attribution, SavingsConfig};
use stepdedup_core::similarity::{CommandProvider, EmbeddingProvider, HashedNgramProvider};

pub const ENDPOINT_ENV: &str = "STEPDEDUP_PROVIDER_ENDPOINT";

/// `fallback` or `external:<command>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderChoice {
    Fallback,
    External(String),
}

impl FromStr for ProviderChoice {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.split_once(':') {
            _ if s == "fallback" => Ok(ProviderChoice::Fallback),
            _ if s == "external" => Ok(ProviderChoice::External(String::new())),
            Some(("external", cmd)) => Ok(ProviderChoice::External(cmd.to_string())),
            _ => Err(CliError::Usage(format!(
                "unknown provider `{s}`; expected `fallback` or `external:<command>`"
            ))),
        }
    }
}

impl std::fmt::Display for ProviderChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProviderChoice::Fallback => f.write_str("fallback"),
            ProviderChoice::External(cmd) => write!(f, "external:{cmd}"),
        }
    }
}

impl Serialize for ProviderChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProviderChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    pub choice: ProviderChoice,
    pub dim: usize,
    pub max_tokens: usize,
    /// Seed of the fallback provider's random projection.
    pub seed: u64,
}

impl Default for ProviderSection {
    fn default() -> Self {
        ProviderSection {
            choice: ProviderChoice::Fallback,
            dim: HashedNgramProvider::DEFAULT_DIM,
            max_tokens: HashedNgramProvider::MAX_TOKENS,
            seed: HashedNgramProvider::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    pub scorers: Vec<Scorer>,
    pub resamples: usize,
    pub folds: usize,
    pub grid: Vec<f64>,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        CalibrateSection {
            scorers: Scorer::ALL.to_vec(),
            resamples: DEFAULT_RESAMPLES,
            folds: 5,
            grid: default_grid(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelabelSection {
    /// `variant -> canonical` file; the built-in table when absent.
    pub synonyms: Option<PathBuf>,
    pub rules: RuleLists,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SavingsSection {
    pub attribution: Attribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub strategies: Vec<Strategy>,
    pub detection: StrategyConfig,
    pub provider: ProviderSection,
    pub calibrate: CalibrateSection,
    pub relabel: RelabelSection,
    pub savings: SavingsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 20_240_601,
            strategies: vec![Strategy::Exact, Strategy::NearExact, Strategy::Hybrid],
            detection: StrategyConfig::default(),
            provider: ProviderSection::default(),
            calibrate: CalibrateSection::default(),
            relabel: RelabelSection::default(),
            savings: SavingsSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fill an empty external command from the environment, then validate.
    pub fn finish(mut self, env_endpoint: Option<String>) -> CliResult<Self> {
        if let ProviderChoice::External(cmd) = &mut self.provider.choice {
            if let Some(endpoint) = env_endpoint.filter(|e| !e.trim().is_empty()) {
                *cmd = endpoint;
            }
            if cmd.trim().is_empty() {
                return Err(CliError::Usage(format!(
                    "external provider needs a command: use `external:<command>` or set {ENDPOINT_ENV}"
                )));
            }
        }
        self.detection
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if self.strategies.is_empty() {
            return Err(CliError::Usage("no strategies selected".into()));
        }
        if self.provider.dim == 0 || self.provider.max_tokens == 0 {
            return Err(CliError::Usage(
                "provider dim and max_tokens must be positive".into(),
            ));
        }
        Ok(self)
    }

    /// First 16 bytes of BLAKE2b-512 over the canonical JSON form, as hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        Blake2b512::digest(&json)[..16]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn build_provider(&self) -> Box<dyn EmbeddingProvider> {
        match &self.provider.choice {
            ProviderChoice::Fallback => Box::new(HashedNgramProvider::new(
                self.provider.dim,
                self.provider.seed,
            )),
            ProviderChoice::External(cmd) => Box::new(CommandProvider::new(
                format!("external-{}", self.provider.dim),
                cmd.clone(),
                self.provider.dim,
                self.provider.max_tokens,
            )),
        }
    }

    pub fn calibration_config(&self) -> CalibrationConfig {
        CalibrationConfig {
            resamples: self.calibrate.resamples,
            bootstrap_seed: self.seed,
            folds: self.calibrate.folds,
            cv_seed: self.seed,
            grid: self.calibrate.grid.clone(),
        }
    }

    pub fn savings_config(&self) -> CliResult<SavingsConfig> {
        let mut c = SavingsConfig::from_strategy(&self.detection)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        c.attribution = self.savings.attribution;
        Ok(c)
    }

    pub fn synonyms(&self) -> CliResult<SynonymTable> {
        match &self.relabel.synonyms {
            None => Ok(default_synonyms()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("cannot read synonyms {}: {e}", path.display()))
                })?;
                SynonymTable::parse(&text).map_err(|e| CliError::Usage(e.to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml(
            "seed = 3\nstrategies = [\"exact\"]\n[detection]\nlevenshtein_threshold = 0.9\n[provider]\nchoice = \"external:cat\"\n",
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.detection.levenshtein_threshold, 0.9);
        assert_eq!(c.detection.cosine_threshold, 0.82);
        assert_eq!(c.provider.choice, ProviderChoice::External("cat".into()));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("sead = 3\n").is_err());
        assert!(RunConfig::from_toml("[provider]\nchoice = \"http\"\n").is_err());
    }

    #[test]
    fn env_fills_external_endpoint() {
        let mut c = RunConfig::default();
        c.provider.choice = ProviderChoice::External(String::new());
        assert!(c.clone().finish(None).is_err());
        let c = c.finish(Some("my-embedder --stdin".into())).unwrap();
        assert_eq!(
            c.provider.choice,
            ProviderChoice::External("my-embedder --stdin".into())
        );
        // The variable overrides an address given on the command line too.
        let mut d = RunConfig::default();
        d.provider.choice = ProviderChoice::External("old".into());
        let d = d.finish(Some("new".into())).unwrap();
        assert_eq!(d.provider.choice, ProviderChoice::External("new".into()));
        // And is ignored by the fallback provider.
        let f = RunConfig::default().finish(Some("new".into())).unwrap();
        assert_eq!(f.provider.choice, ProviderChoice::Fallback);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 32);
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn invalid_thresholds_are_usage_errors() {
        let c = RunConfig::from_toml("[detection]\ncosine_threshold = 1.5\n").unwrap();
        assert!(matches!(c.finish(None), Err(CliError::Usage(_))));
    }
}
