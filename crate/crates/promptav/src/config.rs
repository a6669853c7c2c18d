//! Layered run configuration and run manifests.
//!
//! Settings resolve with the precedence CLI flag > environment variable >
//! config file > built-in default. Every run writes a manifest (a redacted
//! config snapshot plus template hashes) next to its outputs so results can
//! be traced back to the exact prompt wording that produced them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::evaluator::parse_grid_spec;
use crate::features::{FeatureSet, FeatureSetError, DEFAULT_FEATURE_SET_ID};
use crate::gateway::{
    ApiKey, GatewayConfig, GatewayMode, Rate, DEFAULT_ENDPOINT, DEFAULT_MODEL,
};
use crate::prompt::{PromptEngine, PromptError, PromptStrategy, BUILTIN_TEMPLATE_VERSION};

/// Comma-separated API keys.
pub const ENV_API_KEYS: &str = "PROMPTAV_API_KEYS";
/// Chat-completions endpoint base URL.
pub const ENV_ENDPOINT: &str = "PROMPTAV_ENDPOINT";

pub const DEFAULT_GRID_SPEC: &str = "0.1:0.9:0.1";
pub const DEFAULT_RATE_PER_1K: &str = "0.004";
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_CACHE_DIR: &str = ".promptav/cache";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse config file {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("{mode} mode requires a cassette path")]
    CassetteRequired { mode: GatewayMode },
    #[error("shots must be one of {allowed:?}, got {shots}")]
    DisallowedShots { shots: usize, allowed: Vec<usize> },
    #[error("strategy ps+ runs zero-shot only, got shots {0}")]
    PsPlusShots(usize),
    #[error(
        "{mode} mode needs at least one API key \
         (set {ENV_API_KEYS} or api_keys in the config file)"
    )]
    MissingApiKeys { mode: GatewayMode },
    #[error(transparent)]
    FeatureSet(#[from] FeatureSetError),
    #[error(transparent)]
    Template(#[from] PromptError),
}

/// Where the resolved API keys came from; recorded in manifests in place of
/// the key material itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiKeySource {
    Environment,
    ConfigFile,
    None,
}

/// Optional values supplied by command-line flags (the highest-precedence
/// layer).
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub model_id: Option<String>,
    pub endpoint: Option<String>,
    pub strategy: Option<PromptStrategy>,
    pub shots: Option<usize>,
    pub feature_set: Option<String>,
    pub template_version: Option<String>,
    pub templates_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub mode: Option<GatewayMode>,
    pub cassette: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid: Option<String>,
    pub rate_per_1k: Option<String>,
    pub max_in_flight: Option<usize>,
}

/// Values read from the process environment.
#[derive(Debug, Clone, Default)]
pub struct EnvOverrides {
    pub api_keys: Option<String>,
    pub endpoint: Option<String>,
}

impl EnvOverrides {
    pub fn capture() -> Self {
        Self {
            api_keys: std::env::var(ENV_API_KEYS).ok(),
            endpoint: std::env::var(ENV_ENDPOINT).ok(),
        }
    }
}

/// The raw config-file layer; every key is optional and mirrors a
/// [`RunConfig`] field.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model_id: Option<String>,
    pub endpoint: Option<String>,
    pub api_keys: Option<Vec<String>>,
    pub strategy: Option<String>,
    pub shots: Option<usize>,
    pub allowed_shots: Option<Vec<usize>>,
    pub feature_set: Option<String>,
    pub template_version: Option<String>,
    pub templates_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub mode: Option<String>,
    pub cassette: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid: Option<String>,
    pub rate_per_1k: Option<String>,
    pub max_in_flight: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let body = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&body).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model_id: String,
    pub endpoint: String,
    pub api_keys: Vec<ApiKey>,
    pub api_key_source: ApiKeySource,
    pub strategy: PromptStrategy,
    pub shots: usize,
    pub allowed_shots: Vec<usize>,
    /// Feature-set id ("default-8") or a path to a JSON descriptor file.
    pub feature_set: Option<String>,
    pub template_version: String,
    pub templates_dir: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub mode: GatewayMode,
    pub cassette: Option<PathBuf>,
    pub seed: u64,
    pub grid_spec: String,
    pub rate_per_1k: String,
    pub max_in_flight: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model_id: DEFAULT_MODEL.into(),
            endpoint: DEFAULT_ENDPOINT.into(),
            api_keys: Vec::new(),
            api_key_source: ApiKeySource::None,
            strategy: PromptStrategy::PromptAv,
            shots: 0,
            allowed_shots: vec![0, 2, 4],
            feature_set: None,
            template_version: BUILTIN_TEMPLATE_VERSION.into(),
            templates_dir: None,
            cache_dir: PathBuf::from(DEFAULT_CACHE_DIR),
            mode: GatewayMode::Live,
            cassette: None,
            seed: DEFAULT_SEED,
            grid_spec: DEFAULT_GRID_SPEC.into(),
            rate_per_1k: DEFAULT_RATE_PER_1K.into(),
            max_in_flight: GatewayConfig::default().max_in_flight,
        }
    }
}

impl RunConfig {
    /// Merge the three override layers onto the defaults and validate the
    /// result.
    pub fn resolve(
        cli: ConfigOverrides,
        env: EnvOverrides,
        file: Option<ConfigFile>,
    ) -> Result<Self, ConfigError> {
        let file = file.unwrap_or_default();
        let defaults = RunConfig::default();

        let strategy = match cli.strategy {
            Some(s) => s,
            None => match &file.strategy {
                Some(text) => text.parse().map_err(|reason| ConfigError::Invalid {
                    field: "strategy",
                    reason,
                })?,
                None => defaults.strategy,
            },
        };
        let mode = match cli.mode {
            Some(m) => m,
            None => match &file.mode {
                Some(text) => text.parse().map_err(|reason| ConfigError::Invalid {
                    field: "mode",
                    reason,
                })?,
                None => defaults.mode,
            },
        };
        let (api_keys, api_key_source) = match (env.api_keys, file.api_keys) {
            (Some(joined), _) => {
                let keys: Vec<ApiKey> = joined
                    .split(',')
                    .map(str::trim)
                    .filter(|k| !k.is_empty())
                    .map(ApiKey::from)
                    .collect();
                let source = if keys.is_empty() {
                    ApiKeySource::None
                } else {
                    ApiKeySource::Environment
                };
                (keys, source)
            }
            (None, Some(listed)) if !listed.is_empty() => (
                listed.iter().map(|k| ApiKey::from(k.as_str())).collect(),
                ApiKeySource::ConfigFile,
            ),
            _ => (Vec::new(), ApiKeySource::None),
        };

        let config = RunConfig {
            model_id: cli
                .model_id
                .or(file.model_id)
                .unwrap_or(defaults.model_id),
            endpoint: cli
                .endpoint
                .or(env.endpoint)
                .or(file.endpoint)
                .unwrap_or(defaults.endpoint),
            api_keys,
            api_key_source,
            strategy,
            shots: cli.shots.or(file.shots).unwrap_or(defaults.shots),
            allowed_shots: file.allowed_shots.unwrap_or(defaults.allowed_shots),
            feature_set: cli.feature_set.or(file.feature_set),
            template_version: cli
                .template_version
                .or(file.template_version)
                .unwrap_or(defaults.template_version),
            templates_dir: cli.templates_dir.or(file.templates_dir),
            cache_dir: cli.cache_dir.or(file.cache_dir).unwrap_or(defaults.cache_dir),
            mode,
            cassette: cli.cassette.or(file.cassette),
            seed: cli.seed.or(file.seed).unwrap_or(defaults.seed),
            grid_spec: cli.grid.or(file.grid).unwrap_or(defaults.grid_spec),
            rate_per_1k: cli
                .rate_per_1k
                .or(file.rate_per_1k)
                .unwrap_or(defaults.rate_per_1k),
            max_in_flight: cli
                .max_in_flight
                .or(file.max_in_flight)
                .unwrap_or(defaults.max_in_flight),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !self.allowed_shots.contains(&self.shots) {
            return Err(ConfigError::DisallowedShots {
                shots: self.shots,
                allowed: self.allowed_shots.clone(),
            });
        }
        if self.strategy == PromptStrategy::PsPlus && self.shots != 0 {
            return Err(ConfigError::PsPlusShots(self.shots));
        }
        if self.mode != GatewayMode::Live && self.cassette.is_none() {
            return Err(ConfigError::CassetteRequired { mode: self.mode });
        }
        if self.max_in_flight == 0 {
            return Err(ConfigError::Invalid {
                field: "max_in_flight",
                reason: "must be at least 1".into(),
            });
        }
        self.grid()?;
        self.rate()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        parse_grid_spec(&self.grid_spec).map_err(|e| ConfigError::Invalid {
            field: "grid",
            reason: e.to_string(),
        })
    }

    pub fn rate(&self) -> Result<Rate, ConfigError> {
        Rate::parse(&self.rate_per_1k).map_err(|e| ConfigError::Invalid {
            field: "rate_per_1k",
            reason: e.to_string(),
        })
    }

    /// Gateway settings for this run. Modes that can reach the backend
    /// require at least one API key; replay never does.
    pub fn gateway_config(&self) -> Result<GatewayConfig, ConfigError> {
        if self.mode != GatewayMode::Replay && self.api_keys.is_empty() {
            return Err(ConfigError::MissingApiKeys { mode: self.mode });
        }
        Ok(GatewayConfig {
            endpoint_url: self.endpoint.clone(),
            api_keys: self.api_keys.clone(),
            max_in_flight: self.max_in_flight,
            cache_dir: self.cache_dir.clone(),
            mode: self.mode,
            cassette_path: self.cassette.clone(),
            ..GatewayConfig::default()
        })
    }

    /// The prompt engine for this run's template version.
    pub fn engine(&self) -> Result<PromptEngine, ConfigError> {
        match &self.templates_dir {
            Some(dir) => Ok(PromptEngine::from_templates_dir(dir, &self.template_version)?),
            None if self.template_version == BUILTIN_TEMPLATE_VERSION => {
                Ok(PromptEngine::builtin())
            }
            None => Err(ConfigError::Invalid {
                field: "template_version",
                reason: format!(
                    "version {:?} needs a templates dir (only {:?} is built in)",
                    self.template_version, BUILTIN_TEMPLATE_VERSION
                ),
            }),
        }
    }

    /// Resolve the feature set: the built-in id, or a JSON descriptor file.
    pub fn load_feature_set(&self) -> Result<FeatureSet, ConfigError> {
        match self.feature_set.as_deref() {
            None => Ok(FeatureSet::default()),
            Some(id) if id == DEFAULT_FEATURE_SET_ID => Ok(FeatureSet::default()),
            Some(path) => Ok(FeatureSet::load(Path::new(path))?),
        }
    }

    /// The manifest's redacted view of this config.
    pub fn snapshot(&self) -> ConfigSnapshot {
        ConfigSnapshot {
            model_id: self.model_id.clone(),
            endpoint: self.endpoint.clone(),
            api_key_source: self.api_key_source,
            n_api_keys: self.api_keys.len(),
            strategy: self.strategy,
            shots: self.shots,
            feature_set: self
                .feature_set
                .clone()
                .unwrap_or_else(|| DEFAULT_FEATURE_SET_ID.into()),
            template_version: self.template_version.clone(),
            cache_dir: self.cache_dir.display().to_string(),
            mode: self.mode,
            cassette: self.cassette.as_ref().map(|p| p.display().to_string()),
            seed: self.seed,
            grid: self.grid_spec.clone(),
            rate_per_1k: self.rate_per_1k.clone(),
            max_in_flight: self.max_in_flight,
        }
    }
}

/// What the manifest records about the configuration: everything except the
/// key material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub model_id: String,
    pub endpoint: String,
    pub api_key_source: ApiKeySource,
    pub n_api_keys: usize,
    pub strategy: PromptStrategy,
    pub shots: usize,
    pub feature_set: String,
    pub template_version: String,
    pub cache_dir: String,
    pub mode: GatewayMode,
    pub cassette: Option<String>,
    pub seed: u64,
    pub grid: String,
    pub rate_per_1k: String,
    pub max_in_flight: usize,
}

/// Provenance record written next to every command output. Contains no
/// timestamps so reruns stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ConfigSnapshot,
    /// strategy name → SHA-256 of the template body in use.
    pub template_hashes: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, engine: &PromptEngine) -> Self {
        let template_hashes = PromptStrategy::ALL
            .iter()
            .map(|&strategy| {
                let body = &engine.template(strategy).body;
                let digest = Sha256::digest(body.as_bytes());
                let hex: String = digest.iter().fold(String::new(), |mut acc, byte| {
                    use std::fmt::Write as _;
                    write!(acc, "{byte:02x}").expect("writing to a String cannot fail");
                    acc
                });
                (strategy.as_str().to_string(), hex)
            })
            .collect();
        Self {
            command: command.into(),
            config: config.snapshot(),
            template_hashes,
        }
    }

    /// The manifest path for an output file: `report.json` →
    /// `report.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        output.with_extension("manifest.json")
    }

    /// Write the manifest next to `output`; returns the manifest path.
    pub fn write_next_to(&self, output: &Path) -> std::io::Result<PathBuf> {
        let path = Self::path_for(output);
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, body + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(
        cli: ConfigOverrides,
        env: EnvOverrides,
        file: Option<ConfigFile>,
    ) -> Result<RunConfig, ConfigError> {
        RunConfig::resolve(cli, env, file)
    }

    #[test]
    fn defaults_resolve_cleanly() {
        let config = resolve(
            ConfigOverrides::default(),
            EnvOverrides::default(),
            None,
        )
        .unwrap();
        assert_eq!(config.model_id, "gpt-3.5-turbo");
        assert_eq!(config.endpoint, "https://api.openai.com/v1");
        assert_eq!(config.strategy, PromptStrategy::PromptAv);
        assert_eq!(config.shots, 0);
        assert_eq!(config.allowed_shots, vec![0, 2, 4]);
        assert_eq!(config.mode, GatewayMode::Live);
        assert_eq!(config.seed, 42);
        assert_eq!(config.grid_spec, "0.1:0.9:0.1");
        assert_eq!(config.grid().unwrap().len(), 9);
        assert_eq!(config.api_key_source, ApiKeySource::None);
    }

    #[test]
    fn file_layer_applies() {
        let file: ConfigFile = toml::from_str(
            r#"
            model_id = "gpt-4"
            endpoint = "https://example.test/v1"
            api_keys = ["file-key"]
            strategy = "cot"
            shots = 2
            seed = 7
            grid = "0.05:0.95:0.05"
            "#,
        )
        .unwrap();
        let config = resolve(ConfigOverrides::default(), EnvOverrides::default(), Some(file))
            .unwrap();
        assert_eq!(config.model_id, "gpt-4");
        assert_eq!(config.endpoint, "https://example.test/v1");
        assert_eq!(config.strategy, PromptStrategy::Cot);
        assert_eq!(config.shots, 2);
        assert_eq!(config.seed, 7);
        assert_eq!(config.grid().unwrap().len(), 19);
        assert_eq!(config.api_key_source, ApiKeySource::ConfigFile);
        assert_eq!(config.api_keys.len(), 1);
    }

    #[test]
    fn precedence_is_cli_env_file_default() {
        let file: ConfigFile = toml::from_str(
            r#"
            endpoint = "https://file.test/v1"
            seed = 1
            "#,
        )
        .unwrap();
        let env = EnvOverrides {
            api_keys: Some("env-a, env-b".into()),
            endpoint: Some("https://env.test/v1".into()),
        };

        // env beats file
        let config = resolve(ConfigOverrides::default(), env.clone(), Some(file.clone()))
            .unwrap();
        assert_eq!(config.endpoint, "https://env.test/v1");
        assert_eq!(config.api_keys.len(), 2);
        assert_eq!(config.api_key_source, ApiKeySource::Environment);
        assert_eq!(config.seed, 1); // file beats default

        // cli beats env
        let cli = ConfigOverrides {
            endpoint: Some("https://cli.test/v1".into()),
            seed: Some(99),
            ..ConfigOverrides::default()
        };
        let config = resolve(cli, env, Some(file)).unwrap();
        assert_eq!(config.endpoint, "https://cli.test/v1");
        assert_eq!(config.seed, 99);
    }

    #[test]
    fn invalid_file_values_are_rejected() {
        let file: ConfigFile = toml::from_str(r#"strategy = "zero-shot""#).unwrap();
        assert!(matches!(
            resolve(ConfigOverrides::default(), EnvOverrides::default(), Some(file)),
            Err(ConfigError::Invalid { field: "strategy", .. })
        ));

        let file: ConfigFile = toml::from_str(r#"mode = "cached""#).unwrap();
        assert!(matches!(
            resolve(ConfigOverrides::default(), EnvOverrides::default(), Some(file)),
            Err(ConfigError::Invalid { field: "mode", .. })
        ));

        assert!(toml::from_str::<ConfigFile>("unknown_key = 1").is_err());
    }

    #[test]
    fn shots_must_be_allowed() {
        let cli = ConfigOverrides {
            shots: Some(3),
            ..ConfigOverrides::default()
        };
        assert!(matches!(
            resolve(cli, EnvOverrides::default(), None),
            Err(ConfigError::DisallowedShots { shots: 3, .. })
        ));

        // the allowed set is configurable through the file layer
        let file: ConfigFile = toml::from_str("allowed_shots = [0, 3]").unwrap();
        let cli = ConfigOverrides {
            shots: Some(3),
            ..ConfigOverrides::default()
        };
        let config = resolve(cli, EnvOverrides::default(), Some(file)).unwrap();
        assert_eq!(config.shots, 3);
    }

    #[test]
    fn psplus_is_zero_shot_only() {
        let cli = ConfigOverrides {
            strategy: Some(PromptStrategy::PsPlus),
            shots: Some(2),
            ..ConfigOverrides::default()
        };
        assert!(matches!(
            resolve(cli, EnvOverrides::default(), None),
            Err(ConfigError::PsPlusShots(2))
        ));
    }

    #[test]
    fn non_live_modes_require_cassette() {
        for mode in [GatewayMode::Replay, GatewayMode::Record] {
            let cli = ConfigOverrides {
                mode: Some(mode),
                ..ConfigOverrides::default()
            };
            assert!(matches!(
                resolve(cli, EnvOverrides::default(), None),
                Err(ConfigError::CassetteRequired { .. })
            ));
        }
        let cli = ConfigOverrides {
            mode: Some(GatewayMode::Replay),
            cassette: Some("runs/cassette.jsonl".into()),
            ..ConfigOverrides::default()
        };
        assert!(resolve(cli, EnvOverrides::default(), None).is_ok());
    }

    #[test]
    fn gateway_config_requires_keys_except_replay() {
        let replay = ConfigOverrides {
            mode: Some(GatewayMode::Replay),
            cassette: Some("c.jsonl".into()),
            ..ConfigOverrides::default()
        };
        let config = resolve(replay, EnvOverrides::default(), None).unwrap();
        let gateway = config.gateway_config().unwrap();
        assert_eq!(gateway.mode, GatewayMode::Replay);
        assert_eq!(gateway.cassette_path, Some(PathBuf::from("c.jsonl")));

        let live = resolve(ConfigOverrides::default(), EnvOverrides::default(), None)
            .unwrap();
        assert!(matches!(
            live.gateway_config(),
            Err(ConfigError::MissingApiKeys { .. })
        ));

        let env = EnvOverrides {
            api_keys: Some("k".into()),
            endpoint: None,
        };
        let live = resolve(ConfigOverrides::default(), env, None).unwrap();
        assert!(live.gateway_config().is_ok());
    }

    #[test]
    fn bad_grid_and_rate_fail_resolution() {
        let cli = ConfigOverrides {
            grid: Some("0.9:0.1:0.1".into()),
            ..ConfigOverrides::default()
        };
        assert!(matches!(
            resolve(cli, EnvOverrides::default(), None),
            Err(ConfigError::Invalid { field: "grid", .. })
        ));

        let cli = ConfigOverrides {
            rate_per_1k: Some("-1".into()),
            ..ConfigOverrides::default()
        };
        assert!(matches!(
            resolve(cli, EnvOverrides::default(), None),
            Err(ConfigError::Invalid { field: "rate_per_1k", .. })
        ));
    }

    #[test]
    fn engine_needs_dir_for_custom_versions() {
        let mut config = RunConfig::default();
        assert!(config.engine().is_ok());
        config.template_version = "v2".into();
        assert!(matches!(
            config.engine(),
            Err(ConfigError::Invalid { field: "template_version", .. })
        ));
    }

    #[test]
    fn manifest_redacts_keys_and_hashes_templates() {
        let env = EnvOverrides {
            api_keys: Some("sk-secret-alpha,sk-secret-beta".into()),
            endpoint: None,
        };
        let config = resolve(ConfigOverrides::default(), env, None).unwrap();
        let engine = config.engine().unwrap();
        let manifest = RunManifest::new("evaluate", &config, &engine);

        let json = serde_json::to_string_pretty(&manifest).unwrap();
        assert!(!json.contains("sk-secret"), "keys leaked into manifest");
        assert!(json.contains("\"api_key_source\": \"environment\""));
        assert!(json.contains("\"n_api_keys\": 2"));

        assert_eq!(manifest.template_hashes.len(), 3);
        for (strategy, hash) in &manifest.template_hashes {
            assert!(["promptav", "cot", "ps+"].contains(&strategy.as_str()));
            assert_eq!(hash.len(), 64);
            assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
        }
    }

    #[test]
    fn manifest_writes_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report.json");
        let config = RunConfig::default();
        let engine = config.engine().unwrap();
        let manifest = RunManifest::new("evaluate", &config, &engine);

        let path = manifest.write_next_to(&out).unwrap();
        assert_eq!(path, dir.path().join("report.manifest.json"));
        let first = std::fs::read(&path).unwrap();
        manifest.write_next_to(&out).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);

        let back: RunManifest = serde_json::from_slice(&first).unwrap();
        assert_eq!(back, manifest);
    }

    #[test]
    fn feature_set_resolves_id_or_path() {
        let config = RunConfig::default();
        assert_eq!(config.load_feature_set().unwrap().set_id, "default-8");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.json");
        std::fs::write(
            &path,
            r#"{"set_id":"tiny","features":[
                {"feature_id":"punct","display_name":"Punctuation","description":"Compare punctuation."}
            ]}"#,
        )
        .unwrap();
        let config = RunConfig {
            feature_set: Some(path.display().to_string()),
            ..RunConfig::default()
        };
        assert_eq!(config.load_feature_set().unwrap().set_id, "tiny");
    }
}
