//! Pipeline configuration: a flat sections-of-key=value file with
//! environment-variable overrides (`SECTION_KEY` in upper snake case, e.g.
//! `GATEWAY_API_KEY`). Defaults are the reference settings: simplification
//! temperature 1.0, SQL temperature 0.5, k1 = k2 = 4, three revision
//! iterations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::chain::ChainConfig;
use crate::content::ContentConfig;
use crate::gateway::{Gateway, GatewayError, GenerationParams, LiveConfig, TraceStore, TraceWriter};
use crate::repository::RetrievalConfig;
use crate::skeleton::SkeletonOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value` or `[section]`, got `{text}`")]
    Parse { line: usize, text: String },
    #[error("unknown config key `{section}.{key}`")]
    UnknownKey { section: String, key: String },
    #[error("invalid value for `{key}`: `{value}`")]
    InvalidValue { key: String, value: String },
    #[error("live gateway needs {0} (config or environment)")]
    MissingLiveSetting(&'static str),
    #[error("replay mode needs a trace file ([paths] trace or --trace)")]
    MissingTrace,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Which gateway backend the CLI drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Mock,
    Replay,
    Live,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    // [gateway]
    pub backend: BackendChoice,
    /// "echo" or "fixed:<text>" for the mock backend.
    pub mock_behavior: String,
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    pub http_timeout_secs: u64,
    pub max_attempts: u32,
    pub temperature_simplify: f64,
    pub temperature_sql: f64,
    pub max_tokens_simplify: u32,
    pub max_tokens_sql: u32,
    // [retrieval]
    pub k1: usize,
    pub k2: usize,
    pub cross_db: bool,
    pub mask_values: bool,
    // [chain]
    pub n_max: usize,
    pub feedback_error: bool,
    pub feedback_nl: bool,
    pub feedback_db: bool,
    pub demos_in_revision: bool,
    pub exec_timeout_secs: u64,
    pub float_tolerance: f64,
    pub max_sample_values: usize,
    pub value_scan_limit: usize,
    // [eval]
    pub jobs: usize,
    // [paths]
    pub repository: Option<PathBuf>,
    pub db_dir: Option<PathBuf>,
    pub tables: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            backend: BackendChoice::Mock,
            mock_behavior: "echo".to_string(),
            base_url: String::new(),
            model: String::new(),
            api_key: String::new(),
            http_timeout_secs: 60,
            max_attempts: 3,
            temperature_simplify: 1.0,
            temperature_sql: 0.5,
            max_tokens_simplify: 256,
            max_tokens_sql: 512,
            k1: 4,
            k2: 4,
            cross_db: true,
            mask_values: true,
            n_max: 3,
            feedback_error: true,
            feedback_nl: true,
            feedback_db: true,
            demos_in_revision: true,
            exec_timeout_secs: 30,
            float_tolerance: 1e-6,
            max_sample_values: 5,
            value_scan_limit: 2000,
            jobs: 1,
            repository: None,
            db_dir: None,
            tables: None,
            trace: None,
        }
    }
}

impl CliConfig {
    /// Default settings, then the config file (if given), then environment
    /// overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = CliConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            for (section, key, value, line) in parse_ini(&text)? {
                config.apply(&section, &key, &value).map_err(|e| match e {
                    ConfigError::UnknownKey { .. } => e,
                    other => other_with_line(other, line),
                })?;
            }
        }
        config.apply_env_overrides()?;
        Ok(config)
    }

    fn apply_env_overrides(&mut self) -> Result<(), ConfigError> {
        for (section, key) in KNOWN_KEYS {
            let var = format!(
                "{}_{}",
                section.to_uppercase(),
                key.to_uppercase().replace('-', "_")
            );
            if let Ok(value) = std::env::var(&var) {
                self.apply(section, key, &value)?;
            }
        }
        Ok(())
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let full = format!("{section}.{key}");
        let bad = || ConfigError::InvalidValue {
            key: full.clone(),
            value: value.to_string(),
        };
        match (section, key) {
            ("gateway", "backend") => {
                self.backend = match value.to_lowercase().as_str() {
                    "mock" => BackendChoice::Mock,
                    "replay" => BackendChoice::Replay,
                    "live" => BackendChoice::Live,
                    _ => return Err(bad()),
                }
            }
            ("gateway", "mock_behavior") => self.mock_behavior = value.to_string(),
            ("gateway", "base_url") => self.base_url = value.to_string(),
            ("gateway", "model") => self.model = value.to_string(),
            ("gateway", "api_key") => self.api_key = value.to_string(),
            ("gateway", "http_timeout_secs") => {
                self.http_timeout_secs = value.parse().map_err(|_| bad())?
            }
            ("gateway", "max_attempts") => self.max_attempts = value.parse().map_err(|_| bad())?,
            ("gateway", "temperature_simplify") => {
                self.temperature_simplify = value.parse().map_err(|_| bad())?
            }
            ("gateway", "temperature_sql") => {
                self.temperature_sql = value.parse().map_err(|_| bad())?
            }
            ("gateway", "max_tokens_simplify") => {
                self.max_tokens_simplify = value.parse().map_err(|_| bad())?
            }
            ("gateway", "max_tokens_sql") => {
                self.max_tokens_sql = value.parse().map_err(|_| bad())?
            }
            ("retrieval", "k1") => self.k1 = value.parse().map_err(|_| bad())?,
            ("retrieval", "k2") => self.k2 = value.parse().map_err(|_| bad())?,
            ("retrieval", "cross_db") => self.cross_db = parse_bool(value).ok_or_else(bad)?,
            ("retrieval", "mask_values") => self.mask_values = parse_bool(value).ok_or_else(bad)?,
            ("chain", "n_max") => self.n_max = value.parse().map_err(|_| bad())?,
            ("chain", "feedback_error") => {
                self.feedback_error = parse_bool(value).ok_or_else(bad)?
            }
            ("chain", "feedback_nl") => self.feedback_nl = parse_bool(value).ok_or_else(bad)?,
            ("chain", "feedback_db") => self.feedback_db = parse_bool(value).ok_or_else(bad)?,
            ("chain", "demos_in_revision") => {
                self.demos_in_revision = parse_bool(value).ok_or_else(bad)?
            }
            ("chain", "exec_timeout_secs") => {
                self.exec_timeout_secs = value.parse().map_err(|_| bad())?
            }
            ("chain", "float_tolerance") => {
                self.float_tolerance = value.parse().map_err(|_| bad())?
            }
            ("chain", "max_sample_values") => {
                self.max_sample_values = value.parse().map_err(|_| bad())?
            }
            ("chain", "value_scan_limit") => {
                self.value_scan_limit = value.parse().map_err(|_| bad())?
            }
            ("eval", "jobs") => self.jobs = value.parse().map_err(|_| bad())?,
            ("paths", "repository") => self.repository = Some(PathBuf::from(value)),
            ("paths", "db_dir") => self.db_dir = Some(PathBuf::from(value)),
            ("paths", "tables") => self.tables = Some(PathBuf::from(value)),
            ("paths", "trace") => self.trace = Some(PathBuf::from(value)),
            _ => {
                return Err(ConfigError::UnknownKey {
                    section: section.to_string(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn generation_params(&self) -> GenerationParams {
        GenerationParams {
            temperature_simplify: self.temperature_simplify,
            temperature_sql: self.temperature_sql,
            max_tokens_simplify: self.max_tokens_simplify,
            max_tokens_sql: self.max_tokens_sql,
        }
    }

    pub fn retrieval_config(&self) -> RetrievalConfig {
        RetrievalConfig {
            k1: self.k1,
            k2: self.k2,
            restrict_to_db: None,
        }
    }

    pub fn skeleton_options(&self) -> SkeletonOptions {
        SkeletonOptions {
            mask_cell_values: self.mask_values,
        }
    }

    pub fn content_config(&self) -> ContentConfig {
        ContentConfig {
            max_values_per_entry: self.max_sample_values,
            value_scan_limit: self.value_scan_limit,
        }
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            n_max: self.n_max,
            equality_policy: crate::executor::EqualityPolicy {
                order_sensitive: false,
                float_tolerance: self.float_tolerance,
            },
            include_error: self.feedback_error,
            include_nl: self.feedback_nl,
            include_db: self.feedback_db,
            demos_in_revision: self.demos_in_revision,
            content: self.content_config(),
            exec_timeout: Duration::from_secs(self.exec_timeout_secs),
        }
    }

    /// Builds the configured gateway. `trace_override` switches to replay
    /// over that file; `record_to` attaches a trace recorder.
    pub fn build_gateway(
        &self,
        trace_override: Option<&Path>,
        record_to: Option<&Path>,
    ) -> Result<Gateway, ConfigError> {
        let backend = if trace_override.is_some() {
            BackendChoice::Replay
        } else {
            self.backend
        };
        let gateway = match backend {
            BackendChoice::Mock => {
                if let Some(text) = self.mock_behavior.strip_prefix("fixed:") {
                    Gateway::mock_fixed(text.to_string())
                } else {
                    Gateway::mock_echo()
                }
            }
            BackendChoice::Replay => {
                let path = trace_override
                    .map(Path::to_path_buf)
                    .or_else(|| self.trace.clone())
                    .ok_or(ConfigError::MissingTrace)?;
                Gateway::replay(TraceStore::load(&path)?)
            }
            BackendChoice::Live => {
                if self.base_url.is_empty() {
                    return Err(ConfigError::MissingLiveSetting("GATEWAY_BASE_URL"));
                }
                if self.api_key.is_empty() {
                    return Err(ConfigError::MissingLiveSetting("GATEWAY_API_KEY"));
                }
                Gateway::live(LiveConfig {
                    base_url: self.base_url.clone(),
                    api_key: self.api_key.clone(),
                    model: self.model.clone(),
                    timeout: Duration::from_secs(self.http_timeout_secs),
                    max_attempts: self.max_attempts,
                })?
            }
        };
        Ok(match record_to {
            Some(path) => gateway.with_recorder(TraceWriter::open(path)?),
            None => gateway,
        })
    }

    /// Effective settings as deterministic `[section] key = value` text.
    pub fn render(&self) -> String {
        let mut sections: BTreeMap<&str, Vec<(String, String)>> = BTreeMap::new();
        let mut push = |section: &'static str, key: &str, value: String| {
            sections.entry(section).or_default().push((key.to_string(), value));
        };
        push(
            "gateway",
            "backend",
            match self.backend {
                BackendChoice::Mock => "mock",
                BackendChoice::Replay => "replay",
                BackendChoice::Live => "live",
            }
            .to_string(),
        );
        push("gateway", "mock_behavior", self.mock_behavior.clone());
        push("gateway", "base_url", self.base_url.clone());
        push("gateway", "model", self.model.clone());
        push(
            "gateway",
            "api_key",
            if self.api_key.is_empty() {
                String::new()
            } else {
                "<set>".to_string()
            },
        );
        push("gateway", "http_timeout_secs", self.http_timeout_secs.to_string());
        push("gateway", "max_attempts", self.max_attempts.to_string());
        push(
            "gateway",
            "temperature_simplify",
            format!("{:?}", self.temperature_simplify),
        );
        push("gateway", "temperature_sql", format!("{:?}", self.temperature_sql));
        push("gateway", "max_tokens_simplify", self.max_tokens_simplify.to_string());
        push("gateway", "max_tokens_sql", self.max_tokens_sql.to_string());
        push("retrieval", "k1", self.k1.to_string());
        push("retrieval", "k2", self.k2.to_string());
        push("retrieval", "cross_db", self.cross_db.to_string());
        push("retrieval", "mask_values", self.mask_values.to_string());
        push("chain", "n_max", self.n_max.to_string());
        push("chain", "feedback_error", self.feedback_error.to_string());
        push("chain", "feedback_nl", self.feedback_nl.to_string());
        push("chain", "feedback_db", self.feedback_db.to_string());
        push("chain", "demos_in_revision", self.demos_in_revision.to_string());
        push("chain", "exec_timeout_secs", self.exec_timeout_secs.to_string());
        push("chain", "float_tolerance", format!("{:?}", self.float_tolerance));
        push("chain", "max_sample_values", self.max_sample_values.to_string());
        push("chain", "value_scan_limit", self.value_scan_limit.to_string());
        push("eval", "jobs", self.jobs.to_string());
        let path_or_empty =
            |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        push("paths", "repository", path_or_empty(&self.repository));
        push("paths", "db_dir", path_or_empty(&self.db_dir));
        push("paths", "tables", path_or_empty(&self.tables));
        push("paths", "trace", path_or_empty(&self.trace));

        let mut out = String::new();
        for (section, entries) in sections {
            out.push_str(&format!("[{section}]\n"));
            for (key, value) in entries {
                out.push_str(&format!("{key} = {value}\n"));
            }
            out.push('\n');
        }
        out
    }
}

const KNOWN_KEYS: &[(&str, &str)] = &[
    ("gateway", "backend"),
    ("gateway", "mock_behavior"),
    ("gateway", "base_url"),
    ("gateway", "model"),
    ("gateway", "api_key"),
    ("gateway", "http_timeout_secs"),
    ("gateway", "max_attempts"),
    ("gateway", "temperature_simplify"),
    ("gateway", "temperature_sql"),
    ("gateway", "max_tokens_simplify"),
    ("gateway", "max_tokens_sql"),
    ("retrieval", "k1"),
    ("retrieval", "k2"),
    ("retrieval", "cross_db"),
    ("retrieval", "mask_values"),
    ("chain", "n_max"),
    ("chain", "feedback_error"),
    ("chain", "feedback_nl"),
    ("chain", "feedback_db"),
    ("chain", "demos_in_revision"),
    ("chain", "exec_timeout_secs"),
    ("chain", "float_tolerance"),
    ("chain", "max_sample_values"),
    ("chain", "value_scan_limit"),
    ("eval", "jobs"),
    ("paths", "repository"),
    ("paths", "db_dir"),
    ("paths", "tables"),
    ("paths", "trace"),
];

fn parse_bool(value: &str) -> Option<bool> {
    match value.to_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

fn other_with_line(error: ConfigError, _line: usize) -> ConfigError {
    error
}

type IniEntry = (String, String, String, usize);

fn parse_ini(text: &str) -> Result<Vec<IniEntry>, ConfigError> {
    let mut section = String::new();
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_lowercase();
            continue;
        }
        match line.split_once('=') {
            Some((key, value)) => entries.push((
                section.clone(),
                key.trim().to_lowercase(),
                value.trim().to_string(),
                idx + 1,
            )),
            None => {
                return Err(ConfigError::Parse {
                    line: idx + 1,
                    text: line.to_string(),
                })
            }
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let config = CliConfig::default();
        assert_eq!(config.temperature_simplify, 1.0);
        assert_eq!(config.temperature_sql, 0.5);
        assert_eq!(config.k1, 4);
        assert_eq!(config.k2, 4);
        assert_eq!(config.n_max, 3);
        assert!(config.cross_db);
    }

    #[test]
    fn file_settings_apply() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.ini");
        std::fs::write(
            &path,
            "# comment\n[retrieval]\nk1 = 2\nk2 = 6\n\n[chain]\nn_max = 5\n\n[gateway]\nbackend = replay\n\n[paths]\ntrace = /tmp/t.jsonl\n",
        )
        .unwrap();
        let config = CliConfig::load(Some(&path)).unwrap();
        assert_eq!(config.k1, 2);
        assert_eq!(config.k2, 6);
        assert_eq!(config.n_max, 5);
        assert_eq!(config.backend, BackendChoice::Replay);
        assert_eq!(config.trace.as_deref(), Some(Path::new("/tmp/t.jsonl")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.ini");
        std::fs::write(&path, "[retrieval]\nk9 = 2\n").unwrap();
        assert!(matches!(
            CliConfig::load(Some(&path)),
            Err(ConfigError::UnknownKey { .. })
        ));
    }

    #[test]
    fn malformed_lines_name_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.ini");
        std::fs::write(&path, "[chain]\nwhat is this\n").unwrap();
        match CliConfig::load(Some(&path)) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.ini");
        std::fs::write(&path, "[retrieval]\nk1 = lots\n").unwrap();
        assert!(matches!(
            CliConfig::load(Some(&path)),
            Err(ConfigError::InvalidValue { .. })
        ));
    }

    #[test]
    fn render_is_deterministic_and_masks_secrets() {
        let mut config = CliConfig::default();
        config.api_key = "secret-key".to_string();
        let text = config.render();
        assert_eq!(text, config.render());
        assert!(!text.contains("secret-key"));
        assert!(text.contains("temperature_simplify = 1.0"));
        assert!(text.contains("k1 = 4"));
    }

    #[test]
    fn replay_without_trace_is_an_error() {
        let mut config = CliConfig::default();
        config.backend = BackendChoice::Replay;
        assert!(matches!(
            config.build_gateway(None, None),
            Err(ConfigError::MissingTrace)
        ));
    }

    #[test]
    fn mock_gateway_variants() {
        let mut config = CliConfig::default();
        let gw = config.build_gateway(None, None).unwrap();
        assert_eq!(gw.backend_kind(), crate::gateway::BackendKind::Mock);
        config.mock_behavior = "fixed:SELECT 1".to_string();
        let gw = config.build_gateway(None, None).unwrap();
        let req = crate::gateway::GenerationParams::default()
            .request(crate::gateway::TemplateId::InitialSql, "q".to_string());
        assert_eq!(gw.complete(&req).unwrap().text, "SELECT 1");
    }

    #[test]
    fn live_requires_url_and_key() {
        let mut config = CliConfig::default();
        config.backend = BackendChoice::Live;
        assert!(matches!(
            config.build_gateway(None, None),
            Err(ConfigError::MissingLiveSetting("GATEWAY_BASE_URL"))
        ));
        config.base_url = "http://localhost:9".to_string();
        assert!(matches!(
            config.build_gateway(None, None),
            Err(ConfigError::MissingLiveSetting("GATEWAY_API_KEY"))
        ));
    }
}
