use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    build_prompt, rule_rewrite, sanitize, ProposalStatus, Provenance, RewriteCandidate,
    RewriteProposal, SYSTEM_MESSAGE,
};

pub const DEFAULT_API_KEY_ENV: &str = "LIFT_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Rule,
    Llm,
    Replay,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule" => Ok(BackendKind::Rule),
            "llm" => Ok(BackendKind::Llm),
            "replay" => Ok(BackendKind::Replay),
            other => Err(format!("unknown backend `{other}` (expected rule, llm or replay)")),
        }
    }
}

/// Backend selection. The API key itself is never part of the config; only
/// the name of the environment variable that holds it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: String,
    pub max_parallel: usize,
    pub timeout_secs: u64,
    pub replay_path: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Rule,
            endpoint: None,
            model: None,
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            max_parallel: 4,
            timeout_secs: 30,
            replay_path: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("llm backend requires an endpoint")]
    MissingEndpoint,
    #[error("llm backend requires a model name")]
    MissingModel,
    #[error("environment variable {0} is not set; the llm backend needs an API key")]
    MissingApiKey(String),
    #[error("replay backend requires a replay file")]
    MissingReplayPath,
    #[error("max_parallel must be at least 1")]
    BadParallelism,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    ReplayFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no recorded response for block {block_addr:#x} statement {stmt_index}")]
    ReplayMiss { block_addr: u64, stmt_index: usize },
}

/// Recorded raw responses keyed by `(block_addr, stmt_index)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayBook {
    pub file: String,
    /// Maps a candidate to its source line number and raw response.
    pub entries: BTreeMap<(u64, usize), (usize, String)>,
}

fn parse_addr(s: &str) -> Option<u64> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

impl ReplayBook {
    pub fn parse(file: &str, text: &str) -> Result<ReplayBook, (usize, String)> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let lineno = n + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [addr, idx, payload] = fields[..] else {
                return Err((lineno, format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            let addr = parse_addr(addr.trim()).ok_or((lineno, format!("bad block address `{addr}`")))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| (lineno, format!("bad statement index `{idx}`")))?;
            let raw = BASE64
                .decode(payload.trim())
                .map_err(|e| (lineno, format!("bad base64 payload: {e}")))?;
            let raw = String::from_utf8(raw).map_err(|_| (lineno, "payload is not UTF-8".to_string()))?;
            entries.insert((addr, idx), (lineno, raw));
        }
        Ok(ReplayBook {
            file: file.to_string(),
            entries,
        })
    }

    pub fn render(entries: &BTreeMap<(u64, usize), String>) -> String {
        let mut out = String::new();
        for ((addr, idx), raw) in entries {
            out.push_str(&format!("{addr:#x}\t{idx}\t{}\n", BASE64.encode(raw)));
        }
        out
    }
}

pub fn load_replay_file(path: &Path) -> Result<ReplayBook, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    ReplayBook::parse(&name, &text).map_err(|(line, message)| {
        ConfigError::ReplayFormat {
            path: path.to_path_buf(),
            line,
            message,
        }
    })
}

pub fn write_replay_file(path: &Path, entries: &BTreeMap<(u64, usize), String>) -> io::Result<()> {
    fs::write(path, ReplayBook::render(entries))
}

pub struct LlmClient {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: String,
}

impl fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl LlmClient {
    fn complete(&self, prompt: &str) -> Result<String, String> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_MESSAGE},
                {"role": "user", "content": prompt},
            ],
        });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| e.to_string())?;
        let v: serde_json::Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        v.pointer("/choices/0/message/content")
            .or_else(|| v.pointer("/choices/0/text"))
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0] content".to_string())
    }
}

#[derive(Debug)]
pub enum Backend {
    Rule,
    Llm(LlmClient),
    Replay(ReplayBook),
}

impl Backend {
    /// Checks the configuration and prepares the backend: reads the API key
    /// from the environment or loads the replay file.
    pub fn from_config(cfg: &BackendConfig) -> Result<Backend, ConfigError> {
        if cfg.max_parallel == 0 {
            return Err(ConfigError::BadParallelism);
        }
        match cfg.kind {
            BackendKind::Rule => Ok(Backend::Rule),
            BackendKind::Llm => {
                let endpoint = cfg.endpoint.clone().ok_or(ConfigError::MissingEndpoint)?;
                let model = cfg.model.clone().ok_or(ConfigError::MissingModel)?;
                let api_key = std::env::var(&cfg.api_key_env)
                    .ok()
                    .filter(|k| !k.is_empty())
                    .ok_or_else(|| ConfigError::MissingApiKey(cfg.api_key_env.clone()))?;
                let agent = ureq::Agent::config_builder()
                    .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
                    .build()
                    .new_agent();
                Ok(Backend::Llm(LlmClient {
                    agent,
                    endpoint,
                    model,
                    api_key,
                }))
            }
            BackendKind::Replay => {
                let path = cfg.replay_path.as_ref().ok_or(ConfigError::MissingReplayPath)?;
                Ok(Backend::Replay(load_replay_file(path)?))
            }
        }
    }

    /// One proposal for one candidate. `Ok(None)` means the rule backend
    /// found no applicable rule.
    pub fn request(&self, c: &RewriteCandidate<'_>) -> Result<Option<RewriteProposal>, BackendError> {
        match self {
            Backend::Rule => Ok(rule_rewrite(c)),
            Backend::Llm(client) => match client.complete(&build_prompt(c)) {
                Ok(raw) => Ok(Some(sanitize(&raw, c))),
                Err(e) => {
                    log::warn!("backend request for {:#x}:{} failed: {e}", c.block_addr, c.stmt_index);
                    Ok(Some(RewriteProposal {
                        replacement: c.original.clone(),
                        provenance: Provenance::Llm { raw: String::new() },
                        status: ProposalStatus::RejectedSyntax(format!("backend-error: {e}")),
                    }))
                }
            },
            Backend::Replay(book) => {
                let Some((line, raw)) = book.entries.get(&(c.block_addr, c.stmt_index)) else {
                    return Err(BackendError::ReplayMiss {
                        block_addr: c.block_addr,
                        stmt_index: c.stmt_index,
                    });
                };
                let mut p = sanitize(raw, c);
                p.provenance = Provenance::Replay {
                    file: book.file.clone(),
                    line: *line,
                    raw: raw.clone(),
                };
                Ok(Some(p))
            }
        }
    }
}

/// Builds the configured backend and requests a single proposal.
pub fn backend_request(
    c: &RewriteCandidate<'_>,
    cfg: &BackendConfig,
) -> Result<Option<RewriteProposal>, BackendError> {
    Backend::from_config(cfg)?.request(c)
}
