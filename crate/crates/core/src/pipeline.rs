//! End-to-end run: parse, profile, rank, rewrite with verification,
//! measure and write the results.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{collect_metrics, compare_reports, render_structured, render_table, ComparisonReport, ReportFormat};
use crate::cost::WeightTable;
use crate::ir::Program;
use crate::rewrite::{
    optimize_with_backend, write_replay_file, Backend, BackendConfig, BackendKind, ConfigError, OptimizeOptions,
    RewriteLog,
};
use crate::text::{parse_program, print_program, TextError};
use crate::verify::{VerifyPolicy, DEFAULT_TRIALS};

pub const OPTIMIZED_FILE: &str = "optimized.vir";
pub const LOG_FILE: &str = "rewrite_log.json";
pub const REPORT_TABLE_FILE: &str = "report.txt";
pub const REPORT_JSON_FILE: &str = "report.json";

/// Settings as read from a JSON config file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub weights: Option<WeightTable>,
    pub backend: Option<BackendConfig>,
    pub k: Option<usize>,
    pub runs: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<ReportFormat>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub wall_time: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Values given on the command line; they win over the config file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub replay: Option<PathBuf>,
    pub k: Option<usize>,
    pub runs: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<ReportFormat>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub wall_time: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub weights: WeightTable,
    pub backend: BackendConfig,
    pub k: usize,
    pub runs: usize,
    pub trials: usize,
    pub seed: u64,
    pub format: ReportFormat,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Include wall-clock time in the reports. Off by default because it
    /// makes the output differ between runs.
    pub wall_time: bool,
    /// Where to write the raw backend responses in replay-file form.
    pub record: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            weights: WeightTable::default(),
            backend: BackendConfig::default(),
            k: 10,
            runs: 100,
            trials: DEFAULT_TRIALS,
            seed: 0,
            format: ReportFormat::Table,
            input: None,
            out: None,
            wall_time: false,
            record: None,
        }
    }
}

impl RunConfig {
    /// Command-line flag, then config file, then default.
    pub fn resolve(file: FileConfig, flags: Overrides) -> RunConfig {
        let d = RunConfig::default();
        let mut backend = file.backend.unwrap_or_default();
        if let Some(kind) = flags.backend {
            backend.kind = kind;
        }
        if flags.endpoint.is_some() {
            backend.endpoint = flags.endpoint;
        }
        if flags.model.is_some() {
            backend.model = flags.model;
        }
        if flags.replay.is_some() {
            backend.replay_path = flags.replay;
        }
        RunConfig {
            weights: file.weights.unwrap_or(d.weights),
            backend,
            k: flags.k.or(file.k).unwrap_or(d.k),
            runs: flags.runs.or(file.runs).unwrap_or(d.runs),
            trials: flags.trials.or(file.trials).unwrap_or(d.trials),
            seed: flags.seed.or(file.seed).unwrap_or(d.seed),
            format: flags.format.or(file.format).unwrap_or(d.format),
            input: flags.input.or(file.input),
            out: flags.out.or(file.out),
            wall_time: flags.wall_time.or(file.wall_time).unwrap_or(d.wall_time),
            record: None,
        }
    }

    pub fn policy(&self) -> VerifyPolicy {
        VerifyPolicy {
            trials: self.trials,
            seed: self.seed,
            ..VerifyPolicy::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("no input file given")]
    NoInput,
    #[error("cannot read {path}: {source}")]
    ReadInput {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {error}", line = error.line())]
    Parse { path: PathBuf, error: TextError },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::NoInput | PipelineError::ReadInput { .. } | PipelineError::Parse { .. } => 2,
            PipelineError::Config(_) | PipelineError::Write { .. } => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub optimized: Program,
    pub log: RewriteLog,
    pub comparison: ComparisonReport,
}

impl PipelineOutput {
    /// 1 if any block's combined rewrites failed the final check.
    pub fn exit_code(&self) -> i32 {
        if self.log.unexpected_mismatches > 0 {
            1
        } else {
            0
        }
    }

    pub fn report(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Table => render_table(&self.comparison),
            ReportFormat::Structured => render_structured(&self.comparison),
        }
    }
}

pub fn read_program(path: &Path) -> Result<Program, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::ReadInput {
        path: path.to_path_buf(),
        source,
    })?;
    let mut p = parse_program(&text).map_err(|error| PipelineError::Parse {
        path: path.to_path_buf(),
        error,
    })?;
    p.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(p)
}

/// Runs every phase on an already parsed program without touching the
/// filesystem.
pub fn optimize_and_measure(p: &Program, cfg: &RunConfig) -> Result<PipelineOutput, ConfigError> {
    let backend = Backend::from_config(&cfg.backend)?;
    let mut before = collect_metrics(p, cfg.runs, cfg.seed, &cfg.weights);
    let opts = OptimizeOptions {
        k: cfg.k,
        weights: cfg.weights.clone(),
        policy: cfg.policy(),
        max_parallel: cfg.backend.max_parallel,
    };
    let (optimized, log) = optimize_with_backend(p, &backend, &opts);
    let mut after = collect_metrics(&optimized, cfg.runs, cfg.seed, &cfg.weights);
    if !cfg.wall_time {
        before = before.without_wall_time();
        after = after.without_wall_time();
    }
    after.program = before.program.clone();
    let comparison = compare_reports(&before, &after).expect("same runs and seed");
    Ok(PipelineOutput {
        optimized,
        log,
        comparison,
    })
}

fn write(path: PathBuf, contents: &str) -> Result<(), PipelineError> {
    fs::write(&path, contents).map_err(|source| PipelineError::Write { path, source })
}

/// Reads the input, runs all phases and writes the output directory. No
/// file is written unless the input parses and the backend is usable.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput, PipelineError> {
    let input = cfg.input.as_ref().ok_or(PipelineError::NoInput)?;
    let program = read_program(input)?;
    let out = optimize_and_measure(&program, cfg)?;

    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir).map_err(|source| PipelineError::Write {
            path: dir.clone(),
            source,
        })?;
        write(dir.join(OPTIMIZED_FILE), &print_program(&out.optimized))?;
        let mut log = serde_json::to_string_pretty(&out.log).expect("log serializes");
        log.push('\n');
        write(dir.join(LOG_FILE), &log)?;
        write(dir.join(REPORT_TABLE_FILE), &render_table(&out.comparison))?;
        write(dir.join(REPORT_JSON_FILE), &render_structured(&out.comparison))?;
    }
    if let Some(path) = &cfg.record {
        write_replay_file(path, &out.log.raw_responses()).map_err(|source| PipelineError::Write {
            path: path.clone(),
            source,
        })?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let file = FileConfig {
            k: Some(5),
            runs: Some(7),
            seed: Some(3),
            ..FileConfig::default()
        };
        let flags = Overrides {
            k: Some(9),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(file, flags);
        assert_eq!((cfg.k, cfg.runs, cfg.seed, cfg.trials), (9, 7, 3, 64));
        let d = RunConfig::resolve(FileConfig::default(), Overrides::default());
        assert_eq!((d.k, d.runs, d.trials, d.seed), (10, 100, 64, 0));
    }

    #[test]
    fn config_file_rejects_keys() {
        let r: Result<FileConfig, _> = serde_json::from_str(r#"{"backend":{"kind":"llm","api_key":"x"}}"#);
        assert!(r.is_err());
        let r: FileConfig = serde_json::from_str(r#"{"backend":{"kind":"replay","replay_path":"r.tsv"},"weights":{"store_base":9}}"#).unwrap();
        assert_eq!(r.backend.unwrap().kind, BackendKind::Replay);
        assert_eq!(r.weights.unwrap().store_base, 9);
    }
}
