use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lift_core::bench::{collect_metrics, compare_reports, render_report, ReportFormat};
use lift_core::corpus::{generate, GeneratorConfig, Preset};
use lift_core::cost::{profile_program, rank_statements};
use lift_core::pipeline::{read_program, run_pipeline, FileConfig, Overrides, PipelineError, RunConfig};
use lift_core::interp::mix64;
use lift_core::rewrite::{optimize_program, write_replay_file, BackendKind, Decision};
use lift_core::text::{print_program, print_statement};
use lift_core::verify::{verify_rewrite, MemoryCompare, VerifyPolicy};

#[derive(Parser)]
#[command(name = "lift", version, about = "Profile, rewrite and verify textual IR super-blocks")]
struct Cli {
    /// JSON config file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Rewrite backend: rule, llm or replay.
    #[arg(long)]
    backend: Option<BackendKind>,
    /// Chat-completion endpoint for the llm backend.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Recorded responses for the replay backend.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Number of statements to rewrite.
    #[arg(long = "top")]
    top: Option<usize>,
    /// Profiling runs per block.
    #[arg(long)]
    runs: Option<usize>,
    /// Differential verification trials.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// table or structured.
    #[arg(long)]
    format: Option<ReportFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate, then print the canonical form.
    Parse {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute every block from seeded states and report costs.
    Profile {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// List the most expensive statements.
    Rank {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rewrite the top statements and keep verified rewrites.
    Optimize {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Output program; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Rewrite log (JSON).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Save raw backend responses as a replay file.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Check that two programs behave identically block by block.
    Verify {
        original: PathBuf,
        optimized: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Compare the final memory image instead of the ordered write list;
        /// needed once stores have been merged.
        #[arg(long)]
        final_image: bool,
    },
    /// Compare metrics of two programs.
    Bench {
        before: PathBuf,
        after: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Include wall-clock time.
        #[arg(long)]
        wall_time: bool,
    },
    /// Generate a synthetic program and its ground-truth sidecar.
    Gen {
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long)]
        blocks: Option<usize>,
        #[arg(long)]
        stmts: Option<usize>,
        #[arg(long, default_value_t = 0.3)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for `<name>.vir` and `<name>.truth`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every phase and write the output directory.
    Pipeline {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        record: Option<PathBuf>,
        /// Include wall-clock time in the reports.
        #[arg(long)]
        wall_time: bool,
    },
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn config_failure(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 3,
        message: e.to_string(),
    }
}

fn write_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| write_failure(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn resolve(config: Option<&Path>, c: Common, extra: Overrides) -> Result<RunConfig, Failure> {
    let file = match config {
        Some(path) => FileConfig::load(path).map_err(config_failure)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        backend: c.backend,
        endpoint: c.endpoint,
        model: c.model,
        replay: c.replay,
        k: c.top,
        runs: c.runs,
        trials: c.trials,
        seed: c.seed,
        format: c.format,
        ..extra
    };
    Ok(RunConfig::resolve(file, flags))
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Parse { input, out } => {
            let p = read_program(&input)?;
            emit(out.as_deref(), &print_program(&p))?;
            Ok(0)
        }
        Command::Profile { input, common } => {
            let cfg = resolve(config, common, Overrides::default())?;
            let p = read_program(&input)?;
            let report = profile_program(&p, cfg.runs, cfg.seed, &cfg.weights);
            let text = match cfg.format {
                ReportFormat::Structured => {
                    serde_json::to_string_pretty(&report).expect("profile serializes") + "\n"
                }
                ReportFormat::Table => {
                    let mut t = format!(
                        "{:<20}{:>12}{:>16}{:>8}{:>9}\n",
                        "Block", "Static", "Mean cost", "Runs", "Faulted"
                    );
                    for b in &report.blocks {
                        let _ = writeln!(
                            t,
                            "{:<20}{:>12}{:>16.3}{:>8}{:>9}",
                            format!("{:#x}", b.block_addr),
                            b.static_cost,
                            b.mean_cost_units,
                            b.runs,
                            b.faulted_runs
                        );
                    }
                    let _ = writeln!(t, "total mean cost units: {:.3}", report.total_mean_cost_units());
                    t
                }
            };
            emit(None, &text)?;
            Ok(0)
        }
        Command::Rank { input, common } => {
            let cfg = resolve(config, common, Overrides::default())?;
            let p = read_program(&input)?;
            let mut t = String::new();
            for sc in rank_statements(&p, &cfg.weights, cfg.k) {
                let stmt = &p.blocks[&sc.block_addr].stmts[sc.stmt_index];
                let _ = writeln!(
                    t,
                    "{:#x}\t{}\t{}\t{}",
                    sc.block_addr,
                    sc.stmt_index,
                    sc.cost,
                    print_statement(stmt)
                );
            }
            emit(None, &t)?;
            Ok(0)
        }
        Command::Optimize {
            input,
            common,
            out,
            log,
            record,
        } => {
            let cfg = resolve(config, common, Overrides::default())?;
            let p = read_program(&input)?;
            let (opt, rewrite_log) =
                optimize_program(&p, cfg.k, &cfg.backend, &cfg.weights, &cfg.policy()).map_err(config_failure)?;
            emit(out.as_deref(), &print_program(&opt))?;
            if let Some(path) = log {
                let text = serde_json::to_string_pretty(&rewrite_log).expect("log serializes") + "\n";
                fs::write(&path, text).map_err(|e| write_failure(&path, e))?;
            }
            if let Some(path) = record {
                write_replay_file(&path, &rewrite_log.raw_responses()).map_err(|e| write_failure(&path, e))?;
            }
            Ok(if rewrite_log.unexpected_mismatches > 0 { 1 } else { 0 })
        }
        Command::Verify {
            original,
            optimized,
            common,
            final_image,
        } => {
            let cfg = resolve(config, common, Overrides::default())?;
            let a = read_program(&original)?;
            let b = read_program(&optimized)?;
            let mut failed = false;
            let mut t = String::new();
            for (addr, block) in &a.blocks {
                let Some(other) = b.blocks.get(addr) else {
                    failed = true;
                    let _ = writeln!(t, "{addr:#x}\tmissing from {}", optimized.display());
                    continue;
                };
                let policy = VerifyPolicy {
                    seed: mix64(cfg.seed, *addr),
                    memory: if final_image { MemoryCompare::FinalImage } else { MemoryCompare::WriteList },
                    ..cfg.policy()
                };
                let v = verify_rewrite(block, other, &policy);
                failed |= !v.is_accepted();
                let _ = writeln!(t, "{addr:#x}\t{v}");
            }
            for addr in b.blocks.keys() {
                if !a.blocks.contains_key(addr) {
                    failed = true;
                    let _ = writeln!(t, "{addr:#x}\tmissing from {}", original.display());
                }
            }
            emit(None, &t)?;
            Ok(if failed { 1 } else { 0 })
        }
        Command::Bench {
            before,
            after,
            common,
            wall_time,
        } => {
            let cfg = resolve(config, common, Overrides::default())?;
            let a = read_program(&before)?;
            let b = read_program(&after)?;
            let mut ma = collect_metrics(&a, cfg.runs, cfg.seed, &cfg.weights);
            let mut mb = collect_metrics(&b, cfg.runs, cfg.seed, &cfg.weights);
            if !wall_time {
                ma = ma.without_wall_time();
                mb = mb.without_wall_time();
            }
            let c = compare_reports(&ma, &mb).map_err(config_failure)?;
            emit(None, &render_report(&c, cfg.format))?;
            Ok(0)
        }
        Command::Gen {
            preset,
            blocks,
            stmts,
            rate,
            seed,
            out,
        } => {
            let mut g = match preset {
                Some(p) => GeneratorConfig::preset(p, rate, seed),
                None => GeneratorConfig::new(20, 24, rate, seed),
            };
            if let Some(b) = blocks {
                g.blocks = b;
            }
            if let Some(s) = stmts {
                g.stmts_per_block = s;
            }
            let (p, truth) = generate(&g).map_err(config_failure)?;
            fs::create_dir_all(&out).map_err(|e| write_failure(&out, e))?;
            let vir = out.join(format!("{}.vir", p.name));
            fs::write(&vir, print_program(&p)).map_err(|e| write_failure(&vir, e))?;
            let sidecar = out.join(format!("{}.truth", p.name));
            fs::write(&sidecar, truth.render()).map_err(|e| write_failure(&sidecar, e))?;
            eprintln!(
                "wrote {} ({} blocks, {} planted redundancies)",
                vir.display(),
                p.blocks.len(),
                truth.len()
            );
            Ok(0)
        }
        Command::Pipeline {
            input,
            common,
            out,
            record,
            wall_time,
        } => {
            let extra = Overrides {
                input: Some(input),
                out: Some(out),
                wall_time: wall_time.then_some(true),
                ..Overrides::default()
            };
            let mut cfg = resolve(config, common, extra)?;
            cfg.record = record;
            let result = run_pipeline(&cfg)?;
            emit(None, &result.report(cfg.format))?;
            let log = &result.log;
            eprintln!(
                "{} candidates: {} retained, {} discarded, {} rejected, {} without proposal",
                log.entries.len(),
                log.count(Decision::Retained),
                log.count(Decision::Discarded),
                log.count(Decision::Rejected),
                log.count(Decision::NoProposal),
            );
            if log.unexpected_mismatches > 0 {
                eprintln!(
                    "error: {} block(s) failed the final equivalence check and were restored",
                    log.unexpected_mismatches
                );
            }
            Ok(result.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
