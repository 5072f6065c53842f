//! Before/after metrics and their rendering.

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::cost::{profile_program, WeightTable};
use crate::ir::{Program, Statement};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecTime {
    /// Mean dynamic cost per run, summed over blocks.
    pub cost_units: f64,
    /// Mean wall-clock seconds per run. Omitted from artifacts that must be
    /// reproducible byte for byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub program: String,
    pub exec_time: ExecTime,
    /// WrTmp, Put, Store and Exit statements; IMark and NoOp are not counted.
    pub stmt_count: u64,
    pub put_count: u64,
    pub store_count: u64,
    /// Distinct temp indices referenced anywhere in the program.
    pub temp_count: u64,
    pub max_temp_index: u64,
    pub runs: usize,
    pub seed: u64,
}

impl MetricsReport {
    pub fn without_wall_time(mut self) -> MetricsReport {
        self.exec_time.wall_secs = None;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StaticCounts {
    pub stmt_count: u64,
    pub put_count: u64,
    pub store_count: u64,
    pub temp_count: u64,
    pub max_temp_index: u64,
}

pub fn static_counts(p: &Program) -> StaticCounts {
    let mut c = StaticCounts::default();
    let mut temps = BTreeSet::new();
    for b in p.blocks.values() {
        for s in &b.stmts {
            match s {
                Statement::IMark { .. } | Statement::NoOp => {}
                Statement::Put { .. } => {
                    c.stmt_count += 1;
                    c.put_count += 1;
                }
                Statement::Store { .. } => {
                    c.stmt_count += 1;
                    c.store_count += 1;
                }
                Statement::WrTmp { .. } | Statement::Exit { .. } => c.stmt_count += 1,
            }
        }
        temps.extend(b.referenced_temps().into_iter().map(|t| t.0));
    }
    c.temp_count = temps.len() as u64;
    c.max_temp_index = temps.last().copied().unwrap_or(0) as u64;
    c
}

pub fn collect_metrics(p: &Program, runs: usize, seed: u64, w: &WeightTable) -> MetricsReport {
    let counts = static_counts(p);
    let profile = profile_program(p, runs, seed, w);
    MetricsReport {
        program: p.name.clone(),
        exec_time: ExecTime {
            cost_units: profile.total_mean_cost_units(),
            wall_secs: Some(profile.total_mean_wall_secs()),
        },
        stmt_count: counts.stmt_count,
        put_count: counts.put_count,
        store_count: counts.store_count,
        temp_count: counts.temp_count,
        max_temp_index: counts.max_temp_index,
        runs,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub exec_time_cost_units: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_time_wall_secs: Option<f64>,
    pub stmt_count: i64,
    pub put_count: i64,
    pub store_count: i64,
    pub temp_count: i64,
    pub max_temp_index: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub program: String,
    pub runs: usize,
    pub seed: u64,
    pub before: MetricsReport,
    pub after: MetricsReport,
    /// `before - after` for every metric.
    pub deltas: Deltas,
    /// Reduction of mean cost units in percent, rounded to one decimal.
    /// Positive means faster.
    pub percent_time_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("reports are not comparable: {0}")]
pub struct IncomparableReports(String);

pub fn percent_reduction(before: f64, after: f64) -> f64 {
    if before > 0.0 {
        (before - after) / before * 100.0
    } else {
        0.0
    }
}

fn round1(x: f64) -> f64 {
    let r = (x * 10.0).round() / 10.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn delta(before: u64, after: u64) -> i64 {
    before as i64 - after as i64
}

pub fn compare_reports(
    before: &MetricsReport,
    after: &MetricsReport,
) -> Result<ComparisonReport, IncomparableReports> {
    if before.runs != after.runs {
        return Err(IncomparableReports(format!("runs {} vs {}", before.runs, after.runs)));
    }
    if before.seed != after.seed {
        return Err(IncomparableReports(format!("seed {} vs {}", before.seed, after.seed)));
    }
    let deltas = Deltas {
        exec_time_cost_units: before.exec_time.cost_units - after.exec_time.cost_units,
        exec_time_wall_secs: before.exec_time.wall_secs.zip(after.exec_time.wall_secs).map(|(b, a)| b - a),
        stmt_count: delta(before.stmt_count, after.stmt_count),
        put_count: delta(before.put_count, after.put_count),
        store_count: delta(before.store_count, after.store_count),
        temp_count: delta(before.temp_count, after.temp_count),
        max_temp_index: delta(before.max_temp_index, after.max_temp_index),
    };
    Ok(ComparisonReport {
        program: before.program.clone(),
        runs: before.runs,
        seed: before.seed,
        before: before.clone(),
        after: after.clone(),
        deltas,
        percent_time_reduction: round1(percent_reduction(
            before.exec_time.cost_units,
            after.exec_time.cost_units,
        )),
    })
}

/// `53.5% ↓` for a reduction, `2.0% ↑` for an increase, `0.0%` otherwise.
pub fn format_percent_change(rounded: f64) -> String {
    let magnitude = format!("{:.1}%", rounded.abs());
    if rounded > 0.0 {
        format!("{magnitude} ↓")
    } else if rounded < 0.0 {
        format!("{magnitude} ↑")
    } else {
        magnitude
    }
}

/// `217 ↓` for a reduction, `3 ↑` for an increase, `0` otherwise.
pub fn format_count_change(delta: i64) -> String {
    match delta.signum() {
        1 => format!("{delta} ↓"),
        -1 => format!("{} ↑", delta.unsigned_abs()),
        _ => "0".to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Table,
    Structured,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "structured" => Ok(ReportFormat::Structured),
            other => Err(format!("unknown format `{other}` (expected table or structured)")),
        }
    }
}

fn table_row(out: &mut String, cells: [&str; 4]) {
    let line = format!("{:<26}{:>14}{:>14}   {}", cells[0], cells[1], cells[2], cells[3]);
    let _ = writeln!(out, "{}", line.trim_end());
}

pub fn render_table(c: &ComparisonReport) -> String {
    let (b, a, d) = (&c.before, &c.after, &c.deltas);
    let mut out = String::new();
    table_row(&mut out, ["Metric", "Before", "After", "Change"]);
    table_row(
        &mut out,
        [
            "Execution Time",
            &format!("{:.6}", b.exec_time.cost_units),
            &format!("{:.6}", a.exec_time.cost_units),
            &format_percent_change(c.percent_time_reduction),
        ],
    );
    let counts = [
        ("IR Statement Count", b.stmt_count, a.stmt_count, d.stmt_count),
        ("PUT Instruction Count", b.put_count, a.put_count, d.put_count),
        ("Temporary Variable Count", b.temp_count, a.temp_count, d.temp_count),
    ];
    for (name, before, after, delta) in counts {
        table_row(
            &mut out,
            [name, &before.to_string(), &after.to_string(), &format_count_change(delta)],
        );
    }
    table_row(
        &mut out,
        [
            "Max Temp Variable Index",
            &format!("t{}", b.max_temp_index),
            &format!("t{}", a.max_temp_index),
            &format_count_change(d.max_temp_index),
        ],
    );
    out
}

/// Pretty JSON with object keys in sorted order.
pub fn render_structured(c: &ComparisonReport) -> String {
    let value = serde_json::to_value(c).expect("reports serialize");
    let mut s = serde_json::to_string_pretty(&value).expect("values serialize");
    s.push('\n');
    s
}

pub fn render_report(c: &ComparisonReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => render_table(c),
        ReportFormat::Structured => render_structured(c),
    }
}

pub fn parse_structured(text: &str) -> serde_json::Result<ComparisonReport> {
    serde_json::from_str(text)
}

/// Multi-program summary of reductions, one row per comparison. The
/// memory-instruction column is the PUT reduction.
pub fn render_reduction_table(rows: &[ComparisonReport]) -> String {
    let mut out = String::new();
    let header = format!(
        "{:<14}{:>16}{:>20}{:>21}{:>26}",
        "Program", "Execution Time", "IR Statement Count", "Memory Instructions", "Temporary Variable Count"
    );
    let _ = writeln!(out, "{header}");
    for c in rows {
        let pct = percent_reduction(c.before.exec_time.cost_units, c.after.exec_time.cost_units);
        let line = format!(
            "{:<14}{:>16}{:>20}{:>21}{:>26}",
            c.program,
            format!("{pct:.2}%"),
            c.deltas.stmt_count,
            c.deltas.put_count,
            c.deltas.temp_count
        );
        let _ = writeln!(out, "{}", line.trim_end());
    }
    out
}
