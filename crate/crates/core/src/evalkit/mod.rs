//! Evaluation: labeled datasets, per-stage metrics and the batch harness.
//!
//! Stages and their report columns:
//!
//! - planning: `TUA` (tool-use awareness), `PR` (pass rate), `Acc` (plan
//!   accuracy)
//! - selection: `Recall@K`, `NDCG@K`, `COMP@K`
//! - calling: `Cons`, `PE`, `EH`
//! - response: `BLEU`, `ROUGE-L`, `EM`

pub mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use metrics::{
    bleu, comp_at_k, dcg, exact_match, ndcg, ndcg_at_k, normalize, recall_at_k, rouge_l,
    task_planning_metrics, tool_calling_metrics, top_k, CallingMetrics, PlanGold, PlanPrediction,
    PlanningMetrics,
};

use crate::orchestrator::{Engine, Limits, Status, Task};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch or empty input ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("query {0} has an empty gold tool set")]
    EmptyGoldSet(usize),
    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub query: String,
    pub requires_tool: bool,
    #[serde(default)]
    pub gold_plan: Vec<String>,
    #[serde(default)]
    pub gold_tools: BTreeSet<String>,
    /// Expected parameters per tool call, in call order.
    #[serde(default)]
    pub gold_params: Vec<BTreeMap<String, Value>>,
    /// Relevance grade per candidate tool; unlisted tools grade 0.
    #[serde(default)]
    pub graded_relevance: BTreeMap<String, f64>,
    #[serde(default)]
    pub reference_answer: String,
}

/// Reads a JSONL dataset, checking grades are non-negative and gold tools
/// are among `tools`.
pub fn load_dataset<R: BufRead>(source: R, tools: &[String]) -> Result<Vec<EvalRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let err = |message: String| EvalError::Dataset { line: i + 1, message };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: EvalRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if let Some(t) = r.gold_tools.iter().find(|t| !tools.contains(t)) {
            return Err(err(format!("gold tool `{t}` is not registered")));
        }
        if let Some((t, g)) = r.graded_relevance.iter().find(|(_, g)| g.is_nan() || **g < 0.0) {
            return Err(err(format!("negative relevance {g} for `{t}`")));
        }
        out.push(r);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Planning,
    Selection,
    Calling,
    Response,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Planning, Stage::Selection, Stage::Calling, Stage::Response];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Planning => "planning",
            Stage::Selection => "selection",
            Stage::Calling => "calling",
            Stage::Response => "response",
        }
    }
}

impl FromStr for Stage {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| EvalError::UnknownStage(s.to_string()))
    }
}

/// Parses a comma-separated stage list; `all` selects every stage and an
/// empty string none.
pub fn parse_stages(spec: &str) -> Result<BTreeSet<Stage>, EvalError> {
    let mut out = BTreeSet::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part.eq_ignore_ascii_case("all") {
            out.extend(Stage::ALL);
        } else {
            out.insert(part.parse()?);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub queries: usize,
    /// Records whose solve did not reach a final answer.
    pub errors: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub counts: Counts,
    pub config: BTreeMap<String, String>,
    /// Stage name to metric name to value in `[0, 1]`. Metrics whose
    /// denominator is zero are omitted.
    pub stages: BTreeMap<String, BTreeMap<String, f64>>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Table with each metric as a ratio and as a percentage.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "queries: {}  errors: {}", self.counts.queries, self.counts.errors);
        let _ = writeln!(out, "{:<10} {:<10} {:>8} {:>9}", "stage", "metric", "value", "percent");
        for stage in Stage::ALL {
            let Some(metrics) = self.stages.get(stage.as_str()) else { continue };
            for name in column_order(stage, metrics) {
                let v = metrics[&name];
                let _ = writeln!(
                    out,
                    "{:<10} {:<10} {:>8.4} {:>8.2}%",
                    stage.as_str(),
                    name,
                    v,
                    100.0 * v
                );
            }
        }
        out
    }
}

fn column_order(stage: Stage, metrics: &BTreeMap<String, f64>) -> Vec<String> {
    let prefixes: &[&str] = match stage {
        Stage::Planning => &["TUA", "PR", "Acc"],
        Stage::Selection => &["Recall", "NDCG", "COMP"],
        Stage::Calling => &["Cons", "PE", "EH"],
        Stage::Response => &["BLEU", "ROUGE-L", "EM"],
    };
    let mut out: Vec<String> = prefixes
        .iter()
        .flat_map(|p| metrics.keys().filter(move |k| k.starts_with(p)).cloned())
        .collect();
    out.dedup();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub k: usize,
    pub limits: Limits,
    pub bleu_order: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            k: 3,
            limits: Limits::default(),
            bleu_order: 4,
        }
    }
}

/// What one solve produced, reduced to what the metrics need.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordResult {
    pub status: Option<Status>,
    pub final_answer: String,
    pub used_tool: bool,
    pub plan: Vec<String>,
    pub calls: Vec<BTreeMap<String, Value>>,
    pub validations: Vec<crate::tools::ValidationReport>,
    pub faults: usize,
    pub recovered: usize,
}

fn run_record(engine: &Engine, record: &EvalRecord, options: &EvalOptions) -> RecordResult {
    let task = Task::new(record.query.clone()).with_limits(options.limits);
    match engine.solve_session(&record.id, &task) {
        Err(e) => {
            log::warn!("record {}: {e}", record.id);
            RecordResult::default()
        }
        Ok(run) => {
            let tool_steps: Vec<_> = run.history.steps.iter().filter(|s| s.tool.is_some()).collect();
            RecordResult {
                status: Some(run.trajectory.status),
                final_answer: run.trajectory.final_answer.clone().unwrap_or_default(),
                used_tool: !tool_steps.is_empty(),
                plan: run.history.plan(),
                calls: tool_steps
                    .iter()
                    .map(|s| s.call.as_ref().map(|c| c.params.clone()).unwrap_or_default())
                    .collect(),
                validations: tool_steps.iter().filter_map(|s| s.validation.clone()).collect(),
                faults: run.stats.faults,
                recovered: run.stats.recovered,
            }
        }
    }
}

/// Distinct tools in order of first use.
fn selection(plan: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in plan {
        if !out.contains(t) {
            out.push(t.clone());
        }
    }
    out
}

/// Computes the requested stage metrics from per-record results.
pub fn score(
    dataset: &[EvalRecord],
    results: &[RecordResult],
    stages: &BTreeSet<Stage>,
    tools: &[String],
    options: &EvalOptions,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>, EvalError> {
    let mut out = BTreeMap::new();
    if dataset.is_empty() {
        return Ok(out);
    }
    let k = options.k;
    for stage in stages {
        let mut m = BTreeMap::new();
        match stage {
            Stage::Planning => {
                let gold: Vec<PlanGold> = dataset
                    .iter()
                    .map(|r| PlanGold { requires_tool: r.requires_tool, plan: r.gold_plan.clone() })
                    .collect();
                let preds: Vec<PlanPrediction> = results
                    .iter()
                    .map(|r| PlanPrediction {
                        used_tool: r.used_tool,
                        solved: r.status == Some(Status::Solved),
                        plan: r.plan.clone(),
                    })
                    .collect();
                let pm = task_planning_metrics(&gold, &preds)?;
                m.insert("TUA".into(), pm.awareness);
                m.insert("PR".into(), pm.pass_rate);
                m.insert("Acc".into(), pm.accuracy);
            }
            Stage::Selection => {
                // Only records that need tools have a gold selection.
                let idx: Vec<usize> = (0..dataset.len()).filter(|&i| !dataset[i].gold_tools.is_empty()).collect();
                if !idx.is_empty() {
                    let gold: Vec<BTreeSet<String>> = idx.iter().map(|&i| dataset[i].gold_tools.clone()).collect();
                    let ranked: Vec<Vec<String>> = idx.iter().map(|&i| selection(&results[i].plan)).collect();
                    let grades: Vec<Vec<f64>> = idx
                        .iter()
                        .zip(&ranked)
                        .map(|(&i, sel)| {
                            let mut full = sel.clone();
                            full.extend(tools.iter().filter(|t| !sel.contains(t)).cloned());
                            full.iter()
                                .map(|t| dataset[i].graded_relevance.get(t).copied().unwrap_or(0.0))
                                .collect()
                        })
                        .collect();
                    m.insert(format!("Recall@{k}"), recall_at_k(&gold, &ranked, k)?);
                    m.insert(format!("NDCG@{k}"), ndcg_at_k(&grades, k));
                    m.insert(format!("COMP@{k}"), comp_at_k(&gold, &ranked, k)?);
                }
            }
            Stage::Calling => {
                let reports: Vec<_> = results.iter().flat_map(|r| r.validations.iter().cloned()).collect();
                let pairs: Vec<_> = dataset
                    .iter()
                    .zip(results)
                    .flat_map(|(d, r)| {
                        d.gold_params.iter().enumerate().map(move |(i, g)| {
                            (r.calls.get(i).cloned().unwrap_or_default(), g.clone())
                        })
                    })
                    .collect();
                let faults = results.iter().map(|r| r.faults).sum();
                let recovered = results.iter().map(|r| r.recovered).sum();
                let cm = tool_calling_metrics(&reports, &pairs, faults, recovered);
                for (name, v) in [("Cons", cm.cons), ("PE", cm.pe), ("EH", cm.eh)] {
                    if let Some(v) = v {
                        m.insert(name.to_string(), v);
                    }
                }
            }
            Stage::Response => {
                let cands: Vec<String> = results.iter().map(|r| r.final_answer.clone()).collect();
                let refs: Vec<String> = dataset.iter().map(|r| r.reference_answer.clone()).collect();
                let pairs = cands.iter().zip(&refs);
                let n = dataset.len() as f64;
                m.insert(
                    "BLEU".into(),
                    pairs.clone().map(|(c, r)| bleu(c, r, options.bleu_order)).sum::<f64>() / n,
                );
                m.insert("ROUGE-L".into(), pairs.map(|(c, r)| rouge_l(c, r, 1.0)).sum::<f64>() / n);
                m.insert("EM".into(), exact_match(&cands, &refs)?);
            }
        }
        out.insert(stage.as_str().to_string(), m);
    }
    Ok(out)
}

/// Solves every record in its own backend session, then scores the
/// requested stages. Records are run one at a time because scripted
/// backends keep a single active session.
pub fn run_eval(
    engine: &Engine,
    dataset: &[EvalRecord],
    stages: &BTreeSet<Stage>,
    options: &EvalOptions,
) -> Result<MetricReport, EvalError> {
    let tools = engine.toolbox.registry().names();
    let results: Vec<RecordResult> = dataset.iter().map(|r| run_record(engine, r, options)).collect();
    let errors = results.iter().filter(|r| r.status != Some(Status::Solved)).count();
    let mut config = BTreeMap::new();
    config.insert("k".to_string(), options.k.to_string());
    config.insert("max_steps".to_string(), options.limits.max_steps.to_string());
    config.insert("max_repairs_per_step".to_string(), options.limits.max_repairs_per_step.to_string());
    config.insert("bleu_order".to_string(), options.bleu_order.to_string());
    config.insert("planner".to_string(), engine.backends.planner.identity());
    config.insert("tools".to_string(), tools.join(","));
    config.insert(
        "stages".to_string(),
        stages.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","),
    );
    Ok(MetricReport {
        counts: Counts { queries: dataset.len(), errors },
        config,
        stages: score(dataset, &results, stages, &tools, options)?,
    })
}
