//! Solution history and exported trajectories.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::tools::{ToolCall, ToolOutcome, ValidationReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Repair {
    pub fault_step: usize,
    pub fault_tool: String,
    pub fault_detail: String,
    pub revised: ToolOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionStep {
    /// 1-based.
    pub index: usize,
    pub description: String,
    pub tool: Option<String>,
    /// The call as first extracted, before any repair.
    pub call: Option<ToolCall>,
    pub validation: Option<ValidationReport>,
    pub outcome: ToolOutcome,
    pub repairs: Vec<Repair>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolutionHistory {
    pub steps: Vec<SolutionStep>,
}

impl SolutionHistory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Step descriptions and final outputs in step order; repair records
    /// are not included.
    pub fn serialize(&self) -> String {
        self.serialize_prefix(self.steps.len())
    }

    /// Serialization of the first `n` steps.
    pub fn serialize_prefix(&self, n: usize) -> String {
        let mut out = String::new();
        for s in self.steps.iter().take(n) {
            out.push_str(&format!(
                "Step {}: {}\nTool: {}\nOutput: {}\n",
                s.index,
                s.description,
                s.tool.as_deref().unwrap_or("none"),
                s.outcome.reformulated
            ));
        }
        out
    }

    /// Tools used, in step order, skipping tool-less steps.
    pub fn plan(&self) -> Vec<String> {
        self.steps.iter().filter_map(|s| s.tool.clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    StepLimit,
    RepairLimit,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: usize,
    pub description: String,
    pub tool: Option<String>,
    pub input: String,
    pub output: String,
    pub result: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x: String,
    pub steps: Vec<TrajectoryStep>,
    pub final_answer: Option<String>,
    pub status: Status,
}

impl Trajectory {
    pub fn from_history(x: &str, history: &SolutionHistory, final_answer: Option<String>, status: Status) -> Self {
        Trajectory {
            x: x.to_string(),
            steps: history
                .steps
                .iter()
                .map(|s| TrajectoryStep {
                    step: s.index,
                    description: s.description.clone(),
                    tool: s.tool.clone(),
                    input: s.outcome.input.clone(),
                    output: s.outcome.raw.clone(),
                    result: s.outcome.reformulated.clone(),
                })
                .collect(),
            final_answer,
            status,
        }
    }

    /// Human-readable layout: one block per step, then the final answer.
    pub fn render(&self) -> String {
        let mut out = format!("Task: {}\n", self.x);
        for s in &self.steps {
            out.push_str(&format!("\nStep {}: {}\n", s.step, s.description));
            let tool = s.tool.as_deref().unwrap_or("none");
            out.push_str(&format!("Tool: [{tool}]\n"));
            if s.tool.is_some() {
                let label = if tool == "code" { "Code" } else { "Input" };
                out.push_str(&format!("{label}:\n"));
                for line in s.input.lines() {
                    out.push_str(&format!("    {line}\n"));
                }
                out.push_str(&format!("Output: {}\n", s.output));
            }
            let result = s.result.strip_prefix("Result: ").unwrap_or(&s.result);
            out.push_str(&format!("Result: {result}\n"));
        }
        match &self.final_answer {
            Some(a) => out.push_str(&format!("\nFinal Answer: {a}\n")),
            None => out.push_str(&format!("\nNo final answer ({:?})\n", self.status)),
        }
        out
    }
}

pub fn export_trajectories<W: Write>(trajectories: &[Trajectory], mut sink: W) -> Result<(), OrchestratorError> {
    for t in trajectories {
        let line = serde_json::to_string(t).expect("trajectory serializes");
        writeln!(sink, "{line}")?;
    }
    sink.flush()?;
    Ok(())
}

pub fn import_trajectories<R: BufRead>(source: R) -> Result<Vec<Trajectory>, OrchestratorError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|e| OrchestratorError::TrajectoryParse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}
