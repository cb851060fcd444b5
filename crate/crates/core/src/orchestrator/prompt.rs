//! Instruction templates and the planner / reflection reply grammars.

use std::collections::BTreeMap;
#[cfg(test)]
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::tools::ToolRegistry;

pub const PLACEHOLDERS: &[&str] = &["x", "history", "step", "fault", "tools"];

/// Templates for the four roles. `{x}` is the task, `{history}` the
/// serialized solution so far, `{step}` the current sub-task, `{fault}`
/// the error being handled and `{tools}` the tool protocols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub plan: String,
    pub expert: String,
    /// Per-tool expert templates overriding `expert`.
    pub expert_overrides: BTreeMap<String, String>,
    pub fault: String,
    pub revise: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        let mut expert_overrides = BTreeMap::new();
        expert_overrides.insert(
            "code".to_string(),
            "Task: {x}\n\nSolution so far:\n{history}\n\nCurrent step: {step}\n\
             Write a Python program that performs the current step and prints its result."
                .to_string(),
        );
        expert_overrides.insert(
            "math".to_string(),
            "Task: {x}\n\nSolution so far:\n{history}\n\nCurrent step: {step}\n\
             Reply with a single arithmetic expression that computes the step."
                .to_string(),
        );
        PromptTemplates {
            plan: "Solve the task one sub-task at a time with the tools below.\n\
                   Tools:\n{tools}\n\nTask: {x}\n\nSolution so far:\n{history}\n{fault}\n\
                   Reply with `TOOL: <name>` and `STEP: <sub-task>` for the next step \
                   (`TOOL: none` if no tool is needed), or `FINAL: <answer>` once the \
                   solution answers the task."
                .to_string(),
            expert: "Task: {x}\n\nSolution so far:\n{history}\n\nCurrent step: {step}\n\
                     Produce the input for the tool."
                .to_string(),
            expert_overrides,
            fault: "Task: {x}\n\nSolution so far:\n{history}\n\nThe step `{step}` failed: {fault}\n\
                    Identify the faulty step and its tool. Reply with `FAULT_STEP: <number>` \
                    and `FAULT_TOOL: <name>`."
                .to_string(),
            revise: "Solution so far:\n{history}\n\nStep to revise: {step}\nIt failed: {fault}\n\
                     Produce a corrected input for the tool."
                .to_string(),
        }
    }
}

/// Placeholder names used in a template, in order of first appearance.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close)
                if close > 0
                    && after[..close].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') =>
            {
                let name = after[..close].to_string();
                if !out.contains(&name) {
                    out.push(name);
                }
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

impl PromptTemplates {
    pub fn expert_for(&self, tool: &str) -> &str {
        self.expert_overrides.get(tool).unwrap_or(&self.expert)
    }

    /// Checks that every template uses only known placeholders and
    /// contains the ones the loop relies on.
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let mut checks: Vec<(String, &str, &[&str])> = vec![
            ("plan".into(), &self.plan, &["x"]),
            ("expert".into(), &self.expert, &["step"]),
            ("fault".into(), &self.fault, &["fault"]),
            ("revise".into(), &self.revise, &["step", "fault"]),
        ];
        for (tool, t) in &self.expert_overrides {
            checks.push((format!("expert.{tool}"), t, &["step"]));
        }
        for (role, template, required) in checks {
            let used = placeholders(template);
            if let Some(bad) = used.iter().find(|p| !PLACEHOLDERS.contains(&p.as_str())) {
                return Err(OrchestratorError::Template(format!(
                    "template `{role}` uses unknown placeholder {{{bad}}}"
                )));
            }
            for r in required {
                if !used.iter().any(|u| u == r) {
                    return Err(OrchestratorError::Template(format!(
                        "template `{role}` must contain {{{r}}}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Final(String),
    /// `tool` is `None` when the planner answers the sub-task itself.
    Step { tool: Option<String>, description: String },
}

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let t = line.trim_start();
    let head = t.get(..key.len())?;
    if head.eq_ignore_ascii_case(key) {
        Some(t[key.len()..].trim())
    } else {
        None
    }
}

fn parse_fault(reason: impl Into<String>, raw: &str) -> OrchestratorError {
    OrchestratorError::ParseFault {
        reason: reason.into(),
        raw: raw.to_string(),
    }
}

/// Parses `FINAL: <answer>` or `TOOL: <name>` + `STEP: <description>`.
/// Keys are case-insensitive; a final answer runs to the end of the reply.
/// Tool names may be bracketed (`[code]`).
pub fn parse_action(raw: &str, registry: &ToolRegistry) -> Result<Action, OrchestratorError> {
    let lines: Vec<&str> = raw.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if let Some(first) = field(line, "FINAL:") {
            let mut answer = first.to_string();
            for more in &lines[i + 1..] {
                answer.push('\n');
                answer.push_str(more);
            }
            let answer = answer.trim().to_string();
            if answer.is_empty() {
                return Err(parse_fault("empty final answer", raw));
            }
            return Ok(Action::Final(answer));
        }
    }
    let tool = lines.iter().find_map(|l| field(l, "TOOL:"));
    let step = lines.iter().find_map(|l| field(l, "STEP:"));
    let (Some(tool), Some(step)) = (tool, step) else {
        return Err(parse_fault("expected `TOOL:` and `STEP:` or `FINAL:`", raw));
    };
    if step.is_empty() {
        return Err(parse_fault("empty step description", raw));
    }
    let name = tool.trim_start_matches('[').trim_end_matches(']').trim().to_lowercase();
    let tool = match name.as_str() {
        "none" | "" => None,
        n if registry.contains(n) => Some(n.to_string()),
        n => return Err(parse_fault(format!("unknown tool `{n}`"), raw)),
    };
    Ok(Action::Step {
        tool,
        description: step.to_string(),
    })
}

/// Parses `FAULT_STEP: <i>` and `FAULT_TOOL: <name>`; `i` must lie in
/// `1..=current`.
pub fn parse_fault_reply(raw: &str, current: usize) -> Result<(usize, String), OrchestratorError> {
    let step = raw.lines().find_map(|l| field(l, "FAULT_STEP:"));
    let tool = raw.lines().find_map(|l| field(l, "FAULT_TOOL:"));
    let (Some(step), Some(tool)) = (step, tool) else {
        return Err(parse_fault("expected `FAULT_STEP:` and `FAULT_TOOL:`", raw));
    };
    let index: usize = step
        .trim()
        .parse()
        .map_err(|_| parse_fault(format!("bad step number `{step}`"), raw))?;
    if index == 0 || index > current {
        return Err(OrchestratorError::IndexOutOfRange { index, current });
    }
    let tool = tool.trim_start_matches('[').trim_end_matches(']').trim().to_lowercase();
    Ok((index, tool))
}

#[cfg(test)]
fn unused_placeholders(templates: &PromptTemplates) -> BTreeSet<String> {
    let all = [&templates.plan, &templates.expert, &templates.fault, &templates.revise];
    let used: BTreeSet<String> = all.iter().flat_map(|t| placeholders(t)).collect();
    PLACEHOLDERS
        .iter()
        .map(|s| s.to_string())
        .filter(|p| !used.contains(p))
        .collect()
}
