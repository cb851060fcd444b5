//! The solve loop.
//!
//! Each iteration asks the planner for the next action given the task and
//! the history so far. A tool step is handed to that tool's expert, whose
//! reply becomes the tool input. When a step fails, the reflection role
//! names the faulty step and tool, and the tool's expert regenerates that
//! step's input under the revision template. Planner replies that cannot
//! be parsed draw on the same per-step repair budget, so a step costs at
//! most `2 + 2 * max_repairs_per_step` backend calls.

pub mod history;
pub mod prompt;

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use history::{
    export_trajectories, import_trajectories, Repair, SolutionHistory, SolutionStep, Status,
    Trajectory, TrajectoryStep,
};
pub use prompt::{parse_action, parse_fault_reply, render, Action, PromptTemplates};

use crate::tools::{
    invoke_expert, validate_call, BackendError, Instruction, ModelBackend, ToolOutcome, Toolbox,
};

#[derive(Debug, Error, PartialEq)]
pub enum OrchestratorError {
    #[error("could not parse reply ({reason}): {raw}")]
    ParseFault { reason: String, raw: String },
    #[error("fault step {index} is outside 1..={current}")]
    IndexOutOfRange { index: usize, current: usize },
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error("template error: {0}")]
    Template(String),
    #[error("limits must be at least 1")]
    InvalidLimits,
    #[error("trajectory line {line}: {message}")]
    TrajectoryParse { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for OrchestratorError {
    fn from(e: std::io::Error) -> Self {
        OrchestratorError::Io(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_steps: usize,
    pub max_repairs_per_step: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_steps: 10,
            max_repairs_per_step: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub x: String,
    pub limits: Limits,
}

impl Task {
    pub fn new(x: impl Into<String>) -> Self {
        Task {
            x: x.into(),
            limits: Limits::default(),
        }
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    Plan,
    Execute,
    Fault,
    Revise,
    Final,
    Stop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub at: DateTime<Utc>,
    pub session: String,
    pub kind: AuditKind,
    pub step: usize,
    pub detail: String,
}

impl AuditEvent {
    pub fn line(&self) -> String {
        format!(
            "{}\t{}\t{}\tstep={}\t{}",
            self.at.to_rfc3339_opts(SecondsFormat::Millis, true),
            self.session,
            serde_json::to_value(self.kind).expect("kind serializes").as_str().unwrap_or(""),
            self.step,
            self.detail.replace('\n', "\\n")
        )
    }
}

/// Fault bookkeeping for the calling-stage metrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Failure episodes: a step whose tool failed, or a planner reply that
    /// could not be used.
    pub faults: usize,
    /// Episodes that ended in success within the repair budget.
    pub recovered: usize,
    pub repairs: usize,
}

#[derive(Clone, Debug)]
pub struct SolveRun {
    pub trajectory: Trajectory,
    pub history: SolutionHistory,
    pub stats: SolveStats,
    pub audit: Vec<AuditEvent>,
}

/// Model backends per role. The reflection role defaults to the planner.
#[derive(Clone)]
pub struct Backends {
    pub planner: Arc<dyn ModelBackend>,
    pub reflector: Option<Arc<dyn ModelBackend>>,
    pub experts: BTreeMap<String, Arc<dyn ModelBackend>>,
}

impl Backends {
    /// Every role served by one backend.
    pub fn single(backend: Arc<dyn ModelBackend>, tools: &[&str]) -> Self {
        Backends {
            planner: backend.clone(),
            reflector: None,
            experts: tools.iter().map(|t| (t.to_string(), backend.clone())).collect(),
        }
    }

    fn reflector(&self) -> &dyn ModelBackend {
        self.reflector.as_deref().unwrap_or(self.planner.as_ref())
    }

    fn all(&self) -> impl Iterator<Item = &Arc<dyn ModelBackend>> {
        std::iter::once(&self.planner)
            .chain(self.reflector.iter())
            .chain(self.experts.values())
    }
}

pub struct Engine {
    pub toolbox: Toolbox,
    pub backends: Backends,
    pub templates: PromptTemplates,
    pub audit_path: Option<PathBuf>,
}

struct Audit {
    session: String,
    events: Vec<AuditEvent>,
}

impl Audit {
    fn log(&mut self, kind: AuditKind, step: usize, detail: impl Into<String>) {
        let e = AuditEvent {
            at: Utc::now(),
            session: self.session.clone(),
            kind,
            step,
            detail: detail.into(),
        };
        log::debug!("{}", e.line());
        self.events.push(e);
    }
}

impl Engine {
    pub fn new(toolbox: Toolbox, backends: Backends) -> Self {
        Engine {
            toolbox,
            backends,
            templates: PromptTemplates::default(),
            audit_path: None,
        }
    }

    fn expert_backend(&self, tool: &str) -> Option<&dyn ModelBackend> {
        self.backends.experts.get(tool).map(|b| b.as_ref())
    }

    /// Planner call; `fault` describes why the previous reply was rejected.
    pub fn next_action(
        &self,
        task: &Task,
        history: &SolutionHistory,
        fault: Option<&str>,
    ) -> Result<Action, OrchestratorError> {
        let fault = fault
            .map(|f| format!("\nYour previous reply could not be used: {f}\n"))
            .unwrap_or_default();
        let text = render(
            &self.templates.plan,
            &[
                ("x", &task.x),
                ("history", &history.serialize()),
                ("tools", &self.toolbox.registry().describe()),
                ("fault", &fault),
                ("step", ""),
            ],
        );
        let reply = self.backends.planner.complete(&Instruction::new("plan", text), &task.x)?;
        parse_action(&reply, self.toolbox.registry())
    }

    /// Runs one tool step against the current history. The history is not
    /// modified.
    pub fn execute_step(&self, task: &Task, history: &SolutionHistory, tool: &str, description: &str) -> SolutionStep {
        let index = history.len() + 1;
        let Ok(expert) = self.toolbox.get(tool) else {
            return SolutionStep {
                index,
                description: description.to_string(),
                tool: Some(tool.to_string()),
                call: None,
                validation: None,
                outcome: ToolOutcome::failed("", "", format!("unknown tool `{tool}`")),
                repairs: Vec::new(),
            };
        };
        let text = render(
            self.templates.expert_for(tool),
            &[
                ("x", &task.x),
                ("history", &history.serialize()),
                ("step", description),
                ("fault", ""),
                ("tools", ""),
            ],
        );
        let instruction = Instruction::new(format!("expert.{tool}"), text);
        let (call, outcome) = invoke_expert(
            expert.as_ref(),
            self.expert_backend(tool),
            &instruction,
            description,
            description,
        );
        let validation = validate_call(self.toolbox.registry(), &call).ok();
        SolutionStep {
            index,
            description: description.to_string(),
            tool: Some(tool.to_string()),
            call: Some(call),
            validation,
            outcome,
            repairs: Vec::new(),
        }
    }

    /// Reflection: which step (1..=current) and tool caused `failed`.
    pub fn identify_fault(
        &self,
        task: &Task,
        history: &SolutionHistory,
        failed: &SolutionStep,
    ) -> Result<(usize, String), OrchestratorError> {
        let detail = failed.outcome.error_detail.clone().unwrap_or_default();
        let text = render(
            &self.templates.fault,
            &[
                ("x", &task.x),
                ("history", &history.serialize()),
                ("step", &failed.description),
                ("fault", &detail),
                ("tools", ""),
            ],
        );
        let reply = self.backends.reflector().complete(&Instruction::new("fault", text), &detail)?;
        parse_fault_reply(&reply, history.len() + 1)
    }

    /// Re-invokes `tool` on `target` under the revision template, replaces
    /// its outcome and appends a repair record. `preceding` is the history
    /// before the target step; `fault_detail` the error being repaired.
    pub fn revise_step(
        &self,
        preceding: &SolutionHistory,
        target: &mut SolutionStep,
        tool: &str,
        fault_step: usize,
        fault_detail: &str,
    ) -> ToolOutcome {
        let outcome = match self.toolbox.get(tool) {
            Err(e) => ToolOutcome::failed("", "", e.to_string()),
            Ok(expert) => {
                let text = render(
                    &self.templates.revise,
                    &[
                        ("x", ""),
                        ("history", &preceding.serialize()),
                        ("step", &target.description),
                        ("fault", fault_detail),
                        ("tools", ""),
                    ],
                );
                let instruction = Instruction::new(format!("revise.{tool}"), text);
                invoke_expert(
                    expert.as_ref(),
                    self.expert_backend(tool),
                    &instruction,
                    fault_detail,
                    &target.description,
                )
                .1
            }
        };
        target.tool = Some(tool.to_string());
        target.outcome = outcome.clone();
        target.repairs.push(Repair {
            fault_step,
            fault_tool: tool.to_string(),
            fault_detail: fault_detail.to_string(),
            revised: outcome.clone(),
        });
        outcome
    }

    /// Resets every backend's session state.
    pub fn start_session(&self, session: &str) {
        for b in self.backends.all() {
            b.start_session(session);
        }
    }

    pub fn solve(&self, task: &Task) -> Result<SolveRun, OrchestratorError> {
        self.solve_session("", task)
    }

    pub fn solve_session(&self, session: &str, task: &Task) -> Result<SolveRun, OrchestratorError> {
        if task.limits.max_steps == 0 || task.limits.max_repairs_per_step == 0 {
            return Err(OrchestratorError::InvalidLimits);
        }
        self.templates.validate()?;
        self.start_session(session);
        let mut audit = Audit {
            session: session.to_string(),
            events: Vec::new(),
        };
        let mut history = SolutionHistory::default();
        let mut stats = SolveStats::default();
        let mut final_answer = None;
        let mut status = Status::StepLimit;

        'steps: for step_no in 1..=task.limits.max_steps {
            let mut budget = task.limits.max_repairs_per_step;

            let mut planner_fault: Option<OrchestratorError> = None;
            let action = loop {
                let note = planner_fault.as_ref().map(|e| e.to_string());
                match self.next_action(task, &history, note.as_deref()) {
                    Ok(a) => {
                        if planner_fault.is_some() {
                            stats.recovered += 1;
                        }
                        break a;
                    }
                    Err(e) => {
                        audit.log(AuditKind::Fault, step_no, format!("planner: {e}"));
                        if planner_fault.is_none() {
                            stats.faults += 1;
                        }
                        if budget == 0 {
                            status = match e {
                                OrchestratorError::Backend(_) => Status::Aborted,
                                _ => Status::RepairLimit,
                            };
                            audit.log(AuditKind::Stop, step_no, format!("{status:?}"));
                            break 'steps;
                        }
                        budget -= 1;
                        stats.repairs += 1;
                        planner_fault = Some(e);
                    }
                }
            };

            let (tool, description) = match action {
                Action::Final(answer) => {
                    audit.log(AuditKind::Final, step_no, answer.clone());
                    final_answer = Some(answer);
                    status = Status::Solved;
                    break;
                }
                Action::Step { tool, description } => (tool, description),
            };
            audit.log(
                AuditKind::Plan,
                step_no,
                format!("{}: {description}", tool.as_deref().unwrap_or("none")),
            );

            let Some(tool) = tool else {
                history.steps.push(SolutionStep {
                    index: step_no,
                    description: description.clone(),
                    tool: None,
                    call: None,
                    validation: None,
                    outcome: ToolOutcome::ok("", "", description),
                    repairs: Vec::new(),
                });
                continue;
            };

            let mut step = self.execute_step(task, &history, &tool, &description);
            audit.log(AuditKind::Execute, step_no, outcome_summary(&step.outcome));
            if step.outcome.success {
                history.steps.push(step);
                continue;
            }

            stats.faults += 1;
            while !step.outcome.success && budget > 0 {
                budget -= 1;
                stats.repairs += 1;
                let detail = step.outcome.error_detail.clone().unwrap_or_default();
                let (fault_step, fault_tool) = match self.identify_fault(task, &history, &step) {
                    Ok((i, t)) => (i, t),
                    Err(e) => {
                        audit.log(AuditKind::Fault, step_no, format!("reflection unusable ({e}); blaming current step"));
                        (step_no, tool.clone())
                    }
                };
                audit.log(AuditKind::Fault, step_no, format!("step {fault_step} via {fault_tool}: {detail}"));
                if fault_step == step_no {
                    let tool_to_use = if self.toolbox.registry().contains(&fault_tool) {
                        fault_tool
                    } else {
                        step.tool.clone().unwrap_or(tool.clone())
                    };
                    let revised = self.revise_step(&history, &mut step, &tool_to_use, fault_step, &detail);
                    audit.log(AuditKind::Revise, fault_step, outcome_summary(&revised));
                } else {
                    let idx = fault_step - 1;
                    let earlier_tool = history.steps[idx].tool.clone();
                    let tool_to_use = if self.toolbox.registry().contains(&fault_tool) {
                        fault_tool
                    } else if let Some(t) = earlier_tool {
                        t
                    } else {
                        audit.log(AuditKind::Revise, fault_step, "tool-less step; nothing to revise");
                        continue;
                    };
                    let preceding = SolutionHistory {
                        steps: history.steps[..idx].to_vec(),
                    };
                    let mut target = history.steps[idx].clone();
                    let revised = self.revise_step(&preceding, &mut target, &tool_to_use, fault_step, &detail);
                    // Keep the earlier step's old outcome if the revision failed.
                    if revised.success {
                        history.steps[idx] = target;
                    } else {
                        history.steps[idx].repairs.push(target.repairs.pop().expect("just pushed"));
                    }
                    audit.log(AuditKind::Revise, fault_step, outcome_summary(&revised));
                }
            }
            let ok = step.outcome.success;
            history.steps.push(step);
            if ok {
                stats.recovered += 1;
            } else {
                status = Status::RepairLimit;
                audit.log(AuditKind::Stop, step_no, "repair budget exhausted");
                break;
            }
        }
        if status == Status::StepLimit {
            audit.log(AuditKind::Stop, history.len(), "step limit reached");
        }

        if let Some(path) = &self.audit_path {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            for e in &audit.events {
                writeln!(f, "{}", e.line())?;
            }
        }
        let trajectory = Trajectory::from_history(&task.x, &history, final_answer, status);
        Ok(SolveRun {
            trajectory,
            history,
            stats,
            audit: audit.events,
        })
    }
}

fn outcome_summary(o: &ToolOutcome) -> String {
    if o.success {
        o.reformulated.clone()
    } else {
        format!("failed: {}", o.error_detail.as_deref().unwrap_or(""))
    }
}
