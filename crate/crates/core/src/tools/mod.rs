//! Tool protocols, call validation, and the built-in expert tools.

pub mod backend;
pub mod code;
pub mod kgquery;
pub mod math;
pub mod search;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use backend::{BackendError, Instruction, ModelBackend, RemoteBackend, ScriptedBackend};
pub use code::{CodeTool, Sandbox, SandboxConfig};
pub use kgquery::{kg_query_tool, KgQueryTool};
pub use math::{evaluate, format_number, math_tool, ComputeClient, EvalError, MathTool};
pub use search::{
    craft_query, search_tool, FixtureSearch, RemoteSearch, SearchProvider, SearchTool, Snippet,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticType {
    String,
    Integer,
    Number,
    Boolean,
}

impl SemanticType {
    /// Whether a JSON value parses as this type. Numeric and boolean types
    /// also accept their textual spellings; strings accept only strings.
    pub fn accepts(self, value: &Value) -> bool {
        match self {
            SemanticType::String => value.is_string(),
            SemanticType::Integer => {
                value.is_i64()
                    || value.is_u64()
                    || value.as_str().is_some_and(|s| s.trim().parse::<i64>().is_ok())
            }
            SemanticType::Number => {
                value.is_number()
                    || value.as_str().is_some_and(|s| s.trim().parse::<f64>().is_ok())
            }
            SemanticType::Boolean => {
                value.is_boolean() || matches!(value.as_str().map(str::trim), Some("true" | "false"))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: SemanticType,
    pub required: bool,
    pub description: String,
}

impl ArgSpec {
    pub fn required(name: &str, ty: SemanticType, description: &str) -> Self {
        ArgSpec {
            name: name.into(),
            ty,
            required: true,
            description: description.into(),
        }
    }

    pub fn optional(name: &str, ty: SemanticType, description: &str) -> Self {
        ArgSpec {
            required: false,
            ..ArgSpec::required(name, ty, description)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseField {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: SemanticType,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolProtocol {
    pub name: String,
    pub overview: String,
    pub args: Vec<ArgSpec>,
    pub response_schema: Vec<ResponseField>,
}

impl ToolProtocol {
    /// The argument an expert's free-text reply is bound to.
    pub fn primary_arg(&self) -> Option<&ArgSpec> {
        self.args.iter().find(|a| a.required).or(self.args.first())
    }

    /// One-paragraph rendering for planner prompts.
    pub fn describe(&self) -> String {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| {
                format!(
                    "{}: {:?}{}",
                    a.name,
                    a.ty,
                    if a.required { "" } else { " (optional)" }
                )
            })
            .collect();
        format!("{}: {} Args: {}.", self.name, self.overview, args.join(", "))
    }
}

fn response_schema() -> Vec<ResponseField> {
    vec![
        ResponseField { name: "raw".into(), ty: SemanticType::String },
        ResponseField { name: "reformulated".into(), ty: SemanticType::String },
        ResponseField { name: "success".into(), ty: SemanticType::Boolean },
    ]
}

pub fn code_protocol() -> ToolProtocol {
    ToolProtocol {
        name: "code".into(),
        overview: "Runs a program snippet in a sandboxed interpreter and reports its printed output.".into(),
        args: vec![
            ArgSpec::required("snippet", SemanticType::String, "source code to execute"),
            ArgSpec::optional("timeout_secs", SemanticType::Integer, "wall-clock limit"),
        ],
        response_schema: response_schema(),
    }
}

pub fn math_protocol() -> ToolProtocol {
    ToolProtocol {
        name: "math".into(),
        overview: "Evaluates an arithmetic expression.".into(),
        args: vec![ArgSpec::required("expression", SemanticType::String, "expression to evaluate")],
        response_schema: response_schema(),
    }
}

pub fn search_protocol() -> ToolProtocol {
    ToolProtocol {
        name: "search".into(),
        overview: "Looks up snippets relevant to a query.".into(),
        args: vec![
            ArgSpec::required("query", SemanticType::String, "search query"),
            ArgSpec::optional("top_k", SemanticType::Integer, "number of snippets"),
        ],
        response_schema: response_schema(),
    }
}

pub fn kgquery_protocol() -> ToolProtocol {
    ToolProtocol {
        name: "kgquery".into(),
        overview: "Retrieves facts and source passages from the knowledge graph.".into(),
        args: vec![
            ArgSpec::required("query", SemanticType::String, "natural-language query"),
            ArgSpec::optional("k", SemanticType::Integer, "number of seed entities"),
        ],
        response_schema: response_schema(),
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ToolError {
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("tool `{0}` is already registered")]
    DuplicateTool(String),
    #[error("tool `{tool}` declares argument `{arg}` twice")]
    DuplicateArg { tool: String, arg: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ToolRegistry {
    protocols: BTreeMap<String, ToolProtocol>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut r = Self::new();
        for p in [code_protocol(), math_protocol(), search_protocol(), kgquery_protocol()] {
            r.register(p).expect("built-in protocols are well formed");
        }
        r
    }

    pub fn register(&mut self, protocol: ToolProtocol) -> Result<(), ToolError> {
        if self.protocols.contains_key(&protocol.name) {
            return Err(ToolError::DuplicateTool(protocol.name));
        }
        let mut seen = BTreeSet::new();
        for a in &protocol.args {
            if !seen.insert(a.name.as_str()) {
                return Err(ToolError::DuplicateArg {
                    tool: protocol.name.clone(),
                    arg: a.name.clone(),
                });
            }
        }
        self.protocols.insert(protocol.name.clone(), protocol);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&ToolProtocol, ToolError> {
        self.protocols
            .get(name)
            .ok_or_else(|| ToolError::UnknownTool(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.protocols.contains_key(name)
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<String> {
        self.protocols.keys().cloned().collect()
    }

    pub fn protocols(&self) -> impl Iterator<Item = &ToolProtocol> {
        self.protocols.values()
    }

    pub fn describe(&self) -> String {
        self.protocols
            .values()
            .map(ToolProtocol::describe)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub params: BTreeMap<String, Value>,
}

impl ToolCall {
    pub fn new(tool: &str) -> Self {
        ToolCall {
            tool: tool.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.params.insert(name.to_string(), value.into());
        self
    }

    /// Interprets an expert's reply: a JSON object supplies the parameters
    /// directly; anything else is bound, minus code fences, to the
    /// protocol's primary argument.
    pub fn from_reply(protocol: &ToolProtocol, reply: &str) -> Self {
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(reply.trim()) {
            return ToolCall {
                tool: protocol.name.clone(),
                params: map.into_iter().collect(),
            };
        }
        let mut call = ToolCall::new(&protocol.name);
        if let Some(arg) = protocol.primary_arg() {
            call.params
                .insert(arg.name.clone(), Value::String(strip_fences(reply)));
        }
        call
    }

    pub fn str_param(&self, name: &str) -> Option<&str> {
        self.params.get(name).and_then(Value::as_str)
    }

    pub fn int_param(&self, name: &str) -> Option<i64> {
        match self.params.get(name)? {
            Value::Number(n) => n.as_i64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    }
}

/// Removes a surrounding markdown code fence, if any.
pub fn strip_fences(text: &str) -> String {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let body = match rest.find('\n') {
            Some(nl) => &rest[nl + 1..],
            None => rest,
        };
        let body = body.trim_end();
        let body = body.strip_suffix("```").unwrap_or(body);
        return body.trim_end().to_string();
    }
    t.to_string()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub consistent: bool,
    pub missing: Vec<String>,
    pub extraneous: Vec<String>,
    pub type_errors: Vec<String>,
    /// Number of required arguments the protocol declares.
    pub required_total: usize,
    /// Required arguments present with a well-typed value.
    pub required_consistent: usize,
}

pub fn validate_call(registry: &ToolRegistry, call: &ToolCall) -> Result<ValidationReport, ToolError> {
    let protocol = registry.get(&call.tool)?;
    let mut report = ValidationReport::default();
    for arg in &protocol.args {
        match call.params.get(&arg.name) {
            None if arg.required => report.missing.push(arg.name.clone()),
            None => {}
            Some(v) => {
                let ok = arg.ty.accepts(v);
                if !ok {
                    report.type_errors.push(arg.name.clone());
                }
                if arg.required && ok {
                    report.required_consistent += 1;
                }
            }
        }
        if arg.required {
            report.required_total += 1;
        }
    }
    report.extraneous = call
        .params
        .keys()
        .filter(|k| !protocol.args.iter().any(|a| &a.name == *k))
        .cloned()
        .collect();
    report.consistent =
        report.missing.is_empty() && report.extraneous.is_empty() && report.type_errors.is_empty();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolOutcome {
    /// What the tool was given (code, expression, query).
    pub input: String,
    pub raw: String,
    pub reformulated: String,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
}

impl ToolOutcome {
    pub fn ok(input: impl Into<String>, raw: impl Into<String>, reformulated: impl Into<String>) -> Self {
        ToolOutcome {
            input: input.into(),
            raw: raw.into(),
            reformulated: reformulated.into(),
            success: true,
            error_detail: None,
        }
    }

    pub fn failed(input: impl Into<String>, raw: impl Into<String>, detail: impl Into<String>) -> Self {
        let detail = detail.into();
        ToolOutcome {
            input: input.into(),
            raw: raw.into(),
            reformulated: format!("Error: {detail}"),
            success: false,
            error_detail: Some(detail),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.error_detail = Some(note.into());
        self
    }
}

/// Template reformulation of a successful output.
pub fn result_line(value: &str) -> String {
    format!("Result: {}", value.trim())
}

/// A tool that executes a validated call.
pub trait ExpertTool: Send + Sync {
    fn protocol(&self) -> ToolProtocol;

    fn run(&self, call: &ToolCall) -> ToolOutcome;
}

/// The executable side of a registry: protocols plus implementations.
#[derive(Clone, Default)]
pub struct Toolbox {
    registry: ToolRegistry,
    tools: BTreeMap<String, Arc<dyn ExpertTool>>,
}

impl Toolbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, tool: Arc<dyn ExpertTool>) -> Result<(), ToolError> {
        let protocol = tool.protocol();
        let name = protocol.name.clone();
        self.registry.register(protocol)?;
        self.tools.insert(name, tool);
        Ok(())
    }

    pub fn with(mut self, tool: Arc<dyn ExpertTool>) -> Result<Self, ToolError> {
        self.register(tool)?;
        Ok(self)
    }

    pub fn registry(&self) -> &ToolRegistry {
        &self.registry
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn ExpertTool>, ToolError> {
        self.tools
            .get(name)
            .ok_or_else(|| ToolError::UnknownTool(name.to_string()))
    }

    /// Runs a call, first checking the tool exists. Invalid parameters do
    /// not block execution; tools report their own failures.
    pub fn run(&self, call: &ToolCall) -> Result<ToolOutcome, ToolError> {
        Ok(self.get(&call.tool)?.run(call))
    }
}

/// Asks `backend` (if any) to produce the tool input for `instruction`,
/// then executes it. Without a backend the fallback text is used as the
/// primary argument.
pub fn invoke_expert(
    tool: &dyn ExpertTool,
    backend: Option<&dyn ModelBackend>,
    instruction: &Instruction,
    payload: &str,
    fallback: &str,
) -> (ToolCall, ToolOutcome) {
    let protocol = tool.protocol();
    let reply = match backend {
        Some(b) => match b.complete(instruction, payload) {
            Ok(r) => r,
            Err(e) => {
                let call = ToolCall::new(&protocol.name);
                return (call, ToolOutcome::failed("", "", format!("backend failure: {e}")));
            }
        },
        None => fallback.to_string(),
    };
    let call = ToolCall::from_reply(&protocol, &reply);
    let outcome = tool.run(&call);
    (call, outcome)
}
