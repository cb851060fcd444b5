//! Arithmetic evaluation, locally or through a compute service.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/' | '×' | '÷') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?          right-associative
//! atom   := number | '(' expr ')'
//! ```
//!
//! `**` is accepted as a synonym for `^`. Evaluation follows IEEE double
//! semantics, so `1/0` is infinity and `0^0` is 1.

use std::time::Duration;

use thiserror::Error;

use super::backend::{Instruction, ModelBackend};
use super::{invoke_expert, math_protocol, result_line, ExpertTool, ToolCall, ToolOutcome, ToolProtocol};
use crate::remote::{self, ProviderError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unexpected `{found}` at offset {offset}")]
    Unexpected { found: String, offset: usize },
    #[error("malformed number `{0}`")]
    BadNumber(String),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Op(char),
    Open,
    Close,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, EvalError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (off, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '0'..='9' | '.' => {
                while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                    i += 1;
                }
                if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].1.is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].1.is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let end = chars.get(i).map_or(src.len(), |(o, _)| *o);
                let text = &src[off..end];
                let v = text
                    .parse::<f64>()
                    .map_err(|_| EvalError::BadNumber(text.to_string()))?;
                out.push((Tok::Num(v), off));
            }
            '*' if chars.get(i + 1).is_some_and(|(_, n)| *n == '*') => {
                out.push((Tok::Op('^'), off));
                i += 2;
            }
            '+' | '-' | '*' | '/' | '^' => {
                out.push((Tok::Op(c), off));
                i += 1;
            }
            '×' | '·' => {
                out.push((Tok::Op('*'), off));
                i += 1;
            }
            '÷' => {
                out.push((Tok::Op('/'), off));
                i += 1;
            }
            '−' => {
                out.push((Tok::Op('-'), off));
                i += 1;
            }
            '(' => {
                out.push((Tok::Open, off));
                i += 1;
            }
            ')' => {
                out.push((Tok::Close, off));
                i += 1;
            }
            other => {
                return Err(EvalError::Unexpected {
                    found: other.to_string(),
                    offset: off,
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn unexpected(&self) -> EvalError {
        match self.toks.get(self.pos) {
            None => EvalError::UnexpectedEnd,
            Some((t, off)) => EvalError::Unexpected {
                found: match t {
                    Tok::Num(v) => v.to_string(),
                    Tok::Op(c) => c.to_string(),
                    Tok::Open => "(".into(),
                    Tok::Close => ")".into(),
                },
                offset: *off,
            },
        }
    }

    fn expr(&mut self) -> Result<f64, EvalError> {
        let mut v = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.term()?;
            v = if op == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<f64, EvalError> {
        let mut v = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.unary()?;
            v = if op == '*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64, EvalError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<f64, EvalError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(base.powf(exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<f64, EvalError> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(&Tok::Close) {
                    return Err(self.unexpected());
                }
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.unexpected()),
        }
    }
}

pub fn evaluate(expression: &str) -> Result<f64, EvalError> {
    let mut p = Parser {
        toks: lex(expression)?,
        pos: 0,
    };
    let v = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(v)
}

/// Shortest round-trip decimal; integral values print without a fraction.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

/// Client for a plain-text compute service answering `GET <url>?input=...`.
#[derive(Clone, Debug)]
pub struct ComputeClient {
    pub url: String,
    pub app_id: Option<String>,
    pub timeout: Duration,
}

impl ComputeClient {
    pub fn query(&self, input: &str) -> Result<String, ProviderError> {
        let mut params = vec![("input", input)];
        if let Some(id) = &self.app_id {
            params.push(("appid", id.as_str()));
        }
        let text = remote::get_text(&self.url, &params, self.timeout)?;
        Ok(text.trim().to_string())
    }
}

fn evaluate_locally(expression: &str) -> ToolOutcome {
    match evaluate(expression) {
        Ok(v) => {
            let s = format_number(v);
            ToolOutcome::ok(expression, s.clone(), result_line(&s))
        }
        Err(e) => ToolOutcome::failed(expression, "", format!("evaluation error: {e}")),
    }
}

pub struct MathTool {
    compute: Option<ComputeClient>,
}

impl MathTool {
    pub fn new(compute: Option<ComputeClient>) -> Self {
        MathTool { compute }
    }
}

impl ExpertTool for MathTool {
    fn protocol(&self) -> ToolProtocol {
        math_protocol()
    }

    fn run(&self, call: &ToolCall) -> ToolOutcome {
        let Some(expr) = call.str_param("expression") else {
            return ToolOutcome::failed("", "", "missing `expression`");
        };
        let expr = expr.trim();
        match &self.compute {
            None => evaluate_locally(expr),
            Some(client) => match client.query(expr) {
                Ok(text) => ToolOutcome::ok(expr, text.clone(), result_line(&text)),
                Err(remote_err) => {
                    let local = evaluate_locally(expr);
                    let note = format!("compute service failed ({remote_err}); evaluated locally");
                    if local.success {
                        local.with_note(note)
                    } else {
                        let detail = local.error_detail.unwrap_or_default();
                        ToolOutcome::failed(expr, "", format!("{note}: {detail}"))
                    }
                }
            },
        }
    }
}

/// Turns a step into an expression (through the backend when given) and
/// evaluates it.
pub fn math_tool(
    backend: Option<&dyn ModelBackend>,
    expression_or_step: &str,
    compute: Option<ComputeClient>,
) -> ToolOutcome {
    let instruction = Instruction::new(
        "expert.math",
        "Rewrite the step as a single arithmetic expression.",
    );
    let tool = MathTool::new(compute);
    invoke_expert(&tool, backend, &instruction, expression_or_step, expression_or_step).1
}
