//! Model backends: the uniform carrier for planner, expert, reflection and
//! revision invocations.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::remote::{self, ProviderError};

/// A rendered instruction. The tag names the role being invoked
/// (`plan`, `expert.code`, `fault`, `revise.math`, `extract`, ...) and is
/// what scripted backends key their replies on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instruction {
    pub tag: String,
    pub text: String,
}

impl Instruction {
    pub fn new(tag: impl Into<String>, text: impl Into<String>) -> Self {
        Instruction {
            tag: tag.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("script exhausted: no entry for tag `{tag}` call {index} in session `{session}`")]
    ScriptExhausted {
        session: String,
        tag: String,
        index: usize,
    },
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

pub trait ModelBackend: Send + Sync {
    fn complete(&self, instruction: &Instruction, payload: &str) -> Result<String, BackendError>;

    fn identity(&self) -> String;

    /// Resets per-session state. Scripted backends restart their call
    /// counters and switch to the named session's entries.
    fn start_session(&self, _session: &str) {}
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ScriptEntry {
    tag: String,
    index: usize,
    response: String,
    #[serde(default)]
    session: String,
}

#[derive(Default)]
struct ScriptState {
    session: String,
    counters: BTreeMap<String, usize>,
}

/// Replays responses from a JSONL file of `{tag, index, response}` records
/// (optionally with a `session` key). The n-th call with a given tag in the
/// current session returns the entry with `index` n, counting from 0.
pub struct ScriptedBackend {
    name: String,
    entries: BTreeMap<(String, String, usize), String>,
    state: Mutex<ScriptState>,
}

impl ScriptedBackend {
    pub fn from_reader<R: BufRead>(name: &str, reader: R) -> Result<Self, BackendError> {
        let mut entries = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| BackendError::Script {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let e: ScriptEntry = serde_json::from_str(&line).map_err(|e| BackendError::Script {
                line: i + 1,
                message: e.to_string(),
            })?;
            let key = (e.session, e.tag, e.index);
            if entries.insert(key.clone(), e.response).is_some() {
                return Err(BackendError::Script {
                    line: i + 1,
                    message: format!("duplicate entry for tag `{}` index {}", key.1, key.2),
                });
            }
        }
        Ok(ScriptedBackend {
            name: name.to_string(),
            entries,
            state: Mutex::new(ScriptState::default()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let file = std::fs::File::open(path).map_err(|e| {
            BackendError::Provider(ProviderError::Fixture(format!("{}: {e}", path.display())))
        })?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Self::from_reader(&name, std::io::BufReader::new(file))
    }

    /// Builds a single-session script from `(tag, response)` pairs; indices
    /// are assigned per tag in order.
    pub fn from_pairs(name: &str, pairs: &[(&str, &str)]) -> Self {
        let mut entries = BTreeMap::new();
        let mut next: BTreeMap<&str, usize> = BTreeMap::new();
        for (tag, response) in pairs {
            let idx = next.entry(tag).or_default();
            entries.insert((String::new(), tag.to_string(), *idx), response.to_string());
            *idx += 1;
        }
        ScriptedBackend {
            name: name.to_string(),
            entries,
            state: Mutex::new(ScriptState::default()),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ModelBackend for ScriptedBackend {
    fn complete(&self, instruction: &Instruction, _payload: &str) -> Result<String, BackendError> {
        let mut state = self.state.lock().unwrap_or_else(|p| p.into_inner());
        let session = state.session.clone();
        let counter = state.counters.entry(instruction.tag.clone()).or_default();
        let index = *counter;
        *counter += 1;
        self.entries
            .get(&(session.clone(), instruction.tag.clone(), index))
            .cloned()
            .ok_or(BackendError::ScriptExhausted {
                session,
                tag: instruction.tag.clone(),
                index,
            })
    }

    fn identity(&self) -> String {
        format!("scripted:{}", self.name)
    }

    fn start_session(&self, session: &str) {
        let mut state = self.state.lock().unwrap_or_else(|p| p.into_inner());
        state.session = session.to_string();
        state.counters.clear();
    }
}

/// Chat-completions client. The instruction becomes the system message and
/// the payload the user message; the reply is the first choice's content.
pub struct RemoteBackend {
    pub endpoint: String,
    pub model: String,
    pub token: Option<String>,
    pub timeout: Duration,
}

impl ModelBackend for RemoteBackend {
    fn complete(&self, instruction: &Instruction, payload: &str) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [
                { "role": "system", "content": instruction.text },
                { "role": "user", "content": payload },
            ],
        });
        let resp = remote::post_json(&self.endpoint, self.token.as_deref(), &body, self.timeout)?;
        resp["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                ProviderError::Malformed("missing choices[0].message.content".into()).into()
            })
    }

    fn identity(&self) -> String {
        format!("remote:{}@{}", self.model, self.endpoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_replay_and_exhaustion() {
        let b = ScriptedBackend::from_reader(
            "t",
            r#"{"tag":"plan","index":0,"response":"FINAL: 42"}"#.as_bytes(),
        )
        .unwrap();
        let ins = Instruction::new("plan", "anything");
        assert_eq!(b.complete(&ins, "x").unwrap(), "FINAL: 42");
        assert!(matches!(
            b.complete(&ins, "x"),
            Err(BackendError::ScriptExhausted { index: 1, .. })
        ));
        b.start_session("");
        assert_eq!(b.complete(&ins, "y").unwrap(), "FINAL: 42");
    }

    #[test]
    fn sessions_are_separate() {
        let script = "{\"tag\":\"plan\",\"index\":0,\"response\":\"a\",\"session\":\"q1\"}\n\
                      {\"tag\":\"plan\",\"index\":0,\"response\":\"b\",\"session\":\"q2\"}\n";
        let b = ScriptedBackend::from_reader("t", script.as_bytes()).unwrap();
        let ins = Instruction::new("plan", "");
        b.start_session("q2");
        assert_eq!(b.complete(&ins, "").unwrap(), "b");
        b.start_session("q1");
        assert_eq!(b.complete(&ins, "").unwrap(), "a");
    }

    #[test]
    fn bad_script_line_reported() {
        let script = "{\"tag\":\"plan\",\"index\":0,\"response\":\"a\"}\nnot json\n";
        let err = ScriptedBackend::from_reader("t", script.as_bytes()).err().unwrap();
        assert!(matches!(err, BackendError::Script { line: 2, .. }));
        let dup = "{\"tag\":\"p\",\"index\":0,\"response\":\"a\"}\n{\"tag\":\"p\",\"index\":0,\"response\":\"b\"}\n";
        assert!(ScriptedBackend::from_reader("t", dup.as_bytes()).is_err());
    }
}
