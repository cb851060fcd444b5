use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::kgstore::NodeId;
use crate::remote::ProviderError;
use crate::tools::backend::{Instruction, ModelBackend};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub source_chunk: NodeId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripleBatch {
    pub triples: Vec<Triple>,
    pub skipped: usize,
}

/// Produces raw triple lines for a chunk of text.
pub trait TripleExtractor: Send + Sync {
    fn extract(&self, chunk_text: &str) -> Result<String, ProviderError>;
}

const ENTITY_TAG: &str = "(entity)";

/// Parses `subject --- relation --- object`, tolerating the decorated form
/// `(subject(entity) --- relation --- object(entity))`.
pub fn parse_triple_line(line: &str) -> Option<(String, String, String)> {
    let mut body = line.trim();
    if encloses(body) {
        body = body[1..body.len() - 1].trim();
    }
    let parts: Vec<&str> = body.split("---").collect();
    if parts.len() != 3 {
        return None;
    }
    let clean = |s: &str| -> String {
        let s = s.trim();
        let s = match s.len().checked_sub(ENTITY_TAG.len()) {
            Some(cut) if s.is_char_boundary(cut) && s[cut..].eq_ignore_ascii_case(ENTITY_TAG) => {
                &s[..cut]
            }
            _ => s,
        };
        s.trim().to_string()
    };
    let (s, r, o) = (clean(parts[0]), clean(parts[1]), clean(parts[2]));
    if s.is_empty() || r.is_empty() || o.is_empty() {
        return None;
    }
    Some((s, r, o))
}

/// True when the opening paren at 0 is closed by the final character.
fn encloses(s: &str) -> bool {
    if !(s.starts_with('(') && s.ends_with(')')) {
        return false;
    }
    let mut depth = 0i32;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return i == s.len() - 1;
                }
            }
            _ => {}
        }
    }
    false
}

/// Runs `extractor` on one chunk and parses its output. Blank lines are
/// ignored; other unparsable lines are counted as skipped.
pub fn extract_triples(
    chunk_id: &NodeId,
    chunk_text: &str,
    extractor: &dyn TripleExtractor,
) -> Result<TripleBatch, IngestError> {
    let raw = extractor
        .extract(chunk_text)
        .map_err(|source| IngestError::Extractor {
            chunk: chunk_id.clone(),
            source,
        })?;
    let mut batch = TripleBatch::default();
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        match parse_triple_line(line) {
            Some((subject, relation, object)) => batch.triples.push(Triple {
                subject,
                relation,
                object,
                source_chunk: chunk_id.clone(),
            }),
            None => batch.skipped += 1,
        }
    }
    Ok(batch)
}

#[derive(Clone, Debug, Deserialize)]
struct FixtureRule {
    #[serde(rename = "match")]
    pattern: String,
    lines: Vec<String>,
}

/// Replays triple lines from a fixture: every rule whose `match` string
/// occurs in the chunk (case-insensitive) contributes its lines, in file
/// order.
#[derive(Clone, Debug, Default)]
pub struct FixtureExtractor {
    rules: Vec<FixtureRule>,
}

impl FixtureExtractor {
    pub fn from_json(json: &str) -> Result<Self, ProviderError> {
        let rules = serde_json::from_str(json).map_err(|e| ProviderError::Fixture(e.to_string()))?;
        Ok(FixtureExtractor { rules })
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn rule(mut self, pattern: &str, lines: &[&str]) -> Self {
        self.rules.push(FixtureRule {
            pattern: pattern.to_string(),
            lines: lines.iter().map(|s| s.to_string()).collect(),
        });
        self
    }
}

impl TripleExtractor for FixtureExtractor {
    fn extract(&self, chunk_text: &str) -> Result<String, ProviderError> {
        let hay = chunk_text.to_lowercase();
        let lines: Vec<&str> = self
            .rules
            .iter()
            .filter(|r| hay.contains(&r.pattern.to_lowercase()))
            .flat_map(|r| r.lines.iter().map(String::as_str))
            .collect();
        Ok(lines.join("\n"))
    }
}

pub const DEFAULT_EXTRACT_INSTRUCTION: &str = "Extract knowledge graph triples from the text. \
Output one triple per line in the form: subject --- relation --- object";

/// Asks a model backend for triples.
pub struct ModelExtractor {
    backend: Arc<dyn ModelBackend>,
    instruction: String,
}

impl ModelExtractor {
    pub fn new(backend: Arc<dyn ModelBackend>) -> Self {
        ModelExtractor {
            backend,
            instruction: DEFAULT_EXTRACT_INSTRUCTION.to_string(),
        }
    }

    pub fn with_instruction(mut self, instruction: impl Into<String>) -> Self {
        self.instruction = instruction.into();
        self
    }
}

impl TripleExtractor for ModelExtractor {
    fn extract(&self, chunk_text: &str) -> Result<String, ProviderError> {
        let instruction = Instruction::new("extract", &self.instruction);
        self.backend
            .complete(&instruction, chunk_text)
            .map_err(|e| ProviderError::Transport(e.to_string()))
    }
}
