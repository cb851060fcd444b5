//! Snippet search through a fixture corpus or an HTTP provider.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::backend::{Instruction, ModelBackend};
use super::{invoke_expert, search_protocol, ExpertTool, ToolCall, ToolOutcome, ToolProtocol};
use crate::remote::{self, ProviderError};
use crate::text::tokenize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub source: String,
    pub text: String,
    #[serde(default)]
    pub score: f64,
}

pub trait SearchProvider: Send + Sync {
    fn search(&self, query: &str, top_k: usize) -> Result<Vec<Snippet>, ProviderError>;
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum CorpusEntry {
    Text(String),
    Sourced { source: String, text: String },
}

/// A local corpus mapping query strings to snippets. A search scores each
/// corpus key by the fraction of its tokens present in the query and
/// returns the snippets of matching keys, best key first.
#[derive(Clone, Debug, Default)]
pub struct FixtureSearch {
    corpus: BTreeMap<String, Vec<Snippet>>,
}

impl FixtureSearch {
    pub fn from_json(json: &str) -> Result<Self, ProviderError> {
        let raw: BTreeMap<String, Vec<CorpusEntry>> =
            serde_json::from_str(json).map_err(|e| ProviderError::Fixture(e.to_string()))?;
        let corpus = raw
            .into_iter()
            .map(|(key, entries)| {
                let snippets = entries
                    .into_iter()
                    .enumerate()
                    .map(|(i, e)| match e {
                        CorpusEntry::Text(text) => Snippet {
                            source: format!("{key}#{}", i + 1),
                            text,
                            score: 0.0,
                        },
                        CorpusEntry::Sourced { source, text } => Snippet { source, text, score: 0.0 },
                    })
                    .collect();
                (key, snippets)
            })
            .collect();
        Ok(FixtureSearch { corpus })
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn insert(&mut self, key: &str, source: &str, text: &str) {
        self.corpus.entry(key.to_string()).or_default().push(Snippet {
            source: source.to_string(),
            text: text.to_string(),
            score: 0.0,
        });
    }
}

impl SearchProvider for FixtureSearch {
    fn search(&self, query: &str, top_k: usize) -> Result<Vec<Snippet>, ProviderError> {
        let q: BTreeSet<String> = tokenize(query).into_iter().collect();
        let mut scored: Vec<(f64, &String)> = self
            .corpus
            .keys()
            .filter_map(|key| {
                let k: BTreeSet<String> = tokenize(key).into_iter().collect();
                if k.is_empty() {
                    return None;
                }
                let overlap = k.intersection(&q).count();
                (overlap > 0).then(|| (overlap as f64 / k.len() as f64, key))
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        Ok(scored
            .into_iter()
            .flat_map(|(score, key)| {
                self.corpus[key].iter().map(move |s| Snippet { score, ..s.clone() })
            })
            .take(top_k)
            .collect())
    }
}

/// HTTP provider: `GET <url>?q=<query>&k=<n>` answering a JSON list of
/// `{source, text, score?}`.
pub struct RemoteSearch {
    pub url: String,
    pub timeout: Duration,
}

impl SearchProvider for RemoteSearch {
    fn search(&self, query: &str, top_k: usize) -> Result<Vec<Snippet>, ProviderError> {
        let k = top_k.to_string();
        let body = remote::get_text(&self.url, &[("q", query), ("k", &k)], self.timeout)?;
        let mut hits: Vec<Snippet> =
            serde_json::from_str(&body).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        hits.truncate(top_k);
        Ok(hits)
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "at", "by", "find", "for", "from", "get", "in", "is", "look", "of", "on",
    "or", "search", "the", "to", "up", "what", "with",
];

/// Keyword query for a sub-task when no model is available: its tokens in
/// order, minus stopwords and repeats.
pub fn craft_query(sub_task: &str) -> String {
    let mut seen = BTreeSet::new();
    tokenize(sub_task)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .filter(|t| seen.insert(t.clone()))
        .collect::<Vec<_>>()
        .join(" ")
}

pub struct SearchTool {
    provider: Arc<dyn SearchProvider>,
    default_top_k: usize,
}

impl SearchTool {
    pub fn new(provider: Arc<dyn SearchProvider>) -> Self {
        SearchTool {
            provider,
            default_top_k: 3,
        }
    }
}

impl ExpertTool for SearchTool {
    fn protocol(&self) -> ToolProtocol {
        search_protocol()
    }

    fn run(&self, call: &ToolCall) -> ToolOutcome {
        let Some(query) = call.str_param("query") else {
            return ToolOutcome::failed("", "", "missing `query`");
        };
        let top_k = call
            .int_param("top_k")
            .filter(|k| *k > 0)
            .map_or(self.default_top_k, |k| k as usize);
        match self.provider.search(query, top_k) {
            Err(e) => ToolOutcome::failed(query, "", format!("search provider failed: {e}")),
            Ok(hits) if hits.is_empty() => ToolOutcome::failed(query, "", "no results"),
            Ok(hits) => {
                let raw = hits
                    .iter()
                    .map(|s| format!("[{}] {}", s.source, s.text))
                    .collect::<Vec<_>>()
                    .join("\n");
                let top = &hits[0];
                ToolOutcome::ok(query, raw, format!("[{}] {}", top.source, top.text))
            }
        }
    }
}

/// Crafts a query for `sub_task` (through the backend when given, else
/// heuristically) and runs it against `provider`.
pub fn search_tool(
    backend: Option<&dyn ModelBackend>,
    sub_task: &str,
    provider: Arc<dyn SearchProvider>,
) -> ToolOutcome {
    let instruction = Instruction::new("expert.search", "Write a short web search query for the step.");
    let tool = SearchTool::new(provider);
    invoke_expert(&tool, backend, &instruction, sub_task, &craft_query(sub_task)).1
}
