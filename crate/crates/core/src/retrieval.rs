//! Graph retrieval: top-k entity seeds by embedding similarity, one-hop
//! relation expansion, and the chunks that mention each seed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Embedder;
use crate::kgstore::{Direction, EdgeLabel, GraphError, NodeId, NodeKind, PropertyGraph};
use crate::remote::ProviderError;
use crate::text::count_tokens;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("embedding the query failed: {0}")]
    Embedder(#[from] ProviderError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub entity: NodeId,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextTriple {
    pub subject_id: NodeId,
    pub subject: String,
    pub relation: String,
    pub object_id: NodeId,
    pub object: String,
    /// Score of the hit the triple was reached from.
    pub score: f64,
}

impl ContextTriple {
    pub fn line(&self) -> String {
        format!("{} --- {} --- {}", self.subject, self.relation, self.object)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParentChunk {
    pub chunk: NodeId,
    pub text: String,
    pub score: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalContext {
    pub query: String,
    pub hits: Vec<Hit>,
    pub triples: Vec<ContextTriple>,
    pub parents: Vec<ParentChunk>,
}

fn display_name(graph: &PropertyGraph, id: &NodeId) -> String {
    graph
        .get(id)
        .and_then(|n| n.prop_str("name"))
        .unwrap_or(id.as_str())
        .to_string()
}

/// Expands already-ranked hits into triples and parent chunks.
pub fn expand(graph: &PropertyGraph, query: &str, hits: Vec<Hit>) -> Result<RetrievalContext, GraphError> {
    let mut seen = BTreeSet::new();
    let mut triples = Vec::new();
    let mut parents: BTreeMap<NodeId, f64> = BTreeMap::new();
    let any_relation = EdgeLabel::relation("");
    for hit in &hits {
        for dir in [Direction::Out, Direction::In] {
            for (_, edge) in graph.neighbors(&hit.entity, Some(&any_relation), dir)? {
                let EdgeLabel::Relation(rel) = &edge.label else { continue };
                if seen.insert((edge.src.clone(), rel.clone(), edge.dst.clone())) {
                    triples.push(ContextTriple {
                        subject: display_name(graph, &edge.src),
                        subject_id: edge.src.clone(),
                        relation: rel.clone(),
                        object: display_name(graph, &edge.dst),
                        object_id: edge.dst.clone(),
                        score: hit.score,
                    });
                }
            }
        }
        for (chunk, _) in graph.neighbors(&hit.entity, Some(&EdgeLabel::Mentions), Direction::Out)? {
            let best = parents.entry(chunk).or_insert(f64::NEG_INFINITY);
            *best = best.max(hit.score);
        }
    }
    let mut parents: Vec<ParentChunk> = parents
        .into_iter()
        .map(|(chunk, score)| ParentChunk {
            text: graph
                .get(&chunk)
                .and_then(|n| n.prop_str("text"))
                .unwrap_or("")
                .to_string(),
            chunk,
            score,
        })
        .collect();
    parents.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.chunk.cmp(&b.chunk)));
    Ok(RetrievalContext {
        query: query.to_string(),
        hits,
        triples,
        parents,
    })
}

pub fn retrieve(
    graph: &PropertyGraph,
    query: &str,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<RetrievalContext, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if graph.nodes_of_kind(NodeKind::Entity).next().is_none() {
        return Ok(RetrievalContext {
            query: query.to_string(),
            ..RetrievalContext::default()
        });
    }
    let q = embedder.embed(query)?;
    let hits = graph
        .knn(&q, k, Some(NodeKind::Entity))?
        .into_iter()
        .map(|(entity, score)| Hit { entity, score })
        .collect();
    Ok(expand(graph, query, hits)?)
}

/// Lays the context out as text: triple lines first, then parent chunk
/// texts (whitespace collapsed), duplicates dropped, cut at the last whole
/// line that fits `token_budget`.
pub fn assemble_context(ctx: &RetrievalContext, token_budget: usize) -> String {
    let candidates = ctx.triples.iter().map(ContextTriple::line).chain(
        ctx.parents
            .iter()
            .map(|p| p.text.split_whitespace().collect::<Vec<_>>().join(" ")),
    );
    let mut seen = BTreeSet::new();
    let mut used = 0;
    let mut lines = Vec::new();
    for line in candidates {
        if line.is_empty() || !seen.insert(line.clone()) {
            continue;
        }
        let cost = count_tokens(&line);
        if used + cost > token_budget {
            break;
        }
        used += cost;
        lines.push(line);
    }
    lines.join("\n")
}
