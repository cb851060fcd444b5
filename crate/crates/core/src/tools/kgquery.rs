//! Knowledge-graph lookup as a tool.

use std::sync::Arc;

use super::{kgquery_protocol, ExpertTool, ToolCall, ToolOutcome, ToolProtocol};
use crate::ingest::Embedder;
use crate::kgstore::{PropertyGraph, SharedGraph};
use crate::retrieval::{assemble_context, retrieve};

pub fn kg_query_tool(
    graph: &PropertyGraph,
    query: &str,
    k: usize,
    embedder: &dyn Embedder,
    budget: usize,
) -> ToolOutcome {
    match retrieve(graph, query, k.max(1), embedder) {
        Err(e) => ToolOutcome::failed(query, "", format!("retrieval failed: {e}")),
        Ok(ctx) => {
            let raw = serde_json::to_string(&ctx).expect("context serializes");
            if ctx.hits.is_empty() {
                return ToolOutcome::failed(query, raw, "no knowledge found");
            }
            let text = assemble_context(&ctx, budget);
            ToolOutcome::ok(query, raw, text)
        }
    }
}

pub struct KgQueryTool {
    graph: SharedGraph,
    embedder: Arc<dyn Embedder>,
    k: usize,
    budget: usize,
}

impl KgQueryTool {
    pub fn new(graph: SharedGraph, embedder: Arc<dyn Embedder>, k: usize, budget: usize) -> Self {
        KgQueryTool {
            graph,
            embedder,
            k,
            budget,
        }
    }
}

impl ExpertTool for KgQueryTool {
    fn protocol(&self) -> ToolProtocol {
        kgquery_protocol()
    }

    fn run(&self, call: &ToolCall) -> ToolOutcome {
        let Some(query) = call.str_param("query") else {
            return ToolOutcome::failed("", "", "missing `query`");
        };
        let k = call.int_param("k").filter(|k| *k > 0).map_or(self.k, |k| k as usize);
        let graph = self.graph.read().unwrap_or_else(|p| p.into_inner());
        kg_query_tool(&graph, query, k, self.embedder.as_ref(), self.budget)
    }
}
