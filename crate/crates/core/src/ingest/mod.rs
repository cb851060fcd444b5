//! Document ingestion into the property graph.
//!
//! Text is chunked with a sliding token window; every chunk becomes a chunk
//! node and is handed to a [`TripleExtractor`]. Each triple yields two
//! entity nodes (one per distinct surface form), a relation edge between
//! them, and `Mentions` edges from both entities to the chunk. Tables
//! become a table node plus one row node per row; images become image
//! nodes linked to their most similar predecessors; code files become a
//! tree of skeletonized code units.
//!
//! Node ids are derived from the document id and block position, so
//! ingesting the same document twice leaves the graph unchanged.

pub mod chunk;
pub mod code;
pub mod dedup;
pub mod embed;
pub mod triples;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kgstore::{EdgeLabel, GraphError, Node, NodeId, NodeKind, PropValue, PropertyGraph};
use crate::remote::ProviderError;

pub use chunk::{chunk_text, Chunk};
pub use code::{reassemble, skeletonize_code, CodeUnit, LanguageProfile, Scope};
pub use dedup::{dedup_entities, levenshtein, DedupReport};
pub use embed::{
    CaptionImageEmbedder, Embedder, FixtureImageEmbedder, HashingEmbedder, ImageEmbedder,
    RemoteEmbedder,
};
pub use triples::{
    extract_triples, parse_triple_line, FixtureExtractor, ModelExtractor, Triple, TripleBatch,
    TripleExtractor,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid chunking parameters: {0}")]
    InvalidParams(String),
    #[error("table `{table}` row {row} has {got} cells, expected {expected}")]
    RaggedTable {
        table: String,
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("unbalanced scopes at line {line}: {message}")]
    UnbalancedScopes { line: usize, message: String },
    #[error("triple extraction failed for chunk `{chunk}`: {source}")]
    Extractor {
        chunk: NodeId,
        #[source]
        source: ProviderError,
    },
    #[error("embedding failed at block {block}: {source}")]
    Embedder {
        block: usize,
        #[source]
        source: ProviderError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("reading document: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing document: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsedDocument {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub blocks: Vec<Block>,
}

impl ParsedDocument {
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Block {
    Text(TextBlock),
    Table(TableBlock),
    Image(ImageBlock),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    pub page: u32,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableBlock {
    pub page: u32,
    #[serde(default)]
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<PropValue>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageBlock {
    pub page: u32,
    pub path: String,
    #[serde(default)]
    pub format: String,
    #[serde(default)]
    pub resolution: String,
    #[serde(default)]
    pub caption: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IngestOptions {
    pub window: usize,
    pub stride: usize,
    pub k_similar: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            window: 128,
            stride: 96,
            k_similar: 3,
        }
    }
}

/// Counts of what a document contributed; identical across re-runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub chunks: usize,
    pub entities: usize,
    pub triples: usize,
    pub skipped: usize,
    pub tables: usize,
    pub rows: usize,
    pub images: usize,
}

pub struct Providers<'a> {
    pub embedder: &'a dyn Embedder,
    pub image_embedder: &'a dyn ImageEmbedder,
    pub extractor: &'a dyn TripleExtractor,
}

fn embed(embedder: &dyn Embedder, block: usize, text: &str) -> Result<Vec<f64>, IngestError> {
    embedder
        .embed(text)
        .map_err(|source| IngestError::Embedder { block, source })
}

pub fn entity_id(name: &str) -> NodeId {
    NodeId::new(format!("entity:{name}"))
}

fn keywords(text: &str, n: usize) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for tok in crate::text::tokenize(text) {
        if tok.chars().count() >= 4 && !tok.chars().all(|c| c.is_ascii_digit()) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
        .into_iter()
        .take(n)
        .map(|(t, _)| t)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Returns the live id for an entity surface form, creating the node if
/// neither it nor a merge alias exists.
fn ensure_entity(
    graph: &mut PropertyGraph,
    name: &str,
    embedder: &dyn Embedder,
    block: usize,
) -> Result<NodeId, IngestError> {
    let id = graph.resolve(&entity_id(name));
    if graph.contains(&id) {
        return Ok(id);
    }
    let node = Node::new(id, NodeKind::Entity)
        .with_prop("name", name)
        .with_embedding(embed(embedder, block, name)?);
    Ok(graph.add_node(node)?)
}

pub fn ingest_document(
    graph: &mut PropertyGraph,
    doc: &ParsedDocument,
    providers: &Providers<'_>,
    options: &IngestOptions,
) -> Result<IngestReport, IngestError> {
    let mut report = IngestReport::default();
    let mut entities = BTreeSet::new();
    for (pos, block) in doc.blocks.iter().enumerate() {
        match block {
            Block::Text(tb) => {
                let chunks = chunk_text(&doc.doc_id, &tb.text, options.window, options.stride)?;
                for c in &chunks {
                    let id = NodeId::new(format!("chunk:{}:{pos}:{}", doc.doc_id, c.index));
                    if !graph.contains(&id) {
                        let node = Node::new(id.clone(), NodeKind::Chunk)
                            .with_prop("doc_id", doc.doc_id.as_str())
                            .with_prop("title", doc.title.as_str())
                            .with_prop("page", i64::from(tb.page))
                            .with_prop("block", pos as i64)
                            .with_prop("index", c.index as i64)
                            .with_prop("token_start", c.token_span.start as i64)
                            .with_prop("token_end", c.token_span.end as i64)
                            .with_prop("text", c.text.as_str())
                            .with_prop("summary", "")
                            .with_prop("keywords", keywords(&c.text, 5))
                            .with_embedding(embed(providers.embedder, pos, &c.text)?);
                        graph.add_node(node)?;
                    }
                    let batch = extract_triples(&id, &c.text, providers.extractor)?;
                    report.chunks += 1;
                    report.skipped += batch.skipped;
                    for t in batch.triples {
                        let s = ensure_entity(graph, &t.subject, providers.embedder, pos)?;
                        let o = ensure_entity(graph, &t.object, providers.embedder, pos)?;
                        graph.add_edge(&s, &o, EdgeLabel::relation(t.relation.as_str()))?;
                        graph.add_edge(&s, &id, EdgeLabel::Mentions)?;
                        graph.add_edge(&o, &id, EdgeLabel::Mentions)?;
                        entities.insert(s);
                        entities.insert(o);
                        report.triples += 1;
                    }
                }
            }
            Block::Table(tb) => {
                ingest_table(graph, &doc.doc_id, pos, tb, providers.embedder)?;
                report.tables += 1;
                report.rows += tb.rows.len();
            }
            Block::Image(ib) => {
                ingest_image(graph, &doc.doc_id, pos, ib, providers.image_embedder, options.k_similar)?;
                report.images += 1;
            }
        }
    }
    report.entities = entities.len();
    Ok(report)
}

pub fn ingest_table(
    graph: &mut PropertyGraph,
    doc_id: &str,
    block: usize,
    table: &TableBlock,
    embedder: &dyn Embedder,
) -> Result<NodeId, IngestError> {
    let table_id = NodeId::new(format!("table:{doc_id}:{block}"));
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != table.columns.len() {
            return Err(IngestError::RaggedTable {
                table: table_id.to_string(),
                row: r,
                expected: table.columns.len(),
                got: row.len(),
            });
        }
    }
    if graph.contains(&table_id) {
        return Ok(table_id);
    }

    let mut flat = vec![table.title.clone(), table.columns.join(" | ")];
    flat.extend(
        table
            .rows
            .iter()
            .map(|row| row.iter().map(PropValue::to_text).collect::<Vec<_>>().join(" | ")),
    );
    let summary = format!(
        "{}: {} rows x {} columns ({})",
        if table.title.is_empty() { "table" } else { &table.title },
        table.rows.len(),
        table.columns.len(),
        table.columns.join(", ")
    );
    let node = Node::new(table_id.clone(), NodeKind::Table)
        .with_prop("table_id", table_id.as_str())
        .with_prop("doc_id", doc_id)
        .with_prop("title", table.title.as_str())
        .with_prop("page", i64::from(table.page))
        .with_prop("summary", summary)
        .with_prop("text", flat.join("\n"))
        .with_embedding(embed(embedder, block, &flat.join("\n"))?);
    graph.add_node(node)?;

    for (r, row) in table.rows.iter().enumerate() {
        let row_id = NodeId::new(format!("row:{doc_id}:{block}:{r}"));
        let mut node = Node::new(row_id.clone(), NodeKind::Row).with_prop("row_index", r as i64);
        for (col, value) in table.columns.iter().zip(row) {
            node.props.insert(col.clone(), value.clone());
        }
        graph.add_node(node)?;
        graph.add_edge(&row_id, &table_id, EdgeLabel::Belongs)?;
    }
    Ok(table_id)
}

pub fn ingest_image(
    graph: &mut PropertyGraph,
    doc_id: &str,
    block: usize,
    image: &ImageBlock,
    embedder: &dyn ImageEmbedder,
    k_similar: usize,
) -> Result<NodeId, IngestError> {
    let id = NodeId::new(format!("image:{doc_id}:{block}"));
    if graph.contains(&id) {
        return Ok(id);
    }
    let vector = embedder
        .embed_image(image)
        .map_err(|source| IngestError::Embedder { block, source })?;
    if vector.len() != graph.dim() {
        return Err(GraphError::DimensionMismatch {
            expected: graph.dim(),
            got: vector.len(),
        }
        .into());
    }
    let peers = if k_similar > 0 {
        graph.knn(&vector, k_similar, Some(NodeKind::Image))?
    } else {
        Vec::new()
    };
    let node = Node::new(id.clone(), NodeKind::Image)
        .with_prop("doc_id", doc_id)
        .with_prop("page", i64::from(image.page))
        .with_prop("path", image.path.as_str())
        .with_prop("format", image.format.as_str())
        .with_prop("resolution", image.resolution.as_str())
        .with_prop("summary", image.caption.as_str())
        .with_embedding(vector);
    graph.add_node(node)?;
    for (peer, _) in peers {
        graph.add_edge(&id, &peer, EdgeLabel::VisuallySimilar)?;
        graph.add_edge(&peer, &id, EdgeLabel::VisuallySimilar)?;
    }
    Ok(id)
}

/// Writes the code-unit tree of one source file. Returns the unit ids in
/// pre-order (module first).
pub fn ingest_code(
    graph: &mut PropertyGraph,
    module_name: &str,
    source: &str,
    profile: LanguageProfile,
    embedder: &dyn Embedder,
) -> Result<Vec<NodeId>, IngestError> {
    let units = skeletonize_code(module_name, source, profile)?;
    let ids: Vec<NodeId> = units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            if i == 0 {
                NodeId::new(format!("code:{module_name}"))
            } else {
                NodeId::new(format!("code:{module_name}:{}", u.name))
            }
        })
        .collect();
    for (i, (unit, id)) in units.iter().zip(&ids).enumerate() {
        if !graph.contains(id) {
            let node = Node::new(id.clone(), NodeKind::CodeUnit)
                .with_prop("scope", unit.scope.as_str())
                .with_prop("name", unit.name.as_str())
                .with_prop("signature", unit.signature.as_str())
                .with_prop("text", unit.skeleton_text.as_str())
                .with_prop("start_line", unit.span.start as i64)
                .with_prop("end_line", unit.span.end as i64)
                .with_embedding(embed(embedder, i, &unit.skeleton_text)?);
            graph.add_node(node)?;
        }
        if let Some(p) = unit.parent {
            graph.add_edge(&ids[p], id, EdgeLabel::ParentOf)?;
        }
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgstore::{cosine, Direction};

    fn providers<'a>(
        e: &'a HashingEmbedder,
        img: &'a dyn ImageEmbedder,
        x: &'a FixtureExtractor,
    ) -> Providers<'a> {
        Providers {
            embedder: e,
            image_embedder: img,
            extractor: x,
        }
    }

    fn text_doc(texts: &[&str]) -> ParsedDocument {
        ParsedDocument {
            doc_id: "d1".into(),
            title: "Gas laws".into(),
            blocks: texts
                .iter()
                .map(|t| Block::Text(TextBlock { page: 1, text: t.to_string() }))
                .collect(),
        }
    }

    #[test]
    fn one_chunk_one_triple() {
        let e = HashingEmbedder::new(16);
        let img = CaptionImageEmbedder::new(std::sync::Arc::new(e));
        let x = FixtureExtractor::default().rule("carbon", &["CO2 --- is_a --- gas"]);
        let mut g = PropertyGraph::new(16);
        let doc = text_doc(&["Carbon dioxide is a gas."]);
        let opts = IngestOptions { window: 50, stride: 25, k_similar: 2 };
        let report = ingest_document(&mut g, &doc, &providers(&e, &img, &x), &opts).unwrap();
        assert_eq!(g.nodes_of_kind(NodeKind::Chunk).count(), 1);
        assert_eq!(g.nodes_of_kind(NodeKind::Entity).count(), 2);
        let rel = g.edges().filter(|e| matches!(e.label, EdgeLabel::Relation(_))).count();
        let men = g.edges().filter(|e| e.label == EdgeLabel::Mentions).count();
        assert_eq!((rel, men), (1, 2));
        assert_eq!(report.triples, 1);
        assert_eq!(report.entities, 2);

        let chunk = g.nodes_of_kind(NodeKind::Chunk).next().unwrap();
        for key in ["title", "page", "summary", "keywords"] {
            assert!(chunk.props.contains_key(key), "missing {key}");
        }

        let before = g.clone();
        let again = ingest_document(&mut g, &doc, &providers(&e, &img, &x), &opts).unwrap();
        assert_eq!(again, report);
        assert_eq!(g, before);
    }

    #[test]
    fn shared_subject_is_one_entity() {
        let e = HashingEmbedder::new(16);
        let img = CaptionImageEmbedder::new(std::sync::Arc::new(e));
        let x = FixtureExtractor::default()
            .rule("alpha", &["CO2 --- is_a --- gas", "CO2 --- has --- mass"])
            .rule("beta", &["CO2 --- absorbs --- infrared", "CO2 --- in --- air"])
            .rule("gamma", &["CO2 --- from --- combustion", "CO2 --- forms --- dry ice"]);
        let mut g = PropertyGraph::new(16);
        let doc = text_doc(&["alpha text", "beta text", "gamma text"]);
        let report = ingest_document(&mut g, &doc, &providers(&e, &img, &x), &IngestOptions::default()).unwrap();
        // distinct surface forms across all triples
        let forms: BTreeSet<&str> = [
            "CO2", "gas", "mass", "infrared", "air", "combustion", "dry ice",
        ]
        .into();
        assert_eq!(g.nodes_of_kind(NodeKind::Entity).count(), forms.len());
        assert_eq!(report.entities, forms.len());
        let co2 = entity_id("CO2");
        let mentions = g.neighbors(&co2, Some(&EdgeLabel::Mentions), Direction::Out).unwrap();
        assert_eq!(mentions.len(), 3);
    }

    #[test]
    fn tables() {
        let e = HashingEmbedder::new(8);
        let mut g = PropertyGraph::new(8);
        let t = TableBlock {
            page: 3,
            title: "Antoine constants".into(),
            columns: vec!["species".into(), "A".into()],
            rows: vec![
                vec!["water".into(), PropValue::Float(8.07)],
                vec!["ethanol".into(), PropValue::Float(8.20)],
            ],
        };
        let tid = ingest_table(&mut g, "d", 0, &t, &e).unwrap();
        assert_eq!(g.nodes_of_kind(NodeKind::Table).count(), 1);
        assert_eq!(g.nodes_of_kind(NodeKind::Row).count(), 2);
        assert_eq!(g.edge_count(), 2);
        let row = g.get(&NodeId::from("row:d:0:1")).unwrap();
        assert_eq!(row.props["species"], PropValue::Str("ethanol".into()));
        assert!(g.get(&tid).unwrap().embedding.is_some());

        let empty = TableBlock { rows: vec![], ..t.clone() };
        ingest_table(&mut g, "d", 1, &empty, &e).unwrap();
        assert_eq!(g.nodes_of_kind(NodeKind::Table).count(), 2);

        let five = TableBlock {
            rows: (0..5).map(|i| vec![format!("s{i}").into(), PropValue::Int(i)]).collect(),
            ..t.clone()
        };
        let tid5 = ingest_table(&mut g, "d", 2, &five, &e).unwrap();
        let rows = g.neighbors(&tid5, Some(&EdgeLabel::Belongs), Direction::In).unwrap();
        assert_eq!(rows.len(), 5);

        let ragged = TableBlock { rows: vec![vec!["x".into()]], ..t };
        assert!(matches!(
            ingest_table(&mut g, "d", 3, &ragged, &e),
            Err(IngestError::RaggedTable { row: 0, expected: 2, got: 1, .. })
        ));
    }

    fn image(path: &str) -> ImageBlock {
        ImageBlock {
            page: 1,
            path: path.into(),
            format: "png".into(),
            resolution: "640x480".into(),
            caption: String::new(),
        }
    }

    #[test]
    fn images_link_to_nearest_peers() {
        let planted: [(&str, [f64; 2]); 4] = [
            ("a", [1.0, 0.0]),
            ("b", [0.9, 0.1]),
            ("c", [0.0, 1.0]),
            ("d", [0.6, 0.5]),
        ];
        let mut fx = FixtureImageEmbedder::new(2);
        for (p, v) in &planted {
            fx.insert(p, v.to_vec());
        }
        let mut g = PropertyGraph::new(2);
        let first = ingest_image(&mut g, "d", 0, &image("a"), &fx, 2).unwrap();
        assert_eq!(g.neighbors(&first, Some(&EdgeLabel::VisuallySimilar), Direction::Both).unwrap().len(), 0);
        for (i, (p, _)) in planted.iter().enumerate().skip(1) {
            ingest_image(&mut g, "d", i, &image(p), &fx, 2).unwrap();
        }
        // brute-force: each image's out-edges go to its 2 most similar predecessors
        for (i, (_, v)) in planted.iter().enumerate() {
            let mut prior: Vec<(f64, usize)> =
                (0..i).map(|j| (cosine(v, &planted[j].1), j)).collect();
            prior.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let expected: BTreeSet<NodeId> = prior
                .iter()
                .take(2)
                .map(|(_, j)| NodeId::new(format!("image:d:{j}")))
                .collect();
            let id = NodeId::new(format!("image:d:{i}"));
            for peer in &expected {
                assert!(g.has_edge(&id, peer, &EdgeLabel::VisuallySimilar));
                assert!(g.has_edge(peer, &id, &EdgeLabel::VisuallySimilar));
            }
        }
        let mut g2 = PropertyGraph::new(2);
        ingest_image(&mut g2, "d", 0, &image("a"), &fx, 1).unwrap();
        ingest_image(&mut g2, "d", 1, &image("c"), &fx, 1).unwrap();
        assert_eq!(g2.edge_count(), 2);

        let mut wrong = FixtureImageEmbedder::new(3);
        wrong.insert("z", vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            ingest_image(&mut g2, "d", 9, &image("z"), &wrong, 1),
            Err(IngestError::Graph(GraphError::DimensionMismatch { .. }))
        ));
    }

    #[test]
    fn code_units_become_parent_of_tree() {
        let e = HashingEmbedder::new(8);
        let mut g = PropertyGraph::new(8);
        let src = "class A:\n    def f(self):\n        pass\n";
        let ids = ingest_code(&mut g, "mod", src, LanguageProfile::Indented, &e).unwrap();
        assert_eq!(ids.len(), 3);
        assert!(g.has_edge(&ids[0], &ids[1], &EdgeLabel::ParentOf));
        assert!(g.has_edge(&ids[1], &ids[2], &EdgeLabel::ParentOf));
        let again = ingest_code(&mut g, "mod", src, LanguageProfile::Indented, &e).unwrap();
        assert_eq!(again, ids);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn document_json_schema() {
        let json = r#"{"doc_id":"d","title":"T","blocks":[
            {"type":"text","page":1,"text":"hello"},
            {"type":"table","page":2,"title":"t","columns":["a"],"rows":[[1],["x"]]},
            {"type":"image","page":3,"path":"f.png","format":"png","resolution":"1x1","caption":"c"}]}"#;
        let doc: ParsedDocument = serde_json::from_str(json).unwrap();
        assert_eq!(doc.blocks.len(), 3);
        assert!(matches!(doc.blocks[1], Block::Table(ref t) if t.rows[0][0] == PropValue::Int(1)));
        let neg = r#"{"doc_id":"d","blocks":[{"type":"text","page":-1,"text":"x"}]}"#;
        assert!(serde_json::from_str::<ParsedDocument>(neg).is_err());
    }
}
