//! Embedded property-graph store.
//!
//! Nodes are typed (chunk, entity, table, row, image, code unit), carry a
//! flat property map and an optional embedding of the store's fixed
//! dimension. Edges are labeled and de-duplicated on `(src, dst, label)`.
//! Similarity search is an exact cosine scan; ordering is always by NodeId
//! on ties so results are reproducible.
//!
//! The store follows Rust's ordinary aliasing rules: share it behind
//! [`SharedGraph`] for many readers or one writer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DIM: usize = 64;

pub type SharedGraph = Arc<RwLock<PropertyGraph>>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Chunk,
    Entity,
    Table,
    Row,
    Image,
    CodeUnit,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeKind::Chunk => "chunk",
            NodeKind::Entity => "entity",
            NodeKind::Table => "table",
            NodeKind::Row => "row",
            NodeKind::Image => "image",
            NodeKind::CodeUnit => "code_unit",
        };
        f.write_str(s)
    }
}

/// A property value: a scalar or a string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl PropValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            PropValue::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Renders the value as display text (strings verbatim).
    pub fn to_text(&self) -> String {
        match self {
            PropValue::Bool(b) => b.to_string(),
            PropValue::Int(i) => i.to_string(),
            PropValue::Float(x) => x.to_string(),
            PropValue::Str(s) => s.clone(),
        }
    }
}

impl From<&str> for PropValue {
    fn from(s: &str) -> Self {
        PropValue::Str(s.to_string())
    }
}

impl From<String> for PropValue {
    fn from(s: String) -> Self {
        PropValue::Str(s)
    }
}

impl From<i64> for PropValue {
    fn from(v: i64) -> Self {
        PropValue::Int(v)
    }
}

impl From<f64> for PropValue {
    fn from(v: f64) -> Self {
        PropValue::Float(v)
    }
}

impl From<bool> for PropValue {
    fn from(v: bool) -> Self {
        PropValue::Bool(v)
    }
}

pub type Props = BTreeMap<String, PropValue>;

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub props: Props,
    pub embedding: Option<Vec<f64>>,
}

impl Node {
    pub fn new(id: impl Into<NodeId>, kind: NodeKind) -> Self {
        Node {
            id: id.into(),
            kind,
            props: Props::new(),
            embedding: None,
        }
    }

    pub fn with_prop(mut self, key: &str, value: impl Into<PropValue>) -> Self {
        self.props.insert(key.to_string(), value.into());
        self
    }

    pub fn with_embedding(mut self, embedding: Vec<f64>) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn prop_str(&self, key: &str) -> Option<&str> {
        self.props.get(key).and_then(PropValue::as_str)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    Mentions,
    Relation(String),
    Belongs,
    VisuallySimilar,
    ParentOf,
}

impl EdgeLabel {
    pub fn relation(name: impl Into<String>) -> Self {
        EdgeLabel::Relation(name.into())
    }

    fn tag(&self) -> &'static str {
        match self {
            EdgeLabel::Mentions => "mentions",
            EdgeLabel::Relation(_) => "relation",
            EdgeLabel::Belongs => "belongs",
            EdgeLabel::VisuallySimilar => "visually_similar",
            EdgeLabel::ParentOf => "parent_of",
        }
    }

    /// Whether this label matches `filter`, comparing only the label kind
    /// when the filter is a relation with an empty name.
    fn matches(&self, filter: &EdgeLabel) -> bool {
        match (self, filter) {
            (EdgeLabel::Relation(a), EdgeLabel::Relation(b)) => b.is_empty() || a == b,
            _ => self == filter,
        }
    }

    fn endpoint_kinds(&self) -> (NodeKind, NodeKind) {
        match self {
            EdgeLabel::Mentions => (NodeKind::Entity, NodeKind::Chunk),
            EdgeLabel::Relation(_) => (NodeKind::Entity, NodeKind::Entity),
            EdgeLabel::Belongs => (NodeKind::Row, NodeKind::Table),
            EdgeLabel::VisuallySimilar => (NodeKind::Image, NodeKind::Image),
            EdgeLabel::ParentOf => (NodeKind::CodeUnit, NodeKind::CodeUnit),
        }
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeLabel::Relation(name) => write!(f, "relation:{name}"),
            other => f.write_str(other.tag()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub label: EdgeLabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node id `{0}` already present or retired")]
    DuplicateId(NodeId),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding of `{0}` contains a non-finite value")]
    NonFiniteEmbedding(NodeId),
    #[error("edge endpoint `{0}` does not exist")]
    MissingEndpoint(NodeId),
    #[error("node `{0}` does not exist")]
    MissingNode(NodeId),
    #[error("{label} edge cannot connect {src} -> {dst}")]
    KindMismatch {
        label: String,
        src: NodeKind,
        dst: NodeKind,
    },
    #[error("parent_of edge {0} -> {1} would break the code-unit forest")]
    NotAForest(NodeId, NodeId),
    #[error("cannot merge nodes of different kinds")]
    MixedKinds,
    #[error("survivor `{0}` is not a member of the merge group")]
    SurvivorNotInGroup(NodeId),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Integrity { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

type Adjacency = BTreeMap<NodeId, BTreeSet<(EdgeLabel, NodeId)>>;

#[derive(Clone, Debug)]
pub struct PropertyGraph {
    dim: usize,
    nodes: BTreeMap<NodeId, Node>,
    out: Adjacency,
    inc: Adjacency,
    edge_count: usize,
    /// Retired ids (merged away) and the survivor they now resolve to.
    aliases: BTreeMap<NodeId, NodeId>,
}

impl PartialEq for PropertyGraph {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.nodes == other.nodes
            && self.out == other.out
            && self.aliases == other.aliases
    }
}

impl Default for PropertyGraph {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl PropertyGraph {
    pub fn new(dim: usize) -> Self {
        PropertyGraph {
            dim,
            nodes: BTreeMap::new(),
            out: Adjacency::new(),
            inc: Adjacency::new(),
            edge_count: 0,
            aliases: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn get_mut_props(&mut self, id: &NodeId) -> Option<&mut Props> {
        self.nodes.get_mut(id).map(|n| &mut n.props)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    /// Follows merge aliases to the live node an id now refers to.
    pub fn resolve(&self, id: &NodeId) -> NodeId {
        let mut cur = id;
        while let Some(next) = self.aliases.get(cur) {
            cur = next;
        }
        cur.clone()
    }

    pub fn aliases(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.aliases
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(move |n| n.kind == kind)
    }

    /// Edges in `(src, label, dst)` order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.out.iter().flat_map(|(src, set)| {
            set.iter().map(move |(label, dst)| Edge {
                src: src.clone(),
                dst: dst.clone(),
                label: label.clone(),
            })
        })
    }

    pub fn has_edge(&self, src: &NodeId, dst: &NodeId, label: &EdgeLabel) -> bool {
        self.out
            .get(src)
            .is_some_and(|s| s.contains(&(label.clone(), dst.clone())))
    }

    fn check_embedding(&self, id: &NodeId, emb: &[f64]) -> Result<()> {
        if emb.len() != self.dim {
            return Err(GraphError::DimensionMismatch {
                expected: self.dim,
                got: emb.len(),
            });
        }
        if emb.iter().any(|x| !x.is_finite()) {
            return Err(GraphError::NonFiniteEmbedding(id.clone()));
        }
        Ok(())
    }

    pub fn add_node(&mut self, node: Node) -> Result<NodeId> {
        if self.nodes.contains_key(&node.id) || self.aliases.contains_key(&node.id) {
            return Err(GraphError::DuplicateId(node.id));
        }
        if let Some(emb) = &node.embedding {
            self.check_embedding(&node.id, emb)?;
        }
        let id = node.id.clone();
        self.nodes.insert(id.clone(), node);
        Ok(id)
    }

    /// Replaces a node's embedding.
    pub fn set_embedding(&mut self, id: &NodeId, embedding: Vec<f64>) -> Result<()> {
        self.check_embedding(id, &embedding)?;
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| GraphError::MissingNode(id.clone()))?;
        node.embedding = Some(embedding);
        Ok(())
    }

    /// Adds an edge; re-adding an existing `(src, dst, label)` is a no-op.
    pub fn add_edge(&mut self, src: &NodeId, dst: &NodeId, label: EdgeLabel) -> Result<()> {
        let src_kind = self
            .nodes
            .get(src)
            .ok_or_else(|| GraphError::MissingEndpoint(src.clone()))?
            .kind;
        let dst_kind = self
            .nodes
            .get(dst)
            .ok_or_else(|| GraphError::MissingEndpoint(dst.clone()))?
            .kind;
        if (src_kind, dst_kind) != label.endpoint_kinds() {
            return Err(GraphError::KindMismatch {
                label: label.tag().to_string(),
                src: src_kind,
                dst: dst_kind,
            });
        }
        if self.has_edge(src, dst, &label) {
            return Ok(());
        }
        if label == EdgeLabel::ParentOf && !self.parent_edge_keeps_forest(src, dst) {
            return Err(GraphError::NotAForest(src.clone(), dst.clone()));
        }
        self.insert_edge_unchecked(src.clone(), dst.clone(), label);
        Ok(())
    }

    fn parent_edge_keeps_forest(&self, parent: &NodeId, child: &NodeId) -> bool {
        if parent == child {
            return false;
        }
        let has_parent = self
            .inc
            .get(child)
            .is_some_and(|s| s.iter().any(|(l, _)| *l == EdgeLabel::ParentOf));
        if has_parent {
            return false;
        }
        // Walk up from `parent`; reaching `child` would close a cycle.
        let mut cur = parent.clone();
        loop {
            let up = self.inc.get(&cur).and_then(|s| {
                s.iter()
                    .find(|(l, _)| *l == EdgeLabel::ParentOf)
                    .map(|(_, p)| p.clone())
            });
            match up {
                Some(p) if &p == child => return false,
                Some(p) => cur = p,
                None => return true,
            }
        }
    }

    fn insert_edge_unchecked(&mut self, src: NodeId, dst: NodeId, label: EdgeLabel) -> bool {
        let fresh = self
            .out
            .entry(src.clone())
            .or_default()
            .insert((label.clone(), dst.clone()));
        if fresh {
            self.inc.entry(dst).or_default().insert((label, src));
            self.edge_count += 1;
        }
        fresh
    }

    fn remove_edge_unchecked(&mut self, src: &NodeId, dst: &NodeId, label: &EdgeLabel) {
        let key = (label.clone(), dst.clone());
        if let Some(set) = self.out.get_mut(src) {
            if set.remove(&key) {
                self.edge_count -= 1;
            }
            if set.is_empty() {
                self.out.remove(src);
            }
        }
        let key = (label.clone(), src.clone());
        if let Some(set) = self.inc.get_mut(dst) {
            set.remove(&key);
            if set.is_empty() {
                self.inc.remove(dst);
            }
        }
    }

    /// Adjacent nodes of `node`, sorted by neighbor id then edge.
    pub fn neighbors(
        &self,
        node: &NodeId,
        label_filter: Option<&EdgeLabel>,
        direction: Direction,
    ) -> Result<Vec<(NodeId, Edge)>> {
        if !self.nodes.contains_key(node) {
            return Err(GraphError::MissingNode(node.clone()));
        }
        let keep = |l: &EdgeLabel| label_filter.is_none_or(|f| l.matches(f));
        let mut result = Vec::new();
        if matches!(direction, Direction::Out | Direction::Both) {
            if let Some(set) = self.out.get(node) {
                for (label, dst) in set.iter().filter(|(l, _)| keep(l)) {
                    let edge = Edge {
                        src: node.clone(),
                        dst: dst.clone(),
                        label: label.clone(),
                    };
                    result.push((dst.clone(), edge));
                }
            }
        }
        if matches!(direction, Direction::In | Direction::Both) {
            if let Some(set) = self.inc.get(node) {
                for (label, src) in set.iter().filter(|(l, _)| keep(l)) {
                    let edge = Edge {
                        src: src.clone(),
                        dst: node.clone(),
                        label: label.clone(),
                    };
                    // A self-loop is already listed from the out side.
                    if direction == Direction::Both && src == node {
                        continue;
                    }
                    result.push((src.clone(), edge));
                }
            }
        }
        result.sort();
        Ok(result)
    }

    /// Exact k nearest neighbors by cosine similarity, descending, ties by
    /// ascending id. Nodes without embeddings are skipped.
    pub fn knn(
        &self,
        query: &[f64],
        k: usize,
        kind_filter: Option<NodeKind>,
    ) -> Result<Vec<(NodeId, f64)>> {
        if query.len() != self.dim {
            return Err(GraphError::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        let mut scored: Vec<(NodeId, f64)> = self
            .nodes
            .values()
            .filter(|n| kind_filter.is_none_or(|k| n.kind == k))
            .filter_map(|n| n.embedding.as_ref().map(|e| (n.id.clone(), cosine(query, e))))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Collapses `group` into `survivor`. Edges of the other members are
    /// rewired onto the survivor; self-loops produced by rewiring are
    /// dropped and duplicates collapse. Survivor properties win on
    /// conflicts, then remaining members in id order.
    pub fn merge_nodes(&mut self, group: &BTreeSet<NodeId>, survivor: &NodeId) -> Result<NodeId> {
        if !group.contains(survivor) {
            return Err(GraphError::SurvivorNotInGroup(survivor.clone()));
        }
        let mut kind = None;
        for id in group {
            let node = self
                .nodes
                .get(id)
                .ok_or_else(|| GraphError::MissingNode(id.clone()))?;
            match kind {
                None => kind = Some(node.kind),
                Some(k) if k != node.kind => return Err(GraphError::MixedKinds),
                _ => {}
            }
        }

        let retired: Vec<NodeId> = group.iter().filter(|id| *id != survivor).cloned().collect();
        let remap = |id: &NodeId| -> NodeId {
            if group.contains(id) {
                survivor.clone()
            } else {
                id.clone()
            }
        };

        let mut rewired = Vec::new();
        for id in &retired {
            for (label, dst) in self.out.get(id).cloned().unwrap_or_default() {
                rewired.push((survivor.clone(), remap(&dst), label.clone()));
                self.remove_edge_unchecked(id, &dst, &label);
            }
            for (label, src) in self.inc.get(id).cloned().unwrap_or_default() {
                rewired.push((remap(&src), survivor.clone(), label.clone()));
                self.remove_edge_unchecked(&src, id, &label);
            }
        }
        for (src, dst, label) in rewired {
            if src != dst {
                self.insert_edge_unchecked(src, dst, label);
            }
        }

        let mut props = Props::new();
        let mut embedding = None;
        for id in &retired {
            let node = self.nodes.remove(id).expect("member checked above");
            for (k, v) in node.props {
                props.entry(k).or_insert(v);
            }
            if embedding.is_none() {
                embedding = node.embedding;
            }
            self.aliases.insert(id.clone(), survivor.clone());
        }
        let surv = self.nodes.get_mut(survivor).expect("member checked above");
        for (k, v) in props {
            surv.props.entry(k).or_insert(v);
        }
        if surv.embedding.is_none() {
            surv.embedding = embedding;
        }
        // Keep alias chains flat.
        for target in self.aliases.values_mut() {
            if group.contains(target) {
                *target = survivor.clone();
            }
        }
        Ok(survivor.clone())
    }

    /// Writes the graph as JSONL: a meta line, nodes, edges, then aliases.
    pub fn export<W: Write>(&self, mut sink: W) -> Result<()> {
        let meta = Record::Meta { dim: self.dim };
        writeln!(sink, "{}", to_line(&meta))?;
        for node in self.nodes.values() {
            let rec = Record::Node {
                id: node.id.clone(),
                kind: node.kind,
                props: node.props.clone(),
                emb: node.embedding.clone(),
            };
            writeln!(sink, "{}", to_line(&rec))?;
        }
        for edge in self.edges() {
            let rel = match &edge.label {
                EdgeLabel::Relation(name) => Some(name.clone()),
                _ => None,
            };
            let rec = Record::Edge {
                src: edge.src,
                dst: edge.dst,
                label: edge.label.tag().to_string(),
                rel,
            };
            writeln!(sink, "{}", to_line(&rec))?;
        }
        for (from, to) in &self.aliases {
            let rec = Record::Alias {
                from: from.clone(),
                to: to.clone(),
            };
            writeln!(sink, "{}", to_line(&rec))?;
        }
        sink.flush()?;
        Ok(())
    }

    /// Reads a graph written by [`PropertyGraph::export`]. A missing meta
    /// line is tolerated; the dimension is then taken from the first
    /// embedding, falling back to [`DEFAULT_DIM`].
    pub fn import<R: BufRead>(source: R) -> Result<PropertyGraph> {
        let mut records = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| GraphError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push((i + 1, rec));
        }

        let dim = records
            .iter()
            .find_map(|(_, r)| match r {
                Record::Meta { dim } => Some(*dim),
                _ => None,
            })
            .or_else(|| {
                records.iter().find_map(|(_, r)| match r {
                    Record::Node { emb: Some(e), .. } => Some(e.len()),
                    _ => None,
                })
            })
            .unwrap_or(DEFAULT_DIM);

        let mut graph = PropertyGraph::new(dim);
        // 0 = meta, 1 = nodes, 2 = edges, 3 = aliases
        let mut phase = 0;
        for (line, rec) in records {
            let rank = match &rec {
                Record::Meta { .. } => 0,
                Record::Node { .. } => 1,
                Record::Edge { .. } => 2,
                Record::Alias { .. } => 3,
            };
            if rank < phase || (rank == 0 && line != 1) {
                return Err(GraphError::Parse {
                    line,
                    message: "record out of order (meta, nodes, edges, aliases)".into(),
                });
            }
            phase = rank;
            match rec {
                Record::Meta { .. } => {}
                Record::Node {
                    id,
                    kind,
                    props,
                    emb,
                } => {
                    let node = Node {
                        id,
                        kind,
                        props,
                        embedding: emb,
                    };
                    graph.add_node(node).map_err(|e| GraphError::Integrity {
                        line,
                        message: e.to_string(),
                    })?;
                }
                Record::Edge {
                    src,
                    dst,
                    label,
                    rel,
                } => {
                    let label = parse_label(&label, rel).ok_or_else(|| GraphError::Parse {
                        line,
                        message: format!("unknown edge label `{label}`"),
                    })?;
                    graph
                        .add_edge(&src, &dst, label)
                        .map_err(|e| GraphError::Integrity {
                            line,
                            message: e.to_string(),
                        })?;
                }
                Record::Alias { from, to } => {
                    if graph.contains(&from) || !graph.contains(&to) {
                        return Err(GraphError::Integrity {
                            line,
                            message: format!("alias {from} -> {to} does not point at a live node"),
                        });
                    }
                    graph.aliases.insert(from, to);
                }
            }
        }
        Ok(graph)
    }
}

fn parse_label(tag: &str, rel: Option<String>) -> Option<EdgeLabel> {
    Some(match tag {
        "mentions" => EdgeLabel::Mentions,
        "relation" => EdgeLabel::Relation(rel?),
        "belongs" => EdgeLabel::Belongs,
        "visually_similar" => EdgeLabel::VisuallySimilar,
        "parent_of" => EdgeLabel::ParentOf,
        _ => return None,
    })
}

fn to_line(rec: &Record) -> String {
    serde_json::to_string(rec).expect("graph records always serialize")
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
enum Record {
    Meta {
        dim: usize,
    },
    Node {
        id: NodeId,
        kind: NodeKind,
        #[serde(default)]
        props: Props,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        emb: Option<Vec<f64>>,
    },
    Edge {
        src: NodeId,
        dst: NodeId,
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rel: Option<String>,
    },
    Alias {
        from: NodeId,
        to: NodeId,
    },
}
