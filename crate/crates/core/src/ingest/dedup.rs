//! Entity de-duplication.
//!
//! Two entities are candidates when their embeddings are close (cosine at
//! or above a threshold) and their case-folded names are within an edit
//! distance. Candidate pairs are grouped transitively, groups contained in
//! another group are discarded, and each remaining group collapses onto
//! its most descriptive member: the longest name, ties broken by the
//! lexicographically smallest.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::kgstore::{cosine, GraphError, NodeId, NodeKind, PropertyGraph};

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    strsim::levenshtein(a, b)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupReport {
    pub groups_merged: usize,
    pub nodes_removed: usize,
}

pub(crate) fn entity_name(graph: &PropertyGraph, id: &NodeId) -> String {
    graph
        .get(id)
        .and_then(|n| n.prop_str("name"))
        .unwrap_or(id.as_str())
        .to_string()
}

/// Whether two entities satisfy both similarity conditions.
pub fn is_duplicate_pair(
    graph: &PropertyGraph,
    a: &NodeId,
    b: &NodeId,
    cos_threshold: f64,
    lev_threshold: usize,
) -> bool {
    let (Some(na), Some(nb)) = (graph.get(a), graph.get(b)) else {
        return false;
    };
    let sim = match (&na.embedding, &nb.embedding) {
        (Some(x), Some(y)) => cosine(x, y),
        _ => 0.0,
    };
    if sim < cos_threshold {
        return false;
    }
    let fa = entity_name(graph, a).to_lowercase();
    let fb = entity_name(graph, b).to_lowercase();
    levenshtein(&fa, &fb) <= lev_threshold
}

/// Candidate groups, before merging. Each group has at least two members.
pub fn duplicate_groups(
    graph: &PropertyGraph,
    cos_threshold: f64,
    lev_threshold: usize,
) -> Vec<BTreeSet<NodeId>> {
    let ids: Vec<NodeId> = graph.nodes_of_kind(NodeKind::Entity).map(|n| n.id.clone()).collect();
    let mut uf = UnionFind::<usize>::new(ids.len());
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            if is_duplicate_pair(graph, &ids[i], &ids[j], cos_threshold, lev_threshold) {
                uf.union(i, j);
            }
        }
    }
    let mut by_root: BTreeMap<usize, BTreeSet<NodeId>> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        by_root.entry(uf.find(i)).or_default().insert(id.clone());
    }
    let groups: Vec<BTreeSet<NodeId>> = by_root.into_values().filter(|g| g.len() > 1).collect();

    // Drop groups wholly contained in a larger one. Components are disjoint,
    // so this only matters if grouping is ever relaxed to overlapping sets.
    let mut kept: Vec<BTreeSet<NodeId>> = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        let subsumed = groups
            .iter()
            .enumerate()
            .any(|(j, h)| i != j && g.is_subset(h) && (g.len() < h.len() || j < i));
        if !subsumed {
            kept.push(g.clone());
        }
    }
    kept
}

/// The longest name wins; ties go to the lexicographically smallest name,
/// then the smallest id.
pub fn choose_survivor(graph: &PropertyGraph, group: &BTreeSet<NodeId>) -> NodeId {
    group
        .iter()
        .map(|id| (entity_name(graph, id), id))
        .min_by(|(na, ia), (nb, ib)| {
            nb.chars()
                .count()
                .cmp(&na.chars().count())
                .then_with(|| na.cmp(nb))
                .then_with(|| ia.cmp(ib))
        })
        .map(|(_, id)| id.clone())
        .expect("groups are non-empty")
}

pub fn dedup_entities(
    graph: &mut PropertyGraph,
    cos_threshold: f64,
    lev_threshold: usize,
) -> Result<DedupReport, GraphError> {
    let mut report = DedupReport::default();
    for group in duplicate_groups(graph, cos_threshold, lev_threshold) {
        let survivor = choose_survivor(graph, &group);
        graph.merge_nodes(&group, &survivor)?;
        report.groups_merged += 1;
        report.nodes_removed += group.len() - 1;
    }
    Ok(report)
}
