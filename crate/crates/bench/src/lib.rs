//! Synthetic inputs shared by the benchmarks.

use toolgraph_core::{EdgeLabel, Node, NodeId, NodeKind, PropertyGraph};

/// Small deterministic generator so the benches need no RNG crate.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed)
    }

    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_f64() + 1.0) / 2.0 * n as f64) as usize % n
    }

    pub fn vector(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.next_f64()).collect()
    }
}

/// Entities with random embeddings, each mentioned by a chunk and linked
/// to two others.
pub fn entity_graph(entities: usize, dim: usize, seed: u64) -> PropertyGraph {
    let mut rng = Lcg::new(seed);
    let mut g = PropertyGraph::new(dim);
    let chunks = entities / 4 + 1;
    for c in 0..chunks {
        g.add_node(Node::new(format!("chunk:{c}"), NodeKind::Chunk).with_prop("text", format!("chunk number {c}")))
            .unwrap();
    }
    for i in 0..entities {
        g.add_node(
            Node::new(format!("entity:{i}"), NodeKind::Entity)
                .with_prop("name", format!("entity {i}"))
                .with_embedding(rng.vector(dim)),
        )
        .unwrap();
        g.add_edge(&NodeId::new(format!("entity:{i}")), &NodeId::new(format!("chunk:{}", i % chunks)), EdgeLabel::Mentions)
            .unwrap();
    }
    for i in 0..entities {
        for _ in 0..2 {
            let j = rng.below(entities);
            g.add_edge(
                &NodeId::new(format!("entity:{i}")),
                &NodeId::new(format!("entity:{j}")),
                EdgeLabel::relation("related to"),
            )
            .unwrap();
        }
    }
    g
}

pub fn prose(words: usize) -> String {
    const VOCAB: &[&str] = &["gas", "pressure", "volume", "ideal", "law", "mole", "kelvin", "of", "the"];
    let mut rng = Lcg::new(3);
    (0..words).map(|_| VOCAB[rng.below(VOCAB.len())]).collect::<Vec<_>>().join(" ")
}
