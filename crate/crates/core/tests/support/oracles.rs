//! Brute-force reference implementations for metric and retrieval checks.
//! Deliberately naive: enumeration instead of dynamic programming or
//! sorting tricks, so they share no code paths with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use toolgraph_core::{EdgeLabel, NodeId, NodeKind, PropertyGraph};

pub fn words(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_ascii_alphanumeric() {
            cur.push(ch.to_ascii_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn grams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + n <= tokens.len() {
        out.push(tokens[i..i + n].to_vec());
        i += 1;
    }
    out
}

fn occurrences(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

pub fn bleu(candidate: &str, reference: &str, n: usize) -> f64 {
    let c = words(candidate);
    let r = words(reference);
    let orders = if c.len() < n { c.len() } else { n };
    if orders == 0 {
        return 0.0;
    }
    let mut product = 1.0;
    for order in 1..=orders {
        let cg = grams(&c, order);
        let rg = grams(&r, order);
        let mut distinct: Vec<Vec<String>> = Vec::new();
        for g in &cg {
            if !distinct.contains(g) {
                distinct.push(g.clone());
            }
        }
        let mut clipped = 0;
        for g in &distinct {
            clipped += occurrences(&cg, g).min(occurrences(&rg, g));
        }
        product *= clipped as f64 / cg.len() as f64;
    }
    let bp = if c.len() > r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    bp * product.powf(1.0 / orders as f64)
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == *n))
}

/// Longest common subsequence by enumerating every subset of the shorter
/// side. Inputs must stay small.
pub fn lcs(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    assert!(short.len() <= 16, "oracle input too large");
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let pick: Vec<&String> = (0..short.len()).filter(|i| mask & (1 << i) != 0).map(|i| &short[i]).collect();
        if pick.len() > best && is_subsequence(&pick, long) {
            best = pick.len();
        }
    }
    best
}

pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let c = words(candidate);
    let r = words(reference);
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let l = lcs(&c, &r) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / c.len() as f64;
    let rec = l / r.len() as f64;
    2.0 * p * rec / (p + rec)
}

fn squash(s: &str) -> String {
    let mut out = String::new();
    let mut pending_space = false;
    for ch in s.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
        }
    }
    out
}

pub fn exact_match(c: &[String], r: &[String]) -> f64 {
    let hits = c.iter().zip(r).filter(|(a, b)| squash(a) == squash(b)).count();
    hits as f64 / c.len() as f64
}

fn head(ranking: &[String], k: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in ranking {
        if out.len() < k && !out.contains(t) {
            out.push(t.clone());
        }
    }
    out
}

pub fn recall(gold: &[BTreeSet<String>], rankings: &[Vec<String>], k: usize) -> f64 {
    let mut total = 0.0;
    for (g, r) in gold.iter().zip(rankings) {
        let top = head(r, k);
        let hit = g.iter().filter(|x| top.contains(x)).count();
        total += hit as f64 / g.len() as f64;
    }
    total / gold.len() as f64
}

pub fn comp(gold: &[BTreeSet<String>], rankings: &[Vec<String>], k: usize) -> f64 {
    let mut total = 0.0;
    for (g, r) in gold.iter().zip(rankings) {
        let top = head(r, k);
        if g.iter().all(|x| top.contains(x)) {
            total += 1.0;
        }
    }
    total / gold.len() as f64
}

fn gain(rel: &[f64], k: usize) -> f64 {
    let mut s = 0.0;
    for (i, g) in rel.iter().enumerate() {
        if i >= k {
            break;
        }
        s += (2f64.powf(*g) - 1.0) / ((i + 2) as f64).log2();
    }
    s
}

fn permutations(items: &[f64]) -> Vec<Vec<f64>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Ideal gain as the best over every ordering.
pub fn ndcg(rel: &[f64], k: usize) -> f64 {
    assert!(rel.len() <= 7, "oracle input too large");
    let ideal = permutations(rel).iter().map(|p| gain(p, k)).fold(0.0, f64::max);
    if ideal <= 0.0 {
        0.0
    } else {
        gain(rel, k) / ideal
    }
}

pub fn ndcg_mean(rels: &[Vec<f64>], k: usize) -> f64 {
    if rels.is_empty() {
        return 0.0;
    }
    rels.iter().map(|r| ndcg(r, k)).sum::<f64>() / rels.len() as f64
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Top-k by full scan: repeatedly take the best remaining (score desc, id asc).
pub fn knn(g: &PropertyGraph, q: &[f64], k: usize, kind: Option<NodeKind>) -> Vec<(NodeId, f64)> {
    let mut pool: Vec<(NodeId, f64)> = g
        .nodes()
        .filter(|n| kind.is_none_or(|k| n.kind == k))
        .filter_map(|n| n.embedding.as_ref().map(|e| (n.id.clone(), cos(q, e))))
        .collect();
    let mut out = Vec::new();
    while out.len() < k && !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            if pool[i].1 > pool[best].1 || (pool[i].1 == pool[best].1 && pool[i].0 < pool[best].0) {
                best = i;
            }
        }
        out.push(pool.remove(best));
    }
    out
}

/// Expected retrieval output as (triples, parent chunks) from a scan of
/// every edge.
pub type ExpectedContext = (Vec<(NodeId, String, NodeId)>, Vec<(NodeId, f64)>);

pub fn expand(g: &PropertyGraph, hits: &[(NodeId, f64)]) -> ExpectedContext {
    let edges: Vec<_> = g.edges().collect();
    let mut triples: Vec<(NodeId, String, NodeId)> = Vec::new();
    let mut parents: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (h, score) in hits {
        let mut outgoing: Vec<(NodeId, String)> = Vec::new();
        let mut incoming: Vec<(NodeId, String)> = Vec::new();
        for e in &edges {
            if let EdgeLabel::Relation(rel) = &e.label {
                if &e.src == h {
                    outgoing.push((e.dst.clone(), rel.clone()));
                }
                if &e.dst == h {
                    incoming.push((e.src.clone(), rel.clone()));
                }
            }
            if e.label == EdgeLabel::Mentions && &e.src == h {
                let best = parents.entry(e.dst.clone()).or_insert(f64::NEG_INFINITY);
                if *score > *best {
                    *best = *score;
                }
            }
        }
        outgoing.sort();
        incoming.sort();
        for (dst, rel) in outgoing {
            let t = (h.clone(), rel, dst);
            if !triples.contains(&t) {
                triples.push(t);
            }
        }
        for (src, rel) in incoming {
            let t = (src, rel, h.clone());
            if !triples.contains(&t) {
                triples.push(t);
            }
        }
    }
    let mut parents: Vec<(NodeId, f64)> = parents.into_iter().collect();
    // Selection sort: score desc, then id.
    for i in 0..parents.len() {
        for j in i + 1..parents.len() {
            let (a, b) = (&parents[i], &parents[j]);
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                parents.swap(i, j);
            }
        }
    }
    (triples, parents)
}

/// Plain dynamic-programming edit distance over chars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}
