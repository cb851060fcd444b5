//! Metric functions. All are pure and return values in `[0, 1]`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::text::tokenize;
use crate::tools::ValidationReport;

type Params = BTreeMap<String, serde_json::Value>;

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn check_lengths(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b || a == 0 {
        return Err(EvalError::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

/// What the engine did on one planning record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanPrediction {
    pub used_tool: bool,
    pub solved: bool,
    pub plan: Vec<String>,
}

/// Gold labels for one planning record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanGold {
    pub requires_tool: bool,
    pub plan: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanningMetrics {
    pub awareness: f64,
    pub pass_rate: f64,
    pub accuracy: f64,
}

pub fn task_planning_metrics(
    gold: &[PlanGold],
    predictions: &[PlanPrediction],
) -> Result<PlanningMetrics, EvalError> {
    check_lengths(gold.len(), predictions.len())?;
    let n = gold.len() as f64;
    let count = |f: &dyn Fn(&PlanGold, &PlanPrediction) -> bool| {
        gold.iter().zip(predictions).filter(|(g, p)| f(g, p)).count() as f64 / n
    };
    Ok(PlanningMetrics {
        awareness: count(&|g, p| g.requires_tool == p.used_tool),
        pass_rate: count(&|_, p| p.solved),
        accuracy: count(&|g, p| g.plan == p.plan),
    })
}

/// First `k` distinct entries of a ranking.
pub fn top_k(ranking: &[String], k: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for t in ranking {
        if out.len() == k {
            break;
        }
        out.insert(t.clone());
    }
    out
}

/// Mean over queries of `|top-k ∩ gold| / |gold|`.
pub fn recall_at_k(gold: &[BTreeSet<String>], rankings: &[Vec<String>], k: usize) -> Result<f64, EvalError> {
    check_lengths(gold.len(), rankings.len())?;
    if let Some(q) = gold.iter().position(BTreeSet::is_empty) {
        return Err(EvalError::EmptyGoldSet(q));
    }
    Ok(mean(gold.iter().zip(rankings).map(|(g, r)| {
        top_k(r, k).intersection(g).count() as f64 / g.len() as f64
    })))
}

/// Discounted cumulative gain of the first `k` relevances.
pub fn dcg(relevances: &[f64], k: usize) -> f64 {
    relevances
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| (2f64.powf(*g) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG of one ranked relevance list; 0 when the ideal gain is 0.
pub fn ndcg(relevances: &[f64], k: usize) -> f64 {
    let mut ideal = relevances.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(&ideal, k);
    if idcg <= 0.0 {
        0.0
    } else {
        dcg(relevances, k) / idcg
    }
}

/// Mean NDCG@k over queries, each given as relevances in ranked order.
pub fn ndcg_at_k(relevances: &[Vec<f64>], k: usize) -> f64 {
    mean(relevances.iter().map(|r| ndcg(r, k)))
}

/// Fraction of queries whose gold set is contained in the top-k.
pub fn comp_at_k(gold: &[BTreeSet<String>], rankings: &[Vec<String>], k: usize) -> Result<f64, EvalError> {
    check_lengths(gold.len(), rankings.len())?;
    Ok(mean(gold.iter().zip(rankings).map(|(g, r)| {
        if g.is_subset(&top_k(r, k)) {
            1.0
        } else {
            0.0
        }
    })))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CallingMetrics {
    pub cons: Option<f64>,
    pub pe: Option<f64>,
    pub eh: Option<f64>,
}

fn values_match(predicted: &serde_json::Value, gold: &serde_json::Value) -> bool {
    use serde_json::Value;
    match (predicted, gold) {
        (Value::String(a), Value::String(b)) => normalize(a) == normalize(b),
        (a, b) if a.is_number() || b.is_number() => {
            let num = |v: &Value| v.as_f64().or_else(|| v.as_str().and_then(|s| s.trim().parse().ok()));
            matches!((num(a), num(b)), (Some(x), Some(y)) if x == y)
        }
        (a, b) => a == b,
    }
}

/// Tool-calling metrics. `param_pairs` holds `(predicted, gold)` parameter
/// maps per call; every gold parameter counts once toward the extraction
/// denominator. A metric with a zero denominator is `None`.
pub fn tool_calling_metrics(
    reports: &[ValidationReport],
    param_pairs: &[(Params, Params)],
    faults: usize,
    recovered: usize,
) -> CallingMetrics {
    let required: usize = reports.iter().map(|r| r.required_total).sum();
    let consistent: usize = reports.iter().map(|r| r.required_consistent).sum();
    let total: usize = param_pairs.iter().map(|(_, g)| g.len()).sum();
    let correct: usize = param_pairs
        .iter()
        .map(|(p, g)| {
            g.iter()
                .filter(|(k, gv)| p.get(*k).is_some_and(|pv| values_match(pv, gv)))
                .count()
        })
        .sum();
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    CallingMetrics {
        cons: ratio(consistent, required),
        pe: ratio(correct, total),
        eh: ratio(recovered.min(faults), faults),
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut m = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_default() += 1;
        }
    }
    m
}

/// BLEU with uniform weights over `min(n, |candidate|)` orders, clipped
/// counts, no smoothing.
pub fn bleu(candidate: &str, reference: &str, n: usize) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    let orders = n.min(c.len());
    if orders == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for order in 1..=orders {
        let cc = ngram_counts(&c, order);
        let rc = ngram_counts(&r, order);
        let total: usize = cc.values().sum();
        let clipped: usize = cc
            .iter()
            .map(|(g, k)| (*k).min(rc.get(g).copied().unwrap_or(0)))
            .sum();
        if clipped == 0 {
            return 0.0;
        }
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let bp = if c.len() > r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    bp * (log_sum / orders as f64).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// ROUGE-L F-measure over longest common token subsequence.
pub fn rouge_l(candidate: &str, reference: &str, beta: f64) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&c, &r);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / c.len() as f64;
    let rec = lcs as f64 / r.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * rec / (rec + b2 * p)
}

/// Trim and collapse internal whitespace.
pub fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn exact_match(candidates: &[String], references: &[String]) -> Result<f64, EvalError> {
    check_lengths(candidates.len(), references.len())?;
    Ok(mean(candidates.iter().zip(references).map(|(c, r)| {
        if normalize(c) == normalize(r) {
            1.0
        } else {
            0.0
        }
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn list(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn planning() {
        let g = PlanGold { requires_tool: true, plan: list(&["code"]) };
        let p = PlanPrediction { used_tool: true, solved: true, plan: list(&["code"]) };
        let m = task_planning_metrics(&vec![g.clone(); 4], &vec![p.clone(); 4]).unwrap();
        assert_eq!((m.awareness, m.pass_rate, m.accuracy), (1.0, 1.0, 1.0));

        let mut preds = vec![p.clone(); 10];
        preds[3].used_tool = false;
        preds[7].used_tool = false;
        let m = task_planning_metrics(&vec![g.clone(); 10], &preds).unwrap();
        assert_eq!(m.awareness, 8.0 / 10.0);
        assert!(task_planning_metrics(&[], &[]).is_err());
        assert!(task_planning_metrics(&[g], &[]).is_err());
    }

    #[test]
    fn recall_examples() {
        let gold = vec![set(&["code", "math"])];
        assert_eq!(recall_at_k(&gold, &[list(&["code", "math"])], 2).unwrap(), 1.0);
        assert_eq!(recall_at_k(&gold, &[list(&["code", "kgquery"])], 2).unwrap(), 0.5);
        let two = vec![set(&["code", "math"]), set(&["code", "math"])];
        let r = recall_at_k(&two, &[list(&["code", "math"]), list(&["code", "kgquery"])], 2).unwrap();
        assert_eq!(r, 0.75);
        assert_eq!(recall_at_k(&[set(&[])], &[list(&[])], 1), Err(EvalError::EmptyGoldSet(0)));
    }

    #[test]
    fn ndcg_examples() {
        assert!((ndcg(&[1.0, 1.0, 0.0], 3) - 1.0).abs() < 1e-12);
        let hand_dcg = 1.0 + 1.0 / 4f64.log2();
        let hand_idcg = 1.0 + 1.0 / 3f64.log2();
        let v = ndcg(&[1.0, 0.0, 1.0], 3);
        assert!((v - hand_dcg / hand_idcg).abs() < 1e-12);
        assert!((v - 0.9197).abs() < 1e-4);
        assert_eq!(ndcg(&[0.0, 0.0], 2), 0.0);
    }

    #[test]
    fn comp_examples() {
        let g = vec![set(&["code"]), set(&["code", "math"]), set(&["math"]), set(&["search"])];
        let r = vec![
            list(&["code", "math"]),
            list(&["code", "kgquery"]),
            list(&["math"]),
            list(&["search", "code"]),
        ];
        assert_eq!(comp_at_k(&g, &r, 2).unwrap(), 0.75);
    }

    #[test]
    fn calling_examples() {
        let rep = |req, ok| ValidationReport { required_total: req, required_consistent: ok, ..Default::default() };
        let m = tool_calling_metrics(&[rep(2, 2), rep(2, 1)], &[], 0, 0);
        assert_eq!(m.cons, Some(0.75));
        assert_eq!(m.pe, None);
        assert_eq!(m.eh, None);
        let p: BTreeMap<String, serde_json::Value> =
            [("expression".to_string(), serde_json::json!("1 + 1"))].into();
        let g: BTreeMap<String, serde_json::Value> =
            [("expression".to_string(), serde_json::json!(" 1 +  1"))].into();
        let m = tool_calling_metrics(&[], &[(p, g)], 20, 20);
        assert_eq!(m.pe, Some(1.0));
        assert_eq!(m.eh, Some(1.0));
    }

    #[test]
    fn bleu_examples() {
        assert!((bleu("the cat sat", "the cat sat", 4) - 1.0).abs() < 1e-12);
        let v = bleu("the cat sat", "the cat sat on the mat", 2);
        assert!((v - (-1f64).exp()).abs() < 1e-12);
        assert!((v - 0.3679).abs() < 1e-4);
        assert_eq!(bleu("dog", "the cat", 4), 0.0);
        assert_eq!(bleu("", "the cat", 4), 0.0);
    }

    #[test]
    fn rouge_examples() {
        assert!((rouge_l("a b c", "a b c", 1.0) - 1.0).abs() < 1e-12);
        let v = rouge_l("a b c d", "a c d", 1.0);
        assert!((v - 2.0 * 0.75 / 1.75).abs() < 1e-12);
        assert!((v - 0.8571).abs() < 1e-4);
        assert_eq!(rouge_l("x y", "a b", 1.0), 0.0);
    }

    #[test]
    fn em_examples() {
        let a = list(&["1", "2", "3", "4"]);
        assert_eq!(exact_match(&a, &a).unwrap(), 1.0);
        assert_eq!(exact_match(&a, &list(&["1", "2", "x", "y"])).unwrap(), 0.5);
        assert_eq!(exact_match(&list(&["42 "]), &list(&["42"])).unwrap(), 1.0);
        assert!(exact_match(&a, &list(&["1"])).is_err());
    }
}
