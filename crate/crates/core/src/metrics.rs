//! Graded IR evaluation over runs and qrels, and per-grade score summaries.
//!
//! Rankings sort by descending score with ties broken by ascending passage id, so every
//! metric is a function of `(scores, ids)` alone. Aggregates are computed over query ids in
//! sorted order.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::encoder::{encode_text, similarity, EncoderParams};
use crate::error::{Error, Result};
use crate::ranking::{Passage, Qrels, Query};

/// Per-query ranked passages, each list sorted by the tie rule.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRanking {
    per_query: BTreeMap<String, Vec<(String, f64)>>,
}

fn sort_ranked(list: &mut [(String, f64)]) {
    list.sort_by(|(ia, sa), (ib, sb)| sb.total_cmp(sa).then_with(|| ia.cmp(ib)));
}

impl RunRanking {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets a query's ranking from unordered `(passage id, score)` pairs.
    pub fn insert(&mut self, query_id: &str, mut scored: Vec<(String, f64)>) -> Result<()> {
        let mut seen = HashSet::new();
        for (id, score) in &scored {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate passage {id:?} in ranking for query {query_id:?}"
                )));
            }
            if score.is_nan() {
                return Err(Error::NonFinite(format!("score of {id:?} for {query_id:?}")));
            }
        }
        sort_ranked(&mut scored);
        self.per_query.insert(query_id.to_string(), scored);
        Ok(())
    }

    pub fn query(&self, query_id: &str) -> Option<&[(String, f64)]> {
        self.per_query.get(query_id).map(Vec::as_slice)
    }

    pub fn queries(&self) -> impl Iterator<Item = (&str, &[(String, f64)])> {
        self.per_query.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.per_query.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_query.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// `2^rel - 1`
    #[default]
    Exponential,
    /// `rel`
    Linear,
}

impl Gain {
    pub fn apply(self, grade: u32) -> f64 {
        match self {
            Gain::Exponential => f64::from(grade).exp2() - 1.0,
            Gain::Linear => f64::from(grade),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gain::Exponential => "exponential",
            Gain::Linear => "linear",
        }
    }
}

/// Default minimum grade counted as relevant by MRR and Recall.
pub const DEFAULT_RELEVANCE_THRESHOLD: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub k: usize,
    pub params: BTreeMap<String, Value>,
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
    pub skipped: usize,
}

impl MetricReport {
    fn build(metric: &str, k: usize, params: BTreeMap<String, Value>, per_query: BTreeMap<String, f64>, skipped: usize) -> Self {
        let mean = if per_query.is_empty() {
            0.0
        } else {
            per_query.values().sum::<f64>() / per_query.len() as f64
        };
        Self {
            metric: metric.to_string(),
            k,
            params,
            per_query,
            mean,
            skipped,
        }
    }

    /// `metric@k`, e.g. `ndcg@10`.
    pub fn label(&self) -> String {
        format!("{}@{}", self.metric, self.k)
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("cutoff k must be ≥ 1"));
    }
    Ok(())
}

/// Runs `per_query` over every run query that has judgments. `None` marks a skipped query.
fn evaluate(
    run: &RunRanking,
    qrels: &Qrels,
    mut per_query: impl FnMut(&[(String, f64)], &BTreeMap<String, u32>) -> Option<f64>,
) -> (BTreeMap<String, f64>, usize) {
    let mut values = BTreeMap::new();
    let mut skipped = 0;
    for (qid, ranking) in run.queries() {
        match qrels.query(qid).and_then(|judged| per_query(ranking, judged)) {
            Some(v) => {
                values.insert(qid.to_string(), v);
            }
            None => skipped += 1,
        }
    }
    (values, skipped)
}

fn missing_from_run(run: &RunRanking, qrels: &Qrels) -> usize {
    qrels.queries().filter(|(q, _)| run.query(q).is_none()).count()
}

pub fn dcg(grades: impl IntoIterator<Item = u32>, gain: Gain) -> f64 {
    grades
        .into_iter()
        .enumerate()
        .map(|(r, g)| gain.apply(g) / ((r + 2) as f64).log2())
        .sum()
}

pub fn ndcg_at_k(run: &RunRanking, qrels: &Qrels, k: usize, gain: Gain) -> Result<MetricReport> {
    check_k(k)?;
    let (per_query, skipped) = evaluate(run, qrels, |ranking, judged| {
        let mut ideal: Vec<u32> = judged.values().copied().collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let idcg = dcg(ideal.into_iter().take(k), gain);
        if idcg <= 0.0 {
            return None;
        }
        let got = ranking
            .iter()
            .take(k)
            .map(|(id, _)| judged.get(id).copied().unwrap_or(0));
        Some(dcg(got, gain) / idcg)
    });
    let mut params = BTreeMap::new();
    params.insert("gain".into(), Value::from(gain.name()));
    params.insert("missing_from_run".into(), Value::from(missing_from_run(run, qrels)));
    Ok(MetricReport::build("ndcg", k, params, per_query, skipped))
}

fn threshold_params(run: &RunRanking, qrels: &Qrels, threshold: u32) -> BTreeMap<String, Value> {
    let mut params = BTreeMap::new();
    params.insert("threshold".into(), Value::from(threshold));
    params.insert("missing_from_run".into(), Value::from(missing_from_run(run, qrels)));
    params
}

fn check_threshold(threshold: u32) -> Result<()> {
    if threshold == 0 {
        return Err(Error::invalid("relevance threshold must be ≥ 1"));
    }
    Ok(())
}

pub fn mrr_at_k(run: &RunRanking, qrels: &Qrels, k: usize, threshold: u32) -> Result<MetricReport> {
    check_k(k)?;
    check_threshold(threshold)?;
    let (per_query, skipped) = evaluate(run, qrels, |ranking, judged| {
        if !judged.values().any(|&g| g >= threshold) {
            return None;
        }
        let first = ranking
            .iter()
            .take(k)
            .position(|(id, _)| judged.get(id).is_some_and(|&g| g >= threshold));
        Some(first.map_or(0.0, |r| 1.0 / (r + 1) as f64))
    });
    Ok(MetricReport::build("mrr", k, threshold_params(run, qrels, threshold), per_query, skipped))
}

pub fn recall_at_k(run: &RunRanking, qrels: &Qrels, k: usize, threshold: u32) -> Result<MetricReport> {
    check_k(k)?;
    check_threshold(threshold)?;
    let (per_query, skipped) = evaluate(run, qrels, |ranking, judged| {
        let relevant = judged.values().filter(|&&g| g >= threshold).count();
        if relevant == 0 {
            return None;
        }
        let found = ranking
            .iter()
            .take(k)
            .filter(|(id, _)| judged.get(id).is_some_and(|&g| g >= threshold))
            .count();
        Some(found as f64 / relevant as f64)
    });
    Ok(MetricReport::build("recall", k, threshold_params(run, qrels, threshold), per_query, skipped))
}

/// Drops every judgment with grade `excluded_grade`.
pub fn strict_filter(qrels: &Qrels, excluded_grade: u32) -> Qrels {
    let mut out = qrels.clone();
    out.retain(|g| g != excluded_grade);
    out
}

/// Scores every corpus passage for every query with the encoder.
pub fn rank_full(params: &EncoderParams, queries: &[Query], corpus: &[Passage]) -> Result<RunRanking> {
    if corpus.is_empty() {
        return Err(Error::invalid("corpus is empty"));
    }
    let passage_embeddings = corpus
        .iter()
        .map(|p| encode_text(params, &p.text))
        .collect::<Result<Vec<_>>>()?;
    let mut run = RunRanking::new();
    for q in queries {
        let eq = encode_text(params, &q.text)?;
        let scored = corpus
            .iter()
            .zip(&passage_embeddings)
            .map(|(p, ep)| Ok((p.id.clone(), similarity(&eq, ep)?)))
            .collect::<Result<Vec<_>>>()?;
        run.insert(&q.id, scored)?;
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Quantile of sorted data by linear interpolation between order statistics at `q (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Summaries of similarity scores grouped by grade.
pub fn score_distribution_by_level(scores: &[(u8, f64)]) -> Result<BTreeMap<u8, LevelSummary>> {
    if scores.is_empty() {
        return Err(Error::invalid("no scores to summarise"));
    }
    let mut groups: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    for &(grade, s) in scores {
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("score {s} at grade {grade}")));
        }
        groups.entry(grade).or_default().push(s);
    }
    Ok(groups
        .into_iter()
        .map(|(grade, mut values)| {
            values.sort_by(f64::total_cmp);
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let summary = LevelSummary {
                count: values.len(),
                mean,
                std: var.sqrt(),
                min: values[0],
                q25: quantile_sorted(&values, 0.25),
                median: quantile_sorted(&values, 0.5),
                q75: quantile_sorted(&values, 0.75),
                max: values[values.len() - 1],
            };
            (grade, summary)
        })
        .collect())
}

/// Plain-text histogram per grade, with bins shared across grades.
pub fn render_histograms(scores: &[(u8, f64)], bins: usize, width: usize) -> String {
    let mut out = String::new();
    if scores.is_empty() || bins == 0 {
        return out;
    }
    let lo = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let hi = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut groups: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for &(grade, s) in scores {
        let bin = (((s - lo) / span) * bins as f64).floor() as usize;
        groups.entry(grade).or_insert_with(|| vec![0; bins])[bin.min(bins - 1)] += 1;
    }
    for (grade, counts) in groups.iter().rev() {
        let peak = counts.iter().copied().max().unwrap_or(0).max(1);
        let _ = writeln!(out, "grade {grade} (n={})", counts.iter().sum::<usize>());
        for (b, &c) in counts.iter().enumerate() {
            let left = lo + span * b as f64 / bins as f64;
            let bar = "#".repeat((c * width).div_ceil(peak));
            let _ = writeln!(out, "  {left:>10.4} | {bar} {c}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qrels(entries: &[(&str, &str, u32)]) -> Qrels {
        let mut q = Qrels::new();
        for (qid, d, g) in entries {
            q.insert(qid, d, *g).unwrap();
        }
        q
    }

    /// Builds a run whose descending-score order is exactly `order`.
    fn run_of(qid: &str, order: &[&str]) -> RunRanking {
        let mut run = RunRanking::new();
        let n = order.len() as f64;
        run.insert(qid, order.iter().enumerate().map(|(i, d)| (d.to_string(), n - i as f64)).collect())
            .unwrap();
        run
    }

    #[test]
    fn ndcg_worked_example() {
        let q = qrels(&[("q", "d1", 3), ("q", "d2", 1), ("q", "d3", 0)]);
        let r = ndcg_at_k(&run_of("q", &["d2", "d1", "d3"]), &q, 3, Gain::Exponential).unwrap();
        let dcg = 1.0 + 7.0 / 3f64.log2();
        let idcg = 7.0 + 1.0 / 3f64.log2();
        assert!((dcg - 5.41650).abs() < 1e-5);
        assert!((idcg - 7.63093).abs() < 1e-5);
        assert!((r.mean - dcg / idcg).abs() < 1e-15);
        assert!((r.mean - 0.709810).abs() < 5e-7);
    }

    #[test]
    fn ndcg_ideal_and_unjudged() {
        let q = qrels(&[("q", "d1", 3), ("q", "d2", 1), ("q", "d3", 0)]);
        assert_eq!(ndcg_at_k(&run_of("q", &["d1", "d2", "d3"]), &q, 3, Gain::Exponential).unwrap().mean, 1.0);
        assert_eq!(ndcg_at_k(&run_of("q", &["x", "y", "d1"]), &q, 2, Gain::Linear).unwrap().mean, 0.0);
    }

    #[test]
    fn ndcg_skips_unjudged_and_all_zero_queries() {
        let q = qrels(&[("a", "d1", 0), ("b", "d1", 2)]);
        let mut run = run_of("a", &["d1"]);
        run.insert("b", vec![("d1".into(), 1.0)]).unwrap();
        run.insert("c", vec![("d1".into(), 1.0)]).unwrap();
        let r = ndcg_at_k(&run, &q, 10, Gain::Exponential).unwrap();
        assert_eq!(r.skipped, 2);
        assert_eq!(r.per_query.len(), 1);
        assert_eq!(r.mean, 1.0);
    }

    #[test]
    fn mrr_examples() {
        let q = qrels(&[("q", "d1", 2), ("q", "d2", 0), ("q", "d3", 0)]);
        assert_eq!(mrr_at_k(&run_of("q", &["d2", "d3", "d1"]), &q, 10, 1).unwrap().mean, 1.0 / 3.0);
        assert_eq!(mrr_at_k(&run_of("q", &["d2", "d3", "d1"]), &q, 2, 1).unwrap().mean, 0.0);
        assert_eq!(mrr_at_k(&run_of("q", &["d1", "d3"]), &q, 2, 1).unwrap().mean, 1.0);
        assert_eq!(mrr_at_k(&run_of("q", &["d1", "d3"]), &q, 2, 3).unwrap().skipped, 1);
    }

    #[test]
    fn recall_examples() {
        let q = qrels(&[("q", "a", 1), ("q", "b", 2), ("q", "c", 3), ("q", "d", 1), ("q", "x", 0)]);
        assert_eq!(recall_at_k(&run_of("q", &["a", "x", "b", "c", "d"]), &q, 3, 1).unwrap().mean, 0.5);
        assert_eq!(recall_at_k(&run_of("q", &["a", "b", "c", "d"]), &q, 4, 1).unwrap().mean, 1.0);
        let run = run_of("q", &["a", "x", "b"]);
        assert_eq!(
            recall_at_k(&run, &q, 100, 1).unwrap().mean,
            recall_at_k(&run, &q, 3, 1).unwrap().mean
        );
    }

    #[test]
    fn metric_argument_checks() {
        let q = qrels(&[("q", "a", 1)]);
        let run = run_of("q", &["a"]);
        assert!(ndcg_at_k(&run, &q, 0, Gain::Exponential).is_err());
        assert!(mrr_at_k(&run, &q, 1, 0).is_err());
    }

    #[test]
    fn strict_filter_examples() {
        let q = qrels(&[("q", "d1", 3), ("q", "d2", 1), ("q", "d3", 0)]);
        assert_eq!(strict_filter(&q, 1), qrels(&[("q", "d1", 3), ("q", "d3", 0)]));
        let no_ones = qrels(&[("q", "d1", 3), ("q", "d3", 0)]);
        assert_eq!(strict_filter(&no_ones, 1), no_ones);
        assert!(strict_filter(&qrels(&[("q", "a", 1), ("r", "b", 1)]), 1).is_empty());
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let mut run = RunRanking::new();
        run.insert("q", vec![("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), 2.0)]).unwrap();
        let ids: Vec<&str> = run.query("q").unwrap().iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert!(run.insert("q", vec![("a".into(), 1.0), ("a".into(), 2.0)]).is_err());
    }

    #[test]
    fn rank_full_scores_and_sorts() {
        let params = EncoderParams::random(8, 4, false, 11).unwrap();
        let queries = vec![Query::new("q", "apple pie")];
        let corpus = vec![
            Passage::synthetic("p1", "apple"),
            Passage::synthetic("p2", "pie crust"),
            Passage::synthetic("p3", "apple pie recipe"),
        ];
        let run = rank_full(&params, &queries, &corpus).unwrap();
        let ranking = run.query("q").unwrap();
        assert_eq!(ranking.len(), 3);
        assert!(ranking.windows(2).all(|w| w[0].1 >= w[1].1));
        let eq = encode_text(&params, "apple pie").unwrap();
        for (id, s) in ranking {
            let p = corpus.iter().find(|p| &p.id == id).unwrap();
            assert_eq!(*s, similarity(&eq, &encode_text(&params, &p.text).unwrap()).unwrap());
        }
        assert!(rank_full(&params, &queries, &[]).is_err());

        let zero = EncoderParams::zeros(8, 4, false).unwrap();
        let run = rank_full(&zero, &queries, &corpus).unwrap();
        let ids: Vec<&str> = run.query("q").unwrap().iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
    }

    #[test]
    fn distribution_examples() {
        let same = score_distribution_by_level(&[(2, 0.5), (2, 0.5), (2, 0.5)]).unwrap();
        let s = same[&2];
        assert_eq!(s.std, 0.0);
        assert!([s.min, s.q25, s.median, s.q75, s.max].iter().all(|&v| v == 0.5));

        let two = score_distribution_by_level(&[(3, 1.0), (3, 1.0), (0, 0.0)]).unwrap();
        assert_eq!(two[&3].mean, 1.0);
        assert_eq!(two[&0].mean, 0.0);
        assert!(!two.contains_key(&1));
        assert!(score_distribution_by_level(&[]).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&[7.0], 0.75), 7.0);
    }

    #[test]
    fn histogram_lists_each_grade() {
        let text = render_histograms(&[(3, 1.0), (3, 0.9), (0, 0.0)], 4, 10);
        assert!(text.contains("grade 3 (n=2)"));
        assert!(text.contains("grade 0 (n=1)"));
    }
}
