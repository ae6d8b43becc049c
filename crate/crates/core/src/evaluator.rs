//! Recall@k, description-length binned error rates, and side-by-side report
//! tables. Recall is micro-averaged over mentions.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::MentionRecord;
use crate::matcher::{RetrievalResult, ViewSet};
use crate::{Error, Result};

pub const DEFAULT_KS: [usize; 8] = [1, 2, 4, 8, 16, 32, 50, 64];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub mentions: usize,
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
}

impl EvalReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.recall[i])
    }

    pub fn is_monotone(&self) -> bool {
        let mut pairs: Vec<_> = self.ks.iter().zip(&self.recall).collect();
        pairs.sort_by_key(|p| *p.0);
        pairs.windows(2).all(|w| w[0].1 <= w[1].1)
    }
}

/// Gold ranks (1-based, `None` when not retrieved), aligned with `mentions`.
fn gold_ranks(
    results: &[RetrievalResult],
    mentions: &[MentionRecord],
) -> Result<Vec<Option<usize>>> {
    if results.len() != mentions.len() {
        return Err(Error::InvalidArgument(format!(
            "{} retrieval results for {} mentions",
            results.len(),
            mentions.len()
        )));
    }
    let by_id: HashMap<&str, &RetrievalResult> =
        results.iter().map(|r| (r.mention_id.as_str(), r)).collect();
    mentions
        .iter()
        .map(|m| {
            by_id
                .get(m.mention_id.as_str())
                .map(|r| r.rank_of(&m.gold_entity_id))
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "no retrieval result for mention `{}`",
                        m.mention_id
                    ))
                })
        })
        .collect()
}

fn recall_from_ranks<'a>(
    ranks: impl Iterator<Item = &'a Option<usize>> + Clone,
    ks: &[usize],
) -> Vec<f64> {
    let n = ranks.clone().count();
    ks.iter()
        .map(|&k| {
            if n == 0 {
                return 0.0;
            }
            let hits = ranks
                .clone()
                .filter(|r| matches!(r, Some(rank) if *rank <= k))
                .count();
            hits as f64 / n as f64
        })
        .collect()
}

/// Fraction of mentions whose gold entity appears in the top `k`, per `k`.
pub fn recall_at_k(
    results: &[RetrievalResult],
    mentions: &[MentionRecord],
    ks: &[usize],
    label: impl Into<String>,
) -> Result<EvalReport> {
    let ranks = gold_ranks(results, mentions)?;
    Ok(EvalReport {
        label: label.into(),
        mentions: mentions.len(),
        ks: ks.to_vec(),
        recall: recall_from_ranks(ranks.iter(), ks),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBinRow {
    /// Inclusive lower bound on the gold entity's sentence count.
    pub lower: usize,
    /// Exclusive upper bound.
    pub upper: usize,
    pub mentions: usize,
    pub ks: Vec<usize>,
    /// `1 - recall@k` inside the bin, per `k`.
    pub error_rate: Vec<f64>,
}

/// Error rates grouped by the sentence count of each mention's gold entity,
/// in fixed-width bins. Empty bins are omitted.
pub fn length_binned_errors(
    results: &[RetrievalResult],
    mentions: &[MentionRecord],
    viewsets: &[ViewSet],
    ks: &[usize],
    bin_size: usize,
) -> Result<Vec<LengthBinRow>> {
    if bin_size == 0 {
        return Err(Error::InvalidArgument("bin_size must be >= 1".into()));
    }
    let ranks = gold_ranks(results, mentions)?;
    let lengths: HashMap<&str, usize> = viewsets
        .iter()
        .map(|v| (v.entity_id.as_str(), v.sentence_count))
        .collect();
    let mut bins: BTreeMap<usize, Vec<Option<usize>>> = BTreeMap::new();
    for (m, rank) in mentions.iter().zip(ranks) {
        let len = *lengths
            .get(m.gold_entity_id.as_str())
            .ok_or_else(|| Error::MissingViewSet(m.gold_entity_id.clone()))?;
        bins.entry(len / bin_size).or_default().push(rank);
    }
    Ok(bins
        .into_iter()
        .map(|(bin, ranks)| LengthBinRow {
            lower: bin * bin_size,
            upper: (bin + 1) * bin_size,
            mentions: ranks.len(),
            ks: ks.to_vec(),
            error_rate: recall_from_ranks(ranks.iter(), ks)
                .into_iter()
                .map(|r| 1.0 - r)
                .collect(),
        })
        .collect())
}

/// Aligned recall table, one column per report, with deltas against the
/// first report when there is more than one.
pub fn compare_configs(reports: &[EvalReport]) -> Result<String> {
    let base = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("no reports to compare".into()))?;
    if reports.iter().any(|r| r.ks != base.ks) {
        return Err(Error::InvalidArgument(
            "reports use different k lists".into(),
        ));
    }
    let width = reports
        .iter()
        .map(|r| r.label.len())
        .max()
        .unwrap_or(0)
        .max(8);
    let mut out = String::new();
    let _ = write!(out, "{:<6}", "k");
    for r in reports {
        let _ = write!(out, " {:>width$}", r.label);
    }
    for r in &reports[1..] {
        let _ = write!(out, " {:>width$}", format!("d({})", r.label));
    }
    out.push('\n');
    for (i, k) in base.ks.iter().enumerate() {
        let _ = write!(out, "{:<6}", format!("R@{k}"));
        for r in reports {
            let _ = write!(out, " {:>width$.4}", r.recall[i]);
        }
        for r in &reports[1..] {
            let _ = write!(out, " {:>+width$.4}", r.recall[i] - base.recall[i]);
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<6}", "n");
    for r in reports {
        let _ = write!(out, " {:>width$}", r.mentions);
    }
    out.push('\n');
    Ok(out)
}

/// Renders binned error rates as an aligned table.
pub fn render_bins(rows: &[LengthBinRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    let _ = write!(out, "{:<10} {:>8}", "sentences", "mentions");
    for k in &first.ks {
        let _ = write!(out, " {:>8}", format!("err@{k}"));
    }
    out.push('\n');
    for row in rows {
        let _ = write!(
            out,
            "{:<10} {:>8}",
            format!("{}-{}", row.lower, row.upper),
            row.mentions
        );
        for e in &row.error_rate {
            let _ = write!(out, " {:>8.4}", e);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenSequence;
    use crate::matcher::{Candidate, View};

    fn mention(id: &str, gold: &str) -> MentionRecord {
        MentionRecord {
            mention_id: id.into(),
            context_left: String::new(),
            mention: "x".into(),
            context_right: String::new(),
            gold_entity_id: gold.into(),
        }
    }

    fn result(id: &str, ranked: &[&str]) -> RetrievalResult {
        RetrievalResult {
            mention_id: id.into(),
            candidates: ranked
                .iter()
                .enumerate()
                .map(|(i, e)| Candidate {
                    entity_id: e.to_string(),
                    view_id: 0,
                    score: -(i as f64),
                })
                .collect(),
        }
    }

    fn viewset(id: &str, sentences: usize) -> ViewSet {
        ViewSet {
            entity_id: id.into(),
            title_tokens: TokenSequence::default(),
            sentence_count: sentences,
            basic_count: 1,
            views: vec![View::empty(0)],
        }
    }

    #[test]
    fn perfect_recall() {
        let ms = [mention("m1", "a"), mention("m2", "b")];
        let rs = [result("m1", &["a", "b"]), result("m2", &["b", "a"])];
        let r = recall_at_k(&rs, &ms, &DEFAULT_KS, "x").unwrap();
        assert!(r.recall.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn ranks_one_and_three() {
        let ms = [mention("m1", "a"), mention("m2", "c")];
        let rs = [
            result("m1", &["a", "b", "c"]),
            result("m2", &["a", "b", "c"]),
        ];
        let r = recall_at_k(&rs, &ms, &[1, 2, 4, 8], "x").unwrap();
        assert_eq!(r.recall_at(1), Some(0.5));
        assert_eq!(r.recall_at(2), Some(0.5));
        assert_eq!(r.recall_at(4), Some(1.0));
        assert!(r.is_monotone());
    }

    #[test]
    fn mismatch_is_error() {
        let ms = [mention("m1", "a")];
        assert!(recall_at_k(&[], &ms, &[1], "x").is_err());
        assert!(recall_at_k(&[result("m9", &["a"])], &ms, &[1], "x").is_err());
    }

    #[test]
    fn single_bin() {
        let ms = [mention("m1", "a"), mention("m2", "b")];
        let rs = [result("m1", &["a"]), result("m2", &["a", "b"])];
        let vs = [viewset("a", 3), viewset("b", 3)];
        let rows = length_binned_errors(&rs, &ms, &vs, &[1, 2], 5).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].lower, rows[0].upper, rows[0].mentions), (0, 5, 2));
        assert_eq!(rows[0].error_rate, vec![0.5, 0.0]);
    }

    #[test]
    fn bins_partition_mentions() {
        let ms = [mention("m1", "a"), mention("m2", "b"), mention("m3", "b")];
        let rs = [
            result("m1", &["a"]),
            result("m2", &["b"]),
            result("m3", &["b"]),
        ];
        let vs = [viewset("a", 2), viewset("b", 12)];
        let rows = length_binned_errors(&rs, &ms, &vs, &[1], 5).unwrap();
        assert_eq!(
            rows.iter()
                .map(|r| (r.lower, r.mentions))
                .collect::<Vec<_>>(),
            [(0, 1), (10, 2)]
        );
        assert!(rows.iter().all(|r| r.error_rate == vec![0.0]));
        assert!(length_binned_errors(&rs, &ms, &vs, &[1], 0).is_err());
    }

    fn report(label: &str, recall: &[f64]) -> EvalReport {
        EvalReport {
            label: label.into(),
            mentions: 4,
            ks: vec![1, 4],
            recall: recall.to_vec(),
        }
    }

    #[test]
    fn compare_tables() {
        let one = compare_configs(&[report("base", &[0.25, 0.5])]).unwrap();
        assert!(!one.contains("d("));
        let two = compare_configs(&[report("base", &[0.25, 0.5]), report("multi", &[0.25, 0.75])])
            .unwrap();
        assert!(two.contains("+0.2500"), "{two}");
        assert!(two.contains("+0.0000"));
        let same = compare_configs(&[report("a", &[0.5, 0.5]), report("b", &[0.5, 0.5])]).unwrap();
        assert_eq!(same.matches("+0.0000").count(), 2);
        let other = EvalReport {
            ks: vec![1],
            recall: vec![0.1],
            ..report("c", &[])
        };
        assert!(compare_configs(&[report("a", &[0.5, 0.5]), other]).is_err());
        assert!(compare_configs(&[]).is_err());
    }
}
