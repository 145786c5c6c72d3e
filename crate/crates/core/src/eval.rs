//! Retrieval scoring against expert reference solutions.
//!
//! Per query: a confusion matrix over the closed ingested corpus, with
//! precision, recall, accuracy, and F1 derived from it. Aggregates are
//! macro-averages in query-id order; the miss rate (type-2 error) and top-k
//! precision tables follow the same per-query-mean scheme. A built-in
//! exact-keyword baseline stands in for external keyword engines.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{CorpusRegistry, DocId};
use crate::similarity::content_words;

/// Ranked-retrieval depths reported by default.
pub const TOP_K_DEPTHS: [usize; 4] = [3, 5, 7, 10];

/// Recognized query-set labels.
pub const QUERY_SET_LABELS: [&str; 5] = ["QS1", "QS2", "QS3", "QS4", "QS5"];

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("every reference set is empty")]
    AllReferencesEmpty,
    #[error("query ids do not align: missing in reference {missing_in_reference:?}, missing in queries {missing_in_queries:?}")]
    IdMismatch {
        missing_in_reference: Vec<String>,
        missing_in_queries: Vec<String>,
    },
    #[error("invalid query set label '{0}' (expected QS1..QS5)")]
    InvalidSetLabel(String),
    #[error("cannot read {0}")]
    UnreadableFile(String),
}

/// Confusion counts for one query over a closed corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// TP/FP/FN against the reference, TN filled from the universe size.
pub fn confusion(
    reference: &BTreeSet<DocId>,
    retrieved: &BTreeSet<DocId>,
    universe: usize,
) -> Confusion {
    let tp = reference.intersection(retrieved).count();
    let fp = retrieved.difference(reference).count();
    let fn_ = reference.difference(retrieved).count();
    let tn = universe.saturating_sub(tp + fp + fn_);
    Confusion { tp, fp, fn_, tn }
}

/// Fractions in [0, 1]; degenerate denominators score zero except accuracy
/// over an empty universe.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
}

pub fn metrics(c: Confusion) -> Metrics {
    let precision = if c.tp + c.fp == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    let accuracy = if c.total() == 0 {
        0.0
    } else {
        (c.tp + c.tn) as f64 / c.total() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        precision,
        recall,
        accuracy,
        f1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Type2Error {
    /// Mean over queries of |reference \ retrieved| / |reference|, ×100.
    pub percent: f64,
    /// Queries skipped because their reference set was empty.
    pub excluded: usize,
}

pub fn type2_error(
    runs: &[(BTreeSet<DocId>, BTreeSet<DocId>)],
) -> Result<Type2Error, EvalError> {
    let mut total = 0.0;
    let mut counted = 0usize;
    let mut excluded = 0usize;
    for (reference, retrieved) in runs {
        if reference.is_empty() {
            excluded += 1;
            continue;
        }
        let missed = reference.difference(retrieved).count();
        total += missed as f64 / reference.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(EvalError::AllReferencesEmpty);
    }
    Ok(Type2Error {
        percent: 100.0 * total / counted as f64,
        excluded,
    })
}

/// Mean over queries of |top-k ∩ reference| / min(k, |ranked|), ×100;
/// queries with empty ranked lists contribute zero.
pub fn topk_analysis(runs: &[(BTreeSet<DocId>, Vec<DocId>)], k: usize) -> f64 {
    if runs.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (reference, ranked) in runs {
        if ranked.is_empty() {
            continue;
        }
        let depth = k.min(ranked.len());
        let hits = ranked[..depth]
            .iter()
            .filter(|d| reference.contains(d))
            .count();
        total += hits as f64 / depth as f64;
    }
    100.0 * total / runs.len() as f64
}

/// Exact-keyword strawman: documents whose metadata terms contain every
/// non-stopword query token verbatim.
pub fn keyword_baseline(
    query: &str,
    registry: &CorpusRegistry,
    stopwords: &BTreeSet<String>,
) -> BTreeSet<DocId> {
    let tokens = content_words(query, stopwords);
    if tokens.is_empty() {
        return BTreeSet::new();
    }
    registry
        .docs()
        .filter(|doc| {
            let terms = doc.terms(stopwords);
            tokens.iter().all(|t| terms.contains(t))
        })
        .map(|doc| doc.id.clone())
        .collect()
}

/// One row of the queries file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub id: String,
    pub query: String,
    pub geo: Option<String>,
    pub year: Option<u16>,
    pub set_label: String,
}

/// Loads `query_id,query,geo,year,set_label` rows.
pub fn load_queries_csv(path: &Path) -> Result<Vec<QuerySpec>, EvalError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| EvalError::UnreadableFile(format!("{}: {e}", path.display())))?;
    let mut queries = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| EvalError::UnreadableFile(format!("{}: {e}", path.display())))?;
        let get = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let set_label = get(4);
        if !QUERY_SET_LABELS.contains(&set_label.as_str()) {
            return Err(EvalError::InvalidSetLabel(set_label));
        }
        queries.push(QuerySpec {
            id: get(0),
            query: get(1),
            geo: Some(get(2)).filter(|g| !g.is_empty()),
            year: get(3).parse().ok(),
            set_label,
        });
    }
    Ok(queries)
}

/// Expert-selected relevant documents per query id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub entries: BTreeMap<String, (String, BTreeSet<DocId>)>,
}

/// Loads `query_id,query,doc_id` rows; a row with an empty doc_id declares a
/// query with an empty reference set.
pub fn load_reference_csv(path: &Path) -> Result<ReferenceSolution, EvalError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| EvalError::UnreadableFile(format!("{}: {e}", path.display())))?;
    let mut solution = ReferenceSolution::default();
    for record in reader.records() {
        let record =
            record.map_err(|e| EvalError::UnreadableFile(format!("{}: {e}", path.display())))?;
        let id = record.get(0).unwrap_or("").trim().to_string();
        let query = record.get(1).unwrap_or("").trim().to_string();
        let doc = record.get(2).unwrap_or("").trim().to_string();
        let entry = solution
            .entries
            .entry(id)
            .or_insert_with(|| (query, BTreeSet::new()));
        if !doc.is_empty() {
            entry.1.insert(DocId::new(doc));
        }
    }
    Ok(solution)
}

/// Errors when the two files carry different query-id sets.
pub fn check_id_alignment(
    queries: &[QuerySpec],
    reference: &ReferenceSolution,
) -> Result<(), EvalError> {
    let query_ids: BTreeSet<&String> = queries.iter().map(|q| &q.id).collect();
    let reference_ids: BTreeSet<&String> = reference.entries.keys().collect();
    let missing_in_reference: Vec<String> = query_ids
        .difference(&reference_ids)
        .map(|s| (*s).clone())
        .collect();
    let missing_in_queries: Vec<String> = reference_ids
        .difference(&query_ids)
        .map(|s| (*s).clone())
        .collect();
    if missing_in_reference.is_empty() && missing_in_queries.is_empty() {
        Ok(())
    } else {
        Err(EvalError::IdMismatch {
            missing_in_reference,
            missing_in_queries,
        })
    }
}

/// Half-up rounding to one decimal, matching the rendered tables.
pub fn round1(x: f64) -> f64 {
    (x * 10.0 + 0.5).floor() / 10.0
}

/// Percent-scale metrics for rendering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsPercent {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
}

impl MetricsPercent {
    pub fn from_fraction(m: Metrics) -> Self {
        MetricsPercent {
            precision: 100.0 * m.precision,
            recall: 100.0 * m.recall,
            accuracy: 100.0 * m.accuracy,
            f1: 100.0 * m.f1,
        }
    }
}

fn macro_average(per_query: &[Metrics]) -> MetricsPercent {
    if per_query.is_empty() {
        return MetricsPercent::default();
    }
    let n = per_query.len() as f64;
    MetricsPercent {
        precision: 100.0 * per_query.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: 100.0 * per_query.iter().map(|m| m.recall).sum::<f64>() / n,
        accuracy: 100.0 * per_query.iter().map(|m| m.accuracy).sum::<f64>() / n,
        f1: 100.0 * per_query.iter().map(|m| m.f1).sum::<f64>() / n,
    }
}

/// Scores for one query under one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub query_id: String,
    pub set_label: String,
    pub confusion: Confusion,
    pub metrics: Metrics,
    pub retrieved: usize,
}

/// Aggregated scores for one system over a query set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub per_query: Vec<QueryScore>,
    pub aggregate: MetricsPercent,
    pub type2: Option<Type2Error>,
    /// Top-k precision percentages keyed by the (string) depth.
    pub topk: BTreeMap<String, f64>,
}

impl SystemReport {
    /// Builds from per-query outcomes in query-id order.
    pub fn build(
        outcomes: &[(QuerySpec, BTreeSet<DocId>, Vec<DocId>)],
        reference: &ReferenceSolution,
        universe: usize,
    ) -> Self {
        let mut per_query = Vec::new();
        let mut fractions = Vec::new();
        let mut type2_runs = Vec::new();
        let mut topk_runs = Vec::new();
        for (spec, retrieved_set, ranked) in outcomes {
            let empty = (String::new(), BTreeSet::new());
            let (_, reference_set) = reference.entries.get(&spec.id).unwrap_or(&empty);
            let c = confusion(reference_set, retrieved_set, universe);
            let m = metrics(c);
            per_query.push(QueryScore {
                query_id: spec.id.clone(),
                set_label: spec.set_label.clone(),
                confusion: c,
                metrics: m,
                retrieved: retrieved_set.len(),
            });
            fractions.push(m);
            type2_runs.push((reference_set.clone(), retrieved_set.clone()));
            topk_runs.push((reference_set.clone(), ranked.clone()));
        }
        let topk = TOP_K_DEPTHS
            .iter()
            .map(|&k| (k.to_string(), topk_analysis(&topk_runs, k)))
            .collect();
        SystemReport {
            aggregate: macro_average(&fractions),
            type2: type2_error(&type2_runs).ok(),
            topk,
            per_query,
        }
    }

    /// Macro metrics restricted to one query-set label.
    pub fn set_aggregate(&self, set_label: &str) -> (MetricsPercent, usize) {
        let subset: Vec<Metrics> = self
            .per_query
            .iter()
            .filter(|q| q.set_label == set_label)
            .map(|q| q.metrics)
            .collect();
        (macro_average(&subset), subset.len())
    }
}

/// Side-by-side evaluation of the semantic system and the keyword baseline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub universe: usize,
    pub semdr: SystemReport,
    pub baseline: SystemReport,
}

impl EvalReport {
    pub fn set_labels(&self) -> BTreeSet<String> {
        self.semdr
            .per_query
            .iter()
            .map(|q| q.set_label.clone())
            .collect()
    }

    /// Aligned plain-text table: aggregate row, per-set rows, top-k rows.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let fmt = |v: f64| format!("{:.1}", round1(v));
        out.push_str(&format!(
            "{:<10} {:>6} {:>6} {:>6} {:>6}   {:>6} {:>6} {:>6} {:>6}\n",
            "set", "sP", "sR", "sA", "sF1", "bP", "bR", "bA", "bF1"
        ));
        let mut rows: Vec<(String, MetricsPercent, MetricsPercent)> = vec![(
            "ALL".to_string(),
            self.semdr.aggregate,
            self.baseline.aggregate,
        )];
        for label in self.set_labels() {
            let (s, _) = self.semdr.set_aggregate(&label);
            let (b, _) = self.baseline.set_aggregate(&label);
            rows.push((label, s, b));
        }
        for (label, s, b) in rows {
            out.push_str(&format!(
                "{:<10} {:>6} {:>6} {:>6} {:>6}   {:>6} {:>6} {:>6} {:>6}\n",
                label,
                fmt(s.precision),
                fmt(s.recall),
                fmt(s.accuracy),
                fmt(s.f1),
                fmt(b.precision),
                fmt(b.recall),
                fmt(b.accuracy),
                fmt(b.f1),
            ));
        }
        if let (Some(st), Some(bt)) = (&self.semdr.type2, &self.baseline.type2) {
            out.push_str(&format!(
                "{:<10} {:>6}   {:>6}   (excluded: {})\n",
                "type2",
                fmt(st.percent),
                fmt(bt.percent),
                st.excluded
            ));
        }
        for k in TOP_K_DEPTHS {
            let key = k.to_string();
            out.push_str(&format!(
                "{:<10} {:>6}   {:>6}\n",
                format!("top-{k}"),
                fmt(*self.semdr.topk.get(&key).unwrap_or(&0.0)),
                fmt(*self.baseline.topk.get(&key).unwrap_or(&0.0)),
            ));
        }
        out
    }

    /// Checks an assertion like `precision>=90` against the semantic
    /// system's aggregate percentages.
    pub fn check_assertion(&self, assertion: &str) -> Result<bool, String> {
        let (metric, op, value) = parse_assertion(assertion)?;
        let actual = match metric.as_str() {
            "precision" => self.semdr.aggregate.precision,
            "recall" => self.semdr.aggregate.recall,
            "accuracy" => self.semdr.aggregate.accuracy,
            "f1" => self.semdr.aggregate.f1,
            "type2" => self.semdr.type2.map(|t| t.percent).unwrap_or(f64::NAN),
            other => return Err(format!("unknown metric '{other}'")),
        };
        Ok(match op.as_str() {
            ">=" => actual >= value,
            "<=" => actual <= value,
            _ => unreachable!(),
        })
    }
}

fn parse_assertion(s: &str) -> Result<(String, String, f64), String> {
    for op in [">=", "<="] {
        if let Some((metric, value)) = s.split_once(op) {
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| format!("bad assertion value in '{s}'"))?;
            return Ok((metric.trim().to_lowercase(), op.to_string(), value));
        }
    }
    Err(format!("assertion '{s}' must use >= or <="))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(ids: &[&str]) -> BTreeSet<DocId> {
        ids.iter().map(|s| DocId::new(*s)).collect()
    }

    #[test]
    fn perfect_retrieval_confusion() {
        let c = confusion(&docs(&["d1", "d2"]), &docs(&["d1", "d2"]), 10);
        assert_eq!(
            c,
            Confusion {
                tp: 2,
                fp: 0,
                fn_: 0,
                tn: 8
            }
        );
        let m = metrics(c);
        assert_eq!((m.precision, m.recall, m.accuracy, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn partial_retrieval_confusion_matches_set_arithmetic() {
        let reference = docs(&["d1", "d2", "d3", "d4", "d5", "d6", "d7", "d8", "d9", "d10"]);
        let retrieved = docs(&["d1", "d2", "d3", "d4", "d5", "d6", "d7", "d8", "d9", "x"]);
        let c = confusion(&reference, &retrieved, 20);
        assert_eq!(
            c,
            Confusion {
                tp: 9,
                fp: 1,
                fn_: 1,
                tn: 9
            }
        );
        let m = metrics(c);
        assert!((m.precision - 0.9).abs() < 1e-12);
        assert!((m.recall - 0.9).abs() < 1e-12);
        assert!((m.accuracy - 0.9).abs() < 1e-12);
        assert!((m.f1 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_reference_and_retrieval_is_all_true_negative() {
        let c = confusion(&docs(&[]), &docs(&[]), 7);
        assert_eq!(
            c,
            Confusion {
                tp: 0,
                fp: 0,
                fn_: 0,
                tn: 7
            }
        );
        let m = metrics(c);
        assert_eq!((m.precision, m.recall, m.accuracy, m.f1), (0.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn type2_zero_when_everything_is_retrieved() {
        let runs = vec![
            (docs(&["a", "b"]), docs(&["a", "b", "c"])),
            (docs(&["d"]), docs(&["d"])),
        ];
        assert_eq!(type2_error(&runs).unwrap().percent, 0.0);
    }

    #[test]
    fn type2_single_query_misses_twenty_percent() {
        let reference = docs(&["1", "2", "3", "4", "5", "6", "7", "8", "9", "10"]);
        let retrieved = docs(&["1", "2", "3", "4", "5", "6", "7", "8"]);
        let t = type2_error(&[(reference, retrieved)]).unwrap();
        assert!((t.percent - 20.0).abs() < 1e-12);
    }

    #[test]
    fn type2_averages_per_query_errors() {
        // 20% and 40% miss rates average to 30%.
        let runs = vec![
            (docs(&["1", "2", "3", "4", "5"]), docs(&["1", "2", "3", "4"])),
            (docs(&["6", "7", "8", "9", "10"]), docs(&["6", "7", "8"])),
        ];
        let t = type2_error(&runs).unwrap();
        assert!((t.percent - 30.0).abs() < 1e-12);
    }

    #[test]
    fn type2_excludes_empty_references_and_errors_when_all_empty() {
        let runs = vec![
            (docs(&[]), docs(&["a"])),
            (docs(&["b"]), docs(&["b"])),
        ];
        let t = type2_error(&runs).unwrap();
        assert_eq!(t.excluded, 1);
        assert_eq!(t.percent, 0.0);
        assert_eq!(
            type2_error(&[(docs(&[]), docs(&[]))]),
            Err(EvalError::AllReferencesEmpty)
        );
    }

    fn ranked(ids: &[&str]) -> Vec<DocId> {
        ids.iter().map(|s| DocId::new(*s)).collect()
    }

    #[test]
    fn topk_fully_relevant_scores_hundred() {
        let runs = vec![(docs(&["a", "b", "c"]), ranked(&["a", "b", "c"]))];
        assert_eq!(topk_analysis(&runs, 3), 100.0);
    }

    #[test]
    fn topk_four_of_five_scores_eighty() {
        let runs = vec![(
            docs(&["a", "b", "c", "d"]),
            ranked(&["a", "b", "c", "d", "x"]),
        )];
        assert!((topk_analysis(&runs, 5) - 80.0).abs() < 1e-12);
    }

    #[test]
    fn topk_empty_ranked_list_scores_zero() {
        let runs = vec![(docs(&["a"]), ranked(&[]))];
        assert_eq!(topk_analysis(&runs, 5), 0.0);
    }

    #[test]
    fn round1_is_half_up() {
        assert_eq!(round1(11.85), 11.9);
        assert_eq!(round1(11.84), 11.8);
        assert_eq!(round1(90.0), 90.0);
    }

    #[test]
    fn assertion_parsing_and_checking() {
        let mut report = EvalReport::default();
        report.semdr.aggregate.precision = 72.5;
        assert!(report.check_assertion("precision>=70").unwrap());
        assert!(!report.check_assertion("precision>=80").unwrap());
        assert!(report.check_assertion("precision<=80").unwrap());
        assert!(report.check_assertion("nonsense>100").is_err());
    }

    #[test]
    fn report_round_trips_through_json() {
        let mut report = EvalReport {
            universe: 40,
            ..EvalReport::default()
        };
        report.semdr.aggregate.precision = 10.0 / 3.0;
        report.semdr.topk.insert("3".into(), 200.0 / 3.0);
        report.semdr.per_query.push(QueryScore {
            query_id: "q1".into(),
            set_label: "QS1".into(),
            confusion: Confusion {
                tp: 1,
                fp: 2,
                fn_: 3,
                tn: 4,
            },
            metrics: metrics(Confusion {
                tp: 1,
                fp: 2,
                fn_: 3,
                tn: 4,
            }),
            retrieved: 3,
        });
        let json = serde_json::to_string(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    fn registry_with(words_by_doc: &[(&str, &[&str])]) -> crate::index::CorpusRegistry {
        use crate::index::{DocumentMetadata, SourceKind};
        let mut registry = crate::index::CorpusRegistry::default();
        for (id, words) in words_by_doc {
            registry.insert(DocumentMetadata {
                id: DocId::new(*id),
                kind: SourceKind::Unstructured,
                path: format!("{id}.txt").into(),
                attributes: Vec::new(),
                value_domains: std::collections::BTreeMap::new(),
                frequent_words: words.iter().map(|w| (w.to_string(), 1)).collect(),
                description: String::new(),
                geo: None,
                year: None,
            });
        }
        registry
    }

    #[test]
    fn baseline_finds_verbatim_tokens_only() {
        let stop = crate::similarity::default_stopwords();
        let registry = registry_with(&[
            ("d1", &["jute", "export", "tonnage"]),
            ("d2", &["jute", "sacks"]),
            ("d3", &["cotton", "export"]),
        ]);
        // Single token present in one document only.
        assert_eq!(
            keyword_baseline("tonnage", &registry, &stop),
            docs(&["d1"])
        );
        // Two-token query intersects the per-token matches.
        assert_eq!(
            keyword_baseline("jute export", &registry, &stop),
            docs(&["d1"])
        );
        // Indirect phrasing with no verbatim hit retrieves nothing.
        assert_eq!(
            keyword_baseline("fiber shipments", &registry, &stop),
            docs(&[])
        );
    }

    #[test]
    fn reference_rows_with_empty_doc_ids_declare_empty_sets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reference.csv");
        std::fs::write(
            &path,
            "query_id,query,doc_id\nq1,silk,d16\nq1,silk,d17\nq2,education facilities,\n",
        )
        .unwrap();
        let reference = load_reference_csv(&path).unwrap();
        assert_eq!(reference.entries["q1"].1.len(), 2);
        assert!(reference.entries["q2"].1.is_empty());

        let queries_path = dir.path().join("queries.csv");
        std::fs::write(
            &queries_path,
            "query_id,query,geo,year,set_label\nq1,silk,,,QS1\nq2,education facilities,,2016,QS4\n",
        )
        .unwrap();
        let queries = load_queries_csv(&queries_path).unwrap();
        assert_eq!(queries.len(), 2);
        assert_eq!(queries[1].year, Some(2016));
        assert!(check_id_alignment(&queries, &reference).is_ok());
    }

    #[test]
    fn unknown_set_labels_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("queries.csv");
        std::fs::write(&path, "query_id,query,geo,year,set_label\nq1,silk,,,QS9\n").unwrap();
        assert_eq!(
            load_queries_csv(&path).unwrap_err(),
            EvalError::InvalidSetLabel("QS9".into())
        );
    }

    #[test]
    fn id_alignment_reports_orphans_on_both_sides() {
        let queries = vec![QuerySpec {
            id: "q1".into(),
            query: "jute".into(),
            geo: None,
            year: None,
            set_label: "QS1".into(),
        }];
        let mut reference = ReferenceSolution::default();
        reference
            .entries
            .insert("q2".into(), ("silk".into(), BTreeSet::new()));
        let err = check_id_alignment(&queries, &reference).unwrap_err();
        assert_eq!(
            err,
            EvalError::IdMismatch {
                missing_in_reference: vec!["q1".into()],
                missing_in_queries: vec!["q2".into()],
            }
        );
    }
}
