//! End-to-end retrieval and the structured-document join.
//!
//! A query flows tokens → anchors → latent expansion → group Steiner tree →
//! relevant concepts → candidate documents → geo/time filters → ranking.
//! Documents indexed under every anchor concept outrank everything else
//! (two-tier sort), then the cumulative token-to-term score and finally the
//! doc id decide the order.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::{concept_domain, ConceptGraph, GraphError};
use crate::gst::{
    expand_to_latent, greedy_gst, identify_anchors, relevant_concepts, GroupSteinerTree,
    GstError, TerminalGroups,
};
use crate::index::{CorpusRegistry, DocId, SemanticIndex};
use crate::similarity::{
    normalize_label, tokenize, word_score, SimilarityError, Taxonomy, TokenList,
};

#[derive(Debug, Error, PartialEq)]
pub enum QueryError {
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gst(#[from] GstError),
    #[error("unknown location: {0}")]
    UnknownLocation(String),
    #[error("invalid geo ontology: {0}")]
    InvalidGeoOntology(String),
    #[error("no pair of structured documents satisfies a link condition")]
    NoLinkCondition,
    #[error("linked column values cannot be compared: {0}")]
    TypeMismatch(String),
    #[error("cannot read {0}")]
    UnreadableFile(String),
}

/// Administrative levels, coarsest first.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum GeoLevel {
    Country,
    State,
    District,
    Taluk,
    Village,
}

impl GeoLevel {
    fn parse(s: &str) -> Option<GeoLevel> {
        match s.to_lowercase().as_str() {
            "country" => Some(GeoLevel::Country),
            "state" => Some(GeoLevel::State),
            "district" => Some(GeoLevel::District),
            "taluk" => Some(GeoLevel::Taluk),
            "village" => Some(GeoLevel::Village),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoNode {
    pub level: GeoLevel,
    pub parent: Option<String>,
    pub neighbors: BTreeSet<String>,
}

/// Location hierarchy with same-level neighbor links, kept separate from the
/// domain taxonomy: geo lookups traverse parents and neighbors, never
/// semantic relatives.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeoOntology {
    nodes: BTreeMap<String, GeoNode>,
}

impl GeoOntology {
    /// Loads `name,level,parent,neighbors` rows (neighbors semicolon
    /// separated). Parents must exist and sit strictly above their children;
    /// neighbor links must stay on one level and are symmetrized.
    pub fn from_csv(path: &Path) -> Result<GeoOntology, QueryError> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| QueryError::UnreadableFile(format!("{}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record
                .map_err(|e| QueryError::UnreadableFile(format!("{}: {e}", path.display())))?;
            let get = |i: usize| record.get(i).unwrap_or("").trim().to_string();
            rows.push((get(0), get(1), get(2), get(3)));
        }
        Self::from_rows(rows)
    }

    fn from_rows(rows: Vec<(String, String, String, String)>) -> Result<GeoOntology, QueryError> {
        let mut onto = GeoOntology::default();
        for (name, level, parent, neighbors) in &rows {
            let name = normalize_label(name);
            let level = GeoLevel::parse(level)
                .ok_or_else(|| QueryError::InvalidGeoOntology(format!("level '{level}'")))?;
            let parent = Some(normalize_label(parent)).filter(|p| !p.is_empty());
            let neighbors = neighbors
                .split(';')
                .map(normalize_label)
                .filter(|n| !n.is_empty())
                .collect();
            onto.nodes.insert(
                name,
                GeoNode {
                    level,
                    parent,
                    neighbors,
                },
            );
        }
        // Validate hierarchy and symmetrize neighbor links.
        let snapshot = onto.nodes.clone();
        for (name, node) in &snapshot {
            if let Some(parent) = &node.parent {
                let parent_node = snapshot.get(parent).ok_or_else(|| {
                    QueryError::InvalidGeoOntology(format!("{name}: unknown parent {parent}"))
                })?;
                if parent_node.level >= node.level {
                    return Err(QueryError::InvalidGeoOntology(format!(
                        "{name}: parent {parent} is not above it"
                    )));
                }
            }
            for neighbor in &node.neighbors {
                let other = snapshot.get(neighbor).ok_or_else(|| {
                    QueryError::InvalidGeoOntology(format!("{name}: unknown neighbor {neighbor}"))
                })?;
                if other.level != node.level {
                    return Err(QueryError::InvalidGeoOntology(format!(
                        "{name}: neighbor {neighbor} is on a different level"
                    )));
                }
                onto.nodes
                    .get_mut(neighbor)
                    .unwrap()
                    .neighbors
                    .insert(name.clone());
            }
        }
        Ok(onto)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.nodes.contains_key(&normalize_label(label))
    }

    pub fn labels(&self) -> BTreeSet<String> {
        self.nodes.keys().cloned().collect()
    }

    pub fn parent(&self, label: &str) -> Option<&str> {
        self.nodes
            .get(&normalize_label(label))?
            .parent
            .as_deref()
    }

    pub fn neighbors(&self, label: &str) -> BTreeSet<String> {
        self.nodes
            .get(&normalize_label(label))
            .map(|n| n.neighbors.clone())
            .unwrap_or_default()
    }

    /// True when `label` equals `ancestor` or lies below it.
    pub fn is_self_or_descendant(&self, label: &str, ancestor: &str) -> bool {
        let ancestor = normalize_label(ancestor);
        let mut current = Some(normalize_label(label));
        while let Some(name) = current {
            if name == ancestor {
                return true;
            }
            current = self.nodes.get(&name).and_then(|n| n.parent.clone());
        }
        false
    }
}

/// Keeps documents tagged at or below the query location; when that leaves
/// nothing, expands once to the location's neighbors and parent.
pub fn geo_filter(
    docs: &[DocId],
    tag: &str,
    onto: &GeoOntology,
    registry: &CorpusRegistry,
) -> Result<Vec<DocId>, QueryError> {
    if !onto.contains(tag) {
        return Err(QueryError::UnknownLocation(tag.to_string()));
    }
    let doc_tag = |id: &DocId| registry.get(id).and_then(|m| m.geo.clone());
    let direct: Vec<DocId> = docs
        .iter()
        .filter(|id| {
            doc_tag(id).is_some_and(|t| onto.is_self_or_descendant(&t, tag))
        })
        .cloned()
        .collect();
    if !direct.is_empty() {
        return Ok(direct);
    }
    let mut expanded: BTreeSet<String> = onto.neighbors(tag);
    if let Some(parent) = onto.parent(tag) {
        expanded.insert(parent.to_string());
    }
    Ok(docs
        .iter()
        .filter(|id| {
            doc_tag(id).is_some_and(|t| {
                expanded
                    .iter()
                    .any(|base| onto.is_self_or_descendant(&t, base))
            })
        })
        .cloned()
        .collect())
}

/// One retrieved document with its rank inputs. Tier 0 means the document
/// belongs to every anchor concept's domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub id: DocId,
    pub score: f64,
    pub tier: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query: String,
    /// Labels of the relevant concepts, anchors first.
    pub concepts: Vec<String>,
    pub docs: Vec<RankedDoc>,
    pub groups: TerminalGroups,
    pub tree: Option<GroupSteinerTree>,
}

impl RetrievalResult {
    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty() && self.docs.is_empty()
    }

    /// Result JSON; the tree is included only when requested (`--explain`).
    pub fn to_json(&self, graph: &ConceptGraph, explain: bool) -> Value {
        let docs: Vec<Value> = self
            .docs
            .iter()
            .map(|d| json!({"id": d.id.as_str(), "score": d.score, "tier": d.tier}))
            .collect();
        let mut out = json!({
            "concepts": self.concepts,
            "docs": docs,
            "query": self.query,
        });
        if explain {
            let tree = match &self.tree {
                Some(tree) => tree.to_json(graph, &self.groups),
                None => Value::Null,
            };
            out.as_object_mut()
                .unwrap()
                .insert("tree".to_string(), tree);
        }
        out
    }
}

/// Everything a retrieval needs, borrowed from the engine state.
pub struct QueryContext<'a> {
    pub graph: &'a ConceptGraph,
    pub index: &'a SemanticIndex,
    pub registry: &'a CorpusRegistry,
    pub tax: &'a Taxonomy,
    pub geo: Option<&'a GeoOntology>,
    pub stopwords: &'a BTreeSet<String>,
    pub anchor_threshold: f64,
}

impl QueryContext<'_> {
    pub fn geo_labels(&self) -> BTreeSet<String> {
        self.geo.map(|g| g.labels()).unwrap_or_default()
    }
}

pub fn retrieve(ctx: &QueryContext, query: &str) -> Result<RetrievalResult, QueryError> {
    let tokens = tokenize(query, ctx.stopwords, &ctx.geo_labels())?;
    retrieve_tokens(ctx, query, tokens)
}

/// Retrieval over pre-parsed tokens, for callers that set geo/time tags
/// explicitly. A query that anchors nothing returns an empty result rather
/// than an error so callers can tell "no results" from a failure.
pub fn retrieve_tokens(
    ctx: &QueryContext,
    query: &str,
    tokens: TokenList,
) -> Result<RetrievalResult, QueryError> {
    let groups = identify_anchors(ctx.graph, ctx.tax, &tokens, ctx.anchor_threshold);
    let groups = expand_to_latent(ctx.graph, &groups);
    if groups.active().is_empty() {
        return Ok(RetrievalResult {
            query: query.to_string(),
            groups,
            ..RetrievalResult::default()
        });
    }
    let tree = greedy_gst(ctx.graph, &groups)?;
    let concepts = relevant_concepts(ctx.graph, &tree, &groups);

    let mut candidates: BTreeSet<DocId> = BTreeSet::new();
    for &concept in &concepts {
        candidates.extend(concept_domain(ctx.graph, ctx.index, concept)?);
    }

    // Documents shared by every anchor concept's domain form the top tier.
    let anchors = groups.anchors();
    let mut shared: Option<BTreeSet<DocId>> = None;
    for &anchor in &anchors {
        let domain = concept_domain(ctx.graph, ctx.index, anchor)?;
        shared = Some(match shared {
            None => domain,
            Some(prev) => prev.intersection(&domain).cloned().collect(),
        });
    }
    let shared = shared.unwrap_or_default();

    let mut kept: Vec<DocId> = candidates.into_iter().collect();
    if let Some(tag) = &tokens.geo {
        let onto = ctx
            .geo
            .ok_or_else(|| QueryError::UnknownLocation(tag.clone()))?;
        kept = geo_filter(&kept, tag, onto, ctx.registry)?;
    }
    if let Some(year) = tokens.year {
        kept.retain(|id| ctx.registry.get(id).is_some_and(|m| m.year == Some(year)));
    }

    let mut docs: Vec<RankedDoc> = kept
        .into_iter()
        .map(|id| {
            let score = cumulative_score(ctx, &tokens, &id);
            let tier = if shared.contains(&id) { 0 } else { 1 };
            RankedDoc { id, score, tier }
        })
        .collect();
    docs.sort_by(|a, b| {
        a.tier
            .cmp(&b.tier)
            .then_with(|| b.score.total_cmp(&a.score))
            .then_with(|| a.id.cmp(&b.id))
    });

    let concept_labels = concepts
        .iter()
        .map(|&c| ctx.graph.concept(c).unwrap().label.clone())
        .collect();
    Ok(RetrievalResult {
        query: query.to_string(),
        concepts: concept_labels,
        docs,
        groups,
        tree: Some(tree),
    })
}

/// Sum over query tokens of the best score against any document term.
fn cumulative_score(ctx: &QueryContext, tokens: &TokenList, id: &DocId) -> f64 {
    let Some(meta) = ctx.registry.get(id) else {
        return 0.0;
    };
    let terms = meta.terms(ctx.stopwords);
    tokens
        .tokens
        .iter()
        .map(|token| {
            terms
                .iter()
                .map(|term| word_score(token, term, ctx.tax))
                .max_by(f64::total_cmp)
                .unwrap_or(0.0)
        })
        .sum()
}

/// Inner-joined table with provenance of the link conditions used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JoinOutput {
    /// One line per join performed: `left.col = right.col (score s)`.
    pub provenance: Vec<String>,
    /// Qualified column names, `doc_id.column`.
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl JoinOutput {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for line in &self.provenance {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        let escape = |cell: &str| {
            if cell.contains(',') || cell.contains('"') || cell.contains('\n') {
                format!("\"{}\"", cell.replace('"', "\"\""))
            } else {
                cell.to_string()
            }
        };
        out.push_str(
            &self
                .header
                .iter()
                .map(|h| escape(h))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|c| escape(c)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

struct Table {
    /// (qualified name, unqualified name, distinct normalized values)
    columns: Vec<(String, String, BTreeSet<String>)>,
    rows: Vec<Vec<String>>,
}

fn read_table(registry: &CorpusRegistry, id: &DocId) -> Result<Table, QueryError> {
    let meta = registry
        .get(id)
        .ok_or_else(|| QueryError::UnreadableFile(id.to_string()))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(&meta.path)
        .map_err(|e| QueryError::UnreadableFile(format!("{}: {e}", meta.path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| QueryError::UnreadableFile(format!("{}: {e}", meta.path.display())))?
        .iter()
        .map(normalize_label)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record
            .map_err(|e| QueryError::UnreadableFile(format!("{}: {e}", meta.path.display())))?;
        let mut row: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
        row.resize(headers.len(), String::new());
        rows.push(row);
    }
    let columns = headers
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let values: BTreeSet<String> = rows
                .iter()
                .map(|r| normalize_label(&r[i]))
                .filter(|v| !v.is_empty())
                .collect();
            (format!("{id}.{name}"), name.clone(), values)
        })
        .collect();
    Ok(Table { columns, rows })
}

/// Joins retrieved structured documents in rank order.
///
/// Two columns link when their names score at least 0.9 and their value
/// domains overlap; each step inner-joins on the best-scoring linked pair
/// and chaining stops at the first document that links to nothing.
pub fn join_structured(
    ranked: &[DocId],
    registry: &CorpusRegistry,
    tax: &Taxonomy,
) -> Result<JoinOutput, QueryError> {
    use crate::index::SourceKind;
    let structured: Vec<&DocId> = ranked
        .iter()
        .filter(|id| {
            registry
                .get(id)
                .is_some_and(|m| m.kind == SourceKind::Structured)
        })
        .collect();
    if structured.len() < 2 {
        return Err(QueryError::NoLinkCondition);
    }

    let mut current = read_table(registry, structured[0])?;
    let mut provenance = Vec::new();
    for doc in &structured[1..] {
        let next = read_table(registry, doc)?;
        // Best link: highest name score, then column-name order.
        let mut best: Option<(f64, usize, usize)> = None;
        for (li, (_, lname, lvalues)) in current.columns.iter().enumerate() {
            for (ri, (_, rname, rvalues)) in next.columns.iter().enumerate() {
                let score = word_score(lname, rname, tax);
                if score < 0.9 {
                    continue;
                }
                if lvalues.intersection(rvalues).next().is_none() {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bs, bl, br)) => {
                        score > bs || (score == bs && (li, ri) < (bl, br))
                    }
                };
                if better {
                    best = Some((score, li, ri));
                }
            }
        }
        let Some((score, li, ri)) = best else {
            break;
        };
        provenance.push(format!(
            "{} = {} (score {:.3})",
            current.columns[li].0, next.columns[ri].0, score
        ));
        // Inner equijoin on normalized values.
        let mut right_by_value: BTreeMap<String, Vec<&Vec<String>>> = BTreeMap::new();
        for row in &next.rows {
            let key = normalize_label(row.get(ri).map(String::as_str).unwrap_or(""));
            if key.is_empty() {
                continue;
            }
            right_by_value.entry(key).or_default().push(row);
        }
        let mut joined_rows = Vec::new();
        for row in &current.rows {
            let Some(cell) = row.get(li) else {
                return Err(QueryError::TypeMismatch(format!(
                    "row in joined table lacks column {}",
                    current.columns[li].0
                )));
            };
            let key = normalize_label(cell);
            if let Some(matches) = right_by_value.get(&key) {
                for right in matches {
                    let mut combined = row.clone();
                    combined.extend(right.iter().cloned());
                    joined_rows.push(combined);
                }
            }
        }
        let mut columns = current.columns;
        columns.extend(next.columns);
        // Recompute live value sets over the joined rows.
        for (i, column) in columns.iter_mut().enumerate() {
            column.2 = joined_rows
                .iter()
                .map(|r| normalize_label(r.get(i).map(String::as_str).unwrap_or("")))
                .filter(|v| !v.is_empty())
                .collect();
        }
        current = Table {
            columns,
            rows: joined_rows,
        };
    }
    if provenance.is_empty() {
        return Err(QueryError::NoLinkCondition);
    }
    Ok(JoinOutput {
        provenance,
        header: current.columns.iter().map(|(q, _, _)| q.clone()).collect(),
        rows: current.rows,
    })
}
