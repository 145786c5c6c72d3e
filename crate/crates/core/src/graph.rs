//! Concept graph construction, semantic grouping, and edge weighting.
//!
//! The graph holds direct concepts parsed from subject-predicate-object
//! triples plus latent concepts added by semantic grouping. Relations are
//! undirected, at most one per concept pair, and carry a weight in [0, 1]
//! once [`assign_weights`] has run (1.0 sentinel before that).

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{DocId, SemanticIndex};
use crate::similarity::normalize_label;

/// Stable identifier of a concept inside one graph (index into the node list).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ConceptId(pub u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// One subject-predicate-object statement of domain knowledge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpoTriple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl SpoTriple {
    pub fn new(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        object: impl Into<String>,
    ) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }
}

/// Predicate that declares a child-parent hierarchy edge.
pub const PREDICATE_SUBCLASS: &str = "subclassof";
/// Predicate that attaches a free-text description to its subject.
pub const PREDICATE_DESCRIBES: &str = "describes";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConceptKind {
    /// Parsed from the domain triples.
    Direct,
    /// Logical node standing for a group of mutually similar direct concepts.
    Latent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub id: ConceptId,
    pub label: String,
    pub kind: ConceptKind,
    pub description: Option<String>,
    /// Direct members of a latent concept; empty for direct concepts.
    pub members: BTreeSet<ConceptId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelationKind {
    /// Hierarchical or generic domain link from the triples.
    Contextual,
    /// Direct link between two concepts whose proximity cleared the threshold.
    Semantic,
    /// Link from a latent concept to one of its members.
    Membership,
}

/// Undirected weighted edge; endpoints are stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub a: ConceptId,
    pub b: ConceptId,
    pub kind: RelationKind,
    pub weight: f64,
}

impl Relation {
    pub fn endpoints(&self) -> (ConceptId, ConceptId) {
        (self.a, self.b)
    }

    pub fn other(&self, id: ConceptId) -> ConceptId {
        if self.a == id {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("triple list is empty")]
    EmptyInput,
    #[error("malformed triple at row {row}: {reason}")]
    MalformedTriple { row: usize, reason: String },
    #[error("graph has no concepts; build it from triples first")]
    NotBuilt,
    #[error("unknown concept: {0}")]
    UnknownConcept(String),
    #[error("cannot read triples file: {0}")]
    UnreadableFile(String),
}

fn ordered(a: ConceptId, b: ConceptId) -> (ConceptId, ConceptId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// The weighted undirected semantic concept graph.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptGraph {
    concepts: Vec<Concept>,
    /// Normalized label → id, direct concepts only.
    labels: BTreeMap<String, ConceptId>,
    #[serde(with = "crate::serde_pairs")]
    relations: BTreeMap<(ConceptId, ConceptId), Relation>,
    /// Directed child→parent pairs from `subClassOf` triples. Relations are
    /// undirected, so the hierarchy direction must be kept separately for
    /// taxonomy building.
    subclass_edges: Vec<(String, String)>,
    weighted: bool,
}

impl ConceptGraph {
    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.iter()
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn latent_count(&self) -> usize {
        self.concepts
            .iter()
            .filter(|c| c.kind == ConceptKind::Latent)
            .count()
    }

    pub fn concept(&self, id: ConceptId) -> Option<&Concept> {
        self.concepts.get(id.index())
    }

    /// Looks up a direct concept by label (normalized before the lookup).
    pub fn id_of(&self, label: &str) -> Option<ConceptId> {
        self.labels.get(&normalize_label(label)).copied()
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        id.index() < self.concepts.len()
    }

    pub fn relation_between(&self, a: ConceptId, b: ConceptId) -> Option<&Relation> {
        self.relations.get(&ordered(a, b))
    }

    /// Neighbors of `id` with the connecting relation, in id order.
    pub fn neighbors(&self, id: ConceptId) -> Vec<(ConceptId, &Relation)> {
        let mut out = Vec::new();
        for rel in self.relations.values() {
            if rel.a == id {
                out.push((rel.b, rel));
            } else if rel.b == id {
                out.push((rel.a, rel));
            }
        }
        out.sort_by_key(|(n, _)| *n);
        out
    }

    /// Child→parent pairs of the hierarchy triples, for taxonomy building.
    pub fn subclass_pairs(&self) -> Vec<(String, String)> {
        self.subclass_edges.clone()
    }

    fn add_concept(&mut self, label: String, kind: ConceptKind) -> ConceptId {
        let id = ConceptId(self.concepts.len() as u32);
        if kind == ConceptKind::Direct {
            self.labels.insert(label.clone(), id);
        }
        self.concepts.push(Concept {
            id,
            label,
            kind,
            description: None,
            members: BTreeSet::new(),
        });
        id
    }

    fn intern_direct(&mut self, label: &str) -> ConceptId {
        match self.labels.get(label) {
            Some(id) => *id,
            None => self.add_concept(label.to_string(), ConceptKind::Direct),
        }
    }

    /// Inserts an edge unless the pair already has one (first one wins).
    fn add_relation(&mut self, a: ConceptId, b: ConceptId, kind: RelationKind, weight: f64) {
        if a == b {
            return;
        }
        let key = ordered(a, b);
        self.relations.entry(key).or_insert(Relation {
            a: key.0,
            b: key.1,
            kind,
            weight,
        });
    }

    /// Direct constructor for programmatic graphs (solver tests, benchmarks).
    ///
    /// Labels are normalized; edges get the given weights and the graph is
    /// marked weighted.
    pub fn from_weighted_edges(nodes: &[&str], edges: &[(&str, &str, f64)]) -> Self {
        let mut graph = ConceptGraph::default();
        for label in nodes {
            graph.intern_direct(&normalize_label(label));
        }
        for (a, b, w) in edges {
            let ia = graph.intern_direct(&normalize_label(a));
            let ib = graph.intern_direct(&normalize_label(b));
            graph.add_relation(ia, ib, RelationKind::Contextual, *w);
        }
        graph.weighted = true;
        graph
    }

    fn record_subclass(&mut self, child: String, parent: String) {
        self.subclass_edges.push((child, parent));
    }
}

/// Builds the unweighted bidirectional concept graph from domain triples.
///
/// One direct concept per distinct normalized subject/object label; one
/// contextual relation per `subClassOf` or generic triple; `describes`
/// triples set the subject's description instead of creating an object node.
pub fn build_concept_graph(triples: &[SpoTriple]) -> Result<ConceptGraph, GraphError> {
    if triples.is_empty() {
        return Err(GraphError::EmptyInput);
    }
    let mut graph = ConceptGraph::default();
    for (row, triple) in triples.iter().enumerate() {
        let subject = normalize_label(&triple.subject);
        if subject.is_empty() {
            return Err(GraphError::MalformedTriple {
                row,
                reason: "subject is empty".to_string(),
            });
        }
        let predicate = normalize_label(&triple.predicate);
        let sid = graph.intern_direct(&subject);
        if predicate == PREDICATE_DESCRIBES {
            let text = triple.object.trim().to_string();
            let concept = &mut graph.concepts[sid.index()];
            if concept.description.is_none() && !text.is_empty() {
                concept.description = Some(text);
            }
            continue;
        }
        let object = normalize_label(&triple.object);
        if object.is_empty() {
            return Err(GraphError::MalformedTriple {
                row,
                reason: "object is empty".to_string(),
            });
        }
        let oid = graph.intern_direct(&object);
        graph.add_relation(sid, oid, RelationKind::Contextual, 1.0);
        if predicate == PREDICATE_SUBCLASS {
            graph.record_subclass(subject, object);
        }
    }
    Ok(graph)
}

/// Loads triples from a CSV file with header `subject,predicate,object`.
pub fn load_triples_csv(path: &Path) -> Result<Vec<SpoTriple>, GraphError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| GraphError::UnreadableFile(format!("{}: {e}", path.display())))?;
    let mut triples = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| GraphError::UnreadableFile(format!("{}: {e}", path.display())))?;
        triples.push(SpoTriple::new(
            record.get(0).unwrap_or(""),
            record.get(1).unwrap_or(""),
            record.get(2).unwrap_or(""),
        ));
    }
    Ok(triples)
}

/// Adds latent concepts (medoid stars) and direct semantic relations.
///
/// For every direct concept `d`, the candidate star is `{d} ∪ {c :
/// proximity(c, d) > threshold}`. Stars of size ≥ 2 are emitted largest
/// first (ties by medoid label) unless they are a subset of an already
/// emitted star; each emitted star becomes a latent node joined to its
/// members by membership relations. Concept pairs above the threshold also
/// get a direct semantic relation when no relation exists yet. Existing
/// nodes and relations are never removed or modified.
///
/// Returns the ids of the latent concepts created.
pub fn compute_semantic_groups<F>(
    graph: &mut ConceptGraph,
    proximity: F,
    threshold: f64,
) -> Result<Vec<ConceptId>, GraphError>
where
    F: Fn(&Concept, &Concept) -> f64,
{
    if graph.is_empty() {
        return Err(GraphError::NotBuilt);
    }
    let direct: Vec<ConceptId> = graph
        .concepts()
        .filter(|c| c.kind == ConceptKind::Direct)
        .map(|c| c.id)
        .collect();

    let mut above: BTreeSet<(ConceptId, ConceptId)> = BTreeSet::new();
    let mut stars: Vec<(ConceptId, BTreeSet<ConceptId>)> = Vec::new();
    for &d in &direct {
        let mut star: BTreeSet<ConceptId> = BTreeSet::new();
        star.insert(d);
        for &c in &direct {
            if c == d {
                continue;
            }
            let score = proximity(graph.concept(c).unwrap(), graph.concept(d).unwrap());
            if score > threshold {
                star.insert(c);
                above.insert(ordered(c, d));
            }
        }
        if star.len() >= 2 {
            stars.push((d, star));
        }
    }

    // Largest stars first; ties by medoid label.
    stars.sort_by(|(da, sa), (db, sb)| {
        sb.len()
            .cmp(&sa.len())
            .then_with(|| graph.concept(*da).unwrap().label.cmp(&graph.concept(*db).unwrap().label))
    });

    let mut emitted: Vec<BTreeSet<ConceptId>> = Vec::new();
    let mut created = Vec::new();
    for (medoid, star) in stars {
        if emitted.iter().any(|prev| star.is_subset(prev)) {
            continue;
        }
        let label = format!("latent:{}", graph.concept(medoid).unwrap().label);
        let lid = graph.add_concept(label, ConceptKind::Latent);
        graph.concepts[lid.index()].members = star.clone();
        for &member in &star {
            graph.add_relation(lid, member, RelationKind::Membership, 1.0);
        }
        emitted.push(star);
        created.push(lid);
    }

    for (a, b) in above {
        graph.add_relation(a, b, RelationKind::Semantic, 1.0);
    }
    Ok(created)
}

/// The document set mapped to a concept; latent concepts take the union of
/// their members' sets. Concepts in the graph but absent from the index have
/// an empty domain.
pub fn concept_domain(
    graph: &ConceptGraph,
    index: &SemanticIndex,
    id: ConceptId,
) -> Result<BTreeSet<DocId>, GraphError> {
    let concept = graph
        .concept(id)
        .ok_or_else(|| GraphError::UnknownConcept(id.to_string()))?;
    match concept.kind {
        ConceptKind::Direct => Ok(index.docs_for(id).cloned().unwrap_or_default()),
        ConceptKind::Latent => {
            let mut union = BTreeSet::new();
            for &member in &concept.members {
                if let Some(docs) = index.docs_for(member) {
                    union.extend(docs.iter().cloned());
                }
            }
            Ok(union)
        }
    }
}

/// Jaccard similarity of two document sets; 0 when both sets are empty.
pub fn jaccard(s1: &BTreeSet<DocId>, s2: &BTreeSet<DocId>) -> f64 {
    let intersection = s1.intersection(s2).count();
    let union = s1.union(s2).count();
    if union == 0 {
        0.0
    } else {
        intersection as f64 / union as f64
    }
}

/// Edge score between two concepts: 1 − Jaccard of their document domains.
pub fn relation_score(
    graph: &ConceptGraph,
    index: &SemanticIndex,
    c1: ConceptId,
    c2: ConceptId,
) -> Result<f64, GraphError> {
    let d1 = concept_domain(graph, index, c1)?;
    let d2 = concept_domain(graph, index, c2)?;
    Ok(1.0 - jaccard(&d1, &d2))
}

/// Sets every relation's weight to the relation score of its endpoints and
/// marks the graph weighted. Idempotent.
pub fn assign_weights(graph: &mut ConceptGraph, index: &SemanticIndex) -> Result<(), GraphError> {
    if graph.is_empty() {
        return Err(GraphError::NotBuilt);
    }
    let mut domains: Vec<BTreeSet<DocId>> = Vec::with_capacity(graph.len());
    for concept in &graph.concepts {
        domains.push(concept_domain(graph, index, concept.id)?);
    }
    for rel in graph.relations.values_mut() {
        rel.weight = 1.0 - jaccard(&domains[rel.a.index()], &domains[rel.b.index()]);
    }
    graph.weighted = true;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::SemanticIndex;

    fn docs(ids: &[&str]) -> BTreeSet<DocId> {
        ids.iter().map(|s| DocId::new(*s)).collect()
    }

    fn agriculture_fixture() -> Vec<SpoTriple> {
        [
            ("cotton", "subClassOf", "crops"),
            ("silk", "subClassOf", "thread material"),
            ("wool", "subClassOf", "thread material"),
            ("jute", "subClassOf", "crops"),
            ("chilly", "subClassOf", "crops"),
            ("kharif", "subClassOf", "season"),
            ("rabi", "subClassOf", "season"),
            ("jute export", "subClassOf", "agriculture export"),
            ("chilly export", "subClassOf", "agriculture export"),
            ("jute export", "exportOf", "jute"),
            ("silk", "describes", "animal thread from silkworms"),
            ("agriculture transport", "subClassOf", "transport"),
        ]
        .iter()
        .map(|(s, p, o)| SpoTriple::new(*s, *p, *o))
        .collect()
    }

    #[test]
    fn minimal_triple_builds_two_concepts_one_edge() {
        let graph =
            build_concept_graph(&[SpoTriple::new("cotton", "subClassOf", "crops")]).unwrap();
        assert_eq!(graph.len(), 2);
        assert_eq!(graph.relation_count(), 1);
        let cotton = graph.id_of("cotton").unwrap();
        let crops = graph.id_of("crops").unwrap();
        let rel = graph.relation_between(cotton, crops).unwrap();
        assert_eq!(rel.kind, RelationKind::Contextual);
        assert_eq!(rel.weight, 1.0);
        assert!(!graph.is_weighted());
    }

    #[test]
    fn describes_triple_sets_description_without_a_node() {
        let graph =
            build_concept_graph(&[SpoTriple::new("silk", "describes", "animal-based thread")])
                .unwrap();
        assert_eq!(graph.len(), 1);
        assert_eq!(graph.relation_count(), 0);
        let silk = graph.concept(graph.id_of("silk").unwrap()).unwrap();
        assert_eq!(silk.description.as_deref(), Some("animal-based thread"));
    }

    #[test]
    fn agriculture_fixture_matches_hand_enumerated_adjacency() {
        let graph = build_concept_graph(&agriculture_fixture()).unwrap();
        // 15 distinct labels; "describes" adds no node, 11 edge-producing rows.
        assert_eq!(graph.len(), 15);
        assert_eq!(graph.relation_count(), 11);
        let adjacency: BTreeMap<&str, BTreeSet<&str>> = [
            ("crops", ["cotton", "jute", "chilly"].into()),
            ("thread material", ["silk", "wool"].into()),
            ("season", ["kharif", "rabi"].into()),
            (
                "agriculture export",
                ["jute export", "chilly export"].into(),
            ),
            ("jute", ["crops", "jute export"].into()),
            ("transport", ["agriculture transport"].into()),
        ]
        .into_iter()
        .collect();
        for (label, expected) in adjacency {
            let id = graph.id_of(label).unwrap();
            let actual: BTreeSet<&str> = graph
                .neighbors(id)
                .iter()
                .map(|(n, _)| graph.concept(*n).unwrap().label.as_str())
                .collect();
            assert_eq!(actual, expected, "neighbors of {label}");
        }
    }

    #[test]
    fn empty_input_and_blank_subject_are_rejected() {
        assert_eq!(build_concept_graph(&[]), Err(GraphError::EmptyInput));
        let err = build_concept_graph(&[SpoTriple::new("  ", "subClassOf", "x")]).unwrap_err();
        assert!(matches!(err, GraphError::MalformedTriple { row: 0, .. }));
    }

    #[test]
    fn duplicate_relations_keep_the_first() {
        let graph = build_concept_graph(&[
            SpoTriple::new("a", "subClassOf", "b"),
            SpoTriple::new("b", "relatedTo", "a"),
        ])
        .unwrap();
        assert_eq!(graph.relation_count(), 1);
        let a = graph.id_of("a").unwrap();
        let b = graph.id_of("b").unwrap();
        assert_eq!(
            graph.relation_between(a, b).unwrap().kind,
            RelationKind::Contextual
        );
    }

    #[test]
    fn labels_are_case_and_whitespace_normalized() {
        let graph = build_concept_graph(&[
            SpoTriple::new("Cotton ", "subClassOf", "  CROPS"),
            SpoTriple::new("cotton", "subClassOf", "Fiber  Crops"),
        ])
        .unwrap();
        assert_eq!(graph.len(), 3);
        assert!(graph.id_of("fiber crops").is_some());
    }

    fn table_proximity(
        pairs: &[(&str, &str, f64)],
    ) -> impl Fn(&Concept, &Concept) -> f64 + use<> {
        let table: BTreeMap<(String, String), f64> = pairs
            .iter()
            .flat_map(|(a, b, v)| {
                [
                    ((a.to_string(), b.to_string()), *v),
                    ((b.to_string(), a.to_string()), *v),
                ]
            })
            .collect();
        move |a: &Concept, b: &Concept| {
            table
                .get(&(a.label.clone(), b.label.clone()))
                .copied()
                .unwrap_or(0.0)
        }
    }

    #[test]
    fn no_pairs_above_threshold_adds_no_latent_concepts() {
        let mut graph = build_concept_graph(&agriculture_fixture()).unwrap();
        let created = compute_semantic_groups(&mut graph, |_, _| 0.1, 0.9).unwrap();
        assert!(created.is_empty());
        assert_eq!(graph.latent_count(), 0);
    }

    #[test]
    fn star_around_medoid_becomes_latent_node_with_membership_edges() {
        let mut graph = build_concept_graph(&[
            SpoTriple::new("silk", "subClassOf", "thread"),
            SpoTriple::new("wool", "subClassOf", "thread"),
            SpoTriple::new("nylon", "subClassOf", "thread"),
        ])
        .unwrap();
        // All three fibers sit above 0.9 around the medoid "thread".
        let proximity = table_proximity(&[
            ("silk", "thread", 0.95),
            ("wool", "thread", 0.93),
            ("nylon", "thread", 0.92),
        ]);
        let created = compute_semantic_groups(&mut graph, proximity, 0.9).unwrap();
        assert_eq!(created.len(), 1);
        let latent = graph.concept(created[0]).unwrap();
        assert_eq!(latent.kind, ConceptKind::Latent);
        assert_eq!(latent.members.len(), 4); // medoid + three fibers
        let membership_edges = graph
            .relations()
            .filter(|r| r.kind == RelationKind::Membership)
            .count();
        assert_eq!(membership_edges, 4);
    }

    #[test]
    fn silk_and_wool_group_under_their_own_latent_concept() {
        let mut graph = build_concept_graph(&[
            SpoTriple::new("silk", "subClassOf", "thread"),
            SpoTriple::new("wool", "subClassOf", "thread"),
            SpoTriple::new("cotton", "subClassOf", "thread"),
        ])
        .unwrap();
        let proximity = table_proximity(&[
            ("silk", "wool", 0.95),
            ("cotton", "thread", 0.93),
            ("silk", "thread", 0.5),
            ("wool", "thread", 0.5),
            ("silk", "cotton", 0.2),
            ("wool", "cotton", 0.2),
        ]);
        let created = compute_semantic_groups(&mut graph, proximity, 0.9).unwrap();
        assert_eq!(created.len(), 2);
        let silk = graph.id_of("silk").unwrap();
        let wool = graph.id_of("wool").unwrap();
        let animal_thread = graph
            .concepts()
            .find(|c| c.kind == ConceptKind::Latent && c.members.contains(&silk))
            .unwrap();
        assert_eq!(animal_thread.members, [silk, wool].into_iter().collect());
        assert_eq!(animal_thread.label, "latent:silk");
    }

    #[test]
    fn nested_star_is_deduplicated_by_subset_inclusion() {
        let mut graph = build_concept_graph(&[
            SpoTriple::new("silk", "subClassOf", "thread"),
            SpoTriple::new("wool", "subClassOf", "thread"),
        ])
        .unwrap();
        let proximity = table_proximity(&[
            ("silk", "wool", 0.95),
            ("silk", "thread", 0.95),
            ("wool", "thread", 0.95),
        ]);
        let created = compute_semantic_groups(&mut graph, proximity, 0.9).unwrap();
        // One 3-member star; the 3 pairwise stars are equal sets, kept once.
        assert_eq!(created.len(), 1);
        assert_eq!(graph.concept(created[0]).unwrap().members.len(), 3);
    }

    #[test]
    fn grouping_adds_semantic_edges_for_unlinked_pairs() {
        let mut graph = build_concept_graph(&[
            SpoTriple::new("silk", "subClassOf", "thread"),
            SpoTriple::new("wool", "subClassOf", "thread"),
        ])
        .unwrap();
        let proximity = table_proximity(&[("silk", "wool", 0.95)]);
        compute_semantic_groups(&mut graph, proximity, 0.9).unwrap();
        let silk = graph.id_of("silk").unwrap();
        let wool = graph.id_of("wool").unwrap();
        let rel = graph.relation_between(silk, wool).unwrap();
        assert_eq!(rel.kind, RelationKind::Semantic);
        // The contextual silk–thread edge is untouched.
        let thread = graph.id_of("thread").unwrap();
        assert_eq!(
            graph.relation_between(silk, thread).unwrap().kind,
            RelationKind::Contextual
        );
    }

    #[test]
    fn grouping_on_empty_graph_is_rejected() {
        let mut graph = ConceptGraph::default();
        assert_eq!(
            compute_semantic_groups(&mut graph, |_, _| 1.0, 0.9),
            Err(GraphError::NotBuilt)
        );
    }

    #[test]
    fn concept_domain_resolves_direct_and_latent_concepts() {
        let mut graph = build_concept_graph(&[
            SpoTriple::new("silk", "subClassOf", "thread"),
            SpoTriple::new("wool", "subClassOf", "thread"),
        ])
        .unwrap();
        let proximity = table_proximity(&[("silk", "wool", 0.95)]);
        let latent = compute_semantic_groups(&mut graph, proximity, 0.9).unwrap()[0];
        let silk = graph.id_of("silk").unwrap();
        let wool = graph.id_of("wool").unwrap();
        let thread = graph.id_of("thread").unwrap();

        let mut index = SemanticIndex::default();
        index.insert(silk, DocId::new("d1"));
        index.insert(wool, DocId::new("d2"));
        index.insert(wool, DocId::new("d3"));

        assert_eq!(
            concept_domain(&graph, &index, thread).unwrap(),
            BTreeSet::new()
        );
        assert_eq!(
            concept_domain(&graph, &index, silk).unwrap(),
            docs(&["d1"])
        );
        assert_eq!(
            concept_domain(&graph, &index, latent).unwrap(),
            docs(&["d1", "d2", "d3"])
        );
        assert!(matches!(
            concept_domain(&graph, &index, ConceptId(99)),
            Err(GraphError::UnknownConcept(_))
        ));
    }

    #[test]
    fn jaccard_matches_hand_computed_values() {
        let ab = docs(&["a", "b"]);
        let a = docs(&["a"]);
        let b = docs(&["b"]);
        let abc = docs(&["a", "b", "c"]);
        let bcd = docs(&["b", "c", "d"]);
        assert_eq!(jaccard(&ab, &ab), 1.0);
        assert_eq!(jaccard(&a, &b), 0.0);
        assert_eq!(jaccard(&abc, &bcd), 0.5);
        assert_eq!(jaccard(&BTreeSet::new(), &BTreeSet::new()), 0.0);
    }

    #[test]
    fn relation_score_is_one_minus_jaccard() {
        let graph = build_concept_graph(&[
            SpoTriple::new("a", "subClassOf", "b"),
            SpoTriple::new("c", "subClassOf", "b"),
        ])
        .unwrap();
        let a = graph.id_of("a").unwrap();
        let b = graph.id_of("b").unwrap();
        let c = graph.id_of("c").unwrap();
        let mut index = SemanticIndex::default();
        for d in ["x", "y", "z"] {
            index.insert(a, DocId::new(d));
        }
        for d in ["y", "z", "w"] {
            index.insert(b, DocId::new(d));
        }
        for d in ["x", "y", "z"] {
            index.insert(c, DocId::new(d));
        }
        assert_eq!(relation_score(&graph, &index, a, c).unwrap(), 0.0);
        assert_eq!(relation_score(&graph, &index, a, b).unwrap(), 0.5);
    }

    #[test]
    fn assign_weights_covers_identical_and_empty_domains() {
        let mut graph = build_concept_graph(&[
            SpoTriple::new("a", "subClassOf", "b"),
            SpoTriple::new("c", "subClassOf", "d"),
        ])
        .unwrap();
        let a = graph.id_of("a").unwrap();
        let b = graph.id_of("b").unwrap();
        let c = graph.id_of("c").unwrap();
        let d = graph.id_of("d").unwrap();
        let mut index = SemanticIndex::default();
        index.insert(a, DocId::new("d1"));
        index.insert(b, DocId::new("d1"));
        assign_weights(&mut graph, &index).unwrap();
        assert!(graph.is_weighted());
        // Identical nonempty domains → 0; both empty → 1 (J(∅,∅) = 0).
        assert_eq!(graph.relation_between(a, b).unwrap().weight, 0.0);
        assert_eq!(graph.relation_between(c, d).unwrap().weight, 1.0);
    }

    #[test]
    fn assign_weights_is_idempotent() {
        let mut graph = build_concept_graph(&agriculture_fixture()).unwrap();
        let jute = graph.id_of("jute").unwrap();
        let crops = graph.id_of("crops").unwrap();
        let mut index = SemanticIndex::default();
        index.insert(jute, DocId::new("d1"));
        index.insert(jute, DocId::new("d2"));
        index.insert(crops, DocId::new("d2"));
        assign_weights(&mut graph, &index).unwrap();
        let first = graph.clone();
        assign_weights(&mut graph, &index).unwrap();
        assert_eq!(graph, first);
        assert_eq!(
            graph.relation_between(jute, crops).unwrap().weight,
            0.5
        );
    }

    #[test]
    fn four_edge_fixture_weights_match_hand_table() {
        // Edges: a-b, b-c, c-d, d-a with hand-set domains.
        let mut graph = build_concept_graph(&[
            SpoTriple::new("a", "subClassOf", "b"),
            SpoTriple::new("b", "subClassOf", "c"),
            SpoTriple::new("c", "subClassOf", "d"),
            SpoTriple::new("d", "subClassOf", "a"),
        ])
        .unwrap();
        let ids: Vec<ConceptId> = ["a", "b", "c", "d"]
            .iter()
            .map(|l| graph.id_of(l).unwrap())
            .collect();
        let mut index = SemanticIndex::default();
        // a: {1,2}; b: {2,3}; c: {3}; d: {} (absent from index)
        index.insert(ids[0], DocId::new("1"));
        index.insert(ids[0], DocId::new("2"));
        index.insert(ids[1], DocId::new("2"));
        index.insert(ids[1], DocId::new("3"));
        index.insert(ids[2], DocId::new("3"));
        assign_weights(&mut graph, &index).unwrap();
        let weight =
            |x: usize, y: usize| graph.relation_between(ids[x], ids[y]).unwrap().weight;
        // a-b: J = 1/3; b-c: J = 1/2; c-d: J = 0; d-a: J = 0.
        assert!((weight(0, 1) - (1.0 - 1.0 / 3.0)).abs() < 1e-12);
        assert!((weight(1, 2) - 0.5).abs() < 1e-12);
        assert_eq!(weight(2, 3), 1.0);
        assert_eq!(weight(3, 0), 1.0);
    }

    #[test]
    fn grouping_only_adds_nodes_and_edges() {
        let mut graph = build_concept_graph(&agriculture_fixture()).unwrap();
        let nodes_before = graph.len();
        let edges_before: BTreeSet<(ConceptId, ConceptId)> =
            graph.relations().map(|r| r.endpoints()).collect();
        let proximity = table_proximity(&[("silk", "wool", 0.95), ("cotton", "jute", 0.92)]);
        compute_semantic_groups(&mut graph, proximity, 0.9).unwrap();
        assert!(graph.len() >= nodes_before);
        let edges_after: BTreeSet<(ConceptId, ConceptId)> =
            graph.relations().map(|r| r.endpoints()).collect();
        assert!(edges_before.is_subset(&edges_after));
    }
}
