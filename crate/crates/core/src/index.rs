//! Document metadata, static clustering, and the concept→document index.
//!
//! Documents keep their original files; only metadata is extracted: header
//! attributes and per-column value domains for CSV, frequent words for
//! text. A fixed-seed k-means over TF-IDF vectors supplies static generic
//! clusters; a concept and a document are linked in the semantic index when
//! they share a cluster and a metadata term scores above the map threshold
//! against the concept.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ConceptGraph, ConceptId, ConceptKind};
use crate::similarity::{content_words, normalize_label, semantic_score, Taxonomy};

/// Frequent words kept per unstructured document.
pub const FREQUENT_WORD_LIMIT: usize = 30;
/// Distinct values kept per structured column.
pub const VALUE_DOMAIN_LIMIT: usize = 1000;
/// Hard cap on the clustering vocabulary.
pub const VOCABULARY_LIMIT: usize = 20_000;
/// Terms kept per cluster centroid.
pub const TOP_TERMS_PER_CLUSTER: usize = 10;
const KMEANS_MAX_ITERATIONS: usize = 100;
const KMEANS_TOLERANCE: f64 = 1e-6;
const KMEANS_RESTARTS: usize = 8;

/// Identifier of an ingested document (the file stem).
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct DocId(pub String);

impl DocId {
    pub fn new(id: impl Into<String>) -> Self {
        DocId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("cannot read {0}")]
    UnreadableFile(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("document {0} is empty")]
    EmptyDocument(String),
    #[error("corpus directory {0} contains no documents")]
    EmptyCorpus(String),
    #[error("corpus has {docs} documents but {k} clusters were requested")]
    TooFewDocuments { docs: usize, k: usize },
    #[error("cluster model has not been fitted")]
    ModelMissing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    Structured,
    Unstructured,
}

/// Optional sidecar `<name>.meta.json` overriding extracted fields.
#[derive(Debug, Clone, Default, Deserialize)]
struct Sidecar {
    description: Option<String>,
    geo: Option<String>,
    year: Option<u16>,
}

/// Logical representation of one ingested document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentMetadata {
    pub id: DocId,
    pub kind: SourceKind,
    pub path: PathBuf,
    /// Column names; structured documents only.
    pub attributes: Vec<String>,
    /// Distinct normalized values per column, capped; structured only.
    pub value_domains: BTreeMap<String, BTreeSet<String>>,
    /// Ranked (word, count) list; unstructured only.
    pub frequent_words: Vec<(String, u32)>,
    pub description: String,
    pub geo: Option<String>,
    pub year: Option<u16>,
}

impl DocumentMetadata {
    /// All searchable metadata terms: frequent words, attribute words,
    /// value words, and description words.
    pub fn terms(&self, stopwords: &BTreeSet<String>) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self
            .frequent_words
            .iter()
            .map(|(w, _)| w.clone())
            .collect();
        for attribute in &self.attributes {
            out.extend(content_words(attribute, stopwords));
        }
        for values in self.value_domains.values() {
            for value in values {
                out.extend(content_words(value, stopwords));
            }
        }
        out.extend(content_words(&self.description, stopwords));
        out
    }

    /// Term counts feeding the clustering vectors: frequent words with their
    /// counts plus description and attribute words.
    fn clustering_counts(&self, stopwords: &BTreeSet<String>) -> BTreeMap<String, u32> {
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for (word, count) in &self.frequent_words {
            *counts.entry(word.clone()).or_default() += count;
        }
        for word in content_words(&self.description, stopwords) {
            *counts.entry(word).or_default() += 1;
        }
        for attribute in &self.attributes {
            for word in content_words(attribute, stopwords) {
                *counts.entry(word).or_default() += 1;
            }
        }
        counts
    }
}

/// Extracts metadata from a single document file.
///
/// `.csv` parses as structured (header row becomes the attributes), `.txt`
/// as unstructured (top frequent words); `hint` overrides the extension
/// mapping. A `<name>.meta.json` sidecar can set description, geo, and year.
pub fn extract_metadata(
    path: &Path,
    hint: Option<SourceKind>,
    stopwords: &BTreeSet<String>,
) -> Result<DocumentMetadata, IndexError> {
    let display = path.display().to_string();
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| IndexError::UnsupportedFormat(display.clone()))?;
    let extension = path
        .extension()
        .and_then(|s| s.to_str())
        .unwrap_or("")
        .to_lowercase();
    let kind = match hint {
        Some(kind) => kind,
        None => match extension.as_str() {
            "csv" => SourceKind::Structured,
            "txt" => SourceKind::Unstructured,
            _ => return Err(IndexError::UnsupportedFormat(display)),
        },
    };

    let mut meta = DocumentMetadata {
        id: DocId::new(stem),
        kind,
        path: path.to_path_buf(),
        attributes: Vec::new(),
        value_domains: BTreeMap::new(),
        frequent_words: Vec::new(),
        description: String::new(),
        geo: None,
        year: None,
    };

    match kind {
        SourceKind::Structured => {
            let mut reader = csv::Reader::from_path(path)
                .map_err(|e| IndexError::UnreadableFile(format!("{display}: {e}")))?;
            let headers = reader
                .headers()
                .map_err(|e| IndexError::UnreadableFile(format!("{display}: {e}")))?
                .clone();
            meta.attributes = headers
                .iter()
                .map(normalize_label)
                .filter(|h| !h.is_empty())
                .collect();
            if meta.attributes.is_empty() {
                return Err(IndexError::EmptyDocument(display));
            }
            for attribute in &meta.attributes {
                meta.value_domains.insert(attribute.clone(), BTreeSet::new());
            }
            for record in reader.records() {
                let record = record
                    .map_err(|e| IndexError::UnreadableFile(format!("{display}: {e}")))?;
                for (column, value) in meta.attributes.clone().iter().zip(record.iter()) {
                    let value = normalize_label(value);
                    if value.is_empty() {
                        continue;
                    }
                    let domain = meta.value_domains.get_mut(column).unwrap();
                    if domain.len() < VALUE_DOMAIN_LIMIT {
                        domain.insert(value);
                    }
                }
            }
        }
        SourceKind::Unstructured => {
            let text = fs::read_to_string(path)
                .map_err(|e| IndexError::UnreadableFile(format!("{display}: {e}")))?;
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for word in content_words(&text, stopwords) {
                *counts.entry(word).or_default() += 1;
            }
            if counts.is_empty() {
                return Err(IndexError::EmptyDocument(display));
            }
            let mut ranked: Vec<(String, u32)> = counts.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            ranked.truncate(FREQUENT_WORD_LIMIT);
            meta.frequent_words = ranked;
        }
    }

    let sidecar_path = path.with_extension("meta.json");
    if sidecar_path.exists() {
        let text = fs::read_to_string(&sidecar_path).map_err(|e| {
            IndexError::UnreadableFile(format!("{}: {e}", sidecar_path.display()))
        })?;
        let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| {
            IndexError::UnreadableFile(format!("{}: {e}", sidecar_path.display()))
        })?;
        if let Some(description) = sidecar.description {
            meta.description = description;
        }
        meta.geo = sidecar.geo.map(|g| normalize_label(&g));
        meta.year = sidecar.year;
    }
    Ok(meta)
}

/// All ingested documents, keyed by id. Re-ingesting an id replaces its
/// previous metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusRegistry {
    docs: BTreeMap<DocId, DocumentMetadata>,
}

impl CorpusRegistry {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &DocId) -> Option<&DocumentMetadata> {
        self.docs.get(id)
    }

    pub fn contains(&self, id: &DocId) -> bool {
        self.docs.contains_key(id)
    }

    pub fn docs(&self) -> impl Iterator<Item = &DocumentMetadata> {
        self.docs.values()
    }

    pub fn insert(&mut self, meta: DocumentMetadata) {
        self.docs.insert(meta.id.clone(), meta);
    }

    /// Ingests every `.csv`/`.txt` file in the directory (sorted order,
    /// `.meta.json` sidecars skipped). Errors when nothing was ingested.
    pub fn ingest_dir(
        &mut self,
        dir: &Path,
        stopwords: &BTreeSet<String>,
    ) -> Result<usize, IndexError> {
        let entries = fs::read_dir(dir)
            .map_err(|e| IndexError::UnreadableFile(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .filter(|p| !p.to_string_lossy().ends_with(".meta.json"))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(str::to_lowercase),
                    Some(ref ext) if ext == "csv" || ext == "txt"
                )
            })
            .collect();
        paths.sort();
        let mut count = 0;
        for path in paths {
            self.insert(extract_metadata(&path, None, stopwords)?);
            count += 1;
        }
        if count == 0 {
            return Err(IndexError::EmptyCorpus(dir.display().to_string()));
        }
        Ok(count)
    }
}

/// Deterministic splitmix64 stream; k-means seeding must not depend on an
/// external RNG implementation staying stable.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Frozen k-means model over TF-IDF vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub seed: u64,
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    centroids: Vec<Vec<f64>>,
    /// Ten highest-weight vocabulary terms per centroid.
    pub top_terms: Vec<Vec<String>>,
}

impl ClusterModel {
    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    /// TF-IDF vector of a document in the model's vocabulary space,
    /// L2-normalized. Terms outside the vocabulary are ignored.
    pub fn vectorize(
        &self,
        doc: &DocumentMetadata,
        stopwords: &BTreeSet<String>,
    ) -> Vec<f64> {
        let counts = doc.clustering_counts(stopwords);
        let total: u32 = counts.values().sum();
        let mut vector = vec![0.0; self.vocabulary.len()];
        if total == 0 {
            return vector;
        }
        for (term, count) in counts {
            if let Ok(i) = self.vocabulary.binary_search(&term) {
                vector[i] = (count as f64 / total as f64) * self.idf[i];
            }
        }
        normalize_vector(&mut vector);
        vector
    }

    /// Nearest centroid by Euclidean distance; ties go to the lower index.
    pub fn assign(&self, vector: &[f64]) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, centroid) in self.centroids.iter().enumerate() {
            let dist = squared_distance(vector, centroid);
            if dist < best_dist {
                best_dist = dist;
                best = i;
            }
        }
        best
    }

    pub fn assign_doc(&self, doc: &DocumentMetadata, stopwords: &BTreeSet<String>) -> usize {
        self.assign(&self.vectorize(doc, stopwords))
    }
}

fn normalize_vector(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(vector: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let dist = squared_distance(vector, centroid);
        if dist < best_dist {
            best_dist = dist;
            best = c;
        }
    }
    best
}

/// k-means++ seeding: first centroid uniform, the rest drawn proportionally
/// to the squared distance from the nearest centroid chosen so far.
fn kmeanspp_init(vectors: &[Vec<f64>], k: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    let mut chosen: Vec<usize> = vec![rng.below(vectors.len())];
    while chosen.len() < k {
        let weights: Vec<f64> = vectors
            .iter()
            .map(|v| {
                chosen
                    .iter()
                    .map(|&c| squared_distance(v, &vectors[c]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.unit() * total;
            let mut pick = 0;
            for (i, w) in weights.iter().enumerate() {
                target -= w;
                pick = i;
                if target <= 0.0 {
                    break;
                }
            }
            pick
        } else {
            rng.below(vectors.len())
        };
        chosen.push(next);
    }
    chosen.iter().map(|&i| vectors[i].clone()).collect()
}

/// Fits the static generic clusters: TF-IDF over frequent words,
/// descriptions, and attribute names, then seeded k-means (at most 100
/// iterations, centroid-movement tolerance 1e-6).
pub fn fit_clusters(
    corpus: &[&DocumentMetadata],
    k: usize,
    seed: u64,
    stopwords: &BTreeSet<String>,
) -> Result<ClusterModel, IndexError> {
    if corpus.len() < k {
        return Err(IndexError::TooFewDocuments {
            docs: corpus.len(),
            k,
        });
    }
    let counts: Vec<BTreeMap<String, u32>> = corpus
        .iter()
        .map(|doc| doc.clustering_counts(stopwords))
        .collect();

    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc_counts in &counts {
        for term in doc_counts.keys() {
            *df.entry(term.clone()).or_default() += 1;
        }
    }
    let mut vocabulary: Vec<String> = df.keys().cloned().collect();
    if vocabulary.len() > VOCABULARY_LIMIT {
        let mut ranked: Vec<&String> = df.keys().collect();
        ranked.sort_by(|a, b| df[*b].cmp(&df[*a]).then_with(|| a.cmp(b)));
        vocabulary = ranked.into_iter().take(VOCABULARY_LIMIT).cloned().collect();
        vocabulary.sort();
    }
    let n = corpus.len() as f64;
    let idf: Vec<f64> = vocabulary
        .iter()
        .map(|term| ((1.0 + n) / (1.0 + df[term] as f64)).ln() + 1.0)
        .collect();

    let vectors: Vec<Vec<f64>> = counts
        .iter()
        .map(|doc_counts| {
            let total: u32 = doc_counts.values().sum();
            let mut vector = vec![0.0; vocabulary.len()];
            if total > 0 {
                for (term, count) in doc_counts {
                    if let Ok(i) = vocabulary.binary_search(term) {
                        vector[i] = (*count as f64 / total as f64) * idf[i];
                    }
                }
            }
            normalize_vector(&mut vector);
            vector
        })
        .collect();

    // Seeded k-means++ restarts: every restart draws fresh centroids from
    // the same deterministic stream, runs Lloyd iterations to the movement
    // tolerance, and the restart with the lowest inertia wins (first on
    // ties).
    let mut rng = SplitMix64(seed);
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let mut centroids = kmeanspp_init(&vectors, k, &mut rng);
        let mut assignment = vec![0usize; corpus.len()];
        for _ in 0..KMEANS_MAX_ITERATIONS {
            for (i, vector) in vectors.iter().enumerate() {
                assignment[i] = nearest(vector, &centroids);
            }
            // A cluster that lost all members restarts at the document
            // farthest from its centroid.
            for cluster in 0..k {
                if assignment.contains(&cluster) {
                    continue;
                }
                let farthest = (0..corpus.len())
                    .max_by(|&a, &b| {
                        squared_distance(&vectors[a], &centroids[assignment[a]])
                            .total_cmp(&squared_distance(&vectors[b], &centroids[assignment[b]]))
                            .then_with(|| b.cmp(&a))
                    })
                    .unwrap();
                assignment[farthest] = cluster;
            }
            let mut movement: f64 = 0.0;
            for (cluster, centroid) in centroids.iter_mut().enumerate() {
                let members: Vec<usize> = (0..corpus.len())
                    .filter(|&i| assignment[i] == cluster)
                    .collect();
                let mut mean = vec![0.0; vocabulary.len()];
                for &i in &members {
                    for (slot, value) in mean.iter_mut().zip(&vectors[i]) {
                        *slot += value;
                    }
                }
                for slot in mean.iter_mut() {
                    *slot /= members.len() as f64;
                }
                movement = movement.max(squared_distance(&mean, centroid).sqrt());
                *centroid = mean;
            }
            if movement < KMEANS_TOLERANCE {
                break;
            }
        }
        let inertia: f64 = vectors
            .iter()
            .map(|v| squared_distance(v, &centroids[nearest(v, &centroids)]))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, centroids));
        }
    }
    let centroids = best.expect("at least one restart ran").1;

    let top_terms: Vec<Vec<String>> = centroids
        .iter()
        .map(|centroid| {
            let mut weighted: Vec<(f64, &String)> = centroid
                .iter()
                .zip(&vocabulary)
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, t)| (*w, t))
                .collect();
            weighted.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
            weighted
                .into_iter()
                .take(TOP_TERMS_PER_CLUSTER)
                .map(|(_, t)| t.clone())
                .collect()
        })
        .collect();

    Ok(ClusterModel {
        k,
        seed,
        vocabulary,
        idf,
        centroids,
        top_terms,
    })
}

/// Bidirectional concept↔document mapping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticIndex {
    #[serde(with = "crate::serde_pairs")]
    mapping: BTreeMap<ConceptId, BTreeSet<DocId>>,
    reverse: BTreeMap<DocId, BTreeSet<ConceptId>>,
}

impl SemanticIndex {
    pub fn insert(&mut self, concept: ConceptId, doc: DocId) {
        self.mapping
            .entry(concept)
            .or_default()
            .insert(doc.clone());
        self.reverse.entry(doc).or_default().insert(concept);
    }

    pub fn docs_for(&self, concept: ConceptId) -> Option<&BTreeSet<DocId>> {
        self.mapping.get(&concept)
    }

    pub fn concepts_for(&self, doc: &DocId) -> Option<&BTreeSet<ConceptId>> {
        self.reverse.get(doc)
    }

    pub fn remove_doc(&mut self, doc: &DocId) {
        if let Some(concepts) = self.reverse.remove(doc) {
            for concept in concepts {
                if let Some(docs) = self.mapping.get_mut(&concept) {
                    docs.remove(doc);
                    if docs.is_empty() {
                        self.mapping.remove(&concept);
                    }
                }
            }
        }
    }

    /// All (concept, doc) pairs in sorted order.
    pub fn pairs(&self) -> impl Iterator<Item = (ConceptId, &DocId)> {
        self.mapping
            .iter()
            .flat_map(|(&c, docs)| docs.iter().map(move |d| (c, d)))
    }

    pub fn pair_count(&self) -> usize {
        self.mapping.values().map(|d| d.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// Mapping and reverse mapping must mirror each other exactly.
    pub fn check_consistency(&self) -> Result<(), String> {
        for (concept, docs) in &self.mapping {
            for doc in docs {
                if !self
                    .reverse
                    .get(doc)
                    .is_some_and(|cs| cs.contains(concept))
                {
                    return Err(format!("missing reverse entry {concept} -> {doc}"));
                }
            }
        }
        for (doc, concepts) in &self.reverse {
            for concept in concepts {
                if !self
                    .mapping
                    .get(concept)
                    .is_some_and(|ds| ds.contains(doc))
                {
                    return Err(format!("missing forward entry {doc} -> {concept}"));
                }
            }
        }
        Ok(())
    }
}

/// Builds the semantic index by cluster-mediated mapping: each document goes
/// to its nearest centroid; each direct concept joins every cluster whose
/// top terms score above the threshold against it; a (concept, document)
/// pair is indexed when they share a cluster and some document term also
/// clears the threshold.
pub fn build_semantic_index(
    registry: &CorpusRegistry,
    graph: &ConceptGraph,
    model: Option<&ClusterModel>,
    tax: &Taxonomy,
    stopwords: &BTreeSet<String>,
    map_threshold: f64,
) -> Result<SemanticIndex, IndexError> {
    let model = model.ok_or(IndexError::ModelMissing)?;
    let mut index = SemanticIndex::default();

    let mut concept_clusters: BTreeMap<ConceptId, BTreeSet<usize>> = BTreeMap::new();
    for concept in graph.concepts() {
        if concept.kind != ConceptKind::Direct {
            continue;
        }
        let mut clusters = BTreeSet::new();
        for (cluster, terms) in model.top_terms.iter().enumerate() {
            let best = terms
                .iter()
                .map(|t| semantic_score(t, &concept.label, tax))
                .max_by(f64::total_cmp)
                .unwrap_or(0.0);
            if best > map_threshold {
                clusters.insert(cluster);
            }
        }
        if !clusters.is_empty() {
            concept_clusters.insert(concept.id, clusters);
        }
    }

    for doc in registry.docs() {
        let cluster = model.assign_doc(doc, stopwords);
        let terms = doc.terms(stopwords);
        for (&concept, clusters) in &concept_clusters {
            if !clusters.contains(&cluster) {
                continue;
            }
            let label = &graph.concept(concept).unwrap().label;
            let best = terms
                .iter()
                .map(|t| semantic_score(t, label, tax))
                .max_by(f64::total_cmp)
                .unwrap_or(0.0);
            if best > map_threshold {
                index.insert(concept, doc.id.clone());
            }
        }
    }
    Ok(index)
}
