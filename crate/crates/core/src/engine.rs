//! Build pipeline, engine state, and persistence.
//!
//! `build` runs triples → concept graph → semantic groups → corpus
//! ingestion → clustering → semantic index → edge weights, and the result
//! is one self-describing state file with a format-version header. A loaded
//! state is immutable; queries and evaluations share it read-only.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::eval::{
    check_id_alignment, keyword_baseline, EvalError, EvalReport, QuerySpec, ReferenceSolution,
    SystemReport,
};
use crate::graph::{
    assign_weights, build_concept_graph, compute_semantic_groups, load_triples_csv, ConceptGraph,
    GraphError,
};
use crate::index::{
    build_semantic_index, extract_metadata, fit_clusters, ClusterModel, CorpusRegistry, DocId,
    DocumentMetadata, IndexError, SemanticIndex,
};
use crate::query::{retrieve_tokens, GeoOntology, QueryContext, QueryError, RetrievalResult};
use crate::similarity::{
    default_stopwords, load_stopwords, tokenize, SimilarityError, Taxonomy, TokenList,
};

/// Bumped whenever the state layout changes; loads refuse mismatches.
pub const STATE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error: {0}")]
    Io(String),
    #[error("state file format version {found} does not match supported version {expected}")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("corrupt state file: {0}")]
    CorruptState(String),
}

/// All build-time knobs; thresholds live in (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub triples: PathBuf,
    pub corpus: PathBuf,
    pub taxonomy: Option<PathBuf>,
    pub geo: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// Corpus used only for fitting the static clusters; defaults to the
    /// ingested corpus.
    pub cluster_corpus: Option<PathBuf>,
    pub anchor_threshold: f64,
    pub group_threshold: f64,
    pub map_threshold: f64,
    pub clusters: usize,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            triples: PathBuf::new(),
            corpus: PathBuf::new(),
            taxonomy: None,
            geo: None,
            stopwords: None,
            cluster_corpus: None,
            anchor_threshold: 0.9,
            group_threshold: 0.9,
            map_threshold: 0.5,
            clusters: 16,
            seed: 42,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        for (name, value) in [
            ("anchor-threshold", self.anchor_threshold),
            ("group-threshold", self.group_threshold),
            ("map-threshold", self.map_threshold),
        ] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(EngineError::Config(format!(
                    "{name} must be in (0, 1], got {value}"
                )));
            }
        }
        if self.clusters < 2 {
            return Err(EngineError::Config(format!(
                "clusters must be at least 2, got {}",
                self.clusters
            )));
        }
        for (name, path) in [("triples", Some(&self.triples)), ("corpus", Some(&self.corpus))] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(EngineError::Config(format!(
                        "{name} path does not exist: {}",
                        path.display()
                    )));
                }
            }
        }
        for (name, path) in [
            ("taxonomy", &self.taxonomy),
            ("geo", &self.geo),
            ("stopwords", &self.stopwords),
            ("cluster-corpus", &self.cluster_corpus),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(EngineError::Config(format!(
                        "{name} path does not exist: {}",
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Counts printed after a build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub concepts: usize,
    pub latent_concepts: usize,
    pub relations: usize,
    pub documents: usize,
    pub index_pairs: usize,
}

/// Frozen engine: graph, taxonomy, corpus, clusters, index, geo ontology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub version: u32,
    pub config: EngineConfig,
    pub stopwords: BTreeSet<String>,
    pub graph: ConceptGraph,
    pub taxonomy: Taxonomy,
    pub registry: CorpusRegistry,
    pub model: ClusterModel,
    pub index: SemanticIndex,
    pub geo: Option<GeoOntology>,
}

impl EngineState {
    /// Runs the whole build pipeline.
    pub fn build(config: EngineConfig) -> Result<EngineState, EngineError> {
        config.validate()?;
        let stopwords = match &config.stopwords {
            Some(path) => load_stopwords(path)?,
            None => default_stopwords(),
        };

        let triples = load_triples_csv(&config.triples)?;
        let mut graph = build_concept_graph(&triples)?;

        let mut pairs = graph.subclass_pairs();
        if let Some(path) = &config.taxonomy {
            pairs.extend(Taxonomy::load_pairs_csv(path)?);
        }
        let labels: Vec<String> = graph.concepts().map(|c| c.label.clone()).collect();
        let taxonomy = Taxonomy::from_pairs(
            pairs.iter().map(|(c, p)| (c.as_str(), p.as_str())),
            labels.iter().map(|l| l.as_str()),
        )?;

        let proximity = |a: &crate::graph::Concept, b: &crate::graph::Concept| {
            taxonomy.wu_palmer(&a.label, &b.label).unwrap_or(0.0)
        };
        compute_semantic_groups(&mut graph, proximity, config.group_threshold)?;

        let mut registry = CorpusRegistry::default();
        registry.ingest_dir(&config.corpus, &stopwords)?;

        let cluster_docs: Vec<DocumentMetadata> = match &config.cluster_corpus {
            Some(dir) => {
                let mut cluster_registry = CorpusRegistry::default();
                cluster_registry.ingest_dir(dir, &stopwords)?;
                cluster_registry.docs().cloned().collect()
            }
            None => registry.docs().cloned().collect(),
        };
        let doc_refs: Vec<&DocumentMetadata> = cluster_docs.iter().collect();
        let model = fit_clusters(&doc_refs, config.clusters, config.seed, &stopwords)?;

        let index = build_semantic_index(
            &registry,
            &graph,
            Some(&model),
            &taxonomy,
            &stopwords,
            config.map_threshold,
        )?;
        assign_weights(&mut graph, &index)?;

        let geo = match &config.geo {
            Some(path) => Some(GeoOntology::from_csv(path)?),
            None => None,
        };

        Ok(EngineState {
            version: STATE_FORMAT_VERSION,
            config,
            stopwords,
            graph,
            taxonomy,
            registry,
            model,
            index,
            geo,
        })
    }

    pub fn summary(&self) -> BuildSummary {
        BuildSummary {
            concepts: self.graph.len(),
            latent_concepts: self.graph.latent_count(),
            relations: self.graph.relation_count(),
            documents: self.registry.len(),
            index_pairs: self.index.pair_count(),
        }
    }

    /// Canonical JSON rendering of the whole state (sorted keys, trailing
    /// newline); byte-identical across builds from identical inputs.
    pub fn to_state_string(&self) -> Result<String, EngineError> {
        let value = serde_json::to_value(self)
            .map_err(|e| EngineError::Io(format!("serialize state: {e}")))?;
        Ok(crate::to_canonical_json(&value))
    }

    pub fn save(&self, path: &Path) -> Result<(), EngineError> {
        fs::write(path, self.to_state_string()?)
            .map_err(|e| EngineError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<EngineState, EngineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| EngineError::Io(format!("{}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| EngineError::CorruptState(format!("{}: {e}", path.display())))?;
        let found = value
            .get("version")
            .and_then(Value::as_u64)
            .ok_or_else(|| {
                EngineError::CorruptState(format!("{}: missing version field", path.display()))
            })?;
        if found != STATE_FORMAT_VERSION as u64 {
            return Err(EngineError::VersionMismatch {
                found,
                expected: STATE_FORMAT_VERSION,
            });
        }
        serde_json::from_value(value)
            .map_err(|e| EngineError::CorruptState(format!("{}: {e}", path.display())))
    }

    fn context(&self) -> QueryContext<'_> {
        QueryContext {
            graph: &self.graph,
            index: &self.index,
            registry: &self.registry,
            tax: &self.taxonomy,
            geo: self.geo.as_ref(),
            stopwords: &self.stopwords,
            anchor_threshold: self.config.anchor_threshold,
        }
    }

    pub fn query(&self, query: &str) -> Result<RetrievalResult, EngineError> {
        Ok(self.run_query(query, None, None)?)
    }

    /// Query with explicit geo/year overrides (evaluation files carry them
    /// as separate columns).
    pub fn run_query(
        &self,
        query: &str,
        geo: Option<String>,
        year: Option<u16>,
    ) -> Result<RetrievalResult, QueryError> {
        let ctx = self.context();
        let mut tokens: TokenList = tokenize(query, &self.stopwords, &ctx.geo_labels())?;
        if geo.is_some() {
            tokens.geo = geo.map(|g| crate::similarity::normalize_label(&g));
        }
        if year.is_some() {
            tokens.year = year;
        }
        retrieve_tokens(&ctx, query, tokens)
    }

    /// Scores every query against the reference for both the semantic
    /// retriever and the keyword baseline. `jobs` threads run queries
    /// concurrently; aggregation stays in query order.
    pub fn evaluate(
        &self,
        queries: &[QuerySpec],
        reference: &ReferenceSolution,
        jobs: usize,
    ) -> Result<EvalReport, EngineError> {
        check_id_alignment(queries, reference)?;
        let jobs = jobs.max(1);

        type Outcome = (QuerySpec, BTreeSet<DocId>, Vec<DocId>);
        let run_one = |spec: &QuerySpec| -> Result<(Outcome, Outcome), QueryError> {
            let result = match self.run_query(&spec.query, spec.geo.clone(), spec.year) {
                Ok(result) => result,
                Err(QueryError::Similarity(SimilarityError::EmptyQuery)) => {
                    RetrievalResult::default()
                }
                Err(other) => return Err(other),
            };
            let ranked: Vec<DocId> = result.docs.iter().map(|d| d.id.clone()).collect();
            let retrieved: BTreeSet<DocId> = ranked.iter().cloned().collect();
            let baseline_set = keyword_baseline(&spec.query, &self.registry, &self.stopwords);
            let baseline_ranked: Vec<DocId> = baseline_set.iter().cloned().collect();
            Ok((
                (spec.clone(), retrieved, ranked),
                (spec.clone(), baseline_set, baseline_ranked),
            ))
        };

        let mut slots: Vec<Option<(Outcome, Outcome)>> = Vec::new();
        slots.resize_with(queries.len(), || None);
        if jobs == 1 {
            for (i, spec) in queries.iter().enumerate() {
                slots[i] = Some(run_one(spec).map_err(EngineError::from)?);
            }
        } else {
            let chunk = queries.len().div_ceil(jobs);
            let results = std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for (c, specs) in queries.chunks(chunk.max(1)).enumerate() {
                    handles.push((
                        c,
                        scope.spawn(move || {
                            specs
                                .iter()
                                .map(run_one)
                                .collect::<Result<Vec<_>, QueryError>>()
                        }),
                    ));
                }
                let mut collected: BTreeMap<usize, Vec<(Outcome, Outcome)>> = BTreeMap::new();
                for (c, handle) in handles {
                    collected.insert(c, handle.join().expect("eval worker panicked")?);
                }
                Ok::<_, QueryError>(collected)
            })?;
            let mut i = 0;
            for (_, chunk_results) in results {
                for outcome in chunk_results {
                    slots[i] = Some(outcome);
                    i += 1;
                }
            }
        }

        let mut semdr_outcomes = Vec::new();
        let mut baseline_outcomes = Vec::new();
        for slot in slots.into_iter().flatten() {
            semdr_outcomes.push(slot.0);
            baseline_outcomes.push(slot.1);
        }
        let universe = self.registry.len();
        Ok(EvalReport {
            universe,
            semdr: SystemReport::build(&semdr_outcomes, reference, universe),
            baseline: SystemReport::build(&baseline_outcomes, reference, universe),
        })
    }

    /// Graph dump: concepts and weighted relations by label, sorted.
    pub fn dump_graph(&self) -> Value {
        let label = |id| {
            self.graph
                .concept(id)
                .map(|c| c.label.clone())
                .unwrap_or_default()
        };
        let mut concepts: Vec<Value> = self
            .graph
            .concepts()
            .map(|c| {
                let mut members: Vec<String> =
                    c.members.iter().map(|&m| label(m)).collect();
                members.sort();
                json!({
                    "description": c.description,
                    "kind": format!("{:?}", c.kind),
                    "label": c.label,
                    "members": members,
                })
            })
            .collect();
        concepts.sort_by_key(|c| c["label"].as_str().unwrap_or_default().to_string());
        let mut relations: Vec<(String, String, String, f64)> = self
            .graph
            .relations()
            .map(|r| {
                let (a, b) = (label(r.a), label(r.b));
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                (a, b, format!("{:?}", r.kind), r.weight)
            })
            .collect();
        relations.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
        let relations: Vec<Value> = relations
            .into_iter()
            .map(|(a, b, kind, w)| json!([a, b, kind, w]))
            .collect();
        json!({"concepts": concepts, "relations": relations})
    }

    /// Index dump as `concept,doc_id` CSV, sorted for diffing.
    pub fn dump_index(&self) -> String {
        let mut rows: Vec<(String, String)> = self
            .index
            .pairs()
            .map(|(c, d)| {
                (
                    self.graph
                        .concept(c)
                        .map(|c| c.label.clone())
                        .unwrap_or_default(),
                    d.to_string(),
                )
            })
            .collect();
        rows.sort();
        let mut out = String::from("concept,doc_id\n");
        for (concept, doc) in rows {
            out.push_str(&format!("{concept},{doc}\n"));
        }
        out
    }
}

/// Extracts metadata for one file outside a full build (used by tooling and
/// tests).
pub fn extract_one(
    path: &Path,
    stopwords: &BTreeSet<String>,
) -> Result<DocumentMetadata, EngineError> {
    Ok(extract_metadata(path, None, stopwords)?)
}
