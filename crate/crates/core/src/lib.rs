//! Semantic document retrieval over a weighted concept graph.
//!
//! The pipeline turns domain triples into a concept graph, groups similar
//! concepts into latent nodes, maps documents to concepts through static
//! clusters, weights edges by document-set overlap, and answers queries by
//! solving a group Steiner tree over the concepts anchored by the query
//! tokens. Retrieval quality is scored against reference solutions with
//! standard confusion-matrix metrics plus a keyword baseline.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`graph`]: concept graph construction, semantic grouping, edge weights
//! - [`similarity`]: tokenization, taxonomy, Wu-Palmer and string scoring
//! - [`gst`]: anchor identification and group Steiner tree solvers
//! - [`index`]: document metadata, clustering, the concept→document index
//! - [`query`]: end-to-end retrieval, geo/time filtering, relational joins
//! - [`eval`]: confusion matrices, retrieval metrics, keyword baseline
//! - [`engine`]: configuration, build pipeline, state persistence

pub mod engine;
pub mod eval;
pub mod graph;
pub mod gst;
pub mod index;
pub mod query;
pub mod similarity;

pub use engine::{EngineConfig, EngineState};
pub use graph::{Concept, ConceptGraph, ConceptId, ConceptKind, Relation, RelationKind, SpoTriple};
pub use gst::{GroupSteinerTree, TerminalGroups};
pub use index::{ClusterModel, CorpusRegistry, DocId, DocumentMetadata, SemanticIndex};
pub use query::{GeoOntology, RetrievalResult};
pub use similarity::{Taxonomy, TokenList};

use serde_json::Value;

/// (De)serializes a `BTreeMap` as a list of pairs. JSON objects only take
/// string keys, and several maps here are keyed by ids or id tuples.
pub(crate) mod serde_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<K, V, S>(map: &BTreeMap<K, V>, serializer: S) -> Result<S::Ok, S::Error>
    where
        K: Serialize,
        V: Serialize,
        S: Serializer,
    {
        serializer.collect_seq(map.iter())
    }

    pub fn deserialize<'de, K, V, D>(deserializer: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        let pairs = Vec::<(K, V)>::deserialize(deserializer)?;
        Ok(pairs.into_iter().collect())
    }
}

/// Render a JSON value with object keys sorted and a trailing newline.
///
/// Every externally visible JSON artifact (state files, query results,
/// evaluation reports, graph dumps) goes through this so golden files stay
/// byte-stable.
pub fn to_canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out.push('\n');
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push(':');
                write_canonical(&map[*key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_json_sorts_keys_recursively() {
        let v = json!({"b": 1, "a": {"z": [3, 1], "m": 2}});
        assert_eq!(
            to_canonical_json(&v),
            "{\"a\":{\"m\":2,\"z\":[3,1]},\"b\":1}\n"
        );
    }

    #[test]
    fn canonical_json_is_stable_for_floats() {
        let v = json!({"w": 0.1, "x": 1.0 / 3.0});
        assert_eq!(to_canonical_json(&v), to_canonical_json(&v));
    }
}
