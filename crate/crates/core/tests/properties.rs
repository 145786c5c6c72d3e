//! Property tests for the scoring, grouping, and indexing invariants.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use proptest::prelude::*;

use semdr_core::graph::{
    assign_weights, build_concept_graph, compute_semantic_groups, jaccard, ConceptGraph,
    ConceptId, ConceptKind, SpoTriple,
};
use semdr_core::gst::{greedy_gst, identify_anchors, TerminalGroup, TerminalGroups};
use semdr_core::index::{DocId, SemanticIndex};
use semdr_core::similarity::{
    default_stopwords, semantic_score, tokenize, trigram_dice, Taxonomy, TokenList,
};

fn doc_set() -> impl Strategy<Value = BTreeSet<DocId>> {
    prop::collection::btree_set((0u8..20).prop_map(|i| DocId::new(format!("d{i}"))), 0..12)
}

proptest! {
    #[test]
    fn jaccard_is_symmetric_bounded_and_reflexive(a in doc_set(), b in doc_set()) {
        let ab = jaccard(&a, &b);
        let ba = jaccard(&b, &a);
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        if !a.is_empty() {
            prop_assert_eq!(jaccard(&a, &a), 1.0);
        }
        let inverse = 1.0 - ab;
        prop_assert!((0.0..=1.0).contains(&inverse));
    }
}

/// Random parent forests over a small label alphabet; child index always
/// above parent index, so no cycles.
fn taxonomy_strategy() -> impl Strategy<Value = Taxonomy> {
    prop::collection::vec(0usize..12, 2..12).prop_map(|parents| {
        let labels: Vec<String> = (0..=parents.len()).map(|i| format!("t{i:02}")).collect();
        let pairs: Vec<(String, String)> = parents
            .iter()
            .enumerate()
            .map(|(child, &p)| {
                let parent = p % (child + 1);
                (labels[child + 1].clone(), labels[parent].clone())
            })
            .collect();
        Taxonomy::from_pairs(
            pairs.iter().map(|(c, p)| (c.as_str(), p.as_str())),
            labels.iter().map(String::as_str),
        )
        .unwrap()
    })
}

proptest! {
    #[test]
    fn wu_palmer_is_symmetric_reflexive_and_in_range(
        tax in taxonomy_strategy(),
        a in 0usize..12,
        b in 0usize..12,
    ) {
        let la = format!("t{:02}", a % tax.len());
        let lb = format!("t{:02}", b % tax.len());
        let ab = tax.wu_palmer(&la, &lb).unwrap();
        prop_assert_eq!(ab, tax.wu_palmer(&lb, &la).unwrap());
        prop_assert!(ab > 0.0 && ab <= 1.0);
        prop_assert_eq!(tax.wu_palmer(&la, &la).unwrap(), 1.0);
    }

    #[test]
    fn semantic_score_stays_in_unit_interval(
        tax in taxonomy_strategy(),
        word in "[a-z]{1,10}",
        concept in 0usize..12,
    ) {
        let label = format!("t{:02}", concept % tax.len());
        let score = semantic_score(&word, &label, &tax);
        prop_assert!((0.0..=1.0).contains(&score));
        prop_assert_eq!(semantic_score(&label, &label, &tax), 1.0);
    }

    #[test]
    fn trigram_dice_is_symmetric_and_bounded(a in "[a-z ]{0,12}", b in "[a-z ]{0,12}") {
        let ab = trigram_dice(&a, &b);
        prop_assert_eq!(ab, trigram_dice(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn tokenize_is_idempotent(words in prop::collection::vec("[a-z]{1,8}", 1..8)) {
        let stop = default_stopwords();
        let geo = BTreeSet::new();
        let query = words.join(" ");
        match tokenize(&query, &stop, &geo) {
            Ok(tokens) => {
                let rejoined = tokens.tokens.join(" ");
                let again = tokenize(&rejoined, &stop, &geo).unwrap();
                prop_assert_eq!(again.tokens, tokens.tokens);
            }
            Err(_) => {
                // Every word was a stopword; nothing to re-tokenize.
            }
        }
    }
}

/// Small random graphs with a proximity table for grouping checks.
fn triples_strategy() -> impl Strategy<Value = Vec<SpoTriple>> {
    prop::collection::vec((0u8..8, 0u8..8), 1..12).prop_map(|pairs| {
        pairs
            .into_iter()
            .map(|(a, b)| {
                SpoTriple::new(format!("c{a}"), "subClassOf", format!("c{b}x"))
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn grouping_only_adds_and_satisfies_the_star_condition(
        triples in triples_strategy(),
        threshold in 0.05f64..0.95,
        salt in 0u64..1000,
    ) {
        let mut graph = build_concept_graph(&triples).unwrap();
        let nodes_before: BTreeSet<ConceptId> = graph.concepts().map(|c| c.id).collect();
        let edges_before: BTreeSet<(ConceptId, ConceptId)> =
            graph.relations().map(|r| r.endpoints()).collect();

        // Deterministic pseudo-random proximity from the label pair.
        let proximity = move |a: &semdr_core::graph::Concept, b: &semdr_core::graph::Concept| {
            let (x, y) = if a.label <= b.label { (&a.label, &b.label) } else { (&b.label, &a.label) };
            let mut h = salt.wrapping_mul(0x9e3779b97f4a7c15);
            for byte in x.bytes().chain(y.bytes()) {
                h = (h ^ byte as u64).wrapping_mul(0x100000001b3);
            }
            (h % 1000) as f64 / 1000.0
        };
        compute_semantic_groups(&mut graph, proximity, threshold).unwrap();

        let nodes_after: BTreeSet<ConceptId> = graph.concepts().map(|c| c.id).collect();
        let edges_after: BTreeSet<(ConceptId, ConceptId)> =
            graph.relations().map(|r| r.endpoints()).collect();
        prop_assert!(nodes_before.is_subset(&nodes_after));
        prop_assert!(edges_before.is_subset(&edges_after));

        // Star condition, re-checked post hoc: the medoid named in the latent
        // label clears the threshold against every other member.
        for concept in graph.concepts().filter(|c| c.kind == ConceptKind::Latent) {
            let medoid_label = concept.label.strip_prefix("latent:").unwrap();
            let medoid = graph.id_of(medoid_label).unwrap();
            prop_assert!(concept.members.contains(&medoid));
            for &member in &concept.members {
                if member != medoid {
                    let score = proximity(
                        graph.concept(member).unwrap(),
                        graph.concept(medoid).unwrap(),
                    );
                    prop_assert!(score > threshold);
                }
            }
            prop_assert!(concept.members.len() >= 2);
        }
    }

    #[test]
    fn assign_weights_is_idempotent_and_bounded(
        triples in triples_strategy(),
        docs in prop::collection::vec((0u8..8, 0u8..10), 0..20),
    ) {
        let mut graph = build_concept_graph(&triples).unwrap();
        let mut index = SemanticIndex::default();
        let ids: Vec<ConceptId> = graph.concepts().map(|c| c.id).collect();
        for (c, d) in docs {
            index.insert(ids[c as usize % ids.len()], DocId::new(format!("d{d}")));
        }
        assign_weights(&mut graph, &index).unwrap();
        let first: Vec<f64> = graph.relations().map(|r| r.weight).collect();
        prop_assert!(first.iter().all(|w| (0.0..=1.0).contains(w)));
        assign_weights(&mut graph, &index).unwrap();
        let second: Vec<f64> = graph.relations().map(|r| r.weight).collect();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn index_mapping_and_reverse_stay_consistent(
        ops in prop::collection::vec((0u8..6, 0u8..10, prop::bool::ANY), 1..40),
    ) {
        let mut index = SemanticIndex::default();
        for (c, d, insert) in ops {
            let doc = DocId::new(format!("d{d}"));
            if insert {
                index.insert(ConceptId(c as u32), doc);
            } else {
                index.remove_doc(&doc);
            }
        }
        prop_assert!(index.check_consistency().is_ok());
    }

    #[test]
    fn raising_the_anchor_threshold_never_adds_terminals(
        low in 0.1f64..0.5,
        delta in 0.0f64..0.5,
    ) {
        let graph = build_concept_graph(&[
            SpoTriple::new("cotton", "subClassOf", "crops"),
            SpoTriple::new("jute", "subClassOf", "crops"),
            SpoTriple::new("chilly", "subClassOf", "crops"),
        ]).unwrap();
        let tax = Taxonomy::from_pairs(
            [("cotton", "crops"), ("jute", "crops"), ("chilly", "crops")],
            [],
        ).unwrap();
        let tokens = TokenList {
            tokens: vec!["cotton".into(), "crops".into()],
            geo: None,
            year: None,
        };
        let wide = identify_anchors(&graph, &tax, &tokens, low);
        let narrow = identify_anchors(&graph, &tax, &tokens, low + delta);
        for (w, n) in wide.groups.iter().zip(&narrow.groups) {
            let wide_set: BTreeSet<ConceptId> = w.terminals.keys().copied().collect();
            let narrow_set: BTreeSet<ConceptId> = n.terminals.keys().copied().collect();
            prop_assert!(narrow_set.is_subset(&wide_set));
        }
    }
}

/// Random weighted graph plus random groups; mirrors the acceptance
/// generator but drives the solver through proptest shrinking.
fn solver_instance() -> impl Strategy<Value = (ConceptGraph, TerminalGroups)> {
    (
        4usize..10,
        prop::collection::vec((0usize..10, 0usize..10, 0.0f64..1.0), 4..20),
        prop::collection::vec(prop::collection::vec(0usize..10, 1..3), 1..4),
    )
        .prop_map(|(n, raw_edges, raw_groups)| {
            let labels: Vec<String> = (0..n).map(|i| format!("v{i:02}")).collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            let mut edges: Vec<(&str, &str, f64)> = Vec::new();
            for i in 1..n {
                // Spanning chain keeps it connected.
                edges.push((refs[i - 1], refs[i], 0.3));
            }
            for (a, b, w) in raw_edges {
                if a % n != b % n {
                    edges.push((refs[a % n], refs[b % n], w));
                }
            }
            let graph = ConceptGraph::from_weighted_edges(&refs, &edges);
            let groups = raw_groups
                .into_iter()
                .enumerate()
                .map(|(i, members)| {
                    let terminals: BTreeMap<ConceptId, f64> = members
                        .into_iter()
                        .map(|m| (graph.id_of(&labels[m % n]).unwrap(), 1.0))
                        .collect();
                    let latent = terminals.keys().copied().collect();
                    TerminalGroup {
                        token: format!("tok{i}"),
                        terminals,
                        latent,
                    }
                })
                .collect();
            (graph, TerminalGroups { groups })
        })
}

proptest! {
    #[test]
    fn greedy_trees_always_satisfy_their_invariants(
        (graph, groups) in solver_instance(),
    ) {
        let tree = greedy_gst(&graph, &groups).unwrap();
        prop_assert!(tree.validate(&graph, &groups).is_ok());
        // Determinism: a second solve is byte-identical.
        let again = greedy_gst(&graph, &groups).unwrap();
        prop_assert_eq!(
            serde_json::to_string(&tree.to_json(&graph, &groups)).unwrap(),
            serde_json::to_string(&again.to_json(&graph, &groups)).unwrap()
        );
    }
}
