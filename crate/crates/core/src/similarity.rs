//! Tokenization and semantic proximity scoring.
//!
//! Proximity between a query word and a concept is Wu-Palmer similarity over
//! the contextual taxonomy when the word matches a taxonomy label, and a
//! trigram Dice coefficient against the concept label otherwise, so a word
//! is never left scoreless.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Built-in English stopword list (50 words). Override with a one-word-per-line
/// file when the corpus needs a different list.
pub const DEFAULT_STOPWORDS: [&str; 50] = [
    "a", "about", "an", "and", "are", "as", "at", "be", "been", "but", "by", "did", "do", "does",
    "for", "from", "had", "has", "have", "he", "her", "his", "how", "if", "in", "into", "is", "it",
    "its", "no", "not", "of", "on", "or", "our", "she", "so", "that", "the", "their", "them",
    "then", "there", "these", "they", "this", "to", "was", "were", "with",
];

/// Years outside this range are treated as plain tokens, not time tags.
pub const YEAR_MIN: u16 = 1900;
pub const YEAR_MAX: u16 = 2100;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("query has no tokens after stopword and tag removal")]
    EmptyQuery,
    #[error("unknown concept: {0}")]
    UnknownConcept(String),
    #[error("taxonomy contains a cycle through {0}")]
    CyclicHierarchy(String),
    #[error("cannot read file: {0}")]
    UnreadableFile(String),
}

/// Lowercases, trims, and collapses internal whitespace.
pub fn normalize_label(raw: &str) -> String {
    raw.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn default_stopwords() -> BTreeSet<String> {
    DEFAULT_STOPWORDS.iter().map(|w| w.to_string()).collect()
}

pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>, SimilarityError> {
    let text = fs::read_to_string(path)
        .map_err(|e| SimilarityError::UnreadableFile(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Lowercase content words of a text: split on non-alphanumeric characters,
/// stopwords dropped. Used for document terms and queries alike.
pub fn content_words(text: &str, stopwords: &BTreeSet<String>) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .filter(|w| !stopwords.contains(w))
        .collect()
}

/// Tokenized query with optional geographic and time tags pulled out.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenList {
    pub tokens: Vec<String>,
    pub geo: Option<String>,
    pub year: Option<u16>,
}

/// Splits a query into lowercase tokens, dropping stopwords, extracting
/// 4-digit tokens in 1900–2100 as the time tag and tokens matching geo
/// ontology labels as the geo tag (last match wins for both).
pub fn tokenize(
    query: &str,
    stopwords: &BTreeSet<String>,
    geo_labels: &BTreeSet<String>,
) -> Result<TokenList, SimilarityError> {
    let mut list = TokenList::default();
    for word in content_words(query, stopwords) {
        if word.len() == 4 {
            if let Ok(year) = word.parse::<u16>() {
                if (YEAR_MIN..=YEAR_MAX).contains(&year) {
                    list.year = Some(year);
                    continue;
                }
            }
        }
        if geo_labels.contains(&word) {
            list.geo = Some(word);
            continue;
        }
        list.tokens.push(word);
    }
    if list.tokens.is_empty() {
        return Err(SimilarityError::EmptyQuery);
    }
    Ok(list)
}

/// Character trigram set; strings shorter than three characters contribute
/// themselves as a single gram so the coefficient stays defined.
fn trigrams(s: &str) -> BTreeSet<String> {
    let chars: Vec<char> = s.chars().collect();
    if chars.len() < 3 {
        return [s.to_string()].into_iter().collect();
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

/// Dice coefficient over character trigrams of the normalized strings.
pub fn trigram_dice(a: &str, b: &str) -> f64 {
    let ta = trigrams(&normalize_label(a));
    let tb = trigrams(&normalize_label(b));
    let shared = ta.intersection(&tb).count();
    let total = ta.len() + tb.len();
    if total == 0 {
        0.0
    } else {
        2.0 * shared as f64 / total as f64
    }
}

type TaxId = u32;

/// Rooted hierarchy built from `subClassOf` pairs plus an optional external
/// taxonomy file. Orphan nodes hang directly off a virtual root; the
/// structure is immutable after build and safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    labels: Vec<String>,
    by_label: BTreeMap<String, TaxId>,
    parents: Vec<BTreeSet<TaxId>>,
    depth: Vec<u32>,
}

const ROOT: TaxId = 0;

impl Taxonomy {
    /// Builds from child→parent label pairs; labels are normalized. Errors on
    /// cycles. `extra_labels` adds nodes with no parent (they attach to the
    /// virtual root), so every graph concept can be scored.
    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
        extra_labels: impl IntoIterator<Item = &'a str>,
    ) -> Result<Taxonomy, SimilarityError> {
        let mut tax = Taxonomy {
            labels: vec![String::new()], // virtual root
            by_label: BTreeMap::new(),
            parents: vec![BTreeSet::new()],
            depth: Vec::new(),
        };
        for (child, parent) in pairs {
            let c = tax.intern(&normalize_label(child));
            let p = tax.intern(&normalize_label(parent));
            if c != p {
                tax.parents[c as usize].insert(p);
            }
        }
        for label in extra_labels {
            tax.intern(&normalize_label(label));
        }
        // Orphans (other than the root) attach to the root.
        for id in 1..tax.labels.len() {
            if tax.parents[id].is_empty() {
                tax.parents[id].insert(ROOT);
            }
        }
        tax.compute_depths()?;
        Ok(tax)
    }

    fn intern(&mut self, label: &str) -> TaxId {
        if label.is_empty() {
            return ROOT;
        }
        if let Some(id) = self.by_label.get(label) {
            return *id;
        }
        let id = self.labels.len() as TaxId;
        self.labels.push(label.to_string());
        self.by_label.insert(label.to_string(), id);
        self.parents.push(BTreeSet::new());
        id
    }

    /// depth(root) = 1; depth(n) = 1 + max over parents. Errors on cycles.
    fn compute_depths(&mut self) -> Result<(), SimilarityError> {
        let n = self.labels.len();
        let mut depth = vec![0u32; n];
        depth[ROOT as usize] = 1;
        let mut state = vec![0u8; n]; // 0 unvisited, 1 in progress, 2 done
        state[ROOT as usize] = 2;

        fn visit(
            id: usize,
            parents: &[BTreeSet<TaxId>],
            labels: &[String],
            depth: &mut [u32],
            state: &mut [u8],
        ) -> Result<(), SimilarityError> {
            if state[id] == 2 {
                return Ok(());
            }
            if state[id] == 1 {
                return Err(SimilarityError::CyclicHierarchy(labels[id].clone()));
            }
            state[id] = 1;
            let mut max_parent = 0;
            for &p in &parents[id] {
                visit(p as usize, parents, labels, depth, state)?;
                max_parent = max_parent.max(depth[p as usize]);
            }
            depth[id] = max_parent + 1;
            state[id] = 2;
            Ok(())
        }

        for id in 0..n {
            visit(id, &self.parents, &self.labels, &mut depth, &mut state)?;
        }
        self.depth = depth;
        Ok(())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.by_label.contains_key(&normalize_label(label))
    }

    pub fn len(&self) -> usize {
        self.labels.len() - 1 // virtual root excluded
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn id(&self, label: &str) -> Result<TaxId, SimilarityError> {
        self.by_label
            .get(&normalize_label(label))
            .copied()
            .ok_or_else(|| SimilarityError::UnknownConcept(label.to_string()))
    }

    pub fn depth_of(&self, label: &str) -> Result<u32, SimilarityError> {
        Ok(self.depth[self.id(label)? as usize])
    }

    /// Ancestors of a node, including itself and the virtual root.
    fn ancestors(&self, id: TaxId) -> BTreeSet<TaxId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(self.parents[n as usize].iter().copied());
            }
        }
        seen
    }

    /// Wu-Palmer similarity: 2·depth(LCS) / (depth(a) + depth(b)), with the
    /// deepest common ancestor as LCS (ties by label). Always in (0, 1]
    /// because the virtual root is a common ancestor of everything.
    pub fn wu_palmer(&self, a: &str, b: &str) -> Result<f64, SimilarityError> {
        let ia = self.id(a)?;
        let ib = self.id(b)?;
        let common: Vec<TaxId> = self
            .ancestors(ia)
            .intersection(&self.ancestors(ib))
            .copied()
            .collect();
        let lcs_depth = common
            .iter()
            .map(|&c| self.depth[c as usize])
            .max()
            .unwrap_or(1);
        Ok(2.0 * lcs_depth as f64 / (self.depth[ia as usize] + self.depth[ib as usize]) as f64)
    }

    /// Reads additional child→parent pairs from a CSV with header
    /// `child,parent`.
    pub fn load_pairs_csv(path: &Path) -> Result<Vec<(String, String)>, SimilarityError> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| SimilarityError::UnreadableFile(format!("{}: {e}", path.display())))?;
        let mut pairs = Vec::new();
        for record in reader.records() {
            let record = record
                .map_err(|e| SimilarityError::UnreadableFile(format!("{}: {e}", path.display())))?;
            let child = record.get(0).unwrap_or("").to_string();
            let parent = record.get(1).unwrap_or("").to_string();
            if !child.is_empty() {
                pairs.push((child, parent));
            }
        }
        Ok(pairs)
    }
}

/// Proximity of a free-text word to a concept: Wu-Palmer when the word is a
/// taxonomy label and the concept is in the taxonomy, trigram Dice against
/// the concept label otherwise.
pub fn semantic_score(word: &str, concept_label: &str, tax: &Taxonomy) -> f64 {
    let word = normalize_label(word);
    if tax.contains(&word) && tax.contains(concept_label) {
        return tax.wu_palmer(&word, concept_label).unwrap_or(0.0);
    }
    trigram_dice(&word, concept_label)
}

/// Word-to-word proximity used for ranking and join-column matching: exact
/// match scores 1, two taxonomy labels score Wu-Palmer, anything else falls
/// back to trigram Dice.
pub fn word_score(a: &str, b: &str, tax: &Taxonomy) -> f64 {
    let a = normalize_label(a);
    let b = normalize_label(b);
    if a == b && !a.is_empty() {
        return 1.0;
    }
    if tax.contains(&a) && tax.contains(&b) {
        return tax.wu_palmer(&a, &b).unwrap_or(0.0);
    }
    trigram_dice(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_geo() -> BTreeSet<String> {
        BTreeSet::new()
    }

    #[test]
    fn tokenize_splits_and_lowercases() {
        let t = tokenize("Fiber Export", &default_stopwords(), &no_geo()).unwrap();
        assert_eq!(t.tokens, vec!["fiber", "export"]);
        assert_eq!(t.geo, None);
        assert_eq!(t.year, None);
    }

    #[test]
    fn tokenize_extracts_year_tag() {
        let t = tokenize("Chilly Export 2016", &default_stopwords(), &no_geo()).unwrap();
        assert_eq!(t.tokens, vec!["chilly", "export"]);
        assert_eq!(t.year, Some(2016));
    }

    #[test]
    fn tokenize_extracts_geo_tag() {
        let geo: BTreeSet<String> = ["hubli".to_string()].into_iter().collect();
        let t = tokenize("jute yield Hubli 2017", &default_stopwords(), &geo).unwrap();
        assert_eq!(t.tokens, vec!["jute", "yield"]);
        assert_eq!(t.geo.as_deref(), Some("hubli"));
        assert_eq!(t.year, Some(2017));
    }

    #[test]
    fn all_stopword_query_is_empty() {
        assert_eq!(
            tokenize("the of", &default_stopwords(), &no_geo()),
            Err(SimilarityError::EmptyQuery)
        );
    }

    #[test]
    fn out_of_range_numbers_stay_tokens() {
        let t = tokenize("production 1492", &default_stopwords(), &no_geo()).unwrap();
        assert_eq!(t.tokens, vec!["production", "1492"]);
        assert_eq!(t.year, None);
    }

    #[test]
    fn tokenize_is_idempotent_on_its_output() {
        let stop = default_stopwords();
        let t = tokenize("Seasonal crop production report 2016", &stop, &no_geo()).unwrap();
        let rejoined = t.tokens.join(" ");
        let again = tokenize(&rejoined, &stop, &no_geo()).unwrap();
        assert_eq!(again.tokens, t.tokens);
    }

    fn sample_taxonomy() -> Taxonomy {
        // root > goods > crops > {cotton, jute}; root > goods > tools
        Taxonomy::from_pairs(
            [
                ("crops", "goods"),
                ("tools", "goods"),
                ("cotton", "crops"),
                ("jute", "crops"),
            ],
            [],
        )
        .unwrap()
    }

    #[test]
    fn wu_palmer_self_similarity_is_one() {
        let tax = sample_taxonomy();
        assert_eq!(tax.wu_palmer("cotton", "cotton").unwrap(), 1.0);
    }

    #[test]
    fn wu_palmer_parent_child_matches_formula() {
        // crops at depth 3, cotton at depth 4, LCS = crops... scaled fixture:
        // goods depth 2, crops depth 3 → parent(2)/child(3) case needs
        // a depth-2 parent: goods–crops: 2·2/(2+3) = 0.8.
        let tax = sample_taxonomy();
        assert!((tax.wu_palmer("goods", "crops").unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn wu_palmer_siblings_matches_formula() {
        // cotton and jute both depth 4 under crops (depth 3): 6/8 = 0.75;
        // crops and tools both depth 3 under goods (depth 2): 4/6 ≈ 0.667.
        let tax = sample_taxonomy();
        assert!((tax.wu_palmer("cotton", "jute").unwrap() - 0.75).abs() < 1e-12);
        assert!((tax.wu_palmer("crops", "tools").unwrap() - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn wu_palmer_unknown_concept_errors() {
        let tax = sample_taxonomy();
        assert!(matches!(
            tax.wu_palmer("cotton", "nylon"),
            Err(SimilarityError::UnknownConcept(_))
        ));
    }

    #[test]
    fn multiple_parents_use_deepest_common_ancestor() {
        // d has parents b (depth 3) and c (depth 2); e is a child of b.
        // LCS(d, e) must be b (depth 3), not the shallower c or root.
        let tax = Taxonomy::from_pairs(
            [
                ("b", "a"),
                ("d", "b"),
                ("d", "c"),
                ("e", "b"),
            ],
            [],
        )
        .unwrap();
        assert_eq!(tax.depth_of("d").unwrap(), 4);
        let wu = tax.wu_palmer("d", "e").unwrap();
        assert!((wu - 2.0 * 3.0 / (4.0 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn cyclic_hierarchy_is_rejected() {
        let err = Taxonomy::from_pairs([("a", "b"), ("b", "c"), ("c", "a")], []).unwrap_err();
        assert!(matches!(err, SimilarityError::CyclicHierarchy(_)));
    }

    #[test]
    fn orphans_attach_to_virtual_root() {
        let tax = Taxonomy::from_pairs([("cotton", "crops")], ["standalone"]).unwrap();
        assert_eq!(tax.depth_of("standalone").unwrap(), 2);
        assert_eq!(tax.depth_of("crops").unwrap(), 2);
        assert_eq!(tax.depth_of("cotton").unwrap(), 3);
    }

    #[test]
    fn semantic_score_of_own_label_is_one() {
        let tax = sample_taxonomy();
        assert_eq!(semantic_score("cotton", "cotton", &tax), 1.0);
    }

    #[test]
    fn semantic_score_falls_back_to_trigram_dice() {
        let tax = sample_taxonomy();
        // "fiber" (3 trigrams) vs "fiber-crop" (8 trigrams), 3 shared:
        // 2·3/11 by hand.
        let s = semantic_score("fiber", "fiber-crop", &tax);
        assert!((s - 6.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn semantic_score_of_sibling_label_uses_wu_palmer() {
        let tax = sample_taxonomy();
        assert!((semantic_score("jute", "cotton", &tax) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn trigram_dice_handles_short_strings() {
        assert_eq!(trigram_dice("ab", "ab"), 1.0);
        assert_eq!(trigram_dice("ab", "cd"), 0.0);
        assert_eq!(trigram_dice("", ""), 1.0);
    }

    #[test]
    fn word_score_exact_match_is_one() {
        let tax = sample_taxonomy();
        assert_eq!(word_score("export", "export", &tax), 1.0);
        assert!((word_score("cotton", "jute", &tax) - 0.75).abs() < 1e-12);
        assert!(word_score("export", "exports", &tax) > 0.5);
    }

    #[test]
    fn normalize_label_collapses_whitespace() {
        assert_eq!(normalize_label("  Fiber   Crops "), "fiber crops");
    }

    #[test]
    fn stopword_file_replaces_the_builtin_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stopwords.txt");
        std::fs::write(&path, "jute\nexport\n").unwrap();
        let custom = load_stopwords(&path).unwrap();
        let t = tokenize("the jute export ledger", &custom, &no_geo()).unwrap();
        // "the" survives under the custom list; jute and export are dropped.
        assert_eq!(t.tokens, vec!["the", "ledger"]);
    }
}
