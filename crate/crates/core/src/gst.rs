//! Anchor identification and group Steiner tree solvers.
//!
//! A query token anchors every direct concept whose semantic score clears
//! the threshold; each token's anchors relax to the latent groups containing
//! them. The greedy solver grows a tree by repeatedly attaching the group
//! with the cheapest shortest path to the partial tree; the exact solver
//! enumerates group representatives and Steiner-point subsets over the
//! metric closure and serves as the validation oracle on small graphs.
//!
//! All tie-breaks are (lower cost, then lexicographically smaller concept
//! label), so identical inputs always produce byte-identical trees.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::{ConceptGraph, ConceptId, ConceptKind};
use crate::similarity::{semantic_score, Taxonomy, TokenList};

/// Node budget of the exact oracle; subset enumeration is exponential.
pub const EXACT_NODE_LIMIT: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum GstError {
    #[error("no query token anchored any concept")]
    NoAnchors,
    #[error("no path connects the group for token '{0}' to the rest of the tree")]
    UnreachableGroup(String),
    #[error("graph has {nodes} nodes; the exact solver accepts at most {max}")]
    TooLarge { nodes: usize, max: usize },
}

/// Anchor terminals for one query token plus the latent relaxation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TerminalGroup {
    pub token: String,
    /// Anchored direct concepts with their anchor scores.
    #[serde(with = "crate::serde_pairs")]
    pub terminals: BTreeMap<ConceptId, f64>,
    /// Terminals plus every member of a latent concept containing one.
    pub latent: BTreeSet<ConceptId>,
}

impl TerminalGroup {
    pub fn is_empty(&self) -> bool {
        self.terminals.is_empty()
    }

    /// Nodes that may cover this group in a tree.
    pub fn members(&self) -> &BTreeSet<ConceptId> {
        &self.latent
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TerminalGroups {
    pub groups: Vec<TerminalGroup>,
}

impl TerminalGroups {
    /// Groups with at least one terminal, in token order.
    pub fn active(&self) -> Vec<&TerminalGroup> {
        self.groups.iter().filter(|g| !g.is_empty()).collect()
    }

    /// All anchored terminals across groups.
    pub fn anchors(&self) -> BTreeSet<ConceptId> {
        self.groups
            .iter()
            .flat_map(|g| g.terminals.keys().copied())
            .collect()
    }

    /// Highest anchor score of a concept across groups, if it is an anchor.
    pub fn anchor_score(&self, id: ConceptId) -> Option<f64> {
        self.groups
            .iter()
            .filter_map(|g| g.terminals.get(&id).copied())
            .max_by(f64::total_cmp)
    }
}

/// Tree over the concept graph touching at least one member of every group
/// it was solved for.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupSteinerTree {
    pub nodes: BTreeSet<ConceptId>,
    /// Edge endpoints (smaller id first) with their weights.
    #[serde(with = "crate::serde_pairs")]
    pub edges: BTreeMap<(ConceptId, ConceptId), f64>,
    pub cost: f64,
}

impl GroupSteinerTree {
    fn single(node: ConceptId) -> Self {
        GroupSteinerTree {
            nodes: [node].into_iter().collect(),
            edges: BTreeMap::new(),
            cost: 0.0,
        }
    }

    /// Canonical cost: edge weights summed in sorted endpoint order, so the
    /// greedy and exact solvers report bit-identical costs for equal trees.
    /// The empty sum folds from -0.0; adding 0.0 normalizes the sign.
    pub fn canonical_cost(edges: &BTreeMap<(ConceptId, ConceptId), f64>) -> f64 {
        edges.values().sum::<f64>() + 0.0
    }

    pub fn degree(&self, node: ConceptId) -> usize {
        self.edges
            .keys()
            .filter(|(a, b)| *a == node || *b == node)
            .count()
    }

    /// Debug serialization with labels instead of ids, stable for golden
    /// files: `{cost, edges: [[u, v, w]...], groups: {token: [terminals]},
    /// nodes: [...]}` with keys and lists sorted.
    pub fn to_json(&self, graph: &ConceptGraph, groups: &TerminalGroups) -> Value {
        let label = |id: ConceptId| graph.concept(id).map(|c| c.label.clone()).unwrap_or_default();
        let mut nodes: Vec<String> = self.nodes.iter().map(|&n| label(n)).collect();
        nodes.sort();
        let mut edges: Vec<(String, String, f64)> = self
            .edges
            .iter()
            .map(|(&(a, b), &w)| {
                let (la, lb) = (label(a), label(b));
                if la <= lb {
                    (la, lb, w)
                } else {
                    (lb, la, w)
                }
            })
            .collect();
        edges.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
        let edges: Vec<Value> = edges
            .into_iter()
            .map(|(a, b, w)| json!([a, b, w]))
            .collect();
        let mut group_map = serde_json::Map::new();
        for group in &groups.groups {
            let mut terminals: Vec<String> =
                group.terminals.keys().map(|&t| label(t)).collect();
            terminals.sort();
            group_map.insert(group.token.clone(), json!(terminals));
        }
        json!({
            "cost": self.cost,
            "edges": edges,
            "groups": Value::Object(group_map),
            "nodes": nodes,
        })
    }

    /// Checks every structural invariant against the graph and groups; used
    /// by the validation suites. Returns a description of the first breach.
    pub fn validate(
        &self,
        graph: &ConceptGraph,
        groups: &TerminalGroups,
    ) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        if self.edges.len() != self.nodes.len() - 1 {
            return Err(format!(
                "edge count {} != node count {} - 1",
                self.edges.len(),
                self.nodes.len()
            ));
        }
        for (&(a, b), &w) in &self.edges {
            if !self.nodes.contains(&a) || !self.nodes.contains(&b) {
                return Err(format!("edge ({a}, {b}) has an endpoint outside the tree"));
            }
            match graph.relation_between(a, b) {
                Some(rel) if rel.weight == w => {}
                Some(rel) => {
                    return Err(format!(
                        "edge ({a}, {b}) weight {w} differs from graph weight {}",
                        rel.weight
                    ))
                }
                None => return Err(format!("edge ({a}, {b}) does not exist in the graph")),
            }
        }
        // Connectivity by union over edges.
        let mut reached: BTreeSet<ConceptId> = BTreeSet::new();
        if let Some(&start) = self.nodes.iter().next() {
            let mut stack = vec![start];
            while let Some(n) = stack.pop() {
                if !reached.insert(n) {
                    continue;
                }
                for &(a, b) in self.edges.keys() {
                    if a == n && !reached.contains(&b) {
                        stack.push(b);
                    } else if b == n && !reached.contains(&a) {
                        stack.push(a);
                    }
                }
            }
        }
        if reached != self.nodes {
            return Err("tree is not connected".into());
        }
        for group in groups.active() {
            if group.members().is_disjoint(&self.nodes) {
                return Err(format!("group '{}' is not covered", group.token));
            }
        }
        if self.cost < 0.0 {
            return Err(format!("negative cost {}", self.cost));
        }
        let canonical = Self::canonical_cost(&self.edges);
        if self.cost != canonical {
            return Err(format!(
                "stored cost {} differs from canonical sum {canonical}",
                self.cost
            ));
        }
        Ok(())
    }
}

/// One terminal group per token: every direct concept whose semantic score
/// for the token exceeds the threshold. Tokens that anchor nothing keep an
/// empty group so the caller can decide what to do with them.
pub fn identify_anchors(
    graph: &ConceptGraph,
    tax: &Taxonomy,
    tokens: &TokenList,
    threshold: f64,
) -> TerminalGroups {
    let mut groups = Vec::new();
    for token in &tokens.tokens {
        let mut group = TerminalGroup {
            token: token.clone(),
            ..TerminalGroup::default()
        };
        for concept in graph.concepts() {
            if concept.kind != ConceptKind::Direct {
                continue;
            }
            let score = semantic_score(token, &concept.label, tax);
            if score > threshold {
                group.terminals.insert(concept.id, score);
                group.latent.insert(concept.id);
            }
        }
        groups.push(group);
    }
    TerminalGroups { groups }
}

/// Relaxes each group to the union of the member sets of every latent
/// concept containing one of its terminals; terminals always stay in.
pub fn expand_to_latent(graph: &ConceptGraph, groups: &TerminalGroups) -> TerminalGroups {
    let latents: Vec<&BTreeSet<ConceptId>> = graph
        .concepts()
        .filter(|c| c.kind == ConceptKind::Latent)
        .map(|c| &c.members)
        .collect();
    let mut expanded = groups.clone();
    for group in &mut expanded.groups {
        let mut latent: BTreeSet<ConceptId> = group.terminals.keys().copied().collect();
        for members in &latents {
            if group.terminals.keys().any(|t| members.contains(t)) {
                latent.extend(members.iter().copied());
            }
        }
        group.latent = latent;
    }
    expanded
}

/// f64 wrapper ordered by total_cmp; distances are never NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Adjacency<'g> {
    labels: Vec<&'g str>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl<'g> Adjacency<'g> {
    fn new(graph: &'g ConceptGraph) -> Self {
        let n = graph.len();
        let labels: Vec<&str> = graph.concepts().map(|c| c.label.as_str()).collect();
        let mut neighbors = vec![Vec::new(); n];
        for rel in graph.relations() {
            neighbors[rel.a.index()].push((rel.b.index(), rel.weight));
            neighbors[rel.b.index()].push((rel.a.index(), rel.weight));
        }
        for list in &mut neighbors {
            list.sort_by_key(|&(n, _)| n);
        }
        Adjacency { labels, neighbors }
    }

    fn len(&self) -> usize {
        self.neighbors.len()
    }

    /// Shortest paths from the source set. Exploration order and parent
    /// assignment break ties by label, so equal-cost paths resolve the same
    /// way on every run.
    fn dijkstra(&self, sources: &BTreeSet<usize>) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent: Vec<Option<usize>> = vec![None; n];
        let mut queue: BTreeSet<(Cost, &str, usize)> = BTreeSet::new();
        for &s in sources {
            dist[s] = 0.0;
            queue.insert((Cost(0.0), self.labels[s], s));
        }
        while let Some((Cost(du), _, u)) = queue.pop_first() {
            if du > dist[u] {
                continue;
            }
            for &(v, w) in &self.neighbors[u] {
                let candidate = du + w;
                if candidate < dist[v] {
                    queue.remove(&(Cost(dist[v]), self.labels[v], v));
                    dist[v] = candidate;
                    parent[v] = Some(u);
                    queue.insert((Cost(candidate), self.labels[v], v));
                }
            }
        }
        (dist, parent)
    }
}

fn group_member_indices(group: &TerminalGroup) -> BTreeSet<usize> {
    group.members().iter().map(|id| id.index()).collect()
}

/// Greedy group Steiner tree.
///
/// Empty groups are dropped. A single surviving group yields its cheapest
/// terminal as a zero-cost tree. Otherwise the tree is seeded at the group
/// member with the cheapest connection to another group and grown by
/// attaching the uncovered group with the cheapest shortest path to the
/// current tree, merging at common vertices; leaves belonging to no group
/// are pruned at the end.
pub fn greedy_gst(
    graph: &ConceptGraph,
    groups: &TerminalGroups,
) -> Result<GroupSteinerTree, GstError> {
    let active = groups.active();
    if active.is_empty() {
        return Err(GstError::NoAnchors);
    }
    if active.len() == 1 {
        return Ok(GroupSteinerTree::single(cheapest_terminal(graph, active[0])));
    }

    let adj = Adjacency::new(graph);
    let member_sets: Vec<BTreeSet<usize>> =
        active.iter().map(|g| group_member_indices(g)).collect();

    // Seed: the member whose worst-case shortest path to the remaining
    // groups is minimal; ties by label. A node sitting in every group has
    // connection cost zero and becomes the whole tree. With everything
    // disconnected the first group's lexicographically smallest member
    // seeds, and the attach loop reports the unreachable group.
    let mut seed: Option<(Cost, &str, usize)> = None;
    for (gi, members) in member_sets.iter().enumerate() {
        for &v in members {
            let (dist, _) = adj.dijkstra(&[v].into_iter().collect());
            let conn = member_sets
                .iter()
                .enumerate()
                .filter(|(gj, _)| *gj != gi)
                .map(|(_, other)| {
                    other
                        .iter()
                        .map(|&u| dist[u])
                        .min_by(f64::total_cmp)
                        .unwrap_or(f64::INFINITY)
                })
                .max_by(f64::total_cmp)
                .unwrap_or(f64::INFINITY);
            let key = (Cost(conn), adj.labels[v], v);
            if seed.is_none_or(|best| key < best) {
                seed = Some(key);
            }
        }
    }
    let seed = match seed {
        Some((Cost(conn), _, v)) if conn.is_finite() => v,
        _ => *member_sets[0].iter().min_by_key(|&&v| adj.labels[v]).unwrap(),
    };

    let mut tree_nodes: BTreeSet<usize> = [seed].into_iter().collect();
    let mut tree_edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut covered: Vec<bool> = member_sets
        .iter()
        .map(|members| members.contains(&seed))
        .collect();

    while covered.iter().any(|c| !c) {
        let (dist, parent) = adj.dijkstra(&tree_nodes);
        // Cheapest entry point of any uncovered group; ties by label.
        let mut best: Option<(Cost, &str, usize)> = None;
        for (gi, members) in member_sets.iter().enumerate() {
            if covered[gi] {
                continue;
            }
            for &u in members {
                let key = (Cost(dist[u]), adj.labels[u], u);
                if dist[u].is_finite() && best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        let Some((_, _, target)) = best else {
            let gi = covered.iter().position(|c| !c).unwrap();
            return Err(GstError::UnreachableGroup(active[gi].token.clone()));
        };
        // Merge the path back into the tree.
        let mut node = target;
        while !tree_nodes.contains(&node) {
            let prev = parent[node].expect("path to a finite-distance node");
            let key = if prev < node { (prev, node) } else { (node, prev) };
            let weight = graph
                .relation_between(ConceptId(key.0 as u32), ConceptId(key.1 as u32))
                .map(|r| r.weight)
                .unwrap_or(0.0);
            tree_edges.insert(key, weight);
            tree_nodes.insert(node);
            node = prev;
        }
        for (gi, members) in member_sets.iter().enumerate() {
            if !covered[gi] && !members.is_disjoint(&tree_nodes) {
                covered[gi] = true;
            }
        }
    }

    prune_non_group_leaves(&mut tree_nodes, &mut tree_edges, &member_sets);
    Ok(finish_tree(tree_nodes, tree_edges))
}

fn cheapest_terminal(graph: &ConceptGraph, group: &TerminalGroup) -> ConceptId {
    // All single terminals cost zero; the label tie-break decides.
    *group
        .terminals
        .keys()
        .min_by_key(|id| &graph.concept(**id).unwrap().label)
        .unwrap()
}

fn prune_non_group_leaves(
    nodes: &mut BTreeSet<usize>,
    edges: &mut BTreeMap<(usize, usize), f64>,
    member_sets: &[BTreeSet<usize>],
) {
    loop {
        if nodes.len() <= 1 {
            return;
        }
        let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, b) in edges.keys() {
            *degree.entry(a).or_default() += 1;
            *degree.entry(b).or_default() += 1;
        }
        let removable: Vec<usize> = nodes
            .iter()
            .copied()
            .filter(|n| {
                degree.get(n).copied().unwrap_or(0) <= 1
                    && !member_sets.iter().any(|m| m.contains(n))
            })
            .collect();
        if removable.is_empty() {
            return;
        }
        for n in removable {
            nodes.remove(&n);
            edges.retain(|&(a, b), _| a != n && b != n);
        }
    }
}

fn finish_tree(
    nodes: BTreeSet<usize>,
    edges: BTreeMap<(usize, usize), f64>,
) -> GroupSteinerTree {
    let edges: BTreeMap<(ConceptId, ConceptId), f64> = edges
        .into_iter()
        .map(|((a, b), w)| ((ConceptId(a as u32), ConceptId(b as u32)), w))
        .collect();
    let cost = GroupSteinerTree::canonical_cost(&edges);
    GroupSteinerTree {
        nodes: nodes.into_iter().map(|n| ConceptId(n as u32)).collect(),
        edges,
        cost,
    }
}

/// Exhaustive group Steiner tree oracle.
///
/// Enumerates one representative per group and every Steiner-point subset,
/// scores candidates by minimum spanning tree over the metric closure, and
/// expands the winner back to graph edges. Guarded to graphs of at most
/// [`EXACT_NODE_LIMIT`] nodes.
pub fn exact_gst(
    graph: &ConceptGraph,
    groups: &TerminalGroups,
) -> Result<GroupSteinerTree, GstError> {
    let n = graph.len();
    if n > EXACT_NODE_LIMIT {
        return Err(GstError::TooLarge {
            nodes: n,
            max: EXACT_NODE_LIMIT,
        });
    }
    let active = groups.active();
    if active.is_empty() {
        return Err(GstError::NoAnchors);
    }
    if active.len() == 1 {
        return Ok(GroupSteinerTree::single(cheapest_terminal(graph, active[0])));
    }
    check_reachability(graph, &active)?;

    let adj = Adjacency::new(graph);
    // Floyd-Warshall with first-hop reconstruction.
    let mut dist = vec![vec![f64::INFINITY; n]; n];
    let mut next = vec![vec![usize::MAX; n]; n];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = 0.0;
        next[i][i] = i;
    }
    for (u, list) in adj.neighbors.iter().enumerate() {
        for &(v, w) in list {
            if w < dist[u][v] {
                dist[u][v] = w;
                next[u][v] = v;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let through = dist[i][k] + dist[k][j];
                if through < dist[i][j] {
                    dist[i][j] = through;
                    next[i][j] = next[i][k];
                }
            }
        }
    }

    let member_sets: Vec<Vec<usize>> = active
        .iter()
        .map(|g| group_member_indices(g).into_iter().collect())
        .collect();

    // Candidate representative sets: one member per group, deduplicated.
    let mut rep_sets: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    let mut combo = vec![0usize; member_sets.len()];
    'combos: loop {
        let reps: BTreeSet<usize> = combo
            .iter()
            .enumerate()
            .map(|(g, &i)| member_sets[g][i])
            .collect();
        rep_sets.insert(reps);
        for g in (0..combo.len()).rev() {
            combo[g] += 1;
            if combo[g] < member_sets[g].len() {
                continue 'combos;
            }
            combo[g] = 0;
        }
        break;
    }

    // Phase 1: minimum metric-closure MST cost over (representatives ∪
    // Steiner subset); its minimum equals the optimal Steiner cost.
    let mut best_closure = f64::INFINITY;
    let mut finalists: Vec<Vec<usize>> = Vec::new();
    for reps in &rep_sets {
        let others: Vec<usize> = (0..n).filter(|i| !reps.contains(i)).collect();
        for mask in 0u32..(1u32 << others.len()) {
            let mut candidate: Vec<usize> = reps.iter().copied().collect();
            for (bit, &node) in others.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    candidate.push(node);
                }
            }
            candidate.sort_unstable();
            if let Some(cost) = closure_mst_cost(&candidate, &dist) {
                if cost < best_closure {
                    best_closure = cost;
                    finalists.clear();
                }
                if cost == best_closure {
                    finalists.push(candidate);
                }
            }
        }
    }
    if !best_closure.is_finite() {
        // check_reachability should have caught this.
        return Err(GstError::UnreachableGroup(active[0].token.clone()));
    }

    // Phase 2: expand finalists to actual trees and keep the smallest by
    // (cost, node labels, edge labels).
    let member_btrees: Vec<BTreeSet<usize>> =
        active.iter().map(|g| group_member_indices(g)).collect();
    let mut best: Option<(GroupSteinerTree, Vec<String>)> = None;
    for candidate in finalists {
        let tree = expand_candidate(graph, &adj, &candidate, &dist, &next, &member_btrees);
        let key = tree_sort_key(graph, &tree);
        let better = match &best {
            None => true,
            Some((current, current_key)) => {
                match tree.cost.total_cmp(&current.cost) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => key < *current_key,
                }
            }
        };
        if better {
            best = Some((tree, key));
        }
    }
    Ok(best.expect("finalists is nonempty").0)
}

fn tree_sort_key(graph: &ConceptGraph, tree: &GroupSteinerTree) -> Vec<String> {
    let mut key: Vec<String> = tree
        .nodes
        .iter()
        .map(|&n| graph.concept(n).unwrap().label.clone())
        .collect();
    key.sort();
    key
}

/// Prim over the metric closure of `candidate`; None when disconnected.
fn closure_mst_cost(candidate: &[usize], dist: &[Vec<f64>]) -> Option<f64> {
    let m = candidate.len();
    if m <= 1 {
        return Some(0.0);
    }
    let mut in_tree = vec![false; m];
    let mut key = vec![f64::INFINITY; m];
    key[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..m {
        let u = (0..m)
            .filter(|&i| !in_tree[i])
            .min_by(|&a, &b| key[a].total_cmp(&key[b]))?;
        if !key[u].is_finite() {
            return None;
        }
        in_tree[u] = true;
        total += key[u];
        for v in 0..m {
            if !in_tree[v] {
                let d = dist[candidate[u]][candidate[v]];
                if d < key[v] {
                    key[v] = d;
                }
            }
        }
    }
    Some(total)
}

/// Expands a candidate node set into a real tree: closure MST edges become
/// graph paths, their union is spanned minimally, and non-group leaves are
/// pruned.
fn expand_candidate(
    graph: &ConceptGraph,
    adj: &Adjacency,
    candidate: &[usize],
    dist: &[Vec<f64>],
    next: &[Vec<usize>],
    member_sets: &[BTreeSet<usize>],
) -> GroupSteinerTree {
    let m = candidate.len();
    // Prim over the closure, tracking chosen closure edges.
    let mut in_tree = vec![false; m];
    let mut key = vec![f64::INFINITY; m];
    let mut link = vec![usize::MAX; m];
    key[0] = 0.0;
    let mut closure_edges: Vec<(usize, usize)> = Vec::new();
    for _ in 0..m {
        let u = (0..m)
            .filter(|&i| !in_tree[i])
            .min_by(|&a, &b| {
                key[a]
                    .total_cmp(&key[b])
                    .then_with(|| adj.labels[candidate[a]].cmp(adj.labels[candidate[b]]))
            })
            .unwrap();
        in_tree[u] = true;
        if link[u] != usize::MAX {
            closure_edges.push((candidate[link[u]], candidate[u]));
        }
        for v in 0..m {
            if !in_tree[v] && dist[candidate[u]][candidate[v]] < key[v] {
                key[v] = dist[candidate[u]][candidate[v]];
                link[v] = u;
            }
        }
    }
    // Union of real paths.
    let mut union_nodes: BTreeSet<usize> = candidate.iter().copied().collect();
    let mut union_edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (mut u, v) in closure_edges {
        while u != v {
            let hop = next[u][v];
            let key = if u < hop { (u, hop) } else { (hop, u) };
            let weight = graph
                .relation_between(ConceptId(key.0 as u32), ConceptId(key.1 as u32))
                .map(|r| r.weight)
                .unwrap_or(0.0);
            union_edges.insert(key, weight);
            union_nodes.insert(hop);
            u = hop;
        }
    }
    // The union may contain cycles when paths overlap; span it minimally.
    let (mut nodes, mut edges) = span_subgraph(adj, &union_nodes, &union_edges);
    prune_non_group_leaves(&mut nodes, &mut edges, member_sets);
    finish_tree(nodes, edges)
}

/// Minimum spanning tree of a connected subgraph, deterministic by
/// (weight, label) selection.
fn span_subgraph(
    adj: &Adjacency,
    nodes: &BTreeSet<usize>,
    edges: &BTreeMap<(usize, usize), f64>,
) -> (BTreeSet<usize>, BTreeMap<(usize, usize), f64>) {
    let start = *nodes.iter().min_by_key(|&&n| adj.labels[n]).unwrap();
    let mut in_tree: BTreeSet<usize> = [start].into_iter().collect();
    let mut chosen: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    while in_tree.len() < nodes.len() {
        let mut best: Option<(Cost, &str, (usize, usize), f64)> = None;
        for (&(a, b), &w) in edges {
            let (inside, outside) = match (in_tree.contains(&a), in_tree.contains(&b)) {
                (true, false) => (a, b),
                (false, true) => (b, a),
                _ => continue,
            };
            let _ = inside;
            let key = (Cost(w), adj.labels[outside], (a, b), w);
            if best.as_ref().is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                best = Some(key);
            }
        }
        let Some((_, _, edge, w)) = best else { break };
        chosen.insert(edge, w);
        in_tree.insert(edge.0);
        in_tree.insert(edge.1);
    }
    (in_tree, chosen)
}

/// Errors with the first group (token order) that shares no connected
/// component with the first active group.
fn check_reachability(graph: &ConceptGraph, active: &[&TerminalGroup]) -> Result<(), GstError> {
    let adj = Adjacency::new(graph);
    let n = adj.len();
    let mut component = vec![usize::MAX; n];
    let mut current = 0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            if component[u] != usize::MAX {
                continue;
            }
            component[u] = current;
            for &(v, _) in &adj.neighbors[u] {
                if component[v] == usize::MAX {
                    stack.push(v);
                }
            }
        }
        current += 1;
    }
    let comp_sets: Vec<BTreeSet<usize>> = active
        .iter()
        .map(|g| g.members().iter().map(|id| component[id.index()]).collect())
        .collect();
    let mut shared = comp_sets[0].clone();
    for (i, comps) in comp_sets.iter().enumerate().skip(1) {
        shared = shared.intersection(comps).copied().collect();
        if shared.is_empty() {
            return Err(GstError::UnreachableGroup(active[i].token.clone()));
        }
    }
    Ok(())
}

/// Tree nodes ordered for retrieval: anchors first by descending anchor
/// score (ties by label), then connector nodes by descending tree degree
/// (ties by label).
pub fn relevant_concepts(
    graph: &ConceptGraph,
    tree: &GroupSteinerTree,
    groups: &TerminalGroups,
) -> Vec<ConceptId> {
    let label = |id: ConceptId| graph.concept(id).unwrap().label.as_str();
    let mut anchors: Vec<(f64, ConceptId)> = Vec::new();
    let mut connectors: Vec<ConceptId> = Vec::new();
    for &node in &tree.nodes {
        match groups.anchor_score(node) {
            Some(score) => anchors.push((score, node)),
            None => connectors.push(node),
        }
    }
    anchors.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then_with(|| label(a.1).cmp(label(b.1)))
    });
    connectors.sort_by(|a, b| {
        tree.degree(*b)
            .cmp(&tree.degree(*a))
            .then_with(|| label(*a).cmp(label(*b)))
    });
    anchors
        .into_iter()
        .map(|(_, id)| id)
        .chain(connectors)
        .collect()
}
