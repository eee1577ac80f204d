//! Label-removal mechanisms.
//!
//! Each mechanism selects a set of nodes and hides their labels at every
//! training step, leaving the test step untouched. Selection is by uniform
//! chance, by weighted degree, by breadth-first growth from a value- or
//! geometry-defined seed node, or proportional to an externally estimated
//! per-node missingness distribution.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{weighted_degree, LabelMask, TemporalAttributedGraph};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    /// Uniform without replacement.
    Random,
    /// Ascending weighted degree: structurally least important first.
    WeaklyConnected,
    /// Descending weighted degree.
    StronglyConnected,
    /// Descending degree but never two adjacent nodes, so every removed
    /// node keeps its full neighborhood.
    StronglyConnectedExclNeighbors,
    /// Breadth-first region grown from the center, where mid-range values
    /// sit.
    MidRangeY,
    /// Breadth-first region grown from a mid-value corner.
    RemoteNeighborhood,
    /// Breadth-first region grown from the largest-value node.
    ExtremeY,
    /// Sampling proportional to a supplied per-node missingness
    /// distribution.
    NaturalDistribution,
}

impl MechanismKind {
    pub fn label(&self) -> &'static str {
        match self {
            MechanismKind::Random => "random",
            MechanismKind::WeaklyConnected => "weakly_connected",
            MechanismKind::StronglyConnected => "strongly_connected",
            MechanismKind::StronglyConnectedExclNeighbors => "strongly_connected_excl_neighbors",
            MechanismKind::MidRangeY => "mid_range_y",
            MechanismKind::RemoteNeighborhood => "remote_neighborhood",
            MechanismKind::ExtremeY => "extreme_y",
            MechanismKind::NaturalDistribution => "natural_distribution",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mechanism {
    pub kind: MechanismKind,
    /// Fraction of nodes to remove, in [0, 0.8].
    pub fraction: f64,
    pub seed: u64,
    /// Per-node selection weights, required by `NaturalDistribution`.
    pub natural_probs: Option<Vec<f64>>,
}

impl Mechanism {
    pub fn new(kind: MechanismKind, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..=0.8).contains(&fraction) {
            return Err(Error::InvalidConfig(format!(
                "missing fraction {fraction} outside [0, 0.8]"
            )));
        }
        Ok(Mechanism {
            kind,
            fraction,
            seed,
            natural_probs: None,
        })
    }

    pub fn with_natural_probs(mut self, probs: Vec<f64>) -> Self {
        self.natural_probs = Some(probs);
        self
    }
}

/// Result of applying a mechanism: the mask, the removed nodes, and whether
/// the independent-set mechanism had to fall back to plain degree order.
#[derive(Debug, Clone)]
pub struct AppliedMask {
    pub mask: LabelMask,
    pub removed: Vec<usize>,
    pub fallback_used: bool,
}

/// Node neighbor lists over the union of all layers at the training steps.
fn adjacency(graph: &TemporalAttributedGraph, train_steps: &[usize]) -> Vec<Vec<usize>> {
    let n = graph.n_nodes();
    let mut adj = vec![Vec::new(); n];
    let mut seen = std::collections::HashSet::new();
    for &t in train_steps {
        for layer in graph.layers_at(t) {
            for &(i, j, _) in layer.edges() {
                if seen.insert((i, j)) {
                    adj[i as usize].push(j as usize);
                    adj[j as usize].push(i as usize);
                }
            }
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Sum of the weighted degree over the training steps; for static structure
/// this orders nodes exactly like the per-step degree.
fn train_degrees(graph: &TemporalAttributedGraph, train_steps: &[usize]) -> Vec<f64> {
    (0..graph.n_nodes())
        .map(|i| train_steps.iter().map(|&t| weighted_degree(graph, i, t)).sum())
        .collect()
}

/// Mean label per node over the training steps where present.
fn mean_train_labels(graph: &TemporalAttributedGraph, train_steps: &[usize]) -> Vec<f64> {
    (0..graph.n_nodes())
        .map(|i| {
            let vals: Vec<f64> = train_steps
                .iter()
                .filter_map(|&t| graph.label(t, i))
                .collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect()
}

/// Breadth-first region of `target` nodes from a seed; each level is
/// expanded in ascending node order so the frontier order is
/// (distance, index). If a component runs dry the walk restarts from the
/// lowest-index unvisited node.
fn bfs_region(adj: &[Vec<usize>], n: usize, seed: usize, target: usize) -> Vec<usize> {
    let mut visited = vec![false; n];
    let mut picked = Vec::with_capacity(target);
    let mut queue = VecDeque::new();
    queue.push_back(seed);
    visited[seed] = true;
    while picked.len() < target {
        match queue.pop_front() {
            Some(i) => {
                picked.push(i);
                for &j in &adj[i] {
                    if !visited[j] {
                        visited[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            None => match (0..n).find(|&i| !visited[i]) {
                Some(next) => {
                    visited[next] = true;
                    queue.push_back(next);
                }
                None => break,
            },
        }
    }
    picked
}

/// Index of the node whose mean label sits at the given quantile.
fn quantile_node(means: &[f64], q: f64) -> usize {
    let mut idx: Vec<usize> = (0..means.len()).filter(|&i| means[i].is_finite()).collect();
    idx.sort_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap().then(a.cmp(&b)));
    idx[((idx.len() - 1) as f64 * q).round() as usize]
}

fn select_nodes(
    mech: &Mechanism,
    graph: &TemporalAttributedGraph,
    train_steps: &[usize],
    target: usize,
) -> Result<(Vec<usize>, bool)> {
    let n = graph.n_nodes();
    let mut fallback = false;
    let selected = match mech.kind {
        MechanismKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(mech.seed);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            idx.truncate(target);
            idx
        }
        MechanismKind::WeaklyConnected | MechanismKind::StronglyConnected => {
            let degrees = train_degrees(graph, train_steps);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                let ord = degrees[a].partial_cmp(&degrees[b]).unwrap();
                let ord = if mech.kind == MechanismKind::StronglyConnected {
                    ord.reverse()
                } else {
                    ord
                };
                ord.then(a.cmp(&b))
            });
            idx.truncate(target);
            idx
        }
        MechanismKind::StronglyConnectedExclNeighbors => {
            let degrees = train_degrees(graph, train_steps);
            let adj = adjacency(graph, train_steps);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                degrees[b]
                    .partial_cmp(&degrees[a])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut blocked = vec![false; n];
            let mut picked = Vec::with_capacity(target);
            for &i in &order {
                if picked.len() == target {
                    break;
                }
                if !blocked[i] {
                    picked.push(i);
                    blocked[i] = true;
                    for &j in &adj[i] {
                        blocked[j] = true;
                    }
                }
            }
            if picked.len() < target {
                // Independent-set budget exhausted: top up by plain degree
                // order and flag the fallback.
                fallback = true;
                let chosen: std::collections::HashSet<usize> = picked.iter().copied().collect();
                for &i in &order {
                    if picked.len() == target {
                        break;
                    }
                    if !chosen.contains(&i) {
                        picked.push(i);
                    }
                }
            }
            picked
        }
        MechanismKind::MidRangeY | MechanismKind::RemoteNeighborhood | MechanismKind::ExtremeY => {
            let adj = adjacency(graph, train_steps);
            let means = mean_train_labels(graph, train_steps);
            let seed_node = match (mech.kind, graph.coords()) {
                (MechanismKind::MidRangeY, Some(coords)) => {
                    // Node nearest the coordinate centroid.
                    let cx = coords.iter().map(|c| c.0).sum::<f64>() / n as f64;
                    let cy = coords.iter().map(|c| c.1).sum::<f64>() / n as f64;
                    (0..n)
                        .min_by(|&a, &b| {
                            let da = (coords[a].0 - cx).powi(2) + (coords[a].1 - cy).powi(2);
                            let db = (coords[b].0 - cx).powi(2) + (coords[b].1 - cy).powi(2);
                            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                        })
                        .unwrap()
                }
                (MechanismKind::RemoteNeighborhood, Some(coords)) => {
                    // Mid-value corner: maximal first coordinate spread with
                    // minimal (row + col); ties by node index.
                    let max0 = coords.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
                    let max1 = coords.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
                    let corner_a = (0..n)
                        .min_by(|&a, &b| {
                            let da = coords[a].0.powi(2) + (coords[a].1 - max1).powi(2);
                            let db = coords[b].0.powi(2) + (coords[b].1 - max1).powi(2);
                            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                        })
                        .unwrap();
                    let corner_b = (0..n)
                        .min_by(|&a, &b| {
                            let da = (coords[a].0 - max0).powi(2) + coords[a].1.powi(2);
                            let db = (coords[b].0 - max0).powi(2) + coords[b].1.powi(2);
                            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                        })
                        .unwrap();
                    let sum = |i: usize| coords[i].0 + coords[i].1;
                    if sum(corner_a) < sum(corner_b)
                        || (sum(corner_a) == sum(corner_b) && corner_a <= corner_b)
                    {
                        corner_a
                    } else {
                        corner_b
                    }
                }
                (MechanismKind::ExtremeY, _) => {
                    // Largest mean label; on generated grids this is exactly
                    // the maximum-value corner.
                    (0..n)
                        .filter(|&i| means[i].is_finite())
                        .max_by(|&a, &b| {
                            means[a]
                                .partial_cmp(&means[b])
                                .unwrap()
                                .then(b.cmp(&a))
                        })
                        .ok_or(Error::EmptyLabeledSet)?
                }
                (MechanismKind::MidRangeY, None) => quantile_node(&means, 0.5),
                (MechanismKind::RemoteNeighborhood, None) => quantile_node(&means, 0.25),
                _ => unreachable!(),
            };
            bfs_region(&adj, n, seed_node, target)
        }
        MechanismKind::NaturalDistribution => {
            let probs = mech.natural_probs.as_ref().ok_or_else(|| {
                Error::InvalidConfig(
                    "natural_distribution mechanism needs a per-node probability vector".into(),
                )
            })?;
            if probs.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "natural distribution length",
                    expected: n,
                    got: probs.len(),
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mech.seed);
            let mut weights = probs.clone();
            let mut picked = Vec::with_capacity(target);
            for _ in 0..target {
                let total: f64 = weights.iter().sum();
                if total <= 0.0 {
                    break;
                }
                let mut u = rng.random::<f64>() * total;
                let mut chosen = n - 1;
                for (i, &w) in weights.iter().enumerate() {
                    if w <= 0.0 {
                        continue;
                    }
                    u -= w;
                    if u <= 0.0 {
                        chosen = i;
                        break;
                    }
                }
                picked.push(chosen);
                weights[chosen] = 0.0;
            }
            picked
        }
    };
    Ok((selected, fallback))
}

/// Applies a mechanism: ⌈fraction·N⌉ nodes become unlabeled at every
/// training step; every other entry keeps its observed status from the graph.
pub fn apply(
    mech: &Mechanism,
    graph: &TemporalAttributedGraph,
    train_steps: &[usize],
) -> Result<AppliedMask> {
    if !(0.0..=0.8).contains(&mech.fraction) {
        return Err(Error::InvalidConfig(format!(
            "missing fraction {} outside [0, 0.8]",
            mech.fraction
        )));
    }
    for &t in train_steps {
        if t >= graph.n_steps() {
            return Err(Error::IndexOutOfBounds {
                index: t,
                bound: graph.n_steps(),
            });
        }
    }
    let n = graph.n_nodes();
    let target = ((mech.fraction * n as f64).ceil() as usize).min(n);
    let (mut removed, fallback_used) = select_nodes(mech, graph, train_steps, target)?;
    removed.sort_unstable();
    let mut mask = LabelMask::from_graph(graph);
    for &t in train_steps {
        for &i in &removed {
            mask.set_observed(t, i, false);
        }
    }
    Ok(AppliedMask {
        mask,
        removed,
        fallback_used,
    })
}

/// Per-node empirical missingness frequency with add-one smoothing over the
/// observed history, normalized into a sampling distribution.
pub fn estimate_natural_distribution(history: &LabelMask) -> Vec<f64> {
    let n = history.n_nodes();
    let mut counts = vec![1.0; n];
    for t in 0..history.n_steps() {
        for i in 0..n {
            if !history.is_observed(t, i) {
                counts[i] += 1.0;
            }
        }
    }
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

/// Writes the missing (node, step) pairs as a text sidecar.
pub fn write_mask_file(path: &Path, mask: &LabelMask) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "mask {} {}", mask.n_nodes(), mask.n_steps())?;
    for t in 0..mask.n_steps() {
        for i in 0..mask.n_nodes() {
            if !mask.is_observed(t, i) {
                writeln!(w, "missing {i} {t}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_mask_file(path: &Path) -> Result<LabelMask> {
    let reader = BufReader::new(File::open(path)?);
    let mut mask: Option<LabelMask> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts[0] {
            "mask" if parts.len() == 3 => {
                let n = parts[1].parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: "bad node count".into(),
                })?;
                let t = parts[2].parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: "bad step count".into(),
                })?;
                mask = Some(LabelMask::all_observed(n, t));
            }
            "missing" if parts.len() == 3 => {
                let m = mask.as_mut().ok_or(Error::Parse {
                    line: lineno,
                    message: "missing line before mask header".into(),
                })?;
                let i: usize = parts[1].parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: "bad node".into(),
                })?;
                let t: usize = parts[2].parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: "bad step".into(),
                })?;
                if i >= m.n_nodes() || t >= m.n_steps() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "node or step out of range".into(),
                    });
                }
                m.set_observed(t, i, false);
            }
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: "unknown mask line".into(),
                })
            }
        }
    }
    mask.ok_or(Error::Parse {
        line: 0,
        message: "missing mask header".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Similarity, SimilarityLayer};
    use crate::synthgen::{generate, SyntheticSpec};

    fn path_graph(weights: &[f64]) -> TemporalAttributedGraph {
        let n = weights.len() + 1;
        let edges: Vec<(usize, usize, f64)> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (i, i + 1, w))
            .collect();
        let layer = SimilarityLayer::new(n, edges).unwrap();
        TemporalAttributedGraph::new(
            n,
            2,
            1,
            vec![vec![0.0; n]; 2],
            vec![vec![Some(1.0); n]; 2],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap()
    }

    #[test]
    fn fraction_zero_removes_nothing() {
        let g = path_graph(&[1.0, 1.0, 1.0]);
        let mech = Mechanism::new(MechanismKind::Random, 0.0, 1).unwrap();
        let out = apply(&mech, &g, &[0]).unwrap();
        assert!(out.removed.is_empty());
        assert_eq!(out.mask.observed_count(), 8);
    }

    #[test]
    fn weakly_connected_removes_path_endpoints() {
        // Unit-weight path of 4: endpoints have degree 1, middle nodes 2.
        let g = path_graph(&[1.0, 1.0, 1.0]);
        let mech = Mechanism::new(MechanismKind::WeaklyConnected, 0.5, 1).unwrap();
        let out = apply(&mech, &g, &[0]).unwrap();
        assert_eq!(out.removed, vec![0, 3]);
    }

    #[test]
    fn excl_neighbors_selection_is_an_independent_set() {
        let spec = SyntheticSpec {
            rows: 5,
            cols: 5,
            seed: 2,
            ..SyntheticSpec::default()
        };
        let data = generate(&spec).unwrap();
        let mech =
            Mechanism::new(MechanismKind::StronglyConnectedExclNeighbors, 0.2, 3).unwrap();
        let out = apply(&mech, &data.graph, &[0, 1, 2, 3]).unwrap();
        assert!(!out.fallback_used);
        assert_eq!(out.removed.len(), 5);
        // Brute-force adjacency check.
        let adj = adjacency(&data.graph, &[0]);
        for &i in &out.removed {
            for &j in &out.removed {
                assert!(
                    i == j || !adj[i].contains(&j),
                    "{i} and {j} are adjacent"
                );
            }
        }
    }

    #[test]
    fn removed_nodes_are_hidden_at_all_training_steps_only() {
        let spec = SyntheticSpec {
            rows: 4,
            cols: 4,
            seed: 9,
            ..SyntheticSpec::default()
        };
        let data = generate(&spec).unwrap();
        let g = &data.graph;
        let train: Vec<usize> = (0..g.n_steps() - 1).collect();
        let mech = Mechanism::new(MechanismKind::Random, 0.4, 7).unwrap();
        let out = apply(&mech, g, &train).unwrap();
        assert_eq!(out.removed.len(), (0.4f64 * 16.0).ceil() as usize);
        for &i in &out.removed {
            for &t in &train {
                assert!(!out.mask.is_observed(t, i));
            }
            assert!(out.mask.is_observed(g.n_steps() - 1, i));
        }
    }

    #[test]
    fn bfs_kinds_produce_connected_regions() {
        let spec = SyntheticSpec {
            rows: 6,
            cols: 6,
            seed: 4,
            ..SyntheticSpec::default()
        };
        let data = generate(&spec).unwrap();
        for kind in [
            MechanismKind::MidRangeY,
            MechanismKind::RemoteNeighborhood,
            MechanismKind::ExtremeY,
        ] {
            let mech = Mechanism::new(kind, 0.3, 1).unwrap();
            let out = apply(&mech, &data.graph, &[0, 1, 2, 3]).unwrap();
            // Connectivity by BFS inside the removed set.
            let adj = adjacency(&data.graph, &[0]);
            let inside: std::collections::HashSet<usize> =
                out.removed.iter().copied().collect();
            let mut seen = std::collections::HashSet::new();
            let mut queue = VecDeque::from([out.removed[0]]);
            seen.insert(out.removed[0]);
            while let Some(i) = queue.pop_front() {
                for &j in &adj[i] {
                    if inside.contains(&j) && seen.insert(j) {
                        queue.push_back(j);
                    }
                }
            }
            assert_eq!(seen.len(), out.removed.len(), "{kind:?} region disconnected");
        }
    }

    #[test]
    fn extreme_y_region_contains_the_maximum() {
        let spec = SyntheticSpec {
            rows: 6,
            cols: 6,
            seed: 12,
            ..SyntheticSpec::default()
        };
        let data = generate(&spec).unwrap();
        let g = &data.graph;
        let means = mean_train_labels(g, &[0, 1, 2, 3]);
        let argmax = (0..g.n_nodes())
            .max_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap())
            .unwrap();
        let mech = Mechanism::new(MechanismKind::ExtremeY, 0.2, 1).unwrap();
        let out = apply(&mech, g, &[0, 1, 2, 3]).unwrap();
        assert!(out.removed.contains(&argmax));
    }

    #[test]
    fn natural_distribution_prefers_high_probability_nodes() {
        let g = path_graph(&[1.0, 1.0, 1.0]);
        let probs = vec![0.97, 0.01, 0.01, 0.01];
        let mut hits = 0;
        for seed in 0..200 {
            let mech = Mechanism::new(MechanismKind::NaturalDistribution, 0.25, seed)
                .unwrap()
                .with_natural_probs(probs.clone());
            let out = apply(&mech, &g, &[0]).unwrap();
            if out.removed == vec![0] {
                hits += 1;
            }
        }
        assert!(hits > 150, "node 0 selected only {hits}/200 times");
    }

    #[test]
    fn natural_distribution_smoothing_matches_hand_computation() {
        // 3 nodes over 4 steps missing (0, 2, 4) times → weights (1, 3, 5)/9.
        let mut mask = LabelMask::all_observed(3, 4);
        mask.set_observed(0, 1, false);
        mask.set_observed(1, 1, false);
        mask.set_observed(0, 2, false);
        mask.set_observed(1, 2, false);
        mask.set_observed(2, 2, false);
        mask.set_observed(3, 2, false);
        let p = estimate_natural_distribution(&mask);
        assert_eq!(p, vec![1.0 / 9.0, 3.0 / 9.0, 5.0 / 9.0]);
    }

    #[test]
    fn determinism_per_seed() {
        let spec = SyntheticSpec {
            rows: 5,
            cols: 5,
            seed: 8,
            ..SyntheticSpec::default()
        };
        let data = generate(&spec).unwrap();
        let mech = Mechanism::new(MechanismKind::Random, 0.4, 123).unwrap();
        let a = apply(&mech, &data.graph, &[0, 1]).unwrap();
        let b = apply(&mech, &data.graph, &[0, 1]).unwrap();
        assert_eq!(a.removed, b.removed);
        assert_eq!(a.mask, b.mask);
    }

    #[test]
    fn mask_file_round_trip() {
        let mut mask = LabelMask::all_observed(4, 3);
        mask.set_observed(1, 2, false);
        mask.set_observed(0, 0, false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.txt");
        write_mask_file(&path, &mask).unwrap();
        assert_eq!(read_mask_file(&path).unwrap(), mask);
    }
}
