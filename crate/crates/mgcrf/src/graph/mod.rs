//! Attributed weighted temporal graphs and assembly of the Gaussian CRF
//! precision system.
//!
//! A graph holds N nodes observed over T time steps. Each (step, node) carries
//! a feature vector of dimension D and an optional label. Structure is given
//! by L sparse symmetric similarity layers, either one static set of layers
//! reused at every step or a separate set per step. Node indexing is stable
//! across steps: node `i` at step `t` is the same entity at step `t'`.

mod io;

pub use io::{read_graph_file, write_graph_file, GraphFile};

use crate::error::{Error, Result};
use crate::linalg::SymBand;

/// One sparse symmetric similarity matrix with zero diagonal and
/// nonnegative weights. Zero-weight edges are dropped at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityLayer {
    n: usize,
    edges: Vec<(u32, u32, f64)>,
    degrees: Vec<f64>,
}

impl SimilarityLayer {
    /// Builds a layer from undirected edges (i, j, w). Each pair may appear
    /// once in either orientation; self-loops, negative weights, and
    /// duplicates are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut canon: Vec<(u32, u32, f64)> = Vec::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfBounds {
                    index: i.max(j),
                    bound: n,
                });
            }
            if i == j {
                return Err(Error::SelfLoop { node: i });
            }
            if w < 0.0 || !w.is_finite() {
                return Err(Error::NegativeWeight { i, j, weight: w });
            }
            if w == 0.0 {
                continue;
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            canon.push((a as u32, b as u32, w));
        }
        canon.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        for pair in canon.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::DuplicateEdge {
                    i: pair[0].0 as usize,
                    j: pair[0].1 as usize,
                });
            }
        }
        let mut degrees = vec![0.0; n];
        for &(i, j, w) in &canon {
            degrees[i as usize] += w;
            degrees[j as usize] += w;
        }
        Ok(SimilarityLayer {
            n,
            edges: canon,
            degrees,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Canonical edge list, i < j, weights > 0.
    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    /// Row sum Σ_h S_ih for one node.
    pub fn degree(&self, node: usize) -> f64 {
        self.degrees[node]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }
}

/// Similarity structure of the temporal graph: one layer set reused at all
/// steps, or one layer set per step.
#[derive(Debug, Clone, PartialEq)]
pub enum Similarity {
    Static(Vec<SimilarityLayer>),
    PerStep(Vec<Vec<SimilarityLayer>>),
}

impl Similarity {
    pub fn n_layers(&self) -> usize {
        match self {
            Similarity::Static(layers) => layers.len(),
            Similarity::PerStep(steps) => steps.first().map_or(0, |l| l.len()),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Similarity::Static(_))
    }

    pub fn layers_at(&self, step: usize) -> &[SimilarityLayer] {
        match self {
            Similarity::Static(layers) => layers,
            Similarity::PerStep(steps) => &steps[step],
        }
    }
}

/// Attributed weighted temporal graph with optional labels.
#[derive(Debug, Clone)]
pub struct TemporalAttributedGraph {
    n_nodes: usize,
    n_steps: usize,
    feat_dim: usize,
    /// Per step, row-major N×D feature matrix.
    features: Vec<Vec<f64>>,
    /// Per step, per node. Missing labels are absent values, never sentinels.
    labels: Vec<Vec<Option<f64>>>,
    similarity: Similarity,
    /// Optional per-node planar coordinates (grid row/col or lat/lon).
    coords: Option<Vec<(f64, f64)>>,
}

impl TemporalAttributedGraph {
    pub fn new(
        n_nodes: usize,
        n_steps: usize,
        feat_dim: usize,
        features: Vec<Vec<f64>>,
        labels: Vec<Vec<Option<f64>>>,
        similarity: Similarity,
        coords: Option<Vec<(f64, f64)>>,
    ) -> Result<Self> {
        if features.len() != n_steps {
            return Err(Error::DimensionMismatch {
                context: "feature frames vs steps",
                expected: n_steps,
                got: features.len(),
            });
        }
        for frame in &features {
            if frame.len() != n_nodes * feat_dim {
                return Err(Error::DimensionMismatch {
                    context: "feature frame length",
                    expected: n_nodes * feat_dim,
                    got: frame.len(),
                });
            }
        }
        if labels.len() != n_steps {
            return Err(Error::DimensionMismatch {
                context: "label frames vs steps",
                expected: n_steps,
                got: labels.len(),
            });
        }
        for frame in &labels {
            if frame.len() != n_nodes {
                return Err(Error::DimensionMismatch {
                    context: "label frame length",
                    expected: n_nodes,
                    got: frame.len(),
                });
            }
        }
        match &similarity {
            Similarity::Static(layers) => {
                for l in layers {
                    if l.n() != n_nodes {
                        return Err(Error::DimensionMismatch {
                            context: "similarity layer size",
                            expected: n_nodes,
                            got: l.n(),
                        });
                    }
                }
            }
            Similarity::PerStep(steps) => {
                if steps.len() != n_steps {
                    return Err(Error::DimensionMismatch {
                        context: "per-step similarity vs steps",
                        expected: n_steps,
                        got: steps.len(),
                    });
                }
                let l0 = steps.first().map_or(0, |l| l.len());
                for s in steps {
                    if s.len() != l0 {
                        return Err(Error::DimensionMismatch {
                            context: "layer count per step",
                            expected: l0,
                            got: s.len(),
                        });
                    }
                    for l in s {
                        if l.n() != n_nodes {
                            return Err(Error::DimensionMismatch {
                                context: "similarity layer size",
                                expected: n_nodes,
                                got: l.n(),
                            });
                        }
                    }
                }
            }
        }
        if let Some(c) = &coords {
            if c.len() != n_nodes {
                return Err(Error::DimensionMismatch {
                    context: "coordinates length",
                    expected: n_nodes,
                    got: c.len(),
                });
            }
        }
        Ok(TemporalAttributedGraph {
            n_nodes,
            n_steps,
            feat_dim,
            features,
            labels,
            similarity,
            coords,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn feat_dim(&self) -> usize {
        self.feat_dim
    }

    pub fn n_layers(&self) -> usize {
        self.similarity.n_layers()
    }

    pub fn similarity(&self) -> &Similarity {
        &self.similarity
    }

    pub fn layers_at(&self, step: usize) -> &[SimilarityLayer] {
        self.similarity.layers_at(step)
    }

    pub fn coords(&self) -> Option<&[(f64, f64)]> {
        self.coords.as_deref()
    }

    pub fn feature(&self, step: usize, node: usize) -> &[f64] {
        &self.features[step][node * self.feat_dim..(node + 1) * self.feat_dim]
    }

    pub fn label(&self, step: usize, node: usize) -> Option<f64> {
        self.labels[step][node]
    }

    pub fn labels_at(&self, step: usize) -> &[Option<f64>] {
        &self.labels[step]
    }

    /// Copy of the graph restricted to a contiguous step range.
    pub fn restrict_steps(&self, steps: std::ops::Range<usize>) -> TemporalAttributedGraph {
        let similarity = match &self.similarity {
            Similarity::Static(layers) => Similarity::Static(layers.clone()),
            Similarity::PerStep(frames) => Similarity::PerStep(frames[steps.clone()].to_vec()),
        };
        TemporalAttributedGraph {
            n_nodes: self.n_nodes,
            n_steps: steps.len(),
            feat_dim: self.feat_dim,
            features: self.features[steps.clone()].to_vec(),
            labels: self.labels[steps].to_vec(),
            similarity,
            coords: self.coords.clone(),
        }
    }

    /// Copy of the graph with every label replaced.
    pub fn with_labels(&self, labels: Vec<Vec<Option<f64>>>) -> Result<TemporalAttributedGraph> {
        TemporalAttributedGraph::new(
            self.n_nodes,
            self.n_steps,
            self.feat_dim,
            self.features.clone(),
            labels,
            self.similarity.clone(),
            self.coords.clone(),
        )
    }
}

/// Total weighted degree Σ_l Σ_h S^{(l)}_{ih} of a node at a step.
pub fn weighted_degree(graph: &TemporalAttributedGraph, node: usize, step: usize) -> f64 {
    graph
        .layers_at(step)
        .iter()
        .map(|layer| layer.degree(node))
        .sum()
}

/// Per-(step, node) observed/missing indicator. `observed` may only be true
/// where the graph actually carries a label; mechanisms produce masks that
/// hide labels, never invent them.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    n_nodes: usize,
    n_steps: usize,
    observed: Vec<bool>,
}

impl LabelMask {
    pub fn new(n_nodes: usize, n_steps: usize, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != n_nodes * n_steps {
            return Err(Error::DimensionMismatch {
                context: "mask length",
                expected: n_nodes * n_steps,
                got: observed.len(),
            });
        }
        Ok(LabelMask {
            n_nodes,
            n_steps,
            observed,
        })
    }

    /// Mask marking exactly the (step, node) pairs where the graph has a label.
    pub fn from_graph(graph: &TemporalAttributedGraph) -> Self {
        let mut observed = Vec::with_capacity(graph.n_nodes() * graph.n_steps());
        for t in 0..graph.n_steps() {
            for i in 0..graph.n_nodes() {
                observed.push(graph.label(t, i).is_some());
            }
        }
        LabelMask {
            n_nodes: graph.n_nodes(),
            n_steps: graph.n_steps(),
            observed,
        }
    }

    pub fn all_observed(n_nodes: usize, n_steps: usize) -> Self {
        LabelMask {
            n_nodes,
            n_steps,
            observed: vec![true; n_nodes * n_steps],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn is_observed(&self, step: usize, node: usize) -> bool {
        self.observed[step * self.n_nodes + node]
    }

    pub fn set_observed(&mut self, step: usize, node: usize, value: bool) {
        self.observed[step * self.n_nodes + node] = value;
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn labeled_nodes_at(&self, step: usize) -> Vec<usize> {
        (0..self.n_nodes)
            .filter(|&i| self.is_observed(step, i))
            .collect()
    }

    pub fn unlabeled_nodes_at(&self, step: usize) -> Vec<usize> {
        (0..self.n_nodes)
            .filter(|&i| !self.is_observed(step, i))
            .collect()
    }

    pub fn restrict_steps(&self, steps: std::ops::Range<usize>) -> LabelMask {
        LabelMask {
            n_nodes: self.n_nodes,
            n_steps: steps.len(),
            observed: self.observed[steps.start * self.n_nodes..steps.end * self.n_nodes].to_vec(),
        }
    }

    /// Checks that every observed entry has a label in the graph.
    pub fn validate_against(&self, graph: &TemporalAttributedGraph) -> Result<()> {
        if self.n_nodes != graph.n_nodes() || self.n_steps != graph.n_steps() {
            return Err(Error::DimensionMismatch {
                context: "mask vs graph shape",
                expected: graph.n_nodes() * graph.n_steps(),
                got: self.n_nodes * self.n_steps,
            });
        }
        for t in 0..self.n_steps {
            for i in 0..self.n_nodes {
                if self.is_observed(t, i) && graph.label(t, i).is_none() {
                    return Err(Error::MissingLabel { step: t, node: i });
                }
            }
        }
        Ok(())
    }
}

/// Positive association/interaction weights stored in the log domain, so the
/// effective parameters α_k = exp(log_alpha_k) and β_l = exp(log_beta_l)
/// are positive by construction and the precision matrix stays definite.
#[derive(Debug, Clone, PartialEq)]
pub struct GcrfParams {
    pub log_alpha: Vec<f64>,
    pub log_beta: Vec<f64>,
}

impl GcrfParams {
    /// α = β = 1, the standard initialization.
    pub fn unit(k: usize, l: usize) -> Self {
        GcrfParams {
            log_alpha: vec![0.0; k],
            log_beta: vec![0.0; l],
        }
    }

    pub fn from_logs(log_alpha: Vec<f64>, log_beta: Vec<f64>) -> Self {
        GcrfParams {
            log_alpha,
            log_beta,
        }
    }

    pub fn n_predictors(&self) -> usize {
        self.log_alpha.len()
    }

    pub fn n_layers(&self) -> usize {
        self.log_beta.len()
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.log_alpha[k].exp()
    }

    pub fn beta(&self, l: usize) -> f64 {
        self.log_beta[l].exp()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.log_alpha.iter().map(|v| v.exp()).collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.log_beta.iter().map(|v| v.exp()).collect()
    }

    /// Flattened (log_alpha, log_beta) for the optimizer.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.log_alpha.clone();
        v.extend_from_slice(&self.log_beta);
        v
    }

    pub fn from_vector(v: &[f64], k: usize, l: usize) -> Self {
        GcrfParams {
            log_alpha: v[..k].to_vec(),
            log_beta: v[k..k + l].to_vec(),
        }
    }
}

/// Outputs of the K unstructured predictors, one value per (step, node),
/// flattened as step-major vectors of length N·T.
#[derive(Debug, Clone, PartialEq)]
pub struct UnstructuredPrediction {
    n_nodes: usize,
    n_steps: usize,
    values: Vec<Vec<f64>>,
}

impl UnstructuredPrediction {
    pub fn new(n_nodes: usize, n_steps: usize, values: Vec<Vec<f64>>) -> Result<Self> {
        for v in &values {
            if v.len() != n_nodes * n_steps {
                return Err(Error::DimensionMismatch {
                    context: "unstructured prediction length",
                    expected: n_nodes * n_steps,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidValue(
                    "unstructured prediction contains a non-finite value".into(),
                ));
            }
        }
        Ok(UnstructuredPrediction {
            n_nodes,
            n_steps,
            values,
        })
    }

    pub fn n_predictors(&self) -> usize {
        self.values.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn value(&self, k: usize, step: usize, node: usize) -> f64 {
        self.values[k][step * self.n_nodes + node]
    }

    pub fn predictor(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn restrict_steps(&self, steps: std::ops::Range<usize>) -> UnstructuredPrediction {
        let values = self
            .values
            .iter()
            .map(|v| v[steps.start * self.n_nodes..steps.end * self.n_nodes].to_vec())
            .collect();
        UnstructuredPrediction {
            n_nodes: self.n_nodes,
            n_steps: steps.len(),
            values,
        }
    }
}

/// The assembled Gaussian system: sparse symmetric positive definite Q of
/// order N·T, block-diagonal with one band block per time step, and the
/// linear term b with b_i = 2·Σ_k α_k R_k.
#[derive(Debug, Clone)]
pub struct PrecisionSystem {
    n_nodes: usize,
    n_steps: usize,
    blocks: Vec<SymBand>,
    b: Vec<f64>,
}

impl PrecisionSystem {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn order(&self) -> usize {
        self.n_nodes * self.n_steps
    }

    pub fn block(&self, step: usize) -> &SymBand {
        &self.blocks[step]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn b_block(&self, step: usize) -> &[f64] {
        &self.b[step * self.n_nodes..(step + 1) * self.n_nodes]
    }

    /// Global entry (i, j) of Q; zero across time blocks.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (ti, tj) = (i / self.n_nodes, j / self.n_nodes);
        if ti != tj {
            return 0.0;
        }
        self.blocks[ti].get(i % self.n_nodes, j % self.n_nodes)
    }

    /// Mean of the Gaussian: solves Q·μ = b per block.
    pub fn mean(&self) -> Result<Vec<f64>> {
        let mut mu = Vec::with_capacity(self.order());
        for t in 0..self.n_steps {
            let chol = self.blocks[t].cholesky()?;
            mu.extend(chol.solve(self.b_block(t)));
        }
        Ok(mu)
    }
}

/// Assembles Q and b from the graph, parameters, and unstructured outputs:
/// Q_ii = 2Σ_k α_k + 2Σ_l β_l Σ_h S^{(l)}_{ih}, Q_ij = −2Σ_l β_l S^{(l)}_{ij}
/// within a time block, and b_i = 2Σ_k α_k R_k,i.
pub fn assemble_precision(
    graph: &TemporalAttributedGraph,
    params: &GcrfParams,
    r: &UnstructuredPrediction,
) -> Result<PrecisionSystem> {
    if params.n_predictors() != r.n_predictors() {
        return Err(Error::DimensionMismatch {
            context: "alpha count vs predictors",
            expected: r.n_predictors(),
            got: params.n_predictors(),
        });
    }
    if params.n_layers() != graph.n_layers() {
        return Err(Error::DimensionMismatch {
            context: "beta count vs similarity layers",
            expected: graph.n_layers(),
            got: params.n_layers(),
        });
    }
    if r.n_nodes() != graph.n_nodes() || r.n_steps() != graph.n_steps() {
        return Err(Error::DimensionMismatch {
            context: "unstructured prediction shape vs graph",
            expected: graph.n_nodes() * graph.n_steps(),
            got: r.n_nodes() * r.n_steps(),
        });
    }
    let n = graph.n_nodes();
    let alphas = params.alphas();
    let betas = params.betas();
    let sum_alpha: f64 = alphas.iter().sum();
    let mut blocks = Vec::with_capacity(graph.n_steps());
    let mut b = vec![0.0; n * graph.n_steps()];
    for t in 0..graph.n_steps() {
        let layers = graph.layers_at(t);
        let hbw = layers
            .iter()
            .flat_map(|l| l.edges().iter())
            .map(|&(i, j, _)| (j - i) as usize)
            .max()
            .unwrap_or(0);
        let mut q = SymBand::zeros(n, hbw);
        for i in 0..n {
            let mut d = 2.0 * sum_alpha;
            for (layer, &beta) in layers.iter().zip(&betas) {
                d += 2.0 * beta * layer.degree(i);
            }
            q.set(i, i, d);
        }
        for (layer, &beta) in layers.iter().zip(&betas) {
            for &(i, j, w) in layer.edges() {
                q.add(i as usize, j as usize, -2.0 * beta * w);
            }
        }
        blocks.push(q);
        for i in 0..n {
            let mut bi = 0.0;
            for (k, &alpha) in alphas.iter().enumerate() {
                bi += alpha * r.value(k, t, i);
            }
            b[t * n + i] = 2.0 * bi;
        }
    }
    Ok(PrecisionSystem {
        n_nodes: n,
        n_steps: graph.n_steps(),
        blocks,
        b,
    })
}

/// Block decomposition of one time block of Q by labeled/unlabeled status.
#[derive(Debug, Clone)]
pub struct BlockPartition {
    /// Node indices (within the block) in L, ascending.
    pub labeled: Vec<usize>,
    /// Node indices in U, ascending.
    pub unlabeled: Vec<usize>,
    pub q_ll: SymBand,
    pub q_uu: SymBand,
    /// Coupling entries (labeled rank, unlabeled rank, value); Q_UL is the
    /// transpose of Q_LU and is not stored separately.
    pub q_lu: Vec<(u32, u32, f64)>,
    pub b_l: Vec<f64>,
    pub b_u: Vec<f64>,
}

/// Partition of the full system over every time block.
#[derive(Debug, Clone)]
pub struct PartitionedSystem {
    pub blocks: Vec<BlockPartition>,
}

/// Splits Q and b into labeled/unlabeled blocks per time step.
/// Submatrices of a band keep a band structure because monotone renumbering
/// never widens index gaps.
pub fn partition(mask: &LabelMask, system: &PrecisionSystem) -> Result<PartitionedSystem> {
    if mask.n_nodes() != system.n_nodes() || mask.n_steps() != system.n_steps() {
        return Err(Error::DimensionMismatch {
            context: "mask vs system shape",
            expected: system.order(),
            got: mask.n_nodes() * mask.n_steps(),
        });
    }
    let n = system.n_nodes();
    let mut blocks = Vec::with_capacity(system.n_steps());
    for t in 0..system.n_steps() {
        let labeled = mask.labeled_nodes_at(t);
        let unlabeled = mask.unlabeled_nodes_at(t);
        let q = system.block(t);
        let mut rank = vec![usize::MAX; n];
        for (r_i, &i) in labeled.iter().enumerate() {
            rank[i] = r_i;
        }
        let mut urank = vec![usize::MAX; n];
        for (r_i, &i) in unlabeled.iter().enumerate() {
            urank[i] = r_i;
        }
        let sub_band = |idx: &[usize]| -> SymBand {
            let mut hbw = 0;
            for (ri, &i) in idx.iter().enumerate() {
                for (d, &j) in idx[ri + 1..].iter().enumerate() {
                    if q.get(i, j) != 0.0 {
                        hbw = hbw.max(d + 1);
                    }
                }
            }
            let mut sub = SymBand::zeros(idx.len(), hbw);
            for (ri, &i) in idx.iter().enumerate() {
                sub.set(ri, ri, q.get(i, i));
                for (d, &j) in idx[ri + 1..].iter().enumerate() {
                    let v = q.get(i, j);
                    if v != 0.0 {
                        sub.set(ri, ri + 1 + d, v);
                    }
                }
            }
            sub
        };
        let q_ll = sub_band(&labeled);
        let q_uu = sub_band(&unlabeled);
        let mut q_lu = Vec::new();
        for &i in &labeled {
            for &j in &unlabeled {
                let v = q.get(i, j);
                if v != 0.0 {
                    q_lu.push((rank[i] as u32, urank[j] as u32, v));
                }
            }
        }
        let b_block = system.b_block(t);
        blocks.push(BlockPartition {
            b_l: labeled.iter().map(|&i| b_block[i]).collect(),
            b_u: unlabeled.iter().map(|&i| b_block[i]).collect(),
            labeled,
            unlabeled,
            q_ll,
            q_uu,
            q_lu,
        });
    }
    Ok(PartitionedSystem { blocks })
}
