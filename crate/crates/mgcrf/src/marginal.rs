//! Marginalized GCRF: the likelihood of the labeled subvector with unlabeled
//! nodes integrated out.
//!
//! Because the full conditional is Gaussian, the marginal over the labeled
//! indices is again Gaussian with mean μ_L (the L-restriction of the full
//! mean) and precision given by the Schur complement
//! Q* = Q_LL − Q_LU Q_UU⁻¹ Q_UL. Training maximizes this marginal likelihood,
//! so unlabeled nodes still contribute through their attributes and their
//! structural couplings, and nodes that are never labeled remain predictable.

use crate::error::{Error, Result};
use crate::gcrf::blocks::{eval_blocks, BlockData};
use crate::gcrf::{fit_blocks, FitOutcome, GaussianPosterior, GcrfModel};
use crate::graph::{
    partition, LabelMask, PrecisionSystem, TemporalAttributedGraph, UnstructuredPrediction,
};
use crate::linalg::SymBand;
use crate::optim::OptimizerSettings;

/// The marginal Gaussian over labeled indices: Schur-complement precision
/// blocks (one per time step) and the labeled part of the full mean.
#[derive(Debug, Clone)]
pub struct MarginalSystem {
    /// Per time block: global labeled indices and the dense Schur complement
    /// over them. Blocks stay decoupled because Q is block-diagonal in time.
    pub blocks: Vec<MarginalBlock>,
    /// Labeled part of μ = Q⁻¹b, concatenated in block order.
    pub mu_l: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MarginalBlock {
    /// Node indices (within the block) that are labeled.
    pub labeled: Vec<usize>,
    /// Q* = Q_LL − Q_LU Q_UU⁻¹ Q_UL for this block, stored dense-symmetric.
    pub q_star: SymBand,
}

impl MarginalSystem {
    pub fn n_labeled(&self) -> usize {
        self.mu_l.len()
    }

    /// Dense Q* over all labeled indices (block-diagonal; for inspection and
    /// tests).
    pub fn q_star_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n_labeled();
        let mut out = vec![vec![0.0; n]; n];
        let mut offset = 0;
        for block in &self.blocks {
            let m = block.labeled.len();
            for i in 0..m {
                for j in 0..m {
                    out[offset + i][offset + j] = block.q_star.get(i, j);
                }
            }
            offset += m;
        }
        out
    }
}

/// Integrates the unlabeled indices out of the assembled system:
/// Q* via Cholesky of Q_UU (solve Q_UU X = Q_UL, then Q* = Q_LL − Q_LU X),
/// and μ_L from the full-system solve.
pub fn marginalize(system: &PrecisionSystem, mask: &LabelMask) -> Result<MarginalSystem> {
    let parts = partition(mask, system)?;
    if parts.blocks.iter().all(|b| b.labeled.is_empty()) {
        return Err(Error::EmptyLabeledSet);
    }
    let mu = system.mean()?;
    let mut blocks = Vec::with_capacity(parts.blocks.len());
    let mut mu_l = Vec::new();
    for (t, part) in parts.blocks.iter().enumerate() {
        let n_l = part.labeled.len();
        let n_u = part.unlabeled.len();
        let mut q_star = SymBand::zeros(n_l, n_l.saturating_sub(1));
        for i in 0..n_l {
            for j in i..n_l {
                q_star.set(i, j, part.q_ll.get(i, j));
            }
        }
        if n_u > 0 && n_l > 0 {
            let chol_uu = system_chol(&part.q_uu)?;
            // Columns of X = Q_UU⁻¹ Q_UL, one solve per labeled index that
            // actually couples to U.
            let mut coupled: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_l];
            for &(li, ui, v) in &part.q_lu {
                coupled[li as usize].push((ui, v));
            }
            for j in 0..n_l {
                if coupled[j].is_empty() {
                    continue;
                }
                let mut col = vec![0.0; n_u];
                for &(ui, v) in &coupled[j] {
                    col[ui as usize] = v;
                }
                let x = chol_uu.solve(&col);
                // Q*_ij −= Q_LU(i,:) · x for i ≤ j (symmetric).
                for i in 0..=j {
                    let mut dot = 0.0;
                    for &(ui, v) in &coupled[i] {
                        dot += v * x[ui as usize];
                    }
                    q_star.add(i, j, -dot);
                }
            }
        }
        for &i in &part.labeled {
            mu_l.push(mu[t * system.n_nodes() + i]);
        }
        blocks.push(MarginalBlock {
            labeled: part.labeled.clone(),
            q_star,
        });
    }
    Ok(MarginalSystem { blocks, mu_l })
}

fn system_chol(q: &SymBand) -> Result<crate::linalg::BandCholesky> {
    q.cholesky()
}

fn marginal_blocks(
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
    mask: &LabelMask,
) -> Result<Vec<BlockData>> {
    mask.validate_against(graph)?;
    if r.n_nodes() != graph.n_nodes() || r.n_steps() != graph.n_steps() {
        return Err(Error::DimensionMismatch {
            context: "unstructured prediction shape vs graph",
            expected: graph.n_nodes() * graph.n_steps(),
            got: r.n_nodes() * r.n_steps(),
        });
    }
    Ok((0..graph.n_steps())
        .map(|t| BlockData::from_graph(graph, r, t, None, &|i| mask.is_observed(t, i)))
        .collect())
}

/// Gaussian log-density of the observed labels under (μ_L, Q*⁻¹). Blocks with
/// no observed label integrate out entirely and contribute nothing.
pub fn marginal_log_likelihood(
    model: &GcrfModel,
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
    mask: &LabelMask,
) -> Result<f64> {
    let blocks = marginal_blocks(graph, r, mask)?;
    if blocks.iter().all(|b| b.labeled().is_empty()) {
        return Err(Error::EmptyLabeledSet);
    }
    let (ll, _, _) = eval_blocks(&blocks, &model.params, false, true)?;
    Ok(ll)
}

/// Gradient of the marginal log-likelihood with respect to (log α, log β).
pub fn marginal_gradient(
    model: &GcrfModel,
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
    mask: &LabelMask,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let blocks = marginal_blocks(graph, r, mask)?;
    if blocks.iter().all(|b| b.labeled().is_empty()) {
        return Err(Error::EmptyLabeledSet);
    }
    let (_, grad, _) = eval_blocks(&blocks, &model.params, true, true)?;
    let k = model.predictor_count();
    Ok((grad[..k].to_vec(), grad[k..].to_vec()))
}

/// Trains by maximizing the marginal likelihood over the labeled nodes.
/// With every node labeled this is exactly the fully supervised fit.
pub fn fit_marginal(
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
    mask: &LabelMask,
    settings: &OptimizerSettings,
) -> Result<FitOutcome> {
    let blocks = marginal_blocks(graph, r, mask)?;
    fit_blocks(&blocks, r.n_predictors(), graph.n_layers(), settings, true)
}

/// Test-time inference on the full graph. Identical to the supervised
/// `predict`: the mean depends only on attributes and structure, so nodes
/// that were never labeled in training still receive predictions.
pub fn predict_full(
    model: &GcrfModel,
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
) -> Result<GaussianPosterior> {
    crate::gcrf::predict(model, graph, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcrf::{self, GcrfModel};
    use crate::graph::{
        assemble_precision, GcrfParams, Similarity, SimilarityLayer,
    };
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn two_node() -> (TemporalAttributedGraph, UnstructuredPrediction) {
        let layer = SimilarityLayer::new(2, vec![(0, 1, 0.5)]).unwrap();
        let graph = TemporalAttributedGraph::new(
            2,
            1,
            1,
            vec![vec![0.0, 0.0]],
            vec![vec![Some(3.2), None]],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(2, 1, vec![vec![3.0, 5.0]]).unwrap();
        (graph, r)
    }

    /// Random connected-ish graph with random weights, labels, predictor
    /// outputs, and a random mask that keeps at least one label.
    pub(crate) fn random_instance(
        rng: &mut ChaCha8Rng,
        max_nodes: usize,
        max_steps: usize,
        max_k: usize,
        max_l: usize,
    ) -> (
        TemporalAttributedGraph,
        UnstructuredPrediction,
        LabelMask,
        GcrfParams,
    ) {
        let n = rng.random_range(1..=max_nodes);
        let t = rng.random_range(1..=max_steps);
        let k = rng.random_range(1..=max_k);
        let l = rng.random_range(1..=max_l);
        let mut layers = Vec::new();
        for _ in 0..l {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < 0.4 {
                        edges.push((i, j, rng.random_range(0.1..2.0)));
                    }
                }
            }
            layers.push(SimilarityLayer::new(n, edges).unwrap());
        }
        let labels: Vec<Vec<Option<f64>>> = (0..t)
            .map(|_| (0..n).map(|_| Some(rng.random_range(-2.0..2.0))).collect())
            .collect();
        let graph = TemporalAttributedGraph::new(
            n,
            t,
            1,
            vec![vec![0.0; n]; t],
            labels,
            Similarity::Static(layers),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(
            n,
            t,
            (0..k)
                .map(|_| (0..n * t).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect(),
        )
        .unwrap();
        let mut observed: Vec<bool> = (0..n * t).map(|_| rng.random::<f64>() < 0.6).collect();
        if observed.iter().all(|&o| !o) {
            observed[rng.random_range(0..n * t)] = true;
        }
        let mask = LabelMask::new(n, t, observed).unwrap();
        let params = GcrfParams::from_logs(
            (0..k).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..l).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        (graph, r, mask, params)
    }

    #[test]
    fn marginalize_with_empty_u_returns_full_system() {
        let (graph, r) = two_node();
        let graph = graph
            .with_labels(vec![vec![Some(3.2), Some(4.0)]])
            .unwrap();
        let params = GcrfParams::unit(1, 1);
        let sys = assemble_precision(&graph, &params, &r).unwrap();
        let mask = LabelMask::all_observed(2, 1);
        let m = marginalize(&sys, &mask).unwrap();
        assert_eq!(m.n_labeled(), 2);
        let q = m.q_star_dense();
        assert_abs_diff_eq!(q[0][0], 3.0);
        assert_abs_diff_eq!(q[0][1], -1.0);
        let mu = sys.mean().unwrap();
        assert_abs_diff_eq!(m.mu_l[0], mu[0]);
        assert_abs_diff_eq!(m.mu_l[1], mu[1]);
    }

    #[test]
    fn marginalize_two_node_schur_complement() {
        // Q = [[3,−1],[−1,3]], node 2 unlabeled: Q* = 3 − 1/3 = 8/3,
        // μ_L = μ₁ = 3.5. Cross-check with ((Q⁻¹)_LL)⁻¹.
        let (graph, r) = two_node();
        let params = GcrfParams::unit(1, 1);
        let sys = assemble_precision(&graph, &params, &r).unwrap();
        let mask = LabelMask::from_graph(&graph);
        let m = marginalize(&sys, &mask).unwrap();
        assert_eq!(m.blocks[0].labeled, vec![0]);
        assert_abs_diff_eq!(m.blocks[0].q_star.get(0, 0), 8.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mu_l[0], 3.5, epsilon = 1e-12);
        let qinv = DMatrix::from_fn(2, 2, |i, j| sys.entry(i, j))
            .try_inverse()
            .unwrap();
        assert_abs_diff_eq!(1.0 / qinv[(0, 0)], 8.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn marginal_precision_inverse_equals_covariance_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let (graph, r, mask, params) = random_instance(&mut rng, 8, 1, 2, 2);
            let sys = assemble_precision(&graph, &params, &r).unwrap();
            let m = match marginalize(&sys, &mask) {
                Ok(m) => m,
                Err(Error::EmptyLabeledSet) => continue,
                Err(e) => panic!("{e}"),
            };
            let nt = sys.order();
            let qd = DMatrix::from_fn(nt, nt, |i, j| sys.entry(i, j));
            let cov = qd.try_inverse().unwrap();
            let labeled: Vec<usize> = (0..nt)
                .filter(|&g| mask.is_observed(g / graph.n_nodes(), g % graph.n_nodes()))
                .collect();
            let q_star = m.q_star_dense();
            let q_star_na =
                DMatrix::from_fn(labeled.len(), labeled.len(), |i, j| q_star[i][j]);
            let q_star_inv = q_star_na.try_inverse().unwrap();
            for (i, &gi) in labeled.iter().enumerate() {
                for (j, &gj) in labeled.iter().enumerate() {
                    assert_abs_diff_eq!(q_star_inv[(i, j)], cov[(gi, gj)], epsilon = 1e-9);
                }
            }
        }
    }

    /// Dense marginal oracle: invert the full precision, drop unlabeled rows
    /// and columns of the covariance, and evaluate the Gaussian log-density.
    pub(crate) fn dense_marginal_ll(
        graph: &TemporalAttributedGraph,
        params: &GcrfParams,
        r: &UnstructuredPrediction,
        mask: &LabelMask,
    ) -> f64 {
        let sys = assemble_precision(graph, params, r).unwrap();
        let nt = sys.order();
        let n = graph.n_nodes();
        let qd = DMatrix::from_fn(nt, nt, |i, j| sys.entry(i, j));
        let cov = qd.clone().try_inverse().unwrap();
        let mu = qd.lu().solve(&DVector::from_column_slice(sys.b())).unwrap();
        let labeled: Vec<usize> = (0..nt)
            .filter(|&g| mask.is_observed(g / n, g % n))
            .collect();
        let m = labeled.len();
        let cov_ll = DMatrix::from_fn(m, m, |i, j| cov[(labeled[i], labeled[j])]);
        let prec = cov_ll.clone().try_inverse().unwrap();
        let d = DVector::from_fn(m, |i, _| {
            graph.label(labeled[i] / n, labeled[i] % n).unwrap() - mu[labeled[i]]
        });
        let quad = (d.transpose() * &prec * &d)[(0, 0)];
        -0.5 * quad - 0.5 * cov_ll.determinant().ln() - 0.5 * m as f64 * (2.0 * PI).ln()
    }

    #[test]
    fn marginal_ll_reduces_to_full_ll_without_missing_labels() {
        let (graph, r) = two_node();
        let graph = graph
            .with_labels(vec![vec![Some(3.2), Some(4.1)]])
            .unwrap();
        let model = GcrfModel::new(GcrfParams::from_logs(vec![0.2], vec![-0.4])).unwrap();
        let mask = LabelMask::all_observed(2, 1);
        let marg = marginal_log_likelihood(&model, &graph, &r, &mask).unwrap();
        let full = gcrf::log_likelihood(&model, &graph, &r).unwrap();
        assert_abs_diff_eq!(marg, full, epsilon = 0.0);
    }

    #[test]
    fn marginal_ll_at_mean_is_half_log_det() {
        let (graph, r) = two_node();
        let params = GcrfParams::unit(1, 1);
        let model = GcrfModel::new(params.clone()).unwrap();
        // Label node 0 exactly at μ_L = 3.5.
        let graph = graph.with_labels(vec![vec![Some(3.5), None]]).unwrap();
        let mask = LabelMask::from_graph(&graph);
        let ll = marginal_log_likelihood(&model, &graph, &r, &mask).unwrap();
        assert_abs_diff_eq!(
            ll,
            0.5 * (8.0_f64 / 3.0).ln() - 0.5 * (2.0 * PI).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn marginal_ll_matches_dense_oracle_on_five_nodes() {
        let layer =
            SimilarityLayer::new(5, vec![(0, 1, 0.5), (1, 2, 1.0), (2, 3, 0.7), (3, 4, 0.3), (0, 4, 0.2)])
                .unwrap();
        let graph = TemporalAttributedGraph::new(
            5,
            1,
            1,
            vec![vec![0.0; 5]],
            vec![vec![Some(1.0), None, Some(-0.5), None, Some(2.0)]],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(
            5,
            1,
            vec![vec![0.9, 0.1, -0.3, 0.8, 1.7]],
        )
        .unwrap();
        let params = GcrfParams::from_logs(vec![0.1], vec![0.4]);
        let model = GcrfModel::new(params.clone()).unwrap();
        let mask = LabelMask::from_graph(&graph);
        let ll = marginal_log_likelihood(&model, &graph, &r, &mask).unwrap();
        assert_abs_diff_eq!(
            ll,
            dense_marginal_ll(&graph, &params, &r, &mask),
            epsilon = 1e-10
        );
    }

    /// Central finite differences of the marginal log-likelihood.
    pub(crate) fn fd_marginal_gradient(
        graph: &TemporalAttributedGraph,
        r: &UnstructuredPrediction,
        mask: &LabelMask,
        params: &GcrfParams,
    ) -> Vec<f64> {
        let h = 1e-5;
        let k = params.n_predictors();
        let l = params.n_layers();
        let mut v = params.to_vector();
        let mut grad = vec![0.0; v.len()];
        for i in 0..v.len() {
            let orig = v[i];
            v[i] = orig + h;
            let mp = GcrfModel::new(GcrfParams::from_vector(&v, k, l)).unwrap();
            let fp = marginal_log_likelihood(&mp, graph, r, mask).unwrap();
            v[i] = orig - h;
            let mm = GcrfModel::new(GcrfParams::from_vector(&v, k, l)).unwrap();
            let fm = marginal_log_likelihood(&mm, graph, r, mask).unwrap();
            v[i] = orig;
            grad[i] = (fp - fm) / (2.0 * h);
        }
        grad
    }

    #[test]
    fn marginal_gradient_matches_finite_differences_two_node() {
        let (graph, r) = two_node();
        let mask = LabelMask::from_graph(&graph);
        let params = GcrfParams::from_logs(vec![0.25], vec![-0.1]);
        let model = GcrfModel::new(params.clone()).unwrap();
        let (ga, gb) = marginal_gradient(&model, &graph, &r, &mask).unwrap();
        let fd = fd_marginal_gradient(&graph, &r, &mask, &params);
        let analytic = [ga[0], gb[0]];
        let scale = fd.iter().fold(0.0_f64, |m, g| m.max(g.abs())).max(1e-8);
        for i in 0..2 {
            assert!(
                (analytic[i] - fd[i]).abs() / scale <= 1e-5,
                "component {i}: analytic {} vs fd {}",
                analytic[i],
                fd[i]
            );
        }
    }

    #[test]
    fn marginal_gradient_reduces_to_full_gradient_without_missing() {
        let (graph, r) = two_node();
        let graph = graph
            .with_labels(vec![vec![Some(3.2), Some(4.1)]])
            .unwrap();
        let mask = LabelMask::all_observed(2, 1);
        let model = GcrfModel::new(GcrfParams::from_logs(vec![0.2], vec![-0.4])).unwrap();
        let (ma, mb) = marginal_gradient(&model, &graph, &r, &mask).unwrap();
        let (fa, fb) = gcrf::gradient(&model, &graph, &r).unwrap();
        assert_abs_diff_eq!(ma[0], fa[0], epsilon = 0.0);
        assert_abs_diff_eq!(mb[0], fb[0], epsilon = 0.0);
    }

    #[test]
    fn marginal_gradient_matches_finite_differences_on_grid_with_missing() {
        // 40-node grid, ~30% unlabeled, several random parameter points.
        use crate::synthgen::{generate, SyntheticSpec};
        let spec = SyntheticSpec {
            rows: 5,
            cols: 8,
            n_steps: 2,
            seed: 7,
            ..SyntheticSpec::default()
        };
        let data = generate(&spec).unwrap();
        let graph = &data.graph;
        let r = &data.r_values;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut observed: Vec<bool> = (0..graph.n_nodes() * graph.n_steps())
            .map(|_| rng.random::<f64>() > 0.3)
            .collect();
        observed[0] = true;
        let mask = LabelMask::new(graph.n_nodes(), graph.n_steps(), observed).unwrap();
        for _ in 0..5 {
            let params = GcrfParams::from_logs(
                vec![rng.random_range(-1.0..1.0)],
                vec![rng.random_range(-1.0..1.0)],
            );
            let model = GcrfModel::new(params.clone()).unwrap();
            let (ga, gb) = marginal_gradient(&model, graph, r, &mask).unwrap();
            let fd = fd_marginal_gradient(graph, r, &mask, &params);
            let analytic = [ga[0], gb[0]];
            let scale = fd.iter().fold(0.0_f64, |m, g| m.max(g.abs())).max(1e-8);
            for i in 0..2 {
                assert!(
                    (analytic[i] - fd[i]).abs() / scale <= 1e-5,
                    "analytic {} vs fd {}",
                    analytic[i],
                    fd[i]
                );
            }
        }
    }

    #[test]
    fn fully_unlabeled_block_contributes_nothing() {
        // Two steps; step 1 entirely unlabeled. The objective must stay
        // finite and equal the one-block marginal.
        let layer = SimilarityLayer::new(2, vec![(0, 1, 0.5)]).unwrap();
        let graph = TemporalAttributedGraph::new(
            2,
            2,
            1,
            vec![vec![0.0; 2]; 2],
            vec![
                vec![Some(1.0), Some(0.5)],
                vec![Some(9.0), Some(9.0)], // hidden by the mask below
            ],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(
            2,
            2,
            vec![vec![1.0, 0.5, 2.0, 2.0]],
        )
        .unwrap();
        let mask = LabelMask::new(2, 2, vec![true, true, false, false]).unwrap();
        let model = GcrfModel::new(GcrfParams::unit(1, 1)).unwrap();
        let ll = marginal_log_likelihood(&model, &graph, &r, &mask).unwrap();
        assert!(ll.is_finite());
        let first = graph.restrict_steps(0..1);
        let r1 = r.restrict_steps(0..1);
        let m1 = LabelMask::all_observed(2, 1);
        let ll1 = marginal_log_likelihood(&model, &first, &r1, &m1).unwrap();
        assert_abs_diff_eq!(ll, ll1, epsilon = 0.0);
    }

    #[test]
    fn prior_washout_when_coupling_is_zero() {
        // U nodes carry no edges to L, so Q_LU = 0 and the marginal equals
        // the likelihood of the labeled subgraph (the ignore-missing model).
        let layer = SimilarityLayer::new(4, vec![(0, 1, 0.8), (2, 3, 0.6)]).unwrap();
        let graph = TemporalAttributedGraph::new(
            4,
            1,
            1,
            vec![vec![0.0; 4]],
            vec![vec![Some(1.0), Some(-0.5), None, None]],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(4, 1, vec![vec![0.9, -0.4, 0.0, 0.0]]).unwrap();
        let model = GcrfModel::new(GcrfParams::from_logs(vec![0.1], vec![0.3])).unwrap();
        let mask = LabelMask::from_graph(&graph);
        let marg = marginal_log_likelihood(&model, &graph, &r, &mask).unwrap();

        // Labeled subgraph: nodes 0, 1 with their edge.
        let sub_layer = SimilarityLayer::new(2, vec![(0, 1, 0.8)]).unwrap();
        let sub = TemporalAttributedGraph::new(
            2,
            1,
            1,
            vec![vec![0.0; 2]],
            vec![vec![Some(1.0), Some(-0.5)]],
            Similarity::Static(vec![sub_layer]),
            None,
        )
        .unwrap();
        let sub_r = UnstructuredPrediction::new(2, 1, vec![vec![0.9, -0.4]]).unwrap();
        let full = gcrf::log_likelihood(&model, &sub, &sub_r).unwrap();
        assert_abs_diff_eq!(marg, full, epsilon = 1e-12);
    }

    #[test]
    fn predict_full_is_mask_independent() {
        let (graph, r) = two_node();
        let model = GcrfModel::new(GcrfParams::unit(1, 1)).unwrap();
        let post = predict_full(&model, &graph, &r).unwrap();
        // The graph carries a missing label at node 1 and predict_full never
        // looks at labels; compare with the fully labeled variant.
        let full = graph
            .with_labels(vec![vec![Some(0.0), Some(0.0)]])
            .unwrap();
        let post2 = predict_full(&model, &full, &r).unwrap();
        assert_eq!(post.mean, post2.mean);
    }

    #[test]
    fn never_labeled_node_is_pulled_toward_neighbors() {
        // 3-node chain; middle node never labeled; neighbors carry high
        // labels. With strong coupling the middle prediction rises above its
        // unstructured output. Expected value from a dense conditional-mean
        // oracle.
        let layer = SimilarityLayer::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let graph = TemporalAttributedGraph::new(
            3,
            1,
            1,
            vec![vec![0.0; 3]],
            vec![vec![Some(5.0), None, Some(5.0)]],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(3, 1, vec![vec![5.0, 0.0, 5.0]]).unwrap();
        let model =
            GcrfModel::new(GcrfParams::from_logs(vec![0.0], vec![10.0_f64.ln()])).unwrap();
        let post = predict_full(&model, &graph, &r).unwrap();
        let sys = assemble_precision(&graph, &model.params, &r).unwrap();
        let qd = DMatrix::from_fn(3, 3, |i, j| sys.entry(i, j));
        let mu = qd
            .lu()
            .solve(&DVector::from_column_slice(sys.b()))
            .unwrap();
        assert_abs_diff_eq!(post.mean[1], mu[1], epsilon = 1e-10);
        assert!(post.mean[1] > 0.0 + 1.0); // well above its unstructured output
    }
}
