//! Comparison methods: the ignore-missing GCRF trained on the labeled
//! subgraph, Gaussian-process multiple imputation, and harmonic Gaussian-field
//! imputation, each followed by a plain GCRF fit where applicable.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gcrf::blocks::BlockData;
use crate::gcrf::{fit_blocks, FitOutcome, GcrfModel};
use crate::gp::{gp_impute, GpHyper};
use crate::graph::{GcrfParams, LabelMask, TemporalAttributedGraph, UnstructuredPrediction};
use crate::linalg::SymBand;
use crate::optim::OptimizerSettings;

/// Ignore-missing GCRF: unlabeled nodes are removed entirely before
/// assembly, so only edges between labeled nodes survive and diagonal degree
/// sums run over labeled neighbors alone.
pub fn fit_igcrf(
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
    mask: &LabelMask,
    settings: &OptimizerSettings,
) -> Result<FitOutcome> {
    mask.validate_against(graph)?;
    let blocks: Vec<BlockData> = (0..graph.n_steps())
        .map(|t| {
            let keep = mask.labeled_nodes_at(t);
            BlockData::from_graph(graph, r, t, Some(&keep), &|_| true)
        })
        .collect();
    fit_blocks(&blocks, r.n_predictors(), graph.n_layers(), settings, false)
}

/// A completed label set: observed values kept exactly, missing ones filled.
#[derive(Debug, Clone)]
pub struct ImputationSample {
    pub labels: Vec<Vec<Option<f64>>>,
}

impl ImputationSample {
    /// Checks agreement with the observed labels.
    pub fn agrees_with(&self, graph: &TemporalAttributedGraph, mask: &LabelMask) -> bool {
        for t in 0..graph.n_steps() {
            for i in 0..graph.n_nodes() {
                if mask.is_observed(t, i) && self.labels[t][i] != graph.label(t, i) {
                    return false;
                }
            }
        }
        true
    }
}

/// Multiple-imputation fit: GP posterior over the missing labels, several
/// independent per-node completions, one full GCRF fit per completion, and
/// the final model averages the fitted log-domain parameters.
#[derive(Debug, Clone)]
pub struct MiFit {
    pub model: GcrfModel,
    pub samples: Vec<ImputationSample>,
    pub per_sample_models: Vec<GcrfModel>,
}

pub fn fit_mi_gcrf(
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
    mask: &LabelMask,
    n_samples: usize,
    seed: u64,
    settings: &OptimizerSettings,
) -> Result<MiFit> {
    mask.validate_against(graph)?;
    let n = graph.n_nodes();
    let mut train_x: Vec<&[f64]> = Vec::new();
    let mut train_y: Vec<f64> = Vec::new();
    let mut query: Vec<(usize, usize)> = Vec::new();
    for t in 0..graph.n_steps() {
        for i in 0..n {
            if mask.is_observed(t, i) {
                train_x.push(graph.feature(t, i));
                train_y.push(graph.label(t, i).unwrap());
            } else {
                query.push((t, i));
            }
        }
    }
    if train_x.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }

    let (means, vars) = if query.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let hyper = GpHyper::heuristic(&train_x, &train_y);
        let query_x: Vec<&[f64]> = query.iter().map(|&(t, i)| graph.feature(t, i)).collect();
        gp_impute(&train_x, &train_y, &query_x, &hyper)?
    };

    let n_samples = n_samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_samples);
    let mut per_sample_models = Vec::with_capacity(n_samples);
    let mut sum_log_alpha: Vec<f64> = Vec::new();
    let mut sum_log_beta: Vec<f64> = Vec::new();
    for _ in 0..n_samples {
        let mut labels: Vec<Vec<Option<f64>>> = (0..graph.n_steps())
            .map(|t| {
                (0..n)
                    .map(|i| {
                        if mask.is_observed(t, i) {
                            graph.label(t, i)
                        } else {
                            None
                        }
                    })
                    .collect()
            })
            .collect();
        for (qi, &(t, i)) in query.iter().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            labels[t][i] = Some(means[qi] + vars[qi].sqrt() * noise);
        }
        let sample = ImputationSample { labels };
        let completed = graph.with_labels(sample.labels.clone())?;
        let fitted = crate::gcrf::fit(&completed, r, settings)?;
        if sum_log_alpha.is_empty() {
            sum_log_alpha = vec![0.0; fitted.model.params.log_alpha.len()];
            sum_log_beta = vec![0.0; fitted.model.params.log_beta.len()];
        }
        for (s, v) in sum_log_alpha.iter_mut().zip(&fitted.model.params.log_alpha) {
            *s += v;
        }
        for (s, v) in sum_log_beta.iter_mut().zip(&fitted.model.params.log_beta) {
            *s += v;
        }
        samples.push(sample);
        per_sample_models.push(fitted.model);
    }
    let scale = 1.0 / n_samples as f64;
    let model = GcrfModel::new(GcrfParams::from_logs(
        sum_log_alpha.iter().map(|v| v * scale).collect(),
        sum_log_beta.iter().map(|v| v * scale).collect(),
    ))?;
    Ok(MiFit {
        model,
        samples,
        per_sample_models,
    })
}

/// Harmonic imputation result for one step.
#[derive(Debug, Clone)]
pub struct HarmonicImputation {
    /// (node, imputed value) for every unlabeled node at the step.
    pub values: Vec<(usize, f64)>,
    /// Nodes in components without any labeled node; they received the
    /// step-wide labeled mean instead of a harmonic value.
    pub flagged: Vec<usize>,
}

/// Harmonic Gaussian-field imputation at one step: solves
/// f_U = (D_UU − W_UU)⁻¹ W_UL f_L with W the layer-summed similarity matrix
/// and D its degree diagonal. Every harmonic value lies inside the labeled
/// range of its component; components with no labeled node fall back to the
/// global labeled mean and are flagged.
pub fn hgf_impute(
    graph: &TemporalAttributedGraph,
    mask: &LabelMask,
    step: usize,
) -> Result<HarmonicImputation> {
    mask.validate_against(graph)?;
    let n = graph.n_nodes();
    // Layer-summed similarity.
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for layer in graph.layers_at(step) {
        for &(i, j, w) in layer.edges() {
            adj[i as usize].push((j as usize, w));
            adj[j as usize].push((i as usize, w));
        }
    }
    let labeled: Vec<usize> = mask.labeled_nodes_at(step);
    let unlabeled: Vec<usize> = mask.unlabeled_nodes_at(step);
    if labeled.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    let f_l: Vec<f64> = labeled
        .iter()
        .map(|&i| graph.label(step, i).unwrap())
        .collect();
    let global_mean = f_l.iter().sum::<f64>() / f_l.len() as f64;

    // Components via BFS over the step's structure.
    let mut component = vec![usize::MAX; n];
    let mut comp_has_label = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let c = comp_has_label.len();
        comp_has_label.push(false);
        let mut queue = std::collections::VecDeque::from([start]);
        component[start] = c;
        while let Some(i) = queue.pop_front() {
            if mask.is_observed(step, i) {
                comp_has_label[c] = true;
            }
            for &(j, _) in &adj[i] {
                if component[j] == usize::MAX {
                    component[j] = c;
                    queue.push_back(j);
                }
            }
        }
    }

    let mut flagged = Vec::new();
    let solvable: Vec<usize> = unlabeled
        .iter()
        .copied()
        .filter(|&i| {
            if comp_has_label[component[i]] {
                true
            } else {
                flagged.push(i);
                false
            }
        })
        .collect();

    let mut values: Vec<(usize, f64)> = flagged.iter().map(|&i| (i, global_mean)).collect();
    if !solvable.is_empty() {
        let mut urank = vec![usize::MAX; n];
        for (ri, &i) in solvable.iter().enumerate() {
            urank[i] = ri;
        }
        let mut hbw = 0;
        for (ri, &i) in solvable.iter().enumerate() {
            for &(j, _) in &adj[i] {
                if urank[j] != usize::MAX {
                    hbw = hbw.max(ri.abs_diff(urank[j]));
                }
            }
        }
        let mut lap = SymBand::zeros(solvable.len(), hbw);
        let mut rhs = vec![0.0; solvable.len()];
        for (ri, &i) in solvable.iter().enumerate() {
            let mut degree = 0.0;
            for &(j, w) in &adj[i] {
                degree += w;
                if urank[j] != usize::MAX {
                    if urank[j] > ri {
                        lap.add(ri, urank[j], -w);
                    }
                } else if mask.is_observed(step, j) {
                    rhs[ri] += w * graph.label(step, j).unwrap();
                }
                // Unlabeled neighbors in label-free components contribute to
                // the degree but not to the solve; they cannot occur here
                // because components are closed under adjacency.
            }
            lap.set(ri, ri, degree);
        }
        let chol = lap.cholesky()?;
        let f_u = chol.solve(&rhs);
        values.extend(solvable.iter().zip(&f_u).map(|(&i, &v)| (i, v)));
    }
    values.sort_by_key(|&(i, _)| i);
    Ok(HarmonicImputation { values, flagged })
}

/// Harmonic imputation at every step followed by a plain GCRF fit on the
/// completed labels.
#[derive(Debug, Clone)]
pub struct HgfFit {
    pub outcome: FitOutcome,
    pub completed: ImputationSample,
    pub flagged_nodes: usize,
}

pub fn fit_hgf_gcrf(
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
    mask: &LabelMask,
    settings: &OptimizerSettings,
) -> Result<HgfFit> {
    let n = graph.n_nodes();
    let mut labels: Vec<Vec<Option<f64>>> = (0..graph.n_steps())
        .map(|t| {
            (0..n)
                .map(|i| {
                    if mask.is_observed(t, i) {
                        graph.label(t, i)
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    let mut flagged_nodes = 0;
    for t in 0..graph.n_steps() {
        if mask.unlabeled_nodes_at(t).is_empty() {
            continue;
        }
        let imputed = hgf_impute(graph, mask, t)?;
        flagged_nodes += imputed.flagged.len();
        for (i, v) in imputed.values {
            labels[t][i] = Some(v);
        }
    }
    let completed = ImputationSample { labels };
    let full = graph.with_labels(completed.labels.clone())?;
    let outcome = crate::gcrf::fit(&full, r, settings)?;
    Ok(HgfFit {
        outcome,
        completed,
        flagged_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcrf;
    use crate::graph::{Similarity, SimilarityLayer};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn labeled_path(labels: Vec<Option<f64>>, weights: &[f64]) -> TemporalAttributedGraph {
        let n = labels.len();
        let edges: Vec<(usize, usize, f64)> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (i, i + 1, w))
            .collect();
        let layer = SimilarityLayer::new(n, edges).unwrap();
        TemporalAttributedGraph::new(
            n,
            1,
            1,
            vec![vec![0.0; n]],
            vec![labels],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap()
    }

    #[test]
    fn igcrf_with_all_labels_equals_plain_fit() {
        let graph = labeled_path(vec![Some(1.0), Some(0.2), Some(-0.5)], &[0.5, 1.0]);
        let r = UnstructuredPrediction::new(3, 1, vec![vec![0.8, 0.1, -0.3]]).unwrap();
        let mask = LabelMask::all_observed(3, 1);
        let settings = OptimizerSettings::default();
        let a = fit_igcrf(&graph, &r, &mask, &settings).unwrap();
        let b = gcrf::fit(&graph, &r, &settings).unwrap();
        assert_eq!(a.model.params, b.model.params);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn igcrf_discards_coupling_that_marginalization_keeps() {
        // 3-node path with the middle node unlabeled: the labeled subgraph
        // has no edge, while the Schur complement keeps an effective
        // coupling between the endpoints.
        let graph = labeled_path(vec![Some(1.0), None, Some(-0.5)], &[0.5, 1.0]);
        let r = UnstructuredPrediction::new(3, 1, vec![vec![0.8, 0.1, -0.3]]).unwrap();
        let mask = LabelMask::from_graph(&graph);
        let params = GcrfParams::unit(1, 1);
        let sys = crate::graph::assemble_precision(&graph, &params, &r).unwrap();
        let marg = crate::marginal::marginalize(&sys, &mask).unwrap();
        let q_star = marg.q_star_dense();
        assert!(
            q_star[0][1].abs() > 1e-9,
            "marginalization must keep an endpoint coupling"
        );
        // i-GCRF's assembled system on the labeled subgraph has no edges.
        let keep = mask.labeled_nodes_at(0);
        let bd = BlockData::from_graph(&graph, &r, 0, Some(&keep), &|_| true);
        assert!(bd.layers.iter().all(|(e, _)| e.is_empty()));
    }

    #[test]
    fn igcrf_with_fully_disconnected_labeled_set_still_fits() {
        let graph = labeled_path(vec![Some(1.0), None, Some(-0.5)], &[0.5, 1.0]);
        let r = UnstructuredPrediction::new(3, 1, vec![vec![0.8, 0.1, -0.3]]).unwrap();
        let mask = LabelMask::from_graph(&graph);
        let out = fit_igcrf(&graph, &r, &mask, &OptimizerSettings::default()).unwrap();
        // β is unidentified without edges; the fit must stay finite.
        assert!(out.objective.is_finite());
        assert!(out.model.params.log_alpha[0].is_finite());
    }

    #[test]
    fn mi_with_no_missing_reduces_to_single_fit() {
        let graph = labeled_path(vec![Some(1.0), Some(0.2), Some(-0.5)], &[0.5, 1.0]);
        let r = UnstructuredPrediction::new(3, 1, vec![vec![0.8, 0.1, -0.3]]).unwrap();
        let mask = LabelMask::all_observed(3, 1);
        let settings = OptimizerSettings::default();
        let mi = fit_mi_gcrf(&graph, &r, &mask, 5, 9, &settings).unwrap();
        let single = gcrf::fit(&graph, &r, &settings).unwrap();
        for (a, b) in mi
            .model
            .params
            .log_alpha
            .iter()
            .zip(&single.model.params.log_alpha)
        {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(mi.samples.iter().all(|s| s.agrees_with(&graph, &mask)));
    }

    #[test]
    fn mi_is_deterministic_per_seed() {
        let graph = labeled_path(vec![Some(1.0), None, Some(-0.5), Some(0.3)], &[0.5, 1.0, 0.7]);
        let r = UnstructuredPrediction::new(4, 1, vec![vec![0.8, 0.1, -0.3, 0.2]]).unwrap();
        let mask = LabelMask::from_graph(&graph);
        let settings = OptimizerSettings::default();
        let a = fit_mi_gcrf(&graph, &r, &mask, 5, 42, &settings).unwrap();
        let b = fit_mi_gcrf(&graph, &r, &mask, 5, 42, &settings).unwrap();
        assert_eq!(a.model.params, b.model.params);
    }

    #[test]
    fn mi_sample_means_follow_gp_posterior() {
        // With sampling noise present, completions agree with observed labels
        // and differ across samples on the missing entries.
        let graph = labeled_path(
            vec![Some(1.0), None, Some(-0.5), Some(0.3), None],
            &[0.5, 1.0, 0.7, 0.4],
        );
        let r =
            UnstructuredPrediction::new(5, 1, vec![vec![0.8, 0.1, -0.3, 0.2, 0.0]]).unwrap();
        let mask = LabelMask::from_graph(&graph);
        let mi = fit_mi_gcrf(&graph, &r, &mask, 3, 17, &OptimizerSettings::default()).unwrap();
        for s in &mi.samples {
            assert!(s.agrees_with(&graph, &mask));
            assert!(s.labels[0][1].is_some());
        }
    }

    #[test]
    fn harmonic_path_midpoint_is_half() {
        // 0 and 1 at the ends of a unit path: the middle is their average.
        let graph = labeled_path(vec![Some(0.0), None, Some(1.0)], &[1.0, 1.0]);
        let mask = LabelMask::from_graph(&graph);
        let out = hgf_impute(&graph, &mask, 0).unwrap();
        assert_eq!(out.values.len(), 1);
        assert_abs_diff_eq!(out.values[0].1, 0.5, epsilon = 1e-12);
        assert!(out.flagged.is_empty());
    }

    #[test]
    fn harmonic_single_neighbor_copies_label() {
        let graph = labeled_path(vec![Some(2.5), None], &[0.7]);
        let mask = LabelMask::from_graph(&graph);
        let out = hgf_impute(&graph, &mask, 0).unwrap();
        assert_abs_diff_eq!(out.values[0].1, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_matches_jacobi_label_propagation() {
        // Random 10-node graph; iterate f_i ← Σ w_ij f_j / Σ w_ij to a fixed
        // point and compare.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 10;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.4 {
                    edges.push((i, j, rng.random_range(0.2..1.5)));
                }
            }
        }
        // Ensure connectivity through a path.
        for i in 0..n - 1 {
            if !edges.iter().any(|&(a, b, _)| (a, b) == (i, i + 1)) {
                edges.push((i, i + 1, 0.5));
            }
        }
        let layer = SimilarityLayer::new(n, edges.clone()).unwrap();
        let labels: Vec<Option<f64>> = (0..n)
            .map(|i| {
                if i % 3 == 0 {
                    Some(rng.random_range(-1.0..3.0))
                } else {
                    None
                }
            })
            .collect();
        let graph = TemporalAttributedGraph::new(
            n,
            1,
            1,
            vec![vec![0.0; n]],
            vec![labels.clone()],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let mask = LabelMask::from_graph(&graph);
        let out = hgf_impute(&graph, &mask, 0).unwrap();

        // Jacobi iteration oracle.
        let mut adj = vec![Vec::new(); n];
        for &(i, j, w) in &edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        let mut f: Vec<f64> = labels.iter().map(|l| l.unwrap_or(0.0)).collect();
        for _ in 0..20000 {
            let mut next = f.clone();
            for i in 0..n {
                if labels[i].is_none() {
                    let (mut num, mut den) = (0.0, 0.0);
                    for &(j, w) in &adj[i] {
                        num += w * f[j];
                        den += w;
                    }
                    next[i] = num / den;
                }
            }
            let delta: f64 = f.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            f = next;
            if delta < 1e-14 {
                break;
            }
        }
        for &(i, v) in &out.values {
            assert_abs_diff_eq!(v, f[i], epsilon = 1e-10);
        }
        // Maximum principle inside the (connected) graph.
        let lmin = labels.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
        let lmax = labels
            .iter()
            .flatten()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        for &(_, v) in &out.values {
            assert!(v >= lmin - 1e-10 && v <= lmax + 1e-10);
        }
    }

    #[test]
    fn harmonic_flags_label_free_components() {
        // Two disjoint 2-node components; the second has no label.
        let layer = SimilarityLayer::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let graph = TemporalAttributedGraph::new(
            4,
            1,
            1,
            vec![vec![0.0; 4]],
            vec![vec![Some(2.0), None, None, None]],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let mask = LabelMask::from_graph(&graph);
        let out = hgf_impute(&graph, &mask, 0).unwrap();
        assert_eq!(out.flagged, vec![2, 3]);
        for &(i, v) in &out.values {
            if i >= 2 {
                assert_abs_diff_eq!(v, 2.0); // global labeled mean
            } else {
                assert_abs_diff_eq!(v, 2.0); // single-neighbor copy
            }
        }
    }

    #[test]
    fn hgf_gcrf_with_no_missing_reduces_to_plain_fit() {
        let graph = labeled_path(vec![Some(1.0), Some(0.2), Some(-0.5)], &[0.5, 1.0]);
        let r = UnstructuredPrediction::new(3, 1, vec![vec![0.8, 0.1, -0.3]]).unwrap();
        let mask = LabelMask::all_observed(3, 1);
        let settings = OptimizerSettings::default();
        let hgf = fit_hgf_gcrf(&graph, &r, &mask, &settings).unwrap();
        let plain = gcrf::fit(&graph, &r, &settings).unwrap();
        assert_eq!(hgf.outcome.model.params, plain.model.params);
        assert_eq!(hgf.flagged_nodes, 0);
    }
}
