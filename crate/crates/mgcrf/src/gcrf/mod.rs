//! Fully supervised Gaussian conditional random field: conditional
//! log-likelihood, analytic gradients, quasi-Newton training, and Gaussian
//! inference.
//!
//! The conditional density over all labels is N(μ, Q⁻¹) with Q assembled from
//! association weights α (one per unstructured predictor) and interaction
//! weights β (one per similarity layer). Parameters live in the log domain,
//! which keeps Q positive definite and the optimization unconstrained.

pub(crate) mod blocks;

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{
    assemble_precision, GcrfParams, PrecisionSystem, TemporalAttributedGraph,
    UnstructuredPrediction,
};
use crate::optim::{maximize, OptimOutcome, OptimizerSettings};
use blocks::{eval_blocks, BlockData};

/// A trained GCRF: the association/interaction weights in log domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GcrfModel {
    pub params: GcrfParams,
}

impl GcrfModel {
    pub fn new(params: GcrfParams) -> Result<Self> {
        if params.n_predictors() == 0 || params.n_layers() == 0 {
            return Err(Error::InvalidValue(
                "a GCRF needs at least one predictor and one similarity layer".into(),
            ));
        }
        Ok(GcrfModel { params })
    }

    pub fn predictor_count(&self) -> usize {
        self.params.n_predictors()
    }

    pub fn layer_count(&self) -> usize {
        self.params.n_layers()
    }

    /// β/α with both sides summed over their components; the ratio governs
    /// how strongly predictions are smoothed toward neighbors.
    pub fn coupling_ratio(&self) -> f64 {
        let a: f64 = self.params.alphas().iter().sum();
        let b: f64 = self.params.betas().iter().sum();
        b / a
    }

    /// Serializes as a small text format: K, L, log_alpha[], log_beta[].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "params {} {}",
            self.params.n_predictors(),
            self.params.n_layers()
        )
        .unwrap();
        write!(s, "log_alpha").unwrap();
        for v in &self.params.log_alpha {
            write!(s, " {v}").unwrap();
        }
        writeln!(s).unwrap();
        write!(s, "log_beta").unwrap();
        for v in &self.params.log_beta {
            write!(s, " {v}").unwrap();
        }
        writeln!(s).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut k = 0usize;
        let mut l = 0usize;
        let mut log_alpha = Vec::new();
        let mut log_beta = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next().unwrap() {
                "params" => {
                    k = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or(Error::Parse {
                            line: lineno,
                            message: "bad predictor count".into(),
                        })?;
                    l = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or(Error::Parse {
                            line: lineno,
                            message: "bad layer count".into(),
                        })?;
                }
                "log_alpha" => {
                    log_alpha = parts
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::Parse {
                            line: lineno,
                            message: "bad log_alpha value".into(),
                        })?;
                }
                "log_beta" => {
                    log_beta = parts
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::Parse {
                            line: lineno,
                            message: "bad log_beta value".into(),
                        })?;
                }
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("unknown tag '{other}'"),
                    })
                }
            }
        }
        if log_alpha.len() != k || log_beta.len() != l {
            return Err(Error::InvalidValue(
                "parameter counts do not match header".into(),
            ));
        }
        GcrfModel::new(GcrfParams::from_logs(log_alpha, log_beta))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        GcrfModel::from_text(&std::fs::read_to_string(path)?)
    }
}

/// The Gaussian inference result: mean μ solving Qμ = b, plus the system.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub system: PrecisionSystem,
}

fn full_blocks(
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
) -> Result<Vec<BlockData>> {
    if r.n_nodes() != graph.n_nodes() || r.n_steps() != graph.n_steps() {
        return Err(Error::DimensionMismatch {
            context: "unstructured prediction shape vs graph",
            expected: graph.n_nodes() * graph.n_steps(),
            got: r.n_nodes() * r.n_steps(),
        });
    }
    Ok((0..graph.n_steps())
        .map(|t| BlockData::from_graph(graph, r, t, None, &|_| true))
        .collect())
}

fn require_all_labeled(graph: &TemporalAttributedGraph) -> Result<()> {
    for t in 0..graph.n_steps() {
        for i in 0..graph.n_nodes() {
            if graph.label(t, i).is_none() {
                return Err(Error::MissingLabel { step: t, node: i });
            }
        }
    }
    Ok(())
}

/// Log of the full conditional density at the graph's labels:
/// −½(y−μ)ᵀQ(y−μ) + ½ log det Q − (NT/2) log 2π. Every label must be present.
pub fn log_likelihood(
    model: &GcrfModel,
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
) -> Result<f64> {
    require_all_labeled(graph)?;
    let blocks = full_blocks(graph, r)?;
    let (ll, _, _) = eval_blocks(&blocks, &model.params, false, false)?;
    Ok(ll)
}

/// Gradient of the full conditional log-likelihood with respect to
/// (log α, log β): the effective-parameter derivatives chain-ruled through
/// the exponential map.
pub fn gradient(
    model: &GcrfModel,
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
) -> Result<(Vec<f64>, Vec<f64>)> {
    require_all_labeled(graph)?;
    let blocks = full_blocks(graph, r)?;
    let (_, grad, _) = eval_blocks(&blocks, &model.params, true, false)?;
    let k = model.predictor_count();
    Ok((grad[..k].to_vec(), grad[k..].to_vec()))
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: GcrfModel,
    /// Final normalized objective (log-likelihood per labeled instance).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Normalized objective at the start and after each accepted iterate.
    pub trace: Vec<f64>,
}

/// Shared trainer: maximizes the (possibly marginal) log-likelihood of the
/// given blocks, normalized by the number of labeled instances so step sizes
/// are comparable across graph sizes.
pub(crate) fn fit_blocks(
    blocks: &[BlockData],
    k: usize,
    l: usize,
    settings: &OptimizerSettings,
    marginalize_missing: bool,
) -> Result<FitOutcome> {
    let n_labeled: usize = blocks.iter().map(|b| b.labeled().len()).sum();
    if n_labeled == 0 {
        return Err(Error::EmptyLabeledSet);
    }
    let scale = 1.0 / n_labeled as f64;
    let objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let params = GcrfParams::from_vector(x, k, l);
        let (ll, mut grad, _) = eval_blocks(blocks, &params, true, marginalize_missing)?;
        for g in grad.iter_mut() {
            *g *= scale;
        }
        Ok((ll * scale, grad))
    };
    let x0 = GcrfParams::unit(k, l).to_vector();
    let out: OptimOutcome = maximize(objective, &x0, settings)?;
    Ok(FitOutcome {
        model: GcrfModel::new(GcrfParams::from_vector(&out.x, k, l))?,
        objective: out.objective,
        iterations: out.iterations,
        converged: out.converged,
        trace: out.trace,
    })
}

/// Trains a GCRF on fully labeled data by maximizing the conditional
/// log-likelihood.
pub fn fit(
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
    settings: &OptimizerSettings,
) -> Result<FitOutcome> {
    require_all_labeled(graph)?;
    let blocks = full_blocks(graph, r)?;
    fit_blocks(&blocks, r.n_predictors(), graph.n_layers(), settings, false)
}

/// Gaussian inference: μ = Q⁻¹b per time block. Depends only on attributes
/// and structure, never on which labels are observed.
pub fn predict(
    model: &GcrfModel,
    graph: &TemporalAttributedGraph,
    r: &UnstructuredPrediction,
) -> Result<GaussianPosterior> {
    let system = assemble_precision(graph, &model.params, r)?;
    let mean = system.mean()?;
    Ok(GaussianPosterior { mean, system })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{LabelMask, Similarity, SimilarityLayer};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn two_node() -> (TemporalAttributedGraph, UnstructuredPrediction) {
        let layer = SimilarityLayer::new(2, vec![(0, 1, 0.5)]).unwrap();
        let graph = TemporalAttributedGraph::new(
            2,
            1,
            1,
            vec![vec![0.0, 0.0]],
            vec![vec![Some(3.5), Some(4.5)]],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(2, 1, vec![vec![3.0, 5.0]]).unwrap();
        (graph, r)
    }

    #[test]
    fn one_node_log_likelihood_is_univariate_gaussian() {
        // N=1, K=1, α=1, R=0, y=0: μ=0, Q=2, ll = ½log2 − ½log(2π).
        let layer = SimilarityLayer::new(1, vec![]).unwrap();
        let graph = TemporalAttributedGraph::new(
            1,
            1,
            1,
            vec![vec![0.0]],
            vec![vec![Some(0.0)]],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(1, 1, vec![vec![0.0]]).unwrap();
        let model = GcrfModel::new(GcrfParams::unit(1, 1)).unwrap();
        let ll = log_likelihood(&model, &graph, &r).unwrap();
        assert_abs_diff_eq!(ll, 0.5 * 2.0_f64.ln() - 0.5 * (2.0 * PI).ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_likelihood_at_mean_is_half_log_det() {
        // Labels equal μ = (3.5, 4.5): the quadratic term vanishes.
        let (graph, r) = two_node();
        let model = GcrfModel::new(GcrfParams::unit(1, 1)).unwrap();
        let ll = log_likelihood(&model, &graph, &r).unwrap();
        let det: f64 = 3.0 * 3.0 - 1.0; // det [[3,-1],[-1,3]]
        assert_abs_diff_eq!(ll, 0.5 * det.ln() - (2.0 * PI).ln(), epsilon = 1e-12);
    }

    /// Dense multivariate-normal oracle: explicit inverse and determinant of
    /// the assembled precision, evaluated with nalgebra.
    fn dense_gaussian_ll(
        graph: &TemporalAttributedGraph,
        model: &GcrfModel,
        r: &UnstructuredPrediction,
    ) -> f64 {
        let sys = assemble_precision(graph, &model.params, r).unwrap();
        let nt = sys.order();
        let q = nalgebra::DMatrix::from_fn(nt, nt, |i, j| sys.entry(i, j));
        let b = nalgebra::DVector::from_column_slice(sys.b());
        let mu = q.clone().lu().solve(&b).unwrap();
        let mut y = nalgebra::DVector::zeros(nt);
        for t in 0..graph.n_steps() {
            for i in 0..graph.n_nodes() {
                y[t * graph.n_nodes() + i] = graph.label(t, i).unwrap();
            }
        }
        let d = &y - &mu;
        let quad = (d.transpose() * &q * &d)[(0, 0)];
        -0.5 * quad + 0.5 * q.determinant().ln() - 0.5 * nt as f64 * (2.0 * PI).ln()
    }

    #[test]
    fn log_likelihood_matches_dense_oracle_on_path() {
        let layer = SimilarityLayer::new(3, vec![(0, 1, 0.5), (1, 2, 1.0)]).unwrap();
        let graph = TemporalAttributedGraph::new(
            3,
            1,
            1,
            vec![vec![0.0; 3]],
            vec![vec![Some(1.2), Some(-0.4), Some(2.0)]],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(3, 1, vec![vec![1.0, -2.0, 0.5]]).unwrap();
        let model =
            GcrfModel::new(GcrfParams::from_logs(vec![2.0_f64.ln()], vec![0.0])).unwrap();
        let ll = log_likelihood(&model, &graph, &r).unwrap();
        assert_abs_diff_eq!(ll, dense_gaussian_ll(&graph, &model, &r), epsilon = 1e-10);
    }

    /// Central finite differences of the log-likelihood in the log domain.
    pub(crate) fn fd_gradient(
        graph: &TemporalAttributedGraph,
        r: &UnstructuredPrediction,
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
            let fp = log_likelihood(&mp, graph, r).unwrap();
            v[i] = orig - h;
            let mm = GcrfModel::new(GcrfParams::from_vector(&v, k, l)).unwrap();
            let fm = log_likelihood(&mm, graph, r).unwrap();
            v[i] = orig;
            grad[i] = (fp - fm) / (2.0 * h);
        }
        grad
    }

    #[test]
    fn gradient_matches_finite_differences_on_two_node() {
        let (graph, r) = two_node();
        let params = GcrfParams::from_logs(vec![0.3], vec![-0.2]);
        let model = GcrfModel::new(params.clone()).unwrap();
        let (ga, gb) = gradient(&model, &graph, &r).unwrap();
        let fd = fd_gradient(&graph, &r, &params);
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
    fn gradient_near_exact_fit_matches_finite_differences() {
        // Single predictor equal to y, β → 0⁺.
        let layer = SimilarityLayer::new(2, vec![(0, 1, 0.5)]).unwrap();
        let graph = TemporalAttributedGraph::new(
            2,
            1,
            1,
            vec![vec![0.0, 0.0]],
            vec![vec![Some(1.0), Some(-2.0)]],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(2, 1, vec![vec![1.0, -2.0]]).unwrap();
        let params = GcrfParams::from_logs(vec![0.0], vec![-8.0]);
        let model = GcrfModel::new(params.clone()).unwrap();
        let (ga, gb) = gradient(&model, &graph, &r).unwrap();
        let fd = fd_gradient(&graph, &r, &params);
        let scale = fd.iter().fold(0.0_f64, |m, g| m.max(g.abs())).max(1e-8);
        assert!((ga[0] - fd[0]).abs() / scale <= 1e-5);
        assert!((gb[0] - fd[1]).abs() / scale <= 1e-5);
    }

    #[test]
    fn identical_layers_get_identical_beta_gradients() {
        let mk_layer = || SimilarityLayer::new(3, vec![(0, 1, 0.7), (1, 2, 0.4)]).unwrap();
        let graph = TemporalAttributedGraph::new(
            3,
            1,
            1,
            vec![vec![0.0; 3]],
            vec![vec![Some(0.5), Some(1.5), Some(-1.0)]],
            Similarity::Static(vec![mk_layer(), mk_layer()]),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(3, 1, vec![vec![0.2, 1.0, -0.7]]).unwrap();
        let model = GcrfModel::new(GcrfParams::unit(1, 2)).unwrap();
        let (_, gb) = gradient(&model, &graph, &r).unwrap();
        assert_abs_diff_eq!(gb[0], gb[1], epsilon = 1e-12);
    }

    #[test]
    fn predict_two_node_mean() {
        let (graph, r) = two_node();
        let model = GcrfModel::new(GcrfParams::unit(1, 1)).unwrap();
        let post = predict(&model, &graph, &r).unwrap();
        assert_abs_diff_eq!(post.mean[0], 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(post.mean[1], 4.5, epsilon = 1e-12);
        // Residual contract: ‖Qμ − b‖ / ‖b‖ ≤ 1e-8.
        let qmu = post.system.block(0).matvec(&post.mean);
        let num: f64 = qmu
            .iter()
            .zip(post.system.b())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = post.system.b().iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(num / den <= 1e-8);
    }

    #[test]
    fn beta_zero_prediction_is_convex_combination_of_predictors() {
        let layer = SimilarityLayer::new(2, vec![(0, 1, 0.5)]).unwrap();
        let graph = TemporalAttributedGraph::new(
            2,
            1,
            1,
            vec![vec![0.0, 0.0]],
            vec![vec![None, None]],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let r =
            UnstructuredPrediction::new(2, 1, vec![vec![1.0, 3.0], vec![5.0, -1.0]]).unwrap();
        let params = GcrfParams::from_logs(vec![0.0, 2.0_f64.ln()], vec![-800.0]);
        let model = GcrfModel::new(params).unwrap();
        let post = predict(&model, &graph, &r).unwrap();
        // (α₁R₁ + α₂R₂)/(α₁+α₂) with α = (1, 2).
        assert_abs_diff_eq!(post.mean[0], (1.0 + 2.0 * 5.0) / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(post.mean[1], (3.0 - 2.0) / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn single_predictor_prediction_tends_to_r_as_beta_vanishes() {
        let (graph, r) = two_node();
        let model =
            GcrfModel::new(GcrfParams::from_logs(vec![0.0], vec![-800.0])).unwrap();
        let post = predict(&model, &graph, &r).unwrap();
        assert_abs_diff_eq!(post.mean[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(post.mean[1], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_errors_on_missing_labels_and_empty_set() {
        let layer = SimilarityLayer::new(2, vec![(0, 1, 0.5)]).unwrap();
        let graph = TemporalAttributedGraph::new(
            2,
            1,
            1,
            vec![vec![0.0, 0.0]],
            vec![vec![Some(1.0), None]],
            Similarity::Static(vec![layer]),
            None,
        )
        .unwrap();
        let r = UnstructuredPrediction::new(2, 1, vec![vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            fit(&graph, &r, &OptimizerSettings::default()),
            Err(Error::MissingLabel { .. })
        ));
        let mask = LabelMask::new(2, 1, vec![false, false]).unwrap();
        let blocks: Vec<_> = (0..1)
            .map(|t| {
                blocks::BlockData::from_graph(&graph, &r, t, None, &|i| mask.is_observed(t, i))
            })
            .collect();
        assert!(matches!(
            fit_blocks(&blocks, 1, 1, &OptimizerSettings::default(), true),
            Err(Error::EmptyLabeledSet)
        ));
    }

    #[test]
    fn params_round_trip_through_text() {
        let model = GcrfModel::new(GcrfParams::from_logs(
            vec![0.125, -3.5],
            vec![1.75],
        ))
        .unwrap();
        let text = model.to_text();
        let back = GcrfModel::from_text(&text).unwrap();
        assert_eq!(model, back);
    }
}
