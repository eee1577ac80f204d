//! Per-time-block likelihood and gradient engine shared by the fully
//! supervised, marginalized, and labeled-subgraph trainers.
//!
//! Everything decomposes over time blocks because the precision matrix is
//! block-diagonal. For one block with labeled set L and unlabeled set U the
//! marginal density of y_L is Gaussian with mean μ_L and precision
//! Q* = Q_LL − Q_LU Q_UU⁻¹ Q_UL. The code never forms Q* during training;
//! it uses three exact identities instead:
//!
//! * quadratic form: with z = [r'; −Q_UU⁻¹ Q_UL r'] and r' = y_L − μ_L,
//!   zᵀ·dQ·z = r'ᵀ·dQ*·r' for the marginal derivative of Q, and
//!   zᵀQz = r'ᵀQ*r';
//! * log-determinant: log det Q* = log det Q − log det Q_UU;
//! * mean term: r'ᵀ Q* dμ_L = zᵀ(db − dQ·μ), since Qz vanishes on U and
//!   dμ = Q⁻¹(db − dQ·μ).
//!
//! Trace terms use selected inverses of Q and Q_UU on their band patterns:
//! Tr(Q*⁻¹ dQ*) = Tr(Q⁻¹ dQ) − Tr(Q_UU⁻¹ dQ_UU). With U empty every identity
//! reduces to the fully supervised expressions, so the supervised path is the
//! same code.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::graph::{GcrfParams, TemporalAttributedGraph, UnstructuredPrediction};
use crate::linalg::SymBand;

/// Immutable per-block view of the data: structure, predictor outputs, and
/// (optionally missing) labels. Assembly from parameters is repeated every
/// objective evaluation; the structural parts are extracted once per fit.
#[derive(Debug, Clone)]
pub(crate) struct BlockData {
    pub n: usize,
    pub hbw: usize,
    /// Per layer: canonical edges (i < j, w > 0) and full row sums.
    pub layers: Vec<(Vec<(u32, u32, f64)>, Vec<f64>)>,
    /// Per predictor: one value per node.
    pub r: Vec<Vec<f64>>,
    /// Labels; `None` marks a node whose label is hidden or absent.
    pub y: Vec<Option<f64>>,
}

impl BlockData {
    /// Extracts block `step`, optionally restricted to a node subset (used by
    /// the ignore-missing trainer). `observed` decides which labels are
    /// visible; hidden labels become `None`.
    ///
    /// With a subset, `keep_full_degrees` controls the diagonal semantics:
    /// `true` keeps each node's row sums over the whole graph (the literal
    /// partition block of the precision matrix, whose diagonal still counts
    /// dropped neighbors), `false` recomputes degrees over surviving edges
    /// (an ordinary subgraph).
    pub fn from_graph(
        graph: &TemporalAttributedGraph,
        r: &UnstructuredPrediction,
        step: usize,
        subset: Option<(&[usize], bool)>,
        observed: &dyn Fn(usize) -> bool,
    ) -> BlockData {
        match subset {
            None => {
                let n = graph.n_nodes();
                let layers = graph
                    .layers_at(step)
                    .iter()
                    .map(|l| (l.edges().to_vec(), l.degrees().to_vec()))
                    .collect::<Vec<_>>();
                let hbw = layers
                    .iter()
                    .flat_map(|(e, _)| e.iter())
                    .map(|&(i, j, _)| (j - i) as usize)
                    .max()
                    .unwrap_or(0);
                let r_vals = (0..r.n_predictors())
                    .map(|k| (0..n).map(|i| r.value(k, step, i)).collect())
                    .collect();
                let y = (0..n)
                    .map(|i| graph.label(step, i).filter(|_| observed(i)))
                    .collect();
                BlockData {
                    n,
                    hbw,
                    layers,
                    r: r_vals,
                    y,
                }
            }
            Some((keep, keep_full_degrees)) => {
                let n = keep.len();
                let mut rank = vec![usize::MAX; graph.n_nodes()];
                for (ri, &i) in keep.iter().enumerate() {
                    rank[i] = ri;
                }
                let mut layers = Vec::with_capacity(graph.n_layers());
                for layer in graph.layers_at(step) {
                    let mut edges = Vec::new();
                    let mut degrees = if keep_full_degrees {
                        keep.iter().map(|&i| layer.degree(i)).collect()
                    } else {
                        vec![0.0; n]
                    };
                    for &(i, j, w) in layer.edges() {
                        let (ri, rj) = (rank[i as usize], rank[j as usize]);
                        if ri != usize::MAX && rj != usize::MAX {
                            edges.push((ri as u32, rj as u32, w));
                            if !keep_full_degrees {
                                degrees[ri] += w;
                                degrees[rj] += w;
                            }
                        }
                    }
                    layers.push((edges, degrees));
                }
                let hbw = layers
                    .iter()
                    .flat_map(|(e, _)| e.iter())
                    .map(|&(i, j, _)| (j - i) as usize)
                    .max()
                    .unwrap_or(0);
                let r_vals = (0..r.n_predictors())
                    .map(|k| keep.iter().map(|&i| r.value(k, step, i)).collect())
                    .collect();
                let y = keep
                    .iter()
                    .map(|&i| graph.label(step, i).filter(|_| observed(i)))
                    .collect();
                BlockData {
                    n,
                    hbw,
                    layers,
                    r: r_vals,
                    y,
                }
            }
        }
    }

    /// Q block for the given parameters.
    pub fn assemble(&self, alphas: &[f64], betas: &[f64]) -> SymBand {
        let sum_alpha: f64 = alphas.iter().sum();
        let mut q = SymBand::zeros(self.n, self.hbw);
        for i in 0..self.n {
            let mut d = 2.0 * sum_alpha;
            for ((_, degrees), &beta) in self.layers.iter().zip(betas) {
                d += 2.0 * beta * degrees[i];
            }
            q.set(i, i, d);
        }
        for ((edges, _), &beta) in self.layers.iter().zip(betas) {
            for &(i, j, w) in edges {
                q.add(i as usize, j as usize, -2.0 * beta * w);
            }
        }
        q
    }

    pub fn labeled(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.y[i].is_some()).collect()
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.y[i].is_none()).collect()
    }
}

/// Likelihood and gradient contribution of one block.
#[derive(Debug, Clone)]
pub(crate) struct BlockEval {
    pub ll: f64,
    pub grad_log_alpha: Vec<f64>,
    pub grad_log_beta: Vec<f64>,
    pub n_labeled: usize,
}

/// Evaluates one block. With `marginalize_missing == false` every node must
/// carry a label; with `true`, unlabeled nodes are integrated out. A block
/// with no labeled node contributes nothing after marginalization and is
/// skipped.
pub(crate) fn eval_block(
    bd: &BlockData,
    params: &GcrfParams,
    want_grad: bool,
    marginalize_missing: bool,
) -> Result<BlockEval> {
    let k = params.n_predictors();
    let l = params.n_layers();
    if bd.r.len() != k {
        return Err(Error::DimensionMismatch {
            context: "predictor count",
            expected: bd.r.len(),
            got: k,
        });
    }
    if bd.layers.len() != l {
        return Err(Error::DimensionMismatch {
            context: "layer count",
            expected: bd.layers.len(),
            got: l,
        });
    }
    let labeled = bd.labeled();
    let unlabeled = bd.unlabeled();
    if !marginalize_missing && !unlabeled.is_empty() {
        return Err(Error::MissingLabel {
            step: usize::MAX,
            node: unlabeled[0],
        });
    }
    if labeled.is_empty() {
        return Ok(BlockEval {
            ll: 0.0,
            grad_log_alpha: vec![0.0; k],
            grad_log_beta: vec![0.0; l],
            n_labeled: 0,
        });
    }

    let alphas = params.alphas();
    let betas = params.betas();
    let q = bd.assemble(&alphas, &betas);
    let chol = q.cholesky()?;
    let mut b = vec![0.0; bd.n];
    for (rk, &alpha) in bd.r.iter().zip(&alphas) {
        for i in 0..bd.n {
            b[i] += 2.0 * alpha * rk[i];
        }
    }
    let mu = chol.solve(&b);

    // Lifted residual z: z_L = y_L − μ_L, z_U = −Q_UU⁻¹ Q_UL z_L, so that
    // (Qz)_U = 0 and zᵀQz equals the marginal quadratic form.
    let mut z = vec![0.0; bd.n];
    for &i in &labeled {
        z[i] = bd.y[i].unwrap() - mu[i];
    }
    let (logdet_uu, chol_uu, urank) = if unlabeled.is_empty() {
        (0.0, None, Vec::new())
    } else {
        let mut urank = vec![usize::MAX; bd.n];
        for (ri, &i) in unlabeled.iter().enumerate() {
            urank[i] = ri;
        }
        // Q_UU keeps the full diagonal of Q (degrees still count labeled
        // neighbors) and the U-U couplings.
        let hbw_uu = bd
            .layers
            .iter()
            .flat_map(|(e, _)| e.iter())
            .filter_map(|&(i, j, _)| {
                let (ri, rj) = (urank[i as usize], urank[j as usize]);
                (ri != usize::MAX && rj != usize::MAX).then(|| ri.abs_diff(rj))
            })
            .max()
            .unwrap_or(0);
        let mut q_uu = SymBand::zeros(unlabeled.len(), hbw_uu);
        for (ri, &i) in unlabeled.iter().enumerate() {
            q_uu.set(ri, ri, q.get(i, i));
        }
        let mut rhs_u = vec![0.0; unlabeled.len()];
        for ((edges, _), &beta) in bd.layers.iter().zip(&betas) {
            let coeff = -2.0 * beta;
            for &(i, j, w) in edges {
                let (i, j) = (i as usize, j as usize);
                match (urank[i], urank[j]) {
                    (usize::MAX, usize::MAX) => {}
                    (ri, rj) if ri != usize::MAX && rj != usize::MAX => {
                        q_uu.add(ri, rj, coeff * w);
                    }
                    (ri, _) if ri != usize::MAX => rhs_u[ri] += coeff * w * z[j],
                    (_, rj) => rhs_u[rj] += coeff * w * z[i],
                }
            }
        }
        let chol_uu = q_uu.cholesky().map_err(|e| match e {
            Error::NotPositiveDefinite { index, pivot } => Error::NotPositiveDefinite {
                index: unlabeled[index],
                pivot,
            },
            other => other,
        })?;
        let z_u = chol_uu.solve(&rhs_u);
        for (ri, &i) in unlabeled.iter().enumerate() {
            z[i] = -z_u[ri];
        }
        (chol_uu.log_det(), Some(chol_uu), urank)
    };

    // zᵀQz through the sparse structure.
    let mut quad = 0.0;
    for i in 0..bd.n {
        quad += q.get(i, i) * z[i] * z[i];
    }
    for ((edges, _), &beta) in bd.layers.iter().zip(&betas) {
        for &(i, j, w) in edges {
            quad += 2.0 * (-2.0 * beta * w) * z[i as usize] * z[j as usize];
        }
    }
    let ll = -0.5 * quad + 0.5 * (chol.log_det() - logdet_uu)
        - 0.5 * labeled.len() as f64 * (2.0 * PI).ln();

    if !want_grad {
        return Ok(BlockEval {
            ll,
            grad_log_alpha: vec![0.0; k],
            grad_log_beta: vec![0.0; l],
            n_labeled: labeled.len(),
        });
    }

    let z_full = chol.selected_inverse();
    let z_uu = chol_uu.as_ref().map(|c| c.selected_inverse());
    let tr_full: f64 = z_full.diagonal().iter().sum();
    let tr_uu: f64 = z_uu
        .as_ref()
        .map_or(0.0, |z| z.diagonal().iter().sum::<f64>());
    let znorm2: f64 = z.iter().map(|v| v * v).sum();

    // ∂Q/∂α_k = 2I and ∂b/∂α_k = 2R_k for every k.
    let mut grad_log_alpha = Vec::with_capacity(k);
    for (rk, &alpha) in bd.r.iter().zip(&alphas) {
        let mean_term: f64 = z
            .iter()
            .zip(rk.iter().zip(&mu))
            .map(|(&zi, (&rki, &mui))| zi * 2.0 * (rki - mui))
            .sum();
        let g = -znorm2 + mean_term + (tr_full - tr_uu);
        grad_log_alpha.push(alpha * g);
    }

    // ∂Q/∂β_l has diagonal 2·deg_l(i) and off-diagonal −2·S_ij; for the
    // partition-block model the diagonal degrees are not the edge sums, so
    // the quadratic and mean terms use the general degree-plus-edges form
    // rather than the Laplacian difference form.
    let mut grad_log_beta = Vec::with_capacity(l);
    for ((edges, degrees), &beta) in bd.layers.iter().zip(&betas) {
        // quad_term = ½ zᵀ(∂Q/∂β)z, mean_term = ½ zᵀ(∂Q/∂β)μ.
        let mut quad_term: f64 = degrees
            .iter()
            .zip(&z)
            .map(|(&deg, &zi)| deg * zi * zi)
            .sum();
        let mut mean_term: f64 = degrees
            .iter()
            .zip(z.iter().zip(&mu))
            .map(|(&deg, (&zi, &mi))| deg * zi * mi)
            .sum();
        let mut tr_term: f64 = degrees
            .iter()
            .enumerate()
            .map(|(i, &deg)| deg * z_full.get(i, i))
            .sum();
        for &(i, j, w) in edges {
            let (i, j) = (i as usize, j as usize);
            quad_term -= 2.0 * w * z[i] * z[j];
            mean_term -= w * (z[i] * mu[j] + z[j] * mu[i]);
            tr_term -= 2.0 * w * z_full.get(i, j);
        }
        if let Some(z_uu_mat) = &z_uu {
            let mut tr_uu_l: f64 = unlabeled
                .iter()
                .enumerate()
                .map(|(ri, &i)| degrees[i] * z_uu_mat.get(ri, ri))
                .sum();
            for &(i, j, w) in edges {
                let (ri, rj) = (urank[i as usize], urank[j as usize]);
                if ri != usize::MAX && rj != usize::MAX {
                    tr_uu_l -= 2.0 * w * z_uu_mat.get(ri, rj);
                }
            }
            tr_term -= tr_uu_l;
        }
        let g = -quad_term - 2.0 * mean_term + tr_term;
        grad_log_beta.push(beta * g);
    }

    Ok(BlockEval {
        ll,
        grad_log_alpha,
        grad_log_beta,
        n_labeled: labeled.len(),
    })
}

/// Sums block evaluations into a total log-likelihood and gradient.
pub(crate) fn eval_blocks(
    blocks: &[BlockData],
    params: &GcrfParams,
    want_grad: bool,
    marginalize_missing: bool,
) -> Result<(f64, Vec<f64>, usize)> {
    let k = params.n_predictors();
    let l = params.n_layers();
    let mut ll = 0.0;
    let mut grad = vec![0.0; k + l];
    let mut n_labeled = 0;
    for bd in blocks {
        let eval = eval_block(bd, params, want_grad, marginalize_missing)?;
        ll += eval.ll;
        for (g, d) in grad[..k].iter_mut().zip(&eval.grad_log_alpha) {
            *g += d;
        }
        for (g, d) in grad[k..].iter_mut().zip(&eval.grad_log_beta) {
            *g += d;
        }
        n_labeled += eval.n_labeled;
    }
    Ok((ll, grad, n_labeled))
}
