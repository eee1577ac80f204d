//! Gaussian process regression over feature vectors, used to impute missing
//! labels with a full predictive distribution.

use crate::error::{Error, Result};
use crate::linalg::SymBand;

/// Squared-exponential kernel hyperparameters plus observation noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GpHyper {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyper {
    /// Data-driven defaults: length scale from the median pairwise feature
    /// distance, signal variance from the label variance, noise at 10% of
    /// the signal.
    pub fn heuristic(train_x: &[&[f64]], train_y: &[f64]) -> GpHyper {
        let n = train_x.len();
        // Cap the pairwise scan for very large labeled sets; the stride keeps
        // the subsample deterministic.
        let stride = (n / 256).max(1);
        let sample: Vec<&[f64]> = train_x.iter().step_by(stride).copied().collect();
        let mut dists = Vec::new();
        for i in 0..sample.len() {
            for j in (i + 1)..sample.len() {
                let d2: f64 = sample[i]
                    .iter()
                    .zip(sample[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                dists.push(d2.sqrt());
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if dists.is_empty() {
            1.0
        } else {
            dists[dists.len() / 2].max(1e-8)
        };
        let mean = train_y.iter().sum::<f64>() / n.max(1) as f64;
        let var = train_y.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n.max(1) as f64;
        let signal = var.max(1e-8);
        GpHyper {
            length_scale: median,
            signal_variance: signal,
            noise_variance: 0.1 * signal,
        }
    }
}

fn kernel(a: &[f64], b: &[f64], hyper: &GpHyper) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    hyper.signal_variance * (-d2 / (2.0 * hyper.length_scale * hyper.length_scale)).exp()
}

/// A fitted GP: training inputs, the Cholesky factor of K + σ_n²I, and the
/// weights (K + σ_n²I)⁻¹(y − m) around the prior mean m = mean(y).
#[derive(Debug, Clone)]
pub struct GpImputer {
    pub hyper: GpHyper,
    train_x: Vec<Vec<f64>>,
    chol: crate::linalg::BandCholesky,
    weights: Vec<f64>,
    prior_mean: f64,
}

impl GpImputer {
    pub fn fit(train_x: &[&[f64]], train_y: &[f64], hyper: GpHyper) -> Result<GpImputer> {
        if train_x.is_empty() || train_x.len() != train_y.len() {
            return Err(Error::EmptyLabeledSet);
        }
        let n = train_x.len();
        let jitter = 1e-10 * hyper.signal_variance.max(1.0);
        let mut k = SymBand::zeros(n, n.saturating_sub(1));
        for i in 0..n {
            for j in i..n {
                let mut v = kernel(train_x[i], train_x[j], &hyper);
                if i == j {
                    v += hyper.noise_variance + jitter;
                }
                k.set(i, j, v);
            }
        }
        let chol = k.cholesky()?;
        let prior_mean = train_y.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = train_y.iter().map(|y| y - prior_mean).collect();
        let weights = chol.solve(&centered);
        Ok(GpImputer {
            hyper,
            train_x: train_x.iter().map(|x| x.to_vec()).collect(),
            chol,
            weights,
            prior_mean,
        })
    }

    /// Posterior mean and (latent) variance at one query point.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.train_x.len();
        let mut kq = vec![0.0; n];
        for i in 0..n {
            kq[i] = kernel(&self.train_x[i], x, &self.hyper);
        }
        let mean = self.prior_mean
            + kq.iter()
                .zip(&self.weights)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        let mut w = kq;
        self.chol.solve_lower_in_place(&mut w);
        let var = self.hyper.signal_variance - w.iter().map(|v| v * v).sum::<f64>();
        (mean, var.max(0.0))
    }
}

/// Standard GP posterior at the query points given labeled examples:
/// means and nonnegative marginal variances.
pub fn gp_impute(
    train_x: &[&[f64]],
    train_y: &[f64],
    query_x: &[&[f64]],
    hyper: &GpHyper,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let gp = GpImputer::fit(train_x, train_y, hyper.clone())?;
    let mut means = Vec::with_capacity(query_x.len());
    let mut vars = Vec::with_capacity(query_x.len());
    for q in query_x {
        let (m, v) = gp.predict(q);
        means.push(m);
        vars.push(v);
    }
    Ok((means, vars))
}
