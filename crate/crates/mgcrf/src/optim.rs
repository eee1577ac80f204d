//! Limited-memory quasi-Newton ascent with backtracking line search.
//!
//! The objective is concave in the effective parameters, so a plain L-BFGS
//! ascent with an Armijo backtracking search converges quickly and every
//! accepted iterate improves the objective (monotone ascent).

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OptimizerSettings {
    /// Number of curvature pairs kept for the two-loop recursion.
    pub memory: usize,
    pub max_iters: usize,
    /// Convergence threshold on the gradient infinity norm.
    pub tol: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            memory: 10,
            max_iters: 500,
            tol: 1e-6,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the start plus after each accepted iterate.
    pub trace: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes `f`, which returns the objective and its gradient.
pub fn maximize<F>(mut f: F, x0: &[f64], settings: &OptimizerSettings) -> Result<OptimOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0.to_vec();
    let (mut fx, mut gx) = f(&x)?;
    if !fx.is_finite() || gx.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteObjective {
            context: "objective or gradient non-finite at the starting point",
        });
    }
    let mut trace = vec![fx];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    for iter in 0..settings.max_iters {
        if inf_norm(&gx) <= settings.tol {
            return Ok(OptimOutcome {
                x,
                objective: fx,
                gradient: gx,
                iterations: iter,
                converged: true,
                trace,
            });
        }

        // Two-loop recursion on the ascent direction.
        let mut dir = gx.clone();
        let m = s_hist.len();
        let mut alphas = vec![0.0; m];
        for i in (0..m).rev() {
            alphas[i] = rho_hist[i] * dot(&s_hist[i], &dir);
            for (d, yv) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= alphas[i] * yv;
            }
        }
        if m > 0 {
            let last = m - 1;
            let gamma = dot(&s_hist[last], &y_hist[last]) / dot(&y_hist[last], &y_hist[last]);
            for d in dir.iter_mut() {
                *d *= gamma;
            }
        }
        for i in 0..m {
            let beta = rho_hist[i] * dot(&y_hist[i], &dir);
            for (d, sv) in dir.iter_mut().zip(&s_hist[i]) {
                *d += (alphas[i] - beta) * sv;
            }
        }
        let mut slope = dot(&gx, &dir);
        if slope <= 0.0 {
            // Curvature history misleads; fall back to steepest ascent.
            dir = gx.clone();
            slope = dot(&gx, &gx);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // Backtracking Armijo search on the ascent direction.
        let mut step = if m == 0 {
            1.0 / inf_norm(&dir).max(1.0)
        } else {
            1.0
        };
        let c1 = 1e-4;
        let mut accepted = None;
        for _ in 0..settings.max_backtracks {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            match f(&xt) {
                Ok((ft, gt))
                    if ft.is_finite()
                        && gt.iter().all(|g| g.is_finite())
                        && ft >= fx + c1 * step * slope =>
                {
                    accepted = Some((xt, ft, gt));
                    break;
                }
                Ok(_) | Err(Error::NotPositiveDefinite { .. }) => step *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((xt, ft, gt)) = accepted else {
            // No admissible step; the current point is the answer.
            return Ok(OptimOutcome {
                x,
                objective: fx,
                gradient: gx,
                iterations: iter,
                converged: false,
                trace,
            });
        };

        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gx.iter().zip(&gt).map(|(old, new)| old - new).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * inf_norm(&s).max(1e-300) * inf_norm(&yv).max(1e-300) {
            if s_hist.len() == settings.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(yv);
        }
        x = xt;
        fx = ft;
        gx = gt;
        trace.push(fx);
    }

    let converged = inf_norm(&gx) <= settings.tol;
    Ok(OptimOutcome {
        x,
        objective: fx,
        gradient: gx,
        iterations: settings.max_iters,
        converged,
        trace,
    })
}
