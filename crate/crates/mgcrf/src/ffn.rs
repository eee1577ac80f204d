//! Single-hidden-layer feed-forward regressor: sigmoid hidden units, one
//! linear output. Used both as the unstructured predictor baseline and as
//! the teacher network of the synthetic generator.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct FeedForwardRegressor {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Hidden weights, row-major H×D.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    /// Input/output standardization learned during training; identity for
    /// hand-constructed networks.
    x_shift: Vec<f64>,
    x_scale: Vec<f64>,
    y_shift: f64,
    y_scale: f64,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl FeedForwardRegressor {
    /// Network with explicit weights and identity standardization.
    pub fn from_weights(
        input_dim: usize,
        hidden_dim: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
    ) -> Result<Self> {
        if w1.len() != hidden_dim * input_dim || b1.len() != hidden_dim || w2.len() != hidden_dim {
            return Err(Error::DimensionMismatch {
                context: "network weight shapes",
                expected: hidden_dim * input_dim,
                got: w1.len(),
            });
        }
        if w1.iter().chain(&b1).chain(&w2).any(|v| !v.is_finite()) || !b2.is_finite() {
            return Err(Error::InvalidValue("non-finite network weight".into()));
        }
        Ok(FeedForwardRegressor {
            input_dim,
            hidden_dim,
            w1,
            b1,
            w2,
            b2,
            x_shift: vec![0.0; input_dim],
            x_scale: vec![1.0; input_dim],
            y_shift: 0.0,
            y_scale: 1.0,
        })
    }

    /// Fixed random weights per seed: hidden weights and biases uniform in
    /// ±`hidden_scale`, output weights uniform in ±`output_scale`, output
    /// bias `out_bias`.
    pub fn random(
        input_dim: usize,
        hidden_dim: usize,
        hidden_scale: f64,
        output_scale: f64,
        out_bias: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = (0..hidden_dim * input_dim)
            .map(|_| rng.random_range(-hidden_scale..hidden_scale))
            .collect();
        let b1 = (0..hidden_dim)
            .map(|_| rng.random_range(-hidden_scale..hidden_scale))
            .collect();
        let w2 = (0..hidden_dim)
            .map(|_| rng.random_range(-output_scale..output_scale))
            .collect();
        FeedForwardRegressor {
            input_dim,
            hidden_dim,
            w1,
            b1,
            w2,
            b2: out_bias,
            x_shift: vec![0.0; input_dim],
            x_scale: vec![1.0; input_dim],
            y_shift: 0.0,
            y_scale: 1.0,
        }
    }

    /// Deterministic forward pass.
    pub fn predict(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.input_dim);
        let mut out = self.b2;
        for h in 0..self.hidden_dim {
            let row = &self.w1[h * self.input_dim..(h + 1) * self.input_dim];
            let mut a = self.b1[h];
            for d in 0..self.input_dim {
                a += row[d] * (x[d] - self.x_shift[d]) / self.x_scale[d];
            }
            out += self.w2[h] * sigmoid(a);
        }
        out * self.y_scale + self.y_shift
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct FfnSettings {
    /// Hidden units; `None` uses 2·D.
    pub hidden_dim: Option<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for FfnSettings {
    fn default() -> Self {
        FfnSettings {
            hidden_dim: None,
            learning_rate: 0.1,
            momentum: 0.9,
            max_epochs: 2000,
            patience: 100,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

struct TrainState {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

/// Full-batch gradient descent with momentum on the mean squared error.
/// Epochs that would increase the training loss are rejected: the weights
/// roll back, the learning rate halves, and the velocity resets, so the
/// accepted-loss sequence never increases. Training stops early when the
/// held-out split (10% of the labeled data by default) stops improving, and
/// the best-validation weights are returned.
pub fn train_ffn(
    features: &[Vec<f64>],
    labels: &[f64],
    settings: &FfnSettings,
) -> Result<FeedForwardRegressor> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "training examples vs labels",
            expected: features.len(),
            got: labels.len(),
        });
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(Error::DimensionMismatch {
            context: "feature dimensions",
            expected: d,
            got: 0,
        });
    }
    if labels.iter().any(|y| !y.is_finite())
        || features.iter().flatten().any(|v| !v.is_finite())
    {
        return Err(Error::NonFiniteObjective {
            context: "training data contains non-finite values",
        });
    }
    let n = features.len();
    let h = settings.hidden_dim.unwrap_or(2 * d).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    // Standardize inputs and center/scale the target.
    let mut x_shift = vec![0.0; d];
    let mut x_scale = vec![0.0; d];
    for f in features {
        for (s, v) in x_shift.iter_mut().zip(f) {
            *s += v;
        }
    }
    for s in x_shift.iter_mut() {
        *s /= n as f64;
    }
    for f in features {
        for (k, v) in f.iter().enumerate() {
            x_scale[k] += (v - x_shift[k]).powi(2);
        }
    }
    for s in x_scale.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let y_shift = labels.iter().sum::<f64>() / n as f64;
    let y_var = labels.iter().map(|y| (y - y_shift).powi(2)).sum::<f64>() / n as f64;
    let y_scale = y_var.sqrt().max(1e-12);

    let xs: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            f.iter()
                .enumerate()
                .map(|(k, v)| (v - x_shift[k]) / x_scale[k])
                .collect()
        })
        .collect();
    let ys: Vec<f64> = labels.iter().map(|y| (y - y_shift) / y_scale).collect();

    // Deterministic split: shuffle indices, hold out the prefix.
    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let n_val = if n >= 10 {
        ((n as f64 * settings.validation_fraction).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(n_val);

    let init = 1.0 / (d as f64).sqrt();
    let mut st = TrainState {
        w1: (0..h * d).map(|_| rng.random_range(-init..init)).collect(),
        b1: vec![0.0; h],
        w2: (0..h).map(|_| rng.random_range(-init..init)).collect(),
        b2: 0.0,
    };

    let forward_hidden = |st: &TrainState, x: &[f64], act: &mut [f64]| -> f64 {
        let mut out = st.b2;
        for j in 0..h {
            let row = &st.w1[j * d..(j + 1) * d];
            let mut a = st.b1[j];
            for k in 0..d {
                a += row[k] * x[k];
            }
            let s = sigmoid(a);
            act[j] = s;
            out += st.w2[j] * s;
        }
        out
    };
    let mse = |st: &TrainState, idx: &[usize]| -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let mut act = vec![0.0; h];
        let mut e = 0.0;
        for &i in idx {
            let p = forward_hidden(st, &xs[i], &mut act);
            e += (p - ys[i]).powi(2);
        }
        e / idx.len() as f64
    };

    let mut lr = settings.learning_rate;
    let mut vel_w1 = vec![0.0; h * d];
    let mut vel_b1 = vec![0.0; h];
    let mut vel_w2 = vec![0.0; h];
    let mut vel_b2 = 0.0;
    let mut train_loss = mse(&st, train_idx);
    let mut best_val = if n_val > 0 { mse(&st, val_idx) } else { train_loss };
    let mut best = (st.w1.clone(), st.b1.clone(), st.w2.clone(), st.b2);
    let mut stall = 0usize;
    let m = train_idx.len() as f64;
    let mut act = vec![0.0; h];

    for _ in 0..settings.max_epochs {
        // Full-batch gradient.
        let mut g_w1 = vec![0.0; h * d];
        let mut g_b1 = vec![0.0; h];
        let mut g_w2 = vec![0.0; h];
        let mut g_b2 = 0.0;
        for &i in train_idx {
            let p = forward_hidden(&st, &xs[i], &mut act);
            let e = 2.0 * (p - ys[i]) / m;
            g_b2 += e;
            for j in 0..h {
                let s = act[j];
                g_w2[j] += e * s;
                let back = e * st.w2[j] * s * (1.0 - s);
                g_b1[j] += back;
                let row = &mut g_w1[j * d..(j + 1) * d];
                for k in 0..d {
                    row[k] += back * xs[i][k];
                }
            }
        }

        // Momentum step.
        let prev = (st.w1.clone(), st.b1.clone(), st.w2.clone(), st.b2);
        for (v, g) in vel_w1.iter_mut().zip(&g_w1) {
            *v = settings.momentum * *v - lr * g;
        }
        for (v, g) in vel_b1.iter_mut().zip(&g_b1) {
            *v = settings.momentum * *v - lr * g;
        }
        for (v, g) in vel_w2.iter_mut().zip(&g_w2) {
            *v = settings.momentum * *v - lr * g;
        }
        vel_b2 = settings.momentum * vel_b2 - lr * g_b2;
        for (w, v) in st.w1.iter_mut().zip(&vel_w1) {
            *w += v;
        }
        for (w, v) in st.b1.iter_mut().zip(&vel_b1) {
            *w += v;
        }
        for (w, v) in st.w2.iter_mut().zip(&vel_w2) {
            *w += v;
        }
        st.b2 += vel_b2;

        let new_loss = mse(&st, train_idx);
        if !new_loss.is_finite() {
            return Err(Error::NonFiniteObjective {
                context: "network training loss diverged",
            });
        }
        if new_loss > train_loss {
            // Rejected epoch: roll back, cool down, clear momentum.
            (st.w1, st.b1, st.w2, st.b2) = prev;
            lr *= 0.5;
            vel_w1.iter_mut().for_each(|v| *v = 0.0);
            vel_b1.iter_mut().for_each(|v| *v = 0.0);
            vel_w2.iter_mut().for_each(|v| *v = 0.0);
            vel_b2 = 0.0;
            if lr < 1e-12 {
                break;
            }
            continue;
        }
        train_loss = new_loss;

        let score = if n_val > 0 { mse(&st, val_idx) } else { train_loss };
        if score < best_val - 1e-12 {
            best_val = score;
            best = (st.w1.clone(), st.b1.clone(), st.w2.clone(), st.b2);
            stall = 0;
        } else {
            stall += 1;
            if stall >= settings.patience {
                break;
            }
        }
    }

    Ok(FeedForwardRegressor {
        input_dim: d,
        hidden_dim: h,
        w1: best.0,
        b1: best.1,
        w2: best.2,
        b2: best.3,
        x_shift,
        x_scale,
        y_shift,
        y_scale,
    })
}
