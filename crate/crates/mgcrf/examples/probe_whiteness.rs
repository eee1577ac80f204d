//! Scratch probe: split the unstructured predictor's test error into a
//! smooth level-dependent bias and level-conditional scatter, and check
//! where the smoothing ratio peaks with the true generator R.

use mgcrf::ffn::{train_ffn, FfnSettings};
use mgcrf::gcrf::GcrfModel;
use mgcrf::graph::{GcrfParams, UnstructuredPrediction};
use mgcrf::harness::r_squared;
use mgcrf::marginal::predict_full;
use mgcrf::synthgen::{generate, SyntheticSpec};

fn main() {
    let spec = SyntheticSpec {
        rows: 20,
        cols: 20,
        n_steps: 5,
        seed: 1,
        ..SyntheticSpec::default()
    };
    let data = generate(&spec).unwrap();
    let g = &data.graph;
    let n = g.n_nodes();
    let t = g.n_steps();
    let test_step = t - 1;
    let truth: Vec<f64> = (0..n).map(|i| g.label(test_step, i).unwrap()).collect();

    // Ratio sweep with TRUE R: must peak at the generator ratio (5).
    println!("ratio sweep with true R:");
    for ratio in [0.5f64, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0] {
        let m = GcrfModel::new(GcrfParams::from_logs(vec![0.0], vec![ratio.ln()])).unwrap();
        let post = predict_full(&m, g, &data.r_values).unwrap();
        let pred: Vec<f64> = (test_step * n..t * n).map(|i| post.mean[i]).collect();
        println!("  ratio {ratio:>5}: R2={:.4}", r_squared(&pred, &truth));
    }

    // NN error decomposition.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for step in 0..test_step {
        for i in 0..n {
            xs.push(g.feature(step, i).to_vec());
            ys.push(g.label(step, i).unwrap());
        }
    }
    let net = train_ffn(&xs, &ys, &FfnSettings { seed: 3, ..Default::default() }).unwrap();
    let nn_test: Vec<f64> = (0..n).map(|i| net.predict(g.feature(test_step, i))).collect();
    let err: Vec<f64> = nn_test.iter().zip(&truth).map(|(p, y)| p - y).collect();
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    };
    let var_y = var(&truth);
    println!("nn R2 = {:.4}", r_squared(&nn_test, &truth));

    // Bin the error by the true R level (20 quantile bins).
    let mut order: Vec<usize> = (0..n).collect();
    let level: Vec<f64> = (0..n).map(|i| data.r_values.value(0, test_step, i)).collect();
    order.sort_by(|&a, &b| level[a].partial_cmp(&level[b]).unwrap());
    let bins = 20;
    let mut bias_field = vec![0.0; n];
    for b in 0..bins {
        let lo = b * n / bins;
        let hi = ((b + 1) * n / bins).min(n);
        let chunk = &order[lo..hi];
        let mean_e = chunk.iter().map(|&i| err[i]).sum::<f64>() / chunk.len() as f64;
        for &i in chunk {
            bias_field[i] = mean_e;
        }
    }
    let scatter: Vec<f64> = (0..n).map(|i| err[i] - bias_field[i]).collect();
    println!(
        "error var share = {:.3}; bias share = {:.3}; scatter share = {:.3}",
        var(&err) / var_y,
        var(&bias_field) / var_y,
        var(&scatter) / var_y
    );

    // Neighbor correlation of the error field across grid edges.
    let mut cross = 0.0;
    let mut cnt = 0.0;
    let e_mean = err.iter().sum::<f64>() / n as f64;
    for layer in g.layers_at(test_step) {
        for &(i, j, _) in layer.edges() {
            cross += (err[i as usize] - e_mean) * (err[j as usize] - e_mean);
            cnt += 1.0;
        }
    }
    println!(
        "edge correlation of nn error: {:.3}",
        cross / cnt / var(&err)
    );

    // Scatter of the label noise itself for reference.
    let mu_true = {
        let post = predict_full(&data.generator, g, &data.r_values).unwrap();
        let v: Vec<f64> = (test_step * n..t * n).map(|i| post.mean[i]).collect();
        v
    };
    let eps: Vec<f64> = truth.iter().zip(&mu_true).map(|(y, m)| y - m).collect();
    println!("epsilon share = {:.3}", var(&eps) / var_y);
}
