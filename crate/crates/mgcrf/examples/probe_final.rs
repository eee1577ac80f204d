//! Scratch probe: consolidated trend diagnostics per candidate calibration.

use mgcrf::baselines::fit_igcrf;
use mgcrf::ffn::{train_ffn, FfnSettings};
use mgcrf::gcrf::GcrfModel;
use mgcrf::graph::{GcrfParams, LabelMask, UnstructuredPrediction};
use mgcrf::harness::r_squared;
use mgcrf::marginal::{fit_marginal, predict_full};
use mgcrf::missingness::{apply, Mechanism, MechanismKind};
use mgcrf::optim::OptimizerSettings;
use mgcrf::synthgen::{generate, SyntheticSpec};

fn main() {
    let jitter: f64 = std::env::var("JITTER").unwrap_or("0.0".into()).parse().unwrap();
    let beta: f64 = std::env::var("BETA").unwrap_or("5.0".into()).parse().unwrap();
    let seeds: Vec<u64> = (0..3).collect();
    println!("=== beta={beta} jitter={jitter} (teacher scales are compile-time) ===");
    let spec0 = SyntheticSpec {
        rows: 20,
        cols: 20,
        n_steps: 5,
        beta,
        placement_jitter: jitter,
        ..SyntheticSpec::default()
    };

    // Ratio sweep + decomposition on seed 0, fraction 0.
    {
        let mut spec = spec0.clone();
        spec.seed = 100;
        let data = generate(&spec).unwrap();
        let g = &data.graph;
        let n = g.n_nodes();
        let t = g.n_steps();
        let test_step = t - 1;
        let truth: Vec<f64> = (0..n).map(|i| g.label(test_step, i).unwrap()).collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for step in 0..test_step {
            for i in 0..n {
                xs.push(g.feature(step, i).to_vec());
                ys.push(g.label(step, i).unwrap());
            }
        }
        let net = train_ffn(&xs, &ys, &FfnSettings { seed: 5, ..Default::default() }).unwrap();
        let mut values = vec![0.0; n * t];
        for step in 0..t {
            for i in 0..n {
                values[step * n + i] = net.predict(g.feature(step, i));
            }
        }
        let r_nn = UnstructuredPrediction::new(n, t, vec![values]).unwrap();
        let nn_test: Vec<f64> = (0..n).map(|i| r_nn.value(0, test_step, i)).collect();
        println!("nn R2 = {:.4}", r_squared(&nn_test, &truth));
        let err: Vec<f64> = nn_test.iter().zip(&truth).map(|(p, y)| p - y).collect();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        let var_y = var(&truth);
        let level: Vec<f64> = (0..n).map(|i| data.r_values.value(0, test_step, i)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| level[a].partial_cmp(&level[b]).unwrap());
        let bins = 20;
        let mut bias_field = vec![0.0; n];
        for b in 0..bins {
            let lo = b * n / bins;
            let hi = ((b + 1) * n / bins).min(n);
            let chunk = &order[lo..hi];
            let m = chunk.iter().map(|&i| err[i]).sum::<f64>() / chunk.len() as f64;
            for &i in chunk {
                bias_field[i] = m;
            }
        }
        let scatter: Vec<f64> = (0..n).map(|i| err[i] - bias_field[i]).collect();
        println!(
            "err={:.3} bias={:.3} scatter={:.3} of var_y",
            var(&err) / var_y,
            var(&bias_field) / var_y,
            var(&scatter) / var_y
        );
        print!("ratio sweep (nn R): ");
        for ratio in [1.0f64, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 35.0] {
            let m = GcrfModel::new(GcrfParams::from_logs(vec![0.0], vec![ratio.ln()])).unwrap();
            let post = predict_full(&m, g, &r_nn).unwrap();
            let pred: Vec<f64> = (test_step * n..t * n).map(|i| post.mean[i]).collect();
            print!("{ratio}:{:.3} ", r_squared(&pred, &truth));
        }
        println!();
    }

    // Mean trends over seeds.
    let eval = |mech: MechanismKind, frac: f64| -> (f64, f64, f64, f64, f64) {
        let mut acc = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &seed in &seeds {
            let mut spec = spec0.clone();
            spec.seed = seed;
            let data = generate(&spec).unwrap();
            let g = &data.graph;
            let n = g.n_nodes();
            let t = g.n_steps();
            let test_step = t - 1;
            let truth: Vec<f64> = (0..n).map(|i| g.label(test_step, i).unwrap()).collect();
            let train_steps: Vec<usize> = (0..test_step).collect();
            let mechanism = Mechanism::new(mech, frac, seed ^ 0xabc).unwrap();
            let applied = apply(&mechanism, g, &train_steps).unwrap();
            let mask: LabelMask = applied.mask;
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for &step in &train_steps {
                for i in 0..n {
                    if mask.is_observed(step, i) {
                        xs.push(g.feature(step, i).to_vec());
                        ys.push(g.label(step, i).unwrap());
                    }
                }
            }
            let net =
                train_ffn(&xs, &ys, &FfnSettings { seed, ..Default::default() }).unwrap();
            let mut values = vec![0.0; n * t];
            for step in 0..t {
                for i in 0..n {
                    values[step * n + i] = net.predict(g.feature(step, i));
                }
            }
            let r_nn = UnstructuredPrediction::new(n, t, vec![values]).unwrap();
            let nn_pred: Vec<f64> = (0..n).map(|i| r_nn.value(0, test_step, i)).collect();
            let train = g.restrict_steps(0..test_step);
            let r_train = r_nn.restrict_steps(0..test_step);
            let tmask = mask.restrict_steps(0..test_step);
            let settings = OptimizerSettings::default();
            let score = |m: &GcrfModel| {
                let post = predict_full(m, g, &r_nn).unwrap();
                let pred: Vec<f64> = (test_step * n..t * n).map(|i| post.mean[i]).collect();
                r_squared(&pred, &truth)
            };
            let ig = fit_igcrf(&train, &r_train, &tmask, &settings).unwrap();
            let mg = fit_marginal(&train, &r_train, &tmask, &settings).unwrap();
            acc.0 += r_squared(&nn_pred, &truth);
            acc.1 += score(&ig.model);
            acc.2 += score(&mg.model);
            acc.3 += ig.model.coupling_ratio();
            acc.4 += mg.model.coupling_ratio();
        }
        let k = seeds.len() as f64;
        (acc.0 / k, acc.1 / k, acc.2 / k, acc.3 / k, acc.4 / k)
    };
    for (mech, fracs) in [
        (MechanismKind::Random, vec![0.0, 0.2, 0.4, 0.8]),
        (MechanismKind::StronglyConnected, vec![0.05, 0.1, 0.2]),
    ] {
        for frac in fracs {
            let (nn, ig, mg, igr, mgr) = eval(mech, frac);
            println!(
                "{mech:?} f={frac}: nn={nn:.3} ig={ig:.3}(r{igr:.1}) mg={mg:.3}(r{mgr:.1}) | mg-ig={:+.3} mg-nn={:+.3}",
                mg - ig,
                mg - nn
            );
        }
    }
}
