//! Scratch probe: decompose prediction error sources on one replica.

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
    let var_y = {
        let m = truth.iter().sum::<f64>() / n as f64;
        truth.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64
    };
    println!("test label variance: {var_y:.4}");

    // Ideal: generator params + true R.
    let post = predict_full(&data.generator, g, &data.r_values).unwrap();
    let ideal: Vec<f64> = (test_step * n..t * n).map(|i| post.mean[i]).collect();
    println!("ideal GCRF (true params, true R): R2={:.4}", r_squared(&ideal, &truth));

    // True R alone as a predictor.
    let r_alone: Vec<f64> = (0..n).map(|i| data.r_values.value(0, test_step, i)).collect();
    println!("true R alone: R2={:.4}", r_squared(&r_alone, &truth));

    // NN trained on all training labels.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for step in 0..test_step {
        for i in 0..n {
            xs.push(g.feature(step, i).to_vec());
            ys.push(g.label(step, i).unwrap());
        }
    }
    for (lr, epochs) in [(0.1, 2000), (0.3, 2000), (0.1, 8000), (0.5, 8000)] {
        let net = train_ffn(
            &xs,
            &ys,
            &FfnSettings {
                seed: 3,
                learning_rate: lr,
                max_epochs: epochs,
                patience: 200,
                ..Default::default()
            },
        )
        .unwrap();
        let nn_test: Vec<f64> = (0..n).map(|i| net.predict(g.feature(test_step, i))).collect();
        println!("nn lr={lr} epochs={epochs}: test R2={:.4}", r_squared(&nn_test, &truth));
    }

    // Default NN feeding the GCRF with generator params.
    let net = train_ffn(&xs, &ys, &FfnSettings { seed: 3, ..Default::default() }).unwrap();
    let mut values = vec![0.0; n * t];
    for step in 0..t {
        for i in 0..n {
            values[step * n + i] = net.predict(g.feature(step, i));
        }
    }
    let r_nn = UnstructuredPrediction::new(n, t, vec![values]).unwrap();
    let nn_test: Vec<f64> = (0..n).map(|i| r_nn.value(0, test_step, i)).collect();
    println!("default nn: test R2={:.4}", r_squared(&nn_test, &truth));
    let post = predict_full(&data.generator, g, &r_nn).unwrap();
    let smoothed: Vec<f64> = (test_step * n..t * n).map(|i| post.mean[i]).collect();
    println!(
        "GCRF with generator params + NN R: R2={:.4}",
        r_squared(&smoothed, &truth)
    );
    // Sweep the coupling ratio to see prediction sensitivity.
    for ratio in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
        let model = GcrfModel::new(GcrfParams::from_logs(vec![0.0], vec![f64::ln(ratio)])).unwrap();
        let post = predict_full(&model, g, &r_nn).unwrap();
        let pred: Vec<f64> = (test_step * n..t * n).map(|i| post.mean[i]).collect();
        println!("  ratio {ratio:>5}: R2={:.4}", r_squared(&pred, &truth));
    }

    // Fitted ratios under missingness.
    let train = g.restrict_steps(0..test_step);
    let r_train = r_nn.restrict_steps(0..test_step);
    let settings = OptimizerSettings::default();
    for mech in [MechanismKind::Random, MechanismKind::StronglyConnected] {
        for frac in [0.0, 0.05, 0.2, 0.4, 0.8] {
            let mechanism = Mechanism::new(mech, frac, 11).unwrap();
            let applied = apply(&mechanism, &train, &(0..test_step).collect::<Vec<_>>()).unwrap();
            let mask: LabelMask = applied.mask;
            let ig = fit_igcrf(&train, &r_train, &mask, &settings).unwrap();
            let mg = fit_marginal(&train, &r_train, &mask, &settings).unwrap();
            let pred_of = |m: &GcrfModel| {
                let post = predict_full(m, g, &r_nn).unwrap();
                let pred: Vec<f64> = (test_step * n..t * n).map(|i| post.mean[i]).collect();
                r_squared(&pred, &truth)
            };
            println!(
                "{mech:?} f={frac}: igcrf a={:.3} ratio={:.2} R2={:.4} | mgcrf a={:.3} ratio={:.2} R2={:.4}",
                ig.model.params.alpha(0),
                ig.model.coupling_ratio(),
                pred_of(&ig.model),
                mg.model.params.alpha(0),
                mg.model.coupling_ratio(),
                pred_of(&mg.model),
            );
        }
    }
}
