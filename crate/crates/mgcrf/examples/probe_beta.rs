//! Scratch probe: sweep generator coupling and placement jitter; check every
//! acceptance-relevant trend quantity.

use mgcrf::baselines::fit_igcrf;
use mgcrf::ffn::{train_ffn, FfnSettings};
use mgcrf::gcrf::GcrfModel;
use mgcrf::graph::{LabelMask, UnstructuredPrediction};
use mgcrf::harness::r_squared;
use mgcrf::marginal::{fit_marginal, predict_full};
use mgcrf::missingness::{apply, Mechanism, MechanismKind};
use mgcrf::optim::OptimizerSettings;
use mgcrf::synthgen::{generate, SyntheticSpec};

struct Cell {
    nn: f64,
    ig: f64,
    mg: f64,
}

fn eval(spec: &SyntheticSpec, seed: u64, mech: MechanismKind, frac: f64) -> Cell {
    let mut spec = spec.clone();
    spec.seed = seed;
    let data = generate(&spec).unwrap();
    let g = &data.graph;
    let n = g.n_nodes();
    let t = g.n_steps();
    let test_step = t - 1;
    let truth: Vec<f64> = (0..n).map(|i| g.label(test_step, i).unwrap()).collect();
    let train_steps: Vec<usize> = (0..test_step).collect();
    let mechanism = Mechanism::new(mech, frac, seed ^ 0x5a5a).unwrap();
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
    let net = train_ffn(&xs, &ys, &FfnSettings { seed, ..Default::default() }).unwrap();
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
    let train_mask = mask.restrict_steps(0..test_step);
    let settings = OptimizerSettings::default();
    let score = |m: &GcrfModel| {
        let post = predict_full(m, g, &r_nn).unwrap();
        let pred: Vec<f64> = (test_step * n..t * n).map(|i| post.mean[i]).collect();
        r_squared(&pred, &truth)
    };
    let ig = fit_igcrf(&train, &r_train, &train_mask, &settings).unwrap();
    let mg = fit_marginal(&train, &r_train, &train_mask, &settings).unwrap();
    Cell {
        nn: r_squared(&nn_pred, &truth),
        ig: score(&ig.model),
        mg: score(&mg.model),
    }
}

fn main() {
    let betas: Vec<f64> = std::env::var("BETAS")
        .unwrap_or("1,2,5".into())
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    let jitters: Vec<f64> = std::env::var("JITTERS")
        .unwrap_or("0.5".into())
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    let seeds: Vec<u64> = (0..4).collect();
    for &beta in &betas {
        for &jitter in &jitters {
            let spec = SyntheticSpec {
                rows: 20,
                cols: 20,
                n_steps: 5,
                beta,
                placement_jitter: jitter,
                ..SyntheticSpec::default()
            };
            let mean = |f: &dyn Fn(&Cell) -> f64, cells: &[Cell]| -> f64 {
                cells.iter().map(f).sum::<f64>() / cells.len() as f64
            };
            let grab = |mech, frac| -> Vec<Cell> {
                seeds.iter().map(|&s| eval(&spec, s, mech, frac)).collect()
            };
            let base = grab(MechanismKind::Random, 0.0);
            let r20 = grab(MechanismKind::Random, 0.2);
            let r40 = grab(MechanismKind::Random, 0.4);
            let r80 = grab(MechanismKind::Random, 0.8);
            let s05 = grab(MechanismKind::StronglyConnected, 0.05);
            let s20 = grab(MechanismKind::StronglyConnected, 0.2);
            let e80 = grab(MechanismKind::ExtremeY, 0.8);
            println!(
                "beta={beta} jitter={jitter}: f0 nn={:.3} ig={:.3} mg={:.3} | gap0={:.3}",
                mean(&|c| c.nn, &base),
                mean(&|c| c.ig, &base),
                mean(&|c| c.mg, &base),
                mean(&|c| c.mg, &base) - mean(&|c| c.nn, &base),
            );
            println!(
                "   random: mg-ig @20={:+.3} @40={:+.3} @80={:+.3} | mg20-mg0={:+.3}",
                mean(&|c| c.mg - c.ig, &r20),
                mean(&|c| c.mg - c.ig, &r40),
                mean(&|c| c.mg - c.ig, &r80),
                mean(&|c| c.mg, &r20) - mean(&|c| c.mg, &base),
            );
            println!(
                "   strong: mg-ig @5={:+.3} @20={:+.3} | extreme80 drop mg={:+.3} nn={:+.3}",
                mean(&|c| c.mg - c.ig, &s05),
                mean(&|c| c.mg - c.ig, &s20),
                mean(&|c| c.mg, &base) - mean(&|c| c.mg, &e80),
                mean(&|c| c.nn, &base) - mean(&|c| c.nn, &e80),
            );
        }
    }
}
