//! Scratch probe for trend calibration (not part of the shipped examples).

use mgcrf::gcrf;
use mgcrf::harness::{run, DatasetSource, ExperimentConfig, ModelKind};
use mgcrf::missingness::MechanismKind;
use mgcrf::optim::OptimizerSettings;
use mgcrf::synthgen::{generate, SyntheticSpec};

fn main() {
    // 1. Generate-and-refit with the generator's own unstructured outputs.
    let spec = SyntheticSpec {
        rows: 10,
        cols: 10,
        n_steps: 5,
        seed: 42,
        ..SyntheticSpec::default()
    };
    let data = generate(&spec).unwrap();
    let t = data.graph.n_steps();
    let train = data.graph.restrict_steps(0..t - 1);
    let r_train = data.r_values.restrict_steps(0..t - 1);
    let fit = gcrf::fit(&train, &r_train, &OptimizerSettings::default()).unwrap();
    println!(
        "refit 10x10: alpha={:.4} beta={:.4} ratio={:.3} (target 5), iters={}, converged={}",
        fit.model.params.alpha(0),
        fit.model.params.beta(0),
        fit.model.coupling_ratio(),
        fit.iterations,
        fit.converged
    );

    // 2. Trend probe: 3 repeats of a 20x20 replica.
    for (mech, fractions) in [
        (MechanismKind::Random, vec![0.0, 0.2, 0.8]),
        (MechanismKind::StronglyConnected, vec![0.05, 0.1, 0.2]),
        (MechanismKind::ExtremeY, vec![0.0, 0.8]),
    ] {
        let config = ExperimentConfig {
            dataset: DatasetSource::Synthetic(SyntheticSpec {
                rows: 20,
                cols: 20,
                n_steps: 5,
                ..SyntheticSpec::default()
            }),
            mechanisms: vec![mech],
            fractions,
            models: vec![
                ModelKind::Nn,
                ModelKind::Igcrf,
                ModelKind::Mgcrf,
                ModelKind::MiGcrf,
                ModelKind::HgfGcrf,
            ],
            repeats: 3,
            seed: 7,
            output_dir: None,
            workers: None,
        };
        let t0 = std::time::Instant::now();
        let report = run(&config).unwrap();
        println!("--- {mech:?} ({:.1}s)", t0.elapsed().as_secs_f64());
        for a in report.aggregates() {
            println!(
                "  {:>8} f={:<4} mean_r2={:+.3} std={:.3} n={}",
                a.model.label(),
                a.fraction,
                a.mean_r2,
                a.std_r2,
                a.n_ok
            );
        }
    }
}
