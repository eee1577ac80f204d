//! Wall-clock characterization of assembly, training, and inference across
//! grid sizes.

use std::time::Instant;

use crate::error::Result;
use crate::gcrf;
use crate::graph::{assemble_precision, LabelMask};
use crate::harness::ModelKind;
use crate::marginal;
use crate::missingness::{apply, Mechanism, MechanismKind};
use crate::optim::OptimizerSettings;
use crate::synthgen::{generate, SyntheticSpec};

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub grid_side: usize,
    pub n_nodes: usize,
    pub model: ModelKind,
    pub assemble_seconds: f64,
    pub fit_seconds: f64,
    pub iterations: usize,
    pub seconds_per_iteration: f64,
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "grid_side,n_nodes,model,assemble_seconds,fit_seconds,iterations,seconds_per_iteration\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{},{:.6}\n",
            r.grid_side,
            r.n_nodes,
            r.model.label(),
            r.assemble_seconds,
            r.fit_seconds,
            r.iterations,
            r.seconds_per_iteration
        ));
    }
    out
}

/// Times assembly and a full training run per model per grid size. Only the
/// two GCRF trainers are measured; the benchmark reports measurements, not
/// expectations.
pub fn bench(sizes: &[usize], models: &[ModelKind], seed: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    let settings = OptimizerSettings::default();
    for &side in sizes {
        let spec = SyntheticSpec {
            rows: side,
            cols: side,
            seed,
            ..SyntheticSpec::default()
        };
        let data = generate(&spec)?;
        let train = data.graph.restrict_steps(0..data.graph.n_steps() - 1);
        let r_train = data
            .r_values
            .restrict_steps(0..data.graph.n_steps() - 1);

        let t0 = Instant::now();
        let _sys = assemble_precision(&train, &data.generator.params, &r_train)?;
        let assemble_seconds = t0.elapsed().as_secs_f64();

        for &model in models {
            let t1 = Instant::now();
            let iterations = match model {
                ModelKind::Igcrf | ModelKind::Nn | ModelKind::MiGcrf | ModelKind::HgfGcrf => {
                    // The structured trainers dominate scale-up behavior;
                    // other models are timed through the experiment runner.
                    let out = gcrf::fit(&train, &r_train, &settings)?;
                    out.iterations
                }
                ModelKind::Mgcrf => {
                    let mech = Mechanism::new(MechanismKind::Random, 0.2, seed)?;
                    let applied = apply(&mech, &train, &(0..train.n_steps()).collect::<Vec<_>>())?;
                    let mask: LabelMask = applied.mask;
                    let out = marginal::fit_marginal(&train, &r_train, &mask, &settings)?;
                    out.iterations
                }
            };
            let fit_seconds = t1.elapsed().as_secs_f64();
            rows.push(BenchRow {
                grid_side: side,
                n_nodes: side * side,
                model,
                assemble_seconds,
                fit_seconds,
                iterations,
                seconds_per_iteration: fit_seconds / iterations.max(1) as f64,
            });
        }
    }
    Ok(rows)
}
