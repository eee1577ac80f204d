//! Experiment harness: dataset preparation, mechanism sweeps, model
//! training/evaluation, and deterministic CSV reporting.

mod bench;
mod config;
mod station;

pub use bench::{bench, bench_csv, BenchRow};
pub use config::{load_config, parse_config, DatasetSource, ExperimentConfig, ModelKind, ParsedConfig};
pub use station::{load_station_dataset, StationDataset};

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{fit_hgf_gcrf, fit_igcrf, fit_mi_gcrf};
use crate::error::{Error, Result};
use crate::ffn::{train_ffn, FfnSettings};
use crate::gcrf::GcrfModel;
use crate::graph::{LabelMask, TemporalAttributedGraph, UnstructuredPrediction};
use crate::marginal::{fit_marginal, predict_full};
use crate::missingness::{apply, estimate_natural_distribution, Mechanism, MechanismKind};
use crate::optim::OptimizerSettings;
use crate::synthgen::generate;

/// Coefficient of determination: 1 − SS_res/SS_tot with SS_tot around the
/// truth mean, so predicting the mean scores exactly zero.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, y)| (p - y).powi(2))
        .sum();
    1.0 - ss_res / ss_tot
}

/// One evaluated (model, mechanism, fraction, repeat) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub model: ModelKind,
    pub mechanism: MechanismKind,
    pub fraction: f64,
    pub repeat: usize,
    pub outcome: std::result::Result<f64, String>,
    pub train_seconds: f64,
    pub predict_seconds: f64,
    pub notes: String,
}

/// All cells of a run plus aggregate statistics.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub cells: Vec<CellResult>,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub model: ModelKind,
    pub mechanism: MechanismKind,
    pub fraction: f64,
    pub mean_r2: f64,
    pub std_r2: f64,
    pub n_ok: usize,
}

impl MetricsReport {
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut keys: Vec<(ModelKind, MechanismKind, u64)> = self
            .cells
            .iter()
            .map(|c| (c.model, c.mechanism, c.fraction.to_bits()))
            .collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(model, mechanism, fbits)| {
                let fraction = f64::from_bits(fbits);
                let vals: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|c| {
                        c.model == model
                            && c.mechanism == mechanism
                            && c.fraction.to_bits() == fbits
                    })
                    .filter_map(|c| c.outcome.as_ref().ok().copied())
                    .collect();
                let n = vals.len();
                let mean = if n > 0 {
                    vals.iter().sum::<f64>() / n as f64
                } else {
                    f64::NAN
                };
                let std = if n > 1 {
                    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64)
                        .sqrt()
                } else {
                    0.0
                };
                Aggregate {
                    model,
                    mechanism,
                    fraction,
                    mean_r2: mean,
                    std_r2: std,
                    n_ok: n,
                }
            })
            .collect()
    }

    pub fn mean_r2(
        &self,
        model: ModelKind,
        mechanism: MechanismKind,
        fraction: f64,
    ) -> Option<f64> {
        self.aggregates()
            .into_iter()
            .find(|a| {
                a.model == model
                    && a.mechanism == mechanism
                    && (a.fraction - fraction).abs() < 1e-12
            })
            .map(|a| a.mean_r2)
    }

    /// Per-repeat rows; the result columns are deterministic per config.
    pub fn results_csv(&self) -> String {
        let mut rows: Vec<&CellResult> = self.cells.iter().collect();
        rows.sort_by(|a, b| {
            (a.model, a.mechanism, a.fraction.to_bits(), a.repeat).cmp(&(
                b.model,
                b.mechanism,
                b.fraction.to_bits(),
                b.repeat,
            ))
        });
        let mut out = String::from(
            "model,mechanism,fraction,repeat,r2,status,notes,train_seconds,predict_seconds\n",
        );
        for c in rows {
            let (r2, status) = match &c.outcome {
                Ok(v) => (format!("{v}"), "ok".to_string()),
                Err(e) => (String::from("NA"), format!("error: {e}")),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.3},{:.3}\n",
                c.model.label(),
                c.mechanism.label(),
                c.fraction,
                c.repeat,
                r2,
                status,
                c.notes,
                c.train_seconds,
                c.predict_seconds
            ));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("model,mechanism,fraction,mean_r2,std_r2,n_ok\n");
        for a in self.aggregates() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                a.model.label(),
                a.mechanism.label(),
                a.fraction,
                a.mean_r2,
                a.std_r2,
                a.n_ok
            ));
        }
        out
    }

    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.csv"), self.results_csv())?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        Ok(())
    }
}

/// Deterministic seed mixing for independent cells.
fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 27;
    }
    h
}

/// The dataset a repeat works on: full graph, designated training steps, and
/// the baseline observation mask before any mechanism runs.
struct RepeatData {
    graph: TemporalAttributedGraph,
    train_steps: Vec<usize>,
    test_step: usize,
}

fn prepare_repeat(config: &ExperimentConfig, repeat: usize) -> Result<RepeatData> {
    let graph = match &config.dataset {
        DatasetSource::Synthetic(spec) => {
            let mut spec = spec.clone();
            spec.seed = mix_seed(config.seed, &[repeat as u64, 0xda7a]);
            generate(&spec)?.graph
        }
        DatasetSource::GraphFile { path } => crate::graph::read_graph_file(Path::new(path))?.graph,
        DatasetSource::Stations {
            path,
            radius_km,
            train_window,
        } => {
            load_station_dataset(Path::new(path), *radius_km, *train_window)?
                .graph
        }
    };
    if graph.n_steps() < 2 {
        return Err(Error::InvalidConfig(
            "experiment needs at least two steps (train + test)".into(),
        ));
    }
    let test_step = graph.n_steps() - 1;
    Ok(RepeatData {
        train_steps: (0..test_step).collect(),
        test_step,
        graph,
    })
}

/// Trains the shared unstructured predictor on the labeled training
/// examples and evaluates it over every (step, node).
fn shared_predictor(
    data: &RepeatData,
    mask: &LabelMask,
    seed: u64,
) -> Result<(UnstructuredPrediction, Vec<f64>)> {
    let graph = &data.graph;
    let mut train_x = Vec::new();
    let mut train_y = Vec::new();
    for &t in &data.train_steps {
        for i in 0..graph.n_nodes() {
            if mask.is_observed(t, i) {
                train_x.push(graph.feature(t, i).to_vec());
                train_y.push(graph.label(t, i).unwrap());
            }
        }
    }
    if train_x.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    let net = train_ffn(
        &train_x,
        &train_y,
        &FfnSettings {
            seed,
            ..Default::default()
        },
    )?;
    let mut values = vec![0.0; graph.n_nodes() * graph.n_steps()];
    for t in 0..graph.n_steps() {
        for i in 0..graph.n_nodes() {
            values[t * graph.n_nodes() + i] = net.predict(graph.feature(t, i));
        }
    }
    let test_pred: Vec<f64> = (0..graph.n_nodes())
        .map(|i| values[data.test_step * graph.n_nodes() + i])
        .collect();
    let r = UnstructuredPrediction::new(graph.n_nodes(), graph.n_steps(), vec![values])?;
    Ok((r, test_pred))
}

/// Truth labels at the test step (only nodes that carry one).
fn test_truth(data: &RepeatData) -> (Vec<usize>, Vec<f64>) {
    let g = &data.graph;
    let mut idx = Vec::new();
    let mut y = Vec::new();
    for i in 0..g.n_nodes() {
        if let Some(v) = g.label(data.test_step, i) {
            idx.push(i);
            y.push(v);
        }
    }
    (idx, y)
}

fn predict_test_step(
    model: &GcrfModel,
    data: &RepeatData,
    r: &UnstructuredPrediction,
    idx: &[usize],
) -> Result<Vec<f64>> {
    // Blocks are independent, so inference on the test block alone is exact.
    let test = data.graph.restrict_steps(data.test_step..data.test_step + 1);
    let r_test = r.restrict_steps(data.test_step..data.test_step + 1);
    let post = predict_full(model, &test, &r_test)?;
    Ok(idx.iter().map(|&i| post.mean[i]).collect())
}

/// Runs one cell: trains the requested model under the mechanism mask and
/// scores the test step.
fn run_cell(
    model: ModelKind,
    data: &RepeatData,
    mask_applied: &crate::missingness::AppliedMask,
    r: &UnstructuredPrediction,
    nn_test_pred: &[f64],
    settings: &OptimizerSettings,
    mi_seed: u64,
) -> (std::result::Result<f64, String>, f64, f64, String) {
    let (idx, truth) = test_truth(data);
    if truth.is_empty() {
        return (
            Err("no labeled test nodes".to_string()),
            0.0,
            0.0,
            String::new(),
        );
    }
    let train_range = 0..data.train_steps.len();
    let train_graph = data.graph.restrict_steps(train_range.clone());
    let train_r = r.restrict_steps(train_range.clone());
    let train_mask = mask_applied.mask.restrict_steps(train_range);
    let mut notes = String::new();
    if mask_applied.fallback_used {
        notes.push_str("independent-set-fallback");
    }

    let t0 = Instant::now();
    let fitted: Result<GcrfModel> = match model {
        ModelKind::Nn => {
            let train_seconds = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let pred: Vec<f64> = idx.iter().map(|&i| nn_test_pred[i]).collect();
            let r2 = r_squared(&pred, &truth);
            return (
                Ok(r2),
                train_seconds,
                t1.elapsed().as_secs_f64(),
                notes,
            );
        }
        ModelKind::Igcrf => fit_igcrf(&train_graph, &train_r, &train_mask, settings)
            .map(|o| o.model),
        ModelKind::Mgcrf => fit_marginal(&train_graph, &train_r, &train_mask, settings)
            .map(|o| o.model),
        ModelKind::MiGcrf => {
            fit_mi_gcrf(&train_graph, &train_r, &train_mask, 5, mi_seed, settings)
                .map(|o| o.model)
        }
        ModelKind::HgfGcrf => fit_hgf_gcrf(&train_graph, &train_r, &train_mask, settings)
            .map(|o| {
                if o.flagged_nodes > 0 {
                    if !notes.is_empty() {
                        notes.push(' ');
                    }
                    notes.push_str(&format!("hgf-flagged={}", o.flagged_nodes));
                }
                o.outcome.model
            }),
    };
    let train_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let outcome = fitted
        .and_then(|m| predict_test_step(&m, data, r, &idx))
        .map(|pred| r_squared(&pred, &truth))
        .map_err(|e| e.to_string());
    (outcome, train_seconds, t1.elapsed().as_secs_f64(), notes)
}

/// Executes the configured sweep: for every repeat, mechanism, and fraction,
/// all models are evaluated against the same mask, and every cell is seeded
/// deterministically from the config seed.
pub fn run(config: &ExperimentConfig) -> Result<MetricsReport> {
    config.validate()?;
    let repeats: Vec<RepeatData> = (0..config.repeats)
        .map(|rep| prepare_repeat(config, rep))
        .collect::<Result<Vec<_>>>()?;

    // (repeat, mechanism, fraction) cells share the predictor and mask.
    let mut tasks = Vec::new();
    for (rep, data) in repeats.iter().enumerate() {
        for (mi, &mech) in config.mechanisms.iter().enumerate() {
            for (fi, &fraction) in config.fractions.iter().enumerate() {
                tasks.push((rep, data, mi, mech, fi, fraction));
            }
        }
    }
    let settings = OptimizerSettings::default();
    let cell_groups: Vec<Result<Vec<CellResult>>> = tasks
        .par_iter()
        .map(|&(rep, data, mi, mech, fi, fraction)| {
            let mech_seed = mix_seed(config.seed, &[rep as u64, mi as u64, fi as u64, 1]);
            let mut mechanism = Mechanism::new(mech, fraction, mech_seed)?;
            if mech == MechanismKind::NaturalDistribution {
                let history = LabelMask::from_graph(&data.graph)
                    .restrict_steps(0..data.train_steps.len());
                mechanism =
                    mechanism.with_natural_probs(estimate_natural_distribution(&history));
            }
            let applied = apply(&mechanism, &data.graph, &data.train_steps)?;
            let nn_seed = mix_seed(config.seed, &[rep as u64, mi as u64, fi as u64, 2]);
            let (r, nn_test_pred) = shared_predictor(data, &applied.mask, nn_seed)?;
            let mut cells = Vec::new();
            for &model in &config.models {
                let mi_seed = mix_seed(config.seed, &[rep as u64, mi as u64, fi as u64, 3]);
                let (outcome, train_s, pred_s, notes) = run_cell(
                    model,
                    data,
                    &applied,
                    &r,
                    &nn_test_pred,
                    &settings,
                    mi_seed,
                );
                cells.push(CellResult {
                    model,
                    mechanism: mech,
                    fraction,
                    repeat: rep,
                    outcome,
                    train_seconds: train_s,
                    predict_seconds: pred_s,
                    notes,
                });
            }
            Ok(cells)
        })
        .collect();

    let mut cells = Vec::new();
    for group in cell_groups {
        cells.extend(group?);
    }
    let report = MetricsReport {
        cells,
        repeats: config.repeats,
    };
    if let Some(dir) = &config.output_dir {
        report.write_csv(Path::new(dir))?;
    }
    Ok(report)
}

/// Ranking of removal strategies for planned label reduction: runs the
/// marginalized model (plus any other configured models) across
/// strategies × fractions and orders strategies by mean accuracy.
pub fn active_restriction_report(
    config: &ExperimentConfig,
    strategies: &[MechanismKind],
    fractions: &[f64],
) -> Result<(MetricsReport, Vec<(MechanismKind, f64)>)> {
    let mut dedup = Vec::new();
    for &s in strategies {
        if dedup.contains(&s) {
            eprintln!("warning: duplicate strategy {:?} ignored", s);
        } else {
            dedup.push(s);
        }
    }
    let mut restricted = config.clone();
    restricted.mechanisms = dedup.clone();
    restricted.fractions = fractions.to_vec();
    if restricted.models.is_empty() {
        restricted.models = vec![ModelKind::Mgcrf];
    }
    let report = run(&restricted)?;
    let mut ranking: Vec<(MechanismKind, f64)> = dedup
        .iter()
        .map(|&mech| {
            let vals: Vec<f64> = report
                .aggregates()
                .into_iter()
                .filter(|a| a.mechanism == mech && a.model == ModelKind::Mgcrf)
                .map(|a| a.mean_r2)
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
            (mech, mean)
        })
        .collect();
    ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    Ok((report, ranking))
}
