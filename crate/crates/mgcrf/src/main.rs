//! Thin command-line front end; all logic lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mgcrf::baselines::{fit_mi_gcrf, hgf_impute};
use mgcrf::graph::{read_graph_file, write_graph_file, LabelMask};
use mgcrf::harness::{self, ModelKind};
use mgcrf::missingness::read_mask_file;
use mgcrf::optim::OptimizerSettings;
use mgcrf::synthgen::{generate, write_dataset, SyntheticSpec};

#[derive(Parser)]
#[command(
    name = "mgcrf",
    about = "Structured regression on temporal graphs with missing labels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic grid dataset and write it with its provenance.
    Synth {
        #[arg(long, default_value_t = 40)]
        rows: usize,
        #[arg(long, default_value_t = 40)]
        cols: usize,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 5.0)]
        beta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the graph and provenance files.
        #[arg(long, default_value = "data")]
        out_dir: PathBuf,
        /// Basename of the emitted files.
        #[arg(long, default_value = "synthetic")]
        name: String,
    },
    /// Execute an experiment configuration and write CSV reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads for concurrent cells.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Rank label-reduction strategies (requires a [restrict] section).
    Restrict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Time assembly and training across grid sizes.
    Bench {
        /// Comma-separated grid sides, e.g. 10,20,40.
        #[arg(long, value_delimiter = ',', default_value = "10,20")]
        sizes: Vec<usize>,
        /// Comma-separated models (igcrf, mgcrf).
        #[arg(long, value_delimiter = ',', default_value = "mgcrf")]
        models: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export imputed label completions in the graph file format.
    Impute {
        #[arg(long)]
        graph: PathBuf,
        /// Mask sidecar of missing (node, step) pairs; defaults to the
        /// graph's own missing labels.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// hgf or mi.
        #[arg(long)]
        method: String,
        /// Completions to draw for mi.
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "imputed")]
        out_dir: PathBuf,
    },
}

fn init_workers(workers: Option<usize>) {
    if let Some(w) = workers {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global();
    }
}

fn real_main() -> mgcrf::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth {
            rows,
            cols,
            steps,
            noise,
            alpha,
            beta,
            seed,
            out_dir,
            name,
        } => {
            let spec = SyntheticSpec {
                rows,
                cols,
                n_steps: steps,
                noise_fraction: noise,
                alpha,
                beta,
                seed,
                ..SyntheticSpec::default()
            };
            let data = generate(&spec)?;
            write_dataset(&out_dir, &name, &spec, &data)?;
            println!(
                "wrote {} and {} ({} nodes, {} steps)",
                out_dir.join(format!("{name}.graph.txt")).display(),
                out_dir.join(format!("{name}.provenance.txt")).display(),
                data.graph.n_nodes(),
                data.graph.n_steps()
            );
        }
        Command::Run {
            config,
            out_dir,
            workers,
        } => {
            let parsed = harness::load_config(&config)?;
            let mut experiment = parsed.experiment;
            if let Some(dir) = out_dir {
                experiment.output_dir = Some(dir.display().to_string());
            }
            init_workers(workers.or(experiment.workers));
            let report = harness::run(&experiment)?;
            print!("{}", report.summary_csv());
            if let Some(dir) = &experiment.output_dir {
                println!("# wrote {dir}/results.csv and {dir}/summary.csv");
            }
        }
        Command::Restrict {
            config,
            out_dir,
            workers,
        } => {
            let parsed = harness::load_config(&config)?;
            let (strategies, fractions) = parsed.restrict.ok_or_else(|| {
                mgcrf::Error::InvalidConfig("config has no [restrict] section".into())
            })?;
            let mut experiment = parsed.experiment;
            if let Some(dir) = out_dir {
                experiment.output_dir = Some(dir.display().to_string());
            }
            init_workers(workers.or(experiment.workers));
            let (report, ranking) =
                harness::active_restriction_report(&experiment, &strategies, &fractions)?;
            println!("strategy,mean_r2");
            for (mech, mean) in ranking {
                println!("{},{mean}", mech.label());
            }
            if let Some(dir) = &experiment.output_dir {
                report.write_csv(std::path::Path::new(dir))?;
                println!("# wrote {dir}/results.csv and {dir}/summary.csv");
            }
        }
        Command::Bench {
            sizes,
            models,
            seed,
            out,
        } => {
            let models = models
                .iter()
                .map(|m| ModelKind::parse(m))
                .collect::<mgcrf::Result<Vec<_>>>()?;
            let rows = harness::bench(&sizes, &models, seed)?;
            let csv = mgcrf::harness::bench_csv(&rows);
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Impute {
            graph,
            mask,
            method,
            samples,
            seed,
            out_dir,
        } => {
            let loaded = read_graph_file(&graph)?;
            let g = loaded.graph;
            let mask = match mask {
                Some(path) => read_mask_file(&path)?,
                None => LabelMask::from_graph(&g),
            };
            mask.validate_against(&g)?;
            std::fs::create_dir_all(&out_dir)?;
            match method.as_str() {
                "hgf" => {
                    let mut labels: Vec<Vec<Option<f64>>> = (0..g.n_steps())
                        .map(|t| {
                            (0..g.n_nodes())
                                .map(|i| g.label(t, i).filter(|_| mask.is_observed(t, i)))
                                .collect()
                        })
                        .collect();
                    let mut flagged = 0;
                    for t in 0..g.n_steps() {
                        if mask.unlabeled_nodes_at(t).is_empty() {
                            continue;
                        }
                        let imp = hgf_impute(&g, &mask, t)?;
                        flagged += imp.flagged.len();
                        for (i, v) in imp.values {
                            labels[t][i] = Some(v);
                        }
                    }
                    let completed = g.with_labels(labels)?;
                    let path = out_dir.join("hgf_completed.graph.txt");
                    write_graph_file(&path, &completed, loaded.declared_predictors)?;
                    println!("wrote {} (flagged nodes: {flagged})", path.display());
                }
                "mi" => {
                    // The GCRF refit inside multiple imputation needs
                    // unstructured outputs; exporting completions only needs
                    // the GP stage, so feed the observed labels' mean as a
                    // constant predictor.
                    let nt = g.n_nodes() * g.n_steps();
                    let mean = {
                        let mut s = 0.0;
                        let mut c = 0usize;
                        for t in 0..g.n_steps() {
                            for i in 0..g.n_nodes() {
                                if mask.is_observed(t, i) {
                                    s += g.label(t, i).unwrap();
                                    c += 1;
                                }
                            }
                        }
                        s / c.max(1) as f64
                    };
                    let r = mgcrf::graph::UnstructuredPrediction::new(
                        g.n_nodes(),
                        g.n_steps(),
                        vec![vec![mean; nt]],
                    )?;
                    let mi = fit_mi_gcrf(
                        &g,
                        &r,
                        &mask,
                        samples,
                        seed,
                        &OptimizerSettings::default(),
                    )?;
                    for (si, sample) in mi.samples.iter().enumerate() {
                        let completed = g.with_labels(sample.labels.clone())?;
                        let path = out_dir.join(format!("mi_completed_{si}.graph.txt"));
                        write_graph_file(&path, &completed, loaded.declared_predictors)?;
                        println!("wrote {}", path.display());
                    }
                }
                other => {
                    return Err(mgcrf::Error::InvalidConfig(format!(
                        "unknown imputation method '{other}' (use hgf or mi)"
                    )))
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
