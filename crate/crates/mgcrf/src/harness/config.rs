//! Declarative experiment configuration, parsed from a sectioned
//! key-and-value text file (TOML).

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::missingness::MechanismKind;
use crate::synthgen::SyntheticSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Unstructured feed-forward regressor.
    Nn,
    /// GCRF trained on the labeled subgraph only.
    Igcrf,
    /// GCRF trained on the marginal likelihood of the labeled nodes.
    Mgcrf,
    /// Gaussian-process multiple imputation followed by GCRF fits.
    MiGcrf,
    /// Harmonic-field imputation followed by a GCRF fit.
    HgfGcrf,
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Nn => "nn",
            ModelKind::Igcrf => "igcrf",
            ModelKind::Mgcrf => "mgcrf",
            ModelKind::MiGcrf => "mi_gcrf",
            ModelKind::HgfGcrf => "hgf_gcrf",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "nn" => Ok(ModelKind::Nn),
            "igcrf" => Ok(ModelKind::Igcrf),
            "mgcrf" => Ok(ModelKind::Mgcrf),
            "mi_gcrf" | "mi" => Ok(ModelKind::MiGcrf),
            "hgf_gcrf" | "hgf" => Ok(ModelKind::HgfGcrf),
            other => Err(Error::InvalidConfig(format!("unknown model '{other}'"))),
        }
    }
}

/// Where the experiment's graph comes from.
#[derive(Debug, Clone)]
pub enum DatasetSource {
    /// Regenerated per repeat with a repeat-derived seed.
    Synthetic(SyntheticSpec),
    /// A graph file reloaded for every repeat.
    GraphFile { path: String },
    /// A station observation table turned into a spatial graph.
    Stations {
        path: String,
        radius_km: f64,
        train_window: usize,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub mechanisms: Vec<MechanismKind>,
    pub fractions: Vec<f64>,
    pub models: Vec<ModelKind>,
    pub repeats: usize,
    pub seed: u64,
    pub output_dir: Option<String>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("at least one model required".into()));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one mechanism required".into(),
            ));
        }
        for &f in &self.fractions {
            if !(0.0..=0.8).contains(&f) {
                return Err(Error::InvalidConfig(format!(
                    "fraction {f} outside [0, 0.8]"
                )));
            }
        }
        if self.fractions.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one fraction required".into(),
            ));
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        Ok(())
    }
}

// Serde mirror of the file schema.
#[derive(Debug, Deserialize)]
struct RawConfig {
    dataset: RawDataset,
    experiment: RawExperiment,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    restrict: Option<RawRestrict>,
}

#[derive(Debug, Deserialize)]
struct RawDataset {
    source: String,
    #[serde(default)]
    path: Option<String>,
    #[serde(default)]
    rows: Option<usize>,
    #[serde(default)]
    cols: Option<usize>,
    #[serde(default)]
    steps: Option<usize>,
    #[serde(default)]
    noise_fraction: Option<f64>,
    #[serde(default)]
    placement_jitter: Option<f64>,
    #[serde(default)]
    weight_low: Option<f64>,
    #[serde(default)]
    weight_high: Option<f64>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    radius_km: Option<f64>,
    #[serde(default)]
    train_window: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct RawExperiment {
    mechanisms: Vec<MechanismKind>,
    fractions: Vec<f64>,
    models: Vec<String>,
    #[serde(default = "default_repeats")]
    repeats: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    workers: Option<usize>,
}

fn default_repeats() -> usize {
    10
}

#[derive(Debug, Default, Deserialize)]
struct RawOutput {
    #[serde(default)]
    dir: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawRestrict {
    strategies: Vec<MechanismKind>,
    fractions: Vec<f64>,
}

/// A parsed configuration plus the optional restriction section used by the
/// `restrict` command.
#[derive(Debug)]
pub struct ParsedConfig {
    pub experiment: ExperimentConfig,
    pub restrict: Option<(Vec<MechanismKind>, Vec<f64>)>,
}

pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))?;
    let dataset = match raw.dataset.source.as_str() {
        "synthetic" => {
            let mut spec = SyntheticSpec::default();
            if let Some(v) = raw.dataset.rows {
                spec.rows = v;
            }
            if let Some(v) = raw.dataset.cols {
                spec.cols = v;
            }
            if let Some(v) = raw.dataset.steps {
                spec.n_steps = v;
            }
            if let Some(v) = raw.dataset.noise_fraction {
                spec.noise_fraction = v;
            }
            if let Some(v) = raw.dataset.placement_jitter {
                spec.placement_jitter = v;
            }
            if let Some(v) = raw.dataset.weight_low {
                spec.weight_low = v;
            }
            if let Some(v) = raw.dataset.weight_high {
                spec.weight_high = v;
            }
            if let Some(v) = raw.dataset.alpha {
                spec.alpha = v;
            }
            if let Some(v) = raw.dataset.beta {
                spec.beta = v;
            }
            DatasetSource::Synthetic(spec)
        }
        "graph_file" => DatasetSource::GraphFile {
            path: raw.dataset.path.ok_or_else(|| {
                Error::InvalidConfig("dataset.path required for graph_file source".into())
            })?,
        },
        "stations" => DatasetSource::Stations {
            path: raw.dataset.path.ok_or_else(|| {
                Error::InvalidConfig("dataset.path required for stations source".into())
            })?,
            radius_km: raw.dataset.radius_km.ok_or_else(|| {
                Error::InvalidConfig(
                    "dataset.radius_km required for stations source (no default)".into(),
                )
            })?,
            train_window: raw.dataset.train_window.ok_or_else(|| {
                Error::InvalidConfig("dataset.train_window required for stations source".into())
            })?,
        },
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown dataset source '{other}'"
            )))
        }
    };
    let models = raw
        .experiment
        .models
        .iter()
        .map(|s| ModelKind::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let experiment = ExperimentConfig {
        dataset,
        mechanisms: raw.experiment.mechanisms,
        fractions: raw.experiment.fractions,
        models,
        repeats: raw.experiment.repeats,
        seed: raw.experiment.seed,
        output_dir: raw.output.dir,
        workers: raw.experiment.workers,
    };
    experiment.validate()?;
    let restrict = raw.restrict.map(|r| (r.strategies, r.fractions));
    Ok(ParsedConfig {
        experiment,
        restrict,
    })
}

pub fn load_config(path: &std::path::Path) -> Result<ParsedConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = r#"
[dataset]
source = "synthetic"
rows = 20
cols = 20
steps = 5

[experiment]
mechanisms = ["random", "strongly_connected"]
fractions = [0.0, 0.1, 0.2]
models = ["nn", "igcrf", "mgcrf", "mi_gcrf", "hgf_gcrf"]
repeats = 3
seed = 11

[output]
dir = "results"

[restrict]
strategies = ["random", "strongly_connected_excl_neighbors"]
fractions = [0.1, 0.2, 0.4]
"#;
        let parsed = parse_config(text).unwrap();
        let exp = parsed.experiment;
        assert!(matches!(exp.dataset, DatasetSource::Synthetic(ref s) if s.rows == 20));
        assert_eq!(exp.mechanisms.len(), 2);
        assert_eq!(exp.models.len(), 5);
        assert_eq!(exp.repeats, 3);
        assert_eq!(exp.output_dir.as_deref(), Some("results"));
        let (strategies, fractions) = parsed.restrict.unwrap();
        assert_eq!(strategies.len(), 2);
        assert_eq!(fractions, vec![0.1, 0.2, 0.4]);
    }

    #[test]
    fn rejects_invalid_fraction_and_empty_models() {
        let text = r#"
[dataset]
source = "synthetic"

[experiment]
mechanisms = ["random"]
fractions = [0.9]
models = ["mgcrf"]
"#;
        assert!(parse_config(text).is_err());
        let text = r#"
[dataset]
source = "synthetic"

[experiment]
mechanisms = ["random"]
fractions = [0.1]
models = []
"#;
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn stations_source_requires_radius() {
        let text = r#"
[dataset]
source = "stations"
path = "stations.csv"
train_window = 10

[experiment]
mechanisms = ["random"]
fractions = [0.1]
models = ["mgcrf"]
"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("radius_km"));
    }
}
