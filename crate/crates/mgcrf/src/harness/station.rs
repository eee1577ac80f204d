//! Station observation tables: comma-separated rows of per-station,
//! per-step climate attributes with an optional precipitation label, turned
//! into a spatial temporal graph.
//!
//! Nodes are stations (sorted by id). Labels are square-root-transformed
//! precipitation where observed. Stations within the connection radius are
//! linked; the edge weight is the Pearson correlation of their co-observed
//! transformed labels over the training window, clamped to [0, 1] (negative
//! correlations drop the edge), with a distance-kernel fallback
//! exp(−d²/radius²) when fewer than 12 co-observed steps exist. Attributes
//! are standardized per variable.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Similarity, SimilarityLayer, TemporalAttributedGraph};

pub const STATION_HEADER: &str =
    "station_id,lat,lon,step,omega,pr_wtr,rhum,temp,uwnd,vwnd,precip";
const N_ATTRS: usize = 6;
/// Minimum co-observed steps before a correlation weight is trusted.
const MIN_CO_OBSERVED: usize = 12;

#[derive(Debug, Clone)]
pub struct StationRecord {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

/// The loaded dataset: the graph plus station metadata in node order.
#[derive(Debug, Clone)]
pub struct StationDataset {
    pub graph: TemporalAttributedGraph,
    pub stations: Vec<StationRecord>,
    pub radius_km: f64,
}

fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * 6371.0 * h.sqrt().asin()
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        // Constant histories: treat identical series as perfectly correlated.
        if sxx == syy {
            return 1.0;
        }
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn load_station_dataset(
    path: &Path,
    radius_km: f64,
    train_window: usize,
) -> Result<StationDataset> {
    if radius_km <= 0.0 {
        return Err(Error::InvalidConfig(
            "station connection radius must be positive".into(),
        ));
    }
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "empty station file".into(),
            })
        }
    };
    if header.trim() != STATION_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must be exactly '{STATION_HEADER}'"),
        });
    }

    // (station id) -> (lat, lon); (station, step) -> (attrs, label).
    let mut coords: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    let mut rows: BTreeMap<(String, usize), ([f64; N_ATTRS], Option<f64>)> = BTreeMap::new();
    let mut max_step = 0usize;
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 11 fields, found {}", fields.len()),
            });
        }
        let id = fields[0].trim().to_string();
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad {what} value '{s}'"),
            })
        };
        let lat = parse_f(fields[1], "lat")?;
        let lon = parse_f(fields[2], "lon")?;
        let step: usize = fields[3].trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad step '{}'", fields[3]),
        })?;
        let mut attrs = [0.0; N_ATTRS];
        for (k, slot) in attrs.iter_mut().enumerate() {
            *slot = parse_f(fields[4 + k], "attribute")?;
            if !slot.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: "non-finite attribute".into(),
                });
            }
        }
        let precip = fields[10].trim();
        let label = if precip.is_empty() {
            None
        } else {
            let v = parse_f(precip, "precip")?;
            if v < 0.0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("negative precipitation {v}"),
                });
            }
            Some(v.sqrt())
        };
        if let Some(&(plat, plon)) = coords.get(&id) {
            if (plat - lat).abs() > 1e-9 || (plon - lon).abs() > 1e-9 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("station {id} changes coordinates"),
                });
            }
        } else {
            coords.insert(id.clone(), (lat, lon));
        }
        if rows.insert((id.clone(), step), (attrs, label)).is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("duplicate row for station {id}, step {step}"),
            });
        }
        max_step = max_step.max(step);
    }
    if coords.is_empty() {
        return Err(Error::InvalidValue("no station rows".into()));
    }
    let n_steps = max_step + 1;
    let ids: Vec<String> = coords.keys().cloned().collect();
    let n = ids.len();

    // Complete attribute coverage is required.
    for id in &ids {
        for t in 0..n_steps {
            if !rows.contains_key(&(id.clone(), t)) {
                return Err(Error::InvalidValue(format!(
                    "missing attributes for station {id} at step {t}"
                )));
            }
        }
    }

    // Standardize attributes per variable.
    let mut means = [0.0; N_ATTRS];
    let mut stds = [0.0; N_ATTRS];
    let count = (n * n_steps) as f64;
    for ((_, _), (attrs, _)) in rows.iter() {
        for k in 0..N_ATTRS {
            means[k] += attrs[k];
        }
    }
    for m in means.iter_mut() {
        *m /= count;
    }
    for ((_, _), (attrs, _)) in rows.iter() {
        for k in 0..N_ATTRS {
            stds[k] += (attrs[k] - means[k]).powi(2);
        }
    }
    for s in stds.iter_mut() {
        *s = (*s / count).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }

    let mut features = vec![vec![0.0; n * N_ATTRS]; n_steps];
    let mut labels: Vec<Vec<Option<f64>>> = vec![vec![None; n]; n_steps];
    for (si, id) in ids.iter().enumerate() {
        for t in 0..n_steps {
            let (attrs, label) = &rows[&(id.clone(), t)];
            for k in 0..N_ATTRS {
                features[t][si * N_ATTRS + k] = (attrs[k] - means[k]) / stds[k];
            }
            labels[t][si] = *label;
        }
    }

    // Distance-thresholded edges with correlation weights over the training
    // window.
    let window = train_window.min(n_steps);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = haversine_km(coords[&ids[i]], coords[&ids[j]]);
            if d > radius_km {
                continue;
            }
            let mut xi = Vec::new();
            let mut xj = Vec::new();
            for t in 0..window {
                if let (Some(a), Some(b)) = (labels[t][i], labels[t][j]) {
                    xi.push(a);
                    xj.push(b);
                }
            }
            let w = if xi.len() >= MIN_CO_OBSERVED {
                pearson(&xi, &xj).clamp(0.0, 1.0)
            } else {
                (-d * d / (radius_km * radius_km)).exp()
            };
            if w > 0.0 {
                edges.push((i, j, w));
            }
        }
    }
    let layer = SimilarityLayer::new(n, edges)?;
    let station_coords: Vec<(f64, f64)> = ids.iter().map(|id| coords[id]).collect();
    let graph = TemporalAttributedGraph::new(
        n,
        n_steps,
        N_ATTRS,
        features,
        labels,
        Similarity::Static(vec![layer]),
        Some(station_coords.clone()),
    )?;
    let stations = ids
        .into_iter()
        .map(|id| {
            let (lat, lon) = coords[&id];
            StationRecord { id, lat, lon }
        })
        .collect();
    Ok(StationDataset {
        graph,
        stations,
        radius_km,
    })
}
