//! Line-oriented graph file format.
//!
//! ```text
//! graph N T D K L [static|perstep]
//! coord <node> <x> <y>                    # optional, one line per node
//! features <t> <node> <v1> ... <vD>       # N·T lines
//! label <t> <node> <value|NA>             # N·T lines
//! edge <t|*> <layer> <i> <j> <w>          # one line per edge; '*' = all steps
//! ```
//!
//! `K` records how many unstructured predictors the producing pipeline used;
//! the graph itself carries no predictor outputs. Lines starting with `#` are
//! comments. Missing labels are written as the token `NA`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Similarity, SimilarityLayer, TemporalAttributedGraph};

/// A graph plus the predictor-count metadata stored in the file header.
#[derive(Debug, Clone)]
pub struct GraphFile {
    pub graph: TemporalAttributedGraph,
    pub declared_predictors: usize,
}

pub fn write_graph_file(
    path: &Path,
    graph: &TemporalAttributedGraph,
    declared_predictors: usize,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let kind = if graph.similarity().is_static() {
        "static"
    } else {
        "perstep"
    };
    writeln!(
        w,
        "graph {} {} {} {} {} {}",
        graph.n_nodes(),
        graph.n_steps(),
        graph.feat_dim(),
        declared_predictors,
        graph.n_layers(),
        kind
    )?;
    if let Some(coords) = graph.coords() {
        for (i, (x, y)) in coords.iter().enumerate() {
            writeln!(w, "coord {i} {x} {y}")?;
        }
    }
    for t in 0..graph.n_steps() {
        for i in 0..graph.n_nodes() {
            write!(w, "features {t} {i}")?;
            for v in graph.feature(t, i) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
    }
    for t in 0..graph.n_steps() {
        for i in 0..graph.n_nodes() {
            match graph.label(t, i) {
                Some(v) => writeln!(w, "label {t} {i} {v}")?,
                None => writeln!(w, "label {t} {i} NA")?,
            }
        }
    }
    match graph.similarity() {
        Similarity::Static(layers) => {
            for (l, layer) in layers.iter().enumerate() {
                for &(i, j, wt) in layer.edges() {
                    writeln!(w, "edge * {l} {i} {j} {wt}")?;
                }
            }
        }
        Similarity::PerStep(steps) => {
            for (t, layers) in steps.iter().enumerate() {
                for (l, layer) in layers.iter().enumerate() {
                    for &(i, j, wt) in layer.edges() {
                        writeln!(w, "edge {t} {l} {i} {j} {wt}")?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_graph_file(path: &Path) -> Result<GraphFile> {
    let reader = BufReader::new(File::open(path)?);
    let mut header: Option<(usize, usize, usize, usize, usize, bool)> = None;
    let mut coords: Vec<(usize, f64, f64)> = Vec::new();
    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<Vec<Option<f64>>> = Vec::new();
    let mut feat_seen: Vec<Vec<bool>> = Vec::new();
    let mut label_seen: Vec<Vec<bool>> = Vec::new();
    // (step or None for static, layer, i, j, w)
    let mut edges: Vec<(Option<usize>, usize, usize, usize, f64)> = Vec::new();

    let parse_err = |line: usize, message: &str| Error::Parse {
        line,
        message: message.to_string(),
    };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap();
        let rest: Vec<&str> = parts.collect();
        match tag {
            "graph" => {
                if rest.len() != 6 {
                    return Err(parse_err(lineno, "header needs N T D K L kind"));
                }
                let nums: Vec<usize> = rest[..5]
                    .iter()
                    .map(|s| s.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| parse_err(lineno, "header fields must be integers"))?;
                let is_static = match rest[5] {
                    "static" => true,
                    "perstep" => false,
                    _ => return Err(parse_err(lineno, "kind must be 'static' or 'perstep'")),
                };
                let (n, t, d, k, l) = (nums[0], nums[1], nums[2], nums[3], nums[4]);
                features = vec![vec![0.0; n * d]; t];
                labels = vec![vec![None; n]; t];
                feat_seen = vec![vec![false; n]; t];
                label_seen = vec![vec![false; n]; t];
                header = Some((n, t, d, k, l, is_static));
            }
            "coord" => {
                let (n, ..) = header.ok_or_else(|| parse_err(lineno, "coord before header"))?;
                if rest.len() != 3 {
                    return Err(parse_err(lineno, "coord needs node x y"));
                }
                let i: usize = rest[0]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad node index"))?;
                if i >= n {
                    return Err(parse_err(lineno, "node index out of range"));
                }
                let x: f64 = rest[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad coordinate"))?;
                let y: f64 = rest[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad coordinate"))?;
                coords.push((i, x, y));
            }
            "features" => {
                let (n, t_max, d, ..) =
                    header.ok_or_else(|| parse_err(lineno, "features before header"))?;
                if rest.len() != 2 + d {
                    return Err(parse_err(lineno, "features needs t node and D values"));
                }
                let t: usize = rest[0]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad step"))?;
                let i: usize = rest[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad node index"))?;
                if t >= t_max || i >= n {
                    return Err(parse_err(lineno, "step or node out of range"));
                }
                for (slot, s) in rest[2..].iter().enumerate() {
                    features[t][i * d + slot] = s
                        .parse()
                        .map_err(|_| parse_err(lineno, "bad feature value"))?;
                }
                feat_seen[t][i] = true;
            }
            "label" => {
                let (n, t_max, ..) =
                    header.ok_or_else(|| parse_err(lineno, "label before header"))?;
                if rest.len() != 3 {
                    return Err(parse_err(lineno, "label needs t node value"));
                }
                let t: usize = rest[0]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad step"))?;
                let i: usize = rest[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad node index"))?;
                if t >= t_max || i >= n {
                    return Err(parse_err(lineno, "step or node out of range"));
                }
                labels[t][i] = if rest[2] == "NA" {
                    None
                } else {
                    Some(
                        rest[2]
                            .parse()
                            .map_err(|_| parse_err(lineno, "bad label value"))?,
                    )
                };
                label_seen[t][i] = true;
            }
            "edge" => {
                let (n, t_max, _, _, l_max, is_static) =
                    header.ok_or_else(|| parse_err(lineno, "edge before header"))?;
                if rest.len() != 5 {
                    return Err(parse_err(lineno, "edge needs step layer i j w"));
                }
                let step = if rest[0] == "*" {
                    None
                } else {
                    let t: usize = rest[0]
                        .parse()
                        .map_err(|_| parse_err(lineno, "bad step"))?;
                    if t >= t_max {
                        return Err(parse_err(lineno, "step out of range"));
                    }
                    Some(t)
                };
                if is_static && step.is_some() {
                    return Err(parse_err(lineno, "static graph cannot carry per-step edges"));
                }
                if !is_static && step.is_none() {
                    return Err(parse_err(lineno, "per-step graph cannot carry '*' edges"));
                }
                let layer: usize = rest[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad layer"))?;
                if layer >= l_max {
                    return Err(parse_err(lineno, "layer out of range"));
                }
                let i: usize = rest[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad node index"))?;
                let j: usize = rest[3]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad node index"))?;
                if i >= n || j >= n {
                    return Err(parse_err(lineno, "node index out of range"));
                }
                let w: f64 = rest[4]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad weight"))?;
                edges.push((step, layer, i, j, w));
            }
            _ => return Err(parse_err(lineno, "unknown line tag")),
        }
    }

    let (n, t, _d, k, l, is_static) =
        header.ok_or_else(|| parse_err(0, "missing 'graph' header"))?;
    for (ti, seen) in feat_seen.iter().enumerate() {
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidValue(format!(
                "missing features for step {ti}, node {i}"
            )));
        }
    }
    for (ti, seen) in label_seen.iter().enumerate() {
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidValue(format!(
                "missing label line for step {ti}, node {i}"
            )));
        }
    }
    let similarity = if is_static {
        let mut per_layer: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); l];
        for (_, layer, i, j, w) in edges {
            per_layer[layer].push((i, j, w));
        }
        Similarity::Static(
            per_layer
                .into_iter()
                .map(|e| SimilarityLayer::new(n, e))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        let mut per_step: Vec<Vec<Vec<(usize, usize, f64)>>> = vec![vec![Vec::new(); l]; t];
        for (step, layer, i, j, w) in edges {
            per_step[step.unwrap()][layer].push((i, j, w));
        }
        Similarity::PerStep(
            per_step
                .into_iter()
                .map(|layers| {
                    layers
                        .into_iter()
                        .map(|e| SimilarityLayer::new(n, e))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
        )
    };
    let coords_vec = if coords.is_empty() {
        None
    } else {
        if coords.len() != n {
            return Err(Error::InvalidValue(format!(
                "expected {n} coord lines, found {}",
                coords.len()
            )));
        }
        let mut v = vec![(0.0, 0.0); n];
        for (i, x, y) in coords {
            v[i] = (x, y);
        }
        Some(v)
    };
    let d = features.first().map_or(0, |f| f.len() / n.max(1));
    let graph = TemporalAttributedGraph::new(n, t, d, features, labels, similarity, coords_vec)?;
    Ok(GraphFile {
        graph,
        declared_predictors: k,
    })
}
