//! Spatial graph data model, the SHG v1 text format and node splits.
//!
//! Edges are directed: the neighborhood of `v` is the list of its
//! out-neighbors in edge order. Undirected graphs are encoded by adding
//! both arcs. Coordinates are planar meters.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Regression,
    Classification { classes: usize },
}

/// A directed edge. `distance` / `bearing` override the values derived
/// from node coordinates when present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub distance: Option<f64>,
    pub bearing: Option<f64>,
}

impl Edge {
    pub fn new(src: usize, dst: usize) -> Self {
        Self {
            src,
            dst,
            distance: None,
            bearing: None,
        }
    }

    pub fn with_geometry(src: usize, dst: usize, distance: f64, bearing: f64) -> Self {
        Self {
            src,
            dst,
            distance: Some(distance),
            bearing: Some(bearing),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    coords: Vec<[f64; 2]>,
    edges: Vec<Edge>,
    features: Array2<f64>,
    labels: Vec<Option<f64>>,
    task: TaskKind,
    // out-adjacency in CSR form, edge order preserved within each row
    offsets: Vec<usize>,
    targets: Vec<usize>,
    edge_ids: Vec<usize>,
}

impl SpatialGraph {
    /// Builds a graph and checks every invariant. Classification labels
    /// are stored as their class index.
    pub fn new(
        coords: Vec<[f64; 2]>,
        edges: Vec<Edge>,
        features: Array2<f64>,
        labels: Vec<Option<f64>>,
        task: TaskKind,
    ) -> Result<Self> {
        let n = coords.len();
        if features.nrows() != n {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                n
            )));
        }
        if labels.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {} nodes",
                labels.len(),
                n
            )));
        }
        if let Some((i, _)) = coords
            .iter()
            .enumerate()
            .find(|(_, c)| !c[0].is_finite() || !c[1].is_finite())
        {
            return Err(Error::InvalidGraph(format!(
                "node {i} has non-finite coordinates"
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGraph("non-finite feature value".into()));
        }
        for (v, label) in labels.iter().enumerate() {
            let Some(y) = *label else { continue };
            match task {
                TaskKind::Regression if !y.is_finite() => {
                    return Err(Error::InvalidGraph(format!(
                        "node {v} has non-finite label"
                    )));
                }
                TaskKind::Classification { classes } => {
                    if y.fract() != 0.0 || y < 0.0 || y >= classes as f64 {
                        return Err(Error::InvalidGraph(format!(
                            "node {v} label {y} is not a class in 0..{classes}"
                        )));
                    }
                }
                _ => {}
            }
        }
        if let TaskKind::Classification { classes } = task {
            if classes == 0 {
                return Err(Error::InvalidGraph(
                    "classification needs at least one class".into(),
                ));
            }
        }

        let mut seen = HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) references a node outside 0..{n}",
                    e.src, e.dst
                )));
            }
            if !seen.insert((e.src, e.dst)) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    e.src, e.dst
                )));
            }
            if let Some(d) = e.distance {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "edge ({}, {}) has invalid distance {d}",
                        e.src, e.dst
                    )));
                }
            }
            if let Some(b) = e.bearing {
                if !(0.0..TAU).contains(&b) {
                    return Err(Error::InvalidGraph(format!(
                        "edge ({}, {}) bearing {b} outside [0, 2pi)",
                        e.src, e.dst
                    )));
                }
            }
        }

        let mut offsets = vec![0usize; n + 1];
        for e in &edges {
            offsets[e.src + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0usize; edges.len()];
        let mut edge_ids = vec![0usize; edges.len()];
        for (id, e) in edges.iter().enumerate() {
            let slot = cursor[e.src];
            targets[slot] = e.dst;
            edge_ids[slot] = id;
            cursor[e.src] += 1;
        }

        Ok(Self {
            coords,
            edges,
            features,
            labels,
            task,
            offsets,
            targets,
            edge_ids,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[Option<f64>] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Option<f64> {
        self.labels[v]
    }

    pub fn class_of(&self, v: usize) -> Option<usize> {
        match self.task {
            TaskKind::Classification { .. } => self.labels[v].map(|y| y as usize),
            TaskKind::Regression => None,
        }
    }

    pub fn is_labeled(&self, v: usize) -> bool {
        self.labels[v].is_some()
    }

    pub fn label_mask(&self) -> Vec<bool> {
        self.labels.iter().map(Option::is_some).collect()
    }

    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&v| self.is_labeled(v))
            .collect()
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    /// Out-neighbors of `v` in edge order.
    pub fn neighborhood(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Edge indices of the out-edges of `v`, aligned with [`Self::neighborhood`].
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.edge_ids[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Distance and bearing of an edge by its index.
    pub fn geometry_of(&self, edge: usize) -> (f64, f64) {
        let e = &self.edges[edge];
        let (dist, bearing) = coordinate_geometry(self.coords[e.src], self.coords[e.dst]);
        (e.distance.unwrap_or(dist), e.bearing.unwrap_or(bearing))
    }

    /// Distance (meters) and bearing (radians in [0, 2pi), counterclockwise
    /// from the +x axis) from `src` toward `dst`. Explicit per-edge
    /// attributes take precedence over coordinates. A self-loop without
    /// explicit attributes yields (0, 0). Returns `None` if the edge does
    /// not exist.
    pub fn edge_geometry(&self, src: usize, dst: usize) -> Option<(f64, f64)> {
        let row = self.offsets[src]..self.offsets[src + 1];
        let slot = self.targets[row.clone()].iter().position(|&t| t == dst)?;
        Some(self.geometry_of(self.edge_ids[row.start + slot]))
    }

    /// Returns a copy of the graph with some labels removed.
    pub fn with_labels(&self, labels: Vec<Option<f64>>) -> Result<Self> {
        Self::new(
            self.coords.clone(),
            self.edges.clone(),
            self.features.clone(),
            labels,
            self.task,
        )
    }
}

/// Euclidean distance and normalized bearing between two planar points.
pub fn coordinate_geometry(from: [f64; 2], to: [f64; 2]) -> (f64, f64) {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    if dx == 0.0 && dy == 0.0 {
        return (0.0, 0.0);
    }
    (dx.hypot(dy), normalize_angle(dy.atan2(dx)))
}

/// Maps any finite angle into [0, 2pi).
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles the labeled nodes with `seed` and cuts them into
/// `floor(r0 * n)` / `floor(r1 * n)` / remainder.
pub fn split_random(graph: &SpatialGraph, ratios: (f64, f64, f64), seed: u64) -> Result<NodeSplit> {
    let (r_train, r_val, r_test) = ratios;
    if [r_train, r_val, r_test]
        .iter()
        .any(|r| !(0.0..=1.0).contains(r))
        || r_train + r_val > 1.0 + 1e-12
    {
        return Err(Error::InvalidArgument(format!(
            "bad split ratios {ratios:?}"
        )));
    }
    let mut nodes = graph.labeled_nodes();
    if nodes.len() < 5 {
        return Err(Error::TooFewLabeled {
            needed: 5,
            found: nodes.len(),
        });
    }
    let n = nodes.len() as f64;
    // the epsilon absorbs representation error such as 0.6 * 5000 = 2999.999...
    let n_train = (r_train * n + 1e-9).floor() as usize;
    let n_val = (r_val * n + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    nodes.shuffle(&mut rng);
    let test = nodes.split_off(n_train + n_val);
    let val = nodes.split_off(n_train);
    Ok(NodeSplit {
        train: nodes,
        val,
        test,
    })
}

const HEADER: &str = "#SHG v1";

pub fn load_graph(path: impl AsRef<Path>) -> Result<SpatialGraph> {
    let text = fs::read_to_string(path)?;
    parse_graph(&text)
}

pub fn save_graph(graph: &SpatialGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_graph(graph))?;
    Ok(())
}

/// Serializes with shortest round-trip decimal text, so parsing the
/// output reproduces every number bit for bit.
pub fn format_graph(graph: &SpatialGraph) -> String {
    let mut out = String::new();
    let (task, classes) = match graph.task {
        TaskKind::Regression => ("regression", "-".to_string()),
        TaskKind::Classification { classes } => ("classification", classes.to_string()),
    };
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(
        out,
        "meta nodes={} features={} task={task} classes={classes}",
        graph.num_nodes(),
        graph.feature_dim()
    );
    for (v, c) in graph.coords.iter().enumerate() {
        let _ = write!(out, "node {v} {:?} {:?}", c[0], c[1]);
        match (graph.labels[v], graph.task) {
            (Some(y), TaskKind::Classification { .. }) => {
                let _ = write!(out, " label={}", y as usize);
            }
            (Some(y), TaskKind::Regression) => {
                let _ = write!(out, " label={y:?}");
            }
            (None, _) => {}
        }
        out.push('\n');
    }
    for (v, row) in graph.features.rows().into_iter().enumerate() {
        let _ = write!(out, "feat {v}");
        for x in row {
            let _ = write!(out, " {x:?}");
        }
        out.push('\n');
    }
    for e in &graph.edges {
        let _ = write!(out, "edge {} {}", e.src, e.dst);
        if let Some(d) = e.distance {
            let _ = write!(out, " dist={d:?}");
        }
        if let Some(b) = e.bearing {
            let _ = write!(out, " bearing={b:?}");
        }
        out.push('\n');
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    let x: f64 = tok
        .parse()
        .map_err(|_| perr(line, format!("invalid number {tok:?}")))?;
    if !x.is_finite() {
        return Err(perr(line, format!("non-finite number {tok:?}")));
    }
    Ok(x)
}

fn parse_index(tok: &str, n: usize, line: usize) -> Result<usize> {
    let i: usize = tok
        .parse()
        .map_err(|_| perr(line, format!("invalid node index {tok:?}")))?;
    if i >= n {
        return Err(perr(line, format!("node index {i} out of range 0..{n}")));
    }
    Ok(i)
}

fn key_value<'a>(tok: &'a str, key: &str, line: usize) -> Result<&'a str> {
    tok.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| perr(line, format!("expected {key}=<value>, got {tok:?}")))
}

pub fn parse_graph(text: &str) -> Result<SpatialGraph> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, HEADER)) => {}
        _ => return Err(perr(1, format!("missing {HEADER:?} header"))),
    }
    let mut meta: Option<(usize, usize, TaskKind)> = None;
    let mut coords: Vec<Option<[f64; 2]>> = Vec::new();
    let mut feats: Vec<Option<Vec<f64>>> = Vec::new();
    let mut labels: Vec<Option<f64>> = Vec::new();
    let mut edges = Vec::new();
    let mut pairs = HashSet::new();

    for (ln, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0] == "meta" {
            if meta.is_some() {
                return Err(perr(ln, "duplicate meta line"));
            }
            if toks.len() != 5 {
                return Err(perr(ln, "meta needs nodes=, features=, task=, classes="));
            }
            let n: usize = key_value(toks[1], "nodes", ln)?
                .parse()
                .map_err(|_| perr(ln, "invalid node count"))?;
            let d: usize = key_value(toks[2], "features", ln)?
                .parse()
                .map_err(|_| perr(ln, "invalid feature count"))?;
            let classes = key_value(toks[4], "classes", ln)?;
            let task = match key_value(toks[3], "task", ln)? {
                "regression" => {
                    if classes != "-" {
                        return Err(perr(ln, "regression graphs use classes=-"));
                    }
                    TaskKind::Regression
                }
                "classification" => TaskKind::Classification {
                    classes: classes
                        .parse()
                        .map_err(|_| perr(ln, format!("invalid class count {classes:?}")))?,
                },
                other => return Err(perr(ln, format!("unknown task {other:?}"))),
            };
            meta = Some((n, d, task));
            coords = vec![None; n];
            feats = vec![None; n];
            labels = vec![None; n];
            continue;
        }
        let Some((n, d, task)) = meta else {
            return Err(perr(ln, "meta line must come first"));
        };
        match toks[0] {
            "node" => {
                if !(4..=5).contains(&toks.len()) {
                    return Err(perr(ln, "node needs <id> <x> <y> [label=<value>]"));
                }
                let v = parse_index(toks[1], n, ln)?;
                if coords[v].is_some() {
                    return Err(perr(ln, format!("node {v} defined twice")));
                }
                coords[v] = Some([parse_num(toks[2], ln)?, parse_num(toks[3], ln)?]);
                if let Some(tok) = toks.get(4) {
                    let raw = key_value(tok, "label", ln)?;
                    let y = match task {
                        TaskKind::Regression => parse_num(raw, ln)?,
                        TaskKind::Classification { classes } => {
                            let c: usize = raw
                                .parse()
                                .map_err(|_| perr(ln, format!("invalid class label {raw:?}")))?;
                            if c >= classes {
                                return Err(perr(
                                    ln,
                                    format!("class {c} out of range 0..{classes}"),
                                ));
                            }
                            c as f64
                        }
                    };
                    labels[v] = Some(y);
                }
            }
            "feat" => {
                if toks.len() != d + 2 {
                    return Err(perr(ln, format!("feat needs <id> and {d} values")));
                }
                let v = parse_index(toks[1], n, ln)?;
                if feats[v].is_some() {
                    return Err(perr(ln, format!("features of node {v} defined twice")));
                }
                feats[v] = Some(
                    toks[2..]
                        .iter()
                        .map(|t| parse_num(t, ln))
                        .collect::<Result<_>>()?,
                );
            }
            "edge" => {
                if !(3..=5).contains(&toks.len()) {
                    return Err(perr(ln, "edge needs <src> <dst> [dist=] [bearing=]"));
                }
                let src = parse_index(toks[1], n, ln)?;
                let dst = parse_index(toks[2], n, ln)?;
                if !pairs.insert((src, dst)) {
                    return Err(perr(ln, format!("duplicate edge ({src}, {dst})")));
                }
                let mut edge = Edge::new(src, dst);
                for tok in &toks[3..] {
                    if let Some(raw) = tok.strip_prefix("dist=") {
                        let dist = parse_num(raw, ln)?;
                        if dist < 0.0 || edge.distance.is_some() {
                            return Err(perr(ln, format!("invalid dist {raw:?}")));
                        }
                        edge.distance = Some(dist);
                    } else if let Some(raw) = tok.strip_prefix("bearing=") {
                        let b = parse_num(raw, ln)?;
                        if !(0.0..TAU).contains(&b) || edge.bearing.is_some() {
                            return Err(perr(ln, format!("bearing {raw:?} outside [0, 2pi)")));
                        }
                        edge.bearing = Some(b);
                    } else {
                        return Err(perr(ln, format!("unknown edge attribute {tok:?}")));
                    }
                }
                edges.push(edge);
            }
            other => return Err(perr(ln, format!("unknown record {other:?}"))),
        }
    }

    let Some((n, d, task)) = meta else {
        return Err(perr(1, "missing meta line"));
    };
    let last = text.lines().count().max(1);
    let coords = coords
        .into_iter()
        .enumerate()
        .map(|(v, c)| c.ok_or_else(|| perr(last, format!("node {v} has no node line"))))
        .collect::<Result<Vec<_>>>()?;
    let mut features = Array2::zeros((n, d));
    for (v, row) in feats.into_iter().enumerate() {
        let row = row.ok_or_else(|| perr(last, format!("node {v} has no feat line")))?;
        for (k, x) in row.into_iter().enumerate() {
            features[[v, k]] = x;
        }
    }
    SpatialGraph::new(coords, edges, features, labels, task)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn line_graph(edges: Vec<Edge>, n: usize) -> SpatialGraph {
        let coords = (0..n).map(|i| [i as f64, 0.0]).collect();
        SpatialGraph::new(
            coords,
            edges,
            Array2::zeros((n, 1)),
            vec![None; n],
            TaskKind::Regression,
        )
        .unwrap()
    }

    #[test]
    fn minimal_file_parses() {
        let text = "#SHG v1\nmeta nodes=2 features=1 task=regression classes=-\n\
                    node 0 0 0 label=1.5\nnode 1 3 4\nfeat 0 0.25\nfeat 1 -1\nedge 0 1\n";
        let g = parse_graph(text).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.label(0), Some(1.5));
        assert_eq!(g.label(1), None);
        assert_eq!(g.edges()[0].distance, None);
        let (d, b) = g.edge_geometry(0, 1).unwrap();
        assert_eq!(d, 5.0);
        assert_eq!(b, 4f64.atan2(3.0));
    }

    #[test]
    fn out_of_range_edge_names_line() {
        let text = "#SHG v1\nmeta nodes=2 features=0 task=regression classes=-\n\
                    node 0 0 0\nnode 1 1 1\nfeat 0\nfeat 1\nedge 0 99\n";
        match parse_graph(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_and_bad_labels() {
        let base = "#SHG v1\nmeta nodes=1 features=1 task=classification classes=2\n";
        assert!(parse_graph(&format!("{base}node 0 nan 0\nfeat 0 1\n")).is_err());
        assert!(parse_graph(&format!("{base}node 0 0 0 label=2\nfeat 0 1\n")).is_err());
        assert!(parse_graph(&format!("{base}node 0 0 0 label=1\nfeat 0 inf\n")).is_err());
        assert!(parse_graph(&format!("{base}node 0 0 0 label=1\nfeat 0 1\n")).is_ok());
        assert!(parse_graph(&format!("{base}node 0 0 0\n")).is_err());
    }

    #[test]
    fn round_trip_preserves_attributes() {
        let edges = vec![
            Edge::with_geometry(0, 1, 7.0, 1.0),
            Edge::new(1, 2),
            Edge {
                src: 2,
                dst: 0,
                distance: Some(0.1 + 0.2),
                bearing: None,
            },
        ];
        let feats =
            Array2::from_shape_vec((3, 2), vec![0.1, -1e-300, 3.0, 1.0 / 3.0, 5.5, -0.0]).unwrap();
        let g = SpatialGraph::new(
            vec![[0.0, 0.0], [1.0 / 7.0, 2.5], [-3.25, 1e9]],
            edges,
            feats,
            vec![Some(0.1), None, Some(-2.0)],
            TaskKind::Regression,
        )
        .unwrap();
        let back = parse_graph(&format_graph(&g)).unwrap();
        assert_eq!(back, g);

        let empty = line_graph(vec![], 3);
        assert_eq!(parse_graph(&format_graph(&empty)).unwrap(), empty);
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.shg");
        let g = line_graph(vec![Edge::new(0, 1), Edge::new(1, 0)], 2);
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
        assert!(save_graph(&g, dir.path().join("missing/dir/g.shg")).is_err());
    }

    #[test]
    fn neighborhood_follows_edge_direction() {
        let g = line_graph(vec![Edge::new(0, 1), Edge::new(0, 2), Edge::new(3, 0)], 4);
        assert_eq!(g.neighborhood(0), &[1, 2]);
        assert!(g.neighborhood(1).is_empty());
        let g = line_graph(vec![Edge::new(1, 0)], 2);
        assert!(g.neighborhood(0).is_empty());
        assert_eq!(g.neighborhood(1), &[0]);
    }

    #[test]
    fn duplicate_edges_rejected() {
        let coords = vec![[0.0, 0.0], [1.0, 0.0]];
        let r = SpatialGraph::new(
            coords,
            vec![Edge::new(0, 1), Edge::new(0, 1)],
            Array2::zeros((2, 0)),
            vec![None; 2],
            TaskKind::Regression,
        );
        assert!(matches!(r, Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn geometry_rules() {
        let coords = vec![[0.0, 0.0], [3.0, 4.0], [0.0, 10.0], [0.0, 0.0]];
        let edges = vec![
            Edge::new(0, 1),
            Edge::with_geometry(1, 0, 7.0, 1.0),
            Edge::new(0, 2),
            Edge::new(0, 3),
            Edge::new(2, 0),
        ];
        let g = SpatialGraph::new(
            coords,
            edges,
            Array2::zeros((4, 0)),
            vec![None; 4],
            TaskKind::Regression,
        )
        .unwrap();
        assert_eq!(g.edge_geometry(0, 1), Some((5.0, 4f64.atan2(3.0))));
        assert_eq!(g.edge_geometry(1, 0), Some((7.0, 1.0)));
        let (d, b) = g.edge_geometry(0, 2).unwrap();
        assert_eq!(d, 10.0);
        assert!((b - FRAC_PI_2).abs() < 1e-15);
        // coincident endpoints
        assert_eq!(g.edge_geometry(0, 3), Some((0.0, 0.0)));
        let (_, back) = g.edge_geometry(2, 0).unwrap();
        assert!((back - 3.0 * FRAC_PI_2).abs() < 1e-15);
        assert_eq!(g.edge_geometry(3, 0), None);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let n = 10;
        let coords = (0..n).map(|i| [i as f64, 0.0]).collect();
        let g = SpatialGraph::new(
            coords,
            vec![],
            Array2::zeros((n, 0)),
            (0..n).map(|i| Some(i as f64)).collect(),
            TaskKind::Regression,
        )
        .unwrap();
        let s = split_random(&g, (0.6, 0.2, 0.2), 7).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 2, 2));
        assert_eq!(s, split_random(&g, (0.6, 0.2, 0.2), 7).unwrap());
        let mut all: Vec<_> = s
            .train
            .iter()
            .chain(&s.val)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn split_of_5000_is_exact() {
        let n = 5000;
        let g = SpatialGraph::new(
            vec![[0.0, 0.0]; n],
            vec![],
            Array2::zeros((n, 0)),
            vec![Some(1.0); n],
            TaskKind::Regression,
        )
        .unwrap();
        let s = split_random(&g, (0.6, 0.2, 0.2), 1).unwrap();
        assert_eq!(
            (s.train.len(), s.val.len(), s.test.len()),
            (3000, 1000, 1000)
        );
    }

    #[test]
    fn split_needs_five_labeled() {
        let mut labels = vec![None; 8];
        for l in labels.iter_mut().take(4) {
            *l = Some(0.0);
        }
        let g = SpatialGraph::new(
            vec![[0.0, 0.0]; 8],
            vec![],
            Array2::zeros((8, 0)),
            labels,
            TaskKind::Regression,
        )
        .unwrap();
        assert!(matches!(
            split_random(&g, (0.6, 0.2, 0.2), 1),
            Err(Error::TooFewLabeled { found: 4, .. })
        ));
    }
}
