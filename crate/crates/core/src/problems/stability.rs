//! Graph stability number through the Motzkin–Straus quartic
//! `S(G)⁻¹ = min_{‖x‖=1} Σ x_i⁴ + 2 Σ_{(i,j)∈E} x_i² x_j²`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::manifold::Matrix;
use crate::problem::Problem;

/// Undirected simple graph on vertices `1..=num_vertices`. Edges are stored
/// as `(u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_vertices: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(num_vertices: usize) -> Self {
        Graph {
            num_vertices,
            edges: BTreeSet::new(),
        }
    }

    /// Adds the edge `{u, v}` (1-based). Returns whether it was new.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool> {
        if u == v {
            return Err(Error::contract(format!("self-loop at vertex {u}")));
        }
        for w in [u, v] {
            if w == 0 || w > self.num_vertices {
                return Err(Error::contract(format!(
                    "vertex {w} out of range 1..={}",
                    self.num_vertices
                )));
            }
        }
        Ok(self.edges.insert((u.min(v), u.max(v))))
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn degree(&self, u: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == u || b == u).count()
    }

    pub fn cycle(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::config(format!("cycle needs m >= 3, got {m}")));
        }
        let mut g = Graph::new(m);
        for i in 1..=m {
            g.add_edge(i, i % m + 1)?;
        }
        Ok(g)
    }

    pub fn complete(m: usize) -> Self {
        let mut g = Graph::new(m);
        for u in 1..=m {
            for v in u + 1..=m {
                g.edges.insert((u, v));
            }
        }
        g
    }

    pub fn empty(m: usize) -> Self {
        Graph::new(m)
    }

    /// Outer 5-cycle `1..5`, inner pentagram `6..10`, spokes `i ~ i+5`.
    pub fn petersen() -> Self {
        let mut g = Graph::new(10);
        for i in 0..5 {
            let (a, b) = (i + 1, (i + 1) % 5 + 1);
            g.edges.insert((a.min(b), a.max(b)));
            let (a, b) = (6 + i, 6 + (i + 2) % 5);
            g.edges.insert((a.min(b), a.max(b)));
            g.edges.insert((i + 1, i + 6));
        }
        g
    }

    /// Vertices are the binary strings of length `d` (vertex `s + 1` for
    /// string `s`); edges join strings at Hamming distance below
    /// `threshold`.
    pub fn hamming(d: u32, threshold: u32) -> Result<Self> {
        if d == 0 || d > 16 {
            return Err(Error::config(format!("hamming length must be in 1..=16, got {d}")));
        }
        let m = 1usize << d;
        let mut g = Graph::new(m);
        for u in 0..m {
            for v in u + 1..m {
                if ((u ^ v).count_ones()) < threshold {
                    g.edges.insert((u + 1, v + 1));
                }
            }
        }
        Ok(g)
    }

    /// Neighbours of every vertex, 0-based.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for &(u, v) in &self.edges {
            adj[u - 1].push(v - 1);
            adj[v - 1].push(u - 1);
        }
        adj
    }
}

/// Parses the ASCII DIMACS graph format (`c` comments, one `p edge V E`
/// line, `e u v` edges). Duplicate edges are merged.
pub fn parse_dimacs(text: &str) -> Result<Graph> {
    let mut graph: Option<Graph> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let line = raw.trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            None | Some("c") => continue,
            Some("p") => {
                if graph.is_some() {
                    return Err(err("second problem line".into()));
                }
                let fmt = toks.next().ok_or_else(|| err("missing format".into()))?;
                if fmt != "edge" && fmt != "col" {
                    return Err(err(format!("unsupported format '{fmt}'")));
                }
                let v: usize = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(format!("bad vertex count in '{line}'")))?;
                toks.next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| err(format!("bad edge count in '{line}'")))?;
                graph = Some(Graph::new(v));
            }
            Some("e") => {
                let g = graph
                    .as_mut()
                    .ok_or_else(|| err("edge before problem line".into()))?;
                let mut end = || -> Result<usize> {
                    toks.next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(format!("malformed edge line '{line}'")))
                };
                let (u, v) = (end()?, end()?);
                if toks.next().is_some() {
                    return Err(err(format!("trailing tokens in '{line}'")));
                }
                g.add_edge(u, v)
                    .map_err(|e| err(format!("'{line}': {}", strip_contract(e))))?;
            }
            Some(tok) => return Err(err(format!("unknown line type '{tok}'"))),
        }
    }
    graph.ok_or_else(|| Error::Parse {
        line: text.lines().count(),
        message: "missing problem line".into(),
    })
}

fn strip_contract(e: Error) -> String {
    match e {
        Error::Contract(m) => m,
        other => other.to_string(),
    }
}

pub fn write_dimacs(g: &Graph, comment: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            let _ = writeln!(s, "c {line}");
        }
    }
    let _ = writeln!(s, "p edge {} {}", g.num_vertices, g.num_edges());
    for (u, v) in g.edges() {
        let _ = writeln!(s, "e {u} {v}");
    }
    s
}

pub struct Stability {
    adj: Vec<Vec<usize>>,
    dims: [(usize, usize); 1],
}

pub fn stability_problem(g: &Graph) -> Stability {
    Stability {
        adj: g.adjacency(),
        dims: [(g.num_vertices(), 1)],
    }
}

impl Problem for Stability {
    fn name(&self) -> &str {
        "stability"
    }

    fn block_dims(&self) -> &[(usize, usize)] {
        &self.dims
    }

    fn value(&self, blocks: &[Matrix]) -> f64 {
        let x = blocks[0].as_slice();
        let mut f = 0.0;
        for (i, nb) in self.adj.iter().enumerate() {
            let xi2 = x[i] * x[i];
            f += xi2 * xi2;
            // Each edge is visited from both ends, hence no factor 2.
            f += xi2 * nb.iter().map(|&j| x[j] * x[j]).sum::<f64>();
        }
        f
    }

    fn euclidean_gradient(&self, blocks: &[Matrix]) -> Vec<Matrix> {
        let x = blocks[0].as_slice();
        let g = Matrix::from_fn(x.len(), 1, |i, _| {
            let s: f64 = self.adj[i].iter().map(|&j| x[j] * x[j]).sum();
            4.0 * x[i].powi(3) + 4.0 * x[i] * s
        });
        vec![g]
    }
}

/// `round(1 / best_objective)`.
pub fn stability_estimate(best_objective: f64) -> Result<u64> {
    if !(best_objective > 0.0) || !best_objective.is_finite() {
        return Err(Error::contract(format!(
            "stability_estimate needs a positive objective, got {best_objective}"
        )));
    }
    Ok((1.0 / best_objective).round() as u64)
}
