//! Sparse weighted k-nearest-neighbor graph.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Directed neighbor lists: `neighbors(x)` are the points whose labels inform
/// the posterior at `x`. Stored in CSR form, with a reverse adjacency for
/// fast incremental updates (when `x` is labeled, the points that must be
/// touched are exactly those with `x` in their list).
#[derive(Clone, Debug)]
pub struct NeighborGraph {
    n: usize,
    k: usize,
    offsets: Vec<usize>,
    edges: Vec<(u32, f64)>,
    rev_offsets: Vec<usize>,
    rev_edges: Vec<(u32, f64)>,
    /// Largest outgoing edge weight per point (0 for empty lists); used by
    /// the optimistic posterior bound.
    max_weight: Vec<f64>,
}

impl NeighborGraph {
    /// Builds a graph from per-point neighbor lists. Rejects self-loops,
    /// duplicate neighbors, and non-finite or negative weights.
    pub fn new(lists: Vec<Vec<(usize, f64)>>, k: usize) -> Result<Self> {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut edges = Vec::new();
        let mut seen = vec![usize::MAX; n];
        for (src, list) in lists.iter().enumerate() {
            offsets.push(edges.len());
            for &(dst, w) in list {
                if dst >= n {
                    return Err(Error::InvalidGraph(format!(
                        "edge {src} -> {dst} out of range (n = {n})"
                    )));
                }
                if dst == src {
                    return Err(Error::InvalidGraph(format!("self-loop at {src}")));
                }
                if seen[dst] == src {
                    return Err(Error::InvalidGraph(format!(
                        "duplicate neighbor {dst} of {src}"
                    )));
                }
                seen[dst] = src;
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "edge {src} -> {dst} has invalid weight {w}"
                    )));
                }
                edges.push((dst as u32, w));
            }
        }
        offsets.push(edges.len());

        // Reverse adjacency via counting sort, preserving source order.
        let mut rev_counts = vec![0usize; n];
        for list in &lists {
            for &(dst, _) in list {
                rev_counts[dst] += 1;
            }
        }
        let mut rev_offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for c in &rev_counts {
            rev_offsets.push(acc);
            acc += c;
        }
        rev_offsets.push(acc);
        let mut rev_edges = vec![(0u32, 0.0); acc];
        let mut cursor = rev_offsets[..n].to_vec();
        for (src, list) in lists.iter().enumerate() {
            for &(dst, w) in list {
                rev_edges[cursor[dst]] = (src as u32, w);
                cursor[dst] += 1;
            }
        }

        let max_weight = (0..n)
            .map(|i| {
                edges[offsets[i]..offsets[i + 1]]
                    .iter()
                    .map(|&(_, w)| w)
                    .fold(0.0, f64::max)
            })
            .collect();

        Ok(Self {
            n,
            k,
            offsets,
            edges,
            rev_offsets,
            rev_edges,
            max_weight,
        })
    }

    pub fn num_points(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Outgoing neighbor list of `x`: the points informing `x`'s posterior.
    #[inline]
    pub fn neighbors(&self, x: usize) -> &[(u32, f64)] {
        &self.edges[self.offsets[x]..self.offsets[x + 1]]
    }

    /// Points that have `x` in their neighbor list, with the edge weights.
    #[inline]
    pub fn in_neighbors(&self, x: usize) -> &[(u32, f64)] {
        &self.rev_edges[self.rev_offsets[x]..self.rev_offsets[x + 1]]
    }

    pub fn in_degree(&self, x: usize) -> usize {
        self.rev_offsets[x + 1] - self.rev_offsets[x]
    }

    /// Largest outgoing edge weight of `x` (0 if `x` has no neighbors).
    #[inline]
    pub fn max_incident_weight(&self, x: usize) -> f64 {
        self.max_weight[x]
    }

    /// Writes the graph in the text format `n k` header followed by one
    /// `src dst weight` line per directed edge (0-based indices).
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.k)?;
        for src in 0..self.n {
            for &(dst, weight) in self.neighbors(src) {
                writeln!(w, "{} {} {}", src, dst, crate::fmt_f64(weight))?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)
    }

    /// Parses the `n k` / `src dst weight` text format.
    pub fn read_from(r: impl BufRead, path: &str) -> Result<Self> {
        let bad = |reason: String| Error::MalformedFile {
            path: path.to_string(),
            reason,
        };
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty file".into()))?
            .map_err(Error::Io)?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("header must be `n k`".into()))?;
        let k: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("header must be `n k`".into()))?;
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(Error::Io)?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse_err = || bad(format!("line {}: expected `src dst weight`", lineno + 2));
            let src: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(parse_err)?;
            let dst: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(parse_err)?;
            let weight: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(parse_err)?;
            if src >= n {
                return Err(bad(format!("line {}: src {src} out of range", lineno + 2)));
            }
            lists[src].push((dst, weight));
        }
        Self::new(lists, k)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file), &path.display().to_string())
    }
}

/// Builds the exact k-nearest-neighbor graph of dense feature rows under
/// Euclidean distance, with edge weights `exp(-d^2)`. Distance ties break on
/// the lower point index.
pub fn knn_from_features(features: &[Vec<f64>], k: usize) -> Result<NeighborGraph> {
    let n = features.len();
    if n == 0 {
        return Err(Error::InvalidGraph("no feature rows".into()));
    }
    if k >= n {
        return Err(Error::InvalidGraph(format!("k = {k} must be < n = {n}")));
    }
    let dim = features[0].len();
    if features.iter().any(|row| row.len() != dim) {
        return Err(Error::InvalidGraph("ragged feature rows".into()));
    }
    let mut lists = Vec::with_capacity(n);
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        dists.clear();
        for j in 0..n {
            if j == i {
                continue;
            }
            let d2: f64 = features[i]
                .iter()
                .zip(&features[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push((d2, j));
        }
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        lists.push(
            dists[..k]
                .iter()
                .map(|&(d2, j)| (j, (-d2).exp()))
                .collect(),
        );
    }
    NeighborGraph::new(lists, k)
}
