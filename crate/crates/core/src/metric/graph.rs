//! Simple undirected graphs and their geodesic metrics.

use std::collections::{BTreeSet, VecDeque};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::FiniteMetricSpace;
use crate::scalar::Real;

/// A simple graph: no self-loops, no repeated edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

/// Families of graphs whose geodesic diameter is at most two.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoHopKind {
    /// A hub joined to `leaves` leaves.
    Star { leaves: usize },
    /// A hub joined to every vertex of a `rim`-cycle.
    Wheel { rim: usize },
    CompleteBipartite { left: usize, right: usize },
    /// `triangles` triangles sharing one common vertex.
    Friendship { triangles: usize },
}

impl GraphSpec {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(u, v) in &edges {
            if u >= n_vertices || v >= n_vertices {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) outside {n_vertices} vertices")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Self { n_vertices, edges })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Hop counts from `source`; `None` for unreachable vertices.
    pub fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        bfs_from(&self.adjacency_lists(), source)
    }

    /// Writes one `u v` pair per line.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# vertices {}", self.n_vertices)?;
        for &(u, v) in &self.edges {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    /// Reads `u v` lines. Blank lines and `#` comments are skipped; a
    /// `# vertices N` comment fixes the vertex count, otherwise it is one
    /// more than the largest index seen.
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut edges = Vec::new();
        let mut declared = None;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(n) = rest.trim().strip_prefix("vertices") {
                    declared = Some(n.trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut next = || -> Result<usize> {
                it.next()
                    .ok_or_else(|| Error::Parse(format!("expected two vertices in {line:?}")))?
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("{line:?}: {e}")))
            };
            let u = next()?;
            let v = next()?;
            edges.push((u, v));
        }
        let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Self::new(declared.unwrap_or(inferred), edges)
    }
}

fn bfs_from(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    dist[source] = Some(0);
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued vertices are labelled");
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// All-pairs hop distances by one breadth-first search per vertex.
pub fn graph_geodesics<T: Real>(g: &GraphSpec) -> Result<FiniteMetricSpace<T>> {
    let n = g.n_vertices();
    let adj = g.adjacency_lists();
    let mut dist = vec![T::zero(); n * n];
    for s in 0..n {
        for (t, d) in bfs_from(&adj, s).into_iter().enumerate() {
            match d {
                Some(d) => dist[s * n + t] = T::from_usize_lossy(d),
                None => return Err(Error::Disconnected(s, t)),
            }
        }
    }
    FiniteMetricSpace::from_flat(n, dist)
}

/// Full binary tree of the given depth, vertices in breadth-first order
/// (children of `i` are `2i+1` and `2i+2`).
pub fn gen_binary_tree(depth: u32) -> GraphSpec {
    let n = (1usize << (depth + 1)) - 1;
    let edges = (1..n).map(|v| ((v - 1) / 2, v)).collect();
    GraphSpec { n_vertices: n, edges }
}

/// Builds a graph of diameter at most two; vertex 0 is the hub where there is one.
pub fn gen_two_hop(kind: TwoHopKind) -> Result<GraphSpec> {
    let g = match kind {
        TwoHopKind::Star { leaves } => {
            require(leaves >= 1, "star needs at least one leaf")?;
            GraphSpec::new(leaves + 1, (1..=leaves).map(|v| (0, v)).collect())?
        }
        TwoHopKind::Wheel { rim } => {
            require(rim >= 3, "wheel rim needs at least three vertices")?;
            let mut edges: Vec<_> = (1..=rim).map(|v| (0, v)).collect();
            edges.extend((1..=rim).map(|v| (v, if v == rim { 1 } else { v + 1 })));
            GraphSpec::new(rim + 1, edges)?
        }
        TwoHopKind::CompleteBipartite { left, right } => {
            require(left >= 1 && right >= 1, "bipartite sides need at least one vertex")?;
            let edges = (0..left).flat_map(|u| (0..right).map(move |v| (u, left + v))).collect();
            GraphSpec::new(left + right, edges)?
        }
        TwoHopKind::Friendship { triangles } => {
            require(triangles >= 1, "friendship graph needs at least one triangle")?;
            let mut edges = Vec::new();
            for t in 0..triangles {
                let (a, b) = (2 * t + 1, 2 * t + 2);
                edges.extend([(0, a), (0, b), (a, b)]);
            }
            GraphSpec::new(2 * triangles + 1, edges)?
        }
    };
    let adj = g.adjacency_lists();
    for s in 0..g.n_vertices() {
        for (t, d) in bfs_from(&adj, s).into_iter().enumerate() {
            match d {
                Some(d) if d <= 2 => {}
                Some(d) => return Err(Error::InvalidGraph(format!("diameter exceeds 2: d({s},{t}) = {d}"))),
                None => return Err(Error::Disconnected(s, t)),
            }
        }
    }
    Ok(g)
}

fn require(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg.into()))
    }
}

/// Largest absolute adjacency eigenvalue, by power iteration on `A + I`.
///
/// The shift keeps bipartite graphs (eigenvalues `±ρ`) from oscillating.
pub fn spectral_radius<T: Real>(g: &GraphSpec) -> T {
    let n = g.n_vertices();
    if g.edges().is_empty() {
        return T::zero();
    }
    let adj = g.adjacency_lists();
    let mut x = vec![T::one() / T::from_usize_lossy(n).sqrt(); n];
    let mut lambda = T::zero();
    let tol = T::tol(1e-10);
    for _ in 0..1_000_000 {
        let mut y: Vec<T> = x.clone();
        for (u, nbrs) in adj.iter().enumerate() {
            for &v in nbrs {
                y[u] += x[v];
            }
        }
        let norm = y.iter().map(|&v| v * v).sum::<T>().sqrt();
        // Rayleigh quotient of A + I with the unit vector x
        let next = x.iter().zip(&y).map(|(&a, &b)| a * b).sum::<T>();
        for v in &mut y {
            *v /= norm;
        }
        x = y;
        if (next - lambda).abs() <= tol * next.abs() {
            return next - T::one();
        }
        lambda = next;
    }
    lambda - T::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn floyd_warshall(g: &GraphSpec) -> Vec<Vec<f64>> {
        let n = g.n_vertices();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(u, v) in g.edges() {
            d[u][v] = 1.0;
            d[v][u] = 1.0;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    fn random_connected(rng: &mut ChaCha8Rng, n: usize) -> GraphSpec {
        let mut edges = BTreeSet::new();
        for v in 1..n {
            let u = rng.random_range(0..v);
            edges.insert((u, v));
        }
        for _ in 0..n {
            let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
            if u != v {
                edges.insert((u.min(v), u.max(v)));
            }
        }
        GraphSpec::new(n, edges.into_iter().collect()).unwrap()
    }

    #[test]
    fn path_and_complete() {
        let p = GraphSpec::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let m = graph_geodesics::<f64>(&p).unwrap();
        assert_eq!(m.d(0, 2), 2.0);
        let k4 = GraphSpec::new(4, (0..4).flat_map(|u| ((u + 1)..4).map(move |v| (u, v))).collect()).unwrap();
        let m = graph_geodesics::<f64>(&k4).unwrap();
        assert!(m.pairs().all(|(i, j)| m.d(i, j) == 1.0));
    }

    #[test]
    fn binary_tree_sizes_and_diameter() {
        assert_eq!(gen_binary_tree(0).n_vertices(), 1);
        assert!(gen_binary_tree(0).edges().is_empty());
        let t1 = gen_binary_tree(1);
        assert_eq!((t1.n_vertices(), t1.edges().len()), (3, 2));
        let t6 = gen_binary_tree(6);
        assert_eq!(t6.n_vertices(), 127);
        let m = graph_geodesics::<f64>(&t6).unwrap();
        assert_eq!(m.diameter(), 12.0);
        assert_eq!(m.aspect_ratio_and_diameter().unwrap(), (12.0, 12.0));
    }

    #[test]
    fn agrees_with_floyd_warshall() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..30 {
            let n = 2 + trial % 39;
            let g = random_connected(&mut rng, n);
            let fw = floyd_warshall(&g);
            let m = graph_geodesics::<f64>(&g).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(m.d(i, j), fw[i][j]);
                }
            }
        }
    }

    #[test]
    fn disconnected_is_reported() {
        let g = GraphSpec::new(3, vec![(0, 1)]).unwrap();
        assert!(matches!(graph_geodesics::<f64>(&g), Err(Error::Disconnected(_, 2))));
    }

    #[test]
    fn rejects_non_simple_graphs() {
        assert!(GraphSpec::new(2, vec![(0, 0)]).is_err());
        assert!(GraphSpec::new(2, vec![(0, 1), (1, 0)]).is_err());
        assert!(GraphSpec::new(2, vec![(0, 2)]).is_err());
    }

    #[test]
    fn two_hop_families() {
        let kinds = [
            TwoHopKind::Star { leaves: 5 },
            TwoHopKind::Wheel { rim: 5 },
            TwoHopKind::CompleteBipartite { left: 2, right: 3 },
            TwoHopKind::Friendship { triangles: 4 },
        ];
        for k in kinds {
            let g = gen_two_hop(k).unwrap();
            let m = graph_geodesics::<f64>(&g).unwrap();
            assert_eq!(m.diameter(), 2.0, "{k:?}");
        }
        assert!(gen_two_hop(TwoHopKind::Star { leaves: 0 }).is_err());
        assert!(gen_two_hop(TwoHopKind::Wheel { rim: 2 }).is_err());
    }

    #[test]
    fn spectral_radius_known_values() {
        let star = gen_two_hop(TwoHopKind::Star { leaves: 4 }).unwrap();
        assert!((spectral_radius::<f64>(&star) - 2.0).abs() < 1e-8);
        let k23 = gen_two_hop(TwoHopKind::CompleteBipartite { left: 2, right: 3 }).unwrap();
        assert!((spectral_radius::<f64>(&k23) - 6f64.sqrt()).abs() < 1e-8);
        let edge = GraphSpec::new(2, vec![(0, 1)]).unwrap();
        assert!((spectral_radius::<f64>(&edge) - 1.0).abs() < 1e-8);
        // wheel with rim m: 1 + sqrt(1 + m)
        let w = gen_two_hop(TwoHopKind::Wheel { rim: 5 }).unwrap();
        assert!((spectral_radius::<f64>(&w) - (1.0 + 6f64.sqrt())).abs() < 1e-8);
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = gen_binary_tree(3);
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = GraphSpec::read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        let parsed = GraphSpec::read_edge_list("0 1\n\n1 2\n".as_bytes()).unwrap();
        assert_eq!(parsed.n_vertices(), 3);
        assert!(GraphSpec::read_edge_list("0 x\n".as_bytes()).is_err());
    }
}
