//! Clique complexes and their oriented boundary operators.
//!
//! A k-simplex is stored as its ascending tuple of k+1 node indices, and each
//! level is kept in lexicographic order. The boundary of `[v_0, .., v_k]` puts
//! sign `(-1)^m` on the face that omits `v_m`, which makes `∂_k ∂_{k+1} = 0`.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{from_json_str, matrix_from_rows, matrix_to_rows};
use crate::sparse::{CooBuilder, SparseMatrix};
use crate::spectral::hodge_laplacian;

/// Undirected simple graph with normalized `(u, v)`, `u < v` edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph, orienting each pair as `u < v` and dropping duplicates.
    pub fn new<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) references a node >= {num_nodes}"
                )));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(Self {
            num_nodes,
            edges: set.into_iter().collect(),
        })
    }

    /// Erdős–Rényi graph: each pair is joined independently with probability `p`.
    pub fn random<R: Rng + ?Sized>(num_nodes: usize, p: f64, rng: &mut R) -> Self {
        let mut edges = Vec::new();
        for u in 0..num_nodes {
            for v in u + 1..num_nodes {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        Self { num_nodes, edges }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Edges in ascending `(u, v)` order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    num_nodes: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_signals: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_signals: Option<Vec<Vec<f64>>>,
}

/// A graph plus the optional signal blocks of the JSON input format.
///
/// `edge_signals` rows follow the sorted edge order of [`Graph::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct GraphData {
    pub graph: Graph,
    pub node_signals: Option<DMatrix<f64>>,
    pub edge_signals: Option<DMatrix<f64>>,
}

impl GraphData {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = from_json_str(text)?;
        let graph = Graph::new(file.num_nodes, file.edges.iter().map(|e| (e[0], e[1])))?;
        let block = |rows: Option<Vec<Vec<f64>>>, expected: usize, name: &str| {
            rows.map(|rows| {
                if rows.len() != expected {
                    return Err(Error::shape(format!(
                        "{name}: {} rows for {expected} simplices",
                        rows.len()
                    )));
                }
                let width = rows.first().map_or(0, Vec::len);
                matrix_from_rows(&rows, width).map_err(|e| e.at(name))
            })
            .transpose()
        };
        let node_signals = block(file.node_signals, graph.num_nodes(), "node_signals")?;
        let edge_signals = block(file.edge_signals, graph.edges().len(), "edge_signals")?;
        Ok(Self {
            graph,
            node_signals,
            edge_signals,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = GraphFile {
            num_nodes: self.graph.num_nodes,
            edges: self.graph.edges.iter().map(|&(u, v)| [u, v]).collect(),
            node_signals: self.node_signals.as_ref().map(matrix_to_rows),
            edge_signals: self.edge_signals.as_ref().map(matrix_to_rows),
        };
        crate::io::to_json_string(&file)
    }
}

/// Simplex lists for dimensions `0..=max_dim` with boundary operators `∂_1..∂_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialComplex {
    simplices: Vec<Vec<Vec<usize>>>,
    boundary: Vec<SparseMatrix>,
}

/// Lifts `g` to its clique complex truncated at dimension `max_dim`.
///
/// When `max_dim` exceeds `num_nodes - 1` it is clamped to the highest
/// dimension holding at least one simplex.
pub fn build_complex(g: &Graph, max_dim: usize) -> SimplicialComplex {
    let adj: Vec<BTreeSet<usize>> = g
        .adjacency()
        .into_iter()
        .map(|l| l.into_iter().collect())
        .collect();
    let mut levels: Vec<Vec<Vec<usize>>> = vec![(0..g.num_nodes()).map(|v| vec![v]).collect()];
    if max_dim >= 1 {
        levels.push(g.edges().iter().map(|&(u, v)| vec![u, v]).collect());
    }
    while levels.len() <= max_dim {
        let prev = levels.last().expect("non-empty");
        if prev.is_empty() && max_dim + 1 > g.num_nodes() {
            break;
        }
        let mut next = Vec::new();
        for s in prev {
            let last = *s.last().expect("simplex has a vertex");
            for &v in adj[s[0]].range(last + 1..) {
                if s[1..].iter().all(|u| adj[*u].contains(&v)) {
                    let mut t = s.clone();
                    t.push(v);
                    next.push(t);
                }
            }
        }
        levels.push(next);
    }
    if max_dim + 1 > g.num_nodes() {
        while levels.len() > 1 && levels.last().is_some_and(Vec::is_empty) {
            levels.pop();
        }
    }
    SimplicialComplex::from_sorted_levels(levels)
}

impl SimplicialComplex {
    /// Builds a complex from explicit simplex lists, validating ascending
    /// tuples, lexicographic order and closure under faces.
    pub fn from_levels(levels: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidGraph("complex needs a node level".into()));
        }
        for (k, level) in levels.iter().enumerate() {
            for s in level {
                if s.len() != k + 1 || s.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidGraph(format!(
                        "level {k}: {s:?} is not an ascending {}-tuple",
                        k + 1
                    )));
                }
            }
            if level.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGraph(format!(
                    "level {k} is not sorted and duplicate-free"
                )));
            }
            if k >= 1 {
                for s in level {
                    for m in 0..=k {
                        let face = face_without(s, m);
                        if levels[k - 1].binary_search(&face).is_err() {
                            return Err(Error::InvalidGraph(format!(
                                "face {face:?} of {s:?} is missing"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self::from_sorted_levels(levels))
    }

    fn from_sorted_levels(simplices: Vec<Vec<Vec<usize>>>) -> Self {
        let boundary = (1..simplices.len())
            .map(|k| oriented_boundary(&simplices[k - 1], &simplices[k]))
            .collect();
        Self {
            simplices,
            boundary,
        }
    }

    pub fn max_dim(&self) -> usize {
        self.simplices.len() - 1
    }

    pub fn num_nodes(&self) -> usize {
        self.simplices[0].len()
    }

    /// Number of k-simplices; zero above `max_dim`.
    pub fn count(&self, k: usize) -> usize {
        self.simplices.get(k).map_or(0, Vec::len)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.simplices.iter().map(Vec::len).collect()
    }

    pub fn simplices(&self, k: usize) -> Result<&[Vec<usize>]> {
        self.check_dim(k, 0)?;
        Ok(&self.simplices[k])
    }

    pub fn index_of(&self, simplex: &[usize]) -> Option<usize> {
        let k = simplex.len().checked_sub(1)?;
        self.simplices
            .get(k)?
            .binary_search_by(|s| s.as_slice().cmp(simplex))
            .ok()
    }

    /// `∂_k`, of shape `n_{k-1} × n_k`.
    pub fn boundary_operator(&self, k: usize) -> Result<&SparseMatrix> {
        self.check_dim(k, 1)?;
        Ok(&self.boundary[k - 1])
    }

    /// The 1-skeleton as a [`Graph`].
    pub fn graph(&self) -> Graph {
        let edges = self
            .simplices
            .get(1)
            .map(|l| l.iter().map(|e| (e[0], e[1])).collect())
            .unwrap_or_default();
        Graph {
            num_nodes: self.num_nodes(),
            edges,
        }
    }

    pub(crate) fn check_dim(&self, k: usize, min: usize) -> Result<()> {
        if k < min || k > self.max_dim() {
            return Err(Error::DimensionOutOfRange {
                k,
                min,
                max: self.max_dim(),
            });
        }
        Ok(())
    }
}

fn face_without(s: &[usize], m: usize) -> Vec<usize> {
    let mut face = Vec::with_capacity(s.len() - 1);
    face.extend_from_slice(&s[..m]);
    face.extend_from_slice(&s[m + 1..]);
    face
}

fn oriented_boundary(faces: &[Vec<usize>], cells: &[Vec<usize>]) -> SparseMatrix {
    let k = cells.first().map_or(0, |c| c.len() - 1);
    let mut b = CooBuilder::with_capacity(faces.len(), cells.len(), cells.len() * (k + 1));
    for (j, s) in cells.iter().enumerate() {
        for m in 0..s.len() {
            let face = face_without(s, m);
            let i = faces
                .binary_search(&face)
                .expect("clique complexes are closed under faces");
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            b.push(i, j, sign)
                .expect("indices from the complex are in range");
        }
    }
    b.finalize()
}

/// k-simplices within `radius` steps of `seed`, stepping along the
/// off-diagonal nonzeros of the k-th Hodge Laplacian.
pub fn hop_neighborhood(
    c: &SimplicialComplex,
    k: usize,
    seed: usize,
    radius: usize,
) -> Result<BTreeSet<usize>> {
    let lap = hodge_laplacian(c, k)?;
    let n = c.count(k);
    if seed >= n {
        return Err(Error::IndexOutOfRange {
            row: seed,
            col: 0,
            rows: n,
            cols: 1,
        });
    }
    let mut dist = vec![usize::MAX; n];
    dist[seed] = 0;
    let mut queue = VecDeque::from([seed]);
    while let Some(i) = queue.pop_front() {
        if dist[i] == radius {
            continue;
        }
        for (j, _) in lap.matrix().row(i) {
            if j != i && dist[j] == usize::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    Ok((0..n).filter(|&i| dist[i] != usize::MAX).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn graph_normalizes_edges() {
        let g = Graph::new(3, [(1, 0), (0, 1), (2, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
    }

    #[test]
    fn triangle_counts() {
        assert_eq!(build_complex(&triangle(), 2).counts(), vec![3, 3, 1]);
        let path = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(build_complex(&path, 2).counts(), vec![3, 2, 0]);
    }

    #[test]
    fn oversized_max_dim_is_clamped() {
        let c = build_complex(&triangle(), 7);
        assert_eq!(c.max_dim(), 2);
        let empty = Graph::new(4, []).unwrap();
        assert_eq!(build_complex(&empty, 3).counts(), vec![4, 0, 0, 0]);
        assert_eq!(build_complex(&empty, 4).counts(), vec![4]);
        let c = build_complex(&empty, 1);
        assert_eq!(c.counts(), vec![4, 0]);
    }

    #[test]
    fn edge_and_triangle_boundaries() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let c = build_complex(&g, 1);
        assert_eq!(
            c.boundary_operator(1).unwrap().to_dense().as_slice(),
            &[-1.0, 1.0]
        );

        let c = build_complex(&triangle(), 2);
        assert_eq!(
            c.simplices(1).unwrap(),
            &[vec![0, 1], vec![0, 2], vec![1, 2]]
        );
        let b2 = c.boundary_operator(2).unwrap().to_dense();
        assert_eq!(b2.as_slice(), &[1.0, -1.0, 1.0]);
        let b1 = c.boundary_operator(1).unwrap();
        assert!(b1
            .spgemm(c.boundary_operator(2).unwrap())
            .unwrap()
            .is_zero());
    }

    #[test]
    fn boundary_dimension_checks() {
        let c = build_complex(&triangle(), 2);
        assert!(c.boundary_operator(0).is_err());
        assert!(c.boundary_operator(3).is_err());
    }

    #[test]
    fn from_levels_rejects_missing_faces() {
        let levels = vec![
            vec![vec![0], vec![1], vec![2]],
            vec![vec![0, 1]],
            vec![vec![0, 1, 2]],
        ];
        assert!(SimplicialComplex::from_levels(levels).is_err());
        let unsorted = vec![vec![vec![1], vec![0]]];
        assert!(SimplicialComplex::from_levels(unsorted).is_err());
    }

    #[test]
    fn neighborhoods_on_triangle() {
        let c = build_complex(&triangle(), 2);
        assert_eq!(hop_neighborhood(&c, 0, 1, 0).unwrap(), BTreeSet::from([1]));
        assert_eq!(
            hop_neighborhood(&c, 0, 0, 1).unwrap(),
            BTreeSet::from([0, 1, 2])
        );
        // L_1 of the filled triangle is 3I, so edges are mutually unreachable.
        assert_eq!(hop_neighborhood(&c, 1, 0, 5).unwrap(), BTreeSet::from([0]));
        assert!(hop_neighborhood(&c, 0, 3, 1).is_err());
    }

    #[test]
    fn graph_json_with_signals() {
        let text = r#"{"num_nodes": 3, "edges": [[2,1],[0,1]],
            "node_signals": [[1.0],[2.0],[3.0]], "edge_signals": [[0.5,1],[1.5,2]]}"#;
        let data = GraphData::from_json(text).unwrap();
        assert_eq!(data.graph.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(data.edge_signals.as_ref().unwrap().shape(), (2, 2));
        let again = GraphData::from_json(&data.to_json().unwrap()).unwrap();
        assert_eq!(again, data);

        let bad = r#"{"num_nodes": 2, "edges": [[0,1]], "edge_signals": [[1],[2]]}"#;
        assert!(GraphData::from_json(bad).is_err());
        let missing = r#"{"edges": [[0,1]]}"#;
        let err = GraphData::from_json(missing).unwrap_err().to_string();
        assert!(err.contains("num_nodes"), "{err}");
    }
}
