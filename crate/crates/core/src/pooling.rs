//! Simplicial attention pooling.
//!
//! One pooling step clusters the nodes with a single greedy normalized-cut
//! matching pass, carries the clustering up through every simplex dimension
//! with the boundary-update rule, and averages signals over each coarse
//! simplex's preimage using attention weights.
//!
//! Level `k` of the downsampling:
//!
//! 1. `M = S_{k-1} ∂_k`.
//! 2. Drop columns that collapsed (anything other than `k+1` entries of
//!    magnitude one) and columns whose support repeats an earlier one.
//! 3. `[S_k]_{ij} = 1` iff `Σ_q |∂'_{qi}| |M_{qj}| = k+1`.
//!
//! Coarse simplices are listed in lexicographic order of their cluster
//! tuples and oriented by ascending cluster index, so each coarse boundary
//! column equals the surviving column of `M` up to sign.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use nalgebra::DMatrix;

use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::projection::ProjectionPair;
use crate::sparse::{CooBuilder, SparseMatrix};

/// Query/key projections (`d × d_k`) and the self/cross mixing weight of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    pub w_query: DMatrix<f64>,
    pub w_key: DMatrix<f64>,
    pub alpha: f64,
}

impl AttentionHead {
    pub fn zeros(d: usize, d_k: usize, alpha: f64) -> Self {
        Self {
            w_query: DMatrix::zeros(d, d_k),
            w_key: DMatrix::zeros(d, d_k),
            alpha,
        }
    }

    pub fn qk_dim(&self) -> usize {
        self.w_query.ncols()
    }

    fn check(&self, d: usize) -> Result<()> {
        let d_k = self.w_query.ncols();
        if d_k == 0 || self.w_query.shape() != (d, d_k) || self.w_key.shape() != (d, d_k) {
            return Err(Error::shape(format!(
                "query {:?} / key {:?} weights do not fit feature width {d}",
                self.w_query.shape(),
                self.w_key.shape()
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::shape(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub low: AttentionHead,
    pub high: AttentionHead,
}

/// Per-simplex pooling weights of one dimension.
///
/// The logarithms are kept next to the probabilities so pooling stays exact
/// when a softmax entry underflows to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    values: Vec<f64>,
    log: Vec<f64>,
}

impl AttentionWeights {
    pub fn uniform(n: usize) -> Self {
        Self {
            values: vec![1.0 / n as f64; n],
            log: vec![-(n as f64).ln(); n],
        }
    }

    /// Entries must be non-negative.
    pub fn from_probabilities(values: Vec<f64>) -> Self {
        let log = values.iter().map(|v| v.ln()).collect();
        Self { values, log }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Diagonal of the row-wise softmax of a square score matrix.
pub fn softmax_diagonal(scores: &DMatrix<f64>) -> Vec<f64> {
    log_softmax_diagonal(scores)
        .into_iter()
        .map(f64::exp)
        .collect()
}

pub fn log_softmax_diagonal(scores: &DMatrix<f64>) -> Vec<f64> {
    (0..scores.nrows())
        .map(|i| {
            let row = scores.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = row.iter().map(|s| (s - max).exp()).sum();
            scores[(i, i)] - max - total.ln()
        })
        .collect()
}

/// Pre-softmax scores `(α Q + (1-α) T Q_other) K^T / √d_k` for one dimension.
pub fn attention_scores(
    x_own: &DMatrix<f64>,
    x_other: &DMatrix<f64>,
    other_to_own: &SparseMatrix,
    own: &AttentionHead,
    other: &AttentionHead,
) -> Result<DMatrix<f64>> {
    let scale = (own.qk_dim() as f64).sqrt();
    let q_own = x_own * &own.w_query;
    let k_own = x_own * &own.w_key;
    let q_cross = other_to_own.spmm(&(x_other * &other.w_query))?;
    let mixed = q_own * own.alpha + q_cross * (1.0 - own.alpha);
    Ok(mixed * k_own.transpose() / scale)
}

/// Self/cross attention weights for the lower and higher dimension of `ops`.
pub fn attention_weights(
    x_low: &DMatrix<f64>,
    x_high: &DMatrix<f64>,
    ops: &ProjectionPair,
    p: &AttentionParams,
) -> Result<(AttentionWeights, AttentionWeights)> {
    let d = x_low.ncols();
    if x_high.ncols() != d {
        return Err(Error::shape(format!(
            "attention signals have widths {d} and {}",
            x_high.ncols()
        )));
    }
    p.low.check(d)?;
    p.high.check(d)?;
    if p.low.qk_dim() != p.high.qk_dim() {
        return Err(Error::shape("query/key widths differ between dimensions"));
    }
    if ops.down.matrix.shape() != (x_low.nrows(), x_high.nrows()) {
        return Err(Error::shape(format!(
            "signals with {} and {} rows do not fit a {:?} projection",
            x_low.nrows(),
            x_high.nrows(),
            ops.down.matrix.shape()
        )));
    }
    let low = attention_scores(x_low, x_high, &ops.down.matrix, &p.low, &p.high)?;
    let high = attention_scores(x_high, x_low, &ops.up.matrix, &p.high, &p.low)?;
    let weights = |scores: &DMatrix<f64>| {
        let log = log_softmax_diagonal(scores);
        AttentionWeights {
            values: log.iter().map(|v| v.exp()).collect(),
            log,
        }
    };
    Ok((weights(&low), weights(&high)))
}

/// Assignment of every node to one of `num_clusters` contiguous clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeClustering {
    cluster_of: Vec<usize>,
    num_clusters: usize,
}

impl NodeClustering {
    pub fn singletons(n: usize) -> Self {
        Self {
            cluster_of: (0..n).collect(),
            num_clusters: n,
        }
    }

    pub fn new(cluster_of: Vec<usize>) -> Result<Self> {
        let num_clusters = cluster_of.iter().max().map_or(0, |m| m + 1);
        let used: BTreeSet<usize> = cluster_of.iter().copied().collect();
        if used.len() != num_clusters {
            return Err(Error::shape("cluster indices are not contiguous from 0"));
        }
        Ok(Self {
            cluster_of,
            num_clusters,
        })
    }

    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn num_nodes(&self) -> usize {
        self.cluster_of.len()
    }

    /// Members of every cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (v, &c) in self.cluster_of.iter().enumerate() {
            out[c].push(v);
        }
        out
    }

    /// `S_0`: one row per cluster, one column per node.
    pub fn assignment_matrix(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(
            self.num_clusters,
            self.cluster_of.len(),
            self.cluster_of
                .iter()
                .enumerate()
                .map(|(v, &c)| (c, v, 1.0)),
        )
        .expect("cluster indices are in range")
    }

    /// `cluster_of` for the composition `self` then `next` (which clusters our clusters).
    fn then(&self, next: &NodeClustering) -> NodeClustering {
        NodeClustering {
            cluster_of: self
                .cluster_of
                .iter()
                .map(|&c| next.cluster_of[c])
                .collect(),
            num_clusters: next.num_clusters,
        }
    }
}

/// Number of greedy matching passes; each pass at most halves the node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusteringConfig {
    pub levels: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self { levels: 1 }
    }
}

/// Greedy normalized-cut matching on the 1-skeleton of `c`.
///
/// Nodes are visited in ascending order; an unmatched node pairs with the
/// unmatched neighbour maximizing `w_uv (1/d_u + 1/d_v)`, lowest index on
/// ties. Nodes left without a partner stay singletons.
pub fn cluster_nodes(c: &SimplicialComplex, cfg: ClusteringConfig) -> NodeClustering {
    let n = c.num_nodes();
    let mut weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for &(u, v) in c.graph().edges() {
        weights[u].insert(v, 1.0);
        weights[v].insert(u, 1.0);
    }
    let mut clustering = NodeClustering::singletons(n);
    for _ in 0..cfg.levels.max(1) {
        let level = match_level(&weights);
        if level.num_clusters == weights.len() {
            break;
        }
        weights = contract(&weights, &level);
        clustering = clustering.then(&level);
    }
    clustering
}

fn match_level(weights: &[BTreeMap<usize, f64>]) -> NodeClustering {
    let n = weights.len();
    let degree: Vec<f64> = weights.iter().map(|w| w.values().sum()).collect();
    let mut cluster_of = vec![usize::MAX; n];
    let mut next = 0;
    for u in 0..n {
        if cluster_of[u] != usize::MAX {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (&v, &w) in &weights[u] {
            if cluster_of[v] != usize::MAX {
                continue;
            }
            let score = w * (1.0 / degree[u] + 1.0 / degree[v]);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((v, score));
            }
        }
        cluster_of[u] = next;
        if let Some((v, _)) = best {
            cluster_of[v] = next;
        }
        next += 1;
    }
    NodeClustering {
        cluster_of,
        num_clusters: next,
    }
}

fn contract(weights: &[BTreeMap<usize, f64>], nc: &NodeClustering) -> Vec<BTreeMap<usize, f64>> {
    let mut out = vec![BTreeMap::new(); nc.num_clusters];
    for (u, row) in weights.iter().enumerate() {
        for (&v, &w) in row {
            let (a, b) = (nc.cluster_of[u], nc.cluster_of[v]);
            if a != b {
                *out[a].entry(b).or_insert(0.0) += w;
            }
        }
    }
    out
}

/// Output of [`downsample`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseningResult {
    pub clustering: NodeClustering,
    /// `S_0..S_K`, each `n'_k × n_k`.
    pub assignments: Vec<SparseMatrix>,
    pub coarse_complex: SimplicialComplex,
}

impl CoarseningResult {
    /// Attention-weighted averages over each coarse simplex's preimage.
    pub fn pool(
        &self,
        signals: &[DMatrix<f64>],
        weights: &[AttentionWeights],
    ) -> Result<Vec<DMatrix<f64>>> {
        pool_signals(signals, weights, &self.assignments)
    }
}

pub fn downsample(c: &SimplicialComplex, nc: &NodeClustering) -> Result<CoarseningResult> {
    if nc.num_nodes() != c.num_nodes() {
        return Err(Error::shape(format!(
            "clustering covers {} nodes, complex has {}",
            nc.num_nodes(),
            c.num_nodes()
        )));
    }
    let mut assignments = vec![nc.assignment_matrix()];
    let mut levels: Vec<Vec<Vec<usize>>> = vec![(0..nc.num_clusters()).map(|i| vec![i]).collect()];

    for k in 1..=c.max_dim() {
        let image = assignments[k - 1].spgemm(c.boundary_operator(k)?)?;
        // Rows of the transpose are the columns of S_{k-1} ∂_k.
        let image_t = image.transpose();

        let mut reps: Vec<usize> = Vec::new();
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        for j in 0..image_t.rows() {
            let col: Vec<(usize, f64)> = image_t.row(j).collect();
            if col.len() != k + 1 || col.iter().any(|(_, v)| v.abs() != 1.0) {
                continue;
            }
            let support: Vec<usize> = col.iter().map(|(q, _)| *q).collect();
            if seen.insert(support) {
                reps.push(j);
            }
        }

        let faces = &levels[k - 1];
        let mut coarse: Vec<(Vec<usize>, usize)> = reps
            .iter()
            .map(|&j| {
                let verts: BTreeSet<usize> = image_t
                    .row(j)
                    .flat_map(|(q, _)| faces[q].iter().copied())
                    .collect();
                debug_assert_eq!(verts.len(), k + 1);
                (verts.into_iter().collect(), j)
            })
            .collect();
        coarse.sort();

        // ∂'_k: surviving columns of S_{k-1} ∂_k, ordered like the coarse simplices.
        let mut updated = CooBuilder::new(faces.len(), coarse.len());
        for (i, (_, j)) in coarse.iter().enumerate() {
            for (q, v) in image_t.row(*j) {
                updated.push(q, i, v)?;
            }
        }
        let overlap = updated
            .finalize()
            .abs_entries()
            .transpose()
            .spgemm(&image.abs_entries())?;
        let target = (k + 1) as f64;
        let s_k = SparseMatrix::from_triplets(
            overlap.rows(),
            overlap.cols(),
            overlap
                .triplets()
                .filter(|t| t.2 == target)
                .map(|(i, j, _)| (i, j, 1.0)),
        )?;
        assignments.push(s_k);
        levels.push(coarse.into_iter().map(|(t, _)| t).collect());
    }

    let coarse_complex = SimplicialComplex::from_levels(levels)?;
    Ok(CoarseningResult {
        clustering: nc.clone(),
        assignments,
        coarse_complex,
    })
}

/// Pools each dimension's signal: coarse simplex `r` receives
/// `Σ a_j x_j / Σ a_j` over its preimage `j`. Simplices without an image are dropped.
pub fn pool_signals(
    signals: &[DMatrix<f64>],
    weights: &[AttentionWeights],
    assignments: &[SparseMatrix],
) -> Result<Vec<DMatrix<f64>>> {
    if signals.len() != weights.len() || signals.len() > assignments.len() {
        return Err(Error::shape(format!(
            "{} signals, {} weight vectors, {} assignment matrices",
            signals.len(),
            weights.len(),
            assignments.len()
        )));
    }
    signals
        .iter()
        .zip(weights)
        .zip(assignments)
        .enumerate()
        .map(|(k, ((x, a), s))| {
            if x.nrows() != s.cols() || a.len() != s.cols() {
                return Err(Error::shape(format!(
                    "dimension {k}: signal has {} rows, weights {}, assignment {:?}",
                    x.nrows(),
                    a.len(),
                    s.shape()
                )));
            }
            let mut out = DMatrix::zeros(s.rows(), x.ncols());
            let log = a.log_weights();
            for r in 0..s.rows() {
                let top = s
                    .row(r)
                    .map(|(j, _)| log[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for (j, _) in s.row(r) {
                    let w = (log[j] - top).exp();
                    total += w;
                    let mut row = out.row_mut(r);
                    row += x.row(j) * w;
                }
                if total.is_nan() || total <= 0.0 {
                    return Err(Error::shape(format!(
                        "dimension {k}: coarse simplex {r} has zero total attention"
                    )));
                }
                out.row_mut(r).unscale_mut(total);
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{build_complex, Graph};
    use crate::projection::ProjectionPair;

    fn filled_triangle() -> SimplicialComplex {
        build_complex(&Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap(), 2)
    }

    #[test]
    fn zero_weights_give_uniform_attention() {
        let c = filled_triangle();
        let ops = ProjectionPair::between(&c, 0, 1).unwrap();
        let p = AttentionParams {
            low: AttentionHead::zeros(2, 4, 0.5),
            high: AttentionHead::zeros(2, 4, 0.5),
        };
        let x = DMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let (a0, a1) = attention_weights(&x, &x, &ops, &p).unwrap();
        assert!(a0
            .as_slice()
            .iter()
            .chain(a1.as_slice())
            .all(|&v| v == 1.0 / 3.0));
        assert_eq!(a0, AttentionWeights::uniform(3));
    }

    #[test]
    fn softmax_diagonal_shift_invariant() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let shifted = DMatrix::from_row_slice(2, 2, &[101.0, 102.0, 9.0, 10.5]);
        let (a, b) = (softmax_diagonal(&s), softmax_diagonal(&shifted));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        let c = filled_triangle();
        let ops = ProjectionPair::between(&c, 0, 1).unwrap();
        let p = AttentionParams {
            low: AttentionHead::zeros(2, 4, 1.5),
            high: AttentionHead::zeros(2, 4, 0.5),
        };
        let x = DMatrix::zeros(3, 2);
        assert!(attention_weights(&x, &x, &ops, &p).is_err());
    }

    #[test]
    fn clustering_examples() {
        let two = build_complex(&Graph::new(4, [(0, 1), (2, 3)]).unwrap(), 2);
        let nc = cluster_nodes(&two, ClusteringConfig::default());
        assert_eq!(nc.members(), vec![vec![0, 1], vec![2, 3]]);

        let nc = cluster_nodes(&filled_triangle(), ClusteringConfig::default());
        assert_eq!(nc.cluster_of(), &[0, 0, 1]);

        let bare = build_complex(&Graph::new(3, []).unwrap(), 2);
        assert_eq!(
            cluster_nodes(&bare, ClusteringConfig::default()),
            NodeClustering::singletons(3)
        );
    }

    #[test]
    fn normalized_cut_prefers_low_degree_partner() {
        // Star center 0 with leaves 1,2 plus a pendant chain 2-3-4-5: node 0
        // pairs with leaf 1 (degree 1) over node 2 (degree 2).
        let g = Graph::new(6, [(0, 1), (0, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
        let nc = cluster_nodes(&build_complex(&g, 1), ClusteringConfig::default());
        assert_eq!(nc.cluster_of(), &[0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn two_levels_compose() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let c = build_complex(&g, 1);
        let nc = cluster_nodes(&c, ClusteringConfig { levels: 2 });
        assert_eq!(nc.num_clusters(), 1);
    }

    #[test]
    fn triangle_downsample() {
        let c = filled_triangle();
        let nc = NodeClustering::new(vec![0, 0, 1]).unwrap();
        let res = downsample(&c, &nc).unwrap();
        assert_eq!(res.coarse_complex.counts(), vec![2, 1, 0]);
        assert_eq!(res.assignments[1].to_dense().as_slice(), &[0.0, 1.0, 1.0]);
        assert_eq!(res.assignments[2].shape(), (0, 1));
        assert!(res.coarse_complex.boundary_operator(1).unwrap().get(0, 0) == -1.0);
    }

    #[test]
    fn identity_downsample() {
        let c = filled_triangle();
        let res = downsample(&c, &NodeClustering::singletons(3)).unwrap();
        assert_eq!(res.coarse_complex, c);
        for (k, s) in res.assignments.iter().enumerate() {
            assert_eq!(s, &SparseMatrix::identity(c.count(k)));
        }
    }

    #[test]
    fn pooling_weighted_average() {
        let s = SparseMatrix::from_triplets(1, 2, [(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        let x = DMatrix::from_column_slice(2, 1, &[4.0, 8.0]);
        let out = pool_signals(
            &[x],
            &[AttentionWeights::from_probabilities(vec![0.75, 0.25])],
            &[s],
        )
        .unwrap();
        assert!((out[0][(0, 0)] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn pooling_shape_errors() {
        let s = SparseMatrix::identity(2);
        let x = DMatrix::zeros(3, 1);
        assert!(pool_signals(&[x], &[AttentionWeights::uniform(3)], &[s]).is_err());
        assert!(downsample(&filled_triangle(), &NodeClustering::singletons(2)).is_err());
        assert!(NodeClustering::new(vec![0, 2]).is_err());
    }
}
