//! Brute-force simplicial constructions on dense matrices.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DMatrix;

/// All ascending `size`-subsets of `0..n`, in lexicographic order.
pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

/// Clique complex by checking every vertex subset for pairwise adjacency.
pub fn clique_levels(n: usize, edges: &[(usize, usize)], max_dim: usize) -> Vec<Vec<Vec<usize>>> {
    let mut adj = vec![vec![false; n]; n];
    for &(u, v) in edges {
        adj[u][v] = true;
        adj[v][u] = true;
    }
    (0..=max_dim)
        .map(|k| {
            subsets(n, k + 1)
                .into_iter()
                .filter(|s| {
                    s.iter()
                        .enumerate()
                        .all(|(i, &a)| s[i + 1..].iter().all(|&b| adj[a][b]))
                })
                .collect()
        })
        .collect()
}

/// Signed incidence between `faces` and `cells`; deleting vertex `m` gives sign `(-1)^m`.
pub fn dense_boundary(faces: &[Vec<usize>], cells: &[Vec<usize>]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(faces.len(), cells.len());
    for (j, cell) in cells.iter().enumerate() {
        for m in 0..cell.len() {
            let face: Vec<usize> = cell
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != m)
                .map(|(_, &v)| v)
                .collect();
            let i = faces.iter().position(|f| *f == face).expect("face present");
            b[(i, j)] = if m % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    b
}

pub fn dense_boundaries(levels: &[Vec<Vec<usize>>]) -> Vec<DMatrix<f64>> {
    (1..levels.len())
        .map(|k| dense_boundary(&levels[k - 1], &levels[k]))
        .collect()
}

/// `B_{k+1} B_{k+1}^T + B_k^T B_k` with missing terms omitted.
pub fn dense_hodge(levels: &[Vec<Vec<usize>>], k: usize) -> DMatrix<f64> {
    let n = levels[k].len();
    let mut l = DMatrix::zeros(n, n);
    if k + 1 < levels.len() {
        let b = dense_boundary(&levels[k], &levels[k + 1]);
        l += naive_matmul(&b, &b.transpose());
    }
    if k >= 1 {
        let b = dense_boundary(&levels[k - 1], &levels[k]);
        l += naive_matmul(&b.transpose(), &b);
    }
    l
}

/// Triple-loop product.
pub fn naive_matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut c = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[(i, k)] * b[(k, j)];
            }
            c[(i, j)] = s;
        }
    }
    c
}

/// Vertices within `radius` steps on the off-diagonal nonzero pattern of `m`.
pub fn bfs_ball(m: &DMatrix<f64>, seed: usize, radius: usize) -> BTreeSet<usize> {
    let n = m.nrows();
    let mut dist = vec![None; n];
    dist[seed] = Some(0);
    let mut q = VecDeque::from([seed]);
    while let Some(i) = q.pop_front() {
        let d = dist[i].unwrap();
        if d == radius {
            continue;
        }
        for j in 0..n {
            if j != i && m[(i, j)] != 0.0 && dist[j].is_none() {
                dist[j] = Some(d + 1);
                q.push_back(j);
            }
        }
    }
    (0..n).filter(|&i| dist[i].is_some()).collect()
}

/// Greedy normalized-cut matching on an unweighted graph, written out plainly.
pub fn greedy_matching(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut nbrs = vec![BTreeSet::new(); n];
    for &(u, v) in edges {
        nbrs[u].insert(v);
        nbrs[v].insert(u);
    }
    let deg: Vec<f64> = nbrs.iter().map(|s| s.len() as f64).collect();
    let mut cluster = vec![None; n];
    let mut next = 0;
    for u in 0..n {
        if cluster[u].is_some() {
            continue;
        }
        let mut best: Option<usize> = None;
        let mut best_score = f64::NEG_INFINITY;
        for &v in &nbrs[u] {
            if cluster[v].is_some() {
                continue;
            }
            let score = 1.0 / deg[u] + 1.0 / deg[v];
            if score > best_score {
                best_score = score;
                best = Some(v);
            }
        }
        cluster[u] = Some(next);
        if let Some(v) = best {
            cluster[v] = Some(next);
        }
        next += 1;
    }
    cluster.into_iter().map(Option::unwrap).collect()
}

/// Coarse complex obtained by mapping every simplex through `cluster_of` and
/// keeping images with all-distinct clusters, plus dense assignment matrices.
pub fn contract(
    levels: &[Vec<Vec<usize>>],
    cluster_of: &[usize],
) -> (Vec<Vec<Vec<usize>>>, Vec<DMatrix<f64>>) {
    let mut coarse_levels = Vec::new();
    let mut assignments = Vec::new();
    for level in levels {
        let images: Vec<Option<Vec<usize>>> = level
            .iter()
            .map(|s| {
                let img: BTreeSet<usize> = s.iter().map(|&v| cluster_of[v]).collect();
                (img.len() == s.len()).then(|| img.into_iter().collect())
            })
            .collect();
        let coarse: BTreeMap<Vec<usize>, ()> =
            images.iter().flatten().map(|t| (t.clone(), ())).collect();
        let coarse: Vec<Vec<usize>> = coarse.into_keys().collect();
        let mut s = DMatrix::zeros(coarse.len(), level.len());
        for (j, img) in images.iter().enumerate() {
            if let Some(t) = img {
                let r = coarse.iter().position(|c| c == t).unwrap();
                s[(r, j)] = 1.0;
            }
        }
        coarse_levels.push(coarse);
        assignments.push(s);
    }
    (coarse_levels, assignments)
}

/// Row-softmax diagonal without max subtraction.
pub fn softmax_diag(s: &DMatrix<f64>) -> Vec<f64> {
    (0..s.nrows())
        .map(|i| {
            let z: f64 = (0..s.ncols()).map(|j| s[(i, j)].exp()).sum();
            s[(i, i)].exp() / z
        })
        .collect()
}

/// `log softmax(s)_ii`, shifted by the row minimum of `s_ii - s_ij`.
pub fn log_softmax_diag(s: &DMatrix<f64>) -> Vec<f64> {
    (0..s.nrows())
        .map(|i| {
            let gaps: Vec<f64> = (0..s.ncols()).map(|j| s[(i, j)] - s[(i, i)]).collect();
            let top = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            -(top + gaps.iter().map(|g| (g - top).exp()).sum::<f64>().ln())
        })
        .collect()
}

/// Rows of `x` averaged over each row of the 0/1 matrix `assign`, weighted by `exp(log_w)`.
pub fn weighted_pool(x: &DMatrix<f64>, log_w: &[f64], assign: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(assign.nrows(), x.ncols());
    for r in 0..assign.nrows() {
        let members: Vec<usize> = (0..assign.ncols())
            .filter(|&j| assign[(r, j)] == 1.0)
            .collect();
        let top = members
            .iter()
            .map(|&j| log_w[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = members.iter().map(|&j| (log_w[j] - top).exp()).collect();
        let total: f64 = w.iter().sum();
        for c in 0..x.ncols() {
            out[(r, c)] = members
                .iter()
                .zip(&w)
                .map(|(&j, wj)| wj * x[(j, c)])
                .sum::<f64>()
                / total;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k4_counts() {
        let edges: Vec<_> = subsets(4, 2).into_iter().map(|e| (e[0], e[1])).collect();
        let lv = clique_levels(4, &edges, 3);
        let counts: Vec<_> = lv.iter().map(Vec::len).collect();
        assert_eq!(counts, vec![4, 6, 4, 1]);
    }

    #[test]
    fn triangle_contraction() {
        let lv = clique_levels(3, &[(0, 1), (0, 2), (1, 2)], 2);
        let (coarse, s) = contract(&lv, &[0, 0, 1]);
        assert_eq!(
            coarse,
            vec![vec![vec![0], vec![1]], vec![vec![0, 1]], vec![]]
        );
        assert_eq!(s[1].as_slice(), &[0.0, 1.0, 1.0]);
    }
}
