//! Hodge Laplacians, their eigensystems, and spectral filtering.
//!
//! Filters are applied either exactly in the eigenbasis ([`filter_exact`]) or
//! through a Laguerre expansion evaluated with the three-term recurrence on
//! signals ([`filter_poly`]); the polynomial path never forms `T_p(L)`.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Default size limit for the dense eigensolver.
pub const DENSE_EIGEN_CAP: usize = 2000;

/// Magnitude below which an eigenvector entry is ignored by the sign fix.
const SIGN_FIX_EPS: f64 = 1e-10;

/// The k-th Hodge Laplacian `∂_{k+1}∂_{k+1}^T + ∂_k^T∂_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HodgeLaplacian {
    k: usize,
    matrix: SparseMatrix,
}

pub fn hodge_laplacian(c: &SimplicialComplex, k: usize) -> Result<HodgeLaplacian> {
    c.check_dim(k, 0)?;
    let n = c.count(k);
    let mut matrix = SparseMatrix::zeros(n, n);
    if k < c.max_dim() {
        let up = c.boundary_operator(k + 1)?;
        matrix = matrix.add(&up.spgemm(&up.transpose())?)?;
    }
    if k >= 1 {
        let down = c.boundary_operator(k)?;
        matrix = matrix.add(&down.transpose().spgemm(down)?)?;
    }
    Ok(HodgeLaplacian { k, matrix })
}

impl HodgeLaplacian {
    pub fn new(k: usize, matrix: SparseMatrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::shape(format!(
                "Laplacian must be square, got {:?}",
                matrix.shape()
            )));
        }
        Ok(Self { k, matrix })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Rescales by the Gershgorin bound so the spectrum lies in `[0, 1]`.
    /// Off by default; the unscaled operator is the standard formulation.
    pub fn normalized(&self) -> Self {
        let bound = (0..self.dim())
            .map(|i| self.matrix.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if bound == 0.0 {
            return self.clone();
        }
        Self {
            k: self.k,
            matrix: self.matrix.scale(1.0 / bound),
        }
    }
}

/// Ascending eigenvalues with orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn is_complete(&self) -> bool {
        self.eigenvalues.len() == self.dim()
    }
}

/// Lowest `count` eigenpairs (all when `None`), using the default size cap.
pub fn eigensystem(l: &HodgeLaplacian, count: Option<usize>) -> Result<EigenSystem> {
    eigensystem_capped(l, count, DENSE_EIGEN_CAP)
}

pub fn eigensystem_capped(
    l: &HodgeLaplacian,
    count: Option<usize>,
    cap: usize,
) -> Result<EigenSystem> {
    let n = l.dim();
    if n == 0 {
        return Err(Error::shape(format!("no {}-simplices to decompose", l.k)));
    }
    if n > cap {
        return Err(Error::TooLargeForDense { size: n, cap });
    }
    let wanted = match count {
        Some(c) if c > n => {
            warn!("requested {c} eigenpairs of a {n}x{n} operator; returning {n}");
            n
        }
        Some(c) => c,
        None => n,
    };

    let eig = SymmetricEigen::new(l.matrix.to_dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(wanted);

    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(n, wanted);
    for (col, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let flip = v
            .iter()
            .find(|x| x.abs() > SIGN_FIX_EPS)
            .is_some_and(|x| *x < 0.0);
        let sign = if flip { -1.0 } else { 1.0 };
        eigenvectors.set_column(col, &(v * sign));
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Laguerre values `T_p(λ)` for `p < order`: row `p`, one column per λ.
pub fn laguerre_eval(order: usize, lambdas: &[f64]) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(order, lambdas.len());
    for (j, &lam) in lambdas.iter().enumerate() {
        let (mut prev, mut cur) = (0.0, 1.0);
        for p in 0..order {
            t[(p, j)] = cur;
            let next = if p == 0 {
                1.0 - lam
            } else {
                ((2 * p + 1) as f64 - lam) * cur / (p + 1) as f64 - p as f64 * prev / (p + 1) as f64
            };
            prev = cur;
            cur = next;
        }
    }
    t
}

/// `Ψ diag(h(λ)) Ψ^T x`, channel by channel. Needs the full eigensystem.
pub fn filter_exact<F>(es: &EigenSystem, spectrum_fn: F, x: &DMatrix<f64>) -> Result<DMatrix<f64>>
where
    F: Fn(f64) -> f64,
{
    if !es.is_complete() {
        return Err(Error::IncompleteEigensystem {
            have: es.eigenvalues.len(),
            need: es.dim(),
        });
    }
    if x.nrows() != es.dim() {
        return Err(Error::DimensionMismatch {
            op: "filter_exact",
            left: (es.dim(), es.dim()),
            right: x.shape(),
        });
    }
    let psi = &es.eigenvectors;
    let mut coeffs = psi.transpose() * x;
    for (j, &lam) in es.eigenvalues.iter().enumerate() {
        let h = spectrum_fn(lam);
        coeffs.row_mut(j).scale_mut(h);
    }
    Ok(psi * coeffs)
}

/// Laguerre coefficients `θ[p]` (each `d_in × d_out`) of one filter layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FilterBankFile", into = "FilterBankFile")]
pub struct FilterBank {
    k: usize,
    theta: Vec<DMatrix<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FilterBankFile {
    k: usize,
    #[serde(rename = "P")]
    order: usize,
    theta: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<FilterBankFile> for FilterBank {
    type Error = Error;

    fn try_from(f: FilterBankFile) -> Result<Self> {
        if f.theta.len() != f.order {
            return Err(Error::shape(format!(
                "P = {} but theta has {} slices",
                f.order,
                f.theta.len()
            )));
        }
        let d_in = f.theta.first().map_or(0, Vec::len);
        let d_out = f.theta.first().and_then(|s| s.first()).map_or(0, Vec::len);
        let theta = f
            .theta
            .iter()
            .enumerate()
            .map(|(p, slice)| {
                if slice.len() != d_in {
                    return Err(Error::shape(format!("theta[{p}] has {} rows", slice.len())));
                }
                crate::io::matrix_from_rows(slice, d_out).map_err(|e| e.at(format!("theta[{p}]")))
            })
            .collect::<Result<Vec<_>>>()?;
        FilterBank::new(f.k, theta)
    }
}

impl From<FilterBank> for FilterBankFile {
    fn from(fb: FilterBank) -> Self {
        FilterBankFile {
            k: fb.k,
            order: fb.theta.len(),
            theta: fb.theta.iter().map(crate::io::matrix_to_rows).collect(),
        }
    }
}

impl FilterBank {
    pub fn new(k: usize, theta: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = theta.first() else {
            return Err(Error::shape("filter bank needs polynomial order >= 1"));
        };
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::shape("filter bank channel counts must be >= 1"));
        }
        if let Some(p) = theta.iter().position(|t| t.shape() != shape) {
            return Err(Error::shape(format!(
                "theta[{p}] is {:?}, theta[0] is {shape:?}",
                theta[p].shape()
            )));
        }
        Ok(Self { k, theta })
    }

    /// Single input and output channel with coefficients `θ_0..θ_{P-1}`.
    pub fn scalar(k: usize, coeffs: &[f64]) -> Result<Self> {
        Self::new(
            k,
            coeffs
                .iter()
                .map(|&c| DMatrix::from_element(1, 1, c))
                .collect(),
        )
    }

    pub fn zeros(k: usize, order: usize, d_in: usize, d_out: usize) -> Result<Self> {
        Self::new(k, vec![DMatrix::zeros(d_in, d_out); order])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn order(&self) -> usize {
        self.theta.len()
    }

    pub fn d_in(&self) -> usize {
        self.theta[0].nrows()
    }

    pub fn d_out(&self) -> usize {
        self.theta[0].ncols()
    }

    pub fn theta(&self) -> &[DMatrix<f64>] {
        &self.theta
    }

    /// Coefficient `θ_{p, i, o}`.
    pub fn coeff(&self, p: usize, i: usize, o: usize) -> f64 {
        self.theta[p][(i, o)]
    }

    /// Spectral response `Σ_p θ_{p,i,o} T_p(λ)` of one channel pair.
    pub fn response(&self, i: usize, o: usize, lambda: f64) -> f64 {
        let t = laguerre_eval(self.order(), &[lambda]);
        (0..self.order())
            .map(|p| self.coeff(p, i, o) * t[(p, 0)])
            .sum()
    }

    /// Entrywise sum of two banks with identical shapes.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.k != other.k
            || self.order() != other.order()
            || self.theta[0].shape() != other.theta[0].shape()
        {
            return Err(Error::shape("filter banks differ in shape"));
        }
        Self::new(
            self.k,
            self.theta
                .iter()
                .zip(&other.theta)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

/// `T_p(L) x` for `p < order`, by the Laguerre three-term recurrence.
pub fn laguerre_terms(
    l: &HodgeLaplacian,
    x: &DMatrix<f64>,
    order: usize,
) -> Result<Vec<DMatrix<f64>>> {
    if x.nrows() != l.dim() {
        return Err(Error::DimensionMismatch {
            op: "laguerre_terms",
            left: l.matrix.shape(),
            right: x.shape(),
        });
    }
    let mut terms: Vec<DMatrix<f64>> = Vec::with_capacity(order);
    for p in 0..order {
        let next = match p {
            0 => x.clone(),
            1 => x - l.matrix.spmm(x)?,
            _ => {
                let q = (p - 1) as f64;
                let cur = &terms[p - 1];
                let lx = l.matrix.spmm(cur)?;
                (cur * (2.0 * q + 1.0) - lx - &terms[p - 2] * q) / (q + 1.0)
            }
        };
        terms.push(next);
    }
    Ok(terms)
}

/// Laguerre-expanded filter: output channel `o` is `Σ_i Σ_p θ_{p,i,o} T_p(L) x_i`.
pub fn filter_poly(l: &HodgeLaplacian, fb: &FilterBank, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if fb.k != l.k {
        return Err(Error::shape(format!(
            "filter bank for dimension {} applied to L_{}",
            fb.k, l.k
        )));
    }
    if x.ncols() != fb.d_in() {
        return Err(Error::shape(format!(
            "signal has {} channels, filter expects {}",
            x.ncols(),
            fb.d_in()
        )));
    }
    if l.dim() == 0 {
        return Ok(DMatrix::zeros(0, fb.d_out()));
    }
    let terms = laguerre_terms(l, x, fb.order())?;
    let mut out = DMatrix::zeros(x.nrows(), fb.d_out());
    for (t, theta) in terms.iter().zip(&fb.theta) {
        out += t * theta;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{build_complex, Graph};

    fn filled_triangle() -> SimplicialComplex {
        build_complex(&Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap(), 2)
    }

    #[test]
    fn laguerre_values() {
        let t = laguerre_eval(5, &[0.0, 1.0, 2.5]);
        for p in 0..5 {
            assert_eq!(t[(p, 0)], 1.0);
        }
        assert_eq!(t[(0, 2)], 1.0);
        assert_eq!(t[(1, 1)], 0.0);
        assert!((t[(2, 1)] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangle_laplacians() {
        let c = filled_triangle();
        let l1 = hodge_laplacian(&c, 1).unwrap();
        assert_eq!(l1.matrix(), &SparseMatrix::identity(3).scale(3.0));
        let l0 = hodge_laplacian(&c, 0).unwrap();
        let es = eigensystem(&l0, None).unwrap();
        let expect = [0.0, 3.0, 3.0];
        for (a, b) in es.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(hodge_laplacian(&c, 3).is_err());
    }

    #[test]
    fn path_edge_laplacian_is_down_only() {
        let c = build_complex(&Graph::new(3, [(0, 1), (1, 2)]).unwrap(), 2);
        let b1 = c.boundary_operator(1).unwrap();
        let l1 = hodge_laplacian(&c, 1).unwrap();
        assert_eq!(l1.matrix(), &b1.transpose().spgemm(b1).unwrap());
    }

    #[test]
    fn eigensystem_sign_and_clamp() {
        let c = filled_triangle();
        let l0 = hodge_laplacian(&c, 0).unwrap();
        let es = eigensystem(&l0, Some(10)).unwrap();
        assert_eq!(es.eigenvalues.len(), 3);
        let v0 = es.eigenvectors.column(0);
        let c0 = 1.0 / 3f64.sqrt();
        assert!(v0.iter().all(|x| (x - c0).abs() < 1e-10));
        let es = eigensystem(&l0, Some(1)).unwrap();
        assert!(!es.is_complete());
        assert!(matches!(
            filter_exact(&es, |_| 1.0, &DMatrix::zeros(3, 1)),
            Err(Error::IncompleteEigensystem { .. })
        ));
        assert!(matches!(
            eigensystem_capped(&l0, None, 2),
            Err(Error::TooLargeForDense { .. })
        ));
    }

    #[test]
    fn order_one_identity_filter() {
        let c = filled_triangle();
        let l0 = hodge_laplacian(&c, 0).unwrap();
        let fb = FilterBank::scalar(0, &[1.0]).unwrap();
        let x = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        assert_eq!(filter_poly(&l0, &fb, &x).unwrap(), x);
    }

    #[test]
    fn filter_shape_errors() {
        let c = filled_triangle();
        let l0 = hodge_laplacian(&c, 0).unwrap();
        let fb = FilterBank::scalar(1, &[1.0]).unwrap();
        assert!(filter_poly(&l0, &fb, &DMatrix::zeros(3, 1)).is_err());
        let fb = FilterBank::zeros(0, 2, 2, 1).unwrap();
        assert!(filter_poly(&l0, &fb, &DMatrix::zeros(3, 1)).is_err());
        assert!(FilterBank::new(0, vec![]).is_err());
    }

    #[test]
    fn empty_level_filters_to_empty() {
        let c = build_complex(&Graph::new(3, [(0, 1)]).unwrap(), 2);
        let l2 = hodge_laplacian(&c, 2).unwrap();
        let fb = FilterBank::zeros(2, 3, 2, 4).unwrap();
        let y = filter_poly(&l2, &fb, &DMatrix::zeros(0, 2)).unwrap();
        assert_eq!(y.shape(), (0, 4));
    }

    #[test]
    fn normalized_spectrum_in_unit_interval() {
        let c = filled_triangle();
        let l0 = hodge_laplacian(&c, 0).unwrap().normalized();
        let es = eigensystem(&l0, None).unwrap();
        assert!(es
            .eigenvalues
            .iter()
            .all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn filter_bank_json() {
        let text = r#"{"k": 1, "P": 2, "theta": [[[1.0, 0.0]], [[0.5, -1.0]]]}"#;
        let fb: FilterBank = serde_json::from_str(text).unwrap();
        assert_eq!((fb.order(), fb.d_in(), fb.d_out()), (2, 1, 2));
        assert_eq!(fb.coeff(1, 0, 1), -1.0);
        let back: FilterBank = serde_json::from_str(&serde_json::to_string(&fb).unwrap()).unwrap();
        assert_eq!(back, fb);
        let bad = r#"{"k": 1, "P": 3, "theta": [[[1.0]]]}"#;
        assert!(serde_json::from_str::<FilterBank>(bad).is_err());
    }
}
