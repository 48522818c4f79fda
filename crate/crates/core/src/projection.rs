//! Simplicial projection operators and the multi-simplicial interaction layer.
//!
//! `project_down(k)` is `|∂_k|` and maps k-signals to (k-1)-signals;
//! `project_up(k)` is its transpose. Longer hops are ordered products of the
//! single-step operators; entries then count incidence paths and are not
//! renormalized.

use nalgebra::DMatrix;

use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Sparse map from `from_dim`-signals to `to_dim`-signals.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    pub from_dim: usize,
    pub to_dim: usize,
    pub matrix: SparseMatrix,
}

impl ProjectionOperator {
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.matrix.spmm(x)
    }

    pub fn transpose(&self) -> Self {
        Self {
            from_dim: self.to_dim,
            to_dim: self.from_dim,
            matrix: self.matrix.transpose(),
        }
    }
}

pub fn project_down(c: &SimplicialComplex, k: usize) -> Result<ProjectionOperator> {
    let b = c.boundary_operator(k)?;
    Ok(ProjectionOperator {
        from_dim: k,
        to_dim: k - 1,
        matrix: b.abs_entries(),
    })
}

pub fn project_up(c: &SimplicialComplex, k: usize) -> Result<ProjectionOperator> {
    Ok(project_down(c, k)?.transpose())
}

/// Composite projection between any two distinct dimensions.
///
/// Downward: `T↓_{to+1} ⋯ T↓_{from}`. Upward: `T↑_{to} ⋯ T↑_{from+1}`.
pub fn project_chain(
    c: &SimplicialComplex,
    from_dim: usize,
    to_dim: usize,
) -> Result<ProjectionOperator> {
    if from_dim == to_dim {
        return Err(Error::shape(format!(
            "projection needs distinct dimensions, got {from_dim} -> {to_dim}"
        )));
    }
    c.check_dim(from_dim, 0)?;
    c.check_dim(to_dim, 0)?;
    let matrix = if from_dim > to_dim {
        let mut m = project_down(c, to_dim + 1)?.matrix;
        for k in to_dim + 2..=from_dim {
            m = m.spgemm(&project_down(c, k)?.matrix)?;
        }
        m
    } else {
        let mut m = project_up(c, to_dim)?.matrix;
        for k in (from_dim + 1..to_dim).rev() {
            m = m.spgemm(&project_up(c, k)?.matrix)?;
        }
        m
    };
    Ok(ProjectionOperator {
        from_dim,
        to_dim,
        matrix,
    })
}

/// The two directions between a lower dimension `k1` and a higher `k2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    /// `k2 -> k1`
    pub down: ProjectionOperator,
    /// `k1 -> k2`
    pub up: ProjectionOperator,
}

impl ProjectionPair {
    pub fn between(c: &SimplicialComplex, k1: usize, k2: usize) -> Result<Self> {
        if k1 >= k2 {
            return Err(Error::shape(format!("expected k1 < k2, got {k1}, {k2}")));
        }
        Ok(Self {
            down: project_chain(c, k2, k1)?,
            up: project_chain(c, k1, k2)?,
        })
    }

    pub fn low_dim(&self) -> usize {
        self.down.to_dim
    }

    pub fn high_dim(&self) -> usize {
        self.up.to_dim
    }
}

/// Weights of one MSI branch: `ReLU((x ‖ T x_other) W') W`.
#[derive(Debug, Clone, PartialEq)]
pub struct MsiBranch {
    /// `2d × d`
    pub w_prime: DMatrix<f64>,
    /// `d × d`
    pub w: DMatrix<f64>,
}

impl MsiBranch {
    /// `W' = [I; 0]`, `W = I`: the branch reduces to `ReLU(x)`.
    pub fn pass_through(d: usize) -> Self {
        let mut w_prime = DMatrix::zeros(2 * d, d);
        w_prime.view_mut((0, 0), (d, d)).fill_with_identity();
        Self {
            w_prime,
            w: DMatrix::identity(d, d),
        }
    }

    pub fn width(&self) -> usize {
        self.w.nrows()
    }

    fn check(&self, d: usize) -> Result<()> {
        if self.w_prime.shape() != (2 * d, d) || self.w.shape() != (d, d) {
            return Err(Error::shape(format!(
                "MSI weights {:?}/{:?} do not fit feature width {d}",
                self.w_prime.shape(),
                self.w.shape()
            )));
        }
        Ok(())
    }

    fn forward(&self, own: &DMatrix<f64>, projected: &DMatrix<f64>) -> DMatrix<f64> {
        let d = own.ncols();
        let mut cat = DMatrix::zeros(own.nrows(), 2 * d);
        cat.columns_mut(0, d).copy_from(own);
        cat.columns_mut(d, d).copy_from(projected);
        let hidden = (cat * &self.w_prime).map(relu);
        hidden * &self.w
    }
}

/// MSI weights for the lower (`k1`) and higher (`k2`) dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MsiWeights {
    pub low: MsiBranch,
    pub high: MsiBranch,
}

impl MsiWeights {
    pub fn pass_through(d: usize) -> Self {
        Self {
            low: MsiBranch::pass_through(d),
            high: MsiBranch::pass_through(d),
        }
    }
}

pub(crate) fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Fuses the two signals; each side is concatenated as (own, projected other).
pub fn msi_forward(
    x_low: &DMatrix<f64>,
    x_high: &DMatrix<f64>,
    ops: &ProjectionPair,
    w: &MsiWeights,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = x_low.ncols();
    if x_high.ncols() != d {
        return Err(Error::shape(format!(
            "MSI signals have widths {d} and {}",
            x_high.ncols()
        )));
    }
    w.low.check(d)?;
    w.high.check(d)?;
    if ops.down.matrix.shape() != (x_low.nrows(), x_high.nrows()) {
        return Err(Error::shape(format!(
            "signals with {} and {} rows do not fit a {:?} projection",
            x_low.nrows(),
            x_high.nrows(),
            ops.down.matrix.shape()
        )));
    }
    let to_low = ops.down.apply(x_high)?;
    let to_high = ops.up.apply(x_low)?;
    Ok((
        w.low.forward(x_low, &to_low),
        w.high.forward(x_high, &to_high),
    ))
}
