mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use simplex_core::spectral::{laguerre_terms, DENSE_EIGEN_CAP};
use simplex_core::{
    build_complex, eigensystem, filter_exact, filter_poly, hodge_laplacian, hop_neighborhood,
    laguerre_eval, FilterBank, Graph, HodgeLaplacian, SparseMatrix,
};
use simplex_oracle::eigen::jacobi_eigen;
use simplex_oracle::topology::{bfs_ball, naive_matmul};

fn random_bank(
    r: &mut rand_chacha::ChaCha8Rng,
    k: usize,
    order: usize,
    d_in: usize,
    d_out: usize,
) -> FilterBank {
    FilterBank::new(
        k,
        (0..order).map(|_| random_matrix(r, d_in, d_out)).collect(),
    )
    .unwrap()
}

/// Dense `Σ_p T_p(L) X θ_p` with the matrix recurrence.
fn dense_poly(l: &DMatrix<f64>, fb: &FilterBank, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut out = DMatrix::zeros(n, fb.d_out());
    let (mut prev, mut cur) = (DMatrix::zeros(n, n), id.clone());
    for p in 0..fb.order() {
        out += naive_matmul(&naive_matmul(&cur, x), &fb.theta()[p]);
        let next = if p == 0 {
            &id - l
        } else {
            let a = (2 * p + 1) as f64;
            ((&id * a - l) * &cur - &prev * p as f64) / (p + 1) as f64
        };
        prev = cur;
        cur = next;
    }
    out
}

#[test]
fn known_spectra() {
    let tri = build_complex(&Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap(), 1);
    let es = eigensystem(&hodge_laplacian(&tri, 0).unwrap(), None).unwrap();
    for (v, e) in es.eigenvalues.iter().zip([0.0, 3.0, 3.0]) {
        assert!((v - e).abs() <= 1e-8, "{v} vs {e}");
    }
    let l1 = hodge_laplacian(&filled_triangle(), 1).unwrap();
    assert_eq!(l1.matrix().to_dense(), DMatrix::identity(3, 3) * 3.0);
    let (vals, _) = jacobi_eigen(&l1.matrix().to_dense());
    let es = eigensystem(&l1, None).unwrap();
    for (a, b) in es.eigenvalues.iter().zip(&vals) {
        assert!((a - 3.0).abs() <= 1e-8 && (b - 3.0).abs() <= 1e-8);
    }
}

#[test]
fn eigensystem_agrees_with_jacobi() {
    let mut r = rng(5);
    for _ in 0..40 {
        let c = random_complex(&mut r, 14, 0.5, 2);
        for k in 0..=c.max_dim() {
            if c.count(k) == 0 {
                continue;
            }
            let l = hodge_laplacian(&c, k).unwrap();
            let dense = l.matrix().to_dense();
            let es = eigensystem(&l, None).unwrap();
            let (vals, _) = jacobi_eigen(&dense);
            for (a, b) in es.eigenvalues.iter().zip(&vals) {
                assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            }
            let v = &es.eigenvectors;
            let residual = &dense * v - v * DMatrix::from_diagonal(&es.eigenvalues.clone().into());
            assert!(max_abs(&residual) <= 1e-9);
            assert!(
                max_abs(&(v.transpose() * v - DMatrix::identity(v.ncols(), v.ncols()))) <= 1e-9
            );
            for j in 0..v.ncols() {
                let first = v
                    .column(j)
                    .iter()
                    .copied()
                    .find(|x| x.abs() > 1e-10)
                    .unwrap();
                assert!(first > 0.0);
            }
        }
    }
}

#[test]
fn partial_eigensystem_and_errors() {
    let c = random_complex(&mut rng(9), 12, 0.5, 1);
    let l = hodge_laplacian(&c, 0).unwrap();
    let es = eigensystem(&l, Some(2)).unwrap();
    assert_eq!(es.eigenvalues.len(), 2.min(l.dim()));
    assert!(l.dim() <= 2 || !es.is_complete());
    if !es.is_complete() {
        assert!(filter_exact(&es, |x| x, &DMatrix::zeros(l.dim(), 1)).is_err());
    }
    let empty = HodgeLaplacian::new(0, SparseMatrix::zeros(0, 0)).unwrap();
    assert!(eigensystem(&empty, None).is_err());
    let big = HodgeLaplacian::new(0, SparseMatrix::identity(DENSE_EIGEN_CAP + 1)).unwrap();
    assert!(eigensystem(&big, None).is_err());
}

#[test]
fn laguerre_values() {
    let t = laguerre_eval(4, &[0.0, 1.0, 2.0]);
    // L_p(0) = 1, L_2(x) = (x^2 - 4x + 2)/2, L_3(x) = (-x^3 + 9x^2 - 18x + 6)/6
    let l2 = |x: f64| (x * x - 4.0 * x + 2.0) / 2.0;
    let l3 = |x: f64| (-x * x * x + 9.0 * x * x - 18.0 * x + 6.0) / 6.0;
    for (j, x) in [0.0, 1.0, 2.0].into_iter().enumerate() {
        assert_eq!(t[(0, j)], 1.0);
        assert!((t[(1, j)] - (1.0 - x)).abs() < 1e-15);
        assert!((t[(2, j)] - l2(x)).abs() < 1e-14);
        assert!((t[(3, j)] - l3(x)).abs() < 1e-14);
    }
}

#[test]
fn polynomial_matches_spectral_filter() {
    let mut r = rng(21);
    let mut done = 0;
    while done < 50 {
        let c = random_complex(&mut r, 15, 0.4, 2);
        let k = r.random_range(0..=c.max_dim());
        let n = c.count(k);
        if n == 0 || n > 50 {
            continue;
        }
        let order = r.random_range(1..=6);
        let (d_in, d_out) = (r.random_range(1..=3), r.random_range(1..=3));
        let fb = random_bank(&mut r, k, order, d_in, d_out);
        let x = random_matrix(&mut r, n, d_in);
        let l = hodge_laplacian(&c, k).unwrap();
        let poly = filter_poly(&l, &fb, &x).unwrap();
        let es = eigensystem(&l, None).unwrap();
        let mut exact = DMatrix::zeros(n, d_out);
        for o in 0..d_out {
            for i in 0..d_in {
                let xi = x.columns(i, 1).into_owned();
                let yi = filter_exact(&es, |lam| fb.response(i, o, lam), &xi).unwrap();
                let mut col = exact.column_mut(o);
                col += yi.column(0);
            }
        }
        assert!(
            max_abs(&(&poly - &exact)) <= 1e-8,
            "{}",
            max_abs(&(&poly - &exact))
        );
        assert!(max_abs(&(&poly - dense_poly(&l.matrix().to_dense(), &fb, &x))) <= 1e-8);
        done += 1;
    }
}

#[test]
fn filtered_delta_stays_local() {
    let mut r = rng(33);
    for _ in 0..100 {
        let c = random_complex(&mut r, 12, 0.4, 2);
        for k in 0..=c.max_dim() {
            let n = c.count(k);
            if n == 0 {
                continue;
            }
            let l = hodge_laplacian(&c, k).unwrap();
            let dense = l.matrix().to_dense();
            let seed = r.random_range(0..n);
            let mut x = DMatrix::zeros(n, 1);
            x[(seed, 0)] = 1.0;
            for order in 1..=4 {
                let coeffs: Vec<f64> = (0..order).map(|_| r.random_range(-1.0..1.0)).collect();
                let y = filter_poly(&l, &FilterBank::scalar(k, &coeffs).unwrap(), &x).unwrap();
                let ball = bfs_ball(&dense, seed, order - 1);
                assert_eq!(ball, hop_neighborhood(&c, k, seed, order - 1).unwrap());
                for i in (0..n).filter(|i| !ball.contains(i)) {
                    assert_eq!(y[(i, 0)], 0.0);
                }
            }
        }
    }
}

#[test]
fn filter_is_linear_in_theta_and_signal() {
    let mut r = rng(44);
    for _ in 0..50 {
        let c = random_complex(&mut r, 12, 0.4, 2);
        let k = r.random_range(0..=c.max_dim());
        let n = c.count(k);
        if n == 0 {
            continue;
        }
        let l = hodge_laplacian(&c, k).unwrap();
        let order = r.random_range(1..=6);
        let (a, b) = (
            random_bank(&mut r, k, order, 2, 3),
            random_bank(&mut r, k, order, 2, 3),
        );
        let (xa, xb) = (random_matrix(&mut r, n, 2), random_matrix(&mut r, n, 2));
        let lhs = filter_poly(&l, &a.add(&b).unwrap(), &xa).unwrap();
        let rhs = filter_poly(&l, &a, &xa).unwrap() + filter_poly(&l, &b, &xa).unwrap();
        assert!(max_abs(&(lhs - rhs)) <= 1e-10);
        let lhs = filter_poly(&l, &a, &(&xa + &xb)).unwrap();
        let rhs = filter_poly(&l, &a, &xa).unwrap() + filter_poly(&l, &a, &xb).unwrap();
        assert!(max_abs(&(lhs - rhs)) <= 1e-10);

        // The derivative in θ_p[i][o] is column i of T_p(L) x placed in output o.
        let terms = laguerre_terms(&l, &xa, order).unwrap();
        let p = r.random_range(0..order);
        let mut unit = FilterBank::zeros(k, order, 2, 3).unwrap();
        let mut theta = unit.theta().to_vec();
        theta[p][(1, 2)] = 1.0;
        unit = FilterBank::new(k, theta).unwrap();
        let y = filter_poly(&l, &unit, &xa).unwrap();
        for i in 0..n {
            assert_eq!(y[(i, 2)], terms[p][(i, 1)]);
            assert_eq!(y[(i, 0)], 0.0);
        }
    }
}

#[test]
fn filter_bank_json_round_trip_and_shape_errors() {
    let fb = random_bank(&mut rng(3), 1, 3, 2, 2);
    let text = simplex_core::io::to_json_string(&fb).unwrap();
    let back: FilterBank = simplex_core::io::from_json_str(&text).unwrap();
    assert_eq!(back, fb);
    let bad = r#"{"k":0,"P":2,"theta":[[[1.0]]]}"#;
    assert!(simplex_core::io::from_json_str::<FilterBank>(bad).is_err());
    let l = hodge_laplacian(&filled_triangle(), 0).unwrap();
    assert!(filter_poly(&l, &fb, &DMatrix::zeros(3, 3)).is_err());
}
