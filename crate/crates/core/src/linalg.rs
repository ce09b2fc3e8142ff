//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::domain::C64;

/// `G_ij = Σ_ν w_ν conj(a_i(ν)) a_j(ν)`.
pub fn gram(cols: &[&[C64]], weights: &[f64]) -> DMatrix<C64> {
    let n = cols.len();
    let mut g = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: C64 = cols[i]
                .iter()
                .zip(cols[j])
                .zip(weights)
                .map(|((a, b), w)| a.conj() * b * *w)
                .sum();
            g[(i, j)] = s;
            g[(j, i)] = s.conj();
        }
    }
    g
}

/// `Σ_j c_j a_j`.
pub fn combine(cols: &[&[C64]], coeffs: &[C64], len: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); len];
    for (col, &c) in cols.iter().zip(coeffs) {
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        for (o, a) in out.iter_mut().zip(col.iter()) {
            *o += c * a;
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    // Symmetrize to remove rounding asymmetry before the Hermitian solver.
    let sym = DMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Minimum-norm solution of `min_c Σ w_ν |y_ν − (Bc)_ν|²`.
pub struct LeastSquares {
    pub coeffs: Vec<C64>,
    pub rank: usize,
}

impl LeastSquares {
    pub fn degenerate(&self) -> bool {
        self.rank < self.coeffs.len()
    }
}

pub fn weighted_least_squares(cols: &[&[C64]], target: &[C64], weights: &[f64]) -> LeastSquares {
    let n = cols.len();
    let m = target.len();
    if n == 0 {
        return LeastSquares {
            coeffs: Vec::new(),
            rank: 0,
        };
    }
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let a = DMatrix::<C64>::from_fn(m, n, |i, j| cols[j][i] * sw[i]);
    let b = DVector::<C64>::from_fn(m, |i, _| target[i] * sw[i]);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = smax * 1e-12 * (m.max(n) as f64);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let coeffs = if smax == 0.0 {
        vec![C64::new(0.0, 0.0); n]
    } else {
        let u = svd.u.as_ref().expect("u requested");
        let vt = svd.v_t.as_ref().expect("v_t requested");
        let utb = u.adjoint() * &b;
        let mut x = DVector::<C64>::zeros(n);
        for k in 0..svd.singular_values.len() {
            let s = svd.singular_values[k];
            if s > cutoff {
                let coef = utb[k] / s;
                for j in 0..n {
                    x[j] += vt[(k, j)].conj() * coef;
                }
            }
        }
        x.iter().copied().collect()
    };
    LeastSquares { coeffs, rank }
}

/// Solve a small Hermitian positive semidefinite system, falling back to a
/// pseudo-inverse when Cholesky fails.
pub fn solve_hermitian(a: &DMatrix<C64>, b: &[C64]) -> Vec<C64> {
    let rhs = DVector::from_column_slice(b);
    if let Some(ch) = a.clone().cholesky() {
        return ch.solve(&rhs).iter().copied().collect();
    }
    let (vals, vecs) = hermitian_eigen(a);
    let vmax = vals.iter().cloned().fold(0.0, f64::max);
    let cutoff = vmax * 1e-13 * a.nrows() as f64;
    let proj = vecs.adjoint() * &rhs;
    let mut x = DVector::<C64>::zeros(a.nrows());
    for (k, &lam) in vals.iter().enumerate() {
        if lam > cutoff {
            x += vecs.column(k) * (proj[k] / lam);
        }
    }
    x.iter().copied().collect()
}

/// Real symmetric solve with Cholesky, falling back to an eigen pseudo-inverse.
pub fn solve_symmetric_real(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = a.clone().cholesky() {
        return ch.solve(b);
    }
    let eig = a.clone().symmetric_eigen();
    let vmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cutoff = vmax * 1e-13 * a.nrows() as f64;
    let proj = eig.eigenvectors.transpose() * b;
    let mut x = DVector::<f64>::zeros(a.nrows());
    for k in 0..a.nrows() {
        let lam = eig.eigenvalues[k];
        if lam > cutoff {
            x += eig.eigenvectors.column(k) * (proj[k] / lam);
        }
    }
    x
}

/// Extreme generalized eigenvalues of the pencil `(B, A)`, i.e. extremes of
/// `c^H B c / c^H A c`, for Hermitian `A` positive definite and `B`
/// positive semidefinite. Returns `(λ_min, v_min, λ_max, v_max)` with the
/// vectors in the original coordinates. `None` if `A` is not positive definite.
pub fn generalized_extremes(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Option<(f64, Vec<C64>, f64, Vec<C64>)> {
    let (avals, avecs) = hermitian_eigen(a);
    let amax = avals.last().copied().unwrap_or(0.0);
    if avals.first().copied().unwrap_or(0.0) <= amax * 1e-13 || amax <= 0.0 {
        return None;
    }
    let n = a.nrows();
    // W = A^{-1/2}
    let inv_sqrt = DMatrix::<C64>::from_diagonal(&DVector::from_iterator(
        n,
        avals.iter().map(|&l| C64::new(1.0 / l.sqrt(), 0.0)),
    ));
    let w = &avecs * inv_sqrt * avecs.adjoint();
    let reduced = &w * b * &w;
    let (vals, vecs) = hermitian_eigen(&reduced);
    let back = |k: usize| -> Vec<C64> { (&w * vecs.column(k)).iter().copied().collect() };
    Some((vals[0], back(0), vals[n - 1], back(n - 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn least_squares_closed_form() {
        let col = [c(1.0, 0.0), c(1.0, 0.0)];
        let ls = weighted_least_squares(&[&col], &[c(1.0, 0.0), c(0.0, 0.0)], &[0.5, 0.5]);
        assert!((ls.coeffs[0] - c(0.5, 0.0)).norm() < 1e-14);
        assert!(!ls.degenerate());
    }

    #[test]
    fn least_squares_min_norm_on_duplicate_columns() {
        let col = [c(1.0, 0.0), c(0.0, 1.0)];
        let ls = weighted_least_squares(&[&col, &col], &col, &[1.0, 1.0]);
        assert_eq!(ls.rank, 1);
        assert!(ls.degenerate());
        assert!((ls.coeffs[0] - c(0.5, 0.0)).norm() < 1e-12);
        assert!((ls.coeffs[1] - c(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn generalized_eigen_on_diagonal_pencil() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(3.0, 0.0)]));
        let (lo, _, hi, vhi) = generalized_extremes(&a, &b).unwrap();
        assert!((lo - 0.5).abs() < 1e-14);
        assert!((hi - 3.0).abs() < 1e-14);
        assert!(vhi[0].norm() < 1e-12);
    }
}
