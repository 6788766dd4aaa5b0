//! Small dense and tridiagonal linear algebra: the symmetric tridiagonal
//! eigensolver, Thomas and cyclic tridiagonal solves, Cholesky, and
//! Householder least squares.

use crate::error::{invalid, HeatError, Result};

/// Iteration cap per eigenvalue for the implicit QL sweep.
pub const QL_MAX_ITERATIONS: usize = 50;

/// Eigen-decomposition of a real symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagonalEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Unit eigenvectors, vector `k` stored contiguously at `[k*n, (k+1)*n)`.
    pub vectors: Vec<f64>,
    pub n: usize,
}

impl TridiagonalEigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

/// Implicit-shift QL with Wilkinson shifts (the classical `tql2`/`tqli`
/// iteration) on the symmetric tridiagonal matrix with main diagonal
/// `diag` and off-diagonal `off` (`off.len() == diag.len() - 1`).
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<TridiagonalEigen> {
    let n = diag.len();
    if n == 0 {
        return Err(invalid("empty tridiagonal matrix"));
    }
    if off.len() + 1 != n {
        return Err(HeatError::LengthMismatch {
            expected: n - 1,
            found: off.len(),
        });
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    // column-major: column i is eigenvector i
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITERATIONS {
                return Err(HeatError::EigenNoConvergence {
                    index: l,
                    iterations: QL_MAX_ITERATIONS,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (left, right) = z.split_at_mut((i + 1) * n);
                let zi = &mut left[i * n..];
                let zi1 = &mut right[..n];
                for k in 0..n {
                    let f = zi1[k];
                    zi1[k] = s * zi[k] + c * f;
                    zi[k] = c * zi[k] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        vectors.extend_from_slice(&z[k * n..(k + 1) * n]);
    }
    Ok(TridiagonalEigen { values, vectors, n })
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(HeatError::LengthMismatch {
            expected: n,
            found: rhs.len().min(lower.len()).min(upper.len()),
        });
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(HeatError::SolverBreakdown("zero pivot at row 0".into()));
    }
    c[0] = upper[0] / denom;
    x[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(HeatError::SolverBreakdown(format!("zero pivot at row {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Periodic tridiagonal solve: like [`solve_tridiagonal`] but row 0 couples
/// to `x[n-1]` through `lower[0]` and row `n-1` to `x[0]` through
/// `upper[n-1]` (Sherman–Morrison correction of a Thomas solve).
pub fn solve_cyclic_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return Err(invalid("cyclic system needs at least 3 unknowns"));
    }
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &bb, upper, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let zz = solve_tridiagonal(lower, &bb, upper, &u)?;
    let denom = 1.0 + zz[0] + beta * zz[n - 1] / gamma;
    if denom == 0.0 {
        return Err(HeatError::SolverBreakdown(
            "singular cyclic correction".into(),
        ));
    }
    let fact = (x[0] + beta * x[n - 1] / gamma) / denom;
    Ok(x.iter().zip(&zz).map(|(xi, zi)| xi - fact * zi).collect())
}

/// Lower Cholesky factor of the row-major symmetric `n×n` matrix `a`.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(HeatError::LengthMismatch {
            expected: n * n,
            found: a.len(),
        });
    }
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(HeatError::CholeskyBreakdown {
                index: j,
                pivot: diag,
            });
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / ljj;
        }
    }
    Ok(l)
}

/// Solve `L Lᵀ x = b` given the lower factor from [`cholesky`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * y[k];
        }
        y[i] = v / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in i + 1..n {
            v -= l[k * n + i] * x[k];
        }
        x[i] = v / l[i * n + i];
    }
    x
}

/// Row-major matrix-vector product.
pub fn mat_vec(a: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|i| crate::numeric::dot(&a[i * cols..(i + 1) * cols], x))
        .collect()
}

/// Solution of the least-squares problem `min ‖A x − b‖₂` by Householder QR.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    pub residual_norm: f64,
}

/// Householder QR least squares for a row-major `rows×cols` matrix with
/// `rows ≥ cols` and full column rank.
pub fn least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Result<LeastSquares> {
    if rows < cols {
        return Err(invalid("least squares needs rows >= cols"));
    }
    if a.len() != rows * cols || b.len() != rows {
        return Err(HeatError::LengthMismatch {
            expected: rows * cols,
            found: a.len(),
        });
    }
    let mut r = a.to_vec();
    let mut qtb = b.to_vec();
    for k in 0..cols {
        let norm = (k..rows)
            .map(|i| r[i * cols + k].powi(2))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return Err(HeatError::SolverBreakdown(format!(
                "rank deficient column {k}"
            )));
        }
        let alpha = -norm.copysign(r[k * cols + k]);
        let mut v: Vec<f64> = (k..rows).map(|i| r[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..cols {
                let proj: f64 =
                    (k..rows).map(|i| v[i - k] * r[i * cols + j]).sum::<f64>() * 2.0 / vnorm2;
                for i in k..rows {
                    r[i * cols + j] -= proj * v[i - k];
                }
            }
            let proj: f64 = (k..rows).map(|i| v[i - k] * qtb[i]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..rows {
                qtb[i] -= proj * v[i - k];
            }
        }
    }
    let mut x = vec![0.0; cols];
    for i in (0..cols).rev() {
        let mut v = qtb[i];
        for j in i + 1..cols {
            v -= r[i * cols + j] * x[j];
        }
        let piv = r[i * cols + i];
        if piv == 0.0 {
            return Err(HeatError::SolverBreakdown(format!("zero R pivot {i}")));
        }
        x[i] = v / piv;
    }
    let residual_norm = crate::numeric::norm2(&qtb[cols..]);
    Ok(LeastSquares { x, residual_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_eigen_matches_closed_form_laplacian() {
        // tridiag(1, -2, 1) has eigenvalues -4 sin²(kπ / (2(n+1)))
        let n = 40;
        let eig = symmetric_tridiagonal_eigen(&vec![-2.0; n], &vec![1.0; n - 1]).unwrap();
        for (k, v) in eig.values.iter().enumerate() {
            let theta = (k + 1) as f64 * std::f64::consts::PI / (2.0 * (n + 1) as f64);
            assert!((v + 4.0 * theta.sin().powi(2)).abs() < 1e-12, "k={k}");
        }
        for i in 0..n {
            for j in 0..n {
                let g = crate::numeric::dot(eig.vector(i), eig.vector(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tridiagonal_eigen_rejects_bad_lengths() {
        assert!(symmetric_tridiagonal_eigen(&[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(symmetric_tridiagonal_eigen(&[], &[]).is_err());
        let one = symmetric_tridiagonal_eigen(&[3.0], &[]).unwrap();
        assert_eq!(one.values, vec![3.0]);
    }

    #[test]
    fn thomas_and_cyclic_solves() {
        let n = 7;
        let lower = vec![-1.0; n];
        let diag = vec![3.0; n];
        let upper = vec![-1.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += lower[i] * x_true[i - 1];
            }
            if i + 1 < n {
                rhs[i] += upper[i] * x_true[i + 1];
            }
        }
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-14);
        }
        rhs[0] += lower[0] * x_true[n - 1];
        rhs[n - 1] += upper[n - 1] * x_true[0];
        let x = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn cholesky_reports_offending_pivot() {
        let a = [4.0, 2.0, 2.0, 1.0];
        match cholesky(&a, 2) {
            Err(HeatError::CholeskyBreakdown { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
        let a = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&a, 2).unwrap();
        let x = cholesky_solve(&l, 2, &[2.0, 1.0]);
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_line_fit() {
        // fit y = 1 + 2t on noisy-free data plus an off-line point
        let ts = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 8.0];
        let a: Vec<f64> = ts.iter().flat_map(|&t| [1.0, t]).collect();
        let ls = least_squares(&a, 4, 2, &ys).unwrap();
        // normal equations: [4 6; 6 14] x = [17, 37]
        let det = 4.0 * 14.0 - 36.0;
        let x0 = (14.0 * 17.0 - 6.0 * 37.0) / det;
        let x1 = (4.0 * 37.0 - 6.0 * 17.0) / det;
        assert!((ls.x[0] - x0).abs() < 1e-12 && (ls.x[1] - x1).abs() < 1e-12);
        let res: f64 = ts
            .iter()
            .zip(ys)
            .map(|(t, y)| (x0 + x1 * t - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((ls.residual_norm - res).abs() < 1e-12);
    }
}
