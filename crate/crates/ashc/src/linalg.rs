//! Self-contained dense linear algebra for small symmetric matrices.
//!
//! Everything here targets the certificate matrices of the toolkit
//! (order <= 8): a cyclic Jacobi eigensolver with threshold sweeps,
//! weighted norms, definiteness queries, and symmetric square roots.
//! No external numerical dependencies.

use std::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Default absolute tolerance for order-4 certificate matrices.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Sweep cap for the cyclic Jacobi iteration.
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "expected {rows}x{cols} = {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Dimension("empty matrix".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    /// Single-column matrix from a vector.
    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, vector has length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "shape {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Solve `self * X = rhs` by Gaussian elimination with partial pivoting.
    /// Intended for the small square systems of this crate.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::Dimension("solve requires a square matrix".into()));
        }
        if rhs.rows != self.rows {
            return Err(Error::Dimension(format!(
                "rhs has {} rows, expected {}",
                rhs.rows, self.rows
            )));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for col in 0..n {
            let (pivot_row, pivot) = (col..n)
                .map(|r| (r, a[(r, col)].abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            if pivot <= f64::EPSILON * self.max_abs().max(1.0) {
                return Err(Error::Certificate("singular matrix in solve".into()));
            }
            if pivot_row != col {
                for j in 0..n {
                    a.data.swap(pivot_row * n + j, col * n + j);
                }
                for j in 0..b.cols {
                    b.data.swap(pivot_row * b.cols + j, col * b.cols + j);
                }
            }
            let d = a[(col, col)];
            for r in (col + 1)..n {
                let factor = a[(r, col)] / d;
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    a[(r, j)] -= factor * a[(col, j)];
                }
                for j in 0..b.cols {
                    b[(r, j)] -= factor * b[(col, j)];
                }
            }
        }
        for col in (0..n).rev() {
            for j in 0..b.cols {
                let mut acc = b[(col, j)];
                for k in (col + 1)..n {
                    acc -= a[(col, k)] * b[(k, j)];
                }
                b[(col, j)] = acc / a[(col, col)];
            }
        }
        Ok(b)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric matrix; the constructor symmetrises its input by averaging
/// mirrored entries, so `entries[i][j] == entries[j][i]` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Build from row-major entries, averaging `(i, j)` with `(j, i)`.
    pub fn new(order: usize, entries: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::Dimension("order must be >= 1".into()));
        }
        if entries.len() != order * order {
            return Err(Error::Dimension(format!(
                "expected {} entries for order {order}, got {}",
                order * order,
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                field: "SymMatrix entries".into(),
                location: "constructor".into(),
            });
        }
        let mut data = entries;
        for i in 0..order {
            for j in (i + 1)..order {
                let avg = 0.5 * (data[i * order + j] + data[j * order + i]);
                data[i * order + j] = avg;
                data[j * order + i] = avg;
            }
        }
        Ok(Self { order, data })
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Dimension("matrix is not square".into()));
        }
        Self::new(m.rows(), m.data().to_vec())
    }

    pub fn identity(order: usize) -> Self {
        Self::from_matrix(&Matrix::identity(order)).unwrap()
    }

    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            data: vec![0.0; order * order],
        }
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        let mut m = Self::zeros(n);
        if n == 0 {
            return Err(Error::Dimension("order must be >= 1".into()));
        }
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    pub fn as_matrix(&self) -> Matrix {
        Matrix {
            rows: self.order,
            cols: self.order,
            data: self.data.clone(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.order + j]
    }
}

/// Outcome of a symmetric eigenvalue computation.
#[derive(Debug, Clone)]
pub struct EigenReport {
    /// Eigenvalues in ascending order; count equals the matrix order.
    pub eigenvalues: Vec<f64>,
    /// Largest off-diagonal magnitude left after the final sweep.
    pub max_offdiag_residual: f64,
    /// Tolerance the iteration converged to.
    pub tol: f64,
}

/// Full eigendecomposition `S = V diag(values) V^T`; eigenvector `i` is
/// column `i` of `vectors`, values ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: Matrix,
    pub max_offdiag_residual: f64,
    pub tol: f64,
}

/// Cyclic Jacobi with threshold sweeps. The first sweeps skip rotations
/// below a fraction of the total off-diagonal mass; later sweeps rotate
/// every nonzero pair. Converges when the largest off-diagonal magnitude
/// drops to `tol` (absolute).
fn jacobi(s: &SymMatrix, tol: f64) -> Result<EigenDecomp> {
    if tol <= 0.0 {
        return Err(Error::Argument("tolerance must be positive".into()));
    }
    let n = s.order();
    let mut a = s.as_matrix();
    let mut v = Matrix::identity(n);

    let max_offdiag = |a: &Matrix| -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                m = m.max(a[(i, j)].abs());
            }
        }
        m
    };

    let mut residual = max_offdiag(&a);
    for sweep in 0..MAX_JACOBI_SWEEPS {
        if residual <= tol {
            let (values, vectors) = sort_eigenpairs(&a, &v);
            return Ok(EigenDecomp {
                values,
                vectors,
                max_offdiag_residual: residual,
                tol,
            });
        }
        let off_sum: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += a[(i, j)].abs();
                }
            }
            s
        };
        let threshold = if sweep < 3 {
            0.2 * off_sum / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= threshold || apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                // tan of the rotation angle; the guarded form avoids
                // overflow in theta^2 for nearly diagonal pairs
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                let tau = sn / (1.0 + c);
                let h = t * apq;
                a[(p, p)] -= h;
                a[(q, q)] += h;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        a[(r, p)] = arp - sn * (arq + tau * arp);
                        a[(r, q)] = arq + sn * (arp - tau * arq);
                        a[(p, r)] = a[(r, p)];
                        a[(q, r)] = a[(r, q)];
                    }
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp - sn * (vrq + tau * vrp);
                    v[(r, q)] = vrq + sn * (vrp - tau * vrq);
                }
            }
        }
        residual = max_offdiag(&a);
    }
    if residual <= tol {
        let (values, vectors) = sort_eigenpairs(&a, &v);
        return Ok(EigenDecomp {
            values,
            vectors,
            max_offdiag_residual: residual,
            tol,
        });
    }
    Err(Error::NonConvergence {
        sweeps: MAX_JACOBI_SWEEPS,
        residual,
        tol,
    })
}

fn sort_eigenpairs(a: &Matrix, v: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values: Vec<f64> = idx.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in idx.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new_col)] = v[(r, old_col)];
        }
    }
    (values, vectors)
}

/// Eigenvalues of a symmetric matrix, ascending, to absolute tolerance
/// `tol` on the off-diagonal residual.
pub fn sym_eigenvalues(s: &SymMatrix, tol: f64) -> Result<EigenReport> {
    let d = jacobi(s, tol)?;
    Ok(EigenReport {
        eigenvalues: d.values,
        max_offdiag_residual: d.max_offdiag_residual,
        tol: d.tol,
    })
}

/// Full symmetric eigendecomposition (eigenvalues ascending, eigenvectors
/// as columns).
pub fn sym_eigen(s: &SymMatrix, tol: f64) -> Result<EigenDecomp> {
    jacobi(s, tol)
}

/// `true` iff the largest eigenvalue of `s` is at most `tol`.
pub fn is_negative_semidefinite(s: &SymMatrix, tol: f64) -> Result<bool> {
    if tol < 0.0 {
        return Err(Error::Argument("tolerance must be nonnegative".into()));
    }
    let eig_tol = (tol * 1e-2).max(DEFAULT_TOL).max(s.max_abs() * 1e-14);
    let report = sym_eigenvalues(s, eig_tol)?;
    Ok(*report.eigenvalues.last().unwrap() <= tol)
}

/// `true` iff the smallest eigenvalue of `s` exceeds `tol`. A Cholesky
/// factorisation of `s - tol*I` serves as a fast accept; the eigenvalue
/// route decides the rest, keeping one code path with the semidefinite
/// queries.
pub fn is_positive_definite(s: &SymMatrix, tol: f64) -> Result<bool> {
    let n = s.order();
    let mut shifted = s.as_matrix();
    for i in 0..n {
        shifted[(i, i)] -= tol;
    }
    if cholesky_succeeds(&shifted) {
        return Ok(true);
    }
    let eig_tol = DEFAULT_TOL.max(s.max_abs() * 1e-14);
    let report = sym_eigenvalues(s, eig_tol)?;
    Ok(report.eigenvalues[0] > tol)
}

fn cholesky_succeeds(a: &Matrix) -> bool {
    let n = a.rows();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return false;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    true
}

/// Weighted squared norm `x^T M x`.
pub fn weighted_norm_sq(x: &[f64], m: &SymMatrix) -> Result<f64> {
    if x.len() != m.order() {
        return Err(Error::Dimension(format!(
            "vector length {} vs matrix order {}",
            x.len(),
            m.order()
        )));
    }
    let n = m.order();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for (j, xj) in x.iter().enumerate() {
            row += m.get(i, j) * xj;
        }
        acc += x[i] * row;
    }
    // lazy positive-semidefiniteness probe: the form itself must not go
    // negative beyond roundoff at any evaluated point
    debug_assert!(
        acc >= -1e-9 * x.iter().map(|v| v * v).sum::<f64>().max(1.0) * m.max_abs().max(1.0),
        "weighted_norm_sq evaluated a non-PSD weight"
    );
    Ok(acc)
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Symmetric square root of a positive definite matrix via its
/// eigendecomposition. The product `factor^T * factor` reproduces the
/// input to within `10 * tol` entrywise.
pub fn sqrt_factor(m: &SymMatrix, tol: f64) -> Result<Matrix> {
    let d = jacobi(m, tol)?;
    if d.values[0] <= tol {
        return Err(Error::Certificate(format!(
            "matrix is not positive definite within {tol:.3e} (min eigenvalue {:.6e})",
            d.values[0]
        )));
    }
    let n = m.order();
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        let s = d.values[k].sqrt();
        for i in 0..n {
            let vik = d.vectors[(i, k)];
            if vik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += s * vik * d.vectors[(j, k)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: determinant of `s - lambda*I` by cofactor
    /// expansion, roots located by sign-change bisection inside the
    /// Gershgorin interval. No shared code with the Jacobi path.
    fn charpoly_roots(s: &SymMatrix, scan_points: usize) -> Vec<f64> {
        fn det(a: &[Vec<f64>]) -> f64 {
            let n = a.len();
            if n == 1 {
                return a[0][0];
            }
            let mut acc = 0.0;
            for (j, lead) in a[0].iter().enumerate() {
                if *lead == 0.0 {
                    continue;
                }
                let minor: Vec<Vec<f64>> = a[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                acc += if j % 2 == 0 { 1.0 } else { -1.0 } * lead * det(&minor);
            }
            acc
        }
        let n = s.order();
        let p = |lambda: f64| -> f64 {
            let a: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| s.get(i, j) - if i == j { lambda } else { 0.0 })
                        .collect()
                })
                .collect();
            det(&a)
        };
        // Gershgorin bounds
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| s.get(i, j).abs())
                .sum();
            lo = lo.min(s.get(i, i) - r);
            hi = hi.max(s.get(i, i) + r);
        }
        lo -= 1e-6;
        hi += 1e-6;
        let mut roots = Vec::new();
        let mut prev_x = lo;
        let mut prev_f = p(lo);
        for k in 1..=scan_points {
            let x = lo + (hi - lo) * k as f64 / scan_points as f64;
            let fx = p(x);
            if prev_f == 0.0 {
                roots.push(prev_x);
            } else if prev_f.signum() != fx.signum() && fx != 0.0 {
                let (mut a, mut b, mut fa) = (prev_x, x, prev_f);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    let fm = p(mid);
                    if fm == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if fa.signum() == fm.signum() {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            prev_x = x;
            prev_f = fx;
        }
        roots
    }

    fn cuk_m() -> SymMatrix {
        SymMatrix::new(
            4,
            vec![
                0.4804, 0.0102, 0.0002, -0.0093, //
                0.0102, 0.5304, 0.0081, 0.0001, //
                0.0002, 0.0081, 0.4824, -0.0135, //
                -0.0093, 0.0001, -0.0135, 0.5304,
            ],
        )
        .unwrap()
    }

    #[test]
    fn eigenvalues_of_identity() {
        let r = sym_eigenvalues(&SymMatrix::identity(4), 1e-12).unwrap();
        assert_eq!(r.eigenvalues.len(), 4);
        for v in &r.eigenvalues {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let s = SymMatrix::diagonal(&[-3.0, 2.0]).unwrap();
        let r = sym_eigenvalues(&s, 1e-12).unwrap();
        assert!((r.eigenvalues[0] + 3.0).abs() < 1e-12);
        assert!((r.eigenvalues[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn certificate_matrix_is_positive_definite() {
        let m = cuk_m();
        let r = sym_eigenvalues(&m, 1e-12).unwrap();
        assert!(r.eigenvalues.iter().all(|&v| v > 0.0));
        // cross-check against the characteristic-polynomial oracle
        let oracle = charpoly_roots(&m, 4000);
        assert_eq!(oracle.len(), 4);
        for (a, b) in r.eigenvalues.iter().zip(&oracle) {
            assert!(
                (a - b).abs() < 1e-8,
                "jacobi {a} vs charpoly {b}"
            );
        }
    }

    #[test]
    fn eigenvalues_sorted_ascending() {
        let m = cuk_m();
        let r = sym_eigenvalues(&m, 1e-12).unwrap();
        assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.max_offdiag_residual <= r.tol);
    }

    #[test]
    fn nsd_zero_and_identity() {
        assert!(is_negative_semidefinite(&SymMatrix::zeros(3), 0.0).unwrap());
        assert!(!is_negative_semidefinite(&SymMatrix::identity(3), 1e-9).unwrap());
    }

    #[test]
    fn weighted_norm_basics() {
        let m = SymMatrix::identity(3);
        assert_eq!(weighted_norm_sq(&[0.0, 0.0, 0.0], &m).unwrap(), 0.0);
        assert_eq!(weighted_norm_sq(&[0.0, 1.0, 0.0], &m).unwrap(), 1.0);
        assert!(weighted_norm_sq(&[1.0, 0.0], &m).is_err());
    }

    #[test]
    fn weighted_norm_certificate_value() {
        // hand-summed expansion of the quadratic form at a fixed vector
        let m = cuk_m();
        let x = [0.0, 12.0, -0.5364, -12.0];
        let mut oracle = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                oracle += x[i] * m.get(i, j) * x[j];
            }
        }
        let got = weighted_norm_sq(&x, &m).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 152.6).abs() < 0.1, "got {got}");
    }

    #[test]
    fn sqrt_factor_identity_and_diagonal() {
        let i = sqrt_factor(&SymMatrix::identity(3), 1e-12).unwrap();
        assert!(i.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-12);
        let d = sqrt_factor(&SymMatrix::diagonal(&[4.0, 9.0]).unwrap(), 1e-12).unwrap();
        assert!((d[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((d[(1, 1)] - 3.0).abs() < 1e-12);
        assert!(d[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn sqrt_factor_reconstructs_certificate() {
        let m = cuk_m();
        let s = sqrt_factor(&m, 1e-11).unwrap();
        let m2 = s.transpose().matmul(&s).unwrap();
        assert!(m2.sub(&m.as_matrix()).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn sqrt_factor_rejects_indefinite() {
        let s = SymMatrix::diagonal(&[1.0, -0.5]).unwrap();
        assert!(matches!(
            sqrt_factor(&s, 1e-12),
            Err(Error::Certificate(_))
        ));
    }

    #[test]
    fn eigendecomposition_reconstructs() {
        let m = cuk_m();
        let d = sym_eigen(&m, 1e-12).unwrap();
        let n = m.order();
        let mut rec = Matrix::zeros(n, n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    rec[(i, j)] += d.values[k] * d.vectors[(i, k)] * d.vectors[(j, k)];
                }
            }
        }
        let err = rec.sub(&m.as_matrix()).unwrap().max_abs();
        assert!(err <= 1e-9 * m.max_abs().max(1.0), "reconstruction error {err}");
    }

    #[test]
    fn constructor_symmetrises() {
        let s = SymMatrix::new(2, vec![1.0, 3.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.get(1, 0), 2.0);
    }

    #[test]
    fn solve_small_system() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![5.0, 3.0]]).unwrap();
        let b = Matrix::column(&[4.0, 11.0]);
        let x = a.solve(&b).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((x[(1, 0)] - 2.0).abs() < 1e-12);
        let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(singular.solve(&b).is_err());
    }
}
