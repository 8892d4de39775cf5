//! Quadratic asymptotic-stabilisability certificates `V(x, z) = ||x - z||^2_M`
//! and their verification through polytopic linear matrix inequalities.

use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{
    self, is_positive_definite, sym_eigenvalues, weighted_norm_sq, Matrix, SymMatrix, DEFAULT_TOL,
};
use crate::system::{sample_scalar, FeedbackFn, InputAffineSystem};
use crate::{Error, Result};

/// Quadratic certificate: `V(x, z) = (x - z)^T M (x - z)` decaying at rate
/// `lambda`, with the class-K envelopes `sigma_min * r^2 <= V <= sigma_max * r^2`
/// given by the extreme eigenvalues of `M`, and a feedback term `k_base`
/// satisfying `k_base(x, x, u) = u`.
#[derive(Clone)]
pub struct QuadraticCertificate {
    m: SymMatrix,
    lambda: f64,
    sigma_min: f64,
    sigma_max: f64,
    k_base: FeedbackFn,
}

impl QuadraticCertificate {
    /// Builds a certificate, deriving `sigma_min`/`sigma_max` from the
    /// eigenvalues of `m`. `k_base = None` selects the identity-in-`u`
    /// feedback `k(z, x, u) = u`.
    pub fn new(m: SymMatrix, lambda: f64, k_base: Option<FeedbackFn>) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::Certificate("decay rate lambda must be positive".into()));
        }
        let report = sym_eigenvalues(&m, DEFAULT_TOL)?;
        let sigma_min = report.eigenvalues[0];
        let sigma_max = *report.eigenvalues.last().unwrap();
        if sigma_min <= 0.0 {
            return Err(Error::Certificate(format!(
                "M is not positive definite (min eigenvalue {sigma_min:.6e})"
            )));
        }
        let k_base: FeedbackFn = k_base.unwrap_or_else(|| Arc::new(|_z, _x, u| u.to_vec()));
        // Diagonal identity k(x, x, u) = u, spot-checked on a fixed
        // deterministic sample set.
        let mut rng = ChaCha8Rng::seed_from_u64(0xA5);
        let n = m.order();
        for _ in 0..32 {
            let x: Vec<f64> = (0..n).map(|_| sample_scalar(&mut rng, -10.0, 10.0)).collect();
            let u = vec![sample_scalar(&mut rng, -2.0, 2.0)];
            let ku = k_base(&x, &x, &u);
            if ku.len() != u.len() || ku.iter().zip(&u).any(|(a, b)| (a - b).abs() > 1e-12) {
                return Err(Error::Certificate(
                    "k_base violates the diagonal identity k(x, x, u) = u".into(),
                ));
            }
        }
        Ok(Self {
            m,
            lambda,
            sigma_min,
            sigma_max,
            k_base,
        })
    }

    pub fn m(&self) -> &SymMatrix {
        &self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn k_base(&self) -> &FeedbackFn {
        &self.k_base
    }
}

/// Per-vertex outcome of a polytopic LMI check.
#[derive(Debug, Clone)]
pub struct LmiReport {
    /// Max eigenvalue of `A_i^T M + M A_i + lambda M` per vertex.
    pub vertex_max_eigs: Vec<f64>,
    /// Smallest eigenvalue of `M` itself.
    pub m_min_eig: f64,
    pub feasible: bool,
    pub tol: f64,
}

impl LmiReport {
    /// Plain-text verification report: vertex -> max eigenvalue table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "polytopic LMI check (tolerance {:.3e})\n",
            self.tol
        ));
        out.push_str(&format!("  min eigenvalue of M: {:.9e}\n", self.m_min_eig));
        for (i, e) in self.vertex_max_eigs.iter().enumerate() {
            out.push_str(&format!("  vertex {i}: max eigenvalue {e:+.9e}\n"));
        }
        out.push_str(if self.feasible {
            "  result: feasible\n"
        } else {
            "  result: infeasible\n"
        });
        out
    }
}

/// Checks `A_i^T M + M A_i + lambda M <= tol * I` at every vertex together
/// with `M > 0`.
pub fn verify_polytopic_lmi(
    vertices: &[Matrix],
    m: &SymMatrix,
    lambda: f64,
    tol: f64,
) -> Result<LmiReport> {
    if lambda <= 0.0 {
        return Err(Error::Argument("lambda must be positive".into()));
    }
    if vertices.is_empty() {
        return Err(Error::Argument("at least one vertex matrix required".into()));
    }
    let n = m.order();
    let m_mat = m.as_matrix();
    let m_report = sym_eigenvalues(m, DEFAULT_TOL)?;
    let m_min_eig = m_report.eigenvalues[0];
    let mut vertex_max_eigs = Vec::with_capacity(vertices.len());
    for (i, a) in vertices.iter().enumerate() {
        if a.rows() != n || a.cols() != n {
            return Err(Error::Dimension(format!(
                "vertex {i} is {}x{}, expected {n}x{n}",
                a.rows(),
                a.cols()
            )));
        }
        let lhs = a
            .transpose()
            .matmul(&m_mat)?
            .add(&m_mat.matmul(a)?)?
            .add(&m_mat.scale(lambda))?;
        let lhs_sym = SymMatrix::from_matrix(&lhs)?;
        let eig_tol = DEFAULT_TOL.max(lhs_sym.max_abs() * 1e-14);
        let report = sym_eigenvalues(&lhs_sym, eig_tol)?;
        vertex_max_eigs.push(*report.eigenvalues.last().unwrap());
    }
    let feasible = m_min_eig > 0.0 && vertex_max_eigs.iter().all(|&e| e <= tol);
    Ok(LmiReport {
        vertex_max_eigs,
        m_min_eig,
        feasible,
        tol,
    })
}

/// `V(x, z) = (x - z)^T M (x - z)`.
pub fn lyapunov_value(cert: &QuadraticCertificate, x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::Dimension("x and z lengths differ".into()));
    }
    let diff: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
    weighted_norm_sq(&diff, &cert.m)
}

/// `true` iff `M - c0 * C^T C` is positive semidefinite within `tol`;
/// certifies the output lower envelope `alpha_h(r) = c0 * r^2`.
pub fn check_output_lower_bound(
    m: &SymMatrix,
    c: &Matrix,
    c0: f64,
    tol: f64,
) -> Result<bool> {
    if c0 <= 0.0 {
        return Err(Error::Argument("c0 must be positive".into()));
    }
    if c.cols() != m.order() {
        return Err(Error::Dimension(format!(
            "output matrix has {} columns, expected {}",
            c.cols(),
            m.order()
        )));
    }
    let ctc = c.transpose().matmul(c)?;
    let diff = m.as_matrix().sub(&ctc.scale(c0))?;
    let s = SymMatrix::from_matrix(&diff)?;
    let report = sym_eigenvalues(&s, DEFAULT_TOL.max(s.max_abs() * 1e-14))?;
    Ok(report.eigenvalues[0] >= -tol)
}

/// Decrement of `V` along the paired dynamics for a plant exposing the
/// affine-in-state form: `2 (x - z)^T M A_bar(u) (x - z)`. Callers compare
/// against `-lambda * V`.
pub fn decrement_along_pair(
    cert: &QuadraticCertificate,
    sys: &InputAffineSystem,
    x: &[f64],
    z: &[f64],
    u: &[f64],
) -> Result<f64> {
    if !sys.has_affine_form() {
        return Err(Error::UnsupportedPlant(
            "decrement check requires the affine-in-state form".into(),
        ));
    }
    if x.len() != z.len() || x.len() != cert.m.order() {
        return Err(Error::Dimension("state lengths must match the certificate order".into()));
    }
    let diff: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
    let a = sys.a_bar(u)?;
    let ad = a.matvec(&diff)?;
    let mad = cert.m.as_matrix().matvec(&ad)?;
    Ok(2.0 * diff.iter().zip(&mad).map(|(a, b)| a * b).sum::<f64>())
}

/// Naive feasibility search for a certificate matrix: projected descent on
/// the summed max-eigenvalue penalty of the vertex LMIs, with `M` kept
/// symmetric, unit-trace-normalised, and nudged away from singularity.
///
/// Experimental. Unvalidated against any solver-grade reference; intended
/// only as a fallback probe when no certificate is supplied.
pub fn experimental_feasibility_search(
    vertices: &[Matrix],
    lambda: f64,
    iterations: usize,
    tol: f64,
) -> Result<(SymMatrix, LmiReport)> {
    if vertices.is_empty() {
        return Err(Error::Argument("at least one vertex matrix required".into()));
    }
    let n = vertices[0].rows();
    let penalty = |m: &SymMatrix| -> Result<f64> {
        let report = verify_polytopic_lmi(vertices, m, lambda, tol)?;
        let mut p = 0.0;
        for e in report.vertex_max_eigs {
            p += e.max(0.0).powi(2);
        }
        // keep M comfortably positive definite
        p += (0.05 - report.m_min_eig).max(0.0).powi(2) * 10.0;
        Ok(p)
    };

    // start from scaled identity, unit average diagonal
    let mut m = SymMatrix::identity(n);
    let mut best = penalty(&m)?;
    let mut step = 0.1;
    let fd = 1e-5;
    for _ in 0..iterations {
        if best <= 0.0 {
            break;
        }
        // finite-difference gradient over the upper triangle
        let mut grad = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut bumped = m.as_matrix();
                bumped[(i, j)] += fd;
                bumped[(j, i)] = bumped[(i, j)];
                let p = penalty(&SymMatrix::from_matrix(&bumped)?)?;
                let g = (p - best) / fd;
                grad[i * n + j] = g;
                grad[j * n + i] = g;
            }
        }
        let mut trial = m.as_matrix();
        for i in 0..n {
            for j in 0..n {
                trial[(i, j)] -= step * grad[i * n + j];
            }
        }
        // projection: renormalise the trace to n
        let tr: f64 = (0..n).map(|i| trial[(i, i)]).sum();
        if tr.abs() > 1e-12 {
            trial = trial.scale(n as f64 / tr);
        }
        let trial = SymMatrix::from_matrix(&trial)?;
        let p = penalty(&trial)?;
        if p < best {
            best = p;
            m = trial;
            step *= 1.2;
        } else {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    let report = verify_polytopic_lmi(vertices, &m, lambda, tol)?;
    Ok((m, report))
}

/// Convenience wrapper for the common positive-definiteness gate.
pub fn require_positive_definite(m: &SymMatrix, tol: f64) -> Result<()> {
    if is_positive_definite(m, tol)? {
        Ok(())
    } else {
        Err(Error::Certificate(format!(
            "matrix is not positive definite within {tol:.3e}"
        )))
    }
}

/// Spectral norm of a (possibly rectangular) matrix via the eigenvalues of
/// `A^T A`; the tolerance scales with the squared magnitude of `A`.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    let ata = a.transpose().matmul(a)?;
    let s = SymMatrix::from_matrix(&ata)?;
    let tol = linalg::DEFAULT_TOL.max(s.max_abs() * 1e-13);
    let report = sym_eigenvalues(&s, tol)?;
    Ok(report.eigenvalues.last().unwrap().max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuk::{self, CukParams};

    fn cuk_pieces() -> (Vec<Matrix>, SymMatrix) {
        let params = CukParams::default();
        let vertices = vec![cuk::a_bar_matrix(&params, 0.0), cuk::a_bar_matrix(&params, 1.0)];
        (vertices, cuk::default_certificate_matrix())
    }

    #[test]
    fn lmi_feasible_at_rate_two() {
        let (vertices, m) = cuk_pieces();
        let report = verify_polytopic_lmi(&vertices, &m, 2.0, 1e-6).unwrap();
        assert!(report.feasible, "{}", report.to_text());
        assert!(report.m_min_eig > 0.0);
    }

    #[test]
    fn lmi_identity_weight_is_infeasible() {
        // diagonal entry (2,2) of A^T I + I A + 2 I equals +2 for either
        // vertex, so negative semidefiniteness is impossible
        let (vertices, _) = cuk_pieces();
        let report = verify_polytopic_lmi(&vertices, &SymMatrix::identity(4), 2.0, 1e-6).unwrap();
        assert!(!report.feasible);
    }

    #[test]
    fn lmi_lhs_vertex_is_negative_semidefinite() {
        let (vertices, m) = cuk_pieces();
        let m_mat = m.as_matrix();
        let lhs = vertices[0]
            .transpose()
            .matmul(&m_mat)
            .unwrap()
            .add(&m_mat.matmul(&vertices[0]).unwrap())
            .unwrap()
            .add(&m_mat.scale(2.0))
            .unwrap();
        let s = SymMatrix::from_matrix(&lhs).unwrap();
        assert!(crate::linalg::is_negative_semidefinite(&s, 1e-6).unwrap());
    }

    #[test]
    fn lmi_infeasible_at_rate_ten() {
        let (vertices, m) = cuk_pieces();
        let report = verify_polytopic_lmi(&vertices, &m, 10.0, 1e-6).unwrap();
        assert!(!report.feasible);
        // oracle: direct eigenvalue check on each vertex matrix
        let m_mat = m.as_matrix();
        for a in &vertices {
            let lhs = a
                .transpose()
                .matmul(&m_mat)
                .unwrap()
                .add(&m_mat.matmul(a).unwrap())
                .unwrap()
                .add(&m_mat.scale(10.0))
                .unwrap();
            let s = SymMatrix::from_matrix(&lhs).unwrap();
            let eig = sym_eigenvalues(&s, 1e-9).unwrap();
            assert!(*eig.eigenvalues.last().unwrap() > 1e-6);
        }
    }

    #[test]
    fn lyapunov_diagonal_and_entry() {
        let (_, m) = cuk_pieces();
        let cert = QuadraticCertificate::new(m, 2.0, None).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(lyapunov_value(&cert, &x, &x).unwrap(), 0.0);
        // x - z = e1 picks out entry (1,1)
        let z = [0.0, 2.0, 3.0, 4.0];
        assert!((lyapunov_value(&cert, &x, &z).unwrap() - 0.4804).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_envelopes_and_symmetry() {
        let (_, m) = cuk_pieces();
        let cert = QuadraticCertificate::new(m, 2.0, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| sample_scalar(&mut rng, -50.0, 50.0)).collect();
            let z: Vec<f64> = (0..4).map(|_| sample_scalar(&mut rng, -50.0, 50.0)).collect();
            let v = lyapunov_value(&cert, &x, &z).unwrap();
            let v_swapped = lyapunov_value(&cert, &z, &x).unwrap();
            assert_eq!(v, v_swapped);
            let r2: f64 = x.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!(v >= cert.sigma_min() * r2 - 1e-9 * r2.max(1.0));
            assert!(v <= cert.sigma_max() * r2 + 1e-9 * r2.max(1.0));
        }
    }

    #[test]
    fn output_lower_bound_checks() {
        let (_, m) = cuk_pieces();
        let c = Matrix::from_row_major(1, 4, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(check_output_lower_bound(&m, &c, 0.52, 1e-10).unwrap());
        assert!(check_output_lower_bound(&m, &c, 0.0, 1e-10).is_err());
        // entry (4,4) of M is 0.5304 < 10, so e4 certifies failure
        assert!(!check_output_lower_bound(&m, &c, 10.0, 1e-10).unwrap());
    }

    #[test]
    fn decrement_respects_certificate_rate() {
        let params = CukParams::default();
        let built = cuk::build_cuk(&params, cuk::DeltaVariant::Redesigned).unwrap();
        let cert = built.certificate();
        let sys = built.plant();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let x: Vec<f64> = (0..4).map(|_| sample_scalar(&mut rng, -40.0, 40.0)).collect();
            let z: Vec<f64> = (0..4).map(|_| sample_scalar(&mut rng, -40.0, 40.0)).collect();
            let u = [sample_scalar(&mut rng, 0.0, 1.0)];
            let dec = decrement_along_pair(cert, sys, &x, &z, &u).unwrap();
            let v = lyapunov_value(cert, &x, &z).unwrap();
            assert!(dec <= -2.0 * v + 1e-8 * (1.0 + v));
        }
    }

    #[test]
    fn decrement_is_quadratically_homogeneous() {
        let params = CukParams::default();
        let built = cuk::build_cuk(&params, cuk::DeltaVariant::Redesigned).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let z = [0.0, 1.0, 0.0, -1.0];
        let u = [0.4];
        let d1 = decrement_along_pair(built.certificate(), built.plant(), &x, &z, &u).unwrap();
        let x3: Vec<f64> = x.iter().zip(&z).map(|(a, b)| b + 3.0 * (a - b)).collect();
        let d9 = decrement_along_pair(built.certificate(), built.plant(), &x3, &z, &u).unwrap();
        assert!((d9 - 9.0 * d1).abs() < 1e-9 * d1.abs().max(1.0));
        let zero = decrement_along_pair(built.certificate(), built.plant(), &z, &z, &u).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn experimental_search_recovers_feasibility_for_stable_scalar() {
        // single vertex xdot = -x: any positive M works, so the search
        // must terminate feasible
        let vertices = vec![Matrix::from_row_major(2, 2, vec![-1.0, 0.0, 0.0, -2.0]).unwrap()];
        let (_m, report) = experimental_feasibility_search(&vertices, 0.5, 200, 1e-9).unwrap();
        assert!(report.feasible, "{}", report.to_text());
    }
}
