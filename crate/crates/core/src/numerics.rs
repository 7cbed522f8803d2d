//! Dense matrix helpers and the two matrix-equation solvers (discrete
//! algebraic Riccati, discrete Lyapunov) the estimation and control layers
//! are built on.
//!
//! Everything here works on `nalgebra` dynamic matrices. State dimensions in
//! this crate are small (2 to a few dozen), so dense direct methods are used
//! throughout.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// `vᵀ` as a dense `1 × len` matrix.
pub fn row_matrix(v: &Vector) -> Matrix {
    Matrix::from_row_slice(1, v.len(), v.as_slice())
}

pub fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

/// Block-diagonal matrix from square or rectangular blocks.
pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Thin SVD `M = U diag(σ) Vᵀ` by one-sided Jacobi rotations.
///
/// nalgebra's bidiagonal SVD returns wrong factors for some graph incidence
/// matrices (repeated singular values); Jacobi is slower but reliable at the
/// sizes used here. Returns `(U, σ, V)` with `U` of shape `rows × k`,
/// `k = min(rows, cols)`, singular values unsorted.
pub fn jacobi_svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    if m.nrows() < m.ncols() {
        let (u, s, v) = jacobi_svd(&m.transpose());
        return (v, s, u);
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = Matrix::identity(n, n);
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, p)], mat[(r, q)]);
                        mat[(r, p)] = c * x - s * y;
                        mat[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    for (j, &s) in sigma.iter().enumerate() {
        if s > 0.0 {
            a.column_mut(j).unscale_mut(s);
        }
    }
    (a, sigma, v)
}

/// Moore–Penrose pseudoinverse. Singular values below `1e-12 * σ_max` are
/// treated as zero.
pub fn pinv(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Matrix::zeros(cols, rows);
    }
    let (u, sigma, v) = jacobi_svd(m);
    let cutoff = 1e-12 * sigma.iter().cloned().fold(0.0, f64::max);
    let mut out = Matrix::zeros(cols, rows);
    for (k, &s) in sigma.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += v.column(k) * u.column(k).transpose() / s;
        }
    }
    out
}

/// Eigenvalues as `(re, im)` pairs.
pub fn eigenvalues(m: &Matrix) -> Vec<(f64, f64)> {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    let n = m.nrows();
    match n {
        0 => Vec::new(),
        1 => vec![(m[(0, 0)], 0.0)],
        2 => eigenvalues_2x2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]).to_vec(),
        _ => {
            // Schur occasionally stalls on highly structured inputs; a shift
            // changes the iteration path without changing the spectrum.
            for shift in [0.0, 0.123_456_7, -0.377_777_1] {
                let shifted = m + Matrix::identity(n, n) * shift;
                if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, 50_000 * n) {
                    return schur
                        .complex_eigenvalues()
                        .iter()
                        .map(|z| (z.re - shift, z.im))
                        .collect();
                }
            }
            panic!("Schur decomposition failed to converge for a {n}x{n} matrix");
        }
    }
}

fn eigenvalues_2x2(a: f64, b: f64, c: f64, d: f64) -> [(f64, f64); 2] {
    let half_tr = 0.5 * (a + d);
    let det = a * d - b * c;
    // Discriminant written as ((a-d)/2)^2 + bc to avoid cancellation.
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        let (l1, l2) = if half_tr >= 0.0 {
            let l1 = half_tr + r;
            (l1, if l1 != 0.0 { det / l1 } else { half_tr - r })
        } else {
            let l2 = half_tr - r;
            (if l2 != 0.0 { det / l2 } else { half_tr + r }, l2)
        };
        [(l1, 0.0), (l2, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [(half_tr, im), (half_tr, -im)]
    }
}

/// Maximum eigenvalue modulus.
pub fn spectral_radius(m: &Matrix) -> f64 {
    eigenvalues(m)
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(0.0, f64::max)
}

/// Factor `L` with `L Lᵀ = q` for a symmetric positive semidefinite `q`.
///
/// 2×2 inputs use the closed-form upper-triangular factor, which is exact on
/// the singular clock covariances (σ₂² = 0). Larger inputs go through an
/// eigendecomposition with small negative eigenvalues clipped to zero.
pub fn psd_factor(q: &Matrix) -> Result<Matrix> {
    if !q.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "psd_factor of {}x{} matrix",
            q.nrows(),
            q.ncols()
        )));
    }
    let n = q.nrows();
    let trace = q.trace().abs();
    let reject = -1e-10 * trace;
    match n {
        0 => Ok(Matrix::zeros(0, 0)),
        1 => {
            let v = q[(0, 0)];
            if v < reject || (trace == 0.0 && v < 0.0) {
                return Err(Error::NotPsd(v));
            }
            Ok(Matrix::from_element(1, 1, v.max(0.0).sqrt()))
        }
        2 => {
            let (a, b, c) = (q[(0, 0)], 0.5 * (q[(0, 1)] + q[(1, 0)]), q[(1, 1)]);
            let det = a * c - b * b;
            if a < reject || c < reject || det < -1e-10 * trace * trace {
                let min_eig = eigenvalues_2x2(a, b, b, c)
                    .iter()
                    .map(|e| e.0)
                    .fold(f64::INFINITY, f64::min);
                return Err(Error::NotPsd(min_eig));
            }
            let c = c.max(0.0);
            let mut l = Matrix::zeros(2, 2);
            if c > 0.0 {
                let sc = c.sqrt();
                l[(0, 1)] = b / sc;
                l[(1, 1)] = sc;
                l[(0, 0)] = (a - b * b / c).max(0.0).sqrt();
            } else {
                l[(0, 0)] = a.max(0.0).sqrt();
            }
            Ok(l)
        }
        _ => {
            let eig = symmetrize(q).symmetric_eigen();
            let mut l = eig.eigenvectors.clone();
            for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
                if lambda < reject {
                    return Err(Error::NotPsd(lambda));
                }
                let s = lambda.max(0.0).sqrt();
                l.column_mut(k).scale_mut(s);
            }
            Ok(l)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DareOptions {
    /// Relative tolerance on `‖RHS(P) − P‖_∞ / ‖P‖_∞`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DareOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1_000_000,
        }
    }
}

/// Steady-state solution of the filtering Riccati equation
/// `P = A P Aᵀ − A P Cᵀ (C P Cᵀ + R)⁻¹ C P Aᵀ + Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DareSolution {
    /// Steady one-step prediction covariance.
    pub p: Matrix,
    /// Predictor gain `A P Cᵀ (C P Cᵀ + R)⁻¹`.
    pub gain: Matrix,
    /// Measurement-update gain `P Cᵀ (C P Cᵀ + R)⁻¹` (so `gain = A · filter_gain`).
    pub filter_gain: Matrix,
    pub iterations: usize,
    pub residual: f64,
}

fn innovation_gain(p: &Matrix, c: &Matrix, r: &Matrix) -> Result<Matrix> {
    let s = symmetrize(&(c * p * c.transpose() + r));
    // No noise anywhere: the measurement carries no new information and the
    // zero gain is the pseudo-inverse solution.
    if s.iter().all(|&v| v == 0.0) {
        return Ok(Matrix::zeros(p.nrows(), c.nrows()));
    }
    let chol = s.cholesky().ok_or(Error::SingularInnovation)?;
    // K = P Cᵀ S⁻¹  <=>  S Kᵀ = C P
    let k_t = chol.solve(&(c * p));
    if k_t.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    Ok(k_t.transpose())
}

fn riccati_rhs(a: &Matrix, c: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let k = innovation_gain(p, c, r)?;
    let posterior = p - &k * c * p;
    Ok(symmetrize(&(a * posterior * a.transpose() + q)))
}

fn relative_change(next: &Matrix, p: &Matrix) -> f64 {
    let diff = max_abs(&(next - p));
    if diff == 0.0 {
        return 0.0;
    }
    diff / max_abs(next).max(f64::MIN_POSITIVE)
}

/// Fixed-point iteration of the Riccati map starting from `P₀ = Q`.
pub fn solve_dare(
    a: &Matrix,
    c: &Matrix,
    q: &Matrix,
    r: &Matrix,
    opts: DareOptions,
) -> Result<DareSolution> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) || c.ncols() != n || r.shape() != (c.nrows(), c.nrows()) {
        return Err(Error::DimensionMismatch(format!(
            "dare: a {:?}, c {:?}, q {:?}, r {:?}",
            a.shape(),
            c.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let mut p = symmetrize(q);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let next = riccati_rhs(a, c, q, r, &p)?;
        residual = relative_change(&next, &p);
        p = next;
        iterations += 1;
        if residual <= opts.tol {
            break;
        }
    }
    if residual > opts.tol {
        return Err(Error::NonConvergence(opts.max_iter));
    }
    let filter_gain = innovation_gain(&p, c, r)?;
    let gain = a * &filter_gain;
    residual = relative_change(&riccati_rhs(a, c, q, r, &p)?, &p);
    Ok(DareSolution {
        p,
        gain,
        filter_gain,
        iterations,
        residual,
    })
}

/// Relative residual of `P` in the Riccati equation.
pub fn dare_residual(a: &Matrix, c: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<f64> {
    Ok(relative_change(&riccati_rhs(a, c, q, r, p)?, p))
}

/// Dimension above which `solve_dlyap` switches from the Kronecker system to
/// the doubling iteration (the Kronecker matrix has `n⁴` entries).
const KRONECKER_MAX_DIM: usize = 40;

/// Solves `M P Mᵀ − P + Q = 0` for Schur-stable `M`.
pub fn solve_dlyap(m: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = m.nrows();
    if !m.is_square() || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "dlyap: m {:?}, q {:?}",
            m.shape(),
            q.shape()
        )));
    }
    let rho = spectral_radius(m);
    if !(rho < 1.0) {
        return Err(Error::UnstableCoefficient(rho));
    }
    let q = symmetrize(q);
    let p = if n <= KRONECKER_MAX_DIM {
        // Column-major vec: vec(M P Mᵀ) = (M ⊗ M) vec(P).
        let lhs = Matrix::identity(n * n, n * n) - kron(m, m);
        let rhs = Vector::from_column_slice(q.as_slice());
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or(Error::UnstableCoefficient(rho))?;
        Matrix::from_column_slice(n, n, sol.as_slice())
    } else {
        dlyap_doubling(m, &q)
    };
    Ok(symmetrize(&p))
}

fn dlyap_doubling(m: &Matrix, q: &Matrix) -> Matrix {
    let mut p = q.clone();
    let mut mk = m.clone();
    for _ in 0..128 {
        let incr = &mk * &p * mk.transpose();
        let done = max_abs(&incr) <= 1e-17 * max_abs(&p).max(f64::MIN_POSITIVE);
        p += incr;
        if done {
            break;
        }
        mk = &mk * &mk;
    }
    p
}

/// Relative residual `‖M P Mᵀ − P + Q‖_∞ / max(‖P‖_∞, ‖Q‖_∞)`.
pub fn dlyap_residual(m: &Matrix, q: &Matrix, p: &Matrix) -> f64 {
    let res = m * p * m.transpose() - p + q;
    let scale = max_abs(p).max(max_abs(q)).max(f64::MIN_POSITIVE);
    max_abs(&res) / scale
}
