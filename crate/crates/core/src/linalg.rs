//! Dense linear-algebra helpers shared by the solvers.
//!
//! Everything here works on `DMatrix<f64>`; the problem sizes in this crate
//! are small (state dimension ≤ 10), so clarity wins over blocking or
//! sparsity.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

/// Largest absolute entry, `0.0` for an empty matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry of `M − Mᵀ`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(m - m.transpose()))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Numerical rank with singular values above `rel_tol · σ_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

fn complex_rank(m: &DMatrix<Complex<f64>>, rel_tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Hautus test: every eigenvalue with `Re λ ≥ 0` must satisfy
/// `rank [A − λI, B] = n`.
pub fn is_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let scale = max_abs(a).max(max_abs(b)).max(1.0);
    for lambda in eigenvalues(a) {
        if lambda.re < -1e-9 * scale {
            continue;
        }
        let mut pbh = DMatrix::<Complex<f64>>::zeros(n, n + b.ncols());
        for i in 0..n {
            for j in 0..n {
                let diag = if i == j { lambda } else { Complex::new(0.0, 0.0) };
                pbh[(i, j)] = Complex::new(a[(i, j)], 0.0) - diag;
            }
            for j in 0..b.ncols() {
                pbh[(i, n + j)] = Complex::new(b[(i, j)], 0.0);
            }
        }
        if complex_rank(&pbh, 1e-10) < n {
            return false;
        }
    }
    true
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
            }
        }
    }
    out
}

/// Column-major vectorization.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Horizontal concatenation of equally tall blocks.
pub fn hstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Vertical concatenation of equally wide blocks.
pub fn vstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Block-diagonal matrix.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Solves the Lyapunov equation `AᵀX + XA + Q = 0` through the Kronecker
/// form `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec(X) = −vec(Q)`.
///
/// Returns `None` when the operator is singular (A has eigenvalues
/// `λᵢ + λⱼ = 0`).
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = kron(&eye, &at) + kron(&at, &eye);
    let rhs = -vec(q);
    let sol = op.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Some(symmetrize(&x))
}

/// Matrix sign function by the scaled Newton iteration
/// `Z ← (c·Z + (c·Z)⁻¹) / 2` with determinant scaling.
///
/// Returns `None` if an iterate becomes singular or the iteration does not
/// settle, which happens when `m` has eigenvalues on the imaginary axis.
pub fn matrix_sign(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let mut z = m.clone();
    for _ in 0..100 {
        let inv = z.clone().try_inverse()?;
        let det = z.determinant().abs();
        let c = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / n as f64)
        } else {
            1.0
        };
        let next = (&z * c + inv / c) * 0.5;
        let delta = max_abs(&(&next - &z));
        let scale = max_abs(&next).max(1.0);
        z = next;
        if !delta.is_finite() {
            return None;
        }
        if delta <= 1e-13 * scale {
            return Some(z);
        }
    }
    // Accept a nearly converged iterate; the caller refines anyway.
    let check = max_abs(&(&z * &z - DMatrix::identity(n, n)));
    (check < 1e-6).then_some(z)
}

/// Least-squares solve through the SVD, used where the system may be
/// rank-deficient.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    svd.solve(b, 1e-13 * smax.max(f64::MIN_POSITIVE)).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lyapunov_scalar() {
        // 2·(−1)·x + 1 = 0
        let a = DMatrix::from_element(1, 1, -1.0);
        let q = DMatrix::from_element(1, 1, 1.0);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert_relative_eq!(x[(0, 0)], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_residual() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 0.0, -1.0, 0.5, 0.3, 0.0, -3.0]);
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.2, 0.0, 0.2, 3.0]);
        let x = solve_lyapunov(&a, &q).unwrap();
        let res = a.transpose() * &x + &x * &a + &q;
        assert!(max_abs(&res) < 1e-12);
    }

    #[test]
    fn sign_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -0.5, 2.0]));
        let s = matrix_sign(&m).unwrap();
        assert_relative_eq!(s, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0])), epsilon = 1e-12);
    }

    #[test]
    fn stabilizability() {
        // Double-integrator-like chain with an uncontrollable integrator.
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b_h = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 0.14]);
        let b_a = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        assert!(!is_stabilizable(&a, &b_h));
        assert!(!is_stabilizable(&a, &b_a));
        assert!(is_stabilizable(&a, &hstack(&[b_h, b_a])));
        // A stable system is stabilizable with any B.
        let a = DMatrix::from_element(1, 1, -1.0);
        assert!(is_stabilizable(&a, &DMatrix::zeros(1, 1)));
    }

    #[test]
    fn kron_shape_and_entries() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::identity(2, 2);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(2, 0)], 3.0);
        assert_eq!(k[(3, 1)], 3.0);
        assert_eq!(k[(2, 1)], 0.0);
    }

    #[test]
    fn rank_of_repeated_columns() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.5, 0.5]);
        assert_eq!(rank(&m, 1e-10), 1);
    }
}
