//! Brute-force oracle for three tiny semidefinite programs
//! `min cᵀz s.t. F₀ + Σ zₖFₖ ⪰ 0, |zₖ| ≤ 3`, shared by the engine tests and
//! the acceptance suite.

use nalgebra::{DMatrix, DVector};
use opdg::sdp::{LinExpr, SdpProblem, VarKind};

pub fn mat3(v: [f64; 9]) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &v)
}

pub fn oracle_family() -> [DMatrix<f64>; 4] {
    [
        mat3([2.0, 0.5, 0.0, 0.5, 1.5, 0.2, 0.0, 0.2, 1.0]),
        mat3([1.0, 0.0, 0.3, 0.0, -0.5, 0.0, 0.3, 0.0, 0.2]),
        mat3([0.0, 1.0, 0.0, 1.0, 0.0, -0.4, 0.0, -0.4, 0.5]),
        mat3([-0.3, 0.0, 0.0, 0.0, 1.0, 0.6, 0.0, 0.6, -1.0]),
    ]
}

pub const BOX: f64 = 3.0;

/// Objectives and optima of the three frozen test problems
/// `min cᵀz s.t. F₀ + Σ zₖFₖ ⪰ 0, |zₖ| ≤ 3`. The optima were produced by
/// [`oracle_minimum`] and are kept here so that the solver test does not
/// depend on the oracle's running time.
pub const ORACLE_CASES: [([f64; 3], f64); 3] = [
    ([1.0, -0.5, 0.25], -2.958123677227),
    ([-1.0, 0.3, 1.0], -2.984621144574),
    ([0.2, 0.2, -1.0], -1.690293711295),
];

pub fn lmi(z: &[f64; 3]) -> DMatrix<f64> {
    let f = oracle_family();
    &f[0] + &f[1] * z[0] + &f[2] * z[1] + &f[3] * z[2]
}

/// PSD test through all principal minors, independent of any eigensolver.
pub fn psd_by_minors(m: &DMatrix<f64>) -> bool {
    let d1 = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
    let d2 = [
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)],
        m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)],
    ];
    d1.iter().all(|&v| v >= 0.0) && d2.iter().all(|&v| v >= 0.0) && m.determinant() >= 0.0
}

pub fn grid_best(c: &[f64; 3], center: [f64; 3], half: f64, pts: usize) -> Option<([f64; 3], f64)> {
    let mut best: Option<([f64; 3], f64)> = None;
    let step = 2.0 * half / (pts - 1) as f64;
    for i in 0..pts {
        for j in 0..pts {
            for k in 0..pts {
                let z = [
                    (center[0] - half + step * i as f64).clamp(-BOX, BOX),
                    (center[1] - half + step * j as f64).clamp(-BOX, BOX),
                    (center[2] - half + step * k as f64).clamp(-BOX, BOX),
                ];
                if !psd_by_minors(&lmi(&z)) {
                    continue;
                }
                let v = c[0] * z[0] + c[1] * z[1] + c[2] * z[2];
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((z, v));
                }
            }
        }
    }
    best
}

/// Eigenvalues of a symmetric 3×3 matrix in ascending order from the
/// trigonometric solution of the characteristic cubic, so the oracle does not
/// share the library's eigensolver.
pub fn eig3(m: &DMatrix<f64>) -> [f64; 3] {
    let q = m.trace() / 3.0;
    let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
    let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q; 3];
    }
    let b = (m - DMatrix::identity(3, 3) * q) / p;
    let phi = (b.determinant() / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let third = 2.0 * std::f64::consts::PI / 3.0;
    let mut ev = [0, 1, 2].map(|k| q + 2.0 * p * (phi + third * k as f64).cos());
    ev.sort_by(f64::total_cmp);
    ev
}

/// Unit eigenvector for the eigenvalue `lambda` by inverse iteration.
pub fn eigvec3(m: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
    let shifted = m - DMatrix::identity(3, 3) * (lambda - 1e-9);
    let mut v = DVector::from_vec(vec![1.0, 0.7, 0.3]);
    for _ in 0..6 {
        if let Some(next) = shifted.clone().lu().solve(&v) {
            v = next.normalize();
        }
    }
    v
}

/// Damped Newton (Gauss–Newton when overdetermined) on `r(u) = 0` with a
/// finite-difference Jacobian and a backtracking line search.
pub fn newton(mut u: DVector<f64>, r: impl Fn(&DVector<f64>) -> DVector<f64>) -> (DVector<f64>, f64) {
    for _ in 0..40 {
        let r0 = r(&u);
        if r0.norm() < 1e-15 {
            break;
        }
        let h = 1e-7;
        let mut jac = DMatrix::zeros(r0.len(), u.len());
        for j in 0..u.len() {
            let mut up = u.clone();
            up[j] += h;
            jac.set_column(j, &((r(&up) - &r0) / h));
        }
        let Ok(step) = jac.svd(true, true).solve(&(-&r0), 1e-14) else { break };
        let mut t = 1.0;
        while t > 1e-6 && r(&(&u + &step * t)).norm() >= r0.norm() {
            t *= 0.5;
        }
        if t <= 1e-6 {
            break;
        }
        u += step * t;
    }
    let res = r(&u).norm();
    (u, res)
}

/// Brute-force minimum: grid search and zoom, then an exact refinement.
/// Box coordinates on a bound are held fixed. Two optimality structures are
/// tried from the zoomed point: a simple zero eigenvalue, where
/// `c_f = μ ∇_f λ_min` and `λ_min = 0` are solved, and a rank-one point
/// `F(z) = yyᵀ`, which is isolated and is solved for directly. A candidate is
/// kept only if its equations converge, it is feasible up to the round-off of
/// the cubic eigenvalue formula and it does not exceed the feasible zoomed
/// objective, which is an upper bound; the lowest kept candidate is returned.
pub fn oracle_minimum(c: &[f64; 3]) -> f64 {
    let (mut z, _) = grid_best(c, [0.0; 3], BOX, 41).expect("F₀ ≻ 0 makes the origin feasible");
    let mut half = 2.0 * BOX / 40.0;
    for _ in 0..14 {
        if let Some((zb, _)) = grid_best(c, z, half, 11) {
            z = zb;
        }
        half *= 0.4;
    }
    let zoomed = c[0] * z[0] + c[1] * z[1] + c[2] * z[2];
    for v in z.iter_mut() {
        if (v.abs() - BOX).abs() < 1e-4 {
            *v = BOX * v.signum();
        }
    }
    let free: Vec<usize> = (0..3).filter(|&k| z[k].abs() < BOX).collect();
    let f = oracle_family();
    let base = z;
    let with = |u: &DVector<f64>| {
        let mut zz = base;
        for (i, &k) in free.iter().enumerate() {
            zz[k] = u[i];
        }
        zz
    };
    let objective = |zz: &[f64; 3]| c[0] * zz[0] + c[1] * zz[1] + c[2] * zz[2];
    let u0 = DVector::from_iterator(free.len(), free.iter().map(|&k| z[k]));
    let ev = eig3(&lmi(&z));
    let mut candidates = Vec::new();
    if free.is_empty() {
        candidates.push((z, 0.0));
    } else {
        let grad = |zz: &[f64; 3]| -> (f64, Vec<f64>) {
            let m = lmi(zz);
            let l = eig3(&m)[0];
            let v = eigvec3(&m, l);
            (l, free.iter().map(|&k| (v.transpose() * &f[k + 1] * &v)[(0, 0)]).collect())
        };
        let (_, g0) = grad(&z);
        let mu0 = free.iter().zip(&g0).map(|(&k, g)| c[k] / g).sum::<f64>() / free.len() as f64;
        let (u, res) = newton(u0.clone().insert_row(free.len(), mu0), |u| {
            let zz = with(u);
            let (l, g) = grad(&zz);
            let mu = u[free.len()];
            let mut r = DVector::zeros(free.len() + 1);
            for (i, &k) in free.iter().enumerate() {
                r[i] = c[k] - mu * g[i];
            }
            r[free.len()] = l;
            r
        });
        candidates.push((with(&u), res));
    }
    if !free.is_empty() {
        let y0 = eigvec3(&lmi(&z), ev[2]) * ev[2].sqrt();
        let start = DVector::from_iterator(free.len() + 3, u0.iter().copied().chain(y0.iter().copied()));
        let (u, res) = newton(start, |u| {
            let y = DVector::from_iterator(3, (0..3).map(|k| u[free.len() + k]));
            let d = lmi(&with(u)) - &y * y.transpose();
            DVector::from_vec(vec![d[(0, 0)], d[(1, 1)], d[(2, 2)], d[(0, 1)], d[(0, 2)], d[(1, 2)]])
        });
        candidates.push((with(&u), res));
    }
    candidates
        .into_iter()
        .filter(|(zz, res)| *res < 1e-10 && eig3(&lmi(zz))[0] > -1e-7 && objective(zz) <= zoomed + 1e-9 && zoomed - objective(zz) < 1e-2)
        .map(|(zz, _)| objective(&zz))
        .min_by(f64::total_cmp)
        .expect("no refinement converged from the zoomed point")
}

pub fn oracle_problem(c: &[f64; 3]) -> SdpProblem {
    let f = oracle_family();
    let mut p = SdpProblem::new();
    let zs: Vec<_> = (0..3).map(|k| p.add_var(&format!("z{k}"), VarKind::Scalar)).collect();
    let mut lmi = LinExpr::constant(f[0].clone());
    let mut obj = LinExpr::zeros(1, 1);
    for k in 0..3 {
        let e = p.expr(zs[k]);
        lmi = lmi + LinExpr {
            constant: DMatrix::zeros(3, 3),
            terms: e.terms.iter().map(|(&i, _)| (i, f[k + 1].clone())).collect(),
        };
        obj = obj + e.scale(c[k]);
        p.add_ge(&format!("z{k} <= 3"), -&e, -BOX);
        p.add_ge(&format!("z{k} >= -3"), e, -BOX);
    }
    p.add_psd("F(z)", lmi);
    p.minimize(obj);
    p
}
