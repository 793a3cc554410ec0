//! Primal-dual interior-point method on the homogeneous self-dual embedding
//! with Nesterov–Todd scaling and Mehrotra predictor-corrector steps.
//!
//! Equalities are eliminated before the iteration: with `x = x₀ + N z`, where
//! `N` spans the null space of the equality map, the remaining problem is
//!
//! ```text
//! minimize cᵀz  subject to  G z + s = h,  s ∈ K,
//! ```
//!
//! where `K` is a product of a nonnegative orthant and PSD cones in `svec`
//! form. The embedding iterates `(z, s, w, τ, κ)` with the dual cone variable
//! `w`, driving
//!
//! ```text
//! r_x = Gᵀw + cτ,   r_z = Gz + s − hτ,   r_t = κ + cᵀz + hᵀw
//! ```
//!
//! to zero while keeping `s`, `w`, `τ`, `κ` in the interior.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{smat, svec, LinExpr, SdpProblem, VarKind, SDP_TOL};
use crate::linalg::{lstsq, max_abs, symmetrize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// No point satisfies the constraints.
    Infeasible,
    /// The objective is unbounded below on the feasible set.
    Unbounded,
    /// The iteration cap was hit or the iteration stalled numerically; the
    /// last iterate is returned.
    MaxIterations,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Variable values by name.
    pub values: BTreeMap<String, DMatrix<f64>>,
    /// The scalar unknowns the values were read from.
    pub x: DVector<f64>,
    pub objective_value: f64,
    pub kkt_residuals: KktResiduals,
    pub iterations: usize,
    /// For infeasible problems: the smallest uniform relaxation of all
    /// inequality constraints that restores feasibility, or the equality
    /// residual when the equalities alone are inconsistent.
    pub infeasibility: Option<f64>,
}

impl SdpSolution {
    pub fn value(&self, name: &str) -> &DMatrix<f64> {
        &self.values[name]
    }

    pub fn scalar(&self, name: &str) -> f64 {
        self.values[name][(0, 0)]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Relative accuracy for primal residual, dual residual and gap.
    pub tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// `τ/κ` below this ratio declares infeasibility.
    pub tau_kappa_ratio: f64,
    /// Compute the infeasibility measure by a relaxation solve.
    pub measure_infeasibility: bool,
    /// Print one line per iteration to standard error.
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 200,
            tol: 1e-9,
            step_fraction: 0.99,
            tau_kappa_ratio: 1e-8,
            measure_infeasibility: true,
            verbose: false,
        }
    }
}

/// Cone `R₊^lp × S^{d₁} × …` in `svec` coordinates.
#[derive(Debug, Clone)]
struct Cone {
    lp: usize,
    psd: Vec<usize>,
}

impl Cone {
    fn dim(&self) -> usize {
        self.lp + self.psd.iter().map(|d| d * (d + 1) / 2).sum::<usize>()
    }

    /// Barrier degree.
    fn degree(&self) -> usize {
        self.lp + self.psd.iter().sum::<usize>()
    }

    /// Offsets of the PSD blocks.
    fn blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.psd.iter().scan(self.lp, |off, &d| {
            let at = *off;
            *off += d * (d + 1) / 2;
            Some((at, d))
        })
    }

    fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim());
        e.rows_mut(0, self.lp).fill(1.0);
        for (off, d) in self.blocks() {
            e.rows_mut(off, d * (d + 1) / 2).copy_from(&svec(&DMatrix::identity(d, d)));
        }
        e
    }

    /// Minimum eigenvalue over all cone blocks.
    fn min_eig(&self, v: &DVector<f64>) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.lp {
            m = m.min(v[i]);
        }
        for (off, d) in self.blocks() {
            let block = smat(&v.as_slice()[off..off + d * (d + 1) / 2], d);
            m = m.min(crate::linalg::min_eigenvalue(&block));
        }
        m
    }
}

/// Conic form after equality elimination.
struct Conic {
    c: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    cone: Cone,
    x0: DVector<f64>,
    null: DMatrix<f64>,
}

/// Equality-eliminated conic form, or the equality residual when the
/// equalities are inconsistent.
fn compile(problem: &SdpProblem) -> Result<Conic, f64> {
    let n = problem.num_scalars();
    let coeffs = |e: &LinExpr, i: usize, j: usize| -> DVector<f64> {
        let mut row = DVector::zeros(n);
        for (&k, m) in &e.terms {
            row[k] = m[(i, j)];
        }
        row
    };

    // Equalities.
    let mut a_rows: Vec<DVector<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    for c in problem.equalities() {
        let (r, cc) = c.expr.shape();
        for i in 0..r {
            for j in 0..cc {
                a_rows.push(coeffs(&c.expr, i, j));
                b.push(-c.expr.constant[(i, j)]);
            }
        }
    }
    let (x0, null) = if a_rows.is_empty() {
        (DVector::zeros(n), DMatrix::identity(n, n))
    } else {
        let a = DMatrix::from_fn(a_rows.len(), n, |i, j| a_rows[i][j]);
        let bv = DMatrix::from_column_slice(b.len(), 1, &b);
        let x0 = lstsq(&a, &bv).ok_or(f64::INFINITY)?.column(0).into_owned();
        let res = max_abs(&(&a * DMatrix::from_column_slice(n, 1, x0.as_slice()) - &bv));
        let scale = max_abs(&bv).max(max_abs(&a)).max(1.0);
        if res > 1e-10 * scale {
            return Err(res);
        }
        // Null space from the right singular vectors of A.
        let svd = nalgebra::linalg::SVD::new(
            if a.nrows() < n { crate::linalg::vstack(&[a.clone(), DMatrix::zeros(n - a.nrows(), n)]) } else { a.clone() },
            false,
            true,
        );
        let v_t = svd.v_t.expect("requested V");
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let null_idx: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] <= 1e-10 * smax.max(1e-300)).collect();
        let mut null = DMatrix::zeros(n, null_idx.len());
        for (c, &i) in null_idx.iter().enumerate() {
            null.set_column(c, &v_t.row(i).transpose());
        }
        (x0, null)
    };

    // Inequalities: LP rows first, then PSD blocks.
    let mut margins = problem.bound_margins();
    margins.extend(problem.margins().iter().cloned());
    let psd = problem.psd_blocks();
    let cone = Cone {
        lp: margins.len(),
        psd: psd.iter().map(|c| c.expr.shape().0).collect(),
    };
    let dim = cone.dim();
    let mut g = DMatrix::zeros(dim, n);
    let mut h = DVector::zeros(dim);
    for (r, m) in margins.iter().enumerate() {
        for (&k, t) in &m.expr.terms {
            g[(r, k)] = -t[(0, 0)];
        }
        h[r] = m.expr.constant[(0, 0)] - m.bound;
    }
    for ((off, d), c) in cone.blocks().zip(psd) {
        let len = d * (d + 1) / 2;
        h.rows_mut(off, len).copy_from(&svec(&c.expr.constant));
        for (&k, t) in &c.expr.terms {
            g.view_mut((off, k), (len, 1)).copy_from(&(-svec(t)));
        }
    }
    let obj = problem.objective();
    let mut c_full = DVector::zeros(n);
    for (&k, t) in &obj.terms {
        c_full[k] = t[(0, 0)];
    }
    let h = h - &g * &x0;
    let g = &g * &null;
    let c = null.transpose() * c_full;
    Ok(Conic {
        c,
        g,
        h,
        cone,
        x0,
        null,
    })
}

/// Nesterov–Todd scaling of one PSD block: `RᵀWR = Λ = R⁻¹SR⁻ᵀ`.
struct PsdScaling {
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    lambda: DVector<f64>,
}

struct Scaling {
    /// LP part: `d = √(s/w)`, `λ = √(s·w)`.
    d: DVector<f64>,
    lp_lambda: DVector<f64>,
    psd: Vec<PsdScaling>,
}

fn nt_scaling(cone: &Cone, s: &DVector<f64>, w: &DVector<f64>) -> Option<Scaling> {
    let mut d = DVector::zeros(cone.lp);
    let mut lp_lambda = DVector::zeros(cone.lp);
    for i in 0..cone.lp {
        if !(s[i] > 0.0 && w[i] > 0.0) {
            return None;
        }
        d[i] = (s[i] / w[i]).sqrt();
        lp_lambda[i] = (s[i] * w[i]).sqrt();
    }
    let mut psd = Vec::new();
    for (off, dim) in cone.blocks() {
        let len = dim * (dim + 1) / 2;
        let sm = smat(&s.as_slice()[off..off + len], dim);
        let wm = smat(&w.as_slice()[off..off + len], dim);
        let l1 = sm.cholesky()?.l();
        let l2 = wm.cholesky()?.l();
        let svd = (l2.transpose() * &l1).svd(true, true);
        let lambda = svd.singular_values.clone();
        if lambda.iter().any(|&l| !(l > 0.0)) {
            return None;
        }
        let v = svd.v_t?.transpose();
        let inv_sqrt = DMatrix::from_diagonal(&lambda.map(|l| 1.0 / l.sqrt()));
        let sqrt = DMatrix::from_diagonal(&lambda.map(f64::sqrt));
        let r = &l1 * &v * inv_sqrt;
        let l1_inv = l1.solve_lower_triangular(&DMatrix::identity(dim, dim))?;
        let r_inv = sqrt * v.transpose() * l1_inv;
        psd.push(PsdScaling { r, r_inv, lambda });
    }
    Some(Scaling { d, lp_lambda, psd })
}

impl Scaling {
    /// Applies a congruence per block: LP entries are multiplied by
    /// `lp(dᵢ)` and PSD blocks map `U ↦ M U Mᵀ` with `M = psd(scaling)`.
    fn apply(
        &self,
        cone: &Cone,
        v: &DVector<f64>,
        lp: impl Fn(f64) -> f64,
        psd: impl Fn(&PsdScaling) -> DMatrix<f64>,
    ) -> DVector<f64> {
        let mut out = v.clone();
        for i in 0..cone.lp {
            out[i] *= lp(self.d[i]);
        }
        for ((off, dim), sc) in cone.blocks().zip(&self.psd) {
            let len = dim * (dim + 1) / 2;
            let u = smat(&v.as_slice()[off..off + len], dim);
            let m = psd(sc);
            out.rows_mut(off, len).copy_from(&svec(&(&m * u * m.transpose())));
        }
        out
    }

    /// `W⁻ᵀ v`: `v/d` and `R⁻¹ V R⁻ᵀ`.
    fn w_inv_t(&self, cone: &Cone, v: &DVector<f64>) -> DVector<f64> {
        self.apply(cone, v, |d| 1.0 / d, |sc| sc.r_inv.clone())
    }

    /// `W⁻¹ v`: `v/d` and `R⁻ᵀ V R⁻¹`.
    fn w_inv(&self, cone: &Cone, v: &DVector<f64>) -> DVector<f64> {
        self.apply(cone, v, |d| 1.0 / d, |sc| sc.r_inv.transpose())
    }

    /// `Wᵀ v`: `d·v` and `R V Rᵀ`.
    fn w_t(&self, cone: &Cone, v: &DVector<f64>) -> DVector<f64> {
        self.apply(cone, v, |d| d, |sc| sc.r.clone())
    }

    /// The scaled point `λ` as a cone vector.
    fn lambda(&self, cone: &Cone) -> DVector<f64> {
        let mut out = DVector::zeros(cone.dim());
        out.rows_mut(0, cone.lp).copy_from(&self.lp_lambda);
        for ((off, dim), sc) in cone.blocks().zip(&self.psd) {
            out.rows_mut(off, dim * (dim + 1) / 2)
                .copy_from(&svec(&DMatrix::from_diagonal(&sc.lambda)));
        }
        out
    }

    /// Solves `λ ∘ u = r` for `u`.
    fn lambda_inv_product(&self, cone: &Cone, r: &DVector<f64>) -> DVector<f64> {
        let mut out = r.clone();
        for i in 0..cone.lp {
            out[i] /= self.lp_lambda[i];
        }
        for ((off, dim), sc) in cone.blocks().zip(&self.psd) {
            let len = dim * (dim + 1) / 2;
            let rm = smat(&r.as_slice()[off..off + len], dim);
            let u = DMatrix::from_fn(dim, dim, |i, j| 2.0 * rm[(i, j)] / (sc.lambda[i] + sc.lambda[j]));
            out.rows_mut(off, len).copy_from(&svec(&u));
        }
        out
    }

    /// Largest `α ≤ cap` with `λ + α·v` in the cone.
    fn max_step(&self, cone: &Cone, v: &DVector<f64>, cap: f64) -> f64 {
        let mut alpha = cap;
        for i in 0..cone.lp {
            if v[i] < 0.0 {
                alpha = alpha.min(-self.lp_lambda[i] / v[i]);
            }
        }
        for ((off, dim), sc) in cone.blocks().zip(&self.psd) {
            let len = dim * (dim + 1) / 2;
            let vm = smat(&v.as_slice()[off..off + len], dim);
            let inv_sqrt = sc.lambda.map(|l| 1.0 / l.sqrt());
            let t = DMatrix::from_fn(dim, dim, |i, j| vm[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
            let lmin = crate::linalg::min_eigenvalue(&symmetrize(&t));
            if lmin < 0.0 {
                alpha = alpha.min(-1.0 / lmin);
            }
        }
        alpha
    }
}

/// Jordan product `u ∘ v`.
fn jordan(cone: &Cone, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(cone.dim());
    for i in 0..cone.lp {
        out[i] = u[i] * v[i];
    }
    for (off, dim) in cone.blocks() {
        let len = dim * (dim + 1) / 2;
        let um = smat(&u.as_slice()[off..off + len], dim);
        let vm = smat(&v.as_slice()[off..off + len], dim);
        out.rows_mut(off, len).copy_from(&svec(&((&um * &vm + &vm * &um) * 0.5)));
    }
    out
}

/// Factorization of the reduced system `Ĝᵀ Ĝ` with `Ĝ = W⁻ᵀG`.
struct Kkt {
    g_hat: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Kkt {
    fn new(g_hat: DMatrix<f64>) -> Option<Self> {
        let h = g_hat.transpose() * &g_hat;
        let scale = (0..h.nrows()).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let mut reg = 0.0;
        for _ in 0..8 {
            let mut hr = h.clone();
            for i in 0..hr.nrows() {
                hr[(i, i)] += reg;
            }
            if let Some(chol) = hr.cholesky() {
                return Some(Kkt { g_hat, chol });
            }
            reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
        }
        None
    }

    /// Solves `[0 Gᵀ; G −WᵀW] [x; w] = [bx; bw]` given `b̂w = W⁻ᵀbw`;
    /// returns `x` and the scaled `W w`.
    fn solve(&self, bx: &DVector<f64>, bw_hat: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let rhs = bx + self.g_hat.transpose() * bw_hat;
        let mut dx = self.chol.solve(&rhs);
        // Two rounds of iterative refinement on the normal equations recover
        // the accuracy lost to squaring the conditioning of Ĝ.
        for _ in 0..2 {
            let r = &rhs - self.g_hat.transpose() * (&self.g_hat * &dx);
            dx += self.chol.solve(&r);
        }
        let dw = &self.g_hat * &dx - bw_hat;
        (dx, dw)
    }
}

/// Solves the problem. The returned solution always carries the last
/// iterate; only `Optimal` results are certified.
pub fn solve_sdp(problem: &SdpProblem) -> SdpSolution {
    solve_sdp_with(problem, &SolverOptions::default())
}

pub fn solve_sdp_with(problem: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    let issues = problem.validate();
    assert!(issues.is_empty(), "malformed SDP: {issues:?}");
    let n = problem.num_scalars();
    let conic = match compile(problem) {
        Ok(c) => c,
        Err(res) => {
            return finish(problem, SdpStatus::Infeasible, DVector::zeros(n), KktResiduals::default(), 0, Some(res));
        }
    };

    let nz = conic.c.len();
    let cone = &conic.cone;
    if nz == 0 || cone.dim() == 0 {
        return solve_degenerate(problem, &conic, opts);
    }

    let (mut z, mut s, mut w) = (DVector::zeros(nz), cone.identity(), cone.identity());
    let (mut tau, mut kappa) = (1.0_f64, 1.0_f64);
    let degree = cone.degree() as f64;
    let c = &conic.c;
    let g = &conic.g;
    let h = &conic.h;
    let cnorm = c.norm().max(1.0);
    let hnorm = h.norm().max(1.0);
    let mut status = SdpStatus::MaxIterations;
    let mut resid = KktResiduals::default();
    let mut iterations = 0;
    // Recomputing the scaling from scratch loses accuracy once the iterates
    // are nearly complementary, so the best iterate seen is remembered.
    let mut best: Option<(f64, DVector<f64>, f64, KktResiduals)> = None;

    for iter in 0..=opts.max_iterations {
        iterations = iter;
        let r_x = g.transpose() * &w + c * tau;
        let r_z = g * &z + &s - h * tau;
        let cz = c.dot(&z);
        let hw = h.dot(&w);
        let r_t = kappa + cz + hw;
        let gap = s.dot(&w);
        let mu = (gap + tau * kappa) / (degree + 1.0);

        let pcost = cz / tau;
        let dcost = -hw / tau;
        resid = KktResiduals {
            primal: r_z.norm() / tau / hnorm,
            dual: r_x.norm() / tau / cnorm,
            gap: gap / (tau * tau),
        };
        let rel_gap = resid.gap / pcost.abs().max(dcost.abs()).max(1.0);
        if opts.verbose {
            eprintln!(
                "{iter:3} pcost {pcost:+.9e} dcost {dcost:+.9e} pres {:.2e} dres {:.2e} gap {:.2e} tau {tau:.2e} kappa {kappa:.2e}",
                resid.primal, resid.dual, resid.gap
            );
        }
        if resid.primal <= opts.tol && resid.dual <= opts.tol && rel_gap <= opts.tol {
            status = SdpStatus::Optimal;
            break;
        }
        let merit = resid.primal.max(resid.dual).max(rel_gap);
        match &best {
            Some((m, ..)) if merit >= *m => {
                if *m <= SDP_TOL && merit > 1e3 * *m {
                    break;
                }
            }
            _ => best = Some((merit, z.clone(), tau, resid)),
        }
        // Infeasibility certificates: a dual ray with hᵀw < 0 and Gᵀw ≈ 0
        // proves primal infeasibility; a primal ray with cᵀz < 0 proves
        // unboundedness.
        if hw < 0.0 && (g.transpose() * &w).norm() / cnorm / -hw <= opts.tol {
            status = SdpStatus::Infeasible;
            break;
        }
        if cz < 0.0 && (g * &z + &s).norm() / hnorm / -cz <= opts.tol {
            status = SdpStatus::Unbounded;
            break;
        }
        if tau / kappa < opts.tau_kappa_ratio {
            status = if hw < 0.0 || cz >= 0.0 { SdpStatus::Infeasible } else { SdpStatus::Unbounded };
            break;
        }
        if iter == opts.max_iterations {
            break;
        }

        let Some(sc) = nt_scaling(cone, &s, &w) else { break };
        let mut g_hat = DMatrix::zeros(g.nrows(), nz);
        for j in 0..nz {
            g_hat.set_column(j, &sc.w_inv_t(cone, &g.column(j).into_owned()));
        }
        let Some(kkt) = Kkt::new(g_hat) else { break };
        let lambda = sc.lambda(cone);
        let h_hat = sc.w_inv_t(cone, h);
        let r_z_hat = sc.w_inv_t(cone, &r_z);

        // Direction for the τ column: K [z1; w1] = [−c; h].
        let (z1, w1) = kkt.solve(&(-c), &h_hat);
        let denom = -w1.norm_squared() - kappa / tau;

        // Solves for one right-hand side; `rc` is the complementarity target
        // in scaled space and `rtk` the τκ target.
        let direction = |eta: f64, rc: &DVector<f64>, rtk: f64| {
            let rc_tilde = sc.lambda_inv_product(cone, rc);
            let bx = -&r_x * eta;
            let bw_hat = -&r_z_hat * eta - &rc_tilde;
            let (z2, w2) = kkt.solve(&bx, &bw_hat);
            let rhs = -eta * r_t - rtk / tau - c.dot(&z2) - h_hat.dot(&w2);
            let dtau = rhs / denom;
            let dz = &z2 + &z1 * dtau;
            let dw = &w2 + &w1 * dtau;
            let ds = &rc_tilde - &dw;
            let dkappa = (rtk - kappa * dtau) / tau;
            (dz, ds, dw, dtau, dkappa)
        };
        let step_len = |ds: &DVector<f64>, dw: &DVector<f64>, dtau: f64, dkappa: f64| {
            let mut a = sc.max_step(cone, ds, f64::INFINITY);
            a = sc.max_step(cone, dw, a);
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // Predictor.
        let rc_aff = -jordan(cone, &lambda, &lambda);
        let (_, ds_a, dw_a, dtau_a, dkappa_a) = direction(1.0, &rc_aff, -tau * kappa);
        let alpha_aff = step_len(&ds_a, &dw_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // Corrector.
        let rc = cone.identity() * (sigma * mu) - jordan(cone, &lambda, &lambda) - jordan(cone, &ds_a, &dw_a);
        let rtk = sigma * mu - tau * kappa - dtau_a * dkappa_a;
        let (dz, ds, dw, dtau, dkappa) = direction(1.0 - sigma, &rc, rtk);
        let alpha = (opts.step_fraction * step_len(&ds, &dw, dtau, dkappa)).min(1.0);

        z += &dz * alpha;
        s += sc.w_t(cone, &ds) * alpha;
        w += sc.w_inv(cone, &dw) * alpha;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        // Rounding can push an iterate onto the boundary; stop there.
        if cone.min_eig(&s) <= 0.0 || cone.min_eig(&w) <= 0.0 || !(tau > 0.0) || !(kappa > 0.0) {
            break;
        }
    }

    // A stalled iteration close to optimality still meets the looser
    // acceptance tolerance.
    if status == SdpStatus::MaxIterations {
        if let Some((merit, zb, tb, rb)) = best {
            z = zb;
            tau = tb;
            resid = rb;
            if merit <= SDP_TOL {
                status = SdpStatus::Optimal;
            }
        }
    }

    let x = &conic.x0 + &conic.null * (&z / tau);
    let measure = if status == SdpStatus::Infeasible && opts.measure_infeasibility {
        Some(infeasibility_measure(problem))
    } else {
        None
    };
    finish(problem, status, x, resid, iterations, measure)
}

/// All unknowns are fixed by the equalities (or there is no inequality):
/// the only candidate is the particular solution.
fn solve_degenerate(problem: &SdpProblem, conic: &Conic, opts: &SolverOptions) -> SdpSolution {
    let nz = conic.c.len();
    if conic.cone.dim() > 0 {
        let slack_min = conic.cone.min_eig(&conic.h);
        let status = if slack_min >= -SDP_TOL { SdpStatus::Optimal } else { SdpStatus::Infeasible };
        let measure = (status == SdpStatus::Infeasible && opts.measure_infeasibility).then_some(-slack_min);
        return finish(problem, status, conic.x0.clone(), KktResiduals::default(), 0, measure);
    }
    // No inequalities: bounded only if the objective is constant on the
    // affine set.
    let status = if nz == 0 || conic.c.norm() <= SDP_TOL { SdpStatus::Optimal } else { SdpStatus::Unbounded };
    finish(problem, status, conic.x0.clone(), KktResiduals::default(), 0, None)
}

fn finish(
    problem: &SdpProblem,
    status: SdpStatus,
    x: DVector<f64>,
    kkt_residuals: KktResiduals,
    iterations: usize,
    infeasibility: Option<f64>,
) -> SdpSolution {
    let values = problem
        .vars()
        .iter()
        .map(|v| (v.name.clone(), problem.value(v, &x)))
        .collect();
    let objective_value = problem.objective().eval_scalar(&x);
    SdpSolution {
        status,
        values,
        x,
        objective_value,
        kkt_residuals,
        iterations,
        infeasibility,
    }
}

/// Smallest `t ≥ −1` such that every PSD block plus `tI` and every margin
/// plus `t` becomes feasible, with equalities kept exact.
fn infeasibility_measure(problem: &SdpProblem) -> f64 {
    let mut relaxed = SdpProblem::new();
    for v in problem.vars() {
        relaxed.add_var(&v.name, v.kind);
    }
    let t = relaxed.add_var("__relaxation", VarKind::Scalar);
    let t_expr = relaxed.expr(t);
    for c in problem.equalities() {
        relaxed.add_eq(&c.label, c.expr.clone());
    }
    for c in problem.psd_blocks() {
        let d = c.expr.shape().0;
        let shift = LinExpr {
            constant: DMatrix::zeros(d, d),
            terms: t_expr.terms.iter().map(|(&k, _)| (k, DMatrix::identity(d, d))).collect(),
        };
        relaxed.add_psd(&c.label, &c.expr + &shift);
    }
    for m in problem.bound_margins().iter().chain(problem.margins()) {
        relaxed.add_ge(&m.label, &m.expr + &t_expr, m.bound);
    }
    relaxed.add_ge("relaxation floor", t_expr.clone(), -1.0);
    relaxed.minimize(t_expr);
    let opts = SolverOptions {
        measure_infeasibility: false,
        ..SolverOptions::default()
    };
    let sol = solve_sdp_with(&relaxed, &opts);
    match sol.status {
        SdpStatus::Optimal | SdpStatus::MaxIterations => sol.objective_value.max(0.0),
        _ => f64::INFINITY,
    }
}
