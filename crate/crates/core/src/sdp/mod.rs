//! Small dense semidefinite programs.
//!
//! A problem is declared through named decision variables (scalars,
//! symmetric matrices, diagonal matrices) and affine matrix expressions over
//! them. Constraints are equalities, PSD blocks and scalar lower bounds
//! ("margins"); the objective is a scalar expression to minimize.
//!
//! Internally every variable is a slice of one vector of scalar unknowns. A
//! symmetric `d×d` variable owns `d(d+1)/2` unknowns (its upper triangle), a
//! diagonal one owns `d`.

pub mod check;
pub mod solver;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

pub use check::{check_solution, CheckReport};
pub use solver::{solve_sdp, KktResiduals, SdpSolution, SdpStatus, SolverOptions};

/// Solver accuracy target and the tolerance used by result checks.
pub const SDP_TOL: f64 = 1e-8;
/// Margin that realizes strict inequalities `g > 0` as `g ≥ EPS_STRICT`.
pub const EPS_STRICT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Scalar,
    Symmetric(usize),
    Diagonal(usize),
}

impl VarKind {
    /// Number of scalar unknowns owned by the variable.
    pub fn dof(self) -> usize {
        match self {
            VarKind::Scalar => 1,
            VarKind::Symmetric(d) => d * (d + 1) / 2,
            VarKind::Diagonal(d) => d,
        }
    }

    pub fn shape(self) -> (usize, usize) {
        match self {
            VarKind::Scalar => (1, 1),
            VarKind::Symmetric(d) | VarKind::Diagonal(d) => (d, d),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
    /// Elementwise lower bound on a scalar or on the diagonal entries of a
    /// diagonal variable.
    pub lower: Option<f64>,
    pub(crate) offset: usize,
}

/// Handle to a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    kind: VarKind,
    offset: usize,
}

impl Var {
    pub fn kind(&self) -> VarKind {
        self.kind
    }
}

/// Affine matrix expression `C + Σₖ xₖ Mₖ` over the scalar unknowns `xₖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinExpr {
    pub constant: DMatrix<f64>,
    pub terms: BTreeMap<usize, DMatrix<f64>>,
}

impl LinExpr {
    pub fn constant(m: DMatrix<f64>) -> Self {
        LinExpr {
            constant: m,
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar_constant(v: f64) -> Self {
        Self::constant(DMatrix::from_element(1, 1, v))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    fn map(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        LinExpr {
            constant: f(&self.constant),
            terms: self.terms.iter().map(|(&k, m)| (k, f(m))).collect(),
        }
    }

    /// `M · self`.
    pub fn lmul(&self, m: &DMatrix<f64>) -> Self {
        self.map(|x| m * x)
    }

    /// `self · M`.
    pub fn rmul(&self, m: &DMatrix<f64>) -> Self {
        self.map(|x| x * m)
    }

    pub fn transpose(&self) -> Self {
        self.map(|x| x.transpose())
    }

    /// Symmetric part `(E + Eᵀ) / 2`.
    pub fn sym(&self) -> Self {
        self.map(|x| (x + x.transpose()) * 0.5)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| x * s)
    }

    pub fn add_constant(&self, m: &DMatrix<f64>) -> Self {
        let mut out = self.clone();
        out.constant += m;
        out
    }

    pub fn trace(&self) -> Self {
        self.map(|x| DMatrix::from_element(1, 1, x.trace()))
    }

    /// A scalar expression multiplied by a constant matrix.
    pub fn times_matrix(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(self.shape(), (1, 1), "times_matrix needs a scalar expression");
        self.map(|x| m * x[(0, 0)])
    }

    pub fn entry(&self, i: usize, j: usize) -> Self {
        self.map(|x| DMatrix::from_element(1, 1, x[(i, j)]))
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        self.map(|x| x.view((r0, c0), (rows, cols)).into_owned())
    }

    /// Block-diagonal arrangement of the given expressions.
    pub fn block_diag(parts: &[LinExpr]) -> Self {
        let rows: usize = parts.iter().map(|p| p.shape().0).sum();
        let cols: usize = parts.iter().map(|p| p.shape().1).sum();
        Self::place(rows, cols, parts.iter().scan((0, 0), |pos, p| {
            let at = *pos;
            pos.0 += p.shape().0;
            pos.1 += p.shape().1;
            Some((at, p))
        }))
    }

    /// Horizontal concatenation.
    pub fn hstack(parts: &[LinExpr]) -> Self {
        let rows = parts.first().map_or(0, |p| p.shape().0);
        let cols: usize = parts.iter().map(|p| p.shape().1).sum();
        Self::place(rows, cols, parts.iter().scan(0, |c, p| {
            let at = (0, *c);
            *c += p.shape().1;
            Some((at, p))
        }))
    }

    /// Vertical concatenation.
    pub fn vstack(parts: &[LinExpr]) -> Self {
        let cols = parts.first().map_or(0, |p| p.shape().1);
        let rows: usize = parts.iter().map(|p| p.shape().0).sum();
        Self::place(rows, cols, parts.iter().scan(0, |r, p| {
            let at = (*r, 0);
            *r += p.shape().0;
            Some((at, p))
        }))
    }

    fn place<'a>(rows: usize, cols: usize, parts: impl Iterator<Item = ((usize, usize), &'a LinExpr)>) -> Self {
        let mut out = LinExpr::zeros(rows, cols);
        for ((r, c), p) in parts {
            let shape = p.shape();
            out.constant.view_mut((r, c), shape).copy_from(&p.constant);
            for (&k, m) in &p.terms {
                out.terms
                    .entry(k)
                    .or_insert_with(|| DMatrix::zeros(rows, cols))
                    .view_mut((r, c), shape)
                    .copy_from(m);
            }
        }
        out
    }

    /// Value at the unknown vector `x`.
    pub fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (&k, m) in &self.terms {
            out += m * x[k];
        }
        out
    }

    /// Value of a 1×1 expression.
    pub fn eval_scalar(&self, x: &DVector<f64>) -> f64 {
        self.eval(x)[(0, 0)]
    }

    fn combine(&self, other: &LinExpr, sign: f64) -> LinExpr {
        assert_eq!(self.shape(), other.shape(), "expression shapes must agree");
        let mut out = self.clone();
        out.constant += &other.constant * sign;
        for (&k, m) in &other.terms {
            match out.terms.get_mut(&k) {
                Some(t) => *t += m * sign,
                None => {
                    out.terms.insert(k, m * sign);
                }
            }
        }
        out
    }
}

impl Add<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn add(self, rhs: &LinExpr) -> LinExpr {
        self.combine(rhs, 1.0)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(self, rhs: LinExpr) -> LinExpr {
        self.combine(&rhs, 1.0)
    }
}

impl Sub<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: &LinExpr) -> LinExpr {
        self.combine(rhs, -1.0)
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: LinExpr) -> LinExpr {
        self.combine(&rhs, -1.0)
    }
}

impl Neg for &LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scale(-1.0)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &LinExpr {
    type Output = LinExpr;
    fn mul(self, s: f64) -> LinExpr {
        self.scale(s)
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub label: String,
    pub expr: LinExpr,
}

/// Scalar inequality `expr ≥ bound`.
#[derive(Debug, Clone)]
pub struct Margin {
    pub label: String,
    pub expr: LinExpr,
    pub bound: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    vars: Vec<VarDecl>,
    num_scalars: usize,
    objective: Option<LinExpr>,
    eqs: Vec<Constraint>,
    psd: Vec<Constraint>,
    margins: Vec<Margin>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: &str, kind: VarKind) -> Var {
        self.add_var_bounded(name, kind, None)
    }

    /// Declares a variable whose scalar or diagonal entries are bounded below.
    pub fn add_var_bounded(&mut self, name: &str, kind: VarKind, lower: Option<f64>) -> Var {
        let var = Var {
            kind,
            offset: self.num_scalars,
        };
        self.vars.push(VarDecl {
            name: name.to_string(),
            kind,
            lower,
            offset: self.num_scalars,
        });
        self.num_scalars += kind.dof();
        var
    }

    pub fn vars(&self) -> &[VarDecl] {
        &self.vars
    }

    pub fn num_scalars(&self) -> usize {
        self.num_scalars
    }

    pub fn equalities(&self) -> &[Constraint] {
        &self.eqs
    }

    pub fn psd_blocks(&self) -> &[Constraint] {
        &self.psd
    }

    pub fn margins(&self) -> &[Margin] {
        &self.margins
    }

    pub fn objective(&self) -> LinExpr {
        self.objective.clone().unwrap_or_else(|| LinExpr::zeros(1, 1))
    }

    /// The variable as an expression of its own shape.
    pub fn expr(&self, var: Var) -> LinExpr {
        let (rows, cols) = var.kind.shape();
        let mut e = LinExpr::zeros(rows, cols);
        match var.kind {
            VarKind::Scalar => {
                e.terms.insert(var.offset, DMatrix::from_element(1, 1, 1.0));
            }
            VarKind::Diagonal(d) => {
                for i in 0..d {
                    let mut m = DMatrix::zeros(d, d);
                    m[(i, i)] = 1.0;
                    e.terms.insert(var.offset + i, m);
                }
            }
            VarKind::Symmetric(d) => {
                let mut k = var.offset;
                for j in 0..d {
                    for i in 0..=j {
                        let mut m = DMatrix::zeros(d, d);
                        m[(i, j)] = 1.0;
                        m[(j, i)] = 1.0;
                        e.terms.insert(k, m);
                        k += 1;
                    }
                }
            }
        }
        e
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        assert_eq!(objective.shape(), (1, 1), "objective must be scalar");
        self.objective = Some(objective);
    }

    /// Requires every entry of `expr` to vanish.
    pub fn add_eq(&mut self, label: &str, expr: LinExpr) {
        self.eqs.push(Constraint {
            label: label.to_string(),
            expr,
        });
    }

    /// Requires the square expression to be positive semi-definite.
    pub fn add_psd(&mut self, label: &str, expr: LinExpr) {
        self.psd.push(Constraint {
            label: label.to_string(),
            expr,
        });
    }

    /// Requires the scalar expression to be at least `bound`.
    pub fn add_ge(&mut self, label: &str, expr: LinExpr, bound: f64) {
        self.margins.push(Margin {
            label: label.to_string(),
            expr,
            bound,
        });
    }

    /// Realizes the strict inequality `expr > 0` as `expr ≥ EPS_STRICT`.
    pub fn add_strict(&mut self, label: &str, expr: LinExpr) {
        self.add_ge(label, expr, EPS_STRICT);
    }

    /// Scalar inequalities implied by declared lower bounds.
    pub(crate) fn bound_margins(&self) -> Vec<Margin> {
        let mut out = Vec::new();
        for decl in &self.vars {
            let Some(lb) = decl.lower else { continue };
            let var = Var {
                kind: decl.kind,
                offset: decl.offset,
            };
            let e = self.expr(var);
            match decl.kind {
                VarKind::Scalar => out.push(Margin {
                    label: format!("{} lower bound", decl.name),
                    expr: e,
                    bound: lb,
                }),
                VarKind::Diagonal(d) | VarKind::Symmetric(d) => {
                    for i in 0..d {
                        out.push(Margin {
                            label: format!("{}[{i},{i}] lower bound", decl.name),
                            expr: e.entry(i, i),
                            bound: lb,
                        });
                    }
                }
            }
        }
        out
    }

    /// Lists violated well-formedness invariants.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let in_range = |e: &LinExpr| e.terms.keys().all(|&k| k < self.num_scalars);
        let obj = self.objective();
        if !in_range(&obj) {
            out.push("objective references an undeclared unknown".to_string());
        }
        for c in &self.eqs {
            if !in_range(&c.expr) {
                out.push(format!("equality '{}' references an undeclared unknown", c.label));
            }
        }
        for c in &self.psd {
            let (r, cdim) = c.expr.shape();
            if r != cdim {
                out.push(format!("PSD block '{}' is not square ({r}x{cdim})", c.label));
                continue;
            }
            if !in_range(&c.expr) {
                out.push(format!("PSD block '{}' references an undeclared unknown", c.label));
            }
            let asym = std::iter::once(&c.expr.constant)
                .chain(c.expr.terms.values())
                .map(crate::linalg::asymmetry)
                .fold(0.0, f64::max);
            if asym > 1e-10 {
                out.push(format!("PSD block '{}' is not symmetric (asymmetry {asym:.3e})", c.label));
            }
        }
        for m in &self.margins {
            if m.expr.shape() != (1, 1) {
                out.push(format!("margin '{}' is not scalar", m.label));
            } else if !in_range(&m.expr) {
                out.push(format!("margin '{}' references an undeclared unknown", m.label));
            }
        }
        out
    }

    /// Value of a variable at the unknown vector `x`.
    pub fn value(&self, decl: &VarDecl, x: &DVector<f64>) -> DMatrix<f64> {
        let var = Var {
            kind: decl.kind,
            offset: decl.offset,
        };
        self.expr(var).eval(x)
    }

    /// Text dump for debugging. Format: one section per constraint family;
    /// each expression is printed as its constant matrix followed by one
    /// `x[k] * M` line per unknown, matrices written row by row with `;`
    /// separating rows.
    pub fn dump(&self) -> String {
        fn mat(m: &DMatrix<f64>) -> String {
            m.row_iter()
                .map(|r| r.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(" "))
                .collect::<Vec<_>>()
                .join("; ")
        }
        fn expr(out: &mut String, e: &LinExpr) {
            let _ = writeln!(out, "    const [{}]", mat(&e.constant));
            for (k, m) in &e.terms {
                let _ = writeln!(out, "    x[{k}] * [{}]", mat(m));
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "sdp-problem v1");
        let _ = writeln!(out, "unknowns {}", self.num_scalars);
        for v in &self.vars {
            let kind = match v.kind {
                VarKind::Scalar => "scalar".to_string(),
                VarKind::Symmetric(d) => format!("symmetric {d}"),
                VarKind::Diagonal(d) => format!("diagonal {d}"),
            };
            let lower = v.lower.map_or(String::new(), |l| format!(" lower {l:.17e}"));
            let _ = writeln!(out, "var {} {kind} offset {}{lower}", v.name, v.offset);
        }
        let _ = writeln!(out, "minimize");
        expr(&mut out, &self.objective());
        for c in &self.eqs {
            let _ = writeln!(out, "eq {}", c.label);
            expr(&mut out, &c.expr);
        }
        for c in &self.psd {
            let _ = writeln!(out, "psd {}", c.label);
            expr(&mut out, &c.expr);
        }
        for m in &self.margins {
            let _ = writeln!(out, "ge {} {:.17e}", m.label, m.bound);
            expr(&mut out, &m.expr);
        }
        out
    }
}

/// Lower-triangular column-wise vectorization with off-diagonal entries
/// scaled by √2, so that `svec(A)·svec(B) = tr(AB)` for symmetric `A`, `B`.
pub fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    let mut v = DVector::zeros(d * (d + 1) / 2);
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            v[k] = if i == j { m[(i, i)] } else { std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]) };
            k += 1;
        }
    }
    v
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_round_trip_and_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.0, 0.0, 1.0, -3.0]);
        assert!((smat(svec(&a).as_slice(), 3) - &a).abs().max() < 1e-14);
        let ip = svec(&a).dot(&svec(&b));
        assert!((ip - (&a * &b).trace()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_variable_expression() {
        let mut p = SdpProblem::new();
        let x = p.add_var("X", VarKind::Symmetric(2));
        let e = p.expr(x);
        let v = e.eval(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert_eq!(v, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
    }

    #[test]
    fn block_diag_places_terms() {
        let mut p = SdpProblem::new();
        let a = p.add_var("a", VarKind::Scalar);
        let b = p.add_var("b", VarKind::Diagonal(2));
        let e = LinExpr::block_diag(&[p.expr(a), p.expr(b)]);
        let v = e.eval(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert_eq!(v, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])));
    }

    #[test]
    fn validation_flags_bad_blocks() {
        let mut p = SdpProblem::new();
        let x = p.add_var("x", VarKind::Scalar);
        p.add_psd("rect", LinExpr::zeros(2, 3));
        p.add_psd("asym", LinExpr::constant(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])));
        p.add_ge("ok", p.expr(x), 0.0);
        assert_eq!(p.validate().len(), 2);
    }
}
