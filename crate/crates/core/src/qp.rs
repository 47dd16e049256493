//! First-order operator-splitting solver for convex quadratic programs.
//!
//! Problems are rewritten as `min ½xᵀPx + qᵀx  s.t. l ≤ Ax ≤ u` where the
//! rows of A are the variable boxes followed by the linear constraints.
//! The splitting iteration with over-relaxation is
//!
//! ```text
//!   x⁺ = (P + σI + AᵀRA)⁻¹ (σx − q + Aᵀ(Rz − y))
//!   z⁺ = Π[l,u](α Ax⁺ + (1−α)z + R⁻¹y)
//!   y⁺ = y + R(α Ax⁺ + (1−α)z − z⁺)
//! ```
//!
//! with a diagonal penalty R (equality rows weighted up). The KKT matrix is
//! factored once and reused across solves that only change bounds, which is
//! what branch-and-bound nodes do. Optimal solutions can be polished by an
//! exact KKT solve on the active set.

use thiserror::Error;

use crate::ir::{ConvexProgram, Sense};

#[derive(Debug, Error)]
pub enum QpError {
    #[error("non-convex input: {0}")]
    NonConvexInput(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QpStatus {
    Optimal,
    PrimalInfeasible,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct QpResult {
    pub status: QpStatus,
    pub x: Vec<f64>,
    /// Row duals: variable boxes first, then constraints.
    pub y: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Infeasibility certificate (δy) when status is PrimalInfeasible.
    pub certificate: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct QpWarmStart {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct QpTols {
    pub eps_abs: f64,
    pub eps_rel: f64,
}

impl Default for QpTols {
    fn default() -> Self {
        QpTols { eps_abs: 1e-5, eps_rel: 1e-5 }
    }
}

const SIGMA: f64 = 1e-6;
const ALPHA: f64 = 1.6;
const EQ_WEIGHT: f64 = 1e3;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const EPS_PINF: f64 = 1e-7;

// ---------------------------------------------------------------------------
// dense linear algebra
// ---------------------------------------------------------------------------

/// In-place Cholesky of a dense symmetric matrix stored row-major.
/// Returns false on a non-positive pivot.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    true
}

fn chol_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= l[k * n + i] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Dense LU with partial pivoting; solves in place. Returns false if singular.
fn lu_solve(a: &mut [f64], n: usize, b: &mut [f64]) -> bool {
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = a[piv[k] * n + k].abs();
        for i in (k + 1)..n {
            let v = a[piv[i] * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best < 1e-14 {
            return false;
        }
        piv.swap(k, p);
        let pk = piv[k];
        for i in (k + 1)..n {
            let pi = piv[i];
            let f = a[pi * n + k] / a[pk * n + k];
            a[pi * n + k] = f;
            for j in (k + 1)..n {
                a[pi * n + j] -= f * a[pk * n + j];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut v = b[piv[i]];
        for k in 0..i {
            v -= a[piv[i] * n + k] * x[k];
        }
        x[i] = v;
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in (i + 1)..n {
            v -= a[piv[i] * n + k] * x[k];
        }
        x[i] = v / a[piv[i] * n + i];
    }
    b.copy_from_slice(&x);
    true
}

// ---------------------------------------------------------------------------
// engine
// ---------------------------------------------------------------------------

/// Reusable solver state for one program. Bounds may change per solve
/// (branch-and-bound fixes binaries through them) without refactoring.
pub struct QpEngine {
    n: usize,
    m: usize,
    p_mat: Vec<f64>, // dense symmetric n×n
    q: Vec<f64>,
    obj_const: f64,
    rows: Vec<Vec<(usize, f64)>>,
    row_weight: Vec<f64>, // 1 for inequalities, EQ_WEIGHT for equalities
    base_l: Vec<f64>,
    base_u: Vec<f64>,
    rho: f64,
    kkt: Vec<f64>, // Cholesky factor of P + σI + AᵀRA at current rho
}

impl QpEngine {
    pub fn new(program: &ConvexProgram) -> Result<Self, QpError> {
        let n = program.variables.len();
        for c in &program.constraints {
            if !c.quad_terms.is_empty() {
                return Err(QpError::NonConvexInput(format!(
                    "constraint `{}` is not linear",
                    c.tag
                )));
            }
        }
        // f(x) = ½xᵀPx + qᵀx + c, with P assembled from c_ij·x_i·x_j terms
        let mut p_mat = vec![0.0; n * n];
        let mut q = vec![0.0; n];
        for &(c, i, j) in &program.objective.quad {
            if i == j {
                p_mat[i * n + i] += 2.0 * c;
            } else {
                p_mat[i * n + j] += c;
                p_mat[j * n + i] += c;
            }
        }
        for &(c, i) in &program.objective.linear {
            q[i] += c;
        }
        // PSD check (tiny shift tolerates semidefinite objectives)
        let mut test = p_mat.clone();
        for i in 0..n {
            test[i * n + i] += 1e-9 * (1.0 + p_mat[i * n + i].abs());
        }
        if !cholesky(&mut test, n) {
            return Err(QpError::NonConvexInput("objective is not PSD".into()));
        }

        let mut rows = Vec::with_capacity(n + program.constraints.len());
        let mut row_weight = Vec::new();
        let mut base_l = Vec::new();
        let mut base_u = Vec::new();
        for (i, v) in program.variables.iter().enumerate() {
            rows.push(vec![(i, 1.0)]);
            row_weight.push(1.0);
            base_l.push(v.lo);
            base_u.push(v.hi);
        }
        for c in &program.constraints {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(c.terms.len());
            for &(coef, i) in &c.terms {
                match row.iter_mut().find(|(j, _)| *j == i) {
                    Some(e) => e.1 += coef,
                    None => row.push((i, coef)),
                }
            }
            rows.push(row);
            match c.sense {
                Sense::Le => {
                    row_weight.push(1.0);
                    base_l.push(f64::NEG_INFINITY);
                    base_u.push(c.rhs);
                }
                Sense::Eq => {
                    row_weight.push(EQ_WEIGHT);
                    base_l.push(c.rhs);
                    base_u.push(c.rhs);
                }
            }
        }
        let m = rows.len();
        let mut engine = QpEngine {
            n,
            m,
            p_mat,
            q,
            obj_const: program.objective.constant,
            rows,
            row_weight,
            base_l,
            base_u,
            rho: 1.0,
            kkt: Vec::new(),
        };
        engine.refactor();
        Ok(engine)
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn base_bounds(&self) -> (&[f64], &[f64]) {
        (&self.base_l, &self.base_u)
    }

    fn refactor(&mut self) {
        let n = self.n;
        let mut h = self.p_mat.clone();
        for i in 0..n {
            h[i * n + i] += SIGMA;
        }
        for (r, row) in self.rows.iter().enumerate() {
            let w = self.rho * self.row_weight[r];
            for &(i, ai) in row {
                for &(j, aj) in row {
                    h[i * n + j] += w * ai * aj;
                }
            }
        }
        assert!(cholesky(&mut h, n), "KKT matrix must be positive definite");
        self.kkt = h;
    }

    fn a_mul(&self, x: &[f64], out: &mut [f64]) {
        for (r, row) in self.rows.iter().enumerate() {
            out[r] = row.iter().map(|&(i, a)| a * x[i]).sum();
        }
    }

    fn at_mul(&self, v: &[f64], out: &mut [f64]) {
        for g in out.iter_mut() {
            *g = 0.0;
        }
        for (r, row) in self.rows.iter().enumerate() {
            let vr = v[r];
            if vr != 0.0 {
                for &(i, a) in row {
                    out[i] += a * vr;
                }
            }
        }
    }

    fn p_mul(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.p_mat[i * n..(i + 1) * n];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; self.n];
        self.p_mul(x, &mut px);
        let mut v = self.obj_const;
        for i in 0..self.n {
            v += 0.5 * px[i] * x[i] + self.q[i] * x[i];
        }
        v
    }

    /// Solves with optional variable-bound overrides and warm start.
    /// `polish` runs an exact active-set KKT solve after convergence.
    pub fn solve(
        &mut self,
        var_bounds: Option<&[(f64, f64)]>,
        warm: Option<&QpWarmStart>,
        max_iter: usize,
        tols: QpTols,
        polish: bool,
    ) -> QpResult {
        let (n, m) = (self.n, self.m);
        let mut l = self.base_l.clone();
        let mut u = self.base_u.clone();
        if let Some(vb) = var_bounds {
            for (i, &(lo, hi)) in vb.iter().enumerate() {
                l[i] = lo;
                u[i] = hi;
            }
        }

        let mut x = warm.map(|w| w.x.clone()).unwrap_or_else(|| vec![0.0; n]);
        let mut y = warm.map(|w| w.y.clone()).unwrap_or_else(|| vec![0.0; m]);
        let mut z = vec![0.0; m];
        self.a_mul(&x, &mut z);
        for r in 0..m {
            z[r] = z[r].clamp(l[r], u[r]);
        }

        let mut ax = vec![0.0; m];
        let mut aty = vec![0.0; n];
        let mut px = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut weighted = vec![0.0; m];
        let mut y_checkpoint = y.clone();
        let mut status = QpStatus::MaxIterations;
        let mut iterations = max_iter;
        let mut primal_residual = f64::INFINITY;
        let mut dual_residual = f64::INFINITY;
        let mut certificate = None;

        for it in 0..max_iter {
            // x-update
            for r in 0..m {
                weighted[r] = self.rho * self.row_weight[r] * z[r] - y[r];
            }
            self.at_mul(&weighted, &mut rhs);
            for i in 0..n {
                rhs[i] += SIGMA * x[i] - self.q[i];
            }
            chol_solve(&self.kkt, n, &mut rhs);
            x.copy_from_slice(&rhs);

            // z-, y-updates with over-relaxation
            self.a_mul(&x, &mut ax);
            for r in 0..m {
                let w = self.rho * self.row_weight[r];
                let v = ALPHA * ax[r] + (1.0 - ALPHA) * z[r];
                let znew = (v + y[r] / w).clamp(l[r], u[r]);
                y[r] += w * (v - znew);
                z[r] = znew;
            }

            // residuals
            self.at_mul(&y, &mut aty);
            self.p_mul(&x, &mut px);
            let mut rp: f64 = 0.0;
            let mut ax_norm: f64 = 0.0;
            let mut z_norm: f64 = 0.0;
            for r in 0..m {
                rp = rp.max((ax[r] - z[r]).abs());
                ax_norm = ax_norm.max(ax[r].abs());
                z_norm = z_norm.max(z[r].abs());
            }
            let mut rd: f64 = 0.0;
            let mut scale_d: f64 = 0.0;
            for i in 0..n {
                rd = rd.max((px[i] + self.q[i] + aty[i]).abs());
                scale_d = scale_d.max(px[i].abs()).max(aty[i].abs()).max(self.q[i].abs());
            }
            primal_residual = rp;
            dual_residual = rd;
            let eps_p = tols.eps_abs + tols.eps_rel * ax_norm.max(z_norm);
            let eps_d = tols.eps_abs + tols.eps_rel * scale_d;
            if rp <= eps_p && rd <= eps_d {
                status = QpStatus::Optimal;
                iterations = it + 1;
                break;
            }

            // infeasibility test on the dual increment since the last check
            if (it + 1) % 25 == 0 {
                let dy: Vec<f64> = (0..m).map(|r| y[r] - y_checkpoint[r]).collect();
                if self.primal_certificate_holds(&dy, &l, &u) {
                    status = QpStatus::PrimalInfeasible;
                    iterations = it + 1;
                    certificate = Some(dy);
                    break;
                }
                y_checkpoint.copy_from_slice(&y);
            }

            // residual-balancing penalty rescale
            if (it + 1) % 50 == 0 {
                let rp_rel = rp / (ax_norm.max(z_norm) + 1e-12);
                let rd_rel = rd / (scale_d + 1e-12);
                let ratio = (rp_rel / (rd_rel + 1e-16)).sqrt();
                let new_rho = (self.rho * ratio).clamp(RHO_MIN, RHO_MAX);
                if new_rho / self.rho > 5.0 || self.rho / new_rho > 5.0 {
                    self.rho = new_rho;
                    self.refactor();
                }
            }
        }

        if status == QpStatus::Optimal && polish {
            self.polish(&mut x, &mut y, &l, &u);
        }

        QpResult {
            status,
            objective: self.objective(&x),
            x,
            y,
            iterations,
            primal_residual,
            dual_residual,
            certificate,
        }
    }

    /// Certified primal infeasibility test on a dual direction `v`:
    /// `‖Aᵀv‖∞ ≈ 0` and `uᵀv₊ + lᵀv₋ < 0` (infinite bounds require the
    /// matching part of `v` to vanish).
    pub fn primal_certificate_holds(&self, v: &[f64], l: &[f64], u: &[f64]) -> bool {
        let v_norm = v.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        if v_norm < 1e-12 {
            return false;
        }
        let mut atv = vec![0.0; self.n];
        self.at_mul(v, &mut atv);
        if atv.iter().any(|&g| g.abs() > 1e-5 * v_norm) {
            return false;
        }
        let mut support = 0.0;
        for r in 0..self.m {
            let vp = v[r].max(0.0);
            let vm = v[r].min(0.0);
            if vp > EPS_PINF * v_norm {
                if !u[r].is_finite() {
                    return false;
                }
                support += u[r] * vp;
            }
            if vm < -EPS_PINF * v_norm {
                if !l[r].is_finite() {
                    return false;
                }
                support += l[r] * vm;
            }
        }
        support < -EPS_PINF * v_norm
    }

    /// Exact KKT solve on the active set; accepted only when it stays
    /// primal/dual feasible.
    fn polish(&self, x: &mut [f64], y: &mut [f64], l: &[f64], u: &[f64]) {
        let n = self.n;
        let mut active: Vec<(usize, f64)> = Vec::new(); // (row, bound)
        for r in 0..self.m {
            if l[r] == u[r] {
                active.push((r, l[r]));
            } else if y[r] > 1e-9 && u[r].is_finite() {
                active.push((r, u[r]));
            } else if y[r] < -1e-9 && l[r].is_finite() {
                active.push((r, l[r]));
            }
        }
        let ma = active.len();
        let dim = n + ma;
        if dim > 2200 {
            return; // polish cost would dominate the solve
        }
        let mut kkt = vec![0.0; dim * dim];
        for i in 0..n {
            for j in 0..n {
                kkt[i * dim + j] = self.p_mat[i * n + j];
            }
            kkt[i * dim + i] += 1e-11;
        }
        for (k, &(r, _)) in active.iter().enumerate() {
            for &(i, a) in &self.rows[r] {
                kkt[i * dim + n + k] = a;
                kkt[(n + k) * dim + i] = a;
            }
            kkt[(n + k) * dim + n + k] = -1e-11;
        }
        let mut rhs = vec![0.0; dim];
        for i in 0..n {
            rhs[i] = -self.q[i];
        }
        for (k, &(_, b)) in active.iter().enumerate() {
            rhs[n + k] = b;
        }
        if !lu_solve(&mut kkt, dim, &mut rhs) {
            return;
        }
        let xp = &rhs[..n];
        let nu = &rhs[n..];
        let mut ax = vec![0.0; self.m];
        self.a_mul(xp, &mut ax);
        let tol = 1e-7;
        for r in 0..self.m {
            if ax[r] > u[r] + tol || ax[r] < l[r] - tol {
                return;
            }
        }
        for (k, &(r, b)) in active.iter().enumerate() {
            if l[r] != u[r] {
                let at_upper = b == u[r];
                if at_upper && nu[k] < -tol {
                    return;
                }
                if !at_upper && nu[k] > tol {
                    return;
                }
            }
        }
        x.copy_from_slice(xp);
        for v in y.iter_mut() {
            *v = 0.0;
        }
        for (k, &(r, _)) in active.iter().enumerate() {
            y[r] = nu[k];
        }
    }
}

/// One-shot solve of a convex program.
pub fn solve_qp(
    program: &ConvexProgram,
    warm: Option<&QpWarmStart>,
    max_iter: usize,
    tols: QpTols,
) -> Result<QpResult, QpError> {
    let mut engine = QpEngine::new(program)?;
    Ok(engine.solve(None, warm, max_iter, tols, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Constraint, QuadObjective, Sense, Variable};

    fn program(
        variables: Vec<Variable>,
        constraints: Vec<Constraint>,
        objective: QuadObjective,
    ) -> ConvexProgram {
        ConvexProgram { variables, constraints, objective }
    }

    #[test]
    fn analytic_minimum_on_halfline() {
        // min (x−1)² s.t. x ≥ 2 → x* = 2, obj 1
        let mut obj = QuadObjective::default();
        obj.add_square(1.0, 0, 1.0);
        let p = program(
            vec![Variable::continuous("x", -10.0, 10.0)],
            vec![Constraint::linear("lb", vec![(-1.0, 0)], Sense::Le, -2.0)],
            obj,
        );
        let r = solve_qp(&p, None, 4000, QpTols::default()).unwrap();
        assert_eq!(r.status, QpStatus::Optimal);
        assert!((r.x[0] - 2.0).abs() < 1e-6, "x = {}", r.x[0]);
        assert!((r.objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn detects_infeasibility_with_certificate() {
        // x ≥ 1 and x ≤ 0
        let mut obj = QuadObjective::default();
        obj.add_square(1.0, 0, 0.0);
        let p = program(
            vec![Variable::continuous("x", -10.0, 10.0)],
            vec![
                Constraint::linear("ge1", vec![(-1.0, 0)], Sense::Le, -1.0),
                Constraint::linear("le0", vec![(1.0, 0)], Sense::Le, 0.0),
            ],
            obj,
        );
        let mut engine = QpEngine::new(&p).unwrap();
        let r = engine.solve(None, None, 8000, QpTols::default(), false);
        assert_eq!(r.status, QpStatus::PrimalInfeasible);
        let cert = r.certificate.expect("certificate provided");
        let (l, u) = (engine.base_l.clone(), engine.base_u.clone());
        assert!(engine.primal_certificate_holds(&cert, &l, &u));
    }

    #[test]
    fn equality_constraint_holds() {
        // min x² + y² s.t. x + y = 1 → (0.5, 0.5)
        let mut obj = QuadObjective::default();
        obj.add_square(1.0, 0, 0.0);
        obj.add_square(1.0, 1, 0.0);
        let p = program(
            vec![Variable::continuous("x", -10.0, 10.0), Variable::continuous("y", -10.0, 10.0)],
            vec![Constraint::linear("sum", vec![(1.0, 0), (1.0, 1)], Sense::Eq, 1.0)],
            obj,
        );
        let r = solve_qp(&p, None, 4000, QpTols::default()).unwrap();
        assert_eq!(r.status, QpStatus::Optimal);
        assert!((r.x[0] - 0.5).abs() < 1e-7);
        assert!((r.x[1] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn warm_start_reduces_iterations() {
        let mut obj = QuadObjective::default();
        for i in 0..6 {
            obj.add_square(1.0 + i as f64, i, 0.3 * i as f64);
        }
        let cons =
            vec![Constraint::linear("cap", (0..6).map(|i| (1.0, i)).collect(), Sense::Le, 2.0)];
        let vars = (0..6).map(|i| Variable::continuous(format!("x{i}"), -5.0, 5.0)).collect();
        let p = program(vars, cons, obj);
        let mut engine = QpEngine::new(&p).unwrap();
        let cold = engine.solve(None, None, 4000, QpTols::default(), false);
        assert_eq!(cold.status, QpStatus::Optimal);
        let warm = QpWarmStart { x: cold.x.clone(), y: cold.y.clone() };
        let hot = engine.solve(None, Some(&warm), 4000, QpTols::default(), false);
        assert!(hot.iterations <= cold.iterations);
    }

    #[test]
    fn deterministic_iterates() {
        let mut obj = QuadObjective::default();
        obj.add_square(2.0, 0, 1.0);
        obj.add_square(1.0, 1, -1.0);
        obj.quad.push((0.3, 0, 1));
        let p = program(
            vec![Variable::continuous("x", -4.0, 4.0), Variable::continuous("y", -4.0, 4.0)],
            vec![Constraint::linear("c", vec![(1.0, 0), (-2.0, 1)], Sense::Le, 0.5)],
            obj,
        );
        let a = solve_qp(&p, None, 300, QpTols::default()).unwrap();
        let b = solve_qp(&p, None, 300, QpTols::default()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn rejects_indefinite_objective() {
        let mut obj = QuadObjective::default();
        obj.quad.push((-1.0, 0, 0));
        let p = program(vec![Variable::continuous("x", -1.0, 1.0)], vec![], obj);
        assert!(matches!(QpEngine::new(&p), Err(QpError::NonConvexInput(_))));
    }

    #[test]
    fn bound_overrides_pin_variables() {
        let mut obj = QuadObjective::default();
        obj.add_square(1.0, 0, 0.7);
        let p = program(vec![Variable::continuous("x", 0.0, 1.0)], vec![], obj);
        let mut engine = QpEngine::new(&p).unwrap();
        let free = engine.solve(None, None, 2000, QpTols::default(), true);
        assert!((free.x[0] - 0.7).abs() < 1e-7);
        let pinned = engine.solve(Some(&[(1.0, 1.0)]), None, 2000, QpTols::default(), true);
        assert!((pinned.x[0] - 1.0).abs() < 1e-7);
    }
}
