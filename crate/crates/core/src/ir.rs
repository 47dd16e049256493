//! Intermediate representation for mixed-integer bilinear programs.
//!
//! A program holds continuous and binary variables with box bounds, a convex
//! quadratic objective, and constraints built from linear terms plus
//! optional bilinear terms. Constraints are classified into the convex set
//! (`m_f`, linear or convex-quadratic) and the bilinear set (`m_b`).
//! Equalities are stored natively and split into inequality pairs only where
//! a consumer requires it (big-M guarding does).
//!
//! A guard makes a constraint conditional: `g(x) ≤ rhs + M·e(z)` where
//! `e(z)` is a nonnegative affine expression in binaries that vanishes
//! exactly when the guard is active. The plain big-M guard has `e = 1 − z`;
//! cell-activation guards use the Hamming distance to a binary code.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IrError {
    #[error("big-M guard on `{0}` requires finite bounds on every involved variable")]
    UnboundedBigM(String),
    #[error("constraint `{0}` keeps a bilinear term after fixing integers")]
    ResidualNonconvexity(String),
    #[error("assignment misses binary variable {0}")]
    MissingAssignment(usize),
    #[error("assignment value {1} for binary variable {0} is not 0/1")]
    NonBinaryAssignment(usize, f64),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
}

impl Variable {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Variable { name: name.into(), kind: VarKind::Continuous, lo, hi }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Variable { name: name.into(), kind: VarKind::Binary, lo: 0.0, hi: 1.0 }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
}

/// Activation expression for a guarded constraint: `slack_const + Σ c·z_i`,
/// nonnegative over binary points, zero exactly when the guard is active.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Guard {
    pub big_m: f64,
    pub slack_terms: Vec<(f64, usize)>,
    pub slack_const: f64,
}

impl Guard {
    /// Plain big-M guard active when `z = 1`.
    pub fn on_binary(big_m: f64, z: usize) -> Self {
        Guard { big_m, slack_terms: vec![(-1.0, z)], slack_const: 1.0 }
    }

    pub fn slack_value(&self, x: &[f64]) -> f64 {
        self.slack_const + self.slack_terms.iter().map(|&(c, i)| c * x[i]).sum::<f64>()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConstraintKind {
    Linear,
    ConvexQuadratic,
    Bilinear,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Constraint {
    /// Family label, e.g. "A.kinematics" or "E.separation".
    pub tag: String,
    pub terms: Vec<(f64, usize)>,
    pub quad_terms: Vec<(f64, usize, usize)>,
    pub sense: Sense,
    pub rhs: f64,
    pub guard: Option<Guard>,
}

impl Constraint {
    pub fn linear(tag: impl Into<String>, terms: Vec<(f64, usize)>, sense: Sense, rhs: f64) -> Self {
        Constraint { tag: tag.into(), terms, quad_terms: Vec::new(), sense, rhs, guard: None }
    }

    pub fn bilinear(
        tag: impl Into<String>,
        terms: Vec<(f64, usize)>,
        quad_terms: Vec<(f64, usize, usize)>,
        sense: Sense,
        rhs: f64,
    ) -> Self {
        Constraint { tag: tag.into(), terms, quad_terms, sense, rhs, guard: None }
    }

    pub fn kind(&self) -> ConstraintKind {
        if self.quad_terms.is_empty() {
            ConstraintKind::Linear
        } else if self.sense == Sense::Le
            && self.quad_terms.iter().all(|&(c, i, j)| i == j && c >= 0.0)
        {
            ConstraintKind::ConvexQuadratic
        } else {
            ConstraintKind::Bilinear
        }
    }

    pub fn is_bilinear(&self) -> bool {
        self.kind() == ConstraintKind::Bilinear
    }

    /// Left-hand side value (terms only, no guard slack).
    pub fn lhs(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for &(c, i) in &self.terms {
            v += c * x[i];
        }
        for &(c, i, j) in &self.quad_terms {
            v += c * x[i] * x[j];
        }
        v
    }

    /// Violation at `x`: `max(0, lhs − rhs − M·slack)` for ≤, `|lhs − rhs|`
    /// for = (equalities are never guarded).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut r = self.lhs(x) - self.rhs;
        if let Some(g) = &self.guard {
            r -= g.big_m * g.slack_value(x);
        }
        match self.sense {
            Sense::Le => r.max(0.0),
            Sense::Eq => r.abs(),
        }
    }

    /// Residual `lhs − rhs − M·slack` whose sign carries the constraint:
    /// ≤ 0 for Le, = 0 for Eq.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut r = self.lhs(x) - self.rhs;
        if let Some(g) = &self.guard {
            r -= g.big_m * g.slack_value(x);
        }
        r
    }

    /// Gradient of the residual, accumulated into `out` (must be zeroed).
    pub fn residual_grad(&self, x: &[f64], out: &mut [f64]) {
        for &(c, i) in &self.terms {
            out[i] += c;
        }
        for &(c, i, j) in &self.quad_terms {
            out[i] += c * x[j];
            out[j] += c * x[i];
        }
        if let Some(g) = &self.guard {
            for &(c, i) in &g.slack_terms {
                out[i] -= g.big_m * c;
            }
        }
    }
}

/// Convex quadratic objective `Σ c·x_i·x_j + Σ c·x_i + constant`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct QuadObjective {
    pub quad: Vec<(f64, usize, usize)>,
    pub linear: Vec<(f64, usize)>,
    pub constant: f64,
}

impl QuadObjective {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for &(c, i) in &self.linear {
            v += c * x[i];
        }
        for &(c, i, j) in &self.quad {
            v += c * x[i] * x[j];
        }
        v
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for g in out.iter_mut() {
            *g = 0.0;
        }
        for &(c, i) in &self.linear {
            out[i] += c;
        }
        for &(c, i, j) in &self.quad {
            out[i] += c * x[j];
            out[j] += c * x[i];
        }
    }

    /// Adds `w·(x_i − target)²` to the objective.
    pub fn add_square(&mut self, w: f64, i: usize, target: f64) {
        self.quad.push((w, i, i));
        self.linear.push((-2.0 * w * target, i));
        self.constant += w * target * target;
    }
}

/// Mixed-integer bilinear program (the Eq-(1) form).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MibpProgram {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: QuadObjective,
    /// Problem parameter vector Θ.
    pub theta: Vec<f64>,
}

impl MibpProgram {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn binary_ids(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of mixed-integer convex constraints (m_f).
    pub fn convex_count(&self) -> usize {
        self.constraints.iter().filter(|c| !c.is_bilinear()).count()
    }

    /// Number of mixed-integer bilinear constraints (m_b).
    pub fn bilinear_count(&self) -> usize {
        self.constraints.iter().filter(|c| c.is_bilinear()).count()
    }

    /// Distinct bilinear constraint family tags (prefix before the first '.').
    pub fn bilinear_groups(&self) -> Vec<String> {
        let mut groups: Vec<String> = self
            .constraints
            .iter()
            .filter(|c| c.is_bilinear())
            .map(|c| c.tag.split('.').next().unwrap_or(&c.tag).to_string())
            .collect();
        groups.sort();
        groups.dedup();
        groups
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Smooth NLP with every binary relaxed to `[0,1]` under a complementarity
/// band `|z(1−z)| ≤ eps`.
#[derive(Clone, Debug)]
pub struct NlpProgram {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: QuadObjective,
    /// Ids of the formerly binary variables.
    pub relaxed_binaries: Vec<usize>,
    pub eps: f64,
}

/// Continuous program left after fixing every binary: linear (or
/// convex-quadratic) constraints and a convex quadratic objective. Fixed
/// binaries stay in the variable vector with `lo = hi` so indices are
/// stable across the fix.
#[derive(Clone, Debug)]
pub struct ConvexProgram {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: QuadObjective,
}

/// Interval of `c·x` over the variable box.
fn term_interval(c: f64, v: &Variable) -> (f64, f64) {
    let a = c * v.lo;
    let b = c * v.hi;
    (a.min(b), a.max(b))
}

/// Interval of `c·x_i·x_j` over the box; squares are handled exactly.
fn product_interval(c: f64, vi: &Variable, vj: &Variable, same: bool) -> (f64, f64) {
    let (lo, hi) = if same {
        let m = vi.lo.abs().max(vi.hi.abs());
        let lo = if vi.lo <= 0.0 && vi.hi >= 0.0 { 0.0 } else { (vi.lo * vi.lo).min(vi.hi * vi.hi) };
        (lo, m * m)
    } else {
        let cands = [vi.lo * vj.lo, vi.lo * vj.hi, vi.hi * vj.lo, vi.hi * vj.hi];
        (cands.iter().cloned().fold(f64::INFINITY, f64::min), cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    };
    let a = c * lo;
    let b = c * hi;
    (a.min(b), a.max(b))
}

/// Interval of the constraint lhs over the variable box.
fn lhs_interval(c: &Constraint, variables: &[Variable]) -> Result<(f64, f64), IrError> {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for &(coef, i) in &c.terms {
        let v = &variables[i];
        if !v.lo.is_finite() || !v.hi.is_finite() {
            return Err(IrError::UnboundedBigM(c.tag.clone()));
        }
        let (a, b) = term_interval(coef, v);
        lo += a;
        hi += b;
    }
    for &(coef, i, j) in &c.quad_terms {
        let (vi, vj) = (&variables[i], &variables[j]);
        if !vi.lo.is_finite() || !vi.hi.is_finite() || !vj.lo.is_finite() || !vj.hi.is_finite() {
            return Err(IrError::UnboundedBigM(c.tag.clone()));
        }
        let (a, b) = product_interval(coef, vi, vj, i == j);
        lo += a;
        hi += b;
    }
    Ok((lo, hi))
}

/// Guards `constraint` by binary `z` with a per-constraint interval big-M.
/// `z = 1` enforces the original constraint; `z = 0` leaves it slack over
/// the whole variable box. Equalities expand into both directions.
pub fn guard_big_m(
    constraint: &Constraint,
    z: usize,
    variables: &[Variable],
) -> Result<Vec<Constraint>, IrError> {
    let (lo, hi) = lhs_interval(constraint, variables)?;
    let mut out = Vec::new();
    let m_up = (hi - constraint.rhs).max(0.0);
    let mut le = constraint.clone();
    le.sense = Sense::Le;
    le.guard = Some(Guard::on_binary(m_up, z));
    out.push(le);
    if constraint.sense == Sense::Eq {
        let m_dn = (constraint.rhs - lo).max(0.0);
        let mut ge = constraint.clone();
        ge.tag = format!("{}.lb", constraint.tag);
        ge.terms = ge.terms.iter().map(|&(c, i)| (-c, i)).collect();
        ge.quad_terms = ge.quad_terms.iter().map(|&(c, i, j)| (-c, i, j)).collect();
        ge.rhs = -constraint.rhs;
        ge.sense = Sense::Le;
        ge.guard = Some(Guard::on_binary(m_dn, z));
        out.push(ge);
    }
    Ok(out)
}

/// Relaxes every binary to `[0,1]` and appends the complementarity band
/// `−eps ≤ z(1−z) ≤ eps` (two inequalities per binary). All other
/// constraints carry over verbatim.
pub fn to_mpcc(program: &MibpProgram, eps: f64) -> NlpProgram {
    let binaries = program.binary_ids();
    let mut variables = program.variables.clone();
    for &b in &binaries {
        variables[b].kind = VarKind::Continuous;
    }
    let mut constraints = program.constraints.clone();
    for &b in &binaries {
        // z − z² ≤ eps
        constraints.push(Constraint {
            tag: format!("compl.{}", program.variables[b].name),
            terms: vec![(1.0, b)],
            quad_terms: vec![(-1.0, b, b)],
            sense: Sense::Le,
            rhs: eps,
            guard: None,
        });
        // z² − z ≤ eps
        constraints.push(Constraint {
            tag: format!("compl.{}", program.variables[b].name),
            terms: vec![(-1.0, b)],
            quad_terms: vec![(1.0, b, b)],
            sense: Sense::Le,
            rhs: eps,
            guard: None,
        });
    }
    NlpProgram {
        variables,
        constraints,
        objective: program.objective.clone(),
        relaxed_binaries: binaries,
        eps,
    }
}

/// Substitutes an assignment for every binary. Guarded constraints resolve:
/// kept (guard stripped) when the slack expression evaluates to zero,
/// dropped otherwise. Any surviving bilinear term in a constraint is an
/// error; envelope-compiled programs never produce one.
pub fn fix_integers(
    program: &MibpProgram,
    assignment: &HashMap<usize, f64>,
) -> Result<ConvexProgram, IrError> {
    let mut variables = program.variables.clone();
    for (i, v) in variables.iter_mut().enumerate() {
        if v.kind == VarKind::Binary {
            let val = *assignment.get(&i).ok_or(IrError::MissingAssignment(i))?;
            if (val - val.round()).abs() > 1e-6 || !(0.0..=1.0).contains(&val.round()) {
                return Err(IrError::NonBinaryAssignment(i, val));
            }
            let val = val.round();
            v.kind = VarKind::Continuous;
            v.lo = val;
            v.hi = val;
        }
    }
    let fixed = |i: usize| -> Option<f64> {
        if program.variables[i].kind == VarKind::Binary {
            Some(assignment[&i].round())
        } else {
            None
        }
    };

    let mut constraints = Vec::new();
    for c in &program.constraints {
        if let Some(g) = &c.guard {
            let slack = g.slack_const
                + g.slack_terms
                    .iter()
                    .map(|&(coef, i)| coef * fixed(i).unwrap_or(0.0))
                    .sum::<f64>();
            if slack.abs() > 1e-9 {
                continue; // inactive guard: constraint vacuous over the box
            }
        }
        let mut terms: Vec<(f64, usize)> = Vec::new();
        let mut rhs = c.rhs;
        for &(coef, i) in &c.terms {
            match fixed(i) {
                Some(v) => rhs -= coef * v,
                None => terms.push((coef, i)),
            }
        }
        let mut quad_terms = Vec::new();
        for &(coef, i, j) in &c.quad_terms {
            match (fixed(i), fixed(j)) {
                (Some(a), Some(b)) => rhs -= coef * a * b,
                (Some(a), None) => terms.push((coef * a, j)),
                (None, Some(b)) => terms.push((coef * b, i)),
                (None, None) => quad_terms.push((coef, i, j)),
            }
        }
        let resolved = Constraint {
            tag: c.tag.clone(),
            terms,
            quad_terms,
            sense: c.sense,
            rhs,
            guard: None,
        };
        if resolved.is_bilinear() {
            return Err(IrError::ResidualNonconvexity(c.tag.clone()));
        }
        constraints.push(resolved);
    }

    let mut objective = QuadObjective::default();
    objective.constant = program.objective.constant;
    for &(coef, i) in &program.objective.linear {
        match fixed(i) {
            Some(v) => objective.constant += coef * v,
            None => objective.linear.push((coef, i)),
        }
    }
    for &(coef, i, j) in &program.objective.quad {
        match (fixed(i), fixed(j)) {
            (Some(a), Some(b)) => objective.constant += coef * a * b,
            (Some(a), None) => objective.linear.push((coef * a, j)),
            (None, Some(b)) => objective.linear.push((coef * b, i)),
            (None, None) => objective.quad.push((coef, i, j)),
        }
    }

    Ok(ConvexProgram { variables, constraints, objective })
}

/// Continuous relaxation: binaries become `[0,1]` boxes and guard slack is
/// folded into the rows (`g − M·Σc·z ≤ rhs + M·const`), so the feasible
/// set contains every mixed-integer feasible point. Bilinear constraints
/// are an error; envelope-compile first.
pub fn relax_binaries(program: &MibpProgram) -> Result<ConvexProgram, IrError> {
    let mut variables = program.variables.clone();
    for v in &mut variables {
        if v.kind == VarKind::Binary {
            v.kind = VarKind::Continuous;
        }
    }
    let mut constraints = Vec::with_capacity(program.constraints.len());
    for c in &program.constraints {
        if c.is_bilinear() {
            return Err(IrError::ResidualNonconvexity(c.tag.clone()));
        }
        let mut terms = c.terms.clone();
        let mut rhs = c.rhs;
        if let Some(g) = &c.guard {
            for &(coef, z) in &g.slack_terms {
                terms.push((-g.big_m * coef, z));
            }
            rhs += g.big_m * g.slack_const;
        }
        constraints.push(Constraint {
            tag: c.tag.clone(),
            terms,
            quad_terms: c.quad_terms.clone(),
            sense: c.sense,
            rhs,
            guard: None,
        });
    }
    Ok(ConvexProgram { variables, constraints, objective: program.objective.clone() })
}

/// Exact evaluation of a point against a program.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub objective: f64,
    /// Per-constraint violations, aligned with `program.constraints`.
    pub violations: Vec<f64>,
    /// Integrality deviation `|z(1−z)|` per binary id.
    pub integrality: Vec<(usize, f64)>,
    pub max_violation: f64,
}

pub fn evaluate(program: &MibpProgram, x: &[f64]) -> Evaluation {
    assert_eq!(x.len(), program.n_vars(), "point dimension mismatch");
    let violations: Vec<f64> = program.constraints.iter().map(|c| c.violation(x)).collect();
    let integrality: Vec<(usize, f64)> = program
        .binary_ids()
        .iter()
        .map(|&i| (i, (x[i] * (1.0 - x[i])).abs()))
        .collect();
    let max_violation = violations
        .iter()
        .cloned()
        .chain(integrality.iter().map(|&(_, v)| v))
        .fold(0.0_f64, f64::max);
    Evaluation { objective: program.objective.value(x), violations, integrality, max_violation }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_program() -> MibpProgram {
        // min (x−1)², x ∈ [−5,5], z binary, guarded x ≤ 0 when z = 1.
        let variables = vec![Variable::continuous("x", -5.0, 5.0), Variable::binary("z")];
        let mut objective = QuadObjective::default();
        objective.add_square(1.0, 0, 1.0);
        MibpProgram { variables, constraints: Vec::new(), objective, theta: vec![] }
    }

    #[test]
    fn big_m_uses_interval_sup() {
        let p = toy_program();
        let c = Constraint::linear("cap", vec![(1.0, 0)], Sense::Le, 0.0);
        let guarded = guard_big_m(&c, 1, &p.variables).unwrap();
        assert_eq!(guarded.len(), 1);
        let g = guarded[0].guard.as_ref().unwrap();
        assert_eq!(g.big_m, 5.0); // sup(x − 0) over [−5,5]
        // z = 1 enforces, z = 0 never binds anywhere in the box.
        assert!(guarded[0].violation(&[1.0, 1.0]) > 0.9);
        assert_eq!(guarded[0].violation(&[5.0, 0.0]), 0.0);
        assert_eq!(guarded[0].violation(&[-3.0, 1.0]), 0.0);
    }

    #[test]
    fn big_m_equality_guards_both_directions() {
        let p = toy_program();
        let c = Constraint::linear("pin", vec![(1.0, 0)], Sense::Eq, 2.0);
        let guarded = guard_big_m(&c, 1, &p.variables).unwrap();
        assert_eq!(guarded.len(), 2);
        assert!(guarded.iter().all(|g| g.sense == Sense::Le));
        // x = 2 satisfies both at z = 1; x = 4 violates the upper guard.
        assert!(guarded.iter().all(|g| g.violation(&[2.0, 1.0]) < 1e-12));
        assert!(guarded[0].violation(&[4.0, 1.0]) > 1.9);
        assert!(guarded.iter().all(|g| g.violation(&[4.0, 0.0]) == 0.0));
    }

    #[test]
    fn big_m_unbounded_is_error() {
        let vars = vec![Variable::continuous("x", f64::NEG_INFINITY, 5.0), Variable::binary("z")];
        let c = Constraint::linear("cap", vec![(-1.0, 0)], Sense::Le, 0.0);
        assert!(matches!(guard_big_m(&c, 1, &vars), Err(IrError::UnboundedBigM(_))));
    }

    #[test]
    fn square_interval_is_tight() {
        let v = Variable::continuous("x", -1.0, 1.0);
        let (lo, hi) = product_interval(1.0, &v, &v, true);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn mpcc_eps_zero_feasible_set_is_binary() {
        let p = toy_program();
        let nlp = to_mpcc(&p, 0.0);
        assert_eq!(nlp.relaxed_binaries, vec![1]);
        let compl: Vec<&Constraint> =
            nlp.constraints.iter().filter(|c| c.tag.starts_with("compl")).collect();
        assert_eq!(compl.len(), 2);
        for z in [0.0, 1.0] {
            assert!(compl.iter().all(|c| c.violation(&[0.0, z]) < 1e-12));
        }
        assert!(compl.iter().any(|c| c.violation(&[0.0, 0.5]) > 0.2));
    }

    #[test]
    fn mpcc_eps_band_endpoints() {
        // roots of z − z² = eps sit near 0 and 1; interior points violate
        let p = toy_program();
        let eps = 1e-3;
        let nlp = to_mpcc(&p, eps);
        let compl: Vec<&Constraint> =
            nlp.constraints.iter().filter(|c| c.tag.starts_with("compl")).collect();
        let edge = 0.5 * (1.0 - (1.0 - 4.0 * eps).sqrt()); // ≈ 1.001e-3
        for z in [edge, 1.0 - edge] {
            assert!(compl.iter().all(|c| c.violation(&[0.0, z]) < 1e-12));
        }
        assert!(compl.iter().any(|c| c.violation(&[0.0, 3.0 * edge]) > 0.0));
    }

    #[test]
    fn mpcc_preserves_bilinear_count() {
        let mut p = toy_program();
        p.constraints.push(Constraint::bilinear(
            "C",
            vec![],
            vec![(1.0, 0, 0)],
            Sense::Eq,
            1.0,
        ));
        let m_b = p.bilinear_count();
        let nlp = to_mpcc(&p, 1e-3);
        let still: usize = nlp.constraints.iter().filter(|c| c.tag == "C").count();
        assert_eq!(still, m_b);
    }

    #[test]
    fn fix_integers_resolves_guards() {
        let mut p = toy_program();
        let cap = Constraint::linear("cap", vec![(1.0, 0)], Sense::Le, 0.0);
        p.constraints.extend(guard_big_m(&cap, 1, &p.variables).unwrap());

        let on = fix_integers(&p, &HashMap::from([(1, 1.0)])).unwrap();
        assert_eq!(on.constraints.len(), 1);
        assert!(on.constraints[0].guard.is_none());

        let off = fix_integers(&p, &HashMap::from([(1, 0.0)])).unwrap();
        assert!(off.constraints.is_empty());
        assert_eq!(off.variables[1].lo, 0.0);
        assert_eq!(off.variables[1].hi, 0.0);
    }

    #[test]
    fn fix_integers_rejects_bilinear_residue() {
        let mut p = toy_program();
        p.variables.push(Variable::continuous("y", -1.0, 1.0));
        p.constraints.push(Constraint::bilinear(
            "C",
            vec![],
            vec![(1.0, 0, 2)],
            Sense::Eq,
            0.5,
        ));
        let err = fix_integers(&p, &HashMap::from([(1, 0.0)]));
        assert!(matches!(err, Err(IrError::ResidualNonconvexity(_))));
    }

    #[test]
    fn fix_integers_requires_full_assignment() {
        let p = toy_program();
        assert!(matches!(fix_integers(&p, &HashMap::new()), Err(IrError::MissingAssignment(1))));
    }

    #[test]
    fn evaluate_reports_integrality() {
        let p = toy_program();
        let eval = evaluate(&p, &[0.0, 0.5]);
        assert_eq!(eval.integrality, vec![(1, 0.25)]);
        assert!((eval.objective - 1.0).abs() < 1e-12);
        assert_eq!(eval.max_violation, 0.25);
    }

    #[test]
    fn evaluate_matches_duplicate_evaluator() {
        // independent recomputation of a random constraint's violation
        let vars = vec![
            Variable::continuous("x", -2.0, 2.0),
            Variable::continuous("y", -2.0, 2.0),
        ];
        let c = Constraint::bilinear(
            "t",
            vec![(0.5, 0), (-1.25, 1)],
            vec![(2.0, 0, 1), (0.75, 1, 1)],
            Sense::Le,
            0.3,
        );
        let p = MibpProgram {
            variables: vars,
            constraints: vec![c],
            objective: QuadObjective::default(),
            theta: vec![],
        };
        let x = [0.7, -1.1];
        let direct = 0.5 * x[0] - 1.25 * x[1] + 2.0 * x[0] * x[1] + 0.75 * x[1] * x[1] - 0.3;
        let eval = evaluate(&p, &x);
        assert!((eval.violations[0] - direct.max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let mut p = toy_program();
        p.constraints.push(Constraint::linear("cap", vec![(1.0, 0)], Sense::Le, 0.0));
        let s = p.to_json();
        let q = MibpProgram::from_json(&s).unwrap();
        assert_eq!(q.n_vars(), p.n_vars());
        assert_eq!(q.constraints.len(), p.constraints.len());
    }
}
