//! Compiles bilinear constraints into mixed-integer convex form.
//!
//! Every variable occurring in a bilinear product belongs to a gridded slot
//! (a scalar interval split into cells, or the joint (cos, sin) rotation
//! box per θ-cell). Each slot gets ⌈log₂ N⌉ binary code bits and a
//! vertex-weight disjunction confining the slot variables to the union of
//! its cells:
//!
//! ```text
//!   (5.a)  x = Σᵢ Σⱼ λ_{i,j} v_{i,j}
//!   (5.b)  Σᵢ Σⱼ λ_{i,j} = 1,   λ ∈ [0, 1]
//!   (5.c)  Σ_{k≠i} Σⱼ λ_{k,j} ≤ Σ_l |z_l − z̄_{i,l}|   for every cell i
//! ```
//!
//! plus `Σ_l |z_l − c_l| ≥ 1` for every unused code c, which keeps the
//! encoding exact instead of collapsing to the convex hull. Each distinct
//! bilinear product w = x·y becomes one variable constrained per cell by
//! the four McCormick inequalities, activated through the Hamming distance
//! of the cell code. Bilinear constraints are then rewritten linearly in w.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{Constraint, Guard, MibpProgram, Sense, Variable};

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("degenerate bounds: lo {0} > hi {1}")]
    DegenerateBounds(f64, f64),
    #[error("duplicate binary codes in disjunction")]
    CodeCollision,
    #[error("variable `{0}` appears in a bilinear term but no grid slot covers it")]
    UncoveredVariable(String),
    #[error("grid restriction left slot `{0}` without cells")]
    EmptyRestriction(String),
}

// ---------------------------------------------------------------------------
// McCormick envelope
// ---------------------------------------------------------------------------

/// The four McCormick inequalities for `w = x·y` on a box, as ≤-rows over
/// the ids (w, x, y). Handles `x == y` (squares) by merging coefficients.
pub fn mccormick(
    w: usize,
    x: usize,
    y: usize,
    xb: (f64, f64),
    yb: (f64, f64),
) -> Result<Vec<Constraint>, EnvelopeError> {
    if xb.0 > xb.1 {
        return Err(EnvelopeError::DegenerateBounds(xb.0, xb.1));
    }
    if yb.0 > yb.1 {
        return Err(EnvelopeError::DegenerateBounds(yb.0, yb.1));
    }
    let (xl, xu) = xb;
    let (yl, yu) = yb;
    // (w_coef, x_coef, y_coef, rhs) rows of w_coef·w + x_coef·x + y_coef·y ≤ rhs
    let rows = [
        (-1.0, yl, xl, xl * yl),   // w ≥ xl·y + x·yl − xl·yl
        (-1.0, yu, xu, xu * yu),   // w ≥ xu·y + x·yu − xu·yu
        (1.0, -yl, -xu, -xu * yl), // w ≤ xu·y + x·yl − xu·yl
        (1.0, -yu, -xl, -xl * yu), // w ≤ xl·y + x·yu − xl·yu
    ];
    fn push(coef: f64, var: usize, terms: &mut Vec<(f64, usize)>) {
        if coef == 0.0 {
            return;
        }
        match terms.iter_mut().find(|(_, v)| *v == var) {
            Some(e) => e.0 += coef,
            None => terms.push((coef, var)),
        }
    }
    let mut out = Vec::with_capacity(4);
    for (idx, (w_coef, x_coef, y_coef, rhs)) in rows.into_iter().enumerate() {
        let mut terms: Vec<(f64, usize)> = vec![(w_coef, w)];
        push(x_coef, x, &mut terms);
        push(y_coef, y, &mut terms);
        out.push(Constraint::linear(format!("mccormick.{idx}"), terms, Sense::Le, rhs));
    }
    Ok(out)
}

/// Worst-case envelope gap over a cell: `(xᵁ−xᴸ)(yᵁ−yᴸ)/4`, attained at
/// the cell center.
pub fn envelope_gap(xb: (f64, f64), yb: (f64, f64)) -> f64 {
    0.25 * (xb.1 - xb.0) * (yb.1 - yb.0)
}

// ---------------------------------------------------------------------------
// log₂N disjunction
// ---------------------------------------------------------------------------

/// A convex polytope given by an explicit vertex list.
#[derive(Clone, Debug)]
pub struct Polytope {
    pub vertices: Vec<Vec<f64>>,
}

/// Binary-reflected Gray code.
pub fn gray_code(i: usize) -> usize {
    i ^ (i >> 1)
}

pub fn bits_for(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

fn code_bit(code: usize, l: usize) -> bool {
    (code >> l) & 1 == 1
}

/// Hamming-distance expansion `Σ_l |z_l − c_l|` as an affine expression:
/// returns (constant, terms).
fn hamming_expr(bit_ids: &[usize], code: usize) -> (f64, Vec<(f64, usize)>) {
    let mut constant = 0.0;
    let mut terms = Vec::with_capacity(bit_ids.len());
    for (l, &z) in bit_ids.iter().enumerate() {
        if code_bit(code, l) {
            constant += 1.0;
            terms.push((-1.0, z));
        } else {
            terms.push((1.0, z));
        }
    }
    (constant, terms)
}

/// Emits the (5.a–5.c) constraint set for `x ∈ ∪ polytopes` plus the
/// forbidden-code inequalities for every unused code. The caller supplies
/// variable ids: `x` (d-dim), per-polytope per-vertex weights
/// `lambda_ids`, and the ⌈log₂N⌉ code binaries `bit_ids`.
pub fn encode_disjunction(
    tag: &str,
    x: &[usize],
    polytopes: &[Polytope],
    codes: &[usize],
    lambda_ids: &[Vec<usize>],
    bit_ids: &[usize],
) -> Result<Vec<Constraint>, EnvelopeError> {
    let n = polytopes.len();
    assert!(n >= 1, "disjunction needs at least one polytope");
    assert_eq!(codes.len(), n);
    let m = bit_ids.len();
    {
        let mut seen = std::collections::BTreeSet::new();
        for &c in codes {
            if !seen.insert(c) {
                return Err(EnvelopeError::CodeCollision);
            }
        }
    }
    let mut cons = Vec::new();

    // 5.a: x_t = ΣΣ λ_{i,j} v_{i,j,t}
    for (t, &xt) in x.iter().enumerate() {
        let mut terms = vec![(1.0, xt)];
        for (i, poly) in polytopes.iter().enumerate() {
            for (j, v) in poly.vertices.iter().enumerate() {
                if v[t] != 0.0 {
                    terms.push((-v[t], lambda_ids[i][j]));
                }
            }
        }
        cons.push(Constraint::linear(format!("{tag}.comb[{t}]"), terms, Sense::Eq, 0.0));
    }

    // 5.b: ΣΣ λ = 1
    let mut sum_terms = Vec::new();
    for lams in lambda_ids {
        for &l in lams {
            sum_terms.push((1.0, l));
        }
    }
    cons.push(Constraint::linear(format!("{tag}.simplex"), sum_terms, Sense::Eq, 1.0));

    // 5.c: Σ_{k≠i} Σ_j λ_{k,j} ≤ Σ_l |z_l − z̄_{i,l}|
    for i in 0..n {
        let (ham_const, ham_terms) = hamming_expr(bit_ids, codes[i]);
        let mut terms = Vec::new();
        for (k, lams) in lambda_ids.iter().enumerate() {
            if k != i {
                for &l in lams {
                    terms.push((1.0, l));
                }
            }
        }
        for (c, z) in ham_terms {
            terms.push((-c, z));
        }
        cons.push(Constraint::linear(format!("{tag}.select[{i}]"), terms, Sense::Le, ham_const));
    }

    // forbidden codes: Σ_l |z_l − c_l| ≥ 1
    if m > 0 {
        let used: std::collections::BTreeSet<usize> = codes.iter().cloned().collect();
        for code in 0..(1usize << m) {
            if !used.contains(&code) {
                let (ham_const, ham_terms) = hamming_expr(bit_ids, code);
                let terms = ham_terms.iter().map(|&(c, z)| (-c, z)).collect();
                cons.push(Constraint::linear(
                    format!("{tag}.forbid[{code}]"),
                    terms,
                    Sense::Le,
                    ham_const - 1.0,
                ));
            }
        }
    }
    Ok(cons)
}

/// Allocates weight and code variables on `program` and emits the full
/// disjunction for `x ∈ ∪ polytopes` with Gray-coded cells. Returns the
/// λ ids per polytope and the code bit ids.
pub fn add_disjunction(
    program: &mut MibpProgram,
    tag: &str,
    x: &[usize],
    polytopes: &[Polytope],
) -> Result<(Vec<Vec<usize>>, Vec<usize>), EnvelopeError> {
    let n = polytopes.len();
    let m = bits_for(n);
    let codes: Vec<usize> = (0..n).map(gray_code).collect();
    let mut lambda_ids = Vec::with_capacity(n);
    for (i, poly) in polytopes.iter().enumerate() {
        let mut ids = Vec::with_capacity(poly.vertices.len());
        for j in 0..poly.vertices.len() {
            ids.push(program.variables.len());
            program.variables.push(Variable::continuous(format!("{tag}.lam[{i},{j}]"), 0.0, 1.0));
        }
        lambda_ids.push(ids);
    }
    let mut bit_ids = Vec::with_capacity(m);
    for l in 0..m {
        bit_ids.push(program.variables.len());
        program.variables.push(Variable::binary(format!("{tag}.n[{l}]")));
    }
    let cons = encode_disjunction(tag, x, polytopes, &codes, &lambda_ids, &bit_ids)?;
    program.constraints.extend(cons);
    Ok((lambda_ids, bit_ids))
}

// ---------------------------------------------------------------------------
// grids
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum SlotKind {
    /// One scalar variable over an interval grid.
    Scalar,
    /// The (cos, sin) pair of one rotation, gridded by θ-cells.
    Rotation,
}

/// One gridded slot: the program variables it constrains, the underlying
/// scalar range (θ for rotations), and its cells as per-variable boxes.
#[derive(Clone, Debug)]
pub struct GriddedSlot {
    pub name: String,
    pub kind: SlotKind,
    pub vars: Vec<usize>,
    pub scalar_range: (f64, f64),
    /// Scalar sub-interval per cell (drives discretization).
    pub scalar_cells: Vec<(f64, f64)>,
    /// Per-variable box per cell.
    pub cells: Vec<Vec<(f64, f64)>>,
}

impl GriddedSlot {
    /// Uniform scalar grid.
    pub fn scalar(name: impl Into<String>, var: usize, range: (f64, f64), segments: usize) -> Self {
        assert!(segments >= 1);
        let step = (range.1 - range.0) / segments as f64;
        let scalar_cells: Vec<(f64, f64)> = (0..segments)
            .map(|k| (range.0 + k as f64 * step, range.0 + (k + 1) as f64 * step))
            .collect();
        let cells = scalar_cells.iter().map(|&c| vec![c]).collect();
        GriddedSlot {
            name: name.into(),
            kind: SlotKind::Scalar,
            vars: vec![var],
            scalar_range: range,
            scalar_cells,
            cells,
        }
    }

    /// Rotation grid: θ-cells realized as (cos, sin) boxes; the θ range
    /// must lie within [−π/2, π/2].
    pub fn rotation(
        name: impl Into<String>,
        cos_var: usize,
        sin_var: usize,
        range: (f64, f64),
        segments: usize,
    ) -> Self {
        assert!(segments >= 1);
        let step = (range.1 - range.0) / segments as f64;
        let mut scalar_cells = Vec::with_capacity(segments);
        let mut cells = Vec::with_capacity(segments);
        for k in 0..segments {
            let ta = range.0 + k as f64 * step;
            let tb = range.0 + (k + 1) as f64 * step;
            scalar_cells.push((ta, tb));
            let (ca, cb) = (ta.cos(), tb.cos());
            let c_hi = if ta <= 0.0 && tb >= 0.0 { 1.0 } else { ca.max(cb) };
            let c_lo = ca.min(cb);
            let (s_lo, s_hi) = (ta.sin(), tb.sin()); // sin is monotone here
            cells.push(vec![(c_lo, c_hi), (s_lo, s_hi)]);
        }
        GriddedSlot {
            name: name.into(),
            kind: SlotKind::Rotation,
            vars: vec![cos_var, sin_var],
            scalar_range: range,
            scalar_cells,
            cells,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn bits(&self) -> usize {
        bits_for(self.n_cells())
    }

    /// Cell index for a scalar value: boundary values map to the lower
    /// cell, values beyond the range clamp to the edge cells.
    pub fn cell_of(&self, value: f64) -> usize {
        let n = self.n_cells();
        for (k, &(_, hi)) in self.scalar_cells.iter().enumerate() {
            if value <= hi {
                return k;
            }
        }
        n - 1
    }

    /// Box-corner polytope of a cell (2 vertices for intervals, 4 for
    /// rotation boxes, counterclockwise from the low corner).
    pub fn cell_polytope(&self, cell: usize) -> Polytope {
        let b = &self.cells[cell];
        let vertices = match b.len() {
            1 => vec![vec![b[0].0], vec![b[0].1]],
            2 => vec![
                vec![b[0].0, b[1].0],
                vec![b[0].1, b[1].0],
                vec![b[0].1, b[1].1],
                vec![b[0].0, b[1].1],
            ],
            d => panic!("unsupported slot dimension {d}"),
        };
        Polytope { vertices }
    }

    /// Range of one slot variable over all cells.
    pub fn var_range(&self, var: usize) -> (f64, f64) {
        let t = self.vars.iter().position(|&v| v == var).expect("var in slot");
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.cells {
            lo = lo.min(c[t].0);
            hi = hi.max(c[t].1);
        }
        (lo, hi)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Grid {
    pub slots: Vec<GriddedSlot>,
}

impl Grid {
    pub fn slot_of(&self, var: usize) -> Option<usize> {
        self.slots.iter().position(|s| s.vars.contains(&var))
    }

    /// Total code bits over all slots.
    pub fn total_bits(&self) -> usize {
        self.slots.iter().map(|s| s.bits()).sum()
    }
}

/// Restricts each slot's disjunction to its occupied cells (possibly
/// disconnected). `occupied[s]` lists cell indices of slot `s`.
pub fn restrict_grid(grid: &Grid, occupied: &[Vec<usize>]) -> Result<Grid, EnvelopeError> {
    assert_eq!(occupied.len(), grid.slots.len());
    let mut slots = Vec::with_capacity(grid.slots.len());
    for (s, slot) in grid.slots.iter().enumerate() {
        let mut keep: Vec<usize> = occupied[s].clone();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() {
            return Err(EnvelopeError::EmptyRestriction(slot.name.clone()));
        }
        let mut restricted = slot.clone();
        restricted.scalar_cells = keep.iter().map(|&k| slot.scalar_cells[k]).collect();
        restricted.cells = keep.iter().map(|&k| slot.cells[k].clone()).collect();
        slots.push(restricted);
    }
    Ok(Grid { slots })
}

// ---------------------------------------------------------------------------
// MICP compilation
// ---------------------------------------------------------------------------

/// A product variable `w = x·y` introduced by the compilation.
#[derive(Clone, Copy, Debug)]
pub struct ProductVar {
    pub w: usize,
    pub x: usize,
    pub y: usize,
}

/// Envelope-compiled program: no bilinear constraints remain; binaries are
/// the original ones plus the slot code bits.
#[derive(Clone, Debug)]
pub struct MicpProgram {
    pub program: MibpProgram,
    pub grid: Grid,
    pub products: Vec<ProductVar>,
    /// Per slot: λ ids per cell, code bit ids, and the cell codes.
    pub slot_lambdas: Vec<Vec<Vec<usize>>>,
    pub slot_bits: Vec<Vec<usize>>,
    pub slot_codes: Vec<Vec<usize>>,
    /// Variable count of the source program (its point is a prefix).
    pub base_n_vars: usize,
    pub binary_count: usize,
    /// Worst-case envelope gap per rewritten bilinear constraint.
    pub constraint_gaps: Vec<(String, f64)>,
    pub envelope_gap: f64,
}

impl MicpProgram {
    /// Gap bound over constraints whose tag starts with `prefix`.
    pub fn gap_for(&self, prefix: &str) -> f64 {
        self.constraint_gaps
            .iter()
            .filter(|(t, _)| t.starts_with(prefix))
            .map(|&(_, g)| g)
            .fold(0.0, f64::max)
    }

    /// Lifts a point of the source program onto the compiled variable
    /// space: exact products, containing cells, interpolation weights and
    /// Gray codes. Slot values outside the grid range clamp inward.
    pub fn lift_point(&self, base: &[f64]) -> Vec<f64> {
        assert_eq!(base.len(), self.base_n_vars);
        let mut x = vec![0.0; self.program.n_vars()];
        x[..base.len()].copy_from_slice(base);
        for p in &self.products {
            x[p.w] = base[p.x] * base[p.y];
        }
        for (s, slot) in self.grid.slots.iter().enumerate() {
            let value = match slot.kind {
                SlotKind::Scalar => base[slot.vars[0]],
                SlotKind::Rotation => base[slot.vars[1]].atan2(base[slot.vars[0]]),
            };
            let cell = slot.cell_of(value);
            let b = &slot.cells[cell];
            let lam = &self.slot_lambdas[s][cell];
            match slot.kind {
                SlotKind::Scalar => {
                    let (lo, hi) = b[0];
                    let t = if hi > lo {
                        ((base[slot.vars[0]] - lo) / (hi - lo)).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    x[lam[0]] = 1.0 - t;
                    x[lam[1]] = t;
                }
                SlotKind::Rotation => {
                    let (cl, ch) = b[0];
                    let (sl, sh) = b[1];
                    let tc = if ch > cl {
                        ((base[slot.vars[0]] - cl) / (ch - cl)).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let ts = if sh > sl {
                        ((base[slot.vars[1]] - sl) / (sh - sl)).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    // vertex order: (lo,lo), (hi,lo), (hi,hi), (lo,hi)
                    x[lam[0]] = (1.0 - tc) * (1.0 - ts);
                    x[lam[1]] = tc * (1.0 - ts);
                    x[lam[2]] = tc * ts;
                    x[lam[3]] = (1.0 - tc) * ts;
                }
            }
            let code = self.slot_codes[s][cell];
            for (l, &z) in self.slot_bits[s].iter().enumerate() {
                x[z] = if code_bit(code, l) { 1.0 } else { 0.0 };
            }
        }
        x
    }

    /// Cell index per slot encoded in a compiled point's code bits.
    pub fn decode_cells(&self, x: &[f64]) -> Vec<usize> {
        let mut cells = Vec::with_capacity(self.grid.slots.len());
        for s in 0..self.grid.slots.len() {
            let mut code = 0usize;
            for (l, &z) in self.slot_bits[s].iter().enumerate() {
                if x[z] > 0.5 {
                    code |= 1 << l;
                }
            }
            let cell = self.slot_codes[s].iter().position(|&c| c == code).unwrap_or(0);
            cells.push(cell);
        }
        cells
    }
}

/// Compiles a mixed-integer bilinear program into an MICP over `grid`.
/// Programs without bilinear constraints pass through unchanged.
pub fn compile_micp(program: &MibpProgram, grid: &Grid) -> Result<MicpProgram, EnvelopeError> {
    let mut out = program.clone();
    let base_n_vars = program.n_vars();

    // distinct products over bilinear constraints
    let mut product_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut product_order: Vec<(usize, usize)> = Vec::new();
    for c in &program.constraints {
        if !c.is_bilinear() {
            continue;
        }
        for &(_, i, j) in &c.quad_terms {
            let key = (i.min(j), i.max(j));
            if !product_ids.contains_key(&key) {
                product_ids.insert(key, 0);
                product_order.push(key);
            }
        }
    }

    if product_order.is_empty() {
        let binary_count = out.binary_ids().len();
        return Ok(MicpProgram {
            program: out,
            grid: Grid::default(),
            products: Vec::new(),
            slot_lambdas: Vec::new(),
            slot_bits: Vec::new(),
            slot_codes: Vec::new(),
            base_n_vars,
            binary_count,
            constraint_gaps: Vec::new(),
            envelope_gap: 0.0,
        });
    }

    // slots actually used by some product variable
    let mut used_slots: Vec<usize> = Vec::new();
    for &(i, j) in &product_order {
        for v in [i, j] {
            match grid.slot_of(v) {
                Some(s) => {
                    if !used_slots.contains(&s) {
                        used_slots.push(s);
                    }
                }
                None => {
                    return Err(EnvelopeError::UncoveredVariable(
                        program.variables[v].name.clone(),
                    ))
                }
            }
        }
    }
    used_slots.sort_unstable();
    let active_grid = Grid { slots: used_slots.iter().map(|&s| grid.slots[s].clone()).collect() };

    // disjunction per used slot
    let mut slot_lambdas = Vec::new();
    let mut slot_bits = Vec::new();
    let mut slot_codes: Vec<Vec<usize>> = Vec::new();
    for slot in &active_grid.slots {
        let polys: Vec<Polytope> = (0..slot.n_cells()).map(|c| slot.cell_polytope(c)).collect();
        let (lambdas, bits) =
            add_disjunction(&mut out, &format!("grid.{}", slot.name), &slot.vars, &polys)?;
        slot_codes.push((0..slot.n_cells()).map(gray_code).collect());
        slot_lambdas.push(lambdas);
        slot_bits.push(bits);
    }

    // product variables with interval bounds over the full ranges
    let mut products = Vec::with_capacity(product_order.len());
    for &(i, j) in &product_order {
        let si = active_grid.slot_of(i).unwrap();
        let sj = active_grid.slot_of(j).unwrap();
        let (il, iu) = active_grid.slots[si].var_range(i);
        let (jl, ju) = active_grid.slots[sj].var_range(j);
        let (lo, hi) = if i == j {
            let m = il.abs().max(iu.abs());
            let lo = if il <= 0.0 && iu >= 0.0 { 0.0 } else { (il * il).min(iu * iu) };
            (lo, m * m)
        } else {
            let cands = [il * jl, il * ju, iu * jl, iu * ju];
            (
                cands.iter().cloned().fold(f64::INFINITY, f64::min),
                cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let w = out.variables.len();
        out.variables.push(Variable::continuous(
            format!("w[{}*{}]", program.variables[i].name, program.variables[j].name),
            lo,
            hi,
        ));
        product_ids.insert((i, j), w);
        products.push(ProductVar { w, x: i, y: j });
    }

    // per-cell McCormick rows guarded by the cell code(s)
    for p in &products {
        let si = active_grid.slot_of(p.x).unwrap();
        let sj = active_grid.slot_of(p.y).unwrap();
        let ti = active_grid.slots[si].vars.iter().position(|&v| v == p.x).unwrap();
        let tj = active_grid.slots[sj].vars.iter().position(|&v| v == p.y).unwrap();
        let w_bounds = (out.variables[p.w].lo, out.variables[p.w].hi);
        let full_x = active_grid.slots[si].var_range(p.x);
        let full_y = active_grid.slots[sj].var_range(p.y);
        let w_name = out.variables[p.w].name.clone();
        let emit = |ci: usize, cj: usize, out: &mut MibpProgram| -> Result<(), EnvelopeError> {
            let xb = active_grid.slots[si].cells[ci][ti];
            let yb = active_grid.slots[sj].cells[cj][tj];
            let rows = mccormick(p.w, p.x, p.y, xb, yb)?;
            let (mut slack_const, mut slack_terms) =
                hamming_expr(&slot_bits[si], slot_codes[si][ci]);
            if sj != si {
                let (c2, t2) = hamming_expr(&slot_bits[sj], slot_codes[sj][cj]);
                slack_const += c2;
                slack_terms.extend(t2);
            }
            for (k, mut row) in rows.into_iter().enumerate() {
                row.tag = format!("env.{w_name}[{ci},{cj}].{k}");
                // interval big-M over the full box
                let mut hi = -row.rhs;
                for &(c, v) in &row.terms {
                    let (lo_v, hi_v) = if v == p.w {
                        w_bounds
                    } else if v == p.x {
                        full_x
                    } else {
                        full_y
                    };
                    hi += (c * lo_v).max(c * hi_v);
                }
                row.guard = Some(Guard {
                    big_m: hi.max(0.0),
                    slack_terms: slack_terms.clone(),
                    slack_const,
                });
                out.constraints.push(row);
            }
            Ok(())
        };
        if si == sj {
            for ci in 0..active_grid.slots[si].n_cells() {
                emit(ci, ci, &mut out)?;
            }
        } else {
            for ci in 0..active_grid.slots[si].n_cells() {
                for cj in 0..active_grid.slots[sj].n_cells() {
                    emit(ci, cj, &mut out)?;
                }
            }
        }
    }

    // rewrite bilinear constraints linearly in w and collect gap bounds
    let mut constraint_gaps = Vec::new();
    for c in out.constraints.iter_mut() {
        if !c.is_bilinear() {
            continue;
        }
        let mut gap = 0.0;
        let quad = std::mem::take(&mut c.quad_terms);
        for (coef, i, j) in quad {
            let key = (i.min(j), i.max(j));
            let w = product_ids[&key];
            c.terms.push((coef, w));
            let si = active_grid.slot_of(i).unwrap();
            let sj = active_grid.slot_of(j).unwrap();
            let ti = active_grid.slots[si].vars.iter().position(|&v| v == i).unwrap();
            let tj = active_grid.slots[sj].vars.iter().position(|&v| v == j).unwrap();
            let mut worst: f64 = 0.0;
            if si == sj {
                for cell in &active_grid.slots[si].cells {
                    worst = worst.max(envelope_gap(cell[ti], cell[tj]));
                }
            } else {
                let wx: f64 =
                    active_grid.slots[si].cells.iter().map(|c| c[ti].1 - c[ti].0).fold(0.0, f64::max);
                let wy: f64 =
                    active_grid.slots[sj].cells.iter().map(|c| c[tj].1 - c[tj].0).fold(0.0, f64::max);
                worst = 0.25 * wx * wy;
            }
            gap += coef.abs() * worst;
        }
        constraint_gaps.push((c.tag.clone(), gap));
    }

    let binary_count = out.binary_ids().len();
    let envelope_gap = constraint_gaps.iter().map(|&(_, g)| g).fold(0.0, f64::max);
    Ok(MicpProgram {
        program: out,
        grid: active_grid,
        products,
        slot_lambdas,
        slot_bits,
        slot_codes,
        base_n_vars,
        binary_count,
        constraint_gaps,
        envelope_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{evaluate, QuadObjective};

    #[test]
    fn mccormick_exact_at_corners() {
        let rows = mccormick(2, 0, 1, (0.0, 1.0), (0.0, 1.0)).unwrap();
        // at (1,1) the envelope forces w = 1
        let feasible = |w: f64| rows.iter().all(|r| r.violation(&[1.0, 1.0, w]) < 1e-12);
        assert!(feasible(1.0));
        assert!(!feasible(0.99));
        assert!(!feasible(1.01));
    }

    #[test]
    fn mccormick_gap_at_center() {
        let rows = mccormick(2, 0, 1, (0.0, 1.0), (0.0, 1.0)).unwrap();
        // at (0.5, 0.5): w ∈ [0, 0.5], true product 0.25 inside
        let feasible = |w: f64| rows.iter().all(|r| r.violation(&[0.5, 0.5, w]) < 1e-12);
        assert!(feasible(0.0));
        assert!(feasible(0.25));
        assert!(feasible(0.5));
        assert!(!feasible(-0.01));
        assert!(!feasible(0.51));
        assert_eq!(envelope_gap((0.0, 1.0), (0.0, 1.0)), 0.25);
    }

    #[test]
    fn mccormick_degenerate_interval_is_exact() {
        // xl = xu = c collapses to w = c·y
        let rows = mccormick(2, 0, 1, (0.7, 0.7), (-1.0, 1.0)).unwrap();
        for y in [-1.0, -0.3, 0.2, 1.0] {
            let feasible = |w: f64| rows.iter().all(|r| r.violation(&[0.7, y, w]) < 1e-10);
            assert!(feasible(0.7 * y));
            assert!(!feasible(0.7 * y + 1e-6));
            assert!(!feasible(0.7 * y - 1e-6));
        }
    }

    #[test]
    fn mccormick_rejects_bad_bounds() {
        assert!(matches!(
            mccormick(2, 0, 1, (1.0, 0.0), (0.0, 1.0)),
            Err(EnvelopeError::DegenerateBounds(_, _))
        ));
    }

    #[test]
    fn gray_codes_distinct_and_adjacent() {
        for m in 1..5 {
            let n = 1usize << m;
            let codes: Vec<usize> = (0..n).map(gray_code).collect();
            let mut sorted = codes.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), n);
            for k in 1..n {
                assert_eq!((codes[k] ^ codes[k - 1]).count_ones(), 1);
            }
        }
    }

    #[test]
    fn bits_for_matches_log2_ceiling() {
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(3), 2);
        assert_eq!(bits_for(17), 5);
        assert_eq!(bits_for(32), 5);
    }

    fn toy_disjunction(n_boxes: usize) -> (MibpProgram, Vec<Vec<usize>>, Vec<usize>) {
        // x ∈ R², boxes [2k, 2k+1] × [0, 1]
        let mut program = MibpProgram {
            variables: vec![
                Variable::continuous("x0", -100.0, 100.0),
                Variable::continuous("x1", -100.0, 100.0),
            ],
            constraints: vec![],
            objective: QuadObjective::default(),
            theta: vec![],
        };
        let polys: Vec<Polytope> = (0..n_boxes)
            .map(|k| {
                let lo = 2.0 * k as f64;
                Polytope {
                    vertices: vec![
                        vec![lo, 0.0],
                        vec![lo + 1.0, 0.0],
                        vec![lo + 1.0, 1.0],
                        vec![lo, 1.0],
                    ],
                }
            })
            .collect();
        let (lambdas, bits) = add_disjunction(&mut program, "d", &[0, 1], &polys).unwrap();
        (program, lambdas, bits)
    }

    /// Feasibility of the emitted system at fixed (x, z) using the natural
    /// interpolation witness; exactness of (5.c) at Hamming 0 makes this
    /// the only candidate.
    fn encoding_feasible(
        program: &MibpProgram,
        lambdas: &[Vec<usize>],
        bits: &[usize],
        x: [f64; 2],
        code: usize,
        boxes: &[(f64, f64)],
    ) -> bool {
        let gray_pos = (0..boxes.len()).position(|i| gray_code(i) == code);
        let Some(cell) = gray_pos else {
            // unused code: the forbidden row must exclude it outright
            let mut point = vec![0.0; program.n_vars()];
            for (l, &z) in bits.iter().enumerate() {
                point[z] = ((code >> l) & 1) as f64;
            }
            return !program
                .constraints
                .iter()
                .filter(|c| c.tag.contains("forbid"))
                .any(|c| c.violation(&point) > 1e-9);
        };
        let (lo, hi) = boxes[cell];
        if x[0] < lo - 1e-12 || x[0] > hi + 1e-12 || x[1] < -1e-12 || x[1] > 1.0 + 1e-12 {
            return false;
        }
        let mut point = vec![0.0; program.n_vars()];
        point[0] = x[0];
        point[1] = x[1];
        let tx = (x[0] - lo) / (hi - lo);
        let ty = x[1];
        point[lambdas[cell][0]] = (1.0 - tx) * (1.0 - ty);
        point[lambdas[cell][1]] = tx * (1.0 - ty);
        point[lambdas[cell][2]] = tx * ty;
        point[lambdas[cell][3]] = (1.0 - tx) * ty;
        for (l, &z) in bits.iter().enumerate() {
            point[z] = ((gray_code(cell) >> l) & 1) as f64;
        }
        evaluate(program, &point).max_violation < 1e-9
    }

    #[test]
    fn code_match_confines_to_polytope() {
        let (program, lambdas, bits) = toy_disjunction(2);
        let boxes = [(0.0, 1.0), (2.0, 3.0)];
        assert!(encoding_feasible(&program, &lambdas, &bits, [0.5, 0.5], gray_code(0), &boxes));
        assert!(!encoding_feasible(&program, &lambdas, &bits, [2.5, 0.5], gray_code(0), &boxes));
        assert!(encoding_feasible(&program, &lambdas, &bits, [2.5, 0.5], gray_code(1), &boxes));
    }

    #[test]
    fn unused_code_is_forbidden() {
        let (program, lambdas, bits) = toy_disjunction(3);
        let used: Vec<usize> = (0..3).map(gray_code).collect();
        let unused: Vec<usize> = (0..4).filter(|c| !used.contains(c)).collect();
        assert_eq!(unused.len(), 1);
        let boxes = [(0.0, 1.0), (2.0, 3.0), (4.0, 5.0)];
        assert!(!encoding_feasible(&program, &lambdas, &bits, [1.5, 0.5], unused[0], &boxes));
    }

    #[test]
    fn code_collision_detected() {
        let polys = vec![
            Polytope { vertices: vec![vec![0.0], vec![1.0]] },
            Polytope { vertices: vec![vec![2.0], vec![3.0]] },
        ];
        let err = encode_disjunction("d", &[0], &polys, &[1, 1], &[vec![1, 2], vec![3, 4]], &[5]);
        assert!(matches!(err, Err(EnvelopeError::CodeCollision)));
    }

    #[test]
    fn restrict_grid_counts_bits() {
        let slot = GriddedSlot::scalar("t", 0, (0.0, 8.0), 8);
        let grid = Grid { slots: vec![slot] };
        let restricted = restrict_grid(&grid, &[vec![0, 3, 7]]).unwrap();
        assert_eq!(restricted.slots[0].n_cells(), 3);
        assert_eq!(restricted.slots[0].bits(), 2);
        let all = restrict_grid(&grid, &[(0..8).collect()]).unwrap();
        assert_eq!(all.slots[0].bits(), grid.slots[0].bits());
        assert!(matches!(restrict_grid(&grid, &[vec![]]), Err(EnvelopeError::EmptyRestriction(_))));
    }

    #[test]
    fn scalar_cell_lookup_uses_lower_tie_break() {
        let slot = GriddedSlot::scalar("t", 0, (0.0, 4.0), 4);
        assert_eq!(slot.cell_of(0.0), 0);
        assert_eq!(slot.cell_of(1.0), 0); // interior grid line → lower cell
        assert_eq!(slot.cell_of(1.5), 1);
        assert_eq!(slot.cell_of(4.0), 3);
        assert_eq!(slot.cell_of(99.0), 3);
    }

    #[test]
    fn compile_passthrough_without_bilinear() {
        let program = MibpProgram {
            variables: vec![Variable::continuous("x", 0.0, 1.0)],
            constraints: vec![Constraint::linear("c", vec![(1.0, 0)], Sense::Le, 0.5)],
            objective: QuadObjective::default(),
            theta: vec![],
        };
        let micp = compile_micp(&program, &Grid::default()).unwrap();
        assert_eq!(micp.program.n_vars(), 1);
        assert_eq!(micp.program.constraints.len(), 1);
        assert!(micp.slot_bits.is_empty());
    }

    #[test]
    fn compile_single_product_lifts_exactly() {
        let mut program = MibpProgram {
            variables: vec![
                Variable::continuous("x", 0.0, 2.0),
                Variable::continuous("y", -1.0, 1.0),
            ],
            constraints: vec![],
            objective: QuadObjective::default(),
            theta: vec![],
        };
        program.constraints.push(Constraint::bilinear(
            "prod",
            vec![],
            vec![(1.0, 0, 1)],
            Sense::Eq,
            0.9,
        ));
        let grid = Grid {
            slots: vec![
                GriddedSlot::scalar("x", 0, (0.0, 2.0), 4),
                GriddedSlot::scalar("y", 1, (-1.0, 1.0), 4),
            ],
        };
        let micp = compile_micp(&program, &grid).unwrap();
        assert!(micp.program.constraints.iter().all(|c| !c.is_bilinear()));
        assert_eq!(micp.binary_count, 4);
        // a true point lifts to a compiled point feasible in everything
        // except the (approximated) product equation itself
        let base = vec![1.5, 0.6];
        let lifted = micp.lift_point(&base);
        let eval = evaluate(&micp.program, &lifted);
        let viol: f64 = micp
            .program
            .constraints
            .iter()
            .zip(&eval.violations)
            .filter(|(c, _)| c.tag != "prod")
            .map(|(_, &v)| v)
            .fold(0.0, f64::max);
        assert!(viol < 1e-9, "violation {viol}");
        assert!((lifted[micp.products[0].w] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn uncovered_variable_is_error() {
        let mut program = MibpProgram {
            variables: vec![
                Variable::continuous("x", 0.0, 2.0),
                Variable::continuous("y", -1.0, 1.0),
            ],
            constraints: vec![],
            objective: QuadObjective::default(),
            theta: vec![],
        };
        program.constraints.push(Constraint::bilinear(
            "prod",
            vec![],
            vec![(1.0, 0, 1)],
            Sense::Le,
            0.0,
        ));
        let grid = Grid { slots: vec![GriddedSlot::scalar("x", 0, (0.0, 2.0), 2)] };
        assert!(matches!(
            compile_micp(&program, &grid),
            Err(EnvelopeError::UncoveredVariable(_))
        ));
    }
}
