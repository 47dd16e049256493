//! Branch-and-bound over QP relaxations for envelope-compiled MICPs.
//!
//! Node selection is best-bound with depth-first plunging after each new
//! incumbent; branching picks the most fractional binary (ties to the
//! lowest variable id). Binaries are fixed through variable bounds, so
//! every node reuses the single KKT factorization of the root relaxation.

use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::envelope::MicpProgram;
use crate::ir::{evaluate, relax_binaries, IrError, VarKind};
use crate::qp::{QpEngine, QpError, QpStatus, QpTols, QpWarmStart};

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum MipStatus {
    Optimal,
    /// Feasible incumbent with the reported relative gap.
    Feasible(f64),
    Infeasible,
    TimeLimit,
}

#[derive(Clone, Debug)]
pub struct MipResult {
    pub status: MipStatus,
    pub incumbent: Option<Vec<f64>>,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    pub warnings: Vec<String>,
    /// CSV rows "node,depth,bound,incumbent" when logging is enabled.
    pub node_log: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct BnbOptions {
    /// Binaries pinned before the search; never branched.
    pub fixed: HashMap<usize, f64>,
    pub time_limit: Option<Duration>,
    pub gap_tol: f64,
    /// Full-space feasible point seeding the incumbent.
    pub incumbent_hint: Option<Vec<f64>>,
    pub max_nodes: usize,
    pub qp_max_iter: usize,
    pub qp_tols: QpTols,
    /// Polish node relaxations (None: only on small programs).
    pub polish_relaxations: Option<bool>,
    pub log_nodes: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions {
            fixed: HashMap::new(),
            time_limit: None,
            gap_tol: 1e-6,
            incumbent_hint: None,
            max_nodes: 200_000,
            qp_max_iter: 4000,
            qp_tols: QpTols::default(),
            polish_relaxations: None,
            log_nodes: false,
        }
    }
}

const INT_TOL: f64 = 1e-6;

struct Node {
    fixings: Vec<(usize, f64)>,
    depth: usize,
    bound: f64,
    warm: Option<Arc<QpWarmStart>>,
    seq: usize,
}

struct HeapEntry {
    bound: f64,
    seq: usize,
    node: Node,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // min-heap on bound, then seq, inside std's max-heap
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn solve_bnb(micp: &MicpProgram, options: &BnbOptions) -> Result<MipResult, QpError> {
    let program = &micp.program;
    let relaxation = relax_binaries(program).map_err(|e| match e {
        IrError::ResidualNonconvexity(tag) => {
            QpError::NonConvexInput(format!("bilinear constraint `{tag}`; envelope-compile first"))
        }
        other => QpError::NonConvexInput(other.to_string()),
    })?;
    let mut engine = QpEngine::new(&relaxation)?;
    let n = program.n_vars();
    let binaries: Vec<usize> = program
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    let polish = options
        .polish_relaxations
        .unwrap_or(n <= 400);

    let mut warnings = Vec::new();
    let mut node_log = Vec::new();

    // base bounds with the pre-fixed binaries applied
    let mut base_bounds: Vec<(f64, f64)> =
        program.variables.iter().map(|v| (v.lo, v.hi)).collect();
    for (&var, &val) in &options.fixed {
        let val = val.round();
        base_bounds[var] = (val, val);
    }

    let bounds_for = |fixings: &[(usize, f64)]| {
        let mut b = base_bounds.clone();
        for &(var, val) in fixings {
            b[var] = (val, val);
        }
        b
    };

    let mut incumbent: Option<Vec<f64>> = None;
    let mut incumbent_obj = f64::INFINITY;

    // refine a full integral assignment into the best point for it
    let refine = |assignment: &[(usize, f64)],
                      engine: &mut QpEngine,
                      warm: Option<&QpWarmStart>|
     -> Option<(Vec<f64>, f64)> {
        let b = {
            let mut b = base_bounds.clone();
            for &(var, val) in assignment {
                b[var] = (val, val);
            }
            b
        };
        let r = engine.solve(Some(&b), warm, options.qp_max_iter, options.qp_tols, true);
        if r.status != QpStatus::Optimal {
            return None;
        }
        let mut point = r.x.clone();
        for &(var, val) in assignment {
            point[var] = val;
        }
        let eval = evaluate(program, &point);
        if eval.max_violation > INT_TOL {
            return None;
        }
        Some((point, eval.objective))
    };

    // incumbent hint: must agree with the fixed assignment, else ignored
    if let Some(hint) = &options.incumbent_hint {
        let mut valid = hint.len() == program.n_vars();
        if valid {
            for (&var, &val) in &options.fixed {
                if (hint[var] - val.round()).abs() > INT_TOL {
                    valid = false;
                    break;
                }
            }
        }
        if !valid {
            warnings.push("incumbent hint conflicts with fixed assignment; ignored".into());
        } else {
            let assignment: Vec<(usize, f64)> =
                binaries.iter().map(|&b| (b, hint[b].round())).collect();
            let eval = evaluate(program, hint);
            if eval.max_violation <= INT_TOL {
                incumbent_obj = eval.objective;
                incumbent = Some(hint.clone());
            }
            if let Some((point, obj)) = refine(&assignment, &mut engine, None) {
                if obj < incumbent_obj {
                    incumbent_obj = obj;
                    incumbent = Some(point);
                }
            }
            if incumbent.is_none() {
                warnings.push("incumbent hint infeasible; ignored".into());
            }
        }
    }

    let start = Instant::now();
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut dive: Vec<Node> = Vec::new();
    let mut seq = 0usize;
    let mut nodes = 0usize;
    let root = Node { fixings: Vec::new(), depth: 0, bound: f64::NEG_INFINITY, warm: None, seq };
    dive.push(root);
    let mut best_bound = f64::NEG_INFINITY;
    let mut timed_out = false;
    let mut plunging = true;

    let prune_eps = |obj: f64| options.gap_tol * obj.abs().max(1.0);

    while let Some(node) = if plunging { dive.pop().or_else(|| heap.pop().map(|e| e.node)) } else {
        heap.pop().map(|e| e.node).or_else(|| dive.pop())
    } {
        if let Some(limit) = options.time_limit {
            if start.elapsed() > limit {
                timed_out = true;
                break;
            }
        }
        if nodes >= options.max_nodes {
            warnings.push("node limit reached".into());
            timed_out = true;
            break;
        }
        if node.bound >= incumbent_obj - prune_eps(incumbent_obj) {
            continue;
        }
        nodes += 1;

        let b = bounds_for(&node.fixings);
        let r = engine.solve(
            Some(&b),
            node.warm.as_deref(),
            options.qp_max_iter,
            options.qp_tols,
            polish,
        );
        let bound = match r.status {
            QpStatus::PrimalInfeasible => continue,
            QpStatus::MaxIterations => {
                warnings.push(format!("node {} relaxation hit max iterations", node.seq));
                node.bound // parent bound stays valid
            }
            QpStatus::Optimal => node.bound.max(r.objective),
        };
        if options.log_nodes {
            node_log.push(format!(
                "{},{},{:.9},{}",
                node.seq,
                node.depth,
                bound,
                if incumbent_obj.is_finite() { format!("{incumbent_obj:.9}") } else { String::new() }
            ));
        }
        if bound >= incumbent_obj - prune_eps(incumbent_obj) {
            continue;
        }

        // most fractional unfixed binary
        let mut branch_var = None;
        let mut best_frac = INT_TOL;
        for &bv in &binaries {
            if b[bv].0 == b[bv].1 {
                continue;
            }
            let frac = (r.x[bv] - r.x[bv].round()).abs();
            if frac > best_frac {
                best_frac = frac;
                branch_var = Some(bv);
            }
        }

        match branch_var {
            None => {
                // integral relaxation: refine into an incumbent
                let assignment: Vec<(usize, f64)> = binaries
                    .iter()
                    .map(|&bv| (bv, if b[bv].0 == b[bv].1 { b[bv].0 } else { r.x[bv].round() }))
                    .collect();
                let warm = QpWarmStart { x: r.x.clone(), y: r.y.clone() };
                if let Some((point, obj)) = refine(&assignment, &mut engine, Some(&warm)) {
                    if obj < incumbent_obj - 1e-12 {
                        incumbent_obj = obj;
                        incumbent = Some(point);
                        plunging = true; // dive near the new incumbent
                    }
                }
            }
            Some(bv) => {
                let warm = Arc::new(QpWarmStart { x: r.x.clone(), y: r.y.clone() });
                let toward = r.x[bv].round();
                for val in [1.0 - toward, toward] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((bv, val));
                    seq += 1;
                    let child = Node {
                        fixings,
                        depth: node.depth + 1,
                        bound,
                        warm: Some(warm.clone()),
                        seq,
                    };
                    if plunging && val == toward {
                        dive.push(child);
                    } else {
                        heap.push(HeapEntry { bound, seq: child.seq, node: child });
                    }
                }
                if incumbent.is_some() && dive.is_empty() {
                    plunging = false;
                }
            }
        }

        // global bound and gap-based termination
        best_bound = heap
            .iter()
            .map(|e| e.bound)
            .chain(dive.iter().map(|nd| nd.bound))
            .fold(f64::INFINITY, f64::min);
        if incumbent_obj.is_finite() {
            let gap_abs = incumbent_obj - best_bound.min(incumbent_obj);
            if !best_bound.is_finite() || gap_abs <= prune_eps(incumbent_obj) {
                break;
            }
        }
    }

    let final_bound = if heap.is_empty() && dive.is_empty() && !timed_out {
        incumbent_obj
    } else {
        best_bound
            .min(incumbent_obj)
    };
    let status = match (&incumbent, timed_out) {
        (None, true) => MipStatus::TimeLimit,
        (None, false) => MipStatus::Infeasible,
        (Some(_), timed) => {
            let gap = if incumbent_obj.abs() > 1e-12 {
                ((incumbent_obj - final_bound) / incumbent_obj.abs()).max(0.0)
            } else {
                (incumbent_obj - final_bound).max(0.0)
            };
            if gap <= options.gap_tol {
                MipStatus::Optimal
            } else if timed {
                MipStatus::TimeLimit
            } else {
                MipStatus::Feasible(gap)
            }
        }
    };

    Ok(MipResult {
        status,
        objective: incumbent_obj,
        incumbent,
        bound: final_bound,
        nodes,
        warnings,
        node_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{compile_micp, Grid};
    use crate::ir::{fix_integers, Constraint, MibpProgram, QuadObjective, Sense, Variable};
    use crate::qp::solve_qp;

    fn as_micp(program: MibpProgram) -> MicpProgram {
        compile_micp(&program, &Grid::default()).unwrap()
    }

    #[test]
    fn no_binaries_solves_in_one_node() {
        let mut obj = QuadObjective::default();
        obj.add_square(1.0, 0, 0.3);
        let program = MibpProgram {
            variables: vec![Variable::continuous("x", 0.0, 1.0)],
            constraints: vec![],
            objective: obj,
            theta: vec![],
        };
        let r = solve_bnb(&as_micp(program), &BnbOptions::default()).unwrap();
        assert_eq!(r.status, MipStatus::Optimal);
        assert_eq!(r.nodes, 1);
        assert!((r.incumbent.unwrap()[0] - 0.3).abs() < 1e-6);
    }

    fn knapsack_like() -> MibpProgram {
        // min −z1 − z2 s.t. z1 + z2 ≤ 1 → optimum −1
        let variables = vec![Variable::binary("z1"), Variable::binary("z2")];
        let mut objective = QuadObjective::default();
        objective.linear.push((-1.0, 0));
        objective.linear.push((-1.0, 1));
        MibpProgram {
            variables,
            constraints: vec![Constraint::linear(
                "cap",
                vec![(1.0, 0), (1.0, 1)],
                Sense::Le,
                1.0,
            )],
            objective,
            theta: vec![],
        }
    }

    #[test]
    fn two_binary_knapsack() {
        let r = solve_bnb(&as_micp(knapsack_like()), &BnbOptions::default()).unwrap();
        assert_eq!(r.status, MipStatus::Optimal);
        assert!((r.objective + 1.0).abs() < 1e-6, "objective {}", r.objective);
        let inc = r.incumbent.unwrap();
        assert!((inc[0] + inc[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_program_detected() {
        // z1 + z2 ≥ 3 over two binaries
        let variables = vec![Variable::binary("z1"), Variable::binary("z2")];
        let program = MibpProgram {
            variables,
            constraints: vec![Constraint::linear(
                "imp",
                vec![(-1.0, 0), (-1.0, 1)],
                Sense::Le,
                -3.0,
            )],
            objective: QuadObjective::default(),
            theta: vec![],
        };
        let r = solve_bnb(&as_micp(program), &BnbOptions::default()).unwrap();
        assert_eq!(r.status, MipStatus::Infeasible);
    }

    #[test]
    fn fixing_binaries_is_respected() {
        let mut options = BnbOptions::default();
        options.fixed.insert(0, 0.0);
        let r = solve_bnb(&as_micp(knapsack_like()), &options).unwrap();
        assert_eq!(r.status, MipStatus::Optimal);
        let inc = r.incumbent.unwrap();
        assert_eq!(inc[0], 0.0);
        assert!((inc[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn conflicting_hint_is_ignored_with_warning() {
        let mut options = BnbOptions::default();
        options.fixed.insert(0, 0.0);
        options.incumbent_hint = Some(vec![1.0, 0.0]);
        let r = solve_bnb(&as_micp(knapsack_like()), &options).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("hint")));
        assert_eq!(r.status, MipStatus::Optimal);
        assert_eq!(r.incumbent.unwrap()[0], 0.0);
    }

    fn random_micp(seed: u64, n_bin: usize, n_cont: usize) -> MibpProgram {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut variables = Vec::new();
        for i in 0..n_cont {
            variables.push(Variable::continuous(format!("x{i}"), -2.0, 2.0));
        }
        for i in 0..n_bin {
            variables.push(Variable::binary(format!("z{i}")));
        }
        let mut objective = QuadObjective::default();
        for i in 0..n_cont {
            objective.add_square(rng.gen_range(0.5..2.0), i, rng.gen_range(-1.0..1.0));
        }
        for i in 0..n_bin {
            objective.linear.push((rng.gen_range(-2.0..2.0), n_cont + i));
        }
        let mut constraints = Vec::new();
        for c in 0..(n_bin + 1) {
            let mut terms = Vec::new();
            for i in 0..(n_cont + n_bin) {
                if rng.gen_bool(0.5) {
                    terms.push((rng.gen_range(-1.5..1.5), i));
                }
            }
            if terms.is_empty() {
                terms.push((1.0, 0));
            }
            constraints.push(Constraint::linear(
                format!("c{c}"),
                terms,
                Sense::Le,
                rng.gen_range(0.5..2.5),
            ));
        }
        MibpProgram { variables, constraints, objective, theta: vec![] }
    }

    /// Exhaustive enumeration over all binary assignments, each solved as
    /// a convex QP — the independent optimum oracle.
    fn enumeration_optimum(program: &MibpProgram) -> Option<f64> {
        let bins = program.binary_ids();
        let mut best: Option<f64> = None;
        for mask in 0..(1usize << bins.len()) {
            let assignment: HashMap<usize, f64> = bins
                .iter()
                .enumerate()
                .map(|(k, &b)| (b, ((mask >> k) & 1) as f64))
                .collect();
            let convex = fix_integers(program, &assignment).unwrap();
            let r = solve_qp(&convex, None, 8000, QpTols::default()).unwrap();
            if r.status == QpStatus::Optimal {
                best = Some(best.map_or(r.objective, |b: f64| b.min(r.objective)));
            }
        }
        best
    }

    #[test]
    fn matches_enumeration_on_random_programs() {
        for seed in 0..6 {
            let program = random_micp(seed, 6, 3);
            let oracle = enumeration_optimum(&program);
            let r = solve_bnb(&as_micp(program), &BnbOptions::default()).unwrap();
            match oracle {
                None => assert_eq!(r.status, MipStatus::Infeasible, "seed {seed}"),
                Some(best) => {
                    assert_eq!(r.status, MipStatus::Optimal, "seed {seed}");
                    assert!(
                        (r.objective - best).abs() < 1e-6,
                        "seed {seed}: bnb {} vs enumeration {best}",
                        r.objective
                    );
                }
            }
        }
    }

    #[test]
    fn node_log_collects_rows() {
        let mut options = BnbOptions::default();
        options.log_nodes = true;
        let r = solve_bnb(&as_micp(knapsack_like()), &options).unwrap();
        assert!(!r.node_log.is_empty());
        assert!(r.node_log[0].split(',').count() == 4);
    }
}
