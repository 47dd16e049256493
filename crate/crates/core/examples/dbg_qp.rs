use bookshelf_opt::ir::{Constraint, QuadObjective, Sense, Variable};
use bookshelf_opt::qp::*;

fn main() {
    let mut obj = QuadObjective::default();
    obj.add_square(1.0, 0, 1.0);
    let p = bookshelf_opt::ir::ConvexProgram {
        variables: vec![Variable::continuous("x", -10.0, 10.0)],
        constraints: vec![Constraint::linear("lb", vec![(-1.0, 0)], Sense::Le, -2.0)],
        objective: obj,
    };
    let r = solve_qp(&p, None, 4000, QpTols::default()).unwrap();
    println!("status {:?} x {:?} obj {} iters {} rp {} rd {}", r.status, r.x, r.objective, r.iterations, r.primal_residual, r.dual_residual);

    let mut obj = QuadObjective::default();
    obj.add_square(1.0, 0, 0.7);
    let p = bookshelf_opt::ir::ConvexProgram {
        variables: vec![Variable::continuous("x", 0.0, 1.0)],
        constraints: vec![],
        objective: obj,
    };
    let mut engine = QpEngine::new(&p).unwrap();
    let pinned = engine.solve(Some(&[(1.0, 1.0)]), None, 2000, QpTols::default(), true);
    println!("pinned status {:?} x {:?} iters {}", pinned.status, pinned.x, pinned.iterations);
}
