use bookshelf_opt::ir::*;
use bookshelf_opt::nlp::*;

fn main() {
    let mut obj = QuadObjective::default();
    obj.add_square(1.0, 0, 0.7);
    let program = MibpProgram {
        variables: vec![Variable::binary("z")],
        constraints: vec![],
        objective: obj,
        theta: vec![],
    };
    let nlp = to_mpcc(&program, 0.0);
    let r = solve_nlp(&nlp, &[0.9], NlpTols::default(), NlpBudget::default());
    println!("status {:?} z {:?} viol {} obj {} outer {} inner {}", r.status, r.point, r.violation, r.objective, r.outer_iterations, r.inner_iterations);
}
