use bookshelf_opt::learn::*;
use bookshelf_opt::model::*;
use bookshelf_opt::nlp::*;

fn main() {
    let config = BootstrapConfig { rounds: 1, per_round: 20, seed0: 400, ..Default::default() };
    let report = bootstrap_dataset(&config);
    println!("round0 success: {:?}, dataset {}", report.per_round_success, report.dataset.len());

    let mut solved = 0;
    for seed in 900..910u64 {
        let Ok((inst, _)) = generate_with_witness(seed, ShelfSpec::new(18.0, 11.0), 3, &GenConfig::default()) else { continue };
        let theta = inst.theta();
        let cands: Vec<Vec<f64>> = knn_query(&report.dataset, &theta, 3, KnnOrder::Nearest)
            .unwrap().iter().map(|r| candidate_from_record(r, &inst)).collect();
        let program = build_minlp(&inst);
        let (r, consumed) = solve_mpcc_polished(&program, 1e-3, &cands, NlpTols::default(), NlpBudget::default());
        let layout = VarLayout::for_instance(&inst);
        let sol = layout.decode(&r.point);
        let rep = check_solution(&inst, &sol, 1e-4);
        println!("seed {seed}: status {:?} viol {:.2e} consumed {consumed} oracle {}", r.status, r.violation, rep.passed);
        if r.status == NlpStatus::Feasible && rep.passed { solved += 1; }
    }
    println!("knn solved {solved}/10");
}
