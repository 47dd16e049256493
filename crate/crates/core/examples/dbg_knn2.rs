use bookshelf_opt::ir::*;
use bookshelf_opt::learn::*;
use bookshelf_opt::model::*;
use bookshelf_opt::nlp::*;

fn main() {
    let config = BootstrapConfig { rounds: 1, per_round: 100, seed0: 400, nlp_tols: NlpTols::pipeline(), ..Default::default() };
    let report = bootstrap_dataset(&config);
    println!("dataset {}", report.dataset.len());

    for seed in [5000u64, 5002, 5004] {
        let Ok((inst, _)) = generate_with_witness(seed, ShelfSpec::new(18.0, 11.0), 3, &GenConfig::default()) else { continue };
        let program = build_minlp(&inst);
        let nlpp = to_mpcc(&program, 1e-3);
        let manual = warm_start_manual(&inst);
        let ev = evaluate(&program, &manual);
        println!("seed {seed} manual start viol {:.3e}", ev.max_violation);
        let records = knn_query(&report.dataset, &inst.theta(), 3, KnnOrder::Nearest).unwrap();
        for (k, rec) in records.iter().enumerate() {
            let cand = candidate_from_record(rec, &inst);
            let ev = evaluate(&program, &cand);
            let r = solve_nlp(&nlpp, &cand, NlpTols::pipeline(), NlpBudget::default());
            // top-3 violated constraint tags at start
            let mut v: Vec<(f64, &str)> = program.constraints.iter().zip(&ev.violations)
                .map(|(c, &vl)| (vl, c.tag.as_str())).collect();
            v.sort_by(|a, b| b.0.total_cmp(&a.0));
            println!("  cand{k}: start viol {:.3e} (top: {} {:.2e}, {} {:.2e}) -> {:?} viol {:.2e} outer {} inner {}",
                ev.max_violation, v[0].1, v[0].0, v[1].1, v[1].0, r.status, r.violation, r.outer_iterations, r.inner_iterations);
        }
    }
}
