use bookshelf_opt::learn::*;
use bookshelf_opt::model::*;
use bookshelf_opt::nlp::*;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let shelf_w: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let per_round: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(250);
    let shelf = ShelfSpec::new(shelf_w, 11.0);
    let gen = GenConfig {
        width_range: (2.0, 4.0),
        height_range: (5.5, 9.5),
        gap_range: (0.02, 0.5),
        ..GenConfig::default()
    };
    let t0 = Instant::now();
    let config = BootstrapConfig {
        rounds: 2, per_round, seed0: 400, shelf, gen: gen.clone(),
        nlp_tols: NlpTols::pipeline(),
        ..Default::default()
    };
    let report = bootstrap_dataset(&config);
    println!("bootstrap: success {:?}, dataset {} in {:.1}s", report.per_round_success, report.dataset.len(), t0.elapsed().as_secs_f64());

    let tols = NlpTols::pipeline();
    let mut knn_ok = 0; let mut manual_ok = 0; let mut default_ok = 0; let mut total = 0;
    let mut knn_cands = 0usize;
    let t1 = Instant::now();
    for seed in 5000..5060u64 {
        let Ok((inst, _)) = generate_with_witness(seed, shelf, 3, &gen) else { continue };
        total += 1;
        let program = build_minlp(&inst);
        let layout = VarLayout::for_instance(&inst);
        let check = |r: &NlpResult| -> bool {
            r.status == NlpStatus::Feasible && check_solution(&inst, &layout.decode(&r.point), 1e-4).passed
        };
        let cands: Vec<Vec<f64>> = knn_query(&report.dataset, &inst.theta(), 3, KnnOrder::Nearest)
            .unwrap().iter().map(|r| candidate_from_record(r, &inst)).collect();
        let (r, consumed) = solve_mpcc_polished(&program, 1e-3, &cands, tols, NlpBudget::default());
        if check(&r) { knn_ok += 1; knn_cands += consumed; }
        let (r, _) = solve_mpcc_polished(&program, 1e-3, &[warm_start_manual(&inst)], tols, NlpBudget::default());
        if check(&r) { manual_ok += 1; }
        let zeros = vec![0.0; layout.n_vars()];
        let (r, _) = solve_mpcc_polished(&program, 1e-3, &[zeros], tols, NlpBudget::default());
        if check(&r) { default_ok += 1; }
    }
    println!("shelf {}x11, {} tests: knn3 {} manual {} default {} (avg cands {:.2}) tests took {:.1}s",
        shelf_w, total, knn_ok, manual_ok, default_ok, knn_cands as f64 / knn_ok.max(1) as f64, t1.elapsed().as_secs_f64());
}
