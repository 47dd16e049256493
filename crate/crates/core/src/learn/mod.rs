//! The data-driven layer: dataset store with KNN retrieval, DBSCAN
//! clustering of nonconvex solution coordinates, random-forest cluster
//! classification, reduced integer sets per cluster, integer-strategy
//! extraction, and dataset bootstrapping.

mod dataset;
mod dbscan;
mod forest;
mod strategy;

pub use dataset::{knn_query, Dataset, DatasetError, DatasetRecord, KnnOrder, Standardizer};
pub use dbscan::{dbscan, suggest_eps};
pub use forest::{ForestConfig, RandomForest};
pub use strategy::{discretize_solution, extract_strategy, IntegerStrategy, StrategyError};

use std::time::Instant;

use thiserror::Error;

use crate::admm::{solve_admm, AdmmOptions};
use crate::envelope::Grid;
use crate::model::{
    build_minlp, check_solution, encode_scene, generate_with_witness, objective_value,
    BookshelfSolution, GenConfig, ProblemInstance, ShelfSpec, VarLayout,
};
use crate::nlp::{solve_mpcc_polished, warm_start_manual, NlpBudget, NlpStatus, NlpTols};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("DBSCAN produced no clusters (all points noise)")]
    AllNoise,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

// ---------------------------------------------------------------------------
// clustering on solution coordinates
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ClusterParams {
    /// DBSCAN radius on the standardized coordinates; None picks the
    /// k-distance elbow with k = min_pts.
    pub eps: Option<f64>,
    pub min_pts: usize,
    pub forest: ForestConfig,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams { eps: None, min_pts: 4, forest: ForestConfig::default() }
    }
}

/// Clusters of the nonconvex solution space with their occupied grid
/// cells and a Θ → cluster classifier.
#[derive(Clone, Debug)]
pub struct ClusterModel {
    pub n_clusters: usize,
    /// Per cluster, per grid slot: the occupied cell indices.
    pub occupied: Vec<Vec<Vec<usize>>>,
    pub forest: RandomForest,
    /// DBSCAN label per dataset record (−1 = noise, excluded from training).
    pub labels: Vec<isize>,
    pub eps: f64,
    pub holdout_accuracy: f64,
}

/// Nonconvex solution coordinates of a stored point: per-book angle, plane
/// normals, vertex coordinates (the 48-dim space for 3+1 books).
pub fn solution_coords(n_books: usize, point: &[f64]) -> Vec<f64> {
    VarLayout::for_books(n_books).nonconvex_coords(point)
}

/// Grid cells occupied by one stored solution, per slot.
fn occupied_cells(grid: &Grid, point: &[f64]) -> Vec<usize> {
    grid.slots
        .iter()
        .map(|slot| {
            let value = match slot.kind {
                crate::envelope::SlotKind::Scalar => point[slot.vars[0]],
                crate::envelope::SlotKind::Rotation => {
                    point[slot.vars[1]].atan2(point[slot.vars[0]])
                }
            };
            slot.cell_of(value)
        })
        .collect()
}

/// DBSCAN over the standardized nonconvex solution coordinates, occupied
/// cells per cluster, and a random forest mapping Θ to the cluster label.
/// Noise points are excluded from training.
pub fn fit_clusters(
    dataset: &Dataset,
    n_books: usize,
    grid: &Grid,
    params: &ClusterParams,
) -> Result<ClusterModel, LearnError> {
    if dataset.is_empty() {
        return Err(LearnError::Dataset(DatasetError::EmptyDataset));
    }
    let coords: Vec<Vec<f64>> = dataset
        .records
        .iter()
        .map(|r| solution_coords(n_books, &r.point))
        .collect();
    let rows: Vec<&[f64]> = coords.iter().map(|c| c.as_slice()).collect();
    let standardizer = Standardizer::fit(&rows);
    let std_coords: Vec<Vec<f64>> = coords.iter().map(|c| standardizer.transform(c)).collect();
    let eps = params.eps.unwrap_or_else(|| suggest_eps(&std_coords, params.min_pts));
    let labels = dbscan(&std_coords, eps, params.min_pts);
    let n_clusters = labels.iter().cloned().max().map_or(0, |m| (m + 1).max(0)) as usize;
    if n_clusters == 0 {
        return Err(LearnError::AllNoise);
    }

    let mut occupied = vec![vec![Vec::new(); grid.slots.len()]; n_clusters];
    for (r, record) in dataset.records.iter().enumerate() {
        if labels[r] < 0 {
            continue;
        }
        let cells = occupied_cells(grid, &record.point);
        for (s, cell) in cells.into_iter().enumerate() {
            let list = &mut occupied[labels[r] as usize][s];
            if !list.contains(&cell) {
                list.push(cell);
            }
        }
    }
    for cluster in occupied.iter_mut() {
        for cells in cluster.iter_mut() {
            cells.sort_unstable();
        }
    }

    // train on the labeled records with a deterministic 1-in-5 holdout
    let mut train_x = Vec::new();
    let mut train_y = Vec::new();
    let mut test_x = Vec::new();
    let mut test_y = Vec::new();
    let mut kept = 0usize;
    for (r, record) in dataset.records.iter().enumerate() {
        if labels[r] < 0 {
            continue;
        }
        let label = labels[r] as usize;
        if kept % 5 == 4 {
            test_x.push(record.theta.clone());
            test_y.push(label);
        } else {
            train_x.push(record.theta.clone());
            train_y.push(label);
        }
        kept += 1;
    }
    // the forest must know every label even if a tiny holdout hides one
    let max_label = n_clusters - 1;
    if !train_y.contains(&max_label) {
        if let Some(pos) = test_y.iter().position(|&y| y == max_label) {
            train_x.push(test_x.remove(pos));
            train_y.push(test_y.remove(pos));
        }
    }
    let forest = RandomForest::fit(&train_x, &train_y, &params.forest);
    let holdout_accuracy =
        if test_x.is_empty() { 1.0 } else { forest.accuracy(&test_x, &test_y) };

    Ok(ClusterModel { n_clusters, occupied, forest, labels, eps, holdout_accuracy })
}

/// Points a new problem to one of the existing clusters.
pub fn classify(model: &ClusterModel, theta: &[f64]) -> usize {
    model.forest.predict(theta)
}

/// Writes the model's labels back onto the dataset records.
pub fn apply_labels(dataset: &mut Dataset, model: &ClusterModel) {
    for (r, record) in dataset.records.iter_mut().enumerate() {
        record.cluster = if model.labels[r] >= 0 { Some(model.labels[r] as usize) } else { None };
    }
}

// ---------------------------------------------------------------------------
// dataset bootstrapping
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BaseMethod {
    ManualMpcc,
    Admm,
}

#[derive(Clone, Debug)]
pub struct BootstrapConfig {
    pub rounds: usize,
    pub per_round: usize,
    pub base: BaseMethod,
    pub shelf: ShelfSpec,
    pub n_books: usize,
    pub gen: GenConfig,
    pub knn_k: usize,
    pub seed0: u64,
    pub oracle_tol: f64,
    pub mpcc_eps: f64,
    pub nlp_tols: NlpTols,
    pub nlp_budget: NlpBudget,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            rounds: 2,
            per_round: 100,
            base: BaseMethod::ManualMpcc,
            shelf: ShelfSpec::new(18.0, 11.0),
            n_books: 3,
            gen: GenConfig::default(),
            knn_k: 3,
            seed0: 1000,
            oracle_tol: 1e-4,
            mpcc_eps: 1e-3,
            nlp_tols: NlpTols::default(),
            nlp_budget: NlpBudget::default(),
        }
    }
}

#[derive(Debug)]
pub struct BootstrapReport {
    pub dataset: Dataset,
    /// Success fraction per round.
    pub per_round_success: Vec<f64>,
    pub instances_attempted: usize,
}

/// Maps a stored solution onto another instance of the same book count.
/// The neighbor contributes the global decisions — the mode pattern and
/// the inserted book's placement — while stored books that keep their
/// mode start from this instance's own poses (the objective pulls them
/// there anyway). Mode-switched books take the neighbor's pose. Pose
/// components pinned by the mode (upright/lay heights, lean ground pivots)
/// are snapped to the new dimensions, vertices are recomputed, and the
/// separating planes are refit geometrically.
pub fn candidate_from_record(record: &DatasetRecord, instance: &ProblemInstance) -> Vec<f64> {
    use crate::model::Mode;
    let layout = VarLayout::for_instance(instance);
    let decoded = VarLayout::for_books(layout.n_books).decode(&record.point);
    let specs = BookshelfSolution::book_specs(instance);
    let shelf = &instance.shelf;
    let mut poses = decoded.poses.clone();
    for (i, stored) in instance.stored.iter().enumerate() {
        if decoded.modes[i].index() == stored.mode.index() {
            poses[i] = stored.pose;
        }
    }
    for i in 0..layout.n_books {
        let spec = &specs[i];
        match decoded.modes[i] {
            Mode::Upright => {
                poses[i].theta = 0.0;
                poses[i].x[1] = 0.5 * spec.height;
            }
            Mode::LayLeft => {
                poses[i].theta = -std::f64::consts::FRAC_PI_2;
                poses[i].x[1] = 0.5 * spec.width;
            }
            Mode::LayRight => {
                poses[i].theta = std::f64::consts::FRAC_PI_2;
                poses[i].x[1] = 0.5 * spec.width;
            }
            Mode::LeanLeft(_) | Mode::LeanRight(_) => {
                // drop the pose onto the ground pivot
                let verts = poses[i].vertices(spec);
                let min_y = verts.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
                poses[i].x[1] -= min_y;
            }
        }
        // keep every vertex inside the shelf in x
        let verts = poses[i].vertices(spec);
        let min_x = verts.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
        let max_x = verts.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
        if min_x < shelf.x_min() {
            poses[i].x[0] += shelf.x_min() - min_x;
        } else if max_x > shelf.x_max() {
            poses[i].x[0] -= max_x - shelf.x_max();
        }
    }
    encode_scene(&layout, &specs, &poses, &decoded.modes, None)
}

/// One MPCC solve against an instance; the record on success.
fn solve_for_record(
    instance: &ProblemInstance,
    candidates: &[Vec<f64>],
    method: &str,
    config: &BootstrapConfig,
) -> Option<DatasetRecord> {
    let program = build_minlp(instance);
    let layout = VarLayout::for_instance(instance);
    let started = Instant::now();
    let (result, _) =
        solve_mpcc_polished(&program, config.mpcc_eps, candidates, config.nlp_tols, config.nlp_budget);
    if result.status != NlpStatus::Feasible {
        return None;
    }
    let mut solution = layout.decode(&result.point);
    solution.objective = objective_value(instance, &solution, 10.0);
    if !check_solution(instance, &solution, config.oracle_tol).passed {
        return None;
    }
    Some(DatasetRecord {
        id: 0,
        theta: instance.theta(),
        point: result.point,
        cells: None,
        active_set: None,
        objective: solution.objective,
        method: method.into(),
        solve_time_ms: started.elapsed().as_secs_f64() * 1e3,
        cluster: None,
    })
}

/// Builds a dataset by rounds: round 0 solves with the non-data-driven
/// base method, later rounds warm-start from KNN over the accumulated set.
/// Failures are counted but never stored; re-solves replace a record only
/// with a strictly better objective.
pub fn bootstrap_dataset(config: &BootstrapConfig) -> BootstrapReport {
    let mut dataset = Dataset::new();
    let mut per_round_success = Vec::new();
    let mut seed = config.seed0;
    let mut attempted = 0usize;

    for round in 0..config.rounds {
        let mut generated = 0usize;
        let mut solved = 0usize;
        while generated < config.per_round {
            let Ok((instance, _witness)) =
                generate_with_witness(seed, config.shelf, config.n_books, &config.gen)
            else {
                seed += 1;
                continue;
            };
            seed += 1;
            generated += 1;
            attempted += 1;

            let record = if round == 0 {
                match config.base {
                    BaseMethod::ManualMpcc => {
                        let start = warm_start_manual(&instance);
                        solve_for_record(&instance, &[start], "mpcc-manual", config)
                    }
                    BaseMethod::Admm => {
                        let started = Instant::now();
                        let out = solve_admm(&instance, &AdmmOptions::default());
                        if out.report.passed {
                            let layout = VarLayout::for_instance(&instance);
                            let specs = BookshelfSolution::book_specs(&instance);
                            let point = encode_scene(
                                &layout,
                                &specs,
                                &out.solution.poses,
                                &out.solution.modes,
                                Some(&out.solution.planes),
                            );
                            Some(DatasetRecord {
                                id: 0,
                                theta: instance.theta(),
                                point,
                                cells: None,
                                active_set: None,
                                objective: out.solution.objective,
                                method: "admm".into(),
                                solve_time_ms: started.elapsed().as_secs_f64() * 1e3,
                                cluster: None,
                            })
                        } else {
                            None
                        }
                    }
                }
            } else {
                let theta = instance.theta();
                let candidates: Vec<Vec<f64>> =
                    match knn_query(&dataset, &theta, config.knn_k, KnnOrder::Nearest) {
                        Ok(records) => {
                            records.iter().map(|r| candidate_from_record(r, &instance)).collect()
                        }
                        Err(_) => vec![warm_start_manual(&instance)],
                    };
                solve_for_record(&instance, &candidates, "mpcc-knn", config)
            };

            if let Some(record) = record {
                solved += 1;
                dataset.insert_or_improve(record);
            }
        }
        per_round_success.push(solved as f64 / config.per_round.max(1) as f64);
    }

    BootstrapReport { dataset, per_round_success, instances_attempted: attempted }
}
