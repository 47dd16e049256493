//! Solver-independent feasibility oracle. Overlap is decided by the exact
//! separating-axis test on the posed rectangles — never by the solution's
//! plane variables — so every pipeline is graded against the same geometry.

use crate::geom::{sat_depth, Vec2};
use crate::model::{
    BookshelfSolution, Mode, ProblemInstance, SupportRef, LEAN_MARGIN,
};

#[derive(Clone, Debug)]
pub struct FamilyCheck {
    pub name: &'static str,
    pub max_violation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct FeasibilityReport {
    pub families: Vec<FamilyCheck>,
    pub max_violation: f64,
    pub passed: bool,
}

impl FeasibilityReport {
    pub fn family(&self, name: &str) -> &FamilyCheck {
        self.families.iter().find(|f| f.name == name).expect("known family")
    }
}

/// Checks a solution against the instance at penetration tolerance `tol`.
/// Families: pairwise overlap, containment, mode-pose consistency, lean
/// stability, ground contact. Passes iff the largest violation ≤ tol.
pub fn check_solution(
    instance: &ProblemInstance,
    solution: &BookshelfSolution,
    tol: f64,
) -> FeasibilityReport {
    let n = instance.n_books();
    assert_eq!(solution.poses.len(), n, "solution dimensionally inconsistent");
    assert_eq!(solution.modes.len(), n, "solution dimensionally inconsistent");
    let specs = BookshelfSolution::book_specs(instance);
    let shelf = &instance.shelf;
    let rects: Vec<_> = (0..n).map(|i| solution.poses[i].rect(&specs[i])).collect();
    let verts: Vec<[Vec2; 4]> = rects.iter().map(|r| r.corners()).collect();
    let centroids: Vec<f64> = solution.poses.iter().map(|p| p.x[0]).collect();

    // pairwise overlap: positive SAT depth is penetration
    let mut overlap: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            overlap = overlap.max(sat_depth(&verts[i], &verts[j]).max(0.0));
        }
    }

    // containment
    let mut containment: f64 = 0.0;
    for vs in &verts {
        for v in vs {
            containment = containment
                .max(shelf.x_min() - v[0])
                .max(v[0] - shelf.x_max())
                .max(-v[1])
                .max(v[1] - shelf.height);
        }
    }

    // mode-pose consistency and per-mode contact/stability
    let mut mode_pose: f64 = 0.0;
    let mut stability: f64 = 0.0;
    let mut ground: f64 = 0.0;
    for i in 0..n {
        let pose = &solution.poses[i];
        let spec = &specs[i];
        let theta = pose.theta;
        match solution.modes[i] {
            Mode::Upright => {
                mode_pose = mode_pose.max(theta.abs()).max((pose.x[1] - 0.5 * spec.height).abs());
                ground = ground.max(bottom_gap(&verts[i]));
            }
            Mode::LayLeft => {
                mode_pose = mode_pose
                    .max((theta + std::f64::consts::FRAC_PI_2).abs())
                    .max((pose.x[1] - 0.5 * spec.width).abs());
                ground = ground.max(bottom_gap(&verts[i]));
            }
            Mode::LayRight => {
                mode_pose = mode_pose
                    .max((theta - std::f64::consts::FRAC_PI_2).abs())
                    .max((pose.x[1] - 0.5 * spec.width).abs());
                ground = ground.max(bottom_gap(&verts[i]));
            }
            Mode::LeanLeft(support) => {
                // θ ∈ (−π/2, 0): pivot v3 on the ground, contact corner v4
                mode_pose = mode_pose
                    .max(theta + LEAN_MARGIN - 0.0)
                    .max(-std::f64::consts::FRAC_PI_2 - theta)
                    .max(0.0);
                if support == SupportRef::LeftWall {
                    mode_pose = mode_pose.max((verts[i][3][0] - shelf.x_min()).abs());
                }
                ground = ground.max(verts[i][2][1].abs());
                let sx = support.centroid_x(shelf, &centroids);
                stability = stability.max(interval_violation(pose.x[0], sx, verts[i][2][0]));
            }
            Mode::LeanRight(support) => {
                mode_pose = mode_pose
                    .max(-theta + LEAN_MARGIN)
                    .max(theta - std::f64::consts::FRAC_PI_2)
                    .max(0.0);
                if support == SupportRef::RightWall {
                    mode_pose = mode_pose.max((verts[i][0][0] - shelf.x_max()).abs());
                }
                ground = ground.max(verts[i][1][1].abs());
                let sx = support.centroid_x(shelf, &centroids);
                stability = stability.max(interval_violation(pose.x[0], verts[i][1][0], sx));
            }
        }
    }

    let families = vec![
        FamilyCheck { name: "overlap", max_violation: overlap, pass: overlap <= tol },
        FamilyCheck { name: "containment", max_violation: containment, pass: containment <= tol },
        FamilyCheck { name: "mode_pose", max_violation: mode_pose, pass: mode_pose <= tol },
        FamilyCheck { name: "lean_stability", max_violation: stability, pass: stability <= tol },
        FamilyCheck { name: "ground_contact", max_violation: ground, pass: ground <= tol },
    ];
    let max_violation = families.iter().map(|f| f.max_violation).fold(0.0, f64::max);
    FeasibilityReport { families, max_violation, passed: max_violation <= tol }
}

fn bottom_gap(verts: &[Vec2; 4]) -> f64 {
    verts.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min).abs()
}

/// Distance of `x` outside the closed interval spanned by `a` and `b`.
fn interval_violation(x: f64, a: f64, b: f64) -> f64 {
    let (lo, hi) = (a.min(b), a.max(b));
    (lo - x).max(x - hi).max(0.0)
}

/// Displacement objective Σ_{stored} ‖x_i − x_i⁰‖² + w_θ (θ_i − θ_i⁰)².
pub fn objective_value(instance: &ProblemInstance, solution: &BookshelfSolution, w_theta: f64) -> f64 {
    let mut cost = 0.0;
    for (i, b) in instance.stored.iter().enumerate() {
        let dx = solution.poses[i].x[0] - b.pose.x[0];
        let dy = solution.poses[i].x[1] - b.pose.x[1];
        let dt = solution.poses[i].theta - b.pose.theta;
        cost += dx * dx + dy * dy + w_theta * dt * dt;
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{scene_planes, BookSpec, PlaneVars, Pose, ShelfSpec, StoredBook};

    fn instance() -> ProblemInstance {
        ProblemInstance {
            shelf: ShelfSpec::new(18.0, 11.0),
            stored: vec![StoredBook {
                spec: BookSpec::new(3.0, 8.0),
                pose: Pose { x: [-6.0, 4.0], theta: 0.0 },
                mode: Mode::Upright,
            }],
            insert: BookSpec::new(3.0, 8.0),
        }
    }

    fn solution(poses: Vec<Pose>, modes: Vec<Mode>, inst: &ProblemInstance) -> BookshelfSolution {
        let specs = BookshelfSolution::book_specs(inst);
        let planes = scene_planes(&specs, &poses)
            .into_iter()
            .map(|p| p.unwrap_or(PlaneVars { a: [1.0, 0.0], b: 0.0 }))
            .collect();
        BookshelfSolution { poses, modes, planes, objective: 0.0 }
    }

    #[test]
    fn identical_books_at_same_pose_overlap() {
        let inst = instance();
        let sol = solution(
            vec![Pose { x: [-6.0, 4.0], theta: 0.0 }, Pose { x: [-6.0, 4.0], theta: 0.0 }],
            vec![Mode::Upright, Mode::Upright],
            &inst,
        );
        let report = check_solution(&inst, &sol, 1e-4);
        assert!(!report.passed);
        assert!(report.family("overlap").max_violation > 2.9);
    }

    #[test]
    fn touching_books_pass() {
        let inst = instance();
        let sol = solution(
            vec![Pose { x: [-6.0, 4.0], theta: 0.0 }, Pose { x: [-3.0, 4.0], theta: 0.0 }],
            vec![Mode::Upright, Mode::Upright],
            &inst,
        );
        let report = check_solution(&inst, &sol, 1e-4);
        assert!(report.passed, "violation {}", report.max_violation);
        assert_eq!(report.family("overlap").max_violation, 0.0);
    }

    #[test]
    fn floating_book_fails_ground_contact() {
        let inst = instance();
        let sol = solution(
            vec![Pose { x: [-6.0, 4.0], theta: 0.0 }, Pose { x: [0.0, 4.5], theta: 0.0 }],
            vec![Mode::Upright, Mode::Upright],
            &inst,
        );
        let report = check_solution(&inst, &sol, 1e-4);
        assert!(!report.family("ground_contact").pass);
        assert!(!report.family("mode_pose").pass);
    }

    #[test]
    fn out_of_shelf_fails_containment() {
        let inst = instance();
        let sol = solution(
            vec![Pose { x: [-6.0, 4.0], theta: 0.0 }, Pose { x: [8.5, 4.0], theta: 0.0 }],
            vec![Mode::Upright, Mode::Upright],
            &inst,
        );
        assert!(!check_solution(&inst, &sol, 1e-4).family("containment").pass);
    }

    #[test]
    fn objective_matches_hand_computation() {
        let inst = instance();
        let mut sol = solution(
            vec![Pose { x: [-6.0, 4.0], theta: 0.0 }, Pose { x: [0.0, 4.0], theta: 0.0 }],
            vec![Mode::Upright, Mode::Upright],
            &inst,
        );
        assert_eq!(objective_value(&inst, &sol, 1.0), 0.0);
        sol.poses[0].x[0] += 1.0;
        assert!((objective_value(&inst, &sol, 1.0) - 1.0).abs() < 1e-12);
        sol.poses[0].theta = 0.2;
        let expect = 1.0 + 10.0 * 0.04;
        assert!((objective_value(&inst, &sol, 10.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn stable_wall_lean_passes() {
        let inst = instance();
        // lean-left against the left wall: pivot v3 on the ground, v4 on the wall
        let spec = BookSpec::new(2.0, 8.0);
        let theta: f64 = -0.5;
        let (s, c) = theta.sin_cos();
        let h = spec.height;
        let gx = inst.shelf.x_min() - s * h; // v4x = gx + s·h = x_min
        let center = [gx + c * spec.width / 2.0 + s * h / 2.0, -s * spec.width / 2.0 + c * h / 2.0];
        let mut inst2 = inst.clone();
        inst2.insert = spec;
        inst2.stored[0].pose.x = [0.0, 4.0];
        let sol = solution(
            vec![Pose { x: [0.0, 4.0], theta: 0.0 }, Pose { x: center, theta }],
            vec![Mode::Upright, Mode::LeanLeft(SupportRef::LeftWall)],
            &inst2,
        );
        let report = check_solution(&inst2, &sol, 1e-6);
        assert!(report.passed, "report: {:?}", report.families);
    }
}
