//! Integer strategies: the optimal binary assignment of a compiled MICP
//! together with its active inequality set, and the discretization of
//! continuous solutions onto the grid codes.

use std::collections::HashMap;

use thiserror::Error;

use crate::envelope::MicpProgram;
use crate::ir::{Sense, VarKind};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("binary variable {0} has non-integral value {1}")]
    NonIntegralPoint(usize, f64),
}

/// (z*, n*, 𝓣): mode binaries, grid code bits, and the indices of tight
/// inequality constraints at the optimizer.
#[derive(Clone, Debug)]
pub struct IntegerStrategy {
    pub mode_binaries: Vec<(usize, f64)>,
    pub grid_binaries: Vec<(usize, f64)>,
    pub active_set: Vec<usize>,
}

impl IntegerStrategy {
    /// Full assignment for `fix_integers`.
    pub fn assignment(&self) -> HashMap<usize, f64> {
        self.mode_binaries.iter().chain(&self.grid_binaries).cloned().collect()
    }
}

const INT_TOL: f64 = 1e-6;

/// Rounds the binaries of a solved point (rejecting deviations beyond
/// 1e-6) and records every inequality with slack ≤ 1e-6.
pub fn extract_strategy(
    micp: &MicpProgram,
    point: &[f64],
) -> Result<IntegerStrategy, StrategyError> {
    let program = &micp.program;
    let mut mode_binaries = Vec::new();
    let mut grid_binaries = Vec::new();
    for (i, v) in program.variables.iter().enumerate() {
        if v.kind != VarKind::Binary {
            continue;
        }
        let val = point[i];
        let rounded = val.round();
        if (val - rounded).abs() > INT_TOL {
            return Err(StrategyError::NonIntegralPoint(i, val));
        }
        if i < micp.base_n_vars {
            mode_binaries.push((i, rounded));
        } else {
            grid_binaries.push((i, rounded));
        }
    }
    let active_set = program
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| c.sense == Sense::Le && c.residual(point) >= -INT_TOL)
        .map(|(i, _)| i)
        .collect();
    Ok(IntegerStrategy { mode_binaries, grid_binaries, active_set })
}

/// Discretizes a base-program solution onto the grid: the containing cell
/// per slot (boundary values to the lower cell) plus the rounded original
/// binaries, as a complete assignment for `fix_integers`.
pub fn discretize_solution(
    micp: &MicpProgram,
    base_point: &[f64],
) -> (HashMap<usize, f64>, Vec<usize>) {
    let lifted = micp.lift_point(base_point);
    let mut assignment = HashMap::new();
    for (i, v) in micp.program.variables.iter().enumerate() {
        if v.kind == VarKind::Binary {
            assignment.insert(i, lifted[i].round());
        }
    }
    let cells = micp.decode_cells(&lifted);
    (assignment, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{compile_micp, Grid, GriddedSlot};
    use crate::ir::{Constraint, MibpProgram, QuadObjective, Variable};

    fn toy_micp() -> MicpProgram {
        let mut program = MibpProgram {
            variables: vec![
                Variable::continuous("x", 0.0, 2.0),
                Variable::continuous("y", -1.0, 1.0),
                Variable::binary("z"),
            ],
            constraints: vec![
                Constraint::bilinear("prod", vec![], vec![(1.0, 0, 1)], Sense::Le, 0.5),
                Constraint::linear("cap", vec![(1.0, 0), (1.0, 2)], Sense::Le, 3.0),
            ],
            objective: QuadObjective::default(),
            theta: vec![],
        };
        program.objective.add_square(1.0, 0, 1.0);
        let grid = Grid {
            slots: vec![
                GriddedSlot::scalar("x", 0, (0.0, 2.0), 4),
                GriddedSlot::scalar("y", 1, (-1.0, 1.0), 4),
            ],
        };
        compile_micp(&program, &grid).unwrap()
    }

    #[test]
    fn non_integral_point_rejected() {
        let micp = toy_micp();
        let mut point = vec![0.0; micp.program.n_vars()];
        point[2] = 0.5;
        assert!(matches!(
            extract_strategy(&micp, &point),
            Err(StrategyError::NonIntegralPoint(2, _))
        ));
    }

    #[test]
    fn strategy_splits_mode_and_grid_binaries() {
        let micp = toy_micp();
        let lifted = micp.lift_point(&[1.2, 0.3, 1.0]);
        let strategy = extract_strategy(&micp, &lifted).unwrap();
        assert_eq!(strategy.mode_binaries.len(), 1);
        assert_eq!(strategy.grid_binaries.len(), 4); // 2 bits per 4-cell slot
        let assignment = strategy.assignment();
        assert_eq!(assignment.len(), 5);
    }

    #[test]
    fn empty_active_set_is_valid() {
        let micp = toy_micp();
        // interior point: nothing tight among the original rows
        let lifted = micp.lift_point(&[0.1, 0.1, 0.0]);
        let strategy = extract_strategy(&micp, &lifted).unwrap();
        let orig_active: Vec<usize> = strategy
            .active_set
            .iter()
            .cloned()
            .filter(|&i| {
                let t = &micp.program.constraints[i].tag;
                t == "prod" || t == "cap"
            })
            .collect();
        assert!(orig_active.is_empty());
    }

    #[test]
    fn discretize_maps_to_expected_cells() {
        let micp = toy_micp();
        let (assignment, cells) = discretize_solution(&micp, &[1.2, 0.3, 1.0]);
        // x = 1.2 over [0,2]×4 cells → cell 2; y = 0.3 over [−1,1]×4 → cell 2
        assert_eq!(cells, vec![2, 2]);
        // decoding the Gray codes through lift/decode agrees
        let lifted = micp.lift_point(&[1.2, 0.3, 1.0]);
        assert_eq!(micp.decode_cells(&lifted), cells);
        assert!(assignment.values().all(|v| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn theta_cell_binning_matches_formula() {
        use std::f64::consts::{FRAC_PI_2, PI};
        let slot = GriddedSlot::rotation("rot", 0, 1, (-FRAC_PI_2, FRAC_PI_2), 8);
        // θ = 0.3 rad → ⌊(0.3 + π/2)/(π/8)⌋ = 4
        let expect = ((0.3 + FRAC_PI_2) / (PI / 8.0)).floor() as usize;
        assert_eq!(slot.cell_of(0.3), expect);
        assert_eq!(expect, 4);
        // range minimum → cell 0
        assert_eq!(slot.cell_of(-FRAC_PI_2), 0);
    }
}
