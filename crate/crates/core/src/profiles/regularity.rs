use serde::{Deserialize, Serialize};

use super::{ScalarProfile, CONCAVITY_TOL, CONTINUITY_TOL, DERIVATIVE_JUMP_TOL};
use crate::error::{domain, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakpointJump {
    pub location: f64,
    pub order: u8,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub concave: bool,
    pub lipschitz_constant: f64,
    /// Jumps above tolerance (1e-12 for values, 1e-8 for derivatives) at
    /// breakpoints inside the grid span.
    pub breakpoint_jumps: Vec<BreakpointJump>,
    pub min_value: f64,
    pub max_second_difference: f64,
}

impl RegularityReport {
    /// No reported jumps of order 1 or 2.
    pub fn is_c2(&self) -> bool {
        self.breakpoint_jumps.is_empty()
    }
}

/// Samples `p` on `grid` and reports concavity, Lipschitz constant, value
/// floor, and derivative jumps at breakpoints.
pub fn check_regularity(p: &ScalarProfile, grid: &Grid) -> Result<RegularityReport> {
    let nodes = grid.nodes();
    if nodes.len() < 16 {
        return Err(domain(format!("regularity grid needs at least 16 nodes, got {}", nodes.len())));
    }
    let values = nodes.iter().map(|&r| p.value(r)).collect::<Result<Vec<_>>>()?;

    let mut lipschitz: f64 = 0.0;
    for i in 1..nodes.len() {
        lipschitz = lipschitz.max(((values[i] - values[i - 1]) / (nodes[i] - nodes[i - 1])).abs());
    }
    // second differences, rescaled to the nominal spacing when the last step is short
    let mut max_dd = f64::NEG_INFINITY;
    for i in 1..nodes.len() - 1 {
        let (h1, h2) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
        let dd = if (h1 - h2).abs() <= 1e-12 * h1 {
            values[i + 1] - 2.0 * values[i] + values[i - 1]
        } else {
            let curv = 2.0 * ((values[i + 1] - values[i]) / h2 - (values[i] - values[i - 1]) / h1) / (h1 + h2);
            curv * h1 * h1
        };
        max_dd = max_dd.max(dd);
    }

    let mut jumps = Vec::new();
    for (i, pc) in p.pieces().iter().enumerate().skip(1) {
        let x = pc.lo;
        if x < grid.lo || x > grid.hi {
            continue;
        }
        let left = p.pieces()[i - 1].expr.jet(x)?;
        let right = pc.expr.jet(x)?;
        for order in 0..3 {
            let magnitude = (left[order] - right[order]).abs();
            let tol = if order == 0 {
                CONTINUITY_TOL * left[0].abs().max(1.0)
            } else {
                DERIVATIVE_JUMP_TOL
            };
            if magnitude > tol {
                jumps.push(BreakpointJump { location: x, order: order as u8, magnitude });
            }
        }
    }

    Ok(RegularityReport {
        concave: max_dd <= CONCAVITY_TOL,
        lipschitz_constant: lipschitz,
        breakpoint_jumps: jumps,
        min_value: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max_second_difference: max_dd,
    })
}
