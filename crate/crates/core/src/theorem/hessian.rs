use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::geometry::PhasePoint;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-9;

/// Entries at or below this magnitude count as zero for non-triviality.
const TRIVIAL_ENTRY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub nontrivial: bool,
    pub min_rank: usize,
    pub max_rank: usize,
    pub points: usize,
    pub dim: usize,
}

impl HessianReport {
    pub fn regular(&self) -> bool {
        self.points > 0 && self.min_rank == self.dim
    }
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.iter().all(|v| v.abs() <= TRIVIAL_ENTRY) {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.max();
    sv.iter().filter(|s| **s > RANK_CUTOFF * top).count()
}

/// Non-triviality and rank range of a matrix field over sample points.
pub fn hessian_report<F, E>(
    dim: usize,
    points: &[PhasePoint],
    mut matrix: F,
) -> Result<HessianReport, E>
where
    F: FnMut(&PhasePoint) -> Result<DMatrix<f64>, E>,
{
    let mut nontrivial = false;
    let mut min_rank = usize::MAX;
    let mut max_rank = 0;
    for p in points {
        let m = matrix(p)?;
        nontrivial |= m.iter().any(|v| v.abs() > TRIVIAL_ENTRY);
        let r = numerical_rank(&m);
        min_rank = min_rank.min(r);
        max_rank = max_rank.max(r);
    }
    Ok(HessianReport {
        nontrivial,
        min_rank: if points.is_empty() { 0 } else { min_rank },
        max_rank,
        points: points.len(),
        dim,
    })
}
