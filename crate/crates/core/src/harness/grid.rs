use rayon::prelude::*;
use serde::Serialize;

use crate::multi_pa::{link_moments, power_from_moments};
use crate::scenario::Scenario;
use crate::single_pa::objective_single;
use crate::{Error, Result};

/// Maximum number of objective evaluations a grid search may spend.
pub const DEFAULT_GRID_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSearchResult {
    pub best_x: Vec<f64>,
    pub best_power_w: f64,
    pub grid_resolution: usize,
    pub evaluations_count: u64,
}

fn grid_point(side: f64, i: usize, points: usize) -> f64 {
    side * i as f64 / (points - 1) as f64
}

/// Exhaustive search over the uniform grid `x_i = L i / (P - 1)` in every
/// coordinate, both endpoints included.
///
/// Ties go to the lexicographically smallest grid index. Refining `P` to
/// `2P - 1` nests the old grid exactly, so the best power never increases.
pub fn grid_search(scenario: &Scenario, points_per_dim: usize, budget: u64) -> Result<GridSearchResult> {
    if points_per_dim < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid search needs at least 2 points per dimension, got {points_per_dim}"
        )));
    }
    let n = scenario.num_tpas();
    let evaluations = (points_per_dim as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if evaluations > u128::from(budget) {
        return Err(Error::BudgetExceeded { evaluations, cap: budget });
    }
    let total = evaluations as usize;
    let side = scenario.side();

    let best = if n == 1 {
        let powers: Vec<f64> = (0..points_per_dim)
            .into_par_iter()
            .map(|i| {
                objective_single(
                    grid_point(side, i, points_per_dim),
                    &scenario.users,
                    &scenario.constants,
                    &scenario.layout,
                )
            })
            .collect();
        argmin(powers.into_iter().enumerate().map(|(i, p)| Ok((i, p))))?
    } else {
        // moments[(m * n + k) * P + i] = (|u|^2, v) of user m, TPA k at grid point i.
        let users = &scenario.users;
        let moments: Vec<(f64, f64)> = (0..users.len() * n * points_per_dim)
            .map(|idx| {
                let i = idx % points_per_dim;
                let k = (idx / points_per_dim) % n;
                let m = idx / (points_per_dim * n);
                link_moments(grid_point(side, i, points_per_dim), k, &users[m], scenario)
            })
            .collect();
        // Each leading index scans its slab sequentially; slabs run in parallel.
        let slab = total / points_per_dim;
        let per_slab: Vec<Result<(usize, f64)>> = (0..points_per_dim)
            .into_par_iter()
            .map(|lead| {
                let mut weights = vec![0.0; n];
                let mut diag = vec![0.0; n];
                let mut index = vec![0usize; n];
                index[0] = lead;
                argmin((0..slab).map(|offset| {
                    let mut rest = offset;
                    for k in (1..n).rev() {
                        index[k] = rest % points_per_dim;
                        rest /= points_per_dim;
                    }
                    let mut power = 0.0;
                    for (m, user) in users.iter().enumerate() {
                        for k in 0..n {
                            (weights[k], diag[k]) = moments[(m * n + k) * points_per_dim + index[k]];
                        }
                        power += power_from_moments(user, &weights, &diag)?;
                    }
                    Ok((lead * slab + offset, power))
                }))
            })
            .collect();
        argmin(per_slab.into_iter())?
    };

    let (flat, best_power_w) = best;
    let mut best_x = vec![0.0; n];
    let mut rest = flat;
    for k in (0..n).rev() {
        best_x[k] = grid_point(side, rest % points_per_dim, points_per_dim);
        rest /= points_per_dim;
    }
    Ok(GridSearchResult { best_x, best_power_w, grid_resolution: points_per_dim, evaluations_count: total as u64 })
}

/// First strict minimum of an ordered sequence.
fn argmin(values: impl Iterator<Item = Result<(usize, f64)>>) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for item in values {
        let (i, p) = item?;
        if best.is_none_or(|(_, b)| p < b) {
            best = Some((i, p));
        }
    }
    Ok(best.expect("grid is nonempty"))
}
