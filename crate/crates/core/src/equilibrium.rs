//! Exhaustive payoff matrix, pure Nash equilibria and best-response dynamics.
//!
//! Profiles are indexed lexicographically with customer 0 most significant,
//! so `profile_at(k)` for `k = 0, 1, ...` walks the product in the same order
//! as nested loops over the strategy sets.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::par::Execution;

/// Utility comparisons closer than this are ties.
pub const UTILITY_TOL: f64 = 1e-12;

pub const DEFAULT_PROFILE_CAP: u128 = 1_000_000;
pub const DEFAULT_BRD_STEP_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    pub dims: Vec<usize>,
    /// Flattened, `utilities[k][i]` is customer `i`'s expected utility at
    /// `profile_at(k)`.
    pub utilities: Vec<Vec<f64>>,
}

impl PayoffMatrix {
    /// Builds a matrix from an explicit utility table; `utilities.len()` must
    /// equal the product of `dims`.
    pub fn from_table(dims: Vec<usize>, utilities: Vec<Vec<f64>>) -> Result<Self> {
        let size: usize = dims.iter().product();
        if utilities.len() != size || utilities.iter().any(|u| u.len() != dims.len()) {
            return Err(Error::validation(
                "payoff_matrix",
                format!("expected {size} rows of {} utilities", dims.len()),
            ));
        }
        Ok(Self { dims, utilities })
    }

    pub fn len(&self) -> usize {
        self.utilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utilities.is_empty()
    }

    pub fn players(&self) -> usize {
        self.dims.len()
    }

    pub fn index_of(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&k, &d)| acc * d + k)
    }

    pub fn profile_at(&self, mut index: usize) -> Vec<usize> {
        let mut profile = vec![0; self.dims.len()];
        for (slot, &d) in profile.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        profile
    }

    pub fn utility(&self, profile: &[usize], player: usize) -> f64 {
        self.utilities[self.index_of(profile)][player]
    }

    /// Utility of `player` after switching to `strategy` with everyone else fixed.
    fn deviation(&self, profile: &[usize], player: usize, strategy: usize) -> f64 {
        let mut p = profile.to_vec();
        p[player] = strategy;
        self.utility(&p, player)
    }

    /// Best response of `player` (lowest index among maximisers).
    pub fn best_response(&self, profile: &[usize], player: usize) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for s in 0..self.dims[player] {
            let u = self.deviation(profile, player, s);
            if u > best.1 + UTILITY_TOL {
                best = (s, u);
            }
        }
        best
    }

    /// Whether `player` has a strictly improving unilateral deviation.
    pub fn can_improve(&self, profile: &[usize], player: usize) -> bool {
        let current = self.utility(profile, player);
        (0..self.dims[player]).any(|s| self.deviation(profile, player, s) > current + UTILITY_TOL)
    }

    pub fn is_pure_ne(&self, profile: &[usize]) -> bool {
        (0..self.players()).all(|i| !self.can_improve(profile, i))
    }
}

/// Fills the payoff matrix by solving the allocation of every joint profile.
pub fn build_payoff_matrix(game: &Game, cap: u128, execution: Execution) -> Result<PayoffMatrix> {
    let dims = game.dims();
    let projected = dims
        .iter()
        .fold(1u128, |acc, &d| acc.saturating_mul(d as u128));
    if projected > cap {
        return Err(Error::Resource {
            what: "payoff matrix",
            context: format!("{} customers", dims.len()),
            projected,
            cap,
        });
    }
    let shape = PayoffMatrix {
        dims: dims.clone(),
        utilities: Vec::new(),
    };
    let rows = execution.map_range(projected as usize, |k| {
        game.outcome(&shape.profile_at(k))
            .map(|o| o.utilities.iter().map(|u| u.raw).collect::<Vec<f64>>())
    });
    let utilities = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PayoffMatrix { dims, utilities })
}

/// All weak pure equilibria, in lexicographic order.
pub fn find_pure_ne(matrix: &PayoffMatrix) -> Vec<Vec<usize>> {
    (0..matrix.len())
        .map(|k| matrix.profile_at(k))
        .filter(|p| matrix.is_pure_ne(p))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrdStep {
    pub profile: Vec<usize>,
    pub player: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeReport {
    pub pure_ne: Vec<Vec<usize>>,
    pub brd_trace: Vec<BrdStep>,
    pub terminal: Vec<usize>,
}

/// Lowest-indexed improving player switches to its best response until no
/// one can improve. Revisiting a profile is reported as an error.
pub fn best_response_dynamics(
    matrix: &PayoffMatrix,
    start: &[usize],
    step_cap: usize,
) -> Result<NeReport> {
    let mut current = start.to_vec();
    let mut seen = HashSet::from([current.clone()]);
    let mut trace = Vec::new();
    while let Some(player) = (0..matrix.players()).find(|&i| matrix.can_improve(&current, i)) {
        if trace.len() >= step_cap {
            return Err(Error::BrdCycle(format!(
                "no equilibrium after {step_cap} steps from {start:?}"
            )));
        }
        let (to, _) = matrix.best_response(&current, player);
        trace.push(BrdStep {
            profile: current.clone(),
            player,
            from: current[player],
            to,
        });
        current[player] = to;
        if !seen.insert(current.clone()) {
            return Err(Error::BrdCycle(format!(
                "profile {current:?} revisited after {} steps from {start:?}",
                trace.len()
            )));
        }
    }
    Ok(NeReport {
        pure_ne: find_pure_ne(matrix),
        brd_trace: trace,
        terminal: current,
    })
}
