//! The game among requesting customers: strategy sets, request mapping and
//! cached per-profile allocation outcomes shared by the learning runs and the
//! payoff-matrix oracle.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::allocator::{
    solve_allocation, src_gain, AllocationOptions, GainModel, SolutionSet, Utility,
};
use crate::error::Result;
use crate::model::{
    build_strategy_set, request_from_strategy, BandwidthRequest, QosBounds, SpcProfile,
    SrcProfile, StrategySet,
};

/// Allocation result of one joint profile, reduced to what players observe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOutcome {
    pub best_outcome: f64,
    /// `|sol(profile)|`.
    pub m: usize,
    /// Row-major `m x n` gains: `gains[c * n + i]` is customer `i`'s gain in member `c`.
    pub gains: Vec<f64>,
    pub utilities: Vec<Utility>,
}

impl ProfileOutcome {
    pub fn member_gains(&self, member: usize) -> &[f64] {
        let n = self.utilities.len();
        &self.gains[member * n..(member + 1) * n]
    }
}

pub struct Game {
    pub spc: SpcProfile,
    pub profiles: Vec<SrcProfile>,
    pub bounds: QosBounds,
    pub sets: Vec<StrategySet>,
    pub gain_model: GainModel,
    pub alloc: AllocationOptions,
    cache: RwLock<HashMap<Vec<usize>, Arc<ProfileOutcome>>>,
}

impl std::fmt::Debug for Game {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Game")
            .field("spc", &self.spc)
            .field("profiles", &self.profiles)
            .field("bounds", &self.bounds)
            .field("gain_model", &self.gain_model)
            .field("alloc", &self.alloc)
            .finish_non_exhaustive()
    }
}

impl Game {
    pub fn new(
        spc: SpcProfile,
        profiles: Vec<SrcProfile>,
        bounds: QosBounds,
        gain_model: GainModel,
        alloc: AllocationOptions,
    ) -> Result<Self> {
        let sets = profiles
            .iter()
            .enumerate()
            .map(|(i, p)| build_strategy_set(i, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spc,
            profiles,
            bounds,
            sets,
            gain_model,
            alloc,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.profiles.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.sets.iter().map(StrategySet::len).collect()
    }

    /// Strategy values of a profile given as strategy indices.
    pub fn values(&self, profile: &[usize]) -> Vec<f64> {
        profile
            .iter()
            .zip(&self.sets)
            .map(|(&k, set)| set.value(k))
            .collect()
    }

    /// Index form of a profile given as strategy values.
    pub fn indices(&self, values: &[f64]) -> Option<Vec<usize>> {
        if values.len() != self.n() {
            return None;
        }
        values
            .iter()
            .zip(&self.sets)
            .map(|(&v, set)| set.index_of(v))
            .collect()
    }

    pub fn requests(&self, profile: &[usize]) -> Vec<BandwidthRequest> {
        profile
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                request_from_strategy(
                    &self.profiles[i],
                    self.sets[i].value(k),
                    &self.bounds,
                    self.spc.delta,
                )
            })
            .collect()
    }

    pub fn solve(&self, profile: &[usize]) -> Result<SolutionSet> {
        solve_allocation(&self.requests(profile), &self.spc, &self.alloc)
    }

    pub fn gain(&self, i: usize, answer: &crate::allocator::AllocationAnswer) -> f64 {
        src_gain(
            answer,
            &self.profiles[i],
            &self.bounds,
            self.spc.delta,
            &self.gain_model,
        )
    }

    /// Solves `profile` once and memoizes the result.
    pub fn outcome(&self, profile: &[usize]) -> Result<Arc<ProfileOutcome>> {
        if let Some(hit) = self.cache.read().expect("cache poisoned").get(profile) {
            return Ok(Arc::clone(hit));
        }
        let sol = self.solve(profile)?;
        let n = self.n();
        let mut gains = Vec::with_capacity(sol.m() * n);
        for config in &sol.configs {
            gains.extend(config.answers.iter().enumerate().map(|(i, a)| self.gain(i, a)));
        }
        let utilities = (0..n)
            .map(|i| {
                let total: f64 = gains.iter().skip(i).step_by(n).sum();
                Utility::from_raw(total / sol.m() as f64)
            })
            .collect();
        let outcome = Arc::new(ProfileOutcome {
            best_outcome: sol.best_outcome,
            m: sol.m(),
            gains,
            utilities,
        });
        let mut cache = self.cache.write().expect("cache poisoned");
        Ok(Arc::clone(cache.entry(profile.to_vec()).or_insert(outcome)))
    }

    pub fn cached_profiles(&self) -> usize {
        self.cache.read().expect("cache poisoned").len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::src_utility;
    use crate::model::qos_bounds;

    #[test]
    fn cached_outcome_matches_direct_utility() {
        let spc = SpcProfile::new(1.0, 0.0, 0.5, 20.0, 0.1).unwrap();
        let bounds = qos_bounds(8.0, 2.0, 300.0).unwrap();
        let profiles = vec![SrcProfile::with_alpha(1.0, 0.1, 0.1).unwrap(); 5];
        let alloc = AllocationOptions::new(crate::allocator::default_grid_step(&bounds));
        let game = Game::new(spc, profiles.clone(), bounds, GainModel::default(), alloc).unwrap();
        let profile = [0, 1, 0, 1, 1];
        let out = game.outcome(&profile).unwrap();
        let sol = game.solve(&profile).unwrap();
        assert_eq!(out.m, sol.m());
        for (i, p) in profiles.iter().enumerate() {
            let u = src_utility(i, &sol, p, &bounds, 0.1, &GainModel::default());
            assert!((u.raw - out.utilities[i].raw).abs() < 1e-12);
        }
        assert_eq!(game.cached_profiles(), 1);
        assert!(Arc::ptr_eq(&out, &game.outcome(&profile).unwrap()));
        assert_eq!(game.indices(&[0.9, 1.0, 0.9, 1.0, 1.0]), Some(profile.to_vec()));
        assert_eq!(game.indices(&[0.5, 1.0, 0.9, 1.0, 1.0]), None);
    }
}
