//! Decentralized linear reward-inaction learning.
//!
//! Each customer keeps a mixed strategy over its own strategy set and only
//! sees its own realised gain. After every round the played strategy absorbs
//! a fraction `b * u` of the remaining probability mass, where `u` is the gain
//! normalised against the customer's observed extremes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;

pub const DEFAULT_MAX_ITERS: usize = 5000;
pub const DEFAULT_P_THRESHOLD: f64 = 0.99;

/// How the lower normalisation anchor is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Lower anchor is the smallest gain observed so far.
    #[default]
    RunningMin,
    /// Lower anchor is fixed at zero.
    ZeroFloor,
}

/// Which per-round gain a customer learns from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    /// Gain under one member of the tie set drawn uniformly.
    #[default]
    Sampled,
    /// Expected utility over the whole tie set.
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedState {
    pub probs: Vec<f64>,
    pub u_max: Option<f64>,
    pub u_min: Option<f64>,
    pub mode: Normalization,
}

impl MixedState {
    pub fn uniform(n: usize, mode: Normalization) -> Self {
        assert!(n > 0, "a strategy set is never empty");
        Self::from_probs(vec![1.0 / n as f64; n], mode)
    }

    pub fn from_probs(probs: Vec<f64>, mode: Normalization) -> Self {
        Self {
            probs,
            u_max: None,
            u_min: None,
            mode,
        }
    }

    /// Draws a strategy index by inverting the cumulative distribution.
    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (j, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = j;
                if r < acc {
                    return j;
                }
            }
        }
        // r landed in the rounding gap above the accumulated sum
        last_positive
    }

    /// Folds `gain` into the running extremes.
    pub fn observe(&mut self, gain: f64) {
        self.u_max = Some(self.u_max.map_or(gain, |m| m.max(gain)));
        self.u_min = Some(self.u_min.map_or(gain, |m| m.min(gain)));
    }

    /// `(gain - A) / (U - A)` clamped to `[0, 1]`, with `u = 0` when `U = A`.
    pub fn normalize_gain(&self, gain: f64) -> f64 {
        let (Some(hi), Some(lo)) = (self.u_max, self.u_min) else {
            return 0.0;
        };
        let lo = match self.mode {
            Normalization::RunningMin => lo,
            Normalization::ZeroFloor => 0.0,
        };
        if hi <= lo {
            return 0.0;
        }
        ((gain - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    /// One reward-inaction step: every other strategy loses `b*u` of its mass,
    /// the played one gains what the others lost.
    pub fn a_dist_update(&self, played: usize, u: f64, b: f64) -> MixedState {
        let step = b * u;
        let rest: f64 = self
            .probs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != played)
            .map(|(_, p)| p)
            .sum();
        let probs = self
            .probs
            .iter()
            .enumerate()
            .map(|(j, &p)| if j == played { p + step * rest } else { p - step * p })
            .collect();
        MixedState {
            probs,
            ..self.clone()
        }
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = j;
            }
        }
        best
    }

    pub fn max_prob(&self) -> f64 {
        self.probs[self.argmax()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub converged: bool,
    /// Most likely strategy index of every customer.
    pub profile: Vec<usize>,
}

pub fn check_convergence(states: &[MixedState], p_threshold: f64) -> Verdict {
    Verdict {
        converged: states.iter().all(|s| s.max_prob() >= p_threshold),
        profile: states.iter().map(MixedState::argmax).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningParams {
    /// Learning rate in `(0, 1]`; `0` freezes the automata.
    pub b: f64,
    pub max_iters: usize,
    pub p_threshold: f64,
    /// Learning triggers per requested connection, in `(0, 1]`.
    pub q: f64,
    pub gain_mode: GainMode,
    pub normalization: Normalization,
}

impl Default for LearningParams {
    fn default() -> Self {
        Self {
            b: 0.1,
            max_iters: DEFAULT_MAX_ITERS,
            p_threshold: DEFAULT_P_THRESHOLD,
            q: 1.0,
            gain_mode: GainMode::default(),
            normalization: Normalization::default(),
        }
    }
}

impl LearningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && (0.0..=1.0).contains(&self.b)) {
            return Err(Error::validation("learning.b", format!("{} is outside [0, 1]", self.b)));
        }
        if !(self.p_threshold > 0.0 && self.p_threshold <= 1.0) {
            return Err(Error::validation(
                "learning.p_threshold",
                format!("{} is outside (0, 1]", self.p_threshold),
            ));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::validation("learning.q", format!("{} is outside (0, 1]", self.q)));
        }
        Ok(())
    }
}

/// One round of play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub played: Vec<usize>,
    /// Gains each customer learned from this round.
    pub gains: Vec<f64>,
    /// Expected utilities of the played profile.
    pub utilities: Vec<f64>,
    /// Mixed strategies after the update.
    pub probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub trajectory: Vec<IterationRecord>,
    pub converged: bool,
    /// Round after which the convergence test first passed (0 if the initial
    /// state already passes).
    pub convergence_iteration: Option<usize>,
    /// `ceil(iterations * q)`.
    pub connections: u64,
    /// Final most likely profile (strategy indices).
    pub profile: Vec<usize>,
    pub p_threshold: f64,
}

impl RunRecord {
    pub fn iterations(&self) -> usize {
        self.trajectory.len()
    }
}

pub fn connection_count(iterations: usize, q: f64) -> u64 {
    (iterations as f64 * q).ceil() as u64
}

/// Plays the repeated game until every automaton is `p_threshold`-pure or
/// `max_iters` rounds have elapsed.
pub fn run_learning(game: &Game, params: &LearningParams, seed: u64) -> Result<RunRecord> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states: Vec<MixedState> = game
        .sets
        .iter()
        .map(|s| MixedState::uniform(s.len(), params.normalization))
        .collect();
    let mut trajectory = Vec::new();
    let mut verdict = check_convergence(&states, params.p_threshold);
    let mut convergence_iteration = verdict.converged.then_some(0);

    while !verdict.converged && trajectory.len() < params.max_iters {
        let played: Vec<usize> = states.iter().map(|s| s.sample_action(&mut rng)).collect();
        let outcome = game.outcome(&played)?;
        let member = rng.random_range(0..outcome.m);
        let utilities: Vec<f64> = outcome.utilities.iter().map(|u| u.raw).collect();
        let gains: Vec<f64> = match params.gain_mode {
            GainMode::Sampled => outcome.member_gains(member).to_vec(),
            GainMode::Expected => utilities.clone(),
        };
        for ((state, &k), &g) in states.iter_mut().zip(&played).zip(&gains) {
            state.observe(g);
            let u = state.normalize_gain(g);
            *state = state.a_dist_update(k, u, params.b);
        }
        trajectory.push(IterationRecord {
            played,
            gains,
            utilities,
            probs: states.iter().map(|s| s.probs.clone()).collect(),
        });
        verdict = check_convergence(&states, params.p_threshold);
        if verdict.converged {
            convergence_iteration = Some(trajectory.len());
        }
    }

    Ok(RunRecord {
        seed,
        connections: connection_count(trajectory.len(), params.q),
        trajectory,
        converged: verdict.converged,
        convergence_iteration,
        profile: verdict.profile,
        p_threshold: params.p_threshold,
    })
}
