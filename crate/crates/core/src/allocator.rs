//! The sharing customer's allocation problem.
//!
//! For a joint request profile every customer can be denied, granted green
//! bandwidth at a grid point of its green interval, or granted yellow
//! bandwidth at a grid point of its yellow interval. The solver walks the
//! Cartesian product of those candidates depth-first in canonical order
//! (customer 0 most significant; deny < green < yellow; bandwidth ascending),
//! prunes partial assignments that already exceed a capacity, and keeps every
//! configuration within [`TIE_TOL`] of the best outcome.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{round_grid, BandwidthRequest, Interval, QosBounds, SpcProfile, SrcProfile};
use crate::par::Execution;

/// Two outcomes closer than this are the same optimum.
pub const TIE_TOL: f64 = 1e-9;

/// Slack on capacity sums to absorb floating-point accumulation of grid values.
pub const CAPACITY_TOL: f64 = 1e-9;

pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000_000;

/// Answer to one customer: green grant, yellow grant or deny (`bw = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationAnswer {
    pub green: bool,
    pub yellow: bool,
    pub bw: f64,
}

impl AllocationAnswer {
    pub const DENY: AllocationAnswer = AllocationAnswer {
        green: false,
        yellow: false,
        bw: 0.0,
    };

    pub fn green(bw: f64) -> Self {
        Self {
            green: true,
            yellow: false,
            bw,
        }
    }

    pub fn yellow(bw: f64) -> Self {
        Self {
            green: false,
            yellow: true,
            bw,
        }
    }

    pub fn is_denied(&self) -> bool {
        !self.green && !self.yellow
    }

    /// `G + Y * (1 - delta)`.
    pub fn weight(&self, delta: f64) -> f64 {
        if self.green {
            1.0
        } else if self.yellow {
            1.0 - delta
        } else {
            0.0
        }
    }

    fn outcome_term(&self, spc: &SpcProfile) -> f64 {
        self.bw / spc.b_s * (spc.mu - spc.gamma) * self.weight(spc.delta)
    }

    /// Whether this answer respects `request`.
    pub fn fits(&self, request: &BandwidthRequest) -> bool {
        match (self.green, self.yellow) {
            (true, true) => false,
            (true, false) => request.green.contains(self.bw),
            (false, true) => request.yellow.contains(self.bw),
            (false, false) => self.bw == 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationConfig {
    pub answers: Vec<AllocationAnswer>,
}

impl AllocationConfig {
    pub fn green_load(&self) -> f64 {
        self.answers.iter().filter(|a| a.green).map(|a| a.bw).sum()
    }

    pub fn yellow_load(&self) -> f64 {
        self.answers.iter().filter(|a| a.yellow).map(|a| a.bw).sum()
    }

    pub fn is_feasible(&self, spc: &SpcProfile) -> bool {
        self.green_load() <= spc.green_capacity() + CAPACITY_TOL
            && self.yellow_load() <= spc.yellow_capacity() + CAPACITY_TOL
    }
}

/// `sol(profile)`: every feasible configuration attaining the best outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub configs: Vec<AllocationConfig>,
    pub best_outcome: f64,
}

impl SolutionSet {
    pub fn m(&self) -> usize {
        self.configs.len()
    }
}

/// Sharing customer's outcome: sum of `Prop(bw) * (mu - gamma) * (G + Y(1-delta))`
/// with `Prop(bw) = bw / b_s`.
pub fn spc_outcome(config: &AllocationConfig, spc: &SpcProfile) -> f64 {
    config
        .answers
        .iter()
        .fold(0.0, |acc, a| acc + a.outcome_term(spc))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationOptions {
    /// Bandwidth grid step inside each request interval.
    pub grid_step: f64,
    /// Upper bound on the projected size of the candidate product.
    pub cap: u128,
    pub execution: Execution,
}

impl AllocationOptions {
    pub fn new(grid_step: f64) -> Self {
        Self {
            grid_step,
            cap: DEFAULT_ENUMERATION_CAP,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }
}

/// Default grid step: a tenth of the admissible bandwidth window.
pub fn default_grid_step(bounds: &QosBounds) -> f64 {
    (bounds.bw_max - bounds.bw_min) / 10.0
}

/// Grid points `min, min + step, ...` strictly below `max`, then `max`.
pub fn grid_points(interval: &Interval, step: f64) -> Vec<f64> {
    let mut points = Vec::new();
    let mut k = 0u64;
    loop {
        let x = interval.min + k as f64 * step;
        if x >= interval.max - TIE_TOL {
            break;
        }
        points.push(round_grid(x));
        k += 1;
    }
    points.push(round_grid(interval.max));
    points
}

fn grid_len(interval: &Interval, step: f64) -> u128 {
    let span = (interval.max - interval.min).max(0.0);
    (span / step).ceil() as u128 + 1
}

/// Candidate answers of one customer in canonical order.
pub fn candidates(request: &BandwidthRequest, grid_step: f64) -> Vec<AllocationAnswer> {
    std::iter::once(AllocationAnswer::DENY)
        .chain(grid_points(&request.green, grid_step).into_iter().map(AllocationAnswer::green))
        .chain(grid_points(&request.yellow, grid_step).into_iter().map(AllocationAnswer::yellow))
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    answer: AllocationAnswer,
    green: f64,
    yellow: f64,
    term: f64,
}

struct Search {
    cands: Vec<Vec<Candidate>>,
    cap_green: f64,
    cap_yellow: f64,
}

struct Ties {
    best: f64,
    members: Vec<(f64, Vec<u32>)>,
}

impl Ties {
    fn new() -> Self {
        Self {
            best: f64::NEG_INFINITY,
            members: Vec::new(),
        }
    }

    fn offer(&mut self, value: f64, path: &[u32]) {
        if value > self.best + TIE_TOL {
            self.best = value;
            let floor = value - TIE_TOL;
            self.members.retain(|(v, _)| *v >= floor);
        }
        if value >= self.best - TIE_TOL {
            self.members.push((value, path.to_vec()));
        }
    }
}

#[derive(Clone, Copy)]
struct Partial {
    green: f64,
    yellow: f64,
    value: f64,
}

impl Search {
    fn build(requests: &[BandwidthRequest], spc: &SpcProfile, opts: &AllocationOptions) -> Result<Self> {
        if !(opts.grid_step.is_finite() && opts.grid_step > 0.0) {
            return Err(Error::validation(
                "grid_step",
                format!("{} must be > 0", opts.grid_step),
            ));
        }
        let mut projected: u128 = 1;
        for r in requests {
            let n = 1 + grid_len(&r.green, opts.grid_step) + grid_len(&r.yellow, opts.grid_step);
            projected = projected.saturating_mul(n);
            if projected > opts.cap {
                break;
            }
        }
        if projected > opts.cap {
            return Err(Error::Resource {
                what: "allocation enumeration",
                context: format!("{} customers", requests.len()),
                projected,
                cap: opts.cap,
            });
        }
        let cands = requests
            .iter()
            .map(|r| {
                candidates(r, opts.grid_step)
                    .into_iter()
                    .map(|answer| Candidate {
                        answer,
                        green: if answer.green { answer.bw } else { 0.0 },
                        yellow: if answer.yellow { answer.bw } else { 0.0 },
                        term: answer.outcome_term(spc),
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            cands,
            cap_green: spc.green_capacity() + CAPACITY_TOL,
            cap_yellow: spc.yellow_capacity() + CAPACITY_TOL,
        })
    }

    fn step(&self, p: Partial, c: &Candidate) -> Option<Partial> {
        let green = p.green + c.green;
        let yellow = p.yellow + c.yellow;
        (green <= self.cap_green && yellow <= self.cap_yellow).then_some(Partial {
            green,
            yellow,
            value: p.value + c.term,
        })
    }

    /// Feasible prefixes of a fixed depth, in canonical order. Used to split the
    /// search into independent subtrees.
    fn prefixes(&self, depth: usize) -> Vec<(Vec<u32>, Partial)> {
        let mut out = vec![(
            Vec::new(),
            Partial {
                green: 0.0,
                yellow: 0.0,
                value: 0.0,
            },
        )];
        for level in &self.cands[..depth] {
            let mut next = Vec::with_capacity(out.len() * level.len());
            for (path, p) in &out {
                for (j, c) in level.iter().enumerate() {
                    if let Some(q) = self.step(*p, c) {
                        let mut path = path.clone();
                        path.push(j as u32);
                        next.push((path, q));
                    }
                }
            }
            out = next;
        }
        out
    }

    fn split_depth(&self) -> usize {
        let mut depth = 0;
        let mut width = 1usize;
        while depth < self.cands.len() && width < 64 {
            width *= self.cands[depth].len();
            depth += 1;
        }
        depth
    }

    fn walk<F: FnMut(&[u32], f64)>(&self, path: &mut Vec<u32>, p: Partial, visit: &mut F) {
        let depth = path.len();
        if depth == self.cands.len() {
            visit(path, p.value);
            return;
        }
        for (j, c) in self.cands[depth].iter().enumerate() {
            if let Some(q) = self.step(p, c) {
                path.push(j as u32);
                self.walk(path, q, visit);
                path.pop();
            }
        }
    }

    fn config(&self, path: &[u32]) -> AllocationConfig {
        AllocationConfig {
            answers: path
                .iter()
                .enumerate()
                .map(|(i, &j)| self.cands[i][j as usize].answer)
                .collect(),
        }
    }

    fn subtrees<R, F>(&self, execution: Execution, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&mut Vec<u32>, Partial) -> R + Sync + Send,
    {
        let roots = self.prefixes(self.split_depth());
        execution.map(&roots, |(prefix, p)| {
            let mut path = prefix.clone();
            f(&mut path, *p)
        })
    }
}

impl Search {
    fn solve(&self, execution: Execution) -> SolutionSet {
        let parts = self.subtrees(execution, |path, p| {
            let mut ties = Ties::new();
            self.walk(path, p, &mut |leaf, value| ties.offer(value, leaf));
            ties
        });
        let best = parts
            .iter()
            .map(|t| t.best)
            .fold(f64::NEG_INFINITY, f64::max);
        let floor = best - TIE_TOL;
        let configs = parts
            .iter()
            .flat_map(|t| t.members.iter())
            .filter(|(v, _)| *v >= floor)
            .map(|(_, path)| self.config(path))
            .collect();
        SolutionSet {
            configs,
            best_outcome: best,
        }
    }
}

/// Every feasible configuration for `requests`, in canonical order.
pub fn enumerate_feasible(
    requests: &[BandwidthRequest],
    spc: &SpcProfile,
    opts: &AllocationOptions,
) -> Result<Vec<AllocationConfig>> {
    let search = Search::build(requests, spc, opts)?;
    let parts = search.subtrees(opts.execution, |path, p| {
        let mut found = Vec::new();
        search.walk(path, p, &mut |leaf, _| found.push(search.config(leaf)));
        found
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Maximises the outcome over all feasible configurations and returns the tie set.
pub fn solve_allocation(
    requests: &[BandwidthRequest],
    spc: &SpcProfile,
    opts: &AllocationOptions,
) -> Result<SolutionSet> {
    Ok(Search::build(requests, spc, opts)?.solve(opts.execution))
}

/// Monotone map of a unit-interval position onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ramp {
    #[default]
    Linear,
    /// `x^exponent`; exponents below 1 are concave.
    Power { exponent: f64 },
}

impl Ramp {
    pub fn apply(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match *self {
            Ramp::Linear => x,
            Ramp::Power { exponent } => x.powf(exponent),
        }
    }

    pub(crate) fn validate(&self, field: &str) -> Result<()> {
        match *self {
            Ramp::Linear => Ok(()),
            Ramp::Power { exponent } if exponent.is_finite() && exponent > 0.0 => Ok(()),
            Ramp::Power { exponent } => Err(Error::validation(
                field,
                format!("exponent {exponent} must be > 0"),
            )),
        }
    }
}

/// Revenue and cost maps of a requesting customer.
///
/// `Rev(bw)` ramps from 0 at `bw_min` to 1 at `bw_max`; `Cost(bw)` ramps from
/// 0 at zero bandwidth to 1 at `bw_max`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GainModel {
    #[serde(default)]
    pub revenue: Ramp,
    #[serde(default)]
    pub cost: Ramp,
}

impl GainModel {
    pub fn revenue(&self, bw: f64, bounds: &QosBounds) -> f64 {
        self.revenue
            .apply((bw - bounds.bw_min) / (bounds.bw_max - bounds.bw_min))
    }

    pub fn cost(&self, bw: f64, bounds: &QosBounds) -> f64 {
        self.cost.apply(bw / bounds.bw_max)
    }
}

/// `Rev_i - Cost_i` for a single answer; lies in `[-1, 1]`.
pub fn src_gain(
    answer: &AllocationAnswer,
    profile: &SrcProfile,
    bounds: &QosBounds,
    delta: f64,
    model: &GainModel,
) -> f64 {
    if answer.is_denied() {
        return 0.0;
    }
    let w = answer.weight(delta);
    let rev = model.revenue(answer.bw, bounds) * profile.alpha * w;
    let cost = model.cost(answer.bw, bounds) * profile.beta * w;
    rev - cost
}

/// Expected utility of one customer over a tie set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utility {
    /// Mean gain, in `[-1, 1]`.
    pub raw: f64,
    /// `(raw + 1) / 2`, in `[0, 1]`.
    pub normalized: f64,
}

impl Utility {
    pub fn from_raw(raw: f64) -> Self {
        Self {
            raw,
            normalized: (raw + 1.0) / 2.0,
        }
    }
}

pub fn src_utility(
    i: usize,
    sol: &SolutionSet,
    profile: &SrcProfile,
    bounds: &QosBounds,
    delta: f64,
    model: &GainModel,
) -> Utility {
    let total: f64 = sol
        .configs
        .iter()
        .map(|c| src_gain(&c.answers[i], profile, bounds, delta, model))
        .sum();
    Utility::from_raw(total / sol.m() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::qos_bounds;

    fn spc(psi: f64, b_s: f64, delta: f64) -> SpcProfile {
        SpcProfile::new(1.0, 0.0, psi, b_s, delta).unwrap()
    }

    fn point(bw: f64) -> BandwidthRequest {
        BandwidthRequest {
            green: Interval { min: bw, max: bw },
            yellow: Interval { min: bw, max: bw },
        }
    }

    fn green_only(opts: &AllocationOptions, reqs: &[BandwidthRequest], s: &SpcProfile) -> Vec<AllocationConfig> {
        enumerate_feasible(reqs, s, opts)
            .unwrap()
            .into_iter()
            .filter(|c| c.answers.iter().all(|a| !a.yellow))
            .collect()
    }

    #[test]
    fn outcome_of_single_grants() {
        let s = spc(0.5, 20.0, 0.1);
        let g = AllocationConfig {
            answers: vec![AllocationAnswer::green(2.0)],
        };
        assert!((spc_outcome(&g, &s) - 0.1).abs() < 1e-15);
        let y = AllocationConfig {
            answers: vec![AllocationAnswer::yellow(2.0)],
        };
        assert!((spc_outcome(&y, &s) - 0.09).abs() < 1e-15);
        let d = AllocationConfig {
            answers: vec![AllocationAnswer::DENY; 3],
        };
        assert_eq!(spc_outcome(&d, &s), 0.0);
    }

    #[test]
    fn grid_includes_both_endpoints() {
        let iv = Interval { min: 1.8, max: 2.0 };
        assert_eq!(grid_points(&iv, 0.1), vec![1.8, 1.9, 2.0]);
        assert_eq!(grid_points(&Interval { min: 2.0, max: 2.0 }, 0.1), vec![2.0]);
        assert_eq!(grid_points(&iv, 0.15), vec![1.8, 1.95, 2.0]);
        assert_eq!(grid_points(&iv, 5.0), vec![1.8, 2.0]);
    }

    #[test]
    fn single_point_request_has_deny_and_grant() {
        let s = spc(0.5, 20.0, 0.1);
        let opts = AllocationOptions::new(0.1);
        let configs = green_only(&opts, &[point(2.0)], &s);
        assert_eq!(configs.len(), 2);
        assert!(configs[0].answers[0].is_denied());
        assert_eq!(configs[1].answers[0], AllocationAnswer::green(2.0));
    }

    #[test]
    fn capacity_filter_forbids_joint_grant() {
        // green capacity 2, yellow capacity 18
        let s = spc(0.1, 20.0, 0.1);
        let opts = AllocationOptions::new(0.1);
        let configs = green_only(&opts, &[point(2.0), point(2.0)], &s);
        let shapes: Vec<(bool, bool)> = configs
            .iter()
            .map(|c| (c.answers[0].green, c.answers[1].green))
            .collect();
        assert_eq!(shapes, vec![(false, false), (false, true), (true, false)]);
    }

    #[test]
    fn unique_optimum_when_capacity_suffices() {
        let s = spc(0.5, 20.0, 0.1);
        let reqs = [
            BandwidthRequest {
                green: Interval { min: 2.0, max: 2.0 },
                yellow: Interval { min: 1.8, max: 2.0 },
            };
            2
        ];
        let sol = solve_allocation(&reqs, &s, &AllocationOptions::new(0.1)).unwrap();
        assert_eq!(sol.m(), 1);
        assert!((sol.best_outcome - 0.2).abs() < 1e-12);
        assert!(sol.configs[0].answers.iter().all(|a| *a == AllocationAnswer::green(2.0)));
    }

    #[test]
    fn symmetric_customers_tie() {
        // green fits one grant, yellow fits none
        let s = SpcProfile::new(1.0, 0.0, 0.75, 4.0, 0.1).unwrap();
        let reqs = [point(2.0), point(2.0)];
        let sol = solve_allocation(&reqs, &s, &AllocationOptions::new(0.1)).unwrap();
        assert_eq!(sol.m(), 2);
        assert_eq!(sol.configs[0].answers[0], AllocationAnswer::DENY);
        assert_eq!(sol.configs[1].answers[1], AllocationAnswer::DENY);
        let bounds = qos_bounds(8.0, 4.0, 300.0).unwrap();
        let p = SrcProfile::with_alpha(1.0, 0.1, 0.1).unwrap();
        let model = GainModel::default();
        let granted = src_gain(&AllocationAnswer::green(2.0), &p, &bounds, 0.1, &model);
        for i in 0..2 {
            let u = src_utility(i, &sol, &p, &bounds, 0.1, &model);
            assert!((u.raw - granted / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn infeasible_requests_leave_all_deny() {
        let s = spc(0.5, 2.0, 0.1);
        let sol = solve_allocation(&[point(5.0), point(6.0)], &s, &AllocationOptions::new(0.5)).unwrap();
        assert_eq!(sol.m(), 1);
        assert_eq!(sol.best_outcome, 0.0);
        assert!(sol.configs[0].answers.iter().all(AllocationAnswer::is_denied));
    }

    #[test]
    fn enumeration_cap_is_a_resource_error() {
        let s = spc(0.5, 20.0, 0.1);
        let wide = BandwidthRequest {
            green: Interval { min: 0.0, max: 10.0 },
            yellow: Interval { min: 0.0, max: 10.0 },
        };
        let opts = AllocationOptions::new(0.01).with_cap(1_000_000);
        let err = solve_allocation(&[wide; 3], &s, &opts).unwrap_err();
        assert!(matches!(err, Error::Resource { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn gains() {
        let bounds = qos_bounds(8.0, 4.0, 300.0).unwrap();
        let model = GainModel::default();
        let qos = SrcProfile::with_alpha(1.0, 0.1, 0.1).unwrap();
        assert_eq!(src_gain(&AllocationAnswer::DENY, &qos, &bounds, 0.1, &model), 0.0);
        assert_eq!(src_gain(&AllocationAnswer::green(2.0), &qos, &bounds, 0.1, &model), 1.0);
        let even = SrcProfile::with_alpha(0.5, 0.1, 0.1).unwrap();
        assert_eq!(src_gain(&AllocationAnswer::yellow(2.0), &even, &bounds, 0.1, &model), 0.0);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let s = spc(0.5, 20.0, 0.1);
        let req = BandwidthRequest {
            green: Interval { min: 3.6, max: 4.0 },
            yellow: Interval { min: 3.24, max: 4.0 },
        };
        let reqs = [req; 5];
        let base = AllocationOptions::new(0.2);
        let seq = solve_allocation(&reqs, &s, &base.with_execution(Execution::Sequential)).unwrap();
        let par = solve_allocation(&reqs, &s, &base.with_execution(Execution::Parallel)).unwrap();
        assert_eq!(seq, par);
        let e1 = enumerate_feasible(&reqs, &s, &base.with_execution(Execution::Sequential)).unwrap();
        let e2 = enumerate_feasible(&reqs, &s, &base.with_execution(Execution::Parallel)).unwrap();
        assert_eq!(e1, e2);
    }
}
