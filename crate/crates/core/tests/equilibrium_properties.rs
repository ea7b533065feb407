mod common;

use femto_share::equilibrium::{
    best_response_dynamics, build_payoff_matrix, find_pure_ne, PayoffMatrix, DEFAULT_PROFILE_CAP,
};
use femto_share::{load_scenario, Execution};
use proptest::prelude::*;

use common::scenario_path;

/// Checks every unilateral deviation directly on the utility table, without
/// the matrix's own helpers.
fn is_equilibrium(dims: &[usize], table: &[Vec<f64>], profile: &[usize]) -> bool {
    let index = |p: &[usize]| p.iter().zip(dims).fold(0, |acc, (&k, &d)| acc * d + k);
    let here = &table[index(profile)];
    (0..dims.len()).all(|i| {
        (0..dims[i]).all(|s| {
            let mut q = profile.to_vec();
            q[i] = s;
            table[index(&q)][i] <= here[i] + 1e-12
        })
    })
}

fn all_profiles(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &d in dims {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..d).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

fn random_table() -> impl Strategy<Value = (Vec<usize>, Vec<Vec<f64>>)> {
    prop::collection::vec(1usize..=3, 1..=4).prop_flat_map(|dims| {
        let size: usize = dims.iter().product();
        let n = dims.len();
        // coarse values so that ties occur
        let cell = prop::collection::vec((0u8..4).prop_map(|v| f64::from(v) / 4.0), n);
        (Just(dims), prop::collection::vec(cell, size))
    })
}

fn potential_table() -> impl Strategy<Value = (Vec<usize>, Vec<Vec<f64>>)> {
    prop::collection::vec(1usize..=3, 1..=4).prop_flat_map(|dims| {
        let size: usize = dims.iter().product();
        let n = dims.len();
        (Just(dims), prop::collection::vec(-1.0f64..1.0, size))
            .prop_map(move |(dims, phi)| (dims, phi.iter().map(|&v| vec![v; n]).collect()))
    })
}

proptest! {
    #[test]
    fn equilibria_match_an_independent_check((dims, table) in random_table()) {
        let m = PayoffMatrix::from_table(dims.clone(), table.clone()).unwrap();
        let expected: Vec<Vec<usize>> = all_profiles(&dims)
            .into_iter()
            .filter(|p| is_equilibrium(&dims, &table, p))
            .collect();
        prop_assert_eq!(find_pure_ne(&m), expected);
    }

    #[test]
    fn best_response_terminates_in_potential_games((dims, table) in potential_table(), start_code in any::<usize>()) {
        let m = PayoffMatrix::from_table(dims, table).unwrap();
        let start = m.profile_at(start_code % m.len());
        let report = best_response_dynamics(&m, &start, 10_000).unwrap();
        prop_assert!(m.is_pure_ne(&report.terminal));
        prop_assert!(report.pure_ne.contains(&report.terminal));
        for step in &report.brd_trace {
            let mut next = step.profile.clone();
            next[step.player] = step.to;
            prop_assert!(m.utility(&step.profile, step.player) < m.utility(&next, step.player));
        }
    }
}

#[test]
fn symmetric_scenario_has_permutation_closed_equilibria() {
    let s = load_scenario(scenario_path("scenario1")).unwrap();
    let game = s.game(Execution::default()).unwrap();
    let m = build_payoff_matrix(&game, DEFAULT_PROFILE_CAP, Execution::default()).unwrap();
    let ne = find_pure_ne(&m);
    assert!(!ne.is_empty());
    for p in &ne {
        let mut rotated = p.clone();
        rotated.rotate_left(1);
        assert!(ne.contains(&rotated), "{rotated:?} missing");
        let mut swapped = p.clone();
        swapped.swap(0, 4);
        assert!(ne.contains(&swapped), "{swapped:?} missing");
    }
    // identical customers receive identical utilities at symmetric profiles
    let all_top = vec![1; 5];
    let u = &m.utilities[m.index_of(&all_top)];
    assert!(u.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
}

#[test]
fn relabelling_customers_relabels_the_matrix() {
    let s = load_scenario(scenario_path("scenario2")).unwrap();
    let mut r = s.clone();
    r.srcs.reverse();
    let a = s.game(Execution::default()).unwrap();
    let b = r.game(Execution::default()).unwrap();
    let ma = build_payoff_matrix(&a, DEFAULT_PROFILE_CAP, Execution::default()).unwrap();
    let mb = build_payoff_matrix(&b, DEFAULT_PROFILE_CAP, Execution::default()).unwrap();
    for k in 0..ma.len() {
        let p = ma.profile_at(k);
        let q: Vec<usize> = p.iter().rev().copied().collect();
        let ua = &ma.utilities[k];
        let ub: Vec<f64> = mb.utilities[mb.index_of(&q)].iter().rev().copied().collect();
        for (x, y) in ua.iter().zip(&ub) {
            assert!((x - y).abs() < 1e-9, "profile {p:?}: {ua:?} vs {ub:?}");
        }
    }
    let mut na: Vec<Vec<usize>> = find_pure_ne(&ma);
    let mut nb: Vec<Vec<usize>> = find_pure_ne(&mb)
        .into_iter()
        .map(|p| p.into_iter().rev().collect())
        .collect();
    na.sort();
    nb.sort();
    assert_eq!(na, nb);
}

#[test]
fn matrix_is_identical_across_execution_modes() {
    let s = load_scenario(scenario_path("scenario2")).unwrap();
    let seq = build_payoff_matrix(
        &s.game(Execution::Sequential).unwrap(),
        DEFAULT_PROFILE_CAP,
        Execution::Sequential,
    )
    .unwrap();
    let par = build_payoff_matrix(
        &s.game(Execution::Parallel).unwrap(),
        DEFAULT_PROFILE_CAP,
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq.len(), 90);
}

#[test]
fn profile_cap_is_a_resource_error() {
    let s = load_scenario(scenario_path("scenario1")).unwrap();
    let game = s.game(Execution::default()).unwrap();
    let err = build_payoff_matrix(&game, 31, Execution::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
