//! Cross-checks of the numerical checker against the exact rational
//! oracle (policy enumeration + linear solving) and the exhaustive
//! bounded-path expansion.

mod common;

use common::{exact_expected_reward, exact_reach, oracle_models, random_mdp, Exact};
use featmc::check::{expected_reward, invariant_probability, reach_probability, CheckOptions};
use featmc::lang::ast::Mode;
use featmc::rat::to_f64;
use featmc::sim::exhaustive_bounded;

fn tight() -> CheckOptions {
    CheckOptions { epsilon: 1e-12, ..CheckOptions::default() }
}

#[test]
fn reach_probability_matches_policy_enumeration() {
    for model in oracle_models() {
        for mode in [Mode::Min, Mode::Max] {
            let exact = exact_reach(&model.mdp, &model.target, mode);
            let numeric = reach_probability(&model.mdp, &model.target, mode, &tight()).unwrap();
            for s in 0..model.mdp.num_states() {
                assert!(
                    (to_f64(&exact[s]) - numeric[s]).abs() <= 1e-9,
                    "{} {mode:?} state {s}: exact {} vs numeric {}",
                    model.name,
                    exact[s],
                    numeric[s]
                );
            }
        }
    }
}

#[test]
fn expected_reward_matches_policy_enumeration() {
    for model in oracle_models() {
        let Some(structure) = model.reward else { continue };
        for mode in [Mode::Min, Mode::Max] {
            let exact = exact_expected_reward(&model.mdp, structure, &model.target, mode);
            let numeric =
                expected_reward(&model.mdp, structure, &model.target, mode, &tight()).unwrap();
            for s in 0..model.mdp.num_states() {
                match &exact[s] {
                    Exact::Infinite => assert!(
                        numeric[s].is_infinite(),
                        "{} {mode:?} state {s}: oracle says infinite, checker {}",
                        model.name,
                        numeric[s]
                    ),
                    Exact::Finite(r) => {
                        let e = to_f64(r);
                        // relative comparison for values above 1
                        let tol = 1e-9 * e.abs().max(1.0);
                        assert!(
                            (e - numeric[s]).abs() <= tol,
                            "{} {mode:?} state {s}: exact {e} vs numeric {}",
                            model.name,
                            numeric[s]
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn bounded_reachability_matches_exhaustive_expansion() {
    for model in oracle_models() {
        let states: Vec<usize> = (0..model.mdp.num_states()).collect();
        for mode in [Mode::Min, Mode::Max] {
            for k in [0u64, 1, 3, 7, 20] {
                let exact =
                    exhaustive_bounded(&model.mdp, &model.target, k, mode, &states).unwrap();
                let numeric = featmc::check::bounded_reach_probability(
                    &model.mdp,
                    &model.target,
                    k,
                    mode,
                );
                for s in &states {
                    assert!(
                        (to_f64(&exact[*s]) - numeric[*s]).abs() <= 1e-12,
                        "{} {mode:?} k={k} state {s}",
                        model.name
                    );
                }
            }
        }
    }
}

#[test]
fn invariant_duality_matches_the_exact_oracle() {
    // Pmin[G safe] computed by the checker equals 1 - Pmax[F unsafe]
    // computed by the independent rational oracle.
    for model in oracle_models() {
        let safe: Vec<bool> = model.target.iter().map(|t| !t).collect();
        let checker = invariant_probability(&model.mdp, &safe, Mode::Min, &tight()).unwrap();
        let exact = exact_reach(&model.mdp, &model.target, Mode::Max);
        for s in 0..model.mdp.num_states() {
            let expected = 1.0 - to_f64(&exact[s]);
            assert!(
                (checker[s] - expected).abs() <= 1e-9,
                "{} state {s}: {} vs {expected}",
                model.name,
                checker[s]
            );
        }
    }
}

#[test]
fn random_small_models_agree_with_the_oracle() {
    for seed in 0..40 {
        let (mdp, target) = random_mdp(seed);
        for mode in [Mode::Min, Mode::Max] {
            let exact = exact_reach(&mdp, &target, mode);
            let numeric = reach_probability(&mdp, &target, mode, &tight()).unwrap();
            for s in 0..mdp.num_states() {
                assert!(
                    (to_f64(&exact[s]) - numeric[s]).abs() <= 1e-9,
                    "seed {seed} {mode:?} state {s}: exact {} vs numeric {}",
                    exact[s],
                    numeric[s]
                );
            }
        }
    }
}

#[test]
fn bounded_converges_to_unbounded_for_large_k() {
    let options = CheckOptions::default();
    for model in oracle_models() {
        for mode in [Mode::Min, Mode::Max] {
            let unbounded =
                reach_probability(&model.mdp, &model.target, mode, &options).unwrap();
            let bounded =
                featmc::check::bounded_reach_probability(&model.mdp, &model.target, 400, mode);
            for s in 0..model.mdp.num_states() {
                assert!(
                    (unbounded[s] - bounded[s]).abs() < 10.0 * options.epsilon,
                    "{} {mode:?} state {s}: bounded {} vs unbounded {}",
                    model.name,
                    bounded[s],
                    unbounded[s]
                );
            }
        }
    }
}
