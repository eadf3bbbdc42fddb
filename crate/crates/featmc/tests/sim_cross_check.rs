//! Statistical agreement between the simulator and the checker on the
//! bundled corpus model.

use featmc::auv::{builtin_scenario, compile_scenario, AUV_PROPS};
use featmc::check::{bounded_reach_probability, expected_reward, CheckOptions};
use featmc::lang::ast::Mode;
use featmc::lang::typecheck::Overrides;
use featmc::sim::{induced_chain, simulate_paths, Objective, Policy};

/// Checker value vs simulation on the induced chain, across 100 seeds:
/// within three standard errors in at least 99 of them.
#[test]
fn estimates_match_the_induced_chain_in_99_of_100_seeds() {
    let scenario = builtin_scenario("north_sea").unwrap();
    let (model, mdp) = compile_scenario(&scenario, &Overrides::new()).unwrap();

    // target: the unsafe states, as defined by the bundled property file
    let props = featmc::parse_properties(AUV_PROPS).unwrap();
    let unsafe_decl = props.labels.iter().find(|l| l.name == "unsafe").unwrap();
    let expr = model.resolver().resolve_bool(&unsafe_decl.expr).unwrap();
    let target = mdp.states_satisfying(&expr).unwrap();

    let policy = Policy::from_rule(&mdp, |_, _| 0);
    let chain = induced_chain(&mdp, &policy).unwrap();
    let max_steps = 60u64;
    // Truncation at max_steps makes the simulated quantity exactly the
    // bounded reachability value on the chain.
    let exact = bounded_reach_probability(&chain, &target, max_steps, Mode::Min)[chain.initial];

    let trials = 4000;
    let mut hits = 0;
    for seed in 0..100 {
        let est = simulate_paths(
            &mdp,
            &policy,
            Objective::Reach,
            &target,
            trials,
            max_steps as usize,
            seed,
        )
        .unwrap();
        if (est.estimate - exact).abs() <= 3.0 * est.std_error.max(1e-9) {
            hits += 1;
        }
    }
    assert!(hits >= 99, "only {hits}/100 seeds within three standard errors of {exact}");
}

#[test]
fn expected_time_estimate_matches_the_chain_checker() {
    let scenario = builtin_scenario("north_sea").unwrap();
    let (model, mdp) = compile_scenario(&scenario, &Overrides::new()).unwrap();
    let time = mdp.reward_index("time").unwrap();
    let done = model.var_index("s").unwrap();
    let target: Vec<bool> = mdp.states.iter().map(|st| st.vars[done] == 12).collect();

    for (name, policy) in [
        ("first", Policy::from_rule(&mdp, |_, _| 0)),
        ("last", Policy::from_rule(&mdp, |_, n| n - 1)),
        ("uniform", Policy::UniformRandom),
    ] {
        let chain = induced_chain(&mdp, &policy).unwrap();
        let value = expected_reward(&chain, time, &target, Mode::Min, &CheckOptions::default())
            .unwrap()[chain.initial];
        let est = simulate_paths(
            &mdp,
            &policy,
            Objective::CumulatedReward(time),
            &target,
            30_000,
            20_000,
            17,
        )
        .unwrap();
        assert_eq!(est.truncation_rate, 0.0, "{name}: mission must complete");
        assert!(
            (est.estimate - value).abs() <= 3.0 * est.std_error,
            "{name}: estimate {} vs checker {value} (se {})",
            est.estimate,
            est.std_error
        );
    }
}

/// The uniform-random policy estimate lies between the min and max checker
/// values (a sanity band, never an acceptance oracle for optima).
#[test]
fn uniform_estimates_stay_inside_the_optimal_band() {
    let scenario = builtin_scenario("north_sea").unwrap();
    let (model, mdp) = compile_scenario(&scenario, &Overrides::new()).unwrap();
    let props = featmc::parse_properties(AUV_PROPS).unwrap();
    let unsafe_decl = props.labels.iter().find(|l| l.name == "unsafe").unwrap();
    let expr = model.resolver().resolve_bool(&unsafe_decl.expr).unwrap();
    let target = mdp.states_satisfying(&expr).unwrap();

    let k = 40u64;
    let min = bounded_reach_probability(&mdp, &target, k, Mode::Min)[mdp.initial];
    let max = bounded_reach_probability(&mdp, &target, k, Mode::Max)[mdp.initial];
    let est = simulate_paths(
        &mdp,
        &Policy::UniformRandom,
        Objective::Reach,
        &target,
        50_000,
        k as usize,
        5,
    )
    .unwrap();
    let slack = 4.0 * est.std_error;
    assert!(
        est.estimate >= min - slack && est.estimate <= max + slack,
        "estimate {} outside [{min}, {max}]",
        est.estimate
    );
}
