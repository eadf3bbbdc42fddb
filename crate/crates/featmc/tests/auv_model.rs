//! The bundled pipeline-inspection model: synchronization semantics,
//! feature-configuration behavior and scenario plumbing.

use std::collections::BTreeMap;

use featmc::auv::*;
use featmc::feature_model::Configuration;
use featmc::lang::TypedModel;
use featmc::mdp::{export_transitions_csv, joint_choices, stats_report, CompiledMdp, State};
use featmc::Overrides;
use num::BigRational;

fn scenario_one() -> (TypedModel, CompiledMdp) {
    let scenario = builtin_scenario("north_sea").unwrap();
    compile_scenario(&scenario, &Overrides::new()).unwrap()
}

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

struct Vars {
    s: usize,
    water_visib: usize,
}

fn vars(model: &TypedModel) -> Vars {
    Vars {
        s: model.var_index("s").unwrap(),
        water_visib: model.var_index("water_visib").unwrap(),
    }
}

fn config_of(model: &TypedModel, names: &[&str]) -> Configuration {
    let fm = &model.feature_model;
    let mut cfg = Configuration::from_indices(
        ["root", "robot", "navigation", "pipeline_inspection"]
            .iter()
            .map(|n| fm.index_of(n).unwrap()),
    );
    for n in names {
        cfg = cfg.with(fm.index_of(n).unwrap());
    }
    cfg
}

/// First reachable state with the given `s` value, configuration and a
/// visibility accepted by `visib_ok`.
fn find_state(
    model: &TypedModel,
    mdp: &CompiledMdp,
    s_value: i64,
    config: Configuration,
    visib_ok: impl Fn(i64) -> bool,
) -> State {
    let v = vars(model);
    mdp.states
        .iter()
        .find(|st| st.vars[v.s] == s_value && st.config == config && visib_ok(st.vars[v.water_visib]))
        .unwrap_or_else(|| panic!("no reachable state with s={s_value}"))
        .clone()
}

const SEARCH_HIGH: i64 = 4;
const FOUND: i64 = 8;
const FOLLOWING: i64 = 9;

#[test]
fn search_high_marginal_matches_the_command_probabilities() {
    let (model, mdp) = scenario_one();
    let v = vars(&model);
    // interior visibility => all three environment outcomes are distinct
    let state = find_state(&model, &mdp, SEARCH_HIGH, config_of(&model, &["high", "search"]), |w| {
        w >= 7 && w <= 9
    });
    let choices = joint_choices(&model, &state).unwrap();
    // top visibility band: three controller rules
    assert_eq!(choices.len(), 3);
    for choice in &choices {
        // 3 vehicle outcomes x 3 environment outcomes
        assert_eq!(choice.branches.len(), 9);
        let mut marginal: BTreeMap<i64, BigRational> = BTreeMap::new();
        for (target, p) in &choice.branches {
            *marginal.entry(target.vars[v.s]).or_insert_with(|| rational(0, 1)) += p;
        }
        assert_eq!(marginal[&FOUND], rational(59, 100));
        assert_eq!(marginal[&SEARCH_HIGH], rational(2, 5));
        assert_eq!(marginal[&7], rational(1, 100)); // recover_high
    }
}

#[test]
fn search_high_with_med_feature_is_a_dirac_junction() {
    let (model, mdp) = scenario_one();
    let v = vars(&model);
    let state = find_state(&model, &mdp, SEARCH_HIGH, config_of(&model, &["med", "search"]), |_| true);
    let choices = joint_choices(&model, &state).unwrap();
    for choice in &choices {
        let mut marginal: BTreeMap<i64, BigRational> = BTreeMap::new();
        for (target, p) in &choice.branches {
            *marginal.entry(target.vars[v.s]).or_insert_with(|| rational(0, 1)) += p;
        }
        // the only vehicle outcome is the altitude junction to search_med
        assert_eq!(marginal.len(), 1);
        assert_eq!(marginal[&3], rational(1, 1));
    }
}

#[test]
fn found_state_has_exactly_the_task_switch_choice() {
    let (model, mdp) = scenario_one();
    let state = find_state(&model, &mdp, FOUND, config_of(&model, &["high", "search"]), |_| true);
    let choices = joint_choices(&model, &state).unwrap();
    assert_eq!(choices.len(), 1, "only the found-rule of the controller applies");
    let follow_cfg = config_of(&model, &["low", "follow"]);
    for (target, _) in &choices[0].branches {
        assert_eq!(target.config, follow_cfg, "switch activates low and follow");
    }
}

#[test]
fn following_keeps_only_the_noop_controller_rule() {
    let (model, mdp) = scenario_one();
    let state =
        find_state(&model, &mdp, FOLLOWING, config_of(&model, &["low", "follow"]), |_| true);
    let choices = joint_choices(&model, &state).unwrap();
    assert_eq!(choices.len(), 1);
    let ctrl_idx = choices[0].ctrl_command.expect("controller participates");
    let ctrl = model.controller.as_ref().unwrap();
    assert!(ctrl.commands[ctrl_idx].activate.is_empty());
    assert!(ctrl.commands[ctrl_idx].deactivate.is_empty());
    // the configuration stays {low, follow}
    for (target, _) in &choices[0].branches {
        assert_eq!(target.config, state.config);
    }
}

#[test]
fn high_visibility_offers_three_altitude_choices() {
    let (model, mdp) = scenario_one();
    // high_visib = 2*(10-1)/3 = 6; pick a search state with visibility >= 6
    let state = find_state(&model, &mdp, SEARCH_HIGH, config_of(&model, &["high", "search"]), |w| {
        w >= 6
    });
    let choices = joint_choices(&model, &state).unwrap();
    assert_eq!(choices.len(), 3, "one per altitude rule");
    // the three choices differ in the successor configuration
    let mut configs = std::collections::BTreeSet::new();
    for c in &choices {
        configs.insert(c.branches[0].0.config.0);
    }
    assert_eq!(configs.len(), 3);
}

#[test]
fn mid_visibility_offers_low_and_med_only() {
    let (model, mdp) = scenario_one();
    // med band for scenario 1: 3 <= visib < 6
    let state = find_state(&model, &mdp, SEARCH_HIGH, config_of(&model, &["high", "search"]), |w| {
        (3..6).contains(&w)
    });
    let choices = joint_choices(&model, &state).unwrap();
    assert_eq!(choices.len(), 2);
}

#[test]
fn every_reachable_state_uses_the_thirteen_vehicle_states() {
    let (model, mdp) = scenario_one();
    let v = vars(&model);
    let mut seen = std::collections::BTreeSet::new();
    for state in &mdp.states {
        let s = state.vars[v.s];
        assert!((0..=12).contains(&s), "s={s} out of the enumeration");
        seen.insert(s);
    }
    assert_eq!(seen.len(), 13, "all thirteen states are reachable");
}

#[test]
fn reachable_count_is_bounded_by_ranges_times_configurations() {
    let (model, mdp) = scenario_one();
    let mut bound: usize = model.feature_model.enumerate_configurations().len();
    for var in &model.vars {
        bound = bound.saturating_mul((var.hi - var.lo + 1) as usize);
    }
    assert!(mdp.num_states() <= bound, "{} > {bound}", mdp.num_states());
}

#[test]
fn altitude_switches_respect_the_visibility_thresholds() {
    // No choice may activate med below med_visib or high below high_visib;
    // thresholds read the source state's visibility.
    let (model, mdp) = scenario_one();
    let v = vars(&model);
    let fm = &model.feature_model;
    let med = fm.index_of("med").unwrap();
    let high = fm.index_of("high").unwrap();
    let ctrl = model.controller.as_ref().unwrap();
    let (med_visib, high_visib) = (3, 6); // (10-1)/3 and 2*(10-1)/3
    for state in &mdp.states {
        let visib = state.vars[v.water_visib];
        for choice in joint_choices(&model, state).unwrap() {
            let Some(idx) = choice.ctrl_command else { continue };
            let cmd = &ctrl.commands[idx];
            if cmd.activate.contains(med) {
                assert!(visib >= med_visib, "med activated at visibility {visib}");
            }
            if cmd.activate.contains(high) {
                assert!(visib >= high_visib, "high activated at visibility {visib}");
            }
        }
    }
}

#[test]
fn auv_model_has_exactly_four_configurations() {
    let (model, _) = scenario_one();
    let fm = &model.feature_model;
    let configs = fm.enumerate_configurations();
    assert_eq!(configs.len(), 4);
    let displays: Vec<String> = configs.iter().map(|c| fm.display_config(*c)).collect();
    for expected in ["{low,search}", "{med,search}", "{high,search}", "{low,follow}"] {
        assert!(displays.contains(&expected.to_string()), "{displays:?}");
    }
    // brute force over all subsets agrees
    let brute: Vec<Configuration> = (0u64..1 << fm.feature_count())
        .map(Configuration)
        .filter(|c| fm.validate_configuration(*c))
        .collect();
    assert_eq!(brute.len(), 4);
}

#[test]
fn safe_and_unsafe_labels_partition_the_reachable_states() {
    let scenario = builtin_scenario("north_sea").unwrap();
    let (model, mdp) = compile_scenario(&scenario, &Overrides::new()).unwrap();
    let props = featmc::parse_properties(AUV_PROPS).unwrap();
    let mut labels = BTreeMap::new();
    for decl in &props.labels {
        let expr = model.resolver().resolve_bool(&decl.expr).unwrap();
        labels.insert(decl.name.clone(), mdp.states_satisfying(&expr).unwrap());
    }
    let safe = &labels["safe"];
    let unsafe_ = &labels["unsafe"];
    for s in 0..mdp.num_states() {
        assert!(safe[s] ^ unsafe_[s], "state {s} must be exactly one of safe/unsafe");
    }
}

#[test]
fn recompilation_is_bit_identical() {
    let (_, a) = scenario_one();
    let (_, b) = scenario_one();
    assert_eq!(a.states, b.states);
    assert_eq!(export_transitions_csv(&a), export_transitions_csv(&b));
    assert_eq!(stats_report(&a), stats_report(&b));
}

#[test]
fn table_one_scenarios_carry_the_published_parameters() {
    let s1 = builtin_scenario("north_sea").unwrap();
    let (_, overrides) = build_scenario(&s1).unwrap();
    assert_eq!(overrides["min_visib"], "1");
    assert_eq!(overrides["max_visib"], "10");
    assert_eq!(overrides["current_prob"], "3/5"); // exact 0.6
    assert_eq!(overrides["inspect"], "10");

    let s2 = builtin_scenario("caribbean").unwrap();
    let (_, overrides) = build_scenario(&s2).unwrap();
    assert_eq!(overrides["min_visib"], "3");
    assert_eq!(overrides["max_visib"], "20");
    assert_eq!(overrides["current_prob"], "3/10"); // exact 0.3
    assert_eq!(overrides["inspect"], "30");
}

#[test]
fn degenerate_scenarios_are_rejected() {
    let mut s = builtin_scenario("north_sea").unwrap();
    s.max_visib = s.min_visib;
    assert!(matches!(build_scenario(&s), Err(AuvError::InvalidScenario(_))));

    let mut s = builtin_scenario("north_sea").unwrap();
    s.inspect = 0;
    assert!(build_scenario(&s).is_err());

    let mut s = builtin_scenario("north_sea").unwrap();
    s.current_prob = BigRational::new(3.into(), 2.into());
    assert!(build_scenario(&s).is_err());
}

#[test]
fn scenario_files_round_trip_through_the_kv_parser() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenarios/north_sea.kv"
    ))
    .unwrap();
    let parsed = scenario_from_kv(&text).unwrap();
    assert_eq!(parsed, builtin_scenario("north_sea").unwrap());
    assert_eq!(parsed.name, "north_sea");
}

#[test]
fn malformed_scenario_files_are_rejected_with_line_numbers() {
    let err = scenario_from_kv("min_visib = 1\nbogus line\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    let err = scenario_from_kv("min_visib = 1\nmax_visib = 10\ncurrent_prob = x\n").unwrap_err();
    assert!(err.to_string().contains("decimal"), "{err}");
}

#[test]
fn custom_scenario_with_forcing_visibility_also_completes() {
    // A third deployment: as long as min_visib stays below the low-altitude
    // threshold (max-min)/3, poor visibility keeps forcing probabilistic
    // search steps and the mission completes under every policy.
    let scenario = Scenario {
        name: "shallow_bay".into(),
        min_visib: 2,
        max_visib: 16,
        current_prob: BigRational::new(1.into(), 2.into()),
        inspect: 5,
        infl_tf: 1,
    };
    let (model, mdp) = compile_scenario(&scenario, &Overrides::new()).unwrap();
    let v = vars(&model);
    let done: Vec<bool> = mdp.states.iter().map(|st| st.vars[v.s] == 12).collect();
    let (_, one) = featmc::check::qualitative_reach(&mdp, &done, featmc::lang::ast::Mode::Min);
    assert!(one[mdp.initial]);
}

#[test]
fn bundled_model_parses_typechecks_and_prints_stably() {
    let ast = featmc::parse_model(AUV_MODEL).unwrap();
    let printed = ast.to_string();
    let reparsed = featmc::parse_model(&printed).unwrap();
    assert_eq!(printed, reparsed.to_string());
}
