//! Monte-Carlo rollouts under a fixed policy, and the induced Markov chain
//! a policy defines (for cross-checking against the numerical checker).

use super::SimError;
use crate::check::qualitative_reach;
use crate::lang::ast::Mode;
use crate::mdp::{Choice, CompiledMdp};
use crate::rat::to_f64;
use num::{BigRational, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;

/// Resolution of nondeterminism for simulation.
#[derive(Debug, Clone)]
pub enum Policy {
    /// Picks uniformly among the choice indices of each state. A sanity
    /// band only: it does not bound the min/max values.
    UniformRandom,
    /// Memoryless deterministic policy: state index to choice index.
    /// States with a single choice may be omitted.
    FixedIndex(HashMap<usize, usize>),
}

impl Policy {
    /// A fixed policy from a rule on (state, choice count).
    pub fn from_rule(mdp: &CompiledMdp, rule: impl Fn(usize, usize) -> usize) -> Policy {
        let mut map = HashMap::new();
        for (s, choices) in mdp.choices.iter().enumerate() {
            if choices.len() > 1 {
                map.insert(s, rule(s, choices.len()));
            }
        }
        Policy::FixedIndex(map)
    }

    fn validate(&self, mdp: &CompiledMdp) -> Result<(), SimError> {
        if let Policy::FixedIndex(map) = self {
            for (s, choices) in mdp.choices.iter().enumerate() {
                match map.get(&s) {
                    Some(&idx) => {
                        if idx >= choices.len() {
                            return Err(SimError::BadChoiceIndex {
                                state: s,
                                index: idx,
                                choices: choices.len(),
                            });
                        }
                    }
                    None => {
                        if choices.len() > 1 {
                            return Err(SimError::IncompletePolicy {
                                state: s,
                                choices: choices.len(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// What a rollout measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Probability of reaching the target within `max_steps`.
    Reach,
    /// Reward of the given structure accumulated strictly before entering
    /// the target (state reward of each visited state plus the transition
    /// reward of each taken choice).
    CumulatedReward(usize),
}

#[derive(Debug, Clone)]
pub struct SimEstimate {
    pub estimate: f64,
    pub trials: usize,
    pub std_error: f64,
    pub ci95_half_width: f64,
    /// Fraction of trials cut off at `max_steps` before reaching the
    /// target; truncated trials count as non-reach.
    pub truncation_rate: f64,
    pub seed: u64,
    /// Per-trial outcomes, indexed by trial.
    pub outcomes: Vec<f64>,
}

impl std::fmt::Display for SimEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "estimate = {:?}", self.estimate)?;
        writeln!(f, "trials = {}", self.trials)?;
        writeln!(f, "std_error = {:?}", self.std_error)?;
        writeln!(f, "ci95_half_width = {:?}", self.ci95_half_width)?;
        writeln!(f, "truncation_rate = {:?}", self.truncation_rate)?;
        write!(f, "seed = {}", self.seed)
    }
}

// splitmix64; mixes (seed, counter) into an independent 32-byte RNG key.
fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut x = seed ^ trial.wrapping_mul(0x9e3779b97f4a7c15);
    for chunk in key.chunks_mut(8) {
        x = x.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Runs `trials` independent rollouts. The estimate is the sample mean;
/// aggregation is in trial order, so results do not depend on the number of
/// worker threads.
pub fn simulate_paths(
    mdp: &CompiledMdp,
    policy: &Policy,
    objective: Objective,
    target: &[bool],
    trials: usize,
    max_steps: usize,
    seed: u64,
) -> Result<SimEstimate, SimError> {
    if trials == 0 {
        return Err(SimError::ZeroTrials);
    }
    policy.validate(mdp)?;
    if let Objective::CumulatedReward(structure) = objective {
        if structure >= mdp.reward_names.len() {
            return Err(SimError::UnknownStructure(structure));
        }
        // The mean reward is only well-defined when the induced chain hits
        // the target almost surely.
        let chain = induced_chain(mdp, policy)?;
        let (_, one) = qualitative_reach(&chain, target, Mode::Min);
        if !one[chain.initial] {
            return Err(SimError::NotAlmostSure { state: chain.display_state(chain.initial) });
        }
    }

    // Per-choice cumulative f64 distributions for branch sampling.
    let cumulative: Vec<Vec<Vec<(f64, usize)>>> = mdp
        .choices
        .iter()
        .map(|choices| {
            choices
                .iter()
                .map(|choice| {
                    let mut acc = 0.0;
                    choice
                        .branches
                        .iter()
                        .map(|(t, p)| {
                            acc += to_f64(p);
                            (acc, *t)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let state_rewards: Option<Vec<f64>> = match objective {
        Objective::CumulatedReward(r) => {
            Some(mdp.state_rewards[r].iter().map(to_f64).collect())
        }
        Objective::Reach => None,
    };

    let rollout = |trial: usize| -> (f64, bool) {
        let mut rng = trial_rng(seed, trial as u64);
        let mut state = mdp.initial;
        let mut reward = 0.0;
        for _ in 0..max_steps {
            if target[state] {
                return match objective {
                    Objective::Reach => (1.0, false),
                    Objective::CumulatedReward(_) => (reward, false),
                };
            }
            let num_choices = mdp.choices[state].len();
            let choice_idx = match policy {
                Policy::UniformRandom => rng.gen_range(0..num_choices),
                Policy::FixedIndex(map) => map.get(&state).copied().unwrap_or(0),
            };
            if let Objective::CumulatedReward(r) = objective {
                reward += state_rewards.as_ref().expect("reward objective")[state];
                reward += to_f64(&mdp.choices[state][choice_idx].rewards[r]);
            }
            let u: f64 = rng.gen();
            let branches = &cumulative[state][choice_idx];
            state = branches
                .iter()
                .find(|(acc, _)| u < *acc)
                .map(|(_, t)| *t)
                .unwrap_or(branches.last().expect("nonempty distribution").1);
        }
        if target[state] {
            match objective {
                Objective::Reach => (1.0, false),
                Objective::CumulatedReward(_) => (reward, false),
            }
        } else {
            // Truncated: count as non-reach; rewards keep the partial sum.
            match objective {
                Objective::Reach => (0.0, true),
                Objective::CumulatedReward(_) => (reward, true),
            }
        }
    };

    let results: Vec<(f64, bool)> = (0..trials).into_par_iter().map(rollout).collect();
    let outcomes: Vec<f64> = results.iter().map(|(v, _)| *v).collect();
    let truncated = results.iter().filter(|(_, t)| *t).count();

    let n = trials as f64;
    let mean = outcomes.iter().sum::<f64>() / n;
    let variance = if trials > 1 {
        outcomes.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std_error = (variance / n).sqrt();
    Ok(SimEstimate {
        estimate: mean,
        trials,
        std_error,
        ci95_half_width: 1.96 * std_error,
        truncation_rate: truncated as f64 / n,
        seed,
        outcomes,
    })
}

/// The Markov chain a policy induces on the MDP: the same state space with
/// exactly one choice per state. For [`Policy::UniformRandom`] the choices
/// merge with equal weight (transition rewards average accordingly).
/// States the policy never visits stay in the table so value vectors stay
/// aligned with the original MDP.
pub fn induced_chain(mdp: &CompiledMdp, policy: &Policy) -> Result<CompiledMdp, SimError> {
    policy.validate(mdp)?;
    let mut choices: Vec<Vec<Choice>> = Vec::with_capacity(mdp.num_states());
    for (s, state_choices) in mdp.choices.iter().enumerate() {
        let merged = match policy {
            Policy::FixedIndex(map) => {
                let idx = map.get(&s).copied().unwrap_or(0);
                state_choices[idx].clone()
            }
            Policy::UniformRandom => {
                let m = state_choices.len();
                if m == 1 {
                    state_choices[0].clone()
                } else {
                    let weight = BigRational::new(1.into(), (m as i64).into());
                    let mut branches: Vec<(usize, BigRational)> = Vec::new();
                    let mut rewards =
                        vec![BigRational::zero(); mdp.reward_names.len()];
                    for choice in state_choices {
                        for (t, p) in &choice.branches {
                            branches.push((*t, p * &weight));
                        }
                        for (acc, r) in rewards.iter_mut().zip(choice.rewards.iter()) {
                            *acc += r * &weight;
                        }
                    }
                    crate::mdp::normalize_branches(&mut branches);
                    Choice { action: state_choices[0].action, branches, rewards }
                }
            }
        };
        choices.push(vec![merged]);
    }
    Ok(CompiledMdp {
        states: mdp.states.clone(),
        initial: mdp.initial,
        choices,
        state_rewards: mdp.state_rewards.clone(),
        reward_names: mdp.reward_names.clone(),
        labels: mdp.labels.clone(),
        actions: mdp.actions.clone(),
        var_names: mdp.var_names.clone(),
        feature_model: mdp.feature_model.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::{expected_reward, reach_probability, CheckOptions};
    use crate::mdp::MdpBuilder;

    fn leaky_loop_with_time() -> CompiledMdp {
        let mut b = MdpBuilder::new(2);
        b.choice(0, "step", &[(0, 1, 2), (1, 1, 2)]);
        b.dirac(1, "step", 1);
        let t = b.reward_structure("time");
        b.transition_reward_all(t, 1, 1);
        b.build().unwrap()
    }

    #[test]
    fn reach_estimate_approaches_one() {
        let mdp = leaky_loop_with_time();
        let est = simulate_paths(
            &mdp,
            &Policy::UniformRandom,
            Objective::Reach,
            &[false, true],
            100_000,
            100,
            42,
        )
        .unwrap();
        // analytic value 1 - 2^-100; three standard errors around 1.
        assert!(est.estimate > 1.0 - 3.0 * est.std_error.max(1e-9));
        assert_eq!(est.truncation_rate, 0.0);
    }

    #[test]
    fn reward_estimate_matches_geometric_mean() {
        let mdp = leaky_loop_with_time();
        let est = simulate_paths(
            &mdp,
            &Policy::UniformRandom,
            Objective::CumulatedReward(0),
            &[false, true],
            100_000,
            1000,
            7,
        )
        .unwrap();
        assert!(
            (est.estimate - 2.0).abs() <= 3.0 * est.std_error,
            "estimate {} se {}",
            est.estimate,
            est.std_error
        );
    }

    #[test]
    fn fixed_seed_is_reproducible_and_thread_independent() {
        let mdp = leaky_loop_with_time();
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                simulate_paths(
                    &mdp,
                    &Policy::UniformRandom,
                    Objective::Reach,
                    &[false, true],
                    10_000,
                    50,
                    123,
                )
                .unwrap()
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.outcomes, b.outcomes);
    }

    #[test]
    fn single_trial_is_deterministic() {
        let mdp = leaky_loop_with_time();
        let once = simulate_paths(&mdp, &Policy::UniformRandom, Objective::Reach, &[false, true], 1, 5, 9)
            .unwrap();
        let twice = simulate_paths(&mdp, &Policy::UniformRandom, Objective::Reach, &[false, true], 1, 5, 9)
            .unwrap();
        assert_eq!(once.outcomes, twice.outcomes);
    }

    #[test]
    fn truncation_rate_vanishes_as_max_steps_grows() {
        let mdp = leaky_loop_with_time();
        let short = simulate_paths(&mdp, &Policy::UniformRandom, Objective::Reach, &[false, true], 2_000, 1, 5)
            .unwrap();
        let long = simulate_paths(&mdp, &Policy::UniformRandom, Objective::Reach, &[false, true], 2_000, 60, 5)
            .unwrap();
        assert!(short.truncation_rate > long.truncation_rate);
        assert_eq!(long.truncation_rate, 0.0);
    }

    #[test]
    fn reward_objective_requires_almost_sure_reachability() {
        // A fixed policy that spins forever cannot measure reward-to-target.
        let mut b = MdpBuilder::new(2);
        b.dirac(0, "spin", 0);
        b.dirac(0, "go", 1);
        b.dirac(1, "done", 1);
        let t = b.reward_structure("time");
        b.transition_reward_all(t, 1, 1);
        let mdp = b.build().unwrap();
        let spin = Policy::from_rule(&mdp, |_, _| 0);
        let err = simulate_paths(&mdp, &spin, Objective::CumulatedReward(0), &[false, true], 10, 10, 1)
            .unwrap_err();
        assert!(matches!(err, SimError::NotAlmostSure { .. }), "{err}");
        let go = Policy::from_rule(&mdp, |_, _| 1);
        assert!(simulate_paths(&mdp, &go, Objective::CumulatedReward(0), &[false, true], 10, 10, 1)
            .is_ok());
    }

    #[test]
    fn incomplete_policies_are_rejected() {
        let mut b = MdpBuilder::new(2);
        b.dirac(0, "a", 1);
        b.dirac(0, "b", 0);
        b.dirac(1, "done", 1);
        let mdp = b.build().unwrap();
        let err = simulate_paths(
            &mdp,
            &Policy::FixedIndex(HashMap::new()),
            Objective::Reach,
            &[false, true],
            10,
            10,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::IncompletePolicy { state: 0, choices: 2 }), "{err}");
    }

    #[test]
    fn induced_chain_matches_checker_within_three_standard_errors() {
        // Nondeterministic model; under each fixed policy the chain's
        // reachability value and the simulation estimate must agree.
        let mut b = MdpBuilder::new(4);
        b.choice(0, "a", &[(1, 1, 2), (2, 1, 2)]);
        b.choice(0, "b", &[(1, 1, 4), (3, 3, 4)]);
        b.choice(1, "a", &[(0, 1, 3), (3, 2, 3)]);
        b.dirac(2, "a", 2);
        b.dirac(3, "a", 3);
        let t = b.reward_structure("time");
        b.transition_reward_all(t, 1, 1);
        let mdp = b.build().unwrap();
        let target = [false, false, false, true];
        for (name, policy) in [
            ("first", Policy::from_rule(&mdp, |_, _| 0)),
            ("last", Policy::from_rule(&mdp, |_, n| n - 1)),
            ("uniform", Policy::UniformRandom),
        ] {
            let chain = induced_chain(&mdp, &policy).unwrap();
            let value = reach_probability(&chain, &target, Mode::Min, &CheckOptions::default())
                .unwrap()[chain.initial];
            let est = simulate_paths(&mdp, &policy, Objective::Reach, &target, 50_000, 500, 11)
                .unwrap();
            assert!(
                (est.estimate - value).abs() <= 3.0 * est.std_error.max(1e-6),
                "{name}: estimate {} vs checker {value} (se {})",
                est.estimate,
                est.std_error
            );
        }
    }

    #[test]
    fn uniform_induced_chain_averages_rewards_exactly() {
        let mut b = MdpBuilder::new(2);
        b.choice(0, "a", &[(0, 1, 2), (1, 1, 2)]);
        b.dirac(0, "b", 1);
        b.dirac(1, "done", 1);
        let t = b.reward_structure("cost");
        b.choice_reward(t, 0, 0, 4, 1);
        b.choice_reward(t, 0, 1, 2, 1);
        let mdp = b.build().unwrap();
        let chain = induced_chain(&mdp, &Policy::UniformRandom).unwrap();
        // merged: 1/2·{0:1/2,1:1/2} + 1/2·{1:1} = {0:1/4, 1:3/4}, reward 3.
        assert_eq!(chain.choices[0].len(), 1);
        let merged = &chain.choices[0][0];
        assert_eq!(merged.branches[0], (0, BigRational::new(1.into(), 4.into())));
        assert_eq!(merged.branches[1], (1, BigRational::new(3.into(), 4.into())));
        assert_eq!(merged.rewards[t], BigRational::new(3.into(), 1.into()));
        // and the expected reward on the chain is finite and checkable
        let v = expected_reward(&chain, t, &[false, true], Mode::Min, &CheckOptions::default())
            .unwrap();
        // E = 3 + (1/4)E => E = 4
        assert!((v[0] - 4.0).abs() < 1e-5, "{}", v[0]);
    }
}
