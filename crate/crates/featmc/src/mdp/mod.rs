//! Explicit Markov decision process: state table, action-labeled
//! nondeterministic choices with exact rational distributions, reward
//! vectors and label sets.
//!
//! Built either by [`compile`]-ing a typed model or programmatically via
//! [`MdpBuilder`] (used by tests and by the simulator's induced chains).
//! A `CompiledMdp` is immutable after construction and safe for concurrent
//! reads.

mod compile;
mod export;

pub use compile::{compile, compile_with_options, joint_choices, CompileOptions, JointChoice};
pub use export::{export_dot, export_transitions_csv, stats_report, MdpStats};

use crate::feature_model::{Configuration, FeatureModel, SwitchError};
use crate::lang::ast::Pos;
use crate::lang::eval::EvalError;
use crate::rat;
use num::{BigRational, One, Signed, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

/// Merges duplicate targets, drops zero-probability branches and sorts by
/// target index. Both construction paths normalize, so equality of
/// distributions is syntactic equality of branch lists.
pub(crate) fn normalize_branches(branches: &mut Vec<(usize, BigRational)>) {
    branches.retain(|(_, p)| !p.is_zero());
    branches.sort_by_key(|(t, _)| *t);
    let mut merged: Vec<(usize, BigRational)> = Vec::with_capacity(branches.len());
    for (t, p) in branches.drain(..) {
        match merged.last_mut() {
            Some((last_t, last_p)) if *last_t == t => *last_p += p,
            _ => merged.push((t, p)),
        }
    }
    *branches = merged;
}

/// One explicit state: a valuation of all module variables plus the active
/// feature configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State {
    pub vars: Box<[i64]>,
    pub config: Configuration,
}

/// One nondeterministic choice: a probability distribution over successor
/// states, tagged with its action label and per-structure transition
/// rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: Option<usize>,
    /// (target state index, probability); probabilities are positive and
    /// sum to exactly 1; targets are strictly increasing.
    pub branches: Vec<(usize, BigRational)>,
    /// Transition reward per reward structure.
    pub rewards: Vec<BigRational>,
}

#[derive(Debug, Clone)]
pub struct CompiledMdp {
    pub states: Vec<State>,
    pub initial: usize,
    /// Choices per state, aligned with `states`.
    pub choices: Vec<Vec<Choice>>,
    /// State rewards: `state_rewards[structure][state]`.
    pub state_rewards: Vec<Vec<BigRational>>,
    pub reward_names: Vec<String>,
    /// Label name to membership bit-vector (aligned with `states`).
    pub labels: BTreeMap<String, Vec<bool>>,
    pub actions: Vec<String>,
    pub var_names: Vec<String>,
    pub feature_model: FeatureModel,
}

impl CompiledMdp {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_choices(&self) -> usize {
        self.choices.iter().map(|c| c.len()).sum()
    }

    pub fn num_transitions(&self) -> usize {
        self.choices.iter().flatten().map(|c| c.branches.len()).sum()
    }

    pub fn reward_index(&self, name: &str) -> Option<usize> {
        self.reward_names.iter().position(|n| n == name)
    }

    pub fn label_set(&self, name: &str) -> Option<&[bool]> {
        self.labels.get(name).map(|v| v.as_slice())
    }

    /// Evaluates a resolved boolean state expression over every state.
    pub fn states_satisfying(
        &self,
        expr: &crate::lang::eval::RExpr,
    ) -> Result<Vec<bool>, EvalError> {
        let mut out = Vec::with_capacity(self.states.len());
        for state in &self.states {
            let ctx = crate::lang::eval::EvalCtx::new(&state.vars, state.config);
            let v = crate::lang::eval::evaluate_expr(expr, &ctx)?;
            out.push(v.as_bool().expect("typechecked bool"));
        }
        Ok(out)
    }

    /// Compact display: variable valuation plus active leaf features.
    pub fn display_state(&self, idx: usize) -> String {
        let state = &self.states[idx];
        let vars: Vec<String> = self
            .var_names
            .iter()
            .zip(state.vars.iter())
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        format!("{}|{}", vars.join(","), self.feature_model.display_config(state.config))
    }

    pub fn action_name(&self, action: Option<usize>) -> &str {
        match action {
            Some(idx) => &self.actions[idx],
            None => "",
        }
    }

    /// Structural invariants: exact distribution sums, no deadlocks, valid
    /// configurations, full reachability. Builder and compiler both enforce
    /// these; tests call it directly.
    pub fn check_invariants(&self) -> Result<(), CompileError> {
        for (s, choices) in self.choices.iter().enumerate() {
            if choices.is_empty() {
                return Err(CompileError::BuilderDeadlock { state: s });
            }
            for (c, choice) in choices.iter().enumerate() {
                let sum: BigRational = choice.branches.iter().map(|(_, p)| p.clone()).sum();
                if !sum.is_one() {
                    return Err(CompileError::ChoiceProbabilitySum {
                        state: s,
                        choice: c,
                        sum: rat::format_rational(&sum),
                    });
                }
                for (t, p) in &choice.branches {
                    if *t >= self.states.len() || p.is_zero() || p.is_negative() {
                        return Err(CompileError::MalformedBranch { state: s, choice: c });
                    }
                }
            }
        }
        for state in &self.states {
            if !self.feature_model.validate_configuration(state.config) {
                return Err(CompileError::InvalidStateConfiguration {
                    config: self.feature_model.display_config(state.config),
                });
            }
        }
        // Reachability from the initial state.
        let mut seen = vec![false; self.states.len()];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        while let Some(s) = stack.pop() {
            for choice in &self.choices[s] {
                for (t, _) in &choice.branches {
                    if !seen[*t] {
                        seen[*t] = true;
                        stack.push(*t);
                    }
                }
            }
        }
        if let Some(unreachable) = seen.iter().position(|r| !r) {
            return Err(CompileError::UnreachableState { state: unreachable });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("evaluation failed in state {state}: {source}")]
    Eval { state: String, source: EvalError },

    #[error("{pos}: assignment puts `{var}`={value} outside [{lo}..{hi}] in state {state}")]
    RangeViolation { pos: Pos, var: String, value: i64, lo: i64, hi: i64, state: String },

    #[error("{pos}: feature switch failed in state {state}: {source}")]
    InvalidSwitch { pos: Pos, state: String, source: SwitchError },

    #[error("deadlock: state {0} has no enabled joint choice (witness path from the initial state follows)\n{1}", .state, .path.join("\n"))]
    Deadlock { state: String, path: Vec<String> },

    #[error("state space exceeds the cap of {cap} states")]
    StateCap { cap: usize },

    #[error("{pos}: reward \"{structure}\" is negative ({value}) in state {state}")]
    NegativeReward { pos: Pos, structure: String, value: String, state: String },

    #[error("state {state} choice {choice}: branch probabilities sum to {sum}, expected 1")]
    ChoiceProbabilitySum { state: usize, choice: usize, sum: String },

    #[error("state {state} choice {choice}: malformed branch")]
    MalformedBranch { state: usize, choice: usize },

    #[error("state {state} has no choices")]
    BuilderDeadlock { state: usize },

    #[error("state {state} is unreachable from the initial state")]
    UnreachableState { state: usize },

    #[error("invalid feature configuration {config} stored in a state")]
    InvalidStateConfiguration { config: String },

    #[error("builder produced no states")]
    Empty,
}

/// Programmatic construction of small explicit MDPs.
///
/// States are indexed 0..n with a synthetic variable `s` holding the index,
/// so exports and displays work the same as for compiled models.
pub struct MdpBuilder {
    num_states: usize,
    initial: usize,
    choices: Vec<Vec<Choice>>,
    reward_names: Vec<String>,
    state_rewards: Vec<Vec<BigRational>>,
    labels: BTreeMap<String, Vec<bool>>,
    actions: Vec<String>,
}

impl MdpBuilder {
    pub fn new(num_states: usize) -> Self {
        MdpBuilder {
            num_states,
            initial: 0,
            choices: vec![Vec::new(); num_states],
            reward_names: Vec::new(),
            state_rewards: Vec::new(),
            labels: BTreeMap::new(),
            actions: Vec::new(),
        }
    }

    pub fn initial(&mut self, state: usize) -> &mut Self {
        self.initial = state;
        self
    }

    fn intern_action(&mut self, name: &str) -> usize {
        if let Some(idx) = self.actions.iter().position(|a| a == name) {
            idx
        } else {
            self.actions.push(name.to_string());
            self.actions.len() - 1
        }
    }

    /// Adds a choice; branch probabilities are `(numerator, denominator)`
    /// pairs. Returns the choice index within the state.
    pub fn choice(&mut self, state: usize, action: &str, branches: &[(usize, i64, i64)]) -> usize {
        let action = self.intern_action(action);
        let mut branches: Vec<(usize, BigRational)> = branches
            .iter()
            .map(|(t, n, d)| (*t, BigRational::new((*n).into(), (*d).into())))
            .collect();
        normalize_branches(&mut branches);
        let rewards = vec![BigRational::zero(); self.reward_names.len()];
        self.choices[state].push(Choice { action: Some(action), branches, rewards });
        self.choices[state].len() - 1
    }

    /// Adds a Dirac choice to a single target.
    pub fn dirac(&mut self, state: usize, action: &str, target: usize) -> usize {
        self.choice(state, action, &[(target, 1, 1)])
    }

    pub fn reward_structure(&mut self, name: &str) -> usize {
        self.reward_names.push(name.to_string());
        self.state_rewards.push(vec![BigRational::zero(); self.num_states]);
        for state_choices in &mut self.choices {
            for choice in state_choices {
                choice.rewards.push(BigRational::zero());
            }
        }
        self.reward_names.len() - 1
    }

    pub fn state_reward(&mut self, structure: usize, state: usize, num: i64, den: i64) -> &mut Self {
        self.state_rewards[structure][state] = BigRational::new(num.into(), den.into());
        self
    }

    /// Sets the transition reward of one choice.
    pub fn choice_reward(
        &mut self,
        structure: usize,
        state: usize,
        choice: usize,
        num: i64,
        den: i64,
    ) -> &mut Self {
        self.choices[state][choice].rewards[structure] = BigRational::new(num.into(), den.into());
        self
    }

    /// Sets the same transition reward on every choice.
    pub fn transition_reward_all(&mut self, structure: usize, num: i64, den: i64) -> &mut Self {
        for state_choices in &mut self.choices {
            for choice in state_choices {
                choice.rewards[structure] = BigRational::new(num.into(), den.into());
            }
        }
        self
    }

    pub fn label(&mut self, name: &str, states: &[usize]) -> &mut Self {
        let mut set = vec![false; self.num_states];
        for &s in states {
            set[s] = true;
        }
        self.labels.insert(name.to_string(), set);
        self
    }

    pub fn build(self) -> Result<CompiledMdp, CompileError> {
        if self.num_states == 0 {
            return Err(CompileError::Empty);
        }
        let mut trivial = FeatureModel::builder();
        trivial.root("root").expect("fresh builder");
        let feature_model = trivial.build().expect("root-only model");
        let config = Configuration::EMPTY.with(feature_model.root());
        let states: Vec<State> = (0..self.num_states)
            .map(|i| State { vars: vec![i as i64].into_boxed_slice(), config })
            .collect();
        let mdp = CompiledMdp {
            states,
            initial: self.initial,
            choices: self.choices,
            state_rewards: self.state_rewards,
            reward_names: self.reward_names,
            labels: self.labels,
            actions: self.actions,
            var_names: vec!["s".to_string()],
            feature_model,
        };
        mdp.check_invariants()?;
        Ok(mdp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_produces_a_valid_mdp() {
        let mut b = MdpBuilder::new(2);
        b.choice(0, "step", &[(0, 1, 2), (1, 1, 2)]);
        b.dirac(1, "step", 1);
        b.label("goal", &[1]);
        let mdp = b.build().unwrap();
        assert_eq!(mdp.num_states(), 2);
        assert_eq!(mdp.num_choices(), 2);
        assert_eq!(mdp.num_transitions(), 3);
        assert_eq!(mdp.label_set("goal").unwrap(), &[false, true]);
    }

    #[test]
    fn builder_rejects_bad_distributions() {
        let mut b = MdpBuilder::new(1);
        b.choice(0, "step", &[(0, 1, 3)]);
        assert!(matches!(b.build(), Err(CompileError::ChoiceProbabilitySum { .. })));
    }

    #[test]
    fn builder_rejects_deadlocks_and_unreachable_states() {
        let b = MdpBuilder::new(1);
        assert!(matches!(b.build(), Err(CompileError::BuilderDeadlock { .. })));

        let mut b = MdpBuilder::new(2);
        b.dirac(0, "step", 0);
        b.dirac(1, "step", 1);
        assert!(matches!(b.build(), Err(CompileError::UnreachableState { state: 1 })));
    }
}
