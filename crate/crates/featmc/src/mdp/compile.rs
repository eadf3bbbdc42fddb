//! Compilation of a typed model into the explicit MDP.
//!
//! Modules synchronize by action label: a label's joint choices are the
//! Cartesian product of the enabled commands of every module that declares
//! the label, plus the controller when it does. Joint branch probabilities
//! multiply, variable updates apply simultaneously, and the controller's
//! feature switch is applied to the source configuration. Unlabeled
//! commands interleave without synchronization. Exploration is a
//! breadth-first search from the initial state, so state indices and the
//! whole compiled artifact are deterministic.

use std::collections::HashMap;

use super::{normalize_branches, Choice, CompileError, CompiledMdp, State};
use crate::lang::eval::{evaluate_expr, EvalCtx, RExpr};
use crate::lang::typecheck::{RewardKind, TypedCommand, TypedModel};
use crate::rat;
use num::{BigRational, One, Signed, Zero};

#[derive(Debug, Clone)]
pub struct CompileOptions {
    /// Hard cap on the number of explored states.
    pub state_cap: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { state_cap: 10_000_000 }
    }
}

/// One joint (synchronized) choice out of a concrete state, before state
/// indices exist. The white-box test surface for synchronization.
#[derive(Debug, Clone)]
pub struct JointChoice {
    pub action: Option<usize>,
    /// Index of the participating controller command, if any.
    pub ctrl_command: Option<usize>,
    /// Successor distribution; duplicate targets merged, zero branches
    /// dropped, insertion order preserved.
    pub branches: Vec<(State, BigRational)>,
}

pub fn compile(model: &TypedModel) -> Result<CompiledMdp, CompileError> {
    compile_with_options(model, &CompileOptions::default())
}

pub fn compile_with_options(
    model: &TypedModel,
    options: &CompileOptions,
) -> Result<CompiledMdp, CompileError> {
    let initial = State {
        vars: model.initial_valuation().into_boxed_slice(),
        config: model.initial_config,
    };

    let mut states: Vec<State> = vec![initial.clone()];
    let mut index: HashMap<State, usize> = HashMap::new();
    index.insert(initial, 0);
    // Parent pointers for deadlock witness paths.
    let mut parent: Vec<usize> = vec![usize::MAX];
    let mut choices: Vec<Vec<Choice>> = Vec::new();

    let mut frontier = 0;
    while frontier < states.len() {
        let state = states[frontier].clone();
        let joint = joint_choices(model, &state)?;
        if joint.is_empty() {
            return Err(deadlock_error(model, &states, &parent, frontier));
        }
        let mut state_choices = Vec::with_capacity(joint.len());
        for jc in joint {
            let mut branches = Vec::with_capacity(jc.branches.len());
            for (target, prob) in jc.branches {
                let target_idx = match index.get(&target) {
                    Some(&i) => i,
                    None => {
                        let i = states.len();
                        if i >= options.state_cap {
                            return Err(CompileError::StateCap { cap: options.state_cap });
                        }
                        states.push(target.clone());
                        index.insert(target, i);
                        parent.push(frontier);
                        i
                    }
                };
                branches.push((target_idx, prob));
            }
            normalize_branches(&mut branches);
            debug_assert!(branches.iter().map(|(_, p)| p.clone()).sum::<BigRational>().is_one());
            state_choices.push(Choice {
                action: jc.action,
                branches,
                rewards: Vec::new(), // filled below
            });
        }
        choices.push(state_choices);
        frontier += 1;
    }

    let mut mdp = CompiledMdp {
        states,
        initial: 0,
        choices,
        state_rewards: Vec::new(),
        reward_names: model.rewards.iter().map(|r| r.name.clone()).collect(),
        labels: Default::default(),
        actions: model.actions.clone(),
        var_names: model.vars.iter().map(|v| v.name.clone()).collect(),
        feature_model: model.feature_model.clone(),
    };
    attach_rewards(model, &mut mdp)?;
    attach_labels(model, &mut mdp)?;
    Ok(mdp)
}

fn deadlock_error(
    model: &TypedModel,
    states: &[State],
    parent: &[usize],
    mut idx: usize,
) -> CompileError {
    let display = |i: usize| display_state(model, &states[i]);
    let state = display(idx);
    let mut path = vec![display(idx)];
    while parent[idx] != usize::MAX {
        idx = parent[idx];
        path.push(display(idx));
    }
    path.reverse();
    CompileError::Deadlock { state, path }
}

pub(crate) fn display_state(model: &TypedModel, state: &State) -> String {
    let vars: Vec<String> = model
        .vars
        .iter()
        .zip(state.vars.iter())
        .map(|(v, value)| format!("{}={}", v.name, value))
        .collect();
    format!("{}|{}", vars.join(","), model.feature_model.display_config(state.config))
}

/// Advances a mixed-radix counter with the last digit fastest; returns
/// false when the counter wraps (enumeration complete).
fn advance_counter(idx: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for pos in (0..idx.len()).rev() {
        idx[pos] += 1;
        if idx[pos] < radix(pos) {
            return true;
        }
        idx[pos] = 0;
    }
    false
}

/// All joint choices enabled in `state`, in deterministic order: action
/// labels in first-appearance order (for each, the Cartesian product of the
/// enabled commands of each synchronizing module in declaration order, then
/// the controller), followed by unlabeled module commands interleaved, then
/// unlabeled controller commands.
pub fn joint_choices(model: &TypedModel, state: &State) -> Result<Vec<JointChoice>, CompileError> {
    let ctx = EvalCtx::new(&state.vars, state.config);
    let eval_guard = |guard: &RExpr| -> Result<bool, CompileError> {
        evaluate_expr(guard, &ctx)
            .map(|v| v.as_bool().expect("typechecked guard"))
            .map_err(|source| CompileError::Eval { state: display_state(model, state), source })
    };

    let mut out = Vec::new();

    for action in 0..model.actions.len() {
        // Synchronizing components: every module declaring the action, plus
        // the controller when it declares it.
        let mut module_sets: Vec<Vec<&TypedCommand>> = Vec::new();
        let mut blocked = false;
        for module in &model.modules {
            let declares: Vec<&TypedCommand> = module
                .commands
                .iter()
                .filter(|c| c.action == Some(action))
                .collect();
            if declares.is_empty() {
                continue; // module does not synchronize on this action
            }
            let enabled: Vec<&TypedCommand> = {
                let mut v = Vec::new();
                for c in declares {
                    if eval_guard(&c.guard)? {
                        v.push(c);
                    }
                }
                v
            };
            if enabled.is_empty() {
                blocked = true;
                break;
            }
            module_sets.push(enabled);
        }
        if blocked {
            continue;
        }
        let ctrl_cmds: Vec<(usize, &crate::lang::typecheck::TypedCtrlCommand)> = match &model
            .controller
        {
            Some(ctrl) => {
                let declares: Vec<(usize, _)> = ctrl
                    .commands
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.action == Some(action))
                    .collect();
                if declares.is_empty() {
                    Vec::new()
                } else {
                    let mut enabled = Vec::new();
                    for (i, c) in declares {
                        if eval_guard(&c.guard)? {
                            enabled.push((i, c));
                        }
                    }
                    if enabled.is_empty() {
                        continue; // controller blocks this action here
                    }
                    enabled
                }
            }
            None => Vec::new(),
        };
        if module_sets.is_empty() && ctrl_cmds.is_empty() {
            continue;
        }

        // Cartesian product over module command tuples.
        let mut tuple_indices = vec![0usize; module_sets.len()];
        loop {
            let tuple: Vec<&TypedCommand> = tuple_indices
                .iter()
                .enumerate()
                .map(|(m, &i)| module_sets[m][i])
                .collect();
            if ctrl_cmds.is_empty() {
                out.push(expand_joint(model, state, Some(action), &tuple, None)?);
            } else {
                for (ctrl_idx, ctrl_cmd) in &ctrl_cmds {
                    out.push(expand_joint(
                        model,
                        state,
                        Some(action),
                        &tuple,
                        Some((*ctrl_idx, ctrl_cmd)),
                    )?);
                }
            }
            if !advance_counter(&mut tuple_indices, |m| module_sets[m].len()) {
                break;
            }
        }
    }

    // Unlabeled commands interleave.
    for module in &model.modules {
        for cmd in module.commands.iter().filter(|c| c.action.is_none()) {
            if eval_guard(&cmd.guard)? {
                out.push(expand_joint(model, state, None, &[cmd], None)?);
            }
        }
    }
    if let Some(ctrl) = &model.controller {
        for (i, cmd) in ctrl.commands.iter().enumerate().filter(|(_, c)| c.action.is_none()) {
            if eval_guard(&cmd.guard)? {
                out.push(expand_joint(model, state, None, &[], Some((i, cmd)))?);
            }
        }
    }

    Ok(out)
}

/// Expands one tuple of synchronized commands (plus optional controller
/// command) into a joint choice from `state`.
fn expand_joint(
    model: &TypedModel,
    state: &State,
    action: Option<usize>,
    commands: &[&TypedCommand],
    ctrl: Option<(usize, &crate::lang::typecheck::TypedCtrlCommand)>,
) -> Result<JointChoice, CompileError> {
    let ctx = EvalCtx::new(&state.vars, state.config);
    let state_name = || display_state(model, state);

    // Controller switch applies to the source configuration once; it is the
    // same for every branch ("cannot be done probabilistically").
    let new_config = match ctrl {
        None => state.config,
        Some((_, cmd)) => model
            .feature_model
            .apply_switch(state.config, cmd.activate, cmd.deactivate)
            .map_err(|source| CompileError::InvalidSwitch {
                pos: cmd.pos,
                state: state_name(),
                source,
            })?,
    };

    let mut branches: Vec<(State, BigRational)> = Vec::new();
    // Mixed-radix enumeration over the branch choice of each command.
    let mut idx = vec![0usize; commands.len()];
    loop {
        let mut prob = BigRational::one();
        let mut vars = state.vars.clone();
        for (c, cmd) in commands.iter().enumerate() {
            let branch = &cmd.branches[idx[c]];
            prob *= &branch.prob;
        }
        if !prob.is_zero() {
            for (c, cmd) in commands.iter().enumerate() {
                let branch = &cmd.branches[idx[c]];
                for (var, value_expr) in &branch.assigns {
                    let value = evaluate_expr(value_expr, &ctx)
                        .map_err(|source| CompileError::Eval { state: state_name(), source })?
                        .as_int()
                        .expect("typechecked int assignment");
                    let info = &model.vars[*var];
                    if value < info.lo || value > info.hi {
                        return Err(CompileError::RangeViolation {
                            pos: value_expr.pos,
                            var: info.name.clone(),
                            value,
                            lo: info.lo,
                            hi: info.hi,
                            state: state_name(),
                        });
                    }
                    vars[*var] = value;
                }
            }
            let target = State { vars, config: new_config };
            match branches.iter_mut().find(|(s, _)| *s == target) {
                Some((_, p)) => *p += prob,
                None => branches.push((target, prob)),
            }
        }
        if !advance_counter(&mut idx, |c| commands[c].branches.len()) {
            break;
        }
    }

    Ok(JointChoice { action, ctrl_command: ctrl.map(|(i, _)| i), branches })
}

fn attach_rewards(model: &TypedModel, mdp: &mut CompiledMdp) -> Result<(), CompileError> {
    let n = mdp.states.len();
    for structure in &model.rewards {
        let mut per_state = vec![BigRational::zero(); n];
        for (s, state) in mdp.states.iter().enumerate() {
            let ctx = EvalCtx::new(&state.vars, state.config);
            for item in &structure.items {
                if item.kind != RewardKind::State {
                    continue;
                }
                let applies = evaluate_expr(&item.guard, &ctx)
                    .map_err(|source| CompileError::Eval {
                        state: mdp.display_state(s),
                        source,
                    })?
                    .as_bool()
                    .expect("typechecked guard");
                if !applies {
                    continue;
                }
                let value = evaluate_expr(&item.value, &ctx)
                    .map_err(|source| CompileError::Eval {
                        state: mdp.display_state(s),
                        source,
                    })?
                    .as_rational()
                    .expect("typechecked numeric");
                if value.is_negative() {
                    return Err(CompileError::NegativeReward {
                        pos: item.pos,
                        structure: structure.name.clone(),
                        value: rat::format_rational(&value),
                        state: mdp.display_state(s),
                    });
                }
                per_state[s] += value;
            }
        }
        mdp.state_rewards.push(per_state);
    }

    // Transition rewards: items match choices by action label, guard
    // evaluated in the source state.
    for s in 0..n {
        let state = mdp.states[s].clone();
        let ctx = EvalCtx::new(&state.vars, state.config);
        let num_choices = mdp.choices[s].len();
        for c in 0..num_choices {
            let mut rewards = Vec::with_capacity(model.rewards.len());
            for structure in &model.rewards {
                let mut total = BigRational::zero();
                for item in &structure.items {
                    let RewardKind::Transition(item_action) = item.kind else {
                        continue;
                    };
                    if item_action != mdp.choices[s][c].action {
                        continue;
                    }
                    let applies = evaluate_expr(&item.guard, &ctx)
                        .map_err(|source| CompileError::Eval {
                            state: mdp.display_state(s),
                            source,
                        })?
                        .as_bool()
                        .expect("typechecked guard");
                    if !applies {
                        continue;
                    }
                    let value = evaluate_expr(&item.value, &ctx)
                        .map_err(|source| CompileError::Eval {
                            state: mdp.display_state(s),
                            source,
                        })?
                        .as_rational()
                        .expect("typechecked numeric");
                    if value.is_negative() {
                        return Err(CompileError::NegativeReward {
                            pos: item.pos,
                            structure: structure.name.clone(),
                            value: rat::format_rational(&value),
                            state: mdp.display_state(s),
                        });
                    }
                    total += value;
                }
                rewards.push(total);
            }
            mdp.choices[s][c].rewards = rewards;
        }
    }
    Ok(())
}

fn attach_labels(model: &TypedModel, mdp: &mut CompiledMdp) -> Result<(), CompileError> {
    for (name, expr) in &model.labels {
        let set = mdp.states_satisfying(expr).map_err(|source| CompileError::Eval {
            state: "<label evaluation>".into(),
            source,
        })?;
        mdp.labels.insert(name.clone(), set);
    }
    Ok(())
}
