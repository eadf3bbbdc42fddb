//! Qualitative reachability: the states whose optimal reachability
//! probability is exactly 0 or exactly 1, computed by graph fixpoints with
//! no numerics.

use crate::lang::ast::Mode;
use crate::mdp::CompiledMdp;

/// Backward edges: for each target state, the (source, global choice id)
/// pairs with a positive-probability branch into it. Choice ids are global
/// across the MDP, assigned in (state, choice) order.
pub(crate) struct Predecessors {
    pub preds: Vec<Vec<(usize, usize)>>,
    /// (state, first global choice id) per state.
    pub choice_base: Vec<usize>,
    pub num_choices: usize,
    /// choice id -> owning state
    pub choice_owner: Vec<usize>,
}

impl Predecessors {
    pub fn of(mdp: &CompiledMdp) -> Self {
        let n = mdp.num_states();
        let mut preds = vec![Vec::new(); n];
        let mut choice_base = Vec::with_capacity(n + 1);
        let mut choice_owner = Vec::new();
        let mut next_choice = 0usize;
        for (s, choices) in mdp.choices.iter().enumerate() {
            choice_base.push(next_choice);
            for choice in choices {
                for (t, _) in &choice.branches {
                    preds[*t].push((s, next_choice));
                }
                choice_owner.push(s);
                next_choice += 1;
            }
        }
        choice_base.push(next_choice);
        Predecessors { preds, choice_base, num_choices: next_choice, choice_owner }
    }
}

/// States with optimal reachability probability exactly 0 and exactly 1,
/// for the given optimization mode.
pub fn qualitative_reach(
    mdp: &CompiledMdp,
    target: &[bool],
    mode: Mode,
) -> (Vec<bool>, Vec<bool>) {
    let preds = Predecessors::of(mdp);
    match mode {
        Mode::Max => {
            let zero = prob0_max(mdp, target, &preds);
            let one = prob1_max(mdp, target, &preds);
            (zero, one)
        }
        Mode::Min => {
            let zero = prob0_min(mdp, target, &preds);
            let one = prob1_min(mdp, target, &preds);
            (zero, one)
        }
    }
}

/// Pmax = 0: the complement of the states that can reach the target via
/// some sequence of positive-probability branches.
fn prob0_max(mdp: &CompiledMdp, target: &[bool], preds: &Predecessors) -> Vec<bool> {
    let n = mdp.num_states();
    let mut reach = vec![false; n];
    let mut queue: Vec<usize> = (0..n).filter(|&s| target[s]).collect();
    for &s in &queue {
        reach[s] = true;
    }
    while let Some(t) = queue.pop() {
        for &(s, _) in &preds.preds[t] {
            if !reach[s] {
                reach[s] = true;
                queue.push(s);
            }
        }
    }
    reach.iter().map(|r| !r).collect()
}

/// Pmin = 0: complement of the least fixpoint of
/// `target ∪ { s : every choice has some branch into the set }`,
/// i.e. the states from which some policy avoids the target forever.
fn prob0_min(mdp: &CompiledMdp, target: &[bool], preds: &Predecessors) -> Vec<bool> {
    let n = mdp.num_states();
    let mut in_set = vec![false; n];
    let mut choice_hit = vec![false; preds.num_choices];
    // Number of choices of s that do not yet have a branch into the set.
    let mut missing: Vec<usize> = (0..n).map(|s| mdp.choices[s].len()).collect();
    let mut queue: Vec<usize> = (0..n).filter(|&s| target[s]).collect();
    for &s in &queue {
        in_set[s] = true;
    }
    while let Some(t) = queue.pop() {
        for &(s, choice) in &preds.preds[t] {
            if choice_hit[choice] {
                continue;
            }
            choice_hit[choice] = true;
            missing[s] -= 1;
            if missing[s] == 0 && !in_set[s] && !target[s] {
                in_set[s] = true;
                queue.push(s);
            }
        }
    }
    in_set.iter().map(|r| !r).collect()
}

/// Pmax = 1: greatest fixpoint of the standard two-level construction:
/// restrict to a candidate set `u`, grow `v` backward from the target
/// through choices that stay entirely inside `u`, then shrink `u` to `v`.
fn prob1_max(mdp: &CompiledMdp, target: &[bool], preds: &Predecessors) -> Vec<bool> {
    let n = mdp.num_states();
    let mut u = vec![true; n];
    loop {
        // v := lfp target ∪ { s : ∃ choice, all branches in u, some branch in v }
        let mut choice_in_u = vec![true; preds.num_choices];
        for s in 0..n {
            for (c_off, choice) in mdp.choices[s].iter().enumerate() {
                let cid = preds.choice_base[s] + c_off;
                if choice.branches.iter().any(|(t, _)| !u[*t]) {
                    choice_in_u[cid] = false;
                }
            }
        }
        let mut v = vec![false; n];
        let mut queue: Vec<usize> = (0..n).filter(|&s| target[s]).collect();
        for &s in &queue {
            v[s] = true;
        }
        while let Some(t) = queue.pop() {
            for &(s, choice) in &preds.preds[t] {
                if !v[s] && choice_in_u[choice] {
                    v[s] = true;
                    queue.push(s);
                }
            }
        }
        if v == u {
            return u;
        }
        u = v;
    }
}

/// Pmin = 1: the complement of the states from which some policy keeps a
/// positive probability of avoiding the target forever. Such a policy must
/// reach, inside the non-target region, a closed sub-MDP of that region.
fn prob1_min(mdp: &CompiledMdp, target: &[bool], preds: &Predecessors) -> Vec<bool> {
    let n = mdp.num_states();
    // Greatest fixpoint: non-target states with some choice whose branches
    // all stay in the set. Iterative removal with per-choice liveness.
    let mut in_y = vec![false; n];
    for s in 0..n {
        in_y[s] = !target[s];
    }
    // bad_branches[c] = number of branches of c leaving Y
    let mut bad_branches = vec![0usize; preds.num_choices];
    let mut alive_choices: Vec<usize> = vec![0; n];
    for s in 0..n {
        for (c_off, choice) in mdp.choices[s].iter().enumerate() {
            let cid = preds.choice_base[s] + c_off;
            bad_branches[cid] = choice.branches.iter().filter(|(t, _)| !in_y[*t]).count();
            if bad_branches[cid] == 0 {
                alive_choices[s] += 1;
            }
        }
    }
    let mut removal: Vec<usize> =
        (0..n).filter(|&s| in_y[s] && alive_choices[s] == 0).collect();
    for &s in &removal {
        in_y[s] = false;
    }
    while let Some(t) = removal.pop() {
        for &(s, choice) in &preds.preds[t] {
            // A branch of `choice` now leaves Y; the first such event kills
            // the choice.
            bad_branches[choice] += 1;
            if bad_branches[choice] == 1 {
                let owner = preds.choice_owner[choice];
                debug_assert_eq!(owner, s);
                if in_y[owner] {
                    alive_choices[owner] -= 1;
                    if alive_choices[owner] == 0 {
                        in_y[owner] = false;
                        removal.push(owner);
                    }
                }
            }
        }
    }
    // Z := states of ¬target that can reach Y through ¬target states.
    let mut in_z = in_y.clone();
    let mut queue: Vec<usize> = (0..n).filter(|&s| in_z[s]).collect();
    while let Some(t) = queue.pop() {
        for &(s, _) in &preds.preds[t] {
            if !in_z[s] && !target[s] {
                in_z[s] = true;
                queue.push(s);
            }
        }
    }
    in_z.iter().map(|z| !z).collect()
}
