//! Value iteration for reachability probabilities and expected total
//! rewards.
//!
//! Probabilities enter floating point here and nowhere else. The default
//! schedule is Jacobi (two-vector), so results are reproducible and
//! independent of the parallel split; per-state updates read only the
//! previous vector and every per-state sum runs in a fixed order.

use super::qualitative::qualitative_reach;
use super::{CheckError, CheckOptions};
use crate::lang::ast::Mode;
use crate::mdp::CompiledMdp;
use crate::rat::to_f64;
use rayon::prelude::*;

/// Flat CSR view of an MDP with f64 probabilities, built once per query.
pub(crate) struct DenseView {
    /// Choice range of state s: choice_start[s]..choice_start[s+1]
    choice_start: Vec<u32>,
    /// Branch range of choice c: branch_start[c]..branch_start[c+1]
    branch_start: Vec<u32>,
    targets: Vec<u32>,
    probs: Vec<f64>,
}

impl DenseView {
    pub fn new(mdp: &CompiledMdp) -> Self {
        let n = mdp.num_states();
        let mut choice_start = Vec::with_capacity(n + 1);
        let mut branch_start = Vec::new();
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        for choices in &mdp.choices {
            choice_start.push(branch_start.len() as u32);
            for choice in choices {
                branch_start.push(targets.len() as u32);
                for (t, p) in &choice.branches {
                    targets.push(*t as u32);
                    probs.push(to_f64(p));
                }
            }
        }
        choice_start.push(branch_start.len() as u32);
        branch_start.push(targets.len() as u32);
        DenseView { choice_start, branch_start, targets, probs }
    }

    pub fn num_states(&self) -> usize {
        self.choice_start.len() - 1
    }

    /// opt over the state's choices of `choice_offset(c) + Σ p·x(t)`.
    #[inline]
    fn bellman<F: Fn(usize) -> f64>(&self, s: usize, x: &[f64], mode: Mode, choice_offset: F) -> f64 {
        let lo = self.choice_start[s] as usize;
        let hi = self.choice_start[s + 1] as usize;
        let mut best = match mode {
            Mode::Min => f64::INFINITY,
            Mode::Max => f64::NEG_INFINITY,
        };
        for c in lo..hi {
            let blo = self.branch_start[c] as usize;
            let bhi = self.branch_start[c + 1] as usize;
            let mut sum = choice_offset(c);
            for b in blo..bhi {
                sum += self.probs[b] * x[self.targets[b] as usize];
            }
            best = match mode {
                Mode::Min => best.min(sum),
                Mode::Max => best.max(sum),
            };
        }
        best
    }
}

fn change(old: f64, new: f64, relative: bool) -> f64 {
    let diff = (new - old).abs();
    if !relative || new == 0.0 {
        diff
    } else {
        diff / new.abs()
    }
}

/// Generic Jacobi iteration until the largest per-state change over the
/// `iterate` set drops below epsilon.
fn iterate_to_fixpoint(
    view: &DenseView,
    x: &mut Vec<f64>,
    iterate: &[bool],
    mode: Mode,
    options: &CheckOptions,
    choice_offset: impl Fn(usize) -> f64 + Sync,
    state_offset: impl Fn(usize) -> f64 + Sync,
) -> Result<usize, CheckError> {
    let relative = !options.absolute;
    let mut next = x.clone();
    for iteration in 0..options.max_iters {
        let delta = next
            .par_iter_mut()
            .enumerate()
            .map(|(s, out)| {
                if !iterate[s] {
                    return 0.0;
                }
                let value = state_offset(s) + view.bellman(s, x, mode, &choice_offset);
                let d = change(x[s], value, relative);
                *out = value;
                d
            })
            .reduce(|| 0.0, f64::max);
        std::mem::swap(x, &mut next);
        if delta < options.epsilon {
            return Ok(iteration + 1);
        }
    }
    let residual = x
        .iter()
        .zip(next.iter())
        .enumerate()
        .filter(|(s, _)| iterate[*s])
        .map(|(_, (a, b))| change(*b, *a, relative))
        .fold(0.0, f64::max);
    Err(CheckError::NonConvergence { iterations: options.max_iters, residual })
}

/// Optimal probability of eventually reaching `target`, per state.
///
/// States in the qualitative zero/one sets are pinned exactly; the rest is
/// value iteration seeded at 0.
pub fn reach_probability(
    mdp: &CompiledMdp,
    target: &[bool],
    mode: Mode,
    options: &CheckOptions,
) -> Result<Vec<f64>, CheckError> {
    let (zero, one) = qualitative_reach(mdp, target, mode);
    let view = DenseView::new(mdp);
    let n = view.num_states();
    let mut x = vec![0.0; n];
    let mut iterate = vec![false; n];
    for s in 0..n {
        if one[s] {
            x[s] = 1.0;
        } else if !zero[s] {
            iterate[s] = true;
        }
    }
    if iterate.iter().any(|i| *i) {
        iterate_to_fixpoint(&view, &mut x, &iterate, mode, options, |_| 0.0, |_| 0.0)?;
    }
    Ok(x)
}

/// Evolves the bounded-reachability vector one step bound at a time;
/// `x` after `advance` being called k times equals the k-step vector.
/// Sweeps over k reuse one stepper, saving the quadratic restart cost
/// while producing bit-identical values.
pub(crate) struct BoundedStepper {
    view: DenseView,
    target: Vec<bool>,
    mode: Mode,
    x: Vec<f64>,
    next: Vec<f64>,
}

impl BoundedStepper {
    pub fn new(mdp: &CompiledMdp, target: Vec<bool>, mode: Mode) -> Self {
        let view = DenseView::new(mdp);
        let x: Vec<f64> = target.iter().map(|t| if *t { 1.0 } else { 0.0 }).collect();
        let next = x.clone();
        BoundedStepper { view, target, mode, x, next }
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn advance(&mut self) {
        let (view, target, mode, x) = (&self.view, &self.target, self.mode, &self.x);
        self.next.par_iter_mut().enumerate().for_each(|(s, out)| {
            *out = if target[s] { 1.0 } else { view.bellman(s, x, mode, |_| 0.0) };
        });
        std::mem::swap(&mut self.x, &mut self.next);
    }
}

/// Optimal probability of reaching `target` within `k` steps, per state.
/// Exact up to floating rounding; no convergence threshold is involved.
pub fn bounded_reach_probability(
    mdp: &CompiledMdp,
    target: &[bool],
    k: u64,
    mode: Mode,
) -> Vec<f64> {
    let mut stepper = BoundedStepper::new(mdp, target.to_vec(), mode);
    for _ in 0..k {
        stepper.advance();
    }
    stepper.x
}

/// Optimal probability that every visited state stays in `safe`, via the
/// dual bounded objective: `opt G safe = 1 - dual(opt) F (not safe)`.
pub fn invariant_probability(
    mdp: &CompiledMdp,
    safe: &[bool],
    mode: Mode,
    options: &CheckOptions,
) -> Result<Vec<f64>, CheckError> {
    let unsafe_set: Vec<bool> = safe.iter().map(|s| !s).collect();
    let dual = match mode {
        Mode::Min => Mode::Max,
        Mode::Max => Mode::Min,
    };
    let reach = reach_probability(mdp, &unsafe_set, dual, options)?;
    Ok(reach.into_iter().map(|p| 1.0 - p).collect())
}

/// Optimal expected total reward accumulated strictly before entering
/// `target`: state rewards of visited states plus transition rewards of
/// taken choices. States that miss the target under the dual-mode
/// quantification get +inf, pinned by graph analysis without iteration.
pub fn expected_reward(
    mdp: &CompiledMdp,
    structure: usize,
    target: &[bool],
    mode: Mode,
    options: &CheckOptions,
) -> Result<Vec<f64>, CheckError> {
    // Infinite states: for max rewards, any policy may miss the target
    // (Pmin < 1); for min rewards, every policy must be able to reach it
    // (Pmax < 1 means even the best misses).
    let dual = match mode {
        Mode::Max => Mode::Min,
        Mode::Min => Mode::Max,
    };
    let (_, one) = qualitative_reach(mdp, target, dual);

    let view = DenseView::new(mdp);
    let n = view.num_states();
    let state_rewards: Vec<f64> = mdp.state_rewards[structure].iter().map(to_f64).collect();
    let mut choice_rewards = Vec::with_capacity(mdp.num_choices());
    for choices in &mdp.choices {
        for choice in choices {
            choice_rewards.push(to_f64(&choice.rewards[structure]));
        }
    }

    let mut x = vec![0.0; n];
    let mut iterate = vec![false; n];
    for s in 0..n {
        if target[s] {
            x[s] = 0.0;
        } else if !one[s] {
            x[s] = f64::INFINITY;
        } else {
            iterate[s] = true;
        }
    }
    if iterate.iter().any(|i| *i) {
        iterate_to_fixpoint(
            &view,
            &mut x,
            &iterate,
            mode,
            options,
            |c| choice_rewards[c],
            |s| state_rewards[s],
        )?;
    }
    Ok(x)
}
