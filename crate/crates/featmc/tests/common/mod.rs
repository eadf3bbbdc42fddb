//! Shared test support: an exact rational oracle for small MDPs (policy
//! enumeration plus linear-system solving) and a seeded random-model
//! generator.
//!
//! The oracle is deliberately independent of the checker: it never runs
//! value iteration and never touches floating point.

#![allow(dead_code)] // each integration test binary uses a subset

use featmc::lang::ast::Mode;
use featmc::mdp::{CompiledMdp, MdpBuilder};
use num::{BigRational, One, Zero};

/// Exact value of one state under one objective: a rational or infinity.
#[derive(Debug, Clone, PartialEq)]
pub enum Exact {
    Finite(BigRational),
    Infinite,
}

impl Exact {
    pub fn to_f64(&self) -> f64 {
        match self {
            Exact::Finite(r) => featmc::rat::to_f64(r),
            Exact::Infinite => f64::INFINITY,
        }
    }
}

/// Solves `A x = b` over the rationals by Gaussian elimination.
/// Panics if `A` is singular (cannot happen for the substochastic systems
/// built below).
fn solve_linear(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Vec<BigRational> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .expect("singular system in exact oracle");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let scale = a[col][col].clone();
        for v in a[col].iter_mut() {
            *v /= &scale;
        }
        b[col] /= &scale;
        for row in 0..n {
            if row == col || a[row][col].is_zero() {
                continue;
            }
            let factor = a[row][col].clone();
            for c in 0..n {
                let x = &a[col][c] * &factor;
                a[row][c] -= x;
            }
            let x = &b[col] * &factor;
            b[row] -= x;
        }
    }
    b
}

/// The Markov chain a deterministic memoryless policy induces:
/// `policy[s]` is the chosen choice index.
struct Chain<'a> {
    mdp: &'a CompiledMdp,
    policy: &'a [usize],
}

impl Chain<'_> {
    fn successors(&self, s: usize) -> &[(usize, BigRational)] {
        &self.mdp.choices[s][self.policy[s]].branches
    }

    /// States that can reach the target in the chain's graph.
    fn can_reach(&self, target: &[bool]) -> Vec<bool> {
        let n = self.mdp.num_states();
        let mut reach = target.to_vec();
        loop {
            let mut changed = false;
            for s in 0..n {
                if !reach[s] && self.successors(s).iter().any(|(t, _)| reach[*t]) {
                    reach[s] = true;
                    changed = true;
                }
            }
            if !changed {
                return reach;
            }
        }
    }

    /// Exact reachability probabilities in the chain.
    fn reach(&self, target: &[bool]) -> Vec<BigRational> {
        let n = self.mdp.num_states();
        let can = self.can_reach(target);
        // Unknown states: can reach the target but are not in it.
        let unknown: Vec<usize> = (0..n).filter(|&s| can[s] && !target[s]).collect();
        let index_of: std::collections::HashMap<usize, usize> =
            unknown.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let m = unknown.len();
        let mut a = vec![vec![BigRational::zero(); m]; m];
        let mut b = vec![BigRational::zero(); m];
        for (i, &s) in unknown.iter().enumerate() {
            a[i][i] += BigRational::one();
            for (t, p) in self.successors(s) {
                if target[*t] {
                    b[i] += p;
                } else if let Some(&j) = index_of.get(t) {
                    a[i][j] -= p;
                }
                // successors that cannot reach the target contribute 0
            }
        }
        let x = solve_linear(a, b);
        (0..n)
            .map(|s| {
                if target[s] {
                    BigRational::one()
                } else if let Some(&i) = index_of.get(&s) {
                    x[i].clone()
                } else {
                    BigRational::zero()
                }
            })
            .collect()
    }

    /// Exact expected total reward until the target; `Infinite` where the
    /// chain misses the target with positive probability.
    fn expected_reward(&self, structure: usize, target: &[bool]) -> Vec<Exact> {
        let n = self.mdp.num_states();
        let reach = self.reach(target);
        let almost_sure: Vec<bool> =
            (0..n).map(|s| reach[s].is_one()).collect();
        let unknown: Vec<usize> = (0..n).filter(|&s| almost_sure[s] && !target[s]).collect();
        let index_of: std::collections::HashMap<usize, usize> =
            unknown.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let m = unknown.len();
        let mut a = vec![vec![BigRational::zero(); m]; m];
        let mut b = vec![BigRational::zero(); m];
        for (i, &s) in unknown.iter().enumerate() {
            a[i][i] += BigRational::one();
            b[i] += &self.mdp.state_rewards[structure][s];
            b[i] += &self.mdp.choices[s][self.policy[s]].rewards[structure];
            for (t, p) in self.successors(s) {
                if let Some(&j) = index_of.get(t) {
                    a[i][j] -= p;
                }
                // target successors contribute 0 reward-to-go; a successor
                // outside the almost-sure set cannot occur here
            }
        }
        let x = solve_linear(a, b);
        (0..n)
            .map(|s| {
                if target[s] {
                    Exact::Finite(BigRational::zero())
                } else if let Some(&i) = index_of.get(&s) {
                    Exact::Finite(x[i].clone())
                } else {
                    Exact::Infinite
                }
            })
            .collect()
    }
}

fn for_each_policy(mdp: &CompiledMdp, mut f: impl FnMut(&[usize])) {
    let n = mdp.num_states();
    let mut policy = vec![0usize; n];
    loop {
        f(&policy);
        let mut pos = n;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            policy[pos] += 1;
            if policy[pos] < mdp.choices[pos].len() {
                break;
            }
            policy[pos] = 0;
        }
    }
}

fn pointwise_opt_rational(acc: &mut Option<Vec<BigRational>>, values: Vec<BigRational>, mode: Mode) {
    match acc {
        None => *acc = Some(values),
        Some(best) => {
            for (b, v) in best.iter_mut().zip(values) {
                let take = match mode {
                    Mode::Min => v < *b,
                    Mode::Max => v > *b,
                };
                if take {
                    *b = v;
                }
            }
        }
    }
}

/// Exact optimal reachability probabilities by enumerating every
/// memoryless deterministic policy and solving each induced chain.
pub fn exact_reach(mdp: &CompiledMdp, target: &[bool], mode: Mode) -> Vec<BigRational> {
    let mut best: Option<Vec<BigRational>> = None;
    for_each_policy(mdp, |policy| {
        let chain = Chain { mdp, policy };
        pointwise_opt_rational(&mut best, chain.reach(target), mode);
    });
    best.expect("at least one policy")
}

/// Exact optimal expected rewards by policy enumeration; `Infinite`
/// matches the checker's convention (max: some policy misses the target;
/// min: every policy does).
pub fn exact_expected_reward(
    mdp: &CompiledMdp,
    structure: usize,
    target: &[bool],
    mode: Mode,
) -> Vec<Exact> {
    let mut best: Option<Vec<Exact>> = None;
    for_each_policy(mdp, |policy| {
        let chain = Chain { mdp, policy };
        let values = chain.expected_reward(structure, target);
        match &mut best {
            None => best = Some(values),
            Some(acc) => {
                for (b, v) in acc.iter_mut().zip(values) {
                    let take = match (&*b, &v, mode) {
                        (Exact::Infinite, _, Mode::Min) => true,
                        (_, Exact::Infinite, Mode::Min) => false,
                        (Exact::Infinite, _, Mode::Max) => false,
                        (_, Exact::Infinite, Mode::Max) => true,
                        (Exact::Finite(a), Exact::Finite(c), Mode::Min) => c < a,
                        (Exact::Finite(a), Exact::Finite(c), Mode::Max) => c > a,
                    };
                    if take {
                        *b = v;
                    }
                }
            }
        }
    });
    best.expect("at least one policy")
}

/// One hand-built oracle model: the MDP, its target set, and the reward
/// structure index to check (when rewards are attached).
pub struct OracleModel {
    pub name: &'static str,
    pub mdp: CompiledMdp,
    pub target: Vec<bool>,
    pub reward: Option<usize>,
}

/// Ten hand-built MDPs with at most 6 states: chains, loops, branching
/// diamonds, reward ladders, and traps where some policies miss the target.
pub fn oracle_models() -> Vec<OracleModel> {
    let mut out = Vec::new();

    // 1. Dirac chain.
    let mut b = MdpBuilder::new(3);
    b.dirac(0, "step", 1);
    b.dirac(1, "step", 2);
    b.dirac(2, "step", 2);
    let t = b.reward_structure("time");
    b.transition_reward_all(t, 1, 1);
    out.push(OracleModel {
        name: "dirac_chain",
        mdp: b.build().unwrap(),
        target: vec![false, false, true],
        reward: Some(t),
    });

    // 2. Geometric escape.
    let mut b = MdpBuilder::new(2);
    b.choice(0, "step", &[(0, 1, 2), (1, 1, 2)]);
    b.dirac(1, "step", 1);
    let t = b.reward_structure("time");
    b.transition_reward_all(t, 1, 1);
    out.push(OracleModel {
        name: "geometric_half",
        mdp: b.build().unwrap(),
        target: vec![false, true],
        reward: Some(t),
    });

    // 3. Loop-or-go choice (min avoids, max commits).
    let mut b = MdpBuilder::new(2);
    b.dirac(0, "go", 1);
    b.dirac(0, "stay", 0);
    b.dirac(1, "done", 1);
    out.push(OracleModel {
        name: "loop_or_go",
        mdp: b.build().unwrap(),
        target: vec![false, true],
        reward: None,
    });

    // 4. Two-route diamond with different success probabilities.
    let mut b = MdpBuilder::new(4);
    b.choice(0, "risky", &[(2, 7, 10), (3, 3, 10)]);
    b.choice(0, "safe", &[(1, 1, 1)]);
    b.choice(1, "step", &[(2, 1, 2), (0, 1, 2)]);
    b.dirac(2, "step", 2);
    b.dirac(3, "step", 3);
    let t = b.reward_structure("cost");
    b.transition_reward_all(t, 1, 1);
    b.state_reward(t, 1, 2, 1);
    out.push(OracleModel {
        name: "diamond",
        mdp: b.build().unwrap(),
        target: vec![false, false, true, false],
        reward: Some(t),
    });

    // 5. Trap: one policy falls into an absorbing non-target sink.
    let mut b = MdpBuilder::new(4);
    b.choice(0, "split", &[(1, 1, 3), (2, 2, 3)]);
    b.dirac(0, "sink", 3);
    b.dirac(1, "step", 2);
    b.dirac(2, "step", 2);
    b.dirac(3, "step", 3);
    let t = b.reward_structure("cost");
    b.transition_reward_all(t, 3, 2);
    out.push(OracleModel {
        name: "trap",
        mdp: b.build().unwrap(),
        target: vec![false, false, true, false],
        reward: Some(t),
    });

    // 6. Six-state ladder with slips.
    let mut b = MdpBuilder::new(6);
    for s in 0..5 {
        b.choice(s, "climb", &[(s + 1, 3, 4), (0, 1, 4)]);
    }
    b.choice(1, "shortcut", &[(3, 1, 2), (0, 1, 2)]);
    b.dirac(5, "top", 5);
    let t = b.reward_structure("energy");
    b.transition_reward_all(t, 1, 1);
    out.push(OracleModel {
        name: "ladder",
        mdp: b.build().unwrap(),
        target: vec![false, false, false, false, false, true],
        reward: Some(t),
    });

    // 7. Competing geometric loops.
    let mut b = MdpBuilder::new(3);
    b.choice(0, "fast", &[(0, 1, 10), (1, 4, 10), (2, 5, 10)]);
    b.choice(0, "slow", &[(0, 8, 10), (1, 1, 10), (2, 1, 10)]);
    b.dirac(1, "step", 1);
    b.dirac(2, "step", 2);
    out.push(OracleModel {
        name: "competing_loops",
        mdp: b.build().unwrap(),
        target: vec![false, true, false],
        reward: None,
    });

    // 8. Target at the initial state.
    let mut b = MdpBuilder::new(2);
    b.choice(0, "step", &[(0, 1, 2), (1, 1, 2)]);
    b.dirac(1, "step", 0);
    let t = b.reward_structure("time");
    b.transition_reward_all(t, 1, 1);
    out.push(OracleModel {
        name: "initial_target",
        mdp: b.build().unwrap(),
        target: vec![true, false],
        reward: Some(t),
    });

    // 9. Five states, three choices in one state, uneven rationals.
    let mut b = MdpBuilder::new(5);
    b.choice(0, "a", &[(1, 1, 6), (2, 2, 6), (3, 3, 6)]);
    b.choice(0, "b", &[(1, 1, 2), (4, 1, 2)]);
    b.choice(0, "c", &[(0, 9, 10), (4, 1, 10)]);
    b.choice(1, "step", &[(4, 1, 3), (0, 2, 3)]);
    b.dirac(2, "step", 4);
    b.dirac(3, "step", 3);
    b.dirac(4, "step", 4);
    out.push(OracleModel {
        name: "three_way",
        mdp: b.build().unwrap(),
        target: vec![false, false, false, false, true],
        reward: None,
    });

    // 10. Reward maze where min and max take different detours.
    let mut b = MdpBuilder::new(5);
    b.choice(0, "left", &[(1, 1, 1)]);
    b.choice(0, "right", &[(2, 1, 1)]);
    b.choice(1, "step", &[(3, 1, 2), (1, 1, 2)]);
    b.choice(2, "step", &[(3, 9, 10), (2, 1, 10)]);
    b.dirac(3, "step", 4);
    b.dirac(4, "goal", 4);
    let t = b.reward_structure("cost");
    b.state_reward(t, 1, 1, 1);
    b.state_reward(t, 2, 5, 1);
    b.transition_reward_all(t, 1, 2);
    out.push(OracleModel {
        name: "reward_maze",
        mdp: b.build().unwrap(),
        target: vec![false, false, false, false, true],
        reward: Some(t),
    });

    out
}

/// Deterministic pseudo-random small MDPs for property checks. Not
/// cryptographic; a plain linear congruential stream keyed by `seed`.
pub struct SmallRng(u64);

impl SmallRng {
    pub fn new(seed: u64) -> Self {
        SmallRng(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// A random deadlock-free MDP with `n <= 8` states whose distributions are
/// exact rationals summing to 1 via integer weights.
pub fn random_mdp(seed: u64) -> (CompiledMdp, Vec<bool>) {
    let mut rng = SmallRng::new(seed);
    let n = 2 + rng.below(7) as usize;
    let mut b = MdpBuilder::new(n);
    for s in 0..n {
        let num_choices = 1 + rng.below(3) as usize;
        for c in 0..num_choices {
            let num_branches = 1 + rng.below(3) as usize;
            let weights: Vec<i64> = (0..num_branches).map(|_| 1 + rng.below(4) as i64).collect();
            let total: i64 = weights.iter().sum();
            let branches: Vec<(usize, i64, i64)> = weights
                .iter()
                .map(|w| (rng.below(n as u64) as usize, *w, total))
                .collect();
            b.choice(s, &format!("a{c}"), &branches);
        }
    }
    // Wire unreachable states into state 0's first choice by rebuilding if
    // needed: simplest is to chain every state from 0 with a low-weight
    // extra choice, keeping reachability.
    for s in 1..n {
        b.dirac(0, &format!("wire{s}"), s);
    }
    let mdp = b.build().expect("random model is well-formed");
    let target: Vec<bool> = (0..n).map(|_| rng.below(3) == 0).collect();
    (mdp, target)
}
