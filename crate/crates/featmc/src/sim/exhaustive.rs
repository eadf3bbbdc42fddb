//! Exact bounded reachability by recursive path expansion in rational
//! arithmetic, the oracle for the checker's bounded operator.

use super::SimError;
use crate::lang::ast::Mode;
use crate::mdp::CompiledMdp;
use num::{BigRational, One, Zero};
use std::collections::HashMap;

const DEFAULT_NODE_BUDGET: usize = 10_000_000;

/// Exact optimal probability of reaching `target` within `k` steps,
/// computed for each requested state. No floating point anywhere.
pub fn exhaustive_bounded(
    mdp: &CompiledMdp,
    target: &[bool],
    k: u64,
    mode: Mode,
    states: &[usize],
) -> Result<Vec<BigRational>, SimError> {
    exhaustive_bounded_with_budget(mdp, target, k, mode, states, DEFAULT_NODE_BUDGET)
}

pub fn exhaustive_bounded_with_budget(
    mdp: &CompiledMdp,
    target: &[bool],
    k: u64,
    mode: Mode,
    states: &[usize],
    budget: usize,
) -> Result<Vec<BigRational>, SimError> {
    let mut memo: HashMap<(usize, u64), BigRational> = HashMap::new();
    states
        .iter()
        .map(|&s| expand(mdp, target, mode, s, k, &mut memo, budget))
        .collect()
}

// Recursive expansion of all length-<=depth paths, memoized on
// (state, remaining depth).
fn expand(
    mdp: &CompiledMdp,
    target: &[bool],
    mode: Mode,
    state: usize,
    depth: u64,
    memo: &mut HashMap<(usize, u64), BigRational>,
    budget: usize,
) -> Result<BigRational, SimError> {
    if target[state] {
        return Ok(BigRational::one());
    }
    if depth == 0 {
        return Ok(BigRational::zero());
    }
    if let Some(v) = memo.get(&(state, depth)) {
        return Ok(v.clone());
    }
    let mut best: Option<BigRational> = None;
    for choice in &mdp.choices[state] {
        let mut sum = BigRational::zero();
        for (t, p) in &choice.branches {
            sum += p * expand(mdp, target, mode, *t, depth - 1, memo, budget)?;
        }
        best = Some(match best {
            None => sum,
            Some(b) => match mode {
                Mode::Min => b.min(sum),
                Mode::Max => b.max(sum),
            },
        });
    }
    let value = best.expect("every state has at least one choice");
    if memo.len() >= budget {
        return Err(SimError::NodeBudget { budget });
    }
    memo.insert((state, depth), value.clone());
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::bounded_reach_probability;
    use crate::mdp::MdpBuilder;
    use crate::rat::to_f64;

    fn leaky_loop() -> CompiledMdp {
        let mut b = MdpBuilder::new(2);
        b.choice(0, "step", &[(0, 1, 2), (1, 1, 2)]);
        b.dirac(1, "step", 1);
        b.build().unwrap()
    }

    #[test]
    fn three_steps_of_the_half_loop_give_seven_eighths() {
        let mdp = leaky_loop();
        for mode in [Mode::Min, Mode::Max] {
            let v = exhaustive_bounded(&mdp, &[false, true], 3, mode, &[0]).unwrap();
            assert_eq!(v[0], BigRational::new(7.into(), 8.into()));
        }
    }

    #[test]
    fn zero_steps_in_a_target_state_is_one() {
        let mdp = leaky_loop();
        let v = exhaustive_bounded(&mdp, &[false, true], 0, Mode::Min, &[1, 0]).unwrap();
        assert_eq!(v[0], BigRational::one());
        assert_eq!(v[1], BigRational::zero());
    }

    #[test]
    fn node_budget_is_enforced() {
        let mdp = leaky_loop();
        let err =
            exhaustive_bounded_with_budget(&mdp, &[false, true], 64, Mode::Min, &[0], 3)
                .unwrap_err();
        assert!(matches!(err, SimError::NodeBudget { budget: 3 }));
    }

    #[test]
    fn matches_the_float_checker_to_twelve_digits() {
        // A nondeterministic model where min and max genuinely differ.
        let mut b = MdpBuilder::new(4);
        b.choice(0, "a", &[(1, 2, 5), (2, 3, 5)]);
        b.choice(0, "b", &[(0, 1, 2), (3, 1, 2)]);
        b.choice(1, "a", &[(3, 1, 3), (0, 2, 3)]);
        b.dirac(2, "a", 2);
        b.dirac(3, "a", 3);
        let mdp = b.build().unwrap();
        let target = [false, false, false, true];
        for mode in [Mode::Min, Mode::Max] {
            for k in [0u64, 1, 2, 5, 9] {
                let exact =
                    exhaustive_bounded(&mdp, &target, k, mode, &[0, 1, 2, 3]).unwrap();
                let float = bounded_reach_probability(&mdp, &target, k, mode);
                for s in 0..4 {
                    assert!(
                        (to_f64(&exact[s]) - float[s]).abs() <= 1e-12,
                        "k={k} s={s} {mode:?}: {} vs {}",
                        exact[s],
                        float[s]
                    );
                }
            }
        }
    }
}
