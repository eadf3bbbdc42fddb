//! Property tests: checker bounds and dualities on random small MDPs, and
//! printer/parser round trips on random expressions.

mod common;

use common::random_mdp;
use featmc::check::{
    bounded_reach_probability, invariant_probability, qualitative_reach, reach_probability,
    CheckOptions,
};
use featmc::lang::ast::Mode;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_is_below_max_pointwise(seed in 0u64..10_000) {
        let (mdp, target) = random_mdp(seed);
        let options = CheckOptions::default();
        let min = reach_probability(&mdp, &target, Mode::Min, &options).unwrap();
        let max = reach_probability(&mdp, &target, Mode::Max, &options).unwrap();
        for s in 0..mdp.num_states() {
            prop_assert!(min[s] <= max[s] + 1e-9, "state {s}: {} > {}", min[s], max[s]);
            for v in [min[s], max[s]] {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "probability {v} out of range");
            }
        }
        for k in [0, 1, 5] {
            let bmin = bounded_reach_probability(&mdp, &target, k, Mode::Min);
            let bmax = bounded_reach_probability(&mdp, &target, k, Mode::Max);
            for s in 0..mdp.num_states() {
                prop_assert!(bmin[s] <= bmax[s] + 1e-12);
            }
        }
    }

    #[test]
    fn globally_and_eventually_are_dual(seed in 0u64..10_000) {
        let (mdp, target) = random_mdp(seed);
        let safe: Vec<bool> = target.iter().map(|t| !t).collect();
        let options = CheckOptions::default();
        let g_min = invariant_probability(&mdp, &safe, Mode::Min, &options).unwrap();
        let f_max = reach_probability(&mdp, &target, Mode::Max, &options).unwrap();
        for s in 0..mdp.num_states() {
            prop_assert!(
                (g_min[s] + f_max[s] - 1.0).abs() <= 1e-10,
                "state {s}: {} + {} != 1",
                g_min[s],
                f_max[s]
            );
        }
    }

    #[test]
    fn bounded_reachability_is_monotone_in_k(seed in 0u64..10_000) {
        let (mdp, target) = random_mdp(seed);
        for mode in [Mode::Min, Mode::Max] {
            let mut previous = bounded_reach_probability(&mdp, &target, 0, mode);
            for k in 1..8 {
                let current = bounded_reach_probability(&mdp, &target, k, mode);
                for s in 0..mdp.num_states() {
                    prop_assert!(current[s] + 1e-12 >= previous[s]);
                }
                previous = current;
            }
        }
    }

    #[test]
    fn qualitative_one_set_is_numerically_one(seed in 0u64..10_000) {
        let (mdp, target) = random_mdp(seed);
        let options = CheckOptions::default();
        for mode in [Mode::Min, Mode::Max] {
            let (zero, one) = qualitative_reach(&mdp, &target, mode);
            let values = reach_probability(&mdp, &target, mode, &options).unwrap();
            for s in 0..mdp.num_states() {
                if one[s] {
                    prop_assert!(values[s] >= 1.0 - 10.0 * options.epsilon);
                }
                if zero[s] {
                    prop_assert!(values[s] == 0.0);
                }
            }
        }
    }

    #[test]
    fn random_models_satisfy_structural_invariants(seed in 0u64..10_000) {
        let (mdp, _) = random_mdp(seed);
        // exact rational sums, no deadlocks, reachability
        prop_assert!(mdp.check_invariants().is_ok());
    }
}

// ---- printer/parser round trips ----

mod roundtrip {
    use featmc::lang::ast::{BinaryOp, Builtin, Expr, ExprKind, Pos, UnaryOp};
    use featmc::lang::parser::parse_expression;
    use proptest::prelude::*;

    fn p() -> Pos {
        Pos::new(1, 1)
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0i64..10_000).prop_map(|n| Expr::new(ExprKind::IntLit(n), p())),
            (0i64..1000i64, 1usize..4usize).prop_map(|(n, digits)| {
                let text = format!("{}.{:0width$}", n / 100, n % 100, width = digits.max(2));
                let value = featmc::rat::rational_from_decimal(&text).unwrap();
                Expr::new(ExprKind::DoubleLit(value, text), p())
            }),
            any::<bool>().prop_map(|b| Expr::new(ExprKind::BoolLit(b), p())),
            prop::sample::select(vec!["x", "y", "water_visib", "s", "foo_2"])
                .prop_map(|n| Expr::new(ExprKind::Ident(n.to_string()), p())),
            prop::sample::select(vec!["low", "med", "high"])
                .prop_map(|n| Expr::new(ExprKind::Active(n.to_string()), p())),
        ];
        leaf.prop_recursive(4, 48, 3, |inner| {
            let binop = prop::sample::select(vec![
                BinaryOp::Add,
                BinaryOp::Sub,
                BinaryOp::Mul,
                BinaryOp::Div,
                BinaryOp::Eq,
                BinaryOp::Ne,
                BinaryOp::Lt,
                BinaryOp::Le,
                BinaryOp::Gt,
                BinaryOp::Ge,
                BinaryOp::And,
                BinaryOp::Or,
                BinaryOp::Implies,
            ]);
            let unop = prop::sample::select(vec![UnaryOp::Neg, UnaryOp::Not]);
            let call1 =
                prop::sample::select(vec![Builtin::Round, Builtin::Floor, Builtin::Ceil]);
            let call2 = prop::sample::select(vec![Builtin::Min, Builtin::Max]);
            prop_oneof![
                (binop, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::new(
                    ExprKind::Binary(op, Box::new(a), Box::new(b)),
                    p()
                )),
                (unop, inner.clone()).prop_map(|(op, a)| Expr::new(
                    ExprKind::Unary(op, Box::new(a)),
                    p()
                )),
                (inner.clone(), inner.clone(), inner.clone()).prop_map(|(c, t, e)| Expr::new(
                    ExprKind::Ite(Box::new(c), Box::new(t), Box::new(e)),
                    p()
                )),
                (call1, inner.clone()).prop_map(|(b, a)| Expr::new(
                    ExprKind::Call(b, vec![a]),
                    p()
                )),
                (call2, inner.clone(), inner).prop_map(|(b, x, y)| Expr::new(
                    ExprKind::Call(b, vec![x, y]),
                    p()
                )),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        /// parse . pretty-print . parse is a fixpoint: printing a parsed
        /// expression and reparsing it prints identically.
        #[test]
        fn expression_round_trip_is_stable(expr in arb_expr()) {
            let printed = expr.to_string();
            let reparsed = parse_expression(&printed).unwrap();
            prop_assert_eq!(printed, reparsed.to_string());
        }
    }
}
