mod common;

use msmo_core::lp::{self, solve_with, Bounds, LPProblem, Relation, Sense, SolverOptions, Status};
use proptest::prelude::*;

#[test]
fn agrees_with_vertex_enumeration() {
    let mut rng = common::rng(0x5eed_0001);
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..300 {
        let lp = common::random_bounded_lp(&mut rng);
        let res = lp::solve(&lp).unwrap();
        match common::vertex_oracle(&lp) {
            Some((z, _)) => {
                assert_eq!(res.status, Status::Optimal, "case {case}: {lp:?}");
                assert!((res.objective_value - z).abs() <= 1e-6, "case {case}: {} vs {z}", res.objective_value);
                assert!(lp::check_point(&lp, &res.point, 1e-7).unwrap().is_clean(), "case {case}");
                optimal += 1;
            }
            None => {
                assert_eq!(res.status, Status::Infeasible, "case {case}: {lp:?}");
                infeasible += 1;
            }
        }
    }
    // The generator must exercise both outcomes.
    assert!(optimal > 50 && infeasible > 20, "{optimal} optimal, {infeasible} infeasible");
}

#[test]
fn primal_and_dual_optima_coincide() {
    let mut rng = common::rng(0x5eed_0002);
    let mut compared = 0;
    for case in 0..300 {
        let mut lp = common::random_bounded_lp(&mut rng);
        lp.sense = Sense::Minimize;
        lp.bounds = vec![Bounds::NONNEGATIVE; lp.num_vars()];
        let primal = lp::solve(&lp).unwrap();
        let dual = lp::solve(&common::mechanical_dual(&lp)).unwrap();
        match primal.status {
            Status::Optimal => {
                assert_eq!(dual.status, Status::Optimal, "case {case}");
                assert!((primal.objective_value - dual.objective_value).abs() <= 1e-6, "case {case}");
                compared += 1;
            }
            Status::Unbounded => assert_eq!(dual.status, Status::Infeasible, "case {case}"),
            Status::Infeasible => assert_ne!(dual.status, Status::Optimal, "case {case}"),
            Status::IterationLimit => panic!("case {case} hit the iteration limit"),
        }
    }
    assert!(compared > 50, "only {compared} optimal pairs");
}

#[test]
fn iteration_cap_is_reported_distinctly() {
    let mut rng = common::rng(0x5eed_0003);
    let opts = SolverOptions { max_iterations: 1, ..SolverOptions::default() };
    let mut hit = false;
    for _ in 0..50 {
        let lp = common::random_bounded_lp(&mut rng);
        let res = solve_with(&lp, &opts).unwrap();
        hit |= res.status == Status::IterationLimit;
        assert!(res.iterations <= 1 || res.status != Status::IterationLimit);
    }
    assert!(hit);
}

fn lp_strategy() -> impl Strategy<Value = LPProblem> {
    (1usize..=4, 0usize..=4).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-4i32..=4, n),
            prop::collection::vec((prop::collection::vec(-4i32..=4, n), 0u8..3, -8i32..=8), m),
            prop::collection::vec(1i32..=4, n),
        )
            .prop_map(move |(cost, rows, ub)| {
                let mut lp = LPProblem::new(Sense::Maximize, cost.into_iter().map(f64::from).collect());
                lp.bounds = ub.into_iter().map(|u| Bounds::new(0.0, f64::from(u))).collect();
                for (coeffs, rel, rhs) in rows {
                    let rel = [Relation::Le, Relation::Ge, Relation::Eq][rel as usize];
                    lp.add_row(coeffs.into_iter().map(f64::from).collect(), rel, f64::from(rhs));
                }
                lp
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solver_terminates_and_matches_oracle(lp in lp_strategy()) {
        let res = lp::solve(&lp).unwrap();
        prop_assert!(res.status != Status::IterationLimit);
        match common::vertex_oracle(&lp) {
            Some((z, _)) => {
                prop_assert_eq!(res.status, Status::Optimal);
                prop_assert!((res.objective_value - z).abs() <= 1e-6);
            }
            None => prop_assert_eq!(res.status, Status::Infeasible),
        }
    }

    #[test]
    fn export_parse_round_trip(lp in lp_strategy()) {
        let mut lp = lp;
        lp.var_names = (0..lp.num_vars()).map(|j| format!("v{j}")).collect();
        let text = lp::export_lp(&lp, "generated").unwrap();
        let back = lp::parse_lp(&text).unwrap();
        let a = lp::solve(&lp).unwrap();
        let b = lp::solve(&back).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.is_optimal() {
            prop_assert!((a.objective_value - b.objective_value).abs() <= 1e-9);
        }
    }
}
