mod common;

use std::collections::BTreeMap;

use msmo_core::horizon::{check_mh_feasibility_tol, residual_model, run_moving_horizon, ResidualOutcome};
use msmo_core::lp::{check_point, Status};
use msmo_core::model::MetaDecision;
use msmo_core::rgp::ReferencePoint;
use rand::Rng;

const TOL: f64 = 1e-7;

fn feasible(model: &msmo_core::model::MSMOModel, d: &MetaDecision) -> bool {
    check_point(&model.constraint_system(), &d.to_flat(), TOL).unwrap().is_clean()
}

#[test]
fn feasible_meta_decisions_have_feasible_prefixes() {
    let mut rng = common::rng(0x7e0_0001);
    let mut checked = 0;
    for _ in 0..120 {
        let (model, witness) = common::random_model(&mut rng, 3);
        let prefix_model = model.prefix_model(2).unwrap();
        let keep = prefix_model.tree().nodes().len();
        let mut candidates = vec![witness];
        candidates.extend(common::random_vertex(&mut rng, &model));
        candidates.extend(common::random_vertex(&mut rng, &model));
        for d in candidates {
            assert!(feasible(&model, &d));
            let report = check_point(&prefix_model.constraint_system(), &d.truncated(keep).to_flat(), TOL).unwrap();
            assert!(report.is_clean(), "{report:?}");
            checked += 1;
        }
    }
    assert!(checked >= 300);
}

#[test]
fn moving_horizon_feasibility_equals_full_feasibility() {
    let mut rng = common::rng(0x7e0_0002);
    let (mut yes, mut no) = (0, 0);
    for _ in 0..120 {
        let (model, witness) = common::random_model(&mut rng, 3);
        let mut candidates = vec![witness.clone()];
        candidates.extend(common::random_vertex(&mut rng, &model));
        for _ in 0..4 {
            let noise = MetaDecision {
                values: witness.values.iter().map(|v| v.iter().map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            };
            candidates.push(witness.combine(1.0, &noise, rng.gen_range(0.0..1.5)));
        }
        for d in candidates {
            let full = feasible(&model, &d);
            let mh = check_mh_feasibility_tol(&model, &d, TOL).unwrap();
            assert_eq!(full, mh, "{d:?}");
            if full { yes += 1 } else { no += 1 }
        }
    }
    assert!(yes >= 100 && no >= 100, "{yes} feasible, {no} infeasible");
}

#[test]
fn composites_are_moving_horizon_feasible() {
    let mut rng = common::rng(0x7e0_0003);
    let mut composites = 0;
    for _ in 0..60 {
        let (model, _) = common::random_model(&mut rng, 3);
        let goals = |m: &msmo_core::model::MSMOModel, rng: &mut rand_chacha::ChaCha8Rng| {
            ReferencePoint::from_fn(m, 1e-4, |_| (rng.gen_range(-5.0..5.0), rng.gen_range(0.5..2.0)))
        };
        let first = goals(&model.prefix_model(2).unwrap(), &mut rng);
        let x0 = vec![0.0; model.widths()[0]];
        let tree = model.tree();
        let mut refs = BTreeMap::new();
        for n in tree.stage_nodes(1) {
            let k1 = tree.node(n).prefix[0].clone();
            let residual = residual_model(&model, &x0, &k1).unwrap();
            refs.insert(k1, goals(&residual, &mut rng));
        }
        let run = run_moving_horizon(&model, &first, &refs).unwrap();
        let infeasible = run.residuals.iter().any(|(_, o)| matches!(o, ResidualOutcome::Failed(Status::Infeasible)));
        if let Some(c) = &run.composite {
            assert!(check_mh_feasibility_tol(&model, c, TOL).unwrap());
            composites += 1;
        } else {
            assert!(infeasible);
        }
    }
    assert!(composites >= 10, "only {composites} composites");
}
