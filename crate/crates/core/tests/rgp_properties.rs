mod common;

use msmo_core::lp::Sense;
use msmo_core::model::MSMOModel;
use msmo_core::rgp::{solve_reference, verify_pareto, ReferencePoint};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Goals around the witness's own values: some attainable, some not.
fn random_reference(rng: &mut ChaCha8Rng, model: &MSMOModel, witness: &msmo_core::model::MetaDecision) -> ReferencePoint {
    let z = model.evaluate(witness).unwrap();
    ReferencePoint::from_fn(model, 1e-4, |id| (z.at(id) + rng.gen_range(-3.0..3.0), rng.gen_range(0.5..3.0)))
}

#[test]
fn scalarized_solutions_are_pareto_optimal() {
    let mut rng = common::rng(0x96_0001);
    for case in 0..80 {
        let stages = rng.gen_range(2..=3);
        let (model, witness) = common::random_model(&mut rng, stages);
        let rp = random_reference(&mut rng, &model, &witness);
        let res = solve_reference(&model, &rp).unwrap();
        let verdict = verify_pareto(&model, &res.decision).unwrap();
        assert!(verdict.is_pareto_optimal(), "case {case}: {verdict:?}");
    }
}

#[test]
fn relaxing_a_goal_never_raises_psi() {
    let mut rng = common::rng(0x96_0002);
    for case in 0..60 {
        let (model, witness) = common::random_model(&mut rng, 3);
        let rp = random_reference(&mut rng, &model, &witness);
        let base = solve_reference(&model, &rp).unwrap().psi;
        let ids = model.meta_objectives();
        let id = ids[rng.gen_range(0..ids.len())];
        let step = rng.gen_range(0.1..2.0);
        let mut relaxed = rp.clone();
        *relaxed.goals.get_mut(&id).unwrap() += match model.senses()[id.objective] {
            Sense::Minimize => step,
            Sense::Maximize => -step,
        };
        let psi = solve_reference(&model, &relaxed).unwrap().psi;
        assert!(psi <= base + 1e-9 * (1.0 + base.abs()), "case {case}: {psi} > {base}");
    }
}

#[test]
fn uniform_weight_scaling_keeps_the_selection() {
    let mut rng = common::rng(0x96_0003);
    for case in 0..60 {
        let (model, witness) = common::random_model(&mut rng, 3);
        let rp = random_reference(&mut rng, &model, &witness);
        let base = solve_reference(&model, &rp).unwrap();
        for scale in [0.5, 3.0, 10.0] {
            let mut scaled = rp.clone();
            scaled.weights.values_mut().for_each(|w| *w *= scale);
            let res = solve_reference(&model, &scaled).unwrap();
            assert!((res.psi - scale * base.psi).abs() <= 1e-6 * (1.0 + base.psi.abs() * scale), "case {case}");
            for (a, b) in res.objective_matrix.values.iter().zip(&base.objective_matrix.values) {
                assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "case {case} x{scale}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn deviations_are_normalized_shortfalls() {
    let mut rng = common::rng(0x96_0004);
    for _ in 0..60 {
        let (model, witness) = common::random_model(&mut rng, 3);
        let maximize =
            msmo_core::model::assemble(model.tree().clone(), model.blocks().clone(), model.m(), vec![Sense::Maximize; model.m()])
                .unwrap();
        let rp = random_reference(&mut rng, &maximize, &witness);
        let res = solve_reference(&maximize, &rp).unwrap();
        for (id, &delta) in &res.deviations {
            let z = res.objective_matrix.at(*id);
            let g = rp.goals[id];
            assert!((delta - (g - z)).abs() <= 1e-7 * (1.0 + g.abs()));
            if z < g - 1e-7 {
                assert!(delta >= -1e-9);
            }
            if delta <= 0.0 {
                assert!(z >= g - 1e-9 * (1.0 + g.abs()));
            }
        }
    }
}
