//! Shared generators and reference oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use msmo_core::lattice::{build_tree, ScenarioTree, Transitions};
use msmo_core::lp::{Bounds, LPProblem, Relation, Sense};
use msmo_core::model::{assemble, BlockRow, MSMOModel, MetaDecision, NodeBlock, StageBlocks};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn relation(rng: &mut impl Rng) -> Relation {
    [Relation::Le, Relation::Ge, Relation::Eq][rng.gen_range(0..3)]
}

/// Small LP with integer data and finite bounds on every variable, so the
/// feasible set is a polytope: the status is either Optimal or Infeasible.
pub fn random_bounded_lp(rng: &mut impl Rng) -> LPProblem {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(0..=6);
    let sense = if rng.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let cost = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
    let mut lp = LPProblem::new(sense, cost);
    lp.bounds = (0..n)
        .map(|_| {
            let lo = if rng.gen_bool(0.6) { 0.0 } else { rng.gen_range(-3..=0) as f64 };
            Bounds::new(lo, lo + rng.gen_range(1..=5) as f64)
        })
        .collect();
    for _ in 0..m {
        let coeffs = (0..n).map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(-5..=5) as f64 }).collect();
        lp.add_row(coeffs, relation(rng), rng.gen_range(-10..=10) as f64);
    }
    lp
}

/// Optimum of a bounded LP by enumerating every basic solution: each choice
/// of `n` constraints (rows or bounds) taken as equalities. `None` when no
/// basic solution is feasible, i.e. the polytope is empty.
pub fn vertex_oracle(lp: &LPProblem) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_vars();
    // Every constraint as (a, b, relation) over x.
    let mut cons: Vec<(Vec<f64>, f64, Relation)> = lp.rows.iter().map(|r| (r.coeffs.clone(), r.rhs, r.relation)).collect();
    for (j, b) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if b.lower.is_finite() {
            cons.push((e.clone(), b.lower, Relation::Ge));
        }
        if b.upper.is_finite() {
            cons.push((e, b.upper, Relation::Le));
        }
    }
    let feasible = |x: &[f64]| {
        cons.iter().all(|(a, b, rel)| {
            let lhs: f64 = a.iter().zip(x).map(|(u, v)| u * v).sum();
            let tol = 1e-9 * (1.0 + b.abs());
            match rel {
                Relation::Le => lhs <= b + tol,
                Relation::Ge => lhs >= b - tol,
                Relation::Eq => (lhs - b).abs() <= tol,
            }
        })
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for subset in combinations(cons.len(), n) {
        let a = DMatrix::from_fn(n, n, |r, c| cons[subset[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| cons[subset[r]].1);
        let Some(x) = a.lu().solve(&b) else { continue };
        let x: Vec<f64> = x.iter().copied().collect();
        if x.iter().any(|v| !v.is_finite()) || !feasible(&x) {
            continue;
        }
        let z = lp.objective_at(&x);
        let better = match (&best, lp.sense) {
            (None, _) => true,
            (Some((b, _)), Sense::Minimize) => z < *b,
            (Some((b, _)), Sense::Maximize) => z > *b,
        };
        if better {
            best = Some((z, x));
        }
    }
    best
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Dual of `min cᵀx, rows, x ≥ 0`: `max bᵀy, Aᵀy ≤ c`, with y ≥ 0 for ≥
/// rows, y ≤ 0 for ≤ rows and y free for equalities.
pub fn mechanical_dual(primal: &LPProblem) -> LPProblem {
    assert_eq!(primal.sense, Sense::Minimize);
    assert!(primal.bounds.iter().all(|b| *b == Bounds::NONNEGATIVE));
    let m = primal.rows.len();
    let mut dual = LPProblem::new(Sense::Maximize, primal.rows.iter().map(|r| r.rhs).collect());
    dual.bounds = primal
        .rows
        .iter()
        .map(|r| match r.relation {
            Relation::Ge => Bounds::NONNEGATIVE,
            Relation::Le => Bounds::new(f64::NEG_INFINITY, 0.0),
            Relation::Eq => Bounds::FREE,
        })
        .collect();
    for (j, &c) in primal.cost.iter().enumerate() {
        let coeffs = (0..m).map(|i| primal.rows[i].coeffs[j]).collect();
        dual.add_row(coeffs, Relation::Le, c);
    }
    dual
}

/// A random scenario tree with `stage_count` stages, 1–3 states per
/// realisation stage and random per-stage transitions, optionally anchored.
pub fn random_tree(rng: &mut impl Rng, stage_count: usize) -> ScenarioTree {
    let names = ["a", "b", "c"];
    let states: Vec<Vec<String>> = (1..stage_count)
        .map(|_| {
            let k = rng.gen_range(1..=3);
            let mut s: Vec<String> = names.iter().map(|s| s.to_string()).collect();
            s.shuffle(rng);
            s.truncate(k);
            s
        })
        .collect();
    let root = rng.gen_bool(0.5).then(|| "r".to_string());
    let mut maps = Vec::with_capacity(stage_count - 1);
    for t in 0..stage_count - 1 {
        let sources: Vec<String> = if t == 0 { vec!["r".to_string()] } else { states[t - 1].clone() };
        let targets = &states[t];
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for s in &sources {
            let mut to: Vec<String> = targets.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
            if to.is_empty() {
                to.push(targets[rng.gen_range(0..targets.len())].clone());
            }
            map.insert(s.clone(), to);
        }
        if t > 0 {
            for target in targets {
                if !map.values().any(|v| v.contains(target)) {
                    let s = &sources[rng.gen_range(0..sources.len())];
                    map.get_mut(s).unwrap().push(target.clone());
                }
            }
        }
        maps.push(map);
    }
    build_tree(stage_count, states, Transitions::PerStage(maps), root).expect("generated tree is valid")
}

/// A random block model together with a decision it admits. Every node
/// gets up to two random rows made feasible at a random nonnegative point,
/// plus a cap on its own decision sum, so every objective is bounded.
pub fn random_model(rng: &mut impl Rng, stage_count: usize) -> (MSMOModel, MetaDecision) {
    let tree = random_tree(rng, stage_count);
    let widths: Vec<usize> = (0..stage_count).map(|_| rng.gen_range(1..=3)).collect();
    let m = rng.gen_range(1..=3);
    let senses = (0..m).map(|_| if rng.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize }).collect();

    let values: Vec<Vec<f64>> = tree
        .nodes()
        .iter()
        .map(|n| (0..widths[n.stage]).map(|_| rng.gen_range(0.0..2.0)).collect())
        .collect();
    let witness = MetaDecision { values };

    let mut blocks = StageBlocks::new(widths.clone());
    for (idx, node) in tree.nodes().iter().enumerate() {
        let ancestry = tree.ancestry(idx);
        let random_segments = |rng: &mut dyn rand::RngCore, lo: f64, hi: f64| -> Vec<Vec<f64>> {
            widths[..=node.stage]
                .iter()
                .map(|&w| (0..w).map(|_| if rng.gen_bool(0.3) { 0.0 } else { (rng.gen_range(lo..hi) * 4.0_f64).round() / 4.0 }).collect())
                .collect()
        };
        let activity = |segs: &[Vec<f64>]| -> f64 {
            segs.iter()
                .zip(&ancestry)
                .map(|(seg, &a)| seg.iter().zip(&witness.values[a]).map(|(c, x)| c * x).sum::<f64>())
                .sum()
        };
        let mut rows = Vec::new();
        for _ in 0..rng.gen_range(0..=2) {
            let segments = random_segments(rng, -3.0, 3.0);
            let lhs = activity(&segments);
            let rel = relation(rng);
            let rhs = match rel {
                Relation::Le => lhs + rng.gen_range(0.0..1.0),
                Relation::Ge => lhs - rng.gen_range(0.0..1.0),
                Relation::Eq => lhs,
            };
            rows.push(BlockRow { segments, relation: rel, rhs });
        }
        let mut cap: Vec<Vec<f64>> = widths[..=node.stage].iter().map(|&w| vec![0.0; w]).collect();
        cap[node.stage] = vec![1.0; widths[node.stage]];
        rows.push(BlockRow { segments: cap, relation: Relation::Le, rhs: 10.0 });
        let objectives = (0..m).map(|_| random_segments(rng, -2.0, 2.0)).collect();
        blocks.nodes.insert(node.prefix.clone(), NodeBlock { objectives, rows });
    }
    let model = assemble(tree, blocks, m, senses).expect("generated model is valid");
    (model, witness)
}

/// Vertex of the model's feasible set minimising a random cost.
pub fn random_vertex(rng: &mut impl Rng, model: &MSMOModel) -> Option<MetaDecision> {
    let mut lp = model.constraint_system();
    lp.cost = (0..lp.num_vars()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let res = msmo_core::lp::solve(&lp).ok()?;
    res.is_optimal().then(|| MetaDecision::from_flat(model, &res.point).unwrap())
}
