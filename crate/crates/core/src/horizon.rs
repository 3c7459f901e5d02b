//! Two-stage moving horizon over a three-stage model.
//!
//! The first two-stage model is the three-stage model truncated after stage 1.
//! Only its stage-0 decision `x0*` is implemented. For every stage-1 state
//! `k1` a residual two-stage model is then built over the subtree below `k1`:
//! stage-0 coefficients are moved to the right-hand side as `β = b − A⁰x0*`
//! and stage-0 objective contributions are dropped as sunk.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lattice::StateId;
use crate::lp::{check_point, Status};
use crate::model::{BlockRow, MSMOModel, MetaDecision, ModelError, NodeBlock, StageBlocks};
use crate::rgp::{solve_reference, ReferencePoint, RgpError, ScalarizationResult};

/// Feasibility tolerance used by [`check_mh_feasibility`].
pub const MH_FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HorizonError {
    #[error("unknown stage-1 state {0:?}")]
    UnknownState(StateId),
    #[error("the moving horizon needs a three-stage model, got {0} stages")]
    Unsupported(usize),
    #[error("stage-0 decision has {actual} values, expected {expected}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("the first two-stage model is infeasible")]
    FirstStageInfeasible,
    #[error("no residual reference point for stage-1 state {0:?}")]
    MissingReference(StateId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rgp(#[from] RgpError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResidualOutcome {
    Solved(ScalarizationResult),
    /// The residual model could not be solved (typically infeasible).
    Failed(Status),
}

impl ResidualOutcome {
    pub fn solved(&self) -> Option<&ScalarizationResult> {
        match self {
            ResidualOutcome::Solved(r) => Some(r),
            ResidualOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRun {
    /// Solution of the first two-stage model; its stage-1 decisions are diagnostic only.
    pub first_stage: ScalarizationResult,
    pub fixed_x0: Vec<f64>,
    /// One outcome per stage-1 state, in tree order.
    pub residuals: Vec<(StateId, ResidualOutcome)>,
    /// Full decision over the three-stage tree; `None` when a residual failed.
    pub composite: Option<MetaDecision>,
}

fn stage_one_states(model: &MSMOModel) -> Vec<StateId> {
    let tree = model.tree();
    tree.stage_nodes(1).map(|n| tree.node(n).prefix[0].clone()).collect()
}

/// The two-stage model faced after `x0_star` is implemented and `k1` realises.
pub fn residual_model(model: &MSMOModel, x0_star: &[f64], k1: &str) -> Result<MSMOModel, HorizonError> {
    let tree = model.tree();
    if tree.stage_count() < 3 {
        return Err(HorizonError::Unsupported(tree.stage_count()));
    }
    if !stage_one_states(model).iter().any(|s| s == k1) {
        return Err(HorizonError::UnknownState(k1.to_string()));
    }
    let w0 = model.widths()[0];
    if x0_star.len() != w0 {
        return Err(HorizonError::WidthMismatch { expected: w0, actual: x0_star.len() });
    }
    let sub = tree.subtree(k1).map_err(ModelError::from)?;

    let mut blocks = StageBlocks::new(model.widths()[1..].to_vec());
    for (prefix, block) in &model.blocks().nodes {
        if prefix.first().map(String::as_str) != Some(k1) {
            continue;
        }
        let rows = block
            .rows
            .iter()
            .map(|row| {
                let sunk: f64 = row.segments[0].iter().zip(x0_star).map(|(a, x)| a * x).sum();
                BlockRow { segments: row.segments[1..].to_vec(), relation: row.relation, rhs: row.rhs - sunk }
            })
            .collect();
        let objectives = block.objectives.iter().map(|segs| segs[1..].to_vec()).collect();
        blocks.nodes.insert(prefix[1..].to_vec(), NodeBlock { objectives, rows });
    }
    Ok(MSMOModel::assemble(sub, blocks, model.m(), model.senses().to_vec())?
        .with_scoring(model.scoring())
        .with_nonnegative(model.is_nonnegative())
        .with_var_labels(model.var_labels()[1..].to_vec())
        .with_objective_names(model.objective_names().to_vec()))
}

/// The part of `d` living in the subtree below `k1`, in the residual model's node order.
pub fn residual_decision(model: &MSMOModel, d: &MetaDecision, k1: &str) -> Result<MetaDecision, HorizonError> {
    let tree = model.tree();
    let sub = tree.subtree(k1).map_err(ModelError::from)?;
    let values = sub
        .nodes()
        .iter()
        .map(|n| {
            let mut prefix = vec![k1.to_string()];
            prefix.extend(n.prefix.iter().cloned());
            let idx = tree.node_index(&prefix).expect("subtree node exists in the full tree");
            d.values[idx].clone()
        })
        .collect();
    Ok(MetaDecision { values })
}

pub fn run_moving_horizon(
    model: &MSMOModel,
    first_ref: &ReferencePoint,
    residual_refs: &BTreeMap<StateId, ReferencePoint>,
) -> Result<HorizonRun, HorizonError> {
    let stages = model.tree().stage_count();
    if stages != 3 {
        return Err(HorizonError::Unsupported(stages));
    }
    let states = stage_one_states(model);
    if let Some(k1) = states.iter().find(|k| !residual_refs.contains_key(*k)) {
        return Err(HorizonError::MissingReference(k1.clone()));
    }

    let first_model = model.prefix_model(2)?;
    let first_stage = match solve_reference(&first_model, first_ref) {
        Ok(r) => r,
        Err(RgpError::NotOptimal(Status::Infeasible)) => return Err(HorizonError::FirstStageInfeasible),
        Err(e) => return Err(e.into()),
    };
    let fixed_x0 = first_stage.decision.values[0].clone();

    let residuals: Vec<Result<ResidualOutcome, HorizonError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = states
            .iter()
            .map(|k1| {
                let x0 = &fixed_x0;
                scope.spawn(move || -> Result<ResidualOutcome, HorizonError> {
                    let residual = residual_model(model, x0, k1)?;
                    match solve_reference(&residual, &residual_refs[k1]) {
                        Ok(r) => Ok(ResidualOutcome::Solved(r)),
                        Err(RgpError::NotOptimal(status)) => Ok(ResidualOutcome::Failed(status)),
                        Err(e) => Err(e.into()),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("residual solve panicked")).collect()
    });
    let residuals: Vec<(StateId, ResidualOutcome)> =
        states.iter().cloned().zip(residuals.into_iter().collect::<Result<Vec<_>, _>>()?).collect();

    let composite = compose(model, &fixed_x0, &residuals);
    Ok(HorizonRun { first_stage, fixed_x0, residuals, composite })
}

fn compose(model: &MSMOModel, x0: &[f64], residuals: &[(StateId, ResidualOutcome)]) -> Option<MetaDecision> {
    let tree = model.tree();
    let mut d = MetaDecision::zeros(model);
    d.values[0] = x0.to_vec();
    for (k1, outcome) in residuals {
        let r = outcome.solved()?;
        let sub = tree.subtree(k1).ok()?;
        for (sub_idx, n) in sub.nodes().iter().enumerate() {
            let mut prefix = vec![k1.clone()];
            prefix.extend(n.prefix.iter().cloned());
            let idx = tree.node_index(&prefix)?;
            d.values[idx] = r.decision.values[sub_idx].clone();
        }
    }
    Some(d)
}

/// Moving-horizon feasibility: the stage-0/1 prefix is feasible for the
/// first two-stage model and, for every `k1`, the subtree decisions are
/// feasible for the residual model built from `d`'s own stage-0 decision.
pub fn check_mh_feasibility(model: &MSMOModel, d: &MetaDecision) -> Result<bool, HorizonError> {
    check_mh_feasibility_tol(model, d, MH_FEASIBILITY_TOL)
}

pub fn check_mh_feasibility_tol(model: &MSMOModel, d: &MetaDecision, tol: f64) -> Result<bool, HorizonError> {
    let tree = model.tree();
    if tree.stage_count() != 3 {
        return Err(HorizonError::Unsupported(tree.stage_count()));
    }
    if d.values.len() != tree.nodes().len() {
        return Err(ModelError::Coverage(format!("{} node decisions for {} nodes", d.values.len(), tree.nodes().len())).into());
    }
    let first = model.prefix_model(2)?;
    let prefix = d.truncated(first.tree().nodes().len());
    if !check_point(&first.constraint_system(), &prefix.to_flat(), tol).map_err(RgpError::from)?.is_clean() {
        return Ok(false);
    }
    for k1 in stage_one_states(model) {
        let residual = residual_model(model, &d.values[0], &k1)?;
        let local = residual_decision(model, d, &k1)?;
        if !check_point(&residual.constraint_system(), &local.to_flat(), tol).map_err(RgpError::from)?.is_clean() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_tree, MetaObjectiveId, Transitions};
    use crate::lp::{self, Relation, Sense};
    use crate::model::assemble;

    fn row(segments: Vec<Vec<f64>>, rhs: f64) -> BlockRow {
        BlockRow { segments, relation: Relation::Le, rhs }
    }

    /// x0 <= 1; x0 - x1 <= 1; x0 + x1 + x2 <= 1/2 with objective weight `c0` on x0 (maximised).
    fn sunk_cost_toy(c0: f64) -> MSMOModel {
        let mut tr = BTreeMap::new();
        tr.insert("a".to_string(), vec!["a".to_string()]);
        let a = "a".to_string();
        let tree = build_tree(3, vec![vec![a.clone()], vec![a.clone()]], Transitions::Stationary(tr), None).unwrap();
        let mut blocks = StageBlocks::new(vec![1, 1, 1]);
        blocks.nodes.insert(vec![], NodeBlock { objectives: vec![vec![vec![c0]]], rows: vec![row(vec![vec![1.0]], 1.0)] });
        blocks.nodes.insert(vec![a.clone()], NodeBlock {
            objectives: vec![vec![vec![0.0], vec![0.0]]],
            rows: vec![row(vec![vec![1.0], vec![-1.0]], 1.0)],
        });
        blocks.nodes.insert(vec![a.clone(), a], NodeBlock {
            objectives: vec![vec![vec![0.0], vec![0.0], vec![0.0]]],
            rows: vec![row(vec![vec![1.0], vec![1.0], vec![1.0]], 0.5)],
        });
        assemble(tree, blocks, 1, vec![Sense::Maximize]).unwrap()
    }

    fn point(x: [f64; 3]) -> MetaDecision {
        MetaDecision { values: x.iter().map(|&v| vec![v]).collect() }
    }

    #[test]
    fn sunk_unit_decision_leaves_an_infeasible_residual() {
        let model = sunk_cost_toy(1.0);
        let residual = residual_model(&model, &[1.0], "a").unwrap();
        let lp = residual.constraint_system();
        assert_eq!(lp.rows[0].rhs, 0.0);
        assert_eq!(lp.rows[0].coeffs, vec![-1.0, 0.0]);
        assert_eq!(lp.rows[1].rhs, -0.5);
        assert_eq!(lp.rows[1].coeffs, vec![1.0, 1.0]);
        assert_eq!(lp::solve(&lp).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn eighth_leaves_a_feasible_residual() {
        let model = sunk_cost_toy(1.0);
        let lp = residual_model(&model, &[0.125], "a").unwrap().constraint_system();
        assert_eq!(lp.rows[0].rhs, 0.875);
        assert_eq!(lp.rows[1].rhs, 0.375);
        assert_eq!(lp::solve(&lp).unwrap().status, Status::Optimal);
    }

    #[test]
    fn zero_fix_keeps_the_original_rhs() {
        let model = sunk_cost_toy(1.0);
        let lp = residual_model(&model, &[0.0], "a").unwrap().constraint_system();
        assert_eq!(lp.rows.iter().map(|r| r.rhs).collect::<Vec<_>>(), vec![1.0, 0.5]);
    }

    #[test]
    fn residual_errors() {
        let model = sunk_cost_toy(1.0);
        assert_eq!(residual_model(&model, &[0.0], "b"), Err(HorizonError::UnknownState("b".into())));
        assert!(matches!(residual_model(&model, &[0.0, 1.0], "a"), Err(HorizonError::WidthMismatch { .. })));
    }

    #[test]
    fn feasibility_verdicts() {
        let model = sunk_cost_toy(1.0);
        assert!(check_mh_feasibility_tol(&model, &point([0.125; 3]), 0.0).unwrap());
        assert!(!check_mh_feasibility_tol(&model, &point([1.0, 0.0, 0.0]), 0.0).unwrap());
        assert!(!check_mh_feasibility(&model, &point([1.0, 3.0, 0.0])).unwrap());
    }

    fn single_goal(model: &MSMOModel, g: f64) -> ReferencePoint {
        ReferencePoint::from_fn(model, 1e-4, |_| (g, 1.0))
    }

    #[test]
    fn greedy_first_stage_strands_the_residual() {
        let model = sunk_cost_toy(1.0);
        let first = model.prefix_model(2).unwrap();
        let mut refs = BTreeMap::new();
        let residual = residual_model(&model, &[0.0], "a").unwrap();
        refs.insert("a".to_string(), single_goal(&residual, 0.0));
        let run = run_moving_horizon(&model, &single_goal(&first, 10.0), &refs).unwrap();
        assert_eq!(run.fixed_x0, vec![1.0]);
        assert_eq!(run.residuals.len(), 1);
        assert_eq!(run.residuals[0].1, ResidualOutcome::Failed(Status::Infeasible));
        assert!(run.composite.is_none());
    }

    #[test]
    fn composite_matches_two_stage_when_third_stage_is_idle() {
        let model = sunk_cost_toy(-1.0);
        let first = model.prefix_model(2).unwrap();
        let residual = residual_model(&model, &[0.0], "a").unwrap();
        let mut refs = BTreeMap::new();
        refs.insert("a".to_string(), single_goal(&residual, 0.0));
        let run = run_moving_horizon(&model, &single_goal(&first, 0.0), &refs).unwrap();
        let composite = run.composite.expect("all residuals solve");
        assert_eq!(composite.values[0], run.fixed_x0);
        assert!(check_mh_feasibility(&model, &composite).unwrap());
        let id = MetaObjectiveId { objective: 0, path: 0 };
        assert!(run.first_stage.deviations[&id].abs() < 1e-9);
    }
}
