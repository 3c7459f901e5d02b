//! Sequential portfolio selection over a scenario tree of economic states.
//!
//! Layout of a node decision (money in millions):
//! - non-final stages: `x[i*(n+1)+j]` moves funds out of option `i` into
//!   option `j`, with `j == n` the withdrawal; moving `x` costs `(1+p)·x`
//!   under the node state's penalty table.
//! - final stage: `w_i` at `i` withdraws from option `i`, `h_i` at `n+i`
//!   keeps the remainder.
//!
//! Funds grow between stages by the growth rate of the realised state.
//! Z1 is the terminal remaining fund, spread over the path as stage-wise
//! increments of the pre-rebalancing fund level `H`; Z2 is the cumulative
//! withdrawal. Both are maximised.

pub mod data;
pub mod instance;
pub mod money;
pub mod robustness;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::horizon::{residual_model, run_moving_horizon, HorizonError, HorizonRun};
use crate::lattice::{build_tree, ScenarioTree, StateId, Transitions, TreeError};
use crate::lp::{Relation, Sense};
use crate::model::{BlockRow, MSMOModel, MetaDecision, ModelError, NodeBlock, ObjectiveMatrix, StageBlocks};
use crate::rgp::{solve_reference, ReferencePoint, RgpError, ScalarizationResult};

pub use instance::{PortfolioInstance, Preferences, StageGoal, WeightOverride};
pub use money::{profit, Money};
pub use robustness::{robustness_report, RobustnessReport, RobustnessRow};

const MILLION: f64 = 1_000_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PortfolioError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("cannot parse instance: {0}")]
    Config(String),
    #[error("cannot read instance: {0}")]
    Io(String),
    #[error("no goal for stage {stage} state {state:?}")]
    MissingGoal { stage: usize, state: StateId },
    #[error("objective matrix must have 2 objectives per path, got {0}")]
    ObjectiveCount(usize),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rgp(#[from] RgpError),
    #[error(transparent)]
    Horizon(#[from] HorizonError),
}

/// States reachable at each realisation stage from the root, in declared order.
fn stage_states(inst: &PortfolioInstance, stage_count: usize) -> Vec<Vec<StateId>> {
    let mut frontier = vec![inst.root_state.clone()];
    let mut out = Vec::with_capacity(stage_count - 1);
    for _ in 1..stage_count {
        let reached: Vec<StateId> = inst
            .states
            .iter()
            .filter(|s| frontier.iter().any(|f| inst.transitions.get(f).is_some_and(|to| to.contains(s))))
            .cloned()
            .collect();
        out.push(reached.clone());
        frontier = reached;
    }
    out
}

pub fn scenario_tree(inst: &PortfolioInstance, stage_count: usize) -> Result<ScenarioTree, PortfolioError> {
    if stage_count < 2 {
        return Err(TreeError::InvalidStageCount(stage_count).into());
    }
    let states = stage_states(inst, stage_count);
    let transitions = Transitions::Stationary(inst.transitions.clone()).restricted(&states, Some(&inst.root_state));
    Ok(build_tree(stage_count, states, transitions, Some(inst.root_state.clone()))?)
}

fn transfer_col(n: usize, i: usize, j: usize) -> usize {
    i * (n + 1) + j
}

/// Multi-stage portfolio model over `stage_count` stages.
pub fn build_model(inst: &PortfolioInstance, stage_count: usize) -> Result<MSMOModel, PortfolioError> {
    inst.validate()?;
    let tree = scenario_tree(inst, stage_count)?;
    let n = inst.n();
    let last = stage_count - 1;
    let mut widths = vec![n * (n + 1); stage_count];
    widths[last] = 2 * n;

    let floor = Money::from_units(inst.min_withdrawal).to_millions();
    let cap = inst.enforce_max_withdrawal.then(|| Money::from_units(inst.max_withdrawal).to_millions());

    let mut blocks = StageBlocks::new(widths.clone());
    for node in tree.nodes() {
        let t = node.stage;
        let state = node.prefix.last().unwrap_or(&inst.root_state).as_str();
        let parent_state = match t {
            0 => None,
            1 => Some(inst.root_state.as_str()),
            _ => Some(node.prefix[t - 2].as_str()),
        };
        let zeros = || -> Vec<Vec<f64>> { widths[..=t].iter().map(|&w| vec![0.0; w]).collect() };
        let final_stage = t == last;

        let mut rows = Vec::with_capacity(n + 2);
        for i in 0..n {
            let mut segs = zeros();
            if final_stage {
                segs[t][i] = 1.0 + inst.penalty(state, i, n);
                segs[t][n + i] = 1.0;
            } else {
                for j in 0..=n {
                    segs[t][transfer_col(n, i, j)] = 1.0 + inst.penalty(state, i, j);
                }
            }
            if t > 0 {
                let growth = 1.0 + inst.growth(i, state);
                for j in 0..n {
                    segs[t - 1][transfer_col(n, j, i)] = -growth;
                }
            }
            let rhs = if t == 0 { Money::from_units(inst.initial_funds[i]).to_millions() } else { 0.0 };
            rows.push(BlockRow { segments: segs, relation: Relation::Eq, rhs });
        }

        let mut withdrawal = zeros();
        for i in 0..n {
            withdrawal[t][if final_stage { i } else { transfer_col(n, i, n) }] = 1.0;
        }
        rows.push(BlockRow { segments: withdrawal.clone(), relation: Relation::Ge, rhs: floor });
        if let Some(cap) = cap {
            rows.push(BlockRow { segments: withdrawal.clone(), relation: Relation::Le, rhs: cap });
        }

        let mut fund = zeros();
        for i in 0..n {
            if final_stage {
                fund[t][n + i] = 1.0;
            } else {
                for j in 0..n {
                    fund[t][transfer_col(n, i, j)] = 1.0 + inst.penalty(state, i, j);
                }
            }
            if let Some(ps) = parent_state {
                for j in 0..n {
                    fund[t - 1][transfer_col(n, i, j)] = -(1.0 + inst.penalty(ps, i, j));
                }
            }
        }

        blocks.nodes.insert(node.prefix.clone(), NodeBlock { objectives: vec![fund, withdrawal], rows });
    }

    let labels = widths
        .iter()
        .enumerate()
        .map(|(t, _)| {
            if t == last {
                (1..=n).map(|i| format!("w{i}")).chain((1..=n).map(|i| format!("h{i}"))).collect()
            } else {
                (1..=n).flat_map(|i| (1..=n + 1).map(move |j| format!("x{i}_{j}"))).collect()
            }
        })
        .collect();
    Ok(MSMOModel::assemble(tree, blocks, 2, vec![Sense::Maximize; 2])?
        .with_var_labels(labels)
        .with_objective_names(vec!["Z1".into(), "Z2".into()]))
}

pub fn build_three_stage(inst: &PortfolioInstance) -> Result<MSMOModel, PortfolioError> {
    build_model(inst, 3)
}

pub fn build_two_stage(inst: &PortfolioInstance) -> Result<MSMOModel, PortfolioError> {
    build_model(inst, 2)
}

/// Rewrites a two-stage model's final-stage `(w, h)` in the transfer layout
/// (`w_i = x_{i,n}`, `h_i = Σ_{j<n} (1+p_ij) x_ij`), which is how the same
/// stage appears in a truncated three-stage model.
pub fn two_stage_in_transfer_layout(inst: &PortfolioInstance, two: &MSMOModel) -> Result<MSMOModel, PortfolioError> {
    let n = inst.n();
    let tree = two.tree();
    let labels: Vec<String> = (1..=n).flat_map(|i| (1..=n + 1).map(move |j| format!("x{i}_{j}"))).collect();
    // Penalties depend on the stage-1 state, so each state's block gets its own map.
    let mut merged = two.blocks().clone();
    merged.widths[1] = n * (n + 1);
    for node in tree.stage_nodes(1) {
        let prefix = tree.node(node).prefix.clone();
        let state = prefix[0].as_str();
        let mut map = vec![Vec::new(); 2 * n];
        for i in 0..n {
            map[i] = vec![(transfer_col(n, i, n), 1.0)];
            map[n + i] = (0..n).map(|j| (transfer_col(n, i, j), 1.0 + inst.penalty(state, i, j))).collect();
        }
        let rewritten = two.substitute(1, labels.clone(), &map)?;
        merged.nodes.insert(prefix.clone(), rewritten.blocks().nodes[&prefix].clone());
    }
    let mut var_labels = two.var_labels().to_vec();
    var_labels[1] = labels;
    Ok(MSMOModel::assemble(tree.clone(), merged, two.m(), two.senses().to_vec())?
        .with_scoring(two.scoring())
        .with_nonnegative(two.is_nonnegative())
        .with_var_labels(var_labels)
        .with_objective_names(two.objective_names().to_vec()))
}

/// Goals and weights for every meta-objective of `model`, whose root sits
/// after the realised states `prefix` (empty for a model rooted at stage 0).
/// Z1 aims at the fund goal of the last stage; Z2 at the sum of the
/// withdrawal goals of every stage the model covers.
pub fn reference_point(
    inst: &PortfolioInstance,
    model: &MSMOModel,
    prefix: &[StateId],
) -> Result<ReferencePoint, PortfolioError> {
    let prefs = &inst.preferences;
    let start = prefix.len();
    let paths = model.tree().paths();
    let mut goals = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for id in model.meta_objectives() {
        let mut full: Vec<StateId> = vec![inst.root_state.clone()];
        full.extend(prefix.iter().cloned());
        full.extend(paths[id.path].states.iter().cloned());
        let last = full.len() - 1;
        let goal = match id.objective {
            0 => inst.goal(last, &full[last])?.fund,
            _ => (start..=last).map(|t| inst.goal(t, &full[t]).map(|g| g.withdrawal)).sum::<Result<f64, _>>()?,
        };
        goals.insert(id, goal);
        weights.insert(id, prefs.weight_for(id.objective, &full[1..]));
    }
    Ok(ReferencePoint::new(goals, weights, prefs.epsilon)?)
}

/// Solves the three-stage model against the instance's goals.
pub fn solve_three_stage(inst: &PortfolioInstance) -> Result<(MSMOModel, ScalarizationResult), PortfolioError> {
    let model = build_three_stage(inst)?;
    let rp = reference_point(inst, &model, &[])?;
    let result = solve_reference(&model, &rp)?;
    Ok((model, result))
}

/// Two-stage moving horizon over the three-stage model.
pub fn solve_moving_horizon(inst: &PortfolioInstance) -> Result<(MSMOModel, HorizonRun), PortfolioError> {
    let model = build_three_stage(inst)?;
    let first = model.prefix_model(2)?;
    let first_ref = reference_point(inst, &first, &[])?;
    let x0 = vec![0.0; model.widths()[0]];
    let tree = model.tree();
    let mut refs = BTreeMap::new();
    for node in tree.stage_nodes(1) {
        let k1 = tree.node(node).prefix[0].clone();
        let residual = residual_model(&model, &x0, &k1)?;
        refs.insert(k1.clone(), reference_point(inst, &residual, &[k1])?);
    }
    let run = run_moving_horizon(&model, &first_ref, &refs)?;
    Ok((model, run))
}

/// Meta-objective values converted from millions to currency units.
pub fn currency_matrix(matrix: &ObjectiveMatrix) -> ObjectiveMatrix {
    matrix.map(|v| v * MILLION)
}

/// Per-path fund and withdrawal figures of a decision, Table-style.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub label: String,
    pub remained: Money,
    /// Withdrawal at each stage along the path.
    pub withdrawals: Vec<Money>,
}

impl PathSummary {
    pub fn total_withdrawal(&self) -> Money {
        self.withdrawals.iter().copied().sum()
    }
}

/// Withdrawal and holding totals of `d` along every path of a portfolio model.
pub fn path_summaries(inst: &PortfolioInstance, model: &MSMOModel, d: &MetaDecision) -> Vec<PathSummary> {
    let n = inst.n();
    let tree = model.tree();
    let last = tree.stage_count() - 1;
    let millions = |v: f64| Money::from_units_f64(v * MILLION);
    tree.paths()
        .iter()
        .map(|path| {
            let nodes = tree.path_nodes(path.index);
            let withdrawals = nodes
                .iter()
                .map(|&k| {
                    let v = d.node(k);
                    let stage = tree.node(k).stage;
                    millions((0..n).map(|i| v[if stage == last { i } else { transfer_col(n, i, n) }]).sum())
                })
                .collect();
            let leaf = d.node(*nodes.last().expect("non-empty path"));
            PathSummary {
                label: format!("({})", path.states.join(",")),
                remained: millions(leaf[n..2 * n].iter().sum()),
                withdrawals,
            }
        })
        .collect()
}

/// Z1/Z2 matrix (currency units) built from path summaries.
pub fn summary_matrix(rows: &[PathSummary]) -> ObjectiveMatrix {
    let labels = rows.iter().map(|r| r.label.clone()).collect();
    let values = rows.iter().flat_map(|r| [r.remained.units(), r.total_withdrawal().units()]).collect();
    ObjectiveMatrix::new(2, labels, values)
}
