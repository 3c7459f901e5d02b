//! Augmented reference-point goal programming.
//!
//! Every meta-objective `z_k` is first brought into a minimisation frame
//! (`n_k = z_k` or `-z_k`), so a positive deviation always means "worse than
//! the goal". The scalarized LP is
//!
//! ```text
//! min  φ + ε Σ ω_k δ_k
//! s.t. model rows
//!      n_k(x) − δ_k = ĝ_k      for every meta-objective k
//!      ω_k δ_k − φ ≤ 0         for every meta-objective k
//!      δ, φ free
//! ```
//!
//! where `ĝ_k` is the goal in the same frame.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lattice::MetaObjectiveId;
use crate::lp::{self, check_point, Bounds, LPProblem, LpError, Relation, Sense, SolveResult, Status};
use crate::model::{MSMOModel, MetaDecision, ModelError, ObjectiveMatrix};

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_WEIGHT: f64 = 1.0;
/// Improvement-LP slack sum above which a decision counts as dominated.
pub const PARETO_TOL: f64 = 1e-6;
/// Feasibility tolerance for decisions handed to [`verify_pareto`].
pub const INPUT_FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RgpError {
    #[error("reference point does not cover meta-objective {0}")]
    Coverage(MetaObjectiveId),
    #[error("reference point names {0}, which the model does not have")]
    UnknownMetaObjective(MetaObjectiveId),
    #[error("weight for {id} must be positive and finite, got {weight}")]
    NonpositiveWeight { id: MetaObjectiveId, weight: f64 },
    #[error("augmentation epsilon must be positive and finite, got {0}")]
    NonpositiveEpsilon(f64),
    #[error("goal for {0} is not finite")]
    NonFiniteGoal(MetaObjectiveId),
    #[error("solve did not reach an optimum: {0:?}")]
    NotOptimal(Status),
    #[error("decision violates the model (max violation {0:e})")]
    InfeasibleInput(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Aspiration levels and weights per meta-objective, in the objectives' own units and senses.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint {
    pub goals: BTreeMap<MetaObjectiveId, f64>,
    pub weights: BTreeMap<MetaObjectiveId, f64>,
    pub epsilon: f64,
}

impl ReferencePoint {
    pub fn new(
        goals: BTreeMap<MetaObjectiveId, f64>,
        weights: BTreeMap<MetaObjectiveId, f64>,
        epsilon: f64,
    ) -> Result<Self, RgpError> {
        let rp = ReferencePoint { goals, weights, epsilon };
        rp.validate()?;
        Ok(rp)
    }

    /// Unit weights and the default epsilon.
    pub fn with_goals(goals: BTreeMap<MetaObjectiveId, f64>) -> Self {
        let weights = goals.keys().map(|&k| (k, DEFAULT_WEIGHT)).collect();
        ReferencePoint { goals, weights, epsilon: DEFAULT_EPSILON }
    }

    /// Builds goals and weights for every meta-objective of `model`.
    pub fn from_fn(model: &MSMOModel, epsilon: f64, mut f: impl FnMut(MetaObjectiveId) -> (f64, f64)) -> Self {
        let mut goals = BTreeMap::new();
        let mut weights = BTreeMap::new();
        for id in model.meta_objectives() {
            let (g, w) = f(id);
            goals.insert(id, g);
            weights.insert(id, w);
        }
        ReferencePoint { goals, weights, epsilon }
    }

    pub fn validate(&self) -> Result<(), RgpError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(RgpError::NonpositiveEpsilon(self.epsilon));
        }
        for (&id, &w) in &self.weights {
            if !(w > 0.0 && w.is_finite()) {
                return Err(RgpError::NonpositiveWeight { id, weight: w });
            }
        }
        for (&id, g) in &self.goals {
            if !g.is_finite() {
                return Err(RgpError::NonFiniteGoal(id));
            }
        }
        Ok(())
    }

    fn check_coverage(&self, model: &MSMOModel) -> Result<(), RgpError> {
        self.validate()?;
        let ids = model.meta_objectives();
        for id in &ids {
            if !self.goals.contains_key(id) || !self.weights.contains_key(id) {
                return Err(RgpError::Coverage(*id));
            }
        }
        let known: std::collections::BTreeSet<_> = ids.into_iter().collect();
        if let Some(id) = self.goals.keys().chain(self.weights.keys()).find(|id| !known.contains(id)) {
            return Err(RgpError::UnknownMetaObjective(*id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarizationResult {
    pub decision: MetaDecision,
    /// Signed deviation per meta-objective in the minimisation frame.
    pub deviations: BTreeMap<MetaObjectiveId, f64>,
    pub phi: f64,
    pub psi: f64,
    pub objective_matrix: ObjectiveMatrix,
}

fn frame(sense: Sense) -> f64 {
    match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    }
}

/// Meta-objective row in the minimisation frame.
pub fn normalized_objective_row(model: &MSMOModel, id: MetaObjectiveId) -> Vec<f64> {
    let s = frame(model.senses()[id.objective]);
    model.objective_row(id).into_iter().map(|c| s * c).collect()
}

pub fn scalarize(model: &MSMOModel, rp: &ReferencePoint) -> Result<LPProblem, RgpError> {
    rp.check_coverage(model)?;
    let base = model.constraint_system();
    let ids = model.meta_objectives();
    let n = base.num_vars();
    let k = ids.len();
    let width = n + k + 1;
    let phi = n + k;

    let mut cost = vec![0.0; width];
    cost[phi] = 1.0;
    for (q, id) in ids.iter().enumerate() {
        cost[n + q] = rp.epsilon * rp.weights[id];
    }
    let mut lp = LPProblem::new(Sense::Minimize, cost);
    lp.bounds = base.bounds.clone();
    lp.bounds.extend(std::iter::repeat_n(Bounds::FREE, k + 1));
    lp.var_names = base.var_names.clone();
    lp.var_names.extend(ids.iter().map(|id| format!("delta_{}_{}", id.objective + 1, id.path + 1)));
    lp.var_names.push("phi".into());

    for row in &base.rows {
        let mut coeffs = row.coeffs.clone();
        coeffs.resize(width, 0.0);
        lp.add_row(coeffs, row.relation, row.rhs);
    }
    for (q, id) in ids.iter().enumerate() {
        let mut coeffs = normalized_objective_row(model, *id);
        coeffs.resize(width, 0.0);
        coeffs[n + q] = -1.0;
        lp.add_row(coeffs, Relation::Eq, frame(model.senses()[id.objective]) * rp.goals[id]);
    }
    for (q, id) in ids.iter().enumerate() {
        let mut coeffs = vec![0.0; width];
        coeffs[n + q] = rp.weights[id];
        coeffs[phi] = -1.0;
        lp.add_row(coeffs, Relation::Le, 0.0);
    }
    Ok(lp)
}

pub fn extract(model: &MSMOModel, lp: &LPProblem, res: &SolveResult) -> Result<ScalarizationResult, RgpError> {
    if !res.is_optimal() {
        return Err(RgpError::NotOptimal(res.status));
    }
    let ids = model.meta_objectives();
    let n = model.column_count();
    if lp.num_vars() != n + ids.len() + 1 || res.point.len() != lp.num_vars() {
        return Err(RgpError::Lp(LpError::DimensionMismatch { expected: n + ids.len() + 1, actual: res.point.len() }));
    }
    let decision = MetaDecision::from_flat(model, &res.point[..n])?;
    let deviations = ids.iter().enumerate().map(|(q, id)| (*id, res.point[n + q])).collect();
    let objective_matrix = model.evaluate(&decision)?;
    Ok(ScalarizationResult {
        decision,
        deviations,
        phi: res.point[n + ids.len()],
        psi: res.objective_value,
        objective_matrix,
    })
}

/// Scalarize, solve with the built-in simplex, and extract.
pub fn solve_reference(model: &MSMOModel, rp: &ReferencePoint) -> Result<ScalarizationResult, RgpError> {
    let lp = scalarize(model, rp)?;
    let res = lp::solve(&lp)?;
    extract(model, &lp, &res)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParetoVerdict {
    ParetoOptimal,
    /// A feasible decision no worse in every meta-objective and better by
    /// `improvement` in total (minimisation frame).
    Dominated { certificate: MetaDecision, improvement: f64 },
}

impl ParetoVerdict {
    pub fn is_pareto_optimal(&self) -> bool {
        matches!(self, ParetoVerdict::ParetoOptimal)
    }
}

/// Solves `max Σ s  s.t. model rows, n_k(x) + s_k = n_k(d), s ≥ 0`.
pub fn verify_pareto(model: &MSMOModel, d: &MetaDecision) -> Result<ParetoVerdict, RgpError> {
    let base = model.constraint_system();
    let flat = d.to_flat();
    if flat.len() != base.num_vars() {
        return Err(RgpError::Model(ModelError::Coverage(format!(
            "{} values for {} columns",
            flat.len(),
            base.num_vars()
        ))));
    }
    let report = check_point(&base, &flat, INPUT_FEASIBILITY_TOL)?;
    if !report.is_clean() {
        return Err(RgpError::InfeasibleInput(report.max_violation()));
    }

    let ids = model.meta_objectives();
    let n = base.num_vars();
    let width = n + ids.len();
    let mut cost = vec![0.0; width];
    cost[n..].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = LPProblem::new(Sense::Maximize, cost);
    lp.bounds = base.bounds.clone();
    lp.bounds.extend(std::iter::repeat_n(Bounds::NONNEGATIVE, ids.len()));
    for row in &base.rows {
        let mut coeffs = row.coeffs.clone();
        coeffs.resize(width, 0.0);
        lp.add_row(coeffs, row.relation, row.rhs);
    }
    for (q, id) in ids.iter().enumerate() {
        let mut coeffs = normalized_objective_row(model, *id);
        let target: f64 = coeffs.iter().zip(&flat).map(|(c, x)| c * x).sum();
        coeffs.resize(width, 0.0);
        coeffs[n + q] = 1.0;
        lp.add_row(coeffs, Relation::Eq, target);
    }

    let mut res = lp::solve(&lp)?;
    if res.status == Status::Unbounded {
        // Unbounded improvement: cap the slacks to obtain a finite certificate.
        for b in &mut lp.bounds[n..] {
            b.upper = 1.0;
        }
        res = lp::solve(&lp)?;
    }
    if !res.is_optimal() {
        return Err(RgpError::NotOptimal(res.status));
    }
    if res.objective_value <= PARETO_TOL {
        return Ok(ParetoVerdict::ParetoOptimal);
    }
    Ok(ParetoVerdict::Dominated {
        certificate: MetaDecision::from_flat(model, &res.point[..n])?,
        improvement: res.objective_value,
    })
}
