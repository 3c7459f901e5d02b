//! Dense linear programs: representation, a two-phase simplex solver,
//! feasibility checking and LP-format text interchange.

mod format;
mod simplex;

pub use format::{export_lp, parse_lp};
pub use simplex::{solve, solve_with, SolverOptions};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid variable name {0:?}: names must be unique, non-empty and alphanumeric/underscore")]
    InvalidName(String),
    #[error("LP parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// Lower/upper bound pair. Infinite values mean "unbounded on that side".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const NONNEGATIVE: Bounds = Bounds { lower: 0.0, upper: f64::INFINITY };
    pub const FREE: Bounds = Bounds { lower: f64::NEG_INFINITY, upper: f64::INFINITY };

    pub fn new(lower: f64, upper: f64) -> Self {
        Bounds { lower, upper }
    }

    pub fn is_free(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds::NONNEGATIVE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Row { coeffs, relation, rhs }
    }

    pub fn activity(&self, point: &[f64]) -> f64 {
        self.coeffs.iter().zip(point).map(|(a, x)| a * x).sum()
    }

    /// Amount by which `point` violates this row (0 when satisfied).
    pub fn violation(&self, point: &[f64]) -> f64 {
        let lhs = self.activity(point);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A dense single-objective linear program.
#[derive(Debug, Clone, PartialEq)]
pub struct LPProblem {
    pub sense: Sense,
    pub cost: Vec<f64>,
    pub rows: Vec<Row>,
    pub bounds: Vec<Bounds>,
    pub var_names: Vec<String>,
}

impl LPProblem {
    /// Empty problem over `n` nonnegative variables named `x0..x{n-1}`.
    pub fn new(sense: Sense, cost: Vec<f64>) -> Self {
        let n = cost.len();
        LPProblem {
            sense,
            cost,
            rows: Vec::new(),
            bounds: vec![Bounds::NONNEGATIVE; n],
            var_names: (0..n).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.rows.push(Row::new(coeffs, relation, rhs));
        self
    }

    pub fn objective_at(&self, point: &[f64]) -> f64 {
        self.cost.iter().zip(point).map(|(c, x)| c * x).sum()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.cost.len();
        if self.bounds.len() != n {
            return Err(LpError::Malformed(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        if self.var_names.len() != n {
            return Err(LpError::Malformed(format!(
                "{} names for {n} variables",
                self.var_names.len()
            )));
        }
        if let Some(j) = self.cost.iter().position(|c| !c.is_finite()) {
            return Err(LpError::Malformed(format!("non-finite cost on variable {j}")));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {r} has width {}, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(LpError::Malformed(format!("row {r} has a non-finite coefficient")));
            }
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if b.lower.is_nan() || b.upper.is_nan() || b.lower == f64::INFINITY || b.upper == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("invalid bounds on variable {j}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    /// Variable values; empty unless `status == Optimal`.
    pub point: Vec<f64>,
    /// Objective in the problem's own sense; NaN unless `status == Optimal`.
    pub objective_value: f64,
    pub iterations: usize,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Violations found by [`check_point`]. Empty means feasible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    /// (row index, violation magnitude) for every row violated beyond tolerance.
    pub rows: Vec<(usize, f64)>,
    /// (variable index, violation magnitude) for every bound violated beyond tolerance.
    pub bounds: Vec<(usize, f64)>,
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.rows.is_empty() && self.bounds.is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        self.rows
            .iter()
            .chain(&self.bounds)
            .map(|&(_, v)| v)
            .fold(0.0, f64::max)
    }
}

pub fn check_point(p: &LPProblem, point: &[f64], tol: f64) -> Result<ViolationReport, LpError> {
    if point.len() != p.num_vars() {
        return Err(LpError::DimensionMismatch { expected: p.num_vars(), actual: point.len() });
    }
    let mut report = ViolationReport::default();
    for (r, row) in p.rows.iter().enumerate() {
        let v = row.violation(point);
        if v > tol {
            report.rows.push((r, v));
        }
    }
    for (j, (b, &x)) in p.bounds.iter().zip(point).enumerate() {
        let v = (b.lower - x).max(x - b.upper).max(0.0);
        if v > tol {
            report.bounds.push((j, v));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sunk_cost_three_stage() -> LPProblem {
        let mut p = LPProblem::new(Sense::Minimize, vec![0.0; 3]);
        p.add_row(vec![1.0, 0.0, 0.0], Relation::Le, 1.0)
            .add_row(vec![1.0, -1.0, 0.0], Relation::Le, 1.0)
            .add_row(vec![1.0, 1.0, 1.0], Relation::Le, 0.5);
        p
    }

    #[test]
    fn feasible_point_has_empty_report() {
        let mut p = LPProblem::new(Sense::Minimize, vec![1.0]);
        p.add_row(vec![1.0], Relation::Ge, 3.0);
        assert!(check_point(&p, &[3.0], 1e-9).unwrap().is_clean());
    }

    #[test]
    fn eighth_point_is_feasible_for_three_stage_system() {
        let p = sunk_cost_three_stage();
        assert!(check_point(&p, &[0.125; 3], 0.0).unwrap().is_clean());
    }

    #[test]
    fn infeasible_point_reports_the_violated_row() {
        let p = sunk_cost_three_stage();
        let report = check_point(&p, &[1.0, 0.0, 0.0], 1e-9).unwrap();
        assert_eq!(report.rows, vec![(2, 0.5)]);
        assert!(report.bounds.is_empty());
    }

    #[test]
    fn bound_violations_are_reported() {
        let mut p = LPProblem::new(Sense::Minimize, vec![0.0, 0.0]);
        p.bounds[1] = Bounds::new(-1.0, 2.0);
        let report = check_point(&p, &[-0.5, 2.5], 1e-9).unwrap();
        assert_eq!(report.bounds, vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let p = sunk_cost_three_stage();
        assert_eq!(
            check_point(&p, &[0.0; 2], 1e-9),
            Err(LpError::DimensionMismatch { expected: 3, actual: 2 })
        );
    }

    #[test]
    fn validate_catches_non_finite_and_width_errors() {
        let mut p = LPProblem::new(Sense::Minimize, vec![1.0, 2.0]);
        p.add_row(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(p.validate(), Err(LpError::Malformed(_))));
        let mut q = LPProblem::new(Sense::Minimize, vec![1.0, f64::NAN]);
        q.add_row(vec![1.0, 1.0], Relation::Le, 1.0);
        assert!(matches!(q.validate(), Err(LpError::Malformed(_))));
    }
}
