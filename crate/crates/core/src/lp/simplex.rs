//! Two-phase dense tableau simplex.
//!
//! Bounds are removed by substitution before the tableau is built: a finite
//! lower bound shifts the variable, an upper-only bound mirrors it, and a free
//! variable is split into positive and negative parts. Finite upper bounds on
//! shifted variables become explicit `<=` rows. Pricing is Dantzig's rule
//! until a run of degenerate pivots is seen, then Bland's rule takes over
//! until the next non-degenerate step.

use super::{LPProblem, LpError, Relation, Sense, SolveResult, Status};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Smallest tableau entry accepted as a pivot.
    pub pivot_tol: f64,
    /// Phase-one residual (scaled by the rhs magnitude) above which the problem is infeasible.
    pub feasibility_tol: f64,
    /// Reduced cost below `-optimality_tol` makes a column eligible to enter.
    pub optimality_tol: f64,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degeneracy_streak: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            pivot_tol: 1e-9,
            feasibility_tol: 1e-7,
            optimality_tol: 1e-8,
            max_iterations: 20_000,
            degeneracy_streak: 25,
        }
    }
}

pub fn solve(p: &LPProblem) -> Result<SolveResult, LpError> {
    solve_with(p, &SolverOptions::default())
}

pub fn solve_with(p: &LPProblem, opts: &SolverOptions) -> Result<SolveResult, LpError> {
    p.validate()?;
    let std = match StandardForm::build(p) {
        Some(s) => s,
        None => return Ok(not_optimal(Status::Infeasible, 0)),
    };
    let mut tab = Tableau::new(&std);
    let rhs_scale = 1.0 + tab.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    // Phase one: minimise the sum of artificials.
    let phase_one_cost: Vec<f64> = (0..tab.ncols)
        .map(|j| if tab.is_artificial(j) { 1.0 } else { 0.0 })
        .collect();
    tab.price(&phase_one_cost);
    match tab.iterate(opts) {
        Outcome::Optimal => {}
        Outcome::IterationLimit => return Ok(not_optimal(Status::IterationLimit, tab.iterations)),
        // Phase one is bounded below by zero.
        Outcome::Unbounded => return Ok(not_optimal(Status::Infeasible, tab.iterations)),
    }
    if tab.objective > opts.feasibility_tol * rhs_scale {
        return Ok(not_optimal(Status::Infeasible, tab.iterations));
    }
    tab.drive_out_artificials(opts.pivot_tol);

    // Phase two.
    let mut cost = vec![0.0; tab.ncols];
    cost[..std.cost.len()].copy_from_slice(&std.cost);
    tab.price(&cost);
    match tab.iterate(opts) {
        Outcome::Optimal => {}
        Outcome::Unbounded => return Ok(not_optimal(Status::Unbounded, tab.iterations)),
        Outcome::IterationLimit => return Ok(not_optimal(Status::IterationLimit, tab.iterations)),
    }

    let mut y = vec![0.0; std.cost.len()];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < y.len() {
            y[b] = tab.rhs[i].max(0.0);
        }
    }
    let point = std.recover(&y);
    Ok(SolveResult {
        status: Status::Optimal,
        objective_value: p.objective_at(&point),
        point,
        iterations: tab.iterations,
    })
}

fn not_optimal(status: Status, iterations: usize) -> SolveResult {
    SolveResult { status, point: Vec::new(), objective_value: f64::NAN, iterations }
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + y
    Shift { col: usize, offset: f64 },
    /// x = offset - y
    Mirror { col: usize, offset: f64 },
    /// x = y_pos - y_neg
    Split { pos: usize, neg: usize },
}

/// `min cost·y  s.t. rows, y >= 0`, plus the map back to original variables.
struct StandardForm {
    cost: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
    maps: Vec<VarMap>,
}

impl StandardForm {
    /// Returns `None` when some variable has an empty bound interval.
    fn build(p: &LPProblem) -> Option<Self> {
        let mut maps = Vec::with_capacity(p.num_vars());
        let mut ncols = 0;
        let mut upper_rows = Vec::new();
        for b in &p.bounds {
            if b.lower > b.upper {
                return None;
            }
            if b.lower.is_finite() {
                maps.push(VarMap::Shift { col: ncols, offset: b.lower });
                if b.upper.is_finite() {
                    upper_rows.push((ncols, b.upper - b.lower));
                }
                ncols += 1;
            } else if b.upper.is_finite() {
                maps.push(VarMap::Mirror { col: ncols, offset: b.upper });
                ncols += 1;
            } else {
                maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
                ncols += 2;
            }
        }

        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; ncols];
        for (&c, map) in p.cost.iter().zip(&maps) {
            scatter(&mut cost, map, sign * c);
        }

        let mut rows = Vec::with_capacity(p.rows.len() + upper_rows.len());
        for row in &p.rows {
            let mut coeffs = vec![0.0; ncols];
            let mut rhs = row.rhs;
            for (&a, map) in row.coeffs.iter().zip(&maps) {
                if a == 0.0 {
                    continue;
                }
                match *map {
                    VarMap::Shift { offset, .. } | VarMap::Mirror { offset, .. } => rhs -= a * offset,
                    VarMap::Split { .. } => {}
                }
                scatter(&mut coeffs, map, a);
            }
            rows.push((coeffs, row.relation, rhs));
        }
        for (col, width) in upper_rows {
            let mut coeffs = vec![0.0; ncols];
            coeffs[col] = 1.0;
            rows.push((coeffs, Relation::Le, width));
        }
        Some(StandardForm { cost, rows, maps })
    }

    fn recover(&self, y: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|map| match *map {
                VarMap::Shift { col, offset } => offset + y[col],
                VarMap::Mirror { col, offset } => offset - y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }
}

fn scatter(target: &mut [f64], map: &VarMap, a: f64) {
    match *map {
        VarMap::Shift { col, .. } => target[col] += a,
        VarMap::Mirror { col, .. } => target[col] -= a,
        VarMap::Split { pos, neg } => {
            target[pos] += a;
            target[neg] -= a;
        }
    }
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    /// `B^-1 A`, one vector per basic row.
    body: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
    /// Columns at or beyond this index are artificial.
    first_artificial: usize,
    reduced: Vec<f64>,
    objective: f64,
    iterations: usize,
}

impl Tableau {
    fn new(std: &StandardForm) -> Self {
        let nstruct = std.cost.len();
        let m = std.rows.len();
        // Orient rows so rhs >= 0, then count slacks and artificials.
        let oriented: Vec<(Vec<f64>, Relation, f64)> = std
            .rows
            .iter()
            .map(|(a, rel, b)| {
                if *b < 0.0 {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|v| -v).collect(), flipped, -b)
                } else {
                    (a.clone(), *rel, *b)
                }
            })
            .collect();
        let nslack = oriented.iter().filter(|(_, rel, _)| *rel != Relation::Eq).count();
        let nart = oriented.iter().filter(|(_, rel, _)| *rel != Relation::Le).count();
        let first_artificial = nstruct + nslack;
        let ncols = first_artificial + nart;

        let mut body = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut next_slack, mut next_art) = (nstruct, first_artificial);
        for (a, rel, b) in oriented {
            let mut row = a;
            row.resize(ncols, 0.0);
            match rel {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            body.push(row);
            rhs.push(b);
        }
        Tableau {
            body,
            rhs,
            basis,
            ncols,
            first_artificial,
            reduced: vec![0.0; ncols],
            objective: 0.0,
            iterations: 0,
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial
    }

    /// Recompute reduced costs and objective for `cost` under the current basis.
    fn price(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        self.objective = 0.0;
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb == 0.0 {
                continue;
            }
            for (d, t) in self.reduced.iter_mut().zip(&self.body[i]) {
                *d -= cb * t;
            }
            self.objective += cb * self.rhs[i];
        }
    }

    fn iterate(&mut self, opts: &SolverOptions) -> Outcome {
        let mut streak = 0;
        loop {
            if self.iterations >= opts.max_iterations {
                return Outcome::IterationLimit;
            }
            let bland = streak >= opts.degeneracy_streak;
            let Some(enter) = self.entering(opts.optimality_tol, bland) else {
                return Outcome::Optimal;
            };
            let Some(leave) = self.leaving(enter, opts.pivot_tol, bland) else {
                return Outcome::Unbounded;
            };
            let step = self.rhs[leave] / self.body[leave][enter];
            if step <= 1e-12 {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(leave, enter);
            self.iterations += 1;
        }
    }

    fn entering(&self, tol: f64, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.first_artificial {
            let d = self.reduced[j];
            if d >= -tol {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        best.map(|(j, _)| j)
    }

    fn leaving(&self, enter: usize, pivot_tol: f64, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.body.iter().enumerate() {
            let a = row[enter];
            if a <= pivot_tol {
                continue;
            }
            let ratio = self.rhs[i].max(0.0) / a;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    let better = if tie {
                        if bland {
                            self.basis[i] < self.basis[bi]
                        } else {
                            a > self.body[bi][enter]
                        }
                    } else {
                        ratio < br
                    };
                    if better {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.body[r][c];
        for v in self.body[r].iter_mut() {
            *v /= piv;
        }
        self.rhs[r] /= piv;
        self.body[r][c] = 1.0;

        let pivot_row = std::mem::take(&mut self.body[r]);
        let pivot_rhs = self.rhs[r];
        for (i, row) in self.body.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f == 0.0 {
                continue;
            }
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
                if v.abs() < 1e-14 {
                    *v = 0.0;
                }
            }
            row[c] = 0.0;
            self.rhs[i] -= f * pivot_rhs;
            if self.rhs[i].abs() < 1e-14 {
                self.rhs[i] = 0.0;
            }
        }
        let dc = self.reduced[c];
        if dc != 0.0 {
            for (d, p) in self.reduced.iter_mut().zip(&pivot_row) {
                *d -= dc * p;
            }
            self.reduced[c] = 0.0;
            self.objective += dc * pivot_rhs;
        }
        self.body[r] = pivot_row;
        self.basis[r] = c;
    }

    /// Pivot zero-level artificials out of the basis; rows where that is
    /// impossible are linearly dependent and get dropped.
    fn drive_out_artificials(&mut self, pivot_tol: f64) {
        let mut i = 0;
        while i < self.basis.len() {
            if !self.is_artificial(self.basis[i]) {
                i += 1;
                continue;
            }
            let candidate = (0..self.first_artificial)
                .filter(|&j| self.body[i][j].abs() > pivot_tol)
                .max_by(|&a, &b| self.body[i][a].abs().total_cmp(&self.body[i][b].abs()));
            match candidate {
                Some(j) => {
                    self.pivot(i, j);
                    i += 1;
                }
                None => {
                    self.body.swap_remove(i);
                    self.rhs.swap_remove(i);
                    self.basis.swap_remove(i);
                }
            }
        }
    }
}
