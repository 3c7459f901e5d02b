//! Block-structured multi-stage multi-scenario multi-objective LPs.
//!
//! Every tree node owns a decision vector whose width depends only on its
//! stage. A node's block holds its constraint rows and its objective
//! contributions; both may reference the decisions of every ancestor, one
//! coefficient segment per ancestor stage. A meta-objective accumulates the
//! objective contributions of all nodes along its scored prefix.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lattice::{MetaObjectiveId, ScenarioTree, StateId, TreeError};
use crate::lp::{Bounds, LPProblem, Relation, Sense};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("block prefix {0:?} is not a node of the scenario tree")]
    PrefixMismatch(Vec<StateId>),
    #[error("block {prefix:?}: {what} has width {actual}, expected {expected}")]
    WidthMismatch { prefix: Vec<StateId>, what: String, expected: usize, actual: usize },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("decision does not cover the model: {0}")]
    Coverage(String),
    #[error("objective matrices are not congruent: {0}")]
    ShapeMismatch(String),
    #[error("cannot keep {keep} stages of a {stage_count}-stage model")]
    Range { keep: usize, stage_count: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// One constraint row of a node block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRow {
    /// `segments[s]` multiplies the decision of the stage-`s` ancestor (the
    /// last segment is the node's own decision).
    pub segments: Vec<Vec<f64>>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeBlock {
    /// `objectives[i][s]`: contribution of the stage-`s` ancestor's decision to objective `i`.
    pub objectives: Vec<Vec<Vec<f64>>>,
    pub rows: Vec<BlockRow>,
}

/// Coefficient blocks keyed by node prefix. A node without an entry has no
/// rows and contributes nothing to any objective.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageBlocks {
    /// Decision width per stage, `widths[t]` for t = 0..T-1.
    pub widths: Vec<usize>,
    pub nodes: BTreeMap<Vec<StateId>, NodeBlock>,
}

impl StageBlocks {
    pub fn new(widths: Vec<usize>) -> Self {
        StageBlocks { widths, nodes: BTreeMap::new() }
    }

    /// Structural row count per stage.
    pub fn row_counts(&self, stage_count: usize) -> Vec<usize> {
        let mut counts = vec![0; stage_count];
        for (prefix, block) in &self.nodes {
            if let Some(c) = counts.get_mut(prefix.len()) {
                *c += block.rows.len();
            }
        }
        counts
    }
}

/// Which prefixes carry meta-objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoringMode {
    /// One meta-objective per (objective, complete path), accumulated over the path.
    TerminalPath,
    /// One meta-objective per (objective, node), accumulated from the root to that node.
    PerStageCumulative,
}

/// Decision values per tree node, in the tree's breadth-first node order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaDecision {
    pub values: Vec<Vec<f64>>,
}

impl MetaDecision {
    pub fn zeros(model: &MSMOModel) -> Self {
        let values = model.tree.nodes().iter().map(|n| vec![0.0; model.blocks.widths[n.stage]]).collect();
        MetaDecision { values }
    }

    pub fn from_flat(model: &MSMOModel, flat: &[f64]) -> Result<Self, ModelError> {
        if flat.len() < model.column_count() {
            return Err(ModelError::Coverage(format!(
                "{} values for {} columns",
                flat.len(),
                model.column_count()
            )));
        }
        let values = (0..model.tree.nodes().len())
            .map(|n| flat[model.node_columns(n)].to_vec())
            .collect();
        Ok(MetaDecision { values })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values.concat()
    }

    pub fn node(&self, idx: usize) -> &[f64] {
        &self.values[idx]
    }

    /// The first `node_count` node decisions (the prefix for a truncated tree).
    pub fn truncated(&self, node_count: usize) -> MetaDecision {
        MetaDecision { values: self.values[..node_count].to_vec() }
    }

    /// `a·self + b·other`, node by node.
    pub fn combine(&self, a: f64, other: &MetaDecision, b: f64) -> MetaDecision {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
            .collect();
        MetaDecision { values }
    }
}

/// Meta-objective values, `m` objectives per scored prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveMatrix {
    pub m: usize,
    /// Human-readable label per scored prefix, e.g. `(S2,S1)`.
    pub labels: Vec<String>,
    /// Prefix-major: `values[prefix * m + objective]`.
    pub values: Vec<f64>,
}

impl ObjectiveMatrix {
    pub fn new(m: usize, labels: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), m * labels.len(), "objective matrix shape");
        ObjectiveMatrix { m, labels, values }
    }

    pub fn column_count(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, objective: usize, column: usize) -> f64 {
        self.values[column * self.m + objective]
    }

    pub fn at(&self, id: MetaObjectiveId) -> f64 {
        self.get(id.objective, id.path)
    }

    /// Sub-matrix over the given columns, in the given order.
    pub fn restrict(&self, columns: &[usize]) -> ObjectiveMatrix {
        let labels = columns.iter().map(|&c| self.labels[c].clone()).collect();
        let values = columns
            .iter()
            .flat_map(|&c| self.values[c * self.m..(c + 1) * self.m].iter().copied())
            .collect();
        ObjectiveMatrix { m: self.m, labels, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ObjectiveMatrix {
        ObjectiveMatrix { m: self.m, labels: self.labels.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    Dominates,
    DominatedBy,
    Incomparable,
    Equal,
}

/// Pareto comparison of `a` against `b` over every entry, exact arithmetic.
pub fn dominates(a: &ObjectiveMatrix, b: &ObjectiveMatrix, senses: &[Sense]) -> Result<Dominance, ModelError> {
    if a.m != b.m || a.values.len() != b.values.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.m,
            a.column_count(),
            b.m,
            b.column_count()
        )));
    }
    if senses.len() != a.m {
        return Err(ModelError::ShapeMismatch(format!("{} senses for {} objectives", senses.len(), a.m)));
    }
    let (mut a_better, mut b_better) = (false, false);
    for (k, (&x, &y)) in a.values.iter().zip(&b.values).enumerate() {
        let (x, y) = match senses[k % a.m] {
            Sense::Minimize => (x, y),
            Sense::Maximize => (-x, -y),
        };
        if x < y {
            a_better = true;
        } else if y < x {
            b_better = true;
        }
    }
    Ok(match (a_better, b_better) {
        (true, false) => Dominance::Dominates,
        (false, true) => Dominance::DominatedBy,
        (true, true) => Dominance::Incomparable,
        (false, false) => Dominance::Equal,
    })
}

/// Objective and constraint counts. `objective_count` is the framework count
/// (every objective scored at every node); `meta_objective_count` is what the
/// model's scoring mode actually instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub objective_count: usize,
    pub constraint_count: usize,
    pub meta_objective_count: usize,
    pub column_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MSMOModel {
    tree: ScenarioTree,
    blocks: StageBlocks,
    m: usize,
    senses: Vec<Sense>,
    scoring: ScoringMode,
    nonnegative: bool,
    var_labels: Vec<Vec<String>>,
    objective_names: Vec<String>,
    offsets: Vec<usize>,
}

pub fn assemble(tree: ScenarioTree, blocks: StageBlocks, m: usize, senses: Vec<Sense>) -> Result<MSMOModel, ModelError> {
    MSMOModel::assemble(tree, blocks, m, senses)
}

impl MSMOModel {
    /// Validates blocks against the tree. The result scores complete paths,
    /// requires nonnegative decisions, and labels variables `x0, x1, …`.
    pub fn assemble(tree: ScenarioTree, blocks: StageBlocks, m: usize, senses: Vec<Sense>) -> Result<Self, ModelError> {
        let t_count = tree.stage_count();
        if m == 0 {
            return Err(ModelError::Invalid("at least one objective is required".into()));
        }
        if senses.len() != m {
            return Err(ModelError::Invalid(format!("{} senses for {m} objectives", senses.len())));
        }
        if blocks.widths.len() != t_count {
            return Err(ModelError::Invalid(format!("{} stage widths for {t_count} stages", blocks.widths.len())));
        }
        for (prefix, block) in &blocks.nodes {
            if tree.node_index(prefix).is_none() {
                return Err(ModelError::PrefixMismatch(prefix.clone()));
            }
            let t = prefix.len();
            let check = |what: String, segs: &[Vec<f64>]| -> Result<(), ModelError> {
                if segs.len() != t + 1 {
                    return Err(ModelError::WidthMismatch {
                        prefix: prefix.clone(),
                        what: format!("{what} segment count"),
                        expected: t + 1,
                        actual: segs.len(),
                    });
                }
                for (s, seg) in segs.iter().enumerate() {
                    if seg.len() != blocks.widths[s] {
                        return Err(ModelError::WidthMismatch {
                            prefix: prefix.clone(),
                            what: format!("{what} segment {s}"),
                            expected: blocks.widths[s],
                            actual: seg.len(),
                        });
                    }
                    if seg.iter().any(|v| !v.is_finite()) {
                        return Err(ModelError::Invalid(format!("{what} of {prefix:?} has a non-finite coefficient")));
                    }
                }
                Ok(())
            };
            if !block.objectives.is_empty() && block.objectives.len() != m {
                return Err(ModelError::Invalid(format!(
                    "block {prefix:?} has {} objective blocks for {m} objectives",
                    block.objectives.len()
                )));
            }
            for (i, obj) in block.objectives.iter().enumerate() {
                check(format!("objective {i}"), obj)?;
            }
            for (r, row) in block.rows.iter().enumerate() {
                check(format!("row {r}"), &row.segments)?;
                if !row.rhs.is_finite() {
                    return Err(ModelError::Invalid(format!("row {r} of {prefix:?} has a non-finite rhs")));
                }
            }
        }

        let mut offsets = Vec::with_capacity(tree.nodes().len() + 1);
        let mut next = 0;
        for node in tree.nodes() {
            offsets.push(next);
            next += blocks.widths[node.stage];
        }
        offsets.push(next);
        let var_labels = blocks.widths.iter().map(|&w| (0..w).map(|j| format!("x{j}")).collect()).collect();
        let objective_names = (1..=m).map(|i| format!("Z{i}")).collect();
        Ok(MSMOModel {
            tree,
            blocks,
            m,
            senses,
            scoring: ScoringMode::TerminalPath,
            nonnegative: true,
            var_labels,
            objective_names,
            offsets,
        })
    }

    pub fn with_scoring(mut self, scoring: ScoringMode) -> Self {
        self.scoring = scoring;
        self
    }

    pub fn with_nonnegative(mut self, nonnegative: bool) -> Self {
        self.nonnegative = nonnegative;
        self
    }

    /// Per-stage local variable labels; ignored unless the shape matches the stage widths.
    pub fn with_var_labels(mut self, labels: Vec<Vec<String>>) -> Self {
        if labels.len() == self.blocks.widths.len() && labels.iter().zip(&self.blocks.widths).all(|(l, &w)| l.len() == w) {
            self.var_labels = labels;
        }
        self
    }

    pub fn with_objective_names(mut self, names: Vec<String>) -> Self {
        if names.len() == self.m {
            self.objective_names = names;
        }
        self
    }

    pub fn tree(&self) -> &ScenarioTree {
        &self.tree
    }

    pub fn blocks(&self) -> &StageBlocks {
        &self.blocks
    }

    pub fn widths(&self) -> &[usize] {
        &self.blocks.widths
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn senses(&self) -> &[Sense] {
        &self.senses
    }

    pub fn scoring(&self) -> ScoringMode {
        self.scoring
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn var_labels(&self) -> &[Vec<String>] {
        &self.var_labels
    }

    pub fn objective_names(&self) -> &[String] {
        &self.objective_names
    }

    pub fn column_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn node_columns(&self, node: usize) -> std::ops::Range<usize> {
        self.offsets[node]..self.offsets[node + 1]
    }

    /// Flat column of local variable `j` at `node`.
    pub fn column(&self, node: usize, j: usize) -> usize {
        self.offsets[node] + j
    }

    pub fn block(&self, node: usize) -> Option<&NodeBlock> {
        self.blocks.nodes.get(&self.tree.node(node).prefix)
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.column_count());
        for node in self.tree.nodes() {
            let suffix: String = node.prefix.iter().map(|s| format!("_{}", sanitize(s))).collect();
            for label in &self.var_labels[node.stage] {
                names.push(format!("{}_s{}{}", sanitize(label), node.stage, suffix));
            }
        }
        names
    }

    /// Prefix indices carrying meta-objectives: path indices or node indices.
    pub fn scored_count(&self) -> usize {
        match self.scoring {
            ScoringMode::TerminalPath => self.tree.path_count(),
            ScoringMode::PerStageCumulative => self.tree.nodes().len(),
        }
    }

    pub fn scored_labels(&self) -> Vec<String> {
        let prefix_label = |p: &[StateId]| format!("({})", p.join(","));
        match self.scoring {
            ScoringMode::TerminalPath => self.tree.paths().iter().map(|p| prefix_label(&p.states)).collect(),
            ScoringMode::PerStageCumulative => self.tree.nodes().iter().map(|n| prefix_label(&n.prefix)).collect(),
        }
    }

    /// Nodes whose contributions make up scored prefix `k`, root first.
    pub fn scored_chain(&self, k: usize) -> Vec<usize> {
        match self.scoring {
            ScoringMode::TerminalPath => self.tree.path_nodes(k),
            ScoringMode::PerStageCumulative => self.tree.ancestry(k),
        }
    }

    /// Prefix-major, objective-minor.
    pub fn meta_objectives(&self) -> Vec<MetaObjectiveId> {
        (0..self.scored_count())
            .flat_map(|path| (0..self.m).map(move |objective| MetaObjectiveId { objective, path }))
            .collect()
    }

    /// Dense coefficient row of one meta-objective over all model columns.
    pub fn objective_row(&self, id: MetaObjectiveId) -> Vec<f64> {
        let mut row = vec![0.0; self.column_count()];
        for node in self.scored_chain(id.path) {
            let Some(block) = self.block(node) else { continue };
            let Some(segments) = block.objectives.get(id.objective) else { continue };
            self.scatter_segments(&mut row, node, segments);
        }
        row
    }

    fn scatter_segments(&self, row: &mut [f64], node: usize, segments: &[Vec<f64>]) {
        for (anc, seg) in self.tree.ancestry(node).into_iter().zip(segments) {
            for (k, &c) in seg.iter().enumerate() {
                row[self.offsets[anc] + k] += c;
            }
        }
    }

    pub fn variable_bounds(&self) -> Bounds {
        if self.nonnegative {
            Bounds::NONNEGATIVE
        } else {
            Bounds::FREE
        }
    }

    /// The flattened structural constraint system with a zero objective.
    pub fn constraint_system(&self) -> LPProblem {
        let n = self.column_count();
        let mut lp = LPProblem::new(Sense::Minimize, vec![0.0; n]);
        lp.bounds = vec![self.variable_bounds(); n];
        lp.var_names = self.column_names();
        for node in 0..self.tree.nodes().len() {
            let Some(block) = self.block(node) else { continue };
            for row in &block.rows {
                let mut coeffs = vec![0.0; n];
                self.scatter_segments(&mut coeffs, node, &row.segments);
                lp.add_row(coeffs, row.relation, row.rhs);
            }
        }
        lp
    }

    pub fn count_dimensions(&self) -> Dimensions {
        Dimensions {
            objective_count: self.tree.nodes().len() * self.m,
            constraint_count: self.blocks.nodes.values().map(|b| b.rows.len()).sum(),
            meta_objective_count: self.scored_count() * self.m,
            column_count: self.column_count(),
        }
    }

    fn check_coverage(&self, d: &MetaDecision) -> Result<(), ModelError> {
        let nodes = self.tree.nodes();
        if d.values.len() != nodes.len() {
            return Err(ModelError::Coverage(format!("{} node decisions for {} nodes", d.values.len(), nodes.len())));
        }
        for (idx, (node, v)) in nodes.iter().zip(&d.values).enumerate() {
            let w = self.blocks.widths[node.stage];
            if v.len() != w {
                return Err(ModelError::Coverage(format!("node {idx} has {} values, expected {w}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ModelError::Coverage(format!("node {idx} has a non-finite value")));
            }
        }
        Ok(())
    }

    /// Accumulates every scored prefix's objective contributions node by node.
    pub fn evaluate(&self, d: &MetaDecision) -> Result<ObjectiveMatrix, ModelError> {
        self.check_coverage(d)?;
        let k = self.scored_count();
        let mut values = vec![0.0; k * self.m];
        for col in 0..k {
            for node in self.scored_chain(col) {
                let Some(block) = self.block(node) else { continue };
                let ancestry = self.tree.ancestry(node);
                for (i, segments) in block.objectives.iter().enumerate() {
                    let contribution: f64 = ancestry
                        .iter()
                        .zip(segments)
                        .map(|(&a, seg)| seg.iter().zip(&d.values[a]).map(|(c, x)| c * x).sum::<f64>())
                        .sum();
                    values[col * self.m + i] += contribution;
                }
            }
        }
        Ok(ObjectiveMatrix { m: self.m, labels: self.scored_labels(), values })
    }

    /// The model restricted to stages `0..keep`.
    pub fn prefix_model(&self, keep: usize) -> Result<MSMOModel, ModelError> {
        let stage_count = self.tree.stage_count();
        if keep < 2 || keep > stage_count {
            return Err(ModelError::Range { keep, stage_count });
        }
        if keep == stage_count {
            return Ok(self.clone());
        }
        let tree = self.tree.truncate(keep)?;
        let blocks = StageBlocks {
            widths: self.blocks.widths[..keep].to_vec(),
            nodes: self
                .blocks
                .nodes
                .iter()
                .filter(|(p, _)| p.len() < keep)
                .map(|(p, b)| (p.clone(), b.clone()))
                .collect(),
        };
        Ok(MSMOModel::assemble(tree, blocks, self.m, self.senses.clone())?
            .with_scoring(self.scoring)
            .with_nonnegative(self.nonnegative)
            .with_var_labels(self.var_labels[..keep].to_vec())
            .with_objective_names(self.objective_names.clone()))
    }

    /// Re-expresses stage `stage` decisions in new variables: old local
    /// variable `j` becomes the linear form `map[j]` (pairs of new local index
    /// and coefficient) over `labels.len()` new variables. Every segment that
    /// multiplies a stage-`stage` decision is rewritten accordingly.
    pub fn substitute(&self, stage: usize, labels: Vec<String>, map: &[Vec<(usize, f64)>]) -> Result<MSMOModel, ModelError> {
        let old_width = self.blocks.widths.get(stage).copied().ok_or(ModelError::Range {
            keep: stage,
            stage_count: self.tree.stage_count(),
        })?;
        let new_width = labels.len();
        if map.len() != old_width || map.iter().flatten().any(|&(k, _)| k >= new_width) {
            return Err(ModelError::Invalid(format!("substitution map does not fit stage {stage}")));
        }
        let rewrite = |seg: &Vec<f64>| -> Vec<f64> {
            let mut out = vec![0.0; new_width];
            for (j, &c) in seg.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                for &(k, a) in &map[j] {
                    out[k] += c * a;
                }
            }
            out
        };
        let mut blocks = self.blocks.clone();
        blocks.widths[stage] = new_width;
        for block in blocks.nodes.values_mut() {
            for segs in block.objectives.iter_mut() {
                if let Some(seg) = segs.get_mut(stage) {
                    *seg = rewrite(seg);
                }
            }
            for row in block.rows.iter_mut() {
                if let Some(seg) = row.segments.get_mut(stage) {
                    *seg = rewrite(seg);
                }
            }
        }
        let mut var_labels = self.var_labels.clone();
        var_labels[stage] = labels;
        Ok(MSMOModel::assemble(self.tree.clone(), blocks, self.m, self.senses.clone())?
            .with_scoring(self.scoring)
            .with_nonnegative(self.nonnegative)
            .with_var_labels(var_labels)
            .with_objective_names(self.objective_names.clone()))
    }

    /// Same tree, senses, scoring, sign restriction and coefficient blocks
    /// (labels are ignored). Coefficients are compared exactly.
    pub fn structurally_equal(&self, other: &MSMOModel) -> bool {
        self.tree == other.tree
            && self.m == other.m
            && self.senses == other.senses
            && self.scoring == other.scoring
            && self.nonnegative == other.nonnegative
            && self.blocks == other.blocks
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}
