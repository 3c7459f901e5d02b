//! Scenario trees: realisation stages, parent-dependent transitions, the
//! enumerated scenario paths and the (objective, path) index space.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub type StateId = String;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("stage count must be at least 2, got {0}")]
    InvalidStageCount(usize),
    #[error("expected state lists for {expected} realisation stages, got {actual}")]
    StageListMismatch { expected: usize, actual: usize },
    #[error("realisation stage {0} has no states")]
    EmptyStage(usize),
    #[error("state {state:?} declared twice at stage {stage}")]
    DuplicateState { stage: usize, state: StateId },
    #[error("state {state:?} at stage {stage} is unreachable from the previous stage")]
    Unreachable { stage: usize, state: StateId },
    #[error("transition {from:?} -> {to:?} references an undeclared state")]
    DanglingTransition { from: StateId, to: StateId },
    #[error("node {prefix:?} at stage {stage} has no successor")]
    DeadEnd { stage: usize, prefix: Vec<StateId> },
    #[error("unknown state {0:?}")]
    UnknownState(StateId),
}

/// Admissible moves between consecutive stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transitions {
    /// One relation used between every pair of stages (and from the root).
    Stationary(BTreeMap<StateId, Vec<StateId>>),
    /// Entry `t` maps stage-`t` states to stage-`t+1` states; entry 0 is keyed
    /// by the root state and is ignored for unanchored trees.
    PerStage(Vec<BTreeMap<StateId, Vec<StateId>>>),
}

impl Transitions {
    fn map_at(&self, t: usize) -> Option<&BTreeMap<StateId, Vec<StateId>>> {
        match self {
            Transitions::Stationary(map) => Some(map),
            Transitions::PerStage(maps) => maps.get(t),
        }
    }

    fn successors(&self, t: usize, state: &str) -> &[StateId] {
        self.map_at(t)
            .and_then(|m| m.get(state))
            .map_or(&[], |v| v.as_slice())
    }

    /// A stationary relation cut down to the given states; per-stage relations are returned unchanged.
    pub fn restricted(&self, states: &[Vec<StateId>], root: Option<&str>) -> Transitions {
        match self {
            Transitions::Stationary(map) => {
                let known: BTreeSet<&str> = states.iter().flatten().map(String::as_str).chain(root).collect();
                let map = map
                    .iter()
                    .filter(|(from, _)| known.contains(from.as_str()))
                    .map(|(from, tos)| {
                        (from.clone(), tos.iter().filter(|to| known.contains(to.as_str())).cloned().collect())
                    })
                    .collect();
                Transitions::Stationary(map)
            }
            Transitions::PerStage(_) => self.clone(),
        }
    }
}

/// A vertex of the scenario tree: the decision point reached after `prefix`
/// has realised. The root has stage 0 and an empty prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub stage: usize,
    pub prefix: Vec<StateId>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScenarioPath {
    /// One state per realisation stage, `k(1), …, k(T-1)`.
    pub states: Vec<StateId>,
    pub index: usize,
}

impl fmt::Display for ScenarioPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.states.join(","))
    }
}

/// An (objective, scored prefix) pair. Both indices are zero-based; `path`
/// indexes the scenario paths in enumeration order (or, for per-stage
/// scoring, the tree nodes in breadth-first order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetaObjectiveId {
    pub objective: usize,
    pub path: usize,
}

impl fmt::Display for MetaObjectiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z{}@s{}", self.objective + 1, self.path + 1)
    }
}

/// Immutable scenario tree. Nodes are stored breadth-first; within a stage
/// they are ordered by parent and then by the declared state order, so leaf
/// order is lexicographic path order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioTree {
    stage_count: usize,
    states: Vec<Vec<StateId>>,
    transitions: Transitions,
    root_state: Option<StateId>,
    nodes: Vec<Node>,
    stage_starts: Vec<usize>,
}

pub fn build_tree(
    stage_count: usize,
    states: Vec<Vec<StateId>>,
    transitions: Transitions,
    root_state: Option<StateId>,
) -> Result<ScenarioTree, TreeError> {
    ScenarioTree::build(stage_count, states, transitions, root_state)
}

pub fn enumerate_paths(tree: &ScenarioTree) -> Vec<ScenarioPath> {
    tree.paths()
}

/// Path-major, objective-minor.
pub fn meta_objectives(tree: &ScenarioTree, m: usize) -> Vec<MetaObjectiveId> {
    (0..tree.path_count())
        .flat_map(|path| (0..m).map(move |objective| MetaObjectiveId { objective, path }))
        .collect()
}

impl ScenarioTree {
    pub fn build(
        stage_count: usize,
        states: Vec<Vec<StateId>>,
        transitions: Transitions,
        root_state: Option<StateId>,
    ) -> Result<Self, TreeError> {
        if stage_count < 2 {
            return Err(TreeError::InvalidStageCount(stage_count));
        }
        if states.len() != stage_count - 1 {
            return Err(TreeError::StageListMismatch { expected: stage_count - 1, actual: states.len() });
        }
        if let Transitions::PerStage(maps) = &transitions {
            if maps.len() != stage_count - 1 {
                return Err(TreeError::StageListMismatch { expected: stage_count - 1, actual: maps.len() });
            }
        }
        for (i, list) in states.iter().enumerate() {
            if list.is_empty() {
                return Err(TreeError::EmptyStage(i + 1));
            }
            let mut seen = BTreeSet::new();
            for s in list {
                if !seen.insert(s) {
                    return Err(TreeError::DuplicateState { stage: i + 1, state: s.clone() });
                }
            }
        }
        check_transitions(&states, &transitions, root_state.as_deref())?;

        // Reachability between consecutive realisation stages.
        for t in 1..stage_count - 1 {
            let reached: BTreeSet<&StateId> = states[t - 1]
                .iter()
                .flat_map(|s| transitions.successors(t, s))
                .collect();
            if let Some(s) = states[t].iter().find(|s| !reached.contains(s)) {
                return Err(TreeError::Unreachable { stage: t + 1, state: s.clone() });
            }
        }

        let mut tree = ScenarioTree {
            stage_count,
            states,
            transitions,
            root_state,
            nodes: Vec::new(),
            stage_starts: Vec::new(),
        };
        tree.expand()?;
        Ok(tree)
    }

    fn expand(&mut self) -> Result<(), TreeError> {
        let mut nodes = vec![Node { stage: 0, prefix: Vec::new(), parent: None, children: Vec::new() }];
        let mut stage_starts = vec![0];
        let mut frontier = 0..1;
        for t in 0..self.stage_count - 1 {
            let next_states = &self.states[t];
            let start = nodes.len();
            for parent in frontier.clone() {
                let allowed: Vec<&StateId> = match (t, &self.root_state) {
                    (0, None) => next_states.iter().collect(),
                    (0, Some(root)) => {
                        let succ = self.transitions.successors(0, root);
                        next_states.iter().filter(|s| succ.contains(s)).collect()
                    }
                    _ => {
                        let here = nodes[parent].prefix.last().expect("non-root node");
                        let succ = self.transitions.successors(t, here);
                        next_states.iter().filter(|s| succ.contains(s)).collect()
                    }
                };
                if allowed.is_empty() {
                    return Err(TreeError::DeadEnd { stage: t, prefix: nodes[parent].prefix.clone() });
                }
                for s in allowed {
                    let mut prefix = nodes[parent].prefix.clone();
                    prefix.push(s.clone());
                    let idx = nodes.len();
                    nodes.push(Node { stage: t + 1, prefix, parent: Some(parent), children: Vec::new() });
                    nodes[parent].children.push(idx);
                }
            }
            stage_starts.push(start);
            frontier = start..nodes.len();
        }
        stage_starts.push(nodes.len());
        self.nodes = nodes;
        self.stage_starts = stage_starts;
        Ok(())
    }

    pub fn stage_count(&self) -> usize {
        self.stage_count
    }

    /// Declared states of realisation stage `t` (1-based).
    pub fn states(&self, t: usize) -> &[StateId] {
        &self.states[t - 1]
    }

    pub fn all_states(&self) -> &[Vec<StateId>] {
        &self.states
    }

    pub fn transitions(&self) -> &Transitions {
        &self.transitions
    }

    pub fn root_state(&self) -> Option<&str> {
        self.root_state.as_deref()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    /// Node indices of stage `t`, a contiguous range.
    pub fn stage_nodes(&self, t: usize) -> std::ops::Range<usize> {
        self.stage_starts[t]..self.stage_starts[t + 1]
    }

    pub fn node_index(&self, prefix: &[StateId]) -> Option<usize> {
        let mut idx = 0;
        for s in prefix {
            idx = *self.nodes[idx].children.iter().find(|&&c| self.nodes[c].prefix.last() == Some(s))?;
        }
        Some(idx)
    }

    /// Node indices from the root down to `node`, inclusive.
    pub fn ancestry(&self, node: usize) -> Vec<usize> {
        let mut chain = vec![node];
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        chain
    }

    pub fn leaves(&self) -> std::ops::Range<usize> {
        self.stage_nodes(self.stage_count - 1)
    }

    pub fn path_count(&self) -> usize {
        self.leaves().len()
    }

    pub fn paths(&self) -> Vec<ScenarioPath> {
        self.leaves()
            .enumerate()
            .map(|(index, leaf)| ScenarioPath { states: self.nodes[leaf].prefix.clone(), index })
            .collect()
    }

    /// Node indices along path `index`, root first.
    pub fn path_nodes(&self, index: usize) -> Vec<usize> {
        self.ancestry(self.leaves().start + index)
    }

    /// Branch counts `p(1), …, p(T-1)` when every node of a stage has the same
    /// number of children.
    pub fn uniform_branching(&self) -> Option<Vec<usize>> {
        (0..self.stage_count - 1)
            .map(|t| {
                let mut counts = self.stage_nodes(t).map(|n| self.nodes[n].children.len());
                let first = counts.next()?;
                counts.all(|c| c == first).then_some(first)
            })
            .collect()
    }

    /// The first `keep` stages of this tree.
    pub fn truncate(&self, keep: usize) -> Result<ScenarioTree, TreeError> {
        if keep < 2 || keep > self.stage_count {
            return Err(TreeError::InvalidStageCount(keep));
        }
        let states = self.states[..keep - 1].to_vec();
        let transitions = match &self.transitions {
            Transitions::Stationary(_) => self.transitions.restricted(&states, self.root_state.as_deref()),
            Transitions::PerStage(maps) => Transitions::PerStage(maps[..keep - 1].to_vec()),
        };
        ScenarioTree::build(keep, states, transitions, self.root_state.clone())
    }

    /// The tree hanging below stage-1 state `k1`, re-rooted at `k1`.
    pub fn subtree(&self, k1: &str) -> Result<ScenarioTree, TreeError> {
        if !self.stage_nodes(1).any(|n| self.nodes[n].prefix[0] == k1) {
            return Err(TreeError::UnknownState(k1.to_string()));
        }
        if self.stage_count < 3 {
            return Err(TreeError::InvalidStageCount(self.stage_count - 1));
        }
        let transitions = match &self.transitions {
            Transitions::Stationary(m) => Transitions::Stationary(m.clone()),
            Transitions::PerStage(maps) => {
                let mut rest = maps[1..].to_vec();
                rest[0].retain(|from, _| from == k1);
                Transitions::PerStage(rest)
            }
        };
        ScenarioTree::build(self.stage_count - 1, self.states[1..].to_vec(), transitions, Some(k1.to_string()))
    }
}

fn check_transitions(
    states: &[Vec<StateId>],
    transitions: &Transitions,
    root: Option<&str>,
) -> Result<(), TreeError> {
    let dangling = |from: &str, to: &str| TreeError::DanglingTransition { from: from.to_string(), to: to.to_string() };
    match transitions {
        Transitions::Stationary(map) => {
            let known: BTreeSet<&str> = states.iter().flatten().map(String::as_str).chain(root).collect();
            for (from, tos) in map {
                if !known.contains(from.as_str()) {
                    return Err(dangling(from, tos.first().map_or("", String::as_str)));
                }
                if let Some(to) = tos.iter().find(|to| !known.contains(to.as_str())) {
                    return Err(dangling(from, to));
                }
            }
        }
        Transitions::PerStage(maps) => {
            for (t, map) in maps.iter().enumerate() {
                if t == 0 && root.is_none() {
                    continue;
                }
                let sources: BTreeSet<&str> = if t == 0 {
                    root.into_iter().collect()
                } else {
                    states[t - 1].iter().map(String::as_str).collect()
                };
                for (from, tos) in map {
                    if !sources.contains(from.as_str()) {
                        return Err(dangling(from, tos.first().map_or("", String::as_str)));
                    }
                    if let Some(to) = tos.iter().find(|to| !states[t].contains(to)) {
                        return Err(dangling(from, to));
                    }
                }
            }
        }
    }
    Ok(())
}
