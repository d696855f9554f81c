//! Index-based view of a workflow's task graph.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::wfformat::WorkflowInstance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DagError {
    #[error("duplicate task id `{0}`")]
    DuplicateId(String),
    #[error("task `{task}` names unknown parent `{parent}`")]
    DanglingParent { task: String, parent: String },
    #[error("dependency cycle through task `{0}`")]
    Cycle(String),
}

/// Adjacency lists keyed by task position in the instance.
///
/// Parent lists are deduplicated; children are the exact transpose.
#[derive(Debug, Clone)]
pub struct Dag {
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Dag {
    pub fn build(w: &WorkflowInstance) -> Result<Self, DagError> {
        let n = w.tasks.len();
        let mut index = HashMap::with_capacity(n);
        for (i, t) in w.tasks.iter().enumerate() {
            if index.insert(t.id.clone(), i).is_some() {
                return Err(DagError::DuplicateId(t.id.clone()));
            }
        }
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (i, t) in w.tasks.iter().enumerate() {
            for p in &t.parents {
                let &j = index.get(p).ok_or_else(|| DagError::DanglingParent {
                    task: t.id.clone(),
                    parent: p.clone(),
                })?;
                if !parents[i].contains(&j) {
                    parents[i].push(j);
                    children[j].push(i);
                }
            }
        }
        let topo = topological_order(&parents, &children).map_err(|i| DagError::Cycle(w.tasks[i].id.clone()))?;
        Ok(Self {
            index,
            parents,
            children,
            topo,
        })
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Kahn order; among ready tasks the one listed first in the instance wins.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Transitive closure of the parent relation, excluding `i` itself.
    pub fn ancestors(&self, i: usize) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = self.parents[i].clone();
        while let Some(x) = stack.pop() {
            if !seen[x] {
                seen[x] = true;
                stack.extend(self.parents[x].iter().copied());
            }
        }
        (0..self.len()).filter(|&x| seen[x]).collect()
    }

    /// Number of edges after parent deduplication.
    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }
}

/// Returns the Kahn order, or the index of some task left on a cycle.
pub(crate) fn topological_order(parents: &[Vec<usize>], children: &[Vec<usize>]) -> Result<Vec<usize>, usize> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).find(|&i| indegree[i] > 0).unwrap_or(0))
    }
}
