//! Repeating pattern discovery.
//!
//! Two tasks with equal type hash seed two sets that grow in lock-step by
//! absorbing every parent and child of their members; whatever both sets
//! reach is removed from both. When neither set grows any more, the two sets
//! are recorded as occurrences of one pattern.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::dag::Dag;
use crate::graph::{GraphError, HashedWorkflow, TypeHash};
use crate::wfformat::WorkflowInstance;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternOccurrence {
    /// Sorted task ids.
    pub tasks: Vec<String>,
    #[serde(skip)]
    pub signature: BTreeSet<TypeHash>,
    /// Members without a parent inside the occurrence.
    pub entry_tasks: Vec<String>,
    /// Members without a child inside the occurrence.
    pub exit_tasks: Vec<String>,
}

impl PatternOccurrence {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct PatternCatalog {
    pub instance_name: String,
    /// Each group holds at least two disjoint occurrences with one signature.
    pub patterns: Vec<Vec<PatternOccurrence>>,
}

impl PatternCatalog {
    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn occurrences(&self) -> impl Iterator<Item = &PatternOccurrence> {
        self.patterns.iter().flatten()
    }

    pub fn occurrence_count(&self) -> usize {
        self.patterns.iter().map(Vec::len).sum()
    }

    pub fn largest_occurrence(&self) -> usize {
        self.occurrences().map(PatternOccurrence::len).max().unwrap_or(0)
    }

    /// Groups → occurrences → sorted task ids.
    pub fn to_id_groups(&self) -> Vec<Vec<Vec<String>>> {
        self.patterns
            .iter()
            .map(|g| g.iter().map(|o| o.tasks.clone()).collect())
            .collect()
    }

    /// Rebuilds a catalog from id groups, recomputing signatures and
    /// entry/exit sets against `hw`.
    pub fn from_id_groups(hw: &HashedWorkflow<'_>, groups: &[Vec<Vec<String>>]) -> Result<Self, GraphError> {
        let patterns = groups
            .iter()
            .map(|g| g.iter().map(|ids| occurrence_from_ids(hw, ids)).collect())
            .collect::<Result<_, _>>()?;
        Ok(Self {
            instance_name: hw.instance().name.clone(),
            patterns,
        })
    }
}

pub fn occurrence_from_ids(hw: &HashedWorkflow<'_>, ids: &[String]) -> Result<PatternOccurrence, GraphError> {
    let members = ids
        .iter()
        .map(|id| hw.dag().index_of(id).ok_or_else(|| GraphError::UnknownTask(id.clone())))
        .collect::<Result<BTreeSet<usize>, _>>()?;
    Ok(build_occurrence(hw, &members))
}

fn build_occurrence(hw: &HashedWorkflow<'_>, members: &BTreeSet<usize>) -> PatternOccurrence {
    let dag = hw.dag();
    let tasks = &hw.instance().tasks;
    let sorted = |set: Vec<usize>| {
        let mut ids: Vec<String> = set.into_iter().map(|i| tasks[i].id.clone()).collect();
        ids.sort();
        ids
    };
    let entry = members
        .iter()
        .copied()
        .filter(|&i| !dag.parents(i).iter().any(|p| members.contains(p)))
        .collect();
    let exit = members
        .iter()
        .copied()
        .filter(|&i| !dag.children(i).iter().any(|c| members.contains(c)))
        .collect();
    PatternOccurrence {
        tasks: sorted(members.iter().copied().collect()),
        signature: hw.signature_of(members.iter().copied()),
        entry_tasks: sorted(entry),
        exit_tasks: sorted(exit),
    }
}

/// Finds disjoint pattern occurrences.
///
/// Seed pairs are visited by ascending type hash, then by ascending task id.
/// A task claimed by an earlier occurrence is neither used as a seed nor
/// absorbed by later growth. Pairs whose result is disconnected, spans the
/// whole graph, or fails signature equality are dropped.
pub fn find_pattern_occurrences(hw: &HashedWorkflow<'_>) -> PatternCatalog {
    let dag = hw.dag();
    let tasks = &hw.instance().tasks;
    let n = dag.len();

    let mut by_hash: BTreeMap<TypeHash, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        by_hash.entry(hw.type_hash_at(i)).or_default().push(i);
    }

    let mut claimed = vec![false; n];
    let mut groups: Vec<(BTreeSet<TypeHash>, Vec<PatternOccurrence>)> = Vec::new();

    for seeds in by_hash.values_mut() {
        if seeds.len() < 2 {
            continue;
        }
        seeds.sort_by(|&a, &b| tasks[a].id.cmp(&tasks[b].id));
        for x in 0..seeds.len() {
            for y in (x + 1)..seeds.len() {
                let (t1, t2) = (seeds[x], seeds[y]);
                if claimed[t1] || claimed[t2] {
                    continue;
                }
                let (s1, s2) = grow_pair(dag, &claimed, t1, t2);
                if !acceptable(dag, hw, &s1, &s2) {
                    continue;
                }
                for &i in s1.iter().chain(&s2) {
                    claimed[i] = true;
                }
                let o1 = build_occurrence(hw, &s1);
                let o2 = build_occurrence(hw, &s2);
                match groups.iter_mut().find(|(sig, _)| *sig == o1.signature) {
                    Some((_, occs)) => occs.extend([o1, o2]),
                    None => groups.push((o1.signature.clone(), vec![o1, o2])),
                }
            }
        }
    }

    PatternCatalog {
        instance_name: hw.instance().name.clone(),
        patterns: groups.into_iter().map(|(_, occs)| occs).collect(),
    }
}

fn grow_pair(dag: &Dag, claimed: &[bool], t1: usize, t2: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let mut s1 = BTreeSet::from([t1]);
    let mut s2 = BTreeSet::from([t2]);
    // Round cap: sets can trade tasks through the intersection removal.
    for _ in 0..dag.len() {
        let mut g1 = expand(dag, claimed, &s1);
        let mut g2 = expand(dag, claimed, &s2);
        let shared: Vec<usize> = g1.intersection(&g2).copied().collect();
        for i in &shared {
            g1.remove(i);
            g2.remove(i);
        }
        let grew = g1.len() > s1.len() || g2.len() > s2.len();
        s1 = g1;
        s2 = g2;
        if !grew {
            break;
        }
    }
    (s1, s2)
}

fn expand(dag: &Dag, claimed: &[bool], set: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut out = set.clone();
    for &i in set {
        for &j in dag.parents(i).iter().chain(dag.children(i)) {
            if !claimed[j] {
                out.insert(j);
            }
        }
    }
    out
}

fn acceptable(dag: &Dag, hw: &HashedWorkflow<'_>, s1: &BTreeSet<usize>, s2: &BTreeSet<usize>) -> bool {
    !s1.is_empty()
        && !s2.is_empty()
        && s1.len() < dag.len()
        && s2.len() < dag.len()
        && weakly_connected(dag, s1)
        && weakly_connected(dag, s2)
        && hw.signature_of(s1.iter().copied()) == hw.signature_of(s2.iter().copied())
}

pub(crate) fn weakly_connected(dag: &Dag, set: &BTreeSet<usize>) -> bool {
    let Some(&start) = set.iter().next() else {
        return false;
    };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(i) = stack.pop() {
        for &j in dag.parents(i).iter().chain(dag.children(i)) {
            if set.contains(&j) && seen.insert(j) {
                stack.push(j);
            }
        }
    }
    seen.len() == set.len()
}

/// External parents of the entry tasks and external children of the exit tasks.
pub fn occurrence_boundary(
    w: &WorkflowInstance,
    occ: &PatternOccurrence,
) -> Result<(BTreeSet<String>, BTreeSet<String>), GraphError> {
    let dag = Dag::build(w)?;
    let members = occ
        .tasks
        .iter()
        .map(|id| dag.index_of(id).ok_or_else(|| GraphError::UnknownTask(id.clone())))
        .collect::<Result<BTreeSet<usize>, _>>()?;
    let ids = |v: &str| dag.index_of(v).ok_or_else(|| GraphError::UnknownTask(v.to_string()));
    let mut parents = BTreeSet::new();
    for e in &occ.entry_tasks {
        for &p in dag.parents(ids(e)?) {
            if !members.contains(&p) {
                parents.insert(w.tasks[p].id.clone());
            }
        }
    }
    let mut children = BTreeSet::new();
    for x in &occ.exit_tasks {
        for &c in dag.children(ids(x)?) {
            if !members.contains(&c) {
                children.insert(w.tasks[c].id.clone());
            }
        }
    }
    Ok((parents, children))
}
