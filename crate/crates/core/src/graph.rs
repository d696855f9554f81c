//! Structural type hashes.
//!
//! Each task gets three digests:
//!
//! * `top`    = H('T' ‖ type ‖ sorted multiset of the parents' `top`)
//! * `bottom` = H('B' ‖ type ‖ sorted multiset of the children's `bottom`)
//! * `type`   = H('H' ‖ top ‖ bottom)
//!
//! `H` is SHA-256 over a length-prefixed encoding (little-endian `u64`
//! lengths). Task ids never enter a digest, so the hashes are invariant
//! under relabeling and under reordering of parent lists.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dag::{Dag, DagError};
use crate::wfformat::WorkflowInstance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("cyclic graph: {0}")]
    CyclicGraph(String),
    #[error(transparent)]
    Structure(DagError),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
}

impl From<DagError> for GraphError {
    fn from(e: DagError) -> Self {
        match e {
            DagError::Cycle(id) => GraphError::CyclicGraph(id),
            other => GraphError::Structure(other),
        }
    }
}

/// 256-bit structural digest; orders and prints as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeHash(pub [u8; 32]);

impl TypeHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for TypeHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for TypeHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TypeHash({})", &self.to_hex()[..12])
    }
}

impl Serialize for TypeHash {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

const TOP_TAG: u8 = b'T';
const BOTTOM_TAG: u8 = b'B';
const TYPE_TAG: u8 = b'H';

fn node_digest(tag: u8, task_type: &str, mut related: Vec<TypeHash>) -> TypeHash {
    related.sort_unstable();
    let mut h = Sha256::new();
    h.update([tag]);
    h.update((task_type.len() as u64).to_le_bytes());
    h.update(task_type.as_bytes());
    h.update((related.len() as u64).to_le_bytes());
    for r in &related {
        h.update(r.0);
    }
    TypeHash(h.finalize().into())
}

fn combine(top: &TypeHash, bottom: &TypeHash) -> TypeHash {
    let mut h = Sha256::new();
    h.update([TYPE_TAG]);
    h.update(top.0);
    h.update(bottom.0);
    TypeHash(h.finalize().into())
}

/// An instance together with its per-task digests, indexed by task position.
#[derive(Debug, Clone)]
pub struct HashedWorkflow<'a> {
    instance: &'a WorkflowInstance,
    dag: Dag,
    top: Vec<TypeHash>,
    bottom: Vec<TypeHash>,
    types: Vec<TypeHash>,
}

impl<'a> HashedWorkflow<'a> {
    pub fn instance(&self) -> &'a WorkflowInstance {
        self.instance
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn type_hash_at(&self, i: usize) -> TypeHash {
        self.types[i]
    }

    pub fn type_hash(&self, id: &str) -> Option<TypeHash> {
        self.dag.index_of(id).map(|i| self.types[i])
    }

    pub fn top_hash(&self, id: &str) -> Option<TypeHash> {
        self.dag.index_of(id).map(|i| self.top[i])
    }

    pub fn bottom_hash(&self, id: &str) -> Option<TypeHash> {
        self.dag.index_of(id).map(|i| self.bottom[i])
    }

    pub fn type_hashes(&self) -> &[TypeHash] {
        &self.types
    }

    /// Number of tasks carrying each type hash.
    pub fn hash_counts(&self) -> BTreeMap<TypeHash, usize> {
        let mut counts = BTreeMap::new();
        for h in &self.types {
            *counts.entry(*h).or_insert(0) += 1;
        }
        counts
    }

    /// Type hash of a sub-graph given by task positions.
    pub fn signature_of(&self, members: impl IntoIterator<Item = usize>) -> BTreeSet<TypeHash> {
        members.into_iter().map(|i| self.types[i]).collect()
    }
}

/// Computes top, bottom and combined hashes in one forward and one backward
/// pass over a topological order.
pub fn compute_type_hashes(w: &WorkflowInstance) -> Result<HashedWorkflow<'_>, GraphError> {
    let dag = Dag::build(w)?;
    let n = dag.len();
    let zero = TypeHash([0; 32]);
    let mut top = vec![zero; n];
    let mut bottom = vec![zero; n];
    for &i in dag.topo_order() {
        let related = dag.parents(i).iter().map(|&p| top[p]).collect();
        top[i] = node_digest(TOP_TAG, &w.tasks[i].task_type, related);
    }
    for &i in dag.topo_order().iter().rev() {
        let related = dag.children(i).iter().map(|&c| bottom[c]).collect();
        bottom[i] = node_digest(BOTTOM_TAG, &w.tasks[i].task_type, related);
    }
    let types = top.iter().zip(&bottom).map(|(t, b)| combine(t, b)).collect();
    Ok(HashedWorkflow {
        instance: w,
        dag,
        top,
        bottom,
        types,
    })
}

/// The deduplicated set of member type hashes.
pub fn subgraph_type_hash<'s, I>(hw: &HashedWorkflow<'_>, tasks: I) -> Result<BTreeSet<TypeHash>, GraphError>
where
    I: IntoIterator<Item = &'s str>,
{
    tasks
        .into_iter()
        .map(|id| hw.type_hash(id).ok_or_else(|| GraphError::UnknownTask(id.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfformat::Task;

    fn fork() -> WorkflowInstance {
        WorkflowInstance::new(
            "fork",
            vec![
                Task::new("r", "root", 1.0),
                Task::new("a1", "a", 1.0).with_parents(["r"]),
                Task::new("a2", "a", 1.0).with_parents(["r"]),
                Task::new("b", "b", 1.0).with_parents(["r"]),
            ],
        )
    }

    // Independent evaluation of the recursive definition for the fork graph.
    fn sha(parts: &[&[u8]]) -> [u8; 32] {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        h.finalize().into()
    }

    fn leaf(tag: u8, ty: &str, related: &[[u8; 32]]) -> [u8; 32] {
        let mut rel = related.to_vec();
        rel.sort();
        let mut buf = vec![tag];
        buf.extend((ty.len() as u64).to_le_bytes());
        buf.extend(ty.as_bytes());
        buf.extend((rel.len() as u64).to_le_bytes());
        for r in rel {
            buf.extend(r);
        }
        sha(&[&buf])
    }

    #[test]
    fn fork_hashes_match_hand_evaluation() {
        let w = fork();
        let hw = compute_type_hashes(&w).unwrap();

        let top_r = leaf(b'T', "root", &[]);
        let top_a = leaf(b'T', "a", &[top_r]);
        let top_b = leaf(b'T', "b", &[top_r]);
        let bot_a = leaf(b'B', "a", &[]);
        let bot_b = leaf(b'B', "b", &[]);
        let bot_r = leaf(b'B', "root", &[bot_a, bot_a, bot_b]);
        let ty = |t: [u8; 32], b: [u8; 32]| sha(&[b"H", &t, &b]);

        assert_eq!(hw.type_hash("r").unwrap().0, ty(top_r, bot_r));
        assert_eq!(hw.type_hash("a1").unwrap().0, ty(top_a, bot_a));
        assert_eq!(hw.type_hash("a2").unwrap().0, ty(top_a, bot_a));
        assert_eq!(hw.type_hash("b").unwrap().0, ty(top_b, bot_b));

        let a = hw.type_hash("a1").unwrap();
        assert_ne!(a, hw.type_hash("b").unwrap());
        assert_ne!(a, hw.type_hash("r").unwrap());
    }

    #[test]
    fn equal_leaves_equal_hash_distinct_types_differ() {
        let w = fork();
        let hw = compute_type_hashes(&w).unwrap();
        assert_eq!(hw.type_hash("a1"), hw.type_hash("a2"));

        let mut w2 = fork();
        w2.tasks[2].task_type = "c".into();
        let hw2 = compute_type_hashes(&w2).unwrap();
        assert_ne!(hw2.type_hash("a1"), hw2.type_hash("a2"));
    }

    #[test]
    fn subgraph_hash_sets() {
        let w = fork();
        let hw = compute_type_hashes(&w).unwrap();
        assert!(subgraph_type_hash(&hw, std::iter::empty()).unwrap().is_empty());
        let all = subgraph_type_hash(&hw, ["r", "a1", "a2", "b"]).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(
            subgraph_type_hash(&hw, ["a1"]).unwrap(),
            subgraph_type_hash(&hw, ["a2"]).unwrap()
        );
        assert_eq!(
            subgraph_type_hash(&hw, ["zz"]).unwrap_err(),
            GraphError::UnknownTask("zz".into())
        );
    }

    #[test]
    fn cycles_rejected() {
        let w = WorkflowInstance::new(
            "cyc",
            vec![
                Task::new("A", "a", 1.0).with_parents(["B"]),
                Task::new("B", "b", 1.0).with_parents(["A"]),
            ],
        );
        assert!(matches!(compute_type_hashes(&w), Err(GraphError::CyclicGraph(_))));
    }

    #[test]
    fn chain_ancestors() {
        let text = r#"{"name":"c","workflow":{"tasks":[
            {"id":"t1","name":"a","runtimeInSeconds":1},
            {"id":"t2","name":"b","runtimeInSeconds":1,"parents":["t1"]},
            {"id":"t3","name":"c","runtimeInSeconds":1,"parents":["t2"]}]}}"#;
        let w = crate::wfformat::parse_instance(text).unwrap();
        let dag = Dag::build(&w).unwrap();
        let anc: Vec<&str> = dag.ancestors(2).into_iter().map(|i| w.tasks[i].id.as_str()).collect();
        assert_eq!(anc, ["t1", "t2"]);
    }

    #[test]
    fn hex_rendering() {
        let h = TypeHash([0xab; 32]);
        assert_eq!(h.to_string().len(), 64);
        assert!(h.to_string().starts_with("abab"));
    }
}
