//! Realism metrics: type hash frequency (THF) and makespan relative difference.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{compute_type_hashes, GraphError, TypeHash};
use crate::num::Real;
use crate::wfformat::WorkflowInstance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("workflow `{0}` has no tasks")]
    EmptyWorkflow(String),
    #[error("reference makespan must be positive")]
    ZeroReference,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThfScore<T> {
    #[serde(rename = "thf")]
    pub value: T,
    #[serde(rename = "universe")]
    pub hash_universe_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThfMode {
    /// Counts divided by task count.
    #[default]
    Normalized,
    /// Raw per-hash task counts.
    RawCounts,
}

/// RMSE between the type-hash frequency vectors of two instances, taken over
/// the union of hashes present in either. Symmetric; 0 for identical graphs.
pub fn thf<T: Real>(a: &WorkflowInstance, b: &WorkflowInstance) -> Result<ThfScore<T>, MetricsError> {
    thf_with_mode(a, b, ThfMode::Normalized)
}

pub fn thf_with_mode<T: Real>(
    a: &WorkflowInstance,
    b: &WorkflowInstance,
    mode: ThfMode,
) -> Result<ThfScore<T>, MetricsError> {
    for w in [a, b] {
        if w.is_empty() {
            return Err(MetricsError::EmptyWorkflow(w.name.clone()));
        }
    }
    let ca = compute_type_hashes(a)?.hash_counts();
    let cb = compute_type_hashes(b)?.hash_counts();
    Ok(rmse_of_counts(&ca, a.len(), &cb, b.len(), mode))
}

/// Same RMSE over arbitrary keys, e.g. precomputed hash counts.
pub fn rmse_of_counts<K: Ord, T: Real>(
    ca: &BTreeMap<K, usize>,
    na: usize,
    cb: &BTreeMap<K, usize>,
    nb: usize,
    mode: ThfMode,
) -> ThfScore<T> {
    let universe: BTreeSet<&K> = ca.keys().chain(cb.keys()).collect();
    let (da, db) = match mode {
        ThfMode::Normalized => (T::from_usize_lossy(na), T::from_usize_lossy(nb)),
        ThfMode::RawCounts => (T::one(), T::one()),
    };
    let sum: T = universe
        .iter()
        .map(|k| {
            let fa = T::from_usize_lossy(ca.get(k).copied().unwrap_or(0)) / da;
            let fb = T::from_usize_lossy(cb.get(k).copied().unwrap_or(0)) / db;
            (fa - fb) * (fa - fb)
        })
        .sum();
    let value = if universe.is_empty() {
        T::zero()
    } else {
        (sum / T::from_usize_lossy(universe.len())).sqrt()
    };
    ThfScore {
        value,
        hash_universe_size: universe.len(),
    }
}

/// Frequency RMSE over task type names (structure-blind counterpart of THF).
pub fn type_frequency_rmse<T: Real>(a: &WorkflowInstance, b: &WorkflowInstance) -> Result<T, MetricsError> {
    for w in [a, b] {
        if w.is_empty() {
            return Err(MetricsError::EmptyWorkflow(w.name.clone()));
        }
    }
    Ok(rmse_of_counts(&type_counts(a), a.len(), &type_counts(b), b.len(), ThfMode::Normalized).value)
}

fn type_counts(w: &WorkflowInstance) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for t in &w.tasks {
        *m.entry(t.task_type.as_str()).or_insert(0) += 1;
    }
    m
}

/// Type-hash counts of an instance, for repeated comparisons.
pub fn hash_counts(w: &WorkflowInstance) -> Result<BTreeMap<TypeHash, usize>, MetricsError> {
    Ok(compute_type_hashes(w)?.hash_counts())
}

/// |simulated − reference| / reference.
pub fn makespan_rel_diff<T: Real>(simulated: T, reference: T) -> Result<T, MetricsError> {
    if !(reference > T::zero()) {
        return Err(MetricsError::ZeroReference);
    }
    Ok((simulated - reference).abs() / reference)
}
