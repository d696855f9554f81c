//! Discrete-event execution of an instance on a homogeneous cluster.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::dag::Dag;
use crate::num::Real;
use crate::wfformat::WorkflowInstance;

pub const JOULES_PER_KWH: f64 = 3.6e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("task `{task}` needs {cores} cores but nodes have {capacity}")]
    TaskTooWide { task: String, cores: u32, capacity: u32 },
    #[error("invalid platform: {0}")]
    InvalidPlatform(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Platform<T> {
    pub nodes: u32,
    pub cores_per_node: u32,
    pub core_speed_factor: T,
    /// Bytes per second; `None` makes transfers free.
    pub wan_bandwidth: Option<T>,
    /// Watts per powered node.
    pub p_static: T,
    /// Watts per busy core.
    pub p_core: T,
}

impl<T: Real> Default for Platform<T> {
    fn default() -> Self {
        Platform {
            nodes: 4,
            cores_per_node: 48,
            core_speed_factor: T::one(),
            wan_bandwidth: None,
            p_static: T::lit(95.0),
            p_core: T::lit(3.0),
        }
    }
}

impl<T: Real> Platform<T> {
    pub fn check(&self) -> Result<(), SimError> {
        let bad = |what: &str| Err(SimError::InvalidPlatform(what.to_string()));
        if self.nodes == 0 {
            return bad("nodes must be positive");
        }
        if self.cores_per_node == 0 {
            return bad("cores per node must be positive");
        }
        if !(self.core_speed_factor > T::zero()) || !self.core_speed_factor.is_finite() {
            return bad("core speed factor must be positive");
        }
        if let Some(b) = self.wan_bandwidth {
            if !(b > T::zero()) {
                return bad("bandwidth must be positive");
            }
        }
        if !(self.p_static >= T::zero()) || !(self.p_core >= T::zero()) {
            return bad("power terms must be non-negative");
        }
        Ok(())
    }

    pub fn total_cores(&self) -> u64 {
        self.nodes as u64 * self.cores_per_node as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaskSlot<T> {
    pub start: T,
    pub end: T,
    pub node: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport<T> {
    pub makespan: T,
    pub per_task: BTreeMap<String, TaskSlot<T>>,
    pub node_busy_core_seconds: Vec<T>,
    pub energy_kwh: T,
    pub utilization: T,
}

impl<T: Real> SimReport<T> {
    pub fn busy_core_seconds(&self) -> T {
        self.node_busy_core_seconds.iter().copied().sum()
    }
}

/// Total order on times; NaN never reaches the queue.
#[derive(Debug, Clone, Copy, PartialEq)]
struct At<T>(T);

impl<T: Real> Eq for At<T> {}

impl<T: Real> PartialOrd for At<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for At<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).unwrap_or(Ordering::Equal)
    }
}

/// Greedy list scheduling.
///
/// Whenever cores free up, ready tasks are visited by (ready time, id) and
/// each is started on the node with the most free cores if it fits there.
/// A task that does not fit is passed over for this round.
pub fn simulate<T: Real>(w: &WorkflowInstance, p: &Platform<T>) -> Result<SimReport<T>, SimError> {
    p.check()?;
    let dag = Dag::build(w).map_err(|e| SimError::InvalidInstance(e.to_string()))?;
    for t in &w.tasks {
        if t.cores > p.cores_per_node {
            return Err(SimError::TaskTooWide {
                task: t.id.clone(),
                cores: t.cores,
                capacity: p.cores_per_node,
            });
        }
    }

    let n = w.len();
    let producer: HashMap<&str, usize> = w
        .tasks
        .iter()
        .enumerate()
        .flat_map(|(i, t)| t.output_files.iter().map(move |f| (f.name.as_str(), i)))
        .collect();

    let mut free = vec![p.cores_per_node; p.nodes as usize];
    let mut busy = vec![T::zero(); p.nodes as usize];
    let mut waiting: Vec<usize> = (0..n).map(|i| dag.parents(i).len()).collect();
    let mut ready_at = vec![T::zero(); n];
    let mut slots: Vec<Option<TaskSlot<T>>> = vec![None; n];
    let mut ready: Vec<usize> = (0..n).filter(|&i| waiting[i] == 0).collect();
    let mut events: BinaryHeap<Reverse<(At<T>, usize)>> = BinaryHeap::new();
    let mut now = T::zero();
    let mut done = 0usize;

    loop {
        ready.sort_by(|&a, &b| At(ready_at[a]).cmp(&At(ready_at[b])).then_with(|| w.tasks[a].id.cmp(&w.tasks[b].id)));
        let mut deferred = Vec::new();
        for (k, &i) in ready.iter().enumerate() {
            let (node, &most) = free
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(&a.0)))
                .expect("at least one node");
            if most == 0 {
                deferred.extend_from_slice(&ready[k..]);
                break;
            }
            let task = &w.tasks[i];
            if task.cores > most {
                deferred.push(i);
                continue;
            }
            let mut duration = T::lit(task.runtime) * p.core_speed_factor;
            if let Some(bw) = p.wan_bandwidth {
                let moved: u64 = task
                    .input_files
                    .iter()
                    .filter(|f| match producer.get(f.name.as_str()) {
                        Some(&j) => slots[j].is_none_or(|s| s.node as usize != node),
                        None => true,
                    })
                    .map(|f| f.size)
                    .sum();
                duration = duration + T::lit(moved as f64) / bw;
            }
            free[node] -= task.cores;
            busy[node] = busy[node] + duration * T::lit(task.cores as f64);
            let end = now + duration;
            slots[i] = Some(TaskSlot {
                start: now,
                end,
                node: node as u32,
            });
            events.push(Reverse((At(end), i)));
        }
        ready = deferred;

        let Some(Reverse((At(t), _))) = events.peek().copied() else {
            break;
        };
        now = t;
        while let Some(&Reverse((At(t), i))) = events.peek() {
            if t > now {
                break;
            }
            events.pop();
            done += 1;
            let s = slots[i].expect("finished task was started");
            free[s.node as usize] += w.tasks[i].cores;
            for &c in dag.children(i) {
                waiting[c] -= 1;
                if waiting[c] == 0 {
                    ready_at[c] = now;
                    ready.push(c);
                }
            }
        }
    }
    debug_assert_eq!(done, n);

    let makespan = slots.iter().flatten().map(|s| s.end).fold(T::zero(), T::max);
    let per_task = w
        .tasks
        .iter()
        .zip(&slots)
        .map(|(t, s)| (t.id.clone(), s.expect("every task scheduled")))
        .collect();
    let capacity = T::lit(p.total_cores() as f64) * makespan;
    let mut report = SimReport {
        makespan,
        per_task,
        node_busy_core_seconds: busy,
        energy_kwh: T::zero(),
        utilization: T::zero(),
    };
    if capacity > T::zero() {
        report.utilization = (report.busy_core_seconds() / capacity).min(T::one());
    }
    report.energy_kwh = estimate_energy(&report, p);
    Ok(report)
}

/// Static draw of every node over the makespan plus per-core dynamic draw
/// over busy time, in kWh.
pub fn estimate_energy<T: Real>(report: &SimReport<T>, p: &Platform<T>) -> T {
    let joules = T::lit(p.nodes as f64) * p.p_static * report.makespan + p.p_core * report.busy_core_seconds();
    joules / T::lit(JOULES_PER_KWH)
}

/// Longest root-to-sink runtime sum, scaled by the core speed factor.
pub fn critical_path<T: Real>(w: &WorkflowInstance, speed: T) -> Result<T, SimError> {
    let dag = Dag::build(w).map_err(|e| SimError::InvalidInstance(e.to_string()))?;
    let mut finish = vec![T::zero(); w.len()];
    for &i in dag.topo_order() {
        let start = dag.parents(i).iter().map(|&q| finish[q]).fold(T::zero(), T::max);
        finish[i] = start + T::lit(w.tasks[i].runtime) * speed;
    }
    Ok(finish.into_iter().fold(T::zero(), T::max))
}

/// Σ runtime × speed × cores.
pub fn total_work<T: Real>(w: &WorkflowInstance, speed: T) -> T {
    w.tasks
        .iter()
        .map(|t| T::lit(t.runtime) * speed * T::lit(t.cores as f64))
        .sum()
}
