#![allow(dead_code)]

use std::collections::HashMap;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use sha2::{Digest, Sha256};
use wfforge::corpus::{family_instances, AppFamily, DEFAULT_SEED};
use wfforge::{Task, WorkflowInstance};

/// Writes straight to the process stdout so the line survives output capture.
pub fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

/// Runs a criterion body, prints its verdict line, then fails the test if needed.
pub fn criterion(tag: &str, title: &str, budget: Duration, body: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let (ok, detail) = match outcome {
        Ok(d) if elapsed <= budget => (true, d),
        Ok(d) => (false, format!("{d}; took {elapsed:.1?}, budget {budget:?}")),
        Err(d) => (false, d),
    };
    let verdict = if ok { "PASS" } else { "FAIL" };
    report(&format!("[{verdict}] {tag} {title}: {detail} ({elapsed:.2?})"));
    assert!(ok, "{tag} failed: {detail}");
}

pub fn corpus() -> Vec<(AppFamily, Vec<WorkflowInstance>)> {
    AppFamily::ALL
        .iter()
        .map(|&f| (f, family_instances(f, DEFAULT_SEED)))
        .collect()
}

/// Random DAG: each task picks up to `max_parents` parents among earlier tasks.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, types: &[&str], max_parents: usize) -> WorkflowInstance {
    let tasks = (0..n)
        .map(|i| {
            let ty = types[rng.random_range(0..types.len())];
            let k = if i == 0 { 0 } else { rng.random_range(0..=max_parents.min(i)) };
            let mut parents: Vec<usize> = (0..i).collect();
            parents.shuffle(rng);
            parents.truncate(k);
            Task::new(format!("t{i:02}"), ty, 1.0 + i as f64).with_parents(parents.into_iter().map(|p| format!("t{p:02}")))
        })
        .collect();
    WorkflowInstance::new("random", tasks)
}

/// A root and sink with `copies` identical random blocks hung between them,
/// plus a few unrelated tasks. Yields non-trivial pattern groups.
pub fn replicated_dag<R: Rng>(rng: &mut R, block: usize, copies: usize, extra: usize) -> WorkflowInstance {
    let shape = random_dag(rng, block, &["a", "b", "c"], 2);
    let mut tasks = vec![Task::new("root", "r", 1.0)];
    let mut exits = Vec::new();
    for c in 0..copies {
        for t in &shape.tasks {
            let id = format!("{}c{c}", t.id);
            let parents: Vec<String> = if t.parents.is_empty() {
                vec!["root".into()]
            } else {
                t.parents.iter().map(|p| format!("{p}c{c}")).collect()
            };
            if t.children().is_empty() {
                exits.push(id.clone());
            }
            tasks.push(Task::new(id, t.task_type.clone(), 1.0).with_parents(parents));
        }
    }
    tasks.push(Task::new("sink", "s", 1.0).with_parents(exits));
    for e in 0..extra {
        let parent = tasks[rng.random_range(0..tasks.len())].id.clone();
        tasks.push(Task::new(format!("x{e}"), "x", 1.0).with_parents([parent]));
    }
    WorkflowInstance::new("replicated", tasks)
}

/// Fresh ids, shuffled task order and shuffled parent lists.
pub fn relabel<R: Rng>(w: &WorkflowInstance, rng: &mut R) -> (WorkflowInstance, HashMap<String, String>) {
    let mut fresh: Vec<usize> = (0..w.len()).collect();
    fresh.shuffle(rng);
    let map: HashMap<String, String> = w
        .tasks
        .iter()
        .zip(&fresh)
        .map(|(t, k)| (t.id.clone(), format!("n{k}_{}", rng.random_range(0..1000))))
        .collect();
    let mut tasks: Vec<Task> = w
        .tasks
        .iter()
        .map(|t| {
            let mut parents: Vec<String> = t.parents.iter().map(|p| map[p].clone()).collect();
            parents.shuffle(rng);
            let mut c = Task::new(map[&t.id].clone(), t.task_type.clone(), t.runtime).with_parents(parents);
            c.cores = t.cores;
            c
        })
        .collect();
    tasks.shuffle(rng);
    (WorkflowInstance::new(format!("{}-relabelled", w.name), tasks), map)
}

/// Type hashes by memoised recursion over parents and children.
pub fn oracle_type_hashes(w: &WorkflowInstance) -> HashMap<String, [u8; 32]> {
    let by_id: HashMap<&str, &Task> = w.tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
    for t in &w.tasks {
        for p in &t.parents {
            children.entry(p.as_str()).or_default().push(t.id.as_str());
        }
    }

    fn digest(tag: u8, ty: &str, mut related: Vec<[u8; 32]>) -> [u8; 32] {
        related.sort();
        let mut h = Sha256::new();
        h.update([tag]);
        h.update((ty.len() as u64).to_le_bytes());
        h.update(ty.as_bytes());
        h.update((related.len() as u64).to_le_bytes());
        for r in related {
            h.update(r);
        }
        h.finalize().into()
    }

    fn up<'a>(id: &'a str, by_id: &HashMap<&'a str, &'a Task>, memo: &mut HashMap<&'a str, [u8; 32]>) -> [u8; 32] {
        if let Some(h) = memo.get(id) {
            return *h;
        }
        let t = by_id[id];
        let rel = t.parents.iter().map(|p| up(p.as_str(), by_id, memo)).collect();
        let h = digest(b'T', &t.task_type, rel);
        memo.insert(id, h);
        h
    }

    fn down<'a>(
        id: &'a str,
        by_id: &HashMap<&'a str, &'a Task>,
        children: &HashMap<&'a str, Vec<&'a str>>,
        memo: &mut HashMap<&'a str, [u8; 32]>,
    ) -> [u8; 32] {
        if let Some(h) = memo.get(id) {
            return *h;
        }
        let kids = children.get(id).cloned().unwrap_or_default();
        let rel = kids.into_iter().map(|c| down(c, by_id, children, memo)).collect();
        let h = digest(b'B', &by_id[id].task_type, rel);
        memo.insert(id, h);
        h
    }

    let (mut tops, mut bottoms) = (HashMap::new(), HashMap::new());
    w.tasks
        .iter()
        .map(|t| {
            let top = up(&t.id, &by_id, &mut tops);
            let bottom = down(&t.id, &by_id, &children, &mut bottoms);
            let mut h = Sha256::new();
            h.update(b"H");
            h.update(top);
            h.update(bottom);
            (t.id.clone(), h.finalize().into())
        })
        .collect()
}
