//! Synthetic instance generation by pattern-occurrence replication.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dag::Dag;
use crate::recipe::{Recipe, TypeStats};
use crate::stats::sample_from;
use crate::wfformat::{FileSpec, Task, WorkflowInstance};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("target of {target} tasks is below the recipe minimum of {min}")]
    TargetTooSmall { target: usize, min: usize },
    #[error("recipe has no pattern occurrences to replicate")]
    EmptyCatalog,
    #[error("recipe has no statistics for task type `{0}`")]
    MissingStats(String),
    #[error("recipe base graph is invalid: {0}")]
    InvalidRecipe(String),
}

#[derive(Debug, Clone, Copy)]
pub struct GenRequest<'a> {
    pub recipe: &'a Recipe,
    pub target_tasks: usize,
    pub seed: u64,
}

/// One original occurrence, resolved to base-graph positions.
struct Template {
    members: Vec<usize>,
    slot: HashMap<usize, usize>,
}

/// Generates an instance with between `min_tasks` and `target_tasks` tasks.
///
/// Occurrences of the recipe's catalog are picked uniformly and copied until
/// the next copy would overshoot the target. A copy keeps the original's
/// internal edges and is wired to the same external parents and children as
/// the original members. Runtimes and sizes are then drawn per task type.
pub fn generate(req: &GenRequest<'_>) -> Result<WorkflowInstance, GenError> {
    let recipe = req.recipe;
    let base = &recipe.base_graph;
    if req.target_tasks < recipe.min_tasks {
        return Err(GenError::TargetTooSmall {
            target: req.target_tasks,
            min: recipe.min_tasks,
        });
    }
    let templates: Vec<Template> = {
        let dag = Dag::build(base).map_err(|e| GenError::InvalidRecipe(e.to_string()))?;
        recipe
            .catalog
            .occurrences()
            .map(|occ| {
                let members: Vec<usize> = occ
                    .tasks
                    .iter()
                    .map(|id| dag.index_of(id).ok_or_else(|| GenError::InvalidRecipe(format!("unknown task `{id}`"))))
                    .collect::<Result<_, _>>()?;
                let slot = members.iter().enumerate().map(|(k, &m)| (m, k)).collect();
                Ok(Template { members, slot })
            })
            .collect::<Result<_, GenError>>()?
    };
    if templates.is_empty() && req.target_tasks > recipe.min_tasks {
        return Err(GenError::EmptyCatalog);
    }

    let base_dag = Dag::build(base).map_err(|e| GenError::InvalidRecipe(e.to_string()))?;
    let mut ids: Vec<String> = base.tasks.iter().map(|t| t.id.clone()).collect();
    let mut origin: Vec<usize> = (0..base.len()).collect();
    let mut parents: Vec<Vec<usize>> = (0..base.len()).map(|i| base_dag.parents(i).to_vec()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut copies = 0usize;
    while !templates.is_empty() {
        let tpl = &templates[rng.random_range(0..templates.len())];
        if ids.len() + tpl.members.len() > req.target_tasks {
            break;
        }
        copies += 1;
        let first = ids.len();
        for &m in &tpl.members {
            ids.push(format!("{}__r{copies}", base.tasks[m].id));
            origin.push(m);
            parents.push(Vec::new());
        }
        for (k, &m) in tpl.members.iter().enumerate() {
            let mapped = base_dag
                .parents(m)
                .iter()
                .map(|p| tpl.slot.get(p).map_or(*p, |&s| first + s))
                .collect();
            parents[first + k] = mapped;
            for &c in base_dag.children(m) {
                if !tpl.slot.contains_key(&c) {
                    parents[c].push(first + k);
                }
            }
        }
    }

    let types = origin.iter().map(|&o| base.tasks[o].task_type.clone()).collect();
    let name = format!("{}-synthetic-{}", recipe.application, ids.len());
    materialize(name, ids, types, &parents, &recipe.type_stats, &mut rng)
}

/// Builds an instance from bare structure by drawing runtimes and file sizes.
///
/// Per task in index order: runtime, output size, and for tasks without
/// parents an external input size. A task's output is split evenly over its
/// out-edges as `<id>_out_<k>`, one file per child; a task without children
/// keeps it whole in `<id>_out_0`.
pub(crate) fn materialize<R: Rng + ?Sized>(
    name: String,
    ids: Vec<String>,
    types: Vec<String>,
    parents: &[Vec<usize>],
    stats: &BTreeMap<String, TypeStats>,
    rng: &mut R,
) -> Result<WorkflowInstance, GenError> {
    let n = ids.len();
    let mut runtime = vec![0.0; n];
    let mut out_bytes = vec![0u64; n];
    let mut in_bytes = vec![None; n];
    for i in 0..n {
        let st = stats.get(&types[i]).ok_or_else(|| GenError::MissingStats(types[i].clone()))?;
        runtime[i] = sample_from(&st.runtime, rng);
        out_bytes[i] = bytes(sample_from(&st.output_bytes, rng));
        if parents[i].is_empty() {
            in_bytes[i] = Some(bytes(sample_from(&st.input_bytes, rng)));
        }
    }

    // Edge slot of each (child, parent) pair among the parent's children.
    let mut fan_out = vec![0u64; n];
    let slots: Vec<Vec<u64>> = parents
        .iter()
        .map(|ps| {
            ps.iter()
                .map(|&p| {
                    fan_out[p] += 1;
                    fan_out[p] - 1
                })
                .collect()
        })
        .collect();
    let share = |p: usize, k: u64| {
        let ways = fan_out[p].max(1);
        out_bytes[p] / ways + u64::from(k < out_bytes[p] % ways)
    };

    let tasks = types
        .into_iter()
        .enumerate()
        .map(|(i, ty)| {
            let mut t = Task::new(ids[i].clone(), ty, runtime[i]).with_parents(parents[i].iter().map(|&p| ids[p].clone()));
            t.input_files = parents[i]
                .iter()
                .zip(&slots[i])
                .map(|(&p, &k)| FileSpec::new(output_name(&ids[p], k), share(p, k)))
                .collect();
            if let Some(size) = in_bytes[i] {
                t.input_files.push(FileSpec::new(format!("{}_in_0", ids[i]), size));
            }
            t.output_files = (0..fan_out[i].max(1))
                .map(|k| FileSpec::new(output_name(&ids[i], k), share(i, k)))
                .collect();
            t
        })
        .collect();
    Ok(WorkflowInstance::new(name, tasks))
}

fn output_name(id: &str, k: u64) -> String {
    format!("{id}_out_{k}")
}

fn bytes(v: f64) -> u64 {
    if v.is_finite() && v > 0.0 {
        v.round() as u64
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recipe::build_recipe;
    use crate::wfformat::{serialize_instance, validate_instance};

    fn two_chains() -> WorkflowInstance {
        WorkflowInstance::new(
            "two-chains",
            vec![
                Task::new("r", "root", 2.0),
                Task::new("x1", "x", 10.0).with_parents(["r"]),
                Task::new("y1", "y", 5.0).with_parents(["x1"]),
                Task::new("x2", "x", 11.0).with_parents(["r"]),
                Task::new("y2", "y", 6.0).with_parents(["x2"]),
                Task::new("s", "sink", 1.0).with_parents(["y1", "y2"]),
            ],
        )
    }

    #[test]
    fn target_at_minimum_reproduces_base() {
        let r = build_recipe(&[two_chains()]).unwrap();
        let w = generate(&GenRequest {
            recipe: &r,
            target_tasks: 6,
            seed: 1,
        })
        .unwrap();
        assert_eq!(w.len(), 6);
        for (a, b) in w.tasks.iter().zip(&r.base_graph.tasks) {
            assert_eq!((&a.id, &a.task_type, &a.parents), (&b.id, &b.task_type, &b.parents));
        }
        assert!(validate_instance(&w).is_valid());
    }

    #[test]
    fn replication_hangs_chains_between_root_and_sink() {
        let r = build_recipe(&[two_chains()]).unwrap();
        for target in [10, 11] {
            let w = generate(&GenRequest {
                recipe: &r,
                target_tasks: target,
                seed: 5,
            })
            .unwrap();
            assert_eq!(w.len(), 10, "target {target}");
            assert!(validate_instance(&w).is_valid());
            let copies: Vec<&Task> = w.tasks.iter().filter(|t| t.id.contains("__r")).collect();
            assert_eq!(copies.len(), 4);
            for t in copies {
                match t.task_type.as_str() {
                    "x" => assert_eq!(t.parents, ["r"]),
                    "y" => {
                        assert_eq!(t.parents.len(), 1);
                        assert!(t.parents[0].starts_with('x') && t.parents[0].contains("__r"));
                        assert_eq!(t.children(), ["s".to_string()]);
                    }
                    other => panic!("unexpected copy type {other}"),
                }
            }
            assert_eq!(w.task("s").unwrap().parents.len(), 4);
        }
    }

    #[test]
    fn output_split_per_edge() {
        let r = build_recipe(&[two_chains()]).unwrap();
        let w = generate(&GenRequest {
            recipe: &r,
            target_tasks: 6,
            seed: 3,
        })
        .unwrap();
        let root = w.task("r").unwrap();
        let names: Vec<&str> = root.output_files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["r_out_0", "r_out_1"]);
        assert!(root.output_files[0].size.abs_diff(root.output_files[1].size) <= 1);
        assert_eq!(w.task("x1").unwrap().input_files[0], root.output_files[0]);
        assert_eq!(w.task("x2").unwrap().input_files[0], root.output_files[1]);
        assert_eq!(w.task("r").unwrap().input_files[0].name, "r_in_0");
        let sink = w.task("s").unwrap();
        assert_eq!(sink.output_files.len(), 1);
        assert_eq!(sink.input_files.len(), 2);
    }

    #[test]
    fn errors() {
        let r = build_recipe(&[two_chains()]).unwrap();
        let req = GenRequest {
            recipe: &r,
            target_tasks: 5,
            seed: 0,
        };
        assert_eq!(generate(&req).unwrap_err(), GenError::TargetTooSmall { target: 5, min: 6 });

        let flat = WorkflowInstance::new(
            "ab",
            vec![Task::new("a", "a", 1.0), Task::new("b", "b", 1.0).with_parents(["a"])],
        );
        let r = build_recipe(&[flat]).unwrap();
        let req = GenRequest {
            recipe: &r,
            target_tasks: 3,
            seed: 0,
        };
        assert_eq!(generate(&req).unwrap_err(), GenError::EmptyCatalog);
        let req = GenRequest {
            recipe: &r,
            target_tasks: 2,
            seed: 0,
        };
        assert_eq!(generate(&req).unwrap().len(), 2);
    }

    #[test]
    fn same_seed_same_bytes() {
        let r = build_recipe(&[two_chains()]).unwrap();
        let gen = |seed| {
            serialize_instance(
                &generate(&GenRequest {
                    recipe: &r,
                    target_tasks: 40,
                    seed,
                })
                .unwrap(),
            )
            .unwrap()
        };
        assert_eq!(gen(7), gen(7));
        assert_ne!(gen(7), gen(8));
    }
}
