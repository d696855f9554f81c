//! Recipes: base skeleton, pattern catalog and per-type fitted statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{Map, Value};
use thiserror::Error;

use crate::graph::{compute_type_hashes, GraphError};
use crate::patterns::{find_pattern_occurrences, PatternCatalog};
use crate::stats::{fit_values, FitResult, Metric};
use crate::wfformat::{validate_instance, Task, WorkflowInstance};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecipeError {
    #[error("no instances supplied")]
    NoInstances,
    #[error("instance `{0}` failed validation")]
    InvalidInstance(String),
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation at `{path}`: {reason}")]
    SchemaViolation { path: String, reason: String },
}

fn schema(path: impl Into<String>, reason: impl Into<String>) -> RecipeError {
    RecipeError::SchemaViolation {
        path: path.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeStats {
    pub runtime: FitResult<f64>,
    pub input_bytes: FitResult<f64>,
    pub output_bytes: FitResult<f64>,
}

impl TypeStats {
    pub fn get(&self, metric: Metric) -> &FitResult<f64> {
        match metric {
            Metric::RuntimeS => &self.runtime,
            Metric::InputBytes => &self.input_bytes,
            Metric::OutputBytes => &self.output_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub application: String,
    /// Ids, types and edges of the smallest source instance; runtimes are zero.
    pub base_graph: WorkflowInstance,
    pub catalog: PatternCatalog,
    pub type_stats: BTreeMap<String, TypeStats>,
    pub min_tasks: usize,
    pub source_instances: Vec<String>,
    /// Warnings and load-time mappings; informational only.
    pub notes: Vec<String>,
}

impl Recipe {
    /// Checks the document-level invariants without the source instances.
    pub fn check(&self) -> Result<(), RecipeError> {
        if self.min_tasks == 0 {
            return Err(schema("minTasks", "must be positive"));
        }
        if self.min_tasks != self.base_graph.len() {
            return Err(schema(
                "minTasks",
                format!("{} does not match base graph size {}", self.min_tasks, self.base_graph.len()),
            ));
        }
        if !validate_instance(&self.base_graph).is_valid() {
            return Err(schema("baseGraph", "base graph is not a valid DAG"));
        }
        for t in &self.base_graph.tasks {
            if !self.type_stats.contains_key(&t.task_type) {
                return Err(schema(
                    format!("typeStats.{}", t.task_type),
                    "missing statistics for base graph task type",
                ));
            }
        }
        for (ty, st) in &self.type_stats {
            for m in Metric::ALL {
                if !st.get(m).is_valid() {
                    return Err(schema(format!("typeStats.{ty}.{}", m.key()), "invalid fit"));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for (g, group) in self.catalog.patterns.iter().enumerate() {
            if group.len() < 2 {
                return Err(schema(format!("patterns[{g}]"), "a pattern needs at least two occurrences"));
            }
            for (k, occ) in group.iter().enumerate() {
                if occ.is_empty() {
                    return Err(schema(format!("patterns[{g}][{k}]"), "empty occurrence"));
                }
                for id in &occ.tasks {
                    if self.base_graph.task(id).is_none() {
                        return Err(schema(format!("patterns[{g}][{k}]"), format!("unknown task `{id}`")));
                    }
                    if !seen.insert(id.clone()) {
                        return Err(schema(format!("patterns[{g}][{k}]"), format!("task `{id}` in two occurrences")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn skeleton(w: &WorkflowInstance) -> WorkflowInstance {
    let tasks = w
        .tasks
        .iter()
        .map(|t| Task::new(t.id.clone(), t.task_type.clone(), 0.0).with_parents(t.parents.iter().cloned()))
        .collect();
    WorkflowInstance::new(w.name.clone(), tasks)
}

/// Longest common prefix of the names, trimmed of trailing separators and digits.
fn application_name(names: &[&str], fallback: &str) -> String {
    let first = names.first().copied().unwrap_or(fallback);
    let mut len = first.len();
    for n in names {
        len = len.min(first.bytes().zip(n.bytes()).take_while(|(a, b)| a == b).count());
    }
    while !first.is_char_boundary(len) {
        len -= 1;
    }
    let prefix = first[..len].trim_end_matches(|c: char| c == '-' || c == '_' || c.is_ascii_digit());
    if prefix.is_empty() {
        fallback.to_string()
    } else {
        prefix.to_string()
    }
}

/// Analyzes a set of instances of one application.
pub fn build_recipe(instances: &[WorkflowInstance]) -> Result<Recipe, RecipeError> {
    if instances.is_empty() {
        return Err(RecipeError::NoInstances);
    }
    for w in instances {
        if w.is_empty() || !validate_instance(w).is_valid() {
            return Err(RecipeError::InvalidInstance(w.name.clone()));
        }
    }
    let mut sorted: Vec<&WorkflowInstance> = instances.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let base = *sorted
        .iter()
        .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.name.cmp(&b.name)))
        .expect("non-empty");

    let base_graph = skeleton(base);
    let mut notes = Vec::new();
    let catalog = {
        let hw = compute_type_hashes(&base_graph).map_err(|_| RecipeError::InvalidInstance(base.name.clone()))?;
        find_pattern_occurrences(&hw)
    };

    if sorted.len() > 1 {
        let others: Vec<BTreeSet<_>> = sorted
            .iter()
            .filter(|w| w.name != base.name)
            .map(|w| {
                compute_type_hashes(w)
                    .map(|hw| hw.type_hashes().iter().copied().collect())
                    .map_err(|_| RecipeError::InvalidInstance(w.name.clone()))
            })
            .collect::<Result<_, _>>()?;
        for (g, group) in catalog.patterns.iter().enumerate() {
            let sig = &group[0].signature;
            if !others.iter().any(|hs| sig.is_subset(hs)) {
                let msg = format!("pattern {g} does not recur in any other instance");
                log::warn!("{msg}");
                notes.push(msg);
            }
        }
        let base_types: BTreeSet<&str> = base.tasks.iter().map(|t| t.task_type.as_str()).collect();
        for w in &sorted {
            if let Some(t) = w.tasks.iter().find(|t| !base_types.contains(t.task_type.as_str())) {
                let msg = format!("instance `{}` has task type `{}` absent from the base graph", w.name, t.task_type);
                log::warn!("{msg}");
                notes.push(msg);
            }
        }
    }

    let mut pooled: BTreeMap<&str, [Vec<f64>; 3]> = BTreeMap::new();
    for w in &sorted {
        for t in &w.tasks {
            let e = pooled.entry(t.task_type.as_str()).or_default();
            e[0].push(t.runtime);
            e[1].push(t.input_bytes() as f64);
            e[2].push(t.output_bytes() as f64);
        }
    }
    let type_stats = fit_pooled(pooled)?;

    let names: Vec<&str> = sorted.iter().map(|w| w.name.as_str()).collect();
    let recipe = Recipe {
        application: application_name(&names, &base.name),
        min_tasks: base_graph.len(),
        base_graph,
        catalog,
        type_stats,
        source_instances: names.iter().map(|s| s.to_string()).collect(),
        notes,
    };
    recipe.check()?;
    Ok(recipe)
}

/// Fits every (type, metric) sample; types are spread over scoped threads.
fn fit_pooled(pooled: BTreeMap<&str, [Vec<f64>; 3]>) -> Result<BTreeMap<String, TypeStats>, RecipeError> {
    let entries: Vec<(&str, [Vec<f64>; 3])> = pooled.into_iter().collect();
    let results: Vec<Result<(String, TypeStats), RecipeError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = entries
            .iter()
            .map(|(ty, samples)| {
                scope.spawn(move || {
                    let fit = |v: &[f64]| fit_values(v).map_err(|e| schema(format!("typeStats.{ty}"), e.to_string()));
                    Ok((
                        ty.to_string(),
                        TypeStats {
                            runtime: fit(&samples[0])?,
                            input_bytes: fit(&samples[1])?,
                            output_bytes: fit(&samples[2])?,
                        },
                    ))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("fit thread panicked")).collect()
    });
    results.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Persistence

pub fn save_recipe(r: &Recipe) -> Result<String, RecipeError> {
    r.check()?;
    let mut text = serde_json::to_string_pretty(&recipe_to_value(r)).expect("JSON values always serialize");
    text.push('\n');
    Ok(text)
}

fn recipe_to_value(r: &Recipe) -> Value {
    let tasks: Vec<Value> = r
        .base_graph
        .tasks
        .iter()
        .map(|t| {
            let mut m = Map::new();
            m.insert("id".into(), Value::String(t.id.clone()));
            m.insert("type".into(), Value::String(t.task_type.clone()));
            m.insert(
                "parents".into(),
                Value::Array(t.parents.iter().cloned().map(Value::String).collect()),
            );
            Value::Object(m)
        })
        .collect();
    let mut base = Map::new();
    base.insert("tasks".into(), Value::Array(tasks));

    let mut stats = Map::new();
    for (ty, st) in &r.type_stats {
        let mut m = Map::new();
        for metric in Metric::ALL {
            m.insert(metric.key().into(), st.get(metric).to_json());
        }
        stats.insert(ty.clone(), Value::Object(m));
    }

    let mut root = Map::new();
    root.insert("application".into(), Value::String(r.application.clone()));
    root.insert("minTasks".into(), Value::from(r.min_tasks));
    root.insert(
        "sourceInstances".into(),
        Value::Array(r.source_instances.iter().cloned().map(Value::String).collect()),
    );
    root.insert("baseGraph".into(), Value::Object(base));
    root.insert(
        "patterns".into(),
        serde_json::to_value(r.catalog.to_id_groups()).expect("strings serialize"),
    );
    root.insert("typeStats".into(), Value::Object(stats));
    if !r.notes.is_empty() {
        root.insert(
            "notes".into(),
            Value::Array(r.notes.iter().cloned().map(Value::String).collect()),
        );
    }
    Value::Object(root)
}

pub fn load_recipe(json_text: &str) -> Result<Recipe, RecipeError> {
    let root: Value = serde_json::from_str(json_text).map_err(|e| RecipeError::MalformedJson(e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| schema("", "expected an object"))?;
    let field = |k: &str| obj.get(k).ok_or_else(|| schema(k, "missing"));

    let application = field("application")?
        .as_str()
        .ok_or_else(|| schema("application", "expected a string"))?
        .to_string();
    let min_tasks = field("minTasks")?
        .as_u64()
        .ok_or_else(|| schema("minTasks", "expected a non-negative integer"))? as usize;
    let source_instances = match obj.get("sourceInstances") {
        None => Vec::new(),
        Some(v) => str_list(v, "sourceInstances")?,
    };
    let mut notes = match obj.get("notes") {
        None => Vec::new(),
        Some(v) => str_list(v, "notes")?,
    };

    let base_tasks = field("baseGraph")?
        .get("tasks")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("baseGraph.tasks", "expected an array"))?;
    let tasks = base_tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let path = format!("baseGraph.tasks[{i}]");
            let s = |k: &str| {
                t.get(k)
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| schema(format!("{path}.{k}"), "expected a string"))
            };
            let parents = match t.get("parents") {
                None => Vec::new(),
                Some(v) => str_list(v, &format!("{path}.parents"))?,
            };
            Ok(Task::new(s("id")?, s("type")?, 0.0).with_parents(parents))
        })
        .collect::<Result<Vec<_>, RecipeError>>()?;
    let base_graph = WorkflowInstance::new(format!("{application}-base"), tasks);

    let groups: Vec<Vec<Vec<String>>> =
        serde_json::from_value(field("patterns")?.clone()).map_err(|e| schema("patterns", e.to_string()))?;
    let catalog = {
        let hw = compute_type_hashes(&base_graph).map_err(|e| schema("baseGraph", e.to_string()))?;
        PatternCatalog::from_id_groups(&hw, &groups).map_err(|e| match e {
            GraphError::UnknownTask(id) => schema("patterns", format!("unknown task `{id}`")),
            other => schema("patterns", other.to_string()),
        })?
    };

    let stats_obj = field("typeStats")?
        .as_object()
        .ok_or_else(|| schema("typeStats", "expected an object"))?;
    let mut type_stats = BTreeMap::new();
    for (ty, v) in stats_obj {
        let mut fit = |metric: Metric| -> Result<FitResult<f64>, RecipeError> {
            let path = format!("typeStats.{ty}.{}", metric.key());
            let frag = v.get(metric.key()).ok_or_else(|| schema(path.clone(), "missing"))?;
            let (fit, note) = FitResult::from_json(frag, &path).map_err(|e| schema(path.clone(), e.to_string()))?;
            if let Some(n) = note {
                notes.push(format!("{path}: {n}"));
            }
            Ok(fit)
        };
        let st = TypeStats {
            runtime: fit(Metric::RuntimeS)?,
            input_bytes: fit(Metric::InputBytes)?,
            output_bytes: fit(Metric::OutputBytes)?,
        };
        type_stats.insert(ty.clone(), st);
    }

    let recipe = Recipe {
        application,
        base_graph,
        catalog,
        type_stats,
        min_tasks,
        source_instances,
        notes,
    };
    recipe.check()?;
    Ok(recipe)
}

fn str_list(v: &Value, path: &str) -> Result<Vec<String>, RecipeError> {
    v.as_array()
        .ok_or_else(|| schema(path, "expected an array"))?
        .iter()
        .map(|x| x.as_str().map(str::to_string).ok_or_else(|| schema(path, "expected strings")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Family;

    fn two_chains() -> WorkflowInstance {
        let mut tasks = vec![
            Task::new("r", "root", 2.0),
            Task::new("x1", "x", 10.0).with_parents(["r"]),
            Task::new("y1", "y", 5.0).with_parents(["x1"]),
            Task::new("x2", "x", 11.0).with_parents(["r"]),
            Task::new("y2", "y", 6.0).with_parents(["x2"]),
            Task::new("s", "sink", 1.0).with_parents(["y1", "y2"]),
        ];
        for t in &mut tasks {
            t.output_files.push(crate::wfformat::FileSpec::new(format!("{}.out", t.id), 100));
        }
        WorkflowInstance::new("two-chains-6", tasks)
    }

    #[test]
    fn single_instance_recipe() {
        let r = build_recipe(&[two_chains()]).unwrap();
        assert_eq!(r.min_tasks, 6);
        assert_eq!(r.catalog.patterns.len(), 1);
        assert_eq!(r.catalog.patterns[0].len(), 2);
        assert_eq!(r.application, "two-chains");
        assert_eq!(r.type_stats["x"].runtime.distribution, Family::Empirical);
        assert_eq!(r.type_stats["x"].runtime.min, 10.0);
        assert_eq!(r.type_stats["x"].runtime.max, 11.0);
    }

    #[test]
    fn no_patterns_gives_empty_catalog() {
        let w = WorkflowInstance::new(
            "abc",
            vec![Task::new("a", "a", 1.0), Task::new("b", "b", 1.0).with_parents(["a"])],
        );
        let r = build_recipe(&[w]).unwrap();
        assert!(r.catalog.is_empty());
        assert_eq!(build_recipe(&[]).unwrap_err(), RecipeError::NoInstances);
    }

    #[test]
    fn invalid_instance_rejected() {
        let w = WorkflowInstance::new("bad", vec![Task::new("a", "a", -1.0)]);
        assert_eq!(build_recipe(&[w]).unwrap_err(), RecipeError::InvalidInstance("bad".into()));
    }

    #[test]
    fn save_load_round_trip() {
        let r = build_recipe(&[two_chains()]).unwrap();
        let text = save_recipe(&r).unwrap();
        let back = load_recipe(&text).unwrap();
        assert_eq!(back.catalog.to_id_groups(), r.catalog.to_id_groups());
        assert_eq!(back.catalog.patterns[0][0].signature, r.catalog.patterns[0][0].signature);
        assert_eq!(back.type_stats.keys().collect::<Vec<_>>(), r.type_stats.keys().collect::<Vec<_>>());
        assert_eq!(save_recipe(&back).unwrap(), text);
        assert_eq!(load_recipe(&text).unwrap(), back);
    }

    #[test]
    fn missing_min_tasks_is_schema_violation() {
        let r = build_recipe(&[two_chains()]).unwrap();
        let mut v: Value = serde_json::from_str(&save_recipe(&r).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("minTasks");
        let err = load_recipe(&v.to_string()).unwrap_err();
        assert!(matches!(err, RecipeError::SchemaViolation { ref path, .. } if path == "minTasks"));
        assert!(matches!(load_recipe("[1,"), Err(RecipeError::MalformedJson(_))));
    }

    #[test]
    fn foreign_distribution_mapped_with_note() {
        let r = build_recipe(&[two_chains()]).unwrap();
        let mut v: Value = serde_json::from_str(&save_recipe(&r).unwrap()).unwrap();
        v["typeStats"]["x"]["runtime"] = serde_json::json!({
            "min": 48.846, "max": 192.232,
            "distribution": {"name": "skewnorm",
                "params": [11115267.652937062, -2.9628504044929433e-05, 56.03957070238482]}
        });
        let back = load_recipe(&v.to_string()).unwrap();
        assert_eq!(back.type_stats["x"].runtime.distribution, Family::Normal);
        assert_eq!(back.type_stats["x"].runtime.min, 48.846);
        assert!(back.notes.iter().any(|n| n.contains("skewnorm")));
    }

    #[test]
    fn application_names() {
        assert_eq!(application_name(&["bag-42", "bag-82"], "x"), "bag");
        assert_eq!(application_name(&["solo"], "x"), "solo");
        assert_eq!(application_name(&["a1", "b2"], "fallback"), "fallback");
    }
}
