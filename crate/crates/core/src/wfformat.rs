//! Workflow instance data model and its JSON interchange format.
//!
//! Instances are parsed into a normalized form: `children` is always derived
//! from the `parents` lists and never read from the document. Fields this
//! model does not know about are kept verbatim and written back out.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::dag::topological_order;

pub const SCHEMA_VERSION: &str = "wfforge-1.0";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("bad value at `{path}`: {reason}")]
    BadValue { path: String, reason: String },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileSpec {
    pub name: String,
    pub size: u64,
}

impl FileSpec {
    pub fn new(name: impl Into<String>, size: u64) -> Self {
        Self { name: name.into(), size }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Machine {
    pub name: String,
    /// MHz.
    pub cpu_speed: Option<f64>,
    pub cores: Option<u32>,
    pub memory: Option<u64>,
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    /// Executable or category name; the unit of statistical modeling.
    pub task_type: String,
    pub runtime: f64,
    pub cores: u32,
    pub input_files: Vec<FileSpec>,
    pub output_files: Vec<FileSpec>,
    pub parents: Vec<String>,
    children: Vec<String>,
    pub machine: Option<String>,
    pub extra: Map<String, Value>,
}

impl Task {
    pub fn new(id: impl Into<String>, task_type: impl Into<String>, runtime: f64) -> Self {
        Self {
            id: id.into(),
            task_type: task_type.into(),
            runtime,
            cores: 1,
            input_files: Vec::new(),
            output_files: Vec::new(),
            parents: Vec::new(),
            children: Vec::new(),
            machine: None,
            extra: Map::new(),
        }
    }

    pub fn with_parents<I, S>(mut self, parents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.parents = parents.into_iter().map(Into::into).collect();
        self
    }

    /// Derived on normalization; empty until then.
    pub fn children(&self) -> &[String] {
        &self.children
    }

    pub fn input_bytes(&self) -> u64 {
        self.input_files.iter().map(|f| f.size).sum()
    }

    pub fn output_bytes(&self) -> u64 {
        self.output_files.iter().map(|f| f.size).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowInstance {
    pub name: String,
    pub schema_version: String,
    pub tasks: Vec<Task>,
    pub machines: Vec<Machine>,
    pub makespan: Option<f64>,
    /// Unknown top-level members.
    pub extra: Map<String, Value>,
    /// Unknown members of the `workflow` object.
    pub workflow_extra: Map<String, Value>,
}

impl WorkflowInstance {
    /// Builds a normalized instance from tasks.
    pub fn new(name: impl Into<String>, tasks: Vec<Task>) -> Self {
        let mut w = Self {
            name: name.into(),
            schema_version: SCHEMA_VERSION.to_string(),
            tasks,
            machines: Vec::new(),
            makespan: None,
            extra: Map::new(),
            workflow_extra: Map::new(),
        };
        w.normalize();
        w
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Recomputes every task's children as the transpose of the parent lists.
    ///
    /// Children are listed in task order, without duplicates. Parents naming
    /// unknown tasks are ignored here and reported by validation.
    pub fn normalize(&mut self) {
        let index: HashMap<&str, usize> = self
            .tasks
            .iter()
            .enumerate()
            .rev()
            .map(|(i, t)| (t.id.as_str(), i))
            .collect();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.tasks.len()];
        for (i, t) in self.tasks.iter().enumerate() {
            for p in &t.parents {
                if let Some(&j) = index.get(p.as_str()) {
                    if children[j].last() != Some(&i) {
                        children[j].push(i);
                    }
                }
            }
        }
        let ids: Vec<String> = self.tasks.iter().map(|t| t.id.clone()).collect();
        for (t, kids) in self.tasks.iter_mut().zip(children) {
            t.children = kids.into_iter().map(|k| ids[k].clone()).collect();
        }
    }

    /// Sum of `runtime × cores` over all tasks.
    pub fn total_work(&self) -> f64 {
        self.tasks.iter().map(|t| t.runtime * f64::from(t.cores)).sum()
    }
}

// ---------------------------------------------------------------------------
// Parsing

pub fn parse_instance(json_text: &str) -> Result<WorkflowInstance, FormatError> {
    let root: Value = serde_json::from_str(json_text).map_err(|e| FormatError::MalformedJson(e.to_string()))?;
    instance_from_value(&root)
}

pub fn instance_from_value(root: &Value) -> Result<WorkflowInstance, FormatError> {
    let obj = as_object(root, "")?;
    let name = req_str(obj, "", "name")?;
    let schema_version = match obj.get("schemaVersion") {
        None => SCHEMA_VERSION.to_string(),
        Some(v) => str_value(v, "schemaVersion")?,
    };
    let workflow = obj.get("workflow").ok_or_else(|| FormatError::MissingField("workflow".into()))?;
    let wobj = as_object(workflow, "workflow")?;
    let makespan = match wobj.get("makespan") {
        None | Some(Value::Null) => None,
        Some(v) => Some(f64_value(v, "workflow.makespan")?),
    };
    let machines = match wobj.get("machines") {
        None => Vec::new(),
        Some(v) => as_array(v, "workflow.machines")?
            .iter()
            .enumerate()
            .map(|(i, m)| parse_machine(m, &format!("workflow.machines[{i}]")))
            .collect::<Result<_, _>>()?,
    };
    let tasks_v = wobj
        .get("tasks")
        .ok_or_else(|| FormatError::MissingField("workflow.tasks".into()))?;
    let tasks = as_array(tasks_v, "workflow.tasks")?
        .iter()
        .enumerate()
        .map(|(i, t)| parse_task(t, &format!("workflow.tasks[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;

    let mut w = WorkflowInstance {
        name,
        schema_version,
        tasks,
        machines,
        makespan,
        extra: unknown_members(obj, &["name", "schemaVersion", "workflow"]),
        workflow_extra: unknown_members(wobj, &["makespan", "machines", "tasks"]),
    };
    w.normalize();
    Ok(w)
}

const TASK_KEYS: &[&str] = &[
    "id",
    "name",
    "runtimeInSeconds",
    "cores",
    "parents",
    "children",
    "inputFiles",
    "outputFiles",
    "machine",
];

fn parse_task(v: &Value, path: &str) -> Result<Task, FormatError> {
    let obj = as_object(v, path)?;
    let id = req_str(obj, path, "id")?;
    let task_type = req_str(obj, path, "name")?;
    let runtime = f64_value(
        obj.get("runtimeInSeconds")
            .ok_or_else(|| FormatError::MissingField(join(path, "runtimeInSeconds")))?,
        &join(path, "runtimeInSeconds"),
    )?;
    let cores = match obj.get("cores") {
        None => 1,
        Some(c) => u32_value(c, &join(path, "cores"))?,
    };
    let parents = match obj.get("parents") {
        None => Vec::new(),
        Some(p) => {
            let ppath = join(path, "parents");
            as_array(p, &ppath)?
                .iter()
                .enumerate()
                .map(|(i, x)| str_value(x, &format!("{ppath}[{i}]")))
                .collect::<Result<_, _>>()?
        }
    };
    let machine = match obj.get("machine") {
        None | Some(Value::Null) => None,
        Some(m) => Some(str_value(m, &join(path, "machine"))?),
    };
    Ok(Task {
        id,
        task_type,
        runtime,
        cores,
        input_files: parse_files(obj.get("inputFiles"), &join(path, "inputFiles"))?,
        output_files: parse_files(obj.get("outputFiles"), &join(path, "outputFiles"))?,
        parents,
        children: Vec::new(),
        machine,
        extra: unknown_members(obj, TASK_KEYS),
    })
}

fn parse_files(v: Option<&Value>, path: &str) -> Result<Vec<FileSpec>, FormatError> {
    let Some(v) = v else { return Ok(Vec::new()) };
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let fpath = format!("{path}[{i}]");
            let obj = as_object(f, &fpath)?;
            let name = req_str(obj, &fpath, "name")?;
            let size = u64_value(
                obj.get("sizeInBytes")
                    .ok_or_else(|| FormatError::MissingField(join(&fpath, "sizeInBytes")))?,
                &join(&fpath, "sizeInBytes"),
            )?;
            Ok(FileSpec { name, size })
        })
        .collect()
}

fn parse_machine(v: &Value, path: &str) -> Result<Machine, FormatError> {
    let obj = as_object(v, path)?;
    let name = req_str(obj, path, "nodeName")?;
    let (cpu_speed, cores) = match obj.get("cpu") {
        None | Some(Value::Null) => (None, None),
        Some(cpu) => {
            let cpath = join(path, "cpu");
            let cobj = as_object(cpu, &cpath)?;
            let speed = match cobj.get("speedInMHz") {
                None | Some(Value::Null) => None,
                Some(s) => Some(f64_value(s, &join(&cpath, "speedInMHz"))?),
            };
            let cores = match cobj.get("coreCount") {
                None | Some(Value::Null) => None,
                Some(c) => Some(u32_value(c, &join(&cpath, "coreCount"))?),
            };
            (speed, cores)
        }
    };
    let memory = match obj.get("memoryInBytes") {
        None | Some(Value::Null) => None,
        Some(m) => Some(u64_value(m, &join(path, "memoryInBytes"))?),
    };
    Ok(Machine {
        name,
        cpu_speed,
        cores,
        memory,
        extra: unknown_members(obj, &["nodeName", "cpu", "memoryInBytes"]),
    })
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn bad(path: &str, reason: &str) -> FormatError {
    FormatError::BadValue {
        path: path.to_string(),
        reason: reason.to_string(),
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, FormatError> {
    v.as_object().ok_or_else(|| bad(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, FormatError> {
    v.as_array().ok_or_else(|| bad(path, "expected an array"))
}

fn req_str(obj: &Map<String, Value>, path: &str, key: &str) -> Result<String, FormatError> {
    let p = join(path, key);
    let v = obj.get(key).ok_or_else(|| FormatError::MissingField(p.clone()))?;
    str_value(v, &p)
}

fn str_value(v: &Value, path: &str) -> Result<String, FormatError> {
    v.as_str().map(str::to_string).ok_or_else(|| bad(path, "expected a string"))
}

fn f64_value(v: &Value, path: &str) -> Result<f64, FormatError> {
    v.as_f64().ok_or_else(|| bad(path, "expected a number"))
}

fn u64_value(v: &Value, path: &str) -> Result<u64, FormatError> {
    v.as_u64().ok_or_else(|| bad(path, "expected a non-negative integer"))
}

fn u32_value(v: &Value, path: &str) -> Result<u32, FormatError> {
    u64_value(v, path)?
        .try_into()
        .map_err(|_| bad(path, "integer out of range"))
}

fn unknown_members(obj: &Map<String, Value>, known: &[&str]) -> Map<String, Value> {
    obj.iter()
        .filter(|(k, _)| !known.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

// ---------------------------------------------------------------------------
// Serialization

/// Canonical JSON text: fixed key order, two-space indentation, trailing newline.
pub fn serialize_instance(w: &WorkflowInstance) -> Result<String, FormatError> {
    let report = validate_instance(w);
    if let Some(v) = report.violations.first() {
        return Err(FormatError::InvalidInstance(format!("{} at {}", v.code, v.path)));
    }
    Ok(render_instance(w))
}

/// Renders without validating; used for diagnostics and by callers that have
/// already validated.
pub fn render_instance(w: &WorkflowInstance) -> String {
    let mut text = serde_json::to_string_pretty(&instance_to_value(w)).expect("JSON values always serialize");
    text.push('\n');
    text
}

pub fn instance_to_value(w: &WorkflowInstance) -> Value {
    let mut workflow = Map::new();
    if let Some(m) = w.makespan {
        workflow.insert("makespan".into(), num(m));
    }
    workflow.insert(
        "machines".into(),
        Value::Array(w.machines.iter().map(machine_to_value).collect()),
    );
    workflow.insert("tasks".into(), Value::Array(w.tasks.iter().map(task_to_value).collect()));
    extend(&mut workflow, &w.workflow_extra);

    let mut root = Map::new();
    root.insert("name".into(), Value::String(w.name.clone()));
    root.insert("schemaVersion".into(), Value::String(w.schema_version.clone()));
    root.insert("workflow".into(), Value::Object(workflow));
    extend(&mut root, &w.extra);
    Value::Object(root)
}

fn task_to_value(t: &Task) -> Value {
    let mut m = Map::new();
    m.insert("id".into(), Value::String(t.id.clone()));
    m.insert("name".into(), Value::String(t.task_type.clone()));
    m.insert("runtimeInSeconds".into(), num(t.runtime));
    m.insert("cores".into(), Value::from(t.cores));
    m.insert(
        "parents".into(),
        Value::Array(t.parents.iter().cloned().map(Value::String).collect()),
    );
    m.insert("inputFiles".into(), files_to_value(&t.input_files));
    m.insert("outputFiles".into(), files_to_value(&t.output_files));
    if let Some(machine) = &t.machine {
        m.insert("machine".into(), Value::String(machine.clone()));
    }
    extend(&mut m, &t.extra);
    Value::Object(m)
}

fn files_to_value(files: &[FileSpec]) -> Value {
    Value::Array(
        files
            .iter()
            .map(|f| {
                let mut m = Map::new();
                m.insert("name".into(), Value::String(f.name.clone()));
                m.insert("sizeInBytes".into(), Value::from(f.size));
                Value::Object(m)
            })
            .collect(),
    )
}

fn machine_to_value(machine: &Machine) -> Value {
    let mut m = Map::new();
    m.insert("nodeName".into(), Value::String(machine.name.clone()));
    let mut cpu = Map::new();
    if let Some(s) = machine.cpu_speed {
        cpu.insert("speedInMHz".into(), num(s));
    }
    if let Some(c) = machine.cores {
        cpu.insert("coreCount".into(), Value::from(c));
    }
    m.insert("cpu".into(), Value::Object(cpu));
    if let Some(mem) = machine.memory {
        m.insert("memoryInBytes".into(), Value::from(mem));
    }
    extend(&mut m, &machine.extra);
    Value::Object(m)
}

fn extend(dst: &mut Map<String, Value>, src: &Map<String, Value>) {
    for (k, v) in src {
        dst.entry(k.clone()).or_insert_with(|| v.clone());
    }
}

fn num(v: f64) -> Value {
    Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    Cycle,
    DanglingParent,
    DuplicateId,
    FileConflict,
    NegativeValue,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cycle => "CYCLE",
            Self::DanglingParent => "DANGLING_PARENT",
            Self::DuplicateId => "DUPLICATE_ID",
            Self::FileConflict => "FILE_CONFLICT",
            Self::NegativeValue => "NEGATIVE_VALUE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, path: String, message: String) {
        self.violations.push(Violation { code, path, message });
    }
}

/// Checks every structural and semantic invariant of an instance.
///
/// Violations are reported as data; disconnected components are allowed.
pub fn validate_instance(w: &WorkflowInstance) -> ValidationReport {
    use ViolationCode::*;
    let mut report = ValidationReport::default();
    let tpath = |i: usize| format!("workflow.tasks[{i}]");

    let mut index: HashMap<&str, usize> = HashMap::with_capacity(w.tasks.len());
    for (i, t) in w.tasks.iter().enumerate() {
        if index.contains_key(t.id.as_str()) {
            report.push(DuplicateId, format!("{}.id", tpath(i)), format!("task id `{}` repeated", t.id));
        } else {
            index.insert(&t.id, i);
        }
    }

    if let Some(m) = w.makespan {
        if !(m >= 0.0 && m.is_finite()) {
            report.push(NegativeValue, "workflow.makespan".into(), format!("makespan {m}"));
        }
    }
    for (i, m) in w.machines.iter().enumerate() {
        let mpath = format!("workflow.machines[{i}]");
        if matches!(m.cpu_speed, Some(s) if !(s > 0.0 && s.is_finite())) {
            report.push(NegativeValue, format!("{mpath}.cpu.speedInMHz"), "CPU speed must be positive".into());
        }
        if m.cores == Some(0) {
            report.push(NegativeValue, format!("{mpath}.cpu.coreCount"), "core count must be positive".into());
        }
        if m.memory == Some(0) {
            report.push(NegativeValue, format!("{mpath}.memoryInBytes"), "memory must be positive".into());
        }
    }

    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); w.tasks.len()];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); w.tasks.len()];
    for (i, t) in w.tasks.iter().enumerate() {
        if !(t.runtime >= 0.0 && t.runtime.is_finite()) {
            report.push(NegativeValue, format!("{}.runtimeInSeconds", tpath(i)), format!("runtime {}", t.runtime));
        }
        if t.cores == 0 {
            report.push(NegativeValue, format!("{}.cores", tpath(i)), "cores must be at least 1".into());
        }
        for (k, p) in t.parents.iter().enumerate() {
            match index.get(p.as_str()) {
                Some(&j) => {
                    if !parents[i].contains(&j) {
                        parents[i].push(j);
                        children[j].push(i);
                    }
                }
                None => report.push(
                    DanglingParent,
                    format!("{}.parents[{k}]", tpath(i)),
                    format!("unknown parent `{p}`"),
                ),
            }
        }
    }

    let topo = match topological_order(&parents, &children) {
        Ok(order) => Some(order),
        Err(i) => {
            report.push(Cycle, tpath(i), format!("task `{}` lies on a dependency cycle", w.tasks[i].id));
            None
        }
    };

    check_files(w, &parents, topo.as_deref(), &mut report);
    report
}

fn check_files(w: &WorkflowInstance, parents: &[Vec<usize>], topo: Option<&[usize]>, report: &mut ValidationReport) {
    use ViolationCode::FileConflict;
    let tpath = |i: usize| format!("workflow.tasks[{i}]");
    let mut producer: HashMap<&str, usize> = HashMap::new();
    for (i, t) in w.tasks.iter().enumerate() {
        let mut seen = HashSet::new();
        for (k, f) in t.output_files.iter().enumerate() {
            if !seen.insert(f.name.as_str()) {
                report.push(
                    FileConflict,
                    format!("{}.outputFiles[{k}]", tpath(i)),
                    format!("file `{}` listed twice", f.name),
                );
                continue;
            }
            match producer.get(f.name.as_str()) {
                Some(&j) => report.push(
                    FileConflict,
                    format!("{}.outputFiles[{k}]", tpath(i)),
                    format!("file `{}` also produced by `{}`", f.name, w.tasks[j].id),
                ),
                None => {
                    producer.insert(&f.name, i);
                }
            }
        }
        let mut seen_in = HashSet::new();
        for (k, f) in t.input_files.iter().enumerate() {
            if !seen_in.insert(f.name.as_str()) {
                report.push(
                    FileConflict,
                    format!("{}.inputFiles[{k}]", tpath(i)),
                    format!("file `{}` listed twice", f.name),
                );
            } else if seen.contains(f.name.as_str()) {
                report.push(
                    FileConflict,
                    format!("{}.inputFiles[{k}]", tpath(i)),
                    format!("file `{}` is both input and output", f.name),
                );
            }
        }
    }

    // A consumed file must not come from one of the consumer's descendants.
    let Some(topo) = topo else { return };
    let mut rank = vec![0usize; w.tasks.len()];
    for (r, &i) in topo.iter().enumerate() {
        rank[i] = r;
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); w.tasks.len()];
    for (i, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(i);
        }
    }
    for (i, t) in w.tasks.iter().enumerate() {
        for (k, f) in t.input_files.iter().enumerate() {
            let Some(&p) = producer.get(f.name.as_str()) else { continue };
            if p == i || parents[i].contains(&p) || rank[p] < rank[i] {
                continue;
            }
            if reaches(&children, i, p) {
                report.push(
                    FileConflict,
                    format!("{}.inputFiles[{k}]", tpath(i)),
                    format!("file `{}` is produced by descendant `{}`", f.name, w.tasks[p].id),
                );
            }
        }
    }
}

fn reaches(children: &[Vec<usize>], from: usize, to: usize) -> bool {
    let mut stack = vec![from];
    let mut seen = HashSet::new();
    while let Some(x) = stack.pop() {
        if x == to {
            return true;
        }
        if seen.insert(x) {
            stack.extend(children[x].iter().copied());
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> WorkflowInstance {
        WorkflowInstance::new(
            "chain",
            vec![
                Task::new("t1", "a", 1.0),
                Task::new("t2", "b", 2.0).with_parents(["t1"]),
                Task::new("t3", "c", 3.0).with_parents(["t2"]),
            ],
        )
    }

    #[test]
    fn minimal_instance_parses() {
        let text = r#"{"name":"one","workflow":{"tasks":[{"id":"t1","name":"noop","runtimeInSeconds":1.0}]}}"#;
        let w = parse_instance(text).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.tasks[0].task_type, "noop");
        assert_eq!(w.tasks[0].cores, 1);
        assert!(w.tasks[0].parents.is_empty() && w.tasks[0].children().is_empty());
        assert_eq!(w.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn recipe_document_is_not_an_instance() {
        let text = r#"{"name":"x","workflow":{"individuals":{"runtime":{"min":48.846,"max":192.232}}}}"#;
        assert_eq!(
            parse_instance(text).unwrap_err(),
            FormatError::MissingField("workflow.tasks".into())
        );
        assert!(matches!(parse_instance("{nope"), Err(FormatError::MalformedJson(_))));
    }

    #[test]
    fn bad_values_carry_paths() {
        let text = r#"{"name":"x","workflow":{"tasks":[{"id":"t1","name":"a","runtimeInSeconds":"slow"}]}}"#;
        assert_eq!(
            parse_instance(text).unwrap_err(),
            FormatError::BadValue {
                path: "workflow.tasks[0].runtimeInSeconds".into(),
                reason: "expected a number".into()
            }
        );
        let text = r#"{"name":"x","workflow":{"tasks":[{"id":"t1","name":"a"}]}}"#;
        assert_eq!(
            parse_instance(text).unwrap_err(),
            FormatError::MissingField("workflow.tasks[0].runtimeInSeconds".into())
        );
    }

    #[test]
    fn children_are_derived_not_read() {
        let text = r#"{"name":"x","workflow":{"tasks":[
            {"id":"a","name":"a","runtimeInSeconds":1,"children":["zzz"]},
            {"id":"b","name":"b","runtimeInSeconds":1,"parents":["a"]}]}}"#;
        let w = parse_instance(text).unwrap();
        assert_eq!(w.tasks[0].children(), ["b".to_string()]);
        assert!(!render_instance(&w).contains("zzz"));
    }

    #[test]
    fn chain_serializes_and_round_trips() {
        let mut w = chain();
        w.makespan = Some(12.5);
        let text = serialize_instance(&w).unwrap();
        assert!(text.contains("\"makespan\": 12.5"));
        let back = parse_instance(&text).unwrap();
        assert_eq!(back, w);
        assert_eq!(serialize_instance(&back).unwrap(), text);
    }

    #[test]
    fn unknown_fields_round_trip() {
        let text = r#"{"name":"x","x-custom":7,"workflow":{"tasks":[{"id":"t1","name":"a","runtimeInSeconds":1,"x-tag":"q"}],"x-wf":[1,2]}}"#;
        let w = parse_instance(text).unwrap();
        let out = serialize_instance(&w).unwrap();
        let before: Value = serde_json::from_str(text).unwrap();
        let after: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(after["x-custom"], before["x-custom"]);
        assert_eq!(after["workflow"]["x-wf"], before["workflow"]["x-wf"]);
        assert_eq!(after["workflow"]["tasks"][0]["x-tag"], before["workflow"]["tasks"][0]["x-tag"]);
    }

    #[test]
    fn valid_chain_has_empty_report() {
        assert!(validate_instance(&chain()).is_valid());
        assert!(validate_instance(&WorkflowInstance::new("one", vec![Task::new("t", "a", 0.0)])).is_valid());
    }

    #[test]
    fn two_task_cycle_detected() {
        let w = WorkflowInstance::new(
            "cyc",
            vec![
                Task::new("A", "a", 1.0).with_parents(["B"]),
                Task::new("B", "b", 1.0).with_parents(["A"]),
            ],
        );
        let r = validate_instance(&w);
        assert!(r.has(ViolationCode::Cycle));
        assert!(matches!(serialize_instance(&w), Err(FormatError::InvalidInstance(_))));
    }

    #[test]
    fn each_violation_code_fires() {
        let mut dup = chain();
        dup.tasks[2].id = "t1".into();
        assert!(validate_instance(&dup).has(ViolationCode::DuplicateId));

        let dangling = WorkflowInstance::new("d", vec![Task::new("a", "a", 1.0).with_parents(["ghost"])]);
        assert!(validate_instance(&dangling).has(ViolationCode::DanglingParent));

        let mut neg = chain();
        neg.tasks[1].runtime = -1.0;
        assert!(validate_instance(&neg).has(ViolationCode::NegativeValue));

        let mut files = chain();
        files.tasks[0].output_files.push(FileSpec::new("f.dat", 1));
        files.tasks[2].output_files.push(FileSpec::new("f.dat", 1));
        let r = validate_instance(&files);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].code, ViolationCode::FileConflict);
    }

    #[test]
    fn external_inputs_are_fine_but_reads_from_descendants_are_not() {
        let mut w = chain();
        w.tasks[0].input_files.push(FileSpec::new("raw.dat", 10));
        assert!(validate_instance(&w).is_valid());
        w.tasks[2].output_files.push(FileSpec::new("late.dat", 1));
        w.tasks[0].input_files.push(FileSpec::new("late.dat", 1));
        assert!(validate_instance(&w).has(ViolationCode::FileConflict));
    }

    #[test]
    fn same_file_in_and_out_conflicts() {
        let mut w = chain();
        w.tasks[1].input_files.push(FileSpec::new("x", 1));
        w.tasks[1].output_files.push(FileSpec::new("x", 1));
        assert!(validate_instance(&w).has(ViolationCode::FileConflict));
    }

    #[test]
    fn children_transpose_parents() {
        let w = chain();
        for t in &w.tasks {
            for c in t.children() {
                assert!(w.task(c).unwrap().parents.contains(&t.id));
            }
            for p in &t.parents {
                assert!(w.task(p).unwrap().children().contains(&t.id));
            }
        }
    }
}
