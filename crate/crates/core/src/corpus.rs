//! Pseudo-real reference workloads with known generating recipes.
//!
//! Three application families are modelled on common scientific workflow
//! shapes: a flat bag of tasks (`blast`), two lanes of parallel chains that
//! merge (`epigenomics`) and two image datasets with different per-image
//! pipelines (`montage`). Each family is emitted at four scales.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::generator::materialize;
use crate::graph::compute_type_hashes;
use crate::patterns::find_pattern_occurrences;
use crate::recipe::{Recipe, TypeStats};
use crate::stats::{Family, FitResult};
use crate::wfformat::{serialize_instance, Task, WorkflowInstance};

pub const DEFAULT_SEED: u64 = 2021;
pub const SCALES: [usize; 4] = [1, 2, 3, 4];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot write `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AppFamily {
    Blast,
    Epigenomics,
    Montage,
}

impl AppFamily {
    pub const ALL: [AppFamily; 3] = [AppFamily::Blast, AppFamily::Epigenomics, AppFamily::Montage];

    pub fn name(self) -> &'static str {
        match self {
            AppFamily::Blast => "blast",
            AppFamily::Epigenomics => "epigenomics",
            AppFamily::Montage => "montage",
        }
    }

    fn stream(self) -> u64 {
        match self {
            AppFamily::Blast => 1,
            AppFamily::Epigenomics => 2,
            AppFamily::Montage => 3,
        }
    }

    /// Task count at scale 1.
    pub fn min_tasks(self) -> usize {
        shape(self, 1).ids.len()
    }
}

#[derive(Default)]
struct Shape {
    ids: Vec<String>,
    types: Vec<String>,
    parents: Vec<Vec<usize>>,
}

impl Shape {
    fn add(&mut self, id: String, ty: &str, parents: Vec<usize>) -> usize {
        self.ids.push(id);
        self.types.push(ty.to_string());
        self.parents.push(parents);
        self.ids.len() - 1
    }
}

fn shape(family: AppFamily, scale: usize) -> Shape {
    let mut s = Shape::default();
    match family {
        AppFamily::Blast => {
            let split = s.add("split".into(), "split", vec![]);
            let hits: Vec<usize> = (0..40 * scale)
                .map(|i| s.add(format!("blastall_{i:04}"), "blastall", vec![split]))
                .collect();
            s.add("cat".into(), "cat", hits);
        }
        AppFamily::Epigenomics => {
            let chain = ["filterContams", "sol2sanger", "fast2bfq", "map"];
            let mut merges = Vec::new();
            for (lane, width) in [("a", 2 * scale), ("b", 4 * scale)] {
                let split = s.add(format!("fastqSplit_{lane}"), "fastqSplit", vec![]);
                let mut ends = Vec::new();
                for i in 0..width {
                    let mut prev = split;
                    for ty in chain {
                        prev = s.add(format!("{ty}_{lane}_{i:04}"), ty, vec![prev]);
                    }
                    ends.push(prev);
                }
                merges.push(s.add(format!("mapMerge_{lane}"), "mapMerge", ends));
            }
            let index = s.add("maqIndex".into(), "maqIndex", merges);
            s.add("pileup".into(), "pileup", vec![index]);
        }
        AppFamily::Montage => {
            let datasets: [(&str, usize, &[&str]); 2] = [
                ("a", 4 * scale, &["mProject", "mBackground"]),
                ("b", 6 * scale, &["mProject", "mDiffFit", "mBackground"]),
            ];
            let mut adds = Vec::new();
            for (set, width, chain) in datasets {
                let hdr = s.add(format!("mHdr_{set}"), "mHdr", vec![]);
                let mut ends = Vec::new();
                for i in 0..width {
                    let mut prev = hdr;
                    for ty in chain {
                        prev = s.add(format!("{ty}_{set}_{i:04}"), ty, vec![prev]);
                    }
                    ends.push(prev);
                }
                let tbl = s.add(format!("mImgtbl_{set}"), "mImgtbl", ends);
                adds.push(s.add(format!("mAdd_{set}"), "mAdd", vec![tbl]));
            }
            s.add("mViewer".into(), "mViewer", adds);
        }
    }
    s
}

fn dist(family: Family, params: &[f64]) -> FitResult<f64> {
    let (min, max) = match family {
        Family::Uniform => (params[0], params[1]),
        Family::Triangular => (params[0], params[2]),
        _ => (
            family.quantile(params, 1e-6).max(0.0),
            family.quantile(params, 1.0 - 1e-6),
        ),
    };
    FitResult {
        distribution: family,
        params: params.to_vec(),
        mse: None,
        min,
        max,
    }
}

fn stats(runtime: FitResult<f64>, input_bytes: FitResult<f64>, output_bytes: FitResult<f64>) -> TypeStats {
    TypeStats {
        runtime,
        input_bytes,
        output_bytes,
    }
}

/// Hand-authored per-type distributions of a family.
pub fn authored_stats(family: AppFamily) -> BTreeMap<String, TypeStats> {
    use Family::*;
    let mb = 1.0e6;
    let ln = f64::ln;
    let table: Vec<(&str, TypeStats)> = match family {
        AppFamily::Blast => vec![
            (
                "split",
                stats(dist(Normal, &[5.0, 0.25]), dist(Uniform, &[100.0 * mb, 200.0 * mb]), dist(Uniform, &[100.0 * mb, 200.0 * mb])),
            ),
            (
                "blastall",
                stats(dist(Uniform, &[90.0, 110.0]), dist(Uniform, &[100.0 * mb, 200.0 * mb]), dist(Lognormal, &[ln(5.0 * mb), 0.3])),
            ),
            (
                "cat",
                stats(dist(Normal, &[5.0, 0.25]), dist(Uniform, &[200.0 * mb, 800.0 * mb]), dist(Gamma, &[20.0, 25.0 * mb])),
            ),
        ],
        AppFamily::Epigenomics => vec![
            (
                "fastqSplit",
                stats(dist(Gamma, &[4.0, 2.5]), dist(Uniform, &[400.0 * mb, 600.0 * mb]), dist(Normal, &[500.0 * mb, 20.0 * mb])),
            ),
            (
                "filterContams",
                stats(dist(Gamma, &[9.0, 0.5]), dist(Normal, &[500.0 * mb, 20.0 * mb]), dist(Lognormal, &[ln(40.0 * mb), 0.2])),
            ),
            (
                "sol2sanger",
                stats(dist(Lognormal, &[ln(1.2), 0.2]), dist(Lognormal, &[ln(40.0 * mb), 0.2]), dist(Lognormal, &[ln(35.0 * mb), 0.2])),
            ),
            (
                "fast2bfq",
                stats(dist(Weibull, &[4.0, 3.0]), dist(Lognormal, &[ln(35.0 * mb), 0.2]), dist(Weibull, &[3.0, 8.0 * mb])),
            ),
            (
                "map",
                stats(dist(Normal, &[60.0, 6.0]), dist(Weibull, &[3.0, 8.0 * mb]), dist(Gamma, &[16.0, 0.25 * mb])),
            ),
            (
                "mapMerge",
                stats(dist(Triangular, &[5.0, 8.0, 14.0]), dist(Uniform, &[10.0 * mb, 40.0 * mb]), dist(Normal, &[30.0 * mb, 3.0 * mb])),
            ),
            (
                "maqIndex",
                stats(dist(Normal, &[40.0, 4.0]), dist(Uniform, &[40.0 * mb, 80.0 * mb]), dist(Normal, &[60.0 * mb, 5.0 * mb])),
            ),
            (
                "pileup",
                stats(dist(Uniform, &[50.0, 70.0]), dist(Normal, &[60.0 * mb, 5.0 * mb]), dist(Exponential, &[1.0 / (2.0 * mb)])),
            ),
        ],
        AppFamily::Montage => vec![
            (
                "mHdr",
                stats(dist(Uniform, &[0.5, 1.5]), dist(Uniform, &[1.0e3, 4.0e3]), dist(Uniform, &[1.0e3, 2.0e3])),
            ),
            (
                "mProject",
                stats(dist(Normal, &[14.0, 1.4]), dist(Uniform, &[3.0 * mb, 5.0 * mb]), dist(Normal, &[8.0 * mb, 0.5 * mb])),
            ),
            (
                "mDiffFit",
                stats(dist(Beta, &[2.0, 5.0]), dist(Normal, &[8.0 * mb, 0.5 * mb]), dist(Pareto, &[2.0e4, 4.0])),
            ),
            (
                "mBackground",
                stats(dist(Gamma, &[16.0, 0.25]), dist(Normal, &[8.0 * mb, 0.5 * mb]), dist(Normal, &[8.0 * mb, 0.5 * mb])),
            ),
            (
                "mImgtbl",
                stats(dist(Lognormal, &[ln(3.0), 0.15]), dist(Uniform, &[40.0 * mb, 100.0 * mb]), dist(Uniform, &[1.0e4, 5.0e4])),
            ),
            (
                "mAdd",
                stats(dist(Weibull, &[5.0, 20.0]), dist(Uniform, &[1.0e4, 5.0e4]), dist(Normal, &[150.0 * mb, 15.0 * mb])),
            ),
            (
                "mViewer",
                stats(dist(Triangular, &[8.0, 10.0, 15.0]), dist(Normal, &[300.0 * mb, 20.0 * mb]), dist(Lognormal, &[ln(2.0 * mb), 0.25])),
            ),
        ],
    };
    table.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub fn instance_name(family: AppFamily, scale: usize) -> String {
    format!("{}-{}", family.name(), shape_size(family, scale))
}

fn shape_size(family: AppFamily, scale: usize) -> usize {
    shape(family, scale).ids.len()
}

/// One pseudo-real instance of `family` at `scale` (1 = smallest).
pub fn family_instance(family: AppFamily, scale: usize, seed: u64) -> WorkflowInstance {
    let s = shape(family, scale);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(family.stream() << 16 | scale as u64);
    let name = format!("{}-{}", family.name(), s.ids.len());
    materialize(name, s.ids, s.types, &s.parents, &authored_stats(family), &mut rng)
        .expect("authored statistics cover every task type")
}

/// The family at every scale in [`SCALES`].
pub fn family_instances(family: AppFamily, seed: u64) -> Vec<WorkflowInstance> {
    SCALES.iter().map(|&k| family_instance(family, k, seed)).collect()
}

/// The recipe the family's instances are drawn from.
pub fn known_recipe(family: AppFamily) -> Recipe {
    let s = shape(family, 1);
    let name = instance_name(family, 1);
    let tasks = (0..s.ids.len())
        .map(|i| Task::new(s.ids[i].clone(), s.types[i].clone(), 0.0).with_parents(s.parents[i].iter().map(|&p| s.ids[p].clone())))
        .collect();
    let base_graph = WorkflowInstance::new(name, tasks);
    let catalog = {
        let hw = compute_type_hashes(&base_graph).expect("family shapes are acyclic");
        find_pattern_occurrences(&hw)
    };
    Recipe {
        application: family.name().to_string(),
        min_tasks: base_graph.len(),
        base_graph,
        catalog,
        type_stats: authored_stats(family),
        source_instances: SCALES.iter().map(|&k| instance_name(family, k)).collect(),
        notes: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub family: String,
    pub scale: usize,
    pub path: String,
    pub tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub instances: Vec<ManifestEntry>,
}

/// Writes `<out>/<family>/<name>.json` for every family and scale, plus
/// `<out>/manifest.json`.
pub fn emit_corpus(out: &Path, seed: u64) -> Result<CorpusManifest, CorpusError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Io { path, source }
    };
    let mut instances = Vec::new();
    for family in AppFamily::ALL {
        let dir = out.join(family.name());
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        for (w, &scale) in family_instances(family, seed).iter().zip(&SCALES) {
            let rel = format!("{}/{}.json", family.name(), w.name);
            let path = out.join(&rel);
            let text = serialize_instance(w).expect("corpus instances are valid");
            fs::write(&path, text).map_err(io(&path))?;
            instances.push(ManifestEntry {
                family: family.name().to_string(),
                scale,
                path: rel,
                tasks: w.len(),
            });
        }
    }
    let manifest = CorpusManifest { seed, instances };
    let path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io(&path))?;
    Ok(manifest)
}
