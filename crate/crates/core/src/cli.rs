//! Command-line front end. `main` only forwards to [`run`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::corpus::emit_corpus;
use crate::generator::{generate, GenRequest};
use crate::graph::compute_type_hashes;
use crate::metrics::{makespan_rel_diff, thf_with_mode, ThfMode};
use crate::patterns::find_pattern_occurrences;
use crate::recipe::{build_recipe, load_recipe, save_recipe, Recipe};
use crate::simulator::{simulate, Platform};
use crate::wfformat::{parse_instance, validate_instance, WorkflowInstance};

#[derive(Debug, Parser)]
#[command(name = "wfforge", version, about = "Workflow instance analysis, recipe-based generation and simulation")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "WFFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Suppress warnings.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check instances against the format rules.
    Validate { paths: Vec<PathBuf> },
    /// Print the type hash of every task in topological order.
    Hash { path: PathBuf },
    /// List the pattern occurrences of an instance.
    Patterns { path: PathBuf },
    /// Build a recipe from instances of one application.
    Analyze {
        /// Instance files or directories of them.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic instance from a recipe.
    Generate {
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        tasks: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Type hash frequency distance between instances.
    Thf {
        #[arg(long, required = true, num_args = 1..)]
        real: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        synthetic: Vec<PathBuf>,
        /// Compare raw per-hash counts instead of frequencies.
        #[arg(long)]
        raw_counts: bool,
    },
    /// Simulate instances on a homogeneous cluster.
    Simulate(SimulateArgs),
    /// Analyze, generate at several scales and score against the inputs.
    ClosedLoop {
        /// Directory of instances; each subdirectory is a separate application.
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1x,2x,4x")]
        scales: Vec<String>,
        /// Synthetic instances per scale.
        #[arg(long, default_value_t = 1)]
        samples: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference corpus utilities.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, required = true, num_args = 1..)]
    instance: Vec<PathBuf>,
    #[arg(long, default_value_t = 4)]
    nodes: u32,
    #[arg(long, default_value_t = 48)]
    cores: u32,
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Bytes per second; transfers are free when absent.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = 95.0)]
    p_static: f64,
    #[arg(long, default_value_t = 3.0)]
    p_core: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CorpusAction {
    /// Write the reference corpus and its manifest.
    Emit {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Module(String),
}

type Outcome = Result<i32, Failure>;

fn fail(msg: impl Into<String>) -> Failure {
    Failure::Module(msg.into())
}

/// Parses `args` (program name first) and runs the command.
///
/// Returns the process exit code: 0 on success, 1 when an operation fails or
/// validation finds violations, 2 on usage errors.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
            let _ = writeln!(err, "{line}");
            return 2;
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Off
    } else {
        log::LevelFilter::Warn
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    log::set_max_level(level);

    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Module(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match &cli.command {
        Command::Validate { paths } => cmd_validate(cli.format, paths, out, err),
        Command::Hash { path } => cmd_hash(cli.format, path, out),
        Command::Patterns { path } => cmd_patterns(cli.format, path, out),
        Command::Analyze { paths, out: dest } => {
            let files = expand_paths(paths)?;
            let instances = files.iter().map(|p| read_instance(p)).collect::<Result<Vec<_>, _>>()?;
            let recipe = build_recipe(&instances).map_err(|e| fail(e.to_string()))?;
            emit(dest.as_deref(), &save_recipe(&recipe).map_err(|e| fail(e.to_string()))?, out)
        }
        Command::Generate { recipe, tasks, out: dest } => {
            let recipe = read_recipe(recipe)?;
            let w = generate(&GenRequest {
                recipe: &recipe,
                target_tasks: *tasks,
                seed: cli.seed,
            })
            .map_err(|e| fail(e.to_string()))?;
            let text = crate::wfformat::serialize_instance(&w).map_err(|e| fail(e.to_string()))?;
            emit(dest.as_deref(), &text, out)
        }
        Command::Thf {
            real,
            synthetic,
            raw_counts,
        } => cmd_thf(cli.format, real, synthetic, *raw_counts, out),
        Command::Simulate(args) => cmd_simulate(cli.format, args, out),
        Command::ClosedLoop {
            instances,
            scales,
            samples,
            out: dest,
        } => cmd_closed_loop(cli.seed, instances, scales, *samples, dest.as_deref(), out),
        Command::Corpus {
            action: CorpusAction::Emit { out: dir },
        } => {
            let manifest = emit_corpus(dir, cli.seed).map_err(|e| fail(e.to_string()))?;
            let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            text.push('\n');
            emit(None, &text, out)
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn read_instance(path: &Path) -> Result<WorkflowInstance, Failure> {
    parse_instance(&read_text(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn read_recipe(path: &Path) -> Result<Recipe, Failure> {
    load_recipe(&read_text(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))
}

/// Files as given; directories contribute their `*.json` files except the
/// corpus manifest, sorted by name.
fn expand_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            files.extend(json_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Failure::Usage("no instance files given".into()));
    }
    Ok(files)
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| fail(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
        .collect();
    files.sort();
    Ok(files)
}

fn emit(dest: Option<&Path>, text: &str, out: &mut dyn Write) -> Outcome {
    match dest {
        Some(path) => fs::write(path, text).map_err(|e| fail(format!("{}: {e}", path.display())))?,
        None => out.write_all(text.as_bytes()).map_err(|e| fail(e.to_string()))?,
    }
    Ok(0)
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_validate(format: Format, paths: &[PathBuf], out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    if paths.is_empty() {
        return Err(Failure::Usage("no instance files given".into()));
    }
    let mut results = Vec::new();
    let mut csv = String::from("path,code,location,message\n");
    let mut failures = Vec::new();
    for p in paths {
        let w = read_instance(p)?;
        let report = validate_instance(&w);
        let shown = p.display().to_string();
        for v in &report.violations {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                csv_field(&shown),
                v.code,
                csv_field(&v.path),
                csv_field(&v.message)
            );
        }
        if !report.is_valid() {
            let codes: Vec<String> = report.violations.iter().map(|v| v.code.to_string()).collect();
            failures.push(format!("{shown}: {}", codes.join(",")));
        }
        results.push(json!({
            "path": shown,
            "valid": report.is_valid(),
            "violations": report.violations.iter().map(|v| json!({
                "code": v.code.to_string(),
                "path": v.path,
                "message": v.message,
            })).collect::<Vec<_>>(),
        }));
    }
    let text = match format {
        Format::Csv => csv,
        Format::Json if results.len() == 1 => json_text(&results[0]),
        Format::Json => json_text(&Value::Array(results)),
    };
    emit(None, &text, out)?;
    if failures.is_empty() {
        Ok(0)
    } else {
        let _ = writeln!(err, "error: invalid instance {}", failures.join("; "));
        Ok(1)
    }
}

fn cmd_hash(format: Format, path: &Path, out: &mut dyn Write) -> Outcome {
    let w = read_instance(path)?;
    let hw = compute_type_hashes(&w).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    let order = hw.dag().topo_order();
    let text = match format {
        Format::Csv => {
            let mut s = String::from("id,type,hash\n");
            for &i in order {
                let t = &w.tasks[i];
                let _ = writeln!(s, "{},{},{}", csv_field(&t.id), csv_field(&t.task_type), hw.type_hash_at(i));
            }
            s
        }
        Format::Json => json_text(&json!({
            "instance": w.name,
            "hashes": order.iter().map(|&i| json!({
                "id": w.tasks[i].id,
                "type": w.tasks[i].task_type,
                "hash": hw.type_hash_at(i).to_hex(),
            })).collect::<Vec<_>>(),
        })),
    };
    emit(None, &text, out)
}

fn cmd_patterns(format: Format, path: &Path, out: &mut dyn Write) -> Outcome {
    let w = read_instance(path)?;
    let hw = compute_type_hashes(&w).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    let catalog = find_pattern_occurrences(&hw);
    let groups = catalog.to_id_groups();
    let text = match format {
        Format::Csv => {
            let mut s = String::from("pattern,occurrence,task\n");
            for (g, group) in groups.iter().enumerate() {
                for (k, occ) in group.iter().enumerate() {
                    for id in occ {
                        let _ = writeln!(s, "{g},{k},{}", csv_field(id));
                    }
                }
            }
            s
        }
        Format::Json => json_text(&json!({ "instance": w.name, "patterns": groups })),
    };
    emit(None, &text, out)
}

fn cmd_thf(format: Format, real: &[PathBuf], synthetic: &[PathBuf], raw: bool, out: &mut dyn Write) -> Outcome {
    let mode = if raw { ThfMode::RawCounts } else { ThfMode::Normalized };
    let reals = real.iter().map(|p| read_instance(p)).collect::<Result<Vec<_>, _>>()?;
    let synths = synthetic.iter().map(|p| read_instance(p)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (rp, r) in real.iter().zip(&reals) {
        for (sp, s) in synthetic.iter().zip(&synths) {
            let score = thf_with_mode::<f64>(r, s, mode).map_err(|e| fail(e.to_string()))?;
            rows.push((rp.display().to_string(), sp.display().to_string(), score));
        }
    }
    let text = match format {
        Format::Csv => {
            let mut s = String::from("real,synthetic,thf\n");
            for (r, sy, score) in &rows {
                let _ = writeln!(s, "{},{},{}", csv_field(r), csv_field(sy), score.value);
            }
            s
        }
        Format::Json if rows.len() == 1 => json_text(&json!({ "thf": rows[0].2.value, "universe": rows[0].2.hash_universe_size })),
        Format::Json => json_text(&Value::Array(
            rows.iter()
                .map(|(r, sy, score)| json!({ "real": r, "synthetic": sy, "thf": score.value, "universe": score.hash_universe_size }))
                .collect(),
        )),
    };
    emit(None, &text, out)
}

fn cmd_simulate(format: Format, args: &SimulateArgs, out: &mut dyn Write) -> Outcome {
    let platform = Platform {
        nodes: args.nodes,
        cores_per_node: args.cores,
        core_speed_factor: args.speed,
        wan_bandwidth: args.bandwidth,
        p_static: args.p_static,
        p_core: args.p_core,
    };
    platform.check().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut reports = Vec::new();
    for p in &args.instance {
        let w = read_instance(p)?;
        let report = simulate(&w, &platform).map_err(|e| fail(format!("{}: {e}", p.display())))?;
        reports.push((w.len(), report));
    }
    let text = if format == Format::Csv || reports.len() > 1 {
        let mut s = String::from("tasks,makespan_s,energy_kwh\n");
        for (n, r) in &reports {
            let _ = writeln!(s, "{n},{},{}", r.makespan, r.energy_kwh);
        }
        s
    } else {
        json_text(&json!({
            "platform": platform,
            "report": reports[0].1,
        }))
    };
    emit(args.out.as_deref(), &text, out)
}

fn parse_scale(s: &str) -> Result<f64, Failure> {
    let v: f64 = s
        .trim()
        .trim_end_matches(['x', 'X'])
        .parse()
        .map_err(|_| Failure::Usage(format!("bad scale `{s}`, expected e.g. 2x")))?;
    if v.is_finite() && v >= 1.0 {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("scale `{s}` must be at least 1x")))
    }
}

fn cmd_closed_loop(
    seed: u64,
    dir: &Path,
    scales: &[String],
    samples: u64,
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> Outcome {
    let scales = scales.iter().map(|s| Ok((s.trim().to_string(), parse_scale(s)?))).collect::<Result<Vec<_>, _>>()?;
    if samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    let mut apps: Vec<(String, Vec<PathBuf>)> = Vec::new();
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| fail(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for sub in subdirs {
        let files = json_files(&sub)?;
        if !files.is_empty() {
            let name = sub.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            apps.push((name, files));
        }
    }
    let top = json_files(dir)?;
    if !top.is_empty() {
        apps.insert(0, (String::new(), top));
    }
    if apps.is_empty() {
        return Err(fail(format!("{}: no instance files found", dir.display())));
    }

    let platform = Platform::<f64>::default();
    let mut csv = String::from("application,scale,target_tasks,real,real_tasks,synthetic_tasks,thf,makespan_rel_diff\n");
    for (_, files) in &apps {
        let instances = files.iter().map(|p| read_instance(p)).collect::<Result<Vec<_>, _>>()?;
        let recipe = build_recipe(&instances).map_err(|e| fail(e.to_string()))?;
        for (label, factor) in &scales {
            let target = (recipe.min_tasks as f64 * factor).round() as usize;
            let real = instances
                .iter()
                .min_by_key(|w| (w.len().abs_diff(target), w.len()))
                .expect("non-empty application");
            let real_ms = simulate(real, &platform).map_err(|e| fail(e.to_string()))?.makespan;
            let (mut thf_sum, mut diff_sum, mut tasks_sum) = (0.0, 0.0, 0usize);
            for k in 0..samples {
                let w = generate(&GenRequest {
                    recipe: &recipe,
                    target_tasks: target,
                    seed: seed.wrapping_add(k),
                })
                .map_err(|e| fail(e.to_string()))?;
                thf_sum += thf_with_mode::<f64>(real, &w, ThfMode::Normalized)
                    .map_err(|e| fail(e.to_string()))?
                    .value;
                let ms = simulate(&w, &platform).map_err(|e| fail(e.to_string()))?.makespan;
                diff_sum += makespan_rel_diff(ms, real_ms).map_err(|e| fail(e.to_string()))?;
                tasks_sum += w.len();
            }
            let n = samples as f64;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                csv_field(&recipe.application),
                csv_field(label),
                target,
                csv_field(&real.name),
                real.len(),
                tasks_sum as f64 / n,
                thf_sum / n,
                diff_sum / n
            );
        }
    }
    emit(dest, &csv, out)
}
