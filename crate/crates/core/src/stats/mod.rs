//! Per-task-type distribution fitting and sampling.
//!
//! Every candidate family is initialized from sample moments and then refined
//! by coordinate descent on the mean squared distance between its CDF and the
//! empirical CDF at the distinct sample points. The family with the smallest
//! distance wins. Tiny or constant samples are kept verbatim as `empirical`.

mod family;
pub mod special;

use rand::RngCore;
use serde::Serialize;
use serde_json::{Map, Number, Value};
use thiserror::Error;

pub use family::Family;

use crate::num::Real;

/// Samples shorter than this are never generalized.
pub const MIN_PARAMETRIC_SAMPLE: usize = 5;
pub const MAX_REFINE_ITERATIONS: usize = 200;
pub const REFINE_REL_TOL: f64 = 1e-9;
/// Redraws before a sample outside [min, max] is clamped.
pub const MAX_RESAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("sample value {0} is negative or not finite")]
    InvalidValue(String),
    #[error("bad fit at `{path}`: {reason}")]
    BadFit { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Metric {
    #[serde(rename = "runtime")]
    RuntimeS,
    #[serde(rename = "inputBytes")]
    InputBytes,
    #[serde(rename = "outputBytes")]
    OutputBytes,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::RuntimeS, Metric::InputBytes, Metric::OutputBytes];

    pub fn key(self) -> &'static str {
        match self {
            Metric::RuntimeS => "runtime",
            Metric::InputBytes => "inputBytes",
            Metric::OutputBytes => "outputBytes",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub task_type: String,
    pub metric: Metric,
    pub values: Vec<T>,
}

/// Right-continuous step function; ties are merged into one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf<T> {
    pub points: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Real> Ecdf<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn empirical_cdf<T: Real>(values: &[T]) -> Result<Ecdf<T>, StatsError> {
    Ok(ecdf_of_sorted(&sorted_checked(values)?))
}

fn sorted_checked<T: Real>(values: &[T]) -> Result<Vec<T>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(StatsError::InvalidValue(bad.to_string()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(sorted)
}

fn ecdf_of_sorted<T: Real>(sorted: &[T]) -> Ecdf<T> {
    let n = T::from_usize_lossy(sorted.len());
    let mut points = Vec::new();
    let mut probs = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let p = T::from_usize_lossy(i + 1) / n;
        if points.last() == Some(&v) {
            *probs.last_mut().expect("paired") = p;
        } else {
            points.push(v);
            probs.push(p);
        }
    }
    Ecdf { points, probs }
}

/// Mean squared CDF error at the distinct sample points.
pub fn cdf_mse<T: Real>(family: Family, params: &[T], ecdf: &Ecdf<T>) -> T {
    if !family.valid_params(params) {
        return T::infinity();
    }
    let sum: T = ecdf
        .points
        .iter()
        .zip(&ecdf.probs)
        .map(|(&x, &p)| {
            let d = family.cdf(params, x) - p;
            d * d
        })
        .sum();
    let mse = sum / T::from_usize_lossy(ecdf.len());
    if mse.is_finite() {
        mse
    } else {
        T::infinity()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub distribution: Family,
    pub params: Vec<T>,
    /// Absent for fits loaded from a document.
    pub mse: Option<T>,
    pub min: T,
    pub max: T,
}

impl<T: Real> FitResult<T> {
    pub fn empirical(sorted: Vec<T>) -> Self {
        let min = sorted[0];
        let max = sorted[sorted.len() - 1];
        Self {
            distribution: Family::Empirical,
            params: sorted,
            mse: Some(T::zero()),
            min,
            max,
        }
    }

    pub fn cdf(&self, x: T) -> T {
        self.distribution.cdf(&self.params, x)
    }

    pub fn quantile(&self, u: T) -> T {
        self.distribution.quantile(&self.params, u)
    }

    pub fn is_valid(&self) -> bool {
        self.min <= self.max && self.distribution.valid_params(&self.params)
    }

    /// `{"min": .., "max": .., "distribution": {"name": .., "params": [..]}}`
    pub fn to_json(&self) -> Value {
        let mut dist = Map::new();
        dist.insert("name".into(), Value::String(self.distribution.name().into()));
        dist.insert("params".into(), Value::Array(self.params.iter().map(|p| num(*p)).collect()));
        let mut m = Map::new();
        m.insert("min".into(), num(self.min));
        m.insert("max".into(), num(self.max));
        m.insert("distribution".into(), Value::Object(dist));
        Value::Object(m)
    }

    /// Parses a fit fragment. Foreign family names are mapped onto the
    /// supported set; the returned note describes any such mapping.
    pub fn from_json(v: &Value, path: &str) -> Result<(Self, Option<String>), StatsError> {
        let bad = |p: &str, reason: &str| StatsError::BadFit {
            path: format!("{path}.{p}"),
            reason: reason.into(),
        };
        let get_num = |key: &str| {
            v.get(key)
                .ok_or_else(|| bad(key, "missing"))?
                .as_f64()
                .ok_or_else(|| bad(key, "expected a number"))
        };
        let min = get_num("min")?;
        let max = get_num("max")?;
        let dist = v.get("distribution").ok_or_else(|| bad("distribution", "missing"))?;
        let name = dist
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("distribution.name", "expected a string"))?;
        let params = dist
            .get("params")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("distribution.params", "expected an array"))?
            .iter()
            .map(|p| p.as_f64().ok_or_else(|| bad("distribution.params", "expected numbers")))
            .collect::<Result<Vec<f64>, _>>()?;
        if !(min <= max) {
            return Err(bad("min", "min exceeds max"));
        }
        let (family, params, note) = match name.parse::<Family>() {
            Ok(f) => (f, params, None),
            Err(_) => map_foreign(name, &params, min, max),
        };
        if !family.valid_params(&params) {
            return Err(bad("distribution.params", &format!("invalid parameters for {family}")));
        }
        let mut params: Vec<T> = params.into_iter().map(T::lit).collect();
        if family == Family::Empirical {
            params.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        }
        let fit = Self {
            distribution: family,
            params,
            mse: None,
            min: T::lit(min),
            max: T::lit(max),
        };
        Ok((fit, note))
    }
}

fn num<T: Real>(v: T) -> Value {
    Number::from_f64(v.as_f64()).map(Value::Number).unwrap_or(Value::Null)
}

/// Maps a foreign (SciPy-style `shape.., loc, scale`) family onto the
/// supported set. Unrecognized families become uniform over [min, max].
pub fn map_foreign(name: &str, p: &[f64], min: f64, max: f64) -> (Family, Vec<f64>, Option<String>) {
    let fallback = || {
        let hi = if max > min { max } else { min + 1.0 };
        (
            Family::Uniform,
            vec![min, hi],
            Some(format!("distribution `{name}` unsupported; replaced by uniform over [min, max]")),
        )
    };
    let mapped = |f: Family, params: Vec<f64>| {
        if f.valid_params(&params) {
            (f, params, Some(format!("distribution `{name}` mapped to `{f}`")))
        } else {
            fallback()
        }
    };
    match (name, p) {
        ("norm", [loc, scale]) => mapped(Family::Normal, vec![*loc, *scale]),
        ("skewnorm", [a, loc, scale]) => {
            let delta = a / (1.0 + a * a).sqrt();
            let c = (2.0 / std::f64::consts::PI).sqrt();
            let mean = loc + scale * delta * c;
            let sd = scale * (1.0 - delta * delta * c * c).sqrt();
            mapped(Family::Normal, vec![mean, sd])
        }
        ("lognorm", [s, _loc, scale]) => mapped(Family::Lognormal, vec![scale.ln(), *s]),
        ("expon", [_loc, scale]) => mapped(Family::Exponential, vec![1.0 / scale]),
        ("gamma", [a, _loc, scale]) => mapped(Family::Gamma, vec![*a, *scale]),
        ("weibull_min", [c, _loc, scale]) => mapped(Family::Weibull, vec![*c, *scale]),
        ("beta", [a, b, ..]) => mapped(Family::Beta, vec![*a, *b]),
        ("pareto", [b, loc, scale]) => mapped(Family::Pareto, vec![loc + scale, *b]),
        ("triang", [c, loc, scale]) => mapped(Family::Triangular, vec![*loc, loc + c * scale, loc + scale]),
        ("uniform", [loc, scale]) => mapped(Family::Uniform, vec![*loc, loc + scale]),
        _ => fallback(),
    }
}

/// Fits one family, or `None` when it cannot describe the data.
pub fn fit_family<T: Real>(family: Family, values: &[T]) -> Result<Option<FitResult<T>>, StatsError> {
    let sorted = sorted_checked(values)?;
    let ecdf = ecdf_of_sorted(&sorted);
    Ok(fit_sorted(family, &sorted, &ecdf))
}

fn fit_sorted<T: Real>(family: Family, sorted: &[T], ecdf: &Ecdf<T>) -> Option<FitResult<T>> {
    if family == Family::Empirical {
        return Some(FitResult::empirical(sorted.to_vec()));
    }
    let start = family.initial_params(sorted)?;
    let (params, mse) = refine(family, start, sorted, ecdf);
    mse.is_finite().then(|| FitResult {
        distribution: family,
        params,
        mse: Some(mse),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    })
}

/// Coordinate descent with adaptive per-parameter steps.
fn refine<T: Real>(family: Family, mut params: Vec<T>, sorted: &[T], ecdf: &Ecdf<T>) -> (Vec<T>, T) {
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    let spread = (hi - lo).max(lo.abs().max(hi.abs()) * T::lit(1e-6)).max(T::min_positive_value());
    let floor = spread * T::lit(1e-6);
    let tol = T::lit(REFINE_REL_TOL);
    let mut steps: Vec<T> = params.iter().map(|p| T::lit(0.1) * p.abs().max(spread * T::lit(0.01))).collect();
    let mut best = cdf_mse(family, &params, ecdf);

    for _ in 0..MAX_REFINE_ITERATIONS {
        for i in 0..params.len() {
            let original = params[i];
            let mut improved = false;
            for dir in [T::one(), -T::one()] {
                params[i] = original + dir * steps[i];
                let m = cdf_mse(family, &params, ecdf);
                if m < best {
                    best = m;
                    improved = true;
                    break;
                }
            }
            if improved {
                steps[i] = steps[i] * T::lit(1.5);
            } else {
                params[i] = original;
                steps[i] = steps[i] * T::lit(0.5);
            }
        }
        let converged = params
            .iter()
            .zip(&steps)
            .all(|(p, s)| *s <= tol * p.abs().max(floor));
        if converged {
            break;
        }
    }
    (params, best)
}

/// Best-fitting family for a sample; `empirical` for short or constant data.
pub fn fit_best<T: Real>(sample: &Sample<T>) -> Result<FitResult<T>, StatsError> {
    fit_values(&sample.values)
}

pub fn fit_values<T: Real>(values: &[T]) -> Result<FitResult<T>, StatsError> {
    Ok(fit_report(values)?.best)
}

/// The winning fit together with every parametric candidate that was tried.
#[derive(Debug, Clone)]
pub struct FitReport<T> {
    pub best: FitResult<T>,
    /// Empty when the sample was kept as `empirical` without fitting.
    pub candidates: Vec<FitResult<T>>,
}

pub fn fit_report<T: Real>(values: &[T]) -> Result<FitReport<T>, StatsError> {
    let sorted = sorted_checked(values)?;
    if let Some(neg) = sorted.iter().find(|v| **v < T::zero()) {
        return Err(StatsError::InvalidValue(neg.to_string()));
    }
    let keep = |best| FitReport {
        best,
        candidates: Vec::new(),
    };
    if sorted[0] == sorted[sorted.len() - 1] {
        return Ok(keep(FitResult::empirical(vec![sorted[0]])));
    }
    if sorted.len() < MIN_PARAMETRIC_SAMPLE {
        return Ok(keep(FitResult::empirical(sorted)));
    }
    let ecdf = ecdf_of_sorted(&sorted);
    let candidates: Vec<FitResult<T>> = Family::PARAMETRIC
        .iter()
        .filter_map(|&f| fit_sorted(f, &sorted, &ecdf))
        .collect();
    let mut best: Option<&FitResult<T>> = None;
    for fit in &candidates {
        if best.is_none_or(|b| fit.mse < b.mse) {
            best = Some(fit);
        }
    }
    match best.cloned() {
        Some(best) => Ok(FitReport { best, candidates }),
        None => Ok(keep(FitResult::empirical(sorted))),
    }
}

/// Uniform draw on the open interval (0, 1) with 53 bits of resolution.
pub fn open_unit<T: Real, R: RngCore + ?Sized>(rng: &mut R) -> T {
    let bits = rng.next_u64() >> 11;
    T::lit((bits as f64 + 0.5) / (1u64 << 53) as f64)
}

/// Inverse-transform draw truncated to [min, max].
pub fn sample_from<T: Real, R: RngCore + ?Sized>(fit: &FitResult<T>, rng: &mut R) -> T {
    let mut x = fit.quantile(open_unit(rng));
    for _ in 0..MAX_RESAMPLES {
        if x >= fit.min && x <= fit.max {
            return x;
        }
        x = fit.quantile(open_unit(rng));
    }
    if x.is_nan() {
        return fit.min;
    }
    x.max(fit.min).min(fit.max)
}
