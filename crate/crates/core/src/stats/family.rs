//! Candidate distribution families: CDFs, quantiles and starting estimates.
//!
//! Parameter layouts:
//!
//! | family      | params                 |
//! |-------------|------------------------|
//! | uniform     | `[low, high]`          |
//! | normal      | `[mean, sd]`           |
//! | lognormal   | `[mu, sigma]` (of ln x)|
//! | exponential | `[rate]`               |
//! | gamma       | `[shape, scale]`       |
//! | weibull     | `[shape, scale]`       |
//! | beta        | `[alpha, beta]` on [0, 1] |
//! | pareto      | `[x_m, alpha]`         |
//! | triangular  | `[low, mode, high]`    |
//! | empirical   | sorted raw values      |

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::special::{beta_inc, gamma_fn, gamma_pq, ln_beta, ln_gamma, std_normal_cdf, std_normal_quantile};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Uniform,
    Normal,
    Lognormal,
    Exponential,
    Gamma,
    Weibull,
    Beta,
    Pareto,
    Triangular,
    Empirical,
}

impl Family {
    /// The parametric candidates, in fitting order.
    pub const PARAMETRIC: [Family; 9] = [
        Family::Uniform,
        Family::Normal,
        Family::Lognormal,
        Family::Exponential,
        Family::Gamma,
        Family::Weibull,
        Family::Beta,
        Family::Pareto,
        Family::Triangular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Normal => "normal",
            Family::Lognormal => "lognormal",
            Family::Exponential => "exponential",
            Family::Gamma => "gamma",
            Family::Weibull => "weibull",
            Family::Beta => "beta",
            Family::Pareto => "pareto",
            Family::Triangular => "triangular",
            Family::Empirical => "empirical",
        }
    }

    pub fn param_count(self) -> Option<usize> {
        match self {
            Family::Exponential => Some(1),
            Family::Triangular => Some(3),
            Family::Empirical => None,
            _ => Some(2),
        }
    }

    /// Whether `params` lie inside the family's parameter space.
    pub fn valid_params<T: Real>(self, p: &[T]) -> bool {
        if let Some(k) = self.param_count() {
            if p.len() != k {
                return false;
            }
        } else if p.is_empty() {
            return false;
        }
        if p.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let z = T::zero();
        match self {
            Family::Uniform => p[0] < p[1],
            Family::Normal | Family::Lognormal => p[1] > z,
            Family::Exponential => p[0] > z,
            Family::Gamma | Family::Weibull | Family::Beta | Family::Pareto => p[0] > z && p[1] > z,
            Family::Triangular => p[0] <= p[1] && p[1] <= p[2] && p[0] < p[2],
            Family::Empirical => true,
        }
    }

    /// CDF at `x`. `params` must satisfy [`Family::valid_params`].
    pub fn cdf<T: Real>(self, p: &[T], x: T) -> T {
        let z = T::zero();
        let one = T::one();
        match self {
            Family::Uniform => ((x - p[0]) / (p[1] - p[0])).max(z).min(one),
            Family::Normal => std_normal_cdf((x - p[0]) / p[1]),
            Family::Lognormal => {
                if x <= z {
                    z
                } else {
                    std_normal_cdf((x.ln() - p[0]) / p[1])
                }
            }
            Family::Exponential => {
                if x <= z {
                    z
                } else {
                    -(-p[0] * x).exp_m1()
                }
            }
            Family::Gamma => gamma_pq(p[0], x / p[1]).0,
            Family::Weibull => {
                if x <= z {
                    z
                } else {
                    -(-(x / p[1]).powf(p[0])).exp_m1()
                }
            }
            Family::Beta => beta_inc(p[0], p[1], x),
            Family::Pareto => {
                if x < p[0] {
                    z
                } else {
                    one - (p[0] / x).powf(p[1])
                }
            }
            Family::Triangular => {
                let (a, c, b) = (p[0], p[1], p[2]);
                if x <= a {
                    z
                } else if x >= b {
                    one
                } else if x <= c {
                    (x - a) * (x - a) / ((b - a) * (c - a))
                } else {
                    one - (b - x) * (b - x) / ((b - a) * (b - c))
                }
            }
            Family::Empirical => {
                let n = p.len();
                let k = p.partition_point(|&v| v <= x);
                T::from_usize_lossy(k) / T::from_usize_lossy(n)
            }
        }
    }

    fn pdf<T: Real>(self, p: &[T], x: T) -> T {
        let z = T::zero();
        let one = T::one();
        match self {
            Family::Gamma => {
                if x <= z {
                    return z;
                }
                ((p[0] - one) * x.ln() - x / p[1] - ln_gamma(p[0]) - p[0] * p[1].ln()).exp()
            }
            Family::Beta => {
                if x <= z || x >= one {
                    return z;
                }
                ((p[0] - one) * x.ln() + (p[1] - one) * (one - x).ln() - ln_beta(p[0], p[1])).exp()
            }
            _ => unreachable!("pdf only needed for iterative quantiles"),
        }
    }

    /// Inverse CDF for `u` in (0, 1).
    pub fn quantile<T: Real>(self, p: &[T], u: T) -> T {
        let one = T::one();
        match self {
            Family::Uniform => p[0] + u * (p[1] - p[0]),
            Family::Normal => p[0] + p[1] * std_normal_quantile(u),
            Family::Lognormal => (p[0] + p[1] * std_normal_quantile(u)).exp(),
            Family::Exponential => -(-u).ln_1p() / p[0],
            Family::Weibull => p[1] * (-(-u).ln_1p()).powf(one / p[0]),
            Family::Pareto => p[0] / (one - u).powf(one / p[1]),
            Family::Triangular => {
                let (a, c, b) = (p[0], p[1], p[2]);
                let fc = (c - a) / (b - a);
                if u < fc {
                    a + (u * (b - a) * (c - a)).sqrt()
                } else {
                    b - ((one - u) * (b - a) * (b - c)).sqrt()
                }
            }
            Family::Gamma => {
                let mean = p[0] * p[1];
                let sd = p[0].sqrt() * p[1];
                let mut hi = mean + T::lit(10.0) * sd;
                while self.cdf(p, hi) < u && hi.is_finite() {
                    hi = hi * T::lit(2.0);
                }
                solve_quantile(self, p, u, T::zero(), hi, mean.min(hi))
            }
            Family::Beta => {
                let mean = p[0] / (p[0] + p[1]);
                solve_quantile(self, p, u, T::zero(), one, mean)
            }
            Family::Empirical => {
                let n = p.len();
                let k = (u * T::from_usize_lossy(n)).floor().to_usize().unwrap_or(0).min(n - 1);
                p[k]
            }
        }
    }

    pub fn mean<T: Real>(self, p: &[T]) -> T {
        let two = T::lit(2.0);
        let one = T::one();
        match self {
            Family::Uniform => (p[0] + p[1]) / two,
            Family::Normal => p[0],
            Family::Lognormal => (p[0] + p[1] * p[1] / two).exp(),
            Family::Exponential => one / p[0],
            Family::Gamma => p[0] * p[1],
            Family::Weibull => p[1] * gamma_fn(one + one / p[0]),
            Family::Beta => p[0] / (p[0] + p[1]),
            Family::Pareto => {
                if p[1] > one {
                    p[1] * p[0] / (p[1] - one)
                } else {
                    T::infinity()
                }
            }
            Family::Triangular => (p[0] + p[1] + p[2]) / T::lit(3.0),
            Family::Empirical => p.iter().copied().sum::<T>() / T::from_usize_lossy(p.len()),
        }
    }

    /// Starting parameters from sample moments and extremes, or `None` when
    /// the family cannot describe the data (e.g. beta outside [0, 1]).
    pub fn initial_params<T: Real>(self, sorted: &[T]) -> Option<Vec<T>> {
        let n = T::from_usize_lossy(sorted.len());
        let lo = *sorted.first()?;
        let hi = *sorted.last()?;
        let mean = sorted.iter().copied().sum::<T>() / n;
        let var = sorted.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let sd = var.sqrt();
        let z = T::zero();
        let one = T::one();
        if !(sd > z) {
            return None;
        }
        let p = match self {
            Family::Uniform => vec![lo, hi],
            Family::Normal => vec![mean, sd],
            Family::Lognormal => {
                if lo > z {
                    let logs: Vec<T> = sorted.iter().map(|v| v.ln()).collect();
                    let mu = logs.iter().copied().sum::<T>() / n;
                    let s2 = logs.iter().map(|&l| (l - mu) * (l - mu)).sum::<T>() / n;
                    vec![mu, s2.sqrt()]
                } else if mean > z {
                    let s2 = (one + var / (mean * mean)).ln();
                    vec![mean.ln() - s2 / T::lit(2.0), s2.sqrt()]
                } else {
                    return None;
                }
            }
            Family::Exponential => {
                if mean > z && lo >= z {
                    vec![one / mean]
                } else {
                    return None;
                }
            }
            Family::Gamma => {
                if mean > z && lo >= z {
                    vec![mean * mean / var, var / mean]
                } else {
                    return None;
                }
            }
            Family::Weibull => {
                if mean > z && lo >= z {
                    let k = (sd / mean).powf(T::lit(-1.086));
                    vec![k, mean / gamma_fn(one + one / k)]
                } else {
                    return None;
                }
            }
            Family::Beta => {
                if lo < z || hi > one {
                    return None;
                }
                let common = mean * (one - mean) / var - one;
                if !(common > z) {
                    return None;
                }
                vec![mean * common, (one - mean) * common]
            }
            Family::Pareto => {
                if lo <= z {
                    return None;
                }
                let s = sorted.iter().map(|&v| (v / lo).ln()).sum::<T>();
                if !(s > z) {
                    return None;
                }
                vec![lo, n / s]
            }
            Family::Triangular => {
                let c = (T::lit(3.0) * mean - lo - hi).max(lo).min(hi);
                vec![lo, c, hi]
            }
            Family::Empirical => sorted.to_vec(),
        };
        self.valid_params(&p).then_some(p)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::PARAMETRIC
            .iter()
            .chain([Family::Empirical].iter())
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown distribution family `{s}`"))
    }
}

/// Safeguarded Newton iteration on `cdf(x) = u` within a bracket.
fn solve_quantile<T: Real>(family: Family, p: &[T], u: T, mut lo: T, mut hi: T, start: T) -> T {
    let tol = T::epsilon() * T::lit(16.0);
    let mut x = start.max(lo).min(hi);
    for _ in 0..200 {
        let f = family.cdf(p, x) - u;
        if f == T::zero() {
            return x;
        }
        if f < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let d = family.pdf(p, x);
        let mut next = x - f / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = (lo + hi) / T::lit(2.0);
        }
        if (next - x).abs() <= tol * x.abs().max(T::min_positive_value()) || hi - lo <= tol * hi.abs() {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_quantile_midpoint() {
        assert_eq!(Family::Uniform.quantile(&[2.0_f64, 4.0], 0.5), 3.0);
    }

    #[test]
    fn quantile_inverts_cdf_for_every_family() {
        let cases: Vec<(Family, Vec<f64>)> = vec![
            (Family::Uniform, vec![1.0, 5.0]),
            (Family::Normal, vec![10.0, 2.0]),
            (Family::Lognormal, vec![1.0, 0.5]),
            (Family::Exponential, vec![0.3]),
            (Family::Gamma, vec![2.5, 4.0]),
            (Family::Gamma, vec![0.4, 1.0]),
            (Family::Weibull, vec![1.7, 3.0]),
            (Family::Beta, vec![2.0, 5.0]),
            (Family::Pareto, vec![1.5, 3.0]),
            (Family::Triangular, vec![0.0, 1.0, 4.0]),
        ];
        for (f, p) in cases {
            for &u in &[0.001, 0.1, 0.37, 0.5, 0.9, 0.999] {
                let x = f.quantile(&p, u);
                assert!((f.cdf(&p, x) - u).abs() < 1e-9, "{f} {p:?} u={u} x={x}");
            }
        }
    }

    #[test]
    fn cdfs_monotone_on_grid() {
        let cases: Vec<(Family, Vec<f64>)> = vec![
            (Family::Lognormal, vec![0.0, 1.0]),
            (Family::Gamma, vec![3.0, 1.0]),
            (Family::Weibull, vec![0.8, 1.0]),
            (Family::Beta, vec![0.5, 0.5]),
            (Family::Pareto, vec![1.0, 2.0]),
        ];
        for (f, p) in cases {
            let mut prev = 0.0;
            for i in 0..=400 {
                let x = i as f64 * 0.025;
                let c = f.cdf(&p, x);
                assert!(c >= prev - 1e-15 && (0.0..=1.0).contains(&c), "{f} at {x}");
                prev = c;
            }
        }
    }

    #[test]
    fn initial_params_respect_support() {
        let outside = [2.0_f64, 3.0, 4.0, 6.0];
        assert!(Family::Beta.initial_params(&outside).is_none());
        let negative = [-2.0_f64, -1.0, 0.5, 3.0];
        assert!(Family::Pareto.initial_params(&negative).is_none());
        assert!(Family::Gamma.initial_params(&negative).is_none());
        assert!(Family::Normal.initial_params(&negative).is_some());
    }

    #[test]
    fn names_round_trip() {
        for f in Family::PARAMETRIC.iter().chain([Family::Empirical].iter()) {
            assert_eq!(f.name().parse::<Family>().unwrap(), *f);
        }
        assert!("skewnorm".parse::<Family>().is_err());
    }
}
