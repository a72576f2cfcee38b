//! Empirical characteristic functions, distribution distances and the
//! pass/fail reports built on them.
//!
//! Heavy tails rule out moment-based comparisons, so every distributional
//! check is a sup-distance between an empirical characteristic function and
//! its target on a fixed θ-grid.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ou_spectral::{classify, SpectralFunction};
use crate::simulator::{Outcome, RunRecord};
use crate::stable_limits::{cf_eval, LimitEngine, StableCharExponent};

/// Observations of a scalar or of a fixed-arity tuple, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    arity: usize,
    data: Vec<f64>,
    pub survival_conditioned: bool,
}

impl EmpiricalSample {
    pub fn scalar(values: Vec<f64>, survival_conditioned: bool) -> Result<Self> {
        Self::from_flat(1, values, survival_conditioned)
    }

    pub fn joint<const K: usize>(rows: &[[f64; K]], survival_conditioned: bool) -> Result<Self> {
        Self::from_flat(
            K,
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
            survival_conditioned,
        )
    }

    fn from_flat(arity: usize, data: Vec<f64>, survival_conditioned: bool) -> Result<Self> {
        if arity == 0 || data.is_empty() || !data.len().is_multiple_of(arity) {
            return Err(Error::construction(
                "stats",
                "EmpiricalSample::new",
                "need at least one observation of uniform arity",
            ));
        }
        Ok(EmpiricalSample {
            arity,
            data,
            survival_conditioned,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.arity
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.arity)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }
}

/// `points` equally spaced values on `[lo, hi]`.
pub fn theta_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// 25 points on `[−3, 3]`.
pub fn default_marginal_grid() -> Vec<f64> {
    theta_grid(-3.0, 3.0, 25)
}

/// 5 points on `[−3, 3]` per coordinate.
pub fn default_joint_grid() -> Vec<f64> {
    theta_grid(-3.0, 3.0, 5)
}

fn ecf_at(values: &[f64], theta: f64) -> Complex64 {
    let s: Complex64 = values
        .iter()
        .map(|x| Complex64::from_polar(1.0, theta * x))
        .sum();
    s / values.len() as f64
}

/// `θ ↦ (1/N) Σ_j e^{iθx_j}` on each grid point.
pub fn ecf(values: &[f64], thetas: &[f64]) -> Result<Vec<Complex64>> {
    if values.is_empty() {
        return Err(Error::precondition("stats", "ecf", "empty sample"));
    }
    Ok(thetas.par_iter().map(|&t| ecf_at(values, t)).collect())
}

/// `sup_θ |ecf(θ) − cf(θ)|` over the grid; zero for an empty grid.
pub fn ecf_distance<F>(values: &[f64], cf: F, thetas: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    let e = ecf(values, thetas)?;
    Ok(e.iter()
        .zip(thetas)
        .map(|(v, &t)| (v - cf(t)).norm())
        .fold(0.0, f64::max))
}

/// Sup over the product grid of `|ECF_joint(θ) − Π_k ECF_k(θ_k)|`.
pub fn independence_factorization(sample: &EmpiricalSample, thetas: &[f64]) -> Result<f64> {
    if sample.arity() != 4 {
        return Err(Error::precondition(
            "stats",
            "independence_factorization",
            format!("need 4-tuples, got arity {}", sample.arity()),
        ));
    }
    let n = sample.len();
    let g = thetas.len();
    if g == 0 {
        return Ok(0.0);
    }
    // phase[k][i][j] = e^{iθ_i x_{j,k}}
    let phase: Vec<Vec<Vec<Complex64>>> = (0..4)
        .map(|k| {
            let col = sample.column(k);
            thetas
                .iter()
                .map(|&t| {
                    col.iter()
                        .map(|x| Complex64::from_polar(1.0, t * x))
                        .collect()
                })
                .collect()
        })
        .collect();
    let marginal: Vec<Vec<Complex64>> = phase
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|r| r.iter().sum::<Complex64>() / n as f64)
                .collect()
        })
        .collect();
    let combos: Vec<[usize; 4]> = (0..g.pow(4))
        .map(|c| [c % g, (c / g) % g, (c / g / g) % g, c / g / g / g])
        .collect();
    let sup = combos
        .par_iter()
        .map(|ix| {
            let joint: Complex64 = (0..n)
                .map(|j| {
                    phase[0][ix[0]][j]
                        * phase[1][ix[1]][j]
                        * phase[2][ix[2]][j]
                        * phase[3][ix[3]][j]
                })
                .sum::<Complex64>()
                / n as f64;
            let product =
                marginal[0][ix[0]] * marginal[1][ix[1]] * marginal[2][ix[2]] * marginal[3][ix[3]];
            (joint - product).norm()
        })
        .reduce(|| 0.0, f64::max);
    Ok(sup)
}

/// Outcome of one statistical check. `passed` is `observed ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub observed: f64,
    pub tolerance: f64,
    pub n: usize,
    /// Monte Carlo part of the tolerance (or the SE behind a z-score).
    pub se: f64,
    /// Declared finite-`t`/finite-`n` allowance included in `tolerance`.
    pub bias_allowance: f64,
    pub passed: bool,
    pub diagnostics: serde_json::Value,
}

impl TestReport {
    pub fn new(
        name: impl Into<String>,
        observed: f64,
        tolerance: f64,
        n: usize,
        se: f64,
        bias_allowance: f64,
        diagnostics: serde_json::Value,
    ) -> Self {
        TestReport {
            name: name.into(),
            observed,
            tolerance,
            n,
            se,
            bias_allowance,
            passed: observed <= tolerance,
            diagnostics,
        }
    }

    /// A one-line human-readable summary.
    pub fn line(&self) -> String {
        format!(
            "{} {}: observed {} vs tolerance {} (N = {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            fmt_num(self.observed),
            fmt_num(self.tolerance),
            self.n
        )
    }
}

fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-3..1e6).contains(&a) {
        format!("{x:.3e}")
    } else {
        format!("{x:.6}")
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Sample mean and its standard error.
pub fn mean_and_se(v: &[f64]) -> Result<(f64, f64)> {
    if v.is_empty() {
        return Err(Error::precondition("stats", "mean_and_se", "empty sample"));
    }
    Ok(mean_se(v))
}

/// `|d| / se`, with `0/0 = 0` and `d/0 = ∞`.
fn z_score(d: f64, se: f64) -> f64 {
    if se > 0.0 {
        d.abs() / se
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Drift test for a martingale sampled on several checkpoints.
///
/// `series[c][r]` is replicate `r` at checkpoint `c`. Each consecutive pair of
/// checkpoints is compared through the per-replicate difference, so the
/// correlation between checkpoints is accounted for. The observed value is
/// the largest `|mean difference| / SE`, tested against 3.
pub fn martingale_drift(name: &str, series: &[Vec<f64>]) -> Result<TestReport> {
    if series.len() < 2 {
        return Err(Error::precondition(
            "stats",
            "martingale_drift",
            "need at least two checkpoints",
        ));
    }
    let n = series[0].len();
    if n < 100 || series.iter().any(|s| s.len() != n) {
        return Err(Error::precondition(
            "stats",
            "martingale_drift",
            format!("need at least 100 replicates per checkpoint, aligned; got {n}"),
        ));
    }
    let means: Vec<f64> = series.iter().map(|s| mean_se(s).0).collect();
    let mut worst = 0.0f64;
    let mut worst_se = 0.0;
    let mut pairs = Vec::new();
    for w in series.windows(2) {
        let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
        let (m, se) = mean_se(&d);
        let z = z_score(m, se);
        pairs.push(serde_json::json!({"difference": m, "se": se, "z": z}));
        if z >= worst {
            worst = z;
            worst_se = se;
        }
    }
    Ok(TestReport::new(
        name,
        worst,
        3.0,
        n,
        worst_se,
        0.0,
        serde_json::json!({"means": means, "consecutive": pairs}),
    ))
}

/// `(X_t(f) − x̂_t(f)) / ‖X_t‖^{1−β̃}` if `f` has no critical part, otherwise
/// the same numerator over `(t‖X_t‖)^{1−β̃}`.
pub fn corollary_statistic(
    run: &RunRecord,
    f: &SpectralFunction,
    t: f64,
    u: f64,
) -> Result<Outcome<f64>> {
    let p = &run.params;
    let parts = classify(f, &p.mech, &p.ou);
    if !parts.large.is_zero() && (u - t).abs() < 1e-9 {
        return Err(Error::precondition(
            "stats",
            "corollary_check",
            "compensator checkpoint u must differ from t",
        ));
    }
    if !run.usable() {
        return Ok(Outcome::Rejected("not survived".into()));
    }
    let cp = run.checkpoint(t).ok_or_else(|| {
        Error::precondition(
            "stats",
            "corollary_check",
            format!("time {t} is not a stored checkpoint"),
        )
    })?;
    if cp.count == 0 {
        return Ok(Outcome::Rejected(format!("extinct at t = {t}")));
    }
    let mut num = run.functional(t, f)?;
    if !parts.large.is_zero() {
        num -= run.compensator(&parts.large, t, u)?;
    }
    let expo = 1.0 - p.mech.beta_tilde();
    let den = if parts.critical.is_zero() {
        cp.total_mass.powf(expo)
    } else {
        (t * cp.total_mass).powf(expo)
    };
    Ok(Outcome::Accepted(num / den))
}

/// Target exponent of the Corollary: `m[f_c]` if `f_c ≠ 0`, else
/// `m[f_s] + m[−f_l]`.
pub fn corollary_target(f: &SpectralFunction, engine: &LimitEngine) -> Result<StableCharExponent> {
    let parts = classify(f, &engine.mech, &engine.ou);
    if !parts.critical.is_zero() {
        return engine.m_limit(&parts.critical);
    }
    let s = engine.m_limit(&parts.small)?;
    let l = engine.m_limit(&parts.large)?.negated();
    Ok(s.independent_sum(&l))
}

/// ECF check of the Corollary's limit law over survival-filtered runs.
pub fn corollary_check(
    runs: &[&RunRecord],
    f: &SpectralFunction,
    engine: &LimitEngine,
    t: f64,
    u: f64,
    thetas: &[f64],
    bias_allowance: f64,
) -> Result<TestReport> {
    let name = format!("corollary[{}]", describe(f));
    if f.is_zero() {
        return Ok(TestReport::new(
            name,
            0.0,
            0.0,
            0,
            0.0,
            0.0,
            serde_json::json!({"vacuous": "f = 0"}),
        ));
    }
    let mut values = Vec::with_capacity(runs.len());
    for r in runs {
        if let Some(v) = corollary_statistic(r, f, t, u)?.accepted() {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::precondition(
            "stats",
            "corollary_check",
            "no surviving runs",
        ));
    }
    let target = corollary_target(f, engine)?;
    let d = ecf_distance(&values, |th| cf_eval(&target, th), thetas)?;
    let se = 3.0 / (values.len() as f64).sqrt();
    Ok(TestReport::new(
        name,
        d,
        se + bias_allowance,
        values.len(),
        se,
        bias_allowance,
        serde_json::json!({"t": t, "u": u, "target": [target.value.re, target.value.im]}),
    ))
}

/// Compact label such as `1*φ(1) + 1*φ(2)`.
pub fn describe(f: &SpectralFunction) -> String {
    if f.is_zero() {
        return "0".into();
    }
    f.terms()
        .map(|(p, c)| format!("{c}*φ{p}"))
        .collect::<Vec<_>>()
        .join(" + ")
}
