//! Verification suites. Each suite turns an ensemble (or pure numerics) into
//! [`TestReport`]s.
//!
//! Negative controls are encoded as reports whose `observed` is the negated
//! distance and whose `tolerance` is the negated threshold, so that the
//! report passes exactly when the distance exceeds the threshold.

use num_complex::Complex64;

use crate::branching::BranchingMechanism;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::ou_spectral::{
    classify, eigenfunction_eval, gauss_hermite_unit, semigroup_alpha_apply, semigroup_apply,
    MultiIndex, OuParams, QuadratureGrid, Regime, RegimeThreshold, SpectralFunction,
};
use crate::simulator::{
    joint_statistic, particle_laplace, projected_load, upsilon, Ensemble, ProjectedLoad, RunRecord,
};
use crate::stable_limits::{cf_eval, LimitEngine, StableCharExponent};
use crate::stats::{
    corollary_check, ecf, ecf_distance, independence_factorization, martingale_drift, mean_and_se,
    EmpiricalSample, TestReport,
};

/// Refuses to start a simulation whose expected population exceeds the
/// particle cap.
pub fn feasibility(cfg: &ExperimentConfig) -> Result<ProjectedLoad> {
    let mech = cfg.mechanism()?;
    let mass = cfg.initial_measure()?.total_mass();
    let load = projected_load(&mech, cfg.simulation.n, mass, cfg.horizon())?;
    if load.expected_particles > cfg.simulation.particle_cap as f64 {
        return Err(Error::resource(
            "simulator",
            "run_ensemble",
            format!(
                "expected {:.3e} particles per replicate at T = {} exceeds the cap {} \
                 ({:.3e} events per replicate)",
                load.expected_particles,
                cfg.horizon(),
                cfg.simulation.particle_cap,
                load.expected_events
            ),
        ));
    }
    Ok(load)
}

fn require_complete(ens: &Ensemble, op: &'static str) -> Result<()> {
    if ens.aborted.is_empty() {
        Ok(())
    } else {
        Err(Error::resource(
            "simulator",
            op,
            format!(
                "{} replicate(s) hit the particle cap; unconditioned averages would be biased",
                ens.aborted.len()
            ),
        ))
    }
}

fn checkpoint_index(cfg: &ExperimentConfig, t: f64, op: &'static str) -> Result<usize> {
    cfg.simulation
        .checkpoints
        .iter()
        .position(|c| (c - t).abs() <= 1e-9)
        .ok_or_else(|| Error::precondition("suites", op, format!("{t} is not a checkpoint")))
}

fn axis_eigen(d: usize, k: u32) -> SpectralFunction {
    SpectralFunction::eigen(MultiIndex::axis(d, k))
}

/// Lowest-degree axis eigenfunctions of each regime within the degree cap:
/// `(small, critical, large)`.
pub fn regime_representatives(
    cfg: &ExperimentConfig,
) -> Result<(
    Option<SpectralFunction>,
    Option<SpectralFunction>,
    SpectralFunction,
)> {
    let th = RegimeThreshold::new(&cfg.mechanism()?, &cfg.ou_params()?);
    let d = cfg.ou.d;
    let cap = cfg.simulation.degree_cap;
    let find = |r: Regime| {
        (0..=cap)
            .find(|k| th.regime(*k) == r)
            .map(|k| axis_eigen(d, k))
    };
    Ok((
        find(Regime::Small),
        find(Regime::Critical),
        find(Regime::Large).expect("degree 0 is always large"),
    ))
}

fn usable(ens: &Ensemble) -> Vec<&RunRecord> {
    ens.usable().collect()
}

/// `E[X_t(f)] = μ(P^α_t f)` at the horizon, over all replicates.
pub fn means(cfg: &ExperimentConfig, ens: &Ensemble) -> Result<Vec<TestReport>> {
    require_complete(ens, "means")?;
    let ou = cfg.ou_params()?;
    let mech = cfg.mechanism()?;
    let mu = cfg.initial_measure()?.discretize(cfg.simulation.n)?;
    let t = cfg.horizon();
    let d = cfg.ou.d;
    let cap = cfg.simulation.degree_cap;
    let mut fs = vec![axis_eigen(d, 0)];
    for k in 1..=cap.min(2) {
        fs.push(axis_eigen(d, k));
    }
    if cap >= 2 {
        fs.push(axis_eigen(d, 1) + axis_eigen(d, 2));
    }
    let mut out = Vec::new();
    for f in fs {
        let values: Vec<f64> = ens
            .records
            .iter()
            .map(|r| r.functional(t, &f))
            .collect::<Result<_>>()?;
        let (m, se) = mean_and_se(&values)?;
        let target = mu.integrate(&semigroup_alpha_apply(t, &f, &ou, mech.alpha)?, &ou);
        let z = z_score(m - target, se);
        out.push(TestReport::new(
            format!("means[{}] t={t}", crate::stats::describe(&f)),
            z,
            3.0,
            values.len(),
            se,
            0.0,
            serde_json::json!({"mean": m, "target": target}),
        ));
    }
    Ok(out)
}

fn z_score(d: f64, se: f64) -> f64 {
    if se > 0.0 {
        d.abs() / se
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `E[e^{−λ‖X_t‖}]` against `e^{−‖μ‖v_t(λ)}`, allowing the exact
/// particle-system discrepancy.
pub fn laplace(cfg: &ExperimentConfig, ens: &Ensemble) -> Result<Vec<TestReport>> {
    require_complete(ens, "laplace")?;
    let mech = cfg.mechanism()?;
    let n = cfg.simulation.n;
    let mass = cfg.initial_measure()?.discretize(n)?.total_mass();
    let mut times: Vec<f64> = [0.5, 1.0]
        .into_iter()
        .filter(|t| checkpoint_index(cfg, *t, "laplace").is_ok())
        .collect();
    if times.is_empty() {
        times.push(cfg.horizon());
    }
    let mut out = Vec::new();
    for t in times {
        let c = checkpoint_index(cfg, t, "laplace")?;
        for lambda in [0.5, 2.0] {
            let v: Vec<f64> = ens
                .records
                .iter()
                .map(|r| (-lambda * r.checkpoints[c].total_mass).exp())
                .collect();
            let (m, se) = mean_and_se(&v)?;
            let target = (-mass * mech.csbp_laplace(t, lambda)?).exp();
            let particle = particle_laplace(&mech, n, mass, t, lambda)?;
            let allowance = (particle - target).abs();
            out.push(TestReport::new(
                format!("laplace[lambda={lambda}] t={t} n={n}"),
                (m - target).abs(),
                3.0 * se + allowance,
                v.len(),
                se,
                allowance,
                serde_json::json!({
                    "empirical": m,
                    "superprocess": target,
                    "particle_exact": particle,
                    "z_vs_particle_exact": z_score(m - particle, se),
                }),
            ));
        }
    }
    Ok(out)
}

/// Drift of `H^p_t` over the checkpoints for `|p| ≤ 2`, and boundedness of
/// the empirical `L^{1+γ}` norm of `H^0_t` with `γ = β/2`.
pub fn martingale(cfg: &ExperimentConfig, ens: &Ensemble) -> Result<Vec<TestReport>> {
    require_complete(ens, "martingale")?;
    if cfg.simulation.checkpoints.len() < 2 {
        return Err(Error::precondition(
            "suites",
            "martingale",
            "need at least two checkpoints",
        ));
    }
    let mech = cfg.mechanism()?;
    let times = &cfg.simulation.checkpoints;
    let mut out = Vec::new();
    for p in MultiIndex::all_up_to(cfg.ou.d, cfg.simulation.degree_cap.min(2)) {
        let series: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| ens.records.iter().map(|r| r.h_value(t, &p)).collect())
            .collect::<Result<_>>()?;
        out.push(martingale_drift(&format!("martingale[H^{p}]"), &series)?);
    }
    let gamma = mech.beta / 2.0;
    let q = 1.0 + gamma;
    let zero = MultiIndex::zero(cfg.ou.d);
    let norms: Vec<f64> = times
        .iter()
        .map(|&t| {
            let s: f64 = ens
                .records
                .iter()
                .map(|r| r.h_value(t, &zero).map(|h| h.abs().powf(q)))
                .sum::<Result<f64>>()?;
            Ok((s / ens.records.len() as f64).powf(1.0 / q))
        })
        .collect::<Result<_>>()?;
    let variances: Vec<f64> = times
        .iter()
        .map(|&t| {
            let v: Vec<f64> = ens
                .records
                .iter()
                .map(|r| r.h_value(t, &zero))
                .collect::<Result<_>>()?;
            let (m, _) = mean_and_se(&v)?;
            Ok(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0).max(1.0))
        })
        .collect::<Result<_>>()?;
    let growth = norms.iter().cloned().fold(0.0, f64::max) / norms[0];
    out.push(TestReport::new(
        format!("martingale[L^{q} norm of H^0]"),
        growth,
        cfg.stats.lp_growth_bound,
        ens.records.len(),
        0.0,
        0.0,
        serde_json::json!({"norms": norms, "variances": variances, "gamma": gamma}),
    ));
    Ok(out)
}

fn engine(cfg: &ExperimentConfig) -> Result<LimitEngine> {
    LimitEngine::new(
        cfg.mechanism()?,
        cfg.ou_params()?,
        crate::stable_limits::InnerRule::for_params(&cfg.ou_params()?, cfg.quadrature.nodes)?,
    )
}

fn ecf_report(
    name: String,
    values: &[f64],
    target: &StableCharExponent,
    thetas: &[f64],
    tolerance: f64,
    extra: serde_json::Value,
) -> Result<TestReport> {
    if values.is_empty() {
        return Err(Error::precondition(
            "suites",
            "clt",
            "no surviving replicates",
        ));
    }
    let d = ecf_distance(values, |th| cf_eval(target, th), thetas)?;
    let se = 3.0 / (values.len() as f64).sqrt();
    Ok(TestReport::new(
        name,
        d,
        tolerance,
        values.len(),
        se,
        tolerance - se,
        serde_json::json!({
            "target": [target.value.re, target.value.im],
            "details": extra,
        }),
    ))
}

/// The normalized statistics of one regime against `exp(m[θ·])`.
pub fn clt(cfg: &ExperimentConfig, ens: &Ensemble, regime: Regime) -> Result<Vec<TestReport>> {
    let (fs, fc, fl) = regime_representatives(cfg)?;
    let f = match regime {
        Regime::Small => fs,
        Regime::Critical => fc,
        Regime::Large => Some(fl),
    }
    .ok_or_else(|| {
        Error::precondition(
            "suites",
            "clt",
            format!(
                "no {regime:?} eigenfunction within degree cap {}",
                cfg.simulation.degree_cap
            ),
        )
    })?;
    let e = engine(cfg)?;
    let decomp = classify(&f, &e.mech, &e.ou);
    let (t, u) = (cfg.statistic_time(), cfg.compensator_u());
    let mut values = Vec::new();
    for r in usable(ens) {
        if let Some(s) = joint_statistic(r, &decomp, t, u)?.accepted() {
            values.push(match regime {
                Regime::Small => s.s_stat,
                Regime::Critical => s.c_stat,
                Regime::Large => s.l_stat,
            });
        }
    }
    let m = e.m_limit(&f)?;
    let target = if regime == Regime::Large {
        m.negated()
    } else {
        m
    };
    let name = format!(
        "clt-{}[{}] t={t}",
        regime_name(regime),
        crate::stats::describe(&f)
    );
    Ok(vec![ecf_report(
        name,
        &values,
        &target,
        &cfg.marginal_grid(),
        cfg.stats.clt_tolerance,
        serde_json::json!({"t": t, "u": u}),
    )?])
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Small => "small",
        Regime::Critical => "critical",
        Regime::Large => "large",
    }
}

/// Rows `(e^{−αt}‖X_t‖, s, c, l)` over surviving replicates.
pub fn joint_rows(cfg: &ExperimentConfig, ens: &Ensemble) -> Result<Vec<[f64; 4]>> {
    let (fs, fc, fl) = regime_representatives(cfg)?;
    let d = cfg.ou.d;
    let f = fs.unwrap_or_else(|| SpectralFunction::zero(d))
        + fc.unwrap_or_else(|| SpectralFunction::zero(d))
        + fl;
    let decomp = classify(&f, &cfg.mechanism()?, &cfg.ou_params()?);
    let (t, u) = (cfg.statistic_time(), cfg.compensator_u());
    let mut rows = Vec::new();
    for r in usable(ens) {
        if let Some(s) = joint_statistic(r, &decomp, t, u)?.accepted() {
            rows.push(s.as_array());
        }
    }
    Ok(rows)
}

/// Factorization of the joint ECF of `S(t)`, with a duplicated-coordinate
/// negative control.
pub fn joint_independence(cfg: &ExperimentConfig, ens: &Ensemble) -> Result<Vec<TestReport>> {
    let rows = joint_rows(cfg, ens)?;
    if rows.is_empty() {
        return Err(Error::precondition(
            "suites",
            "joint-independence",
            "no surviving replicates",
        ));
    }
    let grid = cfg.joint_grid();
    let tol = cfg.stats.joint_tolerance;
    let n = rows.len();
    let sample = EmpiricalSample::joint(&rows, true)?;
    let d = independence_factorization(&sample, &grid)?;
    let dup: Vec<[f64; 4]> = rows.iter().map(|r| [r[1]; 4]).collect();
    let dd = independence_factorization(&EmpiricalSample::joint(&dup, true)?, &grid)?;
    let se = 3.0 * 4.0 / (n as f64).sqrt();
    Ok(vec![
        TestReport::new(
            format!("joint-independence t={}", cfg.statistic_time()),
            d,
            tol,
            n,
            se,
            tol - se,
            serde_json::json!({"u": cfg.compensator_u(), "grid": grid}),
        ),
        TestReport::new(
            "joint-independence/negative-control",
            -dd,
            -tol,
            n,
            se,
            0.0,
            serde_json::json!({"duplicated_coordinate": "small", "distance": dd}),
        ),
    ])
}

/// Corollary cases `f_l + f_s` (no critical part) and `f_c + f_s`.
pub fn corollary(cfg: &ExperimentConfig, ens: &Ensemble) -> Result<Vec<TestReport>> {
    let (fs, fc, fl) = regime_representatives(cfg)?;
    let fs = fs.ok_or_else(|| {
        Error::precondition(
            "suites",
            "corollary",
            "no small-regime eigenfunction within the degree cap",
        )
    })?;
    let e = engine(cfg)?;
    let runs = usable(ens);
    let (t, u) = (cfg.statistic_time(), cfg.compensator_u());
    let tol = cfg.stats.corollary_tolerance;
    let se = 3.0 / (runs.len().max(1) as f64).sqrt();
    let mut cases = vec![fl + fs.clone()];
    if let Some(fc) = fc {
        cases.push(fc + fs);
    }
    cases
        .iter()
        .map(|f| corollary_check(&runs, f, &e, t, u, &cfg.marginal_grid(), tol - se))
        .collect()
}

/// `Υ_t` of the small-regime eigenfunction at `θ = 1`, with the grid
/// distance as a diagnostic.
pub fn upsilon_suite(cfg: &ExperimentConfig, ens: &Ensemble) -> Result<Vec<TestReport>> {
    let t = cfg.upsilon_time().ok_or_else(|| {
        Error::precondition("suites", "upsilon", "simulation.upsilon_time is not set")
    })?;
    let (fs, _, _) = regime_representatives(cfg)?;
    let f = fs.ok_or_else(|| {
        Error::precondition(
            "suites",
            "upsilon",
            "no small-regime eigenfunction within the degree cap",
        )
    })?;
    let e = engine(cfg)?;
    let z1 = e.z1_bracket(&f)?;
    let mut values = Vec::new();
    for r in usable(ens) {
        if let Some(v) = upsilon(r, &f, t)?.accepted() {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::precondition(
            "suites",
            "upsilon",
            "no surviving replicates",
        ));
    }
    let at_one = ecf(&values, &[1.0])?[0];
    let target = z1.exp();
    let exponent = StableCharExponent {
        value: z1,
        index: e.index(),
    };
    let grid_distance = ecf_distance(&values, |th| cf_eval(&exponent, th), &cfg.marginal_grid())?;
    let se = 1.0 / (values.len() as f64).sqrt();
    Ok(vec![TestReport::new(
        format!("upsilon[{}] t={t}", crate::stats::describe(&f)),
        (at_one - target).norm(),
        cfg.stats.upsilon_tolerance,
        values.len(),
        se,
        cfg.stats.upsilon_tolerance - 3.0 * se,
        serde_json::json!({
            "z1": [z1.re, z1.im],
            "ecf_at_1": [at_one.re, at_one.im],
            "grid_distance": grid_distance,
        }),
    )])
}

/// Dispatches a suite by name.
pub fn run_suite(name: &str, cfg: &ExperimentConfig, ens: &Ensemble) -> Result<Vec<TestReport>> {
    match name {
        "means" => means(cfg, ens),
        "laplace" => laplace(cfg, ens),
        "martingale" => martingale(cfg, ens),
        "clt-small" => clt(cfg, ens, Regime::Small),
        "clt-critical" => clt(cfg, ens, Regime::Critical),
        "clt-large" => clt(cfg, ens, Regime::Large),
        "joint-independence" => joint_independence(cfg, ens),
        "corollary" => corollary(cfg, ens),
        "upsilon" => upsilon_suite(cfg, ens),
        other => Err(Error::Config(format!("unknown suite `{other}`"))),
    }
}

/// Knobs of the spectral check.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpectralCheckOptions {
    /// Test hook: perturbs every basis function of degree ≥ 2 by a multiple
    /// of the first coordinate, which must make the check fail.
    pub corrupt_basis: bool,
}

fn basis_value(p: &MultiIndex, x: &[f64], ou: &OuParams, opts: SpectralCheckOptions) -> f64 {
    let v = eigenfunction_eval(p, x, ou);
    if opts.corrupt_basis && p.degree() >= 2 {
        v + 1e-3 * x[0] / ou.stationary_scale()
    } else {
        v
    }
}

/// Orthonormality of `{φ_p : |p| ≤ cap}` on the quadrature grid, the
/// eigen-action `P_t φ_p = e^{−b|p|t} φ_p` checked through the Mehler kernel
/// at the grid nodes, and exactness of the grid on Gaussian moments.
pub fn spectral_check(
    cfg: &ExperimentConfig,
    opts: SpectralCheckOptions,
) -> Result<Vec<TestReport>> {
    let ou = cfg.ou_params()?;
    let cap = cfg.simulation.degree_cap;
    let grid = QuadratureGrid::for_params(&ou, cfg.quadrature.nodes)?;
    let indices = MultiIndex::all_up_to(ou.dim, cap);
    let table: Vec<Vec<f64>> = indices
        .iter()
        .map(|p| grid.nodes().map(|x| basis_value(p, x, &ou, opts)).collect())
        .collect();
    let mut gram_err = 0.0f64;
    for (i, a) in table.iter().enumerate() {
        for (j, b) in table.iter().enumerate() {
            let g: f64 = a
                .iter()
                .zip(b)
                .zip(grid.weights())
                .map(|((u, v), w)| u * v * w)
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            gram_err = gram_err.max((g - target).abs());
        }
    }
    let mut out = vec![TestReport::new(
        format!("spectral[gram |p|<={cap}]"),
        gram_err,
        1e-10,
        indices.len(),
        0.0,
        0.0,
        serde_json::json!({"grid": format!("{:?}", grid.kind()), "points": grid.len()}),
    )];

    // Exact Gaussian expectation over the Mehler kernel: a tensor Gauss rule
    // with enough points for polynomials of degree `cap` per axis.
    let (z, w) = gauss_hermite_unit(cap as usize / 2 + 2);
    let z: Vec<f64> = z.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let w: Vec<f64> = w.iter().map(|v| v / std::f64::consts::PI.sqrt()).collect();
    let kernel_points = z.len().pow(ou.dim as u32);
    let s = ou.stationary_scale();
    let step = (grid.len() / 200).max(1);
    let mut eig_err = 0.0f64;
    for t in [0.1, 0.5, std::f64::consts::LN_2, 2.0] {
        let decay = (-ou.b * t).exp();
        let spread = s * (-(-2.0 * ou.b * t).exp_m1()).sqrt();
        for p in &indices {
            let expected = semigroup_apply(t, &SpectralFunction::eigen(p.clone()), &ou)?;
            let factor = expected.coeff(p);
            for x in grid.nodes().step_by(step) {
                let mut acc = 0.0;
                let mut y = vec![0.0; ou.dim];
                for k in 0..kernel_points {
                    let mut weight = 1.0;
                    let mut r = k;
                    for (yi, xi) in y.iter_mut().zip(x) {
                        let j = r % z.len();
                        r /= z.len();
                        *yi = xi * decay + spread * z[j];
                        weight *= w[j];
                    }
                    acc += weight * basis_value(p, &y, &ou, opts);
                }
                let target = factor * basis_value(p, x, &ou, opts);
                eig_err = eig_err.max((acc - target).abs() / (1.0 + target.abs()));
            }
        }
    }
    out.push(TestReport::new(
        format!("spectral[eigen-action |p|<={cap}]"),
        eig_err,
        1e-8,
        indices.len(),
        0.0,
        0.0,
        serde_json::json!({"times": [0.1, 0.5, std::f64::consts::LN_2, 2.0]}),
    ));

    if let crate::ou_spectral::GridKind::Tensor { nodes } = grid.kind() {
        let max_deg = (2 * cap as usize).min(2 * nodes - 1);
        let mut mom_err = 0.0f64;
        for k in 0..=max_deg {
            let exact = if k % 2 == 1 {
                0.0
            } else {
                (1..k).step_by(2).map(|j| j as f64).product::<f64>() * s.powi(k as i32)
            };
            let q: f64 = grid
                .nodes()
                .zip(grid.weights())
                .map(|(x, w)| w * x[0].powi(k as i32))
                .sum();
            mom_err = mom_err.max((q - exact).abs() / (1.0 + exact.abs()));
        }
        out.push(TestReport::new(
            format!("spectral[moments degree<={max_deg}]"),
            mom_err,
            1e-12,
            max_deg + 1,
            0.0,
            0.0,
            serde_json::Value::Null,
        ));
    }
    Ok(out)
}

/// Values emitted by the `limits` command.
#[derive(Debug, Clone)]
pub struct LimitsTable {
    pub f: SpectralFunction,
    pub m_t: Vec<(f64, Complex64)>,
    pub m: StableCharExponent,
    pub cf: Vec<(f64, Complex64)>,
    /// `(n, Σ_{k≤n} ⟨Z_1 T_k f̃, φ⟩, m_{n+1}[f])` for the small and critical
    /// part of `f`, where the identity holds.
    pub identity: Vec<(u32, Complex64, Complex64)>,
}

impl LimitsTable {
    pub fn identity_error(&self) -> f64 {
        self.identity
            .iter()
            .map(|(_, l, r)| (l - r).norm())
            .fold(0.0, f64::max)
    }
}

pub fn limits_table(cfg: &ExperimentConfig) -> Result<LimitsTable> {
    let e = engine(cfg)?;
    let f = cfg.limits_function()?;
    let m_t = cfg
        .limits
        .t_grid
        .iter()
        .map(|&t| Ok((t, e.m_t(&f, t)?)))
        .collect::<Result<Vec<_>>>()?;
    let m = e.m_limit(&f)?;
    let thetas = crate::stats::theta_grid(
        cfg.limits.theta_min,
        cfg.limits.theta_max,
        cfg.limits.theta_points,
    );
    let cf = thetas.iter().map(|&th| (th, cf_eval(&m, th))).collect();
    let mut identity = Vec::new();
    if cfg.limits.identity {
        let parts = classify(&f, &e.mech, &e.ou);
        let g = parts.small + parts.critical;
        for n in 0..=cfg.limits.identity_max_n {
            let (l, r) = e.z1_partial_sum(&g, n)?;
            identity.push((n, l, r));
        }
    }
    Ok(LimitsTable {
        f,
        m_t,
        m,
        cf,
        identity,
    })
}

/// Projected cost of the configured simulation, for reporting.
pub fn describe_load(mech: &BranchingMechanism, n: u64, mass: f64, horizon: f64) -> Result<String> {
    let l = projected_load(mech, n, mass, horizon)?;
    Ok(format!(
        "n = {n}, T = {horizon}: {:.3e} particles and {:.3e} events per replicate",
        l.expected_particles, l.expected_events
    ))
}
