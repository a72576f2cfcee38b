use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evolve, EvolveError, InitialMeasure};
use crate::branching::{BranchingMechanism, OffspringLaw};
use crate::error::{Error, Result};
use crate::ou_spectral::{
    semigroup_alpha_apply, MultiIndex, OuParams, RegimeDecomposition, SpectralFunction,
};

/// Checkpoint times are matched with this absolute slack.
const TIME_MATCH: f64 = 1e-9;

/// Everything that determines a replicate apart from its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub ou: OuParams,
    pub mech: BranchingMechanism,
    pub n: u64,
    pub initial: InitialMeasure,
    /// Functionals `X_t(φ_p)` are stored for every `|p| ≤ degree_cap`.
    pub degree_cap: u32,
}

impl RunParams {
    pub fn basis(&self) -> Vec<MultiIndex> {
        MultiIndex::all_up_to(self.ou.dim, self.degree_cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub time: f64,
    pub count: u64,
    pub total_mass: f64,
    /// `X_t(φ_p)` in the order of [`RunParams::basis`].
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortMarker {
    pub time: f64,
    pub count: u64,
    pub cap: u64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub replicate: u64,
    pub seed: u64,
    pub params: Arc<RunParams>,
    pub checkpoint_times: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    /// `‖X_T‖ > 0` at the last checkpoint.
    pub survived: bool,
    pub aborted: Option<AbortMarker>,
}

/// A statistic that is either available or filtered out (for instance on
/// extinct runs). Filtering is an expected outcome, not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<T> {
    Accepted(T),
    Rejected(String),
}

impl<T> Outcome<T> {
    pub fn accepted(self) -> Option<T> {
        match self {
            Outcome::Accepted(v) => Some(v),
            Outcome::Rejected(_) => None,
        }
    }
}

/// The four coordinates of `S(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointStatistic {
    /// `e^{−αt}‖X_t‖`
    pub h: f64,
    pub s_stat: f64,
    pub c_stat: f64,
    pub l_stat: f64,
}

impl JointStatistic {
    pub fn as_array(&self) -> [f64; 4] {
        [self.h, self.s_stat, self.c_stat, self.l_stat]
    }
}

pub fn simulate_replicate(
    params: &Arc<RunParams>,
    law: &OffspringLaw,
    times: &[f64],
    replicate: u64,
    seed: u64,
    cap: usize,
) -> Result<RunRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = params.basis();
    let mut pop = params.initial.to_population(params.n)?;
    let mut checkpoints = Vec::with_capacity(times.len());
    let mut aborted = None;
    for &t in times {
        match evolve(pop, t, law, &params.ou, cap, &mut rng) {
            Ok(next) => pop = next,
            Err(EvolveError::CapExceeded { partial, cap }) => {
                aborted = Some(AbortMarker {
                    time: partial.time(),
                    count: partial.count() as u64,
                    cap: cap as u64,
                });
                break;
            }
            Err(e) => return Err(e.into()),
        }
        checkpoints.push(Checkpoint {
            time: t,
            count: pop.count() as u64,
            total_mass: pop.total_mass(),
            values: pop.basis_functionals(&basis, &params.ou),
        });
    }
    let survived = aborted.is_none() && checkpoints.last().is_some_and(|c| c.count > 0);
    Ok(RunRecord {
        replicate,
        seed,
        params: Arc::clone(params),
        checkpoint_times: times.to_vec(),
        checkpoints,
        survived,
        aborted,
    })
}

impl RunRecord {
    /// Survived to the horizon and was not aborted.
    pub fn usable(&self) -> bool {
        self.survived && self.aborted.is_none()
    }

    pub fn checkpoint(&self, t: f64) -> Option<&Checkpoint> {
        self.checkpoints
            .iter()
            .find(|c| (c.time - t).abs() <= TIME_MATCH)
    }

    fn require(&self, op: &'static str, t: f64) -> Result<&Checkpoint> {
        self.checkpoint(t).ok_or_else(|| {
            Error::precondition(
                "simulator",
                op,
                format!("time {t} is not a stored checkpoint"),
            )
        })
    }

    fn basis_position(&self, op: &'static str, p: &MultiIndex) -> Result<usize> {
        if p.degree() > self.params.degree_cap || p.dim() != self.params.ou.dim {
            return Err(Error::precondition(
                "simulator",
                op,
                format!(
                    "index {p} is outside the stored basis (degree cap {})",
                    self.params.degree_cap
                ),
            ));
        }
        Ok(self
            .params
            .basis()
            .iter()
            .position(|q| q == p)
            .expect("index within cap is in the basis"))
    }

    /// `X_t(f)` reconstructed from the stored basis functionals.
    pub fn functional(&self, t: f64, f: &SpectralFunction) -> Result<f64> {
        let cp = self.require("functional", t)?;
        let mut acc = 0.0;
        for (p, c) in f.terms() {
            acc += c * cp.values[self.basis_position("functional", p)?];
        }
        Ok(acc)
    }

    /// `H^p_t`.
    pub fn h_value(&self, t: f64, p: &MultiIndex) -> Result<f64> {
        let cp = self.require("h_martingale", t)?;
        let v = cp.values[self.basis_position("h_martingale", p)?];
        let rate = self.params.mech.alpha - p.degree() as f64 * self.params.ou.b;
        Ok((-rate * t).exp() * v)
    }

    /// Estimate of `x_t(f) = Σ_{αβ̃>|p|b} ⟨f,φ_p⟩ e^{(α−|p|b)t} H^p_∞` with
    /// `H^p_∞` replaced by `H^p_u`. Only the large-regime part of `f`
    /// contributes.
    pub fn compensator(&self, large: &SpectralFunction, t: f64, u: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (p, c) in large.terms() {
            let rate = self.params.mech.alpha - p.degree() as f64 * self.params.ou.b;
            acc += c * (rate * t).exp() * self.h_value(u, p)?;
        }
        Ok(acc)
    }
}

/// `S(t)` for one replicate, with `H^p_∞` in the compensator approximated at
/// checkpoint `u`.
///
/// `u = t` is rejected because then the large coordinate vanishes identically.
/// With `u < t` the coordinate contains the fluctuations accumulated on
/// `[u, t]`, which grow like `e^{αβ̃(t−u)}` after normalization; a checkpoint
/// `u > t` converges to the target as `u − t` grows.
pub fn joint_statistic(
    run: &RunRecord,
    decomp: &RegimeDecomposition,
    t: f64,
    u: f64,
) -> Result<Outcome<JointStatistic>> {
    if (u - t).abs() <= TIME_MATCH {
        return Err(Error::precondition(
            "simulator",
            "joint_statistic",
            "compensator checkpoint u must differ from t",
        ));
    }
    if !(t > 0.0) {
        return Err(Error::precondition(
            "simulator",
            "joint_statistic",
            format!("t must be positive, got {t}"),
        ));
    }
    run.require("joint_statistic", t)?;
    if !large_is_empty(decomp) {
        run.require("joint_statistic", u)?;
    }
    if !run.usable() {
        return Ok(Outcome::Rejected(reject_reason(run)));
    }
    let cp = run.require("joint_statistic", t)?;
    if cp.count == 0 {
        return Ok(Outcome::Rejected(format!("extinct at t = {t}")));
    }
    let mass = cp.total_mass;
    let expo = 1.0 - run.params.mech.beta_tilde();
    let norm = mass.powf(expo);
    let large = if large_is_empty(decomp) {
        0.0
    } else {
        run.functional(t, &decomp.large)? - run.compensator(&decomp.large, t, u)?
    };
    Ok(Outcome::Accepted(JointStatistic {
        h: (-run.params.mech.alpha * t).exp() * mass,
        s_stat: run.functional(t, &decomp.small)? / norm,
        c_stat: run.functional(t, &decomp.critical)? / (t * mass).powf(expo),
        l_stat: large / norm,
    }))
}

fn large_is_empty(d: &RegimeDecomposition) -> bool {
    d.large.is_zero()
}

fn reject_reason(run: &RunRecord) -> String {
    match &run.aborted {
        Some(m) => format!("aborted at t = {} with {} particles", m.time, m.count),
        None => "extinct before the horizon".to_string(),
    }
}

/// `Υ^f_t = (X_{t+1}(f) − X_t(P^α_1 f)) / ‖X_t‖^{1−β̃}`.
pub fn upsilon(run: &RunRecord, f: &SpectralFunction, t: f64) -> Result<Outcome<f64>> {
    run.require("upsilon", t)?;
    run.require("upsilon", t + 1.0)?;
    if !run.usable() {
        return Ok(Outcome::Rejected(reject_reason(run)));
    }
    let cp = run.require("upsilon", t)?;
    if cp.count == 0 {
        return Ok(Outcome::Rejected(format!("extinct at t = {t}")));
    }
    let p = &run.params;
    let shifted = semigroup_alpha_apply(1.0, f, &p.ou, p.mech.alpha)?;
    let num = run.functional(t + 1.0, f)? - run.functional(t, &shifted)?;
    Ok(Outcome::Accepted(
        num / cp.total_mass.powf(1.0 - p.mech.beta_tilde()),
    ))
}
