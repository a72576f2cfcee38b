use std::sync::mpsc;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::{simulate_replicate, RunParams, RunRecord};
use crate::branching::{BranchingMechanism, OffspringLaw};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub params: RunParams,
    /// Strictly increasing, within `[0, T]`; the last entry is the horizon.
    pub checkpoint_times: Vec<f64>,
    pub replicates: u64,
    pub master_seed: u64,
    pub particle_cap: usize,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::precondition("simulator", "run_ensemble", m));
        if self.checkpoint_times.is_empty() {
            return bad("need at least one checkpoint".into());
        }
        if self.checkpoint_times[0] < 0.0 {
            return bad("checkpoint times must be non-negative".into());
        }
        if self.checkpoint_times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("checkpoint times must be strictly increasing".into());
        }
        if self.replicates == 0 {
            return bad("need at least one replicate".into());
        }
        if self.params.initial.dim() != self.params.ou.dim {
            return bad("initial measure dimension differs from the OU dimension".into());
        }
        self.params.ou.validate()?;
        self.params.mech.validate()?;
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        *self.checkpoint_times.last().unwrap_or(&0.0)
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `i`: `splitmix64(master + (i+1)·0x9E3779B97F4A7C15)`.
/// Each seed initializes an independent ChaCha8 stream.
pub fn derive_seed(master: u64, replicate: u64) -> u64 {
    mix(master.wrapping_add(
        replicate
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15),
    ))
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub records: Vec<RunRecord>,
    pub survival_fraction: f64,
    /// `1 − e^{−‖μ‖v̄}` for the superprocess.
    pub superprocess_survival: f64,
    /// `1 − (1 − v̄/n)^{n‖μ‖}` for the particle system itself.
    pub particle_survival: f64,
    pub aborted: Vec<u64>,
}

impl Ensemble {
    pub fn usable(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(|r| r.usable())
    }

    pub fn usable_count(&self) -> usize {
        self.usable().count()
    }
}

/// Extinction probability of the particle system started from
/// `round(n·mass)` particles: `(1 − v̄/n)^{count}`.
pub fn particle_extinction_prob(mech: &BranchingMechanism, n: u64, mass: f64) -> f64 {
    let count = (mass * n as f64).round();
    (count * (-mech.extinction_root() / n as f64).ln_1p()).exp()
}

/// Exact `E[e^{−λ‖X_t‖}]` for the particle system: with
/// `u_0 = n(1 − e^{−λ/n})`, `u_t = v_t(u_0)` and the transform is
/// `(1 − u_t/n)^{count}`.
pub fn particle_laplace(
    mech: &BranchingMechanism,
    n: u64,
    mass: f64,
    t: f64,
    lambda: f64,
) -> Result<f64> {
    let nf = n as f64;
    let count = (mass * nf).round();
    let u0 = -nf * (-lambda / nf).exp_m1();
    let ut = mech.csbp_laplace(t, u0)?;
    Ok((count * (-ut / nf).ln_1p()).exp())
}

/// Expected size and cost of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedLoad {
    /// `n‖μ‖e^{αT}`
    pub expected_particles: f64,
    /// `γ_n n‖μ‖(e^{αT} − 1)/α`
    pub expected_events: f64,
}

pub fn projected_load(
    mech: &BranchingMechanism,
    n: u64,
    mass: f64,
    horizon: f64,
) -> Result<ProjectedLoad> {
    let law = OffspringLaw::new(n, mech)?;
    let start = (mass * n as f64).round();
    Ok(ProjectedLoad {
        expected_particles: start * (mech.alpha * horizon).exp(),
        expected_events: law.rate * start * (mech.alpha * horizon).exp_m1() / mech.alpha,
    })
}

/// Runs `replicates` independent replicates in parallel. Workers send
/// finished records over a channel; the calling thread is the only writer of
/// the result vector, which is ordered by replicate index.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<Ensemble> {
    config.validate()?;
    let params = Arc::new(config.params.clone());
    let law = OffspringLaw::new(params.n, &params.mech)?;
    let n = config.replicates;
    let (tx, rx) = mpsc::channel::<(u64, Result<RunRecord>)>();
    (0..n).into_par_iter().for_each_with(tx, |tx, i| {
        let seed = derive_seed(config.master_seed, i);
        let rec = simulate_replicate(
            &params,
            &law,
            &config.checkpoint_times,
            i,
            seed,
            config.particle_cap,
        );
        // The receiver outlives the parallel loop.
        tx.send((i, rec)).expect("aggregator alive");
    });
    let mut slots: Vec<Option<RunRecord>> = vec![None; n as usize];
    for (i, rec) in rx {
        slots[i as usize] = Some(rec?);
    }
    let records: Vec<RunRecord> = slots
        .into_iter()
        .map(|r| r.expect("every replicate reported"))
        .collect();
    Ensemble::from_records(records, &params)
}

impl Ensemble {
    /// Aggregates finished replicates, ordered by replicate index.
    pub fn from_records(records: Vec<RunRecord>, params: &RunParams) -> Result<Ensemble> {
        let n = records.len().max(1);
        let aborted: Vec<u64> = records
            .iter()
            .filter(|r| r.aborted.is_some())
            .map(|r| r.replicate)
            .collect();
        let survived = records.iter().filter(|r| r.survived).count();
        let mass = params.initial.discretize(params.n)?.total_mass();
        Ok(Ensemble {
            survival_fraction: survived as f64 / n as f64,
            superprocess_survival: 1.0 - params.mech.extinction_prob(mass),
            particle_survival: 1.0 - particle_extinction_prob(&params.mech, params.n, mass),
            aborted,
            records,
        })
    }
}
