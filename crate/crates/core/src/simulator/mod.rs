//! Event-driven branching OU particle system approximating the
//! `(ξ, ψ)`-superprocess.
//!
//! Particles carry mass `ε = 1/n` and branch at rate `γ_n` with the offspring
//! law of [`OffspringLaw`]. In `u = n(1 − s)` coordinates the generating
//! function evolves under exactly `ψ`, so the mean semigroup, the martingales
//! `H^p_t` and the small-argument behaviour of the Laplace functional coincide
//! with those of the superprocess for every admissible `n`.
//!
//! Positions are advanced lazily: a particle is only moved (by an exact
//! Mehler step) when it produces offspring or when the population is
//! synchronized at a checkpoint. Deaths and single-offspring events never
//! touch the position.

mod ensemble;
mod record;

pub use ensemble::{
    derive_seed, particle_extinction_prob, particle_laplace, projected_load, run_ensemble,
    Ensemble, EnsembleConfig, ProjectedLoad,
};
pub use record::{
    joint_statistic, simulate_replicate, upsilon, AbortMarker, Checkpoint, JointStatistic, Outcome,
    RunParams, RunRecord,
};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::branching::{BranchingMechanism, OffspringLaw};
use crate::error::{Error, Result};
use crate::ou_spectral::{mehler_step, MultiIndex, OuParams, SpectralFunction};

pub const DEFAULT_PARTICLE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: Vec<f64>,
    pub mass: f64,
}

/// A finite, compactly supported initial measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialMeasure {
    atoms: Vec<Atom>,
}

impl InitialMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::construction(
                "simulator",
                "InitialMeasure::new",
                "need at least one atom",
            ));
        }
        let dim = atoms[0].position.len();
        for a in &atoms {
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(Error::construction(
                    "simulator",
                    "InitialMeasure::new",
                    format!("atom masses must be positive, got {}", a.mass),
                ));
            }
            if a.position.len() != dim || a.position.iter().any(|v| !v.is_finite()) {
                return Err(Error::construction(
                    "simulator",
                    "InitialMeasure::new",
                    "atom positions must be finite points of a common dimension",
                ));
            }
        }
        Ok(InitialMeasure { atoms })
    }

    pub fn dirac(position: Vec<f64>, mass: f64) -> Result<Self> {
        Self::new(vec![Atom { position, mass }])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].position.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// `μ(f)`.
    pub fn integrate(&self, f: &SpectralFunction, ou: &OuParams) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.mass * f.eval(&a.position, ou))
            .sum()
    }

    /// The measure actually realized by particles of mass `1/n`: every atom
    /// of mass `m` becomes `round(m·n)` particles.
    pub fn discretize(&self, n: u64) -> Result<InitialMeasure> {
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| Atom {
                position: a.position.clone(),
                mass: (a.mass * n as f64).round() / n as f64,
            })
            .filter(|a| a.mass > 0.0)
            .collect();
        if atoms.is_empty() {
            return Err(Error::construction(
                "simulator",
                "InitialMeasure::discretize",
                format!("no atom carries at least half a particle at n = {n}"),
            ));
        }
        Ok(InitialMeasure { atoms })
    }

    pub fn to_population(&self, n: u64) -> Result<Population> {
        let dim = self.dim();
        let mut positions = Vec::new();
        for a in &self.discretize(n)?.atoms {
            let k = (a.mass * n as f64).round() as usize;
            for _ in 0..k {
                positions.extend_from_slice(&a.position);
            }
        }
        Ok(Population {
            dim,
            unit_mass: 1.0 / n as f64,
            time: 0.0,
            positions,
        })
    }
}

/// Particle positions at a common time, each carrying mass `unit_mass`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    dim: usize,
    unit_mass: f64,
    time: f64,
    positions: Vec<f64>,
}

impl Population {
    pub fn new(dim: usize, unit_mass: f64, time: f64, positions: Vec<f64>) -> Self {
        assert!(dim > 0 && positions.len().is_multiple_of(dim));
        Population {
            dim,
            unit_mass,
            time,
            positions,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn unit_mass(&self) -> f64 {
        self.unit_mass
    }

    pub fn count(&self) -> usize {
        self.positions.len() / self.dim
    }

    /// `‖X_t‖ = ε · count`.
    pub fn total_mass(&self) -> f64 {
        self.unit_mass * self.count() as f64
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    /// `X_t(f) = ε Σ_i f(x_i)`.
    pub fn measure_functional(&self, f: &SpectralFunction, ou: &OuParams) -> f64 {
        self.unit_mass * self.positions().map(|x| f.eval(x, ou)).sum::<f64>()
    }

    /// `X_t(φ_p)` for each of `indices`, in one pass.
    pub fn basis_functionals(&self, indices: &[MultiIndex], ou: &OuParams) -> Vec<f64> {
        let mut ev = crate::ou_spectral::BasisEvaluator::new(indices.to_vec(), ou);
        let mut buf = vec![0.0; indices.len()];
        let mut acc = vec![0.0; indices.len()];
        for x in self.positions() {
            ev.eval_into(x, &mut buf);
            for (a, v) in acc.iter_mut().zip(&buf) {
                *a += v;
            }
        }
        acc.iter().map(|v| v * self.unit_mass).collect()
    }
}

/// `H^p_t = e^{−(α−|p|b)t} X_t(φ_p)` at the population's time.
pub fn h_martingale(
    pop: &Population,
    p: &MultiIndex,
    mech: &BranchingMechanism,
    ou: &OuParams,
) -> f64 {
    let rate = mech.alpha - p.degree() as f64 * ou.b;
    let f = SpectralFunction::eigen(p.clone());
    (-rate * pop.time).exp() * pop.measure_functional(&f, ou)
}

#[derive(Debug)]
pub enum EvolveError {
    /// The target time lies before the population's time.
    Backwards { from: f64, to: f64 },
    /// The population outgrew the cap. `partial` is synchronized at the time
    /// of the offending event.
    CapExceeded { partial: Population, cap: usize },
}

impl From<EvolveError> for Error {
    fn from(e: EvolveError) -> Self {
        match e {
            EvolveError::Backwards { from, to } => Error::precondition(
                "simulator",
                "evolve",
                format!("cannot evolve backwards from {from} to {to}"),
            ),
            EvolveError::CapExceeded { partial, cap } => Error::resource(
                "simulator",
                "evolve",
                format!(
                    "particle cap {cap} exceeded at t = {} ({} particles)",
                    partial.time,
                    partial.count()
                ),
            ),
        }
    }
}

fn synchronize<R: Rng + ?Sized>(
    positions: &mut [f64],
    stamps: &[f64],
    dim: usize,
    to: f64,
    ou: &OuParams,
    rng: &mut R,
) {
    for (x, &s) in positions.chunks_exact_mut(dim).zip(stamps) {
        mehler_step(to - s, x, ou, rng);
    }
}

/// Runs the particle system from `pop.time` to `to_time`.
///
/// The next event is drawn from the population-level exponential clock of
/// rate `γ_n · count`, and the branching particle is chosen uniformly.
pub fn evolve<R: Rng + ?Sized>(
    pop: Population,
    to_time: f64,
    law: &OffspringLaw,
    ou: &OuParams,
    cap: usize,
    rng: &mut R,
) -> std::result::Result<Population, EvolveError> {
    if to_time < pop.time {
        return Err(EvolveError::Backwards {
            from: pop.time,
            to: to_time,
        });
    }
    let Population {
        dim,
        unit_mass,
        time,
        mut positions,
    } = pop;
    let mut stamps = vec![time; positions.len() / dim];
    let mut t = time;
    loop {
        let count = stamps.len();
        if count == 0 {
            break;
        }
        let wait: f64 = rng.sample::<f64, _>(Exp1) / (law.rate * count as f64);
        if t + wait >= to_time {
            break;
        }
        t += wait;
        let i = rng.random_range(0..count);
        match law.sample(rng) {
            0 => {
                stamps.swap_remove(i);
                let last = count - 1;
                if i != last {
                    positions.copy_within(last * dim..(last + 1) * dim, i * dim);
                }
                positions.truncate(last * dim);
            }
            1 => {}
            k => {
                if count.saturating_add(k - 1) > cap {
                    synchronize(&mut positions, &stamps, dim, t, ou, rng);
                    return Err(EvolveError::CapExceeded {
                        partial: Population {
                            dim,
                            unit_mass,
                            time: t,
                            positions,
                        },
                        cap,
                    });
                }
                let x = &mut positions[i * dim..(i + 1) * dim];
                mehler_step(t - stamps[i], x, ou, rng);
                stamps[i] = t;
                for _ in 1..k {
                    positions.extend_from_within(i * dim..(i + 1) * dim);
                    stamps.push(t);
                }
            }
        }
    }
    synchronize(&mut positions, &stamps, dim, to_time, ou, rng);
    Ok(Population {
        dim,
        unit_mass,
        time: to_time,
        positions,
    })
}
