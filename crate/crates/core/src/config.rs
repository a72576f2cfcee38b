//! Experiment configuration, read from TOML. Keys use the symbols of the
//! model: `sigma`, `b`, `d`, `alpha`, `rho`, `eta`, `beta`, `mu`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::branching::BranchingMechanism;
use crate::error::{Error, Result};
use crate::ou_spectral::{MultiIndex, OuParams, SpectralFunction};
use crate::simulator::{Atom, EnsembleConfig, InitialMeasure, RunParams, DEFAULT_PARTICLE_CAP};
use crate::stats::theta_grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuSection {
    pub sigma: f64,
    pub b: f64,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSection {
    pub alpha: f64,
    #[serde(default)]
    pub rho: f64,
    pub eta: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    pub x: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// Particles carry mass `1/n`.
    pub n: u64,
    pub checkpoints: Vec<f64>,
    pub replicates: u64,
    pub seed: u64,
    #[serde(default = "default_degree_cap")]
    pub degree_cap: u32,
    #[serde(default = "default_particle_cap")]
    pub particle_cap: usize,
    /// Time `t` at which the normalized statistics are formed; defaults to
    /// the last checkpoint.
    #[serde(default)]
    pub statistic_time: Option<f64>,
    /// Checkpoint `u` used for `H^p_∞` in the compensator; defaults to `t/2`.
    #[serde(default)]
    pub compensator_u: Option<f64>,
    /// Time `t` of `Υ_t`; `t + 1` must also be a checkpoint.
    #[serde(default)]
    pub upsilon_time: Option<f64>,
}

fn default_degree_cap() -> u32 {
    2
}

fn default_particle_cap() -> usize {
    DEFAULT_PARTICLE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    crate::ou_spectral::DEFAULT_NODES
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection {
            nodes: default_nodes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsSection {
    pub theta_min: f64,
    pub theta_max: f64,
    pub marginal_points: usize,
    pub joint_points: usize,
    pub clt_tolerance: f64,
    pub joint_tolerance: f64,
    pub corollary_tolerance: f64,
    pub upsilon_tolerance: f64,
    /// `L^{1+γ}` norms may grow at most by this factor over the checkpoints.
    pub lp_growth_bound: f64,
}

impl Default for StatsSection {
    fn default() -> Self {
        StatsSection {
            theta_min: -3.0,
            theta_max: 3.0,
            marginal_points: 25,
            joint_points: 5,
            clt_tolerance: 0.05,
            joint_tolerance: 0.1,
            corollary_tolerance: 0.07,
            upsilon_tolerance: 0.03,
            lp_growth_bound: 1.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSection {
    pub p: Vec<u32>,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsSection {
    /// Coefficients of `f` in the eigenbasis.
    pub f: Vec<TermSection>,
    pub t_grid: Vec<f64>,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_points: usize,
    /// Also check `Σ_{k≤n} ⟨Z_1 T_k f̃, φ⟩ = m_{n+1}[f]` for `n ≤ identity_max_n`.
    pub identity: bool,
    pub identity_max_n: u32,
}

impl Default for LimitsSection {
    fn default() -> Self {
        LimitsSection {
            f: Vec::new(),
            t_grid: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            theta_min: -5.0,
            theta_max: 5.0,
            theta_points: 41,
            identity: false,
            identity_max_n: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ou: OuSection,
    pub mechanism: MechanismSection,
    pub mu: Vec<AtomSection>,
    pub simulation: SimulationSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub suites: Vec<String>,
}

/// The verification suites, by name.
pub const SUITES: [&str; 9] = [
    "means",
    "laplace",
    "martingale",
    "clt-small",
    "clt-critical",
    "clt-large",
    "joint-independence",
    "corollary",
    "upsilon",
];

fn invalid(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{field}`: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    /// The canonical model with a desk-scale simulation.
    pub fn canonical() -> Self {
        ExperimentConfig {
            ou: OuSection {
                sigma: std::f64::consts::SQRT_2,
                b: 1.0,
                d: 1,
            },
            mechanism: MechanismSection {
                alpha: 3.0,
                rho: 0.0,
                eta: 1.0,
                beta: 0.5,
            },
            mu: vec![AtomSection {
                x: vec![0.5],
                mass: 1.0,
            }],
            simulation: SimulationSection {
                n: 1000,
                checkpoints: vec![0.25, 0.5, 0.75, 1.0],
                replicates: 10_000,
                seed: 20_240_917,
                degree_cap: 2,
                particle_cap: DEFAULT_PARTICLE_CAP,
                statistic_time: None,
                compensator_u: None,
                upsilon_time: None,
            },
            quadrature: QuadratureSection::default(),
            stats: StatsSection::default(),
            limits: LimitsSection::default(),
            suites: Vec::new(),
        }
    }

    pub fn ou_params(&self) -> Result<OuParams> {
        OuParams::new(self.ou.sigma, self.ou.b, self.ou.d).map_err(|e| invalid("ou", e))
    }

    pub fn mechanism(&self) -> Result<BranchingMechanism> {
        let m = &self.mechanism;
        BranchingMechanism::new(m.alpha, m.rho, m.eta, m.beta).map_err(|e| invalid("mechanism", e))
    }

    pub fn initial_measure(&self) -> Result<InitialMeasure> {
        InitialMeasure::new(
            self.mu
                .iter()
                .map(|a| Atom {
                    position: a.x.clone(),
                    mass: a.mass,
                })
                .collect(),
        )
        .map_err(|e| invalid("mu", e))
    }

    pub fn horizon(&self) -> f64 {
        *self.simulation.checkpoints.last().unwrap_or(&0.0)
    }

    pub fn statistic_time(&self) -> f64 {
        self.simulation
            .statistic_time
            .unwrap_or_else(|| self.horizon())
    }

    pub fn compensator_u(&self) -> f64 {
        self.simulation
            .compensator_u
            .unwrap_or_else(|| self.statistic_time() / 2.0)
    }

    pub fn upsilon_time(&self) -> Option<f64> {
        self.simulation.upsilon_time
    }

    pub fn marginal_grid(&self) -> Vec<f64> {
        theta_grid(
            self.stats.theta_min,
            self.stats.theta_max,
            self.stats.marginal_points,
        )
    }

    pub fn joint_grid(&self) -> Vec<f64> {
        theta_grid(
            self.stats.theta_min,
            self.stats.theta_max,
            self.stats.joint_points,
        )
    }

    pub fn limits_function(&self) -> Result<SpectralFunction> {
        let d = self.ou.d;
        for (i, t) in self.limits.f.iter().enumerate() {
            if t.p.len() != d {
                return Err(invalid(
                    &format!("limits.f[{i}].p"),
                    format!("needs {d} entries, got {}", t.p.len()),
                ));
            }
        }
        Ok(SpectralFunction::from_terms(
            d,
            self.limits
                .f
                .iter()
                .map(|t| (MultiIndex::new(t.p.clone()), t.c)),
        ))
    }

    pub fn run_params(&self) -> Result<RunParams> {
        Ok(RunParams {
            ou: self.ou_params()?,
            mech: self.mechanism()?,
            n: self.simulation.n,
            initial: self.initial_measure()?,
            degree_cap: self.simulation.degree_cap,
        })
    }

    pub fn ensemble_config(&self) -> Result<EnsembleConfig> {
        Ok(EnsembleConfig {
            params: self.run_params()?,
            checkpoint_times: self.simulation.checkpoints.clone(),
            replicates: self.simulation.replicates,
            master_seed: self.simulation.seed,
            particle_cap: self.simulation.particle_cap,
        })
    }

    fn is_checkpoint(&self, t: f64) -> bool {
        self.simulation
            .checkpoints
            .iter()
            .any(|c| (c - t).abs() <= 1e-9)
    }

    pub fn validate(&self) -> Result<()> {
        self.ou_params()?;
        let mech = self.mechanism()?;
        let mu = self.initial_measure()?;
        if mu.dim() != self.ou.d {
            return Err(invalid(
                "mu",
                format!("atoms must have {} coordinates", self.ou.d),
            ));
        }
        let sim = &self.simulation;
        if (sim.n as f64) <= mech.extinction_root() {
            return Err(invalid(
                "simulation.n",
                format!("must exceed v_bar = {}", mech.extinction_root()),
            ));
        }
        if sim.checkpoints.is_empty() {
            return Err(invalid("simulation.checkpoints", "need at least one time"));
        }
        if sim.checkpoints[0] < 0.0 || sim.checkpoints.iter().any(|t| !t.is_finite()) {
            return Err(invalid(
                "simulation.checkpoints",
                "times must be finite and non-negative",
            ));
        }
        if sim.checkpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid(
                "simulation.checkpoints",
                "times must be strictly increasing",
            ));
        }
        if sim.replicates == 0 {
            return Err(invalid("simulation.replicates", "must be positive"));
        }
        let t = self.statistic_time();
        if !self.is_checkpoint(t) || t <= 0.0 {
            return Err(invalid(
                "simulation.statistic_time",
                format!("{t} must be a positive checkpoint"),
            ));
        }
        let u = self.compensator_u();
        if !self.is_checkpoint(u) {
            return Err(invalid(
                "simulation.compensator_u",
                format!("{u} is not a checkpoint"),
            ));
        }
        if (u - t).abs() <= 1e-9 {
            return Err(invalid(
                "simulation.compensator_u",
                "must differ from the statistic time",
            ));
        }
        if let Some(ut) = sim.upsilon_time {
            if !self.is_checkpoint(ut) || !self.is_checkpoint(ut + 1.0) {
                return Err(invalid(
                    "simulation.upsilon_time",
                    format!("both {ut} and {} must be checkpoints", ut + 1.0),
                ));
            }
        }
        if self.quadrature.nodes == 0 {
            return Err(invalid("quadrature.nodes", "must be positive"));
        }
        let st = &self.stats;
        if !(st.theta_min < st.theta_max) || st.marginal_points == 0 || st.joint_points == 0 {
            return Err(invalid(
                "stats",
                "θ-grid must be a non-empty increasing range",
            ));
        }
        if self.limits.t_grid.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("limits.t_grid", "times must be non-negative"));
        }
        self.limits_function()?;
        for s in &self.suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(invalid("suites", format!("unknown suite `{s}`")));
            }
        }
        Ok(())
    }
}
