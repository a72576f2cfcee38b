//! Ornstein–Uhlenbeck motion, its Gaussian invariant law and the Hermite
//! eigenbasis in which every test function is represented.
//!
//! The motion has generator `½σ²Δ − b x·∇`; its invariant law is the centred
//! Gaussian with per-axis variance `s² = σ²/(2b)`. The eigenfunctions are
//! tensor products of normalized probabilists' Hermite polynomials in the
//! scaled variable `x/s`, and satisfy `P_t φ_p = e^{−b|p|t} φ_p`.

mod function;
mod grid;
mod regime;

pub use function::{BasisEvaluator, MultiIndex, SpectralFunction};
pub use grid::{gauss_hermite_unit, GridKind, QuadratureGrid, DEFAULT_NODES};
pub use regime::{classify, Regime, RegimeDecomposition, RegimeThreshold};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::branching::BranchingMechanism;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub sigma: f64,
    pub b: f64,
    pub dim: usize,
}

impl OuParams {
    pub fn new(sigma: f64, b: f64, dim: usize) -> Result<Self> {
        let p = OuParams { sigma, b, dim };
        p.validate()?;
        Ok(p)
    }

    /// The parameter set under which the invariant law is the standard normal
    /// and `φ_(1)(x) = x`.
    pub fn canonical() -> Self {
        OuParams {
            sigma: std::f64::consts::SQRT_2,
            b: 1.0,
            dim: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::construction(
                "ou_spectral",
                "OuParams::new",
                format!("sigma must be positive and finite, got {}", self.sigma),
            ));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::construction(
                "ou_spectral",
                "OuParams::new",
                format!("b must be positive and finite, got {}", self.b),
            ));
        }
        if self.dim == 0 {
            return Err(Error::construction(
                "ou_spectral",
                "OuParams::new",
                "dimension must be at least 1",
            ));
        }
        Ok(())
    }

    /// Stationary standard deviation per axis, `σ/√(2b)`.
    pub fn stationary_scale(&self) -> f64 {
        self.sigma / (2.0 * self.b).sqrt()
    }
}

/// Density of the invariant law, `(b/(πσ²))^{d/2} exp(−(b/σ²)|x|²)`.
pub fn invariant_density(x: &[f64], ou: &OuParams) -> f64 {
    let k = ou.b / (ou.sigma * ou.sigma);
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (k / std::f64::consts::PI).powf(ou.dim as f64 / 2.0) * (-k * r2).exp()
}

/// Normalized probabilists' Hermite values `He_k(y)/√(k!)` for `k = 0..=max`.
pub fn hermite_normalized(y: f64, max: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if max == 0 {
        return;
    }
    out.push(y);
    for k in 1..max {
        let kf = k as f64;
        let next = (y * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
        out.push(next);
    }
}

/// `φ_p(x) = ∏_k He_{p_k}(x_k/s)/√(p_k!)`.
pub fn eigenfunction_eval(p: &MultiIndex, x: &[f64], ou: &OuParams) -> f64 {
    debug_assert_eq!(p.dim(), x.len());
    let s = ou.stationary_scale();
    let mut buf = Vec::new();
    p.entries()
        .iter()
        .zip(x)
        .map(|(&k, &xi)| {
            hermite_normalized(xi / s, k as usize, &mut buf);
            buf[k as usize]
        })
        .product()
}

/// Exact OU transition: given `ξ_0 = x`, overwrite `x` with a draw of `ξ_t`.
pub fn mehler_step<R: Rng + ?Sized>(t: f64, x: &mut [f64], ou: &OuParams, rng: &mut R) {
    if t <= 0.0 {
        return;
    }
    let decay = (-ou.b * t).exp();
    let sd = ou.stationary_scale() * (-(-2.0 * ou.b * t).exp_m1()).sqrt();
    for xi in x.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *xi = *xi * decay + sd * z;
    }
}

pub fn mehler_sample<R: Rng + ?Sized>(
    t: f64,
    x: &[f64],
    ou: &OuParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::precondition(
            "ou_spectral",
            "mehler_sample",
            format!("time must be non-negative, got {t}"),
        ));
    }
    let mut out = x.to_vec();
    mehler_step(t, &mut out, ou, rng);
    Ok(out)
}

fn check_time(op: &'static str, t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::precondition(
            "ou_spectral",
            op,
            format!("time must be finite and non-negative, got {t}"),
        ))
    }
}

/// `P_t f`: each coefficient is multiplied by `e^{−b|p|t}`.
pub fn semigroup_apply(t: f64, f: &SpectralFunction, ou: &OuParams) -> Result<SpectralFunction> {
    check_time("semigroup_apply", t)?;
    Ok(f.map_coeffs(|p, c| c * (-ou.b * p.degree() as f64 * t).exp()))
}

/// `P^α_t f = e^{αt} P_t f`.
pub fn semigroup_alpha_apply(
    t: f64,
    f: &SpectralFunction,
    ou: &OuParams,
    alpha: f64,
) -> Result<SpectralFunction> {
    check_time("semigroup_alpha_apply", t)?;
    Ok(f.map_coeffs(|p, c| c * ((alpha - ou.b * p.degree() as f64) * t).exp()))
}

/// The auxiliary semigroup `T_t`: coefficient `p` decays at rate
/// `| |p|b − αβ̃ |`, so critical coefficients are fixed.
pub fn t_apply(
    t: f64,
    f: &SpectralFunction,
    mech: &BranchingMechanism,
    ou: &OuParams,
) -> Result<SpectralFunction> {
    check_time("t_apply", t)?;
    let threshold = RegimeThreshold::new(mech, ou);
    Ok(f.map_coeffs(|p, c| c * (-threshold.gap(p.degree()) * t).exp()))
}

/// Order `κ_f`: the smallest degree carrying a nonzero coefficient, `None`
/// standing for `+∞` (the zero function).
pub fn order(f: &SpectralFunction) -> Option<u32> {
    f.terms().map(|(p, _)| p.degree()).min()
}

/// `ũ = u/(1+u)`.
pub fn tilde(u: f64) -> Result<f64> {
    if u == -1.0 {
        return Err(Error::domain("ou_spectral", "tilde", "u = -1 is excluded"));
    }
    Ok(u / (1.0 + u))
}
