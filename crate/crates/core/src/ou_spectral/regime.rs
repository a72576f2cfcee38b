use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{OuParams, SpectralFunction};
use crate::branching::BranchingMechanism;

/// Relative tolerance used when the parameters are not recoverable as small
/// rationals. Ties inside the band are classified as critical.
pub const REGIME_TOLERANCE: f64 = 1e-12;
const MAX_DENOMINATOR: i64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `αβ̃ < |p|b`
    Small,
    /// `αβ̃ = |p|b`
    Critical,
    /// `αβ̃ > |p|b`
    Large,
}

fn exact_rational(x: f64) -> Option<Ratio<i128>> {
    let r = Ratio::<i64>::approximate_float(x)?;
    if *r.denom() > MAX_DENOMINATOR || (*r.numer() as f64 / *r.denom() as f64) != x {
        return None;
    }
    Some(Ratio::new(*r.numer() as i128, *r.denom() as i128))
}

/// The comparison `αβ̃` vs `k·b` for degrees `k`.
#[derive(Debug, Clone, Copy)]
pub struct RegimeThreshold {
    alpha_beta_tilde: f64,
    b: f64,
    exact: Option<(Ratio<i128>, Ratio<i128>)>,
}

impl RegimeThreshold {
    pub fn new(mech: &BranchingMechanism, ou: &OuParams) -> Self {
        let exact = match (
            exact_rational(mech.alpha),
            exact_rational(mech.beta),
            exact_rational(ou.b),
        ) {
            (Some(a), Some(beta), Some(b)) => {
                let one = Ratio::from_integer(1);
                Some((a * beta / (one + beta), b))
            }
            _ => None,
        };
        RegimeThreshold {
            alpha_beta_tilde: mech.alpha_beta_tilde(),
            b: ou.b,
            exact,
        }
    }

    /// Whether the comparison is done in exact rational arithmetic.
    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn value(&self) -> f64 {
        self.alpha_beta_tilde
    }

    pub fn regime(&self, degree: u32) -> Regime {
        use std::cmp::Ordering::*;
        let ord = match &self.exact {
            Some((abt, b)) => (b * Ratio::from_integer(degree as i128)).cmp(abt),
            None => {
                let lhs = degree as f64 * self.b;
                let scale = lhs.abs().max(self.alpha_beta_tilde.abs()).max(1.0);
                if (lhs - self.alpha_beta_tilde).abs() <= REGIME_TOLERANCE * scale {
                    Equal
                } else if lhs > self.alpha_beta_tilde {
                    Greater
                } else {
                    Less
                }
            }
        };
        match ord {
            Greater => Regime::Small,
            Equal => Regime::Critical,
            Less => Regime::Large,
        }
    }

    /// Decay rate `| |p|b − αβ̃ |` of the auxiliary semigroup; exactly zero on
    /// the critical class.
    pub fn gap(&self, degree: u32) -> f64 {
        match self.regime(degree) {
            Regime::Critical => 0.0,
            _ => (degree as f64 * self.b - self.alpha_beta_tilde).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeDecomposition {
    pub small: SpectralFunction,
    pub critical: SpectralFunction,
    pub large: SpectralFunction,
}

impl RegimeDecomposition {
    pub fn recombine(&self) -> SpectralFunction {
        self.small.clone() + self.critical.clone() + self.large.clone()
    }
}

pub fn classify(
    f: &SpectralFunction,
    mech: &BranchingMechanism,
    ou: &OuParams,
) -> RegimeDecomposition {
    let th = RegimeThreshold::new(mech, ou);
    RegimeDecomposition {
        small: f.filter(|p| th.regime(p.degree()) == Regime::Small),
        critical: f.filter(|p| th.regime(p.degree()) == Regime::Critical),
        large: f.filter(|p| th.regime(p.degree()) == Regime::Large),
    }
}
