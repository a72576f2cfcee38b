//! Characteristic exponents of the stable limit laws.
//!
//! `m_t[f] = η ∫_0^t ∫ (−i T_u f(x))^{1+β} φ(x) dx du` and its long-time limit
//! `m[f]` determine the characteristic function `θ ↦ e^{m[θf]}` of the
//! limiting variable `ζ^f`. All powers use the principal branch, which makes
//! the real part of every exponent non-positive.

mod lemma;
mod sampler;

pub use lemma::{lemma_grid_constant, lemma_ratio, signed_power};
pub use sampler::{hill_estimator, StableSampler};

use std::cell::RefCell;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::branching::BranchingMechanism;
use crate::error::{Error, Result};
use crate::ou_spectral::{
    classify, hermite_normalized, invariant_density, MultiIndex, OuParams, QuadratureGrid,
    RegimeThreshold, SpectralFunction,
};
use crate::quadrature::{self, Tolerance};

/// `(−iy)^{a} = |y|^{a} e^{−i·sgn(y)·aπ/2}` with `a = 1+β`.
pub fn signed_stable_power(y: f64, beta: f64) -> Complex64 {
    if y == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let a = 1.0 + beta;
    let phase = -y.signum() * a * std::f64::consts::FRAC_PI_2;
    Complex64::from_polar(y.abs().powf(a), phase)
}

/// The complex number `m[f]` together with the stability index `a = 1+β`.
///
/// Scaling by `θ` follows `m[θf] = |θ|^a m[f]` for `θ > 0` and
/// `|θ|^a conj(m[f])` for `θ < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableCharExponent {
    pub value: Complex64,
    pub index: f64,
}

impl StableCharExponent {
    pub fn new(value: Complex64, index: f64) -> Result<Self> {
        if !(index > 1.0 && index < 2.0) {
            return Err(Error::construction(
                "stable_limits",
                "StableCharExponent::new",
                format!("index must lie in (1, 2), got {index}"),
            ));
        }
        if !(value.re.is_finite() && value.im.is_finite())
            || value.re > 1e-12 * value.norm().max(1.0)
        {
            return Err(Error::construction(
                "stable_limits",
                "StableCharExponent::new",
                format!("exponent must be finite with non-positive real part, got {value}"),
            ));
        }
        Ok(StableCharExponent {
            value: Complex64::new(value.re.min(0.0), value.im),
            index,
        })
    }

    pub fn zero(index: f64) -> Self {
        StableCharExponent {
            value: Complex64::new(0.0, 0.0),
            index,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value == Complex64::new(0.0, 0.0)
    }

    /// `m[θf]`.
    pub fn at(&self, theta: f64) -> Complex64 {
        let s = theta.abs().powf(self.index);
        if theta >= 0.0 {
            self.value * s
        } else {
            self.value.conj() * s
        }
    }

    /// Exponent of `−ζ^f`, i.e. `m[−f]`.
    pub fn negated(&self) -> Self {
        StableCharExponent {
            value: self.value.conj(),
            index: self.index,
        }
    }

    /// Exponent of the sum of independent variables with exponents `self`
    /// and `other`.
    pub fn independent_sum(&self, other: &Self) -> Self {
        debug_assert_eq!(self.index, other.index);
        StableCharExponent {
            value: self.value + other.value,
            index: self.index,
        }
    }
}

/// `θ ↦ e^{m[θf]}`.
pub fn cf_eval(m: &StableCharExponent, theta: f64) -> Complex64 {
    m.at(theta).exp()
}

/// How the spatial integral `∫ g(x) φ(x) dx` is computed.
#[derive(Debug, Clone)]
pub enum InnerRule {
    /// Adaptive Gauss–Kronrod over `[−w·s, w·s]` (one dimension only). The
    /// integrand `(−i g)^{1+β}` has kinks at the zeros of `g`, where a fixed
    /// Gauss rule converges only algebraically.
    Adaptive { half_width: f64, tol: Tolerance },
    /// A fixed grid carrying the invariant weights.
    Grid(QuadratureGrid),
}

impl InnerRule {
    pub fn for_params(ou: &OuParams, nodes_per_axis: usize) -> Result<Self> {
        if ou.dim == 1 {
            Ok(InnerRule::Adaptive {
                half_width: 12.0,
                tol: Tolerance {
                    abs: 1e-14,
                    rel: 1e-13,
                    max_intervals: 2000,
                },
            })
        } else {
            Ok(InnerRule::Grid(QuadratureGrid::for_params(
                ou,
                nodes_per_axis,
            )?))
        }
    }
}

/// A function with fixed support whose coefficients vary (with time).
struct Support<'a> {
    indices: Vec<MultiIndex>,
    table: Option<Vec<Vec<f64>>>,
    max_degree: usize,
    engine: &'a LimitEngine,
}

impl<'a> Support<'a> {
    fn new(engine: &'a LimitEngine, f: &SpectralFunction) -> Self {
        let indices: Vec<MultiIndex> = f.terms().map(|(p, _)| p.clone()).collect();
        let table = match &engine.rule {
            InnerRule::Grid(g) => Some(g.basis_table(&indices, &engine.ou)),
            InnerRule::Adaptive { .. } => None,
        };
        let max_degree = indices.iter().map(|p| p.degree()).max().unwrap_or(0) as usize;
        Support {
            indices,
            table,
            max_degree,
            engine,
        }
    }

    /// `∫ (−i Σ_p c_p φ_p(x))^{1+β} φ(x) dx`.
    fn power_mean(&self, coeffs: &[f64]) -> Result<Complex64> {
        let beta = self.engine.mech.beta;
        match (&self.engine.rule, &self.table) {
            (InnerRule::Grid(g), Some(table)) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, w) in g.weights().iter().enumerate() {
                    let y: f64 = coeffs.iter().zip(table).map(|(c, row)| c * row[j]).sum();
                    acc += signed_stable_power(y, beta) * *w;
                }
                Ok(acc)
            }
            (InnerRule::Adaptive { half_width, tol }, _) => {
                let ou = &self.engine.ou;
                let s = ou.stationary_scale();
                let degrees: Vec<usize> = self
                    .indices
                    .iter()
                    .map(|p| p.entries()[0] as usize)
                    .collect();
                let md = self.max_degree;
                let integrand = |x: f64| {
                    let mut h = Vec::with_capacity(md + 1);
                    hermite_normalized(x / s, md, &mut h);
                    let y: f64 = coeffs.iter().zip(&degrees).map(|(c, &k)| c * h[k]).sum();
                    signed_stable_power(y, beta) * invariant_density(&[x], ou)
                };
                let r =
                    quadrature::integrate_complex(integrand, -half_width * s, half_width * s, *tol)
                        .map_err(|e| relabel(e, "power_mean"))?;
                Ok(r.value)
            }
            (InnerRule::Grid(_), None) => unreachable!("grid rule always builds a table"),
        }
    }
}

fn relabel(e: Error, op: &'static str) -> Error {
    match e {
        Error::Numeric { msg, achieved, .. } => Error::Numeric {
            module: "stable_limits",
            op,
            msg,
            achieved,
        },
        other => other,
    }
}

fn outer_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-12,
        rel: 1e-11,
        max_intervals: 500,
    }
}

/// Evaluator for `m_t[f]`, `m[f]` and `⟨Z_1 f, φ⟩` under fixed parameters.
#[derive(Debug, Clone)]
pub struct LimitEngine {
    pub mech: BranchingMechanism,
    pub ou: OuParams,
    rule: InnerRule,
    threshold: RegimeThreshold,
}

impl LimitEngine {
    pub fn new(mech: BranchingMechanism, ou: OuParams, rule: InnerRule) -> Result<Self> {
        mech.validate()?;
        ou.validate()?;
        if let InnerRule::Grid(g) = &rule {
            if g.dim() != ou.dim {
                return Err(Error::construction(
                    "stable_limits",
                    "LimitEngine::new",
                    "grid dimension differs from the OU dimension",
                ));
            }
        } else if ou.dim != 1 {
            return Err(Error::construction(
                "stable_limits",
                "LimitEngine::new",
                "adaptive inner integration is one-dimensional",
            ));
        }
        Ok(LimitEngine {
            threshold: RegimeThreshold::new(&mech, &ou),
            mech,
            ou,
            rule,
        })
    }

    pub fn with_defaults(mech: BranchingMechanism, ou: OuParams) -> Result<Self> {
        let rule = InnerRule::for_params(&ou, crate::ou_spectral::DEFAULT_NODES)?;
        Self::new(mech, ou, rule)
    }

    pub fn index(&self) -> f64 {
        self.mech.index()
    }

    fn check_dim(&self, f: &SpectralFunction, op: &'static str) -> Result<()> {
        if f.dim() != self.ou.dim {
            return Err(Error::precondition(
                "stable_limits",
                op,
                format!(
                    "function dimension {} differs from {}",
                    f.dim(),
                    self.ou.dim
                ),
            ));
        }
        Ok(())
    }

    fn gaps(&self, f: &SpectralFunction) -> (Vec<f64>, Vec<f64>) {
        f.terms()
            .map(|(p, c)| (c, self.threshold.gap(p.degree())))
            .unzip()
    }

    /// `∫ (−i T_u f)^{1+β} φ`, the inner integral of `m_t`.
    fn t_power_mean(
        &self,
        support: &Support,
        coeffs: &[f64],
        gaps: &[f64],
        u: f64,
    ) -> Result<Complex64> {
        let c: Vec<f64> = coeffs
            .iter()
            .zip(gaps)
            .map(|(c, g)| c * (-g * u).exp())
            .collect();
        support.power_mean(&c)
    }

    /// `m_t[f] = η ∫_0^t ⟨(−iT_u f)^{1+β}, φ⟩ du`.
    pub fn m_t(&self, f: &SpectralFunction, t: f64) -> Result<Complex64> {
        self.check_dim(f, "m_t")?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::precondition(
                "stable_limits",
                "m_t",
                format!("time must be finite and non-negative, got {t}"),
            ));
        }
        if f.is_zero() || t == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let support = Support::new(self, f);
        let (coeffs, gaps) = self.gaps(f);
        if gaps.iter().all(|g| *g == 0.0) {
            return Ok(support.power_mean(&coeffs)? * (self.mech.eta * t));
        }
        let failure = RefCell::new(None);
        let r = quadrature::integrate_complex(
            |u| match self.t_power_mean(&support, &coeffs, &gaps, u) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            },
            0.0,
            t,
            outer_tolerance(),
        )
        .map_err(|e| relabel(e, "m_t"));
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(r?.value * self.mech.eta)
    }

    /// Upper limit `U` beyond which `|η ∫_U^∞ ⟨(−iT_u f)^{1+β},φ⟩ du| < 1e−10`.
    ///
    /// Uses `‖T_u f‖_{L^{1+β}(φ)} ≤ ‖T_u f‖_{L²(φ)} ≤ e^{−δu}‖f‖` with `δ` the
    /// smallest gap on the support. `None` if some gap is zero.
    pub fn truncation(&self, f: &SpectralFunction) -> Option<f64> {
        let (_, gaps) = self.gaps(f);
        let delta = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(delta > 0.0) {
            return None;
        }
        let a = self.index();
        let scale = self.mech.eta * f.l2_norm().powf(a) / (delta * a);
        Some(((scale / 1e-10).ln() / (delta * a)).max(0.0))
    }

    /// `m[f]`: the limit of `m_t[f]` if `f` has no critical part, otherwise
    /// the limit of `m_t[f]/t`, which only sees the critical part.
    pub fn m_limit(&self, f: &SpectralFunction) -> Result<StableCharExponent> {
        self.check_dim(f, "m_limit")?;
        let a = self.index();
        if f.is_zero() {
            return Ok(StableCharExponent::zero(a));
        }
        let parts = classify(f, &self.mech, &self.ou);
        let value = if !parts.critical.is_zero() {
            let support = Support::new(self, &parts.critical);
            let coeffs: Vec<f64> = parts.critical.terms().map(|(_, c)| c).collect();
            support.power_mean(&coeffs)? * self.mech.eta
        } else {
            let u = self
                .truncation(f)
                .expect("non-critical support has a positive gap");
            self.m_t(f, u)?
        };
        StableCharExponent::new(value, a).map_err(|_| {
            Error::numeric(
                "stable_limits",
                "m_limit",
                format!("computed exponent {value} has positive real part"),
                value.re,
            )
        })
    }

    /// `⟨Z_1 f, φ⟩ = ∫_0^1 e^{α(1−s)} η ⟨(−iP^α_s f)^{1+β}, φ⟩ ds`.
    pub fn z1_bracket(&self, f: &SpectralFunction) -> Result<Complex64> {
        self.check_dim(f, "z1_bracket")?;
        if f.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let support = Support::new(self, f);
        let alpha = self.mech.alpha;
        let rates: Vec<(f64, f64)> = f
            .terms()
            .map(|(p, c)| (c, alpha - self.ou.b * p.degree() as f64))
            .collect();
        let failure = RefCell::new(None);
        let r = quadrature::integrate_complex(
            |s| {
                let c: Vec<f64> = rates.iter().map(|(c, r)| c * (r * s).exp()).collect();
                match support.power_mean(&c) {
                    Ok(v) => v * (alpha * (1.0 - s)).exp(),
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                }
            },
            0.0,
            1.0,
            outer_tolerance(),
        )
        .map_err(|e| relabel(e, "z1_bracket"));
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(r?.value * self.mech.eta)
    }

    /// `T_t f` under this engine's parameters.
    pub fn t_apply(&self, t: f64, f: &SpectralFunction) -> Result<SpectralFunction> {
        crate::ou_spectral::t_apply(t, f, &self.mech, &self.ou)
    }

    /// Left and right sides of `Σ_{k=0}^{n} ⟨Z_1 T_k f̃, φ⟩ = m_{n+1}[f]` with
    /// `f̃ = e^{α(β̃−1)} f`.
    pub fn z1_partial_sum(&self, f: &SpectralFunction, n: u32) -> Result<(Complex64, Complex64)> {
        let ft = f.scale((self.mech.alpha * (self.mech.beta_tilde() - 1.0)).exp());
        let mut lhs = Complex64::new(0.0, 0.0);
        for k in 0..=n {
            lhs += self.z1_bracket(&self.t_apply(k as f64, &ft)?)?;
        }
        let rhs = self.m_t(f, (n + 1) as f64)?;
        Ok((lhs, rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn engine() -> LimitEngine {
        LimitEngine::with_defaults(BranchingMechanism::canonical(), OuParams::canonical()).unwrap()
    }

    fn phi(k: u32) -> SpectralFunction {
        SpectralFunction::eigen(MultiIndex::new(vec![k]))
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn signed_power_examples() {
        assert_eq!(signed_stable_power(0.0, 0.5), Complex64::new(0.0, 0.0));
        assert!(close(
            signed_stable_power(1.0, 0.5),
            Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
            1e-15
        ));
        assert!(close(
            signed_stable_power(-2.0, 0.5),
            Complex64::new(-2.0, 2.0),
            1e-14
        ));
        // Conjugation under y ↦ −y.
        for y in [0.3, 1.7, 42.0] {
            assert_eq!(
                signed_stable_power(-y, 0.4),
                signed_stable_power(y, 0.4).conj()
            );
        }
    }

    #[test]
    fn m_t_of_constant_matches_closed_form() {
        let e = engine();
        let one = phi(0);
        let phase = Complex64::from_polar(1.0, -0.75 * PI);
        for t in [0.0f64, 0.3, 1.0, 4.0] {
            let exact = phase * (1.0 - (-1.5 * t).exp()) / 1.5;
            assert!(close(e.m_t(&one, t).unwrap(), exact, 1e-11), "t={t}");
        }
        assert_eq!(
            e.m_t(&SpectralFunction::zero(1), 3.0).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn m_t_matches_independent_values() {
        let e = engine();
        // Values from an arbitrary-precision quadrature with explicit breakpoints
        // at the roots of T_u f.
        let m = e.m_t(&(phi(1) + phi(2)), 1.0).unwrap();
        assert!(close(
            m,
            Complex64::new(-0.735_742_571_476_455_8, -0.175_510_774_646_387_5),
            1e-9
        ));
        let m = e.m_t(&phi(2), 0.5).unwrap();
        assert!(close(
            m,
            Complex64::new(-0.185_723_316_582_776_0, -0.057_287_276_854_183_58),
            1e-10
        ));
    }

    #[test]
    fn homogeneity() {
        let e = engine();
        let f = phi(1) + phi(2).scale(0.5);
        let base = e.m_t(&f, 1.5).unwrap();
        for theta in [-2.0, -1.0, 0.5, 3.0] {
            let direct = e.m_t(&f.scale(theta), 1.5).unwrap();
            let m = StableCharExponent {
                value: base,
                index: 1.5,
            };
            assert!(
                close(direct, m.at(theta), 1e-9 * (1.0 + direct.norm())),
                "θ={theta}"
            );
        }
        let two = e.m_t(&f.scale(2.0), 1.0).unwrap();
        assert!(close(two, e.m_t(&f, 1.0).unwrap() * 2f64.powf(1.5), 1e-10));
    }

    #[test]
    fn real_part_non_increasing_in_t() {
        let e = engine();
        let f = phi(0) + phi(1) - phi(2).scale(2.0);
        let mut prev = 0.0;
        for k in 1..=12 {
            let re = e.m_t(&f, 0.25 * k as f64).unwrap().re;
            assert!(re <= prev + 1e-12);
            prev = re;
        }
    }

    #[test]
    fn limit_of_constant() {
        let e = engine();
        let m = e.m_limit(&phi(0)).unwrap();
        let exact = Complex64::from_polar(1.0, -0.75 * PI) / 1.5;
        assert!(close(m.value, exact, 1e-8));
        assert!((m.value.re + 0.471_40).abs() < 1e-5 && (m.value.im + 0.471_40).abs() < 1e-5);
    }

    #[test]
    fn limit_of_critical_eigenfunction() {
        let e = engine();
        let m = e.m_limit(&phi(1)).unwrap();
        let abs_moment = 2f64.powf(0.75) * statrs::function::gamma::gamma(1.25) / PI.sqrt();
        assert!((abs_moment - 0.860_04).abs() < 1e-5);
        assert!((m.value.re - (0.75 * PI).cos() * abs_moment).abs() < 1e-10);
        assert!(m.value.im.abs() < 1e-12);
        // Mixed regimes keep only the critical part.
        let mixed = e.m_limit(&(phi(0) + phi(1) + phi(2))).unwrap();
        assert!(close(mixed.value, m.value, 1e-12));
    }

    #[test]
    fn limit_of_small_eigenfunction() {
        let m = engine().m_limit(&phi(2)).unwrap();
        assert!(close(
            m.value,
            Complex64::new(-0.351_993_069_331_738_2, -0.108_574_005_593_820_0),
            1e-9
        ));
    }

    #[test]
    fn limit_consistency_beyond_truncation() {
        let e = engine();
        for f in [phi(0), phi(2), phi(0) + phi(2).scale(-0.7)] {
            let u = e.truncation(&f).unwrap();
            let lim = e.m_limit(&f).unwrap().value;
            for extra in [1.0, 5.0] {
                assert!(close(e.m_t(&f, u + extra).unwrap(), lim, 1e-8));
            }
        }
        // Critical: m_T/T → m at rate 1/T (here exactly, since T_u φ_1 = φ_1).
        let lim = e.m_limit(&phi(1)).unwrap().value;
        for t in [1.0f64, 10.0, 100.0] {
            assert!(close(e.m_t(&phi(1), t).unwrap() / t, lim, 1e-10));
        }
        let f = phi(1) + phi(2);
        let mut prev = f64::INFINITY;
        for t in [2.0, 8.0, 32.0] {
            let err = (e.m_t(&f, t).unwrap() / t - lim).norm();
            assert!(err * t < 1.0 && err < prev);
            prev = err;
        }
    }

    #[test]
    fn zero_function() {
        let e = engine();
        assert!(e.m_limit(&SpectralFunction::zero(1)).unwrap().is_zero());
        assert_eq!(
            e.z1_bracket(&SpectralFunction::zero(1)).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn cf_properties() {
        let m = engine().m_limit(&phi(0)).unwrap();
        assert_eq!(cf_eval(&m, 0.0), Complex64::new(1.0, 0.0));
        let expect = Complex64::new(-0.471_404_520_791_031_7, -0.471_404_520_791_031_7).exp();
        assert!(close(cf_eval(&m, 1.0), expect, 1e-8));
        for th in [0.1, 0.7, 2.0, 5.0] {
            assert_eq!(cf_eval(&m, -th), cf_eval(&m, th).conj());
            assert!(cf_eval(&m, th).norm() <= 1.0);
        }
    }

    #[test]
    fn exponent_rejects_positive_real_part() {
        assert!(StableCharExponent::new(Complex64::new(0.1, 0.0), 1.5).is_err());
        assert!(StableCharExponent::new(Complex64::new(-0.1, 0.0), 2.5).is_err());
    }

    #[test]
    fn z1_single_term_identity() {
        let e = engine();
        for f in [phi(1), phi(2), phi(1) + phi(2)] {
            let (lhs, rhs) = e.z1_partial_sum(&f, 0).unwrap();
            assert!(close(lhs, rhs, 1e-9), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn z1_partial_sums() {
        let e = engine();
        let f = phi(1) + phi(2);
        for n in 1..=3 {
            let (lhs, rhs) = e.z1_partial_sum(&f, n).unwrap();
            assert!(close(lhs, rhs, 1e-9), "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn grid_rule_in_two_dimensions() {
        let ou = OuParams::new(std::f64::consts::SQRT_2, 1.0, 2).unwrap();
        let e = LimitEngine::with_defaults(BranchingMechanism::canonical(), ou).unwrap();
        // A constant needs no spatial resolution.
        let one = SpectralFunction::constant(2, 1.0);
        let exact = Complex64::from_polar(1.0, -0.75 * PI) / 1.5;
        assert!(close(e.m_limit(&one).unwrap().value, exact, 1e-8));
    }
}
