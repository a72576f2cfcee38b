//! The stable branching mechanism `ψ(z) = −αz + ρz² + ηz^{1+β}` and the
//! offspring law of the particle system that approximates the superprocess.
//!
//! The Lévy measure is exactly `η dy / (Γ(−1−β) y^{2+β})`, for which the
//! compensated jump integral collapses to `ηz^{1+β}`.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchingMechanism {
    pub alpha: f64,
    pub rho: f64,
    pub eta: f64,
    pub beta: f64,
}

impl BranchingMechanism {
    pub fn new(alpha: f64, rho: f64, eta: f64, beta: f64) -> Result<Self> {
        let m = BranchingMechanism {
            alpha,
            rho,
            eta,
            beta,
        };
        m.validate()?;
        Ok(m)
    }

    /// `α = 3, ρ = 0, η = 1, β = 1/2`: `αβ̃ = 1` and `v̄ = 9`.
    pub fn canonical() -> Self {
        BranchingMechanism {
            alpha: 3.0,
            rho: 0.0,
            eta: 1.0,
            beta: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| {
            Err(Error::construction(
                "branching",
                "BranchingMechanism::new",
                msg,
            ))
        };
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be non-negative, got {}", self.rho));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        Ok(())
    }

    /// `β̃ = β/(1+β)`.
    pub fn beta_tilde(&self) -> f64 {
        self.beta / (1.0 + self.beta)
    }

    pub fn alpha_beta_tilde(&self) -> f64 {
        self.alpha * self.beta_tilde()
    }

    /// Stability index `1+β` of the limit laws.
    pub fn index(&self) -> f64 {
        1.0 + self.beta
    }

    #[inline]
    fn psi_raw(&self, z: f64) -> f64 {
        -self.alpha * z + self.rho * z * z + self.eta * z.powf(1.0 + self.beta)
    }

    pub fn psi(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(Error::domain(
                "branching",
                "psi_eval",
                format!("z must be non-negative, got {z}"),
            ));
        }
        Ok(self.psi_raw(z))
    }

    /// Largest root `v̄` of `ψ`. Closed form for `ρ = 0`; otherwise bisection
    /// on the increasing function `ψ(z)/z`.
    pub fn extinction_root(&self) -> f64 {
        if self.rho == 0.0 {
            return (self.alpha / self.eta).powf(1.0 / self.beta);
        }
        let g = |z: f64| -self.alpha + self.rho * z + self.eta * z.powf(self.beta);
        let mut lo = 0.0;
        let mut hi = 1.0;
        while g(hi) <= 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `P_μ(D) = e^{−‖μ‖ v̄}`.
    pub fn extinction_prob(&self, total_mass: f64) -> f64 {
        (-total_mass * self.extinction_root()).exp()
    }

    /// Grey's integral `∫_{z'}^∞ dz/ψ(z)`.
    ///
    /// The substitution `z = z'·v^{−1/β}` maps the tail onto `(0, 1]` with a
    /// bounded integrand whenever `η > 0`.
    pub fn grey_integral(&self, z_prime: f64) -> Result<f64> {
        let root = self.extinction_root();
        if !(z_prime > root) {
            return Err(Error::precondition(
                "branching",
                "grey_check",
                format!("psi is not positive on ({z_prime}, inf): the largest root is {root}"),
            ));
        }
        let q = 1.0 / self.beta;
        let integrand = |v: f64| {
            if v <= 0.0 {
                // limit of q z' v^{-q-1} / ψ(z' v^{-q}) as v → 0
                return if self.rho > 0.0 {
                    0.0
                } else {
                    q * z_prime.powf(-self.beta) / self.eta
                };
            }
            let z = z_prime * v.powf(-q);
            q * z_prime * v.powf(-q - 1.0) / self.psi_raw(z)
        };
        let r = quadrature::integrate(
            integrand,
            0.0,
            1.0,
            Tolerance {
                abs: 1e-13,
                rel: 1e-12,
                max_intervals: 4000,
            },
        )
        .map_err(|e| match e {
            Error::Numeric { achieved, .. } => Error::Divergence {
                module: "branching",
                op: "grey_check",
                msg: format!("adaptive integration did not settle (error {achieved:e})"),
            },
            other => other,
        })?;
        if !r.value.is_finite() {
            return Err(Error::Divergence {
                module: "branching",
                op: "grey_check",
                msg: "non-finite integral".into(),
            });
        }
        Ok(r.value)
    }

    /// CSBP Laplace exponent `v_t(λ)`: `E_μ[e^{−λ‖X_t‖}] = e^{−‖μ‖ v_t(λ)}`,
    /// solving `dv/dt = −ψ(v)`, `v_0 = λ`.
    pub fn csbp_laplace(&self, t: f64, lambda: f64) -> Result<f64> {
        if !(t >= 0.0) || !(lambda > 0.0) {
            return Err(Error::precondition(
                "branching",
                "csbp_laplace",
                format!("need t >= 0 and lambda > 0, got t={t}, lambda={lambda}"),
            ));
        }
        if self.rho == 0.0 {
            let (a, b, e) = (self.alpha, self.beta, self.eta);
            // v^{-β} = e^{-αβt} λ^{-β} + (η/α)(1 − e^{-αβt})
            let decay = (-a * b * t).exp();
            let w = decay * lambda.powf(-b) - (e / a) * (-a * b * t).exp_m1();
            return Ok(w.powf(-1.0 / b));
        }
        Ok(self.integrate_laplace_ode(t, lambda))
    }

    fn integrate_laplace_ode(&self, t: f64, lambda: f64) -> f64 {
        let f = |v: f64| -self.psi_raw(v.max(0.0));
        let rk4 = |steps: usize| {
            let h = t / steps as f64;
            let mut v = lambda;
            for _ in 0..steps {
                let k1 = f(v);
                let k2 = f(v + 0.5 * h * k1);
                let k3 = f(v + 0.5 * h * k2);
                let k4 = f(v + h * k3);
                v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            v
        };
        let mut steps = 64;
        let mut prev = rk4(steps);
        loop {
            steps *= 2;
            let next = rk4(steps);
            if (next - prev).abs() <= 1e-13 * next.abs().max(1.0) || steps >= 1 << 22 {
                return next;
            }
            prev = next;
        }
    }
}

/// `|C(a, k)|` for `a = 1+β`, `k ≥ 0`.
pub fn abs_binomial(a: f64, k: usize) -> f64 {
    if k > 2 * TABLE_LEN && a.fract() != 0.0 {
        // |C(a,k)| = Γ(k−a) / (Γ(k+1)|Γ(−a)|) for non-integer a and k > a
        let kf = k as f64;
        return (ln_gamma(kf - a) - ln_gamma(kf + 1.0) - gamma(-a).abs().ln()).exp();
    }
    let mut c = 1.0f64;
    for j in 0..k {
        c *= (a - j as f64) / (j as f64 + 1.0);
    }
    c.abs()
}

/// Entries below this index are tabulated; larger offspring counts are drawn
/// from the exact Beta–geometric mixture.
const TABLE_LEN: usize = 64;

/// Offspring law of the particle system with particle mass `1/n`, with
/// generating function `g_n(s) = s + ψ(n(1−s))/(nγ_n)`.
///
/// For `k ≥ 2` the weights are proportional to `|C(1+β, k)|`, and
/// `Γ(k−a)/Γ(k+1)` is a Beta integral. Conditional on `k ≥ K` the law is
/// therefore a mixture: `U ~ Beta(K−a, a)` followed by `k − K ~ Geometric`
/// with success probability `1 − U`, which gives exact sampling of the
/// heavy tail.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    pub n: u64,
    pub rate: f64,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    tail_mass: f64,
    tail_beta: Beta<f64>,
}

impl OffspringLaw {
    pub fn new(n: u64, mech: &BranchingMechanism) -> Result<Self> {
        let nf = n as f64;
        let root = mech.extinction_root();
        if !(nf > root) {
            return Err(Error::construction(
                "branching",
                "offspring_law",
                format!("need n > v_bar = {root} so that p_0 >= 0, got n = {n}"),
            ));
        }
        let a = mech.index();
        let rate = 2.0 * mech.rho * nf + a * mech.eta * nf.powf(mech.beta);
        let p1 = mech.alpha / rate;
        if p1 > 1.0 {
            return Err(Error::construction(
                "branching",
                "offspring_law",
                format!("p_1 = alpha/gamma_n = {p1} exceeds 1; increase n"),
            ));
        }
        let norm = nf * rate;
        let stable = mech.eta * nf.powf(a);
        let p0 = mech.psi_raw(nf) / norm;
        let p2 = (mech.rho * nf * nf + stable * abs_binomial(a, 2)) / norm;
        let mut probs = vec![p0, p1, p2];
        let mut c = abs_binomial(a, 2);
        for k in 2..TABLE_LEN - 1 {
            c *= (k as f64 - a) / (k as f64 + 1.0);
            probs.push(stable * c / norm);
        }
        // Σ_{k≥2} |C(a,k)| = a − 1 = β, so the mass beyond the table is exact.
        let tabulated: f64 = (2..TABLE_LEN).map(|k| abs_binomial(a, k)).sum();
        let tail_mass = stable * (mech.beta - tabulated).max(0.0) / norm;
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        let tail_beta = Beta::new(TABLE_LEN as f64 - a, a).map_err(|e| {
            Error::construction("branching", "offspring_law", format!("tail sampler: {e}"))
        })?;
        Ok(OffspringLaw {
            n,
            rate,
            probs,
            cumulative,
            tail_mass,
            tail_beta,
        })
    }

    /// `p_0, …, p_{K−1}`.
    pub fn table(&self) -> &[f64] {
        &self.probs
    }

    /// Total probability of `k ≥ K`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn prob(&self, k: usize, mech: &BranchingMechanism) -> f64 {
        if k < self.probs.len() {
            self.probs[k]
        } else {
            let nf = self.n as f64;
            mech.eta * nf.powf(mech.index()) * abs_binomial(mech.index(), k) / (nf * self.rate)
        }
    }

    pub fn total_probability(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.tail_mass
    }

    /// `1 + α/γ_n`.
    pub fn mean(&self, mech: &BranchingMechanism) -> f64 {
        1.0 + mech.alpha / self.rate
    }

    pub fn pgf(&self, s: f64, mech: &BranchingMechanism) -> f64 {
        let nf = self.n as f64;
        s + mech.psi_raw(nf * (1.0 - s)) / (nf * self.rate)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        for (k, c) in self.cumulative.iter().enumerate() {
            if u < *c {
                return k;
            }
        }
        if self.tail_mass == 0.0 {
            return self.probs.len() - 1;
        }
        self.sample_tail(rng)
    }

    fn sample_tail<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let base = TABLE_LEN;
        let w = self.tail_beta.sample(rng);
        let v: f64 = 1.0 - rng.random::<f64>();
        let extra = (v.ln() / w.ln()).floor();
        if !(extra.is_finite()) || extra > 1e15 {
            return usize::MAX / 2;
        }
        base + extra as usize
    }
}
