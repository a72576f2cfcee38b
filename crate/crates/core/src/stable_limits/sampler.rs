use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::StableCharExponent;
use crate::error::{Error, Result};

/// Chambers–Mallows–Stuck sampler for the law with characteristic function
/// `θ ↦ e^{m[θf]}`.
///
/// With `a = 1+β` the exponent is matched to
/// `−|θ|^a σ^a (1 − i β_sk sgn(θ) tan(πa/2))`, giving `σ^a = −Re m` and
/// `β_sk = Im m / (σ^a tan(πa/2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSampler {
    index: f64,
    scale: f64,
    skew: f64,
    shift_b: f64,
    stretch: f64,
}

impl StableSampler {
    pub fn new(m: &StableCharExponent) -> Result<Self> {
        let a = m.index;
        let sa = -m.value.re;
        if !(sa > 0.0) {
            return Err(Error::domain(
                "stable_limits",
                "stable_sample",
                format!("exponent {} has no spread", m.value),
            ));
        }
        let tan = (FRAC_PI_2 * a).tan();
        let skew = m.value.im / (sa * tan);
        if skew.abs() > 1.0 + 1e-9 {
            return Err(Error::numeric(
                "stable_limits",
                "stable_sample",
                format!(
                    "exponent {} maps to skewness {skew} outside [−1, 1]",
                    m.value
                ),
                skew,
            ));
        }
        let skew = skew.clamp(-1.0, 1.0);
        let bt = skew * tan;
        Ok(StableSampler {
            index: a,
            scale: sa.powf(1.0 / a),
            skew,
            shift_b: bt.atan() / a,
            stretch: (1.0 + bt * bt).powf(0.5 / a),
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn skewness(&self) -> f64 {
        self.skew
    }
}

impl Distribution<f64> for StableSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.index;
        let v = (rng.random::<f64>() - 0.5) * std::f64::consts::PI;
        let w: f64 = rng.sample(Exp1);
        let arg = a * (v + self.shift_b);
        let x = self.stretch * arg.sin() / v.cos().powf(1.0 / a)
            * ((v - arg).cos() / w).powf((1.0 - a) / a);
        self.scale * x
    }
}

/// Hill estimate of the upper-tail index from the `k` largest values.
pub fn hill_estimator(sample: &[f64], k: usize) -> Result<f64> {
    let mut pos: Vec<f64> = sample.iter().copied().filter(|v| *v > 0.0).collect();
    if k == 0 || pos.len() <= k {
        return Err(Error::precondition(
            "stable_limits",
            "hill_estimator",
            format!("need more than k = {k} positive values, got {}", pos.len()),
        ));
    }
    pos.sort_by(|a, b| b.total_cmp(a));
    let threshold = pos[k].ln();
    let mean: f64 = pos[..k].iter().map(|v| v.ln() - threshold).sum::<f64>() / k as f64;
    Ok(1.0 / mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable_limits::cf_eval;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ecf_sup(draws: &[f64], m: &StableCharExponent) -> f64 {
        (0..=40)
            .map(|i| -5.0 + 0.25 * i as f64)
            .map(|th| {
                let e: Complex64 = draws
                    .iter()
                    .map(|x| Complex64::from_polar(1.0, th * x))
                    .sum::<Complex64>()
                    / draws.len() as f64;
                (e - cf_eval(m, th)).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn skewed_law_matches_cf() {
        let m = StableCharExponent::new(Complex64::new(-0.471_404_5, -0.471_404_5), 1.5).unwrap();
        let s = StableSampler::new(&m).unwrap();
        assert!((s.skewness() - 1.0).abs() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws: Vec<f64> = (0..200_000).map(|_| s.sample(&mut rng)).collect();
        assert!(ecf_sup(&draws, &m) < 0.01);
    }

    #[test]
    fn opposite_skew_and_mixed_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for v in [Complex64::new(-0.3, 0.2), Complex64::new(-1.0, -0.1)] {
            let m = StableCharExponent::new(v, 1.5).unwrap();
            let s = StableSampler::new(&m).unwrap();
            let draws: Vec<f64> = (0..200_000).map(|_| s.sample(&mut rng)).collect();
            assert!(ecf_sup(&draws, &m) < 0.01, "{v}");
        }
    }

    #[test]
    fn symmetric_law_has_zero_median() {
        let m = StableCharExponent::new(Complex64::new(-0.608_14, 0.0), 1.5).unwrap();
        let s = StableSampler::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_001;
        let mut draws: Vec<f64> = (0..n).map(|_| s.sample(&mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        let median = draws[n / 2];
        // Asymptotic SE of the median: 1/(2 f(0) √N), with the stable density
        // at zero f(0) = Γ(1 + 1/a)/(π σ).
        let f0 =
            statrs::function::gamma::gamma(1.0 + 1.0 / 1.5) / (std::f64::consts::PI * s.scale());
        let se = 1.0 / (2.0 * f0 * (n as f64).sqrt());
        assert!(median.abs() < 3.0 * se, "{median} vs {se}");
    }

    #[test]
    fn tail_index() {
        let m = StableCharExponent::new(Complex64::new(-0.608_14, 0.0), 1.5).unwrap();
        let s = StableSampler::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws: Vec<f64> = (0..1_000_000).map(|_| s.sample(&mut rng)).collect();
        let h = hill_estimator(&draws, 2000).unwrap();
        assert!((h - 1.5).abs() < 0.1, "hill {h}");
    }

    #[test]
    fn degenerate_and_inconsistent_exponents() {
        assert!(StableSampler::new(&StableCharExponent::zero(1.5)).is_err());
        // Skewness 3: |Im m| too large relative to Re m.
        let m = StableCharExponent::new(Complex64::new(-0.1, 0.3), 1.5).unwrap();
        assert!(matches!(StableSampler::new(&m), Err(Error::Numeric { .. })));
    }

    #[test]
    fn hill_on_pareto() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<f64> = (0..200_000)
            .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / 1.5))
            .collect();
        let h = hill_estimator(&draws, 5000).unwrap();
        assert!((h - 1.5).abs() < 0.06);
        assert!(hill_estimator(&draws[..10], 10).is_err());
    }
}
