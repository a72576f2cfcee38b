use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::function::BasisEvaluator;
use super::{MultiIndex, OuParams, SpectralFunction};
use crate::error::{Error, Result};
use crate::quadrature::{radical_inverse, PRIMES};

pub const DEFAULT_NODES: usize = 64;
const MAX_TENSOR_DIM: usize = 3;

/// Gauss–Hermite nodes and weights for the weight `e^{−x²}` (physicists'
/// convention). Weights sum to `√π`.
pub fn gauss_hermite_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Orthonormal recursion keeps everything O(1) for large n.
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridKind {
    /// Tensor Gauss–Hermite with `nodes` points per axis.
    Tensor { nodes: usize },
    /// Halton points pushed through the Gaussian quantile; equal weights.
    /// Used when the dimension is too large for a tensor grid.
    QuasiMonteCarlo { points: usize },
}

/// Nodes in `R^d` with positive weights summing to one, integrating against
/// the invariant law `φ`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    kind: GridKind,
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Tensor grid for `d ≤ 3`, quasi–Monte Carlo with `nodes^3` points
    /// otherwise.
    pub fn for_params(ou: &OuParams, nodes_per_axis: usize) -> Result<Self> {
        if ou.dim <= MAX_TENSOR_DIM {
            Self::gauss_hermite(ou, nodes_per_axis)
        } else {
            Self::quasi_monte_carlo(ou, nodes_per_axis.pow(3))
        }
    }

    pub fn gauss_hermite(ou: &OuParams, nodes_per_axis: usize) -> Result<Self> {
        if nodes_per_axis == 0 {
            return Err(Error::construction(
                "ou_spectral",
                "QuadratureGrid::gauss_hermite",
                "need at least one node per axis",
            ));
        }
        if ou.dim > MAX_TENSOR_DIM {
            return Err(Error::construction(
                "ou_spectral",
                "QuadratureGrid::gauss_hermite",
                format!(
                    "tensor grids are limited to d <= {MAX_TENSOR_DIM}, got {}",
                    ou.dim
                ),
            ));
        }
        let (x, w) = gauss_hermite_unit(nodes_per_axis);
        let scale = ou.stationary_scale() * std::f64::consts::SQRT_2;
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let axis_nodes: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let axis_weights: Vec<f64> = w.iter().map(|v| v * inv_sqrt_pi).collect();
        let total = nodes_per_axis.pow(ou.dim as u32);
        let mut nodes = Vec::with_capacity(total * ou.dim);
        let mut weights = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut wt = 1.0;
            for _ in 0..ou.dim {
                let k = rem % nodes_per_axis;
                rem /= nodes_per_axis;
                nodes.push(axis_nodes[k]);
                wt *= axis_weights[k];
            }
            weights.push(wt);
        }
        Ok(QuadratureGrid {
            kind: GridKind::Tensor {
                nodes: nodes_per_axis,
            },
            dim: ou.dim,
            nodes,
            weights,
        })
    }

    pub fn quasi_monte_carlo(ou: &OuParams, points: usize) -> Result<Self> {
        if ou.dim > PRIMES.len() {
            return Err(Error::construction(
                "ou_spectral",
                "QuadratureGrid::quasi_monte_carlo",
                format!("at most {} dimensions supported", PRIMES.len()),
            ));
        }
        if points < 2 {
            return Err(Error::construction(
                "ou_spectral",
                "QuadratureGrid::quasi_monte_carlo",
                "need at least two points",
            ));
        }
        let normal = Normal::new(0.0, ou.stationary_scale()).expect("positive scale");
        let mut nodes = Vec::with_capacity(points * ou.dim);
        for i in 0..points {
            for &base in &PRIMES[..ou.dim] {
                nodes.push(normal.inverse_cdf(radical_inverse(i as u64 + 1, base)));
            }
        }
        Ok(QuadratureGrid {
            kind: GridKind::QuasiMonteCarlo { points },
            dim: ou.dim,
            nodes,
            weights: vec![1.0 / points as f64; points],
        })
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn integrate_complex(&self, values: &[Complex64]) -> Complex64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Error estimate for an equal-weight grid: half the discrepancy between
    /// the two halves of the point set. Tensor Gauss rules report `None`.
    pub fn error_estimate(&self, values: &[f64]) -> Option<f64> {
        match self.kind {
            GridKind::Tensor { .. } => None,
            GridKind::QuasiMonteCarlo { points } => {
                let h = points / 2;
                let a: f64 = values[..h].iter().sum::<f64>() / h as f64;
                let b: f64 = values[h..].iter().sum::<f64>() / (points - h) as f64;
                Some(0.5 * (a - b).abs())
            }
        }
    }

    /// Matrix of `φ_p(node)`, one row per index.
    pub fn basis_table(&self, indices: &[MultiIndex], ou: &OuParams) -> Vec<Vec<f64>> {
        let mut ev = BasisEvaluator::new(indices.to_vec(), ou);
        let mut rows = vec![vec![0.0; self.len()]; indices.len()];
        let mut buf = vec![0.0; indices.len()];
        for (j, x) in self.nodes().enumerate() {
            ev.eval_into(x, &mut buf);
            for (row, v) in rows.iter_mut().zip(&buf) {
                row[j] = *v;
            }
        }
        rows
    }

    pub fn eval_function(&self, f: &SpectralFunction, ou: &OuParams) -> Vec<f64> {
        self.nodes().map(|x| f.eval(x, ou)).collect()
    }

    /// `⟨f, g⟩_φ`.
    pub fn inner(&self, f: &SpectralFunction, g: &SpectralFunction, ou: &OuParams) -> f64 {
        self.nodes()
            .zip(&self.weights)
            .map(|(x, w)| w * f.eval(x, ou) * g.eval(x, ou))
            .sum()
    }
}
