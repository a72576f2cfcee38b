use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::{hermite_normalized, OuParams};

/// A multi-index `p ∈ Z_+^d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        assert!(!entries.is_empty(), "multi-index needs at least one axis");
        MultiIndex(entries)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// Index along axis 0 in `dim` dimensions.
    pub fn axis(dim: usize, degree: u32) -> Self {
        let mut v = vec![0; dim];
        v[0] = degree;
        MultiIndex(v)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|p| = Σ p_k`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// All multi-indices with `|p| ≤ max_degree`, ordered by degree and then
    /// lexicographically. This ordering is the column order of stored
    /// checkpoint functionals.
    pub fn all_up_to(dim: usize, max_degree: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for deg in 0..=max_degree {
            let mut cur = vec![0u32; dim];
            fill(&mut out, &mut cur, 0, deg);
        }
        out
    }
}

fn fill(out: &mut Vec<MultiIndex>, cur: &mut Vec<u32>, axis: usize, remaining: u32) {
    if axis + 1 == cur.len() {
        cur[axis] = remaining;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for k in (0..=remaining).rev() {
        cur[axis] = k;
        fill(out, cur, axis + 1, remaining - k);
    }
    cur[axis] = 0;
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|k| k.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// A finite Hermite expansion `f = Σ c_p φ_p`.
///
/// Zero coefficients are never stored, so two functions are equal exactly
/// when their supports and coefficients agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFunction {
    dim: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl SpectralFunction {
    pub fn zero(dim: usize) -> Self {
        SpectralFunction {
            dim,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_terms(dim, [(MultiIndex::zero(dim), c)])
    }

    pub fn eigen(p: MultiIndex) -> Self {
        let dim = p.dim();
        Self::from_terms(dim, [(p, 1.0)])
    }

    /// Repeated indices are summed.
    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (MultiIndex, f64)>) -> Self {
        let mut f = SpectralFunction::zero(dim);
        for (p, c) in terms {
            assert_eq!(
                p.dim(),
                dim,
                "multi-index {p} does not match dimension {dim}"
            );
            f.add_term(p, c);
        }
        f
    }

    fn add_term(&mut self, p: MultiIndex, c: f64) {
        match self.coeffs.entry(p) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0.0 {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                if c != 0.0 {
                    e.insert(c);
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeff(&self, p: &MultiIndex) -> f64 {
        self.coeffs.get(p).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.coeffs.iter().map(|(p, c)| (p, *c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_degree(&self) -> u32 {
        self.coeffs
            .keys()
            .map(MultiIndex::degree)
            .max()
            .unwrap_or(0)
    }

    /// `‖f‖` in `L²(φ)`, which by orthonormality is the Euclidean norm of the
    /// coefficients.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn map_coeffs(&self, mut g: impl FnMut(&MultiIndex, f64) -> f64) -> Self {
        Self::from_terms(
            self.dim,
            self.coeffs.iter().map(|(p, c)| (p.clone(), g(p, *c))),
        )
    }

    pub fn filter(&self, mut keep: impl FnMut(&MultiIndex) -> bool) -> Self {
        SpectralFunction {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(p, _)| keep(p))
                .map(|(p, c)| (p.clone(), *c))
                .collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map_coeffs(|_, c| c * k)
    }

    pub fn eval(&self, x: &[f64], ou: &OuParams) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let s = ou.stationary_scale();
        let max = self.max_degree() as usize;
        let tables: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| {
                let mut buf = Vec::with_capacity(max + 1);
                hermite_normalized(xi / s, max, &mut buf);
                buf
            })
            .collect();
        self.coeffs
            .iter()
            .map(|(p, c)| {
                c * p
                    .entries()
                    .iter()
                    .zip(&tables)
                    .map(|(&k, t)| t[k as usize])
                    .product::<f64>()
            })
            .sum()
    }
}

impl Add for SpectralFunction {
    type Output = SpectralFunction;
    fn add(self, rhs: SpectralFunction) -> SpectralFunction {
        assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        for (p, c) in rhs.coeffs {
            out.add_term(p, c);
        }
        out
    }
}

impl Neg for SpectralFunction {
    type Output = SpectralFunction;
    fn neg(self) -> SpectralFunction {
        self.scale(-1.0)
    }
}

impl Sub for SpectralFunction {
    type Output = SpectralFunction;
    fn sub(self, rhs: SpectralFunction) -> SpectralFunction {
        self + (-rhs)
    }
}

/// Evaluates a fixed list of eigenfunctions at many points, reusing one
/// Hermite table per axis.
#[derive(Debug, Clone)]
pub struct BasisEvaluator {
    indices: Vec<MultiIndex>,
    max_degree: usize,
    inv_scale: f64,
    tables: Vec<Vec<f64>>,
}

impl BasisEvaluator {
    pub fn new(indices: Vec<MultiIndex>, ou: &OuParams) -> Self {
        let max_degree = indices.iter().map(|p| p.degree()).max().unwrap_or(0) as usize;
        BasisEvaluator {
            indices,
            max_degree,
            inv_scale: 1.0 / ou.stationary_scale(),
            tables: vec![Vec::with_capacity(max_degree + 1); ou.dim],
        }
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Writes `φ_p(x)` for every stored index into `out`.
    pub fn eval_into(&mut self, x: &[f64], out: &mut [f64]) {
        for (table, &xi) in self.tables.iter_mut().zip(x) {
            hermite_normalized(xi * self.inv_scale, self.max_degree, table);
        }
        for (slot, p) in out.iter_mut().zip(&self.indices) {
            *slot = p
                .entries()
                .iter()
                .zip(&self.tables)
                .map(|(&k, t)| t[k as usize])
                .product();
        }
    }
}
