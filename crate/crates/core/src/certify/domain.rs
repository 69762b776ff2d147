use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::form::{sdm_dimension, MinTriple, PeriodicForm, SdmVector};
use crate::linalg::{null_space, numerical_rank, singular_values, RANK_TOLERANCE};
use crate::minima::MinimumResult;

/// Gradient of `p_{i,j,v}` at `X`: `(w w^t, ..., 2Qw, ..., -2Qw, ...)`
/// with `2Qw` in column `i` and `-2Qw` in column `j`. The origin coset has
/// no column, and for `i == j` the translational part vanishes.
///
/// Works for any ordered triple; `w` is recomputed from `X`.
pub fn gradient_at(x: &PeriodicForm, i: usize, j: usize, v: &[i64]) -> Result<SdmVector> {
    let (d, m) = (x.dim(), x.m());
    if i >= m || j >= m {
        return Err(Error::InvalidTriple(format!("coset index out of range 0..{m}")));
    }
    if v.len() != d {
        return Err(Error::InvalidTriple(format!("v has length {}, expected {d}", v.len())));
    }
    if i == j && v.iter().all(|&c| c == 0) {
        return Err(Error::InvalidTriple("v = 0 with i = j".into()));
    }
    let w = x.difference(i, j, v);
    let sym = DMatrix::from_fn(d, d, |r, c| w[r] * w[c]);
    let mut trans = DMatrix::zeros(d, m - 1);
    if i != j {
        let qw = x.q().apply(&w);
        if i + 1 < m {
            for r in 0..d {
                trans[(r, i)] = 2.0 * qw[r];
            }
        }
        if j + 1 < m {
            for r in 0..d {
                trans[(r, j)] = -2.0 * qw[r];
            }
        }
    }
    SdmVector::new(sym, trans)
}

pub fn gradient(x: &PeriodicForm, t: &MinTriple) -> Result<SdmVector> {
    gradient_at(x, t.i, t.j, &t.v)
}

fn is_positive(v: &[i64]) -> bool {
    v.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

/// Generators of the generalized Voronoi domain
/// `V(X) = cone{grad p_{i,j,v}(X) : t_i - t_j - v in Min X}`.
///
/// One generator per stored triple with `i < j`; for `i == j` the pair
/// `v, -v` has a single gradient and is merged into one generator.
#[derive(Debug, Clone)]
pub struct VoronoiDomain {
    dim: usize,
    m: usize,
    generators: Vec<SdmVector>,
    triples: Vec<MinTriple>,
}

impl VoronoiDomain {
    #[cfg(test)]
    pub(crate) fn from_generators(dim: usize, m: usize, generators: Vec<SdmVector>) -> Self {
        let triples = generators
            .iter()
            .map(|_| MinTriple { i: 0, j: 0, v: vec![0; dim], w: vec![0.0; dim], value: 0.0 })
            .collect();
        Self { dim, m, generators, triples }
    }

    /// The same cone with generators listed in `order`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidConfig("order is not a permutation of the generators".into()));
        }
        Ok(Self {
            dim: self.dim,
            m: self.m,
            generators: order.iter().map(|&k| self.generators[k].clone()).collect(),
            triples: order.iter().map(|&k| self.triples[k].clone()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn generators(&self) -> &[SdmVector] {
        &self.generators
    }

    /// The triple behind generator `k` (for merged pairs, the one with
    /// positive `v`).
    pub fn triple(&self, k: usize) -> &MinTriple {
        &self.triples[k]
    }

    pub fn triples(&self) -> &[MinTriple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// `binom(d+1, 2) + (m-1) d`.
    pub fn ambient_dimension(&self) -> usize {
        sdm_dimension(self.dim, self.m)
    }

    /// Flattened generators as columns (isometric coordinates).
    pub fn matrix(&self) -> DMatrix<f64> {
        let rows = self.ambient_dimension();
        let mut a = DMatrix::zeros(rows, self.generators.len());
        for (k, g) in self.generators.iter().enumerate() {
            a.column_mut(k).copy_from(&g.flatten());
        }
        a
    }
}

pub fn voronoi_domain(x: &PeriodicForm, min: &MinimumResult) -> Result<VoronoiDomain> {
    let mut generators = Vec::new();
    let mut triples = Vec::new();
    for t in &min.triples {
        if t.i == t.j && !is_positive(&t.v) {
            continue;
        }
        generators.push(gradient(x, t)?);
        triples.push(t.clone());
    }
    Ok(VoronoiDomain { dim: x.dim(), m: x.m(), generators, triples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perfection {
    pub perfect: bool,
    pub rank: usize,
    pub required: usize,
    pub singular_values: Vec<f64>,
}

/// `X` is m-perfect when `V(X)` is full dimensional in `S^{d,m}`.
pub fn is_m_perfect(domain: &VoronoiDomain) -> Perfection {
    let required = domain.ambient_dimension();
    let values = singular_values(&domain.matrix());
    let rank = numerical_rank(&values, RANK_TOLERANCE);
    Perfection { perfect: rank == required, rank, required, singular_values: values }
}

/// Rank of the `S^d` components of the generators alone.
pub fn sym_block_rank(domain: &VoronoiDomain) -> usize {
    let d = domain.dim;
    let rows = d * (d + 1) / 2;
    let full = domain.matrix();
    numerical_rank(&singular_values(&full.rows(0, rows).into_owned()), RANK_TOLERANCE)
}

/// An orthonormal basis of `V(X)^perp` in `S^{d,m}`.
pub fn orthogonal_complement(domain: &VoronoiDomain) -> Vec<SdmVector> {
    let a = domain.matrix().transpose();
    let (basis, _) = null_space(&a, RANK_TOLERANCE);
    basis
        .into_iter()
        .map(|b| SdmVector::from_flat(domain.dim, domain.m, b.as_slice()).expect("flat length matches"))
        .collect()
}
