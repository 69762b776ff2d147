//! Positive definite quadratic forms, periodic forms and the ambient space
//! `S^d x R^{d x (m-1)}` they live in.
//!
//! A periodic form `X = (Q, t)` encodes the periodic point set
//! `A (t_1 + Z^d) ∪ ... ∪ A (t_m + Z^d)` up to isometry, where `Q = A^t A`.
//! Cosets are indexed `0..m` and the last one is the implicit origin coset
//! (`t_{m-1} = 0`), so only `m - 1` translates are stored.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for accepting a nearly symmetric Gram matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Cholesky pivots must exceed this multiple of the largest diagonal entry.
pub const PIVOT_TOLERANCE: f64 = 1e-10;
/// Two translates closer than this (componentwise, modulo Z^d) are one coset.
pub const COSET_TOLERANCE: f64 = 1e-12;

/// A positive definite quadratic form, stored as its Gram matrix together
/// with the upper Cholesky factor `R` (`Q = R^t R`).
#[derive(Debug, Clone, PartialEq)]
pub struct Pqf {
    gram: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl Pqf {
    /// Validates a Gram matrix: square, symmetric within
    /// [`SYMMETRY_TOLERANCE`] (then symmetrized exactly from the upper
    /// triangle) and positive definite.
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = gram.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if gram.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = gram.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let mut sym = gram.clone();
        for r in 0..rows {
            for c in (r + 1)..rows {
                let deviation = (gram[(r, c)] - gram[(c, r)]).abs();
                if deviation > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::NotSymmetric { row: r, col: c, deviation });
                }
                sym[(c, r)] = gram[(r, c)];
            }
        }
        let chol = cholesky_upper(&sym)?;
        Ok(Self { gram: sym, chol })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        for row in rows {
            if row.len() != d {
                return Err(Error::NotSquare { rows: d, cols: row.len() });
            }
        }
        Self::new(DMatrix::from_fn(d, d, |r, c| rows[r][c]))
    }

    /// Builds a form from its row-major upper triangle
    /// `q11, q12, ..., q1d, q22, ..., qdd`.
    pub fn from_upper_triangle(dim: usize, entries: &[f64]) -> Result<Self> {
        let expected = dim * (dim + 1) / 2;
        if entries.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: entries.len() });
        }
        let mut gram = DMatrix::zeros(dim, dim);
        let mut k = 0;
        for r in 0..dim {
            for c in r..dim {
                gram[(r, c)] = entries[k];
                gram[(c, r)] = entries[k];
                k += 1;
            }
        }
        Self::new(gram)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn upper_triangle(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * (d + 1) / 2);
        for r in 0..d {
            for c in r..d {
                out.push(self.gram[(r, c)]);
            }
        }
        out
    }

    /// `Q[x] = x^t Q x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let mut total = 0.0;
        for r in 0..d {
            let mut row = 0.0;
            for c in 0..d {
                row += self.gram[(r, c)] * x[c];
            }
            total += x[r] * row;
        }
        total
    }

    pub fn eval_int(&self, v: &[i64]) -> f64 {
        let x: Vec<f64> = v.iter().map(|&c| c as f64).collect();
        self.eval(&x)
    }

    /// `Q x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|r| (0..d).map(|c| self.gram[(r, c)] * x[c]).sum())
            .collect()
    }

    /// Upper triangular `R` with `R^t R = Q`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// A basis matrix realizing the form. The factorization `Q = A^t A` is
    /// not unique; this returns the Cholesky factor and is meant for export.
    pub fn gram_to_basis(&self) -> DMatrix<f64> {
        self.chol.clone()
    }

    pub fn det(&self) -> f64 {
        (0..self.dim()).map(|k| self.chol[(k, k)].powi(2)).product()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let d = self.dim();
        let r = &self.chol;
        // R^{-1} by back substitution, then Q^{-1} = R^{-1} R^{-t}.
        let mut rinv = DMatrix::<f64>::zeros(d, d);
        for col in 0..d {
            for row in (0..=col).rev() {
                let mut s = if row == col { 1.0 } else { 0.0 };
                for k in (row + 1)..=col {
                    s -= r[(row, k)] * rinv[(k, col)];
                }
                rinv[(row, col)] = s / r[(row, row)];
            }
        }
        let inv = &rinv * rinv.transpose();
        DMatrix::from_fn(d, d, |a, b| if a <= b { inv[(a, b)] } else { inv[(b, a)] })
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.dim()).map(|k| self.gram[(k, k)]).fold(f64::MIN, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.gram * factor)
    }

    /// `U^t Q U` for an integer matrix `U`.
    pub fn transformed(&self, u: &DMatrix<i64>) -> Result<Self> {
        let uf = u.map(|x| x as f64);
        Self::new(uf.transpose() * &self.gram * uf)
    }
}

fn cholesky_upper(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = gram.nrows();
    let max_diag = (0..d).map(|k| gram[(k, k)]).fold(f64::MIN, f64::max);
    let threshold = PIVOT_TOLERANCE * max_diag.max(0.0);
    let mut r = DMatrix::<f64>::zeros(d, d);
    for k in 0..d {
        let mut pivot = gram[(k, k)];
        for l in 0..k {
            pivot -= r[(l, k)] * r[(l, k)];
        }
        if !(pivot > threshold) || max_diag <= 0.0 {
            return Err(Error::NotPositiveDefinite { index: k, pivot });
        }
        let rkk = pivot.sqrt();
        r[(k, k)] = rkk;
        for c in (k + 1)..d {
            let mut s = gram[(k, c)];
            for l in 0..k {
                s -= r[(l, k)] * r[(l, c)];
            }
            r[(k, c)] = s / rkk;
        }
    }
    Ok(r)
}

/// Canonical representative of `x mod 1` in `[0, 1)`.
pub fn reduce_mod_one(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

pub(crate) fn is_near_integer(x: f64, tol: f64) -> bool {
    (x - x.round()).abs() <= tol
}

/// A point `X = (Q, t_0, ..., t_{m-2})` of the parameter space of
/// `m`-periodic sets; the origin coset `t_{m-1} = 0` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicForm {
    q: Pqf,
    translates: Vec<DVector<f64>>,
}

impl PeriodicForm {
    /// Reduces every translate into `[0,1)^d` and rejects translates that
    /// coincide with each other or with the origin coset.
    pub fn new(q: Pqf, translates: Vec<Vec<f64>>) -> Result<Self> {
        let d = q.dim();
        let mut reduced = Vec::with_capacity(translates.len());
        for (index, t) in translates.iter().enumerate() {
            if t.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: t.len() });
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            let r = DVector::from_iterator(d, t.iter().map(|&x| reduce_mod_one(x)));
            if r.iter().all(|&x| is_near_integer(x, COSET_TOLERANCE)) {
                return Err(Error::TranslateAtOrigin { index });
            }
            reduced.push(r);
        }
        for a in 0..reduced.len() {
            for b in (a + 1)..reduced.len() {
                let same = reduced[a]
                    .iter()
                    .zip(reduced[b].iter())
                    .all(|(x, y)| is_near_integer(x - y, COSET_TOLERANCE));
                if same {
                    return Err(Error::CoincidentTranslates { first: a, second: b });
                }
            }
        }
        Ok(Self { q, translates: reduced })
    }

    pub fn lattice(q: Pqf) -> Self {
        Self { q, translates: Vec::new() }
    }

    /// Number of cosets, including the origin coset.
    pub fn m(&self) -> usize {
        self.translates.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn q(&self) -> &Pqf {
        &self.q
    }

    /// The `m - 1` stored translates.
    pub fn translates(&self) -> &[DVector<f64>] {
        &self.translates
    }

    /// The translate of coset `k`; the last coset is the origin.
    pub fn coset(&self, k: usize) -> Vec<f64> {
        if k + 1 == self.m() {
            vec![0.0; self.dim()]
        } else {
            self.translates[k].iter().copied().collect()
        }
    }

    /// `w = t_i - t_j - v`.
    pub fn difference(&self, i: usize, j: usize, v: &[i64]) -> Vec<f64> {
        let ti = self.coset(i);
        let tj = self.coset(j);
        (0..self.dim()).map(|k| (ti[k] - tj[k]) - v[k] as f64).collect()
    }

    pub fn with_q(&self, q: Pqf) -> Result<Self> {
        if q.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: q.dim() });
        }
        Ok(Self { q, translates: self.translates.clone() })
    }

    /// The same point set with coset `k` moved to the origin: every
    /// translate becomes `t_i - t_k`.
    pub fn rebased(&self, k: usize) -> Result<Self> {
        let tk = self.coset(k);
        let all: Vec<Vec<f64>> = (0..self.m())
            .filter(|&i| i != k)
            .map(|i| self.coset(i).iter().zip(&tk).map(|(a, b)| a - b).collect())
            .collect();
        Self::new(self.q.clone(), all)
    }

    /// Whether the cosets form a group modulo Z^d, i.e. the point set is a
    /// lattice written with `m` cosets of a sublattice.
    pub fn is_lattice_representation(&self) -> bool {
        let m = self.m();
        let cosets: Vec<Vec<f64>> = (0..m).map(|k| self.coset(k)).collect();
        for a in &cosets {
            for b in &cosets {
                let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let found = cosets.iter().any(|c| {
                    c.iter().zip(&diff).all(|(x, y)| is_near_integer(x - y, 1e-9))
                });
                if !found {
                    return false;
                }
            }
        }
        true
    }

    /// `X + eps * N`, with translates re-reduced mod Z^d.
    pub fn perturbed(&self, direction: &SdmVector, eps: f64) -> Result<Self> {
        if direction.dim() != self.dim() || direction.cosets() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: sdm_dimension(self.dim(), self.m()),
                found: direction.flat_len(),
            });
        }
        let q = Pqf::new(self.q.gram() + direction.sym() * eps)?;
        let translates = self
            .translates
            .iter()
            .enumerate()
            .map(|(k, t)| (0..self.dim()).map(|r| t[r] + eps * direction.trans()[(r, k)]).collect())
            .collect();
        Self::new(q, translates)
    }
}

/// `binom(d+1, 2) + (m-1) d`, the dimension of `S^{d,m}`.
pub fn sdm_dimension(dim: usize, m: usize) -> usize {
    dim * (dim + 1) / 2 + (m - 1) * dim
}

/// An element `(S, T)` of `S^d x R^{d x (m-1)}`: gradients of the minimum
/// polynomials and perturbation directions both live here.
#[derive(Debug, Clone, PartialEq)]
pub struct SdmVector {
    sym: DMatrix<f64>,
    trans: DMatrix<f64>,
}

impl SdmVector {
    pub fn new(sym: DMatrix<f64>, trans: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = sym.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if trans.nrows() != rows {
            return Err(Error::DimensionMismatch { expected: rows, found: trans.nrows() });
        }
        for r in 0..rows {
            for c in (r + 1)..rows {
                if sym[(r, c)] != sym[(c, r)] {
                    return Err(Error::NotSymmetric {
                        row: r,
                        col: c,
                        deviation: (sym[(r, c)] - sym[(c, r)]).abs(),
                    });
                }
            }
        }
        Ok(Self { sym, trans })
    }

    pub fn zeros(dim: usize, m: usize) -> Self {
        Self { sym: DMatrix::zeros(dim, dim), trans: DMatrix::zeros(dim, m - 1) }
    }

    /// A purely translational vector `(0, T)`.
    pub fn translational(trans: DMatrix<f64>) -> Self {
        let d = trans.nrows();
        Self { sym: DMatrix::zeros(d, d), trans }
    }

    pub fn dim(&self) -> usize {
        self.sym.nrows()
    }

    pub fn cosets(&self) -> usize {
        self.trans.ncols() + 1
    }

    pub fn sym(&self) -> &DMatrix<f64> {
        &self.sym
    }

    pub fn trans(&self) -> &DMatrix<f64> {
        &self.trans
    }

    pub fn flat_len(&self) -> usize {
        sdm_dimension(self.dim(), self.cosets())
    }

    /// Coordinates in an orthonormal basis of `S^{d,m}`: the upper triangle
    /// row by row with off-diagonal entries scaled by `sqrt 2`, followed by
    /// the translational columns. Euclidean products of flattened vectors
    /// equal [`inner_product`].
    pub fn flatten(&self) -> DVector<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(self.flat_len());
        for r in 0..d {
            for c in r..d {
                let x = self.sym[(r, c)];
                out.push(if r == c { x } else { x * std::f64::consts::SQRT_2 });
            }
        }
        out.extend(self.trans.iter().copied());
        DVector::from_vec(out)
    }

    pub fn from_flat(dim: usize, m: usize, flat: &[f64]) -> Result<Self> {
        let expected = sdm_dimension(dim, m);
        if flat.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: flat.len() });
        }
        let mut sym = DMatrix::zeros(dim, dim);
        let mut k = 0;
        for r in 0..dim {
            for c in r..dim {
                let x = if r == c { flat[k] } else { flat[k] / std::f64::consts::SQRT_2 };
                sym[(r, c)] = x;
                sym[(c, r)] = x;
                k += 1;
            }
        }
        let trans = DMatrix::from_column_slice(dim, m - 1, &flat[k..]);
        Ok(Self { sym, trans })
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        inner_product(self, other)
    }

    pub fn norm(&self) -> f64 {
        (self.sym.iter().map(|x| x * x).sum::<f64>() + self.trans.iter().map(|x| x * x).sum::<f64>())
            .sqrt()
    }

    fn assert_compatible(&self, other: &Self) {
        assert_eq!(self.sym.shape(), other.sym.shape(), "S^d component shape mismatch");
        assert_eq!(self.trans.shape(), other.trans.shape(), "translational shape mismatch");
    }
}

/// `<X, Y> = trace(S_X S_Y) + sum_i T_X[:,i] . T_Y[:,i]`.
pub fn inner_product(x: &SdmVector, y: &SdmVector) -> Result<f64> {
    if x.sym.shape() != y.sym.shape() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    if x.trans.shape() != y.trans.shape() {
        return Err(Error::DimensionMismatch { expected: x.cosets(), found: y.cosets() });
    }
    // trace(AB) for symmetric A, B is the Frobenius product.
    let sym: f64 = x.sym.iter().zip(y.sym.iter()).map(|(a, b)| a * b).sum();
    let trans: f64 = x.trans.iter().zip(y.trans.iter()).map(|(a, b)| a * b).sum();
    Ok(sym + trans)
}

impl Add for &SdmVector {
    type Output = SdmVector;
    fn add(self, rhs: &SdmVector) -> SdmVector {
        self.assert_compatible(rhs);
        SdmVector { sym: &self.sym + &rhs.sym, trans: &self.trans + &rhs.trans }
    }
}

impl Sub for &SdmVector {
    type Output = SdmVector;
    fn sub(self, rhs: &SdmVector) -> SdmVector {
        self.assert_compatible(rhs);
        SdmVector { sym: &self.sym - &rhs.sym, trans: &self.trans - &rhs.trans }
    }
}

impl Mul<f64> for &SdmVector {
    type Output = SdmVector;
    fn mul(self, rhs: f64) -> SdmVector {
        SdmVector { sym: &self.sym * rhs, trans: &self.trans * rhs }
    }
}

impl Neg for &SdmVector {
    type Output = SdmVector;
    fn neg(self) -> SdmVector {
        self * -1.0
    }
}

/// A representation `w = t_i - t_j - v` of the minimum, with `i <= j`
/// (the representative of the pair `p_{i,j,v} = p_{j,i,-v}`). Indices are
/// zero-based; `m - 1` is the origin coset.
#[derive(Debug, Clone, PartialEq)]
pub struct MinTriple {
    pub i: usize,
    pub j: usize,
    pub v: Vec<i64>,
    pub w: Vec<f64>,
    pub value: f64,
}

impl MinTriple {
    pub fn key(&self) -> (usize, usize, &[i64]) {
        (self.i, self.j, &self.v)
    }
}

impl fmt::Display for MinTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {:?}) -> {:.12}", self.i + 1, self.j + 1, self.v, self.value)
    }
}

/// Volume of the Euclidean unit ball in dimension `d`, `pi^{d/2} / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2 pi / d * V_{d-2}
    let (mut v, mut k) = if dim.is_multiple_of(2) { (1.0, 0) } else { (2.0, 1) };
    while k < dim {
        k += 2;
        v *= 2.0 * PI / k as f64;
    }
    v
}

/// Packing density `(lambda / det(Q)^{1/d})^{d/2} * m * vol(B^d) / 2^d`.
pub fn density(x: &PeriodicForm, lambda: f64) -> f64 {
    let d = x.dim() as f64;
    let det = x.q().det();
    (lambda / det.powf(1.0 / d)).powf(d / 2.0) * x.m() as f64 * unit_ball_volume(x.dim())
        / 2f64.powi(x.dim() as i32)
}
