//! Generalized arithmetical minimum `lambda(X)` and the full set `Min X`.
//!
//! For every coset pair `i <= j` the search minimizes `Q[t_i - t_j - v]`
//! over `v in Z^d`: a shortest vector problem when `i == j` (with `v != 0`)
//! and a closest vector problem around `t_i - t_j` otherwise. Each search
//! is a Fincke-Pohst branch and bound on the Cholesky factor of an
//! LLL-reduced Gram matrix. All pairs share one adaptively tightened upper
//! bound.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::form::{density, MinTriple, PeriodicForm};

/// A triple attains the minimum when its value is at most `lambda * (1 + TIE_TOLERANCE)`.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Minima below this multiple of the largest diagonal entry are degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;
// Pruning slack against rounding in the partial sums.
const PRUNE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationLimits {
    pub max_dim: usize,
    pub max_cosets: usize,
    pub max_triples: usize,
    /// Triples with value in `(lambda, lambda * (1 + gap)]` are reported as
    /// near misses. Zero disables them.
    pub near_miss_gap: f64,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self { max_dim: 12, max_cosets: 64, max_triples: 1_000_000, near_miss_gap: 0.01 }
    }
}

impl EnumerationLimits {
    pub fn without_near_misses() -> Self {
        Self { near_miss_gap: 0.0, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimumResult {
    pub lambda: f64,
    /// Every attaining triple with `i <= j`, sorted lexicographically by
    /// `(i, j, v)`. For `i == j` both `v` and `-v` are listed.
    pub triples: Vec<MinTriple>,
    pub near_misses: Vec<MinTriple>,
}

impl MinimumResult {
    /// The distinct vectors of `Min X` (both `w` and `-w` for every triple).
    pub fn min_vectors(&self) -> Vec<Vec<f64>> {
        let mut keyed: Vec<(Vec<i64>, Vec<f64>)> = Vec::new();
        for t in &self.triples {
            for sign in [1.0, -1.0] {
                let w: Vec<f64> = t.w.iter().map(|x| sign * x).collect();
                let key = quantize(&w);
                if !keyed.iter().any(|(k, _)| *k == key) {
                    keyed.push((key, w));
                }
            }
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.into_iter().map(|(_, w)| w).collect()
    }

    /// `|Min X|`, counting distinct vectors.
    pub fn min_count(&self) -> usize {
        self.min_vectors().len()
    }

    /// Number of ordered triples `(i, j, v)` attaining the minimum.
    pub fn ordered_triple_count(&self) -> usize {
        self.triples.iter().map(|t| if t.i == t.j { 1 } else { 2 }).sum()
    }
}

pub(crate) fn quantize(w: &[f64]) -> Vec<i64> {
    w.iter().map(|x| (x * 1e9).round() as i64).collect()
}

/// `p_{i,j,v}(X) = Q[t_i - t_j - v]` (zero-based coset indices).
pub fn evaluate_p(x: &PeriodicForm, i: usize, j: usize, v: &[i64]) -> Result<f64> {
    if i >= x.m() || j >= x.m() {
        return Err(Error::InvalidTriple(format!("coset index out of range 0..{}", x.m())));
    }
    if v.len() != x.dim() {
        return Err(Error::InvalidTriple(format!("v has length {}, expected {}", v.len(), x.dim())));
    }
    if i == j && v.iter().all(|&c| c == 0) {
        return Err(Error::InvalidTriple("v = 0 with i = j".into()));
    }
    Ok(x.q().eval(&x.difference(i, j, v)))
}

pub fn arithmetical_minimum(x: &PeriodicForm) -> Result<MinimumResult> {
    arithmetical_minimum_with(x, &EnumerationLimits::default())
}

pub fn arithmetical_minimum_with(x: &PeriodicForm, limits: &EnumerationLimits) -> Result<MinimumResult> {
    let d = x.dim();
    let m = x.m();
    if d > limits.max_dim || m > limits.max_cosets {
        return Err(Error::DimensionGuard {
            dim: d,
            max_dim: limits.max_dim,
            cosets: m,
            max_cosets: limits.max_cosets,
        });
    }
    let gap = limits.near_miss_gap.max(0.0);
    let reduction = Reduction::new(x.q().gram());
    let search = Searcher::new(&reduction.gram);

    let q = x.q();
    let mut initial = (0..d).map(|k| reduction.gram[(k, k)]).fold(f64::INFINITY, f64::min);
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    for &(i, j) in &pairs {
        if i != j {
            let c = x.difference(i, j, &vec![0; d]);
            let rounded: Vec<i64> = c.iter().map(|v| v.round() as i64).collect();
            initial = initial.min(q.eval(&x.difference(i, j, &rounded)));
        }
    }

    let bound = AtomicU64::new(initial.to_bits());
    let collected = AtomicUsize::new(0);
    let overflow = AtomicBool::new(false);

    let per_pair: Vec<Vec<MinTriple>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let center = x.difference(i, j, &vec![0; d]);
            let reduced_center = reduction.to_reduced(&center);
            let mut found = Vec::new();
            search.run(&reduced_center, i == j, &bound, gap, &mut |u| {
                if overflow.load(Ordering::Relaxed) {
                    return None;
                }
                let v = reduction.to_original(u);
                let w: Vec<f64> = center.iter().zip(&v).map(|(c, vk)| c - *vk as f64).collect();
                let value = q.eval(&w);
                bound.fetch_min(value.to_bits(), Ordering::Relaxed);
                let current = f64::from_bits(bound.load(Ordering::Relaxed));
                if value <= current * (1.0 + gap) * (1.0 + PRUNE_SLACK) {
                    if collected.fetch_add(1, Ordering::Relaxed) >= limits.max_triples {
                        overflow.store(true, Ordering::Relaxed);
                        return None;
                    }
                    found.push(MinTriple { i, j, v, w, value });
                }
                Some(())
            });
            found
        })
        .collect();

    if overflow.load(Ordering::Relaxed) {
        return Err(Error::TooManyTriples { cap: limits.max_triples });
    }

    let candidates: Vec<MinTriple> = per_pair.into_iter().flatten().collect();
    let lambda = candidates.iter().map(|t| t.value).fold(f64::INFINITY, f64::min);
    if !lambda.is_finite() || lambda < DEGENERACY_TOLERANCE * q.max_diagonal() {
        return Err(Error::DegenerateMinimum { lambda });
    }
    let tie = lambda * (1.0 + TIE_TOLERANCE);
    let (mut triples, mut near_misses): (Vec<MinTriple>, Vec<MinTriple>) =
        candidates.into_iter().filter(|t| t.value <= lambda * (1.0 + gap).max(1.0 + TIE_TOLERANCE)).partition(|t| t.value <= tie);
    if triples.len() > limits.max_triples {
        return Err(Error::TooManyTriples { cap: limits.max_triples });
    }
    triples.sort_by(|a, b| a.key().cmp(&b.key()));
    near_misses.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(MinimumResult { lambda, triples, near_misses })
}

/// `delta(X)`, with `lambda(X)` computed by enumeration.
pub fn packing_density(x: &PeriodicForm) -> Result<f64> {
    let min = arithmetical_minimum_with(x, &EnumerationLimits::without_near_misses())?;
    Ok(density(x, min.lambda))
}

/// An LLL-reduced basis `U` of Z^d for the Gram matrix `Q`; enumeration
/// runs on `U^t Q U` and maps results back through `U`.
struct Reduction {
    u: DMatrix<i64>,
    u_inv: DMatrix<i64>,
    gram: DMatrix<f64>,
}

impl Reduction {
    fn new(q: &DMatrix<f64>) -> Self {
        let d = q.nrows();
        let (u, u_inv) = lll_gram(q).unwrap_or_else(|| (DMatrix::identity(d, d), DMatrix::identity(d, d)));
        let gram = congruent(q, &u);
        Self { u, u_inv, gram }
    }

    fn to_reduced(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        (0..d).map(|r| (0..d).map(|c| self.u_inv[(r, c)] as f64 * x[c]).sum()).collect()
    }

    fn to_original(&self, u: &[i64]) -> Vec<i64> {
        let d = u.len();
        (0..d).map(|r| (0..d).map(|c| self.u[(r, c)] * u[c]).sum()).collect()
    }
}

fn congruent(q: &DMatrix<f64>, u: &DMatrix<i64>) -> DMatrix<f64> {
    let uf = u.map(|x| x as f64);
    let g = uf.transpose() * q * uf;
    let d = g.nrows();
    DMatrix::from_fn(d, d, |r, c| if r <= c { g[(r, c)] } else { g[(c, r)] })
}

/// Gram-Schmidt data `(mu, b)` computed from a Gram matrix.
fn gram_schmidt(g: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let d = g.nrows();
    let mut mu = DMatrix::zeros(d, d);
    let mut b = vec![0.0; d];
    for k in 0..d {
        for j in 0..k {
            let mut s = g[(k, j)];
            for l in 0..j {
                s -= mu[(j, l)] * mu[(k, l)] * b[l];
            }
            mu[(k, j)] = s / b[j];
        }
        let mut s = g[(k, k)];
        for l in 0..k {
            s -= mu[(k, l)] * mu[(k, l)] * b[l];
        }
        b[k] = s;
    }
    (mu, b)
}

/// LLL reduction (delta = 0.99) driven by the Gram matrix. Returns the
/// unimodular transform and its inverse, or `None` if it fails to settle.
fn lll_gram(q: &DMatrix<f64>) -> Option<(DMatrix<i64>, DMatrix<i64>)> {
    const DELTA: f64 = 0.99;
    const MAX_STEPS: usize = 10_000;
    const MAX_ENTRY: i64 = 1 << 40;
    let d = q.nrows();
    let mut u = DMatrix::<i64>::identity(d, d);
    let mut u_inv = DMatrix::<i64>::identity(d, d);
    let mut g = q.clone();
    let mut k = 1;
    let mut steps = 0;
    while k < d {
        steps += 1;
        if steps > MAX_STEPS {
            return None;
        }
        for j in (0..k).rev() {
            let (mu, _) = gram_schmidt(&g);
            let r = mu[(k, j)].round();
            if r != 0.0 {
                let r = r as i64;
                for row in 0..d {
                    u[(row, k)] -= r * u[(row, j)];
                }
                for col in 0..d {
                    u_inv[(j, col)] += r * u_inv[(k, col)];
                }
                if u.iter().chain(u_inv.iter()).any(|x| x.abs() > MAX_ENTRY) {
                    return None;
                }
                g = congruent(q, &u);
            }
        }
        let (mu, b) = gram_schmidt(&g);
        if b[k] < (DELTA - mu[(k, k - 1)].powi(2)) * b[k - 1] {
            u.swap_columns(k, k - 1);
            u_inv.swap_rows(k, k - 1);
            g = congruent(q, &u);
            k = (k - 1).max(1);
        } else {
            k += 1;
        }
    }
    Some((u, u_inv))
}

/// Fincke-Pohst enumeration of `u in Z^d` with `Q[c - u] <= bound`, using
/// `Q = R^t R`: `Q[x] = sum_k r_kk^2 (x_k + sum_{l>k} mu_kl x_l)^2`.
struct Searcher {
    d: usize,
    diag_sq: Vec<f64>,
    mu: DMatrix<f64>,
}

impl Searcher {
    fn new(gram: &DMatrix<f64>) -> Self {
        let d = gram.nrows();
        let chol = gram.clone().cholesky().map(|c| c.l().transpose()).unwrap_or_else(|| {
            // The reduced Gram matrix is congruent to a validated PQF; fall back
            // to the diagonal only if rounding broke the factorization.
            DMatrix::from_fn(d, d, |r, c| if r == c { gram[(r, r)].max(0.0).sqrt() } else { 0.0 })
        });
        let diag_sq = (0..d).map(|k| chol[(k, k)].powi(2)).collect();
        let mu = DMatrix::from_fn(d, d, |k, l| if l > k { chol[(k, l)] / chol[(k, k)] } else { 0.0 });
        Self { d, diag_sq, mu }
    }

    /// Calls `visit` on every candidate within the current bound; `visit`
    /// returns `None` to abort.
    fn run(
        &self,
        center: &[f64],
        exclude_zero: bool,
        bound: &AtomicU64,
        gap: f64,
        visit: &mut dyn FnMut(&[i64]) -> Option<()>,
    ) {
        let mut u = vec![0i64; self.d];
        let mut x = vec![0.0f64; self.d];
        self.level(self.d, 0.0, center, exclude_zero, bound, gap, &mut u, &mut x, visit);
    }

    #[allow(clippy::too_many_arguments)]
    fn level(
        &self,
        k: usize,
        partial: f64,
        center: &[f64],
        exclude_zero: bool,
        bound: &AtomicU64,
        gap: f64,
        u: &mut [i64],
        x: &mut [f64],
        visit: &mut dyn FnMut(&[i64]) -> Option<()>,
    ) -> Option<()> {
        if k == 0 {
            if exclude_zero && u.iter().all(|&c| c == 0) {
                return Some(());
            }
            return visit(u);
        }
        let k = k - 1;
        let shift: f64 = ((k + 1)..self.d).map(|l| self.mu[(k, l)] * x[l]).sum();
        let mid = center[k] + shift;
        let limit = |b: &AtomicU64| f64::from_bits(b.load(Ordering::Relaxed)) * (1.0 + gap) * (1.0 + PRUNE_SLACK);
        let room = limit(bound) - partial;
        if room < 0.0 {
            return Some(());
        }
        let radius = (room / self.diag_sq[k]).sqrt();
        let lo = (mid - radius).ceil() as i64;
        let hi = (mid + radius).floor() as i64;
        for uk in lo..=hi {
            let xk = center[k] - uk as f64;
            let term = self.diag_sq[k] * (xk + shift).powi(2);
            if partial + term > limit(bound) {
                continue;
            }
            u[k] = uk;
            x[k] = xk;
            self.level(k, partial + term, center, exclude_zero, bound, gap, u, x, visit)?;
        }
        u[k] = 0;
        x[k] = 0.0;
        Some(())
    }
}
