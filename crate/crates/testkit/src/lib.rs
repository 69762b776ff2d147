//! Independent oracles and random generators shared by the test suites.
//!
//! Nothing here calls the enumeration engine of `periodic-forms`: the
//! minimum oracle is an exhaustive box search whose radius is certified from
//! the smallest eigenvalue of `Q`, and gradients are checked against central
//! finite differences of `Q[t_i - t_j - v]`.

use nalgebra::{DMatrix, SymmetricEigen};
use periodic_forms::floating::{enumerate_sublattices, refine_representation};
use periodic_forms::{PeriodicForm, Pqf};
use rand::{Rng, RngExt};

/// Relative tolerance for counting a box vector as minimal.
pub const ORACLE_TIE: f64 = 1e-9;

/// `(i, j, v)` with `i <= j` and the value `Q[t_i - t_j - v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTriple {
    pub i: usize,
    pub j: usize,
    pub v: Vec<i64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMinimum {
    pub lambda: f64,
    pub triples: Vec<OracleTriple>,
    /// Box half-width that was searched.
    pub radius: i64,
}

fn quad(q: &DMatrix<f64>, w: &[f64]) -> f64 {
    let mut s = 0.0;
    for r in 0..w.len() {
        for c in 0..w.len() {
            s += q[(r, c)] * w[r] * w[c];
        }
    }
    s
}

fn cosets(x: &PeriodicForm) -> Vec<Vec<f64>> {
    (0..x.m()).map(|k| x.coset(k)).collect()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn smallest_eigenvalue(q: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(q.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Box half-width `R` such that every `v` with `Q[t_i - t_j - v] <= bound`
/// satisfies `|v_k| <= R`, from `|w|^2 <= bound / lambda_min(Q)` and
/// `|t_i - t_j|_k < 1`.
pub fn certified_radius(q: &DMatrix<f64>, bound: f64) -> i64 {
    let lower = smallest_eigenvalue(q) * (1.0 - 1e-9);
    assert!(lower > 0.0, "Gram matrix is not positive definite");
    (bound / lower).sqrt().ceil() as i64 + 1
}

fn for_each_in_box(d: usize, radius: i64, f: &mut impl FnMut(&[i64])) {
    let mut v = vec![-radius; d];
    loop {
        f(&v);
        let mut k = 0;
        loop {
            if k == d {
                return;
            }
            if v[k] < radius {
                v[k] += 1;
                break;
            }
            v[k] = -radius;
            k += 1;
        }
    }
}

/// Exhaustive minimum over `i <= j` and a certified box of `v`, with at
/// least `min_radius` as half-width.
pub fn brute_force_minimum(x: &PeriodicForm, min_radius: i64) -> OracleMinimum {
    let q = x.q().gram();
    let d = x.dim();
    let t = cosets(x);
    // Any admissible value bounds the minimum from above.
    let mut bound = (0..d).map(|k| q[(k, k)]).fold(f64::INFINITY, f64::min);
    for i in 0..x.m() {
        for j in (i + 1)..x.m() {
            let w: Vec<f64> = (0..d).map(|k| t[i][k] - t[j][k] - (t[i][k] - t[j][k]).round()).collect();
            bound = bound.min(quad(q, &w));
        }
    }
    let radius = certified_radius(q, bound).max(min_radius);
    let mut all = Vec::new();
    for i in 0..x.m() {
        for j in i..x.m() {
            for_each_in_box(d, radius, &mut |v| {
                if i == j && v.iter().all(|&c| c == 0) {
                    return;
                }
                let w: Vec<f64> = (0..d).map(|k| t[i][k] - t[j][k] - v[k] as f64).collect();
                let value = quad(q, &w);
                if value <= bound * (1.0 + 1e-6) {
                    all.push(OracleTriple { i, j, v: v.to_vec(), value });
                }
            });
        }
    }
    let lambda = all.iter().map(|t| t.value).fold(f64::INFINITY, f64::min);
    let mut triples: Vec<OracleTriple> = all.into_iter().filter(|t| t.value <= lambda * (1.0 + ORACLE_TIE)).collect();
    triples.sort_by(|a, b| (a.i, a.j, &a.v).cmp(&(b.i, b.j, &b.v)));
    OracleMinimum { lambda, triples, radius }
}

/// `Q[t_i - t_j - v]` evaluated on raw data, without reduction mod `Z^d`.
pub fn raw_p(q: &DMatrix<f64>, t: &[Vec<f64>], i: usize, j: usize, v: &[i64]) -> f64 {
    let w: Vec<f64> = (0..q.nrows()).map(|k| t[i][k] - t[j][k] - v[k] as f64).collect();
    quad(q, &w)
}

/// Central finite-difference gradient of `p_{i,j,v}` at `X` as
/// `(sym, trans)`, in the trace inner product: off-diagonal derivatives
/// along the symmetric unit `E_rc + E_cr` are halved.
pub fn finite_difference_gradient(x: &PeriodicForm, i: usize, j: usize, v: &[i64], h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = x.dim();
    let m = x.m();
    let q = x.q().gram().clone();
    let t = cosets(x);
    let mut sym = DMatrix::zeros(d, d);
    for r in 0..d {
        for c in r..d {
            let mut plus = q.clone();
            let mut minus = q.clone();
            plus[(r, c)] += h;
            minus[(r, c)] -= h;
            if r != c {
                plus[(c, r)] += h;
                minus[(c, r)] -= h;
            }
            let deriv = (raw_p(&plus, &t, i, j, v) - raw_p(&minus, &t, i, j, v)) / (2.0 * h);
            let g = if r == c { deriv } else { deriv / 2.0 };
            sym[(r, c)] = g;
            sym[(c, r)] = g;
        }
    }
    let mut trans = DMatrix::zeros(d, m - 1);
    for col in 0..m - 1 {
        for r in 0..d {
            let mut plus = t.clone();
            let mut minus = t.clone();
            plus[col][r] += h;
            minus[col][r] -= h;
            trans[(r, col)] = (raw_p(&q, &plus, i, j, v) - raw_p(&q, &minus, i, j, v)) / (2.0 * h);
        }
    }
    (sym, trans)
}

/// A random positive definite Gram matrix with diagonal in `[lo, hi]` and
/// off-diagonal entries of magnitude at most `hi / 2`, rejected until its
/// smallest eigenvalue is at least `lo / 10`.
pub fn random_gram<R: Rng>(rng: &mut R, d: usize, lo: f64, hi: f64) -> Pqf {
    loop {
        let mut g = DMatrix::zeros(d, d);
        for r in 0..d {
            g[(r, r)] = rng.random_range(lo..=hi);
            for c in (r + 1)..d {
                let e = rng.random_range(-hi / 2.0..=hi / 2.0);
                g[(r, c)] = e;
                g[(c, r)] = e;
            }
        }
        if smallest_eigenvalue(&g) >= lo / 10.0 {
            if let Ok(q) = Pqf::new(g) {
                return q;
            }
        }
    }
}

/// A random `m`-periodic form with independent uniform translates.
pub fn random_form<R: Rng>(rng: &mut R, d: usize, m: usize, lo: f64, hi: f64) -> PeriodicForm {
    let q = random_gram(rng, d, lo, hi);
    loop {
        let translates = (0..m - 1).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        if let Ok(x) = PeriodicForm::new(q.clone(), translates) {
            return x;
        }
    }
}

/// A random lattice written as an index-`m` sublattice representation.
pub fn random_lattice_representation<R: Rng>(rng: &mut R, d: usize, m: usize, lo: f64, hi: f64) -> PeriodicForm {
    let q = random_gram(rng, d, lo, hi);
    let subs = enumerate_sublattices(d, m).expect("index within the guard");
    let s = &subs[rng.random_range(0..subs.len())];
    refine_representation(&PeriodicForm::lattice(q), s).expect("refinement of a valid lattice")
}

fn int_det(u: &DMatrix<i64>) -> i64 {
    let f = u.map(|e| e as f64);
    f.determinant().round() as i64
}

/// A random unimodular matrix with entries in `-2..=2`.
pub fn random_unimodular<R: Rng>(rng: &mut R, d: usize) -> DMatrix<i64> {
    loop {
        let u = DMatrix::from_fn(d, d, |_, _| rng.random_range(-2..=2i64));
        if int_det(&u).abs() == 1 {
            return u;
        }
    }
}

/// Inverse of a unimodular matrix, rounded from the floating-point inverse.
pub fn unimodular_inverse(u: &DMatrix<i64>) -> DMatrix<i64> {
    let f = u.map(|e| e as f64);
    let inv = f.try_inverse().expect("unimodular");
    inv.map(|e| e.round() as i64)
}
