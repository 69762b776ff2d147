//! Exact rational certification. Enumeration runs in floating point with a
//! widened candidate window; values, ranks, the span test and the interior
//! LP are then decided over the rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::floating::{scaled_inverse, SublatticeRefinement};
use crate::form::{sdm_dimension, PeriodicForm, Pqf};
use crate::minima::{arithmetical_minimum_with, EnumerationLimits};

type Q = BigRational;

/// Float candidates within this relative gap of the float minimum are
/// re-evaluated exactly.
pub const CANDIDATE_GAP: f64 = 1e-6;

fn rat(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn frac(x: &Q) -> Q {
    x - x.floor()
}

fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// A periodic form with rational Gram matrix and translates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalForm {
    q: Vec<Vec<Q>>,
    translates: Vec<Vec<Q>>,
}

impl RationalForm {
    /// Requires an exactly symmetric, positive definite `Q`; translates are
    /// reduced into `[0,1)^d` and must be distinct and nonzero mod `Z^d`.
    pub fn new(q: Vec<Vec<Q>>, translates: Vec<Vec<Q>>) -> Result<Self> {
        let d = q.len();
        if d == 0 {
            return Err(Error::NotSquare { rows: 0, cols: 0 });
        }
        for row in &q {
            if row.len() != d {
                return Err(Error::NotSquare { rows: d, cols: row.len() });
            }
        }
        for r in 0..d {
            for c in (r + 1)..d {
                if q[r][c] != q[c][r] {
                    let deviation = to_f64(&(&q[r][c] - &q[c][r])).abs();
                    return Err(Error::NotSymmetric { row: r, col: c, deviation });
                }
            }
        }
        // Exact Gaussian elimination: all pivots of a positive definite
        // matrix are positive.
        let mut a = q.clone();
        for k in 0..d {
            if !a[k][k].is_positive() {
                return Err(Error::NotPositiveDefinite { index: k, pivot: to_f64(&a[k][k]) });
            }
            for r in (k + 1)..d {
                let f = &a[r][k] / &a[k][k];
                for c in k..d {
                    let delta = &f * &a[k][c];
                    a[r][c] -= delta;
                }
            }
        }
        let mut reduced: Vec<Vec<Q>> = Vec::with_capacity(translates.len());
        for (index, t) in translates.iter().enumerate() {
            if t.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: t.len() });
            }
            let r: Vec<Q> = t.iter().map(frac).collect();
            if r.iter().all(Zero::is_zero) {
                return Err(Error::TranslateAtOrigin { index });
            }
            if let Some(first) = reduced.iter().position(|s| *s == r) {
                return Err(Error::CoincidentTranslates { first, second: index });
            }
            reduced.push(r);
        }
        Ok(Self { q, translates: reduced })
    }

    /// From the row-major upper triangle of `Q`.
    pub fn from_upper_triangle(d: usize, entries: Vec<Q>, translates: Vec<Vec<Q>>) -> Result<Self> {
        let expected = d * (d + 1) / 2;
        if entries.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: entries.len() });
        }
        let mut q = vec![vec![Q::zero(); d]; d];
        let mut it = entries.into_iter();
        for r in 0..d {
            for c in r..d {
                let e = it.next().expect("length checked");
                q[c][r] = e.clone();
                q[r][c] = e;
            }
        }
        Self::new(q, translates)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.translates.len() + 1
    }

    pub fn gram(&self) -> &[Vec<Q>] {
        &self.q
    }

    pub fn translates(&self) -> &[Vec<Q>] {
        &self.translates
    }

    pub fn coset(&self, k: usize) -> Vec<Q> {
        if k + 1 == self.m() {
            vec![Q::zero(); self.dim()]
        } else {
            self.translates[k].clone()
        }
    }

    /// `Q[w]`.
    pub fn eval(&self, w: &[Q]) -> Q {
        let mut s = Q::zero();
        for (r, wr) in w.iter().enumerate() {
            for (c, wc) in w.iter().enumerate() {
                s += &self.q[r][c] * wr * wc;
            }
        }
        s
    }

    fn apply(&self, w: &[Q]) -> Vec<Q> {
        self.q.iter().map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum()).collect()
    }

    /// `t_i - t_j - v`.
    pub fn difference(&self, i: usize, j: usize, v: &[i64]) -> Vec<Q> {
        let (ti, tj) = (self.coset(i), self.coset(j));
        (0..self.dim()).map(|k| &ti[k] - &tj[k] - rat(v[k])).collect()
    }

    pub fn to_float(&self) -> Result<PeriodicForm> {
        let rows: Vec<Vec<f64>> = self.q.iter().map(|r| r.iter().map(to_f64).collect()).collect();
        let translates = self.translates.iter().map(|t| t.iter().map(to_f64).collect()).collect();
        PeriodicForm::new(Pqf::from_rows(&rows)?, translates)
    }

    /// Exact counterpart of [`crate::floating::refine_representation`].
    pub fn refine(&self, s: &SublatticeRefinement) -> Result<Self> {
        let d = self.dim();
        if s.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
        }
        let h = s.h();
        let q = (0..d)
            .map(|r| {
                (0..d)
                    .map(|c| {
                        let mut e = Q::zero();
                        for a in 0..d {
                            for b in 0..d {
                                e += rat(h[(a, r)] * h[(b, c)]) * &self.q[a][b];
                            }
                        }
                        e
                    })
                    .collect()
            })
            .collect();
        let (adj, n) = scaled_inverse(h);
        let mut translates = Vec::new();
        for i in 0..self.m() {
            let t = self.coset(i);
            for c in s.cosets() {
                if i + 1 == self.m() && c.iter().all(|&e| e == 0) {
                    continue;
                }
                let shifted: Vec<Q> = t.iter().zip(c).map(|(a, &b)| a + rat(b)).collect();
                let y = (0..d)
                    .map(|r| (0..d).map(|k| rat(adj[(r, k)]) * &shifted[k]).sum::<Q>() / rat(n))
                    .collect();
                translates.push(y);
            }
        }
        Self::new(q, translates)
    }
}

/// Rank of a dense rational matrix given by rows.
pub fn rational_rank(rows: &[Vec<Q>]) -> usize {
    let mut a: Vec<Vec<Q>> = rows.to_vec();
    let cols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..a.len()).find(|&r| !a[r][c].is_zero()) else { continue };
        a.swap(rank, p);
        for r in 0..a.len() {
            if r != rank && !a[r][c].is_zero() {
                let f = &a[r][c] / &a[rank][c];
                for k in c..cols {
                    let delta = &f * &a[rank][k];
                    a[r][k] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Exact inverse of a nonsingular rational matrix.
pub fn rational_inverse(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut ext = row.clone();
            ext.extend((0..n).map(|c| if c == r { Q::one() } else { Q::zero() }));
            ext
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero())?;
        a.swap(c, p);
        let pivot = a[c][c].clone();
        for e in a[c].iter_mut() {
            *e /= &pivot;
        }
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                for k in 0..2 * n {
                    let delta = &f * &a[c][k];
                    a[r][k] -= delta;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<Q>, value: Q },
    Infeasible,
    Unbounded,
}

/// Minimizes `c^t x` subject to `A x = b`, `x >= 0`, by the two-phase
/// simplex method with Bland's rule over exact rationals.
pub fn simplex(a: &[Vec<Q>], b: &[Q], c: &[Q]) -> LpOutcome {
    let n = c.len();
    let rows = a.len();
    // Tableau columns: n structural, rows artificial, then the right side.
    let width = n + rows + 1;
    let mut t: Vec<Vec<Q>> = Vec::with_capacity(rows);
    for (r, row) in a.iter().enumerate() {
        let flip = b[r].is_negative();
        let mut line = vec![Q::zero(); width];
        for k in 0..n {
            line[k] = if flip { -row[k].clone() } else { row[k].clone() };
        }
        line[n + r] = Q::one();
        line[width - 1] = if flip { -b[r].clone() } else { b[r].clone() };
        t.push(line);
    }
    let mut basis: Vec<usize> = (n..n + rows).collect();

    let phase_one: Vec<Q> = (0..n + rows).map(|k| if k >= n { Q::one() } else { Q::zero() }).collect();
    if !run_simplex(&mut t, &mut basis, &phase_one, n + rows) {
        return LpOutcome::Unbounded;
    }
    let infeasibility: Q = basis.iter().zip(&t).filter(|(&k, _)| k >= n).map(|(_, line)| line[width - 1].clone()).sum();
    if infeasibility.is_positive() {
        return LpOutcome::Infeasible;
    }
    // Drive remaining artificials out of the basis; rows where that is
    // impossible are redundant.
    let mut r = 0;
    while r < t.len() {
        if basis[r] >= n {
            match (0..n).find(|&k| !t[r][k].is_zero()) {
                Some(k) => pivot(&mut t, &mut basis, r, k),
                None => {
                    t.remove(r);
                    basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }
    for line in t.iter_mut() {
        line.drain(n..n + rows);
    }
    if !run_simplex(&mut t, &mut basis, c, n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![Q::zero(); n];
    for (line, &k) in t.iter().zip(&basis) {
        x[k] = line.last().expect("rhs column").clone();
    }
    let value = x.iter().zip(c).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { x, value }
}

fn pivot(t: &mut [Vec<Q>], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col].clone();
    for e in t[row].iter_mut() {
        *e /= &p;
    }
    let pivot_row = t[row].clone();
    for (r, line) in t.iter_mut().enumerate() {
        if r != row && !line[col].is_zero() {
            let f = line[col].clone();
            for (e, pe) in line.iter_mut().zip(&pivot_row) {
                if !pe.is_zero() {
                    *e -= &f * pe;
                }
            }
        }
    }
    basis[row] = col;
}

/// Bland-rule iterations on the first `cols` columns; false if unbounded.
fn run_simplex(t: &mut [Vec<Q>], basis: &mut [usize], cost: &[Q], cols: usize) -> bool {
    loop {
        let entering = (0..cols).find(|&k| {
            if basis.contains(&k) {
                return false;
            }
            let mut reduced = cost[k].clone();
            for (line, &b) in t.iter().zip(basis.iter()) {
                if !line[k].is_zero() {
                    reduced -= &cost[b] * &line[k];
                }
            }
            reduced.is_negative()
        });
        let Some(k) = entering else { return true };
        let mut leave: Option<(usize, Q)> = None;
        for (r, line) in t.iter().enumerate() {
            if line[k].is_positive() {
                let ratio = line.last().expect("rhs column") / &line[k];
                let better = match &leave {
                    None => true,
                    Some((lr, best)) => ratio < *best || (ratio == *best && basis[r] < basis[*lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((r, _)) = leave else { return false };
        pivot(t, basis, r, k);
    }
}

/// A minimal triple with exact difference vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTriple {
    pub i: usize,
    pub j: usize,
    pub v: Vec<i64>,
    pub w: Vec<Q>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactVerdict {
    pub lambda: Q,
    pub triples: Vec<ExactTriple>,
    pub generators: usize,
    pub rank: usize,
    pub required: usize,
    pub perfect: bool,
    /// `(Q^{-1}, 0)` lies in the span of `V(X)`.
    pub in_span: bool,
    /// `min(1, max_alpha min_g alpha_g)` over representations of the target.
    pub s_star: Option<Q>,
    pub coefficients: Option<Vec<Q>>,
    pub eutactic: bool,
    pub isolated_m_extreme: bool,
    /// Dimension of the purely translational directions orthogonal to `V(X)`.
    pub translational_nullity: usize,
}

fn is_positive_v(v: &[i64]) -> bool {
    v.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

/// Exact minimum, perfection, eutaxy and translational nullity of `X`.
pub fn certify_exact(x: &RationalForm) -> Result<ExactVerdict> {
    let (d, m) = (x.dim(), x.m());
    let float = x.to_float()?;
    let limits = EnumerationLimits { near_miss_gap: CANDIDATE_GAP, ..EnumerationLimits::default() };
    let approx = arithmetical_minimum_with(&float, &limits)?;
    let mut candidates: Vec<(ExactTriple, Q)> = approx
        .triples
        .iter()
        .chain(&approx.near_misses)
        .map(|t| {
            let w = x.difference(t.i, t.j, &t.v);
            let value = x.eval(&w);
            (ExactTriple { i: t.i, j: t.j, v: t.v.clone(), w }, value)
        })
        .collect();
    let lambda = candidates.iter().map(|(_, v)| v.clone()).min().ok_or(Error::DegenerateMinimum { lambda: 0.0 })?;
    candidates.retain(|(_, v)| *v == lambda);
    let triples: Vec<ExactTriple> = candidates.into_iter().map(|(t, _)| t).collect();

    // Generators in plain coordinates: the upper triangle of w w^t, then
    // the translational columns. Linear coordinates preserve rank and
    // relative-interior membership.
    let generators: Vec<Vec<Q>> = triples
        .iter()
        .filter(|t| t.i != t.j || is_positive_v(&t.v))
        .map(|t| {
            let mut g = Vec::with_capacity(sdm_dimension(d, m));
            for r in 0..d {
                for c in r..d {
                    g.push(&t.w[r] * &t.w[c]);
                }
            }
            let mut trans = vec![Q::zero(); (m - 1) * d];
            if t.i != t.j {
                let qw = x.apply(&t.w);
                for k in 0..d {
                    if t.i + 1 < m {
                        trans[t.i * d + k] = rat(2) * &qw[k];
                    }
                    if t.j + 1 < m {
                        trans[t.j * d + k] = rat(-2) * &qw[k];
                    }
                }
            }
            g.extend(trans);
            g
        })
        .collect();
    let required = sdm_dimension(d, m);
    let rank = rational_rank(&generators);

    let inverse = rational_inverse(&x.q).expect("positive definite");
    let mut target = Vec::with_capacity(required);
    for r in 0..d {
        for c in r..d {
            target.push(inverse[r][c].clone());
        }
    }
    target.extend((0..(m - 1) * d).map(|_| Q::zero()));

    // Variables: beta_g >= 0, s+ in [0, 1], s- >= 0, slack; alpha = beta + s.
    let n = generators.len();
    let sums: Vec<Q> = (0..required).map(|row| generators.iter().map(|g| g[row].clone()).sum()).collect();
    let mut a: Vec<Vec<Q>> = (0..required)
        .map(|row| {
            let mut line: Vec<Q> = generators.iter().map(|g| g[row].clone()).collect();
            line.push(sums[row].clone());
            line.push(-sums[row].clone());
            line.push(Q::zero());
            line
        })
        .collect();
    let mut cap = vec![Q::zero(); n + 3];
    cap[n] = Q::one();
    cap[n + 2] = Q::one();
    a.push(cap);
    let mut b = target;
    b.push(Q::one());
    let mut cost = vec![Q::zero(); n + 3];
    cost[n] = rat(-1);
    cost[n + 1] = rat(1);

    let (in_span, s_star, coefficients) = match simplex(&a, &b, &cost) {
        LpOutcome::Optimal { x: sol, .. } => {
            let s = &sol[n] - &sol[n + 1];
            let alpha: Vec<Q> = sol[..n].iter().map(|beta| beta + &s).collect();
            (true, Some(s), Some(alpha))
        }
        LpOutcome::Infeasible => (false, None, None),
        LpOutcome::Unbounded => return Err(Error::LpFailure("bounded program reported unbounded".into())),
    };
    let eutactic = s_star.as_ref().is_some_and(Signed::is_positive);
    let coefficients = if eutactic { coefficients } else { None };

    let system: Vec<Vec<Q>> = generators.iter().map(|g| g[d * (d + 1) / 2..].to_vec()).collect();
    let translational_nullity = (m - 1) * d - if system.is_empty() { 0 } else { rational_rank(&system) };

    Ok(ExactVerdict {
        lambda,
        triples,
        generators: n,
        rank,
        required,
        perfect: rank == required,
        in_span,
        s_star,
        eutactic,
        isolated_m_extreme: rank == required && eutactic,
        coefficients,
        translational_nullity,
    })
}
