//! Sublattice refinements, translational freedom of a periodic form, and the
//! bounded strict-periodic-extremeness verdict for lattices.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::certify::{
    classify_lattice, is_m_perfect, lift_eutaxy, orthogonal_complement, test_eutaxy, voronoi_domain,
    EutaxyCertificate, LatticeClassification, Perfection,
};
use crate::error::{Error, Result};
use crate::form::{reduce_mod_one, PeriodicForm, Pqf, SdmVector};
use crate::linalg::{null_space, RANK_TOLERANCE};
use crate::minima::{arithmetical_minimum, arithmetical_minimum_with, EnumerationLimits, MinimumResult};

/// Largest sublattice index accepted by [`enumerate_sublattices`].
pub const MAX_INDEX: usize = 64;
/// A slide keeps the minimum if `lambda(X + eps N) >= lambda(X) (1 - tol)`.
pub const SLIDE_TOLERANCE: f64 = 1e-9;
/// Largest sym-block norm of a vector in `V(X)^perp` still counted as zero.
pub const SYM_BLOCK_TOLERANCE: f64 = 1e-8;
const SNAP_TOLERANCE: f64 = 1e-12;

/// An index-`m` sublattice `H Z^d` with `H` in Hermite normal form, and
/// representatives of `Z^d / H Z^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SublatticeRefinement {
    h: DMatrix<i64>,
    cosets: Vec<Vec<i64>>,
}

impl SublatticeRefinement {
    /// Validates that `h` is upper triangular with positive diagonal and
    /// every entry right of the diagonal reduced modulo its row's pivot.
    pub fn new(h: DMatrix<i64>) -> Result<Self> {
        let d = h.nrows();
        if h.ncols() != d || d == 0 {
            return Err(Error::NotSquare { rows: h.nrows(), cols: h.ncols() });
        }
        for r in 0..d {
            let pivot = h[(r, r)];
            if pivot <= 0 {
                return Err(Error::InvalidConfig(format!("HNF pivot {} is not positive", r + 1)));
            }
            for c in 0..d {
                let e = h[(r, c)];
                if (c < r && e != 0) || (c > r && !(0..pivot).contains(&e)) {
                    return Err(Error::InvalidConfig(format!("entry ({},{}) violates Hermite normal form", r + 1, c + 1)));
                }
            }
        }
        let index: usize = (0..d).map(|k| h[(k, k)] as usize).product();
        if index > MAX_INDEX {
            return Err(Error::IndexTooLarge { index, max: MAX_INDEX });
        }
        let mut cosets = vec![Vec::new()];
        for k in 0..d {
            cosets = cosets
                .into_iter()
                .flat_map(|c: Vec<i64>| {
                    (0..h[(k, k)]).map(move |x| {
                        let mut next = c.clone();
                        next.push(x);
                        next
                    })
                })
                .collect();
        }
        Ok(Self { h, cosets })
    }

    /// `h` with caller-chosen coset representatives: `m` vectors pairwise
    /// distinct modulo `H Z^d`, one of them zero.
    pub fn with_cosets(h: DMatrix<i64>, cosets: Vec<Vec<i64>>) -> Result<Self> {
        let base = Self::new(h)?;
        let d = base.dim();
        if cosets.len() != base.index() || cosets.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidConfig(format!("expected {} representatives of length {d}", base.index())));
        }
        if !cosets.iter().any(|c| c.iter().all(|&e| e == 0)) {
            return Err(Error::InvalidConfig("representatives must include 0".into()));
        }
        let (adj, n) = scaled_inverse(&base.h);
        let mut keys: Vec<Vec<i64>> = cosets
            .iter()
            .map(|c| (&adj * DVector::from_column_slice(c)).iter().map(|e| e.rem_euclid(n)).collect())
            .collect();
        keys.sort();
        keys.dedup();
        if keys.len() != cosets.len() {
            return Err(Error::InvalidConfig("representatives coincide modulo the sublattice".into()));
        }
        Ok(Self { h: base.h, cosets })
    }

    pub fn h(&self) -> &DMatrix<i64> {
        &self.h
    }

    pub fn cosets(&self) -> &[Vec<i64>] {
        &self.cosets
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn index(&self) -> usize {
        self.cosets.len()
    }

    /// Row-major entries, the sort key of the enumeration order.
    pub fn entries(&self) -> Vec<i64> {
        let d = self.dim();
        (0..d * d).map(|k| self.h[(k / d, k % d)]).collect()
    }
}

impl fmt::Display for SublatticeRefinement {
    /// Rows separated by `;`, entries by `,`, as accepted on the command line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.dim();
        let rows: Vec<String> =
            (0..d).map(|r| (0..d).map(|c| self.h[(r, c)].to_string()).collect::<Vec<_>>().join(",")).collect();
        write!(f, "{}", rows.join(";"))
    }
}

fn divisors(n: usize) -> impl Iterator<Item = usize> {
    (1..=n).filter(move |&k| n.is_multiple_of(k))
}

fn diagonals(d: usize, m: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return vec![vec![m]];
    }
    divisors(m)
        .flat_map(|a| {
            diagonals(d - 1, m / a).into_iter().map(move |mut rest| {
                rest.insert(0, a);
                rest
            })
        })
        .collect()
}

/// Every index-`m` sublattice of `Z^d`, sorted lexicographically by the
/// row-major entries of its Hermite normal form.
pub fn enumerate_sublattices(d: usize, m: usize) -> Result<Vec<SublatticeRefinement>> {
    if d == 0 || m == 0 {
        return Err(Error::InvalidConfig("dimension and index must be positive".into()));
    }
    if m > MAX_INDEX {
        return Err(Error::IndexTooLarge { index: m, max: MAX_INDEX });
    }
    let mut all = Vec::new();
    for diag in diagonals(d, m) {
        // Free entries (r, c) with c > r range over 0..diag[r].
        let free: Vec<(usize, usize)> = (0..d).flat_map(|r| ((r + 1)..d).map(move |c| (r, c))).collect();
        let count: usize = free.iter().map(|&(r, _)| diag[r]).product();
        for mut code in 0..count {
            let mut h = DMatrix::<i64>::zeros(d, d);
            for k in 0..d {
                h[(k, k)] = diag[k] as i64;
            }
            for &(r, c) in &free {
                h[(r, c)] = (code % diag[r]) as i64;
                code /= diag[r];
            }
            all.push(SublatticeRefinement::new(h)?);
        }
    }
    all.sort_by_key(|s| s.entries());
    Ok(all)
}

/// `n * H^{-1}` for an integer upper triangular `H` with `det H = n`.
pub(crate) fn scaled_inverse(h: &DMatrix<i64>) -> (DMatrix<i64>, i64) {
    let d = h.nrows();
    let n: i64 = (0..d).map(|k| h[(k, k)]).product();
    // Back substitution column by column; all divisions are exact because
    // the right-hand side is a multiple of det H.
    let mut inv = DMatrix::<i64>::zeros(d, d);
    for col in 0..d {
        for r in (0..d).rev() {
            let mut s = if r == col { n } else { 0 };
            for k in (r + 1)..d {
                s -= h[(r, k)] * inv[(k, col)];
            }
            inv[(r, col)] = s / h[(r, r)];
        }
    }
    (inv, n)
}

fn canonical(x: f64) -> f64 {
    if (x - x.round()).abs() <= SNAP_TOLERANCE {
        0.0
    } else {
        reduce_mod_one(x)
    }
}

/// The same point set written over the sublattice `H Z^d`: Gram matrix
/// `H^t Q H` and translates `H^{-1}(t_i + c)` for every coset `t_i` of `X`
/// and every representative `c`. The origin stays implicit.
///
/// Coordinates of the result map to coordinates of `X` through `H`.
pub fn refine_representation(x: &PeriodicForm, s: &SublatticeRefinement) -> Result<PeriodicForm> {
    let d = x.dim();
    if s.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
    }
    let q = x.q().transformed(s.h())?;
    let (adj, n) = scaled_inverse(s.h());
    let adj = adj.map(|e| e as f64);
    let mut translates = Vec::with_capacity(x.m() * s.index() - 1);
    for i in 0..x.m() {
        let t = DVector::from_vec(x.coset(i));
        for c in s.cosets() {
            let origin = i + 1 == x.m() && c.iter().all(|&e| e == 0);
            if origin {
                continue;
            }
            let shifted = &t + DVector::from_iterator(d, c.iter().map(|&e| e as f64));
            let y = &adj * shifted / n as f64;
            translates.push(y.iter().map(|&e| canonical(e)).collect());
        }
    }
    PeriodicForm::new(q, translates)
}

/// The linear system `w^t Q (t^N_i - t^N_j) = 0` over the `(m-1) d`
/// translational unknowns, one row per minimal triple with `i < j`.
fn translational_system(x: &PeriodicForm, min: &MinimumResult) -> DMatrix<f64> {
    let (d, m) = (x.dim(), x.m());
    let rows: Vec<&crate::form::MinTriple> = min.triples.iter().filter(|t| t.i != t.j).collect();
    let mut a = DMatrix::zeros(rows.len(), (m - 1) * d);
    for (r, t) in rows.iter().enumerate() {
        let qw = x.q().apply(&t.w);
        for k in 0..d {
            if t.i + 1 < m {
                a[(r, t.i * d + k)] = 2.0 * qw[k];
            }
            if t.j + 1 < m {
                a[(r, t.j * d + k)] = -2.0 * qw[k];
            }
        }
    }
    a
}

/// Purely translational directions `N = (0, t^N)` orthogonal to every
/// gradient of `V(X)`, as an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationalNullspace {
    pub basis: Vec<SdmVector>,
    pub singular_values: Vec<f64>,
}

pub fn translational_nullspace(x: &PeriodicForm, min: &MinimumResult) -> TranslationalNullspace {
    let (d, m) = (x.dim(), x.m());
    let a = translational_system(x, min);
    let (basis, singular_values) = null_space(&a, RANK_TOLERANCE);
    let basis = basis
        .into_iter()
        .map(|b| SdmVector::translational(DMatrix::from_column_slice(d, m - 1, b.as_slice())))
        .collect();
    TranslationalNullspace { basis, singular_values }
}

/// `lambda(X + eps N)` sampled on `eps = k eps_max / samples`, `k = 0..=samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlideProfile {
    pub direction: SdmVector,
    pub eps: Vec<f64>,
    pub lambda: Vec<f64>,
    /// The minimum never dropped below `lambda(X)` on the sampled interval.
    pub keeps_minimum: bool,
}

impl SlideProfile {
    pub fn min_lambda(&self) -> f64 {
        self.lambda.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub const DEFAULT_SLIDE_EPS: f64 = 0.5;
pub const DEFAULT_SLIDE_SAMPLES: usize = 50;

/// Re-enumerates the minimum along the linear slide `X + eps N` for a unit,
/// purely translational `N`. Points that collide count as `lambda = 0`.
pub fn slide_verify(x: &PeriodicForm, n: &SdmVector, eps_max: f64, samples: usize) -> Result<SlideProfile> {
    if n.dim() != x.dim() || n.cosets() != x.m() {
        return Err(Error::InvalidDirection("direction does not match the form's shape".into()));
    }
    if n.sym().norm() != 0.0 {
        return Err(Error::InvalidDirection("direction changes the Gram matrix".into()));
    }
    if (n.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDirection(format!("direction has norm {}, expected 1", n.norm())));
    }
    if !(eps_max >= 0.0 && eps_max.is_finite()) || samples == 0 {
        return Err(Error::InvalidConfig("slide needs eps_max >= 0 and at least one sample".into()));
    }
    let limits = EnumerationLimits::without_near_misses();
    let base = arithmetical_minimum_with(x, &limits)?.lambda;
    let eps: Vec<f64> = (0..=samples).map(|k| k as f64 * eps_max / samples as f64).collect();
    let lambda = eps
        .par_iter()
        .map(|&e| {
            if e == 0.0 {
                return Ok(base);
            }
            match x.perturbed(n, e) {
                Ok(y) => match arithmetical_minimum_with(&y, &limits) {
                    Ok(min) => Ok(min.lambda),
                    Err(Error::DegenerateMinimum { .. }) => Ok(0.0),
                    Err(err) => Err(err),
                },
                Err(Error::CoincidentTranslates { .. } | Error::TranslateAtOrigin { .. }) => Ok(0.0),
                Err(err) => Err(err),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let keeps_minimum = lambda.iter().all(|&l| l >= base * (1.0 - SLIDE_TOLERANCE));
    Ok(SlideProfile { direction: n.clone(), eps, lambda, keeps_minimum })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloatingVerdict {
    /// No translational freedom and `X` is m-eutactic.
    NonFloatingCertified,
    /// No translational freedom, but eutaxy was not established, so the
    /// first-order argument does not apply.
    Uncertified,
    /// Translational freedom exists to first order, but no sampled slide
    /// kept the minimum.
    FloatingFirstOrder,
    /// Some slide kept the minimum across the whole sampled interval.
    FloatingVerified,
}

impl fmt::Display for FloatingVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NonFloatingCertified => "non-floating (certified)",
            Self::Uncertified => "non-floating to first order (eutaxy not established)",
            Self::FloatingFirstOrder => "floating to first order only",
            Self::FloatingVerified => "floating (slide verified)",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloatingReport {
    pub nullspace: TranslationalNullspace,
    pub eutactic: bool,
    pub slides: Vec<SlideProfile>,
    pub verdict: FloatingVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlideOptions {
    pub eps_max: f64,
    pub samples: usize,
}

impl Default for SlideOptions {
    fn default() -> Self {
        Self { eps_max: DEFAULT_SLIDE_EPS, samples: DEFAULT_SLIDE_SAMPLES }
    }
}

/// Translational nullspace of `X` and a slide along each basis direction.
pub fn floating_report(x: &PeriodicForm, min: &MinimumResult, eutactic: bool, slide: SlideOptions) -> Result<FloatingReport> {
    let nullspace = translational_nullspace(x, min);
    let slides =
        nullspace.basis.iter().map(|n| slide_verify(x, n, slide.eps_max, slide.samples)).collect::<Result<Vec<_>>>()?;
    let verdict = if nullspace.basis.is_empty() {
        if eutactic {
            FloatingVerdict::NonFloatingCertified
        } else {
            FloatingVerdict::Uncertified
        }
    } else if slides.iter().any(|s| s.keeps_minimum) {
        FloatingVerdict::FloatingVerified
    } else {
        FloatingVerdict::FloatingFirstOrder
    };
    Ok(FloatingReport { nullspace, eutactic, slides, verdict })
}

/// The pipeline's result for one refinement of the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    pub refinement: SublatticeRefinement,
    pub form: PeriodicForm,
    pub lambda: f64,
    pub perfection: Perfection,
    /// Lifted from the lattice when it is eutactic, otherwise tested directly.
    pub eutaxy: Option<EutaxyCertificate>,
    /// Largest sym-block norm over an orthonormal basis of `V(X)^perp`.
    pub complement_sym_norm: f64,
    pub floating: FloatingReport,
}

impl RefinementReport {
    pub fn m(&self) -> usize {
        self.refinement.index()
    }

    /// Every vector orthogonal to `V(X)` leaves the Gram matrix fixed.
    pub fn sym_block_trivial(&self) -> bool {
        self.complement_sym_norm <= SYM_BLOCK_TOLERANCE
    }
}

/// Bounded verdict on strict periodic extremeness of a lattice, searching
/// all refinements of index at most `m_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrictVerdict {
    pub m_max: usize,
    pub classification: LatticeClassification,
    /// Periodic extreme iff extreme.
    pub periodic_extreme: bool,
    /// Reports for every refinement with `2 <= m <= m_max`, ordered by `m`
    /// and then by Hermite normal form.
    pub refinements: Vec<RefinementReport>,
    /// Extreme and no refinement up to `m_max` has translational freedom.
    pub strict_up_to_m_max: bool,
    /// Index into `refinements` of the first slide-verified floating one.
    pub floating_witness: Option<usize>,
    pub notes: Vec<String>,
}

impl StrictVerdict {
    pub fn witness(&self) -> Option<&RefinementReport> {
        self.floating_witness.map(|k| &self.refinements[k])
    }
}

fn analyze_refinement(
    q: &Pqf,
    lattice: &PeriodicForm,
    classification: &LatticeClassification,
    s: SublatticeRefinement,
    slide: SlideOptions,
) -> Result<RefinementReport> {
    let form = refine_representation(lattice, &s)?;
    let min = arithmetical_minimum(&form)?;
    let domain = voronoi_domain(&form, &min)?;
    let perfection = is_m_perfect(&domain);
    let eutaxy = match &classification.eutaxy {
        Some(lattice_eutaxy) => {
            let c = lift_eutaxy(q, lattice_eutaxy, &form, s.h(), &domain)?;
            c.is_valid().then_some(c)
        }
        None => test_eutaxy(&form, &domain)?.certificate,
    };
    let complement_sym_norm = orthogonal_complement(&domain).iter().map(|n| n.sym().norm()).fold(0.0, f64::max);
    let floating = floating_report(&form, &min, eutaxy.is_some(), slide)?;
    Ok(RefinementReport { refinement: s, form, lambda: min.lambda, perfection, eutaxy, complement_sym_norm, floating })
}

pub fn strict_periodic_extreme_verdict(q: &Pqf, m_max: usize) -> Result<StrictVerdict> {
    strict_periodic_extreme_verdict_with(q, m_max, SlideOptions::default())
}

pub fn strict_periodic_extreme_verdict_with(q: &Pqf, m_max: usize, slide: SlideOptions) -> Result<StrictVerdict> {
    if m_max == 0 {
        return Err(Error::InvalidConfig("m_max must be at least 1".into()));
    }
    if m_max > MAX_INDEX {
        return Err(Error::IndexTooLarge { index: m_max, max: MAX_INDEX });
    }
    let classification = classify_lattice(q)?;
    let lattice = PeriodicForm::lattice(q.clone());
    let mut sublattices = Vec::new();
    for m in 2..=m_max {
        sublattices.extend(enumerate_sublattices(q.dim(), m)?);
    }
    let refinements = sublattices
        .into_par_iter()
        .map(|s| analyze_refinement(q, &lattice, &classification, s, slide))
        .collect::<Result<Vec<_>>>()?;

    let free = |r: &RefinementReport| !r.floating.nullspace.basis.is_empty();
    let floating_witness = refinements.iter().position(|r| r.floating.verdict == FloatingVerdict::FloatingVerified);
    let strict_up_to_m_max = classification.extreme && !refinements.iter().any(free);
    let mut notes = vec![format!("bounded search over all sublattice representations of index <= {m_max}")];
    let first_order = refinements.iter().filter(|r| r.floating.verdict == FloatingVerdict::FloatingFirstOrder).count();
    if first_order > 0 {
        notes.push(format!(
            "{first_order} refinements have first-order translational freedom that no linear slide confirmed; curved slides are not tested"
        ));
    }
    if let Some(r) = refinements.iter().find(|r| r.eutaxy.is_none()) {
        notes.push(format!("eutaxy not established for refinement {} (m = {})", r.refinement, r.m()));
    }
    if classification.perfect && refinements.iter().any(|r| !r.sym_block_trivial()) {
        notes.push("a vector orthogonal to V(X) changes the Gram matrix of a perfect lattice".into());
    }
    Ok(StrictVerdict {
        m_max,
        periodic_extreme: classification.extreme,
        classification,
        refinements,
        strict_up_to_m_max,
        floating_witness,
        notes,
    })
}
