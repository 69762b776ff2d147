//! Lifting lattice eutaxy to periodic representations, with the two
//! structural facts the lift rests on.

use nalgebra::{DMatrix, DVector};

use super::domain::{gradient_at, VoronoiDomain};
use super::eutaxy::{certificate_for, EutaxyCertificate};
use crate::error::{Error, Result};
use crate::form::{density, is_near_integer, PeriodicForm, Pqf, SdmVector};
use crate::minima::{arithmetical_minimum, MinimumResult};

const MEMBERSHIP_TOLERANCE: f64 = 1e-9;
const REPRESENTATION_TOLERANCE: f64 = 1e-9;

/// Eutaxy coefficients of a PQF: `Q^{-1} = sum_c beta_c x_c x_c^t` over one
/// representative `x_c` per `±` class of `Min Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeEutaxy {
    pub classes: Vec<Vec<i64>>,
    pub coefficients: Vec<f64>,
}

impl LatticeEutaxy {
    pub fn new(classes: Vec<Vec<i64>>, coefficients: Vec<f64>) -> Result<Self> {
        if classes.len() != coefficients.len() {
            return Err(Error::DimensionMismatch { expected: classes.len(), found: coefficients.len() });
        }
        Ok(Self { classes, coefficients })
    }

    pub(crate) fn from_domain(domain: &VoronoiDomain, certificate: &EutaxyCertificate) -> Self {
        let classes = domain.triples().iter().map(|t| t.v.clone()).collect();
        Self { classes, coefficients: certificate.coefficients.clone() }
    }

    fn coefficient_of(&self, x: &[i64]) -> Option<f64> {
        let neg: Vec<i64> = x.iter().map(|c| -c).collect();
        self.classes.iter().position(|c| c == x || *c == neg).map(|k| self.coefficients[k])
    }
}

/// Lifts eutaxy of `Q` to a representation `X` of the same lattice.
///
/// `basis` maps coordinates of `X` to coordinates of `Q`, so that
/// `X.q = B^t Q B`; each `w in Min X` then corresponds to `B w in Min Q`.
/// Every generator of `V(X)` receives `beta_c / m`, i.e. `beta_c / 2m` per
/// ordered triple, for its class `c`.
pub fn lift_eutaxy(
    q: &Pqf,
    eutaxy: &LatticeEutaxy,
    x: &PeriodicForm,
    basis: &DMatrix<i64>,
    domain: &VoronoiDomain,
) -> Result<EutaxyCertificate> {
    let d = q.dim();
    if x.dim() != d || basis.nrows() != d || basis.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: x.dim() });
    }
    let b = basis.map(|c| c as f64);
    let expected = b.transpose() * q.gram() * &b;
    let scale = q.max_diagonal().max(x.q().max_diagonal());
    if (expected - x.q().gram()).abs().max() > REPRESENTATION_TOLERANCE * scale {
        return Err(Error::RepresentationMismatch("X.q differs from B^t Q B".into()));
    }
    let lattice_min = arithmetical_minimum(&PeriodicForm::lattice(q.clone()))?;
    let periodic_min = arithmetical_minimum(x)?;
    let (lq, lx) = (lattice_min.lambda, periodic_min.lambda);
    if (lq - lx).abs() > REPRESENTATION_TOLERANCE * lq {
        return Err(Error::RepresentationMismatch(format!("minimum {lx} differs from {lq}")));
    }
    let (dq, dx) = (density(&PeriodicForm::lattice(q.clone()), lq), density(x, lx));
    if (dq - dx).abs() > REPRESENTATION_TOLERANCE {
        return Err(Error::RepresentationMismatch(format!("density {dx} differs from {dq}")));
    }

    let m = x.m() as f64;
    let mut coefficients = Vec::with_capacity(domain.len());
    for t in domain.triples() {
        let image = &b * DVector::from_column_slice(&t.w);
        if !image.iter().all(|&c| is_near_integer(c, MEMBERSHIP_TOLERANCE)) {
            return Err(Error::RepresentationMismatch(format!("B w = {:?} is not a lattice vector", image.as_slice())));
        }
        let xv: Vec<i64> = image.iter().map(|c| c.round() as i64).collect();
        let beta = eutaxy
            .coefficient_of(&xv)
            .ok_or_else(|| Error::RepresentationMismatch(format!("{xv:?} is not a minimal class of Q")))?;
        coefficients.push(beta / m);
    }
    Ok(certificate_for(x, domain, coefficients))
}

/// Integer `v` with `t_i - t_j - v = w`, if one exists.
fn offset(x: &PeriodicForm, i: usize, j: usize, w: &[f64]) -> Option<Vec<i64>> {
    let ti = x.coset(i);
    let tj = x.coset(j);
    let raw: Vec<f64> = (0..x.dim()).map(|k| ti[k] - tj[k] - w[k]).collect();
    raw.iter().all(|&c| is_near_integer(c, MEMBERSHIP_TOLERANCE)).then(|| raw.iter().map(|c| c.round() as i64).collect())
}

/// Partitions the cosets by the graph with an edge `i -> j` whenever
/// `t_i - t_j - v = w` for some integer `v`.
///
/// For a lattice written with `m` cosets every component is a cycle (a
/// loop when `w` is a lattice vector). For other periodic sets chains may
/// end, but no coset can have two successors or two predecessors.
pub fn verify_cycle_partition(x: &PeriodicForm, w: &[f64]) -> Result<Vec<Vec<usize>>> {
    let m = x.m();
    if w.len() != x.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: w.len() });
    }
    let mut next: Vec<Option<usize>> = vec![None; m];
    let mut prev: Vec<Option<usize>> = vec![None; m];
    for i in 0..m {
        for j in 0..m {
            if offset(x, i, j, w).is_none() {
                continue;
            }
            if next[i].replace(j).is_some() {
                return Err(Error::StructureViolation(format!("coset {} has two successors", i + 1)));
            }
            if prev[j].replace(i).is_some() {
                return Err(Error::StructureViolation(format!("coset {} has two predecessors", j + 1)));
            }
        }
    }
    let lattice = x.is_lattice_representation();
    let mut seen = vec![false; m];
    let mut parts = Vec::new();
    for start in 0..m {
        if seen[start] {
            continue;
        }
        // Walk back to the head of a chain (or around a cycle).
        let mut head = start;
        while let Some(p) = prev[head] {
            if p == start {
                break;
            }
            head = p;
        }
        let mut part = Vec::new();
        let mut k = head;
        loop {
            seen[k] = true;
            part.push(k);
            match next[k] {
                Some(n) if n == head => break,
                Some(n) if !seen[n] => k = n,
                Some(_) => return Err(Error::StructureViolation("successor graph is not a union of cycles".into())),
                None => {
                    if lattice {
                        return Err(Error::StructureViolation(format!(
                            "coset {} has no successor in a lattice representation",
                            k + 1
                        )));
                    }
                    break;
                }
            }
        }
        part.sort_unstable();
        parts.push(part);
    }
    parts.sort();
    Ok(parts)
}

/// Relative residual of `sum grad p_{i,j,v}(X) = 2m (w w^t, 0)`, the sum
/// taken over all ordered triples whose difference vector is `w` or `-w`.
pub fn verify_summing_identity(x: &PeriodicForm, w: &[f64]) -> Result<f64> {
    let (d, m) = (x.dim(), x.m());
    if w.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: w.len() });
    }
    let neg: Vec<f64> = w.iter().map(|c| -c).collect();
    let mut sum = SdmVector::zeros(d, m);
    for target in [w, neg.as_slice()] {
        for i in 0..m {
            for j in 0..m {
                if let Some(v) = offset(x, i, j, target) {
                    sum = &sum + &gradient_at(x, i, j, &v)?;
                }
            }
        }
    }
    let ww = DMatrix::from_fn(d, d, |r, c| w[r] * w[c]);
    let expected = SdmVector::new(ww * (2.0 * m as f64), DMatrix::zeros(d, m - 1))?;
    Ok((&sum - &expected).norm() / expected.norm())
}

/// Minimal vectors of `X` up to sign, one per `±` class.
pub fn minimal_classes(min: &MinimumResult) -> Vec<Vec<f64>> {
    let mut classes: Vec<Vec<f64>> = Vec::new();
    for w in min.min_vectors() {
        let neg: Vec<f64> = w.iter().map(|c| -c).collect();
        let key = crate::minima::quantize(&neg);
        if !classes.iter().any(|c| crate::minima::quantize(c) == key) {
            classes.push(w);
        }
    }
    classes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{classify_lattice, voronoi_domain};
    use crate::fixtures::fixture;
    use approx::assert_relative_eq;

    fn running_example() -> PeriodicForm {
        PeriodicForm::new(Pqf::from_rows(&[vec![1.0, 0.0], vec![0.0, 4.0]]).unwrap(), vec![vec![0.0, 0.5]]).unwrap()
    }

    fn cyclic_z1() -> PeriodicForm {
        PeriodicForm::new(Pqf::from_rows(&[vec![9.0]]).unwrap(), vec![vec![1.0 / 3.0], vec![2.0 / 3.0]]).unwrap()
    }

    #[test]
    fn lift_of_the_square_lattice() {
        let q = Pqf::identity(2);
        let eutaxy = classify_lattice(&q).unwrap().eutaxy.unwrap();
        let x = running_example();
        let dom = voronoi_domain(&x, &arithmetical_minimum(&x).unwrap()).unwrap();
        let basis = DMatrix::from_row_slice(2, 2, &[1, 0, 0, 2]);
        let c = lift_eutaxy(&q, &eutaxy, &x, &basis, &dom).unwrap();
        assert!(c.residual <= 1e-10);
        // 1/4 per ordered triple, each generator standing for two.
        for a in &c.coefficients {
            assert_relative_eq!(*a / 2.0, 0.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn lift_at_m_one_reproduces_lattice_eutaxy() {
        let q = fixture("A2").unwrap().q().clone();
        let eutaxy = classify_lattice(&q).unwrap().eutaxy.unwrap();
        let x = PeriodicForm::lattice(q.clone());
        let dom = voronoi_domain(&x, &arithmetical_minimum(&x).unwrap()).unwrap();
        let c = lift_eutaxy(&q, &eutaxy, &x, &DMatrix::identity(2, 2), &dom).unwrap();
        assert_eq!(c.coefficients, eutaxy.coefficients);
    }

    #[test]
    fn lift_rejects_a_different_lattice() {
        let q = Pqf::identity(2);
        let eutaxy = classify_lattice(&q).unwrap().eutaxy.unwrap();
        let x = running_example();
        let dom = voronoi_domain(&x, &arithmetical_minimum(&x).unwrap()).unwrap();
        let wrong = DMatrix::from_row_slice(2, 2, &[2, 0, 0, 1]);
        assert!(matches!(lift_eutaxy(&q, &eutaxy, &x, &wrong, &dom), Err(Error::RepresentationMismatch(_))));
    }

    #[test]
    fn cycle_partitions() {
        assert_eq!(verify_cycle_partition(&fixture("Z:2").unwrap(), &[1.0, 0.0]).unwrap(), vec![vec![0]]);
        assert_eq!(verify_cycle_partition(&running_example(), &[0.0, 0.5]).unwrap(), vec![vec![0, 1]]);
        assert_eq!(verify_cycle_partition(&running_example(), &[1.0, 0.0]).unwrap(), vec![vec![0], vec![1]]);
        assert_eq!(verify_cycle_partition(&cyclic_z1(), &[1.0 / 3.0]).unwrap(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn chains_in_non_lattice_sets() {
        let x = PeriodicForm::new(Pqf::identity(1), vec![vec![0.3], vec![0.6]]).unwrap();
        assert_eq!(verify_cycle_partition(&x, &[0.3]).unwrap(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn summing_identity() {
        assert!(verify_summing_identity(&fixture("A2").unwrap(), &[1.0, -1.0]).unwrap() <= 1e-12);
        assert!(verify_summing_identity(&running_example(), &[0.0, 0.5]).unwrap() <= 1e-12);
        assert!(verify_summing_identity(&running_example(), &[1.0, 0.0]).unwrap() <= 1e-12);
        assert!(verify_summing_identity(&cyclic_z1(), &[1.0 / 3.0]).unwrap() <= 1e-12);
    }

    #[test]
    fn classes_up_to_sign() {
        let x = running_example();
        assert_eq!(minimal_classes(&arithmetical_minimum(&x).unwrap()).len(), 2);
    }
}
