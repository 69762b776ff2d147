use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use super::domain::VoronoiDomain;
use crate::error::{Error, Result};
use crate::form::{PeriodicForm, SdmVector};
use crate::linalg::{column_space, min_norm_solve, RANK_TOLERANCE};

/// Relative residual allowed when expressing `(Q^{-1}, 0)` over the generators.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Relative distance of the target from the span of `V(X)` tolerated by the
/// least-squares stage.
pub const SPAN_TOLERANCE: f64 = 1e-8;
/// The max-min coefficient over unit generators must exceed this.
pub const INTERIOR_THRESHOLD: f64 = 1e-9;

/// Strictly positive coefficients expressing `(Q^{-1}, 0)` over the
/// generators of `V(X)`, one per generator.
#[derive(Debug, Clone, PartialEq)]
pub struct EutaxyCertificate {
    pub coefficients: Vec<f64>,
    /// `|sum_g alpha_g g - (Q^{-1}, 0)| / |(Q^{-1}, 0)|`.
    pub residual: f64,
    pub min_coefficient: f64,
    /// Optimum of the interior LP, when the certificate came from it.
    pub s_star: Option<f64>,
}

impl EutaxyCertificate {
    pub fn is_valid(&self) -> bool {
        self.min_coefficient > 0.0 && self.residual <= RESIDUAL_TOLERANCE
    }
}

/// Outcome of the two-stage relative-interior test.
#[derive(Debug, Clone, PartialEq)]
pub struct EutaxyTest {
    pub span_residual: f64,
    /// `None` when the target is not in the span of the generators.
    pub s_star: Option<f64>,
    pub certificate: Option<EutaxyCertificate>,
}

/// `(Q^{-1}, 0)`.
pub fn eutaxy_target(x: &PeriodicForm) -> SdmVector {
    SdmVector::new(x.q().inverse(), DMatrix::zeros(x.dim(), x.m() - 1)).expect("inverse is symmetric")
}

/// Builds a certificate for given coefficients, measuring the residual.
pub fn certificate_for(x: &PeriodicForm, domain: &VoronoiDomain, coefficients: Vec<f64>) -> EutaxyCertificate {
    let target = eutaxy_target(x).flatten();
    let combo = domain.matrix() * DVector::from_column_slice(&coefficients);
    let residual = (combo - &target).norm() / target.norm();
    let min_coefficient = coefficients.iter().copied().fold(f64::INFINITY, f64::min);
    EutaxyCertificate { coefficients, residual, min_coefficient, s_star: None }
}

/// Decides whether `(Q^{-1}, 0)` lies in the relative interior of `V(X)`.
///
/// Stage one projects the target onto the span of the generators. Stage two
/// solves `max s` subject to `sum_g alpha_g g = target` (restricted to the
/// span) and `alpha_g >= s`, with generators scaled to unit norm. The target
/// is interior exactly when `s* > 0`.
pub fn test_eutaxy(x: &PeriodicForm, domain: &VoronoiDomain) -> Result<EutaxyTest> {
    let b = eutaxy_target(x).flatten();
    let g = domain.matrix();
    let n = g.ncols();
    if n == 0 {
        return Ok(EutaxyTest { span_residual: 1.0, s_star: None, certificate: None });
    }
    let span = column_space(&g, RANK_TOLERANCE);
    let projected = &span * (span.transpose() * &b);
    let span_residual = (&b - projected).norm() / b.norm();
    if span_residual > SPAN_TOLERANCE {
        return Ok(EutaxyTest { span_residual, s_star: None, certificate: None });
    }

    let norms: Vec<f64> = (0..n).map(|k| g.column(k).norm()).collect();
    let mut unit = g.clone();
    for (k, norm) in norms.iter().enumerate() {
        unit.column_mut(k).scale_mut(1.0 / norm);
    }
    let a = span.transpose() * &unit;
    let rhs = span.transpose() * &b;

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let alphas: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let s = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for row in 0..a.nrows() {
        let terms: Vec<_> = alphas.iter().enumerate().map(|(k, &var)| (var, a[(row, k)])).collect();
        lp.add_constraint(terms, ComparisonOp::Eq, rhs[row]);
    }
    for &alpha in &alphas {
        lp.add_constraint([(alpha, 1.0), (s, -1.0)], ComparisonOp::Ge, 0.0);
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::LpFailure(e.to_string()))?
        .into_solution()
        .map_err(|e| Error::LpFailure(format!("interrupted: {:?}", e.termination_reason())))?;
    let s_star = solution.var_value(s);
    if s_star <= INTERIOR_THRESHOLD {
        return Ok(EutaxyTest { span_residual, s_star: Some(s_star), certificate: None });
    }

    let mut alpha =
        DVector::from_iterator(n, alphas.iter().zip(&norms).map(|(&var, norm)| solution.var_value(var) / norm));
    // Remove the LP's rounding residue with a minimum-norm correction.
    let residue = &b - &g * &alpha;
    alpha += min_norm_solve(&g, &residue, RANK_TOLERANCE);
    let mut certificate = certificate_for(x, domain, alpha.iter().copied().collect());
    certificate.s_star = Some(s_star);
    let certificate = certificate.is_valid().then_some(certificate);
    Ok(EutaxyTest { span_residual, s_star: Some(s_star), certificate })
}

/// The eutaxy certificate of `X`, if `X` is m-eutactic.
pub fn is_m_eutactic(x: &PeriodicForm, domain: &VoronoiDomain) -> Result<Option<EutaxyCertificate>> {
    Ok(test_eutaxy(x, domain)?.certificate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::domain::voronoi_domain;
    use crate::fixtures::fixture;
    use crate::form::Pqf;
    use crate::minima::arithmetical_minimum;
    use approx::assert_relative_eq;

    fn certificate(x: &PeriodicForm) -> Option<EutaxyCertificate> {
        let dom = voronoi_domain(x, &arithmetical_minimum(x).unwrap()).unwrap();
        is_m_eutactic(x, &dom).unwrap()
    }

    #[test]
    fn square_lattice_has_unit_coefficients() {
        let c = certificate(&fixture("Z:2").unwrap()).unwrap();
        assert_eq!(c.coefficients.len(), 2);
        for a in &c.coefficients {
            assert_relative_eq!(*a, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn hexagonal_lattice_has_equal_coefficients() {
        // Q^{-1} = 1/3 [[2,-1],[-1,2]] = sum of (1/3) x x^t over the three
        // minimal classes (1,0), (0,1), (1,-1).
        let c = certificate(&fixture("A2").unwrap()).unwrap();
        for a in &c.coefficients {
            assert_relative_eq!(*a, 1.0 / 3.0, epsilon = 1e-9);
        }
        assert!(c.residual < 1e-12);
    }

    #[test]
    fn index_two_refinement_is_eutactic() {
        let q = Pqf::from_rows(&[vec![1.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let x = PeriodicForm::new(q, vec![vec![0.0, 0.5]]).unwrap();
        let c = certificate(&x).unwrap();
        assert!(c.is_valid());
        assert_eq!(c.coefficients.len(), 4);
    }

    #[test]
    fn non_eutactic_form() {
        // A generic form with only one minimal pair is not eutactic.
        let q = Pqf::from_rows(&[vec![1.0, 0.3], vec![0.3, 1.7]]).unwrap();
        let x = PeriodicForm::lattice(q);
        let dom = voronoi_domain(&x, &arithmetical_minimum(&x).unwrap()).unwrap();
        let t = test_eutaxy(&x, &dom).unwrap();
        assert!(t.certificate.is_none());
        assert!(t.span_residual > SPAN_TOLERANCE);
    }

    #[test]
    fn boundary_target_is_not_interior() {
        // (I, 0) = 1 * I + 0 * e1 e1^t lies on a proper face of the cone.
        let x = fixture("Z:2").unwrap();
        let gens = vec![
            SdmVector::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 0)).unwrap(),
            SdmVector::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), DMatrix::zeros(2, 0)).unwrap(),
        ];
        let dom = VoronoiDomain::from_generators(2, 1, gens);
        let t = test_eutaxy(&x, &dom).unwrap();
        assert!(t.span_residual < 1e-12);
        assert!(t.s_star.unwrap() <= INTERIOR_THRESHOLD);
        assert!(t.certificate.is_none());
    }
}
