//! Gradients of the minimum polynomials, the generalized Voronoi domain,
//! m-perfection, m-eutaxy, and the isolated-extremeness verdict.

mod domain;
mod eutaxy;
mod lift;

pub use domain::{
    gradient, gradient_at, is_m_perfect, orthogonal_complement, sym_block_rank, voronoi_domain, Perfection,
    VoronoiDomain,
};
pub use eutaxy::{
    certificate_for, eutaxy_target, is_m_eutactic, test_eutaxy, EutaxyCertificate, EutaxyTest, INTERIOR_THRESHOLD,
    RESIDUAL_TOLERANCE, SPAN_TOLERANCE,
};
pub use lift::{lift_eutaxy, minimal_classes, verify_cycle_partition, verify_summing_identity, LatticeEutaxy};

use crate::error::Result;
use crate::form::{PeriodicForm, Pqf};
use crate::minima::{arithmetical_minimum, MinimumResult};

/// Outcome of the sufficient test for isolated m-extremeness. A negative
/// `isolated_m_extreme` means "not certified", never "not extreme".
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub m: usize,
    pub m_perfect: Perfection,
    /// Optimum of the interior LP, `None` when the target left the span.
    pub s_star: Option<f64>,
    pub m_eutactic: Option<EutaxyCertificate>,
    pub isolated_m_extreme: bool,
    pub notes: Vec<String>,
}

pub fn certify_isolated_extreme(x: &PeriodicForm) -> Result<Verdict> {
    let min = arithmetical_minimum(x)?;
    certify_with_minimum(x, &min)
}

/// As [`certify_isolated_extreme`], reusing an already computed minimum.
pub fn certify_with_minimum(x: &PeriodicForm, min: &MinimumResult) -> Result<Verdict> {
    let domain = voronoi_domain(x, min)?;
    let perfection = is_m_perfect(&domain);
    let test = test_eutaxy(x, &domain)?;
    let mut notes = Vec::new();
    if !perfection.perfect {
        notes.push(format!(
            "rank deficit {}: V(X) has dimension {} of {}",
            perfection.required - perfection.rank,
            perfection.rank,
            perfection.required
        ));
    }
    match test.s_star {
        None => notes.push(format!("(Q^-1, 0) is not in the span of V(X) (residual {:.3e})", test.span_residual)),
        Some(s) if test.certificate.is_none() => {
            notes.push(format!("(Q^-1, 0) lies in the span but not the relative interior (s* = {s:.3e})"))
        }
        _ => {}
    }
    if !min.near_misses.is_empty() {
        notes.push(format!("{} near-miss triples within the reporting gap", min.near_misses.len()));
    }
    let isolated = perfection.perfect && test.certificate.is_some();
    Ok(Verdict {
        m: x.m(),
        m_perfect: perfection,
        s_star: test.s_star,
        m_eutactic: test.certificate,
        isolated_m_extreme: isolated,
        notes,
    })
}

/// Voronoi's characterization at `m = 1`: extreme iff perfect and eutactic.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeClassification {
    pub perfect: bool,
    pub eutactic: bool,
    pub extreme: bool,
    pub rank: usize,
    pub required: usize,
    pub s_star: Option<f64>,
    pub eutaxy: Option<LatticeEutaxy>,
}

pub fn classify_lattice(q: &Pqf) -> Result<LatticeClassification> {
    let x = PeriodicForm::lattice(q.clone());
    let min = arithmetical_minimum(&x)?;
    let domain = voronoi_domain(&x, &min)?;
    let perfection = is_m_perfect(&domain);
    let test = test_eutaxy(&x, &domain)?;
    let eutaxy = test.certificate.map(|c| LatticeEutaxy::from_domain(&domain, &c));
    Ok(LatticeClassification {
        perfect: perfection.perfect,
        eutactic: eutaxy.is_some(),
        extreme: perfection.perfect && eutaxy.is_some(),
        rank: perfection.rank,
        required: perfection.required,
        s_star: test.s_star,
        eutaxy,
    })
}

/// The eutaxy coefficients of `Q` per `±` class of `Min Q`, if `Q` is
/// eutactic.
pub fn lattice_eutaxy(q: &Pqf) -> Result<Option<LatticeEutaxy>> {
    Ok(classify_lattice(q)?.eutaxy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fixture;

    #[test]
    fn voronoi_characterization() {
        for (name, extreme, rank) in [("Z:2", false, 2), ("A2", true, 3), ("D4", true, 10), ("Z:3", false, 3)] {
            let c = classify_lattice(fixture(name).unwrap().q()).unwrap();
            assert_eq!(c.extreme, extreme, "{name}");
            assert_eq!(c.rank, rank, "{name}");
            assert!(c.eutactic, "{name}");
        }
    }

    #[test]
    fn verdicts() {
        let v = certify_isolated_extreme(&fixture("A2").unwrap()).unwrap();
        assert!(v.isolated_m_extreme);
        assert!(v.notes.is_empty());
        let v = certify_isolated_extreme(&fixture("Z:2").unwrap()).unwrap();
        assert!(!v.isolated_m_extreme);
        assert!(v.m_eutactic.is_some());
        assert!(v.notes[0].contains("rank deficit 1"));
    }
}
