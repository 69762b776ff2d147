//! Standard Gram matrices of classical lattices.

use crate::error::{Error, Result};
use crate::form::{PeriodicForm, Pqf};

/// Names accepted by [`fixture`] besides `Z:<d>`.
pub const NAMED: [&str; 5] = ["A2", "A3", "D3", "D4", "E8"];

/// Gram matrix of a Dynkin-type root lattice given by its edges; every
/// simple root has norm 2.
fn cartan(dim: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; dim]; dim];
    for (k, row) in g.iter_mut().enumerate() {
        row[k] = 2.0;
    }
    for &(a, b) in edges {
        g[a][b] = -1.0;
        g[b][a] = -1.0;
    }
    g
}

/// Gram matrix for a fixture name: `Z:<d>` (or `Zd:<d>`), `A2`, `A3`, `D3`,
/// `D4` or `E8`.
pub fn gram(name: &str) -> Result<Vec<Vec<f64>>> {
    let trimmed = name.trim();
    if let Some(rest) = trimmed.strip_prefix("Zd:").or_else(|| trimmed.strip_prefix("Z:")) {
        let d: usize = rest.parse().map_err(|_| Error::UnknownFixture(name.to_string()))?;
        if d == 0 {
            return Err(Error::UnknownFixture(name.to_string()));
        }
        return Ok((0..d).map(|r| (0..d).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect());
    }
    let g = match trimmed {
        "A2" => vec![vec![2.0, 1.0], vec![1.0, 2.0]],
        "A3" => cartan(3, &[(0, 1), (1, 2)]),
        // Basis e1 - e2, e2 - e3, e2 + e3.
        "D3" => cartan(3, &[(0, 1), (0, 2)]),
        "D4" => cartan(4, &[(0, 1), (1, 2), (1, 3)]),
        // Bourbaki labelling: 1-3-4-5-6-7-8 with 2 attached to 4.
        "E8" => cartan(8, &[(0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (1, 3)]),
        _ => return Err(Error::UnknownFixture(name.to_string())),
    };
    Ok(g)
}

/// The fixture as an `m = 1` periodic form.
pub fn fixture(name: &str) -> Result<PeriodicForm> {
    Ok(PeriodicForm::lattice(Pqf::from_rows(&gram(name)?)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minima::arithmetical_minimum;

    #[test]
    fn determinants() {
        for (name, det) in [("A2", 3.0), ("A3", 4.0), ("D3", 4.0), ("D4", 4.0), ("E8", 1.0), ("Z:5", 1.0)] {
            let x = fixture(name).unwrap();
            assert!((x.q().det() - det).abs() < 1e-10, "{name}");
        }
    }

    #[test]
    fn kissing_numbers() {
        for (name, kiss) in [("A2", 6), ("A3", 12), ("D3", 12), ("D4", 24), ("Z:3", 6)] {
            let min = arithmetical_minimum(&fixture(name).unwrap()).unwrap();
            assert_eq!(min.min_count(), kiss, "{name}");
        }
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(fixture("B7"), Err(Error::UnknownFixture(_))));
        assert!(matches!(fixture("Z:0"), Err(Error::UnknownFixture(_))));
        assert!(matches!(fixture("Z:x"), Err(Error::UnknownFixture(_))));
    }
}
