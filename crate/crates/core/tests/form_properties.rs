use approx::assert_relative_eq;
use nalgebra::DMatrix;
use periodic_forms::form::reduce_mod_one;
use periodic_forms::{arithmetical_minimum, density, inner_product, packing_density, PeriodicForm, Pqf, SdmVector};
use periodic_forms_testkit::{random_form, random_unimodular, unimodular_inverse};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_sdm(rng: &mut ChaCha8Rng, d: usize, m: usize) -> SdmVector {
    let mut sym = DMatrix::zeros(d, d);
    for r in 0..d {
        for c in r..d {
            let e = rng.random_range(-1.0..1.0);
            sym[(r, c)] = e;
            sym[(c, r)] = e;
        }
    }
    SdmVector::new(sym, DMatrix::from_fn(d, m - 1, |_, _| rng.random_range(-1.0..1.0))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_symmetric_bilinear_and_positive(seed in any::<u64>(), d in 1usize..4, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y, z) = (random_sdm(&mut rng, d, m), random_sdm(&mut rng, d, m), random_sdm(&mut rng, d, m));
        let a: f64 = rng.random_range(-3.0..3.0);
        let xy = inner_product(&x, &y).unwrap();
        prop_assert!((xy - inner_product(&y, &x).unwrap()).abs() < 1e-12);
        let lhs = inner_product(&(&(&x * a) + &z), &y).unwrap();
        let rhs = a * xy + inner_product(&z, &y).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
        prop_assert!(inner_product(&x, &x).unwrap() > 0.0);
        // The flat embedding is an isometry.
        prop_assert!((x.flatten().dot(&y.flatten()) - xy).abs() < 1e-10);
    }

    #[test]
    fn density_is_scale_invariant(seed in any::<u64>(), d in 1usize..4, m in 1usize..4, c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_form(&mut rng, d, m, 1.0, 5.0);
        let min = arithmetical_minimum(&x).unwrap();
        let y = x.with_q(x.q().scaled(c).unwrap()).unwrap();
        let scaled = arithmetical_minimum(&y).unwrap();
        prop_assert!((scaled.lambda - c * min.lambda).abs() <= 1e-9 * c * min.lambda);
        prop_assert!((density(&y, c * min.lambda) - density(&x, min.lambda)).abs() < 1e-12);
    }

    #[test]
    fn density_is_invariant_under_unimodular_change_of_basis(seed in any::<u64>(), d in 1usize..4, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_form(&mut rng, d, m, 1.0, 5.0);
        let u = random_unimodular(&mut rng, d);
        let u_inv = unimodular_inverse(&u).map(|e| e as f64);
        let translates = x.translates().iter().map(|t| (&u_inv * t).iter().copied().collect()).collect();
        let y = PeriodicForm::new(x.q().transformed(&u).unwrap(), translates).unwrap();
        let (lx, ly) = (arithmetical_minimum(&x).unwrap(), arithmetical_minimum(&y).unwrap());
        prop_assert!((lx.lambda - ly.lambda).abs() <= 1e-9 * lx.lambda);
        prop_assert_eq!(lx.min_count(), ly.min_count());
        prop_assert!((packing_density(&x).unwrap() - packing_density(&y).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn translate_reduction_is_idempotent(x in -1e6f64..1e6) {
        let r = reduce_mod_one(x);
        prop_assert!((0.0..1.0).contains(&r));
        prop_assert_eq!(reduce_mod_one(r), r);
    }
}

#[test]
fn density_examples() {
    let z2 = PeriodicForm::lattice(Pqf::identity(2));
    assert_relative_eq!(packing_density(&z2).unwrap(), std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
    // Points at Z/2 with balls of radius 1/4 tile the line.
    let x = PeriodicForm::new(Pqf::identity(1), vec![vec![0.5]]).unwrap();
    assert_relative_eq!(packing_density(&x).unwrap(), 1.0, epsilon = 1e-12);
}
