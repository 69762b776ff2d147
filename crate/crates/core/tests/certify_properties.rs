use nalgebra::DMatrix;
use periodic_forms::certify::{
    certify_isolated_extreme, classify_lattice, gradient, is_m_perfect, lift_eutaxy, minimal_classes, sym_block_rank,
    test_eutaxy, verify_cycle_partition, verify_summing_identity, voronoi_domain,
};
use periodic_forms::fixtures::fixture;
use periodic_forms::floating::{enumerate_sublattices, refine_representation, translational_nullspace};
use periodic_forms::{arithmetical_minimum, PeriodicForm, Pqf};
use periodic_forms_testkit::{finite_difference_gradient, random_form, random_lattice_representation};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_valid_form(rng: &mut ChaCha8Rng) -> PeriodicForm {
    let d = rng.random_range(1..=3);
    let m = rng.random_range(1..=4);
    if rng.random::<bool>() {
        random_lattice_representation(rng, d, m, 1.0, 5.0)
    } else {
        random_form(rng, d, m, 1.0, 5.0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_valid_form(&mut rng);
        let x = x.with_q(x.q().scaled(1.0 / x.q().max_diagonal()).unwrap()).unwrap();
        for t in &arithmetical_minimum(&x).unwrap().triples {
            let g = gradient(&x, t).unwrap();
            let (sym, trans) = finite_difference_gradient(&x, t.i, t.j, &t.v, 1e-5);
            prop_assert!((g.sym() - sym).abs().max() < 1e-6);
            if x.m() > 1 {
                prop_assert!((g.trans() - trans).abs().max() < 1e-6);
            }
        }
    }

    #[test]
    fn cycle_partition_holds_on_enumeration_output(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_valid_form(&mut rng);
        let min = arithmetical_minimum(&x).unwrap();
        for w in minimal_classes(&min) {
            let parts = verify_cycle_partition(&x, &w);
            prop_assert!(parts.is_ok(), "{:?}", parts);
            let mut all: Vec<usize> = parts.unwrap().concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..x.m()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn interior_optimum_ignores_generator_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let name = ["Z:2", "A2", "A3", "D3", "D4"][rng.random_range(0..5)];
        let base = fixture(name).unwrap();
        let subs = enumerate_sublattices(base.dim(), 2).unwrap();
        let x = refine_representation(&base, &subs[rng.random_range(0..subs.len())]).unwrap();
        let domain = voronoi_domain(&x, &arithmetical_minimum(&x).unwrap()).unwrap();
        let mut order: Vec<usize> = (0..domain.len()).collect();
        order.shuffle(&mut rng);
        let a = test_eutaxy(&x, &domain).unwrap().s_star.unwrap();
        let b = test_eutaxy(&x, &domain.reordered(&order).unwrap()).unwrap().s_star.unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }
}

#[test]
fn lift_identity_for_eutactic_fixtures() {
    for name in ["Z:2", "Z:3", "A2", "A3", "D3", "D4"] {
        let base = fixture(name).unwrap();
        let q = base.q().clone();
        let eutaxy = classify_lattice(&q).unwrap().eutaxy.expect("classical lattices are eutactic");
        for m in 1..=4 {
            for s in enumerate_sublattices(q.dim(), m).unwrap() {
                let x = refine_representation(&base, &s).unwrap();
                let min = arithmetical_minimum(&x).unwrap();
                let domain = voronoi_domain(&x, &min).unwrap();
                let c = lift_eutaxy(&q, &eutaxy, &x, s.h(), &domain).unwrap();
                assert!(c.residual <= 1e-9 && c.min_coefficient > 0.0, "{name} {s}: {}", c.residual);
                for w in minimal_classes(&min) {
                    assert!(verify_summing_identity(&x, &w).unwrap() <= 1e-10, "{name} {s}");
                }
            }
        }
    }
}

#[test]
fn lift_of_hexagonal_index_two_refinements() {
    let base = fixture("A2").unwrap();
    let eutaxy = classify_lattice(base.q()).unwrap().eutaxy.unwrap();
    let subs = enumerate_sublattices(2, 2).unwrap();
    assert_eq!(subs.len(), 3);
    for s in subs {
        let x = refine_representation(&base, &s).unwrap();
        let domain = voronoi_domain(&x, &arithmetical_minimum(&x).unwrap()).unwrap();
        assert!(lift_eutaxy(base.q(), &eutaxy, &x, s.h(), &domain).unwrap().residual <= 1e-9);
    }
}

/// For perfect eutactic lattices, a refinement is perfect exactly when it has
/// no translational freedom and `V(X)^perp` never touches the Gram block.
#[test]
fn perfection_deficit_is_translational() {
    for name in ["A2", "A3", "D4"] {
        let base = fixture(name).unwrap();
        for m in 2..=3 {
            for s in enumerate_sublattices(base.dim(), m).unwrap() {
                let x = refine_representation(&base, &s).unwrap();
                let min = arithmetical_minimum(&x).unwrap();
                let domain = voronoi_domain(&x, &min).unwrap();
                let perfect = is_m_perfect(&domain).perfect;
                let rigid = translational_nullspace(&x, &min).basis.is_empty();
                let d = x.dim();
                let sym_full = sym_block_rank(&domain) == d * (d + 1) / 2;
                assert_eq!(perfect, rigid && sym_full, "{name} {s}");
            }
        }
    }
}

#[test]
fn certify_examples() {
    assert!(certify_isolated_extreme(&fixture("A2").unwrap()).unwrap().isolated_m_extreme);
    assert!(certify_isolated_extreme(&fixture("E8").unwrap()).unwrap().isolated_m_extreme);
    let z2 = certify_isolated_extreme(&fixture("Z:2").unwrap()).unwrap();
    assert!(!z2.isolated_m_extreme);
    assert_eq!((z2.m_perfect.rank, z2.m_perfect.required), (2, 3));

    let e8 = classify_lattice(fixture("E8").unwrap().q()).unwrap();
    assert!(e8.extreme);
    assert_eq!(e8.rank, 36);
    let d4 = classify_lattice(fixture("D4").unwrap().q()).unwrap();
    assert!(d4.extreme && d4.rank == 10);
}

#[test]
fn running_example_domain() {
    let q = Pqf::from_rows(&[vec![1.0, 0.0], vec![0.0, 4.0]]).unwrap();
    let x = PeriodicForm::new(q, vec![vec![0.0, 0.5]]).unwrap();
    let domain = voronoi_domain(&x, &arithmetical_minimum(&x).unwrap()).unwrap();
    let crossing: Vec<_> = (0..domain.len()).filter(|&k| domain.triple(k).i != domain.triple(k).j).collect();
    assert_eq!(crossing.len(), 2);
    for k in crossing {
        let g = &domain.generators()[k];
        assert_eq!(g.trans().column(0).iter().map(|e| e.abs()).collect::<Vec<_>>(), vec![0.0, 4.0]);
        assert_eq!(g.sym(), &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.25]));
    }
}
