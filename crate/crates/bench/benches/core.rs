use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_rational::BigRational;
use periodic_forms::certify::certify_isolated_extreme;
use periodic_forms::exact::{certify_exact, RationalForm};
use periodic_forms::fixtures::fixture;
use periodic_forms::floating::{enumerate_sublattices, refine_representation, strict_periodic_extreme_verdict};
use periodic_forms::arithmetical_minimum;
use periodic_forms::optimizer::{local_improve, SearchConfig};

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("arithmetical_minimum");
    for name in ["A2", "D4", "E8"] {
        let x = fixture(name).unwrap();
        group.bench_function(name, |b| b.iter(|| arithmetical_minimum(black_box(&x)).unwrap()));
    }
    let d4 = fixture("D4").unwrap();
    let s = &enumerate_sublattices(4, 4).unwrap()[0];
    let refined = refine_representation(&d4, s).unwrap();
    group.bench_function("D4 index 4", |b| b.iter(|| arithmetical_minimum(black_box(&refined)).unwrap()));
    group.finish();
}

fn certification(c: &mut Criterion) {
    let mut group = c.benchmark_group("certify");
    for name in ["A2", "D4", "E8"] {
        let x = fixture(name).unwrap();
        group.bench_function(name, |b| b.iter(|| certify_isolated_extreme(black_box(&x)).unwrap()));
    }
    let entries = [2, 1, 2].map(|e: i32| BigRational::from_integer(e.into())).to_vec();
    let a2 = RationalForm::from_upper_triangle(2, entries, Vec::new()).unwrap();
    group.bench_function("A2 exact", |b| b.iter(|| certify_exact(black_box(&a2)).unwrap()));
    group.finish();
}

fn refinement(c: &mut Criterion) {
    let mut group = c.benchmark_group("strict_periodic_extreme_verdict");
    group.sample_size(10);
    for (name, m_max) in [("Z:2", 2), ("A2", 4), ("D4", 3)] {
        let q = fixture(name).unwrap().q().clone();
        group.bench_function(format!("{name} m_max {m_max}"), |b| {
            b.iter(|| strict_periodic_extreme_verdict(black_box(&q), m_max).unwrap())
        });
    }
    group.finish();
}

fn optimization(c: &mut Criterion) {
    let mut group = c.benchmark_group("local_improve");
    group.sample_size(10);
    let cfg = SearchConfig { iters: 100, restarts: 2, ..SearchConfig::default() };
    for name in ["Z:2", "A2"] {
        let x = fixture(name).unwrap();
        group.bench_function(name, |b| b.iter(|| local_improve(black_box(&x), &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, enumeration, certification, refinement, optimization);
criterion_main!(benches);
