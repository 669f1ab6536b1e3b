//! Parallel vs sequential lanes on the crate's embarrassingly-parallel
//! sweeps: contention seed batches, load-profile matrices and certificate
//! mutation scans.
//!
//! Both lanes produce identical results (asserted in tests); these benches
//! measure what rayon buys at each sweep size.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use corral_core::loadgen::{run_matrix, run_matrix_seq, LoadProfile};
use corral_core::par;
use corral_core::workload::{run_contention_batch, run_contention_batch_seq, ContentionConfig};

fn contention_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("contention_seed_sweep");
    group.sample_size(10);
    let base = ContentionConfig {
        users: 8,
        robots: 4,
        submissions: 300,
        seed: 0,
    };
    for seeds in [4u64, 16] {
        group.bench_with_input(BenchmarkId::new("parallel", seeds), &seeds, |b, &n| {
            b.iter(|| black_box(run_contention_batch(base, 0..n).len()))
        });
        group.bench_with_input(BenchmarkId::new("sequential", seeds), &seeds, |b, &n| {
            b.iter(|| black_box(run_contention_batch_seq(base, 0..n).len()))
        });
    }
    group.finish();
}

fn load_matrix_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("load_matrix");
    group.sample_size(10);
    let profiles: Vec<LoadProfile> = [1.0, 10.0, 25.0, 50.0, 75.0, 100.0]
        .into_iter()
        .map(|rate| {
            let mut p = LoadProfile::new(rate, 1, true);
            p.duration_s = 10.0;
            p
        })
        .collect();
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(run_matrix(profiles.clone())))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(run_matrix_seq(profiles.clone())))
    });
    group.finish();
}

fn certificate_mutation_sweep(c: &mut Criterion) {
    use corral_core::identity::{CaKeyring, Certificate, CertificateAuthority};

    let ca = CertificateAuthority::from_seed("Org1", 1).unwrap();
    let mut ring = CaKeyring::new();
    ring.register_ca(&ca);
    let cert = ca.issue("salma", ["turtlebot4", "husky", "optitrack"]).unwrap();
    let bytes = cert.to_bytes();
    let cases: Vec<(usize, u8)> = (0..2000)
        .map(|i| (i % bytes.len(), 1 + (i % 255) as u8))
        .collect();

    let check = move |ring: &CaKeyring, bytes: &[u8], (pos, delta): (usize, u8)| {
        let mut mutated = bytes.to_vec();
        mutated[pos] = mutated[pos].wrapping_add(delta);
        Certificate::from_bytes(&mutated)
            .map(|c| ring.verify(&c))
            .unwrap_or(false)
    };

    let mut group = c.benchmark_group("certificate_mutation_sweep");
    group.sample_size(10);
    {
        let ring = ring.clone();
        let bytes = bytes.clone();
        let cases = cases.clone();
        group.bench_function("parallel", |b| {
            b.iter(|| {
                let survivors = par::map_collect(cases.clone(), |case| check(&ring, &bytes, case));
                black_box(survivors.into_iter().filter(|v| *v).count())
            })
        });
    }
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let survivors = par::map_collect_seq(cases.clone(), |case| check(&ring, &bytes, case));
            black_box(survivors.into_iter().filter(|v| *v).count())
        })
    });
    group.finish();
}

criterion_group!(benches, contention_sweep, load_matrix_sweep, certificate_mutation_sweep);
criterion_main!(benches);
