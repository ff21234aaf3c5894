use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use wrmlab::cluster::{gilbert_graph, lattice_graph, region_area};
use wrmlab::env::sample_ppp;
use wrmlab::experiments::half_lattice_exact;
use wrmlab::wrm_lattice::{z_enum, z_transfer};
use wrmlab::{DiskRegion, LatticeBox, LatticeEnv, SpinWeights, Window};

fn partition_functions(c: &mut Criterion) {
    let w = SpinWeights::new(0.35, 0.25, 0.4).unwrap();
    let mut g = c.benchmark_group("z");
    for side in [4usize, 6, 8] {
        let bbox = LatticeBox::rect(side, side).unwrap();
        g.bench_with_input(BenchmarkId::new("transfer", side), &bbox, |b, bbox| {
            b.iter(|| z_transfer(black_box(bbox), &w).unwrap())
        });
    }
    let env = LatticeEnv::full(LatticeBox::rect(4, 3).unwrap());
    let graph = lattice_graph(&env);
    let all: Vec<usize> = (0..graph.num_vertices()).collect();
    g.bench_function("enum_4x3", |b| b.iter(|| z_enum(black_box(&all), &graph, &w).unwrap()));
    g.finish();
}

fn half_lattice(c: &mut Criterion) {
    let w = SpinWeights::symmetric(0.45).unwrap();
    let mut g = c.benchmark_group("half_lattice_exact");
    g.sample_size(10);
    for n in [2usize, 4] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| half_lattice_exact(&w, n).unwrap()));
    }
    g.finish();
}

fn geometry(c: &mut Criterion) {
    let cloud = sample_ppp(&Window::cube(2, 30.0).unwrap(), 1.0, 1).unwrap();
    c.bench_function("gilbert_graph_900", |b| b.iter(|| gilbert_graph(black_box(&cloud), 1.0).unwrap()));
    let mut region = DiskRegion::new(2);
    for i in 0..20 {
        let t = i as f64;
        region.push(&[0.7 * (t * 0.9).cos() + 0.3 * t, 0.5 * (t * 1.3).sin()], 0.4 + 0.02 * t).unwrap();
    }
    c.bench_function("union_area_20", |b| b.iter(|| region_area(black_box(&region), 1e-9).unwrap()));
}

criterion_group!(benches, partition_functions, half_lattice, geometry);
criterion_main!(benches);
