use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use voxmesh_bench::random_points_3d;
use voxmesh_core::spatial::downsample_grid;
use voxmesh_core::KnnStore;

fn knn(c: &mut Criterion) {
    let mut group = c.benchmark_group("knn");
    for n in [10_000, 100_000] {
        let pts = random_points_3d(n, 50.0, 1);
        group.bench_with_input(BenchmarkId::new("insert", n), &pts, |b, pts| {
            b.iter(|| {
                let mut store = KnnStore::new();
                for (i, p) in pts.iter().enumerate() {
                    store.insert(i as u32, *p);
                }
                store
            })
        });
        let store = KnnStore::from_points(pts.iter().enumerate().map(|(i, p)| (i as u32, *p)));
        let queries = random_points_3d(1000, 50.0, 2);
        group.bench_with_input(BenchmarkId::new("nearest_1000", n), &queries, |b, qs| {
            b.iter(|| qs.iter().map(|q| store.nearest(q).unwrap().1).sum::<f64>())
        });
        group.bench_with_input(BenchmarkId::new("radius_0.6_1000", n), &queries, |b, qs| {
            b.iter(|| qs.iter().map(|q| store.radius(q, 0.6).len()).sum::<usize>())
        });
    }
    group.finish();
}

fn downsample(c: &mut Criterion) {
    let pts = random_points_3d(200_000, 30.0, 3);
    c.bench_function("downsample_grid_200k", |b| b.iter(|| downsample_grid(&pts, 0.1)));
}

criterion_group!(benches, knn, downsample);
criterion_main!(benches);
