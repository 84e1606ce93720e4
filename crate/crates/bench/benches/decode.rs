use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use datlen_bench::lattice_set;
use datlen_core::{pathmap_decode, seqmap_decode, Conventions, DecodeConfig};

fn objectives(c: &mut Criterion) {
    let mut group = c.benchmark_group("decode");
    for (steps, vocab, length) in [(32, 50, 8), (64, 100, 12)] {
        let lattices = lattice_set(16, steps, vocab, 0);
        let label = format!("S{steps}_V{vocab}_T{length}");
        group.throughput(Throughput::Elements(lattices.len() as u64));
        group.bench_with_input(BenchmarkId::new("pathmap", &label), &lattices, |b, set| {
            b.iter(|| {
                for lattice in set {
                    pathmap_decode(lattice, length, Conventions::default()).unwrap();
                }
            })
        });
        let config = DecodeConfig::new(length);
        group.bench_with_input(BenchmarkId::new("seqmap", &label), &lattices, |b, set| {
            b.iter(|| {
                for lattice in set {
                    seqmap_decode(lattice, &config).unwrap();
                }
            })
        });
    }
    group.finish();
}

fn beam_width(c: &mut Criterion) {
    let mut group = c.benchmark_group("seqmap_beam");
    let lattices = lattice_set(8, 32, 50, 100);
    for beam in [5, 20, 80] {
        let config = DecodeConfig::new(8).with_beam(beam, 5);
        group.bench_with_input(BenchmarkId::from_parameter(beam), &lattices, |b, set| {
            b.iter(|| {
                for lattice in set {
                    seqmap_decode(lattice, &config).unwrap();
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, objectives, beam_width);
criterion_main!(benches);
