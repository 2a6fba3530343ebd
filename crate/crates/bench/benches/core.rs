use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use molgen_bench::{corpus, CORPUS};
use molgen_core::enumerate::{generate, GenerationConfig, Limits};
use molgen_core::features::{FeatureFamily, FeatureSchema};
use molgen_core::rules::RuleSet;
use molgen_core::{canonical_label, smiles};

fn canonical_labeling(c: &mut Criterion) {
    let graphs = corpus();
    c.bench_function("canonical_label/corpus", |b| {
        b.iter(|| graphs.iter().map(|g| canonical_label(black_box(g))).count())
    });
}

fn smiles_io(c: &mut Criterion) {
    let graphs = corpus();
    c.bench_function("smiles/parse", |b| b.iter(|| CORPUS.iter().map(|s| smiles::parse(black_box(s)).unwrap()).count()));
    c.bench_function("smiles/write", |b| b.iter(|| graphs.iter().map(|g| smiles::write(black_box(g))).count()));
}

fn generation(c: &mut Criterion) {
    let mut group = c.benchmark_group("generate");
    group.sample_size(10);
    for (name, pool, rules) in [
        ("C5N1O1", "C:5,N:1,O:1", RuleSet::empty()),
        ("C5N1O1_default_rules", "C:5,N:1,O:1", RuleSet::default_rules()),
        ("C7N2O2_10k_nodes", "C:7,N:2,O:2", RuleSet::empty()),
    ] {
        let mut config = GenerationConfig::new(pool.parse().unwrap());
        config.rules = rules;
        if name.ends_with("nodes") {
            config.limits = Limits::nodes(10_000);
        }
        group.bench_function(name, |b| {
            b.iter(|| {
                let mut n = 0u64;
                generate(&config, |_| n += 1).unwrap();
                n
            })
        });
    }
    group.finish();
}

fn encoding(c: &mut Criterion) {
    let graphs = corpus();
    let schema = FeatureSchema::build(&graphs, &FeatureFamily::standard()).unwrap();
    c.bench_function("encode/full", |b| b.iter(|| graphs.iter().map(|g| schema.encode(black_box(g))).count()));

    let parent = smiles::parse("CC(=O)OC1=CC=CC=C1C(=O)O").unwrap();
    let previous = schema.encode(&parent);
    let child = smiles::parse("CC(=O)OC1=CC=CC=C1C(=O)OC").unwrap();
    let leaf = child.atom_count() - 1;
    c.bench_function("encode/incremental_leaf", |b| {
        b.iter(|| schema.encode_extended(black_box(&previous), black_box(&child), leaf))
    });
}

criterion_group!(benches, canonical_labeling, smiles_io, generation, encoding);
criterion_main!(benches);
