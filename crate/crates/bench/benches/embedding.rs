use btembed::harness::sampling::{random_dyck, random_tree};
use btembed::parse::{
    balanced_parens_rules, balanced_parens_schema, compile_rules, distinguished_attributes,
    grammar_from_specs, parse,
};
use btembed::rng::generator;
use btembed::transformer::{Transformer, XfConfig};
use btembed::{bt_encode, decode, make_embedding, DecodeConfig, Path, Schema};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn embedding(c: &mut Criterion) {
    let schema = Schema::generated(100, 4).unwrap();
    let mut g = c.benchmark_group("make_embedding");
    g.sample_size(10);
    for d in [250, 500, 1000] {
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, &d| {
            b.iter(|| make_embedding(&schema, d, 1).unwrap())
        });
    }
    g.finish();
}

fn encode_decode(c: &mut Criterion) {
    let e = make_embedding(&Schema::generated(100, 4).unwrap(), 1000, 1).unwrap();
    let mut rng = generator(2);
    let mut g = c.benchmark_group("trees_d1000");
    for l in [4, 8] {
        let t = random_tree(l, 100, 4, &mut rng);
        let v = bt_encode(&t, &e).unwrap();
        g.bench_with_input(BenchmarkId::new("encode", l), &t, |b, t| {
            b.iter(|| bt_encode(t, &e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("decode", l), &v, |b, v| {
            b.iter(|| decode(v, &e, &DecodeConfig::default()).unwrap())
        });
    }
    g.finish();
}

fn transformer(c: &mut Criterion) {
    let e = make_embedding(&Schema::generated(100, 4).unwrap(), 500, 1).unwrap();
    let model = Transformer::build(&e, 4, XfConfig::default()).unwrap();
    let mut rng = generator(3);
    let t = random_tree(8, 100, 4, &mut rng);
    let v = bt_encode(&t, &e).unwrap();
    let path = t
        .nodes()
        .into_iter()
        .map(|(p, _)| p)
        .filter(|p| p.len() <= 3)
        .max_by_key(Path::len)
        .unwrap();
    let mut g = c.benchmark_group("transformer_d500");
    g.sample_size(10);
    g.bench_function("run", |b| b.iter(|| model.run(&e, &v, &path).unwrap()));
    g.finish();
}

fn parsing(c: &mut Criterion) {
    let s = balanced_parens_schema();
    let e = make_embedding(&s, 1000, 1).unwrap();
    let grammar = grammar_from_specs(&balanced_parens_rules(), &s).unwrap();
    let (next, args) = distinguished_attributes(&s).unwrap();
    let rules = compile_rules(&grammar, &e, next, &args).unwrap();
    let (lt, rt) = (s.token("L").unwrap(), s.token("R").unwrap());
    let mut rng = generator(4);
    let mut g = c.benchmark_group("parse_d1000");
    g.sample_size(10);
    for len in [4, 8] {
        let tokens: Vec<_> = random_dyck(len, &mut rng)
            .into_iter()
            .map(|open| if open { lt } else { rt })
            .collect();
        g.bench_with_input(BenchmarkId::from_parameter(len), &tokens, |b, tokens| {
            b.iter(|| parse(tokens, &rules, &e, None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, embedding, encode_decode, transformer, parsing);
criterion_main!(benches);
