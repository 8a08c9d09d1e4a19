use criterion::{black_box, criterion_group, criterion_main, Criterion};

use qgharvest::extractor::{log_partition, viterbi};
use qgharvest::harvest::default_resolver;
use qgharvest::numerics::{lstm_step, LstmCellParams, RngState, Tensor};
use qgharvest::qg::{build_qg_vocab, instances_from_squad, QgConfig, QgNet};
use qgharvest::synthetic::desk_corpus;

fn crf(c: &mut Criterion) {
    let mut rng = RngState::new(1);
    let em = Tensor::uniform(&mut rng, &[40, 3], -2.0, 2.0);
    let tr = Tensor::uniform(&mut rng, &[5, 5], -2.0, 2.0);
    c.bench_function("crf forward n=40", |b| b.iter(|| log_partition(black_box(&em), black_box(&tr)).unwrap()));
    c.bench_function("crf viterbi n=40", |b| b.iter(|| viterbi(black_box(&em), black_box(&tr)).unwrap()));
}

fn lstm(c: &mut Criterion) {
    let mut rng = RngState::new(2);
    let p = LstmCellParams::uniform(&mut rng, 64, 64, 0.1);
    let x: Vec<f64> = (0..64).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let h = vec![0.1; 64];
    c.bench_function("lstm step 64x64", |b| b.iter(|| lstm_step(black_box(&x), &h, &h, &p).unwrap()));
}

fn decode(c: &mut Criterion) {
    let corpus = desk_corpus().unwrap();
    let (instances, _) = instances_from_squad(&corpus, &default_resolver());
    let vocab = build_qg_vocab(&instances, 200);
    let (net, store) = QgNet::build(QgConfig::desk(), vocab, &mut RngState::new(3)).unwrap();
    let src = &instances[0].source;
    let enc = net.encode(&store, src).unwrap();
    let dv = net.dynamic_vocab(src);
    c.bench_function("qg encode (desk)", |b| b.iter(|| net.encode(&store, black_box(src)).unwrap()));
    c.bench_function("qg decode step (desk)", |b| {
        b.iter(|| net.decode_step(&store, &enc, &dv, qgharvest::corpus::SOS, black_box(&enc.init_state)).unwrap())
    });
    c.bench_function("qg beam-3 generate (desk)", |b| b.iter(|| net.generate(&store, black_box(src), 3).unwrap()));
}

criterion_group!(benches, crf, lstm, decode);
criterion_main!(benches);
