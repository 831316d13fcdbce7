use augssl_core::apc::ApcModel;
use augssl_core::augment::pitch_shift;
use augssl_core::dsp::{log_mel, stft_magnitude};
use augssl_core::nn::{LstmStack, Matrix};
use augssl_core::{seed, AudioBuffer, MelConfig, StftConfig};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;

fn one_second() -> AudioBuffer {
    let mut rng = seed::rng(1);
    let s = (0..16_000)
        .map(|i| 0.3 * (i as f64 * 0.07).sin() + rng.gen_range(-0.05..0.05))
        .collect();
    AudioBuffer::new(s, 16_000).unwrap()
}

fn features(c: &mut Criterion) {
    let audio = one_second();
    let stft = StftConfig::default();
    let mel = MelConfig::default();
    c.bench_function("stft_1s", |b| b.iter(|| stft_magnitude(&audio, &stft).unwrap()));
    c.bench_function("log_mel_1s", |b| b.iter(|| log_mel(&audio, &stft, &mel).unwrap()));
}

fn lstm(c: &mut Criterion) {
    let mut rng = seed::rng(2);
    let stack = LstmStack::new(80, 128, 3, true, &mut rng);
    let x = Matrix::from_vec(100, 80, (0..8000).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let g = Matrix::from_vec(100, 128, (0..12_800).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    c.bench_function("lstm3x128_forward_100", |b| b.iter(|| stack.forward(&x).unwrap()));
    let (_, cache) = stack.forward(&x).unwrap();
    c.bench_function("lstm3x128_backward_100", |b| {
        b.iter(|| stack.backward(&cache, &g).unwrap())
    });
    let model = ApcModel::new(80, 128, 3, 3);
    c.bench_function("apc_loss_grad_100", |b| b.iter(|| model.loss(&x, 3).unwrap()));
}

fn pitch(c: &mut Criterion) {
    let audio = one_second();
    c.bench_function("pitch_shift_1s", |b| b.iter(|| pitch_shift(&audio, 1.5).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = features, lstm, pitch
}
criterion_main!(benches);
