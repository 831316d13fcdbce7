#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use augssl_core::audio_io::{generate_noise_corpus, generate_synth_corpus, NoiseCorpusSpec, SynthCorpusSpec};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// O(N²) DFT of `x` zero-padded to `n`.
pub fn naive_dft(x: &[f64], n: usize) -> Vec<Complex<f64>> {
    (0..n)
        .map(|k| {
            let mut acc = Complex::new(0.0, 0.0);
            for (t, &v) in x.iter().enumerate().take(n) {
                let ang = -2.0 * PI * (k * t % n) as f64 / n as f64;
                acc += Complex::new(v * ang.cos(), v * ang.sin());
            }
            acc
        })
        .collect()
}

pub fn sine(freq: f64, amp: f64, len: usize, sr: f64) -> Vec<f64> {
    (0..len)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / sr).sin())
        .collect()
}

/// Frequency of the strongest spectral peak, refined by parabolic
/// interpolation of the log magnitude around the peak bin.
pub fn peak_frequency(x: &[f64], sr: f64) -> f64 {
    let n = (x.len() * 8).next_power_of_two();
    let len = x.len();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (len - 1) as f64).cos();
            Complex::new(v * w, 0.0)
        })
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
    let k = (1..n / 2 - 1)
        .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
        .unwrap();
    let (a, b, c) = (mags[k - 1].ln(), mags[k].ln(), mags[k + 1].ln());
    let delta = 0.5 * (a - c) / (a - 2.0 * b + c);
    (k as f64 + delta) * sr / n as f64
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

pub fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Generates a synthetic corpus under `dir/prefix` and returns its manifest path.
pub fn synth(dir: &Path, prefix: &str, n: usize, duration_s: f64, seed: u64, formant_scale: f64) -> PathBuf {
    let spec = SynthCorpusSpec {
        num_utterances: n,
        utterance_duration_s: duration_s,
        num_phoneme_classes: 5,
        seed,
        id_prefix: prefix.to_string(),
        formant_scale,
        ..Default::default()
    };
    generate_synth_corpus(&spec, dir.join(prefix)).unwrap();
    dir.join(prefix).join("manifest.jsonl")
}

pub fn noise(dir: &Path, seed: u64) -> PathBuf {
    let spec = NoiseCorpusSpec {
        num_files: 3,
        duration_s: 2.5,
        seed,
        ..Default::default()
    };
    generate_noise_corpus(&spec, dir.join("noise")).unwrap();
    dir.join("noise").join("manifest.jsonl")
}
