mod common;

use augssl_core::dsp::{
    hz_to_mel, log_mel, mel_filterbank, mel_power, real_fft, stft_magnitude, MelConfig, StftConfig,
};
use augssl_core::AudioBuffer;
use proptest::prelude::*;

use common::{naive_dft, sine};

fn buffer(samples: Vec<f64>) -> AudioBuffer {
    AudioBuffer::new(samples, 16_000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_matches_direct_dft(frame in prop::collection::vec(-1.0f64..1.0, 1..=400), size in prop::sample::select(vec![400usize, 512, 640])) {
        let fast = real_fft(&frame, size);
        let slow = naive_dft(&frame, size);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).norm() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn parseval(frame in prop::collection::vec(-1.0f64..1.0, 512)) {
        let spec = real_fft(&frame, 512);
        let e_freq: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / 512.0;
        let e_time: f64 = frame.iter().map(|x| x * x).sum();
        prop_assert!((e_freq - e_time).abs() <= 1e-9 * e_time.max(1.0));
    }

    #[test]
    fn frame_count_formula(n in 400usize..40_000, hop in prop::sample::select(vec![80usize, 160, 200])) {
        let cfg = StftConfig { hop_length: hop, ..Default::default() };
        // count windows by walking them
        let mut walked = 0;
        let mut start = 0;
        while start + cfg.window_length <= n {
            walked += 1;
            start += hop;
        }
        prop_assert_eq!(cfg.num_frames(n), walked);
        let m = stft_magnitude(&buffer(vec![0.0; n]), &cfg).unwrap();
        prop_assert_eq!(m.rows(), walked);
        prop_assert_eq!(m.cols(), 257);
    }

    #[test]
    fn delay_by_whole_hops_shifts_frames(x in prop::collection::vec(-0.5f64..0.5, 2000), k in 1usize..4) {
        let cfg = StftConfig::default();
        let mut delayed = vec![0.0; k * cfg.hop_length];
        delayed.extend_from_slice(&x);
        let a = stft_magnitude(&buffer(x), &cfg).unwrap();
        let b = stft_magnitude(&buffer(delayed), &cfg).unwrap();
        prop_assert_eq!(b.rows(), a.rows() + k);
        for t in 0..a.rows() {
            for (u, v) in a.row(t).iter().zip(b.row(t + k)) {
                prop_assert!((u - v).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn mel_power_is_quadratic_in_amplitude(x in prop::collection::vec(-0.4f64..0.4, 1200)) {
        let cfg = StftConfig::default();
        let mel = MelConfig::default();
        let p1 = mel_power(&buffer(x.clone()), &cfg, &mel).unwrap();
        let p2 = mel_power(&buffer(x.iter().map(|v| 2.0 * v).collect()), &cfg, &mel).unwrap();
        for (a, b) in p1.data().iter().zip(p2.data()) {
            prop_assert!((4.0 * a - b).abs() <= 1e-10 * b.abs().max(1e-12));
        }
    }
}

#[test]
fn mel_peaks_increase_and_match_centres() {
    let stft = StftConfig::default();
    let fb = mel_filterbank(&MelConfig::default(), &stft, 16_000).unwrap();
    let bin_hz = 16_000.0 / 512.0;
    let mut last = -1.0;
    for (m, centre) in fb.center_hz.iter().enumerate() {
        let row = fb.weights.row(m);
        let peak = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        let peak_hz = peak as f64 * bin_hz;
        assert!(peak_hz >= last, "filter {m} peak went backwards");
        assert!(
            (peak_hz - centre).abs() <= bin_hz,
            "filter {m}: peak {peak_hz} vs centre {centre}"
        );
        last = peak_hz;
    }
    // centres are evenly spaced on the mel scale
    let mels: Vec<f64> = fb.center_hz.iter().map(|&f| hz_to_mel(f)).collect();
    let step = mels[1] - mels[0];
    for w in mels.windows(2) {
        assert!((w[1] - w[0] - step).abs() < 1e-9);
    }
}

#[test]
fn tone_lights_up_nearest_filter() {
    let stft = StftConfig::default();
    let mel = MelConfig::default();
    let fb = mel_filterbank(&mel, &stft, 16_000).unwrap();
    for f in [300.0, 1000.0, 2500.0, 5000.0] {
        let feats = log_mel(&buffer(sine(f, 0.5, 16_000, 16_000.0)), &stft, &mel).unwrap();
        let row = feats.frames.row(50);
        let best = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        let nearest = (0..fb.center_hz.len())
            .min_by(|&a, &b| {
                (fb.center_hz[a] - f)
                    .abs()
                    .total_cmp(&(fb.center_hz[b] - f).abs())
            })
            .unwrap();
        assert!(
            best.abs_diff(nearest) <= 1,
            "{f} Hz: filter {best}, expected about {nearest}"
        );
    }
}

#[test]
fn silence_hits_the_log_floor() {
    let mel = MelConfig::default();
    let feats = log_mel(&buffer(vec![0.0; 1600]), &StftConfig::default(), &mel).unwrap();
    assert_eq!(feats.frames.shape(), (8, 80));
    assert!(feats.frames.data().iter().all(|&v| v == mel.log_floor.ln()));
    assert_eq!(feats.frame_rate, 100.0);
}
