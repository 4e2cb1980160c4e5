use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seril::dsp::{istft, mix_at_snr, snr_db, stft, StftConfig, Waveform};

fn random_signal(seed: u64, len: usize) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Waveform::from_samples((0..len).map(|_| rng.gen_range(-0.9..0.9)).collect()).unwrap()
}

/// Direct O(N²) DFT of a real frame, bins 0..=N/2.
fn naive_dft(x: &[f64], n: usize) -> Vec<(f64, f64)> {
    (0..=n / 2)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, v)| {
                let a = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                (re + v * a.cos(), im + v * a.sin())
            })
        })
        .collect()
}

#[test]
fn stft_matches_direct_dft() {
    let cfg = StftConfig::default();
    let w = random_signal(1, 1200);
    let s = stft(&w, &cfg).unwrap();
    let win = cfg.window(16000);
    for t in [0, 1, s.num_frames() - 1] {
        let start = t * s.hop();
        let frame: Vec<f64> = w.samples()[start..start + win.len()]
            .iter()
            .zip(&win)
            .map(|(a, b)| a * b)
            .collect();
        for (k, (re, im)) in naive_dft(&frame, 512).into_iter().enumerate() {
            let c = s.frame(t)[k];
            assert!((c.re - re).abs() < 1e-9 && (c.im - im).abs() < 1e-9, "t {t} k {k}");
        }
    }
}

#[test]
fn per_frame_parseval_and_round_trip_over_100_signals() {
    let cfg = StftConfig::default();
    let win = cfg.window(16000);
    for seed in 0..100 {
        let len = 512 + (seed as usize * 97) % 4000;
        let w = random_signal(seed, len);
        let s = stft(&w, &cfg).unwrap();
        for t in 0..s.num_frames() {
            let start = t * s.hop();
            let time: f64 = w.samples()[start..start + win.len()]
                .iter()
                .zip(&win)
                .map(|(a, b)| (a * b).powi(2))
                .sum();
            let f = s.frame(t);
            // One-sided bins: DC and Nyquist once, the rest twice.
            let mut freq = f[0].norm_sqr() + f[256].norm_sqr();
            freq += 2.0 * f[1..256].iter().map(|c| c.norm_sqr()).sum::<f64>();
            freq /= 512.0;
            assert!((time - freq).abs() <= 1e-9 * time.max(1e-300), "seed {seed} frame {t}");
        }
        let back = istft(&s, &cfg).unwrap();
        let covered = back.len();
        let err: f64 = back
            .samples()
            .iter()
            .zip(&w.samples()[..covered])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = w.samples()[..covered].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 1e-6, "seed {seed}: relative error {}", err / norm);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stft_is_linear(sx in 0u64..1000, sy in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let cfg = StftConfig::default();
        let x = random_signal(sx, 1024);
        let y = random_signal(sy + 5000, 1024);
        let combo = Waveform::from_samples(
            x.samples().iter().zip(y.samples()).map(|(p, q)| a * p + b * q).collect(),
        ).unwrap();
        let (sx, sy, sc) = (stft(&x, &cfg).unwrap(), stft(&y, &cfg).unwrap(), stft(&combo, &cfg).unwrap());
        for ((p, q), c) in sx.frames().iter().zip(sy.frames()).zip(sc.frames()) {
            let expect = p * a + q * b;
            prop_assert!((expect - c).norm() < 1e-9);
        }
    }

    #[test]
    fn mix_hits_requested_snr(seed in 0u64..10_000, snr in -10.0f64..20.0) {
        let clean = random_signal(seed, 800);
        let noise = random_signal(seed + 1, 1600);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy = mix_at_snr(&clean, &noise, snr, &mut rng).unwrap();
        let residual: Vec<f64> = noisy.samples().iter().zip(clean.samples()).map(|(n, c)| n - c).collect();
        prop_assert!((snr_db(clean.samples(), &residual) - snr).abs() < 0.01);
    }
}
