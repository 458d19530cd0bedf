mod support;

use proptest::prelude::*;
use support::rng;
use tsad_core::data::{
    generate_sine_dataset, load_series, sample_start, save_series, NormStats, SineConfig, TimeSeries, TypicalKind,
};

#[test]
fn window_starts_uniform() {
    let s = TimeSeries::univariate("u", vec![0.0; 120]).unwrap();
    let mut r = rng(11);
    let mut counts = vec![0u64; 101];
    for _ in 0..10_000 {
        counts[sample_start(&s, 20, &mut r).unwrap()] += 1;
    }
    let expected = 10_000.0 / 101.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 0.999 quantile of chi-square with 100 degrees of freedom
    assert!(chi2 < 149.45, "{chi2}");
}

#[test]
fn windows_respect_boundaries() {
    let s = TimeSeries::univariate("b", vec![0.0; 100]).unwrap().with_boundaries(vec![50]).unwrap();
    let mut r = rng(12);
    for _ in 0..5000 {
        let st = sample_start(&s, 30, &mut r).unwrap();
        assert!(st + 30 <= 50 || st >= 50, "window at {st} crosses 50");
    }
}

#[test]
fn sine_labels_mark_exactly_the_changed_points() {
    let cfg = SineConfig {
        train_len: 1000,
        ..Default::default()
    };
    let data = generate_sine_dataset(&cfg).unwrap();
    for kind in TypicalKind::ALL {
        let t = data.test(kind);
        let labels = t.labels().unwrap();
        let frac = labels.iter().filter(|&&l| l == 1).count() as f64 / labels.len() as f64;
        assert!((frac - 0.05).abs() <= 0.01, "{kind}: {frac}");
    }
    assert!(data.train.labels().map_or(true, |l| l.iter().all(|&v| v == 0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_exact(
        rows in 1usize..20,
        cols in 1usize..4,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut r = rng(seed);
        let values: Vec<f64> = (0..rows * cols).map(|_| r.random_range(-1e6..1e6) * r.random::<f64>()).collect();
        let labels: Vec<u8> = (0..rows).map(|_| u8::from(r.random_bool(0.3))).collect();
        let s = TimeSeries::new("p", (0..cols).map(|c| format!("x{c}")).collect(), values)
            .unwrap()
            .with_labels(labels)
            .unwrap();
        let dir = std::env::temp_dir().join(format!("tsad-prop-{}-{seed}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.csv");
        save_series(&s, &path).unwrap();
        let back = load_series(&path).unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
        prop_assert_eq!(back.values(), s.values());
        prop_assert_eq!(back.labels(), s.labels());
        prop_assert_eq!(back.column_names, s.column_names);
    }

    #[test]
    fn normalization_uses_training_statistics(shift in -100.0f64..100.0, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = rng(seed);
        let train = TimeSeries::univariate("t", (0..200).map(|_| r.random_range(-3.0..3.0)).collect()).unwrap();
        let stats = NormStats::fit(&train).unwrap();
        let test = TimeSeries::univariate("s", train.values().iter().map(|v| v + shift).collect()).unwrap();
        let a = stats.apply(&train).unwrap();
        let b = stats.apply(&test).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((y - x - shift / stats.std[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn sine_generation_reproducible(seed in 0u64..1000) {
        let cfg = SineConfig { seed, train_len: 600, test_len: 400, ..Default::default() };
        let a = generate_sine_dataset(&cfg).unwrap();
        let b = generate_sine_dataset(&cfg).unwrap();
        prop_assert_eq!(a.train, b.train);
        prop_assert_eq!(a.tests, b.tests);
    }
}
