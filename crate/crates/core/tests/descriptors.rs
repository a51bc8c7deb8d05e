use moldline::dataset::{Channel, CycleRecord, SignalTrace, ThermoImage};
use moldline::descriptors::{
    build_feature_matrix, extract_row, manifest, read_features_csv, sidecar_path, write_features_csv, DescriptorSource,
    ExtractConfig, FeaturesSidecar,
};
use moldline::rng;
use moldline::stats::{order_stats, STAT_NAMES};
use moldline::synth::{generate, SynthConfig};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn stat(name: &str) -> usize {
    STAT_NAMES.iter().position(|s| *s == name).unwrap()
}

fn flat_record(n: usize) -> CycleRecord {
    let traces = Channel::ALL.iter().map(|&c| SignalTrace::new(c, vec![1.5; n], 1000.0).unwrap()).collect();
    CycleRecord::new("flat", traces, ThermoImage::new(8, 8, vec![20.0; 64]).unwrap(), Some(99.0)).unwrap()
}

#[test]
fn one_to_five() {
    let s = order_stats(&[3.0, 1.0, 5.0, 2.0, 4.0]).unwrap().values;
    assert_eq!(s[stat("mean")], 3.0);
    assert_eq!(s[stat("median")], 3.0);
    assert!((s[stat("std")] - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!((s[stat("min")], s[stat("max")], s[stat("q75")]), (1.0, 5.0, 4.0));
    assert!((s[stat("q90")] - 4.6).abs() < 1e-12);
    assert_eq!(s[stat("skewness")], 0.0);
    // m4 / m2² − 3 with m2 = 2, m4 = 6.8.
    assert!((s[stat("kurtosis")] + 1.3).abs() < 1e-12);
}

#[test]
fn symmetric_sample_has_no_skew() {
    let v: Vec<f64> = (-50..=50).map(|i| (i as f64).powi(3) * 0.01).collect();
    assert!(order_stats(&v).unwrap().values[stat("skewness")].abs() < 1e-12);
}

#[test]
fn normal_sample_moments() {
    let mut r = rng::named(1, "normal");
    let v: Vec<f64> = (0..100_000).map(|_| r.sample(StandardNormal)).collect();
    let s = order_stats(&v).unwrap().values;
    assert!(s[stat("kurtosis")].abs() < 0.1, "{}", s[stat("kurtosis")]);
    assert!(s[stat("skewness")].abs() < 0.05);
    assert!(s[stat("mode")].abs() < 0.1, "{}", s[stat("mode")]);
    assert!((s[stat("q90")] - 1.2816).abs() < 0.03);
}

#[test]
fn manifest_has_108_named_columns() {
    let m = manifest(&ExtractConfig::default());
    assert_eq!(m.len(), 108);
    assert_eq!(m.indices_of(&[DescriptorSource::SignalRaw]).len(), 40);
    assert_eq!(m.indices_of(&[DescriptorSource::SignalCwtPeaks]).len(), 44);
    assert_eq!(m.indices_of(&[DescriptorSource::Image]).len(), 24);
    let mut names = m.names();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), 108);

    let only_pressure = ExtractConfig { cwt_channels: vec![Channel::InMoldPressure], ..Default::default() };
    assert_eq!(manifest(&only_pressure).len(), 40 + 11 + 24);
}

#[test]
fn no_peaks_gives_count_zero_and_missing_statistics() {
    let cfg = ExtractConfig::default();
    let m = manifest(&cfg);
    let row = extract_row(&flat_record(400), &cfg).unwrap();
    assert_eq!(row.len(), m.len());
    for (e, v) in m.entries.iter().zip(&row) {
        if e.name.ends_with(".peaks.count") {
            assert_eq!(*v, 0.0);
        } else if e.source == DescriptorSource::SignalCwtPeaks {
            assert!(v.is_nan(), "{}", e.name);
        } else {
            assert!(v.is_finite(), "{}", e.name);
        }
    }
    let col = |n: &str| row[m.names().iter().position(|x| x == n).unwrap()];
    assert_eq!(col("img.std"), 0.0);
    assert_eq!(col("img.haralick.energy"), 1.0);
    assert_eq!(col("img.haralick.contrast"), 0.0);
}

#[test]
fn extraction_is_deterministic_and_row_independent() {
    let cfg = SynthConfig { n_cycles: 6, image_side: 24, n_samples: 800, n_test: 1, ..Default::default() };
    let records = generate(&cfg, 4).unwrap().records;
    let a = build_feature_matrix(&records, &ExtractConfig::default()).unwrap();
    let b = build_feature_matrix(&records, &ExtractConfig::default()).unwrap();
    let bits = |m: &moldline::linalg::Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.values), bits(&b.values));
    let rev: Vec<CycleRecord> = records.iter().rev().cloned().collect();
    let c = build_feature_matrix(&rev, &ExtractConfig::default()).unwrap();
    for i in 0..6 {
        let x: Vec<u64> = a.values.row(i).iter().map(|v| v.to_bits()).collect();
        let y: Vec<u64> = c.values.row(5 - i).iter().map(|v| v.to_bits()).collect();
        assert_eq!(x, y);
    }
    // Two planted pressure peaks are found in every cycle.
    let k = a.manifest.names().iter().position(|n| n == "in_mold_pressure.peaks.count").unwrap();
    assert!((0..6).all(|i| a.values.get(i, k) == 2.0));
}

#[test]
fn features_csv_round_trip() {
    let cfg = SynthConfig { n_cycles: 4, image_side: 16, n_samples: 600, n_test: 1, ..Default::default() };
    let mut records = generate(&cfg, 9).unwrap().records;
    records.push(flat_record(600));
    let fm = build_feature_matrix(&records, &ExtractConfig::default()).unwrap();
    assert!(fm.imputed() > 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("features.csv");
    write_features_csv(&path, &fm, Some(&ExtractConfig::default())).unwrap();
    let back = read_features_csv(&path).unwrap();
    assert_eq!(back.cycle_ids, fm.cycle_ids);
    assert_eq!(back.manifest, fm.manifest);
    for (a, b) in fm.values.data().iter().zip(back.values.data()) {
        assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
    }
    let side: FeaturesSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(side.manifest_hash, fm.manifest.hash());

    std::fs::remove_file(sidecar_path(&path)).unwrap();
    assert_eq!(read_features_csv(&path).unwrap().manifest, fm.manifest);
}

proptest! {
    #[test]
    fn stats_ignore_order(v in prop::collection::vec(-1e3f64..1e3, 2..60), seed in any::<u64>()) {
        let mut w = v.clone();
        let mut r = rng::named(seed, "perm");
        for i in (1..w.len()).rev() {
            w.swap(i, r.random_range(0..=i));
        }
        let a = order_stats(&v).unwrap().values;
        let b = order_stats(&w).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn stats_follow_affine_maps(v in prop::collection::vec(-100.0f64..100.0, 3..60), a in 0.1f64..10.0, b in -50.0f64..50.0) {
        let s = order_stats(&v).unwrap();
        prop_assume!(s.values[stat("std")] > 1e-3);
        let t = order_stats(&v.iter().map(|x| a * x + b).collect::<Vec<_>>()).unwrap().values;
        let tol = |x: f64| 1e-8 * x.abs().max(1.0) * a.max(1.0);
        for name in ["mean", "median", "min", "max", "q75", "q90"] {
            let want = a * s.values[stat(name)] + b;
            prop_assert!((t[stat(name)] - want).abs() < tol(want), "{}", name);
        }
        prop_assert!((t[stat("std")] - a * s.values[stat("std")]).abs() < tol(a * s.values[stat("std")]));
        for name in ["skewness", "kurtosis"] {
            prop_assert!((t[stat(name)] - s.values[stat(name)]).abs() < 1e-6, "{}", name);
        }
    }
}
