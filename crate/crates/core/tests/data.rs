//! Windowing, the `LRW1` container, label subsampling, synthetic data and the
//! dataset adapters on small on-disk fixtures.

use std::collections::BTreeMap;
use std::path::Path;

use lrcl_core::data::mmfit::{adapt_mmfit, read_table, MmfitConfig};
use lrcl_core::data::opportunity::{adapt_opportunity, OpportunityConfig};
use lrcl_core::data::{
    canonical, read_canonical, stratified_split, subsample_labels, synth_generate, window_stream, write_canonical,
    SynthConfig, WindowPair, WindowedDataset, UNLABELED,
};
use lrcl_core::{Error, Rng, Tensor};
use proptest::prelude::*;

fn random_dataset(seed: u64, count: usize, t: usize, classes: usize) -> WindowedDataset {
    let mut rng = Rng::new(seed);
    let window = |rng: &mut Rng| {
        Tensor::new([3, t], (0..3 * t).map(|_| rng.normal() as f32 * 1e3).collect()).unwrap()
    };
    let pairs = (0..count)
        .map(|i| WindowPair {
            left: window(&mut rng),
            right: window(&mut rng),
            label: if rng.below(5) == 0 { UNLABELED } else { rng.below(classes) as i32 },
            subject: rng.below(100) as i32 - 50,
            t0: i as i32 * 7,
        })
        .collect();
    let names = (0..classes).map(|c| format!("class {c} \u{e9}")).collect();
    WindowedDataset::new(pairs, 12.5, t, names, format!("seed {seed}")).unwrap()
}

proptest! {
    #[test]
    fn window_count_and_offsets(len in 1usize..400, win in 1usize..60, step in 1usize..40) {
        let stream = Tensor::new([2, len], (0..2 * len).map(|i| i as f32).collect()).unwrap();
        let rate = 10.0;
        let out = window_stream(&stream, win as f64 / rate, step as f64 / rate, rate);
        if len < win {
            prop_assert!(out.is_err());
        } else {
            let windows = out.unwrap();
            prop_assert_eq!(windows.len(), (len - win) / step + 1);
            for (k, w) in windows.iter().enumerate() {
                prop_assert_eq!(w.t0, k * step);
                prop_assert_eq!(w.data.shape(), &[2, win][..]);
                prop_assert_eq!(w.data.data()[0], (k * step) as f32);
                prop_assert_eq!(w.data.data()[win], (len + k * step) as f32);
            }
        }
    }

    #[test]
    fn canonical_round_trip_is_exact(seed in any::<u64>(), count in 0usize..12, t in 1usize..20) {
        let ds = random_dataset(seed, count, t, 3);
        let bytes = canonical::to_bytes(&ds).unwrap();
        prop_assert_eq!(bytes.len() - 8 - u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize,
            count * canonical::record_size(t));
        let back = canonical::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(canonical::to_bytes(&back).unwrap(), bytes);
    }

    #[test]
    fn any_truncation_is_corruption(seed in any::<u64>(), cut in 1usize..200) {
        let bytes = canonical::to_bytes(&random_dataset(seed, 3, 5, 2)).unwrap();
        let keep = bytes.len().saturating_sub(cut);
        let corrupt = matches!(canonical::from_bytes(&bytes[..keep]), Err(Error::Corrupt { .. }));
        prop_assert!(corrupt);
    }

    #[test]
    fn subsample_keeps_exact_counts(seed in any::<u64>(), k in 0usize..4) {
        let ds = random_dataset(seed, 60, 2, 3);
        let counts = ds.class_counts();
        let out = subsample_labels(&ds, k, &mut Rng::new(seed));
        if counts.iter().any(|&c| c < k) {
            let short = matches!(out, Err(Error::Count { .. }));
            prop_assert!(short);
        } else {
            let out = out.unwrap();
            prop_assert_eq!(out.class_counts(), vec![k; 3]);
            prop_assert_eq!(out.len(), ds.len());
            for (a, b) in out.pairs.iter().zip(&ds.pairs) {
                prop_assert!(a.label == UNLABELED || a.label == b.label);
                prop_assert!(a.left.bitwise_eq(&b.left));
            }
        }
    }

    #[test]
    fn stratified_split_partitions_each_class(seed in any::<u64>(), frac in 0.05f64..0.9) {
        let ds = random_dataset(seed, 80, 2, 4);
        let (train, val) = stratified_split(&ds, frac, &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(train.len() + val.len(), ds.len());
        prop_assert_eq!(val.pairs.iter().filter(|p| !p.is_labeled()).count(), 0);
        for (c, &n) in ds.class_counts().iter().enumerate() {
            let v = val.class_counts()[c];
            if n >= 2 {
                prop_assert_eq!(v, ((frac * n as f64).ceil() as usize).clamp(1, n - 1));
            } else {
                prop_assert_eq!(v, 0);
            }
        }
    }
}

#[test]
fn canonical_file_round_trip_and_magic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.lrw");
    let ds = random_dataset(3, 5, 8, 2);
    write_canonical(&ds, &path).unwrap();
    assert_eq!(&std::fs::read(&path).unwrap()[..4], b"LRW1");
    assert_eq!(read_canonical(&path).unwrap(), ds);
}

fn pearson(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mb = b.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x as f64 - ma, y as f64 - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

#[test]
fn synthetic_sides_are_strongly_correlated() {
    let cfg = SynthConfig {
        num_windows: 300,
        ..SynthConfig::default()
    };
    let ds = synth_generate(&cfg, &mut Rng::new(11)).unwrap();
    let t = cfg.window_len;
    let mut corr = Vec::new();
    for p in ds.pairs.iter().filter(|p| p.label != 0) {
        // Channels 1 and 2 are not mirrored.
        for ch in 1..3 {
            let r = ch * t..(ch + 1) * t;
            corr.push(pearson(&p.left.data()[r.clone()], &p.right.data()[r]));
        }
    }
    assert!(corr.len() >= 200);
    let mean = corr.iter().sum::<f64>() / corr.len() as f64;
    assert!(mean > 0.9, "mean correlation {mean}");
    assert_eq!(ds.class_counts(), vec![50; 6]);
}

/// Version 1.0 `.npy` bytes for a C-ordered 2-D little-endian array.
fn npy_bytes(descr: &str, rows: usize, cols: usize, payload: &[u8]) -> Vec<u8> {
    let mut header = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': ({rows}, {cols}), }}");
    while (10 + header.len() + 1) % 64 != 0 {
        header.push(' ');
    }
    header.push('\n');
    let mut out = b"\x93NUMPY\x01\x00".to_vec();
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(payload);
    out
}

fn write_npy_f64(path: &Path, rows: &[Vec<f64>]) {
    let payload: Vec<u8> = rows.iter().flatten().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, npy_bytes("<f8", rows.len(), rows[0].len(), &payload)).unwrap();
}

fn write_npy_f32(path: &Path, rows: &[Vec<f64>]) {
    let payload: Vec<u8> = rows.iter().flatten().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    std::fs::write(path, npy_bytes("<f4", rows.len(), rows[0].len(), &payload)).unwrap();
}

#[test]
fn npy_tables_read_in_both_widths() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![vec![1.0, 2.5, -3.0], vec![4.0, 5.0, 6.25]];
    write_npy_f64(&dir.path().join("a.npy"), &rows);
    write_npy_f32(&dir.path().join("b.npy"), &rows);
    assert_eq!(read_table(&dir.path().join("a.npy")).unwrap(), rows);
    assert_eq!(read_table(&dir.path().join("b.npy")).unwrap(), rows);
}

/// Workout 3: 1000 samples per side at 100 Hz, the right clock 3 ms late.
/// Frames 200..=599 are squats. Left x is the sample index, right x its
/// negation, so alignment can be read off the windows.
fn mmfit_fixture(root: &Path) {
    let dir = root.join("w03");
    std::fs::create_dir_all(&dir).unwrap();
    let side = |offset_ms: f64, sign: f64| -> Vec<Vec<f64>> {
        (0..1000).map(|i| vec![i as f64, 1000.0 + offset_ms + 10.0 * i as f64, sign * i as f64, 0.5, -0.5]).collect()
    };
    write_npy_f64(&dir.join("w03_sw_l_acc.npy"), &side(0.0, 1.0));
    write_npy_f32(&dir.join("w03_sw_r_acc.npy"), &side(3.0, -1.0));
    std::fs::write(dir.join("w03_labels.csv"), "200,599,10,squats\n").unwrap();
}

#[test]
fn mmfit_fixture_aligns_windows_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    mmfit_fixture(dir.path());
    let cfg = MmfitConfig {
        root: dir.path().to_path_buf(),
        workouts: vec![3],
        ..MmfitConfig::default()
    };
    let ds = adapt_mmfit(&cfg).unwrap();
    // Overlap 1.003 s .. 10.990 s gives 999 ticks, hence 8 windows of 200.
    assert_eq!(ds.len(), 8);
    assert_eq!(ds.window_len, 200);
    assert_eq!(ds.num_classes(), 11);
    let labels: Vec<i32> = ds.pairs.iter().map(|p| p.label).collect();
    // Windows 1 and 5 are split 100/100 and the tie goes to the lower id.
    assert_eq!(labels, vec![0, 0, 1, 1, 1, 0, 0, 0]);
    for (w, p) in ds.pairs.iter().enumerate() {
        assert_eq!(p.subject, 3);
        assert_eq!(p.t0, 100 * w as i32);
        assert_eq!(p.left.data()[0], (100 * w) as f32);
        assert_eq!(p.right.data()[0], -((100 * w) as f32));
        assert_eq!(p.left.data()[200], 0.5);
    }
}

#[test]
fn mmfit_missing_files_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    mmfit_fixture(dir.path());
    let cfg = MmfitConfig {
        root: dir.path().to_path_buf(),
        workouts: vec![3, 4],
        ..MmfitConfig::default()
    };
    let err = adapt_mmfit(&cfg).unwrap_err();
    assert!(matches!(err, Error::Adapter(_)));
    assert!(err.to_string().contains("w04_sw_l_acc.npy"), "{err}");
}

fn opportunity_session(path: &Path, rows: usize, stand_rows: usize) {
    let mut text = String::new();
    for i in 0..rows {
        let lla = if i == 5 { "NaN".to_string() } else { format!("{}", i as f64) };
        let label = if i < stand_rows { 1 } else { 0 };
        text.push_str(&format!("{i} {lla} 1 2 {} 4 5 {label}\n", -(i as f64)));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn opportunity_fixture_drops_null_windows() {
    let dir = tempfile::tempdir().unwrap();
    opportunity_session(&dir.path().join("S1-ADL1.dat"), 150, 90);
    opportunity_session(&dir.path().join("S2-ADL4.dat"), 120, 120);
    let cfg = OpportunityConfig {
        root: dir.path().to_path_buf(),
        lla_columns: [1, 2, 3],
        rla_columns: [4, 5, 6],
        label_column: 7,
        train_sessions: BTreeMap::from([("1".into(), vec!["ADL1".into()])]),
        test_sessions: BTreeMap::from([("2".into(), vec!["ADL4".into()])]),
        ..OpportunityConfig::default()
    };
    let data = adapt_opportunity(&cfg).unwrap();
    // 150 rows give 4 windows of 60; the last two have a null majority or tie.
    assert_eq!(data.train.len(), 2);
    assert_eq!(data.test.len(), 3);
    assert_eq!(data.dropped_null_windows, 2);
    assert!(data.train.pairs.iter().chain(&data.test.pairs).all(|p| p.label == 0));
    assert_eq!(data.test.pairs[0].subject, 2);
    // Row 5's missing value is interpolated from its neighbours.
    assert_eq!(data.train.pairs[0].left.data()[5], 5.0);
    assert_eq!(data.train.pairs[0].right.data()[7], -7.0);

    let narrow = OpportunityConfig {
        root: dir.path().to_path_buf(),
        train_sessions: BTreeMap::from([("1".into(), vec!["ADL1".into()])]),
        test_sessions: BTreeMap::from([("2".into(), vec!["ADL4".into()])]),
        ..OpportunityConfig::default()
    };
    assert!(matches!(adapt_opportunity(&narrow), Err(Error::Config(_))));
}
