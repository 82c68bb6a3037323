use shotcol::corpus::*;

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    ab / (aa * bb).sqrt()
}

fn small(titles: usize) -> GeneratorConfig {
    GeneratorConfig {
        titles,
        scenes_per_title: Range::new(5, 8),
        shots_per_scene: Range::new(2, 5),
        tensor: TensorDims {
            width: 6,
            height: 5,
            channels: 3,
            keyframes: 2,
        },
        modality2_dim: 7,
        ..GeneratorConfig::default()
    }
}

#[test]
fn same_scene_pixels_beat_random_pairs() {
    let corpus = generate_corpus(&GeneratorConfig {
        titles: 3,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let (mut same, mut other) = (Vec::new(), Vec::new());
    for t in &corpus.titles {
        let px: Vec<Vec<f32>> = t.shots.iter().map(|s| s.flat_input()).collect();
        for i in 0..px.len() {
            for j in i + 1..px.len() {
                let c = cosine(&px[i], &px[j]);
                if t.scene_ids[i] == t.scene_ids[j] {
                    same.push(c);
                } else {
                    other.push(c);
                }
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&same) > mean(&other));
}

#[test]
fn noiseless_scenes_have_unit_cosine() {
    let corpus = generate_corpus(&GeneratorConfig {
        sigma_within: 0.0,
        sigma_frame: 0.0,
        flashback_prob: 0.0,
        ..small(2)
    })
    .unwrap();
    for t in &corpus.titles {
        for i in 1..t.len() {
            if t.scene_ids[i] == t.scene_ids[i - 1] {
                assert!((cosine(&t.shots[i].flat_input(), &t.shots[i - 1].flat_input()) - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn structure_invariants_hold() {
    let cfg = GeneratorConfig {
        cuepoint_min_gap_s: 30.0,
        cuepoint_threshold: 3.0,
        ..small(6)
    };
    let corpus = generate_corpus(&cfg).unwrap();
    for t in &corpus.titles {
        t.validate().unwrap();
        let changes = t.scene_ids.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(t.scene_boundaries().iter().filter(|&&b| b).count(), changes);
        let flagged: Vec<f64> = (0..t.boundary_count())
            .filter(|&b| t.cuepoint_flags[b])
            .map(|b| t.boundary_time(b))
            .collect();
        assert!(flagged.windows(2).all(|w| w[1] - w[0] >= 30.0));
    }
}

#[test]
fn save_load_and_byte_identical_regeneration() {
    let cfg = small(3);
    let a = generate_corpus(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&a, &dir.path().join("a")).unwrap();
    save_corpus(&generate_corpus(&cfg).unwrap(), &dir.path().join("b")).unwrap();
    for f in ["manifest.json", "shots.bin", "modality2.bin"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(load_corpus(&dir.path().join("a")).unwrap(), a);
}

#[test]
fn truncated_blob_reports_offset() {
    let corpus = generate_corpus(&small(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&corpus, dir.path()).unwrap();
    let blob = dir.path().join("shots.bin");
    let bytes = std::fs::read(&blob).unwrap();
    std::fs::write(&blob, &bytes[..bytes.len() - 1]).unwrap();
    match load_corpus(dir.path()) {
        Err(shotcol::Error::Truncated { offset, .. }) => assert!(offset < bytes.len() as u64),
        other => panic!("expected truncation, got {other:?}"),
    }
}

#[test]
fn split_is_by_whole_titles() {
    let ids: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
    let s = split_corpus(&ids, [0.7, 0.1, 0.2], 4).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (7, 1, 2));
    let mut all: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
    all.sort();
    let mut want = ids.clone();
    want.sort();
    assert_eq!(all, want);
}
