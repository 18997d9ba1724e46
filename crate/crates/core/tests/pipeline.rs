use std::path::Path;

use svcq::alignment::{load_alignment, AlignmentOptions};
use svcq::codec::{
    corpus_bitrate, encode, load_corpus, read_encoded, train_svc, utterance_bitrate, BitrateMode, CorpusManifest, Split,
    TrainConfig, Utterance,
};
use svcq::codec::{load_model, save_model};
use svcq::synthetic::{generate_corpus, write_corpus, AlignmentFormat, SyntheticConfig};
use svcq::{Error, Tier};

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn fixtures_load_through_the_extension_dispatch() {
    let opts = AlignmentOptions::default();
    let a = load_alignment(&fixture("hello_world_long.TextGrid"), &opts).unwrap();
    let b = load_alignment(&fixture("hello_world.json"), &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.duration(), 1.0);
    let words: Vec<_> = a.words().iter().map(|w| w.label().unwrap()).collect();
    assert_eq!(words, ["hello", "world"]);
}

#[test]
fn phone_codebook_recovers_planted_clusters() {
    let cfg = SyntheticConfig {
        utterances: [80, 0, 0],
        frame_noise: 0.3,
        emotion_offset: 0.0,
        prominence_offset: 0.0,
        seed: 5,
        ..SyntheticConfig::default()
    };
    let corpus: Vec<Utterance<f64>> = generate_corpus(&cfg).unwrap().into_iter().map(|(u, _)| u).collect();
    let train = TrainConfig {
        k_per_tier: [16, cfg.clusters(), 4, 2],
        seed: 9,
        ..TrainConfig::default()
    };
    let model = train_svc(&corpus, &train).unwrap().model;
    let cb = model.codebook(Tier::Phone);
    for c in 0..cfg.clusters() {
        let truth = cfg.cluster_centre(c);
        let nearest = (0..cb.k())
            .map(|j| {
                cb.centroid(j)
                    .iter()
                    .zip(&truth)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 0.25, "cluster {c}: nearest centroid at {nearest}");
    }
}

#[test]
fn training_is_deterministic_and_survives_a_disk_round_trip() {
    let cfg = SyntheticConfig {
        utterances: [20, 0, 0],
        ..SyntheticConfig::default()
    };
    let corpus: Vec<Utterance<f32>> = generate_corpus(&cfg).unwrap().into_iter().map(|(u, _)| u).collect();
    let train = TrainConfig {
        k_per_tier: [12, 6, 4, 2],
        standardize: true,
        ..TrainConfig::default()
    };
    let a = train_svc(&corpus, &train).unwrap();
    let b = train_svc(&corpus, &train).unwrap();
    assert_eq!(a.model, b.model);

    let dir = tempfile::tempdir().unwrap();
    save_model(dir.path(), &a.model).unwrap();
    let back = load_model::<f32>(dir.path()).unwrap();
    assert_eq!(back, a.model);
    for u in &corpus {
        assert_eq!(encode(&back, u).unwrap(), encode(&a.model, u).unwrap());
    }
}

#[test]
fn written_corpus_round_trips_through_the_manifest() {
    let cfg = SyntheticConfig {
        utterances: [6, 2, 2],
        ..SyntheticConfig::default()
    };
    let corpus: Vec<Utterance<f32>> = generate_corpus(&cfg).unwrap().into_iter().map(|(u, _)| u).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = write_corpus(dir.path(), &corpus, AlignmentFormat::Json).unwrap();
    let manifest = CorpusManifest::load(&path).unwrap();
    let loaded: Vec<Utterance<f32>> = load_corpus(&manifest, &AlignmentOptions::default(), Some(Split::Valid)).unwrap();
    assert_eq!(loaded.len(), 2);
    for u in &loaded {
        let original = corpus.iter().find(|o| o.id == u.id).unwrap();
        assert_eq!(u.features, original.features);
        assert_eq!(u.segmentation, original.segmentation);
        assert_eq!(u.labels, original.labels);
    }

    let train = TrainConfig {
        k_per_tier: [8, 4, 4, 2],
        ..TrainConfig::default()
    };
    let model = train_svc(&corpus, &train).unwrap().model;
    let enc = encode(&model, &loaded[0]).unwrap();
    let units = dir.path().join("u.units.json");
    std::fs::write(&units, svcq::codec::encoded_to_json(&enc)).unwrap();
    assert_eq!(read_encoded(&units).unwrap(), enc);

    let reports: Vec<_> = loaded
        .iter()
        .map(|u| utterance_bitrate(&encode(&model, u).unwrap(), &model, BitrateMode::Full).unwrap())
        .collect();
    let summary = corpus_bitrate(&reports).unwrap();
    assert!(summary.mean_bps >= 50.0 * 8f64.log2());
}

#[test]
fn missing_feature_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.jsonl");
    std::fs::write(
        &manifest,
        r#"{"id": "a", "features": "nope.fmat", "alignment": "nope.json", "split": "train"}"#,
    )
    .unwrap();
    let err = CorpusManifest::load(&manifest).unwrap_err();
    assert!(matches!(err, Error::Io { .. } | Error::Manifest { .. }), "{err:?}");
}
