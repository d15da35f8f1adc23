//! Write-then-load round trips for every on-disk format.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gaze_concepts::detect::{EventKind, ExclusionReason, GazeEvent};
use gaze_concepts::influence::{InfluenceResult, Scope};
use gaze_concepts::io::{
    format_report, load_attribution_file, load_gaze_csv, parse_attribution, parse_events, parse_report_csv,
    parse_report_json, read_events, round_sig9, write_attribution, write_events, write_gaze_csv, AttributionMap,
    ManifestEntry, ReportFormat, RunManifest,
};
use gaze_concepts::synth::{gen_corpus, gen_proxy_attributions, write_corpus, AttributionMode, CorpusSpec};

#[test]
fn synthetic_recording_round_trips_bit_identically() {
    let corpus = gen_corpus(&CorpusSpec { recordings: 1, ..Default::default() }).unwrap();
    let rec = &corpus.recordings[0];
    assert_eq!(rec.len(), 10_000);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rec_000.csv");
    write_gaze_csv(rec, &path).unwrap();
    let back = load_gaze_csv(&path, None).unwrap();
    assert_eq!(back.recording_id, rec.recording_id);
    let (a, b) = (rec.samples().unwrap(), back.samples().unwrap());
    assert_eq!(a.len(), b.len());
    for (s, t) in a.iter().zip(b) {
        assert_eq!(s.t_ms, t.t_ms);
        assert_eq!(s.x_deg.to_bits(), t.x_deg.to_bits());
        assert_eq!(s.y_deg.to_bits(), t.y_deg.to_bits());
    }
}

#[test]
fn emitted_attributions_load_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for mode in [AttributionMode::Speed, AttributionMode::UniformRandom] {
        let spec = CorpusSpec { recordings: 2, attribution_mode: mode, ..Default::default() };
        let files = write_corpus(dir.path(), &spec).unwrap();
        let manifest = RunManifest::load(&files.manifest).unwrap();
        let corpus = gen_corpus(&spec).unwrap();
        assert_eq!(manifest.entries.len(), corpus.windows.len());
        for (entry, w) in manifest.entries.iter().zip(&corpus.windows) {
            assert_eq!(entry.window_id, w.window_id);
            let loaded = load_attribution_file(&entry.attribution, &entry.window_id).unwrap();
            let emitted = gen_proxy_attributions(w, mode, spec.seed);
            assert_eq!(loaded.values.len(), emitted.values.len());
            assert!(loaded.values.iter().zip(&emitted.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}

#[test]
fn attribution_dense_and_long_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let map = AttributionMap {
        window_id: "r/w0003".into(),
        channels: 2,
        length: 50,
        values: (0..100).map(|_| rng.random_range(-1.0..1.0)).collect(),
        target_label: Some("subject_7".into()),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.txt");
    write_attribution(&map, &path).unwrap();
    assert_eq!(load_attribution_file(&path, "r/w0003").unwrap(), map);

    let mut long = String::from("channel,index,value\n");
    for c in 0..2 {
        for i in 0..50 {
            long.push_str(&format!("{c},{i},{}\n", map.get(c, i)));
        }
    }
    let parsed = parse_attribution(&long, "r/w0003", "long.csv").unwrap();
    assert_eq!(parsed.values, map.values);
}

fn random_events(rng: &mut ChaCha8Rng, n: usize) -> Vec<GazeEvent> {
    (0..n)
        .map(|i| {
            let kind = if i % 3 == 0 { EventKind::Fixation } else { EventKind::Saccade };
            let on = 10 * i;
            let mut e = GazeEvent::new(kind, &format!("rec_{:03}/w{:04}", i % 4, i % 5), i, on, on + rng.random_range(0..9));
            e.duration_ms = rng.random_range(1.0..200.0);
            e.peak_velocity = Some(rng.random_range(0.0..900.0));
            match kind {
                EventKind::Saccade => e.amplitude_deg = Some(rng.random_range(0.0..20.0)),
                EventKind::Fixation => {
                    e.dispersion_deg = Some(rng.random_range(0.0..3.0));
                    e.velocity_std = (i % 7 != 0).then(|| rng.random_range(0.0..10.0));
                }
            }
            if i % 5 == 1 {
                e.exclusion = Some(if kind == EventKind::Saccade { ExclusionReason::MinPeakVelocity } else { ExclusionReason::MaxDispersion });
            }
            e
        })
        .collect()
}

#[test]
fn event_tables_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let events = random_events(&mut rng, 100);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.csv");
    write_events(&events, &path).unwrap();
    let back = read_events(&path).unwrap();
    assert_eq!(back.len(), 100);
    let round = |v: Option<f64>| v.map(round_sig9);
    for b in &back {
        let a = events.iter().find(|e| e.event_id == b.event_id).unwrap();
        assert_eq!((a.kind, &a.window_id, a.onset, a.offset, a.exclusion), (b.kind, &b.window_id, b.onset, b.offset, b.exclusion));
        assert_eq!(round_sig9(a.duration_ms), b.duration_ms);
        assert_eq!(round(a.peak_velocity), b.peak_velocity);
        assert_eq!(round(a.amplitude_deg), b.amplitude_deg);
        assert_eq!(round(a.dispersion_deg), b.dispersion_deg);
        assert_eq!(round(a.velocity_std), b.velocity_std);
    }
    // a second pass is a fixed point
    let again = parse_events(&std::fs::read_to_string(&path).unwrap(), "again").unwrap();
    assert_eq!(again, back);
}

#[test]
fn reports_round_trip_in_both_formats() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let results: Vec<InfluenceResult> = (0..30)
        .map(|i| {
            let window = i % 3 != 0;
            InfluenceResult {
                concept: ["fixation", "saccade", "saccade.peak"][i % 3].into(),
                scope: if window { Scope::Window } else { Scope::Corpus },
                window_id: window.then(|| format!("rec_000/w{i:04}")),
                intersection: rng.random_range(0..20),
                c: rng.random_range(0.0..40.0),
                c_mean: (!window).then(|| rng.random_range(0.0..40.0)),
                l_total: 1000,
                s_total: rng.random_range(1..1000),
                k_total: 20,
                windows: 1,
                skipped: rng.random_range(0..3),
            }
        })
        .collect();
    let rounded: Vec<InfluenceResult> = results
        .iter()
        .map(|r| InfluenceResult { c: round_sig9(r.c), c_mean: r.c_mean.map(round_sig9), ..r.clone() })
        .collect();
    let sort = |mut v: Vec<InfluenceResult>| {
        v.sort_by(|a, b| (a.scope, &a.window_id, &a.concept).cmp(&(b.scope, &b.window_id, &b.concept)));
        v
    };
    let json = parse_report_json(&format_report(&results, ReportFormat::Json)).unwrap();
    let csv = parse_report_csv(&format_report(&results, ReportFormat::Csv)).unwrap();
    assert_eq!(json, sort(rounded.clone()));
    assert_eq!(csv, sort(rounded));
}

#[test]
fn manifest_round_trips_through_toml() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = RunManifest {
        config: Some(dir.path().join("config.toml")),
        output_dir: Some(dir.path().join("out")),
        entries: (0..3)
            .map(|i| ManifestEntry {
                recording: dir.path().join(format!("recordings/r{i}.csv")),
                attribution: dir.path().join(format!("attributions/r{i}_w0000.txt")),
                window_id: format!("r{i}/w0000"),
            })
            .collect(),
    };
    let path = dir.path().join("manifest.toml");
    std::fs::write(&path, manifest.to_toml()).unwrap();
    assert_eq!(RunManifest::load(&path).unwrap(), manifest);
}
