//! Independent re-implementations checked against the library.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use gaze_concepts::config::PipelineConfig;
use gaze_concepts::detect::{compute_event_properties, ek_noise_threshold, EventKind, GazeEvent};
use gaze_concepts::influence::{default_k, squash_channels, topk_segmentation, SquashMode};
use gaze_concepts::pipeline::{analyze_window, aggregate_by_concept, topk_masks, window_influences};
use gaze_concepts::preprocess::{
    compute_channel_stats, savgol_derivative, savgol_weights, SavGolParams, VelocityWindow,
};
use gaze_concepts::synth::{
    gen_corpus, gen_proxy_attributions, gen_scanpath, raised_cosine_peak, AttributionMode, CorpusSpec, PlanSegment,
    ScanpathPlan,
};

fn window(vx: Vec<f64>, vy: Vec<f64>, px: Vec<f64>, py: Vec<f64>) -> VelocityWindow {
    let n = vx.len();
    VelocityWindow {
        window_id: "o/w0000".into(),
        recording_id: "o".into(),
        start_index: 0,
        sampling_rate_hz: 1000.0,
        vx,
        vy,
        px,
        py,
        valid_mask: vec![true; n],
        normalized: false,
        norm_stats: None,
    }
}

/// Derivative weights at `pos` from an SVD least-squares fit: row 1 of the
/// pseudo-inverse of the Vandermonde matrix.
fn lstsq_weights(m: usize, p: usize, pos: usize) -> Vec<f64> {
    let a = DMatrix::from_fn(m, p + 1, |i, j| (i as f64 - pos as f64).powi(j as i32));
    let svd = a.svd(true, true);
    (0..m)
        .map(|i| {
            let mut e = DVector::zeros(m);
            e[i] = 1.0;
            svd.solve(&e, 1e-14).unwrap()[1]
        })
        .collect()
}

#[test]
fn savgol_weights_match_least_squares() {
    for (m, p) in [(5, 2), (7, 2), (7, 3), (9, 3), (11, 4), (15, 2)] {
        for pos in 0..m {
            let ours = savgol_weights(m, p, pos);
            let oracle = lstsq_weights(m, p, pos);
            for (a, b) in ours.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-10, "m={m} p={p} pos={pos}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn savgol_edges_exact_on_quadratics() {
    let dt = 0.002;
    let pos: Vec<f64> = (0..40).map(|i| {
        let t = i as f64 * dt;
        1.0 - 3.0 * t + 40.0 * t * t
    }).collect();
    let v = savgol_derivative(&pos, SavGolParams { dt_s: dt, ..Default::default() }).unwrap();
    for (i, vi) in v.iter().enumerate() {
        let exact = -3.0 + 80.0 * i as f64 * dt;
        assert!((vi - exact).abs() < 1e-9, "sample {i}: {vi} vs {exact}");
    }
}

fn brute_median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 }
}

#[test]
fn ek_threshold_matches_median_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let normal = Normal::new(0.3, 2.0).unwrap();
    for n in [2usize, 3, 10, 101, 1000] {
        let vx: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let vy: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let mask = vec![true; n];
        let (ex, ey) = ek_noise_threshold(&vx, &vy, &mask, 6.0, 1e-6).unwrap();
        let sigma = |v: &[f64]| {
            let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
            // the estimator can dip below zero for small n; eta then sits on the floor
            (6.0 * (brute_median(&sq) - brute_median(v).powi(2)).max(0.0).sqrt()).max(1e-6)
        };
        assert!((ex - sigma(&vx)).abs() <= 1e-12 * ex.max(1.0), "n={n}: {ex} vs {}", sigma(&vx));
        assert!((ey - sigma(&vy)).abs() <= 1e-12 * ey.max(1.0), "n={n}: {ey} vs {}", sigma(&vy));
    }
    let alt: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
    let (ex, _) = ek_noise_threshold(&alt, &alt, &[true; 100], 6.0, 1e-6).unwrap();
    assert_eq!(ex, 6.0);
}

#[test]
fn event_properties_match_recompute() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = 300;
        let mut gen = || (0..n).map(|_| rng.random_range(-50.0..50.0)).collect::<Vec<f64>>();
        let w = window(gen(), gen(), gen(), gen());
        let on = rng.random_range(0..n - 1);
        let off = rng.random_range(on..n);
        let kind = if rng.random::<bool>() { EventKind::Saccade } else { EventKind::Fixation };
        let e = compute_event_properties(GazeEvent::new(kind, "o/w0000", 0, on, off), &w);
        let speeds: Vec<f64> = (on..=off).map(|i| (w.vx[i] * w.vx[i] + w.vy[i] * w.vy[i]).sqrt()).collect();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        assert!(close(e.duration_ms, (off - on + 1) as f64));
        assert!(close(e.peak_velocity.unwrap(), speeds.iter().cloned().fold(0.0, f64::max)));
        match kind {
            EventKind::Saccade => {
                let d = ((w.px[off] - w.px[on]).powi(2) + (w.py[off] - w.py[on]).powi(2)).sqrt();
                assert!(close(e.amplitude_deg.unwrap(), d));
            }
            EventKind::Fixation => {
                let range = |v: &[f64]| {
                    let s = &v[on..=off];
                    s.iter().cloned().fold(f64::MIN, f64::max) - s.iter().cloned().fold(f64::MAX, f64::min)
                };
                assert!(close(e.dispersion_deg.unwrap(), range(&w.px) + range(&w.py)));
                let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
                let var = speeds.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / speeds.len() as f64;
                assert!(close(e.velocity_std.unwrap(), var.sqrt()));
            }
        }
    }
}

#[test]
fn amplitude_and_constant_fixation_examples() {
    let w = window(vec![0.0; 10], vec![0.0; 10], (0..10).map(|i| 3.0 * i as f64 / 9.0).collect(), (0..10).map(|i| 4.0 * i as f64 / 9.0).collect());
    let s = compute_event_properties(GazeEvent::new(EventKind::Saccade, "o/w0000", 0, 0, 9), &w);
    assert!((s.amplitude_deg.unwrap() - 5.0).abs() < 1e-12);
    let w = window(vec![0.0; 10], vec![0.0; 10], vec![2.0; 10], vec![-1.0; 10]);
    let f = compute_event_properties(GazeEvent::new(EventKind::Fixation, "o/w0000", 0, 0, 9), &w);
    assert_eq!((f.dispersion_deg, f.velocity_std), (Some(0.0), Some(0.0)));
}

#[test]
fn channel_stats_match_naive_two_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let normal = Normal::new(12.0, 30.0).unwrap();
    let windows: Vec<VelocityWindow> = (0..5)
        .map(|_| window((0..1000).map(|_| normal.sample(&mut rng)).collect(), (0..1000).map(|_| normal.sample(&mut rng)).collect(), vec![0.0; 1000], vec![0.0; 1000]))
        .collect();
    let stats = compute_channel_stats(&windows).unwrap();
    let all: Vec<f64> = windows.iter().flat_map(|w| w.vx.iter().copied()).collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let std = (all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / all.len() as f64).sqrt();
    assert!((stats.mean_x - mean).abs() < 1e-10);
    assert!((stats.std_x - std).abs() < 1e-10);
    assert_eq!(stats.n, 5000);
}

#[test]
fn synthetic_profile_peak_and_integral() {
    let peak = raised_cosine_peak(10.0, 0.040);
    assert!((peak - std::f64::consts::PI * 10.0 / 0.08).abs() < 1e-9);
    assert!((peak - 392.699).abs() < 1e-3);
    // midpoint quadrature at 1000 Hz of the half-sine velocity profile
    let d = 0.040;
    let integral: f64 = (0..40).map(|j| peak * (std::f64::consts::PI * (j as f64 + 0.5) * 0.001 / d).sin() * 0.001).sum();
    assert!((integral - 10.0).abs() / 10.0 < 1e-3);
    let fine: f64 = (0..40_000).map(|j| peak * (std::f64::consts::PI * (j as f64 + 0.5) * 1e-6 / d).sin() * 1e-6).sum();
    assert!((fine - 10.0).abs() < 1e-6);

    let plan = ScanpathPlan {
        recording_id: "p".into(),
        sampling_rate_hz: 1000.0,
        start_deg: (0.0, 0.0),
        bound_deg: 15.0,
        position_noise_deg: 0.0,
        segments: vec![
            PlanSegment::Fixation { samples: 50 },
            PlanSegment::Saccade { samples: 40, amplitude_deg: 10.0, direction_deg: 0.0 },
            PlanSegment::Fixation { samples: 50 },
        ],
    };
    let (rec, truth) = gen_scanpath(&plan, 1).unwrap();
    let s = rec.samples().unwrap();
    // landing sample carries the full amplitude
    assert!((s[truth[1].offset].x_deg - s[truth[1].onset].x_deg - 10.0).abs() < 1e-12);
    let max_step = s.windows(2).map(|p| (p[1].x_deg - p[0].x_deg) * 1000.0).fold(0.0, f64::max);
    assert!((max_step - peak).abs() / peak < 2e-3, "{max_step} vs {peak}");
    let (again, _) = gen_scanpath(&plan, 1).unwrap();
    assert_eq!(rec, again);
}

#[test]
fn zero_amplitude_saccade_is_flat() {
    let plan = ScanpathPlan {
        recording_id: "z".into(),
        sampling_rate_hz: 1000.0,
        start_deg: (1.0, 2.0),
        bound_deg: 15.0,
        position_noise_deg: 0.0,
        segments: vec![
            PlanSegment::Fixation { samples: 10 },
            PlanSegment::Saccade { samples: 20, amplitude_deg: 0.0, direction_deg: 45.0 },
            PlanSegment::Fixation { samples: 10 },
        ],
    };
    let (rec, _) = gen_scanpath(&plan, 0).unwrap();
    assert!(rec.samples().unwrap().iter().all(|s| s.x_deg == 1.0 && s.y_deg == 2.0));
}

#[test]
fn speed_attribution_argmax_is_in_topk() {
    let corpus = gen_corpus(&CorpusSpec { recordings: 2, ..Default::default() }).unwrap();
    for w in &corpus.windows {
        let attr = gen_proxy_attributions(w, AttributionMode::Speed, 0);
        let squashed = squash_channels(&attr, SquashMode::Signed);
        let argmax = (0..squashed.len()).max_by(|&a, &b| squashed[a].total_cmp(&squashed[b]).then(b.cmp(&a))).unwrap();
        for k in [1, 5, 20] {
            assert!(topk_segmentation(&w.window_id, &squashed, k).unwrap().mask[argmax]);
        }
    }
}

#[test]
fn fixation_biased_attributions_favour_fixations() {
    let cfg = PipelineConfig::default();
    let corpus = gen_corpus(&CorpusSpec { recordings: 5, ..Default::default() }).unwrap();
    let maps: Vec<_> = corpus.windows.iter().map(|w| gen_proxy_attributions(w, AttributionMode::FixationBiased, 0)).collect();
    let analyses: Vec<_> = corpus.windows.into_iter().map(|w| analyze_window(w, &cfg).unwrap()).collect();
    let topk = topk_masks(&maps, &cfg).unwrap();
    let (per_window, empty) = window_influences(&analyses, &topk).unwrap();
    let pooled = aggregate_by_concept(&per_window, &empty).unwrap();
    let c = |name: &str| pooled.iter().find(|r| r.concept == name).unwrap().c;
    assert!(c("fixation") > c("saccade"), "fixation {} saccade {}", c("fixation"), c("saccade"));
    assert_eq!(default_k(1000, 0.02), 20);
}
