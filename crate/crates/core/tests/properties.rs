//! Property tests for the pipeline invariants.

use proptest::prelude::*;

use gaze_concepts::binning::{bin_events, BinSpec, EventProperty};
use gaze_concepts::detect::{
    detect_fixations_ivt, detect_saccades_ek, ek_noise_threshold, DetectionParams, EventKind, GazeEvent,
};
use gaze_concepts::dissect::{dissect_saccade, DissectParams, Phase};
use gaze_concepts::influence::{concept_influence, topk_segmentation, ConceptSegmentation};
use gaze_concepts::preprocess::{clamp_velocities, normalize_windows, NormScope, VelocityWindow};

fn window(id: &str, vx: Vec<f64>, vy: Vec<f64>) -> VelocityWindow {
    let n = vx.len();
    let mask = vx.iter().zip(&vy).map(|(a, b)| !a.is_nan() && !b.is_nan()).collect();
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    for i in 1..n {
        px[i] = px[i - 1] + if vx[i].is_nan() { 0.0 } else { vx[i] * 0.001 };
        py[i] = py[i - 1] + if vy[i].is_nan() { 0.0 } else { vy[i] * 0.001 };
    }
    VelocityWindow {
        window_id: format!("{id}/w0000"),
        recording_id: id.into(),
        start_index: 0,
        sampling_rate_hz: 1000.0,
        vx,
        vy,
        px,
        py,
        valid_mask: mask,
        normalized: false,
        norm_stats: None,
    }
}

/// Noise with a few injected high-velocity bursts.
fn gaze_velocities() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (200usize..600).prop_flat_map(|n| {
        (
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec((0..n, 1usize..60, 20.0f64..500.0, 0.0f64..6.3), 0..6),
        )
            .prop_map(|(mut vx, mut vy, bursts)| {
                let n = vx.len();
                for (start, len, peak, dir) in bursts {
                    for j in 0..len.min(n - start) {
                        let s = peak * (std::f64::consts::PI * (j as f64 + 0.5) / len as f64).sin();
                        vx[start + j] += s * dir.cos();
                        vy[start + j] += s * dir.sin();
                    }
                }
                (vx, vy)
            })
    })
}

fn intervals(events: &[GazeEvent], retained_only: bool) -> Vec<(usize, usize)> {
    events.iter().filter(|e| !retained_only || e.is_retained()).map(|e| (e.onset, e.offset)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clamp_is_bounded_and_idempotent(v in prop::collection::vec(prop_oneof![-5000.0f64..5000.0, Just(f64::NAN)], 0..200), limit in 1.0f64..2000.0) {
        let once = clamp_velocities(&v, limit);
        let twice = clamp_velocities(&once, limit);
        for ((a, b), orig) in once.iter().zip(&twice).zip(&v) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
            prop_assert_eq!(a.is_nan(), orig.is_nan());
            if !a.is_nan() {
                prop_assert!(a.abs() <= limit);
            }
        }
    }

    #[test]
    fn zscore_is_invertible_and_standardized(
        data in prop::collection::vec((prop::collection::vec(-300.0f64..300.0, 50), prop::collection::vec(-300.0f64..300.0, 50)), 1..5),
    ) {
        let windows: Vec<VelocityWindow> = data.iter().enumerate().map(|(i, (x, y))| window(&format!("r{i}"), x.clone(), y.clone())).collect();
        let Ok(z) = normalize_windows(&windows, NormScope::Corpus) else { return Ok(()); };
        let stats = z[0].norm_stats.unwrap();
        let n = (windows.len() * 50) as f64;
        let mean = z.iter().flat_map(|w| w.vx.iter()).sum::<f64>() / n;
        let var = z.iter().flat_map(|w| w.vx.iter()).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var - 1.0).abs() < 1e-9);
        for (orig, norm) in windows.iter().zip(&z) {
            for i in 0..50 {
                let back = norm.vx[i] * stats.std_x + stats.mean_x;
                prop_assert!((back - orig.vx[i]).abs() <= 1e-9 * orig.vx[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn ek_intervals_are_scale_invariant((vx, vy) in gaze_velocities(), gamma in 0.05f64..20.0) {
        let params = DetectionParams { sacc_min_peak_velocity: 1e-9, sacc_max_peak_velocity: 1e12, ..Default::default() };
        let w = window("s", vx.clone(), vy.clone());
        let scaled = window("s", vx.iter().map(|v| v * gamma).collect(), vy.iter().map(|v| v * gamma).collect());
        let (ex, ey) = ek_noise_threshold(&w.vx, &w.vy, &w.valid_mask, params.sacc_lambda, params.eta_floor).unwrap();
        prop_assume!(ex.min(ey) * gamma.min(1.0) > 1e3 * params.eta_floor);
        let a = detect_saccades_ek(&w, &params).unwrap();
        let b = detect_saccades_ek(&scaled, &params).unwrap();
        // exact ties with the ellipse boundary may flip under rescaling
        let close = a.len() == b.len() && a.iter().zip(&b).all(|(p, q)| p.onset.abs_diff(q.onset) <= 1 && p.offset.abs_diff(q.offset) <= 1);
        prop_assert!(close, "{:?} vs {:?}", intervals(&a, false), intervals(&b, false));
    }

    #[test]
    fn ek_intervals_are_exactly_invariant_under_power_of_two_scaling((vx, vy) in gaze_velocities(), e in -6i32..7) {
        let params = DetectionParams { sacc_min_peak_velocity: 1e-9, sacc_max_peak_velocity: 1e12, ..Default::default() };
        let gamma = 2f64.powi(e);
        let w = window("s", vx.clone(), vy.clone());
        let scaled = window("s", vx.iter().map(|v| v * gamma).collect(), vy.iter().map(|v| v * gamma).collect());
        let a = detect_saccades_ek(&w, &params).unwrap();
        let b = detect_saccades_ek(&scaled, &params).unwrap();
        prop_assert_eq!(intervals(&a, false), intervals(&b, false));
    }

    #[test]
    fn detections_are_sorted_disjoint_and_obey_criteria((vx, vy) in gaze_velocities()) {
        let params = DetectionParams::default();
        let w = window("d", vx, vy);
        let (ex, ey) = ek_noise_threshold(&w.vx, &w.vy, &w.valid_mask, params.sacc_lambda, params.eta_floor).unwrap();
        let sacc = detect_saccades_ek(&w, &params).unwrap();
        let fix = detect_fixations_ivt(&w, &params).unwrap();
        for events in [&sacc, &fix] {
            for pair in events.windows(2) {
                prop_assert!(pair[0].offset < pair[1].onset);
            }
        }
        for e in sacc.iter().filter(|e| e.is_retained()) {
            prop_assert!((9.0..=100.0).contains(&e.duration_ms));
            for i in e.onset..=e.offset {
                prop_assert!((w.vx[i] / ex).powi(2) + (w.vy[i] / ey).powi(2) > 1.0);
            }
        }
        for e in fix.iter().filter(|e| e.is_retained()) {
            prop_assert!(e.duration_ms >= 40.0 && e.dispersion_deg.unwrap() <= 2.7);
            for i in e.onset..=e.offset {
                prop_assert!(w.vx[i].hypot(w.vy[i]) <= 20.0);
            }
        }
    }

    #[test]
    fn tightening_bounds_never_adds_events((vx, vy) in gaze_velocities(), min_dur in 9.0f64..40.0, max_disp in 0.01f64..2.7) {
        let loose = DetectionParams::default();
        let tight = DetectionParams { sacc_min_duration_ms: min_dur, fix_max_dispersion_deg: max_disp, fix_min_duration_ms: 40.0 + min_dur, ..loose };
        let w = window("m", vx, vy);
        let retained = |p: &DetectionParams| {
            let mut v = intervals(&detect_saccades_ek(&w, p).unwrap(), true);
            v.extend(intervals(&detect_fixations_ivt(&w, p).unwrap(), true));
            v
        };
        let (l, t) = (retained(&loose), retained(&tight));
        prop_assert!(t.iter().all(|iv| l.contains(iv)));
    }

    #[test]
    fn topk_is_deterministic_exact_and_scale_invariant(values in prop::collection::vec(-100.0f64..100.0, 1..500), frac in 0.001f64..1.0, scale in 0.01f64..100.0) {
        let k = ((frac * values.len() as f64).round() as usize).clamp(1, values.len());
        let a = topk_segmentation("w", &values, k).unwrap();
        let b = topk_segmentation("w", &values, k).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.mask.iter().filter(|m| **m).count(), k);
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        // strictly monotone map keeps the order, except where products round together
        let distinct = {
            let mut s = scaled.clone();
            s.sort_by(f64::total_cmp);
            s.windows(2).all(|p| p[0] < p[1])
        };
        if distinct {
            prop_assert_eq!(topk_segmentation("w", &scaled, k).unwrap().mask, a.mask);
        }
    }

    #[test]
    fn influence_is_permutation_equivariant(
        seed in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..400),
        k_frac in 0.01f64..1.0,
        rot in 0usize..400,
    ) {
        let l = seed.len();
        let k = ((k_frac * l as f64) as usize).clamp(1, l);
        let values: Vec<f64> = seed.iter().enumerate().map(|(i, (v, _))| v + i as f64 * 1e-9).collect();
        let mut mask: Vec<bool> = seed.iter().map(|(_, m)| *m).collect();
        if !mask.contains(&true) { mask[0] = true; }
        let perm: Vec<usize> = (0..l).map(|i| (i * 7 + rot) % l).collect();
        let is_perm = { let mut p = perm.clone(); p.sort_unstable(); p.dedup(); p.len() == l };
        prop_assume!(is_perm);
        let c0 = concept_influence(&ConceptSegmentation::from_mask("w", "c", mask.clone()), &topk_segmentation("w", &values, k).unwrap()).unwrap();
        let pv: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
        let pm: Vec<bool> = perm.iter().map(|&i| mask[i]).collect();
        let c1 = concept_influence(&ConceptSegmentation::from_mask("w", "c", pm), &topk_segmentation("w", &pv, k).unwrap()).unwrap();
        prop_assert_eq!(c0.intersection, c1.intersection);
        prop_assert_eq!(c0.c, c1.c);
        prop_assert!(c0.c >= 0.0 && c0.c <= c0.upper_bound());
    }

    #[test]
    fn binning_accounts_for_every_event(amps in prop::collection::vec(prop_oneof![0.0f64..30.0, Just(f64::NAN)], 1..300), n in 1usize..12, excl in 0usize..5) {
        let events: Vec<GazeEvent> = amps.iter().enumerate().map(|(i, a)| {
            let mut e = GazeEvent::new(EventKind::Saccade, "b/w0000", i, 3 * i, 3 * i + 1);
            e.amplitude_deg = (!a.is_nan()).then_some(*a);
            if i % 7 == excl {
                e.exclusion = Some(gaze_concepts::detect::ExclusionReason::MinDuration);
            }
            e
        }).collect();
        let spec = BinSpec::equal_width(EventProperty::SaccadeAmplitudeDeg, 2.0, 25.0, n).unwrap();
        let a = bin_events(&events, &spec).unwrap();
        let binned: usize = a.bins.iter().map(|b| b.events.len()).sum();
        prop_assert_eq!(binned + a.underflow.len() + a.overflow.len() + a.unavailable + a.excluded, events.len());
        for b in &a.bins {
            for e in &b.events {
                let v = e.amplitude_deg.unwrap();
                prop_assert!(v <= b.hi && (v > b.lo || b.lo == spec.edges[0]));
            }
        }
    }

    #[test]
    fn dissection_partitions_any_profile(speeds in prop::collection::vec(0.0f64..500.0, 3..80), pad in 0usize..6) {
        let mut vx = vec![0.0; pad];
        vx.extend(&speeds);
        vx.extend(vec![0.0; pad]);
        let n = vx.len();
        let w = window("p", vx, vec![0.0; n]);
        let e = GazeEvent::new(EventKind::Saccade, "p/w0000", 0, pad, pad + speeds.len() - 1);
        let d = dissect_saccade(&e, &w, &DissectParams::default());
        let inner = d.phase_len(Phase::Rise) + d.phase_len(Phase::Peak) + d.phase_len(Phase::Fall);
        prop_assert_eq!(inner + d.disregarded, speeds.len());
        prop_assert!(d.phase_len(Phase::Peak) >= 1);
        for s in &d.sub_events {
            prop_assert!(s.onset <= s.offset && s.offset < n);
        }
    }
}
