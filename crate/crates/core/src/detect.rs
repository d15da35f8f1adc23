//! Fixation (I-VT) and saccade (Engbert-Kliegl) detection with validity
//! filters and event properties.
//!
//! Both detectors run independently on the same un-normalized window, so a
//! fixation may overlap a saccade. Events that fail a validity bound are kept
//! with an [`ExclusionReason`] instead of being dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::VelocityWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    pub fix_max_velocity: f64,
    pub fix_min_duration_ms: f64,
    pub fix_max_dispersion_deg: f64,
    pub sacc_lambda: f64,
    pub sacc_min_duration_ms: f64,
    pub sacc_max_duration_ms: f64,
    pub sacc_min_peak_velocity: f64,
    pub sacc_max_peak_velocity: f64,
    pub eta_floor: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            fix_max_velocity: 20.0,
            fix_min_duration_ms: 40.0,
            fix_max_dispersion_deg: 2.7,
            sacc_lambda: 6.0,
            sacc_min_duration_ms: 9.0,
            sacc_max_duration_ms: 100.0,
            sacc_min_peak_velocity: 35.0,
            sacc_max_peak_velocity: 1000.0,
            eta_floor: 1e-6,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fix_max_velocity", self.fix_max_velocity),
            ("fix_min_duration_ms", self.fix_min_duration_ms),
            ("fix_max_dispersion_deg", self.fix_max_dispersion_deg),
            ("sacc_lambda", self.sacc_lambda),
            ("sacc_min_duration_ms", self.sacc_min_duration_ms),
            ("sacc_max_duration_ms", self.sacc_max_duration_ms),
            ("sacc_min_peak_velocity", self.sacc_min_peak_velocity),
            ("sacc_max_peak_velocity", self.sacc_max_peak_velocity),
            ("eta_floor", self.eta_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.sacc_min_duration_ms >= self.sacc_max_duration_ms {
            return Err(Error::Config("sacc_min_duration_ms must be below sacc_max_duration_ms".into()));
        }
        if self.sacc_min_peak_velocity >= self.sacc_max_peak_velocity {
            return Err(Error::Config("sacc_min_peak_velocity must be below sacc_max_peak_velocity".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Fixation,
    Saccade,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Fixation => "fixation",
            EventKind::Saccade => "saccade",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExclusionReason {
    MinDuration,
    MaxDuration,
    MinPeakVelocity,
    MaxPeakVelocity,
    MaxDispersion,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MinDuration => "min duration",
            Self::MaxDuration => "max duration",
            Self::MinPeakVelocity => "min peak velocity",
            Self::MaxPeakVelocity => "max peak velocity",
            Self::MaxDispersion => "max dispersion",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::MinDuration, Self::MaxDuration, Self::MinPeakVelocity, Self::MaxPeakVelocity, Self::MaxDispersion]
            .into_iter()
            .find(|r| r.as_str() == s)
    }
}

/// A detected fixation or saccade; `onset` and `offset` are inclusive
/// sample indices in window coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeEvent {
    pub event_id: String,
    pub kind: EventKind,
    pub window_id: String,
    pub onset: usize,
    pub offset: usize,
    pub duration_ms: f64,
    pub peak_velocity: Option<f64>,
    pub amplitude_deg: Option<f64>,
    pub dispersion_deg: Option<f64>,
    pub velocity_std: Option<f64>,
    pub exclusion: Option<ExclusionReason>,
}

impl GazeEvent {
    pub fn new(kind: EventKind, window_id: &str, ordinal: usize, onset: usize, offset: usize) -> Self {
        let tag = match kind {
            EventKind::Fixation => 'f',
            EventKind::Saccade => 's',
        };
        Self {
            event_id: format!("{window_id}/{tag}{ordinal:03}"),
            kind,
            window_id: window_id.to_string(),
            onset,
            offset,
            duration_ms: 0.0,
            peak_velocity: None,
            amplitude_deg: None,
            dispersion_deg: None,
            velocity_std: None,
            exclusion: None,
        }
    }

    pub fn len(&self) -> usize {
        self.offset - self.onset + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_retained(&self) -> bool {
        self.exclusion.is_none()
    }
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    values.sort_unstable_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median-based noise scale `sqrt(median(v^2) - median(v)^2)` over valid
/// samples. Negative differences from rounding clamp to zero.
pub fn median_sigma(v: &[f64], mask: &[bool]) -> Option<f64> {
    let mut vals: Vec<f64> = v.iter().zip(mask).filter(|(_, ok)| **ok).map(|(x, _)| *x).collect();
    if vals.is_empty() {
        return None;
    }
    let mut sq: Vec<f64> = vals.iter().map(|x| x * x).collect();
    let m = median(&mut vals);
    let m2 = median(&mut sq);
    Some((m2 - m * m).max(0.0).sqrt())
}

/// Per-component adaptive thresholds `lambda * sigma`, floored at `eta_floor`.
pub fn ek_noise_threshold(vx: &[f64], vy: &[f64], mask: &[bool], lambda: f64, eta_floor: f64) -> Result<(f64, f64)> {
    if mask.iter().filter(|v| **v).count() < 2 {
        return Err(Error::Degenerate("fewer than 2 valid samples for noise estimation".into()));
    }
    let sx = median_sigma(vx, mask).expect("valid samples exist");
    let sy = median_sigma(vy, mask).expect("valid samples exist");
    Ok(((lambda * sx).max(eta_floor), (lambda * sy).max(eta_floor)))
}

/// Maximal runs of `true` as inclusive (start, end) pairs.
fn runs(flags: impl IntoIterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut last = 0;
    for (i, f) in flags.into_iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
        last = i;
    }
    if let Some(s) = start {
        out.push((s, last));
    }
    out
}

fn ensure_physical(window: &VelocityWindow) -> Result<()> {
    if window.normalized {
        return Err(Error::Config(format!(
            "window {} is z-normalized; detection needs velocities in deg/s",
            window.window_id
        )));
    }
    Ok(())
}

/// Engbert-Kliegl saccades: maximal runs of valid samples outside the
/// threshold ellipse `(vx/eta_x)^2 + (vy/eta_y)^2 > 1`.
pub fn detect_saccades_ek(window: &VelocityWindow, params: &DetectionParams) -> Result<Vec<GazeEvent>> {
    ensure_physical(window)?;
    let (ex, ey) = ek_noise_threshold(&window.vx, &window.vy, &window.valid_mask, params.sacc_lambda, params.eta_floor)?;
    let candidates = (0..window.len()).map(|i| {
        window.valid_mask[i] && {
            let (a, b) = (window.vx[i] / ex, window.vy[i] / ey);
            a * a + b * b > 1.0
        }
    });
    Ok(runs(candidates)
        .into_iter()
        .enumerate()
        .map(|(n, (on, off))| {
            let mut e = compute_event_properties(GazeEvent::new(EventKind::Saccade, &window.window_id, n, on, off), window);
            e.exclusion = saccade_exclusion(&e, params);
            e
        })
        .collect())
}

fn saccade_exclusion(e: &GazeEvent, p: &DetectionParams) -> Option<ExclusionReason> {
    let peak = e.peak_velocity.unwrap_or(0.0);
    if e.duration_ms < p.sacc_min_duration_ms {
        Some(ExclusionReason::MinDuration)
    } else if e.duration_ms > p.sacc_max_duration_ms {
        Some(ExclusionReason::MaxDuration)
    } else if peak < p.sacc_min_peak_velocity {
        Some(ExclusionReason::MinPeakVelocity)
    } else if peak > p.sacc_max_peak_velocity {
        Some(ExclusionReason::MaxPeakVelocity)
    } else {
        None
    }
}

/// I-VT fixations: maximal runs of valid samples with speed at or below
/// `fix_max_velocity`.
pub fn detect_fixations_ivt(window: &VelocityWindow, params: &DetectionParams) -> Result<Vec<GazeEvent>> {
    ensure_physical(window)?;
    let speed = window.speed();
    let candidates = speed.iter().map(|s| !s.is_nan() && *s <= params.fix_max_velocity);
    Ok(runs(candidates)
        .into_iter()
        .enumerate()
        .map(|(n, (on, off))| {
            let mut e = compute_event_properties(GazeEvent::new(EventKind::Fixation, &window.window_id, n, on, off), window);
            e.exclusion = if e.duration_ms < params.fix_min_duration_ms {
                Some(ExclusionReason::MinDuration)
            } else if e.dispersion_deg.is_some_and(|d| d > params.fix_max_dispersion_deg) {
                Some(ExclusionReason::MaxDispersion)
            } else {
                None
            };
            e
        })
        .collect())
}

/// Fills duration, peak velocity and the kind-specific properties.
/// Properties stay `None` when the event has no valid samples to use.
pub fn compute_event_properties(mut event: GazeEvent, window: &VelocityWindow) -> GazeEvent {
    let r = event.onset..event.offset + 1;
    event.duration_ms = event.len() as f64 * 1000.0 / window.sampling_rate_hz;
    let speeds: Vec<f64> = r
        .clone()
        .filter(|&i| window.valid_mask[i])
        .map(|i| window.vx[i].hypot(window.vy[i]))
        .collect();
    event.peak_velocity = speeds.iter().copied().reduce(f64::max);
    let positions: Vec<(f64, f64)> = r
        .map(|i| (window.px[i], window.py[i]))
        .filter(|(x, y)| !x.is_nan() && !y.is_nan())
        .collect();
    match event.kind {
        EventKind::Saccade => {
            event.amplitude_deg = match (positions.first(), positions.last()) {
                (Some(a), Some(b)) => Some((b.0 - a.0).hypot(b.1 - a.1)),
                _ => None,
            };
        }
        EventKind::Fixation => {
            event.dispersion_deg = (!positions.is_empty()).then(|| {
                let range = |f: fn(&(f64, f64)) -> f64| {
                    let (lo, hi) = positions.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                    hi - lo
                };
                range(|p| p.0) + range(|p| p.1)
            });
            event.velocity_std = (!speeds.is_empty()).then(|| {
                let n = speeds.len() as f64;
                let mean = speeds.iter().sum::<f64>() / n;
                (speeds.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n).sqrt()
            });
        }
    }
    event
}

/// Fixations then saccades of one window.
pub fn detect_events(window: &VelocityWindow, params: &DetectionParams) -> Result<Vec<GazeEvent>> {
    let mut events = detect_fixations_ivt(window, params)?;
    events.extend(detect_saccades_ek(window, params)?);
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn window(vx: Vec<f64>, vy: Vec<f64>, px: Vec<f64>, py: Vec<f64>) -> VelocityWindow {
        let mask = vx.iter().zip(&vy).map(|(a, b)| !a.is_nan() && !b.is_nan()).collect();
        VelocityWindow {
            window_id: "r/w0000".into(),
            recording_id: "r".into(),
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

    #[test]
    fn constant_velocity_hits_floor() {
        let v = vec![3.0; 50];
        let (ex, ey) = ek_noise_threshold(&v, &v, &[true; 50], 6.0, 1e-6).unwrap();
        assert_eq!((ex, ey), (1e-6, 1e-6));
    }

    #[test]
    fn alternating_unit_velocity() {
        let v: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let (ex, _) = ek_noise_threshold(&v, &v, &[true; 100], 6.0, 1e-6).unwrap();
        assert!((ex - 6.0).abs() < 1e-12);
    }

    #[test]
    fn all_missing_is_degenerate() {
        let v = vec![f64::NAN; 10];
        assert!(matches!(ek_noise_threshold(&v, &v, &[false; 10], 6.0, 1e-6), Err(Error::Degenerate(_))));
    }

    #[test]
    fn single_slow_run_is_one_fixation() {
        let n = 100;
        let vx = vec![5.0; n];
        let vy = vec![0.0; n];
        let px: Vec<f64> = (0..n).map(|i| 0.001 * i as f64).collect();
        let w = window(vx, vy, px, vec![0.0; n]);
        let fix = detect_fixations_ivt(&w, &DetectionParams::default()).unwrap();
        assert_eq!(fix.len(), 1);
        assert_eq!((fix[0].onset, fix[0].offset), (0, 99));
        assert_eq!(fix[0].duration_ms, 100.0);
        assert!(fix[0].is_retained());
    }

    #[test]
    fn alternating_speed_yields_no_retained_fixation() {
        let n = 200;
        let vx: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 5.0 } else { 30.0 }).collect();
        let w = window(vx, vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let fix = detect_fixations_ivt(&w, &DetectionParams::default()).unwrap();
        assert_eq!(fix.len(), 100);
        assert!(fix.iter().all(|f| f.len() == 1 && f.exclusion == Some(ExclusionReason::MinDuration)));
    }

    #[test]
    fn saccade_amplitude_is_displacement() {
        let n = 10;
        let mut px = vec![0.0; n];
        let mut py = vec![0.0; n];
        px[9] = 3.0;
        py[9] = 4.0;
        let w = window(vec![1.0; n], vec![0.0; n], px, py);
        let e = compute_event_properties(GazeEvent::new(EventKind::Saccade, "r/w0000", 0, 0, 9), &w);
        assert_eq!(e.amplitude_deg, Some(5.0));
    }

    #[test]
    fn constant_fixation_has_zero_spread() {
        let w = window(vec![2.0; 50], vec![0.0; 50], vec![1.5; 50], vec![-2.0; 50]);
        let e = compute_event_properties(GazeEvent::new(EventKind::Fixation, "r/w0000", 0, 0, 49), &w);
        assert_eq!(e.dispersion_deg, Some(0.0));
        assert_eq!(e.velocity_std, Some(0.0));
    }

    #[test]
    fn all_missing_event_properties_unavailable() {
        let nan = vec![f64::NAN; 10];
        let w = window(nan.clone(), nan.clone(), nan.clone(), nan);
        let e = compute_event_properties(GazeEvent::new(EventKind::Fixation, "r/w0000", 0, 2, 5), &w);
        assert_eq!(e.duration_ms, 4.0);
        assert!(e.peak_velocity.is_none() && e.dispersion_deg.is_none() && e.velocity_std.is_none());
    }

    #[test]
    fn normalized_windows_are_rejected() {
        let mut w = window(vec![0.0; 10], vec![0.0; 10], vec![0.0; 10], vec![0.0; 10]);
        w.normalized = true;
        assert!(matches!(detect_saccades_ek(&w, &DetectionParams::default()), Err(Error::Config(_))));
    }

    #[test]
    fn param_validation() {
        let p = DetectionParams { sacc_min_duration_ms: 200.0, ..Default::default() };
        assert!(p.validate().is_err());
        assert!(DetectionParams::default().validate().is_ok());
    }
}
