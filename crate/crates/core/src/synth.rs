//! Seeded synthetic scanpaths with ground truth, and proxy attributions.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64`, with one stream per recording, and Gaussian noise from
//! `rand_distr::Normal`. Saccades follow a raised-cosine speed profile
//! `v(t) = A*pi/(2d) * sin(pi*t/d)`, whose integral over the duration `d` is
//! the amplitude `A`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detect::EventKind;
use crate::error::{Error, Result};
use crate::io::{self, AttributionMap, GazeRecording, GazeSample, ManifestEntry, RunManifest};
use crate::preprocess::{self, PreprocessParams, SavGolParams, VelocityWindow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanSegment {
    /// Stationary gaze for `samples` samples.
    Fixation { samples: usize },
    /// Raised-cosine movement over `samples` samples.
    Saccade { samples: usize, amplitude_deg: f64, direction_deg: f64 },
}

impl PlanSegment {
    pub fn samples(&self) -> usize {
        match *self {
            PlanSegment::Fixation { samples } | PlanSegment::Saccade { samples, .. } => samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanpathPlan {
    pub recording_id: String,
    pub sampling_rate_hz: f64,
    pub start_deg: (f64, f64),
    /// Gaze must stay within `[-bound_deg, bound_deg]` on both axes.
    pub bound_deg: f64,
    pub position_noise_deg: f64,
    pub segments: Vec<PlanSegment>,
}

impl ScanpathPlan {
    pub fn total_samples(&self) -> usize {
        self.segments.iter().map(PlanSegment::samples).sum()
    }
}

/// A ground-truth event in recording coordinates (inclusive bounds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub kind: EventKind,
    pub onset: usize,
    pub offset: usize,
    pub amplitude_deg: f64,
    pub peak_velocity: f64,
}

/// Peak of the raised-cosine profile: `A*pi/(2d)` with `d` in seconds.
pub fn raised_cosine_peak(amplitude_deg: f64, duration_s: f64) -> f64 {
    amplitude_deg * PI / (2.0 * duration_s)
}

/// Amplitude that yields `peak` deg/s over `duration_s`.
pub fn amplitude_for_peak(peak: f64, duration_s: f64) -> f64 {
    peak * 2.0 * duration_s / PI
}

/// Fraction of the amplitude covered after `j` of `d` samples.
fn raised_cosine_progress(j: usize, d: usize) -> f64 {
    0.5 * (1.0 - (PI * j as f64 / d as f64).cos())
}

/// Positional noise that produces `velocity_sd` deg/s after central
/// Savitzky-Golay differentiation with `sg`.
pub fn position_noise_for_velocity_sd(velocity_sd: f64, sg: SavGolParams) -> f64 {
    let w = preprocess::savgol_weights(sg.window_length, sg.poly_order, sg.window_length / 2);
    velocity_sd * sg.dt_s / w.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn recording_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Renders a plan into positions plus ground truth.
pub fn gen_scanpath(plan: &ScanpathPlan, seed: u64) -> Result<(GazeRecording, Vec<TruthEvent>)> {
    if plan.segments.is_empty() {
        return Err(Error::Config("scanpath plan has no segments".into()));
    }
    if !(plan.position_noise_deg >= 0.0) || !(plan.sampling_rate_hz > 0.0) {
        return Err(Error::Config("noise must be >= 0 and sampling rate > 0".into()));
    }
    let in_bounds = |p: (f64, f64)| p.0.abs() <= plan.bound_deg && p.1.abs() <= plan.bound_deg;
    if !in_bounds(plan.start_deg) {
        return Err(Error::Config(format!("start position {:?} outside +-{} deg", plan.start_deg, plan.bound_deg)));
    }
    let dt = 1.0 / plan.sampling_rate_hz;
    let mut clean: Vec<(f64, f64)> = Vec::with_capacity(plan.total_samples());
    let mut truth = Vec::with_capacity(plan.segments.len());
    let mut pos = plan.start_deg;
    for (n, seg) in plan.segments.iter().enumerate() {
        let onset = clean.len();
        match *seg {
            PlanSegment::Fixation { samples } => {
                if samples == 0 {
                    return Err(Error::Config(format!("segment {n}: zero-length fixation")));
                }
                clean.extend(std::iter::repeat_n(pos, samples));
                truth.push(TruthEvent { kind: EventKind::Fixation, onset, offset: onset + samples, amplitude_deg: 0.0, peak_velocity: 0.0 });
            }
            PlanSegment::Saccade { samples, amplitude_deg, direction_deg } => {
                if samples == 0 || !(amplitude_deg >= 0.0) {
                    return Err(Error::Config(format!("segment {n}: saccade needs positive duration and amplitude >= 0")));
                }
                let (dx, dy) = (direction_deg.to_radians().cos(), direction_deg.to_radians().sin());
                let end = (pos.0 + amplitude_deg * dx, pos.1 + amplitude_deg * dy);
                if !in_bounds(end) {
                    return Err(Error::Config(format!("segment {n}: saccade lands at {end:?}, outside +-{} deg", plan.bound_deg)));
                }
                for j in 0..samples {
                    let f = raised_cosine_progress(j, samples) * amplitude_deg;
                    clean.push((pos.0 + f * dx, pos.1 + f * dy));
                }
                truth.push(TruthEvent {
                    kind: EventKind::Saccade,
                    onset,
                    offset: onset + samples,
                    amplitude_deg,
                    peak_velocity: raised_cosine_peak(amplitude_deg, samples as f64 * dt),
                });
                pos = end;
            }
        }
    }
    // Events run from departure to landing sample, so neighbours share
    // their boundary sample; the final event ends at the last sample.
    let last = clean.len() - 1;
    for t in &mut truth {
        t.offset = t.offset.min(last);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, plan.position_noise_deg).map_err(|e| Error::Config(e.to_string()))?;
    let samples = clean
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let t = (i as f64 * 1000.0 / plan.sampling_rate_hz).round() as i64;
            if plan.position_noise_deg > 0.0 {
                GazeSample::new(t, x + noise.sample(&mut rng), y + noise.sample(&mut rng))
            } else {
                GazeSample::new(t, x, y)
            }
        })
        .collect();
    let mut rec = GazeRecording::monocular(plan.recording_id.clone(), plan.sampling_rate_hz, samples);
    rec.source_meta.insert("dataset".into(), "synthetic".into());
    rec.source_meta.insert("seed".into(), seed.to_string());
    Ok((rec, truth))
}

/// Ranges for random plans; durations in samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomPlanSpec {
    pub total_samples: usize,
    pub sampling_rate_hz: f64,
    pub fixation_samples: (usize, usize),
    pub saccade_samples: (usize, usize),
    pub peak_velocity: (f64, f64),
    pub bound_deg: f64,
    /// Velocity noise after differentiation, deg/s per component.
    pub velocity_noise_sd: f64,
}

impl Default for RandomPlanSpec {
    fn default() -> Self {
        Self {
            total_samples: 10_000,
            sampling_rate_hz: 1000.0,
            fixation_samples: (150, 400),
            saccade_samples: (20, 50),
            peak_velocity: (100.0, 400.0),
            bound_deg: 15.0,
            velocity_noise_sd: 0.5,
        }
    }
}

/// Alternating fixation/saccade plan filling exactly `total_samples`,
/// starting and ending with a fixation.
pub fn random_plan(recording_id: &str, spec: &RandomPlanSpec, rng: &mut impl Rng) -> ScanpathPlan {
    let sg = SavGolParams { dt_s: 1.0 / spec.sampling_rate_hz, ..SavGolParams::default() };
    let mut plan = ScanpathPlan {
        recording_id: recording_id.to_string(),
        sampling_rate_hz: spec.sampling_rate_hz,
        start_deg: (0.0, 0.0),
        bound_deg: spec.bound_deg,
        position_noise_deg: position_noise_for_velocity_sd(spec.velocity_noise_sd, sg),
        segments: Vec::new(),
    };
    let mut pos = (0.0f64, 0.0f64);
    let mut used = 0;
    let min_tail = spec.fixation_samples.0;
    loop {
        let fix = rng.random_range(spec.fixation_samples.0..=spec.fixation_samples.1);
        let sac = rng.random_range(spec.saccade_samples.0..=spec.saccade_samples.1);
        if used + fix + sac + min_tail > spec.total_samples {
            plan.segments.push(PlanSegment::Fixation { samples: spec.total_samples - used });
            break;
        }
        plan.segments.push(PlanSegment::Fixation { samples: fix });
        let peak = rng.random_range(spec.peak_velocity.0..=spec.peak_velocity.1);
        let amplitude = amplitude_for_peak(peak, sac as f64 / spec.sampling_rate_hz);
        let mut direction: f64 = rng.random_range(0.0..360.0);
        let lands = |d: f64| {
            let r = d.to_radians();
            let end = (pos.0 + amplitude * r.cos(), pos.1 + amplitude * r.sin());
            (end.0.abs() <= spec.bound_deg && end.1.abs() <= spec.bound_deg).then_some(end)
        };
        let mut end = lands(direction);
        for _ in 0..16 {
            if end.is_some() {
                break;
            }
            direction = rng.random_range(0.0..360.0);
            end = lands(direction);
        }
        let end = end.unwrap_or_else(|| {
            // head back towards the centre
            direction = (-pos.1).atan2(-pos.0).to_degrees();
            lands(direction).unwrap_or(pos)
        });
        plan.segments.push(PlanSegment::Saccade { samples: sac, amplitude_deg: (end.0 - pos.0).hypot(end.1 - pos.1), direction_deg: direction });
        pos = end;
        used += fix + sac;
    }
    plan
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMode {
    /// Attribution equals gaze speed on both channels.
    #[default]
    Speed,
    /// I.i.d. uniform values in `[0, 1)`.
    UniformRandom,
    /// Reversed speed ranking: `max_speed - speed`.
    FixationBiased,
}

impl std::str::FromStr for AttributionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed" => Ok(Self::Speed),
            "uniform_random" => Ok(Self::UniformRandom),
            "fixation_biased" => Ok(Self::FixationBiased),
            _ => Err(Error::Config(format!("unknown attribution mode '{s}'"))),
        }
    }
}

/// Stable per-window seed (FNV-1a of the window id mixed with `seed`).
pub fn window_seed(seed: u64, window_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in window_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ seed
}

/// Stand-in attribution map for a window. Missing samples get speed 0.
pub fn gen_proxy_attributions(window: &VelocityWindow, mode: AttributionMode, seed: u64) -> AttributionMap {
    let speed: Vec<f64> = window.speed().into_iter().map(|s| if s.is_nan() { 0.0 } else { s }).collect();
    let len = window.len();
    let values = match mode {
        AttributionMode::Speed => speed.iter().chain(&speed).copied().collect(),
        AttributionMode::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(window_seed(seed, &window.window_id));
            (0..2 * len).map(|_| rng.random::<f64>()).collect()
        }
        AttributionMode::FixationBiased => {
            let max = speed.iter().copied().fold(0.0, f64::max);
            let inv: Vec<f64> = window
                .valid_mask
                .iter()
                .zip(&speed)
                .map(|(ok, s)| if *ok { max - s } else { 0.0 })
                .collect();
            inv.iter().chain(&inv).copied().collect()
        }
    };
    AttributionMap { window_id: window.window_id.clone(), channels: 2, length: len, values, target_label: None }
}

pub fn format_truth(truth: &[TruthEvent]) -> String {
    let mut out = String::from("kind,onset,offset,amplitude_deg,peak_velocity\n");
    for t in truth {
        let _ = writeln!(out, "{},{},{},{},{}", t.kind.as_str(), t.onset, t.offset, t.amplitude_deg, t.peak_velocity);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub recordings: usize,
    pub seed: u64,
    pub attribution_mode: AttributionMode,
    pub plan: RandomPlanSpec,
    pub preprocess: PreprocessParams,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            recordings: 50,
            seed: 2023,
            attribution_mode: AttributionMode::Speed,
            plan: RandomPlanSpec::default(),
            preprocess: PreprocessParams::default(),
        }
    }
}

/// In-memory corpus: recordings, ground truth and retained windows.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub recordings: Vec<GazeRecording>,
    pub truth: Vec<Vec<TruthEvent>>,
    pub windows: Vec<VelocityWindow>,
}

pub fn gen_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    let mut corpus = Corpus { recordings: Vec::new(), truth: Vec::new(), windows: Vec::new() };
    for i in 0..spec.recordings {
        let id = format!("rec_{i:03}");
        let mut rng = recording_rng(spec.seed, i as u64);
        let plan = random_plan(&id, &spec.plan, &mut rng);
        let (rec, truth) = gen_scanpath(&plan, rng.random())?;
        corpus.windows.extend(preprocess::preprocess_recording(&rec, &spec.preprocess)?.windows);
        corpus.recordings.push(rec);
        corpus.truth.push(truth);
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFiles {
    pub manifest: PathBuf,
    pub recordings: usize,
    pub windows: usize,
}

/// Writes recordings, ground truth, proxy attributions and a manifest
/// (`manifest.toml`) under `dir`.
pub fn write_corpus(dir: &Path, spec: &CorpusSpec) -> Result<CorpusFiles> {
    let corpus = gen_corpus(spec)?;
    let mut manifest = RunManifest { config: None, output_dir: Some(PathBuf::from("report")), entries: Vec::new() };
    for (rec, truth) in corpus.recordings.iter().zip(&corpus.truth) {
        io::write_gaze_csv(rec, &dir.join("recordings").join(format!("{}.csv", rec.recording_id)))?;
        io::write_file(&dir.join("truth").join(format!("{}.csv", rec.recording_id)), format_truth(truth).as_bytes())?;
    }
    for w in &corpus.windows {
        let map = gen_proxy_attributions(w, spec.attribution_mode, spec.seed);
        let rel = PathBuf::from("attributions").join(format!("{}.txt", w.window_id.replace('/', "_")));
        io::write_attribution(&map, &dir.join(&rel))?;
        manifest.entries.push(ManifestEntry {
            recording: PathBuf::from("recordings").join(format!("{}.csv", w.recording_id)),
            attribution: rel,
            window_id: w.window_id.clone(),
        });
    }
    let path = dir.join("manifest.toml");
    io::write_file(&path, manifest.to_toml().as_bytes())?;
    Ok(CorpusFiles { manifest: path, recordings: corpus.recordings.len(), windows: corpus.windows.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_saccade_plan(amplitude: f64, samples: usize) -> ScanpathPlan {
        ScanpathPlan {
            recording_id: "t".into(),
            sampling_rate_hz: 1000.0,
            start_deg: (0.0, 0.0),
            bound_deg: 20.0,
            position_noise_deg: 0.0,
            segments: vec![
                PlanSegment::Fixation { samples: 100 },
                PlanSegment::Saccade { samples, amplitude_deg: amplitude, direction_deg: 0.0 },
                PlanSegment::Fixation { samples: 100 },
            ],
        }
    }

    #[test]
    fn profile_peak_and_integral() {
        let (_, truth) = gen_scanpath(&single_saccade_plan(10.0, 40), 1).unwrap();
        let expected = PI * 10.0 / (2.0 * 0.040);
        assert!((truth[1].peak_velocity - expected).abs() < 1e-9);
        assert!((expected - 392.699).abs() < 1e-3);
        // midpoint quadrature of the speed profile at 1000 Hz
        let n = 40_000;
        let h = 0.040 / n as f64;
        let area: f64 = (0..n).map(|i| expected * (PI * (i as f64 + 0.5) * h / 0.040).sin() * h).sum();
        assert!((area - 10.0).abs() < 1e-6);
    }

    #[test]
    fn zero_amplitude_is_flat() {
        let (rec, _) = gen_scanpath(&single_saccade_plan(0.0, 30), 1).unwrap();
        assert!(rec.samples().unwrap().iter().all(|s| s.x_deg == 0.0 && s.y_deg == 0.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let mut plan = single_saccade_plan(5.0, 30);
        plan.position_noise_deg = 0.01;
        assert_eq!(gen_scanpath(&plan, 7).unwrap().0, gen_scanpath(&plan, 7).unwrap().0);
        assert_ne!(gen_scanpath(&plan, 7).unwrap().0, gen_scanpath(&plan, 8).unwrap().0);
    }

    #[test]
    fn infeasible_plans_rejected() {
        let mut plan = single_saccade_plan(50.0, 30);
        assert!(matches!(gen_scanpath(&plan, 1), Err(Error::Config(_))));
        plan.segments[1] = PlanSegment::Fixation { samples: 0 };
        assert!(matches!(gen_scanpath(&plan, 1), Err(Error::Config(_))));
    }

    #[test]
    fn random_plan_fills_total() {
        let spec = RandomPlanSpec::default();
        let plan = random_plan("r", &spec, &mut recording_rng(3, 0));
        assert_eq!(plan.total_samples(), spec.total_samples);
        gen_scanpath(&plan, 1).unwrap();
    }

    #[test]
    fn noise_mapping_matches_weights() {
        let sd = position_noise_for_velocity_sd(0.5, SavGolParams::default());
        assert!((sd - 0.5 * 0.001 * 28f64.sqrt()).abs() < 1e-15);
    }
}
