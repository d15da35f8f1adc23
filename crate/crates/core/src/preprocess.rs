//! Positions to clamped, windowed velocity sequences.
//!
//! The pipeline per recording is: Savitzky-Golay first derivative of the
//! x/y position traces, clamping to +-limit deg/s, cutting into disjoint
//! fixed-length windows (tail remainder dropped, windows with too many
//! missing samples excluded) and optional z-score normalization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::GazeRecording;

/// Least-squares polynomial differentiation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavGolParams {
    pub window_length: usize,
    pub poly_order: usize,
    pub dt_s: f64,
}

impl Default for SavGolParams {
    fn default() -> Self {
        Self { window_length: 7, poly_order: 2, dt_s: 0.001 }
    }
}

impl SavGolParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_length < 3 || self.window_length.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "savitzky-golay window must be odd and >= 3, got {}",
                self.window_length
            )));
        }
        if self.poly_order < 1 || self.poly_order >= self.window_length {
            return Err(Error::Config(format!(
                "savitzky-golay order must be in [1, window), got {} for window {}",
                self.poly_order, self.window_length
            )));
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(Error::Config(format!("sample interval must be positive, got {}", self.dt_s)));
        }
        Ok(())
    }
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                let (upper, lower) = a.split_at_mut(row);
                for (dst, src) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *dst -= f * src;
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// First-derivative weights (per sample interval) for evaluating the
/// least-squares polynomial at window position `eval_pos`.
pub fn savgol_weights(window_length: usize, poly_order: usize, eval_pos: usize) -> Vec<f64> {
    let half = (window_length / 2) as f64;
    // Abscissae scaled into [-1, 1] for conditioning; undone at the end.
    let z: Vec<f64> = (0..window_length).map(|j| (j as f64 - half) / half).collect();
    let z0 = (eval_pos as f64 - half) / half;
    let terms = poly_order + 1;
    let mut normal = vec![vec![0.0; terms]; terms];
    for zj in &z {
        for (r, row) in normal.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell += zj.powi((r + c) as i32);
            }
        }
    }
    let grad: Vec<f64> = (0..terms).map(|q| if q == 0 { 0.0 } else { q as f64 * z0.powi(q as i32 - 1) }).collect();
    let u = solve_dense(normal, grad);
    z.iter()
        .map(|zj| u.iter().enumerate().map(|(q, uq)| uq * zj.powi(q as i32)).sum::<f64>() / half)
        .collect()
}

/// Precomputed weights for every evaluation position of the window.
#[derive(Debug, Clone)]
pub struct SavGolDifferentiator {
    params: SavGolParams,
    weights: Vec<Vec<f64>>,
}

impl SavGolDifferentiator {
    pub fn new(params: SavGolParams) -> Result<Self> {
        params.validate()?;
        let weights = (0..params.window_length)
            .map(|pos| savgol_weights(params.window_length, params.poly_order, pos))
            .collect();
        Ok(Self { params, weights })
    }

    pub fn central_weights(&self) -> &[f64] {
        &self.weights[self.params.window_length / 2]
    }

    /// Derivative in units per second. Edge samples use the window anchored
    /// at the sequence boundary. Any NaN inside the window used for a sample
    /// makes that output NaN.
    pub fn differentiate(&self, positions: &[f64]) -> Result<Vec<f64>> {
        let m = self.params.window_length;
        let n = positions.len();
        if n < m {
            return Err(Error::Size(format!("sequence of {n} samples is shorter than filter window {m}")));
        }
        let half = m / 2;
        let mut missing_prefix = Vec::with_capacity(n + 1);
        missing_prefix.push(0usize);
        for p in positions {
            missing_prefix.push(missing_prefix.last().unwrap() + usize::from(p.is_nan()));
        }
        let inv_dt = 1.0 / self.params.dt_s;
        Ok((0..n)
            .map(|i| {
                let start = i.saturating_sub(half).min(n - m);
                if missing_prefix[start + m] - missing_prefix[start] > 0 {
                    return f64::NAN;
                }
                let w = &self.weights[i - start];
                let acc: f64 = w.iter().zip(&positions[start..start + m]).map(|(w, p)| w * p).sum();
                acc * inv_dt
            })
            .collect())
    }
}

pub fn savgol_derivative(positions: &[f64], params: SavGolParams) -> Result<Vec<f64>> {
    SavGolDifferentiator::new(params)?.differentiate(positions)
}

/// Clamps valid values into `[-limit, limit]`; NaN stays NaN.
pub fn clamp_velocities(v: &[f64], limit: f64) -> Vec<f64> {
    v.iter().map(|&x| if x.is_nan() { x } else { x.clamp(-limit, limit) }).collect()
}

/// Scope over which z-score statistics are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormScope {
    #[default]
    Corpus,
    Recording,
    None,
}

impl std::str::FromStr for NormScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corpus" => Ok(Self::Corpus),
            "recording" => Ok(Self::Recording),
            "none" => Ok(Self::None),
            _ => Err(Error::Config(format!("unknown normalization scope '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessParams {
    pub sg_window: usize,
    pub sg_order: usize,
    pub clamp: f64,
    pub window_len: usize,
    pub missing_max_frac: f64,
    pub norm_scope: NormScope,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self { sg_window: 7, sg_order: 2, clamp: 1000.0, window_len: 1000, missing_max_frac: 0.5, norm_scope: NormScope::Corpus }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.clamp > 0.0) {
            return Err(Error::Config(format!("clamp limit must be positive, got {}", self.clamp)));
        }
        if self.window_len == 0 {
            return Err(Error::Config("window length must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.missing_max_frac) {
            return Err(Error::Config(format!("missing fraction must be in [0, 1], got {}", self.missing_max_frac)));
        }
        Ok(())
    }
}

/// Per-channel z-score statistics over valid samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean_x: f64,
    pub std_x: f64,
    pub mean_y: f64,
    pub std_y: f64,
    pub n: usize,
}

/// A fixed-length 2-channel velocity subsequence.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityWindow {
    pub window_id: String,
    pub recording_id: String,
    pub start_index: usize,
    pub sampling_rate_hz: f64,
    /// Horizontal (yaw) velocity in deg/s, or z-scores when normalized.
    pub vx: Vec<f64>,
    /// Vertical (pitch) velocity.
    pub vy: Vec<f64>,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    /// False where the velocity is missing.
    pub valid_mask: Vec<bool>,
    pub normalized: bool,
    pub norm_stats: Option<ChannelStats>,
}

impl VelocityWindow {
    pub fn len(&self) -> usize {
        self.vx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vx.is_empty()
    }

    pub fn channels(&self) -> usize {
        2
    }

    /// Euclidean speed per sample; NaN where invalid.
    pub fn speed(&self) -> Vec<f64> {
        self.vx
            .iter()
            .zip(&self.vy)
            .zip(&self.valid_mask)
            .map(|((x, y), &ok)| if ok { x.hypot(*y) } else { f64::NAN })
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.valid_mask.iter().filter(|v| !**v).count()
    }
}

/// Windows kept from one sequence together with exclusion bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowingOutcome {
    pub windows: Vec<VelocityWindow>,
    pub excluded_windows: usize,
    pub excluded_samples: usize,
    pub discarded_tail: usize,
}

/// Velocity and position channels of one recording.
#[derive(Debug, Clone, Copy)]
pub struct Channels<'a> {
    pub vx: &'a [f64],
    pub vy: &'a [f64],
    pub px: &'a [f64],
    pub py: &'a [f64],
    pub mask: &'a [bool],
}

pub fn window_id(recording_id: &str, ordinal: usize) -> String {
    format!("{recording_id}/w{ordinal:04}")
}

/// Cuts disjoint windows `[j*len, (j+1)*len)`. The short tail is dropped;
/// windows whose missing fraction exceeds `missing_max_frac` are excluded.
pub fn window_sequence(
    recording_id: &str,
    sampling_rate_hz: f64,
    ch: Channels<'_>,
    window_len: usize,
    missing_max_frac: f64,
) -> WindowingOutcome {
    let n = ch.vx.len();
    let mut out = WindowingOutcome { discarded_tail: n % window_len.max(1), ..Default::default() };
    if window_len == 0 {
        return out;
    }
    for ordinal in 0..n / window_len {
        let r = ordinal * window_len..(ordinal + 1) * window_len;
        let missing = ch.mask[r.clone()].iter().filter(|v| !**v).count();
        if missing as f64 > missing_max_frac * window_len as f64 {
            out.excluded_windows += 1;
            out.excluded_samples += window_len;
            continue;
        }
        out.windows.push(VelocityWindow {
            window_id: window_id(recording_id, ordinal),
            recording_id: recording_id.to_string(),
            start_index: r.start,
            sampling_rate_hz,
            vx: ch.vx[r.clone()].to_vec(),
            vy: ch.vy[r.clone()].to_vec(),
            px: ch.px[r.clone()].to_vec(),
            py: ch.py[r.clone()].to_vec(),
            valid_mask: ch.mask[r].to_vec(),
            normalized: false,
            norm_stats: None,
        });
    }
    out
}

/// Differentiates, clamps and windows a monocular recording.
pub fn preprocess_recording(rec: &GazeRecording, params: &PreprocessParams) -> Result<WindowingOutcome> {
    params.validate()?;
    let samples = rec.samples()?;
    let px: Vec<f64> = samples.iter().map(|s| s.x_deg).collect();
    let py: Vec<f64> = samples.iter().map(|s| s.y_deg).collect();
    let sg = SavGolDifferentiator::new(SavGolParams {
        window_length: params.sg_window,
        poly_order: params.sg_order,
        dt_s: 1.0 / rec.sampling_rate_hz,
    })?;
    let vx = clamp_velocities(&sg.differentiate(&px)?, params.clamp);
    let vy = clamp_velocities(&sg.differentiate(&py)?, params.clamp);
    let mask: Vec<bool> = vx.iter().zip(&vy).map(|(x, y)| !x.is_nan() && !y.is_nan()).collect();
    Ok(window_sequence(
        &rec.recording_id,
        rec.sampling_rate_hz,
        Channels { vx: &vx, vy: &vy, px: &px, py: &py, mask: &mask },
        params.window_len,
        params.missing_max_frac,
    ))
}

/// Neumaier-compensated running sum; order is fixed by the caller.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Mean and population standard deviation per channel over valid samples,
/// summed in window order.
pub fn compute_channel_stats(windows: &[VelocityWindow]) -> Result<ChannelStats> {
    let valid = || {
        windows.iter().flat_map(|w| {
            w.vx.iter().zip(&w.vy).zip(&w.valid_mask).filter(|(_, ok)| **ok).map(|((x, y), _)| (*x, *y))
        })
    };
    let (mut sx, mut sy, mut n) = (CompensatedSum::default(), CompensatedSum::default(), 0usize);
    for (x, y) in valid() {
        sx.add(x);
        sy.add(y);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Degenerate("no valid samples to compute channel statistics".into()));
    }
    let (mean_x, mean_y) = (sx.value() / n as f64, sy.value() / n as f64);
    let (mut qx, mut qy) = (CompensatedSum::default(), CompensatedSum::default());
    for (x, y) in valid() {
        qx.add((x - mean_x) * (x - mean_x));
        qy.add((y - mean_y) * (y - mean_y));
    }
    Ok(ChannelStats {
        mean_x,
        std_x: (qx.value() / n as f64).sqrt(),
        mean_y,
        std_y: (qy.value() / n as f64).sqrt(),
        n,
    })
}

/// Z-scores valid samples per channel and sets missing samples to 0.
pub fn zscore_normalize(w: &VelocityWindow, stats: &ChannelStats) -> Result<VelocityWindow> {
    if w.normalized {
        return Err(Error::Config(format!("window {} is already normalized", w.window_id)));
    }
    for (name, std) in [("x (yaw)", stats.std_x), ("y (pitch)", stats.std_y)] {
        if !(std > 0.0) {
            return Err(Error::Degenerate(format!("channel {name} has zero standard deviation")));
        }
    }
    let norm = |v: &[f64], mean: f64, std: f64| -> Vec<f64> {
        v.iter().zip(&w.valid_mask).map(|(x, ok)| if *ok { (x - mean) / std } else { 0.0 }).collect()
    };
    Ok(VelocityWindow {
        vx: norm(&w.vx, stats.mean_x, stats.std_x),
        vy: norm(&w.vy, stats.mean_y, stats.std_y),
        normalized: true,
        norm_stats: Some(*stats),
        ..w.clone()
    })
}

/// Normalizes a corpus of windows with statistics pooled per `scope`.
pub fn normalize_windows(windows: &[VelocityWindow], scope: NormScope) -> Result<Vec<VelocityWindow>> {
    match scope {
        NormScope::None => Ok(windows.to_vec()),
        NormScope::Corpus => {
            let stats = compute_channel_stats(windows)?;
            windows.iter().map(|w| zscore_normalize(w, &stats)).collect()
        }
        NormScope::Recording => {
            let mut groups: BTreeMap<&str, Vec<VelocityWindow>> = BTreeMap::new();
            for w in windows {
                groups.entry(&w.recording_id).or_default().push(w.clone());
            }
            let stats: BTreeMap<&str, ChannelStats> = groups
                .iter()
                .map(|(id, ws)| compute_channel_stats(ws).map(|s| (*id, s)))
                .collect::<Result<_>>()?;
            windows.iter().map(|w| zscore_normalize(w, &stats[w.recording_id.as_str()])).collect()
        }
    }
}
