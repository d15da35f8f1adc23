//! Concept and top-k segmentations, their intersection and the
//! size-normalized concept influence
//!
//! ```text
//! c = (L / |S|) * (1 / k) * sum_i (S_i AND T_i)
//! ```
//!
//! A value above 1 means the top-k attributions hit the concept more often
//! than its share of the sequence would predict.

use serde::{Deserialize, Serialize};

use crate::detect::GazeEvent;
use crate::dissect::SubEvent;
use crate::error::{Error, Result};
use crate::io::AttributionMap;

/// How multi-channel attributions collapse to one value per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SquashMode {
    /// Signed step-wise maximum.
    #[default]
    Signed,
    /// Step-wise maximum of absolute values.
    Abs,
}

impl std::str::FromStr for SquashMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" => Ok(Self::Signed),
            "abs" => Ok(Self::Abs),
            _ => Err(Error::Config(format!("unknown squash mode '{s}'"))),
        }
    }
}

pub fn squash_channels(attr: &AttributionMap, mode: SquashMode) -> Vec<f64> {
    let mut out: Vec<f64> = vec![f64::NEG_INFINITY; attr.length];
    for ch in 0..attr.channels {
        for (o, &v) in out.iter_mut().zip(attr.channel(ch)) {
            let v = match mode {
                SquashMode::Signed => v,
                SquashMode::Abs => v.abs(),
            };
            *o = o.max(v);
        }
    }
    out
}

/// `round(top_frac * L)`, kept within `[1, L]`.
pub fn default_k(length: usize, top_frac: f64) -> usize {
    ((top_frac * length as f64).round() as usize).clamp(1, length.max(1))
}

/// Any interval-shaped item that can contribute to a concept mask.
pub trait Span {
    fn window_id(&self) -> &str;
    fn span(&self) -> (usize, usize);
}

impl Span for GazeEvent {
    fn window_id(&self) -> &str {
        &self.window_id
    }
    fn span(&self) -> (usize, usize) {
        (self.onset, self.offset)
    }
}

impl Span for SubEvent {
    fn window_id(&self) -> &str {
        &self.window_id
    }
    fn span(&self) -> (usize, usize) {
        (self.onset, self.offset)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptSegmentation {
    pub window_id: String,
    pub concept: String,
    pub mask: Vec<bool>,
    pub size: usize,
}

impl ConceptSegmentation {
    pub fn from_mask(window_id: &str, concept: &str, mask: Vec<bool>) -> Self {
        let size = mask.iter().filter(|m| **m).count();
        Self { window_id: window_id.to_string(), concept: concept.to_string(), mask, size }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopKSegmentation {
    pub window_id: String,
    pub k: usize,
    pub mask: Vec<bool>,
}

/// Marks the `k` largest finite values. Ties at the cutoff go to the lower
/// index.
pub fn topk_segmentation(window_id: &str, squashed: &[f64], k: usize) -> Result<TopKSegmentation> {
    let len = squashed.len();
    if k == 0 || k > len {
        return Err(Error::Config(format!("top-k size {k} outside [1, {len}]")));
    }
    let mut idx: Vec<usize> = (0..len).filter(|&i| squashed[i].is_finite()).collect();
    let take = k.min(idx.len());
    let order = |a: &usize, b: &usize| squashed[*b].total_cmp(&squashed[*a]).then(a.cmp(b));
    if take > 0 && take < idx.len() {
        idx.select_nth_unstable_by(take - 1, order);
    }
    let mut mask = vec![false; len];
    for &i in &idx[..take] {
        mask[i] = true;
    }
    Ok(TopKSegmentation { window_id: window_id.to_string(), k, mask })
}

/// Union of the items' inclusive intervals over a window of length `len`.
/// Items belonging to other windows are ignored.
pub fn concept_segmentation<'a, I, T>(window_id: &str, items: I, concept: &str, len: usize) -> ConceptSegmentation
where
    I: IntoIterator<Item = &'a T>,
    T: Span + 'a,
{
    let mut mask = vec![false; len];
    for item in items.into_iter().filter(|i| i.window_id() == window_id) {
        let (on, off) = item.span();
        let off = off.min(len.saturating_sub(1));
        if on <= off {
            mask[on..=off].fill(true);
        }
    }
    ConceptSegmentation::from_mask(window_id, concept, mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Corpus,
    Window,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Window => "window",
            Scope::Corpus => "corpus",
        }
    }
}

/// Concept influence of one window, or pooled over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceResult {
    pub concept: String,
    pub scope: Scope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_id: Option<String>,
    pub intersection: u64,
    /// Influence computed from the (pooled) totals.
    pub c: f64,
    /// Unweighted mean of per-window influences (corpus scope only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_mean: Option<f64>,
    pub l_total: u64,
    pub s_total: u64,
    pub k_total: u64,
    /// Windows contributing to the result.
    pub windows: usize,
    /// Windows skipped because the concept was absent.
    pub skipped: usize,
}

impl InfluenceResult {
    /// Upper bound `L * min(|S|, k) / (|S| * k)` of the influence.
    pub fn upper_bound(&self) -> f64 {
        self.l_total as f64 * self.s_total.min(self.k_total) as f64 / (self.s_total as f64 * self.k_total as f64)
    }

    pub fn relative_size(&self) -> f64 {
        self.s_total as f64 / self.l_total as f64
    }

    pub(crate) fn rounded(&self) -> InfluenceResult {
        InfluenceResult {
            c: crate::io::round_sig9(self.c),
            c_mean: self.c_mean.map(crate::io::round_sig9),
            ..self.clone()
        }
    }
}

/// `L * |S n T| / (|S| * k)` with one rounding: the integer products are
/// exact, so the result is the nearest double to the rational value.
pub fn influence_value(l: u64, s: u64, k: u64, intersection: u64) -> f64 {
    let num = u128::from(l) * u128::from(intersection);
    let den = u128::from(s) * u128::from(k);
    num as f64 / den as f64
}

/// Top-k intersection and influence of one concept in one window.
pub fn concept_influence(s: &ConceptSegmentation, t: &TopKSegmentation) -> Result<InfluenceResult> {
    if s.window_id != t.window_id || s.mask.len() != t.mask.len() {
        return Err(Error::Alignment {
            window_id: s.window_id.clone(),
            message: format!(
                "concept segmentation ({}, L={}) and top-k segmentation ({}, L={}) differ",
                s.window_id,
                s.mask.len(),
                t.window_id,
                t.mask.len()
            ),
        });
    }
    if s.size == 0 {
        return Err(Error::EmptyConcept { window_id: s.window_id.clone(), concept: s.concept.clone() });
    }
    let intersection = s.mask.iter().zip(&t.mask).filter(|(a, b)| **a && **b).count() as u64;
    let (l, size, k) = (s.mask.len() as u64, s.size as u64, t.k as u64);
    Ok(InfluenceResult {
        concept: s.concept.clone(),
        scope: Scope::Window,
        window_id: Some(s.window_id.clone()),
        intersection,
        c: influence_value(l, size, k, intersection),
        c_mean: None,
        l_total: l,
        s_total: size,
        k_total: k,
        windows: 1,
        skipped: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateMode {
    Pooled,
    Mean,
    #[default]
    Both,
}

impl std::str::FromStr for AggregateMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Self::Pooled),
            "mean" => Ok(Self::Mean),
            "both" => Ok(Self::Both),
            _ => Err(Error::Config(format!("unknown aggregate mode '{s}'"))),
        }
    }
}

/// Pools per-window results of one concept: `c` from summed counts and
/// `c_mean` as the plain mean of the window values. `skipped` counts windows
/// where the concept was absent.
pub fn aggregate_influence(per_window: &[InfluenceResult], skipped: usize) -> Result<InfluenceResult> {
    let first = per_window
        .first()
        .ok_or_else(|| Error::Config("cannot aggregate an empty set of influence results".into()))?;
    if let Some(other) = per_window.iter().find(|r| r.concept != first.concept) {
        return Err(Error::Config(format!(
            "cannot aggregate different concepts '{}' and '{}'",
            first.concept, other.concept
        )));
    }
    let (mut l, mut s, mut k, mut inter) = (0u64, 0u64, 0u64, 0u64);
    let mut windows = 0;
    for r in per_window {
        l += r.l_total;
        s += r.s_total;
        k += r.k_total;
        inter += r.intersection;
        windows += r.windows;
    }
    let c_mean = per_window.iter().map(|r| r.c).sum::<f64>() / per_window.len() as f64;
    Ok(InfluenceResult {
        concept: first.concept.clone(),
        scope: Scope::Corpus,
        window_id: None,
        intersection: inter,
        c: influence_value(l, s, k, inter),
        c_mean: Some(c_mean),
        l_total: l,
        s_total: s,
        k_total: k,
        windows,
        skipped: skipped + per_window.iter().map(|r| r.skipped).sum::<usize>(),
    })
}
