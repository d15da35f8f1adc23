//! Property binning of events and per-bin concept influence.
//!
//! Bins are `(lo, hi]` except the first, which is closed on the left so
//! the lowest edge itself is inside. Values outside the edges go to the
//! underflow and overflow counters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detect::{DetectionParams, EventKind, GazeEvent};
use crate::error::{Error, Result};
use crate::influence::{aggregate_influence, concept_influence, concept_segmentation, InfluenceResult, TopKSegmentation};
use crate::io::fmt_sig9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventProperty {
    SaccadeDurationMs,
    SaccadeAmplitudeDeg,
    FixationDispersionDeg,
    FixationVelocityStd,
}

impl EventProperty {
    pub const ALL: [EventProperty; 4] = [
        EventProperty::SaccadeDurationMs,
        EventProperty::SaccadeAmplitudeDeg,
        EventProperty::FixationDispersionDeg,
        EventProperty::FixationVelocityStd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SaccadeDurationMs => "saccade_duration_ms",
            Self::SaccadeAmplitudeDeg => "saccade_amplitude_deg",
            Self::FixationDispersionDeg => "fixation_dispersion_deg",
            Self::FixationVelocityStd => "fixation_velocity_std",
        }
    }

    /// Axis label with unit.
    pub fn label(self) -> &'static str {
        match self {
            Self::SaccadeDurationMs => "saccade duration (ms)",
            Self::SaccadeAmplitudeDeg => "saccade amplitude (deg)",
            Self::FixationDispersionDeg => "fixation dispersion (deg)",
            Self::FixationVelocityStd => "fixation velocity std (deg/s)",
        }
    }

    pub fn kind(self) -> EventKind {
        match self {
            Self::SaccadeDurationMs | Self::SaccadeAmplitudeDeg => EventKind::Saccade,
            Self::FixationDispersionDeg | Self::FixationVelocityStd => EventKind::Fixation,
        }
    }

    pub fn value(self, e: &GazeEvent) -> Option<f64> {
        match self {
            Self::SaccadeDurationMs => Some(e.duration_ms),
            Self::SaccadeAmplitudeDeg => e.amplitude_deg,
            Self::FixationDispersionDeg => e.dispersion_deg,
            Self::FixationVelocityStd => e.velocity_std,
        }
    }
}

impl std::str::FromStr for EventProperty {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown event property '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinMode {
    Explicit,
    EqualWidth(usize),
    Quantile(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub property: EventProperty,
    pub edges: Vec<f64>,
    pub mode: BinMode,
}

impl BinSpec {
    pub fn explicit(property: EventProperty, edges: Vec<f64>) -> Result<Self> {
        let spec = Self { property, edges, mode: BinMode::Explicit };
        spec.validate()?;
        Ok(spec)
    }

    pub fn equal_width(property: EventProperty, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(hi > lo) {
            return Err(Error::Config(format!("equal-width bins need n >= 1 and lo < hi, got n={n} [{lo}, {hi}]")));
        }
        let width = (hi - lo) / n as f64;
        let mut edges: Vec<f64> = (0..n).map(|i| lo + width * i as f64).collect();
        edges.push(hi);
        let spec = Self { property, edges, mode: BinMode::EqualWidth(n) };
        spec.validate()?;
        Ok(spec)
    }

    /// Edges at order statistics so that each of the `n` bins receives
    /// `ceil`/`floor` of `N/n` values when values are distinct.
    pub fn quantile(property: EventProperty, values: &[f64], n: usize) -> Result<Self> {
        let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if n == 0 || sorted.is_empty() {
            return Err(Error::Config("quantile bins need n >= 1 and at least one value".into()));
        }
        sorted.sort_by(f64::total_cmp);
        let count = sorted.len();
        let mut edges = vec![sorted[0]];
        for j in 1..=n {
            let rank = (j * count).div_ceil(n).max(1);
            let e = sorted[rank - 1];
            if e > *edges.last().unwrap() {
                edges.push(e);
            }
        }
        let spec = Self { property, edges, mode: BinMode::Quantile(n) };
        spec.validate()?;
        Ok(spec)
    }

    /// Default binning: `n` equal-width bins over the validity range of the
    /// property, or over the observed range where no bound exists.
    pub fn default_for(property: EventProperty, values: &[f64], n: usize, params: &DetectionParams) -> Result<Self> {
        let (lo, hi) = match property {
            EventProperty::SaccadeDurationMs => (params.sacc_min_duration_ms, params.sacc_max_duration_ms),
            EventProperty::FixationDispersionDeg => (0.0, params.fix_max_dispersion_deg),
            _ => {
                let finite = values.iter().copied().filter(|v| v.is_finite());
                let lo = finite.clone().fold(f64::INFINITY, f64::min);
                let hi = finite.fold(f64::NEG_INFINITY, f64::max);
                if !lo.is_finite() {
                    (0.0, 1.0)
                } else if hi > lo {
                    (lo, hi)
                } else {
                    (lo, lo + 1.0)
                }
            }
        };
        Self::equal_width(property, lo, hi, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.len() < 2 {
            return Err(Error::Config(format!("bin spec needs >= 2 edges, got {}", self.edges.len())));
        }
        if self.edges.iter().any(|e| !e.is_finite()) || self.edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("bin edges must be finite and strictly increasing".into()));
        }
        Ok(())
    }

    pub fn bin_count(&self) -> usize {
        self.edges.len() - 1
    }

    /// Bin index of `v`, or `Err(false)` for underflow and `Err(true)` for
    /// overflow.
    pub fn locate(&self, v: f64) -> std::result::Result<usize, bool> {
        let (first, last) = (self.edges[0], *self.edges.last().unwrap());
        if v < first {
            return Err(false);
        }
        if v > last {
            return Err(true);
        }
        // first index with edge >= v, minus one; the first bin absorbs v == first
        let upper = self.edges.partition_point(|e| *e < v);
        Ok(upper.saturating_sub(1).min(self.bin_count() - 1))
    }
}

#[derive(Debug, Clone)]
pub struct EventBin<'a> {
    pub lo: f64,
    pub hi: f64,
    pub events: Vec<&'a GazeEvent>,
}

#[derive(Debug, Clone)]
pub struct BinAssignment<'a> {
    pub property: EventProperty,
    pub bins: Vec<EventBin<'a>>,
    pub underflow: Vec<&'a GazeEvent>,
    pub overflow: Vec<&'a GazeEvent>,
    /// Retained events whose property could not be computed.
    pub unavailable: usize,
    /// Events skipped because they failed a validity filter.
    pub excluded: usize,
}

/// Assigns retained events of the property's kind to bins.
pub fn bin_events<'a>(events: &'a [GazeEvent], spec: &BinSpec) -> Result<BinAssignment<'a>> {
    spec.validate()?;
    let kind = spec.property.kind();
    let mut out = BinAssignment {
        property: spec.property,
        bins: spec.edges.windows(2).map(|w| EventBin { lo: w[0], hi: w[1], events: Vec::new() }).collect(),
        underflow: Vec::new(),
        overflow: Vec::new(),
        unavailable: 0,
        excluded: 0,
    };
    for e in events {
        if e.kind != kind {
            return Err(Error::Config(format!(
                "property {} applies to {} events, got {} {}",
                spec.property.as_str(),
                kind.as_str(),
                e.kind.as_str(),
                e.event_id
            )));
        }
        if !e.is_retained() {
            out.excluded += 1;
            continue;
        }
        match spec.property.value(e) {
            None => out.unavailable += 1,
            Some(v) => match spec.locate(v) {
                Ok(i) => out.bins[i].events.push(e),
                Err(false) => out.underflow.push(e),
                Err(true) => out.overflow.push(e),
            },
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedInfluence {
    pub lo: f64,
    pub hi: f64,
    pub event_count: usize,
    pub segmentation_size: u64,
    pub influence: Option<InfluenceResult>,
    #[serde(skip)]
    pub per_window: Vec<InfluenceResult>,
}

pub fn bin_concept_label(property: EventProperty, lo: f64, hi: f64) -> String {
    format!("{}({},{}]", property.as_str(), fmt_sig9(lo), fmt_sig9(hi))
}

/// Influence per bin, built from each bin's events alone and pooled over
/// the windows in `topk_by_window`.
pub fn binned_influence(
    assignment: &BinAssignment<'_>,
    topk_by_window: &BTreeMap<String, TopKSegmentation>,
) -> Result<Vec<BinnedInfluence>> {
    assignment
        .bins
        .iter()
        .map(|bin| {
            let concept = bin_concept_label(assignment.property, bin.lo, bin.hi);
            let mut by_window: BTreeMap<&str, Vec<&GazeEvent>> = BTreeMap::new();
            for e in &bin.events {
                by_window.entry(e.window_id.as_str()).or_default().push(e);
            }
            let mut per_window = Vec::with_capacity(by_window.len());
            for (wid, events) in &by_window {
                let topk = topk_by_window.get(*wid).ok_or_else(|| Error::Alignment {
                    window_id: wid.to_string(),
                    message: "binned events reference a window without attributions".into(),
                })?;
                let seg = concept_segmentation(wid, events.iter().copied(), &concept, topk.mask.len());
                per_window.push(concept_influence(&seg, topk)?);
            }
            let skipped = topk_by_window.len().saturating_sub(per_window.len());
            let influence = if per_window.is_empty() { None } else { Some(aggregate_influence(&per_window, skipped)?) };
            Ok(BinnedInfluence {
                lo: bin.lo,
                hi: bin.hi,
                event_count: bin.events.len(),
                segmentation_size: per_window.iter().map(|r| r.s_total).sum(),
                influence,
                per_window,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn saccade(window: &str, n: usize, onset: usize, duration: f64) -> GazeEvent {
        let mut e = GazeEvent::new(EventKind::Saccade, window, n, onset, onset + duration as usize - 1);
        e.duration_ms = duration;
        e
    }

    #[test]
    fn two_bin_case_and_edge_rule() {
        let spec = BinSpec::explicit(EventProperty::SaccadeDurationMs, vec![0.0, 10.0, 20.0]).unwrap();
        let events = vec![saccade("w", 0, 0, 5.0), saccade("w", 1, 100, 15.0), saccade("w", 2, 200, 10.0)];
        let a = bin_events(&events, &spec).unwrap();
        assert_eq!(a.bins[0].events.len(), 2);
        assert_eq!(a.bins[1].events.len(), 1);
        assert_eq!(spec.locate(0.0), Ok(0));
        assert_eq!(spec.locate(20.0), Ok(1));
        assert_eq!(spec.locate(-0.1), Err(false));
        assert_eq!(spec.locate(20.5), Err(true));
    }

    #[test]
    fn kind_mismatch_is_config_error() {
        let spec = BinSpec::explicit(EventProperty::FixationDispersionDeg, vec![0.0, 1.0]).unwrap();
        let events = vec![saccade("w", 0, 0, 5.0)];
        assert!(matches!(bin_events(&events, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn edges_must_increase() {
        assert!(BinSpec::explicit(EventProperty::SaccadeDurationMs, vec![0.0]).is_err());
        assert!(BinSpec::explicit(EventProperty::SaccadeDurationMs, vec![0.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn equal_width_edges() {
        let s = BinSpec::default_for(EventProperty::SaccadeDurationMs, &[], 20, &DetectionParams::default()).unwrap();
        assert_eq!(s.edges.len(), 21);
        assert_eq!(s.edges[0], 9.0);
        assert_eq!(*s.edges.last().unwrap(), 100.0);
    }

    #[test]
    fn empty_bin_has_no_influence() {
        let spec = BinSpec::explicit(EventProperty::SaccadeDurationMs, vec![0.0, 10.0, 20.0]).unwrap();
        let events = vec![saccade("w", 0, 0, 5.0)];
        let a = bin_events(&events, &spec).unwrap();
        let topk = BTreeMap::from([(
            "w".to_string(),
            TopKSegmentation { window_id: "w".into(), k: 2, mask: vec![true, true, false, false, false, false, false, false, false, false] },
        )]);
        let out = binned_influence(&a, &topk).unwrap();
        assert_eq!(out[0].event_count, 1);
        assert_eq!(out[0].influence.as_ref().unwrap().intersection, 2);
        assert_eq!(out[1].event_count, 0);
        assert!(out[1].influence.is_none());
    }
}
