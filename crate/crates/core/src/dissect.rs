//! Saccade dissection into pre, rise, peak, fall and post phases.

use serde::{Deserialize, Serialize};

use crate::detect::GazeEvent;
use crate::preprocess::VelocityWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    Rise,
    Peak,
    Fall,
    Post,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Pre, Phase::Rise, Phase::Peak, Phase::Fall, Phase::Post];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Pre => "pre",
            Phase::Rise => "rise",
            Phase::Peak => "peak",
            Phase::Fall => "fall",
            Phase::Post => "post",
        }
    }
}

/// One contiguous piece of a saccade phase. A peak phase interrupted by
/// sub-threshold samples is emitted as several peak sub-events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubEvent {
    pub parent_event_id: String,
    pub window_id: String,
    pub phase: Phase,
    pub onset: usize,
    pub offset: usize,
}

impl SubEvent {
    pub fn len(&self) -> usize {
        self.offset - self.onset + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DissectParams {
    pub peak_ratio: f64,
    pub flank_ratio: f64,
}

impl Default for DissectParams {
    fn default() -> Self {
        Self { peak_ratio: 0.8, flank_ratio: 1.0 / 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dissection {
    pub sub_events: Vec<SubEvent>,
    /// Saccade samples between the first and last peak sample that fall
    /// below the peak threshold; they belong to no phase.
    pub disregarded: usize,
}

impl Dissection {
    pub fn phase_len(&self, phase: Phase) -> usize {
        self.sub_events.iter().filter(|s| s.phase == phase).map(SubEvent::len).sum()
    }
}

/// Flank length: `round(ratio * n)` half away from zero, at least 1.
pub fn flank_len(saccade_len: usize, flank_ratio: f64) -> usize {
    ((flank_ratio * saccade_len as f64).round() as usize).max(1)
}

/// Splits one saccade. Speeds are Euclidean magnitudes; invalid samples
/// never reach the peak threshold.
pub fn dissect_saccade(saccade: &GazeEvent, window: &VelocityWindow, params: &DissectParams) -> Dissection {
    let (on, off) = (saccade.onset, saccade.offset);
    let speed: Vec<f64> = (on..=off)
        .map(|i| if window.valid_mask[i] { window.vx[i].hypot(window.vy[i]) } else { f64::NAN })
        .collect();
    let peak_speed = speed.iter().copied().filter(|s| !s.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    let mut out = Dissection::default();
    let sub = |phase, onset, offset| SubEvent {
        parent_event_id: saccade.event_id.clone(),
        window_id: saccade.window_id.clone(),
        phase,
        onset,
        offset,
    };

    let flank = flank_len(saccade.len(), params.flank_ratio);
    if on > 0 {
        out.sub_events.push(sub(Phase::Pre, on.saturating_sub(flank), on - 1));
    }

    if peak_speed.is_finite() {
        let threshold = params.peak_ratio * peak_speed;
        let above: Vec<bool> = speed.iter().map(|s| *s >= threshold).collect();
        let first = above.iter().position(|a| *a).expect("argmax reaches threshold");
        let last = above.iter().rposition(|a| *a).expect("argmax reaches threshold");
        if first > 0 {
            out.sub_events.push(sub(Phase::Rise, on, on + first - 1));
        }
        let mut start = None;
        for (i, &a) in above.iter().enumerate().take(last + 1).skip(first) {
            match (a, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.sub_events.push(sub(Phase::Peak, on + s, on + i - 1));
                    out.disregarded += 1;
                    start = None;
                }
                (false, None) => out.disregarded += 1,
                _ => {}
            }
        }
        if let Some(s) = start {
            out.sub_events.push(sub(Phase::Peak, on + s, on + last));
        }
        if on + last < off {
            out.sub_events.push(sub(Phase::Fall, on + last + 1, off));
        }
    } else {
        // no valid speed at all: nothing inside the saccade can be assigned
        out.disregarded = saccade.len();
    }

    if off + 1 < window.len() {
        out.sub_events.push(sub(Phase::Post, off + 1, (off + flank).min(window.len() - 1)));
    }
    out
}
