//! End-to-end run: preprocess, detect, dissect, influence, bin.
//!
//! Per-window work is spread over a rayon pool; every collection is kept in
//! window-id order so results do not depend on the number of threads.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rayon::prelude::*;

use crate::binning::{bin_events, binned_influence, BinAssignment, BinSpec, BinnedInfluence, EventProperty};
use crate::config::{BinModeChoice, PipelineConfig};
use crate::detect::{detect_events, EventKind, GazeEvent};
use crate::dissect::{dissect_saccade, Dissection, Phase, SubEvent};
use crate::error::{Error, Result};
use crate::influence::{
    aggregate_influence, concept_influence, concept_segmentation, default_k, squash_channels, topk_segmentation,
    ConceptSegmentation, InfluenceResult, TopKSegmentation,
};
use crate::io::{self, AttributionMap, GazeRecording, RunManifest};
use crate::preprocess::{self, ChannelStats, NormScope, VelocityWindow};

pub const FIXATION: &str = "fixation";
pub const SACCADE: &str = "saccade";

/// Concept labels in report order.
pub fn concept_labels() -> Vec<String> {
    let mut out = vec![FIXATION.to_string(), SACCADE.to_string()];
    out.extend(Phase::ALL.iter().map(|p| phase_concept(*p)));
    out
}

pub fn phase_concept(phase: Phase) -> String {
    format!("{SACCADE}.{}", phase.as_str())
}

/// Detection and dissection output for one window.
#[derive(Debug, Clone)]
pub struct WindowAnalysis {
    pub window: VelocityWindow,
    pub events: Vec<GazeEvent>,
    pub dissections: Vec<Dissection>,
}

impl WindowAnalysis {
    pub fn retained(&self, kind: EventKind) -> impl Iterator<Item = &GazeEvent> {
        self.events.iter().filter(move |e| e.kind == kind && e.is_retained())
    }

    pub fn sub_events(&self, phase: Phase) -> impl Iterator<Item = &SubEvent> {
        self.dissections.iter().flat_map(|d| d.sub_events.iter()).filter(move |s| s.phase == phase)
    }

    /// Concept mask for any label from [`concept_labels`].
    pub fn segmentation(&self, concept: &str) -> ConceptSegmentation {
        let (id, len) = (&self.window.window_id, self.window.len());
        match concept {
            FIXATION => concept_segmentation(id, self.retained(EventKind::Fixation), concept, len),
            SACCADE => concept_segmentation(id, self.retained(EventKind::Saccade), concept, len),
            other => {
                let phase = Phase::ALL
                    .into_iter()
                    .find(|p| phase_concept(*p) == other)
                    .expect("known concept label");
                concept_segmentation(id, self.sub_events(phase), concept, len)
            }
        }
    }
}

/// Detects and dissects events of one un-normalized window.
pub fn analyze_window(window: VelocityWindow, cfg: &PipelineConfig) -> Result<WindowAnalysis> {
    let events = detect_events(&window, &cfg.detect)?;
    let dissections = events
        .iter()
        .filter(|e| e.kind == EventKind::Saccade && e.is_retained())
        .map(|s| dissect_saccade(s, &window, &cfg.dissect))
        .collect();
    Ok(WindowAnalysis { window, events, dissections })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreprocessSummary {
    pub recordings: usize,
    pub windows_retained: usize,
    pub windows_excluded: usize,
    pub samples_discarded_tail: usize,
    pub norm_stats: Vec<(String, ChannelStats)>,
}

#[derive(Debug, Clone)]
pub struct PropertyBinning {
    pub property: EventProperty,
    pub spec: BinSpec,
    pub results: Vec<BinnedInfluence>,
    pub underflow: usize,
    pub overflow: usize,
    pub unavailable: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone)]
pub struct RunResults {
    pub config: PipelineConfig,
    pub preprocess: PreprocessSummary,
    pub analyses: Vec<WindowAnalysis>,
    pub topk: BTreeMap<String, TopKSegmentation>,
    pub window_influence: Vec<InfluenceResult>,
    /// One pooled result per concept that is present somewhere.
    pub corpus_influence: Vec<InfluenceResult>,
    /// Windows where each concept was absent.
    pub empty_concepts: BTreeMap<String, usize>,
    pub binned: Vec<PropertyBinning>,
}

impl RunResults {
    pub fn all_events(&self) -> Vec<GazeEvent> {
        self.analyses.iter().flat_map(|a| a.events.iter().cloned()).collect()
    }

    pub fn all_sub_events(&self) -> Vec<SubEvent> {
        self.analyses
            .iter()
            .flat_map(|a| a.dissections.iter().flat_map(|d| d.sub_events.iter().cloned()))
            .collect()
    }

    pub fn corpus(&self, concept: &str) -> Option<&InfluenceResult> {
        self.corpus_influence.iter().find(|r| r.concept == concept)
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

fn prepare_recording(rec: GazeRecording, cfg: &PipelineConfig) -> Result<GazeRecording> {
    let mut rec = match cfg.eye.eye() {
        Some(eye) => io::select_eye(&rec, eye)?,
        None => io::select_default_eye(&rec)?,
    };
    rec.sampling_rate_hz = cfg.sampling_rate_hz;
    Ok(rec)
}

/// Loads recordings and cuts their windows. Returns retained windows in
/// recording order and the preprocessing bookkeeping.
pub fn preprocess_recordings(
    paths: &[PathBuf],
    cfg: &PipelineConfig,
) -> Result<(Vec<VelocityWindow>, PreprocessSummary)> {
    let outcomes: Vec<preprocess::WindowingOutcome> = paths
        .par_iter()
        .map(|p| {
            let rec = prepare_recording(io::load_gaze_csv(p, None)?, cfg)?;
            preprocess::preprocess_recording(&rec, &cfg.preprocess)
        })
        .collect::<Result<_>>()?;
    let mut summary = PreprocessSummary { recordings: paths.len(), ..Default::default() };
    let mut windows = Vec::new();
    for o in outcomes {
        summary.windows_excluded += o.excluded_windows;
        summary.samples_discarded_tail += o.discarded_tail;
        windows.extend(o.windows);
    }
    summary.windows_retained = windows.len();
    if !windows.is_empty() {
        let normalized = preprocess::normalize_windows(&windows, cfg.preprocess.norm_scope)?;
        let mut seen = BTreeSet::new();
        for w in &normalized {
            let key = match cfg.preprocess.norm_scope {
                NormScope::Corpus => "corpus".to_string(),
                NormScope::Recording => w.recording_id.clone(),
                NormScope::None => break,
            };
            if let Some(stats) = w.norm_stats.filter(|_| seen.insert(key.clone())) {
                summary.norm_stats.push((key, stats));
            }
        }
    }
    Ok((windows, summary))
}

/// Top-k masks of every attribution map, keyed by window id.
pub fn topk_masks(maps: &[AttributionMap], cfg: &PipelineConfig) -> Result<BTreeMap<String, TopKSegmentation>> {
    maps.par_iter()
        .map(|m| {
            let squashed = squash_channels(m, cfg.influence.squash);
            let k = default_k(m.length, cfg.influence.top_frac);
            topk_segmentation(&m.window_id, &squashed, k).map(|t| (m.window_id.clone(), t))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().collect())
}

/// Per-window influence of every concept; empty concepts are counted.
pub fn window_influences(
    analyses: &[WindowAnalysis],
    topk: &BTreeMap<String, TopKSegmentation>,
) -> Result<(Vec<InfluenceResult>, BTreeMap<String, usize>)> {
    let labels = concept_labels();
    let per: Vec<Vec<std::result::Result<InfluenceResult, String>>> = analyses
        .par_iter()
        .map(|a| {
            let t = &topk[&a.window.window_id];
            labels
                .iter()
                .map(|c| match concept_influence(&a.segmentation(c), t) {
                    Ok(r) => Ok(Ok(r)),
                    Err(Error::EmptyConcept { concept, .. }) => Ok(Err(concept)),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut results = Vec::new();
    let mut empty: BTreeMap<String, usize> = labels.iter().map(|l| (l.clone(), 0)).collect();
    for r in per.into_iter().flatten() {
        match r {
            Ok(r) => results.push(r),
            Err(concept) => *empty.get_mut(&concept).expect("known concept") += 1,
        }
    }
    Ok((results, empty))
}

pub fn aggregate_by_concept(
    window_results: &[InfluenceResult],
    empty: &BTreeMap<String, usize>,
) -> Result<Vec<InfluenceResult>> {
    concept_labels()
        .iter()
        .filter_map(|c| {
            let rs: Vec<InfluenceResult> = window_results.iter().filter(|r| &r.concept == c).cloned().collect();
            (!rs.is_empty()).then(|| aggregate_influence(&rs, empty.get(c).copied().unwrap_or(0)))
        })
        .collect()
}

/// Bin spec for a property according to the configuration.
pub fn bin_spec_for(property: EventProperty, events: &[&GazeEvent], cfg: &PipelineConfig) -> Result<BinSpec> {
    let values: Vec<f64> = events
        .iter()
        .filter(|e| e.is_retained())
        .filter_map(|e| property.value(e))
        .collect();
    let b = &cfg.binning;
    match b.mode {
        BinModeChoice::Explicit => BinSpec::explicit(property, b.edges.clone()),
        BinModeChoice::Quantile => BinSpec::quantile(property, &values, b.bins),
        BinModeChoice::Width => BinSpec::default_for(property, &values, b.bins, &cfg.detect),
    }
}

pub fn bin_property(
    property: EventProperty,
    analyses: &[WindowAnalysis],
    topk: &BTreeMap<String, TopKSegmentation>,
    cfg: &PipelineConfig,
) -> Result<PropertyBinning> {
    let events: Vec<GazeEvent> = analyses
        .iter()
        .flat_map(|a| a.events.iter().filter(|e| e.kind == property.kind()).cloned())
        .collect();
    let refs: Vec<&GazeEvent> = events.iter().collect();
    let spec = match bin_spec_for(property, &refs, cfg) {
        Ok(s) => s,
        // quantile bins over no values: fall back to the width rule
        Err(_) if cfg.binning.mode == BinModeChoice::Quantile => BinSpec::default_for(property, &[], cfg.binning.bins, &cfg.detect)?,
        Err(e) => return Err(e),
    };
    let assignment: BinAssignment<'_> = bin_events(&events, &spec)?;
    let results = binned_influence(&assignment, topk)?;
    Ok(PropertyBinning {
        property,
        results,
        underflow: assignment.underflow.len(),
        overflow: assignment.overflow.len(),
        unavailable: assignment.unavailable,
        excluded: assignment.excluded,
        spec,
    })
}

/// Runs every stage for the manifest's windows. Errors carry the stage
/// name.
pub fn run_pipeline(manifest: &RunManifest, cfg: &PipelineConfig, jobs: usize) -> Result<RunResults> {
    cfg.validate()?;
    if manifest.entries.is_empty() {
        return Err(Error::Config("manifest has no entries".into()));
    }
    let mut ids = BTreeSet::new();
    if let Some(dup) = manifest.entries.iter().find(|e| !ids.insert(e.window_id.clone())) {
        return Err(Error::Config(format!("window {} listed twice in manifest", dup.window_id)));
    }
    pool(jobs)?.install(|| {
        let (windows, pre) = preprocess_recordings(&manifest.recordings(), cfg).map_err(|e| e.in_stage("preprocess"))?;

        let mut by_id: BTreeMap<String, VelocityWindow> = windows.into_iter().map(|w| (w.window_id.clone(), w)).collect();
        let shapes: BTreeMap<String, (usize, usize)> =
            by_id.iter().map(|(id, w)| (id.clone(), (w.channels(), w.len()))).collect();
        let mut selected = Vec::with_capacity(manifest.entries.len());
        for id in &ids {
            match by_id.remove(id) {
                Some(w) => selected.push(w),
                None => {
                    return Err(Error::Alignment {
                        window_id: id.clone(),
                        message: "window id does not resolve to a retained window".into(),
                    }
                    .in_stage("influence"))
                }
            }
        }

        let analyses: Vec<WindowAnalysis> = selected
            .into_par_iter()
            .map(|w| analyze_window(w, cfg))
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("detect"))?;

        let maps: Vec<AttributionMap> = manifest
            .entries
            .par_iter()
            .map(|entry| {
                let map = io::load_attribution_file(&entry.attribution, &entry.window_id)?;
                let (d, l) = shapes[&entry.window_id];
                map.validate(d, l)?;
                Ok(map)
            })
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("influence"))?;
        let topk = topk_masks(&maps, cfg).map_err(|e| e.in_stage("influence"))?;
        let (window_influence, empty_concepts) =
            window_influences(&analyses, &topk).map_err(|e| e.in_stage("influence"))?;
        let corpus_influence =
            aggregate_by_concept(&window_influence, &empty_concepts).map_err(|e| e.in_stage("influence"))?;

        let binned = cfg
            .binning
            .properties
            .iter()
            .map(|p| bin_property(*p, &analyses, &topk, cfg))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("bin"))?;

        Ok(RunResults {
            config: cfg.clone(),
            preprocess: pre,
            analyses,
            topk,
            window_influence,
            corpus_influence,
            empty_concepts,
            binned,
        })
    })
}
