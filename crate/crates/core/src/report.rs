//! JSON summary document, output directory layout and SVG charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::binning::EventProperty;
use crate::config::PipelineConfig;
use crate::detect::EventKind;
use crate::dissect::Phase;
use crate::error::{Error, Result};
use crate::influence::{AggregateMode, InfluenceResult};
use crate::io::{self, fmt_sig9, round_sig9, ReportFormat};
use crate::pipeline::{concept_labels, phase_concept, RunResults, FIXATION, SACCADE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusCounts {
    pub recordings: usize,
    pub windows_retained: usize,
    pub windows_excluded: usize,
    pub samples_discarded_tail: usize,
    pub windows_analyzed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormBlock {
    pub scope: String,
    pub mean_x: f64,
    pub std_x: f64,
    pub mean_y: f64,
    pub std_y: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConceptBlock {
    pub concept: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_pooled: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_mean: Option<f64>,
    pub intersection: u64,
    pub relative_size: f64,
    pub l_total: u64,
    pub s_total: u64,
    pub k_total: u64,
    pub windows: usize,
    pub windows_without_concept: usize,
    pub event_count: usize,
    pub excluded_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissectionBlock {
    pub saccades: usize,
    pub saccade_samples: usize,
    pub disregarded_samples: usize,
    pub disregarded_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinBlock {
    pub lo: f64,
    pub hi: f64,
    pub event_count: usize,
    pub segmentation_size: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intersection: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_pooled: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyBlock {
    pub property: String,
    pub label: String,
    pub edges: Vec<f64>,
    pub underflow: usize,
    pub overflow: usize,
    pub unavailable: usize,
    pub excluded: usize,
    pub bins: Vec<BinBlock>,
}

/// Everything a run reports. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDocument {
    pub parameters: PipelineConfig,
    pub corpus: CorpusCounts,
    pub normalization: Vec<NormBlock>,
    pub concepts: Vec<ConceptBlock>,
    pub dissection: DissectionBlock,
    pub binning: Vec<PropertyBlock>,
}

fn pick(mode: AggregateMode, r: Option<&InfluenceResult>) -> (Option<f64>, Option<f64>) {
    let Some(r) = r else { return (None, None) };
    let pooled = Some(round_sig9(r.c));
    let mean = r.c_mean.map(round_sig9);
    match mode {
        AggregateMode::Pooled => (pooled, None),
        AggregateMode::Mean => (None, mean),
        AggregateMode::Both => (pooled, mean),
    }
}

/// Builds the summary document of a run.
pub fn summarize(run: &RunResults) -> Result<ReportDocument> {
    if run.window_influence.is_empty() {
        return Err(Error::Degenerate("no concept influence results to report".into()));
    }
    let mode = run.config.influence.aggregate;
    let count = |kind: EventKind, retained: bool| {
        run.analyses
            .iter()
            .flat_map(|a| a.events.iter())
            .filter(|e| e.kind == kind && e.is_retained() == retained)
            .count()
    };
    let concepts = concept_labels()
        .into_iter()
        .map(|label| {
            let r = run.corpus(&label);
            let (c_pooled, c_mean) = pick(mode, r);
            let (event_count, excluded_count) = match label.as_str() {
                FIXATION => (count(EventKind::Fixation, true), count(EventKind::Fixation, false)),
                SACCADE => (count(EventKind::Saccade, true), count(EventKind::Saccade, false)),
                other => {
                    let phase = Phase::ALL.into_iter().find(|p| phase_concept(*p) == other).expect("phase label");
                    (run.analyses.iter().map(|a| a.sub_events(phase).count()).sum(), 0)
                }
            };
            ConceptBlock {
                concept: label.clone(),
                c_pooled,
                c_mean,
                intersection: r.map_or(0, |r| r.intersection),
                relative_size: r.map_or(0.0, |r| round_sig9(r.relative_size())),
                l_total: r.map_or(0, |r| r.l_total),
                s_total: r.map_or(0, |r| r.s_total),
                k_total: r.map_or(0, |r| r.k_total),
                windows: r.map_or(0, |r| r.windows),
                windows_without_concept: run.empty_concepts.get(&label).copied().unwrap_or(0),
                event_count,
                excluded_count,
            }
        })
        .collect();

    let (mut saccades, mut saccade_samples, mut disregarded) = (0, 0, 0);
    for a in &run.analyses {
        for (s, d) in a.retained(EventKind::Saccade).zip(&a.dissections) {
            saccades += 1;
            saccade_samples += s.len();
            disregarded += d.disregarded;
        }
    }

    let binning = run
        .binned
        .iter()
        .map(|pb| PropertyBlock {
            property: pb.property.as_str().to_string(),
            label: pb.property.label().to_string(),
            edges: pb.spec.edges.iter().map(|e| round_sig9(*e)).collect(),
            underflow: pb.underflow,
            overflow: pb.overflow,
            unavailable: pb.unavailable,
            excluded: pb.excluded,
            bins: pb
                .results
                .iter()
                .map(|b| {
                    let (c_pooled, c_mean) = pick(mode, b.influence.as_ref());
                    BinBlock {
                        lo: round_sig9(b.lo),
                        hi: round_sig9(b.hi),
                        event_count: b.event_count,
                        segmentation_size: b.segmentation_size,
                        relative_size: b.influence.as_ref().map(|r| round_sig9(r.relative_size())),
                        intersection: b.influence.as_ref().map(|r| r.intersection),
                        c_pooled,
                        c_mean,
                    }
                })
                .collect(),
        })
        .collect();

    Ok(ReportDocument {
        parameters: run.config.clone(),
        corpus: CorpusCounts {
            recordings: run.preprocess.recordings,
            windows_retained: run.preprocess.windows_retained,
            windows_excluded: run.preprocess.windows_excluded,
            samples_discarded_tail: run.preprocess.samples_discarded_tail,
            windows_analyzed: run.analyses.len(),
        },
        normalization: run
            .preprocess
            .norm_stats
            .iter()
            .map(|(scope, s)| NormBlock {
                scope: scope.clone(),
                mean_x: round_sig9(s.mean_x),
                std_x: round_sig9(s.std_x),
                mean_y: round_sig9(s.mean_y),
                std_y: round_sig9(s.std_y),
                n: s.n,
            })
            .collect(),
        concepts,
        dissection: DissectionBlock {
            saccades,
            saccade_samples,
            disregarded_samples: disregarded,
            disregarded_fraction: if saccade_samples == 0 { 0.0 } else { round_sig9(disregarded as f64 / saccade_samples as f64) },
        },
        binning,
    })
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Influence value shown in charts: pooled when present, else mean.
    fn shown(c_pooled: Option<f64>, c_mean: Option<f64>) -> Option<f64> {
        c_pooled.or(c_mean)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;

fn svg_open(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, xml_escape(title));
    let (x0, y0, x1) = (LEFT, H - BOTTOM, W - RIGHT);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 15.0, xml_escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (TOP + y0) / 2.0,
        (TOP + y0) / 2.0,
        xml_escape(y_label)
    );
    s
}

fn y_scale(max: f64) -> impl Fn(f64) -> f64 {
    let top = if max > 0.0 { max * 1.1 } else { 1.0 };
    move |v: f64| (H - BOTTOM) - (v / top) * (H - BOTTOM - TOP)
}

/// Bar chart of corpus influences, one bar per labelled value.
pub fn bar_chart_svg(title: &str, bars: &[(String, f64)]) -> String {
    let mut s = svg_open(title, "concept", "concept influence c");
    let max = bars.iter().map(|b| b.1).fold(1.0, f64::max);
    let y = y_scale(max);
    let slot = (W - LEFT - RIGHT) / bars.len().max(1) as f64;
    let y1 = y(1.0);
    let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y1:.2}" x2="{}" y2="{y1:.2}" stroke="#888" stroke-dasharray="6 4"/>"##, W - RIGHT);
    for (i, (label, v)) in bars.iter().enumerate() {
        let x = LEFT + slot * i as f64 + slot * 0.15;
        let top = y(*v);
        let _ = writeln!(
            s,
            r##"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#4c72b0"><title>{}</title></rect>"##,
            slot * 0.7,
            (H - BOTTOM) - top,
            xml_escape(label)
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, x + slot * 0.35, top - 4.0, fmt_sig9(*v));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, x + slot * 0.35, H - BOTTOM + 16.0, xml_escape(label));
    }
    s.push_str("</svg>\n");
    s
}

/// Line chart of per-bin influence with a dashed reference at c = 1.
/// Bins without influence are gaps in the line.
pub fn line_chart_svg(block: &PropertyBlock) -> String {
    let mut s = svg_open(&format!("concept influence by {}", block.label), &block.label, "concept influence c");
    let values: Vec<Option<f64>> = block.bins.iter().map(|b| ReportDocument::shown(b.c_pooled, b.c_mean)).collect();
    let max = values.iter().flatten().copied().fold(1.0, f64::max);
    let y = y_scale(max);
    let (lo, hi) = (block.edges[0], *block.edges.last().unwrap());
    let x = |v: f64| LEFT + (v - lo) / (hi - lo) * (W - LEFT - RIGHT);
    let y1 = y(1.0);
    let _ = writeln!(
        s,
        r##"<line class="reference" x1="{LEFT}" y1="{y1:.2}" x2="{}" y2="{y1:.2}" stroke="#888" stroke-dasharray="6 4"/>"##,
        W - RIGHT
    );
    let mut path = String::new();
    let mut pen_down = false;
    for (b, v) in block.bins.iter().zip(&values) {
        match v {
            Some(v) => {
                let (px, py) = (x(0.5 * (b.lo + b.hi)), y(*v));
                let _ = write!(path, "{}{px:.2},{py:.2} ", if pen_down { "L" } else { "M" });
                pen_down = true;
                let _ = writeln!(s, r##"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="#c44e52"><title>{}</title></circle>"##, fmt_sig9(*v));
            }
            None => pen_down = false,
        }
    }
    if !path.is_empty() {
        let _ = writeln!(s, r##"<path d="{}" fill="none" stroke="#c44e52" stroke-width="2"/>"##, path.trim_end());
    }
    for e in [lo, hi] {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, x(e), H - BOTTOM + 16.0, fmt_sig9(e));
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_bar_chart(title: &str, bars: &[(String, f64)], path: &Path) -> Result<()> {
    if bars.is_empty() {
        return Err(Error::Degenerate("bar chart needs at least one value".into()));
    }
    io::write_file(path, bar_chart_svg(title, bars).as_bytes())
}

pub fn render_line_chart(block: &PropertyBlock, path: &Path) -> Result<()> {
    if block.bins.is_empty() {
        return Err(Error::Degenerate("line chart needs at least one bin".into()));
    }
    io::write_file(path, line_chart_svg(block).as_bytes())
}

/// What to write for a run.
#[derive(Debug, Clone)]
pub struct OutputOptions {
    pub format: ReportFormat,
    pub charts: bool,
    pub events: bool,
    /// Extra lines for `run.log`.
    pub log_lines: Vec<String>,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self { format: ReportFormat::Json, charts: true, events: true, log_lines: Vec::new() }
    }
}

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

fn concept_bars(doc: &ReportDocument, filter: impl Fn(&str) -> bool) -> Vec<(String, f64)> {
    doc.concepts
        .iter()
        .filter(|c| filter(&c.concept))
        .filter_map(|c| ReportDocument::shown(c.c_pooled, c.c_mean).map(|v| (c.concept.clone(), v)))
        .collect()
}

/// Writes report, influence tables, events and charts under `dir`. If any
/// write fails, an `INCOMPLETE` marker file is left behind.
pub fn write_outputs(run: &RunResults, dir: &Path, opts: &OutputOptions) -> Result<Vec<PathBuf>> {
    let marker = dir.join(INCOMPLETE_MARKER);
    io::write_file(&marker, b"run did not finish writing outputs\n")?;
    let result = write_outputs_inner(run, dir, opts);
    match &result {
        Ok(_) => std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?,
        Err(e) => {
            let _ = std::fs::write(&marker, format!("{e}\n"));
        }
    }
    result
}

fn write_outputs_inner(run: &RunResults, dir: &Path, opts: &OutputOptions) -> Result<Vec<PathBuf>> {
    let doc = summarize(run)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = dir.join(name);
        io::write_file(&p, bytes)?;
        written.push(p);
        Ok(())
    };
    put("report.json", doc.to_json().as_bytes())?;
    let mut results = run.corpus_influence.clone();
    results.extend(run.window_influence.iter().cloned());
    let ext = match opts.format {
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    };
    put(&format!("influence.{ext}"), io::format_report(&results, opts.format).as_bytes())?;
    if opts.events {
        put("events.csv", io::format_events(&run.all_events()).as_bytes())?;
        let mut subs = String::from("parent_event_id,window_id,phase,onset,offset\n");
        for s in run.all_sub_events() {
            let _ = writeln!(subs, "{},{},{},{},{}", s.parent_event_id, s.window_id, s.phase.as_str(), s.onset, s.offset);
        }
        put("subevents.csv", subs.as_bytes())?;
    }
    let mut log = String::from("# effective parameters\n");
    log.push_str(&run.config.to_toml());
    log.push_str("\n# run\n");
    // comment lines keep the log loadable as a config file
    for l in &opts.log_lines {
        let _ = writeln!(log, "# {l}");
    }
    put("run.log", log.as_bytes())?;

    if opts.charts {
        let main = concept_bars(&doc, |c| c == FIXATION || c == SACCADE);
        if !main.is_empty() {
            put("charts/concepts.svg", bar_chart_svg("concept influence by event type", &main).as_bytes())?;
        }
        let phases = concept_bars(&doc, |c| c.starts_with("saccade."));
        if !phases.is_empty() {
            put("charts/saccade_phases.svg", bar_chart_svg("concept influence by saccade phase", &phases).as_bytes())?;
        }
        for block in &doc.binning {
            put(&format!("charts/{}.svg", block.property), line_chart_svg(block).as_bytes())?;
        }
    }
    Ok(written)
}

/// Property blocks keyed by property, for callers that need one.
pub fn property_block(doc: &ReportDocument, property: EventProperty) -> Option<&PropertyBlock> {
    doc.binning.iter().find(|b| b.property == property.as_str())
}
