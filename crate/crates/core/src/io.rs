//! File formats: gaze CSV, attribution maps, run manifests, event tables
//! and influence reports.
//!
//! Gaze CSV is `t_ms,x_deg,y_deg` (monocular) or
//! `t_ms,x_left_deg,y_left_deg,x_right_deg,y_right_deg` (binocular).
//! Missing coordinates may be written as an empty field, `NaN` or `.`.
//!
//! Attribution maps come in two text forms. The dense form carries a two
//! line header followed by one row of `L` values per channel:
//!
//! ```text
//! D=2
//! L=1000
//! 0.12 0.5 ...
//! -0.3 0.0 ...
//! ```
//!
//! The long form is a CSV with header `channel,index,value`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::{EventKind, ExclusionReason, GazeEvent};
use crate::error::{Error, Result};
use crate::influence::{InfluenceResult, Scope};

/// Which eye a positional track belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eye {
    Left,
    Right,
    Mono,
}

impl Eye {
    pub fn as_str(self) -> &'static str {
        match self {
            Eye::Left => "left",
            Eye::Right => "right",
            Eye::Mono => "mono",
        }
    }
}

impl std::str::FromStr for Eye {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Eye::Left),
            "right" => Ok(Eye::Right),
            "mono" => Ok(Eye::Mono),
            other => Err(Error::Config(format!("unknown eye '{other}'"))),
        }
    }
}

/// One positional sample in degrees of visual angle. Missing samples hold
/// NaN in both coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t_ms: i64,
    pub x_deg: f64,
    pub y_deg: f64,
}

impl GazeSample {
    pub fn new(t_ms: i64, x_deg: f64, y_deg: f64) -> Self {
        if x_deg.is_nan() || y_deg.is_nan() {
            Self::missing(t_ms)
        } else {
            Self { t_ms, x_deg, y_deg }
        }
    }

    pub fn missing(t_ms: i64) -> Self {
        Self { t_ms, x_deg: f64::NAN, y_deg: f64::NAN }
    }

    pub fn is_missing(&self) -> bool {
        self.x_deg.is_nan()
    }
}

/// A gaze recording with one track per recorded eye.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeRecording {
    pub recording_id: String,
    pub sampling_rate_hz: f64,
    pub tracks: BTreeMap<Eye, Vec<GazeSample>>,
    pub source_meta: BTreeMap<String, String>,
}

impl GazeRecording {
    pub fn monocular(recording_id: impl Into<String>, sampling_rate_hz: f64, samples: Vec<GazeSample>) -> Self {
        Self {
            recording_id: recording_id.into(),
            sampling_rate_hz,
            tracks: BTreeMap::from([(Eye::Mono, samples)]),
            source_meta: BTreeMap::new(),
        }
    }

    pub fn is_binocular(&self) -> bool {
        self.tracks.len() > 1
    }

    /// Number of samples (all tracks share the timestamps).
    pub fn len(&self) -> usize {
        self.tracks.values().next().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The single track of a monocular recording.
    pub fn samples(&self) -> Result<&[GazeSample]> {
        match self.tracks.len() {
            1 => Ok(self.tracks.values().next().map(Vec::as_slice).unwrap_or_default()),
            n => Err(Error::Config(format!(
                "recording {} has {n} eye tracks; select one eye first",
                self.recording_id
            ))),
        }
    }
}

/// Column mapping for gaze CSV files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazeSchema {
    pub t: String,
    pub tracks: Vec<(Eye, String, String)>,
}

impl GazeSchema {
    pub fn monocular() -> Self {
        Self { t: "t_ms".into(), tracks: vec![(Eye::Mono, "x_deg".into(), "y_deg".into())] }
    }

    pub fn binocular() -> Self {
        Self {
            t: "t_ms".into(),
            tracks: vec![
                (Eye::Left, "x_left_deg".into(), "y_left_deg".into()),
                (Eye::Right, "x_right_deg".into(), "y_right_deg".into()),
            ],
        }
    }

    /// Picks the monocular or binocular layout from a header row.
    pub fn detect(headers: &[&str]) -> Option<Self> {
        let has = |name: &str| headers.contains(&name);
        if has("t_ms") && has("x_left_deg") && has("y_left_deg") && has("x_right_deg") && has("y_right_deg") {
            Some(Self::binocular())
        } else if has("t_ms") && has("x_deg") && has("y_deg") {
            Some(Self::monocular())
        } else {
            None
        }
    }
}

fn parse_coordinate(field: &str) -> f64 {
    let field = field.trim();
    if field.is_empty() || field == "." {
        return f64::NAN;
    }
    field.parse::<f64>().ok().filter(|v| v.is_finite()).unwrap_or(f64::NAN)
}

/// Loads a gaze CSV file. With `schema = None` the layout is detected from
/// the header.
pub fn load_gaze_csv(path: &Path, schema: Option<&GazeSchema>) -> Result<GazeRecording> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut rec = read_gaze_csv(file, &path.display().to_string(), schema)?;
    rec.recording_id = id;
    rec.source_meta.insert("path".into(), path.display().to_string());
    Ok(rec)
}

/// Reads gaze CSV from any reader. `origin` names the source in errors.
pub fn read_gaze_csv<R: Read>(reader: R, origin: &str, schema: Option<&GazeSchema>) -> Result<GazeRecording> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::format(origin, e.to_string()))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::data(origin, "empty file"));
    }
    let names: Vec<&str> = headers.iter().collect();
    let schema = match schema {
        Some(s) => s.clone(),
        None => GazeSchema::detect(&names)
            .ok_or_else(|| Error::format(origin, format!("unrecognized header: {}", names.join(","))))?,
    };
    let col = |name: &str| {
        names
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::format(origin, format!("missing column '{name}'")))
    };
    let t_col = col(&schema.t)?;
    let mut cols = Vec::with_capacity(schema.tracks.len());
    for (eye, x, y) in &schema.tracks {
        cols.push((*eye, col(x)?, col(y)?));
    }

    let mut tracks: BTreeMap<Eye, Vec<GazeSample>> = cols.iter().map(|(eye, _, _)| (*eye, Vec::new())).collect();
    let mut prev_t: Option<i64> = None;
    for (row, record) in rdr.records().enumerate() {
        // Data rows are numbered from 1, header excluded.
        let row_no = row + 1;
        let record = record.map_err(|e| Error::format(origin, format!("row {row_no}: {e}")))?;
        let t_field = record.get(t_col).unwrap_or("");
        let t: i64 = t_field
            .parse()
            .map_err(|_| Error::data(origin, format!("row {row_no}: timestamp '{t_field}' is not an integer")))?;
        if let Some(p) = prev_t {
            if t <= p {
                return Err(Error::data(
                    origin,
                    format!("row {row_no}: timestamp {t} does not increase (previous {p})"),
                ));
            }
        }
        prev_t = Some(t);
        for (eye, xc, yc) in &cols {
            let x = parse_coordinate(record.get(*xc).unwrap_or(""));
            let y = parse_coordinate(record.get(*yc).unwrap_or(""));
            tracks.get_mut(eye).expect("track exists").push(GazeSample::new(t, x, y));
        }
    }
    if prev_t.is_none() {
        return Err(Error::data(origin, "empty file: no data rows"));
    }
    Ok(GazeRecording {
        recording_id: String::new(),
        sampling_rate_hz: 1000.0,
        tracks,
        source_meta: BTreeMap::new(),
    })
}

/// Writes a recording in the gaze CSV schema. Coordinates use the shortest
/// exact representation so loading returns identical values.
pub fn write_gaze_csv(rec: &GazeRecording, path: &Path) -> Result<()> {
    let mut out = String::new();
    let binocular = rec.tracks.contains_key(&Eye::Left) && rec.tracks.contains_key(&Eye::Right);
    let coord = |v: f64| if v.is_nan() { "NaN".to_string() } else { format!("{v}") };
    if binocular {
        out.push_str("t_ms,x_left_deg,y_left_deg,x_right_deg,y_right_deg\n");
        let (l, r) = (&rec.tracks[&Eye::Left], &rec.tracks[&Eye::Right]);
        for (a, b) in l.iter().zip(r) {
            let _ = writeln!(out, "{},{},{},{},{}", a.t_ms, coord(a.x_deg), coord(a.y_deg), coord(b.x_deg), coord(b.y_deg));
        }
    } else {
        out.push_str("t_ms,x_deg,y_deg\n");
        for s in rec.samples()? {
            let _ = writeln!(out, "{},{},{}", s.t_ms, coord(s.x_deg), coord(s.y_deg));
        }
    }
    write_file(path, out.as_bytes())
}

/// Keeps only the requested eye's track.
pub fn select_eye(rec: &GazeRecording, eye: Eye) -> Result<GazeRecording> {
    let track = rec.tracks.get(&eye).ok_or_else(|| {
        let present: Vec<&str> = rec.tracks.keys().map(|e| e.as_str()).collect();
        Error::Config(format!(
            "recording {} has no {} eye data (present: {})",
            rec.recording_id,
            eye.as_str(),
            present.join(",")
        ))
    })?;
    Ok(GazeRecording {
        recording_id: rec.recording_id.clone(),
        sampling_rate_hz: rec.sampling_rate_hz,
        tracks: BTreeMap::from([(eye, track.clone())]),
        source_meta: rec.source_meta.clone(),
    })
}

/// Right eye for binocular input, the single track otherwise.
pub fn select_default_eye(rec: &GazeRecording) -> Result<GazeRecording> {
    if rec.is_binocular() {
        select_eye(rec, Eye::Right)
    } else {
        Ok(rec.clone())
    }
}

/// Per-channel, per-step relevance for one window, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMap {
    pub window_id: String,
    pub channels: usize,
    pub length: usize,
    pub values: Vec<f64>,
    pub target_label: Option<String>,
}

impl AttributionMap {
    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.values[ch * self.length..(ch + 1) * self.length]
    }

    pub fn get(&self, ch: usize, i: usize) -> f64 {
        self.values[ch * self.length + i]
    }

    /// Checks finiteness and the expected `(channels, length)` shape.
    pub fn validate(&self, channels: usize, length: usize) -> Result<()> {
        if self.channels != channels || self.length != length || self.values.len() != channels * length {
            return Err(Error::Alignment {
                window_id: self.window_id.clone(),
                message: format!(
                    "attribution shape D={} L={} ({} values) does not match window D={channels} L={length}",
                    self.channels,
                    self.length,
                    self.values.len()
                ),
            });
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(
                &self.window_id,
                format!("non-finite attribution at channel {}, index {}", pos / length, pos % length),
            ));
        }
        Ok(())
    }
}

fn parse_header_value(line: &str, key: &str, origin: &str) -> Result<usize> {
    line.trim()
        .strip_prefix(key)
        .and_then(|rest| rest.trim().strip_prefix('='))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::format(origin, format!("expected '{key}=<integer>' header, got '{}'", line.trim())))
}

/// Parses an attribution map in either the dense or long text form.
pub fn parse_attribution(text: &str, window_id: &str, origin: &str) -> Result<AttributionMap> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    if first.starts_with("D") && first.contains('=') {
        parse_attribution_dense(text, window_id, origin)
    } else {
        parse_attribution_long(text, window_id, origin)
    }
}

fn parse_attribution_dense(text: &str, window_id: &str, origin: &str) -> Result<AttributionMap> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let channels = parse_header_value(lines.next().unwrap_or(""), "D", origin)?;
    let length = parse_header_value(lines.next().unwrap_or(""), "L", origin)?;
    let mut target_label = None;
    let mut values = Vec::with_capacity(channels * length);
    for line in lines {
        let line = line.trim();
        if let Some(label) = line.strip_prefix("label=") {
            target_label = Some(label.trim().to_string());
            continue;
        }
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::format(origin, format!("unparseable attribution value '{tok}'")))?;
            values.push(v);
        }
    }
    if values.len() != channels * length {
        return Err(Error::Alignment {
            window_id: window_id.to_string(),
            message: format!("{origin}: header declares D={channels} L={length} but {} values follow", values.len()),
        });
    }
    Ok(AttributionMap { window_id: window_id.to_string(), channels, length, values, target_label })
}

fn parse_attribution_long(text: &str, window_id: &str, origin: &str) -> Result<AttributionMap> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::format(origin, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["channel", "index", "value"] {
        return Err(Error::format(origin, "expected dense header 'D=' or CSV header 'channel,index,value'"));
    }
    let mut cells = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(origin, format!("row {}: {e}", row + 1)))?;
        let bad = || Error::format(origin, format!("row {}: malformed attribution row", row + 1));
        let ch: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let idx: usize = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let v: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        cells.push((ch, idx, v));
    }
    let channels = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let length = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    let mut values = vec![f64::NAN; channels * length];
    let mut seen = vec![false; channels * length];
    for (ch, idx, v) in cells {
        let pos = ch * length + idx;
        if seen[pos] {
            return Err(Error::data(origin, format!("duplicate cell (channel {ch}, index {idx})")));
        }
        seen[pos] = true;
        values[pos] = v;
    }
    if let Some(pos) = seen.iter().position(|s| !s) {
        return Err(Error::Alignment {
            window_id: window_id.to_string(),
            message: format!("{origin}: no value for channel {}, index {}", pos / length, pos % length),
        });
    }
    Ok(AttributionMap { window_id: window_id.to_string(), channels, length, values, target_label: None })
}

pub fn load_attribution_file(path: &Path, window_id: &str) -> Result<AttributionMap> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_attribution(&text, window_id, &path.display().to_string())
}

/// Serializes in the dense form with exact (shortest round-trip) values.
pub fn format_attribution_dense(map: &AttributionMap) -> String {
    let mut out = String::with_capacity(map.values.len() * 12);
    let _ = writeln!(out, "D={}", map.channels);
    let _ = writeln!(out, "L={}", map.length);
    if let Some(label) = &map.target_label {
        let _ = writeln!(out, "label={label}");
    }
    for ch in 0..map.channels {
        for (i, v) in map.channel(ch).iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_attribution(map: &AttributionMap, path: &Path) -> Result<()> {
    write_file(path, format_attribution_dense(map).as_bytes())
}

/// One (recording, attribution, window) triple of a run manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub recording: PathBuf,
    pub attribution: PathBuf,
    pub window_id: String,
}

/// TOML run manifest. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub entries: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: RunManifest =
            toml::from_str(&text).map_err(|e| Error::format(path.display(), e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        manifest.config = manifest.config.as_deref().map(resolve);
        manifest.output_dir = manifest.output_dir.as_deref().map(resolve);
        for e in &mut manifest.entries {
            e.recording = resolve(&e.recording);
            e.attribution = resolve(&e.attribution);
        }
        Ok(manifest)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    /// Recording paths in first-appearance order, deduplicated.
    pub fn recordings(&self) -> Vec<PathBuf> {
        let mut seen = std::collections::BTreeSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.recording.clone()))
            .map(|e| e.recording.clone())
            .collect()
    }
}

/// Loads every attribution referenced by the manifest and validates it
/// against the `(channels, length)` of its window.
pub fn load_attributions(
    manifest: &RunManifest,
    shapes: &BTreeMap<String, (usize, usize)>,
) -> Result<Vec<AttributionMap>> {
    manifest
        .entries
        .iter()
        .map(|entry| {
            let &(d, l) = shapes.get(&entry.window_id).ok_or_else(|| Error::Alignment {
                window_id: entry.window_id.clone(),
                message: "window id does not resolve to a retained window".into(),
            })?;
            let map = load_attribution_file(&entry.attribution, &entry.window_id)?;
            map.validate(d, l)?;
            Ok(map)
        })
        .collect()
}

/// Rounds to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Formats with 9 significant digits, shortest form; NaN becomes empty.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{}", round_sig9(x))
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig9).unwrap_or_default()
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub const EVENT_COLUMNS: &str =
    "event_id,kind,window_id,onset,offset,duration_ms,peak_velocity,amplitude_deg,dispersion_deg,velocity_std,excluded,reason";

/// Event table as CSV text, rows sorted by (window_id, onset, kind, event_id).
pub fn format_events(events: &[GazeEvent]) -> String {
    let mut sorted: Vec<&GazeEvent> = events.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.window_id, a.onset, a.kind, &a.event_id).cmp(&(&b.window_id, b.onset, b.kind, &b.event_id))
    });
    let mut out = String::from(EVENT_COLUMNS);
    out.push('\n');
    for e in sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            e.event_id,
            e.kind.as_str(),
            e.window_id,
            e.onset,
            e.offset,
            fmt_sig9(e.duration_ms),
            fmt_opt(e.peak_velocity),
            fmt_opt(e.amplitude_deg),
            fmt_opt(e.dispersion_deg),
            fmt_opt(e.velocity_std),
            e.exclusion.is_some(),
            e.exclusion.map(ExclusionReason::as_str).unwrap_or(""),
        );
    }
    out
}

pub fn write_events(events: &[GazeEvent], path: &Path) -> Result<()> {
    write_file(path, format_events(events).as_bytes())
}

/// Parses an event table written by [`write_events`].
pub fn read_events(path: &Path) -> Result<Vec<GazeEvent>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_events(&text, &path.display().to_string())
}

pub fn parse_events(text: &str, origin: &str) -> Result<Vec<GazeEvent>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::format(origin, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>().join(",") != EVENT_COLUMNS {
        return Err(Error::format(origin, "unexpected event table header"));
    }
    let mut events = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let row_no = row + 1;
        let rec = rec.map_err(|e| Error::format(origin, format!("row {row_no}: {e}")))?;
        let bad = |what: &str| Error::format(origin, format!("row {row_no}: bad {what}"));
        let opt = |i: usize, what: &str| -> Result<Option<f64>> {
            match rec.get(i).unwrap_or("") {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(what)),
            }
        };
        let kind = match &rec[1] {
            "fixation" => EventKind::Fixation,
            "saccade" => EventKind::Saccade,
            _ => return Err(bad("kind")),
        };
        let exclusion = match &rec[11] {
            "" => None,
            s => Some(ExclusionReason::parse(s).ok_or_else(|| bad("reason"))?),
        };
        events.push(GazeEvent {
            event_id: rec[0].to_string(),
            kind,
            window_id: rec[2].to_string(),
            onset: rec[3].parse().map_err(|_| bad("onset"))?,
            offset: rec[4].parse().map_err(|_| bad("offset"))?,
            duration_ms: rec[5].parse().map_err(|_| bad("duration_ms"))?,
            peak_velocity: opt(6, "peak_velocity")?,
            amplitude_deg: opt(7, "amplitude_deg")?,
            dispersion_deg: opt(8, "dispersion_deg")?,
            velocity_std: opt(9, "velocity_std")?,
            exclusion,
        });
    }
    Ok(events)
}

/// Output format of influence reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Config(format!("unknown format '{s}'"))),
        }
    }
}

pub const REPORT_COLUMNS: &str = "concept,scope,window_id,intersection,c,c_mean,l_total,s_total,k_total,windows,skipped";

fn sorted_results(results: &[InfluenceResult]) -> Vec<&InfluenceResult> {
    let mut sorted: Vec<&InfluenceResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        (a.scope, &a.window_id, &a.concept).cmp(&(b.scope, &b.window_id, &b.concept))
    });
    sorted
}

/// Influence results in the requested text format, sorted by
/// (scope, window_id, concept).
pub fn format_report(results: &[InfluenceResult], format: ReportFormat) -> String {
    let sorted = sorted_results(results);
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(REPORT_COLUMNS);
            out.push('\n');
            for r in sorted {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    r.concept,
                    r.scope.as_str(),
                    r.window_id.as_deref().unwrap_or(""),
                    r.intersection,
                    fmt_sig9(r.c),
                    fmt_opt(r.c_mean),
                    r.l_total,
                    r.s_total,
                    r.k_total,
                    r.windows,
                    r.skipped
                );
            }
            out
        }
        ReportFormat::Json => {
            let rows: Vec<InfluenceResult> = sorted.into_iter().map(InfluenceResult::rounded).collect();
            let mut s = serde_json::to_string_pretty(&rows).expect("results serialize");
            s.push('\n');
            s
        }
    }
}

pub fn write_report(results: &[InfluenceResult], path: &Path, format: ReportFormat) -> Result<()> {
    write_file(path, format_report(results, format).as_bytes())
}

/// Parses a report written by [`write_report`] in JSON form.
pub fn parse_report_json(text: &str) -> Result<Vec<InfluenceResult>> {
    serde_json::from_str(text).map_err(|e| Error::format("report", e.to_string()))
}

/// Parses a report written by [`write_report`] in CSV form.
pub fn parse_report_csv(text: &str) -> Result<Vec<InfluenceResult>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format("report", e.to_string()))?;
        let bad = || Error::format("report", format!("row {}: malformed", row + 1));
        let num = |i: usize| rec[i].parse::<u64>().map_err(|_| bad());
        out.push(InfluenceResult {
            concept: rec[0].to_string(),
            scope: match &rec[1] {
                "window" => Scope::Window,
                "corpus" => Scope::Corpus,
                _ => return Err(bad()),
            },
            window_id: Some(rec[2].to_string()).filter(|s| !s.is_empty()),
            intersection: num(3)?,
            c: rec[4].parse().map_err(|_| bad())?,
            c_mean: if rec[5].is_empty() { None } else { Some(rec[5].parse().map_err(|_| bad())?) },
            l_total: num(6)?,
            s_total: num(7)?,
            k_total: num(8)?,
            windows: num(9)? as usize,
            skipped: num(10)? as usize,
        });
    }
    Ok(out)
}
