//! `gazeci`: command-line front end for the gaze-concepts pipeline.
//!
//! Exit codes: 0 success, 1 usage or configuration, 2 data, 3 I/O.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use gaze_concepts::binning::{bin_concept_label, EventProperty};
use gaze_concepts::config::{BinModeChoice, EyeChoice, PipelineConfig};
use gaze_concepts::error::{Error, Result};
use gaze_concepts::influence::{AggregateMode, SquashMode};
use gaze_concepts::io::{self, ReportFormat, RunManifest};
use gaze_concepts::pipeline::{self, analyze_window};
use gaze_concepts::preprocess::{self, NormScope};
use gaze_concepts::report::{self, OutputOptions};
use gaze_concepts::synth::{self, AttributionMode, CorpusSpec};

const OUT_ENV: &str = "GAZECI_OUT";

#[derive(Parser, Debug)]
#[command(name = "gazeci", version, about = "Gaze events as concepts: detection, dissection and concept influence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus with ground truth and proxy attributions.
    Synth(SynthArgs),
    /// Turn recordings into velocity windows.
    Preprocess(InputArgs),
    /// Detect fixations and saccades in recordings.
    Detect(InputArgs),
    /// Dissect retained saccades into phases.
    Dissect(InputArgs),
    /// Concept influence per window and pooled over the manifest.
    Influence(ManifestArgs),
    /// Concept influence per property bin.
    Bin(ManifestArgs),
    /// Summary report, influence tables and charts.
    Report(ManifestArgs),
    /// End-to-end run from a manifest.
    Run(ManifestArgs),
}

#[derive(Args, Debug, Default)]
struct Params {
    /// TOML configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eye: Option<EyeChoice>,
    #[arg(long)]
    sampling_rate: Option<f64>,
    #[arg(long)]
    sg_window: Option<usize>,
    #[arg(long)]
    sg_order: Option<usize>,
    #[arg(long)]
    clamp: Option<f64>,
    #[arg(long)]
    window_len: Option<usize>,
    #[arg(long)]
    missing_max_frac: Option<f64>,
    #[arg(long)]
    norm_scope: Option<NormScope>,
    #[arg(long)]
    fix_max_velocity: Option<f64>,
    #[arg(long)]
    fix_min_duration: Option<f64>,
    #[arg(long)]
    fix_max_dispersion: Option<f64>,
    #[arg(long)]
    sacc_lambda: Option<f64>,
    #[arg(long)]
    sacc_min_duration: Option<f64>,
    #[arg(long)]
    sacc_max_duration: Option<f64>,
    #[arg(long)]
    sacc_min_peak_velocity: Option<f64>,
    #[arg(long)]
    sacc_max_peak_velocity: Option<f64>,
    #[arg(long)]
    peak_ratio: Option<f64>,
    #[arg(long)]
    flank_ratio: Option<f64>,
    #[arg(long)]
    top_frac: Option<f64>,
    #[arg(long)]
    squash: Option<SquashMode>,
    #[arg(long)]
    aggregate: Option<AggregateMode>,
    #[arg(long)]
    bins: Option<usize>,
    /// Comma-separated explicit bin edges.
    #[arg(long, value_delimiter = ',')]
    bin_edges: Option<Vec<f64>>,
    #[arg(long)]
    bin_mode: Option<BinModeChoice>,
    /// Restrict binning to one property.
    #[arg(long)]
    property: Option<EventProperty>,
}

impl Params {
    /// Defaults, then the config file (or `fallback`), then flags.
    fn resolve(&self, fallback: Option<&Path>) -> Result<PipelineConfig> {
        let mut c = match self.config.as_deref().or(fallback) {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $($field:tt).+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($field).+ = v;
                }
            };
        }
        set!(eye => eye);
        set!(sampling_rate => sampling_rate_hz);
        set!(sg_window => preprocess.sg_window);
        set!(sg_order => preprocess.sg_order);
        set!(clamp => preprocess.clamp);
        set!(window_len => preprocess.window_len);
        set!(missing_max_frac => preprocess.missing_max_frac);
        set!(norm_scope => preprocess.norm_scope);
        set!(fix_max_velocity => detect.fix_max_velocity);
        set!(fix_min_duration => detect.fix_min_duration_ms);
        set!(fix_max_dispersion => detect.fix_max_dispersion_deg);
        set!(sacc_lambda => detect.sacc_lambda);
        set!(sacc_min_duration => detect.sacc_min_duration_ms);
        set!(sacc_max_duration => detect.sacc_max_duration_ms);
        set!(sacc_min_peak_velocity => detect.sacc_min_peak_velocity);
        set!(sacc_max_peak_velocity => detect.sacc_max_peak_velocity);
        set!(peak_ratio => dissect.peak_ratio);
        set!(flank_ratio => dissect.flank_ratio);
        set!(top_frac => influence.top_frac);
        set!(squash => influence.squash);
        set!(aggregate => influence.aggregate);
        set!(bins => binning.bins);
        set!(bin_mode => binning.mode);
        if let Some(edges) = &self.bin_edges {
            c.binning.edges = edges.clone();
            if self.bin_mode.is_none() {
                c.binning.mode = BinModeChoice::Explicit;
            }
        }
        if let Some(p) = self.property {
            c.binning.properties = vec![p];
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    recordings: usize,
    /// Samples per recording.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 2023)]
    seed: u64,
    #[arg(long, default_value = "speed")]
    mode: AttributionMode,
    /// Velocity noise (deg/s) of the synthetic traces.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[command(flatten)]
    params: Params,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Gaze CSV files.
    #[arg(long = "input", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Output file (detect, dissect) or directory (preprocess).
    #[arg(long, env = OUT_ENV)]
    out: PathBuf,
    #[command(flatten)]
    params: Params,
}

#[derive(Args, Debug)]
struct ManifestArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory, or file for `influence` and `bin`. Defaults to the
    /// manifest's `output_dir`.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    /// Also render SVG charts (`report`; `run` always renders them).
    #[arg(long)]
    charts: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    params: Params,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gazeci: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth_cmd(a),
        Command::Preprocess(a) => preprocess_cmd(a),
        Command::Detect(a) => detect_cmd(a, false),
        Command::Dissect(a) => detect_cmd(a, true),
        Command::Influence(a) => influence_cmd(a),
        Command::Bin(a) => bin_cmd(a),
        Command::Report(a) => report_cmd(a, false),
        Command::Run(a) => report_cmd(a, true),
    }
}

fn synth_cmd(a: SynthArgs) -> Result<()> {
    let cfg = a.params.resolve(None)?;
    let spec = CorpusSpec {
        recordings: a.recordings,
        seed: a.seed,
        attribution_mode: a.mode,
        plan: synth::RandomPlanSpec { total_samples: a.samples, velocity_noise_sd: a.noise, ..Default::default() },
        preprocess: cfg.preprocess.clone(),
    };
    let files = synth::write_corpus(&a.out, &spec)?;
    io::write_file(&a.out.join("config.toml"), cfg.to_toml().as_bytes())?;
    println!(
        "wrote {} recordings, {} windows; manifest {}",
        files.recordings,
        files.windows,
        files.manifest.display()
    );
    Ok(())
}

fn load_windows(inputs: &[PathBuf], cfg: &PipelineConfig) -> Result<(Vec<preprocess::VelocityWindow>, pipeline::PreprocessSummary)> {
    pipeline::preprocess_recordings(inputs, cfg)
}

fn preprocess_cmd(a: InputArgs) -> Result<()> {
    let cfg = a.params.resolve(None)?;
    let (windows, summary) = load_windows(&a.inputs, &cfg)?;
    let normalized = preprocess::normalize_windows(&windows, cfg.preprocess.norm_scope)?;
    let mut table = String::from("window_id,recording_id,start_index,length,missing\n");
    let mut samples = String::from("window_id,index,vx,vy,px,py,valid\n");
    for w in &normalized {
        let _ = writeln!(table, "{},{},{},{},{}", w.window_id, w.recording_id, w.start_index, w.len(), w.missing_count());
        for i in 0..w.len() {
            let _ = writeln!(
                samples,
                "{},{i},{},{},{},{},{}",
                w.window_id,
                io::fmt_sig9(w.vx[i]),
                io::fmt_sig9(w.vy[i]),
                io::fmt_sig9(w.px[i]),
                io::fmt_sig9(w.py[i]),
                w.valid_mask[i]
            );
        }
    }
    io::write_file(&a.out.join("windows.csv"), table.as_bytes())?;
    io::write_file(&a.out.join("velocities.csv"), samples.as_bytes())?;
    println!(
        "{} windows retained, {} excluded, {} tail samples discarded",
        summary.windows_retained, summary.windows_excluded, summary.samples_discarded_tail
    );
    Ok(())
}

fn detect_cmd(a: InputArgs, dissect: bool) -> Result<()> {
    let cfg = a.params.resolve(None)?;
    let (windows, _) = load_windows(&a.inputs, &cfg)?;
    let analyses: Vec<pipeline::WindowAnalysis> =
        windows.into_iter().map(|w| analyze_window(w, &cfg)).collect::<Result<_>>()?;
    if dissect {
        let mut out = String::from("parent_event_id,window_id,phase,onset,offset\n");
        let mut disregarded = 0;
        for a in &analyses {
            for d in &a.dissections {
                disregarded += d.disregarded;
                for s in &d.sub_events {
                    let _ = writeln!(out, "{},{},{},{},{}", s.parent_event_id, s.window_id, s.phase.as_str(), s.onset, s.offset);
                }
            }
        }
        io::write_file(&a.out, out.as_bytes())?;
        println!("{disregarded} disregarded samples");
    } else {
        let events: Vec<_> = analyses.into_iter().flat_map(|a| a.events).collect();
        io::write_events(&events, &a.out)?;
        println!("{} events", events.len());
    }
    Ok(())
}

fn load_manifest(a: &ManifestArgs) -> Result<(RunManifest, PipelineConfig)> {
    let manifest = RunManifest::load(&a.manifest)?;
    let cfg = a.params.resolve(manifest.config.as_deref())?;
    Ok((manifest, cfg))
}

fn output_path(a: &ManifestArgs, manifest: &RunManifest, default_name: &str) -> Result<PathBuf> {
    a.out
        .clone()
        .or_else(|| manifest.output_dir.as_ref().map(|d| d.join(default_name)))
        .ok_or_else(|| Error::Config(format!("no output path: pass --out or set ${OUT_ENV}")))
}

fn influence_cmd(a: ManifestArgs) -> Result<()> {
    let (manifest, cfg) = load_manifest(&a)?;
    let run = pipeline::run_pipeline(&manifest, &cfg, a.jobs)?;
    let ext = if matches!(a.format, ReportFormat::Csv) { "csv" } else { "json" };
    let path = output_path(&a, &manifest, &format!("influence.{ext}"))?;
    let mut results = run.corpus_influence.clone();
    results.extend(run.window_influence.iter().cloned());
    io::write_report(&results, &path, a.format)?;
    for r in &run.corpus_influence {
        println!("{:<14} c={} (mean {})", r.concept, io::fmt_sig9(r.c), r.c_mean.map(io::fmt_sig9).unwrap_or_default());
    }
    Ok(())
}

fn bin_cmd(a: ManifestArgs) -> Result<()> {
    let (manifest, cfg) = load_manifest(&a)?;
    let run = pipeline::run_pipeline(&manifest, &cfg, a.jobs)?;
    let path = output_path(&a, &manifest, "binned.csv")?;
    let mut out = String::from("property,bin,lo,hi,event_count,segmentation_size,intersection,c,c_mean\n");
    for pb in &run.binned {
        for b in &pb.results {
            let r = b.influence.as_ref();
            let _ = writeln!(
                out,
                "{},\"{}\",{},{},{},{},{},{},{}",
                pb.property.as_str(),
                bin_concept_label(pb.property, b.lo, b.hi),
                io::fmt_sig9(b.lo),
                io::fmt_sig9(b.hi),
                b.event_count,
                b.segmentation_size,
                r.map(|r| r.intersection.to_string()).unwrap_or_default(),
                r.map(|r| io::fmt_sig9(r.c)).unwrap_or_default(),
                r.and_then(|r| r.c_mean).map(io::fmt_sig9).unwrap_or_default(),
            );
        }
    }
    io::write_file(&path, out.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn report_cmd(a: ManifestArgs, full: bool) -> Result<()> {
    let started = Instant::now();
    let (manifest, cfg) = load_manifest(&a)?;
    let dir = output_path(&a, &manifest, "")?;
    let run = pipeline::run_pipeline(&manifest, &cfg, a.jobs)?;
    let opts = OutputOptions {
        format: a.format,
        charts: full || a.charts,
        events: full,
        log_lines: vec![
            format!("manifest = {}", a.manifest.display()),
            format!("entries = {}", manifest.entries.len()),
            format!("jobs = {}", a.jobs),
            format!("elapsed_ms = {}", started.elapsed().as_millis()),
        ],
    };
    let written = report::write_outputs(&run, &dir, &opts).map_err(|e| e.in_stage("report"))?;
    for r in &run.corpus_influence {
        println!("{:<14} c={} (mean {})", r.concept, io::fmt_sig9(r.c), r.c_mean.map(io::fmt_sig9).unwrap_or_default());
    }
    println!("wrote {} files to {}", written.len(), dir.display());
    Ok(())
}
