//! Argument parsing and subcommand dispatch.
//!
//! Exit codes: 0 success, 1 when any file failed (the report is still
//! written), 2 for usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use stemtrace_core::dataset::batch::image_id_from_mask_name;
use stemtrace_core::dataset::{
    batch_evaluate, batch_generate, parse_annotation_detailed, split_dataset, GenerateOptions,
};
use stemtrace_core::report::{metrics_csv, metrics_table, F1Columns};

use crate::request::{render_png, GenerateRequest};
use crate::service::{serve, ServiceConfig};
use crate::VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "stemtrace", version = VERSION, about = "Stem masks from control-point annotations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a mask PNG for every annotation in a directory.
    Generate(GenerateArgs),
    /// Score predicted masks against ground-truth masks.
    Evaluate(EvaluateArgs),
    /// Write a deterministic train/val/test split manifest.
    Split(SplitArgs),
    /// Run the HTTP service (configured through STEMTRACE_* variables).
    Serve,
    /// Render one annotation to a PNG file or stdout.
    Preview(PreviewArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Stroke width in pixels; overrides the annotation's own value.
    #[arg(long)]
    pub tau: Option<u32>,
    /// Triplicate the end control points so the curve reaches them.
    #[arg(long)]
    pub clamp_ends: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub samples_per_segment: Option<u64>,
}

impl RenderArgs {
    fn samples(&self) -> Option<usize> {
        self.samples_per_segment.map(|n| n as usize)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub render: RenderArgs,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum F1Choice {
    Standard,
    Paper,
    Both,
}

impl From<F1Choice> for F1Columns {
    fn from(c: F1Choice) -> Self {
        match c {
            F1Choice::Standard => F1Columns::Standard,
            F1Choice::Paper => F1Columns::Paper,
            F1Choice::Both => F1Columns::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
    /// F1 columns in the table; CSV always has both.
    #[arg(long, value_enum, default_value_t = F1Choice::Standard)]
    pub f1: F1Choice,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Directory whose annotations (*.json) or masks (*.png) name the images.
    #[arg(long, value_name = "DIR")]
    pub n_from: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Manifest path; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[arg(long, value_name = "FILE")]
    pub annotation: PathBuf,
    /// PNG path; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub render: RenderArgs,
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_FAILURES
        }
    }
}

fn dispatch(command: Command) -> Result<i32, String> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Split(a) => split(a),
        Command::Serve => run_server(),
        Command::Preview(a) => preview(a),
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| format!("stdout: {e}"))
        }
    }
}

fn generate(a: GenerateArgs) -> Result<i32, String> {
    let opts = GenerateOptions {
        tau: a.render.tau,
        samples_per_segment: a.render.samples(),
        clamp_ends: a.render.clamp_ends,
        jobs: a.jobs,
    };
    let report = batch_generate(&a.input, &a.out, &opts).map_err(|e| e.to_string())?;
    for s in &report.successes {
        println!(
            "{}\t{}\ttau={}\tstems={}\t{:.1} ms",
            s.image_id,
            s.mask.display(),
            s.tau,
            s.stems,
            s.millis
        );
    }
    for f in &report.failures {
        eprintln!("failed: {}: {}", f.file.display(), f.error);
    }
    eprintln!(
        "{} masks written, {} failures",
        report.successes.len(),
        report.failures.len()
    );
    Ok(if report.failures.is_empty() { EXIT_OK } else { EXIT_FAILURES })
}

fn evaluate(a: EvaluateArgs) -> Result<i32, String> {
    let report = batch_evaluate(&a.pred, &a.gt, a.jobs).map_err(|e| e.to_string())?;
    let text = match a.format {
        ReportFormat::Csv => metrics_csv(&report.metrics),
        ReportFormat::Table => metrics_table(&report.metrics, a.f1.into()),
    };
    write_output(a.out.as_deref(), text.as_bytes())?;
    for u in &report.unpaired {
        eprintln!(
            "warning: {} has no counterpart (found only in {})",
            u.image_id,
            match u.found_in {
                stemtrace_core::dataset::batch::Side::Pred => "pred",
                stemtrace_core::dataset::batch::Side::Gt => "gt",
            }
        );
    }
    for f in &report.failures {
        eprintln!("failed: {}: {}", f.image_id, f.error);
    }
    Ok(if report.failures.is_empty() { EXIT_OK } else { EXIT_FAILURES })
}

/// Image ids named by the files in `dir`: annotation stems and mask names,
/// deduplicated and sorted.
pub fn image_ids_in(dir: &Path) -> Result<Vec<String>, String> {
    let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut ids = std::collections::BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| format!("{}: {e}", dir.display()))?;
        if !entry.file_type().is_ok_and(|t| t.is_file()) {
            continue;
        }
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let id = if let Some(stem) = name.strip_suffix(".json") {
            Some(stem)
        } else {
            image_id_from_mask_name(name)
        };
        if let Some(id) = id.filter(|id| !id.is_empty() && *id != "manifest") {
            ids.insert(id.to_string());
        }
    }
    Ok(ids.into_iter().collect())
}

fn split(a: SplitArgs) -> Result<i32, String> {
    let ids = image_ids_in(&a.n_from)?;
    let split = split_dataset(&ids, a.seed).map_err(|e| e.to_string())?;
    let mut text = serde_json::to_string_pretty(&split).expect("split serializes");
    text.push('\n');
    write_output(a.out.as_deref(), text.as_bytes())?;
    let (tr, va, te) = split.sizes();
    eprintln!("train {tr}, val {va}, test {te} (seed {})", split.seed);
    Ok(EXIT_OK)
}

fn run_server() -> Result<i32, String> {
    let config = ServiceConfig::from_env()?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    runtime.block_on(serve(config)).map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

/// The request `preview` renders for an annotation file.
pub fn preview_request(path: &Path, render: &RenderArgs) -> Result<GenerateRequest, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let fallback = path.file_stem().and_then(|s| s.to_str());
    let parsed =
        parse_annotation_detailed(&text, fallback).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut req = GenerateRequest::from_annotation(&parsed.annotation, render.clamp_ends, render.samples());
    if let Some(tau) = render.tau {
        req.tau = tau;
    }
    Ok(req)
}

fn preview(a: PreviewArgs) -> Result<i32, String> {
    let req = preview_request(&a.annotation, &a.render)?;
    let (png, info) = render_png(&req).map_err(|e| format!("{}: {e}", a.annotation.display()))?;
    write_output(a.out.as_deref(), &png)?;
    if a.out.is_some() {
        eprintln!(
            "tau={} samples_per_segment={} clamp_ends={}",
            info.tau,
            info.sampling_header(),
            info.clamp_ends
        );
    }
    Ok(EXIT_OK)
}
