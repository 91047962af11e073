use std::path::Path;

use serde::Serialize;

use qfe::causality::{segment_and_test, ContextSeries, GcLagRow, GcSegmentReport};

use super::{meta, read_column, write_json, write_plot, write_text, SCHEMA};
use crate::args::GrangerArgs;
use crate::error::{CliError, CliResult};
use crate::plot::{PlotData, PlotKind, Series};

type PctColumn = (&'static str, fn(&GcLagRow) -> f64);

#[derive(Serialize)]
struct GrangerConfig<'a> {
    context: &'a Path,
    context_column: Option<&'a str>,
    response: &'a Path,
    response_column: Option<&'a str>,
    fps: f64,
    downsample: usize,
    /// Sampling rate after downsampling.
    rate: f64,
    segment_frames: usize,
    lags_frames: &'a [usize],
    alpha: f64,
}

#[derive(Serialize)]
struct GrangerReport<'a> {
    schema: u32,
    command: &'static str,
    config: GrangerConfig<'a>,
    samples: usize,
    truncated: usize,
    #[serde(flatten)]
    result: &'a GcSegmentReport,
}

/// `seconds · rate` as a whole number of samples.
fn to_frames(seconds: f64, rate: f64, flag: &str) -> CliResult<usize> {
    let frames = seconds * rate;
    let rounded = frames.round();
    if !(seconds > 0.0) || (frames - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(CliError::Usage(format!(
            "{flag} {seconds} is not a positive whole number of samples at {rate} samples/s"
        )));
    }
    Ok(rounded as usize)
}

pub fn run(args: &GrangerArgs) -> CliResult<()> {
    if !(args.fps.is_finite() && args.fps > 0.0) {
        return Err(CliError::Usage(format!("--fps must be positive, got {}", args.fps)));
    }
    if args.downsample == 0 {
        return Err(CliError::Usage("--downsample must be at least 1".into()));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let rate = args.fps / args.downsample as f64;
    let segment = match args.segment_frames {
        Some(0) => return Err(CliError::Usage("--segment-frames must be positive".into())),
        Some(n) => n,
        None => to_frames(args.segment_seconds, rate, "--segment-seconds")?,
    };
    let lags: Vec<usize> = match &args.lags_frames {
        Some(l) => l.clone(),
        None => args
            .lags_seconds
            .iter()
            .map(|s| to_frames(*s, rate, "--lags-seconds"))
            .collect::<CliResult<_>>()?,
    };
    if lags.is_empty() || lags.contains(&0) {
        return Err(CliError::Usage("lags must be positive".into()));
    }

    let mut context = read_column(&args.context, args.context_column.as_deref(), "context")?;
    let mut response = read_column(&args.response, args.response_column.as_deref(), "tau")?;
    let n = context.len().min(response.len());
    let truncated = context.len().max(response.len()) - n;
    if truncated > 0 {
        log::warn!("series lengths differ; the longer one loses its last {truncated} samples");
    }
    context.truncate(n);
    response.truncate(n);
    let context: Vec<f64> = context.into_iter().step_by(args.downsample).collect();
    let response: Vec<f64> = response.into_iter().step_by(args.downsample).collect();

    let result = segment_and_test(&ContextSeries::new(context, rate)?, &response, segment, &lags, args.alpha)?;
    let report = GrangerReport {
        schema: SCHEMA,
        command: "granger",
        config: GrangerConfig {
            context: &args.context,
            context_column: args.context_column.as_deref(),
            response: &args.response,
            response_column: args.response_column.as_deref(),
            fps: args.fps,
            downsample: args.downsample,
            rate,
            segment_frames: segment,
            lags_frames: &lags,
            alpha: args.alpha,
        },
        samples: response.len(),
        truncated,
        result: &result,
    };
    write_json(&args.out, "report.json", &report)?;
    write_text(&args.out, "granger.csv", &result.to_csv())?;

    let x: Vec<f64> = result.rows.iter().map(|r| r.lag_seconds).collect();
    let columns: [PctColumn; 5] = [
        ("lr_chi2", |r| r.pct_lr_chi2),
        ("params_f", |r| r.pct_params_f),
        ("ssr_chi2", |r| r.pct_ssr_chi2),
        ("ssr_f", |r| r.pct_ssr_f),
        ("all", |r| r.pct_all),
    ];
    let series = columns
        .iter()
        .map(|(label, get)| Series {
            label: label.to_string(),
            x: x.clone(),
            y: result.rows.iter().map(get).collect(),
        })
        .collect();
    write_plot(
        &args.out,
        "granger.svg",
        &PlotData::Series(series),
        PlotKind::Line,
        meta("Segments passing each Granger test", "lag (s)", "segments passing (%)"),
    )?;
    Ok(())
}
