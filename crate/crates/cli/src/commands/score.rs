use std::collections::BTreeMap;

use serde::Serialize;

use qfe::factor::{diagnose, factor_scores, fit_one_factor, FactorDiagnostics, FactorInput, FactorModel, FitOptions};
use qfe::score::ExpressivenessSeries;
use qfe::stats::MeanSd;
use qfe::{compute_qfe, preprocess, select_au_subset, AUCategoryMap, FeatureSequence, PreprocessPolicy, QfeConfig};

use super::{load_au_map, meta, read_sequence, write_json, write_plot, write_text, SCHEMA};
use crate::args::{FactorInputArg, InputArgs, ScoreArgs};
use crate::error::{CliError, CliResult};
use crate::plot::{PlotData, PlotKind, Series};

#[derive(Serialize)]
struct ScoreConfig<'a> {
    input: &'a InputArgs,
    preprocess: PreprocessPolicy,
    qfe: &'a QfeConfig,
    au_map: Option<&'a std::path::Path>,
    au_category_members: &'a [u8],
    factor: bool,
    factor_input: FactorInputArg,
}

#[derive(Serialize)]
struct Summary {
    sigma: MeanSd,
    delta: BTreeMap<String, MeanSd>,
    tau: MeanSd,
}

#[derive(Serialize)]
struct FactorSection {
    inputs: Vec<String>,
    dropped_constant: Vec<String>,
    diagnostics: FactorDiagnostics,
    model: FactorModel,
    score_summary: MeanSd,
}

#[derive(Serialize)]
struct ScoreReport<'a> {
    schema: u32,
    command: &'static str,
    config: ScoreConfig<'a>,
    subject: &'a str,
    frames: usize,
    frames_dropped: usize,
    frame_index: Vec<u64>,
    summary: Summary,
    sigma: Vec<f64>,
    delta: BTreeMap<String, Vec<f64>>,
    tau: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    factor: Option<FactorSection>,
}

fn factor_columns(
    kind: FactorInputArg,
    seq: &FeatureSequence,
    series: &ExpressivenessSeries,
    config: &QfeConfig,
    map: &AUCategoryMap,
) -> CliResult<(Vec<Vec<f64>>, Vec<String>)> {
    let mut columns = vec![];
    let mut labels = vec![];
    match kind {
        FactorInputArg::Scores => {
            columns.push(series.sigma());
            labels.push("sigma".to_string());
            for m in series.modalities() {
                columns.push(series.delta(*m).unwrap_or_default());
                labels.push(format!("delta_{}", m.short_name()));
            }
        }
        FactorInputArg::Raw => {
            let aus = map.get(&config.spatial.au_category)?;
            let rows: Vec<Vec<f64>> = seq
                .frames()
                .iter()
                .map(|f| {
                    let mut row = select_au_subset(f, &config.spatial.au_category, map)?;
                    for m in &config.modalities {
                        row.extend(
                            f.modality_values(*m)
                                .ok_or_else(|| qfe::QfeError::MissingFeature(m.label().to_string()))?,
                        );
                    }
                    Ok(row)
                })
                .collect::<qfe::Result<_>>()?;
            let width = rows.first().map_or(0, Vec::len);
            labels.extend(aus.iter().map(|au| format!("AU{au:02}")));
            for m in &config.modalities {
                let n = seq.frames()[0].modality_values(*m).map_or(0, |v| v.len());
                labels.extend((0..n).map(|k| format!("{}_{k}", m.short_name())));
            }
            columns = (0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        }
    }
    Ok((columns, labels))
}

fn fit_factor(
    kind: FactorInputArg,
    seq: &FeatureSequence,
    series: &ExpressivenessSeries,
    config: &QfeConfig,
    map: &AUCategoryMap,
) -> CliResult<(FactorSection, Vec<f64>)> {
    let (columns, labels) = factor_columns(kind, seq, series, config, map)?;
    let mut kept = (vec![], vec![]);
    let mut dropped = vec![];
    for (c, l) in columns.into_iter().zip(labels) {
        if c.iter().all(|v| *v == c[0]) {
            log::warn!("factor input {l} is constant and was left out");
            dropped.push(l);
        } else {
            kept.0.push(c);
            kept.1.push(l);
        }
    }
    let input = FactorInput::standardize(&kept.0, kept.1.clone())?;
    let diagnostics = diagnose(&input)?;
    let model = fit_one_factor(&input, FitOptions::default())?;
    if !model.converged {
        log::warn!("factor fit stopped after {} iterations without converging", model.iterations);
    }
    let scores = factor_scores(&model, &input)?;
    Ok((
        FactorSection {
            inputs: kept.1,
            dropped_constant: dropped,
            diagnostics,
            model,
            score_summary: MeanSd::of(&scores),
        },
        scores,
    ))
}

pub fn run(args: &ScoreArgs) -> CliResult<()> {
    let policy = args.preprocess.policy()?;
    let config = args.scoring.qfe_config()?;
    let map = load_au_map(args.scoring.au_map.as_deref(), &config.spatial.au_category)?;
    let raw = read_sequence(&args.input)?;
    let seq = preprocess(&raw, &policy)?;
    let series = compute_qfe(&seq, &config, &map)?;

    let (factor, scores) = if args.factor {
        let (section, scores) = fit_factor(args.factor_input, &seq, &series, &config, &map)?;
        (Some(section), Some(scores))
    } else {
        (None, None)
    };

    let sigma = series.sigma();
    let tau = series.tau();
    let delta: BTreeMap<String, Vec<f64>> = config
        .modalities
        .iter()
        .map(|m| (m.short_name().to_string(), series.delta(*m).unwrap_or_default()))
        .collect();
    let report = ScoreReport {
        schema: SCHEMA,
        command: "score",
        config: ScoreConfig {
            input: &args.input,
            preprocess: policy,
            qfe: &config,
            au_map: args.scoring.au_map.as_deref(),
            au_category_members: map.get(&config.spatial.au_category).map_err(CliError::from)?,
            factor: args.factor,
            factor_input: args.factor_input,
        },
        subject: &series.subject_id,
        frames: seq.len(),
        frames_dropped: raw.len() - seq.len(),
        frame_index: series.frame_indices(),
        summary: Summary {
            sigma: MeanSd::of(&sigma),
            delta: delta.iter().map(|(k, v)| (k.clone(), MeanSd::of(v))).collect(),
            tau: MeanSd::of(&tau),
        },
        sigma,
        delta,
        tau,
        factor,
    };

    let out = &args.out;
    write_json(out, "report.json", &report)?;
    write_text(out, "series.csv", &series.to_csv())?;
    let x: Vec<f64> = report.frame_index.iter().map(|f| *f as f64).collect();
    if let Some(scores) = &scores {
        let mut csv = String::from("frame,score\n");
        for (f, s) in report.frame_index.iter().zip(scores) {
            csv.push_str(&format!("{f},{s}\n"));
        }
        write_text(out, "factor_scores.csv", &csv)?;
    }
    let line = PlotData::Series(vec![Series {
        label: "tau".into(),
        x,
        y: report.tau.clone(),
    }]);
    write_plot(
        out,
        "tau.svg",
        &line,
        PlotKind::Line,
        meta(format!("Expressiveness of {}", report.subject), "frame", "tau"),
    )?;
    Ok(())
}
