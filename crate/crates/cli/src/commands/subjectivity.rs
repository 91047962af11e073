use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use qfe::subjectivity::{kde, pairwise_matrix, KdeCurve, Metric, PairwiseReport};

use super::{file_stem, meta, read_column, write_json, write_plot, write_text, SCHEMA};
use crate::args::SubjectivityArgs;
use crate::error::{CliError, CliResult};
use crate::plot::{Matrix, PlotData, PlotKind, Series};

#[derive(Serialize)]
struct SubjectivityConfig<'a> {
    input_dir: &'a Path,
    column: &'a str,
    metrics: &'a [Metric],
    dtw_normalize: bool,
    kde_points: usize,
}

#[derive(Serialize)]
struct MetricSection {
    #[serde(flatten)]
    pairwise: PairwiseReport,
    /// Density of the defined off-diagonal entries, when they vary.
    kde: Option<KdeCurve>,
}

#[derive(Serialize)]
struct SubjectivityReport<'a> {
    schema: u32,
    command: &'static str,
    config: SubjectivityConfig<'a>,
    subjects: Vec<&'a str>,
    lengths: BTreeMap<&'a str, usize>,
    metrics: BTreeMap<&'static str, MetricSection>,
}

fn list_csv(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    Ok(files)
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; values.len()]
    }
}

fn off_diagonal(values: &[Vec<Option<f64>>]) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(move |(j, _)| *j != i).filter_map(|(_, v)| *v))
        .collect()
}

pub fn run(args: &SubjectivityArgs) -> CliResult<()> {
    if args.kde_points < 2 {
        return Err(CliError::Usage("--kde-points must be at least 2".into()));
    }
    if args.metrics.is_empty() {
        return Err(CliError::Usage("--metrics must name at least one metric".into()));
    }
    let files = list_csv(&args.input_dir)?;
    let loaded: Vec<(String, Vec<f64>)> = files
        .par_iter()
        .map(|p| Ok((file_stem(p), read_column(p, Some(&args.column), &args.column)?)))
        .collect::<CliResult<_>>()?;
    let mut series = BTreeMap::new();
    for (subject, values) in loaded {
        if series.insert(subject.clone(), values).is_some() {
            return Err(CliError::Data(format!("subject {subject:?} appears twice")));
        }
    }
    if series.len() < 2 {
        return Err(CliError::Data(format!(
            "{} holds {} series CSV file(s); at least two subjects are needed",
            args.input_dir.display(),
            series.len()
        )));
    }
    let normalized: BTreeMap<String, Vec<f64>> =
        series.iter().map(|(k, v)| (k.clone(), min_max(v))).collect();

    let mut metrics: Vec<Metric> = args.metrics.clone();
    metrics.sort();
    metrics.dedup();
    let sections: BTreeMap<&'static str, MetricSection> = metrics
        .par_iter()
        .map(|m| {
            let input = if *m == Metric::Dtw && args.dtw_normalize { &normalized } else { &series };
            let pairwise = pairwise_matrix(input, *m)?;
            let values = off_diagonal(&pairwise.values);
            let kde = match kde(&values, args.kde_points) {
                Ok(curve) => Some(curve),
                Err(e) => {
                    log::warn!("no {m} density: {e}");
                    None
                }
            };
            Ok((m.name(), MetricSection { pairwise, kde }))
        })
        .collect::<qfe::Result<_>>()?;

    let report = SubjectivityReport {
        schema: SCHEMA,
        command: "subjectivity",
        config: SubjectivityConfig {
            input_dir: &args.input_dir,
            column: &args.column,
            metrics: &metrics,
            dtw_normalize: args.dtw_normalize,
            kde_points: args.kde_points,
        },
        subjects: series.keys().map(String::as_str).collect(),
        lengths: series.iter().map(|(k, v)| (k.as_str(), v.len())).collect(),
        metrics: sections,
    };
    write_json(&args.out, "report.json", &report)?;

    for (m, section) in &report.metrics {
        let p = &section.pairwise;
        write_text(&args.out, &format!("{m}.csv"), &p.to_csv())?;
        let data = PlotData::Matrix(Matrix {
            row_labels: p.subjects.clone(),
            col_labels: p.subjects.clone(),
            values: p.values.clone(),
        });
        let upper = m.to_uppercase();
        write_plot(
            &args.out,
            &format!("{m}_heatmap.svg"),
            &data,
            PlotKind::Heatmap,
            meta(format!("Pairwise {upper}"), "subject", "reference subject"),
        )?;
        if let Some(curve) = &section.kde {
            let data = PlotData::Series(vec![Series {
                label: upper.clone(),
                x: curve.grid.clone(),
                y: curve.density.clone(),
            }]);
            write_plot(
                &args.out,
                &format!("{m}_kde.svg"),
                &data,
                PlotKind::Line,
                meta(format!("Distribution of pairwise {upper}"), &upper, "density"),
            )?;
        }
    }
    Ok(())
}
