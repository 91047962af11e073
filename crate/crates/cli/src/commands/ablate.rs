use serde::Serialize;

use qfe::score::TemporalParams;
use qfe::subjectivity::{ablate_modalities, AblationReport};
use qfe::preprocess;

use super::{meta, read_sequence, write_json, write_plot, write_text, SCHEMA};
use crate::args::{AblateArgs, InputArgs};
use crate::error::{CliError, CliResult};
use crate::plot::{Matrix, PlotData, PlotKind};

#[derive(Serialize)]
struct AblateConfig<'a> {
    input: &'a InputArgs,
    preprocess: qfe::PreprocessPolicy,
    strides: &'a [usize],
    temporal: TemporalParams,
}

#[derive(Serialize)]
struct AblateReport<'a> {
    schema: u32,
    command: &'static str,
    config: AblateConfig<'a>,
    subject: &'a str,
    frames: usize,
    #[serde(flatten)]
    ablation: &'a AblationReport,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn run(args: &AblateArgs) -> CliResult<()> {
    let policy = args.preprocess.policy()?;
    if args.strides.is_empty() || args.strides.contains(&0) {
        return Err(CliError::Usage("--strides must list positive frame counts".into()));
    }
    let temporal = TemporalParams {
        taylor_order: args.taylor_order,
        closed_form: args.closed_form,
        ..TemporalParams::default()
    };
    temporal.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let seq = preprocess(&read_sequence(&args.input)?, &policy)?;
    let ablation = ablate_modalities(&seq, &args.strides, &temporal)?;

    let report = AblateReport {
        schema: SCHEMA,
        command: "ablate",
        config: AblateConfig {
            input: &args.input,
            preprocess: policy,
            strides: &args.strides,
            temporal,
        },
        subject: &seq.subject_id,
        frames: seq.len(),
        ablation: &ablation,
    };
    write_json(&args.out, "report.json", &report)?;

    for m in &ablation.matrices {
        let labels: Vec<String> = m.features.iter().map(|f| f.label().to_string()).collect();
        let mut csv = format!("feature,{}\n", labels.join(","));
        for (label, row) in labels.iter().zip(&m.rho) {
            let cells: Vec<String> = row.iter().map(|v| cell(*v)).collect();
            csv.push_str(&format!("{label},{}\n", cells.join(",")));
        }
        write_text(&args.out, &format!("srcc_stride_{}.csv", m.stride), &csv)?;
        let data = PlotData::Matrix(Matrix {
            row_labels: labels.clone(),
            col_labels: labels,
            values: m.rho.clone(),
        });
        write_plot(
            &args.out,
            &format!("srcc_stride_{}.svg", m.stride),
            &data,
            PlotKind::Heatmap,
            meta(format!("Temporal feature SRCC, stride {}", m.stride), "feature", "feature"),
        )?;
    }
    Ok(())
}
