use serde::Serialize;

use qfe::robustness::{run_robustness_experiment, ConditionSeries, PerturbationConfig, PerturbationOutcome, SeriesSummary};
use qfe::{Modality, PreprocessPolicy, QfeConfig};

use super::{load_au_map, meta, read_sequence, write_json, write_plot, write_text, SCHEMA};
use crate::args::{InputArgs, SimulateArgs};
use crate::error::CliResult;
use crate::plot::{PlotData, PlotKind, Series};

/// Without `--mitigate` only frames the tracker itself rejected are removed.
const NO_MITIGATION: PreprocessPolicy = PreprocessPolicy {
    confidence_threshold: 0.0,
    max_gap: 0,
    clamp: false,
};

#[derive(Serialize)]
struct SimulateConfig<'a> {
    input: &'a InputArgs,
    mitigate: bool,
    perturbation: &'a PerturbationConfig,
    policy: &'a PreprocessPolicy,
    qfe: &'a QfeConfig,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    schema: u32,
    command: &'static str,
    config: SimulateConfig<'a>,
    subject: &'a str,
    frames: usize,
    clean: &'a SeriesSummary,
    noise: &'a PerturbationOutcome,
    anomaly: &'a PerturbationOutcome,
}

fn condition_csv(s: &ConditionSeries, modalities: &[Modality]) -> String {
    let mut out = String::from("frame,sigma");
    for m in modalities {
        out.push_str(",delta_");
        out.push_str(m.short_name());
    }
    out.push('\n');
    for (t, f) in s.frame_indices.iter().enumerate() {
        out.push_str(&format!("{f},{}", s.sigma[t]));
        for d in &s.delta {
            out.push_str(&format!(",{}", d[t]));
        }
        out.push('\n');
    }
    out
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let cfg: PerturbationConfig = args.perturbation()?;
    let policy = if args.mitigate { args.preprocess.policy()? } else { NO_MITIGATION };
    let config = args.scoring.qfe_config()?;
    let map = load_au_map(args.scoring.au_map.as_deref(), &config.spatial.au_category)?;
    let seq = read_sequence(&args.input)?;
    let result = run_robustness_experiment(&seq, &cfg, &policy, &config, &map)?;

    let report = SimulateReport {
        schema: SCHEMA,
        command: "simulate",
        config: SimulateConfig {
            input: &args.input,
            mitigate: args.mitigate,
            perturbation: &result.config,
            policy: &result.policy,
            qfe: &config,
        },
        subject: &seq.subject_id,
        frames: seq.len(),
        clean: &result.clean,
        noise: &result.noise,
        anomaly: &result.anomaly,
    };
    write_json(&args.out, "report.json", &report)?;

    let conditions = [
        ("clean", result.clean_series.as_ref()),
        ("noise_perturbed", result.noise.perturbed_series.as_ref()),
        ("noise_mitigated", result.noise.mitigated_series.as_ref()),
        ("anomaly_perturbed", result.anomaly.perturbed_series.as_ref()),
        ("anomaly_mitigated", result.anomaly.mitigated_series.as_ref()),
    ];
    let mut curves = vec![];
    for (name, series) in conditions {
        let Some(series) = series else { continue };
        write_text(&args.out, &format!("{name}.csv"), &condition_csv(series, &config.modalities))?;
        if series.sigma.iter().any(|v| *v != series.sigma[0]) {
            curves.push(Series {
                label: name.replace('_', " "),
                x: vec![],
                y: series.sigma.clone(),
            });
        }
    }
    if !curves.is_empty() {
        write_plot(
            &args.out,
            "sigma_kde.svg",
            &PlotData::Series(curves),
            PlotKind::Kde,
            meta("Spatial score under noise and anomalies", "sigma", "density"),
        )?;
    }
    Ok(())
}
