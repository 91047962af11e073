use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qfe::{parse_feature_csv, AUCategoryMap, FeatureSequence};

use crate::args::{Command, InputArgs};
use crate::error::{CliError, CliResult};
use crate::plot::{render_plot, PlotData, PlotKind, PlotMeta};

mod ablate;
mod granger;
mod score;
mod simulate;
mod subjectivity;

pub const SCHEMA: u32 = 1;

pub fn dispatch(command: &Command) -> CliResult<()> {
    let out = command.out_dir();
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    match command {
        Command::Score(a) => score::run(a),
        Command::Ablate(a) => ablate::run(a),
        Command::Granger(a) => granger::run(a),
        Command::Subjectivity(a) => subjectivity::run(a),
        Command::Simulate(a) => simulate::run(a),
    }
}

pub(crate) fn file_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "subject".to_string(), |s| s.to_string_lossy().into_owned())
}

pub(crate) fn read_sequence(input: &InputArgs) -> CliResult<FeatureSequence> {
    if !(input.fps.is_finite() && input.fps > 0.0) {
        return Err(CliError::Usage(format!("--fps must be positive, got {}", input.fps)));
    }
    let file = fs::File::open(&input.input).map_err(|e| CliError::io(&input.input, e))?;
    let mut seq = parse_feature_csv(std::io::BufReader::new(file), input.fps)
        .map_err(|e| CliError::Data(format!("{}: {e}", input.input.display())))?;
    seq.subject_id = input.subject.clone().unwrap_or_else(|| file_stem(&input.input));
    Ok(seq)
}

/// The standard category map, extended by a JSON object of
/// `"name": [au, ...]` entries.
pub(crate) fn load_au_map(path: Option<&Path>, category: &str) -> CliResult<AUCategoryMap> {
    let mut map = AUCategoryMap::standard();
    if let Some(path) = path {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let extra: std::collections::BTreeMap<String, Vec<u8>> =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        for (name, aus) in extra {
            map.insert(name, &aus).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        }
    }
    if map.get(category).is_err() {
        let known: Vec<&str> = map.categories().collect();
        return Err(CliError::Usage(format!(
            "unknown AU category {category:?}; known: {}",
            known.join(", ")
        )));
    }
    Ok(map)
}

pub(crate) fn write_text(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

pub(crate) fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    write_text(dir, name, &text)
}

pub(crate) fn write_plot(dir: &Path, name: &str, data: &PlotData, kind: PlotKind, meta: PlotMeta) -> CliResult<PathBuf> {
    let svg = render_plot(data, kind, &meta)?;
    write_text(dir, name, &svg)
}

pub(crate) fn meta(title: impl Into<String>, x: &str, y: &str) -> PlotMeta {
    PlotMeta {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
    }
}

/// One numeric column of a CSV file. Without an explicit name, a single-column
/// file yields its only column and otherwise `fallback` is looked up.
pub(crate) fn read_column(path: &Path, column: Option<&str>, fallback: &str) -> CliResult<Vec<f64>> {
    let data_err = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(std::io::BufReader::new(file));
    let headers = reader.headers().map_err(|e| data_err(e.to_string()))?.clone();
    let idx = match column {
        Some(name) => headers.iter().position(|h| h == name),
        None if headers.len() == 1 => Some(0),
        None => headers.iter().position(|h| h == fallback),
    }
    .ok_or_else(|| data_err(format!("no column {:?}", column.unwrap_or(fallback))))?;
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data_err(e.to_string()))?;
        let cell = record.get(idx).unwrap_or("");
        let v: f64 = cell
            .parse()
            .map_err(|_| data_err(format!("row {}: {cell:?} is not a number", row + 1)))?;
        if !v.is_finite() {
            return Err(data_err(format!("row {}: non-finite value", row + 1)));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(data_err("no data rows".into()));
    }
    Ok(values)
}
