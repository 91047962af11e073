//! Reading and writing the OpenFace 2.x per-frame CSV layout.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use super::{FeatureFrame, FeatureSequence, HeadPose, AU_MAX_INTENSITY, N_LANDMARKS};
use crate::error::{QfeError, Result};

const POSE_COLUMNS: [&str; 6] = ["pose_Tx", "pose_Ty", "pose_Tz", "pose_Rx", "pose_Ry", "pose_Rz"];
const GAZE_LOC_COLUMNS: [&str; 6] = [
    "gaze_0_x", "gaze_0_y", "gaze_0_z", "gaze_1_x", "gaze_1_y", "gaze_1_z",
];
const GAZE_ANGLE_COLUMNS: [&str; 2] = ["gaze_angle_x", "gaze_angle_y"];

/// Splits `AU12_r` / `AU28_c` into the AU id and channel suffix.
fn au_column(name: &str) -> Option<(u8, char)> {
    let rest = name.strip_prefix("AU")?;
    let (id, channel) = rest.split_once('_')?;
    let channel = match channel {
        "r" => 'r',
        "c" => 'c',
        _ => return None,
    };
    Some((id.parse().ok()?, channel))
}

fn landmark_columns(axes: &[&str]) -> Vec<String> {
    (0..N_LANDMARKS)
        .flat_map(|i| axes.iter().map(move |a| format!("{a}_{i}")))
        .collect()
}

struct Layout {
    frame: usize,
    timestamp: usize,
    confidence: usize,
    success: usize,
    au_r: Vec<(u8, usize)>,
    au_c_only: Vec<(u8, usize)>,
    lm2d: Option<Vec<usize>>,
    lm3d: Option<Vec<usize>>,
    pose: Option<Vec<usize>>,
    gaze_loc: Option<Vec<usize>>,
    gaze_angle: Option<Vec<usize>>,
}

impl Layout {
    fn resolve(headers: &[String]) -> Result<Layout> {
        let index: HashMap<&str, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.as_str(), i))
            .collect();
        let required = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| QfeError::MissingColumn(name.to_string()))
        };
        let block = |names: &[String]| -> Option<Vec<usize>> {
            names.iter().map(|n| index.get(n.as_str()).copied()).collect()
        };
        let names = |cols: &[&str]| cols.iter().map(|c| c.to_string()).collect::<Vec<_>>();

        let frame = required("frame")?;
        let timestamp = required("timestamp")?;
        let confidence = required("confidence")?;
        let success = required("success")?;

        let mut au_r = BTreeMap::new();
        let mut au_c = BTreeMap::new();
        for (i, h) in headers.iter().enumerate() {
            match au_column(h) {
                Some((id, 'r')) => {
                    au_r.insert(id, i);
                }
                Some((id, _)) => {
                    au_c.insert(id, i);
                }
                None => {}
            }
        }
        if au_r.is_empty() {
            return Err(QfeError::MissingColumn("AUxx_r".to_string()));
        }
        let au_c_only = au_c
            .into_iter()
            .filter(|(id, _)| !au_r.contains_key(id))
            .collect();

        let lm2d = block(&landmark_columns(&["x"]).into_iter().chain(landmark_columns(&["y"])).collect::<Vec<_>>())
            .map(|cols| interleave(&cols, 2));
        let lm3d = block(
            &landmark_columns(&["X"])
                .into_iter()
                .chain(landmark_columns(&["Y"]))
                .chain(landmark_columns(&["Z"]))
                .collect::<Vec<_>>(),
        )
        .map(|cols| interleave(&cols, 3));

        Ok(Layout {
            frame,
            timestamp,
            confidence,
            success,
            au_r: au_r.into_iter().collect(),
            au_c_only,
            lm2d,
            lm3d,
            pose: block(&names(&POSE_COLUMNS)),
            gaze_loc: block(&names(&GAZE_LOC_COLUMNS)),
            gaze_angle: block(&names(&GAZE_ANGLE_COLUMNS)),
        })
    }
}

/// OpenFace stores landmarks axis-major (`x_0..x_67, y_0..y_67`); reorder the
/// column indices point-major so chunks of `axes` form one point.
fn interleave(cols: &[usize], axes: usize) -> Vec<usize> {
    (0..N_LANDMARKS)
        .flat_map(|p| (0..axes).map(move |a| cols[a * N_LANDMARKS + p]))
        .collect()
}

struct RowReader<'a> {
    record: &'a csv::StringRecord,
    headers: &'a [String],
    row: usize,
}

impl RowReader<'_> {
    fn num(&self, col: usize) -> Result<f64> {
        let raw = self.record.get(col).unwrap_or("");
        raw.parse::<f64>().map_err(|_| QfeError::Parse {
            row: self.row,
            column: self.headers[col].clone(),
            value: raw.to_string(),
        })
    }

    fn nums(&self, cols: &[usize]) -> Result<Vec<f64>> {
        cols.iter().map(|c| self.num(*c)).collect()
    }
}

/// Parses an OpenFace-style feature table. `fps` is taken from the caller
/// rather than inferred from timestamps.
///
/// Rows are numbered from 1 (the first data row) in parse errors.
pub fn parse_feature_csv<R: Read>(input: R, fps: f64) -> Result<FeatureSequence> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(QfeError::EmptyInput);
    }
    let layout = Layout::resolve(&headers)?;

    let mut frames = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = RowReader {
            record: &record,
            headers: &headers,
            row: i + 1,
        };
        frames.push(read_frame(&row, &layout)?);
    }
    if frames.is_empty() {
        return Err(QfeError::EmptyInput);
    }
    FeatureSequence::new("", fps, frames)
}

fn read_frame(row: &RowReader<'_>, layout: &Layout) -> Result<FeatureFrame> {
    let frame_value = row.num(layout.frame)?;
    if !(frame_value >= 0.0 && frame_value.fract() == 0.0) {
        return Err(QfeError::Parse {
            row: row.row,
            column: row.headers[layout.frame].clone(),
            value: frame_value.to_string(),
        });
    }
    let mut frame = FeatureFrame::empty(frame_value as u64, row.num(layout.timestamp)?);
    frame.confidence = row.num(layout.confidence)?;
    frame.success = row.num(layout.success)? != 0.0;

    for (au, col) in &layout.au_r {
        frame.au_intensities.insert(*au, row.num(*col)?);
    }
    for (au, col) in &layout.au_c_only {
        frame.au_intensities.insert(*au, AU_MAX_INTENSITY * row.num(*col)?);
    }
    if let Some(cols) = &layout.lm2d {
        let v = row.nums(cols)?;
        frame.landmarks_2d = Some(v.chunks_exact(2).map(|c| [c[0], c[1]]).collect());
    }
    if let Some(cols) = &layout.lm3d {
        let v = row.nums(cols)?;
        frame.landmarks_3d = Some(v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect());
    }
    if let Some(cols) = &layout.pose {
        let v = row.nums(cols)?;
        frame.head_pose = Some(HeadPose {
            translation: [v[0], v[1], v[2]],
            rotation: [v[3], v[4], v[5]],
        });
    }
    if let Some(cols) = &layout.gaze_loc {
        let v = row.nums(cols)?;
        frame.gaze_location = Some([[v[0], v[1], v[2]], [v[3], v[4], v[5]]]);
    }
    if let Some(cols) = &layout.gaze_angle {
        let v = row.nums(cols)?;
        frame.gaze_angle = Some([v[0], v[1]]);
    }
    Ok(frame)
}

/// Writes a sequence back out in the same column convention. Every AU is
/// written as an intensity (`_r`) column; optional blocks are written only
/// when all frames carry them.
pub fn write_feature_csv(seq: &FeatureSequence) -> Result<String> {
    let frames = seq.frames();
    let all = |p: fn(&FeatureFrame) -> bool| !frames.is_empty() && frames.iter().all(p);
    let has_gaze_loc = all(|f| f.gaze_location.is_some());
    let has_gaze_angle = all(|f| f.gaze_angle.is_some());
    let has_pose = all(|f| f.head_pose.is_some());
    let has_lm2d = all(|f| f.landmarks_2d.is_some());
    let has_lm3d = all(|f| f.landmarks_3d.is_some());
    let aus: BTreeSet<u8> = frames
        .iter()
        .flat_map(|f| f.au_intensities.keys().copied())
        .collect();

    let mut header: Vec<String> = ["frame", "timestamp", "confidence", "success"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if has_gaze_loc {
        header.extend(GAZE_LOC_COLUMNS.iter().map(|s| s.to_string()));
    }
    if has_gaze_angle {
        header.extend(GAZE_ANGLE_COLUMNS.iter().map(|s| s.to_string()));
    }
    if has_pose {
        header.extend(POSE_COLUMNS.iter().map(|s| s.to_string()));
    }
    if has_lm2d {
        header.extend(landmark_columns(&["x"]));
        header.extend(landmark_columns(&["y"]));
    }
    if has_lm3d {
        header.extend(landmark_columns(&["X"]));
        header.extend(landmark_columns(&["Y"]));
        header.extend(landmark_columns(&["Z"]));
    }
    header.extend(aus.iter().map(|au| format!("AU{au:02}_r")));

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&header)?;
    for f in frames {
        let mut rec: Vec<String> = vec![
            f.frame_index.to_string(),
            f.timestamp.to_string(),
            f.confidence.to_string(),
            u8::from(f.success).to_string(),
        ];
        if let (true, Some(g)) = (has_gaze_loc, f.gaze_location) {
            rec.extend(g.iter().flatten().map(f64::to_string));
        }
        if let (true, Some(g)) = (has_gaze_angle, f.gaze_angle) {
            rec.extend(g.iter().map(f64::to_string));
        }
        if let (true, Some(p)) = (has_pose, f.head_pose) {
            rec.extend(p.translation.iter().chain(&p.rotation).map(f64::to_string));
        }
        if let (true, Some(pts)) = (has_lm2d, &f.landmarks_2d) {
            for axis in 0..2 {
                rec.extend(pts.iter().map(|p| p[axis].to_string()));
            }
        }
        if let (true, Some(pts)) = (has_lm3d, &f.landmarks_3d) {
            for axis in 0..3 {
                rec.extend(pts.iter().map(|p| p[axis].to_string()));
            }
        }
        for au in &aus {
            rec.push(f.au_intensities.get(au).map_or_else(String::new, f64::to_string));
        }
        writer.write_record(&rec)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| QfeError::Data(format!("csv writer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| QfeError::Data(e.to_string()))
}
