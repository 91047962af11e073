//! Minimal standalone SVG charts: line plots, heatmaps and KDE curves.

use std::fmt::Write as _;

use qfe::subjectivity::kde;
use qfe::QfeError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const KDE_POINTS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    Heatmap,
    /// Density curves estimated from each series' `y` values.
    Kde,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlotData {
    Series(Vec<Series>),
    Matrix(Matrix),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlotMeta {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

fn empty(what: &str) -> QfeError {
    QfeError::Domain(format!("cannot plot {what}"))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    Some(if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) })
}

fn header(svg: &mut String, meta: &PlotMeta) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&meta.title)
    );
}

fn axes(svg: &mut String, meta: &PlotMeta, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) {
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}"/></g>"#,
        b = TOP + ph,
        r = LEFT + pw
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let x = LEFT + f * pw;
        let y = TOP + ph - f * ph;
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 18.0,
            tick(x0 + f * (x1 - x0))
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            tick(y0 + f * (y1 - y0))
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0,
        escape(&meta.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text class="y-label" x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&meta.y_label)
    );
}

fn curves(svg: &mut String, meta: &PlotMeta, series: &[Series]) -> qfe::Result<()> {
    let xr = range(series.iter().flat_map(|s| s.x.iter().copied())).ok_or_else(|| empty("series without finite values"))?;
    let yr = range(series.iter().flat_map(|s| s.y.iter().copied())).ok_or_else(|| empty("series without finite values"))?;
    axes(svg, meta, xr, yr);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s
            .x
            .iter()
            .zip(&s.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| {
                let px = LEFT + (x - xr.0) / (xr.1 - xr.0) * pw;
                let py = TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph;
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    Ok(())
}

/// Blue to yellow through teal and green.
fn color(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("rgb({},{},{})", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn heatmap(svg: &mut String, meta: &PlotMeta, m: &Matrix) -> qfe::Result<()> {
    let rows = m.values.len();
    let cols = m.values.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || m.values.iter().any(|r| r.len() != cols) {
        return Err(empty("an empty or ragged matrix"));
    }
    let (lo, hi) = range(m.values.iter().flatten().flatten().copied()).unwrap_or((0.0, 1.0));
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let (cw, ch) = (pw / cols as f64, ph / rows as f64);
    let show_text = rows <= 12 && cols <= 12;
    for (r, row) in m.values.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let (x, y) = (LEFT + c as f64 * cw, TOP + r as f64 * ch);
            let fill = v.map_or_else(|| "#cccccc".to_string(), |v| color((v - lo) / (hi - lo)));
            let label = v.map_or_else(|| "undefined".to_string(), tick);
            let _ = writeln!(
                svg,
                r#"<rect class="cell" x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{fill}"><title>{} / {}: {label}</title></rect>"#,
                escape(m.row_labels.get(r).map_or("", String::as_str)),
                escape(m.col_labels.get(c).map_or("", String::as_str))
            );
            if show_text {
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10" fill="white" stroke="black" stroke-width="0.3">{label}</text>"#,
                    x + cw / 2.0,
                    y + ch / 2.0 + 4.0
                );
            }
        }
    }
    for (r, l) in m.row_labels.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            TOP + (r as f64 + 0.5) * ch + 4.0,
            escape(l)
        );
    }
    for (c, l) in m.col_labels.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + (c as f64 + 0.5) * cw,
            TOP + ph + 18.0,
            escape(l)
        );
    }
    let lx = WIDTH - RIGHT + 20.0;
    let _ = writeln!(
        svg,
        r#"<rect x="{lx}" y="{TOP}" width="16" height="16" fill="{}"/><text x="{}" y="{}">{}</text>"#,
        color(1.0),
        lx + 22.0,
        TOP + 12.0,
        tick(hi)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{lx}" y="{}" width="16" height="16" fill="{}"/><text x="{}" y="{}">{}</text>"#,
        TOP + 22.0,
        color(0.0),
        lx + 22.0,
        TOP + 34.0,
        tick(lo)
    );
    let _ = writeln!(
        svg,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0,
        escape(&meta.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text class="y-label" x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&meta.y_label)
    );
    Ok(())
}

/// Renders `data` as a standalone SVG document.
pub fn render_plot(data: &PlotData, kind: PlotKind, meta: &PlotMeta) -> qfe::Result<String> {
    let mut svg = String::new();
    header(&mut svg, meta);
    match (kind, data) {
        (PlotKind::Line, PlotData::Series(series)) => {
            if series.is_empty() || series.iter().any(|s| s.x.is_empty() || s.x.len() != s.y.len()) {
                return Err(empty("an empty or mismatched series"));
            }
            curves(&mut svg, meta, series)?;
        }
        (PlotKind::Kde, PlotData::Series(series)) => {
            if series.is_empty() || series.iter().any(|s| s.y.is_empty()) {
                return Err(empty("an empty sample"));
            }
            let densities = series
                .iter()
                .map(|s| {
                    let k = kde(&s.y, KDE_POINTS)?;
                    Ok(Series {
                        label: s.label.clone(),
                        x: k.grid,
                        y: k.density,
                    })
                })
                .collect::<qfe::Result<Vec<_>>>()?;
            curves(&mut svg, meta, &densities)?;
        }
        (PlotKind::Heatmap, PlotData::Matrix(m)) => heatmap(&mut svg, meta, m)?,
        (kind, _) => return Err(QfeError::Domain(format!("{kind:?} plot does not accept this data shape"))),
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(y: Vec<f64>) -> PlotData {
        PlotData::Series(vec![Series {
            label: "tau".into(),
            x: (0..y.len()).map(|i| i as f64).collect(),
            y,
        }])
    }

    #[test]
    fn three_point_line() {
        let svg = render_plot(&line(vec![1.0, 3.0, 2.0]), PlotKind::Line, &PlotMeta::default()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let start = svg.find("points=\"").unwrap() + 8;
        let end = start + svg[start..].find('"').unwrap();
        assert_eq!(svg[start..end].split(' ').count(), 3);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn two_by_two_heatmap() {
        let m = Matrix {
            row_labels: vec!["a".into(), "b".into()],
            col_labels: vec!["a".into(), "b".into()],
            values: vec![vec![Some(1.0), Some(0.2)], vec![None, Some(1.0)]],
        };
        let svg = render_plot(&PlotData::Matrix(m), PlotKind::Heatmap, &PlotMeta::default()).unwrap();
        assert_eq!(svg.matches("class=\"cell\"").count(), 4);
    }

    #[test]
    fn deterministic_and_labelled() {
        let meta = PlotMeta { title: "T".into(), x_label: "frame".into(), y_label: "τ".into() };
        let a = render_plot(&line(vec![0.5, 0.1, 0.9, 0.4]), PlotKind::Kde, &meta).unwrap();
        let b = render_plot(&line(vec![0.5, 0.1, 0.9, 0.4]), PlotKind::Kde, &meta).unwrap();
        assert_eq!(a, b);
        assert!(a.contains(">frame</text>") && a.contains(">τ</text>"));
    }

    #[test]
    fn empty_data_is_an_error() {
        assert!(render_plot(&PlotData::Series(vec![]), PlotKind::Line, &PlotMeta::default()).is_err());
        assert!(render_plot(&line(vec![]), PlotKind::Line, &PlotMeta::default()).is_err());
        let m = Matrix { row_labels: vec![], col_labels: vec![], values: vec![] };
        assert!(render_plot(&PlotData::Matrix(m), PlotKind::Heatmap, &PlotMeta::default()).is_err());
    }
}
