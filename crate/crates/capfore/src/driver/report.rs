//! Standalone SVG rendering for result tables: R²-vs-budget line charts
//! for search results and grouped bars for evaluate summaries. Data
//! values are written as text labels, so charts can be checked against
//! their source CSV.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use crate::{Error, Result};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb", "#000000",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChartData {
    /// Rows of (method, budget, mean_r2, std_r2).
    Search(Vec<(String, usize, f64, f64)>),
    /// Rows of (split, predictor, mean_r2).
    Evaluate(Vec<(String, String, f64)>),
}

/// Read a results CSV (comment lines allowed) and classify it by header.
pub fn parse_results_csv(path: &Path) -> Result<ChartData> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let header_line = headers.join(",");
    match header_line.as_str() {
        "method,b,mean_r2,std_r2" => {
            let mut rows = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                rows.push((
                    rec[0].to_string(),
                    rec[1].parse().map_err(|e| Error::SchemaMismatch(format!("bad budget: {e}")))?,
                    rec[2].parse().map_err(|e| Error::SchemaMismatch(format!("bad mean_r2: {e}")))?,
                    rec[3].parse().map_err(|e| Error::SchemaMismatch(format!("bad std_r2: {e}")))?,
                ));
            }
            if rows.is_empty() {
                return Err(Error::SchemaMismatch("results file has no rows".into()));
            }
            Ok(ChartData::Search(rows))
        }
        "split,predictor,metric,mean,std" => {
            let mut rows = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                if &rec[2] != "r2" {
                    continue;
                }
                rows.push((
                    rec[0].to_string(),
                    rec[1].to_string(),
                    rec[3].parse().map_err(|e| Error::SchemaMismatch(format!("bad mean: {e}")))?,
                ));
            }
            if rows.is_empty() {
                return Err(Error::SchemaMismatch("results file has no r2 rows".into()));
            }
            Ok(ChartData::Evaluate(rows))
        }
        other => Err(Error::SchemaMismatch(format!(
            "unrecognized results header `{other}`"
        ))),
    }
}

/// Render chart data to SVG plus the chart's own data as CSV.
pub fn render(data: &ChartData, config_hash: &str) -> Result<(String, String)> {
    match data {
        ChartData::Search(rows) => {
            let mut by_method: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
            for (method, b, mean, _) in rows {
                by_method.entry(method).or_default().push((*b as f64, *mean));
            }
            let series: Vec<Series> = by_method
                .into_iter()
                .map(|(name, mut points)| {
                    points.sort_by(|a, b| a.0.total_cmp(&b.0));
                    Series {
                        name: name.to_string(),
                        points,
                    }
                })
                .collect();
            let svg = render_line_chart(
                "Subset informativeness by budget",
                "budget b",
                "mean R²",
                &series,
                config_hash,
            )?;
            let mut csv = format!("# config_hash={config_hash}\nmethod,b,mean_r2,std_r2\n");
            for (method, b, mean, std) in rows {
                let _ = writeln!(csv, "{method},{b},{mean},{std}");
            }
            Ok((svg, csv))
        }
        ChartData::Evaluate(rows) => {
            let svg = render_bar_chart(
                "Prediction R² by split and model",
                "split",
                "mean R²",
                rows,
                config_hash,
            )?;
            let mut csv = format!("# config_hash={config_hash}\nsplit,predictor,mean_r2\n");
            for (split, predictor, mean) in rows {
                let _ = writeln!(csv, "{split},{predictor},{mean}");
            }
            Ok((svg, csv))
        }
    }
}

struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        if self.hi == self.lo {
            return (self.px_lo + self.px_hi) / 2.0;
        }
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn svg_header(title: &str, config_hash: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n\
         <!-- config_hash={config_hash} -->\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{x}\" y=\"28\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        x = WIDTH / 2.0
    )
}

fn axes(out: &mut String, x_label: &str, y_label: &str, y: &Scale, y_ticks: usize) {
    let plot_bottom = HEIGHT - MARGIN_BOTTOM;
    let plot_right = WIDTH - MARGIN_RIGHT;
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{plot_bottom}\" x2=\"{plot_right}\" y2=\"{plot_bottom}\" stroke=\"black\"/>\n\
         <line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{plot_bottom}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{x}\" y=\"{y_pos}\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>",
        x = (MARGIN_LEFT + plot_right) / 2.0,
        y_pos = HEIGHT - 16.0
    );
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{mid}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 {mid})\">{y_label}</text>",
        mid = (MARGIN_TOP + plot_bottom) / 2.0
    );
    for t in 0..=y_ticks {
        let v = y.lo + (y.hi - y.lo) * t as f64 / y_ticks as f64;
        let py = y.map(v);
        let _ = writeln!(
            out,
            "<line x1=\"{x0}\" y1=\"{py}\" x2=\"{MARGIN_LEFT}\" y2=\"{py}\" stroke=\"black\"/>\n\
             <text x=\"{x1}\" y=\"{ty}\" font-size=\"10\" text-anchor=\"end\">{label:.2}</text>",
            x0 = MARGIN_LEFT - 5.0,
            x1 = MARGIN_LEFT - 8.0,
            ty = py + 3.0,
            label = v
        );
    }
}

/// Polyline chart with one series per method; every point carries its
/// value as a `<text class="value">` label.
pub fn render_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    config_hash: &str,
) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::SchemaMismatch("no series to plot".into()));
    }
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).collect();
    let (x_lo, x_hi) = bounds(&xs, 0.05);
    let (y_lo, y_hi) = bounds(&ys, 0.10);
    let x = Scale {
        lo: x_lo,
        hi: x_hi,
        px_lo: MARGIN_LEFT,
        px_hi: WIDTH - MARGIN_RIGHT,
    };
    let y = Scale {
        lo: y_lo,
        hi: y_hi,
        px_lo: HEIGHT - MARGIN_BOTTOM,
        px_hi: MARGIN_TOP,
    };

    let mut out = svg_header(title, config_hash);
    axes(&mut out, x_label, y_label, &y, 5);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|(px, py)| format!("{:.2},{:.2}", x.map(*px), y.map(*py)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            path.join(" ")
        );
        for (px, py) in &s.points {
            let _ = writeln!(
                out,
                "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\" fill=\"{color}\"/>\n\
                 <text class=\"value\" x=\"{cx:.2}\" y=\"{ty:.2}\" font-size=\"9\" text-anchor=\"middle\">{py}</text>",
                cx = x.map(*px),
                cy = y.map(*py),
                ty = y.map(*py) - 6.0
            );
        }
        let ly = MARGIN_TOP + 16.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            out,
            "<rect x=\"{lx}\" y=\"{ry}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" font-size=\"11\">{name}</text>",
            ry = ly - 9.0,
            tx = lx + 14.0,
            ty = ly,
            name = s.name
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Grouped bar chart: one group per split, one bar per predictor.
pub fn render_bar_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    rows: &[(String, String, f64)],
    config_hash: &str,
) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::SchemaMismatch("no rows to plot".into()));
    }
    let mut splits: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
    splits.dedup();
    let mut predictors: Vec<&str> = rows.iter().map(|r| r.1.as_str()).collect();
    predictors.sort();
    predictors.dedup();

    let values: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let (lo, hi) = bounds(&values, 0.10);
    let y = Scale {
        lo: lo.min(0.0),
        hi,
        px_lo: HEIGHT - MARGIN_BOTTOM,
        px_hi: MARGIN_TOP,
    };

    let plot_width = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let group_width = plot_width / splits.len() as f64;
    let bar_width = (group_width * 0.8) / predictors.len() as f64;

    let mut out = svg_header(title, config_hash);
    axes(&mut out, x_label, y_label, &y, 5);
    let baseline = y.map(y.lo.max(0.0));
    for (g, split) in splits.iter().enumerate() {
        let group_x = MARGIN_LEFT + group_width * g as f64 + group_width * 0.1;
        let _ = writeln!(
            out,
            "<text x=\"{tx}\" y=\"{ty}\" font-size=\"11\" text-anchor=\"middle\">{split}</text>",
            tx = MARGIN_LEFT + group_width * (g as f64 + 0.5),
            ty = HEIGHT - MARGIN_BOTTOM + 16.0
        );
        for (p, predictor) in predictors.iter().enumerate() {
            let Some((_, _, v)) = rows
                .iter()
                .find(|(s, q, _)| s == split && q == predictor)
            else {
                continue;
            };
            let color = PALETTE[p % PALETTE.len()];
            let bx = group_x + bar_width * p as f64;
            let by = y.map(*v);
            let (top, h) = if by <= baseline {
                (by, baseline - by)
            } else {
                (baseline, by - baseline)
            };
            let _ = writeln!(
                out,
                "<rect x=\"{bx:.2}\" y=\"{top:.2}\" width=\"{bw:.2}\" height=\"{h:.2}\" fill=\"{color}\"/>\n\
                 <text class=\"value\" x=\"{cx:.2}\" y=\"{ty:.2}\" font-size=\"9\" text-anchor=\"middle\">{v}</text>",
                bw = bar_width * 0.9,
                cx = bx + bar_width * 0.45,
                ty = top - 3.0
            );
        }
    }
    for (p, predictor) in predictors.iter().enumerate() {
        let color = PALETTE[p % PALETTE.len()];
        let ly = MARGIN_TOP + 16.0 * p as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            out,
            "<rect x=\"{lx}\" y=\"{ry}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" font-size=\"11\">{predictor}</text>",
            ry = ly - 9.0,
            tx = lx + 14.0,
            ty = ly
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn bounds(values: &[f64], pad: f64) -> (f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return (lo - 1.0, hi + 1.0);
    }
    let span = hi - lo;
    (lo - span * pad, hi + span * pad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_labels_carry_exact_values() {
        let series = vec![Series {
            name: "greedy".into(),
            points: vec![(4.0, 0.512345678901), (8.0, 0.625)],
        }];
        let svg = render_line_chart("t", "b", "r2", &series, "cafe").unwrap();
        assert!(svg.contains("config_hash=cafe"));
        // Parse the value labels back out and compare exactly.
        let values: Vec<f64> = svg
            .lines()
            .filter(|l| l.contains("class=\"value\""))
            .map(|l| {
                l.split('>')
                    .nth(1)
                    .unwrap()
                    .trim_end_matches("</text")
                    .parse()
                    .unwrap()
            })
            .collect();
        assert_eq!(values, vec![0.512345678901, 0.625]);
    }

    #[test]
    fn one_series_renders_one_polyline_with_b_points() {
        let series = vec![Series {
            name: "random".into(),
            points: vec![(4.0, 0.1), (8.0, 0.2), (16.0, 0.3)],
        }];
        let svg = render_line_chart("t", "b", "r2", &series, "00").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(render_line_chart("t", "x", "y", &[], "00").is_err());
        assert!(render_bar_chart("t", "x", "y", &[], "00").is_err());
    }
}
