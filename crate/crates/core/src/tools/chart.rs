use std::fmt::Write;

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use super::ToolError;
use crate::interpreter::VitalEstimate;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 360.0;
pub const MARGIN_LEFT: f64 = 64.0;
pub const MARGIN_RIGHT: f64 = 24.0;
pub const MARGIN_TOP: f64 = 40.0;
pub const MARGIN_BOTTOM: f64 = 56.0;
pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Hr,
    Spo2,
    TempBody,
    TempAmbient,
    Activity,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::Hr => "Heart rate (BPM)",
            Metric::Spo2 => "SpO2 (%)",
            Metric::TempBody => "Wrist temperature (\u{b0}C)",
            Metric::TempAmbient => "Ambient temperature (\u{b0}C)",
            Metric::Activity => "Activity (0 sit, 1 walk, 2 run)",
        }
    }

    pub fn value(self, v: &VitalEstimate) -> Option<f64> {
        match self {
            Metric::Hr => v.hr,
            Metric::Spo2 => v.spo2,
            Metric::TempBody => v.temp_body,
            Metric::TempAmbient => v.temp_ambient,
            Metric::Activity => v.activity.as_ref()?.known().map(|a| a.index() as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Line,
    Histogram,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartRequest {
    pub user: String,
    pub metric: Metric,
    /// Inclusive unix-second bounds.
    pub from_ts: i64,
    pub to_ts: i64,
    pub kind: ChartKind,
}

fn stamp(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|t| t.format("%Y-%m-%d %H:%M UTC").to_string())
        .unwrap_or_else(|| ts.to_string())
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn plot_w() -> f64 {
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    }
    fn plot_h() -> f64 {
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    }
    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x0) / (self.x1 - self.x0) * Self::plot_w()
    }
    fn y(&self, v: f64) -> f64 {
        MARGIN_TOP + Self::plot_h() - (v - self.y0) / (self.y1 - self.y0) * Self::plot_h()
    }
}

/// Value span for the y axis; a flat series gets one unit either side.
fn y_span(metric: Metric, values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    if metric == Metric::Activity {
        return (0.0, 2.0);
    }
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn header(svg: &mut String, title: &str) {
    let _ = write!(
        svg,
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n",
            "<text x=\"{cx:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
            "<line class=\"axis\" x1=\"{l:.2}\" y1=\"{b:.2}\" x2=\"{r:.2}\" y2=\"{b:.2}\" stroke=\"#333\"/>\n",
            "<line class=\"axis\" x1=\"{l:.2}\" y1=\"{t:.2}\" x2=\"{l:.2}\" y2=\"{b:.2}\" stroke=\"#333\"/>\n",
        ),
        w = WIDTH,
        h = HEIGHT,
        cx = WIDTH / 2.0,
        title = title,
        l = MARGIN_LEFT,
        r = WIDTH - MARGIN_RIGHT,
        t = MARGIN_TOP,
        b = HEIGHT - MARGIN_BOTTOM,
    );
}

fn axis_labels(svg: &mut String, x_label: &str, y_label: &str, x_ticks: [String; 2], y_ticks: [String; 2]) {
    let b = HEIGHT - MARGIN_BOTTOM;
    let _ = write!(
        svg,
        concat!(
            "<text class=\"x-label\" x=\"{cx:.2}\" y=\"{xl:.2}\" text-anchor=\"middle\" font-size=\"12\">{xlab}</text>\n",
            "<text class=\"y-label\" x=\"16\" y=\"{cy:.2}\" transform=\"rotate(-90 16 {cy:.2})\" text-anchor=\"middle\" font-size=\"12\">{ylab}</text>\n",
            "<text class=\"x-tick\" x=\"{l:.2}\" y=\"{xt:.2}\" font-size=\"10\">{x0}</text>\n",
            "<text class=\"x-tick\" x=\"{r:.2}\" y=\"{xt:.2}\" text-anchor=\"end\" font-size=\"10\">{x1}</text>\n",
            "<text class=\"y-tick\" x=\"{yt:.2}\" y=\"{b:.2}\" text-anchor=\"end\" font-size=\"10\">{y0}</text>\n",
            "<text class=\"y-tick\" x=\"{yt:.2}\" y=\"{t:.2}\" text-anchor=\"end\" font-size=\"10\">{y1}</text>\n",
        ),
        cx = MARGIN_LEFT + Frame::plot_w() / 2.0,
        xl = HEIGHT - 12.0,
        xlab = x_label,
        cy = MARGIN_TOP + Frame::plot_h() / 2.0,
        ylab = y_label,
        l = MARGIN_LEFT,
        r = WIDTH - MARGIN_RIGHT,
        xt = b + 16.0,
        yt = MARGIN_LEFT - 6.0,
        b = b,
        t = MARGIN_TOP,
        x0 = x_ticks[0],
        x1 = x_ticks[1],
        y0 = y_ticks[0],
        y1 = y_ticks[1],
    );
}

/// Renders the metric over the request's time range as SVG. Pure in
/// (request, data): identical inputs give identical bytes.
pub fn render_chart(req: &ChartRequest, data: &[VitalEstimate]) -> Result<Vec<u8>, ToolError> {
    if req.to_ts <= req.from_ts {
        return Err(ToolError::InvalidRange {
            from: req.from_ts,
            to: req.to_ts,
        });
    }
    let mut points: Vec<(i64, f64)> = data
        .iter()
        .filter(|v| (req.from_ts..=req.to_ts).contains(&v.burst_ts))
        .filter_map(|v| req.metric.value(v).filter(|x| x.is_finite()).map(|x| (v.burst_ts, x)))
        .collect();
    if points.is_empty() {
        return Err(ToolError::NoData);
    }
    points.sort_by_key(|p| p.0);

    let mut svg = String::new();
    match req.kind {
        ChartKind::Line => {
            let (y0, y1) = y_span(req.metric, points.iter().map(|p| p.1));
            let f = Frame {
                x0: req.from_ts as f64,
                x1: req.to_ts as f64,
                y0,
                y1,
            };
            header(&mut svg, req.metric.label());
            axis_labels(
                &mut svg,
                "Time (UTC)",
                req.metric.label(),
                [stamp(req.from_ts), stamp(req.to_ts)],
                [format!("{y0:.1}"), format!("{y1:.1}")],
            );
            let coords: Vec<String> = points
                .iter()
                .map(|&(t, v)| format!("{:.2},{:.2}", f.x(t as f64), f.y(v)))
                .collect();
            let _ = writeln!(
                svg,
                "<polyline class=\"series\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>",
                coords.join(" ")
            );
            for &(t, v) in &points {
                let _ = writeln!(
                    svg,
                    "<circle class=\"point\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f77b4\"><title>{} {:.1}</title></circle>",
                    f.x(t as f64),
                    f.y(v),
                    stamp(t),
                    v
                );
            }
        }
        ChartKind::Histogram => {
            let (v0, v1) = y_span(req.metric, points.iter().map(|p| p.1));
            let width = (v1 - v0) / HISTOGRAM_BINS as f64;
            let mut counts = [0usize; HISTOGRAM_BINS];
            for &(_, v) in &points {
                let i = (((v - v0) / width) as usize).min(HISTOGRAM_BINS - 1);
                counts[i] += 1;
            }
            let top = *counts.iter().max().unwrap_or(&1) as f64;
            let f = Frame {
                x0: v0,
                x1: v1,
                y0: 0.0,
                y1: top,
            };
            header(&mut svg, req.metric.label());
            axis_labels(
                &mut svg,
                req.metric.label(),
                "Count",
                [format!("{v0:.1}"), format!("{v1:.1}")],
                ["0".into(), format!("{top}")],
            );
            for (i, &c) in counts.iter().enumerate() {
                let lo = v0 + i as f64 * width;
                let (xl, xr) = (f.x(lo), f.x(lo + width));
                let (yt, yb) = (f.y(c as f64), f.y(0.0));
                let _ = writeln!(
                    svg,
                    "<rect class=\"bin\" x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#1f77b4\"><title>{:.1} to {:.1}: {}</title></rect>",
                    xl,
                    yt,
                    xr - xl,
                    yb - yt,
                    lo,
                    lo + width,
                    c
                );
            }
            let _ = writeln!(
                svg,
                "<text class=\"range\" x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"10\">{} to {}</text>",
                WIDTH - MARGIN_RIGHT,
                MARGIN_TOP - 4.0,
                stamp(req.from_ts),
                stamp(req.to_ts)
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::ActivityLabel;
    use crate::interpreter::{Activity, VitalSource};

    fn v(ts: i64, hr: f64) -> VitalEstimate {
        VitalEstimate {
            burst_ts: ts,
            hr: Some(hr),
            spo2: None,
            activity: Some(Activity::Known(ActivityLabel::Walk)),
            activity_verbose: None,
            temp_body: None,
            temp_ambient: None,
            source: VitalSource::Llm,
            clamped: vec![],
        }
    }

    fn req(kind: ChartKind) -> ChartRequest {
        ChartRequest {
            user: "u".into(),
            metric: Metric::Hr,
            from_ts: 1000,
            to_ts: 2000,
            kind,
        }
    }

    fn attr<'a>(svg: &'a str, tag: &str, name: &str) -> Vec<&'a str> {
        svg.match_indices(&format!("<{tag} "))
            .filter_map(|(i, _)| {
                let rest = &svg[i..];
                let end = rest.find('>')?;
                let key = format!(" {name}=\"");
                let s = rest[..end].find(&key)? + key.len();
                let e = rest[s..].find('"')? + s;
                Some(&rest[s..e])
            })
            .collect()
    }

    #[test]
    fn two_point_line_coordinates() {
        let svg = String::from_utf8(render_chart(&req(ChartKind::Line), &[v(1000, 60.0), v(1500, 80.0)]).unwrap()).unwrap();
        let pts = attr(&svg, "polyline", "points")[0];
        let parsed: Vec<(f64, f64)> = pts
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect();
        // Plot box is 64..616 by 40..304; y range spans exactly 60..80.
        let expect = [(64.0, 304.0), (64.0 + 0.5 * 552.0, 40.0)];
        assert_eq!(parsed.len(), 2);
        for (p, e) in parsed.iter().zip(expect) {
            assert!((p.0 - e.0).abs() < 0.006 && (p.1 - e.1).abs() < 0.006, "{p:?} vs {e:?}");
        }
        assert_eq!(attr(&svg, "circle", "cx").len(), 2);
        assert!(svg.contains("1970-01-01 00:16 UTC"));
        assert!(svg.contains("Time (UTC)") && svg.contains("Heart rate (BPM)"));
    }

    #[test]
    fn no_data_and_bad_range() {
        assert_eq!(render_chart(&req(ChartKind::Line), &[v(5, 60.0)]), Err(ToolError::NoData));
        assert_eq!(render_chart(&req(ChartKind::Line), &[]), Err(ToolError::NoData));
        let mut r = req(ChartKind::Line);
        r.to_ts = r.from_ts;
        assert!(matches!(render_chart(&r, &[v(1000, 1.0)]), Err(ToolError::InvalidRange { .. })));
    }

    #[test]
    fn deterministic_bytes() {
        let data: Vec<_> = (0..50).map(|i| v(1000 + i * 20, 60.0 + (i % 7) as f64)).collect();
        for kind in [ChartKind::Line, ChartKind::Histogram] {
            assert_eq!(render_chart(&req(kind), &data).unwrap(), render_chart(&req(kind), &data).unwrap());
        }
    }

    #[test]
    fn histogram_counts_every_point() {
        let data: Vec<_> = (0..40).map(|i| v(1000 + i * 10, 50.0 + i as f64)).collect();
        let svg = String::from_utf8(render_chart(&req(ChartKind::Histogram), &data).unwrap()).unwrap();
        let total: usize = svg
            .match_indices("<title>")
            .map(|(i, _)| {
                let s = &svg[i + 7..];
                let t = &s[..s.find("</title>").unwrap()];
                t.rsplit(": ").next().unwrap().parse::<usize>().unwrap()
            })
            .sum();
        assert_eq!(total, 40);
        assert_eq!(attr(&svg, "rect", "class").iter().filter(|c| **c == "bin").count(), HISTOGRAM_BINS);
    }

    #[test]
    fn flat_series_and_activity() {
        let svg = String::from_utf8(render_chart(&req(ChartKind::Line), &[v(1000, 70.0)]).unwrap()).unwrap();
        // 70 sits mid-way in the padded 69..71 span.
        assert_eq!(attr(&svg, "circle", "cy"), ["172.00"]);
        let mut r = req(ChartKind::Line);
        r.metric = Metric::Activity;
        let svg = String::from_utf8(render_chart(&r, &[v(2000, 1.0)]).unwrap()).unwrap();
        assert_eq!(attr(&svg, "circle", "cx"), ["616.00"]);
        assert_eq!(attr(&svg, "circle", "cy"), ["172.00"]);
    }
}
