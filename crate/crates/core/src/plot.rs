//! Standalone SVG charts of a [`SeriesTable`].

use std::fmt::Write as _;

use crate::detection::ObjectClass;
use crate::timeseries::SeriesTable;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#444444"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Round tick step of about `span / 5`.
fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

struct Frame {
    svg: String,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(title: &str, x_label: &str, y_label: &str, y0: f64, y1: f64) -> Frame {
        let y1 = if y1 > y0 { y1 } else { y0 + 1.0 };
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            esc(title)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
            HEIGHT - 12.0,
            esc(x_label)
        );
        let cy = TOP + (HEIGHT - TOP - BOTTOM) / 2.0;
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{cy:.1}" text-anchor="middle" transform="rotate(-90 18 {cy:.1})">{}</text>"#,
            esc(y_label)
        );
        let mut frame = Frame { svg, y0, y1 };
        let step = nice_step(y1 - y0);
        let mut v = (y0 / step).ceil() * step;
        while v <= y1 + 1e-9 {
            let y = frame.y(v);
            let _ = writeln!(
                frame.svg,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"##,
                WIDTH - RIGHT,
                LEFT - 6.0,
                y + 4.0,
                trim(v)
            );
            v += step;
        }
        let _ = writeln!(
            frame.svg,
            r#"<rect x="{LEFT}" y="{TOP}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
        frame
    }

    fn y(&self, v: f64) -> f64 {
        let t = (v - self.y0) / (self.y1 - self.y0);
        HEIGHT - BOTTOM - t * (HEIGHT - TOP - BOTTOM)
    }

    fn x_tick(&mut self, x: f64, label: &str) {
        let _ = writeln!(
            self.svg,
            r#"<line x1="{x:.2}" y1="{:.1}" x2="{x:.2}" y2="{:.1}" stroke="black"/><text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 4.0,
            HEIGHT - BOTTOM + 18.0,
            esc(label)
        );
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Lines over evenly spaced categories; `None` values break the line.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    categories: &[String],
    series: &[(&str, Vec<Option<f64>>)],
    y_range: Option<(f64, f64)>,
) -> String {
    let values = series.iter().flat_map(|s| s.1.iter().flatten().copied());
    let (y0, y1) = y_range.unwrap_or_else(|| (0.0, values.fold(0.0, f64::max) * 1.1));
    let mut f = Frame::new(title, x_label, y_label, y0, y1);
    let n = categories.len().max(1);
    let plot_w = WIDTH - LEFT - RIGHT;
    let x = |i: usize| LEFT + plot_w * (i as f64 + 0.5) / n as f64;
    let every = n.div_ceil(8);
    for (i, label) in categories.iter().enumerate().step_by(every) {
        f.x_tick(x(i), label);
    }
    for (k, (name, vals)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, svg: &mut String| {
            if !run.is_empty() {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    run.join(" ")
                );
                run.clear();
            }
        };
        for (i, v) in vals.iter().enumerate() {
            match v {
                Some(v) => {
                    let (px, py) = (x(i), f.y(*v));
                    run.push(format!("{px:.2},{py:.2}"));
                    let _ = writeln!(f.svg, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2" fill="{color}"/>"#);
                }
                None => flush(&mut run, &mut f.svg),
            }
        }
        flush(&mut run, &mut f.svg);
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            f.svg,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            LEFT + 10.0,
            ly - 9.0,
            LEFT + 24.0,
            ly,
            esc(name)
        );
    }
    f.finish()
}

/// Bars over histogram bins given by `edges`.
pub fn bar_chart(title: &str, x_label: &str, edges: &[f64], counts: &[usize]) -> String {
    let max = counts.iter().copied().max().unwrap_or(0) as f64;
    let mut f = Frame::new(title, x_label, "Count", 0.0, (max * 1.1).max(1.0));
    let (lo, hi) = (edges[0], edges[edges.len() - 1]);
    let plot_w = WIDTH - LEFT - RIGHT;
    let x = |v: f64| LEFT + plot_w * (v - lo) / (hi - lo);
    for (i, &c) in counts.iter().enumerate() {
        let (x0, x1) = (x(edges[i]), x(edges[i + 1]));
        let (ytop, ybase) = (f.y(c as f64), f.y(0.0));
        let _ = writeln!(
            f.svg,
            r##"<rect x="{:.2}" y="{ytop:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white"/>"##,
            x0,
            (x1 - x0).max(0.0),
            ybase - ytop
        );
    }
    let every = edges.len().div_ceil(9);
    for &e in edges.iter().step_by(every) {
        f.x_tick(x(e), &trim(e));
    }
    f.finish()
}

/// File name and SVG text of each series chart.
pub fn series_plots(table: &SeriesTable) -> Vec<(&'static str, String)> {
    let dates: Vec<String> = table.rows.iter().map(|r| r.date.format("%m-%d").to_string()).collect();
    let counts = |class: Option<ObjectClass>| -> Vec<Option<f64>> {
        table
            .rows
            .iter()
            .map(|r| Some(class.map_or(r.total, |c| r.counts[&c]) as f64))
            .collect()
    };
    let mut series: Vec<(&str, Vec<Option<f64>>)> = ObjectClass::ALL
        .iter()
        .filter(|c| table.rows.iter().any(|r| r.counts[c] > 0))
        .map(|&c| (c.as_str(), counts(Some(c))))
        .collect();
    series.push(("total", counts(None)));
    let (speed_hist, heading_hist) = table.pooled_histograms();
    vec![
        (
            "counts.svg",
            line_chart("Detections per day", "Date", "Count", &dates, &series, None),
        ),
        (
            "mean_speed.svg",
            line_chart(
                "Mean speed over time",
                "Date",
                "Speed (km/h)",
                &dates,
                &[("mean speed", table.rows.iter().map(|r| r.mean_speed_kmh).collect())],
                None,
            ),
        ),
        (
            "mean_heading.svg",
            line_chart(
                "Mean heading over time",
                "Date",
                "Heading (degrees)",
                &dates,
                &[(
                    "circular mean heading",
                    table.rows.iter().map(|r| r.mean_heading_deg).collect(),
                )],
                Some((0.0, 360.0)),
            ),
        ),
        (
            "speed_histogram.svg",
            bar_chart(
                "Histogram of vehicle speed",
                "Speed (km/h)",
                &table.histograms.speed_edges_kmh,
                &speed_hist,
            ),
        ),
        (
            "heading_histogram.svg",
            bar_chart(
                "Histogram of vehicle heading",
                "Heading (degrees)",
                &table.histograms.heading_edges_deg,
                &heading_hist,
            ),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{aggregate, HistogramSpec};

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(100.0), 20.0);
        assert_eq!(nice_step(360.0), 100.0);
        assert_eq!(nice_step(7.0), 2.0);
    }

    #[test]
    fn empty_table_still_plots() {
        let t = aggregate(&[], &HistogramSpec::default()).unwrap();
        let plots = series_plots(&t);
        assert_eq!(plots.len(), 5);
        for (_, svg) in &plots {
            assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        }
    }

    #[test]
    fn gaps_split_lines() {
        let cats: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let svg = line_chart(
            "t",
            "x",
            "y",
            &cats,
            &[("s", vec![Some(1.0), None, Some(2.0), Some(3.0)])],
            None,
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn labels_are_escaped() {
        let svg = bar_chart("a<b", "x & y", &[0.0, 1.0], &[3]);
        assert!(svg.contains("a&lt;b") && svg.contains("x &amp; y"));
    }
}
