//! Minimal SVG line plots for evaluation curves.

use std::fmt::Write as _;

use crate::io::report::ReportBundle;

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    fn sx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        MARGIN + (x - lo) / (hi - lo) * (W - 2.0 * MARGIN)
    }

    fn sy(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        H - MARGIN - (y - lo) / (hi - lo) * (H - 2.0 * MARGIN)
    }

    pub fn to_svg(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
        let _ = writeln!(
            s,
            r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x_range.0 + f * (self.x_range.1 - self.x_range.0);
            let yv = self.y_range.0 + f * (self.y_range.1 - self.y_range.0);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
                self.sx(xv),
                y0 + 14.0,
                trim(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                self.sy(yv) + 3.0,
                trim(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="20" font-size="13" text-anchor="middle">{}</text>"#,
            W / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 10.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="12" y="{:.1}" font-size="11" text-anchor="middle" transform="rotate(-90 12 {:.1})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            esc(&self.y_label)
        );
        for (i, series) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", self.sx(x), self.sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
            let ly = MARGIN + 14.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{ly:.1}" font-size="10" fill="{color}" text-anchor="end">{}</text>"#,
                x1,
                esc(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn trim(v: f64) -> String {
    let t = format!("{v:.2}");
    t.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Mean IoU against threshold for each labelled report.
pub fn iou_threshold_plot(reports: &[(&str, &ReportBundle)]) -> Plot {
    Plot {
        title: "IoU vs threshold".into(),
        x_label: "threshold".into(),
        y_label: "mean IoU".into(),
        x_range: (0.0, 255.0),
        y_range: (0.0, 1.0),
        series: reports
            .iter()
            .map(|(label, r)| Series {
                label: label.to_string(),
                points: r
                    .curve
                    .thresholds
                    .iter()
                    .zip(&r.curve.mean_iou)
                    .map(|(&t, &v)| (f64::from(t), v))
                    .collect(),
            })
            .collect(),
    }
}

/// Precision against recall, from any precision/recall sequence.
pub fn pr_plot(title: &str, series: Vec<(String, Vec<f64>, Vec<f64>)>) -> Plot {
    Plot {
        title: title.into(),
        x_label: "recall".into(),
        y_label: "precision".into(),
        x_range: (0.0, 1.0),
        y_range: (0.0, 1.0),
        series: series
            .into_iter()
            .map(|(label, precision, recall)| Series {
                label,
                points: recall.into_iter().zip(precision).collect(),
            })
            .collect(),
    }
}

pub fn report_pr_plot(reports: &[(&str, &ReportBundle)]) -> Plot {
    pr_plot(
        "Precision-recall",
        reports
            .iter()
            .map(|(l, r)| (l.to_string(), r.curve.precision.clone(), r.curve.recall.clone()))
            .collect(),
    )
}
