//! Minimal SVG charts for reports: bars, lines, grouped bars and the SHAP
//! summary scatter. Output is plain text with fixed precision, so it is
//! byte-stable for identical inputs.

use std::fmt::Write;

use crate::attribution::SummaryPlotData;

const WIDTH: f64 = 640.0;
const ROW: f64 = 22.0;
const LEFT: f64 = 160.0;
const TOP: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(height: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    s
}

/// Horizontal bars; negative values extend left of the axis in red.
pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let height = TOP + ROW * labels.len() as f64 + 20.0;
    let mut s = open(height, title);
    let span = WIDTH - LEFT - 20.0;
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let signed = values.iter().any(|&v| v < 0.0);
    let zero = if signed { LEFT + span / 2.0 } else { LEFT };
    let scale = if signed { span / 2.0 } else { span } / max;
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let y = TOP + ROW * i as f64;
        let w = v.abs() * scale;
        let x = if v < 0.0 { zero - w } else { zero };
        let color = if v < 0.0 { "#d62728" } else { "#2ca02c" };
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 14.0, escape(label));
        let _ = writeln!(s, r#"<rect x="{x:.1}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="{color}"/>"#, y + 3.0, ROW - 6.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10">{v:.4}</text>"#, zero + 4.0, y + 14.0);
    }
    let _ = writeln!(s, r##"<line x1="{zero:.1}" y1="{TOP}" x2="{zero:.1}" y2="{:.1}" stroke="#333"/>"##, height - 20.0);
    s.push_str("</svg>\n");
    s
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    const L: f64 = 70.0;
    const R: f64 = WIDTH - 20.0;
    const T: f64 = 40.0;
    const B: f64 = 360.0;

    fn px(&self, x: f64) -> f64 {
        Self::L + (x - self.x0) / (self.x1 - self.x0).max(1e-12) * (Self::R - Self::L)
    }

    fn py(&self, y: f64) -> f64 {
        Self::B - (y - self.y0) / (self.y1 - self.y0).max(1e-12) * (Self::B - Self::T)
    }
}

/// Line chart of `(x, y)` points with axis range labels.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let mut s = open(400.0, title);
    let fold = |f: fn(&(f64, f64)) -> f64| {
        points
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (x0, x1) = fold(|p| p.0);
    let (mut y0, mut y1) = fold(|p| p.1);
    if y1 - y0 < 1e-9 {
        y0 -= 0.05;
        y1 += 0.05;
    }
    let f = Frame { x0, x1, y0, y1 };
    let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.1},{:.1}", f.px(x), f.py(y))).collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##, path.join(" "));
    for &(x, y) in points {
        let _ = writeln!(s, r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="#1f77b4"/>"##, f.px(x), f.py(y));
    }
    axes(&mut s, &f, x_label, y_label);
    s.push_str("</svg>\n");
    s
}

fn axes(s: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        s,
        r##"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="#333"/>"##,
        l = Frame::L,
        t = Frame::T,
        b = Frame::B,
        r = Frame::R
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{:.3}</text>"#, Frame::L, Frame::B + 16.0, f.x0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{:.3}</text>"#, Frame::R, Frame::B + 16.0, f.x1);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, Frame::L - 4.0, Frame::B, f.y0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, Frame::L - 4.0, Frame::T + 4.0, f.y1);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
        (Frame::L + Frame::R) / 2.0,
        Frame::B + 32.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (Frame::T + Frame::B) / 2.0,
        (Frame::T + Frame::B) / 2.0,
        escape(y_label)
    );
}

/// Bars grouped per label, one color per series.
pub fn grouped_bar_chart(title: &str, labels: &[String], series: &[(String, Vec<f64>)]) -> String {
    const COLORS: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"];
    let group = ROW * series.len().max(1) as f64 + 8.0;
    let height = TOP + group * labels.len() as f64 + 20.0 * series.len() as f64 + 20.0;
    let mut s = open(height, title);
    let span = WIDTH - LEFT - 60.0;
    let max = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let signed = series.iter().flat_map(|(_, v)| v.iter()).any(|&v| v < 0.0);
    let zero = if signed { LEFT + span / 2.0 } else { LEFT };
    let scale = if signed { span / 2.0 } else { span } / max;
    for (g, label) in labels.iter().enumerate() {
        let y = TOP + group * g as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + group / 2.0,
            escape(label)
        );
        for (k, (_, values)) in series.iter().enumerate() {
            let v = values.get(g).copied().unwrap_or(0.0);
            let w = v.abs() * scale;
            let x = if v < 0.0 { zero - w } else { zero };
            let yy = y + ROW * k as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="{}"/>"#,
                yy + 2.0,
                ROW - 4.0,
                COLORS[k % COLORS.len()]
            );
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10">{v:.3}</text>"#, x + w + 4.0, yy + 14.0);
        }
    }
    let legend = TOP + group * labels.len() as f64 + 10.0;
    for (k, (name, _)) in series.iter().enumerate() {
        let y = legend + 20.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{y:.1}" width="12" height="12" fill="{}"/>"#, COLORS[k % COLORS.len()]);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, LEFT + 18.0, y + 11.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

/// SHAP summary: one row per feature, dots at each instance's SHAP value,
/// colored from blue (low feature value) to red (high).
pub fn summary_plot(title: &str, data: &SummaryPlotData, max_features: usize) -> String {
    let rows = data.features.len().min(max_features);
    let height = TOP + ROW * rows as f64 + 30.0;
    let mut s = open(height, title);
    let max = data.points[..rows]
        .iter()
        .flatten()
        .fold(0.0f64, |m, p| m.max(p.0.abs()))
        .max(1e-12);
    let span = WIDTH - LEFT - 30.0;
    let zero = LEFT + span / 2.0;
    for r in 0..rows {
        let y = TOP + ROW * r as f64 + ROW / 2.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, escape(&data.feature_names[r]));
        let pts = &data.points[r];
        let (lo, hi) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.1), h.max(p.1)));
        for &(phi, v) in pts {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let red = (255.0 * t).round() as u8;
            let blue = 255 - red;
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{y:.1}" r="2.5" fill="rgb({red},40,{blue})" fill-opacity="0.7"/>"#,
                zero + phi / max * span / 2.0
            );
        }
    }
    let _ = writeln!(s, r##"<line x1="{zero:.1}" y1="{TOP}" x2="{zero:.1}" y2="{:.1}" stroke="#999"/>"##, height - 30.0);
    let _ = writeln!(s, r#"<text x="{zero:.1}" y="{:.1}" text-anchor="middle">SHAP value</text>"#, height - 10.0);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed_and_stable() {
        let labels = vec!["a<b".to_string(), "c".to_string()];
        let bars = bar_chart("t", &labels, &[0.5, -0.25]);
        assert!(bars.starts_with("<svg") && bars.ends_with("</svg>\n"));
        assert!(bars.contains("a&lt;b"));
        assert_eq!(bars, bar_chart("t", &labels, &[0.5, -0.25]));
        let line = line_chart("pd", "x", "p", &[(0.0, 0.2), (1.0, 0.2)]);
        assert_eq!(line.matches("<circle").count(), 2);
        let grouped = grouped_bar_chart("g", &labels, &[("n".into(), vec![0.1, 0.2]), ("s".into(), vec![-0.1, 0.0])]);
        assert_eq!(grouped.matches("<rect").count(), 1 + 4 + 2);
        let data = SummaryPlotData {
            features: vec![1, 0],
            feature_names: vec!["f1".into(), "f0".into()],
            points: vec![vec![(0.1, 1.0), (-0.2, 2.0)], vec![(0.0, 0.0), (0.0, 0.0)]],
        };
        assert_eq!(summary_plot("s", &data, 10).matches("<circle").count(), 4);
    }
}
