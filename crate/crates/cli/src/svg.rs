//! Minimal self-contained SVG emitter: enough path, polyline, and text
//! machinery for cost curves and set plots, with a linear data-to-screen
//! mapping and simple tick generation. No external plotting dependency.

use std::fmt::Write;

pub struct Canvas {
    width: f64,
    height: f64,
    margin: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    body: String,
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e6 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl Canvas {
    pub fn new(width: f64, height: f64, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Self {
            width,
            height,
            margin: 54.0,
            x_range,
            y_range,
            body: String::new(),
        }
    }

    fn sx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.margin + (x - lo) / (hi - lo) * (self.width - 2.0 * self.margin)
    }

    fn sy(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.height - self.margin - (y - lo) / (hi - lo) * (self.height - 2.0 * self.margin)
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, width: f64, dashed: bool) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.sx(x), self.sy(y)))
            .collect();
        let dash = if dashed { " stroke-dasharray=\"6,4\"" } else { "" };
        writeln!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{} />",
            coords.join(" "),
            color,
            width,
            dash
        )
        .unwrap();
    }

    pub fn polygon(&mut self, pts: &[(f64, f64)], fill: &str, stroke: &str, opacity: f64) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.sx(x), self.sy(y)))
            .collect();
        writeln!(
            self.body,
            "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"{}\" />",
            coords.join(" "),
            fill,
            opacity,
            stroke
        )
        .unwrap();
    }

    pub fn circle_marker(&mut self, x: f64, y: f64, r: f64, color: &str) {
        writeln!(
            self.body,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{}\" fill=\"{}\" />",
            self.sx(x),
            self.sy(y),
            r,
            color
        )
        .unwrap();
    }

    /// Legend entry at screen-space position index `slot`.
    pub fn legend(&mut self, slot: usize, label: &str, color: &str, dashed: bool) {
        let x0 = self.margin + 12.0;
        let y = self.margin + 8.0 + 18.0 * slot as f64;
        let dash = if dashed { " stroke-dasharray=\"6,4\"" } else { "" };
        writeln!(
            self.body,
            "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"2\"{dash} />",
            x0 + 26.0
        )
        .unwrap();
        writeln!(
            self.body,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\">{label}</text>",
            x0 + 32.0,
            y + 4.0
        )
        .unwrap();
    }

    pub fn axes(&mut self, x_label: &str, y_label: &str, x_ticks: &[f64], y_ticks: &[f64]) {
        let (x0, x1) = (self.margin, self.width - self.margin);
        let (y0, y1) = (self.height - self.margin, self.margin);
        writeln!(
            self.body,
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\" />"
        )
        .unwrap();
        writeln!(
            self.body,
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\" />"
        )
        .unwrap();
        for &t in x_ticks {
            let sx = self.sx(t);
            writeln!(
                self.body,
                "<line x1=\"{sx:.2}\" y1=\"{y0}\" x2=\"{sx:.2}\" y2=\"{}\" stroke=\"black\" />",
                y0 + 5.0
            )
            .unwrap();
            writeln!(
                self.body,
                "<text x=\"{sx:.2}\" y=\"{}\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"middle\">{}</text>",
                y0 + 17.0,
                fmt_num(t)
            )
            .unwrap();
        }
        for &t in y_ticks {
            let sy = self.sy(t);
            writeln!(
                self.body,
                "<line x1=\"{}\" y1=\"{sy:.2}\" x2=\"{x0}\" y2=\"{sy:.2}\" stroke=\"black\" />",
                x0 - 5.0
            )
            .unwrap();
            writeln!(
                self.body,
                "<text x=\"{}\" y=\"{:.2}\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\">{}</text>",
                x0 - 8.0,
                sy + 3.5,
                fmt_num(t)
            )
            .unwrap();
        }
        let xl = (self.width) / 2.0;
        writeln!(
            self.body,
            "<text x=\"{xl}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\">{x_label}</text>",
            self.height - 12.0
        )
        .unwrap();
        writeln!(
            self.body,
            "<text x=\"16\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>",
            self.height / 2.0,
            self.height / 2.0
        )
        .unwrap();
    }

    pub fn finish(self, title: &str) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\" />\n<text x=\"{tx}\" y=\"22\" font-size=\"13\" font-family=\"sans-serif\" text-anchor=\"middle\">{title}</text>\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            tx = self.width / 2.0,
            body = self.body
        )
    }
}

/// Evenly spaced ticks covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) || n < 2 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Andrew monotone-chain convex hull, counterclockwise.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_plus_interior() {
        let pts = vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 1.0),
            (0.0, 1.0),
            (0.5, 0.5),
            (0.25, 0.75),
        ];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!(hull.contains(&(0.0, 0.0)));
        assert!(hull.contains(&(1.0, 1.0)));
        assert!(!hull.contains(&(0.5, 0.5)));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let mut c = Canvas::new(400.0, 300.0, (0.0, 1.0), (0.0, 2.0));
        c.polyline(&[(0.0, 0.0), (1.0, 2.0)], "blue", 1.5, false);
        c.axes("x", "y", &ticks(0.0, 1.0, 3), &ticks(0.0, 2.0, 3));
        let out = c.finish("test");
        assert!(out.starts_with("<svg"));
        assert!(out.trim_end().ends_with("</svg>"));
        assert_eq!(out.matches("<polyline").count(), 1);
    }
}
