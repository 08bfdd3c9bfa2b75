//! Histogram-with-curve SVG. Output depends only on the inputs: fixed
//! canvas, fixed three-decimal coordinates, no timestamps or ids.

use std::fmt::Write;

use bft_blocktime::fitting::Histogram;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 64.0;
const CURVE_COLORS: [&str; 4] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curve {
    fn range(&self) -> Option<(f64, f64)> {
        Some((*self.t.first()?, *self.t.last()?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub svg: String,
    pub warnings: Vec<String>,
}

/// Draw `hist` as bars with each non-empty curve as a line on top. When a
/// curve's t-range and the histogram's range disagree by more than one bin
/// the view is clipped to their intersection and a warning is returned.
pub fn render(hist: &Histogram, curves: &[Curve], title: Option<&str>) -> Plot {
    let edges = hist.bin_edges();
    let (h0, h1) = (edges[0], edges[edges.len() - 1]);
    let slack = hist.widths().into_iter().fold(0.0, f64::max);
    let mut warnings = Vec::new();
    let (mut x0, mut x1) = (h0, h1);
    let mut curves: Vec<&Curve> = curves.iter().filter(|c| !c.t.is_empty()).collect();
    for (i, c) in curves.iter().enumerate() {
        let (c0, c1) = c.range().unwrap_or((h0, h1));
        if (c0 - h0).abs() > slack || (c1 - h1).abs() > slack {
            warnings.push(format!(
                "curve {} covers [{c0}, {c1}] but the histogram covers [{h0}, {h1}]; clipping to the overlap",
                i + 1
            ));
            x0 = x0.max(c0);
            x1 = x1.min(c1);
        }
    }
    if x0 >= x1 {
        warnings.push("curve and histogram do not overlap; drawing the histogram only".into());
        (x0, x1) = (h0, h1);
        curves.clear();
    }

    let inside = |t: f64| t >= x0 && t <= x1;
    let mut y_max = hist
        .densities()
        .iter()
        .zip(edges.windows(2))
        .filter(|(_, e)| e[1] > x0 && e[0] < x1)
        .map(|(d, _)| *d)
        .fold(0.0, f64::max);
    for c in &curves {
        for (&t, &y) in c.t.iter().zip(&c.y) {
            if inside(t) && y.is_finite() {
                y_max = y_max.max(y);
            }
        }
    }
    if y_max <= 0.0 {
        y_max = 1.0;
    }
    let y_top = y_max * 1.05;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + (t - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + plot_h - y / y_top * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    if let Some(title) = title {
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
    }

    let _ = writeln!(
        s,
        r##"<g class="bars" fill="#9ecae1" stroke="#4a7ea8" stroke-width="0.5">"##
    );
    for (d, e) in hist.densities().iter().zip(edges.windows(2)) {
        let (a, b) = (e[0].max(x0), e[1].min(x1));
        if b <= a || *d <= 0.0 {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/>"#,
            sx(a),
            sy(*d),
            sx(b) - sx(a),
            sy(0.0) - sy(*d)
        );
    }
    s.push_str("</g>\n");

    for (i, c) in curves.iter().enumerate() {
        let mut d = String::new();
        for (&t, &y) in c.t.iter().zip(&c.y) {
            if !inside(t) || !y.is_finite() {
                continue;
            }
            let _ = write!(
                d,
                "{}{:.3} {:.3}",
                if d.is_empty() { "M" } else { " L" },
                sx(t),
                sy(y.min(y_top))
            );
        }
        if d.is_empty() {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<path class="curve" d="{d}" fill="none" stroke="{}" stroke-width="2"/>"#,
            CURVE_COLORS[i % CURVE_COLORS.len()]
        );
    }

    // axes
    let _ = writeln!(s, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
        sy(0.0),
        LEFT + plot_w,
        sy(0.0)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.3}" y1="{TOP:.3}" x2="{LEFT:.3}" y2="{:.3}"/>"#,
        sy(0.0)
    );
    let mut labels = String::new();
    for (v, text) in ticks(x0, x1) {
        let x = sx(v);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.3}" y1="{:.3}" x2="{x:.3}" y2="{:.3}"/>"#,
            sy(0.0),
            sy(0.0) + 5.0
        );
        let _ = writeln!(
            labels,
            r#"<text x="{x:.3}" y="{:.3}" text-anchor="middle">{text}</text>"#,
            sy(0.0) + 19.0
        );
    }
    for (v, text) in ticks(0.0, y_top) {
        let y = sy(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{y:.3}" x2="{LEFT:.3}" y2="{y:.3}"/>"#,
            LEFT - 5.0
        );
        let _ = writeln!(
            labels,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{text}</text>"#,
            LEFT - 8.0,
            y + 4.0
        );
    }
    s.push_str("</g>\n");
    s.push_str(&labels);
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">block time (s)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.3}" text-anchor="middle" transform="rotate(-90 20 {:.3})">density (1/s)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    s.push_str("</svg>\n");
    Plot { svg: s, warnings }
}

/// Round tick positions (1, 2 or 5 times a power of ten) inside `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let raw = (hi - lo) / 6.0;
    if !(raw > 0.0 && raw.is_finite()) {
        return Vec::new();
    }
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last)
        .map(|i| {
            let v = i as f64 * step;
            let text = format!("{:.*}", decimals, v);
            // avoid "-0"
            let text = if text.trim_start_matches(['-', '0', '.']).is_empty() {
                format!("{:.*}", decimals, 0.0)
            } else {
                text
            };
            (v, text)
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
