//! Static SVG line charts for energy traces.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// Line chart of each series in its own colour, axes labelled with the data range.
pub fn line_chart(title: &str, x_label: &str, series: &[Series]) -> String {
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, escape(x_label));
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" font-size="10" text-anchor="middle">{x0:.4e}</text>"#, H - PAD + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{x1:.4e}</text>"#, W - PAD, H - PAD + 14.0);
    let _ = writeln!(s, r#"<text x="4" y="{}" font-size="10">{y0:.6e}</text>"#, H - PAD);
    let _ = writeln!(s, r#"<text x="4" y="{}" font-size="10">{y1:.6e}</text>"#, PAD - 4.0);
    for (k, ser) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let mut d = String::new();
        for (i, &(x, y)) in ser.points.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { " L" }, sx(x), sy(y));
        }
        let _ = writeln!(s, r#"<path d="{d}" stroke="{c}" stroke-width="1.5" fill="none"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{c}">{}</text>"#,
            W - PAD - 100.0,
            PAD + 14.0 * k as f64,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_has_one_path_per_series() {
        let s = line_chart(
            "E(t) <ray>",
            "t",
            &[
                Series { label: "a".into(), points: vec![(0.0, 1.0), (1.0, 2.0)] },
                Series { label: "b".into(), points: vec![(0.0, 1.0), (1.0, 1.0)] },
            ],
        );
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("stroke-width").count(), 2);
        assert!(s.contains("&lt;ray&gt;"));
    }
}
