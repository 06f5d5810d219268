use std::fmt::Write as _;
use std::path::Path;

use super::{PointRole, Projection2D, VizError};
use crate::coverage::CoverageScores;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 640.0;
const PLOT_LEFT: f64 = 40.0;
const PLOT_TOP: f64 = 60.0;
const PLOT_SIZE: f64 = 540.0;
const LEGEND_X: f64 = 620.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8",
];
const OUTLIER_COLOR: &str = "#d62728";

fn color(cluster: usize) -> &'static str {
    PALETTE[cluster % PALETTE.len()]
}

fn f(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn pct(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

/// Maps projection coordinates into the square plot area, preserving aspect.
fn scaler(points: &[[f64; 2]]) -> impl Fn([f64; 2]) -> (f64, f64) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if points.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0);
    let span = if span > 0.0 { span } else { 1.0 };
    let pad = 0.05 * PLOT_SIZE;
    let scale = (PLOT_SIZE - 2.0 * pad) / span;
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    move |p| {
        let x = PLOT_LEFT + PLOT_SIZE / 2.0 + (p[0] - cx) * scale;
        // SVG y grows downwards
        let y = PLOT_TOP + PLOT_SIZE / 2.0 - (p[1] - cy) * scale;
        (x, y)
    }
}

fn star(x: f64, y: f64, r: f64) -> String {
    let mut d = String::new();
    for i in 0..10 {
        let radius = if i % 2 == 0 { r } else { r * 0.45 };
        let a = std::f64::consts::PI * (i as f64) / 5.0 - std::f64::consts::FRAC_PI_2;
        let _ = write!(d, "{}{} {} ", if i == 0 { "M" } else { "L" }, f(x + radius * a.cos()), f(y + radius * a.sin()));
    }
    d.push('Z');
    d
}

fn cross(x: f64, y: f64, r: f64) -> String {
    format!(
        "M{} {} L{} {} M{} {} L{} {}",
        f(x - r),
        f(y - r),
        f(x + r),
        f(y + r),
        f(x - r),
        f(y + r),
        f(x + r),
        f(y - r)
    )
}

/// The SVG document as a string. Output depends only on the inputs.
pub fn scatter_svg(proj: &Projection2D, scores: &CoverageScores) -> Result<String, VizError> {
    proj.validate()?;
    let to_px = scaler(&proj.points);
    let n_chunks = proj.n_chunks();
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r#"<text class="title" x="{}" y="32" font-family="sans-serif" font-size="18">Semantic coverage ({} projection)</text>"#,
        f(PLOT_LEFT),
        proj.method.as_str()
    );
    let _ = writeln!(
        s,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#cccccc"/>"##,
        f(PLOT_LEFT),
        f(PLOT_TOP),
        f(PLOT_SIZE),
        f(PLOT_SIZE)
    );

    s.push_str("<g class=\"chunks\">\n");
    for i in 0..n_chunks {
        let (x, y) = to_px(proj.points[i]);
        let k = proj.cluster_of[i];
        let _ = writeln!(
            s,
            r#"<circle class="pt chunk cluster-{k}" cx="{}" cy="{}" r="3.5" fill="{}" fill-opacity="0.75"/>"#,
            f(x),
            f(y),
            color(k)
        );
    }
    s.push_str("</g>\n<g class=\"questions\">\n");
    for (row, role) in proj.roles.iter().enumerate().skip(n_chunks) {
        let (x, y) = to_px(proj.points[row]);
        let q = proj.question_index[row - n_chunks];
        match role {
            PointRole::InlierQuestion => {
                let _ = writeln!(
                    s,
                    r##"<path class="pt question inlier" data-question="{q}" d="{}" fill="#111111" stroke="#ffffff" stroke-width="1"/>"##,
                    star(x, y, 9.0)
                );
            }
            PointRole::OutlierQuestion => {
                let _ = writeln!(
                    s,
                    r#"<path class="pt question outlier" data-question="{q}" d="{}" fill="none" stroke="{OUTLIER_COLOR}" stroke-width="2.5"/>"#,
                    cross(x, y, 7.0)
                );
                let _ = writeln!(
                    s,
                    r#"<text class="outlier-label" x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{OUTLIER_COLOR}">Q{q} outlier</text>"#,
                    f(x + 9.0),
                    f(y - 9.0)
                );
            }
            PointRole::Chunk => unreachable!("validated: chunks precede questions"),
        }
    }
    s.push_str("</g>\n");

    let mut sizes: Vec<usize> = Vec::new();
    for &k in &proj.cluster_of {
        if sizes.len() <= k {
            sizes.resize(k + 1, 0);
        }
        sizes[k] += 1;
    }
    let mut y = PLOT_TOP + 10.0;
    s.push_str("<g class=\"legend\" font-family=\"sans-serif\" font-size=\"13\">\n");
    for (k, size) in sizes.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{}" r="5" fill="{}"/><text x="{}" y="{}">Cluster {k} ({size} chunks)</text>"#,
            f(LEGEND_X + 6.0),
            f(y),
            color(k),
            f(LEGEND_X + 18.0),
            f(y + 4.0)
        );
        y += 22.0;
    }
    let _ = writeln!(
        s,
        r##"<path d="{}" fill="#111111"/><text x="{}" y="{}">Inlier question</text>"##,
        star(LEGEND_X + 6.0, y, 8.0),
        f(LEGEND_X + 18.0),
        f(y + 4.0)
    );
    y += 22.0;
    let _ = writeln!(
        s,
        r#"<path d="{}" fill="none" stroke="{OUTLIER_COLOR}" stroke-width="2.5"/><text x="{}" y="{}">Outlier question</text>"#,
        cross(LEGEND_X + 6.0, y, 6.0),
        f(LEGEND_X + 18.0),
        f(y + 4.0)
    );
    y += 40.0;
    s.push_str("</g>\n");

    s.push_str("<g class=\"annotations\" font-family=\"sans-serif\" font-size=\"14\">\n");
    let metrics = [
        ("basic", "Basic coverage", scores.basic),
        ("weighted", "Weighted coverage", scores.weighted),
        ("multi", "Multi-cluster coverage", scores.multi_threshold),
    ];
    for (class, label, value) in metrics {
        let _ = writeln!(
            s,
            r#"<text class="metric {class}" x="{}" y="{}">{}: {}</text>"#,
            f(LEGEND_X),
            f(y),
            escape(label),
            pct(value)
        );
        y += 22.0;
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

pub fn render_scatter(proj: &Projection2D, scores: &CoverageScores, out_path: &Path) -> Result<(), VizError> {
    let svg = scatter_svg(proj, scores)?;
    std::fs::write(out_path, svg).map_err(|source| VizError::Io { path: out_path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::MultiCoverageMode;
    use crate::viz::ProjectionMethod;

    fn scores() -> CoverageScores {
        CoverageScores {
            basic: 0.694,
            weighted: 0.7,
            multi_threshold: 0.5,
            multi_mode: MultiCoverageMode::Threshold(0.5),
            n_chunks: 10,
            n_inlier_questions: 1,
            per_cluster: vec![],
        }
    }

    fn projection(outlier: bool) -> Projection2D {
        let mut points: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, (i % 3) as f64]).collect();
        points.push([2.0, 2.0]);
        points.push([9.0, -4.0]);
        let mut roles = vec![PointRole::Chunk; 10];
        roles.push(PointRole::InlierQuestion);
        roles.push(if outlier { PointRole::OutlierQuestion } else { PointRole::InlierQuestion });
        Projection2D {
            points,
            roles,
            cluster_of: (0..10).map(|i| usize::from(i >= 5)).collect(),
            question_index: vec![0, 1],
            method: ProjectionMethod::Pca,
            seed: 7,
        }
    }

    #[test]
    fn element_counts() {
        let svg = scatter_svg(&projection(false), &scores()).unwrap();
        assert_eq!(svg.matches("class=\"pt ").count(), 12);
        assert_eq!(svg.matches("class=\"metric ").count(), 3);
        assert!(svg.contains("class=\"legend\""));
        assert!(svg.contains("Basic coverage: 69.4%"));
        assert!(!svg.contains("outlier-label"));
    }

    #[test]
    fn outlier_is_flagged() {
        let svg = scatter_svg(&projection(true), &scores()).unwrap();
        assert_eq!(svg.matches("class=\"pt question outlier\"").count(), 1);
        assert!(svg.contains("Q1 outlier"));
    }

    #[test]
    fn coordinates_have_four_decimals() {
        assert_eq!(f(1.0 / 3.0), "0.3333");
        assert_eq!(f(-0.00001), "0.0000");
    }
}
