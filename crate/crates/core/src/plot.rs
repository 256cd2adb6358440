//! Static SVG emission: correlation heatmaps (b̂ in the upper triangle, the
//! difference b̂ - ĉ in the lower), PC scatter plots, and scree plots.
//!
//! Output is deterministic: no timestamps, floats printed at 6 decimal
//! places, colors computed from a fixed diverging palette.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::model::{CorrelationReport, EigenDecomposition, PopulationLabels, ProjectionMethod};

/// Fixed categorical palette for population blocks.
const BLOCK_COLORS: [&str; 10] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
    "#1f78b4", "#b2182b",
];

fn fmt(x: f64) -> String {
    format!("{:.6}", x)
}

/// Diverging blue-white-red color for v on a scale symmetric about zero.
pub fn diverging_color(v: f64, bound: f64) -> (u8, u8, u8) {
    let t = (v / bound).clamp(-1.0, 1.0);
    let lerp = |a: f64, b: f64, w: f64| (a + (b - a) * w).round() as u8;
    let white = (247.0, 247.0, 247.0);
    if t < 0.0 {
        let blue = (33.0, 102.0, 172.0);
        let w = -t;
        (
            lerp(white.0, blue.0, w),
            lerp(white.1, blue.1, w),
            lerp(white.2, blue.2, w),
        )
    } else {
        let red = (178.0, 24.0, 43.0);
        (
            lerp(white.0, red.0, t),
            lerp(white.1, red.1, t),
            lerp(white.2, red.2, t),
        )
    }
}

/// Symmetric color bound: max absolute plotted value, floored at 0.05.
pub fn heatmap_bound(report: &CorrelationReport) -> f64 {
    let n = report.n();
    let mut maxabs = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j || report.undefined_mask[(i, j)] {
                continue;
            }
            let v = if j > i {
                report.b_hat[(i, j)]
            } else {
                report.diff[(i, j)]
            };
            maxabs = maxabs.max(v.abs());
        }
    }
    maxabs.max(0.05)
}

fn rect(x: f64, y: f64, w: f64, h: f64, fill: &str) -> String {
    format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
        fmt(x),
        fmt(y),
        fmt(w),
        fmt(h),
        fill
    )
}

fn line(x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) -> String {
    format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"/>",
        fmt(x1),
        fmt(y1),
        fmt(x2),
        fmt(y2),
        stroke,
        fmt(width)
    )
}

fn text(x: f64, y: f64, size: f64, anchor: &str, s: &str) -> String {
    format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"{}\" font-family=\"sans-serif\" text-anchor=\"{}\">{}</text>",
        fmt(x),
        fmt(y),
        fmt(size),
        anchor,
        s
    )
}

const NEUTRAL: &str = "#d9d9d9";

/// Heatmap of the paired correlation report: b̂ above the diagonal, b̂ - ĉ
/// below it, the diagonal and masked cells neutral gray, block boundaries
/// drawn when labels are present, plus a color legend.
pub fn heatmap_svg(report: &CorrelationReport) -> String {
    let n = report.n();
    let cell = (600.0 / n as f64).clamp(2.0, 24.0);
    let grid = cell * n as f64;
    let margin = 40.0;
    let legend_w = 90.0;
    let width = margin + grid + legend_w + 20.0;
    let height = margin + grid + 20.0;
    let bound = heatmap_bound(report);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        fmt(width),
        fmt(height),
        fmt(width),
        fmt(height)
    ));
    out.push_str(&rect(0.0, 0.0, width, height, "#ffffff"));
    out.push('\n');

    for i in 0..n {
        for j in 0..n {
            let fill = if i == j || report.undefined_mask[(i, j)] {
                NEUTRAL.to_string()
            } else {
                let v = if j > i {
                    report.b_hat[(i, j)]
                } else {
                    report.diff[(i, j)]
                };
                let (r, g, b) = diverging_color(v, bound);
                format!("rgb({},{},{})", r, g, b)
            };
            out.push_str(&rect(
                margin + j as f64 * cell,
                margin + i as f64 * cell,
                cell,
                cell,
                &fill,
            ));
            out.push('\n');
        }
    }

    if let Some(labels) = &report.labels {
        let mut boundaries = Vec::new();
        let a = labels.assignment();
        for i in 1..n {
            if a[i] != a[i - 1] {
                boundaries.push(i);
            }
        }
        for b in boundaries {
            let pos = margin + b as f64 * cell;
            out.push_str(&line(pos, margin, pos, margin + grid, "#000000", 1.0));
            out.push('\n');
            out.push_str(&line(margin, pos, margin + grid, pos, "#000000", 1.0));
            out.push('\n');
        }
        // block name at the center of each block along the top
        for (name, idx) in labels.blocks() {
            let mid = margin + (idx[0] + idx.len() / 2) as f64 * cell;
            out.push_str(&text(mid, margin - 8.0, 11.0, "middle", &name));
            out.push('\n');
        }
    }
    out.push_str(&line(margin, margin, margin + grid, margin + grid, "#000000", 0.5));
    out.push('\n');

    // legend: vertical gradient strip, +bound at top
    let lx = margin + grid + 30.0;
    let lh = grid.min(240.0);
    let ly = margin;
    let steps = 48;
    for s in 0..steps {
        let v = bound - 2.0 * bound * (s as f64 + 0.5) / steps as f64;
        let (r, g, b) = diverging_color(v, bound);
        out.push_str(&rect(
            lx,
            ly + lh * s as f64 / steps as f64,
            16.0,
            lh / steps as f64 + 0.5,
            &format!("rgb({},{},{})", r, g, b),
        ));
        out.push('\n');
    }
    out.push_str(&text(lx + 22.0, ly + 5.0, 10.0, "start", &fmt(bound)));
    out.push('\n');
    out.push_str(&text(lx + 22.0, ly + lh / 2.0 + 3.0, 10.0, "start", "0"));
    out.push('\n');
    out.push_str(&text(lx + 22.0, ly + lh + 3.0, 10.0, "start", &fmt(-bound)));
    out.push('\n');
    out.push_str(&text(
        margin + grid / 2.0,
        height - 4.0,
        11.0,
        "middle",
        "upper: empirical correlation, lower: difference",
    ));
    out.push('\n');
    out.push_str("</svg>\n");
    out
}

/// Individual coordinates on eigenvector axes scaled by sqrt(eigenvalue).
pub fn pc_coordinates(
    eig: &EigenDecomposition,
    comp_x: usize,
    comp_y: usize,
) -> Result<Vec<(f64, f64)>> {
    let n = eig.n();
    if comp_x >= n || comp_y >= n {
        return Err(Error::DimensionMismatch(format!(
            "components ({}, {}) out of range for n = {}",
            comp_x + 1,
            comp_y + 1,
            n
        )));
    }
    let sx = eig.eigenvalues()[comp_x].max(0.0).sqrt();
    let sy = eig.eigenvalues()[comp_y].max(0.0).sqrt();
    Ok((0..n)
        .map(|i| {
            (
                eig.eigenvectors()[(i, comp_x)] * sx,
                eig.eigenvectors()[(i, comp_y)] * sy,
            )
        })
        .collect())
}

/// Default component pair (0-based) for a scatter plot. The first PC of the
/// unadjusted estimator tracks overall scale rather than structure, so it is
/// skipped there.
pub fn default_scatter_components(method: ProjectionMethod, k_prime: usize) -> (usize, usize) {
    match method {
        ProjectionMethod::Pca1 if k_prime >= 3 => (1, 2),
        ProjectionMethod::Pca1 => (1, 1),
        _ => (0, 1.min(k_prime.saturating_sub(1))),
    }
}

/// Scatter plot of individual coordinates, colored by population label.
pub fn scatter_svg(
    coords: &[(f64, f64)],
    labels: Option<&PopulationLabels>,
    axis_x: &str,
    axis_y: &str,
) -> Result<String> {
    if coords.is_empty() {
        return Err(Error::Degenerate("no points to plot".into()));
    }
    if let Some(l) = labels {
        if l.n() != coords.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} points",
                l.n(),
                coords.len()
            )));
        }
    }
    let (width, height) = (520.0, 420.0);
    let (ml, mr, mt, mb) = (55.0, 120.0, 15.0, 45.0);
    let xmin = coords.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let xmax = coords.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let ymin = coords.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let ymax = coords.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-12);
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (xmin, xmax) = pad(xmin, xmax);
    let (ymin, ymax) = pad(ymin, ymax);
    let sx = |x: f64| ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
    let sy = |y: f64| height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        fmt(width),
        fmt(height),
        fmt(width),
        fmt(height)
    ));
    out.push_str(&rect(0.0, 0.0, width, height, "#ffffff"));
    out.push('\n');
    out.push_str(&line(ml, mt, ml, height - mb, "#000000", 1.0));
    out.push('\n');
    out.push_str(&line(ml, height - mb, width - mr, height - mb, "#000000", 1.0));
    out.push('\n');

    let color_of = |i: usize| -> &str {
        match labels {
            Some(l) => {
                let name = &l.assignment()[i];
                let pos = l.block_order().iter().position(|b| b == name).unwrap_or(0);
                BLOCK_COLORS[pos % BLOCK_COLORS.len()]
            }
            None => BLOCK_COLORS[0],
        }
    };
    for (i, &(x, y)) in coords.iter().enumerate() {
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.8\"/>\n",
            fmt(sx(x)),
            fmt(sy(y)),
            color_of(i)
        ));
    }

    if let Some(l) = labels {
        for (pos, name) in l.block_order().iter().enumerate() {
            let y = mt + 14.0 + pos as f64 * 16.0;
            out.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/>\n",
                fmt(width - mr + 14.0),
                fmt(y - 3.0),
                BLOCK_COLORS[pos % BLOCK_COLORS.len()]
            ));
            out.push_str(&text(width - mr + 24.0, y, 11.0, "start", name));
            out.push('\n');
        }
    }
    out.push_str(&text(
        (ml + width - mr) / 2.0,
        height - 10.0,
        12.0,
        "middle",
        axis_x,
    ));
    out.push('\n');
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 {} {})\">{}</text>\n",
        fmt(14.0),
        fmt((mt + height - mb) / 2.0),
        fmt(14.0),
        fmt((mt + height - mb) / 2.0),
        axis_y
    ));
    out.push_str("</svg>\n");
    Ok(out)
}

/// Scree plot of eigenvalues; `skip_first` drops the scale-dominated leading
/// eigenvalue of the unadjusted estimator.
pub fn scree_svg(eigenvalues: &[f64], skip_first: bool) -> Result<String> {
    let vals: &[f64] = if skip_first {
        if eigenvalues.len() < 2 {
            return Err(Error::Degenerate(
                "scree with the first eigenvalue removed needs at least 2".into(),
            ));
        }
        &eigenvalues[1..]
    } else {
        if eigenvalues.is_empty() {
            return Err(Error::Degenerate("no eigenvalues to plot".into()));
        }
        eigenvalues
    };
    let shown = vals.len().min(20);
    let vals = &vals[..shown];
    let vmax = vals.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let (width, height) = (520.0, 320.0);
    let (ml, mr, mt, mb) = (55.0, 15.0, 15.0, 40.0);
    let bw = (width - ml - mr) / shown as f64;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        fmt(width),
        fmt(height),
        fmt(width),
        fmt(height)
    ));
    out.push_str(&rect(0.0, 0.0, width, height, "#ffffff"));
    out.push('\n');
    out.push_str(&line(ml, mt, ml, height - mb, "#000000", 1.0));
    out.push('\n');
    out.push_str(&line(ml, height - mb, width - mr, height - mb, "#000000", 1.0));
    out.push('\n');
    for (i, &v) in vals.iter().enumerate() {
        let h = (v.max(0.0) / vmax) * (height - mt - mb);
        out.push_str(&rect(
            ml + i as f64 * bw + bw * 0.15,
            height - mb - h,
            bw * 0.7,
            h,
            "#4477aa",
        ));
        out.push('\n');
        let idx = if skip_first { i + 2 } else { i + 1 };
        out.push_str(&text(
            ml + (i as f64 + 0.5) * bw,
            height - mb + 14.0,
            10.0,
            "middle",
            &idx.to_string(),
        ));
        out.push('\n');
    }
    out.push_str(&text(ml - 5.0, mt + 8.0, 10.0, "end", &fmt(vmax)));
    out.push('\n');
    out.push_str(&text(
        (ml + width - mr) / 2.0,
        height - 8.0,
        12.0,
        "middle",
        "component",
    ));
    out.push('\n');
    out.push_str("</svg>\n");
    Ok(out)
}

/// Matrix heatmap entry point used by the CLI when only raw matrices exist.
pub fn report_from_matrices(
    b_hat: ArrayView2<'_, f64>,
    diff: ArrayView2<'_, f64>,
    labels: Option<PopulationLabels>,
) -> Result<CorrelationReport> {
    let c_hat = &b_hat - &diff;
    let mask = ndarray::Array2::from_elem(b_hat.dim(), false);
    CorrelationReport::new(b_hat.to_owned(), c_hat, labels, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::pca1_fit;
    use ndarray::Array2;

    fn toy_report(diff_val: f64) -> CorrelationReport {
        let n = 6;
        let mut b = Array2::<f64>::eye(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    b[(i, j)] = -0.02;
                }
            }
        }
        let c = &b - diff_val;
        let mut c = c;
        for i in 0..n {
            c[(i, i)] = 1.0;
        }
        let mask = Array2::from_elem((n, n), false);
        let labels = PopulationLabels::from_sizes("pop", &[3, 3]).unwrap();
        CorrelationReport::new(b, c, Some(labels), mask).unwrap()
    }

    #[test]
    fn heatmap_zero_diff_lower_triangle_neutral() {
        let rep = toy_report(0.0);
        let svg = heatmap_svg(&rep);
        let zero_fill = {
            let (r, g, b) = diverging_color(0.0, heatmap_bound(&rep));
            format!("rgb({},{},{})", r, g, b)
        };
        // every lower-triangle cell carries the zero color
        let count = svg.matches(&zero_fill).count();
        assert!(count >= 15, "expected >= 15 neutral cells, found {}", count);
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn heatmap_deterministic() {
        let rep = toy_report(0.013);
        assert_eq!(heatmap_svg(&rep), heatmap_svg(&rep));
    }

    #[test]
    fn color_scale_symmetric_and_floored() {
        let rep = toy_report(0.0);
        assert_eq!(heatmap_bound(&rep), 0.05);
        let (r1, _, b1) = diverging_color(-0.05, 0.05);
        let (r2, _, b2) = diverging_color(0.05, 0.05);
        assert!(b1 > r1);
        assert!(r2 > b2);
        assert_eq!(diverging_color(0.0, 0.05), (247, 247, 247));
    }

    #[test]
    fn scatter_separates_scenario1_clusters() {
        let spec = crate::simulate::ScenarioSpec::preset(1, 20_000, Some(vec![20, 20, 20]), 2)
            .unwrap();
        let ds = crate::simulate::simulate(&spec).unwrap();
        let (_, eig) = pca1_fit(&ds.genotypes, 3).unwrap();
        let coords = pc_coordinates(&eig, 1, 2).unwrap();
        let blocks = ds.labels.blocks();
        let mut centroids = Vec::new();
        let mut spreads = Vec::new();
        for (_, idx) in &blocks {
            let cx = idx.iter().map(|&i| coords[i].0).sum::<f64>() / idx.len() as f64;
            let cy = idx.iter().map(|&i| coords[i].1).sum::<f64>() / idx.len() as f64;
            let spread = (idx
                .iter()
                .map(|&i| (coords[i].0 - cx).powi(2) + (coords[i].1 - cy).powi(2))
                .sum::<f64>()
                / idx.len() as f64)
                .sqrt();
            centroids.push((cx, cy));
            spreads.push(spread);
        }
        let max_spread = spreads.iter().cloned().fold(0.0f64, f64::max);
        for a in 0..3 {
            for b in (a + 1)..3 {
                let d = ((centroids[a].0 - centroids[b].0).powi(2)
                    + (centroids[a].1 - centroids[b].1).powi(2))
                .sqrt();
                assert!(
                    d > 5.0 * max_spread,
                    "centroids {} and {} too close: {} vs spread {}",
                    a,
                    b,
                    d,
                    max_spread
                );
            }
        }
        let svg = scatter_svg(&coords, Some(&ds.labels), "PC 2", "PC 3").unwrap();
        assert_eq!(svg.matches("<circle").count(), 60 + 3);
    }

    #[test]
    fn scree_scenario1_rank_structure() {
        let spec =
            crate::simulate::ScenarioSpec::preset(1, 20_000, Some(vec![10, 10, 10]), 4).unwrap();
        let ds = crate::simulate::simulate(&spec).unwrap();
        let (_, eig) = pca1_fit(&ds.genotypes, 3).unwrap();
        let ev = eig.eigenvalues();
        assert!(ev[1] / ev[3].max(1e-12) > 10.0);
        assert!(ev[2] / ev[3].max(1e-12) > 10.0);
        let svg = scree_svg(ev.as_slice().unwrap(), true).unwrap();
        // first label after removal is component 2
        assert!(svg.contains(">2</text>"));
        assert!(!svg.contains(">1</text>"));
    }

    #[test]
    fn scree_guards() {
        assert!(scree_svg(&[], false).is_err());
        assert!(scree_svg(&[1.0], true).is_err());
        assert!(scree_svg(&[1.0], false).is_ok());
    }

    #[test]
    fn default_components() {
        assert_eq!(
            default_scatter_components(ProjectionMethod::Pca1, 3),
            (1, 2)
        );
        assert_eq!(
            default_scatter_components(ProjectionMethod::Pca2, 3),
            (0, 1)
        );
        assert_eq!(
            default_scatter_components(ProjectionMethod::FromQ, 1),
            (0, 0)
        );
    }

    #[test]
    fn scatter_dimension_guard() {
        let labels = PopulationLabels::from_sizes("pop", &[2]).unwrap();
        let coords = vec![(0.0, 0.0); 3];
        assert!(scatter_svg(&coords, Some(&labels), "x", "y").is_err());
    }
}
