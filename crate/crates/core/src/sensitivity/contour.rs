use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adjusted_bounds, SensitivityElements, Scenario};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourSide {
    Lower,
    Upper,
}

/// Bound values over a `cf_y × cf_d` grid; `values[i][j]` belongs to
/// `cf_y[i]`, `cf_d[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub cf_y: Vec<f64>,
    pub cf_d: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub side: ContourSide,
    pub level: Option<f64>,
    pub rho: f64,
    pub theta: f64,
}

fn axis(max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| max * i as f64 / (n - 1) as f64).collect()
}

/// Evaluates `θ−`/`θ+` (or `ℓ−`/`u+` when `level` is given) on an evenly
/// spaced grid from 0 to the given maxima inclusive.
pub fn contour_grid(
    el: &SensitivityElements,
    cf_y_max: f64,
    cf_d_max: f64,
    n_grid: usize,
    side: ContourSide,
    level: Option<f64>,
    rho: f64,
) -> Result<ContourGrid> {
    if n_grid < 2 {
        return Err(Error::InvalidArgument(format!("grid needs at least 2 points per axis, got {n_grid}")));
    }
    for (name, m) in [("cf_y", cf_y_max), ("cf_d", cf_d_max)] {
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} axis maximum must lie in (0, 1), got {m}")));
        }
    }
    let lvl = level.unwrap_or(0.95);
    let cf_y = axis(cf_y_max, n_grid);
    let cf_d = axis(cf_d_max, n_grid);
    let values = cf_y
        .par_iter()
        .map(|&cy| {
            cf_d.iter()
                .map(|&cd| {
                    let sc = Scenario::new(cy, cd, rho, "")?;
                    let b = adjusted_bounds(el, &sc, lvl)?;
                    Ok(match (side, level.is_some()) {
                        (ContourSide::Lower, false) => b.theta_minus,
                        (ContourSide::Upper, false) => b.theta_plus,
                        (ContourSide::Lower, true) => b.ell_minus,
                        (ContourSide::Upper, true) => b.u_plus,
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContourGrid { cf_y, cf_d, values, side, level, rho, theta: el.theta })
}

/// Grid CSV: header row of `cf_d` values, first column `cf_y`.
pub fn write_contour_csv<W: Write>(grid: &ContourGrid, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["cf_y\\cf_d".to_string()];
    header.extend(grid.cf_d.iter().map(|v| v.to_string()));
    out.write_record(&header)?;
    for (cy, row) in grid.cf_y.iter().zip(&grid.values) {
        let mut rec = vec![cy.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Line segments of the level set `values = level` by marching squares, in
/// grid coordinates (column, row).
fn marching_squares(values: &[Vec<f64>], level: f64) -> Vec<[(f64, f64); 2]> {
    let mut segs = Vec::new();
    let rows = values.len();
    let cols = values[0].len();
    let lerp = |a: f64, b: f64| if (b - a).abs() < f64::EPSILON { 0.5 } else { (level - a) / (b - a) };
    for i in 0..rows - 1 {
        for j in 0..cols - 1 {
            // corners: bottom-left, bottom-right, top-right, top-left
            let v = [values[i][j], values[i][j + 1], values[i + 1][j + 1], values[i + 1][j]];
            let p = [(j as f64, i as f64), (j as f64 + 1.0, i as f64), (j as f64 + 1.0, i as f64 + 1.0), (j as f64, i as f64 + 1.0)];
            let mut crossings = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if (v[a] < level) != (v[b] < level) {
                    let t = lerp(v[a], v[b]);
                    crossings.push((p[a].0 + t * (p[b].0 - p[a].0), p[a].1 + t * (p[b].1 - p[a].1)));
                }
            }
            match crossings.len() {
                2 => segs.push([crossings[0], crossings[1]]),
                4 => {
                    segs.push([crossings[0], crossings[1]]);
                    segs.push([crossings[2], crossings[3]]);
                }
                _ => {}
            }
        }
    }
    segs
}

/// Minimal SVG rendering with `n_levels` evenly spaced contour lines.
pub fn write_contour_svg<W: Write>(grid: &ContourGrid, n_levels: usize, mut w: W) -> Result<()> {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    let rows = grid.cf_y.len();
    let cols = grid.cf_d.len();
    let sx = SIZE / (cols - 1) as f64;
    let sy = SIZE / (rows - 1) as f64;
    let lo = grid.values.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut svg = String::new();
    let total = SIZE + 2.0 * PAD;
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}">"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let to_px = |(c, r): (f64, f64)| (PAD + c * sx, PAD + SIZE - r * sy);
    for k in 1..=n_levels {
        let level = lo + (hi - lo) * k as f64 / (n_levels + 1) as f64;
        let mut path = String::new();
        for [a, b] in marching_squares(&grid.values, level) {
            let (x1, y1) = to_px(a);
            let (x2, y2) = to_px(b);
            let _ = write!(path, "M{x1:.2},{y1:.2}L{x2:.2},{y2:.2}");
        }
        if !path.is_empty() {
            let _ = writeln!(svg, r#"<path d="{path}" fill="none" stroke="steelblue"><title>{level:.4}</title></path>"#);
        }
    }
    if (lo..=hi).contains(&0.0) && lo < hi {
        let mut path = String::new();
        for [a, b] in marching_squares(&grid.values, 0.0) {
            let (x1, y1) = to_px(a);
            let (x2, y2) = to_px(b);
            let _ = write!(path, "M{x1:.2},{y1:.2}L{x2:.2},{y2:.2}");
        }
        let _ = writeln!(svg, r#"<path d="{path}" fill="none" stroke="crimson" stroke-width="2"/>"#);
    }
    let cd_max = grid.cf_d[cols - 1];
    let cy_max = grid.cf_y[rows - 1];
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">cf_d (0 to {cd_max})</text>"#,
        PAD + SIZE / 2.0,
        total - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">cf_y (0 to {cy_max})</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    svg.push_str("</svg>\n");
    w.write_all(svg.as_bytes())?;
    Ok(())
}
