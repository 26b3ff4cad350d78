//! Sampled grids as CSV and 2-D deformation figures as SVG.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::geom::Vector;
use crate::maps::{lattice_in_box, Bounds, SmoothMap};

/// One grid row per lattice point: inputs, outputs, Jacobian determinant.
/// Points where the map fails get `NaN` outputs.
pub fn grid_csv(map: &SmoothMap, bounds: &Bounds, per_axis: usize) -> String {
    let n = map.dim;
    let pts = lattice_in_box(&bounds.0, &bounds.1, per_axis);
    let rows: Vec<String> = pts
        .par_iter()
        .map(|x| {
            let (y, det) = match map.eval_jac(x) {
                Ok((y, j)) => (y, j.determinant()),
                Err(_) => (Vector::from(vec![f64::NAN; n]), f64::NAN),
            };
            let mut row = String::new();
            for v in x.iter().chain(y.iter()) {
                write!(row, "{v:e},").unwrap();
            }
            write!(row, "{det:e}").unwrap();
            row
        })
        .collect();
    let mut out = String::new();
    let header: Vec<String> = (0..n)
        .map(|i| format!("x{i}"))
        .chain((0..n).map(|i| format!("y{i}")))
        .chain(std::iter::once("det_j".to_string()))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

/// A closed or open curve drawn in the figure.
#[derive(Debug, Clone)]
pub struct Curve {
    pub points: Vec<Vector>,
    pub class: &'static str,
}

pub struct Figure<'a> {
    pub map: &'a SmoothMap,
    pub bounds: Bounds,
    pub lines: usize,
    pub curves: Vec<Curve>,
}

const SIZE: f64 = 800.0;

impl Figure<'_> {
    fn to_px(&self, p: &Vector) -> (f64, f64) {
        let (lo, hi) = &self.bounds;
        let s = SIZE / (hi[0] - lo[0]).max(hi[1] - lo[1]);
        ((p[0] - lo[0]) * s, SIZE - (p[1] - lo[1]) * s)
    }

    fn polyline(&self, out: &mut String, pts: &[Vector], class: &str) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|p| p.is_finite())
            .map(|p| {
                let (x, y) = self.to_px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        if coords.len() > 1 {
            writeln!(
                out,
                r#"<polyline class="{class}" points="{}"/>"#,
                coords.join(" ")
            )
            .unwrap();
        }
    }

    /// Deformed coordinate grid, then the extra curves on top.
    pub fn to_svg(&self) -> String {
        let (lo, hi) = &self.bounds;
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        )
        .unwrap();
        out.push_str(
            "<style>polyline{fill:none}.grid{stroke:#888;stroke-width:0.6}.before{stroke:#1f77b4;stroke-width:1.5;stroke-dasharray:4 3}.after{stroke:#d62728;stroke-width:1.5}.support{stroke:#2ca02c;stroke-width:1.2;stroke-dasharray:2 2}</style>\n",
        );
        let steps = 200;
        let lines = self.lines.max(2);
        for axis in 0..2 {
            for k in 0..=lines {
                let t = k as f64 / lines as f64;
                let pts: Vec<Vector> = (0..=steps)
                    .map(|j| {
                        let s = j as f64 / steps as f64;
                        let (a, b) = if axis == 0 { (s, t) } else { (t, s) };
                        Vector::from([lo[0] + a * (hi[0] - lo[0]), lo[1] + b * (hi[1] - lo[1])])
                    })
                    .map(|p| {
                        self.map
                            .eval(&p)
                            .unwrap_or_else(|_| Vector::from([f64::NAN, f64::NAN]))
                    })
                    .collect();
                self.polyline(&mut out, &pts, "grid");
            }
        }
        for c in &self.curves {
            self.polyline(&mut out, &c.points, c.class);
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Closed curve `center + radius·(cos t, sin t)` pushed through `map`.
pub fn circle_image(map: Option<&SmoothMap>, center: &Vector, radius: f64) -> Vec<Vector> {
    (0..=256)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 256.0;
            let p = Vector::from([center[0] + radius * t.cos(), center[1] + radius * t.sin()]);
            match map {
                Some(m) => m
                    .eval(&p)
                    .unwrap_or_else(|_| Vector::from([f64::NAN, f64::NAN])),
                None => p,
            }
        })
        .collect()
}

pub fn rectangle(lo: &Vector, hi: &Vector) -> Vec<Vector> {
    vec![
        Vector::from([lo[0], lo[1]]),
        Vector::from([hi[0], lo[1]]),
        Vector::from([hi[0], hi[1]]),
        Vector::from([lo[0], hi[1]]),
        Vector::from([lo[0], lo[1]]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_one_row_per_lattice_point() {
        let id = SmoothMap::identity(2);
        let csv = grid_csv(
            &id,
            &(Vector::from([0.0, 0.0]), Vector::from([1.0, 1.0])),
            5,
        );
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x0,x1,y0,y1,det_j");
        assert_eq!(lines.len(), 26);
        assert!(lines[1].ends_with(",1e0"));
    }

    #[test]
    fn figure_is_nonempty_svg() {
        let id = SmoothMap::identity(2);
        let f = Figure {
            map: &id,
            bounds: (Vector::from([-1.0, -1.0]), Vector::from([1.0, 1.0])),
            lines: 4,
            curves: vec![Curve {
                points: circle_image(None, &Vector::zeros(2), 0.5),
                class: "before",
            }],
        };
        let svg = f.to_svg();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 11);
    }
}
