//! CSV and SVG output for traced curves, graphs and decompositions.

use std::fmt::Write;

use num_complex::Complex64;

use crate::annulus::Decomposition;
use crate::geom::BBox;
use crate::levelgraph::LevelGraph;
use crate::tracer::LevelCurveComponent;

/// One row per point: `component_id,arc_id,re,im`.
pub fn polylines_csv(comps: &[LevelCurveComponent]) -> String {
    let mut out = String::from("component_id,arc_id,re,im\n");
    for (c, comp) in comps.iter().enumerate() {
        for (a, arc) in comp.arcs.iter().enumerate() {
            for p in &arc.points {
                let _ = writeln!(out, "{c},{a},{:.17e},{:.17e}", p.re, p.im);
            }
        }
    }
    out
}

const FILLS: [&str; 6] = ["#cfe3f5", "#f6dcc2", "#d7ecd0", "#eadcf1", "#f3efc4", "#d9e7e5"];
const STROKES: [&str; 6] = ["#4a86c5", "#d08a3c", "#4f9a45", "#9a5fb5", "#b8a22a", "#3f8f86"];

/// Minimal SVG canvas in plane coordinates (y pointing up).
pub struct Svg {
    bbox: BBox,
    px: f64,
    body: String,
}

impl Svg {
    pub fn new(bbox: BBox) -> Self {
        let m = 0.05 * bbox.width().max(bbox.height()).max(1e-9);
        Self { bbox: bbox.expand(m), px: 800.0, body: String::new() }
    }

    fn unit(&self) -> f64 {
        self.bbox.width().max(self.bbox.height()) / self.px
    }

    fn points(&self, pts: &[Complex64]) -> String {
        let mut s = String::new();
        for (i, p) in pts.iter().enumerate() {
            let _ = write!(s, "{}{:.6} {:.6}", if i == 0 { "M" } else { " L" }, p.re, -p.im);
        }
        s
    }

    pub fn polyline(&mut self, pts: &[Complex64], stroke: &str, width: f64, dashed: bool) {
        if pts.len() < 2 {
            return;
        }
        let d = self.points(pts);
        let dash = if dashed { format!(" stroke-dasharray=\"{:.6}\"", 4.0 * self.unit()) } else { String::new() };
        let _ = writeln!(
            self.body,
            "<path d=\"{d}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{:.6}\"{dash}/>",
            width * self.unit()
        );
    }

    pub fn polygon(&mut self, pts: &[Complex64], fill: &str) {
        if pts.len() < 3 {
            return;
        }
        let d = self.points(pts);
        let _ = writeln!(self.body, "<path d=\"{d} Z\" fill=\"{fill}\" stroke=\"none\"/>");
    }

    pub fn dot(&mut self, z: Complex64, fill: &str) {
        let _ = writeln!(
            self.body,
            "<circle cx=\"{:.6}\" cy=\"{:.6}\" r=\"{:.6}\" fill=\"{fill}\"/>",
            z.re,
            -z.im,
            3.0 * self.unit()
        );
    }

    pub fn finish(self) -> String {
        let b = self.bbox;
        let h = self.px * b.height() / b.width().max(1e-300);
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"{:.6} {:.6} {:.6} {:.6}\">\n\
             <rect x=\"{:.6}\" y=\"{:.6}\" width=\"{:.6}\" height=\"{:.6}\" fill=\"white\"/>\n{}</svg>\n",
            self.px,
            h.max(1.0),
            b.min.re,
            -b.max.im,
            b.width(),
            b.height(),
            b.min.re,
            -b.max.im,
            b.width(),
            b.height(),
            self.body
        )
    }
}

fn bbox_of(comps: &[LevelCurveComponent]) -> BBox {
    comps.iter().fold(BBox::empty(), |b, c| b.union(&c.bbox()))
}

pub fn level_set_svg(comps: &[LevelCurveComponent]) -> String {
    let mut svg = Svg::new(bbox_of(comps));
    for c in comps {
        for arc in &c.arcs {
            svg.polyline(&arc.points, "#1f4e79", 1.5, false);
        }
        for v in &c.vertices {
            svg.dot(v.z, "#b03030");
        }
    }
    svg.finish()
}

/// Bounded faces shaded, edges on top, vertices as dots.
pub fn graph_svg(g: &LevelGraph) -> String {
    let mut svg = Svg::new(g.bbox());
    for (k, face) in g.bounded_faces().enumerate() {
        svg.polygon(face.ring(), FILLS[k % FILLS.len()]);
    }
    for p in g.polylines() {
        svg.polyline(p, "#1f4e79", 1.5, false);
    }
    for v in &g.vertices {
        svg.dot(v.z, "#b03030");
    }
    svg.finish()
}

/// Critical set and boundary in solid lines, one middle level curve per region dashed.
pub fn decomposition_svg(d: &Decomposition) -> String {
    let mut bbox = BBox::empty();
    for m in &d.members {
        if let Some(c) = &m.component {
            bbox = bbox.union(&c.bbox());
        }
    }
    let mut svg = Svg::new(bbox);
    for (k, r) in d.regions.iter().enumerate() {
        if let Some(c) = &r.mid_curve {
            for arc in &c.arcs {
                svg.polyline(&arc.points, STROKES[k % STROKES.len()], 1.0, true);
            }
        }
    }
    for m in &d.members {
        match (&m.component, m.point) {
            (Some(c), _) => {
                for arc in &c.arcs {
                    svg.polyline(&arc.points, "#1f4e79", 1.5, false);
                }
            }
            (None, Some(p)) => svg.dot(p, if m.level == 0.0 { "#2a7a2a" } else { "#b03030" }),
            _ => {}
        }
    }
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::parse_function;
    use crate::levelgraph::build_graph;
    use crate::tracer::{trace_level_set, TraceOptions};
    use crate::DomainSpec;

    #[test]
    fn csv_rows() {
        let f = parse_function("poly:1,0").unwrap().build().unwrap();
        let comps = trace_level_set(&f, 2.0, DomainSpec::WholePlane, TraceOptions::default()).unwrap();
        let csv = polylines_csv(&comps);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "component_id,arc_id,re,im");
        assert_eq!(rows.len(), 1 + comps[0].arcs[0].points.len());
        let cols: Vec<f64> = rows[1].split(',').skip(2).map(|c| c.parse().unwrap()).collect();
        assert!((Complex64::new(cols[0], cols[1]).norm() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn graph_svg_shades_each_bounded_face() {
        let f = parse_function("poly:1,0,0,0,0,-1").unwrap().build().unwrap();
        let comps = trace_level_set(&f, 1.0, DomainSpec::WholePlane, TraceOptions::default()).unwrap();
        let g = build_graph(&comps[0]).unwrap();
        let svg = graph_svg(&g);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches(" Z\" fill=").count(), 5);
        assert_eq!(svg.matches("<circle").count(), 1);
    }
}
