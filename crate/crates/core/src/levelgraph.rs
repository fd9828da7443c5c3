//! Planar-graph structure of a traced level curve.
//!
//! Vertices are the critical points on the curve, edges are the traced arcs,
//! and faces come from walking the rotation system. A component without
//! vertices is a single closed edge with two faces.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::funcspace::{RationalFn, Root};
use crate::geom::{self, BBox, SegmentIndex};
use crate::tracer::{LevelCurveComponent, Vertex};
use crate::{DomainSpec, Error, Result, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfEdgeRef {
    pub edge: usize,
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphVertex {
    pub id: usize,
    pub z: Complex64,
    pub mult: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub id: usize,
    pub v_from: Option<usize>,
    pub v_to: Option<usize>,
    pub closed: bool,
    pub polyline_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub id: usize,
    pub bounded: bool,
    pub edge_cycle: Vec<HalfEdgeRef>,
    pub rep: Complex64,
    pub signed_area: f64,
    #[serde(skip)]
    ring: Vec<Complex64>,
}

impl Face {
    /// The boundary walk as a closed ring of points.
    pub fn ring(&self) -> &[Complex64] {
        &self.ring
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelGraph {
    pub level: f64,
    pub vertices: Vec<GraphVertex>,
    pub edges: Vec<GraphEdge>,
    pub faces: Vec<Face>,
    #[serde(skip)]
    polylines: Vec<Vec<Complex64>>,
    #[serde(skip)]
    index: Option<SegmentIndex>,
    #[serde(skip)]
    segment_edge: Vec<usize>,
    #[serde(skip)]
    max_step: f64,
    #[serde(skip)]
    sides: Vec<(usize, usize)>,
}

fn half_points(polylines: &[Vec<Complex64>], h: HalfEdgeRef) -> Vec<Complex64> {
    let mut p = polylines[h.edge].clone();
    if h.reversed {
        p.reverse();
    }
    p
}

/// Direction in which a half-edge leaves its tail vertex.
fn leaving_angle(polylines: &[Vec<Complex64>], h: HalfEdgeRef) -> f64 {
    let p = &polylines[h.edge];
    let n = p.len();
    let d = if h.reversed { p[n - 2] - p[n - 1] } else { p[1] - p[0] };
    d.arg()
}

pub fn build_graph(comp: &LevelCurveComponent) -> Result<LevelGraph> {
    build_graph_with(comp, &Tolerances::default())
}

pub fn build_graph_with(comp: &LevelCurveComponent, tol: &Tolerances) -> Result<LevelGraph> {
    let vertices: Vec<GraphVertex> = comp
        .vertices
        .iter()
        .enumerate()
        .map(|(id, &Vertex { z, mult })| GraphVertex { id, z, mult })
        .collect();
    let polylines: Vec<Vec<Complex64>> = comp.arcs.iter().map(|a| a.points.clone()).collect();
    if polylines.iter().any(|p| p.len() < 2) {
        return Err(Error::Topology("arc with fewer than two points".into()));
    }
    let edges: Vec<GraphEdge> = comp
        .arcs
        .iter()
        .enumerate()
        .map(|(id, a)| GraphEdge {
            id,
            v_from: a.start_vertex,
            v_to: a.end_vertex,
            closed: a.closed,
            polyline_id: id,
        })
        .collect();

    let faces = if vertices.is_empty() {
        if edges.len() != 1 || !edges[0].closed {
            return Err(Error::Topology(format!(
                "component without vertices has {} arcs",
                edges.len()
            )));
        }
        let area = geom::signed_area(&polylines[0]);
        let inner = HalfEdgeRef { edge: 0, reversed: area < 0.0 };
        let outer = HalfEdgeRef { edge: 0, reversed: area >= 0.0 };
        vec![make_face(0, &polylines, vec![inner]), make_face(1, &polylines, vec![outer])]
    } else {
        if edges.iter().any(|e| e.v_from.is_none() || e.v_to.is_none()) {
            return Err(Error::Topology("open arc without vertex endpoints".into()));
        }
        let rotation = rotation_system(&vertices, &edges, &polylines, tol.angle)?;
        walk_faces(&edges, &polylines, &rotation)?
    };

    let index = SegmentIndex::from_polylines(polylines.iter().map(Vec::as_slice));
    let segment_edge = polylines
        .iter()
        .enumerate()
        .flat_map(|(e, p)| std::iter::repeat_n(e, p.len().saturating_sub(1).max(1)))
        .collect();
    let mut g = LevelGraph {
        level: comp.level,
        vertices,
        edges,
        faces,
        polylines,
        index: Some(index),
        segment_edge,
        max_step: comp.max_step(),
        sides: Vec::new(),
    };
    let unbounded: Vec<usize> = g.faces.iter().filter(|f| f.signed_area < 0.0).map(|f| f.id).collect();
    if unbounded.len() != 1 {
        return Err(Error::Topology(format!(
            "{} faces with negative orientation, expected exactly one",
            unbounded.len()
        )));
    }
    for f in &mut g.faces {
        f.bounded = f.signed_area > 0.0;
    }
    g.sides = g.edge_faces();
    for k in 0..g.faces.len() {
        let rep = g.find_representative(k, tol.trace)?;
        g.faces[k].rep = rep;
    }
    g.check_invariants()?;
    Ok(g)
}

fn make_face(id: usize, polylines: &[Vec<Complex64>], cycle: Vec<HalfEdgeRef>) -> Face {
    let mut ring = Vec::new();
    for &h in &cycle {
        let p = half_points(polylines, h);
        ring.extend_from_slice(&p[..p.len() - 1]);
    }
    let signed_area = geom::signed_area(&ring);
    Face {
        id,
        bounded: signed_area > 0.0,
        edge_cycle: cycle,
        rep: Complex64::new(f64::NAN, f64::NAN),
        signed_area,
        ring,
    }
}

/// Outgoing half-edges at each vertex, sorted counterclockwise.
fn rotation_system(
    vertices: &[GraphVertex],
    edges: &[GraphEdge],
    polylines: &[Vec<Complex64>],
    angle_tol: f64,
) -> Result<Vec<Vec<(f64, HalfEdgeRef)>>> {
    let mut rot: Vec<Vec<(f64, HalfEdgeRef)>> = vec![Vec::new(); vertices.len()];
    for e in edges {
        let fwd = HalfEdgeRef { edge: e.id, reversed: false };
        let bwd = HalfEdgeRef { edge: e.id, reversed: true };
        rot[e.v_from.unwrap()].push((leaving_angle(polylines, fwd), fwd));
        rot[e.v_to.unwrap()].push((leaving_angle(polylines, bwd), bwd));
    }
    for (v, out) in rot.iter_mut().enumerate() {
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = out.len();
        for i in 0..n {
            let next = if i + 1 < n { out[i + 1].0 } else { out[0].0 + 2.0 * PI };
            let gap = next - out[i].0;
            if n > 1 && gap < angle_tol {
                return Err(Error::RotationAmbiguity { vertex: vertices[v].z, gap });
            }
        }
    }
    Ok(rot)
}

fn walk_faces(
    edges: &[GraphEdge],
    polylines: &[Vec<Complex64>],
    rot: &[Vec<(f64, HalfEdgeRef)>],
) -> Result<Vec<Face>> {
    let key = |h: HalfEdgeRef| 2 * h.edge + usize::from(h.reversed);
    let head = |h: HalfEdgeRef| {
        let e = &edges[h.edge];
        if h.reversed { e.v_from.unwrap() } else { e.v_to.unwrap() }
    };
    let mut pos = vec![(0usize, 0usize); 2 * edges.len()];
    for (v, out) in rot.iter().enumerate() {
        for (i, &(_, h)) in out.iter().enumerate() {
            pos[key(h)] = (v, i);
        }
    }
    let mut used = vec![false; 2 * edges.len()];
    let mut faces = Vec::new();
    for start in 0..2 * edges.len() {
        if used[start] {
            continue;
        }
        let mut h = HalfEdgeRef { edge: start / 2, reversed: start % 2 == 1 };
        let mut cycle = Vec::new();
        loop {
            if used[key(h)] {
                if key(h) == start {
                    break;
                }
                return Err(Error::Topology("face walk revisited a half-edge".into()));
            }
            used[key(h)] = true;
            cycle.push(h);
            let v = head(h);
            let twin = HalfEdgeRef { edge: h.edge, reversed: !h.reversed };
            let (tv, i) = pos[key(twin)];
            debug_assert_eq!(tv, v);
            let out = &rot[v];
            h = out[(i + out.len() - 1) % out.len()].1;
        }
        faces.push(make_face(faces.len(), polylines, cycle));
    }
    Ok(faces)
}

impl LevelGraph {
    pub fn polylines(&self) -> &[Vec<Complex64>] {
        &self.polylines
    }

    pub fn bbox(&self) -> BBox {
        let mut b = BBox::empty();
        for p in self.polylines.iter().flatten() {
            b.add(*p);
        }
        b
    }

    fn index(&mut self) -> &SegmentIndex {
        let lines = &self.polylines;
        self.index.get_or_insert_with(|| SegmentIndex::from_polylines(lines.iter().map(Vec::as_slice)))
    }

    /// Distance from `z` to the curve.
    pub fn distance(&self, z: Complex64) -> f64 {
        match &self.index {
            Some(idx) => idx.distance(z),
            None => self
                .polylines
                .iter()
                .map(|p| geom::dist_point_polyline(z, p))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn unbounded_face(&self) -> usize {
        self.faces.iter().find(|f| !f.bounded).map(|f| f.id).unwrap_or(0)
    }

    pub fn bounded_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| f.bounded)
    }

    /// Face containing `z`, without the on-curve check.
    fn locate(&self, z: Complex64) -> usize {
        self.faces
            .iter()
            .filter(|f| f.bounded)
            .find(|f| geom::winding_number(z, &f.ring) != 0)
            .map(|f| f.id)
            .unwrap_or_else(|| self.unbounded_face())
    }

    /// The face whose region contains `z`.
    pub fn face_of_point(&self, z: Complex64, trace_tol: f64) -> Result<usize> {
        let d = self.distance(z);
        if !(d > trace_tol) {
            return Err(Error::PointOnCurve { at: z, distance: d });
        }
        Ok(self.locate(z))
    }

    /// Face containing `z`, given `modulus = |f(z)|`.
    ///
    /// Close to the curve the polyline may sit on the wrong side of `z`, so
    /// there the face is read off the nearest edge: the sublevel side lies to
    /// the left of an arc traversed with increasing `arg f`.
    pub fn face_of_point_with_modulus(&self, z: Complex64, modulus: f64, trace_tol: f64) -> Result<usize> {
        let nearest = self.index.as_ref().and_then(|idx| idx.nearest(z));
        let Some((seg, d)) = nearest else {
            return self.face_of_point(z, trace_tol);
        };
        if d > 0.1 * self.max_step {
            return self.face_of_point(z, trace_tol);
        }
        let gap = (modulus - self.level).abs() / self.level.max(1.0);
        if !(gap > trace_tol) {
            return Err(Error::PointOnCurve { at: z, distance: d });
        }
        let e = self.segment_edge[seg];
        let (left, right) = self.sides[e];
        Ok(if modulus < self.level { left } else { right })
    }

    /// Does `z` lie in some bounded face?
    pub fn encloses(&self, z: Complex64, trace_tol: f64) -> Result<bool> {
        Ok(self.faces[self.face_of_point(z, trace_tol)?].bounded)
    }

    fn find_representative(&mut self, k: usize, trace_tol: f64) -> Result<Complex64> {
        self.index();
        let bb = self.bbox();
        if !self.faces[k].bounded {
            let p = bb.max + Complex64::new(bb.diameter().max(1.0), 0.5 * bb.diameter().max(1.0));
            return Ok(p);
        }
        let ring = self.faces[k].ring.clone();
        let fb = BBox::of(ring.iter());
        let mut best: Option<(Complex64, f64)> = None;
        for n in [24usize, 96, 384] {
            for j in 0..n {
                for i in 0..n {
                    let p = Complex64::new(
                        fb.min.re + fb.width() * (i as f64 + 0.5) / n as f64,
                        fb.min.im + fb.height() * (j as f64 + 0.5) / n as f64,
                    );
                    if geom::winding_number(p, &ring) == 0 {
                        continue;
                    }
                    let d = self.distance(p);
                    if best.is_none_or(|(_, bd)| d > bd) {
                        best = Some((p, d));
                    }
                }
            }
            if let Some((p, d)) = best {
                if d > 10.0 * trace_tol && self.locate(p) == k {
                    return Ok(p);
                }
            }
        }
        Err(Error::Topology(format!("no interior point found for face {k}")))
    }

    /// (bounded, total) face counts, checked against `sum mult + 1` bounded faces.
    pub fn face_count(&self) -> Result<(usize, usize)> {
        let bounded = self.bounded_faces().count();
        let total = self.faces.len();
        let expected: usize = self.vertices.iter().map(|v| v.mult).sum::<usize>() + 1;
        if bounded != expected || total != expected + 1 {
            return Err(Error::Topology(format!(
                "{bounded} bounded / {total} total faces, expected {expected} / {}",
                expected + 1
            )));
        }
        Ok((bounded, total))
    }

    /// Number of half-edge ends at each vertex.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for e in &self.edges {
            if let Some(a) = e.v_from {
                deg[a] += 1;
            }
            if let Some(b) = e.v_to {
                deg[b] += 1;
            }
        }
        deg
    }

    /// The two faces on either side of each edge (left of forward, left of reversed).
    pub fn edge_faces(&self) -> Vec<(usize, usize)> {
        if !self.sides.is_empty() {
            return self.sides.clone();
        }
        let mut side = vec![(usize::MAX, usize::MAX); self.edges.len()];
        for f in &self.faces {
            for h in &f.edge_cycle {
                if h.reversed {
                    side[h.edge].1 = f.id;
                } else {
                    side[h.edge].0 = f.id;
                }
            }
        }
        side
    }

    /// Degree law, two-distinct-faces law, face count and Euler's formula.
    pub fn check_invariants(&self) -> Result<()> {
        for (v, d) in self.vertices.iter().zip(self.degrees()) {
            if d != 2 * (v.mult + 1) {
                return Err(Error::Topology(format!(
                    "vertex {} has degree {d}, expected {}",
                    v.z,
                    2 * (v.mult + 1)
                )));
            }
            if d < 4 || d % 2 != 0 {
                return Err(Error::Topology(format!("vertex {} has inadmissible degree {d}", v.z)));
            }
        }
        for (e, (a, b)) in self.edge_faces().into_iter().enumerate() {
            if a == usize::MAX || b == usize::MAX || a == b {
                return Err(Error::Topology(format!("edge {e} does not separate two distinct faces")));
            }
        }
        if self.faces.iter().filter(|f| !f.bounded).count() != 1 {
            return Err(Error::Topology("expected exactly one unbounded face".into()));
        }
        self.face_count()?;
        let (v, e, f) = (self.vertices.len() as i64, self.edges.len() as i64, self.faces.len() as i64);
        if !self.vertices.is_empty() && f != e - v + 2 {
            return Err(Error::Topology(format!("Euler: F={f}, E={e}, V={v}")));
        }
        if self.vertices.is_empty() && (e, f) != (1, 2) {
            return Err(Error::Topology(format!("closed curve with E={e}, F={f}")));
        }
        Ok(())
    }

    /// Zeros and poles of `f` in the domain, grouped by face.
    pub fn zeros_per_face(&self, f: &RationalFn, domain: &DomainSpec, trace_tol: f64) -> Result<BTreeMap<usize, FacePoints>> {
        let mut map: BTreeMap<usize, FacePoints> = BTreeMap::new();
        let (zeros, poles) = f.zeros_and_poles(domain);
        for r in zeros {
            map.entry(self.face_of_point(r.z, trace_tol)?).or_default().zeros.push(r);
        }
        for r in poles {
            map.entry(self.face_of_point(r.z, trace_tol)?).or_default().poles.push(r);
        }
        for face in self.bounded_faces() {
            if map.get(&face.id).is_none_or(|p| p.zeros.is_empty() && p.poles.is_empty()) {
                return Err(Error::EmptyBoundedFace { face: face.id });
            }
        }
        Ok(map)
    }

    /// JSON in the `{level, vertices, edges, faces}` layout.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        json!({
            "level": self.level,
            "vertices": self.vertices.iter().map(|v| json!({
                "id": v.id, "re": v.z.re, "im": v.z.im, "mult": v.mult,
            })).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| json!({
                "id": e.id, "v_from": e.v_from, "v_to": e.v_to,
                "closed": e.closed, "polyline_id": e.polyline_id,
            })).collect::<Vec<_>>(),
            "faces": self.faces.iter().map(|f| json!({
                "id": f.id, "bounded": f.bounded, "edge_cycle": f.edge_cycle,
                "rep_re": f.rep.re, "rep_im": f.rep.im,
            })).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FacePoints {
    pub zeros: Vec<Root>,
    pub poles: Vec<Root>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::parse_function;
    use crate::tracer::{trace_level_set, TraceOptions};

    fn graphs(s: &str, eps: f64) -> (RationalFn, Vec<LevelGraph>) {
        let f = parse_function(s).unwrap().build().unwrap();
        let comps = trace_level_set(&f, eps, DomainSpec::WholePlane, TraceOptions::default()).unwrap();
        let g = comps.iter().map(|c| build_graph(c).unwrap()).collect();
        (f, g)
    }

    #[test]
    fn five_petals() {
        let (f, g) = graphs("poly:1,0,0,0,0,-1", 1.0);
        assert_eq!(g.len(), 1);
        let g = &g[0];
        assert_eq!((g.vertices.len(), g.edges.len(), g.faces.len()), (1, 5, 6));
        assert_eq!(g.face_count().unwrap(), (5, 6));
        assert_eq!(g.degrees(), vec![10]);
        let per = g.zeros_per_face(&f, &DomainSpec::WholePlane, 1e-9).unwrap();
        assert_eq!(per.len(), 5);
        assert!(per.values().all(|p| p.zeros.len() == 1));
    }

    #[test]
    fn circle_convention() {
        let (_, g) = graphs("poly:1,0,0", 4.0);
        assert_eq!(g[0].face_count().unwrap(), (1, 2));
        assert!(g[0].faces[g[0].face_of_point(Complex64::new(0.0, 0.0), 1e-9).unwrap()].bounded);
        assert!(!g[0].faces[g[0].face_of_point(Complex64::new(5.0, 1.0), 1e-9).unwrap()].bounded);
        let on = g[0].polylines()[0][7];
        assert!(g[0].face_of_point(on, 1e-9).is_err());
    }

    #[test]
    fn lemniscate_lobes() {
        let (_, g) = graphs("poly:1,0,-1", 1.0);
        let g = &g[0];
        assert_eq!(g.face_count().unwrap(), (2, 3));
        let a = g.face_of_point(Complex64::new(1.0, 0.0), 1e-9).unwrap();
        let b = g.face_of_point(Complex64::new(-1.0, 0.0), 1e-9).unwrap();
        assert_ne!(a, b);
        assert!(g.faces[a].bounded && g.faces[b].bounded);
        let json = g.to_json();
        assert_eq!(json["faces"].as_array().unwrap().len(), 3);
    }
}
