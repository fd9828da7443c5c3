//! The nesting order on level curves and the critical set `C`.
//!
//! `a < b` when `a` lies in a bounded face of `b`. The critical set holds the
//! level curves through critical points (other than zeros and poles), the
//! zeros and poles themselves as degenerate point members, and bounded
//! boundary components of the domain.

use num_complex::Complex64;
use serde::Serialize;

use crate::levelgraph::{build_graph_with, LevelGraph};
use crate::metrics::ser_dist;
use crate::tracer::{LevelCurveComponent, TraceOptions, Tracer};
use crate::{DomainSpec, Error, RationalFn, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    LevelCurve,
    /// A zero or pole, as a degenerate curve at level 0 or infinity.
    Point,
    BoundaryComponent,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveRef {
    pub kind: CurveKind,
    #[serde(serialize_with = "ser_dist")]
    pub level: f64,
    pub point: Option<Complex64>,
    /// Multiplicity for point members.
    pub mult: usize,
    #[serde(skip)]
    pub component: Option<LevelCurveComponent>,
    #[serde(skip)]
    graph: Option<LevelGraph>,
}

const VOTES: usize = 8;

impl CurveRef {
    pub fn level_curve(comp: LevelCurveComponent, opts: &TraceOptions) -> Result<Self> {
        let graph = build_graph_with(&comp, &opts.tol)?;
        Ok(Self {
            kind: CurveKind::LevelCurve,
            level: comp.level,
            point: None,
            mult: 0,
            component: Some(comp),
            graph: Some(graph),
        })
    }

    pub fn boundary(comp: LevelCurveComponent, opts: &TraceOptions) -> Result<Self> {
        Ok(Self { kind: CurveKind::BoundaryComponent, ..Self::level_curve(comp, opts)? })
    }

    pub fn zero(z: Complex64, mult: usize) -> Self {
        Self { kind: CurveKind::Point, level: 0.0, point: Some(z), mult, component: None, graph: None }
    }

    pub fn pole(z: Complex64, mult: usize) -> Self {
        Self { level: f64::INFINITY, ..Self::zero(z, mult) }
    }

    pub fn graph(&self) -> Option<&LevelGraph> {
        self.graph.as_ref()
    }

    pub fn is_point(&self) -> bool {
        self.kind == CurveKind::Point
    }

    pub fn is_critical(&self) -> bool {
        self.component.as_ref().is_some_and(|c| !c.vertices.is_empty())
    }

    /// A representative point followed by spread samples.
    pub fn sample_points(&self) -> Vec<Complex64> {
        match (&self.point, &self.component) {
            (Some(z), _) => vec![*z],
            (None, Some(c)) => c.sample_points(VOTES + 1),
            _ => Vec::new(),
        }
    }

    /// Distance from `z` to this member.
    pub fn distance(&self, z: Complex64) -> f64 {
        match (&self.point, &self.graph) {
            (Some(p), _) => (z - p).norm(),
            (None, Some(g)) => g.distance(z),
            _ => f64::INFINITY,
        }
    }

    pub fn distance_to(&self, other: &CurveRef) -> f64 {
        match (&self.component, &other.component) {
            (Some(a), Some(b)) => a.distance_to(b),
            (Some(_), None) => self.distance(other.point.unwrap()),
            (None, _) => other.distance(self.point.unwrap()),
        }
    }

    /// The face of this curve containing `z`; `None` for point members.
    pub fn face_of(&self, f: &RationalFn, z: Complex64, trace_tol: f64) -> Result<Option<usize>> {
        match &self.graph {
            Some(g) => g.face_of_point_with_modulus(z, f.modulus(z), trace_tol).map(Some),
            None => Ok(None),
        }
    }

    pub fn face_is_bounded(&self, face: usize) -> bool {
        self.graph.as_ref().is_some_and(|g| g.faces[face].bounded)
    }

    /// The face of this curve containing all of `pts`, with a consistency vote.
    pub fn face_of_set(&self, f: &RationalFn, pts: &[Complex64], trace_tol: f64) -> Result<Option<usize>> {
        let mut face = None;
        for (k, &p) in pts.iter().enumerate() {
            let f = self.face_of(f, p, trace_tol)?;
            if k == 0 {
                face = f;
            } else if f != face {
                return Err(Error::AmbiguousFace(format!(
                    "sample {p} lies in face {f:?}, representative in {face:?}"
                )));
            }
        }
        Ok(face)
    }

    fn same_as(&self, other: &CurveRef) -> bool {
        if self.kind != other.kind || self.level != other.level {
            return false;
        }
        match (&self.point, &other.point) {
            (Some(a), Some(b)) => a == b,
            _ => self.sample_points().first() == other.sample_points().first(),
        }
    }

    /// Short JSON-friendly description.
    pub fn summary(&self) -> serde_json::Value {
        use serde_json::json;
        let level = if self.level.is_infinite() { json!("inf") } else { json!(self.level) };
        match &self.component {
            None => json!({
                "kind": self.kind, "level": level,
                "re": self.point.map(|p| p.re), "im": self.point.map(|p| p.im), "mult": self.mult,
            }),
            Some(c) => json!({
                "kind": self.kind, "level": level,
                "vertices": c.vertices.iter().map(|v| json!({"re": v.z.re, "im": v.z.im, "mult": v.mult})).collect::<Vec<_>>(),
                "arcs": c.arcs.len(),
            }),
        }
    }
}

/// `a < b`: `a` lies in a bounded face of `b`.
pub fn precedes(f: &RationalFn, a: &CurveRef, b: &CurveRef, trace_tol: f64) -> Result<bool> {
    if a.same_as(b) {
        return Err(Error::Precondition("a curve is not compared with itself".into()));
    }
    if b.is_point() {
        return Ok(false);
    }
    let d = a.distance_to(b);
    if !(d > trace_tol) {
        return Err(Error::CurvesTooClose { distance: d });
    }
    let face = b.face_of_set(f, &a.sample_points(), trace_tol)?;
    Ok(face.is_some_and(|f| b.face_is_bounded(f)))
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalSet {
    pub members: Vec<CurveRef>,
}

/// Critical level curves, zeros and poles of `f` in the domain.
pub fn critical_level_curves(f: &RationalFn, domain: DomainSpec, opts: TraceOptions) -> Result<CriticalSet> {
    let mut curves: Vec<CurveRef> = Vec::new();
    let mut crit = f.proper_critical_points(&domain);
    crit.sort_by(|a, b| {
        f.modulus(a.z)
            .total_cmp(&f.modulus(b.z))
            .then(a.z.re.total_cmp(&b.z.re))
            .then(a.z.im.total_cmp(&b.z.im))
    });
    for c in crit {
        let on_traced = curves.iter().any(|m| {
            m.component.as_ref().is_some_and(|comp| comp.vertices.iter().any(|v| v.z == c.z))
        });
        if on_traced {
            continue;
        }
        let tracer = Tracer::new(f, f.modulus(c.z), domain, opts)?;
        let comp = tracer.trace_from_vertex(c.z)?;
        curves.push(CurveRef::level_curve(comp, &opts)?);
    }
    let (zeros, poles) = f.zeros_and_poles(&domain);
    curves.extend(zeros.iter().map(|r| CurveRef::zero(r.z, r.mult)));
    curves.extend(poles.iter().map(|r| CurveRef::pole(r.z, r.mult)));
    Ok(CriticalSet { members: curves })
}

impl CriticalSet {
    /// `rel[i][j]` is `members[i] < members[j]`.
    pub fn relation(&self, f: &RationalFn, trace_tol: f64) -> Result<Vec<Vec<bool>>> {
        let n = self.members.len();
        let mut rel = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    rel[i][j] = precedes(f, &self.members[i], &self.members[j], trace_tol)?;
                }
            }
        }
        Ok(rel)
    }

    /// Asymmetry and transitivity of the relation.
    pub fn check_partial_order(rel: &[Vec<bool>]) -> Result<()> {
        let n = rel.len();
        for i in 0..n {
            if rel[i][i] {
                return Err(Error::Topology(format!("member {i} precedes itself")));
            }
            for j in 0..n {
                if rel[i][j] && rel[j][i] {
                    return Err(Error::Topology(format!("members {i} and {j} precede each other")));
                }
                for k in 0..n {
                    if rel[i][j] && rel[j][k] && !rel[i][k] {
                        return Err(Error::Topology(format!("transitivity fails on {i} < {j} < {k}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Cover relations `(i, j)`: `i < j` with nothing strictly between.
    pub fn hasse(rel: &[Vec<bool>]) -> Vec<(usize, usize)> {
        let n = rel.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rel[i][j] && !(0..n).any(|k| rel[i][k] && rel[k][j]) {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    /// The unique member of `among` not below another member of `among`.
    pub fn unique_maximal_of(rel: &[Vec<bool>], among: &[usize]) -> Result<usize> {
        let maximal: Vec<usize> = among
            .iter()
            .copied()
            .filter(|&i| !among.iter().any(|&j| rel[i][j]))
            .collect();
        match maximal.as_slice() {
            [m] => Ok(*m),
            _ => Err(Error::MaximalNotUnique { count: maximal.len() }),
        }
    }

    /// Index of the unique maximal member.
    pub fn maximal(&self, rel: &[Vec<bool>]) -> Result<usize> {
        if self.members.is_empty() {
            return Err(Error::Precondition("critical set is empty".into()));
        }
        Self::unique_maximal_of(rel, &(0..self.members.len()).collect::<Vec<_>>())
    }

    /// Members lying in face `face` of member `x`.
    pub fn members_in_face(&self, f: &RationalFn, x: usize, face: usize, trace_tol: f64) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for (i, m) in self.members.iter().enumerate() {
            if i == x {
                continue;
            }
            let pts = m.sample_points();
            if self.members[x].face_of_set(f, &pts, trace_tol)? == Some(face) {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Unique maximal member inside every bounded face of every curve member.
    pub fn check_face_maximal(&self, f: &RationalFn, rel: &[Vec<bool>], trace_tol: f64) -> Result<Vec<(usize, usize, usize)>> {
        let mut out = Vec::new();
        for (x, m) in self.members.iter().enumerate() {
            let Some(g) = m.graph() else { continue };
            for face in g.bounded_faces() {
                let inside = self.members_in_face(f, x, face.id, trace_tol)?;
                if inside.is_empty() {
                    return Err(Error::EmptyBoundedFace { face: face.id });
                }
                out.push((x, face.id, Self::unique_maximal_of(rel, &inside)?));
            }
        }
        Ok(out)
    }
}

/// The unique maximal element of `C`.
pub fn maximal_component(f: &RationalFn, domain: DomainSpec, opts: TraceOptions) -> Result<CurveRef> {
    let c = critical_level_curves(f, domain, opts)?;
    let rel = c.relation(f, opts.tol.trace)?;
    let m = c.maximal(&rel)?;
    Ok(c.members[m].clone())
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    /// Index into the critical set.
    pub member: usize,
    pub face1: usize,
    pub face2: usize,
}

/// A critical curve having `l1` and `l2` in distinct bounded faces.
pub fn two_curve_critical_witness(
    f: &RationalFn,
    c: &CriticalSet,
    l1: &CurveRef,
    l2: &CurveRef,
    trace_tol: f64,
) -> Result<Witness> {
    if precedes(f, l1, l2, trace_tol)? || precedes(f, l2, l1, trace_tol)? {
        return Err(Error::Precondition("curves are nested, not mutually exterior".into()));
    }
    let (s1, s2) = (l1.sample_points(), l2.sample_points());
    for (k, m) in c.members.iter().enumerate() {
        if m.is_point() || m.same_as(l1) || m.same_as(l2) {
            continue;
        }
        if !(m.distance_to(l1) > trace_tol && m.distance_to(l2) > trace_tol) {
            continue;
        }
        let (Some(f1), Some(f2)) = (m.face_of_set(f, &s1, trace_tol)?, m.face_of_set(f, &s2, trace_tol)?) else {
            continue;
        };
        if f1 != f2 && m.face_is_bounded(f1) && m.face_is_bounded(f2) {
            return Ok(Witness { member: k, face1: f1, face2: f2 });
        }
    }
    Err(Error::WitnessNotFound)
}

#[derive(Debug, Clone, Serialize)]
pub struct Separation {
    pub curve: CurveRef,
    /// Whether `L` lies in a bounded face of the separating curve.
    pub l_bounded: bool,
    /// Whether `K` lies in a bounded face of the separating curve.
    pub k_bounded: bool,
}

/// A non-critical level curve with `l` and all of `k` in different faces.
pub fn separating_curve(
    f: &RationalFn,
    l: &CurveRef,
    k: &[Complex64],
    domain: DomainSpec,
    opts: TraceOptions,
) -> Result<Separation> {
    let tol = opts.tol.trace;
    if k.is_empty() {
        return Err(Error::Precondition("K is empty".into()));
    }
    if k.iter().any(|&p| !(l.distance(p) > tol)) {
        return Err(Error::Precondition("K meets L".into()));
    }
    if l.graph().is_some() {
        l.face_of_set(f, k, tol).map_err(|_| Error::Precondition("K is not in one face of L".into()))?;
    }
    let lpts: Vec<Complex64> = match (&l.point, &l.component) {
        (Some(z), _) => vec![*z],
        (None, Some(c)) => c.points().collect(),
        _ => Vec::new(),
    };
    let lsamples = l.sample_points();
    let crit: Vec<Complex64> = f.critical_points().iter().map(|r| r.z).collect();
    let scale = f.feature_scale();

    // Transversals from L toward each point of K, nearest first.
    let mut pairs: Vec<(f64, Complex64, Complex64)> = k
        .iter()
        .map(|&q| {
            let (d, p) = lpts
                .iter()
                .map(|&p| ((p - q).norm(), p))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap_or((f64::INFINITY, q));
            (d, p, q)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ts = [0.5, 0.25, 0.75, 0.125, 0.375, 0.625, 0.875, 0.0625, 0.9375, 0.03125, 0.96875];
    let mut tried = 0;
    for &(_, p, q) in &pairs {
        for &t in &ts {
            let z = p + (q - p) * t;
            let level = f.modulus(z);
            if !(level > 0.0 && level.is_finite()) || !domain.contains(z) {
                continue;
            }
            tried += 1;
            let Ok(tracer) = Tracer::new(f, level, domain, opts) else { continue };
            if !tracer.vertex_candidates().is_empty() {
                continue;
            }
            let Ok(comp) = tracer.trace_component(z) else { continue };
            let Ok(curve) = CurveRef::level_curve(comp, &opts) else { continue };
            let g = curve.graph().unwrap();
            if crit.iter().any(|&c| g.distance(c) <= 1e-5 * scale) {
                continue;
            }
            if l.distance_to(&curve) <= tol || k.iter().any(|&p| g.distance(p) <= tol) {
                continue;
            }
            let (Ok(Some(fl)), Ok(Some(fk))) = (curve.face_of_set(f, &lsamples, tol), curve.face_of_set(f, k, tol)) else {
                continue;
            };
            if fl != fk {
                return Ok(Separation {
                    l_bounded: curve.face_is_bounded(fl),
                    k_bounded: curve.face_is_bounded(fk),
                    curve,
                });
            }
        }
    }
    Err(Error::SeparationNotFound(format!("{tried} candidate levels tried")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::parse_function;

    fn fun(s: &str) -> RationalFn {
        parse_function(s).unwrap().build().unwrap()
    }

    #[test]
    fn five_petals_set() {
        let f = fun("poly:1,0,0,0,0,-1");
        let opts = TraceOptions::default();
        let c = critical_level_curves(&f, DomainSpec::WholePlane, opts).unwrap();
        assert_eq!(c.members.iter().filter(|m| !m.is_point()).count(), 1);
        assert_eq!(c.members.len(), 6);
        let rel = c.relation(&f, 1e-9).unwrap();
        CriticalSet::check_partial_order(&rel).unwrap();
        let m = c.maximal(&rel).unwrap();
        assert!((c.members[m].level - 1.0).abs() < 1e-12);
        assert_eq!(CriticalSet::hasse(&rel).len(), 5);
        assert_eq!(c.check_face_maximal(&f, &rel, 1e-9).unwrap().len(), 5);
    }

    #[test]
    fn power_has_only_the_zero() {
        let f = fun("poly:1,0,0,0");
        let c = critical_level_curves(&f, DomainSpec::WholePlane, TraceOptions::default()).unwrap();
        assert_eq!(c.members.len(), 1);
        assert!(c.members[0].is_point());
    }

    #[test]
    fn separation_around_one_root() {
        let f = fun("poly:1,0,0,0,0,-1");
        let opts = TraceOptions::default();
        let c = critical_level_curves(&f, DomainSpec::WholePlane, opts).unwrap();
        let lem = c.members.iter().find(|m| !m.is_point()).unwrap();
        let s = separating_curve(&f, lem, &[Complex64::new(1.0, 0.0)], DomainSpec::WholePlane, opts).unwrap();
        assert!(s.curve.level < 1.0);
        assert!(s.k_bounded && !s.l_bounded);
    }
}
