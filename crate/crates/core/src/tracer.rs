//! Tracing the level set `E = {z : |f(z)| = eps}` as polylines.
//!
//! A regular point of `E` is continued along the tangent field
//! `T = i * conj(f'/f) / |f'/f|` (the direction in which `arg f` increases),
//! with Newton correction on `ln|f| - ln eps`. Critical points of `f` whose
//! value has modulus `eps` are the vertices of `E`. Near such a point `c` of
//! multiplicity `m`, `f(z) ~ f(c) + a (z - c)^(m+1)`, so `E` leaves `c` along
//! the `2(m+1)` rays where `Re(a/f(c) (z-c)^(m+1)) = 0`. Arcs are traced from
//! every ray of every vertex until they are captured by a vertex again;
//! components without vertices are simple closed curves.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::funcspace::{DomainSpec, RationalFn};
use crate::geom::{self, BBox, SegmentIndex};
use crate::{Error, Result, Tolerances};

/// One polyline of a level curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedArc {
    pub points: Vec<Complex64>,
    pub start_vertex: Option<usize>,
    pub end_vertex: Option<usize>,
    pub closed: bool,
    pub level: f64,
}

impl TracedArc {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn max_step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .fold(0.0, f64::max)
    }

    /// Interior points (vertex endpoints and the duplicated closing point dropped).
    pub fn interior(&self) -> &[Complex64] {
        let n = self.points.len();
        let lo = usize::from(self.start_vertex.is_some());
        let hi = if self.end_vertex.is_some() || self.closed { n.saturating_sub(1) } else { n };
        &self.points[lo.min(hi)..hi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub z: Complex64,
    pub mult: usize,
}

/// A connected component of a level set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCurveComponent {
    pub level: f64,
    pub arcs: Vec<TracedArc>,
    pub vertices: Vec<Vertex>,
    /// Critical points lying suspiciously close to this component without being on it.
    pub near_critical: Vec<Complex64>,
}

impl LevelCurveComponent {
    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.arcs.iter().flat_map(|a| a.points.iter().copied())
    }

    pub fn polylines(&self) -> impl Iterator<Item = &[Complex64]> {
        self.arcs.iter().map(|a| a.points.as_slice())
    }

    pub fn bbox(&self) -> BBox {
        let mut b = BBox::empty();
        for p in self.points() {
            b.add(p);
        }
        b
    }

    pub fn segment_index(&self) -> SegmentIndex {
        SegmentIndex::from_polylines(self.polylines())
    }

    pub fn is_simple_closed(&self) -> bool {
        self.vertices.is_empty() && self.arcs.len() == 1 && self.arcs[0].closed
    }

    pub fn max_step(&self) -> f64 {
        self.arcs.iter().map(TracedArc::max_step).fold(0.0, f64::max)
    }

    pub fn point_count(&self) -> usize {
        self.arcs.iter().map(|a| a.points.len()).sum()
    }

    /// `n` points spread along the arcs, away from vertices.
    pub fn sample_points(&self, n: usize) -> Vec<Complex64> {
        let pts: Vec<Complex64> = self.arcs.iter().flat_map(|a| a.interior().iter().copied()).collect();
        if pts.is_empty() {
            return self.vertices.iter().map(|v| v.z).collect();
        }
        let n = n.max(1).min(pts.len());
        (0..n).map(|k| pts[(k * pts.len()) / n + pts.len() / (2 * n)]).collect()
    }

    /// Minimum distance between the polylines of two components.
    pub fn distance_to(&self, other: &LevelCurveComponent) -> f64 {
        if !self.bbox().expand(1e-9).contains(other.bbox().center())
            && self.bbox().distance(other.bbox().center()) > other.bbox().diameter() + self.bbox().diameter()
        {
            return self.bbox().distance(other.bbox().center()) - other.bbox().diameter();
        }
        let idx = self.segment_index();
        let mut best = f64::INFINITY;
        for a in &other.arcs {
            for w in a.points.windows(2) {
                // Segment-to-segment distance is attained at an endpoint unless they cross.
                best = best.min(idx.distance(w[0])).min(idx.distance(w[1]));
            }
            if let [p] = a.points.as_slice() {
                best = best.min(idx.distance(*p));
            }
        }
        let other_idx = other.segment_index();
        for p in self.points() {
            best = best.min(other_idx.distance(p));
        }
        best
    }
}

/// Knobs for the continuation method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub tol: Tolerances,
    /// Largest step, as a fraction of the local length scale.
    pub max_step_frac: f64,
    /// Nominal smallest step, as a fraction of the local length scale.
    pub min_step_frac: f64,
    /// Largest tangent turn per step (radians).
    pub max_turn: f64,
    pub max_points: usize,
    /// Rays cast from each zero and pole when seeding.
    pub rays_per_anchor: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            max_step_frac: 1e-2,
            min_step_frac: 1e-6,
            max_turn: 0.1,
            max_points: 2_000_000,
            rays_per_anchor: 16,
        }
    }
}

impl TraceOptions {
    pub fn with_tol(tol: Tolerances) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// A critical point together with its local branch structure.
#[derive(Debug, Clone)]
struct Branching {
    z: Complex64,
    mult: usize,
    value: f64,
    capture: f64,
    rays: Vec<f64>,
}

impl Branching {
    fn new(f: &RationalFn, z: Complex64, mult: usize, scale: f64, opts: &TraceOptions, clearance: f64) -> Self {
        let t = f.taylor_at(z, mult + 1);
        let f0 = t[0];
        let a = t[mult + 1];
        let ratio = a / f0;
        let k = (mult + 1) as f64;
        let base = (PI / 2.0 - ratio.arg()) / k;
        let rays = (0..2 * (mult + 1))
            .map(|j| wrap_angle(base + j as f64 * PI / k))
            .collect();
        let model = (1e-3 * opts.tol.trace / ratio.norm().max(1e-300)).powf(1.0 / k);
        let floor = 2.0 * opts.min_step_frac * scale;
        let capture = model.max(floor).min(0.05 * clearance).max(floor.min(0.05 * clearance));
        Self {
            z,
            mult,
            value: f0.norm(),
            capture,
            rays,
        }
    }

    fn ray_index(&self, p: Complex64) -> (usize, f64) {
        let ang = (p - self.z).arg();
        self.rays
            .iter()
            .enumerate()
            .map(|(k, &r)| (k, angle_gap(ang, r)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, PI))
    }
}

fn wrap_angle(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

enum SeedOutcome {
    Closed(Vec<Complex64>),
    HitVertex(usize),
}

struct RayArc {
    points: Vec<Complex64>,
    end: usize,
    end_ray: usize,
    reversed: bool,
}

/// Level-set tracer for one function and one level.
pub struct Tracer<'a> {
    f: &'a RationalFn,
    domain: DomainSpec,
    opts: TraceOptions,
    level: f64,
    log_level: f64,
    scale: f64,
    /// Vertices of `E`: critical points at this level.
    candidates: Vec<Branching>,
    /// All other distinguished points, which limit the step size.
    obstacles: Vec<Complex64>,
    /// Off-level critical points close to the level (reported, not captured).
    near_level: Vec<Branching>,
}

impl<'a> Tracer<'a> {
    pub fn new(f: &'a RationalFn, eps: f64, domain: DomainSpec, opts: TraceOptions) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidInput(format!("level must be in (0, inf), got {eps}")));
        }
        opts.tol.validate()?;
        domain.validate_for(f)?;
        if let Some(b) = domain.boundary_level() {
            if (eps - b).abs() <= 1e-9 * b.max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "level {eps} equals |f| on the domain boundary"
                )));
            }
        }
        let scale = f.feature_scale();
        let crit = f.proper_critical_points(&domain);
        let features: Vec<Complex64> = f.feature_points().collect();
        let clearance = |z: Complex64| {
            features
                .iter()
                .filter(|&&w| (w - z).norm() > 1e-12 * scale)
                .map(|&w| (w - z).norm())
                .fold(scale, f64::min)
        };
        let branchings: Vec<Branching> = crit
            .iter()
            .map(|r| Branching::new(f, r.z, r.mult, scale, &opts, clearance(r.z)))
            .collect();

        // Snap onto a critical value when the level is numerically equal to it.
        let snap_band = opts.tol.snap * eps.max(1.0);
        let mut level = eps;
        if let Some(b) = branchings
            .iter()
            .filter(|b| (b.value - eps).abs() <= snap_band)
            .min_by(|a, b| (a.value - eps).abs().total_cmp(&(b.value - eps).abs()))
        {
            level = b.value;
        }
        let band = opts.tol.snap * level.max(1.0);
        let vertex_band = opts.tol.vertex * level.max(1.0);
        let mut candidates = Vec::new();
        let mut near_level = Vec::new();
        let mut obstacles: Vec<Complex64> = f.zeros().iter().chain(f.poles()).map(|r| r.z).collect();
        for b in branchings {
            let gap = (b.value - level).abs();
            if gap <= band {
                candidates.push(b);
            } else {
                if gap <= vertex_band {
                    near_level.push(b.clone());
                }
                obstacles.push(b.z);
            }
        }
        Ok(Self {
            f,
            domain,
            opts,
            level,
            log_level: level.ln(),
            scale,
            candidates,
            obstacles,
            near_level,
        })
    }

    /// The level actually traced (after snapping onto a critical value).
    pub fn level(&self) -> f64 {
        self.level
    }

    /// Critical points lying on this level, with multiplicity.
    pub fn vertex_candidates(&self) -> Vec<Vertex> {
        self.candidates.iter().map(|b| Vertex { z: b.z, mult: b.mult }).collect()
    }

    pub fn capture_radius(&self, z: Complex64) -> Option<f64> {
        self.candidates
            .iter()
            .chain(&self.near_level)
            .find(|b| (b.z - z).norm() <= 1e-12 * self.scale.max(z.norm()))
            .map(|b| b.capture)
    }

    fn local_scale(&self, z: Complex64) -> f64 {
        self.scale.max(z.norm())
    }

    fn on_level_tolerance(&self) -> f64 {
        self.opts.tol.trace * self.level.max(1.0)
    }

    /// `(ln|f| - ln eps, f'/f)` at `z`.
    fn residual(&self, z: Complex64) -> (f64, Complex64) {
        let (lm, d) = self.f.log_pair(z);
        (lm - self.log_level, d)
    }

    /// Unit tangent in the direction of increasing `arg f`.
    fn tangent(&self, z: Complex64) -> Option<Complex64> {
        let (_, d) = self.residual(z);
        let t = Complex64::i() * d.conj();
        let n = t.norm();
        (n > 0.0 && n.is_finite()).then(|| t / n)
    }

    /// Gradient-direction Newton iteration onto the level. Returns the point
    /// and the number of correction steps taken.
    pub fn correct(&self, z0: Complex64) -> Option<(Complex64, usize)> {
        let target = 1e-13_f64.max(0.1 * self.opts.tol.trace * self.level.max(1.0) / self.level);
        let target = target.min(1e-11);
        let mut z = z0;
        let mut best: Option<(Complex64, f64, usize)> = None;
        for it in 0..12 {
            let (r, d) = self.residual(z);
            if !r.is_finite() || !d.is_finite() {
                return None;
            }
            if best.is_none_or(|(_, br, _)| r.abs() < br) {
                best = Some((z, r.abs(), it));
            }
            if r.abs() <= target {
                return Some((z, it));
            }
            let g = d.conj();
            let g2 = g.norm_sqr();
            if g2 == 0.0 {
                return None;
            }
            z -= g * (r / g2);
        }
        // Accept a stalled iteration if it is still comfortably on the level.
        best.and_then(|(z, r, it)| (r * self.level <= 1e-2 * self.on_level_tolerance()).then_some((z, it)))
    }

    fn step_limit(&self, z: Complex64, skip: Option<usize>) -> f64 {
        let local = self.local_scale(z);
        let mut h = self.opts.max_step_frac * local;
        for (k, b) in self.candidates.iter().enumerate() {
            if Some(k) != skip {
                h = h.min(0.5 * (z - b.z).norm());
            } else {
                h = h.min(0.5 * (z - b.z).norm().max(b.capture));
            }
        }
        for o in &self.obstacles {
            h = h.min(0.25 * (z - o).norm());
        }
        h
    }

    /// One accepted predictor-corrector step along `sign * T`.
    fn advance(&self, z: Complex64, sign: f64, h_try: f64, skip: Option<usize>) -> Result<(Complex64, f64)> {
        let floor = 1e-10 * self.local_scale(z);
        let cos_max = self.opts.max_turn.cos();
        let mut h = h_try.min(self.step_limit(z, skip));
        let t0 = self.tangent(z).ok_or(Error::StepUnderflow { at: z })? * sign;
        loop {
            if h < floor {
                return Err(Error::StepUnderflow { at: z });
            }
            let zp = z + t0 * h;
            if let Some((zn, iters)) = self.correct(zp) {
                if iters <= 3 && (zn - zp).norm() <= 0.3 * h && (zn - z).norm() <= 1.2 * h {
                    if let Some(t1) = self.tangent(zn) {
                        if geom::dot(t0, t1 * sign) >= cos_max {
                            return Ok((zn, h));
                        }
                    }
                }
            }
            h *= 0.5;
        }
    }

    fn check_point(&self, z: Complex64) -> Result<()> {
        if !self.domain.contains(z) {
            return Err(Error::LeftDomain { at: z });
        }
        if z.norm() > 1e6 * self.scale {
            return Err(Error::MaxPointsExceeded { at: z, max_points: self.opts.max_points });
        }
        Ok(())
    }

    fn captured(&self, z: Complex64, exclude: Option<usize>) -> Option<usize> {
        self.candidates.iter().enumerate().find_map(|(k, b)| {
            (Some(k) != exclude && (z - b.z).norm() <= b.capture).then_some(k)
        })
    }

    /// Follow the level from a regular point in the increasing-`arg f` direction.
    fn trace_closed(&self, start: Complex64) -> Result<SeedOutcome> {
        if let Some(k) = self.captured(start, None) {
            return Ok(SeedOutcome::HitVertex(k));
        }
        let mut pts = vec![start];
        let mut z = start;
        let mut h = self.step_limit(z, None);
        let mut travelled = 0.0;
        loop {
            if pts.len() > self.opts.max_points {
                return Err(Error::MaxPointsExceeded { at: z, max_points: self.opts.max_points });
            }
            let limit = self.step_limit(z, None);
            h = h.min(limit);
            // Close the loop once the start is within one step ahead of us.
            if travelled > 2.0 * h && pts.len() > 3 {
                let back = start - z;
                if back.norm() <= 1.05 * h {
                    if let Some(t) = self.tangent(z) {
                        if geom::dot(back, t) > 0.0 {
                            pts.push(start);
                            return Ok(SeedOutcome::Closed(pts));
                        }
                    }
                }
            }
            let (zn, used) = self.advance(z, 1.0, h, None)?;
            self.check_point(zn)?;
            travelled += (zn - z).norm();
            z = zn;
            pts.push(z);
            if let Some(k) = self.captured(z, None) {
                return Ok(SeedOutcome::HitVertex(k));
            }
            h = (used * 1.5).min(self.opts.max_step_frac * self.local_scale(z));
        }
    }

    /// Trace the branch leaving vertex `v` along ray `ray` until a vertex captures it.
    fn trace_ray(&self, v: usize, ray: usize) -> Result<RayArc> {
        let b = &self.candidates[v];
        let dir = Complex64::from_polar(1.0, b.rays[ray]);
        let guess = b.z + dir * b.capture;
        let z0 = match self.correct(guess) {
            Some((z, _)) if angle_gap((z - b.z).arg(), b.rays[ray]) < PI / (2.0 * (b.mult + 1) as f64) => z,
            _ => guess,
        };
        let t = self.tangent(z0).ok_or(Error::StepUnderflow { at: z0 })?;
        let sign = if geom::dot(t, dir) >= 0.0 { 1.0 } else { -1.0 };
        let mut pts = vec![b.z, z0];
        let mut z = z0;
        let mut h = 0.5 * b.capture;
        let mut skip = Some(v);
        loop {
            if pts.len() > self.opts.max_points {
                return Err(Error::MaxPointsExceeded { at: z, max_points: self.opts.max_points });
            }
            let (zn, used) = self.advance(z, sign, h, skip)?;
            self.check_point(zn)?;
            z = zn;
            pts.push(z);
            if skip == Some(v) && (z - b.z).norm() > 3.0 * b.capture {
                skip = None;
            }
            if let Some(k) = self.captured(z, skip) {
                let target = &self.candidates[k];
                let (end_ray, _) = target.ray_index(z);
                pts.push(target.z);
                return Ok(RayArc {
                    points: pts,
                    end: k,
                    end_ray,
                    reversed: sign < 0.0,
                });
            }
            h = (used * 1.5).min(self.opts.max_step_frac * self.local_scale(z));
        }
    }

    /// Trace the whole component containing the given vertices.
    fn explore(&self, start: usize) -> Result<LevelCurveComponent> {
        let mut order: Vec<usize> = vec![start];
        let mut consumed: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut arcs = Vec::new();
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            let nrays = self.candidates[v].rays.len();
            for ray in 0..nrays {
                if consumed.contains(&(v, ray)) {
                    continue;
                }
                consumed.insert((v, ray));
                let arc = self.trace_ray(v, ray)?;
                if !consumed.insert((arc.end, arc.end_ray)) {
                    return Err(Error::Branching {
                        vertex: self.candidates[arc.end].z,
                        detail: format!("ray {} reached twice", arc.end_ray),
                    });
                }
                if !order.contains(&arc.end) {
                    order.push(arc.end);
                }
                arcs.push((v, arc));
            }
            i += 1;
        }
        let local_id = |k: usize| order.iter().position(|&o| o == k);
        let vertices = order
            .iter()
            .map(|&k| Vertex { z: self.candidates[k].z, mult: self.candidates[k].mult })
            .collect();
        let arcs = arcs
            .into_iter()
            .map(|(v, a)| {
                let (s, e) = (local_id(v), local_id(a.end));
                let mut points = a.points;
                if a.reversed {
                    points.reverse();
                    TracedArc { points, start_vertex: e, end_vertex: s, closed: false, level: self.level }
                } else {
                    TracedArc { points, start_vertex: s, end_vertex: e, closed: false, level: self.level }
                }
            })
            .collect();
        let mut comp = LevelCurveComponent {
            level: self.level,
            arcs,
            vertices,
            near_critical: Vec::new(),
        };
        self.annotate(&mut comp);
        Ok(comp)
    }

    fn annotate(&self, comp: &mut LevelCurveComponent) {
        let idx = comp.segment_index();
        for b in &self.near_level {
            comp.near_critical.push(b.z);
        }
        for o in &self.obstacles {
            if let Some(b) = self.f.critical_points().iter().find(|r| r.z == *o) {
                let cap = self.capture_radius(b.z).unwrap_or(1e-6 * self.scale);
                if idx.distance(b.z) <= 10.0 * cap.max(1e-6 * self.scale) && !comp.near_critical.contains(&b.z) {
                    comp.near_critical.push(b.z);
                }
            }
        }
    }

    /// Trace the component of the level set through `seed`.
    pub fn trace_component(&self, seed: Complex64) -> Result<LevelCurveComponent> {
        if let Some(k) = self.captured(seed, None) {
            return self.explore(k);
        }
        let (start, _) = self.correct(seed).ok_or(Error::SeedDivergence { anchors: vec![seed] })?;
        let miss = (self.f.log_modulus(start) - self.log_level).abs() * self.level;
        if !(miss <= self.on_level_tolerance()) {
            return Err(Error::SeedDivergence { anchors: vec![seed] });
        }
        match self.trace_closed(start)? {
            SeedOutcome::HitVertex(k) => self.explore(k),
            SeedOutcome::Closed(points) => {
                let mut comp = LevelCurveComponent {
                    level: self.level,
                    arcs: vec![TracedArc {
                        points,
                        start_vertex: None,
                        end_vertex: None,
                        closed: true,
                        level: self.level,
                    }],
                    vertices: Vec::new(),
                    near_critical: Vec::new(),
                };
                self.annotate(&mut comp);
                Ok(comp)
            }
        }
    }

    /// Trace the component through the critical point `c` (which must lie on this level).
    pub fn trace_from_vertex(&self, c: Complex64) -> Result<LevelCurveComponent> {
        let k = self
            .candidates
            .iter()
            .position(|b| (b.z - c).norm() <= 1e-12 * self.scale.max(c.norm()))
            .ok_or_else(|| Error::Precondition(format!("{c} is not a critical point on level {}", self.level)))?;
        self.explore(k)
    }

    /// Points on `E` near every component: crossings along rays cast from each
    /// zero and pole, plus sign changes on a coarse grid.
    pub fn find_seeds(&self) -> Result<Vec<Complex64>> {
        let (zeros, poles) = self.f.zeros_and_poles(&self.domain);
        let mut anchors: Vec<Complex64> = zeros.iter().chain(&poles).map(|r| r.z).collect();
        if anchors.is_empty() {
            anchors.extend(self.f.critical_points_in(&self.domain).iter().map(|r| r.z));
        }
        let reach = self.seed_reach();
        let mut seeds = Vec::new();
        let mut failed = Vec::new();
        let nrays = self.opts.rays_per_anchor.max(1);
        for &a in &anchors {
            for j in 0..nrays {
                let theta = 2.0 * PI * j as f64 / nrays as f64 + 0.123;
                let dir = Complex64::from_polar(1.0, theta);
                match self.ray_crossings(a, dir, reach) {
                    Ok(mut s) => seeds.append(&mut s),
                    Err(_) => failed.push(a),
                }
            }
        }
        seeds.extend(self.grid_seeds(reach));
        if seeds.is_empty() && !failed.is_empty() {
            failed.dedup();
            return Err(Error::SeedDivergence { anchors: failed });
        }
        Ok(seeds)
    }

    /// Radius around the origin beyond which no bounded component of `E` lies.
    fn seed_reach(&self) -> f64 {
        let base = 3.0 * self.scale;
        let k = self.f.degree_at_infinity();
        if k == 0 {
            return 8.0 * self.scale;
        }
        let lead = (self.f.numerator().leading() / self.f.denominator().leading()).norm();
        let r_inf = (self.level / lead).powf(1.0 / k as f64);
        base.max(2.0 * r_inf + self.scale)
    }

    fn ray_crossings(&self, a: Complex64, dir: Complex64, reach: f64) -> Result<Vec<Complex64>> {
        let s = self.scale;
        let g = |t: f64| self.f.log_modulus(a + dir * t) - self.log_level;
        let mut ts = Vec::new();
        let mut t = 1e-8 * s;
        while t < 1e-2 * s {
            ts.push(t);
            t *= 1.5;
        }
        while t < reach {
            ts.push(t);
            t += (2.5e-3 * s).max(2.5e-3 * t);
        }
        let mut out = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for &t in &ts {
            let z = a + dir * t;
            if !self.domain.contains(z) {
                break;
            }
            let v = g(t);
            if v.is_nan() {
                prev = None;
                continue;
            }
            if let Some((tp, vp)) = prev {
                if vp.signum() != v.signum() && vp.is_finite() && v.is_finite() {
                    let root = bisect(&g, tp, t, vp);
                    let z = a + dir * root;
                    if let Some((zc, _)) = self.correct(z) {
                        if self.domain.contains(zc) {
                            out.push(zc);
                        }
                    } else {
                        return Err(Error::SeedDivergence { anchors: vec![a] });
                    }
                }
            }
            prev = Some((t, v));
        }
        Ok(out)
    }

    fn grid_seeds(&self, reach: f64) -> Vec<Complex64> {
        let n = 64usize;
        let (lo, hi) = match self.domain {
            DomainSpec::WholePlane => (Complex64::new(-reach, -reach), Complex64::new(reach, reach)),
            DomainSpec::UnitDisk => (Complex64::new(-1.0, -1.0), Complex64::new(1.0, 1.0)),
            DomainSpec::Rectangle { x0, y0, x1, y1 } => (Complex64::new(x0, y0), Complex64::new(x1, y1)),
        };
        let step = (hi - lo) / n as f64;
        let node = |i: usize, j: usize| Complex64::new(lo.re + step.re * (i as f64 + 0.37), lo.im + step.im * (j as f64 + 0.61));
        let vals: Vec<f64> = (0..=n)
            .flat_map(|j| (0..=n).map(move |i| (i, j)))
            .map(|(i, j)| {
                let z = node(i, j);
                if self.domain.contains(z) {
                    self.f.log_modulus(z) - self.log_level
                } else {
                    f64::NAN
                }
            })
            .collect();
        let at = |i: usize, j: usize| vals[j * (n + 1) + i];
        let mut out = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                for (di, dj) in [(1usize, 0usize), (0, 1)] {
                    let (i2, j2) = (i + di, j + dj);
                    if i2 > n || j2 > n {
                        continue;
                    }
                    let (va, vb) = (at(i, j), at(i2, j2));
                    if va.is_finite() && vb.is_finite() && va.signum() != vb.signum() {
                        let (za, zb) = (node(i, j), node(i2, j2));
                        let g = |t: f64| self.f.log_modulus(za + (zb - za) * t) - self.log_level;
                        let t = bisect(&g, 0.0, 1.0, va);
                        if let Some((zc, _)) = self.correct(za + (zb - za) * t) {
                            if self.domain.contains(zc) {
                                out.push(zc);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Every component of the level set in the domain.
    pub fn trace_level_set(&self) -> Result<Vec<LevelCurveComponent>> {
        let mut comps: Vec<LevelCurveComponent> = Vec::new();
        let mut indices: Vec<SegmentIndex> = Vec::new();
        for k in 0..self.candidates.len() {
            let z = self.candidates[k].z;
            if !self.domain.contains(z) || comps.iter().any(|c| c.vertices.iter().any(|v| v.z == z)) {
                continue;
            }
            let comp = self.explore(k)?;
            indices.push(comp.segment_index());
            comps.push(comp);
        }
        for seed in self.find_seeds()? {
            if indices.iter().any(|idx| on_traced(idx, seed)) {
                continue;
            }
            if self.captured(seed, None).is_some() {
                continue;
            }
            let comp = self.trace_component(seed)?;
            // A seed that slipped past the dedup test lands on an existing component.
            let probe = comp.arcs[0].points[comp.arcs[0].points.len() / 2];
            if indices.iter().any(|idx| on_traced(idx, probe))
                || comp.vertices.iter().any(|v| comps.iter().any(|c| c.vertices.iter().any(|w| w.z == v.z)))
            {
                continue;
            }
            indices.push(comp.segment_index());
            comps.push(comp);
        }
        for i in 0..comps.len() {
            for j in (i + 1)..comps.len() {
                let d = comps[i].distance_to(&comps[j]);
                if !(d > self.opts.tol.trace) {
                    return Err(Error::CurvesTooClose { distance: d });
                }
            }
        }
        Ok(comps)
    }
}

pub(crate) fn on_traced(idx: &SegmentIndex, p: Complex64) -> bool {
    match idx.nearest(p) {
        Some((k, d)) => {
            let (a, b) = idx.segment(k);
            d <= 0.05 * (b - a).norm() + 1e-12 * p.norm().max(1.0)
        }
        None => false,
    }
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, v_lo: f64) -> f64 {
    let s_lo = v_lo.signum();
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let v = g(mid);
        if v.is_nan() {
            break;
        }
        if v.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Move `z0` along the gradient of `ln|f|` until `ln|f| = log_level`,
/// in small level increments so the path stays on one flow line.
pub fn flow_to_level(f: &RationalFn, z0: Complex64, log_level: f64, max_step: f64) -> Option<Complex64> {
    let start = f.log_modulus(z0);
    if !start.is_finite() {
        return None;
    }
    let steps = 64;
    let mut z = z0;
    for k in 1..=steps {
        let target = start + (log_level - start) * k as f64 / steps as f64;
        let mut done = false;
        for _ in 0..30 {
            let (lm, d) = f.log_pair(z);
            let r = lm - target;
            if !r.is_finite() {
                return None;
            }
            if r.abs() <= 1e-13 * (1.0 + target.abs()) {
                done = true;
                break;
            }
            let g = d.conj();
            let g2 = g.norm_sqr();
            if g2 == 0.0 {
                return None;
            }
            let mut dz = -g * (r / g2);
            if dz.norm() > max_step {
                dz *= max_step / dz.norm();
            }
            z += dz;
        }
        if !done && k == steps {
            return None;
        }
    }
    Some(z)
}

/// Seeds for `trace_level_set`.
pub fn find_seeds(f: &RationalFn, eps: f64, domain: DomainSpec, opts: TraceOptions) -> Result<Vec<Complex64>> {
    Tracer::new(f, eps, domain, opts)?.find_seeds()
}

pub fn trace_component(f: &RationalFn, eps: f64, seed: Complex64, opts: TraceOptions) -> Result<LevelCurveComponent> {
    Tracer::new(f, eps, DomainSpec::WholePlane, opts)?.trace_component(seed)
}

pub fn trace_level_set(f: &RationalFn, eps: f64, domain: DomainSpec, opts: TraceOptions) -> Result<Vec<LevelCurveComponent>> {
    Tracer::new(f, eps, domain, opts)?.trace_level_set()
}
