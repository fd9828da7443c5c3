//! Decomposition of the domain minus the critical set into annuli, and the
//! map `phi = |f|^(1/N) e^(i alpha/N)` on each of them.
//!
//! Each region is a bounded face `F` of a curve `X` (a member of the critical
//! set or the outer boundary) with everything inside the unique maximal member
//! `Y` of `F` removed. `|f|` runs strictly between its values on `Y` and `X`,
//! and `arg f` turns by `2 pi N` along any level curve in the region.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus;
use crate::geom::{self, SegmentIndex};
use crate::metrics::ser_dist;
use crate::order::{critical_level_curves, CriticalSet, CurveKind, CurveRef};
use crate::tracer::{flow_to_level, LevelCurveComponent, TraceOptions, TracedArc, Tracer};
use crate::{DomainSpec, Error, FnKind, RationalFn, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecomposeOptions {
    /// Level of the outer boundary curve for functions on the whole plane.
    pub outer_level: Option<f64>,
    /// Mesh nodes along the longer side of a region's bounding box.
    pub mesh: usize,
    /// Seed for the random cycle checks.
    pub seed: u64,
    /// Fundamental cycles checked for path independence.
    pub cycle_checks: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { outer_level: None, mesh: 200, seed: 0, cycle_checks: 100 }
    }
}

/// The map on a region, sampled on a mesh.
#[derive(Debug, Clone, Default)]
pub struct PhiGrid {
    pub nodes: Vec<Complex64>,
    pub alpha: Vec<f64>,
    pub phi: Vec<Complex64>,
    pub edges: Vec<(usize, usize)>,
    /// Mesh quadrilaterals, counterclockwise in the image.
    pub cells: Vec<[usize; 4]>,
    pub rings: usize,
    pub per_ring: usize,
    /// Largest relative distance of `phi` at a node from the polar grid point it was solved for.
    pub target_error: f64,
    /// Largest distance of the two-tree discrepancy from `2 pi N Z`.
    pub tree_discrepancy: f64,
    /// Largest distance of a fundamental-cycle discrepancy from `2 pi N Z`.
    pub cycle_discrepancy: f64,
    pub cycles_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiCertificate {
    pub max_power_residual: f64,
    pub power_bound: f64,
    pub min_modulus: f64,
    pub max_modulus: f64,
    #[serde(serialize_with = "ser_dist")]
    pub r_inner: f64,
    #[serde(serialize_with = "ser_dist")]
    pub r_outer: f64,
    pub annulus_ok: bool,
    pub injective: bool,
    /// Mesh squares whose image is not positively oriented.
    pub folded_cells: usize,
    /// Mesh nodes found outside the region.
    pub stray_nodes: usize,
    pub target_error: f64,
    /// Turns of `phi` around the origin along the middle level curve.
    pub image_winding: f64,
    pub coverage_gap: f64,
    pub coverage_bound: f64,
    pub boundary_ok: bool,
    pub boundary_samples: usize,
    pub tree_discrepancy: f64,
    pub cycle_discrepancy: f64,
    pub level_modulus_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnularRegion {
    pub id: usize,
    /// Index of the outer boundary `E2` in the member list.
    pub outer: usize,
    pub outer_face: usize,
    /// Index of the inner boundary `E1` in the member list.
    pub inner: usize,
    #[serde(serialize_with = "ser_dist")]
    pub eps1: f64,
    #[serde(serialize_with = "ser_dist")]
    pub eps2: f64,
    pub n: u32,
    /// Exponent in `f = phi^M`.
    pub m: i64,
    /// +1 when level curves traversed with increasing `arg f` run counterclockwise.
    pub orientation: i32,
    pub enclosed_zeros: usize,
    pub enclosed_poles: usize,
    /// `(level, turns of arg f)` for each level curve used to determine `N`.
    pub windings: Vec<(f64, f64)>,
    pub basepoint: Complex64,
    pub mid_level: f64,
    pub certificate: PhiCertificate,
    #[serde(skip)]
    pub mid_curve: Option<LevelCurveComponent>,
    #[serde(skip)]
    pub phi: PhiGrid,
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    /// Critical set followed by the outer boundary.
    pub members: Vec<CurveRef>,
    pub outer: usize,
    pub hasse: Vec<(usize, usize)>,
    pub regions: Vec<AnnularRegion>,
}

fn wrap(a: f64) -> f64 {
    let t = (a + PI).rem_euclid(TAU) - PI;
    if t == -PI {
        PI
    } else {
        t
    }
}

/// Distance of `x` from the lattice `period * Z`.
fn off_lattice(x: f64, period: f64) -> f64 {
    (x - period * (x / period).round()).abs()
}

/// Continuous change of `arg f` along the segment `a -> b`.
fn arg_increment(f: &RationalFn, a: Complex64, b: Complex64) -> f64 {
    let d = wrap(f.arg(b) - f.arg(a));
    if d.abs() < PI / 8.0 {
        return d;
    }
    let k = 64;
    (0..k)
        .map(|i| {
            let p = a + (b - a) * (i as f64 / k as f64);
            let q = a + (b - a) * ((i + 1) as f64 / k as f64);
            wrap(f.arg(q) - f.arg(p))
        })
        .sum()
}

/// Total change of `arg f` around a closed ring.
pub fn arg_change(f: &RationalFn, ring: &[Complex64]) -> f64 {
    let n = ring.len();
    (0..n).map(|i| arg_increment(f, ring[i], ring[(i + 1) % n])).sum()
}

fn ring_of(comp: &LevelCurveComponent) -> Vec<Complex64> {
    let p = &comp.arcs[0].points;
    p[..p.len() - 1].to_vec()
}

/// Outer boundary curve and its level.
fn outer_boundary(f: &RationalFn, domain: DomainSpec, opts: &DecomposeOptions, topts: TraceOptions) -> Result<CurveRef> {
    match (domain, f.kind()) {
        (DomainSpec::UnitDisk, FnKind::Blaschke) => {
            // A critical point on the circle is where an interior level curve of level 1 meets it.
            if let Some(c) = f.critical_points().iter().find(|r| (r.z.norm() - 1.0).abs() <= 1e-8) {
                return Err(Error::Precondition(format!(
                    "a level curve meets the unit circle at the critical point {}",
                    c.z
                )));
            }
            let n = 4096;
            let mut pts: Vec<Complex64> = (0..=n)
                .map(|k| Complex64::from_polar(1.0, TAU * (k % n) as f64 / n as f64))
                .collect();
            if arg_change(f, &pts[..n]) < 0.0 {
                pts.reverse();
            }
            let comp = LevelCurveComponent {
                level: 1.0,
                arcs: vec![TracedArc { points: pts, start_vertex: None, end_vertex: None, closed: true, level: 1.0 }],
                vertices: Vec::new(),
                near_critical: Vec::new(),
            };
            CurveRef::boundary(comp, &topts)
        }
        (DomainSpec::WholePlane, _) if f.degree_at_infinity() != 0 => {
            let k = f.degree_at_infinity();
            let crit: Vec<f64> = f.proper_critical_points(&domain).iter().map(|r| f.modulus(r.z)).collect();
            let level = match opts.outer_level {
                Some(l) => l,
                None if crit.is_empty() => 1.0,
                None if k > 0 => 2.0 * crit.iter().cloned().fold(0.0, f64::max),
                None => 0.5 * crit.iter().cloned().fold(f64::INFINITY, f64::min),
            };
            if !(level > 0.0 && level.is_finite()) {
                return Err(Error::InvalidInput(format!("outer level {level}")));
            }
            // The outermost crossing on the positive real ray lies on the outer component.
            let g = |t: f64| f.log_modulus(Complex64::new(t, 0.0)) - level.ln();
            let mut hi = 2.0 * f.feature_scale();
            while (g(hi) > 0.0) != (k > 0) {
                hi *= 2.0;
                if hi > 1e12 {
                    return Err(Error::Unsupported("outer boundary level curve not found".into()));
                }
            }
            let mut lo = hi;
            let mut t = hi;
            while t > 1e-12 {
                t *= 0.98;
                if (g(t) > 0.0) != (k > 0) {
                    lo = t;
                    break;
                }
            }
            if lo == hi {
                lo = 0.0;
            }
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if (g(mid) > 0.0) == (k > 0) {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let tracer = Tracer::new(f, level, domain, topts)?;
            let comp = tracer.trace_component(Complex64::new(0.5 * (a + b), 0.0))?;
            if !comp.is_simple_closed() {
                return Err(Error::InvalidInput(format!("outer level {level} is critical")));
            }
            CurveRef::boundary(comp, &topts)
        }
        _ => Err(Error::Unsupported(format!(
            "decomposition needs a Blaschke ratio on the disk or a non-constant-at-infinity function on the plane (got {} on {})",
            match f.kind() {
                FnKind::Polynomial => "polynomial",
                FnKind::Rational => "rational function",
                FnKind::Blaschke => "Blaschke ratio",
            },
            domain.label()
        ))),
    }
}

pub(crate) struct RegionCtx<'a> {
    f: &'a RationalFn,
    members: &'a [CurveRef],
    x: usize,
    face: usize,
    y: usize,
    tol: f64,
    phi_tol: f64,
}

impl RegionCtx<'_> {
    fn x(&self) -> &CurveRef {
        &self.members[self.x]
    }

    fn y(&self) -> &CurveRef {
        &self.members[self.y]
    }

    /// Size of the outer boundary.
    fn scale(&self) -> f64 {
        let b = self.x().component.as_ref().map(|c| c.bbox()).unwrap();
        b.width().max(b.height())
    }

    fn contains(&self, z: Complex64) -> bool {
        if self.x().face_of(self.f, z, self.tol).ok().flatten() != Some(self.face) {
            return false;
        }
        let y = self.y();
        match (y.point, y.graph()) {
            (Some(p), _) => (z - p).norm() > 0.0,
            (None, Some(g)) => y.face_of(self.f, z, self.tol).ok().flatten() == Some(g.unbounded_face()),
            _ => false,
        }
    }

    /// A point of the region next to its inner boundary.
    fn start_point(&self) -> Result<Complex64> {
        let y = self.y();
        let scale = self.scale();
        if let Some(p) = y.point {
            let near = self
                .f
                .feature_points()
                .chain(self.x().component.iter().flat_map(|c| c.points()))
                .map(|q| (q - p).norm())
                .filter(|&d| d > 1e-12 * scale)
                .fold(scale, f64::min);
            for k in 0..8 {
                let z = p + Complex64::from_polar(0.02 * near, 0.3 + k as f64 * PI / 4.0);
                if self.contains(z) {
                    return Ok(z);
                }
            }
            return Err(Error::NotAnnular(format!("no region point next to {p}")));
        }
        // Step off the curve uphill or downhill towards the outer level, by part of the gap.
        let g = y.graph().unwrap();
        let outside = &g.faces[g.unbounded_face()];
        let step = y.component.as_ref().unwrap().max_step().max(1e-6 * scale);
        let gap = self.x().level.ln() - y.level.ln();
        for h in &outside.edge_cycle {
            let p = &g.polylines()[h.edge];
            let z = p[p.len() / 2];
            let grad = self.f.log_derivative(z).conj();
            let dir = grad / grad.norm() * gap.signum();
            for frac in [0.5, 0.25, 0.05] {
                let cand = z + dir * (frac * gap.abs() / grad.norm()).min(step);
                if self.contains(cand) {
                    return Ok(cand);
                }
            }
        }
        Err(Error::NotAnnular("no region point next to the inner boundary".into()))
    }
}

/// Break the decomposition into annular regions and certify `phi` on each.
pub fn decompose(
    f: &RationalFn,
    domain: DomainSpec,
    topts: TraceOptions,
    opts: DecomposeOptions,
) -> Result<Decomposition> {
    let outer = outer_boundary(f, domain, &opts, topts)?;
    let cset = critical_level_curves(f, domain, topts)?;
    let mut members = cset.members;
    members.push(outer);
    let outer_idx = members.len() - 1;
    let ext = CriticalSet { members };
    let tol = topts.tol.trace;
    let rel = ext.relation(f, tol)?;
    CriticalSet::check_partial_order(&rel)?;
    for i in 0..outer_idx {
        if !rel[i][outer_idx] {
            return Err(Error::NotAnnular(format!("member {i} is not inside the outer boundary")));
        }
    }
    let hasse = CriticalSet::hasse(&rel);

    let mut slots = Vec::new();
    for (x, m) in ext.members.iter().enumerate() {
        let Some(g) = m.graph() else { continue };
        for face in g.bounded_faces() {
            let inside = ext.members_in_face(f, x, face.id, tol)?;
            let y = CriticalSet::unique_maximal_of(&rel, &inside)?;
            if inside.iter().any(|&i| i != y && !rel[i][y]) {
                return Err(Error::NotAnnular(format!(
                    "face {} of member {x} has a second complementary component",
                    face.id
                )));
            }
            slots.push((x, face.id, y));
        }
    }
    let members = ext.members;
    let regions: Vec<AnnularRegion> = slots
        .par_iter()
        .enumerate()
        .map(|(id, &(x, face, y))| {
            let ctx = RegionCtx { f, members: &members, x, face, y, tol, phi_tol: topts.tol.phi };
            analyze_region(&ctx, id, domain, topts, &opts)
        })
        .collect::<Result<_>>()?;
    Ok(Decomposition { members, outer: outer_idx, hasse, regions })
}

fn analyze_region(
    ctx: &RegionCtx,
    id: usize,
    domain: DomainSpec,
    topts: TraceOptions,
    opts: &DecomposeOptions,
) -> Result<AnnularRegion> {
    let f = ctx.f;
    let eps1 = ctx.y().level;
    let eps2 = ctx.x().level;
    if eps1 == eps2 {
        return Err(Error::NotAnnular(format!("both boundaries at level {eps1}")));
    }
    for p in f.zeros().iter().chain(f.poles()).chain(f.critical_points()) {
        if ctx.contains(p.z) {
            return Err(Error::NotAnnular(format!("region {id} holds the distinguished point {}", p.z)));
        }
    }
    let levels: Vec<f64> = if eps1 == 0.0 {
        vec![eps2 / 8.0, eps2 / 4.0, eps2 / 2.0]
    } else if eps1.is_infinite() {
        vec![eps2 * 8.0, eps2 * 4.0, eps2 * 2.0]
    } else {
        [0.25, 0.5, 0.75].iter().map(|t| eps1.powf(1.0 - t) * eps2.powf(*t)).collect()
    };
    let start = ctx.start_point()?;
    let scale = ctx.scale();

    let mut windings = Vec::new();
    let mut curves = Vec::new();
    for &zeta in &levels {
        let seed = flow_to_level(f, start, zeta.ln(), 0.05 * scale)
            .filter(|&z| ctx.contains(z))
            .ok_or_else(|| Error::NotAnnular(format!("no point at level {zeta} in region {id}")))?;
        let comp = Tracer::new(f, zeta, domain, topts)?.trace_component(seed)?;
        if !comp.is_simple_closed() {
            return Err(Error::NotAnnular(format!("level {zeta} curve in region {id} has vertices")));
        }
        if comp.sample_points(16).into_iter().any(|p| !ctx.contains(p)) {
            return Err(Error::NotAnnular(format!("level {zeta} curve leaves region {id}")));
        }
        let turns = arg_change(f, &ring_of(&comp)) / TAU;
        if (turns - turns.round()).abs() > 1e-6 {
            return Err(Error::NonIntegerWinding { value: turns });
        }
        windings.push((zeta, turns));
        curves.push(comp);
    }
    let n = windings[0].1.round();
    if n < 1.0 || windings.iter().any(|w| w.1.round() != n) {
        return Err(Error::NotAnnular(format!("windings {windings:?} in region {id}")));
    }
    let n = n as u32;
    let mid = curves.swap_remove(1);
    let mid_level = levels[1];
    let ring = ring_of(&mid);
    let orientation = if geom::signed_area(&ring) > 0.0 { 1 } else { -1 };
    let inside = |z: Complex64| geom::winding_number(z, &ring) != 0;
    let enclosed_zeros: usize = f.zeros().iter().filter(|r| inside(r.z)).map(|r| r.mult).sum();
    let enclosed_poles: usize = f.poles().iter().filter(|r| inside(r.z)).map(|r| r.mult).sum();
    if orientation * (enclosed_zeros as i64 - enclosed_poles as i64) as i32 != n as i32 {
        return Err(Error::Topology(format!(
            "winding {n} but {enclosed_zeros} zeros and {enclosed_poles} poles enclosed (orientation {orientation})"
        )));
    }

    let basepoint = basepoint(f, &ring, mid_level)?;
    let phi = build_phi(ctx, n, basepoint, eps1, eps2, mid_level, opts)?;
    let certificate = verify_phi(ctx, n, eps1, eps2, &phi, &mid);
    if !certificate.pass {
        return Err(Error::PhiCertificate(format!("region {id}: {certificate:?}")));
    }
    Ok(AnnularRegion {
        id,
        outer: ctx.x,
        outer_face: ctx.face,
        inner: ctx.y,
        eps1,
        eps2,
        n,
        m: n as i64,
        orientation,
        enclosed_zeros,
        enclosed_poles,
        windings,
        basepoint,
        mid_level,
        certificate,
        mid_curve: Some(mid),
        phi,
    })
}

/// A point of the ring where `f` is real and positive: the crossing with the
/// smallest modulus, ties going to the larger real part.
fn basepoint(f: &RationalFn, ring: &[Complex64], level: f64) -> Result<Complex64> {
    let n = ring.len();
    let mut found: Vec<Complex64> = Vec::new();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let (fa, fb) = (f.eval(a).finite(), f.eval(b).finite());
        let (Some(fa), Some(fb)) = (fa, fb) else { continue };
        if !(fa.re > 0.0 && fb.re > 0.0 && (fa.im <= 0.0) != (fb.im <= 0.0)) {
            continue;
        }
        let t = fa.im / (fa.im - fb.im);
        let mut z = a + (b - a) * t;
        for _ in 0..50 {
            let (Some(v), Some(d)) = (f.eval(z).finite(), f.eval_derivative(z).finite()) else { break };
            let dz = (v - level) / d;
            z -= dz;
            if dz.norm() <= 1e-16 * (1.0 + z.norm()) {
                break;
            }
        }
        if let Some(v) = f.eval(z).finite() {
            if (v - level).norm() <= 1e-12 * level.max(1.0) && !found.iter().any(|w| (w - z).norm() < 1e-9) {
                found.push(z);
            }
        }
    }
    found
        .into_iter()
        .min_by(|a, b| {
            a.norm()
                .total_cmp(&b.norm())
                .then(b.re.total_cmp(&a.re))
        })
        .ok_or_else(|| Error::NotAnnular("no point with f real positive on the level curve".into()))
}

/// Newton iteration on `log f(z) = target`, the argument taken on the branch near `target.im`.
fn newton_log(f: &RationalFn, mut z: Complex64, target: Complex64) -> Option<Complex64> {
    let residual = |z: Complex64| Complex64::new(f.log_modulus(z) - target.re, wrap(f.arg(z) - target.im));
    for _ in 0..30 {
        let r = residual(z);
        let d = f.log_derivative(z);
        if !(r.is_finite() && d.is_finite()) || d.norm() == 0.0 {
            return None;
        }
        // log f is only known to within the rounding of z times |f'/f|.
        let floor = 1e-13 + 4.0 * f64::EPSILON * (1.0 + z.norm()) * d.norm();
        let dz = r / d;
        z -= dz;
        if r.norm() <= floor && dz.norm() <= 1e-13 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    let floor = 1e-13 + 4.0 * f64::EPSILON * (1.0 + z.norm()) * f.log_derivative(z).norm();
    (residual(z).norm() <= 10.0 * floor).then_some(z)
}

/// Follow the preimage of the straight path `from -> to` in `log f` space, starting at `z`.
/// Steps stay within a quarter of the distance to the nearest zero, pole or
/// critical point, where `log f` has a single-valued inverse branch.
fn continue_log(f: &RationalFn, z: Complex64, from: Complex64, to: Complex64) -> Option<Complex64> {
    let reach = |z: Complex64| 0.25 * f.feature_points().map(|c| (c - z).norm()).fold(f64::INFINITY, f64::min);
    let mut pieces = 1usize;
    'refine: while pieces <= 1 << 14 {
        let mut zz = z;
        for k in 1..=pieces {
            let tgt = from + (to - from) * (k as f64 / pieces as f64);
            let predicted = (to - from).norm() / pieces as f64 / f.log_derivative(zz).norm();
            let prev = from + (to - from) * ((k - 1) as f64 / pieces as f64);
            let half = 0.5 * (prev + tgt);
            let tracks = |next: Complex64| {
                let w = 0.5 * (zz + next);
                let r = Complex64::new(f.log_modulus(w) - half.re, wrap(f.arg(w) - half.im));
                let jump = (next - zz).norm();
                jump <= 3.0 * predicted + 1e-14 && jump <= reach(zz) && r.norm() <= 0.3 * (tgt - prev).norm() + 1e-12
            };
            match newton_log(f, zz, tgt) {
                Some(next) if tracks(next) => zz = next,
                _ => {
                    pieces *= 2;
                    continue 'refine;
                }
            }
        }
        return Some(zz);
    }
    None
}

const MAX_MESH_NODES: usize = 4_000_000;

/// Mesh of the region pulled back from a polar grid: node `(k, j)` solves
/// `f = exp(lambda_k + i psi_j)`, followed continuously from the basepoint.
/// The argument `alpha` is then propagated over the mesh edges on its own.
pub(crate) fn build_phi(
    ctx: &RegionCtx,
    n: u32,
    z0: Complex64,
    eps1: f64,
    eps2: f64,
    mid_level: f64,
    opts: &DecomposeOptions,
) -> Result<PhiGrid> {
    let scale = ctx.scale();
    let mut rings = (opts.mesh / 8).max(9);
    let mut m = (16 * n as usize).max(opts.mesh).next_power_of_two();
    for _ in 0..8 {
        let grid = pullback_mesh(ctx, n, z0, eps1, eps2, mid_level, opts, rings, m)?;
        let (ang, rad) = grid.edge_lengths(rings, m);
        if ang <= 0.02 * scale && rad <= 0.05 * scale {
            return Ok(grid);
        }
        if ang > 0.02 * scale {
            m *= 2;
        }
        if rad > 0.05 * scale {
            rings = 2 * rings - 1;
        }
        if rings * m > MAX_MESH_NODES {
            break;
        }
    }
    Err(Error::Mesh(format!("mesh edges stay longer than the region allows at {rings}x{m} nodes")))
}

#[allow(clippy::too_many_arguments)]
fn pullback_mesh(
    ctx: &RegionCtx,
    n: u32,
    z0: Complex64,
    eps1: f64,
    eps2: f64,
    mid_level: f64,
    opts: &DecomposeOptions,
    rings: usize,
    m: usize,
) -> Result<PhiGrid> {
    let f = ctx.f;
    let lout = eps2.ln();
    let lin = if eps1 == 0.0 {
        lout - 8.0
    } else if eps1.is_infinite() {
        lout + 8.0
    } else {
        eps1.ln()
    };
    let lambda: Vec<f64> = (0..rings)
        .map(|k| lin + (lout - lin) * (0.02 + 0.96 * k as f64 / (rings - 1) as f64))
        .collect();
    let lmid = mid_level.ln();
    let t_mid = (lmid - lin) / (lout - lin);
    let above = lambda.iter().position(|&l| (l - lin) / (lout - lin) >= t_mid).unwrap_or(rings);

    // Column psi = 0, outward and inward from the basepoint.
    let mut column = vec![Complex64::new(f64::NAN, 0.0); rings];
    let start = Complex64::new(lmid, 0.0);
    let (mut z, mut at) = (z0, start);
    for k in above..rings {
        let to = Complex64::new(lambda[k], 0.0);
        z = continue_log(f, z, at, to).ok_or_else(|| Error::Mesh(format!("lost the gradient line at ring {k}")))?;
        at = to;
        column[k] = z;
    }
    let (mut z, mut at) = (z0, start);
    for k in (0..above).rev() {
        let to = Complex64::new(lambda[k], 0.0);
        z = continue_log(f, z, at, to).ok_or_else(|| Error::Mesh(format!("lost the gradient line at ring {k}")))?;
        at = to;
        column[k] = z;
    }

    let step = TAU * n as f64 / m as f64;
    let rows: Vec<(Vec<Complex64>, f64)> = (0..rings)
        .into_par_iter()
        .map(|k| {
            let mut row = Vec::with_capacity(m);
            row.push(column[k]);
            let mut z = column[k];
            for j in 1..=m {
                let from = Complex64::new(lambda[k], (j - 1) as f64 * step);
                let to = Complex64::new(lambda[k], j as f64 * step);
                z = continue_log(f, z, from, to)
                    .ok_or_else(|| Error::Mesh(format!("lost the level curve at ring {k}")))?;
                if j < m {
                    row.push(z);
                }
            }
            Ok((row, (z - column[k]).norm()))
        })
        .collect::<Result<_>>()?;
    let closure = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    if closure > 1e-9 * ctx.scale() {
        return Err(Error::Mesh(format!("rings do not close after {n} turns (gap {closure:e})")));
    }

    let mut nodes: Vec<Complex64> = rows.into_iter().flat_map(|r| r.0).collect();
    let targets: Vec<Complex64> = (0..rings * m)
        .map(|i| Complex64::new(lambda[i / m], (i % m) as f64 * step))
        .collect();
    // The basepoint is a node of its own unless a ring runs through it.
    let on_ring = (0..rings).find(|&k| (lambda[k] - lmid).abs() <= 1e-12 * (1.0 + lmid.abs()));
    let root = match on_ring {
        Some(k) => k * m,
        None => {
            nodes.push(z0);
            nodes.len() - 1
        }
    };
    let args: Vec<f64> = nodes.iter().map(|&z| f.arg(z)).collect();
    let id = |k: usize, j: usize| k * m + j % m;

    let mut edges = Vec::with_capacity(2 * rings * m + 2);
    for k in 0..rings {
        for j in 0..m {
            edges.push((id(k, j), id(k, j + 1)));
            if k + 1 < rings {
                edges.push((id(k, j), id(k + 1, j)));
            }
        }
    }
    if on_ring.is_none() {
        if above < rings {
            edges.push((root, id(above, 0)));
        }
        if above > 0 {
            edges.push((root, id(above - 1, 0)));
        }
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
    for &(a, b) in &edges {
        let d = wrap(args[b] - args[a]);
        if d.abs() >= PI / 4.0 {
            return Err(Error::Mesh(format!("mesh edge with arg increment {d} >= pi/4")));
        }
        adj[a].push((b, d));
        adj[b].push((a, -d));
    }

    // Spanning tree 1 (breadth first) and tree 2 (depth first, reversed neighbor order).
    let (alpha, parent) = propagate(&adj, root, args[root], true);
    let (alpha2, _) = propagate(&adj, root, args[root], false);
    let period = TAU * n as f64;
    let tree_discrepancy = alpha
        .iter()
        .zip(&alpha2)
        .map(|(a, b)| off_lattice(a - b, period))
        .fold(0.0, f64::max);

    // Cells listed counterclockwise in the image.
    let outward = lout > lin;
    let mut cells = Vec::with_capacity(rings * m);
    for k in 0..rings - 1 {
        for j in 0..m {
            let q = [id(k, j), id(k + 1, j), id(k + 1, j + 1), id(k, j + 1)];
            cells.push(if outward { q } else { [q[0], q[3], q[2], q[1]] });
        }
    }

    // Every edge off the tree closes one fundamental cycle.
    let mut rng = corpus::rng(opts.seed);
    let mut sample: Vec<usize> = (0..edges.len())
        .filter(|&e| {
            let (a, b) = edges[e];
            parent[b] != Some(a) && parent[a] != Some(b)
        })
        .collect();
    sample.shuffle(&mut rng);
    sample.truncate(opts.cycle_checks);
    let cycle_discrepancy = sample
        .iter()
        .map(|&e| {
            let (a, b) = edges[e];
            off_lattice(alpha[a] + wrap(args[b] - args[a]) - alpha[b], period)
        })
        .fold(0.0, f64::max);

    let nf = n as f64;
    let phi: Vec<Complex64> = nodes
        .iter()
        .zip(&alpha)
        .map(|(&z, &a)| Complex64::from_polar((f.log_modulus(z) / nf).exp(), a / nf))
        .collect();
    let target_error = targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let want = (t / nf).exp();
            (phi[i] - want).norm() / want.norm().max(1.0)
        })
        .fold(0.0, f64::max);
    Ok(PhiGrid {
        nodes,
        alpha,
        phi,
        edges,
        cells,
        rings,
        per_ring: m,
        target_error,
        tree_discrepancy,
        cycle_discrepancy,
        cycles_checked: sample.len(),
    })
}

impl PhiGrid {
    /// Longest edge along the rings and across them.
    fn edge_lengths(&self, rings: usize, m: usize) -> (f64, f64) {
        let mut ang: f64 = 0.0;
        let mut rad: f64 = 0.0;
        for &(a, b) in &self.edges {
            if a >= rings * m || b >= rings * m {
                continue;
            }
            let len = (self.nodes[a] - self.nodes[b]).norm();
            if a / m == b / m {
                ang = ang.max(len);
            } else {
                rad = rad.max(len);
            }
        }
        (ang, rad)
    }
}

fn propagate(adj: &[Vec<(usize, f64)>], root: usize, a0: f64, breadth_first: bool) -> (Vec<f64>, Vec<Option<usize>>) {
    let mut alpha = vec![f64::NAN; adj.len()];
    let mut parent = vec![None; adj.len()];
    alpha[root] = a0;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = if breadth_first { queue.pop_front() } else { queue.pop_back() } {
        let nb: Box<dyn Iterator<Item = &(usize, f64)>> =
            if breadth_first { Box::new(adj[v].iter()) } else { Box::new(adj[v].iter().rev()) };
        for &(w, d) in nb {
            if alpha[w].is_nan() {
                alpha[w] = alpha[v] + d;
                parent[w] = Some(v);
                queue.push_back(w);
            }
        }
    }
    (alpha, parent)
}

/// Check the power identity, the image annulus, injectivity and coverage on
/// the mesh, and radial limits at the boundary curves.
pub(crate) fn verify_phi(
    ctx: &RegionCtx,
    n: u32,
    eps1: f64,
    eps2: f64,
    grid: &PhiGrid,
    mid: &LevelCurveComponent,
) -> PhiCertificate {
    let f = ctx.f;
    let phi_tol = ctx.phi_tol;
    let nf = n as f64;
    let mut max_f: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for (&w, &p) in grid.nodes.iter().zip(&grid.phi) {
        let v = f.eval(w).finite().unwrap_or(Complex64::new(f64::INFINITY, 0.0));
        max_f = max_f.max(v.norm());
        residual = residual.max((p.powu(n) - v).norm());
    }
    let power_bound = phi_tol * (1.0 + max_f);
    let (r_inner, r_outer) = (eps1.min(eps2).powf(1.0 / nf), eps1.max(eps2).powf(1.0 / nf));
    let mods: Vec<f64> = grid.phi.iter().map(|p| p.norm()).collect();
    let min_modulus = mods.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_modulus = mods.iter().cloned().fold(0.0, f64::max);
    let annulus_ok = min_modulus > r_inner && max_modulus < r_outer;

    // Injectivity: distinct nodes have images more than 10 phi_tol apart.
    let cell = 10.0 * phi_tol;
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (k, p) in grid.phi.iter().enumerate() {
        buckets.entry(((p.re / cell).floor() as i64, (p.im / cell).floor() as i64)).or_default().push(k);
    }
    let spacing = grid
        .edges
        .iter()
        .map(|&(a, b)| (grid.nodes[a] - grid.nodes[b]).norm())
        .fold(f64::INFINITY, f64::min);
    let mut injective = true;
    'outer: for (&(ci, cj), list) in &buckets {
        for a in list {
            for di in -1..=1 {
                for dj in -1..=1 {
                    let Some(other) = buckets.get(&(ci.saturating_add(di), cj.saturating_add(dj))) else { continue };
                    for b in other {
                        if a == b {
                            continue;
                        }
                        let gap = (grid.phi[*a] - grid.phi[*b]).norm();
                        let apart = (grid.nodes[*a] - grid.nodes[*b]).norm();
                        if gap <= cell && apart >= spacing {
                            injective = false;
                            break 'outer;
                        }
                    }
                }
            }
        }
    }

    // A holomorphic map keeps orientation, so cells must be counterclockwise on both sides.
    let folded_cells = grid
        .cells
        .iter()
        .filter(|q| {
            geom::signed_area(&q.map(|k| grid.phi[k])) <= 0.0 || geom::signed_area(&q.map(|k| grid.nodes[k])) <= 0.0
        })
        .count();
    let stray_nodes = grid.nodes.par_iter().filter(|&&w| !ctx.contains(w)).count();

    let image_winding = arg_change(f, &ring_of(mid)) / (TAU * nf);

    // Coverage of the image annulus by mesh images.
    let max_image_edge = grid
        .edges
        .iter()
        .map(|&(a, b)| (grid.phi[a] - grid.phi[b]).norm())
        .fold(0.0, f64::max);
    let band_lo = if r_inner > 0.0 { r_inner } else { min_modulus.min(r_outer) };
    let band_hi = if r_outer.is_finite() { r_outer } else { max_modulus };
    let images = SegmentIndex::new(grid.phi.iter().map(|&p| (p, p)).collect());
    let mut coverage_gap: f64 = 0.0;
    for t in [0.2, 0.35, 0.5, 0.65, 0.8] {
        let r = band_lo + (band_hi - band_lo) * t;
        for k in 0..64 {
            let target = Complex64::from_polar(r, TAU * (k as f64 + 0.5) / 64.0);
            coverage_gap = coverage_gap.max(images.distance(target));
        }
    }
    let coverage_bound = 2.0 * max_image_edge;

    // Radial limits at sampled non-critical boundary points.
    let crit: Vec<Complex64> = f.critical_points().iter().map(|r| r.z).collect();
    let scale = ctx.scale();
    let node_index = SegmentIndex::new(grid.nodes.iter().map(|&p| (p, p)).collect());
    let mut boundary_ok = true;
    let mut boundary_samples = 0;
    let into_region = if eps1 < eps2 { -1.0 } else { 1.0 };
    for (curve, level, sign) in [(ctx.x(), eps2, into_region), (ctx.y(), eps1, -into_region)] {
        let Some(comp) = &curve.component else { continue };
        for x in comp.sample_points(16) {
            if crit.iter().any(|&c| (c - x).norm() < 0.05 * scale) {
                continue;
            }
            let grad = f.log_derivative(x).conj();
            let nrm = grad / grad.norm() * sign;
            let target = level.powf(1.0 / nf);
            let gap = node_index.distance(x);
            let ts: Vec<f64> = (0..8).map(|k| gap / 2f64.powi(k)).collect();
            let pts: Vec<Complex64> = ts.iter().map(|t| x + nrm * *t).collect();
            if pts.iter().any(|&p| !ctx.contains(p)) {
                continue;
            }
            let Some((k, _)) = node_index.nearest(pts[0]) else { continue };
            let q = grid.nodes[k];
            let mut a = grid.alpha[k] + arg_increment(f, q, pts[0]);
            let mut vals = vec![Complex64::from_polar((f.log_modulus(pts[0]) / nf).exp(), a / nf)];
            for w in pts.windows(2) {
                a += arg_increment(f, w[0], w[1]);
                vals.push(Complex64::from_polar((f.log_modulus(w[1]) / nf).exp(), a / nf));
            }
            let err_first = (vals[0].norm() - target).abs();
            let err_last = (vals[vals.len() - 1].norm() - target).abs();
            let step_first = (vals[1] - vals[0]).norm();
            let step_last = (vals[vals.len() - 1] - vals[vals.len() - 2]).norm();
            boundary_samples += 1;
            if !(err_last <= err_first / 16.0 + 1e-12 && step_last <= step_first / 8.0 + 1e-12) {
                boundary_ok = false;
            }
        }
    }

    // Points of one level curve share the modulus |phi| = level^(1/N).
    let zeta = mid.level;
    let level_modulus_error = mid
        .points()
        .map(|p| ((f.log_modulus(p) / nf).exp() - zeta.powf(1.0 / nf)).abs())
        .fold(0.0, f64::max);

    let pass = residual <= power_bound
        && annulus_ok
        && injective
        && folded_cells == 0
        && stray_nodes == 0
        && grid.target_error <= phi_tol
        && (image_winding.abs() - 1.0).abs() <= 1e-6
        && coverage_gap <= coverage_bound
        && boundary_ok
        && grid.tree_discrepancy <= 1e-6
        && grid.cycle_discrepancy <= 1e-6
        && level_modulus_error <= 1e-9 * zeta.powf(1.0 / nf).max(1.0);
    PhiCertificate {
        max_power_residual: residual,
        power_bound,
        min_modulus,
        max_modulus,
        r_inner,
        r_outer,
        annulus_ok,
        injective,
        folded_cells,
        stray_nodes,
        target_error: grid.target_error,
        image_winding,
        coverage_gap,
        coverage_bound,
        boundary_ok,
        boundary_samples,
        tree_discrepancy: grid.tree_discrepancy,
        cycle_discrepancy: grid.cycle_discrepancy,
        level_modulus_error,
        pass,
    }
}

impl Decomposition {
    /// `w_re,w_im,phi_re,phi_im,region` rows for every mesh node.
    pub fn phi_csv(&self) -> String {
        let mut out = String::from("w_re,w_im,phi_re,phi_im,region\n");
        for r in &self.regions {
            for (w, p) in r.phi.nodes.iter().zip(&r.phi.phi) {
                out.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e},{}\n", w.re, w.im, p.re, p.im, r.id));
            }
        }
        out
    }

    pub fn member_kind(&self, k: usize) -> CurveKind {
        self.members[k].kind
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::parse_function;

    fn run(s: &str, domain: DomainSpec) -> Decomposition {
        let f = parse_function(s).unwrap().build().unwrap();
        decompose(&f, domain, TraceOptions::default(), DecomposeOptions::default()).unwrap()
    }

    #[test]
    fn square_is_one_double_annulus() {
        let d = run("poly:1,0,0", DomainSpec::WholePlane);
        assert_eq!(d.regions.len(), 1);
        let r = &d.regions[0];
        assert_eq!((r.n, r.m, r.orientation), (2, 2, 1));
        assert_eq!(r.eps1, 0.0);
        assert!(r.certificate.pass);
    }

    #[test]
    fn five_petals() {
        let d = run("poly:1,0,0,0,0,-1", DomainSpec::WholePlane);
        let mut ns: Vec<u32> = d.regions.iter().map(|r| r.n).collect();
        ns.sort();
        assert_eq!(ns, vec![1, 1, 1, 1, 1, 5]);
        assert!(d.regions.iter().all(|r| r.certificate.pass));
    }

    #[test]
    fn reciprocal_turns_clockwise() {
        let d = run("rat:1/1,0", DomainSpec::WholePlane);
        assert_eq!(d.regions.len(), 1);
        let r = &d.regions[0];
        assert_eq!(r.n, 1);
        assert_eq!(r.orientation, -1);
        assert!(r.eps1.is_infinite());
    }

    #[test]
    fn square_root_branch_fixed_by_basepoint() {
        let d = run("poly:1,0,0", DomainSpec::WholePlane);
        let r = &d.regions[0];
        let z0 = r.basepoint;
        assert!(z0.im.abs() < 1e-12 && z0.re > 0.0);
        let k = r.phi.nodes.iter().position(|&w| w == z0).unwrap();
        assert!((r.phi.phi[k] - z0).norm() < 1e-12);
        for (w, p) in r.phi.nodes.iter().zip(&r.phi.phi) {
            assert!((p - w).norm() < 1e-10);
        }
    }

    #[test]
    fn blaschke_ratio_on_disk() {
        let d = run("blaschke:0.1,-0.1/0.2i", DomainSpec::UnitDisk);
        assert!(!d.regions.is_empty());
        for r in &d.regions {
            assert!(r.certificate.pass);
            assert_eq!(r.orientation as i64 * (r.enclosed_zeros as i64 - r.enclosed_poles as i64), r.n as i64);
        }
    }

    #[test]
    fn level_curve_touching_the_circle_is_refused() {
        let f = parse_function("blaschke:0.3,-0.4i/0.5").unwrap().build().unwrap();
        let e = decompose(&f, DomainSpec::UnitDisk, TraceOptions::default(), DecomposeOptions::default());
        assert!(matches!(e, Err(Error::Precondition(_))));
    }

    #[test]
    fn wrong_power_is_rejected() {
        let f = parse_function("poly:1,0,0").unwrap().build().unwrap();
        let d = decompose(&f, DomainSpec::WholePlane, TraceOptions::default(), DecomposeOptions::default()).unwrap();
        let r = &d.regions[0];
        let ctx = RegionCtx {
            f: &f,
            members: &d.members,
            x: r.outer,
            face: r.outer_face,
            y: r.inner,
            tol: 1e-9,
            phi_tol: 1e-8,
        };
        let opts = DecomposeOptions::default();
        let e = build_phi(&ctx, 1, r.basepoint, r.eps1, r.eps2, r.mid_level, &opts);
        assert!(matches!(e, Err(Error::Mesh(_))));
        let cert = verify_phi(&ctx, 1, r.eps1, r.eps2, &r.phi, r.mid_curve.as_ref().unwrap());
        assert!(!cert.pass);
        assert!((cert.image_winding - 2.0).abs() < 1e-6);
    }

    #[test]
    fn csv_header() {
        let d = run("poly:1,0,0", DomainSpec::WholePlane);
        let csv = d.phi_csv();
        assert!(csv.starts_with("w_re,w_im,phi_re,phi_im,region\n"));
        assert!(csv.lines().count() > 1000);
    }
}
