//! Critical points of a polynomial against the convex hull of its zeros.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::funcspace::find_roots;
use crate::geom::{cross, dist_point_segment, dot};
use crate::tracer::{TraceOptions, Tracer};
use crate::{DomainSpec, Error, Polynomial, RationalFn, Result, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullReport {
    pub zeros: Vec<Complex64>,
    pub hull: Vec<Complex64>,
    pub critical_points: Vec<Complex64>,
    /// Signed distance of the most outlying critical point; negative means inside.
    pub max_signed_distance: f64,
    pub scale: f64,
}

/// Counterclockwise convex hull without collinear points (Andrew's monotone chain).
pub fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut p: Vec<Complex64> = points.to_vec();
    p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    p.dedup_by(|a, b| (*a - *b).norm() == 0.0);
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Complex64>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 1] - hull[hull.len() - 2], q - hull[hull.len() - 2]) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        // All points collinear: keep the two extremes.
        return vec![p[0], p[p.len() - 1]];
    }
    hull
}

/// Signed distance from `z` to the hull (negative inside).
///
/// A one-point hull gives the plain distance. For a segment hull, points on
/// the segment's line within `line_tol` and between the endpoints count as
/// inside, at depth equal to the distance to the nearer endpoint.
pub fn signed_distance(z: Complex64, hull: &[Complex64], line_tol: f64) -> f64 {
    match hull {
        [] => f64::INFINITY,
        [a] => (z - a).norm(),
        [a, b] => {
            let ab = *b - *a;
            let len = ab.norm();
            let off = cross(ab, z - *a).abs() / len;
            let t = dot(z - *a, ab) / (len * len);
            if off <= line_tol && (0.0..=1.0).contains(&t) {
                -(t.min(1.0 - t) * len)
            } else {
                dist_point_segment(z, *a, *b)
            }
        }
        _ => {
            let n = hull.len();
            let edge_dist = (0..n)
                .map(|i| dist_point_segment(z, hull[i], hull[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min);
            let inside = (0..n).all(|i| cross(hull[(i + 1) % n] - hull[i], z - hull[i]) >= 0.0);
            if inside {
                -edge_dist
            } else {
                edge_dist
            }
        }
    }
}

fn expand(roots: &[crate::Root]) -> Vec<Complex64> {
    roots.iter().flat_map(|r| std::iter::repeat_n(r.z, r.mult)).collect()
}

/// Compute zeros, critical points and hull; fail if a critical point lies outside.
pub fn check_gauss_lucas(p: &Polynomial, tol: &Tolerances) -> Result<HullReport> {
    let deg = p.degree().unwrap_or(0);
    if deg < 2 {
        return Err(Error::Precondition(format!("degree {deg} < 2")));
    }
    let zeros = expand(&find_roots(p)?);
    let critical = expand(&find_roots(&p.derivative())?);
    let scale = zeros.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let hull = convex_hull(&zeros);
    let line_tol = tol.hull * scale;
    let (worst, max_signed_distance) = critical
        .iter()
        .map(|&c| (c, signed_distance(c, &hull, line_tol)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((Complex64::new(0.0, 0.0), f64::NEG_INFINITY));
    if max_signed_distance > tol.hull * scale {
        return Err(Error::GaussLucas { point: worst, distance: max_signed_distance });
    }
    Ok(HullReport { zeros, hull, critical_points: critical, max_signed_distance, scale })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineWitness {
    /// Height of the horizontal line in normalized coordinates.
    pub s: f64,
    /// Crossings of the traced curve with the line to the right of `Re = 1`.
    pub crossings: Vec<Complex64>,
    pub z1: Complex64,
    pub z2: Complex64,
    pub prod1: f64,
    pub prod2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Replay {
    /// `c` lies in the hull; the argument has nothing to refute.
    NotApplicable { signed_distance: f64 },
    Witness {
        normalized_zeros: Vec<Complex64>,
        normalized_c: Complex64,
        level: f64,
        lines: Vec<LineWitness>,
        max_crossings_per_line: usize,
        /// Every witness has `prod1 < prod2` and no line meets the curve twice.
        holds: bool,
    },
}

/// Affine map `z -> a (z - b)` sending the zeros into the unit disk and `c` onto `(1, inf)`.
fn normalization(zeros: &[Complex64], c: Complex64, hull: &[Complex64]) -> (Complex64, Complex64) {
    let centroid = zeros.iter().sum::<Complex64>() / zeros.len() as f64;
    let rho = zeros.iter().map(|w| (w - centroid).norm()).fold(0.0, f64::max) + 0.05;
    let rot = Complex64::from_polar(1.0, -(c - centroid).arg());
    let a = rot / rho;
    if (a * (c - centroid)).re > 1.0 {
        return (a, centroid);
    }
    // Fall back to a disk tangent to the separating line through the nearest hull point.
    let q = nearest_on_hull(c, hull);
    let d = (c - q).norm();
    let u = (c - q) / d;
    let diam = zeros.iter().map(|w| (w - q).norm()).fold(0.0, f64::max) + 0.05;
    let s = diam * diam / d + diam;
    let m = q - u * s;
    let r = (s * s + diam * diam).sqrt() * (1.0 + 1e-9);
    (u.conj() / r, m)
}

fn nearest_on_hull(z: Complex64, hull: &[Complex64]) -> Complex64 {
    let n = hull.len();
    if n == 1 {
        return hull[0];
    }
    let mut best = (f64::INFINITY, hull[0]);
    for i in 0..n {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        let ab = b - a;
        let t = (dot(z - a, ab) / ab.norm_sqr()).clamp(0.0, 1.0);
        let p = a + ab * t;
        if (z - p).norm() < best.0 {
            best = ((z - p).norm(), p);
        }
    }
    best.1
}

/// Replay the level-curve argument: trace the level curve through `c` after
/// normalization and show that each horizontal line `Im = s` to the right of
/// the disk meets it at most once, the product of distances to the zeros
/// increasing strictly along the line.
pub fn replay_level_curve_argument(zeros: &[Complex64], c: Complex64, tol: &Tolerances) -> Result<Replay> {
    if zeros.is_empty() {
        return Err(Error::Precondition("no zeros".into()));
    }
    let hull = convex_hull(zeros);
    let scale = zeros.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let sd = signed_distance(c, &hull, tol.hull * scale);
    if sd <= tol.hull * scale {
        return Ok(Replay::NotApplicable { signed_distance: sd });
    }
    let (a, b) = normalization(zeros, c, &hull);
    let nz: Vec<Complex64> = zeros.iter().map(|w| a * (w - b)).collect();
    let nc = a * (c - b);
    let prod = |z: Complex64| nz.iter().map(|w| (z - w).norm()).product::<f64>();
    let q = RationalFn::polynomial(Polynomial::from_roots(&nz))?;
    let level = q.modulus(nc);
    let tracer = Tracer::new(&q, level, DomainSpec::WholePlane, TraceOptions::with_tol(*tol))?;
    let comp = tracer.trace_component(nc)?;

    let mut lines = Vec::new();
    let mut max_cross = 0;
    let mut holds = true;
    for k in 1..20 {
        for s in [k as f64 / 20.0, -(k as f64) / 20.0] {
            let mut crossings = Vec::new();
            for arc in &comp.arcs {
                for w in arc.points.windows(2) {
                    let (p0, p1) = (w[0], w[1]);
                    if (p0.im - s) * (p1.im - s) < 0.0 || (p1.im == s && p0.im != s) {
                        let t = (s - p0.im) / (p1.im - p0.im);
                        let x = p0 + (p1 - p0) * t;
                        if x.re > 1.0 {
                            crossings.push(x);
                        }
                    }
                }
            }
            if crossings.is_empty() {
                continue;
            }
            crossings.sort_by(|x, y| x.re.total_cmp(&y.re));
            max_cross = max_cross.max(crossings.len());
            let z1 = crossings[0];
            let z2 = z1 + Complex64::new(0.25, 0.0);
            let (prod1, prod2) = (prod(z1), prod(z2));
            holds &= prod1 < prod2;
            lines.push(LineWitness { s, crossings, z1, z2, prod1, prod2 });
        }
    }
    holds &= max_cross <= 1 && !lines.is_empty();
    Ok(Replay::Witness {
        normalized_zeros: nz,
        normalized_c: nc,
        level,
        lines,
        max_crossings_per_line: max_cross,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cubic_inside() {
        let p = Polynomial::from_roots(&[c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let r = check_gauss_lucas(&p, &Tolerances::default()).unwrap();
        assert!(r.max_signed_distance < 0.0);
        assert_eq!(r.hull.len(), 2);
    }

    #[test]
    fn power_degenerate_hull() {
        let p = Polynomial::from_roots(&[c(0.0, 0.0); 4]);
        let r = check_gauss_lucas(&p, &Tolerances::default()).unwrap();
        assert!(r.max_signed_distance.abs() <= 1e-8);
    }

    #[test]
    fn pentagon() {
        let p = Polynomial::new(vec![c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let r = check_gauss_lucas(&p, &Tolerances::default()).unwrap();
        assert_eq!(r.hull.len(), 5);
        assert!(r.max_signed_distance < -0.5);
    }

    #[test]
    fn replay_outside() {
        let zeros = [c(0.3, 0.1), c(-0.5, 0.2), c(0.1, -0.6)];
        match replay_level_curve_argument(&zeros, c(2.0, 0.0), &Tolerances::default()).unwrap() {
            Replay::Witness { holds, max_crossings_per_line, .. } => {
                assert!(holds);
                assert_eq!(max_crossings_per_line, 1);
            }
            r => panic!("{r:?}"),
        }
        let cubic = [c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let crit = c(1.0 / 3f64.sqrt(), 0.0);
        assert!(matches!(
            replay_level_curve_argument(&cubic, crit, &Tolerances::default()).unwrap(),
            Replay::NotApplicable { .. }
        ));
    }
}
