//! Grid oracle for level sets: marching squares on `ln|f| - ln eps` and a
//! flood-fill count of the complementary regions. Independent of the tracer.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::geom::{BBox, SegmentIndex};
use crate::metrics::ser_dist;
use crate::tracer::LevelCurveComponent;
use crate::{DomainSpec, RationalFn};

/// Samples of `ln|f| - ln eps` on an `(n+1) x (n+1)` node lattice.
pub struct Raster<'a> {
    f: &'a RationalFn,
    log_level: f64,
    pub bbox: BBox,
    pub n: usize,
    values: Vec<f64>,
}

// Values at poles and zeros are clamped so interpolation stays finite.
const CLAMP: f64 = 700.0;

impl<'a> Raster<'a> {
    pub fn sample(f: &'a RationalFn, eps: f64, bbox: BBox, n: usize) -> Self {
        let mut r = Raster {
            f,
            log_level: eps.ln(),
            bbox,
            n,
            values: Vec::with_capacity((n + 1) * (n + 1)),
        };
        for j in 0..=n {
            for i in 0..=n {
                let v = r.g(r.node(i, j));
                r.values.push(v);
            }
        }
        r
    }

    fn g(&self, z: Complex64) -> f64 {
        let v = self.f.log_modulus(z) - self.log_level;
        if v.is_nan() {
            0.0
        } else {
            v.clamp(-CLAMP, CLAMP)
        }
    }

    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(
            self.bbox.min.re + self.bbox.width() * i as f64 / self.n as f64,
            self.bbox.min.im + self.bbox.height() * j as f64 / self.n as f64,
        )
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.n + 1) + i]
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.bbox.diameter() / self.n as f64
    }

    fn cut(&self, a: (usize, usize), b: (usize, usize)) -> Complex64 {
        let (va, vb) = (self.value(a.0, a.1), self.value(b.0, b.1));
        let t = (va / (va - vb)).clamp(0.0, 1.0);
        let (za, zb) = (self.node(a.0, a.1), self.node(b.0, b.1));
        za + (zb - za) * t
    }

    /// Contour segments, saddle cells resolved by the cell-center sample.
    pub fn segments(&self) -> Vec<(Complex64, Complex64)> {
        let mut out = Vec::new();
        for j in 0..self.n {
            for i in 0..self.n {
                let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let inside = |k: usize| self.value(c[k].0, c[k].1) > 0.0;
                let case = (0..4).fold(0u8, |acc, k| acc | (u8::from(inside(k)) << k));
                let e = |k: usize| self.cut(c[k], c[(k + 1) % 4]);
                match case {
                    0 | 15 => {}
                    1 | 14 => out.push((e(3), e(0))),
                    2 | 13 => out.push((e(0), e(1))),
                    3 | 12 => out.push((e(3), e(1))),
                    4 | 11 => out.push((e(1), e(2))),
                    6 | 9 => out.push((e(0), e(2))),
                    7 | 8 => out.push((e(2), e(3))),
                    5 | 10 => {
                        let center = self.g((self.node(i, j) + self.node(i + 1, j + 1)) * 0.5) > 0.0;
                        if center == (case == 5) {
                            out.push((e(3), e(2)));
                            out.push((e(0), e(1)));
                        } else {
                            out.push((e(3), e(0)));
                            out.push((e(1), e(2)));
                        }
                    }
                    _ => unreachable!(),
                }
            }
        }
        out
    }

    /// Segment endpoints: the lattice-edge crossings of the level set.
    pub fn crossings(&self) -> Vec<Complex64> {
        self.segments().into_iter().flat_map(|(a, b)| [a, b]).collect()
    }

    /// Whether the straight segment between adjacent nodes stays on one side.
    fn joined(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        let (va, vb) = (self.value(a.0, a.1), self.value(b.0, b.1));
        if (va > 0.0) != (vb > 0.0) {
            return false;
        }
        let (za, zb) = (self.node(a.0, a.1), self.node(b.0, b.1));
        let h = (zb - za).norm();
        let slope = self.f.log_derivative(za).norm().max(self.f.log_derivative(zb).norm());
        if va.abs().min(vb.abs()) > 2.0 * h * slope {
            return true;
        }
        (1..64).all(|k| (self.g(za + (zb - za) * (k as f64 / 64.0)) > 0.0) == (va > 0.0))
    }

    /// Connected regions of the complement of the level set with at least
    /// `min_nodes` lattice nodes (smaller fragments are sampling artifacts).
    pub fn region_count(&self, min_nodes: usize) -> usize {
        let m = self.n + 1;
        let mut label = vec![usize::MAX; m * m];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..m * m {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = s;
            stack.push(s);
            let mut size = 0;
            while let Some(k) = stack.pop() {
                size += 1;
                let (i, j) = (k % m, k / m);
                let mut nb = Vec::with_capacity(4);
                if i > 0 {
                    nb.push((i - 1, j));
                }
                if i + 1 < m {
                    nb.push((i + 1, j));
                }
                if j > 0 {
                    nb.push((i, j - 1));
                }
                if j + 1 < m {
                    nb.push((i, j + 1));
                }
                for (a, b) in nb {
                    let q = b * m + a;
                    if label[q] == usize::MAX && self.joined((i, j), (a, b)) {
                        label[q] = s;
                        stack.push(q);
                    }
                }
            }
            if size >= min_nodes {
                count += 1;
            }
        }
        count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridAgreement {
    pub n: usize,
    pub cell_diagonal: f64,
    #[serde(serialize_with = "ser_dist")]
    pub d_check: f64,
    pub pass: bool,
}

/// Rasterize a box around the traced level set and compare the
/// marching-squares contour with the traced polylines, each side's vertices
/// against the other side's segments. Passes within two cell diagonals.
pub fn grid_agreement(
    f: &RationalFn,
    eps: f64,
    domain: &DomainSpec,
    comps: &[LevelCurveComponent],
    n: usize,
) -> GridAgreement {
    let traced: Vec<Complex64> = comps.iter().flat_map(|c| c.points()).collect();
    let mut bbox = if traced.is_empty() { BBox::of(f.feature_points().collect::<Vec<_>>().iter()) } else { BBox::of(&traced) };
    if bbox.is_empty() {
        bbox = BBox { min: Complex64::new(-1.0, -1.0), max: Complex64::new(1.0, 1.0) };
    }
    let bbox = bbox.expand(0.1 * bbox.diameter().max(1e-3 * f.feature_scale()).max(1e-9));
    let r = Raster::sample(f, eps, bbox, n);
    let grid: Vec<(Complex64, Complex64)> =
        r.segments().into_iter().filter(|&(a, b)| domain.contains(a) && domain.contains(b)).collect();
    let d_check = match (traced.is_empty(), grid.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => {
            let grid_pts: Vec<Complex64> = grid.iter().flat_map(|&(a, b)| [a, b]).collect();
            let grid_idx = SegmentIndex::new(grid);
            let traced_idx = SegmentIndex::from_polylines(comps.iter().flat_map(|c| c.polylines()));
            let d1 = traced.par_iter().map(|&p| grid_idx.distance(p)).reduce(|| 0.0, f64::max);
            let d2 = grid_pts.par_iter().map(|&p| traced_idx.distance(p)).reduce(|| 0.0, f64::max);
            d1.max(d2)
        }
    };
    let cell_diagonal = r.cell_diagonal();
    GridAgreement { n, cell_diagonal, d_check, pass: d_check <= 2.0 * cell_diagonal }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::parse_function;

    #[test]
    fn circle_crossings() {
        let f = parse_function("poly:1,0,0").unwrap().build().unwrap();
        let b = BBox { min: Complex64::new(-3.0, -3.0), max: Complex64::new(3.0, 3.0) };
        let r = Raster::sample(&f, 4.0, b, 200);
        let pts = r.crossings();
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| (p.norm() - 2.0).abs() < r.cell_diagonal()));
        assert_eq!(r.region_count(20), 2);
    }

    #[test]
    fn petals_regions() {
        let f = parse_function("poly:1,0,0,0,0,-1").unwrap().build().unwrap();
        let b = BBox { min: Complex64::new(-1.7, -1.63), max: Complex64::new(1.61, 1.69) };
        let r = Raster::sample(&f, 1.0, b, 600);
        assert_eq!(r.region_count(20), 6);
    }

    #[test]
    fn traced_lemniscate_matches_grid() {
        use crate::tracer::{trace_level_set, TraceOptions};
        let f = parse_function("poly:1,0,-1").unwrap().build().unwrap();
        let comps = trace_level_set(&f, 1.0, DomainSpec::WholePlane, TraceOptions::default()).unwrap();
        let a = grid_agreement(&f, 1.0, &DomainSpec::WholePlane, &comps, 600);
        assert!(a.pass, "{a:?}");
        let b = grid_agreement(&f, 1.0, &DomainSpec::WholePlane, &comps[..0], 600);
        assert!(b.d_check.is_infinite());
    }
}
