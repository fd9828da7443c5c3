//! Plane geometry on polylines: distances, winding numbers, areas.

use num_complex::Complex64;

pub fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

pub fn dot(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

pub fn dist_point_segment(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (dot(p - a, ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to an open polyline (consecutive points joined).
pub fn dist_point_polyline(p: Complex64, pts: &[Complex64]) -> f64 {
    match pts {
        [] => f64::INFINITY,
        [a] => (p - a).norm(),
        _ => pts
            .windows(2)
            .map(|w| dist_point_segment(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Winding number of a closed ring around `p` (the ring is closed implicitly).
pub fn winding_number(p: Complex64, ring: &[Complex64]) -> i32 {
    let n = ring.len();
    if n < 2 {
        return 0;
    }
    let mut wn = 0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if a.im <= p.im {
            if b.im > p.im && cross(b - a, p - a) > 0.0 {
                wn += 1;
            }
        } else if b.im <= p.im && cross(b - a, p - a) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Shoelace area; positive for counterclockwise rings.
pub fn signed_area(ring: &[Complex64]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += cross(ring[i], ring[(i + 1) % n]);
    }
    0.5 * acc
}

pub fn centroid(ring: &[Complex64]) -> Complex64 {
    let a = signed_area(ring);
    let n = ring.len();
    if a.abs() < 1e-300 || n < 3 {
        return ring.iter().sum::<Complex64>() / n.max(1) as f64;
    }
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let (p, q) = (ring[i], ring[(i + 1) % n]);
        let k = cross(p, q);
        cx += (p.re + q.re) * k;
        cy += (p.im + q.im) * k;
    }
    Complex64::new(cx / (6.0 * a), cy / (6.0 * a))
}

/// Do the closed segments `ab` and `cd` intersect?
pub fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Complex64, q: Complex64, r: Complex64, v: f64| {
        v == 0.0
            && r.re >= p.re.min(q.re)
            && r.re <= p.re.max(q.re)
            && r.im >= p.im.min(q.im)
            && r.im <= p.im.max(q.im)
    };
    on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4)
}

/// Axis-aligned bounding box `(min, max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Complex64,
    pub max: Complex64,
}

impl BBox {
    pub fn empty() -> Self {
        Self {
            min: Complex64::new(f64::INFINITY, f64::INFINITY),
            max: Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn of<'a>(pts: impl IntoIterator<Item = &'a Complex64>) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.add(*p);
        }
        b
    }

    pub fn add(&mut self, p: Complex64) {
        self.min.re = self.min.re.min(p.re);
        self.min.im = self.min.im.min(p.im);
        self.max.re = self.max.re.max(p.re);
        self.max.im = self.max.im.max(p.im);
    }

    pub fn union(&self, o: &BBox) -> BBox {
        let mut b = *self;
        b.add(o.min);
        b.add(o.max);
        b
    }

    pub fn is_empty(&self) -> bool {
        self.min.re > self.max.re
    }

    pub fn width(&self) -> f64 {
        self.max.re - self.min.re
    }

    pub fn height(&self) -> f64 {
        self.max.im - self.min.im
    }

    pub fn diameter(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn center(&self) -> Complex64 {
        (self.min + self.max) / 2.0
    }

    pub fn expand(&self, margin: f64) -> BBox {
        let m = Complex64::new(margin, margin);
        BBox {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn contains(&self, p: Complex64) -> bool {
        p.re >= self.min.re && p.re <= self.max.re && p.im >= self.min.im && p.im <= self.max.im
    }

    /// Lower bound on the distance from `p` to anything inside the box.
    pub fn distance(&self, p: Complex64) -> f64 {
        let dx = (self.min.re - p.re).max(0.0).max(p.re - self.max.re);
        let dy = (self.min.im - p.im).max(0.0).max(p.im - self.max.im);
        dx.hypot(dy)
    }
}

/// Uniform-grid index over segments for nearest-distance queries.
#[derive(Debug, Clone)]
pub struct SegmentIndex {
    segs: Vec<(Complex64, Complex64)>,
    origin: Complex64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl SegmentIndex {
    pub fn new(segs: Vec<(Complex64, Complex64)>) -> Self {
        let bb = BBox::of(segs.iter().flat_map(|(a, b)| [a, b]));
        let n = segs.len().max(1);
        let span = bb.width().max(bb.height()).max(1e-12);
        let per_side = ((n as f64).sqrt().ceil() as usize).clamp(1, 512);
        let cell = span / per_side as f64;
        let nx = ((bb.width() / cell).ceil() as usize).max(1);
        let ny = ((bb.height() / cell).ceil() as usize).max(1);
        let mut idx = Self {
            segs,
            origin: if bb.is_empty() { Complex64::new(0.0, 0.0) } else { bb.min },
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for (k, &(a, b)) in idx.segs.iter().enumerate() {
            let (i0, j0) = idx.cell_of(Complex64::new(a.re.min(b.re), a.im.min(b.im)));
            let (i1, j1) = idx.cell_of(Complex64::new(a.re.max(b.re), a.im.max(b.im)));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    idx.buckets[j * nx + i].push(k as u32);
                }
            }
        }
        idx
    }

    pub fn from_polylines<'a>(lines: impl IntoIterator<Item = &'a [Complex64]>) -> Self {
        let mut segs = Vec::new();
        for l in lines {
            if l.len() == 1 {
                segs.push((l[0], l[0]));
            }
            for w in l.windows(2) {
                segs.push((w[0], w[1]));
            }
        }
        Self::new(segs)
    }

    fn cell_of(&self, p: Complex64) -> (usize, usize) {
        let i = ((p.re - self.origin.re) / self.cell).floor();
        let j = ((p.im - self.origin.im) / self.cell).floor();
        (
            (i.max(0.0) as usize).min(self.nx - 1),
            (j.max(0.0) as usize).min(self.ny - 1),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.segs.is_empty()
    }

    /// Exact distance from `p` to the nearest indexed segment.
    pub fn distance(&self, p: Complex64) -> f64 {
        self.nearest(p).map_or(f64::INFINITY, |(_, d)| d)
    }

    /// Index and distance of the nearest segment.
    pub fn nearest(&self, p: Complex64) -> Option<(usize, f64)> {
        if self.segs.is_empty() {
            return None;
        }
        let bb = BBox {
            min: self.origin,
            max: self.origin + Complex64::new(self.nx as f64 * self.cell, self.ny as f64 * self.cell),
        };
        let (ci, cj) = self.cell_of(p);
        let outside = bb.distance(p);
        let mut best: Option<(usize, f64)> = None;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            // Everything in rings >= `ring` is at least this far away.
            let reach = outside.max((ring as f64 - 1.0).max(0.0) * self.cell);
            if let Some((_, d)) = best {
                if d < reach {
                    break;
                }
            }
            let (i0, i1) = (ci.saturating_sub(ring), (ci + ring).min(self.nx - 1));
            let (j0, j1) = (cj.saturating_sub(ring), (cj + ring).min(self.ny - 1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let on_ring = i + ring == ci || i == ci + ring || j + ring == cj || j == cj + ring;
                    if !on_ring {
                        continue;
                    }
                    for &k in &self.buckets[j * self.nx + i] {
                        let (a, b) = self.segs[k as usize];
                        let d = dist_point_segment(p, a, b);
                        if best.is_none_or(|(_, bd)| d < bd) {
                            best = Some((k as usize, d));
                        }
                    }
                }
            }
        }
        best
    }

    pub fn segment(&self, k: usize) -> (Complex64, Complex64) {
        self.segs[k]
    }
}
