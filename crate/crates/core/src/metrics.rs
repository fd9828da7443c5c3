//! Hausdorff-style distance between point sets and the level-set continuity probe.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::geom::SegmentIndex;
use crate::tracer::{on_traced, LevelCurveComponent, TraceOptions, Tracer};
use crate::{DomainSpec, RationalFn, Result};

/// Serialize a possibly infinite distance; infinity becomes the string `"inf"`.
pub fn ser_dist<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HausdorffReport {
    #[serde(serialize_with = "ser_dist")]
    pub d1: f64,
    #[serde(serialize_with = "ser_dist")]
    pub d2: f64,
    #[serde(serialize_with = "ser_dist")]
    pub d_check: f64,
}

impl HausdorffReport {
    fn new(d1: f64, d2: f64) -> Self {
        Self { d1, d2, d_check: d1.max(d2) }
    }
}

fn one_sided_brute(x: &[Complex64], y: &[Complex64]) -> f64 {
    if x.is_empty() || y.is_empty() {
        return f64::INFINITY;
    }
    x.iter()
        .map(|&p| y.iter().map(|&q| (p - q).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn one_sided(x: &[Complex64], y: &[Complex64]) -> f64 {
    if x.is_empty() || y.is_empty() {
        return f64::INFINITY;
    }
    let idx = SegmentIndex::new(y.iter().map(|&q| (q, q)).collect());
    x.par_iter().map(|&p| idx.distance(p)).reduce(|| 0.0, f64::max)
}

/// Double-loop reference implementation.
pub fn hausdorff_brute(x: &[Complex64], y: &[Complex64]) -> HausdorffReport {
    HausdorffReport::new(one_sided_brute(x, y), one_sided_brute(y, x))
}

/// Grid-accelerated; returns the same values as [`hausdorff_brute`].
pub fn hausdorff(x: &[Complex64], y: &[Complex64]) -> HausdorffReport {
    HausdorffReport::new(one_sided(x, y), one_sided(y, x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuitySample {
    pub zeta: f64,
    #[serde(serialize_with = "ser_dist")]
    pub d_check: f64,
    pub curves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityCertificate {
    pub eps: f64,
    pub delta: f64,
    pub eta: f64,
    pub samples: Vec<ContinuitySample>,
    pub pass: bool,
    /// Largest polyline step involved; bounds the sampling error of `d_check`.
    pub discretization: f64,
}

/// Sample heights per trial on each side of `eps`.
pub const SAMPLES_PER_SIDE: usize = 8;

struct Trial {
    samples: Vec<ContinuitySample>,
    discretization: f64,
}

impl Trial {
    fn passes(&self, delta: f64) -> bool {
        self.samples.iter().all(|s| s.d_check < delta)
    }
}

/// Seeds for the nearby level curves: edge midpoints and small offsets along the normal.
fn probe_seeds(f: &RationalFn, comp: &LevelCurveComponent, delta: f64) -> Vec<Complex64> {
    let mut seeds = Vec::new();
    for a in &comp.arcs {
        let inner = a.interior();
        if inner.is_empty() {
            continue;
        }
        for frac in [0.5, 0.25, 0.75] {
            let m = inner[((inner.len() as f64 * frac) as usize).min(inner.len() - 1)];
            let g = f.log_derivative(m).conj();
            let nrm = if g.norm() > 0.0 { g / g.norm() } else { Complex64::new(0.0, 0.0) };
            seeds.push(m);
            for s in [0.05, 0.25] {
                seeds.push(m + nrm * (s * delta));
                seeds.push(m - nrm * (s * delta));
            }
        }
    }
    seeds
}

fn run_trial(
    f: &RationalFn,
    comp: &LevelCurveComponent,
    domain: DomainSpec,
    delta: f64,
    eta: f64,
    opts: TraceOptions,
    seeds: &[Complex64],
    target: &[Complex64],
    comp_index: &SegmentIndex,
) -> Option<Trial> {
    let eps = comp.level;
    let zetas: Vec<f64> = (1..=SAMPLES_PER_SIDE)
        .flat_map(|k| {
            let d = eta * k as f64 / SAMPLES_PER_SIDE as f64;
            [eps - d, eps + d]
        })
        .collect();
    let results: Vec<Option<(ContinuitySample, f64)>> = zetas
        .par_iter()
        .map(|&zeta| {
            if !(zeta > 0.0) {
                return None;
            }
            let tracer = Tracer::new(f, zeta, domain, opts).ok()?;
            let mut curves: Vec<LevelCurveComponent> = Vec::new();
            let mut indices: Vec<SegmentIndex> = Vec::new();
            for &s in seeds {
                let Some((z, _)) = tracer.correct(s) else { continue };
                if !(comp_index.distance(z) < delta) || !domain.contains(z) {
                    continue;
                }
                if indices.iter().any(|idx| on_traced(idx, z)) {
                    continue;
                }
                let c = tracer.trace_component(z).ok()?;
                indices.push(c.segment_index());
                curves.push(c);
            }
            let pts: Vec<Complex64> = curves.iter().flat_map(|c| c.points()).collect();
            let step = curves.iter().map(LevelCurveComponent::max_step).fold(0.0, f64::max);
            let d = hausdorff(&pts, target).d_check;
            Some((ContinuitySample { zeta, d_check: d, curves: curves.len() }, step))
        })
        .collect();
    let mut samples = Vec::new();
    let mut discretization = comp.max_step();
    for r in results {
        let (s, step) = r?;
        discretization = discretization.max(step);
        samples.push(s);
    }
    Some(Trial { samples, discretization })
}

/// Search for `eta` such that level curves at every sampled height in
/// `(eps - eta, eps + eta)` stay within `delta` of `comp`.
pub fn continuity_probe(
    f: &RationalFn,
    delta: f64,
    domain: DomainSpec,
    comp: &LevelCurveComponent,
    opts: TraceOptions,
) -> Result<ContinuityCertificate> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(crate::Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    let eps = comp.level;
    let seeds = probe_seeds(f, comp, delta);
    let target: Vec<Complex64> = comp.points().collect();
    let comp_index = comp.segment_index();
    let trial = |eta: f64| run_trial(f, comp, domain, delta, eta, opts, &seeds, &target, &comp_index);

    let eta0 = eps / 2.0;
    let floor = 1e-9 * eps;
    let mut eta = eta0;
    let mut best: Option<(f64, Trial)> = None;
    let mut last_fail: Option<(f64, Trial)> = None;
    while eta >= floor {
        match trial(eta) {
            Some(t) if t.passes(delta) => {
                best = Some((eta, t));
                break;
            }
            t => {
                if let Some(t) = t {
                    last_fail = Some((eta, t));
                }
                eta *= 0.5;
            }
        }
    }
    let Some((mut lo, mut lo_trial)) = best else {
        let (eta, t) = last_fail.unwrap_or((
            floor,
            Trial { samples: Vec::new(), discretization: comp.max_step() },
        ));
        return Ok(ContinuityCertificate {
            eps,
            delta,
            eta,
            samples: t.samples,
            pass: false,
            discretization: t.discretization,
        });
    };
    if lo < eta0 {
        let mut hi = 2.0 * lo;
        for _ in 0..8 {
            let mid = 0.5 * (lo + hi);
            match trial(mid) {
                Some(t) if t.passes(delta) => {
                    lo = mid;
                    lo_trial = t;
                }
                _ => hi = mid,
            }
        }
    }
    Ok(ContinuityCertificate {
        eps,
        delta,
        eta: lo,
        pass: lo_trial.passes(delta),
        samples: lo_trial.samples,
        discretization: lo_trial.discretization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(r: f64, n: usize) -> Vec<Complex64> {
        (0..n).map(|k| Complex64::from_polar(r, 2.0 * PI * k as f64 / n as f64)).collect()
    }

    #[test]
    fn identity_and_empty() {
        let x = circle(1.0, 50);
        assert_eq!(hausdorff(&x, &x).d_check, 0.0);
        let r = hausdorff(&[], &[Complex64::new(0.0, 0.0)]);
        assert!(r.d_check.is_infinite());
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"d1":"inf","d2":"inf","d_check":"inf"}"#);
    }

    #[test]
    fn concentric_circles() {
        let (x, y) = (circle(1.0, 1000), circle(1.1, 1000));
        let r = hausdorff(&x, &y);
        assert!(r.d_check >= 0.1 - 1e-12 && r.d_check <= 0.1 + 2.0 * PI / 1000.0);
        assert_eq!(r, hausdorff_brute(&x, &y));
    }
}
