//! Simultaneous polynomial root finding with multiplicity recovery.
//!
//! Roots are found by Aberth-Ehrlich iteration on the monic normalisation,
//! polished with Newton steps on the original polynomial, and then grouped
//! into clusters. A cluster is accepted as a multiple root only when the
//! low-order Taylor coefficients at its centroid vanish numerically; the
//! centroid is then refined with Newton on the `(m-1)`-th derivative, where
//! the root is simple.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use crate::{Error, Result};

const MAX_ITER: usize = 800;

/// A distinct root with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub z: Complex64,
    pub mult: usize,
}

/// All roots of `p` with multiplicities summing to `deg p`.
pub fn find_roots(p: &Polynomial) -> Result<Vec<Root>> {
    let Some(deg) = p.degree() else {
        return Err(Error::InvalidInput("roots of the zero polynomial".into()));
    };
    if deg == 0 {
        return Ok(Vec::new());
    }
    // Exact zero roots come off the bottom of the coefficient list.
    let coeffs = p.coeffs();
    let zero_mult = coeffs.iter().take_while(|c| c.norm() == 0.0).count();
    let reduced = Polynomial::new(coeffs[zero_mult..].to_vec());

    let mut raw = if reduced.degree().unwrap_or(0) > 0 {
        aberth(&reduced)?
    } else {
        Vec::new()
    };
    for z in raw.iter_mut() {
        *z = polish(&reduced, *z);
    }

    let scale = raw.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut roots = cluster(&reduced, &raw, scale);
    if zero_mult > 0 {
        roots.push(Root {
            z: Complex64::new(0.0, 0.0),
            mult: zero_mult,
        });
    }
    sort_roots(&mut roots);

    let total: usize = roots.iter().map(|r| r.mult).sum();
    debug_assert_eq!(total, deg);
    let worst = roots
        .iter()
        .map(|r| residual(p, r.z) / residual_tolerance(p, r.z))
        .fold(0.0, f64::max);
    if !(worst <= 1.0) {
        return Err(Error::RootFinding {
            degree: deg,
            residual: worst,
        });
    }
    Ok(roots)
}

/// Deterministic order: by real part, then imaginary part.
pub fn sort_roots(roots: &mut [Root]) {
    roots.sort_by(|a, b| {
        a.z.re
            .partial_cmp(&b.z.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.z.im.partial_cmp(&b.z.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

pub fn residual(p: &Polynomial, z: Complex64) -> f64 {
    p.eval(z).norm()
}

/// `1e-9 (1 + coefficient scale)`, raised to the rounding floor of Horner at `z`.
pub fn residual_tolerance(p: &Polynomial, z: Complex64) -> f64 {
    (1e-9 * (1.0 + p.coeff_scale())).max(1e-12 * p.abs_eval(z))
}

fn aberth(p: &Polynomial) -> Result<Vec<Complex64>> {
    let monic = p.monic();
    let n = monic.degree().unwrap_or(0);
    let c = monic.coeffs();
    // Initial radius from the Fujiwara bound and the geometric mean of the roots.
    let fujiwara = (0..n)
        .map(|k| {
            let ratio = c[k].norm();
            let e = (n - k) as f64;
            if k == 0 {
                2.0 * (ratio / 2.0).powf(1.0 / e)
            } else {
                2.0 * ratio.powf(1.0 / e)
            }
        })
        .fold(0.0, f64::max);
    let geo = c[0].norm().powf(1.0 / n as f64);
    let radius = if geo > 0.0 { geo.min(fujiwara).max(1e-3) } else { fujiwara.max(1e-3) };

    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    let mut converged = vec![false; n];
    for _ in 0..MAX_ITER {
        let mut all = true;
        for i in 0..n {
            if converged[i] {
                continue;
            }
            let (v, dv) = monic.eval_with_derivative(z[i]);
            if v.norm() == 0.0 {
                converged[i] = true;
                continue;
            }
            let ratio = v / dv;
            let mut repulsion = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > 0.0 {
                        repulsion += Complex64::new(1.0, 0.0) / d;
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.norm() > 0.0 && denom.is_finite() {
                ratio / denom
            } else {
                ratio
            };
            if !step.is_finite() {
                // Derivative vanished: nudge off the stationary point.
                let nudge = 1e-8 * (1.0 + z[i].norm());
                z[i] += Complex64::new(nudge, 1e-8);
                all = false;
                continue;
            }
            z[i] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * (1.0 + z[i].norm()) {
                converged[i] = true;
            } else {
                all = false;
            }
        }
        if all {
            break;
        }
    }
    if z.iter().any(|w| !w.is_finite()) {
        return Err(Error::RootFinding {
            degree: n,
            residual: f64::INFINITY,
        });
    }
    Ok(z)
}

fn polish(p: &Polynomial, mut z: Complex64) -> Complex64 {
    let mut best = z;
    let mut best_res = p.eval(z).norm();
    for _ in 0..6 {
        let (v, dv) = p.eval_with_derivative(z);
        if dv.norm() == 0.0 || v.norm() == 0.0 {
            break;
        }
        z -= v / dv;
        let r = p.eval(z).norm();
        if r < best_res {
            best = z;
            best_res = r;
        } else {
            break;
        }
    }
    best
}

fn cluster(p: &Polynomial, raw: &[Complex64], scale: f64) -> Vec<Root> {
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut k = i;
        while parent[k] != r {
            let next = parent[k];
            parent[k] = r;
            k = next;
        }
        r
    }
    let tight = 1e-7 * scale;
    for i in 0..n {
        for j in (i + 1)..n {
            if (raw[i] - raw[j]).norm() < tight {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    // Looser grouping, accepted only when the Taylor test confirms a multiple root.
    let loose = 1e-3 * scale;
    let mut loose_parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if (raw[i] - raw[j]).norm() < loose {
                let (a, b) = (find(&mut loose_parent, i), find(&mut loose_parent, j));
                loose_parent[a] = b;
            }
        }
    }
    let mut loose_groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut loose_parent, i);
        loose_groups.entry(r).or_default().push(i);
    }
    for members in loose_groups.values() {
        if members.len() < 2 {
            continue;
        }
        let m = members.len();
        let centroid = members.iter().map(|&i| raw[i]).sum::<Complex64>() / m as f64;
        if is_multiple_root(p, refine_multiple(p, centroid, m), m) {
            for &i in &members[1..] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, members[0]));
                parent[a] = b;
            }
        }
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups
        .values()
        .map(|members| {
            let m = members.len();
            let centroid = members.iter().map(|&i| raw[i]).sum::<Complex64>() / m as f64;
            let z = if m == 1 { raw[members[0]] } else { refine_multiple(p, centroid, m) };
            Root { z, mult: m }
        })
        .collect()
}

/// Taylor coefficients `t_0..t_{m-1}` at `c` vanish relative to their scale.
fn is_multiple_root(p: &Polynomial, c: Complex64, m: usize) -> bool {
    let t = p.taylor_at(c);
    let abs_poly = Polynomial::new(p.coeffs().iter().map(|a| Complex64::new(a.norm(), 0.0)).collect());
    let scales = abs_poly.taylor_at(Complex64::new(c.norm(), 0.0));
    (0..m).all(|k| match (t.get(k), scales.get(k)) {
        (Some(v), Some(s)) => v.norm() <= 1e-10 * s.re.max(f64::MIN_POSITIVE),
        _ => true,
    })
}

fn refine_multiple(p: &Polynomial, mut z: Complex64, m: usize) -> Complex64 {
    let mut q = p.clone();
    for _ in 0..(m - 1) {
        q = q.derivative();
    }
    for _ in 0..20 {
        let (v, dv) = q.eval_with_derivative(z);
        if dv.norm() == 0.0 {
            break;
        }
        let step = v / dv;
        z -= step;
        if step.norm() <= 4.0 * f64::EPSILON * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn roots_of_unity() {
        let p = Polynomial::from_real(&[-1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let roots = find_roots(&p).unwrap();
        assert_eq!(roots.len(), 5);
        for r in &roots {
            assert_eq!(r.mult, 1);
            assert!((r.z.norm() - 1.0).abs() < 1e-13);
            assert!((r.z.powu(5) - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_zero_root_multiplicity() {
        // 5 z^4
        let p = Polynomial::from_real(&[0.0, 0.0, 0.0, 0.0, 5.0]);
        let roots = find_roots(&p).unwrap();
        assert_eq!(roots, vec![Root { z: c(0.0, 0.0), mult: 4 }]);
    }

    #[test]
    fn closed_form_cubic_derivative() {
        // 3z^2 - 1 -> +-1/sqrt(3)
        let p = Polynomial::from_real(&[-1.0, 0.0, 3.0]);
        let roots = find_roots(&p).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert_eq!(roots.len(), 2);
        assert!((roots[0].z - c(-s, 0.0)).norm() < 1e-12);
        assert!((roots[1].z - c(s, 0.0)).norm() < 1e-12);
        for r in &roots {
            assert!(p.eval(r.z).norm() < 1e-10);
        }
    }

    #[test]
    fn recovers_nonzero_multiple_root() {
        let a = c(0.4, -0.3);
        let p = Polynomial::from_roots(&[a, a, a, c(-1.0, 0.5)]);
        let roots = find_roots(&p).unwrap();
        assert_eq!(roots.len(), 2);
        let triple = roots.iter().find(|r| r.mult == 3).expect("triple root");
        assert!((triple.z - a).norm() < 1e-9);
    }

    #[test]
    fn multiplicities_sum_to_degree() {
        let p = Polynomial::new(vec![c(0.3, 0.1), c(-0.2, 0.9), c(0.7, -0.4), c(0.1, 0.1), c(-0.5, 0.2), c(0.9, 0.0)]);
        let roots = find_roots(&p).unwrap();
        assert_eq!(roots.iter().map(|r| r.mult).sum::<usize>(), 5);
    }
}
