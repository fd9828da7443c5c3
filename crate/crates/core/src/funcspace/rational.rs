use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::domain::DomainSpec;
use super::poly::Polynomial;
use super::roots::{find_roots, sort_roots, Root};
use crate::{Error, Result};

/// A value on the Riemann sphere: finite, or the point at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Finite(Complex64),
    Infinity,
}

impl Value {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            Value::Finite(z) => Some(z),
            Value::Infinity => None,
        }
    }

    pub fn modulus(self) -> f64 {
        match self {
            Value::Finite(z) => z.norm(),
            Value::Infinity => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Value::Infinity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FnKind {
    Polynomial,
    Rational,
    Blaschke,
}

/// `f = numerator / denominator` in lowest terms, with its distinguished points.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct RationalFn {
    kind: FnKind,
    num: Polynomial,
    den: Polynomial,
    crit_numerator: Polynomial,
    zeros: Vec<Root>,
    poles: Vec<Root>,
    critical: Vec<Root>,
    blaschke: Option<(Vec<Complex64>, Vec<Complex64>)>,
}

impl RationalFn {
    pub fn polynomial(p: Polynomial) -> Result<Self> {
        Self::build(FnKind::Polynomial, p, Polynomial::one(), None, None)
    }

    /// `num / den`, with common roots cancelled.
    pub fn ratio(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        if num.is_zero() {
            return Err(Error::InvalidInput("f is identically zero".into()));
        }
        let (num, den) = cancel_common(num, den)?;
        if den.degree() == Some(0) {
            let p = num.scale(Complex64::new(1.0, 0.0) / den.leading());
            return Self::build(FnKind::Rational, p, Polynomial::one(), None, None);
        }
        Self::build(FnKind::Rational, num, den, None, None)
    }

    /// `B1 / B2` where `B1`, `B2` are finite Blaschke products with the given zeros.
    pub fn blaschke_ratio(zeros1: &[Complex64], zeros2: &[Complex64]) -> Result<Self> {
        for a in zeros1.iter().chain(zeros2) {
            if !(a.norm() < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "Blaschke zero {a} is not inside the unit disk"
                )));
            }
        }
        if zeros1.len() == zeros2.len() {
            return Err(Error::InvalidInput(
                "deg(B1) = deg(B2): a level curve of f meets the unit circle".into(),
            ));
        }
        // Identical factors cancel between B1 and B2.
        let mut a: Vec<Complex64> = zeros1.to_vec();
        let mut b: Vec<Complex64> = Vec::new();
        for &w in zeros2 {
            if let Some(k) = a.iter().position(|&z| (z - w).norm() <= 1e-14) {
                a.remove(k);
            } else {
                b.push(w);
            }
        }
        let one = Complex64::new(1.0, 0.0);
        let mut num = Polynomial::one();
        let mut den = Polynomial::one();
        let mut zeros = Vec::new();
        let mut poles = Vec::new();
        for &z in &a {
            num = num.mul(&Polynomial::new(vec![-z, one]));
            den = den.mul(&Polynomial::new(vec![one, -z.conj()]));
            zeros.push(z);
            if z.norm() > 0.0 {
                poles.push(one / z.conj());
            }
        }
        for &w in &b {
            num = num.mul(&Polynomial::new(vec![one, -w.conj()]));
            den = den.mul(&Polynomial::new(vec![-w, one]));
            poles.push(w);
            if w.norm() > 0.0 {
                zeros.push(one / w.conj());
            }
        }
        Self::build(
            FnKind::Blaschke,
            num,
            den,
            Some((group_points(&zeros), group_points(&poles))),
            Some((zeros1.to_vec(), zeros2.to_vec())),
        )
    }

    fn build(
        kind: FnKind,
        num: Polynomial,
        den: Polynomial,
        known: Option<(Vec<Root>, Vec<Root>)>,
        blaschke: Option<(Vec<Complex64>, Vec<Complex64>)>,
    ) -> Result<Self> {
        if num.is_zero() {
            return Err(Error::InvalidInput("f is identically zero".into()));
        }
        let dnum = num.derivative();
        let dden = den.derivative();
        let w = trim_cancelled(dnum.mul(&den).sub(&num.mul(&dden)), &num, &den);
        if w.is_zero() {
            return Err(Error::InvalidInput("f is constant".into()));
        }
        let (zeros, poles) = match known {
            Some(zp) => zp,
            None => (find_roots(&num)?, find_roots(&den)?),
        };
        let w_roots = if w.degree() == Some(0) { Vec::new() } else { find_roots(&w)? };
        // A pole of order k is a root of W of order k-1; it is not a critical point.
        let scale = w_roots.iter().map(|r| r.z.norm()).fold(1.0, f64::max);
        let mut critical = Vec::new();
        for r in w_roots {
            let pole_mult = poles
                .iter()
                .find(|p| (p.z - r.z).norm() <= 1e-6 * scale.max(p.z.norm()))
                .map(|p| p.mult);
            match pole_mult {
                Some(k) => {
                    let drop = (k - 1).min(r.mult);
                    if r.mult > drop {
                        critical.push(Root { z: r.z, mult: r.mult - drop });
                    }
                }
                None => critical.push(r),
            }
        }
        sort_roots(&mut critical);
        Ok(Self {
            kind,
            num,
            den,
            crit_numerator: w,
            zeros,
            poles,
            critical,
            blaschke,
        })
    }

    pub fn kind(&self) -> FnKind {
        self.kind
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.degree() == Some(0)
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.den
    }

    /// `N'D - ND'` with numerically cancelled leading terms trimmed.
    pub fn derivative_numerator(&self) -> &Polynomial {
        &self.crit_numerator
    }

    /// Zeros of `B1` and `B2` for a Blaschke ratio.
    pub fn blaschke_params(&self) -> Option<(&[Complex64], &[Complex64])> {
        self.blaschke.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()))
    }

    /// `deg N - deg D`: the order of `f` at infinity, negated.
    pub fn degree_at_infinity(&self) -> i64 {
        self.num.degree().unwrap_or(0) as i64 - self.den.degree().unwrap_or(0) as i64
    }

    pub fn eval(&self, z: Complex64) -> Value {
        let n = self.num.eval(z);
        let d = self.den.eval(z);
        if d.norm() == 0.0 {
            return Value::Infinity;
        }
        let q = n / d;
        if q.is_finite() {
            Value::Finite(q)
        } else {
            // Overflow: evaluate the reciprocal instead.
            let r = d / n;
            if r.is_finite() && r.norm() > 0.0 {
                Value::Finite(Complex64::new(1.0, 0.0) / r)
            } else {
                Value::Infinity
            }
        }
    }

    pub fn eval_derivative(&self, z: Complex64) -> Value {
        let (n, dn) = self.num.eval_with_derivative(z);
        let (d, dd) = self.den.eval_with_derivative(z);
        if d.norm() == 0.0 {
            return Value::Infinity;
        }
        let v = (dn * d - n * dd) / (d * d);
        if v.is_finite() {
            Value::Finite(v)
        } else {
            Value::Infinity
        }
    }

    /// `|f(z)|`, infinite at poles.
    pub fn modulus(&self, z: Complex64) -> f64 {
        self.eval(z).modulus()
    }

    /// `ln|f(z)| = ln|N(z)| - ln|D(z)|`; finite away from zeros and poles.
    pub fn log_modulus(&self, z: Complex64) -> f64 {
        self.num.eval(z).norm().ln() - self.den.eval(z).norm().ln()
    }

    /// `f'/f = N'/N - D'/D`.
    pub fn log_derivative(&self, z: Complex64) -> Complex64 {
        let (n, dn) = self.num.eval_with_derivative(z);
        if self.is_polynomial() {
            return dn / n;
        }
        let (d, dd) = self.den.eval_with_derivative(z);
        dn / n - dd / d
    }

    /// `ln|f|` and `f'/f` together (one Horner pass each for N and D).
    pub fn log_pair(&self, z: Complex64) -> (f64, Complex64) {
        let (n, dn) = self.num.eval_with_derivative(z);
        if self.is_polynomial() {
            let d = self.den.leading();
            return (n.norm().ln() - d.norm().ln(), dn / n);
        }
        let (d, dd) = self.den.eval_with_derivative(z);
        (n.norm().ln() - d.norm().ln(), dn / n - dd / d)
    }

    /// `arg f(z)` in `(-pi, pi]`.
    pub fn arg(&self, z: Complex64) -> f64 {
        (self.num.eval(z) / self.den.eval(z)).arg()
    }

    /// Taylor coefficients of `f` about a non-pole `c`, up to `order`.
    pub fn taylor_at(&self, c: Complex64, order: usize) -> Vec<Complex64> {
        let n = self.num.taylor_at(c);
        let d = self.den.taylor_at(c);
        let zero = Complex64::new(0.0, 0.0);
        let get = |v: &[Complex64], k: usize| v.get(k).copied().unwrap_or(zero);
        let d0 = get(&d, 0);
        let mut out: Vec<Complex64> = Vec::with_capacity(order + 1);
        for k in 0..=order {
            let mut acc = get(&n, k);
            for j in 1..=k {
                acc -= get(&d, j) * out[k - j];
            }
            out.push(acc / d0);
        }
        out
    }

    pub fn zeros(&self) -> &[Root] {
        &self.zeros
    }

    pub fn poles(&self) -> &[Root] {
        &self.poles
    }

    /// Zeros of `f'` that are not poles of `f`, with multiplicity.
    pub fn critical_points(&self) -> &[Root] {
        &self.critical
    }

    pub fn zeros_and_poles(&self, domain: &DomainSpec) -> (Vec<Root>, Vec<Root>) {
        (
            self.zeros.iter().copied().filter(|r| domain.contains(r.z)).collect(),
            self.poles.iter().copied().filter(|r| domain.contains(r.z)).collect(),
        )
    }

    /// Critical points in `domain`, leaving out those within root accuracy of its boundary.
    pub fn critical_points_in(&self, domain: &DomainSpec) -> Vec<Root> {
        self.critical
            .iter()
            .copied()
            .filter(|r| domain.contains(r.z) && domain.boundary_distance(r.z) > 1e-8)
            .collect()
    }

    /// Critical points in `domain` whose value is neither 0 nor infinity.
    pub fn proper_critical_points(&self, domain: &DomainSpec) -> Vec<Root> {
        self.critical_points_in(domain)
            .into_iter()
            .filter(|r| {
                let m = self.modulus(r.z);
                m.is_finite() && m > 0.0 && !self.is_zero_or_pole(r.z)
            })
            .collect()
    }

    fn is_zero_or_pole(&self, z: Complex64) -> bool {
        let scale = z.norm().max(1.0);
        self.zeros
            .iter()
            .chain(&self.poles)
            .any(|r| (r.z - z).norm() <= 1e-9 * scale)
    }

    /// Size of the region holding every distinguished point, at least 1.
    pub fn feature_scale(&self) -> f64 {
        self.zeros
            .iter()
            .chain(&self.poles)
            .chain(&self.critical)
            .map(|r| r.z.norm())
            .fold(1.0, f64::max)
    }

    /// Distinguished points: zeros, poles and critical points.
    pub fn feature_points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.zeros
            .iter()
            .chain(&self.poles)
            .chain(&self.critical)
            .map(|r| r.z)
    }
}

/// Drop leading coefficients of `N'D - ND'` that are only cancellation noise.
fn trim_cancelled(w: Polynomial, num: &Polynomial, den: &Polynomial) -> Polynomial {
    let noise = 64.0 * f64::EPSILON * num.coeff_scale() * den.coeff_scale()
        * (num.coeffs().len() + den.coeffs().len()) as f64;
    let mut c = w.coeffs().to_vec();
    while c.last().is_some_and(|x| x.norm() <= noise) {
        c.pop();
    }
    Polynomial::new(c)
}

fn cancel_common(mut num: Polynomial, mut den: Polynomial) -> Result<(Polynomial, Polynomial)> {
    loop {
        if num.degree() == Some(0) || den.degree() == Some(0) {
            return Ok((num, den));
        }
        let rn = find_roots(&num)?;
        let rd = find_roots(&den)?;
        let scale = rn.iter().chain(&rd).map(|r| r.z.norm()).fold(1.0, f64::max);
        let shared = rn.iter().find_map(|a| {
            rd.iter()
                .find(|b| (a.z - b.z).norm() < 1e-7 * scale)
                .map(|b| (a.z + b.z) / 2.0)
        });
        match shared {
            Some(r) => {
                num = num.deflate(r);
                den = den.deflate(r);
            }
            None => return Ok((num, den)),
        }
    }
}

fn group_points(points: &[Complex64]) -> Vec<Root> {
    let mut out: Vec<Root> = Vec::new();
    for &p in points {
        if let Some(r) = out.iter_mut().find(|r| (r.z - p).norm() <= 1e-12) {
            r.mult += 1;
        } else {
            out.push(Root { z: p, mult: 1 });
        }
    }
    sort_roots(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_rational;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        let f = parse_rational("poly:1,0,0,0,0,-1").unwrap();
        assert_eq!(f.eval(c(0.0, 0.0)), Value::Finite(c(-1.0, 0.0)));
        let g = parse_rational("poly:1,0,0").unwrap();
        assert_eq!(g.eval(c(1.0, 1.0)), Value::Finite(c(0.0, 2.0)));
        let h = parse_rational("rat:1/1,0").unwrap();
        assert_eq!(h.eval(c(0.0, 0.0)), Value::Infinity);
        assert_eq!(h.eval_derivative(c(0.0, 0.0)), Value::Infinity);
    }

    #[test]
    fn blaschke_factor_has_unit_modulus_on_circle() {
        // (z - 1/2) / (1 - z/2)
        let f = RationalFn::blaschke_ratio(&[c(0.5, 0.0)], &[]).unwrap();
        for k in 0..8 {
            let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 8.0 + 0.1);
            assert!((f.modulus(z) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_examples() {
        let f = parse_rational("poly:1,0,0,0,0,-1").unwrap();
        assert_eq!(f.eval_derivative(c(1.0, 0.0)), Value::Finite(c(5.0, 0.0)));
        let g = parse_rational("poly:1,0,0").unwrap();
        assert_eq!(g.eval_derivative(c(0.0, 0.0)), Value::Finite(c(0.0, 0.0)));
    }

    #[test]
    fn derivative_matches_central_difference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 100 {
            let dn = rng.gen_range(1..5);
            let dd = rng.gen_range(0..4);
            let rnd = |rng: &mut rand_chacha::ChaCha8Rng, k: usize| {
                Polynomial::new((0..=k).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
            };
            let (n, d) = (rnd(&mut rng, dn), rnd(&mut rng, dd));
            let Ok(f) = RationalFn::ratio(n, d) else { continue };
            let z = c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            if f.poles().iter().any(|p| (p.z - z).norm() < 0.1) {
                continue;
            }
            let h = 1e-5;
            let fd = (f.eval(z + h).finite().unwrap() - f.eval(z - h).finite().unwrap()) / (2.0 * h);
            let exact = f.eval_derivative(z).finite().unwrap();
            assert!((fd - exact).norm() <= 1e-6 * (1.0 + exact.norm()), "{fd} vs {exact}");
            checked += 1;
        }
    }

    #[test]
    fn critical_point_examples() {
        let f = parse_rational("poly:1,0,0,0,0,-1").unwrap();
        assert_eq!(f.critical_points(), &[Root { z: c(0.0, 0.0), mult: 4 }]);
        let g = parse_rational("poly:1,0,-1").unwrap();
        assert_eq!(g.critical_points(), &[Root { z: c(0.0, 0.0), mult: 1 }]);
        let h = parse_rational("poly:1,0,-1,0").unwrap();
        let s = 1.0 / 3f64.sqrt();
        let crit = h.critical_points();
        assert_eq!(crit.len(), 2);
        assert!((crit[0].z - c(-s, 0.0)).norm() < 1e-12);
        assert!((crit[1].z - c(s, 0.0)).norm() < 1e-12);
        for r in crit {
            assert!(h.derivative_numerator().eval(r.z).norm() < 1e-10);
        }
    }

    #[test]
    fn zeros_and_poles_examples() {
        let f = parse_rational("poly:1,0,0,0,0,-1").unwrap();
        let (z, p) = f.zeros_and_poles(&DomainSpec::WholePlane);
        assert_eq!(z.len(), 5);
        assert!(p.is_empty());
        let g = parse_rational("rat:1/1,0").unwrap();
        let (z, p) = g.zeros_and_poles(&DomainSpec::WholePlane);
        assert!(z.is_empty());
        assert_eq!(p, vec![Root { z: c(0.0, 0.0), mult: 1 }]);
    }

    #[test]
    fn blaschke_ratio_structure() {
        let f = RationalFn::blaschke_ratio(&[c(0.3, 0.0), c(0.0, -0.4)], &[c(0.5, 0.0)]).unwrap();
        let (z, p) = f.zeros_and_poles(&DomainSpec::UnitDisk);
        let zs: Vec<Complex64> = z.iter().map(|r| r.z).collect();
        assert_eq!(zs.len(), 2);
        assert!(zs.contains(&c(0.3, 0.0)) && zs.contains(&c(0.0, -0.4)));
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].z, c(0.5, 0.0));
        // Outside the disk: 1/conj(0.5) = 2 is a zero; the B1 zeros reflect to poles.
        assert!(f.zeros().iter().any(|r| (r.z - c(2.0, 0.0)).norm() < 1e-12));
        assert!(f.poles().iter().any(|r| (r.z - c(1.0 / 0.3, 0.0)).norm() < 1e-12));
        for r in f.zeros() {
            assert!(f.modulus(r.z) < 1e-12);
        }
        for k in 0..16 {
            let w = Complex64::from_polar(1.0, k as f64 * 0.4);
            assert!((f.modulus(w) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(parse_rational("poly:3").is_err());
        assert!(parse_rational("rat:1,1/2,2").is_err());
        assert!(parse_rational("blaschke:0.5/-0.5").is_err());
        assert!(parse_rational("blaschke:1.5/").is_err());
    }

    #[test]
    fn pole_of_order_two_is_not_critical() {
        // f = 1/z^2: f' = -2/z^3 has no zeros in the plane.
        let f = parse_rational("rat:1/1,0,0").unwrap();
        assert!(f.critical_points().is_empty());
        // f = z + 1/z: critical points at +-1.
        let g = parse_rational("rat:1,0,1/1,0").unwrap();
        let cps: Vec<Complex64> = g.critical_points().iter().map(|r| r.z).collect();
        assert_eq!(cps.len(), 2);
        assert!(cps.iter().any(|z| (z - c(1.0, 0.0)).norm() < 1e-10));
    }

    #[test]
    fn cancels_common_factors() {
        // (z-1)(z+2) / ((z-1) z) = (z+2)/z
        let n = Polynomial::from_roots(&[c(1.0, 0.0), c(-2.0, 0.0)]);
        let d = Polynomial::from_roots(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let f = RationalFn::ratio(n, d).unwrap();
        assert_eq!(f.zeros().len(), 1);
        assert_eq!(f.poles().len(), 1);
        assert!((f.zeros()[0].z - c(-2.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn taylor_coefficients_of_rational() {
        let f = parse_rational("rat:1,0,1/1,0").unwrap();
        let z0 = c(0.7, 0.2);
        let t = f.taylor_at(z0, 3);
        assert!((t[0] - f.eval(z0).finite().unwrap()).norm() < 1e-13);
        assert!((t[1] - f.eval_derivative(z0).finite().unwrap()).norm() < 1e-12);
    }
}
