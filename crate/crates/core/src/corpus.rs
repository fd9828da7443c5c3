//! Seeded random inputs for corpus runs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Polynomial;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_box(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Coefficients drawn uniformly from the unit box; leading coefficient kept away from 0.
pub fn random_polynomial(rng: &mut impl Rng, degree: usize) -> Polynomial {
    let mut c: Vec<Complex64> = (0..=degree).map(|_| unit_box(rng)).collect();
    while c[degree].norm() < 0.25 {
        c[degree] = unit_box(rng);
    }
    Polynomial::new(c)
}

/// `count` polynomials with degrees uniform in `lo..=hi`.
pub fn random_polynomials(seed: u64, count: usize, lo: usize, hi: usize) -> Vec<Polynomial> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let d = r.gen_range(lo..=hi);
            random_polynomial(&mut r, d)
        })
        .collect()
}

/// Polynomial with zeros drawn from the disk of radius `radius`.
pub fn random_zeros_in_disk(rng: &mut impl Rng, degree: usize, radius: f64) -> Vec<Complex64> {
    (0..degree)
        .map(|_| Complex64::from_polar(radius * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect()
}
