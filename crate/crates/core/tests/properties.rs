use std::sync::OnceLock;

use levelcurve::corpus::{random_polynomial, random_polynomials, random_zeros_in_disk, rng};
use levelcurve::funcspace::parse_function;
use levelcurve::gauss_lucas::check_gauss_lucas;
use levelcurve::geom::winding_number;
use levelcurve::levelgraph::{build_graph, LevelGraph};
use levelcurve::metrics::{hausdorff, hausdorff_brute};
use levelcurve::order::{critical_level_curves, CriticalSet};
use levelcurve::tracer::{trace_level_set, TraceOptions};
use levelcurve::{Complex64, DomainSpec, Polynomial, RationalFn, Tolerances};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Complex64> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y)| Complex64::new(x, y))
}

fn points() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(point(), 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hausdorff_is_a_pseudometric(x in points(), y in points(), z in points()) {
        let dxy = hausdorff(&x, &y).d_check;
        prop_assert_eq!(hausdorff(&x, &x).d_check, 0.0);
        prop_assert_eq!(dxy, hausdorff(&y, &x).d_check);
        let bound = hausdorff(&x, &z).d_check + hausdorff(&z, &y).d_check;
        prop_assert!(dxy <= bound + 1e-12);
    }

    #[test]
    fn accelerated_hausdorff_matches_brute_force(x in points(), y in points()) {
        let (a, b) = (hausdorff(&x, &y), hausdorff_brute(&x, &y));
        prop_assert!((a.d1 - b.d1).abs() <= 1e-12 && (a.d2 - b.d2).abs() <= 1e-12, "{:?} vs {:?}", a, b);
    }

    #[test]
    fn derivative_matches_finite_differences(seed in 0u64..10_000, z in point()) {
        let mut g = rng(seed);
        let num = random_polynomial(&mut g, 1 + (seed % 5) as usize);
        let den = random_polynomial(&mut g, (seed % 3) as usize);
        let Ok(f) = RationalFn::ratio(num, den) else { return Ok(()) };
        let z = z * 0.2;
        let h = 1e-5 * (1.0 + z.norm());
        let (Some(a), Some(b), Some(d)) = (
            f.eval(z + h).finite(),
            f.eval(z - h).finite(),
            f.eval_derivative(z).finite(),
        ) else { return Ok(()) };
        let near_pole = f.poles().iter().any(|p| (p.z - z).norm() < 0.05);
        prop_assume!(!near_pole);
        let fd = (a - b) / (2.0 * h);
        prop_assert!((fd - d).norm() <= 1e-5 * (1.0 + d.norm()), "{} vs {}", fd, d);
    }

    #[test]
    fn product_of_distances_grows_to_the_right(
        seed in 0u64..10_000,
        s in -2.0..2.0f64,
        x1 in 1.0..5.0f64,
        dx in 1e-3..5.0f64,
    ) {
        let zeros = random_zeros_in_disk(&mut rng(seed), 1 + (seed % 8) as usize, 1.0);
        let prod = |x: f64| zeros.iter().map(|w| (Complex64::new(x, s) - w).norm()).product::<f64>();
        prop_assert!(prod(x1) < prod(x1 + dx));
    }

    #[test]
    fn critical_points_lie_in_the_hull(seed in 0u64..100_000) {
        let p = random_polynomial(&mut rng(seed), 2 + (seed % 9) as usize);
        let r = check_gauss_lucas(&p, &Tolerances::default());
        prop_assert!(r.is_ok(), "{:?}", r);
    }
}

fn power(n: usize) -> RationalFn {
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    RationalFn::polynomial(Polynomial::from_real(&c)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn powers_trace_circles(n in 1usize..7, eps in 0.05..20.0f64) {
        let comps = trace_level_set(&power(n), eps, DomainSpec::WholePlane, TraceOptions::default()).unwrap();
        prop_assert_eq!(comps.len(), 1);
        let r = eps.powf(1.0 / n as f64);
        prop_assert!(comps[0].points().all(|p| (p.norm() - r).abs() <= 1e-6 * r.max(1.0)));
    }

    #[test]
    fn traced_points_sit_on_the_level(seed in 0u64..10_000, t in 0.05..3.0f64) {
        let f = RationalFn::polynomial(random_polynomial(&mut rng(seed), 2 + (seed % 5) as usize)).unwrap();
        let tol = Tolerances::default().trace;
        let scale = f.numerator().coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let eps = t * scale;
        let comps = trace_level_set(&f, eps, DomainSpec::WholePlane, TraceOptions::default()).unwrap();
        for c in &comps {
            for p in c.points() {
                prop_assert!((f.modulus(p) - eps).abs() <= tol * eps.max(1.0));
            }
            let g = build_graph(c).unwrap();
            prop_assert!(g.check_invariants().is_ok());
        }
    }
}

fn petals() -> &'static (RationalFn, LevelGraph) {
    static G: OnceLock<(RationalFn, LevelGraph)> = OnceLock::new();
    G.get_or_init(|| {
        let f = parse_function("poly:1,0,0,0,0,-1").unwrap().build().unwrap();
        let comps = trace_level_set(&f, 1.0, DomainSpec::WholePlane, TraceOptions::default()).unwrap();
        let g = build_graph(&comps[0]).unwrap();
        (f, g)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn face_of_point_agrees_with_rings_and_modulus(x in -1.6..1.6f64, y in -1.6..1.6f64) {
        let (f, g) = petals();
        let z = Complex64::new(x, y);
        prop_assume!(g.distance(z) > 1e-6);
        let face = g.face_of_point(z, 1e-9).unwrap();
        let inside: Vec<usize> = g
            .bounded_faces()
            .filter(|fc| winding_number(z, fc.ring()) != 0)
            .map(|fc| fc.id)
            .collect();
        if g.faces[face].bounded {
            prop_assert_eq!(inside, vec![face]);
            prop_assert!(f.modulus(z) < 1.0);
        } else {
            prop_assert!(inside.is_empty());
            prop_assert!(f.modulus(z) > 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn nesting_is_a_partial_order_with_one_top(seed in 0u64..1000) {
        let p = random_polynomials(seed, 1, 3, 6).remove(0);
        let f = RationalFn::polynomial(p).unwrap();
        let set = critical_level_curves(&f, DomainSpec::WholePlane, TraceOptions::default()).unwrap();
        let rel = set.relation(&f, 1e-9).unwrap();
        let n = rel.len();
        for a in 0..n {
            prop_assert!(!rel[a][a]);
            for b in 0..n {
                prop_assert!(!(rel[a][b] && rel[b][a]));
                for c in 0..n {
                    prop_assert!(!(rel[a][b] && rel[b][c]) || rel[a][c]);
                }
            }
        }
        let top: Vec<usize> = (0..n).filter(|&a| (0..n).all(|b| !rel[a][b])).collect();
        prop_assert_eq!(top.len(), 1);
        prop_assert_eq!(set.maximal(&rel).unwrap(), top[0]);
        // Every other member sits below the top one.
        prop_assert!((0..n).filter(|&a| a != top[0]).all(|a| rel[a][top[0]]));
        prop_assert!(CriticalSet::check_partial_order(&rel).is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn decomposition_certifies_every_region(seed in 0u64..1000) {
        use levelcurve::annulus::{decompose, DecomposeOptions};
        let p = random_polynomials(seed, 1, 3, 4).remove(0);
        let deg = p.degree().unwrap();
        let f = RationalFn::polynomial(p).unwrap();
        let d = decompose(&f, DomainSpec::WholePlane, TraceOptions::default(), DecomposeOptions::default()).unwrap();
        prop_assert!(d.regions.iter().all(|r| r.certificate.pass));
        // Regions pair each non-outer member with its parent, and the outermost one winds deg times.
        prop_assert_eq!(d.regions.len(), d.members.len() - 1);
        let outer: Vec<_> = d.regions.iter().filter(|r| r.outer == d.outer).collect();
        prop_assert_eq!(outer.len(), 1);
        prop_assert_eq!(outer[0].n as usize, deg);
    }
}
