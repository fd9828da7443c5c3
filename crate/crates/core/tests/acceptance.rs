//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails or exceeds its time budget.

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use levelcurve::annulus::{decompose, DecomposeOptions};
use levelcurve::corpus::{random_polynomials, rng};
use levelcurve::funcspace::parse_function;
use levelcurve::gauss_lucas::{check_gauss_lucas, replay_level_curve_argument, signed_distance, Replay};
use levelcurve::geom::winding_number;
use levelcurve::levelgraph::{build_graph, LevelGraph};
use levelcurve::metrics::continuity_probe;
use levelcurve::order::{critical_level_curves, two_curve_critical_witness, CriticalSet, CurveRef};
use levelcurve::raster::grid_agreement;
use levelcurve::tracer::{trace_level_set, LevelCurveComponent, TraceOptions};
use levelcurve::{Complex64, DomainSpec, Polynomial, RationalFn, Tolerances};
use rand::Rng;

type Outcome<T> = Result<(T, String), String>;

const CORPUS_SEED: u64 = 1;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn f_of(spec: &str) -> RationalFn {
    parse_function(spec).unwrap().build().unwrap()
}

fn trace(f: &RationalFn, eps: f64, domain: DomainSpec) -> Result<Vec<LevelCurveComponent>, String> {
    trace_level_set(f, eps, domain, TraceOptions::default()).map_err(|e| format!("trace at {eps}: {e}"))
}

/// Run one criterion, print its line and report whether it passed within `budget` seconds.
fn criterion<T>(id: u32, name: &str, budget: f64, body: impl FnOnce() -> Outcome<T>) -> (bool, Option<T>) {
    let t0 = Instant::now();
    let r = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panic: {msg}"))
    });
    let secs = t0.elapsed().as_secs_f64();
    let (ok, detail, value) = match r {
        Ok((v, detail)) if secs <= budget => (true, detail, Some(v)),
        Ok((v, detail)) => (false, format!("{detail}; over the {budget}s budget"), Some(v)),
        Err(e) => (false, e, None),
    };
    println!(
        "criterion {id:>2} {}: {name} ({detail}; {secs:.2}s)",
        if ok { "PASS" } else { "FAIL" }
    );
    (ok, value)
}

fn circle_law() -> Outcome<()> {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for n in [1usize, 2, 3, 5] {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = 1.0;
        let f = RationalFn::polynomial(Polynomial::from_real(&coeffs)).unwrap();
        for eps in [0.25, 1.0, 4.0] {
            let comps = trace(&f, eps, DomainSpec::WholePlane)?;
            ensure(comps.len() == 1, || format!("z^{n} at {eps}: {} components", comps.len()))?;
            let r = f64::powf(eps, 1.0 / n as f64);
            for p in comps[0].points() {
                worst = worst.max((p.norm() - r).abs());
                points += 1;
            }
        }
    }
    ensure(worst <= 1e-6, || format!("modulus off by {worst:e}"))?;
    Ok(((), format!("{points} points, worst modulus error {worst:.1e}")))
}

fn ring(c: &LevelCurveComponent) -> Vec<Complex64> {
    c.arcs[0].points.clone()
}

fn five_petals() -> Outcome<Vec<LevelGraph>> {
    let f = f_of("poly:1,0,0,0,0,-1");
    let roots: Vec<Complex64> = (0..5).map(|k| Complex64::from_polar(1.0, TAU * k as f64 / 5.0)).collect();
    let mut graphs = Vec::new();

    let comps = trace(&f, 1.0, DomainSpec::WholePlane)?;
    ensure(comps.len() == 1, || format!("{} components at 1", comps.len()))?;
    let g = build_graph(&comps[0]).map_err(|e| e.to_string())?;
    ensure(g.vertices.len() == 1 && g.edges.len() == 5, || format!("V={} E={}", g.vertices.len(), g.edges.len()))?;
    ensure(g.vertices[0].z.norm() <= 1e-6, || format!("vertex at {}", g.vertices[0].z))?;
    ensure(g.vertices[0].mult == 4, || format!("mult {}", g.vertices[0].mult))?;
    ensure(g.degrees() == vec![10], || format!("degrees {:?}", g.degrees()))?;
    let bounded = g.bounded_faces().count();
    ensure(bounded == 5, || format!("{bounded} bounded faces"))?;
    graphs.push(g);

    let comps = trace(&f, 0.5, DomainSpec::WholePlane)?;
    ensure(comps.len() == 5, || format!("{} components at 0.5", comps.len()))?;
    let mut owner = vec![0; 5];
    for c in &comps {
        ensure(c.is_simple_closed(), || "component at 0.5 is not a simple closed curve".into())?;
        let inside: Vec<usize> = (0..5).filter(|&k| winding_number(roots[k], &ring(c)) != 0).collect();
        ensure(inside.len() == 1, || format!("component encloses roots {inside:?}"))?;
        owner[inside[0]] += 1;
        graphs.push(build_graph(c).map_err(|e| e.to_string())?);
    }
    ensure(owner.iter().all(|&k| k == 1), || format!("root ownership {owner:?}"))?;

    let comps = trace(&f, 1.5, DomainSpec::WholePlane)?;
    ensure(comps.len() == 1, || format!("{} components at 1.5", comps.len()))?;
    ensure(roots.iter().all(|&r| winding_number(r, &ring(&comps[0])) != 0), || "a root is outside at 1.5".into())?;
    graphs.push(build_graph(&comps[0]).map_err(|e| e.to_string())?);
    Ok((graphs, "V=1 E=5 F_b=5 deg 10; 5 and 1 components".into()))
}

fn corpus() -> Vec<RationalFn> {
    random_polynomials(CORPUS_SEED, 30, 3, 7)
        .into_iter()
        .map(|p| RationalFn::polynomial(p).unwrap())
        .collect()
}

/// Distinct critical values, in increasing order.
fn critical_values(f: &RationalFn) -> Vec<f64> {
    let mut v: Vec<f64> = f.proper_critical_points(&DomainSpec::WholePlane).iter().map(|c| f.modulus(c.z)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.max(1.0));
    v
}

fn face_count_corpus(fs: &[RationalFn]) -> Outcome<Vec<LevelGraph>> {
    let mut graphs = Vec::new();
    let mut levels = 0;
    for (i, f) in fs.iter().enumerate() {
        for eps in critical_values(f) {
            levels += 1;
            for c in trace(f, eps, DomainSpec::WholePlane).map_err(|e| format!("poly {i}: {e}"))? {
                let g = build_graph(&c).map_err(|e| format!("poly {i} at {eps}: {e}"))?;
                let expected = g.vertices.iter().map(|v| v.mult).sum::<usize>() + 1;
                let bounded = g.bounded_faces().count();
                ensure(bounded == expected, || format!("poly {i} at {eps}: {bounded} bounded faces, expected {expected}"))?;
                graphs.push(g);
            }
        }
    }
    let with_vertices = graphs.iter().filter(|g| !g.vertices.is_empty()).count();
    Ok((graphs, format!("{levels} critical levels, {with_vertices} critical components")))
}

fn degree_and_adjacency(graphs: &[LevelGraph]) -> Outcome<()> {
    let mut vertices = 0;
    let mut edges = 0;
    for (k, g) in graphs.iter().enumerate() {
        for (v, d) in g.vertices.iter().zip(g.degrees()) {
            ensure(d == 2 * (v.mult + 1), || format!("graph {k}: vertex {} has degree {d}, mult {}", v.z, v.mult))?;
            vertices += 1;
        }
        for (e, (a, b)) in g.edge_faces().into_iter().enumerate() {
            ensure(a != b && a < g.faces.len() && b < g.faces.len(), || format!("graph {k}: edge {e} borders {a} and {b}"))?;
            edges += 1;
        }
    }
    Ok(((), format!("{} graphs, {vertices} vertices, {edges} edges, 0 violations", graphs.len())))
}

fn gauss_lucas() -> Outcome<()> {
    let tol = Tolerances::default();
    let mut worst = f64::NEG_INFINITY;
    for (i, p) in random_polynomials(11, 500, 2, 12).iter().enumerate() {
        let r = check_gauss_lucas(p, &tol).map_err(|e| format!("poly {i}: {e}"))?;
        // Independent recheck of every critical point against the reported hull.
        for &c in &r.critical_points {
            let d = signed_distance(c, &r.hull, 0.0) / r.scale;
            ensure(d <= 1e-8, || format!("poly {i}: critical point {c} at {d:e}"))?;
            worst = worst.max(d);
        }
    }
    let mut g = rng(12);
    let mut replays = 0;
    for _ in 0..10 {
        let zeros: Vec<Complex64> = (0..g.gen_range(3..8))
            .map(|_| Complex64::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)))
            .collect();
        let centroid = zeros.iter().sum::<Complex64>() / zeros.len() as f64;
        let reach = zeros.iter().map(|z| (z - centroid).norm()).fold(0.0, f64::max);
        // A claimed critical point planted outside the hull.
        let c = centroid + Complex64::from_polar(reach * g.gen_range(1.1..2.0), g.gen_range(0.0..TAU));
        match replay_level_curve_argument(&zeros, c, &tol).map_err(|e| e.to_string())? {
            Replay::Witness { holds: true, max_crossings_per_line: 1, .. } => replays += 1,
            other => return Err(format!("replay at {c} did not refute it: {other:?}")),
        }
    }
    Ok(((), format!("500 polynomials, worst relative distance {worst:.1e}; {replays}/10 corrupted instances refuted")))
}

fn continuity() -> Outcome<()> {
    let opts = TraceOptions::default();
    let f = f_of("poly:1,0,0,0,0,-1");
    let comps = trace(&f, 1.0, DomainSpec::WholePlane)?;
    let c = continuity_probe(&f, 0.1, DomainSpec::WholePlane, &comps[0], opts).map_err(|e| e.to_string())?;
    ensure(c.pass && c.eta > 0.0, || format!("z^5-1: pass {} eta {}", c.pass, c.eta))?;
    ensure(c.samples.len() == 16, || format!("{} samples", c.samples.len()))?;
    let worst = c.samples.iter().map(|s| s.d_check).fold(0.0, f64::max);
    ensure(worst < 0.1, || format!("sampled distance {worst}"))?;

    let f2 = f_of("poly:1,0,0");
    let comps = trace(&f2, 1.0, DomainSpec::WholePlane)?;
    let c2 = continuity_probe(&f2, 0.1, DomainSpec::WholePlane, &comps[0], opts).map_err(|e| e.to_string())?;
    ensure(c2.pass && c2.eta >= 0.05, || format!("z^2: pass {} eta {}", c2.pass, c2.eta))?;
    Ok(((), format!("z^5-1 eta {:.2e} (max d {worst:.3}); z^2 eta {:.3}", c.eta, c2.eta)))
}

fn critical_sets(fs: &[RationalFn]) -> Result<Vec<CriticalSet>, String> {
    fs.iter()
        .enumerate()
        .map(|(i, f)| {
            critical_level_curves(f, DomainSpec::WholePlane, TraceOptions::default()).map_err(|e| format!("poly {i}: {e}"))
        })
        .collect()
}

/// The component of the level set at `eps` winding around `z`.
fn curve_around(f: &RationalFn, eps: f64, z: Complex64) -> Result<CurveRef, String> {
    let comp = trace(f, eps, DomainSpec::WholePlane)?
        .into_iter()
        .find(|c| c.is_simple_closed() && winding_number(z, &ring(c)) != 0)
        .ok_or_else(|| format!("no component at {eps} around {z}"))?;
    CurveRef::level_curve(comp, &TraceOptions::default()).map_err(|e| e.to_string())
}

fn two_curve(fs: &[RationalFn]) -> Outcome<Vec<CriticalSet>> {
    let sets = critical_sets(fs)?;
    let tol = Tolerances::default().trace;
    let mut g = rng(7);
    let mut found = 0;
    while found < 50 {
        let i = g.gen_range(0..fs.len());
        let f = &fs[i];
        let zeros = f.zeros();
        let a = g.gen_range(0..zeros.len());
        let b = (a + g.gen_range(1..zeros.len())) % zeros.len();
        let floor = critical_values(f).first().copied().unwrap_or(1.0);
        let (za, zb) = (zeros[a].z, zeros[b].z);
        let l1 = curve_around(f, floor * g.gen_range(0.2..0.8), za)?;
        let l2 = curve_around(f, floor * g.gen_range(0.2..0.8), zb)?;
        let w = two_curve_critical_witness(f, &sets[i], &l1, &l2, tol).map_err(|e| format!("poly {i}, zeros {a},{b}: {e}"))?;
        let m = &sets[i].members[w.member];
        let graph = m.graph().ok_or("witness is a point")?;
        ensure(m.is_critical(), || format!("poly {i}: witness {} is not critical", w.member))?;
        ensure(w.face1 != w.face2, || "witness faces coincide".into())?;
        // The face rings must separate the two zeros.
        let (r1, r2) = (graph.faces[w.face1].ring(), graph.faces[w.face2].ring());
        ensure(graph.faces[w.face1].bounded && graph.faces[w.face2].bounded, || "unbounded witness face".into())?;
        ensure(
            winding_number(za, r1) != 0 && winding_number(zb, r1) == 0 && winding_number(zb, r2) != 0 && winding_number(za, r2) == 0,
            || format!("poly {i}: faces {} / {} do not separate {za} and {zb}", w.face1, w.face2),
        )?;
        found += 1;
    }
    Ok((sets, format!("{found} pairs, all witnessed")))
}

fn unique_maximal(fs: &[RationalFn], sets: &[CriticalSet]) -> Outcome<()> {
    let tol = Tolerances::default().trace;
    let mut members = 0;
    for (i, (f, s)) in fs.iter().zip(sets).enumerate() {
        let rel = s.relation(f, tol).map_err(|e| format!("poly {i}: {e}"))?;
        CriticalSet::check_partial_order(&rel).map_err(|e| format!("poly {i}: {e}"))?;
        let maximal: Vec<usize> = (0..rel.len()).filter(|&j| (0..rel.len()).all(|k| !rel[j][k])).collect();
        ensure(maximal.len() == 1, || format!("poly {i}: maximal elements {maximal:?}"))?;
        match s.maximal(&rel) {
            Ok(m) if m == maximal[0] => {}
            other => return Err(format!("poly {i}: library maximal {other:?}, brute force {}", maximal[0])),
        }
        members += rel.len();
    }
    Ok(((), format!("{} functions, {members} members, one maximal each", fs.len())))
}

fn annulus() -> Outcome<()> {
    let fixtures: [(&str, DomainSpec, Option<usize>); 4] = [
        ("poly:1,0,0", DomainSpec::WholePlane, Some(1)),
        ("poly:1,0,0,0", DomainSpec::WholePlane, Some(1)),
        ("poly:1,0,0,0,0,-1", DomainSpec::WholePlane, Some(6)),
        ("blaschke:0.1,-0.1/0.2i", DomainSpec::UnitDisk, None),
    ];
    let mut total = 0;
    let mut worst_res: f64 = 0.0;
    let mut worst_disc: f64 = 0.0;
    for (spec, domain, count) in fixtures {
        let f = f_of(spec);
        let d = decompose(&f, domain, TraceOptions::default(), DecomposeOptions::default()).map_err(|e| format!("{spec}: {e}"))?;
        if let Some(n) = count {
            ensure(d.regions.len() == n, || format!("{spec}: {} regions, expected {n}", d.regions.len()))?;
        }
        for r in &d.regions {
            let tag = format!("{spec} region {}", r.id);
            let n = r.n as i64;
            ensure(n >= 1, || format!("{tag}: N = {n}"))?;
            for &(_, turns) in &r.windings {
                ensure((turns.abs() - n as f64).abs() <= 1e-6, || format!("{tag}: {turns} turns, N = {n}"))?;
            }
            let mid = ring(r.mid_curve.as_ref().ok_or_else(|| format!("{tag}: no middle curve"))?);
            let wound = |roots: &[levelcurve::Root]| -> i64 {
                roots.iter().map(|z| z.mult as i64 * i64::from(winding_number(z.z, &mid).abs())).sum()
            };
            let count = wound(f.zeros()) - wound(f.poles());
            ensure(count.abs() == n, || format!("{tag}: zeros - poles enclosed = {count}, N = {n}"))?;

            let phi = &r.phi;
            let nf = n as f64;
            let mut max_f: f64 = 0.0;
            let mut residual: f64 = 0.0;
            for (k, &w) in phi.nodes.iter().enumerate() {
                let fw = f.eval(w).finite().ok_or_else(|| format!("{tag}: mesh node at a pole"))?;
                max_f = max_f.max(fw.norm());
                residual = residual.max((phi.phi[k].powi(r.m as i32) - fw).norm());
            }
            ensure(residual <= 1e-8 * (1.0 + max_f), || format!("{tag}: |phi^M - f| = {residual:e}"))?;
            worst_res = worst_res.max(residual / (1.0 + max_f));

            let (lo, hi) = (r.eps1.min(r.eps2).powf(1.0 / nf), r.eps1.max(r.eps2).powf(1.0 / nf));
            ensure(phi.phi.iter().all(|p| p.norm() > lo && p.norm() < hi), || format!("{tag}: |phi| leaves ({lo}, {hi})"))?;

            // Every mesh edge, tree or not, must carry the arg increment of f modulo 2 pi N.
            let period = TAU * nf;
            let mut disc: f64 = 0.0;
            for &(a, b) in &phi.edges {
                let (fa, fb) = (f.eval(phi.nodes[a]).finite().unwrap(), f.eval(phi.nodes[b]).finite().unwrap());
                let d = phi.alpha[b] - phi.alpha[a] - (fb / fa).arg();
                let d = d - period * (d / period).round();
                disc = disc.max(d.abs());
            }
            ensure(disc <= 1e-6, || format!("{tag}: path discrepancy {disc:e}"))?;
            ensure(r.certificate.tree_discrepancy <= 1e-6 && r.certificate.cycle_discrepancy <= 1e-6, || format!("{tag}: certificate discrepancies"))?;
            worst_disc = worst_disc.max(disc);
            ensure(r.certificate.pass, || format!("{tag}: certificate failed {:?}", r.certificate))?;
            total += 1;
        }
    }
    Ok(((), format!("{total} regions; worst scaled residual {worst_res:.1e}, worst discrepancy {worst_disc:.1e}")))
}

fn grid_oracle() -> Outcome<()> {
    let fixtures: &[(&str, DomainSpec, &[f64])] = &[
        ("poly:1,0", DomainSpec::WholePlane, &[0.25, 1.0, 4.0]),
        ("poly:1,0,0", DomainSpec::WholePlane, &[0.25, 1.0, 4.0]),
        ("poly:1,0,0,0", DomainSpec::WholePlane, &[0.25, 1.0, 4.0]),
        ("poly:1,0,0,0,0,0", DomainSpec::WholePlane, &[0.25, 1.0, 4.0]),
        ("poly:1,0,0,0,0,-1", DomainSpec::WholePlane, &[0.5, 1.0, 1.5]),
        ("poly:1,0,-1", DomainSpec::WholePlane, &[0.5, 1.0, 2.0]),
        ("rat:1,0,-1/1,0,0,0,0.1", DomainSpec::WholePlane, &[0.5, 2.0, 10.0]),
        ("blaschke:0.1,-0.1/0.2i", DomainSpec::UnitDisk, &[0.3, 0.7]),
    ];
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for (spec, domain, levels) in fixtures {
        let f = f_of(spec);
        for &eps in levels.iter() {
            let comps = trace(&f, eps, *domain)?;
            let a = grid_agreement(&f, eps, domain, &comps, 600);
            ensure(a.pass, || format!("{spec} at {eps}: d = {} vs cell diagonal {}", a.d_check, a.cell_diagonal))?;
            worst = worst.max(a.d_check / a.cell_diagonal);
            cases += 1;
        }
    }
    Ok(((), format!("{cases} level sets, worst distance {worst:.2} cell diagonals")))
}

fn main() {
    let mut all = true;
    let mut record = |ok: bool| all &= ok;

    record(criterion(1, "circle law", 1.0, circle_law).0);
    let (ok, petals) = criterion(2, "z^5-1 fixture", 10.0, five_petals);
    record(ok);
    let fs = corpus();
    let (ok, corpus_graphs) = criterion(3, "face-count formula on the corpus", 120.0, || face_count_corpus(&fs));
    record(ok);
    let graphs: Vec<LevelGraph> = petals.into_iter().chain(corpus_graphs).flatten().collect();
    record(criterion(4, "degree and edge-adjacency laws", 10.0, || degree_and_adjacency(&graphs)).0);
    record(criterion(5, "Gauss-Lucas", 30.0, gauss_lucas).0);
    record(criterion(6, "continuity", 60.0, continuity).0);
    let (ok, sets) = criterion(7, "two-curve witnesses", 120.0, || two_curve(&fs));
    record(ok);
    let sets = match sets {
        Some(s) => Ok(s),
        None => critical_sets(&fs),
    };
    record(
        criterion(8, "unique maximal element", 60.0, || match &sets {
            Ok(s) => unique_maximal(&fs, s),
            Err(e) => Err(e.clone()),
        })
        .0,
    );
    record(criterion(9, "annulus decomposition and phi", 120.0, annulus).0);
    record(criterion(10, "grid-oracle equivalence", 60.0, grid_oracle).0);

    if !all {
        std::process::exit(1);
    }
}
