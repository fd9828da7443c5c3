use std::fs;
use std::path::Path;

use levelcurve::annulus::{decompose, DecomposeOptions};
use levelcurve::corpus::random_polynomials;
use levelcurve::export::{decomposition_svg, graph_svg, level_set_svg, polylines_csv, Svg};
use levelcurve::funcspace::parse_function;
use levelcurve::gauss_lucas::check_gauss_lucas;
use levelcurve::levelgraph::{build_graph_with, LevelGraph};
use levelcurve::metrics::continuity_probe;
use levelcurve::order::{critical_level_curves, two_curve_critical_witness, CriticalSet};
use levelcurve::raster::grid_agreement;
use levelcurve::tracer::{trace_level_set, LevelCurveComponent, TraceOptions};
use levelcurve::{DomainSpec, Error, ErrorClass, FnKind, RationalFn, Result};
use serde_json::{json, Map, Value};

use crate::{Command, Common};

pub const SCHEMA: &str = "levelcurve/1";

/// Exit status for a run whose certificates were all evaluated.
const OK: u8 = 0;
const NUMERICAL: u8 = 2;
const VIOLATED: u8 = 3;

struct Setup {
    spec: String,
    f: RationalFn,
    domain: DomainSpec,
    opts: TraceOptions,
}

fn setup(common: &Common) -> Result<Setup> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::InvalidInput("--threads must be positive".into()));
        }
        // Fails only when a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let spec = common
        .function
        .clone()
        .ok_or_else(|| Error::InvalidInput("--fn is required".into()))?;
    let f = parse_function(&spec)?.build()?;
    let domain = match &common.domain {
        Some(d) => DomainSpec::parse(d)?,
        None if f.kind() == FnKind::Blaschke => DomainSpec::UnitDisk,
        None => DomainSpec::WholePlane,
    };
    domain.validate_for(&f)?;
    let opts = TraceOptions::with_tol(common.tolerances()?);
    Ok(Setup { spec, f, domain, opts })
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("--eps must be positive and finite, got {eps}")))
    }
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn header(command: &str, s: &Setup) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command));
    m.insert("function".into(), json!(s.spec));
    m.insert("domain".into(), json!(s.domain.label()));
    m
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

fn emit(common: &Common, doc: Map<String, Value>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values always serialize");
    text.push('\n');
    match &common.out {
        Some(p) => write_file(p, &text),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(Error::InvalidInput(format!("cannot write to stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

fn status_of(e: &Error) -> &'static str {
    match e.class() {
        ErrorClass::Certificate => "fail",
        ErrorClass::Numerical => "error",
        ErrorClass::Usage => "skipped",
    }
}

pub fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Trace { common, eps, csv } => trace(&common, eps, csv.as_deref()),
        Command::Graph { common, eps } => graph(&common, eps),
        Command::GaussLucas { common, poly, corpus } => gauss_lucas(&common, poly, corpus),
        Command::Continuity { common, eps, delta } => continuity(&common, eps, delta),
        Command::Order { common } => order(&common),
        Command::Decompose { common, emit_phi, outer_level } => {
            decompose_cmd(&common, emit_phi.as_deref(), outer_level)
        }
        Command::VerifyAll { common, eps, delta } => verify_all(&common, eps, delta),
    }
}

fn trace(common: &Common, eps: f64, csv: Option<&Path>) -> Result<u8> {
    check_eps(eps)?;
    let s = setup(common)?;
    let comps = trace_level_set(&s.f, eps, s.domain, s.opts)?;
    let mut doc = header("trace", &s);
    doc.insert("eps".into(), json!(eps));
    doc.insert(
        "components".into(),
        Value::Array(
            comps
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    json!({
                        "id": k,
                        "simple_closed": c.is_simple_closed(),
                        "points": c.point_count(),
                        "component": serde_json::to_value(c).expect("component serializes"),
                    })
                })
                .collect(),
        ),
    );
    if let Some(p) = csv {
        write_file(p, &polylines_csv(&comps))?;
    }
    if let Some(p) = &common.svg {
        write_file(p, &level_set_svg(&comps))?;
    }
    emit(common, doc)?;
    Ok(OK)
}

fn graph_json(g: &LevelGraph) -> Value {
    let mut v = g.to_json();
    let check = g.check_invariants();
    let o = v.as_object_mut().expect("graph JSON is an object");
    o.insert("V".into(), json!(g.vertices.len()));
    o.insert("E".into(), json!(g.edges.len()));
    o.insert("bounded_faces".into(), json!(g.bounded_faces().count()));
    o.insert("degrees".into(), json!(g.degrees()));
    o.insert(
        "invariants".into(),
        match check {
            Ok(()) => json!("pass"),
            Err(e) => json!(e.to_string()),
        },
    );
    v
}

fn graph(common: &Common, eps: f64) -> Result<u8> {
    check_eps(eps)?;
    let s = setup(common)?;
    let comps = trace_level_set(&s.f, eps, s.domain, s.opts)?;
    let graphs = comps.iter().map(|c| build_graph_with(c, &s.opts.tol)).collect::<Result<Vec<_>>>()?;
    let violated = graphs.iter().any(|g| g.check_invariants().is_err());
    let mut doc = header("graph", &s);
    doc.insert("eps".into(), json!(eps));
    doc.insert("graphs".into(), Value::Array(graphs.iter().map(graph_json).collect()));
    if let Some(p) = &common.svg {
        let svg = match graphs.as_slice() {
            [g] => graph_svg(g),
            _ => level_set_svg(&comps),
        };
        write_file(p, &svg)?;
    }
    emit(common, doc)?;
    Ok(if violated { VIOLATED } else { OK })
}

fn gauss_lucas(common: &Common, poly: Option<String>, corpus: Option<usize>) -> Result<u8> {
    let tol = common.tolerances()?;
    if let Some(n) = common.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let (label, polys) = match (poly.or_else(|| common.function.clone()), corpus) {
        (Some(_), Some(_)) => return Err(Error::InvalidInput("give either --poly or --corpus".into())),
        (None, None) => return Err(Error::InvalidInput("--poly or --corpus is required".into())),
        (Some(spec), None) => {
            let f = parse_function(&spec)?.build()?;
            if !f.is_polynomial() {
                return Err(Error::InvalidInput(format!("{spec} is not a polynomial")));
            }
            (json!(spec), vec![f.numerator().clone()])
        }
        (None, Some(n)) => (json!({"corpus": n, "seed": common.seed}), random_polynomials(common.seed, n, 3, 7)),
    };
    let mut status = OK;
    let mut reports = Vec::new();
    for p in &polys {
        let coeffs: Vec<[f64; 2]> = p.coeffs().iter().rev().map(|c| [c.re, c.im]).collect();
        match check_gauss_lucas(p, &tol) {
            Ok(r) => {
                let mut v = serde_json::to_value(&r).expect("report serializes");
                v["max_signed_distance"] = num(r.max_signed_distance);
                v["coefficients"] = json!(coeffs);
                v["pass"] = json!(true);
                reports.push(v);
            }
            Err(e) => {
                status = status.max(match e.class() {
                    ErrorClass::Certificate => VIOLATED,
                    ErrorClass::Numerical => NUMERICAL,
                    ErrorClass::Usage => return Err(e),
                });
                reports.push(json!({"coefficients": coeffs, "pass": false, "error": e.to_string()}));
            }
        }
    }
    let mut doc = Map::new();
    doc.insert("schema".into(), json!(SCHEMA));
    doc.insert("command".into(), json!("gauss-lucas"));
    doc.insert("input".into(), label);
    doc.insert("reports".into(), Value::Array(reports));
    if let (Some(p), [poly]) = (&common.svg, polys.as_slice()) {
        if let Ok(r) = check_gauss_lucas(poly, &tol) {
            let mut svg = Svg::new(levelcurve::geom::BBox::of(r.zeros.iter().chain(&r.critical_points)));
            let mut ring = r.hull.clone();
            if let Some(&first) = ring.first() {
                ring.push(first);
            }
            svg.polygon(&ring, "#cfe3f5");
            svg.polyline(&ring, "#1f4e79", 1.0, false);
            for &z in &r.zeros {
                svg.dot(z, "#2a7a2a");
            }
            for &c in &r.critical_points {
                svg.dot(c, "#b03030");
            }
            write_file(p, &svg.finish())?;
        }
    }
    emit(common, doc)?;
    Ok(status)
}

fn continuity(common: &Common, eps: f64, delta: f64) -> Result<u8> {
    check_eps(eps)?;
    let s = setup(common)?;
    let comps = trace_level_set(&s.f, eps, s.domain, s.opts)?;
    let certs = comps
        .iter()
        .map(|c| continuity_probe(&s.f, delta, s.domain, c, s.opts))
        .collect::<Result<Vec<_>>>()?;
    let pass = certs.iter().all(|c| c.pass);
    let mut doc = header("continuity", &s);
    doc.insert("eps".into(), json!(eps));
    doc.insert("delta".into(), json!(delta));
    doc.insert("pass".into(), json!(pass));
    doc.insert("certificates".into(), serde_json::to_value(&certs).expect("certificates serialize"));
    if let Some(p) = &common.svg {
        write_file(p, &level_set_svg(&comps))?;
    }
    emit(common, doc)?;
    Ok(if pass { OK } else { VIOLATED })
}

struct OrderReport {
    set: CriticalSet,
    value: Value,
    violated: bool,
}

fn order_report(s: &Setup) -> Result<OrderReport> {
    let tol = s.opts.tol.trace;
    let set = critical_level_curves(&s.f, s.domain, s.opts)?;
    let rel = set.relation(&s.f, tol)?;
    let partial = CriticalSet::check_partial_order(&rel);
    let maximal = set.maximal(&rel);
    let faces = set.check_face_maximal(&s.f, &rel, tol);
    let violated = partial.is_err() || maximal.is_err() || faces.is_err();
    let result = |r: std::result::Result<Value, Error>| match r {
        Ok(v) => v,
        Err(e) => json!({"error": e.to_string()}),
    };
    let value = json!({
        "members": set.members.iter().enumerate().map(|(k, m)| {
            let mut v = m.summary();
            v["id"] = json!(k);
            v
        }).collect::<Vec<_>>(),
        "hasse": CriticalSet::hasse(&rel).iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>(),
        "partial_order": result(partial.map(|()| json!("pass"))),
        "maximal": result(maximal.map(|m| json!(m))),
        "face_maximal": result(faces.map(|v| json!(v.iter().map(|&(x, face, y)| json!({"member": x, "face": face, "maximal": y})).collect::<Vec<_>>()))),
    });
    Ok(OrderReport { set, value, violated })
}

fn order(common: &Common) -> Result<u8> {
    let s = setup(common)?;
    let r = order_report(&s)?;
    let mut doc = header("order", &s);
    for (k, v) in r.value.as_object().expect("order JSON is an object") {
        doc.insert(k.clone(), v.clone());
    }
    if let Some(p) = &common.svg {
        let comps: Vec<LevelCurveComponent> = r.set.members.iter().filter_map(|m| m.component.clone()).collect();
        write_file(p, &level_set_svg(&comps))?;
    }
    emit(common, doc)?;
    Ok(if r.violated { VIOLATED } else { OK })
}

fn decompose_value(d: &levelcurve::annulus::Decomposition) -> Value {
    let regions: Vec<Value> = d
        .regions
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "outer": r.outer,
                "outer_face": r.outer_face,
                "inner": r.inner,
                "eps1": num(r.eps1),
                "eps2": num(r.eps2),
                "N": r.n,
                "M": r.m,
                "orientation": r.orientation,
                "enclosed_zeros": r.enclosed_zeros,
                "enclosed_poles": r.enclosed_poles,
                "windings": r.windings.iter().map(|&(l, t)| json!([l, t])).collect::<Vec<_>>(),
                "basepoint": {"re": r.basepoint.re, "im": r.basepoint.im},
                "mid_level": r.mid_level,
                "max_power_residual": r.certificate.max_power_residual,
                "mesh_nodes": r.phi.nodes.len(),
                "certificate": serde_json::to_value(&r.certificate).expect("certificate serializes"),
            })
        })
        .collect();
    json!({
        "members": d.members.iter().enumerate().map(|(k, m)| {
            let mut v = m.summary();
            v["id"] = json!(k);
            v
        }).collect::<Vec<_>>(),
        "outer": d.outer,
        "hasse": d.hasse.iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>(),
        "regions": regions,
        "pass": d.regions.iter().all(|r| r.certificate.pass),
    })
}

fn decompose_options(common: &Common, outer_level: Option<f64>) -> DecomposeOptions {
    DecomposeOptions { outer_level, seed: common.seed, ..DecomposeOptions::default() }
}

fn decompose_cmd(common: &Common, emit_phi: Option<&Path>, outer_level: Option<f64>) -> Result<u8> {
    let s = setup(common)?;
    let d = decompose(&s.f, s.domain, s.opts, decompose_options(common, outer_level))?;
    let value = decompose_value(&d);
    let pass = value["pass"] == json!(true);
    let mut doc = header("decompose", &s);
    for (k, v) in value.as_object().expect("decomposition JSON is an object") {
        doc.insert(k.clone(), v.clone());
    }
    if let Some(p) = emit_phi {
        write_file(p, &d.phi_csv())?;
    }
    if let Some(p) = &common.svg {
        write_file(p, &decomposition_svg(&d))?;
    }
    emit(common, doc)?;
    Ok(if pass { OK } else { VIOLATED })
}

/// Outcome of one check inside `verify-all`.
struct Check {
    name: &'static str,
    status: &'static str,
    detail: Value,
}

impl Check {
    fn from(name: &'static str, r: Result<(bool, Value)>) -> Self {
        match r {
            Ok((true, detail)) => Check { name, status: "pass", detail },
            Ok((false, detail)) => Check { name, status: "fail", detail },
            Err(e) => Check { name, status: status_of(&e), detail: json!(e.to_string()) },
        }
    }

    fn skipped(name: &'static str, why: &str) -> Self {
        Check { name, status: "skipped", detail: json!(why) }
    }
}

fn verify_all(common: &Common, eps: f64, delta: f64) -> Result<u8> {
    check_eps(eps)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!("--delta must be positive, got {delta}")));
    }
    let s = setup(common)?;
    let tol = s.opts.tol;
    let mut checks = Vec::new();

    let traced = trace_level_set(&s.f, eps, s.domain, s.opts);
    checks.push(Check::from(
        "trace",
        traced.as_ref().map_err(clone_err).map(|comps| {
            let worst = comps
                .iter()
                .flat_map(|c| c.points())
                .map(|p| (s.f.modulus(p) - eps).abs() / eps.max(1.0))
                .fold(0.0, f64::max);
            (worst <= tol.trace, json!({"components": comps.len(), "max_level_residual": worst}))
        }),
    ));

    match &traced {
        Ok(comps) => {
            checks.push(Check::from(
                "level_graph",
                comps
                    .iter()
                    .map(|c| {
                        let g = build_graph_with(c, &tol)?;
                        g.check_invariants()?;
                        g.zeros_per_face(&s.f, &s.domain, tol.trace)?;
                        Ok(json!({"V": g.vertices.len(), "E": g.edges.len(), "bounded_faces": g.bounded_faces().count()}))
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(|v| (true, json!(v))),
            ));
            let agreement = grid_agreement(&s.f, eps, &s.domain, comps, 600);
            checks.push(Check::from("grid_oracle", Ok((agreement.pass, serde_json::to_value(agreement).expect("serializes")))));
            checks.push(Check::from(
                "continuity",
                comps
                    .iter()
                    .map(|c| continuity_probe(&s.f, delta, s.domain, c, s.opts))
                    .collect::<Result<Vec<_>>>()
                    .map(|certs| {
                        let pass = certs.iter().all(|c| c.pass);
                        (pass, json!(certs.iter().map(|c| json!({"eta": c.eta, "pass": c.pass})).collect::<Vec<_>>()))
                    }),
            ));
        }
        Err(_) => {
            for name in ["level_graph", "grid_oracle", "continuity"] {
                checks.push(Check::skipped(name, "tracing failed"));
            }
        }
    }

    checks.push(Check::from("critical_levels", critical_graphs(&s)));

    if s.f.is_polynomial() && s.f.numerator().degree().unwrap_or(0) >= 2 {
        checks.push(Check::from(
            "gauss_lucas",
            check_gauss_lucas(s.f.numerator(), &tol).map(|r| (true, json!({"max_signed_distance": num(r.max_signed_distance), "scale": r.scale}))),
        ));
    } else {
        checks.push(Check::skipped("gauss_lucas", "needs a polynomial of degree at least 2"));
    }

    let order = order_report(&s);
    match &order {
        Ok(r) => {
            let detail = json!({"partial_order": r.value["partial_order"], "maximal": r.value["maximal"]});
            checks.push(Check::from("nesting_order", Ok((!r.violated, detail))));
            checks.push(Check::from("two_curve_witness", two_curve(&s, &r.set)));
        }
        Err(e) => {
            checks.push(Check { name: "nesting_order", status: status_of(e), detail: json!(e.to_string()) });
            checks.push(Check::skipped("two_curve_witness", "critical set unavailable"));
        }
    }

    checks.push(match decompose(&s.f, s.domain, s.opts, decompose_options(common, None)) {
        Ok(d) => {
            let pass = d.regions.iter().all(|r| r.certificate.pass);
            let detail = json!(d.regions.iter().map(|r| json!({
                "id": r.id, "N": r.n, "eps1": num(r.eps1), "eps2": num(r.eps2),
                "max_power_residual": r.certificate.max_power_residual, "pass": r.certificate.pass,
            })).collect::<Vec<_>>());
            Check::from("annulus_decomposition", Ok((pass, detail)))
        }
        Err(e) => Check { name: "annulus_decomposition", status: status_of(&e), detail: json!(e.to_string()) },
    });

    let failed = checks.iter().any(|c| c.status == "fail");
    let errored = checks.iter().any(|c| c.status == "error");
    let mut doc = header("verify-all", &s);
    doc.insert("eps".into(), json!(eps));
    doc.insert("delta".into(), json!(delta));
    doc.insert(
        "checks".into(),
        Value::Array(checks.iter().map(|c| json!({"name": c.name, "status": c.status, "detail": c.detail})).collect()),
    );
    doc.insert("pass".into(), json!(!failed && !errored));
    emit(common, doc)?;
    Ok(if failed {
        VIOLATED
    } else if errored {
        NUMERICAL
    } else {
        OK
    })
}

fn clone_err(e: &Error) -> Error {
    match e.class() {
        ErrorClass::Usage => Error::InvalidInput(e.to_string()),
        ErrorClass::Numerical => Error::Mesh(e.to_string()),
        ErrorClass::Certificate => Error::Topology(e.to_string()),
    }
}

/// Graph invariants on the level curve through every critical point.
fn critical_graphs(s: &Setup) -> Result<(bool, Value)> {
    let set = critical_level_curves(&s.f, s.domain, s.opts)?;
    let mut out = Vec::new();
    for m in &set.members {
        let Some(c) = &m.component else { continue };
        let g = build_graph_with(c, &s.opts.tol)?;
        g.check_invariants()?;
        out.push(json!({
            "level": c.level,
            "bounded_faces": g.bounded_faces().count(),
            "mult_sum": g.vertices.iter().map(|v| v.mult).sum::<usize>(),
        }));
    }
    Ok((true, json!(out)))
}

/// Witnesses for pairs of distinct zeros (degenerate, mutually exterior curves).
fn two_curve(s: &Setup, set: &CriticalSet) -> Result<(bool, Value)> {
    let points: Vec<usize> = (0..set.members.len()).filter(|&k| set.members[k].is_point()).collect();
    if points.len() < 2 {
        return Ok((true, json!("fewer than two zeros and poles")));
    }
    let mut out = Vec::new();
    for (i, &a) in points.iter().enumerate() {
        for &b in &points[i + 1..] {
            let w = two_curve_critical_witness(&s.f, set, &set.members[a], &set.members[b], s.opts.tol.trace)?;
            out.push(json!({"pair": [a, b], "member": w.member, "faces": [w.face1, w.face2]}));
        }
    }
    Ok((true, json!(out)))
}
