use levelcurve::funcspace::parse_function;
use levelcurve::metrics::continuity_probe;
use levelcurve::tracer::{trace_level_set, TraceOptions};
use levelcurve::DomainSpec;

fn probe(spec: &str, eps: f64, delta: f64) -> levelcurve::metrics::ContinuityCertificate {
    let f = parse_function(spec).unwrap().build().unwrap();
    let opts = TraceOptions::default();
    let comps = trace_level_set(&f, eps, DomainSpec::WholePlane, opts).unwrap();
    assert_eq!(comps.len(), 1);
    continuity_probe(&f, delta, DomainSpec::WholePlane, &comps[0], opts).unwrap()
}

#[test]
fn square_circle() {
    let c = probe("poly:1,0,0", 1.0, 0.05);
    assert!(c.pass);
    assert!(c.eta >= 0.05, "eta {}", c.eta);
    assert_eq!(c.samples.len(), 16);
}

#[test]
fn five_petals_critical_level() {
    let c = probe("poly:1,0,0,0,0,-1", 1.0, 0.1);
    assert!(c.pass);
    assert!(c.eta > 0.0);
    assert!(c.samples.iter().all(|s| s.d_check < 0.1));
    let below = c.samples.iter().filter(|s| s.zeta < 1.0).all(|s| s.curves == 5);
    let above = c.samples.iter().filter(|s| s.zeta > 1.0).all(|s| s.curves == 1);
    assert!(below && above, "{:?}", c.samples);
}

#[test]
fn huge_delta_passes_at_once() {
    let c = probe("poly:1,0,0", 1.0, 100.0);
    assert!(c.pass);
    assert_eq!(c.eta, 0.5);
}
