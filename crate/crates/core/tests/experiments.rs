use gdsde::experiments::{find, registry, run_experiment, Domain, ExperimentSpec};
use gdsde::Error;

#[test]
fn registry_is_sorted_and_complete() {
    let names: Vec<&str> = registry().iter().map(|d| d.name).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for d in registry() {
        assert!(!d.anchor.is_empty(), "{} has no anchor", d.name);
        assert!(!d.outputs.is_empty());
        let mut keys: Vec<&str> = d.params.iter().map(|p| p.name).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), d.params.len(), "{} repeats a parameter", d.name);
        for p in d.params {
            p.domain.check(p.name, p.default).unwrap_or_else(|e| panic!("{}: default {e}", d.name));
        }
        d.default_spec().validate().unwrap();
    }
}

#[test]
fn figure1_defaults_follow_the_caption() {
    let s = ExperimentSpec::defaults("exp_figure1").unwrap();
    assert_eq!(s.f("delta"), 0.05);
    assert_eq!(s.int("n"), 1000);
    assert_eq!(s.int("m"), 200);
    assert_eq!((s.f("x0_1"), s.f("x0_2")), (0.1, 0.1));
    assert_eq!((s.f("alpha11"), s.f("alpha22"), s.f("tau")), (0.02, 0.005, 0.1));
    assert_eq!(s.int("scatter"), 500);
}

#[test]
fn unknown_names_and_keys_are_configuration_errors() {
    match find("exp_missing") {
        Err(Error::Configuration(m)) => assert!(m.contains("exp_stationary")),
        other => panic!("{other:?}"),
    }
    let mut s = ExperimentSpec::defaults("exp_stationary").unwrap();
    assert!(matches!(s.set("nope", 1.0), Err(Error::Configuration(_))));
    assert!(matches!(s.set_str("delta", "x"), Err(Error::Configuration(_))));
    assert!(matches!(s.set("m", -5.0), Err(Error::ParameterDomain(_))));
    assert!(matches!(s.set("m", 2.5), Err(Error::ParameterDomain(_))));
    assert!(matches!(s.set("ks_level", 0.02), Err(Error::ParameterDomain(_))));
    s.set_str("delta", " 0.001 ").unwrap();
    assert_eq!(s.f("delta"), 0.001);
    s.parameters.remove("delta");
    assert!(matches!(s.validate(), Err(Error::Configuration(_))));
}

#[test]
fn domains() {
    assert!(Domain::PositiveInt.check("k", 3.0).is_ok());
    assert!(Domain::PositiveInt.check("k", 0.0).is_err());
    assert!(Domain::Positive.check("k", 0.0).is_err());
    assert!(Domain::NonNegative.check("k", 0.0).is_ok());
    assert!(Domain::Real.check("k", f64::NAN).is_err());
    assert!(Domain::Level.check("k", 0.05).is_ok());
}

fn small_figure1() -> ExperimentSpec {
    let mut s = ExperimentSpec::defaults("exp_figure1").unwrap();
    for (k, v) in [("replicates", 100.0), ("scatter", 50.0), ("cov_tol", 1.0), ("gd_steps", 2000.0), ("nesterov_steps", 500.0)] {
        s.set(k, v).unwrap();
    }
    s
}

#[test]
fn runs_are_deterministic_per_seed() {
    let s = small_figure1();
    let a = run_experiment(&s, 3).unwrap();
    let b = run_experiment(&s, 3).unwrap();
    let c = run_experiment(&s, 4).unwrap();
    assert_eq!(a.results, b.results);
    assert_eq!(a.tables, b.tables);
    assert_ne!(a.tables, c.tables);
    assert_ne!(a.experiment_seed, c.experiment_seed);
    let names: Vec<&str> = a.tables.iter().map(|t| t.name.as_str()).collect();
    let outputs: Vec<&str> = s.outputs.iter().map(String::as_str).collect();
    assert_eq!(names, outputs);
}

#[test]
fn report_verdict_is_the_conjunction_of_checks() {
    let mut s = small_figure1();
    s.set("endpoint_tol", 1e-300).unwrap();
    let r = run_experiment(&s, 1).unwrap();
    assert!(!r.passed);
    assert!(!r.result("plain_exact_endpoint").unwrap().passed);
    assert!(r.result("scatter_mean").is_some());
    assert!(r.result("no_such_check").is_none());
}

#[test]
fn rates_experiment_on_a_coarse_grid() {
    let mut s = ExperimentSpec::defaults("exp_discrete_vs_continuum").unwrap();
    for (k, v) in [("ode_h", 1e-3), ("ode_tol", 0.1), ("n3", 3e4), ("replicates", 20.0)] {
        s.set(k, v).unwrap();
    }
    let r = run_experiment(&s, 42).unwrap();
    for name in ["plain_ode_error", "accel_ode_error", "plain_delta_slope", "accel_delta_slope"] {
        assert!(r.result(name).unwrap().passed, "{name}: {:?}", r.result(name));
    }
}
