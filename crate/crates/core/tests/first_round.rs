use std::sync::Arc;

use ipscftp_core::analytic::{self, Membership};
use ipscftp_core::coupling::{make_insensitive_spec, make_sensitive_spec, SpecSet};
use ipscftp_core::diagnostics::direct_draws;
use ipscftp_core::stats::mean_se;
use ipscftp_core::ypr::{jukes_cantor_cpg, PerturbationSpec, A, C, G};

fn mean_n1(draws: &[(bool, u64)]) -> (f64, f64) {
    let v: Vec<f64> = draws.iter().map(|&(_, n)| n as f64).collect();
    mean_se(&v)
}

// The shorter Z' variant drops the r/(r3+r6) term; direct simulation separates the two.
#[test]
fn primed_rule_mean_matches_corrected_expectation() {
    let m = jukes_cantor_cpg(2.0, PerturbationSpec::none().with_single(C, G, 0.6))
        .unwrap()
        .compile();
    let spec = make_insensitive_spec(&m).unwrap();
    let rs = Arc::new(m.rules);
    let rule = spec.members(SpecSet::P)[0];
    assert_eq!(Membership::of(&spec, rule), Membership::ZPrimePlus);

    let s = analytic::rate_summary(&rs, &spec);
    let rate = rs.rate(rule);
    let corrected = analytic::expected_n1(rate, &s, Membership::ZPrimePlus).unwrap();
    let shorter = corrected - rate / (s.r3 + s.r6);

    let draws = direct_draws(&rs, &spec, rule, 40_000, 11).unwrap();
    let (mean, se) = mean_n1(&draws);
    assert!((mean - corrected).abs() < 3.0 * se, "{mean} ± {se} vs {corrected}");
    assert!((mean - shorter).abs() > 6.0 * se, "{mean} ± {se} vs {shorter}");
}

#[test]
fn plain_rule_mean_matches_expectation() {
    let m = jukes_cantor_cpg(2.0, PerturbationSpec::none().with_single(A, C, 0.6))
        .unwrap()
        .compile();
    let spec = make_sensitive_spec(&m).unwrap();
    let rs = Arc::new(m.rules);
    let rule = spec.members(SpecSet::P)[0];
    let s = analytic::rate_summary(&rs, &spec);
    let expected = analytic::expected_n1(rs.rate(rule), &s, Membership::Plain).unwrap();
    let draws = direct_draws(&rs, &spec, rule, 40_000, 12).unwrap();
    let (mean, se) = mean_n1(&draws);
    assert!((mean - expected).abs() < 3.0 * se, "{mean} ± {se} vs {expected}");
}
