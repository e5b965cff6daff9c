use std::sync::Arc;

use proptest::prelude::*;

use ipscftp_core::analytic;
use ipscftp_core::coupling::{make_insensitive_spec, make_sensitive_spec};
use ipscftp_core::flowsim::{flow, PerfOverrides, StreamField};
use ipscftp_core::rulesys::Uniform;
use ipscftp_core::ypr::{jukes_cantor_cpg, PerturbationSpec, NUCLEOTIDES};

fn pert() -> impl Strategy<Value = PerturbationSpec> {
    (0usize..4, 0usize..4, 0.0..0.5f64, 0usize..4, 0.0..0.3f64).prop_map(|(a, b, e, z, l)| {
        let mut p = PerturbationSpec::none();
        if a != b {
            p = p.with_single(NUCLEOTIDES[a], NUCLEOTIDES[b], e);
        }
        let (x, y) = (NUCLEOTIDES[b], NUCLEOTIDES[(b + 1) % 4]);
        p.left.insert((NUCLEOTIDES[z], x, y), l);
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_specs_are_disjoint(delta in 0.0..10.0f64, p in pert()) {
        let m = jukes_cantor_cpg(delta, p).unwrap().compile();
        prop_assert!(make_sensitive_spec(&m).unwrap().disjointness().all_empty());
        prop_assert!(make_insensitive_spec(&m).unwrap().disjointness().all_empty());
    }

    #[test]
    fn closed_form_never_exceeds_upper_bound(delta in 0.0..10.0f64, p in pert()) {
        let m = jukes_cantor_cpg(delta, p).unwrap().compile();
        let spec = make_sensitive_spec(&m).unwrap();
        let exact = analytic::growth_closed_form(&m.rules, &spec).unwrap();
        let upper = analytic::growth_upper_bound(&m.rules, &spec).unwrap();
        prop_assert!(exact >= 0.0);
        prop_assert!(exact <= upper * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn pair_bound_is_a_nonincreasing_probability(m in 0.0..0.99f64, d in 1u32..64) {
        let a = analytic::theorem_d_pair(m, 2.0, 2.0, d as f64).unwrap();
        let b = analytic::theorem_d_pair(m, 2.0, 2.0, d as f64 + 1.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
    }

    #[test]
    fn flow_is_a_function_of_the_seed(seed in any::<u64>(), x in -3i64..3, t in -2.0..0.0f64) {
        let rs = Arc::new(jukes_cantor_cpg(1.0, PerturbationSpec::none()).unwrap().compile().rules);
        let none = PerfOverrides::new();
        let fill = Uniform(NUCLEOTIDES[0]);
        let a = StreamField::new(rs.clone(), seed);
        let b = StreamField::new(rs, seed);
        let u = t - 1.0;
        prop_assert_eq!(
            flow(&a, &fill, u, t, x, &none).unwrap(),
            flow(&b, &fill, u, t, x, &none).unwrap()
        );
    }
}
