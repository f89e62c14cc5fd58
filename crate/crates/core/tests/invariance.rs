//! Gauge and twist invariance of lattice invariants and of the transform pipeline.

use nahm::cohomology::{transform_numbers, ChernNumbers};
use nahm::config::{FluxPart, InputSpec, RunConfig};
use nahm::dolbeault::SpectralSettings;
use nahm::gauge::LinkField;
use nahm::pipeline::{run_pipeline, EXIT_OK};
use nahm::transform::{transform_bundle, transform_invariants, wilson_traces};
use proptest::prelude::*;

const GAUGE_TOL: f64 = 1e-8;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lattice_invariants_ignore_gauge_and_twist(
        k12 in -2i64..=2,
        k34 in -2i64..=2,
        seed in any::<u64>(),
        xi in prop::array::uniform4(0.0f64..1.0),
    ) {
        // the relative residual of a flat field is roundoff over roundoff
        prop_assume!(k12 != 0 || k34 != 0);
        let f = LinkField::flux(4, k12, k34).unwrap();
        let g = f.poincare_twist(xi).random_gauge_transform(seed);
        prop_assert!(g.max_unitarity_defect() < 1e-12);
        prop_assert_eq!(g.chern_numbers(0.2).unwrap(), f.chern_numbers(0.2).unwrap());
        prop_assert!((g.asd_residual().unwrap() - f.asd_residual().unwrap()).abs() < GAUGE_TOL);
    }

    #[test]
    fn wilson_traces_are_gauge_invariant(k in -2i64..=2, seed in any::<u64>()) {
        let f = LinkField::constant_flux(3, k).unwrap();
        let g = f.random_gauge_transform(seed);
        for (a, b) in wilson_traces(&f).iter().zip(wilson_traces(&g).iter()) {
            prop_assert!((a - b).norm() < GAUGE_TOL);
        }
    }

    #[test]
    fn direct_sums_add_invariants(k1 in -2i64..=2, k2 in -2i64..=2, t in 0.0f64..1.0) {
        let a = LinkField::constant_flux(4, k1).unwrap();
        let b = LinkField::constant_flux(4, k2).unwrap().poincare_twist([t, 0.0, 0.0, 0.0]);
        let s = LinkField::direct_sum(&[a, b]).unwrap();
        prop_assert_eq!(
            s.chern_numbers(0.2).unwrap(),
            ChernNumbers::constant_flux(k1).add(&ChernNumbers::constant_flux(k2))
        );
    }
}

#[test]
fn twisting_the_input_keeps_the_transform_invariants() {
    let f = LinkField::constant_flux(6, 1).unwrap();
    let settings = SpectralSettings::default();
    let want = transform_numbers(&ChernNumbers::constant_flux(1)).unwrap();
    for xi in [[0.0; 4], [0.25, 0.5, 0.1, 0.9]] {
        let b = transform_bundle(&f.poincare_twist(xi), 4, &settings).unwrap();
        assert_eq!(transform_invariants(&b, 0.2).unwrap(), want);
    }
}

#[test]
fn pipeline_verdicts_ignore_a_gauge_transformation() {
    let input = InputSpec::DirectSum { parts: vec![FluxPart { k: 1, twist: [0.0; 4] }, FluxPart { k: 1, twist: [0.5, 0.0, 0.0, 0.0] }] };
    let mut plain = RunConfig::new(input, 4, 2);
    plain.checks.irreducibility = true;
    let mut gauged = plain.clone();
    gauged.gauge_seed = Some(17);
    let (a, b) = (run_pipeline(&plain), run_pipeline(&gauged));
    assert_eq!(a.exit_code, EXIT_OK, "{:?}", a.errors);
    assert_eq!(b.exit_code, EXIT_OK, "{:?}", b.errors);
    assert!(!b.input.as_ref().unwrap().factorised);
    let (ta, tb) = (a.transform.unwrap(), b.transform.unwrap());
    assert_eq!(ta.rank, tb.rank);
    assert_eq!(ta.invariants, tb.invariants);
    assert!((ta.asd_residual.unwrap() - tb.asd_residual.unwrap()).abs() < GAUGE_TOL);
    let (ra, rb) = (ta.raw_invariants.unwrap(), tb.raw_invariants.unwrap());
    assert!((ra.ch2 - rb.ch2).abs() < GAUGE_TOL);
    let (ia, ib) = (a.irreducibility.unwrap(), b.irreducibility.unwrap());
    assert_eq!((ia.verdict, ia.algebra_dim, ia.commutant_dim), (ib.verdict, ib.algebra_dim, ib.commutant_dim));
}
