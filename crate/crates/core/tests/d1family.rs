use ecs_core::chartcalc::*;
use ecs_core::d1family::*;
use ecs_core::olszak::{olszak_fiber, rank_one_weyl_witness, KERNEL_TOL};
use ecs_core::series::TrigSeries;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn with_f(f: ProfileFunction) -> D1Data {
    D1Data {
        f,
        ..sine_example()
    }
}

fn small_grid(data: &D1Data) -> ToleranceProfile {
    ToleranceProfile::with_grid(default_grid(data, 3, 40, 11))
}

#[test]
fn kappa_matches_direct_formula() {
    let m = build_metric(&sine_example()).unwrap();
    let g: Vec<f64> = m.eval(&[0.3, 0.0, 1.0, 2.0]);
    assert!((g[0] - (5.0 * 0.3f64.sin() - 3.0)).abs() < 1e-14);
    assert_eq!(g[1], 0.5);
    assert_eq!(g[5], 0.0);
}

#[test]
fn validation_reports_each_problem() {
    let mut d = sine_example();
    d.n = 3;
    assert!(validate(&d)[0].contains("at least 4"));

    let mut d = sine_example();
    d.gram = vec![1.0, 0.0, 0.0, 0.0];
    assert!(validate(&d).iter().any(|m| m.contains("degenerate")));

    let mut d = sine_example();
    d.a = vec![0.0; 4];
    assert!(validate(&d).iter().any(|m| m == "A = 0"));

    let mut d = sine_example();
    d.a = vec![1.0, 2.0, 0.0, -1.0];
    assert!(validate(&d).iter().any(|m| m.contains("self-adjoint")));

    let mut d = sine_example();
    d.period = Some(1.0);
    assert!(validate(&d).iter().any(|m| m.contains("periodic")));

    let mut d = sine_example();
    d.interval = Some((1.0, 1.0));
    assert!(validate(&d).iter().any(|m| m.contains("empty")));

    assert!(matches!(
        build_metric(&d),
        Err(ecs_core::Error::InvalidInput(_))
    ));
}

#[test]
fn constant_profile_is_locally_symmetric() {
    let d = with_f(ProfileFunction::Constant { value: 2.0 });
    let r = local_symmetry_dichotomy(&d, &small_grid(&d)).unwrap();
    assert_eq!(r.verdict, Dichotomy::Symmetric);
    assert!(r.nabla_r < 1e-10);
}

#[test]
fn sine_profile_is_not_locally_symmetric() {
    let d = sine_example();
    let r = local_symmetry_dichotomy(&d, &small_grid(&d)).unwrap();
    assert_eq!(r.verdict, Dichotomy::EssentiallyConformallySymmetric);
    assert!(r.nabla_r > 1e-3);
}

#[test]
fn vanishing_profile_is_symmetric_with_nonzero_weyl() {
    let d = with_f(ProfileFunction::Constant { value: 0.0 });
    let prof = small_grid(&d);
    let r = local_symmetry_dichotomy(&d, &prof).unwrap();
    assert_eq!(r.verdict, Dichotomy::Symmetric);
    let report = verify_grid(&build_metric(&d).unwrap(), &prof).unwrap();
    assert!(report.min_weyl > 0.1);
    assert_eq!(report.max_ricci_rank, 0);
}

#[test]
fn trig_series_with_zero_harmonics_counts_as_constant() {
    let f = ProfileFunction::Trigonometric(TrigSeries {
        period: 1.0,
        constant: 0.7,
        cos: vec![0.0, 0.0],
        sin: vec![0.0],
    });
    assert!(f.is_constant());
    let d = with_f(f);
    let r = local_symmetry_dichotomy(&d, &small_grid(&d)).unwrap();
    assert_eq!(r.verdict, Dichotomy::Symmetric);
}

#[test]
fn sine_example_is_ecs_with_one_dimensional_fiber() {
    let d = sine_example();
    let m = build_metric(&d).unwrap();
    let prof = small_grid(&d);
    let r = verify_grid(&m, &prof).unwrap();
    assert!(r.max_scalar < 1e-12);
    assert!(r.max_nabla_weyl < 1e-10);
    assert!(r.max_harmonic < 1e-10 && r.max_semisymmetry < 1e-10);
    assert!(r.max_recurrence < 1e-10);
    assert!(r.max_ricci_rank <= 1);
    for x in &prof.grid {
        let pack = curvature_pack::<_, f64>(&m, x, &prof).unwrap();
        let fib = olszak_fiber(&pack, KERNEL_TOL).unwrap();
        assert_eq!(fib.dim, 1);
        assert!(rank_one_weyl_witness(&pack, Some(&fib), KERNEL_TOL).is_none());
    }
}

#[test]
fn data_round_trips_through_json() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let d = random_d1data(&mut rng, 5);
    let text = serde_json::to_string_pretty(&d).unwrap();
    let back: D1Data = serde_json::from_str(&text).unwrap();
    assert_eq!(back, d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_data_gives_ecs_metrics(seed in any::<u64>(), n in 4usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_d1data(&mut rng, n);
        prop_assert!(validate(&d).is_empty());
        let m = build_metric(&d).unwrap();
        let prof = ToleranceProfile::with_grid(default_grid(&d, 3, 6, seed));
        let r = verify_grid(&m, &prof).unwrap();
        prop_assert!(r.max_scalar < 1e-8);
        prop_assert!(r.max_nabla_weyl < 1e-6);
        prop_assert!(r.max_harmonic < 1e-6 && r.max_semisymmetry < 1e-6);
        prop_assert!(r.max_recurrence < 1e-6);
        prop_assert!(r.max_ricci_rank <= 2);
        prop_assert_eq!(m.signature(), d.v_signature().combine(Signature::new(1, 1)));
    }

    #[test]
    fn metric_ignores_s(t in -2.0f64..2.0, s1 in -50.0f64..50.0, s2 in -50.0f64..50.0) {
        let m = build_metric(&sine_example()).unwrap();
        let a: Vec<f64> = m.eval(&[t, s1, 0.4, -0.7]);
        let b: Vec<f64> = m.eval(&[t, s2, 0.4, -0.7]);
        prop_assert_eq!(a, b);
    }
}
