use ecs_core::chartcalc::fixtures::{FlatMetric, ScaledMetric, WarpedMetric};
use ecs_core::chartcalc::*;
use ecs_core::d1family::{build_metric, sine_example};
use ecs_core::linalg::{ix3, ix4};
use proptest::prelude::*;

fn fd_profile(h: f64) -> ToleranceProfile {
    ToleranceProfile {
        fd_step: vec![h],
        mode: DerivativeMode::CentralDifference { richardson: false },
        ..ToleranceProfile::default()
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn christoffel_matches_half_step_difference_oracle() {
    let metric = build_metric(&sine_example()).unwrap();
    let x = ChartPoint::new(vec![0.7, -0.3, 0.4, -1.1]);
    let exact = christoffel(&metric, &x, &ToleranceProfile::default()).unwrap();
    // oracle: Γ from the metric evaluator differenced directly at half step
    let n = 4;
    let h = 0.5e-4;
    let g = |y: &[f64]| -> Vec<f64> { metric.eval(y) };
    let mut dg = vec![0.0; n * n * n];
    for m in 0..n {
        let mut xp = x.coords.clone();
        let mut xm = x.coords.clone();
        xp[m] += h;
        xm[m] -= h;
        let (gp, gm) = (g(&xp), g(&xm));
        for ab in 0..n * n {
            dg[m * n * n + ab] = (gp[ab] - gm[ab]) / (2.0 * h);
        }
    }
    let g0 = nalgebra::DMatrix::from_row_slice(n, n, &g(&x.coords));
    let gi = g0.try_inverse().unwrap();
    let mut oracle = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for l in 0..n {
                    let d = |a: usize, b: usize, c: usize| dg[a * n * n + b * n + c];
                    v += 0.5 * gi[(k, l)] * (d(i, l, j) + d(j, l, i) - d(l, i, j));
                }
                oracle[ix3(n, k, i, j)] = v;
            }
        }
    }
    assert!(max_diff(&exact.gamma, &oracle) < 1e-8);
}

#[test]
fn christoffel_step_halving_is_second_order() {
    let metric = build_metric(&sine_example()).unwrap();
    let x = ChartPoint::new(vec![0.7, -0.3, 0.4, -1.1]);
    let exact = christoffel(&metric, &x, &ToleranceProfile::default()).unwrap();
    let e1 = max_diff(
        &christoffel(&metric, &x, &fd_profile(2e-3)).unwrap().gamma,
        &exact.gamma,
    );
    let e2 = max_diff(
        &christoffel(&metric, &x, &fd_profile(1e-3)).unwrap().gamma,
        &exact.gamma,
    );
    let factor = e1 / e2;
    assert!((3.5..=4.5).contains(&factor), "factor {factor}");
}

#[test]
fn flat_metric_has_zero_curvature_and_christoffels() {
    let m = FlatMetric::new(&[1.0, -1.0, 1.0, -1.0, 1.0]);
    let x = ChartPoint::new(vec![0.1, 0.2, 0.3, 0.4, 0.5]);
    let c = christoffel(&m, &x, &ToleranceProfile::default()).unwrap();
    assert!(c.gamma.iter().all(|v| *v == 0.0));
    let p: CurvaturePack64 = curvature_pack(&m, &x, &ToleranceProfile::default()).unwrap();
    assert_eq!(p.scalar, 0.0);
    assert!(p.weyl_down.iter().all(|v| *v == 0.0));
}

type CurvaturePack64 = CurvaturePack<f64>;

#[test]
fn warped_metric_fixture_values() {
    let m = WarpedMetric::new(4);
    let mut prof = ToleranceProfile::with_grid(box_grid(&[0.0; 4], &[1.0; 4], 3, 81, 0));
    prof.tol_second = 1e-6;
    let harmonic = check_harmonic_curvature(&m, &prof).unwrap();
    let nabla = local_symmetry_residual(&m, &prof).unwrap();
    assert!(harmonic > 1e-3, "harmonic residual {harmonic}");
    assert!(nabla > 1e-3);
    // recorded values for this grid
    assert!((harmonic - 1.0).abs() < 1e-12);
    assert!((nabla - 1.0).abs() < 1e-12);
}

#[test]
fn d1_sine_example_ricci_has_rank_one_where_f_nonzero() {
    let metric = build_metric(&sine_example()).unwrap();
    let x = ChartPoint::new(vec![0.9, 0.0, 0.3, 0.2]);
    let p: CurvaturePack64 = curvature_pack(&metric, &x, &ToleranceProfile::default()).unwrap();
    assert_eq!(ricci_rank(&p, 1e-6), 1);
    // oracle: only ρ_tt survives, equal to −(n−2)·f(t) = −2 sin t
    for a in 0..4 {
        for b in 0..4 {
            let expected = if a == 0 && b == 0 {
                -2.0 * 0.9f64.sin()
            } else {
                0.0
            };
            assert!((p.ricci[a * 4 + b] - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn d1_metric_is_independent_of_s() {
    let metric = build_metric(&sine_example()).unwrap();
    let a: Vec<f64> = metric.eval(&[0.3, -5.0, 0.2, 0.4]);
    let b: Vec<f64> = metric.eval(&[0.3, 17.0, 0.2, 0.4]);
    assert_eq!(a, b);
}

#[test]
fn pack_identities_hold_on_curved_fixture() {
    let m = WarpedMetric::new(5);
    let x = ChartPoint::new(vec![0.2, 0.7, -0.1, 0.3, 0.0]);
    let p: CurvaturePack64 = curvature_pack(&m, &x, &ToleranceProfile::default()).unwrap();
    let n = 5;
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(
                        p.riem_down[ix4(n, k, l, i, j)],
                        -p.riem_down[ix4(n, l, k, i, j)]
                    );
                }
            }
        }
    }
    assert!(first_bianchi_residual(&p) < 1e-12);
    assert!(weyl_trace_residual(&p) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mixed_weyl_is_scale_invariant(c in 0.1f64..10.0, t in -1.0f64..1.0, v in -1.0f64..1.0) {
        let base = build_metric(&sine_example()).unwrap();
        let scaled = ScaledMetric::new(base.clone(), c);
        let x = ChartPoint::new(vec![t, 0.2, v, -0.4]);
        let prof = ToleranceProfile::default();
        let p: CurvaturePack64 = curvature_pack(&base, &x, &prof).unwrap();
        let q: CurvaturePack64 = curvature_pack(&scaled, &x, &prof).unwrap();
        let n = 4;
        // W^k_lij = g^ka W_alij
        let mixed = |pk: &CurvaturePack64| -> Vec<f64> {
            let mut out = vec![0.0; n * n * n * n];
            for k in 0..n { for l in 0..n { for i in 0..n { for j in 0..n {
                out[ix4(n, k, l, i, j)] = (0..n)
                    .map(|a| pk.inverse_metric[k * n + a] * pk.weyl_down[ix4(n, a, l, i, j)])
                    .sum();
            }}}}
            out
        };
        prop_assert!(max_diff(&mixed(&p), &mixed(&q)) < 1e-6);
        let cq = christoffel(&scaled, &x, &prof).unwrap();
        let cp = christoffel(&base, &x, &prof).unwrap();
        prop_assert!(max_diff(&cp.gamma, &cq.gamma) < 1e-12);
    }

    #[test]
    fn exact_and_differenced_christoffels_agree(t in -1.0f64..1.0, s in -1.0f64..1.0, v in -1.0f64..1.0) {
        let metric = build_metric(&sine_example()).unwrap();
        let x = ChartPoint::new(vec![t, s, v, 0.5 * v]);
        let exact = christoffel(&metric, &x, &ToleranceProfile::default()).unwrap();
        let prof = ToleranceProfile {
            mode: DerivativeMode::CentralDifference { richardson: true },
            ..ToleranceProfile::default()
        };
        let fd = christoffel(&metric, &x, &prof).unwrap();
        prop_assert!(max_diff(&exact.gamma, &fd.gamma) < 1e-8);
        prop_assert!(exact.compatibility_residual < 1e-8);
    }
}
