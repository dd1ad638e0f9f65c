use ecs_core::chartcalc::*;
use ecs_core::d1family::Dichotomy;
use ecs_core::d2family::*;
use ecs_core::linalg::ix2;
use ecs_core::olszak::{olszak_fiber, rank_one_weyl_witness, KERNEL_TOL};
use proptest::prelude::*;

fn surface(data: &D2Data) -> Vec<ChartPoint> {
    chart_grid(&data.conn, 7, 0.8)
}

#[test]
fn flat_fixture_is_symmetric() {
    let d = flat_fixture();
    assert!(validate(&d).is_empty());
    assert!(phi_residual(&d, &surface(&d)).unwrap() < 1e-10);
    let prof = ToleranceProfile::with_grid(default_grid(&d, 3, 81, 1));
    let r = local_symmetry_dichotomy(&d, &prof, &surface(&d)).unwrap();
    assert_eq!(r.verdict, Dichotomy::Symmetric);
    assert!(r.nabla_r < 1e-6);
}

#[test]
fn nonflat_fixture_has_two_dimensional_olszak_distribution() {
    for n in [4, 5, 6] {
        let d = nonflat_fixture(n, 1).unwrap();
        let m = build_d2_metric(&d).unwrap();
        let prof = ToleranceProfile::with_grid(default_grid(&d, 2, 24, 7));
        let rep = verify_grid(&m, &prof).unwrap();
        assert!(rep.max_nabla_weyl < 1e-6, "n = {n}: {rep:?}");
        assert!(rep.max_nabla_riem > 1e-3);
        assert!(rep.min_weyl > 1e-3);
        for x in &prof.grid {
            let pack = curvature_pack::<_, f64>(&m, x, &prof).unwrap();
            let fib = olszak_fiber(&pack, KERNEL_TOL).unwrap();
            assert_eq!(fib.dim, 2, "n = {n} at {:?}", x.coords);
            assert!(fib.nullity_residual.unwrap() < 1e-8);
            let w = rank_one_weyl_witness(&pack, Some(&fib), KERNEL_TOL).unwrap();
            assert!(w.residual < 1e-6);
            assert_eq!(w.rank, 2);
            assert!(w.image_sine.unwrap() < 1e-8);
        }
    }
}

#[test]
fn witness_is_stable_up_to_sign() {
    // ω is fixed up to sign; both signs give the same ω⊗ω
    let d = nonflat_fixture(4, -1).unwrap();
    let m = build_d2_metric(&d).unwrap();
    let x = ChartPoint::new(vec![0.1, -0.2, 0.3, 0.5]);
    let prof = ToleranceProfile::default();
    let pack = curvature_pack::<_, f64>(&m, &x, &prof).unwrap();
    let w = rank_one_weyl_witness(&pack, None, KERNEL_TOL).unwrap();
    let flipped: Vec<f64> = w.omega.iter().map(|v| -v).collect();
    let n = 4;
    let mut worst = 0.0f64;
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let a = w.omega[ix2(n, k, l)] * w.omega[ix2(n, i, j)];
                    let b = flipped[ix2(n, k, l)] * flipped[ix2(n, i, j)];
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    assert_eq!(worst, 0.0);
    // a second evaluation returns the same ω up to sign
    let again = rank_one_weyl_witness(&pack, None, KERNEL_TOL).unwrap();
    let same = w
        .omega
        .iter()
        .zip(&again.omega)
        .all(|(a, b)| (a - b).abs() < 1e-12);
    let opposite = w
        .omega
        .iter()
        .zip(&again.omega)
        .all(|(a, b)| (a + b).abs() < 1e-12);
    assert!(same || opposite);
}

#[test]
fn ricci_of_connection_is_symmetric_when_area_form_is_parallel() {
    let d = nonflat_fixture(4, 1).unwrap();
    let grid = surface(&d);
    assert!(area_parallel_residual(&d.conn, &d.zeta, &grid).unwrap() < 1e-12);
    for p in &grid {
        let r = ricci_of_connection(&d.conn, [p.coords[0], p.coords[1]]).unwrap();
        assert!(r.symmetry_residual < 1e-12);
    }
}

#[test]
fn four_dimensional_metric_is_extension_minus_two_tau() {
    let d = nonflat_fixture(4, 1).unwrap();
    let m = build_d2_metric(&d).unwrap();
    let h = riemann_extension(&d.conn);
    let phi = d.phi.clone().unwrap();
    for x in [[0.1, 0.2, 0.3, -0.4], [-0.3, 0.25, 1.0, 0.0]] {
        let g: Vec<f64> = m.eval(&x);
        let hx: Vec<f64> = h.eval(&x);
        let tau = tau_from_phi(d.zeta.eval(x[0], x[1]), phi.matrix([x[0], x[1]]));
        for a in 0..4 {
            for b in 0..4 {
                let t = if a < 2 && b < 2 { tau[a][b] } else { 0.0 };
                assert!((g[ix2(4, a, b)] - (hx[ix2(4, a, b)] - 2.0 * t)).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn higher_dimensional_metric_signature() {
    let d = nonflat_fixture(6, 1).unwrap();
    let m = build_d2_metric(&d).unwrap();
    assert_eq!(m.signature(), Signature::new(3, 3));
    let d = nonflat_fixture(5, 1).unwrap();
    assert_eq!(
        build_d2_metric(&d).unwrap().signature(),
        Signature::new(3, 2)
    );
}

#[test]
fn quadratic_christoffel_is_rejected() {
    let mut d = flat_fixture();
    d.conn.gamma[0][0] = ChartFunction::poly(Polynomial2::new(vec![(0, 2, 1.0)]));
    let v = validate(&d);
    assert!(v.iter().any(|m| m.contains("projective flatness")), "{v:?}");
    assert!(v.iter().any(|m| m.contains("ζ parallelism")));
    assert!(build_d2_metric(&d).is_err());
}

#[test]
fn invalid_parameters_are_reported() {
    let mut d = flat_fixture();
    d.epsilon = 0;
    d.n = 5;
    let v = validate(&d);
    assert!(v.iter().any(|m| m.contains("ε")));
    assert!(v.iter().any(|m| m.contains("gram must have 1")));
    let mut d = flat_fixture();
    d.phi = None;
    assert!(validate(&d).iter().any(|m| m.contains("missing")));
}

#[test]
fn nonflat_ricci_is_not_parallel() {
    let d = nonflat_fixture(4, 1).unwrap();
    assert!(ricci_parallel_residual(&d.conn, &surface(&d)).unwrap() > 1e-3);
    assert!(projective_flatness_residual(&d.conn, &surface(&d)).unwrap() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn extension_pairs_vertical_with_projection(
        x in -0.4f64..0.4, y in -0.4f64..0.4,
        p1 in -2.0f64..2.0, p2 in -2.0f64..2.0,
        xi in prop::array::uniform2(-2.0f64..2.0),
        w in prop::array::uniform4(-2.0f64..2.0),
    ) {
        let d = nonflat_fixture(4, 1).unwrap();
        let h = riemann_extension(&d.conn);
        let g: Vec<f64> = h.eval(&[x, y, p1, p2]);
        let v = [0.0, 0.0, xi[0], xi[1]];
        let hw: f64 = (0..4)
            .flat_map(|a| (0..4).map(move |b| (a, b)))
            .map(|(a, b)| g[ix2(4, a, b)] * v[a] * w[b])
            .sum();
        prop_assert!((hw - (xi[0] * w[0] + xi[1] * w[1])).abs() < 1e-13);
    }
}
