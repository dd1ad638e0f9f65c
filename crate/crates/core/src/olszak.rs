//! The Olszak distribution: at each point, the vectors `u` with
//! `g(u,·) ∧ W(v,v′,·,·) = 0` for all `v, v′`, and the rank-one Weyl
//! structure `W = ±ω⊗ω` that accompanies dimension two.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chartcalc::{gamma_at, ChartPoint, CurvaturePack, MetricField, ToleranceProfile};
use crate::error::{Error, Result};
use crate::linalg::{ix2, ix3, ix4, max_abs, numerical_rank, subspace_sine};
use crate::ode::{integrate, OdeOptions};

/// Relative singular-value threshold below which a direction counts as kernel.
pub const KERNEL_TOL: f64 = 1e-7;
/// Required ratio between the smallest kept and largest dropped singular value.
pub const MIN_GAP: f64 = 1e3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionFiber {
    pub point: ChartPoint,
    pub dim: usize,
    pub basis: Vec<Vec<f64>>,
    /// `max |g(u_i, u_j)|` over basis pairs; `None` when `dim = n` (skipped).
    pub nullity_residual: Option<f64>,
    pub singular_values: Vec<f64>,
}

impl DistributionFiber {
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        let n = self.point.dim();
        DMatrix::from_fn(n, self.basis.len(), |r, c| self.basis[c][r])
    }
}

/// Row `(a<b, c<d<e)`, column `m`: coefficient of `u^m` in
/// `(g(u,·) ∧ W(e_a,e_b,·,·))_cde`.
pub fn olszak_matrix(pack: &CurvaturePack<f64>) -> DMatrix<f64> {
    let n = pack.n;
    let g = &pack.metric;
    let w = &pack.weyl_down;
    let mut rows = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            for c in 0..n {
                for d in (c + 1)..n {
                    for e in (d + 1)..n {
                        let row: Vec<f64> = (0..n)
                            .map(|m| {
                                g[ix2(n, c, m)] * w[ix4(n, a, b, d, e)]
                                    - g[ix2(n, d, m)] * w[ix4(n, a, b, c, e)]
                                    + g[ix2(n, e, m)] * w[ix4(n, a, b, c, d)]
                            })
                            .collect();
                        rows.push(row);
                    }
                }
            }
        }
    }
    DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c])
}

/// Olszak fiber at the pack's point. `tol` is relative to the largest
/// singular value; a spectral gap below [`MIN_GAP`] between kept and dropped
/// values is reported as [`Error::AmbiguousDimension`].
pub fn olszak_fiber(pack: &CurvaturePack<f64>, tol: f64) -> Result<DistributionFiber> {
    let n = pack.n;
    let wmax = max_abs(&pack.weyl_down);
    let rmax = max_abs(&pack.riem_down);
    if wmax <= 1e-10 * rmax.max(1.0) {
        let basis = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        return Ok(DistributionFiber {
            point: pack.point.clone(),
            dim: n,
            basis,
            nullity_residual: None,
            singular_values: vec![0.0; n],
        });
    }
    let m = olszak_matrix(pack);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let cut = tol * sv[0];
    let kept = sv.iter().filter(|&&s| s > cut).count();
    let dim = n - kept;
    if kept > 0 && kept < n {
        let gap = sv[kept - 1] / sv[kept].max(f64::MIN_POSITIVE);
        if gap < MIN_GAP {
            return Err(Error::AmbiguousDimension {
                lower: dim,
                upper: dim + 1,
                gap,
            });
        }
    }
    let basis: Vec<Vec<f64>> = order[kept..]
        .iter()
        .map(|&r| (0..n).map(|c| v_t[(r, c)]).collect())
        .collect();
    let g = &pack.metric;
    let mut nullity = 0.0f64;
    for u in &basis {
        for v in &basis {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += g[ix2(n, i, j)] * u[i] * v[j];
                }
            }
            nullity = nullity.max(acc.abs());
        }
    }
    Ok(DistributionFiber {
        point: pack.point.clone(),
        dim,
        basis,
        nullity_residual: Some(nullity),
        singular_values: sv,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NullityParallelReport {
    /// `max |g(u, u′)|` over every fiber with `dim < n`.
    pub nullity: f64,
    /// Largest subspace sine between a transported fiber and the fiber
    /// computed at the endpoint.
    pub parallelism: f64,
    /// Fibers skipped because `dim = n` (nothing to check).
    pub skipped: usize,
    pub segments: usize,
}

/// Transports `vectors` along the straight segment `from → to` by solving
/// `dU^k/dτ = −Γ^k_ij ẋ^i U^j`.
pub fn parallel_transport<M: MetricField>(
    field: &M,
    from: &[f64],
    to: &[f64],
    vectors: &[Vec<f64>],
    opts: &OdeOptions,
) -> Result<Vec<Vec<f64>>> {
    let n = field.dim();
    let k = vectors.len();
    let vel: Vec<f64> = to.iter().zip(from).map(|(b, a)| b - a).collect();
    let y0: Vec<f64> = vectors.iter().flatten().copied().collect();
    let failure = std::sync::Mutex::new(None);
    let rhs = |tau: f64, y: &[f64], dy: &mut [f64]| {
        let x: Vec<f64> = (0..n).map(|i| from[i] + tau * vel[i]).collect();
        let gamma = match gamma_at(field, &x) {
            Ok(g) => g,
            Err(e) => {
                *failure.lock().unwrap() = Some(e);
                dy.fill(0.0);
                return;
            }
        };
        for v in 0..k {
            let u = &y[v * n..(v + 1) * n];
            for kk in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    if vel[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        acc += gamma[ix3(n, kk, i, j)] * vel[i] * u[j];
                    }
                }
                dy[v * n + kk] = -acc;
            }
        }
    };
    let y = integrate(rhs, 0.0, 1.0, &y0, opts)?;
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(y.chunks(n).map(|c| c.to_vec()).collect())
}

/// Nullity of every fiber, and parallelism checked by transporting each
/// fiber to the next one in the list.
pub fn nullity_parallel_check<M: MetricField>(
    field: &M,
    fibers: &[DistributionFiber],
    _prof: &ToleranceProfile,
) -> Result<NullityParallelReport> {
    let n = field.dim();
    let mut report = NullityParallelReport {
        nullity: 0.0,
        parallelism: 0.0,
        skipped: 0,
        segments: 0,
    };
    for f in fibers {
        match f.nullity_residual {
            Some(r) if f.dim < n => report.nullity = report.nullity.max(r),
            _ => report.skipped += 1,
        }
    }
    let opts = OdeOptions {
        rtol: 1e-11,
        atol: 1e-12,
        ..OdeOptions::default()
    };
    for pair in fibers.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.dim == n || b.dim == n || a.dim == 0 {
            continue;
        }
        let moved = parallel_transport(field, &a.point.coords, &b.point.coords, &a.basis, &opts)?;
        let m = DMatrix::from_fn(n, moved.len(), |r, c| moved[c][r]);
        report.parallelism = report.parallelism.max(subspace_sine(&m, &b.basis_matrix()));
        report.segments += 1;
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankOneWeylWitness {
    /// `ω_ij`, row-major `n×n`, antisymmetric.
    pub omega: Vec<f64>,
    pub sign: i8,
    /// `max |W − sign·ω⊗ω|`.
    pub residual: f64,
    /// Rank of `ω` as an endomorphism (via `g`).
    pub rank: usize,
    /// Subspace sine between `image(ω)` and the Olszak fiber, when given.
    pub image_sine: Option<f64>,
}

/// `W` as a symmetric operator on 2-forms (basis `e_i∧e_j`, `i<j`); a witness
/// exists iff exactly one eigenvalue exceeds `tol` times the largest.
pub fn rank_one_weyl_witness(
    pack: &CurvaturePack<f64>,
    fiber: Option<&DistributionFiber>,
    tol: f64,
) -> Option<RankOneWeylWitness> {
    let n = pack.n;
    let w = &pack.weyl_down;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let p = pairs.len();
    let m = DMatrix::from_fn(p, p, |r, c| {
        let (a, b) = pairs[r];
        let (cc, d) = pairs[c];
        0.5 * (w[ix4(n, a, b, cc, d)] + w[ix4(n, cc, d, a, b)])
    });
    let eig = SymmetricEigen::new(m);
    let top = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, e| acc.max(e.abs()));
    if top <= 1e-10 {
        return None;
    }
    let big: Vec<usize> = (0..p)
        .filter(|&i| eig.eigenvalues[i].abs() > tol * top)
        .collect();
    if big.len() != 1 {
        return None;
    }
    let e = eig.eigenvalues[big[0]];
    let scale = e.abs().sqrt();
    let mut omega = vec![0.0; n * n];
    for (r, &(a, b)) in pairs.iter().enumerate() {
        let v = scale * eig.eigenvectors[(r, big[0])];
        omega[ix2(n, a, b)] = v;
        omega[ix2(n, b, a)] = -v;
    }
    let sign: f64 = if e > 0.0 { 1.0 } else { -1.0 };
    let mut residual = 0.0f64;
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let d =
                        w[ix4(n, k, l, i, j)] - sign * omega[ix2(n, k, l)] * omega[ix2(n, i, j)];
                    residual = residual.max(d.abs());
                }
            }
        }
    }
    // ω^a_b = g^{ac} ω_cb
    let gi = &pack.inverse_metric;
    let endo = DMatrix::from_fn(n, n, |a, b| {
        (0..n).map(|c| gi[ix2(n, a, c)] * omega[ix2(n, c, b)]).sum()
    });
    let norm = endo.abs().max();
    let rank = numerical_rank(&endo, KERNEL_TOL * norm.max(f64::MIN_POSITIVE));
    let image_sine = fiber.map(|f| subspace_sine(&endo, &f.basis_matrix()));
    Some(RankOneWeylWitness {
        omega,
        sign: sign as i8,
        residual,
        rank,
        image_sine,
    })
}

/// Olszak fiber of the packs computed from `field` on the profile grid.
pub fn fibers_on_grid<M: MetricField>(
    field: &M,
    prof: &ToleranceProfile,
    tol: f64,
) -> Result<Vec<DistributionFiber>> {
    use rayon::prelude::*;
    prof.validate()?;
    prof.grid
        .par_iter()
        .map(|x| {
            let pack = crate::chartcalc::curvature_pack::<M, f64>(field, x, prof)?;
            olszak_fiber(&pack, tol)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chartcalc::curvature_pack;
    use crate::chartcalc::fixtures::FlatMetric;
    use crate::d1family::{build_metric, default_grid, sine_example};

    #[test]
    fn flat_metric_has_full_fiber_and_no_witness() {
        let f = FlatMetric::new(&[1.0, -1.0, 1.0, 1.0, -1.0]);
        let x = ChartPoint::new(vec![0.0; 5]);
        let pack = curvature_pack(&f, &x, &ToleranceProfile::default()).unwrap();
        let fib = olszak_fiber(&pack, KERNEL_TOL).unwrap();
        assert_eq!(fib.dim, 5);
        assert!(fib.nullity_residual.is_none());
        assert!(rank_one_weyl_witness(&pack, None, KERNEL_TOL).is_none());
    }

    #[test]
    fn d1_metric_fiber_is_the_null_s_direction() {
        let m = build_metric(&sine_example()).unwrap();
        let x = ChartPoint::new(vec![0.3, 0.1, 0.4, -0.2]);
        let pack = curvature_pack(&m, &x, &ToleranceProfile::default()).unwrap();
        let fib = olszak_fiber(&pack, KERNEL_TOL).unwrap();
        assert_eq!(fib.dim, 1);
        assert!(fib.nullity_residual.unwrap() < 1e-12);
        let ds = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 0.0, 0.0]);
        assert!(subspace_sine(&fib.basis_matrix(), &ds) < 1e-10);
        assert!(rank_one_weyl_witness(&pack, Some(&fib), KERNEL_TOL).is_none());
    }

    #[test]
    fn d1_fibers_are_parallel() {
        let d = sine_example();
        let m = build_metric(&d).unwrap();
        let prof = ToleranceProfile::with_grid(default_grid(&d, 3, 12, 5));
        let fibers = fibers_on_grid(&m, &prof, KERNEL_TOL).unwrap();
        let r = nullity_parallel_check(&m, &fibers, &prof).unwrap();
        assert_eq!(r.segments, fibers.len() - 1);
        assert!(r.nullity < 1e-10 && r.parallelism < 1e-8, "{r:?}");
    }

    #[test]
    fn transport_preserves_inner_products() {
        let d = sine_example();
        let m = build_metric(&d).unwrap();
        let (a, b) = ([0.1, 0.0, 0.3, -0.5], [0.9, 0.4, -0.2, 0.6]);
        let vs = vec![vec![1.0, 0.0, 0.5, 0.0], vec![0.0, 0.3, 0.0, 1.0]];
        let out = parallel_transport(&m, &a, &b, &vs, &OdeOptions::default()).unwrap();
        let ga: Vec<f64> = m.eval(&a);
        let gb: Vec<f64> = m.eval(&b);
        let ip = |g: &[f64], u: &[f64], v: &[f64]| -> f64 {
            (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| g[i * 4 + j] * u[i] * v[j])
                .sum()
        };
        for i in 0..2 {
            for j in 0..2 {
                assert!((ip(&ga, &vs[i], &vs[j]) - ip(&gb, &out[i], &out[j])).abs() < 1e-10);
            }
        }
    }
}
