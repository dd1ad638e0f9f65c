use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ix2, ix3, ix4, max_abs, numerical_rank, singular_values, to_dmatrix};
use crate::scalar::Scalar;

use super::curvature::{
    curvature_pack, first_bianchi_residual, weyl_trace_residual, CurvaturePack,
};
use super::{ChartPoint, MetricField, ToleranceProfile};

/// `max |∇_i ρ_jk − ∇_j ρ_ik|` (Codazzi residual).
pub fn harmonic_residual_at<S: Scalar>(pack: &CurvaturePack<S>) -> f64 {
    let n = pack.n;
    let d = &pack.nabla_ricci;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                worst = worst.max((d[ix3(n, i, j, k)] - d[ix3(n, j, i, k)]).re().abs());
            }
        }
    }
    worst
}

/// `max |R·R|` with the derivation action
/// `(R(∂_a,∂_b)·T)_klij = −T(R(∂_a,∂_b)∂_k, ∂_l, ∂_i, ∂_j) − …` over all four slots.
pub fn semisymmetry_residual_at<S: Scalar>(pack: &CurvaturePack<S>) -> f64 {
    let n = pack.n;
    let up = &pack.riem_up;
    let r = &pack.riem_down;
    // R^m_{kab} for slot k is up[ix4(n, m, k, a, b)]
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in (a + 1)..n {
            for k in 0..n {
                for l in (k + 1)..n {
                    for i in 0..n {
                        for j in (i + 1)..n {
                            let mut acc = S::zero();
                            for m in 0..n {
                                acc += up[ix4(n, m, k, a, b)] * r[ix4(n, m, l, i, j)]
                                    + up[ix4(n, m, l, a, b)] * r[ix4(n, k, m, i, j)]
                                    + up[ix4(n, m, i, a, b)] * r[ix4(n, k, l, m, j)]
                                    + up[ix4(n, m, j, a, b)] * r[ix4(n, k, l, i, m)];
                            }
                            worst = worst.max(acc.re().abs());
                        }
                    }
                }
            }
        }
    }
    worst
}

/// Numerical rank of `ρ_ij` with singular-value threshold `tol`.
pub fn ricci_rank<S: Scalar>(pack: &CurvaturePack<S>, tol: f64) -> usize {
    numerical_rank(&to_dmatrix(&pack.ricci, pack.n, pack.n), tol)
}

/// Largest over directions `i` of the second singular value of the
/// `2 × n(n+1)/2` stack `[vec ρ ; vec ∇_i ρ]` (upper-triangular entries).
pub fn ricci_recurrence_residual_at<S: Scalar>(pack: &CurvaturePack<S>) -> f64 {
    let n = pack.n;
    let m = n * (n + 1) / 2;
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut stack = Vec::with_capacity(2 * m);
        for a in 0..n {
            for b in a..n {
                stack.push(pack.ricci[ix2(n, a, b)].re());
            }
        }
        for a in 0..n {
            for b in a..n {
                stack.push(pack.nabla_ricci[ix3(n, i, a, b)].re());
            }
        }
        let sv = singular_values(&to_dmatrix(&stack, 2, m));
        worst = worst.max(sv.get(1).copied().unwrap_or(0.0));
    }
    worst
}

/// `max |∇R|` at one point.
pub fn local_symmetry_residual_at<S: Scalar>(pack: &CurvaturePack<S>) -> f64 {
    max_abs(&pack.nabla_riem)
}

/// Evaluates `f` on the curvature pack at every grid point (in parallel)
/// and returns the maximum with the point attaining it.
pub fn sweep<M, F>(field: &M, prof: &ToleranceProfile, f: F) -> Result<(f64, ChartPoint)>
where
    M: MetricField,
    F: Fn(&CurvaturePack<f64>) -> f64 + Sync,
{
    prof.validate()?;
    let values: Vec<(f64, usize)> = prof
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, x)| curvature_pack::<M, f64>(field, x, prof).map(|p| (f(&p), i)))
        .collect::<Result<_>>()?;
    let (v, i) = values.into_iter().fold((f64::NEG_INFINITY, 0), |acc, cur| {
        if cur.0 > acc.0 || cur.0.is_nan() {
            cur
        } else {
            acc
        }
    });
    if v.is_nan() {
        return Err(Error::Domain("residual evaluated to NaN".into()));
    }
    Ok((v, prof.grid[i].clone()))
}

pub fn check_harmonic_curvature<M: MetricField>(field: &M, prof: &ToleranceProfile) -> Result<f64> {
    sweep(field, prof, harmonic_residual_at).map(|r| r.0)
}

pub fn check_semisymmetry<M: MetricField>(field: &M, prof: &ToleranceProfile) -> Result<f64> {
    sweep(field, prof, semisymmetry_residual_at).map(|r| r.0)
}

pub fn ricci_recurrence_residual<M: MetricField>(
    field: &M,
    prof: &ToleranceProfile,
) -> Result<f64> {
    sweep(field, prof, ricci_recurrence_residual_at).map(|r| r.0)
}

pub fn local_symmetry_residual<M: MetricField>(field: &M, prof: &ToleranceProfile) -> Result<f64> {
    sweep(field, prof, local_symmetry_residual_at).map(|r| r.0)
}

/// Maxima (and, for `|W|`, the minimum) of every pointwise check over a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub points: usize,
    pub max_scalar: f64,
    pub max_nabla_weyl: f64,
    pub max_nabla_riem: f64,
    pub max_harmonic: f64,
    pub max_semisymmetry: f64,
    pub max_recurrence: f64,
    pub max_bianchi: f64,
    pub max_weyl_trace: f64,
    pub max_ricci_rank: usize,
    pub min_weyl: f64,
    pub max_weyl: f64,
    pub max_condition: f64,
}

impl GridReport {
    fn point<S: Scalar>(p: &CurvaturePack<S>, rank_tol: f64) -> Self {
        let w = max_abs(&p.weyl_down);
        Self {
            points: 1,
            max_scalar: p.scalar.re().abs(),
            max_nabla_weyl: max_abs(&p.nabla_weyl),
            max_nabla_riem: max_abs(&p.nabla_riem),
            max_harmonic: harmonic_residual_at(p),
            max_semisymmetry: semisymmetry_residual_at(p),
            max_recurrence: ricci_recurrence_residual_at(p),
            max_bianchi: first_bianchi_residual(p),
            max_weyl_trace: weyl_trace_residual(p),
            max_ricci_rank: ricci_rank(p, rank_tol),
            min_weyl: w,
            max_weyl: w,
            max_condition: p.condition,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            points: self.points + o.points,
            max_scalar: self.max_scalar.max(o.max_scalar),
            max_nabla_weyl: self.max_nabla_weyl.max(o.max_nabla_weyl),
            max_nabla_riem: self.max_nabla_riem.max(o.max_nabla_riem),
            max_harmonic: self.max_harmonic.max(o.max_harmonic),
            max_semisymmetry: self.max_semisymmetry.max(o.max_semisymmetry),
            max_recurrence: self.max_recurrence.max(o.max_recurrence),
            max_bianchi: self.max_bianchi.max(o.max_bianchi),
            max_weyl_trace: self.max_weyl_trace.max(o.max_weyl_trace),
            max_ricci_rank: self.max_ricci_rank.max(o.max_ricci_rank),
            min_weyl: self.min_weyl.min(o.min_weyl),
            max_weyl: self.max_weyl.max(o.max_weyl),
            max_condition: self.max_condition.max(o.max_condition),
        }
    }
}

/// All pointwise checks over the profile grid. Ricci rank uses `tol_second`
/// as its singular-value threshold.
pub fn verify_grid<M: MetricField>(field: &M, prof: &ToleranceProfile) -> Result<GridReport> {
    prof.validate()?;
    let reports: Vec<GridReport> = prof
        .grid
        .par_iter()
        .map(|x| {
            curvature_pack::<M, f64>(field, x, prof).map(|p| GridReport::point(&p, prof.tol_second))
        })
        .collect::<Result<_>>()?;
    Ok(reports
        .into_iter()
        .reduce(GridReport::merge)
        .expect("validated grid is nonempty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chartcalc::box_grid;
    use crate::chartcalc::fixtures::{CoupledMetric, FlatMetric, WarpedMetric};

    fn grid_prof(n: usize) -> ToleranceProfile {
        ToleranceProfile::with_grid(box_grid(&vec![0.1; n], &[0.5], 3, 30, 1))
    }

    #[test]
    fn flat_metric_passes_everything_trivially() {
        let f = FlatMetric::new(&[1.0, 1.0, -1.0, -1.0]);
        let r = verify_grid(&f, &grid_prof(4)).unwrap();
        assert_eq!(r.max_ricci_rank, 0);
        assert!(r.max_nabla_riem < 1e-12 && r.max_semisymmetry < 1e-12 && r.max_weyl < 1e-12);
    }

    #[test]
    fn warped_metric_is_not_ecs() {
        let f = WarpedMetric::new(4);
        let prof = grid_prof(4);
        assert!(check_harmonic_curvature(&f, &prof).unwrap() > 1e-6);
        assert!(local_symmetry_residual(&f, &prof).unwrap() > 1e-6);
        // a surface times flat space is semisymmetric
        assert!(check_semisymmetry(&f, &prof).unwrap() < 1e-12);
    }

    #[test]
    fn coupled_metric_is_not_semisymmetric() {
        let f = CoupledMetric::new(4, 0.3);
        let prof = grid_prof(4);
        let r = check_semisymmetry(&f, &prof).unwrap();
        assert!(r > 1e-3, "{r}");
        assert!(check_harmonic_curvature(&f, &prof).unwrap() > 1e-3);
    }

    #[test]
    fn sweep_reports_argmax_point() {
        let f = WarpedMetric::new(4);
        let prof = grid_prof(4);
        let (v, x) = sweep(&f, &prof, |p| p.point.coords[1]).unwrap();
        assert_eq!(v, x.coords[1]);
        assert!((v - 0.6).abs() < 1e-12);
    }
}
