//! Single-chart numerical tensor calculus.
//!
//! Conventions (fixed throughout the crate):
//!
//! * `Γ^k_ij = ½ g^{kl}(∂_i g_lj + ∂_j g_li − ∂_l g_ij)`
//! * `R^k_lij = ∂_iΓ^k_jl − ∂_jΓ^k_il + Γ^k_im Γ^m_jl − Γ^k_jm Γ^m_il`,
//!   i.e. `R(∂_i, ∂_j)∂_l = R^k_lij ∂_k`, and `R_klij = g_ka R^a_lij`
//! * `ρ_lj = R^i_lij`, `s = g^{lj} ρ_lj`
//! * `W_klij = R_klij − (ρ_ki g_lj − ρ_kj g_li + ρ_lj g_ki − ρ_li g_kj)/(n−2)
//!   + s (g_ki g_lj − g_kj g_li)/((n−1)(n−2))`
//! * `∇_m T` is stored with the differentiation index first.
//!
//! Metric derivatives come from a [`MetricJet`]: either exact (nested dual
//! numbers through the generic [`MetricField::eval`]) or central differences.

mod checks;
mod curvature;
pub mod fixtures;
mod jet;

pub use checks::{
    check_harmonic_curvature, check_semisymmetry, harmonic_residual_at, local_symmetry_residual,
    local_symmetry_residual_at, ricci_rank, ricci_recurrence_residual,
    ricci_recurrence_residual_at, semisymmetry_residual_at, sweep, verify_grid, GridReport,
};
pub use curvature::{
    christoffel, curvature_from_jet, curvature_pack, first_bianchi_residual, gamma_at,
    metric_compatibility_residual, weyl_trace_residual, Christoffel, Curvature, CurvaturePack,
};
pub use jet::{central_difference_jet, exact_jet, metric_jet, MetricJet};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{condition_number, to_dmatrix};
use crate::scalar::Scalar;

/// Metrics whose condition number exceeds this are rejected as degenerate.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn lift<S: Scalar>(&self) -> Vec<S> {
        self.coords.iter().map(|&c| S::lit(c)).collect()
    }
}

impl From<Vec<f64>> for ChartPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

/// Counts of positive and negative eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub plus: usize,
    pub minus: usize,
}

impl Signature {
    pub fn new(plus: usize, minus: usize) -> Self {
        Self { plus, minus }
    }

    pub fn dim(&self) -> usize {
        self.plus + self.minus
    }

    pub fn is_indefinite(&self) -> bool {
        self.plus > 0 && self.minus > 0
    }

    pub fn of_diagonal(signs: &[f64]) -> Self {
        Self {
            plus: signs.iter().filter(|&&s| s > 0.0).count(),
            minus: signs.iter().filter(|&&s| s < 0.0).count(),
        }
    }

    /// Signature of a symmetric matrix from its eigenvalue signs.
    pub fn of_matrix(m: &DMatrix<f64>) -> Self {
        let ev = m.clone().symmetric_eigenvalues();
        Self::of_diagonal(ev.as_slice())
    }

    pub fn combine(self, other: Self) -> Self {
        Self {
            plus: self.plus + other.plus,
            minus: self.minus + other.minus,
        }
    }
}

/// A pseudo-Riemannian metric on a single chart.
///
/// `eval` returns the row-major `n×n` component matrix. It is generic over the
/// scalar so that the same code yields values (`f64`) and exact derivatives
/// (dual numbers); implementations must only use [`Scalar`] arithmetic.
pub trait MetricField: Sync {
    fn dim(&self) -> usize;

    fn signature(&self) -> Signature;

    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S>;

    /// Guaranteed smoothness class (`usize::MAX` for C∞).
    fn derivative_order(&self) -> usize {
        usize::MAX
    }
}

/// Result of evaluating and sanity-checking a metric at one point.
#[derive(Clone, Debug)]
pub struct MetricCheck {
    pub matrix: Vec<f64>,
    pub condition: f64,
    pub signature: Signature,
}

/// Evaluates `field` at `x` and enforces the [`MetricField`] invariants:
/// matching dimension, finite symmetric output, bounded condition number and
/// the declared signature.
pub fn check_metric_at<M: MetricField>(field: &M, x: &ChartPoint) -> Result<MetricCheck> {
    let n = field.dim();
    if x.dim() != n {
        return Err(Error::Domain(format!(
            "chart point has {} coordinates, metric dimension is {n}",
            x.dim()
        )));
    }
    if x.coords.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("non-finite chart coordinate".into()));
    }
    let g: Vec<f64> = field.eval(&x.coords);
    if g.len() != n * n || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "metric evaluation at {:?} is not a finite {n}×{n} matrix",
            x.coords
        )));
    }
    let m = to_dmatrix(&g, n, n);
    let asym = (&m - m.transpose()).abs().max();
    if asym > 1e-12 * m.abs().max().max(1.0) {
        return Err(Error::Domain(format!(
            "metric evaluation is not symmetric (asymmetry {asym:.3e})"
        )));
    }
    let condition = condition_number(&m);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::DegenerateMetric {
            condition,
            limit: MAX_CONDITION,
        });
    }
    let signature = Signature::of_matrix(&m);
    if signature != field.signature() {
        return Err(Error::Domain(format!(
            "metric signature {:?} differs from declared {:?}",
            signature,
            field.signature()
        )));
    }
    Ok(MetricCheck {
        matrix: g,
        condition,
        signature,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DerivativeMode {
    /// Forward-mode dual numbers pushed through [`MetricField::eval`].
    Exact,
    /// Central differences; steps for orders 1, 2, 3 are `h`, `10h`, `100h`.
    CentralDifference { richardson: bool },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToleranceProfile {
    /// Per-coordinate differencing step; a single entry applies to every coordinate.
    pub fd_step: Vec<f64>,
    pub tol_first: f64,
    pub tol_second: f64,
    pub grid: Vec<ChartPoint>,
    pub mode: DerivativeMode,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self {
            fd_step: vec![1e-4],
            tol_first: 1e-8,
            tol_second: 1e-6,
            grid: Vec::new(),
            mode: DerivativeMode::Exact,
        }
    }
}

impl ToleranceProfile {
    pub fn with_grid(grid: Vec<ChartPoint>) -> Self {
        Self {
            grid,
            ..Self::default()
        }
    }

    pub fn step(&self, axis: usize) -> f64 {
        self.fd_step[axis.min(self.fd_step.len() - 1)]
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.fd_step.is_empty() || self.fd_step.iter().any(|h| !(*h > 0.0)) {
            v.push("differencing steps must be positive".to_string());
        }
        if !(self.tol_first > 0.0) || !(self.tol_second > 0.0) {
            v.push("tolerances must be positive".to_string());
        }
        if self.grid.is_empty() {
            v.push("grid must be nonempty".to_string());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(v))
        }
    }
}

/// `per_axis` equispaced points per coordinate in `center ± half_width`.
/// When the full tensor grid exceeds `max_points`, a seeded random subset of
/// it is returned (always including the first corner).
pub fn box_grid(
    center: &[f64],
    half_width: &[f64],
    per_axis: usize,
    max_points: usize,
    seed: u64,
) -> Vec<ChartPoint> {
    let n = center.len();
    let per_axis = per_axis.max(1);
    let axis = |i: usize, k: usize| -> f64 {
        let hw = half_width[i.min(half_width.len() - 1)];
        if per_axis == 1 {
            center[i]
        } else {
            center[i] - hw + 2.0 * hw * k as f64 / (per_axis - 1) as f64
        }
    };
    let total = (per_axis as u128).pow(n as u32);
    let point = |mut idx: u128| {
        let mut c = vec![0.0; n];
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = axis(i, (idx % per_axis as u128) as usize);
            idx /= per_axis as u128;
        }
        ChartPoint::new(c)
    };
    if total <= max_points as u128 {
        return (0..total).map(point).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_usize = usize::try_from(total).unwrap_or(usize::MAX);
    let mut picks: Vec<usize> = sample(&mut rng, total_usize, max_points.max(1)).into_vec();
    picks.sort_unstable();
    if picks[0] != 0 {
        picks[0] = 0;
    }
    picks.into_iter().map(|i| point(i as u128)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_when_small() {
        let g = box_grid(&[0.0, 0.0], &[1.0], 3, 100, 0);
        assert_eq!(g.len(), 9);
        assert!(g.iter().any(|p| p.coords == vec![0.0, 0.0]));
        assert!(g.iter().any(|p| p.coords == vec![1.0, -1.0]));
    }

    #[test]
    fn subsampled_grid_is_deterministic() {
        let a = box_grid(&[0.0; 6], &[0.5], 5, 40, 7);
        let b = box_grid(&[0.0; 6], &[0.5], 5, 40, 7);
        assert_eq!(a.len(), 40);
        assert_eq!(a, b);
    }

    #[test]
    fn profile_validation() {
        let mut p = ToleranceProfile::default();
        assert!(p.validate().is_err());
        p.grid = vec![ChartPoint::new(vec![0.0])];
        assert!(p.validate().is_ok());
        p.tol_second = 0.0;
        assert!(p.validate().is_err());
    }
}
