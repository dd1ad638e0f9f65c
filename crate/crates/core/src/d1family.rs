//! The `d = 1` family: metrics `κ dt² + dt ds + δ` on `I × ℝ × V` with
//! `κ(t, s, v) = f(t)⟨v,v⟩ + ⟨Av,v⟩`.
//!
//! Coordinates are `(t, s, v¹, …, v^{n−2})`. The symmetric product `dt ds`
//! contributes `1/2` to each of `g_ts` and `g_st`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chartcalc::{
    box_grid, local_symmetry_residual, ChartPoint, MetricField, Signature, ToleranceProfile,
    MAX_CONDITION,
};
use crate::error::{Error, Result};
use crate::linalg::{condition_number, ix2, to_dmatrix};
use crate::scalar::Scalar;
use crate::series::TrigSeries;

/// The function `f` of the construction, encoded by family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProfileFunction {
    Constant { value: f64 },
    Trigonometric(TrigSeries),
}

impl ProfileFunction {
    pub fn eval_generic<S: Scalar>(&self, t: S) -> S {
        match self {
            ProfileFunction::Constant { value } => S::lit(*value),
            ProfileFunction::Trigonometric(s) => s.eval_generic(t),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_generic(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            ProfileFunction::Constant { .. } => 0.0,
            ProfileFunction::Trigonometric(s) => s.derivative().eval(t),
        }
    }

    /// Exactly constant as encoded (no harmonics with nonzero coefficients).
    pub fn is_constant(&self) -> bool {
        match self {
            ProfileFunction::Constant { .. } => true,
            ProfileFunction::Trigonometric(s) => s.cos.iter().chain(&s.sin).all(|c| *c == 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct D1Data {
    /// Open interval `I`; `None` means the whole line.
    #[serde(default)]
    pub interval: Option<(f64, f64)>,
    pub f: ProfileFunction,
    #[serde(default)]
    pub period: Option<f64>,
    pub n: usize,
    /// `⟨,⟩` on `V`, row-major `(n−2)×(n−2)`.
    pub gram: Vec<f64>,
    /// `A: V → V`, row-major `(n−2)×(n−2)`.
    pub a: Vec<f64>,
}

impl D1Data {
    pub fn fiber_dim(&self) -> usize {
        self.n.saturating_sub(2)
    }

    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let m = self.fiber_dim();
        to_dmatrix(&self.gram, m, m)
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        let m = self.fiber_dim();
        to_dmatrix(&self.a, m, m)
    }

    pub fn v_signature(&self) -> Signature {
        Signature::of_matrix(&self.gram_matrix())
    }
}

const ALG_TOL: f64 = 1e-10;

/// Every violated invariant of `data`, as readable messages. Empty iff valid.
pub fn validate(data: &D1Data) -> Vec<String> {
    let mut v = Vec::new();
    if data.n < 4 {
        v.push(format!("n = {} must be at least 4", data.n));
        return v;
    }
    let m = data.fiber_dim();
    if data.gram.len() != m * m {
        v.push(format!(
            "gram must have {} entries, has {}",
            m * m,
            data.gram.len()
        ));
    }
    if data.a.len() != m * m {
        v.push(format!(
            "A must have {} entries, has {}",
            m * m,
            data.a.len()
        ));
    }
    if !v.is_empty() {
        return v;
    }
    if data.gram.iter().chain(&data.a).any(|x| !x.is_finite()) {
        v.push("gram and A must be finite".into());
        return v;
    }
    let g = data.gram_matrix();
    let a = data.a_matrix();
    let gscale = g.abs().max().max(1.0);
    if (&g - g.transpose()).abs().max() > ALG_TOL * gscale {
        v.push("gram is not symmetric".into());
    }
    let cond = condition_number(&g);
    if !(cond <= MAX_CONDITION) {
        v.push(format!("gram is degenerate (condition number {cond:.3e})"));
    }
    let anorm = a.abs().max();
    if anorm <= ALG_TOL {
        v.push("A = 0".into());
    }
    let ascale = anorm.max(1.0);
    if a.trace().abs() > ALG_TOL * ascale * m as f64 {
        v.push(format!("trace A ≠ 0 (trace = {:.3e})", a.trace()));
    }
    let adj = (a.transpose() * &g - &g * &a).abs().max();
    if adj > ALG_TOL * ascale * gscale {
        v.push(format!(
            "A is not self-adjoint for the inner product (|Aᵀ·gram − gram·A| = {adj:.3e})"
        ));
    }
    if let Some((lo, hi)) = data.interval {
        if !(lo < hi) {
            v.push(format!("interval ({lo}, {hi}) is empty"));
        }
    }
    match data.period {
        Some(p) if !(p > 0.0 && p.is_finite()) => {
            v.push(format!("period {p} must be positive"));
        }
        Some(p) => {
            let bad = (0..64)
                .map(|i| -3.0 * p + 6.0 * p * i as f64 / 64.0)
                .map(|t| (data.f.eval(t + p) - data.f.eval(t)).abs())
                .fold(0.0f64, f64::max);
            if bad > 1e-10 {
                v.push(format!("f is not {p}-periodic (deviation {bad:.3e})"));
            }
        }
        None => {}
    }
    if let ProfileFunction::Trigonometric(s) = &data.f {
        if !(s.period > 0.0) {
            v.push("trigonometric f needs a positive base period".into());
        }
    }
    v
}

/// The metric field built from validated [`D1Data`].
#[derive(Clone, Debug)]
pub struct D1Metric {
    data: D1Data,
    signature: Signature,
}

impl D1Metric {
    pub fn data(&self) -> &D1Data {
        &self.data
    }

    /// `κ(t, v)` (independent of `s`).
    pub fn kappa<S: Scalar>(&self, t: S, v: &[S]) -> S {
        let m = self.data.fiber_dim();
        let g = &self.data.gram;
        let a = &self.data.a;
        let av: Vec<S> = (0..m)
            .map(|i| (0..m).map(|j| S::lit(a[ix2(m, i, j)]) * v[j]).sum())
            .collect();
        let mut vv = S::zero();
        let mut avv = S::zero();
        for i in 0..m {
            for j in 0..m {
                let gij = S::lit(g[ix2(m, i, j)]);
                vv += gij * v[i] * v[j];
                avv += gij * av[i] * v[j];
            }
        }
        self.data.f.eval_generic(t) * vv + avv
    }

    /// Whether `t` lies in the open interval `I`.
    pub fn contains(&self, t: f64) -> bool {
        match self.data.interval {
            Some((lo, hi)) => lo < t && t < hi,
            None => true,
        }
    }
}

impl MetricField for D1Metric {
    fn dim(&self) -> usize {
        self.data.n
    }

    fn signature(&self) -> Signature {
        self.signature
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.data.n;
        let m = n - 2;
        let mut g = vec![S::zero(); n * n];
        g[ix2(n, 0, 0)] = self.kappa(x[0], &x[2..]);
        g[ix2(n, 0, 1)] = S::lit(0.5);
        g[ix2(n, 1, 0)] = S::lit(0.5);
        for i in 0..m {
            for j in 0..m {
                g[ix2(n, i + 2, j + 2)] = S::lit(self.data.gram[ix2(m, i, j)]);
            }
        }
        g
    }
}

pub fn build_metric(data: &D1Data) -> Result<D1Metric> {
    let violations = validate(data);
    if !violations.is_empty() {
        return Err(Error::InvalidInput(violations));
    }
    Ok(D1Metric {
        signature: data.v_signature().combine(Signature::new(1, 1)),
        data: data.clone(),
    })
}

/// Default verification grid: `per_axis` points per coordinate in a box of
/// half-width 1 around `(0.3, 0.1, 0.1, …)`, subsampled (seeded) above `max_points`.
pub fn default_grid(
    data: &D1Data,
    per_axis: usize,
    max_points: usize,
    seed: u64,
) -> Vec<ChartPoint> {
    let n = data.n;
    let mut center = vec![0.1; n];
    center[0] = 0.3;
    let mut half = vec![1.0; n];
    if let Some((lo, hi)) = data.interval {
        center[0] = 0.5 * (lo + hi);
        half[0] = (0.25 * (hi - lo)).min(1.0);
    }
    box_grid(&center, &half, per_axis, max_points, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dichotomy {
    Symmetric,
    EssentiallyConformallySymmetric,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub verdict: Dichotomy,
    pub nabla_r: f64,
    /// Largest deviation of `f` from its value at the first grid time.
    pub f_variation: f64,
}

/// Decides local symmetry from `max |∇R|` over the grid, and cross-checks the
/// verdict against constancy of `f` on the grid times.
pub fn local_symmetry_dichotomy(data: &D1Data, prof: &ToleranceProfile) -> Result<DichotomyReport> {
    let metric = build_metric(data)?;
    let nabla_r = local_symmetry_residual(&metric, prof)?;
    let t0 = prof.grid[0].coords[0];
    let f0 = data.f.eval(t0);
    let f_variation = prof
        .grid
        .iter()
        .map(|x| (data.f.eval(x.coords[0]) - f0).abs())
        .fold(0.0f64, f64::max);
    let max_slope = prof
        .grid
        .iter()
        .map(|x| data.f.derivative(x.coords[0]).abs())
        .fold(0.0f64, f64::max);
    let symmetric = nabla_r < prof.tol_second;
    let f_constant = f_variation <= 1e-12 && max_slope <= 1e-9;
    if symmetric != f_constant {
        return Err(Error::InternalConsistency(format!(
            "max |∇R| = {nabla_r:.3e} disagrees with f (variation {f_variation:.3e}, max |f'| {max_slope:.3e})"
        )));
    }
    Ok(DichotomyReport {
        verdict: if symmetric {
            Dichotomy::Symmetric
        } else {
            Dichotomy::EssentiallyConformallySymmetric
        },
        nabla_r,
        f_variation,
    })
}

/// Random valid data: `gram = Pᵀ·diag(±1)·P` with random sign pattern,
/// `A = gram⁻¹·S` for symmetric `S` projected to trace zero, and `f` a
/// three-term trigonometric polynomial of period `p`.
pub fn random_d1data<R: Rng>(rng: &mut R, n: usize) -> D1Data {
    let m = n - 2;
    loop {
        let signs: Vec<f64> = (0..m)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let p = DMatrix::from_fn(m, m, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) + rng.gen_range(-0.3..0.3)
        });
        let g = p.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(signs)) * &p;
        let g = (&g + g.transpose()) * 0.5;
        let Some(ginv) = g.clone().try_inverse() else {
            continue;
        };
        let s = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
        let s = (&s + s.transpose()) * 0.5;
        let a = &ginv * &s;
        let a = &a - DMatrix::identity(m, m) * (a.trace() / m as f64);
        if a.abs().max() < 1e-6 || condition_number(&g) > 1e6 {
            continue;
        }
        let period = rng.gen_range(1.0..4.0);
        let f = TrigSeries {
            period,
            constant: rng.gen_range(-1.0..1.0),
            cos: vec![rng.gen_range(-1.0..1.0)],
            sin: vec![rng.gen_range(-1.0..1.0)],
        };
        let row_major =
            |x: &DMatrix<f64>| -> Vec<f64> { (0..m * m).map(|k| x[(k / m, k % m)]).collect() };
        return D1Data {
            interval: None,
            f: ProfileFunction::Trigonometric(f),
            period: Some(period),
            n,
            gram: row_major(&g),
            a: row_major(&a),
        };
    }
}

/// The example data `f = sin t`, `A = diag(1, −1)`, `gram = I` in dimension 4.
pub fn sine_example() -> D1Data {
    D1Data {
        interval: None,
        f: ProfileFunction::Trigonometric(TrigSeries {
            period: 2.0 * std::f64::consts::PI,
            constant: 0.0,
            cos: vec![],
            sin: vec![1.0],
        }),
        period: Some(2.0 * std::f64::consts::PI),
        n: 4,
        gram: vec![1.0, 0.0, 0.0, 1.0],
        a: vec![1.0, 0.0, 0.0, -1.0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_operator_is_rejected() {
        let mut d = sine_example();
        d.a = vec![1.0, 0.0, 0.0, 1.0];
        let v = validate(&d);
        assert!(v.iter().any(|m| m.contains("trace A")), "{v:?}");
    }

    #[test]
    fn self_adjointness_uses_the_gram_matrix() {
        let mut d = sine_example();
        d.gram = vec![1.0, 0.0, 0.0, -1.0];
        d.a = vec![0.0, 1.0, 1.0, 0.0];
        // independent 2×2 oracle for Aᵀ·G − G·A
        let (g, a) = (&d.gram, &d.a);
        let mul = |x: [f64; 4], y: &[f64]| {
            [
                x[0] * y[0] + x[1] * y[2],
                x[0] * y[1] + x[1] * y[3],
                x[2] * y[0] + x[3] * y[2],
                x[2] * y[1] + x[3] * y[3],
            ]
        };
        let at = [a[0], a[2], a[1], a[3]];
        let lhs = mul(at, g);
        let rhs = mul([g[0], g[1], g[2], g[3]], a);
        let adjoint = lhs.iter().zip(rhs).all(|(x, y)| (x - y).abs() < 1e-15);
        let flagged = validate(&d).iter().any(|m| m.contains("self-adjoint"));
        assert_eq!(flagged, !adjoint);
        d.a = vec![0.0, 1.0, -1.0, 0.0];
        assert!(validate(&d).is_empty());
    }

    #[test]
    fn metric_components_at_sample_point() {
        let g = build_metric(&sine_example()).unwrap();
        let x = [0.3, 0.0, 1.0, 2.0];
        let m: Vec<f64> = g.eval(&x);
        assert!((m[0] - (5.0 * 0.3f64.sin() - 3.0)).abs() < 1e-15);
        assert_eq!(m[1], 0.5);
        assert_eq!(m[4], 0.5);
        assert_eq!(m[10], 1.0);
        let at_origin: Vec<f64> = g.eval(&[0.3, 4.0, 0.0, 0.0]);
        assert_eq!(at_origin[0], 0.0);
        assert_eq!(g.signature(), Signature::new(3, 1));
    }

    #[test]
    fn random_data_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [4, 5, 6, 7] {
            for _ in 0..10 {
                let d = random_d1data(&mut rng, n);
                assert!(validate(&d).is_empty(), "{:?}", validate(&d));
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let d = sine_example();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"family\":\"trigonometric\""));
        let back: D1Data = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }
}
