//! The `d = 2` family: metrics `h^D − 2τ + δ − θ ρ^D` on `T*Q × V` built
//! from a torsion-free connection `D` on a surface chart, a `D`-parallel
//! area form `ζ`, a sign `ε`, an inner product on `V` and a solution `φ` of
//! `div^D div^D φ + ⟨ρ^D, φ⟩ = ε`.
//!
//! Coordinates on `T*Q × V` are `(x¹, x², p₁, p₂, v¹, …)`. The Riemann
//! extension is realised as `h^D = 2 dp_i dx^i − 2 p_k Γ^k_ij dx^i dx^j`.
//!
//! Surface conventions: `Γ^k_ij` with `R^k_lij` and `ρ_lj = R^i_lij` as in
//! [`crate::chartcalc`]; `ζ_12 = −ζ_21 = z`; `τ_jk = ζ_jl ζ_km φ^lm`.
//! Projective flatness is tested with `P = sym ρ − ⅓ alt ρ` and the
//! obstruction `C_ijk = ∇_i P_jk − ∇_j P_ik`, which vanishes exactly for
//! projectively flat connections on surfaces.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chartcalc::{
    box_grid, local_symmetry_residual, ChartPoint, MetricField, Signature, ToleranceProfile,
    MAX_CONDITION,
};
use crate::d1family::Dichotomy;
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::linalg::{condition_number, ix2, to_dmatrix};
use crate::scalar::Scalar;

/// Polynomial `Σ c·x^i·y^j`, stored as `(i, j, c)` terms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polynomial2 {
    pub terms: Vec<(u32, u32, f64)>,
}

impl Polynomial2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![(0, 0, c)],
        }
    }

    pub fn new(terms: Vec<(u32, u32, f64)>) -> Self {
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.2 == 0.0)
    }

    pub fn eval<S: Scalar>(&self, x: S, y: S) -> S {
        self.terms
            .iter()
            .filter(|t| t.2 != 0.0)
            .map(|&(i, j, c)| S::lit(c) * x.powi(i as i32) * y.powi(j as i32))
            .sum()
    }

    /// Expands `(a·x + b·y + c)^k` times `scale`.
    pub fn linear_power(a: f64, b: f64, c: f64, k: u32, scale: f64) -> Self {
        let mut terms = Vec::new();
        let binom = |n: u32, r: u32| -> f64 {
            (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        };
        for i in 0..=k {
            for j in 0..=(k - i) {
                let r = k - i - j;
                let coef = binom(k, i)
                    * binom(k - i, j)
                    * a.powi(i as i32)
                    * b.powi(j as i32)
                    * c.powi(r as i32);
                if coef != 0.0 {
                    terms.push((i, j, scale * coef));
                }
            }
        }
        Self { terms }.simplified()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().copied());
        Self { terms }.simplified()
    }

    /// Merges equal monomials and drops zero terms; sorted by `(i, j)`.
    pub fn simplified(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| (t.0, t.1));
        let mut out: Vec<(u32, u32, f64)> = Vec::new();
        for t in terms {
            match out.last_mut() {
                Some(last) if last.0 == t.0 && last.1 == t.1 => last.2 += t.2,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.2 != 0.0);
        Self { terms: out }
    }

    pub fn partial(&self, axis: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter_map(|&(i, j, c)| match axis {
                0 if i > 0 => Some((i - 1, j, c * i as f64)),
                1 if j > 0 => Some((i, j - 1, c * j as f64)),
                _ => None,
            })
            .collect();
        Self { terms }.simplified()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(i, j, c)| (i, j, c * s)).collect(),
        }
    }
}

/// Chart function `P(x, y)·exp(Q(x, y))` with polynomial `P`, `Q`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChartFunction {
    pub poly: Polynomial2,
    #[serde(default)]
    pub exponent: Polynomial2,
}

impl ChartFunction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::poly(Polynomial2::constant(c))
    }

    pub fn poly(p: Polynomial2) -> Self {
        Self {
            poly: p,
            exponent: Polynomial2::zero(),
        }
    }

    pub fn eval<S: Scalar>(&self, x: S, y: S) -> S {
        let p = self.poly.eval(x, y);
        if self.exponent.is_zero() {
            p
        } else {
            p * self.exponent.eval(x, y).exp()
        }
    }
}

/// Torsion-free connection on a rectangular surface chart. Components are
/// `gamma[k][c]` with `c = 0, 1, 2` for the lower pairs `11, 12, 22`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceConnection {
    /// `[x_min, x_max, y_min, y_max]`.
    pub chart: [f64; 4],
    pub gamma: [[ChartFunction; 3]; 2],
}

fn pair_slot(i: usize, j: usize) -> usize {
    i + j
}

type Sq<S> = [[S; 2]; 2];

impl SurfaceConnection {
    pub fn flat(chart: [f64; 4]) -> Self {
        Self {
            chart,
            gamma: Default::default(),
        }
    }

    /// `Γ^k_ij` with `ψ = dF`: `Γ^k_ij = δ^k_i ψ_j + δ^k_j ψ_i`, which is
    /// projectively equivalent to the flat connection.
    pub fn projectively_flat_gradient(chart: [f64; 4], f: &Polynomial2) -> Self {
        let psi = [f.partial(0), f.partial(1)];
        let mut gamma: [[ChartFunction; 3]; 2] = Default::default();
        for k in 0..2 {
            for (i, j) in [(0, 0), (0, 1), (1, 1)] {
                let mut p = Polynomial2::zero();
                if k == i {
                    p = p.add(&psi[j]);
                }
                if k == j {
                    p = p.add(&psi[i]);
                }
                gamma[k][pair_slot(i, j)] = ChartFunction::poly(p);
            }
        }
        Self { chart, gamma }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let c = self.chart;
        x.len() == 2 && c[0] < x[0] && x[0] < c[1] && c[2] < x[1] && x[1] < c[3]
    }

    /// Full `Γ[k][i][j]`.
    pub fn gamma_full<S: Scalar>(&self, x: [S; 2]) -> [[[S; 2]; 2]; 2] {
        let mut g = [[[S::zero(); 2]; 2]; 2];
        for (k, gk) in g.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    gk[i][j] = self.gamma[k][pair_slot(i, j)].eval(x[0], x[1]);
                }
            }
        }
        g
    }

    /// Ricci tensor `ρ_lj = R^i_lij` (not symmetrised).
    pub fn ricci_generic<S: Scalar>(&self, x: [S; 2]) -> Sq<S> {
        let g = self.gamma_full(x);
        let dg: [[[[S; 2]; 2]; 2]; 2] = std::array::from_fn(|m| {
            let xs = seed2(x, m);
            let gd = self.gamma_full(xs);
            std::array::from_fn(|k| {
                std::array::from_fn(|i| std::array::from_fn(|j| gd[k][i][j].eps))
            })
        });
        // R^k_lij = ∂_iΓ^k_jl − ∂_jΓ^k_il + Γ^k_im Γ^m_jl − Γ^k_jm Γ^m_il
        let riem = |k: usize, l: usize, i: usize, j: usize| -> S {
            let mut v = dg[i][k][j][l] - dg[j][k][i][l];
            for m in 0..2 {
                v += g[k][i][m] * g[m][j][l] - g[k][j][m] * g[m][i][l];
            }
            v
        };
        std::array::from_fn(|l| std::array::from_fn(|j| riem(0, l, 0, j) + riem(1, l, 1, j)))
    }

    /// `∇_i T_jk` of a covariant 2-tensor field given generically.
    fn nabla2<F>(&self, x: [f64; 2], field: F) -> [[[f64; 2]; 2]; 2]
    where
        F: Fn([Dual<f64>; 2]) -> Sq<Dual<f64>>,
    {
        let g = self.gamma_full(x);
        let t0 = field([Dual::constant(x[0]), Dual::constant(x[1])]);
        let t: Sq<f64> = std::array::from_fn(|j| std::array::from_fn(|k| t0[j][k].re));
        std::array::from_fn(|i| {
            let td = field(seed2(x, i));
            std::array::from_fn(|j| {
                std::array::from_fn(|k| {
                    let mut v = td[j][k].eps;
                    for m in 0..2 {
                        v -= g[m][i][j] * t[m][k] + g[m][i][k] * t[j][m];
                    }
                    v
                })
            })
        })
    }
}

fn seed2<S: Scalar>(x: [S; 2], axis: usize) -> [Dual<S>; 2] {
    std::array::from_fn(|a| {
        if a == axis {
            Dual::variable(x[a])
        } else {
            Dual::constant(x[a])
        }
    })
}

fn projective_tensor<S: Scalar>(r: Sq<S>) -> Sq<S> {
    let half = S::lit(0.5);
    let third = S::lit(1.0 / 3.0);
    std::array::from_fn(|j| {
        std::array::from_fn(|k| half * (r[j][k] + r[k][j]) - third * half * (r[j][k] - r[k][j]))
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConnectionRicci {
    pub ricci: [[f64; 2]; 2],
    pub symmetry_residual: f64,
}

pub fn ricci_of_connection(conn: &SurfaceConnection, x: [f64; 2]) -> Result<ConnectionRicci> {
    let r = conn.ricci_generic(x);
    if r.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite connection data at {x:?}"
        )));
    }
    Ok(ConnectionRicci {
        ricci: r,
        symmetry_residual: (r[0][1] - r[1][0]).abs(),
    })
}

fn as2(p: &ChartPoint) -> Result<[f64; 2]> {
    match p.coords.as_slice() {
        &[a, b] => Ok([a, b]),
        _ => Err(Error::Domain(format!(
            "surface point needs 2 coordinates, got {}",
            p.dim()
        ))),
    }
}

fn max_over<F>(grid: &[ChartPoint], f: F) -> Result<f64>
where
    F: Fn([f64; 2]) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::invalid("grid must be nonempty"));
    }
    let mut worst = 0.0f64;
    for p in grid {
        let v = f(as2(p)?)?;
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite residual at {:?}",
                p.coords
            )));
        }
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Max over the grid of `|∇_1 P_2k − ∇_2 P_1k|` with `P = sym ρ − ⅓ alt ρ`.
pub fn projective_flatness_residual(conn: &SurfaceConnection, grid: &[ChartPoint]) -> Result<f64> {
    max_over(grid, |x| {
        let n = conn.nabla2(x, |y| projective_tensor(conn.ricci_generic(y)));
        Ok((0..2)
            .map(|k| (n[0][1][k] - n[1][0][k]).abs())
            .fold(0.0, f64::max))
    })
}

/// Max over the grid of `|∂_i ζ_12 − Γ^k_ki ζ_12|`.
pub fn area_parallel_residual(
    conn: &SurfaceConnection,
    zeta: &ChartFunction,
    grid: &[ChartPoint],
) -> Result<f64> {
    max_over(grid, |x| {
        let g = conn.gamma_full(x);
        let z = zeta.eval(x[0], x[1]);
        let mut worst = 0.0f64;
        for i in 0..2 {
            let d = seed2(x, i);
            let dz = zeta.eval(d[0], d[1]).eps;
            worst = worst.max((dz - (g[0][0][i] + g[1][1][i]) * z).abs());
        }
        Ok(worst)
    })
}

/// Max over the grid of `|∇ρ^D|` (zero iff the metric built from it is
/// locally symmetric).
pub fn ricci_parallel_residual(conn: &SurfaceConnection, grid: &[ChartPoint]) -> Result<f64> {
    max_over(grid, |x| {
        let n = conn.nabla2(x, |y| conn.ricci_generic(y));
        Ok(n.iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs())))
    })
}

/// Symmetric contravariant `φ` on the chart: components `φ^11, φ^12, φ^22`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhiField {
    pub c11: ChartFunction,
    pub c12: ChartFunction,
    pub c22: ChartFunction,
}

impl PhiField {
    pub fn matrix<S: Scalar>(&self, x: [S; 2]) -> Sq<S> {
        let a = self.c11.eval(x[0], x[1]);
        let b = self.c12.eval(x[0], x[1]);
        let c = self.c22.eval(x[0], x[1]);
        [[a, b], [b, c]]
    }
}

fn div_phi<S: Scalar>(conn: &SurfaceConnection, phi: &PhiField, x: [S; 2]) -> [S; 2] {
    let g = conn.gamma_full(x);
    let ph = phi.matrix(x);
    let dph: [Sq<S>; 2] = std::array::from_fn(|j| {
        let m = phi.matrix(seed2(x, j));
        std::array::from_fn(|a| std::array::from_fn(|b| m[a][b].eps))
    });
    std::array::from_fn(|k| {
        let mut v = S::zero();
        for j in 0..2 {
            v += dph[j][j][k];
            for m in 0..2 {
                v += g[j][j][m] * ph[m][k] + g[k][j][m] * ph[j][m];
            }
        }
        v
    })
}

/// `div^D div^D φ + ⟨ρ^D, φ⟩` at `x`.
pub fn phi_operator(conn: &SurfaceConnection, phi: &PhiField, x: [f64; 2]) -> f64 {
    let g = conn.gamma_full(x);
    let div = div_phi::<f64>(conn, phi, x);
    let mut v = 0.0;
    for k in 0..2 {
        v += div_phi(conn, phi, seed2(x, k))[k].eps;
        for m in 0..2 {
            v += g[k][k][m] * div[m];
        }
    }
    let r = conn.ricci_generic(x);
    let ph = phi.matrix(x);
    for j in 0..2 {
        for k in 0..2 {
            v += r[j][k] * ph[j][k];
        }
    }
    v
}

/// Max over the grid of `|div^D div^D φ + ⟨ρ^D, φ⟩ − ε|`.
pub fn phi_residual(data: &D2Data, grid: &[ChartPoint]) -> Result<f64> {
    let phi = data
        .phi
        .as_ref()
        .ok_or_else(|| Error::invalid("φ is missing"))?;
    let eps = data.epsilon as f64;
    max_over(grid, |x| Ok((phi_operator(&data.conn, phi, x) - eps).abs()))
}

/// `τ_jk = ζ_jl ζ_km φ^lm` with `ζ_12 = −ζ_21 = z`.
pub fn tau_from_phi<S: Scalar>(z: S, phi: Sq<S>) -> Sq<S> {
    let zeta = [[S::zero(), z], [-z, S::zero()]];
    std::array::from_fn(|j| {
        std::array::from_fn(|k| {
            let mut v = S::zero();
            for l in 0..2 {
                for m in 0..2 {
                    v += zeta[j][l] * zeta[k][m] * phi[l][m];
                }
            }
            v
        })
    })
}

/// Least-squares polynomial solution of the `φ` equation: every component
/// of `φ` is a polynomial of total degree ≤ `degree`, collocated on a
/// `per_axis × per_axis` grid inside the chart; minimum-norm solution via SVD.
pub fn fit_phi(
    conn: &SurfaceConnection,
    epsilon: i8,
    degree: u32,
    per_axis: usize,
) -> Result<PhiField> {
    let monomials: Vec<(u32, u32)> = (0..=degree)
        .flat_map(|i| (0..=(degree - i)).map(move |j| (i, j)))
        .collect();
    let points = chart_grid(conn, per_axis, 0.9);
    let mut columns = Vec::new();
    for comp in 0..3 {
        for &(i, j) in &monomials {
            let f = ChartFunction::poly(Polynomial2::new(vec![(i, j, 1.0)]));
            let mut phi = PhiField::default();
            match comp {
                0 => phi.c11 = f,
                1 => phi.c12 = f,
                _ => phi.c22 = f,
            }
            let col: Vec<f64> = points
                .iter()
                .map(|p| phi_operator(conn, &phi, [p.coords[0], p.coords[1]]))
                .collect();
            columns.push(col);
        }
    }
    let rows = points.len();
    let a = DMatrix::from_fn(rows, columns.len(), |r, c| columns[c][r]);
    let b = DVector::from_element(rows, epsilon as f64);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let sol = svd
        .solve(&b, 1e-12 * smax)
        .map_err(|e| Error::SolverFailure(format!("φ collocation solve failed: {e}")))?;
    let mut comps = vec![Vec::new(), Vec::new(), Vec::new()];
    for (idx, c) in sol.iter().enumerate() {
        let comp = idx / monomials.len();
        let (i, j) = monomials[idx % monomials.len()];
        if c.abs() > 1e-14 {
            comps[comp].push((i, j, *c));
        }
    }
    let mk = |t: Vec<(u32, u32, f64)>| ChartFunction::poly(Polynomial2::new(t));
    let mut it = comps.into_iter();
    Ok(PhiField {
        c11: mk(it.next().unwrap()),
        c12: mk(it.next().unwrap()),
        c22: mk(it.next().unwrap()),
    })
}

/// `per_axis²` points covering `shrink` × the chart rectangle (about its centre).
pub fn chart_grid(conn: &SurfaceConnection, per_axis: usize, shrink: f64) -> Vec<ChartPoint> {
    let c = conn.chart;
    let center = [0.5 * (c[0] + c[1]), 0.5 * (c[2] + c[3])];
    let half = [0.5 * shrink * (c[1] - c[0]), 0.5 * shrink * (c[3] - c[2])];
    box_grid(&center, &half, per_axis, usize::MAX, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct D2Data {
    pub conn: SurfaceConnection,
    /// `ζ_12`.
    pub zeta: ChartFunction,
    pub n: usize,
    pub epsilon: i8,
    /// Inner product on `V`, row-major `(n−4)×(n−4)`.
    #[serde(default)]
    pub gram: Vec<f64>,
    #[serde(default)]
    pub phi: Option<PhiField>,
}

/// Tolerance for the connection, area-form and `φ` residuals in [`validate`].
pub const D2_TOL: f64 = 1e-8;

/// Every violated invariant, checked on a 7×7 grid of the chart.
pub fn validate(data: &D2Data) -> Vec<String> {
    let mut v = Vec::new();
    if data.n < 4 {
        v.push(format!("n = {} must be at least 4", data.n));
    }
    if data.epsilon != 1 && data.epsilon != -1 {
        v.push(format!("ε = {} must be ±1", data.epsilon));
    }
    let m = data.n.saturating_sub(4);
    if data.gram.len() != m * m {
        v.push(format!(
            "gram must have {} entries, has {}",
            m * m,
            data.gram.len()
        ));
    } else if m > 0 {
        let g = to_dmatrix(&data.gram, m, m);
        if (&g - g.transpose()).abs().max() > 1e-12 * g.abs().max().max(1.0) {
            v.push("gram is not symmetric".into());
        }
        let cond = condition_number(&g);
        if !(cond <= MAX_CONDITION) {
            v.push(format!("gram is degenerate (condition number {cond:.3e})"));
        }
    }
    let c = data.conn.chart;
    if !(c[0] < c[1] && c[2] < c[3]) || c.iter().any(|x| !x.is_finite()) {
        v.push("chart rectangle is empty".into());
        return v;
    }
    let grid = chart_grid(&data.conn, 7, 0.9);
    let check = |name: &str, r: Result<f64>, v: &mut Vec<String>| match r {
        Ok(x) if x < D2_TOL => {}
        Ok(x) => v.push(format!("{name} residual {x:.3e} exceeds {D2_TOL:.0e}")),
        Err(e) => v.push(format!("{name}: {e}")),
    };
    if grid
        .iter()
        .any(|p| data.zeta.eval(p.coords[0], p.coords[1]).abs() < 1e-12)
    {
        v.push("ζ vanishes on the chart".into());
    }
    check(
        "projective flatness",
        projective_flatness_residual(&data.conn, &grid),
        &mut v,
    );
    check(
        "ζ parallelism",
        area_parallel_residual(&data.conn, &data.zeta, &grid),
        &mut v,
    );
    match max_over(&grid, |x| {
        Ok(ricci_of_connection(&data.conn, x)?.symmetry_residual)
    }) {
        Ok(r) if r < D2_TOL => {}
        Ok(r) => v.push(format!(
            "ρ^D is not symmetric (residual {r:.3e}); unsupported"
        )),
        Err(e) => v.push(format!("ρ^D: {e}")),
    }
    match &data.phi {
        None => v.push("φ is missing (see fit_phi)".into()),
        Some(_) => check("φ equation", phi_residual(data, &grid), &mut v),
    }
    v
}

/// Patterson–Walker Riemann extension of a surface connection (dimension 4).
#[derive(Clone, Debug)]
pub struct RiemannExtension {
    pub conn: SurfaceConnection,
}

pub fn riemann_extension(conn: &SurfaceConnection) -> RiemannExtension {
    RiemannExtension { conn: conn.clone() }
}

fn extension_block<S: Scalar>(conn: &SurfaceConnection, x: &[S], n: usize, g: &mut [S]) {
    let gam = conn.gamma_full([x[0], x[1]]);
    for i in 0..2 {
        g[ix2(n, i, 2 + i)] = S::one();
        g[ix2(n, 2 + i, i)] = S::one();
        for j in 0..2 {
            let mut v = S::zero();
            for k in 0..2 {
                v += x[2 + k] * gam[k][i][j];
            }
            g[ix2(n, i, j)] = S::lit(-2.0) * v;
        }
    }
}

impl MetricField for RiemannExtension {
    fn dim(&self) -> usize {
        4
    }

    fn signature(&self) -> Signature {
        Signature::new(2, 2)
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut g = vec![S::zero(); 16];
        extension_block(&self.conn, x, 4, &mut g);
        g
    }
}

/// The metric `h^D − 2τ + δ − θ ρ^D` (symmetric part of `ρ^D`).
#[derive(Clone, Debug)]
pub struct D2Metric {
    data: D2Data,
    phi: PhiField,
    signature: Signature,
}

impl D2Metric {
    pub fn data(&self) -> &D2Data {
        &self.data
    }
}

impl MetricField for D2Metric {
    fn dim(&self) -> usize {
        self.data.n
    }

    fn signature(&self) -> Signature {
        self.signature
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.data.n;
        let m = n - 4;
        let mut g = vec![S::zero(); n * n];
        extension_block(&self.data.conn, x, n, &mut g);
        let xy = [x[0], x[1]];
        let tau = tau_from_phi(self.data.zeta.eval(x[0], x[1]), self.phi.matrix(xy));
        let mut theta = S::zero();
        for a in 0..m {
            for b in 0..m {
                let gab = S::lit(self.data.gram[ix2(m, a, b)]);
                theta += gab * x[4 + a] * x[4 + b];
                g[ix2(n, 4 + a, 4 + b)] = gab;
            }
        }
        let rho = if m > 0 {
            self.data.conn.ricci_generic(xy)
        } else {
            [[S::zero(); 2]; 2]
        };
        let half = S::lit(0.5);
        for i in 0..2 {
            for j in 0..2 {
                let rs = half * (rho[i][j] + rho[j][i]);
                g[ix2(n, i, j)] -= S::lit(2.0) * tau[i][j] + theta * rs;
            }
        }
        g
    }
}

pub fn build_d2_metric(data: &D2Data) -> Result<D2Metric> {
    let violations = validate(data);
    if !violations.is_empty() {
        return Err(Error::InvalidInput(violations));
    }
    let m = data.n - 4;
    let v_sig = if m == 0 {
        Signature::new(0, 0)
    } else {
        Signature::of_matrix(&to_dmatrix(&data.gram, m, m))
    };
    Ok(D2Metric {
        phi: data.phi.clone().expect("validated"),
        signature: Signature::new(2, 2).combine(v_sig),
        data: data.clone(),
    })
}

/// Default grid on `T*Q × V`: surface coordinates over 80% of the chart,
/// `p` and `v` in `[−1, 1]`-boxes around `0.2` and `0.1`.
pub fn default_grid(
    data: &D2Data,
    per_axis: usize,
    max_points: usize,
    seed: u64,
) -> Vec<ChartPoint> {
    let c = data.conn.chart;
    let mut center = vec![0.5 * (c[0] + c[1]), 0.5 * (c[2] + c[3]), 0.2, 0.2];
    let mut half = vec![0.4 * (c[1] - c[0]), 0.4 * (c[3] - c[2]), 1.0, 1.0];
    for _ in 4..data.n {
        center.push(0.1);
        half.push(1.0);
    }
    box_grid(&center, &half, per_axis, max_points, seed)
}

/// Local symmetry of the built metric decided from `max |∇R|` on `prof`,
/// cross-checked against `max |∇ρ^D|` on the surface grid `surface`.
pub fn local_symmetry_dichotomy(
    data: &D2Data,
    prof: &ToleranceProfile,
    surface: &[ChartPoint],
) -> Result<D2Dichotomy> {
    let metric = build_d2_metric(data)?;
    let nabla_r = local_symmetry_residual(&metric, prof)?;
    let nabla_rho = ricci_parallel_residual(&data.conn, surface)?;
    let symmetric = nabla_r < prof.tol_second;
    if symmetric != (nabla_rho < prof.tol_second) {
        return Err(Error::InternalConsistency(format!(
            "max |∇R| = {nabla_r:.3e} disagrees with max |∇ρ^D| = {nabla_rho:.3e}"
        )));
    }
    Ok(D2Dichotomy {
        verdict: if symmetric {
            Dichotomy::Symmetric
        } else {
            Dichotomy::EssentiallyConformallySymmetric
        },
        nabla_r,
        nabla_rho,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct D2Dichotomy {
    pub verdict: Dichotomy,
    pub nabla_r: f64,
    pub nabla_rho: f64,
}

/// Flat connection on `[−1, 1]²`, `ζ = 1`, `ε = 1`, `φ^11 = (x¹)²/2`.
pub fn flat_fixture() -> D2Data {
    D2Data {
        conn: SurfaceConnection::flat([-1.0, 1.0, -1.0, 1.0]),
        zeta: ChartFunction::constant(1.0),
        n: 4,
        epsilon: 1,
        gram: Vec::new(),
        phi: Some(PhiField {
            c11: ChartFunction::poly(Polynomial2::new(vec![(2, 0, 0.5)])),
            ..PhiField::default()
        }),
    }
}

/// Coefficients of the shipped nonflat example: `F = c₂ℓ² + c₃ℓ³` with
/// `ℓ = y + x/2` on the chart `[−½, ½]²`.
pub const NONFLAT_C2: f64 = 0.3;
pub const NONFLAT_C3: f64 = 0.1;

/// The potential `F` of the shipped nonflat connection.
pub fn nonflat_potential() -> Polynomial2 {
    Polynomial2::linear_power(0.5, 1.0, 0.0, 2, NONFLAT_C2)
        .add(&Polynomial2::linear_power(0.5, 1.0, 0.0, 3, NONFLAT_C3))
}

/// Shipped nonflat example: `Γ^k_ij = δ^k_i ∂_jF + δ^k_j ∂_iF` (projectively
/// flat, with `Γ^k_ki = 3∂_iF` a gradient), `ζ_12 = e^{3F}` and a `φ`
/// fitted numerically to the `φ` equation. `n ≥ 4`; for `n > 4` the
/// inner product on `V` is `diag(1, −1, 1, …)`.
pub fn nonflat_fixture(n: usize, epsilon: i8) -> Result<D2Data> {
    let f = nonflat_potential();
    let conn = SurfaceConnection::projectively_flat_gradient([-0.5, 0.5, -0.5, 0.5], &f);
    let zeta = ChartFunction {
        poly: Polynomial2::constant(1.0),
        exponent: f.scaled(3.0),
    };
    let phi = fit_phi(&conn, epsilon, 3, 12)?;
    let m = n.saturating_sub(4);
    let mut gram = vec![0.0; m * m];
    for a in 0..m {
        gram[a * m + a] = if a % 2 == 0 { 1.0 } else { -1.0 };
    }
    Ok(D2Data {
        conn,
        zeta,
        n,
        epsilon,
        gram,
        phi: Some(phi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma_y2() -> SurfaceConnection {
        // Γ¹₁₁ = (x²)² in the second coordinate, others 0
        let mut c = SurfaceConnection::flat([-1.0, 1.0, -1.0, 1.0]);
        c.gamma[0][0] = ChartFunction::poly(Polynomial2::new(vec![(0, 2, 1.0)]));
        c
    }

    #[test]
    fn polynomial_expansion_matches_direct_power() {
        let p = Polynomial2::linear_power(0.5, 1.0, -0.2, 3, 0.7);
        let (x, y) = (0.3f64, -0.8f64);
        assert!((p.eval(x, y) - 0.7 * (0.5 * x + y - 0.2).powi(3)).abs() < 1e-15);
        let dx = p.partial(0);
        assert!((dx.eval(x, y) - 0.7 * 1.5 * (0.5 * x + y - 0.2).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn ricci_of_quadratic_christoffel() {
        let c = gamma_y2();
        let y = 0.6;
        let r = ricci_of_connection(&c, [0.2, y]).unwrap();
        // ρ_12 = −∂_2Γ¹₁₁, ρ_21 = 0; finite-difference oracle on Γ
        let h = 1e-5;
        let g = |yy: f64| c.gamma_full([0.2, yy])[0][0][0];
        let oracle = -(g(y + h) - g(y - h)) / (2.0 * h);
        assert!((r.ricci[0][1] - oracle).abs() < 1e-9);
        assert!(r.ricci[1][0].abs() < 1e-15);
        assert!(r.symmetry_residual > 1.0);
    }

    #[test]
    fn linear_christoffel_gives_unit_ricci_entry() {
        let mut c = SurfaceConnection::flat([-1.0, 1.0, -1.0, 1.0]);
        c.gamma[0][0] = ChartFunction::poly(Polynomial2::new(vec![(0, 1, 1.0)]));
        let r = ricci_of_connection(&c, [0.4, -0.3]).unwrap();
        assert!((r.ricci[0][1] + 1.0).abs() < 1e-15);
        assert_eq!(r.ricci[1][0], 0.0);
    }

    #[test]
    fn flatness_and_area_checks_on_controls() {
        let grid = chart_grid(&gamma_y2(), 5, 0.9);
        let flat = SurfaceConnection::flat([-1.0, 1.0, -1.0, 1.0]);
        assert_eq!(projective_flatness_residual(&flat, &grid).unwrap(), 0.0);
        assert_eq!(
            area_parallel_residual(&flat, &ChartFunction::constant(2.0), &grid).unwrap(),
            0.0
        );
        assert!(projective_flatness_residual(&gamma_y2(), &grid).unwrap() > 1e-3);
        assert!(
            area_parallel_residual(&gamma_y2(), &ChartFunction::constant(1.0), &grid).unwrap()
                > 1e-3
        );
    }

    #[test]
    fn arbitrary_projective_class_of_flat_is_flat() {
        // ψ not closed: still projectively flat, but no parallel area form
        let mut conn = SurfaceConnection::flat([-1.0, 1.0, -1.0, 1.0]);
        let psi = [
            Polynomial2::new(vec![(1, 2, 1.0), (1, 0, 1.0)]),
            Polynomial2::new(vec![(2, 0, 1.0), (0, 1, -1.0)]),
        ];
        for k in 0..2 {
            for (i, j) in [(0, 0), (0, 1), (1, 1)] {
                let mut p = Polynomial2::zero();
                if k == i {
                    p = p.add(&psi[j]);
                }
                if k == j {
                    p = p.add(&psi[i]);
                }
                conn.gamma[k][pair_slot(i, j)] = ChartFunction::poly(p);
            }
        }
        let grid = chart_grid(&conn, 5, 0.9);
        assert!(projective_flatness_residual(&conn, &grid).unwrap() < 1e-12);
    }

    #[test]
    fn phi_operator_on_flat_examples() {
        let conn = SurfaceConnection::flat([-1.0, 1.0, -1.0, 1.0]);
        let grid = chart_grid(&conn, 5, 0.9);
        let mut d = flat_fixture();
        assert!(phi_residual(&d, &grid).unwrap() < 1e-14);
        d.epsilon = -1;
        d.phi = Some(PhiField {
            c11: ChartFunction::poly(Polynomial2::new(vec![(2, 0, -0.5)])),
            ..PhiField::default()
        });
        assert!(phi_residual(&d, &grid).unwrap() < 1e-14);
    }

    #[test]
    fn tau_contractions() {
        let zero = tau_from_phi(1.3, [[0.0; 2]; 2]);
        assert_eq!(zero, [[0.0; 2]; 2]);
        let t = tau_from_phi(1.0, [[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(t, [[0.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn riemann_extension_null_structure() {
        let conn = gamma_y2();
        let h = riemann_extension(&conn);
        let x = [0.3, -0.4, 0.7, -1.1];
        let g: Vec<f64> = h.eval(&x);
        assert_eq!(g[ix2(4, 2, 2)], 0.0);
        assert_eq!(g[ix2(4, 2, 3)], 0.0);
        assert_eq!(g[ix2(4, 3, 3)], 0.0);
        // horizontal lift X^i ∂_i + Γ^k_ij X^j p_k ∂_{p_i} is null
        let gam = conn.gamma_full([x[0], x[1]]);
        let xv = [0.8, -0.35];
        let mut w = [xv[0], xv[1], 0.0, 0.0];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    w[2 + i] += gam[k][i][j] * xv[j] * x[2 + k];
                }
            }
        }
        let q: f64 = (0..4)
            .flat_map(|a| (0..4).map(move |b| (a, b)))
            .map(|(a, b)| g[ix2(4, a, b)] * w[a] * w[b])
            .sum();
        assert!(q.abs() < 1e-15);
        // h(ξ, w) = ξ(dπ w) for vertical ξ
        let xi = [0.0, 0.0, 1.7, -0.2];
        let hw: f64 = (0..4)
            .flat_map(|a| (0..4).map(move |b| (a, b)))
            .map(|(a, b)| g[ix2(4, a, b)] * xi[a] * w[b])
            .sum();
        assert!((hw - (1.7 * w[0] - 0.2 * w[1])).abs() < 1e-15);
    }

    #[test]
    fn nonflat_fixture_is_valid() {
        let d = nonflat_fixture(4, 1).unwrap();
        assert!(validate(&d).is_empty(), "{:?}", validate(&d));
        let grid = chart_grid(&d.conn, 9, 0.95);
        assert!(phi_residual(&d, &grid).unwrap() < 1e-9);
        assert!(ricci_parallel_residual(&d.conn, &grid).unwrap() > 1e-3);
    }

    #[test]
    fn dichotomy_flat_versus_nonflat() {
        let flat = flat_fixture();
        let prof = ToleranceProfile::with_grid(default_grid(&flat, 2, 64, 0));
        let surface = chart_grid(&flat.conn, 5, 0.8);
        let r = local_symmetry_dichotomy(&flat, &prof, &surface).unwrap();
        assert_eq!(r.verdict, Dichotomy::Symmetric);
        let d = nonflat_fixture(4, -1).unwrap();
        let prof = ToleranceProfile::with_grid(default_grid(&d, 2, 64, 0));
        let surface = chart_grid(&d.conn, 5, 0.8);
        let r = local_symmetry_dichotomy(&d, &prof, &surface).unwrap();
        assert_eq!(r.verdict, Dichotomy::EssentiallyConformallySymmetric);
    }

    #[test]
    fn serde_round_trip() {
        let d = flat_fixture();
        let s = serde_json::to_string(&d).unwrap();
        let back: D2Data = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }
}
