//! Block matrices `B(t) = diag(α, β, γ)^{⊕j}`, `A = diag(a, b, c)^{⊕j}`, the
//! translation operator on solutions of `u̇ = Bu`, the integrality gate, the
//! isometric action of `ℤ × ℝ × ℰ` on the `d = 1` metric, and the
//! compactness certificate assembled from all of these.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chartcalc::{
    check_metric_at, verify_grid, ChartPoint, GridReport, MetricField, Signature, ToleranceProfile,
};
use crate::d1family::{build_metric, default_grid, D1Data, D1Metric, ProfileFunction};
use crate::error::{Error, Result};
use crate::linalg::{charpoly, ix2};
use crate::ode::{integrate, integrate_checked, OdeOptions};
use crate::olszak::{fibers_on_grid, KERNEL_TOL};
use crate::riccati::{
    check_septuple, roots_of_P, solve_septuple, spec, validate_kl, KLPair, Septuple,
    SpectralTriple, GRID,
};

pub const SCHEMA_VERSION: u32 = 1;

pub const LIMITATIONS: &str = "Only the integrality condition on the translation operator \
(integer characteristic polynomial with unit constant term) is checked. The remaining \
conditions for a properly discontinuous cocompact action, the lattice and the functional \
on the solution space are not constructed.";

/// `B(t)` and `A` for a septuple and multiplicity `j`.
#[derive(Clone, Debug)]
pub struct BlockProfile {
    pub septuple: Septuple,
    pub j: usize,
    /// Max of `|Ḃ + B² − f − A|` over the check grid.
    pub residual: f64,
}

impl BlockProfile {
    pub fn dim(&self) -> usize {
        3 * self.j
    }

    /// Diagonal of `B(t)`.
    pub fn b_diag(&self, t: f64) -> Vec<f64> {
        let s = &self.septuple;
        let d = [s.alpha.eval(t), s.beta.eval(t), s.gamma.eval(t)];
        (0..self.j).flat_map(|_| d).collect()
    }

    /// Diagonal of `A`.
    pub fn a_diag(&self) -> Vec<f64> {
        let s = &self.septuple;
        (0..self.j).flat_map(|_| [s.a, s.b, s.c]).collect()
    }
}

pub fn build_blocks(s: &Septuple, j: usize, tol: f64) -> Result<BlockProfile> {
    if j == 0 {
        return Err(Error::invalid("j must be at least 1"));
    }
    let residual = check_septuple(s, 2 * GRID).max_riccati();
    let trace: f64 = j as f64 * (s.a + s.b + s.c);
    if !(residual < tol) {
        return Err(Error::InternalConsistency(format!(
            "Ḃ + B² − f − A residual {residual:.3e} exceeds {tol:.0e}"
        )));
    }
    if trace.abs() > 1e-12 {
        return Err(Error::InternalConsistency(format!("trace A = {trace:.3e}")));
    }
    Ok(BlockProfile {
        septuple: s.clone(),
        j,
        residual,
    })
}

/// `T u = u(· − p)` on solutions of `u̇ = Bu`, in the basis `u ↦ u(0)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TranslationOperator {
    pub dim: usize,
    /// Row-major.
    pub matrix: Vec<f64>,
    /// `det(xI − T)`, leading coefficient first.
    pub charpoly: Vec<f64>,
    /// Max difference to the solve at 32× tighter tolerance.
    pub integrator_discrepancy: f64,
}

impl TranslationOperator {
    pub fn as_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.matrix)
    }

    /// Real eigenvalues, ascending; computed from the matrix, not from the
    /// characteristic polynomial (whose roots are ill-conditioned when repeated).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let ev = self.as_matrix().complex_eigenvalues();
        let complex: Vec<(f64, f64)> = ev
            .iter()
            .filter(|z| z.im.abs() > 1e-10 * z.norm().max(1.0))
            .map(|z| (z.re, z.im))
            .collect();
        if !complex.is_empty() {
            return Err(Error::InternalConsistency(format!(
                "translation operator has complex eigenvalues {complex:?}"
            )));
        }
        let mut ev: Vec<f64> = ev.iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        Ok(ev)
    }
}

/// Fundamental matrix of `u̇ = B(t)u` from `0` to `−p`, treating `B` as a
/// general matrix.
pub fn translation_operator(bp: &BlockProfile) -> Result<TranslationOperator> {
    let m = bp.dim();
    let p = bp.septuple.p;
    let mut y0 = vec![0.0; m * m];
    for i in 0..m {
        y0[ix2(m, i, i)] = 1.0;
    }
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let b = bp.b_diag(t);
        let mut bm = vec![0.0; m * m];
        for i in 0..m {
            bm[ix2(m, i, i)] = b[i];
        }
        for r in 0..m {
            for c in 0..m {
                dy[ix2(m, r, c)] = (0..m).map(|k| bm[ix2(m, r, k)] * y[ix2(m, k, c)]).sum();
            }
        }
    };
    let (y, disc) = integrate_checked(rhs, 0.0, -p, &y0, &OdeOptions::default())?;
    if disc > 1e-10 {
        return Err(Error::Integrator(format!(
            "tolerance cross-check disagrees by {disc:.3e}"
        )));
    }
    let mat = DMatrix::from_row_slice(m, m, &y);
    Ok(TranslationOperator {
        dim: m,
        charpoly: charpoly(&mat),
        matrix: y,
        integrator_discrepancy: disc,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharpolyGate {
    pub coefficients: Vec<f64>,
    pub nearest_integer: Vec<i64>,
    /// Max `|coefficient − nearest integer|`.
    pub residual: f64,
    pub det: f64,
    pub passed: bool,
}

/// Passes iff every coefficient of `det(xI − T)` is within `tol` of an
/// integer and the constant term is `±1`; an integral companion matrix then
/// represents `T`.
pub fn charpoly_gate(t: &TranslationOperator, tol: f64) -> CharpolyGate {
    let coefficients = t.charpoly.clone();
    let nearest_integer: Vec<i64> = coefficients.iter().map(|c| c.round() as i64).collect();
    let residual = coefficients
        .iter()
        .zip(&nearest_integer)
        .fold(0.0f64, |m, (c, i)| m.max((c - *i as f64).abs()));
    let last = *coefficients.last().unwrap_or(&0.0);
    let det = if t.dim.is_multiple_of(2) { last } else { -last };
    let unit = nearest_integer.last().is_some_and(|c| c.abs() == 1);
    CharpolyGate {
        passed: residual < tol && unit && residual.is_finite(),
        coefficients,
        nearest_integer,
        residual,
        det,
    }
}

/// Element `(k, q, u)` of `ℤ × ℝ × ℰ`, with `u` given by `(u(0), u̇(0))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub k: i64,
    pub q: f64,
    pub u0: Vec<f64>,
    pub udot0: Vec<f64>,
}

impl GroupElement {
    pub fn identity(m: usize) -> Self {
        Self {
            k: 0,
            q: 0.0,
            u0: vec![0.0; m],
            udot0: vec![0.0; m],
        }
    }

    pub fn random<R: Rng>(rng: &mut R, m: usize) -> Self {
        Self {
            k: rng.gen_range(-1..=1),
            q: rng.gen_range(-1.0..1.0),
            u0: (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            udot0: (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        }
    }

    pub fn max_difference(&self, other: &Self) -> f64 {
        let mut d = (self.q - other.q).abs();
        if self.k != other.k {
            return f64::INFINITY;
        }
        for (a, b) in self
            .u0
            .iter()
            .zip(&other.u0)
            .chain(self.udot0.iter().zip(&other.udot0))
        {
            d = d.max((a - b).abs());
        }
        d
    }
}

/// The equation `ü = f u + A u` of a periodic [`D1Data`].
#[derive(Clone, Debug)]
pub struct SolutionSpace {
    data: D1Data,
    period: f64,
}

impl SolutionSpace {
    pub fn new(data: &D1Data) -> Result<Self> {
        let period = match (&data.f, data.period) {
            (ProfileFunction::Constant { .. }, Some(p)) if p > 0.0 => p,
            (ProfileFunction::Trigonometric(s), _) => s.period,
            _ => {
                return Err(Error::invalid(
                    "the action needs periodic data with a period",
                ))
            }
        };
        if data.interval.is_some() {
            return Err(Error::invalid(
                "the action needs data defined on the whole line",
            ));
        }
        Ok(Self {
            data: data.clone(),
            period,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.data.fiber_dim()
    }

    /// `(u(t), u̇(t))` for the solution with the given initial data at `0`.
    pub fn evaluate(&self, u0: &[f64], udot0: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.dim();
        let mut y0 = u0.to_vec();
        y0.extend_from_slice(udot0);
        if t == 0.0 {
            return Ok((u0.to_vec(), udot0.to_vec()));
        }
        let a = &self.data.a;
        let f = &self.data.f;
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            let ft = f.eval(t);
            for i in 0..m {
                dy[i] = y[m + i];
                dy[m + i] = ft * y[i] + (0..m).map(|k| a[ix2(m, i, k)] * y[k]).sum::<f64>();
            }
        };
        let y = integrate(rhs, 0.0, t, &y0, &OdeOptions::default())?;
        Ok((y[..m].to_vec(), y[m..].to_vec()))
    }

    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let m = self.dim();
        let g = &self.data.gram;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += g[ix2(m, i, j)] * x[i] * y[j];
            }
        }
        s
    }

    /// `g1·g2`, so that `(g1·g2)·x = g1·(g2·x)`.
    pub fn compose(&self, g1: &GroupElement, g2: &GroupElement) -> Result<GroupElement> {
        let shift = g2.k as f64 * self.period;
        let (u1, du1) = self.evaluate(&g1.u0, &g1.udot0, shift)?;
        let q = g1.q + g2.q + self.inner(&g2.udot0, &u1) - self.inner(&du1, &g2.u0);
        Ok(GroupElement {
            k: g1.k + g2.k,
            q,
            u0: g2.u0.iter().zip(&u1).map(|(a, b)| a + b).collect(),
            udot0: g2.udot0.iter().zip(&du1).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        let (u, du) = self.evaluate(&g.u0, &g.udot0, -(g.k as f64) * self.period)?;
        Ok(GroupElement {
            k: -g.k,
            q: -g.q,
            u0: u.into_iter().map(|x| -x).collect(),
            udot0: du.into_iter().map(|x| -x).collect(),
        })
    }

    /// `(k, q, u)·(t, s, v) = (t + kp, s + q − ⟨u̇(t), 2v + u(t)⟩, v + u(t))`.
    pub fn act(&self, g: &GroupElement, x: &[f64]) -> Result<Vec<f64>> {
        self.act_impl(g, x, true)
    }

    /// The action with the `⟨u̇, 2v + u⟩` term dropped; not isometric.
    pub fn act_corrupted(&self, g: &GroupElement, x: &[f64]) -> Result<Vec<f64>> {
        self.act_impl(g, x, false)
    }

    fn act_impl(&self, g: &GroupElement, x: &[f64], full: bool) -> Result<Vec<f64>> {
        let m = self.dim();
        if x.len() != m + 2 {
            return Err(Error::invalid(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                m + 2
            )));
        }
        let (t, s, v) = (x[0], x[1], &x[2..]);
        let (u, du) = self.evaluate(&g.u0, &g.udot0, t)?;
        let w: Vec<f64> = v.iter().zip(&u).map(|(a, b)| 2.0 * a + b).collect();
        let mut out = vec![t + g.k as f64 * self.period, s + g.q];
        if full {
            out[1] -= self.inner(&du, &w);
        }
        out.extend(v.iter().zip(&u).map(|(a, b)| a + b));
        Ok(out)
    }
}

/// Max over `points` of `|J^T g(φ(x)) J − g(x)|`, `J` the fourth-order
/// central-difference Jacobian of `φ` with step `h`.
pub fn pullback_residual<F>(metric: &D1Metric, map: F, points: &[ChartPoint], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = metric.dim();
    let mut worst = 0.0f64;
    for x in points {
        let y = map(&x.coords)?;
        let mut jac = vec![0.0; n * n];
        for c in 0..n {
            let at = |d: f64| {
                let mut z = x.coords.clone();
                z[c] += d;
                map(&z)
            };
            let (p2, p1, m1, m2) = (at(2.0 * h)?, at(h)?, at(-h)?, at(-2.0 * h)?);
            for r in 0..n {
                jac[ix2(n, r, c)] = (8.0 * (p1[r] - m1[r]) - (p2[r] - m2[r])) / (12.0 * h);
            }
        }
        let gy: Vec<f64> = metric.eval(&y);
        let gx: Vec<f64> = metric.eval(&x.coords);
        for a in 0..n {
            for b in 0..n {
                let mut v = 0.0;
                for r in 0..n {
                    for s in 0..n {
                        v += jac[ix2(n, r, a)] * gy[ix2(n, r, s)] * jac[ix2(n, s, b)];
                    }
                }
                worst = worst.max((v - gx[ix2(n, a, b)]).abs());
            }
        }
    }
    Ok(worst)
}

/// Isometry defect of `g` on the profile grid.
pub fn isometry_residual(
    space: &SolutionSpace,
    metric: &D1Metric,
    g: &GroupElement,
    prof: &ToleranceProfile,
) -> Result<f64> {
    pullback_residual(metric, |x| space.act(g, x), &prof.grid, 1e-3)
}

/// [`D1Data`] of the metric certified for a septuple: `f` from the septuple,
/// `A = diag(a, b, c)^{⊕j}` and `⟨,⟩ = diag(±1)` with `negatives` minus signs.
pub fn d1data_for(s: &Septuple, j: usize, negatives: usize) -> Result<D1Data> {
    let m = 3 * j;
    if negatives > m {
        return Err(Error::invalid(format!(
            "{negatives} negative directions requested in a {m}-dimensional fiber"
        )));
    }
    let mut gram = vec![0.0; m * m];
    let mut a = vec![0.0; m * m];
    for i in 0..m {
        gram[ix2(m, i, i)] = if i < m - negatives { 1.0 } else { -1.0 };
        a[ix2(m, i, i)] = [s.a, s.b, s.c][i % 3];
    }
    Ok(D1Data {
        interval: None,
        f: ProfileFunction::Trigonometric(s.f.clone()),
        period: Some(s.p),
        n: m + 2,
        gram,
        a,
    })
}

#[derive(Clone, Debug)]
pub struct CertifyConfig {
    pub k: i64,
    pub l: i64,
    pub j: usize,
    pub p: f64,
    /// Number of negative directions of `⟨,⟩`.
    pub negatives: usize,
    /// Grid points per axis for the curvature suite.
    pub grid: usize,
    pub max_points: usize,
    pub seed: u64,
    pub isometry_samples: usize,
    pub tol_first: f64,
    pub tol_second: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            k: 5,
            l: 6,
            j: 1,
            p: 1.0,
            negatives: 0,
            grid: 3,
            max_points: 243,
            seed: 0,
            isometry_samples: 10,
            tol_first: 1e-8,
            tol_second: 1e-6,
        }
    }
}

/// One gate of the certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSummary {
    pub points: usize,
    pub max_scalar: f64,
    pub max_nabla_weyl: f64,
    pub max_harmonic: f64,
    pub max_semisymmetry: f64,
    pub max_recurrence: f64,
    pub max_ricci_rank: usize,
    pub olszak_dimensions: Vec<usize>,
}

impl CurvatureSummary {
    fn new(r: &GridReport, dims: Vec<usize>) -> Self {
        Self {
            points: r.points,
            max_scalar: r.max_scalar,
            max_nabla_weyl: r.max_nabla_weyl,
            max_harmonic: r.max_harmonic,
            max_semisymmetry: r.max_semisymmetry,
            max_recurrence: r.max_recurrence,
            max_ricci_rank: r.max_ricci_rank,
            olszak_dimensions: dims,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactnessCertificate {
    pub schema_version: u32,
    pub kl: KLPair,
    pub j: usize,
    pub p: f64,
    pub n: usize,
    pub seed: u64,
    pub roots: Option<SpectralTriple>,
    pub septuple: Option<Septuple>,
    pub septuple_digest: Option<String>,
    pub riccati_residuals: Option<[f64; 3]>,
    pub spec: Option<SpectralTriple>,
    pub floquet_eigenvalues: Option<Vec<f64>>,
    pub translation_matrix: Option<Vec<f64>>,
    pub charpoly: Option<CharpolyGate>,
    #[serde(rename = "detT")]
    pub det_t: Option<f64>,
    pub isometry_residuals: Vec<f64>,
    pub corrupted_isometry_residual: Option<f64>,
    pub curvature: Option<CurvatureSummary>,
    pub signature: Option<Signature>,
    pub signature_checked: bool,
    pub stages: Vec<StageRecord>,
    pub failure: Option<StageFailure>,
    pub verdict: String,
    pub limitations: String,
}

impl CompactnessCertificate {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }

    /// Pretty JSON followed by a newline; identical inputs give identical bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("certificate serializes");
        s.push('\n');
        s
    }

    fn gate(&mut self, name: &str, value: f64, tolerance: f64) -> bool {
        let passed = value < tolerance && value.is_finite();
        log::info!(
            "{name}: {value:.3e} (tolerance {tolerance:.0e}) {}",
            if passed { "ok" } else { "FAILED" }
        );
        self.stages.push(StageRecord {
            name: name.into(),
            value,
            tolerance,
            passed,
        });
        passed
    }

    fn fail(&mut self, stage: &str, e: &Error) {
        log::warn!("{stage}: {e}");
        self.failure = Some(StageFailure {
            stage: stage.into(),
            message: e.to_string(),
        });
    }
}

fn digest<T: Serialize>(v: &T) -> String {
    let bytes = serde_json::to_vec(v).expect("serializable");
    hex::encode(Sha256::digest(bytes))
}

/// Runs the full pipeline. Invalid `(k, l, j, p)` is an error; a failure in
/// any numerical stage is recorded in the returned certificate.
pub fn certify_compact(cfg: &CertifyConfig) -> Result<CompactnessCertificate> {
    let kl = validate_kl(cfg.k, cfg.l)?;
    if cfg.j == 0 {
        return Err(Error::invalid("j must be at least 1"));
    }
    if !(cfg.p > 0.0 && cfg.p.is_finite()) {
        return Err(Error::invalid(format!("period {} must be positive", cfg.p)));
    }
    if !(cfg.tol_first > 0.0 && cfg.tol_second > 0.0) {
        return Err(Error::invalid("tolerances must be positive"));
    }
    if cfg.negatives > 3 * cfg.j {
        return Err(Error::invalid(format!(
            "{} negative directions requested in a {}-dimensional fiber",
            cfg.negatives,
            3 * cfg.j
        )));
    }
    let mut cert = CompactnessCertificate {
        schema_version: SCHEMA_VERSION,
        kl,
        j: cfg.j,
        p: cfg.p,
        n: 3 * cfg.j + 2,
        seed: cfg.seed,
        roots: None,
        septuple: None,
        septuple_digest: None,
        riccati_residuals: None,
        spec: None,
        floquet_eigenvalues: None,
        translation_matrix: None,
        charpoly: None,
        det_t: None,
        isometry_residuals: Vec::new(),
        corrupted_isometry_residual: None,
        curvature: None,
        signature: None,
        signature_checked: false,
        stages: Vec::new(),
        failure: None,
        verdict: "fail".into(),
        limitations: LIMITATIONS.into(),
    };
    if let Err((stage, e)) = run_stages(cfg, &mut cert) {
        cert.fail(stage, &e);
    }
    let ok =
        cert.failure.is_none() && !cert.stages.is_empty() && cert.stages.iter().all(|s| s.passed);
    cert.verdict = if ok { "pass" } else { "fail" }.into();
    Ok(cert)
}

type StageResult<T> = std::result::Result<T, (&'static str, Error)>;

fn at<T>(stage: &'static str, r: Result<T>) -> StageResult<T> {
    r.map_err(|e| (stage, e))
}

fn run_stages(cfg: &CertifyConfig, cert: &mut CompactnessCertificate) -> StageResult<()> {
    let roots = at("roots", roots_of_P(cert.kl))?;
    cert.roots = Some(roots);
    cert.gate(
        "root product",
        (roots.lambda * roots.mu * roots.nu - 1.0).abs(),
        1e-12,
    );

    let s = at("septuple", solve_septuple(&roots, cfg.p))?;
    let chk = check_septuple(&s, 2 * GRID);
    cert.septuple_digest = Some(digest(&s));
    cert.riccati_residuals = Some(chk.riccati);
    cert.septuple = Some(s.clone());
    cert.gate("riccati", chk.max_riccati(), cfg.tol_first);
    cert.gate(
        "ordering",
        (-chk.ordering_margin).max(0.0),
        f64::MIN_POSITIVE,
    );
    cert.gate(
        "f nonconstant",
        if chk.f_variation > 1e-6 { 0.0 } else { 1.0 },
        0.5,
    );

    let (sp, quad_err) = at("spec", spec(&s))?;
    cert.spec = Some(sp);
    cert.gate("spec quadrature", quad_err, 1e-10);
    cert.gate("spec vs roots", sp.max_deviation(&roots), cfg.tol_first);

    let bp = at("blocks", build_blocks(&s, cfg.j, cfg.tol_first))?;
    let t = at("translation operator", translation_operator(&bp))?;
    let ev = at("translation operator", t.eigenvalues())?;
    let expected: Vec<f64> = {
        let mut v: Vec<f64> = (0..cfg.j).flat_map(|_| sp.as_array()).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    };
    let floquet_dev = ev
        .iter()
        .zip(&expected)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    cert.floquet_eigenvalues = Some(ev);
    cert.translation_matrix = Some(t.matrix.clone());
    cert.gate("spec vs floquet", floquet_dev, cfg.tol_first);

    let gate = charpoly_gate(&t, cfg.tol_second);
    cert.det_t = Some(gate.det);
    cert.gate("charpoly integrality", gate.residual, cfg.tol_second);
    cert.gate("det T", (gate.det.abs() - 1.0).abs(), cfg.tol_first);
    let gate_passed = gate.passed;
    cert.charpoly = Some(gate);
    cert.gate("integrality gate", if gate_passed { 0.0 } else { 1.0 }, 0.5);

    let data = at("metric", d1data_for(&s, cfg.j, cfg.negatives))?;
    let metric = at("metric", build_metric(&data))?;
    let sig = metric.signature();
    cert.signature = Some(sig);
    let grid = default_grid(&data, cfg.grid, cfg.max_points, cfg.seed);
    let probe = at("metric", check_metric_at(&metric, &grid[0]))?;
    cert.signature_checked = probe.signature == sig && sig.is_indefinite();
    cert.gate(
        "signature",
        if cert.signature_checked { 0.0 } else { 1.0 },
        0.5,
    );

    let mut prof = ToleranceProfile::with_grid(grid);
    prof.tol_first = cfg.tol_first;
    prof.tol_second = cfg.tol_second;
    let report = at("curvature", verify_grid(&metric, &prof))?;
    let fibers = at("olszak", fibers_on_grid(&metric, &prof, KERNEL_TOL))?;
    let mut dims: Vec<usize> = fibers.iter().map(|f| f.dim).collect();
    dims.sort_unstable();
    dims.dedup();
    cert.gate("scalar curvature", report.max_scalar, cfg.tol_first);
    cert.gate("nabla W", report.max_nabla_weyl, cfg.tol_second);
    cert.gate("harmonic curvature", report.max_harmonic, cfg.tol_second);
    cert.gate("semisymmetry", report.max_semisymmetry, cfg.tol_second);
    cert.gate("ricci recurrence", report.max_recurrence, cfg.tol_second);
    cert.gate(
        "ricci rank",
        if report.max_ricci_rank <= 2 { 0.0 } else { 1.0 },
        0.5,
    );
    cert.gate("olszak dimension", if dims == [1] { 0.0 } else { 1.0 }, 0.5);
    cert.curvature = Some(CurvatureSummary::new(&report, dims));

    let space = at("group action", SolutionSpace::new(&data))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let iso_grid = default_grid(&data, 2, 16, cfg.seed);
    let iso_prof = ToleranceProfile::with_grid(iso_grid);
    for _ in 0..cfg.isometry_samples {
        let g = GroupElement::random(&mut rng, space.dim());
        let r = at(
            "group action",
            isometry_residual(&space, &metric, &g, &iso_prof),
        )?;
        cert.isometry_residuals.push(r);
    }
    let worst = cert
        .isometry_residuals
        .iter()
        .fold(0.0f64, |m, v| m.max(*v));
    cert.gate("isometry", worst, cfg.tol_second);
    let g = GroupElement::random(&mut rng, space.dim());
    let corrupted = at(
        "group action",
        pullback_residual(
            &metric,
            |x| space.act_corrupted(&g, x),
            &iso_prof.grid,
            1e-3,
        ),
    )?;
    cert.corrupted_isometry_residual = Some(corrupted);
    cert.gate(
        "corrupted action detected",
        if corrupted > 1e-3 { 0.0 } else { 1.0 },
        0.5,
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::constant_septuple;

    #[test]
    fn constant_blocks_give_exponential_operator() {
        let s = constant_septuple(1.0, -0.2, -0.5, 2.0);
        let bp = build_blocks(&s, 1, 1e-8).unwrap();
        let t = translation_operator(&bp).unwrap();
        let m = t.as_matrix();
        assert!((m[(0, 0)] - (-2.0f64).exp()).abs() < 1e-12);
        assert!((m[(1, 1)] - 0.4f64.exp()).abs() < 1e-12);
        assert!((m[(2, 2)] - 1.0f64.exp()).abs() < 1e-11);
        assert!(m[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn blocks_repeat_for_cartesian_powers() {
        let s = constant_septuple(1.0, -0.2, -0.5, 2.0);
        let bp = build_blocks(&s, 2, 1e-8).unwrap();
        assert_eq!(bp.b_diag(0.3), vec![1.0, -0.2, -0.5, 1.0, -0.2, -0.5]);
        let mut a = bp.a_diag();
        a.sort_by(|x, y| x.total_cmp(y));
        assert_eq!(a[0], a[1]);
        assert_eq!(a[4], a[5]);
    }

    #[test]
    fn gate_rejects_non_integral_operator() {
        let t = TranslationOperator {
            dim: 2,
            matrix: vec![2.0, 0.0, 0.0, 0.7],
            charpoly: vec![1.0, -2.7, 1.4],
            integrator_discrepancy: 0.0,
        };
        assert!(!charpoly_gate(&t, 1e-6).passed);
        let ok = TranslationOperator {
            dim: 2,
            matrix: vec![2.0, 1.0, 1.0, 1.0],
            charpoly: vec![1.0, -3.0, 1.0],
            integrator_discrepancy: 0.0,
        };
        let g = charpoly_gate(&ok, 1e-6);
        assert!(g.passed);
        assert_eq!(g.det, 1.0);
    }

    fn sample_space() -> (SolutionSpace, D1Metric) {
        let s = constant_septuple(1.0, -0.2, -0.5, 2.0);
        let mut d = d1data_for(&s, 1, 1).unwrap();
        d.f = ProfileFunction::Trigonometric(crate::series::TrigSeries {
            period: 2.0,
            constant: 0.3,
            cos: vec![0.2],
            sin: vec![0.1],
        });
        (SolutionSpace::new(&d).unwrap(), build_metric(&d).unwrap())
    }

    #[test]
    fn identity_acts_trivially() {
        let (space, _) = sample_space();
        let x = [0.3, -0.2, 0.1, 0.5, -0.7];
        assert_eq!(
            space.act(&GroupElement::identity(3), &x).unwrap(),
            x.to_vec()
        );
    }

    #[test]
    fn action_is_compatible_with_composition() {
        let (space, _) = sample_space();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g1 = GroupElement::random(&mut rng, 3);
        let g2 = GroupElement::random(&mut rng, 3);
        let x = [0.3, -0.2, 0.1, 0.5, -0.7];
        let lhs = space.act(&space.compose(&g1, &g2).unwrap(), &x).unwrap();
        let rhs = space.act(&g1, &space.act(&g2, &x).unwrap()).unwrap();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-9);
        }
        let inv = space.inverse(&g1).unwrap();
        let back = space.act(&inv, &space.act(&g1, &x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn action_is_isometric_and_corruption_is_not() {
        let (space, metric) = sample_space();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = GroupElement::random(&mut rng, 3);
        let pts = vec![
            ChartPoint::new(vec![0.3, -0.2, 0.1, 0.5, -0.7]),
            ChartPoint::new(vec![-0.8, 0.4, -0.3, 0.2, 0.6]),
        ];
        let prof = ToleranceProfile::with_grid(pts.clone());
        assert!(isometry_residual(&space, &metric, &g, &prof).unwrap() < 1e-6);
        let bad = pullback_residual(&metric, |x| space.act_corrupted(&g, x), &pts, 1e-3).unwrap();
        assert!(bad > 1e-3);
    }

    #[test]
    fn aperiodic_data_is_rejected() {
        let (space, _) = sample_space();
        let mut d = space.data.clone();
        d.f = ProfileFunction::Constant { value: 1.0 };
        d.period = None;
        assert!(SolutionSpace::new(&d).is_err());
    }
}
