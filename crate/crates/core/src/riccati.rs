//! Periodic Riccati systems `α̇+α² = f+a`, `β̇+β² = f+b`, `γ̇+γ² = f+c`,
//! the spectral map `(α, β, γ) ↦ exp(−∫₀ᵖ ·)`, and a numerical inverse of
//! that map on the admissible region.
//!
//! With `ρ = α−β` and `σ = β−γ`, the pair `(α, β)` is recovered from `ρ`
//! through `α+β = (a−b−ρ̇)/ρ`, and `(β, γ)` from `σ` likewise. Writing
//! `σ = e^w ρ`, the requirement that both give the same `β` is the algebraic
//! relation `(1+e^w)ρ² − ẇρ − (a−b) + (b−c)e^{−w} = 0`, so `ρ` is explicit in
//! `w` and the constants. The solver fixes the shape of `w` and runs Newton
//! on `(mean w, a, b)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::companion_roots;
use crate::series::TrigSeries;

/// Default truncation of every periodic function.
pub const HARMONICS: usize = 16;
/// Default number of equispaced samples per period.
pub const GRID: usize = 256;
/// Smallest value `ρ` and `σ` may take during the search.
pub const POSITIVITY_FLOOR: f64 = 1e-6;
/// Riccati residual below which [`solve_septuple`] stops adding harmonics.
pub const TRUNCATION_TARGET: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KLPair {
    pub k: i64,
    pub l: i64,
}

/// Requires `4 < k < l ≤ k²/4`.
pub fn validate_kl(k: i64, l: i64) -> Result<KLPair> {
    let mut v = Vec::new();
    if k <= 4 {
        v.push(format!("k = {k} must exceed 4"));
    }
    if l <= k {
        v.push(format!("l = {l} must exceed k = {k}"));
    }
    if 4 * l > k * k {
        v.push(format!("l = {l} exceeds k²/4 = {}", (k * k) as f64 / 4.0));
    }
    if v.is_empty() {
        Ok(KLPair { k, l })
    } else {
        Err(Error::InvalidInput(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralTriple {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
}

/// Margins of the conditions defining the admissible region; all must be
/// positive for membership.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub inside: bool,
    /// `λ`, `μ−λ`, `ν−μ`, `1−λ`, `ν−1`, `1−λμ`, `μν−1`, `|λν−1|`.
    pub margins: [f64; 8],
}

impl SpectralTriple {
    /// Sorts the three values ascending.
    pub fn sorted(mut v: [f64; 3]) -> Self {
        v.sort_by(|a, b| a.total_cmp(b));
        Self {
            lambda: v[0],
            mu: v[1],
            nu: v[2],
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.lambda, self.mu, self.nu]
    }

    pub fn membership(&self) -> Membership {
        let (l, m, n) = (self.lambda, self.mu, self.nu);
        let margins = [
            l,
            m - l,
            n - m,
            1.0 - l,
            n - 1.0,
            1.0 - l * m,
            m * n - 1.0,
            (l * n - 1.0).abs(),
        ];
        Membership {
            inside: margins.iter().all(|x| *x > 0.0 && x.is_finite()),
            margins,
        }
    }

    /// `−log` of each value: the integrals `∫₀ᵖ α, ∫₀ᵖ β, ∫₀ᵖ γ` this triple
    /// prescribes (descending).
    pub fn integrals(&self) -> [f64; 3] {
        [-self.lambda.ln(), -self.mu.ln(), -self.nu.ln()]
    }

    pub fn max_deviation(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Roots of `P(x) = −x³ + kx² − lx + 1`, sorted.
#[allow(non_snake_case)]
pub fn roots_of_P(kl: KLPair) -> Result<SpectralTriple> {
    let coeffs = [-1.0, kl.k as f64, -(kl.l as f64), 1.0];
    let (mut real, complex) = companion_roots(&coeffs);
    if !complex.is_empty() || real.len() != 3 {
        return Err(Error::InternalConsistency(format!(
            "P has complex roots for (k, l) = ({}, {})",
            kl.k, kl.l
        )));
    }
    // one Newton polish per root
    for r in real.iter_mut() {
        let p = ((-*r + kl.k as f64) * *r - kl.l as f64) * *r + 1.0;
        let dp = (-3.0 * *r + 2.0 * kl.k as f64) * *r - kl.l as f64;
        if dp != 0.0 {
            *r -= p / dp;
        }
    }
    let t = SpectralTriple::sorted([real[0], real[1], real[2]]);
    if !t.membership().inside {
        return Err(Error::InternalConsistency(format!(
            "roots {:?} of P lie outside the admissible region",
            t.as_array()
        )));
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Septuple {
    pub alpha: TrigSeries,
    pub beta: TrigSeries,
    pub gamma: TrigSeries,
    pub f: TrigSeries,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeptupleCheck {
    /// Max residuals of the three Riccati equations.
    pub riccati: [f64; 3],
    /// `min(α−β, β−γ)` over the grid.
    pub ordering_margin: f64,
    pub constants_sum: f64,
    /// `max f − min f`.
    pub f_variation: f64,
}

impl SeptupleCheck {
    pub fn max_riccati(&self) -> f64 {
        self.riccati.iter().fold(0.0f64, |m, v| m.max(*v))
    }
}

/// Riccati residuals `α̇+α²−f−a` etc. at `samples` equispaced points
/// (evaluated from the series and their termwise derivatives).
pub fn check_septuple(s: &Septuple, samples: usize) -> SeptupleCheck {
    let ts = TrigSeries::grid(s.p, samples);
    let mut riccati = [0.0f64; 3];
    let funcs = [(&s.alpha, s.a), (&s.beta, s.b), (&s.gamma, s.c)];
    for (r, (x, k)) in riccati.iter_mut().zip(funcs) {
        let dx = x.derivative();
        for &t in &ts {
            let v = x.eval(t);
            *r = r.max((dx.eval(t) + v * v - s.f.eval(t) - k).abs());
        }
    }
    let mut margin = f64::INFINITY;
    for &t in &ts {
        let (a, b, c) = (s.alpha.eval(t), s.beta.eval(t), s.gamma.eval(t));
        margin = margin.min(a - b).min(b - c);
    }
    let (lo, hi) = s.f.min_max(samples);
    SeptupleCheck {
        riccati,
        ordering_margin: margin,
        constants_sum: s.a + s.b + s.c,
        f_variation: hi - lo,
    }
}

/// Every violated septuple invariant at tolerance `tol`.
pub fn validate_septuple(s: &Septuple, tol: f64) -> Vec<String> {
    let mut v = Vec::new();
    if !(s.p > 0.0 && s.p.is_finite()) {
        v.push(format!("period {} must be positive", s.p));
        return v;
    }
    for (name, x) in [
        ("α", &s.alpha),
        ("β", &s.beta),
        ("γ", &s.gamma),
        ("f", &s.f),
    ] {
        if (x.period - s.p).abs() > 1e-12 * s.p {
            v.push(format!("{name} has period {} ≠ {}", x.period, s.p));
        }
    }
    let chk = check_septuple(s, 2 * GRID);
    if chk.constants_sum.abs() > 1e-12 {
        v.push(format!("a+b+c = {:.3e} ≠ 0", chk.constants_sum));
    }
    if s.a == s.b || s.b == s.c || s.a == s.c {
        v.push("a, b, c must be distinct".into());
    }
    if !(s.b < s.a && s.b < s.c) {
        v.push("b must be the smallest constant".into());
    }
    if !(chk.ordering_margin > 0.0) {
        v.push(format!(
            "α > β > γ fails (margin {:.3e})",
            chk.ordering_margin
        ));
    }
    for (name, r) in ["α", "β", "γ"].iter().zip(chk.riccati) {
        if !(r < tol) {
            v.push(format!("Riccati residual for {name} is {r:.3e}"));
        }
    }
    v
}

/// `(e^{−∫α}, e^{−∫β}, e^{−∫γ})` by trapezoid quadrature on [`GRID`] points
/// (spectrally accurate for periodic integrands), with the difference to the
/// half-grid rule as error estimate.
pub fn spec(s: &Septuple) -> Result<(SpectralTriple, f64)> {
    let mut out = [0.0; 3];
    let mut err = 0.0f64;
    for (o, x) in out.iter_mut().zip([&s.alpha, &s.beta, &s.gamma]) {
        let (i, e) = x.integral_with_error(GRID);
        *o = (-i).exp();
        err = err.max(e * o.abs());
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite spectral integral".into()));
    }
    Ok((
        SpectralTriple {
            lambda: out[0],
            mu: out[1],
            nu: out[2],
        },
        err,
    ))
}

/// `(α, β, f)` from `ρ = α−β > 0` and constants `a > b`:
/// `ψ = (a−b−ρ̇)/ρ`, `α = (ψ+ρ)/2`, `β = (ψ−ρ)/2`, `f = α̇+α²−a`.
/// Products are formed on the sample grid and projected onto `harmonics` modes.
pub fn reconstruct_pair(
    rho: &TrigSeries,
    a: f64,
    b: f64,
    harmonics: usize,
) -> Result<(TrigSeries, TrigSeries, TrigSeries)> {
    if !(a > b) {
        return Err(Error::invalid(format!("need a > b, got a = {a}, b = {b}")));
    }
    pair_from_gap(rho, a, b, harmonics)
}

/// [`reconstruct_pair`] without the ordering requirement on the constants
/// (the `(β, γ)` pair has `b < c`).
fn pair_from_gap(
    rho: &TrigSeries,
    a: f64,
    b: f64,
    harmonics: usize,
) -> Result<(TrigSeries, TrigSeries, TrigSeries)> {
    let p = rho.period;
    let (lo, _) = rho.min_max(GRID);
    if !(lo > 0.0) {
        return Err(Error::Positivity(format!("ρ reaches {lo:.3e}")));
    }
    let r = rho.sample(GRID);
    let dr = rho.derivative().sample(GRID);
    let psi: Vec<f64> = r.iter().zip(&dr).map(|(r, d)| (a - b - d) / r).collect();
    let alpha: Vec<f64> = psi.iter().zip(&r).map(|(s, r)| 0.5 * (s + r)).collect();
    let beta: Vec<f64> = psi.iter().zip(&r).map(|(s, r)| 0.5 * (s - r)).collect();
    let alpha = TrigSeries::fit(p, &alpha, harmonics);
    let beta = TrigSeries::fit(p, &beta, harmonics);
    let f = riccati_source(&alpha, a, harmonics);
    Ok((alpha, beta, f))
}

fn riccati_source(x: &TrigSeries, k: f64, harmonics: usize) -> TrigSeries {
    let v = x.sample(GRID);
    let dv = x.derivative().sample(GRID);
    let f: Vec<f64> = v.iter().zip(&dv).map(|(v, d)| d + v * v - k).collect();
    TrigSeries::fit(x.period, &f, harmonics)
}

/// `ρ`, `σ` and the free function `w = log(σ/ρ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoSigmaParam {
    pub rho: TrigSeries,
    pub sigma: TrigSeries,
    pub w: TrigSeries,
    /// Max difference between `β` reconstructed from `ρ` and from `σ`.
    pub consistency: f64,
}

/// `ρ` solving the shared-`β` relation for given `w` and constants, sampled
/// on the grid; `None` if positivity fails.
fn rho_samples(w: &TrigSeries, a: f64, b: f64, c: f64) -> Option<Vec<f64>> {
    let ws = w.sample(GRID);
    let dws = w.derivative().sample(GRID);
    let mut out = Vec::with_capacity(GRID);
    for (w, dw) in ws.into_iter().zip(dws) {
        let e = w.exp();
        let q = (a - b) - (b - c) / e;
        let disc = dw * dw + 4.0 * (1.0 + e) * q;
        if !(disc >= 0.0) {
            return None;
        }
        let r = (dw + disc.sqrt()) / (2.0 * (1.0 + e));
        if !(r > POSITIVITY_FLOOR && r * e > POSITIVITY_FLOOR) {
            return None;
        }
        out.push(r);
    }
    Some(out)
}

/// `(ρ, σ)` for the given `w` and constants.
pub fn rho_sigma(w: &TrigSeries, a: f64, b: f64, harmonics: usize) -> Result<RhoSigmaParam> {
    let c = -a - b;
    let r =
        rho_samples(w, a, b, c).ok_or_else(|| Error::Positivity("ρ or σ leaves (0, ∞)".into()))?;
    let ws = w.sample(GRID);
    let s: Vec<f64> = r.iter().zip(&ws).map(|(r, w)| r * w.exp()).collect();
    let rho = TrigSeries::fit(w.period, &r, harmonics);
    let sigma = TrigSeries::fit(w.period, &s, harmonics);
    let (_, beta_r, _) = pair_from_gap(&rho, a, b, harmonics)?;
    let (beta_s, _, _) = pair_from_gap(&sigma, b, c, harmonics)?;
    let consistency = beta_r
        .sample(GRID)
        .iter()
        .zip(beta_s.sample(GRID))
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Ok(RhoSigmaParam {
        rho,
        sigma,
        w: w.clone(),
        consistency,
    })
}

/// Septuple from `(ρ, σ)` and constants `a, b` (with `c = −a−b`).
pub fn septuple_from_rho_sigma(
    rs: &RhoSigmaParam,
    a: f64,
    b: f64,
    harmonics: usize,
) -> Result<Septuple> {
    let c = -a - b;
    let (alpha, beta, f) = pair_from_gap(&rs.rho, a, b, harmonics)?;
    let (_, gamma, _) = pair_from_gap(&rs.sigma, b, c, harmonics)?;
    Ok(Septuple {
        alpha,
        beta,
        gamma,
        f,
        a,
        b,
        c,
        p: rs.rho.period,
    })
}

/// `(∫α, ∫β, ∫γ)` directly from `ρ` samples: `∫α = ½[(a−b)∫1/ρ + ∫ρ]` etc.
fn integrals(w: &TrigSeries, a: f64, b: f64) -> Option<[f64; 3]> {
    let c = -a - b;
    let r = rho_samples(w, a, b, c)?;
    let ws = w.sample(GRID);
    let p = w.period;
    let dt = p / GRID as f64;
    let (mut inv_r, mut sum_r, mut inv_s, mut sum_s) = (0.0, 0.0, 0.0, 0.0);
    for (r, w) in r.iter().zip(&ws) {
        let s = r * w.exp();
        inv_r += dt / r;
        sum_r += dt * r;
        inv_s += dt / s;
        sum_s += dt * s;
    }
    Some([
        0.5 * ((a - b) * inv_r + sum_r),
        0.5 * ((a - b) * inv_r - sum_r),
        0.5 * ((b - c) * inv_s - sum_s),
    ])
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub harmonics: usize,
    /// Amplitude of the oscillating part `A sin(2πt/p)` of `w`.
    pub amplitude: f64,
    pub continuation_steps: usize,
    pub max_newton: usize,
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            harmonics: HARMONICS,
            amplitude: 0.2,
            continuation_steps: 4,
            max_newton: 50,
            tol: 1e-13,
        }
    }
}

fn w_series(p: f64, mean: f64, amplitude: f64) -> TrigSeries {
    TrigSeries {
        period: p,
        constant: mean,
        cos: vec![0.0],
        sin: vec![amplitude],
    }
}

/// A nonconstant septuple with `spec = target`, with default options.
pub fn solve_septuple(target: &SpectralTriple, p: f64) -> Result<Septuple> {
    solve_septuple_with(target, p, &SolveOptions::default())
}

pub fn solve_septuple_with(
    target: &SpectralTriple,
    p: f64,
    opts: &SolveOptions,
) -> Result<Septuple> {
    let m = target.membership();
    if !m.inside {
        return Err(Error::invalid(format!(
            "target {:?} is outside the admissible region (margins {:?})",
            target.as_array(),
            m.margins
        )));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid(format!("period {p} must be positive")));
    }
    let goal = target.integrals();
    // constant solution: α, β, γ = I/p, f = mean of squares
    let [al, be, ga] = goal.map(|i| i / p);
    let f0 = (al * al + be * be + ga * ga) / 3.0;
    let mut x = [((be - ga) / (al - be)).ln(), al * al - f0, be * be - f0];
    let residual = |x: &[f64; 3], amp: f64| -> Option<[f64; 3]> {
        let w = w_series(p, x[0], amp);
        let got = integrals(&w, x[1], x[2])?;
        Some([got[0] - goal[0], got[1] - goal[1], got[2] - goal[2]])
    };
    let norm = |r: &[f64; 3]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let steps = opts.continuation_steps.max(1);
    for step in 1..=steps {
        let amp = opts.amplitude * step as f64 / steps as f64;
        let mut r = residual(&x, amp).ok_or_else(|| {
            Error::SolverFailure(format!("positivity lost entering continuation step {step}"))
        })?;
        let mut iters = 0;
        while norm(&r) > opts.tol {
            iters += 1;
            if iters > opts.max_newton {
                return Err(Error::SolverFailure(format!(
                    "Newton did not converge at amplitude {amp}: residual {:.3e}, unknowns {x:?}",
                    norm(&r)
                )));
            }
            let mut jac = nalgebra::Matrix3::<f64>::zeros();
            for col in 0..3 {
                let h = 1e-7 * x[col].abs().max(1.0);
                let mut xp = x;
                let mut xm = x;
                xp[col] += h;
                xm[col] -= h;
                let (rp, rm) = match (residual(&xp, amp), residual(&xm, amp)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(Error::SolverFailure(format!(
                            "positivity lost while differencing at {x:?}"
                        )))
                    }
                };
                for row in 0..3 {
                    jac[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
                }
            }
            let dx = jac
                .lu()
                .solve(&nalgebra::Vector3::new(-r[0], -r[1], -r[2]))
                .ok_or_else(|| Error::SolverFailure(format!("singular Jacobian at {x:?}")))?;
            let mut t = 1.0;
            loop {
                let trial = [x[0] + t * dx[0], x[1] + t * dx[1], x[2] + t * dx[2]];
                match residual(&trial, amp) {
                    Some(rt) if norm(&rt) < norm(&r) || t < 1e-3 && norm(&rt) <= norm(&r) => {
                        x = trial;
                        r = rt;
                        break;
                    }
                    _ if t < 1e-6 => {
                        return Err(Error::SolverFailure(format!(
                            "line search stalled at amplitude {amp}: residual {:.3e}",
                            norm(&r)
                        )))
                    }
                    _ => t *= 0.5,
                }
            }
            // a near-converged step may not decrease the max-norm further
            if iters > 3 && norm(&r) < 1e3 * opts.tol {
                break;
            }
        }
        log::debug!("continuation step {step}: amplitude {amp}, {iters} Newton steps");
    }
    let w = w_series(p, x[0], opts.amplitude);
    // more harmonics until the truncated series satisfy the equations
    let mut harmonics = opts.harmonics.max(1);
    let (s, chk) = loop {
        let rs = rho_sigma(&w, x[1], x[2], harmonics)?;
        let s = septuple_from_rho_sigma(&rs, x[1], x[2], harmonics)?;
        let chk = check_septuple(&s, 2 * GRID);
        if chk.max_riccati() < TRUNCATION_TARGET || 2 * harmonics > GRID / 4 {
            break (s, chk);
        }
        harmonics *= 2;
    };
    if !(s.b < s.a && s.b < s.c) {
        return Err(Error::SolverFailure(format!(
            "solution has a = {}, b = {}, c = {}; b is not the smallest",
            s.a, s.b, s.c
        )));
    }
    if !(chk.f_variation > 1e-6) {
        return Err(Error::SolverFailure("solution has constant f".into()));
    }
    Ok(s)
}

/// Septuple with constant `α, β, γ` (in the constant subfamily).
pub fn constant_septuple(alpha: f64, beta: f64, gamma: f64, p: f64) -> Septuple {
    let f = (alpha * alpha + beta * beta + gamma * gamma) / 3.0;
    Septuple {
        alpha: TrigSeries::constant(p, alpha),
        beta: TrigSeries::constant(p, beta),
        gamma: TrigSeries::constant(p, gamma),
        f: TrigSeries::constant(p, f),
        a: alpha * alpha - f,
        b: beta * beta - f,
        c: gamma * gamma - f,
        p,
    }
}

impl Septuple {
    /// All four functions shifted in time by `t0`.
    pub fn shifted(&self, t0: f64) -> Self {
        Self {
            alpha: self.alpha.shifted(t0),
            beta: self.beta.shifted(t0),
            gamma: self.gamma.shifted(t0),
            f: self.f.shifted(t0),
            ..self.clone()
        }
    }
}
