use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::linalg::{invert, ix2, ix3, ix4};
use crate::scalar::Scalar;

use super::jet::{central_difference_jet, exact_jet, metric_jet, MetricJet};
use super::{check_metric_at, ChartPoint, DerivativeMode, MetricField, ToleranceProfile};

/// Levi-Civita connection at one point.
#[derive(Clone, Debug)]
pub struct Christoffel {
    /// `Γ^k_ij` at `ix3(n, k, i, j)`.
    pub gamma: Vec<f64>,
    /// `max |∇_m g_ij|` with `∂g` from Richardson-extrapolated central differences.
    pub compatibility_residual: f64,
    pub condition: f64,
}

/// Pointwise curvature (no covariant derivatives).
#[derive(Clone, Debug)]
pub struct Curvature<S> {
    pub n: usize,
    pub metric: Vec<S>,
    pub inverse_metric: Vec<S>,
    /// `Γ^k_ij` at `ix3(n, k, i, j)`.
    pub gamma: Vec<S>,
    /// `R^k_lij` at `ix4(n, k, l, i, j)`.
    pub riem_up: Vec<S>,
    /// `R_klij`, assembled antisymmetric in `(k, l)`.
    pub riem_down: Vec<S>,
    pub ricci: Vec<S>,
    pub scalar: S,
    pub weyl_down: Vec<S>,
}

/// Every curvature object at one chart point. Covariant derivatives carry
/// the differentiation index first: `nabla_weyl[ix5(n, m, k, l, i, j)] = ∇_m W_klij`.
#[derive(Clone, Debug)]
pub struct CurvaturePack<S> {
    pub point: ChartPoint,
    pub n: usize,
    pub metric: Vec<S>,
    pub inverse_metric: Vec<S>,
    pub gamma: Vec<S>,
    pub riem_up: Vec<S>,
    pub riem_down: Vec<S>,
    pub ricci: Vec<S>,
    pub scalar: S,
    pub weyl_down: Vec<S>,
    pub nabla_weyl: Vec<S>,
    pub nabla_riem: Vec<S>,
    pub nabla_ricci: Vec<S>,
    pub condition: f64,
}

fn gamma_from_jet<S: Scalar>(n: usize, ginv: &[S], dg: &[S]) -> Vec<S> {
    let half = S::lit(0.5);
    let mut first = vec![S::zero(); n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = half * (dg[ix3(n, i, l, j)] + dg[ix3(n, j, l, i)] - dg[ix3(n, l, i, j)]);
                first[ix3(n, l, i, j)] = v;
                first[ix3(n, l, j, i)] = v;
            }
        }
    }
    let mut gamma = vec![S::zero(); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let v: S = (0..n)
                    .map(|l| ginv[ix2(n, k, l)] * first[ix3(n, l, i, j)])
                    .sum();
                gamma[ix3(n, k, i, j)] = v;
                gamma[ix3(n, k, j, i)] = v;
            }
        }
    }
    gamma
}

/// Curvature from a metric jet of order ≥ 2. Generic so that a jet of dual
/// numbers yields directional derivatives of every tensor.
pub fn curvature_from_jet<S: Scalar>(jet: &MetricJet<S>) -> Result<Curvature<S>> {
    let n = jet.n;
    let ginv = invert(&jet.g, n)?;
    let gamma = gamma_from_jet(n, &ginv, &jet.dg);
    let half = S::lit(0.5);

    // ∂_m Γ^k_ij = g^{kl}(∂_m Γ_lij − ∂_m g_la Γ^a_ij)
    let mut dgamma = vec![S::zero(); n * n * n * n];
    let mut tmp = vec![S::zero(); n];
    for m in 0..n {
        for i in 0..n {
            for j in i..n {
                for (l, t) in tmp.iter_mut().enumerate() {
                    let d_first = half
                        * (jet.ddg[ix4(n, m, i, l, j)] + jet.ddg[ix4(n, m, j, l, i)]
                            - jet.ddg[ix4(n, m, l, i, j)]);
                    let corr: S = (0..n)
                        .map(|a| jet.dg[ix3(n, m, l, a)] * gamma[ix3(n, a, i, j)])
                        .sum();
                    *t = d_first - corr;
                }
                for k in 0..n {
                    let v: S = (0..n).map(|l| ginv[ix2(n, k, l)] * tmp[l]).sum();
                    dgamma[ix4(n, m, k, i, j)] = v;
                    dgamma[ix4(n, m, k, j, i)] = v;
                }
            }
        }
    }

    let mut riem_up = vec![S::zero(); n * n * n * n];
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut v = dgamma[ix4(n, i, k, j, l)] - dgamma[ix4(n, j, k, i, l)];
                    for m in 0..n {
                        v += gamma[ix3(n, k, i, m)] * gamma[ix3(n, m, j, l)]
                            - gamma[ix3(n, k, j, m)] * gamma[ix3(n, m, i, l)];
                    }
                    riem_up[ix4(n, k, l, i, j)] = v;
                    riem_up[ix4(n, k, l, j, i)] = -v;
                }
            }
        }
    }

    let mut lowered = vec![S::zero(); n * n * n * n];
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    lowered[ix4(n, k, l, i, j)] = (0..n)
                        .map(|a| jet.g[ix2(n, k, a)] * riem_up[ix4(n, a, l, i, j)])
                        .sum();
                }
            }
        }
    }
    let mut riem_down = vec![S::zero(); n * n * n * n];
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    riem_down[ix4(n, k, l, i, j)] =
                        half * (lowered[ix4(n, k, l, i, j)] - lowered[ix4(n, l, k, i, j)]);
                }
            }
        }
    }

    let mut ricci = vec![S::zero(); n * n];
    for l in 0..n {
        for j in 0..n {
            ricci[ix2(n, l, j)] = (0..n).map(|i| riem_up[ix4(n, i, l, i, j)]).sum();
        }
    }
    for l in 0..n {
        for j in (l + 1)..n {
            let v = half * (ricci[ix2(n, l, j)] + ricci[ix2(n, j, l)]);
            ricci[ix2(n, l, j)] = v;
            ricci[ix2(n, j, l)] = v;
        }
    }
    let scalar: S = (0..n * n).map(|lj| ginv[lj] * ricci[lj]).sum();

    let weyl_down = weyl(n, &jet.g, &riem_down, &ricci, scalar)?;
    Ok(Curvature {
        n,
        metric: jet.g.clone(),
        inverse_metric: ginv,
        gamma,
        riem_up,
        riem_down,
        ricci,
        scalar,
        weyl_down,
    })
}

fn weyl<S: Scalar>(n: usize, g: &[S], riem: &[S], ricci: &[S], s: S) -> Result<Vec<S>> {
    if n < 3 {
        return Err(Error::Unsupported(format!(
            "Weyl tensor needs dimension ≥ 3, got {n}"
        )));
    }
    let c1 = S::lit(1.0 / (n as f64 - 2.0));
    let c2 = s * S::lit(1.0 / ((n as f64 - 1.0) * (n as f64 - 2.0)));
    let mut w = vec![S::zero(); n * n * n * n];
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let gg = |a, b| g[ix2(n, a, b)];
                    let rr = |a, b| ricci[ix2(n, a, b)];
                    let kn = rr(k, i) * gg(l, j) - rr(k, j) * gg(l, i) + rr(l, j) * gg(k, i)
                        - rr(l, i) * gg(k, j);
                    let sg = gg(k, i) * gg(l, j) - gg(k, j) * gg(l, i);
                    w[ix4(n, k, l, i, j)] = riem[ix4(n, k, l, i, j)] - c1 * kn + c2 * sg;
                }
            }
        }
    }
    Ok(w)
}

fn decode(mut idx: usize, n: usize, rank: usize, out: &mut [usize]) {
    for slot in (0..rank).rev() {
        out[slot] = idx % n;
        idx /= n;
    }
}

/// `∇_p T` for a covariant tensor of the given rank, from the partial
/// derivatives `dt[p, …]` and the connection.
fn covariant<S: Scalar>(n: usize, rank: usize, t: &[S], dt: &[S], gamma: &[S]) -> Vec<S> {
    let size = n.pow(rank as u32);
    let mut out = dt.to_vec();
    let mut digits = vec![0usize; rank];
    let stride: Vec<usize> = (0..rank).map(|s| n.pow((rank - 1 - s) as u32)).collect();
    for p in 0..n {
        for idx in 0..size {
            decode(idx, n, rank, &mut digits);
            let mut acc = S::zero();
            for slot in 0..rank {
                let a = digits[slot];
                let base = idx - a * stride[slot];
                for m in 0..n {
                    acc += gamma[ix3(n, m, p, a)] * t[base + m * stride[slot]];
                }
            }
            out[p * size + idx] -= acc;
        }
    }
    out
}

fn tangent<S: Scalar>(v: &[Dual<S>]) -> Vec<S> {
    v.iter().map(|d| d.eps).collect()
}

/// Partial derivatives `∂_p` of (Riemann, Ricci, Weyl) stacked with `p` first.
type Partials<S> = (Vec<S>, Vec<S>, Vec<S>);

fn exact_partials<S: Scalar>(jet: &MetricJet<S>) -> Result<Partials<S>> {
    let n = jet.n;
    let (mut dr, mut dric, mut dw) = (Vec::new(), Vec::new(), Vec::new());
    for p in 0..n {
        let c = curvature_from_jet(&jet.directional(p))?;
        dr.extend(tangent(&c.riem_down));
        dric.extend(tangent(&c.ricci));
        dw.extend(tangent(&c.weyl_down));
    }
    Ok((dr, dric, dw))
}

fn differenced_partials<M: MetricField, S: Scalar>(
    field: &M,
    x: &[S],
    prof: &ToleranceProfile,
    richardson: bool,
) -> Result<Partials<S>> {
    let n = field.dim();
    let (mut dr, mut dric, mut dw) = (Vec::new(), Vec::new(), Vec::new());
    let at = |p: usize, h: f64| -> Result<Curvature<S>> {
        let mut y = x.to_vec();
        y[p] += S::lit(h);
        curvature_from_jet(&central_difference_jet(field, &y, prof, 2, richardson))
    };
    let diff = |p: usize, h: f64| -> Result<Partials<S>> {
        let (a, b) = (at(p, h)?, at(p, -h)?);
        let d = |u: &[S], v: &[S]| -> Vec<S> {
            u.iter()
                .zip(v)
                .map(|(&s, &t)| (s - t) / S::lit(2.0 * h))
                .collect()
        };
        Ok((
            d(&a.riem_down, &b.riem_down),
            d(&a.ricci, &b.ricci),
            d(&a.weyl_down, &b.weyl_down),
        ))
    };
    for p in 0..n {
        let h = 100.0 * prof.step(p);
        let (r, ric, w) = if richardson {
            let (r1, c1, w1) = diff(p, h)?;
            let (r2, c2, w2) = diff(p, h / 2.0)?;
            let ex = |a: Vec<S>, b: Vec<S>| -> Vec<S> {
                a.into_iter()
                    .zip(b)
                    .map(|(c, f)| (S::lit(4.0) * f - c) / S::lit(3.0))
                    .collect()
            };
            (ex(r1, r2), ex(c1, c2), ex(w1, w2))
        } else {
            diff(p, h)?
        };
        dr.extend(r);
        dric.extend(ric);
        dw.extend(w);
    }
    Ok((dr, dric, dw))
}

/// Full [`CurvaturePack`] at `x`. The metric is checked first (dimension,
/// symmetry, condition number, signature).
pub fn curvature_pack<M: MetricField, S: Scalar>(
    field: &M,
    x: &ChartPoint,
    prof: &ToleranceProfile,
) -> Result<CurvaturePack<S>> {
    let check = check_metric_at(field, x)?;
    let n = field.dim();
    let xs: Vec<S> = x.lift();
    let (c, (dr, dric, dw)) = match prof.mode {
        DerivativeMode::Exact => {
            let jet = metric_jet(field, &xs, prof, 3);
            (curvature_from_jet(&jet)?, exact_partials(&jet)?)
        }
        DerivativeMode::CentralDifference { richardson } => {
            let jet = metric_jet(field, &xs, prof, 2);
            (
                curvature_from_jet(&jet)?,
                differenced_partials(field, &xs, prof, richardson)?,
            )
        }
    };
    let nabla_riem = covariant(n, 4, &c.riem_down, &dr, &c.gamma);
    let nabla_ricci = covariant(n, 2, &c.ricci, &dric, &c.gamma);
    let nabla_weyl = covariant(n, 4, &c.weyl_down, &dw, &c.gamma);
    let pack = CurvaturePack {
        point: x.clone(),
        n,
        metric: c.metric,
        inverse_metric: c.inverse_metric,
        gamma: c.gamma,
        riem_up: c.riem_up,
        riem_down: c.riem_down,
        ricci: c.ricci,
        scalar: c.scalar,
        weyl_down: c.weyl_down,
        nabla_weyl,
        nabla_riem,
        nabla_ricci,
        condition: check.condition,
    };
    if pack
        .riem_down
        .iter()
        .chain(&pack.nabla_weyl)
        .any(|v| !v.re().is_finite())
    {
        return Err(Error::Domain(format!(
            "non-finite curvature at {:?}",
            x.coords
        )));
    }
    Ok(pack)
}

/// `Γ^k_ij` at an arbitrary coordinate tuple (exact first derivatives, no
/// metric sanity checks). Used along curves, e.g. for parallel transport.
pub fn gamma_at<M: MetricField>(field: &M, x: &[f64]) -> Result<Vec<f64>> {
    let n = field.dim();
    let jet = exact_jet::<M, f64>(field, x, 1);
    let ginv = invert(&jet.g, n)?;
    Ok(gamma_from_jet(n, &ginv, &jet.dg))
}

/// Christoffel symbols at `x` with the metric-compatibility residual.
pub fn christoffel<M: MetricField>(
    field: &M,
    x: &ChartPoint,
    prof: &ToleranceProfile,
) -> Result<Christoffel> {
    let check = check_metric_at(field, x)?;
    let n = field.dim();
    let jet = metric_jet::<M, f64>(field, &x.coords, prof, 1);
    let ginv = invert(&jet.g, n)?;
    let gamma = gamma_from_jet(n, &ginv, &jet.dg);
    let compatibility_residual = metric_compatibility_residual(field, x, prof, &gamma);
    Ok(Christoffel {
        gamma,
        compatibility_residual,
        condition: check.condition,
    })
}

/// `max |∂_m g_ij − Γ^a_mi g_aj − Γ^a_mj g_ia|`, with `∂g` from
/// Richardson-extrapolated central differences at the profile step.
pub fn metric_compatibility_residual<M: MetricField>(
    field: &M,
    x: &ChartPoint,
    prof: &ToleranceProfile,
    gamma: &[f64],
) -> f64 {
    let n = field.dim();
    let jet = central_difference_jet::<M, f64>(field, &x.coords, prof, 1, true);
    let g = &jet.g;
    let mut worst = 0.0f64;
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = jet.dg[ix3(n, m, i, j)];
                for a in 0..n {
                    v -= gamma[ix3(n, a, m, i)] * g[ix2(n, a, j)]
                        + gamma[ix3(n, a, m, j)] * g[ix2(n, i, a)];
                }
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// `max |R_klij + R_kijl + R_kjli|`.
pub fn first_bianchi_residual<S: Scalar>(pack: &CurvaturePack<S>) -> f64 {
    let n = pack.n;
    let r = &pack.riem_down;
    let mut worst = 0.0f64;
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let v = r[ix4(n, k, l, i, j)] + r[ix4(n, k, i, j, l)] + r[ix4(n, k, j, l, i)];
                    worst = worst.max(v.re().abs());
                }
            }
        }
    }
    worst
}

/// Largest component of any single metric trace of `W_klij`.
pub fn weyl_trace_residual<S: Scalar>(pack: &CurvaturePack<S>) -> f64 {
    let n = pack.n;
    let w = &pack.weyl_down;
    let gi = &pack.inverse_metric;
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut worst = 0.0f64;
    let mut idx = [0usize; 4];
    for &(s1, s2) in &pairs {
        for u in 0..n {
            for v in 0..n {
                let mut acc = S::zero();
                for a in 0..n {
                    for b in 0..n {
                        let mut rest = [u, v].into_iter();
                        for (slot, x) in idx.iter_mut().enumerate() {
                            *x = if slot == s1 {
                                a
                            } else if slot == s2 {
                                b
                            } else {
                                rest.next().unwrap()
                            };
                        }
                        acc += gi[ix2(n, a, b)] * w[ix4(n, idx[0], idx[1], idx[2], idx[3])];
                    }
                }
                worst = worst.max(acc.re().abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chartcalc::fixtures::{FlatMetric, ScaledMetric, WarpedMetric};
    use crate::linalg::max_abs;

    fn prof() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    #[test]
    fn flat_metric_has_no_curvature() {
        let f = FlatMetric::new(&[1.0, -1.0, 1.0, -1.0]);
        let x = ChartPoint::new(vec![0.3, -0.2, 0.1, 0.5]);
        let p: CurvaturePack<f64> = curvature_pack(&f, &x, &prof()).unwrap();
        assert!(max_abs(&p.gamma) == 0.0);
        assert!(max_abs(&p.riem_down) < 1e-10);
        assert!(max_abs(&p.weyl_down) < 1e-10);
        assert!(p.scalar.abs() < 1e-10);
    }

    #[test]
    fn warped_metric_curvature_identities() {
        let f = WarpedMetric::new(4);
        let x = ChartPoint::new(vec![0.2, 0.7, -0.4, 0.1]);
        let p: CurvaturePack<f64> = curvature_pack(&f, &x, &prof()).unwrap();
        assert!(first_bianchi_residual(&p) < 1e-12);
        assert!(weyl_trace_residual(&p) < 1e-12);
        let n = 4;
        for k in 0..n {
            for l in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let r = &p.riem_down;
                        assert_eq!(r[ix4(n, k, l, i, j)], -r[ix4(n, l, k, i, j)]);
                        assert!((r[ix4(n, k, l, i, j)] - r[ix4(n, i, j, k, l)]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn two_sphere_like_block_has_known_gauss_curvature() {
        // g = dx² + cosh²(x) dy² has Gauss curvature K = −1, so R_0101 = −g_00 g_11.
        struct H;
        impl MetricField for H {
            fn dim(&self) -> usize {
                4
            }
            fn signature(&self) -> super::super::Signature {
                super::super::Signature::new(4, 0)
            }
            fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
                let c = x[0].cosh();
                let mut g = vec![S::zero(); 16];
                g[0] = S::one();
                g[5] = c * c;
                g[10] = S::one();
                g[15] = S::one();
                g
            }
        }
        let x = ChartPoint::new(vec![0.4, 0.0, 0.0, 0.0]);
        let p: CurvaturePack<f64> = curvature_pack(&H, &x, &prof()).unwrap();
        let c2 = 0.4f64.cosh().powi(2);
        assert!((p.riem_down[ix4(4, 0, 1, 0, 1)] + c2).abs() < 1e-12);
        assert!((p.scalar + 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_and_differenced_nabla_agree() {
        let f = WarpedMetric::new(4);
        let x = ChartPoint::new(vec![0.2, 0.7, -0.4, 0.1]);
        let exact: CurvaturePack<f64> = curvature_pack(&f, &x, &prof()).unwrap();
        let fd_prof = ToleranceProfile {
            mode: DerivativeMode::CentralDifference { richardson: true },
            ..prof()
        };
        let fd: CurvaturePack<f64> = curvature_pack(&f, &x, &fd_prof).unwrap();
        let diff = exact
            .nabla_riem
            .iter()
            .zip(&fd.nabla_riem)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-5, "{diff}");
    }

    #[test]
    fn christoffel_is_scale_invariant_and_compatible() {
        let f = WarpedMetric::new(5);
        let x = ChartPoint::new(vec![0.1, -0.3, 0.2, 0.0, 0.4]);
        let a = christoffel(&f, &x, &prof()).unwrap();
        let b = christoffel(&ScaledMetric::new(f, 3.5), &x, &prof()).unwrap();
        assert!(a.compatibility_residual < 1e-8);
        for (u, v) in a.gamma.iter().zip(&b.gamma) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        struct D;
        impl MetricField for D {
            fn dim(&self) -> usize {
                4
            }
            fn signature(&self) -> super::super::Signature {
                super::super::Signature::new(4, 0)
            }
            fn eval<S: Scalar>(&self, _x: &[S]) -> Vec<S> {
                let mut g = vec![S::zero(); 16];
                g[0] = S::one();
                g[5] = S::one();
                g[10] = S::one();
                g
            }
        }
        let x = ChartPoint::new(vec![0.0; 4]);
        assert!(matches!(
            christoffel(&D, &x, &prof()),
            Err(Error::DegenerateMetric { .. })
        ));
    }
}
