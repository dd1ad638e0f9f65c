use crate::dual::{seed3, split3, Dual};
use crate::linalg::{ix3, ix4, ix5};
use crate::scalar::Scalar;

use super::{DerivativeMode, MetricField, ToleranceProfile};

/// Metric components and their partial derivatives at one point.
///
/// Layouts: `g[a,b]`, `dg[m,a,b] = ∂_m g_ab`, `ddg[m,p,a,b]`,
/// `dddg[m,p,q,a,b]` (differentiation indices first).
#[derive(Clone, Debug)]
pub struct MetricJet<S> {
    pub n: usize,
    pub g: Vec<S>,
    pub dg: Vec<S>,
    pub ddg: Vec<S>,
    pub dddg: Option<Vec<S>>,
}

impl<S: Scalar> MetricJet<S> {
    /// The jet of the directional derivative along `∂_p`, packaged as dual
    /// numbers: value parts are this jet, tangent parts its `∂_p` derivative.
    /// Requires third derivatives.
    pub fn directional(&self, p: usize) -> MetricJet<Dual<S>> {
        let n = self.n;
        let dddg = self
            .dddg
            .as_ref()
            .expect("directional jet needs third derivatives");
        let g = (0..n * n)
            .map(|ab| Dual::new(self.g[ab], self.dg[p * n * n + ab]))
            .collect();
        let dg = (0..n * n * n)
            .map(|mab| Dual::new(self.dg[mab], self.ddg[p * n * n * n + mab]))
            .collect();
        let ddg = (0..n * n * n * n)
            .map(|mqab| Dual::new(self.ddg[mqab], dddg[p * n * n * n * n + mqab]))
            .collect();
        MetricJet {
            n,
            g,
            dg,
            ddg,
            dddg: None,
        }
    }
}

/// Exact derivatives up to `order` (1, 2 or 3) via nested dual numbers.
/// Orders not computed are left as zeros.
pub fn exact_jet<M: MetricField, S: Scalar>(field: &M, x: &[S], order: usize) -> MetricJet<S> {
    let n = field.dim();
    let nn = n * n;
    let g = field.eval(x);
    let mut dg = vec![S::zero(); n * nn];
    let mut ddg = vec![S::zero(); n * n * nn];
    if order <= 1 {
        for i in 0..n {
            let xs: Vec<Dual<S>> = x
                .iter()
                .enumerate()
                .map(|(a, &v)| {
                    if a == i {
                        Dual::variable(v)
                    } else {
                        Dual::constant(v)
                    }
                })
                .collect();
            for (ab, o) in field.eval(&xs).into_iter().enumerate() {
                dg[i * nn + ab] = o.eps;
            }
        }
        return MetricJet {
            n,
            g,
            dg,
            ddg,
            dddg: None,
        };
    }
    if order == 2 {
        for i in 0..n {
            for j in i..n {
                let xs: Vec<Dual<Dual<S>>> = x
                    .iter()
                    .enumerate()
                    .map(|(a, &v)| {
                        let di = if a == i { S::one() } else { S::zero() };
                        let dj = if a == j { S::one() } else { S::zero() };
                        Dual::new(Dual::new(v, dj), Dual::constant(di))
                    })
                    .collect();
                let out = field.eval(&xs);
                for ab in 0..nn {
                    let o = out[ab];
                    dg[i * nn + ab] = o.eps.re;
                    dg[j * nn + ab] = o.re.eps;
                    ddg[ix3(n, i, j, 0) * n + ab] = o.eps.eps;
                    ddg[ix3(n, j, i, 0) * n + ab] = o.eps.eps;
                }
            }
        }
        return MetricJet {
            n,
            g,
            dg,
            ddg,
            dddg: None,
        };
    }
    let mut dddg = vec![S::zero(); n * n * n * nn];
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let xs: Vec<_> = x
                    .iter()
                    .enumerate()
                    .map(|(a, &v)| seed3(v, a, i, j, k))
                    .collect();
                let out = field.eval(&xs);
                for ab in 0..nn {
                    let p = split3(out[ab]);
                    dg[i * nn + ab] = p.di;
                    dg[j * nn + ab] = p.dj;
                    dg[k * nn + ab] = p.dk;
                    for (u, v, val) in [(i, j, p.dij), (i, k, p.dik), (j, k, p.djk)] {
                        ddg[(u * n + v) * nn + ab] = val;
                        ddg[(v * n + u) * nn + ab] = val;
                    }
                    for (u, v, w) in [
                        (i, j, k),
                        (i, k, j),
                        (j, i, k),
                        (j, k, i),
                        (k, i, j),
                        (k, j, i),
                    ] {
                        dddg[ix3(n, u, v, w) * nn + ab] = p.dijk;
                    }
                }
            }
        }
    }
    MetricJet {
        n,
        g,
        dg,
        ddg,
        dddg: Some(dddg),
    }
}

fn shifted<S: Scalar>(x: &[S], moves: &[(usize, f64)]) -> Vec<S> {
    let mut y = x.to_vec();
    for &(a, h) in moves {
        y[a] += S::lit(h);
    }
    y
}

fn first_fd<M: MetricField, S: Scalar>(field: &M, x: &[S], m: usize, h: f64) -> Vec<S> {
    let p = field.eval(&shifted(x, &[(m, h)]));
    let q = field.eval(&shifted(x, &[(m, -h)]));
    p.into_iter()
        .zip(q)
        .map(|(a, b)| (a - b) / S::lit(2.0 * h))
        .collect()
}

fn second_fd<M: MetricField, S: Scalar>(
    field: &M,
    x: &[S],
    m: usize,
    p: usize,
    hm: f64,
    hp: f64,
) -> Vec<S> {
    if m == p {
        let a = field.eval(&shifted(x, &[(m, hm)]));
        let b = field.eval(x);
        let c = field.eval(&shifted(x, &[(m, -hm)]));
        return (0..a.len())
            .map(|i| (a[i] - S::lit(2.0) * b[i] + c[i]) / S::lit(hm * hm))
            .collect();
    }
    let pp = field.eval(&shifted(x, &[(m, hm), (p, hp)]));
    let pm = field.eval(&shifted(x, &[(m, hm), (p, -hp)]));
    let mp = field.eval(&shifted(x, &[(m, -hm), (p, hp)]));
    let mm = field.eval(&shifted(x, &[(m, -hm), (p, -hp)]));
    (0..pp.len())
        .map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / S::lit(4.0 * hm * hp))
        .collect()
}

fn third_fd<M: MetricField, S: Scalar>(
    field: &M,
    x: &[S],
    m: usize,
    p: usize,
    q: usize,
    h: [f64; 3],
) -> Vec<S> {
    let a = second_fd(field, &shifted(x, &[(q, h[2])]), m, p, h[0], h[1]);
    let b = second_fd(field, &shifted(x, &[(q, -h[2])]), m, p, h[0], h[1]);
    a.into_iter()
        .zip(b)
        .map(|(u, v)| (u - v) / S::lit(2.0 * h[2]))
        .collect()
}

fn richardson<S: Scalar>(coarse: Vec<S>, fine: Vec<S>) -> Vec<S> {
    coarse
        .into_iter()
        .zip(fine)
        .map(|(c, f)| (S::lit(4.0) * f - c) / S::lit(3.0))
        .collect()
}

/// Central-difference jet. Orders 1, 2, 3 use steps `h`, `10h`, `100h`
/// (per coordinate `h = prof.step(axis)`), optionally Richardson-extrapolated.
pub fn central_difference_jet<M: MetricField, S: Scalar>(
    field: &M,
    x: &[S],
    prof: &ToleranceProfile,
    order: usize,
    richardson_on: bool,
) -> MetricJet<S> {
    let n = field.dim();
    let nn = n * n;
    let g = field.eval(x);
    let h = |a: usize, scale: f64| prof.step(a) * scale;
    let extrap = |f: &dyn Fn(f64) -> Vec<S>| -> Vec<S> {
        if richardson_on {
            richardson(f(1.0), f(0.5))
        } else {
            f(1.0)
        }
    };
    let mut dg = vec![S::zero(); n * nn];
    for m in 0..n {
        let d = extrap(&|s| first_fd(field, x, m, h(m, s)));
        dg[m * nn..(m + 1) * nn].copy_from_slice(&d);
    }
    let mut ddg = vec![S::zero(); n * n * nn];
    for m in (0..n).filter(|_| order >= 2) {
        for p in m..n {
            let d = extrap(&|s| second_fd(field, x, m, p, h(m, 10.0 * s), h(p, 10.0 * s)));
            ddg[(m * n + p) * nn..(m * n + p + 1) * nn].copy_from_slice(&d);
            ddg[(p * n + m) * nn..(p * n + m + 1) * nn].copy_from_slice(&d);
        }
    }
    let dddg = (order >= 3).then(|| {
        let mut out = vec![S::zero(); n * n * n * nn];
        for m in 0..n {
            for p in m..n {
                for q in p..n {
                    let d = extrap(&|s| {
                        third_fd(
                            field,
                            x,
                            m,
                            p,
                            q,
                            [h(m, 100.0 * s), h(p, 100.0 * s), h(q, 100.0 * s)],
                        )
                    });
                    for (u, v, w) in [
                        (m, p, q),
                        (m, q, p),
                        (p, m, q),
                        (p, q, m),
                        (q, m, p),
                        (q, p, m),
                    ] {
                        let base = ix4(n, u, v, w, 0) * n;
                        debug_assert_eq!(base, ix5(n, u, v, w, 0, 0));
                        out[base..base + nn].copy_from_slice(&d);
                    }
                }
            }
        }
        out
    });
    MetricJet {
        n,
        g,
        dg,
        ddg,
        dddg,
    }
}

/// Jet according to the profile's [`DerivativeMode`].
pub fn metric_jet<M: MetricField, S: Scalar>(
    field: &M,
    x: &[S],
    prof: &ToleranceProfile,
    order: usize,
) -> MetricJet<S> {
    match prof.mode {
        DerivativeMode::Exact => exact_jet(field, x, order),
        DerivativeMode::CentralDifference { richardson } => {
            central_difference_jet(field, x, prof, order, richardson)
        }
    }
}
