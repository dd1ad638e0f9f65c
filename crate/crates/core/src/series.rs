//! Truncated trigonometric series `c + Σ_k a_k cos(kωt) + b_k sin(kωt)`, `ω = 2π/p`.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigSeries {
    pub period: f64,
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TrigSeries {
    pub fn constant(period: f64, value: f64) -> Self {
        Self {
            period,
            constant: value,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    pub fn harmonics(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    pub fn eval_generic<S: Scalar>(&self, t: S) -> S {
        let w = S::lit(self.omega());
        let mut acc = S::lit(self.constant);
        for (k, c) in self.cos.iter().enumerate() {
            if *c != 0.0 {
                acc += S::lit(*c) * (w * S::lit((k + 1) as f64) * t).cos();
            }
        }
        for (k, s) in self.sin.iter().enumerate() {
            if *s != 0.0 {
                acc += S::lit(*s) * (w * S::lit((k + 1) as f64) * t).sin();
            }
        }
        acc
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_generic(t)
    }

    /// Termwise derivative (exact for the truncated series).
    pub fn derivative(&self) -> Self {
        let w = self.omega();
        let h = self.harmonics();
        let mut cos = vec![0.0; h];
        let mut sin = vec![0.0; h];
        for k in 0..h {
            let kw = (k + 1) as f64 * w;
            let a = self.cos.get(k).copied().unwrap_or(0.0);
            let b = self.sin.get(k).copied().unwrap_or(0.0);
            cos[k] = kw * b;
            sin[k] = -kw * a;
        }
        Self {
            period: self.period,
            constant: 0.0,
            cos,
            sin,
        }
    }

    /// Mean value over one period.
    pub fn mean(&self) -> f64 {
        self.constant
    }

    /// Equispaced sample times `t_i = i·p/N`.
    pub fn grid(period: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * period / n as f64).collect()
    }

    pub fn sample(&self, n: usize) -> Vec<f64> {
        Self::grid(self.period, n)
            .into_iter()
            .map(|t| self.eval(t))
            .collect()
    }

    /// Discrete Fourier projection of equispaced samples onto `harmonics` modes.
    /// Exact for band-limited data with fewer than `N/2` harmonics.
    pub fn fit(period: f64, samples: &[f64], harmonics: usize) -> Self {
        let n = samples.len();
        let harmonics = harmonics.min((n - 1) / 2);
        let constant = samples.iter().sum::<f64>() / n as f64;
        let mut cos = vec![0.0; harmonics];
        let mut sin = vec![0.0; harmonics];
        for k in 0..harmonics {
            let (mut a, mut b) = (0.0, 0.0);
            for (i, y) in samples.iter().enumerate() {
                let ang = 2.0 * std::f64::consts::PI * ((k + 1) * i % n) as f64 / n as f64;
                a += y * ang.cos();
                b += y * ang.sin();
            }
            cos[k] = 2.0 * a / n as f64;
            sin[k] = 2.0 * b / n as f64;
        }
        Self {
            period,
            constant,
            cos,
            sin,
        }
    }

    /// Spectral derivative of equispaced samples of a periodic function.
    pub fn spectral_derivative(period: f64, samples: &[f64]) -> Vec<f64> {
        let n = samples.len();
        let s = Self::fit(period, samples, (n - 1) / 2).derivative();
        Self::grid(period, n)
            .into_iter()
            .map(|t| s.eval(t))
            .collect()
    }

    /// Trapezoid quadrature of `∫₀ᵖ` on `n` points together with the
    /// difference to the `n/2`-point rule as an error estimate.
    pub fn integral_with_error(&self, n: usize) -> (f64, f64) {
        let q = |m: usize| self.sample(m).iter().sum::<f64>() * self.period / m as f64;
        let fine = q(n);
        let coarse = q((n / 2).max(1));
        (fine, (fine - coarse).abs())
    }

    pub fn min_max(&self, n: usize) -> (f64, f64) {
        self.sample(n)
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// The same function shifted in time: `t ↦ self(t + t0)`.
    pub fn shifted(&self, t0: f64) -> Self {
        let w = self.omega();
        let h = self.harmonics();
        let mut cos = vec![0.0; h];
        let mut sin = vec![0.0; h];
        for k in 0..h {
            let (s, c) = ((k + 1) as f64 * w * t0).sin_cos();
            let a = self.cos.get(k).copied().unwrap_or(0.0);
            let b = self.sin.get(k).copied().unwrap_or(0.0);
            cos[k] = a * c + b * s;
            sin[k] = b * c - a * s;
        }
        Self {
            period: self.period,
            constant: self.constant,
            cos,
            sin,
        }
    }
}
