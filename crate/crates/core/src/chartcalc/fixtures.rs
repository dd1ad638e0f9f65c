//! Small reference metrics used by self-checks and tests.

use crate::scalar::Scalar;

use super::{MetricField, Signature};

/// Constant diagonal metric `diag(signs)`.
#[derive(Clone, Debug)]
pub struct FlatMetric {
    diag: Vec<f64>,
}

impl FlatMetric {
    pub fn new(diag: &[f64]) -> Self {
        Self {
            diag: diag.to_vec(),
        }
    }
}

impl MetricField for FlatMetric {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn signature(&self) -> Signature {
        Signature::of_diagonal(&self.diag)
    }

    fn eval<S: Scalar>(&self, _x: &[S]) -> Vec<S> {
        let n = self.diag.len();
        let mut g = vec![S::zero(); n * n];
        for (i, d) in self.diag.iter().enumerate() {
            g[i * n + i] = S::lit(*d);
        }
        g
    }
}

/// Euclidean metric with `g_00 = 1 + x_1²`: curved, and not ECS.
#[derive(Clone, Debug)]
pub struct WarpedMetric {
    n: usize,
}

impl WarpedMetric {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        Self { n }
    }
}

impl MetricField for WarpedMetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn signature(&self) -> Signature {
        Signature::new(self.n, 0)
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.n;
        let mut g = vec![S::zero(); n * n];
        for i in 0..n {
            g[i * n + i] = S::one();
        }
        g[0] = S::one() + x[1] * x[1];
        g
    }
}

/// `c·g` for a constant `c > 0`.
#[derive(Clone, Debug)]
pub struct ScaledMetric<M> {
    inner: M,
    factor: f64,
}

impl<M: MetricField> ScaledMetric<M> {
    pub fn new(inner: M, factor: f64) -> Self {
        assert!(factor > 0.0);
        Self { inner, factor }
    }
}

impl<M: MetricField> MetricField for ScaledMetric<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn signature(&self) -> Signature {
        self.inner.signature()
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let c = S::lit(self.factor);
        self.inner.eval(x).into_iter().map(|v| v * c).collect()
    }
}

/// Euclidean metric with `g_ii = 1 + c·x_{i+1}²` (indices cyclic over the
/// first three coordinates) and `g_01 = c·x_2`. Curved in a genuinely
/// three-dimensional way, so neither harmonic nor semisymmetric.
#[derive(Clone, Debug)]
pub struct CoupledMetric {
    n: usize,
    c: f64,
}

impl CoupledMetric {
    pub fn new(n: usize, c: f64) -> Self {
        assert!(n >= 3);
        Self { n, c }
    }
}

impl MetricField for CoupledMetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn signature(&self) -> Signature {
        Signature::new(self.n, 0)
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.n;
        let c = S::lit(self.c);
        let mut g = vec![S::zero(); n * n];
        for i in 0..n {
            g[i * n + i] = S::one();
        }
        for i in 0..3 {
            let y = x[(i + 1) % 3];
            g[i * n + i] += c * y * y;
        }
        g[1] = c * x[2];
        g[n] = c * x[2];
        g
    }
}
