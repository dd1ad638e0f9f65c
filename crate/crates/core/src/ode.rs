//! Adaptive Dormand–Prince 5(4) integrator for `y' = F(t, y)`.
//!
//! Integration may run backwards (`t1 < t0`). [`integrate_checked`] repeats
//! the solve with a tolerance 32× tighter (the step-halving equivalent for a
//! fifth-order method) and reports the discrepancy.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub fn integrate<F>(rhs: F, t0: f64, t1: f64, y0: &[f64], opts: &OdeOptions) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(y);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut t = t0;
    rhs(t, &y, &mut k[0]);

    // initial step from the usual derivative-norm heuristic
    let sc = |v: f64| opts.atol + opts.rtol * v.abs();
    let d0 = (y.iter().map(|v| (v / sc(*v)).powi(2)).sum::<f64>() / dim.max(1) as f64).sqrt();
    let d1 = (y
        .iter()
        .zip(&k[0])
        .map(|(v, f)| (f / sc(*v)).powi(2))
        .sum::<f64>()
        / dim.max(1) as f64)
        .sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h = h.min(span).max(1e-14 * span);

    let mut steps = 0;
    while (t1 - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::Integrator(format!(
                "exceeded {} steps at t = {t}",
                opts.max_steps
            )));
        }
        steps += 1;
        let last = h >= (t1 - t).abs();
        let hs = if last { t1 - t } else { h * dir };

        for s in 1..7 {
            let (done, rest) = k.split_at_mut(s);
            for i in 0..dim {
                let mut acc = 0.0;
                for (r, kr) in done.iter().enumerate() {
                    acc += A[s][r] * kr[i];
                }
                tmp[i] = y[i] + hs * acc;
            }
            rhs(t + C[s] * hs, &tmp, &mut rest[0]);
        }
        // tmp now holds the fifth-order solution (row 6 equals the weights)
        let mut err = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (r, kr) in k.iter().enumerate() {
                e += E[r] * kr[i];
            }
            let scale = opts.atol + opts.rtol * y[i].abs().max(tmp[i].abs());
            err += (hs * e / scale).powi(2);
        }
        let err = (err / dim.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::Integrator(format!("non-finite state at t = {t}")));
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            y.copy_from_slice(&tmp);
            k.swap(0, 6);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = hs.abs() * if err <= 1.0 { factor } else { factor.min(1.0) };
        if h < 1e-15 * span.max(1.0) {
            return Err(Error::Integrator(format!("step size underflow at t = {t}")));
        }
    }
    Ok(y)
}

/// Solves twice (tolerance and tolerance/32) and returns the tighter solution
/// together with the max absolute discrepancy between the two.
pub fn integrate_checked<F>(
    rhs: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let coarse = integrate(&rhs, t0, t1, y0, opts)?;
    let fine_opts = OdeOptions {
        rtol: opts.rtol / 32.0,
        atol: opts.atol / 32.0,
        ..*opts
    };
    let fine = integrate(&rhs, t0, t1, y0, &fine_opts)?;
    let disc = coarse
        .iter()
        .zip(&fine)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok((fine, disc))
}
