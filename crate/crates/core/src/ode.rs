//! Fixed-step RK4, quadrature and finite-difference helpers.

use crate::error::{Error, Result};

/// Outcome of integrating an autonomous system on a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// True if the right-hand side refused a stage before reaching the final time.
    pub stopped: bool,
}

/// Integrate `y' = f(y)` from `t0` to `t1` with about `|t1 - t0| / h` RK4 steps.
///
/// `f` returns `None` when asked to evaluate outside its domain; the integration
/// then stops at the last accepted state. Errors on NaN and on failure of the
/// very first step.
pub fn rk4<F>(f: F, y0: &[f64], t0: f64, t1: f64, h: f64) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> Result<Option<Vec<f64>>>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    let span = t1 - t0;
    let steps = ((span.abs() / h).ceil() as usize).max(1);
    let dt = span / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(y0.to_vec());
    if span == 0.0 {
        return Ok(Trajectory {
            times,
            states,
            stopped: false,
        });
    }
    let d = y0.len();
    let mut y = y0.to_vec();
    let mut tmp = vec![0.0; d];
    for i in 1..=steps {
        let stage = |at: &[f64]| -> Result<Option<Vec<f64>>> {
            let v = f(at)?;
            if let Some(v) = &v {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Numerical("non-finite vector field value".into()));
                }
            }
            Ok(v)
        };
        let Some(k1) = stage(&y)? else { break };
        for j in 0..d {
            tmp[j] = y[j] + 0.5 * dt * k1[j];
        }
        let Some(k2) = stage(&tmp)? else { break };
        for j in 0..d {
            tmp[j] = y[j] + 0.5 * dt * k2[j];
        }
        let Some(k3) = stage(&tmp)? else { break };
        for j in 0..d {
            tmp[j] = y[j] + dt * k3[j];
        }
        let Some(k4) = stage(&tmp)? else { break };
        for j in 0..d {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        times.push(t0 + i as f64 * dt);
        states.push(y.clone());
    }
    if times.len() == 1 {
        return Err(Error::OutOfDomain("integral curve (immediate exit)".into()));
    }
    let stopped = times.len() < steps + 1;
    Ok(Trajectory {
        times,
        states,
        stopped,
    })
}

/// Cumulative integral of samples on a uniform grid, fourth order.
///
/// Even nodes use composite Simpson; odd nodes add a quadratic-interpolation
/// correction over the last interval.
pub fn cumulative_integral(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (values[0] + values[1]);
        return out;
    }
    // first interval from the quadratic through nodes 0, 1, 2
    out[1] = h * (5.0 * values[0] + 8.0 * values[1] - values[2]) / 12.0;
    for i in 2..n {
        if i % 2 == 0 {
            out[i] = out[i - 2] + h / 3.0 * (values[i - 2] + 4.0 * values[i - 1] + values[i]);
        } else {
            out[i] = out[i - 1] + h * (-values[i - 2] + 8.0 * values[i - 1] + 5.0 * values[i]) / 12.0;
        }
    }
    out
}

/// Derivative of uniformly sampled data at node `i`, fourth order in the interior.
pub fn stencil_derivative(values: &[f64], h: f64, i: usize) -> f64 {
    let n = values.len();
    if i >= 2 && i + 2 < n {
        (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2]) / (12.0 * h)
    } else if i >= 1 && i + 1 < n {
        (values[i + 1] - values[i - 1]) / (2.0 * h)
    } else if i == 0 && n >= 3 {
        (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    } else if n >= 3 {
        (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h)
    } else if n == 2 {
        (values[1] - values[0]) / h
    } else {
        0.0
    }
}

/// Richardson-extrapolated central difference of a scalar function of one variable.
pub fn richardson_derivative(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d1 = (f(h) - f(-h)) / (2.0 * h);
    let d2 = (f(0.5 * h) - f(-0.5 * h)) / h;
    (4.0 * d2 - d1) / 3.0
}

/// Pairwise (cascade) summation; order of operations is fixed by the input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
