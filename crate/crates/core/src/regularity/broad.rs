//! Broad* and broad solutions of `D^φ φ = ω`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CurveSource, MatrixFn, ResidualRow, VerificationReport};
use crate::error::{Error, Result};
use crate::fields::{flow_two_sided, Backend, Direction, FlowOptions, ProjectedField};
use crate::ode;
use crate::sampling::{Halton, Region};
use crate::splitting::GraphFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BroadStarOptions {
    /// Curves must stay in the cube of this radius around `a_0`.
    pub delta1: Option<f64>,
    /// Starting points and times range over `[−δ_2, δ_2]`.
    pub delta2: Option<f64>,
    /// Diameter used for the default radii `0.2·d` and `0.05·d`.
    pub diameter: f64,
    pub starts: usize,
    /// Use these starting points instead of sampling the cube.
    pub explicit_starts: Option<Vec<Vec<f64>>>,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Halvings of `δ_2` allowed when curves leave the cube or the domain.
    pub max_shrink: usize,
}

impl Default for BroadStarOptions {
    fn default() -> Self {
        BroadStarOptions {
            delta1: None,
            delta2: None,
            diameter: 1.0,
            starts: 32,
            explicit_starts: None,
            step: 1e-3,
            tolerance: 1e-6,
            seed: 0,
            max_shrink: 6,
        }
    }
}

impl BroadStarOptions {
    pub fn deltas(&self) -> (f64, f64) {
        (
            self.delta1.unwrap_or(0.2 * self.diameter),
            self.delta2.unwrap_or(0.05 * self.diameter),
        )
    }
}

enum Outcome {
    Row(ResidualRow),
    Exit,
}

/// Gauss-Legendre 3-point nodes and weights on `[-1, 1]`.
const GL3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

fn omega_col(omega: &MatrixFn, w: &[f64], k: usize, cols: usize, c: usize) -> Result<Vec<f64>> {
    let m = omega(w);
    if m.len() != k * cols {
        return Err(Error::DimensionMismatch {
            expected: k * cols,
            got: m.len(),
        });
    }
    Ok((0..k).map(|r| m[r * cols + c]).collect())
}

/// Check `φ(E_j(a,t)) − φ(a) = ∫_0^t ω_{·j}(E_j(a,s)) ds` for starts in the cube of
/// radius `δ_2` around `a_0`, `j = k+1..m` and `|t| ≤ δ_2`.
pub fn broad_star_check(
    phi: &GraphFunction,
    omega: &MatrixFn,
    a0: &[f64],
    source: &CurveSource,
    opts: &BroadStarOptions,
) -> Result<VerificationReport> {
    let sp = phi.splitting();
    let d = sp.w_dim();
    if a0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a0.len() });
    }
    let (delta1, mut delta2) = opts.deltas();
    if !(delta2 > 0.0 && delta1 > delta2) {
        return Err(Error::InvalidArgument(format!("need 0 < delta2 < delta1, got {delta2}, {delta1}")));
    }
    for _ in 0..=opts.max_shrink {
        let starts: Vec<Vec<f64>> = match &opts.explicit_starts {
            Some(s) => s.clone(),
            None => {
                let h = Halton::new(d, opts.seed);
                let mut pts = vec![a0.to_vec()];
                pts.extend((0..opts.starts.saturating_sub(1)).map(|i| {
                    h.point(i)
                        .iter()
                        .zip(a0)
                        .map(|(u, c)| c + delta2 * (2.0 * u - 1.0))
                        .collect()
                }));
                pts
            }
        };
        let jobs: Vec<(usize, &Vec<f64>)> = sp
            .horizontal_w_directions()
            .flat_map(|j| starts.iter().map(move |a| (j, a)))
            .collect();
        let outcomes: Vec<Outcome> = jobs
            .par_iter()
            .map(|(j, a)| star_one(phi, omega, a0, a, *j, source, delta1, delta2, opts.step))
            .collect::<Result<_>>()?;
        if outcomes.iter().any(|o| matches!(o, Outcome::Exit)) {
            delta2 *= 0.5;
            continue;
        }
        let rows = outcomes
            .into_iter()
            .filter_map(|o| match o {
                Outcome::Row(r) => Some(r),
                Outcome::Exit => None,
            })
            .collect();
        let mut report = VerificationReport::new(
            "broad_star",
            format!(
                "{} starts, |t| <= {delta2:.3e}, delta1 = {delta1:.3e}, step {:.1e}, curves {}",
                starts.len(),
                opts.step,
                source.name()
            ),
            rows,
            opts.tolerance,
        );
        if delta2 < opts.deltas().1 {
            report.notes.push(format!("delta2 shrunk to {delta2:.3e}"));
        }
        return Ok(report);
    }
    Err(Error::CurveExit)
}

#[allow(clippy::too_many_arguments)]
fn star_one(
    phi: &GraphFunction,
    omega: &MatrixFn,
    a0: &[f64],
    a: &[f64],
    j: usize,
    source: &CurveSource,
    delta1: f64,
    delta2: f64,
    step: f64,
) -> Result<Outcome> {
    let sp = phi.splitting();
    let k = sp.k();
    let cols = sp.rank() - k;
    let c = j - k - 1;
    if !phi.contains(a) {
        return Ok(Outcome::Exit);
    }
    let inside = |w: &[f64]| phi.contains(w) && w.iter().zip(a0).all(|(x, y)| (x - y).abs() <= delta1);
    let fa = phi.eval(a)?;
    let mut worst: f64 = 0.0;
    let closed = match source {
        CurveSource::ClosedForm(f) if f(j, a, 0.0).is_some() => Some(f.clone()),
        _ => None,
    };
    match closed {
        Some(curve) => {
            let n = (delta2 / step).ceil().max(1.0) as usize;
            let h = delta2 / n as f64;
            for sign in [1.0, -1.0] {
                let mut integral = vec![0.0; k];
                for i in 0..n {
                    let (t0, t1) = (sign * i as f64 * h, sign * (i + 1) as f64 * h);
                    let mid = 0.5 * (t0 + t1);
                    let half = 0.5 * (t1 - t0);
                    for (x, wgt) in GL3 {
                        let Some(p) = curve(j, a, mid + half * x) else {
                            return Ok(Outcome::Exit);
                        };
                        if !inside(&p) {
                            return Ok(Outcome::Exit);
                        }
                        let col = omega_col(omega, &p, k, cols, c)?;
                        for r in 0..k {
                            integral[r] += half * wgt * col[r];
                        }
                    }
                    let Some(p) = curve(j, a, t1) else {
                        return Ok(Outcome::Exit);
                    };
                    if !inside(&p) {
                        return Ok(Outcome::Exit);
                    }
                    let fp = phi.eval(&p)?;
                    for r in 0..k {
                        worst = worst.max((fp[r] - fa[r] - integral[r]).abs());
                    }
                }
            }
        }
        None => {
            let field = ProjectedField::new(phi, Direction::Basis(j), Backend::preferred(sp))?;
            let d = sp.w_dim();
            let mut y0 = a.to_vec();
            y0.extend(std::iter::repeat(0.0).take(k));
            let rhs = |y: &[f64]| -> Result<Option<Vec<f64>>> {
                let w = &y[..d];
                if !phi.contains(w) {
                    return Ok(None);
                }
                let l = phi.eval(w)?;
                let mut out = field.eval_with_value(w, &l)[k..].to_vec();
                out.extend(omega_col(omega, w, k, cols, c)?);
                Ok(Some(out))
            };
            for t1 in [delta2, -delta2] {
                let tr = match ode::rk4(rhs, &y0, 0.0, t1, step) {
                    Ok(tr) => tr,
                    Err(Error::OutOfDomain(_)) => return Ok(Outcome::Exit),
                    Err(e) => return Err(e),
                };
                if tr.stopped {
                    return Ok(Outcome::Exit);
                }
                for s in &tr.states {
                    let w = &s[..d];
                    if !inside(w) {
                        return Ok(Outcome::Exit);
                    }
                    let fw = phi.eval(w)?;
                    for r in 0..k {
                        worst = worst.max((fw[r] - fa[r] - s[d + r]).abs());
                    }
                }
            }
        }
    }
    Ok(Outcome::Row(ResidualRow {
        point: a.to_vec(),
        label: format!("X{j}"),
        residual: worst,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BroadOptions {
    pub samples: usize,
    /// Curves run on `[−T, T]`; defaults to `0.05 ×` region diameter.
    pub half_length: Option<f64>,
    /// Defaults to `T / 20`.
    pub step: Option<f64>,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for BroadOptions {
    fn default() -> Self {
        BroadOptions {
            samples: 64,
            half_length: None,
            step: None,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

/// `d/dt φ(γ(t)) = ω(γ(t)) v` along curves of random horizontal `D^φ_v`, `|v| ≤ 1`,
/// with fourth-order finite differences at interior nodes.
pub fn broad_check(
    phi: &GraphFunction,
    omega: &MatrixFn,
    region: &Region,
    opts: &BroadOptions,
) -> Result<VerificationReport> {
    let sp = phi.splitting();
    let k = sp.k();
    let cols = sp.rank() - k;
    let d = sp.w_dim();
    if region.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: region.dim() });
    }
    let t = opts.half_length.unwrap_or(0.05 * region.diameter());
    let step = opts.step.unwrap_or(t / 20.0);
    let halton = Halton::new(d + cols, opts.seed);
    let rows: Vec<Option<ResidualRow>> = (0..opts.samples)
        .into_par_iter()
        .map(|i| -> Result<Option<ResidualRow>> {
            let u = halton.point(i);
            let a = region.map_unit(&u[..d]);
            if !phi.contains(&a) {
                return Ok(None);
            }
            // the first samples run along the basis directions
            let mut v: Vec<f64> = if i < cols {
                (0..cols).map(|c| if c == i { 1.0 } else { 0.0 }).collect()
            } else {
                u[d..].iter().map(|x| 2.0 * x - 1.0).collect()
            };
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > 1.0 {
                v.iter_mut().for_each(|x| *x /= len);
            }
            let field = ProjectedField::new(phi, Direction::Horizontal(v.clone()), Backend::preferred(sp))?;
            let curve = match flow_two_sided(&field, &a, t, t, FlowOptions::fast(step)) {
                Ok(c) => c,
                Err(Error::OutOfDomain(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let n = curve.times.len();
            if n < 5 {
                return Ok(None);
            }
            let h = curve.spacing();
            let values = curve.phi_values()?;
            let mut worst: f64 = 0.0;
            for r in 0..k {
                let series: Vec<f64> = values.iter().map(|x| x[r]).collect();
                for idx in 2..n - 2 {
                    let deriv = ode::stencil_derivative(&series, h, idx);
                    let m = omega(&curve.states[idx]);
                    let expected: f64 = (0..cols).map(|c| m[r * cols + c] * v[c]).sum();
                    worst = worst.max((deriv - expected).abs());
                }
            }
            Ok(Some(ResidualRow {
                point: a,
                label: format!("W={v:?}"),
                residual: worst,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(VerificationReport::new(
        "broad",
        format!("{} random horizontal directions, |t| <= {t:.3e}, step {step:.3e}", opts.samples),
        rows.into_iter().flatten().collect(),
        opts.tolerance,
    ))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::group::heisenberg;
    use crate::splitting::Splitting;

    fn h1() -> Splitting {
        Splitting::new(&heisenberg(1).unwrap(), 1).unwrap()
    }

    #[test]
    fn zero_function_passes_exactly() {
        let phi = GraphFunction::zero(&h1());
        let omega: MatrixFn = Arc::new(|_| vec![0.0]);
        let rep = broad_star_check(&phi, &omega, &[0.0, 0.0], &CurveSource::Flow, &BroadStarOptions::default()).unwrap();
        assert_eq!(rep.max_residual, 0.0);
        assert!(rep.passed());
    }

    #[test]
    fn linear_function_with_its_gradient_passes() {
        let phi = GraphFunction::scalar(&h1(), "lin", |w| 0.5 * w[0] + 0.1);
        let omega: MatrixFn = Arc::new(|_| vec![0.5]);
        let rep = broad_star_check(&phi, &omega, &[0.1, 0.2], &CurveSource::Flow, &BroadStarOptions::default()).unwrap();
        assert!(rep.max_residual < 1e-12, "{}", rep.max_residual);
        let region = Region::cube(&[0.0, 0.0], 0.5);
        let rep = broad_check(&phi, &omega, &region, &BroadOptions::default()).unwrap();
        assert!(rep.passed(), "{}", rep.max_residual);
    }

    #[test]
    fn wrong_gradient_fails_with_residual_one() {
        let phi = GraphFunction::zero(&h1());
        let omega: MatrixFn = Arc::new(|_| vec![1.0]);
        let region = Region::cube(&[0.0, 0.0], 0.5);
        let rep = broad_check(&phi, &omega, &region, &BroadOptions::default()).unwrap();
        assert!(!rep.passed());
        assert!((rep.max_residual - 1.0).abs() < 1e-12);
    }
}
