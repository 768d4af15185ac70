//! Intrinsic difference quotients, intrinsic gradient estimates and the
//! uniform-differentiability residual.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{skip_domain, HolderReport, Thresholds};
use crate::error::{Error, Result};
use crate::fields::{flow_two_sided, FlowOptions, ProjectedField};
use crate::group::unit;
use crate::ode::richardson_derivative;
use crate::sampling::{derive_seed, dyadic_radii, Halton};
use crate::splitting::GraphFunction;

/// `δ_{1/t} φ_p(δ_t exp Y)` with `p = Φ(w)^{-1}`; `y` holds the W-coordinates of `Y`.
///
/// Negative `t` uses `δ_t x_l = t^{deg l} x_l`, which is still an automorphism.
pub fn intrinsic_difference_quotient(phi: &GraphFunction, w: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
    let sp = phi.splitting();
    if y.len() != sp.w_dim() {
        return Err(Error::DimensionMismatch {
            expected: sp.w_dim(),
            got: y.len(),
        });
    }
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument("difference quotient needs t != 0".into()));
    }
    let g = sp.group();
    let p = g.inv(&phi.graph_coords(w)?);
    let b = g.dil(t, &sp.embed_w(y))[sp.k()..].to_vec();
    let translated = phi.translate(&p);
    let v = translated.eval(&b)?;
    Ok(v.iter().map(|x| x / t).collect())
}

/// A defining function `f: G → R^k` whose zero set contains the graph near the point.
#[derive(Clone)]
pub struct LevelSet {
    pub name: String,
    f: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl fmt::Debug for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LevelSet({})", self.name)
    }
}

impl LevelSet {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> LevelSet {
        LevelSet {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// `f(p) = p_L − φ(π_W p)`.
    pub fn of_graph(phi: &GraphFunction) -> LevelSet {
        let phi = phi.clone();
        LevelSet::new(format!("graph({})", phi.name()), move |p| {
            let sp = phi.splitting();
            let l = sp.project_l(p);
            let v = phi.eval_unchecked(&sp.project_w(p));
            l.iter().zip(&v).map(|(a, b)| a - b).collect()
        })
    }

    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        (self.f)(p)
    }
}

#[derive(Debug, Clone)]
pub enum GradientMethod {
    /// Central intrinsic difference quotients at `t` and `t/2`, Richardson-combined.
    DifferenceQuotient { t: f64 },
    /// Central differences of `φ` along integral curves of `D^φ_j`.
    CurveDerivative { t: f64 },
    /// `−(∇_L f)^{-1} ∇_W f` at `Φ(a_0)`, left-invariant derivatives with step `h`.
    LevelSet { f: LevelSet, h: f64 },
}

impl GradientMethod {
    pub fn kind(&self) -> GradientMethodKind {
        match self {
            GradientMethod::DifferenceQuotient { .. } => GradientMethodKind::DifferenceQuotient,
            GradientMethod::CurveDerivative { .. } => GradientMethodKind::CurveDerivative,
            GradientMethod::LevelSet { .. } => GradientMethodKind::LevelSet,
        }
    }

    pub fn difference_quotient() -> Self {
        GradientMethod::DifferenceQuotient { t: 1e-3 }
    }

    pub fn curve_derivative() -> Self {
        GradientMethod::CurveDerivative { t: 1e-3 }
    }

    pub fn level_set(f: LevelSet) -> Self {
        GradientMethod::LevelSet { f, h: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethodKind {
    DifferenceQuotient,
    CurveDerivative,
    LevelSet,
}

/// Estimated `∇^φ φ(a_0)`, row-major `k × (m − k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicGradientEstimate {
    pub point: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub matrix: Vec<f64>,
    pub method: GradientMethodKind,
    pub uncertainty: f64,
}

impl IntrinsicGradientEstimate {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.cols + col]
    }
}

fn richardson_pair(coarse: &[f64], fine: &[f64]) -> (Vec<f64>, f64) {
    let mut err: f64 = 0.0;
    let out = coarse
        .iter()
        .zip(fine)
        .map(|(c, f)| {
            let r = (4.0 * f - c) / 3.0;
            err = err.max((r - f).abs());
            r
        })
        .collect();
    (out, err)
}

pub fn estimate_intrinsic_gradient(
    phi: &GraphFunction,
    a0: &[f64],
    method: &GradientMethod,
) -> Result<IntrinsicGradientEstimate> {
    let sp = phi.splitting();
    let k = sp.k();
    let cols = sp.rank() - k;
    let mut matrix = vec![0.0; k * cols];
    let mut uncertainty: f64 = 0.0;
    let mut set_col = |c: usize, v: &[f64]| {
        for (row, x) in v.iter().enumerate() {
            matrix[row * cols + c] = *x;
        }
    };
    match method {
        GradientMethod::DifferenceQuotient { t } => {
            for c in 0..cols {
                let y = unit(sp.w_dim(), c);
                let central = |s: f64| -> Result<Vec<f64>> {
                    let plus = intrinsic_difference_quotient(phi, a0, &y, s)?;
                    let minus = intrinsic_difference_quotient(phi, a0, &y, -s)?;
                    Ok(plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a + b)).collect())
                };
                let (est, err) = richardson_pair(&central(*t)?, &central(0.5 * t)?);
                uncertainty = uncertainty.max(err);
                set_col(c, &est);
            }
        }
        GradientMethod::CurveDerivative { t } => {
            for c in 0..cols {
                let field = ProjectedField::basis(phi, k + 1 + c)?;
                let curve = flow_two_sided(&field, a0, *t, *t, FlowOptions::fast(t / 8.0 * (1.0 + 1e-12)))?;
                if curve.meta.terminated_early {
                    return Err(Error::OutOfDomain("curve left the domain while differentiating".into()));
                }
                let o = curve.origin;
                let at = |i: usize| phi.eval(&curve.states[i]);
                let coarse: Vec<f64> = at(o + 8)?.iter().zip(&at(o - 8)?).map(|(a, b)| (a - b) / (2.0 * t)).collect();
                let fine: Vec<f64> = at(o + 4)?.iter().zip(&at(o - 4)?).map(|(a, b)| (a - b) / t).collect();
                let (est, err) = richardson_pair(&coarse, &fine);
                uncertainty = uncertainty.max(err);
                set_col(c, &est);
            }
        }
        GradientMethod::LevelSet { f, h } => {
            let base = phi.graph_coords(a0)?;
            let g = sp.group();
            let m = sp.rank();
            let derivs = |step: f64| -> Vec<Vec<f64>> {
                (0..m)
                    .map(|i| {
                        let e = unit(sp.n(), i);
                        (0..k)
                            .map(|row| {
                                richardson_derivative(
                                    |s| f.eval(&g.mul(&base, &e.iter().map(|x| x * s).collect::<Vec<_>>()))[row],
                                    step,
                                )
                            })
                            .collect()
                    })
                    .collect()
            };
            let solve = |d: &[Vec<f64>]| -> Result<Vec<f64>> {
                let lhs = DMatrix::from_fn(k, k, |r, c| d[c][r]);
                let rhs = DMatrix::from_fn(k, cols, |r, c| d[k + c][r]);
                let scale = lhs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                let lu = lhs.lu();
                if scale == 0.0 || lu.determinant().abs() <= 1e-12 * scale.powi(k as i32) {
                    return Err(Error::Singular("horizontal derivative of the level-set function".into()));
                }
                let sol = lu.solve(&rhs).ok_or_else(|| Error::Singular("level-set solve".into()))?;
                let mut out = vec![0.0; k * cols];
                for r in 0..k {
                    for c in 0..cols {
                        out[r * cols + c] = -sol[(r, c)];
                    }
                }
                Ok(out)
            };
            let est = solve(&derivs(*h))?;
            let alt = solve(&derivs(2.0 * h))?;
            uncertainty = est.iter().zip(&alt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            for c in 0..cols {
                let col: Vec<f64> = (0..k).map(|r| est[r * cols + c]).collect();
                set_col(c, &col);
            }
        }
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-convergent difference quotients".into()));
    }
    Ok(IntrinsicGradientEstimate {
        point: a0.to_vec(),
        rows: k,
        cols,
        matrix,
        method: method.kind(),
        uncertainty,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UidOptions {
    pub radii: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Fix `a = a_0` (the pointwise, ID form).
    pub anchored: bool,
    pub thresholds: Thresholds,
}

impl Default for UidOptions {
    fn default() -> Self {
        UidOptions {
            radii: dyadic_radii(0.1, 10),
            samples: 2000,
            seed: 0,
            anchored: false,
            thresholds: Thresholds::default(),
        }
    }
}

/// Per radius, `sup |φ(b) − φ(a) − ∇(a^{-1}b)| / ‖φ(a)^{-1} a^{-1} b φ(a)‖` over
/// `a, b ∈ a_0 · δ_r([−1,1]^{n−k})`; `grad` is row-major `k × (m − k)` and acts on
/// the horizontal W-components of `a^{-1}b`.
pub fn uid_residual(phi: &GraphFunction, a0: &[f64], grad: &[f64], opts: &UidOptions) -> Result<HolderReport> {
    let sp = phi.splitting();
    let g = sp.group();
    let k = sp.k();
    let d = sp.w_dim();
    let cols = sp.rank() - k;
    if grad.len() != k * cols {
        return Err(Error::DimensionMismatch {
            expected: k * cols,
            got: grad.len(),
        });
    }
    if a0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a0.len() });
    }
    let base = sp.embed_w(a0);
    let residual = |a: &[f64], b: &[f64]| -> Result<Option<f64>> {
        let (Some(fa), Some(fb)) = (skip_domain(phi.eval(a))?, skip_domain(phi.eval(b))?) else {
            return Ok(None);
        };
        let rel = g.mul(&g.inv(&sp.embed_w(a)), &sp.embed_w(b));
        let den = g.norm(&g.conj(&sp.embed_l(&fa), &rel));
        if den < 1e-300 {
            return Ok(None);
        }
        let h = &rel[k..sp.rank()];
        let mut num = 0.0;
        for r in 0..k {
            let lin: f64 = (0..cols).map(|c| grad[r * cols + c] * h[c]).sum();
            num += (fb[r] - fa[r] - lin).abs();
        }
        Ok(Some(num / den))
    };
    let moduli: Vec<f64> = opts
        .radii
        .par_iter()
        .enumerate()
        .map(|(s, &r)| -> Result<f64> {
            let halton = Halton::new(2 * d, derive_seed(opts.seed, s as u64));
            let ball = |u: &[f64]| -> Vec<f64> {
                let v: Vec<f64> = u.iter().map(|x| 2.0 * x - 1.0).collect();
                g.mul(&base, &g.dil(r, &sp.embed_w(&v)))[k..].to_vec()
            };
            let vals: Vec<Result<Option<f64>>> = (0..opts.samples)
                .into_par_iter()
                .map(|i| {
                    let u = halton.point(i);
                    let b = ball(&u[d..]);
                    let from_center = residual(a0, &b)?;
                    if opts.anchored {
                        return Ok(from_center);
                    }
                    let a = ball(&u[..d]);
                    let pair = residual(&a, &b)?;
                    Ok(match (from_center, pair) {
                        (Some(x), Some(y)) => Some(x.max(y)),
                        (x, y) => x.or(y),
                    })
                })
                .collect();
            let mut best: f64 = 0.0;
            for v in vals {
                if let Some(x) = v? {
                    best = best.max(x);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    HolderReport::from_moduli(
        if opts.anchored { "id_residual" } else { "uid_residual" },
        1.0,
        opts.radii.clone(),
        moduli,
        opts.thresholds,
    )
}
