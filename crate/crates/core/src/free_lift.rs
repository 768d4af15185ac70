//! Free step-2 groups `F_{m,2}`, the projection `π: F → G` onto a step-2 group
//! of the same rank, and lifting of graph functions and integral curves.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::{Direction, IntegralCurve, ProjectedField, SolverMeta};
use crate::group::{free_index, free_step2, Group};
use crate::ode::cumulative_integral;
use crate::regularity::MatrixFn;
use crate::splitting::{Domain, GraphFunction, Splitting};

/// `F_{m,2}` with coordinates `x_1..x_m, y_{ls}` (`1 ≤ s < l ≤ m`) and `[X_l, X_s] = Y_{ls}`.
#[derive(Debug, Clone)]
pub struct FreeGroupSpec {
    m: usize,
    group: Group,
}

impl FreeGroupSpec {
    pub fn new(m: usize) -> Result<FreeGroupSpec> {
        Ok(FreeGroupSpec {
            m,
            group: free_step2(m)?,
        })
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m + self.m * (self.m - 1) / 2
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    /// 0-based coordinate of `y_{ls}`, `l > s` 1-based.
    pub fn index(&self, l: usize, s: usize) -> usize {
        free_index(self.m, l, s)
    }

    /// `(p·q)_{ls} = p_{ls} + q_{ls} + ½(p_l q_s − q_l p_s)`.
    pub fn mul_closed_form(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = p.iter().zip(q).map(|(a, b)| a + b).collect();
        for l in 2..=self.m {
            for s in 1..l {
                out[self.index(l, s)] += 0.5 * (p[l - 1] * q[s - 1] - q[l - 1] * p[s - 1]);
            }
        }
        out
    }
}

/// `π(x, y) = (x, y*)`, `y*_i = Σ_{s<l} b^(i)_{ls} y_{ls}`.
#[derive(Debug, Clone)]
pub struct ProjectionPi {
    source: FreeGroupSpec,
    target: Group,
    vertical: DMatrix<f64>,
    section: DMatrix<f64>,
}

impl ProjectionPi {
    pub fn new(target: &Group) -> Result<ProjectionPi> {
        let b = target
            .step2_matrices()
            .ok_or_else(|| Error::InvalidArgument(format!("{} is not of step 2", target.name())))?;
        let m = target.rank();
        let source = FreeGroupSpec::new(m)?;
        let h = b.len();
        let cols = m * (m - 1) / 2;
        let mut vertical = DMatrix::zeros(h, cols);
        for (i, mat) in b.iter().enumerate() {
            for l in 2..=m {
                for s in 1..l {
                    vertical[(i, source.index(l, s) - m)] = mat[(l - 1, s - 1)];
                }
            }
        }
        let section = vertical
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Numerical(format!("pseudoinverse of the vertical matrix: {e}")))?;
        Ok(ProjectionPi {
            source,
            target: target.clone(),
            vertical,
            section,
        })
    }

    pub fn source(&self) -> &FreeGroupSpec {
        &self.source
    }

    pub fn target(&self) -> &Group {
        &self.target
    }

    /// The `h × m(m−1)/2` matrix acting on vertical coordinates.
    pub fn vertical_matrix(&self) -> &DMatrix<f64> {
        &self.vertical
    }

    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.source.group.check_len(p)?;
        let m = self.source.m;
        let y = DVector::from_column_slice(&p[m..]);
        let mut out = p[..m].to_vec();
        out.extend((&self.vertical * y).iter());
        Ok(out)
    }

    /// Canonical fiber point over `q`: vertical part from the pseudoinverse.
    pub fn section(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.target.check_len(q)?;
        let m = self.source.m;
        let y = DVector::from_column_slice(&q[m..]);
        let mut out = q[..m].to_vec();
        out.extend((&self.section * y).iter());
        Ok(out)
    }

    /// `max |π(p·q) − π(p)·π(q)|`.
    pub fn homomorphism_residual(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        let lhs = self.project(&self.source.group.mul(p, q))?;
        let rhs = self.target.mul(&self.project(p)?, &self.project(q)?);
        Ok(lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// π on W-coordinates of the `k = 1` splittings (`x_1` dropped).
    pub fn project_w(&self, w: &[f64]) -> Vec<f64> {
        let m = self.source.m;
        let y = DVector::from_column_slice(&w[m - 1..]);
        let mut out = w[..m - 1].to_vec();
        out.extend((&self.vertical * y).iter());
        out
    }

    pub fn section_w(&self, w: &[f64]) -> Vec<f64> {
        let m = self.source.m;
        let y = DVector::from_column_slice(&w[m - 1..]);
        let mut out = w[..m - 1].to_vec();
        out.extend((&self.section * y).iter());
        out
    }

    fn check_aligned(&self, phi: &GraphFunction) -> Result<()> {
        let sp = phi.splitting();
        if sp.k() != 1 || **sp.group() != *self.target {
            return Err(Error::InvalidSplitting(
                "lifting needs φ on the target group with L = exp(R X_1)".into(),
            ));
        }
        Ok(())
    }

    /// `ψ = φ ∘ π` on `W_F`, constant on the fibers of π.
    pub fn lift_function(&self, phi: &GraphFunction) -> Result<GraphFunction> {
        self.check_aligned(phi)?;
        let sp = Splitting::new(&self.source.group, 1)?;
        let me = Arc::new(self.clone());
        let inner = phi.clone();
        let pi = me.clone();
        let mut psi = GraphFunction::new(&sp, format!("lift({})", phi.name()), move |w| {
            inner.eval_unchecked(&pi.project_w(w))
        })
        .with_smoothness(phi.smoothness());
        if !matches!(phi.domain(), Domain::Everywhere) {
            let inner = phi.clone();
            let pi = me.clone();
            psi = psi.with_domain(Domain::Predicate {
                test: Arc::new(move |w| inner.contains(&pi.project_w(w))),
                label: format!("lift of {:?}", phi.domain()),
            });
        }
        if phi.jacobian(&vec![0.0; phi.splitting().w_dim()]).is_some() {
            let inner = phi.clone();
            let pi = me;
            psi = psi.with_jacobian(move |w| {
                let jac = inner.jacobian(&pi.project_w(w)).unwrap_or_default();
                let m = pi.source.m;
                let mut out = jac[..m - 1].to_vec();
                let tail = DVector::from_column_slice(&jac[m - 1..]);
                out.extend((pi.vertical.transpose() * tail).iter());
                out
            });
        }
        Ok(psi)
    }

    /// `ω ∘ π` on `W_F`.
    pub fn lift_matrix_fn(&self, omega: &MatrixFn) -> MatrixFn {
        let me = self.clone();
        let omega = omega.clone();
        Arc::new(move |w| omega(&me.project_w(w)))
    }

    /// Lift an integral curve `γ` of `D^φ_{X_j}` (`2 ≤ j ≤ m`) in G to the curve of
    /// `D^ψ_{X_j}` in F through the fiber point `a` over `γ(0)`.
    pub fn lift_curve(&self, psi: &GraphFunction, gamma: &IntegralCurve, a: &[f64]) -> Result<IntegralCurve> {
        let m = self.source.m;
        let j = match gamma.field.direction() {
            Direction::Basis(j) if (2..=m).contains(j) => *j,
            _ => {
                return Err(Error::InvalidArgument(
                    "only curves of horizontal basis fields can be lifted".into(),
                ))
            }
        };
        if psi.splitting().group().as_ref() != self.source.group.as_ref() || psi.splitting().k() != 1 {
            return Err(Error::InvalidSplitting("ψ must live on the free group with k = 1".into()));
        }
        let base = self.project_w(a);
        let mismatch = base
            .iter()
            .zip(&gamma.start)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if mismatch > 1e-12 {
            return Err(Error::InvalidArgument(format!("fiber mismatch: |π(a) − γ(0)| = {mismatch:e}")));
        }
        let phis: Vec<f64> = gamma.phi_values()?.iter().map(|v| v[0]).collect();
        let h = gamma.spacing();
        let o = gamma.origin;
        let forward = cumulative_integral(&phis[o..], h);
        let mut back_vals: Vec<f64> = phis[..=o].to_vec();
        back_vals.reverse();
        let backward = cumulative_integral(&back_vals, h);
        let integral = |i: usize| if i >= o { forward[i - o] } else { -backward[o - i] };
        // W-coordinates of F: x_2..x_m at 0..m-2, y_{ls} at free_index - 1
        let w_index = |l: usize, s: usize| free_index(m, l, s) - 1;
        let t0 = gamma.times[o];
        let states: Vec<Vec<f64>> = gamma
            .times
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let dt = t - t0;
                let mut z = a.to_vec();
                z[j - 2] = a[j - 2] + dt;
                z[w_index(j, 1)] = a[w_index(j, 1)] - integral(i);
                for l in j + 1..=m {
                    z[w_index(l, j)] = a[w_index(l, j)] + 0.5 * dt * a[l - 2];
                }
                for s in 2..j {
                    z[w_index(j, s)] = a[w_index(j, s)] - 0.5 * dt * a[s - 2];
                }
                z
            })
            .collect();
        Ok(IntegralCurve {
            start: a.to_vec(),
            origin: o,
            times: gamma.times.clone(),
            states,
            field: ProjectedField::basis(psi, j)?,
            meta: SolverMeta {
                method: format!("lift({})", gamma.meta.method),
                ..gamma.meta.clone()
            },
        })
    }
}
