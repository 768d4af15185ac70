//! Projected vector fields `D^φ_W` on W, their flows and invariance under
//! intrinsic translations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{unit, GroupKind, TangentVector};
use crate::ode;
use crate::splitting::{pull_back_w, push_forward_w, GraphFunction, Splitting};

/// Direction of a projected field: a basis vector `X_j` of Lie(W) (1-based) or a
/// horizontal combination `Σ v_i X_{k+i}` over `X_{k+1}..X_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Basis(usize),
    Horizontal(Vec<f64>),
}

/// How `D^φ_W` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// `dL_w ∘ Ad_{φ(w)}` with the truncated exponential of ad.
    Generic,
    Heisenberg,
    Step2,
    Engel,
    Free2,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Generic => "generic",
            Backend::Heisenberg => "heisenberg",
            Backend::Step2 => "step2",
            Backend::Engel => "engel",
            Backend::Free2 => "free2",
        }
    }

    /// The closed-form backend matching a splitting, or `Generic`.
    pub fn preferred(sp: &Splitting) -> Backend {
        match sp.group().kind() {
            GroupKind::Heisenberg { n } if sp.k() <= *n => Backend::Heisenberg,
            GroupKind::Engel if sp.k() == 1 => Backend::Engel,
            GroupKind::Free { .. } if sp.k() == 1 => Backend::Free2,
            _ if sp.group().step() == 2 && sp.k() == 1 => Backend::Step2,
            _ => Backend::Generic,
        }
    }

    fn check(self, sp: &Splitting) -> Result<()> {
        let g = sp.group();
        let ok = match self {
            Backend::Generic => true,
            Backend::Heisenberg => matches!(g.kind(), GroupKind::Heisenberg { n } if sp.k() <= *n),
            Backend::Step2 => g.step() == 2 && sp.k() == 1,
            Backend::Engel => *g.kind() == GroupKind::Engel && sp.k() == 1,
            Backend::Free2 => matches!(g.kind(), GroupKind::Free { .. }) && sp.k() == 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BackendMismatch {
                backend: self.name(),
                reason: format!("group {} with k = {}", g.name(), sp.k()),
            })
        }
    }
}

/// The field `D^φ_W` for one direction.
#[derive(Debug, Clone)]
pub struct ProjectedField {
    phi: GraphFunction,
    direction: Direction,
    backend: Backend,
    // the direction as a full coordinate vector at the identity
    lie_vector: Vec<f64>,
}

impl ProjectedField {
    pub fn new(phi: &GraphFunction, direction: Direction, backend: Backend) -> Result<Self> {
        let sp = phi.splitting();
        backend.check(sp)?;
        let n = sp.n();
        let lie_vector = match &direction {
            Direction::Basis(j) => {
                if *j <= sp.k() || *j > n {
                    return Err(Error::InvalidArgument(format!(
                        "direction X{j} is not in Lie(W) (need {} < j <= {n})",
                        sp.k()
                    )));
                }
                unit(n, j - 1)
            }
            Direction::Horizontal(v) => {
                let expected = sp.rank() - sp.k();
                if v.len() != expected {
                    return Err(Error::DimensionMismatch {
                        expected,
                        got: v.len(),
                    });
                }
                let mut full = vec![0.0; n];
                full[sp.k()..sp.rank()].copy_from_slice(v);
                full
            }
        };
        Ok(ProjectedField {
            phi: phi.clone(),
            direction,
            backend,
            lie_vector,
        })
    }

    /// Field along `X_j` with the preferred backend.
    pub fn basis(phi: &GraphFunction, j: usize) -> Result<Self> {
        Self::new(phi, Direction::Basis(j), Backend::preferred(phi.splitting()))
    }

    pub fn phi(&self) -> &GraphFunction {
        &self.phi
    }

    pub fn direction(&self) -> &Direction {
        &self.direction
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Same direction and backend for another function on the same splitting.
    pub fn with_phi(&self, phi: &GraphFunction) -> ProjectedField {
        ProjectedField {
            phi: phi.clone(),
            direction: self.direction.clone(),
            backend: self.backend,
            lie_vector: self.lie_vector.clone(),
        }
    }

    pub fn with_backend(&self, backend: Backend) -> Result<ProjectedField> {
        backend.check(self.phi.splitting())?;
        Ok(ProjectedField {
            backend,
            ..self.clone()
        })
    }

    /// Full-length coordinates of `D^φ_W` at the W-point `w`.
    pub fn eval_full(&self, w: &[f64]) -> Result<Vec<f64>> {
        let l = self.phi.eval(w)?;
        Ok(self.eval_with_value(w, &l))
    }

    /// W-coordinates of `D^φ_W` at `w`.
    pub fn eval_w(&self, w: &[f64]) -> Result<Vec<f64>> {
        let k = self.phi.splitting().k();
        Ok(self.eval_full(w)?[k..].to_vec())
    }

    pub fn eval_field(&self, w: &[f64]) -> Result<TangentVector> {
        Ok(TangentVector {
            base: self.phi.splitting().embed_w(w),
            coeffs: self.eval_full(w)?,
        })
    }

    /// Evaluate given the value `l = φ(w)`.
    pub fn eval_with_value(&self, w: &[f64], l: &[f64]) -> Vec<f64> {
        let sp = self.phi.splitting();
        match self.backend {
            Backend::Generic => generic_field(sp, &self.lie_vector, w, l),
            _ => {
                let mut out = vec![0.0; sp.n()];
                for (idx, &coef) in self.lie_vector.iter().enumerate() {
                    if coef == 0.0 {
                        continue;
                    }
                    let col = match self.backend {
                        Backend::Heisenberg => heisenberg_field(sp, idx + 1, w, l),
                        Backend::Step2 => step2_field(sp, idx + 1, w, l[0]),
                        Backend::Engel => engel_field(idx + 1, l[0]),
                        Backend::Free2 => free2_field(sp, idx + 1, w, l[0]),
                        Backend::Generic => unreachable!(),
                    };
                    for (o, c) in out.iter_mut().zip(&col) {
                        *o += coef * c;
                    }
                }
                out
            }
        }
    }
}

fn generic_field(sp: &Splitting, lie: &[f64], w: &[f64], l: &[f64]) -> Vec<f64> {
    let g = sp.group();
    let adv = g.ad_exp(&sp.embed_l(l), lie);
    g.push_left(&sp.embed_w(w), &adv)
}

// H^n: D_j = X_j off the paired block, D_{n+i} = ∂_{n+i} + φ_i ∂_{2n+1} for i <= k.
fn heisenberg_field(sp: &Splitting, j: usize, w: &[f64], l: &[f64]) -> Vec<f64> {
    let n_full = sp.n();
    let n = (n_full - 1) / 2;
    let k = sp.k();
    let x = |i: usize| w[i - 1 - k]; // full 1-based coordinate of a W-point
    let mut out = vec![0.0; n_full];
    out[j - 1] = 1.0;
    if j <= n {
        out[n_full - 1] = -0.5 * x(n + j);
    } else if j <= n + k {
        out[n_full - 1] = l[j - n - 1];
    } else if j <= 2 * n {
        out[n_full - 1] = 0.5 * x(j - n);
    }
    out
}

// step 2, k = 1: D_j = X'_j + Σ_i b^(i)_{1j} φ ∂_{y_i} with X'_j = ∂_j - ½ Σ b^(i)_{jl} x_l ∂_{y_i}.
fn step2_field(sp: &Splitting, j: usize, w: &[f64], phi: f64) -> Vec<f64> {
    let g = sp.group();
    let m = g.rank();
    let n = g.dim();
    let mut out = vec![0.0; n];
    out[j - 1] = 1.0;
    if j > m {
        return out;
    }
    let x = |l: usize| if l == 1 { 0.0 } else { w[l - 2] };
    for i in (m + 1)..=n {
        let mut coef = g.structure_constant(1, j, i) * phi;
        for l in 2..=m {
            coef -= 0.5 * g.structure_constant(j, l, i) * x(l);
        }
        out[i - 1] = coef;
    }
    out
}

// Engel: D_2 = ∂_2 + φ ∂_3 + φ²/2 ∂_4, D_3 = ∂_3 + φ ∂_4, D_4 = ∂_4.
fn engel_field(j: usize, phi: f64) -> Vec<f64> {
    match j {
        2 => vec![0.0, 1.0, phi, 0.5 * phi * phi],
        3 => vec![0.0, 0.0, 1.0, phi],
        _ => vec![0.0, 0.0, 0.0, 1.0],
    }
}

// F_{m,2}: D_j = ∂_j - ψ ∂_{j1} + ½ Σ_{l>j} x_l ∂_{lj} - ½ Σ_{1<s<j} x_s ∂_{js}.
fn free2_field(sp: &Splitting, j: usize, w: &[f64], psi: f64) -> Vec<f64> {
    let m = sp.rank();
    let n = sp.n();
    let mut out = vec![0.0; n];
    out[j - 1] = 1.0;
    if j > m {
        return out;
    }
    let x = |l: usize| w[l - 2];
    out[crate::group::free_index(m, j, 1)] = -psi;
    for l in (j + 1)..=m {
        out[crate::group::free_index(m, l, j)] = 0.5 * x(l);
    }
    for s in 2..j {
        out[crate::group::free_index(m, j, s)] = -0.5 * x(s);
    }
    out
}

/// Solver settings for [`flow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub step: f64,
    /// Re-run with half the step and report the difference.
    pub error_estimate: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            step: 1e-3,
            error_estimate: true,
        }
    }
}

impl FlowOptions {
    pub fn fast(step: f64) -> Self {
        FlowOptions {
            step,
            error_estimate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverMeta {
    pub method: String,
    pub step: f64,
    /// Max difference against the half-step solution, divided by 15.
    pub error_estimate: Option<f64>,
    pub terminated_early: bool,
}

/// Sampled integral curve of a projected field.
#[derive(Debug, Clone)]
pub struct IntegralCurve {
    pub start: Vec<f64>,
    /// Index into `times`/`states` of the starting point.
    pub origin: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub field: ProjectedField,
    pub meta: SolverMeta,
}

impl IntegralCurve {
    /// `φ ∘ γ` at every sample.
    pub fn phi_values(&self) -> Result<Vec<Vec<f64>>> {
        self.states.iter().map(|s| self.field.phi().eval(s)).collect()
    }

    /// Rows `t, w..., φ(γ(t))...` for CSV export.
    pub fn table(&self) -> Result<Vec<Vec<f64>>> {
        let phis = self.phi_values()?;
        Ok(self
            .times
            .iter()
            .zip(&self.states)
            .zip(&phis)
            .map(|((t, s), p)| {
                let mut row = vec![*t];
                row.extend_from_slice(s);
                row.extend_from_slice(p);
                row
            })
            .collect())
    }

    /// Uniform spacing of the time grid (0 for a single sample).
    pub fn spacing(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Largest deviation from the triangular form: along `X_j` coordinate j
    /// is `a_j + t` and the other coordinates of lower degree are constant.
    pub fn triangular_residual(&self) -> f64 {
        let sp = self.field.phi().splitting();
        let k = sp.k();
        let degrees = sp.spec().degrees();
        let t0 = self.times[self.origin];
        let mut worst: f64 = 0.0;
        for (t, s) in self.times.iter().zip(&self.states) {
            match &self.field.direction {
                Direction::Basis(j) => {
                    let dj = degrees[j - 1];
                    for (idx, (x, a)) in s.iter().zip(&self.start).enumerate() {
                        let full = idx + k + 1;
                        if full == *j {
                            worst = worst.max((x - a - (t - t0)).abs());
                        } else if degrees[full - 1] < dj {
                            worst = worst.max((x - a).abs());
                        }
                    }
                }
                Direction::Horizontal(v) => {
                    for (i, c) in v.iter().enumerate() {
                        worst = worst.max((s[i] - self.start[i] - c * (t - t0)).abs());
                    }
                }
            }
        }
        worst
    }
}

fn rk4_field(
    field: &ProjectedField,
    a: &[f64],
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<ode::Trajectory> {
    let k = field.phi.splitting().k();
    ode::rk4(
        |w| {
            if !field.phi.contains(w) {
                return Ok(None);
            }
            let l = field.phi.eval(w)?;
            Ok(Some(field.eval_with_value(w, &l)[k..].to_vec()))
        },
        a,
        t0,
        t1,
        step,
    )
}

/// Integrate `γ' = D(γ)`, `γ(t0) = a`, on `[t0, t1]` (t1 < t0 runs backwards and
/// the samples are then stored in increasing time).
pub fn flow(
    field: &ProjectedField,
    a: &[f64],
    t0: f64,
    t1: f64,
    opts: FlowOptions,
) -> Result<IntegralCurve> {
    if !field.phi.contains(a) {
        return Err(Error::OutOfDomain(field.phi.name().to_string()));
    }
    let tr = rk4_field(field, a, t0, t1, opts.step)?;
    let error_estimate = if opts.error_estimate && tr.times.len() > 1 {
        let fine = rk4_field(field, a, t0, t1, 0.5 * opts.step)?;
        let mut worst: f64 = 0.0;
        for (i, s) in tr.states.iter().enumerate() {
            if let Some(f) = fine.states.get(2 * i) {
                for (x, y) in s.iter().zip(f) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        Some(worst / 15.0)
    } else {
        None
    };
    let step = (tr.times.last().unwrap() - t0).abs() / (tr.times.len() - 1).max(1) as f64;
    let (mut times, mut states) = (tr.times, tr.states);
    let mut origin = 0;
    if t1 < t0 {
        times.reverse();
        states.reverse();
        origin = times.len() - 1;
    }
    Ok(IntegralCurve {
        start: a.to_vec(),
        origin,
        times,
        states,
        field: field.clone(),
        meta: SolverMeta {
            method: "rk4".into(),
            step,
            error_estimate,
            terminated_early: tr.stopped,
        },
    })
}

/// Curve on `[-t_back, t_fwd]` through `a` at time 0.
pub fn flow_two_sided(
    field: &ProjectedField,
    a: &[f64],
    t_back: f64,
    t_fwd: f64,
    opts: FlowOptions,
) -> Result<IntegralCurve> {
    let fwd = flow(field, a, 0.0, t_fwd, opts)?;
    if t_back <= 0.0 {
        return Ok(fwd);
    }
    let back = flow(field, a, 0.0, -t_back, opts)?;
    let origin = back.times.len() - 1;
    let mut times = back.times;
    let mut states = back.states;
    times.extend_from_slice(&fwd.times[1..]);
    states.extend_from_slice(&fwd.states[1..]);
    let error_estimate = match (back.meta.error_estimate, fwd.meta.error_estimate) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    };
    Ok(IntegralCurve {
        start: a.to_vec(),
        origin,
        times,
        states,
        field: field.clone(),
        meta: SolverMeta {
            method: "rk4".into(),
            step: fwd.meta.step,
            error_estimate,
            terminated_early: back.meta.terminated_early || fwd.meta.terminated_early,
        },
    })
}

/// `γ_q(t) = q_W · q_L · γ(t) · q_L^{-1}`, an integral curve of `D^{φ_q}`.
pub fn translate_curve(curve: &IntegralCurve, q: &[f64]) -> IntegralCurve {
    let sp = curve.field.phi.splitting().clone();
    let phi_q = curve.field.phi.translate(q);
    IntegralCurve {
        start: push_forward_w(&sp, q, &curve.start),
        origin: curve.origin,
        times: curve.times.clone(),
        states: curve
            .states
            .iter()
            .map(|s| push_forward_w(&sp, q, s))
            .collect(),
        field: curve.field.with_phi(&phi_q),
        meta: SolverMeta {
            method: format!("{}+translated", curve.meta.method),
            ..curve.meta.clone()
        },
    }
}

/// Max of `|γ'(t) - D(γ(t))|` with γ' from a fourth-order stencil on the samples.
pub fn curve_residual(curve: &IntegralCurve) -> Result<f64> {
    let h = curve.spacing();
    if h == 0.0 {
        return Ok(0.0);
    }
    let d = curve.start.len();
    let mut worst: f64 = 0.0;
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|c| curve.states.iter().map(|s| s[c]).collect())
        .collect();
    for (i, s) in curve.states.iter().enumerate() {
        let field = curve.field.eval_w(s)?;
        for c in 0..d {
            let deriv = ode::stencil_derivative(&columns[c], h, i);
            worst = worst.max((deriv - field[c]).abs());
        }
    }
    Ok(worst)
}

/// Directional derivative of `f` at `w` along the W-vector `v`, central differences.
pub fn directional_derivative(f: &GraphFunction, w: &[f64], v: &[f64], h: f64) -> Result<Vec<f64>> {
    let plus: Vec<f64> = w.iter().zip(v).map(|(x, d)| x + h * d).collect();
    let minus: Vec<f64> = w.iter().zip(v).map(|(x, d)| x - h * d).collect();
    let fp = f.eval(&plus)?;
    let fm = f.eval(&minus)?;
    Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

/// `|D^{φ_q}|_w(f_q) - D^φ|_{π_W(q^{-1} w)}(f)|` with central differences of step `h`.
pub fn field_invariance_check(
    field: &ProjectedField,
    q: &[f64],
    f: &GraphFunction,
    w: &[f64],
    h: f64,
) -> Result<f64> {
    let sp = field.phi.splitting();
    let phi_q = field.phi.translate(q);
    let f_q = f.translate(q);
    let field_q = field.with_phi(&phi_q);
    let lhs = directional_derivative(&f_q, w, &field_q.eval_w(w)?, h)?;
    let base = pull_back_w(sp, q, w);
    let rhs = directional_derivative(f, &base, &field.eval_w(&base)?, h)?;
    Ok(lhs
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
