//! Named example functions with their analytic companions and expected verdicts.
//!
//! Conventions: `sgn(0) = 0` and `χ(0) = 1`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::area::projected_self_derivative;
use crate::error::{Error, Result};
use crate::expr::{chi, sgn, Expr};
use crate::group::{builtin, engel, heisenberg, Group};
use crate::regularity::{
    broad_star_check, estimate_intrinsic_gradient, intrinsic_lipschitz_check, little_holder_modulus,
    pointwise_holder_quotient, propagation_check, uid_residual, vertical_holder_modulus, CurveFn, CurveSource,
    GradientMethod, HolderOptions, HolderReport, LipschitzOptions, MatrixFn, PropagationOptions, ResidualRow,
    Thresholds, UidOptions, Verdict, VerificationReport, VerticalOptions,
};
use crate::sampling::{derive_seed, dyadic_radii, Halton, Region};
use crate::splitting::{GraphFunction, Smoothness, Splitting};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Family = Arc<dyn Fn(f64) -> GraphFunction + Send + Sync>;

/// What an entry evaluates.
#[derive(Clone)]
pub enum Subject {
    Graph(GraphFunction),
    /// A real function of one real variable.
    Real(RealFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Uid,
    Id,
    Lipschitz,
    BroadStar,
    VerticalHolder,
    Propagation,
    SmoothApproximation,
    LittleHolderNearZero,
    LittleHolderAway,
    PointwiseQuotient,
    SquareC1,
    TangentPlane,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Uid => "uid",
            CheckKind::Id => "id",
            CheckKind::Lipschitz => "lipschitz",
            CheckKind::BroadStar => "broad_star",
            CheckKind::VerticalHolder => "vertical_holder",
            CheckKind::Propagation => "propagation",
            CheckKind::SmoothApproximation => "smooth_approximation",
            CheckKind::LittleHolderNearZero => "little_holder_near_zero",
            CheckKind::LittleHolderAway => "little_holder_away",
            CheckKind::PointwiseQuotient => "pointwise_quotient",
            CheckKind::SquareC1 => "square_c1",
            CheckKind::TangentPlane => "tangent_plane",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub check: CheckKind,
    pub verdict: Verdict,
    pub note: String,
}

fn expect(check: CheckKind, verdict: Verdict, note: &str) -> Expectation {
    Expectation {
        check,
        verdict,
        note: note.into(),
    }
}

/// Parameters understood by [`lookup`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CatalogParams {
    pub alpha: Option<f64>,
    /// Built-in group name for the `c1_*` families.
    pub group: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub description: String,
    pub subject: Subject,
    /// `D^φ φ`, row-major `k × (m − k)`.
    pub omega: Option<MatrixFn>,
    pub curves: CurveSource,
    /// Smooth approximations `ε ↦ φ_ε`.
    pub smoothing: Option<Family>,
    pub anchor: Vec<f64>,
    pub region: Region,
    pub uid_radii: Vec<f64>,
    pub params: BTreeMap<String, f64>,
    pub expected: Vec<Expectation>,
}

impl std::fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("name", &self.name)
            .field("anchor", &self.anchor)
            .field("region", &self.region)
            .field("params", &self.params)
            .field("expected", &self.expected)
            .finish()
    }
}

impl CatalogEntry {
    pub fn phi(&self) -> Result<&GraphFunction> {
        match &self.subject {
            Subject::Graph(phi) => Ok(phi),
            Subject::Real(_) => Err(Error::InvalidArgument(format!("{} is not a graph function", self.name))),
        }
    }

    pub fn group(&self) -> Option<&Group> {
        match &self.subject {
            Subject::Graph(phi) => Some(phi.splitting().group()),
            Subject::Real(_) => None,
        }
    }

    fn omega(&self) -> Result<&MatrixFn> {
        self.omega
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no analytic ω", self.name)))
    }

    /// Intrinsic gradient at `w`: `ω(w)` when finite, else difference quotients.
    pub fn gradient_at(&self, w: &[f64]) -> Result<Vec<f64>> {
        if let Some(omega) = &self.omega {
            let g = omega(w);
            if g.iter().all(|x| x.is_finite()) {
                return Ok(g);
            }
        }
        Ok(estimate_intrinsic_gradient(self.phi()?, w, &GradientMethod::difference_quotient())?.matrix)
    }

    pub fn expectation(&self, check: CheckKind) -> Option<&Expectation> {
        self.expected.iter().find(|e| e.check == check)
    }
}

pub const NAMES: [&str; 8] = [
    "engel_phi_alpha",
    "serapioni",
    "heisenberg_characteristic",
    "c1_linear",
    "c1_quadratic",
    "c1_trig",
    "c1_exp",
    "c1_cubic",
];

pub fn lookup(name: &str, params: &CatalogParams) -> Result<CatalogEntry> {
    let seed = params.seed.unwrap_or(0);
    match name {
        "engel_phi_alpha" => engel_phi_alpha(params.alpha.unwrap_or(0.5)),
        "serapioni" => Ok(serapioni()),
        "heisenberg_characteristic" => Ok(heisenberg_characteristic()),
        _ => {
            let kind = name
                .strip_prefix("c1_")
                .and_then(C1Kind::parse)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown catalog entry {name}")))?;
            let group = builtin(params.group.as_deref().unwrap_or("h1"))?;
            c1_function(&group, kind, seed)
        }
    }
}

// ---------------------------------------------------------------------------
// Engel

fn engel_value(alpha: f64, x4: f64) -> f64 {
    if x4 >= 0.0 {
        x4.powf(alpha)
    } else {
        0.0
    }
}

/// `D_3` integral curve through `a = (x_2, x_3, x_4)` at time `t`. For `x_4 > 0`
/// the curve reaches `x_4 = 0` at `t = −x_4^{1−α}/(1−α)` and continues there as
/// the zero solution.
pub fn engel_d3_curve(alpha: f64, a: &[f64], t: f64) -> Option<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return None;
    }
    let e = 1.0 / (1.0 - alpha);
    let c = (1.0 - alpha).powf(e);
    let x4 = a[2];
    let end = if x4 < 0.0 {
        x4
    } else if x4 == 0.0 {
        c * t.max(0.0).powf(e) * chi(t)
    } else {
        let shift = t + x4.powf(1.0 - alpha) / (1.0 - alpha);
        if shift > 0.0 {
            c * shift.powf(e)
        } else {
            0.0
        }
    };
    Some(vec![a[0], a[1] + t, end])
}

/// `φ_α = x_4^α χ_{x_4 ≥ 0}` on the Engel group with `L = exp(R X_1)`.
pub fn engel_phi_alpha(alpha: f64) -> Result<CatalogEntry> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let sp = Splitting::new(&engel(), 1)?;
    let phi = GraphFunction::scalar(&sp, format!("engel_phi_alpha({alpha})"), move |w| engel_value(alpha, w[2]))
        .with_smoothness(if alpha >= 1.0 { Smoothness::Lipschitz } else { Smoothness::Continuous });
    let omega: MatrixFn = Arc::new(move |w| {
        let x4 = w[2];
        vec![if x4 >= 0.0 { 0.5 * alpha * x4.powf(3.0 * alpha - 1.0) } else { 0.0 }]
    });
    let family_sp = sp.clone();
    let smoothing: Family = Arc::new(move |eps| {
        GraphFunction::scalar(&family_sp, format!("engel_phi_alpha({alpha})_eps({eps})"), move |w| {
            let x4 = w[2];
            if x4 < 0.0 {
                eps.cbrt()
            } else {
                (x4.powf(3.0 * alpha) + eps).cbrt()
            }
        })
        .with_smoothness(Smoothness::C1)
        .with_jacobian(move |w| {
            let x4 = w[2];
            let d4 = if x4 < 0.0 {
                0.0
            } else {
                alpha * x4.powf(3.0 * alpha - 1.0) * (x4.powf(3.0 * alpha) + eps).powf(-2.0 / 3.0)
            };
            vec![0.0, 0.0, d4]
        })
    });
    let curves: CurveFn = Arc::new(move |j, a, t| match j {
        3 => engel_d3_curve(alpha, a, t),
        4 => Some(vec![a[0], a[1], a[2] + t]),
        _ => None,
    });
    let third = 1.0 / 3.0;
    let mut expected = Vec::new();
    if alpha > third {
        let note = "UID for every alpha > 1/3";
        for check in [
            CheckKind::BroadStar,
            CheckKind::SmoothApproximation,
            CheckKind::VerticalHolder,
            CheckKind::Propagation,
            CheckKind::Uid,
        ] {
            expected.push(expect(check, Verdict::Pass, note));
        }
    } else if (alpha - third).abs() <= 1e-6 {
        let note = "not UID near the origin at alpha = 1/3";
        expected.push(expect(CheckKind::VerticalHolder, Verdict::Fail, note));
        expected.push(expect(CheckKind::Uid, Verdict::Fail, note));
    }
    Ok(CatalogEntry {
        name: "engel_phi_alpha".into(),
        description: "x4^alpha chi(x4 >= 0) on the Engel group".into(),
        subject: Subject::Graph(phi),
        omega: Some(omega),
        curves: CurveSource::ClosedForm(curves),
        smoothing: Some(smoothing),
        anchor: vec![0.0; 3],
        region: Region::cube(&[0.0; 3], 0.5),
        uid_radii: dyadic_radii(0.1, 10),
        params: BTreeMap::from([("alpha".to_string(), alpha)]),
        expected,
    })
}

// ---------------------------------------------------------------------------
// Serapioni

/// `|x| · Π_{n ≥ 2} φ_n(x)`; at most one factor differs from 1.
pub fn serapioni_value(x: f64) -> f64 {
    let mut factor = 1.0;
    if x > 0.0 && x <= 0.5 + 0.125 {
        let guess = (1.0 / x).round().max(2.0) as u64;
        for n in guess.saturating_sub(1).max(2)..=guess + 1 {
            let nf = n as f64;
            let c = 1.0 / nf;
            let r = 1.0 / (nf * nf * nf);
            if (x - c).abs() <= r {
                factor = nf * nf * nf * (x - c).abs();
                break;
            }
        }
    }
    x.abs() * factor
}

/// `|φ(1/n + 1/n³) − φ(1/n)| / (1/n³)^{1/2}`.
pub fn serapioni_quotient(n: u64) -> f64 {
    let nf = n as f64;
    let r = 1.0 / (nf * nf * nf);
    let c = 1.0 / nf;
    (serapioni_value(c + r) - serapioni_value(c)).abs() / r.sqrt()
}

/// Scales and anchors for the `1/2`-little Hölder modulus on an interval: the
/// kinks `1/n` and interval ends `1/n ± 1/n³` inside the region, down to the
/// smallest scale.
pub fn serapioni_holder_options(region: &Region, seed: u64) -> HolderOptions {
    let (lo, hi) = (region.lo[0], region.hi[0]);
    let mut r0: f64 = 1e-4;
    if lo < 0.0 && hi > 0.0 {
        let dist = (-lo).min(hi);
        r0 = r0.min(dist.powi(3) / 8.0);
    }
    let radii = dyadic_radii(r0, 12);
    let smallest = *radii.last().unwrap();
    let top = (4.0 / smallest).cbrt().ceil() as u64;
    let mut anchors = Vec::new();
    for n in 2..=top {
        let nf = n as f64;
        let c = 1.0 / nf;
        let r = 1.0 / (nf * nf * nf);
        for x in [c - r, c, c + r] {
            if lo <= x && x <= hi {
                anchors.push(vec![x]);
            }
        }
    }
    HolderOptions {
        radii,
        anchors,
        seed,
        ..HolderOptions::default()
    }
}

pub fn serapioni() -> CatalogEntry {
    let f: RealFn = Arc::new(serapioni_value);
    CatalogEntry {
        name: "serapioni".into(),
        description: "|x| times the product of the tent factors n^3|x - 1/n| on [1/n - 1/n^3, 1/n + 1/n^3]".into(),
        subject: Subject::Real(f),
        omega: None,
        curves: CurveSource::Flow,
        smoothing: None,
        anchor: vec![0.0],
        region: Region::cube(&[0.0], 0.1),
        uid_radii: Vec::new(),
        params: BTreeMap::new(),
        expected: vec![
            expect(CheckKind::LittleHolderNearZero, Verdict::Fail, "not 1/2-little Hoelder near 0"),
            expect(CheckKind::LittleHolderAway, Verdict::Pass, "locally Lipschitz away from 0"),
            expect(CheckKind::PointwiseQuotient, Verdict::Pass, "pointwise quotient at 0 tends to 0"),
        ],
    }
}

// ---------------------------------------------------------------------------
// Heisenberg characteristic point

/// `(0, x_2, x_3) · (φ, 0, 0)` for `φ = sgn(x_3)|x_3|^{2/3}`.
pub fn characteristic_parametrization(x2: f64, x3: f64) -> [f64; 3] {
    let p = sgn(x3) * x3.abs().powf(2.0 / 3.0);
    [p, x2, x3 - 0.5 * sgn(x3) * x2 * x3.abs().powf(2.0 / 3.0)]
}

/// Unit normal of the total-least-squares plane through `points`.
pub fn fitted_normal(points: &[[f64; 3]]) -> Result<[f64; 3]> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 points".into()));
    }
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for i in 0..3 {
            mean[i] += p[i] / n;
        }
    }
    let centered = DMatrix::from_fn(points.len(), 3, |r, c| points[r][c] - mean[c]);
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("plane fit did not converge".into()))?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, s)| if *s < best.1 { (i, *s) } else { best });
    Ok([v_t[(idx, 0)], v_t[(idx, 1)], v_t[(idx, 2)]])
}

pub fn heisenberg_characteristic() -> CatalogEntry {
    let sp = Splitting::new(&heisenberg(1).expect("H1"), 1).expect("k = 1 splitting of H1");
    let phi = GraphFunction::scalar(&sp, "heisenberg_characteristic", |w| sgn(w[1]) * w[1].abs().powf(2.0 / 3.0));
    // D_2 = ∂_2 + φ ∂_3, so D_2 φ = φ ∂_3 φ
    let omega: MatrixFn = Arc::new(|w| vec![2.0 / 3.0 * sgn(w[1]) * w[1].abs().cbrt()]);
    CatalogEntry {
        name: "heisenberg_characteristic".into(),
        description: "sgn(x3)|x3|^(2/3) on H1, a C1 surface with a characteristic point at 0".into(),
        subject: Subject::Graph(phi),
        omega: Some(omega),
        curves: CurveSource::Flow,
        smoothing: None,
        anchor: vec![0.0, 0.0],
        region: Region::cube(&[0.0, 0.0], 0.5),
        uid_radii: dyadic_radii(0.1, 12),
        params: BTreeMap::new(),
        expected: vec![
            expect(CheckKind::Uid, Verdict::Pass, "phi^2 is C1"),
            expect(CheckKind::SquareC1, Verdict::Pass, "phi^2 = |x3|^(4/3)"),
            expect(CheckKind::TangentPlane, Verdict::Pass, "tangent plane at 0 is {x3 = 0}"),
        ],
    }
}

// ---------------------------------------------------------------------------
// Smooth families

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C1Kind {
    Linear,
    Quadratic,
    Trig,
    Exp,
    Cubic,
}

impl C1Kind {
    pub const ALL: [C1Kind; 5] = [C1Kind::Linear, C1Kind::Quadratic, C1Kind::Trig, C1Kind::Exp, C1Kind::Cubic];

    pub fn name(self) -> &'static str {
        match self {
            C1Kind::Linear => "linear",
            C1Kind::Quadratic => "quadratic",
            C1Kind::Trig => "trig",
            C1Kind::Exp => "exp",
            C1Kind::Cubic => "cubic",
        }
    }

    pub fn parse(s: &str) -> Option<C1Kind> {
        C1Kind::ALL.into_iter().find(|k| k.name() == s)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scalar C¹ function on W for `k = 1`, coefficients drawn from `seed`.
pub fn c1_graph(sp: &Splitting, kind: C1Kind, seed: u64) -> Result<GraphFunction> {
    if sp.k() != 1 {
        return Err(Error::InvalidSplitting("smooth families are scalar (k = 1)".into()));
    }
    let d = sp.w_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, kind as u64));
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect() };
    let c = draw(d);
    let name = format!("c1_{}", kind.name());
    let phi = match kind {
        C1Kind::Linear => {
            let cj = c.clone();
            GraphFunction::scalar(sp, name, move |w| dot(&c, w)).with_jacobian(move |_| cj.clone())
        }
        C1Kind::Quadratic => {
            let raw = draw(d * d);
            let a = DMatrix::from_fn(d, d, |i, j| 0.5 * (raw[i * d + j] + raw[j * d + i]));
            let (aj, cj) = (a.clone(), c.clone());
            GraphFunction::scalar(sp, name, move |w| {
                let v = nalgebra::DVector::from_column_slice(w);
                0.5 * v.dot(&(&a * &v)) + dot(&c, w)
            })
            .with_jacobian(move |w| {
                let v = nalgebra::DVector::from_column_slice(w);
                (&aj * v).iter().zip(&cj).map(|(x, y)| x + y).collect()
            })
        }
        C1Kind::Trig => {
            let amp = draw(1)[0] + 0.6;
            let cj = c.clone();
            GraphFunction::scalar(sp, name, move |w| amp * dot(&c, w).sin())
                .with_jacobian(move |w| cj.iter().map(|x| amp * dot(&cj, w).cos() * x).collect())
        }
        C1Kind::Exp => {
            let amp = 0.5 * draw(1)[0];
            let cj = c.clone();
            GraphFunction::scalar(sp, name, move |w| amp * dot(&c, w).exp())
                .with_jacobian(move |w| cj.iter().map(|x| amp * dot(&cj, w).exp() * x).collect())
        }
        C1Kind::Cubic => {
            let a = draw(d);
            let (aj, cj) = (a.clone(), c.clone());
            GraphFunction::scalar(sp, name, move |w| {
                a.iter().zip(w).map(|(ai, x)| ai * x * x * x).sum::<f64>() + dot(&c, w)
            })
            .with_jacobian(move |w| {
                aj.iter()
                    .zip(w)
                    .zip(&cj)
                    .map(|((ai, x), ci)| 3.0 * ai * x * x + ci)
                    .collect()
            })
        }
    };
    Ok(phi.with_smoothness(Smoothness::C1))
}

/// `D^φ φ` from the Jacobian of `φ`; NaN where the field cannot be evaluated.
pub fn omega_from_jacobian(phi: &GraphFunction) -> MatrixFn {
    let phi = phi.clone();
    let len = phi.splitting().k() * (phi.splitting().rank() - phi.splitting().k());
    Arc::new(move |w| projected_self_derivative(&phi, w, 1e-6).unwrap_or_else(|_| vec![f64::NAN; len]))
}

pub fn c1_function(group: &Group, kind: C1Kind, seed: u64) -> Result<CatalogEntry> {
    let sp = Splitting::new(group, 1)?;
    let phi = c1_graph(&sp, kind, seed)?;
    let d = sp.w_dim();
    let note = "C1 functions are UID";
    let mut expected: Vec<Expectation> = [CheckKind::Uid, CheckKind::Lipschitz, CheckKind::BroadStar, CheckKind::VerticalHolder]
        .into_iter()
        .map(|c| expect(c, Verdict::Pass, note))
        .collect();
    if group.step() == 2 {
        expected.push(expect(CheckKind::Propagation, Verdict::Pass, "broad* propagates in step 2"));
    }
    Ok(CatalogEntry {
        name: format!("c1_{}", kind.name()),
        description: format!("seeded {} C1 function on {}", kind.name(), group.name()),
        omega: Some(omega_from_jacobian(&phi)),
        subject: Subject::Graph(phi),
        curves: CurveSource::Flow,
        smoothing: None,
        anchor: vec![0.0; d],
        region: Region::cube(&vec![0.0; d], 0.5),
        uid_radii: dyadic_radii(0.1, 10),
        params: BTreeMap::from([("seed".to_string(), seed as f64)]),
        expected,
    })
}

/// Graph function from one expression per L-coordinate, evaluated on `w` embedded
/// in G (so `x_1..x_k` read 0).
pub fn expression_function(sp: &Splitting, sources: &[String], params: &BTreeMap<String, f64>) -> Result<GraphFunction> {
    if sources.len() != sp.k() {
        return Err(Error::DimensionMismatch {
            expected: sp.k(),
            got: sources.len(),
        });
    }
    let exprs: Vec<Expr> = sources.iter().map(|s| Expr::parse(s, params)).collect::<Result<_>>()?;
    if let Some(e) = exprs.iter().find(|e| e.max_variable() > sp.n()) {
        return Err(Error::Expression {
            pos: 0,
            msg: format!("x{} is not a coordinate of a group of dimension {}", e.max_variable(), sp.n()),
        });
    }
    let emb = sp.clone();
    Ok(GraphFunction::new(sp, sources.join("; "), move |w| {
        let p = emb.embed_w(w);
        exprs.iter().map(|e| e.eval(&p)).collect()
    }))
}

// ---------------------------------------------------------------------------
// Golden runs

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub check: CheckKind,
    pub expected: Verdict,
    pub observed: Verdict,
    pub report: VerificationReport,
}

impl CheckOutcome {
    pub fn matches(&self) -> bool {
        self.expected == self.observed
    }
}

fn real_map(entry: &CatalogEntry) -> Result<RealFn> {
    match &entry.subject {
        Subject::Real(f) => Ok(f.clone()),
        Subject::Graph(_) => Err(Error::InvalidArgument(format!("{} is not a real function", entry.name))),
    }
}

fn square_c1_report(phi: &GraphFunction, anchor: &[f64], seed: u64) -> Result<VerificationReport> {
    let d = anchor.len();
    let square_grad = |w: &[f64], h: f64| -> Result<Vec<f64>> {
        (0..d)
            .map(|i| {
                let mut p = w.to_vec();
                let mut m = w.to_vec();
                p[i] += h;
                m[i] -= h;
                let (fp, fm) = (phi.eval_scalar(&p)?, phi.eval_scalar(&m)?);
                Ok((fp * fp - fm * fm) / (2.0 * h))
            })
            .collect()
    };
    let radii = dyadic_radii(0.1, 12);
    let base = square_grad(anchor, 1e-9)?;
    let halton = Halton::new(d, seed);
    let moduli = radii
        .iter()
        .map(|&rho| -> Result<f64> {
            let mut best: f64 = 0.0;
            for i in 0..200 {
                let u = halton.point(i);
                let w: Vec<f64> = anchor.iter().zip(&u).map(|(a, x)| a + rho * (2.0 * x - 1.0)).collect();
                let g = square_grad(&w, 1e-3 * rho)?;
                best = best.max(g.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    let rep = HolderReport::from_moduli("gradient of phi^2", 1.0, radii, moduli, Thresholds::default())?;
    Ok(VerificationReport::from_moduli("square_c1", vec![rep]))
}

fn tangent_plane_report(seed: u64) -> Result<VerificationReport> {
    let halton = Halton::new(2, seed);
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for scale in [1e-2, 1e-4, 1e-6, 1e-8] {
        // sample by the graph height x1 so that every scale sees both sheets
        let points: Vec<[f64; 3]> = (0..256)
            .map(|i| {
                let u = halton.point(i);
                let x1 = scale * (2.0 * u[0] - 1.0);
                let x2 = scale * (2.0 * u[1] - 1.0);
                characteristic_parametrization(x2, sgn(x1) * x1.abs().powf(1.5))
            })
            .collect();
        let n = fitted_normal(&points)?;
        let tilt = (1.0 - n[2] * n[2]).max(0.0).sqrt();
        notes.push(format!("scale {scale:e}: normal ({:.3e}, {:.3e}, {:.3e})", n[0], n[1], n[2]));
        rows.push(ResidualRow {
            point: vec![scale],
            label: "tilt from x3 = 0".into(),
            residual: tilt,
        });
    }
    let last = rows.pop().expect("four scales");
    let mut report = VerificationReport::new("tangent_plane", "256 points per scale", vec![last], 1e-3);
    report.notes = notes;
    Ok(report)
}

/// Run one check with the entry's defaults.
pub fn run_check(entry: &CatalogEntry, check: CheckKind, seed: u64) -> Result<VerificationReport> {
    match check {
        CheckKind::Uid | CheckKind::Id => {
            let phi = entry.phi()?;
            let grad = entry.gradient_at(&entry.anchor)?;
            let opts = UidOptions {
                radii: entry.uid_radii.clone(),
                seed,
                anchored: check == CheckKind::Id,
                ..UidOptions::default()
            };
            let rep = uid_residual(phi, &entry.anchor, &grad, &opts)?;
            Ok(VerificationReport::from_moduli(check.name(), vec![rep]))
        }
        CheckKind::Lipschitz => {
            let opts = LipschitzOptions {
                seed,
                ..LipschitzOptions::default()
            };
            Ok(intrinsic_lipschitz_check(entry.phi()?, &entry.region, &opts)?.report)
        }
        CheckKind::BroadStar => {
            let opts = crate::regularity::BroadStarOptions {
                diameter: entry.region.diameter(),
                seed,
                ..Default::default()
            };
            broad_star_check(entry.phi()?, entry.omega()?, &entry.anchor, &entry.curves, &opts)
        }
        CheckKind::VerticalHolder => {
            let opts = VerticalOptions {
                anchors: vec![entry.anchor.clone()],
                seed,
                ..VerticalOptions::default()
            };
            let reps = vertical_holder_modulus(entry.phi()?, &entry.region, &entry.curves, &opts)?;
            Ok(VerificationReport::from_moduli(check.name(), reps))
        }
        CheckKind::Propagation => {
            let mut opts = PropagationOptions::default();
            opts.broad.seed = seed;
            opts.vertical.seed = seed;
            opts.vertical.anchors = vec![entry.anchor.clone()];
            propagation_check(entry.phi()?, entry.omega()?, &entry.region, &entry.curves, &opts)
        }
        CheckKind::SmoothApproximation => {
            let family = entry
                .smoothing
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument(format!("{} has no smooth family", entry.name)))?;
            let eps = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
            crate::area::smooth_approximation_check(
                entry.phi()?,
                family.as_ref(),
                entry.omega()?,
                &entry.region,
                &eps,
                400,
                1e-6,
                seed,
            )
        }
        CheckKind::LittleHolderNearZero | CheckKind::LittleHolderAway => {
            let f = real_map(entry)?;
            let region = if check == CheckKind::LittleHolderAway {
                Region::new(vec![0.05], vec![1.0])?
            } else {
                entry.region.clone()
            };
            let opts = serapioni_holder_options(&region, seed);
            let rep = little_holder_modulus(&|x: &[f64]| Ok(vec![f(x[0])]), 0.5, &region, &opts)?;
            Ok(VerificationReport::from_moduli(check.name(), vec![rep]))
        }
        CheckKind::PointwiseQuotient => {
            let f = real_map(entry)?;
            let opts = HolderOptions {
                radii: dyadic_radii(1e-4, 10),
                seed,
                ..HolderOptions::default()
            };
            let rep = pointwise_holder_quotient(&|x: &[f64]| Ok(vec![f(x[0])]), 0.5, &entry.anchor, &opts)?;
            // every quotient within the first radius must stay below 1e-2
            let worst = rep.moduli.iter().copied().fold(0.0, f64::max);
            let mut report = VerificationReport::from_moduli(check.name(), vec![rep]);
            report.tolerance = 1e-2;
            let residual = if report.max_residual.is_finite() { worst } else { report.max_residual };
            Ok(report.with_max_residual(residual))
        }
        CheckKind::SquareC1 => square_c1_report(entry.phi()?, &entry.anchor, seed),
        CheckKind::TangentPlane => tangent_plane_report(seed),
    }
}

/// Run every expectation of an entry.
pub fn run_entry(entry: &CatalogEntry, seed: u64) -> Result<Vec<CheckOutcome>> {
    entry
        .expected
        .iter()
        .map(|e| {
            let report = run_check(entry, e.check, seed)?;
            Ok(CheckOutcome {
                check: e.check,
                expected: e.verdict,
                observed: report.verdict,
                report,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serapioni_values() {
        assert_eq!(serapioni_value(0.0), 0.0);
        assert_eq!(serapioni_value(-0.3), 0.3);
        for n in 2..40u64 {
            assert!(serapioni_value(1.0 / n as f64).abs() < 1e-12);
        }
        // past the n = 2 support only |x| survives
        assert_eq!(serapioni_value(0.7), 0.7);
        // 0.4 lies in the n = 2 tent: 0.4 * 8 * 0.1
        assert!((serapioni_value(0.4) - 0.32).abs() < 1e-15);
    }

    #[test]
    fn engel_curves_solve_d3() {
        let alpha = 0.5;
        for a in [[0.1, 0.2, -0.3], [0.0, 0.0, 0.0], [0.3, -0.1, 0.2]] {
            let h = 1e-6;
            for t in [0.05, 0.1, 0.3] {
                let p = engel_d3_curve(alpha, &a, t).unwrap();
                let pp = engel_d3_curve(alpha, &a, t + h).unwrap();
                let pm = engel_d3_curve(alpha, &a, t - h).unwrap();
                let deriv = (pp[2] - pm[2]) / (2.0 * h);
                assert!((deriv - engel_value(alpha, p[2])).abs() < 1e-6);
            }
        }
        // alpha = 1/2 from the origin gives (t/2)^2
        let p = engel_d3_curve(0.5, &[0.0; 3], 0.4).unwrap();
        assert!((p[2] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn characteristic_parametrization_matches_graph_map() {
        let entry = heisenberg_characteristic();
        let phi = entry.phi().unwrap();
        for (x2, x3) in [(0.3, 0.2), (-0.5, -0.1), (0.7, 0.0)] {
            let g = phi.graph_coords(&[x2, x3]).unwrap();
            let c = characteristic_parametrization(x2, x3);
            for i in 0..3 {
                assert!((g[i] - c[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn expression_function_reads_w() {
        let sp = Splitting::new(&heisenberg(1).unwrap(), 1).unwrap();
        let params = BTreeMap::from([("c".to_string(), 2.0)]);
        let f = expression_function(&sp, &["c*x2 + x3".to_string()], &params).unwrap();
        assert_eq!(f.eval(&[0.5, 1.0]).unwrap(), vec![2.0]);
        assert!(expression_function(&sp, &["x4".to_string()], &params).is_err());
    }

    #[test]
    fn c1_jacobians_match_differences() {
        let sp = Splitting::new(&heisenberg(2).unwrap(), 1).unwrap();
        let w = [0.1, -0.2, 0.3, 0.15];
        for kind in C1Kind::ALL {
            let phi = c1_graph(&sp, kind, 7).unwrap();
            let jac = phi.jacobian(&w).unwrap();
            for i in 0..4 {
                let h = 1e-6;
                let mut p = w.to_vec();
                let mut m = w.to_vec();
                p[i] += h;
                m[i] -= h;
                let fd = (phi.eval_scalar(&p).unwrap() - phi.eval_scalar(&m).unwrap()) / (2.0 * h);
                assert!((fd - jac[i]).abs() < 1e-8, "{kind:?}");
            }
        }
    }
}
