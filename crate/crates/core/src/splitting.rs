//! Splittings `G = W · L` with `L = exp span{X_1..X_k}` horizontal, intrinsic graphs
//! and intrinsic translations.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Group, GroupSpec, Point};

pub type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A basis-aligned splitting.
#[derive(Debug, Clone)]
pub struct Splitting {
    group: Group,
    k: usize,
}

impl PartialEq for Splitting {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && (Arc::ptr_eq(&self.group, &other.group) || *self.group == *other.group)
    }
}

impl Splitting {
    pub fn new(group: &Group, k: usize) -> Result<Splitting> {
        if k == 0 {
            return Err(Error::InvalidSplitting("L must have dimension at least 1".into()));
        }
        if k >= group.rank() {
            return Err(Error::InvalidSplitting(format!(
                "k = {k} must be smaller than the rank {}",
                group.rank()
            )));
        }
        let n = group.dim();
        // W ideal: no bracket with a W-vector has a component along X_1..X_k
        for sc in group.nonzero_brackets() {
            if sc.k <= k {
                return Err(Error::InvalidSplitting(format!(
                    "[X{},X{}] has a component along X{}, so W is not an ideal",
                    sc.i, sc.j, sc.k
                )));
            }
        }
        debug_assert!(n > k);
        Ok(Splitting {
            group: group.clone(),
            k,
        })
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.group
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.group.dim()
    }

    /// Dimension of W.
    pub fn w_dim(&self) -> usize {
        self.group.dim() - self.k
    }

    pub fn rank(&self) -> usize {
        self.group.rank()
    }

    /// 1-based indices of the horizontal W directions, `k+1..=m`.
    pub fn horizontal_w_directions(&self) -> std::ops::RangeInclusive<usize> {
        (self.k + 1)..=self.rank()
    }

    /// 1-based indices of the vertical directions, `m+1..=n`.
    pub fn vertical_directions(&self) -> std::ops::RangeInclusive<usize> {
        (self.rank() + 1)..=self.n()
    }

    /// Full coordinates of a W-point.
    pub fn embed_w(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.w_dim());
        let mut out = vec![0.0; self.k];
        out.extend_from_slice(w);
        out
    }

    /// Full coordinates of an L-point.
    pub fn embed_l(&self, l: &[f64]) -> Vec<f64> {
        debug_assert_eq!(l.len(), self.k);
        let mut out = l.to_vec();
        out.resize(self.n(), 0.0);
        out
    }

    /// L-coordinates of `π_L(g)`: the first k coordinates.
    pub fn project_l(&self, g: &[f64]) -> Vec<f64> {
        g[..self.k].to_vec()
    }

    /// W-coordinates of `π_W(g) = g · π_L(g)^{-1}`.
    pub fn project_w(&self, g: &[f64]) -> Vec<f64> {
        let l_inv = self.embed_l(&g[..self.k].iter().map(|x| -x).collect::<Vec<_>>());
        let full = self.group.mul(g, &l_inv);
        full[self.k..].to_vec()
    }

    /// `w · l` for W-coordinates `w` and L-coordinates `l`.
    pub fn compose(&self, w: &[f64], l: &[f64]) -> Vec<f64> {
        self.group.mul(&self.embed_w(w), &self.embed_l(l))
    }

    /// `π_W` on points, returning a full group point.
    pub fn project_w_point(&self, g: &Point) -> Result<Point> {
        self.check_point(g)?;
        Point::new(&self.group, self.embed_w(&self.project_w(g.coords())))
    }

    /// `π_L` on points, returning a full group point.
    pub fn project_l_point(&self, g: &Point) -> Result<Point> {
        self.check_point(g)?;
        Point::new(&self.group, self.embed_l(&self.project_l(g.coords())))
    }

    fn check_point(&self, g: &Point) -> Result<()> {
        if Arc::ptr_eq(g.group(), &self.group) || **g.group() == *self.group {
            Ok(())
        } else {
            Err(Error::GroupMismatch)
        }
    }
}

/// Regularity hint carried by a graph function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Continuous,
    Lipschitz,
    C1,
}

/// Where a graph function may be evaluated.
#[derive(Clone)]
pub enum Domain {
    Everywhere,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Predicate { test: Predicate, label: String },
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Everywhere => write!(f, "Everywhere"),
            Domain::Box { lo, hi } => write!(f, "Box({lo:?}, {hi:?})"),
            Domain::Predicate { label, .. } => write!(f, "Predicate({label})"),
        }
    }
}

impl Domain {
    pub fn contains(&self, w: &[f64]) -> bool {
        match self {
            Domain::Everywhere => true,
            Domain::Box { lo, hi } => w
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (a, b))| *a <= *x && *x <= *b),
            Domain::Predicate { test, .. } => test(w),
        }
    }
}

/// An evaluable map `φ: U ⊂ W → L` in W- and L-coordinates.
#[derive(Clone)]
pub struct GraphFunction {
    splitting: Splitting,
    name: String,
    eval: VecFn,
    domain: Domain,
    smoothness: Smoothness,
    jacobian: Option<VecFn>,
}

impl fmt::Debug for GraphFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphFunction")
            .field("name", &self.name)
            .field("k", &self.splitting.k())
            .field("domain", &self.domain)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl GraphFunction {
    pub fn new(
        splitting: &Splitting,
        name: impl Into<String>,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> GraphFunction {
        GraphFunction {
            splitting: splitting.clone(),
            name: name.into(),
            eval: Arc::new(eval),
            domain: Domain::Everywhere,
            smoothness: Smoothness::Continuous,
            jacobian: None,
        }
    }

    /// Scalar-valued convenience constructor for `k = 1`.
    pub fn scalar(
        splitting: &Splitting,
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> GraphFunction {
        Self::new(splitting, name, move |w| vec![f(w)])
    }

    pub fn constant(splitting: &Splitting, value: Vec<f64>) -> GraphFunction {
        assert_eq!(value.len(), splitting.k());
        let mut g = Self::new(splitting, "constant", move |_| value.clone());
        g.smoothness = Smoothness::C1;
        g
    }

    pub fn zero(splitting: &Splitting) -> GraphFunction {
        let mut g = Self::constant(splitting, vec![0.0; splitting.k()]);
        g.name = "zero".into();
        g
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_smoothness(mut self, smoothness: Smoothness) -> Self {
        self.smoothness = smoothness;
        self
    }

    /// Euclidean Jacobian in W-coordinates, row-major `k × (n - k)`.
    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn splitting(&self) -> &Splitting {
        &self.splitting
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn jacobian(&self, w: &[f64]) -> Option<Vec<f64>> {
        self.jacobian.as_ref().map(|j| j(w))
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        self.domain.contains(w)
    }

    /// Evaluate with domain and finiteness checks.
    pub fn eval(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.splitting.w_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.splitting.w_dim(),
                got: w.len(),
            });
        }
        if !self.domain.contains(w) {
            return Err(Error::OutOfDomain(self.name.clone()));
        }
        let v = (self.eval)(w);
        if v.len() != self.splitting.k() {
            return Err(Error::DimensionMismatch {
                expected: self.splitting.k(),
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("{} returned a non-finite value", self.name)));
        }
        Ok(v)
    }

    /// Evaluate without checks; for hot loops over known-good points.
    pub fn eval_unchecked(&self, w: &[f64]) -> Vec<f64> {
        (self.eval)(w)
    }

    /// First component, for `k = 1` functions.
    pub fn eval_scalar(&self, w: &[f64]) -> Result<f64> {
        Ok(self.eval(w)?[0])
    }

    /// `Φ(w) = w · φ(w)` as full coordinates.
    pub fn graph_coords(&self, w: &[f64]) -> Result<Vec<f64>> {
        let l = self.eval(w)?;
        Ok(self.splitting.compose(w, &l))
    }

    /// `Φ(w)` as a point.
    pub fn graph_map(&self, w: &[f64]) -> Result<Point> {
        Point::new(self.splitting.group(), self.graph_coords(w)?)
    }

    /// The intrinsic translation `φ_q`, whose graph is `q · graph(φ)`.
    pub fn translate(&self, q: &[f64]) -> GraphFunction {
        let sp = self.splitting.clone();
        let q_l = sp.project_l(q);
        let q_w = sp.project_w(q);
        let pull = Arc::new(PullBack::new(&sp, &q_w, &q_l));
        let inner = self.clone();
        let shift = q_l.clone();
        let pull_eval = pull.clone();
        let eval = move |a: &[f64]| {
            let b = pull_eval.apply(a);
            let v = (inner.eval)(&b);
            v.iter().zip(&shift).map(|(x, s)| x + s).collect()
        };
        let inner_domain = self.domain.clone();
        let domain = match inner_domain {
            Domain::Everywhere => Domain::Everywhere,
            other => {
                let label = format!("translate({:?})", other);
                Domain::Predicate {
                    test: Arc::new(move |a: &[f64]| other.contains(&pull.apply(a))),
                    label,
                }
            }
        };
        GraphFunction {
            splitting: sp,
            name: format!("{}_q", self.name),
            eval: Arc::new(eval),
            domain,
            smoothness: self.smoothness,
            jacobian: None,
        }
    }

    /// Map each value through `f` (e.g. squaring); drops the Jacobian.
    pub fn map_values(
        &self,
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> GraphFunction {
        let inner = self.eval.clone();
        GraphFunction {
            splitting: self.splitting.clone(),
            name: name.into(),
            eval: Arc::new(move |w| f(&inner(w))),
            domain: self.domain.clone(),
            smoothness: Smoothness::Continuous,
            jacobian: None,
        }
    }
}

/// `a ↦ π_W(q^{-1} a) = q_L^{-1} q_W^{-1} a q_L` on W-coordinates.
struct PullBack {
    splitting: Splitting,
    q_w_inv: Vec<f64>,
    q_l: Vec<f64>,
}

impl PullBack {
    fn new(sp: &Splitting, q_w: &[f64], q_l: &[f64]) -> PullBack {
        PullBack {
            splitting: sp.clone(),
            q_w_inv: sp.embed_w(&q_w.iter().map(|x| -x).collect::<Vec<_>>()),
            q_l: sp.embed_l(q_l),
        }
    }

    fn apply(&self, a: &[f64]) -> Vec<f64> {
        let g = self.splitting.group();
        let x = g.mul(&self.q_w_inv, &self.splitting.embed_w(a));
        let c = g.conj(&self.q_l, &x);
        c[self.splitting.k()..].to_vec()
    }
}

/// `π_W(q^{-1} a)` for W-coordinates `a`.
pub fn pull_back_w(sp: &Splitting, q: &[f64], a: &[f64]) -> Vec<f64> {
    PullBack::new(sp, &sp.project_w(q), &sp.project_l(q)).apply(a)
}

/// `q_W · q_L · a · q_L^{-1}` for W-coordinates `a`: the inverse of [`pull_back_w`].
pub fn push_forward_w(sp: &Splitting, q: &[f64], a: &[f64]) -> Vec<f64> {
    let g = sp.group();
    let q_l = sp.embed_l(&sp.project_l(q));
    let q_w = sp.embed_w(&sp.project_w(q));
    let c = g.conj(&g.inv(&q_l), &sp.embed_w(a));
    g.mul(&q_w, &c)[sp.k()..].to_vec()
}
