//! Run configuration: the JSON schema read by `--config` and its resolution into
//! a graph function with companions.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use carnot_core::area::GradientSource;
use carnot_core::catalog::{expression_function, lookup, omega_from_jacobian, CatalogEntry, CatalogParams, Subject};
use carnot_core::expr::Expr;
use carnot_core::group::{builtin, Group, GroupDescription, GroupSpec};
use carnot_core::regularity::{
    BroadOptions, BroadStarOptions, CurveSource, LevelSet, LipschitzOptions, MatrixFn, UidOptions, VerticalOptions,
};
use carnot_core::sampling::Region;
use carnot_core::splitting::{GraphFunction, Splitting};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A built-in group name or a full structure-constant description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupRef {
    Name(String),
    Spec(GroupDescription),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// 1-based basis direction; defaults to `k + 1`.
    pub direction: Option<usize>,
    pub t_back: f64,
    pub t_fwd: f64,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            direction: None,
            t_back: 0.0,
            t_fwd: 1.0,
            step: 1e-3,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaGradient {
    /// Use `omega` when given, difference quotients otherwise.
    #[default]
    Auto,
    Analytic,
    LevelSet,
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaConfig {
    pub cells: Option<usize>,
    pub gradient: AreaGradient,
    /// Bound on the Richardson error estimate.
    pub tolerance: f64,
}

impl Default for AreaConfig {
    fn default() -> Self {
        AreaConfig {
            cells: None,
            gradient: AreaGradient::Auto,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiftConfig {
    /// Horizontal direction `2..=m`.
    pub direction: usize,
    pub time: f64,
    pub step: f64,
    /// Pairs for the homomorphism residual of π.
    pub pairs: usize,
    pub tolerance: f64,
}

impl Default for LiftConfig {
    fn default() -> Self {
        LiftConfig {
            direction: 2,
            time: 0.2,
            step: 1e-3,
            pairs: 1000,
            tolerance: 1e-10,
        }
    }
}

/// Per-check options; unset sections take the library or catalog defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    pub lipschitz: Option<LipschitzOptions>,
    pub uid: Option<UidOptions>,
    pub broad: Option<BroadOptions>,
    pub broadstar: Option<BroadStarOptions>,
    pub vertical: Option<VerticalOptions>,
    pub area: AreaConfig,
    pub flow: FlowConfig,
    pub lift: LiftConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub group: Option<GroupRef>,
    /// Dimension of the horizontal subgroup L.
    pub k: Option<usize>,
    pub catalog: Option<String>,
    pub catalog_params: CatalogParams,
    /// One expression per L-coordinate.
    pub phi: Vec<String>,
    /// Row-major `k × (m − k)` expressions for `D^φ φ`.
    pub omega: Vec<String>,
    pub params: BTreeMap<String, f64>,
    pub point: Option<Vec<f64>>,
    pub region: Option<Region>,
    pub seed: u64,
    pub checks: ChecksConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn resolve_group(group: &GroupRef) -> Result<Group, CliError> {
    Ok(match group {
        GroupRef::Name(name) => builtin(name)?,
        GroupRef::Spec(desc) => Arc::new(GroupSpec::from_description(desc)?),
    })
}

/// Everything the verbs need about the function under study.
#[derive(Clone)]
pub struct Problem {
    pub phi: GraphFunction,
    pub omega: Option<MatrixFn>,
    /// True when `omega` came from the configuration or the catalog.
    pub omega_analytic: bool,
    pub curves: CurveSource,
    pub point: Vec<f64>,
    pub region: Region,
    pub entry: Option<CatalogEntry>,
}

impl Problem {
    /// `ω` for checks that need one; numerical `D^φ φ` when none is given.
    pub fn omega_or_numeric(&self) -> MatrixFn {
        self.omega.clone().unwrap_or_else(|| omega_from_jacobian(&self.phi))
    }

    pub fn gradient_source(&self, choice: AreaGradient) -> Result<GradientSource, CliError> {
        Ok(match choice {
            AreaGradient::Auto => match (&self.omega, self.omega_analytic) {
                (Some(w), true) => GradientSource::Analytic(w.clone()),
                _ => GradientSource::Estimate,
            },
            AreaGradient::Analytic => GradientSource::Analytic(self.omega.clone().ok_or_else(|| {
                CliError::Config("gradient = analytic needs omega expressions or a catalog entry".into())
            })?),
            AreaGradient::LevelSet => GradientSource::LevelSet(LevelSet::of_graph(&self.phi)),
            AreaGradient::Estimate => GradientSource::Estimate,
        })
    }
}

fn omega_from_expressions(sp: &Splitting, sources: &[String], params: &BTreeMap<String, f64>) -> Result<MatrixFn, CliError> {
    let expected = sp.k() * (sp.rank() - sp.k());
    if sources.len() != expected {
        return Err(CliError::Config(format!(
            "omega needs {expected} expressions (k x (m - k)), got {}",
            sources.len()
        )));
    }
    let exprs: Vec<Expr> = sources.iter().map(|s| Expr::parse(s, params)).collect::<Result<_, _>>()?;
    if let Some(e) = exprs.iter().find(|e| e.max_variable() > sp.n()) {
        return Err(CliError::Config(format!("omega uses x{} outside the group", e.max_variable())));
    }
    let emb = sp.clone();
    Ok(Arc::new(move |w| {
        let p = emb.embed_w(w);
        exprs.iter().map(|e| e.eval(&p)).collect()
    }))
}

impl RunConfig {
    pub fn problem(&self) -> Result<Problem, CliError> {
        if let Some(name) = &self.catalog {
            if !self.phi.is_empty() {
                return Err(CliError::Config("give either catalog or phi, not both".into()));
            }
            let entry = lookup(name, &self.catalog_params)?;
            let phi = match &entry.subject {
                Subject::Graph(phi) => phi.clone(),
                Subject::Real(_) => {
                    return Err(CliError::Config(format!(
                        "{name} is a real function; use `catalog run {name}`"
                    )))
                }
            };
            let omega = if self.omega.is_empty() {
                entry.omega.clone()
            } else {
                Some(omega_from_expressions(phi.splitting(), &self.omega, &self.params)?)
            };
            let problem = Problem {
                omega_analytic: omega.is_some(),
                omega,
                curves: entry.curves.clone(),
                point: self.point.clone().unwrap_or_else(|| entry.anchor.clone()),
                region: self.region.clone().unwrap_or_else(|| entry.region.clone()),
                phi,
                entry: Some(entry),
            };
            return check_dims(problem);
        }
        let group_ref = self
            .group
            .as_ref()
            .ok_or_else(|| CliError::Config("missing group (or catalog)".into()))?;
        let group = resolve_group(group_ref)?;
        let sp = Splitting::new(&group, self.k.unwrap_or(1))?;
        if self.phi.is_empty() {
            return Err(CliError::Config("missing phi expressions (or catalog)".into()));
        }
        let phi = expression_function(&sp, &self.phi, &self.params)?;
        let omega = if self.omega.is_empty() {
            None
        } else {
            Some(omega_from_expressions(&sp, &self.omega, &self.params)?)
        };
        let d = sp.w_dim();
        check_dims(Problem {
            omega_analytic: omega.is_some(),
            omega,
            curves: CurveSource::Flow,
            point: self.point.clone().unwrap_or_else(|| vec![0.0; d]),
            region: self
                .region
                .clone()
                .unwrap_or_else(|| Region::cube(&vec![0.0; d], 0.5)),
            phi,
            entry: None,
        })
    }
}

fn check_dims(p: Problem) -> Result<Problem, CliError> {
    let d = p.phi.splitting().w_dim();
    if p.point.len() != d {
        return Err(CliError::Config(format!("point has {} coordinates, W has {d}", p.point.len())));
    }
    if p.region.dim() != d {
        return Err(CliError::Config(format!("region has dimension {}, W has {d}", p.region.dim())));
    }
    Ok(p)
}

/// `unit` → `[0,1]^d`, `sym` → `[−1,1]^d`, `a,b` → `[a,b]^d`.
pub fn parse_box(spec: &str, d: usize) -> Result<Region, CliError> {
    let (lo, hi) = match spec {
        "unit" => (0.0, 1.0),
        "sym" => (-1.0, 1.0),
        other => {
            let parts: Vec<&str> = other.split(',').collect();
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("bad box bound {s:?}")))
            };
            if parts.len() != 2 {
                return Err(CliError::Config(format!("box must be unit, sym or a,b; got {other:?}")));
            }
            (parse(parts[0])?, parse(parts[1])?)
        }
    };
    Ok(Region::new(vec![lo; d], vec![hi; d])?)
}
