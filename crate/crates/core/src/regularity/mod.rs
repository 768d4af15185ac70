//! Numerical verifiers for the regularity notions of intrinsic graphs.
//!
//! Every check is a pure function of its inputs and a seed. Sup-limits are
//! decided by a log-log regression over dyadic scales, see [`Thresholds`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode;

mod broad;
mod gradient;
mod holder;
mod vertical;

pub use broad::{broad_check, broad_star_check, BroadOptions, BroadStarOptions};
pub use gradient::{
    estimate_intrinsic_gradient, intrinsic_difference_quotient, uid_residual, GradientMethod,
    GradientMethodKind, IntrinsicGradientEstimate, LevelSet, UidOptions,
};
pub use holder::{
    curve_families, curve_holder_bounds, intrinsic_lipschitz_check, lipschitz_curve_factor,
    little_holder_modulus, pointwise_holder_quotient, CurveConstant, HolderOptions,
    LipschitzEstimate, LipschitzOptions,
};
pub use vertical::{
    propagation_check, vertical_holder_modulus, vertical_reach, PropagationOptions, ReachSegment,
    VerticalOptions, VerticalReach,
};

/// Row-major `k × (m − k)` matrix-valued map on W-coordinates, e.g. a candidate
/// for `∇^φ φ`.
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Closed-form curve `(j, a, t) ↦ E_j(a, t)` in W-coordinates; `None` if no closed
/// form is known for that direction or time.
pub type CurveFn = Arc<dyn Fn(usize, &[f64], f64) -> Option<Vec<f64>> + Send + Sync>;

/// Where integral curves come from.
#[derive(Clone, Default)]
pub enum CurveSource {
    #[default]
    Flow,
    /// User-supplied curves; directions where the closure returns `None` fall
    /// back to RK4.
    ClosedForm(CurveFn),
}

impl std::fmt::Debug for CurveSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurveSource::Flow => f.write_str("Flow"),
            CurveSource::ClosedForm(_) => f.write_str("ClosedForm(..)"),
        }
    }
}

impl CurveSource {
    pub fn name(&self) -> &'static str {
        match self {
            CurveSource::Flow => "flow",
            CurveSource::ClosedForm(_) => "closed_form",
        }
    }
}

/// Limits that turn modulus tables into verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Slope of `log f` against `log ρ` required for decay.
    pub min_slope: f64,
    /// Smallest-scale modulus must be at most this fraction of the largest-scale one.
    pub decay_ratio: f64,
    pub min_scales: usize,
    /// Moduli at or below this are treated as zero.
    pub zero_floor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            min_slope: 0.1,
            decay_ratio: 0.1,
            min_scales: 6,
            zero_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderVerdict {
    Vanishing,
    BoundedNonvanishing,
    Unbounded,
}

/// Modulus table `f(ρ_i)` over decreasing radii with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub label: String,
    pub exponent: f64,
    pub radii: Vec<f64>,
    pub moduli: Vec<f64>,
    pub fitted_slope: f64,
    pub verdict: HolderVerdict,
    pub thresholds: Thresholds,
}

impl HolderReport {
    /// Classify a modulus table. Radii must be strictly decreasing and positive.
    pub fn from_moduli(
        label: impl Into<String>,
        exponent: f64,
        radii: Vec<f64>,
        moduli: Vec<f64>,
        thresholds: Thresholds,
    ) -> Result<HolderReport> {
        if radii.len() != moduli.len() {
            return Err(Error::DimensionMismatch {
                expected: radii.len(),
                got: moduli.len(),
            });
        }
        if radii.len() < thresholds.min_scales.max(2) {
            return Err(Error::InvalidArgument(format!(
                "need at least {} scales, got {}",
                thresholds.min_scales.max(2),
                radii.len()
            )));
        }
        if radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidArgument("radii must be positive and strictly decreasing".into()));
        }
        let (fitted_slope, verdict) = classify(&radii, &moduli, &thresholds);
        Ok(HolderReport {
            label: label.into(),
            exponent,
            radii,
            moduli,
            fitted_slope,
            verdict,
            thresholds,
        })
    }

    pub fn is_vanishing(&self) -> bool {
        self.verdict == HolderVerdict::Vanishing
    }

    /// `radius,modulus` rows.
    pub fn rows(&self) -> Vec<[f64; 2]> {
        self.radii.iter().zip(&self.moduli).map(|(r, m)| [*r, *m]).collect()
    }
}

fn classify(radii: &[f64], moduli: &[f64], th: &Thresholds) -> (f64, HolderVerdict) {
    let floor = th.zero_floor.max(f64::MIN_POSITIVE);
    let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = moduli.iter().map(|m| m.max(floor).ln()).collect();
    let slope = ode::ls_slope(&x, &y);
    let first = moduli[0];
    let last = *moduli.last().unwrap();
    if !moduli.iter().all(|m| m.is_finite()) {
        return (slope, HolderVerdict::Unbounded);
    }
    let verdict = if moduli.iter().all(|m| *m <= th.zero_floor) || last <= th.zero_floor {
        HolderVerdict::Vanishing
    } else if slope >= th.min_slope && last <= th.decay_ratio * first {
        HolderVerdict::Vanishing
    } else if slope <= -th.min_slope {
        HolderVerdict::Unbounded
    } else {
        HolderVerdict::BoundedNonvanishing
    };
    (slope, verdict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub point: Vec<f64>,
    pub label: String,
    pub residual: f64,
}

/// Pass/fail outcome of a check: `pass` iff `max_residual <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub grid: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub residuals: Vec<ResidualRow>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub moduli: Vec<HolderReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(
        check: impl Into<String>,
        grid: impl Into<String>,
        residuals: Vec<ResidualRow>,
        tolerance: f64,
    ) -> VerificationReport {
        let max_residual = residuals.iter().map(|r| r.residual).fold(0.0, nan_max);
        VerificationReport {
            check: check.into(),
            grid: grid.into(),
            max_residual,
            tolerance,
            verdict: verdict_for(max_residual, tolerance),
            residuals,
            moduli: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Replace the max residual (e.g. by infinity when a sub-check failed) and
    /// recompute the verdict.
    pub fn with_max_residual(mut self, value: f64) -> Self {
        self.max_residual = value;
        self.verdict = verdict_for(value, self.tolerance);
        self
    }

    /// Wrap modulus tables into a report that passes iff every table vanishes.
    /// Residual rows carry the smallest-scale modulus of each table.
    pub fn from_moduli(check: impl Into<String>, moduli: Vec<HolderReport>) -> VerificationReport {
        let residuals = moduli
            .iter()
            .map(|m| ResidualRow {
                point: vec![m.radii.last().copied().unwrap_or(0.0)],
                label: m.label.clone(),
                residual: m.moduli.last().copied().unwrap_or(0.0),
            })
            .collect();
        let scales = moduli.first().map_or(0, |m| m.radii.len());
        let mut report = VerificationReport::new(check, format!("{scales} scales"), residuals, f64::MAX);
        let failing: Vec<String> = moduli
            .iter()
            .filter(|m| !m.is_vanishing())
            .map(|m| format!("{} ({:?})", m.label, m.verdict))
            .collect();
        report.moduli = moduli;
        if !failing.is_empty() {
            report.notes.push(format!("non-vanishing moduli: {}", failing.join(", ")));
            report = report.with_max_residual(f64::INFINITY);
        }
        report
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

fn verdict_for(residual: f64, tolerance: f64) -> Verdict {
    if residual <= tolerance {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Max that propagates NaN.
pub(crate) fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

pub(crate) fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Skip points outside the domain, propagate anything else.
pub(crate) fn skip_domain<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::OutOfDomain(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::dyadic_radii;

    #[test]
    fn classification() {
        let th = Thresholds::default();
        let r = dyadic_radii(1.0, 8);
        let sqrt: Vec<f64> = r.iter().map(|x| x.sqrt()).collect();
        let rep = HolderReport::from_moduli("x", 0.5, r.clone(), sqrt, th).unwrap();
        assert_eq!(rep.verdict, HolderVerdict::Vanishing);
        assert!((rep.fitted_slope - 0.5).abs() < 1e-12);
        let ones = vec![1.0; 8];
        let rep = HolderReport::from_moduli("x", 0.5, r.clone(), ones, th).unwrap();
        assert_eq!(rep.verdict, HolderVerdict::BoundedNonvanishing);
        let grow: Vec<f64> = r.iter().map(|x| x.powf(-0.3)).collect();
        let rep = HolderReport::from_moduli("x", 0.5, r.clone(), grow, th).unwrap();
        assert_eq!(rep.verdict, HolderVerdict::Unbounded);
        let zero = vec![0.0; 8];
        let rep = HolderReport::from_moduli("x", 0.5, r.clone(), zero, th).unwrap();
        assert_eq!(rep.verdict, HolderVerdict::Vanishing);
        assert!(HolderReport::from_moduli("x", 0.5, r[..3].to_vec(), vec![1.0; 3], th).is_err());
        let mut bad = r.clone();
        bad.swap(0, 1);
        assert!(HolderReport::from_moduli("x", 0.5, bad, vec![1.0; 8], th).is_err());
    }

    #[test]
    fn verification_verdict_matches_tolerance() {
        let rows = vec![
            ResidualRow {
                point: vec![0.0],
                label: "a".into(),
                residual: 1e-7,
            },
            ResidualRow {
                point: vec![1.0],
                label: "b".into(),
                residual: 2e-7,
            },
        ];
        let rep = VerificationReport::new("t", "g", rows.clone(), 1e-6);
        assert_eq!(rep.max_residual, 2e-7);
        assert!(rep.passed());
        let rep = VerificationReport::new("t", "g", rows, 1e-7);
        assert_eq!(rep.verdict, Verdict::Fail);
        assert_eq!(rep.with_max_residual(0.0).verdict, Verdict::Pass);
    }
}
