//! Hölder moduli along vertical projected fields and the commutator chains that
//! propagate horizontal regularity to vertical directions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{broad_star_check, BroadStarOptions, CurveSource, HolderReport, MatrixFn, Thresholds, VerificationReport};
use crate::error::{Error, Result};
use crate::fields::{flow, flow_two_sided, FlowOptions, ProjectedField};
use crate::sampling::{derive_seed, dyadic_radii, Region};
use crate::splitting::GraphFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerticalOptions {
    pub radii: Vec<f64>,
    /// Quasi-random starts in the region, in addition to the anchors.
    pub starts: usize,
    /// Defaults to the region center when empty.
    pub anchors: Vec<Vec<f64>>,
    /// Steps per half-curve at every scale.
    pub nodes: usize,
    pub seed: u64,
    pub thresholds: Thresholds,
}

impl Default for VerticalOptions {
    fn default() -> Self {
        VerticalOptions {
            radii: dyadic_radii(0.1, 21),
            starts: 16,
            anchors: Vec::new(),
            nodes: 16,
            seed: 0,
            thresholds: Thresholds::default(),
        }
    }
}

/// Samples `(t, φ(E_j(a, t)))` for `|t| ≤ ρ`, or `None` when `a` is outside the domain.
fn curve_samples(
    phi: &GraphFunction,
    j: usize,
    a: &[f64],
    rho: f64,
    nodes: usize,
    source: &CurveSource,
) -> Result<Option<(Vec<f64>, Vec<Vec<f64>>)>> {
    if !phi.contains(a) {
        return Ok(None);
    }
    if let CurveSource::ClosedForm(f) = source {
        if f(j, a, 0.0).is_some() {
            let mut times = Vec::new();
            let mut values = Vec::new();
            for i in -(nodes as i64)..=nodes as i64 {
                let t = rho * i as f64 / nodes as f64;
                if let Some(p) = f(j, a, t) {
                    if phi.contains(&p) {
                        times.push(t);
                        values.push(phi.eval(&p)?);
                    }
                }
            }
            return Ok(Some((times, values)));
        }
    }
    let field = ProjectedField::basis(phi, j)?;
    let step = rho / nodes as f64 * (1.0 + 1e-12);
    let curve = match flow_two_sided(&field, a, rho, rho, FlowOptions::fast(step)) {
        Ok(c) => c,
        Err(Error::OutOfDomain(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let values = curve.phi_values()?;
    Ok(Some((curve.times, values)))
}

fn sup_quotient(times: &[f64], values: &[Vec<f64>], rho: f64, exponent: f64) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..times.len() {
        for j in i + 1..times.len() {
            let dt = (times[j] - times[i]).abs();
            if dt == 0.0 || dt > rho * (1.0 + 1e-9) {
                continue;
            }
            let diff: f64 = values[i].iter().zip(&values[j]).map(|(a, b)| (a - b).abs()).sum();
            best = best.max(diff / dt.powf(exponent));
        }
    }
    best
}

/// For every vertical direction `j = m+1..n`, the moduli
/// `sup |φ(E_j(a,t)) − φ(E_j(a,s))| / |t − s|^{1/deg j}` over `0 < |t − s| ≤ ρ`.
pub fn vertical_holder_modulus(
    phi: &GraphFunction,
    region: &Region,
    source: &CurveSource,
    opts: &VerticalOptions,
) -> Result<Vec<HolderReport>> {
    let sp = phi.splitting();
    if region.dim() != sp.w_dim() {
        return Err(Error::DimensionMismatch {
            expected: sp.w_dim(),
            got: region.dim(),
        });
    }
    if opts.nodes == 0 {
        return Err(Error::InvalidArgument("nodes must be positive".into()));
    }
    let degrees = sp.spec().degrees().to_vec();
    let mut starts = if opts.anchors.is_empty() {
        vec![region.center()]
    } else {
        opts.anchors.clone()
    };
    starts.extend(region.sample(opts.starts, derive_seed(opts.seed, 1)));
    sp.vertical_directions()
        .map(|j| {
            let exponent = 1.0 / degrees[j - 1] as f64;
            let moduli: Vec<f64> = opts
                .radii
                .par_iter()
                .map(|&rho| -> Result<f64> {
                    let mut best: f64 = 0.0;
                    for a in &starts {
                        if let Some((times, values)) = curve_samples(phi, j, a, rho, opts.nodes, source)? {
                            best = best.max(sup_quotient(&times, &values, rho, exponent));
                        }
                    }
                    Ok(best)
                })
                .collect::<Result<_>>()?;
            HolderReport::from_moduli(format!("X{j}"), exponent, opts.radii.clone(), moduli, opts.thresholds)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachSegment {
    pub direction: usize,
    pub time: f64,
    /// `φ(end) − φ(start)` of the segment.
    pub increment: Vec<f64>,
    /// Midpoint of the segment, the node of the one-point quadrature.
    pub lagrange_node: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalReach {
    /// `a, a_1, a_2, a_3, a_4`.
    pub points: Vec<Vec<f64>>,
    pub segments: Vec<ReachSegment>,
    /// `a_4 − a` in W-coordinates.
    pub displacement: Vec<f64>,
}

impl VerticalReach {
    pub fn end(&self) -> &[f64] {
        self.points.last().unwrap()
    }
}

/// Flow `+T` along `D_l`, `+T` along `D_s`, `−T` along `D_l`, `−T` along `D_s`.
pub fn vertical_reach(phi: &GraphFunction, a: &[f64], pair: (usize, usize), time: f64, step: f64) -> Result<VerticalReach> {
    let sp = phi.splitting();
    for j in [pair.0, pair.1] {
        if !sp.horizontal_w_directions().contains(&j) {
            return Err(Error::InvalidArgument(format!("X{j} is not a horizontal direction of W")));
        }
    }
    if !phi.contains(a) {
        return Err(Error::OutOfDomain(phi.name().to_string()));
    }
    let plan = [(pair.0, time), (pair.1, time), (pair.0, -time), (pair.1, -time)];
    let mut points = vec![a.to_vec()];
    let mut segments = Vec::with_capacity(4);
    let half_steps = ((time.abs() / (2.0 * step)).ceil() as usize).max(1);
    let h = time.abs() / (2 * half_steps) as f64;
    for (j, t) in plan {
        let start = points.last().unwrap().clone();
        let (end, node) = if t == 0.0 {
            (start.clone(), start.clone())
        } else {
            let field = ProjectedField::basis(phi, j)?;
            let curve = flow(&field, &start, 0.0, t, FlowOptions::fast(h * (1.0 + 1e-12)))?;
            if curve.meta.terminated_early {
                return Err(Error::OutOfDomain(format!("chain left the domain along X{j}")));
            }
            let end = if t > 0.0 {
                curve.states.last().unwrap().clone()
            } else {
                curve.states[0].clone()
            };
            (end, curve.states[half_steps].clone())
        };
        let increment = phi
            .eval(&end)?
            .iter()
            .zip(&phi.eval(&start)?)
            .map(|(x, y)| x - y)
            .collect();
        segments.push(ReachSegment {
            direction: j,
            time: t,
            increment,
            lagrange_node: node,
        });
        points.push(end);
    }
    let displacement = points[4].iter().zip(a).map(|(x, y)| x - y).collect();
    Ok(VerticalReach {
        points,
        segments,
        displacement,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationOptions {
    pub broad: BroadStarOptions,
    pub vertical: VerticalOptions,
}

/// Broad* check at the region center followed by the vertical moduli on the region.
/// A non-vanishing modulus counts as an infinite residual. Unless radii are given,
/// the broad* radii scale with the region diameter.
pub fn propagation_check(
    phi: &GraphFunction,
    omega: &MatrixFn,
    region: &Region,
    source: &CurveSource,
    opts: &PropagationOptions,
) -> Result<VerificationReport> {
    let mut broad = opts.broad.clone();
    if broad.delta1.is_none() && broad.delta2.is_none() {
        broad.diameter = region.diameter();
    }
    let star = broad_star_check(phi, omega, &region.center(), source, &broad)?;
    let moduli = vertical_holder_modulus(phi, region, source, &opts.vertical)?;
    let mut report = VerificationReport {
        check: "propagation".into(),
        grid: format!("{}; {} vertical scales", star.grid, opts.vertical.radii.len()),
        ..star.clone()
    };
    report.moduli = moduli;
    let failing: Vec<String> = report
        .moduli
        .iter()
        .filter(|m| !m.is_vanishing())
        .map(|m| m.label.clone())
        .collect();
    if !failing.is_empty() {
        report.notes.push(format!("non-vanishing vertical moduli: {}", failing.join(", ")));
        report = report.with_max_residual(f64::INFINITY);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::group::{free_step2, heisenberg};
    use crate::splitting::Splitting;

    #[test]
    fn zero_time_chain_is_trivial() {
        let sp = Splitting::new(&heisenberg(2).unwrap(), 1).unwrap();
        let phi = GraphFunction::zero(&sp);
        let a = vec![0.1, 0.2, 0.3, 0.4];
        let r = vertical_reach(&phi, &a, (2, 4), 0.0, 1e-2).unwrap();
        assert_eq!(r.end(), a.as_slice());
        assert!(r.displacement.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn free_chain_moves_one_vertical_coordinate() {
        let g = free_step2(3).unwrap();
        let sp = Splitting::new(&g, 1).unwrap();
        let phi = GraphFunction::zero(&sp);
        let a = vec![0.0; 5];
        let r = vertical_reach(&phi, &a, (3, 2), 0.1, 1e-3).unwrap();
        // W-coordinates: x2, x3, y21, y31, y32
        assert!((r.displacement[4].abs() - 0.01).abs() < 1e-12, "{:?}", r.displacement);
        assert!(r.displacement[..4].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn linear_heisenberg_function_has_vanishing_vertical_modulus() {
        let sp = Splitting::new(&heisenberg(1).unwrap(), 1).unwrap();
        let phi = GraphFunction::scalar(&sp, "lin", |w| 0.4 * w[0]);
        let region = Region::cube(&[0.0, 0.0], 0.5);
        let opts = VerticalOptions {
            radii: dyadic_radii(0.1, 8),
            starts: 4,
            ..Default::default()
        };
        let reps = vertical_holder_modulus(&phi, &region, &CurveSource::Flow, &opts).unwrap();
        assert_eq!(reps.len(), 1);
        assert!(reps[0].is_vanishing());
        let omega: MatrixFn = Arc::new(|_| vec![0.4]);
        let rep = propagation_check(&phi, &omega, &region, &CurveSource::Flow, &PropagationOptions {
            vertical: opts,
            ..Default::default()
        })
        .unwrap();
        assert!(rep.passed(), "{rep:?}");
    }
}
