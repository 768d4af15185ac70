//! Little Hölder moduli, intrinsic Lipschitz constants and Hölder bounds along
//! integral curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{l1_diff, skip_domain, HolderReport, HolderVerdict, ResidualRow, Thresholds, VerificationReport};
use crate::error::{Error, Result};
use crate::fields::{flow_two_sided, Direction, FlowOptions, IntegralCurve, ProjectedField};
use crate::group::euclid;
use crate::sampling::{derive_seed, dyadic_radii, Halton, Region};
use crate::splitting::GraphFunction;

/// Pair sampling for modulus tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HolderOptions {
    /// Strictly decreasing scales.
    pub radii: Vec<f64>,
    /// Pairs per scale.
    pub samples: usize,
    pub seed: u64,
    /// Extra base points paired with every sampled displacement.
    pub anchors: Vec<Vec<f64>>,
    pub thresholds: Thresholds,
}

impl Default for HolderOptions {
    fn default() -> Self {
        HolderOptions {
            radii: dyadic_radii(0.1, 10),
            samples: 4000,
            seed: 0,
            anchors: Vec::new(),
            thresholds: Thresholds::default(),
        }
    }
}

type ScalarMap<'a> = &'a (dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync);

/// Base point, distance factor in (0,1] and unit direction from one Halton point.
fn split_sample(u: &[f64], region: &Region) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let d = region.dim();
    let base = region.map_unit(&u[..d]);
    let (dist, dir) = split_displacement(&u[d..])?;
    Some((base, dist, dir))
}

fn split_displacement(u: &[f64]) -> Option<(f64, Vec<f64>)> {
    let dist = 1.0 - u[0];
    let mut dir: Vec<f64> = u[1..].iter().map(|x| 2.0 * x - 1.0).collect();
    let len = euclid(&dir);
    if len < 1e-6 {
        return None;
    }
    dir.iter_mut().for_each(|x| *x /= len);
    Some((dist, dir))
}

fn quotient(f: ScalarMap, a: &[f64], b: &[f64], alpha: f64) -> Result<Option<f64>> {
    let dist = euclid(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    if dist == 0.0 {
        return Ok(None);
    }
    let (Some(fa), Some(fb)) = (skip_domain(f(a))?, skip_domain(f(b))?) else {
        return Ok(None);
    };
    let diff: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x - y).collect();
    Ok(Some(euclid(&diff) / dist.powf(alpha)))
}

fn max_reduce(items: Vec<Result<Option<f64>>>) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for it in items {
        if let Some(v) = it? {
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    Ok(best)
}

/// `f(ρ) = sup |f(b) − f(b')| / |b − b'|^α` over sampled pairs in `region` with
/// `0 < |b − b'| ≤ ρ`, for every radius.
pub fn little_holder_modulus(
    f: ScalarMap,
    alpha: f64,
    region: &Region,
    opts: &HolderOptions,
) -> Result<HolderReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("exponent must be in (0, 1], got {alpha}")));
    }
    if opts.samples == 0 {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let d = region.dim();
    let moduli: Vec<f64> = opts
        .radii
        .par_iter()
        .enumerate()
        .map(|(s, &rho)| -> Result<f64> {
            let halton = Halton::new(2 * d + 1, derive_seed(opts.seed, s as u64));
            let sampled: Vec<Result<Option<f64>>> = (0..opts.samples)
                .into_par_iter()
                .map(|i| {
                    let Some((base, dist, dir)) = split_sample(&halton.point(i), region) else {
                        return Ok(None);
                    };
                    let other: Vec<f64> = base.iter().zip(&dir).map(|(b, u)| b + rho * dist * u).collect();
                    if !region.contains(&other) {
                        return Ok(None);
                    }
                    quotient(f, &base, &other, alpha)
                })
                .collect();
            let mut best = max_reduce(sampled)?;
            let anchored = anchor_pairs(f, alpha, region, &opts.anchors, rho, &halton, opts.samples.min(512), d)?;
            if let Some(v) = anchored {
                best = Some(best.map_or(v, |b| b.max(v)));
            }
            best.ok_or_else(|| Error::InvalidArgument(format!("empty grid at scale {rho}")))
        })
        .collect::<Result<_>>()?;
    HolderReport::from_moduli(format!("holder_{alpha}"), alpha, opts.radii.clone(), moduli, opts.thresholds)
}

#[allow(clippy::too_many_arguments)]
fn anchor_pairs(
    f: ScalarMap,
    alpha: f64,
    region: &Region,
    anchors: &[Vec<f64>],
    rho: f64,
    halton: &Halton,
    count: usize,
    d: usize,
) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for a in anchors {
        if a.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: a.len() });
        }
        let mut partners: Vec<Vec<f64>> = Vec::new();
        for axis in 0..d {
            for scale in [1.0, -1.0, 0.5, -0.5] {
                let mut b = a.clone();
                b[axis] += scale * rho;
                partners.push(b);
            }
        }
        for i in 0..count {
            if let Some((_, dist, dir)) = split_sample(&halton.point(i), region) {
                partners.push(a.iter().zip(&dir).map(|(x, u)| x + rho * dist * u).collect());
            }
        }
        let vals: Vec<Result<Option<f64>>> = partners
            .par_iter()
            .map(|b| {
                if !region.contains(b) {
                    return Ok(None);
                }
                quotient(f, a, b, alpha)
            })
            .collect();
        if let Some(v) = max_reduce(vals)? {
            best = Some(best.map_or(v, |x| x.max(v)));
        }
    }
    Ok(best)
}

/// One-point quotients `sup |f(b) − f(a_0)| / |b − a_0|^α` over `0 < |b − a_0| ≤ ρ`.
pub fn pointwise_holder_quotient(
    f: ScalarMap,
    alpha: f64,
    center: &[f64],
    opts: &HolderOptions,
) -> Result<HolderReport> {
    let d = center.len();
    let moduli: Vec<f64> = opts
        .radii
        .par_iter()
        .enumerate()
        .map(|(s, &rho)| -> Result<f64> {
            let halton = Halton::new(d + 1, derive_seed(opts.seed, s as u64));
            let vals: Vec<Result<Option<f64>>> = (0..opts.samples)
                .into_par_iter()
                .map(|i| {
                    let Some((dist, dir)) = split_displacement(&halton.point(i)) else {
                        return Ok(None);
                    };
                    let b: Vec<f64> = center.iter().zip(&dir).map(|(x, u)| x + rho * dist * u).collect();
                    quotient(f, center, &b, alpha)
                })
                .collect();
            max_reduce(vals)?.ok_or_else(|| Error::InvalidArgument(format!("empty grid at scale {rho}")))
        })
        .collect::<Result<_>>()?;
    HolderReport::from_moduli(
        format!("pointwise_holder_{alpha}"),
        alpha,
        opts.radii.clone(),
        moduli,
        opts.thresholds,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LipschitzOptions {
    pub radii: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub l_guess: Option<f64>,
    pub thresholds: Thresholds,
}

impl Default for LipschitzOptions {
    fn default() -> Self {
        LipschitzOptions {
            radii: dyadic_radii(0.25, 8),
            samples: 2000,
            seed: 0,
            l_guess: None,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub report: VerificationReport,
    /// Empirical constant over all scales.
    pub estimate: f64,
    /// Per-scale constants; an `unbounded` verdict means the estimate diverges
    /// under refinement.
    pub scales: HolderReport,
}

/// Empirical `L = sup ‖φ_q(b)‖ / ‖b‖` with `q = Φ(a)^{-1}` and `b = π_W(q Φ(a'))`,
/// over pairs of W-points in `region` at decreasing homogeneous distances.
pub fn intrinsic_lipschitz_check(
    phi: &GraphFunction,
    region: &Region,
    opts: &LipschitzOptions,
) -> Result<LipschitzEstimate> {
    let sp = phi.splitting();
    let g = sp.group();
    let d = sp.w_dim();
    if region.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: region.dim() });
    }
    let k = sp.k();
    let per_scale: Vec<f64> = opts
        .radii
        .par_iter()
        .enumerate()
        .map(|(s, &rho)| -> Result<f64> {
            let halton = Halton::new(2 * d, derive_seed(opts.seed, s as u64));
            let vals: Vec<Result<Option<f64>>> = (0..opts.samples)
                .into_par_iter()
                .map(|i| {
                    let u = halton.point(i);
                    let a = region.map_unit(&u[..d]);
                    let disp: Vec<f64> = u[d..].iter().map(|x| 2.0 * x - 1.0).collect();
                    let step = g.dil(rho, &sp.embed_w(&disp));
                    let a2 = g.mul(&sp.embed_w(&a), &step)[k..].to_vec();
                    if !region.contains(&a2) {
                        return Ok(None);
                    }
                    let (Some(pa), Some(pb)) = (skip_domain(phi.graph_coords(&a))?, skip_domain(phi.graph_coords(&a2))?)
                    else {
                        return Ok(None);
                    };
                    let rel = g.mul(&g.inv(&pa), &pb);
                    let den = g.norm(&sp.embed_w(&sp.project_w(&rel)));
                    if den < 1e-300 {
                        return Ok(None);
                    }
                    Ok(Some(g.norm(&sp.embed_l(&sp.project_l(&rel))) / den))
                })
                .collect();
            Ok(max_reduce(vals)?.unwrap_or(0.0))
        })
        .collect::<Result<_>>()?;
    let scales = HolderReport::from_moduli("lipschitz", 1.0, opts.radii.clone(), per_scale.clone(), opts.thresholds)?;
    let estimate = per_scale.iter().cloned().fold(0.0, f64::max);
    let rows = opts
        .radii
        .iter()
        .zip(&per_scale)
        .map(|(r, l)| ResidualRow {
            point: vec![*r],
            label: "scale".into(),
            residual: *l,
        })
        .collect();
    let tolerance = opts.l_guess.unwrap_or(f64::MAX);
    let mut report = VerificationReport::new(
        "intrinsic_lipschitz",
        format!("{} pairs per scale, {} scales, seed {}", opts.samples, opts.radii.len(), opts.seed),
        rows,
        tolerance,
    );
    if scales.verdict == HolderVerdict::Unbounded {
        report = report.with_max_residual(f64::INFINITY);
        report.notes.push("constant grows under refinement".into());
    }
    Ok(LipschitzEstimate {
        report,
        estimate,
        scales,
    })
}

/// Two-sided curves of every `D^φ_j`, `j = k+1..n`, through quasi-random starts.
pub fn curve_families(
    phi: &GraphFunction,
    region: &Region,
    starts: usize,
    half_length: f64,
    step: f64,
    seed: u64,
) -> Result<Vec<IntegralCurve>> {
    let sp = phi.splitting();
    let points = region.sample(starts, seed);
    let jobs: Vec<(usize, Vec<f64>)> = (sp.k() + 1..=sp.n())
        .flat_map(|j| points.iter().map(move |p| (j, p.clone())))
        .collect();
    let curves: Vec<Option<IntegralCurve>> = jobs
        .par_iter()
        .map(|(j, a)| {
            let field = ProjectedField::basis(phi, *j)?;
            skip_domain(flow_two_sided(&field, a, half_length, half_length, FlowOptions::fast(step)))
        })
        .collect::<Result<_>>()?;
    Ok(curves.into_iter().flatten().collect())
}

/// Empirical constant of `‖φ(γ(s))^{-1} φ(γ(t))‖ ≤ C |t − s|^{1/d}` for one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveConstant {
    /// 1-based basis direction, 0 for horizontal combinations.
    pub direction: usize,
    pub degree: usize,
    pub constant: f64,
    pub curves: usize,
}

/// Per-direction Hölder constants of `φ` along the given curves.
pub fn curve_holder_bounds(curves: &[IntegralCurve]) -> Result<Vec<CurveConstant>> {
    let mut table: Vec<CurveConstant> = Vec::new();
    let per_curve: Vec<(usize, usize, f64)> = curves
        .par_iter()
        .map(|c| -> Result<(usize, usize, f64)> {
            if c.times.len() < 2 {
                return Err(Error::InvalidArgument("degenerate curve with fewer than two samples".into()));
            }
            let sp = c.field.phi().splitting();
            let (dir, deg) = match c.field.direction() {
                Direction::Basis(j) => (*j, sp.spec().degrees()[j - 1]),
                Direction::Horizontal(_) => (0, 1),
            };
            let values = c.phi_values()?;
            let exp = 1.0 / deg as f64;
            let mut best: f64 = 0.0;
            for i in 0..values.len() {
                for j in i + 1..values.len() {
                    let dt = (c.times[j] - c.times[i]).abs();
                    best = best.max(l1_diff(&values[i], &values[j]) / dt.powf(exp));
                }
            }
            Ok((dir, deg, best))
        })
        .collect::<Result<_>>()?;
    for (dir, deg, c) in per_curve {
        match table.iter_mut().find(|t| t.direction == dir) {
            Some(t) => {
                t.constant = t.constant.max(c);
                t.curves += 1;
            }
            None => table.push(CurveConstant {
                direction: dir,
                degree: deg,
                constant: c,
                curves: 1,
            }),
        }
    }
    table.sort_by_key(|t| t.direction);
    Ok(table)
}

/// `max(L / C, C / L)` with `C` the largest curve constant; 1 when both vanish.
pub fn lipschitz_curve_factor(lipschitz: f64, constants: &[CurveConstant]) -> f64 {
    let c = constants.iter().map(|t| t.constant).fold(0.0, f64::max);
    let tiny = 1e-12;
    match (lipschitz <= tiny, c <= tiny) {
        (true, true) => 1.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => (lipschitz / c).max(c / lipschitz),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::heisenberg;
    use crate::splitting::Splitting;

    fn h1() -> Splitting {
        Splitting::new(&heisenberg(1).unwrap(), 1).unwrap()
    }

    #[test]
    fn identity_on_interval_is_half_little_holder() {
        let region = Region::new(vec![0.0], vec![1.0]).unwrap();
        let f = |x: &[f64]| Ok(vec![x[0]]);
        let opts = HolderOptions {
            samples: 300,
            ..Default::default()
        };
        let rep = little_holder_modulus(&f, 0.5, &region, &opts).unwrap();
        assert_eq!(rep.verdict, HolderVerdict::Vanishing);
        for (r, m) in rep.radii.iter().zip(&rep.moduli) {
            assert!(*m <= r.sqrt() * (1.0 + 1e-12));
            assert!(*m >= 0.9 * r.sqrt());
        }
    }

    #[test]
    fn constant_function_has_zero_lipschitz_constant() {
        let sp = h1();
        let phi = GraphFunction::constant(&sp, vec![0.7]);
        let region = Region::cube(&[0.0, 0.0], 0.5);
        let est = intrinsic_lipschitz_check(&phi, &region, &LipschitzOptions {
            samples: 200,
            l_guess: Some(1e-12),
            ..Default::default()
        })
        .unwrap();
        assert!(est.estimate < 1e-12, "{}", est.estimate);
        assert!(est.report.passed());
    }

    #[test]
    fn zero_function_curve_constants_vanish() {
        let sp = h1();
        let phi = GraphFunction::zero(&sp);
        let region = Region::cube(&[0.0, 0.0], 0.5);
        let curves = curve_families(&phi, &region, 4, 0.1, 0.01, 1).unwrap();
        let table = curve_holder_bounds(&curves).unwrap();
        assert_eq!(table.len(), 2);
        assert!(table.iter().all(|t| t.constant == 0.0));
        assert_eq!(lipschitz_curve_factor(0.0, &table), 1.0);
    }
}
