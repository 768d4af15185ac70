//! Carnot groups of step at most 4 in exponential coordinates of the first kind.
//!
//! Basis indices in the public API are 1-based (`X_1..X_n`); coordinate slices
//! are ordinary 0-based vectors.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_STEP: usize = 4;

/// Tolerance used when validating structure constants.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// Which family a group was built from; closed-form backends key off this.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GroupKind {
    Heisenberg { n: usize },
    Free { m: usize },
    Engel,
    Custom,
}

/// One nonzero structure constant `[X_i, X_j] = value * X_k + ...`, 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureConstant {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    #[serde(rename = "c")]
    pub value: f64,
}

/// Serializable description of a group, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDescription {
    #[serde(default)]
    pub name: Option<String>,
    pub step: usize,
    pub layer_dims: Vec<usize>,
    #[serde(default)]
    pub brackets: Vec<StructureConstant>,
}

/// A validated Carnot group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    name: String,
    kind: GroupKind,
    layer_dims: Vec<usize>,
    degrees: Vec<usize>,
    // dense table, c[(i * n + j) * n + k]
    table: Vec<f64>,
    // nonzero (i, j, k, c) with i < j, 0-based
    terms: Vec<(usize, usize, usize, f64)>,
}

pub type Group = Arc<GroupSpec>;

impl GroupSpec {
    /// Build and validate a group. The first violated axiom is reported.
    pub fn from_description(desc: &GroupDescription) -> Result<GroupSpec> {
        let name = desc.name.clone().unwrap_or_else(|| "custom".to_string());
        Self::build(name, GroupKind::Custom, desc.step, &desc.layer_dims, &desc.brackets)
    }

    pub fn from_json(text: &str) -> Result<GroupSpec> {
        let desc: GroupDescription =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        Self::from_description(&desc)
    }

    fn build(
        name: String,
        kind: GroupKind,
        step: usize,
        layer_dims: &[usize],
        brackets: &[StructureConstant],
    ) -> Result<GroupSpec> {
        if step == 0 {
            return Err(Error::InvalidSpec("step must be at least 1".into()));
        }
        if step > MAX_STEP {
            return Err(Error::StepTooLarge(step));
        }
        if layer_dims.len() != step {
            return Err(Error::InvalidSpec(format!(
                "{} layer dimensions given for step {}",
                layer_dims.len(),
                step
            )));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidSpec("layer dimensions must be positive".into()));
        }
        let degrees: Vec<usize> = layer_dims
            .iter()
            .enumerate()
            .flat_map(|(layer, &d)| std::iter::repeat(layer + 1).take(d))
            .collect();
        let n = degrees.len();
        let mut table = vec![0.0; n * n * n];
        let mut seen = vec![false; n * n * n];
        for sc in brackets {
            for &idx in &[sc.i, sc.j, sc.k] {
                if idx == 0 || idx > n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            if !sc.value.is_finite() {
                return Err(Error::InvalidSpec("non-finite structure constant".into()));
            }
            let (i, j, k) = (sc.i - 1, sc.j - 1, sc.k - 1);
            if i == j {
                if sc.value != 0.0 {
                    return Err(Error::Antisymmetry { i: sc.i, j: sc.j });
                }
                continue;
            }
            let at = (i * n + j) * n + k;
            let mirror = (j * n + i) * n + k;
            if seen[mirror] {
                if (table[mirror] + sc.value).abs() > STRUCTURE_TOL {
                    return Err(Error::Antisymmetry { i: sc.i, j: sc.j });
                }
            } else {
                table[mirror] = -sc.value;
            }
            if seen[at] && (table[at] - sc.value).abs() > STRUCTURE_TOL {
                return Err(Error::InvalidSpec(format!(
                    "conflicting entries for [X{},X{}] along X{}",
                    sc.i, sc.j, sc.k
                )));
            }
            table[at] = sc.value;
            seen[at] = true;
        }
        let mut terms = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    let c = table[(i * n + j) * n + k];
                    if c != 0.0 {
                        terms.push((i, j, k, c));
                    }
                }
            }
        }
        let spec = GroupSpec {
            name,
            kind,
            layer_dims: layer_dims.to_vec(),
            degrees,
            table,
            terms,
        };
        spec.check_grading()?;
        spec.check_jacobi()?;
        spec.check_generation()?;
        Ok(spec)
    }

    fn check_grading(&self) -> Result<()> {
        for &(i, j, k, _) in &self.terms {
            let expected = self.degrees[i] + self.degrees[j];
            if self.degrees[k] != expected {
                return Err(Error::Grading {
                    i: i + 1,
                    j: j + 1,
                    k: k + 1,
                    deg_k: self.degrees[k],
                    expected,
                });
            }
        }
        Ok(())
    }

    fn check_jacobi(&self) -> Result<()> {
        let n = self.dim();
        let scale = self
            .terms
            .iter()
            .map(|t| t.3.abs())
            .fold(1.0_f64, f64::max);
        for a in 0..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    let (ea, eb, ec) = (unit(n, a), unit(n, b), unit(n, c));
                    let t1 = self.bracket(&ea, &self.bracket(&eb, &ec));
                    let t2 = self.bracket(&eb, &self.bracket(&ec, &ea));
                    let t3 = self.bracket(&ec, &self.bracket(&ea, &eb));
                    let residual = (0..n)
                        .map(|l| (t1[l] + t2[l] + t3[l]).abs())
                        .fold(0.0, f64::max);
                    if residual > STRUCTURE_TOL * scale * scale {
                        return Err(Error::Jacobi {
                            i: a + 1,
                            j: b + 1,
                            k: c + 1,
                            residual,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn check_generation(&self) -> Result<()> {
        let n = self.dim();
        let first: Vec<usize> = (0..n).filter(|&i| self.degrees[i] == 1).collect();
        for layer in 2..=self.step() {
            let targets: Vec<usize> = (0..n).filter(|&i| self.degrees[i] == layer).collect();
            let sources: Vec<usize> = (0..n).filter(|&i| self.degrees[i] == layer - 1).collect();
            let mut rows = Vec::new();
            for &a in &first {
                for &b in &sources {
                    let v = self.bracket(&unit(n, a), &unit(n, b));
                    rows.push(targets.iter().map(|&t| v[t]).collect::<Vec<f64>>());
                }
            }
            let rank = if rows.is_empty() {
                0
            } else {
                DMatrix::from_fn(rows.len(), targets.len(), |r, c| rows[r][c]).rank(1e-10)
            };
            if rank < targets.len() {
                return Err(Error::Generation { layer });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Topological dimension n.
    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    /// Rank m, the dimension of the first layer.
    pub fn rank(&self) -> usize {
        self.layer_dims[0]
    }

    /// Degrees of the coordinates, 0-based slice.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Degree of the basis vector `X_j` (1-based).
    pub fn degree(&self, j: usize) -> Result<usize> {
        self.check_index(j)?;
        Ok(self.degrees[j - 1])
    }

    /// Structure constant `c_ij^k` (1-based indices).
    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.table[((i - 1) * n + (j - 1)) * n + (k - 1)]
    }

    /// Nonzero structure constants with i < j, 1-based.
    pub fn nonzero_brackets(&self) -> Vec<StructureConstant> {
        self.terms
            .iter()
            .map(|&(i, j, k, c)| StructureConstant {
                i: i + 1,
                j: j + 1,
                k: k + 1,
                value: c,
            })
            .collect()
    }

    pub fn description(&self) -> GroupDescription {
        GroupDescription {
            name: Some(self.name.clone()),
            step: self.step(),
            layer_dims: self.layer_dims.clone(),
            brackets: self.nonzero_brackets(),
        }
    }

    pub(crate) fn check_index(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.dim() {
            Err(Error::IndexOutOfRange {
                index: j,
                n: self.dim(),
            })
        } else {
            Ok(())
        }
    }

    /// Lie bracket of two algebra elements in coordinates.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for &(i, j, k, c) in &self.terms {
            let w = x[i] * y[j] - x[j] * y[i];
            if w != 0.0 {
                out[k] += c * w;
            }
        }
        out
    }

    /// Group law via the Baker-Campbell-Hausdorff series truncated at the step.
    pub fn mul(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        debug_assert_eq!(p.len(), self.dim());
        debug_assert_eq!(q.len(), self.dim());
        let mut z: Vec<f64> = p.iter().zip(q).map(|(a, b)| a + b).collect();
        let s = self.step();
        if s < 2 {
            return z;
        }
        let xy = self.bracket(p, q);
        axpy(&mut z, 0.5, &xy);
        if s < 3 {
            return z;
        }
        let x_xy = self.bracket(p, &xy);
        let y_xy = self.bracket(q, &xy);
        axpy(&mut z, 1.0 / 12.0, &x_xy);
        axpy(&mut z, -1.0 / 12.0, &y_xy);
        if s < 4 {
            return z;
        }
        let y_x_xy = self.bracket(q, &x_xy);
        axpy(&mut z, -1.0 / 24.0, &y_x_xy);
        z
    }

    pub fn inv(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|x| -x).collect()
    }

    pub fn identity(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// `δ_λ`; λ is assumed positive.
    pub fn dil(&self, lambda: f64, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.degrees)
            .map(|(x, &d)| x * lambda.powi(d as i32))
            .collect()
    }

    /// Anisotropic homogeneous norm `Σ |x_l|^{1/deg l}`.
    pub fn norm(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.degrees)
            .map(|(x, &d)| match d {
                1 => x.abs(),
                2 => x.abs().sqrt(),
                3 => x.abs().cbrt(),
                _ => x.abs().powf(1.0 / d as f64),
            })
            .sum()
    }

    /// `e^{ad_x} v`, exact in the nilpotent algebra.
    pub fn ad_exp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        let mut term = v.to_vec();
        let mut fact = 1.0;
        for r in 1..self.step() {
            term = self.bracket(x, &term);
            fact *= r as f64;
            axpy(&mut out, 1.0 / fact, &term);
        }
        out
    }

    /// `p^{-1} q p`, computed as `e^{-ad_p} q`.
    pub fn conj(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        let minus_p = self.inv(p);
        self.ad_exp(&minus_p, q)
    }

    /// Push a vector at the identity to `p` by the differential of left translation.
    pub fn push_left(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        if self.step() < 2 {
            return out;
        }
        let pv = self.bracket(p, v);
        axpy(&mut out, 0.5, &pv);
        if self.step() < 3 {
            return out;
        }
        // the ad^3 coefficient of the BCH derivative vanishes
        let ppv = self.bracket(p, &pv);
        axpy(&mut out, 1.0 / 12.0, &ppv);
        out
    }

    /// Coordinates of the left-invariant field `X_j` (1-based) at `p`.
    pub fn left_field(&self, j: usize, p: &[f64]) -> Vec<f64> {
        self.push_left(p, &unit(self.dim(), j - 1))
    }

    /// The skew matrices `B^(i)` of a step-2 group: `b^(i)_{jl} = c_{jl}^{m+i}`.
    pub fn step2_matrices(&self) -> Option<Vec<DMatrix<f64>>> {
        if self.step() != 2 {
            return None;
        }
        let m = self.rank();
        let h = self.layer_dims[1];
        Some(
            (0..h)
                .map(|i| {
                    DMatrix::from_fn(m, m, |j, l| self.structure_constant(j + 1, l + 1, m + i + 1))
                })
                .collect(),
        )
    }

    pub fn check_len(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            })
        } else {
            Ok(())
        }
    }
}

pub(crate) fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Step-2 closed-form law `(x + x', y + y' - ½⟨Bx, x'⟩)`.
pub fn step2_closed_form_mul(b: &[DMatrix<f64>], p: &[f64], q: &[f64]) -> Vec<f64> {
    let m = b.first().map(|mat| mat.nrows()).unwrap_or(p.len());
    let mut out: Vec<f64> = p.iter().zip(q).map(|(a, c)| a + c).collect();
    for (i, mat) in b.iter().enumerate() {
        let mut pairing = 0.0;
        for j in 0..m {
            for l in 0..m {
                pairing += mat[(j, l)] * p[l] * q[j];
            }
        }
        out[m + i] -= 0.5 * pairing;
    }
    out
}

/// Heisenberg group `H^n`, relations `[X_i, X_{n+i}] = X_{2n+1}`.
pub fn heisenberg(n: usize) -> Result<Group> {
    if n == 0 {
        return Err(Error::InvalidArgument("Heisenberg index must be at least 1".into()));
    }
    let brackets: Vec<StructureConstant> = (1..=n)
        .map(|i| StructureConstant {
            i,
            j: n + i,
            k: 2 * n + 1,
            value: 1.0,
        })
        .collect();
    GroupSpec::build(
        format!("h{n}"),
        GroupKind::Heisenberg { n },
        2,
        &[2 * n, 1],
        &brackets,
    )
    .map(Arc::new)
}

/// Step-2 group from skew matrices, `[X_j, X_l] = Σ_i b^(i)_{jl} Y_i`.
pub fn step2_from_skew(name: &str, b: &[DMatrix<f64>]) -> Result<Group> {
    let h = b.len();
    if h == 0 {
        return Err(Error::InvalidArgument("at least one skew matrix is required".into()));
    }
    let m = b[0].nrows();
    let mut brackets = Vec::new();
    for (i, mat) in b.iter().enumerate() {
        if mat.nrows() != m || mat.ncols() != m {
            return Err(Error::InvalidSpec("skew matrices must be square of equal size".into()));
        }
        for j in 0..m {
            for l in 0..m {
                if (mat[(j, l)] + mat[(l, j)]).abs() > STRUCTURE_TOL {
                    return Err(Error::Antisymmetry { i: j + 1, j: l + 1 });
                }
                if j < l && mat[(j, l)] != 0.0 {
                    brackets.push(StructureConstant {
                        i: j + 1,
                        j: l + 1,
                        k: m + i + 1,
                        value: mat[(j, l)],
                    });
                }
            }
        }
    }
    GroupSpec::build(name.to_string(), GroupKind::Custom, 2, &[m, h], &brackets).map(Arc::new)
}

/// A step-2 group of rank m with h random skew matrices (entries uniform in [-1, 1]).
pub fn random_step2(m: usize, h: usize, seed: u64) -> Result<Group> {
    if h == 0 || h > m * (m - 1) / 2 {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= h <= m(m-1)/2, got m={m}, h={h}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        let mats: Vec<DMatrix<f64>> = (0..h)
            .map(|_| {
                let mut mat = DMatrix::zeros(m, m);
                for j in 0..m {
                    for l in (j + 1)..m {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        mat[(j, l)] = v;
                        mat[(l, j)] = -v;
                    }
                }
                mat
            })
            .collect();
        if let Ok(g) = step2_from_skew(&format!("step2_m{m}_h{h}_s{seed}"), &mats) {
            return Ok(g);
        }
    }
    Err(Error::Numerical("could not draw independent skew matrices".into()))
}

/// 0-based coordinate index of `y_{ls}` (l > s, 1-based) in the free group of rank m.
pub fn free_index(m: usize, l: usize, s: usize) -> usize {
    debug_assert!(l > s && s >= 1 && l <= m);
    m + (l - 1) * (l - 2) / 2 + (s - 1)
}

/// Free step-2 group `F_{m,2}` with `[X_l, X_s] = Y_{ls}` for l > s.
pub fn free_step2(m: usize) -> Result<Group> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("free group needs rank >= 2, got {m}")));
    }
    let mut brackets = Vec::new();
    for l in 2..=m {
        for s in 1..l {
            brackets.push(StructureConstant {
                i: l,
                j: s,
                k: free_index(m, l, s) + 1,
                value: 1.0,
            });
        }
    }
    GroupSpec::build(
        format!("free{m}"),
        GroupKind::Free { m },
        2,
        &[m, m * (m - 1) / 2],
        &brackets,
    )
    .map(Arc::new)
}

/// Engel group: `[X_1, X_2] = X_3`, `[X_1, X_3] = X_4`.
pub fn engel() -> Group {
    let brackets = [
        StructureConstant {
            i: 1,
            j: 2,
            k: 3,
            value: 1.0,
        },
        StructureConstant {
            i: 1,
            j: 3,
            k: 4,
            value: 1.0,
        },
    ];
    Arc::new(
        GroupSpec::build("engel".into(), GroupKind::Engel, 3, &[2, 1, 1], &brackets)
            .expect("Engel structure constants are valid"),
    )
}

/// Resolve a built-in group by name: `h<n>`, `free<m>`, `engel`,
/// `step2_m<m>_h<h>_s<seed>` (random skew matrices).
pub fn builtin(name: &str) -> Result<Group> {
    let lower = name.to_ascii_lowercase();
    if lower == "engel" {
        return Ok(engel());
    }
    if let Some(rest) = lower.strip_prefix("free") {
        let m: usize = rest
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("unknown group {name}")))?;
        return free_step2(m);
    }
    if let Some(rest) = lower.strip_prefix("step2_") {
        let mut m = None;
        let mut h = None;
        let mut seed = 0u64;
        for part in rest.split('_') {
            let (key, val) = part.split_at(1.min(part.len()));
            let parsed: Option<u64> = val.parse().ok();
            match (key, parsed) {
                ("m", Some(v)) => m = Some(v as usize),
                ("h", Some(v)) => h = Some(v as usize),
                ("s", Some(v)) => seed = v,
                _ => return Err(Error::InvalidSpec(format!("unknown group {name}"))),
            }
        }
        return match (m, h) {
            (Some(m), Some(h)) => random_step2(m, h, seed),
            _ => Err(Error::InvalidSpec(format!("unknown group {name}"))),
        };
    }
    if let Some(rest) = lower.strip_prefix('h') {
        if let Ok(n) = rest.parse::<usize>() {
            return heisenberg(n);
        }
    }
    Err(Error::InvalidSpec(format!("unknown group {name}")))
}

/// A point of a group together with the group it lives in.
#[derive(Debug, Clone)]
pub struct Point {
    group: Group,
    coords: Vec<f64>,
}

fn same_group(a: &Group, b: &Group) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl Point {
    pub fn new(group: &Group, coords: Vec<f64>) -> Result<Point> {
        group.check_len(&coords)?;
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite coordinate".into()));
        }
        Ok(Point {
            group: group.clone(),
            coords,
        })
    }

    pub fn identity(group: &Group) -> Point {
        Point {
            group: group.clone(),
            coords: group.identity(),
        }
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn multiply(&self, other: &Point) -> Result<Point> {
        if !same_group(&self.group, &other.group) {
            return Err(Error::GroupMismatch);
        }
        Ok(Point {
            group: self.group.clone(),
            coords: self.group.mul(&self.coords, &other.coords),
        })
    }

    pub fn inverse(&self) -> Point {
        Point {
            group: self.group.clone(),
            coords: self.group.inv(&self.coords),
        }
    }

    pub fn dilate(&self, lambda: f64) -> Result<Point> {
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveDilation(lambda));
        }
        Ok(Point {
            group: self.group.clone(),
            coords: self.group.dil(lambda, &self.coords),
        })
    }

    pub fn hom_norm(&self) -> f64 {
        self.group.norm(&self.coords)
    }

    /// `self^{-1} · q · self`.
    pub fn conjugate(&self, q: &Point) -> Result<Point> {
        if !same_group(&self.group, &q.group) {
            return Err(Error::GroupMismatch);
        }
        Ok(Point {
            group: self.group.clone(),
            coords: self.group.conj(&self.coords, &q.coords),
        })
    }

    /// Layered residual `P(p, q) = p^{-1} q p - q`; the first layer is exactly zero.
    pub fn conjugation_residual(&self, q: &Point) -> Result<Vec<Vec<f64>>> {
        let c = self.conjugate(q)?;
        let diff: Vec<f64> = c.coords.iter().zip(&q.coords).map(|(a, b)| a - b).collect();
        let layered = split_layers(&self.group, &diff);
        assert!(
            layered[0].iter().all(|&x| x == 0.0),
            "first-layer conjugation residual must vanish"
        );
        Ok(layered)
    }

    /// Left-invariant field `X_j` (1-based) at this point.
    pub fn left_invariant_field(&self, j: usize) -> Result<TangentVector> {
        self.group.check_index(j)?;
        Ok(TangentVector {
            base: self.coords.clone(),
            coeffs: self.group.left_field(j, &self.coords),
        })
    }
}

/// Split a coordinate vector into its layers.
pub fn split_layers(group: &GroupSpec, v: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(group.step());
    let mut start = 0;
    for &d in group.layer_dims() {
        out.push(v[start..start + d].to_vec());
        start += d;
    }
    out
}

/// Coefficients of a tangent vector in the coordinate frame at `base`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentVector {
    pub base: Vec<f64>,
    pub coeffs: Vec<f64>,
}

/// Fit `C` in `|P^i(p,q)| <= C Σ_{j<i} ‖q^j‖` over samples from the box `[-r, r]^n`.
///
/// `‖q^j‖` is the Euclidean norm of the layer-j block of q.
pub fn fit_conjugation_constant(group: &GroupSpec, radius: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = group.dim();
    let mut c: f64 = 0.0;
    for _ in 0..samples {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
        c = c.max(conjugation_ratio(group, &p, &q));
    }
    c
}

/// Largest ratio `|P^i| / Σ_{j<i} ‖q^j‖` over layers i >= 2 for one pair.
pub fn conjugation_ratio(group: &GroupSpec, p: &[f64], q: &[f64]) -> f64 {
    let c = group.conj(p, q);
    let diff: Vec<f64> = c.iter().zip(q).map(|(a, b)| a - b).collect();
    let layers_p = split_layers(group, &diff);
    let layers_q = split_layers(group, q);
    let mut best: f64 = 0.0;
    for i in 1..layers_p.len() {
        let lhs = euclid(&layers_p[i]);
        let rhs: f64 = layers_q[..i].iter().map(|l| euclid(l)).sum();
        if rhs > 0.0 {
            best = best.max(lhs / rhs);
        }
    }
    best
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
