//! Acceptance gate: one PASS/FAIL line per criterion, at the stated tolerances.

use std::time::{Duration, Instant};

use carnot_core::area::{perimeter, unit_normal, GradientSource, PerimeterOptions};
use carnot_core::catalog::{
    c1_function, characteristic_parametrization, engel_phi_alpha, heisenberg_characteristic, run_check,
    serapioni, serapioni_holder_options, serapioni_quotient, serapioni_value, C1Kind, CatalogEntry, CheckKind,
};
use carnot_core::fields::{
    curve_residual, field_invariance_check, flow, flow_two_sided, translate_curve, Backend, Direction, FlowOptions,
    ProjectedField,
};
use carnot_core::free_lift::{FreeGroupSpec, ProjectionPi};
use carnot_core::group::{builtin, engel, free_step2, heisenberg, random_step2, step2_closed_form_mul, Group, GroupKind};
use carnot_core::ode::stencil_derivative;
use carnot_core::regularity::{
    broad_star_check, curve_holder_bounds, estimate_intrinsic_gradient, little_holder_modulus,
    vertical_holder_modulus, BroadStarOptions, CurveSource, GradientMethod, HolderVerdict, LevelSet, Verdict,
    VerticalOptions,
};
use carnot_core::sampling::Region;
use carnot_core::splitting::{GraphFunction, Splitting};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, Box<dyn std::error::Error>>;

fn fail<T>(msg: String) -> Result<T, Box<dyn std::error::Error>> {
    Err(msg.into())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), Box<dyn std::error::Error>> {
    if cond {
        Ok(())
    } else {
        fail(msg())
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-r..r)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- criterion 1

/// `x + y + ½ Σ c^k_ij x_i y_j` over the full table.
fn step2_oracle(g: &Group, p: &[f64], q: &[f64]) -> Vec<f64> {
    let n = g.dim();
    let mut z: Vec<f64> = p.iter().zip(q).map(|(a, b)| a + b).collect();
    for i in 1..=n {
        for j in 1..=n {
            for k in 1..=n {
                let c = g.structure_constant(i, j, k);
                if c != 0.0 {
                    z[k - 1] += 0.5 * c * p[i - 1] * q[j - 1];
                }
            }
        }
    }
    z
}

/// Engel law written out by hand.
fn engel_oracle(x: &[f64], y: &[f64]) -> Vec<f64> {
    let b3 = x[0] * y[1] - x[1] * y[0];
    vec![
        x[0] + y[0],
        x[1] + y[1],
        x[2] + y[2] + 0.5 * b3,
        x[3] + y[3] + 0.5 * (x[0] * y[2] - x[2] * y[0]) + (x[0] - y[0]) * b3 / 12.0,
    ]
}

fn criterion_1() -> Check {
    let groups: Vec<Group> = vec![
        heisenberg(1)?,
        heisenberg(2)?,
        random_step2(4, 3, 7)?,
        free_step2(2)?,
        free_step2(3)?,
        free_step2(4)?,
        engel(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut assoc, mut closed): (f64, f64) = (0.0, 0.0);
    for g in &groups {
        let n = g.dim();
        for _ in 0..1000 {
            let p = uniform(&mut rng, n, 1.0);
            let q = uniform(&mut rng, n, 1.0);
            let r = uniform(&mut rng, n, 1.0);
            let lhs = g.mul(&g.mul(&p, &q), &r);
            let rhs = g.mul(&p, &g.mul(&q, &r));
            assoc = assoc.max(max_diff(&lhs, &rhs));
            let bch = g.mul(&p, &q);
            let mut forms = Vec::new();
            if g.step() == 2 {
                forms.push(step2_oracle(g, &p, &q));
                forms.push(step2_closed_form_mul(&g.step2_matrices().unwrap(), &p, &q));
            }
            if let GroupKind::Free { m } = g.kind() {
                forms.push(FreeGroupSpec::new(*m)?.mul_closed_form(&p, &q));
            }
            if *g.kind() == GroupKind::Engel {
                forms.push(engel_oracle(&p, &q));
            }
            ensure(!forms.is_empty(), || format!("no closed form for {}", g.name()))?;
            for f in forms {
                closed = closed.max(max_diff(&f, &bch));
            }
        }
    }
    ensure(assoc < 1e-10, || format!("associativity residual {assoc:e}"))?;
    ensure(closed < 1e-12, || format!("closed form vs BCH {closed:e}"))?;
    Ok(format!("associativity {assoc:.1e}, closed form vs BCH {closed:.1e}"))
}

// ---------------------------------------------------------------- criterion 2

fn polynomial(sp: &Splitting, seed: u64) -> GraphFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = sp.k();
    let d = sp.w_dim();
    let coef: Vec<Vec<f64>> = (0..k).map(|_| uniform(&mut rng, d + 2, 1.0)).collect();
    GraphFunction::new(sp, "polynomial", move |w| {
        coef.iter()
            .map(|c| {
                let lin: f64 = w.iter().zip(&c[2..]).map(|(x, a)| a * x).sum();
                c[0] + lin + c[1] * w[0] * w[d - 1]
            })
            .collect()
    })
}

/// Heisenberg projected fields: `X_j` off the graph directions, `∂_{n+i} + φ_i ∂_{2n+1}`.
fn heisenberg_oracle(n: usize, k: usize, x: &[f64], phi: &[f64], j: usize) -> Vec<f64> {
    let mut v = vec![0.0; 2 * n + 1];
    v[j - 1] = 1.0;
    if j <= n {
        v[2 * n] = -0.5 * x[n + j - 1];
    } else if j <= 2 * n {
        let i = j - n;
        v[2 * n] = if i <= k { phi[i - 1] } else { 0.5 * x[i - 1] };
    }
    v
}

/// Step 2, k = 1: `X_j + Σ_i c^i_{1j} φ ∂_i` with `X_j = ∂_j + ½ Σ_{l,i} x_l c^i_{lj} ∂_i`.
fn step2_field_oracle(g: &Group, x: &[f64], phi: f64, j: usize) -> Vec<f64> {
    let n = g.dim();
    let m = g.rank();
    let mut v = vec![0.0; n];
    v[j - 1] = 1.0;
    if j <= m {
        for i in m + 1..=n {
            let mut s = 0.0;
            for l in 1..=m {
                s += 0.5 * x[l - 1] * g.structure_constant(l, j, i);
            }
            v[i - 1] = s + g.structure_constant(1, j, i) * phi;
        }
    }
    v
}

fn engel_field_oracle(phi: f64, j: usize) -> Vec<f64> {
    match j {
        2 => vec![0.0, 1.0, phi, phi * phi / 2.0],
        3 => vec![0.0, 0.0, 1.0, phi],
        _ => vec![0.0, 0.0, 0.0, 1.0],
    }
}

fn criterion_2() -> Check {
    let cases: Vec<(Group, usize)> = vec![
        (heisenberg(1)?, 1),
        (heisenberg(2)?, 1),
        (heisenberg(2)?, 2),
        (heisenberg(3)?, 2),
        (random_step2(4, 3, 11)?, 1),
        (free_step2(3)?, 1),
        (engel(), 1),
    ];
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (g, k) in &cases {
        let sp = Splitting::new(g, *k)?;
        let phi = polynomial(&sp, 20 + *k as u64);
        let fields: Vec<(usize, ProjectedField)> = (k + 1..=g.dim())
            .map(|j| Ok((j, ProjectedField::new(&phi, Direction::Basis(j), Backend::Generic)?)))
            .collect::<carnot_core::Result<_>>()?;
        for _ in 0..1000 {
            let w = uniform(&mut rng, sp.w_dim(), 1.0);
            let x = sp.embed_w(&w);
            let value = phi.eval(&w)?;
            for (j, field) in &fields {
                let got = field.eval_full(&w)?;
                let want = match g.kind() {
                    GroupKind::Heisenberg { n } => heisenberg_oracle(*n, *k, &x, &value, *j),
                    GroupKind::Engel => engel_field_oracle(value[0], *j),
                    _ => step2_field_oracle(g, &x, value[0], *j),
                };
                worst = worst.max(max_diff(&got, &want));
            }
        }
    }
    ensure(worst < 1e-10, || format!("generic vs closed form {worst:e}"))?;
    Ok(format!("generic vs closed forms {worst:.1e} on {} splittings", cases.len()))
}

// ---------------------------------------------------------------- criterion 3

fn criterion_3() -> Check {
    let groups: Vec<Group> = vec![heisenberg(1)?, heisenberg(2)?, random_step2(3, 2, 5)?, free_step2(3)?, engel()];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut fields_worst, mut curves_worst, mut verdict_worst): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for g in &groups {
        let sp = Splitting::new(g, 1)?;
        let phi = polynomial(&sp, 30);
        let f = polynomial(&sp, 31);
        let d = sp.w_dim();
        for _ in 0..100 {
            let q = uniform(&mut rng, g.dim(), 0.5);
            let w = uniform(&mut rng, d, 0.5);
            for j in 2..=g.dim() {
                let field = ProjectedField::basis(&phi, j)?;
                fields_worst = fields_worst.max(field_invariance_check(&field, &q, &f, &w, 1e-4)?);
            }
            let j = rng.gen_range(2..=g.rank());
            let field = ProjectedField::basis(&phi, j)?;
            let curve = flow(&field, &w, 0.0, 0.1, FlowOptions::fast(1e-3))?;
            let moved = translate_curve(&curve, &q);
            curves_worst = curves_worst.max(curve_residual(&moved)?);
            let before = curve_holder_bounds(std::slice::from_ref(&curve))?;
            let after = curve_holder_bounds(std::slice::from_ref(&moved))?;
            for (a, b) in before.iter().zip(&after) {
                verdict_worst = verdict_worst.max((a.constant - b.constant).abs());
            }
        }
    }
    ensure(fields_worst < 1e-6, || format!("field invariance residual {fields_worst:e}"))?;
    ensure(curves_worst < 1e-6, || format!("translated curve residual {curves_worst:e}"))?;
    ensure(verdict_worst < 1e-10, || format!("translated curve constants differ by {verdict_worst:e}"))?;
    Ok(format!(
        "fields {fields_worst:.1e}, curves {curves_worst:.1e}, report drift {verdict_worst:.1e}"
    ))
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Check {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for name in ["h1", "h2", "step2_m3_h2_s5", "free3", "engel"] {
        let g = builtin(name)?;
        for kind in [C1Kind::Quadratic, C1Kind::Trig, C1Kind::Exp] {
            let entry = c1_function(&g, kind, 4)?;
            let phi = entry.phi()?;
            let level = GradientMethod::level_set(LevelSet::of_graph(phi));
            let sp = phi.splitting();
            for j in sp.horizontal_w_directions() {
                let field = ProjectedField::basis(phi, j)?;
                let h = 1e-3;
                let curve = flow_two_sided(&field, &entry.anchor, 0.05, 0.05, FlowOptions::fast(h))?;
                let values: Vec<f64> = curve.phi_values()?.iter().map(|v| v[0]).collect();
                for i in (5..values.len() - 5).step_by(10) {
                    let along = stencil_derivative(&values, h, i);
                    let grad = estimate_intrinsic_gradient(phi, &curve.states[i], &level)?;
                    worst = worst.max((along - grad.matrix[j - 2]).abs());
                    checked += 1;
                }
            }
        }
    }
    ensure(worst < 1e-6, || format!("derivative along flows vs level-set gradient {worst:e}"))?;
    Ok(format!("{checked} comparisons, worst {worst:.1e}"))
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5() -> Check {
    let start = Instant::now();
    let half = engel_phi_alpha(0.5)?;
    let omega = half.omega.as_ref().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut formula: f64 = 0.0;
    for _ in 0..1000 {
        let w = uniform(&mut rng, 3, 1.0);
        let want = if w[2] >= 0.0 { w[2].sqrt() / 4.0 } else { 0.0 };
        // one horizontal column (X_2); X_3 is not horizontal and carries no equation
        let got = omega(&w);
        ensure(got.len() == 1, || format!("omega has {} components", got.len()))?;
        formula = formula.max((got[0] - want).abs());
    }
    ensure(formula < 1e-14, || format!("omega differs from x4^(1/2)/4 by {formula:e}"))?;
    let broad = run_check(&half, CheckKind::BroadStar, 0)?;
    ensure(broad.verdict == Verdict::Pass, || format!("broad* at 1/2: residual {:e}", broad.max_residual))?;
    let uid = run_check(&half, CheckKind::Uid, 0)?;
    ensure(uid.moduli[0].verdict == HolderVerdict::Vanishing, || {
        format!("uid modulus at 1/2 is {:?}", uid.moduli[0].verdict)
    })?;
    let vertical = run_check(&half, CheckKind::VerticalHolder, 0)?;
    ensure(vertical.moduli.iter().all(|m| m.is_vanishing()), || {
        "vertical moduli at 1/2 do not vanish".to_string()
    })?;

    let third = engel_phi_alpha(1.0 / 3.0)?;
    let radii: Vec<f64> = (0..=10).map(|i| 10f64.powf(-1.0 - 0.5 * i as f64)).collect();
    let opts = VerticalOptions {
        radii,
        starts: 0,
        anchors: vec![vec![0.0; 3]],
        ..VerticalOptions::default()
    };
    let reps = vertical_holder_modulus(third.phi()?, &third.region, &third.curves, &opts)?;
    let x4 = reps.iter().find(|r| r.label == "X4").ok_or("no X4 modulus")?;
    let flat = x4.moduli.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    ensure(flat < 1e-12, || format!("1/3-modulus along x4 deviates from 1 by {flat:e}"))?;
    let uid3 = run_check(&third, CheckKind::Uid, 0)?;
    ensure(uid3.verdict == Verdict::Fail, || "uid passes at alpha = 1/3".to_string())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "broad* residual {:.1e}, x4 modulus flat to {flat:.1e}, {:.1}s",
        broad.max_residual,
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6() -> Check {
    let mut rel: f64 = 0.0;
    for n in 2..=50u64 {
        let nf = n as f64;
        let want = (nf * nf + 1.0) / nf.powf(1.5);
        rel = rel.max((serapioni_quotient(n) - want).abs() / want);
    }
    ensure(rel < 1e-12, || format!("quotient formula relative error {rel:e}"))?;
    let f = |x: &[f64]| Ok(vec![serapioni_value(x[0])]);
    for eps in [1.0, 0.1, 0.01] {
        let region = Region::new(vec![-eps], vec![eps])?;
        let rep = little_holder_modulus(&f, 0.5, &region, &serapioni_holder_options(&region, 0))?;
        ensure(!rep.is_vanishing(), || format!("h^(1/2) modulus vanishes on (-{eps}, {eps})"))?;
    }
    let away = Region::new(vec![0.05], vec![1.0])?;
    let rep = little_holder_modulus(&f, 0.5, &away, &serapioni_holder_options(&away, 0))?;
    ensure(rep.is_vanishing(), || format!("h^(1/2) on [0.05, 1] is {:?}", rep.verdict))?;
    let entry = serapioni();
    let pointwise = run_check(&entry, CheckKind::PointwiseQuotient, 0)?;
    ensure(pointwise.max_residual < 1e-2, || {
        format!("pointwise quotient at 0 reaches {:e}", pointwise.max_residual)
    })?;
    Ok(format!(
        "quotient rel. error {rel:.1e}, pointwise quotient {:.1e}",
        pointwise.max_residual
    ))
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7() -> Check {
    let start = Instant::now();
    let mut runs = 0;
    for name in ["h2", "step2_m3_h2_s5", "free3"] {
        let g = builtin(name)?;
        for kind in C1Kind::ALL {
            let entry = c1_function(&g, kind, 7)?;
            let broad = run_check(&entry, CheckKind::BroadStar, 0)?;
            ensure(broad.verdict == Verdict::Pass, || format!("{name} {}: broad* fails", kind.name()))?;
            let vertical = run_check(&entry, CheckKind::VerticalHolder, 0)?;
            ensure(vertical.moduli.iter().all(|m| m.is_vanishing()), || {
                format!("{name} {}: vertical moduli do not vanish", kind.name())
            })?;
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("{runs}/{runs} vanishing, {:.1}s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8() -> Check {
    let targets: Vec<Group> = vec![heisenberg(1)?, heisenberg(2)?, random_step2(3, 2, 5)?];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut hom: f64 = 0.0;
    for g in &targets {
        let pi = ProjectionPi::new(g)?;
        let n = pi.source().dim();
        for _ in 0..10_000 {
            let p = uniform(&mut rng, n, 1.0);
            let q = uniform(&mut rng, n, 1.0);
            hom = hom.max(pi.homomorphism_residual(&p, &q)?);
        }
    }
    ensure(hom < 1e-13, || format!("homomorphism residual {hom:e}"))?;

    let mut proj: f64 = 0.0;
    let mut transported = 0;
    for (g, kind) in [
        (&targets[0], C1Kind::Quadratic),
        (&targets[1], C1Kind::Trig),
        (&targets[2], C1Kind::Exp),
    ] {
        let pi = ProjectionPi::new(g)?;
        let entry = c1_function(g, kind, 8)?;
        let phi = entry.phi()?;
        let psi = pi.lift_function(phi)?;
        for j in 2..=g.rank() {
            let w = uniform(&mut rng, phi.splitting().w_dim(), 0.3);
            let gamma = flow_two_sided(&ProjectedField::basis(phi, j)?, &w, 0.1, 0.1, FlowOptions::fast(1e-3))?;
            let lifted = pi.lift_curve(&psi, &gamma, &pi.section_w(&w))?;
            for (s, base) in lifted.states.iter().zip(&gamma.states) {
                proj = proj.max(max_diff(&pi.project_w(s), base));
            }
        }
        let omega = entry.omega.as_ref().unwrap();
        let opts = BroadStarOptions {
            diameter: entry.region.diameter(),
            ..BroadStarOptions::default()
        };
        let below = broad_star_check(phi, omega, &entry.anchor, &CurveSource::Flow, &opts)?;
        let above = broad_star_check(
            &psi,
            &pi.lift_matrix_fn(omega),
            &pi.section_w(&entry.anchor),
            &CurveSource::Flow,
            &opts,
        )?;
        ensure(below.verdict == above.verdict && below.verdict == Verdict::Pass, || {
            format!("{} {}: broad* {:?} in G, {:?} in F", g.name(), kind.name(), below.verdict, above.verdict)
        })?;
        transported += 1;
    }
    ensure(proj < 1e-10, || format!("lifted curve projection residual {proj:e}"))?;
    Ok(format!(
        "homomorphism {hom:.1e}, projection {proj:.1e}, broad* preserved on {transported} pairs"
    ))
}

// ---------------------------------------------------------------- criterion 9

fn criterion_9() -> Check {
    let h1 = Splitting::new(&heisenberg(1)?, 1)?;
    let unit = Region::new(vec![0.0, 0.0], vec![1.0, 1.0])?;
    let zero = perimeter(&GraphFunction::zero(&h1), &unit, &PerimeterOptions::default())?;
    ensure((zero.value - 1.0).abs() < 1e-12, || format!("zero graph perimeter {}", zero.value))?;

    let linear = GraphFunction::scalar(&h1, "x2", |w| w[0]);
    let mut sqrt2: f64 = 0.0;
    for cells in [4, 8, 16, 32] {
        let opts = PerimeterOptions {
            cells: Some(cells),
            ..PerimeterOptions::default()
        };
        sqrt2 = sqrt2.max((perimeter(&linear, &unit, &opts)?.value - 2f64.sqrt()).abs());
    }
    ensure(sqrt2 < 1e-4, || format!("x2 perimeter off sqrt(2) by {sqrt2:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut norm: f64 = 0.0;
    let mut agreement = Vec::new();
    for (name, kind) in [("h1", C1Kind::Trig), ("h2", C1Kind::Exp), ("engel", C1Kind::Quadratic)] {
        let entry = c1_function(&builtin(name)?, kind, 9)?;
        let phi = entry.phi()?;
        let analytic = GradientSource::Analytic(entry.omega.clone().unwrap());
        for _ in 0..100 {
            let w = uniform(&mut rng, phi.splitting().w_dim(), 0.5);
            for source in [&analytic, &GradientSource::Estimate] {
                let nu = unit_normal(phi, &w, source)?;
                norm = norm.max((nu.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs());
            }
        }
        let cells = Some(if phi.splitting().w_dim() == 2 { 16 } else { 6 });
        let a = perimeter(phi, &entry.region, &PerimeterOptions { cells, gradient: analytic })?;
        let b = perimeter(
            phi,
            &entry.region,
            &PerimeterOptions {
                cells,
                gradient: GradientSource::LevelSet(LevelSet::of_graph(phi)),
            },
        )?;
        let tol = a.error_estimate.max(b.error_estimate);
        let gap = (a.value - b.value).abs();
        ensure(gap <= tol, || format!("{name}: level-set vs intrinsic gap {gap:e} > quadrature {tol:e}"))?;
        agreement.push(format!("{gap:.0e}<={tol:.0e}"));
    }
    ensure(norm < 1e-12, || format!("unit normal off by {norm:e}"))?;
    Ok(format!(
        "zero graph {:.1e}, sqrt(2) {sqrt2:.1e}, normals {norm:.1e}, level-set gaps {}",
        (zero.value - 1.0).abs(),
        agreement.join(" ")
    ))
}

// ---------------------------------------------------------------- criterion 10

fn criterion_10() -> Check {
    let g = free_step2(3)?;
    let sp = Splitting::new(&g, 1)?;
    let zero = GraphFunction::zero(&sp);
    let mut worst: f64 = 0.0;
    for time in [1e-2, 1e-1] {
        let reach = carnot_core::regularity::vertical_reach(&zero, &[0.0; 5], (2, 3), time, 1e-3)?;
        let step = |j: usize, t: f64| {
            let mut v = vec![0.0; g.dim()];
            v[j - 1] = t;
            v
        };
        let mut p = g.identity();
        for (j, t) in [(2, time), (3, time), (2, -time), (3, -time)] {
            p = g.mul(&p, &step(j, t));
        }
        let oracle = sp.project_w(&p);
        worst = worst.max(max_diff(&reach.displacement, &oracle));
        let moved: Vec<f64> = reach.displacement.iter().copied().filter(|x| x.abs() > 1e-14).collect();
        ensure(moved.len() == 1, || format!("T = {time}: displacement {:?}", reach.displacement))?;
        ensure((moved[0].abs() - time * time).abs() < 1e-12, || {
            format!("T = {time}: vertical move {:e}", moved[0])
        })?;
    }
    ensure(worst < 1e-12, || format!("reach vs BCH chain {worst:e}"))?;
    Ok(format!("one vertical coordinate moved by T^2, vs BCH {worst:.1e}"))
}

// ---------------------------------------------------------------- criterion 11

fn criterion_11() -> Check {
    let entry: CatalogEntry = heisenberg_characteristic();
    let phi = entry.phi()?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let w = uniform(&mut rng, 2, 1.0);
        let (x2, x3) = (w[0], w[1]);
        let s = x3.signum() * (x3 != 0.0) as i32 as f64;
        let want = [s * x3.abs().powf(2.0 / 3.0), x2, x3 - 0.5 * s * x2 * x3.abs().powf(2.0 / 3.0)];
        worst = worst.max(max_diff(&phi.graph_coords(&w)?, &want));
        worst = worst.max(max_diff(&characteristic_parametrization(x2, x3), &want));
    }
    ensure(worst < 1e-14, || format!("parametrization residual {worst:e}"))?;
    let tangent = run_check(&entry, CheckKind::TangentPlane, 0)?;
    ensure(tangent.max_residual <= 1e-3 && tangent.verdict == Verdict::Pass, || {
        format!("tangent tilt {:e}", tangent.max_residual)
    })?;
    let uid = run_check(&entry, CheckKind::Uid, 0)?;
    ensure(uid.moduli[0].verdict == HolderVerdict::Vanishing, || {
        format!("uid modulus at 0 is {:?}", uid.moduli[0].verdict)
    })?;
    Ok(format!(
        "parametrization {worst:.1e}, tangent tilt {:.1e}, uid slope {:.2}",
        tangent.max_residual, uid.moduli[0].fitted_slope
    ))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("group arithmetic", criterion_1),
        ("projected-field closed forms", criterion_2),
        ("invariance lemmas", criterion_3),
        ("C1 identity", criterion_4),
        ("Engel phi_alpha golden suite", criterion_5),
        ("Serapioni golden suite", criterion_6),
        ("step-2 propagation", criterion_7),
        ("free lift", criterion_8),
        ("area formula", criterion_9),
        ("commutator square", criterion_10),
        ("Heisenberg characteristic example", criterion_11),
    ];
    let mut failed = Vec::new();
    for (i, (title, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {title}: {detail} [{secs:.2}s]", i + 1),
            Err(e) => {
                println!("criterion {:>2} FAIL  {title}: {e} [{secs:.2}s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
