use carnot_core::area::{density, perimeter, GradientSource, PerimeterOptions};
use carnot_core::catalog::{c1_graph, serapioni_value, C1Kind};
use carnot_core::fields::{flow, Backend, Direction, FlowOptions, ProjectedField};
use carnot_core::free_lift::ProjectionPi;
use carnot_core::group::{builtin, Group};
use carnot_core::regularity::{HolderReport, HolderVerdict, Thresholds, VerificationReport};
use carnot_core::sampling::{dyadic_radii, Region};
use carnot_core::splitting::{GraphFunction, Splitting};
use proptest::prelude::*;

const GROUPS: [&str; 7] = ["h1", "h2", "free2", "free3", "step2_m3_h2_s5", "step2_m4_h3_s1", "engel"];

fn group(i: usize) -> Group {
    builtin(GROUPS[i % GROUPS.len()]).unwrap()
}

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 10)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn smooth(sp: &Splitting, seed: u64) -> GraphFunction {
    c1_graph(sp, C1Kind::Trig, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_law_axioms(gi in 0usize..7, p in coords(), q in coords(), r in coords()) {
        let g = group(gi);
        let n = g.dim();
        let (p, q, r) = (&p[..n], &q[..n], &r[..n]);
        let assoc = max_diff(&g.mul(&g.mul(p, q), r), &g.mul(p, &g.mul(q, r)));
        prop_assert!(assoc < 1e-10, "associativity {assoc:e}");
        prop_assert!(max_diff(&g.mul(p, &g.inv(p)), &g.identity()) < 1e-14);
        prop_assert_eq!(g.mul(p, &g.identity()), p.to_vec());
    }

    #[test]
    fn dilations_are_automorphisms(gi in 0usize..7, p in coords(), q in coords(), lambda in 0.05..3.0f64) {
        let g = group(gi);
        let n = g.dim();
        let (p, q) = (&p[..n], &q[..n]);
        let lhs = g.dil(lambda, &g.mul(p, q));
        let rhs = g.mul(&g.dil(lambda, p), &g.dil(lambda, q));
        prop_assert!(max_diff(&lhs, &rhs) < 1e-10 * (1.0 + lambda.powi(4)));
        let norm = g.norm(&g.dil(lambda, p));
        prop_assert!((norm - lambda * g.norm(p)).abs() < 1e-12 * (1.0 + norm));
        prop_assert!((g.norm(&g.inv(p)) - g.norm(p)).abs() < 1e-15);
    }

    #[test]
    fn left_fields_bracket_like_the_algebra(gi in 0usize..7, p in coords()) {
        let g = group(gi);
        let n = g.dim();
        let p = &p[..n];
        let h = 1e-4;
        // Jacobian-vector product of the field X_b at p along v
        let jvp = |b: usize, v: &[f64]| -> Vec<f64> {
            let plus: Vec<f64> = p.iter().zip(v).map(|(x, d)| x + h * d).collect();
            let minus: Vec<f64> = p.iter().zip(v).map(|(x, d)| x - h * d).collect();
            g.left_field(b, &plus).iter().zip(&g.left_field(b, &minus)).map(|(a, c)| (a - c) / (2.0 * h)).collect()
        };
        for i in 1..=n {
            for j in (i + 1)..=n {
                let xi = g.left_field(i, p);
                let xj = g.left_field(j, p);
                let comm: Vec<f64> = jvp(j, &xi).iter().zip(&jvp(i, &xj)).map(|(a, b)| a - b).collect();
                let mut want = vec![0.0; n];
                for k in 1..=n {
                    let c = g.structure_constant(i, j, k);
                    for (w, x) in want.iter_mut().zip(g.left_field(k, p)) {
                        *w += c * x;
                    }
                }
                prop_assert!(max_diff(&comm, &want) < 1e-8, "[X{i}, X{j}] at {p:?}");
            }
        }
    }

    #[test]
    fn splitting_factors_recompose(gi in 0usize..7, p in coords(), k in 1usize..3) {
        let g = group(gi);
        let n = g.dim();
        let Ok(sp) = Splitting::new(&g, k) else { return Ok(()); };
        let p = &p[..n];
        let w = sp.embed_w(&sp.project_w(p));
        let l = sp.embed_l(&sp.project_l(p));
        prop_assert!(max_diff(&g.mul(&w, &l), p) < 1e-14);
    }

    #[test]
    fn translations_act_on_graphs(gi in 0usize..7, q in coords(), w in coords(), seed in 0u64..50) {
        let g = group(gi);
        let sp = Splitting::new(&g, 1).unwrap();
        let d = sp.w_dim();
        let q = &q[..g.dim()];
        let w = &w[..d];
        let phi = smooth(&sp, seed);
        // graph(φ_q) = q · graph(φ)
        let moved = g.mul(q, &phi.graph_coords(w).unwrap());
        let phi_q = phi.translate(q);
        let on_graph = phi_q.graph_coords(&sp.project_w(&moved)).unwrap();
        prop_assert!(max_diff(&on_graph, &moved) < 1e-12);
        // (φ_q)_{q^{-1}} = φ
        let back = phi_q.translate(&g.inv(q));
        prop_assert!(max_diff(&back.eval(w).unwrap(), &phi.eval(w).unwrap()) < 1e-12);
    }

    #[test]
    fn projected_fields_are_tangent_and_agree(gi in 0usize..7, w in coords(), seed in 0u64..50) {
        let g = group(gi);
        let sp = Splitting::new(&g, 1).unwrap();
        let w = &w[..sp.w_dim()];
        let phi = smooth(&sp, seed);
        for j in 2..=g.dim() {
            let generic = ProjectedField::new(&phi, Direction::Basis(j), Backend::Generic).unwrap();
            let closed = ProjectedField::basis(&phi, j).unwrap();
            let a = generic.eval_full(w).unwrap();
            let b = closed.eval_full(w).unwrap();
            prop_assert!(a[0].abs() < 1e-12);
            prop_assert_eq!(b[0], 0.0);
            prop_assert!(max_diff(&a, &b) < 1e-10);
        }
    }

    #[test]
    fn flows_have_triangular_form(gi in 0usize..7, w in coords(), seed in 0u64..50, jr in 0usize..8) {
        let g = group(gi);
        let sp = Splitting::new(&g, 1).unwrap();
        let w: Vec<f64> = w[..sp.w_dim()].iter().map(|x| 0.5 * x).collect();
        let phi = smooth(&sp, seed);
        let j = 2 + jr % (g.dim() - 1);
        let curve = flow(&ProjectedField::basis(&phi, j).unwrap(), &w, 0.0, 0.2, FlowOptions::fast(1e-2)).unwrap();
        prop_assert!(curve.triangular_residual() < 1e-10);
        prop_assert_eq!(&curve.states[0], &w);
    }

    #[test]
    fn projection_is_a_horizontal_homomorphism(gi in 0usize..7, p in coords(), q in coords()) {
        let g = group(gi);
        prop_assume!(g.step() == 2);
        let pi = ProjectionPi::new(&g).unwrap();
        let n = pi.source().dim();
        let mut p = p.clone();
        let mut q = q.clone();
        p.resize(n, 0.25);
        q.resize(n, -0.5);
        prop_assert!(pi.homomorphism_residual(&p, &q).unwrap() < 1e-13);
        let image = pi.project(&p).unwrap();
        prop_assert_eq!(&image[..g.rank()], &p[..g.rank()]);
        let back = pi.project(&pi.section(&image).unwrap()).unwrap();
        prop_assert!(max_diff(&back, &image) < 1e-12);
    }

    #[test]
    fn area_density_is_at_least_one(gi in 0usize..7, w in coords(), seed in 0u64..50) {
        let g = group(gi);
        let sp = Splitting::new(&g, 1).unwrap();
        let phi = smooth(&sp, seed);
        let rho = density(&phi, &GradientSource::Estimate, &w[..sp.w_dim()]).unwrap();
        prop_assert!(rho >= 1.0);
    }

    #[test]
    fn holder_verdicts_follow_thresholds(moduli in prop::collection::vec(0.0..10.0f64, 6..12)) {
        let radii = dyadic_radii(0.1, moduli.len());
        let th = Thresholds::default();
        let rep = HolderReport::from_moduli("m", 0.5, radii, moduli.clone(), th).unwrap();
        let first = moduli[0];
        let last = *moduli.last().unwrap();
        match rep.verdict {
            HolderVerdict::Vanishing => prop_assert!(
                last <= th.zero_floor || (rep.fitted_slope >= th.min_slope && last <= th.decay_ratio * first)
            ),
            HolderVerdict::Unbounded => prop_assert!(rep.fitted_slope <= -th.min_slope),
            HolderVerdict::BoundedNonvanishing => prop_assert!(last > th.zero_floor),
        }
    }

    #[test]
    fn report_verdict_is_residual_against_tolerance(res in 0.0..2.0f64, tol in 0.0..2.0f64) {
        let rep = VerificationReport::new("t", "g", Vec::new(), tol).with_max_residual(res);
        prop_assert_eq!(rep.passed(), res <= tol);
    }

    #[test]
    fn serapioni_matches_the_single_active_factor(x in -1.0..1.0f64) {
        // supports [1/n - 1/n^3, 1/n + 1/n^3] are disjoint, so at most one factor is active
        let mut want = x.abs();
        for n in 2..200u64 {
            let c = 1.0 / n as f64;
            let r = c * c * c;
            if (x - c).abs() <= r {
                want *= (n * n * n) as f64 * (x - c).abs();
            }
        }
        prop_assert!((serapioni_value(x) - want).abs() <= 1e-15);
    }
}

#[test]
fn perimeter_grows_with_the_box() {
    let sp = Splitting::new(&builtin("h1").unwrap(), 1).unwrap();
    let phi = smooth(&sp, 2);
    let mut last = 0.0;
    for r in [0.1, 0.2, 0.4, 0.8] {
        let region = Region::cube(&[0.0, 0.0], r);
        let v = perimeter(&phi, &region, &PerimeterOptions::default()).unwrap().value;
        assert!(v > last);
        last = v;
    }
}
