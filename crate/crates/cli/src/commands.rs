//! Verb implementations. Each returns an [`Outcome`]; writing happens in `main`.

use carnot_core::area::{perimeter, unit_normal, PerimeterOptions};
use carnot_core::catalog::{lookup, run_entry, CatalogParams, NAMES};
use carnot_core::fields::{curve_residual, flow_two_sided, FlowOptions, ProjectedField};
use carnot_core::free_lift::ProjectionPi;
use carnot_core::group::Group;
use carnot_core::regularity::{
    broad_check, broad_star_check, estimate_intrinsic_gradient, intrinsic_lipschitz_check, propagation_check,
    uid_residual, vertical_holder_modulus, GradientMethod, PropagationOptions, UidOptions, Verdict,
    VerificationReport, VerticalOptions,
};
use carnot_core::sampling::derive_seed;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Problem, RunConfig};
use crate::CliError;

/// A CSV table written next to the JSON report.
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Table {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

pub struct Outcome {
    pub command: String,
    pub verdict: Option<Verdict>,
    /// NaN residuals or solver aborts.
    pub breakdown: bool,
    pub summary: String,
    pub result: Value,
    pub tables: Vec<Table>,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(e.to_string()))
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn report_tables(report: &VerificationReport) -> Vec<Table> {
    let mut residuals = Table::new("residuals", &["label", "point", "residual"]);
    for r in &report.residuals {
        let point: Vec<String> = r.point.iter().map(|x| fmt(*x)).collect();
        residuals
            .rows
            .push(vec![r.label.clone(), point.join(" "), fmt(r.residual)]);
    }
    let mut out = vec![residuals];
    if !report.moduli.is_empty() {
        let mut moduli = Table::new("moduli", &["label", "exponent", "radius", "modulus"]);
        for m in &report.moduli {
            for [rho, f] in m.rows() {
                moduli
                    .rows
                    .push(vec![m.label.clone(), fmt(m.exponent), fmt(rho), fmt(f)]);
            }
        }
        out.push(moduli);
    }
    out
}

fn from_report(command: &str, report: VerificationReport, extra: Value) -> Result<Outcome, CliError> {
    let basis = if report.tolerance == f64::MAX {
        "modulus verdicts".to_string()
    } else {
        format!("tolerance {:e}", report.tolerance)
    };
    let summary = format!(
        "{command}: {} (max residual {:e}, {basis})",
        if report.passed() { "pass" } else { "fail" },
        report.max_residual,
    );
    let mut result = to_value(&report)?;
    if let (Value::Object(map), Value::Object(more)) = (&mut result, extra) {
        map.extend(more);
    }
    Ok(Outcome {
        command: command.into(),
        verdict: Some(report.verdict),
        breakdown: report.max_residual.is_nan(),
        summary,
        tables: report_tables(&report),
        result,
    })
}

pub fn group(group: &Group) -> Result<Outcome, CliError> {
    let brackets = group.nonzero_brackets();
    let mut table = Table::new("brackets", &["i", "j", "k", "c"]);
    for b in &brackets {
        table
            .rows
            .push(vec![b.i.to_string(), b.j.to_string(), b.k.to_string(), fmt(b.value)]);
    }
    let result = json!({
        "name": group.name(),
        "dimension": group.dim(),
        "rank": group.rank(),
        "step": group.step(),
        "layer_dims": group.layer_dims(),
        "degrees": group.degrees(),
        "brackets": to_value(&brackets)?,
    });
    let mut summary = format!(
        "group {}: valid, dimension {}, step {}, layers {:?}\n",
        group.name(),
        group.dim(),
        group.step(),
        group.layer_dims()
    );
    for b in &brackets {
        summary.push_str(&format!("  [X{}, X{}]: {} X{}\n", b.i, b.j, b.value, b.k));
    }
    Ok(Outcome {
        command: "group".into(),
        verdict: Some(Verdict::Pass),
        breakdown: false,
        summary: summary.trim_end().to_string(),
        result,
        tables: vec![table],
    })
}

pub fn flow(cfg: &RunConfig, p: &Problem) -> Result<Outcome, CliError> {
    let fc = &cfg.checks.flow;
    let sp = p.phi.splitting();
    let j = fc.direction.unwrap_or(sp.k() + 1);
    let field = ProjectedField::basis(&p.phi, j)?;
    let curve = flow_two_sided(&field, &p.point, fc.t_back, fc.t_fwd, FlowOptions { step: fc.step, error_estimate: true })?;
    let residual = curve_residual(&curve)?;
    let mut header = vec!["t".to_string()];
    header.extend((sp.k() + 1..=sp.n()).map(|i| format!("x{i}")));
    header.extend((1..=sp.k()).map(|i| format!("phi{i}")));
    let table = Table {
        name: "curve".into(),
        header,
        rows: curve
            .table()?
            .iter()
            .map(|row| row.iter().map(|x| fmt(*x)).collect())
            .collect(),
    };
    let verdict = if residual <= fc.tolerance && !curve.meta.terminated_early {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let end = curve.states.last().cloned().unwrap_or_default();
    Ok(Outcome {
        command: "flow".into(),
        verdict: Some(verdict),
        breakdown: residual.is_nan(),
        summary: format!("flow along D{j}: {} samples, ODE residual {residual:e}, end {end:?}", curve.times.len()),
        result: json!({
            "direction": j,
            "start": curve.start,
            "end": end,
            "samples": curve.times.len(),
            "ode_residual": residual,
            "tolerance": fc.tolerance,
            "meta": to_value(&curve.meta)?,
        }),
        tables: vec![table],
    })
}

fn uid_options(cfg: &RunConfig, p: &Problem, anchored: bool) -> UidOptions {
    let mut opts = cfg.checks.uid.clone().unwrap_or_else(|| {
        let mut o = UidOptions::default();
        if let Some(e) = &p.entry {
            o.radii = e.uid_radii.clone();
        }
        o
    });
    opts.anchored = anchored;
    opts.seed = cfg.seed;
    opts
}

fn gradient_at(p: &Problem, w: &[f64]) -> Result<(Vec<f64>, &'static str), CliError> {
    if let Some(omega) = &p.omega {
        let g = omega(w);
        if g.iter().all(|x| x.is_finite()) {
            return Ok((g, "omega"));
        }
    }
    let est = estimate_intrinsic_gradient(&p.phi, w, &GradientMethod::difference_quotient())?;
    Ok((est.matrix, "difference_quotient"))
}

fn vertical_options(cfg: &RunConfig, p: &Problem) -> VerticalOptions {
    let mut opts = cfg.checks.vertical.clone().unwrap_or_else(|| VerticalOptions {
        anchors: vec![p.point.clone()],
        ..VerticalOptions::default()
    });
    opts.seed = cfg.seed;
    opts
}

pub fn verify(check: &str, cfg: &RunConfig, p: &Problem) -> Result<Outcome, CliError> {
    let command = format!("verify {check}");
    match check {
        "lipschitz" => {
            let mut opts = cfg.checks.lipschitz.clone().unwrap_or_default();
            opts.seed = cfg.seed;
            let est = intrinsic_lipschitz_check(&p.phi, &p.region, &opts)?;
            let mut report = est.report.clone();
            report.moduli.push(est.scales.clone());
            from_report(&command, report, json!({ "estimate": est.estimate }))
        }
        "id" | "uid" => {
            let (grad, source) = gradient_at(p, &p.point)?;
            let rep = uid_residual(&p.phi, &p.point, &grad, &uid_options(cfg, p, check == "id"))?;
            let report = VerificationReport::from_moduli(check, vec![rep]);
            from_report(&command, report, json!({ "point": p.point, "gradient": grad, "gradient_source": source }))
        }
        "broad" => {
            let mut opts = cfg.checks.broad.clone().unwrap_or_default();
            opts.seed = cfg.seed;
            let report = broad_check(&p.phi, &p.omega_or_numeric(), &p.region, &opts)?;
            from_report(&command, report, json!({ "omega_analytic": p.omega_analytic }))
        }
        "broadstar" => {
            let mut opts = cfg.checks.broadstar.clone().unwrap_or_else(|| carnot_core::regularity::BroadStarOptions {
                diameter: p.region.diameter(),
                ..Default::default()
            });
            opts.seed = cfg.seed;
            let report = broad_star_check(&p.phi, &p.omega_or_numeric(), &p.point, &p.curves, &opts)?;
            from_report(
                &command,
                report,
                json!({ "omega_analytic": p.omega_analytic, "curves": p.curves.name() }),
            )
        }
        "vholder" => {
            let reps = vertical_holder_modulus(&p.phi, &p.region, &p.curves, &vertical_options(cfg, p))?;
            from_report(&command, VerificationReport::from_moduli("vholder", reps), json!({ "curves": p.curves.name() }))
        }
        "propagation" => {
            let mut opts = PropagationOptions {
                broad: cfg.checks.broadstar.clone().unwrap_or_default(),
                vertical: vertical_options(cfg, p),
            };
            opts.broad.seed = cfg.seed;
            let report = propagation_check(&p.phi, &p.omega_or_numeric(), &p.region, &p.curves, &opts)?;
            from_report(&command, report, json!({ "omega_analytic": p.omega_analytic }))
        }
        other => Err(CliError::Config(format!("unknown check {other}"))),
    }
}

pub fn area(cfg: &RunConfig, p: &Problem) -> Result<Outcome, CliError> {
    let ac = &cfg.checks.area;
    let opts = PerimeterOptions {
        cells: ac.cells,
        gradient: p.gradient_source(ac.gradient)?,
    };
    let res = perimeter(&p.phi, &p.region, &opts)?;
    let normal = unit_normal(&p.phi, &p.point, &opts.gradient)?;
    let ok = res.value.is_finite() && res.error_estimate <= ac.tolerance;
    let mut table = Table::new("density", &["point", "density"]);
    for s in &res.density_samples {
        let point: Vec<String> = s.point.iter().map(|x| fmt(*x)).collect();
        table.rows.push(vec![point.join(" "), fmt(s.density)]);
    }
    let mut result = to_value(&res)?;
    if let Value::Object(map) = &mut result {
        map.remove("density_samples");
        map.insert("tolerance".into(), json!(ac.tolerance));
        map.insert("unit_normal_at_point".into(), json!({ "point": p.point, "normal": normal }));
    }
    Ok(Outcome {
        command: "area".into(),
        verdict: Some(if ok { Verdict::Pass } else { Verdict::Fail }),
        breakdown: !res.value.is_finite(),
        summary: format!(
            "area: perimeter {:.12} (error estimate {:e}, {} cells per axis, gradient {})",
            res.value, res.error_estimate, res.cells_per_axis, res.gradient
        ),
        result,
        tables: vec![table],
    })
}

pub fn lift(cfg: &RunConfig, p: &Problem) -> Result<Outcome, CliError> {
    let lc = &cfg.checks.lift;
    let target = p.phi.splitting().group().clone();
    let pi = ProjectionPi::new(&target)?;
    let free = pi.source().group().clone();
    // homomorphism residual on seeded pairs in [-1, 1]^dim
    let box_ = carnot_core::sampling::Region::cube(&vec![0.0; free.dim()], 1.0);
    let ps = box_.sample(lc.pairs, derive_seed(cfg.seed, 11));
    let qs = box_.sample(lc.pairs, derive_seed(cfg.seed, 12));
    let mut hom: f64 = 0.0;
    for (a, b) in ps.iter().zip(&qs) {
        hom = hom.max(pi.homomorphism_residual(a, b)?);
    }
    let psi = pi.lift_function(&p.phi)?;
    let field = ProjectedField::basis(&p.phi, lc.direction)?;
    let gamma = flow_two_sided(&field, &p.point, lc.time, lc.time, FlowOptions { step: lc.step, error_estimate: false })?;
    let start = pi.section_w(&p.point);
    let zeta = pi.lift_curve(&psi, &gamma, &start)?;
    let mut proj: f64 = 0.0;
    for (z, y) in zeta.states.iter().zip(&gamma.states) {
        for (u, v) in pi.project_w(z).iter().zip(y) {
            proj = proj.max((u - v).abs());
        }
    }
    let ode = curve_residual(&zeta)?;
    let base_ode = curve_residual(&gamma)?;
    let ok = hom <= lc.tolerance && proj <= lc.tolerance;
    let sp = psi.splitting();
    let mut header = vec!["t".to_string()];
    header.extend((2..=sp.n()).map(|i| format!("x{i}")));
    header.push("psi".into());
    let table = Table {
        name: "lifted_curve".into(),
        header,
        rows: zeta
            .table()?
            .iter()
            .map(|row| row.iter().map(|x| fmt(*x)).collect())
            .collect(),
    };
    Ok(Outcome {
        command: "lift".into(),
        verdict: Some(if ok { Verdict::Pass } else { Verdict::Fail }),
        breakdown: proj.is_nan() || hom.is_nan(),
        summary: format!(
            "lift to free{}: homomorphism residual {hom:e}, projection residual {proj:e}, lifted ODE residual {ode:e}",
            pi.source().rank()
        ),
        result: json!({
            "free_group": free.name(),
            "free_dimension": free.dim(),
            "vertical_matrix": pi.vertical_matrix().row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
            "direction": lc.direction,
            "homomorphism_residual": hom,
            "projection_residual": proj,
            "lifted_ode_residual": ode,
            "base_ode_residual": base_ode,
            "tolerance": lc.tolerance,
            "start": zeta.start,
        }),
        tables: vec![table],
    })
}

pub fn catalog_list() -> Result<Outcome, CliError> {
    let mut entries = Vec::new();
    let mut summary = String::new();
    for name in NAMES {
        let e = lookup(name, &CatalogParams::default())?;
        let checks: Vec<String> = e
            .expected
            .iter()
            .map(|x| format!("{}={:?}", x.check.name(), x.verdict).to_lowercase())
            .collect();
        summary.push_str(&format!("{name:28} {} [{}]\n", e.description, checks.join(", ")));
        entries.push(json!({ "name": name, "description": e.description, "expected": to_value(&e.expected)? }));
    }
    Ok(Outcome {
        command: "catalog list".into(),
        verdict: None,
        breakdown: false,
        summary: summary.trim_end().to_string(),
        result: json!({ "entries": entries }),
        tables: Vec::new(),
    })
}

pub fn catalog_run(name: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut params = cfg.catalog_params.clone();
    if params.seed.is_none() {
        params.seed = Some(cfg.seed);
    }
    let entry = lookup(name, &params)?;
    let outcomes = run_entry(&entry, cfg.seed)?;
    let all = outcomes.iter().all(|o| o.matches());
    let mut table = Table::new("outcomes", &["check", "expected", "observed", "max_residual"]);
    let mut summary = format!("catalog {name}:\n");
    for o in &outcomes {
        let expected = format!("{:?}", o.expected).to_lowercase();
        let observed = format!("{:?}", o.observed).to_lowercase();
        summary.push_str(&format!(
            "  {:24} expected {expected:4} observed {observed:4} {}\n",
            o.check.name(),
            if o.matches() { "ok" } else { "MISMATCH" }
        ));
        table
            .rows
            .push(vec![o.check.name().into(), expected, observed, fmt(o.report.max_residual)]);
    }
    Ok(Outcome {
        command: format!("catalog run {name}"),
        verdict: Some(if all { Verdict::Pass } else { Verdict::Fail }),
        breakdown: false,
        summary: summary.trim_end().to_string(),
        result: json!({ "entry": name, "params": entry.params, "outcomes": to_value(&outcomes)? }),
        tables: vec![table],
    })
}
