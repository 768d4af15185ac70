//! `carnot-calc`: run the carnot-core verifiers from the command line.
//!
//! Exit codes: 0 pass, 1 fail with evidence, 2 configuration error,
//! 3 numerical breakdown.

mod commands;
mod config;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use carnot_core::group::GroupSpec;
use carnot_core::regularity::Verdict;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::commands::Outcome;
use crate::config::{parse_box, resolve_group, GroupRef, RunConfig};

const VERSION: &str = env!("CARNOT_CALC_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] carnot_core::Error),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Io(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "carnot-calc", version = VERSION, about = "Calculus on intrinsic graphs in Carnot groups")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "CARNOT_CALC_JOBS")]
    jobs: Option<usize>,
    /// Directory for report.json and CSV tables; the report goes to stdout otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Built-in group: h<n>, free<m>, engel, step2_m<m>_h<h>_s<seed>.
    #[arg(long, global = true)]
    group: Option<String>,
    /// Dimension of the horizontal subgroup L.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Expression for one coordinate of φ (repeat for k > 1).
    #[arg(long, global = true, allow_hyphen_values = true)]
    phi: Vec<String>,
    /// Expression for one entry of D^φ φ, row-major (repeatable).
    #[arg(long, global = true, allow_hyphen_values = true)]
    omega: Vec<String>,
    /// Expression parameter `name=value`; `--name value` works too.
    #[arg(long = "param", global = true, value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Catalog entry instead of expressions.
    #[arg(long, global = true)]
    catalog: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Group of the c1_* catalog families.
    #[arg(long, global = true)]
    catalog_group: Option<String>,
    /// Base point in W-coordinates, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    /// Region `unit`, `sym` or `a,b` (a cube in W).
    #[arg(long = "box", global = true, allow_hyphen_values = true)]
    region_box: Option<String>,
    #[arg(long, global = true)]
    tol_flow: Option<f64>,
    #[arg(long, global = true)]
    tol_broad: Option<f64>,
    #[arg(long, global = true)]
    tol_broadstar: Option<f64>,
    /// Bound on the intrinsic Lipschitz constant.
    #[arg(long, global = true)]
    tol_lipschitz: Option<f64>,
    #[arg(long, global = true)]
    tol_area: Option<f64>,
    #[arg(long, global = true)]
    tol_lift: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Lipschitz,
    Id,
    Uid,
    Broad,
    Broadstar,
    Vholder,
    Propagation,
}

impl Check {
    fn name(self) -> &'static str {
        match self {
            Check::Lipschitz => "lipschitz",
            Check::Id => "id",
            Check::Uid => "uid",
            Check::Broad => "broad",
            Check::Broadstar => "broadstar",
            Check::Vholder => "vholder",
            Check::Propagation => "propagation",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a group and print its bracket table.
    Group {
        /// Built-in name (alternatively --group, --file or the config).
        name: Option<String>,
        /// JSON group description.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Integrate a projected field from --point.
    Flow {
        #[arg(long)]
        direction: Option<usize>,
        #[arg(long)]
        t_back: Option<f64>,
        #[arg(long)]
        t_fwd: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Run one regularity check.
    Verify { check: Check },
    /// Perimeter of the intrinsic subgraph over the region.
    Area {
        #[arg(long)]
        cells: Option<usize>,
    },
    /// Lift a curve of a step-2 group to the free group of the same rank.
    Lift {
        #[arg(long)]
        direction: Option<usize>,
        #[arg(long)]
        time: Option<f64>,
    },
    /// List or run the built-in examples.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    List,
    Run { name: String },
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let v: f64 = value.trim().parse().map_err(|_| format!("bad value in {s:?}"))?;
    Ok((name.trim().to_string(), v))
}

fn known_longs(cmd: &clap::Command, out: &mut BTreeSet<String>) {
    for a in cmd.get_arguments() {
        if let Some(l) = a.get_long() {
            out.insert(l.to_string());
        }
    }
    for sub in cmd.get_subcommands() {
        known_longs(sub, out);
    }
}

/// Pull `--name value` pairs with unknown names and numeric values out of argv as
/// expression parameters.
fn split_params(args: Vec<String>) -> (Vec<String>, Vec<(String, f64)>) {
    let mut known = BTreeSet::from(["help".to_string(), "version".to_string()]);
    known_longs(&Cli::command(), &mut known);
    let is_ident = |s: &str| {
        let mut chars = s.chars();
        matches!(chars.next(), Some(c) if c.is_ascii_alphabetic()) && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    };
    let mut rest = Vec::new();
    let mut params = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        if let Some(flag) = a.strip_prefix("--") {
            let (name, inline) = match flag.split_once('=') {
                Some((n, v)) => (n, Some(v.to_string())),
                None => (flag, None),
            };
            if is_ident(name) && !known.contains(name) {
                let value = inline.clone().or_else(|| args.get(i + 1).cloned());
                if let Some(v) = value.and_then(|v| v.parse::<f64>().ok()) {
                    params.push((name.to_string(), v));
                    i += if inline.is_some() { 1 } else { 2 };
                    continue;
                }
            }
        }
        rest.push(a.clone());
        i += 1;
    }
    (rest, params)
}

fn build_config(common: &Common, extra: Vec<(String, f64)>) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(g) = &common.group {
        cfg.group = Some(GroupRef::Name(g.clone()));
    }
    if common.k.is_some() {
        cfg.k = common.k;
    }
    if !common.phi.is_empty() {
        cfg.phi = common.phi.clone();
    }
    if !common.omega.is_empty() {
        cfg.omega = common.omega.clone();
    }
    for (name, v) in common.params.iter().cloned().chain(extra) {
        cfg.params.insert(name, v);
    }
    if let Some(c) = &common.catalog {
        cfg.catalog = Some(c.clone());
    }
    if common.alpha.is_some() {
        cfg.catalog_params.alpha = common.alpha;
    }
    if common.catalog_group.is_some() {
        cfg.catalog_params.group = common.catalog_group.clone();
    }
    if common.point.is_some() {
        cfg.point = common.point.clone();
    }
    let checks = &mut cfg.checks;
    if let Some(t) = common.tol_flow {
        checks.flow.tolerance = t;
    }
    if let Some(t) = common.tol_broad {
        checks.broad.get_or_insert_with(Default::default).tolerance = t;
    }
    if let Some(t) = common.tol_broadstar {
        checks.broadstar.get_or_insert_with(Default::default).tolerance = t;
    }
    if let Some(t) = common.tol_lipschitz {
        checks.lipschitz.get_or_insert_with(Default::default).l_guess = Some(t);
    }
    if let Some(t) = common.tol_area {
        checks.area.tolerance = t;
    }
    if let Some(t) = common.tol_lift {
        checks.lift.tolerance = t;
    }
    Ok(cfg)
}

fn apply_box(cfg: &mut RunConfig, spec: &Option<String>) -> Result<(), CliError> {
    if let Some(spec) = spec {
        let probe = cfg.problem_dims()?;
        cfg.region = Some(parse_box(spec, probe)?);
    }
    Ok(())
}

impl RunConfig {
    /// Dimension of W for the configured function.
    fn problem_dims(&self) -> Result<usize, CliError> {
        let mut probe = self.clone();
        probe.region = None;
        probe.point = None;
        Ok(probe.problem()?.phi.splitting().w_dim())
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    verdict: Option<Verdict>,
    config: &'a RunConfig,
    result: &'a serde_json::Value,
}

fn write_outputs(outcome: &Outcome, cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let envelope = Envelope {
        tool: "carnot-calc",
        version: VERSION,
        command: &outcome.command,
        verdict: outcome.verdict,
        config: cfg,
        result: &outcome.result,
    };
    let json = serde_json::to_string_pretty(&envelope).map_err(|e| CliError::Io(e.to_string()))?;
    match out {
        None => println!("{json}"),
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            std::fs::write(dir.join("report.json"), json + "\n").map_err(|e| CliError::Io(e.to_string()))?;
            for t in &outcome.tables {
                let path = dir.join(format!("{}.csv", t.name));
                let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(e.to_string()))?;
                w.write_record(&t.header).map_err(|e| CliError::Io(e.to_string()))?;
                for row in &t.rows {
                    w.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
                }
                w.flush().map_err(|e| CliError::Io(e.to_string()))?;
            }
            println!("{}", outcome.summary);
        }
    }
    Ok(())
}

fn run(cli: Cli, extra: Vec<(String, f64)>) -> Result<(Outcome, RunConfig), CliError> {
    let common = &cli.common;
    if let Some(j) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("jobs: {e}")))?;
    }
    let mut cfg = build_config(common, extra)?;
    let outcome = match &cli.command {
        Command::Group { name, file } => {
            let group = if let Some(path) = file {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                Arc::new(GroupSpec::from_json(&text)?)
            } else {
                let g = name
                    .as_ref()
                    .map(|n| GroupRef::Name(n.clone()))
                    .or_else(|| cfg.group.clone())
                    .ok_or_else(|| CliError::Config("no group given".into()))?;
                if name.is_some() {
                    cfg.group = Some(g.clone());
                }
                resolve_group(&g)?
            };
            commands::group(&group)?
        }
        Command::Flow {
            direction,
            t_back,
            t_fwd,
            step,
        } => {
            let fc = &mut cfg.checks.flow;
            fc.direction = direction.or(fc.direction);
            fc.t_back = t_back.unwrap_or(fc.t_back);
            fc.t_fwd = t_fwd.unwrap_or(fc.t_fwd);
            fc.step = step.unwrap_or(fc.step);
            apply_box(&mut cfg, &common.region_box)?;
            commands::flow(&cfg, &cfg.problem()?)?
        }
        Command::Verify { check } => {
            apply_box(&mut cfg, &common.region_box)?;
            commands::verify(check.name(), &cfg, &cfg.problem()?)?
        }
        Command::Area { cells } => {
            if cells.is_some() {
                cfg.checks.area.cells = *cells;
            }
            apply_box(&mut cfg, &common.region_box)?;
            commands::area(&cfg, &cfg.problem()?)?
        }
        Command::Lift { direction, time } => {
            let lc = &mut cfg.checks.lift;
            lc.direction = direction.unwrap_or(lc.direction);
            lc.time = time.unwrap_or(lc.time);
            apply_box(&mut cfg, &common.region_box)?;
            commands::lift(&cfg, &cfg.problem()?)?
        }
        Command::Catalog { action } => match action {
            CatalogAction::List => commands::catalog_list()?,
            CatalogAction::Run { name } => commands::catalog_run(name, &cfg)?,
        },
    };
    Ok((outcome, cfg))
}

fn main() -> ExitCode {
    let (args, extra) = split_params(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let out = cli.common.out.clone();
    match run(cli, extra) {
        Ok((outcome, cfg)) => {
            if let Err(e) = write_outputs(&outcome, &cfg, out.as_deref()) {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code());
            }
            if outcome.breakdown {
                eprintln!("numerical breakdown: {}", outcome.summary);
                return ExitCode::from(3);
            }
            match outcome.verdict {
                Some(Verdict::Fail) => ExitCode::from(1),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_numeric_flags_become_params() {
        let args: Vec<String> = ["carnot-calc", "area", "--group", "h1", "--c", "1", "--phi", "c*x2", "--mu=-2.5"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (rest, params) = split_params(args);
        assert_eq!(params, vec![("c".to_string(), 1.0), ("mu".to_string(), -2.5)]);
        assert_eq!(rest, vec!["carnot-calc", "area", "--group", "h1", "--phi", "c*x2"]);
    }

    #[test]
    fn params_parse() {
        assert_eq!(parse_param("a=2").unwrap(), ("a".to_string(), 2.0));
        assert!(parse_param("a").is_err());
    }
}
