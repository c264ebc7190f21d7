//! Batch front end: `hdich <command> --config run.toml`.
//!
//! Exit codes: 0 pass or dichotomic, 1 fail or not dichotomic,
//! 2 inconclusive, 64 configuration error, 70 numerical error,
//! 74 output error.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::checkers::{
    estimate_expansiveness, estimate_noncriticality, expansive_to_noncritical, fit_dichotomy, fit_growth_bound,
    verify_h_dichotomy, DichotomyConstants, ExpansivenessConfig, GrowthMode, NoncriticalityConstants, ProjectionFamily,
};
use crate::construct::{
    build_projections, derive_constants, equivalence_pipeline, stable_subspace, uniform_stable_bound, DerivedConstants,
    PipelineConfig, SubspacePair, Verdict,
};
use crate::error::{Error, Result};
use crate::family::EvolutionFamily;
use crate::grid::SigmaGrid;
use crate::linalg::{operator_norm, to_rows, Matrix};
use crate::rate::GrowthRate;
use crate::systems::Builtin;
use config::RunConfig;
use report::{Report, Table};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_NUMERICAL: i32 = 70;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(name = "hdich", version, about = "Check h-dichotomies, h-expansiveness and uniform h-noncriticality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for report files; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Stdout format; `csv` also writes `data.csv` next to the report.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long = "C", global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long = "D", global = true)]
    d: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Fit an h-bounded growth estimate.
    CheckGrowth,
    /// Fit an h-bounded decay estimate.
    CheckDecay,
    /// Verify (with --D and --lambda) or fit an h-dichotomy.
    CheckDichotomy,
    /// Estimate h-expansiveness constants.
    CheckExpansive,
    /// Estimate the noncriticality constant θ at --C.
    CheckNoncritical,
    /// Emit the configuration of the rescaled family under h = exp.
    Rescale,
    /// Build projections and dichotomy constants from noncriticality.
    Construct,
    /// Run all checks and the constructive chain.
    Pipeline,
    /// Compare closed-form constants with estimates on reference systems.
    Demo,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CheckGrowth => "check-growth",
            Command::CheckDecay => "check-decay",
            Command::CheckDichotomy => "check-dichotomy",
            Command::CheckExpansive => "check-expansive",
            Command::CheckNoncritical => "check-noncritical",
            Command::Rescale => "rescale",
            Command::Construct => "construct",
            Command::Pipeline => "pipeline",
            Command::Demo => "demo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

struct Outcome {
    exit_code: i32,
    json: String,
    csv: Option<Table>,
    /// Primary output replacing the JSON report on stdout.
    text: Option<(String, &'static str)>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Domain(_) | Error::Range(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Parse `args` (including the program name), run the command and return
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("hdich: {e}");
            return exit_code(&e);
        }
    };
    match emit(&cli, &outcome) {
        Ok(()) => outcome.exit_code,
        Err(e) => {
            eprintln!("hdich: {e}");
            EXIT_IO
        }
    }
}

fn emit(cli: &Cli, outcome: &Outcome) -> std::io::Result<()> {
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("report.json"), &outcome.json)?;
            if let Some((text, file)) = &outcome.text {
                std::fs::write(dir.join(file), text)?;
            }
            if let (Some(Format::Csv), Some(table)) = (cli.format, &outcome.csv) {
                std::fs::write(dir.join("data.csv"), table.to_csv())?;
            }
        }
        None => match (cli.format, &outcome.text, &outcome.csv) {
            (Some(Format::Csv), _, Some(table)) => print!("{}", table.to_csv()),
            (None, Some((text, _)), _) => print!("{text}"),
            _ => print!("{}", outcome.json),
        },
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_deref().ok_or_else(|| Error::Config(format!("{} needs --config", cli.command.name())))?;
    let mut cfg = RunConfig::load(path)?;
    apply_overrides(cli, &mut cfg);
    Ok(cfg)
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let p = &mut cfg.params;
    for (flag, slot) in [
        (cli.c, &mut p.c),
        (cli.beta, &mut p.beta),
        (cli.lambda, &mut p.lambda),
        (cli.d, &mut p.d),
        (cli.horizon, &mut p.horizon),
        (cli.margin, &mut p.margin),
    ] {
        if flag.is_some() {
            *slot = flag;
        }
    }
    if cli.c.is_some() {
        p.c_values = None;
    }
}

fn status_of(pass: bool) -> (&'static str, i32) {
    if pass {
        ("pass", EXIT_PASS)
    } else {
        ("fail", EXIT_FAIL)
    }
}

fn finish<R: Serialize>(cmd: Command, cfg: &RunConfig, result: R, pass: bool, csv: Option<Table>) -> Outcome {
    let (status, exit_code) = status_of(pass);
    Outcome { exit_code, json: Report::new(cmd.name(), cfg, result, status, exit_code).to_json(), csv, text: None }
}

fn execute(cli: &Cli) -> Result<Outcome> {
    if cli.command == Command::Demo {
        return demo(cli);
    }
    let cfg = load_config(cli)?;
    let rate = cfg.rate()?;
    let a0_star = cfg.a0_star()?;
    let family = cfg.family()?;
    let cmd = cli.command;
    match cmd {
        Command::CheckGrowth | Command::CheckDecay => {
            let mode = if cmd == Command::CheckGrowth { GrowthMode::Growth } else { GrowthMode::Decay };
            let grid = cfg.grid()?;
            let bound = fit_growth_bound(&family, &rate, &grid, mode)?;
            let mut table = Table::new(vec!["sigma_t", "sigma_s", "norm", "bound"]);
            for (i, j) in ordered_pairs(grid.len(), mode == GrowthMode::Growth) {
                let norm = operator_norm(&family.transition(grid.t(i), grid.t(j))?)?;
                let delta = (grid.sigma(i) - grid.sigma(j)).abs();
                table.push(vec![grid.sigma(i), grid.sigma(j), norm, bound.k * (bound.mu * delta).exp()]);
            }
            let pass = bound.pass;
            Ok(finish(cmd, &cfg, bound, pass, Some(table)))
        }
        Command::CheckDichotomy => check_dichotomy(cmd, &cfg, &family, &rate),
        Command::CheckExpansive => {
            let grid = cfg.grid()?;
            let exp_cfg = ExpansivenessConfig {
                beta: cfg.params.beta.unwrap_or(1.0),
                max_window: cfg.params.max_window,
                sphere: cfg.sphere(),
                ..Default::default()
            };
            let est = estimate_expansiveness(&family, &rate, &grid, &exp_cfg)?;
            let mut table = Table::new(vec!["width", "L"]);
            for p in &est.profile {
                table.push(vec![p.width, p.l]);
            }
            let pass = est.pass();
            Ok(finish(cmd, &cfg, est, pass, Some(table)))
        }
        Command::CheckNoncritical => {
            let grid = cfg.grid()?;
            let est = estimate_noncriticality(&family, &rate, cfg.params.c.unwrap_or(1.0), &grid, &cfg.sphere())?;
            let table = theta_table(std::slice::from_ref(&est));
            let pass = est.pass;
            Ok(finish(cmd, &cfg, est, pass, Some(table)))
        }
        Command::Rescale => {
            let rescaled = cfg.rescaled()?;
            let text = rescaled.to_toml()?;
            let json = Report::new(cmd.name(), &cfg, &rescaled, "pass", EXIT_PASS).to_json();
            Ok(Outcome { exit_code: EXIT_PASS, json, csv: None, text: Some((text, "rescaled.toml")) })
        }
        Command::Construct => construct(cmd, &cfg, &family, &rate, a0_star),
        Command::Pipeline => {
            let report = equivalence_pipeline(&family, &rate, a0_star, &cfg.pipeline()?)?;
            let (status, exit_code) = match report.verdict {
                Verdict::Dichotomic => ("dichotomic", EXIT_PASS),
                Verdict::NotDichotomic => ("not-dichotomic", EXIT_FAIL),
                Verdict::Inconclusive => ("inconclusive", EXIT_INCONCLUSIVE),
            };
            let table = theta_table(&report.c.estimates);
            let json = Report::new(cmd.name(), &cfg, &report, status, exit_code).to_json();
            Ok(Outcome { exit_code, json, csv: Some(table), text: None })
        }
        Command::Demo => unreachable!("handled above"),
    }
}

fn ordered_pairs(n: usize, forward: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if (forward && i >= j) || (!forward && i <= j) {
                out.push((i, j));
            }
        }
    }
    out
}

fn theta_table(estimates: &[NoncriticalityConstants]) -> Table {
    let mut table = Table::new(vec!["C", "sigma", "theta"]);
    for est in estimates {
        for p in est.detail.iter().flat_map(|d| &d.per_point) {
            table.push(vec![est.c, p[0], p[1]]);
        }
    }
    table
}

fn constructed_projection(
    cfg: &RunConfig,
    family: &EvolutionFamily,
    rate: &GrowthRate,
    grid: &SigmaGrid,
) -> Result<(SubspacePair, ProjectionFamily)> {
    let d = PipelineConfig::default();
    let pair = stable_subspace(
        family,
        rate,
        grid.t(0),
        cfg.params.horizon.unwrap_or(d.horizon),
        cfg.params.gap_threshold.unwrap_or(d.gap_threshold),
    )?;
    let proj = build_projections(family, &pair, Some(grid))?;
    Ok((pair, proj))
}

#[derive(Serialize)]
struct DichotomyResult<R: Serialize> {
    projection_source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    subspace: Option<SubspacePair>,
    projection_at_anchor: Vec<Vec<f64>>,
    #[serde(flatten)]
    outcome: R,
}

#[derive(Serialize)]
struct Verified {
    report: crate::checkers::DichotomyReport,
}

#[derive(Serialize)]
struct Fitted {
    fit: crate::checkers::DichotomyFit,
}

fn check_dichotomy(cmd: Command, cfg: &RunConfig, family: &EvolutionFamily, rate: &GrowthRate) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let (source, subspace, proj) = match &cfg.params.projection {
        Some(rows) => {
            let n = rows.len();
            if n != family.dim() || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!("projection must be {0}×{0}", family.dim())));
            }
            ("given", None, ProjectionFamily::constant(Matrix::from_fn(n, n, |i, j| rows[i][j]))?)
        }
        None => {
            let (pair, proj) = constructed_projection(cfg, family, rate, &grid)?;
            ("constructed", Some(pair), proj)
        }
    };
    let p0 = proj.at(grid.t(0))?;
    let mut table = Table::new(vec!["sigma_t", "sigma_s", "stable_norm", "unstable_norm"]);
    let id = Matrix::identity(family.dim(), family.dim());
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let t = family.transition(grid.t(i), grid.t(j))?;
            let p = proj.at(grid.t(j))?;
            let stable = if i >= j { operator_norm(&(&t * &p))? } else { f64::NAN };
            let unstable = if i <= j { operator_norm(&(&t * (&id - &p)))? } else { f64::NAN };
            table.push(vec![grid.sigma(i), grid.sigma(j), stable, unstable]);
        }
    }
    let (d, lambda) = (cfg.params.d, cfg.params.lambda);
    let base = |outcome| DichotomyResult {
        projection_source: source,
        subspace: subspace.clone(),
        projection_at_anchor: to_rows(&p0),
        outcome,
    };
    Ok(match (d, lambda) {
        (Some(d), Some(lambda)) => {
            let report = verify_h_dichotomy(family, rate, &proj, DichotomyConstants { d, lambda }, &grid)?;
            let pass = report.pass;
            finish(cmd, cfg, base(serde_json::to_value(Verified { report }).expect("serializable")), pass, Some(table))
        }
        (None, None) => {
            let fit = fit_dichotomy(family, rate, &proj, &grid, cfg.params.min_rate.unwrap_or(1e-3))?;
            let pass = fit.pass;
            finish(cmd, cfg, base(serde_json::to_value(Fitted { fit }).expect("serializable")), pass, Some(table))
        }
        _ => return Err(Error::Config("give both D and lambda, or neither to fit them".into())),
    })
}

#[derive(Serialize)]
struct ConstructResult {
    subspace: Option<SubspacePair>,
    projection_at_anchor: Option<Vec<Vec<f64>>>,
    noncriticality: Option<NoncriticalityConstants>,
    #[serde(rename = "D")]
    d: Option<f64>,
    constants: Option<DerivedConstants>,
    verification: Option<crate::checkers::DichotomyReport>,
    error: Option<String>,
}

fn construct(
    cmd: Command,
    cfg: &RunConfig,
    family: &EvolutionFamily,
    rate: &GrowthRate,
    a0_star: f64,
) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let mut res = ConstructResult {
        subspace: None,
        projection_at_anchor: None,
        noncriticality: None,
        d: None,
        constants: None,
        verification: None,
        error: None,
    };
    let mut table = None;
    let outcome = (|| -> Result<bool> {
        let (pair, proj) = constructed_projection(cfg, family, rate, &grid)?;
        res.projection_at_anchor = Some(to_rows(&proj.at(a0_star)?));
        res.subspace = Some(pair);
        let nc = estimate_noncriticality(family, rate, cfg.params.c.unwrap_or(1.0), &grid, &cfg.sphere())?;
        table = Some(theta_table(std::slice::from_ref(&nc)));
        let (theta, c) = (nc.theta, nc.c);
        res.noncriticality = Some(nc);
        let d = uniform_stable_bound(family, &proj, &grid)?;
        res.d = Some(d);
        let derived = derive_constants(theta, c, d)?;
        res.constants = Some(derived);
        let report =
            verify_h_dichotomy(family, rate, &proj, DichotomyConstants { d: derived.b, lambda: derived.alpha }, &grid)?;
        let pass = report.pass;
        res.verification = Some(report);
        Ok(pass)
    })();
    let pass = match outcome {
        Ok(pass) => pass,
        // no gap, or θ ≥ 1: nothing to construct
        Err(e @ (Error::NoGap { .. } | Error::Range(_) | Error::Conditioning { .. })) => {
            res.error = Some(e.to_string());
            false
        }
        Err(e) => return Err(e),
    };
    Ok(finish(cmd, cfg, res, pass, table))
}

#[derive(Debug, Serialize)]
struct DemoRow {
    quantity: String,
    formula: String,
    estimate: String,
    rel_error: Option<f64>,
    ok: bool,
}

fn numeric_row(quantity: &str, formula: f64, estimate: f64, tol: f64) -> DemoRow {
    let err = (estimate - formula).abs() / formula.abs().max(f64::MIN_POSITIVE);
    DemoRow {
        quantity: quantity.into(),
        formula: format!("{formula:.10}"),
        estimate: format!("{estimate:.10}"),
        rel_error: Some(err),
        ok: err <= tol,
    }
}

fn demo(cli: &Cli) -> Result<Outcome> {
    let mut input = RunConfig::default();
    apply_overrides(cli, &mut input);
    let sphere = input.sphere();
    let mut rows = Vec::new();

    let exp = GrowthRate::exp();
    let grid = SigmaGrid::new(&exp, 0.0, 5.0, 0.25)?;
    let lambda = cli.lambda.unwrap_or(1.0);
    let stable = Builtin::ScalarStable { lambda }.closed_form(&exp);
    for c in [0.5, 1.0, 2.0] {
        let est = estimate_noncriticality(&stable, &exp, c, &grid, &sphere)?;
        rows.push(numeric_row(&format!("scalar-stable θ, C={c}"), (-lambda * c).exp(), est.theta, 1e-4));
        if c == 1.0 {
            let derived = derive_constants(est.theta, c, 1.0)?;
            rows.push(numeric_row("scalar-stable α from θ, C=1", lambda, derived.alpha, 1e-4));
        }
    }
    let hyp = Builtin::DiagHyperbolic { lambda }.closed_form(&exp);
    let est = estimate_noncriticality(&hyp, &exp, 1.0, &grid, &sphere)?;
    rows.push(numeric_row("diag-hyperbolic θ, C=1", (2.0 * lambda).cosh().powf(-0.5), est.theta, 1e-3));

    let nc = expansive_to_noncritical(1.0, 1.0, 0.5)?;
    rows.push(numeric_row("C from L=1, β=1, margin=1/2", 4f64.ln(), nc.c, 1e-12));
    rows.push(numeric_row("θ from L=1, β=1, margin=1/2", 0.5, nc.theta, 1e-12));
    let derived = derive_constants(0.5, 4f64.ln(), 1.0)?;
    rows.push(numeric_row("B from θ=1/2, C=ln 4, D=1", 2.0, derived.b, 1e-12));
    rows.push(numeric_row("α from θ=1/2, C=ln 4, D=1", 0.5, derived.alpha, 1e-12));

    let cfg = PipelineConfig { sphere, ..Default::default() };
    let poly = GrowthRate::poly();
    let cases = [
        (
            "diag-hyperbolic, h=t",
            Builtin::DiagHyperbolic { lambda }.closed_form(&poly),
            poly.clone(),
            1.0,
            Verdict::Dichotomic,
        ),
        (
            "rotation, h=exp",
            Builtin::Rotation { omega: 1.0 }.closed_form(&exp),
            exp.clone(),
            0.0,
            Verdict::NotDichotomic,
        ),
        ("neutral, h=exp", Builtin::Neutral { lambda }.closed_form(&exp), exp.clone(), 0.0, Verdict::NotDichotomic),
    ];
    for (label, family, rate, a0_star, expected) in cases {
        let report = equivalence_pipeline(&family, &rate, a0_star, &cfg)?;
        let name = |v: Verdict| serde_json::to_value(v).expect("verdict").as_str().unwrap_or_default().to_string();
        rows.push(DemoRow {
            quantity: format!("verdict {label}"),
            formula: name(expected),
            estimate: name(report.verdict),
            rel_error: None,
            ok: report.verdict == expected,
        });
    }

    let mut text = format!("{:<36} {:>16} {:>16} {:>10}  ok\n", "quantity", "formula", "estimate", "rel.err");
    for r in &rows {
        let err = r.rel_error.map_or("-".to_string(), |e| format!("{e:.2e}"));
        text.push_str(&format!(
            "{:<36} {:>16} {:>16} {:>10}  {}\n",
            r.quantity,
            r.formula,
            r.estimate,
            err,
            if r.ok { "yes" } else { "NO" }
        ));
    }
    let pass = rows.iter().all(|r| r.ok);
    let (status, exit_code) = status_of(pass);
    let json = Report::new("demo", &input, &rows, status, exit_code).to_json();
    Ok(Outcome { exit_code, json, csv: None, text: Some((text, "demo.txt")) })
}
