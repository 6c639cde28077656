//! Deterministic experiment runner: parses a JSON experiment description,
//! dispatches to the solver / estimates / envelope / hopf machinery, and
//! emits `report.json` plus per-case CSV rows. Identical config and binary
//! produce byte-identical reports; wall times go to a separate meta file.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::catalog::{self, ExprConfig};
use crate::envelope;
use crate::error::{Error, Result};
use crate::estimates::{self, SourcePart};
use crate::field::Field;
use crate::grid::GridCylinder;
use crate::hopf;
use crate::interface::{InterfaceGraph, PsiFamily};
use crate::operators::{OperatorConfig, OperatorSpec};
use crate::rng::Rng;
use crate::solver::{self, constant_jump, PsiSpec, TransmissionProblem};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtConfig {
    Auto(String),
    Fixed(f64),
}

impl Default for DtConfig {
    fn default() -> Self {
        DtConfig::Auto("auto".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    pub r: f64,
    pub h: f64,
    #[serde(default)]
    pub dt: DtConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 1, r: 1.0, h: 1.0 / 32.0, dt: DtConfig::default() }
    }
}

fn default_operator() -> OperatorConfig {
    OperatorConfig::TraceLaplace
}

/// Source term: one expression for both sides or a per-side pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceConfig {
    Same(ExprConfig),
    Split { plus: ExprConfig, minus: ExprConfig },
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig::Same(ExprConfig::Constant(0.0))
    }
}

fn default_psi() -> PsiFamily {
    PsiFamily::Flat { a: 0.0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(rename = "F_plus", default = "default_operator")]
    pub f_plus: OperatorConfig,
    #[serde(rename = "F_minus", default = "default_operator")]
    pub f_minus: OperatorConfig,
    #[serde(default)]
    pub f: SourceConfig,
    #[serde(default)]
    pub g: ExprConfig,
    #[serde(default = "default_psi")]
    pub psi: PsiFamily,
    #[serde(default)]
    pub psi_alpha: Option<f64>,
    #[serde(default)]
    pub phi: ExprConfig,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            grid: GridConfig::default(),
            f_plus: default_operator(),
            f_minus: default_operator(),
            f: SourceConfig::default(),
            g: ExprConfig::default(),
            psi: default_psi(),
            psi_alpha: None,
            phi: ExprConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Abp,
    Harnack,
    OscDecay,
    Holder,
    C1alpha,
    Stability,
    Envelope,
    EpsEnvelope,
    Hopf,
    HopfRecursion,
    MaxPrinciple,
    Decomposition,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Abp => "abp",
            Command::Harnack => "harnack",
            Command::OscDecay => "osc-decay",
            Command::Holder => "holder",
            Command::C1alpha => "c1alpha",
            Command::Stability => "stability",
            Command::Envelope => "envelope",
            Command::EpsEnvelope => "eps-envelope",
            Command::Hopf => "hopf",
            Command::HopfRecursion => "hopf-recursion",
            Command::MaxPrinciple => "max-principle",
            Command::Decomposition => "decomposition",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub command: Command,
    #[serde(default)]
    pub problem: ProblemConfig,
    /// Mesh widths to run, coarsest first; must be nonempty.
    #[serde(default = "default_refinements")]
    pub refinements: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: Value,
}

fn default_refinements() -> Vec<f64> {
    vec![1.0 / 32.0]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        if cfg.refinements.is_empty() {
            return Err(Error::Config("refinements: list must be nonempty".into()));
        }
        for h in &cfg.refinements {
            if !(*h > 0.0) {
                return Err(Error::Config(format!("refinements: h must be positive, got {h}")));
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub command: &'static str,
    pub seed: u64,
    pub refinements: Vec<f64>,
    pub assertions: Vec<Assertion>,
    pub summary: Value,
    pub cases: Vec<Value>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub csv: String,
    pub passed: bool,
    pub wall_ms: f64,
    pub artifacts: Vec<(String, String)>,
}

struct Harness {
    assertions: Vec<Assertion>,
    cases: Vec<Value>,
    csv_header: String,
    csv_rows: Vec<String>,
    summary: Value,
    /// (file name, content) written next to the report.
    artifacts: Vec<(String, String)>,
}

impl Harness {
    fn new(csv_header: &str) -> Harness {
        Harness {
            assertions: Vec::new(),
            cases: Vec::new(),
            csv_header: csv_header.to_string(),
            csv_rows: Vec::new(),
            summary: Value::Null,
            artifacts: Vec::new(),
        }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion { name: name.into(), passed, detail: detail.into() });
    }
}

/// Maximum stored time levels under `dt: auto`.
fn auto_levels(n: usize) -> usize {
    if n == 1 {
        1024
    } else {
        128
    }
}

fn build_grid(cfg: &GridConfig, lambda_up: f64) -> Result<GridCylinder> {
    let dt = match cfg.dt {
        DtConfig::Fixed(v) => v,
        DtConfig::Auto(ref s) => {
            if s != "auto" {
                return Err(Error::Config(format!("grid.dt: expected a number or \"auto\", got {s:?}")));
            }
            let r2 = cfg.r * cfg.r;
            let dt_cfl = solver::cfl_dt_raw(cfg.n, cfg.h, lambda_up, 0.45);
            let levels = ((r2 / dt_cfl).ceil() as usize).clamp(1, auto_levels(cfg.n));
            r2 / levels as f64
        }
    };
    GridCylinder::centered(cfg.n, cfg.r, cfg.h, dt)
}

/// Builds the problem exactly as described (no refinement override).
pub fn build_problem_config(cfg: &ProblemConfig) -> Result<TransmissionProblem> {
    build_problem(cfg, cfg.grid.h)
}

fn build_problem(cfg: &ProblemConfig, h: f64) -> Result<TransmissionProblem> {
    let mut gcfg = cfg.grid.clone();
    gcfg.h = h;
    let fp = OperatorSpec::from_config(&cfg.f_plus)?;
    let fm = OperatorSpec::from_config(&cfg.f_minus)?;
    let grid = build_grid(&gcfg, fp.lambda_up().max(fm.lambda_up()))?;
    let n = grid.n();
    let (f_plus, f_minus) = match &cfg.f {
        SourceConfig::Same(e) => (e.build(n)?, e.build(n)?),
        SourceConfig::Split { plus, minus } => (plus.build(n)?, minus.build(n)?),
    };
    let g_expr = cfg.g.build(n)?;
    let mut p = TransmissionProblem::new(grid);
    p.f_plus_op = fp;
    p.f_minus_op = fm;
    p.f_plus = f_plus;
    p.f_minus = f_minus;
    p.g = Arc::new(move |xp: f64, t: f64| g_expr(&[xp], t));
    p.psi = PsiSpec::Family(cfg.psi.clone());
    if let Some(a) = cfg.psi_alpha {
        p.psi_alpha = a;
    }
    p.phi = cfg.phi.build(n)?;
    Ok(p)
}

fn fnum(v: &Value, key: &str, default: f64) -> f64 {
    v.get(key).and_then(Value::as_f64).unwrap_or(default)
}
fn unum(v: &Value, key: &str, default: usize) -> usize {
    v.get(key).and_then(Value::as_u64).unwrap_or(default as u64) as usize
}
fn fvec(v: &Value, key: &str, default: &[f64]) -> Vec<f64> {
    v.get(key)
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_f64).collect())
        .unwrap_or_else(|| default.to_vec())
}

/// Runs an experiment; case-level work is parallel with a deterministic
/// reduction order (cases collected by index).
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<RunOutcome> {
    let start = std::time::Instant::now();
    let body = || -> Result<Harness> {
        match cfg.command {
            Command::Solve => cmd_solve(cfg),
            Command::Decomposition => cmd_decomposition(cfg),
            Command::MaxPrinciple => cmd_max_principle(cfg),
            Command::Abp => cmd_abp(cfg),
            Command::Harnack => cmd_harnack(cfg),
            Command::OscDecay => cmd_osc_decay(cfg),
            Command::Holder => cmd_holder(cfg),
            Command::C1alpha => cmd_c1alpha(cfg),
            Command::Stability => cmd_stability(cfg),
            Command::Envelope => cmd_envelope(cfg),
            Command::EpsEnvelope => cmd_eps_envelope(cfg),
            Command::Hopf => cmd_hopf(cfg),
            Command::HopfRecursion => cmd_hopf_recursion(cfg),
        }
    };
    let harness = if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(body)?
    } else {
        body()?
    };

    let mut csv = harness.csv_header.clone();
    csv.push('\n');
    for row in &harness.csv_rows {
        csv.push_str(row);
        csv.push('\n');
    }
    let passed = harness.assertions.iter().all(|a| a.passed);
    let report = RunReport {
        name: cfg.name.clone(),
        command: cfg.command.name(),
        seed: cfg.seed,
        refinements: cfg.refinements.clone(),
        assertions: harness.assertions,
        summary: harness.summary,
        cases: harness.cases,
    };
    Ok(RunOutcome {
        report,
        csv,
        passed,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        artifacts: harness.artifacts,
    })
}

/// Runs and writes `report.json`, `cases.csv`, and `meta.json` under
/// `out_dir`. The meta file holds wall time and is excluded from the
/// determinism contract.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path, jobs: usize) -> Result<RunOutcome> {
    let outcome = run_experiment(cfg, jobs)?;
    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(&outcome.report)?;
    std::fs::write(out_dir.join("report.json"), json)?;
    std::fs::write(out_dir.join("cases.csv"), &outcome.csv)?;
    let meta = json!({ "wall_ms": outcome.wall_ms, "jobs": jobs });
    std::fs::write(out_dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    for (name, content) in &outcome.artifacts {
        std::fs::write(out_dir.join(name), content)?;
    }
    Ok(outcome)
}

// ---------------------------------------------------------------- commands

fn cmd_solve(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("h,steps,dt,cfl_ratio,max_interface_residual,sup_dev");
    let expect = cfg.params.get("expect").and_then(Value::as_str);
    let tol = fnum(&cfg.params, "tol", 1e-10);
    let barriers = cfg.params.get("barriers").and_then(Value::as_bool).unwrap_or(false);
    let mut devs = Vec::new();
    for &hh in &cfg.refinements {
        let problem = build_problem(&cfg.problem, hh)?;
        let (u, rep) = if barriers {
            solver::solve_with_barriers(&problem)?
        } else {
            solver::solve(&problem)?
        };
        let sup_dev = match expect {
            Some(id) => {
                let exact = catalog::expression(id, problem.grid.n())?;
                let ex = Field::from_fn(&problem.grid, |x, t| exact(x, t));
                u.sup_diff(&ex)
            }
            None => f64::NAN,
        };
        if cfg.params.get("dump").and_then(Value::as_bool).unwrap_or(false) {
            h.artifacts.push((format!("field_h{hh}.csv"), u.to_csv(None)));
        }
        devs.push(sup_dev);
        h.cases.push(json!({
            "h": hh, "steps": rep.steps, "dt": rep.dt, "cfl_ratio": rep.cfl_ratio,
            "max_interface_residual": rep.max_interface_residual,
            "sup_dev": if sup_dev.is_nan() { Value::Null } else { json!(sup_dev) },
            "sandwich_margin": rep.sandwich_margin,
        }));
        h.csv_rows.push(format!(
            "{hh},{},{},{},{},{sup_dev}",
            rep.steps, rep.dt, rep.cfl_ratio, rep.max_interface_residual
        ));
    }
    if expect.is_some() {
        let worst = devs.iter().cloned().fold(0.0f64, f64::max);
        h.check(
            "matches-expected-solution",
            worst <= tol,
            format!("max sup deviation {worst:.3e} vs tol {tol:.1e}"),
        );
    }
    h.summary = json!({ "sup_devs": devs });
    Ok(h)
}

fn cmd_decomposition(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("a,h,sup_diff,bound");
    let a_values = fvec(&cfg.params, "a_values", &[0.0, 0.2]);
    let g0 = fnum(&cfg.params, "g0", 1.0);
    let tol_factor = fnum(&cfg.params, "tol_factor", 5.0);
    let (ratio_lo, ratio_hi) =
        (fnum(&cfg.params, "ratio_lo", 1.5), fnum(&cfg.params, "ratio_hi", 4.0));
    let mut rng = Rng::stream(cfg.seed, 200);
    let phi = catalog::seeded_smooth(&mut rng, cfg.problem.grid.n);

    for &a in &a_values {
        let mut diffs = Vec::new();
        for &hh in &cfg.refinements {
            let mut base = build_problem(&cfg.problem, hh)?;
            base.phi = phi.clone();
            let dec = solver::flat_decomposition_solve(&base, a, g0)?;
            diffs.push(dec.sup_diff);
            let bound = tol_factor * hh;
            h.check(
                format!("decomposition-sup-diff[a={a},h={hh}]"),
                dec.sup_diff <= bound,
                format!("{:.3e} <= {:.3e}", dec.sup_diff, bound),
            );
            h.cases.push(json!({ "a": a, "h": hh, "sup_diff": dec.sup_diff, "bound": bound }));
            h.csv_rows.push(format!("{a},{hh},{},{bound}", dec.sup_diff));
        }
        for w in diffs.windows(2) {
            let ratio = w[0] / w[1].max(1e-300);
            h.check(
                format!("halving-ratio[a={a}]"),
                (ratio_lo..=ratio_hi).contains(&ratio),
                format!("error ratio {ratio:.3} in [{ratio_lo}, {ratio_hi}]"),
            );
        }
    }
    Ok(h)
}

fn cmd_max_principle(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("case,n,psi,h,min_u,bound");
    let cases = unum(&cfg.params, "cases", 50);
    let slope_max = fnum(&cfg.params, "slope_max", 0.25);
    let h2d = fnum(&cfg.params, "h2d", 1.0 / 16.0);
    let h1d = cfg.refinements[0];

    let rows: Vec<Result<Value>> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::stream(cfg.seed, 300 + i as u64);
            let n = 1 + (i % 2);
            let hh = if n == 1 { h1d } else { h2d };
            let psi = match i % 4 {
                0 | 3 => PsiFamily::Flat { a: rng.range(-0.2, 0.2) },
                _ => PsiFamily::Tilt { slope: rng.range(-slope_max, slope_max) },
            };
            let g0 = -rng.range(0.0, 0.8);
            let smooth = catalog::seeded_smooth(&mut rng, n);
            let lift = rng.range(0.2, 0.6);
            let grid = build_grid(&GridConfig { n, r: 1.0, h: hh, dt: DtConfig::default() }, 1.0)?;
            let mut p = TransmissionProblem::new(grid.clone());
            p.psi = PsiSpec::Family(psi.clone());
            p.g = constant_jump(g0);
            p.phi = Arc::new(move |x: &[f64], t: f64| (smooth(x, t) + 1.6) * lift);
            let (u, _) = solver::solve(&p)?;
            let min_u = u.min();
            Ok(json!({
                "case": i, "n": n, "psi": format!("{psi:?}"), "h": hh,
                "min_u": min_u, "bound": -5.0 * hh,
            }))
        })
        .collect();

    for row in rows {
        let row = row?;
        let (min_u, bound) = (row["min_u"].as_f64().unwrap(), row["bound"].as_f64().unwrap());
        h.check(
            format!("min-u[case={}]", row["case"]),
            min_u >= bound,
            format!("min u = {min_u:.4e} >= {bound:.3e}"),
        );
        h.csv_rows.push(format!(
            "{},{},{},{},{},{}",
            row["case"], row["n"], row["psi"], row["h"], min_u, bound
        ));
        h.cases.push(row);
    }
    Ok(h)
}

fn abp_case_problem(seed: u64, i: usize, hh: f64) -> Result<TransmissionProblem> {
    let mut rng = Rng::stream(seed, 400 + i as u64);
    let psi = if i.is_multiple_of(2) {
        PsiFamily::Flat { a: rng.range(-0.2, 0.2) }
    } else {
        PsiFamily::Tilt { slope: rng.range(-0.2, 0.2) }
    };
    let fp = rng.range(-2.0, 2.0);
    let fm = rng.range(-2.0, 2.0);
    let g0 = rng.range(-1.0, 1.0);
    let phi = catalog::seeded_smooth(&mut rng, 1);
    let grid = build_grid(&GridConfig { n: 1, r: 1.0, h: hh, dt: DtConfig::default() }, 1.0)?;
    let mut p = TransmissionProblem::new(grid);
    p.psi = PsiSpec::Family(psi);
    p.f_plus = solver::constant_fn(fp);
    p.f_minus = solver::constant_fn(fm);
    p.g = constant_jump(g0);
    p.phi = phi;
    Ok(p)
}

fn cmd_abp(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("case,h,lhs,boundary,max_g_plus,f_norm,f_norm_contact,empirical_c");
    let cases = unum(&cfg.params, "cases", 20);
    let factor = fnum(&cfg.params, "factor", 2.0);
    let mut family_c = Vec::new();

    for &hh in &cfg.refinements {
        let reports: Vec<Result<estimates::AbpReport>> = (0..cases)
            .into_par_iter()
            .map(|i| {
                let p = abp_case_problem(cfg.seed, i, hh)?;
                let (u, _) = solver::solve(&p)?;
                estimates::abp_verify(&p, &u)
            })
            .collect();
        let mut cmax: f64 = 0.0;
        let mut nonvacuous = 0usize;
        let mut reps = Vec::new();
        for rep in reports {
            let rep = rep?;
            if let Some(c) = rep.empirical_c {
                cmax = cmax.max(c);
                nonvacuous += 1;
            }
            reps.push(rep);
        }
        for (i, rep) in reps.iter().enumerate() {
            h.check(
                format!("abp-inequality[case={i},h={hh}]"),
                rep.holds_with(cmax, 5.0 * hh),
                format!(
                    "lhs {:.4e} <= {:.4e} + {cmax:.3}*({:.4e}) + 5h",
                    rep.lhs,
                    rep.boundary_term,
                    rep.max_g_plus + rep.f_plus_norm
                ),
            );
            h.check(
                format!("contact-norm-dominated[case={i},h={hh}]"),
                rep.f_plus_norm_contact <= rep.f_plus_norm + 1e-12,
                format!("{:.4e} <= {:.4e}", rep.f_plus_norm_contact, rep.f_plus_norm),
            );
            h.cases.push(json!({
                "case": i, "h": hh, "lhs": rep.lhs, "boundary": rep.boundary_term,
                "max_g_plus": rep.max_g_plus, "f_norm": rep.f_plus_norm,
                "f_norm_contact": rep.f_plus_norm_contact, "empirical_c": rep.empirical_c,
            }));
            h.csv_rows.push(format!(
                "{i},{hh},{},{},{},{},{},{}",
                rep.lhs,
                rep.boundary_term,
                rep.max_g_plus,
                rep.f_plus_norm,
                rep.f_plus_norm_contact,
                rep.empirical_c.unwrap_or(f64::NAN)
            ));
        }
        h.check(
            format!("nonvacuous-majority[h={hh}]"),
            nonvacuous * 2 >= cases,
            format!("{nonvacuous} of {cases} cases have a positive denominator"),
        );
        family_c.push(cmax);
    }
    for w in family_c.windows(2) {
        let ratio = w[1] / w[0].max(1e-300);
        h.check(
            "family-constant-stable",
            ratio >= 1.0 / factor && ratio <= factor,
            format!("C ratio under refinement {ratio:.3} within factor {factor}"),
        );
    }
    h.summary = json!({ "family_c": family_c });
    Ok(h)
}

fn cmd_harnack(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("case,h,measured_c,base_value,smallness,flipped");
    let cases = unum(&cfg.params, "cases", 10);
    let geo = estimates::harnack_geometry(1, None)?;
    let cap = 0.25 * geo.sigma * geo.r; // half the admissible interface height

    let case_problem = |i: usize, hh: f64| -> Result<TransmissionProblem> {
        let mut rng = Rng::stream(cfg.seed, 500 + i as u64);
        let psi = if i.is_multiple_of(2) {
            PsiFamily::Flat { a: rng.range(-cap, cap) }
        } else {
            PsiFamily::Wave { amplitude: rng.range(0.2, 1.0) * cap, k: rng.range(1.0, 3.0) }
        };
        let g0 = rng.range(-0.003, 0.003);
        let f0 = rng.range(-0.003, 0.003);
        let smooth = catalog::seeded_smooth(&mut rng, 1);
        let grid = build_grid(&GridConfig { n: 1, r: 1.0, h: hh, dt: DtConfig::default() }, 1.0)?;
        let mut p = TransmissionProblem::new(grid);
        p.psi = PsiSpec::Family(psi);
        p.g = constant_jump(g0);
        p.f_plus = solver::constant_fn(f0);
        p.f_minus = solver::constant_fn(0.5 * f0);
        p.phi = Arc::new(move |x: &[f64], t: f64| (1.2 * smooth(x, t)).clamp(-0.95, 0.95));
        Ok(p)
    };

    // the flip normalization (u -> -u when u(x̄,t̄) < 0) is pinned at the
    // coarsest refinement so every h runs the same orientation
    let mut flips = vec![false; cases];
    let mut min_c_per_h = Vec::new();
    for (ri, &hh) in cfg.refinements.iter().enumerate() {
        let solved: Vec<Result<(Field, f64)>> = (0..cases)
            .into_par_iter()
            .map(|i| {
                let p = case_problem(i, hh)?;
                let (u, _) = solver::solve(&p)?;
                let k_bar = p.grid.nearest_level(geo.tbar);
                let base = u.interpolate_space(&geo.xbar, k_bar)?;
                Ok((u, base))
            })
            .collect();
        let mut cs = Vec::new();
        for (i, res) in solved.into_iter().enumerate() {
            let (u, base) = res?;
            if ri == 0 {
                flips[i] = base < 0.0;
            }
            let u = if flips[i] { u.map(|v| -v) } else { u };
            let p = case_problem(i, hh)?;
            let rep = estimates::harnack_verify(&p, &u, &geo)?;
            h.check(
                format!("harnack-positive[case={i},h={hh}]"),
                rep.measured_c > 0.0,
                format!("measured c = {:.4}", rep.measured_c),
            );
            h.cases.push(json!({
                "case": i, "h": hh, "measured_c": rep.measured_c,
                "base_value": rep.base_value, "smallness": rep.smallness,
                "flipped": flips[i], "sup_k3": rep.sup_k3, "inf_k1": rep.inf_k1,
            }));
            h.csv_rows.push(format!(
                "{i},{hh},{},{},{},{}",
                rep.measured_c, rep.base_value, rep.smallness, flips[i]
            ));
            cs.push(rep.measured_c);
        }
        min_c_per_h.push(cs.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    for w in min_c_per_h.windows(2) {
        let ratio = w[1] / w[0].max(1e-300);
        h.check(
            "min-c-refinement-stable",
            (0.5..=2.0).contains(&ratio),
            format!("min measured c ratio {ratio:.3} within factor 2"),
        );
    }
    h.summary = json!({ "min_c": min_c_per_h });
    Ok(h)
}

fn cmd_osc_decay(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("case,h,mu_est,osc_small,osc_full");
    let cases = unum(&cfg.params, "cases", 20);
    let mu_max = fnum(&cfg.params, "mu_max", 0.98);
    let r0 = fnum(&cfg.params, "r0", 1.0 / 12.0);
    let hh = cfg.refinements[0];

    let results: Vec<Result<estimates::OscillationReport>> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::stream(cfg.seed, 600 + i as u64);
            let psi = if i % 2 == 0 {
                PsiFamily::Flat { a: rng.range(-0.2, 0.2) }
            } else {
                PsiFamily::Tilt { slope: rng.range(-0.1, 0.1) }
            };
            let smooth = catalog::seeded_smooth(&mut rng, 1);
            let grid = build_grid(&GridConfig { n: 1, r: 1.0, h: hh, dt: DtConfig::default() }, 1.0)?;
            let mut p = TransmissionProblem::new(grid);
            p.psi = PsiSpec::Family(psi);
            p.phi = Arc::new(move |x: &[f64], t: f64| smooth(x, t) + 0.3 * (2.0 * x[0] + t).sin());
            let (u, _) = solver::solve(&p)?;
            Ok(estimates::oscillation_decay(&p, &u, r0, 1.0))
        })
        .collect();
    let mut mus = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        let rep = res?;
        let mu = rep.mu_est.unwrap_or(0.0);
        mus.push(mu);
        h.check(
            format!("osc-decay[case={i}]"),
            !rep.vacuous && mu <= mu_max,
            format!("mu = {mu:.4} <= {mu_max}"),
        );
        h.cases.push(json!({
            "case": i, "h": hh, "mu_est": rep.mu_est,
            "osc_small": rep.osc_small, "osc_full": rep.osc_full,
        }));
        h.csv_rows.push(format!("{i},{hh},{mu},{},{}", rep.osc_small, rep.osc_full));
    }
    h.summary = json!({ "max_mu": mus.iter().cloned().fold(0.0f64, f64::max) });
    Ok(h)
}

fn cmd_holder(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("h,fitted_alpha,constant");
    for &hh in &cfg.refinements {
        let p = build_problem(&cfg.problem, hh)?;
        let (u, _) = solver::solve(&p)?;
        let data_norm = u.sup_norm()
            + estimates::jump_sup(&p, false)
            + estimates::source_lnp1_norm(&p, SourcePart::Abs);
        let rep = estimates::holder_estimate(&u, data_norm);
        let alpha = rep.fitted_alpha;
        h.check(
            format!("positive-exponent[h={hh}]"),
            alpha.is_some_and(|a| a > 0.0),
            format!("fitted alpha = {alpha:?}"),
        );
        h.cases.push(json!({ "h": hh, "fitted_alpha": alpha, "constant": rep.constant, "levels": rep.levels }));
        h.csv_rows.push(format!(
            "{hh},{},{}",
            alpha.unwrap_or(f64::NAN),
            rep.constant.unwrap_or(f64::NAN)
        ));
    }
    Ok(h)
}

fn cmd_c1alpha(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("variant,h,g_hat,g_gap,loglog_slope");
    let variant = cfg.params.get("variant").and_then(Value::as_str).unwrap_or("flat");
    let g0 = fnum(&cfg.params, "g0", 1.0);
    let rho = fnum(&cfg.params, "rho", 0.5);
    let levels = unum(&cfg.params, "levels", 4);
    let slope_min = fnum(&cfg.params, "slope_min", if variant == "flat" { 1.1 } else { 1.05 });
    let ghat_tol = fnum(&cfg.params, "ghat_tol", 0.1);

    let mut rng = Rng::stream(cfg.seed, 700);
    let phi = catalog::seeded_smooth(&mut rng, 1);
    let mut gaps = Vec::new();
    for &hh in &cfg.refinements {
        let mut p = build_problem(&cfg.problem, hh)?;
        p.g = constant_jump(g0);
        let smooth = phi.clone();
        p.phi = Arc::new(move |x: &[f64], t: f64| 0.8 * smooth(x, t));
        if variant == "bump" {
            p.psi = PsiSpec::Family(PsiFamily::Bump {
                amplitude: fnum(&cfg.params, "amplitude", 0.05),
                alpha: fnum(&cfg.params, "alpha", 0.5),
            });
            p.psi_alpha = fnum(&cfg.params, "alpha", 0.5);
        }
        let (u, _) = solver::solve(&p)?;
        let fit = estimates::c1alpha_fit(&p, &u, g0, rho, levels)?;
        let g_hat = fit.g_hat.unwrap_or(f64::NAN);
        let gap = (g_hat - g0).abs();
        gaps.push(gap);
        let slope = fit.loglog_slope.unwrap_or(f64::NAN);
        h.check(
            format!("loglog-slope[{variant},h={hh}]"),
            slope > slope_min,
            format!("slope {slope:.3} > {slope_min}"),
        );
        // the hard constraint A+ = A− + ĝ·e_n is exact by construction:
        // assert the defining identity bitwise
        let constraint_exact = fit.levels.iter().filter(|l| l.usable).all(|l| {
            let n = l.a_plus.len();
            let mut ok = l.a_plus[n - 1] == l.a_minus[n - 1] + l.g_hat;
            for j in 0..n - 1 {
                ok = ok && l.a_plus[j] == l.a_minus[j];
            }
            ok
        });
        h.check(
            format!("jump-constraint-exact[{variant},h={hh}]"),
            constraint_exact,
            "A+ − A− − ĝ·e_n = 0 on every usable level".to_string(),
        );
        h.cases.push(json!({
            "variant": variant, "h": hh, "g_hat": g_hat, "g_gap": gap,
            "loglog_slope": fit.loglog_slope, "fitted_alpha": fit.fitted_alpha,
            "levels": fit.levels.iter().map(|l| json!({
                "k": l.k, "scale": l.scale, "residual": l.residual,
                "g_hat": l.g_hat, "usable": l.usable,
            })).collect::<Vec<_>>(),
        }));
        h.csv_rows.push(format!("{variant},{hh},{g_hat},{gap},{slope}"));
    }
    if variant == "flat" {
        h.check(
            "jump-recovered",
            gaps[0] <= ghat_tol,
            format!("|ĝ − {g0}| = {:.4} <= {ghat_tol} at h = {}", gaps[0], cfg.refinements[0]),
        );
        for w in gaps.windows(2) {
            h.check(
                "jump-gap-decreasing",
                w[1] <= w[0] + 1e-12,
                format!("{:.4e} <= {:.4e}", w[1], w[0]),
            );
        }
    }
    h.summary = json!({ "g_gaps": gaps });
    Ok(h)
}

fn cmd_stability(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("delta,psi_norm,vbar_vlow_sup,u_v_sup_half");
    let deltas = fvec(&cfg.params, "deltas", &[0.0, 0.2, 0.1, 0.05]);
    let g0 = fnum(&cfg.params, "g0", 1.0);
    let hh = cfg.refinements[0];
    let mut rng = Rng::stream(cfg.seed, 800);
    let phi = catalog::seeded_smooth(&mut rng, cfg.problem.grid.n);

    let mut base = build_problem(&cfg.problem, hh)?;
    base.phi = Arc::new(move |x: &[f64], t: f64| 0.8 * phi(x, t));
    let profile = InterfaceGraph::from_family(
        &base.grid,
        &PsiFamily::Wave { amplitude: 1.0, k: fnum(&cfg.params, "profile_k", 2.0) },
        0.5,
    );
    let rep = estimates::stability_experiment(&base, &profile, g0, &deltas)?;
    for row in &rep.rows {
        h.cases.push(json!({
            "delta": row.delta, "psi_norm": row.psi_norm,
            "vbar_vlow_sup": row.vbar_vlow_sup, "u_v_sup_half": row.u_v_sup_half,
        }));
        h.csv_rows.push(format!(
            "{},{},{},{}",
            row.delta, row.psi_norm, row.vbar_vlow_sup, row.u_v_sup_half
        ));
        if row.delta == 0.0 {
            h.check(
                "zero-delta-collapses",
                row.vbar_vlow_sup <= 1e-10 && row.u_v_sup_half <= 1e-10,
                format!("at delta 0: {:.2e}, {:.2e}", row.vbar_vlow_sup, row.u_v_sup_half),
            );
        }
    }
    let mut pos: Vec<&estimates::StabilityRow> = rep.rows.iter().filter(|r| r.delta > 0.0).collect();
    pos.sort_by(|a, b| b.delta.partial_cmp(&a.delta).unwrap());
    for w in pos.windows(2) {
        h.check(
            format!("flat-gap-decreasing[{}->{}]", w[0].delta, w[1].delta),
            w[1].vbar_vlow_sup < w[0].vbar_vlow_sup,
            format!("{:.4e} < {:.4e}", w[1].vbar_vlow_sup, w[0].vbar_vlow_sup),
        );
        h.check(
            format!("curved-flat-gap-decreasing[{}->{}]", w[0].delta, w[1].delta),
            w[1].u_v_sup_half < w[0].u_v_sup_half,
            format!("{:.4e} < {:.4e}", w[1].u_v_sup_half, w[0].u_v_sup_half),
        );
    }
    h.summary = json!({ "tau_estimate": rep.tau_estimate });
    Ok(h)
}

fn cmd_envelope(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("case,n,nodes,oracle_gap,min_second_diff,below_data,time_monotone");
    let cases = unum(&cfg.params, "cases", 50);
    let cases_2d = unum(&cfg.params, "cases_2d", 10);

    for i in 0..cases {
        let mut rng = Rng::stream(cfg.seed, 1000 + i as u64);
        // grids up to 25 x 13 space-time nodes
        let nx = 2 * (4 + rng.below(9)) + 1; // 9..25 odd
        let nt = 2 + rng.below(12); // 2..13 levels
        let g = GridCylinder::centered(1, 1.0, 2.0 / (nx - 1) as f64, 1.0 / (nt - 1) as f64)?;
        let mut u = Field::constant(&g, 0.0);
        for k in 0..g.nt() {
            for s in g.space_iter() {
                u.set(s, k, rng.range(-1.0, 1.0));
            }
        }
        let env = envelope::parabolic_convex_envelope(&u, false)?;
        let oracle = envelope::oracle::envelope_1d(&u);
        let gap = env.sup_diff(&oracle);
        h.check(
            format!("oracle-equivalence[case={i}]"),
            gap <= 1e-8,
            format!("sup gap {gap:.3e} on {nx}x{nt} nodes"),
        );
        h.cases.push(json!({ "case": i, "n": 1, "nodes": nx * nt, "oracle_gap": gap }));
        h.csv_rows.push(format!("{i},1,{},{gap},,,", nx * nt));
    }

    for i in 0..cases_2d {
        let mut rng = Rng::stream(cfg.seed, 1100 + i as u64);
        let g = GridCylinder::centered(2, 1.0, 0.25, 0.5)?;
        let mut u = Field::constant(&g, 0.0);
        for k in 0..g.nt() {
            for s in g.space_iter() {
                u.set(s, k, rng.range(-1.0, 1.0));
            }
        }
        let env = envelope::parabolic_convex_envelope(&u, false)?;
        let mut below = true;
        let mut monotone = true;
        let mut min_dd = f64::INFINITY;
        let hgrid = g.h();
        for k in 0..g.nt() {
            for s in g.space_iter() {
                below = below && env.get(s, k) <= u.get(s, k) + 1e-12;
                if k > 0 {
                    monotone = monotone && env.get(s, k) <= env.get(s, k - 1) + 1e-12;
                }
                let idx = g.space_multi(s);
                for j in 0..2usize {
                    if idx[j] == 0 || idx[j] + 1 >= g.nx()[j] {
                        continue;
                    }
                    let mut lo = idx;
                    lo[j] -= 1;
                    let mut hi = idx;
                    hi[j] += 1;
                    let (sl, sh) = (g.space_index(lo), g.space_index(hi));
                    if g.in_ball(sl) && g.in_ball(sh) {
                        min_dd = min_dd.min(
                            (env.get(sl, k) - 2.0 * env.get(s, k) + env.get(sh, k))
                                / (hgrid * hgrid),
                        );
                    }
                }
            }
        }
        h.check(
            format!("sweep-invariants[case={i}]"),
            below && monotone && min_dd >= -1e-9,
            format!("below={below}, monotone={monotone}, min second diff {min_dd:.2e}"),
        );
        h.cases.push(json!({
            "case": cases + i, "n": 2, "nodes": g.space_count() * g.nt(),
            "min_second_diff": min_dd, "below_data": below, "time_monotone": monotone,
        }));
        h.csv_rows.push(format!(
            "{},2,{},,{min_dd},{below},{monotone}",
            cases + i,
            g.space_count() * g.nt()
        ));
    }
    Ok(h)
}

fn cmd_eps_envelope(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h =
        Harness::new("case,n,eps,lipschitz_measured,lipschitz_bound,displacement_max,displacement_bound,passed");
    let cases = unum(&cfg.params, "cases", 50);
    let eps_values = fvec(&cfg.params, "eps_values", &[0.05, 0.1, 0.2]);
    let rho = fnum(&cfg.params, "rho", 0.5);

    let results: Vec<Result<Vec<Value>>> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::stream(cfg.seed, 1200 + i as u64);
            let n = 1 + (i % 2);
            let g = if n == 1 {
                GridCylinder::centered(1, 1.0, 0.125, 0.125)?
            } else {
                GridCylinder::centered(2, 1.0, 0.25, 0.5)?
            };
            let a = rng.range(-1.0, 1.0);
            let b = rng.range(0.5, 2.5);
            let c = rng.range(-0.5, 0.5);
            let u = Field::from_fn(&g, |x, t| {
                let s: f64 = x.iter().sum();
                a * (b * s + t).sin() + c * s
            });
            let mut rows = Vec::new();
            for &eps in &eps_values {
                let upper = envelope::upper_eps_envelope(&u, eps, rho)?;
                let rep = envelope::verify_eps_properties(&upper, &u);
                rows.push(json!({
                    "case": i, "n": n, "eps": eps, "upper": true,
                    "lipschitz_measured": rep.lipschitz_measured,
                    "lipschitz_bound": rep.lipschitz_bound,
                    "displacement_max": rep.displacement_max,
                    "displacement_bound": rep.displacement_bound,
                    "semiconvexity_min": rep.semiconvexity_min,
                    "passed": rep.passed,
                }));
                let lower = envelope::lower_eps_envelope(&u, eps, rho)?;
                let rep = envelope::verify_eps_properties(&lower, &u);
                rows.push(json!({
                    "case": i, "n": n, "eps": eps, "upper": false,
                    "lipschitz_measured": rep.lipschitz_measured,
                    "lipschitz_bound": rep.lipschitz_bound,
                    "displacement_max": rep.displacement_max,
                    "displacement_bound": rep.displacement_bound,
                    "semiconvexity_min": rep.semiconvexity_min,
                    "passed": rep.passed,
                }));
            }
            Ok(rows)
        })
        .collect();

    for res in results {
        for row in res? {
            let passed = row["passed"].as_bool().unwrap();
            h.check(
                format!(
                    "eps-properties[case={},eps={},upper={}]",
                    row["case"], row["eps"], row["upper"]
                ),
                passed,
                format!(
                    "lip {:.3}/{:.3}, disp {:.4}/{:.4}",
                    row["lipschitz_measured"].as_f64().unwrap(),
                    row["lipschitz_bound"].as_f64().unwrap(),
                    row["displacement_max"].as_f64().unwrap(),
                    row["displacement_bound"].as_f64().unwrap()
                ),
            );
            h.csv_rows.push(format!(
                "{},{},{},{},{},{},{},{}",
                row["case"],
                row["n"],
                row["eps"],
                row["lipschitz_measured"],
                row["lipschitz_bound"],
                row["displacement_max"],
                row["displacement_bound"],
                passed
            ));
            h.cases.push(row);
        }
    }
    Ok(h)
}

fn cmd_hopf(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("boundary,direction,r,ratio,well_resolved");
    let boundaries: Vec<String> = cfg
        .params
        .get("boundaries")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .unwrap_or_else(|| vec!["flat".into(), "bump".into()]);
    let lambda = fnum(&cfg.params, "lambda", 1.0);
    let lambda_up = fnum(&cfg.params, "Lambda", 2.0);
    let r_values = fvec(&cfg.params, "r_values", &[0.125, 0.0625, 0.03125, 0.015625]);
    let hh = cfg.refinements[0];

    for boundary in &boundaries {
        let family = match boundary.as_str() {
            "flat" => PsiFamily::Flat { a: 0.0 },
            // amplitude chosen so the flatness modulus satisfies ω(1) ≤ 1/4
            "bump" => PsiFamily::Bump { amplitude: 0.125, alpha: 0.5 },
            other => return Err(Error::Config(format!("hopf boundary `{other}` unknown"))),
        };
        let grid = build_grid(&GridConfig { n: 2, r: 1.0, h: hh, dt: DtConfig::default() }, lambda_up)?;
        let problem = hopf::hopf_problem(grid, family, lambda, lambda_up)?;
        let (u, _) = solver::solve(&problem)?;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let dirs = vec![vec![0.0, 1.0], vec![s, s]];
        let rep = hopf::hopf_verify(&u, &dirs, &r_values)?;
        h.check(
            format!("hopf-positive[{boundary}]"),
            rep.measured_c > 0.0,
            format!("measured c = {:.4}", rep.measured_c),
        );
        for ratio in &rep.ratios {
            h.cases.push(json!({
                "boundary": boundary, "direction": ratio.direction, "r": ratio.r,
                "ratio": ratio.ratio, "well_resolved": ratio.well_resolved,
            }));
            h.csv_rows.push(format!(
                "{boundary},\"{:?}\",{},{},{}",
                ratio.direction, ratio.r, ratio.ratio, ratio.well_resolved
            ));
        }
    }
    Ok(h)
}

fn cmd_hopf_recursion(cfg: &ExperimentConfig) -> Result<Harness> {
    let mut h = Harness::new("case,kind,rho,alpha0,c0,sum,bound");
    let cases = unum(&cfg.params, "cases", 100);
    let levels = unum(&cfg.params, "levels", 64);

    // explicit single tuple: preconditions bubble up as configuration errors
    if let Some(rho) = cfg.params.get("rho").and_then(Value::as_f64) {
        let alpha0 = fnum(&cfg.params, "alpha0", 0.5);
        let c0 = fnum(&cfg.params, "c0", 0.25);
        let kappa = fnum(&cfg.params, "kappa", 0.0);
        let omega = if kappa == 0.0 {
            hopf::DiniModulus::Zero
        } else {
            hopf::DiniModulus::Power { kappa, alpha: fnum(&cfg.params, "omega_alpha", 0.5) }
        };
        let rec = hopf::hopf_recursion(&omega, rho, alpha0, c0, levels)?;
        let sum = *rec.partial_sums.last().unwrap();
        h.check("sum-bound", rec.sum_bound_ok, format!("sum {sum:.4} <= 4c0 = {:.4}", 4.0 * c0));
        h.cases.push(json!({
            "case": 0, "kind": "explicit", "rho": rho, "alpha0": alpha0, "c0": c0,
            "sum": sum, "bound": 4.0 * c0, "a_seq": rec.a_seq,
        }));
        h.csv_rows.push(format!("0,explicit,{rho},{alpha0},{c0},{sum},{}", 4.0 * c0));
        return Ok(h);
    }
    for i in 0..cases {
        let mut rng = Rng::stream(cfg.seed, 900 + i as u64);
        // draw until the proviso holds; bounded deterministic rejection
        let (mut rho, mut alpha0) = (0.0, 0.0);
        for _ in 0..64 {
            rho = rng.range(0.02, 0.3);
            alpha0 = rng.range(0.3, 1.0);
            if (1.0 - rho.powf(alpha0)) * (1.0 - rho) >= 0.5 {
                break;
            }
        }
        let c0 = rng.range(0.1, 1.0);
        let (kind, omega) = match i % 3 {
            0 => ("zero", hopf::DiniModulus::Zero),
            1 => {
                let aw = rng.range(0.3, 1.0);
                let kappa = 0.9 * c0 * aw.min(1.0);
                ("power", hopf::DiniModulus::Power { kappa, alpha: aw })
            }
            _ => ("log-squared", hopf::DiniModulus::LogSquared { kappa: 0.9 * c0 }),
        };
        let rec = hopf::hopf_recursion(&omega, rho, alpha0, c0, levels)?;
        let sum = *rec.partial_sums.last().unwrap();
        h.check(
            format!("sum-bound[case={i}]"),
            rec.sum_bound_ok,
            format!("sum {sum:.4} <= 4c0 = {:.4}", 4.0 * c0),
        );
        // re-evaluation of the defining recurrence
        let mut exact = true;
        for k in 1..rec.a_seq.len() {
            exact = exact
                && rec.a_seq[k] == omega.eval(rho.powi(k as i32)).max(rho.powf(alpha0) * rec.a_seq[k - 1]);
        }
        h.check(format!("recurrence-exact[case={i}]"), exact, "A_k re-evaluates".to_string());
        h.cases.push(json!({
            "case": i, "kind": kind, "rho": rho, "alpha0": alpha0, "c0": c0,
            "sum": sum, "bound": 4.0 * c0,
        }));
        h.csv_rows.push(format!("{i},{kind},{rho},{alpha0},{c0},{sum},{}", 4.0 * c0));
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_and_validates() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "name": "kink",
                "command": "solve",
                "problem": {
                    "grid": {"n": 1, "r": 1.0, "h": 0.125},
                    "g": 2.0,
                    "phi": "kink"
                },
                "refinements": [0.125],
                "params": {"expect": "kink", "tol": 1e-10}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.command, Command::Solve);
        assert!(ExperimentConfig::from_json(r#"{"name":"x","command":"solve","refinements":[]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"name":"x","command":"frobnicate"}"#).is_err());
    }

    #[test]
    fn kink_experiment_passes() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "name": "kink",
                "command": "solve",
                "problem": {"grid": {"n": 1, "r": 1.0, "h": 0.0625}, "g": 2.0, "phi": "kink"},
                "refinements": [0.0625],
                "params": {"expect": "kink", "tol": 1e-10}
            }"#,
        )
        .unwrap();
        let out = run_experiment(&cfg, 0).unwrap();
        assert!(out.passed, "{:?}", out.report.assertions);
    }

    #[test]
    fn reports_are_byte_identical() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "name": "hopf-rec",
                "command": "hopf-recursion",
                "refinements": [0.125],
                "params": {"cases": 10, "levels": 32}
            }"#,
        )
        .unwrap();
        let a = run_experiment(&cfg, 0).unwrap();
        let b = run_experiment(&cfg, 2).unwrap();
        let ja = serde_json::to_string(&a.report).unwrap();
        let jb = serde_json::to_string(&b.report).unwrap();
        assert_eq!(ja, jb);
        assert_eq!(a.csv, b.csv);
    }

    #[test]
    fn run_to_dir_writes_artifacts() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "name": "env",
                "command": "envelope",
                "refinements": [0.125],
                "params": {"cases": 3, "cases_2d": 1}
            }"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_to_dir(&cfg, dir.path(), 0).unwrap();
        assert!(out.passed);
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("cases.csv").exists());
        assert!(dir.path().join("meta.json").exists());
    }
}
