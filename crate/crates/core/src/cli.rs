//! Command orchestration behind the `calderon-lab` binary.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 an
//! experiment ran but failed its acceptance threshold.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::dn_map::{BoundaryFunction, DnOracle};
use crate::error::{LabError, Result};
use crate::experiments::{
    cavity_distinguishability, identity_probes, partial_data_distinguishability,
    verify_weighted_identity, ExperimentReport,
};
use crate::forward::{residual_sup, Field, SemilinearSolver};
use crate::geometry::{boundary_trace, build_grid, build_mask, Gamma, TraceKind};
use crate::linearization::{chain_terms, default_eps, mixed_derivative};
use crate::nonlinearity::Nonlinearity;
use crate::output::{
    emit_diagnostic, write_boundary_csv, write_csv, write_field_csv, write_json,
    write_measurement_csv, write_recovery_csv, write_samples_csv, Bundle,
};
use crate::probes::{calderon_pair, combination_ledger, weight_function, ProbeSet};
use crate::reconstruction::Reconstructor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Forward,
    DnMeasure,
    Linearize,
    Reconstruct,
    CavityExp,
    PartialExp,
    IdentityCheck,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::DnMeasure => "dn-measure",
            Command::Linearize => "linearize",
            Command::Reconstruct => "reconstruct",
            Command::CavityExp => "cavity-exp",
            Command::PartialExp => "partial-exp",
            Command::IdentityCheck => "identity-check",
            Command::Selftest => "selftest",
        }
    }

    /// Commands whose failure to meet a threshold maps to exit code 4.
    pub fn is_experiment(self) -> bool {
        matches!(
            self,
            Command::CavityExp | Command::PartialExp | Command::IdentityCheck | Command::Selftest
        )
    }
}

pub fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::Config(_)
        | LabError::Geometry(_)
        | LabError::Precondition(_)
        | LabError::Json(_)
        | LabError::Io(_)
        | LabError::Csv(_) => 2,
        LabError::Solver { .. } | LabError::Dependency(_) | LabError::Diagnostic(_) => 3,
    }
}

/// Runs one command and returns the process exit code. Errors are reported
/// as one JSON object on standard error.
pub fn run(command: Command, config_path: Option<&Path>, out: &Path, jobs: Option<usize>) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            emit_diagnostic("config", &format!("cannot start worker pool: {e}"), 2);
            return 2;
        }
    };
    match pool.install(|| execute(command, config_path, out)) {
        Ok(true) => 0,
        Ok(false) => {
            emit_diagnostic(
                "acceptance",
                &format!("{} did not meet its acceptance threshold", command.name()),
                4,
            );
            4
        }
        Err(e) => {
            let code = exit_code(&e);
            emit_diagnostic(e.kind(), &e.to_string(), code);
            code
        }
    }
}

/// Executes a command; `Ok(false)` means an experiment ran but failed.
pub fn execute(command: Command, config_path: Option<&Path>, out: &Path) -> Result<bool> {
    let start = Instant::now();
    let mut bundle = Bundle::create(out)?;
    if command == Command::Selftest {
        let report = selftest();
        write_json(&bundle.path("selftest.json"), &report)?;
        bundle.finish(command.name(), b"", start.elapsed().as_secs_f64())?;
        return Ok(report.passed);
    }
    let path = config_path
        .ok_or_else(|| LabError::Config(format!("{} requires --config", command.name())))?;
    let bytes = std::fs::read(path)
        .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| LabError::Config("config is not UTF-8".into()))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let passed = match command {
        Command::Forward => forward(&cfg, &mut bundle)?,
        Command::DnMeasure => dn_measure(&cfg, &mut bundle)?,
        Command::Linearize => linearize(&cfg, &mut bundle)?,
        Command::Reconstruct => reconstruct(&cfg, &mut bundle)?,
        Command::CavityExp => cavity_exp(&cfg, &mut bundle)?,
        Command::PartialExp => partial_exp(&cfg, &mut bundle)?,
        Command::IdentityCheck => identity_check(&cfg, &mut bundle)?,
        Command::Selftest => unreachable!("handled above"),
    };
    bundle.finish(command.name(), &bytes, start.elapsed().as_secs_f64())?;
    Ok(passed)
}

struct Setup {
    mask: Arc<crate::geometry::DomainMask>,
    a: Arc<Nonlinearity>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let mask = Arc::new(cfg.geometry.mask()?);
    let a = Arc::new(cfg.nonlinearity.build(mask.grid())?);
    Ok(Setup { mask, a })
}

fn forward(cfg: &ExperimentConfig, bundle: &mut Bundle) -> Result<bool> {
    let sec = cfg.section(&cfg.forward, "forward")?;
    let s = setup(cfg)?;
    let solver = SemilinearSolver::new(s.mask.clone(), s.a.clone(), cfg.solver)?;
    let trace = Arc::new(boundary_trace(&s.mask, s.mask.data_trace_kind())?);
    let f = BoundaryFunction::from_fn(&trace, s.mask.grid(), |p| sec.boundary.eval(p));
    let u = solver.solve(&f)?;
    write_field_csv(&bundle.path("u.csv"), s.mask.grid(), &u)?;
    let summary = serde_json::json!({
        "residual_sup": residual_sup(&s.a, &s.mask, &u),
        "solution_sup": u.sup(),
        "data_sup": f.sup(),
    });
    write_json(&bundle.path("summary.json"), &summary)?;
    Ok(true)
}

fn dn_measure(cfg: &ExperimentConfig, bundle: &mut Bundle) -> Result<bool> {
    let sec = cfg.section(&cfg.forward, "forward")?;
    let s = setup(cfg)?;
    let oracle = DnOracle::new(s.mask.clone(), s.a.clone(), cfg.solver)?;
    let f = BoundaryFunction::from_fn(oracle.trace(), s.mask.grid(), |p| sec.boundary.eval(p));
    let lambda = oracle.measure(&f)?;
    write_measurement_csv(&bundle.path("dn.csv"), &f, &lambda)?;
    let summary = serde_json::json!({
        "trace": oracle.trace().kind,
        "nodes": oracle.trace().len(),
        "lambda_sup": lambda.sup(),
        "lambda_integral": lambda.integrate().0,
    });
    write_json(&bundle.path("summary.json"), &summary)?;
    Ok(true)
}

fn linearize(cfg: &ExperimentConfig, bundle: &mut Bundle) -> Result<bool> {
    let sec = cfg.section(&cfg.linearize, "linearize")?;
    let s = setup(cfg)?;
    let oracle = DnOracle::new(s.mask.clone(), s.a.clone(), cfg.solver)?;
    let probes: Vec<BoundaryFunction> = sec
        .probes
        .iter()
        .map(|p| p.build(&s.mask, oracle.trace(), cfg.solver.delta))
        .collect::<Result<_>>()?;
    let m = probes.len();
    let eps = sec.eps.unwrap_or_else(|| default_eps(cfg.solver.delta, m));
    let d = mixed_derivative(&oracle, &probes, eps)?;
    write_boundary_csv(&bundle.path("derivative.csv"), &d.values)?;
    write_json(&bundle.path("chain_terms.json"), &chain_terms(m)?)?;
    let summary = serde_json::json!({
        "order": m,
        "eps": eps,
        "probe_scales": d.scales,
        "boundary_integral": d.values.integrate().0,
        "sup": d.values.sup(),
    });
    write_json(&bundle.path("summary.json"), &summary)?;
    Ok(true)
}

#[derive(Serialize)]
struct OrderSummary {
    relative_l2: Option<f64>,
    relative_l2_truth: Option<f64>,
    w_residual: f64,
    samples: usize,
    max_sample: f64,
    eps: f64,
}

#[derive(Serialize)]
struct ReconstructSummary {
    n: usize,
    xi_max: f64,
    lattice: Vec<[f64; 2]>,
    orders: BTreeMap<usize, OrderSummary>,
}

fn reconstruct(cfg: &ExperimentConfig, bundle: &mut Bundle) -> Result<bool> {
    let sec = cfg.section(&cfg.reconstruct, "reconstruct")?;
    let s = setup(cfg)?;
    let oracle = DnOracle::new(s.mask.clone(), s.a.clone(), cfg.solver)?;
    let r = Reconstructor::new(&oracle, sec.settings.clone())?;
    let result = r.run(sec.order, Some(&s.a))?;
    let grid = *s.mask.grid();
    let mut orders = BTreeMap::new();
    for (&k, o) in &result.orders {
        let truth = Field {
            values: s
                .a
                .coefficient(k)
                .map_or_else(|| vec![0.0; grid.node_count()], |q| q.to_vec()),
        };
        write_recovery_csv(
            &bundle.path(&format!("q{k}_recovery.csv")),
            &grid,
            &truth,
            &o.field,
        )?;
        write_samples_csv(&bundle.path(&format!("q{k}_samples.csv")), &o.samples)?;
        orders.insert(
            k,
            OrderSummary {
                relative_l2: o.relative_l2_band,
                relative_l2_truth: o.relative_l2_truth,
                w_residual: o.w_residual,
                samples: o.samples.samples.len(),
                max_sample: o.samples.max_abs(),
                eps: result.eps[&k],
            },
        );
    }
    let pairs: Vec<_> = result
        .lattice
        .iter()
        .map(|&xi| calderon_pair(xi, oracle.trace(), &grid, cfg.solver.delta))
        .collect::<Result<_>>()?;
    write_json(
        &bundle.path("probes.json"),
        &ProbeSet::from_pairs(cfg.solver.delta, &pairs),
    )?;
    write_json(
        &bundle.path("summary.json"),
        &ReconstructSummary {
            n: grid.n(),
            xi_max: result.xi_max,
            lattice: result.lattice.clone(),
            orders,
        },
    )?;
    Ok(true)
}

fn write_report(bundle: &mut Bundle, report: &ExperimentReport) -> Result<()> {
    write_json(&bundle.path("report.json"), report)?;
    let rows: Vec<Vec<f64>> = report
        .probe_norms
        .iter()
        .map(|p| vec![p.probe as f64, p.sup, p.l2])
        .collect();
    write_csv(
        &bundle.path("probe_norms.csv"),
        &["probe", "sup", "l2"],
        &rows,
    )
}

fn cavity_exp(cfg: &ExperimentConfig, bundle: &mut Bundle) -> Result<bool> {
    let sec = cfg.section(&cfg.cavity_exp, "cavity_exp")?;
    let grid = cfg.geometry.grid()?;
    let a = Arc::new(cfg.nonlinearity.build(&grid)?);
    let plain = build_mask(grid, None, Gamma::All)?;
    let trace = Arc::new(boundary_trace(&plain, TraceKind::Outer)?);
    let probes: Vec<BoundaryFunction> = sec
        .probes
        .iter()
        .map(|p| p.build(&plain, &trace, cfg.solver.delta))
        .collect::<Result<_>>()?;
    let report = cavity_distinguishability(
        &a,
        grid,
        sec.cavity_a.clone(),
        sec.cavity_b.clone(),
        &probes,
        &cfg.solver,
        &cfg.thresholds,
    )?;
    write_report(bundle, &report)?;
    Ok(report.passed)
}

fn partial_exp(cfg: &ExperimentConfig, bundle: &mut Bundle) -> Result<bool> {
    let sec = cfg.section(&cfg.partial_exp, "partial_exp")?;
    let grid = cfg.geometry.grid()?;
    let a = Arc::new(cfg.nonlinearity.build(&grid)?);
    let report = partial_data_distinguishability(
        &a,
        grid,
        cfg.geometry.gamma.clone(),
        sec.notch_a.clone(),
        sec.notch_b.clone(),
        &cfg.solver,
        &cfg.thresholds,
    )?;
    write_report(bundle, &report)?;
    Ok(report.passed)
}

fn identity_check(cfg: &ExperimentConfig, bundle: &mut Bundle) -> Result<bool> {
    let sec = cfg.section(&cfg.identity, "identity")?;
    let s = setup(cfg)?;
    let grid = *s.mask.grid();
    let diff = sec.difference.sample(&grid);
    let base =
        s.a.coefficient(sec.order)
            .map_or_else(|| vec![0.0; grid.node_count()], |q| q.to_vec());
    let a2 = base.iter().zip(&diff).map(|(q, d)| q - d).collect();
    let a2 = Arc::new(s.a.with_coefficient(sec.order, a2)?);
    let (probes, _) = identity_probes(&s.mask, sec.xi, sec.order, cfg.solver.delta)?;
    let report = verify_weighted_identity(
        &s.a,
        &a2,
        &s.mask,
        sec.order,
        &probes,
        &cfg.solver,
        &cfg.thresholds,
    )?;
    write_report(bundle, &report)?;
    Ok(report.passed)
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<SelftestCheck>,
    pub passed: bool,
}

fn check(name: &str, f: impl FnOnce() -> Result<bool>) -> SelftestCheck {
    let (passed, detail) = match f() {
        Ok(p) => (p, String::new()),
        Err(e) => (false, e.to_string()),
    };
    SelftestCheck {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Fast closed-form checks from every module.
pub fn selftest() -> SelftestReport {
    let mut checks = vec![
        check("grid sizes", || {
            let g = build_grid(8)?;
            Ok(g.h() == 0.125 && g.node_count() == 81 && build_grid(4).is_err())
        }),
        check("outer perimeter", || {
            let m = build_mask(build_grid(64)?, None, Gamma::All)?;
            let t = boundary_trace(&m, TraceKind::Outer)?;
            Ok((t.weights.iter().sum::<f64>() - 4.0).abs() < 1e-12)
        }),
        check("polynomial nonlinearity", || {
            let a = Nonlinearity::constant(1, &[(2, 2.0), (3, 6.0)])?;
            let b = Nonlinearity::constant(1, &[(2, 2.0)])?;
            Ok(a.eval(0, 1.0) == 2.0 && b.eval(0, 3.0) == 9.0 && b.eval_dz(0, 0.0, 1) == 0.0)
        }),
        check("harmonic linear data", || {
            let m = Arc::new(build_mask(build_grid(16)?, None, Gamma::All)?);
            let g = *m.grid();
            let o = DnOracle::new(
                m,
                Arc::new(Nonlinearity::zero(g.node_count())),
                Default::default(),
            )?;
            let f = BoundaryFunction::from_fn(o.trace(), &g, |p| 0.1 * p[0]);
            let lam = o.measure(&f)?;
            Ok((0..lam.len())
                .filter(|&k| !o.trace().corner[k])
                .all(|k| (lam.re()[k] - 0.1 * o.trace().normals[k][0]).abs() < 1e-9))
        }),
        check("ledger coefficients", || {
            let l = combination_ledger(2)?;
            let c: Vec<[f64; 2]> = l
                .entries
                .iter()
                .map(|e| [e.coefficient.re, e.coefficient.im])
                .collect();
            Ok(c == vec![[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [-1.0, 0.0]])
        }),
        check("bell numbers", || {
            let counts: Vec<usize> = (1..=5)
                .map(|m| chain_terms(m).map(|t| t.len()))
                .collect::<Result<_>>()?;
            Ok(counts == vec![1, 2, 5, 15, 52])
        }),
        check("constant weight function", || {
            let m = build_mask(build_grid(16)?, None, Gamma::All)?;
            Ok(weight_function(&m)?
                .values
                .iter()
                .all(|v| (v - 1.0).abs() < 1e-12))
        }),
        check("zero frequency probe", || {
            let m = build_mask(build_grid(16)?, None, Gamma::All)?;
            let t = Arc::new(boundary_trace(&m, TraceKind::Outer)?);
            let p = calderon_pair([0.0, 0.0], &t, m.grid(), 0.1)?;
            Ok(p.f1.re().iter().all(|v| (v - 0.1).abs() < 1e-15))
        }),
        check("first derivative of linear map", || {
            let m = Arc::new(build_mask(build_grid(16)?, None, Gamma::All)?);
            let g = *m.grid();
            let o = DnOracle::new(
                m,
                Arc::new(Nonlinearity::zero(g.node_count())),
                Default::default(),
            )?;
            let f = BoundaryFunction::from_fn(o.trace(), &g, |p| 0.05 * p[0] * p[1]);
            let d = mixed_derivative(&o, std::slice::from_ref(&f), 1e-3)?;
            Ok(d.values.max_abs_diff(&o.measure(&f)?) < 1e-9)
        }),
    ];
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let passed = checks.iter().all(|c| c.passed);
    SelftestReport { checks, passed }
}
