//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.
//! Runs without the libtest harness so the lines always reach the output.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use calderon_lab::experiments::{
    bump_probe, cavity_distinguishability, identity_probes, outer_trace,
    partial_data_distinguishability, verify_weighted_identity, Thresholds,
};
use calderon_lab::forward::LinearFieldSolver;
use calderon_lab::linearization::{complex_mixed_derivative, default_eps, LowerFields};
use calderon_lab::reconstruction::{
    harmonic_extension, reconstruct, solve_w_fields, ReconstructionConfig,
};
use calderon_lab::{
    boundary_trace, build_grid, build_mask, chain_terms, mixed_derivative, solve_linear,
    solve_semilinear, BoundaryFunction, Cavity, CoefficientExpr, DnOracle, Edge, Field, Gamma,
    Grid, Nonlinearity, Notch, SolverConfig,
};
use num_complex::Complex64;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome);

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn bump(center: [f64; 2]) -> CoefficientExpr {
    CoefficientExpr::GaussianBump {
        center,
        width: 0.15,
        amplitude: 1.0,
    }
}

/// Largest difference at the nodes shared with a finer reference grid.
fn coarse_error(coarse: &Field, cg: &Grid, fine: &Field, fg: &Grid) -> f64 {
    let r = fg.n() / cg.n();
    (0..cg.node_count())
        .map(|k| {
            let (i, j) = cg.ij(k);
            (coarse.values[k] - fine.values[fg.index(i * r, j * r)]).abs()
        })
        .fold(0.0, f64::max)
}

fn sci(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Least-squares slope of `log y` against `log x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn linear_fixture(n: usize) -> Result<(Grid, Field), Box<dyn std::error::Error>> {
    let grid = build_grid(n)?;
    let mask = build_mask(grid, None, Gamma::All)?;
    let trace = Arc::new(boundary_trace(&mask, mask.data_trace_kind())?);
    let g = BoundaryFunction::from_fn(&trace, &grid, |p| 0.1 * (2.0 * p[0] + p[1]).cos());
    let c = Field::constant(grid.node_count(), 1.0);
    let source = Field::from_fn(&grid, |p| p[0].exp() * p[1]);
    Ok((grid, solve_linear(&c, &source, &mask, &g)?))
}

fn criterion_1() -> Outcome {
    let grid = build_grid(64)?;
    let mask = build_mask(grid, None, Gamma::All)?;
    let trace = Arc::new(boundary_trace(&mask, mask.data_trace_kind())?);
    let zero = Field::zeros(grid.node_count());
    let g = BoundaryFunction::from_fn(&trace, &grid, |p| 0.1 * p[0]);
    let u = solve_linear(&zero, &zero, &mask, &g)?;
    let harmonic = u.max_abs_diff(&Field::from_fn(&grid, |p| 0.1 * p[0]));

    let (fg, reference) = linear_fixture(512)?;
    let mut errors = Vec::new();
    for n in [32, 64, 128] {
        let (cg, u) = linear_fixture(n)?;
        errors.push(coarse_error(&u, &cg, &reference, &fg));
    }
    let orders = observed_orders(&errors);
    let pass = harmonic <= 1e-10 && orders.iter().all(|&p| p >= 1.8);
    Ok((
        pass,
        format!("harmonic error {harmonic:.2e} (<= 1e-10); errors [{}]; observed orders {orders:.3?} (>= 1.8)", sci(&errors)),
    ))
}

fn criterion_2() -> Outcome {
    let grid = build_grid(64)?;
    let mask = build_mask(grid, None, Gamma::All)?;
    let trace = Arc::new(boundary_trace(&mask, mask.data_trace_kind())?);
    // a = z², i.e. q₂ = 2
    let a = Nonlinearity::constant(grid.node_count(), &[(2, 2.0)])?;
    let f = BoundaryFunction::from_fn(&trace, &grid, |p| (p[0] + 2.0 * p[1]).cos());
    let zero = Field::zeros(grid.node_count());
    let v = solve_linear(&zero, &zero, &mask, &f)?;
    let eps = [1e-1, 1e-2, 1e-3];
    let mut errors = Vec::new();
    for &e in &eps {
        let u = solve_semilinear(&a, &mask, &f.scaled(e), &SolverConfig::default())?;
        errors.push(u.max_abs_diff(&v.scaled(e)));
    }
    let slope = loglog_slope(&eps, &errors);
    Ok((
        (slope - 2.0).abs() <= 0.2,
        format!("errors [{}]; slope {slope:.4} (2.0 ± 0.2)", sci(&errors)),
    ))
}

fn criterion_3() -> Outcome {
    let grid = build_grid(32)?;
    let mask = Arc::new(build_mask(grid, None, Gamma::All)?);
    let a = Arc::new(Nonlinearity::constant(
        grid.node_count(),
        &[(2, 1.0), (3, 0.5)],
    )?);
    let cfg = SolverConfig::default();
    let oracle = DnOracle::new(mask, a, cfg)?;
    let trace = oracle.trace().clone();
    let f1 = BoundaryFunction::from_fn(&trace, &grid, |p| 0.1 * (1.0 + p[0]) / 2.0);
    let f2 = BoundaryFunction::from_fn(&trace, &grid, |p| 0.1 * (3.0 * p[0] - p[1]).sin());
    let f3 = BoundaryFunction::from_fn(&trace, &grid, |p| 0.05 + 0.05 * p[1] * p[1]);
    let eps = default_eps(cfg.delta, 3);

    let base = mixed_derivative(&oracle, &[f1.clone(), f2.clone(), f3.clone()], eps)?;
    let perm = mixed_derivative(&oracle, &[f3.clone(), f1.clone(), f2.clone()], eps)?;
    let symmetric = base.values.re() == perm.values.re();

    let mut linear_err = 0.0f64;
    for lambda in [0.5, 3.0, 0.37] {
        let scaled = mixed_derivative(&oracle, &[f1.clone(), f2.scaled(lambda), f3.clone()], eps)?;
        let expect = base.values.scaled(lambda);
        linear_err = linear_err.max(scaled.values.max_abs_diff(&expect) / expect.sup());
    }
    let bell: Vec<usize> = (1..=5)
        .map(|m| chain_terms(m).map(|t| t.len()))
        .collect::<Result<_, _>>()?;
    let pass = symmetric && linear_err <= 1e-9 && bell == [1, 2, 5, 15, 52];
    Ok((
        pass,
        format!("permutation bit-identical: {symmetric}; m-linearity relative error {linear_err:.2e} (<= 1e-9); partition counts {bell:?}"),
    ))
}

fn criterion_4() -> Outcome {
    let grid = build_grid(64)?;
    let mask = Arc::new(build_mask(grid, None, Gamma::All)?);
    let (c, s) = (1.0, 0.1);
    // a = c z², so ∂²_z a(x,0) = 2c against the zero nonlinearity.
    let a = Arc::new(Nonlinearity::constant(grid.node_count(), &[(2, 2.0 * c)])?);
    let zero = Arc::new(Nonlinearity::zero(grid.node_count()));
    let cfg = SolverConfig::default();
    let o1 = DnOracle::new(mask.clone(), a, cfg)?;
    let o0 = DnOracle::new(mask, zero, cfg)?;
    let probe = BoundaryFunction::from_fn(o1.trace(), &grid, |_| s);
    let probes = [probe.clone(), probe];
    let d1 = complex_mixed_derivative(&o1, &probes, 1e-2)?.integrate().0;
    let d0 = complex_mixed_derivative(&o0, &probes, 1e-2)?.integrate().0;
    let measured = d1 - d0;
    let closed = -2.0 * c * s * s;
    let rel = (measured - closed).abs() / closed.abs();
    Ok((
        rel <= 0.05,
        format!("boundary integral {measured:.6e} vs closed form {closed:.6e}; relative gap {rel:.3e} (<= 5e-2)"),
    ))
}

fn criterion_5() -> Outcome {
    let grid = build_grid(64)?;
    let mask = Arc::new(build_mask(grid, None, Gamma::All)?);
    let settings = ReconstructionConfig {
        k_max: 2,
        lattice_radius: TWO_PI,
        ..ReconstructionConfig::default()
    };
    let a = Arc::new(Nonlinearity::from_exprs(
        &grid,
        &BTreeMap::from([(2, bump([0.5, 0.5]))]),
    )?);
    let oracle = Arc::new(DnOracle::new(
        mask.clone(),
        a.clone(),
        SolverConfig::default(),
    )?);
    let r = reconstruct(&oracle, &settings, 2, Some(&a))?;
    let band = r.orders[&2].relative_l2_band.expect("ground truth given");
    let truth = r.orders[&2].relative_l2_truth.expect("ground truth given");

    let cubic = Arc::new(Nonlinearity::constant(grid.node_count(), &[(3, 1.0)])?);
    let oracle = Arc::new(DnOracle::new(mask, cubic, SolverConfig::default())?);
    let r0 = reconstruct(&oracle, &settings, 2, None)?;
    let leak = r0.orders[&2]
        .samples
        .max_abs()
        .max(r0.orders[&2].field.sup());
    Ok((
        band <= 0.10 && leak <= 1e-6,
        format!("relative L2 vs quadrature oracle {band:.4} (<= 0.10), vs ground truth {truth:.4} (reported); zero-target leakage {leak:.2e} (<= 1e-6)"),
    ))
}

/// `w` for the slots `(s, s·xy)` with `q₂ = bump`, real part.
fn w_fixture(n: usize) -> Result<(Grid, Field), Box<dyn std::error::Error>> {
    let grid = build_grid(n)?;
    let mask = build_mask(grid, None, Gamma::All)?;
    let trace = Arc::new(boundary_trace(&mask, mask.data_trace_kind())?);
    let a = Nonlinearity::from_exprs(&grid, &BTreeMap::from([(2, bump([0.5, 0.5]))]))?;
    let laplace = LinearFieldSolver::laplace(&mask)?;
    let mut probes = LowerFields::new();
    let constant = BoundaryFunction::from_fn(&trace, &grid, |_| 0.1);
    let bilinear = BoundaryFunction::from_fn(&trace, &grid, |p| 0.1 * p[0] * p[1]);
    probes.insert(vec![0], harmonic_extension(&laplace, &constant)?);
    probes.insert(vec![1], harmonic_extension(&laplace, &bilinear)?);
    let (fields, _) = solve_w_fields(&a, &laplace, &[0, 1], probes, 2)?;
    let w = &fields[&vec![0, 1]];
    Ok((
        grid,
        Field {
            values: w.iter().map(|z: &Complex64| z.re).collect(),
        },
    ))
}

fn criterion_6() -> Outcome {
    let grid = build_grid(64)?;
    let mask = Arc::new(build_mask(grid, None, Gamma::All)?);
    let exprs = BTreeMap::from([(2, bump([0.5, 0.5])), (3, bump([0.45, 0.55]))]);
    let a = Arc::new(Nonlinearity::from_exprs(&grid, &exprs)?);
    let oracle = Arc::new(DnOracle::new(mask, a.clone(), SolverConfig::default())?);
    let settings = ReconstructionConfig {
        k_max: 2,
        lattice_radius: TWO_PI,
        ..ReconstructionConfig::default()
    };
    let r = reconstruct(&oracle, &settings, 3, Some(&a))?;
    let band2 = r.orders[&2].relative_l2_band.expect("ground truth given");
    let band3 = r.orders[&3].relative_l2_band.expect("ground truth given");
    let truth3 = r.orders[&3].relative_l2_truth.expect("ground truth given");

    let (fg, reference) = w_fixture(512)?;
    let mut errors = Vec::new();
    for n in [32, 64, 128] {
        let (cg, w) = w_fixture(n)?;
        errors.push(coarse_error(&w, &cg, &reference, &fg));
    }
    let orders = observed_orders(&errors);
    Ok((
        band3 <= 0.15 && orders.iter().all(|&p| p >= 1.8),
        format!("q3 relative L2 vs quadrature oracle {band3:.4} (<= 0.15), vs ground truth {truth3:.4} (reported); q2 {band2:.4}; w-field errors [{}], observed orders {orders:.3?} (>= 1.8)", sci(&errors)),
    ))
}

fn criterion_7() -> Outcome {
    let grid = build_grid(64)?;
    let a = Arc::new(Nonlinearity::constant(grid.node_count(), &[(2, 1.0)])?);
    let trace = outer_trace(grid)?;
    let probes = [BoundaryFunction::from_fn(&trace, &grid, |_| 0.1)];
    let disk = Some(Cavity::Disk {
        center: [0.5, 0.5],
        radius: 0.2,
    });
    let cfg = SolverConfig::default();
    let thr = Thresholds::default();
    let apart = cavity_distinguishability(&a, grid, None, disk.clone(), &probes, &cfg, &thr)?;
    let same = cavity_distinguishability(&a, grid, disk.clone(), disk, &probes, &cfg, &thr)?;
    Ok((
        apart.max_difference > 1e-2 && same.max_difference < 1e-8,
        format!(
            "none vs disk {:.3e} (> 1e-2); identical {:.3e} (< 1e-8)",
            apart.max_difference, same.max_difference
        ),
    ))
}

fn identity_gap(n: usize, cavity: Option<Cavity>) -> Result<f64, Box<dyn std::error::Error>> {
    let grid = build_grid(n)?;
    let mask = Arc::new(build_mask(grid, cavity, Gamma::All)?);
    let cfg = SolverConfig::default();
    let a1 = Arc::new(Nonlinearity::constant(grid.node_count(), &[(2, 1.0)])?);
    let a2 = Arc::new(Nonlinearity::zero(grid.node_count()));
    let (probes, _) = identity_probes(&mask, [0.0, 0.0], 2, cfg.delta)?;
    let r = verify_weighted_identity(&a1, &a2, &mask, 2, &probes, &cfg, &Thresholds::default())?;
    Ok(r.identity.expect("identity residual").relative_gap)
}

fn criterion_8() -> Outcome {
    let disk = Cavity::Disk {
        center: [0.5, 0.5],
        radius: 0.2,
    };
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, cavity) in [("no cavity", None), ("disk cavity", Some(disk))] {
        let g32 = identity_gap(32, cavity.clone())?;
        let g64 = identity_gap(64, cavity)?;
        pass &= g64 <= 0.05 && g64 < g32;
        detail.push(format!("{name}: gap n=32 {g32:.3e}, n=64 {g64:.3e}"));
    }
    Ok((
        pass,
        format!("{} (n=64 <= 5e-2, decreasing)", detail.join("; ")),
    ))
}

fn criterion_9() -> Outcome {
    let grid = build_grid(64)?;
    let a = Arc::new(Nonlinearity::constant(grid.node_count(), &[(2, 1.0)])?);
    let gamma = Gamma::Edges(vec![Edge::Right]);
    let notch = Some(Notch {
        edge: Edge::Left,
        depth: 0.2,
        start: 0.4,
        end: 0.6,
    });
    let cfg = SolverConfig::default();
    let thr = Thresholds::default();
    let apart =
        partial_data_distinguishability(&a, grid, gamma.clone(), None, notch.clone(), &cfg, &thr)?;
    let same = partial_data_distinguishability(&a, grid, gamma.clone(), None, None, &cfg, &thr)?;
    let mask = build_mask(grid, None, gamma)?;
    let probe_sup = bump_probe(&mask, cfg.delta)?.sup();
    Ok((
        apart.max_difference > 1e-8 && same.max_difference < 1e-8,
        format!(
            "notched vs full on Γ {:.3e} (> 1e-8); identical {:.3e} (< 1e-8); bump probe sup {probe_sup}",
            apart.max_difference, same.max_difference
        ),
    ))
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).expect("output directory") {
        let path = entry.expect("directory entry").path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.insert(name, fs::read(&path).expect("csv bytes"));
        }
    }
    out
}

fn criterion_10() -> Outcome {
    let configs = [
        (
            "reconstruct",
            r#"{"schema_version": "1", "geometry": {"n": 32},
               "nonlinearity": {"coefficients": {
                 "2": {"type": "gaussian_bump", "center": [0.5, 0.5], "width": 0.15, "amplitude": 1.0},
                 "3": {"type": "constant", "value": 0.5}}},
               "reconstruct": {"order": 3, "settings": {"k_max": 2, "lattice_radius": 6.283185307179586}}}"#,
        ),
        (
            "cavity-exp",
            r#"{"schema_version": "1", "geometry": {"n": 32},
               "nonlinearity": {"coefficients": {"2": {"type": "constant", "value": 1.0}}},
               "cavity_exp": {"cavity_a": null,
                 "cavity_b": {"type": "disk", "center": [0.5, 0.5], "radius": 0.2},
                 "probes": [{"type": "constant", "value": 0.1},
                            {"type": "calderon", "xi": [3.141592653589793, 0.0]}]}}"#,
        ),
        (
            "partial-exp",
            r#"{"schema_version": "1", "geometry": {"n": 32, "gamma": ["right"]},
               "nonlinearity": {"coefficients": {"2": {"type": "constant", "value": 1.0}}},
               "partial_exp": {"notch_a": null,
                 "notch_b": {"edge": "left", "depth": 0.2, "start": 0.4, "end": 0.6}}}"#,
        ),
        (
            "identity-check",
            r#"{"schema_version": "1",
               "geometry": {"n": 32, "cavity": {"type": "disk", "center": [0.5, 0.5], "radius": 0.2}},
               "nonlinearity": {"coefficients": {"2": {"type": "constant", "value": 1.0}}},
               "identity": {"order": 2, "difference": {"type": "constant", "value": 1.0}, "xi": [3.141592653589793, 0.0]}}"#,
        ),
    ];
    let exe = env!("CARGO_BIN_EXE_calderon-lab");
    let tmp = tempfile::tempdir()?;
    let mut pass = true;
    let mut detail = Vec::new();
    for (command, config) in configs {
        let cfg_path = tmp.path().join(format!("{command}.json"));
        fs::write(&cfg_path, config)?;
        let mut runs = Vec::new();
        for (tag, jobs) in [("a", "1"), ("b", "1"), ("c", "8")] {
            let out = tmp.path().join(format!("{command}-{tag}"));
            let status = Command::new(exe)
                .args([command, "--jobs", jobs, "--config"])
                .arg(&cfg_path)
                .arg("--out")
                .arg(&out)
                .status()?;
            pass &= status.code() == Some(0);
            runs.push(csv_files(&out));
        }
        let identical = !runs[0].is_empty() && runs.iter().all(|r| r == &runs[0]);
        pass &= identical;
        detail.push(format!(
            "{command}: {} csv, identical {identical}",
            runs[0].len()
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("forward correctness", criterion_1),
        ("small-data asymptotics", criterion_2),
        ("linearization engine", criterion_3),
        ("constant-coefficient integral identity", criterion_4),
        ("order-2 reconstruction", criterion_5),
        ("order-3 recursive reconstruction", criterion_6),
        ("cavity distinguishability", criterion_7),
        ("weighted identity", criterion_8),
        ("partial-data distinguishability", criterion_9),
        ("determinism", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id} ({name}): {detail} [{secs:.1} s]",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
