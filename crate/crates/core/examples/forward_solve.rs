//! Forward solves on the unit square: the linear Laplace problem against a
//! discrete-harmonic fixture, then a semilinear problem by Newton's method.
//!
//! `cargo run --release --example forward_solve -- [n]`

use std::collections::BTreeMap;

use calderon_lab::forward::residual_sup;
use calderon_lab::{
    boundary_trace, build_grid, build_mask, solve_linear, solve_semilinear, BoundaryFunction,
    Cavity, CoefficientExpr, Field, Gamma, Nonlinearity, SolverConfig,
};
use std::sync::Arc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(64);
    let grid = build_grid(n)?;
    let mask = build_mask(grid, None, Gamma::All)?;
    let trace = Arc::new(boundary_trace(&mask, mask.data_trace_kind())?);

    // u = 0.1 x is discrete-harmonic, so the 5-point scheme reproduces it.
    let g = BoundaryFunction::from_fn(&trace, &grid, |p| 0.1 * p[0]);
    let zero = Field::zeros(grid.node_count());
    let u = solve_linear(&zero, &zero, &mask, &g)?;
    let exact = Field::from_fn(&grid, |p| 0.1 * p[0]);
    println!("linear: sup |u - 0.1 x| = {:.2e}", u.max_abs_diff(&exact));

    // a(x,z) = bump(x) z² / 2 + z³ / 6 on a square with a disk cavity.
    let cavity = Cavity::Disk {
        center: [0.5, 0.5],
        radius: 0.2,
    };
    let mask = build_mask(grid, Some(cavity), Gamma::All)?;
    let trace = Arc::new(boundary_trace(&mask, mask.data_trace_kind())?);
    let exprs = BTreeMap::from([
        (
            2,
            CoefficientExpr::GaussianBump {
                center: [0.5, 0.5],
                width: 0.15,
                amplitude: 1.0,
            },
        ),
        (3, CoefficientExpr::Constant { value: 1.0 }),
    ]);
    let a = Nonlinearity::from_exprs(&grid, &exprs)?;
    let f = BoundaryFunction::from_fn(&trace, &grid, |p| 0.08 * (1.0 + p[0] * p[1]) / 2.0);
    let u = solve_semilinear(&a, &mask, &f, &SolverConfig::default())?;
    println!(
        "semilinear with cavity: sup u = {:.4e}, residual = {:.2e}",
        u.sup(),
        residual_sup(&a, &mask, &u)
    );
    Ok(())
}
