//! DN map of a semilinear problem and its first linearization: the odd
//! difference quotient approaches the Laplace DN map as ε → 0.
//!
//! `cargo run --release --example dn_map -- [n]`

use std::sync::Arc;

use calderon_lab::{
    build_grid, build_mask, neumann_trace, solve_linear, BoundaryFunction, DnOracle, Field, Gamma,
    Nonlinearity, SolverConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(64);
    let grid = build_grid(n)?;
    let mask = Arc::new(build_mask(grid, None, Gamma::All)?);
    let a = Arc::new(Nonlinearity::constant(
        grid.node_count(),
        &[(2, 2.0), (3, 1.0)],
    )?);
    let oracle = DnOracle::new(mask.clone(), a, SolverConfig::default())?;
    let trace = oracle.trace().clone();

    let f = BoundaryFunction::from_fn(&trace, &grid, |p| (p[0] - 0.3 * p[1]).cos());
    let zero = Field::zeros(grid.node_count());
    let v = solve_linear(&zero, &zero, &mask, &f)?;
    let lambda0 = neumann_trace(&v, &mask, &trace)?;

    let lambda = oracle.measure(&f.scaled(0.05))?;
    println!("sup |Λ_a(0.05 f)| = {:.4e}", lambda.sup());
    for eps in [1e-2, 1e-3, 1e-4] {
        let plus = oracle.measure(&f.scaled(eps))?;
        let minus = oracle.measure(&f.scaled(-eps))?;
        let quotient = BoundaryFunction::combination(&[(0.5 / eps, &plus), (-0.5 / eps, &minus)])?;
        println!(
            "eps = {eps:.0e}: sup |(Λ(εf) − Λ(−εf))/2ε − Λ₀ f| = {:.3e}",
            quotient.max_abs_diff(&lambda0)
        );
    }
    Ok(())
}
