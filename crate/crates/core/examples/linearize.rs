//! Higher-order linearization: mixed derivatives of the DN map, their
//! symmetry and multilinearity, and the chain-rule partition terms.
//!
//! `cargo run --release --example linearize -- [n]`

use std::sync::Arc;

use calderon_lab::linearization::default_eps;
use calderon_lab::{
    build_grid, build_mask, chain_terms, mixed_derivative, BoundaryFunction, DnOracle, Gamma,
    Nonlinearity, SolverConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(32);
    let grid = build_grid(n)?;
    let mask = Arc::new(build_mask(grid, None, Gamma::All)?);
    let a = Arc::new(Nonlinearity::constant(
        grid.node_count(),
        &[(2, 1.0), (3, 0.5)],
    )?);
    let cfg = SolverConfig::default();
    let oracle = DnOracle::new(mask, a, cfg)?;
    let trace = oracle.trace().clone();

    let f1 = BoundaryFunction::from_fn(&trace, &grid, |p| 0.1 * (1.0 + p[0]) / 2.0);
    let f2 = BoundaryFunction::from_fn(&trace, &grid, |p| 0.1 * (p[0] * p[1]));
    let f3 = BoundaryFunction::from_fn(&trace, &grid, |_| 0.1);

    let eps = default_eps(cfg.delta, 2);
    let d12 = mixed_derivative(&oracle, &[f1.clone(), f2.clone()], eps)?;
    let d21 = mixed_derivative(&oracle, &[f2.clone(), f1.clone()], eps)?;
    println!(
        "order 2: sup = {:.4e}, permutation difference = {:e}",
        d12.values.sup(),
        d12.values.max_abs_diff(&d21.values)
    );
    let d3 = mixed_derivative(
        &oracle,
        &[f1.clone(), f2.clone(), f3.clone()],
        default_eps(cfg.delta, 3),
    )?;
    let d3_scaled = mixed_derivative(
        &oracle,
        &[f1.scaled(0.5), f2, f3],
        default_eps(cfg.delta, 3),
    )?;
    let ratio = d3_scaled.values.sup() / d3.values.sup();
    println!(
        "order 3: sup = {:.4e}, halving one probe scales by {ratio:.12}",
        d3.values.sup()
    );

    for m in 1..=5 {
        let terms = chain_terms(m)?;
        println!("m = {m}: {} set partitions", terms.len());
    }
    for t in chain_terms(3)? {
        println!("  blocks {:?} (coefficient order {})", t.blocks, t.order());
    }
    Ok(())
}
