//! Regularized recovery of `q₂` on a domain with a cavity from the weighted
//! identities of adapted exponential probe pairs, by truncated SVD.
//!
//! `cargo run --release --example masked_recovery -- [n] [radius_in_pi]`

use std::collections::BTreeMap;
use std::sync::Arc;

use calderon_lab::experiments::{masked_coefficient_recovery, MASKED_TRUNCATION};
use calderon_lab::reconstruction::lattice_within;
use calderon_lab::{
    build_grid, build_mask, Cavity, CoefficientExpr, DnOracle, Field, Gamma, Nonlinearity,
    SolverConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(64);
    let radius: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3.0);
    let grid = build_grid(n)?;
    let cavity = Cavity::Disk {
        center: [0.3, 0.3],
        radius: 0.12,
    };
    let mask = Arc::new(build_mask(grid, Some(cavity), Gamma::All)?);
    let bump = CoefficientExpr::GaussianBump {
        center: [0.65, 0.65],
        width: 0.15,
        amplitude: 1.0,
    };
    let a = Arc::new(Nonlinearity::from_exprs(
        &grid,
        &BTreeMap::from([(2, bump)]),
    )?);
    let oracle = DnOracle::new(mask, a.clone(), SolverConfig::default())?;
    let truth = Field {
        values: a.coefficient(2).expect("q2").to_vec(),
    };
    let lattice = lattice_within(radius * std::f64::consts::PI);
    let r = masked_coefficient_recovery(&oracle, &lattice, MASKED_TRUNCATION, Some(&truth))?;
    println!(
        "lattice points {}, rank {} of {}, relative L2 {:.4}",
        lattice.len(),
        r.rank,
        r.singular_values.len(),
        r.relative_l2.unwrap_or(f64::NAN)
    );
    Ok(())
}
