//! Cavity distinguishability: first-linearized DN data on ∂Ω with and
//! without an interior cavity, and for two identical geometries.
//!
//! `cargo run --release --example cavity_experiment -- [n]`

use std::sync::Arc;

use calderon_lab::experiments::{cavity_distinguishability, outer_trace, Thresholds};
use calderon_lab::{build_grid, BoundaryFunction, Cavity, Nonlinearity, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(64);
    let grid = build_grid(n)?;
    let a = Arc::new(Nonlinearity::constant(grid.node_count(), &[(2, 1.0)])?);
    let trace = outer_trace(grid)?;
    let probes = vec![
        BoundaryFunction::from_fn(&trace, &grid, |_| 0.1),
        BoundaryFunction::from_fn(&trace, &grid, |p| 0.1 * p[0]),
    ];
    let disk = |r: f64| Cavity::Disk {
        center: [0.5, 0.5],
        radius: r,
    };
    let cfg = SolverConfig::default();
    let thr = Thresholds::default();
    for (d1, d2) in [
        (None, Some(disk(0.2))),
        (Some(disk(0.2)), Some(disk(0.2))),
        (Some(disk(0.15)), Some(disk(0.25))),
    ] {
        let r = cavity_distinguishability(&a, grid, d1, d2, &probes, &cfg, &thr)?;
        println!(
            "{}: max difference {:.3e}, threshold {:.0e}, {:?}",
            r.scenario, r.max_difference, r.threshold, r.verdict
        );
    }
    Ok(())
}
