//! Partial data: Dirichlet data and Neumann measurements only on Γ (the
//! right edge). A notch cut into the hidden left edge changes the data on Γ.
//!
//! `cargo run --release --example partial_data -- [n]`

use std::sync::Arc;

use calderon_lab::experiments::{partial_data_distinguishability, Thresholds};
use calderon_lab::{build_grid, Edge, Gamma, Nonlinearity, Notch, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(64);
    let grid = build_grid(n)?;
    let a = Arc::new(Nonlinearity::constant(grid.node_count(), &[(2, 1.0)])?);
    let gamma = Gamma::Edges(vec![Edge::Right]);
    let notch = |depth: f64| Notch {
        edge: Edge::Left,
        depth,
        start: 0.4,
        end: 0.6,
    };
    let cfg = SolverConfig::default();
    let thr = Thresholds::default();
    for (n1, n2) in [
        (None, Some(notch(0.2))),
        (None, Some(notch(0.05))),
        (Some(notch(0.2)), Some(notch(0.2))),
    ] {
        let r = partial_data_distinguishability(&a, grid, gamma.clone(), n1, n2, &cfg, &thr)?;
        println!(
            "{}: max difference on Γ {:.3e}, threshold {:.0e}, {:?}",
            r.scenario, r.max_difference, r.threshold, r.verdict
        );
    }
    Ok(())
}
