//! Weighted integral identity on a domain with a cavity: the interior
//! integral of the coefficient difference against probe products and the
//! weight function equals the weighted boundary integral of the DN-derivative
//! difference.
//!
//! `cargo run --release --example weighted_identity -- [n]`

use std::sync::Arc;

use calderon_lab::experiments::{identity_probes, verify_weighted_identity, Thresholds};
use calderon_lab::{build_grid, build_mask, Cavity, Gamma, Nonlinearity, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(64);
    let grid = build_grid(n)?;
    let cfg = SolverConfig::default();
    let thr = Thresholds::default();
    let nc = grid.node_count();
    let a1 = Arc::new(Nonlinearity::constant(nc, &[(2, 1.0), (3, 0.5)])?);
    let a2 = Arc::new(Nonlinearity::constant(nc, &[(2, 1.0)])?);
    let b1 = Arc::new(Nonlinearity::constant(nc, &[(2, 2.0)])?);
    let b2 = Arc::new(Nonlinearity::zero(nc));
    let cavity = Cavity::Disk {
        center: [0.5, 0.5],
        radius: 0.2,
    };
    for cav in [None, Some(cavity)] {
        let mask = Arc::new(build_mask(grid, cav.clone(), Gamma::All)?);
        for (m, x1, x2) in [(2, &b1, &b2), (3, &a1, &a2)] {
            let (probes, _) = identity_probes(&mask, [0.0, 0.0], m, cfg.delta)?;
            let r = verify_weighted_identity(x1, x2, &mask, m, &probes, &cfg, &thr)?;
            let id = r.identity.as_ref().expect("identity residual");
            println!(
                "{}: left {:+.6e}, right {:+.6e}, relative gap {:.3e}, {:?}",
                r.scenario, id.left[0], id.right[0], id.relative_gap, r.verdict
            );
        }
    }
    Ok(())
}
