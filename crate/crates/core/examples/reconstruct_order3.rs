//! Sequential recovery of `q₂` and `q₃` when both are present: order 2 from
//! the Fourier formula, then order 3 after subtracting the chain-rule terms
//! built from the recovered `q₂`.
//!
//! `cargo run --release --example reconstruct_order3 -- [n] [radius_in_pi]`

use std::collections::BTreeMap;
use std::sync::Arc;

use calderon_lab::reconstruction::{reconstruct, ReconstructionConfig};
use calderon_lab::{
    build_grid, build_mask, CoefficientExpr, DnOracle, Gamma, Nonlinearity, SolverConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(64);
    let radius: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2.0);

    let grid = build_grid(n)?;
    let mask = Arc::new(build_mask(grid, None, Gamma::All)?);
    let exprs = BTreeMap::from([
        (
            2,
            CoefficientExpr::GaussianBump {
                center: [0.5, 0.5],
                width: 0.15,
                amplitude: 1.0,
            },
        ),
        (
            3,
            CoefficientExpr::GaussianBump {
                center: [0.45, 0.55],
                width: 0.15,
                amplitude: 1.0,
            },
        ),
    ]);
    let a = Arc::new(Nonlinearity::from_exprs(&grid, &exprs)?);
    let oracle = Arc::new(DnOracle::new(mask, a.clone(), SolverConfig::default())?);

    let cfg = ReconstructionConfig {
        k_max: radius.floor() as i32,
        lattice_radius: radius * std::f64::consts::PI,
        ..ReconstructionConfig::default()
    };
    let result = reconstruct(&oracle, &cfg, 3, Some(&a))?;
    println!(
        "n = {n}, |xi| <= {radius} pi, {} lattice points",
        result.lattice.len()
    );
    for (k, r) in &result.orders {
        println!(
            "q{k}: relative L2 vs band-limited oracle {:.4}, vs truth {:.4}, eps {:.1e}, w residual {:.1e}, {:.1} s",
            r.relative_l2_band.unwrap_or(f64::NAN),
            r.relative_l2_truth.unwrap_or(f64::NAN),
            result.eps[k],
            r.w_residual,
            r.runtime_s
        );
    }
    Ok(())
}
