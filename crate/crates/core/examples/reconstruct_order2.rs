//! Order-2 recovery of a Gaussian-bump coefficient from simulated DN data.
//!
//! `cargo run --release --example reconstruct_order2 -- [n] [radius_in_pi]`

use std::collections::BTreeMap;
use std::sync::Arc;

use calderon_lab::reconstruction::{
    l2_norm, lattice_within, quadrature_samples, reconstruct, relative_l2, synthesize,
    ReconstructionConfig,
};
use calderon_lab::{
    build_grid, build_mask, CoefficientExpr, DnOracle, Field, Gamma, Nonlinearity, SolverConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(64);
    let radius: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2.0);

    let grid = build_grid(n)?;
    let mask = Arc::new(build_mask(grid, None, Gamma::All)?);
    let bump = CoefficientExpr::GaussianBump {
        center: [0.5, 0.5],
        width: 0.15,
        amplitude: 1.0,
    };
    let a = Arc::new(Nonlinearity::from_exprs(
        &grid,
        &BTreeMap::from([(2, bump)]),
    )?);
    let oracle = Arc::new(DnOracle::new(
        mask.clone(),
        a.clone(),
        SolverConfig::default(),
    )?);

    let r = radius * std::f64::consts::PI;
    let cfg = ReconstructionConfig {
        k_max: radius.floor() as i32,
        lattice_radius: r,
        ..ReconstructionConfig::default()
    };
    let result = reconstruct(&oracle, &cfg, 2, Some(&a))?;
    let order = &result.orders[&2];

    let truth = Field {
        values: a.coefficient(2).expect("q2").to_vec(),
    };
    let exact = quadrature_samples(&truth, &mask, &lattice_within(r), 2);
    let band = synthesize(&exact, &grid, cfg.xi_max);
    println!(
        "n = {n}, |xi| <= {radius} pi, {} lattice points",
        result.lattice.len()
    );
    for s in &order.samples.samples {
        let e = exact.get(s.xi).expect("same lattice");
        println!(
            "xi = ({:+.3}, {:+.3})  sample = {:+.6} {:+.6}i  quadrature = {:+.6} {:+.6}i",
            s.xi[0], s.xi[1], s.value.re, s.value.im, e.re, e.im
        );
    }
    println!(
        "relative L2 vs band-limited oracle: {:.4}",
        relative_l2(&order.field, &band, &mask)
    );
    println!(
        "relative L2 vs ground truth:        {:.4}",
        relative_l2(&order.field, &truth, &mask)
    );
    println!(
        "L2 norm of recovered field:         {:.4}",
        l2_norm(&order.field, &mask)
    );
    println!("runtime: {:.2} s", order.runtime_s);
    Ok(())
}
