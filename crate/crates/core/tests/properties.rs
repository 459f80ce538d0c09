//! Property tests for the invariants of each module.

use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use calderon_lab::forward::{residual_sup, LinearFieldSolver};
use calderon_lab::geometry::NO_UNKNOWN;
use calderon_lab::linearization::default_eps;
use calderon_lab::probes::{calderon_pair_with_limit, DEFAULT_XI_MAX};
use calderon_lab::reconstruction::{fourier_quadrature, quadrature_samples};
use calderon_lab::{
    boundary_trace, build_grid, build_mask, chain_terms, combination_ledger, mixed_derivative,
    neumann_trace, solve_linear, BoundaryFunction, Cavity, DnOracle, DomainMask, Edge, Field,
    Gamma, NodeKind, Nonlinearity, SolverConfig, TraceKind,
};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn disk() -> impl Strategy<Value = Cavity> {
    (0.35f64..0.65, 0.35f64..0.65, 0.05f64..0.15).prop_map(|(x, y, r)| Cavity::Disk {
        center: [x, y],
        radius: r,
    })
}

fn edges() -> impl Strategy<Value = Gamma> {
    (0usize..4, 1usize..=4).prop_map(|(start, len)| {
        Gamma::Edges((0..len).map(|t| Edge::ALL[(start + t) % 4]).collect())
    })
}

fn flood_fill_reaches_all(mask: &DomainMask) -> bool {
    let grid = mask.grid();
    let interior: Vec<usize> = (0..grid.node_count())
        .filter(|&k| mask.kind(k) == NodeKind::Interior)
        .collect();
    let Some(&start) = interior.first() else {
        return false;
    };
    let mut seen = vec![false; grid.node_count()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(k) = stack.pop() {
        count += 1;
        for nb in grid.neighbors(k).iter().flatten() {
            if !seen[*nb] && mask.kind(*nb) == NodeKind::Interior {
                seen[*nb] = true;
                stack.push(*nb);
            }
        }
    }
    count == interior.len()
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn grid_spacing_and_node_count(n in 8usize..=300) {
        let g = build_grid(n).unwrap();
        prop_assert!((g.h() * n as f64 - 1.0).abs() <= 4.0 * f64::EPSILON);
        prop_assert_eq!(g.node_count(), (n + 1) * (n + 1));
    }

    #[test]
    fn cavity_masks_are_consistent(n in prop::sample::select(vec![32usize, 48, 64]), d in disk()) {
        let mask = build_mask(build_grid(n).unwrap(), Some(d.clone()), Gamma::All).unwrap();
        let grid = mask.grid();
        prop_assert!(flood_fill_reaches_all(&mask));
        for k in 0..grid.node_count() {
            match mask.kind(k) {
                NodeKind::Interior => {
                    prop_assert!(grid.neighbors(k).iter().flatten().all(|&nb| mask.kind(nb) != NodeKind::Excluded));
                    prop_assert!(mask.unknown_of(k) != NO_UNKNOWN);
                }
                NodeKind::CavityBoundary => {
                    prop_assert!(d.contains(grid.position(k)));
                    prop_assert!(grid.neighbors(k).iter().flatten().any(|&nb| mask.kind(nb) == NodeKind::Interior));
                }
                NodeKind::Excluded => prop_assert!(d.contains(grid.position(k))),
                NodeKind::OuterBoundary => prop_assert!(grid.on_square_edge(k)),
            }
        }
        let cavity = boundary_trace(&mask, TraceKind::Cavity).unwrap();
        let total: f64 = cavity.weights.iter().sum();
        prop_assert!((total - cavity.length).abs() <= 1e-12 * cavity.length);
        for nu in &cavity.normals {
            prop_assert!((nu[0].hypot(nu[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_trace_weights_sum_to_its_length(n in prop::sample::select(vec![16usize, 32, 64]), gamma in edges()) {
        let mask = build_mask(build_grid(n).unwrap(), None, gamma.clone()).unwrap();
        let t = boundary_trace(&mask, mask.data_trace_kind()).unwrap();
        let edges = match &gamma { Gamma::Edges(v) => v.len() as f64, Gamma::All => 4.0 };
        let total: f64 = t.weights.iter().sum();
        prop_assert!((total - edges).abs() <= 1e-12 * edges);
        for nu in &t.normals {
            prop_assert!((nu[0].hypot(nu[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_dz_matches_finite_differences(q2 in -2.0f64..2.0, q3 in -2.0f64..2.0, q4 in -2.0f64..2.0, z in -0.3f64..0.3) {
        let a = Nonlinearity::constant(1, &[(2, q2), (3, q3), (4, q4)]).unwrap();
        prop_assert!(a.satisfies_1_3());
        prop_assert_eq!(a.eval_dz(0, 0.0, 1), 0.0);
        let step = 1e-4;
        for j in 1..=3 {
            let fd = (a.eval_dz(0, z + step, j - 1) - a.eval_dz(0, z - step, j - 1)) / (2.0 * step);
            prop_assert!((fd - a.eval_dz(0, z, j)).abs() < 1e-6, "j = {}", j);
        }
        let direct = q2 * z * z / 2.0 + q3 * z.powi(3) / 6.0 + q4 * z.powi(4) / 24.0;
        prop_assert!((a.eval(0, z) - direct).abs() < 1e-14);
    }

    #[test]
    fn ledger_recombines_products(m in 1usize..=5, parts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 5)) {
        let ledger = combination_ledger(m).unwrap();
        let z: Vec<Complex64> = parts[..m].iter().map(|&(r, i)| Complex64::new(r, i)).collect();
        let product: Complex64 = z.iter().product();
        let rec = ledger.recombine_product(&z);
        let scale = z.iter().map(|v| v.norm().max(1.0)).product::<f64>();
        prop_assert!((rec - product).norm() <= 1e-12 * scale);
        prop_assert_eq!(ledger.entries.len(), 1 << m);
    }

    #[test]
    fn calderon_pairs_are_orthogonal_and_capped(k1 in -4i32..=4, k2 in -4i32..=4, delta in 0.01f64..0.1) {
        let xi = [k1 as f64 * std::f64::consts::PI, k2 as f64 * std::f64::consts::PI];
        let mask = build_mask(build_grid(32).unwrap(), None, Gamma::All).unwrap();
        let trace = Arc::new(boundary_trace(&mask, TraceKind::Outer).unwrap());
        let p = calderon_pair_with_limit(xi, &trace, mask.grid(), delta, 2.0 * DEFAULT_XI_MAX).unwrap();
        let norm2 = xi[0] * xi[0] + xi[1] * xi[1];
        prop_assert!((p.eta[0] * xi[0] + p.eta[1] * xi[1]).abs() <= 1e-12 * norm2.max(1.0));
        prop_assert!((p.eta[0].hypot(p.eta[1]) - norm2.sqrt()).abs() <= 1e-12 * norm2.sqrt().max(1.0));
        prop_assert!(p.f1.sup() <= delta * (1.0 + 1e-12));
        prop_assert!(p.f2.sup() <= delta * (1.0 + 1e-12));
    }

    #[test]
    fn bell_numbers_and_disjoint_blocks(m in 1usize..=8) {
        let bell = [1usize, 2, 5, 15, 52, 203, 877, 4140];
        let terms = chain_terms(m).unwrap();
        prop_assert_eq!(terms.len(), bell[m - 1]);
        for t in &terms {
            let mut all: Vec<usize> = t.blocks.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
        }
    }
}

proptest! {
    #![proptest_config(cases(8))]

    #[test]
    fn discrete_maximum_principle(a0 in -1.0f64..1.0, a1 in -1.0f64..1.0, a2 in -1.0f64..1.0, w in 0.5f64..6.0, cav in prop::option::of(disk())) {
        let grid = build_grid(32).unwrap();
        let mask = build_mask(grid, cav, Gamma::All).unwrap();
        let outer = Arc::new(boundary_trace(&mask, TraceKind::Outer).unwrap());
        let g = BoundaryFunction::from_fn(&outer, &grid, |p| a0 + a1 * (w * p[0]).sin() + a2 * (w * p[1]).cos());
        let lap = LinearFieldSolver::laplace(&mask).unwrap();
        let u = lap.solve_with_data(None, &g).unwrap();
        // a cavity contributes the boundary value 0
        let lo = g.re().iter().copied().fold(if mask.cavity().is_some() { 0.0 } else { f64::INFINITY }, f64::min);
        let hi = g.re().iter().copied().fold(if mask.cavity().is_some() { 0.0 } else { f64::NEG_INFINITY }, f64::max);
        for &k in mask.unknowns() {
            prop_assert!(u.values[k] >= lo - 1e-12 && u.values[k] <= hi + 1e-12);
        }
    }

    #[test]
    fn mixed_derivatives_are_multilinear_and_symmetric(lambda in 0.1f64..4.0, c in -2.0f64..2.0, w in 0.5f64..4.0) {
        let grid = build_grid(16).unwrap();
        let mask = Arc::new(build_mask(grid, None, Gamma::All).unwrap());
        let a = Arc::new(Nonlinearity::constant(grid.node_count(), &[(2, 1.0), (3, c)]).unwrap());
        let cfg = SolverConfig::default();
        let o = DnOracle::new(mask, a, cfg).unwrap();
        let t = o.trace().clone();
        let f1 = BoundaryFunction::from_fn(&t, &grid, |p| 0.1 * (w * p[0]).cos());
        let f2 = BoundaryFunction::from_fn(&t, &grid, |p| 0.05 + 0.05 * p[1]);
        let eps = default_eps(cfg.delta, 2);
        let d = mixed_derivative(&o, &[f1.clone(), f2.clone()], eps).unwrap();
        let swapped = mixed_derivative(&o, &[f2.clone(), f1.clone()], eps).unwrap();
        prop_assert_eq!(d.values.re(), swapped.values.re());
        let scaled = mixed_derivative(&o, &[f1.scaled(lambda), f2], eps).unwrap();
        let expect = d.values.scaled(lambda);
        prop_assert!(scaled.values.max_abs_diff(&expect) <= 1e-9 * expect.sup());
    }

    #[test]
    fn newton_solution_is_unique_and_accurate(q2 in -3.0f64..3.0, amp in 0.01f64..0.1, cav in prop::option::of(disk())) {
        let grid = build_grid(24).unwrap();
        let mask = Arc::new(build_mask(grid, cav, Gamma::All).unwrap());
        let a = Arc::new(Nonlinearity::constant(grid.node_count(), &[(2, q2)]).unwrap());
        let cfg = SolverConfig::default();
        let o = DnOracle::new(mask.clone(), a.clone(), cfg).unwrap();
        let f = BoundaryFunction::from_fn(o.trace(), &grid, |p| amp * (1.0 - p[0] * p[1]));
        let u0 = o.solver().solve(&f).unwrap();
        let lap = LinearFieldSolver::laplace(&mask).unwrap();
        let guess = lap.solve_with_data(None, &f).unwrap();
        let u1 = o.solver().solve_from(&f, Some(&guess)).unwrap();
        prop_assert!(u0.max_abs_diff(&u1) <= 10.0 * cfg.newton_tol);
        prop_assert!(residual_sup(&a, &mask, &u0) <= cfg.newton_tol);
        let (v, w) = o.solver().solve_split(&f).unwrap();
        let split = Field { values: v.values.iter().zip(&w.values).map(|(x, y)| x + y).collect() };
        prop_assert!(split.max_abs_diff(&u0) <= 10.0 * cfg.newton_tol);
    }

    #[test]
    fn conjugate_symmetry_of_real_targets(cx in 0.3f64..0.7, cy in 0.3f64..0.7, width in 0.08f64..0.2) {
        let grid = build_grid(32).unwrap();
        let mask = build_mask(grid, None, Gamma::All).unwrap();
        let q = Field::from_fn(&grid, |p| (-((p[0] - cx).powi(2) + (p[1] - cy).powi(2)) / (2.0 * width * width)).exp());
        let lattice = calderon_lab::probes::probe_lattice(2, 2.0 * std::f64::consts::PI, false);
        let s = quadrature_samples(&q, &mask, &lattice, 2);
        prop_assert!(s.conjugate_symmetry_error().unwrap() <= 1e-6);
        let z = fourier_quadrature(&q, &mask, [0.0, 0.0]);
        prop_assert!(z.im.abs() <= 1e-15);
    }
}

#[test]
fn measurement_of_zero_data_is_zero() {
    let grid = build_grid(16).unwrap();
    let mask = Arc::new(build_mask(grid, None, Gamma::All).unwrap());
    let a = Arc::new(Nonlinearity::constant(grid.node_count(), &[(2, 1.0)]).unwrap());
    let o = DnOracle::new(mask, a, SolverConfig::default()).unwrap();
    let zero = BoundaryFunction::zeros(o.trace().clone());
    assert_eq!(o.measure(&zero).unwrap().sup(), 0.0);
}

#[test]
fn empty_cavity_oracle_is_the_full_domain_oracle() {
    let grid = build_grid(24).unwrap();
    let a = Arc::new(Nonlinearity::constant(grid.node_count(), &[(2, 1.5)]).unwrap());
    let m1 = Arc::new(build_mask(grid, None, Gamma::All).unwrap());
    let m2 = Arc::new(DomainMask::new(grid, None, Gamma::All, None).unwrap());
    let o1 = DnOracle::new(m1, a.clone(), SolverConfig::default()).unwrap();
    let o2 = DnOracle::new(m2, a, SolverConfig::default()).unwrap();
    let f = BoundaryFunction::from_fn(o1.trace(), &grid, |p| 0.05 * (p[0] + p[1]));
    assert_eq!(o1.measure(&f).unwrap().re(), o2.measure(&f).unwrap().re());
}

fn corner_free(p: [f64; 2]) -> f64 {
    1.0 - (1.0 - 2.0 * p[0]).powi(2) * (1.0 - 2.0 * p[1]).powi(2)
}

fn dn_asymmetry(n: usize, cut: fn([f64; 2]) -> f64) -> f64 {
    let grid = build_grid(n).unwrap();
    let mask = build_mask(grid, None, Gamma::All).unwrap();
    let t = Arc::new(boundary_trace(&mask, TraceKind::Outer).unwrap());
    let zero = Field::zeros(grid.node_count());
    let f = BoundaryFunction::from_fn(&t, &grid, |p| cut(p) * (2.0 * p[0] + p[1]).sin());
    let g = BoundaryFunction::from_fn(&t, &grid, |p| cut(p) * (p[0] * p[1]).exp());
    let lf = neumann_trace(&solve_linear(&zero, &zero, &mask, &f).unwrap(), &mask, &t).unwrap();
    let lg = neumann_trace(&solve_linear(&zero, &zero, &mask, &g).unwrap(), &mask, &t).unwrap();
    let gl: Vec<f64> = g.re().iter().zip(lf.re()).map(|(a, b)| a * b).collect();
    let fl: Vec<f64> = f.re().iter().zip(lg.re()).map(|(a, b)| a * b).collect();
    (t.integrate(&gl) - t.integrate(&fl)).abs()
}

#[test]
fn dn_form_symmetry_converges() {
    let ns = [16, 32, 64, 128];
    let full: Vec<f64> = ns.iter().map(|&n| dn_asymmetry(n, |_| 1.0)).collect();
    let free: Vec<f64> = ns.iter().map(|&n| dn_asymmetry(n, corner_free)).collect();
    for w in full.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 0.6, "data with corner values: order {order}");
    }
    for w in free.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.6, "data vanishing at corners: order {order}");
    }
    assert!(free[3] < 1e-3, "{free:?}");
}
