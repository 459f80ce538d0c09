//! Boundary functions, Neumann traces and the DN-map measurement oracles.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::forward::{Field, SemilinearSolver, SolverConfig};
use crate::geometry::{boundary_trace, BoundaryTrace, DomainMask, Grid, NodeKind};
use crate::linalg::sup;
use crate::nonlinearity::Nonlinearity;

/// Values on the nodes of a [`BoundaryTrace`]. The imaginary part is only
/// present for complex probe bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunction {
    trace: Arc<BoundaryTrace>,
    re: Vec<f64>,
    im: Option<Vec<f64>>,
}

impl BoundaryFunction {
    pub fn new(trace: Arc<BoundaryTrace>, re: Vec<f64>) -> Result<Self> {
        Self::complex(trace, re, None)
    }

    pub fn complex(trace: Arc<BoundaryTrace>, re: Vec<f64>, im: Option<Vec<f64>>) -> Result<Self> {
        let n = trace.len();
        if re.len() != n || im.as_ref().is_some_and(|v| v.len() != n) {
            return Err(LabError::Precondition(format!(
                "boundary function length does not match trace length {n}"
            )));
        }
        if re.iter().chain(im.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(LabError::Precondition(
                "boundary function has non-finite values".into(),
            ));
        }
        Ok(BoundaryFunction { trace, re, im })
    }

    pub fn zeros(trace: Arc<BoundaryTrace>) -> Self {
        let n = trace.len();
        BoundaryFunction {
            trace,
            re: vec![0.0; n],
            im: None,
        }
    }

    /// Samples `f` at the trace nodes.
    pub fn from_fn(trace: &Arc<BoundaryTrace>, grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        BoundaryFunction {
            trace: trace.clone(),
            re: trace.nodes.iter().map(|&k| f(grid.position(k))).collect(),
            im: None,
        }
    }

    /// Restriction of a field to the trace nodes.
    pub fn from_field(trace: &Arc<BoundaryTrace>, u: &Field) -> Self {
        BoundaryFunction {
            trace: trace.clone(),
            re: trace.nodes.iter().map(|&k| u.values[k]).collect(),
            im: None,
        }
    }

    pub fn trace(&self) -> &Arc<BoundaryTrace> {
        &self.trace
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> Option<&[f64]> {
        self.im.as_deref()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn real_part(&self) -> BoundaryFunction {
        BoundaryFunction {
            trace: self.trace.clone(),
            re: self.re.clone(),
            im: None,
        }
    }

    pub fn imag_part(&self) -> BoundaryFunction {
        BoundaryFunction {
            trace: self.trace.clone(),
            re: self.im.clone().unwrap_or_else(|| vec![0.0; self.re.len()]),
            im: None,
        }
    }

    /// Largest modulus over the trace.
    pub fn sup(&self) -> f64 {
        match &self.im {
            None => sup(&self.re),
            Some(im) => self
                .re
                .iter()
                .zip(im)
                .fold(0.0, |m, (a, b)| m.max(a.hypot(*b))),
        }
    }

    pub fn scaled(&self, s: f64) -> BoundaryFunction {
        BoundaryFunction {
            trace: self.trace.clone(),
            re: self.re.iter().map(|v| v * s).collect(),
            im: self
                .im
                .as_ref()
                .map(|im| im.iter().map(|v| v * s).collect()),
        }
    }

    /// `Σ_i c_i g_i` for real combinations of functions on one trace.
    pub fn combination(terms: &[(f64, &BoundaryFunction)]) -> Result<BoundaryFunction> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| LabError::Precondition("empty combination".into()))?;
        let n = first.len();
        let mut re = vec![0.0; n];
        let mut im: Option<Vec<f64>> = None;
        for (c, g) in terms {
            if !g.trace.same_nodes(&first.trace) {
                return Err(LabError::Precondition(
                    "combined boundary functions live on different traces".into(),
                ));
            }
            for (r, v) in re.iter_mut().zip(&g.re) {
                *r += c * v;
            }
            if let Some(gim) = &g.im {
                let acc = im.get_or_insert_with(|| vec![0.0; n]);
                for (r, v) in acc.iter_mut().zip(gim) {
                    *r += c * v;
                }
            }
        }
        Ok(BoundaryFunction {
            trace: first.trace.clone(),
            re,
            im,
        })
    }

    /// Quadrature `∫ g dS` over the trace (corners dropped), as (re, im).
    pub fn integrate(&self) -> (f64, f64) {
        let re = self.trace.integrate(&self.re);
        let im = self.im.as_ref().map_or(0.0, |v| self.trace.integrate(v));
        (re, im)
    }

    /// Quadrature `∫ w g dS` against a real weight per trace node.
    pub fn integrate_weighted(&self, weight: &[f64]) -> (f64, f64) {
        let wr: Vec<f64> = self.re.iter().zip(weight).map(|(a, b)| a * b).collect();
        let im = self.im.as_ref().map_or(0.0, |v| {
            let wi: Vec<f64> = v.iter().zip(weight).map(|(a, b)| a * b).collect();
            self.trace.integrate(&wi)
        });
        (self.trace.integrate(&wr), im)
    }

    pub fn max_abs_diff(&self, other: &BoundaryFunction) -> f64 {
        let d_re = self
            .re
            .iter()
            .zip(&other.re)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let zero = vec![0.0; self.re.len()];
        let a_im = self.im.as_deref().unwrap_or(&zero);
        let b_im = other.im.as_deref().unwrap_or(&zero);
        a_im.iter()
            .zip(b_im)
            .fold(d_re, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Quadrature L² norm of the real part (corners dropped).
    pub fn l2(&self) -> f64 {
        let sq: Vec<f64> = self.re.iter().map(|v| v * v).collect();
        self.trace.integrate(&sq).sqrt()
    }
}

fn snapped_direction(nu: [f64; 2]) -> (i64, i64) {
    let snap = |c: f64| {
        if c > 0.3826834323650898 {
            1
        } else if c < -0.3826834323650898 {
            -1
        } else {
            0
        }
    };
    (snap(-nu[0]), snap(-nu[1]))
}

/// One-sided second-order normal derivative at each trace node:
/// `(3u_b − 4u_{b−νh} + u_{b−2νh}) / (2h)`, with `−ν` snapped to the nearest
/// of the eight grid directions (step `h` or `h√2`).
pub fn neumann_trace(
    u: &Field,
    mask: &DomainMask,
    trace: &Arc<BoundaryTrace>,
) -> Result<BoundaryFunction> {
    let grid = mask.grid();
    let n = grid.n() as i64;
    let mut re = Vec::with_capacity(trace.len());
    for (k, &node) in trace.nodes.iter().enumerate() {
        let (di, dj) = snapped_direction(trace.normals[k]);
        let (i, j) = grid.ij(node);
        let step = |s: i64| -> Result<usize> {
            let (ii, jj) = (i as i64 + s * di, j as i64 + s * dj);
            if ii < 0 || jj < 0 || ii > n || jj > n {
                return Err(LabError::Geometry(format!(
                    "normal stencil at node {node} leaves the grid"
                )));
            }
            let nb = grid.index(ii as usize, jj as usize);
            if mask.kind(nb) == NodeKind::Excluded {
                return Err(LabError::Geometry(format!(
                    "normal stencil at node {node} leaves the domain"
                )));
            }
            Ok(nb)
        };
        let (n1, n2) = (step(1)?, step(2)?);
        let len = grid.h() * ((di * di + dj * dj) as f64).sqrt();
        re.push((3.0 * u.values[node] - 4.0 * u.values[n1] + u.values[n2]) / (2.0 * len));
    }
    Ok(BoundaryFunction {
        trace: trace.clone(),
        re,
        im: None,
    })
}

/// A DN map `f ↦ ∂_ν u` for one geometry and nonlinearity: full boundary,
/// cavity (`u = 0` on `∂D`) or partial data (`u = 0` off `Γ`, measured on `Γ`).
#[derive(Debug, Clone)]
pub struct DnOracle {
    solver: SemilinearSolver,
    trace: Arc<BoundaryTrace>,
}

impl DnOracle {
    pub fn new(mask: Arc<DomainMask>, a: Arc<Nonlinearity>, cfg: SolverConfig) -> Result<Self> {
        let trace = Arc::new(boundary_trace(&mask, mask.data_trace_kind())?);
        Ok(DnOracle {
            solver: SemilinearSolver::new(mask, a, cfg)?,
            trace,
        })
    }

    pub fn mask(&self) -> &Arc<DomainMask> {
        self.solver.mask()
    }

    pub fn nonlinearity(&self) -> &Arc<Nonlinearity> {
        self.solver.nonlinearity()
    }

    pub fn config(&self) -> &SolverConfig {
        self.solver.config()
    }

    pub fn solver(&self) -> &SemilinearSolver {
        &self.solver
    }

    /// Trace carrying both the Dirichlet data and the measurement.
    pub fn trace(&self) -> &Arc<BoundaryTrace> {
        &self.trace
    }

    pub fn measure(&self, f: &BoundaryFunction) -> Result<BoundaryFunction> {
        Ok(self.measure_with_field(f)?.1)
    }

    /// `Λ(f) − Λ_lin(f)`: the normal derivative of the part of the solution
    /// of second and higher order in `f`. Mixed derivatives of order two and
    /// more agree with those of [`DnOracle::measure`], with far less rounding.
    pub fn measure_nonlinear_part(&self, f: &BoundaryFunction) -> Result<BoundaryFunction> {
        if !f.trace().same_nodes(&self.trace) {
            return Err(LabError::Precondition(
                "Dirichlet data is not given on the oracle's data trace".into(),
            ));
        }
        let (_, w) = self.solver.solve_split(f)?;
        neumann_trace(&w, self.mask(), &self.trace)
    }

    pub fn measure_with_field(&self, f: &BoundaryFunction) -> Result<(Field, BoundaryFunction)> {
        if !f.trace().same_nodes(&self.trace) {
            return Err(LabError::Precondition(
                "Dirichlet data is not given on the oracle's data trace".into(),
            ));
        }
        let u = self.solver.solve(f)?;
        let g = neumann_trace(&u, self.mask(), &self.trace)?;
        Ok((u, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, build_mask, Cavity, Edge, Gamma, TraceKind};

    fn full(n: usize) -> Arc<DomainMask> {
        Arc::new(build_mask(build_grid(n).unwrap(), None, Gamma::All).unwrap())
    }

    #[test]
    fn linear_and_quadratic_fields_are_exact() {
        let m = full(32);
        let g = *m.grid();
        let t = Arc::new(boundary_trace(&m, TraceKind::Outer).unwrap());
        let lin = Field::from_fn(&g, |p| 0.1 * p[0]);
        let quad = Field::from_fn(&g, |p| 0.1 * (p[0] * p[0] - p[1] * p[1]));
        let dl = neumann_trace(&lin, &m, &t).unwrap();
        let dq = neumann_trace(&quad, &m, &t).unwrap();
        for (k, &node) in t.nodes.iter().enumerate() {
            if t.corner[k] || !Edge::Right.contains(&g, node) {
                continue;
            }
            assert!((dl.re()[k] - 0.1).abs() < 1e-13);
            assert!((dq.re()[k] - 0.2).abs() < 1e-12);
        }
        let c = neumann_trace(&Field::constant(g.node_count(), 0.7), &m, &t).unwrap();
        assert!(c.sup() < 1e-13);
    }

    #[test]
    fn harmonic_measurement_matches_normal() {
        let m = full(32);
        let a = Arc::new(Nonlinearity::zero(m.grid().node_count()));
        let o = DnOracle::new(m.clone(), a, SolverConfig::default()).unwrap();
        let g = *m.grid();
        let f = BoundaryFunction::from_fn(o.trace(), &g, |p| 0.1 * p[0]);
        let lam = o.measure(&f).unwrap();
        for k in 0..lam.len() {
            if !o.trace().corner[k] {
                assert!((lam.re()[k] - 0.1 * o.trace().normals[k][0]).abs() < 1e-9);
            }
        }
        let zero = o
            .measure(&BoundaryFunction::zeros(o.trace().clone()))
            .unwrap();
        assert_eq!(zero.sup(), 0.0);
    }

    #[test]
    fn cavity_changes_constant_data_response() {
        let g = build_grid(64).unwrap();
        let a = Arc::new(Nonlinearity::zero(g.node_count()));
        let full_o = DnOracle::new(full(64), a.clone(), SolverConfig::default()).unwrap();
        let cav = Arc::new(
            build_mask(
                g,
                Some(Cavity::Disk {
                    center: [0.5, 0.5],
                    radius: 0.2,
                }),
                Gamma::All,
            )
            .unwrap(),
        );
        let cav_o = DnOracle::new(cav, a, SolverConfig::default()).unwrap();
        let f = BoundaryFunction::from_fn(full_o.trace(), &g, |_| 0.1);
        let d0 = full_o.measure(&f).unwrap();
        let d1 = cav_o.measure(&f).unwrap();
        assert!(d0.sup() < 1e-12);
        assert!(d1.max_abs_diff(&d0) > 0.01);
    }
}
