//! Discrete Dirichlet problems on a [`DomainMask`]: the semilinear equation
//! `Δ_h u + a(x,u) = 0` (Newton with exact Jacobian) and linear problems
//! `(Δ_h + c) w = -s`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dn_map::BoundaryFunction;
use crate::error::{LabError, Result};
use crate::geometry::{DomainMask, Grid};
use crate::linalg::{sup, LinearSolver, StencilOperator};
use crate::nonlinearity::{check_condition_1_2, Nonlinearity};

/// Real value per grid node. Excluded nodes hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(node_count: usize) -> Self {
        Field {
            values: vec![0.0; node_count],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Field {
            values: (0..grid.node_count())
                .map(|k| f(grid.position(k)))
                .collect(),
        }
    }

    pub fn constant(node_count: usize, value: f64) -> Self {
        Field {
            values: vec![value; node_count],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup(&self) -> f64 {
        sup(&self.values)
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Field {
        Field {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Trapezoidal integral over the computational domain of the mask.
    pub fn integrate(&self, mask: &DomainMask) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| mask.area_weight(k) * v)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Sup-norm threshold on the discrete PDE residual.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Relative residual target for linear solves.
    pub linear_tol: f64,
    /// Sup-norm cap on admissible Dirichlet data.
    pub delta: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-10,
            newton_max_iter: 50,
            linear_tol: 1e-12,
            delta: 0.1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.newton_tol, self.linear_tol, self.delta]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.newton_max_iter == 0 {
            return Err(LabError::Config(format!(
                "solver tolerances must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-node Dirichlet values from data on a boundary trace. Nodes off the
/// accessible boundary (cavity, `∂Ω \ Γ`) stay zero.
pub fn dirichlet_values(mask: &DomainMask, f: &BoundaryFunction) -> Result<Vec<f64>> {
    if !f.is_real() {
        return Err(LabError::Precondition(
            "complex boundary data cannot be fed to the solver".into(),
        ));
    }
    let mut out = vec![0.0; mask.grid().node_count()];
    for (k, &node) in f.trace().nodes.iter().enumerate() {
        if node >= out.len() || !mask.is_boundary(node) {
            return Err(LabError::Precondition(format!(
                "boundary data node {node} is not a boundary node of the mask"
            )));
        }
        if mask.is_accessible(node) {
            out[node] = f.re()[k];
        }
    }
    Ok(out)
}

/// Sup-norm of `Δ_h u + a(x,u)` over interior nodes.
pub fn residual_sup(a: &Nonlinearity, mask: &DomainMask, u: &Field) -> f64 {
    let mut r = vec![0.0; mask.unknowns().len()];
    semilinear_residual(a, mask, &u.values, &mut r);
    sup(&r)
}

fn semilinear_residual(a: &Nonlinearity, mask: &DomainMask, u: &[f64], out: &mut [f64]) {
    split_residual(a, mask, u, None, out)
}

/// `Δ_h w + a(x, w)`, or with an offset `v`:
/// `Δ_h w + q_1 w + (a − q_1 z)(x, v + w)`, the residual of `u = v + w`
/// when `(Δ_h + q_1) v = 0`.
fn split_residual(
    a: &Nonlinearity,
    mask: &DomainMask,
    w: &[f64],
    offset: Option<&[f64]>,
    out: &mut [f64],
) {
    let grid = mask.grid();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let q1 = a.coefficient(1);
    for (idx, &node) in mask.unknowns().iter().enumerate() {
        let mut lap = -4.0 * w[node];
        for nb in grid.neighbors(node).iter().flatten() {
            lap += w[*nb];
        }
        let reaction = match offset {
            None => a.eval(node, w[node]),
            Some(v) => {
                q1.map_or(0.0, |q| q[node] * w[node]) + a.eval_nonlinear(node, v[node] + w[node])
            }
        };
        out[idx] = lap * inv_h2 + reaction;
    }
}

/// Number of extra Newton steps taken after reaching the tolerance, as long
/// as each still lowers the residual.
const POLISH_STEPS: usize = 3;

/// Newton solver for one (mask, nonlinearity) pair. The factorization of
/// `Δ_h + diag(q_1)` is built once and reused to precondition every
/// Jacobian solve.
#[derive(Debug, Clone)]
pub struct SemilinearSolver {
    mask: Arc<DomainMask>,
    a: Arc<Nonlinearity>,
    cfg: SolverConfig,
    base: LinearSolver,
}

impl SemilinearSolver {
    pub fn new(mask: Arc<DomainMask>, a: Arc<Nonlinearity>, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if a.node_count() != mask.grid().node_count() {
            return Err(LabError::Config(
                "nonlinearity sampled on a different grid".into(),
            ));
        }
        if !a.satisfies_1_3() && !check_condition_1_2(&a, &mask)? {
            return Err(LabError::Precondition(
                "0 is a Dirichlet eigenvalue of Δ + ∂_z a(x,0)".into(),
            ));
        }
        let q1: Vec<f64> = mask
            .unknowns()
            .iter()
            .map(|&node| a.coefficient(1).map_or(0.0, |q| q[node]))
            .collect();
        let base = LinearSolver::new(
            StencilOperator::new(&mask, Some(&q1)),
            mask.grid().n(),
            cfg.linear_tol,
        )?;
        Ok(SemilinearSolver { mask, a, cfg, base })
    }

    pub fn mask(&self) -> &Arc<DomainMask> {
        &self.mask
    }

    pub fn nonlinearity(&self) -> &Arc<Nonlinearity> {
        &self.a
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn solve(&self, f: &BoundaryFunction) -> Result<Field> {
        self.solve_from(f, None)
    }

    /// Solves starting from `guess` (interior values used; boundary values
    /// are overwritten by the data).
    pub fn solve_from(&self, f: &BoundaryFunction, guess: Option<&Field>) -> Result<Field> {
        let data_sup = sup(f.re());
        if data_sup > self.cfg.delta * (1.0 + 1e-12) {
            return Err(LabError::Precondition(format!(
                "Dirichlet data sup-norm {data_sup:e} exceeds the smallness cap {:e}",
                self.cfg.delta
            )));
        }
        let bvals = dirichlet_values(&self.mask, f)?;
        self.solve_dirichlet(&bvals, guess)
    }

    /// Newton iteration for per-node Dirichlet values `bvals`.
    pub fn solve_dirichlet(&self, bvals: &[f64], guess: Option<&Field>) -> Result<Field> {
        let mask = &*self.mask;
        let mut u = match guess {
            Some(g) => g.values.clone(),
            None => vec![0.0; mask.grid().node_count()],
        };
        for (k, v) in u.iter_mut().enumerate() {
            if mask.unknown_of(k) == crate::geometry::NO_UNKNOWN {
                *v = bvals[k];
            }
        }
        self.newton(u, None)
    }

    /// Splits the solution as `u = v + w`: `v` solves the linear problem
    /// `(Δ_h + q_1) v = 0` with the data, and `w` (zero on the boundary)
    /// carries everything of second and higher order in the data. `w` is
    /// computed directly, so its rounding error is relative to its own size.
    pub fn solve_split(&self, f: &BoundaryFunction) -> Result<(Field, Field)> {
        let data_sup = sup(f.re());
        if data_sup > self.cfg.delta * (1.0 + 1e-12) {
            return Err(LabError::Precondition(format!(
                "Dirichlet data sup-norm {data_sup:e} exceeds the smallness cap {:e}",
                self.cfg.delta
            )));
        }
        let mask = &*self.mask;
        let grid = mask.grid();
        let bvals = dirichlet_values(mask, f)?;
        let mut v = vec![0.0; grid.node_count()];
        for (k, x) in v.iter_mut().enumerate() {
            if mask.unknown_of(k) == crate::geometry::NO_UNKNOWN {
                *x = bvals[k];
            }
        }
        let rhs: Vec<f64> = mask
            .unknowns()
            .iter()
            .map(|&node| {
                grid.neighbors(node)
                    .iter()
                    .flatten()
                    .filter(|&&nb| mask.unknown_of(nb) == crate::geometry::NO_UNKNOWN)
                    .map(|&nb| v[nb])
                    .sum()
            })
            .collect();
        let x = self.base.solve(&rhs)?;
        for (idx, &node) in mask.unknowns().iter().enumerate() {
            v[node] = x[idx];
        }
        let w = self.newton(vec![0.0; grid.node_count()], Some(&v))?;
        Ok((Field { values: v }, w))
    }

    fn newton(&self, mut u: Vec<f64>, offset: Option<&[f64]>) -> Result<Field> {
        let mask = &*self.mask;
        let grid = mask.grid();
        let h2 = grid.h() * grid.h();
        let unknowns = mask.unknowns();
        let mut r = vec![0.0; unknowns.len()];
        split_residual(&self.a, mask, &u, offset, &mut r);
        let mut rn = sup(&r);
        let mut polish = 0;
        let mut candidate = u.clone();
        let mut rc = vec![0.0; unknowns.len()];
        for _ in 0..self.cfg.newton_max_iter {
            if !rn.is_finite() {
                break;
            }
            if rn <= self.cfg.newton_tol && (polish >= POLISH_STEPS || rn == 0.0) {
                return Ok(Field { values: u });
            }
            let c: Vec<f64> = unknowns
                .iter()
                .map(|&node| {
                    let z = u[node] + offset.map_or(0.0, |v| v[node]);
                    self.a.eval_dz(node, z, 1)
                })
                .collect();
            let jac = self.base.operator().with_potential(grid.h(), &c);
            let rhs: Vec<f64> = r.iter().map(|v| v * h2).collect();
            let step = self.base.solve_nearby(&jac, grid.n(), &rhs)?;
            candidate.copy_from_slice(&u);
            for (idx, &node) in unknowns.iter().enumerate() {
                candidate[node] += step[idx];
            }
            split_residual(&self.a, mask, &candidate, offset, &mut rc);
            let rcn = sup(&rc);
            if rn <= self.cfg.newton_tol {
                polish += 1;
                if !(rcn < rn) {
                    return Ok(Field { values: u });
                }
            }
            std::mem::swap(&mut u, &mut candidate);
            std::mem::swap(&mut r, &mut rc);
            rn = rcn;
        }
        if rn <= self.cfg.newton_tol {
            return Ok(Field { values: u });
        }
        Err(LabError::solver(
            format!(
                "Newton did not converge in {} iterations",
                self.cfg.newton_max_iter
            ),
            rn,
        ))
    }
}

/// One-shot semilinear solve.
pub fn solve_semilinear(
    a: &Nonlinearity,
    mask: &DomainMask,
    f: &BoundaryFunction,
    cfg: &SolverConfig,
) -> Result<Field> {
    SemilinearSolver::new(Arc::new(mask.clone()), Arc::new(a.clone()), *cfg)?.solve(f)
}

/// Reusable solver for `(Δ_h + diag(c)) w = -source` with Dirichlet data.
#[derive(Debug, Clone)]
pub struct LinearFieldSolver<'m> {
    mask: &'m DomainMask,
    solver: LinearSolver,
}

impl<'m> LinearFieldSolver<'m> {
    /// `c = None` is the Laplacian.
    pub fn new(mask: &'m DomainMask, c: Option<&Field>, linear_tol: f64) -> Result<Self> {
        let cu: Option<Vec<f64>> =
            c.map(|c| mask.unknowns().iter().map(|&node| c.values[node]).collect());
        let op = StencilOperator::new(mask, cu.as_deref());
        Ok(LinearFieldSolver {
            mask,
            solver: LinearSolver::new(op, mask.grid().n(), linear_tol)?,
        })
    }

    pub fn laplace(mask: &'m DomainMask) -> Result<Self> {
        Self::new(mask, None, SolverConfig::default().linear_tol)
    }

    pub fn mask(&self) -> &'m DomainMask {
        self.mask
    }

    /// Solves with per-node boundary values (`None` = homogeneous data).
    pub fn solve(&self, source: Option<&Field>, bvals: Option<&[f64]>) -> Result<Field> {
        let mask = self.mask;
        let grid = mask.grid();
        let h2 = grid.h() * grid.h();
        let count = grid.node_count();
        let mut rhs: Vec<f64> = mask
            .unknowns()
            .iter()
            .map(|&node| source.map_or(0.0, |s| h2 * s.values[node]))
            .collect();
        let mut values = vec![0.0; count];
        if let Some(b) = bvals {
            for (k, v) in values.iter_mut().enumerate() {
                if mask.is_boundary(k) {
                    *v = b[k];
                }
            }
            for (idx, &node) in mask.unknowns().iter().enumerate() {
                for nb in grid.neighbors(node).iter().flatten() {
                    if mask.unknown_of(*nb) == crate::geometry::NO_UNKNOWN {
                        rhs[idx] += values[*nb];
                    }
                }
            }
        }
        let x = self.solver.solve(&rhs)?;
        for (idx, &node) in mask.unknowns().iter().enumerate() {
            values[node] = x[idx];
        }
        Ok(Field { values })
    }

    /// Solves with data given on a boundary trace.
    pub fn solve_with_data(&self, source: Option<&Field>, g: &BoundaryFunction) -> Result<Field> {
        let b = dirichlet_values(self.mask, g)?;
        self.solve(source, Some(&b))
    }
}

/// Sup-norm of `(Δ_h + diag(c)) w + source` over interior nodes.
pub fn linear_residual(
    mask: &DomainMask,
    c: Option<&Field>,
    source: Option<&Field>,
    w: &Field,
) -> f64 {
    let grid = mask.grid();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    mask.unknowns()
        .iter()
        .map(|&node| {
            let mut lap = -4.0 * w.values[node];
            for nb in grid.neighbors(node).iter().flatten() {
                lap += w.values[*nb];
            }
            let mut r = lap * inv_h2;
            if let Some(c) = c {
                r += c.values[node] * w.values[node];
            }
            if let Some(s) = source {
                r += s.values[node];
            }
            r.abs()
        })
        .fold(0.0, f64::max)
}

/// One-shot linear solve `(Δ_h + diag(c)) w = -source`, `w = g` on the
/// prescribed boundary.
pub fn solve_linear(
    c: &Field,
    source: &Field,
    mask: &DomainMask,
    g: &BoundaryFunction,
) -> Result<Field> {
    let zero_c = c.values.iter().all(|&v| v == 0.0);
    let solver = LinearFieldSolver::new(
        mask,
        if zero_c { None } else { Some(c) },
        SolverConfig::default().linear_tol,
    )?;
    solver.solve_with_data(Some(source), g)
}
