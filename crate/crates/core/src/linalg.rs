//! Sparse linear algebra for the 5-point operator restricted to interior
//! unknowns: a banded LDLᵀ factorization for moderate grids and Jacobi
//! preconditioned conjugate gradients for large ones.
//!
//! All systems are written in the scaled form `K = -h² (Δ_h + diag(c))`,
//! i.e. `K_ii = 4 - h² c_i` and `K_ij = -1` for interior 4-neighbours.

use crate::error::{LabError, Result};
use crate::geometry::{DomainMask, NO_UNKNOWN};

/// Grids up to this many cells per side use the direct factorization.
pub const DIRECT_MAX_CELLS: usize = 256;

/// The scaled 5-point operator on the interior unknowns of a mask.
#[derive(Debug, Clone)]
pub struct StencilOperator {
    nbrs: Vec<[usize; 4]>,
    diag: Vec<f64>,
    bandwidth: usize,
}

impl StencilOperator {
    /// Operator for `Δ_h + diag(c)`, with `c` given per unknown (or zero).
    pub fn new(mask: &DomainMask, c: Option<&[f64]>) -> Self {
        let grid = mask.grid();
        let h2 = grid.h() * grid.h();
        let mut bandwidth = 0;
        let nbrs: Vec<[usize; 4]> = mask
            .unknowns()
            .iter()
            .enumerate()
            .map(|(u, &node)| {
                let mut out = [NO_UNKNOWN; 4];
                for (slot, nb) in grid.neighbors(node).iter().enumerate() {
                    if let Some(nb) = nb {
                        let v = mask.unknown_of(*nb);
                        if v != NO_UNKNOWN {
                            bandwidth = bandwidth.max(u.abs_diff(v));
                            out[slot] = v;
                        }
                    }
                }
                out
            })
            .collect();
        let diag = (0..nbrs.len())
            .map(|u| 4.0 - h2 * c.map_or(0.0, |c| c[u]))
            .collect();
        StencilOperator {
            nbrs,
            diag,
            bandwidth,
        }
    }

    /// Same stencil with a different potential `c`.
    pub fn with_potential(&self, h: f64, c: &[f64]) -> Self {
        let h2 = h * h;
        StencilOperator {
            nbrs: self.nbrs.clone(),
            diag: c.iter().map(|&ci| 4.0 - h2 * ci).collect(),
            bandwidth: self.bandwidth,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (u, nb) in self.nbrs.iter().enumerate() {
            let mut s = self.diag[u] * x[u];
            for &v in nb {
                if v != NO_UNKNOWN {
                    s -= x[v];
                }
            }
            y[u] = s;
        }
    }

    /// Entry `K[i][j]` for `j <= i` within the band.
    fn lower_row(&self, i: usize, row: &mut [f64]) {
        // row[t] holds K[i][i - bw + t]
        let bw = self.bandwidth;
        row.iter_mut().for_each(|v| *v = 0.0);
        for &v in &self.nbrs[i] {
            if v != NO_UNKNOWN && v < i {
                row[v + bw - i] = -1.0;
            }
        }
    }
}

/// `K = L D Lᵀ` for a symmetric banded matrix, without pivoting.
#[derive(Debug, Clone)]
pub struct BandedLdlt {
    n: usize,
    bw: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandedLdlt {
    pub fn factor(op: &StencilOperator) -> Result<Self> {
        let n = op.len();
        let bw = op.bandwidth().max(1);
        let mut l = vec![0.0; n * bw];
        let mut d = vec![0.0; n];
        let mut w = vec![0.0; bw];
        for i in 0..n {
            let (done, rest) = l.split_at_mut(i * bw);
            let row_i = &mut rest[..bw];
            op.lower_row(i, row_i);
            let lo = i.saturating_sub(bw);
            // w[t] = L[i][k] d[k] for k = i - bw + t
            for j in lo..i {
                let tj = j + bw - i;
                let row_j = &done[j * bw..(j + 1) * bw];
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = row_i[tj];
                for k in klo..j {
                    s -= w[k + bw - i] * row_j[k + bw - j];
                }
                w[tj] = s;
                row_i[tj] = s / d[j];
            }
            let mut di = op.diag[i];
            for j in lo..i {
                let tj = j + bw - i;
                di -= w[tj] * row_i[tj];
            }
            if di == 0.0 || !di.is_finite() {
                return Err(LabError::solver(
                    format!("LDLᵀ breakdown at pivot {i} of {n}"),
                    di.abs(),
                ));
            }
            d[i] = di;
        }
        Ok(BandedLdlt { n, bw, l, d })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.l[i * bw..(i + 1) * bw];
            let mut s = x[i];
            for k in lo..i {
                s -= row[k + bw - i] * x[k];
            }
            x[i] = s;
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n).rev() {
            let lo = i.saturating_sub(bw);
            let row = &self.l[i * bw..(i + 1) * bw];
            let xi = x[i];
            for k in lo..i {
                x[k] -= row[k + bw - i] * xi;
            }
        }
    }

    pub fn pivots(&self) -> &[f64] {
        &self.d
    }
}

/// Jacobi-preconditioned conjugate gradients for symmetric `K`.
pub fn conjugate_gradient(
    op: &StencilOperator,
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = op.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(&op.diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut kp = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        op.apply(&p, &mut kp);
        let pkp = dot(&p, &kp);
        if pkp == 0.0 || !pkp.is_finite() {
            return Err(LabError::solver("CG breakdown", norm2(&r) / bnorm));
        }
        let alpha = rz / pkp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        if norm2(&r) <= rel_tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / op.diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LabError::solver(
        format!("CG did not reach relative residual {rel_tol:e} in {max_iter} iterations"),
        norm2(&r) / bnorm,
    ))
}

/// A reusable solver for one operator: direct for moderate grids,
/// iterative otherwise.
#[derive(Debug, Clone)]
pub struct LinearSolver {
    op: StencilOperator,
    direct: Option<BandedLdlt>,
    rel_tol: f64,
}

impl LinearSolver {
    pub fn new(op: StencilOperator, n_cells: usize, rel_tol: f64) -> Result<Self> {
        let direct = if n_cells <= DIRECT_MAX_CELLS {
            Some(BandedLdlt::factor(&op)?)
        } else {
            None
        };
        Ok(LinearSolver {
            op,
            direct,
            rel_tol,
        })
    }

    pub fn operator(&self) -> &StencilOperator {
        &self.op
    }

    pub fn is_direct(&self) -> bool {
        self.direct.is_some()
    }

    /// Solves `K x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.direct {
            Some(f) => {
                let mut x = rhs.to_vec();
                f.solve_in_place(&mut x);
                if x.iter().all(|v| v.is_finite()) {
                    Ok(x)
                } else {
                    Err(LabError::solver("non-finite direct solve", f64::INFINITY))
                }
            }
            None => conjugate_gradient(&self.op, rhs, self.rel_tol, 20 * self.op.len().max(100)),
        }
    }

    /// Solves `op x = rhs` for an operator close to this solver's, by
    /// iterative refinement preconditioned with this factorization; falls
    /// back to a fresh solve of `op` when refinement stalls.
    pub fn solve_nearby(
        &self,
        op: &StencilOperator,
        n_cells: usize,
        rhs: &[f64],
    ) -> Result<Vec<f64>> {
        let scale = sup(rhs);
        if scale == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        if self.direct.is_some() {
            let mut x = self.solve(rhs)?;
            let mut res = vec![0.0; rhs.len()];
            let mut last = f64::INFINITY;
            for _ in 0..40 {
                op.apply(&x, &mut res);
                for (r, b) in res.iter_mut().zip(rhs) {
                    *r = b - *r;
                }
                let rn = sup(&res);
                if rn <= self.rel_tol * scale * 1e-2 || rn == 0.0 {
                    return Ok(x);
                }
                if rn > 0.5 * last {
                    if rn <= self.rel_tol * scale {
                        return Ok(x);
                    }
                    break;
                }
                last = rn;
                let dx = self.solve(&res)?;
                for (xi, d) in x.iter_mut().zip(&dx) {
                    *xi += d;
                }
            }
        }
        LinearSolver::new(op.clone(), n_cells, self.rel_tol)?.solve(rhs)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
