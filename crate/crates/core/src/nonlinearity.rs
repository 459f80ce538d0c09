//! The nonlinearity `a(x,z) = Σ_{k=1}^{K} q_k(x) z^k / k!`, stored as grid
//! samples of its Taylor coefficients `q_k = ∂_z^k a(·,0)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{DomainMask, Grid};
use crate::linalg::{BandedLdlt, StencilOperator};

/// Closed-form coefficient field, sampled onto the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientExpr {
    Constant {
        value: f64,
    },
    /// `amplitude * exp(-|x - center|² / (2 width²))`
    GaussianBump {
        center: [f64; 2],
        width: f64,
        amplitude: f64,
    },
    /// `amplitude * cos(wavevector · x + phase)`
    Cosine {
        amplitude: f64,
        wavevector: [f64; 2],
        #[serde(default)]
        phase: f64,
    },
    Sum {
        terms: Vec<CoefficientExpr>,
    },
}

impl CoefficientExpr {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match self {
            CoefficientExpr::Constant { value } => *value,
            CoefficientExpr::GaussianBump {
                center,
                width,
                amplitude,
            } => {
                let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            CoefficientExpr::Cosine {
                amplitude,
                wavevector,
                phase,
            } => amplitude * (wavevector[0] * p[0] + wavevector[1] * p[1] + phase).cos(),
            CoefficientExpr::Sum { terms } => terms.iter().map(|t| t.eval(p)).sum(),
        }
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.node_count())
            .map(|k| self.eval(grid.position(k)))
            .collect()
    }
}

/// Finite Taylor model of `a(x,z)`; coefficient `k` lives at index `k - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    coeffs: Vec<Vec<f64>>,
    node_count: usize,
    satisfies_1_3: bool,
}

impl Nonlinearity {
    /// Builds from sampled fields keyed by order `k ≥ 1`; orders missing
    /// below the maximum are zero.
    pub fn from_fields(node_count: usize, fields: BTreeMap<usize, Vec<f64>>) -> Result<Self> {
        if fields.contains_key(&0) {
            return Err(LabError::Config(
                "coefficient order 0 is not allowed: a(x,0) = 0".into(),
            ));
        }
        let max_order = fields.keys().next_back().copied().unwrap_or(1);
        let mut coeffs = vec![vec![0.0; node_count]; max_order];
        for (k, v) in fields {
            if v.len() != node_count {
                return Err(LabError::Config(format!(
                    "coefficient {k} has {} samples, expected {node_count}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(LabError::Config(format!("coefficient {k} is not finite")));
            }
            coeffs[k - 1] = v;
        }
        let satisfies_1_3 = coeffs[0].iter().all(|&q| q == 0.0);
        Ok(Nonlinearity {
            coeffs,
            node_count,
            satisfies_1_3,
        })
    }

    pub fn from_exprs(grid: &Grid, exprs: &BTreeMap<usize, CoefficientExpr>) -> Result<Self> {
        let fields = exprs.iter().map(|(&k, e)| (k, e.sample(grid))).collect();
        Self::from_fields(grid.node_count(), fields)
    }

    /// `a ≡ 0` (the Laplace equation).
    pub fn zero(node_count: usize) -> Self {
        Nonlinearity {
            coeffs: vec![vec![0.0; node_count]],
            node_count,
            satisfies_1_3: true,
        }
    }

    /// `q_k ≡ value` for the listed orders, zero otherwise.
    pub fn constant(node_count: usize, orders: &[(usize, f64)]) -> Result<Self> {
        Self::from_fields(
            node_count,
            orders
                .iter()
                .map(|&(k, v)| (k, vec![v; node_count]))
                .collect(),
        )
    }

    pub fn max_order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn satisfies_1_3(&self) -> bool {
        self.satisfies_1_3
    }

    /// Samples of `q_k`, or `None` beyond the stored order.
    pub fn coefficient(&self, k: usize) -> Option<&[f64]> {
        if k == 0 {
            return None;
        }
        self.coeffs.get(k - 1).map(|v| v.as_slice())
    }

    pub fn eval(&self, node: usize, z: f64) -> f64 {
        self.eval_dz(node, z, 0)
    }

    /// `∂_z^j a(x_node, z) = Σ_{k≥j} q_k z^{k−j}/(k−j)!` by Horner's rule,
    /// zero for `j > K`.
    pub fn eval_dz(&self, node: usize, z: f64, j: usize) -> f64 {
        let kmax = self.coeffs.len();
        if j > kmax {
            return 0.0;
        }
        let q = |k: usize| {
            if k == 0 {
                0.0
            } else {
                self.coeffs[k - 1][node]
            }
        };
        let mut acc = q(kmax);
        for k in (j..kmax).rev() {
            acc = q(k) + acc * z / (k - j + 1) as f64;
        }
        acc
    }

    /// `a(x_node, z) − q_1 z = Σ_{k≥2} q_k z^k/k!`, evaluated without the
    /// linear term so that no cancellation occurs.
    pub fn eval_nonlinear(&self, node: usize, z: f64) -> f64 {
        let kmax = self.coeffs.len();
        if kmax < 2 {
            return 0.0;
        }
        let mut acc = self.coeffs[kmax - 1][node];
        for k in (2..kmax).rev() {
            acc = self.coeffs[k - 1][node] + acc * z / (k + 1) as f64;
        }
        acc * z * z / 2.0
    }

    /// Copy truncated to orders `1..=k`.
    pub fn truncated(&self, k: usize) -> Self {
        let keep = k.max(1).min(self.coeffs.len());
        Nonlinearity {
            coeffs: self.coeffs[..keep].to_vec(),
            node_count: self.node_count,
            satisfies_1_3: self.satisfies_1_3,
        }
    }

    /// Copy with coefficient `k` replaced (extending with zeros as needed).
    pub fn with_coefficient(&self, k: usize, field: Vec<f64>) -> Result<Self> {
        let mut fields: BTreeMap<usize, Vec<f64>> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, v)| (i + 1, v.clone()))
            .collect();
        fields.insert(k, field);
        Self::from_fields(self.node_count, fields)
    }

    /// True when the orders below `m` coincide exactly.
    pub fn agrees_below(&self, other: &Nonlinearity, m: usize) -> bool {
        (1..m).all(|k| {
            let zero = vec![0.0; self.node_count];
            let a = self.coefficient(k).unwrap_or(&zero);
            let b = other.coefficient(k).unwrap_or(&zero);
            a == b
        })
    }
}

const INVERSE_ITER_MAX: usize = 500;
const EIGEN_ZERO_TOL: f64 = 1e-8;

/// Checks that 0 is not a Dirichlet eigenvalue of `Δ_h + diag(q_1)` on the
/// masked domain, by inverse iteration for the eigenvalue of smallest
/// magnitude.
pub fn check_condition_1_2(a: &Nonlinearity, mask: &DomainMask) -> Result<bool> {
    Ok(smallest_eigenvalue(a, mask)?.abs() > EIGEN_ZERO_TOL)
}

/// Eigenvalue of `Δ_h + diag(q_1)` (zero Dirichlet data) closest to zero.
pub fn smallest_eigenvalue(a: &Nonlinearity, mask: &DomainMask) -> Result<f64> {
    let grid = mask.grid();
    let h2 = grid.h() * grid.h();
    let q1: Vec<f64> = mask
        .unknowns()
        .iter()
        .map(|&node| a.coefficient(1).map_or(0.0, |q| q[node]))
        .collect();
    let op = StencilOperator::new(mask, Some(&q1));
    let factor = match BandedLdlt::factor(&op) {
        Ok(f) => f,
        // exactly singular in floating point
        Err(_) => return Ok(0.0),
    };
    let n = op.len();
    // deterministic start vector with no special symmetry
    let mut x: Vec<f64> = (0..n)
        .map(|u| 1.0 + 0.5 * ((u as f64) * 0.618_033_988_75).fract())
        .collect();
    normalize(&mut x);
    let mut kx = vec![0.0; n];
    let mut lambda = f64::NAN;
    for _ in 0..INVERSE_ITER_MAX {
        factor.solve_in_place(&mut x);
        if x.iter().any(|v| !v.is_finite()) {
            return Ok(0.0);
        }
        normalize(&mut x);
        op.apply(&x, &mut kx);
        // K = -h² A, so the Rayleigh quotient of A is -(xᵀKx)/h²
        let next = -crate::linalg::dot(&x, &kx) / h2;
        if (next - lambda).abs() <= 1e-11 * next.abs().max(1.0) {
            return Ok(next);
        }
        lambda = next;
    }
    Err(LabError::Diagnostic(format!(
        "inverse iteration did not converge (last estimate {lambda:e})"
    )))
}

fn normalize(x: &mut [f64]) {
    let n = crate::linalg::norm2(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}
