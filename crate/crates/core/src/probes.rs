//! Probe data: Calderón exponentials, the weight function `v⁽⁰⁾`, cutoffs
//! for partial data, and the real/imaginary recombination ledger.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dn_map::BoundaryFunction;
use crate::error::{LabError, Result};
use crate::forward::{Field, LinearFieldSolver};
use crate::geometry::{boundary_trace, BoundaryTrace, DomainMask, Grid, TraceKind};

/// Default overflow guard on `|ξ|`.
pub const DEFAULT_XI_MAX: f64 = 4.0 * PI;

/// A pair of exponential probes `s₁ e^{(η+iξ)·x}`, `s₂ e^{(−η+iξ)·x}` sampled
/// on a boundary trace.
#[derive(Debug, Clone)]
pub struct CalderonPair {
    pub xi: [f64; 2],
    pub eta: [f64; 2],
    /// Amplitude scales `s₁`, `s₂`. Each probe gets its own scale so that
    /// both reach the smallness cap.
    pub scales: [f64; 2],
    pub f1: BoundaryFunction,
    pub f2: BoundaryFunction,
}

impl CalderonPair {
    /// Analytic values `(v₁, v₂)` of the (unscaled) exponentials at `p`.
    pub fn exponentials(&self, p: [f64; 2]) -> (Complex64, Complex64) {
        exponential_pair(self.xi, self.eta, p)
    }

    /// Product of the two scales; divides out of any bilinear quantity.
    pub fn scale_product(&self) -> f64 {
        self.scales[0] * self.scales[1]
    }
}

fn exponential_pair(xi: [f64; 2], eta: [f64; 2], p: [f64; 2]) -> (Complex64, Complex64) {
    let phase = Complex64::new(0.0, xi[0] * p[0] + xi[1] * p[1]);
    let growth = eta[0] * p[0] + eta[1] * p[1];
    ((growth + phase).exp(), (-growth + phase).exp())
}

/// `η = rot90(ξ)`.
pub fn rot90(xi: [f64; 2]) -> [f64; 2] {
    [-xi[1], xi[0]]
}

pub fn calderon_pair(
    xi: [f64; 2],
    trace: &Arc<BoundaryTrace>,
    grid: &Grid,
    delta: f64,
) -> Result<CalderonPair> {
    calderon_pair_with_limit(xi, trace, grid, delta, DEFAULT_XI_MAX)
}

pub fn calderon_pair_with_limit(
    xi: [f64; 2],
    trace: &Arc<BoundaryTrace>,
    grid: &Grid,
    delta: f64,
    xi_max: f64,
) -> Result<CalderonPair> {
    let norm = xi[0].hypot(xi[1]);
    if !norm.is_finite() || norm > xi_max * (1.0 + 1e-12) {
        return Err(LabError::Config(format!(
            "|ξ| = {norm} exceeds the exponential guard {xi_max}"
        )));
    }
    if !(delta > 0.0) {
        return Err(LabError::Config(
            "probe amplitude cap must be positive".into(),
        ));
    }
    let eta = rot90(xi);
    let values: Vec<(Complex64, Complex64)> = trace
        .nodes
        .iter()
        .map(|&k| exponential_pair(xi, eta, grid.position(k)))
        .collect();
    let max1 = values.iter().fold(0.0f64, |m, v| m.max(v.0.norm()));
    let max2 = values.iter().fold(0.0f64, |m, v| m.max(v.1.norm()));
    let scales = [delta / max1, delta / max2];
    let make = |s: f64, pick: fn(&(Complex64, Complex64)) -> Complex64| {
        let re = values.iter().map(|v| s * pick(v).re).collect();
        let im = values.iter().map(|v| s * pick(v).im).collect();
        BoundaryFunction::complex(trace.clone(), re, Some(im))
    };
    Ok(CalderonPair {
        xi,
        eta,
        scales,
        f1: make(scales[0], |v| v.0)?,
        f2: make(scales[1], |v| v.1)?,
    })
}

/// Real or imaginary part selected for one slot of a multilinear form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    Re,
    Im,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub parts: Vec<Part>,
    pub coefficient: Complex64,
}

/// Expansion `Π_k (Re z_k + i Im z_k) = Σ_j c_j Π_k part_j(z_k)`, so that a
/// real multilinear form extends complex-multilinearly using only real
/// inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationLedger {
    pub slots: usize,
    pub entries: Vec<LedgerEntry>,
}

/// Entries are ordered with slot 1 most significant and `Re < Im`.
pub fn combination_ledger(m: usize) -> Result<CombinationLedger> {
    if !(1..=6).contains(&m) {
        return Err(LabError::Config(format!(
            "ledger slot count {m} outside 1..=6"
        )));
    }
    let powers = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    let entries = (0..1usize << m)
        .map(|bits| {
            let parts: Vec<Part> = (0..m)
                .map(|slot| {
                    if bits >> (m - 1 - slot) & 1 == 1 {
                        Part::Im
                    } else {
                        Part::Re
                    }
                })
                .collect();
            let n_im = parts.iter().filter(|p| **p == Part::Im).count();
            LedgerEntry {
                parts,
                coefficient: powers[n_im % 4],
            }
        })
        .collect();
    Ok(CombinationLedger { slots: m, entries })
}

impl CombinationLedger {
    /// `Σ_j c_j Π_k part_j(z_k)`.
    pub fn recombine_product(&self, z: &[Complex64]) -> Complex64 {
        self.entries
            .iter()
            .map(|e| {
                let prod: f64 = e
                    .parts
                    .iter()
                    .zip(z)
                    .map(|(p, v)| match p {
                        Part::Re => v.re,
                        Part::Im => v.im,
                    })
                    .product();
                e.coefficient * prod
            })
            .sum()
    }

    /// Maximum relative error of the recombination identity over `samples`.
    pub fn identity_error(&self, samples: &[Vec<Complex64>]) -> f64 {
        samples
            .iter()
            .map(|z| {
                let exact: Complex64 = z.iter().product();
                let got = self.recombine_product(z);
                (got - exact).norm() / exact.norm().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

/// Smooth nonnegative cutoff on `[0, len]`: `(1 − s²)⁴` with
/// `s = (t − len/2) / (0.45 len)`, zero outside `|s| < 1`.
pub fn gamma_cutoff(t: f64, len: f64) -> f64 {
    let s = (t - 0.5 * len) / (0.45 * len);
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - s * s).powi(4)
    }
}

fn cutoff_values(trace: &BoundaryTrace) -> Vec<f64> {
    trace
        .arc
        .iter()
        .map(|&t| gamma_cutoff(t, trace.length))
        .collect()
}

/// Dirichlet data of the weight function on the mask's data trace: 1 on
/// `∂Ω` for full-boundary data, the Γ cutoff otherwise.
pub fn weight_data(mask: &DomainMask) -> Result<BoundaryFunction> {
    let trace = Arc::new(boundary_trace(mask, mask.data_trace_kind())?);
    let values = if mask.full_boundary() {
        vec![1.0; trace.len()]
    } else {
        cutoff_values(&trace)
    };
    BoundaryFunction::new(trace, values)
}

/// The positive harmonic weight `v⁽⁰⁾`: vanishes on the cavity and on
/// `∂Ω \ Γ`.
pub fn weight_function(mask: &DomainMask) -> Result<Field> {
    let data = weight_data(mask)?;
    let v0 = LinearFieldSolver::laplace(mask)?.solve_with_data(None, &data)?;
    for &node in mask.unknowns() {
        if !(v0.values[node] > 0.0) {
            return Err(LabError::Diagnostic(format!(
                "weight function not positive at node {node}: {}",
                v0.values[node]
            )));
        }
    }
    Ok(v0)
}

/// Probe data adapted to cavity or partial-data geometry: exponential samples
/// on the data trace, multiplied by the Γ cutoff when data is partial. The
/// cavity boundary always receives zero.
pub fn adapted_probe_pair(xi: [f64; 2], mask: &DomainMask, delta: f64) -> Result<CalderonPair> {
    let trace = Arc::new(boundary_trace(mask, mask.data_trace_kind())?);
    let grid = mask.grid();
    if mask.data_trace_kind() == TraceKind::Outer {
        return calderon_pair(xi, &trace, grid, delta);
    }
    let cut = cutoff_values(&trace);
    let eta = rot90(xi);
    let values: Vec<(Complex64, Complex64)> = trace
        .nodes
        .iter()
        .zip(&cut)
        .map(|(&k, &c)| {
            let (a, b) = exponential_pair(xi, eta, grid.position(k));
            (a * c, b * c)
        })
        .collect();
    let max1 = values.iter().fold(0.0f64, |m, v| m.max(v.0.norm()));
    let max2 = values.iter().fold(0.0f64, |m, v| m.max(v.1.norm()));
    let scales = [delta / max1, delta / max2];
    let make = |s: f64, pick: fn(&(Complex64, Complex64)) -> Complex64| {
        let re = values.iter().map(|v| s * pick(v).re).collect();
        let im = values.iter().map(|v| s * pick(v).im).collect();
        BoundaryFunction::complex(trace.clone(), re, Some(im))
    };
    Ok(CalderonPair {
        xi,
        eta,
        scales,
        f1: make(scales[0], |v| v.0)?,
        f2: make(scales[1], |v| v.1)?,
    })
}

/// Frequencies `π(k₁,k₂)` with `|k_i| ≤ k_max` and `|ξ| ≤ xi_max`. With
/// `half`, only one of each `±ξ` pair is kept (`k₁ > 0`, or `k₁ = 0, k₂ ≥ 0`).
pub fn probe_lattice(k_max: i32, xi_max: f64, half: bool) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for k1 in -k_max..=k_max {
        for k2 in -k_max..=k_max {
            if half && (k1 < 0 || (k1 == 0 && k2 < 0)) {
                continue;
            }
            let xi = [PI * k1 as f64, PI * k2 as f64];
            if xi[0].hypot(xi[1]) <= xi_max * (1.0 + 1e-12) {
                out.push(xi);
            }
        }
    }
    out
}

/// Reproducibility record of the probes used in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    pub delta: f64,
    pub xi: Vec<[f64; 2]>,
    pub scales: Vec<[f64; 2]>,
}

impl ProbeSet {
    pub fn from_pairs(delta: f64, pairs: &[CalderonPair]) -> Self {
        ProbeSet {
            delta,
            xi: pairs.iter().map(|p| p.xi).collect(),
            scales: pairs.iter().map(|p| p.scales).collect(),
        }
    }
}
