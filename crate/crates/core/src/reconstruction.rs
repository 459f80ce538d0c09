//! Recovery of the Taylor coefficients `q_k = ∂_z^k a(·,0)` from DN data:
//! Fourier samples from exponential probe pairs, band-limited synthesis,
//! and the recursion over orders through the lower-order `w`-fields.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dn_map::{BoundaryFunction, DnOracle};
use crate::error::{LabError, Result};
use crate::forward::{linear_residual, Field, LinearFieldSolver};
use crate::geometry::{DomainMask, Grid};
use crate::linearization::{
    assemble_rn_complex, chain_terms, complex_mixed_derivative, default_eps, multiset_key,
    ChainTerm, LowerFields,
};
use crate::nonlinearity::Nonlinearity;
use crate::probes::{calderon_pair_with_limit, probe_lattice, CalderonPair, DEFAULT_XI_MAX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    /// Lattice `π(k₁,k₂)`, `|k_i| ≤ k_max`.
    pub k_max: i32,
    /// Lattice points with `|ξ|` above this radius are dropped.
    pub lattice_radius: f64,
    /// `ξ_max` of the Gaussian synthesis taper and of the exponential guard.
    pub xi_max: f64,
    /// Step per unit probe; `None` uses the order default `10⁻² δ / m`.
    pub eps: Option<f64>,
    /// Amplitude of the constant probes; `None` uses `δ`.
    pub constant_probe: Option<f64>,
    /// Highest order that may be requested.
    pub max_order: usize,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            k_max: 4,
            lattice_radius: DEFAULT_XI_MAX,
            xi_max: DEFAULT_XI_MAX,
            eps: None,
            constant_probe: None,
            max_order: 4,
        }
    }
}

impl ReconstructionConfig {
    /// Half lattice (one of each `±ξ`).
    pub fn lattice(&self) -> Vec<[f64; 2]> {
        probe_lattice(self.k_max, self.lattice_radius.min(self.xi_max), true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max < 0 || !(self.lattice_radius >= 0.0) || !(self.xi_max > 0.0) {
            return Err(LabError::Config(format!(
                "invalid lattice settings {self:?}"
            )));
        }
        if self.eps.is_some_and(|e| !(e > 0.0)) || self.constant_probe.is_some_and(|c| !(c > 0.0)) {
            return Err(LabError::Config(
                "eps and constant_probe must be positive".into(),
            ));
        }
        if self.max_order < 2 {
            return Err(LabError::Config("max_order must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierSample {
    pub xi: [f64; 2],
    /// `∫ q e^{2iξ·x} dx`, i.e. the transform of `q` at `−2ξ`.
    pub value: Complex64,
}

/// Fourier samples of one coefficient over a probe lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSamples {
    pub order: usize,
    pub samples: Vec<FourierSample>,
}

fn same_xi(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9
}

impl FourierSamples {
    pub fn get(&self, xi: [f64; 2]) -> Option<Complex64> {
        self.samples
            .iter()
            .find(|s| same_xi(s.xi, xi))
            .map(|s| s.value)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.value.norm()))
    }

    /// Adds `−ξ ↦ conj(value)` for every sample whose mirror is absent
    /// (valid for real coefficients).
    pub fn with_conjugates(&self) -> FourierSamples {
        let mut samples = self.samples.clone();
        for s in &self.samples {
            let mirror = [-s.xi[0], -s.xi[1]];
            if self.get(mirror).is_none() {
                samples.push(FourierSample {
                    xi: mirror,
                    value: s.value.conj(),
                });
            }
        }
        FourierSamples {
            order: self.order,
            samples,
        }
    }

    /// Largest `|ĝ(ξ) − conj ĝ(−ξ)|` over pairs present in the set, relative
    /// to the largest sample; `None` when no mirror pair is present.
    pub fn conjugate_symmetry_error(&self) -> Option<f64> {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: Option<f64> = None;
        for s in &self.samples {
            if s.xi == [0.0, 0.0] {
                let e = s.value.im.abs() / scale;
                worst = Some(worst.map_or(e, |w: f64| w.max(e)));
                continue;
            }
            if let Some(m) = self.get([-s.xi[0], -s.xi[1]]) {
                let e = (s.value - m.conj()).norm() / scale;
                worst = Some(worst.map_or(e, |w: f64| w.max(e)));
            }
        }
        worst
    }
}

/// Gaussian taper `exp(−|ξ|² / (2 ξ_max²))`.
pub fn taper(xi: [f64; 2], xi_max: f64) -> f64 {
    (-(xi[0] * xi[0] + xi[1] * xi[1]) / (2.0 * xi_max * xi_max)).exp()
}

/// `q(x) ≈ Re Σ_ξ ĝ(−2ξ) e^{−2iξ·x} w(ξ)` over the conjugate-completed
/// lattice. The unit square has unit area, so no further normalization.
pub fn synthesize(samples: &FourierSamples, grid: &Grid, xi_max: f64) -> Field {
    let full = samples.with_conjugates();
    let terms: Vec<(f64, f64, Complex64)> = full
        .samples
        .iter()
        .map(|s| (2.0 * s.xi[0], 2.0 * s.xi[1], s.value * taper(s.xi, xi_max)))
        .collect();
    let values = (0..grid.node_count())
        .into_par_iter()
        .map(|node| {
            let p = grid.position(node);
            terms
                .iter()
                .map(|&(a, b, c)| (c * Complex64::new(0.0, -(a * p[0] + b * p[1])).exp()).re)
                .sum()
        })
        .collect();
    Field { values }
}

/// Trapezoidal `∫ q e^{2iξ·x} dx` of a sampled field over the mask.
pub fn fourier_quadrature(q: &Field, mask: &DomainMask, xi: [f64; 2]) -> Complex64 {
    let grid = mask.grid();
    (0..grid.node_count())
        .map(|node| {
            let p = grid.position(node);
            let w = mask.area_weight(node) * q.values[node];
            Complex64::new(0.0, 2.0 * (xi[0] * p[0] + xi[1] * p[1])).exp() * w
        })
        .sum()
}

/// Quadrature samples of a known field over a lattice; the reference for
/// band-limited error reporting.
pub fn quadrature_samples(
    q: &Field,
    mask: &DomainMask,
    lattice: &[[f64; 2]],
    order: usize,
) -> FourierSamples {
    FourierSamples {
        order,
        samples: lattice
            .iter()
            .map(|&xi| FourierSample {
                xi,
                value: fourier_quadrature(q, mask, xi),
            })
            .collect(),
    }
}

/// Trapezoidal L² norm over the mask.
pub fn l2_norm(f: &Field, mask: &DomainMask) -> f64 {
    f.values
        .iter()
        .enumerate()
        .map(|(k, v)| mask.area_weight(k) * v * v)
        .sum::<f64>()
        .sqrt()
}

/// `‖a − b‖ / ‖b‖`, or the absolute norm when `b` vanishes.
pub fn relative_l2(a: &Field, b: &Field, mask: &DomainMask) -> f64 {
    let diff = Field {
        values: a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
    };
    let d = l2_norm(&diff, mask);
    let n = l2_norm(b, mask);
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

type ComplexField = Vec<Complex64>;

fn to_complex(f: &Field) -> ComplexField {
    f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Solves `Δw = −s` with zero data for a complex source, as two real solves.
fn solve_complex(
    laplace: &LinearFieldSolver<'_>,
    source: &[Complex64],
) -> Result<(ComplexField, f64)> {
    let mask = laplace.mask();
    let re = Field {
        values: source.iter().map(|z| z.re).collect(),
    };
    let im = Field {
        values: source.iter().map(|z| z.im).collect(),
    };
    let wr = laplace.solve(Some(&re), None)?;
    let wi = laplace.solve(Some(&im), None)?;
    let res = linear_residual(mask, None, Some(&re), &wr).max(linear_residual(
        mask,
        None,
        Some(&im),
        &wi,
    ));
    Ok((
        wr.values
            .iter()
            .zip(&wi.values)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect(),
        res,
    ))
}

/// Harmonic extension of (possibly complex) boundary data.
pub fn harmonic_extension(
    laplace: &LinearFieldSolver<'_>,
    g: &BoundaryFunction,
) -> Result<ComplexField> {
    let re = laplace.solve_with_data(None, &g.real_part())?;
    if g.is_real() {
        return Ok(to_complex(&re));
    }
    let im = laplace.solve_with_data(None, &g.imag_part())?;
    Ok(re
        .values
        .iter()
        .zip(&im.values)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect())
}

/// `Σ_{partitions of the slots, 2 ≤ p ≤ m} q_p Π_B w^{(B)}`: the full
/// source of the `w`-equation of a block, top term included.
fn block_source(
    terms: &[ChainTerm],
    labels: &[usize],
    lower: &LowerFields,
    a: &Nonlinearity,
) -> Result<ComplexField> {
    let m = labels.len();
    let mut out = assemble_rn_complex(terms, labels, lower, a)?;
    if m >= 2 {
        let q = a.coefficient(m).ok_or_else(|| {
            LabError::Dependency(format!("coefficient of order {m} not recovered yet"))
        })?;
        let singles: Vec<&ComplexField> = labels
            .iter()
            .map(|&l| {
                lower
                    .get(&vec![l])
                    .ok_or_else(|| LabError::Dependency(format!("probe field {l} missing")))
            })
            .collect::<Result<_>>()?;
        for (k, o) in out.iter_mut().enumerate() {
            let prod: Complex64 = singles.iter().map(|f| f[k]).product();
            *o += prod * q[k];
        }
    }
    Ok(out)
}

/// Computes `w^{(B)}` for every label multiset `B` (taken from the slots)
/// with `2 ≤ |B| ≤ max_size`, in increasing size. `lower` must contain the
/// probe fields keyed by single labels; the result contains them too.
/// Returns the fields and the largest linear residual of the solves.
pub fn solve_w_fields(
    a: &Nonlinearity,
    laplace: &LinearFieldSolver<'_>,
    labels: &[usize],
    probes: LowerFields,
    max_size: usize,
) -> Result<(LowerFields, f64)> {
    let mut fields = probes;
    let mut worst = 0.0f64;
    let m = labels.len();
    for size in 2..=max_size.min(m) {
        if a.max_order() < size {
            return Err(LabError::Dependency(format!(
                "w-fields of size {size} need q_{size}, recovered only up to {}",
                a.max_order()
            )));
        }
        let terms = chain_terms(size)?;
        let mut keys: BTreeSet<Vec<usize>> = BTreeSet::new();
        for mask_bits in 0u32..(1 << m) {
            if mask_bits.count_ones() as usize == size {
                let block: Vec<usize> = (0..m).filter(|&s| mask_bits >> s & 1 == 1).collect();
                keys.insert(multiset_key(labels, &block));
            }
        }
        for key in keys {
            let src = block_source(&terms, &key, &fields, a)?;
            let (w, res) = solve_complex(laplace, &src)?;
            worst = worst.max(res);
            fields.insert(key, w);
        }
    }
    Ok((fields, worst))
}

/// Per-order outcome.
#[derive(Debug, Clone)]
pub struct OrderResult {
    pub order: usize,
    pub samples: FourierSamples,
    pub field: Field,
    /// Relative L² error against the ground-truth field.
    pub relative_l2_truth: Option<f64>,
    /// Relative L² error against the synthesis of exact quadrature samples on
    /// the same lattice and taper.
    pub relative_l2_band: Option<f64>,
    /// Largest linear residual among intermediate `w`-solves.
    pub w_residual: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub orders: BTreeMap<usize, OrderResult>,
    pub lattice: Vec<[f64; 2]>,
    pub eps: BTreeMap<usize, f64>,
    pub xi_max: f64,
}

impl ReconstructionResult {
    /// Recovered coefficients assembled into a nonlinearity (orders 2..).
    pub fn recovered(&self, node_count: usize) -> Result<Nonlinearity> {
        Nonlinearity::from_fields(
            node_count,
            self.orders
                .iter()
                .map(|(&k, r)| (k, r.field.values.clone()))
                .collect(),
        )
    }
}

/// Drives the order-by-order recovery against one measurement oracle.
pub struct Reconstructor<'o> {
    oracle: &'o DnOracle,
    cfg: ReconstructionConfig,
    lattice: Vec<[f64; 2]>,
}

impl<'o> Reconstructor<'o> {
    pub fn new(oracle: &'o DnOracle, cfg: ReconstructionConfig) -> Result<Self> {
        cfg.validate()?;
        if !oracle.mask().full_boundary() || oracle.mask().cavity().is_some() {
            return Err(LabError::Precondition(
                "Fourier reconstruction needs full-boundary data on a domain without cavity".into(),
            ));
        }
        let lattice = cfg.lattice();
        Ok(Reconstructor {
            oracle,
            cfg,
            lattice,
        })
    }

    /// Uses an explicit lattice (half lattice expected; mirrors are
    /// completed by conjugation).
    pub fn with_lattice(mut self, lattice: Vec<[f64; 2]>) -> Result<Self> {
        if lattice.is_empty() {
            return Err(LabError::Config("probe lattice is empty".into()));
        }
        self.lattice = lattice;
        Ok(self)
    }

    pub fn lattice(&self) -> &[[f64; 2]] {
        &self.lattice
    }

    pub fn eps_for(&self, order: usize) -> f64 {
        self.cfg
            .eps
            .unwrap_or_else(|| default_eps(self.oracle.config().delta, order))
    }

    fn pair(&self, xi: [f64; 2]) -> Result<CalderonPair> {
        let mask = self.oracle.mask();
        calderon_pair_with_limit(
            xi,
            self.oracle.trace(),
            mask.grid(),
            self.oracle.config().delta,
            self.cfg.xi_max,
        )
    }

    /// Fourier samples of `q_k` from order-`k` data, given the coefficients
    /// of orders `2..k−1` in `recovered` (ignored for `k = 2`).
    pub fn samples(&self, k: usize, recovered: &Nonlinearity) -> Result<(FourierSamples, f64)> {
        if k < 2 || k > self.cfg.max_order {
            return Err(LabError::Config(format!(
                "order {k} outside 2..={}",
                self.cfg.max_order
            )));
        }
        if self.lattice.is_empty() {
            return Err(LabError::Config("probe lattice is empty".into()));
        }
        if !self.oracle.nonlinearity().satisfies_1_3() {
            return Err(LabError::Precondition(
                "reconstruction assumes ∂_z a(x,0) = 0".into(),
            ));
        }
        let mask: &DomainMask = self.oracle.mask();
        let delta = self.oracle.config().delta;
        let s0 = self.cfg.constant_probe.unwrap_or(delta);
        let eps = self.eps_for(k);
        let laplace = LinearFieldSolver::laplace(mask)?;
        let trace = self.oracle.trace().clone();
        let constant = BoundaryFunction::from_fn(&trace, mask.grid(), |_| s0);
        let v_const = if k > 2 {
            Some(harmonic_extension(&laplace, &constant)?)
        } else {
            None
        };
        let labels: Vec<usize> = (0..k).map(|s| s.min(2)).collect();
        let terms = chain_terms(k)?;
        let out: Vec<Result<(FourierSample, f64)>> = self
            .lattice
            .par_iter()
            .map(|&xi| {
                let pair = self.pair(xi)?;
                let mut probes = vec![pair.f1.clone(), pair.f2.clone()];
                probes.extend(std::iter::repeat_n(constant.clone(), k - 2));
                let d = complex_mixed_derivative(self.oracle, &probes, eps)?;
                let (bre, bim) = d.integrate();
                let mut total = Complex64::new(bre, bim);
                let mut res = 0.0;
                if k > 2 {
                    let mut lower = LowerFields::new();
                    lower.insert(vec![0], harmonic_extension(&laplace, &pair.f1)?);
                    lower.insert(vec![1], harmonic_extension(&laplace, &pair.f2)?);
                    lower.insert(vec![2], v_const.clone().expect("constant probe field"));
                    let (fields, r) = solve_w_fields(recovered, &laplace, &labels, lower, k - 1)?;
                    res = r;
                    let rn = assemble_rn_complex(&terms, &labels, &fields, recovered)?;
                    let integral: Complex64 = rn
                        .iter()
                        .enumerate()
                        .map(|(node, z)| z * mask.area_weight(node))
                        .sum();
                    total += integral;
                }
                let norm = pair.scale_product() * s0.powi(k as i32 - 2);
                Ok((
                    FourierSample {
                        xi,
                        value: -total / norm,
                    },
                    res,
                ))
            })
            .collect();
        let mut samples = Vec::with_capacity(out.len());
        let mut worst = 0.0f64;
        for r in out {
            let (s, res) = r?;
            samples.push(s);
            worst = worst.max(res);
        }
        Ok((FourierSamples { order: k, samples }, worst))
    }

    /// Recovers orders `2..=max_order` in sequence. `truth`, when given,
    /// supplies ground-truth coefficients for error reporting only.
    pub fn run(
        &self,
        max_order: usize,
        truth: Option<&Nonlinearity>,
    ) -> Result<ReconstructionResult> {
        if max_order > self.cfg.max_order {
            return Err(LabError::Config(format!(
                "order {max_order} exceeds the configured maximum {}",
                self.cfg.max_order
            )));
        }
        let mask: &DomainMask = self.oracle.mask();
        let grid = *mask.grid();
        let nc = grid.node_count();
        let mut recovered = Nonlinearity::zero(nc);
        let mut orders = BTreeMap::new();
        let mut eps = BTreeMap::new();
        for k in 2..=max_order {
            let start = Instant::now();
            let (samples, w_residual) = self.samples(k, &recovered)?;
            let field = synthesize(&samples, &grid, self.cfg.xi_max);
            let (rel_truth, rel_band) = match truth.and_then(|t| t.coefficient(k)) {
                Some(q) => {
                    let q = Field { values: q.to_vec() };
                    let band = synthesize(
                        &quadrature_samples(&q, mask, &self.lattice, k),
                        &grid,
                        self.cfg.xi_max,
                    );
                    (
                        Some(relative_l2(&field, &q, mask)),
                        Some(relative_l2(&field, &band, mask)),
                    )
                }
                None => (None, None),
            };
            recovered = recovered.with_coefficient(k, field.values.clone())?;
            eps.insert(k, self.eps_for(k));
            orders.insert(
                k,
                OrderResult {
                    order: k,
                    samples,
                    field,
                    relative_l2_truth: rel_truth,
                    relative_l2_band: rel_band,
                    w_residual,
                    runtime_s: start.elapsed().as_secs_f64(),
                },
            );
        }
        Ok(ReconstructionResult {
            orders,
            lattice: self.lattice.clone(),
            eps,
            xi_max: self.cfg.xi_max,
        })
    }
}

/// Order-2 recovery: samples and synthesized field.
pub fn recover_order2(
    oracle: &DnOracle,
    lattice: &[[f64; 2]],
    cfg: &ReconstructionConfig,
) -> Result<(FourierSamples, Field)> {
    let r = Reconstructor::new(oracle, cfg.clone())?.with_lattice(lattice.to_vec())?;
    let nc = oracle.mask().grid().node_count();
    let (s, _) = r.samples(2, &Nonlinearity::zero(nc))?;
    let f = synthesize(&s, oracle.mask().grid(), cfg.xi_max);
    Ok((s, f))
}

/// Order-`k` recovery given the coefficients of orders `2..k−1`.
pub fn recover_order_k(
    oracle: &DnOracle,
    recovered: &Nonlinearity,
    lattice: &[[f64; 2]],
    k: usize,
    cfg: &ReconstructionConfig,
) -> Result<(FourierSamples, Field)> {
    if k < 3 {
        return Err(LabError::Config("recover_order_k expects k ≥ 3".into()));
    }
    let r = Reconstructor::new(oracle, cfg.clone())?.with_lattice(lattice.to_vec())?;
    let (s, _) = r.samples(k, recovered)?;
    let f = synthesize(&s, oracle.mask().grid(), cfg.xi_max);
    Ok((s, f))
}

/// Standard lattice of radius `r` (half, conjugates implied).
pub fn lattice_within(radius: f64) -> Vec<[f64; 2]> {
    probe_lattice((radius / PI).floor() as i32, radius, true)
}

/// Convenience for callers holding an `Arc` oracle.
pub fn reconstruct(
    oracle: &Arc<DnOracle>,
    cfg: &ReconstructionConfig,
    max_order: usize,
    truth: Option<&Nonlinearity>,
) -> Result<ReconstructionResult> {
    Reconstructor::new(oracle, cfg.clone())?.run(max_order, truth)
}
