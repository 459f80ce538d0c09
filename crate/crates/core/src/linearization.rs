//! Mixed ε-derivatives of the DN map and the chain-rule polynomial `R_N`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dn_map::{BoundaryFunction, DnOracle};
use crate::error::{LabError, Result};
use crate::forward::Field;
use crate::nonlinearity::Nonlinearity;
use crate::probes::{combination_ledger, Part};

/// Largest derivative order accepted by [`mixed_derivative`].
pub const MAX_DERIVATIVE_ORDER: usize = 5;

/// Largest order accepted by [`chain_terms`].
pub const MAX_CHAIN_ORDER: usize = 8;

/// `∂^m/∂ε_1⋯∂ε_m Λ(Σ ε_i f_i)` at `ε = 0`.
#[derive(Debug, Clone)]
pub struct LinearizedDerivative {
    pub order: usize,
    /// Sup-norm of each probe. Probes are normalized to unit sup-norm before
    /// differencing, and the product of these scales is multiplied back in.
    pub scales: Vec<f64>,
    /// Step applied to each normalized probe.
    pub eps: f64,
    pub values: BoundaryFunction,
}

/// Sum with a canonical (sorted) order so the result does not depend on how
/// the terms were enumerated.
fn canonical_sum(terms: &mut [f64]) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Default step for order `m`: `10⁻² δ / m`.
pub fn default_eps(delta: f64, m: usize) -> f64 {
    1e-2 * delta / m as f64
}

/// Tensor central difference
/// `(2ε)^{−m} Σ_{σ∈{±1}^m} (Π σ_i) Λ(Σ σ_i ε f_i/‖f_i‖) · Π ‖f_i‖`.
/// For `m ≥ 2` the stencil annihilates the linear part of `Λ`, so only the
/// nonlinear part is measured. The `2^m` measurements run in parallel; all
/// reductions use a fixed order.
pub fn mixed_derivative(
    oracle: &DnOracle,
    probes: &[BoundaryFunction],
    eps: f64,
) -> Result<LinearizedDerivative> {
    let m = probes.len();
    if m == 0 || m > MAX_DERIVATIVE_ORDER {
        return Err(LabError::Config(format!(
            "derivative order {m} outside 1..={MAX_DERIVATIVE_ORDER}"
        )));
    }
    let delta = oracle.config().delta;
    if !(eps > 0.0) || m as f64 * eps > delta * (1.0 + 1e-12) {
        return Err(LabError::Precondition(format!(
            "step {eps:e} for {m} unit probes exceeds the smallness cap {delta:e}"
        )));
    }
    let trace = oracle.trace().clone();
    for p in probes {
        if !p.is_real() {
            return Err(LabError::Precondition(
                "mixed derivative probes must be real; use the combination ledger".into(),
            ));
        }
        if !p.trace().same_nodes(&trace) {
            return Err(LabError::Precondition(
                "probe is not given on the oracle's data trace".into(),
            ));
        }
    }
    let scales: Vec<f64> = probes.iter().map(|p| p.sup()).collect();
    if scales.contains(&0.0) {
        return Ok(LinearizedDerivative {
            order: m,
            scales,
            eps,
            values: BoundaryFunction::zeros(trace),
        });
    }
    let unit: Vec<Vec<f64>> = probes
        .iter()
        .zip(&scales)
        .map(|(p, s)| p.re().iter().map(|v| v / s).collect())
        .collect();
    let len = trace.len();
    let patterns: Vec<usize> = (0..1usize << m).collect();
    let measured: Vec<Result<(f64, Vec<f64>)>> = patterns
        .par_iter()
        .map(|&bits| {
            let sign = |i: usize| if bits >> i & 1 == 1 { -1.0 } else { 1.0 };
            let mut terms = vec![0.0; m];
            let data: Vec<f64> = (0..len)
                .map(|k| {
                    for (i, t) in terms.iter_mut().enumerate() {
                        *t = sign(i) * eps * unit[i][k];
                    }
                    canonical_sum(&mut terms)
                })
                .collect();
            let f = BoundaryFunction::new(trace.clone(), data)?;
            let parity: f64 = (0..m).map(sign).product();
            let g = if m == 1 {
                oracle.measure(&f)?
            } else {
                oracle.measure_nonlinear_part(&f)?
            };
            Ok((parity, g.re().to_vec()))
        })
        .collect();
    let measured: Vec<(f64, Vec<f64>)> = measured.into_iter().collect::<Result<_>>()?;
    let mut sorted_scales = scales.clone();
    sorted_scales.sort_by(f64::total_cmp);
    let factor = sorted_scales.iter().product::<f64>() / (2.0 * eps).powi(m as i32);
    let mut terms = vec![0.0; measured.len()];
    let values: Vec<f64> = (0..len)
        .map(|k| {
            for (t, (parity, g)) in terms.iter_mut().zip(&measured) {
                *t = parity * g[k];
            }
            canonical_sum(&mut terms) * factor
        })
        .collect();
    Ok(LinearizedDerivative {
        order: m,
        scales,
        eps,
        values: BoundaryFunction::new(trace, values)?,
    })
}

/// Complex-multilinear extension of [`mixed_derivative`] to complex probes,
/// assembled from real/imaginary parts with the combination ledger.
/// Ledger entries that select the (absent or zero) imaginary part of a real
/// probe are skipped.
pub fn complex_mixed_derivative(
    oracle: &DnOracle,
    probes: &[BoundaryFunction],
    eps: f64,
) -> Result<BoundaryFunction> {
    let m = probes.len();
    let ledger = combination_ledger(m)?;
    let len = oracle.trace().len();
    let mut re = vec![0.0; len];
    let mut im = vec![0.0; len];
    for entry in &ledger.entries {
        let mut parts = Vec::with_capacity(m);
        let mut vanishes = false;
        for (p, part) in probes.iter().zip(&entry.parts) {
            let g = match part {
                Part::Re => p.real_part(),
                Part::Im => p.imag_part(),
            };
            if g.sup() == 0.0 {
                vanishes = true;
                break;
            }
            parts.push(g);
        }
        if vanishes {
            continue;
        }
        let d = mixed_derivative(oracle, &parts, eps)?;
        let c = entry.coefficient;
        for k in 0..len {
            let v = d.values.re()[k];
            re[k] += c.re * v;
            im[k] += c.im * v;
        }
    }
    BoundaryFunction::complex(oracle.trace().clone(), re, Some(im))
}

/// One set partition of `{0..m−1}` (slots), i.e. one Faà di Bruno term
/// `∂_z^p a · Π_B ∂^{|B|} u / ∂ε_B` with `p` = number of blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainTerm {
    pub blocks: Vec<Vec<usize>>,
    /// Always 1 for set partitions.
    pub multiplicity: u32,
}

impl ChainTerm {
    /// z-derivative order `p`.
    pub fn order(&self) -> usize {
        self.blocks.len()
    }

    pub fn slots(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }
}

/// All set partitions of `m` slots, generated as restricted-growth strings
/// in lexicographic order. The count is the Bell number `B_m`.
pub fn chain_terms(m: usize) -> Result<Vec<ChainTerm>> {
    if !(1..=MAX_CHAIN_ORDER).contains(&m) {
        return Err(LabError::Config(format!(
            "chain order {m} outside 1..={MAX_CHAIN_ORDER}"
        )));
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; m];
    loop {
        let p = rgs.iter().max().map_or(0, |v| v + 1);
        let mut blocks = vec![Vec::new(); p];
        for (slot, &b) in rgs.iter().enumerate() {
            blocks[b].push(slot);
        }
        out.push(ChainTerm {
            blocks,
            multiplicity: 1,
        });
        // next restricted-growth string: increment the rightmost position
        // that may grow, reset everything after it
        let mut pos = m;
        while pos > 1 {
            pos -= 1;
            let prefix_max = rgs[..pos].iter().max().copied().unwrap_or(0);
            if rgs[pos] <= prefix_max {
                rgs[pos] += 1;
                for v in &mut rgs[pos + 1..] {
                    *v = 0;
                }
                break;
            }
            if pos == 1 {
                return Ok(out);
            }
        }
        if m == 1 {
            return Ok(out);
        }
    }
}

/// Key of a lower-order field: the sorted multiset of probe labels of a
/// block. Slots carrying the same probe share a label, so `w^{(kℓ)}` and
/// `w^{(ℓk)}` are one entry.
pub fn multiset_key(labels: &[usize], block: &[usize]) -> Vec<usize> {
    let mut key: Vec<usize> = block.iter().map(|&s| labels[s]).collect();
    key.sort_unstable();
    key
}

/// Lower-order fields `w^{(B)}` (singletons are the probe fields `v`).
pub type LowerFields = BTreeMap<Vec<usize>, Vec<Complex64>>;

/// `R = Σ_{terms, 2 ≤ p ≤ m−1} q_p Π_B w^{(B)}` over complex fields.
/// The single-block term (carries `q_1 = 0`) and the all-singletons term
/// (carries the unknown top coefficient) are excluded.
pub fn assemble_rn_complex(
    terms: &[ChainTerm],
    labels: &[usize],
    lower: &LowerFields,
    a: &Nonlinearity,
) -> Result<Vec<Complex64>> {
    let count = a.node_count();
    let mut out = vec![Complex64::new(0.0, 0.0); count];
    for term in terms {
        let m = term.slots();
        if labels.len() != m {
            return Err(LabError::Config(format!(
                "{} labels for a chain term on {m} slots",
                labels.len()
            )));
        }
        let p = term.order();
        if p < 2 || p >= m {
            continue;
        }
        let q = a.coefficient(p).ok_or_else(|| {
            LabError::Dependency(format!("coefficient of order {p} not available"))
        })?;
        let fields: Vec<&Vec<Complex64>> = term
            .blocks
            .iter()
            .map(|b| {
                let key = multiset_key(labels, b);
                lower.get(&key).ok_or_else(|| {
                    LabError::Dependency(format!("lower-order field {key:?} missing"))
                })
            })
            .collect::<Result<_>>()?;
        for (k, o) in out.iter_mut().enumerate() {
            let prod: Complex64 = fields.iter().map(|f| f[k]).product();
            *o += prod * q[k];
        }
    }
    Ok(out)
}

/// Real version of [`assemble_rn_complex`].
pub fn assemble_rn(
    terms: &[ChainTerm],
    labels: &[usize],
    lower: &BTreeMap<Vec<usize>, Field>,
    a: &Nonlinearity,
) -> Result<Field> {
    let lower_c: LowerFields = lower
        .iter()
        .map(|(k, f)| {
            (
                k.clone(),
                f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            )
        })
        .collect();
    let r = assemble_rn_complex(terms, labels, &lower_c, a)?;
    Ok(Field {
        values: r.iter().map(|z| z.re).collect(),
    })
}
