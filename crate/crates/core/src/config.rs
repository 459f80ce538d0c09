//! JSON experiment configuration shared by all commands.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dn_map::BoundaryFunction;
use crate::error::{LabError, Result};
use crate::experiments::Thresholds;
use crate::forward::SolverConfig;
use crate::geometry::{BoundaryTrace, Cavity, DomainMask, Gamma, Grid, Notch};
use crate::nonlinearity::{CoefficientExpr, Nonlinearity};
use crate::probes::{adapted_probe_pair, weight_data};
use crate::reconstruction::ReconstructionConfig;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub n: usize,
    #[serde(default)]
    pub cavity: Option<Cavity>,
    #[serde(default = "gamma_all")]
    pub gamma: Gamma,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notch: Option<Notch>,
}

fn gamma_all() -> Gamma {
    Gamma::All
}

impl GeometryConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n)
    }

    pub fn mask(&self) -> Result<DomainMask> {
        DomainMask::new(
            self.grid()?,
            self.cavity.clone(),
            self.gamma.clone(),
            self.notch.clone(),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    /// Order (as a decimal string) to closed-form coefficient field.
    #[serde(default)]
    pub coefficients: BTreeMap<String, CoefficientExpr>,
}

impl NonlinearityConfig {
    pub fn orders(&self) -> Result<BTreeMap<usize, CoefficientExpr>> {
        self.coefficients
            .iter()
            .map(|(k, e)| {
                let order: usize = k.parse().map_err(|_| {
                    LabError::Config(format!("coefficient key {k:?} is not an order"))
                })?;
                Ok((order, e.clone()))
            })
            .collect()
    }

    pub fn build(&self, grid: &Grid) -> Result<Nonlinearity> {
        let orders = self.orders()?;
        if orders.is_empty() {
            return Ok(Nonlinearity::zero(grid.node_count()));
        }
        Nonlinearity::from_exprs(grid, &orders)
    }
}

/// Probe data description, sampled on the data trace of the geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeSpec {
    Constant {
        value: f64,
    },
    /// Real or imaginary part of one member of the adapted exponential pair.
    Calderon {
        xi: [f64; 2],
        #[serde(default = "first_slot")]
        slot: usize,
        #[serde(default)]
        imaginary: bool,
    },
    /// The Γ cutoff scaled to the given amplitude.
    GammaBump {
        amplitude: f64,
    },
    Expr {
        expr: CoefficientExpr,
    },
}

fn first_slot() -> usize {
    1
}

impl ProbeSpec {
    pub fn build(
        &self,
        mask: &DomainMask,
        trace: &Arc<BoundaryTrace>,
        delta: f64,
    ) -> Result<BoundaryFunction> {
        let grid = mask.grid();
        match self {
            ProbeSpec::Constant { value } => Ok(BoundaryFunction::from_fn(trace, grid, |_| *value)),
            ProbeSpec::Calderon {
                xi,
                slot,
                imaginary,
            } => {
                let pair = adapted_probe_pair(*xi, mask, delta)?;
                let f = match slot {
                    1 => pair.f1,
                    2 => pair.f2,
                    _ => return Err(LabError::Config(format!("probe slot {slot} not in 1..=2"))),
                };
                Ok(if *imaginary {
                    f.imag_part()
                } else {
                    f.real_part()
                })
            }
            ProbeSpec::GammaBump { amplitude } => {
                let w = weight_data(mask)?;
                let s = w.sup();
                Ok(w.scaled(amplitude / s))
            }
            ProbeSpec::Expr { expr } => {
                Ok(BoundaryFunction::from_fn(trace, grid, |p| expr.eval(p)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardSection {
    /// Dirichlet data on the data trace.
    pub boundary: CoefficientExpr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearizeSection {
    pub probes: Vec<ProbeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSection {
    #[serde(default = "two")]
    pub order: usize,
    #[serde(default)]
    pub settings: ReconstructionConfig,
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityExpSection {
    pub cavity_a: Option<Cavity>,
    pub cavity_b: Option<Cavity>,
    pub probes: Vec<ProbeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialExpSection {
    pub notch_a: Option<Notch>,
    pub notch_b: Option<Notch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySection {
    pub order: usize,
    /// `q_{m,1} − q_{m,2}`: the second nonlinearity equals the first one with
    /// this field subtracted at order `m`.
    pub difference: CoefficientExpr,
    #[serde(default)]
    pub xi: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: String,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward: Option<ForwardSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linearize: Option<LinearizeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruct: Option<ReconstructSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity_exp: Option<CavityExpSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_exp: Option<PartialExpSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<IdentitySection>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(LabError::Config(format!(
                "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
                self.schema_version
            )));
        }
        self.solver.validate()?;
        self.nonlinearity.orders()?;
        if let Some(r) = &self.reconstruct {
            r.settings.validate()?;
        }
        Ok(())
    }

    pub fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> Result<&'a T> {
        s.as_ref()
            .ok_or_else(|| LabError::Config(format!("missing config section {name:?}")))
    }
}
