//! Run configuration: JSON schema with strict key checking, defaults, and
//! resolution into meshes, models, boundary specifications and solver
//! settings. Every run writes the fully resolved configuration next to its
//! outputs so results can be reproduced from the artifact directory alone.

use crate::forward::{AcquisitionSetup, PointSource};
use crate::hdg::{BoundaryCondition, BoundarySpec};
use crate::inversion::{InversionSettings, OrderPolicy};
use crate::mesh::{build_structured_mesh, Extent, SimplicialMesh};
use crate::model::ModelState;
use crate::{C64, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub model: ModelConfig,
    pub frequencies_hz: Vec<f64>,
    #[serde(default)]
    pub laplace_shift: f64,
    #[serde(default)]
    pub boundaries: BoundaryConfig,
    pub acquisition: AcquisitionConfig,
    #[serde(default = "OrderConfig::default")]
    pub orders: OrderConfig,
    #[serde(default)]
    pub inversion: InversionConfig,
    /// Per-trace signal-to-noise ratio in dB for synthetic data; absent
    /// means exact data.
    #[serde(default)]
    pub noise_snr_db: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Data set consumed by `invert` / written by `synthesize`.
    #[serde(default)]
    pub data_path: Option<PathBuf>,
}

fn default_seed() -> u64 {
    0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default)]
    pub generate: Option<GenerateMesh>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateMesh {
    /// Per-axis `[min, max]` in meters; two axes in 2D, three in 3D.
    pub extent: Vec<[f64; 2]>,
    pub cells_per_axis: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub uniform: Option<UniformModel>,
    #[serde(default)]
    pub inclusion: Option<InclusionModel>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformModel {
    pub c: f64,
    pub rho: f64,
}

/// Homogeneous background with one spherical (circular in 2D) inclusion,
/// assigned per cell by centroid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionModel {
    pub background_c: f64,
    pub inclusion_c: f64,
    pub rho: f64,
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcConfig {
    Dirichlet,
    Neumann,
    Absorbing,
    Robin { alpha: [f64; 2], beta: [f64; 2] },
}

impl BcConfig {
    fn to_condition(&self) -> BoundaryCondition {
        match self {
            BcConfig::Dirichlet => BoundaryCondition::Dirichlet,
            BcConfig::Neumann => BoundaryCondition::Neumann,
            BcConfig::Absorbing => BoundaryCondition::Absorbing,
            BcConfig::Robin { alpha, beta } => BoundaryCondition::Robin {
                alpha: C64::new(alpha[0], alpha[1]),
                beta: C64::new(beta[0], beta[1]),
            },
        }
    }
}

/// Boundary conditions by tag. The `surface` entry is an alias for the top
/// boundary of generated meshes (`ymax` in 2D, `zmax` in 3D) or the single
/// `boundary` tag of imported meshes; it defaults to Dirichlet with
/// absorbing conditions elsewhere.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default)]
    pub surface: Option<BcConfig>,
    #[serde(default)]
    pub default: Option<BcConfig>,
    #[serde(default)]
    pub tags: BTreeMap<String, BcConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderConfig {
    #[serde(default)]
    pub fixed: Option<u32>,
    #[serde(default)]
    pub adaptive: Option<AdaptiveOrders>,
}

impl Default for OrderConfig {
    fn default() -> Self {
        OrderConfig {
            fixed: Some(2),
            adaptive: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveOrders {
    pub dofs_per_wavelength: f64,
    #[serde(default)]
    pub p_min: u32,
    #[serde(default = "default_p_max")]
    pub p_max: u32,
}

fn default_p_max() -> u32 {
    crate::basis::MAX_ORDER
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    #[serde(default = "default_iterations")]
    pub iterations_per_freq: usize,
    #[serde(default)]
    pub c_bounds: Option<[f64; 2]>,
    #[serde(default = "default_c1")]
    pub armijo_c1: f64,
    #[serde(default = "default_halvings")]
    pub max_halvings: usize,
    #[serde(default = "default_update_fraction")]
    pub initial_update_fraction: f64,
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: usize,
}

fn default_iterations() -> usize {
    30
}
fn default_c1() -> f64 {
    1e-4
}
fn default_halvings() -> usize {
    20
}
fn default_update_fraction() -> f64 {
    0.02
}
fn default_checkpoint() -> usize {
    10
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            iterations_per_freq: default_iterations(),
            c_bounds: None,
            armijo_c1: default_c1(),
            max_halvings: default_halvings(),
            initial_update_fraction: default_update_fraction(),
            checkpoint_every: default_checkpoint(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub sources: Vec<SourceConfig>,
    pub receivers: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub position: Vec<f64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: [f64; 2],
}

fn default_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

/// Parse and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config schema violation: {e}")))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frequencies_hz.is_empty() {
            return Err(Error::Config("frequency list is empty".into()));
        }
        if self.frequencies_hz.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Config("frequencies must be positive".into()));
        }
        if self.laplace_shift < 0.0 {
            return Err(Error::Config("laplace_shift must be >= 0".into()));
        }
        match (&self.mesh.generate, &self.mesh.path) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "conflicting mesh sources: both 'generate' and 'path' given".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("mesh requires 'generate' or 'path'".into()))
            }
            _ => {}
        }
        let model_sources = [
            self.model.uniform.is_some(),
            self.model.inclusion.is_some(),
            self.model.path.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if model_sources != 1 {
            return Err(Error::Config(
                "model requires exactly one of 'uniform', 'inclusion', 'path'".into(),
            ));
        }
        match (&self.orders.fixed, &self.orders.adaptive) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "orders: 'fixed' and 'adaptive' are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("orders requires 'fixed' or 'adaptive'".into()))
            }
            _ => {}
        }
        if let Some([lo, hi]) = self.inversion.c_bounds {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::Config(format!(
                    "invalid c_bounds [{lo}, {hi}]"
                )));
            }
        }
        if self.acquisition.receivers.is_empty() {
            return Err(Error::Config("receiver list is empty".into()));
        }
        Ok(())
    }

    /// Complex frequencies `sigma = i*2*pi*f - s` in file order.
    pub fn sigmas(&self) -> Vec<C64> {
        self.frequencies_hz
            .iter()
            .map(|&f| crate::complex_frequency(f, self.laplace_shift))
            .collect()
    }

    pub fn build_mesh(&self) -> Result<SimplicialMesh> {
        if let Some(gen) = &self.mesh.generate {
            let dims = gen.extent.len();
            if dims != gen.cells_per_axis.len() {
                return Err(Error::Config(
                    "mesh.generate: extent and cells_per_axis dimensions differ".into(),
                ));
            }
            let extent = match dims {
                2 => Extent::new_2d(
                    (gen.extent[0][0], gen.extent[0][1]),
                    (gen.extent[1][0], gen.extent[1][1]),
                ),
                3 => Extent::new_3d(
                    (gen.extent[0][0], gen.extent[0][1]),
                    (gen.extent[1][0], gen.extent[1][1]),
                    (gen.extent[2][0], gen.extent[2][1]),
                ),
                d => return Err(Error::Config(format!("unsupported mesh dimension {d}"))),
            };
            build_structured_mesh(extent, &gen.cells_per_axis)
        } else {
            crate::io::read_mesh_ascii(self.mesh.path.as_ref().unwrap())
        }
    }

    pub fn build_model(&self, mesh: &SimplicialMesh) -> Result<ModelState> {
        let mut model = if let Some(u) = &self.model.uniform {
            ModelState::uniform(mesh, u.c, u.rho)
        } else if let Some(inc) = &self.model.inclusion {
            let mut m = ModelState::uniform(mesh, inc.background_c, inc.rho);
            for e in 0..mesh.n_cells() {
                let cen = mesh.cell_centroid(e);
                let mut d2 = 0.0;
                for (d, &c) in inc.center.iter().enumerate() {
                    d2 += (cen[d] - c) * (cen[d] - c);
                }
                if d2.sqrt() <= inc.radius {
                    m.c[e] = inc.inclusion_c;
                }
            }
            m
        } else {
            crate::io::read_model_ascii(self.model.path.as_ref().unwrap())?
        };
        if let Some([lo, hi]) = self.inversion.c_bounds {
            model.c_bounds = (lo, hi);
        }
        if model.n_cells != mesh.n_cells() {
            return Err(Error::Config(format!(
                "model has {} cells but the mesh has {}",
                model.n_cells,
                mesh.n_cells()
            )));
        }
        model.validate()?;
        Ok(model)
    }

    /// Resolve the `surface` alias against the mesh tags.
    pub fn surface_tag(mesh: &SimplicialMesh) -> Option<&'static str> {
        for name in ["zmax", "ymax", "boundary"] {
            if mesh.tag_index(name).is_some() {
                return Some(name);
            }
        }
        None
    }

    pub fn boundary_spec(&self, mesh: &SimplicialMesh) -> Result<BoundarySpec> {
        let default = self
            .boundaries
            .default
            .as_ref()
            .map(|b| b.to_condition())
            .unwrap_or(BoundaryCondition::Absorbing);
        let mut by_tag: Vec<(String, BoundaryCondition)> = Vec::new();
        let surface_bc = self
            .boundaries
            .surface
            .as_ref()
            .map(|b| b.to_condition())
            .unwrap_or(BoundaryCondition::Dirichlet);
        if let Some(tag) = Self::surface_tag(mesh) {
            by_tag.push((tag.to_string(), surface_bc));
        }
        for (tag, bc) in &self.boundaries.tags {
            by_tag.retain(|(t, _)| t != tag);
            by_tag.push((tag.clone(), bc.to_condition()));
        }
        BoundarySpec::from_tags(mesh, &by_tag, default)
    }

    pub fn order_policy(&self) -> OrderPolicy {
        if let Some(p) = self.orders.fixed {
            OrderPolicy::Fixed(p)
        } else {
            let a = self.orders.adaptive.as_ref().unwrap();
            OrderPolicy::Adaptive {
                dofs_per_wavelength: a.dofs_per_wavelength,
                p_min: a.p_min,
                p_max: a.p_max,
            }
        }
    }

    pub fn acquisition_setup(&self) -> Result<AcquisitionSetup> {
        let point = |v: &Vec<f64>| -> Result<[f64; 3]> {
            if v.len() < 2 || v.len() > 3 {
                return Err(Error::Config(format!("bad point {v:?}")));
            }
            Ok([v[0], v[1], if v.len() == 3 { v[2] } else { 0.0 }])
        };
        let sources = self
            .acquisition
            .sources
            .iter()
            .map(|s| {
                Ok(PointSource {
                    position: point(&s.position)?,
                    amplitude: C64::new(s.amplitude[0], s.amplitude[1]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let receivers = self
            .acquisition
            .receivers
            .iter()
            .map(point)
            .collect::<Result<Vec<_>>>()?;
        Ok(AcquisitionSetup { sources, receivers })
    }

    pub fn inversion_settings(&self) -> InversionSettings {
        InversionSettings {
            iterations_per_freq: self.inversion.iterations_per_freq,
            armijo_c1: self.inversion.armijo_c1,
            max_halvings: self.inversion.max_halvings,
            initial_update_fraction: self.inversion.initial_update_fraction,
            ..Default::default()
        }
    }

    /// Pretty JSON with all defaults resolved.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
