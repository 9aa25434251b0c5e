//! Experiment configuration: problem, meshes, parameter sets and method settings.
//!
//! Configs are TOML; a `.json` file is read as JSON with the same schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::greedy::GreedyConfig;
use crate::mesh::{Layout, Mesh};
use crate::mf::{MfConfig, Sketch};
use crate::params::{grid_1d, lhs, split_train_val, tensor_grid, ParameterGrid, Role, Scale, Spacing};
use crate::supg::NUM_BLOCKS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Heat2d,
    Advdiff9d,
}

impl ProblemKind {
    pub fn param_dim(self) -> usize {
        match self {
            ProblemKind::Heat2d => 2,
            ProblemKind::Advdiff9d => NUM_BLOCKS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Iterative multi-fidelity selection.
    #[default]
    Mf,
    /// Residual-driven greedy reduced basis (affine problems only).
    Greedy,
    /// POD of every training snapshot followed by one DEIM pass.
    PodDeim,
}

/// Cells per side of the structured meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub fine: usize,
    pub coarse: usize,
    #[serde(default = "default_block_side")]
    pub block_side: f64,
}

fn default_block_side() -> f64 {
    0.5
}

impl MeshSpec {
    pub fn default_for(problem: ProblemKind) -> Self {
        match problem {
            ProblemKind::Heat2d => MeshSpec {
                fine: 28,
                coarse: 8,
                block_side: 0.5,
            },
            ProblemKind::Advdiff9d => MeshSpec {
                fine: 57,
                coarse: 24,
                block_side: 0.5,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub spacing: Spacing,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GridSpec {
    Tensor {
        axes: Vec<AxisSpec>,
    },
    Lhs {
        n: usize,
        bounds: Vec<[f64; 2]>,
        scale: Vec<Scale>,
        #[serde(default)]
        seed: u64,
    },
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        match self {
            GridSpec::Tensor { axes } => axes.len(),
            GridSpec::Lhs { bounds, .. } => bounds.len(),
        }
    }

    /// Per-dimension bounds and sampling scale of the parameter domain.
    pub fn domain(&self) -> (Vec<(f64, f64)>, Vec<Scale>) {
        match self {
            GridSpec::Tensor { axes } => (
                axes.iter().map(|a| (a.lo, a.hi)).collect(),
                axes.iter()
                    .map(|a| if a.spacing == Spacing::Log { Scale::Log } else { Scale::Linear })
                    .collect(),
            ),
            GridSpec::Lhs { bounds, scale, .. } => (bounds.iter().map(|b| (b[0], b[1])).collect(), scale.clone()),
        }
    }

    pub fn build(&self) -> Result<ParameterGrid> {
        match self {
            GridSpec::Tensor { axes } => {
                let a = axes
                    .iter()
                    .map(|a| grid_1d(a.spacing, a.lo, a.hi, a.n))
                    .collect::<Result<Vec<_>>>()?;
                tensor_grid(&a)
            }
            GridSpec::Lhs { n, scale, seed, .. } => lhs(*n, &self.domain().0, scale, *seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ValidationSpec {
    None,
    /// Independent LHS over the training domain.
    Lhs {
        n: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Random subset of the generated grid, removed from training.
    Split {
        n: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Compute `ε_val` each iteration.
    pub validation: bool,
    /// Solve every training parameter to report `ε_ROM` / `ε_POD`.
    pub global: bool,
    /// Record wall-clock seconds (zero otherwise, making outputs reproducible).
    pub timings: bool,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec {
            validation: true,
            global: false,
            timings: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Number of POD modes and DEIM points; the numerical rank when absent.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub mesh: Option<MeshSpec>,
    #[serde(default)]
    pub flow: FlowConfig,
    pub train: GridSpec,
    #[serde(default = "default_validation")]
    pub validation: ValidationSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub mf: MfConfig,
    #[serde(default)]
    pub greedy: GreedyConfig,
    #[serde(default)]
    pub reference: ReferenceSpec,
}

fn default_validation() -> ValidationSpec {
    ValidationSpec::None
}

/// Training and validation parameters.
#[derive(Debug, Clone)]
pub struct ParameterSets {
    /// Every generated point with its role.
    pub grid: ParameterGrid,
    pub train: Vec<Vec<f64>>,
    pub val: Vec<Vec<f64>>,
}

fn field<T>(name: &str, msg: impl std::fmt::Display) -> Result<T> {
    Err(Error::Config(format!("{name}: {msg}")))
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn mesh_spec(&self) -> MeshSpec {
        self.mesh.clone().unwrap_or_else(|| MeshSpec::default_for(self.problem))
    }

    pub fn layout(&self) -> Layout {
        match self.problem {
            ProblemKind::Heat2d => Layout::Heat2d {
                block_side: self.mesh_spec().block_side,
            },
            ProblemKind::Advdiff9d => Layout::AdvDiff9d,
        }
    }

    /// Field-level checks; solves nothing.
    pub fn validate(&self) -> Result<()> {
        let dim = self.problem.param_dim();
        if self.train.dim() != dim {
            return field("train", format!("{} dimensions, {:?} needs {dim}", self.train.dim(), self.problem));
        }
        match &self.train {
            GridSpec::Tensor { axes } => {
                for (k, a) in axes.iter().enumerate() {
                    if a.n < 2 {
                        return field(&format!("train.axes[{k}].n"), "must be at least 2");
                    }
                    if !(a.lo < a.hi) {
                        return field(&format!("train.axes[{k}]"), "lo must be below hi");
                    }
                }
            }
            GridSpec::Lhs { n, bounds, scale, .. } => {
                if *n == 0 {
                    return field("train.n", "must be positive");
                }
                if scale.len() != bounds.len() {
                    return field("train.scale", "needs one entry per bound");
                }
                for (k, b) in bounds.iter().enumerate() {
                    if !(b[0] < b[1]) {
                        return field(&format!("train.bounds[{k}]"), "lower bound must be below the upper");
                    }
                }
            }
        }
        // coefficients must stay positive on the whole domain
        let (bounds, _) = self.train.domain();
        let positive: Vec<usize> = match self.problem {
            ProblemKind::Heat2d => vec![0],
            ProblemKind::Advdiff9d => (0..dim).collect(),
        };
        for k in positive {
            if !(bounds[k].0 > 0.0) {
                return field(&format!("train: mu_{}", k + 1), "lower bound must be positive");
            }
        }
        let n_total = self.train.build().map(|g| g.len()).unwrap_or(0);
        match self.validation {
            ValidationSpec::None => {}
            ValidationSpec::Lhs { n, .. } if n == 0 => return field("validation.n", "must be positive"),
            ValidationSpec::Split { n, .. } if n == 0 || n >= n_total => {
                return field("validation.n", format!("must lie in [1, {n_total})"))
            }
            _ => {}
        }
        let m = self.mesh_spec();
        if m.fine == 0 || m.coarse == 0 {
            return field("mesh", "cell counts must be positive");
        }
        for (name, n) in [("mesh.fine", m.fine), ("mesh.coarse", m.coarse)] {
            if let Err(Error::Config(msg)) = Mesh::unit_square(n, n, self.layout()) {
                return field(name, msg);
            }
        }
        if self.problem == ProblemKind::Advdiff9d {
            let f = &self.flow;
            if !(f.kappa_outer > 0.0 && f.kappa_center > 0.0) {
                return field("flow", "permeabilities must be positive");
            }
        }
        if let Err(Error::Config(msg)) = self.mf.validate() {
            return field("mf", msg);
        }
        if !(self.greedy.tol > 0.0) || self.greedy.max_iter == 0 {
            return field("greedy", "tol and max_iter must be positive");
        }
        if self.method == Method::Greedy {
            if self.problem != ProblemKind::Heat2d {
                return field("method", "greedy needs an affine problem (heat2d)");
            }
            if self.greedy.mu_ref.len() != dim {
                return field("greedy.mu_ref", format!("needs {dim} components"));
            }
        }
        if self.reference.rank == Some(0) {
            return field("reference.rank", "must be positive");
        }
        if self.mf.require_val_convergence
            && (self.validation == ValidationSpec::None || !self.diagnostics.validation)
        {
            return field(
                "mf.require_val_convergence",
                "needs a validation set with diagnostics.validation enabled",
            );
        }
        if let Sketch::Random { size } = self.mf.sketch {
            if n_total > 0 && size > n_total {
                return field("mf.sketch.size", format!("exceeds the {n_total} training points"));
            }
        }
        Ok(())
    }

    pub fn parameter_sets(&self) -> Result<ParameterSets> {
        let grid = self.train.build()?;
        let grid = match self.validation {
            ValidationSpec::None => grid,
            ValidationSpec::Split { n, seed } => split_train_val(&grid, n, seed)?,
            ValidationSpec::Lhs { n, seed } => {
                let (bounds, scale) = self.train.domain();
                grid.concat(&lhs(n, &bounds, &scale, seed)?.with_role(Role::Val))?
            }
        };
        Ok(ParameterSets {
            train: grid.train(),
            val: grid.val(),
            grid,
        })
    }

    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| {
            PathBuf::from("out").join(self.name.clone().unwrap_or_else(|| format!("{:?}", self.problem).to_lowercase()))
        })
    }

    /// Human-readable plan for `--dry-run`.
    pub fn plan(&self) -> Result<String> {
        let sets = self.parameter_sets()?;
        let m = self.mesh_spec();
        let nodes = |n: usize| (n + 1) * (n + 1);
        let mut s = String::new();
        s.push_str(&format!("problem      {:?}\n", self.problem));
        s.push_str(&format!("method       {:?}\n", self.method));
        s.push_str(&format!("fine mesh    {0}x{0} cells, {1} nodes\n", m.fine, nodes(m.fine)));
        if self.method == Method::Mf && self.mf.sketch == Sketch::Coarse {
            s.push_str(&format!("coarse mesh  {0}x{0} cells, {1} nodes\n", m.coarse, nodes(m.coarse)));
        }
        s.push_str(&format!("train        {} points\n", sets.train.len()));
        s.push_str(&format!("validation   {} points\n", sets.val.len()));
        match self.method {
            Method::Mf => s.push_str(&format!(
                "mf           tol {:e}, p {}, sketch {:?}, seed {}, max_iter {}, require_val {}\n",
                self.mf.tol,
                self.mf.points_per_iter,
                self.mf.sketch,
                self.mf.seed,
                self.mf.max_iter,
                self.mf.require_val_convergence
            )),
            Method::Greedy => s.push_str(&format!(
                "greedy       tol {:e}, mu_ref {:?}, max_iter {}\n",
                self.greedy.tol, self.greedy.mu_ref, self.greedy.max_iter
            )),
            Method::PodDeim => s.push_str(&format!("pod-deim     rank {:?}\n", self.reference.rank)),
        }
        s.push_str(&format!("out_dir      {}\n", self.resolved_out_dir().display()));
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAT: &str = r#"
problem = "heat2d"
[train]
kind = "tensor"
axes = [
  { spacing = "log", lo = 0.1, hi = 10.0, n = 5 },
  { spacing = "uniform", lo = -1.0, hi = 1.0, n = 4 },
]
[validation]
kind = "lhs"
n = 3
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = RunConfig::from_toml(HEAT).unwrap();
        assert_eq!(cfg.method, Method::Mf);
        assert_eq!(cfg.mf, MfConfig::default());
        let sets = cfg.parameter_sets().unwrap();
        assert_eq!((sets.train.len(), sets.val.len()), (20, 3));
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&json).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn field_level_errors() {
        let bad = HEAT.replace("lo = 0.1", "lo = -0.1").replace("\"log\"", "\"uniform\"");
        let e = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("mu_1"), "{e}");
        let e = RunConfig::from_toml(&format!("{HEAT}\n[mf]\ntol = 0.0\n")).unwrap_err().to_string();
        assert!(e.contains("tol"), "{e}");
        let e = RunConfig::from_toml(&format!("{HEAT}\n[mesh]\nfine = 30\ncoarse = 8\n"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("mesh.fine"), "{e}");
        assert!(RunConfig::from_toml(&format!("{HEAT}\nbogus = 1\n")).is_err());
        let e = RunConfig::from_toml(&HEAT.replace("heat2d", "advdiff9d")).unwrap_err().to_string();
        assert!(e.contains("dimensions"), "{e}");
    }

    #[test]
    fn require_val_needs_validation() {
        let cfg = HEAT.replace("[validation]\nkind = \"lhs\"\nn = 3\n", "[mf]\nrequire_val_convergence = true\n");
        assert!(RunConfig::from_toml(&cfg).is_err());
    }
}
