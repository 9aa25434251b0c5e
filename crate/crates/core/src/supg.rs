//! SUPG-stabilized advection–diffusion on the 9-block layout.
//!
//! Solves `b·∇u − K(μ)Δu + σ = 0` with `u = 0` on the inlet, where `K = μ[k]`
//! on block `k+1`, `σ = 1` on the center block and `b` is the potential-flow
//! field. Test functions are augmented with `τ b·∇v`, `τ = βh/(2‖b‖)`; the
//! second-order part of the streamline residual vanishes for P1 elements.

use crate::error::{Error, Result};
use crate::fem::{DofMap, P1Element, SparseOp, SparsePattern};
use crate::flow::{solve_potential_flow, FlowConfig, VelocityField};
use crate::mesh::{BoundaryTag, Layout, Mesh, CENTER_BLOCK};

use std::sync::Arc;

pub const NUM_BLOCKS: usize = 9;

/// Optimal upwind factor `coth(Pe) − 1/Pe`.
pub fn upwind_beta(pe: f64) -> f64 {
    if pe < 1e-3 {
        pe / 3.0 - pe.powi(3) / 45.0
    } else if pe > 20.0 {
        1.0 - 1.0 / pe
    } else {
        1.0 / pe.tanh() - 1.0 / pe
    }
}

/// Element stabilization parameter `τ = βh/(2‖b‖)` with `Pe = ‖b‖h/(2K)`.
pub fn supg_tau(speed: f64, h: f64, diffusivity: f64) -> f64 {
    if speed == 0.0 {
        return 0.0;
    }
    let pe = speed * h / (2.0 * diffusivity);
    upwind_beta(pe) * h / (2.0 * speed)
}

#[derive(Debug, Clone)]
pub struct AdvDiffProblem {
    pub mesh: Mesh,
    pub velocity: VelocityField,
    /// Source σ per triangle.
    pub source: Vec<f64>,
    pub dofs: DofMap,
    pattern: Arc<SparsePattern>,
    elements: Vec<P1Element>,
}

impl AdvDiffProblem {
    pub fn new(nx: usize, ny: usize, flow: &FlowConfig) -> Result<Self> {
        let mesh = Mesh::unit_square(nx, ny, Layout::AdvDiff9d)?;
        let velocity = solve_potential_flow(&mesh, flow)?;
        let source = mesh
            .subdomain
            .iter()
            .map(|&l| if l == CENTER_BLOCK { 1.0 } else { 0.0 })
            .collect();
        Self::with_parts(mesh, velocity, source)
    }

    pub fn with_parts(mesh: Mesh, velocity: VelocityField, source: Vec<f64>) -> Result<Self> {
        if mesh.layout != Layout::AdvDiff9d {
            return Err(Error::Assembly("advection-diffusion needs an advdiff9d mesh".into()));
        }
        if !mesh.has_tag(BoundaryTag::Inlet) {
            return Err(Error::Assembly("mesh has no 'inlet' boundary".into()));
        }
        if velocity.b.len() != mesh.num_triangles() || source.len() != mesh.num_triangles() {
            return Err(Error::Dimension("velocity and source must be given per triangle".into()));
        }
        let dofs = DofMap::new(&mesh.tagged_nodes(BoundaryTag::Inlet));
        let pattern = SparsePattern::new(&mesh, &dofs);
        let elements = (0..mesh.num_triangles()).map(|t| P1Element::of(&mesh, t)).collect();
        Ok(AdvDiffProblem {
            mesh,
            velocity,
            source,
            dofs,
            pattern,
            elements,
        })
    }

    pub fn n(&self) -> usize {
        self.dofs.num_free()
    }

    pub fn check_mu(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != NUM_BLOCKS {
            return Err(Error::Dimension(format!(
                "advection-diffusion takes {NUM_BLOCKS} diffusivities, got {}",
                mu.len()
            )));
        }
        if let Some(k) = mu.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::Domain(format!("diffusivity mu[{k}] = {} must be positive", mu[k])));
        }
        Ok(())
    }

    /// Stabilized operator and load at `μ` on the free dofs.
    pub fn assemble(&self, mu: &[f64]) -> Result<(SparseOp, Vec<f64>)> {
        self.check_mu(mu)?;
        let mut a = SparseOp::zeros(self.pattern.clone());
        let mut f = vec![0.0; self.n()];
        for (t, e) in self.elements.iter().enumerate() {
            let kdiff = mu[self.mesh.subdomain[t] - 1];
            let b = self.velocity.b[t];
            let tau = supg_tau(self.velocity.speed[t], self.mesh.h_elem[t], kdiff);
            let bg = e.grads.map(|g| b[0] * g[0] + b[1] * g[1]);
            let stiff = e.stiffness();
            let mut local = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    local[i][j] = kdiff * stiff[i][j]
                        + e.area / 3.0 * bg[j]
                        + tau * e.area * bg[i] * bg[j];
                }
            }
            a.add_element(t, &local);
            let sigma = self.source[t];
            if sigma != 0.0 {
                for (i, d) in self.pattern.element_dofs(t).into_iter().enumerate() {
                    if let Some(d) = d {
                        f[d] -= sigma * (e.area / 3.0 + tau * e.area * bg[i]);
                    }
                }
            }
        }
        Ok((a, f))
    }

    /// Full-order solution on the free dofs.
    pub fn solve(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let (a, f) = self.assemble(mu)?;
        if f.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; self.n()]);
        }
        a.solve(&f, mu)
    }
}
