//! Potential (Darcy) flow providing the advection field of the 9-block problem.
//!
//! Solves `−∇·(κ∇φ) = 0` with a prescribed inward flux on the inlet, `φ = 0`
//! on the outlet and no flux through the walls, then sets `b = −κ∇φ`
//! elementwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DofMap, P1Element, SparseOp, SparsePattern};
use crate::heat::edge_load;
use crate::mesh::{BoundaryTag, Mesh, CENTER_BLOCK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Permeability outside the center block.
    pub kappa_outer: f64,
    /// Permeability of the center block.
    pub kappa_center: f64,
    /// Inward normal flux density on the inlet.
    pub inlet_flux: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            kappa_outer: 1.0,
            kappa_center: 1e-2,
            inlet_flux: 1.0,
        }
    }
}

impl FlowConfig {
    pub fn permeability(&self, label: usize) -> f64 {
        if label == CENTER_BLOCK {
            self.kappa_center
        } else {
            self.kappa_outer
        }
    }
}

/// Elementwise constant velocity.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub b: Vec<[f64; 2]>,
    pub speed: Vec<f64>,
    /// Nodal potential the field was derived from.
    pub potential: Vec<f64>,
}

impl VelocityField {
    pub fn max_speed(&self) -> f64 {
        self.speed.iter().copied().fold(0.0, f64::max)
    }

    /// Weak divergence `Σ_T ∫_T b·∇N_i` at every node.
    pub fn weak_divergence(&self, mesh: &Mesh) -> Vec<f64> {
        let mut r = vec![0.0; mesh.num_nodes()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let e = P1Element::of(mesh, t);
            let b = self.b[t];
            for i in 0..3 {
                r[tri[i]] += e.area * (b[0] * e.grads[i][0] + b[1] * e.grads[i][1]);
            }
        }
        r
    }

    /// Max-abs weak divergence over nodes away from the inlet and outlet.
    pub fn divergence_residual(&self, mesh: &Mesh) -> f64 {
        let inlet = mesh.tagged_nodes(BoundaryTag::Inlet);
        let outlet = mesh.tagged_nodes(BoundaryTag::Outlet);
        self.weak_divergence(mesh)
            .iter()
            .enumerate()
            .filter(|(i, _)| !inlet[*i] && !outlet[*i])
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }
}

pub fn solve_potential_flow(mesh: &Mesh, cfg: &FlowConfig) -> Result<VelocityField> {
    for tag in [BoundaryTag::Inlet, BoundaryTag::Outlet] {
        if !mesh.has_tag(tag) {
            return Err(Error::Assembly(format!(
                "potential flow needs a '{}' boundary to be well posed",
                tag.as_str()
            )));
        }
    }
    if cfg.kappa_outer <= 0.0 || cfg.kappa_center <= 0.0 {
        return Err(Error::Domain("permeabilities must be positive".into()));
    }
    let dofs = DofMap::new(&mesh.tagged_nodes(BoundaryTag::Outlet));
    let pattern = SparsePattern::new(mesh, &dofs);
    let mut a = SparseOp::zeros(pattern);
    for t in 0..mesh.num_triangles() {
        let kappa = cfg.permeability(mesh.subdomain[t]);
        let k = P1Element::of(mesh, t).stiffness().map(|row| row.map(|v| kappa * v));
        a.add_element(t, &k);
    }
    let f: Vec<f64> = edge_load(mesh, &dofs, BoundaryTag::Inlet)
        .into_iter()
        .map(|v| cfg.inlet_flux * v)
        .collect();
    let phi = dofs.expand(&a.solve(&f, &[])?, 0.0);

    let mut b = Vec::with_capacity(mesh.num_triangles());
    let mut speed = Vec::with_capacity(mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let e = P1Element::of(mesh, t);
        let kappa = cfg.permeability(mesh.subdomain[t]);
        let mut g = [0.0; 2];
        for i in 0..3 {
            g[0] += phi[tri[i]] * e.grads[i][0];
            g[1] += phi[tri[i]] * e.grads[i][1];
        }
        let bt = [-kappa * g[0], -kappa * g[1]];
        speed.push(bt[0].hypot(bt[1]));
        b.push(bt);
    }
    Ok(VelocityField {
        b,
        speed,
        potential: phi,
    })
}
