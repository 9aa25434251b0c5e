//! Steady heat conduction with a parametrized conductivity block and base flux.
//!
//! `κ = 1` on the outer region and `κ = μ[0]` on the centered block, a flux
//! `μ[1]` enters through the base, the top is held at zero and the sides are
//! insulated.

use crate::affine::{AffineSystem, AffineTerm, Theta};
use crate::error::{Error, Result};
use crate::fem::{DofMap, P1Element, SparseOp, SparsePattern};
use crate::mesh::{BoundaryTag, Layout, Mesh, HEAT_BLOCK, HEAT_OUTER};

/// Boundary load `∫_Γ v ds` for every edge carrying `tag`, on the free dofs.
pub(crate) fn edge_load(mesh: &Mesh, dofs: &DofMap, tag: BoundaryTag) -> Vec<f64> {
    let mut f = vec![0.0; dofs.num_free()];
    for e in mesh.boundary_edges.iter().filter(|e| e.tag == tag) {
        let [a, b] = e.nodes;
        let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
        let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        for node in [a, b] {
            if let Some(d) = dofs.dof(node) {
                f[d] += 0.5 * len;
            }
        }
    }
    f
}

pub fn assemble_heat_affine(mesh: &Mesh) -> Result<AffineSystem> {
    if !matches!(mesh.layout, Layout::Heat2d { .. }) {
        return Err(Error::Assembly("heat assembly needs a heat2d mesh".into()));
    }
    for tag in [BoundaryTag::Top, BoundaryTag::Base] {
        if !mesh.has_tag(tag) {
            return Err(Error::Assembly(format!("mesh has no '{}' boundary", tag.as_str())));
        }
    }
    let dofs = DofMap::new(&mesh.tagged_nodes(BoundaryTag::Top));
    let pattern = SparsePattern::new(mesh, &dofs);
    let mut outer = SparseOp::zeros(pattern.clone());
    let mut block = SparseOp::zeros(pattern);
    for t in 0..mesh.num_triangles() {
        let k = P1Element::of(mesh, t).stiffness();
        match mesh.subdomain[t] {
            HEAT_BLOCK => block.add_element(t, &k),
            HEAT_OUTER => outer.add_element(t, &k),
            other => return Err(Error::Assembly(format!("unexpected subdomain label {other}"))),
        }
    }
    let flux = edge_load(mesh, &dofs, BoundaryTag::Base);
    AffineSystem::new(
        dofs,
        vec![
            AffineTerm {
                tag: "stiffness_outer".into(),
                theta: Theta::One,
                value: outer,
            },
            AffineTerm {
                tag: "stiffness_block".into(),
                theta: Theta::Param(0),
                value: block,
            },
        ],
        vec![AffineTerm {
            tag: "base_flux".into(),
            theta: Theta::Param(1),
            value: flux,
        }],
        2,
    )
}

/// Heat operator at a fixed `μ` assembled element by element with the
/// piecewise conductivity, without going through the affine terms.
pub fn assemble_heat_at(mesh: &Mesh, system: &AffineSystem, mu: &[f64]) -> Result<(SparseOp, Vec<f64>)> {
    system.check_mu(mu)?;
    let pattern = system.lhs[0].value.pattern().clone();
    let mut a = SparseOp::zeros(pattern);
    for t in 0..mesh.num_triangles() {
        let kappa = if mesh.subdomain[t] == HEAT_BLOCK { mu[0] } else { 1.0 };
        let k = P1Element::of(mesh, t).stiffness().map(|row| row.map(|v| kappa * v));
        a.add_element(t, &k);
    }
    let f = edge_load(mesh, &system.dofs, BoundaryTag::Base)
        .into_iter()
        .map(|v| mu[1] * v)
        .collect();
    Ok((a, f))
}

#[derive(Debug, Clone)]
pub struct HeatProblem {
    pub mesh: Mesh,
    pub system: AffineSystem,
}

impl HeatProblem {
    pub fn new(nx: usize, ny: usize, block_side: f64) -> Result<Self> {
        let mesh = Mesh::unit_square(nx, ny, Layout::Heat2d { block_side })?;
        let system = assemble_heat_affine(&mesh)?;
        Ok(HeatProblem { mesh, system })
    }
}
