//! P1 element kernels and fixed-pattern sparse operators on the free dofs.
//!
//! Dirichlet conditions are imposed by row/column elimination: every operator
//! and load vector lives on the free (non-Dirichlet) nodes only, and the
//! eliminated structure is kept in a [`DofMap`] to expand solutions back to
//! nodal vectors.

use std::sync::{Arc, OnceLock};

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Col, Mat, MatRef};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

const NONE: usize = usize::MAX;

/// Area and constant shape-function gradients of a P1 triangle.
#[derive(Debug, Clone, Copy)]
pub struct P1Element {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl P1Element {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let [a, b, c] = p;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let grads = [
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
            [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
        ];
        P1Element {
            area: 0.5 * det,
            grads,
        }
    }

    pub fn of(mesh: &Mesh, t: usize) -> Self {
        let tri = mesh.triangles[t];
        P1Element::new([mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]])
    }

    /// Local stiffness `∫ ∇N_i · ∇N_j`.
    pub fn stiffness(&self) -> [[f64; 3]; 3] {
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = self.area
                    * (self.grads[i][0] * self.grads[j][0] + self.grads[i][1] * self.grads[j][1]);
            }
        }
        k
    }
}

/// Node to free-dof numbering after Dirichlet elimination.
#[derive(Debug, Clone)]
pub struct DofMap {
    node_to_dof: Vec<usize>,
    dof_to_node: Vec<usize>,
}

impl DofMap {
    pub fn new(dirichlet: &[bool]) -> Self {
        let mut node_to_dof = vec![NONE; dirichlet.len()];
        let mut dof_to_node = Vec::new();
        for (node, &fixed) in dirichlet.iter().enumerate() {
            if !fixed {
                node_to_dof[node] = dof_to_node.len();
                dof_to_node.push(node);
            }
        }
        DofMap {
            node_to_dof,
            dof_to_node,
        }
    }

    pub fn num_free(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.node_to_dof.len()
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        match self.node_to_dof[node] {
            NONE => None,
            d => Some(d),
        }
    }

    pub fn node(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }

    /// Expands free-dof values to a nodal vector with `fixed` on Dirichlet nodes.
    pub fn expand(&self, free: &[f64], fixed: f64) -> Vec<f64> {
        let mut out = vec![fixed; self.num_nodes()];
        for (d, &n) in self.dof_to_node.iter().enumerate() {
            out[n] = free[d];
        }
        out
    }

    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        self.dof_to_node.iter().map(|&n| nodal[n]).collect()
    }
}

/// CSC sparsity of the free-dof P1 operator, with per-element scatter slots.
pub struct SparsePattern {
    symbolic: SymbolicSparseColMat<usize>,
    /// `slots[t][3 * i + j]` is the value index of local entry `(i, j)`, or `NONE`.
    slots: Vec<[usize; 9]>,
    local_dofs: Vec<[usize; 3]>,
    lu_symbolic: OnceLock<std::result::Result<SymbolicLu<usize>, String>>,
}

impl std::fmt::Debug for SparsePattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparsePattern")
            .field("n", &self.n())
            .field("nnz", &self.nnz())
            .finish()
    }
}

impl SparsePattern {
    pub fn new(mesh: &Mesh, dofs: &DofMap) -> Arc<Self> {
        let n = dofs.num_free();
        let local_dofs: Vec<[usize; 3]> = mesh
            .triangles
            .iter()
            .map(|t| t.map(|node| dofs.dof(node).unwrap_or(NONE)))
            .collect();

        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for ld in &local_dofs {
            for &c in ld.iter().filter(|&&c| c != NONE) {
                for &r in ld.iter().filter(|&&r| r != NONE) {
                    cols[c].push(r);
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for rows in cols.iter_mut() {
            rows.sort_unstable();
            rows.dedup();
            row_idx.extend_from_slice(rows);
            col_ptr.push(row_idx.len());
        }

        let slots = local_dofs
            .iter()
            .map(|ld| {
                let mut s = [NONE; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        let (r, c) = (ld[i], ld[j]);
                        if r != NONE && c != NONE {
                            let col = &row_idx[col_ptr[c]..col_ptr[c + 1]];
                            s[3 * i + j] = col_ptr[c] + col.binary_search(&r).unwrap();
                        }
                    }
                }
                s
            })
            .collect();

        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        Arc::new(SparsePattern {
            symbolic,
            slots,
            local_dofs,
            lu_symbolic: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.symbolic.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.symbolic.row_idx().len()
    }

    /// Free-dof indices of the element's vertices (`None` for Dirichlet nodes).
    pub fn element_dofs(&self, t: usize) -> [Option<usize>; 3] {
        self.local_dofs[t].map(|d| if d == NONE { None } else { Some(d) })
    }

    fn lu_symbolic(&self) -> Result<SymbolicLu<usize>> {
        self.lu_symbolic
            .get_or_init(|| {
                SymbolicLu::try_new(self.symbolic.rb()).map_err(|e| format!("{e:?}"))
            })
            .clone()
            .map_err(Error::Numerical)
    }
}

/// Sparse square operator sharing a [`SparsePattern`].
#[derive(Debug, Clone)]
pub struct SparseOp {
    pattern: Arc<SparsePattern>,
    values: Vec<f64>,
}

impl SparseOp {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let nnz = pattern.nnz();
        SparseOp {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Scatters a local 3x3 matrix of element `t`, dropping eliminated rows/columns.
    pub fn add_element(&mut self, t: usize, local: &[[f64; 3]; 3]) {
        let slots = &self.pattern.slots[t];
        for i in 0..3 {
            for j in 0..3 {
                let s = slots[3 * i + j];
                if s != NONE {
                    self.values[s] += local[i][j];
                }
            }
        }
    }

    /// `self += alpha * other` on a shared pattern.
    pub fn axpy(&mut self, alpha: f64, other: &SparseOp) {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    /// Linear combination `Σ c_q A_q` of operators on a shared pattern.
    pub fn combine(terms: &[(f64, &SparseOp)]) -> Result<SparseOp> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Dimension("empty operator combination".into()))?;
        let mut out = SparseOp::zeros(first.1.pattern.clone());
        for (c, op) in terms {
            if !Arc::ptr_eq(&out.pattern, &op.pattern) {
                return Err(Error::Dimension("operators do not share a sparsity pattern".into()));
            }
            out.axpy(*c, op);
        }
        Ok(out)
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        SparseColMat::new(self.pattern.symbolic.clone(), self.values.clone())
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n(), self.n());
        self.for_each(|r, c, v| m[(r, c)] += v);
        m
    }

    fn for_each(&self, mut f: impl FnMut(usize, usize, f64)) {
        let sym = &self.pattern.symbolic;
        let col_ptr = sym.col_ptr();
        let row_idx = sym.row_idx();
        for c in 0..self.n() {
            for k in col_ptr[c]..col_ptr[c + 1] {
                f(row_idx[k], c, self.values[k]);
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.for_each(|r, c, v| y[r] += v * x[c]);
        y
    }

    /// `A · X` for a dense block `X` (one column per basis vector).
    pub fn mul_dense(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        let n = self.n();
        assert_eq!(x.nrows(), n);
        let sym = &self.pattern.symbolic;
        let col_ptr = sym.col_ptr();
        let row_idx = sym.row_idx();
        let mut y = Mat::<f64>::zeros(n, x.ncols());
        for j in 0..x.ncols() {
            let xj = x.col(j);
            let mut yj = y.col_mut(j);
            for c in 0..n {
                let xc = xj[c];
                if xc == 0.0 {
                    continue;
                }
                for k in col_ptr[c]..col_ptr[c + 1] {
                    yj[row_idx[k]] += self.values[k] * xc;
                }
            }
        }
        y
    }

    /// `Xᵀ A X`, the Galerkin projection onto the columns of `X`.
    pub fn project(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        let ax = self.mul_dense(x);
        x.transpose() * &ax
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let d = self.to_dense();
        let scale = d.norm_max().max(f64::MIN_POSITIVE);
        (0..d.nrows()).all(|i| (0..i).all(|j| (d[(i, j)] - d[(j, i)]).abs() <= tol * scale))
    }

    /// Sparse LU factorization reusing the pattern's symbolic analysis.
    pub fn factorize(&self) -> Result<SparseLu> {
        let symbolic = self.pattern.lu_symbolic()?;
        let mat = self.to_faer();
        let lu = Lu::try_new_with_symbolic(symbolic, mat.rb())
            .map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu { lu })
    }

    /// Direct solve with a residual check `‖Ax − b‖ ≤ 1e−10 ‖b‖`.
    pub fn solve(&self, rhs: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
        let lu = self.factorize().map_err(|e| Error::solver(mu, e.to_string()))?;
        let x = lu.solve(rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::solver(mu, "singular system (non-finite solution)"));
        }
        let ax = self.matvec(&x);
        let res = ax
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm_b = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        if res > 1e-10 * norm_b.max(f64::MIN_POSITIVE) && res > 1e-300 {
            return Err(Error::solver(
                mu,
                format!("singular or ill-conditioned system, residual {res:e} vs |b| {norm_b:e}"),
            ));
        }
        Ok(x)
    }
}

pub struct SparseLu {
    lu: Lu<usize, f64>,
}

impl SparseLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Col::<f64>::from_fn(rhs.len(), |i| rhs[i]);
        let x = self.lu.solve(&b);
        x.iter().copied().collect()
    }

    pub fn solve_mat(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        self.lu.solve(rhs)
    }
}
