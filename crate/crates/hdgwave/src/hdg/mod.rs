//! HDG discretization of the time-harmonic acoustic Euler system.
//!
//! The globally coupled unknowns are the pressure traces on mesh faces. Per
//! cell, [`blocks`] assembles the dense local matrices and condenses them to
//! a trace-sized block; this module scatters those blocks into the sparse
//! global system, factorizes it, and reconstructs volume solutions from
//! solved traces by independent per-cell solves.

pub mod blocks;

use crate::mesh::{ConnectivityMap, SimplicialMesh};
use crate::model::ModelState;
use crate::orders::OrderAssignment;
use crate::sparse::{self, CooMatrix, CscMatrix, Factorization};
use crate::{C64, Error, Result};
use blocks::{assemble_cell_blocks, face_side_quadrature, CellBlocks};
use nalgebra::DVector;
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};

/// Boundary condition of one boundary face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    /// `alpha p + sigma rho beta v_n = g` (velocity form of the Robin
    /// condition); `beta` must be nonzero.
    Robin { alpha: C64, beta: C64 },
    /// First-order absorbing condition `v_n = p / (c rho)`.
    Absorbing,
    /// Trace forced to the boundary data (zero by default).
    Dirichlet,
    /// Zero normal velocity (`alpha = 0`).
    Neumann,
}

/// Inhomogeneous boundary data: face index and physical point to the data
/// value `g`. For Robin/absorbing faces `g` is the right-hand side of the
/// velocity-form condition; for Dirichlet faces it is the trace value.
pub type BoundaryDataFn<'f> = dyn Fn(usize, [f64; 3]) -> C64 + Sync + 'f;

/// Per-face boundary conditions.
pub struct BoundarySpec {
    per_face: Vec<Option<BoundaryCondition>>,
}

impl BoundarySpec {
    /// The same condition on every boundary face.
    pub fn uniform(mesh: &SimplicialMesh, bc: BoundaryCondition) -> BoundarySpec {
        let per_face = mesh
            .faces
            .iter()
            .map(|f| if f.is_boundary() { Some(bc) } else { None })
            .collect();
        BoundarySpec { per_face }
    }

    /// Conditions by boundary tag name, with a default for untagged faces.
    pub fn from_tags(
        mesh: &SimplicialMesh,
        by_tag: &[(String, BoundaryCondition)],
        default: BoundaryCondition,
    ) -> Result<BoundarySpec> {
        for (name, _) in by_tag {
            if mesh.tag_index(name).is_none() {
                return Err(Error::Config(format!(
                    "boundary tag '{name}' does not exist in the mesh (tags: {:?})",
                    mesh.tag_names
                )));
            }
        }
        let per_face = mesh
            .faces
            .iter()
            .map(|f| {
                if !f.is_boundary() {
                    return None;
                }
                let bc = f
                    .tag
                    .and_then(|t| {
                        by_tag
                            .iter()
                            .find(|(name, _)| mesh.tag_index(name) == Some(t))
                            .map(|(_, bc)| *bc)
                    })
                    .unwrap_or(default);
                Some(bc)
            })
            .collect();
        Ok(BoundarySpec { per_face })
    }

    pub fn condition(&self, face: usize) -> Result<&BoundaryCondition> {
        self.per_face[face]
            .as_ref()
            .ok_or_else(|| Error::Numerical(format!("face {face} is not a boundary face")))
    }

    /// Resolve absorbing faces to concrete Robin coefficients computed from a
    /// reference model: `alpha = -sigma / c0`, `beta = 1` realizes the
    /// `-1/(c0 rho) - tau` block. Freezing the coefficients keeps the
    /// boundary operator fixed while the volume model is updated, which is
    /// the dependence the misfit gradient accounts for.
    pub fn freeze_absorbing(
        &self,
        mesh: &SimplicialMesh,
        model: &ModelState,
        sigma: C64,
    ) -> BoundarySpec {
        let per_face = self
            .per_face
            .iter()
            .enumerate()
            .map(|(f, bc)| match bc {
                Some(BoundaryCondition::Absorbing) => {
                    let owner = mesh.faces[f].owner.0;
                    let c0 = model.cell_mean_c(owner);
                    Some(BoundaryCondition::Robin {
                        alpha: -sigma / C64::new(c0, 0.0),
                        beta: C64::new(1.0, 0.0),
                    })
                }
                other => *other,
            })
            .collect();
        BoundarySpec { per_face }
    }

    /// Per-face conditions, for logging resolved coefficients.
    pub fn conditions(&self) -> &[Option<BoundaryCondition>] {
        &self.per_face
    }
}

/// Per-face-side stabilization, `tau = 1/rho` of the adjacent cell.
pub struct StabilizationTau {
    /// `per_cell_face[e][local_face]`.
    pub per_cell_face: Vec<Vec<f64>>,
}

impl StabilizationTau {
    pub fn from_model(mesh: &SimplicialMesh, model: &ModelState) -> Result<StabilizationTau> {
        let mut per_cell_face = Vec::with_capacity(mesh.n_cells());
        for e in 0..mesh.n_cells() {
            let rho = model.cell_mean_rho(e);
            if rho <= 0.0 {
                return Err(Error::Numerical(format!(
                    "cell {e}: nonpositive density {rho}"
                )));
            }
            per_cell_face.push(vec![1.0 / rho; mesh.dim + 1]);
        }
        Ok(StabilizationTau { per_cell_face })
    }
}

/// Volume right-hand-side contribution of one source to one cell.
pub struct CellRhs {
    pub cell: usize,
    /// Length `(dim + 1) * n_dof` of the cell, pressure block first.
    pub values: DVector<C64>,
}

/// Solved fields of one source: the global trace and per-cell volume
/// coefficients `[p; v_x; v_y; (v_z)]`.
pub struct FieldSolution {
    pub sigma: C64,
    pub source_id: usize,
    pub lambda: Vec<C64>,
    pub cell_coeffs: Vec<DVector<C64>>,
    pub operator_id: u64,
}

impl FieldSolution {
    /// Pressure coefficients of cell `e`.
    pub fn pressure<'s>(&'s self, op: &HdgOperator, e: usize) -> &'s [C64] {
        &self.cell_coeffs[e].as_slice()[0..op.cells[e].n_dof]
    }

    /// Coefficients of velocity component `d` on cell `e`.
    pub fn velocity<'s>(&'s self, op: &HdgOperator, e: usize, d: usize) -> &'s [C64] {
        let nd = op.cells[e].n_dof;
        &self.cell_coeffs[e].as_slice()[(d + 1) * nd..(d + 2) * nd]
    }
}

static OPERATOR_ID: AtomicU64 = AtomicU64::new(0);

/// Assembled HDG operator for one (mesh, model, orders, frequency): per-cell
/// blocks, the global trace matrix, and its reusable factorization.
pub struct HdgOperator<'a> {
    pub mesh: &'a SimplicialMesh,
    pub model: &'a ModelState,
    pub orders: &'a OrderAssignment,
    pub sigma: C64,
    pub tau: StabilizationTau,
    pub layout: ConnectivityMap,
    pub cells: Vec<CellBlocks>,
    pub matrix: CscMatrix,
    pub factorization: Factorization,
    /// Boundary-data contribution to the trace rhs (shared by all sources).
    pub trace_boundary_rhs: Vec<C64>,
    pub id: u64,
}

impl<'a> HdgOperator<'a> {
    pub fn build(
        mesh: &'a SimplicialMesh,
        model: &'a ModelState,
        orders: &'a OrderAssignment,
        sigma: C64,
        bspec: &BoundarySpec,
        bdata: Option<&BoundaryDataFn<'_>>,
    ) -> Result<HdgOperator<'a>> {
        model.validate()?;
        let tau = StabilizationTau::from_model(mesh, model)?;
        let cells: Vec<CellBlocks> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|e| assemble_cell_blocks(mesh, model, orders, &tau, sigma, bspec, bdata, e))
            .collect::<Result<_>>()?;
        let layout = orders.trace_layout(mesh);
        let matrix = assemble_global(&cells, &layout);
        let factorization = sparse::factorize(&matrix)?;
        let mut trace_boundary_rhs = vec![C64::new(0.0, 0.0); layout.total_dofs()];
        for blocks in &cells {
            layout.scatter_add(
                blocks.cell,
                blocks.boundary_rhs.as_slice(),
                &mut trace_boundary_rhs,
            );
        }
        Ok(HdgOperator {
            mesh,
            model,
            orders,
            sigma,
            tau,
            layout,
            cells,
            matrix,
            factorization,
            trace_boundary_rhs,
            id: OPERATOR_ID.fetch_add(1, Ordering::SeqCst),
        })
    }

    /// Trace-system right-hand side for one source:
    /// `B = -sum_e R_e^T B_e A_e^{-1} S_e` plus the boundary-data term.
    pub fn trace_rhs(&self, source: &[CellRhs]) -> Vec<C64> {
        let mut rhs = self.trace_boundary_rhs.clone();
        for s in source {
            let blocks = &self.cells[s.cell];
            let ainv_s = blocks.a_lu.solve(&s.values);
            let contrib = -(&blocks.b * &ainv_s);
            self.layout
                .scatter_add(s.cell, contrib.as_slice(), &mut rhs);
        }
        rhs
    }

    pub fn solve_trace(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        self.factorization.solve(rhs)
    }

    /// Independent per-cell back-substitution `U_e = A_e^{-1}(S_e - C_e R_e
    /// Lambda)`.
    pub fn reconstruct(
        &self,
        lambda: Vec<C64>,
        source: &[CellRhs],
        source_id: usize,
    ) -> FieldSolution {
        let cell_coeffs: Vec<DVector<C64>> = self
            .cells
            .par_iter()
            .map(|blocks| {
                let local = self.layout.select(blocks.cell, &lambda);
                let lvec = DVector::from_vec(local);
                let mut u = -(&blocks.a_inv_c) * lvec;
                if let Some(s) = source.iter().find(|s| s.cell == blocks.cell) {
                    u += blocks.a_lu.solve(&s.values);
                }
                u
            })
            .collect();
        FieldSolution {
            sigma: self.sigma,
            source_id,
            lambda,
            cell_coeffs,
            operator_id: self.id,
        }
    }

    /// Guard against mixing solutions across rebuilt operators.
    pub fn owns(&self, sol: &FieldSolution) -> Result<()> {
        if sol.operator_id != self.id {
            return Err(Error::Numerical(
                "stale field solution: operator was rebuilt since this solve".into(),
            ));
        }
        Ok(())
    }

    /// Explicitly assembled adjoint-form global matrix
    /// `sum_e R_e^T (L_e^H - C_e^H A_e^{-H} B_e^H) R_e`; equals the
    /// conjugate transpose of [`HdgOperator::matrix`] up to roundoff.
    pub fn adjoint_global_matrix(&self) -> CscMatrix {
        let mut coo = CooMatrix::new(self.layout.total_dofs());
        for blocks in &self.cells {
            let bh = blocks.b.adjoint();
            let ainv_bh = blocks.a_lu.solve_adjoint_mat(&bh);
            let block = blocks.l.adjoint() - blocks.c.adjoint() * ainv_bh;
            scatter_block(&mut coo, &self.layout, blocks.cell, &block);
        }
        coo.to_csc()
    }

    /// Interior-face residuals of the discrete flux-continuity condition,
    /// paired with the face flux norm for relative comparison.
    pub fn flux_continuity_residuals(&self, sol: &FieldSolution) -> Result<Vec<(f64, f64)>> {
        self.owns(sol)?;
        let mut out = Vec::new();
        for (f, face) in self.mesh.faces.iter().enumerate() {
            let Some((nb_cell, _)) = face.neighbor else {
                continue;
            };
            let owner = face.owner.0;
            let nf = self.orders.face_dofs(self.mesh, f);
            let range = self.layout.face_ranges[f].clone();
            let lam = &sol.lambda[range];

            let mut residual = vec![C64::new(0.0, 0.0); nf];
            let mut flux_norm_sq = 0.0f64;
            for &e in &[owner, nb_cell] {
                let basis = crate::basis::basis_for(
                    crate::quadrature::Domain::cell(self.mesh.dim),
                    self.orders.cell_orders[e],
                )?;
                let fq = face_side_quadrature(self.mesh, self.orders, e, f, &basis)?;
                let lf = self
                    .mesh
                    .faces_of_cell(e)
                    .iter()
                    .position(|&g| g == f)
                    .unwrap();
                let t = self.tau.per_cell_face[e][lf];
                let nd = self.cells[e].n_dof;
                let coeffs = &sol.cell_coeffs[e];
                for q in 0..fq.wq.len() {
                    // p_h, v_h . n, lambda at the quadrature point
                    let mut p = C64::new(0.0, 0.0);
                    let mut vn = C64::new(0.0, 0.0);
                    for j in 0..nd {
                        let phi = fq.phi[(q, j)];
                        p += coeffs[j] * phi;
                        for d in 0..self.mesh.dim {
                            vn += coeffs[(d + 1) * nd + j] * phi * fq.normal[d];
                        }
                    }
                    let mut lam_q = C64::new(0.0, 0.0);
                    for k in 0..nf {
                        lam_q += lam[k] * fq.xi[(q, k)];
                    }
                    let flux = vn + C64::new(t, 0.0) * (p - lam_q);
                    flux_norm_sq += fq.wq[q] * flux.norm_sqr();
                    for k in 0..nf {
                        residual[k] += flux * C64::new(fq.wq[q] * fq.xi[(q, k)], 0.0);
                    }
                }
            }
            let rnorm = residual.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            out.push((rnorm, flux_norm_sq.sqrt()));
        }
        Ok(out)
    }
}

/// `sum_e R_e^T K_e R_e` over the condensed blocks, in cell order.
pub fn assemble_global(cells: &[CellBlocks], layout: &ConnectivityMap) -> CscMatrix {
    let mut coo = CooMatrix::new(layout.total_dofs());
    for blocks in cells {
        scatter_block(&mut coo, layout, blocks.cell, &blocks.condensed);
    }
    coo.to_csc()
}

fn scatter_block(
    coo: &mut CooMatrix,
    layout: &ConnectivityMap,
    cell: usize,
    block: &nalgebra::DMatrix<C64>,
) {
    let ranges = layout.cell_ranges(cell);
    let globals: Vec<usize> = ranges.iter().flat_map(|r| r.clone()).collect();
    for (i, &gi) in globals.iter().enumerate() {
        for (j, &gj) in globals.iter().enumerate() {
            coo.push(gi, gj, block[(i, j)]);
        }
    }
}
