//! Per-cell HDG blocks and static condensation.
//!
//! For each cell the local system couples the pressure and velocity
//! coefficients `U_e` to the face traces: `A_e U_e + C_e R_e Lambda = S_e`.
//! The trace rows contribute `B_e U_e + L_e R_e Lambda` per face. Condensing
//! `U_e` out leaves the dense trace block `L_e - B_e A_e^{-1} C_e` whose
//! scatter over the connectivity map forms the global system.
//!
//! Block layout of `U_e`: pressure coefficients first, then one velocity
//! component per space dimension, each of length `N_dof`.

use super::{BoundaryCondition, BoundaryDataFn, BoundarySpec, StabilizationTau};
use crate::basis::{basis_for, NodalBasis};
use crate::mesh::SimplicialMesh;
use crate::model::ModelState;
use crate::orders::OrderAssignment;
use crate::quadrature::{quadrature_for, Domain, QuadratureRule};
use crate::{C64, Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

// ---------------------------------------------------------------------------
// Dense complex LU with partial pivoting; one factorization serves both the
// ordinary and the conjugate-transpose solves.
// ---------------------------------------------------------------------------

pub struct DenseLu {
    n: usize,
    lu: DMatrix<C64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(mut a: DMatrix<C64>) -> Result<DenseLu> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut imax = k;
            let mut vmax = a[(k, k)].norm();
            for i in (k + 1)..n {
                let v = a[(i, k)].norm();
                if v > vmax {
                    vmax = v;
                    imax = i;
                }
            }
            if vmax == 0.0 || !vmax.is_finite() {
                return Err(Error::Numerical(format!(
                    "singular local matrix at elimination step {k}"
                )));
            }
            piv[k] = imax;
            if imax != k {
                a.swap_rows(k, imax);
            }
            let pivot = a[(k, k)];
            for i in (k + 1)..n {
                let m = a[(i, k)] / pivot;
                a[(i, k)] = m;
                for j in (k + 1)..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= m * akj;
                }
            }
        }
        Ok(DenseLu { n, lu: a, piv })
    }

    pub fn solve_in_place(&self, b: &mut DVector<C64>) {
        let n = self.n;
        for k in 0..n {
            b.swap_rows(k, self.piv[k]);
        }
        for k in 0..n {
            let bk = b[k];
            for i in (k + 1)..n {
                b[i] -= self.lu[(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            b[k] /= self.lu[(k, k)];
            let bk = b[k];
            for i in 0..k {
                b[i] -= self.lu[(i, k)] * bk;
            }
        }
    }

    pub fn solve(&self, b: &DVector<C64>) -> DVector<C64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    /// Columnwise `A^{-1} M`.
    pub fn solve_mat(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = m.clone();
        for j in 0..m.ncols() {
            let mut col = DVector::from_column_slice(m.column(j).as_slice());
            self.solve_in_place(&mut col);
            out.set_column(j, &col);
        }
        out
    }

    /// Solve `A^H x = b` from the same factors.
    pub fn solve_adjoint_in_place(&self, b: &mut DVector<C64>) {
        let n = self.n;
        // U^H w = b (forward, conjugated)
        for k in 0..n {
            let mut acc = b[k];
            for i in 0..k {
                acc -= self.lu[(i, k)].conj() * b[i];
            }
            b[k] = acc / self.lu[(k, k)].conj();
        }
        // L^H z = w (backward, unit diagonal, conjugated)
        for k in (0..n).rev() {
            let mut acc = b[k];
            for i in (k + 1)..n {
                acc -= self.lu[(i, k)].conj() * b[i];
            }
            b[k] = acc;
        }
        // undo the row permutation
        for k in (0..n).rev() {
            b.swap_rows(k, self.piv[k]);
        }
    }

    pub fn solve_adjoint(&self, b: &DVector<C64>) -> DVector<C64> {
        let mut x = b.clone();
        self.solve_adjoint_in_place(&mut x);
        x
    }

    /// Columnwise `A^{-H} M`.
    pub fn solve_adjoint_mat(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = m.clone();
        for j in 0..m.ncols() {
            let mut col = DVector::from_column_slice(m.column(j).as_slice());
            self.solve_adjoint_in_place(&mut col);
            out.set_column(j, &col);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Reference-element evaluation cache
// ---------------------------------------------------------------------------

/// Basis values and reference gradients at the points of a cached rule,
/// shared by every cell with the same order and quadrature degree.
pub struct RefEval {
    pub rule: Arc<QuadratureRule>,
    /// `values[(q, i)] = phi_i(x_q)`.
    pub values: DMatrix<f64>,
    /// Reference-direction gradients, same layout.
    pub grads: [DMatrix<f64>; 3],
}

pub fn ref_eval(domain: Domain, order: u32, degree: u32) -> Result<Arc<RefEval>> {
    static CACHE: OnceLock<Mutex<HashMap<(Domain, u32, u32), Arc<RefEval>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    if let Some(hit) = map.get(&(domain, order, degree)) {
        return Ok(hit.clone());
    }
    let basis = basis_for(domain, order)?;
    let rule = quadrature_for(degree, domain)?;
    let (nq, nd) = (rule.len(), basis.ndof());
    let mut values = DMatrix::zeros(nq, nd);
    let mut grads = [
        DMatrix::zeros(nq, nd),
        DMatrix::zeros(nq, nd),
        DMatrix::zeros(nq, nd),
    ];
    for (q, &pt) in rule.points.iter().enumerate() {
        let v = basis.eval(pt);
        let g = basis.grad(pt);
        for i in 0..nd {
            values[(q, i)] = v[i];
            for d in 0..3 {
                grads[d][(q, i)] = g[d][i];
            }
        }
    }
    let entry = Arc::new(RefEval {
        rule,
        values,
        grads,
    });
    map.insert((domain, order, degree), entry.clone());
    Ok(entry)
}

// ---------------------------------------------------------------------------
// Cell blocks
// ---------------------------------------------------------------------------

/// Dense local matrices of one cell, with the condensed trace block and the
/// cached factorization of `A_e`.
pub struct CellBlocks {
    pub cell: usize,
    /// Scalar volume dof count of this cell.
    pub n_dof: usize,
    /// Rows/cols of `A_e`: `(dim + 1) * n_dof`.
    pub nb: usize,
    /// Total trace dof on the cell boundary.
    pub nt: usize,
    /// Local trace offsets per face, length `n_local_faces + 1`.
    pub face_offsets: Vec<usize>,
    /// The local matrix itself, kept for residual verification.
    pub a: DMatrix<C64>,
    pub a_lu: DenseLu,
    pub c: DMatrix<C64>,
    pub b: DMatrix<C64>,
    pub l: DMatrix<C64>,
    /// `A_e^{-1} C_e`, reused by reconstruction.
    pub a_inv_c: DMatrix<C64>,
    /// `L_e - B_e A_e^{-1} C_e`.
    pub condensed: DMatrix<C64>,
    /// Trace-equation rhs from inhomogeneous boundary data (zero otherwise).
    pub boundary_rhs: DVector<C64>,
}

/// Geometry and quadrature data shared by the per-cell assembly routines.
pub struct CellQuadrature {
    pub e: usize,
    pub order: u32,
    pub basis: Arc<NodalBasis>,
    pub vol: Arc<RefEval>,
    /// Physical quadrature weights (reference weight times |det J|).
    pub wq: Vec<f64>,
    /// Physical gradients per direction, `(q, i)` layout.
    pub phys_grads: [DMatrix<f64>; 3],
    /// Model values at the volume quadrature points.
    pub kappa_inv: Vec<f64>,
    pub rho: Vec<f64>,
}

pub fn cell_quadrature(
    mesh: &SimplicialMesh,
    model: &ModelState,
    orders: &OrderAssignment,
    e: usize,
) -> Result<CellQuadrature> {
    let dim = mesh.dim;
    let p = orders.cell_orders[e];
    let degree = 2 * p + model.order.max(1);
    let vol = ref_eval(Domain::cell(dim), p, degree)?;
    let basis = basis_for(Domain::cell(dim), p)?;
    let detj = mesh.jacobian_det(e).abs();
    let wq: Vec<f64> = vol.rule.weights.iter().map(|w| w * detj).collect();

    // physical gradients via the inverse Jacobian
    let jinv = {
        let j = mesh.jacobian(e);
        invert_jacobian(&j)
    };
    let (nq, nd) = (vol.rule.len(), basis.ndof());
    let mut phys_grads = [
        DMatrix::zeros(nq, nd),
        DMatrix::zeros(nq, nd),
        DMatrix::zeros(nq, nd),
    ];
    for q in 0..nq {
        for i in 0..nd {
            for d in 0..dim {
                let mut g = 0.0;
                for r in 0..dim {
                    g += vol.grads[r][(q, i)] * jinv[r][d];
                }
                phys_grads[d][(q, i)] = g;
            }
        }
    }
    let kappa_inv: Vec<f64> = vol
        .rule
        .points
        .iter()
        .map(|&pt| model.kappa_inv_at(e, pt))
        .collect();
    let rho: Vec<f64> = vol.rule.points.iter().map(|&pt| model.rho_at(e, pt)).collect();
    Ok(CellQuadrature {
        e,
        order: p,
        basis,
        vol,
        wq,
        phys_grads,
        kappa_inv,
        rho,
    })
}

fn invert_jacobian(j: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[1][0] * (j[0][1] * j[2][2] - j[0][2] * j[2][1])
        + j[2][0] * (j[0][1] * j[1][2] - j[0][2] * j[1][1]);
    let m = |r: usize, c: usize| j[c][r];
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0);
    [
        [
            cof(1, 2, 1, 2) / det,
            -cof(0, 2, 1, 2) / det,
            cof(0, 1, 1, 2) / det,
        ],
        [
            -cof(1, 2, 0, 2) / det,
            cof(0, 2, 0, 2) / det,
            -cof(0, 1, 0, 2) / det,
        ],
        [
            cof(1, 2, 0, 1) / det,
            -cof(0, 2, 0, 1) / det,
            cof(0, 1, 0, 1) / det,
        ],
    ]
}

/// Face-side quadrature data: the trace basis evaluated on the canonical face
/// parameterization and the volume basis pulled back to this cell.
pub struct FaceSideQuadrature {
    pub face: usize,
    pub face_order: u32,
    pub nf: usize,
    /// Physical quadrature weights (reference weight times area scale).
    pub wq: Vec<f64>,
    /// `xi[(q, k)]`: trace basis values.
    pub xi: DMatrix<f64>,
    /// `phi[(q, j)]`: volume basis values at the pulled-back points.
    pub phi: DMatrix<f64>,
    /// Physical quadrature points.
    pub points: Vec<[f64; 3]>,
    /// Outward normal of this cell on the face.
    pub normal: [f64; 3],
}

pub fn face_side_quadrature(
    mesh: &SimplicialMesh,
    orders: &OrderAssignment,
    e: usize,
    face_id: usize,
    cell_basis: &NodalBasis,
) -> Result<FaceSideQuadrature> {
    let dim = mesh.dim;
    let face = &mesh.faces[face_id];
    let q_f = orders.face_orders[face_id];
    let fdomain = Domain::face(dim);
    let feval = ref_eval(fdomain, q_f, 2 * q_f)?;
    let scale = face.area / fdomain.measure();
    let wq: Vec<f64> = feval.rule.weights.iter().map(|w| w * scale).collect();
    let nq = feval.rule.len();
    let nf = feval.values.ncols();

    // canonical affine map from the face reference domain to physical space
    let a = mesh.vertex(face.vertices[0]);
    let b = mesh.vertex(face.vertices[1]);
    let c = if dim == 3 {
        Some(mesh.vertex(face.vertices[2]))
    } else {
        None
    };
    let mut points = Vec::with_capacity(nq);
    let mut phi = DMatrix::zeros(nq, cell_basis.ndof());
    for (q, &fp) in feval.rule.points.iter().enumerate() {
        let mut x = [0.0; 3];
        for d in 0..3 {
            x[d] = a[d] + fp[0] * (b[d] - a[d]);
            if let Some(cv) = c {
                x[d] += fp[1] * (cv[d] - a[d]);
            }
        }
        points.push(x);
        let r = mesh.phys_to_ref(e, x);
        let vals = cell_basis.eval(r);
        for j in 0..cell_basis.ndof() {
            phi[(q, j)] = vals[j];
        }
    }
    Ok(FaceSideQuadrature {
        face: face_id,
        face_order: q_f,
        nf,
        wq,
        xi: feval.values.clone(),
        phi,
        points,
        normal: mesh.outward_normal(face_id, e),
    })
}

/// Assemble `A_e` (volume couplings plus the stabilization mass on the cell
/// boundary). The pressure row couples to the velocity through the divergence
/// and the velocity rows couple back through the negative-transposed
/// derivative blocks.
pub fn assemble_a(
    ctx: &CellQuadrature,
    faces: &[FaceSideQuadrature],
    tau: &[f64],
    sigma: C64,
) -> Result<DMatrix<C64>> {
    if sigma.norm() == 0.0 {
        return Err(Error::Numerical("zero complex frequency".into()));
    }
    if tau.iter().any(|&t| t <= 0.0) {
        return Err(Error::Numerical(format!(
            "stabilization must be positive, got {tau:?}"
        )));
    }
    let dim = ctx.basis.domain.dim();
    let nd = ctx.basis.ndof();
    let nb = (dim + 1) * nd;
    let mut a = DMatrix::<C64>::zeros(nb, nb);
    let nq = ctx.wq.len();

    // weighted volume masses and derivative couplings
    for q in 0..nq {
        let w = ctx.wq[q];
        let wk = w * ctx.kappa_inv[q];
        let wr = w * ctx.rho[q];
        for i in 0..nd {
            let pi = ctx.vol.values[(q, i)];
            for j in 0..nd {
                let pj = ctx.vol.values[(q, j)];
                // pressure-pressure: -(sigma kappa^{-1} phi_j, phi_i)
                a[(i, j)] += sigma * C64::new(-wk * pi * pj, 0.0);
                for d in 0..dim {
                    let gdi = ctx.phys_grads[d][(q, i)];
                    let gdj = ctx.phys_grads[d][(q, j)];
                    // pressure row, velocity column: (d_d phi_j, phi_i)
                    a[(i, (d + 1) * nd + j)] += C64::new(w * gdj * pi, 0.0);
                    // velocity row, pressure column: -(phi_j, d_d phi_i)
                    a[((d + 1) * nd + i, j)] += C64::new(-w * pj * gdi, 0.0);
                    // velocity diagonal: -(sigma rho phi_j, phi_i)
                    a[((d + 1) * nd + i, (d + 1) * nd + j)] += sigma * C64::new(-wr * pi * pj, 0.0);
                }
            }
        }
    }
    // stabilization mass on the cell boundary, pressure block
    for (lf, fq) in faces.iter().enumerate() {
        let t = tau[lf];
        for q in 0..fq.wq.len() {
            let w = fq.wq[q] * t;
            for i in 0..nd {
                let pi = fq.phi[(q, i)];
                for j in 0..nd {
                    a[(i, j)] += C64::new(w * pi * fq.phi[(q, j)], 0.0);
                }
            }
        }
    }
    Ok(a)
}

/// `C_e`: trace coupling into the local system. Pressure rows get
/// `-tau (xi_k, phi_j)_F`, velocity rows `(xi_k, phi_j n_d)_F` with the
/// outward normal of this cell.
pub fn assemble_c(
    dim: usize,
    nd: usize,
    faces: &[FaceSideQuadrature],
    tau: &[f64],
) -> DMatrix<C64> {
    let nt: usize = faces.iter().map(|f| f.nf).sum();
    let mut c = DMatrix::<C64>::zeros((dim + 1) * nd, nt);
    let mut off = 0;
    for (lf, fq) in faces.iter().enumerate() {
        let t = tau[lf];
        for q in 0..fq.wq.len() {
            let w = fq.wq[q];
            for k in 0..fq.nf {
                let xk = fq.xi[(q, k)];
                for j in 0..nd {
                    let pj = fq.phi[(q, j)];
                    c[(j, off + k)] += C64::new(-t * w * xk * pj, 0.0);
                    for d in 0..dim {
                        c[((d + 1) * nd + j, off + k)] +=
                            C64::new(w * xk * pj * fq.normal[d], 0.0);
                    }
                }
            }
        }
        off += fq.nf;
    }
    c
}

/// `B_e` and `L_e` with the boundary-condition variants, plus the
/// trace-equation rhs collecting inhomogeneous boundary data.
#[allow(clippy::too_many_arguments)]
pub fn assemble_b_l(
    mesh: &SimplicialMesh,
    model: &ModelState,
    e: usize,
    dim: usize,
    nd: usize,
    faces: &[FaceSideQuadrature],
    tau: &[f64],
    sigma: C64,
    bspec: &BoundarySpec,
    bdata: Option<&BoundaryDataFn<'_>>,
) -> Result<(DMatrix<C64>, DMatrix<C64>, DVector<C64>)> {
    let nt: usize = faces.iter().map(|f| f.nf).sum();
    let mut b = DMatrix::<C64>::zeros(nt, (dim + 1) * nd);
    let mut l = DMatrix::<C64>::zeros(nt, nt);
    let mut rhs = DVector::<C64>::zeros(nt);
    let mut off = 0;
    for (lf, fq) in faces.iter().enumerate() {
        let t = tau[lf];
        let face = &mesh.faces[fq.face];
        let bc = if face.is_boundary() {
            Some(bspec.condition(fq.face)?)
        } else {
            None
        };

        let dirichlet = matches!(bc, Some(BoundaryCondition::Dirichlet));
        if !dirichlet {
            for q in 0..fq.wq.len() {
                let w = fq.wq[q];
                for k in 0..fq.nf {
                    let xk = fq.xi[(q, k)];
                    for j in 0..nd {
                        let pj = fq.phi[(q, j)];
                        b[(off + k, j)] += C64::new(t * w * xk * pj, 0.0);
                        for d in 0..dim {
                            b[(off + k, (d + 1) * nd + j)] +=
                                C64::new(w * xk * pj * fq.normal[d], 0.0);
                        }
                    }
                }
            }
        }

        // L block coefficient per condition
        let rho_face = model.cell_mean_rho(e);
        let c_face = model.cell_mean_c(e);
        let (coeff, data_scale): (C64, Option<C64>) = match bc {
            None | Some(BoundaryCondition::Neumann) => (C64::new(-t, 0.0), None),
            Some(BoundaryCondition::Robin { alpha, beta }) => {
                if beta.norm() == 0.0 {
                    return Err(Error::Numerical(format!(
                        "face {}: Robin with beta = 0 must be declared Dirichlet",
                        fq.face
                    )));
                }
                let denom = sigma * C64::new(rho_face, 0.0) * beta;
                (*alpha / denom - C64::new(t, 0.0), Some(denom.inv()))
            }
            Some(BoundaryCondition::Absorbing) => {
                // pressure/velocity absorbing form: alpha/(sigma rho beta) = -1/(c rho)
                let coeff = C64::new(-1.0 / (c_face * rho_face) - t, 0.0);
                (coeff, Some(C64::new(1.0, 0.0)))
            }
            Some(BoundaryCondition::Dirichlet) => (C64::new(0.0, 0.0), None),
        };

        if dirichlet {
            for k in 0..fq.nf {
                l[(off + k, off + k)] = C64::new(1.0, 0.0);
            }
            if let Some(g) = bdata {
                // trace forced to the nodal interpolant of the data
                let fb = basis_for(Domain::face(dim), fq.face_order)?;
                let a0 = mesh.vertex(face.vertices[0]);
                let b0 = mesh.vertex(face.vertices[1]);
                let c0 = if dim == 3 {
                    Some(mesh.vertex(face.vertices[2]))
                } else {
                    None
                };
                for (k, &node) in fb.nodes.iter().enumerate() {
                    let mut x = [0.0; 3];
                    for d in 0..3 {
                        x[d] = a0[d] + node[0] * (b0[d] - a0[d]);
                        if let Some(cv) = c0 {
                            x[d] += node[1] * (cv[d] - a0[d]);
                        }
                    }
                    rhs[off + k] = g(fq.face, x);
                }
            }
        } else {
            for q in 0..fq.wq.len() {
                let w = fq.wq[q];
                for k in 0..fq.nf {
                    let xk = fq.xi[(q, k)];
                    for j in 0..fq.nf {
                        l[(off + k, off + j)] += coeff * C64::new(w * xk * fq.xi[(q, j)], 0.0);
                    }
                }
            }
            if let (Some(g), Some(scale)) = (bdata, data_scale) {
                if face.is_boundary() {
                    for q in 0..fq.wq.len() {
                        let gv = g(fq.face, fq.points[q]) * scale;
                        for k in 0..fq.nf {
                            rhs[off + k] += gv * C64::new(fq.wq[q] * fq.xi[(q, k)], 0.0);
                        }
                    }
                }
            }
        }
        off += fq.nf;
    }
    Ok((b, l, rhs))
}

/// Assemble and condense all blocks of one cell.
#[allow(clippy::too_many_arguments)]
pub fn assemble_cell_blocks(
    mesh: &SimplicialMesh,
    model: &ModelState,
    orders: &OrderAssignment,
    tau: &StabilizationTau,
    sigma: C64,
    bspec: &BoundarySpec,
    bdata: Option<&BoundaryDataFn<'_>>,
    e: usize,
) -> Result<CellBlocks> {
    let dim = mesh.dim;
    let ctx = cell_quadrature(mesh, model, orders, e)?;
    let nd = ctx.basis.ndof();
    let taus = &tau.per_cell_face[e];
    let mut faces = Vec::with_capacity(dim + 1);
    for &f in mesh.faces_of_cell(e) {
        faces.push(face_side_quadrature(mesh, orders, e, f, &ctx.basis)?);
    }
    let mut face_offsets = vec![0usize];
    for fq in &faces {
        face_offsets.push(face_offsets.last().unwrap() + fq.nf);
    }
    let nt = *face_offsets.last().unwrap();
    let nb = (dim + 1) * nd;

    let a = assemble_a(&ctx, &faces, taus, sigma)?;
    let c = assemble_c(dim, nd, &faces, taus);
    let (b, l, boundary_rhs) =
        assemble_b_l(mesh, model, e, dim, nd, &faces, taus, sigma, bspec, bdata)?;

    let a_lu = DenseLu::factor(a.clone()).map_err(|_| {
        Error::Numerical(format!(
            "cell {e}: singular local system (order {}, sigma {sigma}, tau {taus:?})",
            ctx.order
        ))
    })?;
    let a_inv_c = a_lu.solve_mat(&c);
    let condensed = &l - &b * &a_inv_c;

    Ok(CellBlocks {
        cell: e,
        n_dof: nd,
        nb,
        nt,
        face_offsets,
        a,
        a_lu,
        c,
        b,
        l,
        a_inv_c,
        condensed,
        boundary_rhs,
    })
}
