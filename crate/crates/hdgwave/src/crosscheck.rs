//! Diagnostic oracle: a piecewise-linear continuous-Galerkin solve of the
//! second-order pressure equation on the same mesh, compared against the HDG
//! pressure in relative L2. The two discretizations share nothing but the
//! mesh, so agreement within discretization error is a strong consistency
//! check of the first-order HDG path.

use crate::forward::{solve_boundary_driven, solve_forward, PointSource};
use crate::hdg::{BoundaryCondition, BoundarySpec, HdgOperator};
use crate::mesh::SimplicialMesh;
use crate::model::ModelState;
use crate::orders::OrderAssignment;
use crate::quadrature::{quadrature_for, Domain};
use crate::sparse::{factorize, CooMatrix};
use crate::{C64, Error, Result};

/// Solve the second-order form with P1 continuous elements and Dirichlet
/// data on the whole boundary, then report the relative L2 distance of the
/// HDG pressure (same mesh, same data) to the reference. Requires a
/// constant-density model.
pub fn second_order_crosscheck(
    mesh: &SimplicialMesh,
    model: &ModelState,
    orders: &OrderAssignment,
    sigma: C64,
    source: Option<&PointSource>,
    dirichlet: &(dyn Fn([f64; 3]) -> C64 + Sync),
) -> Result<f64> {
    let rho0 = model.cell_mean_rho(0);
    for e in 0..model.n_cells {
        if (model.cell_mean_rho(e) - rho0).abs() > 1e-12 * rho0 {
            return Err(Error::Config(
                "second-order cross-check requires a constant density".into(),
            ));
        }
    }

    // HDG side: Dirichlet everywhere with the same data
    let bspec = BoundarySpec::uniform(mesh, BoundaryCondition::Dirichlet);
    let bdata = |_face: usize, x: [f64; 3]| dirichlet(x);
    let op = HdgOperator::build(mesh, model, orders, sigma, &bspec, Some(&bdata))?;
    let hdg_sol = match source {
        Some(s) => solve_forward(&op, &[*s])?.remove(0),
        None => solve_boundary_driven(&op)?,
    };

    // CG side: P1 hats on the mesh vertices
    let cg = solve_p1_reference(mesh, model, sigma, source, dirichlet)?;

    // relative L2 distance evaluated cellwise
    let mut diff = 0.0;
    let mut norm = 0.0;
    for e in 0..mesh.n_cells() {
        let p_ord = orders.cell_orders[e];
        let reval = crate::hdg::blocks::ref_eval(Domain::cell(mesh.dim), p_ord, 2 * p_ord + 2)?;
        let detj = mesh.jacobian_det(e).abs();
        let nd = op.cells[e].n_dof;
        let cell = mesh.cell(e);
        for (q, &pt) in reval.rule.points.iter().enumerate() {
            let w = reval.rule.weights[q] * detj;
            let mut p_hdg = C64::new(0.0, 0.0);
            for j in 0..nd {
                p_hdg += hdg_sol.cell_coeffs[e][j] * C64::new(reval.values[(q, j)], 0.0);
            }
            // P1 value from barycentric hats
            let mut hat0 = 1.0;
            let mut p_cg = C64::new(0.0, 0.0);
            for d in 0..mesh.dim {
                hat0 -= pt[d];
                p_cg += cg[cell[d + 1]] * C64::new(pt[d], 0.0);
            }
            p_cg += cg[cell[0]] * C64::new(hat0, 0.0);
            diff += w * (p_hdg - p_cg).norm_sqr();
            norm += w * p_hdg.norm_sqr();
        }
    }
    let rel = (diff / norm.max(1e-300)).sqrt();
    if !rel.is_finite() {
        return Err(Error::Numerical(
            "cross-check discrepancy is not finite".into(),
        ));
    }
    Ok(rel)
}

/// P1 continuous-Galerkin solve of
/// `sigma^2/kappa p - div(rho^{-1} grad p) = -sigma f` with Dirichlet data.
fn solve_p1_reference(
    mesh: &SimplicialMesh,
    model: &ModelState,
    sigma: C64,
    source: Option<&PointSource>,
    dirichlet: &(dyn Fn([f64; 3]) -> C64 + Sync),
) -> Result<Vec<C64>> {
    let dim = mesh.dim;
    let nv = mesh.n_vertices();
    let mut boundary_vertex = vec![false; nv];
    for face in &mesh.faces {
        if face.is_boundary() {
            for &v in &face.vertices {
                boundary_vertex[v] = true;
            }
        }
    }

    let mut coo = CooMatrix::new(nv);
    let mut rhs = vec![C64::new(0.0, 0.0); nv];
    let rule = quadrature_for(2 + model.order, Domain::cell(dim))?;
    for e in 0..mesh.n_cells() {
        let cell = mesh.cell(e);
        let detj = mesh.jacobian_det(e).abs();
        let vol = mesh.cell_volume(e);
        // constant physical gradients of the hat functions
        let jinv = p1_grads(mesh, e);
        let rho = model.cell_mean_rho(e);
        let npc = dim + 1;
        let mut local = vec![vec![C64::new(0.0, 0.0); npc]; npc];
        // stiffness: rho^{-1} grad h_i . grad h_j |K|
        for i in 0..npc {
            for j in 0..npc {
                let mut dot = 0.0;
                for d in 0..dim {
                    dot += jinv[i][d] * jinv[j][d];
                }
                local[i][j] += C64::new(dot * vol / rho, 0.0);
            }
        }
        // mass: sigma^2 kappa^{-1} h_i h_j by quadrature (kappa may vary)
        for (q, &pt) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * detj;
            let ki = model.kappa_inv_at(e, pt);
            let mut hats = vec![0.0; npc];
            hats[0] = 1.0 - pt[..dim].iter().sum::<f64>();
            hats[1..(dim + 1)].copy_from_slice(&pt[..dim]);
            for i in 0..npc {
                for j in 0..npc {
                    local[i][j] += sigma * sigma * C64::new(w * ki * hats[i] * hats[j], 0.0);
                }
            }
        }
        for i in 0..npc {
            if boundary_vertex[cell[i]] {
                continue;
            }
            for j in 0..npc {
                coo.push(cell[i], cell[j], local[i][j]);
            }
        }
    }
    // point source: -sigma * amp * h_i(x_s)
    if let Some(s) = source {
        let (e, r) = mesh
            .find_cell(s.position)
            .ok_or_else(|| Error::Config("cross-check source outside mesh".into()))?;
        let cell = mesh.cell(e);
        let mut hats = vec![0.0; dim + 1];
        hats[0] = 1.0 - r[..dim].iter().sum::<f64>();
        hats[1..(dim + 1)].copy_from_slice(&r[..dim]);
        for (i, &v) in cell.iter().enumerate() {
            if !boundary_vertex[v] {
                rhs[v] += -sigma * s.amplitude * C64::new(hats[i], 0.0);
            }
        }
    }
    // Dirichlet rows
    for v in 0..nv {
        if boundary_vertex[v] {
            coo.push(v, v, C64::new(1.0, 0.0));
            rhs[v] = dirichlet(mesh.vertex(v));
        }
    }
    let fact = factorize(&coo.to_csc())?;
    fact.solve(&rhs)
}

/// Physical gradients of the P1 hat functions on cell `e`.
fn p1_grads(mesh: &SimplicialMesh, e: usize) -> Vec<[f64; 3]> {
    let dim = mesh.dim;
    let j = mesh.jacobian(e);
    // rows of the inverse Jacobian are the gradients of the reference
    // coordinates; hat_0 = 1 - sum(ref)
    let det = mesh.jacobian_det(e);
    let m = |r: usize, c: usize| j[c][r];
    let inv = match dim {
        2 => {
            let inv00 = m(1, 1) / det;
            let inv01 = -m(0, 1) / det;
            let inv10 = -m(1, 0) / det;
            let inv11 = m(0, 0) / det;
            vec![[inv00, inv01, 0.0], [inv10, inv11, 0.0]]
        }
        _ => {
            let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
                m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0)
            };
            vec![
                [cof(1, 2, 1, 2) / det, -cof(0, 2, 1, 2) / det, cof(0, 1, 1, 2) / det],
                [-cof(1, 2, 0, 2) / det, cof(0, 2, 0, 2) / det, -cof(0, 1, 0, 2) / det],
                [cof(1, 2, 0, 1) / det, -cof(0, 2, 0, 1) / det, cof(0, 1, 0, 1) / det],
            ]
        }
    };
    let mut grads = vec![[0.0f64; 3]; dim + 1];
    for r in 0..dim {
        for d in 0..dim {
            grads[r + 1][d] = inv[r][d];
            grads[0][d] -= inv[r][d];
        }
    }
    grads
}
