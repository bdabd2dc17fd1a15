//! Adjoint states and the misfit gradient.
//!
//! The global adjoint problem reuses the forward factorization through
//! conjugate-transpose solves; only the local systems differ from the
//! forward ones (they involve `B_e^H` instead of `C_e`). With both states
//! solved, the gradient reduces to per-cell inner products against the
//! model derivative of `A_e`: in the acoustic case only the
//! pressure-pressure block depends on the medium.

use crate::basis::basis_for;
use crate::forward::RestrictionOperator;
use crate::hdg::{blocks::ref_eval, FieldSolution, HdgOperator};
use crate::quadrature::Domain;
use crate::{C64, Error, Result};
use nalgebra::DVector;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Adjoint trace and per-cell adjoint states of one source.
pub struct AdjointSolution {
    /// Trace adjoint, same dimension as the forward trace.
    pub trace: Vec<C64>,
    /// Per-cell adjoint states, same layout as the forward coefficients.
    pub cell_states: Vec<DVector<C64>>,
    pub operator_id: u64,
}

/// Measurement residuals `R U - d` for one source.
pub fn residual(
    op: &HdgOperator,
    restrict: &RestrictionOperator,
    sol: &FieldSolution,
    data: &[C64],
) -> Result<Vec<C64>> {
    let predicted = restrict.measure(op, sol);
    if predicted.len() != data.len() {
        return Err(Error::Numerical(format!(
            "residual mismatch: {} receivers vs {} data values",
            predicted.len(),
            data.len()
        )));
    }
    Ok(predicted
        .iter()
        .zip(data)
        .map(|(p, d)| p - d)
        .collect())
}

/// Adjoint of the restriction: scatter residual values times the (real)
/// basis values into the pressure dof of each receiver's cell.
pub fn restriction_adjoint(
    op: &HdgOperator,
    restrict: &RestrictionOperator,
    residual: &[C64],
) -> BTreeMap<usize, DVector<C64>> {
    let dim = op.mesh.dim;
    let mut out: BTreeMap<usize, DVector<C64>> = BTreeMap::new();
    for ((cell, phi), &r) in restrict.per_receiver.iter().zip(residual) {
        let nd = op.cells[*cell].n_dof;
        let entry = out
            .entry(*cell)
            .or_insert_with(|| DVector::zeros((dim + 1) * nd));
        for j in 0..nd {
            entry[j] += r * C64::new(phi[j], 0.0);
        }
    }
    out
}

/// Adjoint right-hand side `C = sum_e R_e^T C_e^H A_e^{-H} [R^* r]_e`.
pub fn build_adjoint_rhs(
    op: &HdgOperator,
    restrict: &RestrictionOperator,
    residual: &[C64],
) -> Vec<C64> {
    let scattered = restriction_adjoint(op, restrict, residual);
    let mut rhs = vec![C64::new(0.0, 0.0); op.layout.total_dofs()];
    for (&cell, local) in &scattered {
        let blocks = &op.cells[cell];
        let y = blocks.a_lu.solve_adjoint(local);
        let contrib = blocks.c.adjoint() * y;
        op.layout.scatter_add(cell, contrib.as_slice(), &mut rhs);
    }
    rhs
}

/// Solve the adjoint trace system and the local adjoint states, reusing the
/// forward factorization (no new global factorization).
pub fn solve_adjoint_states(
    op: &HdgOperator,
    restrict: &RestrictionOperator,
    residual: &[C64],
) -> Result<AdjointSolution> {
    let rhs = build_adjoint_rhs(op, restrict, residual);
    let trace = op.factorization.solve_adjoint(&rhs)?;
    let scattered = restriction_adjoint(op, restrict, residual);
    let cell_states: Vec<DVector<C64>> = op
        .cells
        .par_iter()
        .map(|blocks| {
            let gamma2_local = DVector::from_vec(op.layout.select(blocks.cell, &trace));
            let mut local = blocks.b.adjoint() * gamma2_local;
            if let Some(r) = scattered.get(&blocks.cell) {
                local += r;
            }
            let mut g1 = blocks.a_lu.solve_adjoint(&local);
            g1.neg_mut();
            g1
        })
        .collect();
    Ok(AdjointSolution {
        trace,
        cell_states,
        operator_id: op.id,
    })
}

/// Residual norms of the two adjoint equations, for verification: per cell
/// `A_e^H g1 + B_e^H R_e g2 + [R^* r]_e` (max relative norm) and the global
/// trace equation `sum_e R_e^T (C_e^H g1 + L_e^H R_e g2)`.
pub fn adjoint_equation_residuals(
    op: &HdgOperator,
    restrict: &RestrictionOperator,
    residual: &[C64],
    adj: &AdjointSolution,
) -> (f64, f64) {
    let scattered = restriction_adjoint(op, restrict, residual);
    let mut cell_rel_max = 0.0f64;
    let mut global = vec![C64::new(0.0, 0.0); op.layout.total_dofs()];
    for blocks in &op.cells {
        let g1 = &adj.cell_states[blocks.cell];
        let g2_local = DVector::from_vec(op.layout.select(blocks.cell, &adj.trace));
        // explicit multiplication, independent of the triangular solves
        let mut r = blocks.a.adjoint() * g1 + blocks.b.adjoint() * &g2_local;
        if let Some(s) = scattered.get(&blocks.cell) {
            r += s;
        }
        let scale = (blocks.a.adjoint() * g1).norm().max(1e-30);
        cell_rel_max = cell_rel_max.max(r.norm() / scale);

        let contrib = blocks.c.adjoint() * g1 + blocks.l.adjoint() * g2_local;
        op.layout
            .scatter_add(blocks.cell, contrib.as_slice(), &mut global);
    }
    let gnorm = global.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let gscale = adj
        .trace
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .sqrt()
        .max(1e-30);
    (cell_rel_max, gnorm / gscale)
}

/// Model parameterization of the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parameter {
    /// Inverse bulk modulus `1/kappa`, the parameter `A_e` depends on
    /// linearly.
    KappaInv,
    /// Wave speed `c`, chained through `1/kappa = 1/(rho c^2)`.
    WaveSpeed,
}

/// Accumulate the gradient contribution of one solved source into `grad`
/// (length = model dof count). Only the pressure-pressure block of `A_e`
/// depends on the medium, so the contribution reduces to weighted masses of
/// the forward pressure against the adjoint pressure.
pub fn accumulate_gradient(
    op: &HdgOperator,
    forward: &FieldSolution,
    adjoint: &AdjointSolution,
    param: Parameter,
    grad: &mut [f64],
) -> Result<()> {
    op.owns(forward)?;
    if adjoint.operator_id != op.id {
        return Err(Error::Numerical(
            "stale adjoint solution: operator was rebuilt since this solve".into(),
        ));
    }
    let model = op.model;
    let n_model = model.dof_per_cell();
    if grad.len() != model.ndof() {
        return Err(Error::Numerical(format!(
            "gradient buffer length {} does not match model dof {}",
            grad.len(),
            model.ndof()
        )));
    }
    let dim = op.mesh.dim;
    let sigma = op.sigma;
    let contributions: Vec<Vec<f64>> = (0..op.mesh.n_cells())
        .into_par_iter()
        .map(|e| -> Result<Vec<f64>> {
            let p_cell = op.orders.cell_orders[e];
            let degree = 2 * p_cell + model.order.max(1);
            let reval = ref_eval(Domain::cell(dim), p_cell, degree)?;
            let model_basis = basis_for(Domain::cell(dim), model.order)?;
            let detj = op.mesh.jacobian_det(e).abs();
            let nd = op.cells[e].n_dof;
            let u = &forward.cell_coeffs[e];
            let g1 = &adjoint.cell_states[e];
            let mut local = vec![0.0; n_model];
            for (q, &pt) in reval.rule.points.iter().enumerate() {
                let w = reval.rule.weights[q] * detj;
                // forward and adjoint pressure at the quadrature point
                let mut ph = C64::new(0.0, 0.0);
                let mut gh = C64::new(0.0, 0.0);
                for j in 0..nd {
                    let phi = reval.values[(q, j)];
                    ph += u[j] * C64::new(phi, 0.0);
                    gh += g1[j] * C64::new(phi, 0.0);
                }
                // d<(dA/dm) u, g1> with dA/dm = -sigma * weighted mass
                let kernel = ((-sigma) * C64::new(w, 0.0)).conj() * ph.conj() * gh;
                let theta = model_basis.eval(pt);
                let chain = match param {
                    Parameter::KappaInv => 1.0,
                    Parameter::WaveSpeed => {
                        let c = model.c_at(e, pt);
                        let rho = model.rho_at(e, pt);
                        -2.0 / (rho * c * c * c)
                    }
                };
                for a in 0..n_model {
                    local[a] += kernel.re * theta[a] * chain;
                }
            }
            Ok(local)
        })
        .collect::<Result<_>>()?;
    for (e, local) in contributions.iter().enumerate() {
        for a in 0..n_model {
            grad[e * n_model + a] += local[a];
        }
    }
    Ok(())
}
