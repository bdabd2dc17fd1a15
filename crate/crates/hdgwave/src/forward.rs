//! Forward modeling: many-source solves on one factorization, receiver
//! restriction, and manufactured-solution error measurement.

use crate::basis::basis_for;
use crate::hdg::{CellRhs, FieldSolution, HdgOperator};
use crate::mesh::SimplicialMesh;
use crate::orders::OrderAssignment;
use crate::quadrature::Domain;
use crate::{C64, Error, Result};
use nalgebra::DVector;
use rayon::prelude::*;

/// Point source: a delta at `position` scaled by a complex amplitude. The
/// discrete right-hand side entries are `amplitude * phi_j(position)` in the
/// pressure block of the containing cell (delta sifting).
#[derive(Clone, Copy, Debug)]
pub struct PointSource {
    pub position: [f64; 3],
    pub amplitude: C64,
}

/// Sources and receivers of one experiment.
#[derive(Clone, Debug)]
pub struct AcquisitionSetup {
    pub sources: Vec<PointSource>,
    pub receivers: Vec<[f64; 3]>,
}

impl AcquisitionSetup {
    pub fn validate(&self, mesh: &SimplicialMesh) -> Result<()> {
        if self.receivers.is_empty() {
            return Err(Error::Config("receiver count must be positive".into()));
        }
        for (i, s) in self.sources.iter().enumerate() {
            if mesh.find_cell(s.position).is_none() {
                return Err(Error::Config(format!(
                    "source {i} at {:?} lies outside the mesh",
                    s.position
                )));
            }
        }
        for (i, r) in self.receivers.iter().enumerate() {
            if mesh.find_cell(*r).is_none() {
                return Err(Error::Config(format!(
                    "receiver {i} at {r:?} lies outside the mesh"
                )));
            }
        }
        Ok(())
    }
}

/// Receiver restriction: containing cell and basis values at the receiver's
/// reference coordinates; applying it to a solution interpolates the pressure
/// at the receiver points.
pub struct RestrictionOperator {
    pub per_receiver: Vec<(usize, DVector<f64>)>,
}

impl RestrictionOperator {
    pub fn build(
        mesh: &SimplicialMesh,
        orders: &OrderAssignment,
        receivers: &[[f64; 3]],
    ) -> Result<RestrictionOperator> {
        let mut per_receiver = Vec::with_capacity(receivers.len());
        for (i, &x) in receivers.iter().enumerate() {
            let (cell, r) = mesh
                .find_cell(x)
                .ok_or_else(|| Error::Config(format!("receiver {i} at {x:?} outside mesh")))?;
            let basis = basis_for(Domain::cell(mesh.dim), orders.cell_orders[cell])?;
            per_receiver.push((cell, basis.eval(r)));
        }
        Ok(RestrictionOperator { per_receiver })
    }

    /// Pressure values at the receivers, in declaration order.
    pub fn measure(&self, op: &HdgOperator, sol: &FieldSolution) -> Vec<C64> {
        self.per_receiver
            .iter()
            .map(|(cell, phi)| {
                let p = sol.pressure(op, *cell);
                phi.iter()
                    .zip(p)
                    .map(|(&v, &c)| c * C64::new(v, 0.0))
                    .sum()
            })
            .collect()
    }
}

/// Discrete right-hand side of one point source.
pub fn volume_source(op: &HdgOperator, src: &PointSource) -> Result<Vec<CellRhs>> {
    let mesh = op.mesh;
    let (cell, r) = mesh
        .find_cell(src.position)
        .ok_or_else(|| Error::Config(format!("source at {:?} outside mesh", src.position)))?;
    let basis = basis_for(Domain::cell(mesh.dim), op.orders.cell_orders[cell])?;
    let phi = basis.eval(r);
    let nd = basis.ndof();
    let mut values = DVector::zeros((mesh.dim + 1) * nd);
    for j in 0..nd {
        values[j] = src.amplitude * C64::new(phi[j], 0.0);
    }
    Ok(vec![CellRhs { cell, values }])
}

/// Solve all sources on the operator's single factorization; solutions come
/// back in source order.
pub fn solve_forward(op: &HdgOperator, sources: &[PointSource]) -> Result<Vec<FieldSolution>> {
    let cell_rhs: Vec<Vec<CellRhs>> = sources
        .iter()
        .map(|s| volume_source(op, s))
        .collect::<Result<_>>()?;
    cell_rhs
        .par_iter()
        .enumerate()
        .map(|(i, srhs)| {
            let rhs = op.trace_rhs(srhs);
            let lambda = op.solve_trace(&rhs)?;
            Ok(op.reconstruct(lambda, srhs, i))
        })
        .collect()
}

/// Solve the source-free problem driven by the operator's boundary data.
pub fn solve_boundary_driven(op: &HdgOperator) -> Result<FieldSolution> {
    let rhs = op.trace_rhs(&[]);
    let lambda = op.solve_trace(&rhs)?;
    Ok(op.reconstruct(lambda, &[], 0))
}

// ---------------------------------------------------------------------------
// Manufactured plane-wave solution
// ---------------------------------------------------------------------------

/// Exact plane wave `p = exp(i k . x)` of the homogeneous Euler system with
/// `|k| = omega / c` (for `sigma = i omega`) and `v = i k p / (sigma rho)`.
#[derive(Clone, Copy, Debug)]
pub struct PlaneWave {
    pub k: [f64; 3],
    pub sigma: C64,
    pub rho: f64,
}

impl PlaneWave {
    /// Plane wave along `direction` in a homogeneous medium. Requires a pure
    /// imaginary `sigma = i omega`; damped frequencies would need a complex
    /// wave vector.
    pub fn new(omega: f64, c: f64, rho: f64, direction: [f64; 3]) -> PlaneWave {
        let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        let kmag = omega / c;
        PlaneWave {
            k: [
                kmag * direction[0] / norm,
                kmag * direction[1] / norm,
                kmag * direction[2] / norm,
            ],
            sigma: C64::new(0.0, omega),
            rho,
        }
    }

    pub fn pressure(&self, x: [f64; 3]) -> C64 {
        let phase = self.k[0] * x[0] + self.k[1] * x[1] + self.k[2] * x[2];
        C64::new(0.0, phase).exp()
    }

    pub fn velocity(&self, x: [f64; 3]) -> [C64; 3] {
        let p = self.pressure(x);
        let scale = C64::new(0.0, 1.0) / (self.sigma * C64::new(self.rho, 0.0));
        [
            scale * C64::new(self.k[0], 0.0) * p,
            scale * C64::new(self.k[1], 0.0) * p,
            scale * C64::new(self.k[2], 0.0) * p,
        ]
    }

    /// Boundary data for the velocity-form Robin condition
    /// `alpha p + sigma rho beta v_n = g` evaluated from the exact fields.
    pub fn robin_data<'s>(
        &'s self,
        mesh: &'s SimplicialMesh,
        alpha: C64,
        beta: C64,
    ) -> impl Fn(usize, [f64; 3]) -> C64 + Sync + 's {
        move |face, x| {
            let n = mesh.faces[face].normal;
            let v = self.velocity(x);
            let vn = v[0] * C64::new(n[0], 0.0)
                + v[1] * C64::new(n[1], 0.0)
                + v[2] * C64::new(n[2], 0.0);
            alpha * self.pressure(x) + self.sigma * C64::new(self.rho, 0.0) * beta * vn
        }
    }
}

/// L2 errors and reference norms of a solution against exact fields,
/// integrated with a rule two degrees above the local basis order.
pub struct FieldErrors {
    pub p_error: f64,
    pub p_norm: f64,
    /// One entry per velocity component.
    pub v_error: Vec<f64>,
    pub v_norm: Vec<f64>,
}

pub fn field_errors(
    op: &HdgOperator,
    sol: &FieldSolution,
    exact_p: &(dyn Fn([f64; 3]) -> C64 + Sync),
    exact_v: &(dyn Fn([f64; 3]) -> [C64; 3] + Sync),
) -> Result<FieldErrors> {
    op.owns(sol)?;
    let mesh = op.mesh;
    let dim = mesh.dim;
    let mut p_err = 0.0;
    let mut p_norm = 0.0;
    let mut v_err = vec![0.0; dim];
    let mut v_norm = vec![0.0; dim];
    for e in 0..mesh.n_cells() {
        let p = op.orders.cell_orders[e];
        let reval = crate::hdg::blocks::ref_eval(Domain::cell(dim), p, 2 * p + 2)?;
        let detj = mesh.jacobian_det(e).abs();
        let nd = op.cells[e].n_dof;
        let coeffs = &sol.cell_coeffs[e];
        for (q, &pt) in reval.rule.points.iter().enumerate() {
            let w = reval.rule.weights[q] * detj;
            let x = mesh.ref_to_phys(e, pt);
            let mut ph = C64::new(0.0, 0.0);
            let mut vh = [C64::new(0.0, 0.0); 3];
            for j in 0..nd {
                let phi = C64::new(reval.values[(q, j)], 0.0);
                ph += coeffs[j] * phi;
                for d in 0..dim {
                    vh[d] += coeffs[(d + 1) * nd + j] * phi;
                }
            }
            let pe = exact_p(x);
            let ve = exact_v(x);
            p_err += w * (ph - pe).norm_sqr();
            p_norm += w * pe.norm_sqr();
            for d in 0..dim {
                v_err[d] += w * (vh[d] - ve[d]).norm_sqr();
                v_norm[d] += w * ve[d].norm_sqr();
            }
        }
    }
    Ok(FieldErrors {
        p_error: p_err.sqrt(),
        p_norm: p_norm.sqrt(),
        v_error: v_err.iter().map(|v| v.sqrt()).collect(),
        v_norm: v_norm.iter().map(|v| v.sqrt()).collect(),
    })
}
