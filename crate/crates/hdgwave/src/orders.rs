//! Per-cell polynomial orders, the face-order rule, and dof accounting.
//!
//! Faces take the maximum order of their adjacent cells, so the trace space
//! is always rich enough for both sides of a mixed-order interface. Order
//! selection for a target resolution uses the local wavelength-to-cell-size
//! ratio.

use crate::basis::{dof_count, face_dof_count};
use crate::mesh::{ConnectivityMap, SimplicialMesh};
use crate::{Error, Result};

/// Cell and face polynomial orders for one discretization.
#[derive(Clone, Debug)]
pub struct OrderAssignment {
    pub cell_orders: Vec<u32>,
    pub face_orders: Vec<u32>,
}

impl OrderAssignment {
    /// Same order everywhere.
    pub fn uniform(mesh: &SimplicialMesh, order: u32) -> OrderAssignment {
        OrderAssignment::from_cell_orders(mesh, vec![order; mesh.n_cells()])
    }

    /// Derive face orders from cell orders: an interior face takes the
    /// maximum of its two cells, a boundary face its owner's order.
    pub fn from_cell_orders(mesh: &SimplicialMesh, cell_orders: Vec<u32>) -> OrderAssignment {
        assert_eq!(cell_orders.len(), mesh.n_cells());
        let face_orders = mesh
            .faces
            .iter()
            .map(|face| {
                let p_owner = cell_orders[face.owner.0];
                match face.neighbor {
                    Some((nb, _)) => p_owner.max(cell_orders[nb]),
                    None => p_owner,
                }
            })
            .collect();
        OrderAssignment {
            cell_orders,
            face_orders,
        }
    }

    /// Dof count of the trace basis on face `f`.
    pub fn face_dofs(&self, mesh: &SimplicialMesh, f: usize) -> usize {
        face_dof_count(self.face_orders[f], mesh.dim)
    }

    /// Global trace layout for this assignment.
    pub fn trace_layout(&self, mesh: &SimplicialMesh) -> ConnectivityMap {
        let counts: Vec<usize> = (0..mesh.n_faces())
            .map(|f| self.face_dofs(mesh, f))
            .collect();
        ConnectivityMap::build(mesh, &counts)
    }
}

/// Dimension of the global trace system.
pub fn count_trace_dofs(mesh: &SimplicialMesh, orders: &OrderAssignment) -> usize {
    (0..mesh.n_faces()).map(|f| orders.face_dofs(mesh, f)).sum()
}

/// Total volume dof per scalar unknown (the DG count used for comparison).
pub fn count_volume_dofs(mesh: &SimplicialMesh, orders: &OrderAssignment) -> usize {
    orders
        .cell_orders
        .iter()
        .map(|&p| dof_count(p, mesh.dim))
        .sum()
}

/// Result of resolution-driven order selection.
pub struct OrderSelection {
    pub orders: OrderAssignment,
    /// Cells whose required order exceeded `p_max` and was clamped down.
    pub clamped_cells: usize,
}

/// Choose per-cell orders so that roughly `dofs_per_wavelength` interpolation
/// points per wavelength are available on each cell: the smallest `p` with
/// `(p + 1) * wavelength / diameter >= dofs_per_wavelength`, clamped to
/// `[p_min, p_max]`.
pub fn assign_orders(
    mesh: &SimplicialMesh,
    wave_speed: &[f64],
    freq_hz: f64,
    dofs_per_wavelength: f64,
    p_min: u32,
    p_max: u32,
) -> Result<OrderSelection> {
    if freq_hz <= 0.0 {
        return Err(Error::Config(format!(
            "frequency must be positive, got {freq_hz}"
        )));
    }
    if p_min > p_max {
        return Err(Error::Config(format!("p_min {p_min} > p_max {p_max}")));
    }
    let mut clamped = 0usize;
    let mut cell_orders = Vec::with_capacity(mesh.n_cells());
    for e in 0..mesh.n_cells() {
        let c = wave_speed[e];
        if c <= 0.0 {
            return Err(Error::Config(format!(
                "wave speed must be positive, cell {e} has {c}"
            )));
        }
        let wavelength = c / freq_hz;
        let h = mesh.cell_diameter(e);
        let required = (dofs_per_wavelength * h / wavelength - 1.0).ceil().max(0.0) as u32;
        if required > p_max {
            clamped += 1;
        }
        cell_orders.push(required.clamp(p_min, p_max));
    }
    Ok(OrderSelection {
        orders: OrderAssignment::from_cell_orders(mesh, cell_orders),
        clamped_cells: clamped,
    })
}
