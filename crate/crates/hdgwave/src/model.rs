//! Medium models: wave speed and density as per-cell polynomial coefficients.
//!
//! The default representation is piecewise constant (model order 0, one value
//! per cell); higher orders store nodal coefficients of the cell basis of
//! that order. Density is carried along but held fixed by the inversion.

use crate::basis::{basis_for, simplex_dof_count};
use crate::mesh::SimplicialMesh;
use crate::quadrature::Domain;
use crate::{Error, Result};

/// Wave speed and density fields with box bounds on the speed.
#[derive(Clone, Debug)]
pub struct ModelState {
    pub dim: usize,
    pub n_cells: usize,
    /// Polynomial order of the model representation per cell.
    pub order: u32,
    /// Wave speed coefficients, `n_cells * dof_per_cell`, in m/s.
    pub c: Vec<f64>,
    /// Density coefficients, same layout, in kg/m^3.
    pub rho: Vec<f64>,
    /// Box bounds `[c_min, c_max]` enforced on accepted inversion updates.
    pub c_bounds: (f64, f64),
}

impl ModelState {
    /// Homogeneous piecewise-constant model.
    pub fn uniform(mesh: &SimplicialMesh, c: f64, rho: f64) -> ModelState {
        ModelState {
            dim: mesh.dim,
            n_cells: mesh.n_cells(),
            order: 0,
            c: vec![c; mesh.n_cells()],
            rho: vec![rho; mesh.n_cells()],
            c_bounds: (f64::MIN_POSITIVE, f64::MAX),
        }
    }

    /// Coefficients per cell for this model order.
    pub fn dof_per_cell(&self) -> usize {
        simplex_dof_count(self.order, self.dim)
    }

    /// Total number of model dof (the dimension of gradients).
    pub fn ndof(&self) -> usize {
        self.n_cells * self.dof_per_cell()
    }

    pub fn cell_coeffs<'a>(&self, field: &'a [f64], e: usize) -> &'a [f64] {
        let n = self.dof_per_cell();
        &field[e * n..(e + 1) * n]
    }

    fn eval(&self, field: &[f64], e: usize, ref_pt: [f64; 3]) -> f64 {
        if self.order == 0 {
            return field[e];
        }
        let basis = basis_for(Domain::cell(self.dim), self.order).expect("supported model order");
        let vals = basis.eval(ref_pt);
        self.cell_coeffs(field, e)
            .iter()
            .zip(vals.iter())
            .map(|(c, v)| c * v)
            .sum()
    }

    /// Wave speed at a reference point of cell `e`.
    pub fn c_at(&self, e: usize, ref_pt: [f64; 3]) -> f64 {
        self.eval(&self.c, e, ref_pt)
    }

    /// Density at a reference point of cell `e`.
    pub fn rho_at(&self, e: usize, ref_pt: [f64; 3]) -> f64 {
        self.eval(&self.rho, e, ref_pt)
    }

    /// Inverse bulk modulus `1/kappa = 1/(rho c^2)` at a reference point.
    pub fn kappa_inv_at(&self, e: usize, ref_pt: [f64; 3]) -> f64 {
        let c = self.c_at(e, ref_pt);
        let rho = self.rho_at(e, ref_pt);
        1.0 / (rho * c * c)
    }

    /// Mean of the coefficients of a cell; exact for order 0, used for the
    /// per-cell stabilization and absorbing coefficients.
    pub fn cell_mean_rho(&self, e: usize) -> f64 {
        let co = self.cell_coeffs(&self.rho, e);
        co.iter().sum::<f64>() / co.len() as f64
    }

    pub fn cell_mean_c(&self, e: usize) -> f64 {
        let co = self.cell_coeffs(&self.c, e);
        co.iter().sum::<f64>() / co.len() as f64
    }

    pub fn mean_wave_speeds(&self) -> Vec<f64> {
        (0..self.n_cells).map(|e| self.cell_mean_c(e)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.len() != self.ndof() || self.rho.len() != self.ndof() {
            return Err(Error::Config(format!(
                "model coefficient count {} does not match {} cells at order {}",
                self.c.len(),
                self.n_cells,
                self.order
            )));
        }
        if self.c.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::Config("wave speed must be finite and positive".into()));
        }
        if self.rho.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::Config("density must be finite and positive".into()));
        }
        Ok(())
    }

    /// Project the speed coefficients onto the box bounds.
    pub fn clamp_to_bounds(&mut self) {
        let (lo, hi) = self.c_bounds;
        for v in &mut self.c {
            *v = v.clamp(lo, hi);
        }
    }

    /// Transfer this model to another mesh: every model node of the target
    /// evaluates the source at the containing cell, falling back to the
    /// nearest source-cell centroid outside the source mesh.
    pub fn transfer_to(
        &self,
        src_mesh: &SimplicialMesh,
        dst_mesh: &SimplicialMesh,
        dst_order: u32,
    ) -> Result<ModelState> {
        let dst_dof = simplex_dof_count(dst_order, dst_mesh.dim);
        let nodes: Vec<[f64; 3]> = if dst_order == 0 {
            vec![match dst_mesh.dim {
                2 => [1.0 / 3.0, 1.0 / 3.0, 0.0],
                _ => [0.25, 0.25, 0.25],
            }]
        } else {
            basis_for(Domain::cell(dst_mesh.dim), dst_order)?
                .nodes
                .clone()
        };
        let mut c = Vec::with_capacity(dst_mesh.n_cells() * dst_dof);
        let mut rho = Vec::with_capacity(dst_mesh.n_cells() * dst_dof);
        for e in 0..dst_mesh.n_cells() {
            for &node in &nodes {
                let x = dst_mesh.ref_to_phys(e, node);
                let (src_cell, src_ref) = match src_mesh.find_cell(x) {
                    Some(hit) => hit,
                    None => {
                        let nearest = (0..src_mesh.n_cells())
                            .min_by(|&a, &b| {
                                let da = dist2(src_mesh.cell_centroid(a), x);
                                let db = dist2(src_mesh.cell_centroid(b), x);
                                da.partial_cmp(&db).unwrap()
                            })
                            .ok_or_else(|| Error::Mesh("empty source mesh".into()))?;
                        let centroid_ref = match src_mesh.dim {
                            2 => [1.0 / 3.0, 1.0 / 3.0, 0.0],
                            _ => [0.25, 0.25, 0.25],
                        };
                        (nearest, centroid_ref)
                    }
                };
                c.push(self.c_at(src_cell, src_ref));
                rho.push(self.rho_at(src_cell, src_ref));
            }
        }
        Ok(ModelState {
            dim: dst_mesh.dim,
            n_cells: dst_mesh.n_cells(),
            order: dst_order,
            c,
            rho,
            c_bounds: self.c_bounds,
        })
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|d| (a[d] - b[d]) * (a[d] - b[d])).sum()
}
