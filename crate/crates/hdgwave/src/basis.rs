//! Nodal polynomial bases on reference simplexes and faces.
//!
//! The Lagrange basis of order `p` is constructed on equispaced reference
//! nodes through an orthonormal modal (Dubiner) basis: with `V[j][k] =
//! psi_k(node_j)`, the Lagrange functions are `l(x) = V^{-T} psi(x)`. The
//! modal detour keeps the construction well conditioned for all supported
//! orders, so the nodal delta property and partition of unity hold to near
//! machine precision.

use crate::quadrature::Domain;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Largest supported polynomial order for cell and face bases.
pub const MAX_ORDER: u32 = 8;

/// Number of coefficients of a total-degree-`order` polynomial on a simplex
/// of dimension `dim` (1 = segment, 2 = triangle, 3 = tetrahedron).
pub fn simplex_dof_count(order: u32, dim: usize) -> usize {
    let p = order as usize;
    match dim {
        1 => p + 1,
        2 => (p + 1) * (p + 2) / 2,
        3 => (p + 1) * (p + 2) * (p + 3) / 6,
        _ => panic!("unsupported simplex dimension {dim}"),
    }
}

/// Volume dof count for a cell of order `order` in a problem of dimension
/// `dim` (2 or 3).
pub fn dof_count(order: u32, dim: usize) -> usize {
    assert!(dim == 2 || dim == 3, "problem dimension must be 2 or 3");
    simplex_dof_count(order, dim)
}

/// Dof count of a face basis in a problem of dimension `dim` (faces are
/// segments in 2D, triangles in 3D).
pub fn face_dof_count(order: u32, dim: usize) -> usize {
    simplex_dof_count(order, dim - 1)
}

/// Nodal Lagrange basis on a reference simplex or face.
pub struct NodalBasis {
    pub domain: Domain,
    pub order: u32,
    /// Reference coordinates of the interpolation nodes.
    pub nodes: Vec<[f64; 3]>,
    /// `l(x) = coeff * psi(x)` where `psi` is the modal basis.
    coeff: DMatrix<f64>,
}

impl NodalBasis {
    pub fn ndof(&self) -> usize {
        self.nodes.len()
    }

    /// Values of all Lagrange functions at a reference point.
    pub fn eval(&self, point: [f64; 3]) -> DVector<f64> {
        let psi = modal_values(self.domain, self.order, point);
        &self.coeff * psi
    }

    /// Gradients of all Lagrange functions at a reference point, one vector
    /// per reference direction (unused directions are zero).
    pub fn grad(&self, point: [f64; 3]) -> [DVector<f64>; 3] {
        let dpsi = modal_gradients(self.domain, self.order, point);
        [
            &self.coeff * &dpsi[0],
            &self.coeff * &dpsi[1],
            &self.coeff * &dpsi[2],
        ]
    }
}

/// Shared handle to the basis for `(domain, order)`, built once and cached.
pub fn basis_for(domain: Domain, order: u32) -> Result<Arc<NodalBasis>> {
    if order > MAX_ORDER {
        return Err(Error::Numerical(format!(
            "polynomial order {order} exceeds supported maximum {MAX_ORDER}"
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<(Domain, u32), Arc<NodalBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    if let Some(b) = map.get(&(domain, order)) {
        return Ok(b.clone());
    }
    let b = Arc::new(build_basis(domain, order));
    map.insert((domain, order), b.clone());
    Ok(b)
}

fn build_basis(domain: Domain, order: u32) -> NodalBasis {
    let nodes = equispaced_nodes(domain, order);
    let ndof = nodes.len();
    let mut vand = DMatrix::<f64>::zeros(ndof, ndof);
    for (j, &node) in nodes.iter().enumerate() {
        let psi = modal_values(domain, order, node);
        for k in 0..ndof {
            vand[(j, k)] = psi[k];
        }
    }
    let coeff = vand
        .transpose()
        .lu()
        .try_inverse()
        .expect("modal Vandermonde is invertible for supported orders");
    NodalBasis {
        domain,
        order,
        nodes,
        coeff,
    }
}

/// Equispaced nodes on the reference simplex; the order-0 basis uses the
/// centroid.
pub fn equispaced_nodes(domain: Domain, order: u32) -> Vec<[f64; 3]> {
    let p = order as usize;
    match domain {
        Domain::Segment => {
            if p == 0 {
                vec![[0.5, 0.0, 0.0]]
            } else {
                (0..=p).map(|i| [i as f64 / p as f64, 0.0, 0.0]).collect()
            }
        }
        Domain::Triangle => {
            if p == 0 {
                vec![[1.0 / 3.0, 1.0 / 3.0, 0.0]]
            } else {
                let mut nodes = Vec::with_capacity(simplex_dof_count(order, 2));
                for j in 0..=p {
                    for i in 0..=(p - j) {
                        nodes.push([i as f64 / p as f64, j as f64 / p as f64, 0.0]);
                    }
                }
                nodes
            }
        }
        Domain::Tetrahedron => {
            if p == 0 {
                vec![[0.25, 0.25, 0.25]]
            } else {
                let mut nodes = Vec::with_capacity(simplex_dof_count(order, 3));
                for k in 0..=p {
                    for j in 0..=(p - k) {
                        for i in 0..=(p - j - k) {
                            nodes.push([
                                i as f64 / p as f64,
                                j as f64 / p as f64,
                                k as f64 / p as f64,
                            ]);
                        }
                    }
                }
                nodes
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Orthonormal modal (Dubiner) basis on the reference simplexes.
// ---------------------------------------------------------------------------

/// Values of the orthonormal modal basis at a reference point.
pub fn modal_values(domain: Domain, order: u32, point: [f64; 3]) -> DVector<f64> {
    let p = order as i32;
    match domain {
        Domain::Segment => {
            let x = 2.0 * point[0] - 1.0;
            let mut out = DVector::zeros((p + 1) as usize);
            for n in 0..=p {
                // sqrt(2) renormalizes from [-1,1] to the unit segment
                out[n as usize] = std::f64::consts::SQRT_2 * jacobi(n, 0, 0, x);
            }
            out
        }
        Domain::Triangle => {
            let (a, b) = collapsed_tri(2.0 * point[0] - 1.0, 2.0 * point[1] - 1.0);
            let mut out = DVector::zeros(simplex_dof_count(order, 2));
            let mut idx = 0;
            for m in 0..=p {
                let fa = jacobi(m, 0, 0, a);
                let pw = (1.0 - b).powi(m);
                for n in 0..=(p - m) {
                    let gb = jacobi(n, 2 * m + 1, 0, b);
                    // 2*sqrt(2) renormalizes to the unit triangle
                    out[idx] = 2.0 * std::f64::consts::SQRT_2 * fa * gb * pw;
                    idx += 1;
                }
            }
            out
        }
        Domain::Tetrahedron => {
            let (a, b, c) = collapsed_tet(
                2.0 * point[0] - 1.0,
                2.0 * point[1] - 1.0,
                2.0 * point[2] - 1.0,
            );
            let mut out = DVector::zeros(simplex_dof_count(order, 3));
            let mut idx = 0;
            for m in 0..=p {
                let fa = jacobi(m, 0, 0, a);
                let pwb = (1.0 - b).powi(m);
                for n in 0..=(p - m) {
                    let gb = jacobi(n, 2 * m + 1, 0, b);
                    let pwc = (1.0 - c).powi(m + n);
                    for l in 0..=(p - m - n) {
                        let hc = jacobi(l, 2 * (m + n) + 2, 0, c);
                        // factor 8 renormalizes to the unit tetrahedron
                        out[idx] = 8.0 * fa * gb * pwb * hc * pwc;
                        idx += 1;
                    }
                }
            }
            out
        }
    }
}

/// Gradients of the modal basis with respect to the reference coordinates.
pub fn modal_gradients(domain: Domain, order: u32, point: [f64; 3]) -> [DVector<f64>; 3] {
    let p = order as i32;
    let ndof = simplex_dof_count(order, domain.dim());
    let mut dx = DVector::zeros(ndof);
    let mut dy = DVector::zeros(ndof);
    let mut dz = DVector::zeros(ndof);
    match domain {
        Domain::Segment => {
            let x = 2.0 * point[0] - 1.0;
            for n in 0..=p {
                dx[n as usize] = 2.0 * std::f64::consts::SQRT_2 * jacobi_deriv(n, 0, 0, x);
            }
        }
        Domain::Triangle => {
            let (a, b) = collapsed_tri(2.0 * point[0] - 1.0, 2.0 * point[1] - 1.0);
            let mut idx = 0;
            for m in 0..=p {
                let fa = jacobi(m, 0, 0, a);
                let dfa = jacobi_deriv(m, 0, 0, a);
                let pw = pow_or_zero(1.0 - b, m);
                let pw1 = pow_or_zero(1.0 - b, m - 1);
                for n in 0..=(p - m) {
                    let gb = jacobi(n, 2 * m + 1, 0, b);
                    let dgb = jacobi_deriv(n, 2 * m + 1, 0, b);
                    // chain rule through the collapsed coordinates; terms with
                    // a negative power carry a structurally zero coefficient
                    let dr = if m == 0 { 0.0 } else { 2.0 * dfa * gb * pw1 };
                    let ds = if m == 0 {
                        fa * dgb
                    } else {
                        dfa * (a + 1.0) * gb * pw1 + fa * dgb * pw - m as f64 * fa * gb * pw1
                    };
                    // 2*sqrt(2) normalization times d(biunit)/d(unit) = 2
                    let k = 4.0 * std::f64::consts::SQRT_2;
                    dx[idx] = k * dr;
                    dy[idx] = k * ds;
                    idx += 1;
                }
            }
        }
        Domain::Tetrahedron => {
            let (a, b, c) = collapsed_tet(
                2.0 * point[0] - 1.0,
                2.0 * point[1] - 1.0,
                2.0 * point[2] - 1.0,
            );
            let mut idx = 0;
            for m in 0..=p {
                let fa = jacobi(m, 0, 0, a);
                let dfa = jacobi_deriv(m, 0, 0, a);
                let pwb = pow_or_zero(1.0 - b, m);
                let pwb1 = pow_or_zero(1.0 - b, m - 1);
                for n in 0..=(p - m) {
                    let gb = jacobi(n, 2 * m + 1, 0, b);
                    let dgb = jacobi_deriv(n, 2 * m + 1, 0, b);
                    let pwc = pow_or_zero(1.0 - c, m + n);
                    let pwc1 = pow_or_zero(1.0 - c, m + n - 1);
                    for l in 0..=(p - m - n) {
                        let hc = jacobi(l, 2 * (m + n) + 2, 0, c);
                        let dhc = jacobi_deriv(l, 2 * (m + n) + 2, 0, c);

                        let dr = if m == 0 {
                            0.0
                        } else {
                            4.0 * dfa * gb * hc * pwb1 * pwc1
                        };
                        let gbracket = if m == 0 {
                            dgb * pwb
                        } else {
                            dgb * pwb - m as f64 * gb * pwb1
                        };
                        let dfa_term = if m == 0 {
                            0.0
                        } else {
                            2.0 * dfa * (a + 1.0) * gb * hc * pwb1 * pwc1
                        };
                        let ds = dfa_term
                            + if m + n == 0 {
                                2.0 * fa * gbracket * hc
                            } else {
                                2.0 * fa * gbracket * hc * pwc1
                            };
                        let hbracket = if m + n == 0 {
                            dhc * pwc
                        } else {
                            dhc * pwc - (m + n) as f64 * hc * pwc1
                        };
                        let dt = dfa_term
                            + if m + n == 0 {
                                fa * gbracket * (b + 1.0) * hc
                            } else {
                                fa * gbracket * (b + 1.0) * hc * pwc1
                            }
                            + fa * gb * pwb * hbracket;

                        // normalization 8 times d(biunit)/d(unit) = 2
                        let k = 16.0;
                        dx[idx] = k * dr;
                        dy[idx] = k * ds;
                        dz[idx] = k * dt;
                        idx += 1;
                    }
                }
            }
        }
    }
    [dx, dy, dz]
}

fn pow_or_zero(base: f64, exp: i32) -> f64 {
    if exp < 0 {
        0.0
    } else {
        base.powi(exp)
    }
}

/// Collapsed coordinates on the biunit triangle; the limit value is used on
/// the collapsed vertex line.
fn collapsed_tri(r: f64, s: f64) -> (f64, f64) {
    let a = if (1.0 - s).abs() > 1e-14 {
        2.0 * (1.0 + r) / (1.0 - s) - 1.0
    } else {
        -1.0
    };
    (a, s)
}

fn collapsed_tet(r: f64, s: f64, t: f64) -> (f64, f64, f64) {
    let a = if (s + t).abs() > 1e-14 {
        -2.0 * (1.0 + r) / (s + t) - 1.0
    } else {
        -1.0
    };
    let b = if (1.0 - t).abs() > 1e-14 {
        2.0 * (1.0 + s) / (1.0 - t) - 1.0
    } else {
        -1.0
    };
    (a, b, t)
}

// ---------------------------------------------------------------------------
// Orthonormal Jacobi polynomials on [-1, 1], integer weight exponents.
// ---------------------------------------------------------------------------

fn factorial(n: i32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn jacobi(n: i32, alpha: i32, beta: i32, x: f64) -> f64 {
    let (af, bf) = (alpha as f64, beta as f64);
    let gamma0 = 2f64.powi(alpha + beta + 1) / (af + bf + 1.0) * factorial(alpha)
        * factorial(beta)
        / factorial(alpha + beta);
    let p0 = 1.0 / gamma0.sqrt();
    if n == 0 {
        return p0;
    }
    let gamma1 = (af + 1.0) * (bf + 1.0) / (af + bf + 3.0) * gamma0;
    let p1 = ((af + bf + 2.0) * x / 2.0 + (af - bf) / 2.0) / gamma1.sqrt();
    if n == 1 {
        return p1;
    }
    let mut aold = 2.0 / (2.0 + af + bf) * ((af + 1.0) * (bf + 1.0) / (af + bf + 3.0)).sqrt();
    let mut pm1 = p0;
    let mut pm0 = p1;
    for i in 1..n {
        let i = i as f64;
        let h1 = 2.0 * i + af + bf;
        let anew = 2.0 / (h1 + 2.0)
            * ((i + 1.0) * (i + 1.0 + af + bf) * (i + 1.0 + af) * (i + 1.0 + bf)
                / ((h1 + 1.0) * (h1 + 3.0)))
                .sqrt();
        let bnew = -(af * af - bf * bf) / (h1 * (h1 + 2.0));
        let pnew = (-aold * pm1 + (x - bnew) * pm0) / anew;
        pm1 = pm0;
        pm0 = pnew;
        aold = anew;
    }
    pm0
}

fn jacobi_deriv(n: i32, alpha: i32, beta: i32, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        let nf = n as f64;
        (nf * (nf + alpha as f64 + beta as f64 + 1.0)).sqrt()
            * jacobi(n - 1, alpha + 1, beta + 1, x)
    }
}
