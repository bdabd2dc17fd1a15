//! Quadrature rules on reference simplexes.
//!
//! Rules are built as collapsed (Duffy) tensor products of one-dimensional
//! Gauss–Jacobi rules, so a rule of any requested polynomial exactness is
//! available up to [`MAX_DEGREE`]. The reference domains are
//! - segment: `t in [0, 1]`, measure 1,
//! - triangle: `{x, y >= 0, x + y <= 1}`, measure 1/2,
//! - tetrahedron: `{x, y, z >= 0, x + y + z <= 1}`, measure 1/6.
//!
//! An `n`-point-per-direction collapsed rule integrates all polynomials of
//! total degree `<= 2n - 1` exactly; the Jacobi weights absorb the Duffy
//! Jacobian so no accuracy is lost near the collapsed vertex.

use crate::{Error, Result};
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Largest supported exactness degree. Requests beyond this are rejected
/// rather than silently degraded.
pub const MAX_DEGREE: u32 = 60;

/// Reference integration domain of a rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Segment,
    Triangle,
    Tetrahedron,
}

impl Domain {
    /// Reference domain for a cell in `dim` dimensions.
    pub fn cell(dim: usize) -> Domain {
        match dim {
            2 => Domain::Triangle,
            3 => Domain::Tetrahedron,
            _ => panic!("unsupported dimension {dim}"),
        }
    }

    /// Reference domain for a face in `dim` dimensions.
    pub fn face(dim: usize) -> Domain {
        match dim {
            2 => Domain::Segment,
            3 => Domain::Triangle,
            _ => panic!("unsupported dimension {dim}"),
        }
    }

    /// Measure of the reference domain.
    pub fn measure(self) -> f64 {
        match self {
            Domain::Segment => 1.0,
            Domain::Triangle => 0.5,
            Domain::Tetrahedron => 1.0 / 6.0,
        }
    }

    /// Spatial dimension of the domain itself.
    pub fn dim(self) -> usize {
        match self {
            Domain::Segment => 1,
            Domain::Triangle => 2,
            Domain::Tetrahedron => 3,
        }
    }
}

/// Points and weights on a reference domain, exact for all polynomials of
/// total degree up to `degree`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub domain: Domain,
    /// Declared exactness degree.
    pub degree: u32,
    /// Points in reference coordinates; unused trailing components are zero.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrate a function given by its values at the rule's points.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }
}

/// Return a rule with exactness at least `degree` on `domain`, cached per
/// (domain, degree).
pub fn quadrature_for(degree: u32, domain: Domain) -> Result<Arc<QuadratureRule>> {
    if degree > MAX_DEGREE {
        return Err(Error::Numerical(format!(
            "quadrature degree {degree} exceeds supported maximum {MAX_DEGREE}"
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<(Domain, u32), Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    if let Some(rule) = map.get(&(domain, degree)) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(build_rule(degree, domain));
    map.insert((domain, degree), rule.clone());
    Ok(rule)
}

fn build_rule(degree: u32, domain: Domain) -> QuadratureRule {
    let n = (degree as usize / 2) + 1; // 2n - 1 >= degree
    let (points, weights) = match domain {
        Domain::Segment => {
            let (t, w) = gauss_jacobi_01(n, 0);
            let points = t.iter().map(|&x| [x, 0.0, 0.0]).collect();
            (points, w)
        }
        Domain::Triangle => {
            let (xi, wxi) = gauss_jacobi_01(n, 0);
            let (eta, weta) = gauss_jacobi_01(n, 1);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (j, &e) in eta.iter().enumerate() {
                for (i, &x) in xi.iter().enumerate() {
                    points.push([x * (1.0 - e), e, 0.0]);
                    weights.push(wxi[i] * weta[j]);
                }
            }
            (points, weights)
        }
        Domain::Tetrahedron => {
            let (xi, wxi) = gauss_jacobi_01(n, 0);
            let (eta, weta) = gauss_jacobi_01(n, 1);
            let (zeta, wzeta) = gauss_jacobi_01(n, 2);
            let mut points = Vec::with_capacity(n * n * n);
            let mut weights = Vec::with_capacity(n * n * n);
            for (k, &z) in zeta.iter().enumerate() {
                for (j, &e) in eta.iter().enumerate() {
                    for (i, &x) in xi.iter().enumerate() {
                        points.push([x * (1.0 - e) * (1.0 - z), e * (1.0 - z), z]);
                        weights.push(wxi[i] * weta[j] * wzeta[k]);
                    }
                }
            }
            (points, weights)
        }
    };
    QuadratureRule {
        domain,
        degree,
        points,
        weights,
    }
}

/// `n`-point Gauss–Jacobi rule on `[0, 1]` for the weight `(1 - t)^alpha`,
/// integer `alpha >= 0` (Golub–Welsch on the symmetric Jacobi matrix).
fn gauss_jacobi_01(n: usize, alpha: u32) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let a = alpha as f64;
    // Monic Jacobi recurrence coefficients on [-1, 1], weight (1-x)^alpha.
    let diag = |k: usize| -> f64 {
        if k == 0 {
            -a / (a + 2.0)
        } else {
            let k = k as f64;
            let s = 2.0 * k + a;
            (-a * a) / (s * (s + 2.0))
        }
    };
    let offdiag_sq = |k: usize| -> f64 {
        let k = k as f64;
        let s = 2.0 * k + a;
        4.0 * k * (k + a) * k * (k + a) / (s * s * (s + 1.0) * (s - 1.0))
    };

    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jac[(k, k)] = diag(k);
    }
    for k in 1..n {
        let b = offdiag_sq(k).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = jac.symmetric_eigen();
    // mu0 = integral of (1-x)^alpha over [-1, 1] = 2^(alpha+1) / (alpha+1)
    let mu0 = 2f64.powi(alpha as i32 + 1) / (a + 1.0);

    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (node, mu0 * v0 * v0)
        })
        .collect();
    rule.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap());

    // Map [-1, 1] to [0, 1]: t = (1+u)/2, weight picks up 2^(-alpha-1).
    let scale = 2f64.powi(-(alpha as i32) - 1);
    let nodes = rule.iter().map(|&(u, _)| 0.5 * (1.0 + u)).collect();
    let weights = rule.iter().map(|&(_, w)| w * scale).collect();
    (nodes, weights)
}
