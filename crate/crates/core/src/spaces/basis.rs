//! Element-local basis construction and evaluation.
//!
//! Three families are built per element:
//! * Lagrange shape functions of order k in barycentric form (continuous
//!   across elements by construction),
//! * a Raviart-Thomas basis of order l obtained as the dual basis of the
//!   global degree-of-freedom functionals (face-normal moments against an
//!   orthonormal polynomial family on each face, plus interior moments
//!   for l >= 1) — using the global face normal in the functionals makes
//!   the normal component agree across elements with no sign bookkeeping,
//! * an L2-orthonormal scalar basis of order m for the discontinuous
//!   space, via modified Gram-Schmidt over scaled monomials, so that the
//!   element mass matrix is the identity.

use crate::error::Result;
use crate::linalg;
use crate::mesh::{FaceTable, Mesh};
use crate::quadrature;

/// Geometry of one triangle, cached for basis work.
#[derive(Debug, Clone)]
pub(crate) struct ElemGeom {
    pub coords: [[f64; 2]; 3],
    pub area: f64,
    pub center: [f64; 2],
    pub diam: f64,
    /// Gradients of the barycentric coordinates (constant on the element).
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElemGeom {
    pub fn new(mesh: &Mesh, e: usize) -> ElemGeom {
        let coords = mesh.triangle_coords(e);
        let area = mesh.area(e);
        let center = mesh.centroid(e);
        let diam = mesh.diameter(e);
        let [p0, p1, p2] = coords;
        let two_a = 2.0 * area;
        // lambda_i = (a_i + b_i x + c_i y); closed form from the cyclic corners.
        let grad_lambda = [
            [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
            [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
            [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
        ];
        ElemGeom { coords, area, center, diam, grad_lambda }
    }

    /// Map a reference point (on the triangle (0,0),(1,0),(0,1)) to
    /// physical coordinates.
    pub fn map_ref(&self, xi: f64, eta: f64) -> [f64; 2] {
        let [p0, p1, p2] = self.coords;
        [
            p0[0] + (p1[0] - p0[0]) * xi + (p2[0] - p0[0]) * eta,
            p0[1] + (p1[1] - p0[1]) * xi + (p2[1] - p0[1]) * eta,
        ]
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, x: f64, y: f64) -> [f64; 3] {
        let mut lam = [0.0; 3];
        for i in 0..3 {
            let g = self.grad_lambda[i];
            // lambda_i is affine and equals 1 at corner i: anchor there.
            let pi = self.coords[i];
            lam[i] = 1.0 + g[0] * (x - pi[0]) + g[1] * (y - pi[1]);
        }
        lam
    }
}

/// Number of local Lagrange shape functions for order k.
pub(crate) fn lagrange_nloc(k: usize) -> usize {
    match k {
        1 => 3,
        2 => 6,
        _ => panic!("Lagrange order {k} not supported (k must be 1 or 2)"),
    }
}

/// Values of the local Lagrange shape functions at barycentric `lam`.
///
/// Order: the 3 vertex functions, then (k = 2) the 3 edge functions,
/// edge i opposite vertex i.
pub(crate) fn lagrange_values(k: usize, lam: [f64; 3], out: &mut [f64]) {
    match k {
        1 => out[..3].copy_from_slice(&lam),
        2 => {
            for i in 0..3 {
                out[i] = lam[i] * (2.0 * lam[i] - 1.0);
            }
            for i in 0..3 {
                out[3 + i] = 4.0 * lam[(i + 1) % 3] * lam[(i + 2) % 3];
            }
        }
        _ => panic!("Lagrange order {k} not supported"),
    }
}

/// Gradients of the local Lagrange shape functions.
pub(crate) fn lagrange_gradients(
    k: usize,
    lam: [f64; 3],
    grad_lambda: &[[f64; 2]; 3],
    out: &mut [[f64; 2]],
) {
    match k {
        1 => out[..3].copy_from_slice(grad_lambda),
        2 => {
            for i in 0..3 {
                let f = 4.0 * lam[i] - 1.0;
                out[i] = [f * grad_lambda[i][0], f * grad_lambda[i][1]];
            }
            for i in 0..3 {
                let a = (i + 1) % 3;
                let b = (i + 2) % 3;
                out[3 + i] = [
                    4.0 * (lam[a] * grad_lambda[b][0] + lam[b] * grad_lambda[a][0]),
                    4.0 * (lam[a] * grad_lambda[b][1] + lam[b] * grad_lambda[a][1]),
                ];
            }
        }
        _ => panic!("Lagrange order {k} not supported"),
    }
}

/// Orthonormal polynomial family on a face, parametrized by t in [0, 1]
/// from the face's stored start vertex; orthonormal in arc length.
pub(crate) fn face_legendre(j: usize, h_f: f64, t: f64) -> f64 {
    match j {
        0 => 1.0 / h_f.sqrt(),
        1 => (12.0f64).sqrt() / h_f.sqrt() * (t - 0.5),
        _ => panic!("face moment order {j} not supported (l must be 0 or 1)"),
    }
}

/// Monomial exponents for scalar polynomials up to a given order,
/// in the fixed order 1, x, y, x^2, xy, y^2.
pub(crate) const SCALAR_EXPONENTS: [(i32, i32); 6] =
    [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

/// Dimension of P_order on a triangle; order -1 gives 0 (empty space).
pub(crate) fn scalar_dim(order: i32) -> usize {
    if order < 0 {
        0
    } else {
        ((order + 1) * (order + 2) / 2) as usize
    }
}

/// L2-orthonormal scalar basis on one element, expressed over scaled
/// monomials ((x, y) - center) / diam.
#[derive(Debug, Clone)]
pub(crate) struct ScalarBasis {
    pub nb: usize,
    /// coeff[j * nb + beta]: weight of monomial beta in basis function j.
    pub coeff: Vec<f64>,
    pub center: [f64; 2],
    pub scale: f64,
}

impl ScalarBasis {
    pub fn build_from_geom(geom: &ElemGeom, order: i32) -> ScalarBasis {
        let nb = scalar_dim(order);
        let center = geom.center;
        let scale = geom.diam;
        let mut basis = ScalarBasis { nb, coeff: vec![0.0; nb * nb], center, scale };
        if nb == 0 {
            return basis;
        }
        let rule = quadrature::reference_triangle_rule();
        let jac = 2.0 * geom.area;
        // Monomial values at the mapped quadrature points.
        let nq = rule.len();
        let mut mono = vec![0.0; nq * nb];
        for (q, pt) in rule.points.iter().enumerate() {
            let [x, y] = geom.map_ref(pt[0], pt[1]);
            let xs = (x - center[0]) / scale;
            let ys = (y - center[1]) / scale;
            for (beta, &(a, b)) in SCALAR_EXPONENTS[..nb].iter().enumerate() {
                mono[q * nb + beta] = xs.powi(a) * ys.powi(b);
            }
        }
        let dot = |ca: &[f64], cb: &[f64]| -> f64 {
            let mut s = 0.0;
            for q in 0..nq {
                let mut va = 0.0;
                let mut vb = 0.0;
                for beta in 0..nb {
                    va += ca[beta] * mono[q * nb + beta];
                    vb += cb[beta] * mono[q * nb + beta];
                }
                s += rule.weights[q] * jac * va * vb;
            }
            s
        };
        // Modified Gram-Schmidt over the monomial coefficients.
        let mut rows: Vec<Vec<f64>> = (0..nb)
            .map(|j| {
                let mut r = vec![0.0; nb];
                r[j] = 1.0;
                r
            })
            .collect();
        for j in 0..nb {
            for i in 0..j {
                let proj = dot(&rows[j], &rows[i]);
                let (head, tail) = rows.split_at_mut(j);
                for beta in 0..nb {
                    tail[0][beta] -= proj * head[i][beta];
                }
            }
            let norm = dot(&rows[j], &rows[j]).sqrt();
            assert!(norm > 0.0, "degenerate element in scalar basis construction");
            for beta in 0..nb {
                rows[j][beta] /= norm;
            }
        }
        for j in 0..nb {
            basis.coeff[j * nb..(j + 1) * nb].copy_from_slice(&rows[j]);
        }
        basis
    }

    /// Values of all basis functions at a physical point.
    pub fn eval(&self, x: f64, y: f64, out: &mut [f64]) {
        let nb = self.nb;
        let xs = (x - self.center[0]) / self.scale;
        let ys = (y - self.center[1]) / self.scale;
        let mut mono = [0.0; 6];
        for (beta, &(a, b)) in SCALAR_EXPONENTS[..nb].iter().enumerate() {
            mono[beta] = xs.powi(a) * ys.powi(b);
        }
        for j in 0..nb {
            let mut v = 0.0;
            for beta in 0..nb {
                v += self.coeff[j * nb + beta] * mono[beta];
            }
            out[j] = v;
        }
    }

    /// Gradients of all basis functions at a physical point.
    pub fn eval_grad(&self, x: f64, y: f64, out: &mut [[f64; 2]]) {
        let nb = self.nb;
        let xs = (x - self.center[0]) / self.scale;
        let ys = (y - self.center[1]) / self.scale;
        let inv = 1.0 / self.scale;
        let mut dmono = [[0.0; 2]; 6];
        for (beta, &(a, b)) in SCALAR_EXPONENTS[..nb].iter().enumerate() {
            let dx = if a > 0 { a as f64 * xs.powi(a - 1) * ys.powi(b) * inv } else { 0.0 };
            let dy = if b > 0 { b as f64 * xs.powi(a) * ys.powi(b - 1) * inv } else { 0.0 };
            dmono[beta] = [dx, dy];
        }
        for j in 0..nb {
            let mut g = [0.0, 0.0];
            for beta in 0..nb {
                g[0] += self.coeff[j * nb + beta] * dmono[beta][0];
                g[1] += self.coeff[j * nb + beta] * dmono[beta][1];
            }
            out[j] = g;
        }
    }
}

/// Number of local Raviart-Thomas basis functions for order l.
pub(crate) fn rt_nloc(l: usize) -> usize {
    match l {
        0 => 3,
        1 => 8,
        _ => panic!("Raviart-Thomas order {l} not supported (l must be 0 or 1)"),
    }
}

/// Monomial vector fields spanning RT^l over scaled coordinates:
/// l = 0: (1,0), (0,1), (xs, ys);
/// l = 1: (1,0), (0,1), (xs,0), (ys,0), (0,xs), (0,ys), xs(xs,ys), ys(xs,ys).
fn rt_monomial(l: usize, beta: usize, xs: f64, ys: f64) -> [f64; 2] {
    match (l, beta) {
        (0, 0) => [1.0, 0.0],
        (0, 1) => [0.0, 1.0],
        (0, 2) => [xs, ys],
        (1, 0) => [1.0, 0.0],
        (1, 1) => [0.0, 1.0],
        (1, 2) => [xs, 0.0],
        (1, 3) => [ys, 0.0],
        (1, 4) => [0.0, xs],
        (1, 5) => [0.0, ys],
        (1, 6) => [xs * xs, xs * ys],
        (1, 7) => [xs * ys, ys * ys],
        _ => panic!("no RT^{l} monomial {beta}"),
    }
}

/// Divergence of [`rt_monomial`] in physical coordinates (scale = diam).
fn rt_monomial_div(l: usize, beta: usize, xs: f64, ys: f64, inv_scale: f64) -> f64 {
    match (l, beta) {
        (0, 0) | (0, 1) => 0.0,
        (0, 2) => 2.0 * inv_scale,
        (1, 0) | (1, 1) | (1, 3) | (1, 4) => 0.0,
        (1, 2) | (1, 5) => inv_scale,
        (1, 6) => 3.0 * xs * inv_scale,
        (1, 7) => 3.0 * ys * inv_scale,
        _ => panic!("no RT^{l} monomial {beta}"),
    }
}

/// Raviart-Thomas dual basis on one element.
///
/// Local functional order: faces in local order (the face opposite local
/// vertex i), each contributing l+1 moments against [`face_legendre`]
/// using the face's own global normal and parametrization, then for
/// l = 1 the two interior moments against the constant `1/sqrt(area)`
/// in each Cartesian component.
#[derive(Debug, Clone)]
pub(crate) struct RtBasis {
    pub l: usize,
    pub nloc: usize,
    /// coeff[alpha * nloc + beta]: weight of monomial beta in dual
    /// function alpha.
    pub coeff: Vec<f64>,
    pub center: [f64; 2],
    pub scale: f64,
}

impl RtBasis {
    pub fn build(mesh: &Mesh, faces: &FaceTable, e: usize, l: usize) -> Result<RtBasis> {
        let geom = ElemGeom::new(mesh, e);
        let nloc = rt_nloc(l);
        let center = geom.center;
        let scale = geom.diam;
        let frule = quadrature::face_rule();
        // d[i * nloc + beta] = functional_i(monomial_beta)
        let mut d = vec![0.0; nloc * nloc];
        for loc in 0..3 {
            let f = faces.elem_faces[e][loc];
            let face = &faces.faces[f];
            let pa = mesh.vertices[face.a];
            let pb = mesh.vertices[face.b];
            for j in 0..=l {
                let row = loc * (l + 1) + j;
                for beta in 0..nloc {
                    let mut s = 0.0;
                    for (q, &t) in frule.points.iter().enumerate() {
                        let x = pa[0] + t * (pb[0] - pa[0]);
                        let y = pa[1] + t * (pb[1] - pa[1]);
                        let xs = (x - center[0]) / scale;
                        let ys = (y - center[1]) / scale;
                        let m = rt_monomial(l, beta, xs, ys);
                        let qn = m[0] * face.normal[0] + m[1] * face.normal[1];
                        s += frule.weights[q] * face.length * qn * face_legendre(j, face.length, t);
                    }
                    d[row * nloc + beta] = s;
                }
            }
        }
        if l == 1 {
            let rule = quadrature::reference_triangle_rule();
            let jac = 2.0 * geom.area;
            let w0 = 1.0 / geom.area.sqrt();
            for comp in 0..2 {
                let row = 6 + comp;
                for beta in 0..nloc {
                    let mut s = 0.0;
                    for (q, pt) in rule.points.iter().enumerate() {
                        let [x, y] = geom.map_ref(pt[0], pt[1]);
                        let xs = (x - center[0]) / scale;
                        let ys = (y - center[1]) / scale;
                        let m = rt_monomial(l, beta, xs, ys);
                        s += rule.weights[q] * jac * m[comp] * w0;
                    }
                    d[row * nloc + beta] = s;
                }
            }
        }
        // Dual basis: C = D^{-1}, column alpha holds function alpha.
        let c = linalg::invert(&d, nloc)?;
        let mut coeff = vec![0.0; nloc * nloc];
        for alpha in 0..nloc {
            for beta in 0..nloc {
                coeff[alpha * nloc + beta] = c[beta * nloc + alpha];
            }
        }
        Ok(RtBasis { l, nloc, coeff, center, scale })
    }

    /// Vector values of all local basis functions at a physical point.
    pub fn eval(&self, x: f64, y: f64, out: &mut [[f64; 2]]) {
        let xs = (x - self.center[0]) / self.scale;
        let ys = (y - self.center[1]) / self.scale;
        let mut mono = [[0.0; 2]; 8];
        for beta in 0..self.nloc {
            mono[beta] = rt_monomial(self.l, beta, xs, ys);
        }
        for alpha in 0..self.nloc {
            let mut v = [0.0, 0.0];
            for beta in 0..self.nloc {
                v[0] += self.coeff[alpha * self.nloc + beta] * mono[beta][0];
                v[1] += self.coeff[alpha * self.nloc + beta] * mono[beta][1];
            }
            out[alpha] = v;
        }
    }

    /// Divergences of all local basis functions at a physical point.
    pub fn eval_div(&self, x: f64, y: f64, out: &mut [f64]) {
        let xs = (x - self.center[0]) / self.scale;
        let ys = (y - self.center[1]) / self.scale;
        let inv = 1.0 / self.scale;
        let mut dmono = [0.0; 8];
        for beta in 0..self.nloc {
            dmono[beta] = rt_monomial_div(self.l, beta, xs, ys, inv);
        }
        for alpha in 0..self.nloc {
            let mut v = 0.0;
            for beta in 0..self.nloc {
                v += self.coeff[alpha * self.nloc + beta] * dmono[beta];
            }
            out[alpha] = v;
        }
    }
}
