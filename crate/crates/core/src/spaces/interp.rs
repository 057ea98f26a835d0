//! Interpolants, projections, and pointwise evaluation.

use crate::error::{Error, Result};
use crate::quadrature;

use super::basis::{self, ScalarBasis};
use super::{FEFunction, SpaceId, Spaces};

/// Nodal interpolant into V^k: coefficients are the field values at the
/// Lagrange nodes. Exact for polynomials of degree <= k.
pub fn nodal_interpolant<F>(spaces: &Spaces, v: F) -> FEFunction
where
    F: Fn(f64, f64) -> f64,
{
    let coords = spaces.v_node_coords();
    FEFunction {
        space: SpaceId::V,
        coeffs: coords.iter().map(|c| v(c[0], c[1])).collect(),
    }
}

/// Raviart-Thomas interpolant into D^l: face dofs take the moments of
/// the normal component, interior dofs (l = 1) the component means.
/// Exact for fields already in the space.
pub fn rt_interpolant<Q>(spaces: &Spaces, q: Q) -> FEFunction
where
    Q: Fn(f64, f64) -> [f64; 2],
{
    let l = spaces.config.l;
    let mut fe = spaces.zero(SpaceId::D);
    let frule = quadrature::face_rule();
    for (f, face) in spaces.faces.faces.iter().enumerate() {
        let pa = spaces.mesh.vertices[face.a];
        let pb = spaces.mesh.vertices[face.b];
        for j in 0..=l {
            let mut s = 0.0;
            for (iq, &t) in frule.points.iter().enumerate() {
                let x = pa[0] + t * (pb[0] - pa[0]);
                let y = pa[1] + t * (pb[1] - pa[1]);
                let qv = q(x, y);
                let qn = qv[0] * face.normal[0] + qv[1] * face.normal[1];
                s += frule.weights[iq] * face.length * qn * basis::face_legendre(j, face.length, t);
            }
            fe.coeffs[f * (l + 1) + j] = s;
        }
    }
    if l == 1 {
        let rule = quadrature::reference_triangle_rule();
        let base = spaces.faces.n_faces() * 2;
        for e in 0..spaces.n_elements() {
            let geom = &spaces.geoms[e];
            let jac = 2.0 * geom.area;
            let w0 = 1.0 / geom.area.sqrt();
            let mut s = [0.0, 0.0];
            for (iq, pt) in rule.points.iter().enumerate() {
                let [x, y] = geom.map_ref(pt[0], pt[1]);
                let qv = q(x, y);
                s[0] += rule.weights[iq] * jac * qv[0] * w0;
                s[1] += rule.weights[iq] * jac * qv[1] * w0;
            }
            fe.coeffs[base + 2 * e] = s[0];
            fe.coeffs[base + 2 * e + 1] = s[1];
        }
    }
    fe
}

/// L2-projection of a scalar on a segment of length `len` onto P_l,
/// returned as l+1 coefficients in the orthonormal face family. The
/// input is a function of arc length s in [0, len].
pub fn project_face<F>(phi: F, len: f64, l: usize) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    let frule = quadrature::face_rule();
    (0..=l)
        .map(|j| {
            frule
                .points
                .iter()
                .zip(&frule.weights)
                .map(|(&t, &w)| w * len * phi(t * len) * basis::face_legendre(j, len, t))
                .sum()
        })
        .collect()
}

/// Evaluate a [`project_face`] coefficient vector at arc length s.
pub fn face_poly_eval(coeffs: &[f64], len: f64, s: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, &c)| c * basis::face_legendre(j, len, s / len))
        .sum()
}

/// Elementwise polynomial of a chosen order with per-element orthonormal
/// coefficients; order -1 is the empty space (identically zero).
pub struct ElementPoly {
    pub order: i32,
    pub nb: usize,
    /// nb coefficients per element, element-major.
    pub coeffs: Vec<f64>,
    bases: Vec<ScalarBasis>,
}

impl ElementPoly {
    pub fn eval(&self, e: usize, x: f64, y: f64) -> f64 {
        if self.nb == 0 {
            return 0.0;
        }
        let mut vals = [0.0; 6];
        self.bases[e].eval(x, y, &mut vals[..self.nb]);
        (0..self.nb).map(|j| self.coeffs[e * self.nb + j] * vals[j]).sum()
    }
}

/// Elementwise L2-projection of a field onto piecewise polynomials of
/// the given order. Order -1 yields the zero function by convention.
/// The field closure receives the element id, so discontinuous inputs
/// (like gradients of multiplier functions) are well defined.
pub fn project_element<F>(spaces: &Spaces, field: F, order: i32) -> ElementPoly
where
    F: Fn(usize, f64, f64) -> f64,
{
    let nb = basis::scalar_dim(order);
    let nt = spaces.n_elements();
    if nb == 0 {
        return ElementPoly { order, nb, coeffs: Vec::new(), bases: Vec::new() };
    }
    let rule = quadrature::reference_triangle_rule();
    let mut coeffs = vec![0.0; nt * nb];
    let bases: Vec<ScalarBasis> = if order == spaces.config.m as i32 {
        spaces.w_bases.clone()
    } else {
        spaces
            .geoms
            .iter()
            .map(|g| ScalarBasis::build_from_geom(g, order))
            .collect()
    };
    let mut vals = [0.0; 6];
    for e in 0..nt {
        let geom = &spaces.geoms[e];
        let jac = 2.0 * geom.area;
        for (iq, pt) in rule.points.iter().enumerate() {
            let [x, y] = geom.map_ref(pt[0], pt[1]);
            bases[e].eval(x, y, &mut vals[..nb]);
            let fv = field(e, x, y);
            for j in 0..nb {
                coeffs[e * nb + j] += rule.weights[iq] * jac * fv * vals[j];
            }
        }
    }
    ElementPoly { order, nb, coeffs, bases }
}

/// Projection onto the configured multiplier space W^m, as an FEFunction
/// (the orthonormal element basis makes moments equal coefficients).
pub fn project_w<F>(spaces: &Spaces, field: F) -> FEFunction
where
    F: Fn(usize, f64, f64) -> f64,
{
    let nb = spaces.w_nloc();
    let nt = spaces.n_elements();
    let rule = quadrature::reference_triangle_rule();
    let mut fe = spaces.zero(SpaceId::W);
    let mut vals = [0.0; 6];
    for e in 0..nt {
        let geom = &spaces.geoms[e];
        let jac = 2.0 * geom.area;
        for (iq, pt) in rule.points.iter().enumerate() {
            let [x, y] = geom.map_ref(pt[0], pt[1]);
            spaces.w_bases[e].eval(x, y, &mut vals[..nb]);
            let fv = field(e, x, y);
            for j in 0..nb {
                fe.coeffs[e * nb + j] += rule.weights[iq] * jac * fv * vals[j];
            }
        }
    }
    fe
}

/// Find the element containing a point (first match in element order).
pub fn locate_element(spaces: &Spaces, x: f64, y: f64) -> Result<usize> {
    const TOL: f64 = 1e-10;
    for e in 0..spaces.n_elements() {
        let lam = spaces.geoms[e].barycentric(x, y);
        if lam.iter().all(|&l| l >= -TOL) {
            return Ok(e);
        }
    }
    Err(Error::PointOutsideMesh(x, y))
}

/// Evaluate a scalar function (V or W) at arbitrary points.
pub fn evaluate(spaces: &Spaces, fe: &FEFunction, points: &[[f64; 2]]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|&[x, y]| {
            let e = locate_element(spaces, x, y)?;
            match fe.space {
                SpaceId::V => Ok(spaces.eval_v_on_element(fe, e, x, y)),
                SpaceId::W => Ok(spaces.eval_w_on_element(fe, e, x, y)),
                SpaceId::D => Err(Error::SpaceMismatch(
                    "flux functions are vector-valued; use evaluate_vector".into(),
                )),
            }
        })
        .collect()
}

/// Evaluate a flux (D) function at arbitrary points.
pub fn evaluate_vector(
    spaces: &Spaces,
    fe: &FEFunction,
    points: &[[f64; 2]],
) -> Result<Vec<[f64; 2]>> {
    if fe.space != SpaceId::D {
        return Err(Error::SpaceMismatch("evaluate_vector needs a flux function".into()));
    }
    points
        .iter()
        .map(|&[x, y]| {
            let e = locate_element(spaces, x, y)?;
            Ok(spaces.eval_d_on_element(fe, e, x, y))
        })
        .collect()
}

/// Gradient of a scalar function (V or W) at arbitrary points.
pub fn evaluate_gradient(
    spaces: &Spaces,
    fe: &FEFunction,
    points: &[[f64; 2]],
) -> Result<Vec<[f64; 2]>> {
    points
        .iter()
        .map(|&[x, y]| {
            let e = locate_element(spaces, x, y)?;
            match fe.space {
                SpaceId::V => Ok(spaces.eval_v_grad_on_element(fe, e, x, y)),
                SpaceId::W => Ok(spaces.eval_w_grad_on_element(fe, e, x, y)),
                SpaceId::D => Err(Error::SpaceMismatch(
                    "gradients are defined for scalar functions".into(),
                )),
            }
        })
        .collect()
}

/// Divergence of a flux (D) function at arbitrary points; elementwise a
/// polynomial of degree l.
pub fn evaluate_divergence(
    spaces: &Spaces,
    fe: &FEFunction,
    points: &[[f64; 2]],
) -> Result<Vec<f64>> {
    if fe.space != SpaceId::D {
        return Err(Error::SpaceMismatch("evaluate_divergence needs a flux function".into()));
    }
    points
        .iter()
        .map(|&[x, y]| {
            let e = locate_element(spaces, x, y)?;
            Ok(spaces.eval_d_div_on_element(fe, e, x, y))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_face_table, generate_union_jack, tag_boundary, Rect};
    use crate::spaces::{SpaceConfig, Variant};
    use std::sync::Arc;

    fn demo(k: usize, variant: Variant, nx: usize, ny: usize) -> Spaces {
        let mesh = Arc::new(generate_union_jack(nx, ny, Rect::unit()).unwrap());
        let faces = Arc::new(build_face_table(&mesh).unwrap());
        let tol = 1e-12 * mesh.domain_bbox.diameter();
        let tags = Arc::new(
            tag_boundary(&mesh, &faces, |_, y| y.abs() <= tol, |_, y| y.abs() <= tol).unwrap(),
        );
        Spaces::build(mesh, faces, tags, SpaceConfig::new(k, variant).unwrap()).unwrap()
    }

    #[test]
    fn nodal_interpolant_of_constant_is_all_ones() {
        let s = demo(2, Variant::WellBalanced, 2, 2);
        let fe = nodal_interpolant(&s, |_, _| 1.0);
        assert!(fe.coeffs.iter().all(|&c| (c - 1.0).abs() < 1e-15));
    }

    #[test]
    fn nodal_interpolant_reproduces_affine() {
        let s = demo(1, Variant::InfSup, 3, 3);
        let v = |x: f64, y: f64| x + 2.0 * y;
        let fe = nodal_interpolant(&s, v);
        for e in 0..s.n_elements() {
            let c = s.mesh.centroid(e);
            assert!((s.eval_v_on_element(&fe, e, c[0], c[1]) - v(c[0], c[1])).abs() < 1e-13);
        }
    }

    #[test]
    fn rt_interpolant_reproduces_member_fields() {
        for (k, variant) in [(1, Variant::WellBalanced), (1, Variant::InfSup)] {
            let s = demo(k, variant, 2, 2);
            // (1, 0) and the position field are both in RT^0 and RT^1.
            let cases: [(fn(f64, f64) -> [f64; 2], f64); 2] =
                [(|_, _| [1.0, 0.0], 0.0), (|x, y| [x, y], 2.0)];
            for (q, dv) in cases {
                let fe = rt_interpolant(&s, q);
                for e in 0..s.n_elements() {
                    let c = s.mesh.centroid(e);
                    let got = s.eval_d_on_element(&fe, e, c[0], c[1]);
                    let want = q(c[0], c[1]);
                    assert!(
                        (got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12,
                        "variant {variant:?} e={e}: {got:?} vs {want:?}"
                    );
                    let d = s.eval_d_div_on_element(&fe, e, c[0], c[1]);
                    assert!((d - dv).abs() < 1e-11, "div {d} vs {dv}");
                }
            }
        }
    }

    #[test]
    fn face_projection_examples() {
        // Constant stays constant.
        let c = project_face(|_| 3.25, 0.7, 1);
        for s in [0.0, 0.3, 0.7] {
            assert!((face_poly_eval(&c, 0.7, s) - 3.25).abs() < 1e-13);
        }
        // Mean of s on [0, 1] is 1/2.
        let c = project_face(|s| s, 1.0, 0);
        assert!((face_poly_eval(&c, 1.0, 0.2) - 0.5).abs() < 1e-14);
        // Best-fit line to s^2 on [0, 1] is s - 1/6.
        let c = project_face(|s| s * s, 1.0, 1);
        for s in [0.0, 0.25, 0.5, 1.0] {
            assert!(
                (face_poly_eval(&c, 1.0, s) - (s - 1.0 / 6.0)).abs() < 1e-13,
                "at {s}"
            );
        }
    }

    #[test]
    fn element_projection_examples() {
        let s = demo(1, Variant::InfSup, 2, 1);
        // Constants are reproduced at every order.
        for order in [0, 1, 2] {
            let p = project_element(&s, |_, _, _| 4.5, order);
            let c = s.mesh.centroid(0);
            assert!((p.eval(0, c[0], c[1]) - 4.5).abs() < 1e-13);
        }
        // Order -1 is the zero map.
        let p = project_element(&s, |_, _, _| 123.0, -1);
        assert_eq!(p.eval(0, 0.25, 0.25), 0.0);
        // Projecting x onto constants gives the centroid value.
        let p = project_element(&s, |_, x, _| x, 0);
        for e in 0..s.n_elements() {
            let c = s.mesh.centroid(e);
            assert!((p.eval(e, 0.1, 0.1) - c[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn element_projection_is_idempotent() {
        let s = demo(1, Variant::InfSup, 2, 2);
        let field = |_: usize, x: f64, y: f64| x * x + 0.5 * x * y - y + 0.25;
        for order in [0, 1, 2] {
            let once = project_element(&s, field, order);
            let twice = project_element(&s, |e, x, y| once.eval(e, x, y), order);
            for (a, b) in once.coeffs.iter().zip(&twice.coeffs) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_commutes_with_interpolation() {
        // div(R_h q) = pi_{X,l}(div q) for smooth q.
        for (k, variant) in [(1, Variant::WellBalanced), (1, Variant::InfSup)] {
            let s = demo(k, variant, 2, 2);
            let q = |x: f64, y: f64| [x * x + 2.0 * y, x * y - 3.0 * x];
            let divq = |_: usize, x: f64, _: f64| 3.0 * x;
            let fe = rt_interpolant(&s, q);
            let proj = project_element(&s, divq, s.config.l as i32);
            let rule = quadrature::reference_triangle_rule();
            for e in 0..s.n_elements() {
                for pt in rule.points.iter().step_by(7) {
                    let [x, y] = s.geoms[e].map_ref(pt[0], pt[1]);
                    let got = s.eval_d_div_on_element(&fe, e, x, y);
                    let want = proj.eval(e, x, y);
                    assert!((got - want).abs() < 1e-10, "variant {variant:?}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn point_evaluation_and_outside_error() {
        let s = demo(1, Variant::InfSup, 2, 2);
        let fe = nodal_interpolant(&s, |x, y| x - y);
        let vals = evaluate(&s, &fe, &[[0.3, 0.7], [0.9, 0.1]]).unwrap();
        assert!((vals[0] - (0.3 - 0.7)).abs() < 1e-13);
        assert!((vals[1] - (0.9 - 0.1)).abs() < 1e-13);
        assert!(matches!(
            evaluate(&s, &fe, &[[2.0, 2.0]]),
            Err(Error::PointOutsideMesh(..))
        ));
        let grads = evaluate_gradient(&s, &fe, &[[0.6, 0.6]]).unwrap();
        assert!((grads[0][0] - 1.0).abs() < 1e-12 && (grads[0][1] + 1.0).abs() < 1e-12);
    }
}
