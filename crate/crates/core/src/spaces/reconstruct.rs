//! Gradient reconstruction and the Neumann data corrector.
//!
//! Both return flux-space functions defined purely through their dofs:
//! the reconstruction turns jumps of a discontinuous scalar into a flux
//! with zero normal trace on the data-carrying boundary part, and the
//! corrector injects a Neumann perturbation as a flux supported on that
//! part alone.

use crate::error::{Error, Result};
use crate::quadrature;

use super::basis;
use super::{FEFunction, SpaceId, Spaces};

/// Reconstruction of the gradient of a multiplier-space function x_h as
/// a flux with zero normal component on data faces.
///
/// For every face not carrying Neumann data, the face moments of the
/// normal component equal the moments of `h_F^{-1} [x_h]`, where the
/// jump is left-minus-right across interior faces and the trace itself
/// on boundary faces; for l = 1 the interior moments equal those of
/// `-grad x_h`. Dofs on Neumann-data faces stay zero.
pub fn gradient_reconstruction(spaces: &Spaces, x_h: &FEFunction) -> Result<FEFunction> {
    if x_h.space != SpaceId::W {
        return Err(Error::SpaceMismatch(
            "gradient reconstruction expects a multiplier-space function".into(),
        ));
    }
    if x_h.coeffs.len() != spaces.w.total {
        return Err(Error::SpaceMismatch(format!(
            "multiplier length {} does not match the space ({} dofs)",
            x_h.coeffs.len(),
            spaces.w.total
        )));
    }
    let l = spaces.config.l;
    let mut eta = spaces.zero(SpaceId::D);
    let frule = quadrature::face_rule();
    for (f, face) in spaces.faces.faces.iter().enumerate() {
        if spaces.tags.sigma_neumann(f) {
            continue;
        }
        let pa = spaces.mesh.vertices[face.a];
        let pb = spaces.mesh.vertices[face.b];
        for j in 0..=l {
            let mut s = 0.0;
            for (iq, &t) in frule.points.iter().enumerate() {
                let x = pa[0] + t * (pb[0] - pa[0]);
                let y = pa[1] + t * (pb[1] - pa[1]);
                let mut jump = spaces.eval_w_on_element(x_h, face.left, x, y);
                if let Some(r) = face.right {
                    jump -= spaces.eval_w_on_element(x_h, r, x, y);
                }
                // The h_F^{-1} weight cancels the face length of the
                // measure: int_F h^-1 jump L_j = sum w * jump * L_j.
                s += frule.weights[iq] * jump * basis::face_legendre(j, face.length, t);
            }
            eta.coeffs[f * (l + 1) + j] = s;
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
                let g = spaces.eval_w_grad_on_element(x_h, e, x, y);
                s[0] -= rule.weights[iq] * jac * g[0] * w0;
                s[1] -= rule.weights[iq] * jac * g[1] * w0;
            }
            eta.coeffs[base + 2 * e] = s[0];
            eta.coeffs[base + 2 * e + 1] = s[1];
        }
    }
    Ok(eta)
}

/// Corrector flux for a Neumann data perturbation: face moments of the
/// perturbation on data-carrying faces, zero everywhere else.
pub fn neumann_corrector<P>(spaces: &Spaces, dpsi: P) -> FEFunction
where
    P: Fn(f64, f64) -> f64,
{
    spaces.neumann_lift(dpsi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_face_table, tag_boundary, Mesh, Rect};
    use crate::spaces::{SpaceConfig, Spaces, Variant};
    use std::sync::Arc;

    /// Unit square split along the diagonal (1,2): two triangles, the
    /// bottom edge carries both data.
    fn two_triangle_spaces(k: usize, variant: Variant) -> Spaces {
        let mesh = Arc::new(Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            triangles: vec![[0, 1, 2], [1, 3, 2]],
            domain_bbox: Rect::unit(),
        });
        let faces = Arc::new(build_face_table(&mesh).unwrap());
        let tags = Arc::new(
            tag_boundary(&mesh, &faces, |_, y| y.abs() <= 1e-12, |_, y| y.abs() <= 1e-12)
                .unwrap(),
        );
        Spaces::build(mesh, faces, tags, SpaceConfig::new(k, variant).unwrap()).unwrap()
    }

    #[test]
    fn zero_multiplier_gives_zero_reconstruction() {
        let s = two_triangle_spaces(1, Variant::InfSup);
        let x = s.zero(SpaceId::W);
        let eta = gradient_reconstruction(&s, &x).unwrap();
        assert!(eta.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn characteristic_function_jump_moment() {
        // x_h = 1 on the lower-left triangle, 0 on the other; l = 0.
        let s = two_triangle_spaces(1, Variant::WellBalanced);
        assert_eq!(s.config.l, 0);
        let mut x = s.zero(SpaceId::W);
        // Orthonormal constant is 1/sqrt(area): coefficient sqrt(area).
        let area0 = s.mesh.area(0);
        let nb = s.w_nloc();
        x.coeffs[0 * nb] = area0.sqrt();
        let eta = gradient_reconstruction(&s, &x).unwrap();
        for (f, face) in s.faces.faces.iter().enumerate() {
            let got = eta.coeffs[f];
            if s.tags.sigma_neumann(f) {
                assert_eq!(got, 0.0, "data-face dof must stay zero");
            } else if face.right.is_some() {
                // Interior (diagonal) face: jump = 1 seen from the left
                // element 0, moment h_F^{-1} * sqrt(h_F) = 1/sqrt(h_F).
                let want = 1.0 / face.length.sqrt();
                assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            } else if face.left == 0 {
                // Boundary trace of x_h = 1 on element 0's faces.
                let want = 1.0 / face.length.sqrt();
                assert!((got - want).abs() < 1e-12);
            } else {
                assert!(got.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn reconstruction_reproduces_prescribed_moments() {
        // Extracting the dof moments of eta back must return the jump
        // moments exactly, for a non-trivial multiplier and l = 1.
        let s = two_triangle_spaces(1, Variant::InfSup);
        assert_eq!(s.config.l, 1);
        let mut x = s.zero(SpaceId::W);
        for (i, c) in x.coeffs.iter_mut().enumerate() {
            *c = (0.3 + 0.7 * i as f64).sin(); // deterministic, non-symmetric
        }
        let eta = gradient_reconstruction(&s, &x).unwrap();
        let frule = quadrature::face_rule();
        for (f, face) in s.faces.faces.iter().enumerate() {
            let pa = s.mesh.vertices[face.a];
            let pb = s.mesh.vertices[face.b];
            for j in 0..=1usize {
                let mut want = 0.0;
                let mut got = 0.0;
                for (iq, &t) in frule.points.iter().enumerate() {
                    let xq = pa[0] + t * (pb[0] - pa[0]);
                    let yq = pa[1] + t * (pb[1] - pa[1]);
                    let leg = basis::face_legendre(j, face.length, t);
                    let en = {
                        let v = s.eval_d_on_element(&eta, face.left, xq, yq);
                        v[0] * face.normal[0] + v[1] * face.normal[1]
                    };
                    got += frule.weights[iq] * face.length * en * leg;
                    if !s.tags.sigma_neumann(f) {
                        let mut jump = s.eval_w_on_element(&x, face.left, xq, yq);
                        if let Some(r) = face.right {
                            jump -= s.eval_w_on_element(&x, r, xq, yq);
                        }
                        want += frule.weights[iq] * jump * leg;
                    }
                }
                assert!(
                    (got - want).abs() < 1e-11,
                    "face {f} moment {j}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn corrector_of_zero_is_zero_and_constant_gives_sqrt_length() {
        let s = two_triangle_spaces(1, Variant::WellBalanced);
        let zero = neumann_corrector(&s, |_, _| 0.0);
        assert!(zero.coeffs.iter().all(|&c| c == 0.0));
        let dp = neumann_corrector(&s, |_, _| 1.0);
        for (f, face) in s.faces.faces.iter().enumerate() {
            let got = dp.coeffs[f];
            if s.tags.sigma_neumann(f) {
                // Moment of 1 against the orthonormal constant 1/sqrt(h).
                assert!((got - face.length.sqrt()).abs() < 1e-13);
            } else {
                assert_eq!(got, 0.0);
            }
        }
    }
}
