//! Reproducible multiplicative data noise.
//!
//! The perturbed Neumann datum is `(1 + delta * u_rand) * psi`, where
//! `u_rand` is a Lagrange-space function whose dofs are independent
//! uniform [0, 1) draws from a counter-based generator seeded by the
//! run seed — identical seeds give identical noise on any platform.
//! A nonzero volume-source amplitude draws its own field from seed + 1.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::quadrature;

use super::basis;
use super::{FEFunction, SpaceId, Spaces};

/// Amplitudes and seed of the multiplicative noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    /// Relative amplitude on the Neumann datum.
    pub delta: f64,
    /// Relative amplitude on the volume source.
    pub delta_f: f64,
    pub seed: u64,
}

impl Perturbation {
    pub fn none() -> Perturbation {
        Perturbation { delta: 0.0, delta_f: 0.0, seed: 0 }
    }

    pub fn is_clean(&self) -> bool {
        self.delta == 0.0 && self.delta_f == 0.0
    }
}

/// A Lagrange-space function with independent uniform [0, 1) dofs, in
/// dof order.
pub fn random_v_field(spaces: &Spaces, seed: u64) -> FEFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..spaces.v.total)
        .map(|_| (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
        .collect();
    FEFunction { space: SpaceId::V, coeffs }
}

/// Neumann lifting of the perturbed datum `(1 + delta u_rand) psi`.
/// With amplitude zero this is exactly the clean lifting (no generator
/// is consumed).
pub fn perturbed_neumann_lift<P>(spaces: &Spaces, psi: P, pert: &Perturbation) -> FEFunction
where
    P: Fn(f64, f64) -> f64,
{
    if pert.delta == 0.0 {
        return spaces.neumann_lift(psi);
    }
    let u_rand = random_v_field(spaces, pert.seed);
    let l = spaces.config.l;
    let frule = quadrature::face_rule();
    let mut fe = spaces.zero(SpaceId::D);
    for &f in &spaces.faces.boundary {
        if !spaces.tags.sigma_neumann(f) {
            continue;
        }
        let face = &spaces.faces.faces[f];
        let pa = spaces.mesh.vertices[face.a];
        let pb = spaces.mesh.vertices[face.b];
        for j in 0..=l {
            let mut s = 0.0;
            for (iq, &t) in frule.points.iter().enumerate() {
                let x = pa[0] + t * (pb[0] - pa[0]);
                let y = pa[1] + t * (pb[1] - pa[1]);
                let noise = spaces.eval_v_on_element(&u_rand, face.left, x, y);
                s += frule.weights[iq]
                    * face.length
                    * (1.0 + pert.delta * noise)
                    * psi(x, y)
                    * basis::face_legendre(j, face.length, t);
            }
            fe.coeffs[f * (l + 1) + j] = s;
        }
    }
    fe
}

/// Element-aware perturbed volume source `(1 + delta_f u_rand) f`; the
/// clean closure is returned untouched when the amplitude is zero.
pub fn perturbed_volume_source<'a, F>(
    spaces: &'a Spaces,
    f: F,
    pert: &Perturbation,
) -> impl Fn(usize, f64, f64) -> f64 + 'a
where
    F: Fn(f64, f64) -> f64 + 'a,
{
    let noise = if pert.delta_f != 0.0 {
        Some((random_v_field(spaces, pert.seed.wrapping_add(1)), pert.delta_f))
    } else {
        None
    };
    move |e: usize, x: f64, y: f64| match &noise {
        None => f(x, y),
        Some((u_rand, amp)) => {
            (1.0 + amp * spaces.eval_v_on_element(u_rand, e, x, y)) * f(x, y)
        }
    }
}
