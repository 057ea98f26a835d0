//! Discrete spaces and degree-of-freedom management.
//!
//! Three spaces are coupled by the solver:
//! * `V^k`: continuous Lagrange elements of order k in {1, 2}; Dirichlet
//!   values are built into the space by constraining boundary dofs,
//! * `D^l`: Raviart-Thomas elements of order l in {0, 1}; the normal
//!   flux on faces carrying Neumann data is built in the same way,
//! * `W^m`: discontinuous piecewise polynomials of order m in {0, 1, 2}
//!   (the multiplier space), orthonormalized per element so its mass
//!   matrix is the identity.
//!
//! The admissible order window is k-1 <= l <= k and l <= m <= k; named
//! variants pick (l, m) within it.

pub(crate) mod basis;
pub mod interp;
pub mod perturb;
pub mod reconstruct;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTags, FaceTable, Mesh};
use crate::quadrature;
use basis::{ElemGeom, RtBasis, ScalarBasis};

/// Named discretization variants and how they pick (l, m) from k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// l = m = k; no dual stabilizer needed (only available for k = 1,
    /// since flux order 2 is out of range).
    InfSup,
    /// l = k-1, m = k; dual stabilizer on the multiplier gradient.
    WellBalanced,
    /// l = m = k-1; no dual stabilizer, but the primal stabilizer gains
    /// the coarse-multiplier compensation term.
    WellBalancedNoDual,
    /// No multiplier at all: least-squares minimization over (V, D).
    Reduced,
}

/// Which dual stabilizer acts on the multiplier block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualStabilizer {
    /// s* = 0.
    None,
    /// s*(z, y) = (gamma_star / 2) ((1 - pi_{l-1}) grad z, (1 - pi_{l-1}) grad y).
    ProjectedGradient,
    /// s*(z, y) = (z, y); turns multiplier elimination into the reduced
    /// least-squares operator (the defect-correction route).
    Mass,
}

/// Orders, variant, and stabilization weights.
#[derive(Debug, Clone, Copy)]
pub struct SpaceConfig {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub variant: Variant,
    pub gamma_t: f64,
    pub gamma_star: f64,
    pub dual: DualStabilizer,
}

impl SpaceConfig {
    /// Standard configuration for a variant at order k.
    pub fn new(k: usize, variant: Variant) -> Result<SpaceConfig> {
        if !(k == 1 || k == 2) {
            return Err(Error::Config(format!("k must be 1 or 2, got {k}")));
        }
        let (l, m, dual) = match variant {
            Variant::InfSup => {
                if k != 1 {
                    return Err(Error::Config(
                        "the inf-sup variant needs flux order l = k, which is only \
                         available for k = 1"
                            .into(),
                    ));
                }
                (k, k, DualStabilizer::None)
            }
            Variant::WellBalanced => (k - 1, k, DualStabilizer::ProjectedGradient),
            Variant::WellBalancedNoDual => (k - 1, k - 1, DualStabilizer::None),
            Variant::Reduced => (k - 1, k, DualStabilizer::None),
        };
        let cfg = SpaceConfig { k, l, m, variant, gamma_t: 0.0, gamma_star: 0.1, dual };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Spaces targeted by the defect-correction iteration: the richest
    /// multiplier (m = k) with flux order min(k, 1), and no dual
    /// stabilizer in the limit system.
    pub fn defect_target(k: usize) -> Result<SpaceConfig> {
        let cfg = if k == 1 {
            SpaceConfig::new(1, Variant::InfSup)?
        } else {
            let mut c = SpaceConfig::new(k, Variant::WellBalanced)?;
            c.dual = DualStabilizer::None;
            c
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k == 1 || self.k == 2) {
            return Err(Error::Config(format!("k must be 1 or 2, got {}", self.k)));
        }
        if self.l > 1 {
            return Err(Error::Config(format!("flux order l must be 0 or 1, got {}", self.l)));
        }
        if self.m > 2 {
            return Err(Error::Config(format!(
                "multiplier order m must be at most 2, got {}",
                self.m
            )));
        }
        if self.l + 1 < self.k || self.l > self.k {
            return Err(Error::Config(format!(
                "order window violated: need k-1 <= l <= k, got k={}, l={}",
                self.k, self.l
            )));
        }
        if self.m < self.l || self.m > self.k {
            return Err(Error::Config(format!(
                "order window violated: need l <= m <= k, got l={}, m={}",
                self.l, self.m
            )));
        }
        if self.gamma_t < 0.0 || !self.gamma_t.is_finite() {
            return Err(Error::Config(format!("gamma_t must be >= 0, got {}", self.gamma_t)));
        }
        if !(self.gamma_star > 0.0) {
            return Err(Error::Config(format!(
                "gamma_star must be > 0, got {}",
                self.gamma_star
            )));
        }
        Ok(())
    }

    /// The primal stabilizer includes the coarse-multiplier term
    /// mu^2 h^2 ||(1 - pi_W) v||^2 only when the multiplier space cannot
    /// represent mu v (m < k).
    pub fn needs_multiplier_compensation(&self) -> bool {
        self.m < self.k
    }
}

/// Which space a dof vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceId {
    V,
    D,
    W,
}

/// Dof bookkeeping for one space: totals, boundary constraints, and the
/// enumeration of free (unconstrained) dofs.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub space: SpaceId,
    pub total: usize,
    pub constrained: Vec<bool>,
    /// Position of each dof among the free dofs (None when constrained).
    pub free_index: Vec<Option<usize>>,
    pub n_free: usize,
}

impl DofMap {
    fn build(space: SpaceId, constrained: Vec<bool>) -> DofMap {
        let total = constrained.len();
        let mut free_index = vec![None; total];
        let mut n_free = 0;
        for (i, &c) in constrained.iter().enumerate() {
            if !c {
                free_index[i] = Some(n_free);
                n_free += 1;
            }
        }
        DofMap { space, total, constrained, free_index, n_free }
    }
}

/// Coefficient vector over the full dof set of one space.
#[derive(Debug, Clone)]
pub struct FEFunction {
    pub space: SpaceId,
    pub coeffs: Vec<f64>,
}

impl FEFunction {
    pub fn add_scaled(&mut self, alpha: f64, other: &FEFunction) {
        assert_eq!(self.space, other.space);
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
    }

    pub fn l2_of_coeffs(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// The assembled trio of spaces over one mesh, with cached element bases.
pub struct Spaces {
    pub mesh: Arc<Mesh>,
    pub faces: Arc<FaceTable>,
    pub tags: Arc<BoundaryTags>,
    pub config: SpaceConfig,
    pub v: DofMap,
    pub d: DofMap,
    pub w: DofMap,
    /// Global mesh size: the largest element diameter.
    pub h: f64,
    pub(crate) geoms: Vec<ElemGeom>,
    pub(crate) rt_bases: Vec<RtBasis>,
    pub(crate) w_bases: Vec<ScalarBasis>,
}

impl Spaces {
    pub fn build(
        mesh: Arc<Mesh>,
        faces: Arc<FaceTable>,
        tags: Arc<BoundaryTags>,
        config: SpaceConfig,
    ) -> Result<Spaces> {
        config.validate()?;
        if faces.elem_faces.len() != mesh.n_triangles() {
            return Err(Error::SpaceMismatch(
                "face table does not belong to this mesh".into(),
            ));
        }
        if tags.tags.len() != faces.n_faces() {
            return Err(Error::SpaceMismatch(
                "boundary tags do not belong to this face table".into(),
            ));
        }
        let nt = mesh.n_triangles();
        let nv = mesh.n_vertices();
        let nf = faces.n_faces();
        let k = config.k;
        let l = config.l;
        let m = config.m as i32;

        // V: vertex dofs, then (k = 2) one dof per face midpoint.
        let v_total = if k == 1 { nv } else { nv + nf };
        let mut v_constrained = vec![false; v_total];
        for &f in &faces.boundary {
            if tags.sigma_dirichlet(f) {
                let face = &faces.faces[f];
                v_constrained[face.a] = true;
                v_constrained[face.b] = true;
                if k == 2 {
                    v_constrained[nv + f] = true;
                }
            }
        }

        // D: l+1 moments per face, then (l = 1) two interior dofs per cell.
        let d_total = nf * (l + 1) + if l == 1 { 2 * nt } else { 0 };
        let mut d_constrained = vec![false; d_total];
        for &f in &faces.boundary {
            if tags.sigma_neumann(f) {
                for j in 0..=l {
                    d_constrained[f * (l + 1) + j] = true;
                }
            }
        }

        // W: orthonormal cell dofs, never constrained.
        let nb = basis::scalar_dim(m);
        let w_constrained = vec![false; nt * nb];

        let geoms: Vec<ElemGeom> = (0..nt).map(|e| ElemGeom::new(&mesh, e)).collect();
        let rt_bases = (0..nt)
            .map(|e| RtBasis::build(&mesh, &faces, e, l))
            .collect::<Result<Vec<_>>>()?;
        let w_bases: Vec<ScalarBasis> =
            geoms.iter().map(|g| ScalarBasis::build_from_geom(g, m)).collect();

        let h = mesh.max_diameter();
        Ok(Spaces {
            mesh,
            faces,
            tags,
            config,
            v: DofMap::build(SpaceId::V, v_constrained),
            d: DofMap::build(SpaceId::D, d_constrained),
            w: DofMap::build(SpaceId::W, w_constrained),
            h,
            geoms,
            rt_bases,
            w_bases,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_triangles()
    }

    pub fn dof_map(&self, space: SpaceId) -> &DofMap {
        match space {
            SpaceId::V => &self.v,
            SpaceId::D => &self.d,
            SpaceId::W => &self.w,
        }
    }

    pub fn zero(&self, space: SpaceId) -> FEFunction {
        FEFunction { space, coeffs: vec![0.0; self.dof_map(space).total] }
    }

    /// Number of local V dofs per element.
    pub fn v_nloc(&self) -> usize {
        basis::lagrange_nloc(self.config.k)
    }

    /// Number of local D dofs per element.
    pub fn d_nloc(&self) -> usize {
        basis::rt_nloc(self.config.l)
    }

    /// Number of local W dofs per element.
    pub fn w_nloc(&self) -> usize {
        basis::scalar_dim(self.config.m as i32)
    }

    /// Global V dofs of element `e`, in local basis order (3 vertices,
    /// then for k = 2 the 3 opposite-edge dofs).
    pub fn v_element_dofs(&self, e: usize, out: &mut [usize]) {
        let t = self.mesh.triangles[e];
        out[0] = t[0];
        out[1] = t[1];
        out[2] = t[2];
        if self.config.k == 2 {
            let nv = self.mesh.n_vertices();
            for i in 0..3 {
                out[3 + i] = nv + self.faces.elem_faces[e][i];
            }
        }
    }

    /// Global D dofs of element `e`: per local face the l+1 moments,
    /// then (l = 1) the two interior dofs.
    pub fn d_element_dofs(&self, e: usize, out: &mut [usize]) {
        let l = self.config.l;
        for loc in 0..3 {
            let f = self.faces.elem_faces[e][loc];
            for j in 0..=l {
                out[loc * (l + 1) + j] = f * (l + 1) + j;
            }
        }
        if l == 1 {
            let base = self.faces.n_faces() * 2;
            out[6] = base + 2 * e;
            out[7] = base + 2 * e + 1;
        }
    }

    /// Global W dofs of element `e`.
    pub fn w_element_dofs(&self, e: usize, out: &mut [usize]) {
        let nb = self.w_nloc();
        for j in 0..nb {
            out[j] = e * nb + j;
        }
    }

    /// Nodal coordinates of every V dof (vertices, then face midpoints
    /// for k = 2), in dof order.
    pub fn v_node_coords(&self) -> Vec<[f64; 2]> {
        let mut coords = self.mesh.vertices.clone();
        if self.config.k == 2 {
            coords.extend(self.faces.faces.iter().map(|f| f.midpoint));
        }
        coords
    }

    /// Evaluate a V function on a known element.
    pub fn eval_v_on_element(&self, fe: &FEFunction, e: usize, x: f64, y: f64) -> f64 {
        assert_eq!(fe.space, SpaceId::V);
        let k = self.config.k;
        let lam = self.geoms[e].barycentric(x, y);
        let mut vals = [0.0; 6];
        basis::lagrange_values(k, lam, &mut vals);
        let mut dofs = [0usize; 6];
        self.v_element_dofs(e, &mut dofs);
        let n = self.v_nloc();
        (0..n).map(|i| fe.coeffs[dofs[i]] * vals[i]).sum()
    }

    /// Gradient of a V function on a known element.
    pub fn eval_v_grad_on_element(&self, fe: &FEFunction, e: usize, x: f64, y: f64) -> [f64; 2] {
        assert_eq!(fe.space, SpaceId::V);
        let k = self.config.k;
        let geom = &self.geoms[e];
        let lam = geom.barycentric(x, y);
        let mut grads = [[0.0; 2]; 6];
        basis::lagrange_gradients(k, lam, &geom.grad_lambda, &mut grads);
        let mut dofs = [0usize; 6];
        self.v_element_dofs(e, &mut dofs);
        let n = self.v_nloc();
        let mut g = [0.0, 0.0];
        for i in 0..n {
            g[0] += fe.coeffs[dofs[i]] * grads[i][0];
            g[1] += fe.coeffs[dofs[i]] * grads[i][1];
        }
        g
    }

    /// Evaluate a D (flux) function on a known element.
    pub fn eval_d_on_element(&self, fe: &FEFunction, e: usize, x: f64, y: f64) -> [f64; 2] {
        assert_eq!(fe.space, SpaceId::D);
        let mut vals = [[0.0; 2]; 8];
        self.rt_bases[e].eval(x, y, &mut vals);
        let mut dofs = [0usize; 8];
        self.d_element_dofs(e, &mut dofs);
        let n = self.d_nloc();
        let mut v = [0.0, 0.0];
        for i in 0..n {
            v[0] += fe.coeffs[dofs[i]] * vals[i][0];
            v[1] += fe.coeffs[dofs[i]] * vals[i][1];
        }
        v
    }

    /// Divergence of a D function on a known element.
    pub fn eval_d_div_on_element(&self, fe: &FEFunction, e: usize, x: f64, y: f64) -> f64 {
        assert_eq!(fe.space, SpaceId::D);
        let mut divs = [0.0; 8];
        self.rt_bases[e].eval_div(x, y, &mut divs);
        let mut dofs = [0usize; 8];
        self.d_element_dofs(e, &mut dofs);
        let n = self.d_nloc();
        (0..n).map(|i| fe.coeffs[dofs[i]] * divs[i]).sum()
    }

    /// Evaluate a W (multiplier) function on a known element.
    pub fn eval_w_on_element(&self, fe: &FEFunction, e: usize, x: f64, y: f64) -> f64 {
        assert_eq!(fe.space, SpaceId::W);
        let nb = self.w_nloc();
        let mut vals = [0.0; 6];
        self.w_bases[e].eval(x, y, &mut vals[..nb]);
        (0..nb).map(|j| fe.coeffs[e * nb + j] * vals[j]).sum()
    }

    /// Gradient of a W function on a known element.
    pub fn eval_w_grad_on_element(&self, fe: &FEFunction, e: usize, x: f64, y: f64) -> [f64; 2] {
        assert_eq!(fe.space, SpaceId::W);
        let nb = self.w_nloc();
        let mut grads = [[0.0; 2]; 6];
        self.w_bases[e].eval_grad(x, y, &mut grads[..nb]);
        let mut g = [0.0, 0.0];
        for j in 0..nb {
            g[0] += fe.coeffs[e * nb + j] * grads[j][0];
            g[1] += fe.coeffs[e * nb + j] * grads[j][1];
        }
        g
    }

    /// Lifting of the Dirichlet datum: zero except on constrained V dofs,
    /// which take the nodal values of `g`.
    pub fn dirichlet_lift<G>(&self, g: G) -> FEFunction
    where
        G: Fn(f64, f64) -> f64,
    {
        let mut fe = self.zero(SpaceId::V);
        let coords = self.v_node_coords();
        for (i, &c) in self.v.constrained.iter().enumerate() {
            if c {
                fe.coeffs[i] = g(coords[i][0], coords[i][1]);
            }
        }
        fe
    }

    /// Lifting of the Neumann datum: zero except on the flux dofs of
    /// data-carrying faces, which take the face moments of `psi` (that
    /// is, the facewise L2-projection in the orthonormal face basis).
    pub fn neumann_lift<P>(&self, psi: P) -> FEFunction
    where
        P: Fn(f64, f64) -> f64,
    {
        let mut fe = self.zero(SpaceId::D);
        let l = self.config.l;
        let frule = quadrature::face_rule();
        for &f in &self.faces.boundary {
            if !self.tags.sigma_neumann(f) {
                continue;
            }
            let face = &self.faces.faces[f];
            let pa = self.mesh.vertices[face.a];
            let pb = self.mesh.vertices[face.b];
            for j in 0..=l {
                let mut s = 0.0;
                for (q, &t) in frule.points.iter().enumerate() {
                    let x = pa[0] + t * (pb[0] - pa[0]);
                    let y = pa[1] + t * (pb[1] - pa[1]);
                    s += frule.weights[q]
                        * face.length
                        * psi(x, y)
                        * basis::face_legendre(j, face.length, t);
                }
                fe.coeffs[f * (l + 1) + j] = s;
            }
        }
        fe
    }
}
