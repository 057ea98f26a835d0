//! Global assembly of the stabilized systems and their right-hand sides.
//!
//! The saddle-point system couples the pair x = (u, p) in V x D with a
//! multiplier z in W:
//!
//! ```text
//!   [ S   B^T ] [x]   [      -S x_lift       ]
//!   [ B   -S* ] [z] = [ (f, w) - B x_lift    ]
//! ```
//!
//! S is the primal stabilizer (the polarization of
//! 1/2 ||A grad v - q||^2 plus Tikhonov terms), B the constraint form
//! (div q + mu v, w), and S* the dual stabilizer of the active variant.
//! Dirichlet and Neumann data are built into the trial spaces, so the
//! constrained dofs are eliminated: their rows and columns are dropped
//! and the column contribution times the lifting moves to the
//! right-hand side.
//!
//! The reduced least-squares system keeps only (u, p) and adds the
//! equation-residual Gram:
//! A_R[x, y] = s[x, y] + (div p + mu u, div q + mu v), with load
//! (f, div q + mu v).

pub(crate) mod local;

pub(crate) use local::ElementContext;

use crate::error::{Error, Result};
use crate::spaces::perturb::{self, Perturbation};
use crate::spaces::{interp, FEFunction, SpaceId, Spaces, Variant};
use local::{dot, MAX_D, MAX_V, MAX_W};

/// Deterministic compressed sparse row matrix built from triplets
/// (duplicates summed in insertion order).
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(u32, u32, f64)>) -> Csr {
        trips.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let mut pos = 0;
        while pos < trips.len() {
            let (r, c, mut v) = trips[pos];
            let mut p2 = pos + 1;
            while p2 < trips.len() && trips[p2].0 == r && trips[p2].1 == c {
                v += trips[p2].2;
                p2 += 1;
            }
            row_ptr[r as usize + 1] += 1;
            col_idx.push(c as usize);
            vals.push(v);
            pos = p2;
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Csr { nrows, ncols, row_ptr, col_idx, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entry lookup (zero when not stored); intended for tests and
    /// small matrices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(pos) => self.vals[self.row_ptr[i] + pos],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let mut s = 0.0;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[idx] * x[self.col_idx[idx]];
            }
            y[r] = s;
        }
        y
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.nrows * self.ncols];
        for r in 0..self.nrows {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                dense[r * self.ncols + self.col_idx[idx]] = self.vals[idx];
            }
        }
        dense
    }

    /// Coordinate text dump: one `row col value` line per stored entry.
    pub fn coordinate_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.nrows {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.push_str(&format!("{} {} {}\n", r, self.col_idx[idx], self.vals[idx]));
            }
        }
        out
    }
}

/// How the free unknowns of an assembled system are laid out: free V
/// dofs first, then free D dofs, then (saddle systems only) all W dofs.
#[derive(Debug, Clone, Copy)]
pub struct SystemLayout {
    pub n_v: usize,
    pub n_d: usize,
    pub n_w: usize,
}

impl SystemLayout {
    pub fn total(&self) -> usize {
        self.n_v + self.n_d + self.n_w
    }
}

/// Lifting functions carrying the boundary data on constrained dofs
/// (zero elsewhere); the multiplier has no constrained dofs and its
/// entry is identically zero.
#[derive(Debug, Clone)]
pub struct Lifting {
    pub v: FEFunction,
    pub d: FEFunction,
    pub w: FEFunction,
}

/// A square system over the free dofs, with the eliminated boundary
/// data kept alongside so solutions can be reassembled.
pub struct SparseSystem {
    pub matrix: Csr,
    pub rhs: Vec<f64>,
    pub lifting: Lifting,
    pub layout: SystemLayout,
}

impl SparseSystem {
    /// Turn a solved free-dof vector back into finite element
    /// functions, re-attaching the boundary lifting.
    pub fn solution_functions(
        &self,
        spaces: &Spaces,
        x: &[f64],
    ) -> (FEFunction, FEFunction, Option<FEFunction>) {
        assert_eq!(x.len(), self.layout.total());
        let mut u = self.lifting.v.clone();
        for (dof, fi) in spaces.v.free_index.iter().enumerate() {
            if let Some(i) = fi {
                u.coeffs[dof] = x[*i];
            }
        }
        let mut p = self.lifting.d.clone();
        for (dof, fi) in spaces.d.free_index.iter().enumerate() {
            if let Some(i) = fi {
                p.coeffs[dof] = x[self.layout.n_v + *i];
            }
        }
        let z = if self.layout.n_w > 0 {
            let off = self.layout.n_v + self.layout.n_d;
            let mut z = spaces.zero(SpaceId::W);
            z.coeffs.copy_from_slice(&x[off..off + self.layout.n_w]);
            Some(z)
        } else {
            None
        };
        (u, p, z)
    }

    pub fn dump_coordinate_text(&self) -> String {
        self.matrix.coordinate_text()
    }
}

/// Problem data: constant diffusivity, reaction coefficient, source,
/// and the two boundary data, plus the noise configuration.
pub struct ProblemSpec {
    pub a: [[f64; 2]; 2],
    pub mu: f64,
    pub f: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub g: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub psi: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub perturbation: Perturbation,
}

impl ProblemSpec {
    pub fn new<F, G, P>(a: [[f64; 2]; 2], mu: f64, f: F, g: G, psi: P) -> Result<ProblemSpec>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        P: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if (a[0][1] - a[1][0]).abs() > 1e-14 * scale {
            return Err(Error::Config("diffusivity matrix must be symmetric".into()));
        }
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if !(a[0][0] > 0.0 && det > 0.0) {
            return Err(Error::Config(
                "diffusivity matrix must be positive definite".into(),
            ));
        }
        if !mu.is_finite() {
            return Err(Error::Config("reaction coefficient must be finite".into()));
        }
        Ok(ProblemSpec {
            a,
            mu,
            f: Box::new(f),
            g: Box::new(g),
            psi: Box::new(psi),
            perturbation: Perturbation::none(),
        })
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> ProblemSpec {
        self.perturbation = perturbation;
        self
    }

    pub fn apply_a(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * g[0] + self.a[0][1] * g[1],
            self.a[1][0] * g[0] + self.a[1][1] * g[1],
        ]
    }

    /// Nodal lifting of the Dirichlet datum.
    pub fn dirichlet_lift(&self, spaces: &Spaces) -> FEFunction {
        spaces.dirichlet_lift(|x, y| (self.g)(x, y))
    }

    /// Facewise lifting of the (possibly perturbed) Neumann datum.
    pub fn neumann_lift(&self, spaces: &Spaces) -> FEFunction {
        perturb::perturbed_neumann_lift(spaces, |x, y| (self.psi)(x, y), &self.perturbation)
    }

    /// The (possibly perturbed) volume source as an element-aware field.
    pub fn volume_source<'a>(&'a self, spaces: &'a Spaces) -> impl Fn(usize, f64, f64) -> f64 + 'a {
        perturb::perturbed_volume_source(spaces, |x, y| (self.f)(x, y), &self.perturbation)
    }
}

#[inline]
fn scatter(
    trips: &mut Vec<(u32, u32, f64)>,
    rhs: &mut [f64],
    row: Option<usize>,
    col: Option<usize>,
    col_lift: f64,
    val: f64,
) {
    if val == 0.0 {
        return;
    }
    let Some(i) = row else { return };
    match col {
        Some(j) => trips.push((i as u32, j as u32, val)),
        None => rhs[i] -= val * col_lift,
    }
}

struct ElementDofs {
    nv: usize,
    nd: usize,
    nw: usize,
    v_glob: [usize; MAX_V],
    d_glob: [usize; MAX_D],
    w_glob: [usize; MAX_W],
    v_free: [Option<usize>; MAX_V],
    d_free: [Option<usize>; MAX_D],
    v_lift: [f64; MAX_V],
    d_lift: [f64; MAX_D],
}

fn gather(spaces: &Spaces, e: usize, lift_v: &FEFunction, lift_d: &FEFunction) -> ElementDofs {
    let mut ed = ElementDofs {
        nv: spaces.v_nloc(),
        nd: spaces.d_nloc(),
        nw: spaces.w_nloc(),
        v_glob: [0; MAX_V],
        d_glob: [0; MAX_D],
        w_glob: [0; MAX_W],
        v_free: [None; MAX_V],
        d_free: [None; MAX_D],
        v_lift: [0.0; MAX_V],
        d_lift: [0.0; MAX_D],
    };
    spaces.v_element_dofs(e, &mut ed.v_glob);
    spaces.d_element_dofs(e, &mut ed.d_glob);
    spaces.w_element_dofs(e, &mut ed.w_glob);
    for i in 0..ed.nv {
        ed.v_free[i] = spaces.v.free_index[ed.v_glob[i]];
        ed.v_lift[i] = lift_v.coeffs[ed.v_glob[i]];
    }
    let off = spaces.v.n_free;
    for b in 0..ed.nd {
        ed.d_free[b] = spaces.d.free_index[ed.d_glob[b]].map(|i| off + i);
        ed.d_lift[b] = lift_d.coeffs[ed.d_glob[b]];
    }
    ed
}

/// The constraint form b[(v, q), w] = (div q + mu v, w) over all dofs:
/// rows are W dofs, columns are V dofs followed by D dofs.
pub fn assemble_b(spaces: &Spaces, mu: f64) -> Csr {
    let nv_t = spaces.v.total;
    let n_cols = nv_t + spaces.d.total;
    let mut trips = Vec::new();
    let mut dummy = [0.0; 0];
    let (zv, zd) = (spaces.zero(SpaceId::V), spaces.zero(SpaceId::D));
    for e in 0..spaces.n_elements() {
        let ctx = ElementContext::new(spaces, e);
        let lm = local::local_matrices(spaces, [[1.0, 0.0], [0.0, 1.0]], mu, &ctx);
        let ed = gather(spaces, e, &zv, &zd);
        for c in 0..ed.nw {
            let row = Some(ed.w_glob[c]);
            for i in 0..ed.nv {
                scatter(&mut trips, &mut dummy, row, Some(ed.v_glob[i]), 0.0, lm.bv[c][i]);
            }
            for b in 0..ed.nd {
                scatter(&mut trips, &mut dummy, row, Some(nv_t + ed.d_glob[b]), 0.0, lm.bd[c][b]);
            }
        }
    }
    Csr::from_triplets(spaces.w.total, n_cols, trips)
}

/// The primal stabilizer s over all dofs, V block then D block.
pub fn assemble_s(spaces: &Spaces, a: [[f64; 2]; 2], mu: f64) -> Csr {
    let nv_t = spaces.v.total;
    let n = nv_t + spaces.d.total;
    let mut trips = Vec::new();
    let mut dummy = [0.0; 0];
    let (zv, zd) = (spaces.zero(SpaceId::V), spaces.zero(SpaceId::D));
    for e in 0..spaces.n_elements() {
        let ctx = ElementContext::new(spaces, e);
        let lm = local::local_matrices(spaces, a, mu, &ctx);
        let ed = gather(spaces, e, &zv, &zd);
        for i in 0..ed.nv {
            let row = Some(ed.v_glob[i]);
            for j in 0..ed.nv {
                scatter(&mut trips, &mut dummy, row, Some(ed.v_glob[j]), 0.0, lm.svv[i][j]);
            }
            for b in 0..ed.nd {
                scatter(&mut trips, &mut dummy, row, Some(nv_t + ed.d_glob[b]), 0.0, lm.svd[i][b]);
            }
        }
        for b in 0..ed.nd {
            let row = Some(nv_t + ed.d_glob[b]);
            for j in 0..ed.nv {
                scatter(&mut trips, &mut dummy, row, Some(ed.v_glob[j]), 0.0, lm.svd[j][b]);
            }
            for b2 in 0..ed.nd {
                scatter(&mut trips, &mut dummy, row, Some(nv_t + ed.d_glob[b2]), 0.0, lm.sdd[b][b2]);
            }
        }
    }
    Csr::from_triplets(n, n, trips)
}

/// The dual stabilizer s* over all W dofs (not negated; the sign flip
/// is applied when the saddle system is assembled).
pub fn assemble_sstar(spaces: &Spaces) -> Csr {
    let n = spaces.w.total;
    let mut trips = Vec::new();
    let mut dummy = [0.0; 0];
    let (zv, zd) = (spaces.zero(SpaceId::V), spaces.zero(SpaceId::D));
    for e in 0..spaces.n_elements() {
        let ctx = ElementContext::new(spaces, e);
        let lm = local::local_matrices(spaces, [[1.0, 0.0], [0.0, 1.0]], 0.0, &ctx);
        let ed = gather(spaces, e, &zv, &zd);
        for c in 0..ed.nw {
            for d in 0..ed.nw {
                scatter(
                    &mut trips,
                    &mut dummy,
                    Some(ed.w_glob[c]),
                    Some(ed.w_glob[d]),
                    0.0,
                    lm.sstar[c][d],
                );
            }
        }
    }
    Csr::from_triplets(n, n, trips)
}

/// Assemble the saddle-point system over the free (u, p, z) dofs.
pub fn assemble_full(spaces: &Spaces, problem: &ProblemSpec) -> Result<SparseSystem> {
    if spaces.config.variant == Variant::Reduced {
        return Err(Error::Config(
            "the reduced variant carries no multiplier block; assemble the least-squares \
             system instead"
                .into(),
        ));
    }
    let lift_v = problem.dirichlet_lift(spaces);
    let lift_d = problem.neumann_lift(spaces);
    let f_tilde = problem.volume_source(spaces);
    let layout =
        SystemLayout { n_v: spaces.v.n_free, n_d: spaces.d.n_free, n_w: spaces.w.total };
    let n = layout.total();
    let w_off = layout.n_v + layout.n_d;
    let mut rhs = vec![0.0; n];
    let per_elem = (spaces.v_nloc() + spaces.d_nloc() + spaces.w_nloc()).pow(2);
    let mut trips: Vec<(u32, u32, f64)> = Vec::with_capacity(per_elem * spaces.n_elements());
    let mut fq = vec![0.0; 0];
    for e in 0..spaces.n_elements() {
        let ctx = ElementContext::new(spaces, e);
        let lm = local::local_matrices(spaces, problem.a, problem.mu, &ctx);
        let ed = gather(spaces, e, &lift_v, &lift_d);
        for i in 0..ed.nv {
            let row = ed.v_free[i];
            for j in 0..ed.nv {
                scatter(&mut trips, &mut rhs, row, ed.v_free[j], ed.v_lift[j], lm.svv[i][j]);
            }
            for b in 0..ed.nd {
                scatter(&mut trips, &mut rhs, row, ed.d_free[b], ed.d_lift[b], lm.svd[i][b]);
            }
            for c in 0..ed.nw {
                scatter(&mut trips, &mut rhs, row, Some(w_off + ed.w_glob[c]), 0.0, lm.bv[c][i]);
            }
        }
        for b in 0..ed.nd {
            let row = ed.d_free[b];
            for j in 0..ed.nv {
                scatter(&mut trips, &mut rhs, row, ed.v_free[j], ed.v_lift[j], lm.svd[j][b]);
            }
            for b2 in 0..ed.nd {
                scatter(&mut trips, &mut rhs, row, ed.d_free[b2], ed.d_lift[b2], lm.sdd[b][b2]);
            }
            for c in 0..ed.nw {
                scatter(&mut trips, &mut rhs, row, Some(w_off + ed.w_glob[c]), 0.0, lm.bd[c][b]);
            }
        }
        fq.clear();
        fq.extend(ctx.points.iter().map(|&[x, y]| f_tilde(e, x, y)));
        for c in 0..ed.nw {
            let row = Some(w_off + ed.w_glob[c]);
            for j in 0..ed.nv {
                scatter(&mut trips, &mut rhs, row, ed.v_free[j], ed.v_lift[j], lm.bv[c][j]);
            }
            for b in 0..ed.nd {
                scatter(&mut trips, &mut rhs, row, ed.d_free[b], ed.d_lift[b], lm.bd[c][b]);
            }
            for d in 0..ed.nw {
                scatter(
                    &mut trips,
                    &mut rhs,
                    row,
                    Some(w_off + ed.w_glob[d]),
                    0.0,
                    -lm.sstar[c][d],
                );
            }
            let mut load = 0.0;
            for q in 0..ctx.nq {
                load += ctx.weights[q] * fq[q] * ctx.w_val[q][c];
            }
            rhs[w_off + ed.w_glob[c]] += load;
        }
    }
    let matrix = Csr::from_triplets(n, n, trips);
    Ok(SparseSystem {
        matrix,
        rhs,
        lifting: Lifting { v: lift_v, d: lift_d, w: spaces.zero(SpaceId::W) },
        layout,
    })
}

/// Assemble the least-squares system over the free (u, p) dofs.
pub fn assemble_reduced(spaces: &Spaces, problem: &ProblemSpec) -> Result<SparseSystem> {
    let lift_v = problem.dirichlet_lift(spaces);
    let lift_d = problem.neumann_lift(spaces);
    let f_tilde = problem.volume_source(spaces);
    let layout = SystemLayout { n_v: spaces.v.n_free, n_d: spaces.d.n_free, n_w: 0 };
    let n = layout.total();
    let mut rhs = vec![0.0; n];
    let per_elem = (spaces.v_nloc() + spaces.d_nloc()).pow(2);
    let mut trips: Vec<(u32, u32, f64)> = Vec::with_capacity(per_elem * spaces.n_elements());
    let mut fq = vec![0.0; 0];
    let mu = problem.mu;
    for e in 0..spaces.n_elements() {
        let ctx = ElementContext::new(spaces, e);
        let lm = local::local_matrices(spaces, problem.a, mu, &ctx);
        let rg = local::local_residual_gram(spaces, mu, &ctx);
        let ed = gather(spaces, e, &lift_v, &lift_d);
        for i in 0..ed.nv {
            let row = ed.v_free[i];
            for j in 0..ed.nv {
                scatter(
                    &mut trips,
                    &mut rhs,
                    row,
                    ed.v_free[j],
                    ed.v_lift[j],
                    lm.svv[i][j] + rg.vv[i][j],
                );
            }
            for b in 0..ed.nd {
                scatter(
                    &mut trips,
                    &mut rhs,
                    row,
                    ed.d_free[b],
                    ed.d_lift[b],
                    lm.svd[i][b] + rg.vd[i][b],
                );
            }
        }
        for b in 0..ed.nd {
            let row = ed.d_free[b];
            for j in 0..ed.nv {
                scatter(
                    &mut trips,
                    &mut rhs,
                    row,
                    ed.v_free[j],
                    ed.v_lift[j],
                    lm.svd[j][b] + rg.vd[j][b],
                );
            }
            for b2 in 0..ed.nd {
                scatter(
                    &mut trips,
                    &mut rhs,
                    row,
                    ed.d_free[b2],
                    ed.d_lift[b2],
                    lm.sdd[b][b2] + rg.dd[b][b2],
                );
            }
        }
        // Load (f, div q + mu v) on the free rows.
        fq.clear();
        fq.extend(ctx.points.iter().map(|&[x, y]| f_tilde(e, x, y)));
        for i in 0..ed.nv {
            if let Some(row) = ed.v_free[i] {
                if mu != 0.0 {
                    let mut load = 0.0;
                    for q in 0..ctx.nq {
                        load += ctx.weights[q] * fq[q] * mu * ctx.v_val[q][i];
                    }
                    rhs[row] += load;
                }
            }
        }
        for b in 0..ed.nd {
            if let Some(row) = ed.d_free[b] {
                let mut load = 0.0;
                for q in 0..ctx.nq {
                    load += ctx.weights[q] * fq[q] * ctx.d_div[q][b];
                }
                rhs[row] += load;
            }
        }
    }
    let matrix = Csr::from_triplets(n, n, trips);
    Ok(SparseSystem {
        matrix,
        rhs,
        lifting: Lifting { v: lift_v, d: lift_d, w: spaces.zero(SpaceId::W) },
        layout,
    })
}

/// Cellwise conservation residual r_K = int_{dK} p.n - int_K (f - mu u).
pub fn conservation_residual<F>(
    spaces: &Spaces,
    u_h: &FEFunction,
    p_h: &FEFunction,
    f: F,
    mu: f64,
) -> Vec<f64>
where
    F: Fn(usize, f64, f64) -> f64,
{
    assert_eq!(u_h.space, SpaceId::V);
    assert_eq!(p_h.space, SpaceId::D);
    let l = spaces.config.l;
    let rule = crate::quadrature::reference_triangle_rule();
    let mut out = vec![0.0; spaces.n_elements()];
    for e in 0..spaces.n_elements() {
        // Net boundary flux from the lowest face moments: the moment
        // dof is taken against the orthonormal constant 1/sqrt(h_F).
        let mut flux = 0.0;
        for loc in 0..3 {
            let fid = spaces.faces.elem_faces[e][loc];
            let sign = spaces.faces.elem_face_sign[e][loc];
            let len = spaces.faces.faces[fid].length;
            flux += sign * p_h.coeffs[fid * (l + 1)] * len.sqrt();
        }
        let geom = &spaces.geoms[e];
        let mut vol = 0.0;
        for (q, pt) in rule.points.iter().enumerate() {
            let [x, y] = geom.map_ref(pt[0], pt[1]);
            let u = spaces.eval_v_on_element(u_h, e, x, y);
            vol += rule.weights[q] * 2.0 * geom.area * (f(e, x, y) - mu * u);
        }
        out[e] = flux - vol;
    }
    out
}

/// Moments of the equation misfit div p + mu u - f against the
/// orthonormal multiplier basis; since that basis is orthonormal these
/// are exactly the coefficients of the W-projection of the misfit.
pub fn w_misfit_moments<F>(
    spaces: &Spaces,
    mu: f64,
    u_h: &FEFunction,
    p_h: &FEFunction,
    f: F,
) -> Vec<f64>
where
    F: Fn(usize, f64, f64) -> f64,
{
    assert_eq!(u_h.space, SpaceId::V);
    assert_eq!(p_h.space, SpaceId::D);
    let nb = spaces.w_nloc();
    let mut out = vec![0.0; spaces.w.total];
    let mut v_glob = [0usize; MAX_V];
    let mut d_glob = [0usize; MAX_D];
    for e in 0..spaces.n_elements() {
        let ctx = ElementContext::new(spaces, e);
        spaces.v_element_dofs(e, &mut v_glob);
        spaces.d_element_dofs(e, &mut d_glob);
        for q in 0..ctx.nq {
            let [x, y] = ctx.points[q];
            let mut r = -f(e, x, y);
            for b in 0..spaces.d_nloc() {
                r += p_h.coeffs[d_glob[b]] * ctx.d_div[q][b];
            }
            if mu != 0.0 {
                for i in 0..spaces.v_nloc() {
                    r += mu * u_h.coeffs[v_glob[i]] * ctx.v_val[q][i];
                }
            }
            let wq = ctx.weights[q];
            for c in 0..nb {
                out[e * nb + c] += wq * r * ctx.w_val[q][c];
            }
        }
    }
    out
}

/// The multiplier's load on the (u, p) equations: the free part of
/// B^T z, laid out as the reduced system (free V, then free D). Built
/// elementwise so the constraint block never needs to be stored.
pub fn multiplier_load(spaces: &Spaces, mu: f64, z: &FEFunction) -> Vec<f64> {
    assert_eq!(z.space, SpaceId::W);
    let off = spaces.v.n_free;
    let mut out = vec![0.0; off + spaces.d.n_free];
    let nb = spaces.w_nloc();
    let mut v_glob = [0usize; MAX_V];
    let mut d_glob = [0usize; MAX_D];
    for e in 0..spaces.n_elements() {
        let ctx = ElementContext::new(spaces, e);
        spaces.v_element_dofs(e, &mut v_glob);
        spaces.d_element_dofs(e, &mut d_glob);
        let mut zq = [0.0; 64];
        for q in 0..ctx.nq {
            let mut zv = 0.0;
            for c in 0..nb {
                zv += z.coeffs[e * nb + c] * ctx.w_val[q][c];
            }
            zq[q] = zv;
        }
        if mu != 0.0 {
            for i in 0..spaces.v_nloc() {
                if let Some(row) = spaces.v.free_index[v_glob[i]] {
                    let mut s = 0.0;
                    for q in 0..ctx.nq {
                        s += ctx.weights[q] * mu * ctx.v_val[q][i] * zq[q];
                    }
                    out[row] += s;
                }
            }
        }
        for b in 0..spaces.d_nloc() {
            if let Some(row) = spaces.d.free_index[d_glob[b]] {
                let mut s = 0.0;
                for q in 0..ctx.nq {
                    s += ctx.weights[q] * ctx.d_div[q][b] * zq[q];
                }
                out[off + row] += s;
            }
        }
    }
    out
}

/// Residual of the saddle system at the interpolated exact solution
/// (i_h u, R_h(A grad u), 0), measured as
/// max_i |r_i| / ||basis_i||_{L2}; decays like h^k for smooth u.
pub fn consistency_residual<U, G>(
    spaces: &Spaces,
    problem: &ProblemSpec,
    u: U,
    grad_u: G,
) -> Result<f64>
where
    U: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> [f64; 2],
{
    let sys = assemble_full(spaces, problem)?;
    let iu = interp::nodal_interpolant(spaces, &u);
    let rp = interp::rt_interpolant(spaces, |x, y| problem.apply_a(grad_u(x, y)));
    let n = sys.layout.total();
    let mut x = vec![0.0; n];
    for (dof, fi) in spaces.v.free_index.iter().enumerate() {
        if let Some(i) = fi {
            x[*i] = iu.coeffs[dof];
        }
    }
    for (dof, fi) in spaces.d.free_index.iter().enumerate() {
        if let Some(i) = fi {
            x[sys.layout.n_v + *i] = rp.coeffs[dof];
        }
    }
    let r = sys.matrix.matvec(&x);

    let w_off = sys.layout.n_v + sys.layout.n_d;
    let mut norms_sq = vec![0.0; n];
    let mut v_glob = [0usize; MAX_V];
    let mut d_glob = [0usize; MAX_D];
    for e in 0..spaces.n_elements() {
        let ctx = ElementContext::new(spaces, e);
        spaces.v_element_dofs(e, &mut v_glob);
        spaces.d_element_dofs(e, &mut d_glob);
        for i in 0..spaces.v_nloc() {
            if let Some(row) = spaces.v.free_index[v_glob[i]] {
                for q in 0..ctx.nq {
                    norms_sq[row] += ctx.weights[q] * ctx.v_val[q][i] * ctx.v_val[q][i];
                }
            }
        }
        for b in 0..spaces.d_nloc() {
            if let Some(row) = spaces.d.free_index[d_glob[b]] {
                for q in 0..ctx.nq {
                    norms_sq[sys.layout.n_v + row] +=
                        ctx.weights[q] * dot(ctx.d_val[q][b], ctx.d_val[q][b]);
                }
            }
        }
    }
    for i in w_off..n {
        norms_sq[i] = 1.0; // orthonormal multiplier basis
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max((r[i] - sys.rhs[i]).abs() / norms_sq[i].sqrt());
    }
    Ok(worst)
}
