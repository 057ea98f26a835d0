//! Shared brute-force machinery for the integration suites.
//!
//! Everything here deliberately avoids the library's assembly path: the
//! quadrature is a composite rule built from different nodes, matrices
//! are dense and indexed over all dofs, and the linear solver is a
//! plain Gaussian elimination written out below. Agreement with the
//! sparse path is then a genuine cross-check, not a tautology.

#![allow(dead_code)]

use std::sync::Arc;

use cauchy_mfem::assembly::ProblemSpec;
use cauchy_mfem::mesh::{build_face_table, generate_union_jack, tag_boundary, Rect};
use cauchy_mfem::spaces::{FEFunction, SpaceConfig, SpaceId, Spaces};

/// Seven-point rule exact to degree 5 on a triangle, in barycentric
/// weights normalized to sum to one.
const TRI7: [([f64; 3], f64); 7] = {
    // a1 = (6 - sqrt(15)) / 21, a2 = (6 + sqrt(15)) / 21.
    const S15: f64 = 3.872983346207417;
    const A1: f64 = (6.0 - S15) / 21.0;
    const A2: f64 = (6.0 + S15) / 21.0;
    const W1: f64 = (155.0 - S15) / 1200.0;
    const W2: f64 = (155.0 + S15) / 1200.0;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([A1, A1, 1.0 - 2.0 * A1], W1),
        ([A1, 1.0 - 2.0 * A1, A1], W1),
        ([1.0 - 2.0 * A1, A1, A1], W1),
        ([A2, A2, 1.0 - 2.0 * A2], W2),
        ([A2, 1.0 - 2.0 * A2, A2], W2),
        ([1.0 - 2.0 * A2, A2, A2], W2),
    ]
};

/// Physical quadrature points and weights on one triangle: four-way
/// midpoint subdivision, the seven-point rule on each child. 28 points,
/// exact to degree 5, nodes disjoint from the library's rule.
pub fn composite_tri_quad(v: [[f64; 2]; 3]) -> Vec<([f64; 2], f64)> {
    let mid = |a: [f64; 2], b: [f64; 2]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let m01 = mid(v[0], v[1]);
    let m12 = mid(v[1], v[2]);
    let m20 = mid(v[2], v[0]);
    let children = [
        [v[0], m01, m20],
        [m01, v[1], m12],
        [m20, m12, v[2]],
        [m01, m12, m20],
    ];
    let mut out = Vec::with_capacity(28);
    for c in children {
        let area = 0.5
            * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1])
                - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]))
                .abs();
        for (bary, w) in TRI7 {
            let x = bary[0] * c[0][0] + bary[1] * c[1][0] + bary[2] * c[2][0];
            let y = bary[0] * c[0][1] + bary[1] * c[1][1] + bary[2] * c[2][1];
            out.push(([x, y], w * area));
        }
    }
    out
}

/// Composite two-panel Gauss rule on a segment, exact to degree 5.
/// Returns (physical point, weight including arclength, parameter t).
pub fn composite_face_quad(pa: [f64; 2], pb: [f64; 2]) -> Vec<([f64; 2], f64, f64)> {
    // Three-point Gauss nodes on (0,1): 1/2 and 1/2 +- sqrt(3/5)/2.
    const C: f64 = 0.3872983346207417; // sqrt(3/5) / 2
    const NODES: [(f64, f64); 3] = [(0.5 - C, 5.0 / 18.0), (0.5, 4.0 / 9.0), (0.5 + C, 5.0 / 18.0)];
    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
    let mut out = Vec::with_capacity(6);
    for half in 0..2 {
        for (s, w) in NODES {
            let t = 0.5 * (half as f64 + s);
            let x = pa[0] + t * (pb[0] - pa[0]);
            let y = pa[1] + t * (pb[1] - pa[1]);
            out.push(([x, y], 0.5 * w * len, t));
        }
    }
    out
}

/// Dense row-major matrix with the bare operations the oracles need.
pub struct DenseMat {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(nrows: usize, ncols: usize) -> DenseMat {
        DenseMat { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        assert_eq!(self.data.len(), other.len());
        self.data
            .iter()
            .zip(other)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Gaussian elimination with partial pivoting; panics on a numerically
/// singular pivot. Overwrites its inputs, returns the solution.
pub fn dense_solve(a: &DenseMat, b: &[f64]) -> Vec<f64> {
    let n = a.nrows;
    assert_eq!(n, a.ncols);
    assert_eq!(n, b.len());
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col].abs() < 1e-300 {
            panic!("singular pivot at column {col}");
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let factor = m[r * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                m[r * n + j] -= factor * m[col * n + j];
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= m[col * n + col];
        for r in 0..col {
            x[r] -= m[r * n + col] * x[col];
        }
    }
    x
}

/// A unit coefficient vector: basis function `dof` of one space.
pub fn unit_fn(spaces: &Spaces, space: SpaceId, dof: usize) -> FEFunction {
    let mut f = spaces.zero(space);
    f.coeffs[dof] = 1.0;
    f
}

/// Per-element tables of every global basis function of the three
/// spaces at the composite quadrature points.
pub struct ElementTables {
    pub quad: Vec<([f64; 2], f64)>,
    pub v_dofs: Vec<usize>,
    pub d_dofs: Vec<usize>,
    pub w_dofs: Vec<usize>,
    /// [local dof][point]
    pub v_val: Vec<Vec<f64>>,
    pub v_grad: Vec<Vec<[f64; 2]>>,
    pub d_val: Vec<Vec<[f64; 2]>>,
    pub d_div: Vec<Vec<f64>>,
    pub w_val: Vec<Vec<f64>>,
    pub w_grad: Vec<Vec<[f64; 2]>>,
    pub area: f64,
}

impl ElementTables {
    pub fn build(spaces: &Spaces, e: usize) -> ElementTables {
        let quad = composite_tri_quad(spaces.mesh.triangle_coords(e));
        let mut v_dofs = vec![0; spaces.v_nloc()];
        let mut d_dofs = vec![0; spaces.d_nloc()];
        let mut w_dofs = vec![0; spaces.w_nloc()];
        spaces.v_element_dofs(e, &mut v_dofs);
        spaces.d_element_dofs(e, &mut d_dofs);
        spaces.w_element_dofs(e, &mut w_dofs);
        let mut t = ElementTables {
            quad,
            v_dofs,
            d_dofs,
            w_dofs,
            v_val: Vec::new(),
            v_grad: Vec::new(),
            d_val: Vec::new(),
            d_div: Vec::new(),
            w_val: Vec::new(),
            w_grad: Vec::new(),
            area: spaces.mesh.area(e),
        };
        for &dof in &t.v_dofs {
            let f = unit_fn(spaces, SpaceId::V, dof);
            t.v_val.push(
                t.quad.iter().map(|&([x, y], _)| spaces.eval_v_on_element(&f, e, x, y)).collect(),
            );
            t.v_grad.push(
                t.quad
                    .iter()
                    .map(|&([x, y], _)| spaces.eval_v_grad_on_element(&f, e, x, y))
                    .collect(),
            );
        }
        for &dof in &t.d_dofs {
            let f = unit_fn(spaces, SpaceId::D, dof);
            t.d_val.push(
                t.quad.iter().map(|&([x, y], _)| spaces.eval_d_on_element(&f, e, x, y)).collect(),
            );
            t.d_div.push(
                t.quad
                    .iter()
                    .map(|&([x, y], _)| spaces.eval_d_div_on_element(&f, e, x, y))
                    .collect(),
            );
        }
        for &dof in &t.w_dofs {
            let f = unit_fn(spaces, SpaceId::W, dof);
            t.w_val.push(
                t.quad.iter().map(|&([x, y], _)| spaces.eval_w_on_element(&f, e, x, y)).collect(),
            );
            t.w_grad.push(
                t.quad
                    .iter()
                    .map(|&([x, y], _)| spaces.eval_w_grad_on_element(&f, e, x, y))
                    .collect(),
            );
        }
        t
    }
}

fn apply_a(a: [[f64; 2]; 2], g: [f64; 2]) -> [f64; 2] {
    [a[0][0] * g[0] + a[0][1] * g[1], a[1][0] * g[0] + a[1][1] * g[1]]
}

/// Brute-force build of the flux-misfit stabilizer over all (V, D)
/// dofs, including the Tikhonov term and, when the multiplier space is
/// coarser than the primal one, the reaction compensation term.
pub fn dense_s(spaces: &Spaces, a: [[f64; 2]; 2], mu: f64) -> DenseMat {
    let nv = spaces.v.total;
    let nd = spaces.d.total;
    let mut s = DenseMat::zeros(nv + nd, nv + nd);
    let h = spaces.h;
    let tik = 0.5 * spaces.config.gamma_t * h.powi(2 * spaces.config.k as i32);
    let comp_wgt = if spaces.config.needs_multiplier_compensation() {
        0.5 * mu * mu * h * h
    } else {
        0.0
    };
    for e in 0..spaces.n_elements() {
        let t = ElementTables::build(spaces, e);
        let nq = t.quad.len();
        // Flux misfit between every pair of combined-space functions.
        for (li, &gi) in t.v_dofs.iter().enumerate() {
            for (lj, &gj) in t.v_dofs.iter().enumerate() {
                let mut acc = 0.0;
                let mut reg = 0.0;
                for q in 0..nq {
                    let w = t.quad[q].1;
                    let agi = apply_a(a, t.v_grad[li][q]);
                    let agj = apply_a(a, t.v_grad[lj][q]);
                    acc += w * (agi[0] * agj[0] + agi[1] * agj[1]);
                    reg += w
                        * (t.v_grad[li][q][0] * t.v_grad[lj][q][0]
                            + t.v_grad[li][q][1] * t.v_grad[lj][q][1]);
                }
                s.add(gi, gj, 0.5 * acc + tik * reg);
            }
            for (lb, &gb) in t.d_dofs.iter().enumerate() {
                let mut acc = 0.0;
                for q in 0..nq {
                    let w = t.quad[q].1;
                    let agi = apply_a(a, t.v_grad[li][q]);
                    acc += w * (agi[0] * t.d_val[lb][q][0] + agi[1] * t.d_val[lb][q][1]);
                }
                s.add(gi, nv + gb, -0.5 * acc);
                s.add(nv + gb, gi, -0.5 * acc);
            }
        }
        for (la, &ga) in t.d_dofs.iter().enumerate() {
            for (lb, &gb) in t.d_dofs.iter().enumerate() {
                let mut acc = 0.0;
                for q in 0..nq {
                    let w = t.quad[q].1;
                    acc += w
                        * (t.d_val[la][q][0] * t.d_val[lb][q][0]
                            + t.d_val[la][q][1] * t.d_val[lb][q][1]);
                }
                s.add(nv + ga, nv + gb, 0.5 * acc);
            }
        }
        if comp_wgt > 0.0 {
            // (v - pi v, u - pi u) with pi the multiplier-space
            // projection: mass minus the orthonormal moment products.
            let nw = t.w_dofs.len();
            for (li, &gi) in t.v_dofs.iter().enumerate() {
                for (lj, &gj) in t.v_dofs.iter().enumerate() {
                    let mut mass = 0.0;
                    for q in 0..nq {
                        mass += t.quad[q].1 * t.v_val[li][q] * t.v_val[lj][q];
                    }
                    let mut proj = 0.0;
                    for c in 0..nw {
                        let mut mi = 0.0;
                        let mut mj = 0.0;
                        for q in 0..nq {
                            mi += t.quad[q].1 * t.v_val[li][q] * t.w_val[c][q];
                            mj += t.quad[q].1 * t.v_val[lj][q] * t.w_val[c][q];
                        }
                        proj += mi * mj;
                    }
                    s.add(gi, gj, comp_wgt * (mass - proj));
                }
            }
        }
    }
    s
}

/// Brute-force build of the constraint rows (div q + mu v against every
/// multiplier basis function).
pub fn dense_b(spaces: &Spaces, mu: f64) -> DenseMat {
    let nv = spaces.v.total;
    let mut b = DenseMat::zeros(spaces.w.total, nv + spaces.d.total);
    for e in 0..spaces.n_elements() {
        let t = ElementTables::build(spaces, e);
        let nq = t.quad.len();
        for (lc, &gc) in t.w_dofs.iter().enumerate() {
            for (li, &gi) in t.v_dofs.iter().enumerate() {
                let mut acc = 0.0;
                for q in 0..nq {
                    acc += t.quad[q].1 * mu * t.v_val[li][q] * t.w_val[lc][q];
                }
                b.add(gc, gi, acc);
            }
            for (lb, &gb) in t.d_dofs.iter().enumerate() {
                let mut acc = 0.0;
                for q in 0..nq {
                    acc += t.quad[q].1 * t.d_div[lb][q] * t.w_val[lc][q];
                }
                b.add(gc, nv + gb, acc);
            }
        }
    }
    b
}

/// Brute-force build of the dual stabilizer over all multiplier dofs.
pub fn dense_sstar(spaces: &Spaces) -> DenseMat {
    use cauchy_mfem::spaces::DualStabilizer;
    let n = spaces.w.total;
    let mut s = DenseMat::zeros(n, n);
    match spaces.config.dual {
        DualStabilizer::None => s,
        DualStabilizer::Mass => {
            for e in 0..spaces.n_elements() {
                let t = ElementTables::build(spaces, e);
                for (lc, &gc) in t.w_dofs.iter().enumerate() {
                    for (ld, &gd) in t.w_dofs.iter().enumerate() {
                        let mut acc = 0.0;
                        for q in 0..t.quad.len() {
                            acc += t.quad[q].1 * t.w_val[lc][q] * t.w_val[ld][q];
                        }
                        s.add(gc, gd, acc);
                    }
                }
            }
            s
        }
        DualStabilizer::ProjectedGradient => {
            let wgt = 0.5 * spaces.config.gamma_star;
            let l = spaces.config.l;
            for e in 0..spaces.n_elements() {
                let t = ElementTables::build(spaces, e);
                let nq = t.quad.len();
                for (lc, &gc) in t.w_dofs.iter().enumerate() {
                    for (ld, &gd) in t.w_dofs.iter().enumerate() {
                        let mut grad = 0.0;
                        let mut int_c = [0.0; 2];
                        let mut int_d = [0.0; 2];
                        for q in 0..nq {
                            let w = t.quad[q].1;
                            grad += w
                                * (t.w_grad[lc][q][0] * t.w_grad[ld][q][0]
                                    + t.w_grad[lc][q][1] * t.w_grad[ld][q][1]);
                            int_c[0] += w * t.w_grad[lc][q][0];
                            int_c[1] += w * t.w_grad[lc][q][1];
                            int_d[0] += w * t.w_grad[ld][q][0];
                            int_d[1] += w * t.w_grad[ld][q][1];
                        }
                        // Subtract the projection onto constant fields
                        // (only defined for l >= 1; l = 0 keeps the
                        // whole gradient).
                        let proj = if l >= 1 {
                            (int_c[0] * int_d[0] + int_c[1] * int_d[1]) / t.area
                        } else {
                            0.0
                        };
                        s.add(gc, gd, wgt * (grad - proj));
                    }
                }
            }
            s
        }
    }
}

/// The library's boundary lifts as plain coefficient vectors. Their
/// values are validated separately through pointwise trace checks, so
/// the system oracles can reuse them for the elimination bookkeeping
/// without depending on the face-polynomial sign conventions.
pub fn dense_lift(spaces: &Spaces, problem: &ProblemSpec) -> (Vec<f64>, Vec<f64>) {
    (problem.dirichlet_lift(spaces).coeffs, problem.neumann_lift(spaces).coeffs)
}

/// The saddle system over free dofs, built densely from the block
/// oracles: rows/cols ordered free V, free D, all W; boundary data
/// eliminated onto the right-hand side.
pub fn dense_full_system(spaces: &Spaces, problem: &ProblemSpec) -> (DenseMat, Vec<f64>) {
    let s = dense_s(spaces, problem.a, problem.mu);
    let b = dense_b(spaces, problem.mu);
    let st = dense_sstar(spaces);
    let (lift_v, lift_d) = dense_lift(spaces, problem);
    let nv = spaces.v.total;
    let nd = spaces.d.total;
    let nvf = spaces.v.n_free;
    let ndf = spaces.d.n_free;
    let nw = spaces.w.total;
    let n = nvf + ndf + nw;
    // Combined free index over (V, D) and the combined lift vector.
    let mut free = vec![None; nv + nd];
    let mut lift = vec![0.0; nv + nd];
    for dof in 0..nv {
        free[dof] = spaces.v.free_index[dof];
        lift[dof] = lift_v[dof];
    }
    for dof in 0..nd {
        free[nv + dof] = spaces.d.free_index[dof].map(|i| nvf + i);
        lift[nv + dof] = lift_d[dof];
    }
    let mut k = DenseMat::zeros(n, n);
    let mut rhs = vec![0.0; n];
    for row in 0..nv + nd {
        let Some(fi) = free[row] else { continue };
        for col in 0..nv + nd {
            match free[col] {
                Some(fj) => k.add(fi, fj, s.at(row, col)),
                None => rhs[fi] -= s.at(row, col) * lift[col],
            }
        }
        for c in 0..nw {
            k.add(fi, nvf + ndf + c, b.at(c, row));
        }
    }
    for c in 0..nw {
        let fc = nvf + ndf + c;
        for col in 0..nv + nd {
            match free[col] {
                Some(fj) => k.add(fc, fj, b.at(c, col)),
                None => rhs[fc] -= b.at(c, col) * lift[col],
            }
        }
        for d in 0..nw {
            k.add(fc, nvf + ndf + d, -st.at(c, d));
        }
    }
    // Source moments against the multiplier basis.
    for e in 0..spaces.n_elements() {
        let t = ElementTables::build(spaces, e);
        for (lc, &gc) in t.w_dofs.iter().enumerate() {
            let mut acc = 0.0;
            for (q, &([x, y], w)) in t.quad.iter().enumerate() {
                acc += w * (problem.f)(x, y) * t.w_val[lc][q];
            }
            rhs[nvf + ndf + gc] += acc;
        }
    }
    (k, rhs)
}

/// The least-squares system over free (V, D) dofs, built densely:
/// stabilizer plus the conservation-misfit normal product.
pub fn dense_reduced_system(spaces: &Spaces, problem: &ProblemSpec) -> (DenseMat, Vec<f64>) {
    let mu = problem.mu;
    let s = dense_s(spaces, problem.a, mu);
    let (lift_v, lift_d) = dense_lift(spaces, problem);
    let nv = spaces.v.total;
    let nd = spaces.d.total;
    let nvf = spaces.v.n_free;
    let n = nvf + spaces.d.n_free;
    let mut free = vec![None; nv + nd];
    let mut lift = vec![0.0; nv + nd];
    for dof in 0..nv {
        free[dof] = spaces.v.free_index[dof];
        lift[dof] = lift_v[dof];
    }
    for dof in 0..nd {
        free[nv + dof] = spaces.d.free_index[dof].map(|i| nvf + i);
        lift[nv + dof] = lift_d[dof];
    }
    // Dense misfit Gram over all dofs plus source moments per dof.
    let nt = nv + nd;
    let mut gram = DenseMat::zeros(nt, nt);
    let mut source = vec![0.0; nt];
    for e in 0..spaces.n_elements() {
        let t = ElementTables::build(spaces, e);
        let nq = t.quad.len();
        // Misfit factor of each combined dof at each point.
        let mut mis: Vec<(usize, Vec<f64>)> = Vec::new();
        for (li, &gi) in t.v_dofs.iter().enumerate() {
            mis.push((gi, (0..nq).map(|q| mu * t.v_val[li][q]).collect()));
        }
        for (lb, &gb) in t.d_dofs.iter().enumerate() {
            mis.push((nv + gb, (0..nq).map(|q| t.d_div[lb][q]).collect()));
        }
        for (ga, va) in &mis {
            for (gb, vb) in &mis {
                let mut acc = 0.0;
                for q in 0..nq {
                    acc += t.quad[q].1 * va[q] * vb[q];
                }
                gram.add(*ga, *gb, acc);
            }
            let mut acc = 0.0;
            for q in 0..nq {
                let ([x, y], w) = t.quad[q];
                acc += w * (problem.f)(x, y) * va[q];
            }
            source[*ga] += acc;
        }
    }
    let mut r = DenseMat::zeros(n, n);
    let mut rhs = vec![0.0; n];
    for row in 0..nt {
        let Some(fi) = free[row] else { continue };
        rhs[fi] += source[row];
        for col in 0..nt {
            let entry = s.at(row, col) + gram.at(row, col);
            match free[col] {
                Some(fj) => r.add(fi, fj, entry),
                None => rhs[fi] -= entry * lift[col],
            }
        }
    }
    (r, rhs)
}

/// Union-jack spaces with the data boundary on y = y0 and the Dirichlet
/// predicate optionally extended to the lateral sides.
pub fn tagged_spaces(
    nx: usize,
    ny: usize,
    bbox: Rect,
    config: SpaceConfig,
    lateral_dirichlet: bool,
) -> Spaces {
    let mesh = Arc::new(generate_union_jack(nx, ny, bbox).unwrap());
    let tol = 1e-12 * mesh.domain_bbox.diameter();
    let y0 = mesh.domain_bbox.y0;
    let x0 = mesh.domain_bbox.x0;
    let x1 = mesh.domain_bbox.x1;
    let faces = Arc::new(build_face_table(&mesh).unwrap());
    let tags = Arc::new(
        tag_boundary(
            &mesh,
            &faces,
            move |_, y| (y - y0).abs() <= tol,
            move |x, y| {
                (y - y0).abs() <= tol
                    || (lateral_dirichlet && ((x - x0).abs() <= tol || (x - x1).abs() <= tol))
            },
        )
        .unwrap(),
    );
    Spaces::build(mesh, faces, tags, config).unwrap()
}

/// Polynomial data of low degree: exact under both quadratures, nonzero
/// on every data component.
pub fn affine_problem(a: [[f64; 2]; 2], mu: f64) -> ProblemSpec {
    ProblemSpec::new(
        a,
        mu,
        |x, y| 1.0 + x - 2.0 * y,
        |x, y| 1.0 + 2.0 * x - y,
        |x, y| 2.0 + x - y,
    )
    .unwrap()
}
