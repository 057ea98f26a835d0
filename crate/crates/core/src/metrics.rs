//! Error norms, residual quantities, and convergence-rate fitting.
//!
//! Everything a run reports lives here: relative L2 / H1-seminorm
//! errors (globally and on the lower subdomain where the continuous
//! problem actually controls the solution), the combined stabilizer +
//! equation-residual norm of the error, the broken 1,h norm of the
//! multiplier, cellwise conservation, and the recovered boundary flux.
//! Exact fields are sampled directly at the quadrature points rather
//! than interpolated, so the reported numbers are contaminated only by
//! quadrature error (the volume rule is exact well past degree 2k+2).

use crate::assembly::local::ElementContext;
use crate::assembly::{self, local, ProblemSpec};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::solvers::DiscreteSolution;
use crate::spaces::basis::face_legendre;
use crate::spaces::{FEFunction, SpaceId, Spaces};

/// Every scalar a convergence study records for one mesh.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub rel_l2_global: f64,
    pub rel_l2_local: f64,
    pub rel_h1s_global: f64,
    pub rel_h1s_local: f64,
    pub abs_l2_global: f64,
    pub abs_l2_local: f64,
    pub abs_h1s_global: f64,
    pub abs_h1s_local: f64,
    /// Stabilizer-plus-residual norm of the error pair; the divergence
    /// misfit is weighted by h when a multiplier is present.
    pub tnorm_residual: f64,
    /// Broken 1,h norm of the multiplier (0 without one).
    pub z_1h_norm: f64,
    pub max_conservation_residual: f64,
    /// L2 distance on the data boundary between the prescribed flux
    /// and the normal trace of the discrete flux.
    pub boundary_flux_error: f64,
    /// Set when a relative error had a vanishing denominator and the
    /// absolute value was reported in its place.
    pub absolute_fallback: bool,
    pub iterations: usize,
    pub h: f64,
    pub dof_v: usize,
    pub dof_d: usize,
    pub dof_w: usize,
}

impl ErrorReport {
    /// The residual quantity the a priori analysis bounds: the error
    /// tnorm plus (when a multiplier exists) its broken norm.
    pub fn residual_quantity(&self) -> f64 {
        self.tnorm_residual + self.z_1h_norm
    }
}

fn guarded_ratio(num: f64, den: f64, fallback: &mut bool) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        *fallback = true;
        num
    }
}

/// Errors of a discrete solution against a known exact field.
///
/// The local variants integrate only over elements lying entirely in
/// the lower fraction `sigma` of the domain height; `sigma = 1`
/// reproduces the global numbers.
pub fn error_norms<U, G>(
    spaces: &Spaces,
    problem: &ProblemSpec,
    u_exact: U,
    grad_u_exact: G,
    solution: &DiscreteSolution,
    sigma: f64,
) -> Result<ErrorReport>
where
    U: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> [f64; 2],
{
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::Config(format!("sigma must lie in (0, 1], got {sigma}")));
    }
    let bbox = &spaces.mesh.domain_bbox;
    let y_cut = bbox.y0 + sigma * (bbox.y1 - bbox.y0) + 1e-12 * bbox.diameter();
    let a = problem.a;
    let mu = problem.mu;
    let cfg = &spaces.config;
    let h = spaces.h;
    let zeta = if solution.z_h.is_some() { 1 } else { 0 };

    let nv = spaces.v_nloc();
    let nd = spaces.d_nloc();
    let nw = spaces.w_nloc();
    let mut vdofs = [0usize; local::MAX_V];
    let mut ddofs = [0usize; local::MAX_D];

    let mut l2_num = [0.0f64; 2]; // [global, local]
    let mut l2_den = [0.0f64; 2];
    let mut h1_num = [0.0f64; 2];
    let mut h1_den = [0.0f64; 2];
    let mut s_part = 0.0f64;
    let mut misfit_part = 0.0f64;

    let comp_wgt = if cfg.needs_multiplier_compensation() && mu != 0.0 {
        0.5 * mu * mu * h * h
    } else {
        0.0
    };
    let tik_wgt = if cfg.gamma_t > 0.0 { 0.5 * cfg.gamma_t * h.powi(2 * cfg.k as i32) } else { 0.0 };

    for e in 0..spaces.n_elements() {
        let ctx = ElementContext::new(spaces, e);
        spaces.v_element_dofs(e, &mut vdofs[..nv]);
        spaces.d_element_dofs(e, &mut ddofs[..nd]);
        let local_elem = spaces.geoms[e].coords.iter().all(|c| c[1] <= y_cut);
        let mut comp_sq = 0.0;
        let mut comp_moments = [0.0f64; local::MAX_W];
        for q in 0..ctx.nq {
            let wq = ctx.weights[q];
            let [x, y] = ctx.points[q];
            let ue = u_exact(x, y);
            let ge = grad_u_exact(x, y);
            let pe = [a[0][0] * ge[0] + a[0][1] * ge[1], a[1][0] * ge[0] + a[1][1] * ge[1]];

            let mut uh = 0.0;
            let mut guh = [0.0, 0.0];
            for i in 0..nv {
                let c = solution.u_h.coeffs[vdofs[i]];
                uh += c * ctx.v_val[q][i];
                guh[0] += c * ctx.v_grad[q][i][0];
                guh[1] += c * ctx.v_grad[q][i][1];
            }
            let mut ph = [0.0, 0.0];
            let mut divph = 0.0;
            for b in 0..nd {
                let c = solution.p_h.coeffs[ddofs[b]];
                ph[0] += c * ctx.d_val[q][b][0];
                ph[1] += c * ctx.d_val[q][b][1];
                divph += c * ctx.d_div[q][b];
            }

            let du = ue - uh;
            let dg = [ge[0] - guh[0], ge[1] - guh[1]];
            l2_num[0] += wq * du * du;
            l2_den[0] += wq * ue * ue;
            h1_num[0] += wq * (dg[0] * dg[0] + dg[1] * dg[1]);
            h1_den[0] += wq * (ge[0] * ge[0] + ge[1] * ge[1]);
            if local_elem {
                l2_num[1] += wq * du * du;
                l2_den[1] += wq * ue * ue;
                h1_num[1] += wq * (dg[0] * dg[0] + dg[1] * dg[1]);
                h1_den[1] += wq * (ge[0] * ge[0] + ge[1] * ge[1]);
            }

            // Stabilizer energy of the error pair; the exact pair
            // contributes nothing (A grad u = p pointwise).
            let adg = [a[0][0] * dg[0] + a[0][1] * dg[1], a[1][0] * dg[0] + a[1][1] * dg[1]];
            let dp = [pe[0] - ph[0], pe[1] - ph[1]];
            let r0 = adg[0] - dp[0];
            let r1 = adg[1] - dp[1];
            s_part += 0.5 * wq * (r0 * r0 + r1 * r1);
            s_part += tik_wgt * wq * (dg[0] * dg[0] + dg[1] * dg[1]);
            if comp_wgt > 0.0 {
                comp_sq += wq * du * du;
                for c in 0..nw {
                    comp_moments[c] += wq * du * ctx.w_val[q][c];
                }
            }

            // div(p - p_h) + mu (u - u_h) = f - div p_h - mu u_h since
            // the exact pair satisfies the equation with the clean f.
            let mis = (problem.f)(x, y) - divph - mu * uh;
            misfit_part += wq * mis * mis;
        }
        if comp_wgt > 0.0 {
            let proj: f64 = comp_moments[..nw].iter().map(|m| m * m).sum();
            s_part += comp_wgt * (comp_sq - proj);
        }
    }

    let mut absolute_fallback = false;
    let rel = |num: &[f64; 2], den: &[f64; 2], flag: &mut bool| {
        let g = guarded_ratio(num[0].sqrt(), den[0].sqrt(), flag);
        let l = guarded_ratio(num[1].sqrt(), den[1].sqrt(), flag);
        (g, l)
    };
    let (rel_l2_global, rel_l2_local) = rel(&l2_num, &l2_den, &mut absolute_fallback);
    let (rel_h1s_global, rel_h1s_local) = rel(&h1_num, &h1_den, &mut absolute_fallback);

    let tnorm_residual = (s_part + h.powi(2 * zeta) * misfit_part).sqrt();
    let z_1h_norm = match &solution.z_h {
        Some(z) => norm_1h(spaces, z),
        None => 0.0,
    };

    let f_tilde = problem.volume_source(spaces);
    let cons = assembly::conservation_residual(spaces, &solution.u_h, &solution.p_h, &f_tilde, mu);
    let max_conservation_residual = cons.iter().fold(0.0f64, |m, r| m.max(r.abs()));

    Ok(ErrorReport {
        rel_l2_global,
        rel_l2_local,
        rel_h1s_global,
        rel_h1s_local,
        abs_l2_global: l2_num[0].sqrt(),
        abs_l2_local: l2_num[1].sqrt(),
        abs_h1s_global: h1_num[0].sqrt(),
        abs_h1s_local: h1_num[1].sqrt(),
        tnorm_residual,
        z_1h_norm,
        max_conservation_residual,
        boundary_flux_error: boundary_flux_error(spaces, problem, &solution.p_h),
        absolute_fallback,
        iterations: solution.iterations,
        h,
        dof_v: spaces.v.total,
        dof_d: spaces.d.total,
        dof_w: if solution.z_h.is_some() { spaces.w.total } else { 0 },
    })
}

/// L2 distance on the flux-data boundary between the prescribed
/// conormal flux and the normal trace of the discrete flux. The normal
/// trace of a flux function on a face is the polynomial whose moments
/// are exactly the face dofs, so no volume evaluation is needed.
pub fn boundary_flux_error(spaces: &Spaces, problem: &ProblemSpec, p_h: &FEFunction) -> f64 {
    assert_eq!(p_h.space, SpaceId::D);
    let l = spaces.config.l;
    let frule = quadrature::face_rule();
    let mut total = 0.0;
    for f in 0..spaces.faces.n_faces() {
        if !spaces.tags.sigma_neumann(f) {
            continue;
        }
        let face = &spaces.faces.faces[f];
        let [ax, ay] = spaces.mesh.vertices[face.a];
        let [bx, by] = spaces.mesh.vertices[face.b];
        for q in 0..frule.len() {
            let t = frule.points[q];
            let (x, y) = (ax + t * (bx - ax), ay + t * (by - ay));
            let mut trace = 0.0;
            for j in 0..=l {
                trace += p_h.coeffs[f * (l + 1) + j] * face_legendre(j, face.length, t);
            }
            let d = (problem.psi)(x, y) - trace;
            total += frule.weights[q] * face.length * d * d;
        }
    }
    total.sqrt()
}

/// Stabilizer-plus-residual norm of a discrete pair:
/// sqrt(s[(v,q),(v,q)] + ||h^zeta (div q + mu v)||^2).
///
/// With zeta = 0 the square is exactly the least-squares quadratic
/// form; zeta = 1 is the weaker norm the saddle-point analysis uses.
pub fn triple_norm(
    spaces: &Spaces,
    a: [[f64; 2]; 2],
    mu: f64,
    v: &FEFunction,
    q: &FEFunction,
    zeta: usize,
) -> Result<f64> {
    if zeta > 1 {
        return Err(Error::Config(format!("the residual weight exponent must be 0 or 1, got {zeta}")));
    }
    assert_eq!(v.space, SpaceId::V);
    assert_eq!(q.space, SpaceId::D);
    let nv = spaces.v_nloc();
    let nd = spaces.d_nloc();
    let mut vdofs = [0usize; local::MAX_V];
    let mut ddofs = [0usize; local::MAX_D];
    let mut s_part = 0.0;
    let mut misfit = 0.0;
    for e in 0..spaces.n_elements() {
        let ctx = ElementContext::new(spaces, e);
        let lm = local::local_matrices(spaces, a, mu, &ctx);
        spaces.v_element_dofs(e, &mut vdofs[..nv]);
        spaces.d_element_dofs(e, &mut ddofs[..nd]);
        let mut vl = [0.0f64; local::MAX_V];
        let mut dl = [0.0f64; local::MAX_D];
        for i in 0..nv {
            vl[i] = v.coeffs[vdofs[i]];
        }
        for b in 0..nd {
            dl[b] = q.coeffs[ddofs[b]];
        }
        for i in 0..nv {
            for j in 0..nv {
                s_part += vl[i] * lm.svv[i][j] * vl[j];
            }
            for b in 0..nd {
                s_part += 2.0 * vl[i] * lm.svd[i][b] * dl[b];
            }
        }
        for b in 0..nd {
            for b2 in 0..nd {
                s_part += dl[b] * lm.sdd[b][b2] * dl[b2];
            }
        }
        for qp in 0..ctx.nq {
            let mut r = 0.0;
            for i in 0..nv {
                r += mu * vl[i] * ctx.v_val[qp][i];
            }
            for b in 0..nd {
                r += dl[b] * ctx.d_div[qp][b];
            }
            misfit += ctx.weights[qp] * r * r;
        }
    }
    // Rounding can push a tiny energy below zero.
    Ok((s_part + spaces.h.powi(2 * zeta as i32) * misfit).max(0.0).sqrt())
}

/// Broken 1,h norm: elementwise gradients plus face-projected jumps
/// weighted by the inverse face length. Faces carrying boundary data
/// are skipped; inaccessible boundary faces contribute their trace.
pub fn norm_1h(spaces: &Spaces, x_h: &FEFunction) -> f64 {
    let eval = |e: usize, x: f64, y: f64| -> f64 {
        match x_h.space {
            SpaceId::V => spaces.eval_v_on_element(x_h, e, x, y),
            SpaceId::W => spaces.eval_w_on_element(x_h, e, x, y),
            SpaceId::D => panic!("the broken 1,h norm is for scalar functions"),
        }
    };
    let grad = |e: usize, x: f64, y: f64| -> [f64; 2] {
        match x_h.space {
            SpaceId::V => spaces.eval_v_grad_on_element(x_h, e, x, y),
            SpaceId::W => spaces.eval_w_grad_on_element(x_h, e, x, y),
            SpaceId::D => unreachable!(),
        }
    };
    let mut total = 0.0;
    for e in 0..spaces.n_elements() {
        let ctx = ElementContext::new(spaces, e);
        for q in 0..ctx.nq {
            let [x, y] = ctx.points[q];
            let g = grad(e, x, y);
            total += ctx.weights[q] * (g[0] * g[0] + g[1] * g[1]);
        }
    }
    let l = spaces.config.l;
    let frule = quadrature::face_rule();
    for f in 0..spaces.faces.n_faces() {
        let face = &spaces.faces.faces[f];
        if face.is_boundary() && spaces.tags.sigma_dirichlet(f) {
            continue;
        }
        let [ax, ay] = spaces.mesh.vertices[face.a];
        let [bx, by] = spaces.mesh.vertices[face.b];
        // Moments of the jump against the orthonormal face basis up to
        // degree l; orthonormality turns the projected L2 norm into a
        // plain coefficient sum.
        let mut moments = [0.0f64; 2];
        for q in 0..frule.len() {
            let t = frule.points[q];
            let (x, y) = (ax + t * (bx - ax), ay + t * (by - ay));
            let mut jump = eval(face.left, x, y);
            if let Some(right) = face.right {
                jump -= eval(right, x, y);
            }
            for (j, m) in moments[..=l].iter_mut().enumerate() {
                *m += frule.weights[q] * face.length * jump * face_legendre(j, face.length, t);
            }
        }
        let proj_sq: f64 = moments[..=l].iter().map(|m| m * m).sum();
        total += proj_sq / face.length;
    }
    total.sqrt()
}

/// The residual quantity bounded a priori: error tnorm plus the broken
/// multiplier norm when a multiplier is part of the formulation.
pub fn residual_report<U, G>(
    spaces: &Spaces,
    problem: &ProblemSpec,
    u_exact: U,
    grad_u_exact: G,
    solution: &DiscreteSolution,
) -> Result<f64>
where
    U: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> [f64; 2],
{
    let report = error_norms(spaces, problem, u_exact, grad_u_exact, solution, 1.0)?;
    Ok(report.residual_quantity())
}

/// Rows of (h, named metrics) collected over a refinement ladder.
#[derive(Debug, Clone)]
pub struct RateTable {
    pub names: Vec<String>,
    pub h: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl RateTable {
    pub fn new(names: Vec<String>) -> RateTable {
        RateTable { names, h: Vec::new(), rows: Vec::new() }
    }

    /// Append one mesh level; h must strictly decrease down the table.
    pub fn push_row(&mut self, h: f64, values: Vec<f64>) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::Config(format!(
                "row has {} values for {} metrics",
                values.len(),
                self.names.len()
            )));
        }
        if let Some(&last) = self.h.last() {
            if h >= last {
                return Err(Error::Config(format!(
                    "mesh sizes must strictly decrease: {h} after {last}"
                )));
            }
        }
        self.h.push(h);
        self.rows.push(values);
        Ok(())
    }
}

/// Least-squares slope of log(metric) against log(h) over the last
/// `window` rows, one slope per metric. A metric without at least two
/// positive finite values in the window gets NaN.
pub fn fit_rates(table: &RateTable, window: usize) -> Result<Vec<(String, f64)>> {
    if window < 2 {
        return Err(Error::Config(format!("rate window must be at least 2, got {window}")));
    }
    if table.h.len() < window {
        return Err(Error::Config(format!(
            "rate window {window} exceeds the {} table rows",
            table.h.len()
        )));
    }
    let start = table.h.len() - window;
    let mut out = Vec::with_capacity(table.names.len());
    for (c, name) in table.names.iter().enumerate() {
        let pts: Vec<(f64, f64)> = (start..table.h.len())
            .filter_map(|r| {
                let v = table.rows[r][c];
                (v > 0.0 && v.is_finite()).then(|| (table.h[r].ln(), v.ln()))
            })
            .collect();
        let slope = if pts.len() < 2 {
            f64::NAN
        } else {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            sxy / sxx
        };
        out.push((name.clone(), slope));
    }
    Ok(out)
}
