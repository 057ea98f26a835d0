//! Per-element quadrature tables and dense local blocks.
//!
//! Every global assembler walks the elements once; for each element it
//! evaluates all basis functions at the volume quadrature points and
//! accumulates the small dense blocks below, which the caller scatters
//! into the global system.

use crate::quadrature;
use crate::spaces::basis;
use crate::spaces::{DualStabilizer, Spaces};

pub(crate) const MAX_V: usize = 6;
pub(crate) const MAX_D: usize = 8;
pub(crate) const MAX_W: usize = 6;

#[inline]
pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// All basis values of one element at the volume quadrature points,
/// with physical weights (reference weights times the Jacobian).
pub(crate) struct ElementContext {
    pub nq: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub v_val: Vec<[f64; MAX_V]>,
    pub v_grad: Vec<[[f64; 2]; MAX_V]>,
    pub d_val: Vec<[[f64; 2]; MAX_D]>,
    pub d_div: Vec<[f64; MAX_D]>,
    pub w_val: Vec<[f64; MAX_W]>,
    pub w_grad: Vec<[[f64; 2]; MAX_W]>,
    pub area: f64,
}

impl ElementContext {
    pub fn new(spaces: &Spaces, e: usize) -> ElementContext {
        let rule = quadrature::reference_triangle_rule();
        let nq = rule.len();
        let geom = &spaces.geoms[e];
        let k = spaces.config.k;
        let nb = spaces.w_nloc();
        let mut ctx = ElementContext {
            nq,
            points: Vec::with_capacity(nq),
            weights: Vec::with_capacity(nq),
            v_val: vec![[0.0; MAX_V]; nq],
            v_grad: vec![[[0.0; 2]; MAX_V]; nq],
            d_val: vec![[[0.0; 2]; MAX_D]; nq],
            d_div: vec![[0.0; MAX_D]; nq],
            w_val: vec![[0.0; MAX_W]; nq],
            w_grad: vec![[[0.0; 2]; MAX_W]; nq],
            area: geom.area,
        };
        for (q, pt) in rule.points.iter().enumerate() {
            let (xi, eta) = (pt[0], pt[1]);
            let lam = [1.0 - xi - eta, xi, eta];
            let [x, y] = geom.map_ref(xi, eta);
            ctx.points.push([x, y]);
            ctx.weights.push(rule.weights[q] * 2.0 * geom.area);
            basis::lagrange_values(k, lam, &mut ctx.v_val[q]);
            basis::lagrange_gradients(k, lam, &geom.grad_lambda, &mut ctx.v_grad[q]);
            spaces.rt_bases[e].eval(x, y, &mut ctx.d_val[q]);
            spaces.rt_bases[e].eval_div(x, y, &mut ctx.d_div[q]);
            spaces.w_bases[e].eval(x, y, &mut ctx.w_val[q][..nb]);
            spaces.w_bases[e].eval_grad(x, y, &mut ctx.w_grad[q][..nb]);
        }
        ctx
    }
}

/// Local blocks of the primal stabilizer s (gradient-misfit plus
/// Tikhonov terms), the constraint form b, and the dual stabilizer s*.
/// Layout: rows/cols indexed by local dof, V block then D block for s,
/// W rows against (V, D) columns for b.
pub(crate) struct LocalMatrices {
    pub svv: [[f64; MAX_V]; MAX_V],
    pub svd: [[f64; MAX_D]; MAX_V],
    pub sdd: [[f64; MAX_D]; MAX_D],
    pub bv: [[f64; MAX_V]; MAX_W],
    pub bd: [[f64; MAX_D]; MAX_W],
    pub sstar: [[f64; MAX_W]; MAX_W],
}

pub(crate) fn local_matrices(
    spaces: &Spaces,
    a: [[f64; 2]; 2],
    mu: f64,
    ctx: &ElementContext,
) -> LocalMatrices {
    let nv = spaces.v_nloc();
    let nd = spaces.d_nloc();
    let nw = spaces.w_nloc();
    let cfg = &spaces.config;
    let mut lm = LocalMatrices {
        svv: [[0.0; MAX_V]; MAX_V],
        svd: [[0.0; MAX_D]; MAX_V],
        sdd: [[0.0; MAX_D]; MAX_D],
        bv: [[0.0; MAX_V]; MAX_W],
        bd: [[0.0; MAX_D]; MAX_W],
        sstar: [[0.0; MAX_W]; MAX_W],
    };

    for q in 0..ctx.nq {
        let wq = ctx.weights[q];
        let mut av = [[0.0; 2]; MAX_V];
        for (i, g) in ctx.v_grad[q][..nv].iter().enumerate() {
            av[i] = [a[0][0] * g[0] + a[0][1] * g[1], a[1][0] * g[0] + a[1][1] * g[1]];
        }
        for i in 0..nv {
            for j in 0..nv {
                lm.svv[i][j] += 0.5 * wq * dot(av[i], av[j]);
            }
            for b in 0..nd {
                lm.svd[i][b] -= 0.5 * wq * dot(av[i], ctx.d_val[q][b]);
            }
        }
        for b in 0..nd {
            for b2 in 0..nd {
                lm.sdd[b][b2] += 0.5 * wq * dot(ctx.d_val[q][b], ctx.d_val[q][b2]);
            }
        }
        for c in 0..nw {
            let wc = ctx.w_val[q][c];
            if mu != 0.0 {
                for i in 0..nv {
                    lm.bv[c][i] += mu * wq * ctx.v_val[q][i] * wc;
                }
            }
            for b in 0..nd {
                lm.bd[c][b] += wq * ctx.d_div[q][b] * wc;
            }
        }
    }

    let h = spaces.h;
    if cfg.gamma_t > 0.0 {
        let wgt = 0.5 * cfg.gamma_t * h.powi(2 * cfg.k as i32);
        for q in 0..ctx.nq {
            let wq = ctx.weights[q];
            for i in 0..nv {
                for j in 0..nv {
                    lm.svv[i][j] += wgt * wq * dot(ctx.v_grad[q][i], ctx.v_grad[q][j]);
                }
            }
        }
    }
    if cfg.needs_multiplier_compensation() && mu != 0.0 {
        // mu^2 h^2 ((1 - pi_W) u, (1 - pi_W) v): the multiplier basis
        // is orthonormal, so the projected part is C C^T with
        // C_ic = (phi_i, w_c)_K.
        let mut mass = [[0.0; MAX_V]; MAX_V];
        let mut c_iw = [[0.0; MAX_W]; MAX_V];
        for q in 0..ctx.nq {
            let wq = ctx.weights[q];
            for i in 0..nv {
                let vi = ctx.v_val[q][i];
                for j in 0..nv {
                    mass[i][j] += wq * vi * ctx.v_val[q][j];
                }
                for c in 0..nw {
                    c_iw[i][c] += wq * vi * ctx.w_val[q][c];
                }
            }
        }
        let wgt = 0.5 * mu * mu * h * h;
        for i in 0..nv {
            for j in 0..nv {
                let mut proj = 0.0;
                for c in 0..nw {
                    proj += c_iw[i][c] * c_iw[j][c];
                }
                lm.svv[i][j] += wgt * (mass[i][j] - proj);
            }
        }
    }

    match cfg.dual {
        DualStabilizer::None => {}
        // Orthonormal cell basis: the mass matrix is the identity.
        DualStabilizer::Mass => {
            for c in 0..nw {
                lm.sstar[c][c] = 1.0;
            }
        }
        DualStabilizer::ProjectedGradient => {
            let mut gram = [[0.0; MAX_W]; MAX_W];
            let mut mean = [[0.0; 2]; MAX_W];
            for q in 0..ctx.nq {
                let wq = ctx.weights[q];
                for c in 0..nw {
                    for d in 0..nw {
                        gram[c][d] += wq * dot(ctx.w_grad[q][c], ctx.w_grad[q][d]);
                    }
                    mean[c][0] += wq * ctx.w_grad[q][c][0];
                    mean[c][1] += wq * ctx.w_grad[q][c][1];
                }
            }
            let wgt = 0.5 * cfg.gamma_star;
            for c in 0..nw {
                for d in 0..nw {
                    // The removed part is the projection onto vector
                    // polynomials of degree l - 1: cellwise means for
                    // l = 1, nothing at all for l = 0.
                    let removed =
                        if cfg.l >= 1 { dot(mean[c], mean[d]) / ctx.area } else { 0.0 };
                    lm.sstar[c][d] = wgt * (gram[c][d] - removed);
                }
            }
        }
    }
    lm
}

/// Local blocks of the equation-residual Gram
/// (div p + mu u, div q + mu v) used by the least-squares system.
pub(crate) struct ResidualGram {
    pub vv: [[f64; MAX_V]; MAX_V],
    pub vd: [[f64; MAX_D]; MAX_V],
    pub dd: [[f64; MAX_D]; MAX_D],
}

pub(crate) fn local_residual_gram(spaces: &Spaces, mu: f64, ctx: &ElementContext) -> ResidualGram {
    let nv = spaces.v_nloc();
    let nd = spaces.d_nloc();
    let mut g = ResidualGram {
        vv: [[0.0; MAX_V]; MAX_V],
        vd: [[0.0; MAX_D]; MAX_V],
        dd: [[0.0; MAX_D]; MAX_D],
    };
    for q in 0..ctx.nq {
        let wq = ctx.weights[q];
        if mu != 0.0 {
            for i in 0..nv {
                let vi = ctx.v_val[q][i];
                for j in 0..nv {
                    g.vv[i][j] += wq * mu * mu * vi * ctx.v_val[q][j];
                }
                for b in 0..nd {
                    g.vd[i][b] += wq * mu * vi * ctx.d_div[q][b];
                }
            }
        }
        for b in 0..nd {
            for b2 in 0..nd {
                g.dd[b][b2] += wq * ctx.d_div[q][b] * ctx.d_div[q][b2];
            }
        }
    }
    g
}
