//! Quadrature rules on the reference triangle and the unit interval.
//!
//! The element rule is a tensor Gauss-Legendre rule collapsed onto the
//! reference triangle `(0,0), (1,0), (0,1)` through the substitution
//! `x = s (1 - t), y = t`, whose Jacobian `(1 - t)` is absorbed into the
//! weights. With 6 points per direction the rule integrates every
//! bivariate polynomial of total degree <= 10 exactly, comfortably above
//! what the bilinear forms of this crate require, and its weights sum to
//! the reference area 1/2. The face rule is 5-point Gauss-Legendre on
//! `[0, 1]`, exact through degree 9.

use once_cell::sync::Lazy;

/// Nodes and weights on the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Nodes and weights on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct IntervalRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl IntervalRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, ascending.
///
/// Roots of the Legendre polynomial are located by Newton iteration from
/// the Chebyshev-like initial guess `cos(pi (i + 3/4) / (n + 1/2))`; the
/// iteration gains digits quadratically and is run to machine precision.
pub fn gauss_legendre_01(n: usize) -> IntervalRule {
    assert!(n >= 1, "a Gauss rule needs at least one point");
    let nf = n as f64;
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x: f64 = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_{n-1} by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = -p1 / dp;
            x += dx;
            if dx.abs() < 1e-15 {
                // One more sweep keeps the residual at rounding level.
                let mut q0 = 1.0;
                let mut q1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let q2 = ((2.0 * kf - 1.0) * x * q1 - (kf - 1.0) * q0) / kf;
                    q0 = q1;
                    q1 = q2;
                }
                dp = nf * (x * q1 - q0) / (x * x - 1.0);
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1, 1] -> [0, 1]; roots arrive in descending order.
        points[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    IntervalRule { points, weights }
}

static TRIANGLE: Lazy<TriangleRule> = Lazy::new(|| {
    let base = gauss_legendre_01(6);
    let np = base.len() * base.len();
    let mut points = Vec::with_capacity(np);
    let mut weights = Vec::with_capacity(np);
    for (i, &s) in base.points.iter().enumerate() {
        for (j, &t) in base.points.iter().enumerate() {
            points.push([s * (1.0 - t), t]);
            weights.push(base.weights[i] * base.weights[j] * (1.0 - t));
        }
    }
    TriangleRule { points, weights }
});

static FACE: Lazy<IntervalRule> = Lazy::new(|| gauss_legendre_01(5));

/// The 36-point rule on the reference triangle (exact to total degree 10).
pub fn reference_triangle_rule() -> &'static TriangleRule {
    &TRIANGLE
}

/// The 5-point rule on `[0, 1]` used for face integrals (exact to degree 9).
pub fn face_rule() -> &'static IntervalRule {
    &FACE
}
