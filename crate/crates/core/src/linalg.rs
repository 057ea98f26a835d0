//! Small dense linear algebra helpers (row-major, partial pivoting).
//!
//! Only meant for the tiny local systems that show up when constructing
//! element bases (at most ~10 unknowns); the global sparse systems are
//! handled in `solvers`.

use crate::error::{Error, Result};

/// Factor `a` (n x n, row-major) in place as P A = L U; returns the row
/// permutation. Fails on (numerically) singular input.
pub(crate) fn lu_factor(a: &mut [f64], n: usize) -> Result<Vec<usize>> {
    assert_eq!(a.len(), n * n);
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = a[col * n + col].abs();
        for row in (col + 1)..n {
            let v = a[row * n + col].abs();
            if v > pivot_val {
                pivot_row = row;
                pivot_val = v;
            }
        }
        if pivot_val == 0.0 {
            return Err(Error::Singular(format!(
                "dense LU pivot vanished in column {col} of a {n}x{n} system"
            )));
        }
        if pivot_row != col {
            perm.swap(pivot_row, col);
            for j in 0..n {
                a.swap(pivot_row * n + j, col * n + j);
            }
        }
        let inv = 1.0 / a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] * inv;
            a[row * n + col] = factor;
            for j in (col + 1)..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
        }
    }
    Ok(perm)
}

/// Solve with a factorization from [`lu_factor`]; `b` is overwritten.
pub(crate) fn lu_solve(lu: &[f64], n: usize, perm: &[usize], b: &mut [f64]) {
    assert_eq!(b.len(), n);
    let mut x = vec![0.0; n];
    for i in 0..n {
        x[i] = b[perm[i]];
    }
    // Forward substitution (unit lower part).
    for i in 1..n {
        for j in 0..i {
            x[i] -= lu[i * n + j] * x[j];
        }
    }
    // Back substitution.
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            x[i] -= lu[i * n + j] * x[j];
        }
        x[i] /= lu[i * n + i];
    }
    b.copy_from_slice(&x);
}

/// Invert an n x n matrix (used for local dual-basis coefficients).
pub(crate) fn invert(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut lu = a.to_vec();
    let perm = lu_factor(&mut lu, n)?;
    let mut inv = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[j] = 1.0;
        lu_solve(&lu, n, &perm, &mut col);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Ok(inv)
}
