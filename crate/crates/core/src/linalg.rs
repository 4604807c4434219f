//! Small dense linear algebra over `f64`, sized for base chains (a handful of
//! states, never more than a few dozen). Hand-rolled on purpose: the solves
//! here are tiny and the callers need deterministic output bit-for-bit across
//! runs, which rules out threaded BLAS backends.

/// Solves `m x = b` in place by Gaussian elimination with partial pivoting.
/// `m` is row-major `n x n`. Returns `None` when a pivot collapses below
/// `1e-13 * scale`, which callers treat as a singular system.
pub(crate) fn solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(m.len() == n && m.iter().all(|r| r.len() == n));
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[pivot_row][col].abs() < 1e-13 * scale {
            return None;
        }
        m.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// `(eigenvalues, columns)` where `columns[j]` is the unit eigenvector for
/// `eigenvalues[j]`; the output order is unsorted. Fails (returns `None`)
/// if the off-diagonal mass has not collapsed after `max_sweeps`.
pub(crate) fn jacobi_symmetric(mut a: Vec<Vec<f64>>, max_sweeps: usize) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    if n == 1 {
        return Some((vec![a[0][0]], v));
    }
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, &x| m.max(x.abs()))
        .max(1.0);
    let tol = 1e-15 * scale;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(a[i][j].abs());
            }
        }
        if off <= tol {
            let eigenvalues = (0..n).map(|i| a[i][i]).collect();
            // Transpose: we accumulated row-major rotations, columns hold vectors.
            let columns = (0..n)
                .map(|j| (0..n).map(|i| v[i][j]).collect())
                .collect();
            return Some((eigenvalues, columns));
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() <= tol * 1e-2 {
                    continue;
                }
                // Classic 2x2 rotation annihilating a[p][q].
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    None
}
