//! Orthogonal matrices parameterized by products of Givens rotations.

use nalgebra::DMatrix;

/// Number of rotation angles for a `dim x dim` orthogonal block.
pub fn angle_count(dim: usize) -> usize {
    dim * dim.saturating_sub(1) / 2
}

fn planes(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..dim).flat_map(move |i| (i + 1..dim).map(move |j| (i, j)))
}

/// Multiplies rows `i` and `j` of `m` from the left by the rotation in that
/// plane.
fn rotate_rows(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for k in 0..m.ncols() {
        let (a, b) = (m[(i, k)], m[(j, k)]);
        m[(i, k)] = c * a - s * b;
        m[(j, k)] = s * a + c * b;
    }
}

/// `U = G_1 G_2 ... G_K`, with `G_k` rotating plane `(i, j)` by angle
/// `theta_k` (`G[i,i] = G[j,j] = cos`, `G[i,j] = -sin`, `G[j,i] = sin`).
/// Planes are ordered lexicographically.
pub fn orthogonal_matrix(dim: usize, angles: &[f64]) -> DMatrix<f64> {
    assert_eq!(angles.len(), angle_count(dim));
    let mut u = DMatrix::identity(dim, dim);
    // apply from the right end so the product is accumulated as G_k (G_{k+1} ...)
    for ((i, j), &t) in planes(dim).collect::<Vec<_>>().iter().zip(angles).rev() {
        rotate_rows(&mut u, *i, *j, t.cos(), t.sin());
    }
    u
}

/// Given `A = dJ/dU`, returns `dJ/dtheta_k = <dU/dtheta_k, A>_F`.
pub fn angle_gradient(dim: usize, angles: &[f64], dj_du: &DMatrix<f64>) -> Vec<f64> {
    let k_total = angle_count(dim);
    assert_eq!(angles.len(), k_total);
    let planes: Vec<(usize, usize)> = planes(dim).collect();

    // suffix[k] = G_{k+1} ... G_K
    let mut suffix = vec![DMatrix::identity(dim, dim); k_total];
    for k in (0..k_total.saturating_sub(1)).rev() {
        let (i, j) = planes[k + 1];
        let mut next = suffix[k + 1].clone();
        rotate_rows(&mut next, i, j, angles[k + 1].cos(), angles[k + 1].sin());
        suffix[k] = next;
    }

    // m = L^T A with L = G_1 ... G_{k-1}
    let mut m = dj_du.clone();
    let mut grad = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let (i, j) = planes[k];
        let (c, s) = (angles[k].cos(), angles[k].sin());
        let r = &suffix[k];
        // N = m R^T, needed at (i,i), (i,j), (j,i), (j,j)
        let n = |a: usize, b: usize| -> f64 { (0..dim).map(|t| m[(a, t)] * r[(b, t)]).sum() };
        // dG: [i,i] = -s, [i,j] = -c, [j,i] = c, [j,j] = -s
        grad.push(-s * n(i, i) - c * n(i, j) + c * n(j, i) - s * n(j, j));
        // m <- G_k^T m
        rotate_rows(&mut m, i, j, c, -s);
    }
    grad
}
