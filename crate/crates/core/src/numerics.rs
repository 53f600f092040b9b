//! Dense real and complex matrix primitives used by the DMD pipeline.
//!
//! Thin wrappers over `nalgebra` decompositions that add finiteness checks,
//! rank truncation with a relative tolerance, and a deterministic ordering of
//! eigenpairs so that mode numbering is reproducible between runs.

use std::cmp::Ordering;

use nalgebra::{ComplexField, DMatrix, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;

/// Singular values below `RANK_TOL * sigma_1` are treated as numerically zero.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// Left singular vectors, `rows x r`.
    pub u: ComplexMatrix,
    /// Singular values, descending.
    pub s: Vec<f64>,
    /// Right singular vectors, `cols x r`.
    pub v: ComplexMatrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

#[derive(Debug, Clone)]
pub struct Eigen {
    /// Unit-norm eigenvectors stored as columns.
    pub vectors: ComplexMatrix,
    pub values: Vec<Complex64>,
}

pub fn to_complex(a: &RealMatrix) -> ComplexMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

fn ensure_finite<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    what: &'static str,
) -> Result<()> {
    if a.iter().all(|x| x.clone().modulus().is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Thin SVD with columns sorted by descending singular value.
fn sorted_svd<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
) -> Result<(DMatrix<T>, Vec<f64>, DMatrix<T>)> {
    // a tolerance of one ulp yields wrong factors on rank-deficient input
    let svd = SVD::try_new(a.clone(), true, true, 5.0 * f64::EPSILON, 0)
        .ok_or(Error::NonFinite("SVD input"))?;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let s = svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));

    let u = DMatrix::from_fn(u.nrows(), order.len(), |i, k| u[(i, order[k])].clone());
    let v = DMatrix::from_fn(v_t.ncols(), order.len(), |i, k| {
        v_t[(order[k], i)].clone().conjugate()
    });
    let s = order.iter().map(|&k| s[k]).collect();
    Ok((u, s, v))
}

/// Rank-`r` truncated SVD of a real matrix, returned in complex form.
///
/// If `r` exceeds the numerical rank, singular values below
/// `RANK_TOL * sigma_1` are dropped and fewer than `r` columns come back.
pub fn truncated_svd(a: &RealMatrix, r: usize) -> Result<TruncatedSvd> {
    let budget = a.nrows().min(a.ncols());
    if r == 0 || r > budget {
        return Err(Error::RankBudget {
            requested: r,
            budget,
        });
    }
    ensure_finite(a, "SVD input")?;
    let (u, s, v) = sorted_svd(a)?;
    let sigma1 = s.first().copied().unwrap_or(0.0);
    let keep = s
        .iter()
        .take(r)
        .take_while(|&&x| x > RANK_TOL * sigma1 && x > 0.0)
        .count();
    Ok(TruncatedSvd {
        u: to_complex(&u.columns(0, keep).into_owned()),
        s: s[..keep].to_vec(),
        v: to_complex(&v.columns(0, keep).into_owned()),
    })
}

/// Moore-Penrose pseudo-inverse; singular values `<= tol * sigma_1` are
/// treated as zero.
pub fn pseudo_inverse<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    tol: f64,
) -> Result<DMatrix<T>> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pseudo-inverse tolerance must be >= 0, got {tol}"
        )));
    }
    ensure_finite(a, "pseudo-inverse input")?;
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(cols, rows));
    }
    let (u, s, v) = sorted_svd(a)?;
    let cutoff = tol * s[0];
    let mut out = DMatrix::<T>::zeros(cols, rows);
    for (k, &sk) in s.iter().enumerate() {
        if sk <= cutoff || sk == 0.0 {
            break;
        }
        let inv = T::from_real(1.0 / sk);
        // out += v_k * inv * u_k^H
        for j in 0..rows {
            let uj = u[(j, k)].clone().conjugate() * inv.clone();
            for i in 0..cols {
                out[(i, j)] += v[(i, k)].clone() * uj.clone();
            }
        }
    }
    Ok(out)
}

/// Orders eigenvalues by descending modulus, then descending real part, then
/// descending imaginary part.
pub fn eigen_order(a: &Complex64, b: &Complex64) -> Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

/// Rotates `v` so its largest-modulus entry is real and positive, then scales
/// it to unit 2-norm.
fn normalize_phase(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let mut pivot = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[pivot].norm() * (1.0 + 1e-12) {
            pivot = i;
        }
    }
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z = *z * phase / norm;
    }
}

/// Dense eigendecomposition of a general complex matrix via complex Schur
/// form and triangular back-substitution.
pub fn eig_dense(a: &ComplexMatrix) -> Result<Eigen> {
    let (n, cols) = a.shape();
    if n != cols {
        return Err(Error::NotSquare { rows: n, cols });
    }
    ensure_finite(a, "eigensolver input")?;
    if n == 0 {
        return Ok(Eigen {
            vectors: ComplexMatrix::zeros(0, 0),
            values: Vec::new(),
        });
    }
    let max_iters = 200 * n;
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, max_iters)
        .ok_or(Error::EigenNoConvergence { dim: n, max_iters })?;
    let (q, t) = schur.unpack();

    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * scale;

    let mut pairs: Vec<(Complex64, Vec<Complex64>)> = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        y[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < tiny {
                d = Complex64::new(tiny, 0.0);
            }
            y[i] = -acc / d;
        }
        let mut w: Vec<Complex64> = (0..n)
            .map(|i| (0..=k).map(|j| q[(i, j)] * y[j]).sum())
            .collect();
        normalize_phase(&mut w);
        pairs.push((lambda, w));
    }
    Ok(sorted_eigen(pairs))
}

fn sorted_eigen(mut pairs: Vec<(Complex64, Vec<Complex64>)>) -> Eigen {
    pairs.sort_by(|a, b| eigen_order(&a.0, &b.0));
    let n = pairs.len();
    let vectors = ComplexMatrix::from_fn(n, n, |i, k| pairs[k].1[i]);
    Eigen {
        values: pairs.into_iter().map(|p| p.0).collect(),
        vectors,
    }
}

/// Eigendecomposition of a real matrix with exact conjugate symmetry:
/// complex eigenvalues come in exactly conjugate pairs with conjugate
/// eigenvectors, and real eigenvalues carry real eigenvectors.
pub fn eig_real(a: &RealMatrix) -> Result<Eigen> {
    let eig = eig_dense(&to_complex(a))?;
    let n = eig.values.len();
    let scale = eig.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let imag_tol = 1e-10 * scale.max(f64::MIN_POSITIVE);

    let mut pairs: Vec<(Complex64, Vec<Complex64>)> = (0..n)
        .map(|k| (eig.values[k], eig.vectors.column(k).iter().copied().collect()))
        .collect();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        let li = pairs[i].0;
        if li.im.abs() <= imag_tol {
            let (lambda, w) = &mut pairs[i];
            *lambda = Complex64::new(lambda.re, 0.0);
            for z in w.iter_mut() {
                *z = Complex64::new(z.re, 0.0);
            }
            normalize_phase(w);
            done[i] = true;
            continue;
        }
        let target = li.conj();
        let partner = (0..n)
            .filter(|&j| j != i && !done[j] && pairs[j].0.im.signum() == -li.im.signum())
            .min_by(|&x, &y| {
                (pairs[x].0 - target)
                    .norm()
                    .total_cmp(&(pairs[y].0 - target).norm())
            });
        done[i] = true;
        if let Some(j) = partner {
            // keep the member with positive imaginary part as the reference
            let (pos, neg) = if li.im > 0.0 { (i, j) } else { (j, i) };
            let (lp, wp) = (pairs[pos].0, pairs[pos].1.clone());
            pairs[neg] = (lp.conj(), wp.iter().map(|z| z.conj()).collect());
            done[j] = true;
        }
    }
    Ok(sorted_eigen(pairs))
}

/// Frobenius norm of a complex matrix.
pub fn frobenius(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_real(rows: usize, cols: usize, seed: u64) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_complex(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let svd = truncated_svd(&RealMatrix::identity(3, 3), 2).unwrap();
        assert_eq!(svd.s, vec![1.0, 1.0]);
        let gram = svd.u.adjoint() * &svd.u;
        assert!((gram - ComplexMatrix::identity(2, 2)).norm() < 1e-14);

        let d = RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let svd = truncated_svd(&d, 2).unwrap();
        assert!((svd.s[0] - 3.0).abs() < 1e-14 && (svd.s[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn svd_full_rank_reconstruction() {
        let a = random_real(8, 5, 1);
        let svd = truncated_svd(&a, 5).unwrap();
        let s = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            5,
            svd.s.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let recon = &svd.u * s * svd.v.adjoint();
        assert!(frobenius(&(recon - to_complex(&a))) < 1e-12);
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_rejects_bad_rank_and_nan() {
        let a = random_real(4, 3, 2);
        assert!(matches!(truncated_svd(&a, 4), Err(Error::RankBudget { .. })));
        assert!(matches!(truncated_svd(&a, 0), Err(Error::RankBudget { .. })));
        let mut b = a.clone();
        b[(1, 1)] = f64::NAN;
        assert!(matches!(truncated_svd(&b, 2), Err(Error::NonFinite(_))));
    }

    #[test]
    fn svd_drops_numerically_zero_directions() {
        // rank-2 matrix, rank 3 requested
        let a = random_real(6, 2, 3) * random_real(2, 4, 4);
        let svd = truncated_svd(&a, 3).unwrap();
        assert_eq!(svd.rank(), 2);

        // tall rank-1 matrix with repeated columns
        let col = random_real(48, 1, 9);
        let a = RealMatrix::from_fn(48, 3, |i, _| col[(i, 0)]);
        let svd = truncated_svd(&a, 3).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!((svd.s[0] - a.norm()).abs() < 1e-12);
        let recon = &svd.u * Complex64::new(svd.s[0], 0.0) * svd.v.adjoint();
        assert!(frobenius(&(recon - to_complex(&a))) < 1e-12);
    }

    #[test]
    fn pinv_identity_and_rank_deficient() {
        let i4 = to_complex(&RealMatrix::identity(4, 4));
        assert!((pseudo_inverse(&i4, 1e-12).unwrap() - &i4).norm() < 1e-14);

        let d = to_complex(&RealMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        let p = pseudo_inverse(&d, 1e-12).unwrap();
        let expected = to_complex(&RealMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]));
        assert!((p - expected).norm() < 1e-15);
    }

    #[test]
    fn pinv_left_inverse_and_penrose_identities() {
        let a = random_complex(6, 3, 5);
        let p = pseudo_inverse(&a, 1e-12).unwrap();
        assert!((&p * &a - ComplexMatrix::identity(3, 3)).norm() < 1e-10);

        for seed in 0..5 {
            let a = random_complex(10, 6, 100 + seed);
            let p = pseudo_inverse(&a, 1e-12).unwrap();
            let rel = |x: ComplexMatrix, y: &ComplexMatrix| frobenius(&(x - y)) / frobenius(y);
            assert!(rel(&a * &p * &a, &a) < 1e-9);
            assert!(rel(&p * &a * &p, &p) < 1e-9);
            let ap = &a * &p;
            assert!(rel(ap.adjoint(), &ap) < 1e-9);
            let pa = &p * &a;
            assert!(rel(pa.adjoint(), &pa) < 1e-9);
        }
    }

    #[test]
    fn eig_diagonal_identity_rotation() {
        let d = to_complex(&RealMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.9]));
        let e = eig_dense(&d).unwrap();
        assert!((e.values[0] - Complex64::new(0.9, 0.0)).norm() < 1e-15);
        assert!((e.values[1] - Complex64::new(0.5, 0.0)).norm() < 1e-15);

        let e = eig_dense(&to_complex(&RealMatrix::identity(5, 5))).unwrap();
        assert!(e.values.iter().all(|l| (l - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let th: f64 = 0.3;
        let r = RealMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        for e in [eig_dense(&to_complex(&r)).unwrap(), eig_real(&r).unwrap()] {
            assert!((e.values[0] - Complex64::from_polar(1.0, th)).norm() < 1e-14);
            assert!((e.values[1] - Complex64::from_polar(1.0, -th)).norm() < 1e-14);
        }
    }

    #[test]
    fn eig_residual_random() {
        for seed in 0..5 {
            let a = random_complex(8, 8, 200 + seed);
            let e = eig_dense(&a).unwrap();
            let lam = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
            let res = &a * &e.vectors - &e.vectors * lam;
            assert!(frobenius(&res) / frobenius(&a) < 1e-9);
            for k in 0..8 {
                assert!((e.vectors.column(k).norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eig_real_is_conjugate_symmetric() {
        let a = random_real(7, 7, 9);
        let e = eig_real(&a).unwrap();
        let lam = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
        let res = to_complex(&a) * &e.vectors - &e.vectors * lam;
        assert!(frobenius(&res) / a.norm() < 1e-9);
        for (k, l) in e.values.iter().enumerate() {
            if l.im > 0.0 {
                assert_eq!(e.values[k + 1], l.conj());
                for i in 0..7 {
                    assert_eq!(e.vectors[(i, k + 1)], e.vectors[(i, k)].conj());
                }
            } else if l.im == 0.0 {
                assert!(e.vectors.column(k).iter().all(|z| z.im == 0.0));
            }
        }
    }

    #[test]
    fn eig_rejects_non_square() {
        let a = random_complex(3, 2, 1);
        assert!(matches!(eig_dense(&a), Err(Error::NotSquare { rows: 3, cols: 2 })));
    }
}
