//! Extended DMD over coefficient sequences.
//!
//! Given features `y_0 .. y_{N-1}`, the linear evolution `y_{k+1} ~ K y_k` is
//! fitted through the rank-`r` projection `K_r = U_r^* Y1 V_r S_r^-1`, whose
//! eigenpairs give the dynamic modes `Phi = Y1 V_r S_r^-1 W`. Predictions in
//! state space go through an [`OutputMap`]: the learned dictionary for
//! CSC-DMD, or a least-squares matrix for the generic variant.

use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dictionary::ConvDictionary;
use crate::error::{Error, Result};
use crate::field::{CoeffTensor, Field};
use crate::numerics::{
    eig_real, pseudo_inverse, truncated_svd, ComplexMatrix, RealMatrix, RANK_TOL,
};

/// Eigenvalues with modulus below this have no continuous-time exponent.
pub const MIN_EIGENVALUE_MODULUS: f64 = 1e-12;

/// Linear map from feature vectors back to state-space fields.
pub trait OutputMap {
    fn field_shape(&self) -> [usize; 3];
    fn coeff_len(&self) -> usize;
    fn apply(&self, y: &[f64]) -> Result<Field>;
}

impl OutputMap for ConvDictionary {
    fn field_shape(&self) -> [usize; 3] {
        ConvDictionary::field_shape(self)
    }

    fn coeff_len(&self) -> usize {
        ConvDictionary::coeff_len(self)
    }

    fn apply(&self, y: &[f64]) -> Result<Field> {
        if y.len() != self.coeff_len() {
            return Err(Error::shape(self.coeff_len(), y.len()));
        }
        Field::from_vec(self.field_shape(), self.synthesize_slice(y))
    }
}

/// Dense output map `D~ = X Y^+`.
#[derive(Debug, Clone)]
pub struct DenseOutputMap {
    pub matrix: RealMatrix,
    pub field_shape: [usize; 3],
}

impl OutputMap for DenseOutputMap {
    fn field_shape(&self) -> [usize; 3] {
        self.field_shape
    }

    fn coeff_len(&self) -> usize {
        self.matrix.ncols()
    }

    fn apply(&self, y: &[f64]) -> Result<Field> {
        if y.len() != self.matrix.ncols() {
            return Err(Error::shape(self.matrix.ncols(), y.len()));
        }
        let x = &self.matrix * DVector::from_column_slice(y);
        Field::from_vec(self.field_shape, x.as_slice().to_vec())
    }
}

/// `Y0 = [y_0 .. y_{N-2}]`, `Y1 = [y_1 .. y_{N-1}]`.
pub fn build_data_matrices(ys: &[CoeffTensor]) -> Result<(RealMatrix, RealMatrix)> {
    if ys.len() < 2 {
        return Err(Error::NotEnoughData("DMD needs at least 2 snapshots"));
    }
    let l = ys[0].len();
    if let Some(bad) = ys.iter().find(|y| y.len() != l || y.grid() != ys[0].grid()) {
        return Err(Error::shape(
            (ys[0].channels(), ys[0].grid()),
            (bad.channels(), bad.grid()),
        ));
    }
    let n = ys.len() - 1;
    let y0 = RealMatrix::from_fn(l, n, |i, k| ys[k].as_slice()[i]);
    let y1 = RealMatrix::from_fn(l, n, |i, k| ys[k + 1].as_slice()[i]);
    Ok((y0, y1))
}

#[derive(Debug, Clone)]
pub struct EdmdFit {
    /// Dynamic modes, `L x r`.
    pub phi: ComplexMatrix,
    pub lambda: Vec<Complex64>,
    /// Eigenvectors of the reduced operator, `r x r`.
    pub w: ComplexMatrix,
    /// Retained singular values of `Y0`.
    pub singular_values: Vec<f64>,
}

/// Fits the rank-`r` EDMD operator. If `r` exceeds the numerical rank of
/// `Y0`, the rank is reduced to it.
pub fn fit_edmd(y0: &RealMatrix, y1: &RealMatrix, r: usize) -> Result<EdmdFit> {
    if y0.shape() != y1.shape() {
        return Err(Error::shape(y0.shape(), y1.shape()));
    }
    if y0.iter().all(|&v| v == 0.0) {
        return Err(Error::RankDeficient);
    }
    let svd = truncated_svd(y0, r)?;
    let rank = svd.rank();
    if rank == 0 {
        return Err(Error::RankDeficient);
    }
    // U and V of a real matrix are real
    let u = svd.u.map(|z| z.re);
    let v = svd.v.map(|z| z.re);
    let mut b = y1 * v;
    for (k, s) in svd.s.iter().enumerate() {
        b.column_mut(k).scale_mut(1.0 / s);
    }
    let k_reduced = u.transpose() * &b;
    let eig = eig_real(&k_reduced)?;
    let phi = b.map(|x| Complex64::new(x, 0.0)) * &eig.vectors;
    Ok(EdmdFit {
        phi,
        lambda: eig.values,
        w: eig.vectors,
        singular_values: svd.s,
    })
}

/// Least-squares output map `argmin_D ||X - D Y||_F = X Y^+`.
pub fn fit_output_map(x: &RealMatrix, y: &RealMatrix) -> Result<RealMatrix> {
    if x.ncols() != y.ncols() {
        return Err(Error::shape(
            format!("{} columns", y.ncols()),
            format!("{} columns", x.ncols()),
        ));
    }
    Ok(x * pseudo_inverse(y, RANK_TOL)?)
}

/// Column-major complex matrix with entries serialized as `[re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl From<&ComplexMatrix> for MatrixRepr {
    fn from(m: &ComplexMatrix) -> Self {
        MatrixRepr {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelRepr {
    rank: usize,
    dt: f64,
    lambda: Vec<Complex64>,
    omega: Option<Vec<Complex64>>,
    b0: Vec<Complex64>,
    singular_values: Vec<f64>,
    phi: MatrixRepr,
}

/// A fitted linear evolution model in feature space.
#[derive(Debug, Clone)]
pub struct DmdModel {
    phi: ComplexMatrix,
    phi_pinv: ComplexMatrix,
    lambda: Vec<Complex64>,
    dt: f64,
    b0: Vec<Complex64>,
    singular_values: Vec<f64>,
}

impl DmdModel {
    /// Fits the model on a coefficient series sampled every `dt`.
    pub fn fit(ys: &[CoeffTensor], dt: f64, r: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("sampling interval {dt} must be > 0")));
        }
        let (y0, y1) = build_data_matrices(ys)?;
        let fit = fit_edmd(&y0, &y1, r)?;
        Self::from_fit(fit, dt, ys[0].as_slice())
    }

    pub fn from_fit(fit: EdmdFit, dt: f64, y_initial: &[f64]) -> Result<Self> {
        let phi_pinv = pseudo_inverse(&fit.phi, RANK_TOL)?;
        let mut model = DmdModel {
            phi: fit.phi,
            phi_pinv,
            lambda: fit.lambda,
            dt,
            b0: Vec::new(),
            singular_values: fit.singular_values,
        };
        model.b0 = model.initial_amplitudes(y_initial)?;
        Ok(model)
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn feature_len(&self) -> usize {
        self.phi.nrows()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn phi(&self) -> &ComplexMatrix {
        &self.phi
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.lambda
    }

    pub fn b0(&self) -> &[Complex64] {
        &self.b0
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// `Omega = ln(Lambda) / dt` on the principal branch.
    pub fn omega(&self) -> Result<Vec<Complex64>> {
        self.lambda
            .iter()
            .enumerate()
            .map(|(index, l)| {
                if l.norm() < MIN_EIGENVALUE_MODULUS {
                    Err(Error::ZeroEigenvalue {
                        index,
                        modulus: l.norm(),
                    })
                } else {
                    Ok(l.ln() / self.dt)
                }
            })
            .collect()
    }

    fn check_features(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.feature_len() {
            return Err(Error::shape(self.feature_len(), y.len()));
        }
        Ok(())
    }

    fn check_amplitudes(&self, b: &[Complex64]) -> Result<()> {
        if b.len() != self.rank() {
            return Err(Error::shape(self.rank(), b.len()));
        }
        Ok(())
    }

    /// `b = Phi^+ y`.
    pub fn initial_amplitudes(&self, y: &[f64]) -> Result<Vec<Complex64>> {
        self.check_features(y)?;
        Ok((0..self.rank())
            .map(|k| {
                self.phi_pinv
                    .row(k)
                    .iter()
                    .zip(y)
                    .map(|(p, &v)| p * v)
                    .sum()
            })
            .collect())
    }

    /// `Phi diag(scale) b` as a complex feature vector.
    fn modal_sum(&self, b: &[Complex64], scale: &[Complex64]) -> Vec<Complex64> {
        let coeffs: Vec<Complex64> = b.iter().zip(scale).map(|(x, s)| x * s).collect();
        (0..self.feature_len())
            .map(|i| {
                self.phi
                    .row(i)
                    .iter()
                    .zip(&coeffs)
                    .map(|(p, c)| p * c)
                    .sum()
            })
            .collect()
    }

    /// `Phi Lambda^k b`.
    pub fn evolve(&self, b: &[Complex64], k: u32) -> Result<Vec<Complex64>> {
        self.check_amplitudes(b)?;
        let scale: Vec<Complex64> = self.lambda.iter().map(|l| l.powu(k)).collect();
        Ok(self.modal_sum(b, &scale))
    }

    /// `Phi e^{Omega t} b`.
    pub fn evolve_continuous(&self, b: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        self.check_amplitudes(b)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("time {t} must be >= 0")));
        }
        let scale: Vec<Complex64> = self.omega()?.iter().map(|w| (w * t).exp()).collect();
        Ok(self.modal_sum(b, &scale))
    }

    /// `Re(Phi Lambda Phi^+ y)`: one step of the fitted evolution.
    pub fn step_features(&self, y: &[f64]) -> Result<Vec<f64>> {
        let b = self.initial_amplitudes(y)?;
        Ok(self.evolve(&b, 1)?.iter().map(|z| z.re).collect())
    }

    /// `||Y1 - Phi Lambda Phi^+ Y0||_F / ||Y1||_F`.
    pub fn one_step_residual(&self, y0: &RealMatrix, y1: &RealMatrix) -> Result<f64> {
        let mut num = 0.0;
        for k in 0..y0.ncols() {
            let pred = self.step_features(y0.column(k).as_slice())?;
            num += pred
                .iter()
                .zip(y1.column(k).iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        }
        Ok(num.sqrt() / y1.norm())
    }

    /// `x_k = Re(V Lambda^k b)`, with `V` applied through `map`.
    pub fn predict_state(&self, map: &impl OutputMap, b: &[Complex64], k: u32) -> Result<Field> {
        let y = self.evolve(b, k)?;
        map.apply(&y.iter().map(|z| z.re).collect::<Vec<_>>())
    }

    /// `x(t) = Re(V e^{Omega t} b)`.
    pub fn predict_continuous(
        &self,
        map: &impl OutputMap,
        b: &[Complex64],
        t: f64,
    ) -> Result<Field> {
        let y = self.evolve_continuous(b, t)?;
        map.apply(&y.iter().map(|z| z.re).collect::<Vec<_>>())
    }

    /// `||Im(Phi Lambda^k b)|| / ||Re(Phi Lambda^k b)||`; small whenever the
    /// data are real and `b` comes from a real feature vector.
    pub fn imaginary_residual(&self, b: &[Complex64], k: u32) -> Result<f64> {
        let y = self.evolve(b, k)?;
        let im = y.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
        let re = y.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
        Ok(if re == 0.0 { im } else { im / re })
    }

    /// Output modes `V = D Phi`, one `(real, imaginary)` field pair per mode.
    pub fn output_modes(&self, map: &impl OutputMap) -> Result<Vec<(Field, Field)>> {
        (0..self.rank())
            .map(|k| {
                let col = self.phi.column(k);
                let re: Vec<f64> = col.iter().map(|z| z.re).collect();
                let im: Vec<f64> = col.iter().map(|z| z.im).collect();
                Ok((map.apply(&re)?, map.apply(&im)?))
            })
            .collect()
    }

    /// CSV with columns `mode,lambda_re,lambda_im,omega_re,omega_im`; omega
    /// columns are empty for eigenvalues without a logarithm.
    pub fn eigenvalues_csv(&self) -> String {
        let mut out = String::from("mode,lambda_re,lambda_im,omega_re,omega_im\n");
        for (k, l) in self.lambda.iter().enumerate() {
            let omega = if l.norm() < MIN_EIGENVALUE_MODULUS {
                String::from(",")
            } else {
                let w = l.ln() / self.dt;
                format!("{:.16e},{:.16e}", w.re, w.im)
            };
            writeln!(out, "{},{:.16e},{:.16e},{}", k + 1, l.re, l.im, omega).expect("write to string");
        }
        out
    }

    fn repr(&self) -> ModelRepr {
        ModelRepr {
            rank: self.rank(),
            dt: self.dt,
            lambda: self.lambda.clone(),
            omega: self.omega().ok(),
            b0: self.b0.clone(),
            singular_values: self.singular_values.clone(),
            phi: (&self.phi).into(),
        }
    }

    fn from_repr(r: ModelRepr) -> Result<Self> {
        let MatrixRepr { rows, cols, data } = r.phi;
        if data.len() != rows * cols || cols != r.lambda.len() || r.b0.len() != cols {
            return Err(Error::InvalidParameter("inconsistent model dimensions".into()));
        }
        let phi = ComplexMatrix::from_vec(rows, cols, data);
        let phi_pinv = pseudo_inverse(&phi, RANK_TOL)?;
        Ok(DmdModel {
            phi,
            phi_pinv,
            lambda: r.lambda,
            dt: r.dt,
            b0: r.b0,
            singular_values: r.singular_values,
        })
    }
}

impl Serialize for DmdModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.repr().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DmdModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ModelRepr::deserialize(d)?;
        DmdModel::from_repr(repr).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Identity output map over a `[n, 1, 1]` field.
    struct Identity(usize);

    impl OutputMap for Identity {
        fn field_shape(&self) -> [usize; 3] {
            [self.0, 1, 1]
        }
        fn coeff_len(&self) -> usize {
            self.0
        }
        fn apply(&self, y: &[f64]) -> Result<Field> {
            Field::from_vec([self.0, 1, 1], y.to_vec())
        }
    }

    fn series(a: &RealMatrix, y0: &[f64], n: usize) -> Vec<CoeffTensor> {
        let mut y = DVector::from_column_slice(y0);
        (0..n)
            .map(|_| {
                let out = CoeffTensor::from_vec(y.len(), [1, 1, 1], y.as_slice().to_vec()).unwrap();
                y = a * &y;
                out
            })
            .collect()
    }

    fn rotation_decay(rho: f64, th: f64) -> RealMatrix {
        RealMatrix::from_row_slice(2, 2, &[rho * th.cos(), -rho * th.sin(), rho * th.sin(), rho * th.cos()])
    }

    #[test]
    fn data_matrices_shapes() {
        let ys: Vec<_> = (0..2).map(|k| CoeffTensor::from_vec(3, [1, 1, 1], vec![k as f64; 3]).unwrap()).collect();
        let (y0, y1) = build_data_matrices(&ys).unwrap();
        assert_eq!(y0.shape(), (3, 1));
        assert_eq!(y1[(0, 0)], 1.0);
        assert!(build_data_matrices(&ys[..1]).is_err());

        let c = CoeffTensor::from_vec(2, [1, 1, 1], vec![0.3, -0.2]).unwrap();
        let (y0, y1) = build_data_matrices(&vec![c; 16]).unwrap();
        assert_eq!(y0.ncols(), 15);
        assert_eq!(y0, y1);
    }

    #[test]
    fn diagonal_and_rotation_eigenvalues() {
        let a = RealMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.5]);
        let ys = series(&a, &[1.0, 1.0], 6);
        let (y0, y1) = build_data_matrices(&ys).unwrap();
        let fit = fit_edmd(&y0, &y1, 2).unwrap();
        assert!((fit.lambda[0] - Complex64::new(0.9, 0.0)).norm() < 1e-10);
        assert!((fit.lambda[1] - Complex64::new(0.5, 0.0)).norm() < 1e-10);

        let ys = series(&rotation_decay(0.95, 0.4), &[1.0, 0.0], 8);
        let (y0, y1) = build_data_matrices(&ys).unwrap();
        let fit = fit_edmd(&y0, &y1, 2).unwrap();
        assert!((fit.lambda[0] - Complex64::from_polar(0.95, 0.4)).norm() < 1e-10);
        assert!((fit.lambda[1] - Complex64::from_polar(0.95, -0.4)).norm() < 1e-10);
    }

    #[test]
    fn constant_series_has_unit_eigenvalue() {
        let c = CoeffTensor::from_vec(3, [1, 1, 1], vec![0.3, -0.2, 1.0]).unwrap();
        let (y0, y1) = build_data_matrices(&vec![c; 5]).unwrap();
        let fit = fit_edmd(&y0, &y1, 1).unwrap();
        assert!((fit.lambda[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // rank 3 requested on rank-1 data is reduced
        let fit = fit_edmd(&y0, &y1, 3).unwrap();
        assert_eq!(fit.lambda.len(), 1);
    }

    #[test]
    fn zero_data_is_rank_deficient() {
        let z = RealMatrix::zeros(3, 2);
        assert!(matches!(fit_edmd(&z, &z, 1), Err(Error::RankDeficient)));
    }

    #[test]
    fn output_map_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = RealMatrix::from_fn(3, 6, |_, _| rng.random_range(-1.0..1.0));
        let d = fit_output_map(&y, &y).unwrap();
        assert!((d - RealMatrix::identity(3, 3)).norm() < 1e-12);

        let x = RealMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        assert!((fit_output_map(&x, &RealMatrix::identity(3, 3)).unwrap() - &x).norm() < 1e-14);

        let d_true = RealMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let d = fit_output_map(&(&d_true * &y), &y).unwrap();
        assert!((d - d_true).norm() < 1e-8);
        assert!(fit_output_map(&x, &y).is_err());
    }

    #[test]
    fn amplitudes_project_onto_modes() {
        let a = RealMatrix::from_row_slice(3, 3, &[0.9, 0.1, 0.0, 0.0, 0.5, 0.2, 0.0, 0.0, 0.7]);
        let mut ys = series(&a, &[1.0, 2.0, 1.0], 6);
        // embed in 4-D so Phi does not span the space
        for y in &mut ys {
            let mut v = y.as_slice().to_vec();
            v.push(0.0);
            *y = CoeffTensor::from_vec(4, [1, 1, 1], v).unwrap();
        }
        let model = DmdModel::fit(&ys, 1.0, 3).unwrap();
        let e1: Vec<f64> = model.phi().column(0).iter().map(|z| z.re).collect();
        let b = model.initial_amplitudes(&e1).unwrap();
        assert!((b[0] - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        assert!(b[1..].iter().all(|z| z.norm() < 1e-10));
        assert!(model.initial_amplitudes(&[0.0; 4]).unwrap().iter().all(|z| z.norm() == 0.0));

        // Phi b is the orthogonal projection onto range(Phi): normal equations
        let y = [0.3, -1.2, 0.8, 2.0];
        let b = model.initial_amplitudes(&y).unwrap();
        let phi = model.phi();
        let yc = DVector::from_iterator(4, y.iter().map(|&v| Complex64::new(v, 0.0)));
        let gram = phi.adjoint() * phi;
        let rhs = phi.adjoint() * &yc;
        let b_ne = gram.lu().solve(&rhs).unwrap();
        for k in 0..3 {
            assert!((b[k] - b_ne[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn discrete_prediction_matches_powers() {
        let a = RealMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.5]);
        let y0 = [1.0, -2.0];
        let ys = series(&a, &y0, 5);
        let model = DmdModel::fit(&ys, 10.0, 2).unwrap();
        let map = Identity(2);
        let b = model.initial_amplitudes(&y0).unwrap();
        let mut truth = DVector::from_column_slice(&y0);
        for k in 0..=10 {
            let x = model.predict_state(&map, &b, k).unwrap();
            let err = (DVector::from_column_slice(x.as_slice()) - &truth).norm();
            assert!(err < 1e-8, "k={k} err={err}");
            assert!(model.imaginary_residual(&b, k).unwrap() < 1e-8);
            truth = &a * truth;
        }
        assert_eq!(model.predict_state(&map, &b, 0).unwrap().as_slice(), model.predict_continuous(&map, &b, 0.0).unwrap().as_slice());
    }

    #[test]
    fn continuous_matches_discrete_and_interpolates() {
        let ys = series(&rotation_decay(0.95, 0.4), &[1.0, 0.5], 8);
        let model = DmdModel::fit(&ys, 10.0, 2).unwrap();
        let map = Identity(2);
        let b = model.b0().to_vec();
        for k in 0..=5 {
            let d = model.predict_state(&map, &b, k).unwrap();
            let c = model.predict_continuous(&map, &b, k as f64 * 10.0).unwrap();
            let err = d.as_slice().iter().zip(c.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10);
        }
        assert!(model.omega().unwrap().iter().all(|w| w.re < 0.0));

        let a = RealMatrix::from_row_slice(1, 1, &[0.9]);
        let model = DmdModel::fit(&series(&a, &[1.0], 4), 10.0, 1).unwrap();
        let half = model.evolve_continuous(&[Complex64::new(1.0, 0.0)], 5.0).unwrap();
        let phi0 = model.phi()[(0, 0)];
        assert!(((half[0] / phi0).re - 0.9f64.sqrt()).abs() < 1e-12);
        assert!((0.9f64.sqrt() - 0.94868).abs() < 1e-5);
    }

    #[test]
    fn zero_eigenvalue_blocks_continuous_time() {
        let a = RealMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.8]);
        let model = DmdModel::fit(&series(&a, &[1.0, 1.0], 4), 1.0, 2).unwrap();
        assert!(matches!(model.omega(), Err(Error::ZeroEigenvalue { .. })));
        assert!(model.evolve_continuous(model.b0(), 1.0).is_err());
        assert!(model.eigenvalues_csv().lines().count() == 3);
    }

    #[test]
    fn json_round_trip() {
        let ys = series(&rotation_decay(0.95, 0.4), &[1.0, 0.5], 8);
        let model = DmdModel::fit(&ys, 10.0, 2).unwrap();
        let s = serde_json::to_string(&model).unwrap();
        assert!(s.contains("\"lambda\":[["));
        let back: DmdModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back.phi, model.phi);
        assert_eq!(back.lambda, model.lambda);
        assert_eq!(back.b0, model.b0);
    }
}
