//! Bed estimation from surface observations.
//!
//! Each frame solves
//!
//! ```text
//! min_y 1/2 ||P D y - x_S||^2 + lambda ||y||_1   s.t.  ||D y - c|| <= eps
//! ```
//!
//! with `c = D Re(Phi Lambda Phi^+ y_prev)` the one-step prediction, by
//! primal-dual splitting. The bed is then read off as `Q D y`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::ConvDictionary;
use crate::dmd::{DmdModel, OutputMap};
use crate::error::{Error, Result};
use crate::field::{norm, CoeffTensor, Field};
use crate::sparse::soft_threshold_in_place;

/// Consecutive iterations that must satisfy the relative-change test.
pub const CONVERGENCE_WINDOW: usize = 10;

/// Splits the depth planes of a state field into surface planes
/// `[0, surface_planes)` and bed planes `[surface_planes, depth)`.
///
/// `P` keeps the surface entries and `Q` the bed entries, each in field order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub field_shape: [usize; 3],
    pub surface_planes: usize,
}

impl StateLayout {
    pub fn new(field_shape: [usize; 3], surface_planes: usize) -> Result<Self> {
        if surface_planes > field_shape[2] {
            return Err(Error::InvalidParameter(format!(
                "{surface_planes} surface planes exceed depth {}",
                field_shape[2]
            )));
        }
        Ok(StateLayout {
            field_shape,
            surface_planes,
        })
    }

    /// Surface on plane 0, bed on the remaining planes.
    pub fn surface_bed(field_shape: [usize; 3]) -> Result<Self> {
        Self::new(field_shape, 1.min(field_shape[2]))
    }

    /// Every entry observed; `Q` is empty.
    pub fn fully_observed(field_shape: [usize; 3]) -> Self {
        StateLayout {
            field_shape,
            surface_planes: field_shape[2],
        }
    }

    fn pixels(&self) -> usize {
        self.field_shape[0] * self.field_shape[1]
    }

    pub fn state_len(&self) -> usize {
        self.pixels() * self.field_shape[2]
    }

    pub fn surface_len(&self) -> usize {
        self.pixels() * self.surface_planes
    }

    pub fn bed_len(&self) -> usize {
        self.state_len() - self.surface_len()
    }

    pub fn surface_shape(&self) -> [usize; 3] {
        [self.field_shape[0], self.field_shape[1], self.surface_planes]
    }

    pub fn bed_shape(&self) -> [usize; 3] {
        [
            self.field_shape[0],
            self.field_shape[1],
            self.field_shape[2] - self.surface_planes,
        ]
    }

    /// `P x`.
    pub fn observe(&self, x: &[f64]) -> Vec<f64> {
        let (d, s) = (self.field_shape[2], self.surface_planes);
        x.chunks_exact(d).flat_map(|px| px[..s].iter().copied()).collect()
    }

    /// `P^T v`.
    pub fn observe_adjoint(&self, v: &[f64]) -> Vec<f64> {
        let (d, s) = (self.field_shape[2], self.surface_planes);
        let mut x = vec![0.0; self.state_len()];
        if s > 0 {
            for (px, sv) in x.chunks_exact_mut(d).zip(v.chunks_exact(s)) {
                px[..s].copy_from_slice(sv);
            }
        }
        x
    }

    /// `Q x`.
    pub fn bed(&self, x: &[f64]) -> Vec<f64> {
        let (d, s) = (self.field_shape[2], self.surface_planes);
        x.chunks_exact(d).flat_map(|px| px[s..].iter().copied()).collect()
    }

    /// `Q^T v`.
    pub fn bed_adjoint(&self, v: &[f64]) -> Vec<f64> {
        let (d, s) = (self.field_shape[2], self.surface_planes);
        let mut x = vec![0.0; self.state_len()];
        if d > s {
            for (px, bv) in x.chunks_exact_mut(d).zip(v.chunks_exact(d - s)) {
                px[s..].copy_from_slice(bv);
            }
        }
        x
    }

    pub fn surface_field(&self, x: &Field) -> Result<Field> {
        x.check_shape(self.field_shape)?;
        Ok(x.planes(0, self.surface_planes))
    }

    pub fn bed_field(&self, x: &Field) -> Result<Field> {
        x.check_shape(self.field_shape)?;
        Ok(x.planes(self.surface_planes, self.field_shape[2]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub lambda: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Radius of the prediction ball.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Relative primal change below which iteration stops.
    pub tol: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            lambda: 8e-3,
            gamma1: 1e-3,
            gamma2: 950.0,
            epsilon: 0.02,
            max_iters: 2000,
            tol: 1e-6,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} {v} out of range")));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda", self.lambda);
        }
        if !(self.gamma1 > 0.0 && self.gamma1.is_finite()) {
            return bad("gamma1", self.gamma1);
        }
        if !(self.gamma2 > 0.0 && self.gamma2.is_finite()) {
            return bad("gamma2", self.gamma2);
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon", self.epsilon);
        }
        if !(self.tol >= 0.0) {
            return bad("tol", self.tol);
        }
        Ok(())
    }
}

/// Largest singular value of a linear map, by power iteration on `A^T A`.
fn spectral_norm(
    n: usize,
    forward: impl Fn(&[f64]) -> Vec<f64>,
    adjoint: impl Fn(&[f64]) -> Vec<f64>,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut sigma = 0.0;
    for _ in 0..500 {
        let nv = norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w = adjoint(&forward(&v));
        let next = norm(&w).sqrt();
        v = w;
        if (next - sigma).abs() <= 1e-12 * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// `(sigma_1(D), sigma_1(P D))`; both are 1 for a tight dictionary with a
/// nonempty observation.
pub fn dictionary_norms(dict: &ConvDictionary, layout: &StateLayout) -> (f64, f64) {
    if dict.is_lattice_exact() {
        let beta = if layout.surface_len() > 0 { 1.0 } else { 0.0 };
        return (1.0, beta);
    }
    let n = dict.coeff_len();
    let s_d = spectral_norm(n, |y| dict.synthesize_slice(y), |x| dict.analyze_vec(x));
    let s_pd = spectral_norm(
        n,
        |y| layout.observe(&dict.synthesize_slice(y)),
        |v| dict.analyze_vec(&layout.observe_adjoint(v)),
    );
    (s_d, s_pd)
}

/// `(1/gamma1 - gamma2 sigma_1(D)^2, beta / 2)` with `beta = sigma_1(P D)^2`.
pub fn step_size_margin(cfg: &EstimatorConfig, sigma_d: f64, sigma_pd: f64) -> (f64, f64) {
    (
        1.0 / cfg.gamma1 - cfg.gamma2 * sigma_d * sigma_d,
        sigma_pd * sigma_pd / 2.0,
    )
}

/// True iff `1/gamma1 - gamma2 sigma_1(D)^2 >= beta / 2`.
pub fn verify_step_sizes(cfg: &EstimatorConfig, dict: &ConvDictionary, layout: &StateLayout) -> bool {
    let (s_d, s_pd) = dictionary_norms(dict, layout);
    let (lhs, rhs) = step_size_margin(cfg, s_d, s_pd);
    lhs >= rhs
}

fn check_step_sizes(cfg: &EstimatorConfig, dict: &ConvDictionary, layout: &StateLayout) -> Result<()> {
    let (s_d, s_pd) = dictionary_norms(dict, layout);
    let (lhs, rhs) = step_size_margin(cfg, s_d, s_pd);
    if lhs >= rhs {
        Ok(())
    } else {
        Err(Error::StepSizeCondition { lhs, rhs })
    }
}

/// Nearest point to `x` in the closed ball of radius `eps` around `c`.
pub fn project_ball(x: &[f64], c: &[f64], eps: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    project_ball_in_place(&mut out, c, eps);
    out
}

fn project_ball_in_place(x: &mut [f64], c: &[f64], eps: f64) {
    let dist = x
        .iter()
        .zip(c)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    if dist <= eps {
        return;
    }
    let s = eps / dist;
    for (v, cv) in x.iter_mut().zip(c) {
        *v = cv + s * (*v - cv);
    }
}

/// Field-valued [`project_ball`].
pub fn project_ball_field(x: &Field, c: &Field, eps: f64) -> Result<Field> {
    c.check_shape(x.shape())?;
    Field::from_vec(x.shape(), project_ball(x.as_slice(), c.as_slice(), eps))
}

/// One-step prediction from the previous estimate.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// `Re(Phi Lambda Phi^+ y_prev)`.
    pub coeffs: CoeffTensor,
    /// `c = D coeffs`.
    pub center: Field,
}

pub fn compute_prediction_center(
    dict: &ConvDictionary,
    model: &DmdModel,
    y_prev: &CoeffTensor,
) -> Result<Prediction> {
    dict.check_coeffs(y_prev)?;
    let y = model.step_features(y_prev.as_slice())?;
    let coeffs = CoeffTensor::from_vec(y_prev.channels(), y_prev.grid(), y)?;
    let center = dict.synthesize(&coeffs)?;
    Ok(Prediction { coeffs, center })
}

#[derive(Debug, Clone)]
pub struct PdsOutcome {
    pub coeffs: CoeffTensor,
    /// `D y` at the returned coefficients.
    pub state: Field,
    pub iterations: usize,
    pub converged: bool,
    /// `1/2 ||P D y - x_S||^2 + lambda ||y||_1`.
    pub objective: f64,
    /// `||D y - c||`.
    pub center_distance: f64,
}

/// `1/2 ||P D y - x_S||^2 + lambda ||y||_1`.
pub fn restoration_objective(
    dict: &ConvDictionary,
    layout: &StateLayout,
    x_s: &[f64],
    y: &[f64],
    lambda: f64,
) -> f64 {
    let px = layout.observe(&dict.synthesize_slice(y));
    let fid: f64 = px.iter().zip(x_s).map(|(a, b)| (a - b).powi(2)).sum();
    0.5 * fid + lambda * y.iter().map(|v| v.abs()).sum::<f64>()
}

/// Primal-dual splitting for the ball-constrained restoration.
///
/// Stops once the relative changes `||x' - x|| / ||x||` and
/// `||y' - y|| / ||y||` have both stayed below `tol` for
/// [`CONVERGENCE_WINDOW`] consecutive iterations, or after `max_iters`. The
/// latest iterate is returned.
pub fn pds_solve(
    dict: &ConvDictionary,
    layout: &StateLayout,
    x_s: &Field,
    center: &Field,
    y_init: &CoeffTensor,
    cfg: &EstimatorConfig,
) -> Result<PdsOutcome> {
    cfg.validate()?;
    if layout.field_shape != dict.field_shape() {
        return Err(Error::shape(dict.field_shape(), layout.field_shape));
    }
    x_s.check_shape(layout.surface_shape())?;
    center.check_shape(dict.field_shape())?;
    dict.check_coeffs(y_init)?;
    check_step_sizes(cfg, dict, layout)?;

    let (g1, g2) = (cfg.gamma1, cfg.gamma2);
    let sigma = (g1 * cfg.lambda).sqrt();
    let xs = x_s.as_slice();
    let c = center.as_slice();

    let mut y = y_init.as_slice().to_vec();
    let mut x = dict.synthesize_slice(&y);
    let mut q = vec![0.0; x.len()];
    let mut z = vec![0.0; x.len()];
    let mut streak = 0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        let mut r = layout.observe(&x);
        r.iter_mut().zip(xs).for_each(|(a, b)| *a -= b);
        let mut r = layout.observe_adjoint(&r);
        r.iter_mut().zip(&q).for_each(|(a, b)| *a += b);
        let g = dict.analyze_vec(&r);

        let y_scale = norm(&y);
        let mut y_diff = 0.0;
        for (v, gv) in y.iter_mut().zip(&g) {
            let old = *v;
            *v -= g1 * gv;
            soft_threshold_in_place(std::slice::from_mut(v), sigma);
            y_diff += (*v - old).powi(2);
        }
        let x_next = dict.synthesize_slice(&y);

        for i in 0..x.len() {
            z[i] = q[i] + g2 * (2.0 * x_next[i] - x[i]);
        }
        // q = z - g2 proj(z / g2)
        let mut p: Vec<f64> = z.iter().map(|v| v / g2).collect();
        project_ball_in_place(&mut p, c, cfg.epsilon);
        for i in 0..q.len() {
            q[i] = z[i] - g2 * p[i];
        }

        let diff = x_next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = norm(&x);
        x = x_next;
        iterations += 1;
        if !(diff.is_finite() && q.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFiniteIterate(iterations));
        }
        let rel = |d: f64, s: f64| if s > 0.0 { d / s } else { d };
        // With a redundant dictionary y can still drift in the null space of
        // D while x has settled, so both changes must be small.
        let rel = rel(diff, scale).max(rel(y_diff.sqrt(), y_scale));
        streak = if rel < cfg.tol { streak + 1 } else { 0 };
        if streak >= CONVERGENCE_WINDOW {
            converged = true;
            break;
        }
    }

    let center_distance = x
        .iter()
        .zip(c)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let objective = {
        let px = layout.observe(&x);
        let fid: f64 = px.iter().zip(xs).map(|(a, b)| (a - b).powi(2)).sum();
        0.5 * fid + cfg.lambda * y.iter().map(|v| v.abs()).sum::<f64>()
    };
    Ok(PdsOutcome {
        coeffs: CoeffTensor::from_vec(y_init.channels(), y_init.grid(), y)?,
        state: Field::from_vec(dict.field_shape(), x)?,
        iterations,
        converged,
        objective,
        center_distance,
    })
}

/// Result of one estimation frame.
#[derive(Debug, Clone)]
pub struct FrameEstimate {
    pub bed: Field,
    pub coeffs: CoeffTensor,
    pub outcome: PdsOutcome,
}

/// One frame: predict from `y_prev`, then restore starting at the prediction
/// with zero dual variable.
pub fn pds_restore(
    dict: &ConvDictionary,
    model: &DmdModel,
    layout: &StateLayout,
    x_s: &Field,
    y_prev: &CoeffTensor,
    cfg: &EstimatorConfig,
) -> Result<FrameEstimate> {
    let pred = compute_prediction_center(dict, model, y_prev)?;
    let outcome = pds_solve(dict, layout, x_s, &pred.center, &pred.coeffs, cfg)?;
    Ok(FrameEstimate {
        bed: layout.bed_field(&outcome.state)?,
        coeffs: outcome.coeffs.clone(),
        outcome,
    })
}

/// Folds [`pds_restore`] over a sequence of surface observations.
pub fn run_sequence(
    dict: &ConvDictionary,
    model: &DmdModel,
    layout: &StateLayout,
    surfaces: &[Field],
    y0: &CoeffTensor,
    cfg: &EstimatorConfig,
) -> Result<Vec<FrameEstimate>> {
    if surfaces.is_empty() {
        return Err(Error::NotEnoughData("no surface frames to estimate"));
    }
    let mut out: Vec<FrameEstimate> = Vec::with_capacity(surfaces.len());
    for s in surfaces {
        let prev = out.last().map_or(y0, |f| &f.coeffs);
        let est = pds_restore(dict, model, layout, s, prev, cfg)?;
        out.push(est);
    }
    Ok(out)
}

/// Bed at time `t >= anchor_time` from amplitudes `b_hat` estimated at
/// `anchor_time`: `Q Re(V e^{Omega (t - anchor_time)} b_hat)`.
pub fn update_bed_evolution(
    model: &DmdModel,
    map: &impl OutputMap,
    layout: &StateLayout,
    b_hat: &[Complex64],
    anchor_time: f64,
    t: f64,
) -> Result<Field> {
    if t < anchor_time {
        return Err(Error::InvalidParameter(format!(
            "time {t} precedes anchor {anchor_time}"
        )));
    }
    let x = model.predict_continuous(map, b_hat, t - anchor_time)?;
    layout.bed_field(&x)
}
