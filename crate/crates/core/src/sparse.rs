//! l1 sparse approximation against a convolutional dictionary.

use serde::{Deserialize, Serialize};

use crate::dictionary::ConvDictionary;
use crate::error::{Error, Result};
use crate::field::{norm, CoeffTensor, Field};

/// Elementwise `sgn(v) max(|v| - sigma^2, 0)`. Note the threshold is
/// `sigma^2`; callers wanting threshold `t` pass `sqrt(t)`.
pub fn soft_threshold(v: &[f64], sigma: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    soft_threshold_in_place(&mut out, sigma);
    out
}

pub fn soft_threshold_in_place(v: &mut [f64], sigma: f64) {
    let t = sigma * sigma;
    for x in v.iter_mut() {
        let m = x.abs() - t;
        *x = if m > 0.0 { m.copysign(*x) } else { 0.0 };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IstaConfig {
    pub lambda: f64,
    /// Gradient step; must not exceed `1 / sigma_1(D)^2`, which is 1 for a
    /// tight dictionary.
    pub step: f64,
    pub max_iters: usize,
    /// Relative coefficient change below which iteration stops.
    pub tol: f64,
}

impl Default for IstaConfig {
    fn default() -> Self {
        IstaConfig {
            lambda: 8e-3,
            step: 1.0,
            max_iters: 1000,
            tol: 1e-6,
        }
    }
}

impl IstaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("ISTA lambda {} must be >= 0", self.lambda)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter(format!("ISTA step {} must be > 0", self.step)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("ISTA tol {} must be >= 0", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IstaOutcome {
    pub coeffs: CoeffTensor,
    pub iterations: usize,
    pub converged: bool,
    /// Objective `1/2 ||x - D y||^2 + lambda ||y||_1` at the returned coefficients.
    pub objective: f64,
    /// Objective at every iterate, starting with the initial one; only filled
    /// when requested.
    pub trace: Vec<f64>,
}

fn objective(x: &[f64], dy: &[f64], y: &[f64], lambda: f64) -> f64 {
    let fid: f64 = x.iter().zip(dy).map(|(a, b)| (a - b).powi(2)).sum();
    0.5 * fid + lambda * y.iter().map(|v| v.abs()).sum::<f64>()
}

/// Minimizes `1/2 ||x - D y||^2 + lambda ||y||_1` from `y = 0`.
pub fn ista_encode(dict: &ConvDictionary, x: &Field, cfg: &IstaConfig) -> Result<CoeffTensor> {
    Ok(ista_solve(dict, x, cfg, None, false)?.coeffs)
}

/// ISTA with optional warm start and objective trace.
pub fn ista_solve(
    dict: &ConvDictionary,
    x: &Field,
    cfg: &IstaConfig,
    warm_start: Option<&CoeffTensor>,
    record_trace: bool,
) -> Result<IstaOutcome> {
    cfg.validate()?;
    x.check_shape(dict.field_shape())?;
    let mut y = match warm_start {
        Some(y0) => {
            dict.check_coeffs(y0)?;
            y0.clone()
        }
        None => dict.zero_coeffs(),
    };
    let xs = x.as_slice();
    let sigma = (cfg.step * cfg.lambda).sqrt();

    let mut dy = dict.synthesize_slice(y.as_slice());
    let initial = objective(xs, &dy, y.as_slice(), cfg.lambda);
    let limit = 1e3 * initial.max(f64::MIN_POSITIVE);
    let mut current = initial;
    let mut trace = Vec::new();
    if record_trace {
        trace.push(initial);
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        let resid: Vec<f64> = xs.iter().zip(&dy).map(|(a, b)| a - b).collect();
        let grad = dict.analyze_vec(&resid);
        let mut next: Vec<f64> = y
            .as_slice()
            .iter()
            .zip(&grad)
            .map(|(v, g)| v + cfg.step * g)
            .collect();
        soft_threshold_in_place(&mut next, sigma);

        let change = norm(
            &next
                .iter()
                .zip(y.as_slice())
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        let scale = y.norm().max(1e-12);
        y.as_mut_slice().copy_from_slice(&next);
        dy = dict.synthesize_slice(y.as_slice());
        current = objective(xs, &dy, y.as_slice(), cfg.lambda);
        iterations += 1;
        if record_trace {
            trace.push(current);
        }
        if !current.is_finite() || current > limit {
            return Err(Error::Divergence {
                iteration: iterations,
                objective: current,
                initial,
            });
        }
        if change / scale < cfg.tol || change == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(IstaOutcome {
        coeffs: y,
        iterations,
        converged,
        objective: current,
        trace,
    })
}
