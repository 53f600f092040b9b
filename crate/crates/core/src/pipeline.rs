//! End-to-end glue: dictionary training, snapshot encoding and the
//! four-way comparison of bare predictions and constrained restorations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adagrad::AdaGrad;
use crate::datasets::{rmse, SnapshotSeries};
use crate::dictionary::{
    dictionary_update_step, ConvDictionary, DictionaryGeometry, DictionaryInit, DictionaryParams,
};
use crate::dmd::DmdModel;
use crate::error::{Error, Result};
use crate::estimation::{run_sequence, EstimatorConfig, StateLayout};
use crate::field::{CoeffTensor, Field};
use crate::sparse::{ista_solve, IstaConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Scale of the random initial angles; 0 starts from the DCT lattice.
    pub init_scale: f64,
    /// Sparse coding used for the coefficient step of each epoch. Codes are
    /// warm-started from the previous epoch.
    pub ista: IstaConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            lr: AdaGrad::DEFAULT_LR,
            init_scale: 0.0,
            ista: IstaConfig {
                max_iters: 50,
                ..IstaConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// `1/2 sum ||x - D y||^2` before the dictionary step.
    pub reconstruction: f64,
    /// `reconstruction + lambda sum ||y||_1`.
    pub objective: f64,
    /// Mean fraction of nonzero coefficients.
    pub density: f64,
}

/// Alternates sparse coding of all patches and one AdaGrad step on the
/// lattice angles, for `cfg.epochs` epochs. The geometry's field shape must
/// match the patches.
pub fn train_dictionary(
    geometry: DictionaryGeometry,
    patches: &[Field],
    cfg: &TrainConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<ConvDictionary> {
    if patches.is_empty() {
        return Err(Error::NotEnoughData("dictionary training needs patches"));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidParameter(format!("learning rate {} must be > 0", cfg.lr)));
    }
    cfg.ista.validate()?;
    let init = if cfg.init_scale == 0.0 {
        DictionaryInit::Identity
    } else {
        DictionaryInit::Random {
            seed,
            scale: cfg.init_scale,
        }
    };
    let mut dict = ConvDictionary::new(geometry, init)?;
    let mut optimizer = AdaGrad::new(dict.angles().len(), cfg.lr);
    let mut codes: Vec<CoeffTensor> = vec![dict.zero_coeffs(); patches.len()];
    for epoch in 0..cfg.epochs {
        codes = patches
            .par_iter()
            .zip(codes.par_iter())
            .map(|(x, y)| Ok(ista_solve(&dict, x, &cfg.ista, Some(y), false)?.coeffs))
            .collect::<Result<Vec<_>>>()?;
        let batch: Vec<(Field, CoeffTensor)> = patches.iter().cloned().zip(codes.iter().cloned()).collect();
        let reconstruction = dict.reconstruction_objective(&batch)?;
        let density = codes.iter().map(|c| c.nnz() as f64 / c.len() as f64).sum::<f64>() / codes.len() as f64;
        let l1: f64 = codes.iter().map(CoeffTensor::l1_norm).sum();
        dict = dictionary_update_step(&dict, &batch, &mut optimizer)?;
        on_epoch(&EpochLog {
            epoch,
            reconstruction,
            objective: reconstruction + cfg.ista.lambda * l1,
            density,
        });
    }
    Ok(dict)
}

/// Feature vectors of the frames: ISTA codes when `ista` is given, plain
/// analysis coefficients `D^T x` otherwise.
pub fn encode_frames(
    dict: &ConvDictionary,
    frames: &[Field],
    ista: Option<&IstaConfig>,
) -> Result<Vec<CoeffTensor>> {
    frames
        .par_iter()
        .map(|x| match ista {
            Some(cfg) => Ok(ista_solve(dict, x, cfg, None, false)?.coeffs),
            None => dict.analyze(x),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// DMD rank.
    pub rank: usize,
    /// Sparse coding of snapshots for CSC-DMD.
    pub ista: IstaConfig,
    pub estimator: EstimatorConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            rank: 8,
            ista: IstaConfig::default(),
            estimator: EstimatorConfig::default(),
        }
    }
}

/// A feature map plus the DMD model fitted in its feature space.
#[derive(Debug, Clone)]
pub struct FittedMethod {
    pub dict: ConvDictionary,
    pub model: DmdModel,
    /// Features of the last training frame; the anchor of every prediction.
    pub anchor: CoeffTensor,
}

/// Encodes the training frames and fits DMD on them.
pub fn fit_method(
    dict: &ConvDictionary,
    train: &SnapshotSeries,
    rank: usize,
    ista: Option<&IstaConfig>,
) -> Result<FittedMethod> {
    let codes = encode_frames(dict, &train.frames, ista)?;
    let model = DmdModel::fit(&codes, train.dt, rank)?;
    let anchor = codes.last().expect("fit succeeded on nonempty codes").clone();
    Ok(FittedMethod {
        dict: dict.clone(),
        model,
        anchor,
    })
}

impl FittedMethod {
    /// States `Re(D Phi Lambda^k Phi^+ y_anchor)` for `k = 1..=frames`.
    pub fn bare_predictions(&self, frames: usize) -> Result<Vec<Field>> {
        let b = self.model.initial_amplitudes(self.anchor.as_slice())?;
        (1..=frames as u32)
            .map(|k| self.model.predict_state(&self.dict, &b, k))
            .collect()
    }

    /// Constrained restoration of the beds from the test surfaces.
    pub fn restore(
        &self,
        layout: &StateLayout,
        surfaces: &[Field],
        cfg: &EstimatorConfig,
    ) -> Result<Vec<crate::estimation::FrameEstimate>> {
        run_sequence(&self.dict, &self.model, layout, surfaces, &self.anchor, cfg)
    }
}

/// On-disk form of a fitted method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedModel {
    pub dictionary: DictionaryParams,
    /// Sparse coding used for the features; `None` for raw `D^T x` features.
    pub encoding: Option<IstaConfig>,
    /// Number of leading series frames used for fitting.
    pub train_frames: usize,
    pub anchor: CoeffTensor,
    pub dmd: DmdModel,
}

impl SavedModel {
    pub fn new(method: &FittedMethod, encoding: Option<IstaConfig>, train_frames: usize) -> Self {
        SavedModel {
            dictionary: method.dict.params(),
            encoding,
            train_frames,
            anchor: method.anchor.clone(),
            dmd: method.model.clone(),
        }
    }

    pub fn method(&self) -> Result<FittedMethod> {
        let dict = ConvDictionary::from_params(&self.dictionary)?;
        dict.check_coeffs(&self.anchor)?;
        if self.dmd.feature_len() != dict.coeff_len() {
            return Err(Error::shape(dict.coeff_len(), self.dmd.feature_len()));
        }
        Ok(FittedMethod {
            dict,
            model: self.dmd.clone(),
            anchor: self.anchor.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Per-frame bed RMSE of the four compared estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub bare_dmd: Vec<f64>,
    pub bare_csc_dmd: Vec<f64>,
    pub restored_dmd: Vec<f64>,
    pub restored_csc_dmd: Vec<f64>,
}

pub const METHOD_NAMES: [&str; 4] = ["dmd_prediction", "cscdmd_prediction", "dmd_restoration", "cscdmd_restoration"];

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

impl Evaluation {
    pub fn columns(&self) -> [&[f64]; 4] {
        [&self.bare_dmd, &self.bare_csc_dmd, &self.restored_dmd, &self.restored_csc_dmd]
    }

    pub fn means(&self) -> [f64; 4] {
        self.columns().map(mean)
    }

    /// `frame,<method>...` with one row per test frame.
    pub fn to_csv(&self) -> String {
        rmse_csv(&METHOD_NAMES, &self.columns())
    }
}

/// Wide CSV of per-frame values; frames are numbered from 1.
pub fn rmse_csv(names: &[&str], columns: &[&[f64]]) -> String {
    let mut out = String::from("frame");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    let rows = columns.iter().map(|c| c.len()).max().unwrap_or(0);
    for k in 0..rows {
        out.push_str(&(k + 1).to_string());
        for c in columns {
            out.push(',');
            if let Some(v) = c.get(k) {
                out.push_str(&format!("{v:.16e}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Bed RMSE of each estimate against the bed planes of the truth frames.
pub fn bed_rmse(layout: &StateLayout, estimates: &[Field], truth: &[Field]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::shape(truth.len(), estimates.len()));
    }
    estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let e = if e.shape() == layout.bed_shape() { e.clone() } else { layout.bed_field(e)? };
            rmse(&e, &layout.bed_field(t)?)
        })
        .collect()
}

/// Runs the comparison: plain DMD (identity dictionary, raw features) and
/// CSC-DMD (trained dictionary, sparse codes), each as a bare prediction from
/// the last training frame and as constrained restoration from the test
/// surfaces.
pub fn evaluate_methods(
    csc_dict: &ConvDictionary,
    train: &SnapshotSeries,
    test: &SnapshotSeries,
    cfg: &ExperimentConfig,
) -> Result<Evaluation> {
    let shape = train
        .shape()
        .ok_or(Error::NotEnoughData("empty training series"))?;
    let layout = StateLayout::surface_bed(shape)?;
    let surfaces: Vec<Field> = test
        .frames
        .iter()
        .map(|f| layout.surface_field(f))
        .collect::<Result<_>>()?;
    let csc_dict = csc_dict.with_field_shape(shape)?;
    let identity = ConvDictionary::identity(shape)?;

    let dmd = fit_method(&identity, train, cfg.rank, None)?;
    let csc = fit_method(&csc_dict, train, cfg.rank, Some(&cfg.ista))?;

    let n = test.len();
    let bare_dmd = bed_rmse(&layout, &dmd.bare_predictions(n)?, &test.frames)?;
    let bare_csc_dmd = bed_rmse(&layout, &csc.bare_predictions(n)?, &test.frames)?;
    let beds = |m: &FittedMethod| -> Result<Vec<Field>> {
        Ok(m.restore(&layout, &surfaces, &cfg.estimator)?
            .into_iter()
            .map(|f| f.bed)
            .collect())
    };
    let restored_dmd = bed_rmse(&layout, &beds(&dmd)?, &test.frames)?;
    let restored_csc_dmd = bed_rmse(&layout, &beds(&csc)?, &test.frames)?;
    Ok(Evaluation {
        bare_dmd,
        bare_csc_dmd,
        restored_dmd,
        restored_csc_dmd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_synthetic, sample_patches, SyntheticRiverParams};

    fn small_params() -> SyntheticRiverParams {
        SyntheticRiverParams {
            grid: [8, 32],
            n_frames: 12,
            wavelengths: vec![16.0, 32.0],
            celerities: vec![1.0, -0.5],
            amplitudes: vec![0.1, 0.05],
            noise_sigma: 0.0,
            ..Default::default()
        }
    }

    fn small_geometry() -> DictionaryGeometry {
        DictionaryGeometry {
            decimation: [2, 4, 2],
            channels: 20,
            polyphase_order: [2, 2, 0],
            field_shape: [8, 32, 2],
        }
    }

    #[test]
    fn training_lowers_reconstruction_and_stays_tight() {
        let series = generate_synthetic(&small_params()).unwrap();
        let patches = sample_patches(&series, 6, [8, 32, 2], 3).unwrap();
        let cfg = TrainConfig { epochs: 6, ..Default::default() };
        let mut log = Vec::new();
        let d = train_dictionary(small_geometry(), &patches, &cfg, 1, |e| log.push(*e)).unwrap();
        assert_eq!(log.len(), 6);
        assert!(log.last().unwrap().objective < log[0].objective);
        assert!(d.check_tightness(3, 1) < 1e-9);
        assert!(train_dictionary(small_geometry(), &[], &cfg, 1, |_| {}).is_err());
    }

    #[test]
    fn raw_features_recover_traveling_waves() {
        let p = SyntheticRiverParams { wavelengths: vec![16.0], celerities: vec![1.0], amplitudes: vec![0.1], ..small_params() };
        let series = generate_synthetic(&p).unwrap();
        let dict = ConvDictionary::new(small_geometry(), DictionaryInit::Random { seed: 2, scale: 1.0 }).unwrap();
        let m = fit_method(&dict, &series, 3, None).unwrap();
        let mut lam = m.model.eigenvalues().to_vec();
        assert_eq!(lam.len(), 3);
        lam.sort_by(|a, b| a.im.total_cmp(&b.im));
        let th = 2.0 * std::f64::consts::PI / 16.0;
        assert!((lam[0] - num_complex::Complex64::from_polar(1.0, -th)).norm() < 1e-6);
        assert!((lam[1] - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-6);
        assert!((lam[2] - num_complex::Complex64::from_polar(1.0, th)).norm() < 1e-6);
        let pred = m.bare_predictions(2).unwrap();
        assert!(rmse(&pred[1], &generate_synthetic(&SyntheticRiverParams { n_frames: 14, ..p }).unwrap().frames[13]).unwrap() < 1e-8);
    }

    #[test]
    fn evaluation_runs_and_formats() {
        let series = generate_synthetic(&small_params()).unwrap();
        let (train, test) = series.split_at(8).unwrap();
        let dict = ConvDictionary::new(small_geometry(), DictionaryInit::Identity).unwrap();
        let cfg = ExperimentConfig { rank: 5, ista: IstaConfig { max_iters: 100, ..Default::default() }, estimator: EstimatorConfig { max_iters: 200, ..Default::default() } };
        let ev = evaluate_methods(&dict, &train, &test, &cfg).unwrap();
        assert!(ev.columns().iter().all(|c| c.len() == 4 && c.iter().all(|v| v.is_finite())));
        let csv = ev.to_csv();
        assert!(csv.starts_with("frame,dmd_prediction,cscdmd_prediction,dmd_restoration,cscdmd_restoration\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn saved_model_round_trip() {
        let series = generate_synthetic(&small_params()).unwrap();
        let dict = ConvDictionary::new(small_geometry(), DictionaryInit::Random { seed: 5, scale: 0.5 }).unwrap();
        let ista = IstaConfig { max_iters: 50, ..Default::default() };
        let m = fit_method(&dict, &series, 4, Some(&ista)).unwrap();
        let saved = SavedModel::new(&m, Some(ista), series.len());
        let back = SavedModel::from_json(&saved.to_json().unwrap()).unwrap().method().unwrap();
        assert_eq!(back.dict.angles(), m.dict.angles());
        assert_eq!(back.anchor, m.anchor);
        assert_eq!(back.model.eigenvalues(), m.model.eigenvalues());
        assert_eq!(back.bare_predictions(2).unwrap(), m.bare_predictions(2).unwrap());
    }
}
