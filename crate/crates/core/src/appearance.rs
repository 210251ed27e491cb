//! Discriminative appearance model built from positive and negative tensor
//! subspaces.
//!
//! A candidate's `z x s` code slice is scored by its reconstruction error
//! against each subspace model: the residual after projecting the centered
//! slice through the mode-1 and mode-2 bases (counted once per unfolding)
//! and the residual of its vectorization against the mode-3 basis, blended
//! by `gamma`. The log-likelihood of a candidate is `RE(-) - RE(+)`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coding::{CodeSlice, PoolingContext};
use crate::error::{Error, Result};
use crate::media::ImageRgb;
use crate::motion::AffineState;
use crate::tensor::{hosvd, incremental_update, Matrix, SubspaceModel, Tensor3};

/// The two terms of the reconstruction error before blending.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructionTerms {
    /// Sum over the mode-1 and mode-2 unfoldings.
    pub re1: f64,
    /// Mode-3 residual.
    pub re2: f64,
}

impl ReconstructionTerms {
    pub fn blend(&self, gamma: f64) -> f64 {
        gamma * self.re1 + (1.0 - gamma) * self.re2
    }
}

pub fn reconstruction_terms(j: &Matrix, model: &SubspaceModel) -> Result<ReconstructionTerms> {
    let (d1, d2) = model.slice_dims();
    if j.shape() != (d1, d2) {
        return Err(Error::Parameter(format!(
            "candidate slice {:?} does not match model slices {d1}x{d2}",
            j.shape()
        )));
    }
    let centered = j - model.mean.slice(0);

    // (J - M) x1 U1 U1^T x2 U2 U2^T
    let core = model.u1.transpose() * &centered * &model.u2;
    let projected = &model.u1 * core * model.u2.transpose();
    // the mode-1 and mode-2 unfoldings of a single slice hold the same
    // entries, so both summands equal this residual
    let re1 = 2.0 * (&centered - projected).norm_squared();

    let v = nalgebra::DVector::from_column_slice(centered.as_slice());
    let coeff = model.v3.transpose() * &v;
    let re2 = (&v - &model.v3 * coeff).norm_squared();
    Ok(ReconstructionTerms { re1, re2 })
}

pub fn reconstruction_error(j: &Matrix, model: &SubspaceModel, gamma: f64) -> Result<f64> {
    Ok(reconstruction_terms(j, model)?.blend(gamma))
}

/// Log of the unnormalized likelihood `exp(RE(-) - RE(+))`; without a
/// negative model only the positive term contributes.
pub fn log_likelihood(re_pos: f64, re_neg: Option<f64>) -> f64 {
    match re_neg {
        Some(n) => n - re_pos,
        None => -re_pos,
    }
}

/// States whose centers are spread uniformly (by area) over the annulus
/// `[inner, outer]` around `best`; other parameters are copied from `best`.
pub fn negative_states(
    frame_size: (usize, usize),
    best: &AffineState,
    count: usize,
    ring: (f64, f64),
    rng_seed: u64,
) -> Result<Vec<AffineState>> {
    let (inner, outer) = ring;
    if count == 0 {
        return Err(Error::Parameter("negative sample count must be positive".into()));
    }
    if !(inner > 0.0 && inner < outer && outer.is_finite()) {
        return Err(Error::Parameter(format!(
            "annulus needs 0 < inner < outer, got ({inner}, {outer})"
        )));
    }
    best.validate()?;
    let (w, h) = (frame_size.0 as f64 - 1.0, frame_size.1 as f64 - 1.0);
    let nearest = (best.x - best.x.clamp(0.0, w)).hypot(best.y - best.y.clamp(0.0, h));
    let farthest = [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
        .iter()
        .map(|(cx, cy)| (best.x - cx).hypot(best.y - cy))
        .fold(0.0, f64::max);
    if nearest > outer || farthest < inner {
        return Err(Error::DegenerateGeometry(format!(
            "annulus ({inner}, {outer}) around ({:.1}, {:.1}) misses the {}x{} frame",
            best.x, best.y, frame_size.0, frame_size.1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (a2, b2) = (inner * inner, outer * outer);
    Ok((0..count)
        .map(|_| {
            let r = rng.gen_range(a2..=b2).sqrt().max(inner);
            let t = rng.gen_range(0.0..TAU);
            AffineState {
                x: best.x + r * t.cos(),
                y: best.y + r * t.sin(),
                ..*best
            }
        })
        .collect())
}

/// Pools `count` background samples from the annulus around `best` into a
/// `z x s x count` tensor.
pub fn collect_negatives(
    frame: &ImageRgb,
    best: &AffineState,
    count: usize,
    ring: (f64, f64),
    ctx: &PoolingContext,
    rng_seed: u64,
) -> Result<Tensor3> {
    let states = negative_states((frame.width(), frame.height()), best, count, ring, rng_seed)?;
    let slices = states
        .par_iter()
        .map(|s| ctx.pool_state(frame, s).map(|c| c.0))
        .collect::<Result<Vec<_>>>()?;
    Tensor3::stack(&slices)
}

/// What a call to [`AppearanceModel::maybe_update`] changed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateOutcome {
    pub accepted: bool,
    pub negative_rebuilt: bool,
    pub positive_updated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AppearanceModel {
    pub positive: SubspaceModel,
    pub negative: Option<SubspaceModel>,
    pub gamma: f64,
    pub pending: Vec<CodeSlice>,
    pub update_rate: usize,
    pub threshold: f64,
    pub forgetting: f64,
}

impl AppearanceModel {
    /// Starts from a single target slice: it becomes the positive mean and
    /// the first entry of the pending buffer.
    pub fn new(
        first: CodeSlice,
        ranks: (usize, usize, usize),
        gamma: f64,
        update_rate: usize,
        threshold: f64,
        forgetting: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Parameter(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if update_rate == 0 {
            return Err(Error::Parameter("update rate must be positive".into()));
        }
        let positive = SubspaceModel::prior(Tensor3::from_matrix(&first.0), ranks)?;
        let mut model = Self {
            positive,
            negative: None,
            gamma,
            pending: Vec::with_capacity(update_rate),
            update_rate,
            threshold,
            forgetting,
        };
        model.pending.push(first);
        if model.pending.len() >= update_rate {
            model.flush_pending()?;
        }
        Ok(model)
    }

    pub fn score(&self, slice: &CodeSlice) -> Result<Score> {
        let re_pos = reconstruction_error(&slice.0, &self.positive, self.gamma)?;
        let re_neg = self
            .negative
            .as_ref()
            .map(|n| reconstruction_error(&slice.0, n, self.gamma))
            .transpose()?;
        Ok(Score {
            re_pos,
            re_neg,
            log_likelihood: log_likelihood(re_pos, re_neg),
        })
    }

    /// Whether a best candidate with this log-likelihood enters the update.
    ///
    /// Until a negative model exists the gate is open, since negatives are
    /// only harvested from accepted frames.
    pub fn accepts(&self, best_loglik: f64) -> bool {
        self.negative.is_none() || best_loglik > self.threshold
    }

    pub fn maybe_update(
        &self,
        best_slice: &CodeSlice,
        best_loglik: f64,
        negatives: &Tensor3,
    ) -> Result<(AppearanceModel, UpdateOutcome)> {
        if !self.accepts(best_loglik) {
            return Ok((self.clone(), UpdateOutcome::default()));
        }
        let mut next = self.clone();
        let (d1, d2, d3) = negatives.dims();
        let r = self.positive.ranks;
        next.negative = Some(hosvd(negatives, (r.0.min(d1), r.1.min(d2), r.2.min(d3)))?);
        next.pending.push(best_slice.clone());
        let positive_updated = next.pending.len() >= next.update_rate;
        if positive_updated {
            next.flush_pending()?;
        }
        Ok((
            next,
            UpdateOutcome {
                accepted: true,
                negative_rebuilt: true,
                positive_updated,
            },
        ))
    }

    fn flush_pending(&mut self) -> Result<()> {
        let slices: Vec<Matrix> = self.pending.drain(..).map(|s| s.0).collect();
        let batch = Tensor3::stack(&slices)?;
        self.positive = incremental_update(&self.positive, &batch, self.forgetting)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub re_pos: f64,
    pub re_neg: Option<f64>,
    pub log_likelihood: f64,
}
