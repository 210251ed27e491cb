//! Per-frame tracking loop.
//!
//! Frame 1 learns the dictionary and seeds the positive buffer; every later
//! frame proposes particles around the previous estimate, pools each
//! candidate into a code slice, scores it against the appearance model and
//! outputs the MAP candidate. Accepted frames rebuild the negative model
//! from samples around the estimate and feed the positive buffer.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::appearance::{collect_negatives, AppearanceModel};
use crate::coding::{learn_dictionary, template_features, Dictionary, PoolingContext};
use crate::error::{Error, Result};
use crate::harness::BoundingBox;
use crate::media::ImageRgb;
use crate::motion::{map_estimate, propagate, AffineState, ParticleSet};

pub use crate::config::TrackerConfig;

const PARTICLE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;
const NEGATIVE_STREAM: u64 = 0xD1B5_4A32_D192_ED03;

fn stream_seed(base: u64, stream: u64, frame: usize) -> u64 {
    base ^ stream.wrapping_mul(frame as u64 + 1)
}

/// What happened on one frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub frame_index: usize,
    pub state: AffineState,
    pub best_loglik: f64,
    pub re_pos: f64,
    pub re_neg: Option<f64>,
    /// Gate was open because no negative model existed yet.
    pub bootstrap: bool,
    pub accepted: bool,
    pub negative_rebuilt: bool,
    pub positive_updated: bool,
    pub pending_len: usize,
    /// Candidates whose extraction or coding failed.
    pub failed_candidates: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerState {
    pub config: TrackerConfig,
    pub dictionary: Arc<Dictionary>,
    pub appearance: AppearanceModel,
    pub last_state: AffineState,
    pub frame_index: usize,
}

/// Affine state whose template covers `b`: centered on the box, no
/// rotation or skew, `scale` from the area ratio and `aspect` from the
/// width/height ratio relative to the template.
pub fn box_to_state(b: &BoundingBox, template: (usize, usize)) -> AffineState {
    let (n1, n2) = (template.0 as f64, template.1 as f64);
    let (cx, cy) = b.center();
    AffineState {
        x: cx,
        y: cy,
        theta: 0.0,
        scale: (b.w * b.h / (n1 * n2)).sqrt(),
        aspect: (b.w / n1) / (b.h / n2),
        skew: 0.0,
    }
}

/// Axis-aligned box of a state: `w = n1 s sqrt(aspect)`, `h = n2 s / sqrt(aspect)`.
pub fn state_to_box(s: &AffineState, template: (usize, usize)) -> BoundingBox {
    let ra = s.aspect.sqrt();
    let w = template.0 as f64 * s.scale * ra;
    let h = template.1 as f64 * s.scale / ra;
    BoundingBox {
        x: s.x - (w - 1.0) / 2.0,
        y: s.y - (h - 1.0) / 2.0,
        w,
        h,
    }
}

impl TrackerState {
    pub fn pooling_context(&self) -> PoolingContext {
        pooling_context(&self.config, self.dictionary.clone())
    }
}

fn pooling_context(cfg: &TrackerConfig, dictionary: Arc<Dictionary>) -> PoolingContext {
    PoolingContext {
        template: cfg.template,
        superpixels: cfg.superpixels,
        compactness: cfg.compactness,
        n_bins: cfg.n_bins,
        lambda: cfg.lambda,
        dictionary,
    }
}

pub fn init(frame: &ImageRgb, init_box: &BoundingBox, config: &TrackerConfig) -> Result<TrackerState> {
    config.validate()?;
    let b = init_box;
    if ![b.x, b.y, b.w, b.h].iter().all(|v| v.is_finite()) || b.w <= 0.0 || b.h <= 0.0 {
        return Err(Error::Init(format!("degenerate initial box {b:?}")));
    }
    let (cx, cy) = b.center();
    let (fw, fh) = (frame.width() as f64, frame.height() as f64);
    if !(0.0..=fw - 1.0).contains(&cx) || !(0.0..=fh - 1.0).contains(&cy) {
        return Err(Error::Init(format!(
            "initial box {b:?} lies outside the {}x{} frame",
            frame.width(),
            frame.height()
        )));
    }
    let anchor = box_to_state(b, config.template);

    // dictionary samples: the ground-truth template plus perturbed copies
    let perturbed = propagate(
        &anchor,
        config.particles,
        &config.noise,
        stream_seed(config.rng_seed, PARTICLE_STREAM, 0),
    )?;
    let states: Vec<AffineState> = std::iter::once(anchor).chain(perturbed.states).collect();
    let per_state: Vec<_> = states
        .par_iter()
        .map(|s| {
            template_features(
                frame,
                s,
                config.template,
                config.superpixels,
                config.compactness,
                config.n_bins,
            )
        })
        .collect::<Result<_>>()
        .map_err(|e| Error::Init(format!("first-frame features: {e}")))?;
    let samples: Vec<_> = per_state.into_iter().flatten().collect();
    let dictionary = Arc::new(learn_dictionary(&samples, config.dictionary_size, config.rng_seed)?);

    let ctx = pooling_context(config, dictionary.clone());
    let first = ctx.pool_state(frame, &anchor)?;
    let appearance = AppearanceModel::new(
        first,
        config.ranks,
        config.gamma,
        config.update_rate,
        config.threshold,
        config.forgetting,
    )?;
    Ok(TrackerState {
        config: config.clone(),
        dictionary,
        appearance,
        last_state: anchor,
        frame_index: 0,
    })
}

/// Candidate states for a frame: the previous estimate followed by
/// `particles - 1` draws around it.
fn candidates(state: &TrackerState, frame_index: usize) -> Result<Vec<AffineState>> {
    let cfg = &state.config;
    let mut out = vec![state.last_state];
    if cfg.particles > 1 {
        let drawn = propagate(
            &state.last_state,
            cfg.particles - 1,
            &cfg.noise,
            stream_seed(cfg.rng_seed, PARTICLE_STREAM, frame_index),
        )?;
        out.extend(drawn.states);
    }
    Ok(out)
}

pub fn step(state: &TrackerState, frame: &ImageRgb) -> Result<(TrackerState, BoundingBox, Diagnostics)> {
    let frame_index = state.frame_index + 1;
    let fail = |reason: String| Error::TrackingFailure {
        frame: frame_index,
        reason,
        last_state: state.last_state,
    };
    let cfg = &state.config;
    let ctx = state.pooling_context();
    let states = candidates(state, frame_index)?;

    let scored: Vec<_> = states
        .par_iter()
        .map(|s| {
            let slice = ctx.pool_state(frame, s).ok()?;
            let score = state.appearance.score(&slice).ok()?;
            Some((slice, score))
        })
        .collect();
    let failed_candidates = scored.iter().filter(|s| s.is_none()).count();
    if failed_candidates == scored.len() {
        return Err(fail("every candidate failed to extract".into()));
    }
    let particles = ParticleSet {
        log_weights: scored
            .iter()
            .map(|s| s.as_ref().map_or(f64::NAN, |(_, sc)| sc.log_likelihood))
            .collect(),
        states,
    };
    let (idx, best, best_loglik) = map_estimate(&particles).map_err(|e| fail(e.to_string()))?;
    let (best_slice, score) = scored[idx].clone().expect("MAP candidate was scored");

    let bootstrap = state.appearance.negative.is_none();
    let mut appearance = state.appearance.clone();
    let mut outcome = Default::default();
    if state.appearance.accepts(best_loglik) {
        match collect_negatives(
            frame,
            &best,
            cfg.negatives,
            cfg.annulus,
            &ctx,
            stream_seed(cfg.rng_seed, NEGATIVE_STREAM, frame_index),
        ) {
            Ok(neg) => {
                (appearance, outcome) = state.appearance.maybe_update(&best_slice, best_loglik, &neg)?;
            }
            // the target has left the frame far enough that no background
            // ring can be sampled; keep the model as is
            Err(Error::DegenerateGeometry(_)) => {}
            Err(e) => return Err(fail(format!("negative sampling: {e}"))),
        }
    }

    let bbox = state_to_box(&best, cfg.template);
    let diag = Diagnostics {
        frame_index,
        state: best,
        best_loglik,
        re_pos: score.re_pos,
        re_neg: score.re_neg,
        bootstrap,
        accepted: outcome.accepted,
        negative_rebuilt: outcome.negative_rebuilt,
        positive_updated: outcome.positive_updated,
        pending_len: appearance.pending.len(),
        failed_candidates,
    };
    let next = TrackerState {
        config: cfg.clone(),
        dictionary: state.dictionary.clone(),
        appearance,
        last_state: best,
        frame_index,
    };
    Ok((next, bbox, diag))
}
