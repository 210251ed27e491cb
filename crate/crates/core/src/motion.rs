//! Random-walk particle propagation over the affine state and MAP selection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_REDRAWS: usize = 100;
const POSITIVE_FLOOR: f64 = 1e-3;

/// Six-parameter affine target state: translation, rotation, scale, aspect
/// ratio and skew direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub scale: f64,
    pub aspect: f64,
    pub skew: f64,
}

impl Default for AffineState {
    fn default() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
            scale: 1.0,
            aspect: 1.0,
            skew: 0.0,
        }
    }
}

impl AffineState {
    pub fn as_array(&self) -> [f64; 6] {
        [self.x, self.y, self.theta, self.scale, self.aspect, self.skew]
    }

    pub fn from_array(p: [f64; 6]) -> Self {
        Self {
            x: p[0],
            y: p[1],
            theta: p[2],
            scale: p[3],
            aspect: p[4],
            skew: p[5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!("non-finite parameter in {self:?}")));
        }
        if self.scale <= 0.0 || self.aspect <= 0.0 {
            return Err(Error::InvalidState(format!(
                "scale and aspect must be positive, got scale={} aspect={}",
                self.scale, self.aspect
            )));
        }
        Ok(())
    }

    /// Linear part `s R(theta) R(-skew) diag(sqrt(aspect), 1/sqrt(aspect)) R(skew)`.
    ///
    /// The aspect stretch preserves area so `scale` alone sets the footprint.
    pub fn linear_map(&self) -> [[f64; 2]; 2] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.skew.sin_cos();
        let ra = self.aspect.sqrt();
        let (ax, ay) = (ra, 1.0 / ra);
        // R(-phi) D R(phi)
        let m00 = ax * cp * cp + ay * sp * sp;
        let m01 = (ax - ay) * cp * sp;
        let m11 = ax * sp * sp + ay * cp * cp;
        let s = self.scale;
        [
            [s * (ct * m00 - st * m01), s * (ct * m01 - st * m11)],
            [s * (st * m00 + ct * m01), s * (st * m01 + ct * m11)],
        ]
    }
}

/// Standard deviations of the diagonal random-walk covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigmas: [f64; 6],
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigmas: [4.0, 4.0, 0.02, 0.01, 0.002, 0.001],
        }
    }
}

impl NoiseSpec {
    pub fn zero() -> Self {
        Self { sigmas: [0.0; 6] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Parameter(format!(
                "noise sigmas must be finite and nonnegative, got {:?}",
                self.sigmas
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    pub states: Vec<AffineState>,
    pub log_weights: Vec<f64>,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Draws `b` i.i.d. states from `N(anchor, diag(sigma^2))`.
///
/// Draws with nonpositive scale or aspect are redrawn up to 100 times, then
/// clamped to a small positive floor.
pub fn propagate(anchor: &AffineState, b: usize, noise: &NoiseSpec, rng_seed: u64) -> Result<ParticleSet> {
    if b == 0 {
        return Err(Error::Parameter("particle count must be positive".into()));
    }
    noise.validate()?;
    anchor.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let base = anchor.as_array();
    let mut states = Vec::with_capacity(b);
    for _ in 0..b {
        let mut p = [0.0; 6];
        for (i, v) in p.iter_mut().enumerate() {
            *v = base[i] + noise.sigmas[i] * std_normal.sample(&mut rng);
        }
        for i in [3, 4] {
            let mut attempts = 0;
            while p[i] <= 0.0 && attempts < MAX_REDRAWS {
                p[i] = base[i] + noise.sigmas[i] * std_normal.sample(&mut rng);
                attempts += 1;
            }
            if p[i] <= 0.0 {
                p[i] = POSITIVE_FLOOR;
            }
        }
        states.push(AffineState::from_array(p));
    }
    Ok(ParticleSet {
        states,
        log_weights: vec![0.0; b],
    })
}

/// Returns the particle with the largest log weight; ties go to the lowest
/// index. NaN weights never win.
pub fn map_estimate(particles: &ParticleSet) -> Result<(usize, AffineState, f64)> {
    if particles.is_empty() || particles.log_weights.len() != particles.states.len() {
        return Err(Error::Parameter(
            "particle set must be nonempty with one weight per state".into(),
        ));
    }
    let mut best: Option<usize> = None;
    for (i, w) in particles.log_weights.iter().enumerate() {
        if w.is_nan() {
            continue;
        }
        match best {
            Some(b) if particles.log_weights[b] >= *w => {}
            _ => best = Some(i),
        }
    }
    let idx = best.ok_or_else(|| Error::Parameter("all particle weights are NaN".into()))?;
    Ok((idx, particles.states[idx], particles.log_weights[idx]))
}
