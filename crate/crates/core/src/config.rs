//! Tracker configuration and its flat `key = value` file format.
//!
//! Tuple fields are spelled out with suffixes (`template_width`,
//! `rank_1`, `sigma_x`, `annulus_inner`, ...). Missing keys keep their
//! defaults; unknown keys are rejected. Lines starting with `#` are
//! comments.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::NoiseSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    /// Template size `(n1, n2)` in pixels.
    pub template: (usize, usize),
    pub superpixels: usize,
    pub compactness: f64,
    /// Histogram bins per cue.
    pub n_bins: usize,
    /// Number of dictionary atoms `z`.
    pub dictionary_size: usize,
    pub lambda: f64,
    pub particles: usize,
    pub negatives: usize,
    pub update_rate: usize,
    pub gamma: f64,
    pub threshold: f64,
    pub noise: NoiseSpec,
    pub ranks: (usize, usize, usize),
    pub forgetting: f64,
    /// Inner and outer radius of the negative sampling ring, in pixels.
    pub annulus: (f64, f64),
    pub rng_seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            template: (32, 32),
            superpixels: 30,
            compactness: 20.0,
            n_bins: 8,
            dictionary_size: 50,
            lambda: 0.01,
            particles: 600,
            negatives: 200,
            update_rate: 5,
            gamma: 0.5,
            threshold: 0.0,
            noise: NoiseSpec::default(),
            ranks: (8, 8, 5),
            forgetting: 0.99,
            annulus: (8.0, 16.0),
            rng_seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let counts = [
            ("template_width", self.template.0),
            ("template_height", self.template.1),
            ("superpixels", self.superpixels),
            ("bins", self.n_bins),
            ("dictionary_size", self.dictionary_size),
            ("particles", self.particles),
            ("negatives", self.negatives),
            ("update_rate", self.update_rate),
            ("rank_1", self.ranks.0),
            ("rank_2", self.ranks.1),
            ("rank_3", self.ranks.2),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be at least 1"));
        }
        if self.superpixels > self.template.0 * self.template.1 {
            return bad(format!(
                "{} superpixels do not fit a {}x{} template",
                self.superpixels, self.template.0, self.template.1
            ));
        }
        if !(self.compactness.is_finite() && self.compactness > 0.0) {
            return bad(format!("compactness must be positive, got {}", self.compactness));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !self.threshold.is_finite() {
            return bad("threshold must be finite".into());
        }
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return bad(format!("forgetting must lie in (0, 1], got {}", self.forgetting));
        }
        let (inner, outer) = self.annulus;
        if !(inner > 0.0 && inner < outer && outer.is_finite()) {
            return bad(format!("annulus needs 0 < inner < outer, got ({inner}, {outer})"));
        }
        // the dictionary is learned from the first-frame template plus one
        // perturbed copy per particle
        if (self.particles + 1) * self.superpixels < self.dictionary_size {
            return bad(format!(
                "dictionary_size {} exceeds the {} first-frame superpixels",
                self.dictionary_size,
                (self.particles + 1) * self.superpixels
            ));
        }
        self.noise.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_str_flat(text: &str) -> Result<Self> {
        let flat: FlatConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let cfg = Self::from(flat);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_flat(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_string_flat(&self) -> String {
        toml::to_string(&FlatConfig::from(self)).expect("flat config serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_string_flat()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlatConfig {
    template_width: usize,
    template_height: usize,
    superpixels: usize,
    compactness: f64,
    bins: usize,
    dictionary_size: usize,
    lambda: f64,
    particles: usize,
    negatives: usize,
    update_rate: usize,
    gamma: f64,
    threshold: f64,
    sigma_x: f64,
    sigma_y: f64,
    sigma_theta: f64,
    sigma_scale: f64,
    sigma_aspect: f64,
    sigma_skew: f64,
    rank_1: usize,
    rank_2: usize,
    rank_3: usize,
    forgetting: f64,
    annulus_inner: f64,
    annulus_outer: f64,
    rng_seed: u64,
}

impl Default for FlatConfig {
    fn default() -> Self {
        Self::from(&TrackerConfig::default())
    }
}

impl From<&TrackerConfig> for FlatConfig {
    fn from(c: &TrackerConfig) -> Self {
        let s = c.noise.sigmas;
        Self {
            template_width: c.template.0,
            template_height: c.template.1,
            superpixels: c.superpixels,
            compactness: c.compactness,
            bins: c.n_bins,
            dictionary_size: c.dictionary_size,
            lambda: c.lambda,
            particles: c.particles,
            negatives: c.negatives,
            update_rate: c.update_rate,
            gamma: c.gamma,
            threshold: c.threshold,
            sigma_x: s[0],
            sigma_y: s[1],
            sigma_theta: s[2],
            sigma_scale: s[3],
            sigma_aspect: s[4],
            sigma_skew: s[5],
            rank_1: c.ranks.0,
            rank_2: c.ranks.1,
            rank_3: c.ranks.2,
            forgetting: c.forgetting,
            annulus_inner: c.annulus.0,
            annulus_outer: c.annulus.1,
            rng_seed: c.rng_seed,
        }
    }
}

impl From<FlatConfig> for TrackerConfig {
    fn from(f: FlatConfig) -> Self {
        Self {
            template: (f.template_width, f.template_height),
            superpixels: f.superpixels,
            compactness: f.compactness,
            n_bins: f.bins,
            dictionary_size: f.dictionary_size,
            lambda: f.lambda,
            particles: f.particles,
            negatives: f.negatives,
            update_rate: f.update_rate,
            gamma: f.gamma,
            threshold: f.threshold,
            noise: NoiseSpec {
                sigmas: [f.sigma_x, f.sigma_y, f.sigma_theta, f.sigma_scale, f.sigma_aspect, f.sigma_skew],
            },
            ranks: (f.rank_1, f.rank_2, f.rank_3),
            forgetting: f.forgetting,
            annulus: (f.annulus_inner, f.annulus_outer),
            rng_seed: f.rng_seed,
        }
    }
}
