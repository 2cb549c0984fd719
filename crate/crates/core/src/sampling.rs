//! Feature vectors and the distributions agents and mentors are drawn from.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streams::SimRng;

pub const FEATURE_COUNT: usize = 4;

/// Column names in the fixed feature order used by every vector and matrix.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = ["gamma", "eta", "rho", "nu"];

/// `[gamma, eta, rho, nu]`: imitation propensity, random-jump propensity,
/// privilege and an irrelevant noise attribute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub gamma: f64,
    pub eta: f64,
    pub rho: f64,
    pub nu: f64,
}

impl FeatureVector {
    pub fn new(gamma: f64, eta: f64, rho: f64, nu: f64) -> Self {
        FeatureVector {
            gamma,
            eta,
            rho,
            nu,
        }
    }

    pub fn to_array(self) -> [f64; FEATURE_COUNT] {
        [self.gamma, self.eta, self.rho, self.nu]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        FeatureVector::new(a[0], a[1], a[2], a[3])
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.to_array().iter().all(|v| (lo..=hi).contains(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistributionSpec {
    pub uniform_lo: f64,
    pub uniform_hi: f64,
    pub bimodal_low_mean: f64,
    pub bimodal_high_mean: f64,
    pub bimodal_std: f64,
    /// Probability of drawing from the low mode.
    pub mode_prob: f64,
    pub truncation_lo: f64,
    pub truncation_hi: f64,
    pub mentor_rho_mean: f64,
    pub mentor_rho_std: f64,
    pub mentor_trait_mean: f64,
    pub mentor_trait_std: f64,
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec {
            uniform_lo: 0.0,
            uniform_hi: 0.1,
            bimodal_low_mean: 0.03,
            bimodal_high_mean: 0.07,
            bimodal_std: 0.01,
            mode_prob: 0.5,
            truncation_lo: 0.0,
            truncation_hi: 0.1,
            mentor_rho_mean: 0.03,
            mentor_rho_std: 0.01,
            mentor_trait_mean: 0.08,
            mentor_trait_std: 0.005,
        }
    }
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.truncation_lo, self.truncation_hi);
        if !(lo < hi) {
            return Err(Error::Config(format!(
                "distribution.truncation_lo ({lo}) must be below truncation_hi ({hi})"
            )));
        }
        if !(self.uniform_lo < self.uniform_hi) {
            return Err(Error::Config(
                "distribution.uniform_lo must be below uniform_hi".into(),
            ));
        }
        for (name, std) in [
            ("bimodal_std", self.bimodal_std),
            ("mentor_rho_std", self.mentor_rho_std),
            ("mentor_trait_std", self.mentor_trait_std),
        ] {
            if !(std > 0.0 && std.is_finite()) {
                return Err(Error::Config(format!(
                    "distribution.{name} must be positive, got {std}"
                )));
            }
        }
        // rejection sampling needs the bulk of each Gaussian inside the window
        for (name, mean) in [
            ("bimodal_low_mean", self.bimodal_low_mean),
            ("bimodal_high_mean", self.bimodal_high_mean),
            ("mentor_rho_mean", self.mentor_rho_mean),
            ("mentor_trait_mean", self.mentor_trait_mean),
        ] {
            if !(lo..=hi).contains(&mean) {
                return Err(Error::Config(format!(
                    "distribution.{name} = {mean} lies outside the truncation window [{lo}, {hi}]"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.mode_prob) {
            return Err(Error::Config(
                "distribution.mode_prob must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn truncated_normal(&self, mean: f64, std: f64, rng: &mut SimRng) -> f64 {
        let normal = Normal::new(mean, std).expect("validated std");
        loop {
            let x = normal.sample(rng);
            if (self.truncation_lo..=self.truncation_hi).contains(&x) {
                return x;
            }
        }
    }

    fn bimodal(&self, rng: &mut SimRng) -> f64 {
        let mean = if rng.random_bool(self.mode_prob) {
            self.bimodal_low_mean
        } else {
            self.bimodal_high_mean
        };
        self.truncated_normal(mean, self.bimodal_std, rng)
    }

    fn uniform(&self, rng: &mut SimRng) -> f64 {
        rng.random_range(self.uniform_lo..self.uniform_hi)
    }
}

/// Draws an agent: uniform gamma and eta, independent two-mode truncated
/// Gaussians for rho and nu.
pub fn sample_agent_features(spec: &DistributionSpec, rng: &mut SimRng) -> FeatureVector {
    let gamma = spec.uniform(rng);
    let eta = spec.uniform(rng);
    let rho = spec.bimodal(rng);
    let nu = spec.bimodal(rng);
    FeatureVector::new(gamma, eta, rho, nu)
}

/// Draws a mentor: low privilege, strong policy-relevant traits and an
/// ordinary noise attribute.
pub fn sample_mentor_features(spec: &DistributionSpec, rng: &mut SimRng) -> FeatureVector {
    let gamma = spec.truncated_normal(spec.mentor_trait_mean, spec.mentor_trait_std, rng);
    let eta = spec.truncated_normal(spec.mentor_trait_mean, spec.mentor_trait_std, rng);
    let rho = spec.truncated_normal(spec.mentor_rho_mean, spec.mentor_rho_std, rng);
    let nu = spec.bimodal(rng);
    FeatureVector::new(gamma, eta, rho, nu)
}
