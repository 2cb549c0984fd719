//! Mentorship intervention.
//!
//! After the onset iteration, each less privileged agent is paired with a
//! freshly drawn mentor with a fixed probability. A mentor never joins the
//! team: it only contributes one extra row (its features and a high reward)
//! to the mentee's regression batch for that iteration.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::Team;
use crate::error::{Error, Result};
use crate::landscape::Landscape;
use crate::sampling::{sample_mentor_features, DistributionSpec, FeatureVector};
use crate::streams::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MentorProfile {
    pub features: FeatureVector,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterventionConfig {
    pub enabled: bool,
    /// First iteration at which mentors are assigned.
    pub start_iteration: usize,
    /// Agents with privilege strictly below this are eligible mentees.
    pub mentee_rho_threshold: f64,
    pub assignment_prob: f64,
    /// Mentor rewards are drawn from cells above this quantile.
    pub reward_quantile: f64,
}

impl Default for InterventionConfig {
    fn default() -> Self {
        InterventionConfig {
            enabled: true,
            start_iteration: 75,
            mentee_rho_threshold: 0.05,
            assignment_prob: 0.2,
            reward_quantile: 0.9,
        }
    }
}

impl InterventionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.assignment_prob) {
            return Err(Error::Config(format!(
                "intervention.assignment_prob = {} outside [0, 1]",
                self.assignment_prob
            )));
        }
        if !(0.0..1.0).contains(&self.reward_quantile) {
            return Err(Error::Config(format!(
                "intervention.reward_quantile = {} outside [0, 1)",
                self.reward_quantile
            )));
        }
        Ok(())
    }

    pub fn active_at(&self, iteration: usize) -> bool {
        self.enabled && iteration >= self.start_iteration
    }
}

/// Mentors for the team's current iteration, keyed by mentee id.
pub fn assign_mentors(
    team: &Team,
    cfg: &InterventionConfig,
    landscape: &Landscape,
    spec: &DistributionSpec,
    rng: &mut SimRng,
) -> Result<BTreeMap<usize, MentorProfile>> {
    let mut mentors = BTreeMap::new();
    if !cfg.active_at(team.iteration) {
        return Ok(mentors);
    }
    for agent in &team.agents {
        if agent.features.rho >= cfg.mentee_rho_threshold {
            continue;
        }
        if !rng.random_bool(cfg.assignment_prob) {
            continue;
        }
        let features = sample_mentor_features(spec, rng);
        let reward = landscape.sample_above_quantile(cfg.reward_quantile, rng)?;
        mentors.insert(agent.id, MentorProfile { features, reward });
    }
    Ok(mentors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentState;
    use crate::influence::InfluenceMatrix;
    use crate::landscape::{LandscapeKind, Position};
    use crate::streams::substream;

    fn team(rhos: &[f64], iteration: usize) -> Team {
        Team {
            agents: rhos
                .iter()
                .enumerate()
                .map(|(id, &rho)| {
                    AgentState::new(
                        id,
                        FeatureVector::new(0.05, 0.05, rho, 0.05),
                        Position::new(0, 0),
                        0.5,
                        0.9,
                    )
                })
                .collect(),
            influence: InfluenceMatrix::uniform(rhos.len()),
            iteration,
        }
    }

    fn landscape() -> Landscape {
        Landscape::build(LandscapeKind::PeakMixture, 100, 100, 1).unwrap()
    }

    #[test]
    fn nothing_before_onset_or_when_disabled() {
        let l = landscape();
        let spec = DistributionSpec::default();
        let cfg = InterventionConfig {
            assignment_prob: 1.0,
            ..InterventionConfig::default()
        };
        let mut rng = substream(1, &[]);
        assert!(
            assign_mentors(&team(&[0.01, 0.02], 74), &cfg, &l, &spec, &mut rng)
                .unwrap()
                .is_empty()
        );
        assert_eq!(
            assign_mentors(&team(&[0.01, 0.02], 75), &cfg, &l, &spec, &mut rng)
                .unwrap()
                .len(),
            2
        );
        let off = InterventionConfig {
            enabled: false,
            ..cfg
        };
        assert!(
            assign_mentors(&team(&[0.01, 0.02], 100), &off, &l, &spec, &mut rng)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn privileged_agents_never_mentored() {
        let l = landscape();
        let spec = DistributionSpec::default();
        let cfg = InterventionConfig {
            assignment_prob: 1.0,
            ..InterventionConfig::default()
        };
        let mut rng = substream(2, &[]);
        for _ in 0..1000 {
            let m =
                assign_mentors(&team(&[0.07, 0.05, 0.03], 80), &cfg, &l, &spec, &mut rng).unwrap();
            assert_eq!(m.keys().copied().collect::<Vec<_>>(), vec![2]);
        }
    }

    #[test]
    fn assignment_frequency() {
        let l = landscape();
        let spec = DistributionSpec::default();
        let cfg = InterventionConfig::default();
        let mut rng = substream(3, &[]);
        let t = team(&[0.03], 100);
        let trials = 10_000;
        let hits = (0..trials)
            .filter(|_| {
                !assign_mentors(&t, &cfg, &l, &spec, &mut rng)
                    .unwrap()
                    .is_empty()
            })
            .count() as f64
            / trials as f64;
        assert!((hits - 0.2).abs() < 0.01, "assignment rate {hits}");
    }

    #[test]
    fn mentors_are_high_performers() {
        let l = landscape();
        let spec = DistributionSpec::default();
        let cfg = InterventionConfig {
            assignment_prob: 1.0,
            ..InterventionConfig::default()
        };
        let mut sorted = l.values().to_vec();
        sorted.sort_by(f64::total_cmp);
        let q90 = sorted[((sorted.len() - 1) as f64 * 0.9).floor() as usize];
        let mut rng = substream(4, &[]);
        for _ in 0..2000 {
            for m in assign_mentors(&team(&[0.01, 0.04], 90), &cfg, &l, &spec, &mut rng)
                .unwrap()
                .values()
            {
                assert!(m.reward > q90);
                assert!(m.features.within(0.0, 0.1));
            }
        }
    }

    #[test]
    fn validation() {
        let cfg = InterventionConfig::default();
        assert!(cfg.validate().is_ok());
        let bad = InterventionConfig {
            assignment_prob: 1.2,
            ..InterventionConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = InterventionConfig {
            reward_quantile: 1.0,
            ..InterventionConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
