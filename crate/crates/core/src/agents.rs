//! Per-agent state and the temporally discounted performance measure.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::influence::InfluenceMatrix;
use crate::landscape::{Landscape, Position};
use crate::sampling::{sample_agent_features, DistributionSpec, FeatureVector, FEATURE_COUNT};
use crate::streams::SimRng;

/// Half-width of the quantile band used for privilege placement.
pub const PLACEMENT_HALF_WIDTH: f64 = 0.005;

/// `sum_t y_t * lambda^(T - t) / sum_t lambda^t` over a full history.
pub fn discounted_reward(history: &[f64], lambda: f64) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::Usage("discounted reward of an empty history".into()));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Usage(format!("discount {lambda} outside (0, 1]")));
    }
    let last = history.len() - 1;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in history.iter().enumerate() {
        num += y * lambda.powi((last - t) as i32);
        den += lambda.powi(t as i32);
    }
    Ok(num / den)
}

/// Running numerator and denominator of the discounted reward.
#[derive(Clone, Copy, Debug, PartialEq)]
struct DiscountAccumulator {
    lambda: f64,
    num: f64,
    den: f64,
}

impl DiscountAccumulator {
    fn new(lambda: f64) -> Self {
        DiscountAccumulator {
            lambda,
            num: 0.0,
            den: 0.0,
        }
    }

    fn push(&mut self, y: f64) {
        self.num = self.num * self.lambda + y;
        self.den = self.den * self.lambda + 1.0;
    }

    fn value(&self) -> f64 {
        self.num / self.den
    }
}

#[derive(Clone, Debug)]
pub struct AgentState {
    pub id: usize,
    pub features: FeatureVector,
    pub position: Position,
    reward_history: Vec<f64>,
    discount: DiscountAccumulator,
    /// Learned credit per feature, aligned with `[gamma, eta, rho, nu]`.
    pub weights: [f64; FEATURE_COUNT],
}

impl AgentState {
    pub fn new(
        id: usize,
        features: FeatureVector,
        position: Position,
        initial_fitness: f64,
        lambda: f64,
    ) -> Self {
        let mut discount = DiscountAccumulator::new(lambda);
        discount.push(initial_fitness);
        AgentState {
            id,
            features,
            position,
            reward_history: vec![initial_fitness],
            discount,
            weights: [0.0; FEATURE_COUNT],
        }
    }

    pub fn reward_history(&self) -> &[f64] {
        &self.reward_history
    }

    /// Fitness at the current position.
    pub fn fitness(&self) -> f64 {
        *self
            .reward_history
            .last()
            .expect("history starts non-empty")
    }

    pub fn discounted_reward(&self) -> f64 {
        self.discount.value()
    }

    pub fn lambda(&self) -> f64 {
        self.discount.lambda
    }

    /// Moves the agent and appends the new fitness to its history.
    pub fn record_move(&mut self, position: Position, fitness: f64) {
        self.position = position;
        self.reward_history.push(fitness);
        self.discount.push(fitness);
    }
}

#[derive(Clone, Debug)]
pub struct Team {
    pub agents: Vec<AgentState>,
    pub influence: InfluenceMatrix,
    pub iteration: usize,
}

impl Team {
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn features(&self) -> Vec<FeatureVector> {
        self.agents.iter().map(|a| a.features).collect()
    }

    pub fn weights(&self) -> Vec<[f64; FEATURE_COUNT]> {
        self.agents.iter().map(|a| a.weights).collect()
    }

    /// Lowest discounted reward currently held by any team member.
    pub fn min_discounted_reward(&self) -> f64 {
        self.agents
            .iter()
            .map(AgentState::discounted_reward)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Starting cell for an agent with privilege `rho`: a random cell from the
/// `10 * rho` quantile band.
pub fn privileged_position(landscape: &Landscape, rho: f64, rng: &mut SimRng) -> Result<Position> {
    let q = (rho * 10.0).clamp(0.0, 1.0);
    landscape.sample_in_quantile_band(q, PLACEMENT_HALF_WIDTH, rng)
}

/// Samples `n` agents and places each inside the quantile band
/// `10 * rho +- 0.005` of the landscape. Weights start at zero and the
/// influence matrix starts uniform.
pub fn initialize_team(
    landscape: &Landscape,
    spec: &DistributionSpec,
    n: usize,
    lambda: f64,
    rng: &mut SimRng,
) -> Result<Team> {
    if n < 2 {
        return Err(Error::Config(format!(
            "a team needs at least 2 agents, got {n}"
        )));
    }
    let features: Vec<FeatureVector> = (0..n).map(|_| sample_agent_features(spec, rng)).collect();
    let mut agents = Vec::with_capacity(n);
    for (id, f) in features.into_iter().enumerate() {
        let position = privileged_position(landscape, f.rho, rng)?;
        let fitness = landscape.fitness(position);
        agents.push(AgentState::new(id, f, position, fitness, lambda));
    }
    Ok(Team {
        agents,
        influence: InfluenceMatrix::uniform(n),
        iteration: 0,
    })
}

/// Per-agent state written by the trace mode.
#[derive(Clone, Debug, Serialize)]
pub struct AgentSnapshot {
    pub agent: usize,
    pub position: [usize; 2],
    pub fitness: f64,
    pub discounted_reward: f64,
    pub features: [f64; FEATURE_COUNT],
    pub weights: [f64; FEATURE_COUNT],
}

impl From<&AgentState> for AgentSnapshot {
    fn from(a: &AgentState) -> Self {
        AgentSnapshot {
            agent: a.id,
            position: [a.position.col, a.position.row],
            fitness: a.fitness(),
            discounted_reward: a.discounted_reward(),
            features: a.features.to_array(),
            weights: a.weights,
        }
    }
}
