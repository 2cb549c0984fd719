//! Social-influence learning.
//!
//! Each agent predicts the performance of its peers as a linear function of
//! their features, offset by the team's lowest discounted reward, and takes
//! one gradient step on the mean squared prediction error per iteration. The
//! learned weights then reshape the influence matrix via `A += beta * W F^T`.

use crate::agents::Team;
use crate::error::{Error, Result};
use crate::intervention::MentorProfile;
use crate::sampling::{FeatureVector, FEATURE_COUNT};

/// Smallest allowed influence entry.
pub const INFLUENCE_FLOOR: f64 = 1e-6;

pub type Weights = [f64; FEATURE_COUNT];

/// Row-major `n x n` matrix; entry `(i, j)` is the influence of agent `j`
/// on agent `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceMatrix {
    n: usize,
    a: Vec<f64>,
}

impl InfluenceMatrix {
    /// Every entry `1 / n`.
    pub fn uniform(n: usize) -> Self {
        InfluenceMatrix {
            n,
            a: vec![1.0 / n as f64; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Usage("influence matrix must be square".into()));
        }
        let a: Vec<f64> = rows.into_iter().flatten().collect();
        if a.iter().any(|v| !v.is_finite() || *v < INFLUENCE_FLOOR) {
            return Err(Error::Usage(format!(
                "influence entries must be finite and >= {INFLUENCE_FLOOR}"
            )));
        }
        Ok(InfluenceMatrix { n, a })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.a.chunks_exact(self.n)
    }

    pub fn min_entry(&self) -> f64 {
        self.a.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(w: &Weights, f: &FeatureVector) -> f64 {
    w.iter().zip(f.to_array()).map(|(a, b)| a * b).sum()
}

/// Predicted performance `w . f + offset`.
#[inline]
pub fn predict(w: &Weights, f: &FeatureVector, offset: f64) -> f64 {
    dot(w, f) + offset
}

/// Regression examples seen by one observer in one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingBatch {
    rows: Vec<FeatureVector>,
    targets: Vec<f64>,
    offset: f64,
}

impl TrainingBatch {
    pub fn new(rows: Vec<FeatureVector>, targets: Vec<f64>, offset: f64) -> Result<Self> {
        if rows.is_empty() || rows.len() != targets.len() {
            return Err(Error::Usage(format!(
                "training batch needs matching, non-empty rows and targets ({} vs {})",
                rows.len(),
                targets.len()
            )));
        }
        Ok(TrainingBatch {
            rows,
            targets,
            offset,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Mean squared prediction error.
    pub fn mse(&self, w: &Weights) -> f64 {
        let sum: f64 = self
            .rows
            .iter()
            .zip(&self.targets)
            .map(|(f, r)| {
                let e = predict(w, f, self.offset) - r;
                e * e
            })
            .sum();
        sum / self.len() as f64
    }

    /// `(2 / m) * sum_k (prediction_k - target_k) * f_k`.
    pub fn gradient(&self, w: &Weights) -> Weights {
        let mut g = [0.0; FEATURE_COUNT];
        for (f, r) in self.rows.iter().zip(&self.targets) {
            let e = predict(w, f, self.offset) - r;
            for (gk, fk) in g.iter_mut().zip(f.to_array()) {
                *gk += e * fk;
            }
        }
        let scale = 2.0 / self.len() as f64;
        g.map(|v| v * scale)
    }
}

/// One gradient-descent step on the batch MSE.
pub fn sgd_step(w: &Weights, batch: &TrainingBatch, alpha: f64) -> Weights {
    let g = batch.gradient(w);
    let mut out = *w;
    for (o, gk) in out.iter_mut().zip(g) {
        *o -= alpha * gk;
    }
    out
}

/// `a[i][j] = max(floor, a[i][j] + beta * w_i . f_j)` for every pair,
/// diagonal included.
pub fn update_influence(
    a: &InfluenceMatrix,
    weights: &[Weights],
    features: &[FeatureVector],
    beta: f64,
) -> Result<InfluenceMatrix> {
    let n = a.size();
    if weights.len() != n || features.len() != n {
        return Err(Error::Usage(format!(
            "influence update shape mismatch: A is {n}x{n}, W has {} rows, F has {}",
            weights.len(),
            features.len()
        )));
    }
    let mut next = a.clone();
    for (i, w) in weights.iter().enumerate() {
        for (j, f) in features.iter().enumerate() {
            let v = a.get(i, j) + beta * dot(w, f);
            next.a[i * n + j] = v.max(INFLUENCE_FLOOR);
        }
    }
    Ok(next)
}

/// Batch for `observer`: every other team member with its discounted reward,
/// plus the mentor if one is assigned. The offset is the lowest discounted
/// reward in the whole team, observer included.
pub fn build_training_batch(
    team: &Team,
    observer: usize,
    mentor: Option<&MentorProfile>,
) -> Result<TrainingBatch> {
    if observer >= team.len() {
        return Err(Error::Usage(format!(
            "observer {observer} not in a team of {}",
            team.len()
        )));
    }
    let capacity = team.len() - 1 + usize::from(mentor.is_some());
    let mut rows = Vec::with_capacity(capacity);
    let mut targets = Vec::with_capacity(capacity);
    for agent in team.agents.iter().filter(|a| a.id != observer) {
        rows.push(agent.features);
        targets.push(agent.discounted_reward());
    }
    if let Some(m) = mentor {
        rows.push(m.features);
        targets.push(m.reward);
    }
    TrainingBatch::new(rows, targets, team.min_discounted_reward())
}
