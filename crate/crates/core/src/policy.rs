//! Per-agent action selection: social imitation, random jumps and
//! stochastic hill climbing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::AgentState;
use crate::influence::InfluenceMatrix;
use crate::landscape::{Landscape, Neighborhood, Position};
use crate::streams::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Imitate,
    RandomJump,
    JumpRejected,
    HillClimb,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] = [
        ActionKind::Imitate,
        ActionKind::RandomJump,
        ActionKind::JumpRejected,
        ActionKind::HillClimb,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionOutcome {
    pub kind: ActionKind,
    pub new_position: Position,
    pub new_fitness: f64,
    pub imitated_id: Option<usize>,
}

/// Search-policy switches exposed in the run configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyOptions {
    /// Whether hill climbing may stay on the current cell.
    pub shc_include_self: bool,
    pub neighborhood: Neighborhood,
}

impl Default for PolicyOptions {
    fn default() -> Self {
        PolicyOptions {
            shc_include_self: true,
            neighborhood: Neighborhood::Moore,
        }
    }
}

/// Previous-iteration state every agent acts against.
#[derive(Clone, Debug)]
pub struct TeamSnapshot {
    pub positions: Vec<Position>,
    pub influence: InfluenceMatrix,
}

/// Temperature softmax, stabilized by subtracting the largest logit.
pub fn softmax(logits: &[f64], tau: f64) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|&l| ((l - max) / tau).exp()).collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    p
}

/// Inverse-CDF draw from a discrete distribution.
pub fn sample_index(probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final partial sum
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Imitation distribution of `observer` over the other agents.
///
/// Logits are the row entries divided by the full row sum (diagonal
/// included); the observer itself is not a candidate.
pub fn imitation_probabilities(
    observer: usize,
    a: &InfluenceMatrix,
    tau: f64,
) -> Vec<(usize, f64)> {
    let row = a.row(observer);
    let total: f64 = row.iter().sum();
    let others: Vec<usize> = (0..row.len()).filter(|&j| j != observer).collect();
    let logits: Vec<f64> = others.iter().map(|&j| row[j] / total).collect();
    others.into_iter().zip(softmax(&logits, tau)).collect()
}

pub fn imitation_target(observer: usize, a: &InfluenceMatrix, tau: f64, rng: &mut SimRng) -> usize {
    let dist = imitation_probabilities(observer, a, tau);
    let probs: Vec<f64> = dist.iter().map(|&(_, p)| p).collect();
    dist[sample_index(&probs, rng)].0
}

/// Unconditional copy of the target's previous position.
pub fn apply_imitation(
    target_id: usize,
    target_position: Position,
    landscape: &Landscape,
) -> ActionOutcome {
    ActionOutcome {
        kind: ActionKind::Imitate,
        new_position: target_position,
        new_fitness: landscape.fitness(target_position),
        imitated_id: Some(target_id),
    }
}

/// Evaluates one uniformly random cell and moves there only if it is
/// strictly better.
pub fn random_jump(position: Position, landscape: &Landscape, rng: &mut SimRng) -> ActionOutcome {
    let current = landscape.fitness(position);
    let candidate = landscape.random_position(rng);
    let value = landscape.fitness(candidate);
    if value > current {
        ActionOutcome {
            kind: ActionKind::RandomJump,
            new_position: candidate,
            new_fitness: value,
            imitated_id: None,
        }
    } else {
        ActionOutcome {
            kind: ActionKind::JumpRejected,
            new_position: position,
            new_fitness: current,
            imitated_id: None,
        }
    }
}

/// Softmax over the fitness of the neighboring cells (and the current cell
/// when `shc_include_self`).
pub fn hill_climb_step(
    position: Position,
    landscape: &Landscape,
    tau: f64,
    options: &PolicyOptions,
    rng: &mut SimRng,
) -> ActionOutcome {
    let mut candidates = arrayvec::ArrayVec::<Position, 9>::new();
    if options.shc_include_self {
        candidates.push(position);
    }
    candidates.extend(landscape.neighbors(position, options.neighborhood));
    let logits: Vec<f64> = candidates.iter().map(|&p| landscape.fitness(p)).collect();
    let probs = softmax(&logits, tau);
    let chosen = candidates[sample_index(&probs, rng)];
    ActionOutcome {
        kind: ActionKind::HillClimb,
        new_position: chosen,
        new_fitness: landscape.fitness(chosen),
        imitated_id: None,
    }
}

/// Imitate with probability gamma; otherwise attempt a random jump with
/// probability eta; otherwise take a hill-climbing step.
pub fn choose_action(
    agent: &AgentState,
    snapshot: &TeamSnapshot,
    landscape: &Landscape,
    tau: f64,
    options: &PolicyOptions,
    rng: &mut SimRng,
) -> ActionOutcome {
    let position = snapshot.positions[agent.id];
    if rng.random_bool(agent.features.gamma.clamp(0.0, 1.0)) {
        let target = imitation_target(agent.id, &snapshot.influence, tau, rng);
        return apply_imitation(target, snapshot.positions[target], landscape);
    }
    if rng.random_bool(agent.features.eta.clamp(0.0, 1.0)) {
        return random_jump(position, landscape, rng);
    }
    hill_climb_step(position, landscape, tau, options, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::LandscapeKind;
    use crate::sampling::FeatureVector;
    use crate::streams::substream;
    use std::collections::HashMap;

    fn agent(gamma: f64, eta: f64, position: Position, landscape: &Landscape) -> AgentState {
        AgentState::new(
            0,
            FeatureVector::new(gamma, eta, 0.05, 0.05),
            position,
            landscape.fitness(position),
            0.9,
        )
    }

    fn snapshot(positions: Vec<Position>) -> TeamSnapshot {
        let n = positions.len();
        TeamSnapshot {
            positions,
            influence: InfluenceMatrix::uniform(n),
        }
    }

    fn counts(outcomes: impl Iterator<Item = ActionOutcome>) -> HashMap<ActionKind, usize> {
        let mut map = HashMap::new();
        for o in outcomes {
            *map.entry(o.kind).or_default() += 1;
        }
        map
    }

    #[test]
    fn softmax_is_a_distribution_at_extreme_logits() {
        for logits in [
            vec![0.0, 1.0, 0.5],
            vec![1.0, 1.0 - 1e-9, 0.0],
            vec![100.0 * 0.01, -100.0 * 0.01, 0.0],
        ] {
            let p = softmax(&logits, 0.01);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_imitation_without_gamma() {
        let l = Landscape::build(LandscapeKind::DropWave, 100, 100, 0).unwrap();
        let p = Position::new(20, 20);
        let a = agent(0.0, 0.05, p, &l);
        let snap = snapshot(vec![p, Position::new(50, 50), Position::new(1, 1)]);
        let mut rng = substream(1, &[]);
        let c = counts(
            (0..100_000)
                .map(|_| choose_action(&a, &snap, &l, 0.01, &PolicyOptions::default(), &mut rng)),
        );
        assert_eq!(c.get(&ActionKind::Imitate), None);
    }

    #[test]
    fn branch_frequencies() {
        let l = Landscape::build(LandscapeKind::DropWave, 100, 100, 0).unwrap();
        let p = Position::new(20, 20);
        let snap = snapshot(vec![p, Position::new(50, 50), Position::new(1, 1)]);
        let opts = PolicyOptions::default();
        let trials = 100_000;

        let mut rng = substream(2, &[]);
        let a = agent(0.1, 0.0, p, &l);
        let c = counts((0..trials).map(|_| choose_action(&a, &snap, &l, 0.01, &opts, &mut rng)));
        let imitate = *c.get(&ActionKind::Imitate).unwrap_or(&0) as f64 / trials as f64;
        assert!((imitate - 0.1).abs() < 0.005, "imitation rate {imitate}");
        assert_eq!(
            c.get(&ActionKind::Imitate).unwrap() + c.get(&ActionKind::HillClimb).unwrap(),
            trials
        );

        let mut rng = substream(3, &[]);
        let a = agent(0.0, 0.1, p, &l);
        let c = counts((0..trials).map(|_| choose_action(&a, &snap, &l, 0.01, &opts, &mut rng)));
        let jumps = c.get(&ActionKind::RandomJump).unwrap_or(&0)
            + c.get(&ActionKind::JumpRejected).unwrap_or(&0);
        let rate = jumps as f64 / trials as f64;
        assert!((rate - 0.1).abs() < 0.005, "jump rate {rate}");
    }

    #[test]
    fn uniform_row_gives_uniform_imitation() {
        let a = InfluenceMatrix::uniform(5);
        let mut rng = substream(4, &[]);
        let draws = 100_000;
        let mut hist = [0usize; 5];
        for _ in 0..draws {
            hist[imitation_target(2, &a, 0.01, &mut rng)] += 1;
        }
        assert_eq!(hist[2], 0);
        let expected = draws as f64 / 4.0;
        let chi2: f64 = [0, 1, 3, 4]
            .iter()
            .map(|&j| (hist[j] as f64 - expected).powi(2) / expected)
            .sum();
        // 3 degrees of freedom, 99.9th percentile
        assert!(chi2 < 16.27, "chi2 {chi2}");
    }

    #[test]
    fn imitation_closed_form() {
        // normalized influences on the two peers differ by 0.2 -> logit gap 20
        let a = InfluenceMatrix::from_rows(vec![
            vec![0.0 + 1e-6, 0.6, 0.4],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        let p = imitation_probabilities(0, &a, 0.01);
        let total: f64 = 1e-6 + 0.6 + 0.4;
        let gap = (0.6 - 0.4) / total / 0.01;
        let expected = 1.0 / (1.0 + (-gap).exp());
        assert_eq!(p[0].0, 1);
        assert!((p[0].1 - expected).abs() < 1e-12);
        assert!(p[0].1 > 1.0 - 3e-9);
    }

    #[test]
    fn imitation_is_scale_invariant_and_monotone() {
        let rows = vec![vec![0.2, 0.5, 0.3], vec![1.0; 3], vec![1.0; 3]];
        let a = InfluenceMatrix::from_rows(rows.clone()).unwrap();
        let scaled = InfluenceMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|v| v * 7.5).collect())
                .collect(),
        )
        .unwrap();
        let p = imitation_probabilities(0, &a, 0.01);
        let q = imitation_probabilities(0, &scaled, 0.01);
        for (x, y) in p.iter().zip(&q) {
            assert!((x.1 - y.1).abs() < 1e-12);
        }
        // a[0][1] > a[0][2]
        assert!(p[0].1 > p[1].1);
    }

    #[test]
    fn imitation_copies_unconditionally() {
        let l = Landscape::build(LandscapeKind::Ackley, 100, 100, 0).unwrap();
        let best = l.argmax();
        let out = apply_imitation(3, best, &l);
        assert_eq!(out.new_fitness, 1.0);
        assert_eq!(out.imitated_id, Some(3));
        let worst = l.argmin();
        let out = apply_imitation(1, worst, &l);
        assert_eq!(out.new_position, worst);
        assert_eq!(out.new_fitness, 0.0);
    }

    #[test]
    fn jump_from_optimum_is_always_rejected() {
        let l = Landscape::build(LandscapeKind::Ackley, 100, 100, 0).unwrap();
        let mut rng = substream(5, &[]);
        for _ in 0..1000 {
            let out = random_jump(l.argmax(), &l, &mut rng);
            assert_eq!(out.kind, ActionKind::JumpRejected);
            assert_eq!(out.new_position, l.argmax());
        }
    }

    #[test]
    fn jump_acceptance_matches_grid_count() {
        let l = Landscape::build(LandscapeKind::PeakMixture, 200, 200, 3).unwrap();
        let mut rng = substream(6, &[]);
        let from_min = (0..10_000)
            .filter(|_| random_jump(l.argmin(), &l, &mut rng).kind == ActionKind::RandomJump)
            .count() as f64
            / 10_000.0;
        assert!(from_min > 0.99);

        let median_cell = l.quantile_index().nth(l.len() / 2).unwrap();
        let v = l.fitness(median_cell);
        let better = l.values().iter().filter(|&&x| x > v).count() as f64 / l.len() as f64;
        let trials = 100_000;
        let accepted = (0..trials)
            .filter(|_| random_jump(median_cell, &l, &mut rng).kind == ActionKind::RandomJump)
            .count() as f64
            / trials as f64;
        assert!((accepted - better).abs() < 0.005, "{accepted} vs {better}");
    }

    #[test]
    fn flat_neighborhood_is_uniform() {
        let l = Landscape::from_values(5, 5, vec![0.5; 25]).unwrap();
        let mut rng = substream(7, &[]);
        let p = Position::new(2, 2);
        let mut hist: HashMap<Position, usize> = HashMap::new();
        let draws = 90_000;
        for _ in 0..draws {
            let out = hill_climb_step(p, &l, 0.01, &PolicyOptions::default(), &mut rng);
            *hist.entry(out.new_position).or_default() += 1;
        }
        assert_eq!(hist.len(), 9);
        let expected = draws as f64 / 9.0;
        let chi2: f64 = hist
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 8 degrees of freedom, 99.9th percentile
        assert!(chi2 < 26.12, "chi2 {chi2}");
    }

    #[test]
    fn dominant_neighbor_wins() {
        let mut values = vec![0.5; 25];
        values[2 * 5 + 3] = 0.6; // (3, 2)
        let l = Landscape::from_values(5, 5, values).unwrap();
        let p = Position::new(2, 2);
        let mut candidates = vec![p];
        candidates.extend(l.neighbors(p, Neighborhood::Moore));
        let logits: Vec<f64> = candidates.iter().map(|&c| l.fitness(c)).collect();
        let probs = softmax(&logits, 0.01);
        let idx = candidates
            .iter()
            .position(|&c| c == Position::new(3, 2))
            .unwrap();
        assert!(probs[idx] >= 1.0 - 8.0 * (-10.0f64).exp());
    }

    #[test]
    fn local_maximum_stays_often() {
        // center beats every neighbor by 0.001
        let mut values = vec![0.5; 25];
        values[12] = 0.501;
        let l = Landscape::from_values(5, 5, values).unwrap();
        let mut rng = substream(8, &[]);
        let p = Position::new(2, 2);
        let trials = 100_000;
        let stays = (0..trials)
            .filter(|_| {
                hill_climb_step(p, &l, 0.01, &PolicyOptions::default(), &mut rng).new_position == p
            })
            .count() as f64
            / trials as f64;
        let bound = 0.1f64.exp() / (0.1f64.exp() + 8.0);
        assert!(stays >= bound - 0.005, "stay rate {stays} vs {bound}");

        let no_self = PolicyOptions {
            shc_include_self: false,
            ..PolicyOptions::default()
        };
        let out = hill_climb_step(p, &l, 0.01, &no_self, &mut rng);
        assert_ne!(out.new_position, p);
    }

    #[test]
    fn positions_stay_in_bounds() {
        let l = Landscape::build(LandscapeKind::Ackley, 20, 20, 0).unwrap();
        let mut rng = substream(9, &[]);
        let mut p = Position::new(0, 0);
        for _ in 0..5000 {
            p = hill_climb_step(p, &l, 0.01, &PolicyOptions::default(), &mut rng).new_position;
            assert!(l.contains(p));
            p = random_jump(p, &l, &mut rng).new_position;
            assert!(l.contains(p));
        }
    }
}
