//! Iteration orchestration, single replications and the Monte-Carlo batch.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{initialize_team, AgentSnapshot, Team};
use crate::error::{Error, Result};
use crate::influence::{build_training_batch, sgd_step, update_influence, Weights};
use crate::intervention::{assign_mentors, InterventionConfig, MentorProfile};
use crate::landscape::{Landscape, LandscapeKind};
use crate::policy::{choose_action, ActionKind, ActionOutcome, PolicyOptions, TeamSnapshot};
use crate::sampling::{DistributionSpec, FeatureVector, FEATURE_COUNT};
use crate::streams::{derive_seed, substream, tag};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    #[default]
    Aggregate,
    PerAgentTrace,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Seeded landscapes are regenerated for every replication.
    #[default]
    PerReplication,
    /// Every replication uses `landscape.seed`.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    pub kind: LandscapeKind,
    pub width: usize,
    pub height: usize,
    pub seed_policy: SeedPolicy,
    pub seed: u64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig {
            kind: LandscapeKind::Ackley,
            width: 1000,
            height: 1000,
            seed_policy: SeedPolicy::PerReplication,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_agents: usize,
    pub n_iterations: usize,
    pub n_replications: usize,
    pub master_seed: u64,
    /// Temporal discount of the performance measure.
    pub lambda: f64,
    /// Learning rate of the weight update.
    pub alpha: f64,
    /// Update rate of the influence matrix.
    pub beta: f64,
    /// Softmax temperature for imitation and hill climbing.
    pub tau: f64,
    pub record_mode: RecordMode,
    pub landscape: LandscapeConfig,
    pub policy: PolicyOptions,
    pub distribution: DistributionSpec,
    pub intervention: InterventionConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_agents: 7,
            n_iterations: 150,
            n_replications: 1000,
            master_seed: 0,
            lambda: 0.9,
            alpha: 0.1,
            beta: 0.5,
            tau: 0.01,
            record_mode: RecordMode::Aggregate,
            landscape: LandscapeConfig::default(),
            policy: PolicyOptions::default(),
            distribution: DistributionSpec::default(),
            intervention: InterventionConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::Config(format!(
                "n_agents must be at least 2, got {}",
                self.n_agents
            )));
        }
        if self.n_replications == 0 {
            return Err(Error::Config("n_replications must be positive".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!(
                "lambda = {} outside (0, 1]",
                self.lambda
            )));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} = {v} must be a nonnegative number"
                )));
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!(
                "tau = {} must be positive",
                self.tau
            )));
        }
        if self.landscape.width < 3 || self.landscape.height < 3 {
            return Err(Error::Config(format!(
                "landscape must be at least 3x3, got {}x{}",
                self.landscape.width, self.landscape.height
            )));
        }
        self.distribution.validate()?;
        self.intervention.validate()
    }

    /// Generation seed of the landscape used by replication `index`.
    pub fn landscape_seed(&self, index: usize) -> u64 {
        match self.landscape.seed_policy {
            SeedPolicy::Fixed => self.landscape.seed,
            SeedPolicy::PerReplication => {
                derive_seed(self.master_seed, &[tag::LANDSCAPE, index as u64])
            }
        }
    }

    pub fn build_landscape(&self, index: usize) -> Result<Landscape> {
        Landscape::build(
            self.landscape.kind,
            self.landscape.width,
            self.landscape.height,
            self.landscape_seed(index),
        )
    }

    /// True when every replication sees the same landscape.
    pub fn landscape_is_shared(&self) -> bool {
        !self.landscape.kind.is_seeded() || self.landscape.seed_policy == SeedPolicy::Fixed
    }

    fn replication_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, &[tag::REPLICATION, index as u64])
    }
}

/// `w / sum |w_k|`, or zero when the weights are (numerically) all zero.
pub fn normalized_weights(w: &Weights) -> Weights {
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    if l1 > 1e-12 {
        w.map(|v| v / l1)
    } else {
        [0.0; FEATURE_COUNT]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCounts {
    pub imitate: u64,
    pub random_jump: u64,
    pub jump_rejected: u64,
    pub hill_climb: u64,
}

impl BranchCounts {
    pub fn record(&mut self, kind: ActionKind) {
        match kind {
            ActionKind::Imitate => self.imitate += 1,
            ActionKind::RandomJump => self.random_jump += 1,
            ActionKind::JumpRejected => self.jump_rejected += 1,
            ActionKind::HillClimb => self.hill_climb += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.imitate + self.random_jump + self.jump_rejected + self.hill_climb
    }

    pub fn merge(&mut self, other: &BranchCounts) {
        self.imitate += other.imitate;
        self.random_jump += other.random_jump;
        self.jump_rejected += other.jump_rejected;
        self.hill_climb += other.hill_climb;
    }
}

/// What happened during one call to [`step`].
#[derive(Clone, Debug)]
pub struct StepReport {
    pub outcomes: Vec<ActionOutcome>,
    pub mentors: BTreeMap<usize, MentorProfile>,
}

/// Advances the team by one iteration.
///
/// Phases: every agent acts against the frozen previous positions and
/// influence; moves commit and rewards are appended; mentors are assigned;
/// every agent takes one gradient step on its batch; the influence matrix is
/// updated with the new weights.
pub fn step(
    team: &mut Team,
    landscape: &Landscape,
    cfg: &SimConfig,
    replication_seed: u64,
) -> Result<StepReport> {
    let t = team.iteration as u64 + 1;
    let snapshot = TeamSnapshot {
        positions: team.agents.iter().map(|a| a.position).collect(),
        influence: team.influence.clone(),
    };

    let outcomes: Vec<ActionOutcome> = team
        .agents
        .iter()
        .map(|agent| {
            let mut rng = substream(replication_seed, &[tag::ACTION, t, agent.id as u64]);
            choose_action(agent, &snapshot, landscape, cfg.tau, &cfg.policy, &mut rng)
        })
        .collect();

    for (agent, outcome) in team.agents.iter_mut().zip(&outcomes) {
        agent.record_move(outcome.new_position, outcome.new_fitness);
    }
    team.iteration += 1;

    let mut mentor_rng = substream(replication_seed, &[tag::MENTOR, t]);
    let mentors = assign_mentors(
        team,
        &cfg.intervention,
        landscape,
        &cfg.distribution,
        &mut mentor_rng,
    )?;

    let new_weights = (0..team.len())
        .map(|i| {
            let batch = build_training_batch(team, i, mentors.get(&i))?;
            Ok(sgd_step(&team.agents[i].weights, &batch, cfg.alpha))
        })
        .collect::<Result<Vec<Weights>>>()?;
    for (agent, w) in team.agents.iter_mut().zip(&new_weights) {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFault(format!(
                "agent {} weights became {:?} at iteration {}",
                agent.id, w, team.iteration
            )));
        }
        agent.weights = *w;
    }

    team.influence = update_influence(&team.influence, &new_weights, &team.features(), cfg.beta)?;
    if !team.influence.is_finite() {
        return Err(Error::NumericalFault(format!(
            "influence matrix became non-finite at iteration {}",
            team.iteration
        )));
    }

    Ok(StepReport { outcomes, mentors })
}

/// Per-agent state at one iteration of one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationState {
    pub iteration: usize,
    pub normalized_weights: Vec<Weights>,
    pub fitness: Vec<f64>,
}

impl IterationState {
    fn capture(team: &Team) -> Self {
        IterationState {
            iteration: team.iteration,
            normalized_weights: team
                .agents
                .iter()
                .map(|a| normalized_weights(&a.weights))
                .collect(),
            fitness: team.agents.iter().map(|a| a.fitness()).collect(),
        }
    }

    pub fn best_fitness(&self) -> f64 {
        self.fitness
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_fitness(&self) -> f64 {
        self.fitness.iter().sum::<f64>() / self.fitness.len() as f64
    }
}

/// One NDJSON line of the per-agent trace.
#[derive(Clone, Debug, Serialize)]
pub struct TraceLine {
    pub replication: usize,
    pub iteration: usize,
    #[serde(flatten)]
    pub agent: AgentSnapshot,
    pub normalized_weights: Weights,
    /// `None` at iteration 0, before any action.
    pub action: Option<ActionKind>,
    pub imitated: Option<usize>,
    pub mentor: bool,
    pub mentor_reward: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ReplicationOutput {
    pub index: usize,
    pub landscape_seed: u64,
    /// Iterations `0..=n_iterations`.
    pub states: Vec<IterationState>,
    /// Features and starting fitness of every agent.
    pub initial: Vec<(FeatureVector, f64)>,
    pub branches: BranchCounts,
    pub mentor_assignments: u64,
    pub trace: Option<Vec<TraceLine>>,
}

/// Runs replication `index`, building its landscape.
pub fn run_replication(cfg: &SimConfig, index: usize) -> Result<ReplicationOutput> {
    let landscape = cfg.build_landscape(index)?;
    run_replication_on(cfg, &landscape, index)
}

/// Runs replication `index` on an already built landscape.
pub fn run_replication_on(
    cfg: &SimConfig,
    landscape: &Landscape,
    index: usize,
) -> Result<ReplicationOutput> {
    let seed = cfg.replication_seed(index);
    let mut init_rng = substream(seed, &[tag::INIT]);
    let mut team = initialize_team(
        landscape,
        &cfg.distribution,
        cfg.n_agents,
        cfg.lambda,
        &mut init_rng,
    )?;
    let tracing = cfg.record_mode == RecordMode::PerAgentTrace;
    let mut trace = tracing.then(Vec::new);
    let mut states = Vec::with_capacity(cfg.n_iterations + 1);
    let mut branches = BranchCounts::default();
    let mut mentor_assignments = 0;

    let initial = team
        .agents
        .iter()
        .map(|a| (a.features, a.fitness()))
        .collect();
    states.push(IterationState::capture(&team));
    if let Some(lines) = trace.as_mut() {
        push_trace(lines, index, &team, None);
    }

    for _ in 0..cfg.n_iterations {
        let report = step(&mut team, landscape, cfg, seed)?;
        for o in &report.outcomes {
            branches.record(o.kind);
        }
        mentor_assignments += report.mentors.len() as u64;
        states.push(IterationState::capture(&team));
        if let Some(lines) = trace.as_mut() {
            push_trace(lines, index, &team, Some(&report));
        }
    }

    Ok(ReplicationOutput {
        index,
        landscape_seed: landscape.generation_seed(),
        states,
        initial,
        branches,
        mentor_assignments,
        trace,
    })
}

fn push_trace(
    lines: &mut Vec<TraceLine>,
    replication: usize,
    team: &Team,
    report: Option<&StepReport>,
) {
    for agent in &team.agents {
        let outcome = report.map(|r| r.outcomes[agent.id]);
        let mentor = report.and_then(|r| r.mentors.get(&agent.id));
        lines.push(TraceLine {
            replication,
            iteration: team.iteration,
            agent: AgentSnapshot::from(agent),
            normalized_weights: normalized_weights(&agent.weights),
            action: outcome.map(|o| o.kind),
            imitated: outcome.and_then(|o| o.imitated_id),
            mentor: mentor.is_some(),
            mentor_reward: mentor.map(|m| m.reward),
        });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub iteration: usize,
    pub mean_normalized_weights: Weights,
    pub stderr_normalized_weights: Weights,
    pub mean_best_fitness: f64,
    pub mean_mean_fitness: f64,
}

/// Pools every agent of every replication per iteration: mean and standard
/// error of the normalized weights, plus the replication-averaged best and
/// mean fitness. Reduction order is the order of `outputs`.
pub fn aggregate(outputs: &[ReplicationOutput]) -> Result<Vec<TrajectoryRecord>> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::Usage("cannot aggregate zero replications".into()))?;
    let iterations = first.states.len();
    if outputs.iter().any(|o| o.states.len() != iterations) {
        return Err(Error::Usage(
            "replications disagree on the number of iterations".into(),
        ));
    }
    let reps = outputs.len() as f64;
    let mut records = Vec::with_capacity(iterations);
    for t in 0..iterations {
        let pooled = || {
            outputs
                .iter()
                .flat_map(|o| o.states[t].normalized_weights.iter())
        };
        let count = pooled().count() as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        for w in pooled() {
            for k in 0..FEATURE_COUNT {
                mean[k] += w[k];
            }
        }
        mean = mean.map(|s| s / count);
        let mut stderr = [0.0; FEATURE_COUNT];
        if count > 1.0 {
            let mut ss = [0.0; FEATURE_COUNT];
            for w in pooled() {
                for k in 0..FEATURE_COUNT {
                    ss[k] += (w[k] - mean[k]).powi(2);
                }
            }
            stderr = ss.map(|s| (s / (count - 1.0)).sqrt() / count.sqrt());
        }
        let best = outputs
            .iter()
            .map(|o| o.states[t].best_fitness())
            .sum::<f64>()
            / reps;
        let avg = outputs
            .iter()
            .map(|o| o.states[t].mean_fitness())
            .sum::<f64>()
            / reps;
        records.push(TrajectoryRecord {
            iteration: first.states[t].iteration,
            mean_normalized_weights: mean,
            stderr_normalized_weights: stderr,
            mean_best_fitness: best,
            mean_mean_fitness: avg,
        });
    }
    Ok(records)
}

/// Mean and standard error, across every agent of every replication, of the
/// least-squares slope of normalized weight `k` over iterations `from..=to`.
pub fn agent_slopes(
    outputs: &[ReplicationOutput],
    k: usize,
    from: usize,
    to: usize,
) -> Result<(f64, f64)> {
    if from >= to || outputs.iter().any(|o| o.states.len() <= to) {
        return Err(Error::Usage(format!(
            "slope window {from}..={to} out of range"
        )));
    }
    let x_mean = (from + to) as f64 / 2.0;
    let sxx: f64 = (from..=to).map(|t| (t as f64 - x_mean).powi(2)).sum();
    let slopes: Vec<f64> = outputs
        .iter()
        .flat_map(|o| {
            (0..o.states[from].normalized_weights.len()).map(move |a| {
                (from..=to)
                    .map(|t| (t as f64 - x_mean) * o.states[t].normalized_weights[a][k])
                    .sum::<f64>()
                    / sxx
            })
        })
        .collect();
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let se = if n > 1.0 {
        (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Ok((mean, se))
}

#[derive(Clone, Debug)]
pub struct BatchOutput {
    pub records: Vec<TrajectoryRecord>,
    pub replications: Vec<ReplicationOutput>,
}

impl BatchOutput {
    pub fn branches(&self) -> BranchCounts {
        let mut total = BranchCounts::default();
        for r in &self.replications {
            total.merge(&r.branches);
        }
        total
    }

    /// `(rho, starting fitness)` for every agent of every replication.
    pub fn initial_privilege_fitness(&self) -> Vec<(f64, f64)> {
        self.replications
            .iter()
            .flat_map(|r| r.initial.iter().map(|(f, y)| (f.rho, *y)))
            .collect()
    }
}

/// Runs `cfg.n_replications` replications on at most `workers` threads
/// (0 = one per core) and aggregates them in index order.
pub fn run_batch(cfg: &SimConfig, workers: usize) -> Result<BatchOutput> {
    cfg.validate()?;
    let shared = if cfg.landscape_is_shared() {
        Some(cfg.build_landscape(0)?)
    } else {
        None
    };
    let run_one = |index: usize| match &shared {
        Some(l) => run_replication_on(cfg, l, index),
        None => run_replication(cfg, index),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let replications = pool.install(|| {
        (0..cfg.n_replications)
            .into_par_iter()
            .map(run_one)
            .collect::<Result<Vec<_>>>()
    })?;
    let records = aggregate(&replications)?;
    Ok(BatchOutput {
        records,
        replications,
    })
}

/// Sample Pearson correlation.
pub fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(kind: LandscapeKind) -> SimConfig {
        SimConfig {
            n_iterations: 30,
            n_replications: 4,
            landscape: LandscapeConfig {
                kind,
                width: 100,
                height: 100,
                ..LandscapeConfig::default()
            },
            intervention: InterventionConfig {
                start_iteration: 15,
                ..InterventionConfig::default()
            },
            ..SimConfig::default()
        }
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalized_weights(&[0.0; 4]), [0.0; 4]);
        assert_eq!(
            normalized_weights(&[0.2, 0.0, 0.0, 0.0]),
            [1.0, 0.0, 0.0, 0.0]
        );
        let n = normalized_weights(&[0.1, -0.1, 0.2, 0.0]);
        for (a, b) in n.iter().zip([0.25, -0.25, 0.5, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn step_grows_histories_by_one() {
        let cfg = small_cfg(LandscapeKind::DropWave);
        let l = cfg.build_landscape(0).unwrap();
        let mut rng = substream(1, &[]);
        let mut team = initialize_team(&l, &cfg.distribution, 7, 0.9, &mut rng).unwrap();
        for t in 1..=5 {
            step(&mut team, &l, &cfg, 99).unwrap();
            assert_eq!(team.iteration, t);
            assert!(team
                .agents
                .iter()
                .all(|a| a.reward_history().len() == t + 1));
        }
    }

    #[test]
    fn flat_landscape_learns_nothing() {
        let mut cfg = small_cfg(LandscapeKind::PeakMixture);
        cfg.intervention.enabled = false;
        let l = Landscape::from_values(20, 20, vec![0.4; 400]).unwrap();
        let mut rng = substream(2, &[]);
        let mut team = initialize_team(&l, &cfg.distribution, 7, 0.9, &mut rng).unwrap();
        for a in &mut team.agents {
            a.features.gamma = 0.0;
            a.features.eta = 0.0;
        }
        for _ in 0..20 {
            let report = step(&mut team, &l, &cfg, 5).unwrap();
            assert!(report
                .outcomes
                .iter()
                .all(|o| o.kind == ActionKind::HillClimb));
        }
        assert!(team.agents.iter().all(|a| a.weights == [0.0; 4]));
        assert_eq!(
            team.influence,
            crate::influence::InfluenceMatrix::uniform(7)
        );
    }

    #[test]
    fn zero_learning_rate_freezes_weights() {
        let mut cfg = small_cfg(LandscapeKind::Ackley);
        cfg.alpha = 0.0;
        let out = run_replication(&cfg, 0).unwrap();
        assert!(out
            .states
            .iter()
            .all(|s| s.normalized_weights.iter().all(|w| *w == [0.0; 4])));
    }

    #[test]
    fn replication_is_deterministic() {
        let mut cfg = small_cfg(LandscapeKind::PeakMixture);
        cfg.record_mode = RecordMode::PerAgentTrace;
        let a = run_replication(&cfg, 3).unwrap();
        let b = run_replication(&cfg, 3).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.states.len(), cfg.n_iterations + 1);
        assert_eq!(
            a.trace.as_ref().unwrap().len(),
            (cfg.n_iterations + 1) * cfg.n_agents
        );
        let c = run_replication(&cfg, 4).unwrap();
        assert_ne!(a.initial, c.initial);
    }

    #[test]
    fn branch_counts_are_conserved() {
        let cfg = small_cfg(LandscapeKind::DropWave);
        let out = run_replication(&cfg, 0).unwrap();
        assert_eq!(
            out.branches.total(),
            (cfg.n_agents * cfg.n_iterations) as u64
        );
    }

    #[test]
    fn disabled_equals_never_starting() {
        let mut off = small_cfg(LandscapeKind::PeakMixture);
        off.intervention.enabled = false;
        let mut late = small_cfg(LandscapeKind::PeakMixture);
        late.intervention.start_iteration = late.n_iterations + 1;
        let a = run_replication(&off, 1).unwrap();
        let b = run_replication(&late, 1).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(b.mentor_assignments, 0);
    }

    #[test]
    fn aggregate_examples() {
        let cfg = small_cfg(LandscapeKind::DropWave);
        let mut out = run_replication(&cfg, 0).unwrap();
        for s in &mut out.states {
            s.normalized_weights.truncate(1);
            s.fitness.truncate(1);
        }
        let records = aggregate(std::slice::from_ref(&out)).unwrap();
        for (r, s) in records.iter().zip(&out.states) {
            assert_eq!(r.mean_normalized_weights, s.normalized_weights[0]);
            assert_eq!(r.stderr_normalized_weights, [0.0; 4]);
        }
        assert_eq!(records[0].mean_normalized_weights, [0.0; 4]);

        let mut mirrored = out.clone();
        for s in &mut mirrored.states {
            s.normalized_weights[0] = s.normalized_weights[0].map(|v| -v);
        }
        let records = aggregate(&[out, mirrored]).unwrap();
        assert!(records
            .iter()
            .all(|r| r.mean_normalized_weights.iter().all(|v| v.abs() < 1e-15)));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn best_fitness_matches_recompute() {
        let cfg = small_cfg(LandscapeKind::Ackley);
        let batch = run_batch(&cfg, 1).unwrap();
        for (t, r) in batch.records.iter().enumerate() {
            let oracle: f64 = batch
                .replications
                .iter()
                .map(|o| o.states[t].fitness.iter().cloned().fold(0.0, f64::max))
                .sum::<f64>()
                / batch.replications.len() as f64;
            assert!((r.mean_best_fitness - oracle).abs() < 1e-12);
            assert_eq!(r.iteration, t);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = small_cfg(LandscapeKind::PeakMixture);
        let a = run_batch(&cfg, 1).unwrap();
        let b = run_batch(&cfg, 3).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn mean_agent_slope_is_slope_of_mean() {
        let cfg = small_cfg(LandscapeKind::DropWave);
        let batch = run_batch(&cfg, 1).unwrap();
        let (from, to) = (2, cfg.n_iterations);
        for k in 0..FEATURE_COUNT {
            let (mean, se) = agent_slopes(&batch.replications, k, from, to).unwrap();
            let pts: Vec<(f64, f64)> = (from..=to)
                .map(|t| (t as f64, batch.records[t].mean_normalized_weights[k]))
                .collect();
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let b = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
                / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
            assert!((mean - b).abs() < 1e-12, "{mean} vs {b}");
            assert!(se > 0.0);
        }
        assert!(agent_slopes(&batch.replications, 0, 5, 5).is_err());
        assert!(agent_slopes(&batch.replications, 0, 0, cfg.n_iterations + 1).is_err());
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)]) - 1.0).abs() < 1e-12);
        assert!((pearson(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let bad = SimConfig {
            n_agents: 1,
            ..SimConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = SimConfig {
            tau: 0.0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
