//! Runs environment × arm batches and writes the result directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{
    agent_slopes, pearson, run_batch, BranchCounts, RecordMode, SimConfig, TrajectoryRecord,
};
use crate::error::{Error, Result};
use crate::landscape::LandscapeKind;
use crate::output::{
    trajectory_file_name, verify_outputs, write_json, write_trajectory_csv, OutputEntry,
    MANIFEST_FILE, SUMMARY_FILE,
};
use crate::signatures::{evaluate, Arm, CriterionResult, SlopeStat, Status, TREND_START};

/// Agents needed before the initial-privilege correlation is judged.
pub const MIN_CORRELATION_AGENTS: usize = 1000;
pub const MIN_CORRELATION: f64 = 0.8;

#[derive(Clone, Debug)]
pub struct RunPlan {
    pub config: SimConfig,
    pub environments: Vec<LandscapeKind>,
    pub arms: Vec<Arm>,
    /// Worker threads per batch, 0 = one per core.
    pub workers: usize,
}

impl RunPlan {
    pub fn new(config: SimConfig) -> Self {
        RunPlan {
            config,
            environments: LandscapeKind::ALL.to_vec(),
            arms: vec![Arm::Intervention, Arm::Control],
            workers: 0,
        }
    }

    /// Effective configuration of one environment × arm batch.
    pub fn arm_config(&self, env: LandscapeKind, arm: Arm) -> SimConfig {
        let mut cfg = self.config.clone();
        cfg.landscape.kind = env;
        cfg.intervention.enabled = arm == Arm::Intervention;
        cfg.record_mode = RecordMode::Aggregate;
        cfg
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationStat {
    pub env: String,
    pub agents: usize,
    pub pearson: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmStats {
    pub env: String,
    pub arm: Arm,
    pub file: String,
    pub imitate: u64,
    pub random_jump: u64,
    pub jump_rejected: u64,
    pub hill_climb: u64,
    pub mentor_assignments: u64,
    pub final_mean_best_fitness: f64,
    pub final_mean_weights: [f64; 4],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub onset: usize,
    pub n_iterations: usize,
    pub n_replications: usize,
    pub criteria: Vec<CriterionResult>,
    pub initial_correlation: Vec<CorrelationStat>,
    pub slopes: Vec<SlopeStat>,
    pub runs: Vec<ArmStats>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunEntry {
    pub env: String,
    pub arm: Arm,
    pub file: String,
    pub config: SimConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub master_seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub runs: Vec<RunEntry>,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Option<RunManifest>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Error::Schema {
                path,
                reason: e.to_string(),
            })
    }

    pub fn onset(&self) -> Option<usize> {
        self.runs
            .first()
            .map(|r| r.config.intervention.start_iteration)
    }
}

/// Judges the initial privilege/fitness correlation of every environment.
pub fn correlation_criterion(stats: &[CorrelationStat]) -> CriterionResult {
    let title = "initial-privilege correlation";
    let detail = stats
        .iter()
        .map(|s| format!("{} r={:.4} (n={})", s.env, s.pearson, s.agents))
        .collect::<Vec<_>>()
        .join(", ");
    let status = if stats.is_empty() || stats.iter().any(|s| s.agents < MIN_CORRELATION_AGENTS) {
        Status::Skipped
    } else if stats.iter().all(|s| s.pearson > MIN_CORRELATION) {
        Status::Pass
    } else {
        Status::Fail
    };
    let detail = if status == Status::Skipped {
        format!("fewer than {MIN_CORRELATION_AGENTS} agents per environment; {detail}")
    } else {
        detail
    };
    CriterionResult::new("P7", title, status, detail)
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub summary: RunSummary,
    pub manifest: RunManifest,
    pub trajectories: BTreeMap<(String, Arm), Vec<TrajectoryRecord>>,
    pub files: Vec<PathBuf>,
}

/// Runs every batch of `plan` and writes CSVs, `summary.json` and
/// `manifest.json` into `out_dir`.
pub fn execute(plan: &RunPlan, out_dir: &Path) -> Result<RunReport> {
    plan.config.validate()?;
    if plan.environments.is_empty() || plan.arms.is_empty() {
        return Err(Error::Usage(
            "nothing to run: no environments or arms".into(),
        ));
    }
    let started_at = chrono::Utc::now().to_rfc3339();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut trajectories = BTreeMap::new();
    let mut runs = Vec::new();
    let mut stats = Vec::new();
    let mut correlations = Vec::new();
    let mut slopes = Vec::new();
    let mut names = Vec::new();
    let onset = plan.config.intervention.start_iteration;
    let last = plan.config.n_iterations;
    for &env in &plan.environments {
        for (i, &arm) in plan.arms.iter().enumerate() {
            let cfg = plan.arm_config(env, arm);
            let batch = run_batch(&cfg, plan.workers)?;
            check_finite(&batch.records, env, arm)?;

            let file = trajectory_file_name(env.name(), arm);
            write_trajectory_csv(&out_dir.join(&file), env.name(), arm, &batch.records)?;
            names.push(file.clone());

            // Starting states do not depend on the arm.
            if i == 0 {
                let pairs = batch.initial_privilege_fitness();
                correlations.push(CorrelationStat {
                    env: env.name().into(),
                    agents: pairs.len(),
                    pearson: pearson(&pairs),
                });
            }
            for (from, to) in [(TREND_START, onset), (onset, last)] {
                if from < to && to <= last {
                    let (slope, se) = agent_slopes(&batch.replications, 0, from, to)?;
                    slopes.push(SlopeStat {
                        env: env.name().into(),
                        arm,
                        feature: "gamma".into(),
                        from,
                        to,
                        slope,
                        se,
                    });
                }
            }
            let branches: BranchCounts = batch.branches();
            let last = batch.records.last().expect("at least the initial record");
            stats.push(ArmStats {
                env: env.name().into(),
                arm,
                file: file.clone(),
                imitate: branches.imitate,
                random_jump: branches.random_jump,
                jump_rejected: branches.jump_rejected,
                hill_climb: branches.hill_climb,
                mentor_assignments: batch
                    .replications
                    .iter()
                    .map(|r| r.mentor_assignments)
                    .sum(),
                final_mean_best_fitness: last.mean_best_fitness,
                final_mean_weights: last.mean_normalized_weights,
            });
            runs.push(RunEntry {
                env: env.name().into(),
                arm,
                file,
                config: cfg,
            });
            trajectories.insert((env.name().to_string(), arm), batch.records);
        }
    }

    let mut criteria = evaluate(&trajectories, onset, &slopes);
    criteria.push(correlation_criterion(&correlations));
    let summary = RunSummary {
        onset,
        n_iterations: plan.config.n_iterations,
        n_replications: plan.config.n_replications,
        criteria,
        initial_correlation: correlations,
        slopes,
        runs: stats,
    };
    write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
    names.push(SUMMARY_FILE.into());

    let outputs = names
        .iter()
        .map(|n| OutputEntry::for_file(out_dir, n))
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        software: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        master_seed: plan.config.master_seed,
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        runs,
        outputs,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;

    Ok(RunReport {
        summary,
        manifest,
        trajectories,
        files: names.iter().map(|n| out_dir.join(n)).collect(),
    })
}

fn check_finite(records: &[TrajectoryRecord], env: LandscapeKind, arm: Arm) -> Result<()> {
    for r in records {
        let mut values = r
            .mean_normalized_weights
            .iter()
            .chain(&r.stderr_normalized_weights)
            .chain([&r.mean_best_fitness, &r.mean_mean_fitness]);
        if values.any(|v| !v.is_finite()) {
            return Err(Error::NumericalFault(format!(
                "non-finite aggregate at iteration {} ({env}, {arm})",
                r.iteration
            )));
        }
    }
    Ok(())
}

/// Outcome of checking a result directory.
#[derive(Clone, Debug)]
pub struct Validation {
    pub onset: usize,
    pub criteria: Vec<CriterionResult>,
}

impl Validation {
    /// True when nothing failed; skipped checks are fine.
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.status != Status::Fail)
    }
}

/// Recomputes the trajectory signatures from the CSVs in `dir`. The onset is
/// taken from `onset`, else the manifest, else the default configuration.
/// When a manifest is present its hashes are checked first.
pub fn validate_dir(dir: &Path, onset: Option<usize>) -> Result<Validation> {
    let manifest = RunManifest::read(dir)?;
    if let Some(m) = &manifest {
        verify_outputs(dir, &m.outputs)?;
    }
    let trajectories = crate::output::read_trajectories(dir)?;
    let onset = onset
        .or_else(|| manifest.as_ref().and_then(RunManifest::onset))
        .unwrap_or(SimConfig::default().intervention.start_iteration);
    let summary_path = dir.join(SUMMARY_FILE);
    let summary = if summary_path.exists() {
        let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
        let summary: RunSummary = serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: summary_path.clone(),
            reason: e.to_string(),
        })?;
        Some(summary)
    } else {
        None
    };
    let slopes = summary.as_ref().map_or(&[][..], |s| &s.slopes[..]);
    let mut criteria = evaluate(&trajectories, onset, slopes);
    let correlations = summary
        .as_ref()
        .map_or(&[][..], |s| &s.initial_correlation[..]);
    criteria.push(correlation_criterion(correlations));
    Ok(Validation { onset, criteria })
}
