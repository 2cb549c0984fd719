//! Qualitative trajectory signatures checked on aggregated results.
//!
//! All checks work on the environment-averaged series of one arm: per
//! iteration, the mean over environments of the mean normalized weights, with
//! standard error `sqrt(sum se^2) / n_env`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::TrajectoryRecord;
use crate::sampling::FEATURE_COUNT;

const GAMMA: usize = 0;
const ETA: usize = 1;
const RHO: usize = 2;
const NU: usize = 3;

/// Iteration at which the early privilege bias is checked.
pub const EARLY_ITERATION: usize = 25;
/// First iteration of the pre-onset imitation-trend window.
pub const TREND_START: usize = 10;
/// Margin, in pooled standard errors, for the ordering checks.
pub const SE_MARGIN: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Intervention,
    Control,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Intervention => "intervention",
            Arm::Control => "control",
        }
    }

    pub fn parse(s: &str) -> Option<Arm> {
        match s {
            "intervention" => Some(Arm::Intervention),
            "control" => Some(Arm::Control),
            _ => None,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub title: String,
    pub status: Status,
    pub detail: String,
}

impl CriterionResult {
    pub fn new(id: &str, title: &str, status: Status, detail: String) -> Self {
        CriterionResult {
            id: id.into(),
            title: title.into(),
            status,
            detail,
        }
    }

    fn check(id: &str, title: &str, ok: bool, detail: String) -> Self {
        let status = if ok { Status::Pass } else { Status::Fail };
        Self::new(id, title, status, detail)
    }

    fn skipped(id: &str, title: &str, why: &str) -> Self {
        Self::new(id, title, Status::Skipped, why.into())
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} {}: {}",
            self.status, self.id, self.title, self.detail
        )
    }
}

/// Mean and standard error per iteration and feature.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub mean: Vec<[f64; FEATURE_COUNT]>,
    pub se: Vec<[f64; FEATURE_COUNT]>,
}

impl Series {
    /// Averages equally long trajectories (one per environment).
    pub fn average(trajectories: &[&[TrajectoryRecord]]) -> Option<Series> {
        let len = trajectories.first()?.len();
        if len == 0 || trajectories.iter().any(|t| t.len() != len) {
            return None;
        }
        let n = trajectories.len() as f64;
        let mut mean = vec![[0.0; FEATURE_COUNT]; len];
        let mut se = vec![[0.0; FEATURE_COUNT]; len];
        for t in 0..len {
            for k in 0..FEATURE_COUNT {
                let m: f64 = trajectories
                    .iter()
                    .map(|r| r[t].mean_normalized_weights[k])
                    .sum();
                let v: f64 = trajectories
                    .iter()
                    .map(|r| r[t].stderr_normalized_weights[k].powi(2))
                    .sum();
                mean[t][k] = m / n;
                se[t][k] = v.sqrt() / n;
            }
        }
        Some(Series { mean, se })
    }

    pub fn last(&self) -> usize {
        self.mean.len() - 1
    }

    fn at(&self, t: usize, k: usize) -> (f64, f64) {
        (self.mean[t][k], self.se[t][k])
    }

    /// Least-squares slope of feature `k` over iterations `from..=to`, and
    /// its standard error treating per-iteration errors as independent.
    pub fn slope(&self, k: usize, from: usize, to: usize) -> (f64, f64) {
        let xs: Vec<f64> = (from..=to).map(|t| t as f64).collect();
        let x_mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let y_mean = (from..=to).map(|t| self.mean[t][k]).sum::<f64>() / xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
        let sxy: f64 = (from..=to)
            .zip(&xs)
            .map(|(t, x)| (x - x_mean) * (self.mean[t][k] - y_mean))
            .sum();
        let var: f64 = (from..=to)
            .zip(&xs)
            .map(|(t, x)| (x - x_mean).powi(2) * self.se[t][k].powi(2))
            .sum();
        (sxy / sxx, var.sqrt() / sxx)
    }
}

/// Least-squares slope of one feature over an iteration window, with the
/// standard error across agents of their individual slopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeStat {
    pub env: String,
    pub arm: Arm,
    pub feature: String,
    pub from: usize,
    pub to: usize,
    pub slope: f64,
    pub se: f64,
}

fn pooled(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

const TITLES: [(&str, &str); 6] = [
    ("P1", "early privilege bias"),
    ("P2", "intervention reduces privilege bias"),
    ("P3", "social imitation recovery"),
    ("P4", "jump-feature growth"),
    ("P5", "residual bias"),
    ("P6", "control contrast"),
];

/// Evaluates the six trajectory signatures. `trajectories` maps
/// `(environment, arm)` to its aggregated records; `onset` is the
/// intervention start iteration. Agent-level slope statistics, when given
/// for every control environment, supply the control slope's standard error;
/// otherwise it is approximated from the per-iteration errors.
pub fn evaluate(
    trajectories: &BTreeMap<(String, Arm), Vec<TrajectoryRecord>>,
    onset: usize,
    slopes: &[SlopeStat],
) -> Vec<CriterionResult> {
    let arm_series = |arm: Arm| {
        let runs: Vec<&[TrajectoryRecord]> = trajectories
            .iter()
            .filter(|((_, a), _)| *a == arm)
            .map(|(_, r)| r.as_slice())
            .collect();
        Series::average(&runs)
    };
    let int = arm_series(Arm::Intervention);
    let ctl = arm_series(Arm::Control);

    let mut out = Vec::new();
    let Some(int) = int else {
        for (id, title) in TITLES {
            out.push(CriterionResult::skipped(
                id,
                title,
                "no intervention-arm trajectories",
            ));
        }
        return out;
    };
    let last = int.last();
    if last < EARLY_ITERATION.max(onset) || onset <= TREND_START || onset >= last {
        for (id, title) in TITLES {
            out.push(CriterionResult::skipped(
                id,
                title,
                &format!("{last} iterations too short for onset {onset}"),
            ));
        }
        return out;
    }

    // P1
    let (rho, rho_se) = int.at(EARLY_ITERATION, RHO);
    let mut ok = true;
    let mut parts = vec![format!("rho={rho:.4}")];
    for (name, k) in [("gamma", GAMMA), ("eta", ETA), ("nu", NU)] {
        let (v, se) = int.at(EARLY_ITERATION, k);
        let margin = SE_MARGIN * pooled(rho_se, se);
        ok &= rho - v > margin;
        parts.push(format!("{name}={v:.4} (gap {:.4} vs {margin:.4})", rho - v));
    }
    out.push(CriterionResult::check(
        "P1",
        TITLES[0].1,
        ok,
        format!("t={EARLY_ITERATION}: {}", parts.join(", ")),
    ));

    // P2
    let (at_onset, se_onset) = int.at(onset, RHO);
    let (at_end, se_end) = int.at(last, RHO);
    let drop = at_onset - at_end;
    let margin = SE_MARGIN * pooled(se_onset, se_end);
    out.push(CriterionResult::check(
        "P2",
        TITLES[1].1,
        drop > margin,
        format!(
            "rho t={onset}: {at_onset:.4} -> t={last}: {at_end:.4}, drop {drop:.5} vs {margin:.5}"
        ),
    ));

    // P3
    let (pre, pre_se) = int.slope(GAMMA, TREND_START, onset);
    let (post, post_se) = int.slope(GAMMA, onset, last);
    out.push(CriterionResult::check(
        "P3",
        TITLES[2].1,
        pre <= 0.0 && post > 0.0,
        format!(
            "gamma slope t={TREND_START}..{onset}: {pre:+.3e} (se {pre_se:.1e}), t={onset}..{last}: {post:+.3e} (se {post_se:.1e})"
        ),
    ));

    // P4
    let (eta_early, _) = int.at(EARLY_ITERATION, ETA);
    let (eta_end, _) = int.at(last, ETA);
    out.push(CriterionResult::check(
        "P4",
        TITLES[3].1,
        eta_end > eta_early,
        format!("eta t={EARLY_ITERATION}: {eta_early:.4}, t={last}: {eta_end:.4}"),
    ));

    // P5
    let (nu_end, _) = int.at(last, NU);
    out.push(CriterionResult::check(
        "P5",
        TITLES[4].1,
        at_end > nu_end,
        format!("t={last}: rho={at_end:.4}, nu={nu_end:.4}"),
    ));

    // P6
    match ctl {
        Some(ctl) if ctl.last() == last => {
            let ctl_drop = ctl.at(onset, RHO).0 - ctl.at(last, RHO).0;
            let (slope, approx_se) = ctl.slope(GAMMA, onset, last);
            let envs: Vec<&String> = trajectories
                .keys()
                .filter(|(_, a)| *a == Arm::Control)
                .map(|(e, _)| e)
                .collect();
            let agent_se: Option<Vec<f64>> = envs
                .iter()
                .map(|env| {
                    slopes
                        .iter()
                        .find(|s| {
                            &&s.env == env
                                && s.arm == Arm::Control
                                && s.feature == "gamma"
                                && s.from == onset
                                && s.to == last
                        })
                        .map(|s| s.se)
                })
                .collect();
            let (slope_se, source) = match agent_se {
                Some(v) => (
                    v.iter().map(|s| s * s).sum::<f64>().sqrt() / v.len() as f64,
                    "agent-level",
                ),
                None => (approx_se, "per-iteration approximation"),
            };
            let ok = ctl_drop < drop && slope <= SE_MARGIN * slope_se;
            out.push(CriterionResult::check(
                "P6",
                TITLES[5].1,
                ok,
                format!(
                    "rho drop control {ctl_drop:.5} vs intervention {drop:.5}; control gamma slope {slope:+.3e} vs {:.3e} ({source} se)",
                    SE_MARGIN * slope_se
                ),
            ));
        }
        Some(_) => out.push(CriterionResult::new(
            "P6",
            TITLES[5].1,
            Status::Fail,
            "control and intervention arms have different lengths".into(),
        )),
        None => out.push(CriterionResult::skipped(
            "P6",
            TITLES[5].1,
            "no control-arm trajectories",
        )),
    }
    out
}
