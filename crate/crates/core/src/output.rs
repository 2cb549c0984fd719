//! Result files: trajectory CSVs, JSON manifest and summary, NDJSON traces.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{TraceLine, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::sampling::FEATURE_COUNT;
use crate::signatures::Arm;

pub const CSV_HEADER: [&str; 13] = [
    "iteration",
    "env",
    "arm",
    "mean_w_gamma",
    "mean_w_eta",
    "mean_w_rho",
    "mean_w_nu",
    "se_w_gamma",
    "se_w_eta",
    "se_w_rho",
    "se_w_nu",
    "mean_best_fitness",
    "mean_mean_fitness",
];

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// Rounds to 9 significant digits and prints the shortest decimal that
/// reads back to the rounded value.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    let exp = rounded.abs().log10().floor() as i32;
    if (-5..16).contains(&exp) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

pub fn trajectory_file_name(env: &str, arm: Arm) -> String {
    format!("trajectory_{env}_{arm}.csv")
}

pub fn write_trajectory_csv(
    path: &Path,
    env: &str,
    arm: Arm,
    records: &[TrajectoryRecord],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let to_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(to_err)?;
    for r in records {
        let mut row = vec![r.iteration.to_string(), env.to_string(), arm.to_string()];
        row.extend(r.mean_normalized_weights.iter().map(|&v| format_float(v)));
        row.extend(r.stderr_normalized_weights.iter().map(|&v| format_float(v)));
        row.push(format_float(r.mean_best_fitness));
        row.push(format_float(r.mean_mean_fitness));
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A parsed trajectory file.
#[derive(Clone, Debug)]
pub struct TrajectoryFile {
    pub env: String,
    pub arm: Arm,
    pub records: Vec<TrajectoryRecord>,
}

pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryFile> {
    let schema = |reason: String| Error::Schema {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| schema(format!("unreadable header: {e}")))?
        .clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(schema(format!(
            "header `{}` does not match `{}`",
            header.iter().collect::<Vec<_>>().join(","),
            CSV_HEADER.join(",")
        )));
    }

    let mut ident: Option<(String, Arm)> = None;
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let line = line + 2;
        let row = row.map_err(|e| schema(format!("line {line}: {e}")))?;
        let num = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|_| {
                schema(format!(
                    "line {line}: column {} is not a number: `{}`",
                    CSV_HEADER[i], &row[i]
                ))
            })
        };
        let iteration: usize = row[0]
            .parse()
            .map_err(|_| schema(format!("line {line}: bad iteration `{}`", &row[0])))?;
        if iteration != records.len() {
            return Err(schema(format!(
                "line {line}: expected iteration {}, found {iteration}",
                records.len()
            )));
        }
        let arm = Arm::parse(&row[2])
            .ok_or_else(|| schema(format!("line {line}: unknown arm `{}`", &row[2])))?;
        match &ident {
            None => ident = Some((row[1].to_string(), arm)),
            Some((env, a)) if env == &row[1] && *a == arm => {}
            Some(_) => return Err(schema(format!("line {line}: mixed env/arm values"))),
        }
        let mut mean = [0.0; FEATURE_COUNT];
        let mut se = [0.0; FEATURE_COUNT];
        for k in 0..FEATURE_COUNT {
            mean[k] = num(3 + k)?;
            se[k] = num(3 + FEATURE_COUNT + k)?;
        }
        records.push(TrajectoryRecord {
            iteration,
            mean_normalized_weights: mean,
            stderr_normalized_weights: se,
            mean_best_fitness: num(11)?,
            mean_mean_fitness: num(12)?,
        });
    }
    let (env, arm) = ident.ok_or_else(|| schema("no data rows".into()))?;
    Ok(TrajectoryFile { env, arm, records })
}

/// Reads every `trajectory_*.csv` in `dir`.
pub fn read_trajectories(dir: &Path) -> Result<BTreeMap<(String, Arm), Vec<TrajectoryRecord>>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Schema {
        path: dir.to_path_buf(),
        reason: format!("cannot read output directory: {e}"),
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trajectory_") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Schema {
            path: dir.to_path_buf(),
            reason: "no trajectory_*.csv files".into(),
        });
    }
    let mut out = BTreeMap::new();
    for p in paths {
        let t = read_trajectory_csv(&p)?;
        if out.insert((t.env.clone(), t.arm), t.records).is_some() {
            return Err(Error::Schema {
                path: p,
                reason: format!("duplicate trajectory for {} / {}", t.env, t.arm),
            });
        }
    }
    Ok(out)
}

pub fn write_trace(path: &Path, lines: &[TraceLine]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        serde_json::to_writer(&mut w, line).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, e.into()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

impl OutputEntry {
    pub fn for_file(dir: &Path, name: &str) -> Result<Self> {
        let path = dir.join(name);
        let bytes = fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
        Ok(OutputEntry {
            file: name.to_string(),
            sha256: sha256_file(&path)?,
            bytes,
        })
    }
}

/// Checks every listed file against its recorded hash.
pub fn verify_outputs(dir: &Path, outputs: &[OutputEntry]) -> Result<()> {
    for entry in outputs {
        let path = dir.join(&entry.file);
        if !path.exists() {
            return Err(Error::Schema {
                path,
                reason: "listed in the manifest but missing".into(),
            });
        }
        if sha256_file(&path)? != entry.sha256 {
            return Err(Error::Schema {
                path,
                reason: "content hash differs from the manifest".into(),
            });
        }
    }
    Ok(())
}
