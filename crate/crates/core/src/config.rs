//! TOML configuration files with dotted-key overrides.
//!
//! Precedence, lowest first: built-in defaults, the config file, the
//! `BIAS_SIM_SEED` environment variable (master seed only), `--key=value`
//! overrides.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use toml::{Table, Value};

use crate::engine::SimConfig;
use crate::error::{Error, Result};

pub const SEED_ENV_VAR: &str = "BIAS_SIM_SEED";

/// Every settable dotted key, e.g. `landscape.kind`.
pub fn known_keys() -> BTreeSet<String> {
    let defaults = Value::try_from(SimConfig::default()).expect("defaults serialize to TOML");
    let mut keys = BTreeSet::new();
    collect_keys(&defaults, "", &mut keys);
    keys
}

fn collect_keys(value: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                collect_keys(v, &key, out);
            }
        }
        _ => {
            out.insert(prefix.to_string());
        }
    }
}

/// Parses an override value as a TOML value, falling back to a bare string.
pub fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{part}` in `{key}` is not a table")))?;
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}

/// Resolved configuration plus whether the landscape kind was chosen
/// explicitly (as opposed to left at its default).
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub sim: SimConfig,
    pub kind_explicit: bool,
}

/// Loads `path` (if any), then applies the seed variable and overrides.
pub fn load(
    path: Option<&Path>,
    overrides: &[(String, String)],
    env_seed: Option<&str>,
) -> Result<LoadedConfig> {
    let mut table = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            // Typed parse first so errors carry line and column.
            toml::from_str::<SimConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    let mut kind_explicit = table
        .get("landscape")
        .and_then(Value::as_table)
        .is_some_and(|t| t.contains_key("kind"));

    let known = known_keys();
    for (key, raw) in overrides {
        if !known.contains(key) {
            return Err(Error::Config(format!("unknown configuration key `{key}`")));
        }
        set_path(&mut table, key, parse_value(raw))?;
        kind_explicit |= key == "landscape.kind";
    }
    let mut sim: SimConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string().trim().to_string()))?;

    if let Some(raw) = env_seed {
        if !overrides.iter().any(|(k, _)| k == "master_seed") {
            sim.master_seed = raw.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "{SEED_ENV_VAR} = `{raw}` is not a 64-bit unsigned integer"
                ))
            })?;
        }
    }
    sim.validate()?;
    Ok(LoadedConfig { sim, kind_explicit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RecordMode;
    use crate::landscape::LandscapeKind;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), text).unwrap();
        f
    }

    fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn defaults_without_file() {
        let c = load(None, &[], None).unwrap();
        assert_eq!(c.sim, SimConfig::default());
        assert!(!c.kind_explicit);
    }

    #[test]
    fn known_keys_cover_nested_fields() {
        let keys = known_keys();
        for k in [
            "n_agents",
            "alpha",
            "landscape.kind",
            "landscape.seed_policy",
            "intervention.start_iteration",
            "distribution.bimodal_std",
            "policy.shc_include_self",
        ] {
            assert!(keys.contains(k), "{k}");
        }
    }

    #[test]
    fn file_with_dotted_keys() {
        let f = write(
            "n_replications = 20\nrecord_mode = \"per_agent_trace\"\nlandscape.kind = \"drop_wave\"\nintervention.start_iteration = 60\n",
        );
        let c = load(Some(f.path()), &[], None).unwrap();
        assert_eq!(c.sim.n_replications, 20);
        assert_eq!(c.sim.record_mode, RecordMode::PerAgentTrace);
        assert_eq!(c.sim.landscape.kind, LandscapeKind::DropWave);
        assert_eq!(c.sim.intervention.start_iteration, 60);
        assert!(c.kind_explicit);
    }

    #[test]
    fn overrides_beat_file() {
        let f = write("alpha = 0.2\n[intervention]\nenabled = true\n");
        let c = load(
            Some(f.path()),
            &ov(&[
                ("alpha", "0.05"),
                ("intervention.enabled", "false"),
                ("landscape.kind", "ackley"),
            ]),
            None,
        )
        .unwrap();
        assert_eq!(c.sim.alpha, 0.05);
        assert!(!c.sim.intervention.enabled);
        assert!(c.kind_explicit);
    }

    #[test]
    fn integer_for_float_field() {
        let c = load(None, &ov(&[("lambda", "1")]), None).unwrap();
        assert_eq!(c.sim.lambda, 1.0);
    }

    #[test]
    fn syntax_error_reports_line() {
        let f = write("n_agents = 7\nalpha = = 3\n");
        let err = load(Some(f.path()), &[], None).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_file_key_is_named() {
        let f = write("n_agents = 7\n[landscape]\nkindd = \"ackley\"\n");
        let err = load(Some(f.path()), &[], None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("kindd"), "{err}");
    }

    #[test]
    fn unknown_override_key_is_named() {
        let err = load(None, &ov(&[("landscape.colour", "red")]), None).unwrap_err();
        assert!(err.to_string().contains("landscape.colour"), "{err}");
    }

    #[test]
    fn wrong_type_is_an_error() {
        assert!(load(None, &ov(&[("n_agents", "many")]), None).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(load(None, &ov(&[("tau", "0")]), None).is_err());
        assert!(load(None, &ov(&[("n_agents", "1")]), None).is_err());
    }

    #[test]
    fn seed_variable() {
        let c = load(None, &[], Some("18446744073709551615")).unwrap();
        assert_eq!(c.sim.master_seed, u64::MAX);
        let c = load(None, &ov(&[("master_seed", "5")]), Some("9")).unwrap();
        assert_eq!(c.sim.master_seed, 5);
        assert!(load(None, &[], Some("abc")).is_err());
    }
}
