use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunPlan;
use crate::error::{Error, Result};

/// Angle given either as a number of radians or as text such as `pi/2`,
/// `2pi/3` or `0.25*pi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Number(f64),
    Text(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64> {
        match self {
            Angle::Number(v) => Ok(*v),
            Angle::Text(s) => {
                parse_angle(s).ok_or_else(|| Error::invalid("theta", format!("cannot parse angle `{s}`")))
            }
        }
    }
}

/// Parses `x`, `pi`, `k pi`, `k*pi`, `pi/m`, `k pi/m` (whitespace ignored).
pub fn parse_angle(text: &str) -> Option<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok()?),
        None => (s.as_str(), 1.0),
    };
    let factor = num.strip_suffix("pi").or_else(|| num.strip_suffix('π'))?;
    let factor = factor.strip_suffix('*').unwrap_or(factor);
    let k = if factor.is_empty() { 1.0 } else { factor.parse::<f64>().ok()? };
    Some(k * PI / den)
}

/// Every user-settable key. Field names, in kebab case, are shared by the
/// command-line flags and the configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub g: Option<f64>,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub theta: Option<Angle>,
    pub detection: Option<String>,
    pub bandwidth: Option<f64>,
    pub counting: Option<bool>,
    pub tfinal: Option<f64>,
    pub dt: Option<f64>,
    pub fock_cutoff: Option<usize>,
    pub snapshots: Option<Vec<f64>>,
    pub ntraj: Option<usize>,
    pub seed: Option<u64>,
    pub record_every: Option<usize>,
    pub grid_half_width: Option<f64>,
    pub grid_points: Option<usize>,
    pub tau_max: Option<f64>,
    pub tau_points: Option<usize>,
    pub bin_width: Option<f64>,
    pub memory_cap_mb: Option<u64>,
    pub out: Option<PathBuf>,
}

macro_rules! layer {
    ($base:ident, $top:ident, $($field:ident),*) => {
        Overrides { $($field: $top.$field.or($base.$field)),* }
    };
}

impl Overrides {
    /// Keys set in `top` win over keys set in `self`.
    pub fn merged_with(self, top: Overrides) -> Overrides {
        let base = self;
        layer!(
            base, top, scenario, g, kappa, gamma, epsilon, theta, detection, bandwidth, counting, tfinal, dt,
            fock_cutoff, snapshots, ntraj, seed, record_every, grid_half_width, grid_points, tau_max,
            tau_points, bin_width, memory_cap_mb, out
        )
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Overrides> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|span| line_of_offset(text, span.start));
            Error::Config {
                location: location(origin, line),
                message: e.message().to_string(),
            }
        })
    }

    pub fn from_file(path: &Path) -> Result<Overrides> {
        let text = std::fs::read_to_string(path)?;
        Overrides::from_toml(&text, &path.display().to_string())
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line on which `key` is assigned, if any.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .map(|rest| rest.trim_start().starts_with('='))
            .unwrap_or(false)
    })
    .map(|i| i + 1)
}

fn location(origin: &str, line: Option<usize>) -> String {
    match line {
        Some(l) => format!("{origin}:{l}"),
        None => origin.to_string(),
    }
}

/// Resolves a configuration text into a run plan; value errors are
/// reported with the line of the offending key.
pub(crate) fn resolve_text(text: &str, origin: &str) -> Result<RunPlan> {
    let overrides = Overrides::from_toml(text, origin)?;
    RunPlan::resolve(&overrides).map_err(|e| match e {
        Error::InvalidParameter { name, reason } => Error::Config {
            location: location(origin, line_of_key(text, &name)),
            message: format!("key `{name}`: {reason}"),
        },
        other => other,
    })
}

/// Layers `flags` over an optional configuration file. Value errors for
/// keys that come from the file carry the file's line.
pub fn resolve_layers(file: Option<&Path>, flags: Overrides) -> Result<RunPlan> {
    let Some(path) = file else {
        return RunPlan::resolve(&flags);
    };
    let text = std::fs::read_to_string(path)?;
    let origin = path.display().to_string();
    let from_file = Overrides::from_toml(&text, &origin)?;
    let set_by_flags = serde_json::to_value(&flags)?;
    RunPlan::resolve(&from_file.merged_with(flags)).map_err(|e| match e {
        Error::InvalidParameter { name, reason } if set_by_flags[name.as_str()].is_null() => Error::Config {
            location: location(&origin, line_of_key(&text, &name)),
            message: format!("key `{name}`: {reason}"),
        },
        other => other,
    })
}

/// Reads and validates a flat key-value configuration file.
pub fn parse_config(path: &Path) -> Result<RunPlan> {
    let text = std::fs::read_to_string(path)?;
    resolve_text(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::Scenario;

    fn config_error(text: &str) -> (String, String) {
        match resolve_text(text, "run.toml") {
            Err(Error::Config { location, message }) => (location, message),
            other => panic!("expected a configuration error, got {other:?}"),
        }
    }

    #[test]
    fn angles() {
        for (s, v) in [("0", 0.0), ("pi/2", PI / 2.0), ("2pi/3", 2.0 * PI / 3.0), ("0.5 * pi", PI / 2.0), ("1.25", 1.25)] {
            assert!((parse_angle(s).unwrap() - v).abs() < 1e-15, "{s}");
        }
        assert!(parse_angle("half").is_none());
        assert!(parse_angle("pi/").is_none());
    }

    #[test]
    fn minimal_file_gets_scenario_defaults() {
        let plan = resolve_text("scenario = \"fig3\"\n", "run.toml").unwrap();
        assert_eq!(plan.scenario, Scenario::Fig3);
        assert_eq!((plan.params.g, plan.params.epsilon, plan.detection.bandwidth), (7.0, 30.0, 0.5));
        assert_eq!(plan.snapshot_times.len(), 5);
    }

    #[test]
    fn negative_gamma_names_key_and_line() {
        let (loc, msg) = config_error("scenario = \"fig4\"\ngamma = -5.0\n");
        assert_eq!(loc, "run.toml:2");
        assert!(msg.contains("gamma"), "{msg}");
    }

    #[test]
    fn theta_outside_domain_rejected() {
        for bad in ["theta = 3.5", "theta = \"pi\"", "theta = -0.1"] {
            let (loc, msg) = config_error(&format!("scenario = \"fig2\"\n{bad}\n"));
            assert_eq!(loc, "run.toml:2");
            assert!(msg.contains("theta"), "{msg}");
        }
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let (loc, msg) = config_error("g = 1.0\n\nomega = 2.0\n");
        assert_eq!(loc, "run.toml:3");
        assert!(msg.contains("omega"), "{msg}");
    }

    #[test]
    fn malformed_file_rejected() {
        let (loc, _) = config_error("g = 1.0\nkappa = = 1\n");
        assert_eq!(loc, "run.toml:2");
        let (_, msg) = config_error("fock-cutoff = -3\n");
        assert!(!msg.is_empty());
    }

    #[test]
    fn file_errors_keep_their_line_under_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "scenario = \"fig4\"\n\ngamma = -1.0\n").unwrap();
        match resolve_layers(Some(&path), Overrides::default()) {
            Err(Error::Config { location, .. }) => assert!(location.ends_with("run.toml:3"), "{location}"),
            other => panic!("{other:?}"),
        }
        let fixed = Overrides {
            gamma: Some(5.0),
            ..Overrides::default()
        };
        assert_eq!(resolve_layers(Some(&path), fixed).unwrap().params.gamma, 5.0);
    }

    #[test]
    fn later_layer_wins() {
        let file = Overrides::from_toml("scenario = \"fig2\"\ntheta = \"pi/3\"\nntraj = 4\n", "f").unwrap();
        let flags = Overrides {
            theta: Some(Angle::Number(0.0)),
            ..Overrides::default()
        };
        let plan = RunPlan::resolve(&file.merged_with(flags)).unwrap();
        assert_eq!(plan.detection.theta, 0.0);
        assert_eq!(plan.params.n_traj, 4);
        assert_eq!(plan.scenario, Scenario::Fig2);
    }
}
