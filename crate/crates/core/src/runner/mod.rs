//! Scenario presets, configuration handling and persistence of runs.

mod config;
mod output;
mod scenario;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::JcRates;
use crate::phase_space::GridSpec;
use crate::trajectories::{check_step, DetectionConfig, DetectionMode};

pub use config::{parse_angle, parse_config, resolve_layers, Angle, Overrides};
pub use output::{read_wigner_csv, FileEntry, FileKind, Manifest, RecordEntry, SteadyStateSummary};
pub use scenario::{
    run_scenario, run_steady_state, run_wigner, run_wtd, summary_header, ScenarioResult,
};

/// Default cap on the dense superoperator and its LU copy.
pub const DEFAULT_MEMORY_CAP_MB: u64 = 3072;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Fig2,
    Fig3,
    Fig4,
    Custom,
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Scenario::Fig2),
            "fig3" => Ok(Scenario::Fig3),
            "fig4" => Ok(Scenario::Fig4),
            "custom" => Ok(Scenario::Custom),
            other => Err(Error::invalid(
                "scenario",
                format!("unknown scenario `{other}` (expected fig2, fig3, fig4 or custom)"),
            )),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Fig2 => "fig2",
            Scenario::Fig3 => "fig3",
            Scenario::Fig4 => "fig4",
            Scenario::Custom => "custom",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub fock_cutoff: usize,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    pub n_traj: usize,
}

impl SimParams {
    pub fn rates(&self) -> JcRates {
        JcRates {
            g: self.g,
            kappa: self.kappa,
            gamma: self.gamma,
            epsilon: self.epsilon,
        }
    }

    /// Seed schedule `seed, seed + 1, …`; each record depends only on its
    /// own seed, so disjoint slices of the schedule can run separately.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_traj as u64).map(|k| self.seed + k).collect()
    }
}

/// Waiting-time grid `[0, tau_max]` and histogram bin width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WtdSpec {
    pub tau_max: f64,
    pub tau_points: usize,
    pub bin_width: f64,
}

/// Fully resolved run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub scenario: Scenario,
    pub params: SimParams,
    pub detection: DetectionConfig,
    pub snapshot_times: Vec<f64>,
    pub record_every: usize,
    pub grid: GridSpec,
    pub wtd: WtdSpec,
    pub memory_cap_mb: u64,
    pub out: PathBuf,
}

struct Preset {
    g: f64,
    kappa: f64,
    gamma: f64,
    epsilon: f64,
    fock_cutoff: usize,
    t_final: f64,
    detection: DetectionMode,
    theta: f64,
    bandwidth: f64,
    snapshots: Vec<f64>,
    record_interval: f64,
    grid_half_width: f64,
    tau_max: f64,
}

fn preset(scenario: Scenario) -> Preset {
    match scenario {
        // Trajectories at ε = 300 leave more than 1e-6 in level 35 for a
        // few percent of the run time, hence cutoff 40.
        Scenario::Fig2 => Preset {
            g: 7.0,
            kappa: 1.0,
            gamma: 0.0,
            epsilon: 300.0,
            fock_cutoff: 40,
            t_final: 100.0,
            detection: DetectionMode::Homodyne,
            theta: 0.0,
            bandwidth: 0.0,
            snapshots: vec![60.0],
            record_interval: 0.01,
            grid_half_width: 6.0,
            tau_max: 5.0,
        },
        Scenario::Fig3 => Preset {
            g: 7.0,
            kappa: 1.0,
            gamma: 0.0,
            epsilon: 30.0,
            fock_cutoff: 35,
            t_final: 100.0,
            detection: DetectionMode::Homodyne,
            theta: 0.0,
            bandwidth: 0.5,
            snapshots: vec![15.200, 23.340, 54.890, 78.015, 84.570],
            record_interval: 0.01,
            grid_half_width: 6.0,
            tau_max: 5.0,
        },
        Scenario::Fig4 => Preset {
            g: 0.5,
            kappa: 1.0,
            gamma: 5.0,
            epsilon: 20.0,
            fock_cutoff: 20,
            t_final: 1e4,
            detection: DetectionMode::Heterodyne,
            theta: 0.0,
            bandwidth: 0.0,
            snapshots: Vec::new(),
            record_interval: 0.1,
            grid_half_width: 3.0,
            tau_max: 5.0,
        },
        Scenario::Custom => Preset {
            g: 0.0,
            kappa: 1.0,
            gamma: 0.0,
            epsilon: 0.0,
            fock_cutoff: 10,
            t_final: 10.0,
            detection: DetectionMode::Homodyne,
            theta: 0.0,
            bandwidth: 0.0,
            snapshots: Vec::new(),
            record_interval: 0.01,
            grid_half_width: 6.0,
            tau_max: 5.0,
        },
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

impl RunPlan {
    /// Applies `overrides` on top of the named scenario's defaults and
    /// validates the result. Errors name the offending key.
    pub fn resolve(overrides: &Overrides) -> Result<RunPlan> {
        let scenario = match &overrides.scenario {
            Some(s) => s.parse()?,
            None => Scenario::Custom,
        };
        let p = preset(scenario);
        let rates = JcRates {
            g: overrides.g.unwrap_or(p.g),
            kappa: overrides.kappa.unwrap_or(p.kappa),
            gamma: overrides.gamma.unwrap_or(p.gamma),
            epsilon: overrides.epsilon.unwrap_or(p.epsilon),
        };
        rates.validate()?;

        let dt = match overrides.dt {
            Some(dt) => positive("dt", dt)?,
            None => rates.max_stable_dt(),
        };
        check_step(&rates, dt)?;
        let t_final = positive("tfinal", overrides.tfinal.unwrap_or(p.t_final))?;
        if t_final < dt {
            return Err(Error::invalid("tfinal", "shorter than one time step"));
        }
        let fock_cutoff = overrides.fock_cutoff.unwrap_or(p.fock_cutoff);
        if fock_cutoff == 0 {
            return Err(Error::invalid("fock-cutoff", "must be >= 1"));
        }
        let n_traj = overrides.ntraj.unwrap_or(1);
        if n_traj == 0 {
            return Err(Error::invalid("ntraj", "must be >= 1"));
        }

        let mode = match &overrides.detection {
            Some(m) => m.parse()?,
            None => p.detection,
        };
        let theta = match &overrides.theta {
            Some(t) => t.radians()?,
            None => p.theta,
        };
        let base = match mode {
            DetectionMode::Homodyne => DetectionConfig::homodyne(theta),
            DetectionMode::Heterodyne => DetectionConfig::heterodyne(),
            DetectionMode::None => DetectionConfig::none(),
        };
        let detection = base
            .with_bandwidth(overrides.bandwidth.unwrap_or(p.bandwidth))
            .with_counting(overrides.counting.unwrap_or(rates.gamma > 0.0));
        detection.validate(&rates)?;
        if detection.bandwidth * dt > 1.0 {
            return Err(Error::FilterUnstable {
                product: detection.bandwidth * dt,
            });
        }

        let mut snapshot_times = overrides.snapshots.clone().unwrap_or(p.snapshots);
        if let Some(&bad) = snapshot_times.iter().find(|&&t| !(t >= 0.0 && t <= t_final)) {
            return Err(Error::invalid("snapshots", format!("time {bad} outside [0, {t_final}]")));
        }
        snapshot_times.sort_by(f64::total_cmp);
        snapshot_times.dedup();

        let record_every = match overrides.record_every {
            Some(0) => return Err(Error::invalid("record-every", "must be >= 1")),
            Some(k) => k,
            None => ((p.record_interval / dt).round() as usize).max(1),
        };
        let half_width = positive("grid-half-width", overrides.grid_half_width.unwrap_or(p.grid_half_width))?;
        let points = overrides.grid_points.unwrap_or(201);
        if points < 2 {
            return Err(Error::invalid("grid-points", "must be >= 2"));
        }
        let tau_max = positive("tau-max", overrides.tau_max.unwrap_or(p.tau_max))?;
        let tau_points = overrides.tau_points.unwrap_or(2001);
        if tau_points < 2 {
            return Err(Error::invalid("tau-points", "must be >= 2"));
        }
        let bin_width = positive("bin-width", overrides.bin_width.unwrap_or(tau_max / 100.0))?;
        let memory_cap_mb = overrides.memory_cap_mb.unwrap_or(DEFAULT_MEMORY_CAP_MB);

        Ok(RunPlan {
            scenario,
            params: SimParams {
                g: rates.g,
                kappa: rates.kappa,
                gamma: rates.gamma,
                epsilon: rates.epsilon,
                fock_cutoff,
                dt,
                t_final,
                seed: overrides.seed.unwrap_or(0),
                n_traj,
            },
            detection,
            snapshot_times,
            record_every,
            grid: GridSpec::square(half_width, points),
            wtd: WtdSpec {
                tau_max,
                tau_points,
                bin_width,
            },
            memory_cap_mb,
            out: overrides.out.clone().unwrap_or_else(|| PathBuf::from("results")),
        })
    }
}
