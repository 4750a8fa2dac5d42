use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::output::{
    num, write_clicks, write_histogram, write_trajectory, write_wigner, write_wtd, FileEntry, FileKind, Invariants,
    Manifest, RecordEntry, SteadyStateSummary,
};
use super::RunPlan;
use crate::error::{Error, Result};
use crate::hilbert::{atom_ops, build_space, expectation, field_ops, top_fock_population_dm, DensityMatrix, SpaceDescriptor};
use crate::lindblad::{
    residual, steady_state, uniform_grid, waiting_time_density_from, Liouvillian, Superoperator, WaitingTimeDensity,
};
use crate::phase_space::{bloch_coords, histogram, reduced_field, wigner, WignerGrid};
use crate::trajectories::{classify_attractor, run_ensemble, Attractor, TrajectoryConfig, TrajectoryRecord};

#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub records: Vec<TrajectoryRecord>,
    pub steady_state: Option<DensityMatrix>,
    pub wtd: Option<WaitingTimeDensity>,
}

pub fn summary_header() -> [&'static str; 11] {
    [
        "seed",
        "final_X",
        "final_Y",
        "final_Z",
        "window_X",
        "attractor",
        "clicks",
        "mean_wait",
        "cavity_jumps",
        "norm_drift",
        "max_top_population",
    ]
}

/// Collects outputs while a command runs.
struct Session<'a> {
    plan: &'a RunPlan,
    command: &'static str,
    started: Instant,
    files: Vec<FileEntry>,
    records: Vec<RecordEntry>,
    wigner_normalization: BTreeMap<String, f64>,
    steady_state: Option<SteadyStateSummary>,
    warnings: Vec<String>,
    invariants: Invariants,
}

impl<'a> Session<'a> {
    fn open(plan: &'a RunPlan, command: &'static str) -> Result<Self> {
        std::fs::create_dir_all(&plan.out)?;
        Ok(Session {
            plan,
            command,
            started: Instant::now(),
            files: Vec::new(),
            records: Vec::new(),
            wigner_normalization: BTreeMap::new(),
            steady_state: None,
            warnings: Vec::new(),
            invariants: Invariants::default(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.plan.out.join(name)
    }

    fn add(&mut self, name: String, kind: FileKind) {
        self.files.push(FileEntry { name, kind });
    }

    fn wigner(&mut self, label: &str, grid: &WignerGrid) -> Result<()> {
        let name = format!("wigner_{label}.csv");
        write_wigner(&self.path(&name), grid)?;
        if grid.boundary_warning {
            self.warnings.push(format!("{name}: Wigner function not negligible at the grid boundary"));
        }
        self.wigner_normalization.insert(name.clone(), grid.integral());
        self.add(name, FileKind::Wigner);
        Ok(())
    }

    fn finish(self) -> Result<Manifest> {
        let plan = self.plan;
        let manifest = Manifest {
            program: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.to_string(),
            scenario: plan.scenario,
            params: plan.params,
            detection: plan.detection,
            snapshot_times: plan.snapshot_times.clone(),
            record_every: plan.record_every,
            grid: plan.grid,
            wtd: plan.wtd,
            seeds: self.records.iter().map(|r| r.seed).collect(),
            records: self.records,
            files: self.files,
            steady_state: self.steady_state,
            wigner_normalization: self.wigner_normalization,
            invariants: self.invariants,
            warnings: self.warnings,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        manifest.write(&plan.out)?;
        Ok(manifest)
    }
}

/// Refuses plans whose dense superoperator would exceed the memory cap.
fn preflight(plan: &RunPlan) -> Result<SpaceDescriptor> {
    let space = build_space(plan.params.fock_cutoff)?;
    let needed = Superoperator::memory_estimate(&space);
    let cap = plan.memory_cap_mb.saturating_mul(1 << 20);
    if needed > cap {
        return Err(Error::ResourceLimit(format!(
            "dense superoperator for fock cutoff {} needs {} MiB, cap is {} MiB",
            plan.params.fock_cutoff,
            needed >> 20,
            plan.memory_cap_mb
        )));
    }
    Ok(space)
}

fn summarize(space: &SpaceDescriptor, l: &Liouvillian, rho: &DensityMatrix) -> Result<SteadyStateSummary> {
    let (a, ad) = field_ops(space);
    let (sm, sp, _) = atom_ops(space);
    let mean_a = expectation(rho, &a)?;
    let (x, y, z) = bloch_coords(space, rho)?;
    Ok(SteadyStateSummary {
        residual: residual(l, rho),
        trace: rho.trace().re,
        hermiticity_error: rho.hermiticity_error(),
        min_eigenvalue: rho.min_eigenvalue()?,
        top_population: top_fock_population_dm(space, rho.entries()),
        field_mean: [mean_a.re, mean_a.im],
        photon_number: expectation(rho, &ad.dot(&a))?.re,
        bloch: [x, y, z],
        excited_population: expectation(rho, &sp.dot(&sm))?.re,
    })
}

/// Steady state, or `None` with a warning when the null space of the
/// generator is degenerate (e.g. an undamped, undriven atom).
fn solve_steady_state(
    session: &mut Session,
    space: &SpaceDescriptor,
    l: &Liouvillian,
) -> Result<Option<DensityMatrix>> {
    let rho = match steady_state(&l.superoperator()) {
        Ok(rho) => rho,
        Err(Error::DegenerateNullSpace) => {
            session
                .warnings
                .push("steady state not unique for these rates; steady-state outputs skipped".into());
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    session.steady_state = Some(summarize(space, l, &rho)?);
    Ok(Some(rho))
}

fn steady_wigner(session: &mut Session, space: &SpaceDescriptor, rho: &DensityMatrix) -> Result<()> {
    let grid = wigner(&reduced_field(space, rho)?, &session.plan.grid)?;
    session.wigner("ss", &grid)
}

fn compute_wtd(session: &mut Session, l: &Liouvillian, rho: &DensityMatrix) -> Result<WaitingTimeDensity> {
    let plan = session.plan;
    let rates = plan.params.rates();
    let grid = uniform_grid(plan.wtd.tau_max, plan.wtd.tau_points);
    let wtd = waiting_time_density_from(l, rho, rates.gamma, &grid, rates.max_stable_dt())?;
    write_wtd(&session.path("wtd.csv"), &wtd)?;
    session.add("wtd.csv".into(), FileKind::Wtd);
    if wtd.norm_captured < 0.99 {
        session.warnings.push(format!(
            "waiting-time grid captures only {:.4} of the density; raise tau-max",
            wtd.norm_captured
        ));
    }
    Ok(wtd)
}

fn attractor_code(a: Attractor) -> i8 {
    match a {
        Attractor::Plus => 1,
        Attractor::Minus => -1,
        Attractor::Unresolved => 0,
    }
}

fn write_summary(path: &Path, plan: &RunPlan, records: &[TrajectoryRecord]) -> Result<()> {
    let window = (0.5 * plan.params.t_final).min(10.0);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(summary_header())?;
    for r in records {
        let [x, y, z] = r.bloch.last().copied().unwrap_or([f64::NAN; 3]);
        let (attractor, window_x) = classify_attractor(r, window);
        let waits = r.waiting_times();
        let mean_wait = if waits.is_empty() {
            f64::NAN
        } else {
            waits.iter().sum::<f64>() / waits.len() as f64
        };
        w.write_record([
            r.seed.to_string(),
            num(x),
            num(y),
            num(z),
            num(window_x),
            attractor_code(attractor).to_string(),
            r.clicks.len().to_string(),
            num(mean_wait),
            r.cavity_jumps.to_string(),
            num(r.norm_check),
            num(r.max_top_population),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn persist_record(session: &mut Session, space: &SpaceDescriptor, record: &TrajectoryRecord) -> Result<()> {
    let plan = session.plan;
    let seed = record.seed;
    let trajectory = format!("trajectory_{seed}.csv");
    write_trajectory(&session.path(&trajectory), record)?;
    session.add(trajectory.clone(), FileKind::Trajectory);

    let clicks = if plan.detection.atomic_counting {
        let name = format!("clicks_{seed}.csv");
        write_clicks(&session.path(&name), &record.clicks)?;
        session.add(name.clone(), FileKind::Clicks);
        let waits = record.waiting_times();
        if !waits.is_empty() {
            let hist = histogram(&waits, plan.wtd.bin_width, (0.0, plan.wtd.tau_max))?;
            let name = format!("histogram_{seed}.csv");
            write_histogram(&session.path(&name), &hist)?;
            session.add(name, FileKind::Histogram);
        }
        Some(name)
    } else {
        None
    };

    for snap in &record.snapshots {
        let grid = wigner(&reduced_field(space, &snap.state)?, &plan.grid)?;
        session.wigner(&format!("seed{seed}_t{:.3}", snap.time), &grid)?;
    }

    session.invariants.max_norm_drift = session.invariants.max_norm_drift.max(record.norm_check);
    session.invariants.max_top_population = session.invariants.max_top_population.max(record.max_top_population);
    session.records.push(RecordEntry {
        seed,
        trajectory,
        clicks,
        params: plan.params,
        rows: record.len(),
        n_clicks: record.clicks.len(),
        cavity_jumps: record.cavity_jumps,
        norm_drift: record.norm_check,
        max_top_population: record.max_top_population,
    });
    Ok(())
}

/// Executes a full scenario: steady state and its Wigner function, the
/// waiting-time density when `γ > 0`, then the seeded trajectory ensemble
/// with snapshot Wigner functions, and finally the summary and manifest.
pub fn run_scenario(plan: &RunPlan) -> Result<ScenarioResult> {
    let space = preflight(plan)?;
    let mut session = Session::open(plan, "run")?;
    let rates = plan.params.rates();
    let l = Liouvillian::jaynes_cummings(&space, &rates)?;

    let rho_ss = solve_steady_state(&mut session, &space, &l)?;
    let mut wtd = None;
    if let Some(rho) = &rho_ss {
        steady_wigner(&mut session, &space, rho)?;
        if rates.gamma > 0.0 {
            wtd = Some(compute_wtd(&mut session, &l, rho)?);
        }
    }

    let base = TrajectoryConfig::new(plan.params.t_final, plan.params.dt, plan.params.seed)
        .with_snapshots(plan.snapshot_times.clone())
        .with_record_every(plan.record_every);
    let records = run_ensemble(&space, &rates, &plan.detection, &base, &plan.params.seeds())?;
    for record in &records {
        persist_record(&mut session, &space, record)?;
    }
    write_summary(&session.path("summary.csv"), plan, &records)?;
    session.add("summary.csv".into(), FileKind::Summary);

    let manifest = session.finish()?;
    Ok(ScenarioResult {
        out_dir: plan.out.clone(),
        manifest,
        records,
        steady_state: rho_ss,
        wtd,
    })
}

fn deterministic_only(plan: &RunPlan, command: &'static str, wants_wigner: bool, wants_wtd: bool) -> Result<ScenarioResult> {
    let space = preflight(plan)?;
    let rates = plan.params.rates();
    if wants_wtd && !(rates.gamma > 0.0) {
        return Err(Error::invalid("gamma", "waiting times need gamma > 0"));
    }
    let mut session = Session::open(plan, command)?;
    let l = Liouvillian::jaynes_cummings(&space, &rates)?;
    let rho = solve_steady_state(&mut session, &space, &l)?.ok_or(Error::DegenerateNullSpace)?;
    if let Some(summary) = &session.steady_state {
        let mut w = BufWriter::new(File::create(session.path("steady_state.json"))?);
        serde_json::to_writer_pretty(&mut w, summary)?;
        writeln!(w)?;
        session.add("steady_state.json".into(), FileKind::SteadyState);
    }
    if wants_wigner {
        steady_wigner(&mut session, &space, &rho)?;
    }
    let wtd = if wants_wtd {
        Some(compute_wtd(&mut session, &l, &rho)?)
    } else {
        None
    };
    let manifest = session.finish()?;
    Ok(ScenarioResult {
        out_dir: plan.out.clone(),
        manifest,
        records: Vec::new(),
        steady_state: Some(rho),
        wtd,
    })
}

/// Steady state and its diagnostics (`steady_state.json`).
pub fn run_steady_state(plan: &RunPlan) -> Result<ScenarioResult> {
    deterministic_only(plan, "steady-state", false, false)
}

/// Steady-state field Wigner function (`wigner_ss.csv`).
pub fn run_wigner(plan: &RunPlan) -> Result<ScenarioResult> {
    deterministic_only(plan, "wigner", true, false)
}

/// Atomic-click waiting-time density (`wtd.csv`).
pub fn run_wtd(plan: &RunPlan) -> Result<ScenarioResult> {
    deterministic_only(plan, "wtd", false, true)
}
