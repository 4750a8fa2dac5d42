//! Stochastic unravelings of the master equation: Euler–Maruyama
//! integration of the linear stochastic Schrödinger equation driven by the
//! homodyne or heterodyne record, interleaved with photodetection jumps,
//! plus the first-order photocurrent filter.
//!
//! Per step the order is fixed: record observables, jump test, diffusive
//! step, renormalize.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    atom_ops, field_ops, jc_hamiltonian, top_fock_population, AtomLevel, Operator, PureState,
    SpaceDescriptor, I, ZERO,
};
use crate::lindblad::{JcRates, TRUNCATION_POPULATION};
use crate::sparse::SparseOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionMode {
    Homodyne,
    Heterodyne,
    None,
}

impl std::str::FromStr for DetectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homodyne" => Ok(DetectionMode::Homodyne),
            "heterodyne" => Ok(DetectionMode::Heterodyne),
            "none" => Ok(DetectionMode::None),
            other => Err(Error::invalid("detection", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub mode: DetectionMode,
    /// Local-oscillator phase in `[0, π)`; homodyne only.
    pub theta: f64,
    /// Photocurrent filter bandwidth `B`; `0` disables filtering.
    pub bandwidth: f64,
    /// Report side-detector clicks. Atomic jumps are simulated whenever
    /// `γ > 0` so that the ensemble still follows the master equation.
    pub atomic_counting: bool,
}

impl DetectionConfig {
    pub fn homodyne(theta: f64) -> Self {
        DetectionConfig {
            mode: DetectionMode::Homodyne,
            theta,
            bandwidth: 0.0,
            atomic_counting: false,
        }
    }

    pub fn heterodyne() -> Self {
        DetectionConfig {
            mode: DetectionMode::Heterodyne,
            theta: 0.0,
            bandwidth: 0.0,
            atomic_counting: false,
        }
    }

    pub fn none() -> Self {
        DetectionConfig {
            mode: DetectionMode::None,
            theta: 0.0,
            bandwidth: 0.0,
            atomic_counting: false,
        }
    }

    pub fn with_bandwidth(mut self, bandwidth: f64) -> Self {
        self.bandwidth = bandwidth;
        self
    }

    pub fn with_counting(mut self, on: bool) -> Self {
        self.atomic_counting = on;
        self
    }

    pub fn efficiency(&self) -> f64 {
        1.0
    }

    pub fn validate(&self, rates: &JcRates) -> Result<()> {
        if self.mode == DetectionMode::Homodyne
            && !(self.theta >= 0.0 && self.theta < std::f64::consts::PI)
        {
            return Err(Error::invalid("theta", format!("{} outside [0, pi)", self.theta)));
        }
        if !(self.bandwidth >= 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::invalid("bandwidth", "must be finite and >= 0"));
        }
        if self.atomic_counting && !(rates.gamma > 0.0) {
            return Err(Error::invalid("atomic_counting", "requires gamma > 0"));
        }
        Ok(())
    }
}

/// Operators used by the integrator. The no-jump drift
/// `−iH − κ a†a − (γ/2) σ₊σ₋` is applied by a banded kernel over the
/// field-major layout; `a` and `σ₋` are kept in compressed-row form.
#[derive(Clone, Debug)]
pub struct SseOperators {
    space: SpaceDescriptor,
    rates: JcRates,
    sqrt_n: Vec<f64>,
    a: SparseOperator,
    sigma_minus: SparseOperator,
}

impl SseOperators {
    pub fn new(space: &SpaceDescriptor, rates: &JcRates) -> Result<Self> {
        rates.validate()?;
        let (a, _) = field_ops(space);
        let (sm, _, _) = atom_ops(space);
        Ok(SseOperators {
            space: *space,
            rates: *rates,
            sqrt_n: (0..=space.field_dim()).map(|n| (n as f64).sqrt()).collect(),
            a: SparseOperator::from_dense(&a),
            sigma_minus: SparseOperator::from_dense(&sm),
        })
    }

    /// `out = K ψ` with
    /// `(Kψ)_{n,−} = −κn ψ_{n,−} + g√n ψ_{n−1,+} − iε ψ_{n,+}` and
    /// `(Kψ)_{n,+} = −(κn + γ/2) ψ_{n,+} − g√(n+1) ψ_{n+1,−} − iε ψ_{n,−}`.
    #[inline]
    fn apply_drift(&self, psi: &[C64], out: &mut [C64]) {
        let JcRates { g, kappa, gamma, epsilon } = self.rates;
        let m = self.space.field_dim();
        let minus_i_eps = C64::new(0.0, -epsilon);
        for n in 0..m {
            let lower = psi[2 * n];
            let upper = psi[2 * n + 1];
            let nf = n as f64;
            let mut out_lower = -kappa * nf * lower + minus_i_eps * upper;
            if n > 0 {
                out_lower += g * self.sqrt_n[n] * psi[2 * n - 1];
            }
            let mut out_upper = -(kappa * nf + 0.5 * gamma) * upper + minus_i_eps * lower;
            if n + 1 < m {
                out_upper -= g * self.sqrt_n[n + 1] * psi[2 * n + 2];
            }
            out[2 * n] = out_lower;
            out[2 * n + 1] = out_upper;
        }
    }

    /// `out = a ψ`, returning `⟨ψ|a|ψ⟩`.
    #[inline]
    fn apply_annihilation(&self, psi: &[C64], out: &mut [C64]) -> C64 {
        let m = self.space.field_dim();
        let mut mean = ZERO;
        for n in 0..m {
            for s in 0..2 {
                let v = if n + 1 < m { self.sqrt_n[n + 1] * psi[2 * n + 2 + s] } else { ZERO };
                out[2 * n + s] = v;
                mean += psi[2 * n + s].conj() * v;
            }
        }
        mean
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn rates(&self) -> &JcRates {
        &self.rates
    }
}

/// Dense no-jump drift `−iH − κa†a − (γ/2)σ₊σ₋`.
pub fn drift_operator(space: &SpaceDescriptor, rates: &JcRates) -> Operator {
    let (a, ad) = field_ops(space);
    let (sm, sp, _) = atom_ops(space);
    let h = jc_hamiltonian(space, rates.g, rates.epsilon);
    let damping = &ad.dot(&a).scale(C64::new(rates.kappa, 0.0)) + &sp.dot(&sm).scale(C64::new(0.5 * rates.gamma, 0.0));
    &h.scale(-I) - &damping
}

#[derive(Clone, Debug)]
struct Scratch {
    a_psi: Vec<C64>,
    next: Vec<C64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            a_psi: vec![ZERO; dim],
            next: vec![ZERO; dim],
        }
    }
}

const NORM_FLOOR: f64 = 1e-12;

/// One Euler–Maruyama step of `dψ = [K dt + c·a]ψ`, where `record` maps
/// `⟨a⟩` of the pre-step state to `(c, dq)`. Leaves `psi` normalized.
#[inline]
fn diffusive_step(
    ops: &SseOperators,
    psi: &mut Vec<C64>,
    scratch: &mut Scratch,
    dt: f64,
    record: impl FnOnce(C64) -> (C64, C64),
) -> Result<C64> {
    let mean_a = ops.apply_annihilation(psi, &mut scratch.a_psi);
    let (coupling, dq) = record(mean_a);
    ops.apply_drift(psi, &mut scratch.next);
    let mut norm_sq = 0.0;
    for ((n, p), ap) in scratch.next.iter_mut().zip(psi.iter()).zip(&scratch.a_psi) {
        *n = p + *n * dt + coupling * ap;
        norm_sq += n.norm_sqr();
    }
    let norm = norm_sq.sqrt();
    if !(norm > NORM_FLOOR) || !norm.is_finite() {
        return Err(Error::NormCollapse { norm });
    }
    let inv = 1.0 / norm;
    for n in scratch.next.iter_mut() {
        *n *= inv;
    }
    std::mem::swap(psi, &mut scratch.next);
    Ok(dq)
}

fn homodyne_record(kappa: f64, theta: f64, dt: f64, dw: f64) -> impl FnOnce(C64) -> (C64, C64) {
    move |mean_a: C64| {
        let phase = C64::from_polar(1.0, -theta);
        // ⟨𝒜_θ⟩ = Re(e^{−iθ}⟨a⟩)
        let quadrature = (phase * mean_a).re;
        let dq = (8.0 * kappa).sqrt() * quadrature * dt + dw;
        ((2.0 * kappa).sqrt() * phase * dq, C64::new(dq, 0.0))
    }
}

fn heterodyne_record(kappa: f64, dt: f64, dz: C64) -> impl FnOnce(C64) -> (C64, C64) {
    move |mean_a: C64| {
        let dq = (2.0 * kappa).sqrt() * mean_a.conj() * dt + dz;
        ((2.0 * kappa).sqrt() * dq, dq)
    }
}

fn check_state(ops: &SseOperators, state: &PureState) -> Result<()> {
    let d = ops.space.composite_dim();
    if state.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: state.dim(),
        });
    }
    Ok(())
}

fn step_public(
    state: &mut PureState,
    ops: &SseOperators,
    dt: f64,
    record: impl FnOnce(C64) -> (C64, C64),
) -> Result<C64> {
    check_state(ops, state)?;
    let mut psi = state.amplitudes().to_vec();
    let mut scratch = Scratch::new(psi.len());
    let dq = diffusive_step(ops, &mut psi, &mut scratch, dt, record)?;
    *state = PureState::from_amplitudes(psi.into());
    Ok(dq)
}

/// Homodyne step. `noise` is the Wiener increment `dW ~ N(0, dt)`; returns
/// the charge increment `dq_θ = √(8κ)⟨𝒜_θ⟩dt + dW` of the pre-step state.
pub fn sse_step_homodyne(
    state: &mut PureState,
    ops: &SseOperators,
    theta: f64,
    dt: f64,
    noise: f64,
) -> Result<f64> {
    let kappa = ops.rates.kappa;
    Ok(step_public(state, ops, dt, homodyne_record(kappa, theta, dt, noise))?.re)
}

/// Heterodyne step. `noise` is `dZ` with independent real and imaginary
/// parts of variance `dt/2`; returns `dq = √(2κ)⟨a†⟩dt + dZ`.
pub fn sse_step_heterodyne(state: &mut PureState, ops: &SseOperators, dt: f64, noise: C64) -> Result<C64> {
    let kappa = ops.rates.kappa;
    step_public(state, ops, dt, heterodyne_record(kappa, dt, noise))
}

fn excited_population(psi: &[C64]) -> f64 {
    psi.iter().skip(AtomLevel::Upper.index()).step_by(2).map(|z| z.norm_sqr()).sum()
}

fn photon_number(psi: &[C64]) -> f64 {
    psi.iter().enumerate().map(|(i, z)| (i / 2) as f64 * z.norm_sqr()).sum()
}

fn apply_jump(op: &SparseOperator, psi: &mut Vec<C64>, scratch: &mut Scratch) -> Result<()> {
    op.apply_into(psi, &mut scratch.next);
    let norm = scratch.next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroVector);
    }
    for z in scratch.next.iter_mut() {
        *z /= norm;
    }
    std::mem::swap(psi, &mut scratch.next);
    Ok(())
}

/// Atomic photodetection: with probability `γ⟨σ₊σ₋⟩dt` (tested against
/// `uniform_draw`) the state jumps to `σ₋|ψ⟩` (renormalized).
pub fn maybe_collapse(
    state: &mut PureState,
    ops: &SseOperators,
    gamma: f64,
    dt: f64,
    uniform_draw: f64,
) -> Result<bool> {
    check_state(ops, state)?;
    let p = gamma * excited_population(state.amplitudes().as_slice().expect("contiguous")) * dt;
    if !(uniform_draw < p) {
        return Ok(false);
    }
    let mut psi = state.amplitudes().to_vec();
    let mut scratch = Scratch::new(psi.len());
    apply_jump(&ops.sigma_minus, &mut psi, &mut scratch)?;
    *state = PureState::from_amplitudes(psi.into());
    Ok(true)
}

/// Online form of the filter `di = −B(i dt − dq)`.
#[derive(Clone, Copy, Debug)]
pub struct PhotocurrentFilter {
    bandwidth: f64,
    dt: f64,
    current: C64,
}

impl PhotocurrentFilter {
    pub fn new(bandwidth: f64, dt: f64) -> Result<Self> {
        if !(bandwidth >= 0.0) {
            return Err(Error::invalid("bandwidth", "must be >= 0"));
        }
        let product = bandwidth * dt;
        if product > 1.0 {
            return Err(Error::FilterUnstable { product });
        }
        Ok(PhotocurrentFilter {
            bandwidth,
            dt,
            current: ZERO,
        })
    }

    #[inline]
    pub fn push(&mut self, dq: C64) -> C64 {
        self.current += self.bandwidth * (dq - self.current * self.dt);
        self.current
    }

    pub fn current(&self) -> C64 {
        self.current
    }
}

/// `i_{n+1} = i_n + B(dq_n − i_n dt)`, `i_0 = 0`. Returns `len + 1` samples.
pub fn filter_photocurrent(dq_series: &[C64], dt: f64, bandwidth: f64) -> Result<Vec<C64>> {
    let mut filter = PhotocurrentFilter::new(bandwidth, dt)?;
    let mut out = Vec::with_capacity(dq_series.len() + 1);
    out.push(ZERO);
    out.extend(dq_series.iter().map(|&dq| filter.push(dq)));
    Ok(out)
}

/// Random numbers consumed by one step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepDraws {
    /// Uniform draws for the atomic and cavity jump tests.
    pub jumps: [f64; 2],
    /// Real part: `dW` (homodyne) or `Re dZ`; imaginary part: `Im dZ`.
    pub increment: C64,
}

pub trait IncrementSource {
    fn draw(&mut self, dt: f64, mode: DetectionMode) -> StepDraws;
}

/// ChaCha8 stream seeded per trajectory.
pub struct SeededIncrements {
    rng: ChaCha8Rng,
}

impl SeededIncrements {
    pub fn new(seed: u64) -> Self {
        SeededIncrements {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl IncrementSource for SeededIncrements {
    #[inline]
    fn draw(&mut self, dt: f64, mode: DetectionMode) -> StepDraws {
        let jumps = [self.rng.random::<f64>(), self.rng.random::<f64>()];
        let increment = match mode {
            DetectionMode::Homodyne => {
                let n: f64 = self.rng.sample(StandardNormal);
                C64::new(n * dt.sqrt(), 0.0)
            }
            DetectionMode::Heterodyne => {
                let s = (0.5 * dt).sqrt();
                let re: f64 = self.rng.sample(StandardNormal);
                let im: f64 = self.rng.sample(StandardNormal);
                C64::new(re * s, im * s)
            }
            DetectionMode::None => ZERO,
        };
        StepDraws { jumps, increment }
    }
}

/// Coarsened view of another source: each coarse step of size `dt`
/// consumes two fine steps of size `dt/2` and sums their increments.
pub struct PairedIncrements<S> {
    inner: S,
}

impl<S: IncrementSource> PairedIncrements<S> {
    pub fn new(inner: S) -> Self {
        PairedIncrements { inner }
    }
}

impl<S: IncrementSource> IncrementSource for PairedIncrements<S> {
    fn draw(&mut self, dt: f64, mode: DetectionMode) -> StepDraws {
        let first = self.inner.draw(0.5 * dt, mode);
        let second = self.inner.draw(0.5 * dt, mode);
        StepDraws {
            jumps: first.jumps,
            increment: first.increment + second.increment,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    pub snapshot_times: Vec<f64>,
    /// Record every `record_every`-th step (1 keeps all steps).
    pub record_every: usize,
}

impl TrajectoryConfig {
    pub fn new(t_final: f64, dt: f64, seed: u64) -> Self {
        TrajectoryConfig {
            t_final,
            dt,
            seed,
            snapshot_times: Vec::new(),
            record_every: 1,
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub state: PureState,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub bloch: Vec<[f64; 3]>,
    pub field_mean: Vec<C64>,
    /// Charge accumulated since the previous recorded row.
    pub dq_raw: Vec<C64>,
    pub photocurrent: Vec<C64>,
    /// 1 if at least one atomic click happened since the previous row.
    pub click_flags: Vec<u8>,
    /// Times of all atomic clicks at full resolution (reported only with
    /// atomic counting on).
    pub clicks: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub seed: u64,
    pub norm_check: f64,
    pub max_top_population: f64,
    /// Cavity-emission jumps (mode `none` only).
    pub cavity_jumps: usize,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn x(&self) -> impl Iterator<Item = f64> + '_ {
        self.bloch.iter().map(|b| b[0])
    }

    pub fn waiting_times(&self) -> Vec<f64> {
        self.clicks.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn snapshot_at(&self, time: f64) -> Option<&PureState> {
        self.snapshots
            .iter()
            .find(|s| (s.time - time).abs() < 1e-9)
            .map(|s| &s.state)
    }
}

/// `(X, Y, Z)` from the amplitude vector: `X − iY = 2⟨σ₋⟩`, `Z = ⟨σ_z⟩`.
#[inline]
pub(crate) fn bloch_from_amplitudes(psi: &[C64]) -> [f64; 3] {
    let mut coherence = ZERO;
    let mut z = 0.0;
    for pair in psi.chunks_exact(2) {
        let (lower, upper) = (pair[0], pair[1]);
        coherence += lower.conj() * upper;
        z += upper.norm_sqr() - lower.norm_sqr();
    }
    [2.0 * coherence.re, -2.0 * coherence.im, z]
}

struct Engine<'a> {
    ops: &'a SseOperators,
    detection: DetectionConfig,
    psi: Vec<C64>,
    scratch: Scratch,
    filter: PhotocurrentFilter,
}

impl<'a> Engine<'a> {
    fn step(&mut self, dt: f64, draws: &StepDraws, t: f64, clicked: &mut bool, cavity_jumps: &mut usize) -> Result<C64> {
        let rates = self.ops.rates;
        if rates.gamma > 0.0 {
            let p = rates.gamma * excited_population(&self.psi) * dt;
            if draws.jumps[0] < p {
                apply_jump(&self.ops.sigma_minus, &mut self.psi, &mut self.scratch)?;
                *clicked = true;
            }
        }
        if self.detection.mode == DetectionMode::None && rates.kappa > 0.0 {
            let p = 2.0 * rates.kappa * photon_number(&self.psi) * dt;
            if draws.jumps[1] < p {
                apply_jump(&self.ops.a, &mut self.psi, &mut self.scratch)?;
                *cavity_jumps += 1;
            }
        }
        let kappa = rates.kappa;
        let dq = match self.detection.mode {
            DetectionMode::Homodyne => diffusive_step(
                self.ops,
                &mut self.psi,
                &mut self.scratch,
                dt,
                homodyne_record(kappa, self.detection.theta, dt, draws.increment.re),
            )?,
            DetectionMode::Heterodyne => diffusive_step(
                self.ops,
                &mut self.psi,
                &mut self.scratch,
                dt,
                heterodyne_record(kappa, dt, draws.increment),
            )?,
            DetectionMode::None => diffusive_step(self.ops, &mut self.psi, &mut self.scratch, dt, |_| (ZERO, ZERO))?,
        };
        self.filter.push(dq);
        let top = top_fock_population(&self.ops.space, &self.psi);
        if top > TRUNCATION_POPULATION {
            return Err(Error::TruncationExceeded {
                population: top,
                time: t + dt,
            });
        }
        Ok(dq)
    }
}

/// Integrates one trajectory from `|0⟩|−⟩` with an explicit noise source.
pub fn run_trajectory_with<S: IncrementSource>(
    ops: &SseOperators,
    detection: &DetectionConfig,
    config: &TrajectoryConfig,
    source: &mut S,
) -> Result<TrajectoryRecord> {
    detection.validate(&ops.rates)?;
    let dt = config.dt;
    if !(dt > 0.0) || !(config.t_final >= 0.0) {
        return Err(Error::invalid("dt", "need dt > 0 and t_final >= 0"));
    }
    let bandwidth = if detection.mode == DetectionMode::None { 0.0 } else { detection.bandwidth };
    let mut engine = Engine {
        ops,
        detection: *detection,
        psi: PureState::ground(&ops.space).amplitudes().to_vec(),
        scratch: Scratch::new(ops.space.composite_dim()),
        filter: PhotocurrentFilter::new(bandwidth, dt)?,
    };
    let steps = config.steps();
    let every = config.record_every.max(1);
    let mut snapshot_steps: Vec<(usize, f64)> = config
        .snapshot_times
        .iter()
        .map(|&t| ((t / dt).round() as usize, t))
        .filter(|(k, _)| *k <= steps)
        .collect();
    snapshot_steps.sort_by_key(|(k, _)| *k);
    let mut next_snapshot = 0;

    let rows = steps / every + 2;
    let mut record = TrajectoryRecord {
        seed: config.seed,
        times: Vec::with_capacity(rows),
        bloch: Vec::with_capacity(rows),
        field_mean: Vec::with_capacity(rows),
        dq_raw: Vec::with_capacity(rows),
        photocurrent: Vec::with_capacity(rows),
        click_flags: Vec::with_capacity(rows),
        ..Default::default()
    };
    let mut dq_acc = ZERO;
    let mut clicked_since_row = false;
    let mut cavity_jumps = 0;

    for k in 0..=steps {
        let t = k as f64 * dt;
        if k % every == 0 || k == steps {
            let psi = &engine.psi;
            record.times.push(t);
            record.bloch.push(bloch_from_amplitudes(psi));
            record.field_mean.push(engine.ops.apply_annihilation(psi, &mut engine.scratch.a_psi));
            record.dq_raw.push(dq_acc);
            record.photocurrent.push(engine.filter.current());
            record.click_flags.push(clicked_since_row as u8);
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            record.norm_check = record.norm_check.max((norm - 1.0).abs());
            record.max_top_population = record.max_top_population.max(top_fock_population(&ops.space, psi));
            dq_acc = ZERO;
            clicked_since_row = false;
        }
        while next_snapshot < snapshot_steps.len() && snapshot_steps[next_snapshot].0 == k {
            record.snapshots.push(Snapshot {
                time: snapshot_steps[next_snapshot].1,
                state: PureState::from_amplitudes(engine.psi.clone().into()),
            });
            next_snapshot += 1;
        }
        if k == steps {
            break;
        }
        let draws = source.draw(dt, detection.mode);
        let mut clicked = false;
        dq_acc += engine.step(dt, &draws, t, &mut clicked, &mut cavity_jumps)?;
        if clicked {
            clicked_since_row = true;
            if detection.atomic_counting {
                record.clicks.push(t);
            }
        }
    }
    if !detection.atomic_counting {
        record.click_flags.iter_mut().for_each(|c| *c = 0);
    }
    record.cavity_jumps = cavity_jumps;
    Ok(record)
}

/// Checks the step-size bound `dt ≤ min(0.01/(2ε), 0.01/γ, 0.002/κ)`.
pub fn check_step(rates: &JcRates, dt: f64) -> Result<()> {
    let bound = rates.max_stable_dt();
    if dt > bound * (1.0 + 1e-9) {
        return Err(Error::invalid("dt", format!("{dt} exceeds the stability bound {bound}")));
    }
    Ok(())
}

pub fn run_trajectory(
    space: &SpaceDescriptor,
    rates: &JcRates,
    detection: &DetectionConfig,
    config: &TrajectoryConfig,
) -> Result<TrajectoryRecord> {
    check_step(rates, config.dt)?;
    let ops = SseOperators::new(space, rates)?;
    run_trajectory_with(&ops, detection, config, &mut SeededIncrements::new(config.seed))
}

/// Runs one trajectory per seed in parallel; output is in seed order and
/// each record depends only on its own seed.
pub fn run_ensemble(
    space: &SpaceDescriptor,
    rates: &JcRates,
    detection: &DetectionConfig,
    base: &TrajectoryConfig,
    seeds: &[u64],
) -> Result<Vec<TrajectoryRecord>> {
    check_step(rates, base.dt)?;
    let ops = SseOperators::new(space, rates)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let config = TrajectoryConfig { seed, ..base.clone() };
            run_trajectory_with(&ops, detection, &config, &mut SeededIncrements::new(seed))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attractor {
    Plus,
    Minus,
    Unresolved,
}

/// Time-average of `X` over the final `window` of the record, then
/// thresholded at `±0.9`.
pub fn classify_attractor(record: &TrajectoryRecord, window: f64) -> (Attractor, f64) {
    let t_end = record.times.last().copied().unwrap_or(0.0);
    let (sum, count) = record
        .times
        .iter()
        .zip(&record.bloch)
        .filter(|(t, _)| **t >= t_end - window)
        .fold((0.0, 0usize), |(s, c), (_, b)| (s + b[0], c + 1));
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    let label = if mean > 0.9 {
        Attractor::Plus
    } else if mean < -0.9 {
        Attractor::Minus
    } else {
        Attractor::Unresolved
    };
    (label, mean)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dwell {
    pub start: f64,
    pub end: f64,
    pub sign: i8,
    /// Bounded by confirmed switches on both sides.
    pub complete: bool,
}

impl Dwell {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Segments a two-state signal with hysteresis at `±threshold`. Excursions
/// to the opposite state shorter than `min_dwell` are absorbed into the
/// surrounding dwell.
pub fn dwell_segments(times: &[f64], signal: &[f64], threshold: f64, min_dwell: f64) -> Vec<Dwell> {
    let mut raw: Vec<(f64, i8)> = Vec::new();
    let mut state = 0i8;
    for (&t, &v) in times.iter().zip(signal) {
        let next = if v > threshold {
            1
        } else if v < -threshold {
            -1
        } else {
            state
        };
        if next != state {
            raw.push((t, next));
            state = next;
        }
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    let mut dwells: Vec<Dwell> = Vec::new();
    for (k, &(start, sign)) in raw.iter().enumerate() {
        let end = raw.get(k + 1).map_or(t_end, |r| r.0);
        let is_last = k + 1 == raw.len();
        match dwells.last_mut() {
            Some(current) if current.sign == sign => current.end = end,
            Some(current) if end - start < min_dwell && !is_last => current.end = end,
            _ => {
                if let Some(current) = dwells.last_mut() {
                    current.end = start;
                }
                dwells.push(Dwell {
                    start,
                    end,
                    sign,
                    complete: false,
                });
            }
        }
    }
    let n = dwells.len();
    for (k, d) in dwells.iter_mut().enumerate() {
        d.complete = k > 0 && k + 1 < n;
    }
    dwells
}
