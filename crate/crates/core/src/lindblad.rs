//! Master-equation layer: the Liouvillian of the driven Jaynes–Cummings
//! system with cavity decay and atomic spontaneous emission, its steady
//! state, fixed-step time evolution, and exclusive waiting-time densities of
//! the atomic photodetection channel.
//!
//! Vectorization is column stacking: `vec(ρ)[i + j·d] = ρ[i, j]`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{FactorizeInto, ReciprocalConditionNum, Solve};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    atom_ops, field_ops, jc_hamiltonian, top_fock_population_dm, DensityMatrix, Operator,
    SpaceDescriptor, I, ONE, ZERO,
};
use crate::sparse::SparseOperator;

/// Physical rates in units of κ (κ itself is kept explicit so that the
/// formulas read naturally).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JcRates {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl JcRates {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("g", self.g),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("epsilon", self.epsilon),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("rate must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Largest step admitted by the fixed-step integrators:
    /// `min(0.01/(2ε), 0.01/γ, 0.002/κ)`.
    pub fn max_stable_dt(&self) -> f64 {
        let mut dt = f64::INFINITY;
        if self.epsilon > 0.0 {
            dt = dt.min(0.01 / (2.0 * self.epsilon));
        }
        if self.gamma > 0.0 {
            dt = dt.min(0.01 / self.gamma);
        }
        if self.kappa > 0.0 {
            dt = dt.min(0.002 / self.kappa);
        }
        if dt.is_infinite() {
            0.002
        } else {
            dt
        }
    }
}

#[derive(Clone, Debug)]
struct Channel {
    op: Operator,
    sparse: SparseOperator,
    /// Whether the `L ρ L†` term is kept. Excluded channels retain only the
    /// anticommutator part, which yields the no-jump generator.
    recycled: bool,
}

/// Lindblad generator in operator form.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    space: SpaceDescriptor,
    hamiltonian: Operator,
    channels: Vec<Channel>,
    /// `K = −iH − ½ Σ L†L`
    drift: SparseOperator,
}

pub const CAVITY_CHANNEL: usize = 0;
pub const ATOMIC_CHANNEL: usize = 1;

impl Liouvillian {
    pub fn new(space: SpaceDescriptor, hamiltonian: Operator, collapse: Vec<Operator>) -> Result<Self> {
        let d = space.composite_dim();
        if hamiltonian.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: hamiltonian.dim(),
            });
        }
        let mut k = hamiltonian.scale(-I);
        let mut channels = Vec::with_capacity(collapse.len());
        for op in collapse {
            if op.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: op.dim(),
                });
            }
            k = &k - &op.adjoint().dot(&op).scale(C64::new(0.5, 0.0));
            channels.push(Channel {
                sparse: SparseOperator::from_dense(&op),
                op,
                recycled: true,
            });
        }
        Ok(Liouvillian {
            space,
            hamiltonian,
            channels,
            drift: SparseOperator::from_dense(&k),
        })
    }

    /// Channels are ordered `[√(2κ) a, √γ σ₋]`.
    pub fn jaynes_cummings(space: &SpaceDescriptor, rates: &JcRates) -> Result<Self> {
        rates.validate()?;
        let h = jc_hamiltonian(space, rates.g, rates.epsilon);
        let (a, _) = field_ops(space);
        let (sm, _, _) = atom_ops(space);
        let collapse = vec![
            a.scale(C64::new((2.0 * rates.kappa).sqrt(), 0.0)),
            sm.scale(C64::new(rates.gamma.sqrt(), 0.0)),
        ];
        Liouvillian::new(*space, h, collapse)
    }

    /// Copy of `self` with the recycling term of `channel` removed.
    pub fn without_recycling(&self, channel: usize) -> Result<Self> {
        if channel >= self.channels.len() {
            return Err(Error::invalid("channel", format!("index {channel} out of range")));
        }
        let mut out = self.clone();
        out.channels[channel].recycled = false;
        Ok(out)
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn collapse_op(&self, channel: usize) -> &Operator {
        &self.channels[channel].op
    }

    /// `ℒρ = Kρ + ρK† + Σ_recycled LρL†` using the sparse factors.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros(rho.raw_dim());
        self.drift.left_mul_add(rho, &mut out);
        // ρK† = (Kρ†)†
        let rho_dag = adjoint(rho);
        let mut k_rho_dag = Array2::zeros(rho.raw_dim());
        self.drift.left_mul_add(&rho_dag, &mut k_rho_dag);
        out += &adjoint(&k_rho_dag);
        for ch in self.channels.iter().filter(|c| c.recycled && !c.sparse.is_zero()) {
            // L (L ρ†)† = L ρ L†
            let mut l_rho_dag = Array2::zeros(rho.raw_dim());
            ch.sparse.left_mul_add(&rho_dag, &mut l_rho_dag);
            ch.sparse.left_mul_add(&adjoint(&l_rho_dag), &mut out);
        }
        out
    }

    /// Textbook dense evaluation `−i[H,ρ] + Σ (LρL† − ½{L†L, ρ})`.
    pub fn apply_direct(&self, rho: &Array2<C64>) -> Array2<C64> {
        let h = self.hamiltonian.entries();
        let mut out = (h.dot(rho) - rho.dot(h)) * (-I);
        for ch in &self.channels {
            let l = ch.op.entries();
            let l_dag = adjoint(l);
            let ldl = l_dag.dot(l);
            if ch.recycled {
                out = out + l.dot(rho).dot(&l_dag);
            }
            out = out - (ldl.dot(rho) + rho.dot(&ldl)) * C64::new(0.5, 0.0);
        }
        out
    }

    /// Dense superoperator acting on column-stacked density matrices.
    pub fn superoperator(&self) -> Superoperator {
        let d = self.space.composite_dim();
        let n = d * d;
        let mut s = Array2::<C64>::zeros((n, n));
        let idx = |i: usize, j: usize| i + j * d;
        let h = self.hamiltonian.entries();
        // −i(Hρ − ρH):  (Hρ)_ij = Σ_k H_ik ρ_kj,  (ρH)_ij = Σ_l ρ_il H_lj
        for i in 0..d {
            for k in 0..d {
                let v = h[[i, k]];
                if v == ZERO {
                    continue;
                }
                for j in 0..d {
                    s[[idx(i, j), idx(k, j)]] += -I * v;
                    // ρH term with (l, j) -> (i, k) relabelled: (ρH)_{j' k} gets ρ_{j' i} H_{i k}
                    s[[idx(j, k), idx(j, i)]] += I * v;
                }
            }
        }
        for ch in &self.channels {
            let l = ch.op.entries();
            let ldl = adjoint(l).dot(l);
            let nz: Vec<(usize, usize, C64)> = l
                .indexed_iter()
                .filter(|(_, v)| **v != ZERO)
                .map(|((i, k), v)| (i, k, *v))
                .collect();
            if ch.recycled {
                // (LρL†)_ij = Σ_kl L_ik ρ_kl conj(L_jl)
                for &(i, k, lik) in &nz {
                    for &(j, l_, ljl) in &nz {
                        s[[idx(i, j), idx(k, l_)]] += lik * ljl.conj();
                    }
                }
            }
            for i in 0..d {
                for k in 0..d {
                    let v = ldl[[i, k]];
                    if v == ZERO {
                        continue;
                    }
                    for j in 0..d {
                        s[[idx(i, j), idx(k, j)]] -= 0.5 * v;
                        s[[idx(j, k), idx(j, i)]] -= 0.5 * v;
                    }
                }
            }
        }
        Superoperator {
            space: self.space,
            entries: s,
        }
    }
}

fn adjoint(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

pub fn vectorize(rho: &Array2<C64>) -> Array1<C64> {
    let d = rho.nrows();
    Array1::from_shape_fn(d * d, |p| rho[[p % d, p / d]])
}

pub fn unvectorize(v: &Array1<C64>, d: usize) -> Array2<C64> {
    Array2::from_shape_fn((d, d), |(i, j)| v[i + j * d])
}

/// `ℒ` for given rates; see [`Liouvillian::jaynes_cummings`].
pub fn liouvillian(space: &SpaceDescriptor, g: f64, kappa: f64, gamma: f64, epsilon: f64) -> Result<Liouvillian> {
    Liouvillian::jaynes_cummings(space, &JcRates { g, kappa, gamma, epsilon })
}

/// Dense matrix of `ℒ` on column-stacked density matrices.
#[derive(Clone, Debug)]
pub struct Superoperator {
    space: SpaceDescriptor,
    entries: Array2<C64>,
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        unvectorize(&self.entries.dot(&vectorize(rho)), rho.nrows())
    }

    /// `Σ_i (ℒρ)_ii` for a column-stacked `ρ`.
    pub fn trace_of_image(&self, rho: &Array2<C64>) -> C64 {
        self.apply(rho).diag().sum()
    }

    /// Bytes needed by [`steady_state`] (matrix plus its LU copy).
    pub fn memory_estimate(space: &SpaceDescriptor) -> u64 {
        let n = (space.composite_dim() * space.composite_dim()) as u64;
        2 * n * n * 16
    }
}

/// Reciprocal condition number below which the bordered system is treated
/// as singular, i.e. the null space of `ℒ` has dimension > 1.
const DEGENERACY_RCOND: f64 = 1e-13;
pub const STEADY_STATE_RESIDUAL: f64 = 1e-8;
pub const TRUNCATION_POPULATION: f64 = 1e-6;

/// Null vector of `ℒ` with unit trace.
///
/// One (linearly dependent) diagonal row of `ℒ` is replaced by the trace
/// functional and the bordered system is LU-solved; the result is then
/// Hermitized and trace-normalized.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    let d = l.space.composite_dim();
    let n = d * d;
    let mut bordered = l.entries.clone();
    bordered.row_mut(0).fill(ZERO);
    for i in 0..d {
        bordered[[0, i + i * d]] = ONE;
    }
    let mut rhs = Array1::<C64>::zeros(n);
    rhs[0] = ONE;
    let lu = bordered.factorize_into().map_err(|_| Error::DegenerateNullSpace)?;
    let rcond = lu.rcond()?;
    if !(rcond > DEGENERACY_RCOND) {
        return Err(Error::DegenerateNullSpace);
    }
    let x = lu.solve_into(rhs)?;
    drop(lu);

    let mut rho = DensityMatrix::from_entries(unvectorize(&x, d))?;
    rho.hermitize_and_normalize()?;
    let residual = l
        .entries
        .dot(&vectorize(rho.entries()))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if !(residual <= STEADY_STATE_RESIDUAL) {
        return Err(Error::IllConditioned { residual });
    }
    let min_eval = rho.min_eigenvalue()?;
    if min_eval < -1e-8 {
        return Err(Error::IllConditioned { residual: min_eval.abs() });
    }
    let top = top_fock_population_dm(&l.space, rho.entries());
    if top > TRUNCATION_POPULATION {
        return Err(Error::TruncationExceeded {
            population: top,
            time: f64::INFINITY,
        });
    }
    Ok(rho)
}

/// Max-entry norm of `ℒρ`, evaluated in operator form.
pub fn residual(l: &Liouvillian, rho: &DensityMatrix) -> f64 {
    l.apply(rho.entries()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn rk4_step(l: &Liouvillian, rho: &Array2<C64>, dt: f64) -> Array2<C64> {
    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    let k1 = l.apply(rho);
    let k2 = l.apply(&(rho + &(&k1 * half)));
    let k3 = l.apply(&(rho + &(&k2 * half)));
    let k4 = l.apply(&(rho + &(&k3 * full)));
    let sixth = C64::new(dt / 6.0, 0.0);
    rho + &((k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * sixth)
}

const TRACE_DRIFT: f64 = 1e-8;
const NEGATIVITY: f64 = 1e-8;

/// Propagates `rho0` with classical RK4 and returns the state at each of
/// `sample_times` (non-decreasing, ≥ 0). Steps never exceed `dt`.
pub fn evolve_me_sampled(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    sample_times: &[f64],
    dt: f64,
) -> Result<Vec<DensityMatrix>> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    if rho0.dim() != l.space.composite_dim() {
        return Err(Error::DimensionMismatch {
            expected: l.space.composite_dim(),
            found: rho0.dim(),
        });
    }
    let tr0 = rho0.trace();
    let mut rho = rho0.entries().clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(sample_times.len());
    for &target in sample_times {
        if target < t {
            return Err(Error::invalid("sample_times", "must be non-decreasing and >= 0"));
        }
        let span = target - t;
        let steps = (span / dt).ceil() as usize;
        if steps > 0 {
            let h = span / steps as f64;
            for _ in 0..steps {
                rho = rk4_step(l, &rho, h);
                t += h;
                let drift = (rho.diag().sum() - tr0).norm();
                if !(drift < TRACE_DRIFT) {
                    return Err(Error::IntegrationFailure {
                        time: t,
                        reason: format!("trace drift {drift:e}"),
                    });
                }
            }
        }
        t = target;
        let snap = DensityMatrix::from_entries(rho.clone())?;
        let min_eval = snap.min_eigenvalue()?;
        if min_eval < -NEGATIVITY {
            return Err(Error::IntegrationFailure {
                time: t,
                reason: format!("negative eigenvalue {min_eval:e}"),
            });
        }
        out.push(snap);
    }
    Ok(out)
}

pub fn evolve_me(l: &Liouvillian, rho0: &DensityMatrix, t_final: f64, dt: f64) -> Result<DensityMatrix> {
    Ok(evolve_me_sampled(l, rho0, &[t_final], dt)?.pop().expect("one sample"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeUnit {
    /// Times measured in cavity lifetimes `1/κ`.
    InverseKappa,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WaitingTimeDensity {
    pub tau_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Trapezoidal `∫ w dτ` over `tau_grid`.
    pub norm_captured: f64,
    pub unit: TimeUnit,
}

impl WaitingTimeDensity {
    fn from_values(tau_grid: Vec<f64>, values: Vec<f64>) -> Self {
        let norm_captured = trapezoid(&tau_grid, &values);
        WaitingTimeDensity {
            tau_grid,
            values,
            norm_captured,
            unit: TimeUnit::InverseKappa,
        }
    }

    /// `∫ τ w dτ / ∫ w dτ` over the grid.
    pub fn mean(&self) -> f64 {
        let tw: Vec<f64> = self.tau_grid.iter().zip(&self.values).map(|(t, w)| t * w).collect();
        trapezoid(&self.tau_grid, &tw) / self.norm_captured
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation; zero outside the grid.
    pub fn interpolate(&self, tau: f64) -> f64 {
        let g = &self.tau_grid;
        if g.is_empty() || tau < g[0] || tau > g[g.len() - 1] {
            return 0.0;
        }
        let k = g.partition_point(|&x| x <= tau).min(g.len() - 1).max(1);
        let (t0, t1) = (g[k - 1], g[k]);
        let (w0, w1) = (self.values[k - 1], self.values[k]);
        if t1 == t0 {
            return w0;
        }
        w0 + (w1 - w0) * (tau - t0) / (t1 - t0)
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

fn validate_grid(tau_grid: &[f64]) -> Result<()> {
    if tau_grid.is_empty() {
        return Err(Error::invalid("tau_grid", "empty"));
    }
    if tau_grid[0] < 0.0 || tau_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("tau_grid", "must be non-decreasing and >= 0"));
    }
    Ok(())
}

const WTD_FLOOR: f64 = -1e-10;
const WTD_HARD_FLOOR: f64 = -1e-6;

/// Exclusive waiting-time density between consecutive atomic-emission
/// clicks, from the steady state and the no-jump generator of the atomic
/// channel (cavity channel kept, since it is monitored diffusively).
pub fn waiting_time_density_from(
    l: &Liouvillian,
    rho_ss: &DensityMatrix,
    gamma: f64,
    tau_grid: &[f64],
    dt: f64,
) -> Result<WaitingTimeDensity> {
    validate_grid(tau_grid)?;
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", "waiting times need gamma > 0"));
    }
    let space = l.space;
    let (sm, sp, _) = atom_ops(&space);
    let excited = sp.dot(&sm);
    let n_ss = crate::hilbert::expectation(rho_ss, &excited)?.re;
    if !(n_ss > 1e-300) {
        return Err(Error::NoEmission);
    }
    let no_jump = l.without_recycling(ATOMIC_CHANNEL)?;
    let mut rho = sm.entries().dot(rho_ss.entries()).dot(sp.entries());
    let sample = |rho: &Array2<C64>| -> f64 {
        // Tr[σ₊σ₋ ρ]: σ₊σ₋ is diagonal
        let mut acc = 0.0;
        for (i, v) in excited.entries().diag().iter().enumerate() {
            acc += v.re * rho[[i, i]].re;
        }
        gamma * acc / n_ss
    };
    let mut values = Vec::with_capacity(tau_grid.len());
    let mut t = 0.0;
    for &target in tau_grid {
        let span = target - t;
        let steps = (span / dt).ceil() as usize;
        if steps > 0 {
            let h = span / steps as f64;
            for _ in 0..steps {
                rho = rk4_step(&no_jump, &rho, h);
            }
        }
        t = target;
        let w = sample(&rho);
        if w < WTD_HARD_FLOOR {
            return Err(Error::IntegrationFailure {
                time: t,
                reason: format!("waiting-time density {w:e} below floor"),
            });
        }
        values.push(w.max(WTD_FLOOR));
    }
    Ok(WaitingTimeDensity::from_values(tau_grid.to_vec(), values))
}

/// Builds the Liouvillian and steady state, then calls
/// [`waiting_time_density_from`] with the default step bound.
pub fn waiting_time_density(space: &SpaceDescriptor, rates: &JcRates, tau_grid: &[f64]) -> Result<WaitingTimeDensity> {
    let l = Liouvillian::jaynes_cummings(space, rates)?;
    let rho_ss = steady_state(&l.superoperator())?;
    waiting_time_density_from(&l, &rho_ss, rates.gamma, tau_grid, rates.max_stable_dt())
}

/// Resonance-fluorescence waiting-time density
/// `w(τ) = C e^{−γτ/2} sin²(ντ)`, `ν = √(16ε² − γ²)/4`, normalized
/// analytically on `[0, ∞)`: `C = γε²/ν²`.
pub fn rf_reference_wtd(gamma: f64, epsilon: f64, tau_grid: &[f64]) -> Result<WaitingTimeDensity> {
    validate_grid(tau_grid)?;
    let disc = 16.0 * epsilon * epsilon - gamma * gamma;
    if !(disc > 0.0) || !(gamma > 0.0) {
        return Err(Error::invalid(
            "epsilon",
            "resonance-fluorescence reference needs 16 eps^2 > gamma^2 and gamma > 0",
        ));
    }
    let nu = disc.sqrt() / 4.0;
    let c = gamma * epsilon * epsilon / (nu * nu);
    let values = tau_grid
        .iter()
        .map(|&t| c * (-0.5 * gamma * t).exp() * (nu * t).sin().powi(2))
        .collect();
    Ok(WaitingTimeDensity::from_values(tau_grid.to_vec(), values))
}

/// Zeros of the resonance-fluorescence density, `4πn/√(16ε² − γ²)`.
pub fn rf_zero(gamma: f64, epsilon: f64, n: usize) -> f64 {
    4.0 * std::f64::consts::PI * n as f64 / (16.0 * epsilon * epsilon - gamma * gamma).sqrt()
}

pub fn uniform_grid(t_max: f64, points: usize) -> Vec<f64> {
    let step = t_max / (points - 1) as f64;
    (0..points).map(|k| k as f64 * step).collect()
}
