//! Truncated Fock ⊗ two-level composite space, the operators acting on it,
//! and pure/mixed state containers.
//!
//! Index layout is field-major: the composite index of `|n⟩ ⊗ |s⟩` is
//! `2 n + s`, with `s = 0` for the lower atomic level `|−⟩` and `s = 1` for
//! the upper level `|+⟩`. Every module goes through [`SpaceDescriptor::index`]
//! or the Kronecker product `field ⊗ atom`, which yields the same layout.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::{Add, Mul, Sub};

use ndarray::{linalg::kron, Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tensor-product layout of the composite index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorOrdering {
    /// `index = 2 * n + s`: field index major, atom index minor.
    FieldMajor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomLevel {
    Lower,
    Upper,
}

impl AtomLevel {
    pub fn index(self) -> usize {
        match self {
            AtomLevel::Lower => 0,
            AtomLevel::Upper => 1,
        }
    }
}

/// Atomic amplitudes in the bare basis `(|−⟩, |+⟩)`.
pub type AtomAmplitudes = [C64; 2];

pub fn atom_lower() -> AtomAmplitudes {
    [ONE, ZERO]
}

pub fn atom_upper() -> AtomAmplitudes {
    [ZERO, ONE]
}

/// `|↑⟩ = (|+⟩ + |−⟩)/√2`, energy `+ε`.
pub fn dressed_up() -> AtomAmplitudes {
    [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)]
}

/// `|↓⟩ = (|+⟩ − |−⟩)/√2`, energy `−ε`.
pub fn dressed_down() -> AtomAmplitudes {
    [C64::new(-FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceDescriptor {
    fock_cutoff: usize,
}

impl SpaceDescriptor {
    /// Highest retained Fock level `n_max`.
    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn field_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn composite_dim(&self) -> usize {
        2 * self.field_dim()
    }

    pub fn ordering(&self) -> TensorOrdering {
        TensorOrdering::FieldMajor
    }

    pub fn index(&self, n: usize, level: AtomLevel) -> usize {
        debug_assert!(n <= self.fock_cutoff);
        2 * n + level.index()
    }
}

pub fn build_space(fock_cutoff: usize) -> Result<SpaceDescriptor> {
    if fock_cutoff < 1 {
        return Err(Error::invalid("fock_cutoff", "must be at least 1"));
    }
    Ok(SpaceDescriptor { fock_cutoff })
}

/// Dense square complex matrix on the composite (or a factor) space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    entries: Array2<C64>,
}

impl Operator {
    pub fn from_entries(entries: Array2<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("entries", "non-finite matrix element"));
        }
        Ok(Operator { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Operator {
            entries: Array2::zeros((dim, dim)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Operator {
            entries: Array2::eye(dim),
        }
    }

    /// `field ⊗ atom` in the field-major layout.
    pub fn tensor(field: &Array2<C64>, atom: &Array2<C64>) -> Self {
        Operator {
            entries: kron(field, atom),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        Operator {
            entries: self.entries.t().mapv(|z| z.conj()),
        }
    }

    pub fn dot(&self, other: &Operator) -> Self {
        Operator {
            entries: self.entries.dot(&other.entries),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Operator {
            entries: &self.entries * factor,
        }
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        &self.dot(other) - &other.dot(self)
    }

    pub fn apply(&self, vector: &Array1<C64>) -> Array1<C64> {
        self.entries.dot(vector)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator {
            entries: &self.entries + &rhs.entries,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator {
            entries: &self.entries - &rhs.entries,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.dot(rhs)
    }
}

/// Conditioned wavefunction. `norm_log` accumulates `ln‖ψ‖` removed by
/// [`PureState::normalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Array1<C64>,
    norm_log: f64,
}

impl PureState {
    pub fn from_amplitudes(amplitudes: Array1<C64>) -> Self {
        PureState {
            amplitudes,
            norm_log: 0.0,
        }
    }

    /// Normalized `|field⟩ ⊗ |atom⟩`.
    pub fn product(space: &SpaceDescriptor, field: &Array1<C64>, atom: &AtomAmplitudes) -> Result<Self> {
        if field.len() != space.field_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.field_dim(),
                found: field.len(),
            });
        }
        let atom = Array1::from(atom.to_vec());
        let mut state = PureState::from_amplitudes(kron_vec(field, &atom));
        state.normalize()?;
        Ok(state)
    }

    pub fn basis(space: &SpaceDescriptor, n: usize, level: AtomLevel) -> Self {
        let mut amplitudes = Array1::zeros(space.composite_dim());
        amplitudes[space.index(n, level)] = ONE;
        PureState::from_amplitudes(amplitudes)
    }

    /// `|0⟩ ⊗ |−⟩`, the initial state of every trajectory.
    pub fn ground(space: &SpaceDescriptor) -> Self {
        PureState::basis(space, 0, AtomLevel::Lower)
    }

    /// Normalized truncated coherent state `|β⟩ ⊗ |atom⟩`.
    pub fn coherent(space: &SpaceDescriptor, beta: C64, atom: &AtomAmplitudes) -> Result<Self> {
        PureState::product(space, &coherent_amplitudes(space.field_dim(), beta), atom)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut Array1<C64> {
        &mut self.amplitudes
    }

    pub fn norm_log(&self) -> f64 {
        self.norm_log
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescales to unit norm and returns the norm that was removed.
    pub fn normalize(&mut self) -> Result<f64> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        self.amplitudes.mapv_inplace(|z| z / norm);
        self.norm_log += norm.ln();
        Ok(norm)
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        let d = self.dim();
        let psi = &self.amplitudes;
        DensityMatrix {
            entries: Array2::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj()),
        }
    }
}

/// Truncated coherent-state expansion `e^{−|β|²/2} βⁿ/√n!`, renormalized.
pub fn coherent_amplitudes(field_dim: usize, beta: C64) -> Array1<C64> {
    let mut amps = Array1::zeros(field_dim);
    let mut term = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..field_dim {
        if n > 0 {
            term = term * beta / (n as f64).sqrt();
        }
        amps[n] = term;
    }
    let norm = amps.iter().map(|z: &C64| z.norm_sqr()).sum::<f64>().sqrt();
    amps.mapv_inplace(|z| z / norm);
    amps
}

fn kron_vec(a: &Array1<C64>, b: &Array1<C64>) -> Array1<C64> {
    let mut out = Array1::zeros(a.len() * b.len());
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: Array2<C64>,
}

impl DensityMatrix {
    /// Wraps a matrix without validation; see [`DensityMatrix::validate`].
    pub fn from_entries(entries: Array2<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        Ok(DensityMatrix { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut err: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                err = err.max((self.entries[[i, j]] - self.entries[[j, i]].conj()).norm());
            }
        }
        err
    }

    /// `(ρ + ρ†)/2`, then divide by the trace.
    pub fn hermitize_and_normalize(&mut self) -> Result<()> {
        let herm = (&self.entries + &self.entries.t().mapv(|z| z.conj())) * C64::new(0.5, 0.0);
        let tr = herm.diag().sum().re;
        if tr.abs() < f64::MIN_POSITIVE || !tr.is_finite() {
            return Err(Error::ZeroVector);
        }
        self.entries = herm / C64::new(tr, 0.0);
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        use ndarray_linalg::{EigValsh, UPLO};
        let evals = self.entries.eigvalsh(UPLO::Upper)?;
        Ok(evals.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// Checks Hermiticity, unit trace (both within `tol`) and eigenvalues
    /// above `-neg_tol`.
    pub fn validate(&self, tol: f64, neg_tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::invalid("density_matrix", format!("not Hermitian (error {herm:e})")));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::invalid("density_matrix", format!("trace {tr} differs from 1")));
        }
        let min_eval = self.min_eigenvalue()?;
        if min_eval < -neg_tol {
            return Err(Error::invalid(
                "density_matrix",
                format!("negative eigenvalue {min_eval:e}"),
            ));
        }
        Ok(())
    }
}

/// Returns `(a, a†)` on the composite space.
pub fn field_ops(space: &SpaceDescriptor) -> (Operator, Operator) {
    let nf = space.field_dim();
    let mut a_field = Array2::zeros((nf, nf));
    for n in 1..nf {
        a_field[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    let a = Operator::tensor(&a_field, &Array2::eye(2));
    let a_dagger = a.adjoint();
    (a, a_dagger)
}

/// Returns `(σ₋, σ₊, σ_z)` on the composite space.
pub fn atom_ops(space: &SpaceDescriptor) -> (Operator, Operator, Operator) {
    let id = Array2::eye(space.field_dim());
    let mut sp = Array2::zeros((2, 2));
    sp[[AtomLevel::Upper.index(), AtomLevel::Lower.index()]] = ONE;
    let mut sz = Array2::zeros((2, 2));
    sz[[AtomLevel::Upper.index(), AtomLevel::Upper.index()]] = ONE;
    sz[[AtomLevel::Lower.index(), AtomLevel::Lower.index()]] = -ONE;
    let sigma_plus = Operator::tensor(&id, &sp);
    let sigma_minus = sigma_plus.adjoint();
    let sigma_z = Operator::tensor(&id, &sz);
    (sigma_minus, sigma_plus, sigma_z)
}

/// `𝒜_θ = ½(a e^{−iθ} + a† e^{iθ})`.
pub fn quadrature_op(space: &SpaceDescriptor, theta: f64) -> Operator {
    let (a, a_dagger) = field_ops(space);
    let phase = C64::from_polar(1.0, theta);
    &a.scale(0.5 * phase.conj()) + &a_dagger.scale(0.5 * phase)
}

/// `H = i g (a†σ₋ − aσ₊) + ε(σ₊ + σ₋)` with ħ = 1.
pub fn jc_hamiltonian(space: &SpaceDescriptor, g: f64, epsilon: f64) -> Operator {
    let (a, a_dagger) = field_ops(space);
    let (sm, sp, _) = atom_ops(space);
    let exchange = &a_dagger.dot(&sm) - &a.dot(&sp);
    let drive = &sp + &sm;
    &exchange.scale(I * g) + &drive.scale(C64::new(epsilon, 0.0))
}

/// Returns `(d_z, d₊, d₋)` built from the dressed states `|↑⟩, |↓⟩`.
pub fn dressed_ops(space: &SpaceDescriptor) -> (Operator, Operator, Operator) {
    let up = dressed_up();
    let down = dressed_down();
    let outer = |ket: &AtomAmplitudes, bra: &AtomAmplitudes| {
        Array2::from_shape_fn((2, 2), |(i, j)| ket[i] * bra[j].conj())
    };
    let id = Array2::eye(space.field_dim());
    let d_z = Operator::tensor(&id, &(outer(&up, &up) - outer(&down, &down)));
    let d_plus = Operator::tensor(&id, &outer(&up, &down));
    let d_minus = d_plus.adjoint();
    (d_z, d_plus, d_minus)
}

/// `⟨ψ|O|ψ⟩` or `Tr[ρ O]`.
pub trait Expectation {
    fn expectation(&self, op: &Operator) -> Result<C64>;
}

impl Expectation for PureState {
    fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                found: self.dim(),
            });
        }
        let o_psi = op.apply(&self.amplitudes);
        Ok(self
            .amplitudes
            .iter()
            .zip(o_psi.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

impl Expectation for DensityMatrix {
    fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                found: self.dim(),
            });
        }
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            for k in 0..d {
                acc += self.entries[[i, k]] * op.entries[[k, i]];
            }
        }
        Ok(acc)
    }
}

pub fn expectation<S: Expectation + ?Sized>(state: &S, op: &Operator) -> Result<C64> {
    state.expectation(op)
}

/// Population of the highest retained Fock level.
pub fn top_fock_population(space: &SpaceDescriptor, amplitudes: &[C64]) -> f64 {
    let n = space.fock_cutoff();
    amplitudes[space.index(n, AtomLevel::Lower)].norm_sqr()
        + amplitudes[space.index(n, AtomLevel::Upper)].norm_sqr()
}

/// Population of the highest retained Fock level in a composite density matrix.
pub fn top_fock_population_dm(space: &SpaceDescriptor, rho: &Array2<C64>) -> f64 {
    let n = space.fock_cutoff();
    rho[[space.index(n, AtomLevel::Lower), space.index(n, AtomLevel::Lower)]].re
        + rho[[space.index(n, AtomLevel::Upper), space.index(n, AtomLevel::Upper)]].re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn space(n: usize) -> SpaceDescriptor {
        build_space(n).unwrap()
    }

    #[test]
    fn composite_dimensions() {
        assert_eq!(space(35).composite_dim(), 72);
        assert_eq!(space(20).composite_dim(), 42);
        assert_eq!(space(1).composite_dim(), 4);
        assert!(build_space(0).is_err());
        assert_eq!(space(3).ordering(), TensorOrdering::FieldMajor);
        assert_eq!(space(3).index(2, AtomLevel::Upper), 5);
    }

    #[test]
    fn number_operator_on_vacuum() {
        let s = space(5);
        let (a, ad) = field_ops(&s);
        let n_op = ad.dot(&a);
        let psi = PureState::ground(&s);
        assert_abs_diff_eq!(psi.expectation(&n_op).unwrap().norm(), 0.0);
        assert_abs_diff_eq!(a.adjoint().max_abs_diff(&ad), 0.0);
    }

    #[test]
    fn truncated_commutator() {
        let s = space(6);
        let (a, ad) = field_ops(&s);
        let comm = a.commutator(&ad);
        let nmax = s.fock_cutoff();
        for n in 0..=nmax {
            for lvl in [AtomLevel::Lower, AtomLevel::Upper] {
                let i = s.index(n, lvl);
                let expected = if n < nmax { 1.0 } else { -(nmax as f64) };
                assert_abs_diff_eq!(comm.entries()[[i, i]].re, expected, epsilon = 1e-14);
            }
        }
        let off: f64 = comm
            .entries()
            .indexed_iter()
            .filter(|((i, j), _)| i != j)
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max);
        assert!(off < 1e-14);
    }

    #[test]
    fn annihilation_eigenrelation_on_coherent_state() {
        let s = space(20);
        let beta = C64::new(0.5, 0.0);
        let (a, _) = field_ops(&s);
        let psi = PureState::coherent(&s, beta, &atom_lower()).unwrap();
        let lhs = a.apply(psi.amplitudes());
        let dev = lhs
            .iter()
            .zip(psi.amplitudes().iter())
            .map(|(x, y)| (x - beta * y).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-8, "{dev}");
    }

    #[test]
    fn atomic_algebra() {
        let s = space(3);
        let (sm, sp, sz) = atom_ops(&s);
        let psi = PureState::ground(&s);
        assert_abs_diff_eq!(sm.apply(psi.amplitudes()).iter().map(|z| z.norm()).sum::<f64>(), 0.0);
        let anti = &sp.dot(&sm) + &sm.dot(&sp);
        assert_abs_diff_eq!(anti.max_abs_diff(&Operator::identity(s.composite_dim())), 0.0);
        assert_abs_diff_eq!(psi.expectation(&sz).unwrap().re, -1.0);
    }

    #[test]
    fn quadratures() {
        let s = space(30);
        let (a, ad) = field_ops(&s);
        let q0 = quadrature_op(&s, 0.0);
        assert!(q0.max_abs_diff(&(&a + &ad).scale(C64::new(0.5, 0.0))) < 1e-15);
        assert!(quadrature_op(&s, 1.234).hermiticity_error() < 1e-14);

        let beta = C64::new(1.0, 0.3);
        let psi = PureState::coherent(&s, beta, &atom_lower()).unwrap();
        let q = psi.expectation(&quadrature_op(&s, std::f64::consts::FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(q.re, 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(q.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_sum_recovers_annihilation_below_cutoff() {
        let s = space(8);
        let (a, _) = field_ops(&s);
        let combo = &quadrature_op(&s, 0.0) + &quadrature_op(&s, std::f64::consts::FRAC_PI_2).scale(I);
        assert!(combo.max_abs_diff(&a) < 1e-14);
    }

    #[test]
    fn hamiltonian_limits() {
        let s = space(4);
        assert_abs_diff_eq!(jc_hamiltonian(&s, 0.0, 0.0).max_abs_diff(&Operator::zeros(s.composite_dim())), 0.0);
        let h = jc_hamiltonian(&space(35), 7.0, 300.0);
        assert!(h.is_hermitian(1e-12));

        use ndarray_linalg::{EigValsh, UPLO};
        let eps = 2.5;
        let evals = jc_hamiltonian(&s, 0.0, eps).entries().eigvalsh(UPLO::Upper).unwrap();
        let nf = s.field_dim();
        for (k, e) in evals.iter().enumerate() {
            let expected = if k < nf { -eps } else { eps };
            assert_abs_diff_eq!(*e, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn dressed_operator_relations() {
        let s = space(35);
        let (d_z, d_plus, d_minus) = dressed_ops(&s);
        let (sm, sp, sz) = atom_ops(&s);
        assert!(d_z.max_abs_diff(&(&sp + &sm)) < 1e-14);
        assert!(sz.max_abs_diff(&(&d_plus + &d_minus)) < 1e-14);

        let up = PureState::coherent(&s, ZERO, &dressed_up()).unwrap();
        let dz_up = d_z.apply(up.amplitudes());
        let dev = dz_up
            .iter()
            .zip(up.amplitudes().iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-15);
        assert_abs_diff_eq!(up.expectation(&sm).unwrap().re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn bare_and_dressed_drift_agree() {
        // −iε(σ₊+σ₋) + g(a†σ₋ − aσ₊)
        //   = −iε d_z + (g/2) d_z (a† − a) + (g/2)(d₊ − d₋)(a† + a)
        let s = space(35);
        let (g, eps) = (7.0, 300.0);
        let (a, ad) = field_ops(&s);
        let (sm, sp, _) = atom_ops(&s);
        let (d_z, d_plus, d_minus) = dressed_ops(&s);
        let bare = &(&sp + &sm).scale(-I * eps) + &(&ad.dot(&sm) - &a.dot(&sp)).scale(C64::new(g, 0.0));
        let dressed = &(&d_z.scale(-I * eps) + &d_z.dot(&(&ad - &a)).scale(C64::new(g / 2.0, 0.0)))
            + &(&d_plus - &d_minus).dot(&(&ad + &a)).scale(C64::new(g / 2.0, 0.0));
        assert!(bare.max_abs_diff(&dressed) < 1e-12);
    }

    #[test]
    fn density_expectations() {
        let s = space(3);
        let rho = PureState::coherent(&s, C64::new(0.4, -0.2), &dressed_down())
            .unwrap()
            .to_density_matrix();
        let tr = rho.expectation(&Operator::identity(s.composite_dim())).unwrap();
        assert_abs_diff_eq!(tr.re, 1.0, epsilon = 1e-14);
        assert!(rho.validate(1e-10, 1e-8).is_ok());
        let wrong = Operator::identity(2);
        assert!(matches!(rho.expectation(&wrong), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn field_and_atom_operators_commute() {
        let s = space(10);
        let (a, _) = field_ops(&s);
        let (sm, _, _) = atom_ops(&s);
        assert!(a.commutator(&sm).max_abs_diff(&Operator::zeros(s.composite_dim())) < 1e-14);
    }

    #[test]
    fn normalize_tracks_log_norm() {
        let mut psi = PureState::from_amplitudes(Array1::from(vec![C64::new(3.0, 0.0), C64::new(0.0, 4.0)]));
        let n = psi.normalize().unwrap();
        assert_abs_diff_eq!(n, 5.0);
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(psi.norm_log(), 5f64.ln());
        let mut zero = PureState::from_amplitudes(Array1::zeros(4));
        assert!(matches!(zero.normalize(), Err(Error::ZeroVector)));
    }
}
