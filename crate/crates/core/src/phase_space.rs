//! Phase-space observables: reduced field states, Wigner functions on a
//! grid, analytic two-component cat references, Bloch coordinates and
//! density histograms.
//!
//! Wigner normalization: `W(α) = (2/π) Tr[ρ D(α) Π D(−α)]` with `α = x + iy`,
//! so the vacuum peaks at `2/π` and `∫W dx dy = 1`.

use std::f64::consts::{FRAC_2_PI, PI};

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{atom_ops, AtomLevel, DensityMatrix, Expectation, PureState, SpaceDescriptor, ZERO};

/// Partial trace over the atom.
pub trait ReduceField {
    fn reduced_field(&self, space: &SpaceDescriptor) -> Result<DensityMatrix>;
}

fn check_dim(space: &SpaceDescriptor, found: usize) -> Result<()> {
    if found != space.composite_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.composite_dim(),
            found,
        });
    }
    Ok(())
}

impl ReduceField for PureState {
    fn reduced_field(&self, space: &SpaceDescriptor) -> Result<DensityMatrix> {
        check_dim(space, self.dim())?;
        let m = space.field_dim();
        let psi = self.amplitudes();
        let mut rho = Array2::zeros((m, m));
        for n in 0..m {
            for k in 0..m {
                let mut acc = ZERO;
                for level in [AtomLevel::Lower, AtomLevel::Upper] {
                    acc += psi[space.index(n, level)] * psi[space.index(k, level)].conj();
                }
                rho[[n, k]] = acc;
            }
        }
        DensityMatrix::from_entries(rho)
    }
}

impl ReduceField for DensityMatrix {
    fn reduced_field(&self, space: &SpaceDescriptor) -> Result<DensityMatrix> {
        check_dim(space, self.dim())?;
        let m = space.field_dim();
        let full = self.entries();
        let mut rho = Array2::zeros((m, m));
        for n in 0..m {
            for k in 0..m {
                rho[[n, k]] = [AtomLevel::Lower, AtomLevel::Upper]
                    .iter()
                    .map(|&l| full[[space.index(n, l), space.index(k, l)]])
                    .sum();
            }
        }
        DensityMatrix::from_entries(rho)
    }
}

pub fn reduced_field<S: ReduceField + ?Sized>(space: &SpaceDescriptor, state: &S) -> Result<DensityMatrix> {
    state.reduced_field(space)
}

/// Atomic reduced state in the `{|−⟩, |+⟩}` basis.
pub fn reduced_atom(space: &SpaceDescriptor, state: &PureState) -> Result<[[C64; 2]; 2]> {
    check_dim(space, state.dim())?;
    let psi = state.amplitudes();
    let mut rho = [[ZERO; 2]; 2];
    for n in 0..space.field_dim() {
        for (i, li) in [AtomLevel::Lower, AtomLevel::Upper].into_iter().enumerate() {
            for (j, lj) in [AtomLevel::Lower, AtomLevel::Upper].into_iter().enumerate() {
                rho[i][j] += psi[space.index(n, li)] * psi[space.index(n, lj)].conj();
            }
        }
    }
    Ok(rho)
}

/// `(X, Y, Z)` with `X − iY = 2⟨σ₋⟩` and `Z = ⟨σ_z⟩`.
pub fn bloch_coords<S: Expectation + ?Sized>(space: &SpaceDescriptor, state: &S) -> Result<(f64, f64, f64)> {
    let (sm, _, sz) = atom_ops(space);
    let coherence = state.expectation(&sm)? * 2.0;
    Ok((coherence.re, -coherence.im, state.expectation(&sz)?.re))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, points: usize) -> Self {
        GridSpec {
            x_min: -half_width,
            x_max: half_width,
            nx: points,
            y_min: -half_width,
            y_max: half_width,
            ny: points,
        }
    }

    /// 201×201 over `[−6, 6]²`.
    pub fn strong_drive() -> Self {
        GridSpec::square(6.0, 201)
    }

    /// 201×201 over `[−3, 3]²`.
    pub fn weak_drive() -> Self {
        GridSpec::square(3.0, 201)
    }

    fn axes(&self) -> Result<(Array1<f64>, Array1<f64>)> {
        if self.nx < 2 || self.ny < 2 || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(Error::invalid("grid", "need at least 2 points and a positive extent per axis"));
        }
        Ok((
            Array1::linspace(self.x_min, self.x_max, self.nx),
            Array1::linspace(self.y_min, self.y_max, self.ny),
        ))
    }
}

/// `values[[iy, ix]] = W(x_axis[ix] + i y_axis[iy])`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub x_axis: Array1<f64>,
    pub y_axis: Array1<f64>,
    pub values: Array2<f64>,
    pub dx: f64,
    pub dy: f64,
    /// Set when the boundary carries more than `1e-4` of the peak value.
    pub boundary_warning: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

impl Peak {
    pub fn position(&self) -> C64 {
        C64::new(self.x, self.y)
    }
}

impl WignerGrid {
    fn from_fn(spec: &GridSpec, f: impl Fn(C64) -> f64 + Sync) -> Result<Self> {
        let (x_axis, y_axis) = spec.axes()?;
        let rows: Vec<Vec<f64>> = y_axis
            .as_slice()
            .expect("contiguous")
            .par_iter()
            .map(|&y| x_axis.iter().map(|&x| f(C64::new(x, y))).collect())
            .collect();
        let values = Array2::from_shape_fn((spec.ny, spec.nx), |(i, j)| rows[i][j]);
        let mut grid = WignerGrid {
            dx: x_axis[1] - x_axis[0],
            dy: y_axis[1] - y_axis[0],
            x_axis,
            y_axis,
            values,
            boundary_warning: false,
        };
        grid.boundary_warning = grid.boundary_max() > 1e-4 * grid.max_abs();
        Ok(grid)
    }

    pub fn integral(&self) -> f64 {
        self.values.sum() * self.dx * self.dy
    }

    /// `(Σ x W dxdy, Σ y W dxdy)`.
    pub fn first_moments(&self) -> (f64, f64) {
        let mut mx = 0.0;
        let mut my = 0.0;
        for ((iy, ix), w) in self.values.indexed_iter() {
            mx += self.x_axis[ix] * w;
            my += self.y_axis[iy] * w;
        }
        (mx * self.dx * self.dy, my * self.dx * self.dy)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    fn boundary_max(&self) -> f64 {
        let (ny, nx) = self.values.dim();
        let mut m: f64 = 0.0;
        for ix in 0..nx {
            m = m.max(self.values[[0, ix]].abs()).max(self.values[[ny - 1, ix]].abs());
        }
        for iy in 0..ny {
            m = m.max(self.values[[iy, 0]].abs()).max(self.values[[iy, nx - 1]].abs());
        }
        m
    }

    pub fn value_at(&self, ix: usize, iy: usize) -> f64 {
        self.values[[iy, ix]]
    }

    /// Strict local maxima (8-neighbourhood) above `min_fraction` of the
    /// global maximum, refined by a separable parabolic fit, largest first.
    pub fn local_maxima(&self, min_fraction: f64) -> Vec<Peak> {
        let (ny, nx) = self.values.dim();
        let floor = min_fraction * self.max();
        let w = &self.values;
        let mut peaks = Vec::new();
        for iy in 1..ny - 1 {
            for ix in 1..nx - 1 {
                let v = w[[iy, ix]];
                if v < floor {
                    continue;
                }
                let mut is_max = true;
                'n: for dy in [-1i64, 0, 1] {
                    for dx in [-1i64, 0, 1] {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let u = w[[(iy as i64 + dy) as usize, (ix as i64 + dx) as usize]];
                        // Ties resolved toward the lower index.
                        if u > v || (u == v && (dy, dx) < (0, 0)) {
                            is_max = false;
                            break 'n;
                        }
                    }
                }
                if !is_max {
                    continue;
                }
                let shift = |minus: f64, centre: f64, plus: f64| {
                    let denom = minus - 2.0 * centre + plus;
                    if denom < 0.0 {
                        0.5 * (minus - plus) / denom
                    } else {
                        0.0
                    }
                };
                let sx = shift(w[[iy, ix - 1]], v, w[[iy, ix + 1]]);
                let sy = shift(w[[iy - 1, ix]], v, w[[iy + 1, ix]]);
                peaks.push(Peak {
                    x: self.x_axis[ix] + sx * self.dx,
                    y: self.y_axis[iy] + sy * self.dy,
                    value: v,
                });
            }
        }
        peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
        peaks
    }
}

/// Wigner function of a field density matrix via the Laguerre recursion for
/// the Fock-basis kernels `W_{mn}(α)`.
pub fn wigner(rho_field: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    let rho = rho_field.entries();
    let m = rho.nrows();
    if m == 0 {
        return Err(Error::invalid("rho_field", "empty density matrix"));
    }
    let sqrt_n: Vec<f64> = (0..m).map(|n| (n as f64).sqrt()).collect();
    WignerGrid::from_fn(spec, |alpha| {
        let mut kernels = vec![ZERO; m];
        let mut w = 0.0;
        kernels[0] = C64::new(FRAC_2_PI * (-2.0 * alpha.norm_sqr()).exp(), 0.0);
        w += rho[[0, 0]].re * kernels[0].re;
        for n in 1..m {
            kernels[n] = 2.0 * alpha * kernels[n - 1] / sqrt_n[n];
            w += 2.0 * (rho[[0, n]] * kernels[n]).re;
        }
        for row in 1..m {
            let mut temp = kernels[row];
            kernels[row] = (2.0 * alpha.conj() * temp - sqrt_n[row] * kernels[row - 1]) / sqrt_n[row];
            w += (rho[[row, row]] * kernels[row]).re;
            for n in row + 1..m {
                let next = (2.0 * alpha * kernels[n - 1] - sqrt_n[row] * temp) / sqrt_n[n];
                temp = kernels[n];
                kernels[n] = next;
                w += 2.0 * (rho[[row, n]] * kernels[n]).re;
            }
        }
        w
    })
}

/// `(2/π) Tr[|a⟩⟨b| D(α) Π D(−α)]` for coherent states `|a⟩`, `|b⟩`.
pub fn coherent_cross_wigner(a: C64, b: C64, alpha: C64) -> C64 {
    let u = b - alpha;
    let v = alpha - a;
    let exponent = 0.5 * (alpha * b.conj() - alpha.conj() * b + alpha.conj() * a - alpha * a.conj())
        - 0.5 * u.norm_sqr()
        - 0.5 * v.norm_sqr()
        + u.conj() * v;
    FRAC_2_PI * exponent.exp()
}

/// `W` of a coherent state `|β⟩`: `(2/π) exp(−2|α − β|²)`.
pub fn coherent_wigner(beta: C64, alpha: C64) -> f64 {
    FRAC_2_PI * (-2.0 * (alpha - beta).norm_sqr()).exp()
}

/// Wigner function of the normalized superposition `|α₊⟩ + e^{iφ}|α₋⟩`.
pub fn cat_reference(alpha_plus: C64, alpha_minus: C64, phi: f64, spec: &GridSpec) -> Result<WignerGrid> {
    let overlap = (-0.5 * alpha_plus.norm_sqr() - 0.5 * alpha_minus.norm_sqr() + alpha_plus.conj() * alpha_minus).exp();
    let norm_sq = 2.0 + 2.0 * (C64::from_polar(1.0, phi) * overlap).re;
    let phase = C64::from_polar(1.0, phi);
    WignerGrid::from_fn(spec, |alpha| {
        let direct = coherent_wigner(alpha_plus, alpha) + coherent_wigner(alpha_minus, alpha);
        let cross = 2.0 * (phase * coherent_cross_wigner(alpha_plus, alpha_minus, alpha)).re;
        (direct + cross) / norm_sq
    })
}

/// Half-sum of the two coherent Wigner functions: the dephased limit of
/// [`cat_reference`].
pub fn mixture_reference(alpha_plus: C64, alpha_minus: C64, spec: &GridSpec) -> Result<WignerGrid> {
    WignerGrid::from_fn(spec, |alpha| {
        0.5 * (coherent_wigner(alpha_plus, alpha) + coherent_wigner(alpha_minus, alpha))
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub bin_centers: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<usize>,
    pub bin_width: f64,
    /// Samples that fell inside the range.
    pub in_range: usize,
}

/// Density-normalized histogram over `[lo, hi)`; the last bin is closed.
pub fn histogram(samples: &[f64], bin_width: f64, range: (f64, f64)) -> Result<Histogram> {
    let (lo, hi) = range;
    if !(bin_width > 0.0) || !(hi > lo) {
        return Err(Error::invalid("histogram", "need bin_width > 0 and hi > lo"));
    }
    let bins = ((hi - lo) / bin_width - 1e-9).ceil().max(1.0) as usize;
    let mut counts = vec![0usize; bins];
    for &s in samples {
        if s < lo || s > hi || !s.is_finite() {
            continue;
        }
        let k = (((s - lo) / bin_width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let in_range: usize = counts.iter().sum();
    let densities = counts
        .iter()
        .map(|&c| {
            if in_range == 0 {
                0.0
            } else {
                c as f64 / (in_range as f64 * bin_width)
            }
        })
        .collect();
    Ok(Histogram {
        bin_centers: (0..bins).map(|k| lo + (k as f64 + 0.5) * bin_width).collect(),
        densities,
        counts,
        bin_width,
        in_range,
    })
}

/// Pointwise bound `|W| ≤ 2/π`.
pub const WIGNER_BOUND: f64 = FRAC_2_PI;

/// Fringe period of the interference term along the axis normal to
/// `α₊ − α₋`.
pub fn fringe_period(alpha_plus: C64, alpha_minus: C64) -> f64 {
    PI / (alpha_plus - alpha_minus).norm()
}
