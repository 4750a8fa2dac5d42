//! Closed-form predictions for the strongly driven regime: dressed
//! attractor amplitudes, the quasienergy drift of the secular ansatz, the
//! bistability threshold and the bimodal field amplitudes near threshold.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{SpaceDescriptor, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Paired with `|↑⟩` and `α > 0`.
    Up,
    /// Paired with `|↓⟩` and `α < 0`.
    Down,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Up => 1.0,
            Branch::Down => -1.0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(name, "must be finite and > 0"));
    }
    Ok(())
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::invalid(name, "must be finite and >= 0"));
    }
    Ok(())
}

/// `(+g/(2κ), −g/(2κ))`.
pub fn dressed_attractors(g: f64, kappa: f64) -> Result<(f64, f64)> {
    non_negative("g", g)?;
    positive("kappa", kappa)?;
    let alpha = g / (2.0 * kappa);
    Ok((alpha, -alpha))
}

/// `dE′/dt = ∓gα/2 + 4κα²cos²θ − 4iκα² cosθ sinθ`, upper sign on the up
/// branch. The sign of the linear term follows the branch, not the sign of
/// `α`.
pub fn quasienergy_drift(alpha: C64, theta: f64, g: f64, kappa: f64, branch: Branch) -> C64 {
    let (s, c) = theta.sin_cos();
    let a2 = alpha * alpha;
    -branch.sign() * g * alpha / 2.0 + 4.0 * kappa * a2 * c * c - C64::new(0.0, 4.0 * kappa * c * s) * a2
}

/// `ε = g²/(2κ)`.
pub fn bistability_threshold(g: f64, kappa: f64) -> Result<f64> {
    non_negative("g", g)?;
    positive("kappa", kappa)?;
    Ok(g * g / (2.0 * kappa))
}

/// Mean lifetime `4/γ` of a dressed attractor under spontaneous emission:
/// jumps at rate `γ/2`, each switching with probability one half.
pub fn dressed_lifetime(gamma: f64) -> Result<f64> {
    positive("gamma", gamma)?;
    Ok(4.0 / gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractorPrediction {
    pub alpha_up: C64,
    pub alpha_down: C64,
    pub a_factor: f64,
    /// Bloch-distribution centres sit at `(±x_center, y_center)`.
    pub x_center: f64,
    pub y_center: f64,
    pub threshold_epsilon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BimodalPrediction {
    Bistable(AttractorPrediction),
    Monostable { threshold_epsilon: f64 },
}

impl BimodalPrediction {
    pub fn bistable(self) -> Result<AttractorPrediction> {
        match self {
            BimodalPrediction::Bistable(p) => Ok(p),
            BimodalPrediction::Monostable { threshold_epsilon } => Err(Error::BelowThreshold {
                threshold: threshold_epsilon,
            }),
        }
    }
}

/// `A = √(1 − [g/(2ε)]²(g/κ)²)`,
/// `α_B± = A[±g/(2κ) + iA ε/g] − iε/g`, centres `±A + i g²/(2εκ)`.
pub fn bimodal_peaks(g: f64, kappa: f64, epsilon: f64) -> Result<BimodalPrediction> {
    positive("g", g)?;
    positive("kappa", kappa)?;
    positive("epsilon", epsilon)?;
    let threshold = bistability_threshold(g, kappa)?;
    if epsilon < threshold {
        return Ok(BimodalPrediction::Monostable {
            threshold_epsilon: threshold,
        });
    }
    let ratio = g / (2.0 * epsilon) * (g / kappa);
    let a = (1.0 - ratio * ratio).max(0.0).sqrt();
    let drive = epsilon / g;
    let shift = C64::new(0.0, -drive);
    let alpha = |sign: f64| a * C64::new(sign * g / (2.0 * kappa), a * drive) + shift;
    Ok(BimodalPrediction::Bistable(AttractorPrediction {
        alpha_up: alpha(1.0),
        alpha_down: alpha(-1.0),
        a_factor: a,
        x_center: a,
        y_center: g * g / (2.0 * epsilon * kappa),
        threshold_epsilon: threshold,
    }))
}

/// Norm of the part of `[−κa†a ± (g/2)(a† − a)]|α⟩` orthogonal to `|α⟩`,
/// restricted to the retained Fock levels. The exact coherent amplitudes
/// are carried one level past the cutoff so that `a` acts without a
/// boundary artifact. Requires `|α|² + 3|α| ≤ n_max`.
pub fn verify_secular_ansatz(space: &SpaceDescriptor, g: f64, kappa: f64, alpha: C64, branch: Branch) -> Result<f64> {
    let m = space.field_dim();
    let mean = alpha.norm_sqr();
    let mut psi = Vec::with_capacity(m + 1);
    let mut term = C64::new((-0.5 * mean).exp(), 0.0);
    for n in 0..=m {
        if n > 0 {
            term = term * alpha / (n as f64).sqrt();
        }
        psi.push(term);
    }
    if mean + 3.0 * alpha.norm() > space.fock_cutoff() as f64 {
        return Err(Error::TruncationExceeded {
            population: psi[m - 1].norm_sqr(),
            time: 0.0,
        });
    }
    let half_g = branch.sign() * g / 2.0;
    let v: Vec<C64> = (0..m)
        .map(|n| {
            let lower = if n > 0 { (n as f64).sqrt() * psi[n - 1] } else { ZERO };
            let upper = ((n + 1) as f64).sqrt() * psi[n + 1];
            -kappa * n as f64 * psi[n] + half_g * (lower - upper)
        })
        .collect();
    let kept = &psi[..m];
    let weight: f64 = kept.iter().map(|p| p.norm_sqr()).sum();
    let projection: C64 = kept.iter().zip(&v).map(|(p, x)| p.conj() * x).sum::<C64>() / weight;
    Ok(v
        .iter()
        .zip(kept)
        .map(|(x, p)| (x - projection * p).norm_sqr())
        .sum::<f64>()
        .sqrt())
}
